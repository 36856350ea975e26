use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::RiskCurve;
use crate::error::{Error, Result};

/// Absolute slack added to twice the standard error when comparing a
/// fitted exponent with theory.
pub const RATE_BAND: f64 = 0.15;

/// Risk exponent of the full estimator over all convex truths:
/// `−4/(d+4)` for `d ≤ 4`, `−2/d` beyond.
pub fn worst_case_exponent(dim: usize) -> f64 {
    let d = dim as f64;
    if dim <= 4 {
        -4.0 / (d + 4.0)
    } else {
        -2.0 / d
    }
}

/// Exponent in `n` for piecewise-affine truths with a fixed number of
/// pieces: `−1` for `d ≤ 4`, `−4/d` beyond.
pub fn adaptive_exponent(dim: usize) -> f64 {
    if dim <= 4 {
        -1.0
    } else {
        -4.0 / dim as f64
    }
}

pub fn minimax_exponent(dim: usize) -> f64 {
    -4.0 / (dim as f64 + 4.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    WorstCase,
    Adaptive,
    Minimax,
}

impl Regime {
    pub fn exponent(self, dim: usize) -> f64 {
        match self {
            Regime::WorstCase => worst_case_exponent(dim),
            Regime::Adaptive => adaptive_exponent(dim),
            Regime::Minimax => minimax_exponent(dim),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Regime::WorstCase => "worst_case",
            Regime::Adaptive => "adaptive",
            Regime::Minimax => "minimax",
        }
    }
}

/// OLS slope of `log(mean_risk)` on `log(n)` and its standard error.
pub fn fit_rate(curve: &RiskCurve) -> Result<(f64, f64)> {
    let rows = &curve.rows;
    if rows.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 rows to fit a rate, got {}",
            rows.len()
        )));
    }
    if let Some(r) = rows.iter().find(|r| !(r.mean_risk > 0.0) || r.n == 0) {
        return Err(Error::InvalidArgument(format!(
            "nonpositive risk {} at n = {}",
            r.mean_risk, r.n
        )));
    }
    let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.mean_risk.ln()).collect();
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all sample sizes are equal".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - my - slope * (a - mx)).powi(2))
        .sum();
    Ok((slope, (rss / (m - 2.0) / sxx).sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeDescriptor {
    pub label: String,
    pub dim: usize,
    pub regime: Regime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEntry {
    pub label: String,
    pub dim: usize,
    pub regime: Regime,
    pub theoretical: f64,
    pub minimax: f64,
    /// `None` when the curve cannot be fitted.
    pub fitted_slope: Option<f64>,
    pub stderr: Option<f64>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RateTable {
    pub entries: Vec<RateEntry>,
}

/// Whether `slope` lies outside `theory ± (2·stderr + RATE_BAND)`.
pub fn rate_flagged(slope: f64, stderr: f64, theory: f64) -> bool {
    !((slope - theory).abs() <= 2.0 * stderr + RATE_BAND)
}

pub fn rate_report(curves: &[(RiskCurve, RegimeDescriptor)]) -> RateTable {
    let entries = curves
        .iter()
        .map(|(curve, desc)| {
            let theoretical = desc.regime.exponent(desc.dim);
            let fitted = fit_rate(curve).ok();
            RateEntry {
                label: desc.label.clone(),
                dim: desc.dim,
                regime: desc.regime,
                theoretical,
                minimax: minimax_exponent(desc.dim),
                fitted_slope: fitted.map(|f| f.0),
                stderr: fitted.map(|f| f.1),
                flagged: fitted.is_none_or(|(s, se)| rate_flagged(s, se, theoretical)),
            }
        })
        .collect();
    RateTable { entries }
}

impl RateTable {
    /// CSV with header
    /// `label,dim,regime,theoretical,minimax,fitted_slope,stderr,flagged`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "label",
            "dim",
            "regime",
            "theoretical",
            "minimax",
            "fitted_slope",
            "stderr",
            "flagged",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for e in &self.entries {
            w.write_record([
                e.label.clone(),
                e.dim.to_string(),
                e.regime.name().to_string(),
                e.theoretical.to_string(),
                e.minimax.to_string(),
                opt(e.fitted_slope),
                opt(e.stderr),
                e.flagged.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::RiskRow;

    fn curve(ns: &[usize], risk: impl Fn(usize) -> f64) -> RiskCurve {
        RiskCurve {
            rows: ns
                .iter()
                .map(|&n| RiskRow {
                    n,
                    mean_risk: risk(n),
                    stderr: 0.0,
                    mean_lfrak: 0.0,
                    failures: 0,
                })
                .collect(),
        }
    }

    const NS: [usize; 5] = [32, 64, 128, 256, 512];

    #[test]
    fn exact_power_law() {
        let (s, se) = fit_rate(&curve(&NS, |n| 7.0 * (n as f64).powf(-0.8))).unwrap();
        assert!((s + 0.8).abs() < 1e-12 && se < 1e-7, "{s} {se}");
        let (s, _) = fit_rate(&curve(&NS, |_| 0.3)).unwrap();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn perturbed_row_moves_slope_little() {
        let (s, se) = fit_rate(&curve(&NS, |n| {
            let r = 1.0 / n as f64;
            if n == 128 {
                r * 1.01
            } else {
                r
            }
        }))
        .unwrap();
        assert!((s + 1.0).abs() < 0.01);
        assert!(se > 0.0);
    }

    #[test]
    fn fit_rate_rejects_bad_curves() {
        assert!(fit_rate(&curve(&[1, 2], |_| 1.0)).is_err());
        assert!(fit_rate(&curve(&NS, |n| if n == 64 { 0.0 } else { 1.0 })).is_err());
    }

    #[test]
    fn exponent_formulas() {
        assert_eq!(worst_case_exponent(1), -0.8);
        assert_eq!(worst_case_exponent(4), -0.5);
        assert_eq!(worst_case_exponent(5), -0.4);
        assert_eq!(worst_case_exponent(8), -0.25);
        assert_eq!(adaptive_exponent(3), -1.0);
        assert_eq!(adaptive_exponent(8), -0.5);
        assert_eq!(minimax_exponent(6), -0.4);
        assert_eq!(Regime::Minimax.exponent(1), -0.8);
    }

    #[test]
    fn flags() {
        assert!(!rate_flagged(-0.79, 0.0, worst_case_exponent(1)));
        assert!(!rate_flagged(-1.02, 0.0, adaptive_exponent(1)));
        assert!(rate_flagged(-0.5, 0.0, -1.0));
        assert!(!rate_flagged(-0.5, 0.2, -1.0));
        assert!(rate_flagged(f64::NAN, 0.0, -1.0));
    }

    #[test]
    fn report_and_csv() {
        let desc = |label: &str, regime| RegimeDescriptor {
            label: label.into(),
            dim: 1,
            regime,
        };
        let table = rate_report(&[
            (
                curve(&NS, |n| (n as f64).powf(-0.8)),
                desc("quad", Regime::WorstCase),
            ),
            (
                curve(&NS, |n| (n as f64).powf(-0.5)),
                desc("bad", Regime::Adaptive),
            ),
            (curve(&[8], |_| 1.0), desc("short", Regime::Adaptive)),
        ]);
        let flags: Vec<bool> = table.entries.iter().map(|e| e.flagged).collect();
        assert_eq!(flags, [false, true, true]);
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "label,dim,regime,theoretical,minimax,fitted_slope,stderr,flagged"
        );
        assert!(lines[1].starts_with("quad,1,worst_case,-0.8,-0.8,"));
        assert_eq!(lines[3], "short,1,adaptive,-1,-0.8,,,true");
    }
}
