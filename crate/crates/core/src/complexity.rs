//! Localized Gaussian complexity of the convex class.
//!
//! For a centre `f` with values `f_i` on a fixed design,
//!
//! ```text
//! H_f(t) = E sup { (1/n) Σ ξ_i (θ_i − f_i) : θ convex-feasible, (1/n) Σ (θ_i − f_i)² ≤ t² } − t²/2
//! ```
//!
//! with `ξ ~ N(0, σ²I)`. The inner supremum is a convex program (linear
//! objective, one ball, pairwise convexity constraints) solved by the same
//! ADMM machinery as the least-squares fits. The maximiser `t_f` of `H_f`
//! tracks the risk of the least-squares estimator.

use std::io::Write;
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lse::{instance_for, solve_generated, SolverConfig, Variant};
use crate::rng::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupValue {
    pub value: f64,
    pub converged: bool,
}

fn check_lengths(design: &[Vec<f64>], center: &[f64], other: usize) -> Result<()> {
    if design.is_empty() {
        return Err(Error::InvalidArgument("empty design".into()));
    }
    if design.len() != center.len() {
        return Err(Error::DimensionMismatch {
            expected: design.len(),
            found: center.len(),
        });
    }
    if other != design.len() {
        return Err(Error::DimensionMismatch {
            expected: design.len(),
            found: other,
        });
    }
    Ok(())
}

/// Inner supremum of `H_f(t)` for one noise vector, over the full convex
/// class.
pub fn localized_sup(
    design: &[Vec<f64>],
    center: &[f64],
    t: f64,
    noise: &[f64],
) -> Result<SupValue> {
    localized_sup_with(
        design,
        center,
        t,
        noise,
        Variant::Full,
        &SolverConfig::default(),
    )
}

/// As [`localized_sup`] for any estimator class.
pub fn localized_sup_with(
    design: &[Vec<f64>],
    center: &[f64],
    t: f64,
    noise: &[f64],
    variant: Variant,
    config: &SolverConfig,
) -> Result<SupValue> {
    check_lengths(design, center, noise.len())?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "radius must be nonnegative, got {t}"
        )));
    }
    variant.validate()?;
    let n = design.len();
    let noise_norm = noise.iter().map(|v| v * v).sum::<f64>().sqrt();
    if t == 0.0 || noise_norm == 0.0 {
        return Ok(SupValue {
            value: 0.0,
            converged: true,
        });
    }
    let radius = t * (n as f64).sqrt();
    if n == 1 && variant.bound().is_none() {
        return Ok(SupValue {
            value: noise[0].abs() * t,
            converged: true,
        });
    }

    let (mut inst, lists) = instance_for(design, variant);
    inst.lin = noise.iter().map(|v| -v).collect();
    inst.theta_ball = Some((center.to_vec(), radius));
    let mut x0 = vec![0.0; inst.nvar()];
    for i in 0..n {
        x0[i] = center[i] + radius * noise[i] / noise_norm;
    }
    let gen = solve_generated(&inst, &lists, x0, config);

    let off = inst.fixed_rows() - n;
    let ball = &gen.state.z[off..off + n];
    let value = noise
        .iter()
        .zip(ball.iter().zip(center))
        .map(|(xi, (th, f))| xi * (th - f))
        .sum::<f64>()
        / n as f64;
    Ok(SupValue {
        value,
        converged: gen.converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub solver_failures: usize,
    /// Per-replicate values `sup − t²/2`, in replicate order.
    #[serde(skip)]
    pub samples: Vec<f64>,
}

/// Noise vector for replicate `r`: a fixed stream per `(seed, r)`, shared
/// across radii so estimates at different `t` use common random numbers.
fn noise_for(seed: u64, r: usize, n: usize, sigma: f64) -> Vec<f64> {
    let mut rng = rng_from(seed, &[r as u64]);
    (0..n)
        .map(|_| sigma * Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect()
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

#[cfg(feature = "parallel")]
fn map_reps<T: Send>(reps: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..reps).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_reps<T: Send>(reps: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..reps).map(f).collect()
}

/// Monte Carlo estimate of `H_f(t)`.
pub fn estimate_h(
    design: &[Vec<f64>],
    center: &[f64],
    t: f64,
    sigma: f64,
    mc_reps: usize,
    seed: u64,
) -> Result<HEstimate> {
    estimate_h_with(
        design,
        center,
        t,
        sigma,
        mc_reps,
        seed,
        Variant::Full,
        &SolverConfig::default(),
    )
}

#[allow(clippy::too_many_arguments)]
pub fn estimate_h_with(
    design: &[Vec<f64>],
    center: &[f64],
    t: f64,
    sigma: f64,
    mc_reps: usize,
    seed: u64,
    variant: Variant,
    config: &SolverConfig,
) -> Result<HEstimate> {
    check_lengths(design, center, center.len())?;
    if mc_reps < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 Monte Carlo replicates".into(),
        ));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sigma must be nonnegative, got {sigma}"
        )));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "radius must be nonnegative, got {t}"
        )));
    }
    let shift = t * t / 2.0;
    if t == 0.0 || sigma == 0.0 {
        return Ok(HEstimate {
            mean: 0.0 - shift,
            stderr: 0.0,
            solver_failures: 0,
            samples: vec![0.0 - shift; mc_reps],
        });
    }
    let n = design.len();
    let results = map_reps(mc_reps, |r| {
        let noise = noise_for(seed, r, n, sigma);
        localized_sup_with(design, center, t, &noise, variant, config)
    });
    let mut samples = Vec::with_capacity(mc_reps);
    let mut failures = 0;
    for res in results {
        let s = res?;
        if !s.converged {
            failures += 1;
        }
        samples.push(s.value - shift);
    }
    let (mean, stderr) = mean_stderr(&samples);
    Ok(HEstimate {
        mean,
        stderr,
        solver_failures: failures,
        samples,
    })
}

/// Geometric grid of `count` radii from `0.05·σ·n^{-2/d}` to
/// `4·max(range of centre values, σ)`.
pub fn default_t_grid(n: usize, dim: usize, sigma: f64, center: &[f64], count: usize) -> Vec<f64> {
    let (lo_c, hi_c) = center
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(*v), b.max(*v))
        });
    let range = if center.is_empty() { 0.0 } else { hi_c - lo_c };
    let hi = 4.0 * range.max(sigma).max(f64::MIN_POSITIVE);
    let mut lo = 0.05 * sigma * (n as f64).powf(-2.0 / dim as f64);
    if !(lo > 0.0) || lo >= hi {
        lo = hi * 1e-6;
    }
    geometric_grid(lo, hi, count)
}

pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).powf(1.0 / (count - 1) as f64);
    (0..count).map(|k| lo * ratio.powi(k as i32)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityEstimate {
    pub t_grid: Vec<f64>,
    pub h_values: Vec<HEstimate>,
    /// Estimated maximiser of `H_f` on the grid.
    pub t_star: f64,
    /// First grid radius with estimated `H ≤ 0`, an upper bracket for `t_f`.
    pub upper_bracket: Option<f64>,
    /// Grid radii whose `H` is within one paired standard error of the
    /// maximum: `(smallest, largest)`.
    pub flat_region: (f64, f64),
    /// The maximum sits at the last grid point.
    pub beyond_grid: bool,
    pub mc_reps: usize,
    pub sigma: f64,
}

/// Standard error of the mean of paired differences.
fn paired_stderr(a: &[f64], b: &[f64]) -> f64 {
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    mean_stderr(&diffs).1
}

pub fn locate_t_star(
    design: &[Vec<f64>],
    center: &[f64],
    sigma: f64,
    t_grid: &[f64],
    mc_reps: usize,
    seed: u64,
) -> Result<ComplexityEstimate> {
    locate_t_star_with(
        design,
        center,
        sigma,
        t_grid,
        mc_reps,
        seed,
        Variant::Full,
        &SolverConfig::default(),
    )
}

/// Estimates `H` on `t_grid` and returns its argmax. Near-ties (within one
/// paired standard error of the best value) resolve toward smaller `t`.
#[allow(clippy::too_many_arguments)]
pub fn locate_t_star_with(
    design: &[Vec<f64>],
    center: &[f64],
    sigma: f64,
    t_grid: &[f64],
    mc_reps: usize,
    seed: u64,
    variant: Variant,
    config: &SolverConfig,
) -> Result<ComplexityEstimate> {
    if t_grid.is_empty() {
        return Err(Error::InvalidArgument("empty radius grid".into()));
    }
    if t_grid[0] < 0.0 || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "radius grid must be nonnegative and strictly increasing".into(),
        ));
    }
    let h_values = t_grid
        .iter()
        .map(|&t| estimate_h_with(design, center, t, sigma, mc_reps, seed, variant, config))
        .collect::<Result<Vec<_>>>()?;

    let best = h_values
        .iter()
        .enumerate()
        .fold(0, |b, (k, h)| if h.mean > h_values[b].mean { k } else { b });
    let near: Vec<usize> = (0..t_grid.len())
        .filter(|&k| {
            let se = paired_stderr(&h_values[best].samples, &h_values[k].samples);
            h_values[best].mean - h_values[k].mean <= se
        })
        .collect();
    let chosen = near.iter().copied().min().unwrap_or(best);
    let flat_region = (
        t_grid[*near.iter().min().unwrap_or(&best)],
        t_grid[*near.iter().max().unwrap_or(&best)],
    );
    let upper_bracket = t_grid
        .iter()
        .zip(&h_values)
        .find(|(t, h)| **t > 0.0 && h.mean <= 0.0)
        .map(|(t, _)| *t);
    Ok(ComplexityEstimate {
        t_grid: t_grid.to_vec(),
        t_star: t_grid[chosen],
        upper_bracket,
        flat_region,
        beyond_grid: best == t_grid.len() - 1 && t_grid.len() > 1,
        h_values,
        mc_reps,
        sigma,
    })
}

impl ComplexityEstimate {
    /// Geometric grid of `count` radii between the grid neighbours of the
    /// flat region, for a second, finer pass of [`locate_t_star`].
    pub fn refined_grid(&self, count: usize) -> Vec<f64> {
        let g = &self.t_grid;
        let pos = |t: f64| g.iter().position(|&v| v == t).unwrap_or(0);
        let (a, b) = (pos(self.flat_region.0), pos(self.flat_region.1));
        let lo = g[a.saturating_sub(1)];
        let hi = g[(b + 1).min(g.len() - 1)];
        let lo = if lo > 0.0 { lo } else { hi * 1e-3 };
        if count < 2 || hi <= lo {
            return vec![self.t_star];
        }
        geometric_grid(lo, hi, count)
    }

    /// CSV with columns `t,H_mean,H_stderr,solver_failures`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "H_mean", "H_stderr", "solver_failures"])?;
        for (t, h) in self.t_grid.iter().zip(&self.h_values) {
            w.write_record([
                t.to_string(),
                h.mean.to_string(),
                h.stderr.to_string(),
                h.solver_failures.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}
