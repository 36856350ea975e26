use std::fmt;
use std::path::{Path, PathBuf};

use convexreg::complexity::default_t_grid;
use convexreg::geometry::{grid_for_size, sample_uniform, SlabPolytope};
use convexreg::harness::{Regime, Truth};
use convexreg::lse::{SolverConfig, Variant};
use serde::de::DeserializeOwned;
use serde::Deserialize;

#[derive(Debug)]
pub struct CliError(pub String);

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<convexreg::Error> for CliError {
    fn from(e: convexreg::Error) -> Self {
        CliError(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError(e.to_string())
    }
}

/// Parses a JSON config, reporting `path:line:column` and the offending
/// field on failure.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| CliError(format!("{}:{e}", path.display())))
}

pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner();
        let field = e.path().to_string();
        let field = if field == "." {
            String::new()
        } else {
            format!(" field `{field}`:")
        };
        format!("{}:{}:{field} {inner}", inner.line(), inner.column())
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(rename = "X")]
    pub design: Vec<Vec<f64>>,
    #[serde(rename = "Y")]
    pub responses: Vec<f64>,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub solver: SolverConfig,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignSpec {
    /// Grid in the unit cube with at least `n` points.
    Grid {
        dim: usize,
        n: usize,
    },
    Uniform {
        dim: usize,
        n: usize,
        seed: u64,
    },
    Points {
        points: Vec<Vec<f64>>,
    },
}

impl DesignSpec {
    pub fn build(&self) -> Result<(SlabPolytope, Vec<Vec<f64>>), CliError> {
        Ok(match self {
            DesignSpec::Grid { dim, n } => {
                let cube = SlabPolytope::unit_cube(*dim);
                let pts = grid_for_size(&cube, *n)?.points;
                (cube, pts)
            }
            DesignSpec::Uniform { dim, n, seed } => {
                let cube = SlabPolytope::unit_cube(*dim);
                let pts = sample_uniform(&cube, *n, *seed)?.points;
                (cube, pts)
            }
            DesignSpec::Points { points } => {
                let dim = points.first().map_or(0, |p| p.len());
                if dim == 0 {
                    return Err(CliError("design needs at least one point".into()));
                }
                let mut lo = vec![f64::INFINITY; dim];
                let mut hi = vec![f64::NEG_INFINITY; dim];
                for p in points {
                    if p.len() != dim {
                        return Err(CliError("design points differ in dimension".into()));
                    }
                    for k in 0..dim {
                        lo[k] = lo[k].min(p[k]);
                        hi[k] = hi[k].max(p[k]);
                    }
                }
                for k in 0..dim {
                    if hi[k] <= lo[k] {
                        hi[k] = lo[k] + 1.0;
                    }
                }
                (SlabPolytope::boxed(&lo, &hi)?, points.clone())
            }
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexityConfig {
    pub design: DesignSpec,
    pub truth: Truth,
    pub sigma: f64,
    /// Explicit radii; otherwise a geometric grid of `grid_count` points.
    #[serde(default)]
    pub t_grid: Option<Vec<f64>>,
    #[serde(default = "default_grid_count")]
    pub grid_count: usize,
    /// Second pass on this many radii between the grid neighbours of the
    /// first pass's flat region.
    #[serde(default)]
    pub refine_count: Option<usize>,
    pub mc_reps: usize,
    pub seed: u64,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output_stem: Option<String>,
}

fn default_grid_count() -> usize {
    12
}

impl ComplexityConfig {
    pub fn radii(&self, n: usize, dim: usize, center: &[f64]) -> Vec<f64> {
        match &self.t_grid {
            Some(g) => g.clone(),
            None => default_t_grid(n, dim, self.sigma, center, self.grid_count),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    /// Risk-curve CSV, relative to the config file.
    pub csv: PathBuf,
    pub label: String,
    pub dim: usize,
    pub regime: Regime,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    pub curves: Vec<CurveSpec>,
}

/// Parses `key=value` arguments.
pub fn key_values(params: &[String]) -> Result<Vec<(String, String)>, CliError> {
    params
        .iter()
        .map(|p| {
            p.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| CliError(format!("expected key=value, got `{p}`")))
        })
        .collect()
}

pub fn lookup<T: std::str::FromStr>(
    kv: &[(String, String)],
    key: &str,
    default: Option<T>,
) -> Result<T, CliError> {
    match kv.iter().find(|(k, _)| k == key) {
        Some((_, v)) => v
            .parse()
            .map_err(|_| CliError(format!("cannot parse `{key}={v}`"))),
        None => default.ok_or_else(|| CliError(format!("missing parameter `{key}`"))),
    }
}

pub fn check_keys(kv: &[(String, String)], allowed: &[&str]) -> Result<(), CliError> {
    match kv.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
        Some((k, _)) => Err(CliError(format!(
            "unknown parameter `{k}` (expected one of {})",
            allowed.join(", ")
        ))),
        None => Ok(()),
    }
}
