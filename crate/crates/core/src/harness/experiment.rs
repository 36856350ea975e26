use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::loss::{affine_distance, empirical_loss, population_loss};
use crate::error::{Error, Result};
use crate::functions::{
    build_f_tilde, AffinePiece, BumpFunction, BumpPacking, ConvexFunction, PiecewiseAffineConvex,
    QuadraticReference,
};
use crate::geometry::{grid_for_size, grid_points, sample_uniform, SlabPolytope};
use crate::lse::{extend, fit, RegressionProblem, SolverConfig, Variant};
use crate::rng::{derive_seed, rng_from};

/// Regression function used to generate responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Truth {
    /// `‖x‖²`.
    Quadratic,
    Affine {
        w: Vec<f64>,
        b: f64,
    },
    /// Tangent-plane approximant of `‖x‖²` built on the domain.
    FTilde {
        k: usize,
    },
    PiecewiseAffine {
        pieces: Vec<AffinePiece>,
    },
    /// Member `index` of a bump packing on the `delta`-grid of the domain,
    /// with `codewords` greedy codewords drawn from `seed`.
    BumpMember {
        delta: f64,
        codewords: usize,
        index: usize,
        seed: u64,
    },
}

struct Affine {
    w: Vec<f64>,
    b: f64,
}

impl ConvexFunction for Affine {
    fn dim(&self) -> usize {
        self.w.len()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.b
    }
}

impl Truth {
    pub fn build(&self, domain: &SlabPolytope) -> Result<Box<dyn ConvexFunction>> {
        let dim = domain.dim();
        let f: Box<dyn ConvexFunction> = match self {
            Truth::Quadratic => Box::new(QuadraticReference { dim }),
            Truth::Affine { w, b } => {
                if w.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: w.len(),
                    });
                }
                Box::new(Affine {
                    w: w.clone(),
                    b: *b,
                })
            }
            Truth::FTilde { k } => Box::new(build_f_tilde(domain, *k)?.function),
            Truth::PiecewiseAffine { pieces } => {
                Box::new(PiecewiseAffineConvex::new(dim, pieces.clone())?)
            }
            Truth::BumpMember {
                delta,
                codewords,
                index,
                seed,
            } => {
                let grid = grid_points(domain, *delta)?;
                let packing = BumpPacking::varshamov_gilbert(grid.clone(), *codewords, *seed)?;
                let word = packing
                    .codewords()
                    .get(*index)
                    .ok_or(Error::IndexOutOfRange {
                        index: *index,
                        len: packing.len(),
                    })?
                    .clone();
                Box::new(BumpFunction::new(grid, word)?)
            }
        };
        Ok(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Grid,
    Uniform,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dim: usize,
    /// Defaults to the unit cube `[0, 1]^dim`.
    #[serde(default)]
    pub domain: Option<SlabPolytope>,
    pub design_kind: DesignKind,
    pub n_list: Vec<usize>,
    pub sigma: f64,
    pub truth: Truth,
    #[serde(default)]
    pub estimator: Variant,
    pub replicates: usize,
    pub seed: u64,
    /// Integration points for the random-design loss; defaults to `50·n`.
    #[serde(default)]
    pub mc_integration_points: Option<usize>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidArgument("dim must be positive".into()));
        }
        if let Some(d) = &self.domain {
            if d.dim() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    found: d.dim(),
                });
            }
        }
        if self.n_list.is_empty() || self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "n_list must be nonempty and strictly increasing".into(),
            ));
        }
        if self.n_list[0] == 0 {
            return Err(Error::InvalidArgument(
                "sample sizes must be positive".into(),
            ));
        }
        if self.replicates < 2 {
            return Err(Error::InvalidArgument(
                "replicates must be at least 2".into(),
            ));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be nonnegative, got {}",
                self.sigma
            )));
        }
        if self.mc_integration_points.is_some_and(|m| m < 2) {
            return Err(Error::InvalidArgument(
                "mc_integration_points must be at least 2".into(),
            ));
        }
        self.estimator.validate()?;
        self.solver.validate()
    }

    pub fn domain(&self) -> SlabPolytope {
        self.domain
            .clone()
            .unwrap_or_else(|| SlabPolytope::unit_cube(self.dim))
    }
}

/// Outcome of one simulated data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replicate {
    /// Realized number of design points.
    pub n: usize,
    pub loss: f64,
    /// Affine distance of the truth on the design.
    pub lfrak: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub n: usize,
    pub mean_risk: f64,
    pub stderr: f64,
    #[serde(rename = "mean_Lfrak")]
    pub mean_lfrak: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RiskCurve {
    pub rows: Vec<RiskRow>,
}

impl RiskCurve {
    /// CSV with header `n,mean_risk,stderr,mean_Lfrak,failures`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        if self.rows.is_empty() {
            w.write_record(["n", "mean_risk", "stderr", "mean_Lfrak", "failures"])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let rows = r
            .deserialize()
            .collect::<std::result::Result<Vec<RiskRow>, _>>()?;
        Ok(RiskCurve { rows })
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// A validated configuration with its truth and domain built.
pub struct Experiment {
    config: ExperimentConfig,
    domain: SlabPolytope,
    truth: Box<dyn ConvexFunction>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let domain = config.domain();
        let truth = config.truth.build(&domain)?;
        Ok(Experiment {
            config,
            domain,
            truth,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn truth(&self) -> &dyn ConvexFunction {
        self.truth.as_ref()
    }

    fn design(&self, n: usize, replicate: usize) -> Result<Vec<Vec<f64>>> {
        match self.config.design_kind {
            DesignKind::Grid => Ok(grid_for_size(&self.domain, n)?.points),
            DesignKind::Uniform => {
                let seed = derive_seed(self.config.seed, &[n as u64, replicate as u64, 1]);
                Ok(sample_uniform(&self.domain, n, seed)?.points)
            }
        }
    }

    /// One replicate at target size `n`. Seeds derive from
    /// `(seed, n, replicate)`, so the result does not depend on which
    /// other replicates run or in which order.
    pub fn simulate_once(&self, n: usize, replicate: usize) -> Result<Replicate> {
        self.simulate_on(&self.design(n, replicate)?, n, replicate)
    }

    fn simulate_on(&self, design: &[Vec<f64>], n: usize, replicate: usize) -> Result<Replicate> {
        let cfg = &self.config;
        let truth_values: Vec<f64> = design.iter().map(|x| self.truth.eval(x)).collect();
        let mut rng = rng_from(cfg.seed, &[n as u64, replicate as u64, 0]);
        let y: Vec<f64> = truth_values
            .iter()
            .map(|f| f + cfg.sigma * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        let problem = RegressionProblem::new(design.to_vec(), y, cfg.estimator)?;
        let fitted = fit(&problem, &cfg.solver);
        let loss = match cfg.design_kind {
            DesignKind::Grid => {
                empirical_loss(&fitted.fitted_at_observations(&problem), &truth_values)?
            }
            DesignKind::Uniform => {
                let m = cfg.mc_integration_points.unwrap_or(50 * design.len());
                let seed = derive_seed(cfg.seed, &[n as u64, replicate as u64, 2]);
                let fhat = |x: &[f64]| extend(&fitted, &problem, x);
                let truth = |x: &[f64]| self.truth.eval(x);
                population_loss(&fhat, &truth, &self.domain, m, seed)?.0
            }
        };
        Ok(Replicate {
            n: design.len(),
            loss,
            lfrak: affine_distance(design, &truth_values)?,
            converged: fitted.diagnostics.converged,
        })
    }

    pub fn run(&self) -> Result<RiskCurve> {
        self.run_with(|_| {})
    }

    /// Runs every `(n, replicate)` task and aggregates per `n`, calling
    /// `progress` after each row.
    pub fn run_with(&self, mut progress: impl FnMut(&RiskRow)) -> Result<RiskCurve> {
        let reps = self.config.replicates;
        let mut rows = Vec::new();
        for &n in &self.config.n_list {
            let grid = match self.config.design_kind {
                DesignKind::Grid => Some(self.design(n, 0)?),
                DesignKind::Uniform => None,
            };
            let results = map_tasks(reps, |r| match &grid {
                Some(design) => self.simulate_on(design, n, r),
                None => self.simulate_once(n, r),
            });
            let results = results.into_iter().collect::<Result<Vec<_>>>()?;
            let row = aggregate(&results);
            progress(&row);
            rows.push(row);
        }
        Ok(RiskCurve { rows })
    }
}

fn aggregate(results: &[Replicate]) -> RiskRow {
    let k = results.len() as f64;
    let mean = results.iter().map(|r| r.loss).sum::<f64>() / k;
    let var = results.iter().map(|r| (r.loss - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
    RiskRow {
        n: results[0].n,
        mean_risk: mean,
        stderr: (var / k).sqrt(),
        mean_lfrak: results.iter().map(|r| r.lfrak).sum::<f64>() / k,
        failures: results.iter().filter(|r| !r.converged).count(),
    }
}

#[cfg(feature = "parallel")]
fn map_tasks<T: Send>(count: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_tasks<T: Send>(count: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..count).map(f).collect()
}

/// Builds and runs an experiment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RiskCurve> {
    Experiment::new(config.clone())?.run()
}
