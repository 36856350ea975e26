use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::problem::RegressionProblem;
use super::solver::{constraint_violation, fit_from, LseFit, SolverConfig};
use crate::rng::rng_from;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// Largest violation of a convexity or variant constraint.
    pub max_violation: f64,
    /// `max_probe ⟨Y − θ̂, θ′ − θ̂⟩` in the (multiplicity-)weighted inner
    /// product; nonpositive for an exact projection.
    pub projection_statistic: f64,
    pub probes: usize,
    /// Probe fits that did not report convergence; they are still used.
    pub probe_failures: usize,
}

/// Verifies the projection characterization of a fit: feasibility, and
/// `⟨Y − θ̂, θ′ − θ̂⟩ ≤ 0` for feasible `θ′`. Probe points are fits to
/// responses perturbed by Gaussian noise of varying scale.
pub fn check_kkt(fit: &LseFit, problem: &RegressionProblem, probes: usize, seed: u64) -> KktReport {
    check_kkt_with(fit, problem, probes, seed, &SolverConfig::default())
}

pub fn check_kkt_with(
    fit: &LseFit,
    problem: &RegressionProblem,
    probes: usize,
    seed: u64,
    config: &SolverConfig,
) -> KktReport {
    let max_violation = constraint_violation(problem, &fit.theta, &fit.subgradients);
    let y = problem.responses();
    let w = problem.weights();
    let resid: Vec<f64> = y.iter().zip(&fit.theta).map(|(a, b)| a - b).collect();

    let obs = problem.original_responses();
    let mean = obs.iter().sum::<f64>() / obs.len() as f64;
    let spread = (obs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / obs.len() as f64).sqrt();
    let base = if spread > 0.0 { spread } else { 1.0 };
    let levels = [0.05, 0.2, 0.5, 1.0, 2.0];

    let mut stat = f64::NEG_INFINITY;
    let mut failures = 0;
    for p in 0..probes {
        let mut rng = rng_from(seed, &[p as u64]);
        let eps = base * levels[p % levels.len()];
        let perturbed: Vec<f64> = obs
            .iter()
            .map(|v| v + eps * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        let probe_problem = problem
            .with_responses(perturbed)
            .expect("same number of observations");
        let probe = fit_from(&probe_problem, config, Some(fit));
        if !probe.diagnostics.converged {
            failures += 1;
        }
        let s: f64 = (0..y.len())
            .map(|i| w[i] * resid[i] * (probe.theta[i] - fit.theta[i]))
            .sum();
        stat = stat.max(s);
    }
    KktReport {
        max_violation,
        projection_statistic: if probes == 0 { 0.0 } else { stat },
        probes,
        probe_failures: failures,
    }
}
