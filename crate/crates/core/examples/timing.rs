//! Fit timings on noisy quadratic data:
//! `cargo run --release --example timing -- d n [grid=1] [eps=1e-6]`.

use std::time::Instant;

use convexreg::geometry::{grid_for_size, sample_uniform, SlabPolytope};
use convexreg::lse::{fit, RegressionProblem, SolverConfig, Variant};
use convexreg::rng::rng_from;
use rand_distr::{Distribution, StandardNormal};

fn main() {
    let raw: Vec<String> = std::env::args().skip(1).collect();
    let eps: f64 = raw.get(3).map_or(1e-6, |a| a.parse().unwrap());
    let args: Vec<usize> = raw.iter().take(3).map(|a| a.parse().unwrap()).collect();
    let (d, n) = (
        args.first().copied().unwrap_or(1),
        args.get(1).copied().unwrap_or(256),
    );
    let grid = args.get(2).copied().unwrap_or(1) == 1;
    let cube = SlabPolytope::unit_cube(d);
    let points = if grid {
        grid_for_size(&cube, n).unwrap().points
    } else {
        sample_uniform(&cube, n, 7).unwrap().points
    };
    let mut rng = rng_from(1, &[]);
    let y: Vec<f64> = points
        .iter()
        .map(|p| {
            let e: f64 = StandardNormal.sample(&mut rng);
            p.iter().map(|v| v * v).sum::<f64>() + 0.5 * e
        })
        .collect();
    let problem = RegressionProblem::new(points, y, Variant::Full).unwrap();
    let start = Instant::now();
    let config = SolverConfig {
        eps_primal: eps,
        eps_dual: eps,
        eps_feas: eps.max(1e-6),
        ..SolverConfig::default()
    };
    let f = fit(&problem, &config);
    println!(
        "d={d} n={} time={:.2?} {:?}",
        problem.len(),
        start.elapsed(),
        f.diagnostics
    );
}
