//! Browser bindings for the interactive demo page in `www/`.

use convexreg::complexity::{default_t_grid, locate_t_star};
use convexreg::functions::{build_f_tilde, BumpPacking, ConvexFunction};
use convexreg::geometry::{grid_for_size, grid_points, SlabPolytope};
use convexreg::lse::{extend, fit, RegressionProblem, SolverConfig, Variant};
use convexreg::rng::rng_from;
use rand_distr::{Distribution, StandardNormal};
use wasm_bindgen::prelude::*;

fn js_err(e: convexreg::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn variant(name: &str, bound: f64, lipschitz: f64) -> Result<Variant, JsError> {
    let v = match name {
        "full" => Variant::Full,
        "bounded" => Variant::Bounded { bound },
        "lipschitz" => Variant::Lipschitz { lipschitz },
        "bounded_lipschitz" => Variant::BoundedLipschitz { bound, lipschitz },
        other => return Err(JsError::new(&format!("unknown variant {other}"))),
    };
    v.validate().map_err(js_err)?;
    Ok(v)
}

fn linspace(lo: f64, hi: f64, m: usize) -> impl Iterator<Item = f64> {
    let step = if m > 1 {
        (hi - lo) / (m - 1) as f64
    } else {
        0.0
    };
    (0..m).map(move |i| lo + step * i as f64)
}

/// Noisy observations of `x ↦ (x − 0.5)²·4 − 0.5` on an `n`-point grid of
/// `[0, 1]`, returned as `[x_0, y_0, x_1, y_1, …]`.
#[wasm_bindgen]
pub fn sample_data(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_from(seed, &[n as u64]);
    linspace(0.0, 1.0, n.max(2))
        .flat_map(|x| {
            let z: f64 = StandardNormal.sample(&mut rng);
            [x, 4.0 * (x - 0.5) * (x - 0.5) - 0.5 + sigma * z]
        })
        .collect()
}

/// One-dimensional convex least-squares fit.
#[wasm_bindgen]
pub struct Fit1d {
    problem: RegressionProblem,
    fit: convexreg::lse::LseFit,
}

#[wasm_bindgen]
impl Fit1d {
    /// `variant` is one of `full`, `bounded`, `lipschitz`,
    /// `bounded_lipschitz`; `bound` and `lipschitz` are ignored when unused.
    #[wasm_bindgen(constructor)]
    pub fn new(
        xs: Vec<f64>,
        ys: Vec<f64>,
        variant_name: &str,
        bound: f64,
        lipschitz: f64,
    ) -> Result<Fit1d, JsError> {
        let v = variant(variant_name, bound, lipschitz)?;
        let design = xs.into_iter().map(|x| vec![x]).collect();
        let problem = RegressionProblem::new(design, ys, v).map_err(js_err)?;
        let fit = fit(&problem, &SolverConfig::default());
        Ok(Fit1d { problem, fit })
    }

    /// Sorted distinct design points.
    pub fn points(&self) -> Vec<f64> {
        self.problem.points().iter().map(|p| p[0]).collect()
    }

    pub fn theta(&self) -> Vec<f64> {
        self.fit.theta.clone()
    }

    pub fn converged(&self) -> bool {
        self.fit.diagnostics.converged
    }

    pub fn objective(&self) -> f64 {
        self.fit.diagnostics.objective
    }

    /// The max-affine extension at `m` equally spaced points of `[lo, hi]`.
    pub fn curve(&self, lo: f64, hi: f64, m: usize) -> Vec<f64> {
        linspace(lo, hi, m)
            .map(|x| extend(&self.fit, &self.problem, &[x]))
            .collect()
    }
}

/// The tangent-plane approximant of `x²` on `[0, 1]` with `k` anchors,
/// sampled at `m` points, followed by the anchor locations.
#[wasm_bindgen]
pub fn f_tilde_curve(k: usize, m: usize) -> Result<Vec<f64>, JsError> {
    let ft = build_f_tilde(&SlabPolytope::unit_cube(1), k).map_err(js_err)?;
    let mut out: Vec<f64> = linspace(0.0, 1.0, m)
        .map(|x| ft.function.eval(&[x]))
        .collect();
    out.extend(ft.anchors.iter().map(|a| a[0]));
    Ok(out)
}

/// Member `index` of a bump packing on the `delta`-grid of `[0, 1]`,
/// sampled at `m` points. Returns an empty vector if the index is out of
/// range for the packing actually drawn.
#[wasm_bindgen]
pub fn bump_curve(
    delta: f64,
    codewords: usize,
    index: usize,
    seed: u64,
    m: usize,
) -> Result<Vec<f64>, JsError> {
    let grid = grid_points(&SlabPolytope::unit_cube(1), delta).map_err(js_err)?;
    let packing = BumpPacking::varshamov_gilbert(grid, codewords, seed).map_err(js_err)?;
    if index >= packing.len() {
        return Ok(Vec::new());
    }
    linspace(0.0, 1.0, m)
        .map(|x| packing.eval_member(index, &[x]).map_err(js_err))
        .collect()
}

/// Monte Carlo profile of `t ↦ H(t)` for an affine truth on an `n`-point
/// grid of `[0, 1]`: `[t_star, t_0.., H_0.., stderr_0..]`.
#[wasm_bindgen]
pub fn h_profile(
    n: usize,
    sigma: f64,
    mc_reps: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    let design = grid_for_size(&SlabPolytope::unit_cube(1), n)
        .map_err(js_err)?
        .points;
    let center: Vec<f64> = design.iter().map(|x| 0.5 * x[0]).collect();
    let radii = default_t_grid(design.len(), 1, sigma, &center, count.max(2));
    let est =
        locate_t_star(&design, &center, sigma, &radii, mc_reps.max(2), seed).map_err(js_err)?;
    let mut out = vec![est.t_star];
    out.extend(&est.t_grid);
    out.extend(est.h_values.iter().map(|h| h.mean));
    out.extend(est.h_values.iter().map(|h| h.stderr));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn v_example_through_bindings() {
        let f = Fit1d::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0], "full", 0.0, 0.0)
            .map_err(|_| ())
            .unwrap();
        for t in f.theta() {
            assert!((t - 1.0 / 3.0).abs() < 1e-8);
        }
        let c = f.curve(0.0, 2.0, 5);
        assert!(c.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-8));
    }

    #[test]
    fn f_tilde_sits_below_square() {
        let out = f_tilde_curve(8, 101).map_err(|_| ()).unwrap();
        let (vals, anchors) = out.split_at(101);
        assert!(!anchors.is_empty());
        for (v, x) in vals.iter().zip(linspace(0.0, 1.0, 101)) {
            assert!(*v <= x * x + 1e-12);
        }
    }

    #[test]
    fn h_profile_layout() {
        let out = h_profile(16, 1.0, 4, 5, 1).map_err(|_| ()).unwrap();
        assert_eq!(out.len(), 1 + 3 * 5);
        assert!(out[1..6].contains(&out[0]));
    }
}
