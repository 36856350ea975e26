#![allow(dead_code)]

use convexreg::lse::{RegressionProblem, SolverConfig, Variant};
use nalgebra::{DMatrix, DVector};

/// Configuration that routes one-dimensional full fits through the
/// operator-splitting path.
pub fn admm_config() -> SolverConfig {
    SolverConfig {
        exact_univariate: false,
        ..SolverConfig::default()
    }
}

pub fn line_problem(x: &[f64], y: &[f64], variant: Variant) -> RegressionProblem {
    RegressionProblem::new(x.iter().map(|v| vec![*v]).collect(), y.to_vec(), variant).unwrap()
}

/// Linear inequalities `a·θ ≤ b` describing the fitted-value vectors of a
/// one-dimensional class, over points sorted by `order`.
fn line_constraints(x: &[f64], order: &[usize], variant: Variant) -> Vec<(Vec<f64>, f64)> {
    let n = x.len();
    let mut rows = Vec::new();
    let slope = |k: usize| {
        // coefficients of (θ_{k+1} − θ_k)/(x_{k+1} − x_k)
        let (i, j) = (order[k], order[k + 1]);
        let h = x[j] - x[i];
        let mut a = vec![0.0; n];
        a[i] = -1.0 / h;
        a[j] = 1.0 / h;
        a
    };
    for k in 0..n.saturating_sub(2) {
        let a: Vec<f64> = slope(k)
            .iter()
            .zip(slope(k + 1))
            .map(|(p, q)| p - q)
            .collect();
        rows.push((a, 0.0));
    }
    if let Some(b) = variant.bound() {
        for i in 0..n {
            let mut a = vec![0.0; n];
            a[i] = 1.0;
            rows.push((a.clone(), b));
            a[i] = -1.0;
            rows.push((a, b));
        }
    }
    if let Some(l) = variant.lipschitz() {
        for k in 0..n.saturating_sub(1) {
            let a = slope(k);
            rows.push((a.iter().map(|v| -v).collect(), l));
            rows.push((a, l));
        }
    }
    rows
}

fn equality_ls(y: &[f64], w: &[f64], active: &[&(Vec<f64>, f64)]) -> Option<Vec<f64>> {
    let n = y.len();
    let m = active.len();
    let mut k = DMatrix::zeros(n + m, n + m);
    let mut rhs = DVector::zeros(n + m);
    for i in 0..n {
        k[(i, i)] = 2.0 * w[i];
        rhs[i] = 2.0 * w[i] * y[i];
    }
    for (r, (a, b)) in active.iter().enumerate() {
        for i in 0..n {
            k[(n + r, i)] = a[i];
            k[(i, n + r)] = a[i];
        }
        rhs[n + r] = *b;
    }
    let sol = k.full_piv_lu().solve(&rhs)?;
    Some(sol.iter().take(n).copied().collect())
}

/// Exact projection by enumerating active sets of the θ-space description
/// of the class. Only for tiny one-dimensional problems.
pub fn brute_force_line(x: &[f64], y: &[f64], w: &[f64], variant: Variant) -> Vec<f64> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let rows = line_constraints(x, &order, variant);
    let scale = 1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << rows.len()) {
        if mask.count_ones() as usize > n {
            continue;
        }
        let active: Vec<_> = (0..rows.len())
            .filter(|r| mask >> r & 1 == 1)
            .map(|r| &rows[r])
            .collect();
        let Some(theta) = equality_ls(y, w, &active) else {
            continue;
        };
        let feasible = rows.iter().all(|(a, b)| {
            let lhs: f64 = a.iter().zip(&theta).map(|(p, q)| p * q).sum();
            lhs <= b + 1e-9 * scale * (1.0 + a.iter().map(|v| v.abs()).sum::<f64>())
        });
        if !feasible {
            continue;
        }
        let obj: f64 = (0..n).map(|i| w[i] * (theta[i] - y[i]).powi(2)).sum();
        if best.as_ref().is_none_or(|(o, _)| obj < *o) {
            best = Some((obj, theta));
        }
    }
    best.expect("the class is nonempty").1
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max)
}

pub fn weighted_norm(w: &[f64], v: &[f64]) -> f64 {
    w.iter().zip(v).map(|(a, b)| a * b * b).sum::<f64>().sqrt()
}
