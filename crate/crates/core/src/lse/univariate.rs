//! Exact convex least squares on the line.
//!
//! With design points sorted, a convex fit is a linear spline whose knots
//! sit at interior design points, so
//!
//! ```text
//! θ = α₀ + α₁(x − x₀) + Σ_k c_k (x − x_k)₊,   c_k ≥ 0,
//! ```
//!
//! and the projection is a nonnegative least-squares problem with two free
//! columns, solved by the Lawson–Hanson active-set method. The number of
//! outer steps is of the order of the number of knots of the fit.

use nalgebra::{DMatrix, DVector};

pub(crate) struct UnivariateFit {
    pub theta: Vec<f64>,
    pub subgradients: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Weighted projection of `y` onto convex sequences over distinct `x`
/// (any order). Subgradients are the minimum-norm elements of the
/// subdifferential of the fitted spline.
pub(crate) fn convex_fit_1d(x: &[f64], y: &[f64], w: &[f64]) -> UnivariateFit {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let ws: Vec<f64> = order.iter().map(|&i| w[i]).collect();

    let (theta_s, slopes, iterations, converged) = if n <= 2 {
        let slope = if n == 2 {
            (ys[1] - ys[0]) / (xs[1] - xs[0])
        } else {
            0.0
        };
        (ys.clone(), vec![slope; n.saturating_sub(1)], 0, true)
    } else {
        hinge_nnls(&xs, &ys, &ws)
    };

    let mut theta = vec![0.0; n];
    let mut g = vec![0.0; n];
    for (pos, &i) in order.iter().enumerate() {
        theta[i] = theta_s[pos];
        let lo = if pos == 0 {
            f64::NEG_INFINITY
        } else {
            slopes[pos - 1]
        };
        let hi = if pos + 1 == n {
            f64::INFINITY
        } else {
            slopes[pos]
        };
        g[i] = if n == 1 { 0.0 } else { 0.0f64.max(lo).min(hi) };
    }
    UnivariateFit {
        theta,
        subgradients: g,
        iterations,
        converged,
    }
}

/// Returns sorted fitted values, interval slopes, iterations, convergence.
fn hinge_nnls(xs: &[f64], ys: &[f64], ws: &[f64]) -> (Vec<f64>, Vec<f64>, usize, bool) {
    let n = xs.len();
    let m = n; // columns: 0 = intercept, 1 = slope, 2.. = hinges at xs[1..n-1]
    let sw: Vec<f64> = ws.iter().map(|v| v.sqrt()).collect();
    let column = |k: usize, i: usize| -> f64 {
        match k {
            0 => 1.0,
            1 => xs[i] - xs[0],
            _ => (xs[i] - xs[k - 1]).max(0.0),
        }
    };
    let free = |k: usize| k < 2;
    let scale_y = ys
        .iter()
        .zip(&sw)
        .map(|(y, s)| (y * s).powi(2))
        .sum::<f64>()
        .sqrt()
        + 1e-300;
    let col_norm: Vec<f64> = (0..m)
        .map(|k| {
            (0..n)
                .map(|i| (sw[i] * column(k, i)).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();

    let mut passive = vec![false; m];
    passive[0] = true;
    passive[1] = true;
    let mut z = vec![0.0; m];

    let solve = |passive: &[bool]| -> Option<Vec<f64>> {
        let cols: Vec<usize> = (0..m).filter(|&k| passive[k]).collect();
        let a = DMatrix::from_fn(n, cols.len(), |i, c| sw[i] * column(cols[c], i));
        let b = DVector::from_fn(n, |i, _| sw[i] * ys[i]);
        let svd = a.svd(true, true);
        let sol = svd
            .solve(&b, 1e-13 * col_norm.iter().fold(0.0f64, |m, v| m.max(*v)))
            .ok()?;
        let mut full = vec![0.0; m];
        for (c, &k) in cols.iter().enumerate() {
            full[k] = sol[c];
        }
        Some(full)
    };
    let fitted = |z: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                (0..m)
                    .filter(|&k| z[k] != 0.0)
                    .map(|k| z[k] * column(k, i))
                    .sum()
            })
            .collect()
    };

    let mut iterations = 0;
    let mut converged = false;
    match solve(&passive) {
        Some(s) => z = s,
        None => return (ys.to_vec(), vec![0.0; n - 1], 0, false),
    }
    let max_outer = 3 * n + 10;
    'outer: while iterations < max_outer {
        iterations += 1;
        let theta = fitted(&z);
        let r: Vec<f64> = (0..n).map(|i| ws[i] * (ys[i] - theta[i])).collect();
        let mut best = None;
        let mut best_val = 0.0;
        for k in 2..m {
            if passive[k] {
                continue;
            }
            let gk: f64 = (0..n).map(|i| column(k, i) * r[i]).sum();
            let tol = 1e-12 * scale_y * col_norm[k];
            if gk > tol && gk / col_norm[k] > best_val {
                best_val = gk / col_norm[k];
                best = Some(k);
            }
        }
        let Some(k) = best else {
            converged = true;
            break;
        };
        passive[k] = true;
        loop {
            let Some(s) = solve(&passive) else {
                break 'outer;
            };
            let bad: Vec<usize> = (2..m).filter(|&j| passive[j] && s[j] <= 0.0).collect();
            if bad.is_empty() {
                z = s;
                break;
            }
            let mut alpha = 1.0f64;
            for &j in &bad {
                let denom = z[j] - s[j];
                if denom > 0.0 {
                    alpha = alpha.min(z[j] / denom);
                }
            }
            for j in 0..m {
                if passive[j] {
                    z[j] += alpha * (s[j] - z[j]);
                }
            }
            for j in 2..m {
                if passive[j] && !free(j) && z[j] <= 1e-15 * scale_y {
                    passive[j] = false;
                    z[j] = 0.0;
                }
            }
        }
    }
    let theta = fitted(&z);
    let mut slopes = Vec::with_capacity(n - 1);
    let mut s = z[1];
    for i in 0..n - 1 {
        if i >= 1 {
            s += z[i + 1];
        }
        slopes.push(s);
    }
    (theta, slopes, iterations, converged)
}

/// One linear row `Σ coef·θ[lo..lo+len] ≤ rhs`, scaled to unit norm in
/// the `W⁻¹` metric.
struct Row {
    lo: usize,
    coef: [f64; 3],
    len: usize,
    rhs: f64,
}

impl Row {
    fn new(lo: usize, coef: &[f64], rhs: f64, ws: &[f64]) -> Row {
        let norm = coef
            .iter()
            .enumerate()
            .map(|(k, c)| c * c / ws[lo + k])
            .sum::<f64>()
            .sqrt();
        let mut c = [0.0; 3];
        for (k, v) in coef.iter().enumerate() {
            c[k] = v / norm;
        }
        Row {
            lo,
            coef: c,
            len: coef.len(),
            rhs: rhs / norm,
        }
    }

    fn hi(&self) -> usize {
        self.lo + self.len - 1
    }

    fn apply(&self, theta: &[f64]) -> f64 {
        (0..self.len)
            .map(|k| self.coef[k] * theta[self.lo + k])
            .sum()
    }
}

/// Weighted projection of `y` onto convex sequences over distinct `x` with
/// `|θ_i| ≤ B` and `|g_i| ≤ L` where given.
///
/// The rows (convexity of consecutive slopes, bounds, the two end slopes)
/// each touch at most three neighbouring values, so the dual
/// `min ½λᵀGλ − cᵀλ, λ ≥ 0` has a banded Gram matrix. It is solved by the
/// Lawson–Hanson active-set method with banded Cholesky solves; the dual
/// gradient is the constraint violation `Aθ − b`.
pub(crate) fn constrained_fit_1d(
    x: &[f64],
    y: &[f64],
    w: &[f64],
    bound: Option<f64>,
    lipschitz: Option<f64>,
) -> UnivariateFit {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let ws: Vec<f64> = order.iter().map(|&i| w[i]).collect();
    let h: Vec<f64> = xs.windows(2).map(|p| p[1] - p[0]).collect();

    let mut rows = Vec::new();
    for i in 0..n {
        if let Some(b) = bound {
            rows.push(Row::new(i, &[-1.0], b, &ws));
            rows.push(Row::new(i, &[1.0], b, &ws));
        }
        if let Some(l) = lipschitz {
            if i == 0 && n > 1 {
                rows.push(Row::new(0, &[1.0 / h[0], -1.0 / h[0]], l, &ws));
            }
            if n > 1 && i == n - 2 {
                rows.push(Row::new(i, &[-1.0 / h[i], 1.0 / h[i]], l, &ws));
            }
        }
        if i + 2 < n {
            let (a, b) = (1.0 / h[i], 1.0 / h[i + 1]);
            rows.push(Row::new(i, &[-a, a + b, -b], 0.0, &ws));
        }
    }
    let m = rows.len();
    let bw = (0..m)
        .map(|r| (r..m).take_while(|&s| rows[s].lo <= rows[r].hi()).count() - 1)
        .max()
        .unwrap_or(0);
    let gram = |r: &Row, s: &Row| -> f64 {
        let (lo, hi) = (r.lo.max(s.lo), r.hi().min(s.hi()));
        if lo > hi {
            return 0.0;
        }
        (lo..=hi)
            .map(|i| r.coef[i - r.lo] * s.coef[i - s.lo] / ws[i])
            .sum()
    };
    let primal = |lambda: &[f64]| -> Vec<f64> {
        let mut t = ys.clone();
        for (r, &l) in rows.iter().zip(lambda) {
            if l != 0.0 {
                for k in 0..r.len {
                    t[r.lo + k] -= l * r.coef[k] / ws[r.lo + k];
                }
            }
        }
        t
    };
    let c: Vec<f64> = rows.iter().map(|r| r.apply(&ys) - r.rhs).collect();
    let tol = 1e-12
        * (1.0
            + ys.iter()
                .zip(&ws)
                .map(|(v, w)| v.abs() * w.sqrt())
                .fold(0.0, f64::max));

    // (G + εI) z = c by banded Cholesky, refined against G itself
    let solve = |passive: &[usize]| -> Option<Vec<f64>> {
        let k = passive.len();
        let width = bw + 1;
        let mut g = vec![0.0; k * width];
        for a in 0..k {
            for b in a.saturating_sub(bw)..=a {
                g[a * width + a - b] = gram(&rows[passive[a]], &rows[passive[b]]);
            }
        }
        // dependent rows make G singular: use the smallest shift that factors
        let factor = |eps: f64| -> Option<Vec<f64>> {
            let mut l = vec![0.0; k * width];
            for a in 0..k {
                for b in a.saturating_sub(bw)..=a {
                    let mut s = g[a * width + a - b];
                    if a == b {
                        s += eps;
                    }
                    for q in a.saturating_sub(bw).max(b.saturating_sub(bw))..b {
                        s -= l[a * width + a - q] * l[b * width + b - q];
                    }
                    if a == b {
                        if !(s > eps * 1e-3) {
                            return None;
                        }
                        l[a * width] = s.sqrt();
                    } else {
                        l[a * width + a - b] = s / l[b * width];
                    }
                }
            }
            Some(l)
        };
        let l = [1e-14, 1e-11, 1e-8].into_iter().find_map(factor)?;
        let back = |mut z: Vec<f64>| -> Vec<f64> {
            for a in 0..k {
                for q in a.saturating_sub(bw)..a {
                    z[a] -= l[a * width + a - q] * z[q];
                }
                z[a] /= l[a * width];
            }
            for a in (0..k).rev() {
                for q in a + 1..(a + width).min(k) {
                    z[a] -= l[q * width + q - a] * z[q];
                }
                z[a] /= l[a * width];
            }
            z
        };
        let rhs: Vec<f64> = passive.iter().map(|&r| c[r]).collect();
        let mut z = back(rhs.clone());
        let mut last = f64::INFINITY;
        for _ in 0..20 {
            let mut res = rhs.clone();
            for a in 0..k {
                for b in a.saturating_sub(bw)..=a {
                    let v = g[a * width + a - b];
                    res[a] -= v * z[b];
                    if a != b {
                        res[b] -= v * z[a];
                    }
                }
            }
            let size = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if size >= 0.5 * last {
                break;
            }
            last = size;
            for (zi, di) in z.iter_mut().zip(back(res)) {
                *zi += di;
            }
        }
        Some(z)
    };

    let mut lambda = vec![0.0; m];
    let mut in_p = vec![false; m];
    let mut iterations = 0;
    let mut converged = false;
    'outer: while iterations < 3 * m + 10 {
        iterations += 1;
        let theta = primal(&lambda);
        let entering = (0..m)
            .filter(|&r| !in_p[r])
            .map(|r| (r, rows[r].apply(&theta) - rows[r].rhs))
            .filter(|&(_, v)| v > tol)
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((r, _)) = entering else {
            converged = true;
            break;
        };
        in_p[r] = true;
        loop {
            let passive: Vec<usize> = (0..m).filter(|&s| in_p[s]).collect();
            let Some(z) = solve(&passive) else {
                break 'outer;
            };
            if z.iter().all(|v| *v > 0.0) {
                for (&s, v) in passive.iter().zip(z) {
                    lambda[s] = v;
                }
                break;
            }
            let mut alpha = 1.0f64;
            for (&s, &v) in passive.iter().zip(&z) {
                if v <= 0.0 {
                    alpha = alpha.min(lambda[s] / (lambda[s] - v));
                }
            }
            for (&s, &v) in passive.iter().zip(&z) {
                lambda[s] += alpha * (v - lambda[s]);
                if lambda[s] <= 1e-15 {
                    lambda[s] = 0.0;
                    in_p[s] = false;
                }
            }
            if !in_p[r] && alpha == 0.0 {
                // numerical stall on the entering row
                break 'outer;
            }
        }
    }

    let dual_theta = primal(&lambda);
    let (mut theta_s, slopes) = spline_refit(&xs, &ys, &ws, &rows, &in_p).unwrap_or_else(|| {
        let s = (0..n.saturating_sub(1))
            .map(|i| (dual_theta[i + 1] - dual_theta[i]) / h[i])
            .collect();
        (dual_theta, s)
    });
    if let Some(b) = bound {
        theta_s.iter_mut().for_each(|t| *t = t.clamp(-b, b));
    }
    let cap = lipschitz.unwrap_or(f64::INFINITY);
    let mut theta = vec![0.0; n];
    let mut g = vec![0.0; n];
    for (pos, &i) in order.iter().enumerate() {
        theta[i] = theta_s[pos];
        let lo = if pos == 0 {
            f64::NEG_INFINITY
        } else {
            slopes[pos - 1]
        };
        let hi = if pos + 1 == n {
            f64::INFINITY
        } else {
            slopes[pos]
        };
        g[i] = 0.0f64.max(lo.max(-cap)).min(hi.min(cap));
    }
    UnivariateFit {
        theta,
        subgradients: g,
        iterations,
        converged,
    }
}

/// Least squares over linear splines with knots where the dual left the
/// convexity row inactive, the active bound and end-slope rows held as
/// equalities. Slopes come from the hinge coefficients, so the fit is convex
/// exactly even when neighbouring points nearly coincide. Returns sorted
/// fitted values and interval slopes, or `None` if a hinge coefficient comes
/// out negative or a row ends up violated.
fn spline_refit(
    xs: &[f64],
    ys: &[f64],
    ws: &[f64],
    rows: &[Row],
    in_p: &[bool],
) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = xs.len();
    if n < 3 {
        return None;
    }
    let mut knot = vec![true; n];
    knot[0] = false;
    knot[n - 1] = false;
    for (r, row) in rows.iter().enumerate() {
        if row.len == 3 && in_p[r] {
            knot[row.lo + 1] = false;
        }
    }
    let knots: Vec<usize> = (0..n).filter(|&i| knot[i]).collect();
    let p = knots.len() + 2;
    let phi = |i: usize, c: usize| -> f64 {
        match c {
            0 => 1.0,
            1 => xs[i] - xs[0],
            _ => (xs[i] - xs[knots[c - 2]]).max(0.0),
        }
    };
    let eq: Vec<usize> = (0..rows.len())
        .filter(|&r| in_p[r] && rows[r].len < 3)
        .collect();
    let mut e = DMatrix::zeros(eq.len().max(p), p);
    let mut f = DVector::zeros(eq.len().max(p));
    for (a, &r) in eq.iter().enumerate() {
        let row = &rows[r];
        for k in 0..row.len {
            for c in 0..p {
                e[(a, c)] += row.coef[k] * phi(row.lo + k, c);
            }
        }
        f[a] = row.rhs;
    }
    // β = β₀ + Nγ with Eβ₀ = f and N spanning the null space of E
    let svd = e.clone().svd(true, true);
    let smax: f64 = svd.singular_values.max();
    let cut = 1e-10 * smax.max(1e-300);
    let beta0 = if eq.is_empty() {
        DVector::zeros(p)
    } else {
        svd.solve(&f, cut).ok()?
    };
    let vt = svd.v_t.as_ref()?;
    let null: Vec<usize> = (0..p)
        .filter(|&k| eq.is_empty() || svd.singular_values[k] <= cut)
        .collect();
    let nmat = DMatrix::from_fn(p, null.len(), |c, k| {
        if eq.is_empty() {
            if c == null[k] {
                1.0
            } else {
                0.0
            }
        } else {
            vt[(null[k], c)]
        }
    });
    let sw: Vec<f64> = ws.iter().map(|w| w.sqrt()).collect();
    let base: Vec<f64> = (0..n)
        .map(|i| (0..p).map(|c| phi(i, c) * beta0[c]).sum())
        .collect();
    let a = DMatrix::from_fn(n, null.len(), |i, k| {
        sw[i] * (0..p).map(|c| phi(i, c) * nmat[(c, k)]).sum::<f64>()
    });
    let b = DVector::from_fn(n, |i, _| sw[i] * (ys[i] - base[i]));
    let gamma = if null.is_empty() {
        DVector::zeros(0)
    } else {
        a.svd(true, true).solve(&b, 1e-13).ok()?
    };
    let beta = beta0 + nmat * gamma;

    let size = beta.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if beta.iter().skip(2).any(|&c| c < -1e-9 * size) {
        return None;
    }
    let mut slopes = Vec::with_capacity(n - 1);
    let mut s = beta[1];
    let mut next = 0;
    for i in 0..n - 1 {
        if next < knots.len() && knots[next] == i {
            s += beta[next + 2].max(0.0);
            next += 1;
        }
        slopes.push(s);
    }
    let mut theta = Vec::with_capacity(n);
    theta.push(beta[0]);
    for i in 0..n - 1 {
        theta.push(theta[i] + slopes[i] * (xs[i + 1] - xs[i]));
    }
    let scale = 1.0
        + ys.iter()
            .zip(&sw)
            .map(|(y, w)| (y * w).abs())
            .fold(0.0, f64::max);
    if rows
        .iter()
        .any(|r| r.len < 3 && r.apply(&theta) - r.rhs > 1e-9 * scale)
    {
        return None;
    }
    Some((theta, slopes))
}
