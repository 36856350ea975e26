use serde::{Deserialize, Serialize};

use super::admm::{
    pair_coefficients, run_admm, solve_equality_qp, AdmmReport, AdmmSettings, AdmmState,
    QpInstance, WorkingSet,
};
use super::problem::{RegressionProblem, Variant};
use super::univariate::{constrained_fit_1d, convex_fit_1d};

/// Solver tolerances and limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub eps_primal: f64,
    pub eps_dual: f64,
    pub eps_feas: f64,
    pub penalty_parameter: f64,
    pub over_relaxation: f64,
    /// Multiply `eps_primal` and `eps_dual` by `√n`.
    pub scale_tolerances: bool,
    /// Refine the ADMM solution by an exact active-set solve when the KKT
    /// system has at most `polish_max_dim` rows.
    pub polish: bool,
    pub polish_max_dim: usize,
    /// Use the exact active-set solvers in one dimension instead of the
    /// operator-splitting path.
    pub exact_univariate: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 50_000,
            eps_primal: 1e-6,
            eps_dual: 1e-6,
            eps_feas: 1e-6,
            penalty_parameter: 0.1,
            over_relaxation: 1.5,
            scale_tolerances: true,
            polish: true,
            polish_max_dim: 2000,
            exact_univariate: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let positive = [
            ("eps_primal", self.eps_primal),
            ("eps_dual", self.eps_dual),
            ("eps_feas", self.eps_feas),
            ("penalty_parameter", self.penalty_parameter),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return crate::error::invalid(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.over_relaxation > 0.0 && self.over_relaxation < 2.0) {
            return crate::error::invalid(format!(
                "over_relaxation must lie in (0, 2), got {}",
                self.over_relaxation
            ));
        }
        if self.max_iterations == 0 {
            return crate::error::invalid("max_iterations must be positive");
        }
        Ok(())
    }

    pub(crate) fn settings(&self, n: usize) -> AdmmSettings {
        let scale = if self.scale_tolerances {
            (n as f64).sqrt()
        } else {
            1.0
        };
        AdmmSettings {
            eps_primal: self.eps_primal * scale,
            eps_dual: self.eps_dual * scale,
            rho: self.penalty_parameter,
            sigma: 1e-6,
            alpha: self.over_relaxation,
            adapt_interval: 50,
            check_interval: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Residual sum of squares against the original observations.
    pub objective: f64,
    pub converged: bool,
    /// Largest violation of any pairwise convexity or variant constraint.
    pub max_violation: f64,
    pub rounds: usize,
    pub working_set: usize,
    pub polished: bool,
    pub method: Method,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Operator splitting with constraint generation.
    Admm,
    /// Exact active-set solver on the line.
    Univariate,
}

/// Fitted values and subgradients at the (merged) design points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LseFit {
    pub theta: Vec<f64>,
    pub subgradients: Vec<Vec<f64>>,
    pub diagnostics: Diagnostics,
}

impl LseFit {
    /// Fitted values at each original observation.
    pub fn fitted_at_observations(&self, problem: &RegressionProblem) -> Vec<f64> {
        problem
            .original_index()
            .iter()
            .map(|&g| self.theta[g])
            .collect()
    }
}

/// Result of the constraint-generation loop.
pub(crate) struct Generated {
    pub state: AdmmState,
    pub ws: WorkingSet,
    pub report: AdmmReport,
    pub iterations: usize,
    pub rounds: usize,
    pub converged: bool,
}

fn design_flat(points: &[Vec<f64>]) -> Vec<f64> {
    points.iter().flatten().copied().collect()
}

/// Mean nearest-neighbour distance and the `k` nearest neighbours of each
/// point.
fn neighbours(points: &[f64], n: usize, d: usize, k: usize) -> (f64, Vec<Vec<usize>>) {
    let mut lists = Vec::with_capacity(n);
    let mut nn_sum = 0.0;
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        dist.clear();
        let xi = &points[i * d..(i + 1) * d];
        for j in 0..n {
            if j != i {
                let xj = &points[j * d..(j + 1) * d];
                let s: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
                dist.push((s, j));
            }
        }
        let kk = k.min(dist.len());
        if kk > 0 && kk < dist.len() {
            dist.select_nth_unstable_by(kk - 1, |a, b| a.0.total_cmp(&b.0));
        }
        let mut near: Vec<(f64, usize)> = dist[..kk].to_vec();
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some(first) = near.first() {
            nn_sum += first.0.sqrt();
        }
        lists.push(near.into_iter().map(|(_, j)| j).collect());
    }
    let scale = if n > 1 { nn_sum / n as f64 } else { 1.0 };
    (if scale > 0.0 { scale } else { 1.0 }, lists)
}

const ALL_PAIRS_BELOW: usize = 40;

/// Builds a program over `points` with design scale and neighbour lists.
pub(crate) fn instance_for(points: &[Vec<f64>], variant: Variant) -> (QpInstance, Vec<Vec<usize>>) {
    let n = points.len();
    let d = points[0].len();
    let flat = design_flat(points);
    let k = if n <= ALL_PAIRS_BELOW { n } else { 2 * d + 2 };
    let (g_scale, lists) = neighbours(&flat, n, d, k);
    (
        QpInstance {
            n,
            d,
            points: flat,
            g_scale,
            quad: vec![0.0; n],
            lin: vec![0.0; n],
            bound: variant.bound(),
            lipschitz: variant.lipschitz(),
            theta_ball: None,
        },
        lists,
    )
}

/// Largest violation `θ_i + g_i·(X_j − X_i) − θ_j` over all ordered pairs
/// in original units, per source point `i`, keeping up to `keep` of the
/// worst offenders above `tol` that are not yet in the working set.
fn scan_pairs(
    inst: &QpInstance,
    x: &[f64],
    ws: Option<&WorkingSet>,
    tol: f64,
    keep: usize,
) -> (f64, Vec<(usize, usize)>) {
    let (n, d) = (inst.n, inst.d);
    let mut worst = 0.0f64;
    let mut out = Vec::new();
    let mut cand: Vec<(f64, usize)> = Vec::new();
    for i in 0..n {
        let xi = inst.point(i);
        let g = &x[n + i * d..n + (i + 1) * d];
        cand.clear();
        for j in 0..n {
            if j == i {
                continue;
            }
            let xj = inst.point(j);
            let mut v = x[i] - x[j];
            for k in 0..d {
                v += g[k] / inst.g_scale * (xj[k] - xi[k]);
            }
            worst = worst.max(v);
            if v > tol && ws.is_none_or(|w| !w.contains(i, j)) {
                cand.push((v, j));
            }
        }
        if cand.len() > keep {
            cand.select_nth_unstable_by(keep - 1, |a, b| b.0.total_cmp(&a.0));
            cand.truncate(keep);
        }
        out.extend(cand.iter().map(|&(_, j)| (i, j)));
    }
    (worst, out)
}

/// ADMM with constraint generation: solve on the working set, add the
/// most violated pairwise constraints, repeat. Early rounds stop at a
/// looser tolerance.
pub(crate) fn solve_generated(
    inst: &QpInstance,
    lists: &[Vec<usize>],
    x0: Vec<f64>,
    config: &SolverConfig,
) -> Generated {
    let n = inst.n;
    let mut ws = WorkingSet::new(n);
    for (i, near) in lists.iter().enumerate() {
        for &j in near {
            ws.insert(inst, i, j);
            ws.insert(inst, j, i);
        }
    }
    let mut tight = config.settings(n);
    let mut tightenings = 0;
    let mut state = AdmmState::new(inst, x0, tight.rho);
    state.grow(inst, &ws);
    let keep = (2 * inst.d).max(4);
    let mut loose = tight.clone();
    loose.eps_primal *= 100.0;
    loose.eps_dual *= 100.0;
    let mut use_loose = n > ALL_PAIRS_BELOW;
    let mut iterations = 0;
    let mut rounds = 0;
    let mut report;
    loop {
        rounds += 1;
        let set = if use_loose { &loose } else { &tight };
        report = run_admm(
            inst,
            &ws,
            &mut state,
            set,
            config.max_iterations - iterations,
        );
        iterations += report.iterations;
        let (worst, add) = scan_pairs(inst, &state.x, Some(&ws), config.eps_feas, keep);
        if add.is_empty() {
            if use_loose {
                use_loose = false;
                if iterations < config.max_iterations {
                    continue;
                }
            }
            // residuals small but rows in the working set still violated
            // beyond eps_feas: keep iterating at a tighter tolerance
            let violation = worst.max(variant_violation(inst, &state.x));
            if report.converged
                && violation > config.eps_feas
                && tightenings < 4
                && iterations < config.max_iterations
            {
                tightenings += 1;
                tight.eps_primal *= 0.1;
                tight.eps_dual *= 0.1;
                continue;
            }
            break;
        }
        for (i, j) in add {
            ws.insert(inst, i, j);
        }
        state.grow(inst, &ws);
        if iterations >= config.max_iterations {
            break;
        }
    }
    let converged = report.converged && !use_loose;
    Generated {
        state,
        ws,
        report,
        iterations,
        rounds,
        converged,
    }
}

/// Largest violation of the box and ball rows in original units.
fn variant_violation(inst: &QpInstance, x: &[f64]) -> f64 {
    let (n, d) = (inst.n, inst.d);
    let mut worst = 0.0f64;
    if let Some(b) = inst.bound {
        for t in &x[..n] {
            worst = worst.max(t.abs() - b);
        }
    }
    if let Some(l) = inst.lipschitz {
        for i in 0..n {
            let g = &x[n + i * d..n + (i + 1) * d];
            worst = worst.max(g.iter().map(|v| v * v).sum::<f64>().sqrt() / inst.g_scale - l);
        }
    }
    worst
}

/// Constraint as `(row coefficients, target)` in the scaled variables.
type Row = (Vec<(usize, f64)>, f64);

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum ActiveRow {
    Pair(usize, usize),
    Lower(usize),
    Upper(usize),
    /// `±g_i ≤ L` on the line, `true` for the upper side.
    Slope(usize, bool),
}

fn build_row(inst: &QpInstance, row: ActiveRow) -> Row {
    let (n, d) = (inst.n, inst.d);
    match row {
        ActiveRow::Pair(i, j) => {
            let mut gc = vec![0.0; d];
            let c = pair_coefficients(inst, i, j, &mut gc);
            let mut coeffs = vec![(i, -c), (j, c)];
            coeffs.extend(gc.iter().enumerate().map(|(k, v)| (n + i * d + k, *v)));
            (coeffs, 0.0)
        }
        ActiveRow::Lower(i) => (vec![(i, 1.0)], -inst.bound.unwrap_or(0.0)),
        ActiveRow::Upper(i) => (vec![(i, 1.0)], inst.bound.unwrap_or(0.0)),
        ActiveRow::Slope(i, up) => (
            vec![(n + i, if up { 1.0 } else { -1.0 })],
            inst.lipschitz.unwrap_or(0.0) * inst.g_scale,
        ),
    }
}

/// Active-set refinement seeded with the ADMM duals. Returns polished
/// scaled variables, or `None` when the active set cannot be settled
/// within a few corrections or the KKT system is too large.
fn polish(inst: &QpInstance, gen: &Generated, config: &SolverConfig) -> Option<Vec<f64>> {
    let (n, d) = (inst.n, inst.d);
    let nv = inst.nvar();
    if let (Some(l), true) = (inst.lipschitz, d > 1) {
        let r = l * inst.g_scale;
        let near_ball = (0..n).any(|i| {
            let g = &gen.state.x[n + i * d..n + (i + 1) * d];
            g.iter().map(|v| v * v).sum::<f64>().sqrt() >= r * (1.0 - 1e-6) - 1e-12
        });
        if near_ball {
            return None;
        }
    }
    let z = &gen.state.z;
    let y = &gen.state.y;
    let ytol = 1e-6 * y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut active: Vec<ActiveRow> = Vec::new();
    let mut off = 0;
    if let Some(b) = inst.bound {
        for i in 0..n {
            if z[i] + b < -y[i] - ytol {
                active.push(ActiveRow::Lower(i));
            } else if b - z[i] < y[i] - ytol {
                active.push(ActiveRow::Upper(i));
            }
        }
        off += n;
    }
    if inst.lipschitz.is_some() {
        if d == 1 {
            for i in 0..n {
                if y[off + i].abs() > ytol {
                    active.push(ActiveRow::Slope(i, y[off + i] > 0.0));
                }
            }
        }
        off += n * d;
    }
    let mut partners: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (r, &(i, j)) in gen.ws.pairs.iter().enumerate() {
        if z[off + r] < -y[off + r] - ytol {
            partners[i as usize].push(j as usize);
        }
    }
    for (i, js) in partners.iter().enumerate() {
        active.extend(
            nearest_partners(inst, i, js)
                .into_iter()
                .map(|j| ActiveRow::Pair(i, j)),
        );
    }

    let mut h = vec![0.0; nv];
    h[..n].copy_from_slice(&inst.quad);
    let mut q = vec![0.0; nv];
    q[..n].copy_from_slice(&inst.lin);
    let scale = 1.0 + inst.lin.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let dual_tol = 1e-9 * scale;
    let keep = (2 * d).max(4);
    // a wrong initial active set rarely recovers; stop before it gets costly
    let mut failed = 0;
    let mut added = 0;

    for _ in 0..20 {
        if nv + active.len() > config.polish_max_dim {
            return None;
        }
        let rows: Vec<Row> = active.iter().map(|&r| build_row(inst, r)).collect();
        let (x, nu) = solve_equality_qp(&h, &q, &rows)?;
        let theta_scale = 1.0 + x[..n].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let primal_tol = 1e-9 * theta_scale;

        // Subgradients at points with no active row of their own are not
        // determined by the equality solve; only θ has to be feasible.
        let mut xr = x.clone();
        let radius = inst.lipschitz.map(|l| l * inst.g_scale);
        for i in 0..n {
            let gi = &x[n + i * d..n + (i + 1) * d];
            if let Some(g) = feasible_subgradient(inst, &x[..n], i, gi, radius, primal_tol) {
                xr[n + i * d..n + (i + 1) * d].copy_from_slice(&g);
            }
        }
        let (_, violated) = scan_pairs(inst, &xr, None, primal_tol, keep);
        let present: std::collections::HashSet<ActiveRow> = active.iter().copied().collect();
        let mut additions: Vec<ActiveRow> = violated
            .into_iter()
            .map(|(i, j)| ActiveRow::Pair(i, j))
            .filter(|r| !present.contains(r))
            .collect();
        if let Some(b) = inst.bound {
            for i in 0..n {
                if x[i] < -b - primal_tol && !present.contains(&ActiveRow::Lower(i)) {
                    additions.push(ActiveRow::Lower(i));
                }
                if x[i] > b + primal_tol && !present.contains(&ActiveRow::Upper(i)) {
                    additions.push(ActiveRow::Upper(i));
                }
            }
        }
        if let Some(r) = radius {
            for i in 0..n {
                let norm = xr[n + i * d..n + (i + 1) * d]
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt();
                if norm > r + primal_tol {
                    if d > 1 {
                        return None;
                    }
                    let row = ActiveRow::Slope(i, xr[n + i] > 0.0);
                    if !present.contains(&row) {
                        additions.push(row);
                    }
                }
            }
        }
        if !additions.is_empty() {
            added += additions.len();
            if added > 2 * n {
                return None;
            }
            active.extend(additions);
            continue;
        }
        // The active rows are typically redundant (three or more points on
        // one affine piece), so multipliers are not unique: look for any
        // sign-feasible multiplier vector before declaring a row wrong.
        let signs: Vec<f64> = active
            .iter()
            .map(|r| match r {
                ActiveRow::Upper(_) | ActiveRow::Slope(..) => 1.0,
                _ => -1.0,
            })
            .collect();
        let mut grad = vec![0.0; nv];
        for k in 0..nv {
            grad[k] = h[k] * x[k] + q[k];
        }
        let (lambda, resid) = sign_constrained_multipliers(&grad, &rows, &signs, &nu);
        if resid <= dual_tol {
            return Some(xr);
        }
        failed += 1;
        if failed > 4 {
            return None;
        }
        let wrong: Vec<usize> = (0..active.len())
            .filter(|&k| lambda[k] == 0.0 && nu[k] * signs[k] < -dual_tol)
            .collect();
        let wrong = if wrong.is_empty() {
            match (0..active.len())
                .min_by(|&a, &b| (nu[a] * signs[a]).total_cmp(&(nu[b] * signs[b])))
            {
                Some(k) if nu[k] * signs[k] < 0.0 => vec![k],
                _ => return None,
            }
        } else {
            wrong
        };
        let drop: std::collections::HashSet<usize> = wrong.into_iter().collect();
        active = active
            .into_iter()
            .enumerate()
            .filter(|(k, _)| !drop.contains(k))
            .map(|(_, r)| r)
            .collect();
    }
    None
}

/// Points sharing an affine piece make every pair among them active. Only
/// a few per source point are needed to pin its subgradient: the nearest
/// on each side on the line, the `2d + 2` nearest otherwise. Pairs dropped
/// here come back through the feasibility scan if they are needed.
fn nearest_partners(inst: &QpInstance, i: usize, js: &[usize]) -> Vec<usize> {
    let xi = inst.point(i);
    let dist = |j: usize| -> f64 {
        inst.point(j)
            .iter()
            .zip(xi)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    };
    if inst.d == 1 {
        let nearest = |side: f64| {
            js.iter()
                .copied()
                .filter(|&j| (inst.point(j)[0] - xi[0]) * side > 0.0)
                .min_by(|&a, &b| dist(a).total_cmp(&dist(b)))
        };
        return nearest(-1.0).into_iter().chain(nearest(1.0)).collect();
    }
    let mut out = js.to_vec();
    out.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)));
    out.truncate(2 * inst.d + 2);
    out
}

/// Closest point to `start` (scaled units) in the set of subgradients at
/// point `i` that make all pairwise constraints from `i` hold for `theta`,
/// and `‖g‖ ≤ radius` on the line. `None` when the Hildreth iteration does
/// not produce a feasible vector.
fn feasible_subgradient(
    inst: &QpInstance,
    theta: &[f64],
    i: usize,
    start: &[f64],
    radius: Option<f64>,
    tol: f64,
) -> Option<Vec<f64>> {
    let (n, d) = (inst.n, inst.d);
    let xi = inst.point(i);
    // rows c·g ≤ h in scaled units
    let mut rows: Vec<(Vec<f64>, f64)> = (0..n)
        .filter(|&j| j != i)
        .map(|j| {
            let c: Vec<f64> = (0..d)
                .map(|k| (inst.point(j)[k] - xi[k]) / inst.g_scale)
                .collect();
            (c, theta[j] - theta[i])
        })
        .collect();
    if let (Some(r), 1) = (radius, d) {
        rows.push((vec![1.0], r));
        rows.push((vec![-1.0], r));
    }
    let slack =
        |g: &[f64], (c, h): &(Vec<f64>, f64)| h - c.iter().zip(g).map(|(a, b)| a * b).sum::<f64>();
    if rows.iter().all(|r| slack(start, r) >= -tol) {
        return Some(start.to_vec());
    }
    let mut set: Vec<usize> = (0..rows.len())
        .filter(|&k| slack(start, &rows[k]) <= tol)
        .collect();
    for _ in 0..8 {
        let mut lambda = vec![0.0; set.len()];
        let mut g = start.to_vec();
        let sq: Vec<f64> = set
            .iter()
            .map(|&k| rows[k].0.iter().map(|v| v * v).sum())
            .collect();
        for _ in 0..20_000 {
            let mut change = 0.0f64;
            for (s, &k) in set.iter().enumerate() {
                if sq[s] == 0.0 {
                    continue;
                }
                let (c, h) = &rows[k];
                let cg: f64 = c.iter().zip(&g).map(|(a, b)| a * b).sum();
                let new = (lambda[s] + (cg - h) / sq[s]).max(0.0);
                let delta = new - lambda[s];
                if delta != 0.0 {
                    for t in 0..d {
                        g[t] -= delta * c[t];
                    }
                    lambda[s] = new;
                    change = change.max(delta.abs() * sq[s].sqrt());
                }
            }
            if change <= 1e-3 * tol {
                break;
            }
        }
        let violated: Vec<usize> = (0..rows.len())
            .filter(|&k| slack(&g, &rows[k]) < -tol)
            .collect();
        if violated.is_empty() {
            return Some(g);
        }
        let fresh: Vec<usize> = violated.into_iter().filter(|k| !set.contains(k)).collect();
        if fresh.is_empty() {
            return None;
        }
        set.extend(fresh);
    }
    None
}

/// Multipliers `λ` with `sign_r·λ_r ≥ 0` minimizing `‖grad + Σ λ_r a_r‖`
/// by cyclic coordinate descent from `start`; returns them with the
/// largest remaining stationarity residual.
fn sign_constrained_multipliers(
    grad: &[f64],
    rows: &[Row],
    signs: &[f64],
    start: &[f64],
) -> (Vec<f64>, f64) {
    let mut lambda: Vec<f64> = start
        .iter()
        .zip(signs)
        .map(|(v, s)| if v * s >= 0.0 { *v } else { 0.0 })
        .collect();
    let mut r = grad.to_vec();
    for (k, (coeffs, _)) in rows.iter().enumerate() {
        for &(c, v) in coeffs {
            r[c] += lambda[k] * v;
        }
    }
    let sq: Vec<f64> = rows
        .iter()
        .map(|(coeffs, _)| coeffs.iter().map(|(_, v)| v * v).sum())
        .collect();
    let inf = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let start_resid = inf(&r);
    for _ in 0..20_000 {
        let mut change = 0.0f64;
        for (k, (coeffs, _)) in rows.iter().enumerate() {
            if sq[k] == 0.0 {
                continue;
            }
            let ar: f64 = coeffs.iter().map(|&(c, v)| v * r[c]).sum();
            let mut new = lambda[k] - ar / sq[k];
            if new * signs[k] < 0.0 {
                new = 0.0;
            }
            let delta = new - lambda[k];
            if delta != 0.0 {
                for &(c, v) in coeffs {
                    r[c] += delta * v;
                }
                lambda[k] = new;
                change = change.max(delta.abs() * sq[k].sqrt());
            }
        }
        if change <= 1e-14 * (1.0 + start_resid) {
            break;
        }
    }
    let resid = inf(&r);
    (lambda, resid)
}

/// Replaces each subgradient by the minimum-norm vector satisfying the
/// same pairwise constraints (relaxed by the current violation at that
/// point). Keeps the old vector when the active-set iteration stalls.
pub(crate) fn min_norm_subgradients(points: &[Vec<f64>], theta: &[f64], g: &mut [Vec<f64>]) {
    let n = points.len();
    if n <= 1 {
        for gi in g.iter_mut() {
            gi.iter_mut().for_each(|v| *v = 0.0);
        }
        return;
    }
    let d = points[0].len();
    let range = theta.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0;
    let mut c = Vec::with_capacity((n - 1) * d);
    let mut h = Vec::with_capacity(n - 1);
    for i in 0..n {
        c.clear();
        h.clear();
        for j in (0..n).filter(|&j| j != i) {
            c.extend((0..d).map(|k| points[j][k] - points[i][k]));
            h.push(theta[j] - theta[i]);
        }
        // relax by the current violation so the old vector is feasible
        let tau = (0..n - 1)
            .map(|r| dot(&c[r * d..(r + 1) * d], &g[i]) - h[r])
            .fold(0.0f64, f64::max);
        h.iter_mut().for_each(|v| *v += tau);
        if let Some(gn) = min_norm_point(&c, &h, d, &g[i], 1e-12 * range) {
            let old: f64 = dot(&g[i], &g[i]);
            if dot(&gn, &gn) <= old * (1.0 + 1e-12) + 1e-300 {
                g[i] = gn;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimum-norm point of `{x : c_r·x ≤ h_r}` (rows of `c` flattened, `d`
/// columns) by a primal active-set method started at the feasible `start`.
fn min_norm_point(c: &[f64], h: &[f64], d: usize, start: &[f64], tol: f64) -> Option<Vec<f64>> {
    use nalgebra::{DMatrix, DVector};
    let m = h.len();
    let row = |r: usize| &c[r * d..(r + 1) * d];
    let mut x = start.to_vec();
    let mut work: Vec<usize> = Vec::new();
    for _ in 0..(50 + 20 * d) {
        // minimum-norm point of the affine set of the working rows, and the
        // multipliers of -x at it
        let k = work.len();
        let (target, lambda) = if k == 0 {
            (vec![0.0; d], Vec::new())
        } else {
            let a = DMatrix::from_fn(k, d, |r, t| row(work[r])[t]);
            let gram = &a * a.transpose();
            let lu = gram.lu();
            let hw = DVector::from_fn(k, |r, _| h[work[r]]);
            let mu = lu.solve(&hw)?;
            let target: Vec<f64> = (a.transpose() * &mu).iter().copied().collect();
            // target = -Σ λ_r c_r
            (target, mu.iter().map(|v| -v).collect())
        };
        let p: Vec<f64> = target.iter().zip(&x).map(|(a, b)| a - b).collect();
        let scale = 1.0 + dot(&x, &x).sqrt();
        if dot(&p, &p).sqrt() <= 1e-13 * scale {
            let worst = (0..k).min_by(|&a, &b| lambda[a].total_cmp(&lambda[b]));
            match worst {
                Some(w) if lambda[w] < -tol => {
                    work.remove(w);
                    continue;
                }
                _ => return Some(target),
            }
        }
        let mut alpha = 1.0;
        let mut block = None;
        for r in 0..m {
            if work.contains(&r) {
                continue;
            }
            let cp = dot(row(r), &p);
            if cp > 1e-15 * scale {
                let slack = (h[r] - dot(row(r), &x)).max(0.0);
                let ratio = slack / cp;
                if ratio < alpha {
                    alpha = ratio;
                    block = Some(r);
                }
            }
        }
        for (xv, pv) in x.iter_mut().zip(&p) {
            *xv += alpha * pv;
        }
        if let Some(r) = block {
            if work.len() == d {
                return None;
            }
            work.push(r);
        }
    }
    None
}

fn max_violation(problem: &RegressionProblem, theta: &[f64], g: &[Vec<f64>]) -> f64 {
    let pts = problem.points();
    let n = pts.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let mut v = theta[i] - theta[j];
                for k in 0..problem.dim() {
                    v += g[i][k] * (pts[j][k] - pts[i][k]);
                }
                worst = worst.max(v);
            }
        }
    }
    let variant = problem.variant();
    if let Some(b) = variant.bound() {
        for t in theta {
            worst = worst.max(t.abs() - b);
        }
    }
    if let Some(l) = variant.lipschitz() {
        for gi in g {
            worst = worst.max(gi.iter().map(|v| v * v).sum::<f64>().sqrt() - l);
        }
    }
    worst
}

/// Largest violation of the constraints of `problem` by `(θ, g)`.
pub fn constraint_violation(problem: &RegressionProblem, theta: &[f64], g: &[Vec<f64>]) -> f64 {
    max_violation(problem, theta, g)
}

/// Convex least-squares fit: the projection of the responses onto the set
/// of fitted-value vectors of convex functions in the problem's class.
pub fn fit(problem: &RegressionProblem, config: &SolverConfig) -> LseFit {
    fit_from(problem, config, None)
}

/// As [`fit`], starting the iteration from an earlier fit on the same
/// design.
pub fn fit_from(
    problem: &RegressionProblem,
    config: &SolverConfig,
    start: Option<&LseFit>,
) -> LseFit {
    let n = problem.len();
    let d = problem.dim();
    if d == 1 && config.exact_univariate {
        let f = fit_univariate(problem, config.eps_feas);
        if f.diagnostics.converged || problem.variant() == Variant::Full {
            return f;
        }
    }
    let (mut inst, lists) = instance_for(problem.points(), problem.variant());
    inst.quad = problem.weights().to_vec();
    inst.lin = problem
        .weights()
        .iter()
        .zip(problem.responses())
        .map(|(w, y)| -w * y)
        .collect();

    let mut x0 = vec![0.0; inst.nvar()];
    match start {
        Some(s) if s.theta.len() == n => {
            x0[..n].copy_from_slice(&s.theta);
            for i in 0..n {
                for k in 0..d {
                    x0[n + i * d + k] = s.subgradients[i][k] * inst.g_scale;
                }
            }
        }
        _ => x0[..n].copy_from_slice(problem.responses()),
    }

    let gen = solve_generated(&inst, &lists, x0, config);
    let mut x = gen.state.x.clone();
    let mut polished = false;
    if config.polish && n > 1 {
        if let Some(px) = polish(&inst, &gen, config) {
            x = px;
            polished = true;
        }
    }

    let mut theta = x[..n].to_vec();
    if let Some(b) = inst.bound {
        if polished {
            theta.iter_mut().for_each(|t| *t = t.clamp(-b, b));
        }
    }
    let mut g: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            x[n + i * d..n + (i + 1) * d]
                .iter()
                .map(|v| v / inst.g_scale)
                .collect()
        })
        .collect();
    if n == 1 {
        g[0].iter_mut().for_each(|v| *v = 0.0);
    } else {
        min_norm_subgradients(problem.points(), &theta, &mut g);
    }

    let violation = max_violation(problem, &theta, &g);
    let converged = polished || (gen.converged && violation <= config.eps_feas);
    LseFit {
        diagnostics: Diagnostics {
            iterations: gen.iterations,
            primal_residual: gen.report.primal_residual,
            dual_residual: gen.report.dual_residual,
            objective: problem.objective(&theta),
            converged,
            max_violation: violation,
            rounds: gen.rounds,
            working_set: gen.ws.len(),
            polished,
            method: Method::Admm,
        },
        theta,
        subgradients: g,
    }
}

fn fit_univariate(problem: &RegressionProblem, eps_feas: f64) -> LseFit {
    let x: Vec<f64> = problem.points().iter().map(|p| p[0]).collect();
    let v = problem.variant();
    let u = match v {
        Variant::Full => convex_fit_1d(&x, problem.responses(), problem.weights()),
        _ => constrained_fit_1d(
            &x,
            problem.responses(),
            problem.weights(),
            v.bound(),
            v.lipschitz(),
        ),
    };
    let g: Vec<Vec<f64>> = u.subgradients.iter().map(|v| vec![*v]).collect();
    let violation = max_violation(problem, &u.theta, &g);
    LseFit {
        diagnostics: Diagnostics {
            iterations: u.iterations,
            primal_residual: 0.0,
            dual_residual: 0.0,
            objective: problem.objective(&u.theta),
            converged: u.converged && violation <= eps_feas,
            max_violation: violation,
            rounds: 0,
            working_set: 0,
            polished: false,
            method: Method::Univariate,
        },
        theta: u.theta,
        subgradients: g,
    }
}

/// Piecewise-affine extension `max_i (θ_i + g_i·(x − X_i))`, clipped to
/// `[-B, B]` for bounded variants.
pub fn extend(fit: &LseFit, problem: &RegressionProblem, x: &[f64]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for ((t, g), p) in fit
        .theta
        .iter()
        .zip(&fit.subgradients)
        .zip(problem.points())
    {
        let v = t + g
            .iter()
            .zip(x.iter().zip(p))
            .map(|(gk, (xk, pk))| gk * (xk - pk))
            .sum::<f64>();
        best = best.max(v);
    }
    match problem.variant().bound() {
        Some(b) => best.clamp(-b, b),
        None => best,
    }
}
