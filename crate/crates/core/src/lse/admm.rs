//! Operator-splitting solver for the fitted-value/subgradient programs.
//!
//! Variables are `x = (θ, ĝ)` with `θ ∈ R^n` and `ĝ_i = s·g_i ∈ R^d`, where
//! `s` is a design length scale that brings the subgradient columns to the
//! same magnitude as the fitted values. Constraint rows, in this order:
//!
//! * box rows `θ_i ∈ [-B, B]` (bounded variants);
//! * subgradient-ball blocks `‖ĝ_i‖ ≤ s·L` (Lipschitz variants);
//! * one fitted-value ball `‖θ − c‖ ≤ R` (localized suprema);
//! * pairwise rows `(θ_j − θ_i − g_i·(X_j − X_i)) / ‖row‖ ≥ 0` from the
//!   current working set, appended as constraint generation proceeds.
//!
//! The iteration is the standard ADMM for `min ½x'Px + q'x, Ax ∈ C`
//! with over-relaxation; the linear system `(P + σI + ρA'A)x = b` is solved
//! matrix-free by preconditioned conjugate gradients with a cached
//! block-diagonal preconditioner.

use nalgebra::{DMatrix, DVector};

/// Objective and variant constraints for one program.
#[derive(Debug, Clone)]
pub(crate) struct QpInstance {
    pub n: usize,
    pub d: usize,
    /// Flat `n × d` design.
    pub points: Vec<f64>,
    pub g_scale: f64,
    /// Diagonal of the quadratic term on `θ`.
    pub quad: Vec<f64>,
    /// Linear term on `θ`.
    pub lin: Vec<f64>,
    pub bound: Option<f64>,
    pub lipschitz: Option<f64>,
    pub theta_ball: Option<(Vec<f64>, f64)>,
}

impl QpInstance {
    pub fn nvar(&self) -> usize {
        self.n * (1 + self.d)
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn fixed_rows(&self) -> usize {
        self.bound.map_or(0, |_| self.n)
            + self.lipschitz.map_or(0, |_| self.n * self.d)
            + self.theta_ball.as_ref().map_or(0, |_| self.n)
    }
}

/// Pairwise rows currently enforced.
#[derive(Debug, Clone, Default)]
pub(crate) struct WorkingSet {
    pub pairs: Vec<(u32, u32)>,
    /// Coefficient on `θ_j` (and minus it on `θ_i`).
    pub coef: Vec<f64>,
    /// Flat `m × d` coefficients on `ĝ_i`.
    pub gcoef: Vec<f64>,
    member: Vec<u64>,
    n: usize,
}

impl WorkingSet {
    pub fn new(n: usize) -> Self {
        WorkingSet {
            member: vec![0; (n * n).div_ceil(64)],
            n,
            ..Default::default()
        }
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        let k = i * self.n + j;
        self.member[k / 64] >> (k % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    /// Adds the row for `(i, j)`; returns false if already present.
    pub fn insert(&mut self, inst: &QpInstance, i: usize, j: usize) -> bool {
        if i == j || self.contains(i, j) {
            return false;
        }
        let k = i * self.n + j;
        self.member[k / 64] |= 1 << (k % 64);
        let start = self.gcoef.len();
        self.gcoef.resize(start + inst.d, 0.0);
        let c = pair_coefficients(inst, i, j, &mut self.gcoef[start..]);
        self.coef.push(c);
        self.pairs.push((i as u32, j as u32));
        true
    }
}

/// Normalized coefficients of the pairwise row `(i, j)`: returns the
/// coefficient on `θ_j` and writes those on `ĝ_i` into `gcoef`.
pub(crate) fn pair_coefficients(inst: &QpInstance, i: usize, j: usize, gcoef: &mut [f64]) -> f64 {
    let (xi, xj) = (inst.point(i), inst.point(j));
    let mut norm2 = 2.0;
    for k in 0..inst.d {
        let c = -(xj[k] - xi[k]) / inst.g_scale;
        norm2 += c * c;
        gcoef[k] = c;
    }
    let inv = 1.0 / norm2.sqrt();
    for c in gcoef.iter_mut() {
        *c *= inv;
    }
    inv
}

#[derive(Debug, Clone)]
pub(crate) struct AdmmSettings {
    pub eps_primal: f64,
    pub eps_dual: f64,
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub adapt_interval: usize,
    pub check_interval: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct AdmmState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    pub rho: f64,
}

impl AdmmState {
    pub fn new(inst: &QpInstance, x0: Vec<f64>, rho: f64) -> Self {
        let mut state = AdmmState {
            x: x0,
            z: Vec::new(),
            y: Vec::new(),
            rho,
        };
        let rows = inst.fixed_rows();
        state.z = vec![0.0; rows];
        state.y = vec![0.0; rows];
        let mut ax = vec![0.0; rows];
        apply_fixed(inst, &state.x, &mut ax);
        project_fixed(inst, &ax, &mut state.z);
        state
    }

    /// Extends `z` and `y` for rows appended to the working set.
    pub fn grow(&mut self, inst: &QpInstance, ws: &WorkingSet) {
        let off = inst.fixed_rows();
        let have = self.z.len() - off;
        for r in have..ws.len() {
            let v = pair_row_value(inst, ws, r, &self.x);
            self.z.push(v.max(0.0));
            self.y.push(0.0);
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct AdmmReport {
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

#[inline]
fn pair_row_value(inst: &QpInstance, ws: &WorkingSet, r: usize, x: &[f64]) -> f64 {
    let (i, j) = (ws.pairs[r].0 as usize, ws.pairs[r].1 as usize);
    let d = inst.d;
    let g = &x[inst.n + i * d..inst.n + (i + 1) * d];
    let gc = &ws.gcoef[r * d..(r + 1) * d];
    let mut v = ws.coef[r] * (x[j] - x[i]);
    for k in 0..d {
        v += gc[k] * g[k];
    }
    v
}

fn apply_fixed(inst: &QpInstance, x: &[f64], out: &mut [f64]) {
    let n = inst.n;
    let mut off = 0;
    if inst.bound.is_some() {
        out[..n].copy_from_slice(&x[..n]);
        off += n;
    }
    if inst.lipschitz.is_some() {
        out[off..off + n * inst.d].copy_from_slice(&x[n..]);
        off += n * inst.d;
    }
    if inst.theta_ball.is_some() {
        out[off..off + n].copy_from_slice(&x[..n]);
    }
}

fn project_fixed(inst: &QpInstance, v: &[f64], out: &mut [f64]) {
    let (n, d) = (inst.n, inst.d);
    let mut off = 0;
    if let Some(b) = inst.bound {
        for i in 0..n {
            out[i] = v[i].clamp(-b, b);
        }
        off += n;
    }
    if let Some(l) = inst.lipschitz {
        let r = l * inst.g_scale;
        for i in 0..n {
            let blk = &v[off + i * d..off + (i + 1) * d];
            let norm = blk.iter().map(|c| c * c).sum::<f64>().sqrt();
            let f = if norm > r { r / norm } else { 1.0 };
            for k in 0..d {
                out[off + i * d + k] = blk[k] * f;
            }
        }
        off += n * d;
    }
    if let Some((center, radius)) = &inst.theta_ball {
        let blk = &v[off..off + n];
        let norm = blk
            .iter()
            .zip(center)
            .map(|(a, c)| (a - c) * (a - c))
            .sum::<f64>()
            .sqrt();
        let f = if norm > *radius { radius / norm } else { 1.0 };
        for i in 0..n {
            out[off + i] = center[i] + (blk[i] - center[i]) * f;
        }
    }
}

/// `out = A x`.
pub(crate) fn apply_a(inst: &QpInstance, ws: &WorkingSet, x: &[f64], out: &mut [f64]) {
    let off = inst.fixed_rows();
    apply_fixed(inst, x, &mut out[..off]);
    for r in 0..ws.len() {
        out[off + r] = pair_row_value(inst, ws, r, x);
    }
}

/// `out = A' y`.
pub(crate) fn apply_at(inst: &QpInstance, ws: &WorkingSet, y: &[f64], out: &mut [f64]) {
    let (n, d) = (inst.n, inst.d);
    out.iter_mut().for_each(|v| *v = 0.0);
    let mut off = 0;
    if inst.bound.is_some() {
        for i in 0..n {
            out[i] += y[i];
        }
        off += n;
    }
    if inst.lipschitz.is_some() {
        for k in 0..n * d {
            out[n + k] += y[off + k];
        }
        off += n * d;
    }
    if inst.theta_ball.is_some() {
        for i in 0..n {
            out[i] += y[off + i];
        }
        off += n;
    }
    for r in 0..ws.len() {
        let yr = y[off + r];
        if yr == 0.0 {
            continue;
        }
        let (i, j) = (ws.pairs[r].0 as usize, ws.pairs[r].1 as usize);
        let c = ws.coef[r] * yr;
        out[j] += c;
        out[i] -= c;
        let gc = &ws.gcoef[r * d..(r + 1) * d];
        let g = &mut out[n + i * d..n + (i + 1) * d];
        for k in 0..d {
            g[k] += gc[k] * yr;
        }
    }
}

/// Inverses of the `(1 + d)`-blocks of `P + σI + ρA'A` for `(θ_i, ĝ_i)`.
struct BlockPreconditioner {
    d: usize,
    inv: Vec<f64>,
}

impl BlockPreconditioner {
    fn new(inst: &QpInstance, ws: &WorkingSet, rho: f64, sigma: f64) -> Self {
        let (n, d) = (inst.n, inst.d);
        let b = d + 1;
        let mut blocks = vec![0.0; n * b * b];
        for i in 0..n {
            let blk = &mut blocks[i * b * b..(i + 1) * b * b];
            for k in 0..b {
                blk[k * b + k] = sigma;
            }
            blk[0] += inst.quad[i];
            if inst.bound.is_some() {
                blk[0] += rho;
            }
            if inst.theta_ball.is_some() {
                blk[0] += rho;
            }
            if inst.lipschitz.is_some() {
                for k in 1..b {
                    blk[k * b + k] += rho;
                }
            }
        }
        for r in 0..ws.len() {
            let (i, j) = (ws.pairs[r].0 as usize, ws.pairs[r].1 as usize);
            let c = ws.coef[r];
            blocks[j * b * b] += rho * c * c;
            let gc = &ws.gcoef[r * d..(r + 1) * d];
            let blk = &mut blocks[i * b * b..(i + 1) * b * b];
            // restricted row (−c, gc)
            let row = |k: usize| if k == 0 { -c } else { gc[k - 1] };
            for p in 0..b {
                let rp = row(p);
                for q in 0..b {
                    blk[p * b + q] += rho * rp * row(q);
                }
            }
        }
        let mut inv = vec![0.0; n * b * b];
        for i in 0..n {
            let m = DMatrix::from_row_slice(b, b, &blocks[i * b * b..(i + 1) * b * b]);
            let mi = m
                .clone()
                .cholesky()
                .map(|c| c.inverse())
                .unwrap_or_else(|| DMatrix::from_diagonal(&m.diagonal().map(|v| 1.0 / v)));
            for p in 0..b {
                for q in 0..b {
                    inv[i * b * b + p * b + q] = mi[(p, q)];
                }
            }
        }
        BlockPreconditioner { d, inv }
    }

    fn apply(&self, n: usize, r: &[f64], out: &mut [f64]) {
        let d = self.d;
        let b = d + 1;
        let mut tmp = vec![0.0f64; b];
        let mut res = vec![0.0f64; b];
        for i in 0..n {
            tmp[0] = r[i];
            tmp[1..b].copy_from_slice(&r[n + i * d..n + (i + 1) * d]);
            let m = &self.inv[i * b * b..(i + 1) * b * b];
            for p in 0..b {
                let mut s = 0.0;
                for q in 0..b {
                    s += m[p * b + q] * tmp[q];
                }
                res[p] = s;
            }
            out[i] = res[0];
            out[n + i * d..n + (i + 1) * d].copy_from_slice(&res[1..b]);
        }
    }
}

struct Workspace {
    ax: Vec<f64>,
    aty: Vec<f64>,
    r: Vec<f64>,
    zv: Vec<f64>,
    p: Vec<f64>,
    kp: Vec<f64>,
    tmp_m: Vec<f64>,
}

fn k_apply(
    inst: &QpInstance,
    ws: &WorkingSet,
    rho: f64,
    sigma: f64,
    x: &[f64],
    out: &mut [f64],
    tmp_m: &mut [f64],
) {
    apply_a(inst, ws, x, tmp_m);
    apply_at(inst, ws, tmp_m, out);
    for (o, xv) in out.iter_mut().zip(x) {
        *o = rho * *o + sigma * xv;
    }
    for i in 0..inst.n {
        out[i] += inst.quad[i] * x[i];
    }
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dotv(a, a).sqrt()
}

#[allow(clippy::too_many_arguments)]
fn pcg(
    inst: &QpInstance,
    ws: &WorkingSet,
    pre: &BlockPreconditioner,
    rho: f64,
    sigma: f64,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    w: &mut Workspace,
) -> usize {
    let n = inst.n;
    k_apply(inst, ws, rho, sigma, x, &mut w.kp, &mut w.tmp_m);
    for k in 0..x.len() {
        w.r[k] = b[k] - w.kp[k];
    }
    if norm2(&w.r) <= tol {
        return 0;
    }
    pre.apply(n, &w.r, &mut w.zv);
    w.p.copy_from_slice(&w.zv);
    let mut rz = dotv(&w.r, &w.zv);
    for it in 1..=max_iter {
        k_apply(inst, ws, rho, sigma, &w.p, &mut w.kp, &mut w.tmp_m);
        let pkp = dotv(&w.p, &w.kp);
        if pkp <= 0.0 {
            return it;
        }
        let a = rz / pkp;
        for k in 0..x.len() {
            x[k] += a * w.p[k];
            w.r[k] -= a * w.kp[k];
        }
        if norm2(&w.r) <= tol {
            return it;
        }
        pre.apply(n, &w.r, &mut w.zv);
        let rz_new = dotv(&w.r, &w.zv);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..x.len() {
            w.p[k] = w.zv[k] + beta * w.p[k];
        }
    }
    max_iter
}

/// Runs at most `budget` ADMM iterations from `state`.
pub(crate) fn run_admm(
    inst: &QpInstance,
    ws: &WorkingSet,
    state: &mut AdmmState,
    set: &AdmmSettings,
    budget: usize,
) -> AdmmReport {
    let nv = inst.nvar();
    let m = state.z.len();
    debug_assert_eq!(m, inst.fixed_rows() + ws.len());
    let sigma = set.sigma;
    let alpha = set.alpha;
    let mut rho = state.rho;
    let mut pre = BlockPreconditioner::new(inst, ws, rho, sigma);
    let mut w = Workspace {
        ax: vec![0.0; m],
        aty: vec![0.0; nv],
        r: vec![0.0; nv],
        zv: vec![0.0; nv],
        p: vec![0.0; nv],
        kp: vec![0.0; nv],
        tmp_m: vec![0.0; m],
    };
    let mut rhs = vec![0.0; nv];
    let mut xt = state.x.clone();
    let mut zt = vec![0.0; m];
    let mut zhat = vec![0.0; m];
    let mut report = AdmmReport::default();
    let (mut rp, mut rd) = (f64::INFINITY, f64::INFINITY);
    let mut cg_tol_scale = f64::INFINITY;

    for it in 1..=budget {
        // rhs = σx − q + A'(ρz − y)
        for k in 0..m {
            w.tmp_m[k] = rho * state.z[k] - state.y[k];
        }
        apply_at(inst, ws, &w.tmp_m, &mut rhs);
        for k in 0..nv {
            rhs[k] += sigma * state.x[k];
        }
        for i in 0..inst.n {
            rhs[i] -= inst.lin[i];
        }
        let bnorm = norm2(&rhs);
        let tol = (0.05 * cg_tol_scale)
            .min(1e-3 * bnorm)
            .max(1e-13 * (1.0 + bnorm));
        xt.copy_from_slice(&state.x);
        pcg(inst, ws, &pre, rho, sigma, &rhs, &mut xt, tol, 200, &mut w);
        apply_a(inst, ws, &xt, &mut zt);

        for k in 0..nv {
            state.x[k] = alpha * xt[k] + (1.0 - alpha) * state.x[k];
        }
        for k in 0..m {
            zhat[k] = alpha * zt[k] + (1.0 - alpha) * state.z[k];
            w.tmp_m[k] = zhat[k] + state.y[k] / rho;
        }
        let off = inst.fixed_rows();
        project_fixed(inst, &w.tmp_m[..off], &mut state.z[..off]);
        for k in off..m {
            state.z[k] = w.tmp_m[k].max(0.0);
        }
        for k in 0..m {
            state.y[k] += rho * (zhat[k] - state.z[k]);
        }
        report.iterations = it;

        if it % set.check_interval == 0 || it == budget {
            apply_a(inst, ws, &state.x, &mut w.ax);
            let mut prim = 0.0;
            for k in 0..m {
                prim += (w.ax[k] - state.z[k]).powi(2);
            }
            rp = prim.sqrt();
            apply_at(inst, ws, &state.y, &mut w.aty);
            let mut px_norm = 0.0;
            let mut dual = 0.0;
            for k in 0..nv {
                let mut v = w.aty[k];
                if k < inst.n {
                    let px = inst.quad[k] * state.x[k];
                    px_norm += px * px;
                    v += px + inst.lin[k];
                }
                dual += v * v;
            }
            rd = dual.sqrt();
            cg_tol_scale = rp.min(rd);
            report.primal_residual = rp;
            report.dual_residual = rd;
            if rp <= set.eps_primal && rd <= set.eps_dual {
                report.converged = true;
                break;
            }
            if it % set.adapt_interval == 0 {
                let prim_scale = norm2(&w.ax).max(norm2(&state.z)).max(1e-30);
                let dual_scale = px_norm
                    .sqrt()
                    .max(norm2(&w.aty))
                    .max(norm2(&inst.lin))
                    .max(1e-30);
                let ratio = ((rp / prim_scale) / (rd / dual_scale).max(1e-30)).sqrt();
                if ratio.is_finite() && !(0.2..=5.0).contains(&ratio) {
                    rho = (rho * ratio).clamp(1e-6, 1e6);
                    pre = BlockPreconditioner::new(inst, ws, rho, sigma);
                }
            }
        }
    }
    state.rho = rho;
    report.primal_residual = rp;
    report.dual_residual = rd;
    report
}

/// Dense solve of the equality-constrained program on an active set:
/// `min ½x'Hx + q'x` subject to `a_r·x = b_r`, through the regularized KKT
/// system with iterative refinement. Returns `(x, ν)` with
/// `Hx + q + Σ ν_r a_r = 0`.
pub(crate) fn solve_equality_qp(
    h_diag: &[f64],
    q: &[f64],
    rows: &[(Vec<(usize, f64)>, f64)],
) -> Option<(Vec<f64>, Vec<f64>)> {
    let nv = h_diag.len();
    let ma = rows.len();
    let dim = nv + ma;
    let delta = 1e-10;
    let mut k0 = DMatrix::<f64>::zeros(dim, dim);
    for (k, h) in h_diag.iter().enumerate() {
        k0[(k, k)] = *h;
    }
    for (r, (coeffs, _)) in rows.iter().enumerate() {
        for &(c, v) in coeffs {
            k0[(nv + r, c)] += v;
            k0[(c, nv + r)] += v;
        }
    }
    let mut kd = k0.clone();
    for k in 0..nv {
        kd[(k, k)] += delta;
    }
    for r in 0..ma {
        kd[(nv + r, nv + r)] -= delta;
    }
    let lu = kd.lu();
    let rhs = DVector::from_fn(dim, |k, _| if k < nv { -q[k] } else { rows[k - nv].1 });
    let mut sol = lu.solve(&rhs)?;
    for _ in 0..5 {
        let resid = &rhs - &k0 * &sol;
        let corr = lu.solve(&resid)?;
        sol += corr;
    }
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let x = sol.rows(0, nv).iter().copied().collect();
    let nu = sol.rows(nv, ma).iter().copied().collect();
    Some((x, nu))
}
