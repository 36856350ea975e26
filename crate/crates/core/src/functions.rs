//! Executable convex functions.
//!
//! * [`QuadraticReference`]: `f_0(x) = ‖x‖²`.
//! * [`PiecewiseAffineConvex`]: `x ↦ max_j (w_j·x + b_j)`.
//! * [`build_f_tilde`]: the upper envelope of the tangent planes of `f_0`
//!   at the points of an `η`-grid, an `O(k)`-piece approximant with sup
//!   error of order `k^{-2/d}`.
//! * [`BumpPacking`]: `G_ξ = f_0 + c·Σ_s ξ_s g_s` with cos³ bumps `g_s`
//!   centred at grid points and binary codewords `ξ`.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    cube_cover, dot, lattice_in, sample_uniform, sq_dist, CoverMode, GridDesign, SlabPolytope,
};
use crate::rng::rng_from;

/// Anything that can be evaluated at a point of `R^d`.
pub trait ConvexFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadraticReference {
    pub dim: usize,
}

impl ConvexFunction for QuadraticReference {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> f64 {
        dot(x, x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    #[serde(rename = "w")]
    pub slope: Vec<f64>,
    #[serde(rename = "b")]
    pub intercept: f64,
}

impl AffinePiece {
    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.slope, x) + self.intercept
    }
}

#[derive(Debug, Deserialize)]
struct PwaRepr {
    dim: usize,
    pieces: Vec<AffinePiece>,
}

/// Maximum of finitely many affine functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PwaRepr")]
pub struct PiecewiseAffineConvex {
    dim: usize,
    pieces: Vec<AffinePiece>,
}

impl TryFrom<PwaRepr> for PiecewiseAffineConvex {
    type Error = Error;

    fn try_from(r: PwaRepr) -> Result<Self> {
        PiecewiseAffineConvex::new(r.dim, r.pieces)
    }
}

impl PiecewiseAffineConvex {
    pub fn new(dim: usize, pieces: Vec<AffinePiece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidArgument(
                "a piecewise-affine function needs at least one piece".into(),
            ));
        }
        if let Some(p) = pieces.iter().find(|p| p.slope.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.slope.len(),
            });
        }
        Ok(PiecewiseAffineConvex { dim, pieces })
    }

    pub fn affine(slope: Vec<f64>, intercept: f64) -> Self {
        let dim = slope.len();
        PiecewiseAffineConvex {
            dim,
            pieces: vec![AffinePiece { slope, intercept }],
        }
    }

    pub fn pieces(&self) -> &[AffinePiece] {
        &self.pieces
    }

    /// Index of a piece attaining the maximum at `x`.
    pub fn active_piece(&self, x: &[f64]) -> usize {
        let mut best = (f64::NEG_INFINITY, 0);
        for (j, p) in self.pieces.iter().enumerate() {
            let v = p.eval(x);
            if v > best.0 {
                best = (v, j);
            }
        }
        best.1
    }
}

impl ConvexFunction for PiecewiseAffineConvex {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.eval(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Checked evaluation of a piecewise-affine function.
pub fn eval_pwa(f: &PiecewiseAffineConvex, x: &[f64]) -> Result<f64> {
    if x.len() != f.dim {
        return Err(Error::DimensionMismatch {
            expected: f.dim,
            found: x.len(),
        });
    }
    Ok(f.eval(x))
}

/// Tangent-plane approximant of `‖x‖²` together with its anchor set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FTilde {
    pub function: PiecewiseAffineConvex,
    pub anchors: Vec<Vec<f64>>,
    pub eta: f64,
}

/// The plane tangent to `‖x‖²` at `v`: `x ↦ 2v·x − ‖v‖²`.
pub fn tangent_plane(v: &[f64]) -> AffinePiece {
    AffinePiece {
        slope: v.iter().map(|c| 2.0 * c).collect(),
        intercept: -dot(v, v),
    }
}

fn envelope_of(dim: usize, anchors: &[Vec<f64>]) -> Result<PiecewiseAffineConvex> {
    PiecewiseAffineConvex::new(dim, anchors.iter().map(|v| tangent_plane(v)).collect())
}

fn cube_vertices(cubes: &[crate::geometry::Cube]) -> Vec<Vec<f64>> {
    let mut seen: HashMap<Vec<i64>, ()> = HashMap::new();
    let mut out = Vec::new();
    for c in cubes {
        for mask in 0..1usize << c.index.len() {
            let key: Vec<i64> = c
                .index
                .iter()
                .enumerate()
                .map(|(k, &i)| i + (mask >> k & 1) as i64)
                .collect();
            if seen.insert(key.clone(), ()).is_none() {
                out.push(key.iter().map(|&i| i as f64 * c.side).collect());
            }
        }
    }
    out
}

fn f_tilde_eta(poly: &SlabPolytope, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    Ok((k as f64).powf(-1.0 / poly.dim() as f64) * poly.side_scale())
}

/// Upper envelope of the tangent planes of `‖x‖²` at the points of the
/// `η`-grid in `poly`, `η = k^{-1/d}·side`.
///
/// The result is convex, equals `‖x‖²` at every anchor and satisfies
/// `‖x‖² − f̃(x) = min_v ‖x − v‖²`. If fewer than `d + 1` grid points fall
/// inside `poly`, the vertices of the intersecting `η`-cubes are used as
/// anchors instead.
pub fn build_f_tilde(poly: &SlabPolytope, k: usize) -> Result<FTilde> {
    let eta = f_tilde_eta(poly, k)?;
    let mut anchors = lattice_in(poly, eta)?.points;
    if anchors.len() < poly.dim() + 1 {
        anchors = cube_vertices(&cube_cover(poly, eta, CoverMode::Intersecting)?);
    }
    if anchors.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} yields no anchors in the domain"
        )));
    }
    Ok(FTilde {
        function: envelope_of(poly.dim(), &anchors)?,
        anchors,
        eta,
    })
}

/// Variant of [`build_f_tilde`] for domains where only cubes inside the
/// domain may be used: anchors are the vertices of the interior `η`-cubes.
/// Returns the fraction of `samples` uniform points of `poly` lying in the
/// union of those cubes alongside the approximant.
pub fn build_f_tilde_interior(
    poly: &SlabPolytope,
    k: usize,
    samples: usize,
    seed: u64,
) -> Result<(FTilde, f64)> {
    let eta = f_tilde_eta(poly, k)?;
    let cubes = cube_cover(poly, eta, CoverMode::Interior)?;
    let anchors = cube_vertices(&cubes);
    if anchors.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} yields no cube inside the domain"
        )));
    }
    let pts = sample_uniform(poly, samples.max(1), seed)?;
    let covered = pts
        .points
        .iter()
        .filter(|p| cubes.iter().any(|c| c.contains(p)))
        .count();
    Ok((
        FTilde {
            function: envelope_of(poly.dim(), &anchors)?,
            anchors,
            eta,
        },
        covered as f64 / pts.n() as f64,
    ))
}

/// Coefficient in front of the bump sum; keeps every member convex.
pub const BUMP_COEFFICIENT: f64 = 3.0 / (4.0 * std::f64::consts::SQRT_2 * PI * PI);

/// `δ²·Σ_i cos³(π u_i)` with `u = (x − s)/δ` on `[-1/2, 1/2]^d`, zero outside.
pub fn bump_value(center: &[f64], delta: f64, x: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (xi, si) in x.iter().zip(center) {
        let u = (xi - si) / delta;
        if u.abs() > 0.5 {
            return 0.0;
        }
        sum += (PI * u).cos().powi(3);
    }
    delta * delta * sum
}

/// Family `G_ξ` over a grid design with pairwise Hamming-separated codewords.
#[derive(Debug, Clone)]
pub struct BumpPacking {
    grid: GridDesign,
    codewords: Vec<Vec<bool>>,
    lookup: HashMap<Vec<i64>, usize>,
}

pub fn hamming(a: &[bool], b: &[bool]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Smallest integer Hamming distance that is at least `n/4`.
pub fn quarter_length(n: usize) -> usize {
    n.div_ceil(4)
}

impl BumpPacking {
    /// Checks that each codeword has one bit per grid point and that
    /// distinct codewords differ in at least `n/4` positions.
    pub fn new(grid: GridDesign, codewords: Vec<Vec<bool>>) -> Result<Self> {
        let n = grid.n();
        if let Some(c) = codewords.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: c.len(),
            });
        }
        let min = quarter_length(n);
        for i in 0..codewords.len() {
            for j in i + 1..codewords.len() {
                let h = hamming(&codewords[i], &codewords[j]);
                if h < min {
                    return Err(Error::InvalidArgument(format!(
                        "codewords {i} and {j} are at Hamming distance {h} < {min}"
                    )));
                }
            }
        }
        let lookup = grid.index_lookup();
        Ok(BumpPacking {
            grid,
            codewords,
            lookup,
        })
    }

    /// Packing whose codewords come from [`varshamov_gilbert`] with
    /// minimum distance `⌈n/4⌉`.
    pub fn varshamov_gilbert(grid: GridDesign, count: usize, seed: u64) -> Result<Self> {
        let n = grid.n();
        let codes = varshamov_gilbert(n, quarter_length(n), count, seed)?;
        BumpPacking::new(grid, codes)
    }

    pub fn grid(&self) -> &GridDesign {
        &self.grid
    }

    pub fn codewords(&self) -> &[Vec<bool>] {
        &self.codewords
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn coefficient(&self) -> f64 {
        BUMP_COEFFICIENT
    }

    /// `G_ξ(x)` for an arbitrary codeword `ξ` over this grid.
    pub fn eval_codeword(&self, xi: &[bool], x: &[f64]) -> f64 {
        let delta = self.grid.delta;
        // The supports are the cubes s ± δ/2 with disjoint interiors, so
        // only the nearest lattice point can contribute.
        let key: Vec<i64> = x.iter().map(|v| (v / delta).round() as i64).collect();
        let bump = match self.lookup.get(&key) {
            Some(&s) if xi[s] => bump_value(&self.grid.points[s], delta, x),
            _ => 0.0,
        };
        dot(x, x) + BUMP_COEFFICIENT * bump
    }

    pub fn eval_member(&self, index: usize, x: &[f64]) -> Result<f64> {
        let xi = self.codeword(index)?;
        if x.len() != self.grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.grid.dim(),
                found: x.len(),
            });
        }
        Ok(self.eval_codeword(xi, x))
    }

    pub fn member(&self, index: usize) -> Result<PackingMember<'_>> {
        self.codeword(index)?;
        Ok(PackingMember {
            packing: self,
            index,
        })
    }

    fn codeword(&self, index: usize) -> Result<&[bool]> {
        self.codewords
            .get(index)
            .map(Vec::as_slice)
            .ok_or(Error::IndexOutOfRange {
                index,
                len: self.codewords.len(),
            })
    }

    /// `ℓ_{P_n}(G_{ξ_i}, G_{ξ_j})` over the grid points, in closed form.
    pub fn packing_distance(&self, i: usize, j: usize) -> Result<f64> {
        let (a, b) = (self.codeword(i)?, self.codeword(j)?);
        Ok(codeword_distance(
            self.grid.n(),
            self.grid.dim(),
            self.grid.delta,
            a,
            b,
        ))
    }
}

/// Closed form `(3dδ²/(4√2π²))·√(Υ(a, b)/n)` for two codewords on an
/// `n`-point grid of resolution `δ` in dimension `d`.
pub fn codeword_distance(n: usize, dim: usize, delta: f64, a: &[bool], b: &[bool]) -> f64 {
    BUMP_COEFFICIENT * dim as f64 * delta * delta * (hamming(a, b) as f64 / n as f64).sqrt()
}

/// Borrowed view of one packing member.
#[derive(Debug, Clone, Copy)]
pub struct PackingMember<'a> {
    packing: &'a BumpPacking,
    index: usize,
}

impl ConvexFunction for PackingMember<'_> {
    fn dim(&self) -> usize {
        self.packing.grid.dim()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.packing
            .eval_codeword(&self.packing.codewords[self.index], x)
    }
}

/// Owned packing member `G_ξ` for a single codeword.
#[derive(Debug, Clone)]
pub struct BumpFunction {
    grid: GridDesign,
    lookup: HashMap<Vec<i64>, usize>,
    codeword: Vec<bool>,
}

impl BumpFunction {
    pub fn new(grid: GridDesign, codeword: Vec<bool>) -> Result<Self> {
        if codeword.len() != grid.n() {
            return Err(Error::DimensionMismatch {
                expected: grid.n(),
                found: codeword.len(),
            });
        }
        let lookup = grid.index_lookup();
        Ok(BumpFunction {
            grid,
            lookup,
            codeword,
        })
    }

    pub fn codeword(&self) -> &[bool] {
        &self.codeword
    }
}

impl ConvexFunction for BumpFunction {
    fn dim(&self) -> usize {
        self.grid.dim()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let delta = self.grid.delta;
        let key: Vec<i64> = x.iter().map(|v| (v / delta).round() as i64).collect();
        let bump = match self.lookup.get(&key) {
            Some(&s) if self.codeword[s] => bump_value(&self.grid.points[s], delta, x),
            _ => 0.0,
        };
        dot(x, x) + BUMP_COEFFICIENT * bump
    }
}

pub const VG_ATTEMPTS_PER_CODEWORD: usize = 1000;

/// Greedy binary code: draw uniform words and keep those at Hamming
/// distance at least `min_hamming` from every word kept so far.
pub fn varshamov_gilbert(
    n: usize,
    min_hamming: usize,
    target_count: usize,
    seed: u64,
) -> Result<Vec<Vec<bool>>> {
    varshamov_gilbert_with_budget(
        n,
        min_hamming,
        target_count,
        seed,
        VG_ATTEMPTS_PER_CODEWORD.saturating_mul(target_count),
    )
}

pub fn varshamov_gilbert_with_budget(
    n: usize,
    min_hamming: usize,
    target_count: usize,
    seed: u64,
    budget: usize,
) -> Result<Vec<Vec<bool>>> {
    if min_hamming > n {
        return Err(Error::InvalidArgument(format!(
            "minimum distance {min_hamming} exceeds the length {n}"
        )));
    }
    if target_count == 0 {
        return Err(Error::InvalidArgument(
            "target count must be at least 1".into(),
        ));
    }
    let mut rng = rng_from(seed, &[]);
    let mut accepted: Vec<Vec<bool>> = Vec::with_capacity(target_count);
    let mut attempts = 0;
    while accepted.len() < target_count {
        if attempts >= budget {
            return Err(Error::CodeBudgetExhausted {
                found: accepted.len(),
                target: target_count,
                budget,
            });
        }
        attempts += 1;
        let word: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
        if accepted.iter().all(|c| hamming(c, &word) >= min_hamming) {
            accepted.push(word);
        }
    }
    Ok(accepted)
}

/// Largest pointwise gap `‖x‖² − f̃(x)` over the points of a dense grid of
/// resolution `step` in `poly`.
pub fn dense_sup_gap(f: &dyn ConvexFunction, poly: &SlabPolytope, step: f64) -> Result<f64> {
    let pts = lattice_in(poly, step)?;
    Ok(pts
        .points
        .iter()
        .map(|x| dot(x, x) - f.eval(x))
        .fold(0.0, f64::max))
}

/// Squared distance from `x` to the nearest anchor.
pub fn nearest_anchor_sq_dist(anchors: &[Vec<f64>], x: &[f64]) -> f64 {
    anchors
        .iter()
        .map(|v| sq_dist(v, x))
        .fold(f64::INFINITY, f64::min)
}
