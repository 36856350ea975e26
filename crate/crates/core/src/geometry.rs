//! Domains and designs.
//!
//! A [`SlabPolytope`] is an intersection of slabs `{x : a ≤ v·x ≤ b}` with
//! unit normals `v`. Designs are either the points of the regular lattice
//! `δℤ^d` inside the polytope ([`GridDesign`]) or i.i.d. uniform samples
//! ([`RandomDesign`]).

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from;

/// Membership tolerance; the domain is treated as closed.
pub const CONTAINS_TOL: f64 = 1e-12;

const NORMAL_TOL: f64 = 1e-12;
const MAX_VERTEX_COMBINATIONS: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slab {
    #[serde(rename = "v")]
    pub normal: Vec<f64>,
    #[serde(rename = "a")]
    pub lower: f64,
    #[serde(rename = "b")]
    pub upper: f64,
}

impl Slab {
    pub fn new(normal: Vec<f64>, lower: f64, upper: f64) -> Self {
        Slab {
            normal,
            lower,
            upper,
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x)
    }
}

#[derive(Debug, Deserialize)]
struct PolytopeRepr {
    dim: usize,
    slabs: Vec<Slab>,
    radius: f64,
}

/// Bounded intersection of slabs, contained in the origin-centred ball of
/// the radius supplied at construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "PolytopeRepr")]
pub struct SlabPolytope {
    dim: usize,
    slabs: Vec<Slab>,
    radius: f64,
    #[serde(skip)]
    lower_corner: Vec<f64>,
    #[serde(skip)]
    upper_corner: Vec<f64>,
}

impl TryFrom<PolytopeRepr> for SlabPolytope {
    type Error = Error;

    fn try_from(r: PolytopeRepr) -> Result<Self> {
        SlabPolytope::new(r.dim, r.slabs, r.radius)
    }
}

impl PartialEq for SlabPolytope {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.slabs == other.slabs && self.radius == other.radius
    }
}

impl SlabPolytope {
    /// Validates the slab system and computes the tight bounding box.
    ///
    /// The box comes from enumerating the polytope's vertices (feasible
    /// intersections of `d` slab boundaries). When that enumeration is too
    /// large the box falls back to the axis-aligned slabs clipped to
    /// `[-radius, radius]^d`, and the ball containment check is skipped.
    pub fn new(dim: usize, slabs: Vec<Slab>, radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidPolytope("dimension must be positive".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidPolytope(format!(
                "radius must be positive and finite, got {radius}"
            )));
        }
        if slabs.is_empty() {
            return Err(Error::InvalidPolytope("no slabs".into()));
        }
        for (i, s) in slabs.iter().enumerate() {
            if s.normal.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.normal.len(),
                });
            }
            let norm = dot(&s.normal, &s.normal).sqrt();
            if (norm - 1.0).abs() > NORMAL_TOL {
                return Err(Error::InvalidPolytope(format!(
                    "slab {i} normal has norm {norm}, expected 1"
                )));
            }
            if !(s.lower < s.upper) {
                return Err(Error::InvalidPolytope(format!(
                    "slab {i} has a = {} not below b = {}",
                    s.lower, s.upper
                )));
            }
        }
        let normals = DMatrix::from_fn(slabs.len(), dim, |i, j| slabs[i].normal[j]);
        if normals.rank(1e-10) < dim {
            return Err(Error::InvalidPolytope(
                "slab normals do not span the space; polytope is unbounded".into(),
            ));
        }

        let (lower_corner, upper_corner) = match enumerate_vertices(dim, &slabs) {
            Some(vertices) => {
                if vertices.is_empty() {
                    return Err(Error::InvalidPolytope("empty polytope".into()));
                }
                let mut lo = vec![f64::INFINITY; dim];
                let mut hi = vec![f64::NEG_INFINITY; dim];
                for v in &vertices {
                    let r = dot(v, v).sqrt();
                    if r > radius * (1.0 + 1e-9) + 1e-12 {
                        return Err(Error::InvalidPolytope(format!(
                            "vertex at distance {r} lies outside the ball of radius {radius}"
                        )));
                    }
                    for k in 0..dim {
                        lo[k] = lo[k].min(v[k]);
                        hi[k] = hi[k].max(v[k]);
                    }
                }
                (lo, hi)
            }
            None => axis_box(dim, &slabs, radius),
        };

        Ok(SlabPolytope {
            dim,
            slabs,
            radius,
            lower_corner,
            upper_corner,
        })
    }

    /// `[lower, upper]` box given per coordinate.
    pub fn boxed(lower: &[f64], upper: &[f64]) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        let dim = lower.len();
        let slabs = (0..dim)
            .map(|k| {
                let mut v = vec![0.0; dim];
                v[k] = 1.0;
                Slab::new(v, lower[k], upper[k])
            })
            .collect();
        let radius = lower
            .iter()
            .zip(upper)
            .map(|(a, b)| a.abs().max(b.abs()).powi(2))
            .sum::<f64>()
            .sqrt();
        SlabPolytope::new(dim, slabs, radius.max(f64::MIN_POSITIVE))
    }

    pub fn unit_cube(dim: usize) -> Self {
        SlabPolytope::boxed(&vec![0.0; dim], &vec![1.0; dim]).expect("unit cube is valid")
    }

    /// Regular polygon circumscribing the disc of radius `r` in the plane,
    /// with `count` slabs (so `2·count` sides).
    pub fn polygon_disc(r: f64, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidPolytope("need at least two slabs".into()));
        }
        let slabs = (0..count)
            .map(|i| {
                let phi = std::f64::consts::PI * i as f64 / count as f64;
                Slab::new(vec![phi.cos(), phi.sin()], -r, r)
            })
            .collect();
        let circumradius = r / (std::f64::consts::PI / (2 * count) as f64).cos();
        SlabPolytope::new(2, slabs, circumradius * (1.0 + 1e-9))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn slabs(&self) -> &[Slab] {
        &self.slabs
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn bounding_box(&self) -> (&[f64], &[f64]) {
        (&self.lower_corner, &self.upper_corner)
    }

    /// Largest side of the bounding box.
    pub fn side_scale(&self) -> f64 {
        self.lower_corner
            .iter()
            .zip(&self.upper_corner)
            .map(|(a, b)| b - a)
            .fold(0.0, f64::max)
    }

    /// Inclusive membership test, tolerance [`CONTAINS_TOL`].
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(self.contains_unchecked(x))
    }

    pub(crate) fn contains_unchecked(&self, x: &[f64]) -> bool {
        self.slabs.iter().all(|s| {
            let v = s.value(x);
            v >= s.lower - CONTAINS_TOL && v <= s.upper + CONTAINS_TOL
        })
    }

    pub fn vertices(&self) -> Option<Vec<Vec<f64>>> {
        enumerate_vertices(self.dim, &self.slabs)
    }
}

fn axis_box(dim: usize, slabs: &[Slab], radius: f64) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![-radius; dim];
    let mut hi = vec![radius; dim];
    for s in slabs {
        let nz: Vec<usize> = (0..dim).filter(|&k| s.normal[k] != 0.0).collect();
        if let [k] = nz[..] {
            let (a, b) = if s.normal[k] > 0.0 {
                (s.lower, s.upper)
            } else {
                (-s.upper, -s.lower)
            };
            lo[k] = lo[k].max(a);
            hi[k] = hi[k].min(b);
        }
    }
    (lo, hi)
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Vertices of a bounded slab system, or `None` if the enumeration would
/// exceed [`MAX_VERTEX_COMBINATIONS`] linear solves.
pub(crate) fn enumerate_vertices(dim: usize, slabs: &[Slab]) -> Option<Vec<Vec<f64>>> {
    let planes: Vec<(usize, &[f64], f64)> = slabs
        .iter()
        .enumerate()
        .flat_map(|(i, s)| [(i, &s.normal[..], s.lower), (i, &s.normal[..], s.upper)])
        .collect();
    if binomial(planes.len(), dim) > MAX_VERTEX_COMBINATIONS {
        return None;
    }
    let scale = slabs
        .iter()
        .map(|s| s.lower.abs().max(s.upper.abs()))
        .fold(1.0, f64::max);
    let tol = 1e-9 * scale;
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut combo: Vec<usize> = (0..dim).collect();
    loop {
        let distinct_slabs = combo.windows(2).all(|w| planes[w[0]].0 != planes[w[1]].0);
        if distinct_slabs {
            let m = DMatrix::from_fn(dim, dim, |r, c| planes[combo[r]].1[c]);
            let rhs = DVector::from_fn(dim, |r, _| planes[combo[r]].2);
            if let Some(sol) = m.lu().solve(&rhs) {
                let x: Vec<f64> = sol.iter().copied().collect();
                let inside = x.iter().all(|v| v.is_finite())
                    && slabs.iter().all(|s| {
                        let v = s.value(&x);
                        v >= s.lower - tol && v <= s.upper + tol
                    });
                if inside
                    && !out
                        .iter()
                        .any(|y| y.iter().zip(&x).all(|(a, b)| (a - b).abs() <= tol))
                {
                    out.push(x);
                }
            }
        }
        // next combination in lexicographic order
        let mut i = dim;
        loop {
            if i == 0 {
                return Some(out);
            }
            i -= 1;
            if combo[i] < planes.len() - dim + i {
                combo[i] += 1;
                for j in i + 1..dim {
                    combo[j] = combo[j - 1] + 1;
                }
                break;
            }
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Points of `δℤ^d` inside a polytope, in lexicographic order of their
/// integer indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDesign {
    pub delta: f64,
    pub points: Vec<Vec<f64>>,
    pub indices: Vec<Vec<i64>>,
}

impl GridDesign {
    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    /// Map from integer index to position in `points`.
    pub fn index_lookup(&self) -> HashMap<Vec<i64>, usize> {
        self.indices
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), i))
            .collect()
    }
}

fn lattice_range(lo: f64, hi: f64, delta: f64) -> (i64, i64) {
    let a = (lo / delta - 1e-9).ceil() as i64;
    let b = (hi / delta + 1e-9).floor() as i64;
    (a, b)
}

/// Visits every integer vector in the box `ranges` in lexicographic order.
fn for_each_lattice_point(ranges: &[(i64, i64)], mut visit: impl FnMut(&[i64])) {
    if ranges.iter().any(|(a, b)| a > b) {
        return;
    }
    let mut k: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    loop {
        visit(&k);
        let mut axis = ranges.len();
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            if k[axis] < ranges[axis].1 {
                k[axis] += 1;
                for j in axis + 1..ranges.len() {
                    k[j] = ranges[j].0;
                }
                break;
            }
        }
    }
}

/// Lattice points `(k_1δ, …, k_dδ)` inside `poly`.
pub fn grid_points(poly: &SlabPolytope, delta: f64) -> Result<GridDesign> {
    let design = lattice_in(poly, delta)?;
    if design.n() < 2 {
        return Err(Error::GridTooCoarse {
            delta,
            count: design.n(),
        });
    }
    Ok(design)
}

/// As [`grid_points`] but without the `n ≥ 2` requirement.
pub(crate) fn lattice_in(poly: &SlabPolytope, delta: f64) -> Result<GridDesign> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "grid resolution must be positive, got {delta}"
        )));
    }
    let (lo, hi) = poly.bounding_box();
    let ranges: Vec<(i64, i64)> = lo
        .iter()
        .zip(hi)
        .map(|(&a, &b)| lattice_range(a, b, delta))
        .collect();
    let mut points = Vec::new();
    let mut indices = Vec::new();
    for_each_lattice_point(&ranges, |k| {
        let x: Vec<f64> = k.iter().map(|&ki| ki as f64 * delta).collect();
        if poly.contains_unchecked(&x) {
            points.push(x);
            indices.push(k.to_vec());
        }
    });
    Ok(GridDesign {
        delta,
        points,
        indices,
    })
}

/// Largest resolution of the form `w / m` (`w` the widest bounding-box side,
/// `m = 1, 2, …`) whose grid has at least `target` points.
pub fn grid_for_size(poly: &SlabPolytope, target: usize) -> Result<GridDesign> {
    let w = poly.side_scale();
    let target = target.max(2);
    for m in 1..=1_000_000usize {
        let design = lattice_in(poly, w / m as f64)?;
        if design.n() >= target {
            return Ok(design);
        }
    }
    Err(Error::InvalidArgument(format!(
        "no grid resolution reaches {target} points"
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomDesign {
    pub points: Vec<Vec<f64>>,
    pub seed: u64,
}

impl RandomDesign {
    pub fn n(&self) -> usize {
        self.points.len()
    }
}

pub const DEFAULT_REJECTION_BUDGET_PER_POINT: usize = 10_000;

/// `n` i.i.d. uniform points on `poly` by rejection from its bounding box.
pub fn sample_uniform(poly: &SlabPolytope, n: usize, seed: u64) -> Result<RandomDesign> {
    sample_uniform_with_budget(
        poly,
        n,
        seed,
        n.saturating_mul(DEFAULT_REJECTION_BUDGET_PER_POINT),
    )
}

pub fn sample_uniform_with_budget(
    poly: &SlabPolytope,
    n: usize,
    seed: u64,
    budget: usize,
) -> Result<RandomDesign> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "sample size must be at least 1".into(),
        ));
    }
    let mut rng = rng_from(seed, &[]);
    let (lo, hi) = poly.bounding_box();
    let mut points = Vec::with_capacity(n);
    let mut proposals = 0usize;
    let mut x = vec![0.0; poly.dim()];
    while points.len() < n {
        if proposals >= budget {
            return Err(Error::SamplerBudgetExhausted {
                budget,
                accepted: points.len(),
            });
        }
        proposals += 1;
        for k in 0..x.len() {
            x[k] = lo[k] + (hi[k] - lo[k]) * rng.random::<f64>();
        }
        if poly.contains_unchecked(&x) {
            points.push(x.clone());
        }
    }
    Ok(RandomDesign { points, seed })
}

/// Closed axis-aligned cube `[corner, corner + side]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub index: Vec<i64>,
    pub corner: Vec<f64>,
    pub side: f64,
}

impl Cube {
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let d = self.corner.len();
        (0..1usize << d)
            .map(|mask| {
                (0..d)
                    .map(|k| self.corner[k] + if mask >> k & 1 == 1 { self.side } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.corner)
            .all(|(v, c)| *v >= c - CONTAINS_TOL && *v <= c + self.side + CONTAINS_TOL)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverMode {
    /// Cubes whose interior meets the polytope.
    Intersecting,
    /// Cubes contained in the polytope.
    Interior,
}

/// Cubes of the lattice `ηℤ^d` selected by `mode`.
pub fn cube_cover(poly: &SlabPolytope, eta: f64, mode: CoverMode) -> Result<Vec<Cube>> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "cube side must be positive, got {eta}"
        )));
    }
    let d = poly.dim();
    let (lo, hi) = poly.bounding_box();
    let ranges: Vec<(i64, i64)> = lo
        .iter()
        .zip(hi)
        .map(|(&a, &b)| {
            (
                (a / eta + 1e-9).floor() as i64,
                ((b / eta - 1e-9).ceil() as i64 - 1),
            )
        })
        .collect();
    let mut cubes = Vec::new();
    for_each_lattice_point(&ranges, |k| {
        let cube = Cube {
            index: k.to_vec(),
            corner: k.iter().map(|&ki| ki as f64 * eta).collect(),
            side: eta,
        };
        let keep = match mode {
            CoverMode::Interior => cube.vertices().iter().all(|v| poly.contains_unchecked(v)),
            CoverMode::Intersecting => cube_meets_interior(poly, &cube),
        };
        if keep {
            cubes.push(cube);
        }
    });
    debug_assert!(cubes.iter().all(|c| c.corner.len() == d));
    Ok(cubes)
}

/// Whether a slightly shrunken copy of `cube` meets `poly`, so cubes that
/// only touch the boundary are excluded.
fn cube_meets_interior(poly: &SlabPolytope, cube: &Cube) -> bool {
    let d = poly.dim();
    let shrink = 1e-9 * cube.side;
    let lo: Vec<f64> = cube.corner.iter().map(|c| c + shrink).collect();
    let hi: Vec<f64> = cube.corner.iter().map(|c| c + cube.side - shrink).collect();

    // Interval test per slab: necessary condition.
    for s in poly.slabs() {
        let (mut vmin, mut vmax) = (0.0, 0.0);
        for k in 0..d {
            let (a, b) = (s.normal[k] * lo[k], s.normal[k] * hi[k]);
            vmin += a.min(b);
            vmax += a.max(b);
        }
        if vmax < s.lower || vmin > s.upper {
            return false;
        }
    }
    // Sufficient: a cube vertex or a polytope vertex is shared.
    let shrunk = Cube {
        index: cube.index.clone(),
        corner: lo.clone(),
        side: cube.side - 2.0 * shrink,
    };
    if shrunk.vertices().iter().any(|v| poly.contains_unchecked(v)) {
        return true;
    }
    if let Some(vs) = poly.vertices() {
        if vs.iter().any(|v| shrunk.contains(v)) {
            return true;
        }
    }
    // Exact: the intersection is a bounded slab system; it is nonempty iff
    // it has a vertex.
    let mut slabs = poly.slabs().to_vec();
    for k in 0..d {
        let mut v = vec![0.0; d];
        v[k] = 1.0;
        slabs.push(Slab::new(v, lo[k], hi[k]));
    }
    match enumerate_vertices(d, &slabs) {
        Some(vs) => !vs.is_empty(),
        None => true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contains_examples() {
        let cube = SlabPolytope::unit_cube(2);
        assert!(cube.contains(&[0.5, 0.5]).unwrap());
        assert!(cube.contains(&[1.0, 0.0]).unwrap());
        assert!(!cube.contains(&[1.1, 0.0]).unwrap());
        assert!(matches!(
            cube.contains(&[0.5]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_bad_slab_systems() {
        assert!(SlabPolytope::new(2, vec![Slab::new(vec![1.0, 0.0], 0.0, 1.0)], 10.0).is_err());
        assert!(SlabPolytope::new(1, vec![Slab::new(vec![2.0], 0.0, 1.0)], 10.0).is_err());
        assert!(SlabPolytope::new(1, vec![Slab::new(vec![1.0], 1.0, 1.0)], 10.0).is_err());
        // bounded but not inside the stated ball
        assert!(SlabPolytope::new(1, vec![Slab::new(vec![1.0], 0.0, 3.0)], 2.0).is_err());
    }

    #[test]
    fn bounding_box_of_rotated_square() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let poly = SlabPolytope::new(
            2,
            vec![Slab::new(vec![s, s], -s, s), Slab::new(vec![s, -s], -s, s)],
            1.0 + 1e-9,
        )
        .unwrap();
        let (lo, hi) = poly.bounding_box();
        for k in 0..2 {
            assert!((lo[k] + 1.0).abs() < 1e-12 && (hi[k] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_examples() {
        let line = SlabPolytope::boxed(&[0.0], &[1.0]).unwrap();
        let g = grid_points(&line, 0.3).unwrap();
        let xs: Vec<f64> = g.points.iter().map(|p| p[0]).collect();
        assert_eq!(g.n(), 4);
        for (x, e) in xs.iter().zip([0.0, 0.3, 0.6, 0.9]) {
            assert!((x - e).abs() < 1e-12);
        }

        let sq = SlabPolytope::unit_cube(2);
        let g = grid_points(&sq, 0.5).unwrap();
        assert_eq!(g.n(), 9);
        assert_eq!(g.indices[0], vec![0, 0]);
        assert_eq!(g.indices[1], vec![0, 1]);
        assert_eq!(g.indices[8], vec![2, 2]);

        let shifted = SlabPolytope::boxed(&[0.1], &[1.0]).unwrap();
        let g = grid_points(&shifted, 0.5).unwrap();
        assert_eq!(g.n(), 2);
        assert!((g.points[0][0] - 0.5).abs() < 1e-12 && (g.points[1][0] - 1.0).abs() < 1e-12);

        assert!(matches!(
            grid_points(&line, 2.0),
            Err(Error::GridTooCoarse { .. })
        ));
        assert!(grid_points(&line, 0.0).is_err());
    }

    #[test]
    fn grid_count_sandwich_on_cube() {
        for d in 1..=3 {
            let cube = SlabPolytope::unit_cube(d);
            for delta in [0.5, 0.3, 0.2, 0.1, 0.07] {
                if d == 3 && delta < 0.1 {
                    continue;
                }
                let n = grid_points(&cube, delta).unwrap().n() as f64;
                let lo = (1.0 / delta).powi(d as i32);
                let hi = (1.0 / delta + 1.0).powi(d as i32);
                assert!(lo <= n + 1e-9 && n <= hi + 1e-9, "d={d} δ={delta} n={n}");
            }
        }
    }

    #[test]
    fn grid_for_size_realizes_at_least_target() {
        let line = SlabPolytope::unit_cube(1);
        assert_eq!(grid_for_size(&line, 32).unwrap().n(), 32);
        let cube5 = SlabPolytope::unit_cube(5);
        assert_eq!(grid_for_size(&cube5, 3000).unwrap().n(), 3125);
    }

    #[test]
    fn sampler_examples() {
        let cube = SlabPolytope::unit_cube(2);
        assert!(sample_uniform(&cube, 0, 1).is_err());
        let a = sample_uniform(&cube, 10_000, 42).unwrap();
        let b = sample_uniform(&cube, 10_000, 42).unwrap();
        assert_eq!(a, b);
        for k in 0..2 {
            let mean = a.points.iter().map(|p| p[k]).sum::<f64>() / 10_000.0;
            assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
        }
        assert!(a.points.iter().all(|p| cube.contains(p).unwrap()));
    }

    #[test]
    fn sampler_budget() {
        let disc = SlabPolytope::polygon_disc(1.0, 8).unwrap();
        assert!(matches!(
            sample_uniform_with_budget(&disc, 1000, 3, 10),
            Err(Error::SamplerBudgetExhausted { .. })
        ));
    }

    #[test]
    fn cube_cover_examples() {
        let sq = SlabPolytope::unit_cube(2);
        assert_eq!(
            cube_cover(&sq, 0.5, CoverMode::Intersecting).unwrap().len(),
            4
        );
        let inner = cube_cover(&sq, 0.6, CoverMode::Interior).unwrap();
        assert_eq!(inner.len(), 1);
        assert_eq!(inner[0].corner, vec![0.0, 0.0]);

        let disc = SlabPolytope::polygon_disc(1.0, 16).unwrap();
        let cover = cube_cover(&disc, 2.0, CoverMode::Intersecting).unwrap();
        assert!(!cover.is_empty());
        assert!(cover.iter().all(|c| c.side == 2.0));
        // every sampled point of the disc lies in some cube
        let pts = sample_uniform(&disc, 500, 9).unwrap();
        assert!(pts
            .points
            .iter()
            .all(|p| cover.iter().any(|c| c.contains(p))));
    }

    #[test]
    fn interior_cubes_are_disjoint_and_inside() {
        let disc = SlabPolytope::polygon_disc(1.0, 12).unwrap();
        let cubes = cube_cover(&disc, 0.25, CoverMode::Interior).unwrap();
        assert!(!cubes.is_empty());
        for (i, a) in cubes.iter().enumerate() {
            assert!(a.vertices().iter().all(|v| disc.contains(v).unwrap()));
            for b in &cubes[i + 1..] {
                let overlap = (0..2).all(|k| {
                    let lo = a.corner[k].max(b.corner[k]);
                    let hi = (a.corner[k] + a.side).min(b.corner[k] + b.side);
                    hi - lo > 1e-12
                });
                assert!(!overlap);
            }
        }
    }

    #[test]
    fn intersecting_cover_uses_exact_test_for_corner_cases() {
        // thin diagonal strip: the cube [1,2]x[0,1] is touched only through
        // its interior by the strip, with no cube vertex inside
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let strip = SlabPolytope::new(
            2,
            vec![
                Slab::new(vec![s, -s], 0.5, 0.6),
                Slab::new(vec![1.0, 0.0], 0.0, 2.0),
            ],
            3.0,
        )
        .unwrap();
        let cover = cube_cover(&strip, 1.0, CoverMode::Intersecting).unwrap();
        let pts = sample_uniform(&strip, 400, 5).unwrap();
        assert!(pts
            .points
            .iter()
            .all(|p| cover.iter().any(|c| c.contains(p))));
    }

    #[test]
    fn polytope_json_round_trip() {
        let poly = SlabPolytope::unit_cube(2);
        let text = serde_json::to_string(&poly).unwrap();
        assert!(
            text.contains("\"slabs\"") && text.contains("\"v\"") && text.contains("\"radius\"")
        );
        let back: SlabPolytope = serde_json::from_str(&text).unwrap();
        assert_eq!(back, poly);
        assert_eq!(back.bounding_box(), poly.bounding_box());
        let bad = r#"{"dim":1,"slabs":[{"v":[1.0],"a":1.0,"b":0.0}],"radius":2.0}"#;
        assert!(serde_json::from_str::<SlabPolytope>(bad).is_err());
    }
}
