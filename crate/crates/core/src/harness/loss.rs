use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{sample_uniform, SlabPolytope};

/// `(1/n) Σ (f_i − g_i)²`.
pub fn empirical_loss(f: &[f64], g: &[f64]) -> Result<f64> {
    if f.len() != g.len() {
        return Err(Error::DimensionMismatch {
            expected: f.len(),
            found: g.len(),
        });
    }
    if f.is_empty() {
        return Err(Error::InvalidArgument("empty vectors".into()));
    }
    Ok(f.iter().zip(g).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / f.len() as f64)
}

/// Monte Carlo estimate of `∫ (f − g)² dP` under the uniform distribution
/// on `poly`, with its standard error.
pub fn population_loss(
    f: &dyn Fn(&[f64]) -> f64,
    g: &dyn Fn(&[f64]) -> f64,
    poly: &SlabPolytope,
    m: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if m < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 integration points".into(),
        ));
    }
    let pts = sample_uniform(poly, m, seed)?.points;
    let vals: Vec<f64> = pts.iter().map(|x| (f(x) - g(x)).powi(2)).collect();
    let mean = vals.iter().sum::<f64>() / m as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    Ok((mean, (var / m as f64).sqrt()))
}

/// Root-mean-square distance on the design from `values` to their
/// least-squares affine fit (minimum-norm when the design is degenerate).
pub fn affine_distance(design: &[Vec<f64>], values: &[f64]) -> Result<f64> {
    let n = design.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty design".into()));
    }
    if values.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: values.len(),
        });
    }
    let d = design[0].len();
    // centre the design so the intercept column is orthogonal to the rest
    let mean: Vec<f64> = (0..d)
        .map(|k| design.iter().map(|p| p[k]).sum::<f64>() / n as f64)
        .collect();
    let a = DMatrix::from_fn(n, d + 1, |i, k| {
        if k == 0 {
            1.0
        } else {
            design[i][k - 1] - mean[k - 1]
        }
    });
    let b = DVector::from_column_slice(values);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let coef = svd
        .solve(&b, 1e-12 * smax.max(1.0))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let resid = &b - &a * coef;
    Ok((resid.norm_squared() / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empirical_loss_examples() {
        assert_eq!(empirical_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(empirical_loss(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(empirical_loss(&[2.0, 0.0], &[0.0, 0.0]).unwrap(), 2.0);
        assert!(empirical_loss(&[1.0], &[]).is_err());
    }

    #[test]
    fn population_loss_examples() {
        let cube = SlabPolytope::unit_cube(1);
        let id = |x: &[f64]| x[0];
        let zero = |_: &[f64]| 0.0;
        assert_eq!(
            population_loss(&id, &id, &cube, 100, 1).unwrap(),
            (0.0, 0.0)
        );
        let shifted = |x: &[f64]| x[0] + 0.5;
        let (v, se) = population_loss(&shifted, &id, &cube, 100, 1).unwrap();
        assert!((v - 0.25).abs() < 1e-15 && se < 1e-15);
        let (v, se) = population_loss(&id, &zero, &cube, 100_000, 5).unwrap();
        assert!((v - 1.0 / 3.0).abs() <= 3.0 * se, "{v} ± {se}");
        assert!(population_loss(&id, &zero, &cube, 1, 5).is_err());
    }

    #[test]
    fn affine_distance_examples() {
        let x = vec![vec![-1.0], vec![0.0], vec![1.0]];
        let d = affine_distance(&x, &[1.0, 0.0, 1.0]).unwrap();
        assert!((d - 2f64.sqrt() / 3.0).abs() < 1e-14);
        assert!(affine_distance(&x, &[1.0, 3.0, 5.0]).unwrap() < 1e-14);
        let scaled = affine_distance(&x, &[-3.0, 0.0, -3.0]).unwrap();
        assert!((scaled - 3.0 * d).abs() < 1e-13);
        // collinear design in the plane: minimum-norm fit still exact on affine data
        let line: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let vals: Vec<f64> = line.iter().map(|p| p[0] + p[1] + 1.0).collect();
        assert!(affine_distance(&line, &vals).unwrap() < 1e-12);
    }
}
