use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which convex least-squares estimator to compute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Variant {
    /// All convex functions.
    #[default]
    Full,
    /// Convex functions with `|f| ≤ B`.
    Bounded {
        #[serde(rename = "B")]
        bound: f64,
    },
    /// Convex functions that are `L`-Lipschitz.
    Lipschitz {
        #[serde(rename = "L")]
        lipschitz: f64,
    },
    BoundedLipschitz {
        #[serde(rename = "B")]
        bound: f64,
        #[serde(rename = "L")]
        lipschitz: f64,
    },
}

impl Variant {
    pub fn bound(&self) -> Option<f64> {
        match *self {
            Variant::Bounded { bound } | Variant::BoundedLipschitz { bound, .. } => Some(bound),
            _ => None,
        }
    }

    pub fn lipschitz(&self) -> Option<f64> {
        match *self {
            Variant::Lipschitz { lipschitz } | Variant::BoundedLipschitz { lipschitz, .. } => {
                Some(lipschitz)
            }
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(b) = self.bound() {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "bound B must be positive and finite, got {b}"
                )));
            }
        }
        if let Some(l) = self.lipschitz() {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "Lipschitz constant L must be nonnegative and finite, got {l}"
                )));
            }
        }
        Ok(())
    }
}

/// Points closer than this in every coordinate are merged.
pub const DUPLICATE_TOL: f64 = 1e-10;

/// Regression data with duplicate design points merged.
///
/// Responses at duplicated points are averaged and the point carries its
/// multiplicity as a weight, which leaves the least-squares problem
/// unchanged up to a constant.
#[derive(Debug, Clone)]
pub struct RegressionProblem {
    dim: usize,
    points: Vec<Vec<f64>>,
    responses: Vec<f64>,
    weights: Vec<f64>,
    variant: Variant,
    original_index: Vec<usize>,
    original_responses: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProblemFile {
    #[serde(rename = "X")]
    pub design: Vec<Vec<f64>>,
    #[serde(rename = "Y")]
    pub responses: Vec<f64>,
    #[serde(default)]
    pub variant: Variant,
}

impl TryFrom<ProblemFile> for RegressionProblem {
    type Error = Error;

    fn try_from(f: ProblemFile) -> Result<Self> {
        RegressionProblem::new(f.design, f.responses, f.variant)
    }
}

impl RegressionProblem {
    pub fn new(design: Vec<Vec<f64>>, responses: Vec<f64>, variant: Variant) -> Result<Self> {
        variant.validate()?;
        if design.is_empty() {
            return Err(Error::InvalidArgument(
                "need at least one observation".into(),
            ));
        }
        if design.len() != responses.len() {
            return Err(Error::DimensionMismatch {
                expected: design.len(),
                found: responses.len(),
            });
        }
        let dim = design[0].len();
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "design points must have dimension ≥ 1".into(),
            ));
        }
        for p in &design {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(
                    "non-finite design coordinate".into(),
                ));
            }
        }
        if responses.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite response".into()));
        }

        // Group near-identical points: sort by first coordinate, then only
        // compare against representatives within tolerance on it.
        let mut order: Vec<usize> = (0..design.len()).collect();
        order.sort_by(|&a, &b| design[a][0].total_cmp(&design[b][0]));
        let mut reps: Vec<usize> = Vec::new();
        let mut group_of = vec![0usize; design.len()];
        for &i in &order {
            let mut found = None;
            for (g, &r) in reps.iter().enumerate().rev() {
                if design[i][0] - design[r][0] > DUPLICATE_TOL {
                    break;
                }
                if design[i]
                    .iter()
                    .zip(&design[r])
                    .all(|(a, b)| (a - b).abs() <= DUPLICATE_TOL)
                {
                    found = Some(g);
                    break;
                }
            }
            group_of[i] = match found {
                Some(g) => g,
                None => {
                    reps.push(i);
                    reps.len() - 1
                }
            };
        }
        // Renumber groups in order of first appearance in the input.
        let mut renumber = vec![usize::MAX; reps.len()];
        let mut next = 0;
        for i in 0..design.len() {
            let g = group_of[i];
            if renumber[g] == usize::MAX {
                renumber[g] = next;
                next += 1;
            }
        }
        let m = reps.len();
        let mut points = vec![Vec::new(); m];
        let mut sums = vec![0.0; m];
        let mut weights = vec![0.0; m];
        let mut original_index = vec![0; design.len()];
        for i in 0..design.len() {
            let g = renumber[group_of[i]];
            if points[g].is_empty() {
                points[g] = design[i].clone();
            }
            sums[g] += responses[i];
            weights[g] += 1.0;
            original_index[i] = g;
        }
        let responses_avg = sums.iter().zip(&weights).map(|(s, w)| s / w).collect();
        Ok(RegressionProblem {
            dim,
            points,
            responses: responses_avg,
            weights,
            variant,
            original_index,
            original_responses: responses,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ProblemFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of distinct design points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// For each input observation, the index of its merged design point.
    pub fn original_index(&self) -> &[usize] {
        &self.original_index
    }

    pub fn original_responses(&self) -> &[f64] {
        &self.original_responses
    }

    /// Same design and variant, new responses (one per input observation).
    pub fn with_responses(&self, responses: Vec<f64>) -> Result<Self> {
        if responses.len() != self.original_index.len() {
            return Err(Error::DimensionMismatch {
                expected: self.original_index.len(),
                found: responses.len(),
            });
        }
        let m = self.points.len();
        let mut sums = vec![0.0; m];
        for (i, &g) in self.original_index.iter().enumerate() {
            sums[g] += responses[i];
        }
        Ok(RegressionProblem {
            responses: sums.iter().zip(&self.weights).map(|(s, w)| s / w).collect(),
            original_responses: responses,
            ..self.clone()
        })
    }

    pub fn with_variant(&self, variant: Variant) -> Result<Self> {
        variant.validate()?;
        Ok(RegressionProblem {
            variant,
            ..self.clone()
        })
    }

    /// Residual sum of squares of fitted values at the merged points,
    /// measured against the original observations.
    pub fn objective(&self, theta: &[f64]) -> f64 {
        self.original_responses
            .iter()
            .zip(&self.original_index)
            .map(|(y, &g)| (y - theta[g]).powi(2))
            .sum()
    }
}
