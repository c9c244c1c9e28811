//! Model parameterization: background rates, per-pair decays, mark laws and
//! initial edge-effect jumps.
//!
//! Matrices are stored row-major as `Vec<Vec<_>>` with row `m` describing the
//! target process and column `i` the source process, so `delta[m][i]` is the
//! rate at which an event of process `i` stops exciting process `m`.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Law of the jump `Y` an event adds to a target intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarkModel {
    /// Gamma with shape `alpha` and rate `beta`.
    Gamma { shape: f64, rate: f64 },
    /// Degenerate at a fixed value. `Constant(0.0)` switches the channel off.
    Constant(f64),
}

impl MarkModel {
    pub fn mean(&self) -> f64 {
        match *self {
            MarkModel::Gamma { shape, rate } => shape / rate,
            MarkModel::Constant(c) => c,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            MarkModel::Gamma { shape, rate } => shape / (rate * rate),
            MarkModel::Constant(_) => 0.0,
        }
    }

    /// Draws one mark. Constant marks consume no randomness.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            MarkModel::Gamma { shape, rate } => Gamma::new(shape, 1.0 / rate)
                .expect("validated gamma parameters")
                .sample(rng),
            MarkModel::Constant(c) => c,
        }
    }

    pub fn is_valid(&self) -> bool {
        match *self {
            MarkModel::Gamma { shape, rate } => {
                shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()
            }
            MarkModel::Constant(c) => c >= 0.0 && c.is_finite(),
        }
    }
}

/// Full parameterization of an `M`-dimensional marked Hawkes process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HawkesSpec {
    #[serde(rename = "M")]
    pub dim: usize,
    pub mu: Vec<f64>,
    pub delta: Vec<Vec<f64>>,
    pub marks: Vec<Vec<MarkModel>>,
    pub y0: Vec<Vec<f64>>,
    #[serde(rename = "T")]
    pub horizon: f64,
}

/// Position of an offending value inside a spec field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamIndex {
    Scalar,
    Vector(usize),
    Matrix(usize, usize),
}

impl fmt::Display for ParamIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamIndex::Scalar => Ok(()),
            ParamIndex::Vector(k) => write!(f, "[{k}]"),
            ParamIndex::Matrix(m, i) => write!(f, "[{m}][{i}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("{field}{index} must be positive and finite")]
    NonPositiveParameter { field: &'static str, index: ParamIndex },
    #[error("{field}{index} must be nonnegative and finite")]
    NegativeParameter { field: &'static str, index: ParamIndex },
    #[error("{field}{index} has invalid distribution parameters")]
    InvalidMark { field: &'static str, index: ParamIndex },
    #[error("{field} does not match dimension M")]
    DimensionMismatch { field: &'static str },
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid spec: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct SpecError(pub Vec<Violation>);

fn is_square<T>(rows: &[Vec<T>], dim: usize) -> bool {
    rows.len() == dim && rows.iter().all(|r| r.len() == dim)
}

impl HawkesSpec {
    /// Spec with identical entries everywhere; handy for symmetric test configs.
    pub fn uniform(dim: usize, mu: f64, delta: f64, mark: MarkModel, y0: f64, horizon: f64) -> Self {
        Self {
            dim,
            mu: vec![mu; dim],
            delta: vec![vec![delta; dim]; dim],
            marks: vec![vec![mark; dim]; dim],
            y0: vec![vec![y0; dim]; dim],
            horizon,
        }
    }

    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<(), SpecError> {
        let mut out = Vec::new();
        let pos = |x: f64| x > 0.0 && x.is_finite();

        if self.dim == 0 {
            out.push(Violation::NonPositiveParameter { field: "M", index: ParamIndex::Scalar });
        }
        if !pos(self.horizon) {
            out.push(Violation::NonPositiveParameter { field: "T", index: ParamIndex::Scalar });
        }
        if self.mu.len() != self.dim {
            out.push(Violation::DimensionMismatch { field: "mu" });
        } else {
            for (k, &v) in self.mu.iter().enumerate() {
                if !pos(v) {
                    out.push(Violation::NonPositiveParameter {
                        field: "mu",
                        index: ParamIndex::Vector(k),
                    });
                }
            }
        }
        if !is_square(&self.delta, self.dim) {
            out.push(Violation::DimensionMismatch { field: "delta" });
        } else {
            for (m, row) in self.delta.iter().enumerate() {
                for (i, &v) in row.iter().enumerate() {
                    if !pos(v) {
                        out.push(Violation::NonPositiveParameter {
                            field: "delta",
                            index: ParamIndex::Matrix(m, i),
                        });
                    }
                }
            }
        }
        if !is_square(&self.marks, self.dim) {
            out.push(Violation::DimensionMismatch { field: "marks" });
        } else {
            for (m, row) in self.marks.iter().enumerate() {
                for (i, mark) in row.iter().enumerate() {
                    if !mark.is_valid() {
                        out.push(Violation::InvalidMark {
                            field: "marks",
                            index: ParamIndex::Matrix(m, i),
                        });
                    }
                }
            }
        }
        if !is_square(&self.y0, self.dim) {
            out.push(Violation::DimensionMismatch { field: "y0" });
        } else {
            for (m, row) in self.y0.iter().enumerate() {
                for (i, &v) in row.iter().enumerate() {
                    if !(v >= 0.0 && v.is_finite()) {
                        out.push(Violation::NegativeParameter {
                            field: "y0",
                            index: ParamIndex::Matrix(m, i),
                        });
                    }
                }
            }
        }

        if out.is_empty() {
            Ok(())
        } else {
            Err(SpecError(out))
        }
    }

    /// Expected jump sizes, `gamma[m][i] = E[Y_m^i]`.
    pub fn mark_means(&self) -> Vec<Vec<f64>> {
        self.marks
            .iter()
            .map(|row| row.iter().map(MarkModel::mean).collect())
            .collect()
    }
}

/// Ground truth used for the bivariate recalibration experiments.
pub fn bivariate_reference(horizon: f64) -> HawkesSpec {
    let gamma = |shape, rate| MarkModel::Gamma { shape, rate };
    HawkesSpec {
        dim: 2,
        mu: vec![2.0, 1.0],
        delta: vec![vec![6.0, 2.0], vec![3.0, 5.0]],
        marks: vec![
            vec![gamma(4.0, 2.0), gamma(2.0, 5.0)],
            vec![gamma(1.0, 4.0), gamma(6.0, 3.0)],
        ],
        y0: vec![vec![0.0; 2]; 2],
        horizon,
    }
}
