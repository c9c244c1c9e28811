//! Excitation matrix, spectral radius and stationary average intensities.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::HawkesSpec;

const POWER_SHIFT: f64 = 1e-12;
const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StationarityError {
    #[error("power iteration did not converge after {0} iterations")]
    ConvergenceFailure(usize),
    #[error("singular system in linear solve")]
    Singular,
    #[error("closed form only exists for M = 1 or M = 2, got M = {0}")]
    UnsupportedDimension(usize),
    #[error("spectral radius {0} >= 1: stationarity not guaranteed")]
    Unstable(f64),
}

/// `omega[m][i] = E[Y_m^i] / delta_m^i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationMatrix {
    pub omega: Vec<Vec<f64>>,
}

impl ExcitationMatrix {
    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { omega: self.omega.iter().map(|r| r.iter().map(|w| w * c).collect()).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub rho: f64,
    pub stable: bool,
    #[serde(rename = "B", skip_serializing_if = "Option::is_none", default)]
    pub b: Option<Vec<f64>>,
}

pub fn excitation_matrix(spec: &HawkesSpec) -> ExcitationMatrix {
    let omega = spec
        .marks
        .iter()
        .zip(&spec.delta)
        .map(|(marks, deltas)| marks.iter().zip(deltas).map(|(y, d)| y.mean() / d).collect())
        .collect();
    ExcitationMatrix { omega }
}

fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

/// Spectral radius of a nonnegative matrix by power iteration on `Omega + eps I`.
pub fn spectral_radius_power(omega: &ExcitationMatrix) -> Result<f64, StationarityError> {
    let n = omega.dim();
    if n == 0 {
        return Ok(0.0);
    }
    let mut x = vec![1.0 / n as f64; n];
    let mut prev = f64::NAN;
    for _ in 0..POWER_MAX_ITER {
        let mut y = mat_vec(&omega.omega, &x);
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi += POWER_SHIFT * xi;
        }
        // x has unit l1 norm and everything is nonnegative.
        let est: f64 = y.iter().sum();
        if !est.is_finite() {
            return Err(StationarityError::ConvergenceFailure(POWER_MAX_ITER));
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / est;
        }
        if (est - prev).abs() <= POWER_TOL * est.max(1.0) {
            return Ok((est - POWER_SHIFT).max(0.0));
        }
        prev = est;
    }
    Err(StationarityError::ConvergenceFailure(POWER_MAX_ITER))
}

/// Spectral radius from the characteristic polynomial, for `M <= 3`.
pub fn spectral_radius_charpoly(omega: &ExcitationMatrix) -> Option<f64> {
    let a = &omega.omega;
    match a.len() {
        0 => Some(0.0),
        1 => Some(a[0][0].abs()),
        2 => {
            let tr = a[0][0] + a[1][1];
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            let disc = tr * tr - 4.0 * det;
            if disc >= 0.0 {
                let s = disc.sqrt();
                Some(((tr + s) / 2.0).abs().max(((tr - s) / 2.0).abs()))
            } else {
                Some(det.sqrt())
            }
        }
        3 => {
            // x^3 + b x^2 + c x + d
            let tr = a[0][0] + a[1][1] + a[2][2];
            let minors = a[0][0] * a[1][1] - a[0][1] * a[1][0] + a[0][0] * a[2][2]
                - a[0][2] * a[2][0]
                + a[1][1] * a[2][2]
                - a[1][2] * a[2][1];
            let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
            Some(cubic_max_modulus(-tr, minors, -det))
        }
        _ => None,
    }
}

/// Largest root modulus of `x^3 + b x^2 + c x + d`.
fn cubic_max_modulus(b: f64, c: f64, d: f64) -> f64 {
    // Depressed cubic t^3 + p t + q with x = t - b/3.
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let shift = -b / 3.0;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    if disc <= 0.0 {
        // Three real roots.
        let r = (-p / 3.0).max(0.0).sqrt();
        if r == 0.0 {
            return shift.abs();
        }
        let cos_arg = (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0);
        let phi = cos_arg.acos();
        (0..3)
            .map(|k| {
                let t = 2.0 * r * ((phi + 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos();
                (t + shift).abs()
            })
            .fold(0.0, f64::max)
    } else {
        // One real root and a conjugate pair.
        let s = disc.sqrt();
        let u = (-q / 2.0 + s).cbrt();
        let v = (-q / 2.0 - s).cbrt();
        let real = u + v + shift;
        let re = -(u + v) / 2.0 + shift;
        let im = (u - v) * 3f64.sqrt() / 2.0;
        real.abs().max((re * re + im * im).sqrt())
    }
}

/// Spectral radius of a nonnegative excitation matrix.
///
/// Uses the characteristic polynomial for `M <= 3` (checked against power
/// iteration when that converges) and power iteration otherwise.
pub fn spectral_radius(omega: &ExcitationMatrix) -> Result<f64, StationarityError> {
    let power = spectral_radius_power(omega);
    match spectral_radius_charpoly(omega) {
        Some(exact) => {
            if let Ok(p) = power {
                if (p - exact).abs() > 1e-9 * exact.max(1.0) {
                    log::warn!("power iteration {p} disagrees with characteristic roots {exact}");
                }
            }
            Ok(exact)
        }
        None => power,
    }
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve_linear(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>, StationarityError> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| m[r][col].abs().total_cmp(&m[s][col].abs()))
            .expect("non-empty range");
        if m[pivot][col].abs() < 1e-300 {
            return Err(StationarityError::Singular);
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            if f != 0.0 {
                for k in col..n {
                    m[row][k] -= f * m[col][k];
                }
                rhs[row] -= f * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (rhs[row] - s) / m[row][row];
    }
    Ok(x)
}

/// `B = (I - Omega)^{-1} mu` for an arbitrary excitation matrix.
pub fn solve_stationary(omega: &ExcitationMatrix, mu: &[f64]) -> Result<Vec<f64>, StationarityError> {
    let n = mu.len();
    let a: Vec<Vec<f64>> = (0..n)
        .map(|r| (0..n).map(|c| f64::from(u8::from(r == c)) - omega.omega[r][c]).collect())
        .collect();
    solve_linear(&a, mu)
}

/// Spectral radius, stability verdict and (when stable) stationary rates.
///
/// `rho >= 1` is reported as not stable rather than as an error.
pub fn stationary_intensities(spec: &HawkesSpec) -> Result<StationarityReport, StationarityError> {
    let omega = excitation_matrix(spec);
    let rho = spectral_radius(&omega)?;
    if rho < 1.0 {
        let b = solve_stationary(&omega, &spec.mu)?;
        Ok(StationarityReport { rho, stable: true, b: Some(b) })
    } else {
        Ok(StationarityReport { rho, stable: false, b: None })
    }
}

/// Explicit stationary rates for one and two dimensions.
pub fn closed_form_b(spec: &HawkesSpec) -> Result<Vec<f64>, StationarityError> {
    let w = excitation_matrix(spec).omega;
    let mu = &spec.mu;
    match spec.dim {
        1 => Ok(vec![mu[0] / (1.0 - w[0][0])]),
        2 => {
            let den = (1.0 - w[0][0]) * (1.0 - w[1][1]) - w[0][1] * w[1][0];
            Ok(vec![
                (mu[0] * (1.0 - w[1][1]) + mu[1] * w[0][1]) / den,
                (mu[1] * (1.0 - w[0][0]) + mu[0] * w[1][0]) / den,
            ])
        }
        d => Err(StationarityError::UnsupportedDimension(d)),
    }
}
