//! Maximum-likelihood fitting by Nelder-Mead.
//!
//! The joint log-likelihood splits into one term per target row
//! `(mu_m, delta_m^.)` plus one Gamma mark term per pair `(m, i)`, with no
//! parameter shared between terms. Each block is optimised on its own in
//! log-coordinates, which keeps every parameter positive.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::likelihood::{LikelihoodError, TargetView};
use crate::model::{HawkesSpec, MarkModel};
use crate::optim::{minimize, NelderMeadOptions};
use crate::stream::EventStream;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MleError {
    #[error("process {0} has no events; its parameters are not identifiable")]
    DegenerateData(usize),
    #[error("the stream carries no marks")]
    MissingMarks,
    #[error("stream dimension {stream} does not match model dimension {model}")]
    DimensionMismatch { stream: usize, model: usize },
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarkFamily {
    Gamma,
    /// Marks are fixed numbers; only the timing parameters are fitted.
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelShape {
    pub dim: usize,
    pub marks: MarkFamily,
    /// With excitation off the model is a homogeneous Poisson process per
    /// dimension and only `mu` is fitted.
    pub excitation: bool,
    /// Edge-effect jumps held fixed during the fit; zero when absent.
    #[serde(default)]
    pub y0: Option<Vec<Vec<f64>>>,
}

impl ModelShape {
    pub fn hawkes(dim: usize) -> Self {
        Self { dim, marks: MarkFamily::Gamma, excitation: true, y0: None }
    }

    pub fn poisson(dim: usize) -> Self {
        Self { dim, marks: MarkFamily::Constant, excitation: false, y0: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MleOptions {
    pub nelder_mead: NelderMeadOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResultMLE {
    pub mu: Vec<f64>,
    pub delta: Option<Vec<Vec<f64>>>,
    pub alpha: Option<Vec<Vec<f64>>>,
    pub beta: Option<Vec<Vec<f64>>>,
    pub log_likelihood: f64,
    pub initial_log_likelihood: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl FitResultMLE {
    /// The fitted model as a spec; pairs without a Gamma fit keep zero marks.
    pub fn to_spec(&self, horizon: f64, y0: Option<Vec<Vec<f64>>>) -> HawkesSpec {
        let dim = self.mu.len();
        let delta = self.delta.clone().unwrap_or_else(|| vec![vec![1.0; dim]; dim]);
        let marks = (0..dim)
            .map(|m| {
                (0..dim)
                    .map(|i| match (&self.alpha, &self.beta) {
                        (Some(a), Some(b)) => MarkModel::Gamma { shape: a[m][i], rate: b[m][i] },
                        _ => MarkModel::Constant(0.0),
                    })
                    .collect()
            })
            .collect();
        HawkesSpec {
            dim,
            mu: self.mu.clone(),
            delta,
            marks,
            y0: y0.unwrap_or_else(|| vec![vec![0.0; dim]; dim]),
            horizon,
        }
    }
}

fn gamma_sample_ll(ys: &[f64], sum: f64, sum_log: f64, shape: f64, rate: f64) -> f64 {
    let n = ys.len() as f64;
    n * (shape * rate.ln() - ln_gamma(shape)) + (shape - 1.0) * sum_log - rate * sum
}

/// Method-of-moments start for a Gamma sample.
fn gamma_moments(ys: &[f64]) -> (f64, f64) {
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
    if mean > 0.0 && var > 0.0 {
        (mean * mean / var, mean / var)
    } else {
        (1.0, 1.0)
    }
}

/// Fits `shape` to `stream`. Starting point: `mu = N_m / (2T)`, all decays 1,
/// Gamma marks by moments.
pub fn fit_mle(
    stream: &EventStream,
    shape: &ModelShape,
    opts: &MleOptions,
) -> Result<FitResultMLE, MleError> {
    let dim = shape.dim;
    if stream.dim != dim {
        return Err(MleError::DimensionMismatch { stream: stream.dim, model: dim });
    }
    let counts = stream.counts();
    if let Some(m) = counts.iter().position(|&c| c == 0) {
        return Err(MleError::DegenerateData(m));
    }
    let horizon = stream.horizon;
    let nm = &opts.nelder_mead;

    if !shape.excitation {
        let mut mu = Vec::with_capacity(dim);
        let (mut ll, mut ll0, mut evals, mut converged) = (0.0, 0.0, 0, true);
        for &c in &counts {
            let n = c as f64;
            let nll = |x: &[f64]| -(n * x[0] - x[0].exp() * horizon);
            let r = minimize(nll, &[(n / (2.0 * horizon)).ln()], nm);
            mu.push(r.x[0].exp());
            ll -= r.f;
            ll0 -= r.f_initial;
            evals += r.evals;
            converged &= r.converged;
        }
        return Ok(FitResultMLE {
            mu,
            delta: None,
            alpha: None,
            beta: None,
            log_likelihood: ll,
            initial_log_likelihood: ll0,
            evaluations: evals,
            converged,
        });
    }

    if stream.marks.is_none() {
        return Err(MleError::MissingMarks);
    }
    let y0 = shape.y0.clone().unwrap_or_else(|| vec![vec![0.0; dim]; dim]);

    let mut mu = vec![0.0; dim];
    let mut delta = vec![vec![0.0; dim]; dim];
    let (mut ll, mut ll0, mut evals, mut converged) = (0.0, 0.0, 0, true);

    for m in 0..dim {
        let view = TargetView::new(stream, m)?;
        let y0m = &y0[m];
        let mut x0 = vec![(counts[m] as f64 / (2.0 * horizon)).ln()];
        x0.extend(std::iter::repeat(0.0).take(dim));
        let mut dbuf = vec![0.0; dim];
        let nll = |x: &[f64]| {
            for (d, lx) in dbuf.iter_mut().zip(&x[1..]) {
                *d = lx.exp();
            }
            match view.log_likelihood(x[0].exp(), &dbuf, y0m) {
                Ok(v) if v.is_finite() => -v,
                _ => f64::INFINITY,
            }
        };
        let r = minimize(nll, &x0, nm);
        mu[m] = r.x[0].exp();
        for i in 0..dim {
            delta[m][i] = r.x[1 + i].exp();
        }
        ll -= r.f;
        ll0 -= r.f_initial;
        evals += r.evals;
        converged &= r.converged;
    }

    let (alpha, beta) = if shape.marks == MarkFamily::Gamma {
        let mut alpha = vec![vec![0.0; dim]; dim];
        let mut beta = vec![vec![0.0; dim]; dim];
        let by_process = stream.indices_by_process();
        for m in 0..dim {
            for i in 0..dim {
                let ys: Vec<f64> = by_process[i]
                    .iter()
                    .map(|&j| stream.mark(j, m).unwrap_or(0.0).max(f64::MIN_POSITIVE))
                    .collect();
                let sum: f64 = ys.iter().sum();
                let sum_log: f64 = ys.iter().map(|y| y.ln()).sum();
                let (a0, b0) = gamma_moments(&ys);
                let nll = |x: &[f64]| -gamma_sample_ll(&ys, sum, sum_log, x[0].exp(), x[1].exp());
                let r = minimize(nll, &[a0.ln(), b0.ln()], nm);
                alpha[m][i] = r.x[0].exp();
                beta[m][i] = r.x[1].exp();
                ll -= r.f;
                ll0 -= r.f_initial;
                evals += r.evals;
                converged &= r.converged;
            }
        }
        (Some(alpha), Some(beta))
    } else {
        (None, None)
    };

    Ok(FitResultMLE {
        mu,
        delta: Some(delta),
        alpha,
        beta,
        log_likelihood: ll,
        initial_log_likelihood: ll0,
        evaluations: evals,
        converged,
    })
}
