//! Intensities, compensators and the joint log-likelihood.
//!
//! Intensities at event times are left limits: an event's own jump is not
//! part of the intensity that generated it. Events sharing a timestamp all
//! see the intensity from before any of their jumps.

use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::model::{HawkesSpec, MarkModel};
use crate::stream::EventStream;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LikelihoodError {
    #[error("the stream carries no marks; the likelihood needs observed jumps")]
    MissingMarks,
    #[error("non-finite or non-positive intensity {value} at event {index} of process {process}")]
    NonFiniteLikelihood { process: usize, index: usize, value: f64 },
    #[error("stream dimension {stream} does not match spec dimension {spec}")]
    DimensionMismatch { stream: usize, spec: usize },
}

/// Everything about a stream that matters to the intensity of one target
/// process, laid out for repeated likelihood evaluation.
#[derive(Debug, Clone)]
pub struct TargetView {
    pub target: usize,
    pub horizon: f64,
    pub times: Vec<f64>,
    pub sources: Vec<usize>,
    /// Jump each event adds to the target's intensity.
    pub jumps: Vec<f64>,
    /// Event belongs to the target process.
    pub hits: Vec<bool>,
}

impl TargetView {
    pub fn new(stream: &EventStream, target: usize) -> Result<Self, LikelihoodError> {
        if stream.marks.is_none() {
            return Err(LikelihoodError::MissingMarks);
        }
        let n = stream.len();
        let mut view = TargetView {
            target,
            horizon: stream.horizon,
            times: Vec::with_capacity(n),
            sources: Vec::with_capacity(n),
            jumps: Vec::with_capacity(n),
            hits: Vec::with_capacity(n),
        };
        for (j, e) in stream.events.iter().enumerate() {
            view.times.push(e.time);
            view.sources.push(e.process);
            view.jumps.push(stream.mark(j, target).unwrap_or(0.0));
            view.hits.push(e.process == target);
        }
        Ok(view)
    }

    /// Walks the stream, handing `f(index, excitation)` the left-limit excitation
    /// `sum_i lambda_target^i(t_j-)` at every event.
    fn walk<F: FnMut(usize, f64)>(&self, delta: &[f64], y0: &[f64], mut f: F) {
        let mut comp = y0.to_vec();
        let mut t_prev = 0.0;
        let n = self.times.len();
        let mut j = 0;
        while j < n {
            let t = self.times[j];
            let dt = t - t_prev;
            for (c, d) in comp.iter_mut().zip(delta) {
                if *c != 0.0 {
                    *c *= (-d * dt).exp();
                }
            }
            let excitation: f64 = comp.iter().sum();
            let mut end = j;
            while end < n && self.times[end] == t {
                f(end, excitation);
                end += 1;
            }
            for k in j..end {
                comp[self.sources[k]] += self.jumps[k];
            }
            t_prev = t;
            j = end;
        }
    }

    /// `Lambda_target(t)` in closed form.
    pub fn compensator(&self, mu: f64, delta: &[f64], y0: &[f64], t: f64) -> f64 {
        let mut total = mu * t;
        for (&y, &d) in y0.iter().zip(delta) {
            total += y / d * -(-d * t).exp_m1();
        }
        for k in 0..self.times.len() {
            let tk = self.times[k];
            if tk > t {
                break;
            }
            let d = delta[self.sources[k]];
            total += self.jumps[k] / d * -(-d * (t - tk)).exp_m1();
        }
        total
    }

    /// Left-limit intensity at each event of the target.
    pub fn intensities(&self, mu: f64, delta: &[f64], y0: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        self.walk(delta, y0, |k, exc| {
            if self.hits[k] {
                out.push(mu + exc);
            }
        });
        out
    }

    /// `sum_j log lambda_target(t_j) - Lambda_target(T)`.
    pub fn log_likelihood(&self, mu: f64, delta: &[f64], y0: &[f64]) -> Result<f64, LikelihoodError> {
        let mut ll = 0.0;
        let mut bad = None;
        let mut idx = 0;
        self.walk(delta, y0, |k, exc| {
            if self.hits[k] {
                let lambda = mu + exc;
                if !(lambda > 0.0 && lambda.is_finite()) && bad.is_none() {
                    bad = Some((idx, lambda));
                }
                ll += lambda.ln();
                idx += 1;
            }
        });
        if let Some((index, value)) = bad {
            return Err(LikelihoodError::NonFiniteLikelihood { process: self.target, index, value });
        }
        Ok(ll - self.compensator(mu, delta, y0, self.horizon))
    }

    /// Compensator increments between consecutive target events, starting at 0.
    pub fn rescaled_increments(&self, mu: f64, delta: &[f64], y0: &[f64]) -> Vec<f64> {
        let mut comp = y0.to_vec();
        let mut acc = 0.0;
        let mut t_prev = 0.0;
        let mut out = Vec::new();
        let n = self.times.len();
        let mut j = 0;
        while j < n {
            let t = self.times[j];
            let dt = t - t_prev;
            acc += mu * dt;
            for (c, d) in comp.iter_mut().zip(delta) {
                if *c != 0.0 {
                    acc += *c / d * -(-d * dt).exp_m1();
                    *c *= (-d * dt).exp();
                }
            }
            let mut end = j;
            while end < n && self.times[end] == t {
                if self.hits[end] {
                    out.push(acc);
                    acc = 0.0;
                }
                end += 1;
            }
            for k in j..end {
                comp[self.sources[k]] += self.jumps[k];
            }
            t_prev = t;
            j = end;
        }
        out
    }
}

fn check_dims(spec: &HawkesSpec, stream: &EventStream) -> Result<(), LikelihoodError> {
    if spec.dim != stream.dim {
        return Err(LikelihoodError::DimensionMismatch { stream: stream.dim, spec: spec.dim });
    }
    Ok(())
}

/// `Lambda_m(t)`, the integrated intensity of process `m` over `[0, t]`.
pub fn compensator(
    spec: &HawkesSpec,
    stream: &EventStream,
    m: usize,
    t: f64,
) -> Result<f64, LikelihoodError> {
    check_dims(spec, stream)?;
    let view = TargetView::new(stream, m)?;
    Ok(view.compensator(spec.mu[m], &spec.delta[m], &spec.y0[m], t))
}

/// `lambda_m(t_j^m-)` at every event of process `m`, by the decay recursion.
pub fn intensity_at_events(
    spec: &HawkesSpec,
    stream: &EventStream,
    m: usize,
) -> Result<Vec<f64>, LikelihoodError> {
    check_dims(spec, stream)?;
    let view = TargetView::new(stream, m)?;
    Ok(view.intensities(spec.mu[m], &spec.delta[m], &spec.y0[m]))
}

/// `Lambda_m(t_j^m) - Lambda_m(t_{j-1}^m)`; unit exponential under the true model.
pub fn rescaled_increments(
    spec: &HawkesSpec,
    stream: &EventStream,
    m: usize,
) -> Result<Vec<f64>, LikelihoodError> {
    check_dims(spec, stream)?;
    let view = TargetView::new(stream, m)?;
    Ok(view.rescaled_increments(spec.mu[m], &spec.delta[m], &spec.y0[m]))
}

/// `log P(Y | alpha, beta)` for all observed marks. Constant laws contribute 0.
pub fn mark_log_likelihood(spec: &HawkesSpec, stream: &EventStream) -> Result<f64, LikelihoodError> {
    check_dims(spec, stream)?;
    if stream.marks.is_none() {
        return Err(LikelihoodError::MissingMarks);
    }
    let mut total = 0.0;
    for (j, e) in stream.events.iter().enumerate() {
        let i = e.process;
        for m in 0..spec.dim {
            if let MarkModel::Gamma { shape, rate } = spec.marks[m][i] {
                let y = stream.mark(j, m).unwrap_or(0.0);
                total += gamma_log_density(y, shape, rate);
            }
        }
    }
    Ok(total)
}

pub fn gamma_log_density(y: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * y.ln() - rate * y
}

/// Joint log-likelihood of event times and, optionally, observed marks.
pub fn log_likelihood(
    spec: &HawkesSpec,
    stream: &EventStream,
    include_mark_term: bool,
) -> Result<f64, LikelihoodError> {
    check_dims(spec, stream)?;
    let mut total = 0.0;
    for m in 0..spec.dim {
        let view = TargetView::new(stream, m)?;
        total += view.log_likelihood(spec.mu[m], &spec.delta[m], &spec.y0[m])?;
    }
    if include_mark_term {
        total += mark_log_likelihood(spec, stream)?;
    }
    Ok(total)
}

/// `d ell / d mu_m = sum_j 1 / lambda_m(t_j^m) - T`.
pub fn grad_mu(spec: &HawkesSpec, stream: &EventStream, m: usize) -> Result<f64, LikelihoodError> {
    let lambdas = intensity_at_events(spec, stream, m)?;
    Ok(lambdas.iter().map(|l| 1.0 / l).sum::<f64>() - stream.horizon)
}
