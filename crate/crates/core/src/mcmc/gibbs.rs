//! Full conditionals and one systematic-scan sweep.
//!
//! Marks are stored flat like in [`EventStream`]: `marks[k * dim + m]` is the
//! jump event `k` adds to process `m`.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use super::ars::ars_sample;
use super::hyper::{GammaPrior, Hyperparams};
use super::McmcError;
use crate::rng::open_unit;
use crate::stream::{EventStream, Parent};

/// Model parameters `mu, delta, alpha, beta` and edge-effect jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub mu: Vec<f64>,
    pub delta: Vec<Vec<f64>>,
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub y0: Vec<Vec<f64>>,
}

impl Theta {
    /// `(name, value)` pairs with 1-based indices, e.g. `delta[1][2]`.
    pub fn named(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> =
            self.mu.iter().enumerate().map(|(m, &v)| (format!("mu[{}]", m + 1), v)).collect();
        for (name, mat) in
            [("delta", &self.delta), ("alpha", &self.alpha), ("beta", &self.beta), ("y0", &self.y0)]
        {
            for (m, row) in mat.iter().enumerate() {
                for (i, &v) in row.iter().enumerate() {
                    out.push((format!("{name}[{}][{}]", m + 1, i + 1), v));
                }
            }
        }
        out
    }
}

/// Stream laid out for the sampler.
#[derive(Debug, Clone)]
pub struct ChainData {
    pub dim: usize,
    pub horizon: f64,
    pub times: Vec<f64>,
    pub process: Vec<usize>,
    pub by_process: Vec<Vec<usize>>,
    /// First index of the run of events sharing each event's timestamp; only
    /// events before it can be parents.
    pub group_start: Vec<usize>,
    pub observed_marks: Option<Vec<f64>>,
}

impl ChainData {
    pub fn new(stream: &EventStream) -> Result<Self, McmcError> {
        stream.validate()?;
        let times: Vec<f64> = stream.times().collect();
        let mut group_start = Vec::with_capacity(times.len());
        for j in 0..times.len() {
            let g = if j > 0 && times[j - 1] == times[j] { group_start[j - 1] } else { j };
            group_start.push(g);
        }
        Ok(Self {
            dim: stream.dim,
            horizon: stream.horizon,
            process: stream.events.iter().map(|e| e.process).collect(),
            by_process: stream.indices_by_process(),
            group_start,
            times,
            observed_marks: stream.marks.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub theta: Theta,
    pub marks: Vec<f64>,
    pub parents: Vec<Parent>,
    pub iteration: usize,
}

impl ChainState {
    /// Starting point: `mu_m = N_m / (2T)`, decays and mark shapes at their
    /// prior means, mark rates chosen so each row has branching ratio 1/2,
    /// no edge effect, all events immigrants. Observed marks are used when
    /// present, otherwise every mark starts at its mean.
    pub fn initial(data: &ChainData, hyper: &Hyperparams) -> Self {
        let dim = data.dim;
        let mu = data
            .by_process
            .iter()
            .map(|ev| (ev.len().max(1) as f64) / (2.0 * data.horizon))
            .collect();
        let delta: Vec<Vec<f64>> =
            hyper.delta.iter().map(|r| r.iter().map(GammaPrior::mean).collect()).collect();
        let alpha: Vec<Vec<f64>> =
            hyper.alpha.iter().map(|r| r.iter().map(GammaPrior::mean).collect()).collect();
        let beta: Vec<Vec<f64>> = (0..dim)
            .map(|m| (0..dim).map(|i| alpha[m][i] * dim as f64 / (0.5 * delta[m][i])).collect())
            .collect();
        let theta = Theta { mu, delta, alpha, beta, y0: vec![vec![0.0; dim]; dim] };
        Self::from_theta(data, theta)
    }

    pub fn from_theta(data: &ChainData, theta: Theta) -> Self {
        let dim = data.dim;
        let marks = match &data.observed_marks {
            Some(y) => y.clone(),
            None => (0..data.len())
                .flat_map(|k| {
                    let i = data.process[k];
                    (0..dim).map(|m| theta.alpha[m][i] / theta.beta[m][i]).collect::<Vec<_>>()
                })
                .collect(),
        };
        Self { theta, marks, parents: vec![Parent::Immigrant; data.len()], iteration: 0 }
    }
}

/// Sufficient statistics of a branching structure.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchStats {
    pub dim: usize,
    pub immigrants: Vec<usize>,
    /// `edge[m * dim + i]`: events of `m` attributed to the edge effect of `i`.
    pub edge: Vec<usize>,
    /// `children[k * dim + m]`: events of `m` whose parent is event `k`.
    pub children: Vec<u32>,
    /// `gap_sum[m * dim + i]`: total parent-to-child delay over children in
    /// `m` of events in `i`, edge-effect children counted from `t = 0`.
    pub gap_sum: Vec<f64>,
}

impl BranchStats {
    pub fn from_parents(data: &ChainData, parents: &[Parent]) -> Self {
        let dim = data.dim;
        let mut s = Self {
            dim,
            immigrants: vec![0; dim],
            edge: vec![0; dim * dim],
            children: vec![0; data.len() * dim],
            gap_sum: vec![0.0; dim * dim],
        };
        for (j, p) in parents.iter().enumerate() {
            let m = data.process[j];
            match *p {
                Parent::Immigrant => s.immigrants[m] += 1,
                Parent::EdgeEffect(i) => {
                    s.edge[m * dim + i] += 1;
                    s.gap_sum[m * dim + i] += data.times[j];
                }
                Parent::Event(k) => {
                    let i = data.process[k];
                    s.children[k * dim + m] += 1;
                    s.gap_sum[m * dim + i] += data.times[j] - data.times[k];
                }
            }
        }
        s
    }
}

/// Posterior parent probabilities of event `j`, by direct summation over all
/// strict predecessors. Zero-weight candidates are omitted.
pub fn parent_probabilities(data: &ChainData, state: &ChainState, j: usize) -> Vec<(Parent, f64)> {
    let dim = data.dim;
    let th = &state.theta;
    let m = data.process[j];
    let t = data.times[j];
    let mut w = vec![(Parent::Immigrant, th.mu[m])];
    for i in 0..dim {
        let v = th.y0[m][i] * (-th.delta[m][i] * t).exp();
        if v > 0.0 {
            w.push((Parent::EdgeEffect(i), v));
        }
    }
    for k in 0..data.group_start[j] {
        let i = data.process[k];
        let v = state.marks[k * dim + m] * (-th.delta[m][i] * (t - data.times[k])).exp();
        if v > 0.0 {
            w.push((Parent::Event(k), v));
        }
    }
    let total: f64 = w.iter().map(|p| p.1).sum();
    for p in &mut w {
        p.1 /= total;
    }
    w
}

/// Redraws every parent label and returns the new sufficient statistics.
///
/// The excitation from each source is tracked by the decay recursion, so the
/// group (immigrant, edge effect, or source process) is chosen in `O(M)`;
/// the parent event within a source is then found by walking back from the
/// most recent strict predecessor until the sampled mass is reached.
pub fn gibbs_branching<R: Rng + ?Sized>(
    data: &ChainData,
    state: &mut ChainState,
    rng: &mut R,
) -> BranchStats {
    let dim = data.dim;
    let n = data.len();
    let th = &state.theta;
    let marks = &state.marks;
    let mut comp = vec![0.0; dim];
    let mut ptr = vec![0usize; dim];
    for m in 0..dim {
        comp.iter_mut().for_each(|c| *c = 0.0);
        ptr.iter_mut().for_each(|p| *p = 0);
        let decay = &th.delta[m];
        let mut t_prev = 0.0;
        let mut j = 0;
        while j < n {
            let t = data.times[j];
            for (c, d) in comp.iter_mut().zip(decay) {
                if *c != 0.0 {
                    *c *= (-d * (t - t_prev)).exp();
                }
            }
            let mut end = j;
            while end < n && data.times[end] == t {
                end += 1;
            }
            for jj in j..end {
                if data.process[jj] != m {
                    continue;
                }
                state.parents[jj] = draw_parent(data, th, marks, m, t, &comp, &ptr, rng);
            }
            for k in j..end {
                let i = data.process[k];
                comp[i] += marks[k * dim + m];
                ptr[i] += 1;
            }
            t_prev = t;
            j = end;
        }
    }
    BranchStats::from_parents(data, &state.parents)
}

#[allow(clippy::too_many_arguments)]
fn draw_parent<R: Rng + ?Sized>(
    data: &ChainData,
    th: &Theta,
    marks: &[f64],
    m: usize,
    t: f64,
    comp: &[f64],
    ptr: &[usize],
    rng: &mut R,
) -> Parent {
    let dim = data.dim;
    let edge: Vec<f64> =
        (0..dim).map(|i| th.y0[m][i] * (-th.delta[m][i] * t).exp()).collect();
    let total = th.mu[m] + edge.iter().sum::<f64>() + comp.iter().sum::<f64>();
    let mut r = open_unit(rng) * total;
    if r < th.mu[m] {
        return Parent::Immigrant;
    }
    r -= th.mu[m];
    for (i, &e) in edge.iter().enumerate() {
        if r < e {
            return Parent::EdgeEffect(i);
        }
        r -= e;
    }
    let mut source = None;
    for (i, &c) in comp.iter().enumerate() {
        if c <= 0.0 {
            continue;
        }
        source = Some(i);
        if r < c {
            break;
        }
        r -= c;
    }
    let Some(i) = source else {
        return Parent::Immigrant;
    };
    let r = r.clamp(0.0, comp[i]);
    let events = &data.by_process[i][..ptr[i]];
    let d = th.delta[m][i];
    let mut acc = 0.0;
    let mut chosen = events[0];
    for &k in events.iter().rev() {
        let y = marks[k * dim + m];
        if y == 0.0 {
            continue;
        }
        chosen = k;
        acc += y * (-d * (t - data.times[k])).exp();
        if acc > r {
            break;
        }
    }
    Parent::Event(chosen)
}

pub fn draw_gamma<R: Rng + ?Sized>(p: GammaPrior, rng: &mut R) -> f64 {
    Gamma::new(p.shape, 1.0 / p.rate).expect("positive gamma parameters").sample(rng)
}

/// Conditional law of `Y_{m,k}`, the jump event `k` adds to process `m`.
pub fn mark_posterior(data: &ChainData, state: &ChainState, stats: &BranchStats, k: usize, m: usize) -> GammaPrior {
    let dim = data.dim;
    let i = data.process[k];
    let th = &state.theta;
    let d = th.delta[m][i];
    GammaPrior {
        shape: th.alpha[m][i] + stats.children[k * dim + m] as f64,
        rate: th.beta[m][i] + -(-d * (data.horizon - data.times[k])).exp_m1() / d,
    }
}

pub fn gibbs_marks<R: Rng + ?Sized>(data: &ChainData, state: &mut ChainState, stats: &BranchStats, rng: &mut R) {
    let dim = data.dim;
    for k in 0..data.len() {
        for m in 0..dim {
            let p = mark_posterior(data, state, stats, k, m);
            state.marks[k * dim + m] = draw_gamma(p, rng);
        }
    }
}

pub fn y0_posterior(data: &ChainData, state: &ChainState, stats: &BranchStats, hyper: &Hyperparams, m: usize, i: usize) -> GammaPrior {
    let d = state.theta.delta[m][i];
    let prior = hyper.y0[m][i];
    GammaPrior {
        shape: prior.shape + stats.edge[m * data.dim + i] as f64,
        rate: prior.rate + -(-d * data.horizon).exp_m1() / d,
    }
}

pub fn mu_posterior(data: &ChainData, stats: &BranchStats, hyper: &Hyperparams, m: usize) -> GammaPrior {
    let prior = hyper.mu[m];
    GammaPrior { shape: prior.shape + stats.immigrants[m] as f64, rate: prior.rate + data.horizon }
}

pub fn beta_posterior(data: &ChainData, state: &ChainState, hyper: &Hyperparams, m: usize, i: usize) -> GammaPrior {
    let prior = hyper.beta[m][i];
    let events = &data.by_process[i];
    let sum: f64 = events.iter().map(|&k| state.marks[k * data.dim + m]).sum();
    GammaPrior {
        shape: prior.shape + events.len() as f64 * state.theta.alpha[m][i],
        rate: prior.rate + sum,
    }
}

/// Data entering the conditional of one decay `delta_m^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaTerms {
    pub prior: GammaPrior,
    /// Total parent-to-child delay over all children of source `i` in `m`.
    pub gap_sum: f64,
    /// `(Y, T - t)` for the edge jump (at `t = 0`) and every event of `i`.
    pub jumps: Vec<(f64, f64)>,
}

impl DeltaTerms {
    pub fn new(data: &ChainData, state: &ChainState, stats: &BranchStats, hyper: &Hyperparams, m: usize, i: usize) -> Self {
        let dim = data.dim;
        let mut jumps = Vec::with_capacity(data.by_process[i].len() + 1);
        jumps.push((state.theta.y0[m][i], data.horizon));
        for &k in &data.by_process[i] {
            jumps.push((state.marks[k * dim + m], data.horizon - data.times[k]));
        }
        Self { prior: hyper.delta[m][i], gap_sum: stats.gap_sum[m * dim + i], jumps }
    }
}

/// `(tau - 1) ln d - d (psi + G) - sum_k Y_k (1 - e^{-d L_k}) / d`.
pub fn log_posterior_delta(delta: f64, terms: &DeltaTerms) -> Result<f64, McmcError> {
    if !(delta > 0.0) {
        return Err(McmcError::DomainError(delta));
    }
    Ok(delta_value_and_slope(delta, terms).0)
}

pub fn delta_value_and_slope(d: f64, terms: &DeltaTerms) -> (f64, f64) {
    let (tau, psi) = (terms.prior.shape, terms.prior.rate);
    let mut h = (tau - 1.0) * d.ln() - d * (psi + terms.gap_sum);
    let mut dh = (tau - 1.0) / d - (psi + terms.gap_sum);
    for &(y, l) in &terms.jumps {
        if y == 0.0 {
            continue;
        }
        let x = d * l;
        let one_minus = -(-x).exp_m1();
        h -= y * one_minus / d;
        dh += y * (one_minus - x * (-x).exp()) / (d * d);
    }
    (h, dh)
}

/// Data entering the conditional of one mark shape `alpha_m^i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaTerms {
    pub prior: GammaPrior,
    pub n: usize,
    /// `N ln beta - psi + sum_k ln Y_k`.
    pub log_kappa: f64,
}

impl AlphaTerms {
    pub fn new(data: &ChainData, state: &ChainState, hyper: &Hyperparams, m: usize, i: usize) -> Self {
        let prior = hyper.alpha[m][i];
        let events = &data.by_process[i];
        let sum_log: f64 = events
            .iter()
            .map(|&k| state.marks[k * data.dim + m].max(f64::MIN_POSITIVE).ln())
            .sum();
        let n = events.len();
        Self { prior, n, log_kappa: n as f64 * state.theta.beta[m][i].ln() - prior.rate + sum_log }
    }
}

/// `(tau - 1) ln a - N ln Gamma(a) + a ln kappa`.
pub fn log_posterior_alpha(alpha: f64, terms: &AlphaTerms) -> Result<f64, McmcError> {
    if !(alpha > 0.0) {
        return Err(McmcError::DomainError(alpha));
    }
    Ok(alpha_value_and_slope(alpha, terms).0)
}

pub fn alpha_value_and_slope(a: f64, terms: &AlphaTerms) -> (f64, f64) {
    let n = terms.n as f64;
    let tau = terms.prior.shape;
    let mut h = (tau - 1.0) * a.ln() + a * terms.log_kappa;
    let mut dh = (tau - 1.0) / a + terms.log_kappa;
    if terms.n > 0 {
        h -= n * ln_gamma(a);
        dh -= n * digamma(a);
    }
    (h, dh)
}

/// One systematic-scan sampler bound to a data set.
#[derive(Debug, Clone)]
pub struct GibbsSampler {
    pub data: ChainData,
    pub hyper: Hyperparams,
    pub state: ChainState,
    /// Keep the observed marks instead of resampling them.
    pub fix_marks: bool,
}

impl GibbsSampler {
    pub fn new(data: ChainData, hyper: Hyperparams, fix_marks: bool) -> Result<Self, McmcError> {
        hyper.validate()?;
        if hyper.dim() != data.dim {
            return Err(McmcError::DimensionMismatch { stream: data.dim, hyper: hyper.dim() });
        }
        let state = ChainState::initial(&data, &hyper);
        let fix_marks = fix_marks && data.observed_marks.is_some();
        Ok(Self { data, hyper, state, fix_marks })
    }

    /// Branching, marks, edge jumps, `mu`, `beta`, `delta`, `alpha`.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(), McmcError> {
        let dim = self.data.dim;
        let data = &self.data;
        let hyper = &self.hyper;
        let state = &mut self.state;

        let stats = gibbs_branching(data, state, rng);
        if !self.fix_marks {
            gibbs_marks(data, state, &stats, rng);
        }
        for m in 0..dim {
            for i in 0..dim {
                state.theta.y0[m][i] = draw_gamma(y0_posterior(data, state, &stats, hyper, m, i), rng);
            }
        }
        for m in 0..dim {
            state.theta.mu[m] = draw_gamma(mu_posterior(data, &stats, hyper, m), rng);
        }
        for m in 0..dim {
            for i in 0..dim {
                state.theta.beta[m][i] = draw_gamma(beta_posterior(data, state, hyper, m, i), rng);
            }
        }
        for m in 0..dim {
            for i in 0..dim {
                let terms = DeltaTerms::new(data, state, &stats, hyper, m, i);
                state.theta.delta[m][i] = ars_sample(|d| delta_value_and_slope(d, &terms), None, rng)
                    .map_err(|source| McmcError::Ars { parameter: format!("delta[{}][{}]", m + 1, i + 1), source })?;
            }
        }
        for m in 0..dim {
            for i in 0..dim {
                let terms = AlphaTerms::new(data, state, hyper, m, i);
                state.theta.alpha[m][i] = ars_sample(|a| alpha_value_and_slope(a, &terms), None, rng)
                    .map_err(|source| McmcError::Ars { parameter: format!("alpha[{}][{}]", m + 1, i + 1), source })?;
            }
        }
        state.iteration += 1;

        for (name, v) in state.theta.named() {
            let ok = v.is_finite() && (v > 0.0 || (name.starts_with("y0") && v >= 0.0));
            if !ok {
                return Err(McmcError::NonFiniteState { iteration: state.iteration, parameter: name, value: v });
            }
        }
        Ok(())
    }
}
