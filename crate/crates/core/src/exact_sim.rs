//! Exact simulation by superposition.
//!
//! The waiting time to the next event of the superposed process is the
//! minimum of `M (M + 1)` independent auxiliary gaps: one exponential gap per
//! background rate and one defective gap per excitation component. Every
//! auxiliary gap has a closed-form inverse CDF, so no root finding or
//! rejection is needed, and the winning channel tells which process fired and
//! what excited it.
//!
//! Random draws are consumed in a fixed order per event: for each target `m`
//! the background uniform, then one uniform per source `i` (ascending), and
//! finally one mark per target. Any two implementations sharing a generator
//! therefore replay each other.

use rand::Rng;
use thiserror::Error;

use crate::cache::IntensityCache;
use crate::model::{HawkesSpec, MarkModel, SpecError};
use crate::rng::open_unit;
use crate::stream::{Event, EventStream, Origin};

pub const DEFAULT_EVENT_CAP: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    InvalidSpec(#[from] SpecError),
    #[error("event cap {cap} exceeded at t = {time}; the model is probably unstable")]
    ExplosionGuard { cap: usize, time: f64 },
    #[error("dominating rate {0} is not finite")]
    DominatingRateOverflow(f64),
    #[error("root bracketing failed: lambda = {lambda}, target = {target}")]
    RootBracketFailure { lambda: f64, target: f64 },
    #[error("this sampler requires M = 1, got M = {0}")]
    UnsupportedDimension(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    pub event_cap: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { event_cap: DEFAULT_EVENT_CAP }
    }
}

/// Channel that produced the next event: target process and, for excitation
/// channels, the source process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Channel {
    pub process: usize,
    pub source: Option<usize>,
}

impl Channel {
    pub fn origin(&self) -> Origin {
        match self.source {
            None => Origin::Immigrant,
            Some(i) => Origin::Process(i),
        }
    }
}

/// Inverse CDF of an exponential gap with rate `mu`.
#[inline]
pub fn background_gap_from_uniform(mu: f64, v: f64) -> f64 {
    -(-v).ln_1p() / mu
}

pub fn sample_background_gap<R: Rng + ?Sized>(mu: f64, rng: &mut R) -> f64 {
    background_gap_from_uniform(mu, open_unit(rng))
}

/// Probability that an excitation channel never fires again.
pub fn never_fires_probability(lambda: f64, delta: f64) -> f64 {
    (-lambda / delta).exp()
}

/// Inverse of `F(s) = 1 - exp(-(lambda / delta) (1 - e^{-delta s}))`.
///
/// Returns `+inf` when `u` falls in the atom at infinity.
#[inline]
pub fn excitation_gap_from_uniform(lambda: f64, delta: f64, u: f64) -> f64 {
    if lambda <= 0.0 {
        return f64::INFINITY;
    }
    // 1 + (delta / lambda) log(1 - u) > 0  <=>  u < 1 - exp(-lambda / delta)
    let inner = (delta / lambda) * (-u).ln_1p();
    if inner > -1.0 {
        -inner.ln_1p() / delta
    } else {
        f64::INFINITY
    }
}

pub fn sample_excitation_gap<R: Rng + ?Sized>(lambda: f64, delta: f64, rng: &mut R) -> f64 {
    excitation_gap_from_uniform(lambda, delta, open_unit(rng))
}

/// `P(a > s)` for one excitation channel.
pub fn excitation_survival(lambda: f64, delta: f64, s: f64) -> f64 {
    (-(lambda / delta) * -(-delta * s).exp_m1()).exp()
}

/// `P(d > s)` for the superposed gap, as the product of channel survivals.
pub fn gap_survival(cache: &IntensityCache, mu: &[f64], s: f64) -> f64 {
    let dim = cache.dim();
    let mut p = 1.0;
    for (m, &rate) in mu.iter().enumerate().take(dim) {
        p *= (-rate * s).exp();
        for i in 0..dim {
            p *= excitation_survival(cache.component(m, i), cache.decay_rate(m, i), s);
        }
    }
    p
}

/// Draws every auxiliary gap and returns the smallest with its channel.
///
/// Ties (probability zero) go to the lexicographically smallest channel, with
/// the background channel ordered before all sources.
pub fn next_event<R: Rng + ?Sized>(
    cache: &IntensityCache,
    spec: &HawkesSpec,
    rng: &mut R,
) -> (f64, Channel) {
    next_event_with(cache, &spec.mu, rng)
}

#[inline]
fn next_event_with<R: Rng + ?Sized>(
    cache: &IntensityCache,
    mu: &[f64],
    rng: &mut R,
) -> (f64, Channel) {
    let dim = cache.dim();
    let mut best = f64::INFINITY;
    let mut channel = Channel { process: 0, source: None };
    for (m, &rate) in mu.iter().enumerate() {
        let a = sample_background_gap(rate, rng);
        if a < best {
            best = a;
            channel = Channel { process: m, source: None };
        }
        for i in 0..dim {
            let u = open_unit(rng);
            let delta = cache.decay_rate(m, i);
            // u >= stored / delta >= lambda / delta > 1 - exp(-lambda / delta)
            if u * delta >= cache.upper_bound(m, i) {
                continue;
            }
            let a = excitation_gap_from_uniform(cache.component(m, i), delta, u);
            if a < best {
                best = a;
                channel = Channel { process: m, source: Some(i) };
            }
        }
    }
    (best, channel)
}

/// Applies the cache update for an event of process `channel.process` after
/// a gap `gap`, with `jumps[m]` the mark added to target `m`.
pub fn advance_cache(cache: &mut IntensityCache, gap: f64, channel: Channel, jumps: &[f64]) {
    cache.advance(gap, channel.process, jumps);
}

/// Exact simulation on `(0, T]` with origin labels and marks.
pub fn simulate<R: Rng + ?Sized>(spec: &HawkesSpec, rng: &mut R) -> Result<EventStream, SimError> {
    simulate_with(spec, rng, SimOptions::default())
}

pub fn simulate_with<R: Rng + ?Sized>(
    spec: &HawkesSpec,
    rng: &mut R,
    opts: SimOptions,
) -> Result<EventStream, SimError> {
    spec.validate()?;
    let dim = spec.dim;
    // marks_by_source[i][m] is the law of the jump an event of i adds to m.
    let marks_by_source: Vec<Vec<MarkModel>> =
        (0..dim).map(|i| (0..dim).map(|m| spec.marks[m][i]).collect()).collect();
    let mut cache = IntensityCache::new(spec);
    let mut stream = EventStream::new(dim, spec.horizon);
    let mut jumps = vec![0.0; dim];
    let mut t = 0.0;
    loop {
        let (gap, channel) = next_event_with(&cache, &spec.mu, rng);
        t += gap;
        for (y, law) in jumps.iter_mut().zip(&marks_by_source[channel.process]) {
            *y = law.sample(rng);
        }
        if t > spec.horizon {
            break;
        }
        if stream.len() >= opts.event_cap {
            return Err(SimError::ExplosionGuard { cap: opts.event_cap, time: t });
        }
        advance_cache(&mut cache, gap, channel, &jumps);
        stream.push(Event { time: t, process: channel.process, origin: channel.origin() }, &jumps);
    }
    Ok(stream)
}

/// Univariate fast path. Consumes the same draws and performs the same
/// arithmetic as [`simulate`] with `M = 1`.
pub fn simulate_univariate<R: Rng + ?Sized>(
    spec: &HawkesSpec,
    rng: &mut R,
) -> Result<EventStream, SimError> {
    simulate_univariate_with(spec, rng, SimOptions::default())
}

pub fn simulate_univariate_with<R: Rng + ?Sized>(
    spec: &HawkesSpec,
    rng: &mut R,
    opts: SimOptions,
) -> Result<EventStream, SimError> {
    spec.validate()?;
    if spec.dim != 1 {
        return Err(SimError::UnsupportedDimension(spec.dim));
    }
    let mu = spec.mu[0];
    let delta = spec.delta[0][0];
    let law = spec.marks[0][0];
    // Excitation stored at time `stamp`; current value is stored * e^{-delta (t - stamp)}.
    let mut stored = spec.y0[0][0];
    let mut stamp = 0.0;
    let mut t = 0.0;
    let mut stream = EventStream::new(1, spec.horizon);
    loop {
        let a0 = sample_background_gap(mu, rng);
        let u = open_unit(rng);
        let current = || {
            if stored == 0.0 {
                0.0
            } else if t - stamp == 0.0 {
                stored
            } else {
                stored * (-delta * (t - stamp)).exp()
            }
        };
        let a1 = if u * delta >= stored {
            f64::INFINITY
        } else {
            excitation_gap_from_uniform(current(), delta, u)
        };
        let (gap, origin) = if a1 < a0 { (a1, Origin::Process(0)) } else { (a0, Origin::Immigrant) };
        let y = law.sample(rng);
        let lambda_before = {
            // value at the new event time, before the jump
            let next = t + gap;
            if stored == 0.0 {
                0.0
            } else if next - stamp == 0.0 {
                stored
            } else {
                stored * (-delta * (next - stamp)).exp()
            }
        };
        t += gap;
        if t > spec.horizon {
            break;
        }
        if stream.len() >= opts.event_cap {
            return Err(SimError::ExplosionGuard { cap: opts.event_cap, time: t });
        }
        stored = lambda_before + y;
        stamp = t;
        stream.push(Event { time: t, process: 0, origin }, &[y]);
    }
    Ok(stream)
}
