//! Reference samplers: Ogata thinning and inverse-CDF with numeric root
//! finding, plus a sequential timing harness.
//!
//! Neither sampler reveals which channel caused an event, so every origin is
//! [`Origin::Unknown`].

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::exact_sim::{self, SimError, SimOptions};
use crate::model::{HawkesSpec, MarkModel};
use crate::rng::{open_unit, SeedFamily};
use crate::stats;
use crate::stream::{Event, EventStream, Origin};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ThinningStats {
    pub candidates: usize,
    pub rejections: usize,
}

pub fn simulate_thinning<R: Rng + ?Sized>(
    spec: &HawkesSpec,
    rng: &mut R,
) -> Result<EventStream, SimError> {
    simulate_thinning_with(spec, rng, SimOptions::default()).map(|(s, _)| s)
}

/// Thinning against the current total intensity. Between events every
/// component only decays, so the intensity right after the last candidate
/// bounds it until the next one.
pub fn simulate_thinning_with<R: Rng + ?Sized>(
    spec: &HawkesSpec,
    rng: &mut R,
    opts: SimOptions,
) -> Result<(EventStream, ThinningStats), SimError> {
    spec.validate()?;
    let dim = spec.dim;
    let delta: Vec<f64> = spec.delta.iter().flatten().copied().collect();
    let mut comp: Vec<f64> = spec.y0.iter().flatten().copied().collect();
    let mut per_process = vec![0.0; dim];
    let mut stream = EventStream::new(dim, spec.horizon);
    let mut stats = ThinningStats::default();
    let mut jumps = vec![0.0; dim];

    let total = |comp: &[f64], per_process: &mut [f64]| -> f64 {
        let mut sum = 0.0;
        for m in 0..dim {
            let v = spec.mu[m] + comp[m * dim..(m + 1) * dim].iter().sum::<f64>();
            per_process[m] = v;
            sum += v;
        }
        sum
    };

    let mut bound = total(&comp, &mut per_process);
    let mut t = 0.0;
    loop {
        if !bound.is_finite() {
            return Err(SimError::DominatingRateOverflow(bound));
        }
        let w = exact_sim::background_gap_from_uniform(bound, open_unit(rng));
        t += w;
        if t > spec.horizon {
            break;
        }
        stats.candidates += 1;
        for (c, d) in comp.iter_mut().zip(&delta) {
            if *c != 0.0 {
                *c *= (-d * w).exp();
            }
        }
        let lambda = total(&comp, &mut per_process);
        let u = open_unit(rng);
        if u * bound <= lambda {
            if stream.len() >= opts.event_cap {
                return Err(SimError::ExplosionGuard { cap: opts.event_cap, time: t });
            }
            // attribute to process m with probability lambda_m / lambda
            let mut target = u * bound;
            let mut process = dim - 1;
            for (m, &v) in per_process.iter().enumerate() {
                if target < v {
                    process = m;
                    break;
                }
                target -= v;
            }
            for (m, y) in jumps.iter_mut().enumerate() {
                *y = spec.marks[m][process].sample(rng);
                comp[m * dim + process] += *y;
            }
            stream.push(Event { time: t, process, origin: Origin::Unknown }, &jumps);
            bound = total(&comp, &mut per_process);
        } else {
            stats.rejections += 1;
            bound = lambda;
        }
    }
    Ok((stream, stats))
}

/// Solves `mu s + (lambda / delta) (1 - e^{-delta s}) = w` for `s`.
pub fn solve_gap(mu: f64, lambda: f64, delta: f64, w: f64) -> Result<f64, SimError> {
    if lambda == 0.0 {
        return Ok(w / mu);
    }
    let g = |s: f64| mu * s + lambda / delta * -(-delta * s).exp_m1() - w;
    let dg = |s: f64| mu + lambda * (-delta * s).exp();
    let (mut lo, mut hi) = (0.0, w / mu);
    if !(g(hi) >= 0.0) {
        return Err(SimError::RootBracketFailure { lambda, target: w });
    }
    let mut s = (w / (mu + lambda)).min(hi);
    for _ in 0..200 {
        let v = g(s);
        if v.abs() <= 1e-12 * w.max(1.0) {
            return Ok(s);
        }
        if v < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let newton = s - v / dg(s);
        s = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= f64::EPSILON * hi {
            return Ok(s);
        }
    }
    Err(SimError::RootBracketFailure { lambda, target: w })
}

/// Inverse-CDF sampler for `M = 1`: each gap is the root of
/// `Lambda(t + s) - Lambda(t) = -ln(1 - u)`.
pub fn simulate_inversion_numeric<R: Rng + ?Sized>(
    spec: &HawkesSpec,
    rng: &mut R,
) -> Result<EventStream, SimError> {
    simulate_inversion_numeric_with(spec, rng, SimOptions::default())
}

pub fn simulate_inversion_numeric_with<R: Rng + ?Sized>(
    spec: &HawkesSpec,
    rng: &mut R,
    opts: SimOptions,
) -> Result<EventStream, SimError> {
    spec.validate()?;
    if spec.dim != 1 {
        return Err(SimError::UnsupportedDimension(spec.dim));
    }
    let (mu, delta, law) = (spec.mu[0], spec.delta[0][0], spec.marks[0][0]);
    let mut lambda = spec.y0[0][0];
    let mut t = 0.0;
    let mut stream = EventStream::new(1, spec.horizon);
    loop {
        let w = -(-open_unit(rng)).ln_1p();
        let s = solve_gap(mu, lambda, delta, w)?;
        t += s;
        if t > spec.horizon {
            break;
        }
        if stream.len() >= opts.event_cap {
            return Err(SimError::ExplosionGuard { cap: opts.event_cap, time: t });
        }
        let y = law.sample(rng);
        lambda = lambda * (-delta * s).exp() + y;
        stream.push(Event { time: t, process: 0, origin: Origin::Unknown }, &[y]);
    }
    Ok(stream)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    Exact,
    /// Scalar fast path of the exact sampler; `M = 1` only.
    ExactUnivariate,
    Thinning,
    Inversion,
}

impl Sampler {
    pub fn name(&self) -> &'static str {
        match self {
            Sampler::Exact => "exact",
            Sampler::ExactUnivariate => "exact-univariate",
            Sampler::Thinning => "thinning",
            Sampler::Inversion => "inversion",
        }
    }

    pub fn run<R: Rng + ?Sized>(&self, spec: &HawkesSpec, rng: &mut R) -> Result<EventStream, SimError> {
        match self {
            Sampler::Exact => exact_sim::simulate(spec, rng),
            Sampler::ExactUnivariate => exact_sim::simulate_univariate(spec, rng),
            Sampler::Thinning => simulate_thinning(spec, rng),
            Sampler::Inversion => simulate_inversion_numeric(spec, rng),
        }
    }
}

impl std::str::FromStr for Sampler {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact" => Ok(Sampler::Exact),
            "exact-univariate" => Ok(Sampler::ExactUnivariate),
            "thinning" => Ok(Sampler::Thinning),
            "inversion" => Ok(Sampler::Inversion),
            other => Err(format!("unknown sampler '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub sampler: Sampler,
    pub runs: usize,
    pub mean_events: f64,
    pub sd_events: f64,
    pub mean_time_s: f64,
    pub sd_time_s: f64,
    pub time_per_event_us: f64,
}

/// Runs every sampler `n_runs` times, sequentially. Run `r` of every sampler
/// uses stream `r` of the seed family, so counts are comparable.
pub fn benchmark(
    samplers: &[Sampler],
    spec: &HawkesSpec,
    n_runs: usize,
    seeds: SeedFamily,
) -> Result<Vec<BenchRow>, SimError> {
    let mut rows = Vec::with_capacity(samplers.len());
    for &sampler in samplers {
        let mut counts = Vec::with_capacity(n_runs);
        let mut times = Vec::with_capacity(n_runs);
        for r in 0..n_runs {
            let mut rng = seeds.stream(r as u64);
            let start = Instant::now();
            let stream = sampler.run(spec, &mut rng)?;
            times.push(start.elapsed().as_secs_f64());
            counts.push(stream.len() as f64);
        }
        let total_events: f64 = counts.iter().sum();
        let total_time: f64 = times.iter().sum();
        rows.push(BenchRow {
            sampler,
            runs: n_runs,
            mean_events: stats::mean(&counts),
            sd_events: stats::std_dev(&counts),
            mean_time_s: stats::mean(&times),
            sd_time_s: stats::std_dev(&times),
            time_per_event_us: if total_events > 0.0 { 1e6 * total_time / total_events } else { 0.0 },
        });
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("sampler,runs,mean_events,sd_events,mean_time_s,sd_time_s,time_per_event_us\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.sampler.name(),
            r.runs,
            r.mean_events,
            r.sd_events,
            r.mean_time_s,
            r.sd_time_s,
            r.time_per_event_us
        ));
    }
    out
}

/// Univariate config of the timing comparison: `mu = 0.5`, `delta = 1`,
/// constant jump 0.8, so the stationary rate is 2.5.
pub fn univariate_bench_spec(horizon: f64) -> HawkesSpec {
    HawkesSpec::uniform(1, 0.5, 1.0, MarkModel::Constant(0.8), 0.0, horizon)
}

/// Multivariate timing config: `M` processes, `mu = 0.5`, every decay 50 and
/// every jump 0.8, no edge effect. Stationary for `M < 62.5`.
pub fn multivariate_bench_spec(dim: usize, horizon: f64) -> HawkesSpec {
    HawkesSpec::uniform(dim, 0.5, 50.0, MarkModel::Constant(0.8), 0.0, horizon)
}
