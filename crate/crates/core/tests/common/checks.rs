//! Property checks shared by the unit-style test targets and the acceptance
//! runner. Each returns a one-line summary or the first violation.

use super::{integrate, normalize, random_spec};
use hawkes_core::cache::IntensityCache;
use hawkes_core::exact_sim::{
    excitation_gap_from_uniform, gap_survival, next_event, sample_background_gap, simulate,
};
use hawkes_core::likelihood::{compensator, gamma_log_density, intensity_at_events, rescaled_increments};
use hawkes_core::mcmc::gibbs::*;
use hawkes_core::mcmc::*;
use hawkes_core::model::{bivariate_reference, HawkesSpec, MarkModel};
use hawkes_core::rng::{open_unit, SeedFamily};
use hawkes_core::stationarity::{closed_form_b, spectral_radius, stationary_intensities, ExcitationMatrix};
use hawkes_core::stats::{batch_means_stderr, ks_one_sample, mean};
use hawkes_core::{EventStream, Parent};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Gamma as GammaDist};
use statrs::function::erf::erf;

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

/// Spec whose excitation matrix is `omega` (decay 2, Gamma marks).
pub fn spec_from_omega(omega: &[Vec<f64>], mu: &[f64]) -> HawkesSpec {
    let dim = mu.len();
    let mut spec = HawkesSpec::uniform(dim, 1.0, 2.0, MarkModel::Constant(0.0), 0.0, 1.0);
    spec.mu = mu.to_vec();
    for m in 0..dim {
        for i in 0..dim {
            spec.marks[m][i] = MarkModel::Gamma { shape: 1.5, rate: 1.5 / (omega[m][i] * 2.0).max(1e-300) };
            if omega[m][i] == 0.0 {
                spec.marks[m][i] = MarkModel::Constant(0.0);
            }
        }
    }
    spec
}

/// Explicit stationary rates against the linear solve on 1000 random stable
/// 2-d specs, to 1e-12.
pub fn closed_form_vs_solve() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    while checked < 1000 {
        let omega: Vec<Vec<f64>> =
            (0..2).map(|_| (0..2).map(|_| rng.random_range(0.0..0.7)).collect()).collect();
        if spectral_radius(&ExcitationMatrix { omega: omega.clone() }).map_err(|e| e.to_string())? >= 0.95 {
            continue;
        }
        let mu = [rng.random_range(0.1..3.0), rng.random_range(0.1..3.0)];
        let spec = spec_from_omega(&omega, &mu);
        let a = closed_form_b(&spec).map_err(|e| e.to_string())?;
        let b = stationary_intensities(&spec).map_err(|e| e.to_string())?.b.ok_or("unstable")?;
        for m in 0..2 {
            let rel = (a[m] - b[m]).abs() / b[m].max(1.0);
            worst = worst.max(rel);
            ensure!(rel <= 1e-12, "{a:?} vs {b:?}");
        }
        checked += 1;
    }
    Ok(format!("1000 specs, max error {worst:.1e}"))
}

pub fn random_cache<R: Rng>(rng: &mut R) -> (HawkesSpec, IntensityCache) {
    let dim = rng.random_range(1..=4);
    let mut spec = HawkesSpec::uniform(dim, 1.0, 1.0, MarkModel::Constant(0.0), 0.0, 1.0);
    let mut comps = vec![vec![0.0; dim]; dim];
    for m in 0..dim {
        spec.mu[m] = rng.random_range(0.1..3.0);
        for i in 0..dim {
            spec.delta[m][i] = rng.random_range(0.1..20.0);
            comps[m][i] = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..5.0) };
        }
    }
    let cache = IntensityCache::with_components(&spec, &comps, 0.0);
    (spec, cache)
}

/// Survival of the superposed gap against `exp(-int_0^s lambda)`, 100 caches
/// by 20 points, to 1e-12.
pub fn superposition_product() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (spec, cache) = random_cache(&mut rng);
        for k in 1..=20 {
            let s = 0.1 * k as f64;
            let mut integral = spec.mu.iter().sum::<f64>() * s;
            for m in 0..spec.dim {
                for i in 0..spec.dim {
                    let (l, d) = (cache.component(m, i), spec.delta[m][i]);
                    integral += l / d * (1.0 - (-d * s).exp());
                }
            }
            let err = (gap_survival(&cache, &spec.mu, s) - (-integral).exp()).abs();
            worst = worst.max(err);
            ensure!(err < 1e-12, "s {s}: error {err:e}");
        }
    }
    Ok(format!("max abs error {worst:.1e} over 2000 points"))
}

/// Constant decay per row: grouped channels against the per-channel scheme,
/// survival at five points within 3 standard errors, n = 1e5.
pub fn grouped_channels() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let dim = 3;
    let mut spec = HawkesSpec::uniform(dim, 1.0, 1.0, MarkModel::Constant(0.0), 0.0, 1.0);
    let mut comps = vec![vec![0.0; dim]; dim];
    for m in 0..dim {
        spec.mu[m] = rng.random_range(0.2..1.0);
        let d = rng.random_range(0.5..5.0);
        for i in 0..dim {
            spec.delta[m][i] = d;
            comps[m][i] = rng.random_range(0.0..3.0);
        }
    }
    let cache = IntensityCache::with_components(&spec, &comps, 0.0);
    let n = 100_000;
    let mut r1 = SeedFamily::new(4).stream(0);
    let per_channel: Vec<f64> = (0..n).map(|_| next_event(&cache, &spec, &mut r1).0).collect();
    let mut r2 = SeedFamily::new(4).stream(1);
    let grouped: Vec<f64> = (0..n)
        .map(|_| {
            (0..dim)
                .map(|m| {
                    let a0 = sample_background_gap(spec.mu[m], &mut r2);
                    let lam: f64 = comps[m].iter().sum();
                    a0.min(excitation_gap_from_uniform(lam, spec.delta[m][0], open_unit(&mut r2)))
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut worst: f64 = 0.0;
    for s in [0.05, 0.1, 0.2, 0.4, 0.8] {
        let p1 = per_channel.iter().filter(|&&d| d > s).count() as f64 / n as f64;
        let p2 = grouped.iter().filter(|&&d| d > s).count() as f64 / n as f64;
        let se = ((p1 * (1.0 - p1) + p2 * (1.0 - p2)) / n as f64).sqrt();
        let z = (p1 - p2).abs() / se;
        worst = worst.max(z);
        ensure!(z < 3.0, "s {s}: {p1} vs {p2} ({z:.2} se)");
    }
    Ok(format!("largest deviation {worst:.2} se"))
}

/// Exp(1) KS on time-rescaled increments of one long bivariate path.
pub fn time_rescaling() -> Check {
    let spec = bivariate_reference(1000.0);
    let s = simulate(&spec, &mut SeedFamily::new(9).stream(0)).map_err(|e| e.to_string())?;
    let mut incs = rescaled_increments(&spec, &s, 0).map_err(|e| e.to_string())?;
    incs.extend(rescaled_increments(&spec, &s, 1).map_err(|e| e.to_string())?);
    ensure!(incs.len() >= 5_000, "only {} events", incs.len());
    let ks = ks_one_sample(&incs, |x| 1.0 - (-x).exp());
    ensure!(ks.passes(0.01), "{ks:?}");
    Ok(format!("n = {}, D = {:.4}, p = {:.3}", ks.n, ks.statistic, ks.p_value))
}

/// Intensity of process `m` at `t` from the events with `time <= cut`.
fn intensity_from(spec: &HawkesSpec, s: &EventStream, m: usize, t: f64, cut: f64) -> f64 {
    let mut l = spec.mu[m];
    for i in 0..spec.dim {
        l += spec.y0[m][i] * (-spec.delta[m][i] * t).exp();
    }
    for (j, e) in s.events.iter().enumerate() {
        if e.time > cut {
            break;
        }
        l += s.mark(j, m).unwrap() * (-spec.delta[m][e.process] * (t - e.time)).exp();
    }
    l
}

/// Left-limit intensity of process `m` summed term by term.
pub fn direct_intensity(spec: &HawkesSpec, s: &EventStream, m: usize, t: f64) -> f64 {
    intensity_from(spec, s, m, t, t.next_down())
}

/// Random 1- or 2-d spec with an edge effect, and one path on `[0, 15]`.
pub fn random_stream_case(seed: u64) -> (HawkesSpec, EventStream) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(1..=2);
    let mut spec = random_spec(&mut rng, dim, 15.0);
    for m in 0..dim {
        for i in 0..dim {
            spec.y0[m][i] = rng.random_range(0.0..2.0);
        }
    }
    let s = simulate(&spec, &mut SeedFamily::new(seed).stream(0)).unwrap();
    (spec, s)
}

/// Closed-form compensator against adaptive quadrature of the direct
/// intensity, 100 streams, 1e-8 relative.
pub fn compensator_quadrature() -> Check {
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let (spec, s) = random_stream_case(seed);
        for m in 0..spec.dim {
            let mut knots: Vec<f64> = std::iter::once(0.0).chain(s.times()).collect();
            knots.push(spec.horizon);
            let quad: f64 = knots
                .windows(2)
                .filter(|w| w[1] > w[0])
                .map(|w| integrate(&|t: f64| intensity_from(&spec, &s, m, t, w[0]), w[0], w[1], 1e-12))
                .sum();
            let closed = compensator(&spec, &s, m, spec.horizon).map_err(|e| e.to_string())?;
            let rel = (closed - quad).abs() / closed;
            worst = worst.max(rel);
            ensure!(rel <= 1e-8, "seed {seed} process {m}: {closed} vs {quad}");
        }
    }
    Ok(format!("max rel error {worst:.1e}"))
}

/// Recursive intensities against the direct sum, 100 streams, 1e-10 relative.
pub fn recursion_direct() -> Check {
    let mut worst: f64 = 0.0;
    for seed in 100..200 {
        let (spec, s) = random_stream_case(seed);
        for m in 0..spec.dim {
            let rec = intensity_at_events(&spec, &s, m).map_err(|e| e.to_string())?;
            let times = s.times_of(m);
            ensure!(rec.len() == times.len(), "length mismatch");
            for (a, &t) in rec.iter().zip(&times) {
                let b = direct_intensity(&spec, &s, m, t);
                let rel = (a - b).abs() / b;
                worst = worst.max(rel);
                ensure!(rel <= 1e-10, "seed {seed}: {a} vs {b}");
            }
        }
    }
    Ok(format!("max rel error {worst:.1e}"))
}

/// Complete-data log density of times, parents and marks given theta, plus
/// the log prior. Written term by term as an independent oracle.
pub fn complete_log_post(data: &ChainData, state: &ChainState, hyper: &Hyperparams) -> f64 {
    let dim = data.dim;
    let th = &state.theta;
    let big_t = data.horizon;
    let mut lp = 0.0;
    for (j, parent) in state.parents.iter().enumerate() {
        let m = data.process[j];
        let t = data.times[j];
        lp += match *parent {
            Parent::Immigrant => th.mu[m].ln(),
            Parent::EdgeEffect(i) => th.y0[m][i].ln() - th.delta[m][i] * t,
            Parent::Event(k) => {
                let i = data.process[k];
                state.marks[k * dim + m].ln() - th.delta[m][i] * (t - data.times[k])
            }
        };
    }
    for m in 0..dim {
        lp -= th.mu[m] * big_t;
        for i in 0..dim {
            let d = th.delta[m][i];
            lp -= th.y0[m][i] * (1.0 - (-d * big_t).exp()) / d;
        }
        for k in 0..data.len() {
            let i = data.process[k];
            let d = th.delta[m][i];
            let y = state.marks[k * dim + m];
            lp -= y * (1.0 - (-d * (big_t - data.times[k])).exp()) / d;
            lp += gamma_log_density(y, th.alpha[m][i], th.beta[m][i]);
        }
    }
    let g = |x: f64, p: GammaPrior| gamma_log_density(x, p.shape, p.rate);
    for m in 0..dim {
        lp += g(th.mu[m], hyper.mu[m]);
        for i in 0..dim {
            lp += g(th.delta[m][i], hyper.delta[m][i]);
            lp += g(th.alpha[m][i], hyper.alpha[m][i]);
            lp += g(th.beta[m][i], hyper.beta[m][i]);
            lp += g(th.y0[m][i], hyper.y0[m][i]);
        }
    }
    lp
}

pub fn theta_of(spec: &HawkesSpec) -> Theta {
    let dim = spec.dim;
    let (mut alpha, mut beta) = (vec![vec![0.0; dim]; dim], vec![vec![0.0; dim]; dim]);
    for m in 0..dim {
        for i in 0..dim {
            let MarkModel::Gamma { shape, rate } = spec.marks[m][i] else { unreachable!() };
            alpha[m][i] = shape;
            beta[m][i] = rate;
        }
    }
    Theta { mu: spec.mu.clone(), delta: spec.delta.clone(), alpha, beta, y0: spec.y0.clone() }
}

pub struct Case {
    pub data: ChainData,
    pub state: ChainState,
    pub stats: BranchStats,
    pub hyper: Hyperparams,
}

/// Simulated data, the true theta, one branching draw and random priors.
pub fn random_chain_case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(1..=2);
    let mut spec = random_spec(&mut rng, dim, 8.0);
    for m in 0..dim {
        for i in 0..dim {
            spec.y0[m][i] = rng.random_range(0.2..2.0);
        }
    }
    let s = simulate(&spec, &mut SeedFamily::new(seed).stream(0)).unwrap();
    let data = ChainData::new(&s).unwrap();
    let mut state = ChainState::from_theta(&data, theta_of(&spec));
    let stats = gibbs_branching(&data, &mut state, &mut SeedFamily::new(seed).stream(1));
    let p = |r: &mut ChaCha8Rng| GammaPrior::new(r.random_range(1.0..4.0), r.random_range(0.2..3.0));
    let hyper = Hyperparams::uniform(dim, p(&mut rng), p(&mut rng), p(&mut rng), p(&mut rng), p(&mut rng));
    Case { data, state, stats, hyper }
}

/// Largest relative density error of a Gamma law against the oracle's
/// conditional, normalized numerically, at 20 quantiles.
fn conjugate_error<F: Fn(&mut ChainState, f64)>(case: &Case, law: GammaPrior, set: F) -> f64 {
    let log_f = |x: f64| {
        let mut st = case.state.clone();
        set(&mut st, x);
        complete_log_post(&case.data, &st, &case.hyper)
    };
    let norm = normalize(&log_f);
    let dist = GammaDist::new(law.shape, law.rate).unwrap();
    (1..=20)
        .map(|q| {
            let x = dist.inverse_cdf(q as f64 / 21.0);
            let exact = gamma_log_density(x, law.shape, law.rate).exp();
            (norm.density(&log_f, x) - exact).abs() / exact
        })
        .fold(0.0, f64::max)
}

/// Conjugate updates for mu, y0, beta and marks, 20 random cases, 1e-6.
pub fn conjugate_updates() -> Check {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for seed in 0..20 {
        let case = random_chain_case(seed);
        let (data, state, stats, hyper) = (&case.data, &case.state, &case.stats, &case.hyper);
        let dim = data.dim;
        let mut record = |what: &str, err: f64| -> Result<(), String> {
            worst = worst.max(err);
            checked += 1;
            ensure!(err <= 1e-6, "seed {seed} {what}: rel error {err:e}");
            Ok(())
        };
        for m in 0..dim {
            record("mu", conjugate_error(&case, mu_posterior(data, stats, hyper, m), |s, x| s.theta.mu[m] = x))?;
            for i in 0..dim {
                let law = y0_posterior(data, state, stats, hyper, m, i);
                record("y0", conjugate_error(&case, law, |s, x| s.theta.y0[m][i] = x))?;
                let law = beta_posterior(data, state, hyper, m, i);
                record("beta", conjugate_error(&case, law, |s, x| s.theta.beta[m][i] = x))?;
            }
            for k in [0, data.len() / 2, data.len() - 1] {
                let law = mark_posterior(data, state, stats, k, m);
                record("mark", conjugate_error(&case, law, |s, x| s.marks[k * dim + m] = x))?;
            }
        }
    }
    Ok(format!("{checked} conditionals, max rel error {worst:.1e}"))
}

/// Second differences of the decay and mark-shape log conditionals, linear
/// terms removed, over a log grid on 100 instances with shape-2 priors.
pub fn log_concavity() -> Check {
    let xs: Vec<f64> = (0..200).map(|k| 1e-3 * 1.06f64.powi(k)).collect();
    let mut largest = f64::NEG_INFINITY;
    for seed in 100..200 {
        let mut case = random_chain_case(seed);
        let dim = case.data.dim;
        let unit = GammaPrior::new(1.0, 1.0);
        let two = GammaPrior::new(2.0, 0.5);
        case.hyper = Hyperparams::uniform(dim, unit, two, two, unit, unit);
        let (data, state, stats, hyper) = (&case.data, &case.state, &case.stats, &case.hyper);
        for m in 0..dim {
            for i in 0..dim {
                let dt = DeltaTerms::new(data, state, stats, hyper, m, i);
                let at = AlphaTerms::new(data, state, hyper, m, i);
                let hd = |d: f64| delta_value_and_slope(d, &dt).0 + d * (dt.prior.rate + dt.gap_sum);
                let ha = |a: f64| alpha_value_and_slope(a, &at).0 - a * at.log_kappa;
                for &x in &xs {
                    let e = 1e-3 * x;
                    for (name, h) in [("delta", &hd as &dyn Fn(f64) -> f64), ("alpha", &ha)] {
                        let second = h(x - e) - 2.0 * h(x) + h(x + e);
                        let scaled = second / h(x).abs().max(1.0);
                        largest = largest.max(scaled);
                        ensure!(scaled <= 1e-9, "{name} seed {seed} x {x}: second difference {second:e}");
                    }
                }
            }
        }
    }
    Ok(format!("largest scaled second difference {largest:.1e}"))
}

fn ars_draws<F: Fn(f64) -> (f64, f64)>(f: F, n: usize, seed: u64) -> Result<Vec<f64>, String> {
    let mut rng = SeedFamily::new(seed).stream(0);
    (0..n).map(|_| ars_sample(&f, None, &mut rng).map_err(|e| e.to_string())).collect()
}

/// KS of ARS draws against Gamma(3, 2), half-normal and Weibull(2).
pub fn ars_targets(n: usize) -> Check {
    let g = GammaDist::new(3.0, 2.0).unwrap();
    let cases: [(&str, Vec<f64>, Box<dyn Fn(f64) -> f64>); 3] = [
        ("gamma", ars_draws(|x| (2.0 * x.ln() - 2.0 * x, 2.0 / x - 2.0), n, 1)?, Box::new(move |x| g.cdf(x))),
        ("half-normal", ars_draws(|x| (-0.5 * x * x, -x), n, 2)?, Box::new(|x| erf(x / 2f64.sqrt()))),
        ("weibull", ars_draws(|x| (x.ln() - x * x, 1.0 / x - 2.0 * x), n, 3)?, Box::new(|x| 1.0 - (-x * x).exp())),
    ];
    let mut parts = Vec::new();
    for (name, xs, cdf) in &cases {
        let ks = ks_one_sample(xs, cdf);
        ensure!(ks.passes(0.01), "{name}: {ks:?}");
        parts.push(format!("{name} p = {:.3}", ks.p_value));
    }
    Ok(parts.join(", "))
}

/// Successive-conditional simulator (one sweep given data, then fresh data
/// given theta) on `[0, 5]`. The theta marginal must be the prior: first and
/// second moments of every parameter within `z` batch-means standard errors.
pub fn geweke(dim: usize, iters: usize, z: f64) -> Check {
    let p = GammaPrior::new;
    let hyper = Hyperparams::uniform(dim, p(4.0, 4.0), p(4.0, 2.0), p(4.0, 2.0), p(20.0, 5.0 / dim as f64), p(2.0, 4.0));
    let mut rng = SeedFamily::new(99 + dim as u64).stream(0);
    let mean_of = |g: GammaPrior| g.mean();
    let mut theta = Theta {
        mu: hyper.mu.iter().copied().map(mean_of).collect(),
        delta: hyper.delta.iter().map(|r| r.iter().copied().map(mean_of).collect()).collect(),
        alpha: hyper.alpha.iter().map(|r| r.iter().copied().map(mean_of).collect()).collect(),
        beta: hyper.beta.iter().map(|r| r.iter().copied().map(mean_of).collect()).collect(),
        y0: hyper.y0.iter().map(|r| r.iter().copied().map(mean_of).collect()).collect(),
    };
    let burn = 1_000;
    let mut traces: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
    for it in 0..iters + burn {
        let marks = (0..dim)
            .map(|m| (0..dim).map(|i| MarkModel::Gamma { shape: theta.alpha[m][i], rate: theta.beta[m][i] }).collect())
            .collect();
        let spec = HawkesSpec {
            dim,
            mu: theta.mu.clone(),
            delta: theta.delta.clone(),
            marks,
            y0: theta.y0.clone(),
            horizon: 5.0,
        };
        let s = simulate(&spec, &mut rng).map_err(|e| e.to_string())?;
        let data = ChainData::new(&s).map_err(|e| e.to_string())?;
        let mut g = GibbsSampler::new(data, hyper.clone(), true).map_err(|e| e.to_string())?;
        g.state = ChainState::from_theta(&g.data, theta.clone());
        g.sweep(&mut rng).map_err(|e| e.to_string())?;
        theta = g.state.theta.clone();
        if it >= burn {
            for (name, v) in theta.named() {
                traces.entry(name).or_default().push(v);
            }
        }
    }
    let prior_of = |name: &str| -> GammaPrior {
        let idx: Vec<usize> = name
            .split(|c| c == '[' || c == ']')
            .filter_map(|t| t.parse::<usize>().ok())
            .map(|k| k - 1)
            .collect();
        match name.split('[').next().unwrap() {
            "mu" => hyper.mu[idx[0]],
            "delta" => hyper.delta[idx[0]][idx[1]],
            "alpha" => hyper.alpha[idx[0]][idx[1]],
            "beta" => hyper.beta[idx[0]][idx[1]],
            _ => hyper.y0[idx[0]][idx[1]],
        }
    };
    let mut worst: f64 = 0.0;
    for (name, trace) in &traces {
        let prior = prior_of(name);
        let z1 = (mean(trace) - prior.mean()).abs() / batch_means_stderr(trace, 50);
        ensure!(z1 < z, "{name} mean {} vs {} ({z1:.2} se)", mean(trace), prior.mean());
        let sq: Vec<f64> = trace.iter().map(|x| x * x).collect();
        let want = prior.variance() + prior.mean().powi(2);
        let z2 = (mean(&sq) - want).abs() / batch_means_stderr(&sq, 50);
        ensure!(z2 < z, "{name} second moment {} vs {want} ({z2:.2} se)", mean(&sq));
        worst = worst.max(z1).max(z2);
    }
    Ok(format!("M = {dim}, {iters} iterations, {} parameters, largest deviation {worst:.2} se", traces.len()))
}
