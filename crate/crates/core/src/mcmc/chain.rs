//! Chain driver, snapshots and posterior summaries.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::gibbs::{ChainData, GibbsSampler};
use super::hyper::Hyperparams;
use super::McmcError;
use super::gibbs::Theta;
use crate::rng::SeedFamily;
use crate::stats::Summary;
use crate::stream::EventStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainOptions {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Hold observed marks fixed instead of treating them as latent.
    #[serde(default)]
    pub fix_marks: bool,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self { iterations: 5_000, burn_in: 1_000, thin: 1, seed: 0, fix_marks: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub iteration: usize,
    pub theta: Theta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorChain {
    pub options: ChainOptions,
    pub samples: Vec<Snapshot>,
    pub summary: BTreeMap<String, Summary>,
}

impl PosteriorChain {
    pub fn from_samples(options: ChainOptions, samples: Vec<Snapshot>) -> Self {
        let summary = summarize(&samples);
        Self { options, samples, summary }
    }

    /// Trace of one named parameter such as `delta[1][2]`.
    pub fn trace(&self, name: &str) -> Vec<f64> {
        self.samples
            .iter()
            .filter_map(|s| s.theta.named().into_iter().find(|(n, _)| n == name).map(|p| p.1))
            .collect()
    }

    /// Posterior means as a parameter set.
    pub fn posterior_mean(&self) -> Theta {
        let n = self.samples.len() as f64;
        let mut acc = self.samples[0].theta.clone();
        let scale = |acc: &mut Theta, f: &dyn Fn(f64) -> f64| {
            acc.mu.iter_mut().for_each(|v| *v = f(*v));
            for mat in [&mut acc.delta, &mut acc.alpha, &mut acc.beta, &mut acc.y0] {
                mat.iter_mut().flatten().for_each(|v| *v = f(*v));
            }
        };
        scale(&mut acc, &|_| 0.0);
        for s in &self.samples {
            let t = &s.theta;
            for (a, b) in acc.mu.iter_mut().zip(&t.mu) {
                *a += b;
            }
            for (am, bm) in [
                (&mut acc.delta, &t.delta),
                (&mut acc.alpha, &t.alpha),
                (&mut acc.beta, &t.beta),
                (&mut acc.y0, &t.y0),
            ] {
                for (a, b) in am.iter_mut().flatten().zip(bm.iter().flatten()) {
                    *a += b;
                }
            }
        }
        scale(&mut acc, &|v| v / n);
        acc
    }

    /// One JSON object per snapshot: iteration plus flattened named parameters.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for s in &self.samples {
            let mut obj = serde_json::Map::new();
            obj.insert("iteration".into(), s.iteration.into());
            for (name, v) in s.theta.named() {
                obj.insert(name, v.into());
            }
            serde_json::to_writer(&mut w, &obj)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub fn summarize(samples: &[Snapshot]) -> BTreeMap<String, Summary> {
    let mut traces: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for s in samples {
        for (name, v) in s.theta.named() {
            traces.entry(name).or_default().push(v);
        }
    }
    traces.into_iter().map(|(k, v)| (k, Summary::of(&v))).collect()
}

/// Runs one chain. Keeps `floor((iterations - burn_in) / thin)` snapshots.
pub fn run_chain(
    stream: &EventStream,
    hyper: &Hyperparams,
    options: ChainOptions,
) -> Result<PosteriorChain, McmcError> {
    if options.thin == 0 {
        return Err(McmcError::InvalidHyper("thin must be at least 1".into()));
    }
    let data = ChainData::new(stream)?;
    let mut sampler = GibbsSampler::new(data, hyper.clone(), options.fix_marks)?;
    let mut rng = SeedFamily::new(options.seed).stream(0);
    let keep = options.iterations.saturating_sub(options.burn_in) / options.thin;
    let mut samples = Vec::with_capacity(keep);
    for it in 0..options.iterations {
        sampler.sweep(&mut rng)?;
        if it >= options.burn_in && (it + 1 - options.burn_in) % options.thin == 0 {
            samples.push(Snapshot { iteration: it + 1, theta: sampler.state.theta.clone() });
        }
    }
    Ok(PosteriorChain::from_samples(options, samples))
}
