//! Monte Carlo verification against the stationary theory, and
//! recalibration experiments comparing MLE with posterior means.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::IntensityCache;
use crate::exact_sim::{simulate, SimError};
use crate::mcmc::{run_chain, ChainOptions, Hyperparams, Theta};
use crate::mle::{fit_mle, MleOptions, ModelShape};
use crate::model::{HawkesSpec, MarkModel};
use crate::rng::SeedFamily;
use crate::stream::EventStream;

/// Replications per work unit. Partial sums are combined in block order, so
/// results do not depend on the number of worker threads.
const BLOCK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityGridEstimate {
    pub grid: Vec<f64>,
    /// `mean[m][g]`: average of `lambda_m(grid[g])` over replications.
    pub mean: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    pub reps: usize,
}

impl IntensityGridEstimate {
    /// Rows `t,process,mean,stderr` with 1-based process numbers.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,process,mean,stderr\n");
        for (m, (mean, se)) in self.mean.iter().zip(&self.stderr).enumerate() {
            for (g, &t) in self.grid.iter().enumerate() {
                out.push_str(&format!("{t},{},{},{}\n", m + 1, mean[g], se[g]));
            }
        }
        out
    }
}

/// `lambda_m(t)` on `grid` along one path, as left limits.
pub fn intensity_on_grid(spec: &HawkesSpec, stream: &EventStream, grid: &[f64]) -> Vec<Vec<f64>> {
    let dim = spec.dim;
    let mut cache = IntensityCache::new(spec);
    let mut out = vec![Vec::with_capacity(grid.len()); dim];
    let mut j = 0;
    for &t in grid {
        while j < stream.len() && stream.events[j].time < t {
            let e = &stream.events[j];
            let gap = e.time - cache.t_last();
            cache.advance(gap, e.process, stream.marks_of(j).expect("simulated streams carry marks"));
            j += 1;
        }
        cache.decay(t - cache.t_last());
        for (m, row) in out.iter_mut().enumerate() {
            row.push(spec.mu[m] + cache.excitation(m));
        }
    }
    out
}

/// Averages `lambda_m(t)` over `n_reps` paths; replication `r` uses stream
/// `r` of `seeds`. The model horizon must cover the grid.
pub fn mean_intensity_curve(
    spec: &HawkesSpec,
    n_reps: usize,
    grid: &[f64],
    seeds: SeedFamily,
) -> Result<IntensityGridEstimate, SimError> {
    assert!(n_reps >= 1, "at least one replication");
    assert!(grid.windows(2).all(|w| w[0] < w[1]), "grid must be strictly increasing");
    let dim = spec.dim;
    let g = grid.len();
    let blocks: Vec<(usize, usize)> =
        (0..n_reps).step_by(BLOCK).map(|s| (s, (s + BLOCK).min(n_reps))).collect();
    let partials: Vec<Result<(Vec<f64>, Vec<f64>), SimError>> = blocks
        .par_iter()
        .map(|&(start, end)| {
            let mut sum = vec![0.0; dim * g];
            let mut sumsq = vec![0.0; dim * g];
            for r in start..end {
                let stream = simulate(spec, &mut seeds.stream(r as u64))?;
                let lam = intensity_on_grid(spec, &stream, grid);
                for m in 0..dim {
                    for k in 0..g {
                        let v = lam[m][k];
                        sum[m * g + k] += v;
                        sumsq[m * g + k] += v * v;
                    }
                }
            }
            Ok((sum, sumsq))
        })
        .collect();
    let mut sum = vec![0.0; dim * g];
    let mut sumsq = vec![0.0; dim * g];
    for p in partials {
        let (s, q) = p?;
        for k in 0..dim * g {
            sum[k] += s[k];
            sumsq[k] += q[k];
        }
    }
    let n = n_reps as f64;
    let mut mean = vec![vec![0.0; g]; dim];
    let mut stderr = vec![vec![0.0; g]; dim];
    for m in 0..dim {
        for k in 0..g {
            let mu = sum[m * g + k] / n;
            mean[m][k] = mu;
            if n_reps > 1 {
                let var = ((sumsq[m * g + k] - n * mu * mu) / (n - 1.0)).max(0.0);
                stderr[m][k] = (var / n).sqrt();
            }
        }
    }
    Ok(IntensityGridEstimate { grid: grid.to_vec(), mean, stderr, reps: n_reps })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub max_relative_deviation: f64,
    pub at_time: f64,
    /// 1-based.
    pub process: usize,
}

/// Largest `|mean_m(t) - b_m| / b_m` over grid points `t >= t_threshold`.
pub fn convergence_report(estimate: &IntensityGridEstimate, b: &[f64], t_threshold: f64) -> ConvergenceReport {
    let mut rep = ConvergenceReport { max_relative_deviation: 0.0, at_time: f64::NAN, process: 0 };
    for (m, row) in estimate.mean.iter().enumerate() {
        for (&t, &v) in estimate.grid.iter().zip(row) {
            if t < t_threshold {
                continue;
            }
            let d = (v - b[m]).abs() / b[m];
            if d >= rep.max_relative_deviation {
                rep = ConvergenceReport { max_relative_deviation: d, at_time: t, process: m + 1 };
            }
        }
    }
    rep
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    Mle,
    Mcmc,
}

impl FitMethod {
    pub fn name(&self) -> &'static str {
        match self {
            FitMethod::Mle => "mle",
            FitMethod::Mcmc => "mcmc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecalibrationConfig {
    pub n_paths: usize,
    pub methods: Vec<FitMethod>,
    /// Model fitted by the MLE.
    pub shape: ModelShape,
    pub hyper: Hyperparams,
    /// Seed field is ignored; chain `p` gets its own derived seed.
    pub chain: ChainOptions,
}

impl RecalibrationConfig {
    pub fn new(dim: usize, n_paths: usize, methods: Vec<FitMethod>) -> Self {
        Self {
            n_paths,
            methods,
            shape: ModelShape::hawkes(dim),
            hyper: Hyperparams::defaults(dim),
            chain: ChainOptions { fix_marks: true, ..ChainOptions::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRow {
    pub name: String,
    /// 1-based target process the parameter belongs to.
    pub process: usize,
    pub truth: f64,
    pub estimate: f64,
    /// Mean over paths of the squared error.
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: FitMethod,
    pub fitted: usize,
    pub failures: usize,
    pub failure_messages: Vec<String>,
    pub rows: Vec<ParamRow>,
    /// Per process: mean over that process's parameters of the squared
    /// difference between the averaged estimate and the truth.
    pub process_mse: Vec<f64>,
    /// Sum over parameters of the per-path mean squared error.
    pub total_path_mse: f64,
}

impl MethodReport {
    pub fn total_process_mse(&self) -> f64 {
        self.process_mse.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecalibrationReport {
    pub n_paths: usize,
    pub horizon: f64,
    pub methods: Vec<MethodReport>,
}

impl RecalibrationReport {
    pub fn method(&self, m: FitMethod) -> Option<&MethodReport> {
        self.methods.iter().find(|r| r.method == m)
    }

    /// Rows `method,param,process,true,estimate,mse`; the per-process summary
    /// rows use `MSE` as the parameter name and leave the middle columns empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,param,process,true,estimate,mse\n");
        for r in &self.methods {
            for row in &r.rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    r.method.name(),
                    row.name,
                    row.process,
                    row.truth,
                    row.estimate,
                    row.mse
                ));
            }
            for (m, v) in r.process_mse.iter().enumerate() {
                out.push_str(&format!("{},MSE,{},,,{}\n", r.method.name(), m + 1, v));
            }
        }
        out
    }
}

/// Parameters that are compared against the truth: `(name, process, value)`.
fn comparable(theta: &Theta, with_marks: bool, with_delta: bool) -> Vec<(String, usize, f64)> {
    let dim = theta.mu.len();
    let mut out = Vec::new();
    for m in 0..dim {
        out.push((format!("mu[{}]", m + 1), m + 1, theta.mu[m]));
        let mut mats: Vec<(&str, &Vec<Vec<f64>>)> = Vec::new();
        if with_delta {
            mats.push(("delta", &theta.delta));
        }
        if with_marks {
            mats.push(("alpha", &theta.alpha));
            mats.push(("beta", &theta.beta));
        }
        for (name, mat) in mats {
            for i in 0..dim {
                out.push((format!("{name}[{}][{}]", m + 1, i + 1), m + 1, mat[m][i]));
            }
        }
    }
    out
}

fn truth_theta(spec: &HawkesSpec) -> (Theta, bool) {
    let dim = spec.dim;
    let mut alpha = vec![vec![0.0; dim]; dim];
    let mut beta = vec![vec![0.0; dim]; dim];
    let mut gamma = true;
    for m in 0..dim {
        for i in 0..dim {
            match spec.marks[m][i] {
                MarkModel::Gamma { shape, rate } => {
                    alpha[m][i] = shape;
                    beta[m][i] = rate;
                }
                MarkModel::Constant(_) => gamma = false,
            }
        }
    }
    let theta = Theta { mu: spec.mu.clone(), delta: spec.delta.clone(), alpha, beta, y0: spec.y0.clone() };
    (theta, gamma)
}

fn fit_one(
    method: FitMethod,
    stream: &EventStream,
    cfg: &RecalibrationConfig,
    chain_seed: u64,
) -> Result<Theta, String> {
    let dim = stream.dim;
    match method {
        FitMethod::Mle => {
            let fit = fit_mle(stream, &cfg.shape, &MleOptions::default()).map_err(|e| e.to_string())?;
            let zeros = vec![vec![0.0; dim]; dim];
            Ok(Theta {
                mu: fit.mu,
                delta: fit.delta.unwrap_or_else(|| zeros.clone()),
                alpha: fit.alpha.unwrap_or_else(|| zeros.clone()),
                beta: fit.beta.unwrap_or_else(|| zeros.clone()),
                y0: zeros,
            })
        }
        FitMethod::Mcmc => {
            let opts = ChainOptions { seed: chain_seed, ..cfg.chain };
            let chain = run_chain(stream, &cfg.hyper, opts).map_err(|e| e.to_string())?;
            if chain.samples.is_empty() {
                return Err("chain kept no samples".into());
            }
            Ok(chain.posterior_mean())
        }
    }
}

/// Simulates `n_paths` streams from `truth` (path `p` from stream `p` of
/// `seeds.child(0)`), fits each with every method, and aggregates.
pub fn recalibration_experiment(
    truth: &HawkesSpec,
    cfg: &RecalibrationConfig,
    seeds: SeedFamily,
) -> Result<RecalibrationReport, SimError> {
    let paths = seeds.child(0);
    let chains = seeds.child(1);
    let streams: Vec<EventStream> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| simulate(truth, &mut paths.stream(p as u64)))
        .collect::<Result<_, _>>()?;

    let (true_theta, gamma_truth) = truth_theta(truth);
    let mut methods = Vec::new();
    for &method in &cfg.methods {
        let fits: Vec<Result<Theta, String>> = streams
            .par_iter()
            .enumerate()
            .map(|(p, s)| fit_one(method, s, cfg, chains.stream(p as u64).next_u64()))
            .collect();
        let with_delta = method == FitMethod::Mcmc || cfg.shape.excitation;
        let with_marks = gamma_truth
            && (method == FitMethod::Mcmc
                || (cfg.shape.excitation && cfg.shape.marks == crate::mle::MarkFamily::Gamma));
        let truth_rows = comparable(&true_theta, with_marks, with_delta);
        let mut sum = vec![0.0; truth_rows.len()];
        let mut sq = vec![0.0; truth_rows.len()];
        let mut fitted = 0;
        let mut failure_messages = Vec::new();
        for f in &fits {
            match f {
                Ok(theta) => {
                    fitted += 1;
                    for (k, (_, _, est)) in comparable(theta, with_marks, with_delta).into_iter().enumerate() {
                        sum[k] += est;
                        sq[k] += (est - truth_rows[k].2).powi(2);
                    }
                }
                Err(e) => failure_messages.push(e.clone()),
            }
        }
        let n = fitted.max(1) as f64;
        let rows: Vec<ParamRow> = truth_rows
            .iter()
            .enumerate()
            .map(|(k, (name, process, t))| ParamRow {
                name: name.clone(),
                process: *process,
                truth: *t,
                estimate: sum[k] / n,
                mse: sq[k] / n,
            })
            .collect();
        let mut process_mse = vec![0.0; truth.dim];
        let mut per_process = vec![0usize; truth.dim];
        for r in &rows {
            process_mse[r.process - 1] += (r.estimate - r.truth).powi(2);
            per_process[r.process - 1] += 1;
        }
        for (v, c) in process_mse.iter_mut().zip(&per_process) {
            *v /= *c as f64;
        }
        methods.push(MethodReport {
            method,
            fitted,
            failures: failure_messages.len(),
            failure_messages,
            total_path_mse: rows.iter().map(|r| r.mse).sum(),
            rows,
            process_mse,
        });
    }
    Ok(RecalibrationReport { n_paths: cfg.n_paths, horizon: truth.horizon, methods })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stationarity::stationary_intensities;

    #[test]
    fn poisson_curve_is_flat() {
        let spec = HawkesSpec::uniform(2, 1.5, 1.0, MarkModel::Constant(0.0), 0.0, 5.0);
        let grid: Vec<f64> = (0..=10).map(|k| 0.5 * k as f64).collect();
        let est = mean_intensity_curve(&spec, 50, &grid, SeedFamily::new(1)).unwrap();
        assert!(est.mean.iter().flatten().all(|&v| v == 1.5));
        assert!(est.stderr.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(est.to_csv().lines().count(), 1 + 2 * 11);
    }

    #[test]
    fn curve_starts_at_background_plus_edge_jumps() {
        let mut spec = crate::model::bivariate_reference(2.0);
        spec.y0 = vec![vec![0.5, 0.25], vec![1.0, 0.0]];
        let est = mean_intensity_curve(&spec, 20, &[0.0, 1.0, 2.0], SeedFamily::new(2)).unwrap();
        assert_eq!(est.mean[0][0], 2.75);
        assert_eq!(est.mean[1][0], 2.0);
        assert!(est.mean[0].iter().all(|&v| v >= 2.0));
    }

    #[test]
    fn result_does_not_depend_on_block_layout() {
        let spec = crate::model::bivariate_reference(3.0);
        let grid = [1.0, 2.0, 3.0];
        let a = mean_intensity_curve(&spec, 300, &grid, SeedFamily::new(3)).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| mean_intensity_curve(&spec, 300, &grid, SeedFamily::new(3)).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn exact_b_gives_zero_deviation() {
        let spec = crate::model::bivariate_reference(10.0);
        let b = stationary_intensities(&spec).unwrap().b.unwrap();
        let est = IntensityGridEstimate {
            grid: vec![5.0, 10.0],
            mean: b.iter().map(|&v| vec![v, v]).collect(),
            stderr: vec![vec![0.0; 2]; 2],
            reps: 1,
        };
        assert_eq!(convergence_report(&est, &b, 5.0).max_relative_deviation, 0.0);
    }

    #[test]
    fn poisson_recalibration_is_count_over_horizon() {
        let truth = HawkesSpec::uniform(1, 2.0, 1.0, MarkModel::Constant(0.0), 0.0, 50.0);
        let mut cfg = RecalibrationConfig::new(1, 1, vec![FitMethod::Mle]);
        cfg.shape = ModelShape::poisson(1);
        let seeds = SeedFamily::new(4);
        let rep = recalibration_experiment(&truth, &cfg, seeds).unwrap();
        let n = simulate(&truth, &mut seeds.child(0).stream(0)).unwrap().len() as f64;
        let r = &rep.methods[0];
        assert_eq!(r.rows.len(), 1);
        assert!((r.rows[0].estimate - n / 50.0).abs() < 1e-6);
        assert!((r.rows[0].mse - (n / 50.0 - 2.0).powi(2)).abs() < 1e-5);
        assert_eq!(rep.to_csv().lines().count(), 3);
    }
}
