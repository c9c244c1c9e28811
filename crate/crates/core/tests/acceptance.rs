//! Acceptance runner: one `[PASS]`/`[FAIL]` line per criterion and a failure
//! count. `ACCEPTANCE_STRICT=1` turns any failure into a nonzero exit;
//! `ACCEPTANCE_ONLY=2,3` restricts the run.

mod common;

use std::sync::OnceLock;
use std::time::Instant;

use common::checks::{self, Check};
use hawkes_core::baseline::{benchmark, multivariate_bench_spec, univariate_bench_spec, BenchRow, Sampler};
use hawkes_core::model::bivariate_reference;
use hawkes_core::rng::SeedFamily;
use hawkes_core::stationarity::stationary_intensities;
use hawkes_core::verify::{
    convergence_report, mean_intensity_curve, recalibration_experiment, FitMethod, RecalibrationConfig,
};

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn stationarity() -> Check {
    let report = stationary_intensities(&bivariate_reference(1.0)).map_err(err)?;
    let b = report.b.ok_or("reference spec reported unstable")?;
    let want = [84.0 / 23.0, 50.0 / 23.0];
    ensure!((report.rho - 0.5).abs() <= 1e-9, "rho = {}", report.rho);
    for m in 0..2 {
        ensure!((b[m] - want[m]).abs() <= 1e-6, "B[{m}] = {} vs {}", b[m], want[m]);
    }
    let closed = checks::closed_form_vs_solve()?;
    Ok(format!("rho = {:.12}, B = ({:.6}, {:.6}); {closed}", report.rho, b[0], b[1]))
}

struct Bench {
    univariate: Vec<BenchRow>,
    multivariate: Vec<BenchRow>,
}

/// Both timing configs, run once and shared by the count and speed criteria.
fn bench() -> &'static Result<Bench, String> {
    static CELL: OnceLock<Result<Bench, String>> = OnceLock::new();
    CELL.get_or_init(|| {
        let uni = [Sampler::Exact, Sampler::ExactUnivariate, Sampler::Inversion, Sampler::Thinning];
        let univariate = benchmark(&uni, &univariate_bench_spec(100_000.0), 20, SeedFamily::new(2024)).map_err(err)?;
        let multi = [Sampler::Exact, Sampler::Thinning];
        let multivariate =
            benchmark(&multi, &multivariate_bench_spec(50, 100.0), 100, SeedFamily::new(2025)).map_err(err)?;
        Ok(Bench { univariate, multivariate })
    })
}

fn row(rows: &[BenchRow], s: Sampler) -> &BenchRow {
    rows.iter().find(|r| r.sampler == s).expect("sampler was benchmarked")
}

fn event_counts() -> Check {
    let b = bench().as_ref().map_err(Clone::clone)?;
    let uni = row(&b.univariate, Sampler::Exact);
    let multi = row(&b.multivariate, Sampler::Exact);
    let du = (uni.mean_events - 249_900.0).abs() / 249_900.0;
    let dm = (multi.mean_events - 12_492.0).abs() / 12_492.0;
    let detail = format!(
        "univariate {:.0} (sd {:.0}, {:.2}% off), M=50 {:.0} (sd {:.0}, {:.2}% off)",
        uni.mean_events,
        uni.sd_events,
        100.0 * du,
        multi.mean_events,
        multi.sd_events,
        100.0 * dm
    );
    ensure!(du <= 0.01 && dm <= 0.02, "{detail}");
    Ok(detail)
}

fn speed_ordering() -> Check {
    let b = bench().as_ref().map_err(Clone::clone)?;
    let exact_m = row(&b.multivariate, Sampler::Exact).time_per_event_us;
    let thin_m = row(&b.multivariate, Sampler::Thinning).time_per_event_us;
    let fast = row(&b.univariate, Sampler::ExactUnivariate).time_per_event_us;
    let general = row(&b.univariate, Sampler::Exact).time_per_event_us;
    let inv = row(&b.univariate, Sampler::Inversion).time_per_event_us;
    let detail = format!(
        "M=50 exact {exact_m:.3} vs thinning {thin_m:.3} us/event ({:.2}x); univariate exact {fast:.4} \
         (general path {general:.4}) vs inversion {inv:.4} us/event ({:.2}x)",
        thin_m / exact_m,
        inv / fast
    );
    ensure!(exact_m < thin_m && inv / fast >= 2.0, "{detail}");
    Ok(detail)
}

fn mean_intensity() -> Check {
    let spec = bivariate_reference(10.0);
    let b = stationary_intensities(&spec).map_err(err)?.b.ok_or("unstable")?;
    let grid: Vec<f64> = (1..=100).map(|k| 0.1 * k as f64).collect();
    let est = mean_intensity_curve(&spec, 20_000, &grid, SeedFamily::new(7)).map_err(err)?;
    let rep = convergence_report(&est, &b, 5.0);
    let detail = format!(
        "max relative deviation {:.4} at t = {:.1}, process {}",
        rep.max_relative_deviation, rep.at_time, rep.process
    );
    ensure!(rep.max_relative_deviation <= 0.02, "{detail}");
    Ok(detail)
}

fn mle_bias() -> Check {
    let truth = bivariate_reference(200.0);
    let cfg = RecalibrationConfig::new(2, 100, vec![FitMethod::Mle]);
    let report = recalibration_experiment(&truth, &cfg, SeedFamily::new(11)).map_err(err)?;
    let mle = report.method(FitMethod::Mle).ok_or("no MLE report")?;
    ensure!(mle.failures == 0, "{} fits failed: {:?}", mle.failures, mle.failure_messages);
    let deltas: Vec<_> = mle.rows.iter().filter(|r| r.name.starts_with("delta")).collect();
    ensure!(deltas.len() == 4, "expected four decays");
    let detail = deltas
        .iter()
        .map(|r| format!("{} {:.4} vs {}", r.name, r.estimate, r.truth))
        .collect::<Vec<_>>()
        .join(", ");
    ensure!(deltas.iter().all(|r| r.estimate > r.truth), "{detail}");
    Ok(detail)
}

fn mcmc_accuracy() -> Check {
    let truth = bivariate_reference(200.0);
    let cfg = RecalibrationConfig::new(2, 25, vec![FitMethod::Mle, FitMethod::Mcmc]);
    let report = recalibration_experiment(&truth, &cfg, SeedFamily::new(13)).map_err(err)?;
    let mle = report.method(FitMethod::Mle).ok_or("no MLE report")?;
    let mcmc = report.method(FitMethod::Mcmc).ok_or("no MCMC report")?;
    ensure!(mcmc.failures == 0, "{} chains failed: {:?}", mcmc.failures, mcmc.failure_messages);
    ensure!(mle.failures == 0, "{} fits failed: {:?}", mle.failures, mle.failure_messages);
    let rels: Vec<(f64, &str)> = mcmc
        .rows
        .iter()
        .filter(|r| r.name.starts_with("mu") || r.name.starts_with("delta"))
        .map(|r| ((r.estimate - r.truth).abs() / r.truth, r.name.as_str()))
        .collect();
    let avg = rels.iter().map(|r| r.0).sum::<f64>() / rels.len() as f64;
    let worst = rels.iter().copied().fold((0.0, ""), |w, r| if r.0 > w.0 { r } else { w });
    let (a, b) = (mcmc.total_process_mse(), mle.total_process_mse());
    let detail = format!(
        "mean mu/delta relative error {avg:.3} (worst {:.3} at {}); process MSE total mcmc {a:.4} vs mle {b:.4} \
         (per-path sums {:.4} vs {:.4})",
        worst.0, worst.1, mcmc.total_path_mse, mle.total_path_mse
    );
    ensure!(avg <= 0.15 && a < b, "{detail}");
    Ok(detail)
}

fn property_suites() -> Check {
    let parts: [(&str, fn() -> Check); 10] = [
        ("superposition", checks::superposition_product),
        ("compensator", checks::compensator_quadrature),
        ("recursion", checks::recursion_direct),
        ("rescaling", checks::time_rescaling),
        ("conjugacy", checks::conjugate_updates),
        ("concavity", checks::log_concavity),
        ("ars", || checks::ars_targets(10_000)),
        ("grouped", checks::grouped_channels),
        ("geweke", || checks::geweke(1, 100_000, 3.0)),
        ("closed-form", checks::closed_form_vs_solve),
    ];
    let mut failures = Vec::new();
    for (name, f) in parts {
        match f() {
            Ok(d) => println!("       {name}: {d}"),
            Err(e) => failures.push(format!("{name}: {e}")),
        }
    }
    ensure!(failures.is_empty(), "{}", failures.join("; "));
    Ok(format!("{} suites", parts.len()))
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let criteria: [(usize, &str, fn() -> Check); 7] = [
        (1, "stationarity", stationarity),
        (2, "event counts", event_counts),
        (3, "speed ordering", speed_ordering),
        (4, "mean intensity", mean_intensity),
        (5, "MLE decay bias", mle_bias),
        (6, "MCMC accuracy", mcmc_accuracy),
        (7, "property suites", property_suites),
    ];
    let mut failed = 0;
    for (id, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("[PASS] {id} {name}: {d} ({secs:.1} s)"),
            Err(e) => {
                failed += 1;
                println!("[FAIL] {id} {name}: {e} ({secs:.1} s)");
            }
        }
    }
    println!("{failed} criteria failed");
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}
