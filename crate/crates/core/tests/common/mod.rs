#![allow(dead_code)]

pub mod checks;

use hawkes_core::model::{HawkesSpec, MarkModel};
use rand::Rng;

/// Adaptive Simpson on `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Normalized density from an unnormalized log density on `(0, inf)`.
/// The support is cut where the density falls 80 nats below its peak.
pub struct Normalized {
    pub shift: f64,
    pub log_z: f64,
    pub upper: f64,
}

pub fn normalize<F: Fn(f64) -> f64>(log_f: &F) -> Normalized {
    let mut shift = f64::NEG_INFINITY;
    let mut x = 1e-6;
    let mut arg = x;
    while x < 1e6 {
        let v = log_f(x);
        if v > shift {
            shift = v;
            arg = x;
        }
        x *= 1.01;
    }
    let mut upper = arg * 2.0 + 1e-3;
    while log_f(upper) - shift > -80.0 {
        upper *= 1.5;
    }
    let g = |x: f64| if x <= 0.0 { 0.0 } else { (log_f(x) - shift).exp() };
    // split at the peak so the adaptive rule sees the mass
    let z = integrate(&g, 0.0, arg, 1e-13) + integrate(&g, arg, upper, 1e-13);
    Normalized { shift, log_z: z.ln(), upper }
}

impl Normalized {
    pub fn density<F: Fn(f64) -> f64>(&self, log_f: &F, x: f64) -> f64 {
        (log_f(x) - self.shift - self.log_z).exp()
    }
}

/// Random 1- or 2-d stable spec with Gamma marks.
pub fn random_spec<R: Rng>(rng: &mut R, dim: usize, horizon: f64) -> HawkesSpec {
    let mut spec = HawkesSpec::uniform(dim, 1.0, 1.0, MarkModel::Constant(0.0), 0.0, horizon);
    for m in 0..dim {
        spec.mu[m] = rng.random_range(0.3..2.0);
        for i in 0..dim {
            let delta = rng.random_range(0.5..8.0);
            let shape = rng.random_range(0.5..4.0);
            // branching ratio at most 0.6 / dim per entry
            let ratio = rng.random_range(0.05..0.6) / dim as f64;
            spec.delta[m][i] = delta;
            spec.marks[m][i] = MarkModel::Gamma { shape, rate: shape / (ratio * delta) };
        }
    }
    spec
}
