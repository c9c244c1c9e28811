//! Adaptive rejection sampling for log-concave densities on `(0, inf)`.
//!
//! Tangent-line upper hull with chord squeeze. The hull gains a support
//! point on every evaluation that does not accept through the squeeze.

use rand::Rng;
use thiserror::Error;

use crate::rng::open_unit;

pub const MAX_SUPPORT: usize = 50;
const TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArsError {
    #[error("log density is not concave near x = {at}")]
    ConcavityViolation { at: f64 },
    #[error("log density or derivative not finite at x = {at}")]
    NonFinite { at: f64 },
    #[error("could not find a support point with negative slope")]
    NoRightBracket,
    #[error("rejection loop did not terminate")]
    TooManyRejections,
}

#[derive(Debug, Clone, Copy)]
struct Point {
    x: f64,
    h: f64,
    dh: f64,
}

struct Hull {
    pts: Vec<Point>,
    /// `z[j]` is the right end of the piece tangent at `pts[j]`.
    z: Vec<f64>,
    /// Log mass of each piece.
    log_mass: Vec<f64>,
    log_total: f64,
}

fn upper(p: &Point, x: f64) -> f64 {
    p.h + p.dh * (x - p.x)
}

/// `ln int_a^b exp(h + s (x - x0)) dx` for the tangent at `p`.
fn piece_log_mass(p: &Point, a: f64, b: f64) -> f64 {
    let s = p.dh;
    if b == f64::INFINITY {
        return upper(p, a) - (-s).ln();
    }
    let w = b - a;
    if w <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if s.abs() * w < 1e-300 || s == 0.0 {
        return upper(p, a) + w.ln();
    }
    if s > 0.0 {
        upper(p, b) + (-(-s * w).exp_m1()).ln() - s.ln()
    } else {
        upper(p, a) + (-(s * w).exp_m1()).ln() - (-s).ln()
    }
}

/// Point of `[a, b]` at mass fraction `v` under the tangent at `p`.
fn piece_inverse(p: &Point, a: f64, b: f64, v: f64) -> f64 {
    let s = p.dh;
    if b == f64::INFINITY {
        return a + (-v).ln_1p() / s;
    }
    let w = b - a;
    if s == 0.0 || s.abs() * w < 1e-300 {
        return a + v * w;
    }
    let x = if s > 0.0 {
        b + ((1.0 - v) * (-s * w).exp_m1()).ln_1p() / s
    } else {
        a + (v * (s * w).exp_m1()).ln_1p() / s
    };
    x.clamp(a, b)
}

impl Hull {
    fn build(pts: Vec<Point>) -> Result<Self, ArsError> {
        let k = pts.len();
        for w in pts.windows(2) {
            let (p, q) = (&w[0], &w[1]);
            if q.dh > p.dh + TOL * p.dh.abs().max(1.0)
                || q.h > upper(p, q.x) + TOL * q.h.abs().max(1.0)
                || p.h > upper(q, p.x) + TOL * p.h.abs().max(1.0)
            {
                return Err(ArsError::ConcavityViolation { at: q.x });
            }
        }
        let mut z = Vec::with_capacity(k);
        for w in pts.windows(2) {
            let (p, q) = (&w[0], &w[1]);
            let ds = p.dh - q.dh;
            let zz = if ds.abs() <= 1e-12 * p.dh.abs().max(1.0) {
                0.5 * (p.x + q.x)
            } else {
                (q.h - p.h - q.x * q.dh + p.x * p.dh) / ds
            };
            z.push(zz.clamp(p.x, q.x));
        }
        z.push(f64::INFINITY);
        let mut log_mass = Vec::with_capacity(k);
        let mut a = 0.0;
        for (p, &b) in pts.iter().zip(&z) {
            log_mass.push(piece_log_mass(p, a, b));
            a = b;
        }
        let mx = log_mass.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_total = mx + log_mass.iter().map(|l| (l - mx).exp()).sum::<f64>().ln();
        if !log_total.is_finite() {
            return Err(ArsError::NonFinite { at: pts[0].x });
        }
        Ok(Self { pts, z, log_mass, log_total })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, usize) {
        let target = open_unit(rng);
        let mut acc = 0.0;
        let last = self.pts.len() - 1;
        for j in 0..=last {
            let w = (self.log_mass[j] - self.log_total).exp();
            if target < acc + w || j == last {
                let v = ((target - acc) / w).clamp(0.0, 1.0);
                let a = if j == 0 { 0.0 } else { self.z[j - 1] };
                return (piece_inverse(&self.pts[j], a, self.z[j], v), j);
            }
            acc += w;
        }
        unreachable!()
    }

    fn upper_at(&self, x: f64, piece: usize) -> f64 {
        upper(&self.pts[piece], x)
    }

    /// Chord between neighbouring support points; `-inf` outside them.
    fn lower_at(&self, x: f64) -> f64 {
        let j = self.pts.partition_point(|p| p.x <= x);
        if j == 0 || j == self.pts.len() {
            return f64::NEG_INFINITY;
        }
        let (p, q) = (&self.pts[j - 1], &self.pts[j]);
        ((q.x - x) * p.h + (x - p.x) * q.h) / (q.x - p.x)
    }

    fn insert(&mut self, pt: Point) -> Result<(), ArsError> {
        let j = self.pts.partition_point(|p| p.x < pt.x);
        if self.pts.get(j).is_some_and(|p| p.x == pt.x) {
            return Ok(());
        }
        let mut pts = std::mem::take(&mut self.pts);
        pts.insert(j, pt);
        *self = Hull::build(pts)?;
        Ok(())
    }
}

fn eval<F: FnMut(f64) -> (f64, f64)>(f: &mut F, x: f64) -> Result<Point, ArsError> {
    let (h, dh) = f(x);
    if h.is_nan() || dh.is_nan() || h == f64::INFINITY || dh.is_infinite() {
        return Err(ArsError::NonFinite { at: x });
    }
    Ok(Point { x, h, dh })
}

/// Three abscissae around the maximum of `f` over a coarse log-spaced grid on
/// `[1e-3, 1e3]`, extended to the right until the slope turns negative.
pub fn initial_abscissae<F: FnMut(f64) -> (f64, f64)>(f: &mut F) -> Result<Vec<f64>, ArsError> {
    const GRID: usize = 31;
    let ratio = 10f64.powf(6.0 / (GRID - 1) as f64);
    let mut best = (f64::NEG_INFINITY, 1.0);
    let mut x = 1e-3;
    for _ in 0..GRID {
        let (h, _) = f(x);
        if h > best.0 {
            best = (h, x);
        }
        x *= ratio;
    }
    let mode = best.1;
    let mut xs = vec![mode / ratio, mode, mode * ratio];
    for _ in 0..200 {
        let last = *xs.last().unwrap();
        if f(last).1 < 0.0 {
            return Ok(xs);
        }
        xs.push(last * ratio);
    }
    Err(ArsError::NoRightBracket)
}

/// One exact draw from the density proportional to `exp(h)` on `(0, inf)`,
/// where `f(x) = (h(x), h'(x))`. Without `init`, abscissae come from
/// [`initial_abscissae`]; otherwise the largest abscissa must have `h' < 0`.
pub fn ars_sample<F, R>(mut f: F, init: Option<&[f64]>, rng: &mut R) -> Result<f64, ArsError>
where
    F: FnMut(f64) -> (f64, f64),
    R: Rng + ?Sized,
{
    let xs = match init {
        Some(xs) => xs.to_vec(),
        None => initial_abscissae(&mut f)?,
    };
    let mut pts = xs.iter().map(|&x| eval(&mut f, x)).collect::<Result<Vec<_>, _>>()?;
    pts.sort_by(|a, b| a.x.total_cmp(&b.x));
    pts.dedup_by(|a, b| a.x == b.x);
    if pts.last().is_none_or(|p| p.dh >= 0.0) {
        return Err(ArsError::NoRightBracket);
    }
    let mut hull = Hull::build(pts)?;
    for _ in 0..10_000 {
        let (x, piece) = hull.sample(rng);
        if !(x > 0.0) {
            continue;
        }
        let u_x = hull.upper_at(x, piece);
        let log_w = open_unit(rng).ln();
        let l_x = hull.lower_at(x);
        if l_x > u_x + TOL * u_x.abs().max(1.0) {
            return Err(ArsError::ConcavityViolation { at: x });
        }
        if log_w <= l_x - u_x {
            return Ok(x);
        }
        let p = eval(&mut f, x)?;
        if p.h > u_x + TOL * u_x.abs().max(1.0) {
            return Err(ArsError::ConcavityViolation { at: x });
        }
        let accept = log_w <= p.h - u_x;
        if hull.pts.len() < MAX_SUPPORT {
            hull.insert(p)?;
        }
        if accept {
            return Ok(x);
        }
    }
    Err(ArsError::TooManyRejections)
}
