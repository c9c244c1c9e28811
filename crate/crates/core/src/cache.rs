//! Per-pair excitation intensities `lambda_m^i(t)` with exponential decay.
//!
//! Entries are decayed lazily: each entry remembers the time its stored value
//! refers to, and reads bring it forward to `t_last`. Because entries only
//! decay between jumps, the stored value is always an upper bound of the
//! current one, which lets the simulator reject dead channels without
//! evaluating an exponential.

use crate::model::HawkesSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct IntensityCache {
    dim: usize,
    decay: Vec<f64>,
    stored: Vec<f64>,
    stamp: Vec<f64>,
    t_last: f64,
}

impl IntensityCache {
    /// Cache at `t = 0` holding the edge-effect jumps `Y_m^i(0)`.
    pub fn new(spec: &HawkesSpec) -> Self {
        let stored: Vec<f64> = spec.y0.iter().flatten().copied().collect();
        Self::from_parts(spec, stored, 0.0)
    }

    /// Cache holding arbitrary components valid at time `t`.
    pub fn with_components(spec: &HawkesSpec, components: &[Vec<f64>], t: f64) -> Self {
        Self::from_parts(spec, components.iter().flatten().copied().collect(), t)
    }

    fn from_parts(spec: &HawkesSpec, stored: Vec<f64>, t: f64) -> Self {
        let dim = spec.dim;
        assert_eq!(stored.len(), dim * dim);
        Self {
            dim,
            decay: spec.delta.iter().flatten().copied().collect(),
            stamp: vec![t; dim * dim],
            stored,
            t_last: t,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t_last(&self) -> f64 {
        self.t_last
    }

    #[inline]
    pub fn decay_rate(&self, m: usize, i: usize) -> f64 {
        self.decay[m * self.dim + i]
    }

    /// `lambda_m^i(t_last)`.
    #[inline]
    pub fn component(&self, m: usize, i: usize) -> f64 {
        let k = m * self.dim + i;
        let v = self.stored[k];
        if v == 0.0 {
            return 0.0;
        }
        let age = self.t_last - self.stamp[k];
        if age == 0.0 {
            v
        } else {
            v * (-self.decay[k] * age).exp()
        }
    }

    /// A value never below `component(m, i)`.
    #[inline]
    pub fn upper_bound(&self, m: usize, i: usize) -> f64 {
        self.stored[m * self.dim + i]
    }

    pub fn components(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|m| (0..self.dim).map(|i| self.component(m, i)).collect())
            .collect()
    }

    /// Excitation part of process `m`'s intensity, `sum_i lambda_m^i(t_last)`.
    pub fn excitation(&self, m: usize) -> f64 {
        (0..self.dim).map(|i| self.component(m, i)).sum()
    }

    /// Moves the clock forward by `gap` without any jump.
    pub fn decay(&mut self, gap: f64) {
        debug_assert!(gap >= 0.0);
        self.t_last += gap;
    }

    /// Moves forward by `gap`, then adds `jumps[m]` to entry `(m, source)` for
    /// every target `m`.
    pub fn advance(&mut self, gap: f64, source: usize, jumps: &[f64]) {
        debug_assert_eq!(jumps.len(), self.dim);
        self.decay(gap);
        for (m, &y) in jumps.iter().enumerate() {
            let k = m * self.dim + source;
            let now = self.component(m, source);
            self.stored[k] = now + y;
            self.stamp[k] = self.t_last;
        }
    }

    /// Brings every entry to `t_last`. Reads are unaffected; this only
    /// resets the upper bounds to the current values.
    pub fn refresh(&mut self) {
        for m in 0..self.dim {
            for i in 0..self.dim {
                let k = m * self.dim + i;
                self.stored[k] = self.component(m, i);
                self.stamp[k] = self.t_last;
            }
        }
    }
}
