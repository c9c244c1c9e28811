//! Gamma priors on every model parameter.

use serde::{Deserialize, Serialize};

use super::McmcError;

/// `Gamma(shape, rate)` prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPrior {
    pub const fn new(shape: f64, rate: f64) -> Self {
        Self { shape, rate }
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }

    fn is_valid(&self) -> bool {
        self.shape > 0.0 && self.rate > 0.0 && self.shape.is_finite() && self.rate.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub mu: Vec<GammaPrior>,
    pub delta: Vec<Vec<GammaPrior>>,
    pub alpha: Vec<Vec<GammaPrior>>,
    pub beta: Vec<Vec<GammaPrior>>,
    pub y0: Vec<Vec<GammaPrior>>,
}

impl Hyperparams {
    pub const DEFAULT_DELTA: GammaPrior = GammaPrior::new(2.0, 0.5);
    pub const DEFAULT_ALPHA: GammaPrior = GammaPrior::new(2.0, 0.5);
    pub const DEFAULT_DIFFUSE: GammaPrior = GammaPrior::new(1.0, 0.01);

    /// Same prior for every entry of each parameter.
    pub fn uniform(
        dim: usize,
        mu: GammaPrior,
        delta: GammaPrior,
        alpha: GammaPrior,
        beta: GammaPrior,
        y0: GammaPrior,
    ) -> Self {
        let mat = |p| vec![vec![p; dim]; dim];
        Self { mu: vec![mu; dim], delta: mat(delta), alpha: mat(alpha), beta: mat(beta), y0: mat(y0) }
    }

    /// `Gamma(2, 0.5)` on decays and mark shapes, `Gamma(1, 0.01)` elsewhere.
    pub fn defaults(dim: usize) -> Self {
        Self::uniform(
            dim,
            Self::DEFAULT_DIFFUSE,
            Self::DEFAULT_DELTA,
            Self::DEFAULT_ALPHA,
            Self::DEFAULT_DIFFUSE,
            Self::DEFAULT_DIFFUSE,
        )
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Positivity everywhere, plus the log-concavity preconditions
    /// `shape > 1` for decays and `shape >= 1` for mark shapes.
    pub fn validate(&self) -> Result<(), McmcError> {
        let dim = self.dim();
        let square = |v: &Vec<Vec<GammaPrior>>| v.len() == dim && v.iter().all(|r| r.len() == dim);
        if !(square(&self.delta) && square(&self.alpha) && square(&self.beta) && square(&self.y0)) {
            return Err(McmcError::InvalidHyper("prior matrices must be M x M".into()));
        }
        let all = self
            .mu
            .iter()
            .chain(self.delta.iter().flatten())
            .chain(self.alpha.iter().flatten())
            .chain(self.beta.iter().flatten())
            .chain(self.y0.iter().flatten());
        if let Some(p) = all.into_iter().find(|p| !p.is_valid()) {
            return Err(McmcError::InvalidHyper(format!("non-positive prior {p:?}")));
        }
        for m in 0..dim {
            for i in 0..dim {
                if self.delta[m][i].shape <= 1.0 {
                    return Err(McmcError::InvalidHyper(format!(
                        "delta[{}][{}] prior shape must exceed 1, got {}",
                        m + 1,
                        i + 1,
                        self.delta[m][i].shape
                    )));
                }
                if self.alpha[m][i].shape < 1.0 {
                    return Err(McmcError::InvalidHyper(format!(
                        "alpha[{}][{}] prior shape must be at least 1, got {}",
                        m + 1,
                        i + 1,
                        self.alpha[m][i].shape
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        assert_eq!(Hyperparams::defaults(3).validate(), Ok(()));
    }

    #[test]
    fn concavity_preconditions() {
        let mut h = Hyperparams::defaults(2);
        h.delta[1][0].shape = 1.0;
        assert!(matches!(h.validate(), Err(McmcError::InvalidHyper(_))));
        let mut h = Hyperparams::defaults(2);
        h.alpha[0][1].shape = 0.9;
        assert!(h.validate().is_err());
        let mut h = Hyperparams::defaults(2);
        h.alpha[0][1].shape = 1.0;
        assert!(h.validate().is_ok());
        h.mu[0].rate = 0.0;
        assert!(h.validate().is_err());
    }
}
