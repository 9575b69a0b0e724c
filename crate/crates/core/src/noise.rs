//! Gaussian observation noise: one precision `α` per training matrix.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseSpec {
    Fixed { alpha: f64 },
    /// Gamma(a0, b0) prior on the precision, resampled every iteration.
    Adaptive { a0: f64, b0: f64 },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseSpec::Fixed { alpha } => alpha > 0.0 && alpha.is_finite(),
            NoiseSpec::Adaptive { a0, b0 } => a0 > 0.0 && b0 > 0.0 && a0.is_finite() && b0.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("noise parameters must be positive: {self}")))
        }
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseSpec::Fixed { alpha } => write!(f, "fixed:{alpha}"),
            NoiseSpec::Adaptive { a0, b0 } => write!(f, "adaptive:{a0}:{b0}"),
        }
    }
}

impl FromStr for NoiseSpec {
    type Err = Error;

    /// `fixed:<alpha>` or `adaptive:<a0>:<b0>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Config(format!(
                "cannot parse noise `{s}`; expected fixed:<alpha> or adaptive:<a0>:<b0>"
            ))
        };
        let num = |t: &str| t.parse::<f64>().map_err(|_| bad());
        let parts: Vec<&str> = s.split(':').collect();
        let spec = match parts.as_slice() {
            ["fixed", a] => NoiseSpec::Fixed { alpha: num(a)? },
            ["adaptive", a0, b0] => NoiseSpec::Adaptive {
                a0: num(a0)?,
                b0: num(b0)?,
            },
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseState {
    spec: NoiseSpec,
    alpha: f64,
}

impl NoiseState {
    /// Fixed noise starts at its constant; adaptive noise starts from one
    /// prior draw.
    pub fn init(spec: NoiseSpec, s: &mut RngStream) -> Result<Self> {
        spec.validate()?;
        let alpha = match spec {
            NoiseSpec::Fixed { alpha } => alpha,
            NoiseSpec::Adaptive { a0, b0 } => s.gamma(a0, b0)?,
        };
        Ok(NoiseState { spec, alpha })
    }

    /// Restore a saved state.
    pub fn with_alpha(spec: NoiseSpec, alpha: f64) -> Self {
        NoiseState { spec, alpha }
    }

    pub fn spec(&self) -> NoiseSpec {
        self.spec
    }

    pub fn current_precision(&self) -> f64 {
        self.alpha
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self.spec, NoiseSpec::Adaptive { .. })
    }

    /// Resample `α ~ Gamma(a0 + n/2, b0 + sse/2)`. No-op for fixed noise.
    pub fn update_precision(&mut self, sse: f64, n: usize, s: &mut RngStream) -> Result<f64> {
        if !(sse >= 0.0) {
            return Err(Error::Domain(format!("sum of squared residuals must be non-negative, got {sse}")));
        }
        if let NoiseSpec::Adaptive { a0, b0 } = self.spec {
            let (shape, rate) = adaptive_posterior(a0, b0, sse, n);
            self.alpha = s.gamma(shape, rate)?;
        }
        Ok(self.alpha)
    }
}

/// Shape and rate of the Gamma posterior on the noise precision.
pub fn adaptive_posterior(a0: f64, b0: f64, sse: f64, n: usize) -> (f64, f64) {
    (a0 + 0.5 * n as f64, b0 + 0.5 * sse)
}
