//! Counter-based random streams.
//!
//! Every random draw in a session comes from a stream keyed by
//! `(seed, iteration, mode, index)`. The key is hashed once into a 64-bit
//! stream key; the n-th output is a keyed mix of the counter `n`. Because a
//! stream depends only on its key, the order in which worker threads pick up
//! entities has no influence on the numbers they see.

use crate::error::{Error, Result};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Iteration index reserved for initialization draws.
pub const INIT_ITERATION: u64 = u64::MAX;

/// Stream indices at or above this value are reserved for per-mode
/// (non-entity) purposes such as hyperparameter draws.
pub const PURPOSE_BASE: u64 = 1 << 62;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream factory for one mode within one iteration.
#[derive(Clone, Copy, Debug)]
pub struct ModeStreams {
    pub seed: u64,
    pub iteration: u64,
    pub mode: u32,
}

impl ModeStreams {
    pub fn new(seed: u64, iteration: u64, mode: u32) -> Self {
        ModeStreams { seed, iteration, mode }
    }

    pub fn entity(&self, i: usize) -> RngStream {
        stream_for(self.seed, self.iteration, self.mode, i as u64)
    }

    pub fn purpose(&self, p: u64) -> RngStream {
        stream_for(self.seed, self.iteration, self.mode, PURPOSE_BASE + p)
    }
}

#[derive(Clone, Debug)]
pub struct RngStream {
    key: u64,
    counter: u64,
    spare_normal: Option<f64>,
}

/// Build the stream for a key tuple. Pure function of its arguments.
pub fn stream_for(seed: u64, iteration: u64, mode: u32, index: u64) -> RngStream {
    RngStream::new(seed, iteration, mode, index)
}

impl RngStream {
    pub fn new(seed: u64, iteration: u64, mode: u32, index: u64) -> Self {
        let mut h = mix64(seed ^ 0x6A09_E667_F3BC_C908);
        h = mix64(h ^ iteration.wrapping_mul(GOLDEN));
        h = mix64(h ^ (u64::from(mode) | 0xA5A5_0000_0000_0000).wrapping_mul(0xD1B5_4A32_D192_ED03));
        h = mix64(h ^ index.wrapping_mul(0x8CB9_2BA7_2F3D_8DD7));
        RngStream {
            key: h,
            counter: 0,
            spare_normal: None,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key ^ mix64(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform on the open interval (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via the Marsaglia polar method.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        loop {
            let x = 2.0 * self.uniform() - 1.0;
            let y = 2.0 * self.uniform() - 1.0;
            let s = x * x + y * y;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare_normal = Some(y * f);
                return x * f;
            }
        }
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.normal();
        }
    }

    /// Gamma with shape `a` and rate `b` (mean `a / b`).
    pub fn gamma(&mut self, shape: f64, rate: f64) -> Result<f64> {
        if !(shape > 0.0 && shape.is_finite()) || !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::Domain(format!(
                "gamma requires positive finite shape and rate, got shape={shape}, rate={rate}"
            )));
        }
        Ok(self.gamma_unit(shape) / rate)
    }

    // Marsaglia-Tsang squeeze; shape < 1 is boosted through shape + 1.
    fn gamma_unit(&mut self, shape: f64) -> f64 {
        if shape < 1.0 {
            let g = self.gamma_unit(shape + 1.0);
            return g * self.uniform().powf(1.0 / shape);
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let (x, v) = loop {
                let x = self.normal();
                let v = 1.0 + c * x;
                if v > 0.0 {
                    break (x, v * v * v);
                }
            };
            let u = self.uniform();
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 {
                return d * v;
            }
            if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
                return d * v;
            }
        }
    }

    /// Chi-square with `dof` degrees of freedom.
    pub fn chi_square(&mut self, dof: f64) -> Result<f64> {
        Ok(2.0 * self.gamma(0.5 * dof, 1.0)?)
    }

    pub fn beta(&mut self, a: f64, b: f64) -> Result<f64> {
        let x = self.gamma(a, 1.0)?;
        let y = self.gamma(b, 1.0)?;
        let s = x + y;
        if s > 0.0 {
            Ok(x / s)
        } else {
            // both underflowed (tiny shapes); fall back on the mean
            Ok(a / (a + b))
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> Result<bool> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!(
                "bernoulli probability must lie in [0, 1], got {p}"
            )));
        }
        Ok(self.uniform() < p)
    }
}
