//! Latent factor storage: one `K`-vector per entity, stored contiguously.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct FactorMatrix {
    k: usize,
    n: usize,
    data: Vec<f64>,
}

impl FactorMatrix {
    pub fn zeros(k: usize, n: usize) -> Self {
        FactorMatrix {
            k,
            n,
            data: vec![0.0; k * n],
        }
    }

    /// `data` holds entity vectors back to back (`K × N`, column-major).
    pub fn from_vec(k: usize, n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != k * n {
            return Err(Error::Data(format!(
                "factor matrix {k}x{n} needs {} values, got {}",
                k * n,
                data.len()
            )));
        }
        Ok(FactorMatrix { k, n, data })
    }

    pub fn num_latent(&self) -> usize {
        self.k
    }

    pub fn n_entities(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn col(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    #[inline]
    pub fn col_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `u_iᵀ v_j`
    #[inline]
    pub fn dot(&self, i: usize, other: &FactorMatrix, j: usize) -> f64 {
        self.col(i).iter().zip(other.col(j)).map(|(a, b)| a * b).sum()
    }

    /// Position of the first non-finite value as `(entity, component)`.
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|p| (p / self.k, p % self.k))
    }
}
