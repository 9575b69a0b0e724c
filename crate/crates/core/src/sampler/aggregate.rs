use std::collections::HashMap;

use crate::data::TestSet;
use crate::error::{Error, Result};

/// Streaming posterior mean and spread of the predictions at each test cell.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionAggregate {
    cells: Vec<(usize, usize)>,
    truth: Vec<f64>,
    mean: Vec<f64>,
    m2: Vec<f64>,
    count: u64,
    index: HashMap<(usize, usize), usize>,
}

impl PredictionAggregate {
    pub fn new(test: &TestSet) -> Self {
        let cells: Vec<(usize, usize)> = test.entries().iter().map(|&(i, j, _)| (i, j)).collect();
        let index = cells.iter().enumerate().map(|(p, &c)| (c, p)).collect();
        PredictionAggregate {
            truth: test.entries().iter().map(|e| e.2).collect(),
            mean: vec![0.0; cells.len()],
            m2: vec![0.0; cells.len()],
            cells,
            count: 0,
            index,
        }
    }

    /// Restore from saved running moments.
    pub fn from_parts(test: &TestSet, mean: Vec<f64>, m2: Vec<f64>, count: u64) -> Result<Self> {
        let mut agg = Self::new(test);
        if mean.len() != agg.cells.len() || m2.len() != agg.cells.len() {
            return Err(Error::Data(format!(
                "aggregate has {} cells, test set has {}",
                mean.len(),
                agg.cells.len()
            )));
        }
        agg.mean = mean;
        agg.m2 = m2;
        agg.count = count;
        Ok(agg)
    }

    /// Fold in one sample's predictions, ordered as the test set.
    pub fn update(&mut self, predictions: &[f64]) {
        debug_assert_eq!(predictions.len(), self.mean.len());
        self.count += 1;
        let n = self.count as f64;
        for ((m, q), &x) in self.mean.iter_mut().zip(&mut self.m2).zip(predictions) {
            let delta = x - *m;
            *m += delta / n;
            *q += delta * (x - *m);
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }

    pub fn truth(&self) -> &[f64] {
        &self.truth
    }

    pub fn means(&self) -> &[f64] {
        &self.mean
    }

    pub fn m2(&self) -> &[f64] {
        &self.m2
    }

    fn std_at(&self, p: usize) -> f64 {
        if self.count > 1 {
            (self.m2[p] / (self.count - 1) as f64).sqrt()
        } else {
            0.0
        }
    }

    /// Posterior mean and sample standard deviation at a test cell.
    pub fn predict(&self, i: usize, j: usize) -> Result<(f64, f64)> {
        if self.count == 0 {
            return Err(Error::Data("no samples collected yet".into()));
        }
        let p = *self
            .index
            .get(&(i, j))
            .ok_or_else(|| Error::Data(format!("({i}, {j}) is not a test cell")))?;
        Ok((self.mean[p], self.std_at(p)))
    }

    pub fn stds(&self) -> Vec<f64> {
        (0..self.cells.len()).map(|p| self.std_at(p)).collect()
    }

    /// RMSE of the aggregate mean against the true test values.
    pub fn rmse(&self) -> Result<f64> {
        if self.cells.is_empty() {
            return Err(Error::Data("RMSE requested on an empty test set".into()));
        }
        if self.count == 0 {
            return Err(Error::Data("no samples collected yet".into()));
        }
        Ok(rmse_of(&self.mean, &self.truth))
    }
}

pub(crate) fn rmse_of(pred: &[f64], truth: &[f64]) -> f64 {
    let sse: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    (sse / pred.len() as f64).sqrt()
}
