//! Walker/Vose alias tables for O(1) sampling from a fixed discrete distribution.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AliasError {
    #[error("distribution has no outcomes")]
    Empty,
    #[error("weight {0} at index {1} is negative or not finite")]
    InvalidWeight(f64, usize),
    #[error("all weights are zero")]
    AllZero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<u32>,
}

impl AliasTable {
    /// Builds a table from non-negative weights (not necessarily normalized).
    pub fn new(weights: &[f64]) -> Result<Self, AliasError> {
        if weights.is_empty() {
            return Err(AliasError::Empty);
        }
        if let Some((i, &w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(AliasError::InvalidWeight(w, i));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(AliasError::AllZero);
        }
        let k = weights.len();
        let mut scaled: Vec<f64> = weights.iter().map(|w| w * k as f64 / total).collect();
        let mut prob = vec![0.0; k];
        let mut alias: Vec<u32> = (0..k as u32).collect();
        let (mut small, mut large): (Vec<usize>, Vec<usize>) =
            (0..k).partition(|&i| scaled[i] < 1.0);

        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            prob[s] = scaled[s];
            alias[s] = l as u32;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // Leftovers are 1 up to rounding.
        for i in large.into_iter().chain(small) {
            prob[i] = 1.0;
        }
        Ok(AliasTable { prob, alias })
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    pub fn prob(&self) -> &[f64] {
        &self.prob
    }

    pub fn alias(&self) -> &[u32] {
        &self.alias
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let i = rng.gen_range(0..self.prob.len());
        if rng.gen::<f64>() < self.prob[i] {
            i
        } else {
            self.alias[i] as usize
        }
    }

    /// Outcome probabilities implied by the table.
    pub fn probabilities(&self) -> Vec<f64> {
        let k = self.prob.len() as f64;
        let mut out: Vec<f64> = self.prob.iter().map(|p| p / k).collect();
        for (i, &p) in self.prob.iter().enumerate() {
            out[self.alias[i] as usize] += (1.0 - p) / k;
        }
        out
    }
}
