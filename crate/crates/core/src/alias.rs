//! Vose alias method: O(n) construction, O(1) weighted sampling.

use crate::error::{Error, Result};
use rand::Rng;

#[derive(Debug, Clone)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<u32>,
}

impl AliasTable {
    /// Build from non-negative weights; at least one must be positive.
    pub fn new(weights: &[f64]) -> Result<AliasTable> {
        let n = weights.len();
        let total: f64 = weights.iter().sum();
        if n == 0 || !(total > 0.0) || weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::input("alias table needs non-negative weights with positive sum"));
        }
        let mut prob = vec![0.0; n];
        let mut alias = vec![0u32; n];
        let scaled: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut small: Vec<u32> = Vec::new();
        let mut large: Vec<u32> = Vec::new();
        let mut rem = scaled.clone();
        for (i, &s) in scaled.iter().enumerate() {
            if s < 1.0 {
                small.push(i as u32);
            } else {
                large.push(i as u32);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            prob[s as usize] = rem[s as usize];
            alias[s as usize] = l;
            rem[l as usize] -= 1.0 - rem[s as usize];
            if rem[l as usize] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        for &l in &large {
            prob[l as usize] = 1.0;
        }
        for &s in &small {
            prob[s as usize] = 1.0;
        }
        Ok(AliasTable { prob, alias })
    }

    #[inline]
    pub fn sample<R: Rng>(&self, rng: &mut R) -> u32 {
        let n = self.prob.len();
        let i = rng.random_range(0..n);
        if rng.random::<f64>() < self.prob[i] {
            i as u32
        } else {
            self.alias[i]
        }
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    fn empirical_tv(weights: &[f64], draws: usize, seed: u64) -> f64 {
        let table = AliasTable::new(weights).unwrap();
        let mut rng = rng_from(seed, &[0]);
        let mut counts = vec![0u64; weights.len()];
        for _ in 0..draws {
            counts[table.sample(&mut rng) as usize] += 1;
        }
        let total: f64 = weights.iter().sum();
        let mut tv = 0.0;
        for (c, w) in counts.iter().zip(weights) {
            tv += (*c as f64 / draws as f64 - w / total).abs();
        }
        tv / 2.0
    }

    #[test]
    fn frequencies_match_weights() {
        let tv = empirical_tv(&[2.0, 1.0, 1.0, 0.0, 5.0], 1_000_000, 11);
        assert!(tv < 0.005, "tv = {tv}");
    }

    #[test]
    fn zero_weight_never_drawn() {
        let table = AliasTable::new(&[1.0, 0.0, 1.0]).unwrap();
        let mut rng = rng_from(3, &[]);
        for _ in 0..10_000 {
            assert_ne!(table.sample(&mut rng), 1);
        }
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(AliasTable::new(&[]).is_err());
        assert!(AliasTable::new(&[0.0, 0.0]).is_err());
        assert!(AliasTable::new(&[1.0, -0.5]).is_err());
    }
}
