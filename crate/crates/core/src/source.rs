//! Unit-variance Gaussian sources.
//!
//! The correlated model couples samples in disjoint pairs only:
//! `S[2k+1] = rho * S[2k] + sqrt(1 - rho^2) * Z[2k]`, with every pair
//! independent of the others.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SourceKind {
    Memoryless,
    PairCorrelated { rho: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceModel {
    pub kind: SourceKind,
    pub seed: u64,
}

impl SourceModel {
    pub fn memoryless(seed: u64) -> Self {
        SourceModel {
            kind: SourceKind::Memoryless,
            seed,
        }
    }

    pub fn pair_correlated(rho: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::InvalidParameter(format!(
                "correlation factor {rho} outside [0, 1]"
            )));
        }
        Ok(SourceModel {
            kind: SourceKind::PairCorrelated { rho },
            seed,
        })
    }

    pub fn rho(&self) -> f64 {
        match self.kind {
            SourceKind::Memoryless => 0.0,
            SourceKind::PairCorrelated { rho } => rho,
        }
    }

    /// Draws `n_samples` from this model's own seed stream (`index` selects
    /// the block).
    pub fn draw_block(&self, n_samples: usize, index: u64) -> Result<Vec<f64>> {
        let mut rng = stream_rng(self.seed, Stream::Source, index);
        self.draw_with(&mut rng, n_samples)
    }

    /// Draws `n_samples` from an external generator.
    pub fn draw_with<R: Rng + ?Sized>(&self, rng: &mut R, n_samples: usize) -> Result<Vec<f64>> {
        match self.kind {
            SourceKind::Memoryless => Ok((0..n_samples)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect()),
            SourceKind::PairCorrelated { rho } => {
                if !n_samples.is_multiple_of(2) {
                    return Err(Error::InvalidParameter(format!(
                        "pair-correlated source needs an even block length, got {n_samples}"
                    )));
                }
                let c = (1.0 - rho * rho).max(0.0).sqrt();
                let mut out = Vec::with_capacity(n_samples);
                for _ in 0..n_samples / 2 {
                    let s0: f64 = rng.sample(StandardNormal);
                    let z: f64 = rng.sample(StandardNormal);
                    out.push(s0);
                    out.push(rho * s0 + c * z);
                }
                Ok(out)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(x: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        (mean, var)
    }

    fn pair_corr(x: &[f64], offset: usize) -> f64 {
        let a: Vec<f64> = x[offset..].chunks_exact(2).map(|p| p[0]).collect();
        let b: Vec<f64> = x[offset..].chunks_exact(2).map(|p| p[1]).collect();
        let (ma, va) = moments(&a);
        let (mb, vb) = moments(&b);
        let cov = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / a.len() as f64;
        cov / (va * vb).sqrt()
    }

    #[test]
    fn pair_correlation_matches_rho() {
        let n = 1_000_000;
        let rho = std::f64::consts::FRAC_1_SQRT_2;
        let x = SourceModel::pair_correlated(rho, 11).unwrap().draw_block(n, 0).unwrap();
        assert!((pair_corr(&x, 0) - rho).abs() < 0.003);
        let x0 = SourceModel::pair_correlated(0.0, 12).unwrap().draw_block(n, 0).unwrap();
        assert!(pair_corr(&x0, 0).abs() < 3.0 / ((n / 2) as f64).sqrt());
    }

    #[test]
    fn unit_moments_and_independent_pairs() {
        let n = 400_000;
        let tol = 4.0 / (n as f64).sqrt();
        for rho in [0.0, 0.5, 0.9, 1.0] {
            let x = SourceModel::pair_correlated(rho, 5).unwrap().draw_block(n, 1).unwrap();
            let (m, v) = moments(&x);
            assert!(m.abs() < tol, "rho {rho}: mean {m}");
            assert!((v - 1.0).abs() < 2.0 * tol, "rho {rho}: var {v}");
            // (S1, S2) straddles two pairs
            let cross = pair_corr(&x[..n - 2], 1);
            assert!(cross.abs() < 4.0 / ((n / 2) as f64).sqrt(), "rho {rho}: cross {cross}");
        }
        let x = SourceModel::memoryless(5).draw_block(n, 0).unwrap();
        let (m, v) = moments(&x);
        assert!(m.abs() < tol && (v - 1.0).abs() < 2.0 * tol);
    }

    #[test]
    fn fully_correlated_pairs_repeat() {
        let x = SourceModel::pair_correlated(1.0, 3).unwrap().draw_block(100, 0).unwrap();
        for p in x.chunks_exact(2) {
            assert_eq!(p[0], p[1]);
        }
    }

    #[test]
    fn reproducible_and_validated() {
        let m = SourceModel::memoryless(9);
        assert_eq!(m.draw_block(10, 2).unwrap(), m.draw_block(10, 2).unwrap());
        assert_ne!(m.draw_block(10, 2).unwrap(), m.draw_block(10, 3).unwrap());
        let p = SourceModel::pair_correlated(0.3, 1).unwrap();
        assert!(p.draw_block(5, 0).is_err());
        assert!(SourceModel::pair_correlated(1.5, 1).is_err());
    }
}
