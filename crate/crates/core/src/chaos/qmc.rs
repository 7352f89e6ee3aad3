//! Randomly shifted Sobol quadrature on the unit cube.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sobol::params::JoeKuoD6;
use sobol::Sobol;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QmcOptions {
    pub points_per_replicate: usize,
    /// Independent Cranley-Patterson shifts; the spread of their means gives the standard error.
    pub replicates: usize,
    pub seed: u64,
}

impl Default for QmcOptions {
    fn default() -> Self {
        Self {
            points_per_replicate: 1 << 16,
            replicates: 16,
            seed: 0x5eed_c4a0,
        }
    }
}

impl QmcOptions {
    pub fn total_points(&self) -> usize {
        self.points_per_replicate * self.replicates
    }

    /// Same replicate structure with `factor` times as many points per replicate.
    pub fn scaled(&self, factor: usize) -> Self {
        Self {
            points_per_replicate: self.points_per_replicate * factor,
            ..*self
        }
    }
}

/// Mean over shifted replicates and its standard error.
pub(crate) fn integrate<F: Fn(&[f64]) -> f64 + Sync>(
    dims: usize,
    opts: &QmcOptions,
    f: F,
) -> (f64, f64) {
    let n = opts.points_per_replicate.max(1);
    let points: Vec<Vec<f64>> = Sobol::<f64>::new(dims, &JoeKuoD6::minimal())
        .take(n)
        .collect();
    let means: Vec<f64> = (0..opts.replicates.max(2))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(r as u64);
            let shift: Vec<f64> = (0..dims).map(|_| rng.gen::<f64>()).collect();
            let mut u = vec![0.0; dims];
            let mut acc = 0.0;
            for x in &points {
                for d in 0..dims {
                    let v = x[d] + shift[d];
                    u[d] = if v >= 1.0 { v - 1.0 } else { v };
                }
                acc += f(&u);
            }
            acc / n as f64
        })
        .collect();
    let m = means.len() as f64;
    let mean = means.iter().sum::<f64>() / m;
    let var = means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Symmetric density `eps/(2s) (1 + |x|/s)^(-1-eps)` with heavy algebraic tails.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ParetoLine {
    pub scale: f64,
    pub eps: f64,
}

impl ParetoLine {
    /// Sample and density at the sample.
    pub fn sample(&self, u: f64) -> (f64, f64) {
        let v = (2.0 * u - 1.0).abs().min(1.0 - 1e-16);
        let r = self.scale * ((1.0 - v).powf(-1.0 / self.eps) - 1.0);
        let x = if u < 0.5 { -r } else { r };
        let pdf = self.eps / (2.0 * self.scale) * (1.0 + r / self.scale).powf(-1.0 - self.eps);
        (x, pdf)
    }
}
