//! Ornstein-Uhlenbeck consumption noise.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

/// Exact update over `dt`:
/// `xi' = xi e^(-dt/tau) + sigma sqrt(1 - e^(-2 dt/tau)) N(0, 1)`.
pub fn ou_step<R: RngCore>(xi: f64, sigma: f64, tau: f64, dt: f64, rng: &mut R) -> f64 {
    let decay = libm::exp(-dt / tau);
    let z: f64 = StandardNormal.sample(rng);
    xi * decay + sigma * libm::sqrt(1.0 - decay * decay) * z
}

/// One OU process per node with its own stream.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRealization {
    pub xi: Vec<f64>,
    pub sigma: Vec<f64>,
    pub tau: Vec<f64>,
    rng: ChaCha8Rng,
}

impl NoiseRealization {
    /// Started from the stationary distribution `N(0, sigma^2)`.
    pub fn new(sigma: Vec<f64>, tau: Vec<f64>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xi = sigma
            .iter()
            .map(|&s| {
                let z: f64 = StandardNormal.sample(&mut rng);
                s * z
            })
            .collect();
        Self {
            xi,
            sigma,
            tau,
            rng,
        }
    }

    /// No fluctuations at all.
    pub fn quiet(nodes: usize) -> Self {
        Self {
            xi: vec![0.0; nodes],
            sigma: vec![0.0; nodes],
            tau: vec![1.0; nodes],
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }

    pub fn advance(&mut self, dt: f64) {
        for i in 0..self.xi.len() {
            if self.sigma[i] > 0.0 {
                self.xi[i] = ou_step(self.xi[i], self.sigma[i], self.tau[i], dt, &mut self.rng);
            }
        }
    }
}
