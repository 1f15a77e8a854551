//! Stand-alone scalar Gaussian particle filter for the UNGM.
//!
//! Written without any of the generic filter machinery so it can serve as an
//! independent cross-check of [`crate::epfes`] in its GPF configuration. It
//! consumes the random stream in the same order: `L` initial draws, `L`
//! process draws, then per step `L` posterior draws followed by `L` process
//! draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::epfes::ScatterWeighting;
use crate::ungm::UngmParams;

#[derive(Debug, Clone)]
pub struct ScalarGpf {
    params: UngmParams,
    cov_regularization: f64,
    scatter: ScatterWeighting,
    particles: Vec<f64>,
    n: usize,
    rng: ChaCha8Rng,
}

impl ScalarGpf {
    pub fn new(
        params: UngmParams,
        num_particles: usize,
        cov_regularization: f64,
        scatter: ScatterWeighting,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z0_sd = params.z0_var.sqrt();
        let mut particles: Vec<f64> = (0..num_particles)
            .map(|_| params.z0_mean + z0_sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut filter = Self {
            params,
            cov_regularization,
            scatter,
            particles: Vec::new(),
            n: 0,
            rng,
        };
        filter.propagate(&mut particles);
        filter.particles = particles;
        filter
    }

    fn propagate(&mut self, particles: &mut [f64]) {
        self.n += 1;
        let p = self.params;
        let arg = 1.2 * (self.n as f64 - 1.0);
        let w_sd = p.process_var.sqrt();
        for z in particles.iter_mut() {
            let prev = *z;
            let drift = p.alpha * prev + p.beta * prev / (1.0 + prev * prev) + p.gamma * arg.cos();
            *z = drift + w_sd * self.rng.sample::<f64, _>(StandardNormal);
        }
    }

    /// Processes observation `d_n` and returns the posterior mean for step `n`.
    pub fn step(&mut self, d: f64) -> f64 {
        let two_var = 2.0 * self.params.obs_var;
        let log_lik: Vec<f64> = self
            .particles
            .iter()
            .map(|&z| {
                let r = d - z * z / 20.0;
                -(r * r) / two_var
            })
            .collect();
        let peak = log_lik.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut weights: Vec<f64> = log_lik.iter().map(|&l| (l - peak).exp()).collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }

        let mut mean = 0.0;
        for (&w, &z) in weights.iter().zip(&self.particles) {
            mean += w * z;
        }
        let var = match self.scatter {
            ScatterWeighting::Unweighted => {
                let mut acc = 0.0;
                for &z in &self.particles {
                    acc += (z - mean) * (z - mean);
                }
                acc / self.particles.len() as f64
            }
            ScatterWeighting::Weighted => {
                let mut acc = 0.0;
                for (&w, &z) in weights.iter().zip(&self.particles) {
                    let dev = z - mean;
                    acc += (w * dev) * dev;
                }
                acc
            }
        } + self.cov_regularization;
        let sd = var.sqrt();

        let mut fresh = vec![0.0; self.particles.len()];
        for z in &mut fresh {
            *z = mean + sd * self.rng.sample::<f64, _>(StandardNormal);
        }
        self.propagate(&mut fresh);
        self.particles = fresh;
        mean
    }
}
