//! Univariate nonstationary growth model.
//!
//! ```text
//! z_n = alpha z_{n-1} + beta z_{n-1} / (1 + z_{n-1}^2) + gamma cos(1.2 (n - 1)) + w_n
//! d_n = z_n^2 / 20 + v_n
//! ```

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ssm::{NoiseSpec, StateSpaceModel, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UngmParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub process_var: f64,
    pub obs_var: f64,
    pub z0_mean: f64,
    pub z0_var: f64,
}

impl Default for UngmParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 25.0,
            gamma: 8.0,
            process_var: 1.0,
            obs_var: 1.0,
            z0_mean: 0.0,
            z0_var: 1.0,
        }
    }
}

impl UngmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.process_var > 0.0 && self.obs_var > 0.0) {
            return Err(Error::InvalidConfig(
                "UNGM process_var and obs_var must be positive".into(),
            ));
        }
        if self.z0_var < 0.0 {
            return Err(Error::InvalidConfig("UNGM z0_var must be >= 0".into()));
        }
        Ok(())
    }

    pub fn noise(&self) -> Result<NoiseSpec> {
        NoiseSpec::new(self.process_var, self.obs_var)
    }
}

/// Deterministic part `f(z_{n-1}, n)` of the transition.
pub fn ungm_drift(z_prev: f64, n: usize, params: &UngmParams) -> f64 {
    params.alpha * z_prev
        + params.beta * z_prev / (1.0 + z_prev * z_prev)
        + params.gamma * (1.2 * (n as f64 - 1.0)).cos()
}

/// Draws `z_n` given `z_{n-1}`; `n >= 1`.
pub fn ungm_process<R: Rng + ?Sized>(z_prev: f64, n: usize, params: &UngmParams, rng: &mut R) -> f64 {
    let w: f64 = rng.sample(StandardNormal);
    ungm_drift(z_prev, n, params) + params.process_var.sqrt() * w
}

/// Noiseless observation `z^2 / 20`.
pub fn ungm_observe(z: f64) -> f64 {
    z * z / 20.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct UngmTrajectory {
    pub states: Vec<f64>,
    pub observations: Vec<f64>,
}

impl UngmTrajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// CSV with columns `n,z,d`, `n` starting at 1.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        w.write_record(["n", "z", "d"])?;
        for (i, (z, d)) in self.states.iter().zip(&self.observations).enumerate() {
            w.write_record([(i + 1).to_string(), z.to_string(), d.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Ground truth `z_1..z_N` and observations `d_1..d_N` starting from
/// `z_0 ~ N(z0_mean, z0_var)`. Zero variances are honoured exactly.
pub fn generate_trajectory(params: &UngmParams, steps: usize, seed: u64) -> Result<UngmTrajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_trajectory_with(params, steps, &mut rng)
}

pub fn generate_trajectory_with<R: Rng + ?Sized>(
    params: &UngmParams,
    steps: usize,
    rng: &mut R,
) -> Result<UngmTrajectory> {
    if steps == 0 {
        return Err(Error::InvalidConfig("trajectory length must be >= 1".into()));
    }
    if params.process_var < 0.0 || params.obs_var < 0.0 || params.z0_var < 0.0 {
        return Err(Error::InvalidConfig("UNGM variances must be >= 0".into()));
    }
    let mut z = params.z0_mean + params.z0_var.sqrt() * rng.sample::<f64, _>(StandardNormal);
    let mut states = Vec::with_capacity(steps);
    let mut observations = Vec::with_capacity(steps);
    for n in 1..=steps {
        z = ungm_process(z, n, params, rng);
        let v: f64 = rng.sample(StandardNormal);
        states.push(z);
        observations.push(ungm_observe(z) + params.obs_var.sqrt() * v);
    }
    Ok(UngmTrajectory { states, observations })
}

/// [`StateSpaceModel`] binding of the UNGM. The observation needs no exogenous input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UngmModel {
    pub params: UngmParams,
}

impl UngmModel {
    pub fn new(params: UngmParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }
}

impl StateSpaceModel for UngmModel {
    type Input = ();

    fn state_dim(&self) -> usize {
        1
    }

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> StateVector {
        let n: f64 = rng.sample(StandardNormal);
        StateVector::scalar(self.params.z0_mean + self.params.z0_var.sqrt() * n)
    }

    fn process_step<R: Rng + ?Sized>(&self, z: &mut StateVector, n: usize, rng: &mut R) {
        z[0] = ungm_process(z[0], n, &self.params, rng);
    }

    fn predict_obs(&self, z: &StateVector, _input: &()) -> f64 {
        ungm_observe(z[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn noiseless() -> UngmParams {
        UngmParams {
            process_var: 0.0,
            obs_var: 0.0,
            z0_var: 0.0,
            ..UngmParams::default()
        }
    }

    #[test]
    fn drift_examples() {
        let p = UngmParams::default();
        assert_eq!(ungm_drift(0.0, 1, &p), 8.0);
        assert_abs_diff_eq!(ungm_drift(1.0, 1, &p), 21.0, epsilon = 1e-14);
        // beta term vanishes for large |z|: slope tends to alpha
        let big = 1e8;
        let slope = (ungm_drift(2.0 * big, 1, &p) - ungm_drift(big, 1, &p)) / big;
        assert_abs_diff_eq!(slope, p.alpha, epsilon = 1e-9);
    }

    #[test]
    fn observation_examples() {
        assert_eq!(ungm_observe(0.0), 0.0);
        assert_abs_diff_eq!(ungm_observe(20f64.sqrt()), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ungm_observe(-(20f64.sqrt())), 1.0, epsilon = 1e-15);
        assert_eq!(ungm_observe(10.0), 5.0);
        for z in [0.3, 1.7, 12.5, 1e3] {
            assert_eq!(ungm_observe(z), ungm_observe(-z));
        }
    }

    #[test]
    fn deterministic_trajectory() {
        let t = generate_trajectory(&noiseless(), 2, 0).unwrap();
        assert_eq!(t.states[0], 8.0);
        assert_abs_diff_eq!(t.observations[0], 3.2, epsilon = 1e-15);
        let z2 = 0.5 * 8.0 + 25.0 * 8.0 / 65.0 + 8.0 * 1.2f64.cos();
        assert_abs_diff_eq!(t.states[1], z2, epsilon = 1e-13);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let p = UngmParams::default();
        assert_eq!(
            generate_trajectory(&p, 500, 7).unwrap(),
            generate_trajectory(&p, 500, 7).unwrap()
        );
        assert_ne!(
            generate_trajectory(&p, 500, 7).unwrap(),
            generate_trajectory(&p, 500, 8).unwrap()
        );
    }

    #[test]
    fn trajectory_stays_in_expected_band() {
        let t = generate_trajectory(&UngmParams::default(), 100, 1).unwrap();
        assert_eq!(t.len(), 100);
        let peak = t.states.iter().fold(0.0f64, |m, z| m.max(z.abs()));
        assert!(peak > 5.0 && peak < 30.0, "peak {peak}");
        assert!(t.states.iter().any(|&z| z > 0.0) && t.states.iter().any(|&z| z < 0.0));
    }

    #[test]
    fn process_noise_moments() {
        // Residuals of the process equation are the w_n draws.
        let p = UngmParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut z = 0.0;
        let (mut sum, mut sq) = (0.0, 0.0);
        let count = 1_000_000;
        for n in 1..=count {
            let next = ungm_process(z, n, &p, &mut rng);
            let w = next - ungm_drift(z, n, &p);
            sum += w;
            sq += w * w;
            z = next;
        }
        let mean = sum / count as f64;
        let var = sq / count as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn zero_length_rejected() {
        assert!(generate_trajectory(&UngmParams::default(), 0, 0).is_err());
    }

    #[test]
    fn csv_layout() {
        let t = generate_trajectory(&noiseless(), 2, 0).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("n,z,d"));
        assert_eq!(lines.next(), Some("1,8,3.2"));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn model_binding_time_update_from_zero() {
        let model = UngmModel::new(UngmParams {
            process_var: 1e-300,
            ..UngmParams::default()
        })
        .unwrap();
        let mut z = StateVector::scalar(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        model.process_step(&mut z, 1, &mut rng);
        assert_abs_diff_eq!(z[0], 8.0, epsilon = 1e-100);
        assert_abs_diff_eq!(model.predict_obs(&StateVector::scalar(10.0), &()), 5.0);
    }
}
