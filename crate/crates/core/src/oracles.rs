//! Self-contained correctness checks shared by the command-line `selftest`
//! and the acceptance tests. Each check returns a [`CheckOutcome`] with the
//! measured quantity so callers can print it.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::aec::legendre::{legendre_odd, p3};
use crate::aec::nlms::FirFilter;
use crate::aec::split::SaSplit;
use crate::epfes::{
    epfes_step, estimate_posterior, select_elitists, update_weights, ElitistParticleFilter, EpfesConfig,
    ScatterWeighting, ThresholdMode,
};
use crate::error::Result;
use crate::reference::ScalarGpf;
use crate::ssm::{gaussian_log_pdf, Covariance, StateSpaceModel};
use crate::ungm::{generate_trajectory, UngmModel, UngmParams};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }

    /// `PASS name: detail` or `FAIL name: detail`.
    pub fn line(&self) -> String {
        format!(
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

/// Largest absolute difference between the estimates of the generic filter
/// in its GPF configuration and the stand-alone scalar GPF, both seeded with
/// `seed`, over a UNGM trajectory of `steps` observations.
pub fn gpf_max_deviation(steps: usize, num_particles: usize, seed: u64, scatter: ScatterWeighting) -> Result<f64> {
    let params = UngmParams::default();
    let trajectory = generate_trajectory(&params, steps, seed ^ 0xA5A5)?;
    let mut config = EpfesConfig::gpf(num_particles, seed);
    config.scatter = scatter;
    let mut generic = ElitistParticleFilter::new(UngmModel::new(params)?, params.noise()?, config)?;
    let mut scalar = ScalarGpf::new(params, num_particles, config.cov_regularization, scatter, seed);
    let mut worst = 0.0f64;
    for &d in &trajectory.observations {
        let a = generic.step(d, &())?.estimate[0];
        let b = scalar.step(d);
        let dev = (a - b).abs();
        if dev.is_nan() {
            return Ok(f64::INFINITY);
        }
        worst = worst.max(dev);
    }
    Ok(worst)
}

pub fn check_gpf_equivalence(steps: usize, seed: u64) -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    for scatter in [ScatterWeighting::Unweighted, ScatterWeighting::Weighted] {
        worst = worst.max(gpf_max_deviation(steps, 50, seed, scatter)?);
    }
    Ok(CheckOutcome::new(
        "gpf-equivalence",
        worst == 0.0,
        format!("max |generic - scalar| = {worst:e} over {steps} steps"),
    ))
}

/// Largest relative error between the filter weights with `lambda = 0` and
/// normalized Gaussian likelihoods `N(d; g(z), sigma_v^2)` computed directly.
pub fn lambda_zero_weight_error(steps: usize, num_particles: usize, seed: u64) -> Result<f64> {
    let params = UngmParams::default();
    let trajectory = generate_trajectory(&params, steps, seed ^ 0x5A5A)?;
    let model = UngmModel::new(params)?;
    let noise = params.noise()?;
    let config = EpfesConfig::epfes(num_particles, 0.0, seed);
    let mut filter = ElitistParticleFilter::new(model, noise, config)?;
    let obs_cov = Covariance::scalar(noise.obs_variance);
    let mut worst = 0.0f64;
    for &d in &trajectory.observations {
        let mut probe = filter.particles().clone();
        update_weights(&mut probe, d, &model, &(), &noise, 0.0)?;
        let log_lik: Vec<f64> = probe
            .particles
            .iter()
            .map(|p| {
                gaussian_log_pdf(
                    &DVector::from_element(1, d),
                    &DVector::from_element(1, model.predict_obs(&p.state, &())),
                    &obs_cov,
                )
            })
            .collect::<Result<_>>()?;
        let peak = log_lik.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = log_lik.iter().map(|l| (l - peak).exp()).sum();
        for (p, l) in probe.particles.iter().zip(&log_lik) {
            let reference = (l - peak).exp() / total;
            if reference > 0.0 {
                worst = worst.max((p.weight - reference).abs() / reference);
            } else if p.weight != 0.0 {
                worst = f64::INFINITY;
            }
        }
        filter.step(d, &())?;
    }
    Ok(worst)
}

pub fn check_lambda_zero_weights(steps: usize, seed: u64) -> Result<CheckOutcome> {
    let worst = lambda_zero_weight_error(steps, 50, seed)?;
    Ok(CheckOutcome::new(
        "lambda-zero-weights",
        worst < 1e-10,
        format!("max relative weight error = {worst:e} over {steps} steps"),
    ))
}

pub fn check_legendre() -> CheckOutcome {
    let mut ok = true;
    for order in [3, 5, 7] {
        let at_one = legendre_odd(1.0, order).unwrap_or(f64::NAN);
        ok &= at_one == 1.0;
        for x in [0.1, 0.37, 0.5, 0.9] {
            let (a, b) = (legendre_odd(x, order), legendre_odd(-x, order));
            ok &= matches!((a, b), (Ok(a), Ok(b)) if a == -b);
        }
    }
    ok &= p3(0.5) == -0.4375;
    ok &= legendre_odd(0.5, 4).is_err();
    CheckOutcome::new(
        "legendre",
        ok,
        "P_n(1) = 1, odd symmetry, P_3(0.5) = -0.4375, even order rejected".into(),
    )
}

/// Population invariants over a UNGM run: weights sum to one, every particle
/// is either elitist or replaced, the threshold-1 filter never keeps an
/// elitist, and the regularized covariance always factors.
pub fn check_population_invariants(steps: usize, seed: u64) -> Result<CheckOutcome> {
    let params = UngmParams::default();
    let trajectory = generate_trajectory(&params, steps, seed ^ 0x3C3C)?;
    let model = UngmModel::new(params)?;
    let noise = params.noise()?;
    let mut worst_norm = 0.0f64;
    let mut ok = true;
    for config in [EpfesConfig::epfes(20, 0.7, seed), EpfesConfig::gpf(20, seed)] {
        let filter = ElitistParticleFilter::new(model, noise, config)?;
        let mut set = filter.particles().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for &d in &trajectory.observations {
            let mut probe = set.clone();
            update_weights(&mut probe, d, &model, &(), &noise, config.effective_lambda())?;
            worst_norm = worst_norm.max((probe.weight_sum() - 1.0).abs());
            let outcome = select_elitists(&probe, config.threshold_mode);
            ok &= outcome.elitist_indices.len() + outcome.replaced_indices.len() == probe.len();
            if config.threshold_mode == ThresholdMode::FixedOne {
                ok &= outcome.elitist_indices.is_empty();
            }
            let posterior = estimate_posterior(&probe, &outcome, config.cov_regularization, config.scatter)?;
            ok &= posterior.cov.clone().cholesky().is_some();
            epfes_step(&mut set, d, &model, &(), &noise, &config, &mut rng)?;
        }
    }
    ok &= worst_norm < 1e-12;
    Ok(CheckOutcome::new(
        "population-invariants",
        ok,
        format!("max |sum w - 1| = {worst_norm:e}; Q + R = L; threshold 1 keeps no elitist; covariance factors"),
    ))
}

/// Split reconstruction and the NLMS projection identity on random data.
pub fn check_aec_invariants(seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ok = true;
    let len = 64;
    let taps: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
    for (peak, half) in [(10, 3), (2, 2), (59, 4), (30, 0)] {
        let split = SaSplit::new(peak, half, len)?;
        ok &= split.merge(split.direct(&taps), &split.complement(&taps)) == taps;
    }
    let mu = 0.5;
    // Zero regularization: the identity is exact only in the eps -> 0 limit.
    let mut fir = FirFilter {
        taps: vec![0.0; 16],
        stepsize: mu,
        eps: 0.0,
    };
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let y: Vec<f64> = (0..16).map(|_| rng.sample(StandardNormal)).collect();
        let d: f64 = rng.sample(StandardNormal);
        let e = fir.nlms_update(&y, d);
        let after = d - fir.output(&y);
        worst = worst.max((after - (1.0 - mu) * e).abs() / e.abs().max(1e-300));
    }
    ok &= worst < 1e-12;
    Ok(CheckOutcome::new(
        "aec-invariants",
        ok,
        format!("split partitions reconstruct; NLMS projection relative error = {worst:e}"),
    ))
}

/// Two runs of the same seeded filter give bit-identical estimates.
pub fn check_determinism(steps: usize, seed: u64) -> Result<CheckOutcome> {
    let params = UngmParams::default();
    let trajectory = generate_trajectory(&params, steps, seed)?;
    let run = || -> Result<Vec<f64>> {
        let mut f = ElitistParticleFilter::new(
            UngmModel::new(params)?,
            params.noise()?,
            EpfesConfig::epfes(30, 0.7, seed),
        )?;
        trajectory
            .observations
            .iter()
            .map(|&d| Ok(f.step(d, &())?.estimate[0]))
            .collect()
    };
    let same = run()? == run()?;
    Ok(CheckOutcome::new(
        "determinism",
        same,
        format!("two seeded runs of {steps} steps compared"),
    ))
}

/// Everything the command-line `selftest` runs.
pub fn run_all(seed: u64) -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        check_gpf_equivalence(1000, seed)?,
        check_lambda_zero_weights(1000, seed)?,
        check_legendre(),
        check_population_invariants(500, seed)?,
        check_aec_invariants(seed)?,
        check_determinism(300, seed)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_passes() {
        for outcome in run_all(17).unwrap() {
            assert!(outcome.passed, "{}", outcome.line());
        }
    }

    #[test]
    fn outcome_line_format() {
        let c = CheckOutcome::new("x", false, "why".into());
        assert_eq!(c.line(), "FAIL x: why");
    }
}
