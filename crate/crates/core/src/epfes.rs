//! Elitist particle filter based on evolutionary strategies.
//!
//! One filter step runs five stages in order:
//!
//! 1. recursive long-term fitness update and softmax weights,
//! 2. elitist selection against a threshold,
//! 3. Gaussian posterior fit (over the elitists, or over all particles when
//!    none were selected),
//! 4. innovation: every non-elitist is replaced by a draw from the posterior,
//! 5. time update of the refilled population through the process model.
//!
//! With [`ThresholdMode::FixedOne`] no particle can be elitist, every particle
//! is redrawn each step and the filter is the Gaussian particle filter.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ssm::{NoiseSpec, ParticleSet, StateSpaceModel, StateVector};

/// Default diagonal loading of the posterior covariance.
pub const DEFAULT_COV_REGULARIZATION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    /// Threshold is the average normalized weight, `(1/L) * sum(w)`.
    AdaptiveMean,
    /// Threshold 1: selection disabled.
    FixedOne,
}

/// How the posterior covariance weighs the contributing particles.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScatterWeighting {
    /// `(1/K) sum (z - mean)(z - mean)^T` over the `K` contributing particles.
    #[default]
    Unweighted,
    /// `sum w (z - mean)(z - mean)^T` with the normalized weights used for the mean.
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpfesConfig {
    pub num_particles: usize,
    /// Smoothing factor of the long-term fitness, in `[0, 1)`.
    pub lambda: f64,
    pub threshold_mode: ThresholdMode,
    pub cov_regularization: f64,
    #[serde(default)]
    pub scatter: ScatterWeighting,
    pub seed: u64,
}

impl EpfesConfig {
    pub fn epfes(num_particles: usize, lambda: f64, seed: u64) -> Self {
        Self {
            num_particles,
            lambda,
            threshold_mode: ThresholdMode::AdaptiveMean,
            cov_regularization: DEFAULT_COV_REGULARIZATION,
            scatter: ScatterWeighting::Unweighted,
            seed,
        }
    }

    /// Gaussian particle filter configuration.
    pub fn gpf(num_particles: usize, seed: u64) -> Self {
        Self {
            num_particles,
            lambda: 0.0,
            threshold_mode: ThresholdMode::FixedOne,
            cov_regularization: DEFAULT_COV_REGULARIZATION,
            scatter: ScatterWeighting::Unweighted,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_particles == 0 {
            return Err(Error::InvalidConfig("num_particles must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(Error::InvalidConfig(format!(
                "lambda must lie in [0, 1), got {}",
                self.lambda
            )));
        }
        if !(self.cov_regularization >= 0.0 && self.cov_regularization.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "cov_regularization must be finite and >= 0, got {}",
                self.cov_regularization
            )));
        }
        Ok(())
    }

    /// Smoothing factor actually applied. The GPF has no surviving particles,
    /// so its fitness carries no history and lambda is pinned to zero.
    pub fn effective_lambda(&self) -> f64 {
        match self.threshold_mode {
            ThresholdMode::AdaptiveMean => self.lambda,
            ThresholdMode::FixedOne => 0.0,
        }
    }
}

/// Fitted Gaussian approximation of the posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPosterior {
    pub mean: StateVector,
    /// Regularized covariance.
    pub cov: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    pub elitist_indices: Vec<usize>,
    pub replaced_indices: Vec<usize>,
    pub threshold_used: f64,
}

impl SelectionOutcome {
    pub fn num_elitists(&self) -> usize {
        self.elitist_indices.len()
    }
}

/// What one filter step produced besides the advanced population.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub estimate: StateVector,
    pub num_elitists: usize,
    pub threshold: f64,
}

/// Scale `c_sigma = -2 sigma_v^2 (1 - lambda) / (1 + lambda)` of the instantaneous fitness.
pub fn fitness_scale(obs_variance: f64, lambda: f64) -> f64 {
    -2.0 * obs_variance * (1.0 - lambda) / (1.0 + lambda)
}

fn fitness_from_residual(residual: f64, scale: f64) -> f64 {
    let v = residual * residual / scale;
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Instantaneous fitness `(d - g(z))^2 / c_sigma`, never positive.
pub fn instantaneous_fitness<M: StateSpaceModel>(
    d_obs: f64,
    z: &StateVector,
    model: &M,
    input: &M::Input,
    noise: &NoiseSpec,
    lambda: f64,
) -> f64 {
    let residual = d_obs - model.predict_obs(z, input);
    fitness_from_residual(residual, fitness_scale(noise.obs_variance, lambda))
}

/// Long-term fitness recursion followed by a max-shifted softmax.
pub fn update_weights<M: StateSpaceModel>(
    set: &mut ParticleSet,
    d_obs: f64,
    model: &M,
    input: &M::Input,
    noise: &NoiseSpec,
    lambda: f64,
) -> Result<()> {
    let scale = fitness_scale(noise.obs_variance, lambda);
    let mut max = f64::NEG_INFINITY;
    for p in &mut set.particles {
        let inst = fitness_from_residual(d_obs - model.predict_obs(&p.state, input), scale);
        p.fitness_acc = if !set.has_history || lambda == 0.0 {
            inst
        } else {
            lambda * p.fitness_acc + (1.0 - lambda) * inst
        };
        if p.fitness_acc > max {
            max = p.fitness_acc;
        }
    }
    if max == f64::NEG_INFINITY {
        return Err(Error::NonFiniteResiduals { step: set.step_index });
    }
    let mut total = 0.0;
    for p in &mut set.particles {
        p.weight = (p.fitness_acc - max).exp();
        total += p.weight;
    }
    for p in &mut set.particles {
        p.weight /= total;
    }
    set.has_history = true;
    Ok(())
}

/// Splits the population into elitists (weight strictly above the threshold)
/// and particles to be replaced.
pub fn select_elitists(set: &ParticleSet, mode: ThresholdMode) -> SelectionOutcome {
    let threshold = match mode {
        ThresholdMode::AdaptiveMean => set.weight_sum() / set.len() as f64,
        ThresholdMode::FixedOne => 1.0,
    };
    let (elitist_indices, replaced_indices) = (0..set.len()).partition(|&i| set.particles[i].weight > threshold);
    SelectionOutcome {
        elitist_indices,
        replaced_indices,
        threshold_used: threshold,
    }
}

/// Weights of the elitists renormalized among themselves.
pub fn elitist_normalized_weights(set: &ParticleSet, outcome: &SelectionOutcome) -> Result<Vec<f64>> {
    if outcome.elitist_indices.is_empty() {
        return Err(Error::InvalidConfig(
            "elitist weights requested but no particle was selected".into(),
        ));
    }
    let total: f64 = outcome.elitist_indices.iter().map(|&i| set.particles[i].weight).sum();
    Ok(outcome
        .elitist_indices
        .iter()
        .map(|&i| set.particles[i].weight / total)
        .collect())
}

/// Gaussian fit: weighted mean and the scatter around it (see
/// [`ScatterWeighting`]), plus diagonal loading.
pub fn estimate_posterior(
    set: &ParticleSet,
    outcome: &SelectionOutcome,
    cov_regularization: f64,
    scatter: ScatterWeighting,
) -> Result<GaussianPosterior> {
    let dim = set.dim();
    let (indices, weights): (Vec<usize>, Vec<f64>) = if outcome.elitist_indices.is_empty() {
        ((0..set.len()).collect(), set.weights())
    } else {
        (
            outcome.elitist_indices.clone(),
            elitist_normalized_weights(set, outcome)?,
        )
    };

    let mut mean = DVector::zeros(dim);
    for (&i, &w) in indices.iter().zip(&weights) {
        mean.axpy(w, &set.particles[i].state, 1.0);
    }
    let mut cov = DMatrix::zeros(dim, dim);
    let mut diff = DVector::zeros(dim);
    for (&i, &w) in indices.iter().zip(&weights) {
        diff.copy_from(&set.particles[i].state);
        diff -= &mean;
        let alpha = match scatter {
            ScatterWeighting::Unweighted => 1.0,
            ScatterWeighting::Weighted => w,
        };
        cov.ger(alpha, &diff, &diff, 1.0);
    }
    if scatter == ScatterWeighting::Unweighted {
        cov /= indices.len() as f64;
    }
    for k in 0..dim {
        cov[(k, k)] += cov_regularization;
    }
    Ok(GaussianPosterior {
        mean: StateVector(mean),
        cov,
    })
}

/// Replaces every non-elitist by a fresh draw from the posterior and gives it
/// the instantaneous fitness against the current observation.
#[allow(clippy::too_many_arguments)]
pub fn introduce_innovation<M: StateSpaceModel, R: Rng + ?Sized>(
    set: &mut ParticleSet,
    outcome: &SelectionOutcome,
    posterior: &GaussianPosterior,
    d_obs: f64,
    model: &M,
    input: &M::Input,
    noise: &NoiseSpec,
    lambda: f64,
    rng: &mut R,
) -> Result<()> {
    if outcome.replaced_indices.is_empty() {
        return Ok(());
    }
    let dim = posterior.mean.len();
    let chol = posterior.cov.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l_dirty();
    let scale = fitness_scale(noise.obs_variance, lambda);
    let mut normals = vec![0.0; dim];
    for &idx in &outcome.replaced_indices {
        for v in normals.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let particle = &mut set.particles[idx];
        for row in 0..dim {
            let mut acc = 0.0;
            for (col, n) in normals.iter().enumerate().take(row + 1) {
                acc += l[(row, col)] * n;
            }
            particle.state[row] = posterior.mean[row] + acc;
        }
        particle.fitness_acc = fitness_from_residual(d_obs - model.predict_obs(&particle.state, input), scale);
    }
    Ok(())
}

/// Propagates every particle through the process model. Fitness is carried over.
pub fn time_update<M: StateSpaceModel, R: Rng + ?Sized>(set: &mut ParticleSet, model: &M, rng: &mut R) -> Result<()> {
    let next = set.step_index + 1;
    for p in &mut set.particles {
        model.process_step(&mut p.state, next, rng);
        if !p.state.is_finite() {
            return Err(Error::NonFiniteState { step: next });
        }
    }
    set.step_index = next;
    Ok(())
}

/// One full filter step for observation `d_obs`. Returns the state estimate
/// for the current time index; `set` is left holding the predicted particles
/// for the next index.
#[allow(clippy::too_many_arguments)]
pub fn epfes_step<M: StateSpaceModel, R: Rng + ?Sized>(
    set: &mut ParticleSet,
    d_obs: f64,
    model: &M,
    input: &M::Input,
    noise: &NoiseSpec,
    config: &EpfesConfig,
    rng: &mut R,
) -> Result<StepReport> {
    let lambda = config.effective_lambda();
    update_weights(set, d_obs, model, input, noise, lambda)?;
    let outcome = select_elitists(set, config.threshold_mode);
    let posterior = estimate_posterior(set, &outcome, config.cov_regularization, config.scatter)?;
    introduce_innovation(set, &outcome, &posterior, d_obs, model, input, noise, lambda, rng)?;
    time_update(set, model, rng)?;
    Ok(StepReport {
        estimate: posterior.mean,
        num_elitists: outcome.num_elitists(),
        threshold: outcome.threshold_used,
    })
}

/// Filter instance owning its model, population and random stream.
#[derive(Debug, Clone)]
pub struct ElitistParticleFilter<M> {
    model: M,
    noise: NoiseSpec,
    config: EpfesConfig,
    set: ParticleSet,
    rng: ChaCha8Rng,
}

impl<M: StateSpaceModel> ElitistParticleFilter<M> {
    /// Seeds the stream from `config.seed`, draws `z_0` for every particle and
    /// time-updates the population to index 1.
    pub fn new(model: M, noise: NoiseSpec, config: EpfesConfig) -> Result<Self> {
        Self::with_rng(model, noise, config, ChaCha8Rng::seed_from_u64(config.seed))
    }

    pub fn with_rng(model: M, noise: NoiseSpec, config: EpfesConfig, mut rng: ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let initial: Vec<StateVector> = (0..config.num_particles)
            .map(|_| model.sample_initial(&mut rng))
            .collect();
        let mut set = ParticleSet::from_states(initial);
        set.step_index = 0;
        time_update(&mut set, &model, &mut rng)?;
        Self::from_parts(model, noise, config, set, rng)
    }

    /// Starts from an explicit population.
    pub fn from_parts(
        model: M,
        noise: NoiseSpec,
        config: EpfesConfig,
        set: ParticleSet,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        config.validate()?;
        if set.len() != config.num_particles {
            return Err(Error::DimensionMismatch {
                expected: config.num_particles,
                actual: set.len(),
            });
        }
        if set.dim() != model.state_dim() {
            return Err(Error::DimensionMismatch {
                expected: model.state_dim(),
                actual: set.dim(),
            });
        }
        Ok(Self {
            model,
            noise,
            config,
            set,
            rng,
        })
    }

    pub fn step(&mut self, d_obs: f64, input: &M::Input) -> Result<StepReport> {
        epfes_step(
            &mut self.set,
            d_obs,
            &self.model,
            input,
            &self.noise,
            &self.config,
            &mut self.rng,
        )
    }

    pub fn particles(&self) -> &ParticleSet {
        &self.set
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn config(&self) -> &EpfesConfig {
        &self.config
    }
}
