//! State-space model primitives shared by every filter and benchmark system.
//!
//! A model is bound to the filter through [`StateSpaceModel`]: a stochastic
//! process step `z_n = f(z_{n-1}) + w_n` and a deterministic observation
//! predictor `g(z_n, x_n)`. Observations are scalar.

use std::f64::consts::PI;
use std::ops::{Deref, DerefMut};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

/// Latent state of a particle or an estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(pub DVector<f64>);

impl StateVector {
    pub fn zeros(dim: usize) -> Self {
        Self(DVector::zeros(dim))
    }

    pub fn from_slice(values: &[f64]) -> Self {
        Self(DVector::from_column_slice(values))
    }

    pub fn scalar(value: f64) -> Self {
        Self(DVector::from_element(1, value))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

impl Deref for StateVector {
    type Target = DVector<f64>;

    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

impl DerefMut for StateVector {
    fn deref_mut(&mut self) -> &mut Self::Target {
        &mut self.0
    }
}

impl From<DVector<f64>> for StateVector {
    fn from(v: DVector<f64>) -> Self {
        Self(v)
    }
}

/// Additive noise levels of the process (`C_w * I`) and of the scalar observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub process_cov_scale: f64,
    pub obs_variance: f64,
}

impl NoiseSpec {
    pub fn new(process_cov_scale: f64, obs_variance: f64) -> Result<Self> {
        if !(process_cov_scale >= 0.0 && process_cov_scale.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "process covariance scale must be finite and >= 0, got {process_cov_scale}"
            )));
        }
        if !(obs_variance > 0.0 && obs_variance.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "observation variance must be finite and > 0, got {obs_variance}"
            )));
        }
        Ok(Self {
            process_cov_scale,
            obs_variance,
        })
    }
}

/// Binding between a concrete system and the particle filter.
///
/// All randomness lives in [`sample_initial`](Self::sample_initial) and
/// [`process_step`](Self::process_step); [`predict_obs`](Self::predict_obs)
/// must be a pure function of the state and the exogenous input.
pub trait StateSpaceModel {
    /// Exogenous input needed to evaluate `g` at one time step.
    type Input: ?Sized;

    fn state_dim(&self) -> usize;

    /// Draws an initial state `z_0 ~ p(z_0)`.
    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> StateVector;

    /// Replaces `z` (holding `z_{n-1}`) by a draw of `f(z_{n-1}) + w_n`.
    /// `n` is the index of the state being produced.
    fn process_step<R: Rng + ?Sized>(&self, z: &mut StateVector, n: usize, rng: &mut R);

    /// Noiseless observation `g(z)`.
    fn predict_obs(&self, z: &StateVector, input: &Self::Input) -> f64;
}

/// One member of the particle population.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub state: StateVector,
    /// Long-term log-fitness; accumulates nonpositive terms, so it never exceeds zero.
    pub fitness_acc: f64,
    /// Normalized weight in `[0, 1]`.
    pub weight: f64,
}

/// Fixed-size particle population together with its time index.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub particles: Vec<Particle>,
    /// Index `n` of the states currently held (starts at 1).
    pub step_index: usize,
    /// False until the first weight update; the first update initializes the
    /// long-term fitness with the instantaneous one.
    pub has_history: bool,
}

impl ParticleSet {
    /// Population at step 1 with uniform weights and no fitness history.
    pub fn from_states(states: Vec<StateVector>) -> Self {
        let count = states.len();
        let w = 1.0 / count as f64;
        Self {
            particles: states
                .into_iter()
                .map(|state| Particle {
                    state,
                    fitness_acc: 0.0,
                    weight: w,
                })
                .collect(),
            step_index: 1,
            has_history: false,
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.particles.first().map_or(0, |p| p.state.len())
    }

    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.weight).collect()
    }

    pub fn weight_sum(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }
}

/// Covariance with a cheap path for diagonal matrices.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Diagonal(DVector<f64>),
    Full(DMatrix<f64>),
}

impl Covariance {
    pub fn scalar(variance: f64) -> Self {
        Self::Diagonal(DVector::from_element(1, variance))
    }

    pub fn isotropic(dim: usize, variance: f64) -> Self {
        Self::Diagonal(DVector::from_element(dim, variance))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Diagonal(d) => d.len(),
            Self::Full(m) => m.nrows(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Self::Diagonal(d) => DMatrix::from_diagonal(d),
            Self::Full(m) => m.clone(),
        }
    }
}

/// Log-density of `N(mean, cov)` evaluated at `x`.
pub fn gaussian_log_pdf(x: &DVector<f64>, mean: &DVector<f64>, cov: &Covariance) -> Result<f64> {
    let dim = cov.dim();
    for v in [x.len(), mean.len()] {
        if v != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: v,
            });
        }
    }
    let diff = x - mean;
    let (log_det, quad) = match cov {
        Covariance::Diagonal(d) => {
            if d.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::NotPositiveDefinite);
            }
            let log_det = d.iter().map(|v| v.ln()).sum::<f64>();
            let quad = diff.iter().zip(d.iter()).map(|(e, v)| e * e / v).sum::<f64>();
            (log_det, quad)
        }
        Covariance::Full(m) => {
            if m != &m.transpose() {
                return Err(Error::NotPositiveDefinite);
            }
            let chol = m.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
            let l = chol.l_dirty();
            let log_det = 2.0 * (0..dim).map(|i| l[(i, i)].ln()).sum::<f64>();
            let y = l.solve_lower_triangular(&diff).ok_or(Error::NotPositiveDefinite)?;
            (log_det, y.norm_squared())
        }
    };
    Ok(-0.5 * (dim as f64 * (2.0 * PI).ln() + log_det + quad))
}

/// Weighted mean of the particle states.
pub fn mmse_estimate(set: &ParticleSet) -> StateVector {
    let mut acc = DVector::zeros(set.dim());
    for p in &set.particles {
        acc.axpy(p.weight, &p.state, 1.0);
    }
    StateVector(acc)
}
