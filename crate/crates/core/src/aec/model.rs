//! Direct-path observation model used by the particle filter.
//!
//! State layout is `z = [a1, a2, a3, h_p...]` with `M_z = M_p + 3`. The process
//! is a random walk with isotropic covariance `C_w * I`.

use rand::Rng;
use rand_distr::StandardNormal;

use super::legendre::{odd_basis, preprocess, Preprocessor};
use crate::error::{Error, Result};
use crate::ssm::{StateSpaceModel, StateVector};

/// Number of preprocessor coefficients at the head of the state.
pub const COEFF_DIM: usize = 3;

/// Direct-path input `x_p` with its Legendre basis evaluated once per sample,
/// so every particle only pays for the dot products.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DirectPathInput {
    pub x: Vec<f64>,
    pub basis: Vec<[f64; 3]>,
}

impl DirectPathInput {
    pub fn new(x: &[f64]) -> Self {
        let mut input = Self::default();
        input.fill(x.iter().copied());
        input
    }

    pub fn fill<I: IntoIterator<Item = f64>>(&mut self, x: I) {
        self.x.clear();
        self.basis.clear();
        for v in x {
            self.x.push(v);
            self.basis.push(odd_basis(v));
        }
    }
}

/// Splits a state into its preprocessor coefficients and direct-path taps.
pub fn split_state(z: &StateVector) -> (Preprocessor, &[f64]) {
    let s = z.as_slice();
    (Preprocessor::new([s[0], s[1], s[2]]), &s[COEFF_DIM..])
}

/// `g(z) = h_p^T f(x_p, a)` evaluated by composing the preprocessor and a dot product.
pub fn aec_observation_g(z: &StateVector, x_p: &[f64]) -> f64 {
    let (pre, h_p) = split_state(z);
    let y = preprocess(x_p, &pre);
    h_p.iter().zip(&y).map(|(h, v)| h * v).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectPathModel {
    direct_len: usize,
    process_var: f64,
    coeff_init_var: f64,
    taps_init_mean: Vec<f64>,
    taps_init_var: f64,
}

impl DirectPathModel {
    /// `taps_init_mean` is the NLMS estimate of the direct path when the filter is enabled.
    pub fn new(process_var: f64, coeff_init_var: f64, taps_init_mean: Vec<f64>, taps_init_var: f64) -> Result<Self> {
        if taps_init_mean.is_empty() {
            return Err(Error::InvalidConfig("direct path must have at least one tap".into()));
        }
        for (name, v) in [
            ("process variance", process_var),
            ("coefficient prior variance", coeff_init_var),
            ("tap prior variance", taps_init_var),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be finite and >= 0")));
            }
        }
        Ok(Self {
            direct_len: taps_init_mean.len(),
            process_var,
            coeff_init_var,
            taps_init_mean,
            taps_init_var,
        })
    }

    pub fn direct_len(&self) -> usize {
        self.direct_len
    }
}

impl StateSpaceModel for DirectPathModel {
    type Input = DirectPathInput;

    fn state_dim(&self) -> usize {
        self.direct_len + COEFF_DIM
    }

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> StateVector {
        let mut z = StateVector::zeros(self.state_dim());
        let a_sd = self.coeff_init_var.sqrt();
        for i in 0..COEFF_DIM {
            z[i] = a_sd * rng.sample::<f64, _>(StandardNormal);
        }
        let h_sd = self.taps_init_var.sqrt();
        for (i, m) in self.taps_init_mean.iter().enumerate() {
            z[COEFF_DIM + i] = m + h_sd * rng.sample::<f64, _>(StandardNormal);
        }
        z
    }

    fn process_step<R: Rng + ?Sized>(&self, z: &mut StateVector, _n: usize, rng: &mut R) {
        if self.process_var == 0.0 {
            return;
        }
        let sd = self.process_var.sqrt();
        for v in z.iter_mut() {
            *v += sd * rng.sample::<f64, _>(StandardNormal);
        }
    }

    fn predict_obs(&self, z: &StateVector, input: &DirectPathInput) -> f64 {
        let s = z.as_slice();
        let (a, h) = s.split_at(COEFF_DIM);
        let (mut lin, mut c3, mut c5, mut c7) = (0.0, 0.0, 0.0, 0.0);
        for ((hk, xk), bk) in h.iter().zip(&input.x).zip(&input.basis) {
            lin += hk * xk;
            c3 += hk * bk[0];
            c5 += hk * bk[1];
            c7 += hk * bk[2];
        }
        lin + a[0] * c3 + a[1] * c5 + a[2] * c7
    }
}
