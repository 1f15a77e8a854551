use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NlmsParams {
    pub taps: usize,
    pub stepsize: f64,
    pub eps: f64,
}

impl Default for NlmsParams {
    fn default() -> Self {
        Self {
            taps: 254,
            stepsize: 0.5,
            eps: 1e-4,
        }
    }
}

/// Linear FIR filter adapted by normalized LMS.
#[derive(Debug, Clone, PartialEq)]
pub struct FirFilter {
    pub taps: Vec<f64>,
    pub stepsize: f64,
    pub eps: f64,
}

impl FirFilter {
    pub fn new(params: &NlmsParams) -> Result<Self> {
        if params.taps == 0 {
            return Err(Error::InvalidConfig("FIR filter needs at least one tap".into()));
        }
        if !(params.stepsize >= 0.0 && params.stepsize < 2.0) {
            return Err(Error::InvalidConfig(format!(
                "NLMS stepsize must lie in [0, 2), got {}",
                params.stepsize
            )));
        }
        if params.eps.is_nan() || params.eps <= 0.0 {
            return Err(Error::InvalidConfig("NLMS eps must be positive".into()));
        }
        Ok(Self {
            taps: vec![0.0; params.taps],
            stepsize: params.stepsize,
            eps: params.eps,
        })
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// `h^T y`.
    pub fn output(&self, y: &[f64]) -> f64 {
        self.taps.iter().zip(y).map(|(h, v)| h * v).sum()
    }

    /// One NLMS iteration: returns the a-priori error `d - h^T y` and moves
    /// the taps by `mu / (y^T y + eps) * y * e`.
    pub fn nlms_update(&mut self, y: &[f64], d: f64) -> f64 {
        debug_assert_eq!(y.len(), self.taps.len());
        let e = d - self.output(y);
        let energy: f64 = y.iter().map(|v| v * v).sum();
        self.adapt(y, e, energy);
        e
    }

    /// Tap update with a precomputed error and input energy.
    pub fn adapt(&mut self, y: &[f64], e: f64, energy: f64) {
        let g = self.stepsize * e / (energy + self.eps);
        for (h, v) in self.taps.iter_mut().zip(y) {
            *h += g * v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn filter(taps: Vec<f64>, stepsize: f64, eps: f64) -> FirFilter {
        FirFilter { taps, stepsize, eps }
    }

    #[test]
    fn zero_error_leaves_taps() {
        let mut f = filter(vec![0.5, -0.25], 0.7, 1e-4);
        let y = [1.0, 2.0];
        let e = f.nlms_update(&y, 0.0);
        assert_eq!(e, 0.0);
        assert_eq!(f.taps, vec![0.5, -0.25]);
    }

    #[test]
    fn scalar_one_step_identification() {
        let mut f = filter(vec![0.0], 1.0, 1e-300);
        let e = f.nlms_update(&[2.0], 6.0);
        assert_eq!(e, 6.0);
        assert_abs_diff_eq!(f.taps[0], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_stepsize_freezes() {
        let mut f = filter(vec![0.1, 0.2, 0.3], 0.0, 1e-4);
        f.nlms_update(&[1.0, -1.0, 4.0], 10.0);
        assert_eq!(f.taps, vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(FirFilter::new(&NlmsParams {
            taps: 0,
            ..NlmsParams::default()
        })
        .is_err());
        assert!(FirFilter::new(&NlmsParams {
            stepsize: 2.0,
            ..NlmsParams::default()
        })
        .is_err());
        assert!(FirFilter::new(&NlmsParams {
            eps: 0.0,
            ..NlmsParams::default()
        })
        .is_err());
        assert_eq!(FirFilter::new(&NlmsParams::default()).unwrap().len(), 254);
    }

    proptest! {
        /// With eps -> 0 the a-posteriori error on the same pair is (1 - mu) e.
        #[test]
        fn projection_identity(
            taps in proptest::collection::vec(-1.0f64..1.0, 8),
            y in proptest::collection::vec(-1.0f64..1.0, 8),
            truth in proptest::collection::vec(-1.0f64..1.0, 8),
            mu in 0.05f64..1.95,
        ) {
            let energy: f64 = y.iter().map(|v| v * v).sum();
            prop_assume!(energy > 1e-3);
            let d: f64 = truth.iter().zip(&y).map(|(a, b)| a * b).sum();
            let mut f = filter(taps, mu, 1e-300);
            let e = f.nlms_update(&y, d);
            let after = d - f.output(&y);
            prop_assert!((after - (1.0 - mu) * e).abs() <= 1e-12 * (1.0 + e.abs()));
        }
    }
}
