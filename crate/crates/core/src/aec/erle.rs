//! Time-dependent echo return loss enhancement.

use crate::error::{Error, Result};

pub const DEFAULT_ERLE_SMOOTHING: f64 = 0.999;
pub const DEFAULT_ERLE_CEILING_DB: f64 = 80.0;

/// `10 log10(P_d / P_e)` with first-order recursive power estimates
/// `P <- s P + (1 - s) x^2` started at zero.
///
/// Samples where `P_d` is still zero report 0 dB; otherwise the value is
/// capped at `ceiling_db`, which also covers `P_e = 0`.
pub fn erle_trace(d: &[f64], e: &[f64], smoothing: f64, ceiling_db: f64) -> Result<Vec<f64>> {
    if d.len() != e.len() {
        return Err(Error::DimensionMismatch {
            expected: d.len(),
            actual: e.len(),
        });
    }
    if !(smoothing > 0.0 && smoothing < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "ERLE smoothing must lie in (0, 1), got {smoothing}"
        )));
    }
    let mut tracker = ErleTracker::new(smoothing, ceiling_db);
    Ok(d.iter().zip(e).map(|(&dv, &ev)| tracker.push(dv, ev)).collect())
}

/// Streaming form of [`erle_trace`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErleTracker {
    smoothing: f64,
    ceiling_db: f64,
    power_d: f64,
    power_e: f64,
}

impl ErleTracker {
    pub fn new(smoothing: f64, ceiling_db: f64) -> Self {
        Self {
            smoothing,
            ceiling_db,
            power_d: 0.0,
            power_e: 0.0,
        }
    }

    pub fn push(&mut self, d: f64, e: f64) -> f64 {
        let s = self.smoothing;
        self.power_d = s * self.power_d + (1.0 - s) * d * d;
        self.power_e = s * self.power_e + (1.0 - s) * e * e;
        if self.power_d == 0.0 {
            0.0
        } else if self.power_e == 0.0 {
            self.ceiling_db
        } else {
            (10.0 * (self.power_d / self.power_e).log10()).min(self.ceiling_db)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tone(n: usize) -> Vec<f64> {
        (0..n).map(|i| (0.05 * i as f64).sin() + 0.1).collect()
    }

    #[test]
    fn equal_signals_give_zero() {
        let d = tone(500);
        for v in erle_trace(&d, &d, 0.99, 80.0).unwrap() {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn tenfold_attenuation_gives_twenty_db() {
        let d = tone(20_000);
        let e: Vec<f64> = d.iter().map(|v| v / 10.0).collect();
        let trace = erle_trace(&d, &e, 0.999, 80.0).unwrap();
        assert_abs_diff_eq!(*trace.last().unwrap(), 20.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_error_hits_ceiling() {
        let d = tone(100);
        let trace = erle_trace(&d, &vec![0.0; 100], 0.9, 80.0).unwrap();
        assert!(trace.iter().all(|&v| v == 80.0));
    }

    #[test]
    fn silent_reference_reports_zero() {
        let trace = erle_trace(&[0.0, 0.0], &[0.0, 0.0], 0.9, 80.0).unwrap();
        assert_eq!(trace, vec![0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(erle_trace(&[1.0], &[1.0, 2.0], 0.9, 80.0).is_err());
        assert!(erle_trace(&[1.0], &[1.0], 1.0, 80.0).is_err());
    }
}
