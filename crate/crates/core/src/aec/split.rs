//! Significance-aware splitting of an impulse response into the direct-path
//! peak region and its complement.

use std::ops::RangeInclusive;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SaSplit {
    /// Lag `I` of the energy peak.
    pub peak_lag: usize,
    /// Half width `T`; the direct path covers `I - T ..= I + T`.
    pub half_width: usize,
    /// Full filter length `M`.
    pub len: usize,
}

impl SaSplit {
    pub fn new(peak_lag: usize, half_width: usize, len: usize) -> Result<Self> {
        if peak_lag < half_width || peak_lag + half_width >= len || 2 * half_width + 1 >= len {
            return Err(Error::InvalidConfig(format!(
                "invalid split: I={peak_lag}, T={half_width}, M={len}"
            )));
        }
        Ok(Self {
            peak_lag,
            half_width,
            len,
        })
    }

    /// `M_p = 2T + 1`.
    pub fn direct_len(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn direct_range(&self) -> RangeInclusive<usize> {
        self.peak_lag - self.half_width..=self.peak_lag + self.half_width
    }

    pub fn is_direct(&self, index: usize) -> bool {
        self.direct_range().contains(&index)
    }

    pub fn direct<'a>(&self, v: &'a [f64]) -> &'a [f64] {
        &v[self.direct_range()]
    }

    pub fn complement(&self, v: &[f64]) -> Vec<f64> {
        let r = self.direct_range();
        v[..*r.start()].iter().chain(&v[r.end() + 1..]).copied().collect()
    }

    /// Inverse of (`direct`, `complement`).
    pub fn merge(&self, direct: &[f64], complement: &[f64]) -> Vec<f64> {
        let start = *self.direct_range().start();
        let mut out = Vec::with_capacity(self.len);
        out.extend_from_slice(&complement[..start]);
        out.extend_from_slice(direct);
        out.extend_from_slice(&complement[start..]);
        out
    }
}

/// Locates the energy peak of `taps` (lowest index on ties) and clamps it so
/// the direct-path window fits inside the filter.
pub fn detect_peak_and_split(taps: &[f64], half_width: usize) -> Result<SaSplit> {
    let len = taps.len();
    if 2 * half_width + 1 >= len {
        return Err(Error::InvalidConfig(format!(
            "direct path 2T+1={} must be shorter than the filter ({len} taps)",
            2 * half_width + 1
        )));
    }
    let (mut peak, mut energy) = (0, 0.0);
    for (i, h) in taps.iter().enumerate() {
        if h * h > energy {
            energy = h * h;
            peak = i;
        }
    }
    if energy == 0.0 {
        return Err(Error::NoPeak);
    }
    let peak = peak.clamp(half_width, len - 1 - half_width);
    SaSplit::new(peak, half_width, len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn impulse_geometry() {
        let mut h = vec![0.0; 61];
        h[12] = 1.0;
        let s = detect_peak_and_split(&h, 5).unwrap();
        assert_eq!(s.peak_lag, 12);
        assert_eq!(s.direct_range(), 7..=17);
        assert_eq!(s.direct_len(), 11);
    }

    #[test]
    fn clamps_at_boundaries() {
        let mut h = vec![0.0; 20];
        h[0] = -2.0;
        assert_eq!(detect_peak_and_split(&h, 2).unwrap().peak_lag, 2);
        let mut h = vec![0.0; 20];
        h[19] = 1.0;
        assert_eq!(detect_peak_and_split(&h, 3).unwrap().peak_lag, 16);
    }

    #[test]
    fn ties_pick_lower_index() {
        let mut h = vec![0.0; 30];
        h[9] = 0.5;
        h[14] = -0.5;
        assert_eq!(detect_peak_and_split(&h, 2).unwrap().peak_lag, 9);
    }

    #[test]
    fn errors() {
        assert!(matches!(detect_peak_and_split(&[0.0; 10], 1), Err(Error::NoPeak)));
        assert!(detect_peak_and_split(&[1.0; 5], 2).is_err());
        assert!(SaSplit::new(1, 2, 10).is_err());
    }

    proptest! {
        #[test]
        fn partition_reconstructs(v in proptest::collection::vec(-1.0f64..1.0, 12..80), t in 0usize..5, pos in 0.0f64..1.0) {
            let len = v.len();
            let lo = t;
            let hi = len - 1 - t;
            let lag = lo + ((hi - lo) as f64 * pos) as usize;
            let s = SaSplit::new(lag, t, len).unwrap();
            let d = s.direct(&v);
            let c = s.complement(&v);
            prop_assert_eq!(d.len(), s.direct_len());
            prop_assert_eq!(c.len(), len - s.direct_len());
            prop_assert_eq!(s.merge(d, &c), v);
        }
    }
}
