//! Simulated echo path: memoryless loudspeaker nonlinearity, room impulse
//! response and additive near-end noise.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{self, SignalKind, SignalSpec, SAMPLE_RATE};

/// `0.25 tanh(4x)`.
pub fn true_nonlinearity(x: f64) -> f64 {
    0.25 * (4.0 * x).tanh()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Nonlinearity {
    #[default]
    Tanh,
    Identity,
}

impl Nonlinearity {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Nonlinearity::Tanh => true_nonlinearity(x),
            Nonlinearity::Identity => x,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum RirSpec {
    Synthetic {
        len: usize,
        direct_lag: usize,
        decay_ms: f64,
        seed: u64,
    },
    /// Measured response stored as a 16 kHz mono 16-bit WAV; used as is.
    WavFile { path: PathBuf },
}

impl Default for RirSpec {
    fn default() -> Self {
        RirSpec::Synthetic {
            len: 254,
            direct_lag: 32,
            decay_ms: 4.0,
            seed: 1,
        }
    }
}

impl RirSpec {
    pub fn build(&self) -> Result<Vec<f64>> {
        match self {
            RirSpec::Synthetic {
                len,
                direct_lag,
                decay_ms,
                seed,
            } => signal::synth_rir(*len, *direct_lag, *decay_ms, *seed),
            RirSpec::WavFile { path } => signal::read_wav(path),
        }
    }
}

/// Everything needed to rebuild a scenario deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSpec {
    pub input: SignalKind,
    pub duration_s: f64,
    pub input_amplitude: f64,
    pub input_seed: u64,
    pub rir: RirSpec,
    pub nonlinearity: Nonlinearity,
    /// Long-term echo-to-noise ratio; `inf` disables the noise.
    pub snr_db: f64,
    pub noise_seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            input: SignalKind::SpeechLike,
            duration_s: 18.0,
            input_amplitude: 0.33,
            input_seed: 7,
            rir: RirSpec::default(),
            nonlinearity: Nonlinearity::Tanh,
            snr_db: 10.0,
            noise_seed: 11,
        }
    }
}

impl ScenarioSpec {
    pub fn build(&self) -> Result<AecScenario> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::InvalidConfig("scenario duration must be positive".into()));
        }
        let input = signal::generate(&SignalSpec {
            kind: self.input.clone(),
            length_samples: (self.duration_s * SAMPLE_RATE as f64).round() as usize,
            amplitude: self.input_amplitude,
            seed: self.input_seed,
        })?;
        let rir = self.rir.build()?;
        let snr = (self.snr_db != f64::INFINITY).then_some(self.snr_db);
        AecScenario::new(rir, input, self.nonlinearity, snr, self.noise_seed)
    }
}

/// Loudspeaker signal, echo path and the resulting microphone signal.
///
/// The noise-free echo and the noise are stored separately so cancellation
/// can be scored on the echo alone.
#[derive(Debug, Clone, PartialEq)]
pub struct AecScenario {
    pub rir: Vec<f64>,
    pub input: Vec<f64>,
    pub nonlinearity: Nonlinearity,
    pub noise_variance: f64,
    pub echo: Vec<f64>,
    pub noise: Vec<f64>,
}

impl AecScenario {
    /// Convolves `f(input)` with `rir` (zero initial state) and adds white
    /// Gaussian noise scaled so that the echo-to-noise power ratio over the
    /// whole signal equals `snr_db`.
    pub fn new(
        rir: Vec<f64>,
        input: Vec<f64>,
        nonlinearity: Nonlinearity,
        snr_db: Option<f64>,
        noise_seed: u64,
    ) -> Result<Self> {
        if rir.is_empty() || input.is_empty() {
            return Err(Error::InvalidConfig("RIR and input must be non-empty".into()));
        }
        let driven: Vec<f64> = input.iter().map(|&x| nonlinearity.apply(x)).collect();
        let echo = convolve(&driven, &rir);

        let len = echo.len();
        let (noise_variance, noise) = match snr_db {
            None => (0.0, vec![0.0; len]),
            Some(snr) => {
                if !snr.is_finite() {
                    return Err(Error::InvalidConfig("SNR must be finite".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
                let raw: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
                let echo_power = mean_power(&echo);
                let raw_power = mean_power(&raw);
                let target = echo_power / 10f64.powf(snr / 10.0);
                let scale = if raw_power > 0.0 {
                    (target / raw_power).sqrt()
                } else {
                    0.0
                };
                (target, raw.into_iter().map(|v| v * scale).collect())
            }
        };
        Ok(Self {
            rir,
            input,
            nonlinearity,
            noise_variance,
            echo,
            noise,
        })
    }

    pub fn len(&self) -> usize {
        self.input.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input.is_empty()
    }

    pub fn sample_rate(&self) -> u32 {
        SAMPLE_RATE
    }

    pub fn microphone(&self) -> Vec<f64> {
        self.echo.iter().zip(&self.noise).map(|(a, b)| a + b).collect()
    }
}

/// Microphone sample `d_n = h^T f(x_n) + v_n`.
pub fn simulate_microphone(scenario: &AecScenario, n: usize) -> f64 {
    scenario.echo[n] + scenario.noise[n]
}

/// Causal convolution truncated to the length of `x`.
pub fn convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|n| {
            let taps = h.len().min(n + 1);
            (0..taps).map(|k| h[k] * x[n - k]).sum()
        })
        .collect()
}

pub fn mean_power(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn nonlinearity_examples() {
        assert_eq!(true_nonlinearity(0.0), 0.0);
        assert_abs_diff_eq!(true_nonlinearity(50.0), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(true_nonlinearity(0.25), 0.190_398, epsilon = 1e-6);
        assert_eq!(true_nonlinearity(-0.3), -true_nonlinearity(0.3));
    }

    #[test]
    fn zero_input_gives_silence() {
        let s = AecScenario::new(vec![0.5, 0.2], vec![0.0; 100], Nonlinearity::Tanh, None, 0).unwrap();
        assert!((0..100).all(|n| simulate_microphone(&s, n) == 0.0));
    }

    #[test]
    fn impulse_traces_out_rir() {
        let h = vec![0.3, -0.1, 0.7, 0.05];
        let mut x = vec![0.0; 10];
        x[0] = 1.0;
        let s = AecScenario::new(h.clone(), x, Nonlinearity::Identity, None, 0).unwrap();
        assert_eq!(&s.microphone()[..4], &h[..]);
        assert!(s.microphone()[4..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn snr_calibration() {
        let spec = ScenarioSpec {
            duration_s: 3.0,
            ..ScenarioSpec::default()
        };
        let s = spec.build().unwrap();
        let snr = 10.0 * (mean_power(&s.echo) / mean_power(&s.noise)).log10();
        assert!((snr - 10.0).abs() < 0.1, "measured SNR {snr}");
        assert!(s.noise_variance > 0.0);
    }

    #[test]
    fn convolution_matches_direct_sum() {
        let x = [1.0, 2.0, -1.0, 0.5];
        let h = [0.5, 0.25];
        assert_eq!(convolve(&x, &h), vec![0.5, 1.25, 0.0, 0.0]);
    }

    #[test]
    fn default_input_is_mildly_nonlinear() {
        // Linear-to-nonlinear power ratio of the loudspeaker stage.
        let spec = ScenarioSpec {
            duration_s: 6.0,
            ..ScenarioSpec::default()
        };
        let s = spec.build().unwrap();
        // Best linear fit c x of f(x); the remainder is the nonlinear part.
        let xy: f64 = s.input.iter().map(|&x| x * true_nonlinearity(x)).sum();
        let xx: f64 = s.input.iter().map(|&x| x * x).sum();
        let c = xy / xx;
        let (mut lin, mut dist) = (0.0, 0.0);
        for &x in &s.input {
            let y = true_nonlinearity(x);
            lin += (c * x).powi(2);
            dist += (y - c * x).powi(2);
        }
        let ratio = 10.0 * (lin / dist).log10();
        assert!((5.0..15.0).contains(&ratio), "ratio {ratio} dB");
    }
}
