//! Test-signal generation, synthetic room impulse responses, WAV input and CSV output.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalKind {
    WhiteNoise,
    SpeechLike,
    WavFile(PathBuf),
    Impulse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub kind: SignalKind,
    /// Ignored for WAV input, where the file governs the length.
    pub length_samples: usize,
    pub amplitude: f64,
    pub seed: u64,
}

/// Deterministic signal for `spec`.
///
/// * `WhiteNoise`: Gaussian with standard deviation `amplitude`.
/// * `SpeechLike`: see [`speech_like`]; `amplitude` is the RMS of the loud voiced parts.
/// * `WavFile`: samples scaled to `[-1, 1)` and multiplied by `amplitude`.
/// * `Impulse`: `amplitude` followed by zeros.
pub fn generate(spec: &SignalSpec) -> Result<Vec<f64>> {
    if !(spec.amplitude > 0.0 && spec.amplitude.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "signal amplitude must be positive, got {}",
            spec.amplitude
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.length_samples;
    Ok(match &spec.kind {
        SignalKind::Impulse => {
            let mut v = vec![0.0; n];
            if let Some(first) = v.first_mut() {
                *first = spec.amplitude;
            }
            v
        }
        SignalKind::WhiteNoise => (0..n)
            .map(|_| spec.amplitude * rng.sample::<f64, _>(StandardNormal))
            .collect(),
        SignalKind::SpeechLike => speech_like(n, spec.amplitude, &mut rng),
        SignalKind::WavFile(path) => read_wav(path)?.into_iter().map(|v| v * spec.amplitude).collect(),
    })
}

const SPEECH_POLE_RADIUS: f64 = 0.8;
const SPEECH_PAUSE_DB: f64 = -20.0;
const SPEECH_LEVEL_RANGE_DB: f64 = 12.0;

/// Nonstationary speech substitute.
///
/// White noise drives a two-pole resonator (pole radius 0.8) whose center
/// frequency (200 Hz to 3 kHz) is redrawn every 100 ms. The result is shaped
/// by a syllabic envelope of voiced segments (120 to 400 ms, random level
/// within 12 dB) separated by pauses (40 to 350 ms) that keep a background
/// level 20 dB below full scale, with 10 ms raised-cosine ramps. The output
/// is scaled so the samples whose envelope is within 6 dB of full scale have
/// RMS `rms`, then clipped to `[-1, 1]`.
pub fn speech_like<R: Rng + ?Sized>(len: usize, rms: f64, rng: &mut R) -> Vec<f64> {
    let fs = SAMPLE_RATE as f64;
    let block = (0.1 * fs) as usize;
    let radius = SPEECH_POLE_RADIUS;

    let mut out = vec![0.0; len];
    let (mut y1, mut y2) = (0.0, 0.0);
    let mut coef = 0.0;
    for (n, o) in out.iter_mut().enumerate() {
        if n % block == 0 {
            let fc = rng.random_range(200.0..3000.0);
            coef = 2.0 * radius * (2.0 * PI * fc / fs).cos();
        }
        let e: f64 = rng.sample(StandardNormal);
        let y = e + coef * y1 - radius * radius * y2;
        y2 = y1;
        y1 = y;
        *o = y * (1.0 - radius);
    }

    let env = syllabic_envelope(len, rng);
    let mut voiced_energy = 0.0;
    let mut voiced_count = 0usize;
    for (o, g) in out.iter_mut().zip(&env) {
        *o *= g;
        if *g > 0.5 {
            voiced_energy += *o * *o;
            voiced_count += 1;
        }
    }
    if voiced_count > 0 && voiced_energy > 0.0 {
        let scale = rms / (voiced_energy / voiced_count as f64).sqrt();
        for o in &mut out {
            *o = (*o * scale).clamp(-1.0, 1.0);
        }
    }
    out
}

fn syllabic_envelope<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    let fs = SAMPLE_RATE as f64;
    let ramp = (0.01 * fs) as usize;
    let floor = 10f64.powf(SPEECH_PAUSE_DB / 20.0);
    let mut env = vec![floor; len];
    let mut pos = 0;
    while pos < len {
        let on = (rng.random_range(0.12..0.4) * fs) as usize;
        let level = 10f64.powf(-rng.random_range(0.0..SPEECH_LEVEL_RANGE_DB) / 20.0);
        for i in 0..on.min(len - pos) {
            let edge = i.min(on - 1 - i);
            let g = if edge < ramp {
                0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos()
            } else {
                1.0
            };
            env[pos + i] = floor + (level - floor) * g;
        }
        pos += on;
        pos += (rng.random_range(0.04..0.35) * fs) as usize;
    }
    env
}

/// Synthetic room impulse response of length `len`: zeros before
/// `direct_lag`, a unit direct-path tap, then a white-noise tail whose
/// envelope decays by 1/e every `decay_ms` milliseconds. Tail taps are
/// limited to 0.9 of the direct tap and the result has unit energy.
pub fn synth_rir(len: usize, direct_lag: usize, decay_ms: f64, seed: u64) -> Result<Vec<f64>> {
    if direct_lag >= len {
        return Err(Error::InvalidConfig(format!(
            "direct lag {direct_lag} must be smaller than the RIR length {len}"
        )));
    }
    if decay_ms.is_nan() || decay_ms <= 0.0 {
        return Err(Error::InvalidConfig("RIR decay must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = decay_ms * 1e-3 * SAMPLE_RATE as f64;
    let mut h = vec![0.0; len];
    h[direct_lag] = 1.0;
    for (k, tap) in h.iter_mut().enumerate().skip(direct_lag + 1) {
        let env = 0.5 * (-((k - direct_lag) as f64) / tau).exp();
        *tap = (env * rng.sample::<f64, _>(StandardNormal)).clamp(-0.9, 0.9);
    }
    let norm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut h {
        *v /= norm;
    }
    Ok(h)
}

/// Reads a 16-bit PCM mono 16 kHz WAV file into samples in `[-1, 1)`.
pub fn read_wav(path: &Path) -> Result<Vec<f64>> {
    let reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1
        || spec.sample_rate != SAMPLE_RATE
        || spec.bits_per_sample != 16
        || spec.sample_format != hound::SampleFormat::Int
    {
        return Err(Error::WavFormat {
            path: path.to_path_buf(),
            found: format!(
                "{}-bit {:?}, {} channel(s), {} Hz",
                spec.bits_per_sample, spec.sample_format, spec.channels, spec.sample_rate
            ),
        });
    }
    reader.into_samples::<i16>().map(|s| Ok(s? as f64 / 32768.0)).collect()
}

/// Writes a CSV table with a header row and LF line endings.
pub fn write_csv<W: Write>(writer: W, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
