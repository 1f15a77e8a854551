//! Sample-by-sample echo canceller: NLMS on the preprocessed loudspeaker
//! signal, with the preprocessor coefficients supplied by a particle filter
//! on the direct-path model.

use serde::{Deserialize, Serialize};

use super::erle::{ErleTracker, DEFAULT_ERLE_CEILING_DB, DEFAULT_ERLE_SMOOTHING};
use super::legendre::{odd_basis, preprocess, Preprocessor};
use super::model::{DirectPathInput, DirectPathModel, COEFF_DIM};
use super::nlms::{FirFilter, NlmsParams};
use super::scenario::AecScenario;
use super::split::{detect_peak_and_split, SaSplit};
use crate::epfes::{ElitistParticleFilter, EpfesConfig};
use crate::error::{Error, Result};
use crate::signal::SAMPLE_RATE;
use crate::ssm::NoiseSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AecSchedule {
    /// Coefficients stay at zero until this time; the split is detected here.
    pub warmup_s: f64,
    /// All adaptation stops after this time.
    pub freeze_s: f64,
}

impl Default for AecSchedule {
    fn default() -> Self {
        Self {
            warmup_s: 0.1,
            freeze_s: 9.0,
        }
    }
}

impl AecSchedule {
    pub fn warmup_index(&self) -> usize {
        (self.warmup_s * SAMPLE_RATE as f64).round() as usize
    }

    /// Last sample of the adapting phase.
    pub fn freeze_index(&self) -> usize {
        (self.freeze_s * SAMPLE_RATE as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AecRunSpec {
    pub nlms: NlmsParams,
    /// Half width `T` of the direct-path window.
    pub half_width: usize,
    /// `None` keeps the coefficients at zero for the whole run.
    pub estimator: Option<EpfesConfig>,
    pub process_var: f64,
    pub coeff_init_var: f64,
    pub taps_init_var: f64,
    /// Observation variance assumed by the filter; `None` uses the scenario's noise variance.
    pub obs_var: Option<f64>,
    pub schedule: AecSchedule,
    pub erle_smoothing: f64,
    pub erle_ceiling_db: f64,
}

impl Default for AecRunSpec {
    fn default() -> Self {
        Self {
            nlms: NlmsParams::default(),
            half_width: 20,
            estimator: Some(EpfesConfig::epfes(100, 0.7, 0)),
            process_var: 0.01,
            coeff_init_var: 0.25,
            taps_init_var: 0.01,
            obs_var: None,
            schedule: AecSchedule::default(),
            erle_smoothing: DEFAULT_ERLE_SMOOTHING,
            erle_ceiling_db: DEFAULT_ERLE_CEILING_DB,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AecRunResult {
    /// ERLE of the noise-free echo against its residual, one value per sample.
    pub erle_db: Vec<f64>,
    /// Preprocessor coefficients applied at each sample (after that sample's update).
    pub coeffs: Vec<[f64; 3]>,
    pub split: Option<SaSplit>,
    pub freeze_index: usize,
    /// Mean ERLE over samples `0..=freeze_index`.
    pub adapting_erle_db: f64,
    /// Mean ERLE over the samples after `freeze_index`.
    pub frozen_erle_db: f64,
    pub final_taps: Vec<f64>,
    /// Sample at which the particle filter broke down numerically, if it did.
    /// From then on the last finite coefficients are held.
    pub estimator_failure: Option<EstimatorFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorFailure {
    pub sample: usize,
    pub reason: String,
}

fn is_numerical_breakdown(e: &Error) -> bool {
    matches!(
        e,
        Error::NotPositiveDefinite | Error::NonFiniteResiduals { .. } | Error::NonFiniteState { .. }
    )
}

/// `d_p = d - h_c^T f(x_c, a)`.
pub fn direct_path_observation(d: f64, h_c: &[f64], x_c: &[f64], pre: &Preprocessor) -> f64 {
    let y = preprocess(x_c, pre);
    d - h_c.iter().zip(&y).map(|(h, v)| h * v).sum::<f64>()
}

/// Runs the canceller over the whole scenario.
pub fn run_aec_experiment(scenario: &AecScenario, spec: &AecRunSpec) -> Result<AecRunResult> {
    let len = scenario.len();
    let warmup = spec.schedule.warmup_index();
    let freeze = spec.schedule.freeze_index();
    if warmup > freeze {
        return Err(Error::InvalidConfig("warm-up must end before the freeze".into()));
    }
    if freeze + 2 > len {
        return Err(Error::ScheduleTooLong {
            needed: freeze + 2,
            available: len,
        });
    }
    if !(spec.erle_smoothing > 0.0 && spec.erle_smoothing < 1.0) {
        return Err(Error::InvalidConfig("ERLE smoothing must lie in (0, 1)".into()));
    }
    let noise = match &spec.estimator {
        Some(cfg) => {
            cfg.validate()?;
            Some(NoiseSpec::new(
                spec.process_var,
                spec.obs_var.unwrap_or(scenario.noise_variance),
            )?)
        }
        None => None,
    };

    let mut fir = FirFilter::new(&spec.nlms)?;
    let m = fir.len();
    let x = &scenario.input;
    let basis: Vec<[f64; 3]> = x.iter().map(|&v| odd_basis(v)).collect();

    let mut pre = Preprocessor::default();
    let mut y = vec![0.0; m];
    let mut erle = ErleTracker::new(spec.erle_smoothing, spec.erle_ceiling_db);
    let mut erle_db = Vec::with_capacity(len);
    let mut coeffs = Vec::with_capacity(len);
    let mut split: Option<SaSplit> = None;
    let mut filter: Option<ElitistParticleFilter<DirectPathModel>> = None;
    let mut direct_input = DirectPathInput::default();
    let mut failure: Option<EstimatorFailure> = None;

    for n in 0..len {
        let adapting = n <= freeze;
        let lags = m.min(n + 1);
        for (k, yk) in y.iter_mut().enumerate().take(lags) {
            *yk = pre.apply_with_basis(x[n - k], &basis[n - k]);
        }

        let d = scenario.echo[n] + scenario.noise[n];
        let estimate = fir.output(&y);
        erle_db.push(erle.push(scenario.echo[n], scenario.echo[n] - estimate));

        if adapting {
            if let (Some(pf), Some(s)) = (filter.as_mut(), split.as_ref()) {
                let range = s.direct_range();
                let direct_part: f64 = range.clone().map(|k| fir.taps[k] * y[k]).sum();
                let d_p = d - (estimate - direct_part);
                direct_input.fill(range.map(|k| if k <= n { x[n - k] } else { 0.0 }));
                match pf.step(d_p, &direct_input) {
                    Ok(report) if report.estimate.iter().take(3).all(|v| v.is_finite()) => {
                        pre = Preprocessor::new([report.estimate[0], report.estimate[1], report.estimate[2]]);
                    }
                    Ok(_) => {
                        failure = Some(EstimatorFailure {
                            sample: n,
                            reason: "non-finite coefficient estimate".into(),
                        })
                    }
                    Err(e) if is_numerical_breakdown(&e) => {
                        failure = Some(EstimatorFailure {
                            sample: n,
                            reason: e.to_string(),
                        })
                    }
                    Err(e) => return Err(e),
                }
                if failure.is_some() {
                    filter = None;
                }
            }

            let energy: f64 = y.iter().map(|v| v * v).sum();
            fir.adapt(&y, d - estimate, energy);

            if n >= warmup && filter.is_none() && split.is_none() {
                if let (Some(cfg), Some(noise)) = (spec.estimator, noise) {
                    match detect_peak_and_split(&fir.taps, spec.half_width) {
                        Ok(s) => {
                            let model = DirectPathModel::new(
                                spec.process_var,
                                spec.coeff_init_var,
                                s.direct(&fir.taps).to_vec(),
                                spec.taps_init_var,
                            )?;
                            filter = Some(ElitistParticleFilter::new(model, noise, cfg)?);
                            split = Some(s);
                        }
                        Err(Error::NoPeak) => {}
                        Err(e) => return Err(e),
                    }
                }
            }
        }
        coeffs.push(pre.coeffs);
    }

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(AecRunResult {
        adapting_erle_db: mean(&erle_db[..=freeze]),
        frozen_erle_db: mean(&erle_db[freeze + 1..]),
        erle_db,
        coeffs,
        split,
        freeze_index: freeze,
        final_taps: fir.taps,
        estimator_failure: failure,
    })
}

impl AecRunResult {
    /// Rows `(time_s, erle_db)` keeping every `decimation`-th sample.
    pub fn erle_rows(&self, decimation: usize) -> impl Iterator<Item = Vec<f64>> + '_ {
        let step = decimation.max(1);
        self.erle_db
            .iter()
            .enumerate()
            .step_by(step)
            .map(|(n, v)| vec![n as f64 / SAMPLE_RATE as f64, *v])
    }

    /// Rows `(time_s, a1, a2, a3)` keeping every `decimation`-th sample.
    pub fn coeff_rows(&self, decimation: usize) -> impl Iterator<Item = Vec<f64>> + '_ {
        let step = decimation.max(1);
        self.coeffs
            .iter()
            .enumerate()
            .step_by(step)
            .map(|(n, a)| vec![n as f64 / SAMPLE_RATE as f64, a[0], a[1], a[2]])
    }
}

/// Population variance of each coefficient trace over samples `range`.
pub fn coeff_variance(coeffs: &[[f64; 3]], range: std::ops::Range<usize>) -> [f64; COEFF_DIM] {
    let slice = &coeffs[range];
    let count = slice.len() as f64;
    let mut out = [0.0; COEFF_DIM];
    for (i, o) in out.iter_mut().enumerate() {
        let mean = slice.iter().map(|a| a[i]).sum::<f64>() / count;
        *o = slice.iter().map(|a| (a[i] - mean).powi(2)).sum::<f64>() / count;
    }
    out
}
