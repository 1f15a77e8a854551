//! Monte Carlo studies on both benchmarks and the tabular report they produce.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aec::experiment::coeff_variance;
use crate::aec::{run_aec_experiment, AecRunResult, AecRunSpec, RirSpec, ScenarioSpec};
use crate::epfes::{ElitistParticleFilter, EpfesConfig, ScatterWeighting, DEFAULT_COV_REGULARIZATION};
use crate::error::{Error, Result};
use crate::par::{try_map_jobs, Execution};
use crate::signal::SAMPLE_RATE;
use crate::ungm::{generate_trajectory_with, UngmModel, UngmParams, UngmTrajectory};

/// SplitMix64 finalizer.
pub fn splitmix64(k: u64) -> u64 {
    let mut z = k.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of realization `k`: `base ^ splitmix64(k)`.
pub fn mix_seed(base: u64, k: u64) -> u64 {
    base ^ splitmix64(k)
}

/// Stream of a realization seed used for the simulated system.
const SYSTEM_STREAM: u64 = 0;
/// Stream of a realization seed used by the filters.
const FILTER_STREAM: u64 = 1;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// `(1 / (K N)) * sum_k sum_n (z_n - est_{k,n})^2`.
pub fn mse(truth: &[f64], estimates: &[Vec<f64>]) -> Result<f64> {
    if truth.is_empty() || estimates.is_empty() {
        return Err(Error::InvalidConfig(
            "MSE needs at least one step and one realization".into(),
        ));
    }
    let mut total = 0.0;
    for est in estimates {
        if est.len() != truth.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                actual: est.len(),
            });
        }
        total += truth.iter().zip(est).map(|(z, e)| (z - e) * (z - e)).sum::<f64>();
    }
    Ok(total / (truth.len() * estimates.len()) as f64)
}

/// One row of a study report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub study: String,
    pub variant: String,
    #[serde(rename = "L_or_config")]
    pub l_or_config: String,
    pub phase: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn push(&mut self, study: &str, variant: &str, l_or_config: &str, phase: &str, metric: &str, value: f64) {
        self.rows.push(ReportRow {
            study: study.into(),
            variant: variant.into(),
            l_or_config: l_or_config.into(),
            phase: phase.into(),
            metric: metric.into(),
            value,
        });
    }

    pub fn find(&self, variant: &str, l_or_config: &str, phase: &str, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.variant == variant && r.l_or_config == l_or_config && r.phase == phase && r.metric == metric)
            .map(|r| r.value)
    }

    pub fn all_finite(&self) -> bool {
        self.rows.iter().all(|r| r.value.is_finite())
    }

    /// CSV with header `study,variant,L_or_config,phase,metric,value` and LF line endings.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        if self.rows.is_empty() {
            w.write_record(["study", "variant", "L_or_config", "phase", "metric", "value"])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UngmVariant {
    /// Adaptive mean threshold.
    Epfes,
    /// Threshold 1.
    Gpf,
}

impl UngmVariant {
    pub fn name(self) -> &'static str {
        match self {
            UngmVariant::Epfes => "epfes",
            UngmVariant::Gpf => "gpf",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UngmStudySpec {
    pub particle_counts: Vec<usize>,
    pub steps: usize,
    pub realizations: usize,
    pub params: UngmParams,
    pub variants: Vec<UngmVariant>,
    /// Smoothing factor of the EPFES variant.
    pub lambda: f64,
    pub cov_regularization: f64,
    pub scatter: ScatterWeighting,
    pub base_seed: u64,
}

impl Default for UngmStudySpec {
    fn default() -> Self {
        Self::desk(0)
    }
}

impl UngmStudySpec {
    /// `N = 1e5`, `K = 10`.
    pub fn desk(base_seed: u64) -> Self {
        Self {
            particle_counts: vec![10, 20, 50, 100],
            steps: 100_000,
            realizations: 10,
            params: UngmParams::default(),
            variants: vec![UngmVariant::Epfes, UngmVariant::Gpf],
            lambda: 0.0,
            cov_regularization: DEFAULT_COV_REGULARIZATION,
            scatter: ScatterWeighting::Unweighted,
            base_seed,
        }
    }

    /// `N = 1e6`, `K = 50`.
    pub fn paper(base_seed: u64) -> Self {
        Self {
            steps: 1_000_000,
            realizations: 50,
            ..Self::desk(base_seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.realizations == 0 {
            return Err(Error::InvalidConfig("steps and realizations must be >= 1".into()));
        }
        if self.particle_counts.is_empty() || self.particle_counts.contains(&0) {
            return Err(Error::InvalidConfig(
                "particle_counts must be non-empty and positive".into(),
            ));
        }
        if self.variants.is_empty() {
            return Err(Error::InvalidConfig("at least one filter variant is required".into()));
        }
        self.params.validate()?;
        self.filter_config(UngmVariant::Epfes, self.particle_counts[0], 0)
            .validate()
    }

    pub fn filter_config(&self, variant: UngmVariant, num_particles: usize, seed: u64) -> EpfesConfig {
        let mut cfg = match variant {
            UngmVariant::Epfes => EpfesConfig::epfes(num_particles, self.lambda, seed),
            UngmVariant::Gpf => EpfesConfig::gpf(num_particles, seed),
        };
        cfg.cov_regularization = self.cov_regularization;
        cfg.scatter = self.scatter;
        cfg
    }

    pub fn realization_seed(&self, k: usize) -> u64 {
        mix_seed(self.base_seed, k as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UngmCell {
    pub variant: UngmVariant,
    pub num_particles: usize,
    pub mse: f64,
    pub realization_mse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UngmStudyResult {
    pub cells: Vec<UngmCell>,
}

impl UngmStudyResult {
    pub fn cell(&self, variant: UngmVariant, num_particles: usize) -> Option<&UngmCell> {
        self.cells
            .iter()
            .find(|c| c.variant == variant && c.num_particles == num_particles)
    }

    pub fn report(&self) -> ExperimentReport {
        let mut report = ExperimentReport::default();
        for c in &self.cells {
            report.push(
                "ungm",
                c.variant.name(),
                &c.num_particles.to_string(),
                "all",
                "mse",
                c.mse,
            );
        }
        report
    }

    /// Per-realization MSE rows `(variant, L, realization, mse)`.
    pub fn write_realizations_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        w.write_record(["variant", "L", "realization", "mse"])?;
        for c in &self.cells {
            for (k, v) in c.realization_mse.iter().enumerate() {
                w.write_record([
                    c.variant.name().to_string(),
                    c.num_particles.to_string(),
                    k.to_string(),
                    v.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs one filter over a trajectory and returns the posterior-mean estimates.
pub fn filter_ungm(
    trajectory: &UngmTrajectory,
    params: &UngmParams,
    config: EpfesConfig,
    rng: ChaCha8Rng,
) -> Result<Vec<f64>> {
    let model = UngmModel::new(*params)?;
    let mut filter = ElitistParticleFilter::with_rng(model, params.noise()?, config, rng)?;
    trajectory
        .observations
        .iter()
        .map(|&d| Ok(filter.step(d, &())?.estimate[0]))
        .collect()
}

/// Monte Carlo MSE study. Realization `k` draws its trajectory from stream 0
/// and every filter from stream 1 of `ChaCha8(mix_seed(base_seed, k))`, so all
/// variants and particle counts see the same data and the same filter stream.
pub fn run_ungm_study(spec: &UngmStudySpec, exec: Execution) -> Result<UngmStudyResult> {
    spec.validate()?;
    let ks: Vec<usize> = (0..spec.realizations).collect();
    let trajectories = try_map_jobs(exec, &ks, |&k| {
        generate_trajectory_with(
            &spec.params,
            spec.steps,
            &mut stream(spec.realization_seed(k), SYSTEM_STREAM),
        )
    })?;

    let mut jobs = Vec::new();
    for &variant in &spec.variants {
        for &l in &spec.particle_counts {
            for k in 0..spec.realizations {
                jobs.push((variant, l, k));
            }
        }
    }
    let errors = try_map_jobs(exec, &jobs, |&(variant, l, k)| {
        let seed = spec.realization_seed(k);
        let traj = &trajectories[k];
        let est = filter_ungm(
            traj,
            &spec.params,
            spec.filter_config(variant, l, seed),
            stream(seed, FILTER_STREAM),
        )?;
        mse(&traj.states, &[est])
    })?;

    let k_count = spec.realizations;
    let cells = jobs
        .chunks(k_count)
        .zip(errors.chunks(k_count))
        .map(|(job, realization_mse)| UngmCell {
            variant: job[0].0,
            num_particles: job[0].1,
            mse: realization_mse.iter().sum::<f64>() / k_count as f64,
            realization_mse: realization_mse.to_vec(),
        })
        .collect();
    Ok(UngmStudyResult { cells })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AecConfigId {
    C1,
    C2,
    C3,
}

impl AecConfigId {
    pub const ALL: [AecConfigId; 3] = [AecConfigId::C1, AecConfigId::C2, AecConfigId::C3];

    /// `(T, L)`: C1 has 14 state entries and 100 particles, C2 44 and 100, C3 44 and 20.
    pub fn half_width_and_particles(self) -> (usize, usize) {
        match self {
            AecConfigId::C1 => (5, 100),
            AecConfigId::C2 => (20, 100),
            AecConfigId::C3 => (20, 20),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AecConfigId::C1 => "C1",
            AecConfigId::C2 => "C2",
            AecConfigId::C3 => "C3",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AecParamId {
    /// Gaussian particle filter.
    P1,
    /// Adaptive mean threshold, lambda 0.5.
    P2,
    /// Adaptive mean threshold, lambda 0.7.
    P3,
}

impl AecParamId {
    pub const ALL: [AecParamId; 3] = [AecParamId::P1, AecParamId::P2, AecParamId::P3];

    pub fn filter_config(self, num_particles: usize, seed: u64) -> EpfesConfig {
        match self {
            AecParamId::P1 => EpfesConfig::gpf(num_particles, seed),
            AecParamId::P2 => EpfesConfig::epfes(num_particles, 0.5, seed),
            AecParamId::P3 => EpfesConfig::epfes(num_particles, 0.7, seed),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AecParamId::P1 => "P1",
            AecParamId::P2 => "P2",
            AecParamId::P3 => "P3",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AecStudySpec {
    pub configs: Vec<AecConfigId>,
    pub params: Vec<AecParamId>,
    pub scenario: ScenarioSpec,
    /// Shared run settings; `half_width` and `estimator` are set per cell.
    pub run: AecRunSpec,
    pub seeds: usize,
    pub base_seed: u64,
    /// When false only the first seed's scenario is used and `seeds`
    /// changes only the filter streams.
    pub vary_scenario: bool,
    /// Keep decimated ERLE and coefficient traces of every cell.
    pub keep_traces: bool,
    /// Keep every n-th sample of the traces.
    pub trace_decimation: usize,
}

impl Default for AecStudySpec {
    fn default() -> Self {
        Self {
            configs: AecConfigId::ALL.to_vec(),
            params: AecParamId::ALL.to_vec(),
            scenario: ScenarioSpec::default(),
            run: AecRunSpec::default(),
            seeds: 5,
            base_seed: 0,
            vary_scenario: true,
            keep_traces: true,
            trace_decimation: 16,
        }
    }
}

impl AecStudySpec {
    /// Scenario of seed index `s`: input, room and noise seeds derived from the seed.
    pub fn scenario_for(&self, s: usize) -> ScenarioSpec {
        let mut sc = self.scenario.clone();
        if self.vary_scenario && s > 0 {
            let seed = mix_seed(self.base_seed, s as u64);
            sc.input_seed = splitmix64(seed ^ 1);
            sc.noise_seed = splitmix64(seed ^ 2);
            if let RirSpec::Synthetic { seed: rir_seed, .. } = &mut sc.rir {
                *rir_seed = splitmix64(seed ^ 3);
            }
        }
        sc
    }

    pub fn run_for(&self, config: AecConfigId, param: AecParamId, s: usize) -> AecRunSpec {
        let (t, l) = config.half_width_and_particles();
        let mut run = self.run.clone();
        run.half_width = t;
        let mut cfg = param.filter_config(l, mix_seed(self.base_seed, s as u64));
        if let Some(base) = &self.run.estimator {
            cfg.cov_regularization = base.cov_regularization;
            cfg.scatter = base.scatter;
        }
        run.estimator = Some(cfg);
        run
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AecCell {
    pub config: AecConfigId,
    pub param: AecParamId,
    pub seed_index: usize,
    pub adapting_erle_db: f64,
    pub frozen_erle_db: f64,
    /// Variance of each coefficient trace from 1 s up to the freeze.
    pub coeff_variance: [f64; 3],
    pub final_coeffs: [f64; 3],
    /// Sample at which the particle filter broke down, if it did.
    pub estimator_failure: Option<usize>,
    pub traces: Option<AecTraces>,
}

/// Decimated traces of one run: rows `(time_s, erle_db)` and `(time_s, a1, a2, a3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AecTraces {
    pub erle: Vec<Vec<f64>>,
    pub coeffs: Vec<Vec<f64>>,
}

impl AecTraces {
    pub fn from_run(result: &AecRunResult, decimation: usize) -> Self {
        Self {
            erle: result.erle_rows(decimation).collect(),
            coeffs: result.coeff_rows(decimation).collect(),
        }
    }

    pub fn write_erle_csv<W: Write>(&self, writer: W) -> Result<()> {
        crate::signal::write_csv(writer, &["time_s", "erle_db"], self.erle.iter().cloned())
    }

    pub fn write_coeff_csv<W: Write>(&self, writer: W) -> Result<()> {
        crate::signal::write_csv(writer, &["time_s", "a1", "a2", "a3"], self.coeffs.iter().cloned())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AecStudyResult {
    pub cells: Vec<AecCell>,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

impl AecStudyResult {
    pub fn cells_for(&self, config: AecConfigId, param: AecParamId) -> impl Iterator<Item = &AecCell> {
        self.cells
            .iter()
            .filter(move |c| c.config == config && c.param == param)
    }

    pub fn median_frozen(&self, config: AecConfigId, param: AecParamId) -> f64 {
        median(
            &mut self
                .cells_for(config, param)
                .map(|c| c.frozen_erle_db)
                .collect::<Vec<_>>(),
        )
    }

    pub fn median_adapting(&self, config: AecConfigId, param: AecParamId) -> f64 {
        median(
            &mut self
                .cells_for(config, param)
                .map(|c| c.adapting_erle_db)
                .collect::<Vec<_>>(),
        )
    }

    /// Median-over-seeds summaries plus one row per seed.
    pub fn report(&self, spec: &AecStudySpec) -> ExperimentReport {
        let mut r = ExperimentReport::default();
        for &config in &spec.configs {
            for &param in &spec.params {
                let (c, p) = (config.name(), param.name());
                r.push("aec", p, c, "adapting", "erle_db", self.median_adapting(config, param));
                r.push("aec", p, c, "frozen", "erle_db", self.median_frozen(config, param));
                for i in 0..3 {
                    let mut v: Vec<f64> = self
                        .cells_for(config, param)
                        .map(|cell| cell.coeff_variance[i])
                        .collect();
                    r.push("aec", p, c, "adapting", &format!("a{}_variance", i + 1), median(&mut v));
                }
                for cell in self.cells_for(config, param) {
                    let tag = format!("seed{}", cell.seed_index);
                    r.push(
                        "aec",
                        p,
                        c,
                        &format!("adapting_{tag}"),
                        "erle_db",
                        cell.adapting_erle_db,
                    );
                    r.push("aec", p, c, &format!("frozen_{tag}"), "erle_db", cell.frozen_erle_db);
                    if let Some(sample) = cell.estimator_failure {
                        r.push(
                            "aec",
                            p,
                            c,
                            &tag,
                            "estimator_failure_s",
                            sample as f64 / SAMPLE_RATE as f64,
                        );
                    }
                }
            }
        }
        r
    }
}

/// Runs every (seed, configuration, parametrization) cell. Scenarios are
/// built once per seed and shared by all cells of that seed.
pub fn run_aec_study(spec: &AecStudySpec, exec: Execution) -> Result<AecStudyResult> {
    if spec.seeds == 0 || spec.configs.is_empty() || spec.params.is_empty() {
        return Err(Error::InvalidConfig(
            "AEC study needs seeds, configurations and parametrizations".into(),
        ));
    }
    let seed_ids: Vec<usize> = if spec.vary_scenario {
        (0..spec.seeds).collect()
    } else {
        vec![0]
    };
    let scenarios = try_map_jobs(exec, &seed_ids, |&s| spec.scenario_for(s).build())?;

    let mut jobs = Vec::new();
    for s in 0..spec.seeds {
        for &config in &spec.configs {
            for &param in &spec.params {
                jobs.push((s, config, param));
            }
        }
    }
    let one_second = SAMPLE_RATE as usize;
    let cells = try_map_jobs(exec, &jobs, |&(s, config, param)| {
        let scenario = &scenarios[if spec.vary_scenario { s } else { 0 }];
        let result = run_aec_experiment(scenario, &spec.run_for(config, param, s))?;
        let lo = one_second.min(result.freeze_index);
        Ok::<_, Error>(AecCell {
            config,
            param,
            seed_index: s,
            adapting_erle_db: result.adapting_erle_db,
            frozen_erle_db: result.frozen_erle_db,
            coeff_variance: coeff_variance(&result.coeffs, lo..result.freeze_index + 1),
            final_coeffs: *result.coeffs.last().expect("non-empty run"),
            estimator_failure: result.estimator_failure.as_ref().map(|f| f.sample),
            traces: spec
                .keep_traces
                .then(|| AecTraces::from_run(&result, spec.trace_decimation)),
        })
    })?;
    Ok(AecStudyResult { cells })
}
