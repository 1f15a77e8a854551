//! End-to-end checks of the public API: filtering, studies and scenarios.

use epfes::aec::{run_aec_experiment, AecRunSpec, RirSpec, ScenarioSpec};
use epfes::experiments::{
    mse, run_aec_study, run_ungm_study, AecConfigId, AecParamId, AecStudySpec, UngmStudySpec, UngmVariant,
};
use epfes::par::Execution;
use epfes::ungm::{generate_trajectory, UngmModel, UngmParams};
use epfes::{ElitistParticleFilter, EpfesConfig, Error};

fn filter_mse(config: EpfesConfig, steps: usize, seed: u64) -> f64 {
    let params = UngmParams::default();
    let trajectory = generate_trajectory(&params, steps, seed).unwrap();
    let mut filter =
        ElitistParticleFilter::new(UngmModel::new(params).unwrap(), params.noise().unwrap(), config).unwrap();
    let estimates: Vec<f64> = trajectory
        .observations
        .iter()
        .map(|&d| filter.step(d, &()).unwrap().estimate[0])
        .collect();
    mse(&trajectory.states, &[estimates]).unwrap()
}

#[test]
fn filters_beat_the_observation_blind_baseline() {
    let params = UngmParams::default();
    let trajectory = generate_trajectory(&params, 2_000, 3).unwrap();
    let second_moment = trajectory.states.iter().map(|z| z * z).sum::<f64>() / trajectory.len() as f64;
    for config in [EpfesConfig::epfes(100, 0.0, 3), EpfesConfig::gpf(100, 3)] {
        let err = filter_mse(config, 2_000, 3);
        assert!(
            err.is_finite() && err < second_moment,
            "mse {err} vs E[z^2] {second_moment}"
        );
    }
}

#[test]
fn ungm_study_is_independent_of_execution_mode() {
    let spec = UngmStudySpec {
        steps: 300,
        realizations: 3,
        particle_counts: vec![10, 50],
        ..UngmStudySpec::desk(9)
    };
    let par = run_ungm_study(&spec, Execution::Parallel).unwrap();
    let seq = run_ungm_study(&spec, Execution::Sequential).unwrap();
    assert_eq!(par, seq);
    assert!(par.report().all_finite());
    assert!(par.cell(UngmVariant::Gpf, 50).is_some());
    assert!(par.cell(UngmVariant::Epfes, 20).is_none());
}

#[test]
fn ungm_report_csv_has_one_row_per_cell() {
    let spec = UngmStudySpec {
        steps: 100,
        realizations: 2,
        ..UngmStudySpec::desk(1)
    };
    let result = run_ungm_study(&spec, Execution::Sequential).unwrap();
    let mut buf = Vec::new();
    result.report().write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 1 + 8);
    assert!(text.contains("ungm,gpf,100,all,mse,"));
}

#[test]
fn invalid_study_is_rejected() {
    let spec = UngmStudySpec {
        particle_counts: vec![],
        ..UngmStudySpec::desk(0)
    };
    assert!(matches!(spec.validate(), Err(Error::InvalidConfig(_))));
}

#[test]
fn short_aec_study_is_reproducible() {
    let mut spec = AecStudySpec {
        configs: vec![AecConfigId::C3],
        params: vec![AecParamId::P2],
        seeds: 2,
        ..AecStudySpec::default()
    };
    spec.scenario.duration_s = 0.6;
    spec.run.schedule.freeze_s = 0.4;
    let a = run_aec_study(&spec, Execution::Parallel).unwrap();
    let b = run_aec_study(&spec, Execution::Sequential).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.cells.len(), 2);
    assert!(a
        .cells
        .iter()
        .all(|c| c.frozen_erle_db.is_finite() && c.traces.is_some()));
    assert!(a.report(&spec).all_finite());
}

#[test]
fn measured_rir_is_loaded_from_wav() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rir.wav");
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: 16_000,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(&path, spec).unwrap();
    let taps: [i16; 6] = [0, 0, 16384, -8192, 4096, 0];
    for t in taps {
        w.write_sample(t).unwrap();
    }
    w.finalize().unwrap();

    let rir = RirSpec::WavFile { path: path.clone() }.build().unwrap();
    assert_eq!(rir, vec![0.0, 0.0, 0.5, -0.25, 0.125, 0.0]);

    let scenario = ScenarioSpec {
        duration_s: 0.2,
        rir: RirSpec::WavFile { path },
        ..ScenarioSpec::default()
    }
    .build()
    .unwrap();
    let mut run = AecRunSpec {
        estimator: None,
        nlms: epfes::aec::NlmsParams {
            taps: 6,
            ..Default::default()
        },
        ..AecRunSpec::default()
    };
    run.schedule.freeze_s = 0.1;
    let result = run_aec_experiment(&scenario, &run).unwrap();
    assert_eq!(result.erle_db.len(), scenario.len());
}

#[test]
fn stereo_wav_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stereo.wav");
    let spec = hound::WavSpec {
        channels: 2,
        sample_rate: 16_000,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(&path, spec).unwrap();
    w.write_sample(0i16).unwrap();
    w.write_sample(0i16).unwrap();
    w.finalize().unwrap();
    assert!(matches!(epfes::signal::read_wav(&path), Err(Error::WavFormat { .. })));
}
