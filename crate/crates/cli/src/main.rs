//! `epfes` command-line harness: UNGM and echo-cancellation studies plus a
//! correctness self-test.

mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use epfes::experiments::{run_aec_study, run_ungm_study, UngmStudySpec};
use epfes::par::Execution;

use config::{load_config, to_toml, ConfigError, ConfigFile, ManifestInfo};

const AFTER_HELP: &str = "\
Config file (TOML, unknown keys rejected; every key optional):
  [ungm]  particle_counts = [10, 20, 50, 100], steps = 100000, realizations = 10,
          variants = [\"epfes\", \"gpf\"], lambda = 0.0, cov_regularization = 1e-6,
          scatter = \"unweighted\" | \"weighted\", base_seed = 0,
          [ungm.params] alpha = 0.5, beta = 25.0, gamma = 8.0, process_var = 1.0,
                        obs_var = 1.0, z0_mean = 0.0, z0_var = 1.0
  [aec]   configs = [\"C1\", \"C2\", \"C3\"], params = [\"P1\", \"P2\", \"P3\"], seeds = 5,
          base_seed = 0, vary_scenario = true, keep_traces = true, trace_decimation = 16
          [aec.scenario] input = \"speech-like\", duration_s = 18.0, input_amplitude = 0.33,
                         input_seed = 7, nonlinearity = \"tanh\" | \"identity\",
                         snr_db = 10.0 (inf disables noise), noise_seed = 11,
                         rir = { synthetic = { len = 254, direct_lag = 32, decay_ms = 4.0, seed = 1 } }
          [aec.run] half_width = 20, process_var = 0.01, coeff_init_var = 0.25,
                    taps_init_var = 0.01, obs_var (default: scenario noise variance),
                    erle_smoothing = 0.999, erle_ceiling_db = 80.0,
                    nlms = { taps = 254, stepsize = 0.5, eps = 1e-4 },
                    schedule = { warmup_s = 0.1, freeze_s = 9.0 }
Every run writes manifest.toml next to its outputs; pass it back with
--config to reproduce the run.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.";

#[derive(Debug, Parser)]
#[command(name = "epfes", version, about = "EPFES / GPF benchmark studies", arg_required_else_help = true, after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// UNGM Monte Carlo MSE study (writes report.csv, ungm_realizations.csv).
    Ungm(CommonArgs),
    /// Echo-cancellation study over C1-C3 x P1-P3 (writes report.csv and traces/).
    Aec(CommonArgs),
    /// Runs the correctness oracles and prints one PASS/FAIL line each.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML config file (see below).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "EPFES_OUTPUT_DIR", default_value = "epfes-out")]
    output_dir: PathBuf,
    /// Base seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// UNGM size preset: desk (N = 1e5, K = 10) or paper (N = 1e6, K = 50).
    /// Overrides steps and realizations from the config. No effect on `aec`.
    #[arg(long, value_enum)]
    scale: Option<Scale>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Run jobs one after another instead of in the worker pool.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scale {
    Desk,
    Paper,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<epfes::Error> for Failure {
    fn from(e: epfes::Error) -> Self {
        match e {
            epfes::Error::InvalidConfig(msg) => Failure::Config(msg),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ungm(args) => run_ungm(&args),
        Command::Aec(args) => run_aec(&args),
        Command::Selftest(args) => run_selftest(args.seed),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Config(msg)) => {
            eprintln!("epfes: config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("epfes: error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn execution(args: &CommonArgs) -> Result<Execution, Failure> {
    if let Some(threads) = args.threads {
        if threads == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        #[cfg(feature = "parallel")]
        epfes::par::init_thread_pool(threads).map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    Ok(if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    })
}

fn load(args: &CommonArgs) -> Result<ConfigFile, Failure> {
    Ok(match &args.config {
        Some(path) => load_config(path)?,
        None => ConfigFile::default(),
    })
}

fn prepare_output(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| io_failure(path, e))
}

fn write_manifest(dir: &Path, config: &ConfigFile) -> Result<(), Failure> {
    let text = to_toml(config).map_err(|e| Failure::Runtime(format!("manifest: {e}")))?;
    let path = dir.join("manifest.toml");
    fs::write(&path, text).map_err(|e| io_failure(&path, e))
}

fn manifest_info(command: &str, exec: Execution, derived: impl IntoIterator<Item = u64>) -> ManifestInfo {
    ManifestInfo {
        command: command.into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        core_version: epfes::VERSION.into(),
        execution: if exec == Execution::Parallel && Execution::is_parallel_available() {
            "parallel".into()
        } else {
            "sequential".into()
        },
        derived_seeds: derived.into_iter().map(|s| format!("{s:#018x}")).collect(),
    }
}

fn run_ungm(args: &CommonArgs) -> Result<ExitCode, Failure> {
    let file = load(args)?;
    let mut spec = file.ungm.unwrap_or_else(|| UngmStudySpec::desk(0));
    if let Some(seed) = args.seed {
        spec.base_seed = seed;
    }
    match args.scale {
        Some(Scale::Desk) => {
            let preset = UngmStudySpec::desk(spec.base_seed);
            (spec.steps, spec.realizations) = (preset.steps, preset.realizations);
        }
        Some(Scale::Paper) => {
            let preset = UngmStudySpec::paper(spec.base_seed);
            (spec.steps, spec.realizations) = (preset.steps, preset.realizations);
        }
        None => {}
    }
    spec.validate()?;
    let exec = execution(args)?;
    prepare_output(&args.output_dir)?;

    let result = run_ungm_study(&spec, exec)?;
    let dir = &args.output_dir;
    let report = dir.join("report.csv");
    result.report().write_csv(create(&report)?)?;
    let spread = dir.join("ungm_realizations.csv");
    result.write_realizations_csv(create(&spread)?)?;

    let seeds = (0..spec.realizations).map(|k| spec.realization_seed(k));
    let info = manifest_info("ungm", exec, seeds);
    write_manifest(
        dir,
        &ConfigFile {
            ungm: Some(spec),
            aec: None,
            manifest: Some(info),
        },
    )?;
    for cell in &result.cells {
        println!("{} L={} mse={:.4}", cell.variant.name(), cell.num_particles, cell.mse);
    }
    println!("wrote {} and {}", report.display(), spread.display());
    Ok(ExitCode::SUCCESS)
}

fn run_aec(args: &CommonArgs) -> Result<ExitCode, Failure> {
    let file = load(args)?;
    let mut spec = file.aec.unwrap_or_default();
    if let Some(seed) = args.seed {
        spec.base_seed = seed;
    }
    if spec.trace_decimation == 0 {
        return Err(Failure::Config("aec.trace_decimation must be at least 1".into()));
    }
    let exec = execution(args)?;
    prepare_output(&args.output_dir)?;

    let result = run_aec_study(&spec, exec)?;
    let dir = &args.output_dir;
    let report = dir.join("report.csv");
    result.report(&spec).write_csv(create(&report)?)?;
    if spec.keep_traces {
        let traces = dir.join("traces");
        prepare_output(&traces)?;
        for cell in &result.cells {
            let Some(t) = &cell.traces else { continue };
            let stem = format!("{}_{}_seed{}", cell.config.name(), cell.param.name(), cell.seed_index);
            t.write_erle_csv(create(&traces.join(format!("erle_{stem}.csv")))?)?;
            t.write_coeff_csv(create(&traces.join(format!("coeffs_{stem}.csv")))?)?;
        }
    }

    let seeds = (0..spec.seeds).map(|s| epfes::experiments::mix_seed(spec.base_seed, s as u64));
    let info = manifest_info("aec", exec, seeds);
    let summary: Vec<String> = spec
        .configs
        .iter()
        .flat_map(|&c| spec.params.iter().map(move |&p| (c, p)))
        .map(|(c, p)| {
            format!(
                "{} {} adapting={:.2} dB frozen={:.2} dB",
                c.name(),
                p.name(),
                result.median_adapting(c, p),
                result.median_frozen(c, p)
            )
        })
        .collect();
    write_manifest(
        dir,
        &ConfigFile {
            ungm: None,
            aec: Some(spec),
            manifest: Some(info),
        },
    )?;
    for line in summary {
        println!("{line}");
    }
    println!("wrote {}", report.display());
    Ok(ExitCode::SUCCESS)
}

fn run_selftest(seed: u64) -> Result<ExitCode, Failure> {
    let outcomes = epfes::oracles::run_all(seed)?;
    let mut all = true;
    for o in &outcomes {
        println!("{}", o.line());
        all &= o.passed;
    }
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
