//! `frsicl`: run, sweep, train and replay UAV data-collection experiments.

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use frsicl::harness::{
    load_config, replay_dir, run_experiment, run_training, sweep_sensors, ExperimentSpec, HarnessError, PolicyKind,
    RunRecord,
};
use frsicl::icl::{BackendKind, MockStrategy, API_KEY_VAR};

#[derive(Parser, Debug)]
#[command(name = "frsicl", version, about = "UAV sensor scheduling and speed control experiments minimising Age of Information")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one policy over one or more seeds.
    Run(Common),
    /// Compare policies across sensor counts.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Policies to compare (default: icl, nearest).
        #[arg(long = "policies", value_delimiter = ',')]
        policies: Vec<PolicyKind>,
        /// Sensor counts (default: 5,10,15).
        #[arg(long, value_delimiter = ',')]
        counts: Vec<usize>,
    },
    /// Train the PPO baseline; writes params.bin and curve.csv.
    TrainPpo {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Evaluate a trained PPO network greedily.
    EvalPpo(Common),
    /// Re-simulate steps.csv in a run directory and verify every logged step.
    Replay {
        /// Run directory (defaults to --out-dir, then `out`).
        dir: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Experiment JSON; absent keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed; repeat for several replicates.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Number of consecutive seeds starting at the first --seed (or 0).
    #[arg(long)]
    replicates: Option<u64>,
    #[arg(long)]
    policy: Option<PolicyKind>,
    /// OpenAI-compatible endpoint; the key is read from FRSICL_API_KEY.
    #[arg(long)]
    llm_endpoint: Option<String>,
    #[arg(long)]
    llm_model: Option<String>,
    /// Offline backend: max-aoi, nearest or invalid.
    #[arg(long, value_parser = parse_mock)]
    mock_llm: Option<MockStrategy>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Trained PPO parameters.
    #[arg(long)]
    params: Option<PathBuf>,
}

fn parse_mock(s: &str) -> Result<MockStrategy, String> {
    match s.trim_start_matches("mock:") {
        "max-aoi" => Ok(MockStrategy::MaxAoi),
        "nearest" => Ok(MockStrategy::Nearest),
        "invalid" => Ok(MockStrategy::Invalid),
        other => Err(format!("unknown mock strategy `{other}` (expected max-aoi, nearest or invalid)")),
    }
}

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::Invalid(msg.into())
}

impl Common {
    fn spec(&self) -> Result<ExperimentSpec, HarnessError> {
        let mut spec = match &self.config {
            Some(p) => load_config(p)?,
            None => ExperimentSpec::default(),
        };
        if let Some(p) = self.policy {
            spec.policy = p;
        }
        match (self.replicates, self.seeds.as_slice()) {
            (Some(0), _) => return Err(invalid("--replicates must be at least 1")),
            (Some(r), seeds) if seeds.len() > 1 => {
                return Err(invalid(format!("--replicates {r} takes at most one --seed as the start")))
            }
            (Some(r), seeds) => {
                let base = seeds.first().copied().unwrap_or(0);
                spec.seeds = (base..base + r).collect();
            }
            (None, []) => {}
            (None, seeds) => spec.seeds = seeds.to_vec(),
        }
        if self.llm_endpoint.is_some() && self.mock_llm.is_some() {
            return Err(invalid("--llm-endpoint and --mock-llm are mutually exclusive"));
        }
        if let Some(e) = &self.llm_endpoint {
            spec.icl.endpoint = Some(e.clone());
            spec.icl.backend = BackendKind::Http;
        }
        if let Some(m) = self.mock_llm {
            spec.icl.backend = BackendKind::Mock(m);
        }
        if let Some(m) = &self.llm_model {
            spec.icl.model = m.clone();
        }
        if let Some(d) = &self.out_dir {
            spec.out_dir = d.clone();
        }
        if let Some(p) = &self.params {
            spec.ppo_params = Some(p.clone());
        }
        spec.validate()
    }
}

/// The language-model policy needs a backend: an endpoint plus key, or a mock.
fn check_llm(spec: &ExperimentSpec, policies: &[PolicyKind]) -> Result<(), HarnessError> {
    if !policies.contains(&PolicyKind::Icl) || spec.icl.backend != BackendKind::Http {
        return Ok(());
    }
    if spec.icl.endpoint.as_deref().is_none_or(str::is_empty) {
        return Err(invalid(
            "the icl policy needs a language model: pass --llm-endpoint <url> (with FRSICL_API_KEY set) \
or --mock-llm <max-aoi|nearest|invalid> for an offline run",
        ));
    }
    if std::env::var(API_KEY_VAR).map_or(true, |k| k.is_empty()) {
        return Err(invalid(format!("--llm-endpoint needs the {API_KEY_VAR} environment variable")));
    }
    Ok(())
}

fn print_runs(runs: &[RunRecord]) {
    for r in runs {
        let fb = if r.policy == PolicyKind::Icl {
            format!(" fallbacks={}", r.fallbacks)
        } else {
            String::new()
        };
        println!(
            "{} time_avg_aoi_s={:.4} success_rate={:.3}{fb}",
            r.run_id,
            r.summary.time_avg_aoi_s,
            r.summary.success_rate()
        );
    }
}

fn execute(cmd: Command) -> Result<(), HarnessError> {
    match cmd {
        Command::Run(c) => {
            let spec = c.spec()?;
            check_llm(&spec, &[spec.policy])?;
            let runs = run_experiment(&spec)?;
            print_runs(&runs);
            println!("wrote {}", spec.out_dir.display());
        }
        Command::EvalPpo(c) => {
            if c.params.is_none() {
                return Err(invalid("eval-ppo needs --params <file> from train-ppo"));
            }
            let mut spec = c.spec()?;
            spec.policy = PolicyKind::Ppo;
            let runs = run_experiment(&spec)?;
            print_runs(&runs);
            println!("wrote {}", spec.out_dir.display());
        }
        Command::Sweep {
            common,
            policies,
            counts,
        } => {
            let mut spec = common.spec()?;
            if !policies.is_empty() {
                spec.policies = policies;
            }
            if !counts.is_empty() {
                spec.sensor_counts = counts;
            }
            check_llm(&spec, &spec.policies)?;
            let counts = spec.sensor_counts.clone();
            let (rows, _) = sweep_sensors(&spec, &counts)?;
            for r in rows {
                println!(
                    "n={} policy={} mean_aoi_s={:.4} std_aoi_s={:.4} runs={}",
                    r.n_sensors, r.policy, r.mean_aoi_s, r.std_aoi_s, r.n_runs
                );
            }
            println!("wrote {}", spec.out_dir.join("sweep.csv").display());
        }
        Command::TrainPpo { common, episodes } => {
            let mut spec = common.spec()?;
            if let Some(e) = episodes {
                spec.ppo.episodes = e;
            }
            let seed = spec.run_seeds()[0];
            let out = run_training(&spec, seed)?;
            let tail = &out.curve[out.curve.len().saturating_sub(20)..];
            let mean = tail.iter().map(|r| r.mean_aoi).sum::<f64>() / tail.len().max(1) as f64;
            println!("trained {} episodes, final-{} mean AoI {:.4} s", out.curve.len(), tail.len(), mean);
            println!("wrote {}", spec.out_dir.join("params.bin").display());
        }
        Command::Replay { dir, out_dir } => {
            let dir = dir.or(out_dir).unwrap_or_else(|| PathBuf::from("out"));
            let r = replay_dir(&dir)?;
            println!("replay ok: {} runs, {} steps", r.runs, r.steps);
        }
    }
    Ok(())
}

/// A failed invocation: clap's usage error or a harness error.
#[derive(Debug)]
enum Failure {
    Usage(clap::Error),
    Run(HarnessError),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(e) if !e.use_stderr() => 0,
            Failure::Usage(_) => 1,
            Failure::Run(e) => e.exit_code() as u8,
        }
    }
}

fn run_cli(args: impl IntoIterator<Item = OsString>) -> Result<(), Failure> {
    let cli = Cli::try_parse_from(args).map_err(Failure::Usage)?;
    execute(cli.command).map_err(Failure::Run)
}

fn main() -> ExitCode {
    match run_cli(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(e) => {
                    let _ = e.print();
                }
                Failure::Run(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(f.exit_code())
        }
    }
}
