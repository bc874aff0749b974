//! Running experiments and writing their CSV files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use crate::config::WorldConfig;
use crate::icl::{ExchangeLogLine, IclPolicy, LlmExchange, API_KEY_VAR};
use crate::policy::{MaxAoi, NearestNeighbor, Policy, RoundRobin};
use crate::ppo::{read_params, seeded_factory, train, write_params, CurveRow, MlpParams, PpoPolicy, TrainOutcome};
use crate::types::StepRecord;
use crate::world::{run_episode, RunSummary, World};

use super::format::fmt_sig6;
use super::spec::{ExperimentSpec, PolicyKind};
use super::HarnessError;

pub const STEPS_HEADER: [&str; 6] = ["run_id", "step", "selected_sensor", "velocity_mps", "success", "avg_aoi_s"];
pub const SENSORS_HEADER: [&str; 6] = ["run_id", "sensor_id", "x_m", "y_m", "mean_aoi_s", "final_aoi_s"];
pub const SUMMARY_HEADER: [&str; 7] = [
    "run_id",
    "policy",
    "n_sensors",
    "seed",
    "time_avg_aoi_s",
    "success_rate",
    "wall_ms",
];
pub const SWEEP_HEADER: [&str; 5] = ["n_sensors", "policy", "mean_aoi_s", "std_aoi_s", "n_runs"];
pub const CURVE_HEADER: [&str; 3] = ["episode", "mean_reward", "mean_aoi"];

pub fn run_id(policy: PolicyKind, n_sensors: usize, seed: u64) -> String {
    format!("{policy}-n{n_sensors}-s{seed}")
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub run_id: String,
    pub policy: PolicyKind,
    pub seed: u64,
    pub n_sensors: usize,
    pub summary: RunSummary,
    pub log: Vec<StepRecord>,
    pub sensor_positions: Vec<[f64; 2]>,
    pub exchanges: Vec<LlmExchange>,
    pub fallbacks: usize,
    pub wall_ms: f64,
}

fn load_ppo(spec: &ExperimentSpec) -> Result<MlpParams<f64>, HarnessError> {
    let path = spec
        .ppo_params
        .as_deref()
        .ok_or_else(|| HarnessError::Invalid("the ppo policy needs trained parameters (--params <file>)".into()))?;
    let file = File::open(path).map_err(HarnessError::io(path))?;
    read_params(std::io::BufReader::new(file)).map_err(|source| HarnessError::Params {
        path: path.to_path_buf(),
        source,
    })
}

/// One episode of `policy` in a fresh world seeded with `seed`.
pub fn run_one(spec: &ExperimentSpec, policy: PolicyKind, world_cfg: &WorldConfig, seed: u64) -> Result<RunRecord, HarnessError> {
    let mut world = World::new(world_cfg.clone(), seed)?;
    let start = Instant::now();
    let (summary, exchanges, fallbacks) = match policy {
        PolicyKind::Icl => {
            let key = std::env::var(API_KEY_VAR).ok();
            let mut p = IclPolicy::from_config(spec.icl.clone(), world_cfg.clone(), key)?;
            let s = run_episode(&mut world, &mut p)?;
            let fb = p.fallbacks();
            (s, p.take_exchanges(), fb)
        }
        other => {
            let mut p: Box<dyn Policy> = match other {
                PolicyKind::Ppo => Box::new(PpoPolicy::new(load_ppo(spec)?, world_cfg.clone(), true).map_err(crate::ppo::PpoError::from)?),
                PolicyKind::Nearest => Box::new(NearestNeighbor),
                PolicyKind::RoundRobin => Box::new(RoundRobin::new()),
                PolicyKind::MaxAoi => Box::new(MaxAoi),
                PolicyKind::Icl => unreachable!(),
            };
            (run_episode(&mut world, p.as_mut())?, Vec::new(), 0)
        }
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(RunRecord {
        run_id: run_id(policy, world_cfg.n_sensors, seed),
        policy,
        seed,
        n_sensors: world_cfg.n_sensors,
        summary,
        log: world.log().to_vec(),
        sensor_positions: world.sensors().iter().map(|s| s.pos).collect(),
        exchanges,
        fallbacks,
        wall_ms,
    })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>, HarnessError> {
    let file = File::create(path).map_err(HarnessError::io(path))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(source) => HarnessError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => HarnessError::Csv {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<(), HarnessError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    w.write_record(header).map_err(&err)?;
    for row in rows {
        w.write_record(row).map_err(&err)?;
    }
    w.flush().map_err(HarnessError::io(path))
}

/// Rows in (run, step) order.
pub fn write_steps_csv(path: &Path, runs: &[RunRecord]) -> Result<(), HarnessError> {
    let rows = runs.iter().flat_map(|r| {
        r.log.iter().map(move |s| {
            vec![
                r.run_id.clone(),
                s.step.to_string(),
                s.action.sensor.to_string(),
                fmt_sig6(s.action.velocity_mps),
                u8::from(s.success).to_string(),
                fmt_sig6(s.avg_aoi_s),
            ]
        })
    });
    write_rows(path, &STEPS_HEADER, rows)
}

pub fn write_sensors_csv(path: &Path, runs: &[RunRecord]) -> Result<(), HarnessError> {
    let rows = runs.iter().flat_map(|r| {
        r.sensor_positions.iter().enumerate().map(move |(i, p)| {
            vec![
                r.run_id.clone(),
                (i + 1).to_string(),
                fmt_sig6(p[0]),
                fmt_sig6(p[1]),
                fmt_sig6(r.summary.per_sensor_mean_aoi[i]),
                fmt_sig6(r.summary.per_sensor_final_aoi[i]),
            ]
        })
    });
    write_rows(path, &SENSORS_HEADER, rows)
}

pub fn write_summary_csv(path: &Path, runs: &[RunRecord]) -> Result<(), HarnessError> {
    let rows = runs.iter().map(|r| {
        vec![
            r.run_id.clone(),
            r.policy.to_string(),
            r.n_sensors.to_string(),
            r.seed.to_string(),
            fmt_sig6(r.summary.time_avg_aoi_s),
            fmt_sig6(r.summary.success_rate()),
            fmt_sig6(r.wall_ms),
        ]
    });
    write_rows(path, &SUMMARY_HEADER, rows)
}

/// One line per backend attempt, tagged with its run.
pub fn write_exchanges_jsonl(path: &Path, runs: &[RunRecord]) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(HarnessError::io(path))?;
    let mut out = BufWriter::new(file);
    for r in runs {
        for x in &r.exchanges {
            let mut v = serde_json::to_value(ExchangeLogLine::from(x)).expect("log line serialises");
            v["run_id"] = serde_json::Value::from(r.run_id.clone());
            writeln!(out, "{v}").map_err(HarnessError::io(path))?;
        }
    }
    out.flush().map_err(HarnessError::io(path))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n_sensors: usize,
    pub policy: PolicyKind,
    pub mean_aoi_s: f64,
    /// Sample standard deviation (n − 1); zero for a single run.
    pub std_aoi_s: f64,
    pub n_runs: usize,
}

/// Groups runs by (sensor count, policy) in first-appearance order.
pub fn aggregate(runs: &[RunRecord]) -> Vec<SweepRow> {
    let mut keys: Vec<(usize, PolicyKind)> = Vec::new();
    for r in runs {
        if !keys.contains(&(r.n_sensors, r.policy)) {
            keys.push((r.n_sensors, r.policy));
        }
    }
    keys.into_iter()
        .map(|(n, p)| {
            let xs: Vec<f64> = runs
                .iter()
                .filter(|r| r.n_sensors == n && r.policy == p)
                .map(|r| r.summary.time_avg_aoi_s)
                .collect();
            let k = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / k;
            let std = if xs.len() > 1 {
                (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0)).sqrt()
            } else {
                0.0
            };
            SweepRow {
                n_sensors: n,
                policy: p,
                mean_aoi_s: mean,
                std_aoi_s: std,
                n_runs: xs.len(),
            }
        })
        .collect()
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<(), HarnessError> {
    let rows = rows.iter().map(|r| {
        vec![
            r.n_sensors.to_string(),
            r.policy.to_string(),
            fmt_sig6(r.mean_aoi_s),
            fmt_sig6(r.std_aoi_s),
            r.n_runs.to_string(),
        ]
    });
    write_rows(path, &SWEEP_HEADER, rows)
}

pub fn write_curve_csv(path: &Path, curve: &[CurveRow]) -> Result<(), HarnessError> {
    let rows = curve
        .iter()
        .map(|c| vec![c.episode.to_string(), fmt_sig6(c.mean_reward), fmt_sig6(c.mean_aoi)]);
    write_rows(path, &CURVE_HEADER, rows)
}

fn prepare_dir(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(HarnessError::io(dir))
}

fn write_config(dir: &Path, world: &WorldConfig) -> Result<(), HarnessError> {
    let path = dir.join("config.json");
    fs::write(&path, world.to_json() + "\n").map_err(HarnessError::io(path))
}

/// Runs `spec.policy` once per seed and writes `config.json`, `steps.csv`,
/// `sensors.csv`, `summary.csv` and, for the language-model policy,
/// `exchanges.jsonl` into `spec.out_dir`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<RunRecord>, HarnessError> {
    let spec = spec.clone().validate()?;
    let runs = spec
        .run_seeds()
        .into_iter()
        .map(|seed| run_one(&spec, spec.policy, &spec.world, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let dir = &spec.out_dir;
    prepare_dir(dir)?;
    write_config(dir, &spec.world)?;
    write_steps_csv(&dir.join("steps.csv"), &runs)?;
    write_sensors_csv(&dir.join("sensors.csv"), &runs)?;
    write_summary_csv(&dir.join("summary.csv"), &runs)?;
    if spec.policy == PolicyKind::Icl {
        write_exchanges_jsonl(&dir.join("exchanges.jsonl"), &runs)?;
    }
    Ok(runs)
}

/// Every sensor count × policy × seed; writes `sweep.csv`, plus the
/// per-run `summary.csv` and `steps.csv` so the aggregates can be checked.
pub fn sweep_sensors(spec: &ExperimentSpec, counts: &[usize]) -> Result<(Vec<SweepRow>, Vec<RunRecord>), HarnessError> {
    let spec = spec.clone().validate()?;
    if counts.is_empty() || counts.contains(&0) {
        return Err(HarnessError::Invalid("sensor counts must be non-empty and positive".into()));
    }
    let mut runs = Vec::new();
    for &n in counts {
        let world = WorldConfig {
            n_sensors: n,
            ..spec.world.clone()
        }
        .validate()
        .map_err(crate::config::ConfigLoadError::from)?;
        for &p in &spec.policies {
            for seed in spec.sweep_seeds() {
                runs.push(run_one(&spec, p, &world, seed)?);
            }
        }
    }
    let rows = aggregate(&runs);
    let dir = &spec.out_dir;
    prepare_dir(dir)?;
    write_config(dir, &spec.world)?;
    write_sweep_csv(&dir.join("sweep.csv"), &rows)?;
    write_summary_csv(&dir.join("summary.csv"), &runs)?;
    write_steps_csv(&dir.join("steps.csv"), &runs)?;
    Ok((rows, runs))
}

/// Trains a network and writes `params.bin` and `curve.csv`.
pub fn run_training(spec: &ExperimentSpec, seed: u64) -> Result<TrainOutcome, HarnessError> {
    let spec = spec.clone().validate()?;
    let out = train(&spec.world, seeded_factory(spec.world.clone(), seed), &spec.ppo, seed)?;
    let dir = &spec.out_dir;
    prepare_dir(dir)?;
    write_config(dir, &spec.world)?;
    let path = dir.join("params.bin");
    let file = File::create(&path).map_err(HarnessError::io(&path))?;
    let mut w = BufWriter::new(file);
    write_params(&out.params, &mut w).map_err(|source| HarnessError::Params {
        path: path.clone(),
        source,
    })?;
    w.flush().map_err(HarnessError::io(&path))?;
    write_curve_csv(&dir.join("curve.csv"), &out.curve)?;
    Ok(out)
}
