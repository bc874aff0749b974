//! Re-simulation of logged runs.

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use crate::config::WorldConfig;
use crate::types::Action;
use crate::world::World;

use super::format::fmt_sig6;
use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct StepRow {
    pub run_id: String,
    pub step: usize,
    pub selected_sensor: usize,
    pub velocity_mps: f64,
    pub success: u8,
    /// Kept as text: the check compares the rendered value.
    pub avg_aoi_s: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SummaryRow {
    pub run_id: String,
    pub policy: String,
    pub n_sensors: usize,
    pub seed: u64,
    pub time_avg_aoi_s: f64,
    pub success_rate: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplayReport {
    pub runs: usize,
    pub steps: usize,
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => HarnessError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => HarnessError::Csv {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    })?;
    r.deserialize()
        .map(|row| {
            row.map_err(|e| HarnessError::Csv {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
        })
        .collect()
}

/// Steps each logged run again from its seed and checks selection, success
/// and the rendered average AoI row by row. Threshold-mode runs reproduce
/// exactly; the first mismatch is reported.
pub fn replay_runs(world: &WorldConfig, summaries: &[SummaryRow], rows: &[StepRow]) -> Result<ReplayReport, HarnessError> {
    let runs: HashMap<&str, &SummaryRow> = summaries.iter().map(|s| (s.run_id.as_str(), s)).collect();
    let mut order: Vec<&str> = Vec::new();
    let mut grouped: HashMap<&str, Vec<&StepRow>> = HashMap::new();
    for r in rows {
        let e = grouped.entry(r.run_id.as_str()).or_default();
        if e.is_empty() {
            order.push(r.run_id.as_str());
        }
        e.push(r);
    }
    let mut steps = 0;
    for id in &order {
        let meta = runs
            .get(id)
            .ok_or_else(|| HarnessError::Invalid(format!("run {id} is not listed in summary.csv")))?;
        let cfg = WorldConfig {
            n_sensors: meta.n_sensors,
            ..world.clone()
        };
        let mut w = World::new(cfg, meta.seed)?;
        let diverge = |step: usize, detail: String| HarnessError::ReplayDivergence {
            run_id: id.to_string(),
            step,
            detail,
        };
        for (k, row) in grouped[id].iter().enumerate() {
            let expect = k + 1;
            if row.step != expect {
                return Err(diverge(expect, format!("logged step index {}", row.step)));
            }
            let rec = w
                .step(Action::new(row.selected_sensor, row.velocity_mps))
                .map_err(|e| diverge(expect, e.to_string()))?;
            if u8::from(rec.success) != row.success {
                return Err(diverge(expect, format!("success {} vs logged {}", u8::from(rec.success), row.success)));
            }
            let got = fmt_sig6(rec.avg_aoi_s);
            if got != row.avg_aoi_s {
                return Err(diverge(expect, format!("avg_aoi_s {got} vs logged {}", row.avg_aoi_s)));
            }
            steps += 1;
        }
        if !w.is_done() {
            return Err(diverge(w.step_index() + 1, "log ends before the horizon".into()));
        }
    }
    Ok(ReplayReport {
        runs: order.len(),
        steps,
    })
}

/// Replays `steps.csv` in `dir` against its `summary.csv` and `config.json`.
pub fn replay_dir(dir: &Path) -> Result<ReplayReport, HarnessError> {
    replay_files(&dir.join("steps.csv"), &dir.join("summary.csv"), &dir.join("config.json"))
}

pub fn replay_files(steps: &Path, summary: &Path, config: &Path) -> Result<ReplayReport, HarnessError> {
    let text = std::fs::read_to_string(config).map_err(HarnessError::io(config))?;
    let world = WorldConfig::from_json(&text).map_err(|source| HarnessError::Load {
        path: config.to_path_buf(),
        source,
    })?;
    let summaries: Vec<SummaryRow> = read_csv(summary)?;
    let rows: Vec<StepRow> = read_csv(steps)?;
    replay_runs(&world, &summaries, &rows)
}
