//! Planning front-end and benchmark harness.

use std::fmt;
use std::path::{Path as FsPath, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::export::{path_csv, roadmap_json, roadmap_svg, slice_svg};
use super::scene::{load_scene, Scene};
use crate::error::{HrmError, Result};
use crate::geom::Dim;
use crate::planner::{plan_hrm, plan_prob_hrm, LocalPlanner, PlanResult, PlanStats};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlannerKind {
    Hrm,
    ProbHrm,
    /// HRM with direct collision checking in place of the bridge slice.
    HrmAblated,
}

impl FromStr for PlannerKind {
    type Err = HrmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hrm" => Ok(PlannerKind::Hrm),
            "prob-hrm" => Ok(PlannerKind::ProbHrm),
            "hrm-ablated" => Ok(PlannerKind::HrmAblated),
            _ => Err(HrmError::InvalidArgument(format!(
                "unknown planner \"{s}\" (expected hrm, prob-hrm or hrm-ablated)"
            ))),
        }
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlannerKind::Hrm => "hrm",
            PlannerKind::ProbHrm => "prob-hrm",
            PlannerKind::HrmAblated => "hrm-ablated",
        })
    }
}

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    Violations = 1,
    NoPath = 2,
    InvalidInput = 3,
}

/// Plan on a loaded scene, overriding seed and time limit when given.
pub fn plan_scene(scene: &Scene, kind: PlannerKind, seed: Option<u64>, time_limit: Option<f64>) -> Result<PlanResult> {
    let mut params = scene.params.clone();
    if let Some(s) = seed {
        params.seed = s;
    }
    if let Some(t) = time_limit {
        params.max_time = t;
    }
    match kind {
        PlannerKind::Hrm => plan_hrm(&scene.env, &scene.robot, &scene.start, &scene.goal, &params),
        PlannerKind::HrmAblated => {
            params.local_planner = LocalPlanner::Ablated;
            plan_hrm(&scene.env, &scene.robot, &scene.start, &scene.goal, &params)
        }
        PlannerKind::ProbHrm => plan_prob_hrm(&scene.env, &scene.robot, &scene.start, &scene.goal, &params),
    }
}

#[derive(Serialize)]
struct StatsFile<'a> {
    planner: PlannerKind,
    seed: u64,
    success: bool,
    path_cost: Option<f64>,
    path_length: usize,
    #[serde(flatten)]
    stats: &'a PlanStats,
}

/// Write `path.csv` (when a path exists), `roadmap.json`, `stats.json` and,
/// in 2D, `roadmap.svg` plus one SVG per slice under `slices/`.
pub fn write_outputs(scene: &Scene, kind: PlannerKind, seed: u64, result: &PlanResult, out: &FsPath) -> Result<()> {
    std::fs::create_dir_all(out)?;
    if let Some(p) = &result.path {
        std::fs::write(out.join("path.csv"), path_csv(scene.env.dim, &p.configurations)?)?;
    }
    std::fs::write(out.join("roadmap.json"), roadmap_json(&result.roadmap)?)?;
    let stats = StatsFile {
        planner: kind,
        seed,
        success: result.path.is_some(),
        path_cost: result.path.as_ref().map(|p| p.cost),
        path_length: result.path.as_ref().map_or(0, |p| p.configurations.len()),
        stats: &result.stats,
    };
    std::fs::write(
        out.join("stats.json"),
        serde_json::to_string_pretty(&stats).map_err(|e| HrmError::Io(e.to_string()))?,
    )?;
    if scene.env.dim == Dim::Two {
        std::fs::write(out.join("roadmap.svg"), roadmap_svg(&scene.env, &result.roadmap, result.path.as_ref()))?;
        let dir = out.join("slices");
        std::fs::create_dir_all(&dir)?;
        for s in &result.slices {
            std::fs::write(dir.join(format!("slice_{:03}.svg", s.id)), slice_svg(&scene.env, s))?;
        }
    }
    Ok(())
}

#[derive(Debug)]
pub struct RunOutcome {
    pub status: Status,
    pub message: String,
    pub result: Option<PlanResult>,
}

/// Load, plan and export. Errors in the scene or endpoints map to
/// [`Status::InvalidInput`], planning failure to [`Status::NoPath`].
pub fn run_plan(scene_path: &FsPath, kind: PlannerKind, seed: Option<u64>, time_limit: Option<f64>, out: &FsPath) -> RunOutcome {
    let invalid = |e: HrmError| RunOutcome {
        status: Status::InvalidInput,
        message: e.to_string(),
        result: None,
    };
    let scene = match load_scene(scene_path) {
        Ok(s) => s,
        Err(e) => return invalid(e),
    };
    let result = match plan_scene(&scene, kind, seed, time_limit) {
        Ok(r) => r,
        Err(e) => return invalid(e),
    };
    let seed = seed.unwrap_or(scene.params.seed);
    if let Err(e) = write_outputs(&scene, kind, seed, &result, out) {
        return RunOutcome {
            status: Status::InvalidInput,
            message: e.to_string(),
            result: Some(result),
        };
    }
    let (status, message) = match &result.path {
        Some(p) => (Status::Success, format!("path with {} configurations, cost {}", p.configurations.len(), p.cost)),
        None => (
            Status::NoPath,
            format!("no path: {}", result.stats.reason.clone().unwrap_or_else(|| "unknown".into())),
        ),
    };
    RunOutcome {
        status,
        message,
        result: Some(result),
    }
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub scenes: Vec<PathBuf>,
    pub planners: Vec<PlannerKind>,
    pub trials: usize,
    pub workers: usize,
    /// Trial `k` uses seed `seed + k`.
    pub seed: u64,
    pub time_limit: Option<f64>,
    /// Directory for per-trial records and the summary CSV.
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub scene: String,
    pub planner: PlannerKind,
    pub trial: usize,
    pub seed: u64,
    pub success: bool,
    pub total_time: f64,
    pub graph_time: f64,
    pub search_time: f64,
    pub vertices: usize,
    pub edges: usize,
}

/// One summary row per (scene, planner). Columns of `results.csv`, in order:
/// scene, planner, trials, successes, success_rate, time_q1, time_median,
/// time_q3, mean_vertices, mean_edges. Times are total planning seconds over
/// all trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub scene: String,
    pub planner: PlannerKind,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub time_q1: f64,
    pub time_median: f64,
    pub time_q3: f64,
    pub mean_vertices: f64,
    pub mean_edges: f64,
}

/// Percentile with linear interpolation between closest ranks.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn scene_name(path: &FsPath, scene: &Scene) -> String {
    scene
        .file
        .name
        .clone()
        .unwrap_or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
}

/// Run every (scene, planner, trial) combination on `workers` threads and
/// summarize. Aggregation is ordered by scene, planner and trial id.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<(Vec<BenchRow>, Vec<TrialRecord>)> {
    let scenes = cfg
        .scenes
        .iter()
        .map(|p| load_scene(p).map(|s| (scene_name(p, &s), s)))
        .collect::<Result<Vec<_>>>()?;
    let mut jobs = Vec::new();
    for (si, _) in scenes.iter().enumerate() {
        for &planner in &cfg.planners {
            for trial in 0..cfg.trials {
                jobs.push((si, planner, trial));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| HrmError::InvalidArgument(e.to_string()))?;
    let records: Vec<TrialRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|&(si, planner, trial)| {
                let (name, scene) = &scenes[si];
                let seed = cfg.seed + trial as u64;
                let r = plan_scene(scene, planner, Some(seed), cfg.time_limit)?;
                Ok(TrialRecord {
                    scene: name.clone(),
                    planner,
                    trial,
                    seed,
                    success: r.path.is_some(),
                    total_time: r.stats.total_time,
                    graph_time: r.stats.graph_time,
                    search_time: r.stats.search_time,
                    vertices: r.stats.vertices,
                    edges: r.stats.edges,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut rows = Vec::new();
    for (name, _) in &scenes {
        for &planner in &cfg.planners {
            let trials: Vec<&TrialRecord> = records.iter().filter(|r| &r.scene == name && r.planner == planner).collect();
            let mut times: Vec<f64> = trials.iter().map(|r| r.total_time).collect();
            times.sort_by(f64::total_cmp);
            let n = trials.len().max(1) as f64;
            let successes = trials.iter().filter(|r| r.success).count();
            rows.push(BenchRow {
                scene: name.clone(),
                planner,
                trials: trials.len(),
                successes,
                success_rate: successes as f64 / n,
                time_q1: percentile(&times, 0.25),
                time_median: percentile(&times, 0.5),
                time_q3: percentile(&times, 0.75),
                mean_vertices: trials.iter().map(|r| r.vertices as f64).sum::<f64>() / n,
                mean_edges: trials.iter().map(|r| r.edges as f64).sum::<f64>() / n,
            });
        }
    }

    if let Some(out) = &cfg.out {
        let dir = out.join("trials");
        std::fs::create_dir_all(&dir)?;
        for r in &records {
            let file = dir.join(format!("{}_{}_{:03}.json", r.scene, r.planner, r.trial));
            std::fs::write(file, serde_json::to_string_pretty(r).map_err(|e| HrmError::Io(e.to_string()))?)?;
        }
        write_csv(&out.join("results.csv"), &rows)?;
    }
    Ok((rows, records))
}

pub fn write_csv<T: Serialize>(path: &FsPath, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HrmError::Io(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| HrmError::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
