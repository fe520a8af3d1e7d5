use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hrm_core::cli::export::{parse_path_csv, roadmap_svg, slice_svg};
use hrm_core::cli::harness::{run_benchmark, run_plan, BenchConfig, PlannerKind, Status};
use hrm_core::cli::scene::{body_record, load_scene};
use hrm_core::cslice::{CSlice, SweepGrid};
use hrm_core::enclosure::{fit, FitOptions};
use hrm_core::geom::{Dim, Vec3};
use hrm_core::oracle::validate_path;
use hrm_core::planner::{initial_num_lines, sample_orientations, Roadmap, DEFAULT_N_LINE};
use hrm_core::robot::Shape;

#[derive(Parser)]
#[command(name = "hrm", version, about = "Highway roadmap planning for ellipsoidal robots among superquadrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a path and write path.csv, roadmap.json, stats.json and SVGs.
    Plan {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value = "hrm")]
        planner: PlannerKind,
        #[arg(long)]
        seed: Option<u64>,
        /// Seconds.
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run repeated trials over scenes and planners; writes results.csv.
    Bench {
        #[arg(long, required = true, num_args = 1..)]
        scene: Vec<PathBuf>,
        #[arg(long, num_args = 1.., default_values = ["hrm"])]
        planner: Vec<PlannerKind>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value = "bench")]
        out: PathBuf,
    },
    /// Fit a superquadric to points given one per line as `x y [z]`.
    Fit {
        #[arg(long)]
        points: PathBuf,
        #[arg(long, default_value_t = 300)]
        max_iterations: usize,
    },
    /// Render one slice of a 2D scene, or a saved roadmap, as SVG.
    Render {
        #[arg(long)]
        scene: PathBuf,
        /// Orientation index among the scene's slices.
        #[arg(long, default_value_t = 0)]
        slice: usize,
        /// Refinement level.
        #[arg(long, default_value_t = 0)]
        level: u8,
        /// Render this roadmap.json instead of a slice.
        #[arg(long)]
        roadmap: Option<PathBuf>,
        #[arg(long, default_value = "render.svg")]
        out: PathBuf,
    },
    /// Check a path against the scene with dense collision checks.
    Validate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        path: PathBuf,
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
}

fn fail(status: Status, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(status as u8)
}

fn read_points(path: &PathBuf) -> Result<(Dim, Vec<Vec3>), String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let mut dim = None;
    let mut pts = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|e| format!("line {}: {e}", k + 1)))
            .collect::<Result<_, _>>()?;
        let d = Dim::from_n(vals.len()).ok_or_else(|| format!("line {}: expected 2 or 3 coordinates", k + 1))?;
        if *dim.get_or_insert(d) != d {
            return Err(format!("line {}: mixed dimensions", k + 1));
        }
        pts.push(Vec3::new(vals[0], vals[1], vals.get(2).copied().unwrap_or(0.0)));
    }
    Ok((dim.ok_or("no points")?, pts))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Plan {
            scene,
            planner,
            seed,
            time_limit,
            out,
        } => {
            let outcome = run_plan(&scene, planner, seed, time_limit, &out);
            match outcome.status {
                Status::Success => {
                    println!("{}", outcome.message);
                    ExitCode::SUCCESS
                }
                s => fail(s, outcome.message),
            }
        }
        Command::Bench {
            scene,
            planner,
            trials,
            seed,
            time_limit,
            workers,
            out,
        } => {
            let cfg = BenchConfig {
                scenes: scene,
                planners: planner,
                trials,
                workers,
                seed,
                time_limit,
                out: Some(out.clone()),
            };
            match run_benchmark(&cfg) {
                Ok((rows, _)) => {
                    for r in &rows {
                        println!(
                            "{:<24} {:<12} success {:.2}  median {:.3}s  [{:.3}, {:.3}]",
                            r.scene, r.planner, r.success_rate, r.time_median, r.time_q1, r.time_q3
                        );
                    }
                    println!("wrote {}", out.join("results.csv").display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(Status::InvalidInput, e),
            }
        }
        Command::Fit { points, max_iterations } => {
            let (dim, pts) = match read_points(&points) {
                Ok(v) => v,
                Err(e) => return fail(Status::InvalidInput, e),
            };
            let opts = FitOptions {
                max_iterations,
                ..FitOptions::default()
            };
            match fit(dim, &pts, &opts) {
                Ok(r) => {
                    let rec = body_record(&r.body);
                    println!("# residual {} after {} iterations", r.residual, r.iterations);
                    println!("[[obstacles]]");
                    print!("{}", toml::to_string(&rec).expect("record serializes"));
                    ExitCode::SUCCESS
                }
                Err(e) => fail(Status::InvalidInput, e),
            }
        }
        Command::Render {
            scene,
            slice,
            level,
            roadmap,
            out,
        } => {
            let scene = match load_scene(&scene) {
                Ok(s) => s,
                Err(e) => return fail(Status::InvalidInput, e),
            };
            if scene.env.dim != Dim::Two {
                return fail(Status::InvalidInput, "rendering supports 2D scenes only");
            }
            let svg = if let Some(rm) = roadmap {
                let text = match std::fs::read_to_string(&rm) {
                    Ok(t) => t,
                    Err(e) => return fail(Status::InvalidInput, e),
                };
                let mut map: Roadmap = match serde_json::from_str(&text) {
                    Ok(m) => m,
                    Err(e) => return fail(Status::InvalidInput, e),
                };
                map.reindex();
                roadmap_svg(&scene.env, &map, None)
            } else {
                let rots = sample_orientations(Dim::Two, scene.params.n_slice);
                let Some(rot) = rots.get(slice) else {
                    return fail(Status::InvalidInput, format!("slice index {slice} out of range"));
                };
                let counts = scene
                    .params
                    .n_line
                    .or_else(|| initial_num_lines(&scene.env, &scene.robot))
                    .unwrap_or([DEFAULT_N_LINE; 2]);
                let built = SweepGrid::for_arenas(Dim::Two, &scene.env.arenas, counts).and_then(|grid| {
                    let shape = Shape::rigid(*rot).with_joints(scene.robot.home_shape().joints);
                    let parts = scene.robot.forward_kinematics(&shape)?;
                    let mut s = CSlice::construct(
                        slice,
                        shape,
                        &parts,
                        &scene.env.obstacles,
                        &scene.env.arenas,
                        &grid,
                        0,
                        scene.params.n_vertices,
                    )?;
                    for l in 1..=level {
                        s.add_level(&grid, l);
                    }
                    Ok(s)
                });
                match built {
                    Ok(s) => slice_svg(&scene.env, &s),
                    Err(e) => return fail(Status::InvalidInput, e),
                }
            };
            if let Err(e) = std::fs::write(&out, svg) {
                return fail(Status::InvalidInput, e);
            }
            println!("wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Command::Validate { scene, path, steps } => {
            let scene = match load_scene(&scene) {
                Ok(s) => s,
                Err(e) => return fail(Status::InvalidInput, e),
            };
            let configs = match std::fs::read_to_string(&path)
                .map_err(|e| e.to_string())
                .and_then(|t| parse_path_csv(scene.env.dim, &t).map_err(|e| e.to_string()))
            {
                Ok(c) if !c.is_empty() => c,
                Ok(_) => return fail(Status::InvalidInput, "path is empty"),
                Err(e) => return fail(Status::InvalidInput, e),
            };
            let report = validate_path(&configs, &scene.robot, &scene.env, steps);
            println!("checked {} configurations, {} violations", report.checked, report.violations.len());
            for v in &report.violations {
                println!("  edge {} step {}", v.edge, v.step);
            }
            if report.is_valid() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(Status::Violations as u8)
            }
        }
    }
}
