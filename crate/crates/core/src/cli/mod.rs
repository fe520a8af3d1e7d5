//! Scene files, result export and the planning and benchmark front-ends used
//! by the `hrm` binary.

pub mod export;
pub mod harness;
pub mod scene;

pub use harness::{plan_scene, run_benchmark, run_plan, BenchConfig, BenchRow, PlannerKind, RunOutcome, Status, TrialRecord};
pub use scene::{load_scene, parse_scene, save_scene, Scene, SceneFile};
