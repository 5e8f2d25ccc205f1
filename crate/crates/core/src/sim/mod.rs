//! Kinematic tabletop simulator, synthetic demonstrations and batch
//! evaluation.

pub mod demo;
pub mod eval;
pub mod goal;
pub mod layout;
pub mod scene;
pub mod shapes;

pub use demo::{synthesize_demo, DemoOptions, GroundTruth, SynthesizedDemo, TaskKind};
pub use eval::{evaluate, run_trial, trial_seed, EvalConfig, EvalReport, TrialResult, EVAL_FORMAT};
pub use goal::{check_goal, GoalSpec, PosePredicate, GOAL_FORMAT};
pub use layout::{offset_pose, randomize_layout, Region, TaskTemplate, PLACEMENT_ATTEMPTS, TEMPLATE_FORMAT};
pub use scene::{home_pose, Attachment, SimConfig, SimEnvironment, SimObject, SimScene, SCENE_FORMAT};
pub use shapes::Shape;

use crate::io::FormatError;
use crate::policy::PolicyError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("no collision-free layout found in {attempts} attempts")]
    Placement { attempts: usize },
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}
