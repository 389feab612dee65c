//! Planning for contextual lexicographic MDPs.
//!
//! Each context of a [`Clmdp`] carries its own objective ordering and reward
//! vector. [`solve`] plans every context in isolation with lexicographic value
//! iteration, stitches the results by the state-context mapping, finds states
//! that can no longer reach the goal, and re-plans lower-priority contexts
//! until none remain. [`inference::infer_z`] recovers an unknown mapping from
//! expert trajectories.

pub mod baselines;
pub mod conflict;
pub mod domains;
pub mod error;
pub mod experiment;
pub mod inference;
pub mod lexi;
pub mod mdp;
pub mod model;
pub mod report;
pub mod resolver;
pub mod seeds;
mod timing;

pub use baselines::{run_technique, Technique, TechniqueOutput, TechniqueParams};
pub use conflict::{conflict_checker, CheckerConfig, ConflictReport, Reachability};
pub use error::{Error, Result};
pub use inference::{
    infer_z, simulate_expert, z_accuracy, InferenceResult, TrajectoryDataset, TrajectoryStep,
    ZAccuracy,
};
pub use lexi::{lvi, LviConfig, LviSolution, ObjectiveOrdering, RewardVectorTable};
pub use mdp::{
    policy_evaluation, value_iteration, ActionMask, Policy, QTable, RewardTable, Successor,
    TabularMdp, ValueFunction, Violation, ViolationKind,
};
pub use model::{Clmdp, ContextSpec, GlobalPolicy};
pub use resolver::{
    compile_global_policy, conflict_resolver, full_sweep, solve, PlannerConfig, ResolverOutcome,
    SolveDiagnostics,
};
