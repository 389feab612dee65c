//! Comparison techniques, each producing a global policy for a model.
//!
//! * `B1` optimises the task objective only, ignoring context.
//! * `B2` plans lexicographically as if every state were in the
//!   highest-priority context.
//! * `B3` scalarises that context's reward vector with weights.
//! * `B4` plans context partitions in priority order, holding the values of
//!   partitions already planned but never checking for conflicts.
//! * `B5` is reserved and not implemented.
//! * `B6` stitches the per-context policies without resolving conflicts.
//! * `O1` is the full pipeline with the true mapping; `O2` runs it on a
//!   mapping inferred from expert trajectories.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{infer_z, TrajectoryDataset};
use crate::lexi::{lvi, lvi_with_held_values, HeldObjectiveValues};
use crate::mdp::{value_iteration, ActionMask};
use crate::model::{Clmdp, GlobalPolicy};
use crate::resolver::{compile_global_policy, solve, PlannerConfig, SolveDiagnostics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Technique {
    B1,
    B2,
    B3,
    B4,
    B5,
    B6,
    O1,
    O2,
}

impl Technique {
    /// Every identifier, including the reserved `B5`.
    pub const ALL: [Technique; 8] = [
        Technique::B1,
        Technique::B2,
        Technique::B3,
        Technique::B4,
        Technique::B5,
        Technique::B6,
        Technique::O1,
        Technique::O2,
    ];

    /// The seven techniques that run.
    pub const IMPLEMENTED: [Technique; 7] = [
        Technique::B1,
        Technique::B2,
        Technique::B3,
        Technique::B4,
        Technique::B6,
        Technique::O1,
        Technique::O2,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Technique::B1 => "B1",
            Technique::B2 => "B2",
            Technique::B3 => "B3",
            Technique::B4 => "B4",
            Technique::B5 => "B5",
            Technique::B6 => "B6",
            Technique::O1 => "O1",
            Technique::O2 => "O2",
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Technique {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Technique::ALL
            .into_iter()
            .find(|t| t.id().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownTechnique(s.to_string()))
    }
}

impl TryFrom<String> for Technique {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Technique> for String {
    fn from(t: Technique) -> Self {
        t.id().to_string()
    }
}

/// Task objective only, with the highest-priority context's rewards.
pub fn b1_task_only(model: &Clmdp, config: &PlannerConfig) -> Result<GlobalPolicy> {
    model.validate_structure()?;
    let top = model.top_context();
    let sol = value_iteration(
        &model.base,
        model.rewards_of(top).objective(0),
        &ActionMask::for_model(&model.base),
        config.tolerance,
    )?;
    Ok(GlobalPolicy::uniform(&sol.policy, top))
}

/// Lexicographic planning with the highest-priority context everywhere.
pub fn b2_lmdp_omega(model: &Clmdp, config: &PlannerConfig) -> Result<GlobalPolicy> {
    model.validate_structure()?;
    let top = model.top_context();
    let sol = lvi(
        &model.base,
        model.rewards_of(top),
        model.ordering_of(top),
        &ActionMask::for_model(&model.base),
        &config.lvi(),
    )?;
    Ok(GlobalPolicy::uniform(&sol.policy, top))
}

/// Default scalarisation weights: `10^(n-1-rank)` by the objective's rank in
/// the highest-priority context's ordering, indexed by objective.
pub fn default_weights(model: &Clmdp) -> Vec<f64> {
    let ordering = model.ordering_of(model.top_context());
    let n = ordering.len();
    (0..n)
        .map(|objective| 10f64.powi((n - 1 - ordering.rank_of(objective)) as i32))
        .collect()
}

/// Weighted-sum planning with the highest-priority context everywhere.
/// `weights` are indexed by objective.
pub fn b3_scalarization(
    model: &Clmdp,
    weights: Option<&[f64]>,
    config: &PlannerConfig,
) -> Result<GlobalPolicy> {
    model.validate_structure()?;
    let top = model.top_context();
    let default;
    let weights = match weights {
        Some(w) => w,
        None => {
            default = default_weights(model);
            &default
        }
    };
    let reward = model.rewards_of(top).scalarize(weights)?;
    let sol = value_iteration(
        &model.base,
        &reward,
        &ActionMask::for_model(&model.base),
        config.tolerance,
    )?;
    Ok(GlobalPolicy::uniform(&sol.policy, top))
}

/// Context partitions planned in priority order. Each context is solved
/// over the whole state space with the partitions planned before it held at
/// their computed values; it commits actions on its own partition only.
pub fn b4_lmdp_contexts(model: &Clmdp, config: &PlannerConfig) -> Result<GlobalPolicy> {
    model.validate()?;
    let mdp = &model.base;
    let n = mdp.num_states();
    let mask = ActionMask::for_model(mdp);
    let mut held = vec![false; n];
    let mut held_values = vec![vec![0.0; n]; model.num_objectives];
    let mut actions = vec![0; n];
    for &c in &model.meta_ordering {
        let ordering = model.ordering_of(c);
        let sol = lvi_with_held_values(
            mdp,
            model.rewards_of(c),
            ordering,
            &mask,
            &config.lvi(),
            &HeldObjectiveValues {
                held: &held,
                values: &held_values,
            },
        )?;
        let values = sol.values_by_objective(ordering);
        for s in (0..n).filter(|&s| model.z[s] == c) {
            actions[s] = sol.policy.action(s);
            held[s] = true;
            for (objective, v) in values.iter().enumerate() {
                held_values[objective][s] = v.get(s);
            }
        }
    }
    Ok(GlobalPolicy {
        actions,
        provenance: model.z.clone(),
    })
}

/// The stitched per-context policies, conflicts and all.
pub fn b6_no_resolver(model: &Clmdp, config: &PlannerConfig) -> Result<GlobalPolicy> {
    compile_global_policy(model, config).map(|(g, _)| g)
}

/// Technique-specific inputs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TechniqueParams {
    /// `B3` weights by objective; defaults to [`default_weights`].
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    /// Expert trajectories for `O2`.
    #[serde(default)]
    pub dataset: Option<TrajectoryDataset>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechniqueOutput {
    pub technique: Technique,
    pub policy: GlobalPolicy,
    /// Pipeline diagnostics for `O1` and `O2`.
    pub diagnostics: Option<SolveDiagnostics>,
    /// Mapping planned with by `O2`.
    pub inferred_z: Option<Vec<usize>>,
}

pub fn run_technique(
    technique: Technique,
    model: &Clmdp,
    params: &TechniqueParams,
    config: &PlannerConfig,
) -> Result<TechniqueOutput> {
    let mut diagnostics = None;
    let mut inferred_z = None;
    let policy = match technique {
        Technique::B1 => b1_task_only(model, config)?,
        Technique::B2 => b2_lmdp_omega(model, config)?,
        Technique::B3 => b3_scalarization(model, params.weights.as_deref(), config)?,
        Technique::B4 => b4_lmdp_contexts(model, config)?,
        Technique::B5 => return Err(Error::NotImplemented("B5".into())),
        Technique::B6 => b6_no_resolver(model, config)?,
        Technique::O1 => {
            let (policy, diag) = solve(model, config)?;
            diagnostics = Some(diag);
            policy
        }
        Technique::O2 => {
            let dataset = params.dataset.as_ref().ok_or_else(|| {
                Error::InvalidArgument("O2 needs a trajectory dataset".into())
            })?;
            let inferred = infer_z(model, dataset, config)?;
            let (policy, diag) = solve(&model.with_z(inferred.z.clone())?, config)?;
            diagnostics = Some(diag);
            inferred_z = Some(inferred.z);
            policy
        }
    };
    Ok(TechniqueOutput {
        technique,
        policy,
        diagnostics,
        inferred_z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::tiny_model;
    use crate::resolver::tests::bounce_model;

    #[test]
    fn parses_identifiers() {
        assert_eq!("b4".parse::<Technique>().unwrap(), Technique::B4);
        assert_eq!(" O2 ".parse::<Technique>().unwrap(), Technique::O2);
        assert_eq!("B7".parse::<Technique>().unwrap_err().kind(), "unknown-technique");
        let t: Technique = serde_json::from_str("\"B6\"").unwrap();
        assert_eq!(serde_json::to_string(&t).unwrap(), "\"B6\"");
    }

    #[test]
    fn b5_is_reserved() {
        let err = run_technique(Technique::B5, &bounce_model(), &TechniqueParams::default(), &PlannerConfig::default())
            .unwrap_err();
        assert_eq!(err.kind(), "not-implemented");
    }

    #[test]
    fn o2_requires_a_dataset() {
        let err = run_technique(Technique::O2, &bounce_model(), &TechniqueParams::default(), &PlannerConfig::default())
            .unwrap_err();
        assert_eq!(err.kind(), "invalid-argument");
    }

    #[test]
    fn b6_keeps_the_bounce_and_o1_removes_it() {
        let m = bounce_model();
        let cfg = PlannerConfig::default();
        let b6 = b6_no_resolver(&m, &cfg).unwrap();
        assert_eq!(&b6.actions[..2], &[0, 1]);
        let o1 = run_technique(Technique::O1, &m, &TechniqueParams::default(), &cfg).unwrap();
        assert!(o1.diagnostics.unwrap().resolved);
        assert_eq!(o1.policy.actions[1], 0);
    }

    #[test]
    fn single_context_baselines_agree_with_o1() {
        let mut m = bounce_model();
        m.z = vec![0; 7];
        let cfg = PlannerConfig::default();
        let o1 = solve(&m, &cfg).unwrap().0;
        assert_eq!(b2_lmdp_omega(&m, &cfg).unwrap().actions, o1.actions);
        assert_eq!(b4_lmdp_contexts(&m, &cfg).unwrap().actions, o1.actions);
        assert_eq!(b6_no_resolver(&m, &cfg).unwrap().actions, o1.actions);
    }

    #[test]
    fn default_weights_follow_the_top_ordering() {
        let mut m = bounce_model();
        assert_eq!(default_weights(&m), vec![10.0, 1.0]);
        m.meta_ordering = vec![1, 0];
        assert_eq!(default_weights(&m), vec![1.0, 10.0]);
    }

    #[test]
    fn unit_weight_on_the_task_is_b1() {
        let m = tiny_model();
        let cfg = PlannerConfig::default();
        let mut w = vec![0.0; m.num_objectives];
        w[0] = 1.0;
        assert_eq!(
            b3_scalarization(&m, Some(&w), &cfg).unwrap().actions,
            b1_task_only(&m, &cfg).unwrap().actions
        );
    }
}
