//! Lexicographic value iteration.
//!
//! Objectives are solved one at a time in priority order. After each pass the
//! per-state action set shrinks to the actions whose Q-value is within
//! `slack + tolerance` of that state's best, and the next objective is solved
//! over what remains.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{
    masked_value_iteration, ActionMask, HeldValues, Policy, RewardTable, TabularMdp,
    ValueFunction, DEFAULT_TOLERANCE,
};

/// Priority order over objective indices, highest priority first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ObjectiveOrdering(Vec<usize>);

impl ObjectiveOrdering {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        if !is_permutation(&order) {
            return Err(Error::InvalidModel(format!(
                "objective ordering {order:?} is not a permutation"
            )));
        }
        Ok(Self(order))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Highest-priority objective.
    pub fn top(&self) -> usize {
        self.0[0]
    }

    /// Priority position of `objective` (0 = highest).
    pub fn rank_of(&self, objective: usize) -> usize {
        self.0.iter().position(|&o| o == objective).expect("objective in ordering")
    }
}

impl TryFrom<Vec<usize>> for ObjectiveOrdering {
    type Error = Error;

    fn try_from(order: Vec<usize>) -> Result<Self> {
        Self::new(order)
    }
}

impl From<ObjectiveOrdering> for Vec<usize> {
    fn from(o: ObjectiveOrdering) -> Self {
        o.0
    }
}

pub(crate) fn is_permutation(order: &[usize]) -> bool {
    let mut seen = vec![false; order.len()];
    for &i in order {
        if i >= order.len() || seen[i] {
            return false;
        }
        seen[i] = true;
    }
    true
}

/// One reward table per objective, indexed by objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardVectorTable(Vec<RewardTable>);

impl RewardVectorTable {
    pub fn new(tables: Vec<RewardTable>) -> Result<Self> {
        let Some(first) = tables.first() else {
            return Err(Error::InvalidModel("reward vector needs an objective".into()));
        };
        let shape = (first.num_states(), first.num_actions());
        if tables
            .iter()
            .any(|t| (t.num_states(), t.num_actions()) != shape)
        {
            return Err(Error::Dimension("reward tables differ in shape".into()));
        }
        Ok(Self(tables))
    }

    pub fn num_objectives(&self) -> usize {
        self.0.len()
    }

    pub fn objective(&self, index: usize) -> &RewardTable {
        &self.0[index]
    }

    pub fn tables(&self) -> &[RewardTable] {
        &self.0
    }

    /// Reward vector at `(state, action)`.
    pub fn vector_at(&self, state: usize, action: usize) -> Vec<f64> {
        self.0.iter().map(|t| t.get(state, action)).collect()
    }

    /// `Σ_i weights[i] · R_i`.
    pub fn scalarize(&self, weights: &[f64]) -> Result<RewardTable> {
        if weights.len() != self.0.len() {
            return Err(Error::Dimension(format!(
                "{} weights for {} objectives",
                weights.len(),
                self.0.len()
            )));
        }
        let first = &self.0[0];
        Ok(RewardTable::from_fn(
            first.num_states(),
            first.num_actions(),
            |s, a| {
                self.0
                    .iter()
                    .zip(weights)
                    .map(|(t, w)| w * t.get(s, a))
                    .sum()
            },
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LviConfig {
    /// Absolute Q-value slack kept after each objective pass.
    pub slack: f64,
    pub tolerance: f64,
}

impl Default for LviConfig {
    fn default() -> Self {
        Self {
            slack: 0.0,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

impl LviConfig {
    fn check(&self) -> Result<()> {
        if !(self.slack >= 0.0 && self.slack.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "slack must be non-negative, got {}",
                self.slack
            )));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LviSolution {
    pub policy: Policy,
    /// Value function of each pass, in priority order.
    pub values: Vec<ValueFunction>,
    /// Action sets left after the last pass.
    pub mask: ActionMask,
}

impl LviSolution {
    /// Values re-indexed by objective instead of priority.
    pub fn values_by_objective(&self, ordering: &ObjectiveOrdering) -> Vec<ValueFunction> {
        let mut out = vec![ValueFunction(Vec::new()); ordering.len()];
        for (rank, &objective) in ordering.as_slice().iter().enumerate() {
            out[objective] = self.values[rank].clone();
        }
        out
    }
}

pub fn lvi(
    mdp: &TabularMdp,
    rewards: &RewardVectorTable,
    ordering: &ObjectiveOrdering,
    mask: &ActionMask,
    config: &LviConfig,
) -> Result<LviSolution> {
    check_inputs(mdp, rewards, ordering, mask, config)?;
    Ok(run_lvi(mdp, rewards, ordering, mask.clone(), config, None))
}

/// Per-objective values held fixed on a subset of states.
pub(crate) struct HeldObjectiveValues<'a> {
    pub held: &'a [bool],
    /// Indexed by objective, then state.
    pub values: &'a [Vec<f64>],
}

/// LVI where held states act as fixed boundary values and are never backed up.
pub(crate) fn lvi_with_held_values(
    mdp: &TabularMdp,
    rewards: &RewardVectorTable,
    ordering: &ObjectiveOrdering,
    mask: &ActionMask,
    config: &LviConfig,
    held: &HeldObjectiveValues<'_>,
) -> Result<LviSolution> {
    check_inputs(mdp, rewards, ordering, mask, config)?;
    Ok(run_lvi(mdp, rewards, ordering, mask.clone(), config, Some(held)))
}

fn check_inputs(
    mdp: &TabularMdp,
    rewards: &RewardVectorTable,
    ordering: &ObjectiveOrdering,
    mask: &ActionMask,
    config: &LviConfig,
) -> Result<()> {
    config.check()?;
    mask.check(mdp)?;
    if ordering.len() != rewards.num_objectives() {
        return Err(Error::Dimension(format!(
            "ordering over {} objectives, reward vector has {}",
            ordering.len(),
            rewards.num_objectives()
        )));
    }
    for t in rewards.tables() {
        t.check_shape(mdp)?;
    }
    Ok(())
}

fn run_lvi(
    mdp: &TabularMdp,
    rewards: &RewardVectorTable,
    ordering: &ObjectiveOrdering,
    mut mask: ActionMask,
    config: &LviConfig,
    held: Option<&HeldObjectiveValues<'_>>,
) -> LviSolution {
    let band = config.slack + config.tolerance;
    let mut values = Vec::with_capacity(ordering.len());
    for &objective in ordering.as_slice() {
        let held_values = held.map(|h| HeldValues {
            held: h.held,
            values: &h.values[objective],
        });
        let sol = masked_value_iteration(
            mdp,
            rewards.objective(objective),
            &mask,
            config.tolerance,
            held_values.as_ref(),
        );
        for s in 0..mdp.num_states() {
            let keep = sol.q.near_max(s, &mask, band);
            mask.restrict(s, keep);
        }
        values.push(sol.values);
    }
    let policy = Policy((0..mdp.num_states()).map(|s| mask.allowed(s)[0]).collect());
    LviSolution {
        policy,
        values,
        mask,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{value_iteration, Successor};

    #[test]
    fn ordering_must_be_permutation() {
        assert!(ObjectiveOrdering::new(vec![1, 0, 2]).is_ok());
        assert!(ObjectiveOrdering::new(vec![0, 0, 2]).is_err());
        assert!(ObjectiveOrdering::new(vec![0, 3, 1]).is_err());
        let o: std::result::Result<ObjectiveOrdering, _> = serde_json::from_str("[2,2]");
        assert!(o.is_err());
    }

    /// 2x2 grid, cells (0,0)=0 start, (1,0)=1 marked, (0,1)=2, (1,1)=3 goal.
    /// Actions: 0 = right, 1 = down. Both routes to the goal take two steps.
    fn two_route_grid() -> (TabularMdp, RewardVectorTable) {
        let next = |s: usize, a: usize| -> usize {
            match (s, a) {
                (0, 0) => 1,
                (0, 1) => 2,
                (1, 1) => 3,
                (2, 0) => 3,
                (3, _) => 3,
                (s, _) => s,
            }
        };
        let mdp = TabularMdp::from_fn(4, 2, 3, vec![0], 0.9, |s, a| {
            vec![Successor::new(next(s, a), 1.0)]
        })
        .unwrap();
        let reach = RewardTable::from_fn(4, 2, |s, a| {
            if s != 3 && next(s, a) == 3 {
                10.0
            } else if s != 3 {
                -1.0
            } else {
                0.0
            }
        });
        let avoid = RewardTable::from_fn(4, 2, |s, a| {
            if s != 3 && next(s, a) == 1 {
                -5.0
            } else {
                0.0
            }
        });
        (mdp, RewardVectorTable::new(vec![reach, avoid]).unwrap())
    }

    #[test]
    fn secondary_objective_breaks_primary_ties() {
        let (mdp, rewards) = two_route_grid();
        let sol = lvi(
            &mdp,
            &rewards,
            &ObjectiveOrdering::new(vec![0, 1]).unwrap(),
            &ActionMask::for_model(&mdp),
            &LviConfig::default(),
        )
        .unwrap();
        // Right (0) is the lowest index but enters the marked cell.
        assert_eq!(sol.policy.action(0), 1);
        assert_eq!(sol.values.len(), 2);
    }

    #[test]
    fn single_objective_matches_value_iteration() {
        let (mdp, rewards) = two_route_grid();
        let mask = ActionMask::for_model(&mdp);
        let one = RewardVectorTable::new(vec![rewards.objective(1).clone()]).unwrap();
        let sol = lvi(&mdp, &one, &ObjectiveOrdering::identity(1), &mask, &LviConfig::default())
            .unwrap();
        let vi = value_iteration(&mdp, one.objective(0), &mask, 1e-6).unwrap();
        assert_eq!(sol.policy, vi.policy);
        assert_eq!(sol.values[0], vi.values);
    }

    #[test]
    fn fixed_actions_survive_every_pass() {
        let (mdp, rewards) = two_route_grid();
        let mut mask = ActionMask::for_model(&mdp);
        mask.fix(0, 0);
        let sol = lvi(
            &mdp,
            &rewards,
            &ObjectiveOrdering::new(vec![1, 0]).unwrap(),
            &mask,
            &LviConfig::default(),
        )
        .unwrap();
        assert_eq!(sol.policy.action(0), 0);
        assert_eq!(sol.mask.allowed(0), &[0]);
    }

    #[test]
    fn slack_widens_kept_set() {
        let (mdp, rewards) = two_route_grid();
        // With generous slack on "avoid", the reach objective decides instead.
        let sol = lvi(
            &mdp,
            &rewards,
            &ObjectiveOrdering::new(vec![1, 0]).unwrap(),
            &ActionMask::for_model(&mdp),
            &LviConfig {
                slack: 100.0,
                tolerance: 1e-6,
            },
        )
        .unwrap();
        assert_eq!(sol.mask.allowed(0), &[0, 1]);
        assert!(LviConfig { slack: -1.0, tolerance: 1e-6 }.check().is_err());
    }

    #[test]
    fn scalarize_weights_tables() {
        let (_, rewards) = two_route_grid();
        let t = rewards.scalarize(&[1.0, 2.0]).unwrap();
        assert_eq!(t.get(0, 0), -1.0 - 10.0);
        assert!(rewards.scalarize(&[1.0]).is_err());
    }
}
