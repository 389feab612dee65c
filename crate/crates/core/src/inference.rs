//! Recovering an unknown state-context mapping from expert demonstrations.
//!
//! Every context is first solved on its own. A context can explain an expert
//! step `(s, a, r)` only if its own policy picks `a` at `s` and its reward
//! vector at `(s, a)` is exactly `r`; among the contexts whose policy agrees
//! with the expert, each receives an equal share of the prior. States never
//! visited by the expert get a uniform posterior. Ties resolve to the
//! context with the higher meta-ordering priority.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::Policy;
use crate::model::Clmdp;
use crate::resolver::{context_policies, solve, PlannerConfig};

/// Component tolerance when matching an observed reward vector.
pub const REWARD_MATCH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub state: usize,
    pub action: usize,
    /// Reward vector observed when `action` was taken in `state`.
    pub rewards: Vec<f64>,
}

/// Expert trajectories. Each trajectory lists the steps taken before the
/// goal; the last step's transition enters the goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDataset {
    pub seed: u64,
    pub trajectories: Vec<Vec<TrajectoryStep>>,
}

impl TrajectoryDataset {
    pub fn empty() -> Self {
        Self {
            seed: 0,
            trajectories: Vec::new(),
        }
    }

    pub fn steps(&self) -> impl Iterator<Item = &TrajectoryStep> {
        self.trajectories.iter().flatten()
    }

    /// Fails on indices outside the model or reward vectors of the wrong length.
    pub fn check(&self, model: &Clmdp) -> Result<()> {
        let mdp = &model.base;
        for step in self.steps() {
            if step.state >= mdp.num_states() || step.action >= mdp.num_actions() {
                return Err(Error::Dimension(format!(
                    "step ({}, {}) is outside the model",
                    step.state, step.action
                )));
            }
            if step.rewards.len() != model.num_objectives {
                return Err(Error::Dimension(format!(
                    "step at state {} records {} rewards, model has {} objectives",
                    step.state,
                    step.rewards.len(),
                    model.num_objectives
                )));
            }
        }
        Ok(())
    }
}

/// Upper bound on rollouts per requested trajectory before giving up.
const RETRIES_PER_TRAJECTORY: usize = 100;

/// Rolls out the solved global policy from uniformly drawn start states.
///
/// Rollouts that do not reach the goal within `max_steps` are discarded and
/// redrawn; if the retry budget runs out the model is defective and an error
/// is returned.
pub fn simulate_expert(
    model: &Clmdp,
    num_trajectories: usize,
    max_steps: usize,
    seed: u64,
    config: &PlannerConfig,
) -> Result<TrajectoryDataset> {
    let mut dataset = TrajectoryDataset {
        seed,
        trajectories: Vec::with_capacity(num_trajectories),
    };
    if num_trajectories == 0 {
        return Ok(dataset);
    }
    let (policy, diagnostics) = solve(model, config)?;
    if !diagnostics.resolved {
        return Err(Error::Simulation(
            "the model has no conflict-free policy to demonstrate".into(),
        ));
    }
    let mdp = &model.base;
    let goal = mdp.goal_state();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut attempts = 0;
    while dataset.trajectories.len() < num_trajectories {
        if attempts == num_trajectories * RETRIES_PER_TRAJECTORY {
            return Err(Error::Simulation(format!(
                "only {} of {num_trajectories} rollouts reached the goal within {max_steps} steps",
                dataset.trajectories.len()
            )));
        }
        attempts += 1;
        let mut state = *mdp
            .start_states()
            .choose(&mut rng)
            .expect("models always have a start state");
        let mut steps = Vec::new();
        while state != goal && steps.len() < max_steps {
            let action = policy.actions[state];
            steps.push(TrajectoryStep {
                state,
                action,
                rewards: model.observed_rewards(state, action),
            });
            state = mdp.sample_next(state, action, &mut rng);
        }
        if state == goal {
            dataset.trajectories.push(steps);
        }
    }
    Ok(dataset)
}

/// Contexts whose own policy agrees with the expert at one visited pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PossibleContexts {
    pub state: usize,
    pub action: usize,
    pub contexts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    /// Inferred mapping, one context per state.
    pub z: Vec<usize>,
    /// `posterior[s][c]`, normalised per state.
    pub posterior: Vec<Vec<f64>>,
    /// Sorted by `(state, action)`.
    pub possible: Vec<PossibleContexts>,
    /// Visited states where no context explained the evidence; their
    /// posterior fell back to uniform.
    pub unexplained_states: Vec<usize>,
    #[serde(skip)]
    pub policies: Vec<Policy>,
}

/// Infers the state-context mapping of `model` (whose `z` is ignored).
pub fn infer_z(
    model: &Clmdp,
    dataset: &TrajectoryDataset,
    config: &PlannerConfig,
) -> Result<InferenceResult> {
    model.validate_structure()?;
    dataset.check(model)?;
    let policies = context_policies(model, config)?;
    let n = model.base.num_states();
    let m = model.num_contexts();

    let mut visits: Vec<Vec<&TrajectoryStep>> = vec![Vec::new(); n];
    for step in dataset.steps() {
        visits[step.state].push(step);
    }

    let mut possible: Vec<PossibleContexts> = Vec::new();
    let mut posterior = vec![vec![0.0; m]; n];
    let mut unexplained_states = Vec::new();
    for (s, steps) in visits.iter().enumerate() {
        let row = &mut posterior[s];
        if steps.is_empty() {
            row.fill(1.0 / m as f64);
            continue;
        }
        for step in steps {
            let candidates: Vec<usize> = (0..m)
                .filter(|&c| policies[c].action(s) == step.action)
                .collect();
            if !possible
                .iter()
                .any(|p| p.state == s && p.action == step.action)
            {
                possible.push(PossibleContexts {
                    state: s,
                    action: step.action,
                    contexts: candidates.clone(),
                });
            }
            let prior = 1.0 / candidates.len().max(1) as f64;
            for &c in &candidates {
                let expected = model.rewards_of(c).vector_at(s, step.action);
                if rewards_match(&expected, &step.rewards) {
                    row[c] += prior;
                }
            }
        }
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row.iter_mut().for_each(|p| *p /= total);
        } else {
            row.fill(1.0 / m as f64);
            unexplained_states.push(s);
        }
    }
    possible.sort_by_key(|p| (p.state, p.action));

    let z = posterior
        .iter()
        .map(|row| most_probable(row, &model.meta_ordering))
        .collect();
    Ok(InferenceResult {
        z,
        posterior,
        possible,
        unexplained_states,
        policies,
    })
}

fn rewards_match(expected: &[f64], observed: &[f64]) -> bool {
    expected
        .iter()
        .zip(observed)
        .all(|(e, o)| (e - o).abs() <= REWARD_MATCH_TOLERANCE)
}

/// Highest-probability context; exact ties go to the earlier context in
/// `meta_ordering`.
fn most_probable(row: &[f64], meta_ordering: &[usize]) -> usize {
    let mut best = meta_ordering[0];
    for &c in &meta_ordering[1..] {
        if row[c] > row[best] {
            best = c;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZAccuracy {
    pub accuracy: f64,
    /// `confusion[true][inferred]` state counts.
    pub confusion: Vec<Vec<usize>>,
}

pub fn z_accuracy(true_z: &[usize], inferred: &[usize], num_contexts: usize) -> Result<ZAccuracy> {
    if true_z.len() != inferred.len() {
        return Err(Error::Dimension(format!(
            "mappings cover {} and {} states",
            true_z.len(),
            inferred.len()
        )));
    }
    if let Some(&c) = true_z.iter().chain(inferred).find(|&&c| c >= num_contexts) {
        return Err(Error::InvalidArgument(format!("unknown context {c}")));
    }
    let mut confusion = vec![vec![0; num_contexts]; num_contexts];
    for (&t, &i) in true_z.iter().zip(inferred) {
        confusion[t][i] += 1;
    }
    let hits = true_z.iter().zip(inferred).filter(|(t, i)| t == i).count();
    let accuracy = if true_z.is_empty() {
        1.0
    } else {
        hits as f64 / true_z.len() as f64
    };
    Ok(ZAccuracy {
        accuracy,
        confusion,
    })
}
