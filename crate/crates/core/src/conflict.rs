//! Goal-reachability conflict detection for a fixed policy.
//!
//! Reachability values are backed up under an indicator reward that is 1 at
//! the goal and 0 elsewhere. A state whose value stays exactly zero has no
//! path to the goal: zero is only ever produced by summing zero terms, so the
//! test needs no epsilon. States are retired from the sweep once they lead to
//! an already solved state and their own change drops below `epsilon`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mdp::{check_actions, TabularMdp, ValueFunction, DEFAULT_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckerConfig {
    pub epsilon: f64,
    /// Back up `ln V_r` instead of `V_r`.
    pub log_space: bool,
}

impl Default for CheckerConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_TOLERANCE,
            log_space: false,
        }
    }
}

impl CheckerConfig {
    pub fn log_space(log_space: bool) -> Self {
        Self {
            log_space,
            ..Self::default()
        }
    }
}

/// Reachability values in whichever domain the checker ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "domain", content = "values", rename_all = "snake_case")]
pub enum Reachability {
    Linear(ValueFunction),
    /// `ln V_r`; `-inf` encodes an exact zero (`null` on disk).
    Log(#[serde(with = "neg_inf_as_null")] Vec<f64>),
}

mod neg_inf_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(values: &[f64], ser: S) -> Result<S::Ok, S::Error> {
        values
            .iter()
            .map(|v| v.is_finite().then_some(*v))
            .collect::<Vec<_>>()
            .serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<f64>, D::Error> {
        let raw = Vec::<Option<f64>>::deserialize(de)?;
        Ok(raw
            .into_iter()
            .map(|v| v.unwrap_or(f64::NEG_INFINITY))
            .collect())
    }
}

impl Reachability {
    pub fn is_zero(&self, state: usize) -> bool {
        match self {
            Reachability::Linear(v) => v.get(state) == 0.0,
            Reachability::Log(v) => v[state] == f64::NEG_INFINITY,
        }
    }

    /// Linear-domain values; very long chains may underflow here even when
    /// the log values are finite.
    pub fn to_linear(&self) -> ValueFunction {
        match self {
            Reachability::Linear(v) => v.clone(),
            Reachability::Log(v) => ValueFunction(v.iter().map(|x| x.exp()).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictReport {
    pub has_conflict: bool,
    /// Sorted ascending.
    pub conflict_states: Vec<usize>,
    pub reachability: Reachability,
    pub sweeps: usize,
}

pub fn conflict_checker(
    actions: &[usize],
    mdp: &TabularMdp,
    config: &CheckerConfig,
) -> Result<ConflictReport> {
    check_actions(actions, mdp)?;
    let report = if config.log_space {
        let (values, sweeps) = sweep::<LogDomain>(actions, mdp, config.epsilon);
        finish(Reachability::Log(values), mdp.num_states(), sweeps)
    } else {
        let (values, sweeps) = sweep::<LinearDomain>(actions, mdp, config.epsilon);
        finish(
            Reachability::Linear(ValueFunction(values)),
            mdp.num_states(),
            sweeps,
        )
    };
    Ok(report)
}

fn finish(reachability: Reachability, n: usize, sweeps: usize) -> ConflictReport {
    let conflict_states: Vec<usize> = (0..n).filter(|&s| reachability.is_zero(s)).collect();
    ConflictReport {
        has_conflict: !conflict_states.is_empty(),
        conflict_states,
        reachability,
        sweeps,
    }
}

/// Arithmetic of one value domain.
trait Domain {
    const ZERO: f64;
    const GOAL: f64;
    fn backup(mdp: &TabularMdp, state: usize, action: usize, values: &[f64]) -> f64;
    fn change(old: f64, new: f64) -> f64;
}

struct LinearDomain;

impl Domain for LinearDomain {
    const ZERO: f64 = 0.0;
    const GOAL: f64 = 1.0;

    fn backup(mdp: &TabularMdp, state: usize, action: usize, values: &[f64]) -> f64 {
        mdp.discount() * mdp.expected(state, action, values)
    }

    fn change(old: f64, new: f64) -> f64 {
        (new - old).abs()
    }
}

struct LogDomain;

impl Domain for LogDomain {
    const ZERO: f64 = f64::NEG_INFINITY;
    const GOAL: f64 = 0.0;

    fn backup(mdp: &TabularMdp, state: usize, action: usize, values: &[f64]) -> f64 {
        let ln_gamma = mdp.discount().ln();
        let succ = mdp.successors(state, action);
        let max = succ
            .iter()
            .map(|x| values[x.state])
            .filter(|v| v.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let sum: f64 = succ
            .iter()
            .filter(|x| values[x.state].is_finite())
            .map(|x| x.prob * (values[x.state] - max).exp())
            .sum();
        ln_gamma + max + sum.ln()
    }

    fn change(old: f64, new: f64) -> f64 {
        match (old == f64::NEG_INFINITY, new == f64::NEG_INFINITY) {
            (true, true) => 0.0,
            (false, false) => (new - old).abs(),
            _ => f64::INFINITY,
        }
    }
}

/// Backs up reachability values until every non-goal state is solved, or the
/// largest change of a sweep is below `epsilon` and no state left zero during it.
fn sweep<D: Domain>(actions: &[usize], mdp: &TabularMdp, epsilon: f64) -> (Vec<f64>, usize) {
    let n = mdp.num_states();
    let goal = mdp.goal_state();
    let mut values = vec![D::ZERO; n];
    values[goal] = D::GOAL;
    let mut solved = vec![false; n];
    solved[goal] = true;
    let mut unsolved: Vec<usize> = (0..n).filter(|&s| s != goal).collect();
    let mut change = vec![0.0; n];
    let mut check = Vec::new();
    let mut sweeps = 0;

    while !unsolved.is_empty() {
        sweeps += 1;
        let mut delta: f64 = 0.0;
        let mut left_zero = false;
        check.clear();
        for &s in &unsolved {
            let a = actions[s];
            let old = values[s];
            let new = D::backup(mdp, s, a, &values);
            values[s] = new;
            if mdp.successors(s, a).iter().any(|x| solved[x.state]) {
                check.push(s);
            }
            let d = D::change(old, new);
            change[s] = d;
            delta = delta.max(d);
            left_zero |= old == D::ZERO && new != D::ZERO;
        }
        for &s in &check {
            if change[s] < epsilon {
                solved[s] = true;
            }
        }
        unsolved.retain(|&s| !solved[s]);
        if delta < epsilon && !left_zero {
            break;
        }
    }
    (values, sweeps)
}
