//! Tabular goal-oriented MDPs: representation, validation, policy evaluation
//! and masked value iteration.
//!
//! Transitions are stored sparsely, one successor list per `(state, action)`
//! pair in state-major order. Values, policies and rewards are dense.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_DISCOUNT: f64 = 0.95;

/// Probability-sum slack accepted by [`TabularMdp::validate`].
pub const PROBABILITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Successor {
    #[serde(rename = "sp")]
    pub state: usize,
    #[serde(rename = "p")]
    pub prob: f64,
}

impl Successor {
    pub fn new(state: usize, prob: f64) -> Self {
        Self { state, prob }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "MdpDocument", try_from = "MdpDocument")]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    transitions: Vec<Vec<Successor>>,
    goal_state: usize,
    start_states: Vec<usize>,
    discount: f64,
}

impl TabularMdp {
    /// Builds an MDP from a state-major successor table (`transitions[s * A + a]`).
    ///
    /// Only structural problems are rejected here (shapes, out-of-range goal or
    /// start states, a discount outside `(0, 1)`). Probability defects are
    /// reported by [`TabularMdp::validate`] instead so that malformed input can
    /// still be inspected.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transitions: Vec<Vec<Successor>>,
        goal_state: usize,
        start_states: Vec<usize>,
        discount: f64,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidModel(
                "an MDP needs at least one state and one action".into(),
            ));
        }
        if transitions.len() != num_states * num_actions {
            return Err(Error::Dimension(format!(
                "expected {} successor lists, got {}",
                num_states * num_actions,
                transitions.len()
            )));
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::InvalidModel(format!(
                "discount must lie in (0, 1), got {discount}"
            )));
        }
        if goal_state >= num_states {
            return Err(Error::InvalidModel(format!(
                "goal state {goal_state} out of range"
            )));
        }
        if start_states.is_empty() {
            return Err(Error::InvalidModel("start state set is empty".into()));
        }
        if let Some(&s) = start_states.iter().find(|&&s| s >= num_states) {
            return Err(Error::InvalidModel(format!("start state {s} out of range")));
        }
        Ok(Self {
            num_states,
            num_actions,
            transitions,
            goal_state,
            start_states,
            discount,
        })
    }

    pub fn from_fn(
        num_states: usize,
        num_actions: usize,
        goal_state: usize,
        start_states: Vec<usize>,
        discount: f64,
        mut successors: impl FnMut(usize, usize) -> Vec<Successor>,
    ) -> Result<Self> {
        let mut transitions = Vec::with_capacity(num_states * num_actions);
        for s in 0..num_states {
            for a in 0..num_actions {
                transitions.push(successors(s, a));
            }
        }
        Self::new(
            num_states,
            num_actions,
            transitions,
            goal_state,
            start_states,
            discount,
        )
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn goal_state(&self) -> usize {
        self.goal_state
    }

    pub fn start_states(&self) -> &[usize] {
        &self.start_states
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    #[inline]
    pub fn successors(&self, state: usize, action: usize) -> &[Successor] {
        &self.transitions[state * self.num_actions + action]
    }

    /// Same model with a different discount factor.
    pub fn with_discount(&self, discount: f64) -> Result<Self> {
        Self::new(
            self.num_states,
            self.num_actions,
            self.transitions.clone(),
            self.goal_state,
            self.start_states.clone(),
            discount,
        )
    }

    /// `Σ_{s'} T(s, a, s') · values[s']`.
    #[inline]
    pub fn expected(&self, state: usize, action: usize, values: &[f64]) -> f64 {
        self.successors(state, action)
            .iter()
            .map(|succ| succ.prob * values[succ.state])
            .sum()
    }

    /// Draws a successor of `(state, action)` by inverse-CDF sampling.
    pub fn sample_next<R: Rng + ?Sized>(&self, state: usize, action: usize, rng: &mut R) -> usize {
        let succ = self.successors(state, action);
        let mut u: f64 = rng.gen();
        for x in succ {
            if u < x.prob {
                return x.state;
            }
            u -= x.prob;
        }
        // Rounding left a sliver of mass: take the last successor with any.
        succ.iter()
            .rev()
            .find(|x| x.prob > 0.0)
            .map_or(state, |x| x.state)
    }

    /// Checks the transition invariants and returns one entry per defect.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let succ = self.successors(s, a);
                let mut sum = 0.0;
                let mut bad_entry = false;
                for &Successor { state, prob } in succ {
                    if state >= self.num_states {
                        out.push(Violation::new(s, a, ViolationKind::SuccessorOutOfRange(state)));
                        bad_entry = true;
                    }
                    if !(prob > 0.0 && prob <= 1.0) {
                        out.push(Violation::new(s, a, ViolationKind::InvalidProbability(prob)));
                        bad_entry = true;
                    }
                    sum += prob;
                }
                if (sum - 1.0).abs() > PROBABILITY_SLACK {
                    out.push(Violation::new(s, a, ViolationKind::ProbabilitySum(sum)));
                } else if s == self.goal_state && !bad_entry {
                    let stay: f64 = succ
                        .iter()
                        .filter(|x| x.state == s)
                        .map(|x| x.prob)
                        .sum();
                    if (stay - 1.0).abs() > PROBABILITY_SLACK {
                        out.push(Violation::new(s, a, ViolationKind::GoalNotAbsorbing));
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub state: usize,
    pub action: usize,
    pub kind: ViolationKind,
}

impl Violation {
    fn new(state: usize, action: usize, kind: ViolationKind) -> Self {
        Self {
            state,
            action,
            kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    ProbabilitySum(f64),
    InvalidProbability(f64),
    SuccessorOutOfRange(usize),
    GoalNotAbsorbing,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (s, a) = (self.state, self.action);
        match self.kind {
            ViolationKind::ProbabilitySum(sum) => {
                write!(f, "({s},{a}): successor probabilities sum to {sum}")
            }
            ViolationKind::InvalidProbability(p) => {
                write!(f, "({s},{a}): probability {p} outside (0,1]")
            }
            ViolationKind::SuccessorOutOfRange(sp) => {
                write!(f, "({s},{a}): successor {sp} out of range")
            }
            ViolationKind::GoalNotAbsorbing => write!(f, "({s},{a}): goal not absorbing"),
        }
    }
}

/// On-disk layout of an MDP.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MdpDocument {
    pub num_states: usize,
    pub num_actions: usize,
    pub goal_state: usize,
    pub start_states: Vec<usize>,
    pub discount: f64,
    pub transitions: Vec<TransitionRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub s: usize,
    pub a: usize,
    pub next: Vec<Successor>,
}

impl From<TabularMdp> for MdpDocument {
    fn from(mdp: TabularMdp) -> Self {
        let a_count = mdp.num_actions;
        let transitions = mdp
            .transitions
            .into_iter()
            .enumerate()
            .map(|(i, next)| TransitionRecord {
                s: i / a_count,
                a: i % a_count,
                next,
            })
            .collect();
        Self {
            num_states: mdp.num_states,
            num_actions: mdp.num_actions,
            goal_state: mdp.goal_state,
            start_states: mdp.start_states,
            discount: mdp.discount,
            transitions,
        }
    }
}

impl TryFrom<MdpDocument> for TabularMdp {
    type Error = Error;

    fn try_from(doc: MdpDocument) -> Result<Self> {
        let size = doc.num_states * doc.num_actions;
        let mut table: Vec<Option<Vec<Successor>>> = vec![None; size];
        for rec in doc.transitions {
            if rec.s >= doc.num_states || rec.a >= doc.num_actions {
                return Err(Error::Dimension(format!(
                    "transition record ({}, {}) out of range",
                    rec.s, rec.a
                )));
            }
            let slot = &mut table[rec.s * doc.num_actions + rec.a];
            if slot.is_some() {
                return Err(Error::InvalidModel(format!(
                    "duplicate transition record ({}, {})",
                    rec.s, rec.a
                )));
            }
            *slot = Some(rec.next);
        }
        let transitions = table
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                t.ok_or_else(|| {
                    Error::InvalidModel(format!(
                        "missing transition record ({}, {})",
                        i / doc.num_actions,
                        i % doc.num_actions
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        TabularMdp::new(
            doc.num_states,
            doc.num_actions,
            transitions,
            doc.goal_state,
            doc.start_states,
            doc.discount,
        )
    }
}

/// One reward component `R_i : S × A → ℝ`, dense and state-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardTable {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl RewardTable {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            values: vec![0.0; num_states * num_actions],
        }
    }

    pub fn from_vec(num_states: usize, num_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_states * num_actions {
            return Err(Error::Dimension(format!(
                "reward table needs {} entries, got {}",
                num_states * num_actions,
                values.len()
            )));
        }
        Ok(Self {
            num_states,
            num_actions,
            values,
        })
    }

    pub fn from_fn(
        num_states: usize,
        num_actions: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(num_states * num_actions);
        for s in 0..num_states {
            for a in 0..num_actions {
                values.push(f(s, a));
            }
        }
        Self {
            num_states,
            num_actions,
            values,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.num_actions + action]
    }

    pub fn set(&mut self, state: usize, action: usize, value: f64) {
        self.values[state * self.num_actions + action] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            num_states: self.num_states,
            num_actions: self.num_actions,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub(crate) fn check_shape(&self, mdp: &TabularMdp) -> Result<()> {
        if self.num_states != mdp.num_states() || self.num_actions != mdp.num_actions() {
            return Err(Error::Dimension(format!(
                "reward table is {}x{}, model is {}x{}",
                self.num_states,
                self.num_actions,
                mdp.num_states(),
                mdp.num_actions()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFunction(pub Vec<f64>);

impl ValueFunction {
    pub fn get(&self, state: usize) -> f64 {
        self.0[state]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Deterministic policy: one action per state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Policy(pub Vec<usize>);

impl Policy {
    pub fn action(&self, state: usize) -> usize {
        self.0[state]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub(crate) fn check(&self, mdp: &TabularMdp) -> Result<()> {
        check_actions(&self.0, mdp)
    }
}

pub(crate) fn check_actions(actions: &[usize], mdp: &TabularMdp) -> Result<()> {
    if actions.len() != mdp.num_states() {
        return Err(Error::Dimension(format!(
            "policy covers {} states, model has {}",
            actions.len(),
            mdp.num_states()
        )));
    }
    if let Some((s, a)) = actions
        .iter()
        .enumerate()
        .find(|(_, &a)| a >= mdp.num_actions())
    {
        return Err(Error::InvalidArgument(format!(
            "policy action {a} at state {s} out of range"
        )));
    }
    Ok(())
}

/// Allowed action subsets, one sorted non-empty list per state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionMask {
    allowed: Vec<Vec<usize>>,
}

impl ActionMask {
    pub fn full(num_states: usize, num_actions: usize) -> Self {
        Self {
            allowed: vec![(0..num_actions).collect(); num_states],
        }
    }

    pub fn for_model(mdp: &TabularMdp) -> Self {
        Self::full(mdp.num_states(), mdp.num_actions())
    }

    pub fn from_sets(allowed: Vec<Vec<usize>>) -> Self {
        let allowed = allowed
            .into_iter()
            .map(|mut set| {
                set.sort_unstable();
                set.dedup();
                set
            })
            .collect();
        Self { allowed }
    }

    pub fn allowed(&self, state: usize) -> &[usize] {
        &self.allowed[state]
    }

    pub fn is_allowed(&self, state: usize, action: usize) -> bool {
        self.allowed[state].binary_search(&action).is_ok()
    }

    pub fn fix(&mut self, state: usize, action: usize) {
        self.allowed[state] = vec![action];
    }

    pub fn restrict(&mut self, state: usize, mut actions: Vec<usize>) {
        actions.sort_unstable();
        actions.dedup();
        self.allowed[state] = actions;
    }

    pub fn num_states(&self) -> usize {
        self.allowed.len()
    }

    pub(crate) fn check(&self, mdp: &TabularMdp) -> Result<()> {
        if self.allowed.len() != mdp.num_states() {
            return Err(Error::Dimension(format!(
                "mask covers {} states, model has {}",
                self.allowed.len(),
                mdp.num_states()
            )));
        }
        for (s, set) in self.allowed.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::InvalidArgument(format!("empty action set at state {s}")));
            }
            if set.iter().any(|&a| a >= mdp.num_actions()) {
                return Err(Error::InvalidArgument(format!(
                    "mask at state {s} names an out-of-range action"
                )));
            }
        }
        Ok(())
    }
}

/// Q-values for every `(state, action)`; disallowed pairs hold `-inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    num_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    /// `None` for actions the mask excluded.
    pub fn get(&self, state: usize, action: usize) -> Option<f64> {
        let q = self.values[state * self.num_actions + action];
        (q != f64::NEG_INFINITY).then_some(q)
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.num_actions..(state + 1) * self.num_actions]
    }

    /// Allowed actions whose Q-value lies within `band` of the state's maximum.
    pub fn near_max(&self, state: usize, mask: &ActionMask, band: f64) -> Vec<usize> {
        let row = self.row(state);
        let best = mask
            .allowed(state)
            .iter()
            .map(|&a| row[a])
            .fold(f64::NEG_INFINITY, f64::max);
        mask.allowed(state)
            .iter()
            .copied()
            .filter(|&a| row[a] >= best - band)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViSolution {
    pub values: ValueFunction,
    pub policy: Policy,
    pub q: QTable,
    pub sweeps: usize,
}

fn check_tolerance(tolerance: f64) -> Result<()> {
    if tolerance > 0.0 && tolerance.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tolerance}"
        )))
    }
}

/// Sweep-to-sweep change below which iteration stops. Keeps the distance to
/// the true fixed point under `tolerance / 4`, so two exactly tied actions
/// never drift more than `tolerance` apart.
fn stop_threshold(tolerance: f64, discount: f64) -> f64 {
    tolerance * (1.0 - discount) / (4.0 * discount)
}

/// Iterative evaluation of a fixed policy under `reward`.
pub fn policy_evaluation(
    mdp: &TabularMdp,
    policy: &Policy,
    reward: &RewardTable,
    tolerance: f64,
) -> Result<ValueFunction> {
    policy.check(mdp)?;
    reward.check_shape(mdp)?;
    check_tolerance(tolerance)?;
    let gamma = mdp.discount();
    let threshold = stop_threshold(tolerance, gamma);
    let n = mdp.num_states();
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    loop {
        let mut delta: f64 = 0.0;
        for s in 0..n {
            let a = policy.action(s);
            next[s] = reward.get(s, a) + gamma * mdp.expected(s, a, &v);
            delta = delta.max((next[s] - v[s]).abs());
        }
        std::mem::swap(&mut v, &mut next);
        if delta <= threshold {
            return Ok(ValueFunction(v));
        }
    }
}

/// Optimal values restricted to mask-allowed actions.
///
/// The returned policy takes, at every state, the lowest-indexed allowed
/// action whose Q-value is within `tolerance` of the maximum.
pub fn value_iteration(
    mdp: &TabularMdp,
    reward: &RewardTable,
    mask: &ActionMask,
    tolerance: f64,
) -> Result<ViSolution> {
    reward.check_shape(mdp)?;
    mask.check(mdp)?;
    check_tolerance(tolerance)?;
    Ok(masked_value_iteration(mdp, reward, mask, tolerance, None))
}

/// States whose values are held constant during iteration.
pub(crate) struct HeldValues<'a> {
    pub held: &'a [bool],
    pub values: &'a [f64],
}

/// Shared backup loop; inputs are assumed validated.
pub(crate) fn masked_value_iteration(
    mdp: &TabularMdp,
    reward: &RewardTable,
    mask: &ActionMask,
    tolerance: f64,
    held: Option<&HeldValues<'_>>,
) -> ViSolution {
    let gamma = mdp.discount();
    let threshold = stop_threshold(tolerance, gamma);
    let n = mdp.num_states();
    let mut v = vec![0.0; n];
    if let Some(h) = held {
        for s in 0..n {
            if h.held[s] {
                v[s] = h.values[s];
            }
        }
    }
    let mut next = v.clone();
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut delta: f64 = 0.0;
        for s in 0..n {
            if held.is_some_and(|h| h.held[s]) {
                continue;
            }
            let best = mask
                .allowed(s)
                .iter()
                .map(|&a| reward.get(s, a) + gamma * mdp.expected(s, a, &v))
                .fold(f64::NEG_INFINITY, f64::max);
            next[s] = best;
            delta = delta.max((best - v[s]).abs());
        }
        std::mem::swap(&mut v, &mut next);
        if delta <= threshold {
            break;
        }
    }

    let num_actions = mdp.num_actions();
    let mut q = vec![f64::NEG_INFINITY; n * num_actions];
    for s in 0..n {
        for &a in mask.allowed(s) {
            q[s * num_actions + a] = reward.get(s, a) + gamma * mdp.expected(s, a, &v);
        }
    }
    let q = QTable {
        num_actions,
        values: q,
    };
    let policy = (0..n).map(|s| q.near_max(s, mask, tolerance)[0]).collect();
    ViSolution {
        values: ValueFunction(v),
        policy: Policy(policy),
        q,
        sweeps,
    }
}
