//! Global-policy compilation and conflict resolution.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::conflict::{conflict_checker, CheckerConfig, ConflictReport};
use crate::error::{Error, Result};
use crate::lexi::{lvi, LviConfig};
use crate::mdp::{ActionMask, Policy, DEFAULT_TOLERANCE};
use crate::model::{Clmdp, GlobalPolicy};
use crate::timing::Stopwatch;

/// Solver knobs shared by compilation, checking and resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub slack: f64,
    pub tolerance: f64,
    pub log_space: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            slack: 0.0,
            tolerance: DEFAULT_TOLERANCE,
            log_space: false,
        }
    }
}

impl PlannerConfig {
    pub fn lvi(&self) -> LviConfig {
        LviConfig {
            slack: self.slack,
            tolerance: self.tolerance,
        }
    }

    pub fn checker(&self) -> CheckerConfig {
        CheckerConfig {
            epsilon: self.tolerance,
            log_space: self.log_space,
        }
    }
}

/// Policy of every context solved as if it covered the whole state space.
pub fn context_policies(model: &Clmdp, config: &PlannerConfig) -> Result<Vec<Policy>> {
    model.validate_structure()?;
    let mask = ActionMask::for_model(&model.base);
    (0..model.num_contexts())
        .map(|c| {
            lvi(
                &model.base,
                model.rewards_of(c),
                model.ordering_of(c),
                &mask,
                &config.lvi(),
            )
            .map(|sol| sol.policy)
        })
        .collect()
}

/// Stitches per-context policies: each state takes its own context's action.
pub fn compile_global_policy(
    model: &Clmdp,
    config: &PlannerConfig,
) -> Result<(GlobalPolicy, Vec<Policy>)> {
    model.validate()?;
    let policies = context_policies(model, config)?;
    let actions = model
        .z
        .iter()
        .enumerate()
        .map(|(s, &c)| policies[c].action(s))
        .collect();
    Ok((
        GlobalPolicy {
            actions,
            provenance: model.z.clone(),
        },
        policies,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolverOutcome {
    pub policy: GlobalPolicy,
    pub resolved: bool,
    /// Outer passes run, each widening the update window by one context.
    pub iterations: usize,
    /// Lowest-priority context among the conflict states, if there were any.
    pub lowest_conflict_context: Option<usize>,
    /// Contexts re-planned in the last pass, highest priority first.
    pub final_window: Vec<usize>,
}

/// Re-plans a growing window of low-priority contexts until the stitched
/// policy is conflict-free.
///
/// Starting at the lowest-priority context that owns a conflict state, each
/// pass re-solves every context from the window top down to the lowest
/// priority, highest first. States outside the window keep their current
/// actions; each re-solved context's states are fixed before the next one is
/// solved. When the window already spans every context and conflicts remain,
/// `resolved` is `false`.
pub fn conflict_resolver(
    model: &Clmdp,
    policy: &GlobalPolicy,
    report: &ConflictReport,
    config: &PlannerConfig,
) -> Result<ResolverOutcome> {
    model.validate()?;
    if policy.num_states() != model.base.num_states() {
        return Err(Error::Dimension("policy and model disagree on state count".into()));
    }
    let mut current = policy.clone();
    if !report.has_conflict {
        return Ok(ResolverOutcome {
            policy: current,
            resolved: true,
            iterations: 0,
            lowest_conflict_context: None,
            final_window: Vec::new(),
        });
    }

    let ranks = model.priority_ranks();
    let lowest = report
        .conflict_states
        .iter()
        .map(|&s| model.z[s])
        .max_by_key(|&c| ranks[c])
        .expect("conflict states are non-empty");

    let mdp = &model.base;
    let mut iterations = 0;
    let mut window = Vec::new();
    for top_rank in (0..=ranks[lowest]).rev() {
        iterations += 1;
        window = model.meta_ordering[top_rank..].to_vec();
        let mut in_window = vec![false; model.num_contexts()];
        for &c in &window {
            in_window[c] = true;
        }

        let mut mask = ActionMask::for_model(mdp);
        for s in 0..mdp.num_states() {
            if !in_window[model.z[s]] {
                mask.fix(s, current.actions[s]);
            }
        }
        for &c in &window {
            let sol = lvi(
                mdp,
                model.rewards_of(c),
                model.ordering_of(c),
                &mask,
                &config.lvi(),
            )?;
            for s in (0..mdp.num_states()).filter(|&s| model.z[s] == c) {
                let a = sol.policy.action(s);
                mask.fix(s, a);
                current.actions[s] = a;
                current.provenance[s] = c;
            }
        }

        if !conflict_checker(&current.actions, mdp, &config.checker())?.has_conflict {
            return Ok(ResolverOutcome {
                policy: current,
                resolved: true,
                iterations,
                lowest_conflict_context: Some(lowest),
                final_window: window,
            });
        }
    }
    Ok(ResolverOutcome {
        policy: current,
        resolved: false,
        iterations,
        lowest_conflict_context: Some(lowest),
        final_window: window,
    })
}

/// The resolver's widest pass on its own: every context re-planned in
/// meta-ordering with nothing held from an earlier policy.
pub fn full_sweep(model: &Clmdp, config: &PlannerConfig) -> Result<GlobalPolicy> {
    model.validate()?;
    let mdp = &model.base;
    let mut mask = ActionMask::for_model(mdp);
    let mut out = GlobalPolicy {
        actions: vec![0; mdp.num_states()],
        provenance: model.z.clone(),
    };
    for &c in &model.meta_ordering {
        let sol = lvi(
            mdp,
            model.rewards_of(c),
            model.ordering_of(c),
            &mask,
            &config.lvi(),
        )?;
        for s in (0..mdp.num_states()).filter(|&s| model.z[s] == c) {
            mask.fix(s, sol.policy.action(s));
            out.actions[s] = sol.policy.action(s);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    /// Conflict states of the freshly compiled policy.
    pub initial_conflict_states: Vec<usize>,
    pub resolver_iterations: usize,
    /// Contexts re-planned in the resolver's last pass.
    pub contexts_updated: Vec<usize>,
    pub resolved: bool,
    pub compile_time: Duration,
    pub check_time: Duration,
    pub resolve_time: Duration,
}

impl SolveDiagnostics {
    pub fn conflicts_found(&self) -> usize {
        self.initial_conflict_states.len()
    }
}

/// Compile, check, resolve.
pub fn solve(model: &Clmdp, config: &PlannerConfig) -> Result<(GlobalPolicy, SolveDiagnostics)> {
    let clock = Stopwatch::start();
    let (compiled, _) = compile_global_policy(model, config)?;
    let compile_time = clock.elapsed();

    let clock = Stopwatch::start();
    let report = conflict_checker(&compiled.actions, &model.base, &config.checker())?;
    let check_time = clock.elapsed();

    let clock = Stopwatch::start();
    let outcome = conflict_resolver(model, &compiled, &report, config)?;
    let resolve_time = clock.elapsed();

    Ok((
        outcome.policy,
        SolveDiagnostics {
            initial_conflict_states: report.conflict_states,
            resolver_iterations: outcome.iterations,
            contexts_updated: outcome.final_window,
            resolved: outcome.resolved,
            compile_time,
            check_time,
            resolve_time,
        },
    ))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::lexi::{ObjectiveOrdering, RewardVectorTable};
    use crate::mdp::{RewardTable, Successor, TabularMdp};
    use crate::model::ContextSpec;

    /// Goal 3, hazard 2. From 1 the short route runs through the hazard
    /// (1 -> 2 -> 3); the long route goes back through 0 (1 -> 0 -> 4 -> 5 -> 6 -> 3).
    /// "fast" ranks progress first and sends 0 to 1; "careful" ranks hazard
    /// cost first and sends 1 back to 0, so the stitched policy bounces.
    pub(crate) fn bounce_model() -> Clmdp {
        let goal = 3;
        let next = |s: usize, a: usize| -> usize {
            match (s, a) {
                (3, _) => 3,
                (0, 0) => 1,
                (0, _) => 4,
                (1, 0) => 2,
                (1, _) => 0,
                (2, 0) => 3,
                (2, _) => 1,
                (4, 0) => 5,
                (4, _) => 0,
                (5, 0) => 6,
                (5, _) => 4,
                (6, 0) => 3,
                (_, _) => 5,
            }
        };
        let base = TabularMdp::from_fn(7, 2, goal, vec![0], 0.99, |s, a| {
            vec![Successor::new(next(s, a), 1.0)]
        })
        .unwrap();
        let progress = RewardTable::from_fn(7, 2, |s, a| match s {
            3 => 0.0,
            _ if next(s, a) == goal => 10.0,
            _ => -1.0,
        });
        let hazard = RewardTable::from_fn(7, 2, |s, _| match s {
            3 => 0.0,
            2 => -20.0,
            _ => -1.0,
        });
        Clmdp {
            base,
            num_objectives: 2,
            contexts: vec![
                ContextSpec { name: "fast".into(), ordering: 0, rewards: 0 },
                ContextSpec { name: "careful".into(), ordering: 1, rewards: 0 },
            ],
            meta_ordering: vec![0, 1],
            orderings: vec![
                ObjectiveOrdering::new(vec![0, 1]).unwrap(),
                ObjectiveOrdering::new(vec![1, 0]).unwrap(),
            ],
            reward_vectors: vec![RewardVectorTable::new(vec![progress, hazard]).unwrap()],
            z: vec![0, 1, 0, 0, 0, 0, 0],
        }
    }

    #[test]
    fn single_context_compiles_to_its_lvi_policy() {
        let mut m = bounce_model();
        m.z = vec![1; 7];
        let (g, per_context) = compile_global_policy(&m, &PlannerConfig::default()).unwrap();
        assert_eq!(g.actions, per_context[1].0);
        assert_eq!(g.provenance, vec![1; 7]);
    }

    #[test]
    fn bounce_is_detected_and_resolved() {
        let m = bounce_model();
        let cfg = PlannerConfig::default();
        let (g, _) = compile_global_policy(&m, &cfg).unwrap();
        let report = conflict_checker(&g.actions, &m.base, &cfg.checker()).unwrap();
        assert!(report.has_conflict);
        assert_eq!(report.conflict_states, vec![0, 1]);

        let out = conflict_resolver(&m, &g, &report, &cfg).unwrap();
        assert!(out.resolved);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.lowest_conflict_context, Some(1));
        assert_eq!(out.final_window, vec![1]);
        assert!(!conflict_checker(&out.policy.actions, &m.base, &cfg.checker()).unwrap().has_conflict);
        assert_eq!(out.policy.actions[1], 0);
        for s in [0, 2, 3, 4, 5, 6] {
            assert_eq!(out.policy.actions[s], g.actions[s]);
        }
    }

    #[test]
    fn conflict_free_input_is_returned_untouched() {
        let mut m = bounce_model();
        m.z = vec![0; 7];
        let cfg = PlannerConfig::default();
        let (g, _) = compile_global_policy(&m, &cfg).unwrap();
        let report = conflict_checker(&g.actions, &m.base, &cfg.checker()).unwrap();
        let out = conflict_resolver(&m, &g, &report, &cfg).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.policy, g);
    }

    #[test]
    fn unreachable_goal_cannot_be_resolved() {
        let mut m = bounce_model();
        // State 5 becomes a trap owned by the low-priority context.
        let transitions: Vec<Vec<Successor>> = (0..7)
            .flat_map(|s| (0..2).map(move |a| (s, a)))
            .map(|(s, a)| {
                if s == 5 {
                    vec![Successor::new(5, 1.0)]
                } else {
                    m.base.successors(s, a).to_vec()
                }
            })
            .collect();
        m.base = TabularMdp::new(7, 2, transitions, 3, vec![0], 0.99).unwrap();
        m.z[5] = 1;
        let (g, diag) = solve(&m, &PlannerConfig::default()).unwrap();
        assert!(!diag.resolved);
        assert_eq!(diag.resolver_iterations, 2);
        assert_eq!(diag.contexts_updated, vec![0, 1]);
        assert_eq!(g.actions.len(), 7);
    }

    #[test]
    fn solve_reports_pipeline() {
        let (g, diag) = solve(&bounce_model(), &PlannerConfig::default()).unwrap();
        assert!(diag.resolved);
        assert!(diag.conflicts_found() > 0);
        assert_eq!(diag.resolver_iterations, 1);
        assert_eq!(full_sweep(&bounce_model(), &PlannerConfig::default()).unwrap().actions, g.actions);
    }
}
