//! Random instance families and independent oracles shared by the
//! integration tests and the acceptance suite.
#![allow(dead_code)]

use std::collections::VecDeque;

use clmdp::lexi::{ObjectiveOrdering, RewardVectorTable};
use clmdp::mdp::{Policy, RewardTable, Successor, TabularMdp};
use clmdp::model::{Clmdp, ContextSpec};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Per-step cost magnitudes of the goal-oriented family.
pub const COST_RANGE: std::ops::RangeInclusive<f64> = 0.25..=4.0;
pub const FAMILY_DISCOUNT: f64 = 0.999;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

/// States with no path to the goal in the graph induced by `actions`,
/// found by reverse breadth-first search from the goal.
pub fn bfs_conflicts(mdp: &TabularMdp, actions: &[usize]) -> Vec<usize> {
    let n = mdp.num_states();
    let mut predecessors = vec![Vec::new(); n];
    for s in 0..n {
        for x in mdp.successors(s, actions[s]) {
            if x.prob > 0.0 {
                predecessors[x.state].push(s);
            }
        }
    }
    let mut reached = vec![false; n];
    reached[mdp.goal_state()] = true;
    let mut queue = VecDeque::from([mdp.goal_state()]);
    while let Some(s) = queue.pop_front() {
        for &p in &predecessors[s] {
            if !reached[p] {
                reached[p] = true;
                queue.push_back(p);
            }
        }
    }
    (0..n).filter(|&s| !reached[s]).collect()
}

/// Exact policy value: solves `(I - γ P_π) v = r_π`.
pub fn exact_values(mdp: &TabularMdp, actions: &[usize], reward: &RewardTable) -> Vec<f64> {
    let n = mdp.num_states();
    let mut m = DMatrix::<f64>::identity(n, n);
    let mut r = DVector::<f64>::zeros(n);
    for s in 0..n {
        let a = actions[s];
        r[s] = reward.get(s, a);
        for x in mdp.successors(s, a) {
            m[(s, x.state)] -= mdp.discount() * x.prob;
        }
    }
    let v = m.lu().solve(&r).expect("I - γP is invertible for γ < 1");
    v.iter().copied().collect()
}

/// Every deterministic policy of `mdp`.
pub fn all_policies(mdp: &TabularMdp) -> Vec<Vec<usize>> {
    let (n, k) = (mdp.num_states(), mdp.num_actions());
    let total = k.pow(n as u32);
    (0..total)
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let a = code % k;
                    code /= k;
                    a
                })
                .collect()
        })
        .collect()
}

/// `a` is lexicographically at least `b`, comparing components within `tol`.
pub fn lex_geq(a: &[f64], b: &[f64], tol: f64) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x > &(y + tol) {
            return true;
        }
        if x < &(y - tol) {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Families
// ---------------------------------------------------------------------------

/// Random MDP with goal `n - 1`; each pair has one to three successors
/// (exactly one when `stochastic` is false). Some states may be unable to
/// reach the goal.
pub fn random_mdp(rng: &mut impl Rng, n: usize, k: usize, stochastic: bool) -> TabularMdp {
    let goal = n - 1;
    TabularMdp::from_fn(n, k, goal, vec![0], 0.95, |s, _| {
        if s == goal {
            return vec![Successor::new(goal, 1.0)];
        }
        let count = if stochastic { rng.gen_range(1..=3) } else { 1 };
        let mut weights: Vec<f64> = (0..count).map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let mut out: Vec<Successor> = Vec::new();
        for w in weights {
            let next = rng.gen_range(0..n);
            match out.iter_mut().find(|x| x.state == next) {
                Some(x) => x.prob += w,
                None => out.push(Successor::new(next, w)),
            }
        }
        out
    })
    .unwrap()
}

pub fn random_actions(rng: &mut impl Rng, mdp: &TabularMdp) -> Vec<usize> {
    (0..mdp.num_states())
        .map(|_| rng.gen_range(0..mdp.num_actions()))
        .collect()
}

/// Goal-oriented CLMDP whose rewards are costs drawn from [`COST_RANGE`]
/// (zero at the goal) and whose goal is reachable from every state along a
/// random spanning tree, so a conflict-free policy exists. Following the tree
/// costs at most `4 · 39 / 0.8 ≈ 196` in expectation, while never reaching
/// the goal costs at least `0.25 / (1 - γ) = 250`; every first-objective
/// optimum therefore reaches the goal, even with some states fixed to
/// actions of an earlier goal-reaching solution.
pub fn goal_oriented_clmdp(rng: &mut impl Rng, max_states: usize, contexts: usize) -> Clmdp {
    let n = rng.gen_range(6..=max_states.clamp(6, 40));
    let k = rng.gen_range(2..=4);
    let num_objectives = rng.gen_range(2..=3);
    let slip = rng.gen_bool(0.5);
    goal_oriented_sized(rng, n, k, num_objectives, contexts, slip)
}

/// [`goal_oriented_clmdp`] with explicit sizes. The cost argument needs
/// `4 · E[T] < 250` along the tree path: up to 40 slipping states or 62
/// deterministic ones.
pub fn goal_oriented_sized(
    rng: &mut impl Rng,
    n: usize,
    k: usize,
    num_objectives: usize,
    contexts: usize,
    slip: bool,
) -> Clmdp {
    let goal = n - 1;

    // Spanning tree: every state points at a state earlier in a random order
    // that starts at the goal.
    let mut order: Vec<usize> = (0..goal).collect();
    order.shuffle(rng);
    order.insert(0, goal);
    let mut parent = vec![goal; n];
    for i in 1..n {
        parent[order[i]] = order[rng.gen_range(0..i)];
    }
    let tree_action: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
    let targets: Vec<Vec<usize>> = (0..n)
        .map(|s| {
            (0..k)
                .map(|a| if a == tree_action[s] { parent[s] } else { rng.gen_range(0..n) })
                .collect()
        })
        .collect();
    let base = TabularMdp::from_fn(n, k, goal, (0..goal).collect(), FAMILY_DISCOUNT, |s, a| {
        if s == goal {
            return vec![Successor::new(goal, 1.0)];
        }
        let t = targets[s][a];
        if slip && t != s {
            vec![Successor::new(t, 0.8), Successor::new(s, 0.2)]
        } else {
            vec![Successor::new(t, 1.0)]
        }
    })
    .unwrap();

    let mut orderings: Vec<ObjectiveOrdering> = Vec::new();
    let mut contexts_spec = Vec::new();
    let mut reward_vectors = Vec::new();
    for c in 0..contexts {
        let mut perm: Vec<usize> = (0..num_objectives).collect();
        perm.shuffle(rng);
        let ordering = ObjectiveOrdering::new(perm).unwrap();
        let index = match orderings.iter().position(|o| *o == ordering) {
            Some(i) => i,
            None => {
                orderings.push(ordering);
                orderings.len() - 1
            }
        };
        let tables = (0..num_objectives)
            .map(|_| {
                RewardTable::from_fn(n, k, |s, _| {
                    if s == goal {
                        0.0
                    } else {
                        -rng.gen_range(COST_RANGE)
                    }
                })
            })
            .collect();
        reward_vectors.push(RewardVectorTable::new(tables).unwrap());
        contexts_spec.push(ContextSpec {
            name: format!("c{c}"),
            ordering: index,
            rewards: c,
        });
    }
    let mut meta_ordering: Vec<usize> = (0..contexts).collect();
    meta_ordering.shuffle(rng);
    let z = (0..n).map(|_| rng.gen_range(0..contexts)).collect();
    Clmdp {
        base,
        num_objectives,
        contexts: contexts_spec,
        meta_ordering,
        orderings,
        reward_vectors,
        z,
    }
}

/// Adds an absorbing non-goal trap reachable from state 0; no policy can
/// then reach the goal from everywhere.
pub fn with_trap(model: &Clmdp) -> Clmdp {
    let n = model.base.num_states();
    let k = model.base.num_actions();
    let trap = n;
    let old_goal = model.base.goal_state();
    let base = TabularMdp::from_fn(n + 1, k, old_goal, model.base.start_states().to_vec(), model.base.discount(), |s, a| {
        if s == trap {
            vec![Successor::new(trap, 1.0)]
        } else if s == 0 && a == k - 1 && old_goal != 0 {
            vec![Successor::new(trap, 1.0)]
        } else {
            model.base.successors(s, a).to_vec()
        }
    })
    .unwrap();
    let reward_vectors = model
        .reward_vectors
        .iter()
        .map(|rv| {
            RewardVectorTable::new(
                rv.tables()
                    .iter()
                    .map(|t| {
                        RewardTable::from_fn(n + 1, k, |s, a| if s == trap { -1.0 } else { t.get(s, a) })
                    })
                    .collect(),
            )
            .unwrap()
        })
        .collect();
    let mut z = model.z.clone();
    z.push(model.meta_ordering[model.meta_ordering.len() - 1]);
    Clmdp {
        base,
        reward_vectors,
        z,
        ..model.clone()
    }
}

/// Tiny deterministic instance for exhaustive comparison: at most 6 states,
/// 3 actions and 3 objectives with small integer rewards, `γ = 0.9`.
pub fn tiny_lexi_instance(rng: &mut impl Rng) -> (TabularMdp, RewardVectorTable, ObjectiveOrdering) {
    let n = rng.gen_range(2..=6);
    let k = rng.gen_range(1..=3);
    let objectives = rng.gen_range(1..=3);
    let goal = n - 1;
    let mdp = TabularMdp::from_fn(n, k, goal, vec![0], 0.9, |s, _| {
        let next = if s == goal { goal } else { rng.gen_range(0..n) };
        vec![Successor::new(next, 1.0)]
    })
    .unwrap();
    let tables = (0..objectives)
        .map(|_| {
            RewardTable::from_fn(n, k, |s, _| {
                if s == goal {
                    0.0
                } else {
                    rng.gen_range(-3..=3) as f64
                }
            })
        })
        .collect();
    let mut perm: Vec<usize> = (0..objectives).collect();
    perm.shuffle(rng);
    (
        mdp,
        RewardVectorTable::new(tables).unwrap(),
        ObjectiveOrdering::new(perm).unwrap(),
    )
}

/// Chain `0 -> 1 -> … -> n-1` where every action advances. Context `c`
/// earns a unit task reward only for action `c` and carries its own index as
/// a second reward component, so its policy and reward vector single it out
/// at every state.
pub fn discriminating_chain(rng: &mut impl Rng) -> Clmdp {
    let n = rng.gen_range(4..=30);
    let m = rng.gen_range(2..=4);
    let goal = n - 1;
    let base = TabularMdp::from_fn(n, m, goal, vec![0], 0.95, |s, _| {
        vec![Successor::new((s + 1).min(goal), 1.0)]
    })
    .unwrap();
    let reward_vectors = (0..m)
        .map(|c| {
            let task = RewardTable::from_fn(n, m, |s, a| if s != goal && a == c { 1.0 } else { 0.0 });
            let tag = RewardTable::from_fn(n, m, |s, _| if s == goal { 0.0 } else { c as f64 });
            RewardVectorTable::new(vec![task, tag]).unwrap()
        })
        .collect();
    let mut meta_ordering: Vec<usize> = (0..m).collect();
    meta_ordering.shuffle(rng);
    // The goal is never acted in, so it carries the fallback context.
    let mut z: Vec<usize> = (0..n).map(|_| rng.gen_range(0..m)).collect();
    z[goal] = meta_ordering[0];
    Clmdp {
        base,
        num_objectives: 2,
        contexts: (0..m)
            .map(|c| ContextSpec {
                name: format!("c{c}"),
                ordering: 0,
                rewards: c,
            })
            .collect(),
        meta_ordering,
        orderings: vec![ObjectiveOrdering::identity(2)],
        reward_vectors,
        z,
    }
}

/// `n`-state chain advancing with probability `p` and otherwise staying put.
pub fn slow_chain(n: usize, p: f64, discount: f64) -> TabularMdp {
    let goal = n - 1;
    TabularMdp::from_fn(n, 1, goal, vec![0], discount, |s, _| {
        if s == goal {
            vec![Successor::new(goal, 1.0)]
        } else {
            vec![Successor::new(s + 1, p), Successor::new(s, 1.0 - p)]
        }
    })
    .unwrap()
}

/// Fixed out-degree instance for timing: every pair has `degree`
/// successors, one of them a step towards the goal.
pub fn fixed_degree_mdp(rng: &mut impl Rng, n: usize, degree: usize) -> (TabularMdp, Vec<usize>) {
    let goal = n - 1;
    let mdp = TabularMdp::from_fn(n, 2, goal, vec![0], 0.95, |s, _| {
        if s == goal {
            return vec![Successor::new(goal, 1.0)];
        }
        let mut out = vec![Successor::new(s + 1, 1.0 / degree as f64)];
        for _ in 1..degree {
            let next = rng.gen_range(0..n);
            match out.iter_mut().find(|x| x.state == next) {
                Some(x) => x.prob += 1.0 / degree as f64,
                None => out.push(Successor::new(next, 1.0 / degree as f64)),
            }
        }
        out
    })
    .unwrap();
    let actions = (0..n).map(|_| rng.gen_range(0..2)).collect();
    (mdp, actions)
}

pub fn policy_of(actions: &[usize]) -> Policy {
    Policy(actions.to_vec())
}
