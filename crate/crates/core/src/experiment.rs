//! Benchmark harness: runs techniques on instances and measures them by
//! simulation.
//!
//! Every trial starts from a uniformly drawn start state and follows the
//! technique's policy for at most `max_steps` steps, collecting the reward
//! vector of each state's true context. A trial counts as a conflict when it
//! enters a state from which the policy cannot reach the goal or runs out of
//! steps. Discounted per-objective returns are
//! normalised between the worst and best values achievable for that
//! objective alone, averaged over start states. Trial seeds depend only on
//! the rollout seed, instance seed and trial index, so every technique faces
//! the same draws.

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_technique, Technique, TechniqueParams};
use crate::conflict::conflict_checker;
use crate::domains::{fixture_seeds, generate, DomainConfig};
use crate::error::{Error, Result};
use crate::inference::{simulate_expert, z_accuracy};
use crate::mdp::{value_iteration, ActionMask, ValueFunction};
use crate::model::{Clmdp, GlobalPolicy};
use crate::resolver::PlannerConfig;
use crate::seeds::derive_seed;

/// Expert trajectories collected for `O2` by default.
pub const DEFAULT_TRAJECTORIES: usize = 10;
/// `max_steps` defaults to this many steps per state.
pub const STEPS_PER_STATE: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Generated instances: one per seed in `instance_seeds`.
    pub domain: Option<DomainConfig>,
    /// A single model file, used instead of `domain`.
    pub model: Option<PathBuf>,
    pub techniques: Vec<Technique>,
    pub trials: usize,
    /// Defaults to the domain's fixture seeds (or `[0]` for a model file).
    pub instance_seeds: Option<Vec<u64>>,
    /// Defaults to 50 steps per state.
    pub max_steps: Option<usize>,
    pub rollout_seed: u64,
    /// Overrides the instances' discount factor.
    pub discount: Option<f64>,
    pub slack: f64,
    pub tolerance: f64,
    pub log_space: bool,
    /// `B3` weights by objective.
    pub weights: Option<Vec<f64>>,
    /// Expert trajectories for `O2`.
    pub trajectories: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let planner = PlannerConfig::default();
        Self {
            domain: None,
            model: None,
            techniques: vec![Technique::O1],
            trials: 100,
            instance_seeds: None,
            max_steps: None,
            rollout_seed: 0,
            discount: None,
            slack: planner.slack,
            tolerance: planner.tolerance,
            log_space: planner.log_space,
            weights: None,
            trajectories: DEFAULT_TRAJECTORIES,
        }
    }
}

impl ExperimentConfig {
    pub fn planner(&self) -> PlannerConfig {
        PlannerConfig {
            slack: self.slack,
            tolerance: self.tolerance,
            log_space: self.log_space,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.techniques.is_empty() {
            return Err(Error::InvalidArgument("no techniques to run".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.domain.is_some() == self.model.is_some() {
            return Err(Error::InvalidArgument(
                "give exactly one of a domain or a model file".into(),
            ));
        }
        if let Some(t) = self.techniques.iter().find(|t| **t == Technique::B5) {
            return Err(Error::NotImplemented(t.to_string()));
        }
        Ok(())
    }
}

/// A model under evaluation; its `z` is the ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub name: String,
    pub seed: u64,
    pub model: Clmdp,
}

pub fn build_instances(config: &ExperimentConfig) -> Result<Vec<Instance>> {
    config.validate()?;
    let mut instances = Vec::new();
    if let Some(domain) = &config.domain {
        let seeds = match &config.instance_seeds {
            Some(s) => s.clone(),
            None => fixture_seeds(domain.domain).to_vec(),
        };
        for seed in seeds {
            let mut cfg = domain.clone();
            cfg.seed = seed;
            if let Some(d) = config.discount {
                cfg.discount = d;
            }
            instances.push(Instance {
                name: format!("{}-{seed}", domain.domain),
                seed,
                model: generate(&cfg)?.model,
            });
        }
    } else if let Some(path) = &config.model {
        let text = std::fs::read_to_string(path)?;
        let mut model: Clmdp = serde_json::from_str(&text)?;
        model.validate()?;
        if let Some(d) = config.discount {
            model.base = model.base.with_discount(d)?;
        }
        let name = path
            .file_stem()
            .map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned());
        for seed in config.instance_seeds.clone().unwrap_or_else(|| vec![0]) {
            instances.push(Instance {
                name: name.clone(),
                seed,
                model: model.clone(),
            });
        }
    }
    if instances.is_empty() {
        return Err(Error::InvalidArgument("no instances to run".into()));
    }
    Ok(instances)
}

/// Worst and best discounted value per objective under the true mapping,
/// averaged over start states, each from a dedicated value iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub worst: Vec<f64>,
    pub best: Vec<f64>,
}

impl Normalizer {
    pub fn new(model: &Clmdp, tolerance: f64) -> Result<Self> {
        let mdp = &model.base;
        let mask = ActionMask::for_model(mdp);
        let starts = mdp.start_states();
        let mean = |v: &ValueFunction| starts.iter().map(|&s| v.get(s)).sum::<f64>() / starts.len() as f64;
        let (mut worst, mut best) = (Vec::new(), Vec::new());
        for k in 0..model.num_objectives {
            let reward = model.contextual_reward(k);
            best.push(mean(&value_iteration(mdp, &reward, &mask, tolerance)?.values));
            worst.push(-mean(&value_iteration(mdp, &reward.scaled(-1.0), &mask, tolerance)?.values));
        }
        Ok(Self { worst, best })
    }

    /// Maps a mean discounted return into `[0, 1]`.
    pub fn normalize(&self, objective: usize, value: f64) -> f64 {
        let (lo, hi) = (self.worst[objective], self.best[objective]);
        if hi - lo <= 1e-9 * hi.abs().max(lo.abs()).max(1.0) {
            return 1.0;
        }
        ((value - lo) / (hi - lo)).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutStats {
    pub percent_conflicts: f64,
    pub percent_goal_reached: f64,
    /// Mean undiscounted return per objective.
    pub mean_returns: Vec<f64>,
    /// Mean discounted return per objective.
    pub mean_discounted_returns: Vec<f64>,
}

/// Simulates `trials` episodes of `policy` on `model` under its true mapping.
pub fn rollouts(
    model: &Clmdp,
    policy: &GlobalPolicy,
    conflict_states: &[usize],
    trials: usize,
    max_steps: usize,
    seed: u64,
) -> RolloutStats {
    let mdp = &model.base;
    let goal = mdp.goal_state();
    let mut is_conflict = vec![false; mdp.num_states()];
    for &s in conflict_states {
        is_conflict[s] = true;
    }
    let gamma = mdp.discount();
    let mut totals = vec![0.0; model.num_objectives];
    let mut discounted = vec![0.0; model.num_objectives];
    let (mut conflicts, mut reached) = (0usize, 0usize);
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, trial as u64));
        let mut state = *mdp
            .start_states()
            .choose(&mut rng)
            .expect("models always have a start state");
        let mut entered_conflict = is_conflict[state];
        let mut steps = 0;
        let mut weight = 1.0;
        while state != goal && steps < max_steps {
            let action = policy.actions[state];
            for (k, r) in model.observed_rewards(state, action).into_iter().enumerate() {
                totals[k] += r;
                discounted[k] += weight * r;
            }
            weight *= gamma;
            state = mdp.sample_next(state, action, &mut rng);
            entered_conflict |= is_conflict[state];
            steps += 1;
        }
        if state == goal {
            reached += 1;
        }
        if entered_conflict || state != goal {
            conflicts += 1;
        }
    }
    let pct = |k: usize| 100.0 * k as f64 / trials as f64;
    RolloutStats {
        percent_conflicts: pct(conflicts),
        percent_goal_reached: pct(reached),
        mean_returns: totals.iter().map(|t| t / trials as f64).collect(),
        mean_discounted_returns: discounted.iter().map(|t| t / trials as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub name: String,
    pub seed: u64,
    pub num_states: usize,
    pub max_steps: usize,
    pub normalizer: Normalizer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechniqueResult {
    pub technique: Technique,
    pub instance: String,
    pub seed: u64,
    /// Whether the policy has any state that cannot reach the goal.
    pub static_conflict: bool,
    pub static_conflict_states: usize,
    /// Whether the conflict resolver succeeded (`O1`/`O2` only).
    pub resolved: Option<bool>,
    pub percent_conflicts: f64,
    pub percent_goal_reached: f64,
    /// Mean undiscounted return per objective.
    pub mean_returns: Vec<f64>,
    /// Mean discounted return per objective, the input to normalisation.
    pub mean_discounted_returns: Vec<f64>,
    pub normalized: Vec<f64>,
    pub min_objective: f64,
    /// Agreement of the inferred mapping with the true one (`O2` only).
    pub z_accuracy: Option<f64>,
}

/// Mean and sample standard deviation across instances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechniqueAggregate {
    pub technique: Technique,
    pub percent_conflicts: Stat,
    pub percent_goal_reached: Stat,
    /// Per objective.
    pub normalized: Vec<Stat>,
    /// Smallest per-objective mean normalised value.
    pub min_objective: f64,
    pub z_accuracy: Option<Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub label: String,
    pub trials: usize,
    pub num_objectives: usize,
    pub techniques: Vec<Technique>,
    pub instances: Vec<InstanceSummary>,
    /// One entry per technique and instance, technique-major.
    pub results: Vec<TechniqueResult>,
    pub aggregates: Vec<TechniqueAggregate>,
}

impl ExperimentReport {
    pub fn aggregate(&self, technique: Technique) -> Option<&TechniqueAggregate> {
        self.aggregates.iter().find(|a| a.technique == technique)
    }

    pub fn results_for(&self, technique: Technique) -> impl Iterator<Item = &TechniqueResult> {
        self.results.iter().filter(move |r| r.technique == technique)
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let instances = build_instances(config)?;
    evaluate(config, &instances)
}

/// Like [`run_experiment`], with `O2` always included.
pub fn run_inference_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut config = config.clone();
    if !config.techniques.contains(&Technique::O2) {
        config.techniques.push(Technique::O2);
    }
    run_experiment(&config)
}

/// Runs every configured technique on the given instances.
pub fn evaluate(config: &ExperimentConfig, instances: &[Instance]) -> Result<ExperimentReport> {
    if config.techniques.is_empty() {
        return Err(Error::InvalidArgument("no techniques to run".into()));
    }
    if config.trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let planner = config.planner();
    let num_objectives = instances.first().map_or(0, |i| i.model.num_objectives);
    if instances.iter().any(|i| i.model.num_objectives != num_objectives) {
        return Err(Error::Dimension("instances disagree on the number of objectives".into()));
    }

    let mut summaries = Vec::with_capacity(instances.len());
    let mut per_instance: Vec<Vec<TechniqueResult>> = Vec::with_capacity(instances.len());
    for inst in instances {
        let model = &inst.model;
        model.validate()?;
        let max_steps = config
            .max_steps
            .unwrap_or(STEPS_PER_STATE * model.base.num_states());
        let normalizer = Normalizer::new(model, planner.tolerance)?;
        let trial_seed = derive_seed(config.rollout_seed, inst.seed);

        let mut params = TechniqueParams {
            weights: config.weights.clone(),
            dataset: None,
        };
        if config.techniques.contains(&Technique::O2) {
            let expert_seed = derive_seed(trial_seed, u64::MAX);
            params.dataset = Some(simulate_expert(
                model,
                config.trajectories,
                max_steps,
                expert_seed,
                &planner,
            )?);
        }

        let mut results = Vec::with_capacity(config.techniques.len());
        for &technique in &config.techniques {
            let out = run_technique(technique, model, &params, &planner)?;
            let report = conflict_checker(&out.policy.actions, &model.base, &planner.checker())?;
            let stats = rollouts(
                model,
                &out.policy,
                &report.conflict_states,
                config.trials,
                max_steps,
                trial_seed,
            );
            let normalized: Vec<f64> = stats
                .mean_discounted_returns
                .iter()
                .enumerate()
                .map(|(k, &v)| normalizer.normalize(k, v))
                .collect();
            let z_acc = match &out.inferred_z {
                Some(z) => Some(z_accuracy(&model.z, z, model.num_contexts())?.accuracy),
                None => None,
            };
            results.push(TechniqueResult {
                technique,
                instance: inst.name.clone(),
                seed: inst.seed,
                static_conflict: report.has_conflict,
                static_conflict_states: report.conflict_states.len(),
                resolved: out.diagnostics.map(|d| d.resolved),
                percent_conflicts: stats.percent_conflicts,
                percent_goal_reached: stats.percent_goal_reached,
                min_objective: normalized.iter().copied().fold(f64::INFINITY, f64::min),
                mean_returns: stats.mean_returns,
                mean_discounted_returns: stats.mean_discounted_returns,
                normalized,
                z_accuracy: z_acc,
            });
        }
        summaries.push(InstanceSummary {
            name: inst.name.clone(),
            seed: inst.seed,
            num_states: model.base.num_states(),
            max_steps,
            normalizer,
        });
        per_instance.push(results);
    }

    let mut results = Vec::new();
    let mut aggregates = Vec::new();
    for (t, &technique) in config.techniques.iter().enumerate() {
        let rows: Vec<TechniqueResult> = per_instance.iter().map(|r| r[t].clone()).collect();
        let column = |f: &dyn Fn(&TechniqueResult) -> f64| -> Vec<f64> { rows.iter().map(f).collect() };
        let normalized: Vec<Stat> = (0..num_objectives)
            .map(|k| Stat::of(&column(&|r| r.normalized[k])))
            .collect();
        let z_accuracy = rows
            .iter()
            .map(|r| r.z_accuracy)
            .collect::<Option<Vec<f64>>>()
            .map(|v| Stat::of(&v));
        aggregates.push(TechniqueAggregate {
            technique,
            percent_conflicts: Stat::of(&column(&|r| r.percent_conflicts)),
            percent_goal_reached: Stat::of(&column(&|r| r.percent_goal_reached)),
            min_objective: normalized.iter().map(|s| s.mean).fold(f64::INFINITY, f64::min),
            normalized,
            z_accuracy,
        });
        results.extend(rows);
    }

    let label = match (&config.domain, &config.model) {
        (Some(d), _) => d.domain.to_string(),
        (None, Some(_)) => instances[0].name.clone(),
        (None, None) => "custom".into(),
    };
    Ok(ExperimentReport {
        label,
        trials: config.trials,
        num_objectives,
        techniques: config.techniques.clone(),
        instances: summaries,
        results,
        aggregates,
    })
}
