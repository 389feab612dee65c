//! Browser bindings for the demo page in `www/`.
//!
//! Every call regenerates its instance from `(domain, seed)`, so the page
//! holds no Rust-side state. Results are JSON strings.

use clmdp::domains::{generate, DomainConfig, DomainInstance, DomainKind, ACTION_NAMES};
use clmdp::experiment::STEPS_PER_STATE;
use clmdp::{
    conflict_checker, infer_z, run_technique, simulate_expert, z_accuracy, Error, PlannerConfig,
    Result, Technique, TechniqueParams,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct StateView {
    x: usize,
    y: usize,
    carrying: bool,
    context: usize,
}

#[derive(Serialize)]
struct InstanceView {
    domain: String,
    seed: u32,
    width: usize,
    height: usize,
    obstacles: Vec<(usize, usize)>,
    features: Vec<(String, Vec<(usize, usize)>)>,
    goal: (usize, usize),
    pickup: Option<(usize, usize)>,
    contexts: Vec<String>,
    /// Context indices from highest to lowest priority.
    meta_ordering: Vec<usize>,
    actions: Vec<&'static str>,
    states: Vec<StateView>,
}

#[derive(Serialize)]
struct PlanView {
    technique: String,
    actions: Vec<usize>,
    conflict_states: Vec<usize>,
    resolved: Option<bool>,
    resolver_iterations: Option<usize>,
    contexts_updated: Option<Vec<usize>>,
}

#[derive(Serialize)]
struct InferenceView {
    trajectories: usize,
    visited: Vec<bool>,
    inferred: Vec<usize>,
    accuracy: f64,
    /// Accuracy of mapping every state to the highest-priority context.
    constant_accuracy: f64,
    plan: PlanView,
}

fn instance(domain: &str, seed: u32) -> Result<DomainInstance> {
    let kind: DomainKind = domain.parse()?;
    generate(&DomainConfig::new(kind, seed.into()))
}

fn plan_view(inst: &DomainInstance, technique: Technique, params: &TechniqueParams) -> Result<PlanView> {
    let planner = PlannerConfig::default();
    let out = run_technique(technique, &inst.model, params, &planner)?;
    let report = conflict_checker(&out.policy.actions, &inst.model.base, &planner.checker())?;
    Ok(PlanView {
        technique: technique.to_string(),
        actions: out.policy.actions,
        conflict_states: report.conflict_states,
        resolved: out.diagnostics.as_ref().map(|d| d.resolved),
        resolver_iterations: out.diagnostics.as_ref().map(|d| d.resolver_iterations),
        contexts_updated: out.diagnostics.map(|d| d.contexts_updated),
    })
}

/// Layout, contexts and state coordinates of a generated instance.
pub fn describe(domain: &str, seed: u32) -> Result<String> {
    let inst = instance(domain, seed)?;
    let view = InstanceView {
        domain: inst.domain.to_string(),
        seed,
        width: inst.grid.width,
        height: inst.grid.height,
        obstacles: inst.grid.obstacles.iter().copied().collect(),
        features: inst
            .grid
            .features
            .iter()
            .map(|(k, cells)| (k.name().to_string(), cells.iter().copied().collect()))
            .collect(),
        goal: inst.grid.goal_cell,
        pickup: inst.grid.pickup_cell,
        contexts: inst.domain.context_names().iter().map(|s| s.to_string()).collect(),
        meta_ordering: inst.model.meta_ordering.clone(),
        actions: ACTION_NAMES.to_vec(),
        states: inst
            .attribution
            .iter()
            .map(|a| StateView {
                x: a.cell.0,
                y: a.cell.1,
                carrying: a.carrying,
                context: a.context,
            })
            .collect(),
    };
    Ok(serde_json::to_string(&view)?)
}

/// Global policy of `technique` and the states it leaves unable to reach the goal.
pub fn plan(domain: &str, seed: u32, technique: &str) -> Result<String> {
    let inst = instance(domain, seed)?;
    let technique: Technique = technique.parse()?;
    if technique == Technique::O2 {
        return Err(Error::InvalidArgument("use infer for O2".into()));
    }
    Ok(serde_json::to_string(&plan_view(&inst, technique, &TechniqueParams::default())?)?)
}

/// Infers the mapping from `trajectories` expert runs and plans with it.
pub fn infer(domain: &str, seed: u32, trajectories: u32, expert_seed: u32) -> Result<String> {
    let inst = instance(domain, seed)?;
    let model = &inst.model;
    let planner = PlannerConfig::default();
    let steps = STEPS_PER_STATE * model.base.num_states();
    let dataset = simulate_expert(model, trajectories as usize, steps, expert_seed.into(), &planner)?;
    let result = infer_z(model, &dataset, &planner)?;
    let mut visited = vec![false; model.base.num_states()];
    for step in dataset.steps() {
        visited[step.state] = true;
    }
    let c = model.num_contexts();
    let constant = vec![model.top_context(); model.base.num_states()];
    let params = TechniqueParams {
        weights: None,
        dataset: Some(dataset),
    };
    let view = InferenceView {
        trajectories: trajectories as usize,
        visited,
        accuracy: z_accuracy(&model.z, &result.z, c)?.accuracy,
        constant_accuracy: z_accuracy(&model.z, &constant, c)?.accuracy,
        inferred: result.z,
        plan: plan_view(&inst, Technique::O2, &params)?,
    };
    Ok(serde_json::to_string(&view)?)
}

fn js(result: Result<String>) -> std::result::Result<String, JsError> {
    result.map_err(|e| JsError::new(&format!("{}: {e}", e.kind())))
}

#[wasm_bindgen(js_name = describe)]
pub fn describe_js(domain: &str, seed: u32) -> std::result::Result<String, JsError> {
    js(describe(domain, seed))
}

#[wasm_bindgen(js_name = plan)]
pub fn plan_js(domain: &str, seed: u32, technique: &str) -> std::result::Result<String, JsError> {
    js(plan(domain, seed, technique))
}

#[wasm_bindgen(js_name = infer)]
pub fn infer_js(
    domain: &str,
    seed: u32,
    trajectories: u32,
    expert_seed: u32,
) -> std::result::Result<String, JsError> {
    js(infer(domain, seed, trajectories, expert_seed))
}
