//! `clmdp`: generate benchmark domains, plan with any technique, check
//! policies for conflicts, infer context mappings and run experiments.
//!
//! Models, policies, trajectories and configs are JSON documents. Failures
//! print a single `error: <kind>: <message>` line on stderr and exit with
//! status 1 (2 for command-line usage errors, with kind `usage`).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use clmdp::domains::{generate, DomainConfig, DomainKind};
use clmdp::experiment::{run_experiment, ExperimentConfig, STEPS_PER_STATE};
use clmdp::report::{emit_report, ReportFormat};
use clmdp::{
    conflict_checker, infer_z, run_technique, simulate_expert, CheckerConfig, Clmdp, Error,
    GlobalPolicy, PlannerConfig, Result, Technique, TechniqueParams, TrajectoryDataset,
};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "clmdp", version, about = "Contextual lexicographic MDP planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a domain instance and write its model.
    Generate(GenerateArgs),
    /// Plan a model with one technique and write the global policy.
    Solve(SolveArgs),
    /// Report the states from which a policy cannot reach the goal.
    Check(CheckArgs),
    /// Infer the state-context mapping from expert trajectories.
    Infer(InferArgs),
    /// Roll out the planned policy of a model as expert trajectories.
    SimulateExpert(SimulateArgs),
    /// Run an experiment and write its report files.
    Bench(BenchArgs),
}

#[derive(Args)]
struct PlannerArgs {
    /// Slack kept after each lexicographic pass.
    #[arg(long, default_value_t = 0.0)]
    slack: f64,
    /// Convergence tolerance of value iteration.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Run the conflict checker on log reachability values.
    #[arg(long)]
    log_space: bool,
}

impl PlannerArgs {
    fn config(&self) -> PlannerConfig {
        let default = PlannerConfig::default();
        PlannerConfig {
            slack: self.slack,
            tolerance: self.tolerance.unwrap_or(default.tolerance),
            log_space: self.log_space,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// salp, taxi or warehouse.
    #[arg(long)]
    domain: DomainKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    /// Probability that a move leaves the agent in place.
    #[arg(long)]
    slip: Option<f64>,
    /// Model file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the grid layout and state attribution here.
    #[arg(long)]
    layout: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = "O1")]
    technique: String,
    /// Expert trajectories, required by O2.
    #[arg(long)]
    trajectories: Option<PathBuf>,
    /// B3 weights by objective, comma separated.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    #[arg(long)]
    gamma: Option<f64>,
    #[command(flatten)]
    planner: PlannerArgs,
    /// Policy file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    policy: PathBuf,
    #[arg(long)]
    log_space: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InferArgs {
    /// Model whose `z` may be missing.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    trajectories: PathBuf,
    #[command(flatten)]
    planner: PlannerArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Number of trajectories.
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Steps per trajectory; 50 per state by default.
    #[arg(long)]
    max_steps: Option<usize>,
    #[command(flatten)]
    planner: PlannerArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Generate instances of this domain.
    #[arg(long, conflicts_with = "model")]
    domain: Option<DomainKind>,
    /// Evaluate a single model file.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Techniques to run, comma separated or repeated.
    #[arg(long, value_delimiter = ',')]
    technique: Vec<String>,
    /// Instance seeds, comma separated; the domain's fixtures by default.
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    #[arg(long)]
    rollout_seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    slack: Option<f64>,
    #[arg(long)]
    log_space: bool,
    /// Report directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Report formats, comma separated.
    #[arg(long, value_delimiter = ',', default_values = ["csv", "json"])]
    format: Vec<ReportFormat>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes to stdout; a closed pipe (`clmdp … | head`) is not an error.
fn emit(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(path) => fs::write(path, text)?,
        None => emit(&text)?,
    }
    Ok(())
}

fn load_model(path: &Path, gamma: Option<f64>) -> Result<Clmdp> {
    let mut model: Clmdp = read_json(path)?;
    if let Some(g) = gamma {
        model.base = model.base.with_discount(g)?;
    }
    Ok(model)
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let mut config = DomainConfig::new(args.domain, args.seed);
    if let Some(g) = args.gamma {
        config.discount = g;
    }
    if let Some(w) = args.width {
        config.width = w;
    }
    if let Some(h) = args.height {
        config.height = h;
    }
    if let Some(p) = args.slip {
        config.slip_probability = p;
    }
    let instance = generate(&config)?;
    if let Some(path) = &args.layout {
        #[derive(Serialize)]
        struct Layout<'a> {
            domain: DomainKind,
            grid: &'a clmdp::domains::GridSpec,
            attribution: &'a [clmdp::domains::StateAttribution],
        }
        write_json(
            &Layout {
                domain: instance.domain,
                grid: &instance.grid,
                attribution: &instance.attribution,
            },
            Some(path),
        )?;
    }
    write_json(&instance.model, args.out.as_deref())?;
    if args.out.is_some() {
        eprintln!(
            "{} seed {}: {} states, {} actions",
            args.domain,
            args.seed,
            instance.model.base.num_states(),
            instance.model.base.num_actions()
        );
    }
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let model = load_model(&args.model, args.gamma)?;
    let params = TechniqueParams {
        weights: args.weights,
        dataset: args.trajectories.as_deref().map(read_json).transpose()?,
    };
    let planner = args.planner.config();
    let out = run_technique(args.technique.parse()?, &model, &params, &planner)?;
    let report = conflict_checker(&out.policy.actions, &model.base, &planner.checker())?;
    write_json(&out.policy, args.out.as_deref())?;

    #[derive(Serialize)]
    struct Summary<'a> {
        technique: Technique,
        has_conflict: bool,
        conflict_states: &'a [usize],
        diagnostics: Option<&'a clmdp::SolveDiagnostics>,
        inferred_z: Option<&'a [usize]>,
    }
    let summary = Summary {
        technique: out.technique,
        has_conflict: report.has_conflict,
        conflict_states: &report.conflict_states,
        diagnostics: out.diagnostics.as_ref(),
        inferred_z: out.inferred_z.as_deref(),
    };
    let text = serde_json::to_string_pretty(&summary)? + "\n";
    if args.out.is_some() {
        emit(&text)
    } else {
        eprint!("{text}");
        Ok(())
    }
}

fn cmd_check(args: CheckArgs) -> Result<()> {
    let model = load_model(&args.model, None)?;
    let policy: GlobalPolicy = read_json(&args.policy)?;
    let report = conflict_checker(&policy.actions, &model.base, &CheckerConfig::log_space(args.log_space))?;
    write_json(&report, args.out.as_deref())
}

fn cmd_infer(args: InferArgs) -> Result<()> {
    let model = load_model(&args.model, None)?;
    let dataset: TrajectoryDataset = read_json(&args.trajectories)?;
    let result = infer_z(&model, &dataset, &args.planner.config())?;
    write_json(&result, args.out.as_deref())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let model = load_model(&args.model, None)?;
    let max_steps = args
        .max_steps
        .unwrap_or(STEPS_PER_STATE * model.base.num_states());
    let dataset = simulate_expert(&model, args.count, max_steps, args.seed, &args.planner.config())?;
    write_json(&dataset, args.out.as_deref())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let mut config: ExperimentConfig = match &args.config {
        Some(path) => read_json(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(domain) = args.domain {
        config.domain = Some(DomainConfig::new(domain, 0));
        config.model = None;
    }
    if let Some(model) = args.model {
        config.model = Some(model);
        config.domain = None;
    }
    if !args.technique.is_empty() {
        config.techniques = args
            .technique
            .iter()
            .map(|t| t.parse())
            .collect::<Result<Vec<Technique>>>()?;
    }
    if !args.seed.is_empty() {
        config.instance_seeds = Some(args.seed);
    }
    if let Some(s) = args.rollout_seed {
        config.rollout_seed = s;
    }
    if let Some(t) = args.trials {
        config.trials = t;
    }
    if let Some(m) = args.max_steps {
        config.max_steps = Some(m);
    }
    if let Some(g) = args.gamma {
        config.discount = Some(g);
    }
    if let Some(s) = args.slack {
        config.slack = s;
    }
    config.log_space |= args.log_space;

    let report = run_experiment(&config)?;
    for path in emit_report(&report, &args.out, &args.format)? {
        eprintln!("wrote {}", path.display());
    }
    let mut table = format!("{:<4} {:>10} {:>10} {:>10}\n", "tech", "conflicts%", "goal%", "min-obj");
    for a in &report.aggregates {
        table += &format!(
            "{:<4} {:>10.2} {:>10.2} {:>10.4}\n",
            a.technique.to_string(),
            a.percent_conflicts.mean,
            a.percent_goal_reached.mean,
            a.min_objective
        );
    }
    emit(&table)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or_default();
            eprintln!("error: usage: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Check(a) => cmd_check(a),
        Command::Infer(a) => cmd_infer(a),
        Command::SimulateExpert(a) => cmd_simulate(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.kind());
            ExitCode::FAILURE
        }
    }
}
