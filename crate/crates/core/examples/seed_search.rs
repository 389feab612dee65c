//! Fixture seed search: evaluates every technique on generated layouts and
//! reports, per seed, the trial-level conflict rates of B6 and B4 along with
//! each technique's min-objective value.
//!
//! `cargo run --release -p clmdp --example seed_search -- <domain> [first] [last]`

use clmdp::baselines::Technique;
use clmdp::domains::{DomainConfig, DomainKind};
use clmdp::experiment::{run_experiment, ExperimentConfig};

fn main() -> clmdp::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let domain: DomainKind = args.first().map(String::as_str).unwrap_or("salp").parse()?;
    let first: u64 = args.get(1).and_then(|c| c.parse().ok()).unwrap_or(1);
    let last: u64 = args.get(2).and_then(|c| c.parse().ok()).unwrap_or(20);
    for seed in first..=last {
        let config = ExperimentConfig {
            domain: Some(DomainConfig::new(domain, seed)),
            techniques: Technique::IMPLEMENTED.to_vec(),
            instance_seeds: Some(vec![seed]),
            ..ExperimentConfig::default()
        };
        let report = run_experiment(&config)?;
        let mut line = format!("{domain} seed={seed}");
        for r in &report.results {
            line.push_str(&format!(
                " {}:s={},c={:.0},g={:.0},min={:.3}",
                r.technique,
                r.static_conflict_states,
                r.percent_conflicts,
                r.percent_goal_reached,
                r.min_objective
            ));
        }
        println!("{line}");
    }
    Ok(())
}
