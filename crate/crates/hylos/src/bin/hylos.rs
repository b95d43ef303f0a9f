//! Thin CLI over the hylos library: scene inspection, single-transaction
//! runs, benchmark replays, metrics, guardrail decoding, latent repair,
//! artifact ingestion, and commit-log verification.
//!
//! Exit codes: 0 committed/ok, 2 review, 3 capability-gap, 4 rolled-back,
//! 1 internal or validation error.

use std::fs;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hylos::artifact::{self, from_artifact_str, RepairProblem};
use hylos::bench::{self, from_config_str, HylosConfig};
use hylos::causal::PolicyKind;
use hylos::guardrail::{Decoder, DecodeOutcome, EnumerativeModel, Grid, Selection};
use hylos::math::Axis;
use hylos::scene::{from_scene_str, to_scene_string};
use hylos::txn::{log_from_str, verify_log, OutcomeKind, TxnKernel};

#[derive(Parser)]
#[command(name = "hylos", about = "Contract-bounded spatial transaction kernel")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scene snapshot utilities.
    Scene {
        #[command(subcommand)]
        action: SceneAction,
    },
    /// Single-transaction lifecycle on the canonical fixture.
    Txn {
        #[command(subcommand)]
        action: TxnAction,
    },
    /// Benchmark replay.
    Replay {
        #[command(subcommand)]
        action: ReplayAction,
    },
    /// Metric suite over the full family.
    Metrics {
        #[command(subcommand)]
        action: MetricsAction,
    },
    /// Constrained dual-stream decoding.
    Guardrail {
        #[command(subcommand)]
        action: GuardrailAction,
    },
    /// Penalty-method latent repair on the clearance fixture.
    Repair {
        #[command(subcommand)]
        action: RepairAction,
    },
    /// Artifact ingestion.
    Artifact {
        #[command(subcommand)]
        action: ArtifactAction,
    },
    /// Commit-log verification.
    Log {
        #[command(subcommand)]
        action: LogAction,
    },
}

#[derive(Subcommand)]
enum SceneAction {
    /// Validate a scene file against all structural invariants.
    Validate { path: String },
    /// Print the canonical serialization and content digest.
    Show { path: String },
}

#[derive(Subcommand)]
enum TxnAction {
    /// Propose the canonical repair transaction and print it.
    Propose {
        #[arg(long, default_value_t = 0.03)]
        delta: f64,
    },
    /// Run the canonical repair transaction end to end.
    Run {
        #[arg(long, default_value_t = 0.03)]
        delta: f64,
    },
}

#[derive(Subcommand)]
enum ReplayAction {
    /// Replay one scenario (or the full family) under a condition.
    Run {
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long, default_value = "contract-alternatives")]
        condition: String,
        /// Overrides the condition with an external policy command.
        #[arg(long)]
        policy: Option<String>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        config: Option<String>,
        /// Where to write the merged replay log.
        #[arg(long)]
        log_out: Option<String>,
    },
}

#[derive(Subcommand)]
enum MetricsAction {
    /// Run all conditions over the family and print the metrics report.
    Report {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        config: Option<String>,
        #[arg(long)]
        out: Option<String>,
    },
}

#[derive(Subcommand)]
enum GuardrailAction {
    /// Greedy or sampled decode over the block-world vocabulary.
    Decode {
        #[arg(long, default_value_t = 4)]
        width: i64,
        #[arg(long, default_value_t = 4)]
        height: i64,
        #[arg(long, default_value_t = 3)]
        parts: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Subcommand)]
enum RepairAction {
    /// Optimize the 1-D clearance fixture and print the trace.
    Optimize {
        #[arg(long, default_value_t = 1e4)]
        lambda: f64,
        #[arg(long, default_value_t = 0.1)]
        beta: f64,
    },
}

#[derive(Subcommand)]
enum ArtifactAction {
    /// Ingest an artifact file into an empty scene.
    Ingest { path: String },
}

#[derive(Subcommand)]
enum LogAction {
    /// Verify the hash chain of a replay log file.
    Verify { path: String },
}

fn outcome_exit(outcome: &OutcomeKind) -> u8 {
    match outcome {
        OutcomeKind::Committed => 0,
        OutcomeKind::Review => 2,
        OutcomeKind::CapabilityGap => 3,
        OutcomeKind::RolledBack => 4,
        OutcomeKind::Refused | OutcomeKind::Rejected | OutcomeKind::Gated => 2,
    }
}

fn load_config(path: &Option<String>, seed: u64) -> Result<HylosConfig, hylos::error::Error> {
    let mut config = match path {
        Some(p) => from_config_str(&fs::read_to_string(p)?)?,
        None => HylosConfig::default(),
    };
    config.seed = seed;
    Ok(config)
}

fn run(cli: Cli) -> Result<u8, hylos::error::Error> {
    match cli.command {
        Command::Scene { action } => match action {
            SceneAction::Validate { path } => {
                let scene = from_scene_str(&fs::read_to_string(path)?)?;
                scene.validate()?;
                println!("ok: {} ({} entities)", scene.snapshot_id, scene.entities.len());
                Ok(0)
            }
            SceneAction::Show { path } => {
                let scene = from_scene_str(&fs::read_to_string(path)?)?;
                println!("{}", to_scene_string(&scene));
                println!("digest = {}", scene.digest());
                Ok(0)
            }
        },
        Command::Txn { action } => {
            let config = HylosConfig::default();
            let scenarios = bench::build_scenarios(&config);
            let pick = |delta: f64| {
                scenarios
                    .iter()
                    .find(|s| s.delta == delta && s.axis == Axis::X && s.alternatives_present && !s.probe_available)
                    .cloned()
                    .ok_or_else(|| hylos::error::Error::Other(format!("no scenario with delta {delta}")))
            };
            match action {
                TxnAction::Propose { delta } => {
                    let scenario = pick(delta)?;
                    let (result, _) =
                        bench::replay(&scenario, &PolicyKind::ContractAlternatives, &config)?;
                    println!("{}", hylos::canonical::to_canonical_string(&result));
                    Ok(0)
                }
                TxnAction::Run { delta } => {
                    let scenario = pick(delta)?;
                    let (result, _) =
                        bench::replay(&scenario, &PolicyKind::ContractAlternatives, &config)?;
                    let outcome = result.outcome.clone();
                    println!("{}", hylos::canonical::to_canonical_string(&result));
                    Ok(outcome.map(|o| outcome_exit(&o)).unwrap_or(2))
                }
            }
        }
        Command::Replay { action } => match action {
            ReplayAction::Run { scenario, condition, policy, seed, config, log_out } => {
                let config = load_config(&config, seed)?;
                let condition = match policy {
                    Some(cmd) => PolicyKind::External(cmd),
                    None => PolicyKind::parse(&condition)?,
                };
                let scenarios = bench::build_scenarios(&config);
                let selected: Vec<_> = match &scenario {
                    Some(id) => scenarios
                        .iter()
                        .filter(|s| &s.scenario_id == id)
                        .cloned()
                        .collect(),
                    None => scenarios.clone(),
                };
                if selected.is_empty() {
                    return Err(hylos::error::Error::Other(format!(
                        "unknown scenario {scenario:?}"
                    )));
                }
                let mut results = Vec::new();
                let mut chains = Vec::new();
                for s in &selected {
                    let (result, log) = bench::replay(s, &condition, &config)?;
                    println!(
                        "{}\t{}\t{}",
                        result.scenario_id,
                        result.condition,
                        result
                            .outcome
                            .as_ref()
                            .map(|o| o.label().to_string())
                            .unwrap_or_else(|| "deferred".into())
                    );
                    results.push(result);
                    chains.push(log);
                }
                if let Some(path) = log_out {
                    fs::write(path, hylos::txn::log_to_string(&bench::merge_logs(chains)))?;
                }
                let worst = results
                    .iter()
                    .filter_map(|r| r.outcome.as_ref())
                    .map(outcome_exit)
                    .max()
                    .unwrap_or(0);
                Ok(worst)
            }
        },
        Command::Metrics { action } => match action {
            MetricsAction::Report { seed, config, out } => {
                let config = load_config(&config, seed)?;
                let run = bench::run_family(&config, &bench::ALL_CONDITIONS)?;
                let text = run.metrics.render();
                match out {
                    Some(path) => fs::write(path, &text)?,
                    None => print!("{text}"),
                }
                Ok(0)
            }
        },
        Command::Guardrail { action } => match action {
            GuardrailAction::Decode { width, height, parts, seed } => {
                let mut model = EnumerativeModel {
                    parts: (0..parts).map(|i| format!("part{i}")).collect(),
                };
                let mut decoder = Decoder::new(Grid { width, height });
                if let Some(seed) = seed {
                    decoder.selection = Selection::Sample { seed };
                }
                let report = decoder.decode(&mut model)?;
                println!("{}", hylos::canonical::to_canonical_string(&report.tokens));
                match report.outcome {
                    DecodeOutcome::Completed => {
                        println!("outcome = completed");
                        Ok(0)
                    }
                    DecodeOutcome::Review { step } => {
                        println!("outcome = review at step {step}");
                        Ok(2)
                    }
                    DecodeOutcome::Gap { gap } => {
                        println!("outcome = capability gap: {}", gap.detail);
                        Ok(3)
                    }
                    DecodeOutcome::Halted { step } => {
                        println!("outcome = halted at step {step}");
                        Ok(2)
                    }
                    DecodeOutcome::LengthCapped => {
                        println!("outcome = length-capped");
                        Ok(2)
                    }
                }
            }
        },
        Command::Repair { action } => match action {
            RepairAction::Optimize { lambda, beta } => {
                let (decoder, violations, z0, target) = artifact::clearance_fixture();
                let problem =
                    RepairProblem { decoder: &decoder, target, violations, lambda, beta };
                let (z, trace) = artifact::latent_repair(&problem, &z0)?;
                println!("z* = {z:?}");
                println!("iterations = {}", trace.iterations);
                println!("objective = {:?}", trace.objective.last());
                println!("violations = {:?}", trace.final_violations);
                Ok(0)
            }
        },
        Command::Artifact { action } => match action {
            ArtifactAction::Ingest { path } => {
                let artifact = from_artifact_str(&fs::read_to_string(path)?)?;
                let mut kernel = TxnKernel::with_defaults();
                let scene = hylos::scene::SceneSnapshot::empty("snap-ingest");
                let (next, report) = artifact::ingest(&mut kernel, &scene, &artifact)?;
                println!("outcome = {}", report.outcome.label());
                println!("detail = {}", report.detail);
                println!(
                    "chi_gsc = {}",
                    report
                        .chi_gsc
                        .map(|v| format!("{v:.6}"))
                        .unwrap_or_else(|| "undefined".into())
                );
                println!("snapshot = {}", next.snapshot_id);
                Ok(outcome_exit(&report.outcome))
            }
        },
        Command::Log { action } => match action {
            LogAction::Verify { path } => {
                let log = log_from_str(&fs::read_to_string(path)?)?;
                match verify_log(&log) {
                    Ok(()) => {
                        println!("ok: {} entries", log.len());
                        Ok(0)
                    }
                    Err(e) => {
                        eprintln!("broken chain: {e}");
                        Ok(1)
                    }
                }
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
