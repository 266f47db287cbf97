//! `cftc`: fault-tree analysis over component models — negated-DNF
//! extraction, bounded correctness checking, composition, counterexample
//! simplification, and compositionality validation campaigns.
//!
//! Exit codes: 0 = correct/validated, 1 = refuted/violation/not validated,
//! 2 = usage or parse error. `CFTC_JOBS` caps the worker count; output is
//! byte-identical regardless of it.

use std::fs;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cft_core::checker::{check_cft, simplify_counterexample, Verdict};
use cft_core::equivalence::Relation;
use cft_core::formula::Formula;
use cft_core::harness::{run_campaign, validate_theorem_instance, BoundsSpec, TheoremStatus};
use cft_core::model::{parse_model, Model};
use cft_core::report;

#[derive(Parser)]
#[command(name = "cftc", version, about = "Component fault tree checker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Machine,
}

#[derive(clap::Args, Debug, Clone, Copy)]
struct BoundsArgs {
    /// Fault-trace search depth
    #[arg(long = "depth", default_value_t = 4)]
    depth: usize,
    /// Environment table depth
    #[arg(long = "env-depth", default_value_t = 3)]
    env_depth: usize,
    /// Maximum offered inputs per observed trace
    #[arg(long = "max-offers", default_value_t = 2)]
    max_offers: usize,
    /// Witness search depth (default: trace depth plus output-flush headroom)
    #[arg(long = "witness-depth")]
    witness_depth: Option<usize>,
}

impl BoundsArgs {
    fn spec(&self) -> BoundsSpec {
        BoundsSpec {
            trace_depth: self.depth,
            env_depth: self.env_depth,
            max_offers: self.max_offers,
            witness_depth: self.witness_depth,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the canonical negated-DNF clauses of a formula
    Dnf {
        #[arg(long)]
        formula: String,
    },
    /// Check a fault tree against its owning component
    Check {
        #[arg(long)]
        model: String,
        #[arg(long)]
        cft: String,
        #[command(flatten)]
        bounds: BoundsArgs,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Print the composed component and fault tree of a system
    Compose {
        #[arg(long)]
        model: String,
        #[arg(long)]
        system: String,
        /// Keep connected events conjoined with their substituted formulas
        #[arg(long)]
        strict: bool,
    },
    /// Check a fault tree and simplify the counterexamples of refuted clauses
    Simplify {
        #[arg(long)]
        model: String,
        #[arg(long)]
        cft: String,
        #[command(flatten)]
        bounds: BoundsArgs,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Validate the compositionality theorem on a system or a random campaign
    ValidateTheorem {
        #[arg(long, requires = "system", conflicts_with = "random")]
        model: Option<String>,
        #[arg(long)]
        system: Option<String>,
        #[arg(long)]
        random: bool,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        bounds: BoundsArgs,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Dnf { formula } => {
            let parsed = Formula::parse(&formula).map_err(|e| e.to_string())?;
            let mut out = String::new();
            for clause in parsed.neg_dnf() {
                out.push_str(&format!("CLAUSE {clause}\n"));
            }
            print!("{out}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { model, cft, bounds, format } => {
            let model = load_model(&model)?;
            let (tree, owner) = lookup_cft(&model, &cft)?;
            let report = in_worker_pool(|| {
                check_cft(owner, tree, &bounds.spec().for_component(owner))
            })?
            .map_err(|e| e.to_string())?;
            print!(
                "{}",
                match format {
                    Format::Text => report::cft_report_text(&report),
                    Format::Machine => report::cft_report_machine(&report),
                }
            );
            Ok(exit_flag(report.all_correct()))
        }
        Command::Compose { model, system, strict } => {
            let model = load_model(&model)?;
            let decl = model
                .systems
                .get(&system)
                .ok_or_else(|| format!("unknown system '{system}'"))?;
            let spec = model
                .system_spec(&system, BoundsSpec::CAMPAIGN)
                .map_err(|e| e.to_string())?;
            let composite = spec.composite().map_err(|e| e.to_string())?;
            let composed = if strict {
                spec.strict_composed_cft().map_err(|e| e.to_string())?
            } else {
                spec.composed_cft().map_err(|e| e.to_string())?
            };
            let suffix = if strict { "strict" } else { "composed" };
            let mut printed = Model::default();
            printed.components.insert(composite.name().to_string(), composite);
            printed.cfts.insert(format!("{}_{suffix}", decl.check), composed);
            print!("{}", printed.to_text());
            Ok(ExitCode::SUCCESS)
        }
        Command::Simplify { model, cft, bounds, format } => {
            let model = load_model(&model)?;
            let (tree, owner) = lookup_cft(&model, &cft)?;
            let checker_bounds = bounds.spec().for_component(owner);
            let report = in_worker_pool(|| check_cft(owner, tree, &checker_bounds))?
                .map_err(|e| e.to_string())?;
            let mut out = String::new();
            for (clause, verdict) in &report.clauses {
                let single = cft_core::checker::CftReport {
                    output_event: report.output_event.clone(),
                    clauses: vec![(clause.clone(), verdict.clone())],
                };
                out.push_str(&match format {
                    Format::Text => report::cft_report_text(&single),
                    Format::Machine => report::cft_report_machine(&single),
                });
                if let Verdict::Refuted(cex) = verdict {
                    let rel = Relation::ByClauseAndEvent(
                        clause.clone(),
                        report.output_event.clone(),
                    );
                    let simplified =
                        simplify_counterexample(owner, cex, &rel, &checker_bounds)
                            .map_err(|e| e.to_string())?;
                    let wrapped = cft_core::checker::CftReport {
                        output_event: report.output_event.clone(),
                        clauses: vec![(clause.clone(), Verdict::Refuted(Box::new(simplified)))],
                    };
                    out.push_str(match format {
                        Format::Text => "simplified counterexample:\n",
                        Format::Machine => "SIMPLIFIED\n",
                    });
                    out.push_str(&match format {
                        Format::Text => report::cft_report_text(&wrapped),
                        Format::Machine => report::cft_report_machine(&wrapped),
                    });
                }
            }
            print!("{out}");
            Ok(exit_flag(report.all_correct()))
        }
        Command::ValidateTheorem { model, system, random, trials, seed, bounds, format } => {
            if random {
                let campaign =
                    in_worker_pool(|| run_campaign(trials, seed, bounds.spec()))?
                        .map_err(|e| e.to_string())?;
                print!(
                    "{}",
                    match format {
                        Format::Text => report::campaign_text(&campaign),
                        Format::Machine => report::campaign_machine(&campaign),
                    }
                );
                Ok(exit_flag(campaign.violations() == 0 && campaign.transfer_holds()))
            } else {
                let (Some(model_path), Some(system)) = (model, system) else {
                    return Err(
                        "provide --model and --system, or --random".to_string()
                    );
                };
                let model = load_model(&model_path)?;
                let spec = model
                    .system_spec(&system, bounds.spec())
                    .map_err(|e| e.to_string())?;
                let report = in_worker_pool(|| validate_theorem_instance(&spec))?
                    .map_err(|e| e.to_string())?;
                print!(
                    "{}",
                    match format {
                        Format::Text => report::theorem_report_text(&report),
                        Format::Machine => report::theorem_report_machine(&report),
                    }
                );
                Ok(exit_flag(report.status == TheoremStatus::Validated))
            }
        }
    }
}

fn load_model(path: &str) -> Result<Model, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
    parse_model(&text).map_err(|e| format!("{path}:{e}"))
}

fn lookup_cft<'m>(
    model: &'m Model,
    name: &str,
) -> Result<(&'m cft_core::Cft, &'m cft_core::Component), String> {
    let tree = model
        .cfts
        .get(name)
        .ok_or_else(|| format!("unknown cft '{name}'"))?;
    let owner = model
        .components
        .get(&tree.owner)
        .ok_or_else(|| format!("unknown component '{}'", tree.owner))?;
    Ok((tree, owner))
}

fn exit_flag(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

/// Runs the closure inside a pool capped by `CFTC_JOBS` when set.
fn in_worker_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T, String> {
    match std::env::var("CFTC_JOBS") {
        Ok(raw) => {
            let jobs: usize = raw
                .parse()
                .ok()
                .filter(|&n| n >= 1)
                .ok_or_else(|| format!("CFTC_JOBS must be a positive integer, got '{raw}'"))?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| e.to_string())?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}
