//! Command-line front end: generate instances, solve the knapsack LP,
//! compute contracts, reduce, build policies, evaluate them exactly or by
//! Monte Carlo, query small-instance optima, and run experiment presets.
//!
//! Exit codes: 0 success, 1 experiment assertion failure, 2 usage or input
//! errors. Parallel sections honor RAYON_NUM_THREADS.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mskc_core::contracts::{compute_ior, min_payment_contract, reduce_to_mskc};
use mskc_core::engine::{estimate_profit_mc, expected_profit_exact, EvalConfig};
use mskc_core::experiments::{flat_rows, run_preset, ExperimentReport, PRESETS};
use mskc_core::instances::{
    self, gen_alpha_gap, gen_bounded_gap, gen_fully_vs_stop, gen_info_gap, gen_lp_gap, gen_random,
    gen_random_contract, InstanceBundle, RandomProfile,
};
use mskc_core::lp_phi::solve_phi;
use mskc_core::oracle::{
    adapt_of_opt, adapt_opt, nonadapt_opt, ordered_adapt_opt, stopadapt_opt, OracleConfig,
};
use mskc_core::policies::{build_ordered_adaptive, build_skc, build_skc_bound, build_skc_of};
use mskc_core::policy::Policy;
use mskc_core::{MskcInstance, Rational};

#[derive(Parser)]
#[command(
    name = "mskc",
    version,
    about = "Stochastic knapsack with costs: solvers, policies, simulation, experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance family to JSON.
    Gen(GenArgs),
    /// Solve the knapsack LP at a budget and print the structured solution.
    SolvePhi {
        instance: PathBuf,
        /// Budget; defaults to the instance budget.
        #[arg(long)]
        budget: Option<Rational>,
    },
    /// Print the payment-minimizing contract for one agent action.
    Contract {
        instance: PathBuf,
        #[arg(long)]
        agent: usize,
        #[arg(long)]
        action: usize,
        /// Drop the participation constraint E[t] >= cost.
        #[arg(long)]
        no_ir: bool,
    },
    /// Reduce a contract instance to its MSKC counterpart.
    Reduce {
        instance: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a policy and write it to JSON.
    Policy(PolicyArgs),
    /// Evaluate a policy exactly or by seeded Monte Carlo.
    Eval(EvalArgs),
    /// Exact optimum over a policy class (small instances).
    Oracle {
        instance: PathBuf,
        #[arg(long, value_enum)]
        class: OracleClass,
    },
    /// Run an experiment preset (or `all`) and write CSV + JSON reports.
    Experiment {
        /// Preset name or `all`.
        preset: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also print a human-readable table.
        #[arg(long)]
        human: bool,
    },
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    family: GenFamily,
}

#[derive(Subcommand)]
enum GenFamily {
    /// Single-action ladder jobs separating stopping rules from fixed orders.
    AlphaGap {
        #[arg(long)]
        eps: Rational,
        #[arg(long, default_value = "1/4")]
        gamma: Rational,
        #[arg(long)]
        out: PathBuf,
    },
    /// Layered types separating full adaptivity from stopping rules.
    FullyVsStop {
        #[arg(long)]
        eps: Rational,
        #[arg(long, default_value = "1/4")]
        gamma: Rational,
        #[arg(long)]
        copies: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Moment-matched good/bad items.
    InfoGap {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        eps: Rational,
        #[arg(long, default_value = "1/10000")]
        delta: Rational,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Identical cheap jobs whose LP value overshoots every policy.
    LpGap {
        #[arg(long)]
        eps: Rational,
        #[arg(long)]
        copies: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bounded-size gap family.
    BoundedGap {
        #[arg(long)]
        eps: Rational,
        #[arg(long)]
        copies: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Seeded random MSKC instance.
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 3)]
        support: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ProfileArg::Generic)]
        profile: ProfileArg,
        /// Size headroom for the bounded-size profile.
        #[arg(long, default_value = "1/4")]
        delta: Rational,
        #[arg(long)]
        out: PathBuf,
    },
    /// Seeded random contract instance.
    RandomContract {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 2)]
        support: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Generic,
    PositiveW,
    BoundedSize,
}

#[derive(Args)]
struct PolicyArgs {
    instance: PathBuf,
    #[arg(long, value_enum)]
    algo: Algo,
    /// Budget for the scaled overflow policy (defaults to the instance budget).
    #[arg(long)]
    budget: Option<Rational>,
    /// Pretend-budget threshold for the bounded-size policy.
    #[arg(long)]
    delta: Option<Rational>,
    /// Capacity-augmentation parameter for the ordered DP.
    #[arg(long)]
    epsilon: Option<Rational>,
    /// Keep the virtual item randomized instead of derandomizing it.
    #[arg(long)]
    randomized: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Skc,
    SkcOf,
    SkcBound,
    Ordered,
}

#[derive(Args)]
struct EvalArgs {
    instance: PathBuf,
    policy: PathBuf,
    /// Exact expectation over all realization paths (default).
    #[arg(long, conflicts_with = "mc")]
    exact: bool,
    /// Monte Carlo with this many trials.
    #[arg(long)]
    mc: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Grant the overflowing job its value before halting.
    #[arg(long)]
    overflow_collecting: bool,
    /// Evaluate under a different budget.
    #[arg(long)]
    budget: Option<Rational>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleClass {
    Adapt,
    Stop,
    Nonadapt,
    AdaptOf,
    Ordered,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    echo_invocation();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

/// Echoes the invocation so every output is reproducible from its header.
fn echo_invocation() {
    let line: Vec<String> = std::env::args().collect();
    println!("# {}", line.join(" "));
}

fn load_bundle(path: &Path) -> Result<InstanceBundle> {
    instances::read_json(path).with_context(|| format!("reading {}", path.display()))
}

/// Loads an MSKC instance; contract instances pass through the reduction.
fn load_mskc(path: &Path) -> Result<MskcInstance> {
    let bundle = load_bundle(path)?;
    match bundle.instance {
        instances::Instance::Mskc(m) => Ok(m),
        instances::Instance::Contract(c) => {
            let (inst, _) = reduce_to_mskc(&c)?;
            Ok(inst)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen(args) => {
            let (bundle, out) = match args.family {
                GenFamily::AlphaGap { eps, gamma, out } => (gen_alpha_gap(&eps, &gamma)?, out),
                GenFamily::FullyVsStop { eps, gamma, copies, out } => {
                    (gen_fully_vs_stop(&eps, &gamma, copies)?, out)
                }
                GenFamily::InfoGap { k, eps, delta, n, out } => {
                    (gen_info_gap(k, &eps, &delta, n)?, out)
                }
                GenFamily::LpGap { eps, copies, out } => (gen_lp_gap(&eps, copies)?, out),
                GenFamily::BoundedGap { eps, copies, out } => {
                    (gen_bounded_gap(&eps, copies)?, out)
                }
                GenFamily::Random { n, m, support, seed, profile, delta, out } => {
                    let profile = match profile {
                        ProfileArg::Generic => RandomProfile::Generic,
                        ProfileArg::PositiveW => RandomProfile::PositiveW,
                        ProfileArg::BoundedSize => RandomProfile::BoundedSize(delta),
                    };
                    (gen_random(n, m, support, seed, &profile)?, out)
                }
                GenFamily::RandomContract { n, m, support, seed, out } => {
                    (gen_random_contract(n, m, support, seed)?, out)
                }
            };
            instances::write_json(&bundle, &out)?;
            println!("wrote {} ({})", out.display(), bundle.family);
            Ok(ExitCode::SUCCESS)
        }

        Command::SolvePhi { instance, budget } => {
            let inst = load_mskc(&instance)?;
            let t = budget.unwrap_or_else(|| inst.budget.clone());
            let sol = solve_phi(&inst, &t);
            println!("phi({t}) = {}", sol.value);
            for (i, j, x) in sol.support() {
                let tag = if j == mskc_core::NULL_CHOICE { " (null)" } else { "" };
                println!("  x[item {i}, choice {j}]{tag} = {x}");
            }
            if let Some(f) = &sol.fractional_item {
                println!(
                    "  fractional item {}: choice {} at {}, choice {} at {}",
                    f.item, f.lo_choice, f.lo_weight, f.hi_choice, f.hi_weight
                );
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Contract { instance, agent, action, no_ir } => {
            let bundle = load_bundle(&instance)?;
            let ci = bundle.contract()?;
            let agent_ref = ci
                .agents
                .get(agent)
                .with_context(|| format!("agent {agent} out of range"))?;
            let ic = min_payment_contract(agent_ref, agent, action, !no_ir)?;
            println!(
                "agent {agent}, action {action}, expected transfer {}",
                ic.expected_transfer
            );
            for (size, pay) in ic.contract.payments() {
                println!("  t({size}) = {pay}");
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Reduce { instance, out } => {
            let bundle = load_bundle(&instance)?;
            let ci = bundle.contract()?;
            let (inst, _) = reduce_to_mskc(ci)?;
            let alpha = compute_ior(&inst).map(|i| i.alpha.to_string());
            let mut reduced = InstanceBundle {
                family: format!("{}-reduced", bundle.family),
                params: bundle.params.clone(),
                notes: bundle.notes.clone(),
                instance: instances::Instance::Mskc(inst),
            };
            if let Ok(alpha) = alpha {
                reduced.notes.insert("ior_alpha".into(), alpha);
            }
            instances::write_json(&reduced, &out)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }

        Command::Policy(args) => {
            let inst = load_mskc(&args.instance)?;
            let policy = match args.algo {
                Algo::Skc => Policy::NonAdaptive(build_skc(&inst, !args.randomized)?),
                Algo::SkcOf => {
                    let t = args.budget.unwrap_or_else(|| inst.budget.clone());
                    Policy::NonAdaptive(build_skc_of(&inst, &t)?)
                }
                Algo::SkcBound => {
                    let delta = args
                        .delta
                        .context("--delta is required for the bounded-size policy")?;
                    Policy::StoppingTime(build_skc_bound(&inst, &delta)?)
                }
                Algo::Ordered => {
                    let eps = args
                        .epsilon
                        .context("--epsilon is required for the ordered DP policy")?;
                    let (table, policy) = build_ordered_adaptive(&inst, &eps)?;
                    println!("dp root value (rounded sizes) = {}", table.root_value());
                    policy
                }
            };
            std::fs::write(&args.out, serde_json::to_string_pretty(&policy)? + "\n")?;
            println!("wrote {}", args.out.display());
            Ok(ExitCode::SUCCESS)
        }

        Command::Eval(args) => {
            let mut inst = load_mskc(&args.instance)?;
            if let Some(budget) = args.budget {
                inst = inst.rebudget(budget)?;
            }
            let text = std::fs::read_to_string(&args.policy)
                .with_context(|| format!("reading {}", args.policy.display()))?;
            let policy: Policy = serde_json::from_str(&text)
                .with_context(|| format!("parsing policy {}", args.policy.display()))?;
            let cfg = EvalConfig {
                overflow_collecting: args.overflow_collecting,
                ..EvalConfig::default()
            };
            match args.mc {
                Some(trials) => {
                    let est = estimate_profit_mc(&policy, &inst, &cfg, trials, args.seed)?;
                    println!("{}", serde_json::to_string(&est)?);
                }
                None => {
                    let value = expected_profit_exact(&policy, &inst, &cfg)?;
                    println!("expected profit = {value}");
                }
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Oracle { instance, class } => {
            let inst = load_mskc(&instance)?;
            let cfg = OracleConfig::default();
            let res = match class {
                OracleClass::Adapt => adapt_opt(&inst, false, &cfg)?,
                OracleClass::AdaptOf => adapt_of_opt(&inst, &cfg)?,
                OracleClass::Stop => stopadapt_opt(&inst, &cfg)?,
                OracleClass::Nonadapt => nonadapt_opt(&inst, &cfg)?,
                OracleClass::Ordered => ordered_adapt_opt(&inst, &cfg)?,
            };
            println!("{}", res.value);
            println!("# states explored: {}", res.states_explored);
            Ok(ExitCode::SUCCESS)
        }

        Command::Experiment { preset, out, human } => {
            let names: Vec<&str> = if preset == "all" {
                PRESETS.to_vec()
            } else {
                vec![preset.as_str()]
            };
            let mut all_pass = true;
            for name in names {
                let report = run_preset(name)?;
                all_pass &= report.pass;
                summarize(&report, human);
                if let Some(dir) = &out {
                    std::fs::create_dir_all(dir)?;
                    write_reports(dir, &report)?;
                }
            }
            Ok(if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn summarize(report: &ExperimentReport, human: bool) {
    println!(
        "{}: {} ({} cells)",
        report.experiment,
        if report.pass { "PASS" } else { "FAIL" },
        report.cells.len()
    );
    if human {
        for cell in &report.cells {
            for row in &cell.rows {
                println!(
                    "  [{}] {} = {} {} {} -> {} ({} ms)",
                    cell.params,
                    row.quantity,
                    row.value,
                    row.relation,
                    row.bound,
                    if row.pass { "ok" } else { "FAIL" },
                    cell.wall_ms
                );
            }
        }
    } else {
        for (params, row) in report.failed_rows() {
            println!(
                "  FAIL [{params}] {} = {} (required {} {})",
                row.quantity, row.value, row.relation, row.bound
            );
        }
    }
}

fn write_reports(dir: &Path, report: &ExperimentReport) -> Result<()> {
    let json_path = dir.join(format!("{}.report.json", report.experiment));
    std::fs::write(&json_path, serde_json::to_string_pretty(report)? + "\n")?;
    let csv_path = dir.join(format!("{}.csv", report.experiment));
    let mut writer = csv::Writer::from_path(&csv_path)?;
    for row in flat_rows(report) {
        writer.serialize(row)?;
    }
    writer.flush()?;
    println!("  wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
