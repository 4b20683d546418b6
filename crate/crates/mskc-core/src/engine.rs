//! Policy execution: single sampled runs, exact expected profit by forward
//! convolution over reachable states, and seeded Monte Carlo estimation.
//!
//! Semantics shared by every entry point: a step pays its cost up front,
//! draws a size, and fits iff the cumulative realized size stays within the
//! budget (weak inequality). A fitting step collects the item value (zero
//! for the null choice) and the run continues; an overflow forfeits the
//! value — unless the overflow-collecting variant is on — and halts.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{Contract, ContractInstance, MskcInstance, NULL_CHOICE};
use crate::policy::{Policy, Step};
use crate::rational::Rational;

/// Evaluation knobs; defaults match the standard MSKC semantics.
#[derive(Debug, Clone)]
pub struct EvalConfig {
    /// Grant the final job's value on overflow before halting.
    pub overflow_collecting: bool,
    /// Cap on simultaneously tracked exact states.
    pub state_cap: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            overflow_collecting: false,
            state_cap: 1_000_000,
        }
    }
}

impl EvalConfig {
    pub fn collecting() -> Self {
        EvalConfig {
            overflow_collecting: true,
            ..EvalConfig::default()
        }
    }
}

// ---------------------------------------------------------------------------
// Counter-based RNG: one u64 per (seed, trial, step, lane), independent of
// call order and thread scheduling.
// ---------------------------------------------------------------------------

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stateless keyed generator for reproducible trials.
#[derive(Debug, Clone, Copy)]
pub struct TrialRng {
    pub seed: u64,
    pub trial: u64,
}

impl TrialRng {
    pub fn new(seed: u64, trial: u64) -> Self {
        TrialRng { seed, trial }
    }

    fn draw(&self, step: u64, lane: u64) -> u64 {
        splitmix64(splitmix64(splitmix64(splitmix64(self.seed) ^ self.trial) ^ step) ^ lane)
    }
}

/// Cumulative-probability thresholds scaled to 2^64 for drawing one atom
/// from a fixed distribution with a single uniform u64.
struct SampleTable {
    thresholds: Vec<u128>,
}

impl SampleTable {
    fn build(atoms: &[(Rational, Rational)]) -> SampleTable {
        let scale = BigInt::from(1u8) << 64;
        let mut cum = Rational::zero();
        let thresholds = atoms
            .iter()
            .map(|(_, p)| {
                cum += p;
                let num = cum.numer() * &scale;
                let den = cum.denom();
                // ceil(cum * 2^64)
                let q: BigInt = (&num + den - BigInt::from(1u8)) / den;
                q.to_u128().expect("cdf fits in 128 bits")
            })
            .collect();
        SampleTable { thresholds }
    }

    fn pick(&self, r: u64) -> usize {
        let r = r as u128;
        self.thresholds
            .iter()
            .position(|&t| r < t)
            .unwrap_or(self.thresholds.len() - 1)
    }
}

/// Per-instance sampling tables, built once per Monte Carlo run.
struct Sampler {
    tables: Vec<Vec<SampleTable>>,
}

impl Sampler {
    fn build(inst: &MskcInstance) -> Sampler {
        Sampler {
            tables: inst
                .items
                .iter()
                .map(|item| {
                    item.choices()
                        .iter()
                        .map(|c| SampleTable::build(c.dist.atoms()))
                        .collect()
                })
                .collect(),
        }
    }
}

fn mix_pick(weights: &[Rational; 2], r: u64) -> usize {
    let scale = BigInt::from(1u8) << 64;
    let threshold = (weights[0].numer() * &scale + (weights[0].denom() - BigInt::from(1u8)))
        / weights[0].denom();
    if BigInt::from(r) < threshold {
        0
    } else {
        1
    }
}

// ---------------------------------------------------------------------------
// Policy driver: a uniform state machine over every policy kind.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum DriverState {
    Seq(usize),
    Mask(u64),
    Ordered(usize, i64),
    Ladder(usize, usize),
    Halted,
}

enum RunKind<'a> {
    Fixed(usize),
    Mixed {
        choices: [usize; 2],
        weights: &'a [Rational; 2],
        pick: Option<usize>,
    },
}

enum Decision<'a> {
    Stop(TerminalReason),
    Run { item: usize, kind: RunKind<'a> },
}

fn initial_state(policy: &Policy, inst: &MskcInstance) -> DriverState {
    match policy {
        Policy::NonAdaptive(_) | Policy::StoppingTime(_) => DriverState::Seq(0),
        Policy::Adaptive(_) => {
            let mut mask = 0u64;
            for i in 0..inst.items.len().min(64) {
                mask |= 1 << i;
            }
            DriverState::Mask(mask)
        }
        Policy::OrderedDp(p) => DriverState::Ordered(0, p.table.levels as i64),
        Policy::GroupLadder(_) => DriverState::Ladder(0, 0),
    }
}

fn decide<'a>(
    policy: &'a Policy,
    inst: &MskcInstance,
    state: &DriverState,
    cumulative: &Rational,
) -> Result<Decision<'a>, Error> {
    if matches!(state, DriverState::Halted) {
        return Ok(Decision::Stop(TerminalReason::PolicyStop));
    }
    match policy {
        Policy::NonAdaptive(p) => {
            let DriverState::Seq(ix) = state else { unreachable!() };
            match p.steps.get(*ix) {
                None => Ok(Decision::Stop(TerminalReason::Exhausted)),
                Some(s) => Ok(step_decision(s)),
            }
        }
        Policy::StoppingTime(p) => {
            let DriverState::Seq(ix) = state else { unreachable!() };
            match p.order.steps.get(*ix) {
                None => Ok(Decision::Stop(TerminalReason::Exhausted)),
                Some(s) => {
                    if p.stop_rule.should_stop(*ix, cumulative, &inst.budget)? {
                        Ok(Decision::Stop(TerminalReason::PolicyStop))
                    } else {
                        Ok(step_decision(s))
                    }
                }
            }
        }
        Policy::Adaptive(table) => {
            let DriverState::Mask(mask) = state else { unreachable!() };
            let remaining: Vec<usize> =
                (0..inst.items.len()).filter(|i| mask & (1 << i) != 0).collect();
            if remaining.is_empty() {
                return Ok(Decision::Stop(TerminalReason::Exhausted));
            }
            let capacity = &inst.budget - cumulative;
            match table.lookup(&remaining, &capacity)? {
                crate::policy::AdaptiveAction::Stop => {
                    Ok(Decision::Stop(TerminalReason::PolicyStop))
                }
                crate::policy::AdaptiveAction::Run { item, choice } => Ok(Decision::Run {
                    item,
                    kind: RunKind::Fixed(choice),
                }),
            }
        }
        Policy::OrderedDp(p) => {
            let DriverState::Ordered(mut i, k) = *state else { unreachable!() };
            if k < 0 {
                return Ok(Decision::Stop(TerminalReason::PolicyStop));
            }
            let n = inst.items.len();
            loop {
                if i >= n {
                    return Ok(Decision::Stop(TerminalReason::Exhausted));
                }
                let action = p.table.choice.get(&(i, k as usize)).ok_or_else(|| {
                    Error::InvalidPolicy(format!("no DP entry for ({i}, {k})"))
                })?;
                match action {
                    None => i += 1,
                    Some(j) => {
                        return Ok(Decision::Run {
                            item: i,
                            kind: RunKind::Fixed(*j),
                        })
                    }
                }
            }
        }
        Policy::GroupLadder(p) => {
            let DriverState::Ladder(mut g, mut off) = *state else { unreachable!() };
            while g < p.groups.len() && off >= p.groups[g].len() {
                g += 1;
                off = 0;
            }
            if g >= p.groups.len() {
                return Ok(Decision::Stop(TerminalReason::Exhausted));
            }
            Ok(Decision::Run {
                item: p.groups[g][off],
                kind: RunKind::Fixed(p.choice),
            })
        }
    }
}

fn step_decision(s: &Step) -> Decision<'_> {
    match s {
        Step::Fixed { item, choice } => Decision::Run {
            item: *item,
            kind: RunKind::Fixed(*choice),
        },
        Step::Virtual {
            item,
            choices,
            weights,
            pick,
        } => Decision::Run {
            item: *item,
            kind: RunKind::Mixed {
                choices: *choices,
                weights,
                pick: *pick,
            },
        },
    }
}

/// State transition after executing (item, choice) whose size realized as
/// `size`; only the ordered DP and the ladder inspect the realization.
fn advance(
    policy: &Policy,
    state: &DriverState,
    item: usize,
    size: &Rational,
) -> DriverState {
    match (policy, state) {
        (Policy::NonAdaptive(_), DriverState::Seq(ix))
        | (Policy::StoppingTime(_), DriverState::Seq(ix)) => DriverState::Seq(ix + 1),
        (Policy::Adaptive(_), DriverState::Mask(mask)) => {
            DriverState::Mask(mask & !(1u64 << item))
        }
        (Policy::OrderedDp(p), DriverState::Ordered(i, k)) => {
            // `decide` may have skipped ahead of the stored index.
            debug_assert!(*i <= item);
            let levels = (size / &p.table.delta).floor_int();
            let levels = levels.to_i64().unwrap_or(i64::MAX);
            DriverState::Ordered(item + 1, k - levels)
        }
        (Policy::GroupLadder(p), DriverState::Ladder(g, off)) => {
            // Normalize to the group actually executed.
            let (mut g, mut off) = (*g, *off);
            while g < p.groups.len() && off >= p.groups[g].len() {
                g += 1;
                off = 0;
            }
            if size.is_zero() {
                DriverState::Ladder(g, off + 1)
            } else if *size == p.advance_sizes[g] {
                DriverState::Ladder(g + 1, 0)
            } else {
                DriverState::Halted
            }
        }
        _ => unreachable!("driver state matches policy kind"),
    }
}

// ---------------------------------------------------------------------------
// Single sampled run.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminalReason {
    Overflow,
    PolicyStop,
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub item: usize,
    pub choice: usize,
    pub size: Rational,
    pub completed: bool,
}

/// Realized run of a policy: the attempted steps, why the run ended, and
/// the exact profit (completed values minus all attempted costs).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub steps: Vec<TraceStep>,
    pub terminal: TerminalReason,
    pub profit: Rational,
}

/// Runs `policy` once with the sizes drawn from `rng`.
pub fn execute(
    policy: &Policy,
    inst: &MskcInstance,
    cfg: &EvalConfig,
    rng: TrialRng,
) -> Result<ExecutionTrace, Error> {
    policy.validate(inst)?;
    execute_prepared(policy, inst, &Sampler::build(inst), cfg, rng)
}

/// `execute` without the per-call policy validation; the Monte Carlo loop
/// validates once up front.
fn execute_prepared(
    policy: &Policy,
    inst: &MskcInstance,
    sampler: &Sampler,
    cfg: &EvalConfig,
    rng: TrialRng,
) -> Result<ExecutionTrace, Error> {
    let mut state = initial_state(policy, inst);
    let mut cumulative = Rational::zero();
    let mut profit = Rational::zero();
    let mut steps = Vec::new();
    let terminal;
    let mut step_no: u64 = 0;
    loop {
        match decide(policy, inst, &state, &cumulative)? {
            Decision::Stop(reason) => {
                terminal = reason;
                break;
            }
            Decision::Run { item, kind } => {
                let choice = match kind {
                    RunKind::Fixed(j) => j,
                    RunKind::Mixed { choices, weights, pick } => match pick {
                        Some(j) => j,
                        None => choices[mix_pick(weights, rng.draw(step_no, 1))],
                    },
                };
                let it = &inst.items[item];
                let ch = &it.choice(choice).expect("validated choice");
                profit -= &ch.cost;
                let atom = sampler.tables[item][choice].pick(rng.draw(step_no, 0));
                let size = ch.dist.atoms()[atom].0.clone();
                cumulative += &size;
                let fits = cumulative <= inst.budget;
                let value_collected = fits || cfg.overflow_collecting;
                if value_collected && choice != NULL_CHOICE {
                    profit += &it.value;
                }
                steps.push(TraceStep {
                    item,
                    choice,
                    size: size.clone(),
                    completed: value_collected,
                });
                if !fits {
                    terminal = TerminalReason::Overflow;
                    break;
                }
                state = advance(policy, &state, item, &size);
                step_no += 1;
            }
        }
    }
    Ok(ExecutionTrace {
        steps,
        terminal,
        profit,
    })
}

// ---------------------------------------------------------------------------
// Exact expectation by forward convolution.
// ---------------------------------------------------------------------------

/// Exact evaluation summary: expected profit and the expected truncated
/// mass of attempted item-choice pairs (truncation at the instance budget).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactEval {
    pub profit: Rational,
    pub attempted_mass: Rational,
    pub states_explored: usize,
}

/// Exact `E[profit]` over every realization path of the policy.
pub fn expected_profit_exact(
    policy: &Policy,
    inst: &MskcInstance,
    cfg: &EvalConfig,
) -> Result<Rational, Error> {
    Ok(evaluate_exact(policy, inst, cfg)?.profit)
}

/// Exact evaluation with side quantities; see [`ExactEval`].
pub fn evaluate_exact(
    policy: &Policy,
    inst: &MskcInstance,
    cfg: &EvalConfig,
) -> Result<ExactEval, Error> {
    policy.validate(inst)?;
    let mut frontier: BTreeMap<(DriverState, Rational), Rational> = BTreeMap::new();
    frontier.insert(
        (initial_state(policy, inst), Rational::zero()),
        Rational::one(),
    );
    let mut profit = Rational::zero();
    let mut attempted_mass = Rational::zero();
    let mut states_explored = 0usize;

    while !frontier.is_empty() {
        states_explored += frontier.len();
        if states_explored > cfg.state_cap {
            return Err(Error::StateSpaceTooLarge {
                states: states_explored,
                cap: cfg.state_cap,
            });
        }
        let mut next: BTreeMap<(DriverState, Rational), Rational> = BTreeMap::new();
        for ((state, cumulative), pr) in frontier {
            match decide(policy, inst, &state, &cumulative)? {
                Decision::Stop(_) => {}
                Decision::Run { item, kind } => {
                    let it = &inst.items[item];
                    let alternatives: Vec<(usize, Rational)> = match kind {
                        RunKind::Fixed(j) => vec![(j, Rational::one())],
                        RunKind::Mixed { choices, weights, pick } => match pick {
                            Some(j) => vec![(j, Rational::one())],
                            None => vec![
                                (choices[0], weights[0].clone()),
                                (choices[1], weights[1].clone()),
                            ],
                        },
                    };
                    for (choice, weight) in alternatives {
                        let ch = it.choice(choice).expect("validated choice");
                        let branch_pr = &pr * &weight;
                        profit -= &ch.cost * &branch_pr;
                        attempted_mass += it.mu(choice, &inst.budget) * &branch_pr;
                        for (size, q) in ch.dist.atoms() {
                            let mass = &branch_pr * q;
                            let landed = &cumulative + size;
                            let fits = landed <= inst.budget;
                            if (fits || cfg.overflow_collecting) && choice != NULL_CHOICE {
                                profit += &it.value * &mass;
                            }
                            if fits {
                                let ns = advance(policy, &state, item, size);
                                *next.entry((ns, landed)).or_insert_with(Rational::zero) +=
                                    mass;
                            }
                        }
                    }
                }
            }
        }
        frontier = next;
    }
    Ok(ExactEval {
        profit,
        attempted_mass,
        states_explored,
    })
}

// ---------------------------------------------------------------------------
// Contract-side exact evaluation (transfers paid on observed completion
// times instead of fixed up-front costs).
// ---------------------------------------------------------------------------

/// A fixed order of (agent, action, contract) steps evaluated on the
/// contract instance itself: each attempted job pays the contractual
/// transfer at its realized completion time, values are collected for jobs
/// finishing within budget, and the first overflow halts the run.
pub fn contract_expected_profit_exact(
    ci: &ContractInstance,
    steps: &[(usize, usize, Contract)],
) -> Result<Rational, Error> {
    let mut alive: BTreeMap<Rational, Rational> = BTreeMap::new();
    alive.insert(Rational::zero(), Rational::one());
    let mut profit = Rational::zero();
    for (agent_ix, action_ix, contract) in steps {
        let agent = ci
            .agents
            .get(*agent_ix)
            .ok_or_else(|| Error::InvalidPolicy(format!("agent {agent_ix} out of range")))?;
        let action = agent
            .action(*action_ix)
            .ok_or_else(|| Error::InvalidPolicy(format!("action {action_ix} out of range")))?;
        let mut next: BTreeMap<Rational, Rational> = BTreeMap::new();
        for (cum, pr) in &alive {
            for (size, q) in action.dist.atoms() {
                let mass = pr * q;
                profit -= contract.payment_at(size)? * &mass;
                let landed = cum + size;
                if landed <= ci.budget {
                    profit += &agent.value * &mass;
                    *next.entry(landed).or_insert_with(Rational::zero) += mass;
                }
            }
        }
        alive = next;
        if alive.is_empty() {
            break;
        }
    }
    Ok(profit)
}

// ---------------------------------------------------------------------------
// Monte Carlo estimation.
// ---------------------------------------------------------------------------

/// Profit of one sampled run without trace bookkeeping; draws exactly the
/// same variates as [`execute`] for the same `(seed, trial)`.
fn run_profit(
    policy: &Policy,
    inst: &MskcInstance,
    sampler: &Sampler,
    cfg: &EvalConfig,
    rng: TrialRng,
) -> Result<Rational, Error> {
    let mut state = initial_state(policy, inst);
    let mut cumulative = Rational::zero();
    let mut profit = Rational::zero();
    let mut step_no: u64 = 0;
    loop {
        match decide(policy, inst, &state, &cumulative)? {
            Decision::Stop(_) => break,
            Decision::Run { item, kind } => {
                let choice = match kind {
                    RunKind::Fixed(j) => j,
                    RunKind::Mixed { choices, weights, pick } => match pick {
                        Some(j) => j,
                        None => choices[mix_pick(weights, rng.draw(step_no, 1))],
                    },
                };
                let it = &inst.items[item];
                let ch = &it.choices()[choice];
                profit -= &ch.cost;
                let atom = sampler.tables[item][choice].pick(rng.draw(step_no, 0));
                let size = &ch.dist.atoms()[atom].0;
                cumulative += size;
                let fits = cumulative <= inst.budget;
                if (fits || cfg.overflow_collecting) && choice != NULL_CHOICE {
                    profit += &it.value;
                }
                if !fits {
                    break;
                }
                state = advance(policy, &state, item, size);
                step_no += 1;
            }
        }
    }
    Ok(profit)
}

/// Seeded Monte Carlo estimate; bit-identical across runs and worker
/// counts: trial `i` draws from a counter RNG keyed by `(seed, i, step)`
/// and the accumulation is exact-rational in fixed chunk order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfitEstimate {
    pub mean: f64,
    pub half_width_95: f64,
    pub trials: u64,
    pub seed: u64,
}

pub fn estimate_profit_mc(
    policy: &Policy,
    inst: &MskcInstance,
    cfg: &EvalConfig,
    trials: u64,
    seed: u64,
) -> Result<ProfitEstimate, Error> {
    assert!(trials >= 1, "at least one trial");
    policy.validate(inst)?;
    let sampler = Sampler::build(inst);
    const CHUNK: u64 = 4096;
    let n_chunks = trials.div_ceil(CHUNK);
    let partials: Vec<Result<(Rational, Rational), Error>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = ((c + 1) * CHUNK).min(trials);
            let mut sum = Rational::zero();
            let mut sumsq = Rational::zero();
            for trial in lo..hi {
                let profit = run_profit(policy, inst, &sampler, cfg, TrialRng::new(seed, trial))?;
                sumsq += &profit * &profit;
                sum += profit;
            }
            Ok((sum, sumsq))
        })
        .collect();
    let mut sum = Rational::zero();
    let mut sumsq = Rational::zero();
    for part in partials {
        let (s, sq) = part?;
        sum += s;
        sumsq += sq;
    }
    let n = Rational::from_int(trials as i64);
    let mean = &sum / &n;
    let half_width_95 = if trials > 1 {
        let var = (&sumsq - &(&sum * &sum) / &n) / Rational::from_int(trials as i64 - 1);
        let var = var.to_f64().max(0.0);
        1.96 * (var / trials as f64).sqrt()
    } else {
        0.0
    };
    Ok(ProfitEstimate {
        mean: mean.to_f64(),
        half_width_95,
        trials,
        seed,
    })
}
