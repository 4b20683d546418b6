//! Exact optimal values for small instances: fully adaptive (with and
//! without overflow collection), fixed order, fixed order with optimal
//! stopping, and fully adaptive restricted to a given item order.
//!
//! Everything here is deliberately exhaustive: memoized recursion on exact
//! remaining-capacity states for the adaptive classes, depth-first
//! enumeration of ordered subsets for the fixed-order classes. Clarity and
//! verifiability over speed, guarded by hard caps.

use std::collections::BTreeMap;

use crate::engine::EvalConfig;
use crate::error::Error;
use crate::model::MskcInstance;
use crate::policies::optimal_stopping_rule;
use crate::policy::{AdaptiveAction, AdaptivePolicyTable, NonAdaptivePolicy, Policy};
use crate::rational::Rational;

#[derive(Debug, Clone)]
pub struct OracleConfig {
    /// Item cap for the memoized adaptive recursion.
    pub adapt_item_cap: usize,
    /// Item cap for the ordered-subset / permutation enumerations.
    pub enum_item_cap: usize,
    /// Cap on memoized states or search nodes.
    pub state_cap: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            adapt_item_cap: 8,
            enum_item_cap: 6,
            state_cap: 2_000_000,
        }
    }
}

/// An exact optimum together with a policy achieving it; re-evaluating the
/// policy with the exact engine reproduces `value`.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub value: Rational,
    pub policy: Policy,
    pub states_explored: usize,
}

// ---------------------------------------------------------------------------
// Fully adaptive optimum.
// ---------------------------------------------------------------------------

struct AdaptSearch<'a> {
    inst: &'a MskcInstance,
    collecting: bool,
    memo: BTreeMap<(u64, Rational), (Rational, AdaptiveAction)>,
    cap: usize,
}

impl AdaptSearch<'_> {
    fn value(&mut self, mask: u64, capacity: &Rational) -> Result<Rational, Error> {
        if let Some((v, _)) = self.memo.get(&(mask, capacity.clone())) {
            return Ok(v.clone());
        }
        if self.memo.len() >= self.cap {
            return Err(Error::StateSpaceTooLarge {
                states: self.memo.len(),
                cap: self.cap,
            });
        }
        let mut best = Rational::zero();
        let mut best_action = AdaptiveAction::Stop;
        for i in 0..self.inst.items.len() {
            if mask & (1 << i) == 0 {
                continue;
            }
            let item = &self.inst.items[i];
            for j in 1..item.choices().len() {
                let ch = &item.choices()[j];
                let mut q = -&ch.cost;
                for (s, p) in ch.dist.atoms() {
                    if s <= capacity {
                        let rest = self.value(mask & !(1 << i), &(capacity - s))?;
                        q += p * &(&item.value + &rest);
                    } else if self.collecting {
                        q += p * &item.value;
                    }
                }
                if q > best {
                    best = q;
                    best_action = AdaptiveAction::Run { item: i, choice: j };
                }
            }
        }
        self.memo
            .insert((mask, capacity.clone()), (best.clone(), best_action));
        Ok(best)
    }
}

fn full_mask(n: usize) -> u64 {
    if n == 0 {
        0
    } else {
        (1u64 << n) - 1
    }
}

fn mask_to_items(mask: u64, n: usize) -> Vec<usize> {
    (0..n).filter(|i| mask & (1 << i) != 0).collect()
}

/// Exact optimum over fully adaptive policies; with `overflow_collecting`
/// the overflowing job still pays out its value before the halt.
pub fn adapt_opt(
    inst: &MskcInstance,
    overflow_collecting: bool,
    cfg: &OracleConfig,
) -> Result<OracleResult, Error> {
    let n = inst.items.len();
    if n > cfg.adapt_item_cap.min(64) {
        return Err(Error::StateSpaceTooLarge {
            states: 1 << n.min(63),
            cap: cfg.state_cap,
        });
    }
    let mut search = AdaptSearch {
        inst,
        collecting: overflow_collecting,
        memo: BTreeMap::new(),
        cap: cfg.state_cap,
    };
    let value = search.value(full_mask(n), &inst.budget)?;
    let states_explored = search.memo.len();
    let entries = search
        .memo
        .into_iter()
        .map(|((mask, capacity), (_, action))| (mask_to_items(mask, n), capacity, action))
        .collect();
    Ok(OracleResult {
        value,
        policy: Policy::Adaptive(AdaptivePolicyTable { entries }),
        states_explored,
    })
}

/// `adapt_opt` under the overflow-collecting variant.
pub fn adapt_of_opt(inst: &MskcInstance, cfg: &OracleConfig) -> Result<OracleResult, Error> {
    adapt_opt(inst, true, cfg)
}

// ---------------------------------------------------------------------------
// Fixed-order optima by ordered-subset enumeration.
// ---------------------------------------------------------------------------

fn check_enum_cap(inst: &MskcInstance, cfg: &OracleConfig) -> Result<(), Error> {
    if inst.items.len() > cfg.enum_item_cap {
        return Err(Error::StateSpaceTooLarge {
            states: usize::MAX,
            cap: cfg.state_cap,
        });
    }
    Ok(())
}

struct NonAdaptSearch<'a> {
    inst: &'a MskcInstance,
    nodes: usize,
    cap: usize,
    best: (Rational, Vec<(usize, usize)>),
}

impl NonAdaptSearch<'_> {
    /// `alive` holds (cumulative size, probability) states still running.
    fn dfs(
        &mut self,
        used: u64,
        alive: &[(Rational, Rational)],
        profit: &Rational,
        seq: &mut Vec<(usize, usize)>,
    ) -> Result<(), Error> {
        self.nodes += 1;
        if self.nodes > self.cap {
            return Err(Error::StateSpaceTooLarge {
                states: self.nodes,
                cap: self.cap,
            });
        }
        if profit > &self.best.0 {
            self.best = (profit.clone(), seq.clone());
        }
        if alive.is_empty() {
            return Ok(());
        }
        for i in 0..self.inst.items.len() {
            if used & (1 << i) != 0 {
                continue;
            }
            let item = &self.inst.items[i];
            for j in 1..item.choices().len() {
                let ch = &item.choices()[j];
                let mut step_profit = profit.clone();
                let mut next: BTreeMap<Rational, Rational> = BTreeMap::new();
                for (cum, pr) in alive {
                    step_profit -= &ch.cost * pr;
                    for (s, p) in ch.dist.atoms() {
                        let landed = cum + s;
                        if landed <= self.inst.budget {
                            step_profit += &item.value * &(pr * p);
                            *next.entry(landed).or_insert_with(Rational::zero) += pr * p;
                        }
                    }
                }
                let next: Vec<(Rational, Rational)> = next.into_iter().collect();
                seq.push((i, j));
                self.dfs(used | (1 << i), &next, &step_profit, seq)?;
                seq.pop();
            }
        }
        Ok(())
    }
}

/// Exact optimum over fixed orders of item-choice pairs, found by scoring
/// every ordered subset.
pub fn nonadapt_opt(inst: &MskcInstance, cfg: &OracleConfig) -> Result<OracleResult, Error> {
    check_enum_cap(inst, cfg)?;
    let mut search = NonAdaptSearch {
        inst,
        nodes: 0,
        cap: cfg.state_cap,
        best: (Rational::zero(), Vec::new()),
    };
    let alive = vec![(Rational::zero(), Rational::one())];
    let mut seq = Vec::new();
    search.dfs(0, &alive, &Rational::zero(), &mut seq)?;
    let (value, pairs) = search.best;
    Ok(OracleResult {
        value,
        policy: Policy::NonAdaptive(NonAdaptivePolicy::from_pairs(&pairs)?),
        states_explored: search.nodes,
    })
}

/// Exact optimum over fixed orders with optimal stopping. Appending items
/// never hurts an optimally stopped order, so only full-length orders are
/// scored, one per permutation and per-item choice assignment.
pub fn stopadapt_opt(inst: &MskcInstance, cfg: &OracleConfig) -> Result<OracleResult, Error> {
    check_enum_cap(inst, cfg)?;
    let n = inst.items.len();
    let mut best: Option<(Rational, Vec<(usize, usize)>)> = None;
    let mut nodes = 0usize;
    let mut perm: Vec<(usize, usize)> = Vec::with_capacity(n);
    permute_orders(inst, 0, &mut perm, &mut |seq| {
        nodes += 1;
        if nodes > cfg.state_cap {
            return Err(Error::StateSpaceTooLarge {
                states: nodes,
                cap: cfg.state_cap,
            });
        }
        let order = NonAdaptivePolicy::from_pairs(seq)?;
        let (_, value) = optimal_stopping_rule(inst, &order)?;
        if best.as_ref().is_none_or(|(bv, _)| value > *bv) {
            best = Some((value, seq.to_vec()));
        }
        Ok(())
    })?;
    let (value, pairs) = best.unwrap_or((Rational::zero(), Vec::new()));
    let order = NonAdaptivePolicy::from_pairs(&pairs)?;
    let (policy, check) = optimal_stopping_rule(inst, &order)?;
    debug_assert_eq!(check, value);
    Ok(OracleResult {
        value,
        policy: Policy::StoppingTime(policy),
        states_explored: nodes,
    })
}

type OrderVisitor<'a> = dyn FnMut(&[(usize, usize)]) -> Result<(), Error> + 'a;

fn permute_orders(
    inst: &MskcInstance,
    used: u64,
    seq: &mut Vec<(usize, usize)>,
    visit: &mut OrderVisitor<'_>,
) -> Result<(), Error> {
    let n = inst.items.len();
    if seq.len() == n {
        return visit(seq);
    }
    for i in 0..n {
        if used & (1 << i) != 0 {
            continue;
        }
        for j in 1..inst.items[i].choices().len() {
            seq.push((i, j));
            permute_orders(inst, used | (1 << i), seq, visit)?;
            seq.pop();
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Ordered-adaptive optimum (items face the given order; each may be skipped
// or run at any effort level, with full knowledge of realizations so far).
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq)]
enum OrderedAction {
    Skip,
    Run(usize),
}

struct OrderedSearch<'a> {
    inst: &'a MskcInstance,
    memo: BTreeMap<(usize, Rational), (Rational, OrderedAction)>,
    cap: usize,
}

impl OrderedSearch<'_> {
    fn value(&mut self, i: usize, capacity: &Rational) -> Result<Rational, Error> {
        if i >= self.inst.items.len() {
            return Ok(Rational::zero());
        }
        if let Some((v, _)) = self.memo.get(&(i, capacity.clone())) {
            return Ok(v.clone());
        }
        if self.memo.len() >= self.cap {
            return Err(Error::StateSpaceTooLarge {
                states: self.memo.len(),
                cap: self.cap,
            });
        }
        let mut best = self.value(i + 1, capacity)?;
        let mut action = OrderedAction::Skip;
        let item = &self.inst.items[i];
        for j in 1..item.choices().len() {
            let ch = &item.choices()[j];
            let mut q = -&ch.cost;
            for (s, p) in ch.dist.atoms() {
                if s <= capacity {
                    let rest = self.value(i + 1, &(capacity - s))?;
                    q += p * &(&item.value + &rest);
                }
            }
            if q > best {
                best = q;
                action = OrderedAction::Run(j);
            }
        }
        self.memo
            .insert((i, capacity.clone()), (best.clone(), action));
        Ok(best)
    }

    /// Resolves the skip chain from position `i`: the item actually run (if
    /// any) once capacity is `capacity`.
    fn resolve(&self, i: usize, capacity: &Rational) -> Option<(usize, usize)> {
        let mut at = i;
        while at < self.inst.items.len() {
            match self.memo.get(&(at, capacity.clone())) {
                Some((_, OrderedAction::Run(j))) => return Some((at, *j)),
                Some((_, OrderedAction::Skip)) => at += 1,
                None => return None,
            }
        }
        None
    }
}

/// Exact optimum over adaptive policies constrained to the instance's item
/// order. The returned policy is an adaptive table over (remaining items,
/// capacity) states reachable under the optimal play.
pub fn ordered_adapt_opt(inst: &MskcInstance, cfg: &OracleConfig) -> Result<OracleResult, Error> {
    let n = inst.items.len();
    if n > cfg.adapt_item_cap.min(64) {
        return Err(Error::StateSpaceTooLarge {
            states: 1 << n.min(63),
            cap: cfg.state_cap,
        });
    }
    let mut search = OrderedSearch {
        inst,
        memo: BTreeMap::new(),
        cap: cfg.state_cap,
    };
    let value = search.value(0, &inst.budget)?;

    // Forward walk over states reachable under the optimal play, emitting
    // adaptive-table entries keyed by (remaining set, capacity).
    let mut entries: BTreeMap<(Vec<usize>, Rational), AdaptiveAction> = BTreeMap::new();
    let mut frontier: Vec<(usize, Vec<usize>, Rational)> = vec![(0, Vec::new(), inst.budget.clone())];
    while let Some((i, skipped, capacity)) = frontier.pop() {
        let mut remaining: Vec<usize> = skipped.clone();
        remaining.extend(i..n);
        remaining.sort_unstable();
        if remaining.is_empty() {
            continue;
        }
        let key = (remaining, capacity.clone());
        if entries.contains_key(&key) {
            continue;
        }
        match search.resolve(i, &capacity) {
            None => {
                entries.insert(key, AdaptiveAction::Stop);
            }
            Some((run_at, j)) => {
                entries.insert(
                    key,
                    AdaptiveAction::Run {
                        item: run_at,
                        choice: j,
                    },
                );
                let mut skipped_next = skipped.clone();
                skipped_next.extend(i..run_at);
                let ch = &inst.items[run_at].choices()[j];
                for (s, _) in ch.dist.atoms() {
                    if s <= &capacity {
                        frontier.push((run_at + 1, skipped_next.clone(), &capacity - s));
                    }
                }
            }
        }
    }
    let states_explored = search.memo.len();
    Ok(OracleResult {
        value,
        policy: Policy::Adaptive(AdaptivePolicyTable {
            entries: entries
                .into_iter()
                .map(|((set, cap), action)| (set, cap, action))
                .collect(),
        }),
        states_explored,
    })
}

/// Convenience wrappers with the default caps.
pub fn adapt_opt_default(inst: &MskcInstance) -> Result<OracleResult, Error> {
    adapt_opt(inst, false, &OracleConfig::default())
}

/// Shared evaluation config for re-checking oracle policies.
pub fn recheck_config(overflow_collecting: bool) -> EvalConfig {
    EvalConfig {
        overflow_collecting,
        ..EvalConfig::default()
    }
}
