//! Policy constructions: the threshold/density algorithm over the
//! structured knapsack LP solution, its budget-scaled overflow variant, the
//! bounded-size stopping wrapper, the discretized ordered DP, and the
//! optimal stopping rule for a fixed order.

use std::collections::BTreeMap;

use num_traits::ToPrimitive;

use crate::contracts::compute_ior;
use crate::engine::{expected_profit_exact, EvalConfig};
use crate::error::Error;
use crate::lp_phi::solve_phi;
use crate::model::{MskcInstance, NULL_CHOICE};
use crate::policy::{
    NonAdaptivePolicy, OrderedDpPolicy, OrderedDpTable, Policy, Step, StopRule,
    StoppingTimePolicy,
};
use crate::rational::Rational;

/// Cap on reachable capacity states for the stopping-rule backward
/// induction.
pub const STOPPING_STATE_CAP: usize = 1_000_000;

struct Candidate {
    step: Step,
    w: Rational,
    mu: Rational,
}

impl Candidate {
    fn tie_key(&self) -> (usize, usize) {
        match &self.step {
            Step::Fixed { item, choice } => (*item, *choice),
            Step::Virtual { item, choices, .. } => (*item, choices[0]),
        }
    }
}

/// Candidate steps of the structured LP solution at budget `t`: integral
/// non-null assignments become fixed steps, the split item becomes one
/// virtual step carrying the LP mix.
fn lp_candidates(inst: &MskcInstance, t: &Rational) -> (Rational, Vec<Candidate>) {
    let sol = solve_phi(inst, t);
    let mut candidates = Vec::new();
    for (i, j, x) in sol.support() {
        match &sol.fractional_item {
            Some(f) if f.item == i => continue,
            _ => {}
        }
        debug_assert_eq!(x, Rational::one());
        if j == NULL_CHOICE {
            continue;
        }
        candidates.push(Candidate {
            step: Step::Fixed { item: i, choice: j },
            w: inst.items[i].weight(j, t),
            mu: inst.items[i].mu(j, t),
        });
    }
    if let Some(f) = &sol.fractional_item {
        let item = &inst.items[f.item];
        let w = item.weight(f.lo_choice, t) * &f.lo_weight
            + item.weight(f.hi_choice, t) * &f.hi_weight;
        let mu = item.mu(f.lo_choice, t) * &f.lo_weight + item.mu(f.hi_choice, t) * &f.hi_weight;
        candidates.push(Candidate {
            step: Step::Virtual {
                item: f.item,
                choices: [f.lo_choice, f.hi_choice],
                weights: [f.lo_weight.clone(), f.hi_weight.clone()],
                pick: None,
            },
            w,
            mu,
        });
    }
    (sol.value, candidates)
}

/// Shared skeleton: take the single best step when its profit proxy beats
/// the threshold strictly, otherwise emit all candidates by decreasing
/// density `w/mu` (zero-size candidates first, ties by item then choice).
fn assemble(mut candidates: Vec<Candidate>, threshold: &Rational) -> NonAdaptivePolicy {
    if candidates.is_empty() {
        return NonAdaptivePolicy::new(Vec::new()).expect("empty policy is valid");
    }
    let mut best = 0usize;
    for (ix, c) in candidates.iter().enumerate() {
        if c.w > candidates[best].w {
            best = ix;
        }
    }
    if &candidates[best].w > threshold {
        let step = candidates.swap_remove(best).step;
        return NonAdaptivePolicy::new(vec![step]).expect("single step is valid");
    }
    candidates.sort_by(|a, b| {
        (&b.w * &a.mu)
            .cmp(&(&a.w * &b.mu))
            .then(a.tie_key().cmp(&b.tie_key()))
    });
    NonAdaptivePolicy::new(candidates.into_iter().map(|c| c.step).collect())
        .expect("candidates reference distinct items")
}

/// Replaces every virtual step's random draw by the sub-choice whose fixed
/// version has the larger exact expected profit under `cfg` on `eval_inst`.
fn derandomize_in_place(
    policy: &mut NonAdaptivePolicy,
    eval_inst: &MskcInstance,
    cfg: &EvalConfig,
) -> Result<(), Error> {
    for ix in 0..policy.steps.len() {
        let Step::Virtual { choices, .. } = policy.steps[ix] else {
            continue;
        };
        let mut best: Option<(Rational, usize)> = None;
        for cand in choices {
            let mut variant = policy.clone();
            if let Step::Virtual { pick, .. } = &mut variant.steps[ix] {
                *pick = Some(cand);
            }
            let v = expected_profit_exact(&Policy::NonAdaptive(variant), eval_inst, cfg)?;
            if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                best = Some((v, cand));
            }
        }
        if let Step::Virtual { pick, .. } = &mut policy.steps[ix] {
            *pick = Some(best.expect("two sub-choices evaluated").1);
        }
    }
    Ok(())
}

/// The non-adaptive policy with guarantee `E[profit] >= Phi / (4(1+alpha))`
/// under the standard overflow-forfeiting semantics at the instance budget.
pub fn build_skc(inst: &MskcInstance, derandomize: bool) -> Result<NonAdaptivePolicy, Error> {
    let alpha = compute_ior(inst)?.alpha;
    let (phi, candidates) = lp_candidates(inst, &inst.budget);
    let threshold = phi / (Rational::from_int(4) * (Rational::one() + alpha));
    let mut policy = assemble(candidates, &threshold);
    if derandomize {
        derandomize_in_place(&mut policy, inst, &EvalConfig::default())?;
    }
    Ok(policy)
}

/// Budget-`t` variant with the alpha-free threshold `Phi(t)/4`, tuned for
/// the overflow-collecting semantics: `E[profit at budget t, collecting]
/// >= Phi(ct) / (8c)` for `c >= 1`.
pub fn build_skc_of(inst: &MskcInstance, t: &Rational) -> Result<NonAdaptivePolicy, Error> {
    if !t.is_positive() {
        return Err(Error::ParameterOutOfRange(format!("budget {t} must be > 0")));
    }
    let (phi, candidates) = lp_candidates(inst, t);
    let threshold = phi / Rational::from_int(4);
    let mut policy = assemble(candidates, &threshold);
    let eval_inst = inst.rebudget(t.clone())?;
    derandomize_in_place(&mut policy, &eval_inst, &EvalConfig::collecting())?;
    Ok(policy)
}

/// Bounded-size wrapper: the budget-`delta` overflow order plus the rule
/// that stops once the cumulative realized size exceeds `delta`.
pub fn build_skc_bound(inst: &MskcInstance, delta: &Rational) -> Result<StoppingTimePolicy, Error> {
    if !delta.is_positive() || delta > &inst.budget {
        return Err(Error::ParameterOutOfRange(format!(
            "delta {delta} must lie in (0, {}]",
            inst.budget
        )));
    }
    let order = build_skc_of(inst, delta)?;
    Ok(StoppingTimePolicy {
        order,
        stop_rule: StopRule::BudgetThreshold {
            theta: delta.clone(),
        },
    })
}

/// Discretized DP over the given item order with `delta = eps * budget / n`:
/// sizes round down to multiples of `delta`, both the fit probability and
/// the transition use the rounded measure, and the resulting policy is run
/// on the true instance with capacity `(1 + eps) * budget`.
pub fn build_ordered_adaptive(
    inst: &MskcInstance,
    eps: &Rational,
) -> Result<(OrderedDpTable, Policy), Error> {
    if !eps.is_positive() {
        return Err(Error::ParameterOutOfRange(format!("eps {eps} must be > 0")));
    }
    let n = inst.items.len().max(1);
    let delta = &(eps * &inst.budget) / &Rational::from_int(n as i64);
    let levels = (&inst.budget / &delta)
        .floor_int()
        .to_usize()
        .ok_or_else(|| Error::ParameterOutOfRange("eps too small".into()))?;

    // Rounded level/probability pairs per choice.
    let mut rounded: Vec<Vec<Vec<(usize, Rational)>>> = Vec::with_capacity(inst.items.len());
    for item in &inst.items {
        let mut per_choice = Vec::with_capacity(item.choices().len());
        for ch in item.choices() {
            let levels_probs = ch
                .dist
                .atoms()
                .iter()
                .map(|(s, p)| {
                    let lvl = (s / &delta).floor_int().to_usize().unwrap_or(usize::MAX);
                    (lvl, p.clone())
                })
                .collect();
            per_choice.push(levels_probs);
        }
        rounded.push(per_choice);
    }

    let n_items = inst.items.len();
    let mut values: BTreeMap<(usize, usize), Rational> = BTreeMap::new();
    let mut choice_of: BTreeMap<(usize, usize), Option<usize>> = BTreeMap::new();
    let mut transition_ops: u64 = 0;
    for k in 0..=levels {
        values.insert((n_items, k), Rational::zero());
    }
    for i in (0..n_items).rev() {
        let item = &inst.items[i];
        for k in 0..=levels {
            let mut best = values.get(&(i + 1, k)).expect("next row filled").clone();
            let mut best_choice: Option<usize> = None;
            for (j, choice_levels) in rounded[i].iter().enumerate().skip(1) {
                let mut q = -&item.choices()[j].cost;
                // Dense transition scan over capacity levels 0..=k.
                for t_lvl in 0..=k {
                    transition_ops += 1;
                    for (lvl, p) in choice_levels {
                        if *lvl == t_lvl {
                            let cont = values.get(&(i + 1, k - t_lvl)).expect("next row");
                            q += p * &(&item.value + cont);
                        }
                    }
                }
                if q > best {
                    best = q;
                    best_choice = Some(j);
                }
            }
            values.insert((i, k), best);
            choice_of.insert((i, k), best_choice);
        }
    }

    let table = OrderedDpTable {
        delta,
        epsilon: eps.clone(),
        levels,
        values,
        choice: choice_of,
        transition_ops,
    };
    let policy = Policy::OrderedDp(OrderedDpPolicy {
        table: table.clone(),
    });
    Ok((table, policy))
}

/// Builds the value table for stopping a fixed order optimally: continue at
/// a state exactly when some continuation has positive expected profit.
/// Returns the policy and its exact value from the initial state.
pub fn optimal_stopping_rule(
    inst: &MskcInstance,
    order: &NonAdaptivePolicy,
) -> Result<(StoppingTimePolicy, Rational), Error> {
    Policy::NonAdaptive(order.clone()).validate(inst)?;
    let steps = &order.steps;
    let len = steps.len();

    // Forward pass: alive cumulative sizes before each step.
    let mut alive: Vec<Vec<Rational>> = Vec::with_capacity(len + 1);
    alive.push(vec![Rational::zero()]);
    let mut total_states = 1usize;
    for step in steps {
        let mut next: Vec<Rational> = Vec::new();
        for cum in alive.last().expect("non-empty") {
            for (choice, _) in step_alternatives(step) {
                let ch = inst.items[step.item()].choice(choice).expect("validated");
                for (s, _) in ch.dist.atoms() {
                    let landed = cum + s;
                    if landed <= inst.budget {
                        next.push(landed);
                    }
                }
            }
        }
        next.sort();
        next.dedup();
        total_states += next.len();
        if total_states > STOPPING_STATE_CAP {
            return Err(Error::StateSpaceTooLarge {
                states: total_states,
                cap: STOPPING_STATE_CAP,
            });
        }
        alive.push(next);
    }

    // Backward induction: V(l, cum) = max(0, Q(l, cum)).
    let mut value_next: BTreeMap<Rational, Rational> = alive[len]
        .iter()
        .map(|c| (c.clone(), Rational::zero()))
        .collect();
    let mut entries: Vec<(usize, Rational, Rational)> = Vec::new();
    let mut root = Rational::zero();
    for l in (0..len).rev() {
        let step = &steps[l];
        let item = &inst.items[step.item()];
        let mut value_here: BTreeMap<Rational, Rational> = BTreeMap::new();
        for cum in &alive[l] {
            let mut q = Rational::zero();
            for (choice, weight) in step_alternatives(step) {
                let ch = item.choice(choice).expect("validated");
                let mut branch = -&ch.cost;
                for (s, p) in ch.dist.atoms() {
                    let landed = cum + s;
                    if landed <= inst.budget {
                        let cont = value_next.get(&landed).expect("alive state");
                        if choice != NULL_CHOICE {
                            branch += p * &(&item.value + cont);
                        } else {
                            branch += p * cont;
                        }
                    }
                }
                q += branch * &weight;
            }
            let v = if q.is_positive() {
                q.clone()
            } else {
                Rational::zero()
            };
            entries.push((l, &inst.budget - cum, q));
            if l == 0 {
                root = v.clone();
            }
            value_here.insert(cum.clone(), v);
        }
        value_next = value_here;
    }
    if len == 0 {
        root = Rational::zero();
    }

    Ok((
        StoppingTimePolicy {
            order: order.clone(),
            stop_rule: StopRule::ValueTable { entries },
        },
        root,
    ))
}

fn step_alternatives(step: &Step) -> Vec<(usize, Rational)> {
    match step {
        Step::Fixed { choice, .. } => vec![(*choice, Rational::one())],
        Step::Virtual {
            choices,
            weights,
            pick,
            ..
        } => match pick {
            Some(j) => vec![(*j, Rational::one())],
            None => vec![
                (choices[0], weights[0].clone()),
                (choices[1], weights[1].clone()),
            ],
        },
    }
}
