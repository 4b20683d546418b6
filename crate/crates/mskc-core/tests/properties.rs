//! Property suites: distribution identities, LP structure and cross-route
//! agreement, engine semantics against a brute-force outcome-tree oracle,
//! policy guarantees, and Monte Carlo determinism.

use std::collections::BTreeMap;

use proptest::prelude::*;

use mskc_core::contracts::{compute_ior, implementable_actions, min_payment_contract, reduce_to_mskc};
use mskc_core::engine::{
    estimate_profit_mc, evaluate_exact, expected_profit_exact, contract_expected_profit_exact,
    EvalConfig,
};
use mskc_core::instances::{gen_random, gen_random_contract, RandomProfile};
use mskc_core::lp_phi::{eliminate_dominated, solve_phi, solve_phi_via_simplex, structure_solution};
use mskc_core::model::{Contract, NULL_CHOICE};
use mskc_core::oracle::{adapt_of_opt, adapt_opt, nonadapt_opt, stopadapt_opt, OracleConfig};
use mskc_core::policies::{build_skc, build_skc_of};
use mskc_core::policy::{NonAdaptivePolicy, Policy, Step};
use mskc_core::simplex::LpStatus;
use mskc_core::{FiniteDistribution, MskcInstance, Rational};

fn r(n: i64, d: i64) -> Rational {
    Rational::new(n, d).unwrap()
}

fn random_mskc(seed: u64, n: usize, m: usize, support: usize, profile: &RandomProfile) -> MskcInstance {
    gen_random(n, m, support, seed, profile)
        .unwrap()
        .mskc()
        .unwrap()
        .clone()
}

// ---------------------------------------------------------------------------
// Distribution invariants (proptest).
// ---------------------------------------------------------------------------

prop_compose! {
    fn arb_distribution()(support in 1usize..5, seed in any::<u64>()) -> FiniteDistribution {
        // Reuse the generator grid for valid random distributions.
        let inst = random_mskc(seed, 1, 1, support, &RandomProfile::Generic);
        inst.items[0].real_choices()[0].dist.clone()
    }
}

proptest! {
    #[test]
    fn cdf_is_monotone_and_reaches_one(dist in arb_distribution(), num in 0i64..=80) {
        let lo = r(num, 64);
        let hi = &lo + &r(1, 64);
        prop_assert!(dist.cdf_at(&lo) <= dist.cdf_at(&hi));
        prop_assert_eq!(dist.cdf_at(dist.max_support()), Rational::one());
    }

    #[test]
    fn truncated_mean_bounds(dist in arb_distribution(), tn in 1i64..=96) {
        let t = r(tn, 64);
        let truncated = dist.truncated_mean(&t);
        prop_assert!(truncated <= dist.mean());
        prop_assert!(truncated <= t);
        if dist.max_support() <= &t {
            prop_assert_eq!(truncated, dist.mean());
        }
    }

    #[test]
    fn rational_string_round_trip(n in -10_000i64..10_000, d in 1i64..10_000) {
        let v = r(n, d);
        let back: Rational = v.to_string().parse().unwrap();
        prop_assert_eq!(back, v);
    }
}

// ---------------------------------------------------------------------------
// LP structure invariants and dual-route agreement.
// ---------------------------------------------------------------------------

#[test]
fn phi_matches_simplex_on_random_instances() {
    for seed in 0..40u64 {
        let n = 1 + (seed % 6) as usize;
        let m = 1 + (seed % 4) as usize;
        let inst = random_mskc(seed, n, m, 1 + (seed % 3) as usize, &RandomProfile::Generic);
        for t in [r(1, 4), r(1, 1), r(2, 1)] {
            let fast = solve_phi(&inst, &t);
            fast.validate(&inst, &t).unwrap();
            let reference = solve_phi_via_simplex(&inst, &t).unwrap();
            assert_eq!(reference.status, LpStatus::Optimal);
            assert_eq!(fast.value, reference.value, "seed {seed} t {t}");
        }
    }
}

#[test]
fn dominance_elimination_preserves_value() {
    // Keeping only undominated choices (plus the forced null) cannot change
    // the optimum.
    for seed in 0..20u64 {
        let inst = random_mskc(seed, 3, 3, 2, &RandomProfile::Generic);
        let t = r(1, 1);
        let full = solve_phi(&inst, &t).value;
        for i in 0..inst.items.len() {
            let frontier = eliminate_dominated(&inst, i, &t);
            assert!(!frontier.points.is_empty());
            assert!(frontier.points[0].mu.is_zero());
            // Slopes strictly increase along the frontier.
            for w in frontier.points.windows(3) {
                let lhs = (&w[2].mu - &w[1].mu) * (&w[1].w - &w[0].w);
                let rhs = (&w[1].mu - &w[0].mu) * (&w[2].w - &w[1].w);
                assert!(lhs > rhs);
            }
        }
        let reference = solve_phi_via_simplex(&inst, &t).unwrap().value;
        assert_eq!(full, reference);
    }
}

#[test]
fn phi_monotone_in_budget_and_scaling_bound() {
    for seed in 0..20u64 {
        let inst = random_mskc(seed, 4, 2, 3, &RandomProfile::Generic);
        let grid = [r(1, 4), r(1, 2), r(1, 1), r(3, 2), r(2, 1)];
        let values: Vec<Rational> = grid.iter().map(|t| solve_phi(&inst, t).value).collect();
        for pair in values.windows(2) {
            assert!(pair[0] <= pair[1], "phi must grow with the budget");
        }
        // Scaling bound at budgets at or beyond the maximum support, where
        // the weights no longer move with the budget.
        let base = inst.max_support().max(r(1, 1));
        let phi_t = solve_phi(&inst, &base).value;
        for c in [2i64, 3] {
            let scaled = solve_phi(&inst, &(Rational::from_int(c) * &base)).value;
            assert!(scaled <= Rational::from_int(c) * &phi_t);
        }
    }
}

#[test]
fn structure_solution_never_loses_value() {
    for seed in 0..20u64 {
        let inst = random_mskc(seed, 3, 3, 2, &RandomProfile::Generic);
        let t = r(1, 1);
        // A deliberately unstructured feasible point: uniform over the NULL
        // choice and every real choice scaled to fit.
        let mut x: BTreeMap<(usize, usize), Rational> = BTreeMap::new();
        for (i, item) in inst.items.iter().enumerate() {
            let k = item.choices().len();
            let budget_share = r(1, (k as i64) * (inst.items.len() as i64));
            let mut spent = Rational::zero();
            for j in 1..k {
                let mu = item.mu(j, &t);
                let share = if mu.is_zero() {
                    r(1, k as i64)
                } else {
                    r(1, k as i64).min(&budget_share / &mu)
                };
                x.insert((i, j), share.clone());
                spent += share;
            }
            x.insert((i, NULL_CHOICE), Rational::one() - &spent);
        }
        let before: Rational = x
            .iter()
            .map(|(&(i, j), v)| inst.items[i].weight(j, &t) * v)
            .sum();
        let out = structure_solution(&inst, &t, &x).unwrap();
        assert!(out.value >= before, "seed {seed}");
        out.validate(&inst, &t).unwrap();
    }
}

// ---------------------------------------------------------------------------
// Engine semantics against a brute-force outcome-tree oracle.
// ---------------------------------------------------------------------------

/// Enumerates every realization path of a fixed order (with an optional
/// stop threshold) and sums probability-weighted profits directly.
fn outcome_tree_profit(
    inst: &MskcInstance,
    steps: &[(usize, usize)],
    threshold: Option<&Rational>,
    collecting: bool,
) -> Rational {
    fn recurse(
        inst: &MskcInstance,
        steps: &[(usize, usize)],
        threshold: Option<&Rational>,
        collecting: bool,
        ix: usize,
        cum: &Rational,
        pr: &Rational,
    ) -> Rational {
        if ix >= steps.len() {
            return Rational::zero();
        }
        if let Some(theta) = threshold {
            if cum > theta {
                return Rational::zero();
            }
        }
        let (item, choice) = steps[ix];
        let it = &inst.items[item];
        let ch = &it.choices()[choice];
        let mut acc = -(&ch.cost * pr);
        for (s, p) in ch.dist.atoms() {
            let mass = pr * p;
            let landed = cum + s;
            if landed <= inst.budget {
                if choice != NULL_CHOICE {
                    acc += &it.value * &mass;
                }
                acc += recurse(inst, steps, threshold, collecting, ix + 1, &landed, &mass);
            } else if collecting && choice != NULL_CHOICE {
                acc += &it.value * &mass;
            }
        }
        acc
    }
    recurse(
        inst,
        steps,
        threshold,
        collecting,
        0,
        &Rational::zero(),
        &Rational::one(),
    )
}

#[test]
fn exact_evaluator_matches_outcome_tree() {
    use mskc_core::policy::{StopRule, StoppingTimePolicy};
    for seed in 0..30u64 {
        let n = 1 + (seed % 4) as usize;
        let inst = random_mskc(seed, n, 2, 1 + (seed % 3) as usize, &RandomProfile::Generic);
        let steps: Vec<(usize, usize)> = (0..n).map(|i| (i, 1 + (seed as usize + i) % 2)).collect();
        let policy = Policy::NonAdaptive(NonAdaptivePolicy::from_pairs(&steps).unwrap());
        for collecting in [false, true] {
            let cfg = EvalConfig {
                overflow_collecting: collecting,
                ..EvalConfig::default()
            };
            let engine = expected_profit_exact(&policy, &inst, &cfg).unwrap();
            let brute = outcome_tree_profit(&inst, &steps, None, collecting);
            assert_eq!(engine, brute, "seed {seed} collecting {collecting}");
        }
        // Same with a budget-threshold stop rule.
        let theta = r((seed % 3) as i64, 4);
        let stopping = Policy::StoppingTime(StoppingTimePolicy {
            order: NonAdaptivePolicy::from_pairs(&steps).unwrap(),
            stop_rule: StopRule::BudgetThreshold { theta: theta.clone() },
        });
        let engine = expected_profit_exact(&stopping, &inst, &EvalConfig::default()).unwrap();
        let brute = outcome_tree_profit(&inst, &steps, Some(&theta), false);
        assert_eq!(engine, brute, "seed {seed} threshold");
    }
}

#[test]
fn fixed_sets_rarely_overflow_when_light() {
    // Pr[total size < t] >= 1 - mu(S)/t for fixed choice sets, checked
    // exactly over 100 seeded draws.
    let t = r(1, 1);
    let mut checked = 0u32;
    let mut seed = 0u64;
    while checked < 100 {
        seed += 1;
        let n = 1 + (seed % 5) as usize;
        let inst = random_mskc(seed, n, 2, 1 + (seed % 3) as usize, &RandomProfile::Generic);
        let set: Vec<(usize, usize)> = (0..n).map(|i| (i, 1 + (seed as usize + i) % 2)).collect();
        let mass: Rational = set.iter().map(|&(i, j)| inst.items[i].mu(j, &t)).sum();
        if mass > t {
            continue;
        }
        // Exact distribution of the total size by convolution.
        let mut sums: BTreeMap<Rational, Rational> = BTreeMap::new();
        sums.insert(Rational::zero(), Rational::one());
        for &(i, j) in &set {
            let mut next: BTreeMap<Rational, Rational> = BTreeMap::new();
            for (cum, pr) in &sums {
                for (s, p) in inst.items[i].choices()[j].dist.atoms() {
                    *next.entry(cum + s).or_insert_with(Rational::zero) += pr * p;
                }
            }
            sums = next;
        }
        let under: Rational = sums
            .iter()
            .filter(|(total, _)| *total < &t)
            .map(|(_, pr)| pr)
            .sum();
        assert!(
            under >= Rational::one() - &mass / &t,
            "seed {seed}: Pr {under} vs mass {mass}"
        );
        checked += 1;
    }
}

#[test]
fn adaptive_policies_attempt_bounded_mass() {
    // E[mu(attempted set)] <= 2 * budget for oracle-optimal adaptive
    // policies, 100 seeded draws.
    for seed in 0..100u64 {
        let n = 1 + (seed % 4) as usize;
        let inst = random_mskc(seed, n, 2, 1 + (seed % 2) as usize, &RandomProfile::Generic);
        let res = adapt_opt(&inst, false, &OracleConfig::default()).unwrap();
        let eval = evaluate_exact(&res.policy, &inst, &EvalConfig::default()).unwrap();
        assert_eq!(eval.profit, res.value);
        assert!(
            eval.attempted_mass <= Rational::from_int(2) * &inst.budget,
            "seed {seed}: mass {}",
            eval.attempted_mass
        );
    }
}

// ---------------------------------------------------------------------------
// Policy guarantees beyond the acceptance presets.
// ---------------------------------------------------------------------------

#[test]
fn skc_of_meets_scaled_lp_bounds() {
    // E[profit under collecting semantics at budget t] >= Phi(ct) / (8c).
    // The c = 1 form holds at every budget; the scaled form needs t at or
    // beyond the maximum support, where the per-budget weights stop moving
    // (below that, larger budgets can grow the LP by more than the scale
    // factor).
    for seed in 0..25u64 {
        let n = 2 + (seed % 4) as usize;
        let inst = random_mskc(seed, n, 2, 1 + (seed % 3) as usize, &RandomProfile::Generic);
        let max_support = inst.max_support();
        for t in [r(1, 1), r(1, 2)] {
            let policy = build_skc_of(&inst, &t).unwrap();
            let scoped = inst.rebudget(t.clone()).unwrap();
            let value = expected_profit_exact(
                &Policy::NonAdaptive(policy),
                &scoped,
                &EvalConfig::collecting(),
            )
            .unwrap();
            let phi_t = solve_phi(&inst, &t).value;
            assert!(
                value >= phi_t / Rational::from_int(8),
                "seed {seed} t {t}: {value}"
            );
            if t >= max_support {
                let phi_2t = solve_phi(&inst, &(Rational::from_int(2) * &t)).value;
                assert!(
                    value >= phi_2t / Rational::from_int(16),
                    "seed {seed} t {t} c 2: {value}"
                );
            }
        }
    }
}

#[test]
fn overflow_optimum_dominates_standard() {
    for seed in 0..30u64 {
        let n = 1 + (seed % 4) as usize;
        let inst = random_mskc(seed, n, 2, 1 + (seed % 3) as usize, &RandomProfile::Generic);
        let plain = adapt_opt(&inst, false, &OracleConfig::default()).unwrap();
        let of = adapt_of_opt(&inst, &OracleConfig::default()).unwrap();
        assert!(of.value >= plain.value, "seed {seed}");
    }
}

#[test]
fn policy_class_nesting_holds() {
    for seed in 0..25u64 {
        let n = 1 + (seed % 4) as usize;
        let inst = random_mskc(seed, n, 2, 1 + (seed % 2) as usize, &RandomProfile::Generic);
        let adapt = adapt_opt(&inst, false, &OracleConfig::default()).unwrap();
        let stop = stopadapt_opt(&inst, &OracleConfig::default()).unwrap();
        let non = nonadapt_opt(&inst, &OracleConfig::default()).unwrap();
        assert!(adapt.value >= stop.value, "seed {seed}");
        assert!(stop.value >= non.value, "seed {seed}");
        assert!(!non.value.is_negative(), "seed {seed}");
        // Returned policies re-evaluate to the reported optima.
        for res in [&adapt, &stop, &non] {
            let replay = expected_profit_exact(&res.policy, &inst, &EvalConfig::default()).unwrap();
            assert_eq!(replay, res.value, "seed {seed}");
        }
    }
}

#[test]
fn density_branch_emits_sorted_densities() {
    // Abundant light items force the density branch; the emitted order must
    // satisfy the exact cross-multiplied density comparison pairwise.
    for seed in 0..10u64 {
        let inst = random_mskc(seed, 6, 2, 2, &RandomProfile::PositiveW);
        let policy = build_skc(&inst, true).unwrap();
        let budget = inst.budget.clone();
        let params: Vec<(Rational, Rational)> = policy
            .steps
            .iter()
            .map(|s| match s {
                Step::Fixed { item, choice } => (
                    inst.items[*item].weight(*choice, &budget),
                    inst.items[*item].mu(*choice, &budget),
                ),
                Step::Virtual { item, choices, weights, .. } => {
                    let w = inst.items[*item].weight(choices[0], &budget) * &weights[0]
                        + inst.items[*item].weight(choices[1], &budget) * &weights[1];
                    let mu = inst.items[*item].mu(choices[0], &budget) * &weights[0]
                        + inst.items[*item].mu(choices[1], &budget) * &weights[1];
                    (w, mu)
                }
            })
            .collect();
        for k in 0..params.len() {
            for j in k + 1..params.len() {
                let (wk, mk) = &params[k];
                let (wj, mj) = &params[j];
                assert!(wk * mj >= wj * mk, "seed {seed}: order violates density");
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Contract-side properties.
// ---------------------------------------------------------------------------

#[test]
fn sampled_feasible_contracts_never_beat_the_optimum() {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut accepted = 0u32;
    for seed in 0..40u64 {
        let ci = gen_random_contract(1, 2, 2, seed).unwrap().contract().unwrap().clone();
        let agent = &ci.agents[0];
        for (j, optimal) in implementable_actions(agent, 0, true) {
            let action = &agent.actions()[j];
            let sizes = agent.support_union();
            // Random monotone non-increasing payment vectors on a coarse grid.
            for _ in 0..200 {
                let mut levels: Vec<Rational> =
                    (0..sizes.len()).map(|_| r(rng.gen_range(0..=12), 2)).collect();
                levels.sort();
                levels.reverse();
                let payments: BTreeMap<Rational, Rational> =
                    sizes.iter().cloned().zip(levels).collect();
                let contract = Contract::new(payments).unwrap();
                // Feasibility: the incentivized action maximizes utility,
                // and individual rationality holds.
                let own = contract.expected_transfer(&action.dist).unwrap();
                if &own - &action.cost < Rational::zero() {
                    continue;
                }
                let feasible = agent.actions().iter().all(|other| {
                    let theirs = contract.expected_transfer(&other.dist).unwrap();
                    &own - &action.cost >= &theirs - &other.cost
                });
                if !feasible {
                    continue;
                }
                accepted += 1;
                assert!(
                    own >= optimal.expected_transfer,
                    "sampled feasible contract undercuts the LP optimum"
                );
            }
        }
    }
    assert!(accepted > 50, "sampler must accept a healthy share");
}

#[test]
fn single_action_agents_pay_cost_exactly() {
    for seed in 0..20u64 {
        let ci = gen_random_contract(2, 1, 2, seed).unwrap().contract().unwrap().clone();
        for (ix, agent) in ci.agents.iter().enumerate() {
            let ic = min_payment_contract(agent, ix, 0, true).unwrap();
            assert_eq!(ic.expected_transfer, agent.actions()[0].cost);
        }
    }
}

#[test]
fn reduction_preserves_exact_profit() {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    for seed in 0..25u64 {
        let n = 1 + (seed % 4) as usize;
        let m = 1 + (seed % 3) as usize;
        let ci = gen_random_contract(n, m, 2, seed).unwrap().contract().unwrap().clone();
        let (inst, map) = reduce_to_mskc(&ci).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..inst.items.len()).collect();
        order.shuffle(&mut rng);
        let mut pairs = Vec::new();
        let mut contract_steps = Vec::new();
        for &item in &order {
            let n_real = inst.items[item].real_choices().len();
            let choice = 1 + rng.gen_range(0..n_real);
            pairs.push((item, choice));
            let ic = map.lookup(item, choice).unwrap();
            contract_steps.push((ic.agent, ic.action, ic.contract.clone()));
        }
        let mskc_side = expected_profit_exact(
            &Policy::NonAdaptive(NonAdaptivePolicy::from_pairs(&pairs).unwrap()),
            &inst,
            &EvalConfig::default(),
        )
        .unwrap();
        let contract_side = contract_expected_profit_exact(&ci, &contract_steps).unwrap();
        assert_eq!(contract_side, mskc_side, "seed {seed}");
    }
}

#[test]
fn ior_ignores_null_choices() {
    for seed in 0..10u64 {
        let inst = random_mskc(seed, 3, 2, 2, &RandomProfile::PositiveW);
        let base = compute_ior(&inst).unwrap().alpha;
        // Duplicating items leaves alpha unchanged.
        let mut doubled_items = inst.items.clone();
        doubled_items.extend(inst.items.iter().cloned());
        let doubled = MskcInstance::new(doubled_items);
        assert_eq!(compute_ior(&doubled).unwrap().alpha, base);
    }
}

// ---------------------------------------------------------------------------
// Monte Carlo determinism.
// ---------------------------------------------------------------------------

#[test]
fn monte_carlo_identical_across_worker_counts() {
    let inst = random_mskc(3, 5, 2, 3, &RandomProfile::Generic);
    let steps: Vec<(usize, usize)> = (0..5).map(|i| (i, 1)).collect();
    let policy = Policy::NonAdaptive(NonAdaptivePolicy::from_pairs(&steps).unwrap());
    let mut results = Vec::new();
    for workers in [1usize, 2, 4] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .unwrap();
        let est = pool.install(|| {
            estimate_profit_mc(&policy, &inst, &EvalConfig::default(), 50_000, 17).unwrap()
        });
        results.push((est.mean.to_bits(), est.half_width_95.to_bits()));
    }
    assert_eq!(results[0], results[1]);
    assert_eq!(results[1], results[2]);
}
