//! Incentive machinery: payment-minimizing monotone contracts, the
//! implementability test, the reduction from knapsack contracts to MSKC, and
//! the inverse-of-ROI parameter `alpha`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{
    Contract, ContractAgent, ContractInstance, MskcChoice, MskcInstance, MskcItem, NULL_CHOICE,
};
use crate::rational::Rational;
use crate::simplex::{solve_lp_exact, LpProblem, LpStatus, Relation};

/// An action made utility-maximizing by a concrete contract, together with
/// the exact minimum expected transfer that achieves it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncentivizedChoice {
    pub agent: usize,
    pub action: usize,
    pub contract: Contract,
    pub expected_transfer: Rational,
}

/// Solves the payment-minimizing contract LP for action `j` of `agent`.
///
/// Variables are one transfer per size in the union of the agent's action
/// supports. Constraints: incentive compatibility against every other
/// action, monotonicity (earlier completion never pays less), non-negative
/// transfers, and optionally individual rationality `E[t] - c_j >= 0`.
pub fn min_payment_contract(
    agent: &ContractAgent,
    agent_index: usize,
    j: usize,
    include_ir: bool,
) -> Result<IncentivizedChoice, Error> {
    let action = agent
        .action(j)
        .ok_or_else(|| Error::BadInstance(format!("agent {agent_index} has no action {j}")))?;
    let sizes = agent.support_union();
    let n = sizes.len();
    let idx_of = |s: &Rational| sizes.binary_search(s).expect("size in union support");

    // Objective: expected transfer under the incentivized action.
    let mut objective = vec![Rational::zero(); n];
    for (s, p) in action.dist.atoms() {
        objective[idx_of(s)] += p;
    }
    let mut lp = LpProblem::new(false, objective);

    // IC against every competing action j'.
    for (jp, other) in agent.actions().iter().enumerate() {
        if jp == j {
            continue;
        }
        let mut coeffs = vec![Rational::zero(); n];
        for (s, p) in action.dist.atoms() {
            coeffs[idx_of(s)] += p;
        }
        for (s, p) in other.dist.atoms() {
            coeffs[idx_of(s)] -= p;
        }
        lp.constrain(coeffs, Relation::Ge, &action.cost - &other.cost);
    }

    // Monotonicity between adjacent sizes: t(s_k) >= t(s_{k+1}).
    for k in 0..n.saturating_sub(1) {
        let mut coeffs = vec![Rational::zero(); n];
        coeffs[k] = Rational::one();
        coeffs[k + 1] = -Rational::one();
        lp.constrain(coeffs, Relation::Ge, Rational::zero());
    }

    if include_ir {
        let mut coeffs = vec![Rational::zero(); n];
        for (s, p) in action.dist.atoms() {
            coeffs[idx_of(s)] += p;
        }
        lp.constrain(coeffs, Relation::Ge, action.cost.clone());
    }

    let sol = solve_lp_exact(&lp)?;
    match sol.status {
        LpStatus::Optimal => {
            let payments: BTreeMap<Rational, Rational> = sizes
                .iter()
                .cloned()
                .zip(sol.assignment.iter().cloned())
                .collect();
            Ok(IncentivizedChoice {
                agent: agent_index,
                action: j,
                contract: Contract::new(payments)?,
                expected_transfer: sol.value,
            })
        }
        LpStatus::Infeasible => Err(Error::NotImplementable {
            agent: agent_index,
            action: j,
        }),
        // The objective is bounded below by zero, so this cannot happen.
        LpStatus::Unbounded => Err(Error::BadInstance("payment LP reported unbounded".into())),
    }
}

/// All implementable actions of an agent with their optimal contracts.
pub fn implementable_actions(
    agent: &ContractAgent,
    agent_index: usize,
    include_ir: bool,
) -> Vec<(usize, IncentivizedChoice)> {
    (0..agent.actions().len())
        .filter_map(|j| {
            min_payment_contract(agent, agent_index, j, include_ir)
                .ok()
                .map(|ic| (j, ic))
        })
        .collect()
}

/// Recovers (agent, action, contract) from a reduced (item, choice) pair.
#[derive(Debug, Clone)]
pub struct ReductionMap {
    /// `entries[item][k]` backs choice index `k + 1` of that item; the null
    /// choice has no contract behind it.
    pub entries: Vec<Vec<IncentivizedChoice>>,
}

impl ReductionMap {
    pub fn lookup(&self, item: usize, choice: usize) -> Option<&IncentivizedChoice> {
        if choice == NULL_CHOICE {
            return None;
        }
        self.entries.get(item)?.get(choice - 1)
    }
}

/// Reduces a knapsack-contracts instance to MSKC: one item per agent, one
/// choice per implementable action, priced at its minimum expected transfer.
/// Contracts are computed with the individual-rationality constraint on.
pub fn reduce_to_mskc(ci: &ContractInstance) -> Result<(MskcInstance, ReductionMap), Error> {
    let mut items = Vec::with_capacity(ci.agents.len());
    let mut entries = Vec::with_capacity(ci.agents.len());
    for (i, agent) in ci.agents.iter().enumerate() {
        let implementable = implementable_actions(agent, i, true);
        if implementable.is_empty() {
            return Err(Error::NoImplementableAction(i));
        }
        let mut choices = Vec::with_capacity(implementable.len());
        let mut row = Vec::with_capacity(implementable.len());
        for (j, ic) in implementable {
            let dist = agent.actions()[j].dist.clone();
            choices.push(MskcChoice::new(ic.expected_transfer.clone(), dist)?);
            row.push(ic);
        }
        items.push(MskcItem::new(agent.value.clone(), choices)?);
        entries.push(row);
    }
    let inst = MskcInstance::with_budget(items, ci.budget.clone())?;
    Ok((inst, ReductionMap { entries }))
}

/// The inverse-of-ROI parameter of an MSKC instance, together with the
/// choices that were excluded because their profit proxy is non-positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ior {
    pub alpha: Rational,
    /// Real choices with `w <= 0`, reported as `(item, choice)`.
    pub nonpositive: Vec<(usize, usize)>,
}

/// `alpha = max p / w` over non-null choices with positive profit proxy
/// `w = v * Pr[s <= budget] - p`. Errors when no such choice exists.
pub fn compute_ior(inst: &MskcInstance) -> Result<Ior, Error> {
    let mut alpha: Option<Rational> = None;
    let mut nonpositive = Vec::new();
    for (i, item) in inst.items.iter().enumerate() {
        for j in 1..item.choices().len() {
            let w = item.weight(j, &inst.budget);
            if w.is_positive() {
                let ratio = &item.choices()[j].cost / &w;
                alpha = Some(match alpha {
                    None => ratio,
                    Some(a) => a.max(ratio),
                });
            } else {
                nonpositive.push((i, j));
            }
        }
    }
    match alpha {
        Some(alpha) => Ok(Ior { alpha, nonpositive }),
        None => Err(Error::NoPositiveChoice),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::FiniteDistribution;
    use crate::model::ContractAction;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d).unwrap()
    }

    fn point(n: i64, d: i64) -> FiniteDistribution {
        FiniteDistribution::point(r(n, d))
    }

    fn coin(lo: Rational, hi: Rational, p_hi: Rational) -> FiniteDistribution {
        FiniteDistribution::two_point(lo, hi, p_hi).unwrap()
    }

    fn single_action_agent(
        value: Rational,
        cost: Rational,
        dist: FiniteDistribution,
    ) -> ContractAgent {
        ContractAgent::new(value, vec![ContractAction::new(cost, dist).unwrap()]).unwrap()
    }

    #[test]
    fn single_action_pays_cost_with_ir() {
        let agent = single_action_agent(r(3, 1), r(1, 1), point(1, 2));
        let ic = min_payment_contract(&agent, 0, 0, true).unwrap();
        assert_eq!(ic.expected_transfer, r(1, 1));
        assert_eq!(ic.contract.payment_at(&r(1, 2)).unwrap(), &r(1, 1));
    }

    #[test]
    fn single_action_pays_zero_without_ir() {
        let agent = single_action_agent(r(3, 1), r(1, 1), point(1, 2));
        let ic = min_payment_contract(&agent, 0, 0, false).unwrap();
        assert_eq!(ic.expected_transfer, r(0, 1));
    }

    #[test]
    fn two_action_agent_example() {
        // low: cost 0, size 1 det; high: cost 1, size {0 w.p. 1/2, 1 w.p. 1/2}.
        let agent = ContractAgent::new(
            r(1, 1),
            vec![
                ContractAction::new(r(0, 1), point(1, 1)).unwrap(),
                ContractAction::new(r(1, 1), coin(r(0, 1), r(1, 1), r(1, 2))).unwrap(),
            ],
        )
        .unwrap();
        let ic = min_payment_contract(&agent, 0, 1, true).unwrap();
        assert_eq!(ic.expected_transfer, r(1, 1));
        assert_eq!(ic.contract.payment_at(&r(0, 1)).unwrap(), &r(2, 1));
        assert_eq!(ic.contract.payment_at(&r(1, 1)).unwrap(), &r(0, 1));
    }

    #[test]
    fn identical_distributions_make_costlier_action_unimplementable() {
        let d = coin(r(1, 4), r(1, 2), r(1, 2));
        let agent = ContractAgent::new(
            r(1, 1),
            vec![
                ContractAction::new(r(0, 1), d.clone()).unwrap(),
                ContractAction::new(r(1, 1), d).unwrap(),
            ],
        )
        .unwrap();
        let found = implementable_actions(&agent, 0, true);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].0, 0);
        assert!(matches!(
            min_payment_contract(&agent, 0, 1, true),
            Err(Error::NotImplementable { agent: 0, action: 1 })
        ));
    }

    #[test]
    fn single_action_is_always_implementable() {
        let agent = single_action_agent(r(2, 1), r(19, 10), coin(r(0, 1), r(1, 1), r(1, 10)));
        let found = implementable_actions(&agent, 0, true);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].1.expected_transfer, r(19, 10));
    }

    #[test]
    fn reduction_maps_transfer_to_cost() {
        let agents = vec![
            single_action_agent(r(2, 1), r(19, 10), coin(r(0, 1), r(1, 1), r(1, 10))),
            ContractAgent::new(
                r(1, 1),
                vec![
                    ContractAction::new(r(0, 1), point(1, 1)).unwrap(),
                    ContractAction::new(r(1, 1), coin(r(0, 1), r(1, 1), r(1, 2))).unwrap(),
                ],
            )
            .unwrap(),
        ];
        let ci = ContractInstance::new(agents);
        let (inst, map) = reduce_to_mskc(&ci).unwrap();
        assert_eq!(inst.items.len(), 2);
        assert_eq!(inst.items[0].real_choices().len(), 1);
        assert_eq!(inst.items[0].real_choices()[0].cost, r(19, 10));
        // Two implementable actions for the second agent, costs 0 and 1.
        assert_eq!(inst.items[1].real_choices().len(), 2);
        assert_eq!(inst.items[1].real_choices()[0].cost, r(0, 1));
        assert_eq!(inst.items[1].real_choices()[1].cost, r(1, 1));
        let back = map.lookup(1, 2).unwrap();
        assert_eq!(back.agent, 1);
        assert_eq!(back.action, 1);
        assert!(map.lookup(0, NULL_CHOICE).is_none());
    }

    #[test]
    fn zero_cost_agent_reduces_to_zero_cost_choice() {
        let ci = ContractInstance::new(vec![single_action_agent(r(1, 1), r(0, 1), point(1, 2))]);
        let (inst, _) = reduce_to_mskc(&ci).unwrap();
        assert_eq!(inst.items[0].choices().len(), 2);
        assert_eq!(inst.items[0].real_choices()[0].cost, r(0, 1));
    }

    #[test]
    fn ior_examples() {
        // Single choice v = 2, p = 1, deterministic fit: alpha = 1.
        let inst = MskcInstance::new(vec![MskcItem::new(
            r(2, 1),
            vec![MskcChoice::new(r(1, 1), point(1, 2)).unwrap()],
        )
        .unwrap()]);
        assert_eq!(compute_ior(&inst).unwrap().alpha, r(1, 1));

        // All choices non-positive: error.
        let bad = MskcInstance::new(vec![MskcItem::new(
            r(1, 1),
            vec![MskcChoice::new(r(2, 1), point(1, 2)).unwrap()],
        )
        .unwrap()]);
        assert!(matches!(compute_ior(&bad), Err(Error::NoPositiveChoice)));
    }

    #[test]
    fn ior_invariant_under_duplication() {
        let item = MskcItem::new(
            r(2, 1),
            vec![MskcChoice::new(r(19, 10), coin(r(0, 1), r(1, 1), r(1, 10))).unwrap()],
        )
        .unwrap();
        let one = MskcInstance::new(vec![item.clone()]);
        let many = MskcInstance::new(vec![item.clone(), item.clone(), item]);
        assert_eq!(compute_ior(&one).unwrap().alpha, r(19, 1));
        assert_eq!(compute_ior(&many).unwrap().alpha, r(19, 1));
    }
}
