//! Domain types for the multi-choice stochastic knapsack with costs and for
//! the contract-design problem it reduces from.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dist::FiniteDistribution;
use crate::error::Error;
use crate::rational::Rational;

/// Index of the reserved null choice every item carries: size 0 with
/// probability 1, cost 0, contributing no value when selected.
pub const NULL_CHOICE: usize = 0;

/// One selectable way of running an item: an up-front cost plus a size
/// distribution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MskcChoice {
    pub cost: Rational,
    pub dist: FiniteDistribution,
}

impl MskcChoice {
    pub fn new(cost: Rational, dist: FiniteDistribution) -> Result<Self, Error> {
        if cost.is_negative() {
            return Err(Error::BadInstance(format!("negative cost {cost}")));
        }
        Ok(MskcChoice { cost, dist })
    }

    fn null() -> Self {
        MskcChoice {
            cost: Rational::zero(),
            dist: FiniteDistribution::point(Rational::zero()),
        }
    }

    fn is_null_shape(&self) -> bool {
        self.cost.is_zero()
            && self.dist.atoms().len() == 1
            && self.dist.atoms()[0].0.is_zero()
    }
}

/// An item with a value and a non-empty choice list. Choice index 0 is
/// always the null choice; real choices start at index 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MskcItem {
    pub value: Rational,
    choices: Vec<MskcChoice>,
}

impl MskcItem {
    /// Builds an item from its real choices; the null choice is inserted at
    /// the reserved index.
    pub fn new(value: Rational, real_choices: Vec<MskcChoice>) -> Result<Self, Error> {
        if value.is_negative() {
            return Err(Error::BadInstance(format!("negative value {value}")));
        }
        if real_choices.is_empty() {
            return Err(Error::BadInstance("item without choices".into()));
        }
        let mut choices = Vec::with_capacity(real_choices.len() + 1);
        choices.push(MskcChoice::null());
        choices.extend(real_choices);
        Ok(MskcItem { value, choices })
    }

    /// All choices including the null choice at index [`NULL_CHOICE`].
    pub fn choices(&self) -> &[MskcChoice] {
        &self.choices
    }

    pub fn real_choices(&self) -> &[MskcChoice] {
        &self.choices[1..]
    }

    pub fn choice(&self, j: usize) -> Option<&MskcChoice> {
        self.choices.get(j)
    }

    /// Profit proxy `w_ij` at budget `t`: `v * Pr[s <= t] - cost`, zero for
    /// the null choice by definition.
    pub fn weight(&self, j: usize, t: &Rational) -> Rational {
        if j == NULL_CHOICE {
            return Rational::zero();
        }
        let c = &self.choices[j];
        &self.value * c.dist.cdf_at(t) - &c.cost
    }

    /// Expected truncated size `mu_ij` at budget `t`.
    pub fn mu(&self, j: usize, t: &Rational) -> Rational {
        if j == NULL_CHOICE {
            return Rational::zero();
        }
        self.choices[j].dist.truncated_mean(t)
    }
}

/// Multi-choice stochastic knapsack with costs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MskcInstance {
    pub items: Vec<MskcItem>,
    pub budget: Rational,
}

impl MskcInstance {
    /// Instance with the default unit budget.
    pub fn new(items: Vec<MskcItem>) -> Self {
        MskcInstance {
            items,
            budget: Rational::one(),
        }
    }

    pub fn with_budget(items: Vec<MskcItem>, budget: Rational) -> Result<Self, Error> {
        if !budget.is_positive() {
            return Err(Error::BadInstance(format!("budget {budget} must be > 0")));
        }
        Ok(MskcInstance { items, budget })
    }

    /// Same items under a different (positive) budget.
    pub fn rebudget(&self, budget: Rational) -> Result<Self, Error> {
        MskcInstance::with_budget(self.items.clone(), budget)
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    /// Largest size atom across all real choices; zero for an empty instance.
    pub fn max_support(&self) -> Rational {
        let mut best = Rational::zero();
        for item in &self.items {
            for c in item.real_choices() {
                if *c.dist.max_support() > best {
                    best = c.dist.max_support().clone();
                }
            }
        }
        best
    }

    pub fn validate_ref(&self, item: usize, choice: usize) -> Result<(), Error> {
        let it = self
            .items
            .get(item)
            .ok_or_else(|| Error::InvalidPolicy(format!("item {item} out of range")))?;
        if choice >= it.choices().len() {
            return Err(Error::InvalidPolicy(format!(
                "choice {choice} out of range for item {item}"
            )));
        }
        Ok(())
    }
}

/// One effort level of an agent: a private cost plus a completion-time
/// distribution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractAction {
    pub cost: Rational,
    pub dist: FiniteDistribution,
}

impl ContractAction {
    pub fn new(cost: Rational, dist: FiniteDistribution) -> Result<Self, Error> {
        if cost.is_negative() {
            return Err(Error::BadInstance(format!("negative cost {cost}")));
        }
        Ok(ContractAction { cost, dist })
    }
}

/// An agent: a completion value for the principal and a non-empty action
/// list stored sorted by non-decreasing cost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractAgent {
    pub value: Rational,
    actions: Vec<ContractAction>,
}

impl ContractAgent {
    pub fn new(value: Rational, mut actions: Vec<ContractAction>) -> Result<Self, Error> {
        if value.is_negative() {
            return Err(Error::BadInstance(format!("negative value {value}")));
        }
        if actions.is_empty() {
            return Err(Error::BadInstance("agent without actions".into()));
        }
        actions.sort_by(|a, b| a.cost.cmp(&b.cost));
        Ok(ContractAgent { value, actions })
    }

    pub fn actions(&self) -> &[ContractAction] {
        &self.actions
    }

    pub fn action(&self, j: usize) -> Option<&ContractAction> {
        self.actions.get(j)
    }

    /// Union of the supports of all action distributions, sorted ascending.
    pub fn support_union(&self) -> Vec<Rational> {
        let mut sizes: Vec<Rational> = self
            .actions
            .iter()
            .flat_map(|a| a.dist.support().cloned())
            .collect();
        sizes.sort();
        sizes.dedup();
        sizes
    }
}

/// Knapsack contracts instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractInstance {
    pub agents: Vec<ContractAgent>,
    pub budget: Rational,
}

impl ContractInstance {
    pub fn new(agents: Vec<ContractAgent>) -> Self {
        ContractInstance {
            agents,
            budget: Rational::one(),
        }
    }

    pub fn with_budget(agents: Vec<ContractAgent>, budget: Rational) -> Result<Self, Error> {
        if !budget.is_positive() {
            return Err(Error::BadInstance(format!("budget {budget} must be > 0")));
        }
        Ok(ContractInstance { agents, budget })
    }
}

/// A payment schedule on observed completion times. Payments are monotone
/// non-increasing in the completion time: finishing earlier never pays less.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<Rational, Rational>", into = "BTreeMap<Rational, Rational>")]
pub struct Contract {
    payments: BTreeMap<Rational, Rational>,
}

impl Contract {
    pub fn new(payments: BTreeMap<Rational, Rational>) -> Result<Self, Error> {
        let mut prev: Option<(&Rational, &Rational)> = None;
        for (s, t) in &payments {
            if t.is_negative() {
                return Err(Error::BadInstance(format!("negative transfer at size {s}")));
            }
            if let Some((_, pt)) = prev {
                if t > pt {
                    return Err(Error::BadInstance(format!(
                        "payments increase at size {s}: {t} > {pt}"
                    )));
                }
            }
            prev = Some((s, t));
        }
        Ok(Contract { payments })
    }

    pub fn payments(&self) -> &BTreeMap<Rational, Rational> {
        &self.payments
    }

    /// Transfer owed for an observed completion time. The domain covers the
    /// agent's whole support union, so lookups on valid runs always hit.
    pub fn payment_at(&self, size: &Rational) -> Result<&Rational, Error> {
        self.payments
            .get(size)
            .ok_or_else(|| Error::InvalidPolicy(format!("no payment entry for size {size}")))
    }

    /// Exact expected transfer under a completion-time distribution.
    pub fn expected_transfer(&self, dist: &FiniteDistribution) -> Result<Rational, Error> {
        let mut acc = Rational::zero();
        for (s, p) in dist.atoms() {
            acc += self.payment_at(s)? * p;
        }
        Ok(acc)
    }
}

impl TryFrom<BTreeMap<Rational, Rational>> for Contract {
    type Error = Error;
    fn try_from(m: BTreeMap<Rational, Rational>) -> Result<Self, Error> {
        Contract::new(m)
    }
}

impl From<Contract> for BTreeMap<Rational, Rational> {
    fn from(c: Contract) -> Self {
        c.payments
    }
}

/// True when the serialized form of a choice should be treated as the null
/// choice (used by instance IO to avoid double-inserting it).
pub fn choice_is_null_shape(c: &MskcChoice) -> bool {
    c.is_null_shape()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d).unwrap()
    }

    fn two_point(lo: (i64, i64), hi: (i64, i64), p_hi: (i64, i64)) -> FiniteDistribution {
        FiniteDistribution::two_point(r(lo.0, lo.1), r(hi.0, hi.1), r(p_hi.0, p_hi.1)).unwrap()
    }

    #[test]
    fn null_choice_is_reserved() {
        let item = MskcItem::new(
            r(2, 1),
            vec![MskcChoice::new(r(19, 10), two_point((0, 1), (1, 1), (1, 10))).unwrap()],
        )
        .unwrap();
        assert_eq!(item.choices().len(), 2);
        assert!(item.choices()[NULL_CHOICE].is_null_shape());
        assert_eq!(item.weight(NULL_CHOICE, &r(1, 1)), Rational::zero());
        assert_eq!(item.mu(NULL_CHOICE, &r(7, 3)), Rational::zero());
    }

    #[test]
    fn weight_examples() {
        // Value 2, cost 2 - 1/10, sizes {0 w.p. 9/10, 1 w.p. 1/10}.
        let item = MskcItem::new(
            r(2, 1),
            vec![MskcChoice::new(r(19, 10), two_point((0, 1), (1, 1), (1, 10))).unwrap()],
        )
        .unwrap();
        assert_eq!(item.weight(1, &r(1, 1)), r(1, 10));

        let losing = MskcItem::new(
            r(1, 1),
            vec![MskcChoice::new(r(2, 1), FiniteDistribution::point(r(1, 2))).unwrap()],
        )
        .unwrap();
        assert_eq!(losing.weight(1, &r(1, 1)), r(-1, 1));
    }

    #[test]
    fn agent_actions_sorted_by_cost() {
        let a = ContractAgent::new(
            r(1, 1),
            vec![
                ContractAction::new(r(3, 1), FiniteDistribution::point(r(1, 2))).unwrap(),
                ContractAction::new(r(1, 1), FiniteDistribution::point(r(1, 4))).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(a.actions()[0].cost, r(1, 1));
        assert_eq!(a.actions()[1].cost, r(3, 1));
    }

    #[test]
    fn contract_monotonicity_enforced() {
        let mut good = BTreeMap::new();
        good.insert(r(0, 1), r(2, 1));
        good.insert(r(1, 1), r(0, 1));
        assert!(Contract::new(good).is_ok());

        let mut bad = BTreeMap::new();
        bad.insert(r(0, 1), r(1, 1));
        bad.insert(r(1, 1), r(2, 1));
        assert!(Contract::new(bad).is_err());
    }
}
