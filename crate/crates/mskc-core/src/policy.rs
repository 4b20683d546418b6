//! Policy representations: fixed orders, fixed orders with stopping rules,
//! table-backed adaptive policies, the discretized ordered DP policy, and
//! the group-ladder adaptive script used by the layered gap instances.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::MskcInstance;
use crate::rational::Rational;

/// One step of a fixed-order policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Step {
    /// Run `item` with `choice`.
    Fixed { item: usize, choice: usize },
    /// Virtual step standing for a convex split between two choices of one
    /// item. Execution draws a choice with the mixing weights unless a
    /// derandomized pick is recorded.
    Virtual {
        item: usize,
        choices: [usize; 2],
        weights: [Rational; 2],
        pick: Option<usize>,
    },
}

impl Step {
    pub fn item(&self) -> usize {
        match self {
            Step::Fixed { item, .. } | Step::Virtual { item, .. } => *item,
        }
    }
}

/// Ordered list of item-choice steps; no item appears twice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NonAdaptivePolicy {
    pub steps: Vec<Step>,
}

impl NonAdaptivePolicy {
    pub fn new(steps: Vec<Step>) -> Result<Self, Error> {
        let mut seen = std::collections::BTreeSet::new();
        for s in &steps {
            if !seen.insert(s.item()) {
                return Err(Error::InvalidPolicy(format!(
                    "item {} appears twice",
                    s.item()
                )));
            }
            if let Step::Virtual { weights, pick, choices, .. } = s {
                let total = &weights[0] + &weights[1];
                if total != Rational::one()
                    || !weights[0].is_positive()
                    || !weights[1].is_positive()
                {
                    return Err(Error::InvalidPolicy(
                        "virtual mixing weights must be in (0,1) and sum to 1".into(),
                    ));
                }
                if let Some(p) = pick {
                    if !choices.contains(p) {
                        return Err(Error::InvalidPolicy(format!(
                            "derandomized pick {p} is not one of the mixed choices"
                        )));
                    }
                }
            }
        }
        Ok(NonAdaptivePolicy { steps })
    }

    pub fn from_pairs(pairs: &[(usize, usize)]) -> Result<Self, Error> {
        NonAdaptivePolicy::new(
            pairs
                .iter()
                .map(|&(item, choice)| Step::Fixed { item, choice })
                .collect(),
        )
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Stop rule consulted before each step of a fixed order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopRule {
    /// Stop once the cumulative realized size exceeds the threshold.
    BudgetThreshold { theta: Rational },
    /// Stop at step `l` with remaining capacity `B` when the recorded
    /// backward-induction continuation value is non-positive. Entries are
    /// `(step, remaining capacity, continuation value)`.
    ValueTable { entries: Vec<(usize, Rational, Rational)> },
}

impl StopRule {
    /// Whether to stop before executing step `step` given the cumulative
    /// size so far. Value-table rules key on remaining capacity.
    pub fn should_stop(
        &self,
        step: usize,
        cumulative: &Rational,
        budget: &Rational,
    ) -> Result<bool, Error> {
        match self {
            StopRule::BudgetThreshold { theta } => Ok(cumulative > theta),
            StopRule::ValueTable { entries } => {
                let remaining = budget - cumulative;
                let q = entries
                    .iter()
                    .find(|(l, b, _)| *l == step && *b == remaining)
                    .map(|(_, _, v)| v)
                    .ok_or_else(|| {
                        Error::InvalidPolicy(format!(
                            "no continuation entry for step {step} at capacity {remaining}"
                        ))
                    })?;
                Ok(!q.is_positive())
            }
        }
    }
}

/// Fixed order plus a stop rule over observable history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoppingTimePolicy {
    pub order: NonAdaptivePolicy,
    pub stop_rule: StopRule,
}

/// Decision of an adaptive policy at a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdaptiveAction {
    Stop,
    Run { item: usize, choice: usize },
}

/// Table-backed fully adaptive policy: a decision per (remaining item set,
/// remaining capacity) state. Sets are serialized as sorted item lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdaptivePolicyTable {
    pub entries: Vec<(Vec<usize>, Rational, AdaptiveAction)>,
}

impl AdaptivePolicyTable {
    pub fn lookup(&self, remaining: &[usize], capacity: &Rational) -> Result<AdaptiveAction, Error> {
        self.entries
            .iter()
            .find(|(set, cap, _)| set == remaining && cap == capacity)
            .map(|(_, _, a)| *a)
            .ok_or_else(|| {
                Error::InvalidPolicy(format!(
                    "no adaptive entry for remaining {remaining:?} at capacity {capacity}"
                ))
            })
    }
}

/// Discretized DP over a fixed item order: `values[(i, k)]` is the optimal
/// expected profit from items `i..n` with `k * delta` capacity left, using
/// sizes rounded down to multiples of `delta`. `choice[(i, k)]` records the
/// maximizing choice (`None` = skip item `i`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderedDpTable {
    pub delta: Rational,
    pub epsilon: Rational,
    pub levels: usize,
    pub values: BTreeMap<(usize, usize), Rational>,
    pub choice: BTreeMap<(usize, usize), Option<usize>>,
    /// Inner-loop iterations spent filling the table; scales as n^3 m / eps^2.
    pub transition_ops: u64,
}

impl OrderedDpTable {
    pub fn root_value(&self) -> &Rational {
        self.values
            .get(&(0, self.levels))
            .expect("root state present")
    }
}

/// Executes the ordered DP decisions on the true instance: transitions use
/// rounded-down realized sizes, value collection uses the true budget.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderedDpPolicy {
    pub table: OrderedDpTable,
}

/// Scripted adaptive policy over groups of interchangeable items: keep
/// running items of the current group while realized sizes are zero,
/// advance to the next group when a size realizes at the group's advance
/// size, stop on any other positive realization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupLadderPolicy {
    pub groups: Vec<Vec<usize>>,
    pub choice: usize,
    pub advance_sizes: Vec<Rational>,
}

/// Any executable policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    NonAdaptive(NonAdaptivePolicy),
    StoppingTime(StoppingTimePolicy),
    Adaptive(AdaptivePolicyTable),
    OrderedDp(OrderedDpPolicy),
    GroupLadder(GroupLadderPolicy),
}

impl Policy {
    /// Validates every item/choice reference against the instance.
    pub fn validate(&self, inst: &MskcInstance) -> Result<(), Error> {
        match self {
            Policy::NonAdaptive(p) => validate_order(p, inst),
            Policy::StoppingTime(p) => validate_order(&p.order, inst),
            Policy::Adaptive(t) => {
                for (set, _, action) in &t.entries {
                    for &i in set {
                        if i >= inst.items.len() {
                            return Err(Error::InvalidPolicy(format!("item {i} out of range")));
                        }
                    }
                    if let AdaptiveAction::Run { item, choice } = action {
                        inst.validate_ref(*item, *choice)?;
                    }
                }
                Ok(())
            }
            Policy::OrderedDp(p) => {
                for (&(i, _), c) in &p.table.choice {
                    if let Some(j) = c {
                        if i < inst.items.len() {
                            inst.validate_ref(i, *j)?;
                        }
                    }
                }
                Ok(())
            }
            Policy::GroupLadder(p) => {
                if p.groups.len() != p.advance_sizes.len() {
                    return Err(Error::InvalidPolicy(
                        "one advance size per group required".into(),
                    ));
                }
                for g in &p.groups {
                    for &i in g {
                        inst.validate_ref(i, p.choice)?;
                    }
                }
                Ok(())
            }
        }
    }
}

fn validate_order(p: &NonAdaptivePolicy, inst: &MskcInstance) -> Result<(), Error> {
    for s in &p.steps {
        match s {
            Step::Fixed { item, choice } => inst.validate_ref(*item, *choice)?,
            Step::Virtual { item, choices, .. } => {
                inst.validate_ref(*item, choices[0])?;
                inst.validate_ref(*item, choices[1])?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d).unwrap()
    }

    #[test]
    fn rejects_duplicate_items() {
        assert!(NonAdaptivePolicy::from_pairs(&[(0, 1), (0, 2)]).is_err());
        assert!(NonAdaptivePolicy::from_pairs(&[(0, 1), (1, 2)]).is_ok());
    }

    #[test]
    fn rejects_bad_mixing_weights() {
        let bad = NonAdaptivePolicy::new(vec![Step::Virtual {
            item: 0,
            choices: [1, 2],
            weights: [r(1, 2), r(1, 3)],
            pick: None,
        }]);
        assert!(bad.is_err());
    }

    #[test]
    fn budget_threshold_rule() {
        let rule = StopRule::BudgetThreshold { theta: r(1, 4) };
        let budget = r(1, 1);
        assert!(!rule.should_stop(0, &r(1, 4), &budget).unwrap());
        assert!(rule.should_stop(1, &r(3, 8), &budget).unwrap());
    }

    #[test]
    fn policy_serde_round_trip() {
        let policy = Policy::StoppingTime(StoppingTimePolicy {
            order: NonAdaptivePolicy::new(vec![
                Step::Fixed { item: 0, choice: 1 },
                Step::Virtual {
                    item: 1,
                    choices: [1, 2],
                    weights: [r(1, 3), r(2, 3)],
                    pick: Some(2),
                },
            ])
            .unwrap(),
            stop_rule: StopRule::ValueTable {
                entries: vec![(0, r(1, 1), r(1, 10)), (1, r(1, 2), r(-1, 5))],
            },
        });
        let js = serde_json::to_string(&policy).unwrap();
        let back: Policy = serde_json::from_str(&js).unwrap();
        assert_eq!(back, policy);
    }
}
