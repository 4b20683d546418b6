//! The knapsack LP `Phi(t)` over profit proxies `w_ij` and truncated mean
//! sizes `mu_ij`, solved exactly through per-item dominance elimination and
//! a greedy sweep over efficient-frontier segments.
//!
//! For a budget `t`, each item contributes points `(w_ij, mu_ij)` per
//! choice. Single-dominated points (another choice is at least as
//! profitable and no larger) and double-dominated points (on or above the
//! segment between two neighbours) never need LP mass, so the surviving
//! boundary is convex with strictly increasing segment slopes. The LP then
//! decomposes into a separable concave maximization solved greedily by
//! decreasing segment density `dw/dmu`.

use std::collections::BTreeMap;

use crate::error::Error;
use crate::model::{MskcInstance, MskcItem};
use crate::rational::Rational;
use crate::simplex::{solve_lp_exact, LpProblem, LpSolution, Relation};

/// One undominated choice on an item's efficient frontier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrontierPoint {
    pub choice: usize,
    pub w: Rational,
    pub mu: Rational,
}

/// Undominated choices of one item, ordered by strictly increasing `w` and
/// `mu`, with strictly increasing slopes `dmu/dw` between neighbours. The
/// first point always has `mu = 0` (the null choice or whatever dominates
/// it).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParetoFrontier {
    pub item: usize,
    pub points: Vec<FrontierPoint>,
}

impl ParetoFrontier {
    /// Index of the frontier point for `choice`, if it survived.
    pub fn position_of(&self, choice: usize) -> Option<usize> {
        self.points.iter().position(|p| p.choice == choice)
    }
}

/// Removes single- and double-dominated choices of `item` at budget `t`.
pub fn eliminate_dominated(inst: &MskcInstance, item_index: usize, t: &Rational) -> ParetoFrontier {
    let item = &inst.items[item_index];
    let pts: Vec<(usize, Rational, Rational)> = (0..item.choices().len())
        .map(|j| (j, item.weight(j, t), item.mu(j, t)))
        .collect();

    // Single dominance: j' is at least as profitable and at most as large.
    // On exact ties the lower index survives.
    let mut alive: Vec<&(usize, Rational, Rational)> = Vec::new();
    'candidate: for p in &pts {
        for q in &pts {
            if q.0 == p.0 {
                continue;
            }
            let dominates = (q.1 >= p.1 && q.2 < p.2)
                || (q.1 > p.1 && q.2 <= p.2)
                || (q.1 == p.1 && q.2 == p.2 && q.0 < p.0);
            if dominates {
                continue 'candidate;
            }
        }
        alive.push(p);
    }
    // Survivors now have pairwise distinct w with mu strictly increasing in w.
    alive.sort_by(|a, b| a.1.cmp(&b.1));

    // Double dominance: drop points on or above the segment between their
    // neighbours, leaving a strictly convex boundary.
    let mut hull: Vec<&(usize, Rational, Rational)> = Vec::new();
    for p in alive {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // slope(b, p) <= slope(a, b) means b is double-dominated by a, p.
            let lhs = (&p.2 - &b.2) * (&b.1 - &a.1);
            let rhs = (&b.2 - &a.2) * (&p.1 - &b.1);
            if lhs <= rhs {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }

    let points = hull
        .into_iter()
        .map(|(j, w, mu)| FrontierPoint {
            choice: *j,
            w: w.clone(),
            mu: mu.clone(),
        })
        .collect::<Vec<_>>();
    debug_assert!(points[0].mu.is_zero(), "frontier base sits at mu = 0");
    ParetoFrontier {
        item: item_index,
        points,
    }
}

/// The item split across two choices in a structured optimum, if any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FractionalItem {
    pub item: usize,
    pub lo_choice: usize,
    pub hi_choice: usize,
    pub lo_weight: Rational,
    pub hi_weight: Rational,
}

/// Exact optimum of the knapsack LP with the structured-solution shape: at
/// most one item holds two positive choices, every other item is integral.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhiSolution {
    pub value: Rational,
    pub assignment: BTreeMap<(usize, usize), Rational>,
    pub fractional_item: Option<FractionalItem>,
}

impl PhiSolution {
    /// Item-choice pairs with positive mass, in item order.
    pub fn support(&self) -> Vec<(usize, usize, Rational)> {
        self.assignment
            .iter()
            .filter(|(_, x)| x.is_positive())
            .map(|(&(i, j), x)| (i, j, x.clone()))
            .collect()
    }

    /// Checks the structural invariants: per-item mass one, non-negative
    /// mass, capacity respected, at most one two-choice item.
    pub fn validate(&self, inst: &MskcInstance, t: &Rational) -> Result<(), Error> {
        let mut per_item: Vec<Vec<(usize, &Rational)>> = vec![Vec::new(); inst.items.len()];
        let mut load = Rational::zero();
        for (&(i, j), x) in &self.assignment {
            if x.is_negative() {
                return Err(Error::InfeasibleInput(format!("x[{i},{j}] = {x} < 0")));
            }
            if i >= inst.items.len() || j >= inst.items[i].choices().len() {
                return Err(Error::InfeasibleInput(format!("index ({i},{j}) out of range")));
            }
            if x.is_positive() {
                per_item[i].push((j, x));
                load += inst.items[i].mu(j, t) * x;
            }
        }
        if &load > t {
            return Err(Error::InfeasibleInput(format!("load {load} exceeds {t}")));
        }
        let mut split_items = 0usize;
        for (i, entries) in per_item.iter().enumerate() {
            let total: Rational = entries.iter().map(|(_, x)| *x).sum();
            if total != Rational::one() {
                return Err(Error::InfeasibleInput(format!(
                    "item {i} carries mass {total}, not 1"
                )));
            }
            match entries.len() {
                1 => {}
                2 => split_items += 1,
                k => {
                    return Err(Error::InfeasibleInput(format!(
                        "item {i} has {k} positive choices"
                    )))
                }
            }
        }
        if split_items > 1 {
            return Err(Error::InfeasibleInput(format!(
                "{split_items} items carry two positive choices"
            )));
        }
        Ok(())
    }
}

struct Segment {
    item: usize,
    seg: usize,
    dw: Rational,
    dmu: Rational,
}

/// Solves `Phi(t)` exactly with the structured-solution shape. `w` and `mu`
/// are computed at the same budget `t` that caps the capacity constraint.
pub fn solve_phi(inst: &MskcInstance, t: &Rational) -> PhiSolution {
    assert!(t.is_positive(), "budget must be positive");
    let frontiers: Vec<ParetoFrontier> = (0..inst.items.len())
        .map(|i| eliminate_dominated(inst, i, t))
        .collect();

    // Start every item at its zero-size base point.
    let mut level = vec![0usize; frontiers.len()];
    let mut value: Rational = frontiers.iter().map(|f| f.points[0].w.clone()).sum();

    let mut segments = Vec::new();
    for f in &frontiers {
        for k in 0..f.points.len().saturating_sub(1) {
            segments.push(Segment {
                item: f.item,
                seg: k,
                dw: &f.points[k + 1].w - &f.points[k].w,
                dmu: &f.points[k + 1].mu - &f.points[k].mu,
            });
        }
    }
    // Decreasing density dw/dmu; both deltas are positive on a frontier.
    segments.sort_by(|a, b| {
        (&b.dw * &a.dmu)
            .cmp(&(&a.dw * &b.dmu))
            .then(a.item.cmp(&b.item))
            .then(a.seg.cmp(&b.seg))
    });

    let mut capacity = t.clone();
    let mut fractional: Option<FractionalItem> = None;
    for s in &segments {
        if capacity.is_zero() {
            break;
        }
        if s.dmu <= capacity {
            capacity -= &s.dmu;
            value += &s.dw;
            level[s.item] = s.seg + 1;
        } else {
            let lambda = &capacity / &s.dmu;
            value += &s.dw * &lambda;
            let f = &frontiers[s.item];
            fractional = Some(FractionalItem {
                item: s.item,
                lo_choice: f.points[s.seg].choice,
                hi_choice: f.points[s.seg + 1].choice,
                lo_weight: Rational::one() - &lambda,
                hi_weight: lambda,
            });
            break;
        }
    }

    let mut assignment = BTreeMap::new();
    for (i, f) in frontiers.iter().enumerate() {
        match &fractional {
            Some(fr) if fr.item == i => {
                assignment.insert((i, fr.lo_choice), fr.lo_weight.clone());
                assignment.insert((i, fr.hi_choice), fr.hi_weight.clone());
            }
            _ => {
                assignment.insert((i, f.points[level[i]].choice), Rational::one());
            }
        }
    }

    let solution = PhiSolution {
        value,
        assignment,
        fractional_item: fractional,
    };
    solution
        .validate(inst, t)
        .expect("greedy sweep yields a structured feasible solution");
    solution
}

/// Builds the raw LP of `Phi(t)` for the exact simplex, as a reference
/// route; variables are ordered `(item, choice)` row-major.
pub fn phi_raw_lp(inst: &MskcInstance, t: &Rational) -> LpProblem {
    let mut cols = Vec::new();
    for (i, item) in inst.items.iter().enumerate() {
        for j in 0..item.choices().len() {
            cols.push((i, j));
        }
    }
    let objective: Vec<Rational> = cols
        .iter()
        .map(|&(i, j)| inst.items[i].weight(j, t))
        .collect();
    let mut lp = LpProblem::new(true, objective);
    let load: Vec<Rational> = cols.iter().map(|&(i, j)| inst.items[i].mu(j, t)).collect();
    lp.constrain(load, Relation::Le, t.clone());
    for i in 0..inst.items.len() {
        let coeffs: Vec<Rational> = cols
            .iter()
            .map(|&(ci, _)| {
                if ci == i {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            })
            .collect();
        lp.constrain(coeffs, Relation::Eq, Rational::one());
    }
    lp
}

/// Solves the raw LP with the simplex; used as the independent value oracle
/// in tests and experiments.
pub fn solve_phi_via_simplex(inst: &MskcInstance, t: &Rational) -> Result<LpSolution, Error> {
    solve_lp_exact(&phi_raw_lp(inst, t))
}

/// Turns an arbitrary feasible assignment for `Phi(t)` into a structured
/// one without decreasing the objective: dominated mass is projected onto
/// the frontier, per-item mass is consolidated onto one frontier segment,
/// and slope comparison shifts weight across items until at most one stays
/// fractional.
pub fn structure_solution(
    inst: &MskcInstance,
    t: &Rational,
    x: &BTreeMap<(usize, usize), Rational>,
) -> Result<PhiSolution, Error> {
    let n = inst.items.len();
    let mut mass: Vec<Vec<Rational>> = inst
        .items
        .iter()
        .map(|it| vec![Rational::zero(); it.choices().len()])
        .collect();
    let mut load = Rational::zero();
    for (&(i, j), v) in x {
        if i >= n || j >= inst.items[i].choices().len() {
            return Err(Error::InfeasibleInput(format!("index ({i},{j}) out of range")));
        }
        if v.is_negative() {
            return Err(Error::InfeasibleInput(format!("x[{i},{j}] = {v} < 0")));
        }
        mass[i][j] = v.clone();
        load += inst.items[i].mu(j, t) * v;
    }
    for (i, row) in mass.iter().enumerate() {
        let total: Rational = row.iter().sum();
        if total != Rational::one() {
            return Err(Error::InfeasibleInput(format!(
                "item {i} carries mass {total}, not 1"
            )));
        }
    }
    if &load > t {
        return Err(Error::InfeasibleInput(format!("load {load} exceeds {t}")));
    }

    let frontiers: Vec<ParetoFrontier> = (0..n).map(|i| eliminate_dominated(inst, i, t)).collect();

    // Step 1: move dominated mass onto the frontier. Single-dominated mass
    // shifts wholesale; interior mass splits across the bracketing
    // neighbours in proportion to the w gaps, which keeps the objective and
    // can only shrink the load.
    for i in 0..n {
        let item = &inst.items[i];
        let f = &frontiers[i];
        for j in 0..item.choices().len() {
            if mass[i][j].is_zero() || f.position_of(j).is_some() {
                continue;
            }
            let w = item.weight(j, t);
            let mu = item.mu(j, t);
            let moved = mass[i][j].clone();
            mass[i][j] = Rational::zero();
            let single = f
                .points
                .iter()
                .find(|p| p.w >= w && p.mu <= mu)
                .map(|p| p.choice);
            if let Some(target) = single {
                mass[i][target] += moved;
                continue;
            }
            let k = f
                .points
                .windows(2)
                .position(|pair| pair[0].w < w && w < pair[1].w)
                .ok_or_else(|| {
                    Error::InfeasibleInput(format!(
                        "choice ({i},{j}) has no dominating bracket on the frontier"
                    ))
                })?;
            let (lo, hi) = (&f.points[k], &f.points[k + 1]);
            let span = &hi.w - &lo.w;
            let to_lo = &moved * &((&hi.w - &w) / &span);
            let to_hi = &moved * &((&w - &lo.w) / &span);
            mass[i][lo.choice] += to_lo;
            mass[i][hi.choice] += to_hi;
        }
    }

    // Step 2: per item, replace the current mix by the frontier point(s)
    // realizing the same expected size. The boundary is concave in w as a
    // function of mu, so this never loses objective value.
    // Active fractional pairs are recorded as (item, lower index on frontier).
    let mut fractional_at: Vec<Option<usize>> = vec![None; n];
    for (i, row) in mass.iter_mut().enumerate() {
        let f = &frontiers[i];
        let item = &inst.items[i];
        let target_mu: Rational = row
            .iter()
            .enumerate()
            .map(|(j, x)| item.mu(j, t) * x)
            .sum();
        for v in row.iter_mut() {
            *v = Rational::zero();
        }
        if let Some(pos) = f.points.iter().position(|p| p.mu == target_mu) {
            row[f.points[pos].choice] = Rational::one();
            continue;
        }
        let k = f
            .points
            .windows(2)
            .position(|pair| pair[0].mu < target_mu && target_mu < pair[1].mu)
            .expect("mix of frontier sizes lies within the frontier span");
        let (lo, hi) = (&f.points[k], &f.points[k + 1]);
        let lambda = (&hi.mu - &target_mu) / (&hi.mu - &lo.mu);
        row[lo.choice] = lambda.clone();
        row[hi.choice] = Rational::one() - &lambda;
        fractional_at[i] = Some(k);
    }

    // Step 3: while two items are fractional, shift weight from the flatter
    // segment to the steeper one at equal total size until one side lands
    // on an endpoint. Each round settles at least one item.
    loop {
        let split: Vec<usize> = (0..n).filter(|&i| fractional_at[i].is_some()).collect();
        if split.len() <= 1 {
            break;
        }
        let (i1, i2) = (split[0], split[1]);
        let k1 = fractional_at[i1].unwrap();
        let k2 = fractional_at[i2].unwrap();
        let (f1, f2) = (&frontiers[i1], &frontiers[i2]);
        let (lo1, hi1) = (&f1.points[k1], &f1.points[k1 + 1]);
        let (lo2, hi2) = (&f2.points[k2], &f2.points[k2 + 1]);
        let d1 = (&hi1.w - &lo1.w) / (&hi1.mu - &lo1.mu);
        let d2 = (&hi2.w - &lo2.w) / (&hi2.mu - &lo2.mu);
        // Move item `a` (the denser segment) up and item `b` down.
        let (a, ka, b, kb) = if d1 >= d2 {
            (i1, k1, i2, k2)
        } else {
            (i2, k2, i1, k1)
        };
        let (fa, fb) = (&frontiers[a], &frontiers[b]);
        let (lo_a, hi_a) = (&fa.points[ka], &fa.points[ka + 1]);
        let (lo_b, hi_b) = (&fb.points[kb], &fb.points[kb + 1]);
        let dmu_a = &hi_a.mu - &lo_a.mu;
        let dmu_b = &hi_b.mu - &lo_b.mu;
        // Size headroom before either item hits an endpoint.
        let room_a = mass[a][lo_a.choice].clone() * &dmu_a;
        let room_b = mass[b][hi_b.choice].clone() * &dmu_b;
        let shift = room_a.min(room_b);
        debug_assert!(shift.is_positive());
        let da = &shift / &dmu_a;
        let db = &shift / &dmu_b;
        mass[a][lo_a.choice] = &mass[a][lo_a.choice] - &da;
        mass[a][hi_a.choice] = &mass[a][hi_a.choice] + &da;
        mass[b][lo_b.choice] = &mass[b][lo_b.choice] + &db;
        mass[b][hi_b.choice] = &mass[b][hi_b.choice] - &db;
        for &(i, k) in &[(a, ka), (b, kb)] {
            let f = &frontiers[i];
            let lo = &f.points[k];
            let hi = &f.points[k + 1];
            if mass[i][lo.choice].is_zero() || mass[i][hi.choice].is_zero() {
                fractional_at[i] = None;
                if mass[i][lo.choice].is_zero() {
                    mass[i][lo.choice] = Rational::zero();
                    mass[i][hi.choice] = Rational::one();
                } else {
                    mass[i][lo.choice] = Rational::one();
                    mass[i][hi.choice] = Rational::zero();
                }
            }
        }
    }

    let mut assignment = BTreeMap::new();
    let mut value = Rational::zero();
    let mut fractional_item = None;
    for (i, row) in mass.iter().enumerate() {
        let item = &inst.items[i];
        let positive: Vec<usize> = (0..item.choices().len())
            .filter(|&j| row[j].is_positive())
            .collect();
        for &j in &positive {
            value += item.weight(j, t) * &row[j];
            assignment.insert((i, j), row[j].clone());
        }
        if positive.len() == 2 {
            fractional_item = Some(FractionalItem {
                item: i,
                lo_choice: positive[0],
                hi_choice: positive[1],
                lo_weight: row[positive[0]].clone(),
                hi_weight: row[positive[1]].clone(),
            });
        }
    }
    let solution = PhiSolution {
        value,
        assignment,
        fractional_item,
    };
    solution.validate(inst, t)?;
    Ok(solution)
}

/// Convenience: `w`/`mu` pairs of an item at budget `t`, null included.
pub fn item_points(item: &MskcItem, t: &Rational) -> Vec<(usize, Rational, Rational)> {
    (0..item.choices().len())
        .map(|j| (j, item.weight(j, t), item.mu(j, t)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::FiniteDistribution;
    use crate::model::{MskcChoice, NULL_CHOICE};
    use crate::simplex::LpStatus;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d).unwrap()
    }

    fn det_item(v: (i64, i64), p: (i64, i64), s: (i64, i64)) -> crate::model::MskcItem {
        MskcItem::new(
            r(v.0, v.1),
            vec![MskcChoice::new(r(p.0, p.1), FiniteDistribution::point(r(s.0, s.1))).unwrap()],
        )
        .unwrap()
    }

    use crate::model::MskcItem;

    /// Item whose choices land at prescribed (w, mu) points at t = 1: value
    /// 1, deterministic size mu, cost 1 - w (sizes must stay <= 1).
    type Pt = ((i64, i64), (i64, i64));

    fn item_at_points(points: &[Pt]) -> MskcItem {
        let choices = points
            .iter()
            .map(|&((wn, wd), (mn, md))| {
                let w = r(wn, wd);
                let mu = r(mn, md);
                MskcChoice::new(Rational::one() - w, FiniteDistribution::point(mu)).unwrap()
            })
            .collect();
        MskcItem::new(Rational::one(), choices).unwrap()
    }

    #[test]
    fn double_dominated_choice_removed() {
        // A = (3/10, 2/10), B = (8/10, 9/10), C = (5/10, 6/10): C lies above
        // the A-B segment and must go; the null point anchors the base.
        let item = item_at_points(&[((3, 10), (2, 10)), ((8, 10), (9, 10)), ((5, 10), (6, 10))]);
        let inst = MskcInstance::new(vec![item]);
        let f = eliminate_dominated(&inst, 0, &r(1, 1));
        let choices: Vec<usize> = f.points.iter().map(|p| p.choice).collect();
        assert_eq!(choices, vec![NULL_CHOICE, 1, 2]);
    }

    #[test]
    fn single_dominated_choice_removed() {
        // A = (1/2, 1/2), B = (1/2, 3/4): B has equal w and larger mu.
        let item = item_at_points(&[((1, 2), (1, 2)), ((1, 2), (3, 4))]);
        let inst = MskcInstance::new(vec![item]);
        let f = eliminate_dominated(&inst, 0, &r(1, 1));
        let choices: Vec<usize> = f.points.iter().map(|p| p.choice).collect();
        assert_eq!(choices, vec![NULL_CHOICE, 1]);
    }

    #[test]
    fn null_survives_when_all_weights_nonpositive() {
        let item = MskcItem::new(
            r(1, 1),
            vec![
                MskcChoice::new(r(2, 1), FiniteDistribution::point(r(1, 2))).unwrap(),
                MskcChoice::new(r(3, 1), FiniteDistribution::point(r(1, 4))).unwrap(),
            ],
        )
        .unwrap();
        let inst = MskcInstance::new(vec![item]);
        let f = eliminate_dominated(&inst, 0, &r(1, 1));
        assert_eq!(f.points.len(), 1);
        assert_eq!(f.points[0].choice, NULL_CHOICE);
        assert!(f.points[0].w.is_zero() && f.points[0].mu.is_zero());
    }

    #[test]
    fn two_deterministic_items_fill_exactly() {
        let inst = MskcInstance::new(vec![
            det_item((10, 1), (2, 1), (1, 2)),
            det_item((6, 1), (1, 1), (1, 2)),
        ]);
        let sol = solve_phi(&inst, &r(1, 1));
        assert_eq!(sol.value, r(13, 1));
        assert_eq!(sol.assignment.get(&(0, 1)), Some(&Rational::one()));
        assert_eq!(sol.assignment.get(&(1, 1)), Some(&Rational::one()));
        assert!(sol.fractional_item.is_none());
    }

    #[test]
    fn empty_instance_is_zero() {
        let inst = MskcInstance::new(vec![]);
        let sol = solve_phi(&inst, &r(1, 1));
        assert!(sol.value.is_zero());
    }

    #[test]
    fn matches_simplex_on_fractional_case() {
        // Capacity runs out mid-segment on the second item.
        let inst = MskcInstance::new(vec![
            det_item((4, 1), (1, 1), (1, 2)),
            det_item((5, 1), (1, 1), (3, 4)),
            det_item((3, 2), (1, 1), (1, 2)),
        ]);
        let sol = solve_phi(&inst, &r(1, 1));
        let reference = solve_phi_via_simplex(&inst, &r(1, 1)).unwrap();
        assert_eq!(reference.status, LpStatus::Optimal);
        assert_eq!(sol.value, reference.value);
        assert_eq!(sol.value, r(17, 3));
        let frac = sol.fractional_item.as_ref().unwrap();
        assert_eq!(frac.item, 1);
        assert_eq!((frac.lo_weight.clone(), frac.hi_weight.clone()), (r(1, 3), r(2, 3)));
        sol.validate(&inst, &r(1, 1)).unwrap();
    }

    #[test]
    fn structure_solution_fixed_point() {
        let inst = MskcInstance::new(vec![
            det_item((10, 1), (2, 1), (1, 2)),
            det_item((6, 1), (1, 1), (1, 2)),
        ]);
        let sol = solve_phi(&inst, &r(1, 1));
        let restructured = structure_solution(&inst, &r(1, 1), &sol.assignment).unwrap();
        assert_eq!(restructured.value, sol.value);
        assert_eq!(restructured.assignment, sol.assignment);
    }

    #[test]
    fn structure_solution_consolidates_two_splits() {
        // Two items, each feasible split half/half between null and the real
        // choice; shifting must leave at most one fractional.
        let inst = MskcInstance::new(vec![
            det_item((4, 1), (1, 1), (1, 2)),
            det_item((3, 1), (2, 1), (1, 2)),
        ]);
        let mut x = BTreeMap::new();
        x.insert((0, NULL_CHOICE), r(1, 2));
        x.insert((0, 1), r(1, 2));
        x.insert((1, NULL_CHOICE), r(1, 2));
        x.insert((1, 1), r(1, 2));
        let before: Rational = r(3, 2) + r(1, 2);
        let out = structure_solution(&inst, &r(1, 1), &x).unwrap();
        assert!(out.value >= before);
        let split = out
            .assignment
            .iter()
            .filter(|(_, v)| v.is_positive() && **v < Rational::one())
            .count();
        assert!(split <= 2, "at most one item split into two choices");
        out.validate(&inst, &r(1, 1)).unwrap();
    }

    #[test]
    fn structure_solution_projects_dominated_mass() {
        // Item with a double-dominated middle choice carrying mass.
        let item = item_at_points(&[((3, 10), (2, 10)), ((8, 10), (9, 10)), ((5, 10), (6, 10))]);
        let inst = MskcInstance::new(vec![item]);
        let mut x = BTreeMap::new();
        x.insert((0, 3), Rational::one()); // the dominated choice
        let before = inst.items[0].weight(3, &r(1, 1));
        let out = structure_solution(&inst, &r(1, 1), &x).unwrap();
        assert!(out.value >= before);
        assert!(!out.assignment.contains_key(&(0, 3)));
    }

    #[test]
    fn structure_solution_rejects_infeasible() {
        let inst = MskcInstance::new(vec![det_item((4, 1), (1, 1), (1, 2))]);
        let mut x = BTreeMap::new();
        x.insert((0, 1), r(1, 2)); // mass does not sum to one
        assert!(matches!(
            structure_solution(&inst, &r(1, 1), &x),
            Err(Error::InfeasibleInput(_))
        ));
    }
}
