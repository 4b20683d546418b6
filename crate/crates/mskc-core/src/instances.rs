//! Instance generators for every benchmark family, the moment-matching
//! solver behind the information-gap construction, seeded random instances,
//! and JSON persistence.
//!
//! Every generator is a pure function of its parameters; the emitted bundle
//! records those parameters so the instance can be regenerated bit-exactly.

use std::collections::BTreeMap;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::FiniteDistribution;
use crate::error::Error;
use crate::model::{
    ContractAction, ContractAgent, ContractInstance, MskcChoice, MskcInstance, MskcItem,
};
use crate::policy::GroupLadderPolicy;
use crate::rational::Rational;

/// An MSKC or contract instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instance {
    Mskc(MskcInstance),
    Contract(ContractInstance),
}

/// A generated instance together with the generator name, its parameters,
/// and derived quantities worth recording (all rationals as strings).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceBundle {
    pub family: String,
    pub params: BTreeMap<String, String>,
    pub notes: BTreeMap<String, String>,
    pub instance: Instance,
}

impl InstanceBundle {
    pub fn mskc(&self) -> Result<&MskcInstance, Error> {
        match &self.instance {
            Instance::Mskc(m) => Ok(m),
            Instance::Contract(_) => Err(Error::BadInstance(
                "expected an MSKC instance, found a contract instance".into(),
            )),
        }
    }

    pub fn contract(&self) -> Result<&ContractInstance, Error> {
        match &self.instance {
            Instance::Contract(c) => Ok(c),
            Instance::Mskc(_) => Err(Error::BadInstance(
                "expected a contract instance, found an MSKC instance".into(),
            )),
        }
    }

    fn param(&self, key: &str) -> Result<Rational, Error> {
        self.params
            .get(key)
            .ok_or_else(|| Error::parse(format!("missing parameter {key:?}")))?
            .parse()
    }

    fn param_usize(&self, key: &str) -> Result<usize, Error> {
        self.params
            .get(key)
            .ok_or_else(|| Error::parse(format!("missing parameter {key:?}")))?
            .parse()
            .map_err(|e| Error::parse(format!("parameter {key:?}: {e}")))
    }

    /// Re-runs the generator recorded in the metadata; the result must equal
    /// this bundle bit-exactly.
    pub fn regenerate(&self) -> Result<InstanceBundle, Error> {
        match self.family.as_str() {
            "alpha-gap" => gen_alpha_gap(&self.param("eps")?, &self.param("gamma")?),
            "fully-vs-stop" => gen_fully_vs_stop(
                &self.param("eps")?,
                &self.param("gamma")?,
                self.param_usize("copies")?,
            ),
            "info-gap" => gen_info_gap(
                self.param_usize("k")?,
                &self.param("eps")?,
                &self.param("delta")?,
                self.param_usize("n")?,
            ),
            "lp-gap" => gen_lp_gap(&self.param("eps")?, self.param_usize("copies")?),
            "bounded-gap" => gen_bounded_gap(&self.param("eps")?, self.param_usize("copies")?),
            "random" => {
                let profile = match self.params.get("profile").map(String::as_str) {
                    Some("generic") => RandomProfile::Generic,
                    Some("positive-w") => RandomProfile::PositiveW,
                    Some("bounded-size") => RandomProfile::BoundedSize(self.param("delta")?),
                    other => {
                        return Err(Error::parse(format!("unknown random profile {other:?}")))
                    }
                };
                gen_random(
                    self.param_usize("n")?,
                    self.param_usize("m")?,
                    self.param_usize("support")?,
                    self.param_usize("seed")? as u64,
                    &profile,
                )
            }
            "random-contract" => gen_random_contract(
                self.param_usize("n")?,
                self.param_usize("m")?,
                self.param_usize("support")?,
                self.param_usize("seed")? as u64,
            ),
            other => Err(Error::parse(format!("family {other:?} has no generator"))),
        }
    }
}

fn rat(n: i64, d: i64) -> Rational {
    Rational::new(n, d).expect("nonzero denominator")
}

fn check_range(ok: bool, what: &str) -> Result<(), Error> {
    if ok {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange(what.to_string()))
    }
}

/// Geometric small sizes `a_i = gamma^(n-i+1)` and the exact completions
/// `b_i = 1 - sum_{j<i} a_j`, both 1-indexed over `n` positions.
fn ladder_sizes(gamma: &Rational, n: usize) -> (Vec<Rational>, Vec<Rational>) {
    let a: Vec<Rational> = (1..=n).map(|i| gamma.pow((n - i + 1) as u32)).collect();
    let mut b = Vec::with_capacity(n);
    let mut prefix = Rational::zero();
    for ai in &a {
        b.push(Rational::one() - &prefix);
        prefix += ai;
    }
    (a, b)
}

/// Single-action jobs whose small sizes fill the knapsack exactly at the
/// first large realization: value 2, cost `2 - eps`, sizes
/// `{a_i w.p. 1-eps, b_i w.p. eps}`. Emitted as a contract instance.
pub fn gen_alpha_gap(eps: &Rational, gamma: &Rational) -> Result<InstanceBundle, Error> {
    check_range(
        eps.is_positive() && *eps < rat(1, 2),
        "eps must lie in (0, 1/2)",
    )?;
    check_range(
        gamma.is_positive() && *gamma < rat(1, 2),
        "gamma must lie in (0, 1/2)",
    )?;
    let n = eps
        .recip()?
        .ceil_int()
        .to_string()
        .parse::<usize>()
        .map_err(|_| Error::ParameterOutOfRange("eps too small".into()))?;
    let (a, b) = ladder_sizes(gamma, n);
    let value = rat(2, 1);
    let cost = rat(2, 1) - eps;
    let agents = (0..n)
        .map(|i| {
            let dist = FiniteDistribution::new(vec![
                (a[i].clone(), Rational::one() - eps),
                (b[i].clone(), eps.clone()),
            ])?;
            ContractAgent::new(value.clone(), vec![ContractAction::new(cost.clone(), dist)?])
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut params = BTreeMap::new();
    params.insert("eps".into(), eps.to_string());
    params.insert("gamma".into(), gamma.to_string());
    params.insert("n".into(), n.to_string());
    let mut notes = BTreeMap::new();
    notes.insert("ior_alpha".into(), (&cost / eps).to_string());
    Ok(InstanceBundle {
        family: "alpha-gap".into(),
        params,
        notes,
        instance: Instance::Contract(ContractInstance::new(agents)),
    })
}

/// Layered single-choice jobs in `ceil(1/eps)` types with `copies` jobs per
/// type: value `15/eps`, cost `15/eps - eps^2`, sizes
/// `{0 w.p. 1-eps-eps^2, a_i w.p. eps, b_i w.p. eps^2}`.
pub fn gen_fully_vs_stop(
    eps: &Rational,
    gamma: &Rational,
    copies_per_type: usize,
) -> Result<InstanceBundle, Error> {
    let eps2 = eps * eps;
    check_range(
        eps.is_positive() && (eps + &eps2) < Rational::one(),
        "eps must keep probabilities in (0, 1)",
    )?;
    check_range(
        gamma.is_positive() && *gamma < rat(1, 2),
        "gamma must lie in (0, 1/2)",
    )?;
    check_range(copies_per_type >= 1, "at least one copy per type")?;
    let n_types = eps
        .recip()?
        .ceil_int()
        .to_string()
        .parse::<usize>()
        .map_err(|_| Error::ParameterOutOfRange("eps too small".into()))?;
    let (a, b) = ladder_sizes(gamma, n_types);
    let value = rat(15, 1) / eps;
    let cost = &value - &eps2;
    let mut items = Vec::with_capacity(n_types * copies_per_type);
    for i in 0..n_types {
        let dist = FiniteDistribution::new(vec![
            (Rational::zero(), Rational::one() - eps - &eps2),
            (a[i].clone(), eps.clone()),
            (b[i].clone(), eps2.clone()),
        ])?;
        for _ in 0..copies_per_type {
            items.push(MskcItem::new(
                value.clone(),
                vec![MskcChoice::new(cost.clone(), dist.clone())?],
            )?);
        }
    }
    let mut params = BTreeMap::new();
    params.insert("eps".into(), eps.to_string());
    params.insert("gamma".into(), gamma.to_string());
    params.insert("copies".into(), copies_per_type.to_string());
    let mut notes = BTreeMap::new();
    notes.insert("ior_alpha".into(), (&cost / &eps2).to_string());
    notes.insert("types".into(), n_types.to_string());
    Ok(InstanceBundle {
        family: "fully-vs-stop".into(),
        params,
        notes,
        instance: Instance::Mskc(MskcInstance::new(items)),
    })
}

/// The scripted adaptive policy for the layered instance: run the current
/// type while sizes realize zero, advance on `a_i`, stop on anything else.
pub fn fully_vs_stop_policy(
    eps: &Rational,
    gamma: &Rational,
    copies_per_type: usize,
) -> Result<GroupLadderPolicy, Error> {
    let n_types = eps
        .recip()?
        .ceil_int()
        .to_string()
        .parse::<usize>()
        .map_err(|_| Error::ParameterOutOfRange("eps too small".into()))?;
    let (a, _) = ladder_sizes(gamma, n_types);
    let groups = (0..n_types)
        .map(|i| ((i * copies_per_type)..((i + 1) * copies_per_type)).collect())
        .collect();
    Ok(GroupLadderPolicy {
        groups,
        choice: 1,
        advance_sizes: a,
    })
}

/// Exact rational solve of a dense linear system by Gaussian elimination.
fn solve_linear(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Result<Vec<Rational>, Error> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| !a[r][col].is_zero())
            .ok_or_else(|| Error::BadInstance("singular linear system".into()))?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = a[col][col].recip()?;
        for v in a[col].iter_mut() {
            *v = &*v * &inv;
        }
        b[col] = &b[col] * &inv;
        for row in 0..n {
            if row == col || a[row][col].is_zero() {
                continue;
            }
            let factor = a[row][col].clone();
            let pivot_row = a[col].clone();
            for (entry, pivot) in a[row].iter_mut().zip(&pivot_row) {
                *entry = &*entry - &(pivot * &factor);
            }
            b[row] = &b[row] - &(&b[col] * &factor);
        }
    }
    Ok(b)
}

/// Support points for the moment-matching construction: `1 - 2^-j` for
/// `j = 1..k` and `1` for `j = k + 1`.
pub fn moment_match_nodes(k: usize) -> Vec<Rational> {
    (1..=k)
        .map(|j| Rational::one() - rat(1, 2).pow(j as u32))
        .chain(std::iter::once(Rational::one()))
        .collect()
}

/// Solves the transposed-Vandermonde system matching the first `k` raw
/// moments and returns the probabilities `p_j = eps/(k+1) - x_j` placed on
/// the nodes. Fails with [`Error::DeltaTooLarge`] when some `p_j` would be
/// negative; callers shrink `delta` and retry.
pub fn solve_moment_match(
    k: usize,
    eps: &Rational,
    delta: &Rational,
) -> Result<Vec<Rational>, Error> {
    check_range(k >= 1, "k must be at least 1")?;
    check_range(delta.is_positive(), "delta must be positive")?;
    check_range(
        eps.is_positive() && (eps + eps) < Rational::one(),
        "eps must lie in (0, 1/2)",
    )?;
    let nodes = moment_match_nodes(k);
    let dim = k + 1;
    let mut a = vec![vec![Rational::zero(); dim]; dim];
    let mut b = vec![Rational::zero(); dim];
    for (j, node) in nodes.iter().enumerate() {
        a[0][j] = Rational::one();
        for (r, row) in a.iter_mut().enumerate().skip(1) {
            row[j] = node.pow(r as u32);
        }
    }
    let scale = Rational::one() - eps - eps;
    for (r, entry) in b.iter_mut().enumerate().skip(1) {
        *entry = &scale * &delta.pow(r as u32);
    }
    let x = solve_linear(a, b)?;
    let share = eps / &Rational::from_int(dim as i64);
    let probs: Vec<Rational> = x.iter().map(|xj| &share - xj).collect();
    for (index, p) in probs.iter().enumerate() {
        if p.is_negative() {
            return Err(Error::DeltaTooLarge { index });
        }
    }
    debug_assert_eq!(probs.iter().sum::<Rational>(), eps.clone());
    Ok(probs)
}

/// The indistinguishable "good" size distribution: zero with the bulk of
/// the mass, the matching nodes with equal shares, and an extra unit atom.
pub fn info_gap_type1(k: usize, eps: &Rational) -> Result<FiniteDistribution, Error> {
    if k == 0 {
        return FiniteDistribution::new(vec![
            (Rational::zero(), Rational::one() - eps),
            (Rational::one(), eps.clone()),
        ]);
    }
    let share = eps / &Rational::from_int((k + 1) as i64);
    let mut atoms = vec![(Rational::zero(), Rational::one() - eps - eps)];
    for node in moment_match_nodes(k) {
        atoms.push((node, share.clone()));
    }
    atoms.push((Rational::one(), eps.clone()));
    FiniteDistribution::new(atoms)
}

/// The "bad" counterpart: same first `k` raw moments, but the bulk of the
/// mass sits at `delta` instead of zero.
pub fn info_gap_type2(k: usize, eps: &Rational, delta: &Rational) -> Result<FiniteDistribution, Error> {
    if k == 0 {
        let two_minus = rat(2, 1) - eps;
        let p_one = eps / &two_minus;
        return FiniteDistribution::new(vec![
            (eps / &rat(2, 1), Rational::one() - &p_one),
            (Rational::one(), p_one),
        ]);
    }
    let probs = solve_moment_match(k, eps, delta)?;
    let mut atoms = vec![(delta.clone(), Rational::one() - eps - eps)];
    for (node, p) in moment_match_nodes(k).into_iter().zip(probs) {
        if p.is_positive() {
            atoms.push((node, p));
        }
    }
    atoms.push((Rational::one(), eps.clone()));
    FiniteDistribution::new(atoms)
}

/// `n` good items plus `n^2 - n` bad items, all with value 2 and cost
/// `2 - eps`; `k = 0` selects the first-moment warm-up pair.
pub fn gen_info_gap(
    k: usize,
    eps: &Rational,
    delta: &Rational,
    n: usize,
) -> Result<InstanceBundle, Error> {
    check_range(n >= 1, "n must be at least 1")?;
    let type1 = info_gap_type1(k, eps)?;
    let type2 = info_gap_type2(k, eps, delta)?;
    let value = rat(2, 1);
    let cost = rat(2, 1) - eps;
    let mut items = Vec::with_capacity(n * n);
    for _ in 0..n {
        items.push(MskcItem::new(
            value.clone(),
            vec![MskcChoice::new(cost.clone(), type1.clone())?],
        )?);
    }
    for _ in 0..(n * n - n) {
        items.push(MskcItem::new(
            value.clone(),
            vec![MskcChoice::new(cost.clone(), type2.clone())?],
        )?);
    }
    let mut params = BTreeMap::new();
    params.insert("k".into(), k.to_string());
    params.insert("eps".into(), eps.to_string());
    params.insert("delta".into(), delta.to_string());
    params.insert("n".into(), n.to_string());
    let mut notes = BTreeMap::new();
    notes.insert("ior_alpha".into(), (&cost / eps).to_string());
    Ok(InstanceBundle {
        family: "info-gap".into(),
        params,
        notes,
        instance: Instance::Mskc(MskcInstance::new(items)),
    })
}

/// Identical jobs whose LP value overshoots every policy: value 1, cost
/// `1 - eps`, sizes `{eps^copies w.p. 1-eps, 1 w.p. eps}`.
pub fn gen_lp_gap(eps: &Rational, copies: usize) -> Result<InstanceBundle, Error> {
    check_range(
        eps.is_positive() && *eps < rat(1, 2),
        "eps must lie in (0, 1/2)",
    )?;
    let min_copies = (Rational::one() / &(eps + eps)).ceil_int();
    check_range(
        Rational::from_int(copies as i64) >= Rational::from_big(min_copies, 1.into())?,
        "copies must be at least ceil(1/(2 eps))",
    )?;
    let dist = FiniteDistribution::new(vec![
        (eps.pow(copies as u32), Rational::one() - eps),
        (Rational::one(), eps.clone()),
    ])?;
    let cost = Rational::one() - eps;
    let items = (0..copies)
        .map(|_| {
            MskcItem::new(
                Rational::one(),
                vec![MskcChoice::new(cost.clone(), dist.clone())?],
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut params = BTreeMap::new();
    params.insert("eps".into(), eps.to_string());
    params.insert("copies".into(), copies.to_string());
    let mut notes = BTreeMap::new();
    notes.insert("ior_alpha".into(), (&cost / eps).to_string());
    Ok(InstanceBundle {
        family: "lp-gap".into(),
        params,
        notes,
        instance: Instance::Mskc(MskcInstance::new(items)),
    })
}

/// Bounded-size gap family: value 2, cost `2 - eps^2`, sizes
/// `{eps^copies w.p. 1-eps, 1/2 w.p. eps}`.
pub fn gen_bounded_gap(eps: &Rational, copies: usize) -> Result<InstanceBundle, Error> {
    check_range(
        eps.is_positive() && *eps < rat(1, 2),
        "eps must lie in (0, 1/2)",
    )?;
    check_range(copies >= 1, "at least one copy")?;
    let eps2 = eps * eps;
    let dist = FiniteDistribution::new(vec![
        (eps.pow(copies as u32), Rational::one() - eps),
        (rat(1, 2), eps.clone()),
    ])?;
    let cost = rat(2, 1) - &eps2;
    let items = (0..copies)
        .map(|_| {
            MskcItem::new(rat(2, 1), vec![MskcChoice::new(cost.clone(), dist.clone())?])
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut params = BTreeMap::new();
    params.insert("eps".into(), eps.to_string());
    params.insert("copies".into(), copies.to_string());
    let mut notes = BTreeMap::new();
    notes.insert("ior_alpha".into(), (&cost / &eps2).to_string());
    Ok(InstanceBundle {
        family: "bounded-gap".into(),
        params,
        notes,
        instance: Instance::Mskc(MskcInstance::new(items)),
    })
}

/// Random-instance shaping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RandomProfile {
    /// Sizes on a 1/64 grid within [0, 1]; costs may exceed values.
    Generic,
    /// Every real choice keeps a strictly positive profit proxy.
    PositiveW,
    /// Generic, then every distribution is rescaled below `1 - delta`.
    BoundedSize(Rational),
}

impl RandomProfile {
    fn name(&self) -> &'static str {
        match self {
            RandomProfile::Generic => "generic",
            RandomProfile::PositiveW => "positive-w",
            RandomProfile::BoundedSize(_) => "bounded-size",
        }
    }
}

/// Reproducible random MSKC instance: `n` items with `m` real choices each,
/// sizes and probabilities on small power-of-two grids so downstream exact
/// evaluation stays cheap.
pub fn gen_random(
    n: usize,
    m: usize,
    support_size: usize,
    seed: u64,
    profile: &RandomProfile,
) -> Result<InstanceBundle, Error> {
    check_range(n >= 1 && m >= 1 && support_size >= 1, "positive bounds")?;
    check_range(support_size <= 16, "support_size at most 16")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items = Vec::with_capacity(n);
    for _ in 0..n {
        let value = rat(rng.gen_range(1..=16), 4);
        let mut choices = Vec::with_capacity(m);
        for _ in 0..m {
            let dist = random_distribution(&mut rng, support_size)?;
            let dist = match profile {
                RandomProfile::BoundedSize(delta) => clamp_below(&dist, &(Rational::one() - delta))?,
                _ => dist,
            };
            let cost = match profile {
                RandomProfile::PositiveW => &value * &rat(rng.gen_range(0..=63), 64),
                _ => rat(rng.gen_range(0..=32), 16),
            };
            choices.push(MskcChoice::new(cost, dist)?);
        }
        items.push(MskcItem::new(value, choices)?);
    }
    let mut params = BTreeMap::new();
    params.insert("n".into(), n.to_string());
    params.insert("m".into(), m.to_string());
    params.insert("support".into(), support_size.to_string());
    params.insert("seed".into(), seed.to_string());
    params.insert("profile".into(), profile.name().to_string());
    if let RandomProfile::BoundedSize(delta) = profile {
        params.insert("delta".into(), delta.to_string());
    }
    Ok(InstanceBundle {
        family: "random".into(),
        params,
        notes: BTreeMap::new(),
        instance: Instance::Mskc(MskcInstance::new(items)),
    })
}

fn random_distribution(
    rng: &mut ChaCha8Rng,
    support_size: usize,
) -> Result<FiniteDistribution, Error> {
    // Distinct sizes k/64 in [0, 1].
    let picks = rand::seq::index::sample(rng, 65, support_size);
    let mut sizes: Vec<i64> = picks.iter().map(|k| k as i64).collect();
    sizes.sort_unstable();
    // Probabilities as a random composition of 64.
    let mut cuts: Vec<i64> = if support_size > 1 {
        rand::seq::index::sample(rng, 63, support_size - 1)
            .iter()
            .map(|c| c as i64 + 1)
            .collect()
    } else {
        Vec::new()
    };
    cuts.sort_unstable();
    cuts.push(64);
    let mut atoms = Vec::with_capacity(support_size);
    let mut prev = 0i64;
    for (size, cut) in sizes.into_iter().zip(cuts) {
        atoms.push((rat(size, 64), rat(cut - prev, 64)));
        prev = cut;
    }
    FiniteDistribution::new(atoms)
}

/// Rescales all sizes of a distribution multiplicatively so the maximum
/// support point lands at `cap` (when it exceeds it).
fn clamp_below(dist: &FiniteDistribution, cap: &Rational) -> Result<FiniteDistribution, Error> {
    let max = dist.max_support();
    if max <= cap {
        return Ok(dist.clone());
    }
    let factor = cap / max;
    FiniteDistribution::new(
        dist.atoms()
            .iter()
            .map(|(s, p)| (s * &factor, p.clone()))
            .collect(),
    )
}

/// Reproducible random contract instance; the cheapest action is always
/// implementable, so the reduction never fails.
pub fn gen_random_contract(
    n: usize,
    m: usize,
    support_size: usize,
    seed: u64,
) -> Result<InstanceBundle, Error> {
    check_range(n >= 1 && m >= 1 && support_size >= 1, "positive bounds")?;
    check_range(support_size <= 16, "support_size at most 16")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c0de);
    let mut agents = Vec::with_capacity(n);
    for _ in 0..n {
        let value = rat(rng.gen_range(1..=16), 4);
        let mut actions = Vec::with_capacity(m);
        for _ in 0..m {
            let dist = random_distribution(&mut rng, support_size)?;
            let cost = rat(rng.gen_range(0..=16), 16);
            actions.push(ContractAction::new(cost, dist)?);
        }
        agents.push(ContractAgent::new(value, actions)?);
    }
    let mut params = BTreeMap::new();
    params.insert("n".into(), n.to_string());
    params.insert("m".into(), m.to_string());
    params.insert("support".into(), support_size.to_string());
    params.insert("seed".into(), seed.to_string());
    Ok(InstanceBundle {
        family: "random-contract".into(),
        params,
        notes: BTreeMap::new(),
        instance: Instance::Contract(ContractInstance::new(agents)),
    })
}

// ---------------------------------------------------------------------------
// JSON persistence. Schema: {family, params, notes?, budget, items | agents}
// with rationals as strings; the reserved null choice is implicit.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct RawChoice {
    cost: Rational,
    dist: Vec<(Rational, Rational)>,
}

#[derive(Serialize, Deserialize)]
struct RawItem {
    value: Rational,
    choices: Vec<RawChoice>,
}

#[derive(Serialize, Deserialize)]
struct RawAgent {
    value: Rational,
    actions: Vec<RawChoice>,
}

#[derive(Serialize, Deserialize)]
struct RawBundle {
    family: String,
    #[serde(default)]
    params: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    notes: BTreeMap<String, String>,
    budget: Rational,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    items: Option<Vec<RawItem>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    agents: Option<Vec<RawAgent>>,
}

fn to_raw(bundle: &InstanceBundle) -> RawBundle {
    let (budget, items, agents) = match &bundle.instance {
        Instance::Mskc(m) => (
            m.budget.clone(),
            Some(
                m.items
                    .iter()
                    .map(|item| RawItem {
                        value: item.value.clone(),
                        choices: item
                            .real_choices()
                            .iter()
                            .map(|c| RawChoice {
                                cost: c.cost.clone(),
                                dist: c.dist.atoms().to_vec(),
                            })
                            .collect(),
                    })
                    .collect(),
            ),
            None,
        ),
        Instance::Contract(c) => (
            c.budget.clone(),
            None,
            Some(
                c.agents
                    .iter()
                    .map(|agent| RawAgent {
                        value: agent.value.clone(),
                        actions: agent
                            .actions()
                            .iter()
                            .map(|a| RawChoice {
                                cost: a.cost.clone(),
                                dist: a.dist.atoms().to_vec(),
                            })
                            .collect(),
                    })
                    .collect(),
            ),
        ),
    };
    RawBundle {
        family: bundle.family.clone(),
        params: bundle.params.clone(),
        notes: bundle.notes.clone(),
        budget,
        items,
        agents,
    }
}

fn from_raw(raw: RawBundle) -> Result<InstanceBundle, Error> {
    let instance = match (raw.items, raw.agents) {
        (Some(items), None) => {
            let items = items
                .into_iter()
                .enumerate()
                .map(|(ix, item)| {
                    let choices = item
                        .choices
                        .into_iter()
                        .enumerate()
                        .map(|(jx, c)| {
                            let dist = FiniteDistribution::new(c.dist).map_err(|e| {
                                Error::parse(format!("item {ix}, choice {jx}: {e}"))
                            })?;
                            MskcChoice::new(c.cost, dist)
                                .map_err(|e| Error::parse(format!("item {ix}, choice {jx}: {e}")))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    MskcItem::new(item.value, choices)
                        .map_err(|e| Error::parse(format!("item {ix}: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Instance::Mskc(
                MskcInstance::with_budget(items, raw.budget)
                    .map_err(|e| Error::parse(e.to_string()))?,
            )
        }
        (None, Some(agents)) => {
            let agents = agents
                .into_iter()
                .enumerate()
                .map(|(ix, agent)| {
                    let actions = agent
                        .actions
                        .into_iter()
                        .enumerate()
                        .map(|(jx, a)| {
                            let dist = FiniteDistribution::new(a.dist).map_err(|e| {
                                Error::parse(format!("agent {ix}, action {jx}: {e}"))
                            })?;
                            ContractAction::new(a.cost, dist)
                                .map_err(|e| Error::parse(format!("agent {ix}, action {jx}: {e}")))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    ContractAgent::new(agent.value, actions)
                        .map_err(|e| Error::parse(format!("agent {ix}: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Instance::Contract(
                ContractInstance::with_budget(agents, raw.budget)
                    .map_err(|e| Error::parse(e.to_string()))?,
            )
        }
        (Some(_), Some(_)) => {
            return Err(Error::parse("bundle carries both items and agents"))
        }
        (None, None) => return Err(Error::parse("bundle carries neither items nor agents")),
    };
    Ok(InstanceBundle {
        family: raw.family,
        params: raw.params,
        notes: raw.notes,
        instance,
    })
}

pub fn to_json(bundle: &InstanceBundle) -> String {
    serde_json::to_string_pretty(&to_raw(bundle)).expect("bundle serializes")
}

pub fn from_json(text: &str) -> Result<InstanceBundle, Error> {
    let raw: RawBundle =
        serde_json::from_str(text).map_err(|e| Error::parse(format!("json: {e}")))?;
    from_raw(raw)
}

pub fn write_json(bundle: &InstanceBundle, path: &Path) -> Result<(), Error> {
    std::fs::write(path, to_json(bundle) + "\n")?;
    Ok(())
}

pub fn read_json(path: &Path) -> Result<InstanceBundle, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::parse(format!("{}: {e}", path.display())))?;
    from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contracts::{compute_ior, reduce_to_mskc};

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d).unwrap()
    }

    #[test]
    fn alpha_gap_shape_and_alpha() {
        let bundle = gen_alpha_gap(&r(1, 10), &r(1, 4)).unwrap();
        let ci = bundle.contract().unwrap();
        assert_eq!(ci.agents.len(), 10);
        let (inst, _) = reduce_to_mskc(ci).unwrap();
        assert_eq!(inst.items[0].real_choices()[0].cost, r(19, 10));
        assert_eq!(compute_ior(&inst).unwrap().alpha, r(19, 1));
    }

    #[test]
    fn alpha_gap_small_sizes_fill_exactly() {
        let bundle = gen_alpha_gap(&r(1, 10), &r(1, 4)).unwrap();
        let ci = bundle.contract().unwrap();
        // sum_{j<i} a_j + b_i = 1 for every i, and b_i + a_k > 1 for i < k.
        let sizes: Vec<Vec<Rational>> = ci
            .agents
            .iter()
            .map(|ag| ag.actions()[0].dist.support().cloned().collect())
            .collect();
        let mut prefix = Rational::zero();
        for (i, pair) in sizes.iter().enumerate() {
            let (a, b) = (&pair[0], &pair[1]);
            assert_eq!(&prefix + b, Rational::one(), "row {i}");
            for later in sizes.iter().skip(i + 1) {
                assert!(b + &later[0] > Rational::one());
            }
            prefix += a;
        }
    }

    #[test]
    fn alpha_gap_edge_case_n3() {
        let bundle = gen_alpha_gap(&r(1, 3), &r(1, 3)).unwrap();
        let ci = bundle.contract().unwrap();
        assert_eq!(ci.agents.len(), 3);
        // b_1 = 1: the empty prefix sum.
        assert_eq!(ci.agents[0].actions()[0].dist.max_support(), &r(1, 1));
    }

    #[test]
    fn fully_vs_stop_probabilities_sum() {
        let bundle = gen_fully_vs_stop(&r(1, 5), &r(1, 4), 3).unwrap();
        let inst = bundle.mskc().unwrap();
        assert_eq!(inst.items.len(), 15);
        assert_eq!(bundle.notes.get("ior_alpha").unwrap(), "1874");
        let alpha = compute_ior(inst).unwrap().alpha;
        assert_eq!(alpha, r(1874, 1));
    }

    #[test]
    fn fully_vs_stop_alpha_at_half() {
        let bundle = gen_fully_vs_stop(&r(1, 2), &r(1, 4), 1).unwrap();
        let alpha = compute_ior(bundle.mskc().unwrap()).unwrap().alpha;
        assert_eq!(alpha, r(119, 1));
    }

    #[test]
    fn moment_match_probabilities() {
        // Sum p_j = eps exactly, all non-negative at a small delta.
        for k in 1..=3 {
            let probs = solve_moment_match(k, &r(1, 10), &r(1, 10_000)).unwrap();
            assert_eq!(probs.len(), k + 1);
            assert_eq!(probs.iter().sum::<Rational>(), r(1, 10));
        }
    }

    #[test]
    fn moment_match_matches_raw_moments() {
        for k in 1..=3 {
            let eps = r(1, 10);
            let delta = r(1, 10_000);
            let t1 = info_gap_type1(k, &eps).unwrap();
            let t2 = info_gap_type2(k, &eps, &delta).unwrap();
            for rdeg in 1..=k {
                assert_eq!(
                    t1.raw_moment(rdeg as u32),
                    t2.raw_moment(rdeg as u32),
                    "k={k} r={rdeg}"
                );
            }
            assert_eq!(t1.cdf_at(&r(1, 1)), Rational::one());
            assert_eq!(t2.cdf_at(&r(1, 1)), Rational::one());
            // Higher moments differ: the distributions are distinct.
            assert_ne!(t1.raw_moment(k as u32 + 1), t2.raw_moment(k as u32 + 1));
        }
    }

    #[test]
    fn moment_match_rejects_large_delta() {
        assert!(matches!(
            solve_moment_match(3, &r(1, 10), &r(1, 2)),
            Err(Error::DeltaTooLarge { .. })
        ));
    }

    #[test]
    fn info_gap_warmup_table() {
        let bundle = gen_info_gap(0, &r(1, 10), &r(1, 1000), 2).unwrap();
        let inst = bundle.mskc().unwrap();
        assert_eq!(inst.items.len(), 4);
        let bad = &inst.items[2].real_choices()[0].dist;
        // {eps/2 w.p. 1 - eps/(2-eps), 1 w.p. eps/(2-eps)}
        assert_eq!(bad.atoms()[0].0, r(1, 20));
        assert_eq!(bad.atoms()[1], (r(1, 1), r(1, 19)));
        // First moments agree with the good type.
        let good = &inst.items[0].real_choices()[0].dist;
        assert_eq!(good.mean(), bad.mean());
    }

    #[test]
    fn info_gap_cdf_at_budget_is_one() {
        let bundle = gen_info_gap(2, &r(1, 10), &r(1, 10_000), 5).unwrap();
        let inst = bundle.mskc().unwrap();
        assert_eq!(inst.items.len(), 25);
        for item in &inst.items {
            assert_eq!(item.real_choices()[0].dist.cdf_at(&r(1, 1)), Rational::one());
        }
    }

    #[test]
    fn lp_gap_parameters() {
        let bundle = gen_lp_gap(&r(1, 10), 5).unwrap();
        let inst = bundle.mskc().unwrap();
        assert_eq!(inst.items.len(), 5);
        assert_eq!(compute_ior(inst).unwrap().alpha, r(9, 1));
        assert!(gen_lp_gap(&r(1, 10), 4).is_err());
    }

    #[test]
    fn bounded_gap_parameters() {
        let bundle = gen_bounded_gap(&r(1, 10), 6).unwrap();
        let inst = bundle.mskc().unwrap();
        assert_eq!(compute_ior(inst).unwrap().alpha, r(199, 1));
        // Max size 1/2 stays clear of 1 - delta for delta <= 1/2.
        assert_eq!(inst.max_support(), r(1, 2));
    }

    #[test]
    fn random_is_reproducible() {
        let a = gen_random(4, 2, 3, 7, &RandomProfile::Generic).unwrap();
        let b = gen_random(4, 2, 3, 7, &RandomProfile::Generic).unwrap();
        assert_eq!(a, b);
        let c = gen_random(4, 2, 3, 8, &RandomProfile::Generic).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_positive_w_profile_has_ior() {
        for seed in 0..20 {
            let bundle = gen_random(5, 3, 3, seed, &RandomProfile::PositiveW).unwrap();
            assert!(compute_ior(bundle.mskc().unwrap()).is_ok());
        }
    }

    #[test]
    fn random_bounded_profile_respects_cap() {
        let delta = r(1, 4);
        for seed in 0..20 {
            let bundle = gen_random(4, 2, 3, seed, &RandomProfile::BoundedSize(delta.clone()))
                .unwrap();
            let inst = bundle.mskc().unwrap();
            let cap = Rational::one() - &delta;
            assert!(inst.max_support() <= cap);
            // Premise check: mass above 1 - delta is zero.
            for item in &inst.items {
                for ch in item.real_choices() {
                    assert!(ch.dist.cdf_at(&cap) == Rational::one());
                }
            }
        }
    }

    #[test]
    fn every_generator_regenerates_bit_exactly() {
        let bundles = vec![
            gen_alpha_gap(&r(1, 10), &r(1, 4)).unwrap(),
            gen_fully_vs_stop(&r(1, 5), &r(1, 4), 2).unwrap(),
            gen_info_gap(2, &r(1, 10), &r(1, 10_000), 3).unwrap(),
            gen_lp_gap(&r(1, 10), 5).unwrap(),
            gen_bounded_gap(&r(1, 10), 6).unwrap(),
            gen_random(4, 2, 3, 11, &RandomProfile::BoundedSize(r(1, 4))).unwrap(),
            gen_random_contract(3, 2, 2, 11).unwrap(),
        ];
        for bundle in bundles {
            assert_eq!(bundle.regenerate().unwrap(), bundle, "{}", bundle.family);
        }
    }

    #[test]
    fn json_round_trip() {
        let bundle = gen_info_gap(1, &r(1, 10), &r(1, 1000), 2).unwrap();
        let text = to_json(&bundle);
        let back = from_json(&text).unwrap();
        assert_eq!(back, bundle);

        let contract = gen_alpha_gap(&r(1, 3), &r(1, 3)).unwrap();
        let back = from_json(&to_json(&contract)).unwrap();
        assert_eq!(back, contract);
    }

    #[test]
    fn json_parse_errors_name_the_item() {
        let text = r#"{
            "family": "custom", "params": {}, "budget": "1",
            "items": [
                {"value": "1", "choices": [{"cost": "0", "dist": [["0", "1"]]}]},
                {"value": "1", "choices": [{"cost": "0", "dist": [["0", "9/10"]]}]}
            ]
        }"#;
        let err = from_json(text).unwrap_err();
        assert!(err.to_string().contains("item 1"), "{err}");

        let bad_rat = r#"{"family": "x", "budget": "1", "items": []}"#;
        assert!(from_json(bad_rat).is_ok());
        let no_body = r#"{"family": "x", "budget": "1"}"#;
        assert!(from_json(no_body).is_err());
    }

    #[test]
    fn exact_rational_parse_in_json() {
        let text = r#"{
            "family": "custom", "budget": "1",
            "items": [{"value": "1", "choices": [{"cost": "1/3", "dist": [["1/3", "1"]]}]}]
        }"#;
        let bundle = from_json(text).unwrap();
        let inst = bundle.mskc().unwrap();
        assert_eq!(inst.items[0].real_choices()[0].cost, r(1, 3));
    }
}
