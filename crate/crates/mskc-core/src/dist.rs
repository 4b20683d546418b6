//! Finite size distributions with exact rational atoms.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::rational::Rational;

/// Finite-support distribution over job sizes. Atoms are sorted by size
/// ascending, sizes are distinct (duplicates are merged on construction by
/// summing probabilities) and probabilities are positive and sum to one
/// exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(Rational, Rational)>", into = "Vec<(Rational, Rational)>")]
pub struct FiniteDistribution {
    atoms: Vec<(Rational, Rational)>,
}

impl FiniteDistribution {
    pub fn new(mut atoms: Vec<(Rational, Rational)>) -> Result<Self, Error> {
        if atoms.is_empty() {
            return Err(Error::BadDistribution("no atoms".into()));
        }
        for (size, prob) in &atoms {
            if size.is_negative() {
                return Err(Error::BadDistribution(format!("negative size {size}")));
            }
            if !prob.is_positive() {
                return Err(Error::BadDistribution(format!(
                    "atom at {size} has non-positive probability {prob}"
                )));
            }
        }
        atoms.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<(Rational, Rational)> = Vec::with_capacity(atoms.len());
        for (size, prob) in atoms {
            match merged.last_mut() {
                Some((s, p)) if *s == size => *p += prob,
                _ => merged.push((size, prob)),
            }
        }
        let total: Rational = merged.iter().map(|(_, p)| p).sum();
        if total != Rational::one() {
            return Err(Error::BadDistribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(FiniteDistribution { atoms: merged })
    }

    /// Deterministic size.
    pub fn point(size: Rational) -> Self {
        FiniteDistribution {
            atoms: vec![(size, Rational::one())],
        }
    }

    /// Two-point distribution `{lo w.p. 1-p_hi, hi w.p. p_hi}`.
    pub fn two_point(lo: Rational, hi: Rational, p_hi: Rational) -> Result<Self, Error> {
        FiniteDistribution::new(vec![(lo, Rational::one() - &p_hi), (hi, p_hi)])
    }

    pub fn atoms(&self) -> &[(Rational, Rational)] {
        &self.atoms
    }

    pub fn support(&self) -> impl Iterator<Item = &Rational> {
        self.atoms.iter().map(|(s, _)| s)
    }

    pub fn max_support(&self) -> &Rational {
        &self.atoms.last().expect("non-empty").0
    }

    /// Exact `Pr[s <= b]`.
    pub fn cdf_at(&self, b: &Rational) -> Rational {
        self.atoms
            .iter()
            .take_while(|(s, _)| s <= b)
            .map(|(_, p)| p)
            .sum()
    }

    /// Exact truncated mean `E[min(s, t)]`; requires `t > 0`.
    pub fn truncated_mean(&self, t: &Rational) -> Rational {
        debug_assert!(t.is_positive(), "truncation point must be positive");
        let mut acc = Rational::zero();
        for (s, p) in &self.atoms {
            let clipped = if s <= t { s } else { t };
            acc += clipped * p;
        }
        acc
    }

    /// Exact raw moment `E[s^r]` for `r >= 1`.
    pub fn raw_moment(&self, r: u32) -> Rational {
        assert!(r >= 1, "moment order must be at least 1");
        self.atoms.iter().map(|(s, p)| s.pow(r) * p).sum()
    }

    pub fn mean(&self) -> Rational {
        self.raw_moment(1)
    }

    /// Rounds every atom down to a multiple of `delta`, merging collisions.
    pub fn round_down_to(&self, delta: &Rational) -> FiniteDistribution {
        let atoms = self
            .atoms
            .iter()
            .map(|(s, p)| {
                let k = (s / delta).floor_int();
                let rounded = Rational::from_big(k, 1.into()).expect("unit denominator") * delta;
                (rounded, p.clone())
            })
            .collect();
        FiniteDistribution::new(atoms).expect("rounding preserves validity")
    }
}

impl TryFrom<Vec<(Rational, Rational)>> for FiniteDistribution {
    type Error = Error;
    fn try_from(atoms: Vec<(Rational, Rational)>) -> Result<Self, Error> {
        FiniteDistribution::new(atoms)
    }
}

impl From<FiniteDistribution> for Vec<(Rational, Rational)> {
    fn from(d: FiniteDistribution) -> Self {
        d.atoms
    }
}
