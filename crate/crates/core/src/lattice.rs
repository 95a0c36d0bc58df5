//! Momenta of the dual lattice (2πℤ)ᵈ and finite mode sets.
//!
//! A momentum is stored as its integer coordinates `n`; the physical value
//! `k = 2πn` only appears when a float is requested.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const TWO_PI: f64 = std::f64::consts::TAU;
/// (2π)², the factor converting integer `n²` to `k²`.
pub const TWO_PI_SQ: f64 = TWO_PI * TWO_PI;

/// Default guard on the number of modes produced by [`enumerate_ball`].
pub const DEFAULT_MODE_LIMIT: u64 = 5_000_000;

fn check_dim(dim: usize) -> Result<()> {
    if (1..=3).contains(&dim) {
        Ok(())
    } else {
        Err(Error::invalid(
            "dim",
            format!("must be 1, 2 or 3, got {dim}"),
        ))
    }
}

/// A point `2πn` of the dual lattice, `n ∈ ℤᵈ`.
///
/// Unused trailing coordinates are zero, so the derived ordering is
/// lexicographic on `n` for momenta of equal dimension.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Momentum {
    n: [i64; 3],
    dim: u8,
}

impl Momentum {
    pub fn new(n: &[i64]) -> Result<Self> {
        check_dim(n.len())?;
        let mut c = [0; 3];
        c[..n.len()].copy_from_slice(n);
        Ok(Momentum {
            n: c,
            dim: n.len() as u8,
        })
    }

    pub fn zero(dim: usize) -> Self {
        assert!((1..=3).contains(&dim), "dimension must be 1, 2 or 3");
        Momentum {
            n: [0; 3],
            dim: dim as u8,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn n(&self) -> &[i64] {
        &self.n[..self.dim as usize]
    }

    pub fn is_zero(&self) -> bool {
        self.n == [0; 3]
    }

    /// Integer squared norm `|n|²`.
    pub fn norm2(&self) -> i64 {
        self.n.iter().map(|x| x * x).sum()
    }

    /// Physical `k² = (2π)²|n|²`.
    pub fn k2(&self) -> f64 {
        TWO_PI_SQ * self.norm2() as f64
    }

    pub fn k(&self) -> f64 {
        self.k2().sqrt()
    }
}

impl Add for Momentum {
    type Output = Momentum;
    fn add(self, rhs: Momentum) -> Momentum {
        debug_assert_eq!(self.dim, rhs.dim);
        Momentum {
            n: [
                self.n[0] + rhs.n[0],
                self.n[1] + rhs.n[1],
                self.n[2] + rhs.n[2],
            ],
            dim: self.dim,
        }
    }
}

impl Sub for Momentum {
    type Output = Momentum;
    fn sub(self, rhs: Momentum) -> Momentum {
        self + (-rhs)
    }
}

impl Neg for Momentum {
    type Output = Momentum;
    fn neg(self) -> Momentum {
        Momentum {
            n: [-self.n[0], -self.n[1], -self.n[2]],
            dim: self.dim,
        }
    }
}

impl fmt::Debug for Momentum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.n())
    }
}

impl fmt::Display for Momentum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.n().iter().map(|x| x.to_string()).collect();
        write!(f, "({})", parts.join(" "))
    }
}

impl Serialize for Momentum {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.n().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Momentum {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<i64>::deserialize(d)?;
        Momentum::new(&v).map_err(serde::de::Error::custom)
    }
}

/// How a mode set was produced; carried along for reporting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Generation {
    Ball { cutoff: f64 },
    List,
    Closure,
}

/// A finite, negation-closed set of nonzero momenta in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSet {
    dim: usize,
    modes: Vec<Momentum>,
    rule: Generation,
}

impl ModeSet {
    pub fn empty(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(ModeSet {
            dim,
            modes: Vec::new(),
            rule: Generation::List,
        })
    }

    /// Validates an explicit list: no zero, no duplicates, closed under negation.
    pub fn from_list(dim: usize, modes: Vec<Momentum>) -> Result<Self> {
        check_dim(dim)?;
        let mut seen = BTreeSet::new();
        for m in &modes {
            if m.dim() != dim {
                return Err(Error::invalid(
                    "modes",
                    format!("{m} has dimension {}, expected {dim}", m.dim()),
                ));
            }
            if m.is_zero() {
                return Err(Error::invalid("modes", "the zero momentum is not a mode"));
            }
            if !seen.insert(*m) {
                return Err(Error::invalid("modes", format!("duplicate mode {m}")));
            }
        }
        for m in &seen {
            if !seen.contains(&-*m) {
                return Err(Error::invalid(
                    "modes",
                    format!(
                        "set is not closed under negation: {m} present, {} missing",
                        -*m
                    ),
                ));
            }
        }
        Ok(ModeSet {
            dim,
            modes: seen.into_iter().collect(),
            rule: Generation::List,
        })
    }

    /// Parses a JSON array of integer vectors.
    pub fn from_json(text: &str) -> Result<Self> {
        let modes: Vec<Momentum> = serde_json::from_str(text)?;
        let dim = match modes.first() {
            Some(m) => m.dim(),
            None => return Err(Error::invalid("modes", "empty mode list")),
        };
        ModeSet::from_list(dim, modes)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.modes).expect("momenta always serialize")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[Momentum] {
        &self.modes
    }

    pub fn iter(&self) -> impl Iterator<Item = &Momentum> {
        self.modes.iter()
    }

    pub fn rule(&self) -> &Generation {
        &self.rule
    }

    pub fn contains(&self, k: &Momentum) -> bool {
        self.modes.binary_search(k).is_ok()
    }

    pub fn position(&self, k: &Momentum) -> Option<usize> {
        self.modes.binary_search(k).ok()
    }

    pub fn is_superset_of(&self, other: &ModeSet) -> bool {
        other.iter().all(|m| self.contains(m))
    }

    pub fn union(&self, other: &ModeSet) -> ModeSet {
        let set: BTreeSet<Momentum> = self.iter().chain(other.iter()).copied().collect();
        ModeSet {
            dim: self.dim,
            modes: set.into_iter().collect(),
            rule: Generation::List,
        }
    }

    /// Largest `|n|²` in the set, 0 when empty.
    pub fn max_norm2(&self) -> i64 {
        self.modes.iter().map(Momentum::norm2).max().unwrap_or(0)
    }

    pub fn summary(&self) -> String {
        match &self.rule {
            Generation::Ball { cutoff } => {
                format!(
                    "ball d={} cutoff={} ({} modes)",
                    self.dim,
                    cutoff,
                    self.len()
                )
            }
            Generation::List => format!("list d={} ({} modes)", self.dim, self.len()),
            Generation::Closure => format!("closure d={} ({} modes)", self.dim, self.len()),
        }
    }
}

/// All `k = 2πn` with `n ≠ 0` and `|k| ≤ cutoff`, lexicographic on `n`.
pub fn enumerate_ball(dim: usize, cutoff: f64) -> Result<ModeSet> {
    enumerate_ball_with_limit(dim, cutoff, DEFAULT_MODE_LIMIT)
}

pub fn enumerate_ball_with_limit(dim: usize, cutoff: f64, limit: u64) -> Result<ModeSet> {
    check_dim(dim)?;
    if !(cutoff.is_finite() && cutoff > 0.0) {
        return Err(Error::invalid(
            "cutoff",
            format!("must be positive, got {cutoff}"),
        ));
    }
    let r = (cutoff / TWO_PI).floor() as i64;
    let side = 2 * r as u64 + 1;
    let bound = side.saturating_pow(dim as u32) - 1;
    let c2 = cutoff * cutoff;
    if bound > limit {
        // The cube bounds the ball loosely; count exactly before refusing.
        let exact = count_ball(dim, r, c2);
        if exact > limit {
            return Err(Error::SizeLimit {
                what: "momentum ball",
                size: exact,
                limit,
            });
        }
    }
    let mut modes = Vec::new();
    for_each_in_cube(dim, r, |n| {
        let m = Momentum::new(n).expect("dim checked");
        if !m.is_zero() && TWO_PI_SQ * m.norm2() as f64 <= c2 {
            modes.push(m);
        }
    });
    Ok(ModeSet {
        dim,
        modes,
        rule: Generation::Ball { cutoff },
    })
}

fn count_ball(dim: usize, r: i64, c2: f64) -> u64 {
    let mut count = 0u64;
    for_each_in_cube(dim, r, |n| {
        let n2: i64 = n.iter().map(|x| x * x).sum();
        if n2 != 0 && TWO_PI_SQ * n2 as f64 <= c2 {
            count += 1;
        }
    });
    count
}

/// Visits `[-r, r]^dim` in lexicographic order.
fn for_each_in_cube(dim: usize, r: i64, mut f: impl FnMut(&[i64])) {
    let mut n = vec![-r; dim];
    loop {
        f(&n);
        let mut i = dim;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if n[i] < r {
                n[i] += 1;
                break;
            }
            n[i] = -r;
        }
    }
}

/// `S ∪ {a + b : a, b ∈ S, a + b ≠ 0}`.
pub fn sum_closure(s: &ModeSet) -> ModeSet {
    let mut set: BTreeSet<Momentum> = s.iter().copied().collect();
    for a in s.iter() {
        for b in s.iter() {
            let c = *a + *b;
            if !c.is_zero() {
                set.insert(c);
            }
        }
    }
    ModeSet {
        dim: s.dim,
        modes: set.into_iter().collect(),
        rule: Generation::Closure,
    }
}

/// Ordinal lookup for a list of momenta.
#[derive(Clone, Debug)]
pub struct MomentumIndex {
    map: HashMap<Momentum, usize>,
}

impl MomentumIndex {
    pub fn new<'a>(modes: impl IntoIterator<Item = &'a Momentum>) -> Self {
        let map = modes
            .into_iter()
            .enumerate()
            .map(|(i, m)| (*m, i))
            .collect();
        MomentumIndex { map }
    }

    pub fn get(&self, k: &Momentum) -> Option<usize> {
        self.map.get(k).copied()
    }
}
