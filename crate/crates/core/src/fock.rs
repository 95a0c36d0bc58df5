//! Occupation-number bases and second-quantized building blocks.
//!
//! A state is a vector of occupations over an ordered list of modes.
//! Operators are assembled column by column: each basis state is acted on by
//! monomials of creation and annihilation operators, and images outside the
//! basis are dropped.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{ModeSet, Momentum};
use crate::linalg::CsrMatrix;

/// Environment variable overriding [`DEFAULT_DIM_LIMIT`].
pub const DIM_LIMIT_ENV: &str = "BINDING_BENCH_DIM_LIMIT";
pub const DEFAULT_DIM_LIMIT: u64 = 2_000_000;

/// Basis-size guard, read from the environment.
pub fn dim_limit() -> u64 {
    std::env::var(DIM_LIMIT_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_DIM_LIMIT)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    /// Total momentum `Σ n_k k = 0` only.
    ZeroMomentum,
    /// Every momentum sector.
    All,
}

/// Ordered states over a mode list, with the reverse index.
#[derive(Clone, Debug)]
pub struct OccupationBasis {
    modes: Vec<Momentum>,
    states: Vec<Box<[u16]>>,
    index: HashMap<Box<[u16]>, u32>,
}

impl OccupationBasis {
    fn from_states(modes: Vec<Momentum>, states: Vec<Box<[u16]>>) -> Self {
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        OccupationBasis {
            modes,
            states,
            index,
        }
    }

    pub fn modes(&self) -> &[Momentum] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, i: usize) -> &[u16] {
        &self.states[i]
    }

    pub fn states(&self) -> impl Iterator<Item = &[u16]> {
        self.states.iter().map(|s| &s[..])
    }

    pub fn position(&self, occ: &[u16]) -> Option<usize> {
        self.index.get(occ).map(|&i| i as usize)
    }

    pub fn particles(&self, i: usize) -> u32 {
        self.states[i].iter().map(|&n| n as u32).sum()
    }

    pub fn total_momentum(&self, i: usize) -> Momentum {
        let dim = self.modes[0].dim();
        self.states[i]
            .iter()
            .zip(&self.modes)
            .fold(Momentum::zero(dim), |acc, (&n, k)| acc + scale(k, n as i64))
    }

    /// Applies `f` to every occupation and returns the diagonal.
    pub fn diagonal(&self, f: impl Fn(&[u16]) -> f64 + Sync) -> Vec<f64> {
        self.states.par_iter().map(|s| f(s)).collect()
    }

    /// Assembles `Σ_column Σ_image` from a per-state generator.
    ///
    /// `gen(state, emit)` calls `emit(image_occupation, amplitude)` for each
    /// term of the operator applied to `state`.
    pub fn assemble<G>(&self, gen: G) -> CsrMatrix
    where
        G: Fn(&[u16], &mut dyn FnMut(&[u16], f64)) + Sync,
    {
        let cols: Vec<Vec<(usize, usize, f64)>> = self
            .states
            .par_iter()
            .enumerate()
            .map(|(j, s)| {
                let mut out = Vec::new();
                gen(s, &mut |img: &[u16], amp: f64| {
                    if amp != 0.0 {
                        if let Some(i) = self.position(img) {
                            out.push((i, j, amp));
                        }
                    }
                });
                out
            })
            .collect();
        CsrMatrix::from_triplets(self.len(), cols.into_iter().flatten())
    }
}

fn scale(k: &Momentum, c: i64) -> Momentum {
    let n: Vec<i64> = k.n().iter().map(|x| x * c).collect();
    Momentum::new(&n).expect("dimension preserved")
}

/// Applies `a*_{c₁}…a*_{c_p} a_{a₁}…a_{a_q}` to `occ` in place.
///
/// Annihilators act right to left, then creators right to left. Returns the
/// bosonic amplitude, or `None` when an annihilator hits an empty mode.
pub fn apply_monomial(occ: &mut [u16], create: &[usize], annihilate: &[usize]) -> Option<f64> {
    let mut amp = 1.0;
    for &a in annihilate.iter().rev() {
        if occ[a] == 0 {
            return None;
        }
        amp *= (occ[a] as f64).sqrt();
        occ[a] -= 1;
    }
    for &c in create.iter().rev() {
        occ[c] += 1;
        amp *= (occ[c] as f64).sqrt();
    }
    Some(amp)
}

/// Occupation vectors of exactly `total` particles in lexicographically
/// descending order, restricted to the requested sector.
fn enumerate_level(modes: &[Momentum], total: u32, sector: Sector, out: &mut Vec<Box<[u16]>>) {
    let mut occ = vec![0u16; modes.len()];
    fn rec(
        modes: &[Momentum],
        i: usize,
        left: u32,
        mom: [i64; 3],
        sector: Sector,
        occ: &mut Vec<u16>,
        out: &mut Vec<Box<[u16]>>,
    ) {
        if i + 1 == modes.len() {
            let mut m = mom;
            for (a, b) in m.iter_mut().zip(modes[i].n()) {
                *a += b * left as i64;
            }
            if sector == Sector::All || m == [0; 3] {
                occ[i] = left as u16;
                out.push(occ.clone().into_boxed_slice());
                occ[i] = 0;
            }
            return;
        }
        for n in (0..=left).rev() {
            let mut m = mom;
            for (a, b) in m.iter_mut().zip(modes[i].n()) {
                *a += b * n as i64;
            }
            occ[i] = n as u16;
            rec(modes, i + 1, left - n, m, sector, occ, out);
        }
        occ[i] = 0;
    }
    if modes.is_empty() {
        if total == 0 {
            out.push(Vec::new().into_boxed_slice());
        }
        return;
    }
    rec(modes, 0, total, [0; 3], sector, &mut occ, out);
}

/// Number of states of exactly `total` particles in the sector.
fn count_level(modes: &[Momentum], total: u32, sector: Sector) -> u64 {
    fn rec(
        modes: &[Momentum],
        i: usize,
        left: u32,
        mom: [i64; 3],
        sector: Sector,
        memo: &mut HashMap<(usize, u32, [i64; 3]), u64>,
    ) -> u64 {
        if i == modes.len() {
            return u64::from(left == 0 && (sector == Sector::All || mom == [0; 3]));
        }
        let key = (i, left, if sector == Sector::All { [0; 3] } else { mom });
        if let Some(&c) = memo.get(&key) {
            return c;
        }
        let mut c = 0u64;
        for n in 0..=left {
            let mut m = mom;
            for (a, b) in m.iter_mut().zip(modes[i].n()) {
                *a += b * n as i64;
            }
            c = c.saturating_add(rec(modes, i + 1, left - n, m, sector, memo));
        }
        memo.insert(key, c);
        c
    }
    rec(modes, 0, total, [0; 3], sector, &mut HashMap::new())
}

fn check_limit(what: &'static str, size: u64, limit: u64) -> Result<()> {
    if size > limit {
        Err(Error::SizeLimit { what, size, limit })
    } else {
        Ok(())
    }
}

/// Truncated excitation Fock space over a mode set `M` (condensate excluded).
#[derive(Clone, Debug)]
pub struct ExcitationBasis {
    mode_set: ModeSet,
    n_max: u32,
    sector: Sector,
    basis: OccupationBasis,
}

impl ExcitationBasis {
    /// States with at most `n_max` excitations, graded by excitation number
    /// and lexicographic within a grade. The vacuum is state 0.
    pub fn new(mode_set: &ModeSet, n_max: u32, sector: Sector) -> Result<Self> {
        Self::with_limit(mode_set, n_max, sector, dim_limit())
    }

    pub fn with_limit(mode_set: &ModeSet, n_max: u32, sector: Sector, limit: u64) -> Result<Self> {
        if n_max > u16::MAX as u32 {
            return Err(Error::invalid("n_max", "exceeds 65535"));
        }
        let modes = mode_set.modes().to_vec();
        let size = (0..=n_max).fold(0u64, |s, t| {
            s.saturating_add(count_level(&modes, t, sector))
        });
        check_limit("excitation basis", size, limit)?;
        let mut states = Vec::with_capacity(size as usize);
        for t in 0..=n_max {
            enumerate_level(&modes, t, sector, &mut states);
        }
        Ok(ExcitationBasis {
            mode_set: mode_set.clone(),
            n_max,
            sector,
            basis: OccupationBasis::from_states(modes, states),
        })
    }

    pub fn mode_set(&self) -> &ModeSet {
        &self.mode_set
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    pub fn basis(&self) -> &OccupationBasis {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Eigenvalues of the excitation number operator `𝒩`.
    pub fn number(&self) -> Vec<f64> {
        self.basis.diagonal(|s| s.iter().map(|&n| n as f64).sum())
    }

    /// `+1` on even excitation number, `-1` on odd.
    pub fn parity(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                if self.basis.particles(i).is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect()
    }
}

/// Fixed-`N` bosonic basis over `M ∪ {0}`; the condensate mode is index 0.
#[derive(Clone, Debug)]
pub struct NBodyBasis {
    particles: u32,
    sector: Sector,
    basis: OccupationBasis,
}

impl NBodyBasis {
    pub fn new(mode_set: &ModeSet, particles: u32, sector: Sector) -> Result<Self> {
        Self::with_limit(mode_set, particles, sector, dim_limit())
    }

    pub fn with_limit(
        mode_set: &ModeSet,
        particles: u32,
        sector: Sector,
        limit: u64,
    ) -> Result<Self> {
        if particles == 0 || particles > u16::MAX as u32 {
            return Err(Error::invalid("N", "must be between 1 and 65535"));
        }
        let mut modes = vec![Momentum::zero(mode_set.dim())];
        modes.extend_from_slice(mode_set.modes());
        let size = Self::dimension(&modes, particles, sector);
        check_limit("N-body basis", size, limit)?;
        let mut states = Vec::with_capacity(size as usize);
        enumerate_level(&modes, particles, sector, &mut states);
        Ok(NBodyBasis {
            particles,
            sector,
            basis: OccupationBasis::from_states(modes, states),
        })
    }

    /// Basis size without building it.
    pub fn dimension(modes: &[Momentum], particles: u32, sector: Sector) -> u64 {
        count_level(modes, particles, sector)
    }

    pub fn particles(&self) -> u32 {
        self.particles
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    pub fn basis(&self) -> &OccupationBasis {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }
}

/// Index of every momentum of the mode list, for momentum arithmetic.
pub(crate) fn mode_lookup(modes: &[Momentum]) -> HashMap<Momentum, usize> {
    modes.iter().enumerate().map(|(i, k)| (*k, i)).collect()
}

/// `½ Σ w(c₁ - a₁) a*_{c₁} a*_{c₂} a_{a₁} a_{a₂}` over all momentum-conserving
/// quadruples of the mode list, skipping zero transfer if asked.
pub fn two_body<W>(basis: &OccupationBasis, w: W, skip_zero_transfer: bool) -> CsrMatrix
where
    W: Fn(&Momentum) -> f64 + Sync,
{
    let modes = basis.modes();
    let lookup = mode_lookup(modes);
    basis.assemble(|s, emit| {
        let mut occ = s.to_vec();
        for a1 in 0..modes.len() {
            if s[a1] == 0 {
                continue;
            }
            for a2 in 0..modes.len() {
                if s[a2] < 1 + u16::from(a1 == a2) {
                    continue;
                }
                let total = modes[a1] + modes[a2];
                for (c1, k1) in modes.iter().enumerate() {
                    let q = *k1 - modes[a1];
                    if skip_zero_transfer && q.is_zero() {
                        continue;
                    }
                    let Some(&c2) = lookup.get(&(total - *k1)) else {
                        continue;
                    };
                    let wq = w(&q);
                    if wq == 0.0 {
                        continue;
                    }
                    occ.copy_from_slice(s);
                    if let Some(amp) = apply_monomial(&mut occ, &[c1, c2], &[a1, a2]) {
                        emit(&occ, 0.5 * wq * amp);
                    }
                }
            }
        }
    })
}
