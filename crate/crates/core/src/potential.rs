//! Interaction potentials given by their Fourier coefficients `v̂(k)`.
//!
//! Convention: `v̂(q) = ∫ v(x) e^{-iqx} dx`. Every potential here is even and
//! of positive type. A scale `Λ` turns `v̂` into `v̂_Λ(k) = v̂(k/Λ)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ModeSet, Momentum, TWO_PI_SQ};

/// One tabulated coefficient as it appears in JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub n: Vec<i64>,
    pub v: f64,
}

fn default_scale() -> f64 {
    1.0
}

/// Wire format; validated into [`PotentialSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RawPotential {
    Gaussian {
        g: f64,
        s: f64,
        #[serde(default = "default_scale")]
        lambda_scale: f64,
    },
    Tabulated {
        v0: f64,
        entries: Vec<Entry>,
        #[serde(default = "default_scale")]
        lambda_scale: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    /// `v̂(k) = g·exp(-k²/(2s²))`.
    Gaussian { g: f64, s: f64 },
    Tabulated {
        v0: f64,
        dim: Option<usize>,
        table: BTreeMap<Momentum, f64>,
    },
}

/// A validated potential: even, nonnegative, not identically zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPotential", into = "RawPotential")]
pub struct PotentialSpec {
    kind: Kind,
    lambda_scale: f64,
}

fn finite_nonneg(field: &str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            field,
            format!("must be finite and nonnegative, got {x}"),
        ))
    }
}

fn finite_pos(field: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            field,
            format!("must be finite and positive, got {x}"),
        ))
    }
}

impl PotentialSpec {
    pub fn gaussian(g: f64, s: f64) -> Result<Self> {
        Self::try_from(RawPotential::Gaussian {
            g,
            s,
            lambda_scale: 1.0,
        })
    }

    /// Tabulated potential. Entries are mirrored to `-n` when only one sign
    /// is given; conflicting mirrored values are rejected.
    pub fn tabulated(v0: f64, entries: &[(Momentum, f64)]) -> Result<Self> {
        let entries = entries
            .iter()
            .map(|(m, v)| Entry {
                n: m.n().to_vec(),
                v: *v,
            })
            .collect();
        Self::try_from(RawPotential::Tabulated {
            v0,
            entries,
            lambda_scale: 1.0,
        })
    }

    /// Parses and validates; value errors come back as [`Error::InvalidField`].
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawPotential = serde_json::from_str(text)?;
        Self::try_from(raw)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("potential always serializes")
    }

    pub fn with_scale(&self, lambda_scale: f64) -> Result<Self> {
        finite_pos("lambda_scale", lambda_scale)?;
        Ok(PotentialSpec {
            kind: self.kind.clone(),
            lambda_scale,
        })
    }

    pub fn lambda_scale(&self) -> f64 {
        self.lambda_scale
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.kind, Kind::Gaussian { .. })
    }

    /// `(g, s)` for the gaussian kind.
    pub fn gaussian_params(&self) -> Option<(f64, f64)> {
        match self.kind {
            Kind::Gaussian { g, s } => Some((g, s)),
            Kind::Tabulated { .. } => None,
        }
    }

    /// Dimension fixed by the table entries, if any.
    pub fn table_dim(&self) -> Option<usize> {
        match &self.kind {
            Kind::Tabulated { dim, .. } => *dim,
            Kind::Gaussian { .. } => None,
        }
    }

    /// `v̂(0)`, unaffected by the scale.
    pub fn vhat0(&self) -> f64 {
        match &self.kind {
            Kind::Gaussian { g, .. } => *g,
            Kind::Tabulated { v0, .. } => *v0,
        }
    }

    /// Gaussian value from an integer `|n|²`; radial shortcut for lattice sums.
    pub fn vhat_norm2(&self, n2: i64) -> f64 {
        match &self.kind {
            Kind::Gaussian { g, s } => {
                let ks = self.lambda_scale * s;
                g * (-(TWO_PI_SQ * n2 as f64) / (2.0 * ks * ks)).exp()
            }
            Kind::Tabulated { .. } => panic!("vhat_norm2 is defined for radial potentials only"),
        }
    }

    /// `v̂_Λ(k) = v̂(k/Λ)`.
    pub fn vhat(&self, k: &Momentum) -> f64 {
        match &self.kind {
            Kind::Gaussian { .. } => self.vhat_norm2(k.norm2()),
            Kind::Tabulated { v0, table, .. } => {
                if k.is_zero() {
                    return *v0;
                }
                match self.unscale(k) {
                    Some(m) => table.get(&m).copied().unwrap_or(0.0),
                    None => 0.0,
                }
            }
        }
    }

    /// `n/Λ` when it is an integer vector, else `None`.
    fn unscale(&self, k: &Momentum) -> Option<Momentum> {
        let l = self.lambda_scale;
        if l == 1.0 {
            return Some(*k);
        }
        let mut out = Vec::with_capacity(k.dim());
        for &x in k.n() {
            let q = x as f64 / l;
            let r = q.round();
            if r * l != x as f64 {
                return None;
            }
            out.push(r as i64);
        }
        Momentum::new(&out).ok()
    }

    /// Nonzero momenta where `v̂_Λ > 0`. Gaussians have unbounded support.
    pub fn support(&self) -> Result<ModeSet> {
        match &self.kind {
            Kind::Gaussian { .. } => Err(Error::UnboundedSupport),
            Kind::Tabulated { dim, table, .. } => {
                let dim = dim.unwrap_or(1);
                let l = self.lambda_scale;
                let mut modes = Vec::new();
                for (m, v) in table {
                    if *v <= 0.0 {
                        continue;
                    }
                    let scaled: Vec<f64> = m.n().iter().map(|&x| x as f64 * l).collect();
                    if scaled.iter().all(|x| x.fract() == 0.0) {
                        let n: Vec<i64> = scaled.iter().map(|&x| x as i64).collect();
                        let k = Momentum::new(&n)?;
                        if self.unscale(&k) == Some(*m) {
                            modes.push(k);
                        }
                    }
                }
                ModeSet::from_list(dim, modes)
            }
        }
    }

    /// Tabulated support united with its pairwise sums: the smallest domain on
    /// which every closed-form sum is exact.
    pub fn exact_domain(&self) -> Result<ModeSet> {
        let s = self.support()?;
        Ok(crate::lattice::sum_closure(&s))
    }
}

impl TryFrom<RawPotential> for PotentialSpec {
    type Error = Error;

    fn try_from(raw: RawPotential) -> Result<Self> {
        match raw {
            RawPotential::Gaussian { g, s, lambda_scale } => {
                finite_pos("g", g)?;
                finite_pos("s", s)?;
                finite_pos("lambda_scale", lambda_scale)?;
                Ok(PotentialSpec {
                    kind: Kind::Gaussian { g, s },
                    lambda_scale,
                })
            }
            RawPotential::Tabulated {
                v0,
                entries,
                lambda_scale,
            } => {
                finite_nonneg("v0", v0)?;
                finite_pos("lambda_scale", lambda_scale)?;
                let mut dim = None;
                let mut table = BTreeMap::new();
                for e in &entries {
                    let m = Momentum::new(&e.n).map_err(|_| {
                        Error::invalid("entries.n", format!("bad momentum {:?}", e.n))
                    })?;
                    if *dim.get_or_insert(m.dim()) != m.dim() {
                        return Err(Error::invalid("entries.n", "mixed dimensions"));
                    }
                    if m.is_zero() {
                        return Err(Error::invalid("entries.n", "zero momentum belongs in v0"));
                    }
                    finite_nonneg("entries.v", e.v)?;
                    for key in [m, -m] {
                        if let Some(old) = table.insert(key, e.v) {
                            if old != e.v {
                                return Err(Error::invalid(
                                    "entries.v",
                                    format!("v̂ must be even, conflicting values at {key}"),
                                ));
                            }
                        }
                    }
                }
                if v0 == 0.0 && table.values().all(|&v| v == 0.0) {
                    return Err(Error::invalid("entries", "potential vanishes identically"));
                }
                Ok(PotentialSpec {
                    kind: Kind::Tabulated { v0, dim, table },
                    lambda_scale,
                })
            }
        }
    }
}

impl From<PotentialSpec> for RawPotential {
    fn from(p: PotentialSpec) -> RawPotential {
        match p.kind {
            Kind::Gaussian { g, s } => RawPotential::Gaussian {
                g,
                s,
                lambda_scale: p.lambda_scale,
            },
            Kind::Tabulated { v0, table, .. } => RawPotential::Tabulated {
                v0,
                entries: table
                    .into_iter()
                    .filter(|(m, _)| *m > -*m)
                    .map(|(m, v)| Entry {
                        n: m.n().to_vec(),
                        v,
                    })
                    .collect(),
                lambda_scale: p.lambda_scale,
            },
        }
    }
}

/// Convenience for tests and examples: `v̂(±2πn_i) = v_i` in `dim` dimensions.
pub fn band_limited(v0: f64, dim: usize, entries: &[(&[i64], f64)]) -> Result<PotentialSpec> {
    let mut list = Vec::with_capacity(entries.len());
    for (n, v) in entries {
        if n.len() != dim {
            return Err(Error::invalid("entries.n", "dimension mismatch"));
        }
        list.push((Momentum::new(n)?, *v));
    }
    PotentialSpec::tabulated(v0, &list)
}
