//! Per-mode Bogoliubov quantities and the quasiparticle coefficient functions
//! `f`, `g₁`, `g₂` entering the second-order binding energy.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{ModeSet, Momentum};
use crate::potential::PotentialSpec;
use crate::summation::NeumaierSum;

/// `(ε, α, σ, γ)` of a single nonzero mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QpCoefficients {
    pub eps: f64,
    pub alpha: f64,
    pub sigma: f64,
    pub gamma: f64,
}

impl QpCoefficients {
    /// From `k²` and `v̂(k)`.
    ///
    /// `α` uses the subtraction-free form `v̂/(k² + v̂ + ε)` and `σ = 1/√(1-α²)`,
    /// so `σ² - γ² = 1` holds to rounding.
    pub fn from_values(k2: f64, v: f64) -> Self {
        let eps = (k2 * k2 + 2.0 * k2 * v).sqrt();
        let alpha = v / (k2 + v + eps);
        let sigma = 1.0 / (1.0 - alpha * alpha).sqrt();
        QpCoefficients {
            eps,
            alpha,
            sigma,
            gamma: alpha * sigma,
        }
    }

    /// The mode with `v̂ = 0`: free dispersion, no mixing.
    pub fn free(k2: f64) -> Self {
        QpCoefficients {
            eps: k2,
            alpha: 0.0,
            sigma: 1.0,
            gamma: 0.0,
        }
    }
}

pub fn qp_coeffs(spec: &PotentialSpec, k: &Momentum) -> Result<QpCoefficients> {
    if k.is_zero() {
        return Err(Error::Domain("Bogoliubov coefficients need k ≠ 0".into()));
    }
    Ok(QpCoefficients::from_values(k.k2(), spec.vhat(k)))
}

/// `e_B = -½ Σ α_k v̂(k)`.
pub fn e_b(modes: &ModeSet, spec: &PotentialSpec) -> f64 {
    let mut acc = NeumaierSum::default();
    for k in modes.iter() {
        let v = spec.vhat(k);
        acc += QpCoefficients::from_values(k.k2(), v).alpha * v;
    }
    -0.5 * acc.value()
}

/// `e_B` through the dispersion: `½ Σ (ε(k) - k² - v̂(k))`.
pub fn e_b_dispersion(modes: &ModeSet, spec: &PotentialSpec) -> f64 {
    let mut acc = NeumaierSum::default();
    for k in modes.iter() {
        let (k2, v) = (k.k2(), spec.vhat(k));
        acc += dispersion_excess(k2, v);
    }
    0.5 * acc.value()
}

/// `a·b` as an unevaluated sum `hi + lo`.
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let hi = a * b;
    (hi, a.mul_add(b, -hi))
}

/// `a + b` as an unevaluated sum `hi + lo`.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// `ε - k² - v̂` in double-double arithmetic. For `v̂ ≪ k²` the three terms
/// cancel to `O(v̂²/k²)`, which plain doubles resolve only to `O(ulp(k²))`.
fn dispersion_excess(k2: f64, v: f64) -> f64 {
    let (a, a_lo) = two_prod(k2, k2);
    let (b, b_lo) = two_prod(2.0 * k2, v);
    let (s, s_lo) = two_sum(a, b);
    let s_lo = s_lo + a_lo + b_lo;
    let e = s.sqrt();
    if e == 0.0 {
        return -v;
    }
    // Newton correction: (s + s_lo - e²) / 2e.
    let e_lo = ((-e).mul_add(e, s) + s_lo) / (2.0 * e);
    let (t, t_lo) = two_sum(e, -k2);
    let (u, u_lo) = two_sum(t, -v);
    u + (u_lo + t_lo + e_lo)
}

/// Coefficients of every mode in a set, plus on-demand evaluation elsewhere.
#[derive(Clone, Debug)]
pub struct QpTable<'a> {
    spec: &'a PotentialSpec,
    modes: &'a ModeSet,
    coeffs: Vec<QpCoefficients>,
    vhat: Vec<f64>,
}

impl<'a> QpTable<'a> {
    pub fn new(modes: &'a ModeSet, spec: &'a PotentialSpec) -> Self {
        let vhat: Vec<f64> = modes.iter().map(|k| spec.vhat(k)).collect();
        let coeffs = modes
            .iter()
            .zip(&vhat)
            .map(|(k, &v)| QpCoefficients::from_values(k.k2(), v))
            .collect();
        QpTable {
            spec,
            modes,
            coeffs,
            vhat,
        }
    }

    pub fn modes(&self) -> &ModeSet {
        self.modes
    }

    pub fn spec(&self) -> &PotentialSpec {
        self.spec
    }

    pub fn at(&self, i: usize) -> (QpCoefficients, f64) {
        (self.coeffs[i], self.vhat[i])
    }

    /// Coefficients and `v̂` at any nonzero momentum.
    pub fn lookup(&self, k: &Momentum) -> (QpCoefficients, f64) {
        match self.modes.position(k) {
            Some(i) => self.at(i),
            None => {
                let v = self.spec.vhat(k);
                (QpCoefficients::from_values(k.k2(), v), v)
            }
        }
    }
}

/// `Σ_ℓ γ_ℓ²` and `Σ_ℓ v̂(ℓ) γ_ℓ (σ_ℓ - γ_ℓ)` over the mode set.
#[derive(Clone, Copy, Debug)]
pub struct ModeSums {
    pub gamma2: f64,
    pub vgamma: f64,
}

impl ModeSums {
    pub fn new(table: &QpTable<'_>) -> Self {
        let mut g2 = NeumaierSum::default();
        let mut vg = NeumaierSum::default();
        for i in 0..table.modes().len() {
            let (q, v) = table.at(i);
            g2 += q.gamma * q.gamma;
            vg += v * q.gamma * (q.sigma - q.gamma);
        }
        ModeSums {
            gamma2: g2.value(),
            vgamma: vg.value(),
        }
    }
}

/// The five parts of `f(k)` in display order, before the overall sum.
///
/// `H^QP₂(k)` is the same expression with every part halved.
pub fn f_parts(table: &QpTable<'_>, sums: &ModeSums, k: &Momentum) -> [f64; 5] {
    let (qk, vk) = table.lookup(k);
    let (sk, gk) = (qk.sigma, qk.gamma);
    let spec = table.spec();
    let mut conv = NeumaierSum::default();
    for (i, l) in table.modes().iter().enumerate() {
        if l == k {
            continue;
        }
        let (ql, _) = table.at(i);
        if ql.gamma == 0.0 {
            continue;
        }
        let (sl, gl) = (ql.sigma, ql.gamma);
        conv += spec.vhat(&(*k - *l)) * gl * (sk * sk * sl + 2.0 * sk * gl * gk + sl * gk * gk);
    }
    let d = sk - gk;
    [
        -conv.value(),
        -vk * d * d * sums.gamma2,
        -2.0 * sk * gk * sums.vgamma,
        2.0 * vk * gk * d * d * d,
        0.5 * vk * (sk * sk + gk * gk),
    ]
}

/// `f(k)` with the `ℓ` sums running over the mode set.
pub fn f_coeff(modes: &ModeSet, spec: &PotentialSpec, k: &Momentum) -> Result<f64> {
    if k.is_zero() {
        return Err(Error::Domain("f(k) needs k ≠ 0".into()));
    }
    let table = QpTable::new(modes, spec);
    let sums = ModeSums::new(&table);
    Ok(f_parts(&table, &sums, k).iter().sum())
}

/// Two-creation quasiparticle coefficient `H^QP₂(k)`, evaluated from its own
/// display rather than as `f/2`.
pub fn h2_qp(table: &QpTable<'_>, sums: &ModeSums, k: &Momentum) -> f64 {
    let (qk, vk) = table.lookup(k);
    let (sk, gk) = (qk.sigma, qk.gamma);
    let spec = table.spec();
    let mut conv = NeumaierSum::default();
    for (i, l) in table.modes().iter().enumerate() {
        if l == k {
            continue;
        }
        let (ql, _) = table.at(i);
        if ql.gamma == 0.0 {
            continue;
        }
        let (sl, gl) = (ql.sigma, ql.gamma);
        conv += spec.vhat(&(*k - *l)) * gl * (sk * sk * sl + 2.0 * sk * gl * gk + sl * gk * gk);
    }
    let d = sk - gk;
    -0.5 * conv.value() - 0.5 * vk * d * d * sums.gamma2 - sk * gk * sums.vgamma
        + vk * gk * d * d * d
        + 0.25 * vk * (sk * sk + gk * gk)
}

/// The three momenta of a cubic vertex with their coefficients and `v̂`.
#[derive(Clone, Copy, Debug)]
pub struct Triple {
    pub k: (QpCoefficients, f64),
    pub l: (QpCoefficients, f64),
    pub p: (QpCoefficients, f64),
}

/// `g₁` from the three vertex legs `(k, ℓ, k+ℓ)`.
pub fn g1_from(t: &Triple) -> f64 {
    let ((qk, vk), (ql, vl), (qp, vp)) = (t.k, t.l, t.p);
    let (sk, gk, sl, gl, sp, gp) = (qk.sigma, qk.gamma, ql.sigma, ql.gamma, qp.sigma, qp.gamma);
    0.5 * (vk * (sp * sl + gp * gl) * (sk - gk) + vl * (sp * sk + gp * gk) * (sl - gl)
        - vp * (sl * gk + sk * gl) * (sp - gp))
}

/// `g₂` from the three vertex legs `(k, ℓ, k+ℓ)`.
pub fn g2_from(t: &Triple) -> f64 {
    let ((qk, vk), (ql, vl), (qp, vp)) = (t.k, t.l, t.p);
    let (sk, gk, sl, gl, sp, gp) = (qk.sigma, qk.gamma, ql.sigma, ql.gamma, qp.sigma, qp.gamma);
    -(vk * (gp * sl + sp * gl) * (sk - gk)
        + vl * (gp * sk + sp * gk) * (sl - gl)
        + vp * (sl * gk + sk * gl) * (sp - gp))
        / 6.0
}

fn triple(spec: &PotentialSpec, k: &Momentum, l: &Momentum) -> Result<Triple> {
    let p = *k + *l;
    if k.is_zero() || l.is_zero() || p.is_zero() {
        return Err(Error::Domain("cubic vertex needs k, ℓ, k+ℓ ≠ 0".into()));
    }
    let leg = |m: &Momentum| {
        let v = spec.vhat(m);
        (QpCoefficients::from_values(m.k2(), v), v)
    };
    Ok(Triple {
        k: leg(k),
        l: leg(l),
        p: leg(&p),
    })
}

pub fn g1_coeff(spec: &PotentialSpec, k: &Momentum, l: &Momentum) -> Result<f64> {
    Ok(g1_from(&triple(spec, k, l)?))
}

pub fn g2_coeff(spec: &PotentialSpec, k: &Momentum, l: &Momentum) -> Result<f64> {
    Ok(g2_from(&triple(spec, k, l)?))
}
