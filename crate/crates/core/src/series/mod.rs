//! Closed-form binding-energy coefficients `E₀ᵇ`, `E₁ᵇ`, `E₂ᵇ` as lattice sums.
//!
//! All sums run over a finite [`ModeSet`]. For a band-limited potential the
//! sums are exact once the set contains the support and its pairwise sums;
//! for a gaussian they are truncations studied by [`convergence_study`].

mod scaling;

pub use scaling::{scaling_probe, ScalingOptions, ScalingReport, ScalingRow};

use log::warn;
use serde::Serialize;

use crate::bogoliubov::{f_parts, g1_from, g2_from, h2_qp, ModeSums, QpTable, Triple};
use crate::error::{Error, Result};
use crate::lattice::{enumerate_ball, sum_closure, ModeSet};
use crate::potential::PotentialSpec;
use crate::summation::{compensated_sum, par_ordered_sums};

/// `E₀ᵇ = v̂(0)`.
pub fn e0_binding(spec: &PotentialSpec) -> f64 {
    spec.vhat0()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum E1Form {
    /// `-Σ v̂ α/(1+α)`.
    Compact,
    /// `e_B - Σ k² α²/(1-α²)`.
    E0MinusKinetic,
}

pub fn e1_binding(modes: &ModeSet, spec: &PotentialSpec, form: E1Form) -> f64 {
    match form {
        E1Form::Compact => -compensated_sum(modes.iter().map(|k| {
            let v = spec.vhat(k);
            let a = crate::bogoliubov::QpCoefficients::from_values(k.k2(), v).alpha;
            v * a / (1.0 + a)
        })),
        E1Form::E0MinusKinetic => {
            let kinetic = compensated_sum(modes.iter().map(|k| {
                let a = crate::bogoliubov::QpCoefficients::from_values(k.k2(), spec.vhat(k)).alpha;
                k.k2() * a * a / (1.0 - a * a)
            }));
            crate::bogoliubov::e_b(modes, spec) - kinetic
        }
    }
}

/// `E₂ᵇ` together with whether the domain failed the exactness condition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct E2Value {
    pub value: f64,
    pub closure_violation: bool,
}

/// Quasiparticle assembly of `E₂ᵇ`: four terms and their sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QpAssembly {
    /// `-2Σ k²γσ H^QP₂/ε`, `Σ k⁴σ²γ²/ε`, the `g₁g₂` term, the `g₂²` term.
    pub terms: [f64; 4],
    pub total: f64,
    pub closure_violation: bool,
}

/// True when a tabulated potential's support and pairwise sums are not all in `modes`.
pub fn closure_violation(modes: &ModeSet, spec: &PotentialSpec) -> bool {
    match spec.support() {
        Ok(s) => {
            let bad = !modes.is_superset_of(&sum_closure(&s));
            if bad {
                warn!(
                    "summation domain ({}) misses part of supp(v̂) + supp(v̂); E₂ᵇ is truncated",
                    modes.summary()
                );
            }
            bad
        }
        Err(_) => false,
    }
}

/// Sums over the pairs `(k, ℓ)` with `k, ℓ, k+ℓ ∈ M` for the mode at index `i`.
fn pair_terms(table: &QpTable<'_>, i: usize) -> [f64; 3] {
    let modes = table.modes();
    let k = modes.modes()[i];
    let qk = table.at(i);
    let mut closed = crate::summation::NeumaierSum::default();
    let mut t3 = crate::summation::NeumaierSum::default();
    let mut t4 = crate::summation::NeumaierSum::default();
    for (j, l) in modes.iter().enumerate() {
        let p = k + *l;
        let Some(pi) = modes.position(&p) else {
            continue;
        };
        let t = Triple {
            k: qk,
            l: table.at(j),
            p: table.at(pi),
        };
        let (g1, g2) = (g1_from(&t), g2_from(&t));
        if g1 == 0.0 && g2 == 0.0 {
            continue;
        }
        let (qp, p2) = (t.p.0, p.k2());
        let e3 = qk.0.eps + t.l.0.eps + qp.eps;
        let sg = qp.sigma * qp.gamma;
        let s2g2 = qp.sigma * qp.sigma + qp.gamma * qp.gamma;
        closed += 6.0 * (p2 * g2 / e3) * (2.0 * sg * g1 / qp.eps - 3.0 * s2g2 * g2 / e3);
        t3 += 12.0 * p2 * sg * (g1 / qp.eps) * (g2 / e3);
        t4 += -18.0 * p2 * s2g2 * (g2 / e3) * (g2 / e3);
    }
    [closed.value(), t3.value(), t4.value()]
}

/// `E₂ᵇ` in the closed form: single sum with `f(k)` plus the `g₁`/`g₂` double sum.
pub fn e2_binding(modes: &ModeSet, spec: &PotentialSpec) -> E2Value {
    let violation = closure_violation(modes, spec);
    let table = QpTable::new(modes, spec);
    let sums = ModeSums::new(&table);
    let [single, double] = par_ordered_sums(modes.len(), |i| {
        let k = modes.modes()[i];
        let (q, _) = table.at(i);
        let kgs = k.k2() * q.gamma * q.sigma;
        let single = if kgs == 0.0 {
            0.0
        } else {
            let f: f64 = compensated_sum(f_parts(&table, &sums, &k));
            kgs / q.eps * (kgs - f)
        };
        [single, pair_terms(&table, i)[0]]
    });
    E2Value {
        value: single + double,
        closure_violation: violation,
    }
}

/// `E₂ᵇ` assembled from the four quasiparticle matrix-element terms.
pub fn e2_binding_qp_assembly(modes: &ModeSet, spec: &PotentialSpec) -> QpAssembly {
    let violation = closure_violation(modes, spec);
    let table = QpTable::new(modes, spec);
    let sums = ModeSums::new(&table);
    let terms = par_ordered_sums(modes.len(), |i| {
        let k = modes.modes()[i];
        let (q, _) = table.at(i);
        let k2 = k.k2();
        let sg = q.sigma * q.gamma;
        let t1 = if sg == 0.0 {
            0.0
        } else {
            -2.0 * k2 * sg * h2_qp(&table, &sums, &k) / q.eps
        };
        let t2 = k2 * k2 * sg * sg / q.eps;
        let [_, t3, t4] = pair_terms(&table, i);
        [t1, t2, t3, t4]
    });
    QpAssembly {
        terms,
        total: compensated_sum(terms),
        closure_violation: violation,
    }
}

/// Values of every coefficient on one ball cutoff.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CutoffRow {
    pub cutoff: f64,
    pub n_modes: usize,
    pub e0b: f64,
    pub e1b_compact: f64,
    pub e1b_alt: f64,
    pub e2b: f64,
    pub e2b_qp: [f64; 4],
    pub closure_violation: bool,
}

/// Three-point power-law tail `v(c) = limit + amplitude·c^(-exponent)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailFit {
    pub limit: f64,
    /// `None` when the last two values agree to rounding (the sum has converged).
    pub exponent: Option<f64>,
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Extrapolated {
    pub e1_binding: Option<TailFit>,
    pub e2_binding: Option<TailFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeriesResult {
    pub e0_binding: f64,
    pub e1_binding: f64,
    pub e2_binding: f64,
    pub mode_set_summary: String,
    pub convergence: Vec<CutoffRow>,
    pub extrapolated: Option<Extrapolated>,
    pub flags: Vec<String>,
}

pub fn evaluate_on(modes: &ModeSet, spec: &PotentialSpec, cutoff: f64) -> CutoffRow {
    let e2 = e2_binding(modes, spec);
    let qp = e2_binding_qp_assembly(modes, spec);
    CutoffRow {
        cutoff,
        n_modes: modes.len(),
        e0b: e0_binding(spec),
        e1b_compact: e1_binding(modes, spec, E1Form::Compact),
        e1b_alt: e1_binding(modes, spec, E1Form::E0MinusKinetic),
        e2b: e2.value,
        e2b_qp: qp.terms,
        closure_violation: e2.closure_violation,
    }
}

/// Fits `v(c) = v∞ + A c^(-q)` exactly through the last three points.
pub fn tail_fit(points: &[(f64, f64)]) -> Option<TailFit> {
    let n = points.len();
    if n < 3 {
        return None;
    }
    let [(c1, v1), (c2, v2), (c3, v3)] = [points[n - 3], points[n - 2], points[n - 1]];
    let (d1, d2) = (v1 - v2, v2 - v3);
    if d2.abs() <= 4.0 * f64::EPSILON * v3.abs() {
        return Some(TailFit {
            limit: v3,
            exponent: None,
            amplitude: 0.0,
        });
    }
    if d1 == 0.0 || d2 == 0.0 || d1.signum() != d2.signum() {
        return None;
    }
    let r = d1 / d2;
    let ratio = |q: f64| (c1.powf(-q) - c2.powf(-q)) / (c2.powf(-q) - c3.powf(-q));
    // The ratio grows monotonically from ln(c2/c1)/ln(c3/c2) at q → 0.
    let (mut lo, mut hi) = (1e-9, 1.0);
    if ratio(lo) >= r {
        return None;
    }
    while ratio(hi) < r {
        hi *= 2.0;
        if hi > 512.0 {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ratio(mid) < r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q = 0.5 * (lo + hi);
    let a = d2 / (c2.powf(-q) - c3.powf(-q));
    Some(TailFit {
        limit: v3 - a * c3.powf(-q),
        exponent: Some(q),
        amplitude: a,
    })
}

/// Evaluates the coefficients on balls of increasing cutoff and fits the tail.
pub fn convergence_study(
    spec: &PotentialSpec,
    dim: usize,
    cutoffs: &[f64],
) -> Result<SeriesResult> {
    if cutoffs.is_empty() {
        return Err(Error::invalid("cutoffs", "at least one cutoff is required"));
    }
    if cutoffs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("cutoffs", "must be strictly increasing"));
    }
    let mut rows = Vec::with_capacity(cutoffs.len());
    let mut last = None;
    for &c in cutoffs {
        let modes = enumerate_ball(dim, c)?;
        rows.push(evaluate_on(&modes, spec, c));
        last = Some(modes);
    }
    let last = last.expect("nonempty");
    let mut flags = Vec::new();
    if rows.iter().any(|r| r.closure_violation) {
        flags.push("closure_violation".to_string());
    }
    let extrapolated = if rows.len() < 3 {
        flags.push("fit_skipped_fewer_than_3_cutoffs".to_string());
        None
    } else {
        let e1: Vec<(f64, f64)> = rows.iter().map(|r| (r.cutoff, r.e1b_compact)).collect();
        let e2: Vec<(f64, f64)> = rows.iter().map(|r| (r.cutoff, r.e2b)).collect();
        let fit = Extrapolated {
            e1_binding: tail_fit(&e1),
            e2_binding: tail_fit(&e2),
        };
        if fit.e1_binding.is_none() || fit.e2_binding.is_none() {
            flags.push("tail_not_power_law".to_string());
        }
        Some(fit)
    };
    let top = rows.last().expect("nonempty");
    Ok(SeriesResult {
        e0_binding: top.e0b,
        e1_binding: top.e1b_compact,
        e2_binding: top.e2b,
        mode_set_summary: last.summary(),
        convergence: rows,
        extrapolated,
        flags,
    })
}
