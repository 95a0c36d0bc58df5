//! Rayleigh-Schrödinger expansion of the excitation Hamiltonian on a
//! truncated Fock space.
//!
//! Operators are built in the particle basis from the fluctuation blocks
//! `𝕂₀…𝕂₄`. Resolvents are applied by projected solves, so the quasiparticle
//! closed forms in [`crate::series`] stay an independent check.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_rational::Ratio;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{mode_lookup, two_body, ExcitationBasis};
use crate::lattice::Momentum;
use crate::linalg::{
    dot, lowest_eigenpair, norm, projected_cg, CsrMatrix, EigenOptions, SparseHermitian,
};
use crate::potential::PotentialSpec;

pub type Rational = Ratio<i64>;

/// `c_j^{(ℓ)} = (ℓ-½)(ℓ+½)…(ℓ+j-3/2) / j!`, with `c_0^{(ℓ)} = 1`.
pub fn c_coeff(j: u32, l: u32) -> Rational {
    let mut acc = Rational::from_integer(1);
    for i in 0..j {
        acc *= Rational::new(2 * (l as i64 + i as i64) - 1, 2);
        acc /= Rational::from_integer(i as i64 + 1);
    }
    acc
}

/// `d_{j,ν} = Σ_{ℓ≤ν} c_ℓ c_{ν-ℓ} c_{j-ν}^{(ℓ)}` for `j ≥ ν`.
pub fn d_coeff(j: u32, nu: u32) -> Rational {
    assert!(j >= nu, "d_coeff needs j >= nu");
    (0..=nu)
        .map(|l| c_coeff(l, 0) * c_coeff(nu - l, 0) * c_coeff(j - nu, l))
        .sum()
}

/// Tables of `c_j^{(ℓ)}` and `d_{j,ν}` up to a maximal `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionCoefficients {
    /// `c[j][ℓ]`.
    pub c: Vec<Vec<Rational>>,
    /// `d[j][ν]` for `ν ≤ j`.
    pub d: Vec<Vec<Rational>>,
}

impl ExpansionCoefficients {
    pub fn new(j_max: u32) -> Self {
        ExpansionCoefficients {
            c: (0..=j_max)
                .map(|j| (0..=j_max).map(|l| c_coeff(j, l)).collect())
                .collect(),
            d: (0..=j_max)
                .map(|j| (0..=j).map(|nu| d_coeff(j, nu)).collect())
                .collect(),
        }
    }
}

fn to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Which number-operator shift the expansion uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Powers of `𝒩 - 1`: the `N`-particle expansion.
    Plain,
    /// Powers of `𝒩`: the `N-1`-particle expansion at the same coupling.
    Tilde,
}

impl Variant {
    fn shift(self) -> f64 {
        match self {
            Variant::Plain => 1.0,
            Variant::Tilde => 0.0,
        }
    }
}

/// The blocks `𝕂₀…𝕂₄` on a basis.
///
/// `k2` and `k3` hold only the creating halves `½Σv̂ a*a*` and
/// `Σv̂ a*a*a`; their adjoints are added when operators are formed.
#[derive(Clone, Debug)]
pub struct FluctuationOps {
    pub k0: Vec<f64>,
    pub k1: Vec<f64>,
    pub k2: CsrMatrix,
    pub k3: CsrMatrix,
    pub k4: CsrMatrix,
    /// Eigenvalues of `𝒩`.
    pub number: Vec<f64>,
}

impl FluctuationOps {
    pub fn new(basis: &ExcitationBasis, spec: &PotentialSpec) -> Self {
        let b = basis.basis();
        let modes = b.modes();
        let vhat: Vec<f64> = modes.iter().map(|k| spec.vhat(k)).collect();
        let lookup = mode_lookup(modes);
        let partner: Vec<Option<usize>> =
            modes.iter().map(|k| lookup.get(&(-*k)).copied()).collect();
        let k0 = b.diagonal(|s| s.iter().zip(modes).map(|(&n, k)| n as f64 * k.k2()).sum());
        let k1 = b.diagonal(|s| s.iter().zip(&vhat).map(|(&n, v)| n as f64 * v).sum());
        let k2 = b.assemble(|s, emit| {
            let mut occ = s.to_vec();
            for (i, p) in partner.iter().enumerate() {
                let Some(p) = *p else { continue };
                if vhat[i] == 0.0 {
                    continue;
                }
                occ.copy_from_slice(s);
                if let Some(amp) = crate::fock::apply_monomial(&mut occ, &[i, p], &[]) {
                    emit(&occ, 0.5 * vhat[i] * amp);
                }
            }
        });
        let k3 = b.assemble(|s, emit| {
            let mut occ = s.to_vec();
            for (p, kp) in modes.iter().enumerate() {
                if s[p] == 0 {
                    continue;
                }
                for (k, kk) in modes.iter().enumerate() {
                    if vhat[k] == 0.0 {
                        continue;
                    }
                    let Some(&l) = lookup.get(&(*kp - *kk)) else {
                        continue;
                    };
                    occ.copy_from_slice(s);
                    if let Some(amp) = crate::fock::apply_monomial(&mut occ, &[k, l], &[p]) {
                        emit(&occ, vhat[k] * amp);
                    }
                }
            }
        });
        let k4 = two_body(b, |q: &Momentum| spec.vhat(q), true);
        FluctuationOps {
            k0,
            k1,
            k2,
            k3,
            k4,
            number: basis.number(),
        }
    }

    pub fn dim(&self) -> usize {
        self.k0.len()
    }

    /// `𝕂₀ + 𝕂₁ + (𝕂₂ + h.c.)`.
    pub fn h0(&self) -> Result<SparseHermitian> {
        let diag: Vec<f64> = self.k0.iter().zip(&self.k1).map(|(a, b)| a + b).collect();
        SparseHermitian::new(CsrMatrix::diagonal(&diag).lincomb(
            1.0,
            &self.k2.plus_transpose(),
            1.0,
        ))
    }

    /// `dΓ(qTq) = Σ k² a*_k a_k`.
    pub fn dgamma_qtq(&self) -> Result<SparseHermitian> {
        SparseHermitian::new(CsrMatrix::diagonal(&self.k0))
    }

    /// `X f(𝒩) + h.c.` for a creating block `X`.
    fn with_adjoint(x: &CsrMatrix, f: &[f64]) -> CsrMatrix {
        x.scale_cols(f).plus_transpose()
    }

    /// `ℍ_j` or `ℍ̃_j` for `j ∈ {1, 2, 3, 4}`.
    pub fn h(&self, j: u32, variant: Variant) -> Result<SparseHermitian> {
        if !(1..=4).contains(&j) {
            return Err(Error::Unsupported(format!(
                "H_{j}: only orders 1 to 4 are assembled"
            )));
        }
        let s = variant.shift();
        let shifted =
            |p: u32| -> Vec<f64> { self.number.iter().map(|n| (n - s).powi(p as i32)).collect() };
        let half = j.div_ceil(2);
        let m = if j % 2 == 1 {
            let c = to_f64(c_coeff(half - 1, 0));
            Self::with_adjoint(&self.k3, &shifted(half - 1)).scale(c)
        } else {
            let mut acc = CsrMatrix::zeros(self.dim());
            for nu in 0..=half {
                let d = to_f64(d_coeff(half, nu));
                if d != 0.0 {
                    acc = acc.lincomb(1.0, &Self::with_adjoint(&self.k2, &shifted(nu)), d);
                }
            }
            if j == 2 {
                let k1: Vec<f64> = self
                    .k1
                    .iter()
                    .zip(shifted(1))
                    .map(|(v, n)| -n * v)
                    .collect();
                acc = acc.lincomb(1.0, &CsrMatrix::diagonal(&k1), 1.0);
                acc = acc.lincomb(1.0, &self.k4, 1.0);
            }
            acc
        };
        SparseHermitian::new(m)
    }

    /// `ℍ^<(N)`: the excitation Hamiltonian with exact square-root factors.
    pub fn h_less(&self, n_particles: u32) -> Result<SparseHermitian> {
        let nn = n_particles as f64;
        let den = nn - 1.0;
        if den <= 0.0 {
            return Err(Error::invalid("N", "must be at least 2"));
        }
        let f1: Vec<f64> = self.number.iter().map(|n| (nn - n) / den).collect();
        let f2: Vec<f64> = self
            .number
            .iter()
            .map(|n| ((nn - n) * (nn - n - 1.0)).max(0.0).sqrt() / den)
            .collect();
        let f3: Vec<f64> = self
            .number
            .iter()
            .map(|n| (nn - n).max(0.0).sqrt() / den)
            .collect();
        let diag: Vec<f64> = self
            .k0
            .iter()
            .zip(&self.k1)
            .zip(&f1)
            .map(|((a, b), f)| a + f * b)
            .collect();
        let m = CsrMatrix::diagonal(&diag)
            .lincomb(1.0, &Self::with_adjoint(&self.k2, &f2), 1.0)
            .lincomb(1.0, &Self::with_adjoint(&self.k3, &f3), 1.0)
            .lincomb(1.0, &self.k4, 1.0 / den);
        SparseHermitian::new(m)
    }
}

/// `(E₀, χ₀)` with the dense spectrum kept when it was computed.
#[derive(Clone, Debug)]
pub struct GroundState {
    pub energy: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    dense: Option<(Vec<f64>, DMatrix<f64>)>,
}

/// Lowest eigenpair of `ℍ₀`.
pub fn ground_state(h0: &SparseHermitian, opts: &EigenOptions) -> Result<GroundState> {
    let n = h0.dim();
    if n <= opts.dense_threshold {
        let eig = SymmetricEigen::new(h0.matrix().to_dense());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        if n > 1 && values[1] - values[0] <= 1e-10 * h0.norm_estimate().max(1.0) {
            return Err(Error::Solver(format!(
                "ground state is degenerate (gap {:.3e})",
                values[1] - values[0]
            )));
        }
        let mut v: Vec<f64> = vectors.column(0).iter().copied().collect();
        let flip = v.iter().fold(0.0f64, |m, x| {
            if x.abs() > m.abs() * (1.0 + 1e-12) {
                *x
            } else {
                m
            }
        }) < 0.0;
        if flip {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let mut r = h0.apply(&v);
        r.iter_mut().zip(&v).for_each(|(a, b)| *a -= values[0] * b);
        Ok(GroundState {
            energy: values[0],
            residual: norm(&r),
            vector: v,
            dense: Some((values, vectors)),
        })
    } else {
        let p = lowest_eigenpair(h0, opts)?;
        Ok(GroundState {
            energy: p.value,
            vector: p.vector,
            residual: p.residual,
            dense: None,
        })
    }
}

/// Reduced resolvents `𝕆₀ = -P₀` and `𝕆_m = Q₀/(E₀ - ℍ₀)^m`.
pub struct Resolvent<'a> {
    h0: &'a SparseHermitian,
    ground: &'a GroundState,
    tol: f64,
}

impl<'a> Resolvent<'a> {
    pub fn new(h0: &'a SparseHermitian, ground: &'a GroundState) -> Self {
        Resolvent {
            h0,
            ground,
            tol: 1e-13,
        }
    }

    pub fn apply(&self, m: u32, x: &[f64]) -> Result<Vec<f64>> {
        let chi = &self.ground.vector;
        if m == 0 {
            let c = dot(chi, x);
            return Ok(chi.iter().map(|v| -c * v).collect());
        }
        if let Some((values, vectors)) = &self.ground.dense {
            let xv = DVector::from_column_slice(x);
            let mut coef = vectors.tr_mul(&xv);
            coef[0] = 0.0;
            for i in 1..values.len() {
                coef[i] /= (self.ground.energy - values[i]).powi(m as i32);
            }
            return Ok((vectors * coef).iter().copied().collect());
        }
        let mut y = x.to_vec();
        for _ in 0..m {
            y = projected_cg(
                self.h0,
                self.ground.energy,
                chi,
                &y,
                self.tol,
                20 * self.h0.dim() + 100,
            )?;
            y.iter_mut().for_each(|v| *v = -*v);
        }
        Ok(y)
    }
}

/// One bracket `⟨χ₀|ℍ_{j₁}𝕆_{m₁}…ℍ_{j_ν}χ₀⟩/κ(m)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RsTerm {
    pub j: Vec<u32>,
    pub m: Vec<u32>,
    pub kappa: u32,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RsEnergy {
    pub order: u32,
    pub value: f64,
    pub terms: Vec<RsTerm>,
}

/// Compositions of `total` into `parts` parts, each at least `min`, in
/// lexicographic order.
pub fn compositions(total: u32, parts: u32, min: u32) -> Vec<Vec<u32>> {
    fn rec(left: u32, parts: u32, min: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if parts == 0 {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let reserve = min * (parts - 1);
        if left < reserve + min {
            return;
        }
        for x in min..=left - reserve {
            cur.push(x);
            rec(left - x, parts - 1, min, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(total, parts, min, &mut Vec::new(), &mut out);
    out
}

/// The index sets `(j, m)` of the order-`ℓ` energy.
pub fn rs_index_sets(order: u32) -> Vec<(Vec<u32>, Vec<u32>)> {
    let mut out = Vec::new();
    for nu in 1..=2 * order {
        for j in compositions(2 * order, nu, 1) {
            for m in compositions(nu - 1, nu - 1, 0) {
                out.push((j.clone(), m));
            }
        }
    }
    out
}

/// `E_ℓ` for `ℓ ∈ {1, 2}`; `h[j-1]` holds `ℍ_j` (or `ℍ̃_j`).
pub fn rs_energy(
    order: u32,
    h: &[SparseHermitian],
    ground: &GroundState,
    resolvent: &Resolvent<'_>,
) -> Result<RsEnergy> {
    if !(1..=2).contains(&order) {
        return Err(Error::Unsupported(format!(
            "energy order {order}: only 1 and 2"
        )));
    }
    if h.len() < 2 * order as usize {
        return Err(Error::Domain(format!("need H_1 to H_{}", 2 * order)));
    }
    let chi = &ground.vector;
    let mut terms = Vec::new();
    for (j, m) in rs_index_sets(order) {
        let mut v = chi.clone();
        for i in (0..j.len()).rev() {
            v = h[j[i] as usize - 1].apply(&v);
            if i > 0 {
                v = resolvent.apply(m[i - 1], &v)?;
            }
        }
        let kappa = 1 + m.iter().filter(|&&x| x == 0).count() as u32;
        terms.push(RsTerm {
            value: dot(chi, &v) / kappa as f64,
            j,
            m,
            kappa,
        });
    }
    let value = crate::summation::compensated_sum(terms.iter().map(|t| t.value));
    Ok(RsEnergy {
        order,
        value,
        terms,
    })
}

/// `E_ℓ`, `Ẽ_ℓ` and `E_ℓᵇ = E_ℓ - Ẽ_ℓ` on one basis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RsBinding {
    pub order: u32,
    pub plain: RsEnergy,
    pub tilde: RsEnergy,
    pub binding: f64,
}

/// Everything needed to evaluate the expansion on one truncated basis.
pub struct RsEngine {
    pub ops: FluctuationOps,
    pub h0: SparseHermitian,
    pub ground: GroundState,
    pub plain: Vec<SparseHermitian>,
    pub tilde: Vec<SparseHermitian>,
}

impl RsEngine {
    pub fn new(basis: &ExcitationBasis, spec: &PotentialSpec, opts: &EigenOptions) -> Result<Self> {
        let ops = FluctuationOps::new(basis, spec);
        let h0 = ops.h0()?;
        let ground = ground_state(&h0, opts)?;
        let plain = (1..=4)
            .map(|j| ops.h(j, Variant::Plain))
            .collect::<Result<Vec<_>>>()?;
        let tilde = (1..=4)
            .map(|j| ops.h(j, Variant::Tilde))
            .collect::<Result<Vec<_>>>()?;
        Ok(RsEngine {
            ops,
            h0,
            ground,
            plain,
            tilde,
        })
    }

    pub fn resolvent(&self) -> Resolvent<'_> {
        Resolvent::new(&self.h0, &self.ground)
    }

    pub fn binding(&self, order: u32) -> Result<RsBinding> {
        let r = self.resolvent();
        let plain = rs_energy(order, &self.plain, &self.ground, &r)?;
        let tilde = rs_energy(order, &self.tilde, &self.ground, &r)?;
        Ok(RsBinding {
            order,
            binding: plain.value - tilde.value,
            plain,
            tilde,
        })
    }
}

/// Residuals `‖(ℍ^<(N) - ℍ₀ - Σ_{j≤a} λ^{j/2}ℍ_j)ψ‖` for one probe vector.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaylorProbeRow {
    pub probe: String,
    pub n: u32,
    pub lambda: f64,
    /// Indexed by truncation order `a`.
    pub residuals: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaylorProbeReport {
    pub orders: Vec<u32>,
    pub rows: Vec<TaylorProbeRow>,
    /// `(probe, a, fitted exponent of the residual in λ)`.
    pub exponents: Vec<(String, u32, f64)>,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Probe vectors: the vacuum and `χ₀` of `ℍ₀`, both of even excitation
/// parity.
fn probe_vectors(basis: &ExcitationBasis, chi0: &[f64]) -> Vec<(String, Vec<f64>)> {
    let n = basis.len();
    let mut vacuum = vec![0.0; n];
    vacuum[0] = 1.0;
    vec![("vacuum".into(), vacuum), ("chi0".into(), chi0.to_vec())]
}

/// Compares `ℍ^<(N)` with its truncated expansion in `λ_N = 1/(N-1)`.
pub fn taylor_residual_probe(
    basis: &ExcitationBasis,
    spec: &PotentialSpec,
    orders: &[u32],
    n_list: &[u32],
) -> Result<TaylorProbeReport> {
    if orders.iter().any(|&a| a > 4) {
        return Err(Error::Unsupported("truncation order above 4".into()));
    }
    if n_list.len() < 2 {
        return Err(Error::invalid("N_list", "need at least two values"));
    }
    let ops = FluctuationOps::new(basis, spec);
    let h0 = ops.h0()?;
    let h: Vec<SparseHermitian> = (1..=4)
        .map(|j| ops.h(j, Variant::Plain))
        .collect::<Result<_>>()?;
    let ground = ground_state(&h0, &EigenOptions::default())?;
    let probes = probe_vectors(basis, &ground.vector);
    let mut rows = Vec::new();
    for &n in n_list {
        let lambda = 1.0 / (n as f64 - 1.0);
        let exact = ops.h_less(n)?;
        for (name, psi) in &probes {
            let target = exact.apply(psi);
            let partial = h0.apply(psi);
            let mut terms = Vec::with_capacity(4);
            for (j, hj) in h.iter().enumerate() {
                terms.push((lambda.powf((j + 1) as f64 / 2.0), hj.apply(psi)));
            }
            let mut residuals = Vec::new();
            for &a in orders {
                let mut approx = partial.clone();
                for (c, v) in &terms[..a as usize] {
                    approx.iter_mut().zip(v).for_each(|(x, y)| *x += c * y);
                }
                let diff: Vec<f64> = target.iter().zip(&approx).map(|(t, p)| t - p).collect();
                residuals.push(norm(&diff));
            }
            rows.push(TaylorProbeRow {
                probe: name.clone(),
                n,
                lambda,
                residuals,
            });
        }
    }
    let mut exponents = Vec::new();
    for (name, _) in &probes {
        for (ai, &a) in orders.iter().enumerate() {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| &r.probe == name)
                .map(|r| (r.lambda, r.residuals[ai]))
                .collect();
            let slope = if pts.iter().all(|p| p.1 > 0.0) {
                loglog_slope(&pts)
            } else {
                f64::NAN
            };
            exponents.push((name.clone(), a, slope));
        }
    }
    Ok(TaylorProbeReport {
        orders: orders.to_vec(),
        rows,
        exponents,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::Sector;
    use crate::lattice::ModeSet;
    use crate::potential::band_limited;
    use crate::series::{e1_binding, e2_binding, E1Form};
    use approx::assert_relative_eq;

    fn setup() -> (ModeSet, PotentialSpec) {
        let m = ModeSet::from_list(
            1,
            [-2, -1, 1, 2]
                .iter()
                .map(|&n| Momentum::new(&[n]).unwrap())
                .collect(),
        )
        .unwrap();
        let spec = band_limited(1.0, 1, &[(&[1], 10.0), (&[-1], 10.0)]).unwrap();
        (m, spec)
    }

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn coefficient_values() {
        assert_eq!(c_coeff(0, 5), r(1, 1));
        assert_eq!(c_coeff(1, 0), r(-1, 2));
        assert_eq!(c_coeff(2, 0), r(-1, 8));
        assert_eq!(d_coeff(0, 0), r(1, 1));
        assert_eq!(d_coeff(1, 0), r(-1, 2));
        assert_eq!(d_coeff(1, 1), r(-1, 1));
        assert_eq!(d_coeff(2, 0), r(-1, 8));
        assert_eq!(d_coeff(2, 1), r(0, 1));
        assert_eq!(d_coeff(2, 2), r(0, 1));
        let t = ExpansionCoefficients::new(4);
        assert!(t.c[0].iter().all(|c| *c == r(1, 1)));
    }

    /// Power series of `√((1-y)(1-y-λ))` in `λ` and `y`, multiplied out
    /// directly from binomial series.
    fn sqrt_product_series(order: usize) -> Vec<Vec<Rational>> {
        // (1-u)^{1/2} coefficients.
        let mut b = vec![r(1, 1)];
        for i in 1..=2 * order {
            let prev = b[i - 1];
            b.push(prev * r(2 * i as i64 - 3, 2 * i as i64));
        }
        // √(1-y-λ) = Σ b_n (y+λ)^n, √(1-y) = Σ b_m y^m.
        let mut out = vec![vec![r(0, 1); order + 1]; order + 1]; // [λ power][y power]
        let binom = |n: usize, k: usize| -> i64 {
            (0..k).fold(1i64, |acc, i| acc * (n - i) as i64 / (i + 1) as i64)
        };
        for n in 0..=2 * order {
            for k in 0..=n {
                let (pl, py) = (k, n - k);
                for (m, bm) in b.iter().enumerate() {
                    if pl <= order && py + m <= order {
                        out[pl][py + m] += b[n] * *bm * r(binom(n, k), 1);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn d_matches_direct_expansion() {
        let s = sqrt_product_series(5);
        for j in 0..=5u32 {
            for nu in 0..=j {
                // λ^j (𝒩-1)^ν comes from λ^{j-ν} y^ν with y = λ(𝒩-1).
                assert_eq!(
                    d_coeff(j, nu),
                    s[(j - nu) as usize][nu as usize],
                    "d({j},{nu})"
                );
            }
        }
    }

    #[test]
    fn index_set_counts() {
        let one = rs_index_sets(1);
        assert_eq!(one, vec![(vec![2], vec![]), (vec![1, 1], vec![1])]);
        let two = rs_index_sets(2);
        assert_eq!(two.len(), 23);
        let all_one = two
            .iter()
            .filter(|(_, m)| m.iter().all(|&x| x == 1))
            .count();
        assert_eq!(all_one, 8);
    }

    #[test]
    fn operator_identities() {
        let (m, spec) = setup();
        let basis = ExcitationBasis::new(&m, 6, Sector::ZeroMomentum).unwrap();
        let ops = FluctuationOps::new(&basis, &spec);
        let h0 = ops.h0().unwrap();
        let k0 = ops.dgamma_qtq().unwrap();
        let hp: Vec<_> = (1..=4).map(|j| ops.h(j, Variant::Plain).unwrap()).collect();
        let ht: Vec<_> = (1..=4).map(|j| ops.h(j, Variant::Tilde).unwrap()).collect();
        assert_eq!(hp[0].matrix().max_abs_diff(ht[0].matrix()), 0.0);
        let h2_id = hp[1]
            .matrix()
            .lincomb(1.0, h0.matrix(), -1.0)
            .lincomb(1.0, k0.matrix(), 1.0);
        assert!(ht[1].matrix().max_abs_diff(&h2_id) < 1e-12);
        let h3_id = hp[2].matrix().lincomb(1.0, hp[0].matrix(), -0.5);
        assert!(ht[2].matrix().max_abs_diff(&h3_id) < 1e-12);
        assert_eq!(hp[3].matrix().max_abs_diff(ht[3].matrix()), 0.0);
        assert!(ops.h(5, Variant::Plain).is_err());
        // ℍ₁ annihilates the vacuum.
        let mut vac = vec![0.0; basis.len()];
        vac[0] = 1.0;
        assert!(norm(&hp[0].apply(&vac)) == 0.0);
    }

    #[test]
    fn pair_matrix_element() {
        let (m, spec) = setup();
        let basis = ExcitationBasis::new(&m, 2, Sector::ZeroMomentum).unwrap();
        let h0 = FluctuationOps::new(&basis, &spec).h0().unwrap();
        let pair = basis.basis().position(&[0, 1, 1, 0]).unwrap();
        assert_relative_eq!(h0.matrix().get(pair, 0), 10.0, max_relative = 1e-15);
    }

    #[test]
    fn free_ground_state_is_vacuum() {
        let (m, _) = setup();
        let spec = band_limited(1.0, 1, &[(&[3], 1.0), (&[-3], 1.0)]).unwrap();
        let basis = ExcitationBasis::new(&m, 4, Sector::ZeroMomentum).unwrap();
        let h0 = FluctuationOps::new(&basis, &spec).h0().unwrap();
        let g = ground_state(&h0, &EigenOptions::default()).unwrap();
        assert_eq!(g.energy, 0.0);
        assert_eq!(g.vector[0], 1.0);
    }

    #[test]
    fn resolvent_defining_equation() {
        let (m, spec) = setup();
        let basis = ExcitationBasis::new(&m, 8, Sector::ZeroMomentum).unwrap();
        let ops = FluctuationOps::new(&basis, &spec);
        let h0 = ops.h0().unwrap();
        let dense = ground_state(&h0, &EigenOptions::default()).unwrap();
        let sparse = ground_state(
            &h0,
            &EigenOptions {
                dense_threshold: 0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_relative_eq!(dense.energy, sparse.energy, max_relative = 1e-12);
        let x: Vec<f64> = (0..basis.len())
            .map(|i| ((i * 7 + 3) % 11) as f64 - 5.0)
            .collect();
        for g in [&dense, &sparse] {
            let res = Resolvent::new(&h0, g);
            let y = res.apply(1, &x).unwrap();
            let hy = h0.apply(&y);
            let c = dot(&g.vector, &x);
            let err: Vec<f64> = (0..x.len())
                .map(|i| g.energy * y[i] - hy[i] - (x[i] - c * g.vector[i]))
                .collect();
            assert!(norm(&err) < 1e-9 * norm(&x));
            assert!(norm(&res.apply(1, &g.vector).unwrap()) < 1e-12);
            let p = res.apply(0, &g.vector).unwrap();
            assert!(p.iter().zip(&g.vector).all(|(a, b)| (a + b).abs() < 1e-14));
        }
        let y2 = Resolvent::new(&h0, &dense).apply(2, &x).unwrap();
        let y2s = Resolvent::new(&h0, &sparse).apply(2, &x).unwrap();
        let d: Vec<f64> = y2.iter().zip(&y2s).map(|(a, b)| a - b).collect();
        assert!(norm(&d) < 1e-9 * norm(&y2));
    }

    #[test]
    fn first_order_matches_closed_form() {
        let (m, spec) = setup();
        let closed = e1_binding(&m, &spec, E1Form::Compact);
        let mut errs = Vec::new();
        for n_max in [4, 8, 12] {
            let basis = ExcitationBasis::new(&m, n_max, Sector::ZeroMomentum).unwrap();
            let eng = RsEngine::new(&basis, &spec, &EigenOptions::default()).unwrap();
            let b = eng.binding(1).unwrap();
            assert_eq!(b.plain.terms.len(), 2);
            errs.push((b.binding - closed).abs());
        }
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
        assert!(errs[2] < 1e-8, "{errs:?}");
    }

    #[test]
    fn second_order_matches_closed_form() {
        let (m, spec) = setup();
        let closed = e2_binding(&m, &spec).value;
        let basis = ExcitationBasis::new(&m, 12, Sector::ZeroMomentum).unwrap();
        let eng = RsEngine::new(&basis, &spec, &EigenOptions::default()).unwrap();
        let b = eng.binding(2).unwrap();
        assert_eq!(b.plain.terms.len(), 23);
        assert!(
            (b.binding - closed).abs() < 1e-6 * closed.abs(),
            "{} vs {closed}",
            b.binding
        );
    }

    #[test]
    fn taylor_exponents() {
        let (m, spec) = setup();
        let basis = ExcitationBasis::new(&m, 6, Sector::ZeroMomentum).unwrap();
        let rep =
            taylor_residual_probe(&basis, &spec, &[0, 1, 2, 3], &[64, 128, 256, 512]).unwrap();
        for (probe, a, e) in &rep.exponents {
            if probe != "vacuum" {
                assert!(
                    (e - (*a as f64 + 1.0) / 2.0).abs() < 0.15,
                    "{probe} a={a}: {e}"
                );
            }
        }
        // The vacuum residual is finite and decreasing in N.
        let vac: Vec<f64> = rep
            .rows
            .iter()
            .filter(|r| r.probe == "vacuum")
            .map(|r| r.residuals[0])
            .collect();
        assert!(vac.windows(2).all(|w| w[1] < w[0]));
    }
}
