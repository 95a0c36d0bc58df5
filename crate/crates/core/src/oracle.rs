//! Exact diagonalization of the `N`-body torus Hamiltonian on a band-limited
//! mode set, and polynomial fits of the resulting binding energies.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{two_body, NBodyBasis, Sector};
use crate::lattice::{ModeSet, Momentum};
use crate::linalg::{lowest_eigenpair, CsrMatrix, EigenOptions, SparseHermitian};
use crate::perturbation::loglog_slope;
use crate::potential::PotentialSpec;
use crate::series::{closure_violation, e0_binding, e1_binding, e2_binding, E1Form};

/// `Σ k² n_k + (λ/2) Σ_q v̂(q) a*_{k+q} a*_{ℓ-q} a_ℓ a_k` over `M ∪ {0}`.
pub fn build_nbody_hamiltonian(
    basis: &NBodyBasis,
    lambda: f64,
    spec: &PotentialSpec,
) -> Result<SparseHermitian> {
    let b = basis.basis();
    let modes = b.modes();
    let kinetic = b.diagonal(|s| s.iter().zip(modes).map(|(&n, k)| n as f64 * k.k2()).sum());
    let interaction = if lambda == 0.0 {
        CsrMatrix::zeros(b.len())
    } else {
        two_body(b, |q: &Momentum| spec.vhat(q), false)
    };
    SparseHermitian::new(CsrMatrix::diagonal(&kinetic).lincomb(1.0, &interaction, lambda))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroundEnergy {
    pub particles: u32,
    pub energy: f64,
    pub residual: f64,
    pub dim: usize,
}

/// Ground energy of `N` particles at coupling `λ`.
pub fn ground_energy(
    modes: &ModeSet,
    spec: &PotentialSpec,
    particles: u32,
    lambda: f64,
    sector: Sector,
    opts: &EigenOptions,
) -> Result<GroundEnergy> {
    let basis = NBodyBasis::new(modes, particles, sector)?;
    let h = build_nbody_hamiltonian(&basis, lambda, spec)?;
    let pair = lowest_eigenpair(&h, opts)?;
    Ok(GroundEnergy {
        particles,
        energy: pair.value,
        residual: pair.residual,
        dim: basis.len(),
    })
}

/// One row of a binding-energy sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BindingPoint {
    pub n: u32,
    pub lambda: f64,
    pub e_n: f64,
    pub e_nm1: f64,
    pub delta_e: f64,
    pub dim_n: usize,
    pub dim_nm1: usize,
}

/// `ΔE = E(N, λ_N v) - E(N-1, λ_N v)` with `λ_N = 1/(N-1)`.
pub fn binding_energy(
    n: u32,
    spec: &PotentialSpec,
    modes: &ModeSet,
    sector: Sector,
    opts: &EigenOptions,
) -> Result<BindingPoint> {
    if n < 2 {
        return Err(Error::invalid("N", "must be at least 2"));
    }
    let lambda = 1.0 / (n as f64 - 1.0);
    let upper = ground_energy(modes, spec, n, lambda, sector, opts)?;
    let lower = ground_energy(modes, spec, n - 1, lambda, sector, opts)?;
    Ok(BindingPoint {
        n,
        lambda,
        e_n: upper.energy,
        e_nm1: lower.energy,
        delta_e: upper.energy - lower.energy,
        dim_n: upper.dim,
        dim_nm1: lower.dim,
    })
}

/// Least-squares polynomial fit with parameter covariance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolyFit {
    pub coefficients: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    /// Ratio of extreme singular values of the column-scaled design matrix.
    pub condition: f64,
}

/// Largest design condition number accepted by [`fit_polynomial`].
pub const MAX_CONDITION: f64 = 1e10;

/// Fits `y ≈ Σ_{i≤degree} b_i xⁱ`.
pub fn fit_polynomial(x: &[f64], y: &[f64], degree: usize) -> Result<PolyFit> {
    let n = x.len();
    let p = degree + 1;
    if n != y.len() {
        return Err(Error::Domain("x and y lengths differ".into()));
    }
    if n < p {
        return Err(Error::invalid(
            "N_list",
            format!("need at least {p} points"),
        ));
    }
    let a = DMatrix::from_fn(n, p, |r, c| x[r].powi(c as i32));
    // Column scaling so the condition number reflects geometry, not units.
    let scales: Vec<f64> = (0..p)
        .map(|c| a.column(c).norm().max(f64::MIN_POSITIVE))
        .collect();
    let scaled = DMatrix::from_fn(n, p, |r, c| a[(r, c)] / scales[c]);
    let svd = scaled.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if condition.is_nan() || condition > MAX_CONDITION {
        return Err(Error::IllConditioned { condition });
    }
    let yv = DVector::from_column_slice(y);
    let sol = svd
        .solve(&yv, 0.0)
        .map_err(|e| Error::Solver(format!("least squares: {e}")))?;
    let coefficients: Vec<f64> = (0..p).map(|c| sol[c] / scales[c]).collect();
    let fitted = &a * DVector::from_column_slice(&coefficients);
    let residuals: Vec<f64> = (0..n).map(|r| y[r] - fitted[r]).collect();
    let dof = n.saturating_sub(p);
    let sigma2 = if dof > 0 {
        residuals.iter().map(|r| r * r).sum::<f64>() / dof as f64
    } else {
        0.0
    };
    let gram = scaled.transpose() * &scaled;
    let inv = gram
        .try_inverse()
        .ok_or(Error::IllConditioned { condition })?;
    let covariance = (0..p)
        .map(|i| {
            (0..p)
                .map(|j| sigma2 * inv[(i, j)] / (scales[i] * scales[j]))
                .collect()
        })
        .collect();
    Ok(PolyFit {
        coefficients,
        covariance,
        residuals,
        condition,
    })
}

/// Fitted binding coefficients next to the closed forms on the same modes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BindingFit {
    pub order: usize,
    pub points: Vec<BindingPoint>,
    pub fit: PolyFit,
    /// Closed-form `E₀ᵇ, E₁ᵇ, …` up to the fit order.
    pub closed_form: Vec<f64>,
    /// `fitted - closed` per coefficient.
    pub deltas: Vec<f64>,
    /// `ΔE - Σ_{j≤order} λʲ Eⱼᵇ` with closed-form coefficients.
    pub series_residuals: Vec<f64>,
    /// Log-log slope of `|series_residuals|` against `λ_N`.
    pub residual_exponent: f64,
    /// Log-log slope of `|fit.residuals|` against `λ_N`; reported, not
    /// expected to be meaningful once the fit absorbs the leading remainder.
    pub fit_residual_exponent: f64,
    pub closure_violation: bool,
}

/// Sweeps `N`, computes `ΔE(N)` and fits `Σ_{j≤order} bⱼ λ_Nʲ`.
pub fn fit_binding_series(
    n_list: &[u32],
    spec: &PotentialSpec,
    modes: &ModeSet,
    order: usize,
    sector: Sector,
    opts: &EigenOptions,
) -> Result<BindingFit> {
    if !(1..=2).contains(&order) {
        return Err(Error::invalid("order", "must be 1 or 2"));
    }
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < order + 2 {
        return Err(Error::invalid(
            "N_list",
            format!("need at least {} distinct values of N", order + 2),
        ));
    }
    if ns[0] < 3 {
        return Err(Error::invalid("N_list", "every N must be at least 3"));
    }
    let lmax = 1.0 / (ns[0] as f64 - 1.0);
    let lmin = 1.0 / (*ns.last().expect("nonempty") as f64 - 1.0);
    if lmax < 4.0 * lmin {
        return Err(Error::invalid(
            "N_list",
            format!("λ_N must span a factor 4, spans {:.3}", lmax / lmin),
        ));
    }
    let violation = closure_violation(modes, spec);
    if violation {
        warn!("mode set does not contain the support of v̂ and its pairwise sums");
    }
    let points = ns
        .par_iter()
        .map(|&n| binding_energy(n, spec, modes, sector, opts))
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = points.iter().map(|p| p.lambda).collect();
    let y: Vec<f64> = points.iter().map(|p| p.delta_e).collect();
    let fit = fit_polynomial(&x, &y, order)?;
    let mut closed_form = vec![e0_binding(spec), e1_binding(modes, spec, E1Form::Compact)];
    if order >= 2 {
        closed_form.push(e2_binding(modes, spec).value);
    }
    let deltas = fit
        .coefficients
        .iter()
        .zip(&closed_form)
        .map(|(b, c)| b - c)
        .collect();
    let series_residuals: Vec<f64> = points
        .iter()
        .map(|p| {
            let s: f64 = closed_form
                .iter()
                .enumerate()
                .map(|(j, c)| c * p.lambda.powi(j as i32))
                .sum();
            p.delta_e - s
        })
        .collect();
    let slope = |r: &[f64]| {
        let pts: Vec<(f64, f64)> = x.iter().zip(r).map(|(&l, &v)| (l, v.abs())).collect();
        if pts.iter().all(|p| p.1 > 0.0) {
            loglog_slope(&pts)
        } else {
            f64::NAN
        }
    };
    Ok(BindingFit {
        order,
        residual_exponent: slope(&series_residuals),
        fit_residual_exponent: slope(&fit.residuals),
        points,
        fit,
        closed_form,
        deltas,
        series_residuals,
        closure_violation: violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::band_limited;
    use approx::assert_relative_eq;

    fn modes(ns: &[i64]) -> ModeSet {
        ModeSet::from_list(
            1,
            ns.iter().map(|&n| Momentum::new(&[n]).unwrap()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn free_particles_sit_in_the_condensate() {
        let m = modes(&[-1, 1]);
        let spec = band_limited(1.0, 1, &[(&[1], 2.0), (&[-1], 2.0)]).unwrap();
        let g = ground_energy(
            &m,
            &spec,
            5,
            0.0,
            Sector::ZeroMomentum,
            &EigenOptions::default(),
        )
        .unwrap();
        assert_eq!(g.energy, 0.0);
    }

    #[test]
    fn mean_field_diagonal_element() {
        let m = modes(&[-2, -1, 1, 2]);
        let spec = band_limited(1.5, 1, &[(&[1], 2.0), (&[-1], 2.0)]).unwrap();
        let n = 9;
        let basis = NBodyBasis::new(&m, n, Sector::ZeroMomentum).unwrap();
        let lambda = 1.0 / (n as f64 - 1.0);
        let h = build_nbody_hamiltonian(&basis, lambda, &spec).unwrap();
        let cond = basis.basis().position(&[9, 0, 0, 0, 0]).unwrap();
        assert_relative_eq!(
            h.matrix().get(cond, cond),
            n as f64 * 1.5 / 2.0,
            max_relative = 1e-14
        );
    }

    /// Two particles, modes `{0, ±1}`, `v̂(±1) = v`, `v̂(0) = v0`. Zero-momentum
    /// states `|2,0,0⟩` and `|0,1,1⟩`, matrix elements by hand:
    /// `⟨200|H|200⟩ = λ v0`, `⟨011|H|011⟩ = 2k² + λ v0` (exchange needs `v̂(2) = 0`),
    /// `⟨011|H|200⟩ = λ v √2`.
    #[test]
    fn two_particle_hand_matrix() {
        let m = modes(&[-1, 1]);
        let (v0, v, lambda) = (0.7, 3.0, 0.4);
        let spec = band_limited(v0, 1, &[(&[1], v), (&[-1], v)]).unwrap();
        let basis = NBodyBasis::new(&m, 2, Sector::ZeroMomentum).unwrap();
        assert_eq!(basis.len(), 2);
        let h = build_nbody_hamiltonian(&basis, lambda, &spec).unwrap();
        let k2 = Momentum::new(&[1]).unwrap().k2();
        let (a, d, b) = (
            lambda * v0,
            2.0 * k2 + lambda * v0,
            lambda * v * 2f64.sqrt(),
        );
        let lowest = 0.5 * (a + d) - (0.25 * (a - d) * (a - d) + b * b).sqrt();
        let g = lowest_eigenpair(&h, &EigenOptions::default()).unwrap();
        assert_relative_eq!(g.value, lowest, max_relative = 1e-13);
    }

    #[test]
    fn pure_condensate_binding_is_v0() {
        let m = modes(&[-2, -1, 1, 2]);
        let spec = band_limited(2.5, 1, &[(&[3], 1.0), (&[-3], 1.0)]).unwrap();
        let p = binding_energy(
            12,
            &spec,
            &m,
            Sector::ZeroMomentum,
            &EigenOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(p.delta_e, 2.5, max_relative = 1e-13);
    }

    #[test]
    fn zero_potential_has_zero_binding() {
        let m = modes(&[-1, 1]);
        let spec = band_limited(0.0, 1, &[(&[3], 1.0), (&[-3], 1.0)]).unwrap();
        let p =
            binding_energy(6, &spec, &m, Sector::ZeroMomentum, &EigenOptions::default()).unwrap();
        assert_eq!(p.delta_e, 0.0);
    }

    #[test]
    fn full_space_agrees_on_ground_state() {
        let m = modes(&[-2, -1, 1, 2]);
        let spec = band_limited(1.0, 1, &[(&[1], 10.0), (&[-1], 10.0)]).unwrap();
        let o = EigenOptions::default();
        let a = ground_energy(&m, &spec, 8, 1.0 / 7.0, Sector::ZeroMomentum, &o).unwrap();
        let b = ground_energy(&m, &spec, 8, 1.0 / 7.0, Sector::All, &o).unwrap();
        assert!(b.dim > a.dim);
        assert_relative_eq!(a.energy, b.energy, max_relative = 1e-12);
    }

    #[test]
    fn richer_modes_lower_the_energy() {
        let spec = band_limited(1.0, 1, &[(&[1], 10.0), (&[-1], 10.0)]).unwrap();
        let o = EigenOptions::default();
        let small = ground_energy(
            &modes(&[-1, 1]),
            &spec,
            10,
            1.0 / 9.0,
            Sector::ZeroMomentum,
            &o,
        )
        .unwrap();
        let large = ground_energy(
            &modes(&[-2, -1, 1, 2]),
            &spec,
            10,
            1.0 / 9.0,
            Sector::ZeroMomentum,
            &o,
        )
        .unwrap();
        assert!(large.energy < small.energy);
    }

    #[test]
    fn recovers_synthetic_quadratic() {
        let x: Vec<f64> = [16, 24, 32, 48, 64]
            .iter()
            .map(|&n| 1.0 / (n as f64 - 1.0))
            .collect();
        let y: Vec<f64> = x.iter().map(|l| 1.0 + 2.0 * l + 3.0 * l * l).collect();
        let f = fit_polynomial(&x, &y, 2).unwrap();
        for (b, e) in f.coefficients.iter().zip([1.0, 2.0, 3.0]) {
            assert!((b - e).abs() < 1e-10, "{b} vs {e}");
        }
    }

    #[test]
    fn rejects_narrow_lists() {
        let x = [0.1, 0.1 + 1e-12, 0.1 + 2e-12];
        assert!(matches!(
            fit_polynomial(&x, &[1.0, 1.0, 1.0], 2),
            Err(Error::IllConditioned { .. })
        ));
        let m = modes(&[-1, 1]);
        let spec = band_limited(1.0, 1, &[(&[1], 1.0), (&[-1], 1.0)]).unwrap();
        let o = EigenOptions::default();
        assert!(
            fit_binding_series(&[16, 17, 18, 19], &spec, &m, 2, Sector::ZeroMomentum, &o).is_err()
        );
        assert!(fit_binding_series(&[8, 64, 128], &spec, &m, 2, Sector::ZeroMomentum, &o).is_err());
    }
}
