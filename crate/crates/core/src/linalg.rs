//! Sparse real-symmetric operators, their lowest eigenpair, and projected
//! linear solves.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Default dimension up to which dense diagonalization is used.
pub const DEFAULT_DENSE_THRESHOLD: usize = 2000;

/// Row-compressed real matrix without stored zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)`; duplicates are summed, zeros dropped.
    pub fn from_triplets(
        n: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Self {
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for (r, c, v) in triplets {
            assert!(r < n && c < n, "triplet ({r}, {c}) outside {n}x{n}");
            *rows[r].entry(c).or_insert(0.0) += v;
        }
        Self::from_rows(n, rows)
    }

    fn from_rows(n: usize, rows: Vec<BTreeMap<usize, f64>>) -> Self {
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for row in rows {
            for (c, v) in row {
                if v != 0.0 {
                    indices.push(c);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            n,
            indptr,
            indices,
            data,
        }
    }

    pub fn zeros(n: usize) -> Self {
        CsrMatrix {
            n,
            indptr: vec![0; n + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn diagonal(d: &[f64]) -> Self {
        Self::from_triplets(d.len(), d.iter().enumerate().map(|(i, &v)| (i, i, v)))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()]
            .iter()
            .copied()
            .zip(self.data[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(p) => self.data[r.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.n, self.triplets().map(|(i, j, v)| (j, i, v)))
    }

    /// `αA + βB`.
    pub fn lincomb(&self, alpha: f64, other: &CsrMatrix, beta: f64) -> Self {
        assert_eq!(self.n, other.n);
        Self::from_triplets(
            self.n,
            self.triplets()
                .map(|(i, j, v)| (i, j, alpha * v))
                .chain(other.triplets().map(|(i, j, v)| (i, j, beta * v))),
        )
    }

    pub fn scale(&self, alpha: f64) -> Self {
        self.lincomb(alpha, &CsrMatrix::zeros(self.n), 0.0)
    }

    /// `A·diag(d)`.
    pub fn scale_cols(&self, d: &[f64]) -> Self {
        Self::from_triplets(self.n, self.triplets().map(|(i, j, v)| (i, j, v * d[j])))
    }

    /// `diag(d)·A`.
    pub fn scale_rows(&self, d: &[f64]) -> Self {
        Self::from_triplets(self.n, self.triplets().map(|(i, j, v)| (i, j, d[i] * v)))
    }

    /// `A + Aᵀ`.
    pub fn plus_transpose(&self) -> Self {
        self.lincomb(1.0, &self.transpose(), 1.0)
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        y.par_iter_mut()
            .enumerate()
            .with_min_len(256)
            .for_each(|(i, yi)| {
                let mut acc = 0.0;
                for p in self.indptr[i]..self.indptr[i + 1] {
                    acc += self.data[p] * x[self.indices[p]];
                }
                *yi = acc;
            });
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    /// `max |A - Aᵀ|`, relative to `max |A|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let t = self.transpose();
        let d = self.lincomb(1.0, &t, -1.0);
        d.data.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale
    }

    /// Gershgorin bound on the spectral radius.
    pub fn gershgorin_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn max_abs_diff(&self, other: &CsrMatrix) -> f64 {
        self.lincomb(1.0, other, -1.0)
            .data
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// A symmetric [`CsrMatrix`] with a cached norm bound.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseHermitian {
    matrix: CsrMatrix,
    norm: f64,
}

/// Tolerated relative asymmetry of an assembled operator.
pub const HERMITICITY_TOL: f64 = 1e-13;

impl SparseHermitian {
    pub fn new(matrix: CsrMatrix) -> Result<Self> {
        let asym = matrix.asymmetry();
        if asym > HERMITICITY_TOL {
            return Err(Error::Domain(format!(
                "operator is not symmetric (relative residual {asym:.2e})"
            )));
        }
        let norm = matrix.gershgorin_norm();
        Ok(SparseHermitian { matrix, norm })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn norm_estimate(&self) -> f64 {
        self.norm
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.matvec(x)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Fixes the sign so the largest-magnitude component (first on ties) is positive.
fn canonical_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() * (1.0 + 1e-12) {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EigenOptions {
    pub dense_threshold: usize,
    /// Residual target relative to the norm estimate.
    pub tol: f64,
    pub krylov_dim: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            dense_threshold: DEFAULT_DENSE_THRESHOLD,
            tol: 1e-10,
            krylov_dim: 120,
            max_restarts: 60,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<f64>,
    /// `‖(H - E)v‖`.
    pub residual: f64,
}

/// Lowest eigenpair: dense below the threshold, restarted Lanczos with full
/// reorthogonalization above it.
pub fn lowest_eigenpair(h: &SparseHermitian, opts: &EigenOptions) -> Result<Eigenpair> {
    let n = h.dim();
    if n == 0 {
        return Err(Error::Domain("empty operator".into()));
    }
    let mut pair = if n <= opts.dense_threshold {
        let eig = SymmetricEigen::new(h.matrix().to_dense());
        let i = (0..n)
            .min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
            .expect("nonempty");
        let v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        Eigenpair {
            value: eig.eigenvalues[i],
            vector: v,
            residual: 0.0,
        }
    } else {
        lanczos_lowest(h, opts)?
    };
    canonical_sign(&mut pair.vector);
    let hv = h.apply(&pair.vector);
    let mut r = hv;
    axpy(-pair.value, &pair.vector, &mut r);
    pair.residual = norm(&r);
    Ok(pair)
}

fn lanczos_lowest(h: &SparseHermitian, opts: &EigenOptions) -> Result<Eigenpair> {
    let n = h.dim();
    let target = opts.tol * h.norm_estimate().max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut last_residual = f64::INFINITY;
    let m = opts.krylov_dim.min(n);
    for _ in 0..opts.max_restarts {
        let s = norm(&start);
        start.iter_mut().for_each(|x| *x /= s);
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        let mut w = vec![0.0; n];
        for j in 0..m {
            h.matrix().matvec_into(&basis[j], &mut w);
            let a = dot(&w, &basis[j]);
            alpha.push(a);
            // Full reorthogonalization, applied twice for stability.
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(&w, q);
                    axpy(-c, q, &mut w);
                }
            }
            let b = norm(&w);
            if j + 1 == m || b <= 1e-14 * h.norm_estimate().max(1.0) {
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }
        let k = alpha.len();
        let mut t = DMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let i = (0..k)
            .min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
            .expect("nonempty");
        let mut x = vec![0.0; n];
        for (c, q) in eig.eigenvectors.column(i).iter().zip(&basis) {
            axpy(*c, q, &mut x);
        }
        let s = norm(&x);
        x.iter_mut().for_each(|v| *v /= s);
        let mut r = h.apply(&x);
        let rq = dot(&r, &x);
        axpy(-rq, &x, &mut r);
        last_residual = norm(&r);
        if last_residual <= target {
            return Ok(Eigenpair {
                value: rq,
                vector: x,
                residual: last_residual,
            });
        }
        start = x;
    }
    Err(Error::Solver(format!(
        "Lanczos stopped with residual {last_residual:.3e} (target {target:.3e})"
    )))
}

/// Relative residual accepted when conjugate gradients stall on rounding.
pub const CG_FLOOR: f64 = 1e-10;

/// Solves `(H - E₀) y = b` on the complement of `χ₀` by conjugate gradients.
///
/// `H - E₀` is positive definite there when `E₀` is the simple lowest
/// eigenvalue. The iterate is re-projected every step.
pub fn projected_cg(
    h: &SparseHermitian,
    e0: f64,
    chi0: &[f64],
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = h.dim();
    let project = |v: &mut Vec<f64>| {
        let c = dot(v, chi0);
        axpy(-c, chi0, v);
    };
    let mut rhs = b.to_vec();
    project(&mut rhs);
    let bnorm = norm(&rhs);
    let mut x = vec![0.0; n];
    // A right-hand side along χ₀ up to rounding has zero image.
    if bnorm <= 1e-14 * norm(b) || bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut ap = vec![0.0; n];
    for _ in 0..max_iter {
        h.matrix().matvec_into(&p, &mut ap);
        axpy(-e0, &p, &mut ap);
        project(&mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            // Breakdown at the rounding floor is convergence.
            if rr.sqrt() <= CG_FLOOR * bnorm {
                return Ok(x);
            }
            return Err(Error::Solver(
                "resolvent is not positive on the complement of the ground state".into(),
            ));
        }
        let a = rr / pap;
        axpy(a, &p, &mut x);
        axpy(-a, &ap, &mut r);
        project(&mut x);
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= tol * bnorm {
            return Ok(x);
        }
        let beta = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
    }
    if rr.sqrt() <= CG_FLOOR * bnorm {
        return Ok(x);
    }
    Err(Error::Solver(format!(
        "conjugate gradients stagnated at relative residual {:.3e}",
        rr.sqrt() / bnorm
    )))
}
