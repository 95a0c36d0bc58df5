//! Growth of `E₂ᵇ` under the rescaling `v̂ → v̂(·/Λ)` of a gaussian potential.
//!
//! For a gaussian, `v̂_Λ(2πn) = g·exp(-|n|²/(2w²))` with lattice width
//! `w = sΛ/(2π)`, so every quantity is radial in `n`. The sums run over the
//! ball `|n| ≤ cutoff_factor·w`; the third momentum `k+ℓ` of a cubic vertex
//! is not restricted, which approximates the infinite lattice.
//!
//! The convolutions inside `f(k)` are computed with the gaussian's
//! separability, one axis at a time. The `g₁`/`g₂` double sum is summed
//! directly, with the outer momentum reduced to the cone
//! `n₁ ≥ n₂ ≥ … ≥ 0` and weighted by its orbit under signed permutations.

use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::bogoliubov::{g1_from, g2_from, QpCoefficients, Triple};
use crate::error::{Error, Result};
use crate::lattice::TWO_PI_SQ;
use crate::potential::PotentialSpec;
use crate::summation::{compensated_sum, NeumaierSum};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalingOptions {
    pub dim: usize,
    /// Ball radius in units of the lattice width `w`.
    pub cutoff_factor: f64,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        ScalingOptions {
            dim: 3,
            cutoff_factor: 2.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingRow {
    pub lambda: f64,
    /// Gaussian width in lattice units, `sΛ/(2π)`.
    pub width: f64,
    pub n_modes: usize,
    pub e2_binding: f64,
    pub e2_over_lambda2: f64,
    /// The single sum over `k` (the part containing `f`).
    pub single_sum: f64,
    /// The `g₁`/`g₂` double sum.
    pub pair_sum: f64,
    /// `Σ_k (k²γσ/ε) Σ_{ℓ≠k} v̂(k-ℓ) γ_ℓ σ_k² σ_ℓ`.
    pub leading_sum: f64,
    pub leading_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of `ln E₂ᵇ` against `ln Λ` (needs all values > 0).
    pub loglog_exponent: Option<f64>,
    /// Exponent `q` of the model `E₂ᵇ = AΛ^q + BΛ`, fitted by least squares in
    /// relative residuals; needs at least three Λ.
    pub leading_exponent: Option<f64>,
    /// `leading_sum(2Λ)/leading_sum(Λ)` for consecutive doublings.
    pub leading_growth: Vec<f64>,
    pub nonnegative_at_max: bool,
    pub leading_ratio_at_max: f64,
}

/// Radially tabulated mode quantities indexed by `|n|²`.
struct RadialTable {
    coeffs: Vec<(QpCoefficients, f64)>,
}

impl RadialTable {
    fn new(spec: &PotentialSpec, max_n2: i64) -> Self {
        let coeffs = (0..=max_n2)
            .map(|n2| {
                let v = spec.vhat_norm2(n2);
                if n2 == 0 {
                    (QpCoefficients::free(0.0), v)
                } else {
                    (QpCoefficients::from_values(TWO_PI_SQ * n2 as f64, v), v)
                }
            })
            .collect();
        RadialTable { coeffs }
    }

    #[inline]
    fn get(&self, n2: i64) -> (QpCoefficients, f64) {
        self.coeffs[n2 as usize]
    }
}

/// A dense cube `[-r, r]^dim` of values, last axis fastest.
struct Cube {
    dim: usize,
    r: i64,
    side: usize,
    data: Vec<f64>,
}

impl Cube {
    fn new(dim: usize, r: i64) -> Self {
        let side = (2 * r + 1) as usize;
        Cube {
            dim,
            r,
            side,
            data: vec![0.0; side.pow(dim as u32)],
        }
    }

    fn index(&self, n: &[i64; 3]) -> usize {
        let mut i = 0;
        for &x in &n[..self.dim] {
            i = i * self.side + (x + self.r) as usize;
        }
        i
    }

    /// Convolves in place with `exp(-Δ²/(2w²))` along every axis.
    fn gaussian_blur(&mut self, w: f64) {
        let side = self.side;
        let kernel: Vec<f64> = (0..side)
            .map(|d| (-((d * d) as f64) / (2.0 * w * w)).exp())
            .collect();
        for axis in 0..self.dim {
            let stride = side.pow((self.dim - 1 - axis) as u32);
            let lines = self.data.len() / side;
            let src = self.data.clone();
            let starts: Vec<usize> = (0..lines)
                .map(|l| (l / stride) * stride * side + l % stride)
                .collect();
            let out: Vec<Vec<f64>> = starts
                .par_iter()
                .map(|&start| {
                    let line: Vec<f64> = (0..side).map(|t| src[start + t * stride]).collect();
                    let nz: Vec<usize> = (0..side).filter(|&t| line[t] != 0.0).collect();
                    (0..side)
                        .map(|i| {
                            let mut acc = 0.0;
                            for &j in &nz {
                                acc += kernel[i.abs_diff(j)] * line[j];
                            }
                            acc
                        })
                        .collect()
                })
                .collect();
            for (start, line) in starts.iter().zip(out) {
                for (t, x) in line.into_iter().enumerate() {
                    self.data[start + t * stride] = x;
                }
            }
        }
    }
}

fn ball_points(dim: usize, r2: i64) -> Vec<[i64; 3]> {
    let r = (r2 as f64).sqrt().floor() as i64;
    let mut pts = Vec::new();
    let range = |active: bool| if active { -r..=r } else { 0..=0 };
    for a in range(true) {
        for b in range(dim >= 2) {
            for c in range(dim >= 3) {
                let n2 = a * a + b * b + c * c;
                if n2 != 0 && n2 <= r2 {
                    pts.push([a, b, c]);
                }
            }
        }
    }
    pts
}

/// Size of the orbit of `n` (with `n₁ ≥ n₂ ≥ … ≥ 0`) under signed permutations.
fn orbit_size(n: &[i64; 3], dim: usize) -> f64 {
    let c = &n[..dim];
    let mut size = 1.0;
    for &x in c {
        if x != 0 {
            size *= 2.0;
        }
    }
    let mut perms = (1..=dim).product::<usize>() as f64;
    let mut i = 0;
    while i < dim {
        let mut j = i;
        while j < dim && c[j] == c[i] {
            j += 1;
        }
        perms /= (1..=(j - i)).product::<usize>() as f64;
        i = j;
    }
    size * perms
}

fn in_cone(n: &[i64; 3], dim: usize) -> bool {
    let c = &n[..dim];
    c.iter().all(|&x| x >= 0) && c.windows(2).all(|w| w[0] >= w[1])
}

fn norm2(n: &[i64; 3]) -> i64 {
    n[0] * n[0] + n[1] * n[1] + n[2] * n[2]
}

/// `[E₂ᵇ single sum, pair sum, leading sum]` for one scale.
fn evaluate(spec: &PotentialSpec, opts: &ScalingOptions) -> (usize, [f64; 3]) {
    let (g, s) = spec.gaussian_params().expect("gaussian checked by caller");
    let dim = opts.dim;
    let w = s * spec.lambda_scale() / std::f64::consts::TAU;
    let rad = opts.cutoff_factor * w;
    let r2 = (rad * rad).floor() as i64;
    let r = (r2 as f64).sqrt().floor() as i64;
    let table = RadialTable::new(spec, 4 * r2 + 4);
    let pts = ball_points(dim, r2);

    let mut conv_gs = Cube::new(dim, r);
    let mut conv_g2 = Cube::new(dim, r);
    for n in &pts {
        let (q, _) = table.get(norm2(n));
        let i = conv_gs.index(n);
        conv_gs.data[i] = q.gamma * q.sigma;
        conv_g2.data[i] = q.gamma * q.gamma;
    }
    conv_gs.gaussian_blur(w);
    conv_g2.gaussian_blur(w);

    let s_gamma2 = compensated_sum(pts.iter().map(|n| table.get(norm2(n)).0.gamma.powi(2)));
    let s_vgamma = compensated_sum(pts.iter().map(|n| {
        let (q, v) = table.get(norm2(n));
        v * q.gamma * (q.sigma - q.gamma)
    }));
    let v0 = spec.vhat0();

    let mut single = NeumaierSum::default();
    let mut lead = NeumaierSum::default();
    for n in &pts {
        let n2 = norm2(n);
        let (q, v) = table.get(n2);
        let k2 = TWO_PI_SQ * n2 as f64;
        let (sk, gk) = (q.sigma, q.gamma);
        let i = conv_gs.index(n);
        // Remove the ℓ = k term, which the displayed sum excludes.
        let c1 = g * conv_gs.data[i] - v0 * gk * sk;
        let c2 = g * conv_g2.data[i] - v0 * gk * gk;
        let d = sk - gk;
        let f = -((sk * sk + gk * gk) * c1 + 2.0 * sk * gk * c2)
            - v * d * d * s_gamma2
            - 2.0 * sk * gk * s_vgamma
            + 2.0 * v * gk * d * d * d
            + 0.5 * v * (sk * sk + gk * gk);
        let pre = k2 * gk * sk / q.eps;
        single += pre * (k2 * gk * sk - f);
        lead += pre * sk * sk * c1;
    }

    let cone: Vec<[i64; 3]> = pts.iter().filter(|n| in_cone(n, dim)).copied().collect();
    let ball: Vec<([i64; 3], i64)> = pts.iter().map(|n| (*n, norm2(n))).collect();
    let pair_terms: Vec<f64> = cone
        .par_iter()
        .map(|k| {
            let kn2 = norm2(k);
            let tk = table.get(kn2);
            let mut acc = NeumaierSum::default();
            for (l, ln2) in &ball {
                let p = [k[0] + l[0], k[1] + l[1], k[2] + l[2]];
                let pn2 = norm2(&p);
                if pn2 == 0 {
                    continue;
                }
                let t = Triple {
                    k: tk,
                    l: table.get(*ln2),
                    p: table.get(pn2),
                };
                let (g1, g2) = (g1_from(&t), g2_from(&t));
                let qp = t.p.0;
                let e3 = tk.0.eps + t.l.0.eps + qp.eps;
                let p2 = TWO_PI_SQ * pn2 as f64;
                let sg = qp.sigma * qp.gamma;
                let s2g2 = qp.sigma * qp.sigma + qp.gamma * qp.gamma;
                acc += 6.0 * (p2 * g2 / e3) * (2.0 * sg * g1 / qp.eps - 3.0 * s2g2 * g2 / e3);
            }
            orbit_size(k, dim) * acc.value()
        })
        .collect();
    let pair = compensated_sum(pair_terms);
    (pts.len(), [single.value(), pair, lead.value()])
}

/// Least-squares exponent of `y ≈ c·x^q`.
fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || ys.iter().any(|&y| y <= 0.0) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Fits `y = AΛ^q + BΛ` minimizing `Σ ((y - model)/y)²`.
fn two_term_exponent(ls: &[f64], ys: &[f64]) -> Option<f64> {
    if ls.len() < 3 || ys.contains(&0.0) {
        return None;
    }
    let resid = |q: f64| -> f64 {
        // Weighted linear least squares for (A, B) at fixed q.
        let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&l, &y) in ls.iter().zip(ys) {
            let (u, v) = (l.powf(q) / y, l / y);
            a11 += u * u;
            a12 += u * v;
            a22 += v * v;
            b1 += u;
            b2 += v;
        }
        let det = a11 * a22 - a12 * a12;
        if det.abs() < 1e-300 {
            return f64::INFINITY;
        }
        let a = (b1 * a22 - b2 * a12) / det;
        let b = (a11 * b2 - a12 * b1) / det;
        ls.iter()
            .zip(ys)
            .map(|(&l, &y)| ((y - a * l.powf(q) - b * l) / y).powi(2))
            .sum()
    };
    // Scan then refine by golden section; q = 1 is degenerate with the BΛ term.
    let grid: Vec<f64> = (0..=300).map(|i| 1.05 + i as f64 * 0.01).collect();
    let best = grid
        .iter()
        .copied()
        .min_by(|a, b| resid(*a).total_cmp(&resid(*b)))?;
    let (mut lo, mut hi) = ((best - 0.01).max(1.05), best + 0.01);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let x1 = hi - phi * (hi - lo);
        let x2 = lo + phi * (hi - lo);
        if resid(x1) < resid(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Evaluates `E₂ᵇ(Λ)` and its leading double sum for each scale.
pub fn scaling_probe(
    spec: &PotentialSpec,
    lambdas: &[f64],
    opts: &ScalingOptions,
) -> Result<ScalingReport> {
    if !spec.is_gaussian() {
        return Err(Error::Unsupported(
            "the scaling probe needs a smooth (gaussian) potential".into(),
        ));
    }
    if !(1..=3).contains(&opts.dim) {
        return Err(Error::invalid("dim", "must be 1, 2 or 3"));
    }
    if !(opts.cutoff_factor.is_finite() && opts.cutoff_factor > 0.0) {
        return Err(Error::invalid("cutoff_factor", "must be positive"));
    }
    if lambdas.is_empty() || lambdas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(
            "lambda_scale",
            "must be nonempty and strictly increasing",
        ));
    }
    let mut rows = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        let scaled = spec.with_scale(l)?;
        let (n_modes, [single, pair, lead]) = evaluate(&scaled, opts);
        let e2 = single + pair;
        let (_, s) = spec.gaussian_params().expect("gaussian");
        info!("scaling Λ={l}: {n_modes} modes, E2={e2:.6e}, lead={lead:.6e}");
        rows.push(ScalingRow {
            lambda: l,
            width: s * l / std::f64::consts::TAU,
            n_modes,
            e2_binding: e2,
            e2_over_lambda2: e2 / (l * l),
            single_sum: single,
            pair_sum: pair,
            leading_sum: lead,
            leading_ratio: lead / e2,
        });
    }
    let ls: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
    let es: Vec<f64> = rows.iter().map(|r| r.e2_binding).collect();
    let leading_growth = rows
        .windows(2)
        .map(|w| w[1].leading_sum / w[0].leading_sum)
        .collect();
    let top = rows.last().expect("nonempty");
    Ok(ScalingReport {
        loglog_exponent: loglog_slope(&ls, &es),
        leading_exponent: two_term_exponent(&ls, &es),
        leading_growth,
        nonnegative_at_max: top.e2_binding >= 0.0,
        leading_ratio_at_max: top.leading_ratio,
        rows,
    })
}
