//! Independent degree-by-degree direct solver for `E(q, phi) = 0`, used as
//! the brute-force cross-check of the corrective iteration, plus the
//! canonical gauge normalization that makes coefficient-level comparison
//! between the two routes meaningful.

use crate::billiard::{residual, seed_pair};
use crate::error::{Error, Result};
use crate::linalg::solve_dense;
use crate::numerics::{zero_tolerance, Rotation, Scalar};
use crate::series::{BiSeries, UniSeries};
use rug::Float;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub struct DirectSolution {
    pub q: UniSeries,
    pub phi: BiSeries,
    /// Highest odd degree whose residual coefficients were forced to zero.
    pub solved_through: usize,
}

/// Kills the residual degree by degree, starting from the analytic seed.
///
/// At the odd degree `d = 2n + 1` the unknowns are the symmetric pairs
/// `phi_{j,k} = phi_{k,j}` with `j + k = d`, minus the kernel pair
/// `(n+1, n)` fixed to zero by the gauge, plus the support coefficient
/// `q_{d+1}`. The linear system is assembled by probing: the residual is
/// evaluated at a unit perturbation of each unknown, which is exact because
/// the degree-`d` residual coefficients are affine in the new top-degree
/// unknowns at fixed lower-order data. Each degree is a small dense solve.
pub fn solve_direct(rot: &Rotation, max_odd_degree: usize) -> Result<DirectSolution> {
    if max_odd_degree % 2 == 0 || max_odd_degree < 3 {
        return Err(Error::Parse(format!(
            "max_odd_degree {max_odd_degree} must be odd and at least 3"
        )));
    }
    let prec = rot.prec();
    let tol = zero_tolerance(prec);
    let d_full = max_odd_degree;
    let (mut q, mut phi) = seed_pair(rot, d_full)?;

    for deg in (3..=d_full).step_by(2) {
        let n = (deg - 1) / 2;
        // equation rows: residual coefficients at (j, deg - j), j > deg - j
        let rows: Vec<(usize, usize)> = ((n + 1)..=deg).map(|j| (j, deg - j)).collect();
        // unknown phi pairs exclude the gauge direction (n + 1, n)
        let phi_unknowns: Vec<(usize, usize)> =
            rows.iter().copied().filter(|&(j, _)| j != n + 1).collect();

        // evaluations happen at truncation deg + 1 so the q_{deg+1} probe
        // reaches degree deg through q'
        let trunc = deg + 1;
        let q_t = q.resized(trunc);
        let phi_t = phi.resized(trunc);
        let eval = |qq: &UniSeries, pp: &BiSeries| -> Result<Vec<Scalar>> {
            let e = residual(qq, pp, rot)?;
            Ok(rows.iter().map(|&(j, k)| e.coeff(j, k).clone()).collect())
        };
        let base = eval(&q_t, &phi_t)?;

        let probe_pair = |&(j, k): &(usize, usize)| -> Result<Vec<Scalar>> {
            let mut pp = phi_t.clone();
            *pp.coeff_mut(j, k) += &Scalar::one(prec);
            *pp.coeff_mut(k, j) += &Scalar::one(prec);
            let col = eval(&q_t, &pp)?;
            Ok(col
                .iter()
                .zip(base.iter())
                .map(|(a, b)| a - b)
                .collect())
        };
        #[cfg(feature = "parallel")]
        let phi_cols: Vec<Vec<Scalar>> = phi_unknowns
            .par_iter()
            .map(probe_pair)
            .collect::<Result<_>>()?;
        #[cfg(not(feature = "parallel"))]
        let phi_cols: Vec<Vec<Scalar>> = phi_unknowns
            .iter()
            .map(probe_pair)
            .collect::<Result<_>>()?;

        let q_col: Vec<Scalar> = {
            let mut qq = q_t.clone();
            *qq.coeff_mut(deg + 1) += &Float::with_val(prec, 1);
            let col = eval(&qq, &phi_t)?;
            col.iter().zip(base.iter()).map(|(a, b)| a - b).collect()
        };

        let n_unknowns = phi_unknowns.len() + 1;
        assert_eq!(n_unknowns, rows.len());
        let mut a = vec![vec![Scalar::zero(prec); n_unknowns]; n_unknowns];
        for (col_idx, col) in phi_cols.iter().chain(std::iter::once(&q_col)).enumerate() {
            for (row_idx, v) in col.iter().enumerate() {
                a[row_idx][col_idx] = v.clone();
            }
        }
        let rhs: Vec<Scalar> = base.iter().map(|b| -b).collect();
        let x = solve_dense(a, rhs, &tol, deg)?;

        for (i, &(j, k)) in phi_unknowns.iter().enumerate() {
            *phi.coeff_mut(j, k) += &x[i];
            *phi.coeff_mut(k, j) += &x[i];
        }
        let xq = &x[n_unknowns - 1];
        if xq.im.clone().abs() > tol {
            return Err(Error::NonRealResult {
                imag: xq.im.to_f64(),
            });
        }
        *q.coeff_mut(deg + 1) += &xq.re;

        // the solve is exact in theory; anything above tolerance here is a
        // conditioning problem worth failing on
        let check = eval(&q.resized(trunc), &phi.resized(trunc))?;
        let allowed = Float::with_val(prec, &tol * &Float::with_val(prec, 10));
        for (idx, v) in check.iter().enumerate() {
            let mag = v.abs();
            if mag > allowed {
                return Err(Error::VerificationFailed {
                    what: format!("direct solve at degree {deg}, row {idx}"),
                    defect: mag.to_f64(),
                    tolerance: allowed.to_f64(),
                });
            }
        }
    }

    Ok(DirectSolution {
        q,
        phi,
        solved_through: d_full,
    })
}

/// Replaces `phi(z, zbar)` by `phi(z A, zbar A)` with
/// `A = 1 + a (z zbar)^n`, the radial reparametrization that moves along
/// the one-parameter solution family at level `n` without changing `q`.
pub fn radial_substitute(phi: &BiSeries, n: usize, a: &Float) -> BiSeries {
    let prec = phi.prec();
    let d = phi.max_degree();
    let mut out = BiSeries::zero(prec, d);
    for (j, k, c) in phi.iter() {
        if c.is_zero() {
            continue;
        }
        let g = j + k;
        // A^g expands over binom(g, i) a^i (z zbar)^{n i}
        let mut weight = Float::with_val(prec, 1);
        let mut i = 0usize;
        loop {
            let (jj, kk) = (j + n * i, k + n * i);
            if jj + kk > d {
                break;
            }
            if !weight.is_zero() {
                let term = c.scale(&weight);
                *out.coeff_mut(jj, kk) += &term;
            }
            if i >= g {
                break;
            }
            weight *= (g - i) as u32;
            weight /= (i + 1) as u32;
            weight *= a;
            i += 1;
        }
    }
    out
}

/// The canonical representative of the solution family: the kernel-pair
/// coefficients `phi_{n+1,n}` are zeroed level by level through radial
/// reparametrizations. The direct solver produces this gauge natively; the
/// corrective iteration is normalized to it before coefficients are
/// compared.
pub fn canonical_gauge(phi: &BiSeries) -> Result<BiSeries> {
    let prec = phi.prec();
    let tol = zero_tolerance(prec);
    let d = phi.max_degree();
    let mut cur = phi.clone();
    if d < 3 {
        return Ok(cur);
    }
    for n in 1..=((d - 1) / 2) {
        let c = cur.coeff(n + 1, n).clone();
        if c.is_zero_within(&tol) {
            continue;
        }
        if c.im.clone().abs() > tol {
            return Err(Error::NonRealResult {
                imag: c.im.to_f64(),
            });
        }
        let a = -c.re;
        cur = radial_substitute(&cur, n, &a);
    }
    Ok(cur)
}
