//! The outer problem: choose an even polynomial correction `Delta q` so
//! that the averaged generating function satisfies
//! `Lambda_{2M}([S_{q + Delta q}]) = 1`, via a lower-triangular system in
//! the coefficients `eta_{2k}`, plus the conditioning diagnostics for the
//! scaled inverse of that system.

use crate::billiard::{SAssembler, SPack};
use crate::error::{Error, Result};
use crate::numerics::{zero_tolerance, Rotation, Scalar};
use crate::operators::diag_average;
use crate::series::{BiSeries, UniSeries};
use rug::ops::Pow;
use rug::Float;

/// `[S_q(phi^-, phi)]`: the diagonal part of the assembled generating
/// function.
pub fn average_s(q: &UniSeries, phi: &BiSeries, rot: &Rotation) -> Result<BiSeries> {
    let asm = SAssembler::new(phi, rot)?;
    Ok(diag_average(&asm.assemble(q, rot)?.s_minus))
}

pub fn average_s_from_pack(pack: &SPack) -> BiSeries {
    diag_average(&pack.s_minus)
}

/// The truncated outer system: `P[j][k] = [xi^{2k} p(zeta)]_{(j,j)}` for
/// `2 <= k <= j <= M`, the right-hand side `-[S_q]_{2j}`, and the solution
/// `eta_{2k}` once solved.
pub struct TriangularSystem {
    pub m: usize,
    /// Row `j` (stored at `j - 2`) holds `P_{j,k}` for `k = 2..=j`.
    pub p: Vec<Vec<Scalar>>,
    pub rhs: Vec<Scalar>,
    pub eta: Vec<Scalar>,
}

impl TriangularSystem {
    pub fn p_entry(&self, j: usize, k: usize) -> &Scalar {
        &self.p[j - 2][k - 2]
    }
}

/// The diagonal lower bound `mu^{2j} / (sqrt(2 pi) sqrt(j))`; pivots under
/// half of it indicate a broken convention upstream.
pub fn pivot_lower_bound(rot: &Rotation, j: usize) -> Float {
    let prec = rot.prec();
    let two_pi = Float::with_val(prec, rug::float::Constant::Pi) * 2u32;
    let mu2j = rot.mu().clone().pow((2 * j) as u32);
    mu2j / (two_pi.sqrt() * Float::with_val(prec, j as u32).sqrt())
}

/// Builds the triangular system from the current conjugacy series. Needs
/// truncation degree at least `2M`.
pub fn build_p(phi: &BiSeries, rot: &Rotation, m: usize) -> Result<TriangularSystem> {
    let asm = SAssembler::new(phi, rot)?;
    build_p_prepared(&asm, rot, m)
}

pub fn build_p_prepared(asm: &SAssembler, rot: &Rotation, m: usize) -> Result<TriangularSystem> {
    let d = asm.max_degree();
    if m < 2 || 2 * m > d {
        return Err(Error::BadTruncation { m, max_degree: d });
    }
    let prec = asm.p_of_zeta().prec();
    let mut p: Vec<Vec<Scalar>> = Vec::with_capacity(m - 1);
    for j in 2..=m {
        p.push(vec![Scalar::zero(prec); j - 1]);
    }
    for k in 2..=m {
        // [xi^{2k} p(zeta)]: one product per column off the power table
        let col = asm.xi_table().even_power(k).mul_truncated(asm.p_of_zeta());
        for j in k..=m {
            p[j - 2][k - 2] = col.coeff(j, j).clone();
        }
    }
    for j in 2..=m {
        let bound = pivot_lower_bound(rot, j);
        let actual = p[j - 2][j - 2].abs();
        if actual.clone() * 2u32 < bound {
            return Err(Error::DegeneratePivot {
                j,
                actual: actual.to_f64(),
                bound: bound.to_f64(),
            });
        }
    }
    Ok(TriangularSystem {
        m,
        p,
        rhs: Vec::new(),
        eta: Vec::new(),
    })
}

/// Result of one outer solve: the correction, the solved system, and the
/// re-verified average defect `max |Lambda_{2M}([S_{q + Delta q}]) - 1|`.
pub struct OuterSolution {
    pub delta_q: UniSeries,
    pub system: TriangularSystem,
    pub verified_defect: Float,
}

/// Solves for `Delta q = sum_{k=2}^{M} eta_{2k} t^{2k}` by forward
/// substitution and re-verifies the averaged equation with a fresh
/// assembly. The correction is real; imaginary residue above tolerance is
/// an error.
pub fn solve_delta_q(
    q: &UniSeries,
    phi: &BiSeries,
    rot: &Rotation,
    m: usize,
) -> Result<UniSeries> {
    let asm = SAssembler::new(phi, rot)?;
    Ok(solve_delta_q_prepared(&asm, q, rot, m)?.delta_q)
}

pub fn solve_delta_q_prepared(
    asm: &SAssembler,
    q: &UniSeries,
    rot: &Rotation,
    m: usize,
) -> Result<OuterSolution> {
    let prec = q.prec();
    let tol = zero_tolerance(prec);
    let mut sys = build_p_prepared(asm, rot, m)?;
    let pack = asm.assemble(q, rot)?;
    let avg = diag_average(&pack.s_minus);

    sys.rhs = (2..=m).map(|j| -avg.coeff(j, j)).collect();
    let mut eta: Vec<Scalar> = Vec::with_capacity(m - 1);
    for j in 2..=m {
        let mut acc = sys.rhs[j - 2].clone();
        for k in 2..j {
            acc.sub_prod(sys.p_entry(j, k), &eta[k - 2]);
        }
        eta.push(&acc / sys.p_entry(j, j));
    }
    sys.eta = eta;

    let mut delta_q = UniSeries::zero(prec, q.max_degree());
    for (i, e) in sys.eta.iter().enumerate() {
        let imag = e.im.clone().abs();
        if imag > tol {
            return Err(Error::NonRealResult {
                imag: imag.to_f64(),
            });
        }
        *delta_q.coeff_mut(2 * (i + 2)) = e.re.clone();
    }

    // re-verify with a fresh assembly of q + Delta q
    let q_star = q.try_add(&delta_q)?;
    let avg_star = diag_average(&asm.assemble(&q_star, rot)?.s_minus);
    let mut defect = Float::new(prec);
    for j in 0..=m {
        let mut c = avg_star.coeff(j, j).clone();
        if j == 0 {
            c -= &Scalar::from_real(q.coeff(0).clone());
        }
        let mag = c.abs();
        if mag > defect {
            defect = mag;
        }
    }
    let allowed = Float::with_val(prec, &tol * &Float::with_val(prec, 10));
    if defect > allowed {
        return Err(Error::VerificationFailed {
            what: format!("Lambda_{}([S]) = 1 after outer solve", 2 * m),
            defect: defect.to_f64(),
            tolerance: allowed.to_f64(),
        });
    }
    Ok(OuterSolution {
        delta_q,
        system: sys,
        verified_defect: defect,
    })
}

/// `|Gamma_{rho2} T_M^{-1} Gamma_{rho1}^{-1}|_1`, computed column by
/// column with explicit forward substitution.
pub fn conditioning_report(sys: &TriangularSystem, rho1: &Float, rho2: &Float) -> Float {
    let prec = rho1.prec();
    let mut worst = Float::new(prec);
    for k in 2..=sys.m {
        // solve T x = e_k
        let mut x: Vec<Scalar> = vec![Scalar::zero(prec); sys.m - 1];
        for j in k..=sys.m {
            let mut acc = if j == k {
                Scalar::one(prec)
            } else {
                Scalar::zero(prec)
            };
            for i in k..j {
                acc.sub_prod(sys.p_entry(j, i), &x[i - 2]);
            }
            x[j - 2] = &acc / sys.p_entry(j, j);
        }
        let scale_in = rho1.clone().pow((2 * k) as u32).recip();
        let mut col_sum = Float::new(prec);
        for j in k..=sys.m {
            col_sum += x[j - 2].abs() * rho2.clone().pow((2 * j) as u32);
        }
        col_sum *= &scale_in;
        if col_sum > worst {
            worst = col_sum;
        }
    }
    worst
}

/// The radii of the conditioning measurement:
/// `rho1 = rho / (1 + c1 rho^2)^M`, `rho2 = mu rho1`.
pub fn conditioning_radii(rot: &Rotation, rho: &Float, c1: &Float, m: usize) -> (Float, Float) {
    let prec = rho.prec();
    let base = Float::with_val(prec, 1) + Float::with_val(prec, c1 * &rho.clone().square());
    let rho1 = rho.clone() / base.pow(m as u32);
    let rho2 = Float::with_val(prec, rot.mu() * &rho1);
    (rho1, rho2)
}
