//! The cohomological operator calculus: difference operators, their
//! small-divisor inverses, projections, the diagonal average, and the
//! radial D / D-bar pair.
//!
//! All operators are coefficientwise maps. Denominators come from the
//! rotation's power cache, so every inversion of `nabla`, `nabla_plus`, or
//! the zero-average difference uses the same `lambda^k` bits.

use crate::error::{Error, Result};
use crate::numerics::{zero_tolerance, Rotation, Scalar};
use crate::series::BiSeries;
use rug::Float;

/// `nabla f = f^- - lambda^{-1} f`: coefficient `(j,k)` scaled by
/// `lambda^{k-j} - lambda^{-1}`. Kernel is spanned by `z^{j+1} zbar^j`.
pub fn nabla(s: &BiSeries, rot: &Rotation) -> BiSeries {
    let inv_lambda = rot.lambda_pow(-1);
    s.map_coeffs(|j, k, c| {
        let mut d = rot.lambda_pow(k as i64 - j as i64).clone();
        d -= inv_lambda;
        c * &d
    })
}

/// `nabla_plus f = f - lambda f^+`: coefficient `(j,k)` scaled by
/// `1 - lambda^{j-k+1}`. Kernel is spanned by `z^j zbar^{j+1}`.
pub fn nabla_plus(s: &BiSeries, rot: &Rotation) -> BiSeries {
    s.map_coeffs(|j, k, c| c * &rot.one_minus_lambda_pow(j as i64 - k as i64 + 1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InvKind {
    /// Inverts `nabla` on the complement of its kernel (resonance `j = k+1`).
    E,
    /// Inverts `nabla_plus` on the complement of its kernel (resonance `k = j+1`).
    EPlus,
    /// Divides by `1 - lambda^{j-k}` off the diagonal: maps `f - f^+` to
    /// `f - [f]` (resonance `j = k`).
    ETilde,
}

pub(crate) fn resonant(kind: InvKind, j: usize, k: usize) -> bool {
    match kind {
        InvKind::E => j == k + 1,
        InvKind::EPlus => k == j + 1,
        InvKind::ETilde => j == k,
    }
}

/// Small-divisor inverse. Resonant coefficients must already be below zero
/// tolerance (project first); they are zeroed rather than divided, and a
/// resonant coefficient above tolerance is a logic error upstream, reported
/// as `ResonantInput`.
pub fn inv_nabla(s: &BiSeries, rot: &Rotation, kind: InvKind) -> Result<BiSeries> {
    let tol = zero_tolerance(s.prec());
    for (j, k, c) in s.iter() {
        if resonant(kind, j, k) && !c.is_zero_within(&tol) {
            return Err(Error::ResonantInput {
                j,
                k,
                magnitude: c.abs().to_f64(),
            });
        }
    }
    let inv_lambda = rot.lambda_pow(-1);
    let out = s.map_coeffs(|j, k, c| {
        if resonant(kind, j, k) {
            return Scalar::zero(s.prec());
        }
        let denom = match kind {
            InvKind::E => {
                let mut d = rot.lambda_pow(k as i64 - j as i64).clone();
                d -= inv_lambda;
                d
            }
            InvKind::EPlus => rot.one_minus_lambda_pow(j as i64 - k as i64 + 1),
            InvKind::ETilde => rot.one_minus_lambda_pow(j as i64 - k as i64),
        };
        c / &denom
    });
    Ok(out)
}

/// `[f]`: keeps only the diagonal coefficients `j = k` (the angular average
/// in polar coordinates).
pub fn diag_average(s: &BiSeries) -> BiSeries {
    s.map_coeffs(|j, k, c| {
        if j == k {
            c.clone()
        } else {
            Scalar::zero(s.prec())
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProjKind {
    /// Projection onto `K = span{z^{j+1} zbar^j}`, i.e. `[zbar f]/zbar`.
    Pi,
    /// Projection onto `K^+ = span{z^j zbar^{j+1}}`, i.e. `[z f]/z`.
    PiPlus,
}

pub fn project(s: &BiSeries, kind: ProjKind) -> BiSeries {
    s.map_coeffs(|j, k, c| {
        let keep = match kind {
            ProjKind::Pi => j == k + 1,
            ProjKind::PiPlus => k == j + 1,
        };
        if keep {
            c.clone()
        } else {
            Scalar::zero(s.prec())
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RadialKind {
    /// `D(f) = sum n f_n (z zbar)^n`.
    D,
    /// `Dbar(f) = sum (f_n / n) (z zbar)^n`, dropping the constant term.
    DBar,
}

/// Radial scaling on diagonal series; `Dbar(D(f)) = f - f_0`. Inputs with
/// off-diagonal mass above tolerance are rejected.
pub fn radial_d(s: &BiSeries, kind: RadialKind) -> Result<BiSeries> {
    let tol = zero_tolerance(s.prec());
    for (j, k, c) in s.iter() {
        if j != k && !c.is_zero_within(&tol) {
            return Err(Error::NonDiagonalInput {
                j,
                k,
                magnitude: c.abs().to_f64(),
            });
        }
    }
    let out = s.map_coeffs(|j, k, c| {
        if j != k || j == 0 {
            return Scalar::zero(s.prec());
        }
        let n = Float::with_val(s.prec(), j);
        match kind {
            RadialKind::D => c.scale(&n),
            RadialKind::DBar => {
                let inv = Float::with_val(s.prec(), 1) / n;
                c.scale(&inv)
            }
        }
    });
    Ok(out)
}

/// Multiplication by `z`: index map `(j, k) -> (j+1, k)`. The top total
/// degree falls off the truncation.
pub fn mul_z(s: &BiSeries) -> BiSeries {
    let mut out = BiSeries::zero(s.prec(), s.max_degree());
    for (j, k, c) in s.iter() {
        if j + k + 1 <= s.max_degree() {
            *out.coeff_mut(j + 1, k) = c.clone();
        }
    }
    out
}

pub fn mul_zbar(s: &BiSeries) -> BiSeries {
    let mut out = BiSeries::zero(s.prec(), s.max_degree());
    for (j, k, c) in s.iter() {
        if j + k + 1 <= s.max_degree() {
            *out.coeff_mut(j, k + 1) = c.clone();
        }
    }
    out
}

/// Division by `z`; every coefficient with `j = 0` must be below tolerance.
pub fn div_z(s: &BiSeries) -> Result<BiSeries> {
    let tol = zero_tolerance(s.prec());
    let mut out = BiSeries::zero(s.prec(), s.max_degree());
    for (j, k, c) in s.iter() {
        if j == 0 {
            if !c.is_zero_within(&tol) {
                return Err(Error::NonDiagonalInput {
                    j,
                    k,
                    magnitude: c.abs().to_f64(),
                });
            }
        } else {
            *out.coeff_mut(j - 1, k) = c.clone();
        }
    }
    Ok(out)
}

/// Division by `zbar`; every coefficient with `k = 0` must be below tolerance.
pub fn div_zbar(s: &BiSeries) -> Result<BiSeries> {
    let tol = zero_tolerance(s.prec());
    let mut out = BiSeries::zero(s.prec(), s.max_degree());
    for (j, k, c) in s.iter() {
        if k == 0 {
            if !c.is_zero_within(&tol) {
                return Err(Error::NonDiagonalInput {
                    j,
                    k,
                    magnitude: c.abs().to_f64(),
                });
            }
        } else {
            *out.coeff_mut(j, k - 1) = c.clone();
        }
    }
    Ok(out)
}
