//! Truncated bivariate and univariate formal power series.
//!
//! `BiSeries` is a dense triangular array over total degree `j + k <=
//! max_degree` in the variables `(z, zbar)`; `UniSeries` is a real-coefficient
//! polynomial in one variable. Multiplication and composition truncate
//! eagerly at `max_degree`; addition and subtraction are exact on the
//! retained range. Norms are computed at caller-supplied radii.

use crate::error::{Error, Result};
use crate::numerics::{zero_tolerance, Rotation, Scalar};
use rug::Float;
use std::io::{BufRead, Write};
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    Z,
    Zbar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShiftDir {
    /// `f^+(z, zbar) = f(lambda z, lambda^{-1} zbar)`
    Plus,
    /// `f^-(z, zbar) = f(lambda^{-1} z, lambda zbar)`
    Minus,
}

fn tri(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Degree-truncated bivariate series `sum f_{j,k} z^j zbar^k`, `j + k <=
/// max_degree`, with complex coefficients at a fixed precision.
#[derive(Clone, Debug)]
pub struct BiSeries {
    max_degree: usize,
    prec: u32,
    coeffs: Vec<Scalar>,
}

impl BiSeries {
    pub fn zero(prec: u32, max_degree: usize) -> Self {
        let len = tri(max_degree + 2);
        BiSeries {
            max_degree,
            prec,
            coeffs: vec![Scalar::zero(prec); len],
        }
    }

    pub fn one(prec: u32, max_degree: usize) -> Self {
        let mut s = Self::zero(prec, max_degree);
        *s.coeff_mut(0, 0) = Scalar::one(prec);
        s
    }

    pub fn monomial(prec: u32, max_degree: usize, j: usize, k: usize, value: Scalar) -> Self {
        let mut s = Self::zero(prec, max_degree);
        *s.coeff_mut(j, k) = value;
        s
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    #[inline]
    fn index(&self, j: usize, k: usize) -> usize {
        debug_assert!(j + k <= self.max_degree);
        tri(j + k) + j
    }

    #[inline]
    pub fn coeff(&self, j: usize, k: usize) -> &Scalar {
        &self.coeffs[self.index(j, k)]
    }

    #[inline]
    pub fn coeff_mut(&mut self, j: usize, k: usize) -> &mut Scalar {
        let i = self.index(j, k);
        &mut self.coeffs[i]
    }

    /// Iterates `(j, k, coeff)` in degree-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &Scalar)> {
        let d_max = self.max_degree;
        (0..=d_max)
            .flat_map(move |d| (0..=d).map(move |j| (j, d - j)))
            .zip(self.coeffs.iter())
            .map(|((j, k), c)| (j, k, c))
    }

    fn cells(&self) -> Vec<(usize, usize)> {
        (0..=self.max_degree)
            .flat_map(|d| (0..=d).map(move |j| (j, d - j)))
            .collect()
    }

    /// Coefficientwise map in degree-major order.
    pub fn map_coeffs(&self, f: impl Fn(usize, usize, &Scalar) -> Scalar) -> Self {
        let coeffs = self.iter().map(|(j, k, c)| f(j, k, c)).collect();
        BiSeries {
            max_degree: self.max_degree,
            prec: self.prec,
            coeffs,
        }
    }

    pub fn ensure_same_degree(&self, other: &Self) -> Result<()> {
        if self.max_degree != other.max_degree {
            return Err(Error::DegreeMismatch {
                left: self.max_degree,
                right: other.max_degree,
            });
        }
        Ok(())
    }

    pub fn try_add(&self, rhs: &Self) -> Result<Self> {
        self.ensure_same_degree(rhs)?;
        Ok(self + rhs)
    }

    pub fn try_sub(&self, rhs: &Self) -> Result<Self> {
        self.ensure_same_degree(rhs)?;
        Ok(self - rhs)
    }

    pub fn try_mul(&self, rhs: &Self) -> Result<Self> {
        self.ensure_same_degree(rhs)?;
        Ok(self * rhs)
    }

    /// `self += w * other`, coefficientwise.
    pub fn add_scaled_assign(&mut self, other: &Self, w: &Scalar) {
        assert_eq!(self.max_degree, other.max_degree);
        for (acc, c) in self.coeffs.iter_mut().zip(other.coeffs.iter()) {
            acc.add_prod(w, c);
        }
    }

    pub fn scale(&self, w: &Scalar) -> Self {
        self.map_coeffs(|_, _, c| c * w)
    }

    pub fn scale_float(&self, t: &Float) -> Self {
        self.map_coeffs(|_, _, c| c.scale(t))
    }

    fn mul_cell(&self, rhs: &Self, j: usize, k: usize) -> Scalar {
        let mut acc = Scalar::zero(self.prec);
        for j1 in 0..=j {
            for k1 in 0..=k {
                let a = self.coeff(j1, k1);
                if a.is_zero() {
                    continue;
                }
                let b = rhs.coeff(j - j1, k - k1);
                if b.is_zero() {
                    continue;
                }
                acc.add_prod(a, b);
            }
        }
        acc
    }

    /// Truncated product, parallel over output coefficients when the
    /// `parallel` feature is on.
    pub fn mul_truncated(&self, rhs: &Self) -> Self {
        assert_eq!(self.max_degree, rhs.max_degree, "degree mismatch in mul");
        #[cfg(feature = "parallel")]
        {
            let cells = self.cells();
            let coeffs: Vec<Scalar> = cells
                .par_iter()
                .map(|&(j, k)| self.mul_cell(rhs, j, k))
                .collect();
            BiSeries {
                max_degree: self.max_degree,
                prec: self.prec,
                coeffs,
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.mul_sequential(rhs)
        }
    }

    /// Single-threaded reference path for the truncated product. Always
    /// available; `mul_truncated` falls back to it when the `parallel`
    /// feature is off.
    pub fn mul_sequential(&self, rhs: &Self) -> Self {
        assert_eq!(self.max_degree, rhs.max_degree, "degree mismatch in mul");
        let cells = self.cells();
        let coeffs: Vec<Scalar> = cells
            .iter()
            .map(|&(j, k)| self.mul_cell(rhs, j, k))
            .collect();
        BiSeries {
            max_degree: self.max_degree,
            prec: self.prec,
            coeffs,
        }
    }

    /// Multiplicative inverse of a unit series by Newton iteration:
    /// `x <- x (2 - a x)` doubles the correct order each round, so
    /// `a * invert_unit(a) = 1 + O_{max_degree + 1}`.
    pub fn invert_unit(&self) -> Result<Self> {
        let tol = zero_tolerance(self.prec);
        let c0 = self.coeff(0, 0);
        if c0.is_zero_within(&tol) {
            return Err(Error::NonUnit {
                magnitude: c0.abs().to_f64(),
            });
        }
        let mut x = Self::zero(self.prec, self.max_degree);
        *x.coeff_mut(0, 0) = c0.recip();
        let two = Self::one(self.prec, self.max_degree).scale(&Scalar::from_f64(self.prec, 2.0));
        let mut correct: usize = 1; // valid through degree correct - 1
        while correct <= self.max_degree {
            let ax = self.mul_truncated(&x);
            x = x.mul_truncated(&(&two - &ax));
            correct *= 2;
        }
        Ok(x)
    }

    /// `f(s)` for a univariate `f` and a bivariate argument with zero
    /// constant term, by Horner evaluation at the shared truncation.
    pub fn compose_uni(f: &UniSeries, s: &BiSeries) -> Result<BiSeries> {
        let tol = zero_tolerance(s.prec);
        let c0 = s.coeff(0, 0);
        if !c0.is_zero_within(&tol) {
            return Err(Error::NonzeroConstantTerm {
                magnitude: c0.abs().to_f64(),
            });
        }
        let d = s.max_degree;
        let top = f.max_degree().min(d);
        let mut r = BiSeries::zero(s.prec, d);
        *r.coeff_mut(0, 0) = Scalar::from_real(f.coeff(top).clone());
        for n in (0..top).rev() {
            r = r.mul_truncated(s);
            *r.coeff_mut(0, 0) += &Scalar::from_real(f.coeff(n).clone());
        }
        Ok(r)
    }

    /// `f^+` or `f^-`: coefficient `(j, k)` scaled by `lambda^{±(j-k)}`.
    pub fn shift(&self, dir: ShiftDir, rot: &Rotation) -> Self {
        let sign: i64 = match dir {
            ShiftDir::Plus => 1,
            ShiftDir::Minus => -1,
        };
        self.map_coeffs(|j, k, c| c * rot.lambda_pow(sign * (j as i64 - k as i64)))
    }

    /// `f(zbar, z)`: swaps the two indices.
    pub fn involution(&self) -> Self {
        self.map_coeffs(|j, k, _| self.coeff(k, j).clone())
    }

    /// Formal partial derivative; the output truncation drops by one.
    pub fn partial(&self, var: Var) -> Self {
        assert!(
            self.max_degree >= 1,
            "cannot differentiate a constant-only series"
        );
        let d_out = self.max_degree - 1;
        let mut out = Self::zero(self.prec, d_out);
        for d in 0..=d_out {
            for j in 0..=d {
                let k = d - j;
                let c = match var {
                    Var::Z => {
                        let n = Float::with_val(self.prec, j + 1);
                        self.coeff(j + 1, k).scale(&n)
                    }
                    Var::Zbar => {
                        let n = Float::with_val(self.prec, k + 1);
                        self.coeff(j, k + 1).scale(&n)
                    }
                };
                *out.coeff_mut(j, k) = c;
            }
        }
        out
    }

    /// `Lambda_M`: zeroes all total degrees above `M`, keeping the same
    /// truncation bound.
    pub fn truncated(&self, m: usize) -> Self {
        self.map_coeffs(|j, k, c| {
            if j + k <= m {
                c.clone()
            } else {
                Scalar::zero(self.prec)
            }
        })
    }

    /// Re-embeds into a larger truncation bound, padding with zeros (exact
    /// for polynomial data).
    pub fn embedded(&self, new_max_degree: usize) -> Self {
        assert!(new_max_degree >= self.max_degree);
        let mut out = Self::zero(self.prec, new_max_degree);
        for (j, k, c) in self.iter() {
            *out.coeff_mut(j, k) = c.clone();
        }
        out
    }

    /// Changes the truncation bound, dropping degrees that no longer fit.
    pub fn resized(&self, new_max_degree: usize) -> Self {
        let mut out = Self::zero(self.prec, new_max_degree);
        for (j, k, c) in self.iter() {
            if j + k <= new_max_degree {
                *out.coeff_mut(j, k) = c.clone();
            }
        }
        out
    }

    /// Smallest total degree carrying a coefficient above `tol`;
    /// `max_degree + 1` when there is none.
    pub fn order(&self, tol: &Float) -> usize {
        for d in 0..=self.max_degree {
            for j in 0..=d {
                if !self.coeff(j, d - j).is_zero_within(tol) {
                    return d;
                }
            }
        }
        self.max_degree + 1
    }

    pub fn max_coeff_magnitude(&self) -> Float {
        let mut max = Float::new(self.prec);
        for (_, _, c) in self.iter() {
            let a = c.abs();
            if a > max {
                max = a;
            }
        }
        max
    }

    /// Largest coefficient magnitude at total degrees `<= m`.
    pub fn max_coeff_magnitude_through(&self, m: usize) -> Float {
        let mut max = Float::new(self.prec);
        for (j, k, c) in self.iter() {
            if j + k <= m {
                let a = c.abs();
                if a > max {
                    max = a;
                }
            }
        }
        max
    }

    /// Weighted norm `max_{|alpha| <= derivatives} sum |d^alpha f_{j,k}|
    /// rho^{j+k}`; for `derivatives = 0` this is the plain majorant norm.
    pub fn weighted_norm(&self, rho: &Float, derivatives: usize) -> Float {
        let prec = self.prec;
        let mut best = Float::new(prec);
        for a1 in 0..=derivatives {
            for a2 in 0..=(derivatives - a1) {
                if a1 + a2 > self.max_degree {
                    continue;
                }
                let mut sum = Float::new(prec);
                let d_out = self.max_degree - a1 - a2;
                let mut rho_pow = Float::with_val(prec, 1);
                for d in 0..=d_out {
                    for j in 0..=d {
                        let k = d - j;
                        let c = self.coeff(j + a1, k + a2);
                        if c.is_zero() {
                            continue;
                        }
                        // falling factorials (j+a1)!/j! and (k+a2)!/k!
                        let mut w = Float::with_val(prec, 1);
                        for t in 0..a1 {
                            w *= (j + a1 - t) as u32;
                        }
                        for t in 0..a2 {
                            w *= (k + a2 - t) as u32;
                        }
                        sum += c.abs() * w * &rho_pow;
                    }
                    rho_pow *= rho;
                }
                if sum > best {
                    best = sum;
                }
            }
        }
        best
    }

    pub fn norm(&self, rho: &Float) -> Float {
        self.weighted_norm(rho, 0)
    }

    pub fn is_symmetric(&self, tol: &Float) -> bool {
        self.iter()
            .all(|(j, k, c)| j < k || c.approx_eq(self.coeff(k, j), tol))
    }

    /// Real-function structure: `conj(f_{j,k}) = f_{k,j}`.
    pub fn is_real_structured(&self, tol: &Float) -> bool {
        self.iter()
            .all(|(j, k, c)| j < k || c.conj().approx_eq(self.coeff(k, j), tol))
    }

    pub fn has_only_odd_degrees(&self, tol: &Float) -> bool {
        self.iter()
            .all(|(j, k, c)| (j + k) % 2 == 1 || c.is_zero_within(tol))
    }

    pub fn has_only_diagonal(&self, tol: &Float) -> bool {
        self.iter().all(|(j, k, c)| j == k || c.is_zero_within(tol))
    }

    pub fn max_asymmetry(&self) -> Float {
        let mut max = Float::new(self.prec);
        for (j, k, c) in self.iter() {
            if j < k {
                continue;
            }
            let d = (c - self.coeff(k, j)).abs();
            if d > max {
                max = d;
            }
        }
        max
    }

    /// Evaluates the truncated series at a point.
    pub fn eval(&self, z: &Scalar, zbar: &Scalar) -> Scalar {
        let prec = self.prec;
        let mut zp = Vec::with_capacity(self.max_degree + 1);
        let mut zbp = Vec::with_capacity(self.max_degree + 1);
        zp.push(Scalar::one(prec));
        zbp.push(Scalar::one(prec));
        for n in 1..=self.max_degree {
            zp.push(&zp[n - 1] * z);
            zbp.push(&zbp[n - 1] * zbar);
        }
        let mut acc = Scalar::zero(prec);
        for (j, k, c) in self.iter() {
            if c.is_zero() {
                continue;
            }
            acc.add_prod(c, &(&zp[j] * &zbp[k]));
        }
        acc
    }

    /// Dumps all retained coefficients as CSV rows `j,k,re,im` with exact
    /// decimal round-trip at working precision.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "j,k,re,im")?;
        for (j, k, c) in self.iter() {
            writeln!(
                w,
                "{},{},{},{}",
                j,
                k,
                float_to_decimal(&c.re),
                float_to_decimal(&c.im)
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, prec: u32) -> Result<Self> {
        let mut rows: Vec<(usize, usize, Scalar)> = Vec::new();
        let mut max_degree = 0usize;
        for (ln, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with("j,") {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 4 {
                return Err(Error::Parse(format!("line {}: expected 4 fields", ln + 1)));
            }
            let j: usize = parts[0]
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", ln + 1)))?;
            let k: usize = parts[1]
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", ln + 1)))?;
            let re = decimal_to_float(parts[2], prec)?;
            let im = decimal_to_float(parts[3], prec)?;
            max_degree = max_degree.max(j + k);
            rows.push((j, k, Scalar::new(re, im)));
        }
        let mut out = Self::zero(prec, max_degree);
        for (j, k, c) in rows {
            *out.coeff_mut(j, k) = c;
        }
        Ok(out)
    }
}

impl Add for &BiSeries {
    type Output = BiSeries;
    fn add(self, rhs: &BiSeries) -> BiSeries {
        assert_eq!(self.max_degree, rhs.max_degree, "degree mismatch in add");
        let coeffs = self
            .coeffs
            .iter()
            .zip(rhs.coeffs.iter())
            .map(|(a, b)| a + b)
            .collect();
        BiSeries {
            max_degree: self.max_degree,
            prec: self.prec,
            coeffs,
        }
    }
}

impl Sub for &BiSeries {
    type Output = BiSeries;
    fn sub(self, rhs: &BiSeries) -> BiSeries {
        assert_eq!(self.max_degree, rhs.max_degree, "degree mismatch in sub");
        let coeffs = self
            .coeffs
            .iter()
            .zip(rhs.coeffs.iter())
            .map(|(a, b)| a - b)
            .collect();
        BiSeries {
            max_degree: self.max_degree,
            prec: self.prec,
            coeffs,
        }
    }
}

impl Mul for &BiSeries {
    type Output = BiSeries;
    fn mul(self, rhs: &BiSeries) -> BiSeries {
        self.mul_truncated(rhs)
    }
}

impl Neg for &BiSeries {
    type Output = BiSeries;
    fn neg(self) -> BiSeries {
        self.map_coeffs(|_, _, c| -c)
    }
}

impl AddAssign<&BiSeries> for BiSeries {
    fn add_assign(&mut self, rhs: &BiSeries) {
        assert_eq!(self.max_degree, rhs.max_degree);
        for (a, b) in self.coeffs.iter_mut().zip(rhs.coeffs.iter()) {
            *a += b;
        }
    }
}

impl SubAssign<&BiSeries> for BiSeries {
    fn sub_assign(&mut self, rhs: &BiSeries) {
        assert_eq!(self.max_degree, rhs.max_degree);
        for (a, b) in self.coeffs.iter_mut().zip(rhs.coeffs.iter()) {
            *a -= b;
        }
    }
}

/// Cached even powers of a zero-constant base: `sq_powers[k] = (base^2)^k`.
///
/// One generating-function assembly composes six univariate series with the
/// same two arguments; sharing the power table turns five of those six
/// compositions into linear combinations.
pub struct PowerTable {
    base: BiSeries,
    sq_powers: Vec<BiSeries>,
}

impl PowerTable {
    pub fn new(base: &BiSeries) -> Self {
        let d = base.max_degree();
        let mut sq_powers = Vec::with_capacity(d / 2 + 1);
        sq_powers.push(BiSeries::one(base.prec(), d));
        if d >= 2 {
            let sq = base.mul_truncated(base);
            sq_powers.push(sq.clone());
            for k in 2..=(d / 2) {
                sq_powers.push(sq_powers[k - 1].mul_truncated(&sq));
            }
        }
        PowerTable {
            base: base.clone(),
            sq_powers,
        }
    }

    pub fn base(&self) -> &BiSeries {
        &self.base
    }

    /// `base^{2k}` from the cache.
    pub fn even_power(&self, k: usize) -> &BiSeries {
        &self.sq_powers[k]
    }

    pub fn max_even_power(&self) -> usize {
        self.sq_powers.len() - 1
    }

    /// `f(base)` as a linear combination of cached even powers plus at most
    /// one multiplication by `base` for the odd part.
    pub fn compose(&self, f: &UniSeries) -> BiSeries {
        let prec = self.base.prec();
        let d = self.base.max_degree();
        let mut even = BiSeries::zero(prec, d);
        let mut odd = BiSeries::zero(prec, d);
        let mut any_odd = false;
        for n in 0..=f.max_degree().min(d) {
            let c = f.coeff(n);
            if c.is_zero() {
                continue;
            }
            let w = Scalar::from_real(c.clone());
            if n % 2 == 0 {
                even.add_scaled_assign(&self.sq_powers[n / 2], &w);
            } else {
                odd.add_scaled_assign(&self.sq_powers[n / 2], &w);
                any_odd = true;
            }
        }
        if any_odd {
            even += &odd.mul_truncated(&self.base);
        }
        even
    }
}

/// Degree-truncated univariate series with real coefficients.
#[derive(Clone, Debug)]
pub struct UniSeries {
    max_degree: usize,
    prec: u32,
    coeffs: Vec<Float>,
}

impl UniSeries {
    pub fn zero(prec: u32, max_degree: usize) -> Self {
        UniSeries {
            max_degree,
            prec,
            coeffs: vec![Float::new(prec); max_degree + 1],
        }
    }

    pub fn constant(prec: u32, max_degree: usize, value: f64) -> Self {
        let mut s = Self::zero(prec, max_degree);
        s.coeffs[0] = Float::with_val(prec, value);
        s
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn coeff(&self, k: usize) -> &Float {
        &self.coeffs[k]
    }

    pub fn coeff_mut(&mut self, k: usize) -> &mut Float {
        &mut self.coeffs[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Float)> {
        self.coeffs.iter().enumerate()
    }

    pub fn try_add(&self, rhs: &Self) -> Result<Self> {
        if self.max_degree != rhs.max_degree {
            return Err(Error::DegreeMismatch {
                left: self.max_degree,
                right: rhs.max_degree,
            });
        }
        Ok(self + rhs)
    }

    /// Formal derivative; truncation drops by one.
    pub fn derivative(&self) -> Self {
        assert!(self.max_degree >= 1);
        let mut out = Self::zero(self.prec, self.max_degree - 1);
        for k in 1..=self.max_degree {
            out.coeffs[k - 1] = Float::with_val(self.prec, &self.coeffs[k] * k as u32);
        }
        out
    }

    pub fn truncated(&self, m: usize) -> Self {
        let mut out = self.clone();
        for k in (m + 1)..=self.max_degree {
            out.coeffs[k] = Float::new(self.prec);
        }
        out
    }

    pub fn embedded(&self, new_max_degree: usize) -> Self {
        assert!(new_max_degree >= self.max_degree);
        let mut out = Self::zero(self.prec, new_max_degree);
        out.coeffs[..=self.max_degree].clone_from_slice(&self.coeffs);
        out
    }

    pub fn resized(&self, new_max_degree: usize) -> Self {
        let mut out = Self::zero(self.prec, new_max_degree);
        for k in 0..=new_max_degree.min(self.max_degree) {
            out.coeffs[k] = self.coeffs[k].clone();
        }
        out
    }

    pub fn order(&self, tol: &Float) -> usize {
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.clone().abs() > *tol {
                return k;
            }
        }
        self.max_degree + 1
    }

    pub fn is_even(&self, tol: &Float) -> bool {
        self.coeffs
            .iter()
            .enumerate()
            .all(|(k, c)| k % 2 == 0 || c.clone().abs() <= *tol)
    }

    /// Horner evaluation of the truncation as a polynomial.
    pub fn eval(&self, t: &Float) -> Float {
        let mut acc = Float::new(self.prec);
        for c in self.coeffs.iter().rev() {
            acc *= t;
            acc += c;
        }
        acc
    }

    pub fn weighted_norm(&self, rho: &Float, derivatives: usize) -> Float {
        let prec = self.prec;
        let mut best = Float::new(prec);
        for a in 0..=derivatives {
            if a > self.max_degree {
                continue;
            }
            let mut sum = Float::new(prec);
            let mut rho_pow = Float::with_val(prec, 1);
            for k in 0..=(self.max_degree - a) {
                let c = &self.coeffs[k + a];
                if !c.is_zero() {
                    let mut w = Float::with_val(prec, 1);
                    for t in 0..a {
                        w *= (k + a - t) as u32;
                    }
                    sum += c.clone().abs() * w * &rho_pow;
                }
                rho_pow *= rho;
            }
            if sum > best {
                best = sum;
            }
        }
        best
    }

    pub fn norm(&self, rho: &Float) -> Float {
        self.weighted_norm(rho, 0)
    }

    /// Truncated cosine series `1 - t^2/2 + t^4/24 - ...`.
    pub fn cos_series(prec: u32, max_degree: usize) -> Self {
        let mut s = Self::zero(prec, max_degree);
        let mut c = Float::with_val(prec, 1);
        s.coeffs[0] = c.clone();
        for k in (2..=max_degree).step_by(2) {
            c /= (k - 1) as u32;
            c /= k as u32;
            c = -c;
            s.coeffs[k] = c.clone();
        }
        s
    }

    /// Truncated sine series `t - t^3/6 + ...`.
    pub fn sin_series(prec: u32, max_degree: usize) -> Self {
        let mut s = Self::zero(prec, max_degree);
        if max_degree == 0 {
            return s;
        }
        let mut c = Float::with_val(prec, 1);
        s.coeffs[1] = c.clone();
        for k in (3..=max_degree).step_by(2) {
            c /= (k - 1) as u32;
            c /= k as u32;
            c = -c;
            s.coeffs[k] = c.clone();
        }
        s
    }

    pub fn max_coeff_magnitude(&self) -> Float {
        let mut max = Float::new(self.prec);
        for c in &self.coeffs {
            let a = c.clone().abs();
            if a > max {
                max = a;
            }
        }
        max
    }

    /// CSV rows `k,re` with exact decimal round-trip.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "k,re")?;
        for (k, c) in self.iter() {
            writeln!(w, "{},{}", k, float_to_decimal(c))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, prec: u32) -> Result<Self> {
        let mut rows: Vec<(usize, Float)> = Vec::new();
        let mut max_degree = 0usize;
        for (ln, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with("k,") {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 2 {
                return Err(Error::Parse(format!("line {}: expected 2 fields", ln + 1)));
            }
            let k: usize = parts[0]
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", ln + 1)))?;
            let re = decimal_to_float(parts[1], prec)?;
            max_degree = max_degree.max(k);
            rows.push((k, re));
        }
        let mut out = Self::zero(prec, max_degree);
        for (k, c) in rows {
            out.coeffs[k] = c;
        }
        Ok(out)
    }
}

impl Add for &UniSeries {
    type Output = UniSeries;
    fn add(self, rhs: &UniSeries) -> UniSeries {
        assert_eq!(self.max_degree, rhs.max_degree);
        let coeffs = self
            .coeffs
            .iter()
            .zip(rhs.coeffs.iter())
            .map(|(a, b)| Float::with_val(self.prec, a + b))
            .collect();
        UniSeries {
            max_degree: self.max_degree,
            prec: self.prec,
            coeffs,
        }
    }
}

impl Sub for &UniSeries {
    type Output = UniSeries;
    fn sub(self, rhs: &UniSeries) -> UniSeries {
        assert_eq!(self.max_degree, rhs.max_degree);
        let coeffs = self
            .coeffs
            .iter()
            .zip(rhs.coeffs.iter())
            .map(|(a, b)| Float::with_val(self.prec, a - b))
            .collect();
        UniSeries {
            max_degree: self.max_degree,
            prec: self.prec,
            coeffs,
        }
    }
}

/// Exact decimal form of a binary float: enough digits that parsing at the
/// same precision reproduces the identical value.
pub fn float_to_decimal(x: &Float) -> String {
    if x.is_zero() {
        return "0".to_string();
    }
    x.to_string_radix(10, None)
}

pub fn decimal_to_float(s: &str, prec: u32) -> Result<Float> {
    let parsed = Float::parse(s).map_err(|e| Error::Parse(format!("bad float '{s}': {e}")))?;
    Ok(Float::with_val(prec, parsed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{golden_theta, make_rotation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rug::ops::Pow;

    const PREC: u32 = 256;

    fn rot() -> Rotation {
        make_rotation(&golden_theta(PREC), 0.5, 1.0, PREC, 64).unwrap()
    }

    fn z_plus_zbar(max_degree: usize) -> BiSeries {
        let mut s = BiSeries::zero(PREC, max_degree);
        *s.coeff_mut(1, 0) = Scalar::one(PREC);
        *s.coeff_mut(0, 1) = Scalar::one(PREC);
        s
    }

    fn random_series(rng: &mut ChaCha8Rng, max_degree: usize) -> BiSeries {
        let mut s = BiSeries::zero(PREC, max_degree);
        for d in 0..=max_degree {
            for j in 0..=d {
                *s.coeff_mut(j, d - j) = Scalar::new(
                    Float::with_val(PREC, rng.gen_range(-1.0f64..1.0)),
                    Float::with_val(PREC, rng.gen_range(-1.0f64..1.0)),
                );
            }
        }
        s
    }

    #[test]
    fn binomial_square() {
        let s = z_plus_zbar(4);
        let sq = &s * &s;
        let tol = zero_tolerance(PREC);
        assert!(sq.coeff(2, 0).approx_eq(&Scalar::one(PREC), &tol));
        assert!(sq.coeff(0, 2).approx_eq(&Scalar::one(PREC), &tol));
        assert!(sq.coeff(1, 1).approx_eq(&Scalar::from_f64(PREC, 2.0), &tol));
        assert_eq!(sq.order(&tol), 2);
    }

    #[test]
    fn zero_annihilates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_series(&mut rng, 6);
        let z = BiSeries::zero(PREC, 6);
        let prod = &a * &z;
        assert_eq!(prod.order(&zero_tolerance(PREC)), 7);
    }

    #[test]
    fn degree_mismatch_is_an_error() {
        let a = BiSeries::zero(PREC, 4);
        let b = BiSeries::zero(PREC, 5);
        assert!(matches!(
            a.try_mul(&b),
            Err(Error::DegreeMismatch { left: 4, right: 5 })
        ));
    }

    #[test]
    fn parallel_and_sequential_multiplication_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_series(&mut rng, 12);
        let b = random_series(&mut rng, 12);
        let p = a.mul_truncated(&b);
        let s = a.mul_sequential(&b);
        for ((_, _, x), (_, _, y)) in p.iter().zip(s.iter()) {
            assert_eq!(x.re, y.re);
            assert_eq!(x.im, y.im);
        }
    }

    #[test]
    fn submultiplicative_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = random_series(&mut rng, 8);
            let b = random_series(&mut rng, 8);
            let rho = Float::with_val(PREC, rng.gen_range(0.1f64..1.0));
            let lhs = (&a * &b).norm(&rho);
            let rhs = a.norm(&rho) * b.norm(&rho);
            assert!(lhs <= rhs);
        }
    }

    #[test]
    fn invert_unit_examples() {
        let tol = zero_tolerance(PREC);
        let one = BiSeries::one(PREC, 6);
        let inv = one.invert_unit().unwrap();
        assert!(inv.coeff(0, 0).approx_eq(&Scalar::one(PREC), &tol));
        assert_eq!((&inv - &one).order(&tol), 7);

        // 1/(1 + z zbar) = 1 - z zbar + (z zbar)^2 - ...
        let mut a = BiSeries::one(PREC, 6);
        *a.coeff_mut(1, 1) = Scalar::one(PREC);
        let inv = a.invert_unit().unwrap();
        for n in 0..=3 {
            let expect = Scalar::from_f64(PREC, if n % 2 == 0 { 1.0 } else { -1.0 });
            assert!(inv.coeff(n, n).approx_eq(&expect, &tol));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut u = random_series(&mut rng, 9);
        *u.coeff_mut(0, 0) = Scalar::from_f64(PREC, 1.25);
        let inv = u.invert_unit().unwrap();
        let prod = &u * &inv;
        let defect = &prod - &BiSeries::one(PREC, 9);
        assert!(defect.max_coeff_magnitude() <= tol);
    }

    #[test]
    fn invert_non_unit_rejected() {
        let s = z_plus_zbar(4);
        assert!(matches!(s.invert_unit(), Err(Error::NonUnit { .. })));
    }

    #[test]
    fn compose_examples() {
        let tol = zero_tolerance(PREC);
        let cos = UniSeries::cos_series(PREC, 8);

        // cos(0) = 1
        let zero_arg = BiSeries::zero(PREC, 8);
        let c = BiSeries::compose_uni(&cos, &zero_arg).unwrap();
        assert!(c.coeff(0, 0).approx_eq(&Scalar::one(PREC), &tol));
        assert_eq!((&c - &BiSeries::one(PREC, 8)).order(&tol), 9);

        // f(t) = t^2 applied to z + zbar
        let mut t2 = UniSeries::zero(PREC, 8);
        *t2.coeff_mut(2) = Float::with_val(PREC, 1);
        let sq = BiSeries::compose_uni(&t2, &z_plus_zbar(8)).unwrap();
        assert!(sq.coeff(1, 1).approx_eq(&Scalar::from_f64(PREC, 2.0), &tol));

        // cos(z - zbar): coefficient of z zbar is +1, from -(z - zbar)^2/2
        let mut zm = BiSeries::zero(PREC, 8);
        *zm.coeff_mut(1, 0) = Scalar::one(PREC);
        *zm.coeff_mut(0, 1) = Scalar::from_f64(PREC, -1.0);
        let c = BiSeries::compose_uni(&cos, &zm).unwrap();
        assert!(c.coeff(1, 1).approx_eq(&Scalar::one(PREC), &tol));
    }

    #[test]
    fn compose_rejects_nonzero_constant() {
        let cos = UniSeries::cos_series(PREC, 4);
        let s = BiSeries::one(PREC, 4);
        assert!(matches!(
            BiSeries::compose_uni(&cos, &s),
            Err(Error::NonzeroConstantTerm { .. })
        ));
    }

    #[test]
    fn power_table_matches_horner() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s = random_series(&mut rng, 10);
        *s.coeff_mut(0, 0) = Scalar::zero(PREC);
        let table = PowerTable::new(&s);
        let mut f = UniSeries::zero(PREC, 10);
        for k in 0..=10 {
            *f.coeff_mut(k) = Float::with_val(PREC, rng.gen_range(-1.0f64..1.0));
        }
        let a = BiSeries::compose_uni(&f, &s).unwrap();
        let b = table.compose(&f);
        let tol = zero_tolerance(PREC);
        assert!((&a - &b).max_coeff_magnitude() <= tol);
    }

    #[test]
    fn shift_examples() {
        let rot = rot();
        let tol = zero_tolerance(PREC);
        let z = BiSeries::monomial(PREC, 3, 1, 0, Scalar::one(PREC));
        let zp = z.shift(ShiftDir::Plus, &rot);
        assert!(zp.coeff(1, 0).approx_eq(rot.lambda(), &tol));

        let diag = BiSeries::monomial(PREC, 3, 1, 1, Scalar::one(PREC));
        let dp = diag.shift(ShiftDir::Plus, &rot);
        assert!(dp.coeff(1, 1).approx_eq(&Scalar::one(PREC), &tol));

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = random_series(&mut rng, 8);
        let round = s.shift(ShiftDir::Plus, &rot).shift(ShiftDir::Minus, &rot);
        assert!((&round - &s).max_coeff_magnitude() <= tol);
    }

    #[test]
    fn shift_preserves_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rot = rot();
        let s = random_series(&mut rng, 8);
        let rho = Float::with_val(PREC, 0.7);
        let n0 = s.norm(&rho);
        let np = s.shift(ShiftDir::Plus, &rot).norm(&rho);
        let nm = s.shift(ShiftDir::Minus, &rot).norm(&rho);
        let tol = zero_tolerance(PREC);
        assert!((np - &n0).abs() <= tol);
        assert!((nm - &n0).abs() <= tol);
    }

    #[test]
    fn involution_examples() {
        let rot = rot();
        let tol = zero_tolerance(PREC);
        let z = BiSeries::monomial(PREC, 3, 1, 0, Scalar::one(PREC));
        let zi = z.involution();
        assert!(zi.coeff(0, 1).approx_eq(&Scalar::one(PREC), &tol));

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = random_series(&mut rng, 8);
        // (phi^-) o I = (phi o I)^+
        let lhs = s.shift(ShiftDir::Minus, &rot).involution();
        let rhs = s.involution().shift(ShiftDir::Plus, &rot);
        assert!((&lhs - &rhs).max_coeff_magnitude() <= tol);
    }

    #[test]
    fn partial_examples() {
        let rot = rot();
        let tol = zero_tolerance(PREC);
        let s = z_plus_zbar(3);
        let dz = s.partial(Var::Z);
        assert!(dz.coeff(0, 0).approx_eq(&Scalar::one(PREC), &tol));
        assert_eq!(dz.max_degree(), 2);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = random_series(&mut rng, 8);
        // (phi^-)_z = lambda^{-1} (phi_z)^-
        let lhs = f.shift(ShiftDir::Minus, &rot).partial(Var::Z);
        let rhs = f
            .partial(Var::Z)
            .shift(ShiftDir::Minus, &rot)
            .scale(rot.lambda_pow(-1));
        assert!((&lhs - &rhs).max_coeff_magnitude() <= tol);
        // d_zbar (phi o I) = (d_z phi) o I
        let lhs = f.involution().partial(Var::Zbar);
        let rhs = f.partial(Var::Z).involution();
        assert!((&lhs - &rhs).max_coeff_magnitude() <= tol);
    }

    #[test]
    fn truncate_and_order() {
        let tol = zero_tolerance(PREC);
        let mut s = BiSeries::zero(PREC, 5);
        *s.coeff_mut(1, 0) = Scalar::one(PREC);
        *s.coeff_mut(3, 0) = Scalar::one(PREC);
        let t = s.truncated(2);
        assert!(t.coeff(1, 0).approx_eq(&Scalar::one(PREC), &tol));
        assert!(t.coeff(3, 0).is_zero_within(&tol));
        let full = s.truncated(5);
        assert!((&full - &s).max_coeff_magnitude() <= tol);

        assert_eq!(BiSeries::zero(PREC, 4).order(&tol), 5);
        let m = BiSeries::monomial(PREC, 6, 2, 1, Scalar::one(PREC));
        assert_eq!(m.order(&tol), 3);
    }

    #[test]
    fn tail_norm_bound() {
        // if Lambda_{M-1} f = 0 then |f|_{gamma rho} <= gamma^M |f|_rho
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..10 {
            let f = random_series(&mut rng, 9);
            let m = rng.gen_range(1usize..9);
            let tail = &f - &f.truncated(m - 1);
            let rho = Float::with_val(PREC, rng.gen_range(0.2f64..1.2));
            let gamma = Float::with_val(PREC, rng.gen_range(0.3f64..0.95));
            let grho = Float::with_val(PREC, &gamma * &rho);
            let lhs = tail.norm(&grho);
            let bound = gamma.pow(m as u32) * tail.norm(&rho);
            let slack = Float::with_val(PREC, &bound * &zero_tolerance(PREC));
            assert!(lhs <= bound + slack);
        }
    }

    #[test]
    fn norm_examples() {
        let tol = zero_tolerance(PREC);
        let rho = Float::with_val(PREC, 0.35);
        let s = z_plus_zbar(4);
        let n = s.norm(&rho);
        let expect = Float::with_val(PREC, &rho * 2u32);
        assert!((n - expect).abs() <= tol);

        // |z g|_rho = rho |g|_rho
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = random_series(&mut rng, 6);
        let mut zg = BiSeries::zero(PREC, 7);
        for (j, k, c) in g.iter() {
            *zg.coeff_mut(j + 1, k) = c.clone();
        }
        let lhs = zg.norm(&rho);
        let rhs = Float::with_val(PREC, &rho * &g.norm(&rho));
        let slack = Float::with_val(PREC, &rhs * &tol);
        assert!((lhs - &rhs).abs() <= slack);

        // |f_{j,k}| <= rho^{-j-k} |f|_rho, spot checks
        let f = random_series(&mut rng, 6);
        let nf = f.norm(&rho);
        for (j, k) in [(0usize, 0usize), (2, 1), (3, 3), (0, 6)] {
            let bound = Float::with_val(PREC, rho.clone().pow(-((j + k) as i32)) * &nf);
            assert!(f.coeff(j, k).abs() <= bound);
        }
    }

    #[test]
    fn cauchy_derivative_bound() {
        // |d^alpha f|_{gamma rho} <= a1! a2! rho^{-|alpha|} (1-gamma)^{-|alpha|} |f|_rho
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let f = random_series(&mut rng, 10);
            let rho = Float::with_val(PREC, rng.gen_range(0.2f64..1.0));
            let gamma = Float::with_val(PREC, rng.gen_range(0.3f64..0.9));
            let grho = Float::with_val(PREC, &gamma * &rho);
            for (a1, a2) in [(1usize, 0usize), (0, 1), (1, 1), (2, 0)] {
                let mut df = f.clone();
                for _ in 0..a1 {
                    df = df.partial(Var::Z);
                }
                for _ in 0..a2 {
                    df = df.partial(Var::Zbar);
                }
                let lhs = df.norm(&grho);
                let fact = (1..=a1).product::<usize>().max(1) * (1..=a2).product::<usize>().max(1);
                let one_minus = Float::with_val(PREC, 1) - &gamma;
                let bound = Float::with_val(PREC, fact as u32)
                    * rho.clone().pow(-((a1 + a2) as i32))
                    * one_minus.pow(-((a1 + a2) as i32))
                    * f.norm(&rho);
                let slack = Float::with_val(PREC, &bound * &zero_tolerance(PREC));
                assert!(lhs <= bound + slack, "alpha = ({a1},{a2})");
            }
        }
    }

    #[test]
    fn weighted_norm_with_derivatives_matches_partials() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let f = random_series(&mut rng, 8);
        let rho = Float::with_val(PREC, 0.6);
        let by_formula = f.weighted_norm(&rho, 2);
        let mut by_partials = f.norm(&rho);
        for (a1, a2) in [(1usize, 0usize), (0, 1), (2, 0), (1, 1), (0, 2)] {
            let mut df = f.clone();
            for _ in 0..a1 {
                df = df.partial(Var::Z);
            }
            for _ in 0..a2 {
                df = df.partial(Var::Zbar);
            }
            let n = df.norm(&rho);
            if n > by_partials {
                by_partials = n;
            }
        }
        let diff = Float::with_val(PREC, &by_formula - &by_partials).abs();
        let slack = Float::with_val(PREC, &by_formula * &zero_tolerance(PREC));
        assert!(diff <= slack);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut f = random_series(&mut rng, 7);
        // make values decidedly non-dyadic
        *f.coeff_mut(2, 3) = Scalar::new(
            Float::with_val(PREC, 2).sqrt(),
            Float::with_val(PREC, 3).sqrt() / 7u32,
        );
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let g = BiSeries::read_csv(buf.as_slice(), PREC).unwrap();
        assert_eq!(g.max_degree(), f.max_degree());
        for ((_, _, a), (_, _, b)) in f.iter().zip(g.iter()) {
            assert!(a.re == b.re && a.im == b.im, "round trip not exact");
        }

        let mut q = UniSeries::zero(PREC, 6);
        for k in 0..=6 {
            *q.coeff_mut(k) = Float::with_val(PREC, (k as f64) + 0.1).sqrt();
        }
        let mut buf = Vec::new();
        q.write_csv(&mut buf).unwrap();
        let q2 = UniSeries::read_csv(buf.as_slice(), PREC).unwrap();
        for k in 0..=6 {
            assert!(q.coeff(k) == q2.coeff(k));
        }
    }

    #[test]
    fn uni_series_basics() {
        let tol = zero_tolerance(PREC);
        let cos = UniSeries::cos_series(PREC, 6);
        assert!(cos.is_even(&tol));
        let half = Float::with_val(PREC, -0.5);
        assert!((cos.coeff(2).clone() - half).abs() <= tol);
        let d = cos.derivative();
        let sin = UniSeries::sin_series(PREC, 5);
        for k in 0..=5 {
            let diff = Float::with_val(PREC, d.coeff(k) + sin.coeff(k)).abs();
            assert!(diff <= tol);
        }
        // evaluation against MPFR cos
        let t = Float::with_val(PREC, 0.25);
        let approx = UniSeries::cos_series(PREC, 40).eval(&t);
        let exact = t.clone().cos();
        assert!((approx - exact).abs() <= tol);
    }
}
