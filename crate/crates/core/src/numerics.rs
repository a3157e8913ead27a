//! Configurable-precision complex scalars and the rotation-number record.

use crate::error::{Error, Result};
use rug::ops::{NegAssign, Pow};
use rug::Float;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

/// The global "numerically zero" threshold: `2^(-precision_bits/2)`.
///
/// Every residual and invariant check in the crate uses this tolerance
/// unless a looser one is stated at the call site.
pub fn zero_tolerance(precision_bits: u32) -> Float {
    Float::with_val(precision_bits, 1u32) >> (precision_bits / 2)
}

/// Complex scalar with a fixed mantissa width shared by both parts.
///
/// Arithmetic between two scalars requires equal precision and yields that
/// precision. All operations are pure; values are safe to share across
/// threads.
#[derive(Clone, PartialEq)]
pub struct Scalar {
    pub re: Float,
    pub im: Float,
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:e} + {:e}i)", self.re.to_f64(), self.im.to_f64())
    }
}

impl Scalar {
    pub fn new(re: Float, im: Float) -> Self {
        debug_assert_eq!(re.prec(), im.prec());
        Scalar { re, im }
    }

    pub fn zero(prec: u32) -> Self {
        Scalar {
            re: Float::new(prec),
            im: Float::new(prec),
        }
    }

    pub fn one(prec: u32) -> Self {
        Scalar {
            re: Float::with_val(prec, 1),
            im: Float::new(prec),
        }
    }

    pub fn from_f64(prec: u32, x: f64) -> Self {
        Scalar {
            re: Float::with_val(prec, x),
            im: Float::new(prec),
        }
    }

    pub fn from_real(re: Float) -> Self {
        let prec = re.prec();
        Scalar {
            re,
            im: Float::new(prec),
        }
    }

    /// `e^{i t}` computed as `(cos t, sin t)`.
    pub fn unit_circle(t: &Float) -> Self {
        let prec = t.prec();
        let (sin, cos) = t.clone().sin_cos(Float::new(prec));
        Scalar { re: cos, im: sin }
    }

    pub fn prec(&self) -> u32 {
        self.re.prec()
    }

    pub fn conj(&self) -> Self {
        let mut im = self.im.clone();
        im.neg_assign();
        Scalar {
            re: self.re.clone(),
            im,
        }
    }

    pub fn abs(&self) -> Float {
        self.re.clone().hypot(&self.im)
    }

    pub fn norm_sqr(&self) -> Float {
        let prec = self.prec();
        let mut acc = Float::new(prec);
        acc += &self.re * &self.re;
        acc += &self.im * &self.im;
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_zero_within(&self, tol: &Float) -> bool {
        self.abs() <= *tol
    }

    pub fn recip(&self) -> Self {
        let prec = self.prec();
        let n = self.norm_sqr();
        let re = Float::with_val(prec, &self.re / &n);
        let mut im = Float::with_val(prec, &self.im / &n);
        im.neg_assign();
        Scalar { re, im }
    }

    pub fn scale(&self, t: &Float) -> Self {
        let prec = self.prec();
        Scalar {
            re: Float::with_val(prec, &self.re * t),
            im: Float::with_val(prec, &self.im * t),
        }
    }

    /// `self += a * b` without intermediate allocations.
    pub fn add_prod(&mut self, a: &Scalar, b: &Scalar) {
        self.re += &a.re * &b.re;
        self.re -= &a.im * &b.im;
        self.im += &a.re * &b.im;
        self.im += &a.im * &b.re;
    }

    /// `self -= a * b` without intermediate allocations.
    pub fn sub_prod(&mut self, a: &Scalar, b: &Scalar) {
        self.re -= &a.re * &b.re;
        self.re += &a.im * &b.im;
        self.im -= &a.re * &b.im;
        self.im -= &a.im * &b.re;
    }

    pub fn approx_eq(&self, other: &Scalar, tol: &Float) -> bool {
        (self - other).abs() <= *tol
    }
}

impl Add for &Scalar {
    type Output = Scalar;
    fn add(self, rhs: &Scalar) -> Scalar {
        debug_assert_eq!(self.prec(), rhs.prec());
        let prec = self.prec();
        Scalar {
            re: Float::with_val(prec, &self.re + &rhs.re),
            im: Float::with_val(prec, &self.im + &rhs.im),
        }
    }
}

impl Sub for &Scalar {
    type Output = Scalar;
    fn sub(self, rhs: &Scalar) -> Scalar {
        debug_assert_eq!(self.prec(), rhs.prec());
        let prec = self.prec();
        Scalar {
            re: Float::with_val(prec, &self.re - &rhs.re),
            im: Float::with_val(prec, &self.im - &rhs.im),
        }
    }
}

impl Mul for &Scalar {
    type Output = Scalar;
    fn mul(self, rhs: &Scalar) -> Scalar {
        debug_assert_eq!(self.prec(), rhs.prec());
        let mut out = Scalar::zero(self.prec());
        out.add_prod(self, rhs);
        out
    }
}

impl Div for &Scalar {
    type Output = Scalar;
    fn div(self, rhs: &Scalar) -> Scalar {
        self * &rhs.recip()
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        let mut re = self.re.clone();
        let mut im = self.im.clone();
        re.neg_assign();
        im.neg_assign();
        Scalar { re, im }
    }
}

impl Sub<&Scalar> for Scalar {
    type Output = Scalar;
    fn sub(mut self, rhs: &Scalar) -> Scalar {
        self -= rhs;
        self
    }
}

impl Add<&Scalar> for Scalar {
    type Output = Scalar;
    fn add(mut self, rhs: &Scalar) -> Scalar {
        self += rhs;
        self
    }
}

impl AddAssign<&Scalar> for Scalar {
    fn add_assign(&mut self, rhs: &Scalar) {
        self.re += &rhs.re;
        self.im += &rhs.im;
    }
}

impl SubAssign<&Scalar> for Scalar {
    fn sub_assign(&mut self, rhs: &Scalar) {
        self.re -= &rhs.re;
        self.im -= &rhs.im;
    }
}

/// Rotation number record: angle, `lambda = e^{i theta}`, the Diophantine
/// pair `(c, tau)` the user asserts for it, `mu = |1 + lambda|`, and a cache
/// of powers `lambda^k`.
///
/// The cache covers `|k| <= power_cap`; every operator denominator
/// `1 - lambda^m` in the crate draws on it, so the same power bits feed every
/// coefficient map.
#[derive(Clone)]
pub struct Rotation {
    theta: Float,
    lambda: Scalar,
    c: f64,
    tau: f64,
    mu: Float,
    power_cap: usize,
    powers: Vec<Scalar>,
}

impl fmt::Debug for Rotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Rotation")
            .field("theta", &self.theta.to_f64())
            .field("c", &self.c)
            .field("tau", &self.tau)
            .field("power_cap", &self.power_cap)
            .finish()
    }
}

/// Builds a [`Rotation`], computing `lambda = e^{i theta}` at
/// `precision_bits` and caching `lambda^k` for `|k| <= power_cap`.
///
/// Rejects angles that are resonant at working precision: if
/// `|lambda^k - 1| < zero_tolerance` for some `1 <= k <= power_cap` the angle
/// is rationally related to `2 pi` as far as this precision can tell, and
/// every small-divisor inverse downstream would be meaningless.
pub fn make_rotation(
    theta: &Float,
    c: f64,
    tau: f64,
    precision_bits: u32,
    power_cap: usize,
) -> Result<Rotation> {
    let two_pi = Float::with_val(precision_bits, rug::float::Constant::Pi) * 2u32;
    if !(theta.is_finite() && theta.is_sign_positive() && *theta > 0 && *theta < two_pi) {
        return Err(Error::Parse(format!(
            "theta = {} out of range (0, 2*pi)",
            theta.to_f64()
        )));
    }
    if !(0.0 < c && c < 1.0) {
        return Err(Error::Parse(format!("c = {c} out of range (0, 1)")));
    }
    if !(tau > 0.0) {
        return Err(Error::Parse(format!("tau = {tau} must be positive")));
    }
    let theta = Float::with_val(precision_bits, theta);
    let tol = zero_tolerance(precision_bits);

    // lambda^k = e^{ik theta}; MPFR reduces the argument exactly, so the
    // cache is free of the drift an iterated product would accumulate.
    let mut powers = Vec::with_capacity(2 * power_cap + 1);
    for k in -(power_cap as i64)..=(power_cap as i64) {
        let kt = Float::with_val(precision_bits, k) * &theta;
        powers.push(Scalar::unit_circle(&kt));
    }
    let one = Scalar::one(precision_bits);
    for k in 1..=power_cap {
        let margin = (&powers[power_cap + k] - &one).abs();
        if margin < tol {
            return Err(Error::ResonantRotation {
                k,
                margin: margin.to_f64(),
            });
        }
    }

    let lambda = powers[power_cap + 1].clone();
    let mu = (&lambda + &one).abs();
    Ok(Rotation {
        theta,
        lambda,
        c,
        tau,
        mu,
        power_cap,
        powers,
    })
}

impl Rotation {
    pub fn theta(&self) -> &Float {
        &self.theta
    }

    pub fn lambda(&self) -> &Scalar {
        &self.lambda
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `mu = |1 + lambda|`.
    pub fn mu(&self) -> &Float {
        &self.mu
    }

    pub fn prec(&self) -> u32 {
        self.lambda.prec()
    }

    pub fn power_cap(&self) -> usize {
        self.power_cap
    }

    pub fn zero_tolerance(&self) -> Float {
        zero_tolerance(self.prec())
    }

    /// Cached `lambda^k`. Panics if `|k|` exceeds the cache cap; the cap is
    /// sized from the truncation degree when the rotation is built.
    pub fn lambda_pow(&self, k: i64) -> &Scalar {
        let idx = k + self.power_cap as i64;
        &self.powers[idx as usize]
    }

    /// `1 - lambda^k`.
    pub fn one_minus_lambda_pow(&self, k: i64) -> Scalar {
        let mut out = Scalar::one(self.prec());
        out -= self.lambda_pow(k);
        out
    }

    /// Minimum of `|lambda^k - 1| * k^tau` over `1 <= k <= k_max`.
    ///
    /// The asserted Diophantine constant `c` is empirically valid up to
    /// `k_max` iff the returned margin is at least `c`. Powers are taken by
    /// exact angle reduction, so `k_max` may exceed the cache cap.
    pub fn diophantine_margin(&self, k_max: usize) -> Float {
        let prec = self.prec();
        let one = Scalar::one(prec);
        let mut min = Float::with_val(prec, rug::float::Special::Infinity);
        for k in 1..=k_max {
            let pow = if k <= self.power_cap {
                self.lambda_pow(k as i64).clone()
            } else {
                let kt = Float::with_val(prec, k) * &self.theta;
                Scalar::unit_circle(&kt)
            };
            let weight = Float::with_val(prec, k).pow_f64_round(self.tau);
            let margin = (&pow - &one).abs() * weight;
            if margin < min {
                min = margin;
            }
        }
        min
    }
}

/// `x^t` for a positive Float base and f64 exponent.
trait PowF64 {
    fn pow_f64_round(self, t: f64) -> Float;
}

impl PowF64 for Float {
    fn pow_f64_round(self, t: f64) -> Float {
        let prec = self.prec();
        let e = Float::with_val(prec, t);
        self.pow(e)
    }
}

/// The golden-ratio rotation angle `2 pi (sqrt(5) - 1) / 2`, the crate-wide
/// default.
pub fn golden_theta(precision_bits: u32) -> Float {
    let pi = Float::with_val(precision_bits, rug::float::Constant::Pi);
    let sqrt5 = Float::with_val(precision_bits, 5u32).sqrt();
    pi * (sqrt5 - 1u32)
}
