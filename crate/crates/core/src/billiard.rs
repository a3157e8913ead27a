//! The billiard layer: the generating function `S(t1, t2) =
//! q((t1+t2)/2) cos((t1-t2)/2)` evaluated on the series pairs
//! `(phi^-, phi)` and `(phi, phi^+)`, the residual functional
//! `E(q, phi) = d2_S(phi^-, phi) + d1_S(phi, phi^+)`, the auxiliary fields
//! `h`, `g`, `kappa`, the analytic seed, the numeric billiard map, and
//! boundary reconstruction from the support function.

use crate::error::{Error, Result};
use crate::numerics::{zero_tolerance, Rotation, Scalar};
use crate::series::{BiSeries, PowerTable, ShiftDir, UniSeries, Var};
use rug::Float;

/// The generating function and all first/second partials on both argument
/// pairs, plus the half-sum and half-difference arguments.
///
/// `*_minus` fields are evaluated on `(phi^-, phi)`, `*_plus` on
/// `(phi, phi^+)`; the plus side is the `+`-shift of the minus side.
pub struct SPack {
    pub s_minus: BiSeries,
    pub s_plus: BiSeries,
    pub d1_s_minus: BiSeries,
    pub d2_s_minus: BiSeries,
    pub d1_s_plus: BiSeries,
    pub d2_s_plus: BiSeries,
    pub d11_s_minus: BiSeries,
    pub d12_s_minus: BiSeries,
    pub d22_s_minus: BiSeries,
    pub d11_s_plus: BiSeries,
    pub d12_s_plus: BiSeries,
    pub d22_s_plus: BiSeries,
    /// `xi = (phi^- + phi)/2`, the argument of `q`.
    pub xi: BiSeries,
    /// `zeta = (phi^- - phi)/2`, the argument of `cos`.
    pub zeta: BiSeries,
}

impl SPack {
    /// `E(q, phi) = d2_S(phi^-, phi) + d1_S(phi, phi^+)`.
    pub fn residual(&self) -> BiSeries {
        &self.d2_s_minus + &self.d1_s_plus
    }
}

/// Assembles `SPack`s for a fixed `phi`, caching everything that does not
/// depend on `q`: the arguments `xi`, `zeta`, the even-power table of `xi`,
/// and the cosine-side compositions. One outer iteration assembles `S` for
/// both `q` and `q + Delta q`; the second assembly costs only the `q`-side
/// compositions and products.
pub struct SAssembler {
    xi: BiSeries,
    zeta: BiSeries,
    xi_table: PowerTable,
    /// `cos(zeta)`
    p_z: BiSeries,
    /// `sin(zeta)`
    sin_z: BiSeries,
    max_degree: usize,
    prec: u32,
}

impl SAssembler {
    /// Validates the conjugacy series and precomputes the `phi`-side data.
    ///
    /// Requirements: `phi` symmetric, only odd total degrees, degree-1 part
    /// exactly `z + zbar`.
    pub fn new(phi: &BiSeries, rot: &Rotation) -> Result<Self> {
        let prec = phi.prec();
        let tol = zero_tolerance(prec);
        let one = Scalar::one(prec);
        if !(phi.coeff(1, 0).approx_eq(&one, &tol) && phi.coeff(0, 1).approx_eq(&one, &tol)) {
            return Err(Error::BadSeed);
        }
        if !phi.is_symmetric(&tol) || !phi.has_only_odd_degrees(&tol) {
            return Err(Error::BadSeed);
        }
        let phi_minus = phi.shift(ShiftDir::Minus, rot);
        let half = Float::with_val(prec, 0.5);
        let xi = (&phi_minus + phi).scale_float(&half);
        let zeta = (&phi_minus - phi).scale_float(&half);
        let d = phi.max_degree();
        let xi_table = PowerTable::new(&xi);
        let zeta_table = PowerTable::new(&zeta);
        let p_z = zeta_table.compose(&UniSeries::cos_series(prec, d));
        let sin_z = zeta_table.compose(&UniSeries::sin_series(prec, d));
        Ok(SAssembler {
            xi,
            zeta,
            xi_table,
            p_z,
            sin_z,
            max_degree: d,
            prec,
        })
    }

    pub fn xi(&self) -> &BiSeries {
        &self.xi
    }

    pub fn zeta(&self) -> &BiSeries {
        &self.zeta
    }

    pub fn xi_table(&self) -> &PowerTable {
        &self.xi_table
    }

    /// `cos(zeta)` at the working truncation.
    pub fn p_of_zeta(&self) -> &BiSeries {
        &self.p_z
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Builds the full pack for an even support series `q`. The constant
    /// term of `q` is free: the residual is linear in `q`, and the
    /// zero-constant slot is how `E(Delta q, phi)` is evaluated.
    pub fn assemble(&self, q: &UniSeries, rot: &Rotation) -> Result<SPack> {
        let tol = zero_tolerance(self.prec);
        if !q.is_even(&tol) {
            return Err(Error::BadSeed);
        }
        let d = self.max_degree;
        let q = if q.max_degree() == d {
            q.clone()
        } else {
            q.resized(d)
        };
        let quarter = Float::with_val(self.prec, 0.25);
        let half = Float::with_val(self.prec, 0.5);
        let two = Float::with_val(self.prec, 2);

        let qx = self.xi_table.compose(&q);
        let qpx = if d >= 1 {
            self.xi_table.compose(&q.derivative().embedded(d))
        } else {
            BiSeries::zero(self.prec, d)
        };
        let qppx = if d >= 2 {
            self.xi_table
                .compose(&q.derivative().derivative().embedded(d))
        } else {
            BiSeries::zero(self.prec, d)
        };

        let qx_p = qx.mul_truncated(&self.p_z);
        let qpx_p = qpx.mul_truncated(&self.p_z);
        let qx_s = qx.mul_truncated(&self.sin_z);
        let qppx_p = qppx.mul_truncated(&self.p_z);
        let qpx_s = qpx.mul_truncated(&self.sin_z);

        // d1 S = (q' p - q sin)/2, d2 S = (q' p + q sin)/2
        let d1 = (&qpx_p - &qx_s).scale_float(&half);
        let d2 = (&qpx_p + &qx_s).scale_float(&half);
        // d12 S = (q'' + q) p / 4
        let d12 = (&qppx_p + &qx_p).scale_float(&quarter);
        // d11 S = (q'' p - 2 q' sin - q p)/4, d22 S = (q'' p + 2 q' sin - q p)/4
        let cross = qpx_s.scale_float(&two);
        let d11 = (&(&qppx_p - &cross) - &qx_p).scale_float(&quarter);
        let d22 = (&(&qppx_p + &cross) - &qx_p).scale_float(&quarter);

        Ok(SPack {
            s_plus: qx_p.shift(ShiftDir::Plus, rot),
            d1_s_plus: d1.shift(ShiftDir::Plus, rot),
            d2_s_plus: d2.shift(ShiftDir::Plus, rot),
            d11_s_plus: d11.shift(ShiftDir::Plus, rot),
            d12_s_plus: d12.shift(ShiftDir::Plus, rot),
            d22_s_plus: d22.shift(ShiftDir::Plus, rot),
            s_minus: qx_p,
            d1_s_minus: d1,
            d2_s_minus: d2,
            d11_s_minus: d11,
            d12_s_minus: d12,
            d22_s_minus: d22,
            xi: self.xi.clone(),
            zeta: self.zeta.clone(),
        })
    }
}

/// One-shot residual `E(q, phi)`.
pub fn residual(q: &UniSeries, phi: &BiSeries, rot: &Rotation) -> Result<BiSeries> {
    let asm = SAssembler::new(phi, rot)?;
    Ok(asm.assemble(q, rot)?.residual())
}

/// The seed support coefficient `q2 = p2 (lambda-1)^2 / (lambda+1)^2` with
/// `p2 = -1/2`, which kills the degree-1 residual of the analytic seed.
/// Real for every admissible angle.
pub fn seed_q2(rot: &Rotation) -> Result<Float> {
    let prec = rot.prec();
    let tol = zero_tolerance(prec);
    let one = Scalar::one(prec);
    let lm1 = rot.lambda() - &one;
    let lp1 = rot.lambda() + &one;
    let ratio = &lm1 / &lp1;
    let sq = &ratio * &ratio;
    let q2 = sq.scale(&Float::with_val(prec, -0.5));
    if q2.im.clone().abs() > tol {
        return Err(Error::NonRealResult {
            imag: q2.im.to_f64(),
        });
    }
    Ok(q2.re)
}

/// The analytic seed `(q0, phi0) = (1 + q2 t^2, z + zbar)` at the given
/// truncation; its residual has order at least 3.
pub fn seed_pair(rot: &Rotation, max_degree: usize) -> Result<(UniSeries, BiSeries)> {
    let prec = rot.prec();
    let mut q = UniSeries::zero(prec, max_degree);
    *q.coeff_mut(0) = Float::with_val(prec, 1);
    *q.coeff_mut(2) = seed_q2(rot)?;
    let mut phi = BiSeries::zero(prec, max_degree);
    *phi.coeff_mut(1, 0) = Scalar::one(prec);
    *phi.coeff_mut(0, 1) = Scalar::one(prec);
    Ok((q, phi))
}

/// The auxiliary fields of the inner solve:
/// `h = d12_S(phi^-, phi) phi_z phi_z^-`, `g = phi_zbar / phi_z`, and
/// `kappa = d12_S (lambda^{-1} phi_z^- phi_zbar - lambda phi_zbar^- phi_z)`.
pub struct AuxFields {
    pub h: BiSeries,
    pub g: BiSeries,
    pub kappa: BiSeries,
    pub phi_z: BiSeries,
    pub phi_zbar: BiSeries,
    pub inv_phi_z: BiSeries,
}

pub fn aux_fields(pack: &SPack, phi: &BiSeries, rot: &Rotation) -> Result<AuxFields> {
    let d = phi.max_degree();
    let phi_z = phi.partial(Var::Z).embedded(d);
    let phi_zbar = phi.partial(Var::Zbar).embedded(d);
    let phi_z_minus = phi_z.shift(ShiftDir::Minus, rot);
    let phi_zbar_minus = phi_zbar.shift(ShiftDir::Minus, rot);
    let inv_phi_z = phi_z.invert_unit()?;

    let h = pack
        .d12_s_minus
        .mul_truncated(&phi_z)
        .mul_truncated(&phi_z_minus);
    let g = phi_zbar.mul_truncated(&inv_phi_z);
    let a = phi_z_minus
        .mul_truncated(&phi_zbar)
        .scale(rot.lambda_pow(-1));
    let b = phi_zbar_minus
        .mul_truncated(&phi_z)
        .scale(rot.lambda_pow(1));
    let kappa = pack.d12_s_minus.mul_truncated(&(&a - &b));
    Ok(AuxFields {
        h,
        g,
        kappa,
        phi_z,
        phi_zbar,
        inv_phi_z,
    })
}

/// The variational derivative of the residual in the `phi` slot, as the
/// explicit four-term expansion
/// `d12_S w^- + d22_S w + d11_S^+ w + d12_S^+ w^+`.
pub fn dphi_e(pack: &SPack, w: &BiSeries, rot: &Rotation) -> BiSeries {
    let w_minus = w.shift(ShiftDir::Minus, rot);
    let w_plus = w.shift(ShiftDir::Plus, rot);
    let mut out = pack.d12_s_minus.mul_truncated(&w_minus);
    out += &pack.d22_s_minus.mul_truncated(w);
    out += &pack.d11_s_plus.mul_truncated(w);
    out += &pack.d12_s_plus.mul_truncated(&w_plus);
    out
}

/// `d2_S(t1, t2)` for real arguments, with `q` used as a polynomial.
fn d2_s_real(q: &UniSeries, qp: &UniSeries, t1: &Float, t2: &Float) -> Float {
    let prec = q.prec();
    let m = Float::with_val(prec, t1 + t2) / 2u32;
    let h = Float::with_val(prec, t1 - t2) / 2u32;
    let (sin_h, cos_h) = h.sin_cos(Float::new(prec));
    let out = qp.eval(&m) * &cos_h + q.eval(&m) * &sin_h;
    out / 2u32
}

fn d1_s_real(q: &UniSeries, qp: &UniSeries, t1: &Float, t2: &Float) -> Float {
    let prec = q.prec();
    let m = Float::with_val(prec, t1 + t2) / 2u32;
    let h = Float::with_val(prec, t1 - t2) / 2u32;
    let (sin_h, cos_h) = h.sin_cos(Float::new(prec));
    let out = qp.eval(&m) * &cos_h - q.eval(&m) * &sin_h;
    out / 2u32
}

/// Advances the billiard map: returns `t3` solving
/// `d2_S(t1, t2) + d1_S(t2, t3) = 0` by a damped Newton iteration seeded
/// from the linearization at the fixed point. The defining map is
/// `T(t1, t2) = (t2, t3)` with `T(0, 0) = (0, 0)`.
pub fn billiard_step(q: &UniSeries, t1: &Float, t2: &Float) -> Result<Float> {
    let prec = q.prec();
    let tol = zero_tolerance(prec) * 10u32;
    let qp = q.derivative();
    let qpp = qp.derivative();
    let c = d2_s_real(q, &qp, t1, t2);

    // linear seed: t3 = -t1 - 2 (q2 + p2)/(q2 - p2) t2, with p2 = -1/2
    let q2 = q.coeff(2).clone();
    let denom = Float::with_val(prec, &q2 + &Float::with_val(prec, 0.5));
    let mut t3 = if denom.clone().abs().to_f64() > 1e-12 {
        let num = Float::with_val(prec, &q2 - &Float::with_val(prec, 0.5));
        let slope = num / denom * 2u32;
        -(t1.clone() + slope * t2)
    } else {
        -t1.clone()
    };

    let f = |t: &Float| -> Float { d1_s_real(q, &qp, t2, t) + &c };
    let fp = |t: &Float| -> Float {
        // d/dt3 d1_S(t2, t3) = d12_S(t2, t3) = (q + q'')(m) cos(h) / 4
        let m = Float::with_val(prec, t2 + t) / 2u32;
        let h = Float::with_val(prec, t2 - t) / 2u32;
        let out = (q.eval(&m) + qpp.eval(&m)) * h.cos();
        out / 4u32
    };

    let mut fv = f(&t3);
    for _ in 0..64 {
        if fv.clone().abs() <= tol {
            return Ok(t3);
        }
        let d = fp(&t3);
        if d.is_zero() {
            return Err(Error::NoRoot { iters: 64 });
        }
        let mut step = Float::with_val(prec, &fv / &d);
        // halve the step until the residual shrinks
        let mut improved = false;
        for _ in 0..32 {
            let cand = Float::with_val(prec, &t3 - &step);
            let cand_f = f(&cand);
            if cand_f.clone().abs() < fv.clone().abs() {
                t3 = cand;
                fv = cand_f;
                improved = true;
                break;
            }
            step /= 2u32;
        }
        if !improved {
            return Err(Error::NoRoot { iters: 64 });
        }
    }
    if fv.abs() <= tol {
        Ok(t3)
    } else {
        Err(Error::NoRoot { iters: 64 })
    }
}

/// Largest conjugacy defect `|T(Phi(z, zbar)) - Phi(lambda z, lambda^{-1}
/// zbar)|` over `n_points` points of the circle `|z| = r`, with
/// `Phi = (phi^-, phi)` restricted to the real slice `zbar = conj(z)`.
pub fn conjugacy_defect(
    q: &UniSeries,
    phi: &BiSeries,
    rot: &Rotation,
    r: &Float,
    n_points: usize,
) -> Result<Float> {
    let prec = phi.prec();
    let phi_minus = phi.shift(ShiftDir::Minus, rot);
    let two_pi = Float::with_val(prec, rug::float::Constant::Pi) * 2u32;
    let mut worst = Float::new(prec);
    for i in 0..n_points {
        let angle = Float::with_val(prec, i as u32) * &two_pi / (n_points as u32);
        let z = Scalar::unit_circle(&angle).scale(r);
        let zbar = z.conj();
        let t1 = phi_minus.eval(&z, &zbar);
        let t2 = phi.eval(&z, &zbar);
        // the real slice maps to real tangent angles
        let t1 = t1.re;
        let t2 = t2.re;
        let t3 = billiard_step(q, &t1, &t2)?;
        let zr = rot.lambda() * &z;
        let zrbar = zr.conj();
        let target = phi.eval(&zr, &zrbar).re;
        let defect = Float::with_val(prec, &t3 - &target).abs();
        if defect > worst {
            worst = defect;
        }
    }
    Ok(worst)
}

/// One boundary point of the table at normal angle `psi`:
/// `q(psi) e^{i psi} + i q'(psi) e^{i psi}`.
pub fn boundary_point(q: &UniSeries, psi: &Float) -> (Float, Float) {
    let prec = q.prec();
    let qp = q.derivative();
    let (sin, cos) = psi.clone().sin_cos(Float::new(prec));
    let qv = q.eval(psi);
    let qpv = qp.eval(psi);
    let x = Float::with_val(prec, &qv * &cos) - Float::with_val(prec, &qpv * &sin);
    let y = Float::with_val(prec, &qv * &sin) + Float::with_val(prec, &qpv * &cos);
    (x, y)
}

/// Samples the boundary uniformly in `psi` over `[0, 2 pi)`, emitted as
/// `(psi, x, y)`.
pub fn boundary_points(q: &UniSeries, count: usize) -> Result<Vec<(Float, Float, Float)>> {
    if count < 3 {
        return Err(Error::InsufficientData {
            got: count,
            need: 3,
        });
    }
    let prec = q.prec();
    let two_pi = Float::with_val(prec, rug::float::Constant::Pi) * 2u32;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let psi = Float::with_val(prec, i as u32) * &two_pi / (count as u32);
        let (x, y) = boundary_point(q, &psi);
        out.push((psi, x, y));
    }
    Ok(out)
}
