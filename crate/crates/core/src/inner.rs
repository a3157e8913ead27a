//! The inner problem: solve the outer difference equation for `psi`, the
//! inner one for `w`, symmetrize to `Delta phi`, and compute the error
//! fields `R1..R5` that control what is left of the residual after one
//! correction.

use crate::billiard::{aux_fields, AuxFields, SAssembler, SPack};
use crate::error::Result;
use crate::numerics::Rotation;
use crate::operators::{
    diag_average, div_z, div_zbar, inv_nabla, mul_z, mul_zbar, nabla_plus, project, InvKind,
    ProjKind,
};
use crate::series::{BiSeries, ShiftDir, UniSeries, Var};
use rug::Float;

/// Everything one inner solve produces. `phi_new = phi + delta_phi` and
/// `e_new = E(q*, phi_new)` come along because `R5` is defined through the
/// fresh residual.
pub struct InnerStep {
    pub psi: BiSeries,
    pub w: BiSeries,
    pub delta_phi: BiSeries,
    pub r1: BiSeries,
    pub r2: BiSeries,
    pub r3: BiSeries,
    pub r4: BiSeries,
    pub r5: BiSeries,
    /// `Pi(psi / h)`, kept for the decomposition check `Pi(psi/h) = R1 + R2`.
    pub pi_psi_over_h: BiSeries,
    pub phi_new: BiSeries,
    pub e_new: BiSeries,
}

/// `psi = -E^+(E(q*,phi) phi_z - Pi+(E(q*,phi) phi_z))`, so that
/// `nabla_plus(psi) = -(E phi_z - Pi+(E phi_z))`.
pub fn solve_psi(q_star: &UniSeries, phi: &BiSeries, rot: &Rotation) -> Result<BiSeries> {
    let asm = SAssembler::new(phi, rot)?;
    let pack = asm.assemble(q_star, rot)?;
    let aux = aux_fields(&pack, phi, rot)?;
    psi_from_parts(&pack.residual(), &aux.phi_z, rot)
}

pub fn psi_from_parts(e: &BiSeries, phi_z: &BiSeries, rot: &Rotation) -> Result<BiSeries> {
    let e_phi_z = e.mul_truncated(phi_z);
    let rhs = &e_phi_z - &project(&e_phi_z, ProjKind::PiPlus);
    Ok(-(&inv_nabla(&rhs, rot, InvKind::EPlus)?))
}

/// `w = phi_z E(psi/h - Pi(psi/h))`, so that
/// `h nabla(w / phi_z) = psi - h Pi(psi/h)`.
pub fn solve_w(
    psi: &BiSeries,
    h: &BiSeries,
    phi: &BiSeries,
    rot: &Rotation,
) -> Result<BiSeries> {
    let phi_z = phi.partial(Var::Z).embedded(phi.max_degree());
    let inv_h = h.invert_unit()?;
    let t = psi.mul_truncated(&inv_h);
    let t = &t - &project(&t, ProjKind::Pi);
    Ok(phi_z.mul_truncated(&inv_nabla(&t, rot, InvKind::E)?))
}

/// `Delta phi = (w + w o I) / 2`: symmetric by construction, idempotent on
/// symmetric input.
pub fn symmetrize(w: &BiSeries) -> BiSeries {
    let half = Float::with_val(w.prec(), 0.5);
    (&(w + &w.involution())).scale_float(&half)
}

/// The five error fields at a prepared state. `pack` must be assembled at
/// `(q_star, phi)`.
pub fn solve_inner(
    asm: &SAssembler,
    pack: &SPack,
    q_star: &UniSeries,
    phi: &BiSeries,
    rot: &Rotation,
) -> Result<InnerStep> {
    let aux = aux_fields(pack, phi, rot)?;
    solve_inner_with_aux(asm, pack, &aux, q_star, phi, rot)
}

pub fn solve_inner_with_aux(
    _asm: &SAssembler,
    pack: &SPack,
    aux: &AuxFields,
    q_star: &UniSeries,
    phi: &BiSeries,
    rot: &Rotation,
) -> Result<InnerStep> {
    let prec = phi.prec();
    let d = phi.max_degree();
    let e = pack.residual();

    let psi = psi_from_parts(&e, &aux.phi_z, rot)?;
    let inv_h = aux.h.invert_unit()?;
    let psi_over_h = psi.mul_truncated(&inv_h);
    let pi_psi_over_h = project(&psi_over_h, ProjKind::Pi);
    let w = aux
        .phi_z
        .mul_truncated(&inv_nabla(&(&psi_over_h - &pi_psi_over_h), rot, InvKind::E)?);
    let delta_phi = symmetrize(&w);

    // R1 = (-[zbar dzbar_S] + [zbar g [z dz_S]/z]) / (lambda zbar [kappa])
    let dz_s = pack.s_minus.partial(Var::Z).embedded(d);
    let dzbar_s = pack.s_minus.partial(Var::Zbar).embedded(d);
    let avg_z_dz_s = diag_average(&mul_z(&dz_s));
    let x = div_z(&avg_z_dz_s)?; // [z dz_S]/z, a K+ series
    let t1 = diag_average(&mul_zbar(&dzbar_s));
    let t2 = diag_average(&mul_zbar(&aux.g.mul_truncated(&x)));
    let avg_kappa = diag_average(&aux.kappa);
    let inv_avg_kappa = avg_kappa.invert_unit()?;
    let numer = (&t2 - &t1).mul_truncated(&inv_avg_kappa);
    let r1 = div_zbar(&numer)?.scale(rot.lambda_pow(-1));

    // R2 = [zbar psi (lambda^{-1} g - lambda g^-) ([kappa]-kappa)/(kappa [kappa])] / zbar
    let g_minus = aux.g.shift(ShiftDir::Minus, rot);
    let comb = &aux.g.scale(rot.lambda_pow(-1)) - &g_minus.scale(rot.lambda_pow(1));
    let inv_kappa = aux.kappa.invert_unit()?;
    let kappa_dev = (&avg_kappa - &aux.kappa)
        .mul_truncated(&inv_kappa)
        .mul_truncated(&inv_avg_kappa);
    let prod = psi.mul_truncated(&comb).mul_truncated(&kappa_dev);
    let r2 = div_zbar(&diag_average(&mul_zbar(&prod)))?;

    // R3 = [z dz_S]/z - nabla+(h Pi(psi/h))
    let r3 = &x - &nabla_plus(&aux.h.mul_truncated(&pi_psi_over_h), rot);

    // R4 = dz_E (w / phi_z) + R3 / phi_z
    let dz_e = e.partial(Var::Z).embedded(d);
    let w_over_phi_z = w.mul_truncated(&aux.inv_phi_z);
    let r4 = &dz_e.mul_truncated(&w_over_phi_z) + &r3.mul_truncated(&aux.inv_phi_z);

    // R5 = E(q*, phi + Delta phi) - (R4 + R4 o I)/2, with the new residual
    // evaluated directly
    let phi_new = phi + &delta_phi;
    let asm_new = SAssembler::new(&phi_new, rot)?;
    let e_new = asm_new.assemble(q_star, rot)?.residual();
    let half = Float::with_val(prec, 0.5);
    let r4_sym = (&r4 + &r4.involution()).scale_float(&half);
    let r5 = &e_new - &r4_sym;

    Ok(InnerStep {
        psi,
        w,
        delta_phi,
        r1,
        r2,
        r3,
        r4,
        r5,
        pi_psi_over_h,
        phi_new,
        e_new,
    })
}

/// Spec-shaped entry point: recomputes the pack for `(q_star, phi)` and
/// returns `(R1, R2, R3, R4, R5)`.
pub fn error_fields(
    q_star: &UniSeries,
    phi: &BiSeries,
    rot: &Rotation,
) -> Result<[BiSeries; 5]> {
    let asm = SAssembler::new(phi, rot)?;
    let pack = asm.assemble(q_star, rot)?;
    let step = solve_inner(&asm, &pack, q_star, phi, rot)?;
    Ok([step.r1, step.r2, step.r3, step.r4, step.r5])
}
