//! The iteration orchestrator: one corrective step (outer solve, inner
//! solve, symmetrization), the doubling and 3/2 schedules with their
//! radius/epsilon ledgers, runtime condition diagnostics, and state
//! dump/load.

use crate::billiard::{aux_fields, SAssembler};
use crate::error::{Error, Result};
use crate::inner::solve_inner_with_aux;
use crate::numerics::{zero_tolerance, Rotation};
use crate::operators::diag_average;
use crate::outer::{conditioning_radii, conditioning_report, solve_delta_q_prepared};
use crate::series::{decimal_to_float, float_to_decimal, BiSeries, UniSeries};
use rug::ops::Pow;
use rug::Float;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::Path;

/// The ledger carried across steps.
#[derive(Clone)]
pub struct IterationState {
    pub q: UniSeries,
    pub phi: BiSeries,
    /// Completed step count.
    pub n: usize,
    /// Truncation order used by the last outer solve (0 before any step).
    pub m_n: usize,
    /// Residual order ledger: measured `order(E) >= 2 n_n + 1`.
    pub n_n: usize,
    pub rho_n: Float,
    pub eps_n: Float,
    pub history: Vec<StepReport>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrderReport {
    pub delta_q: usize,
    pub delta_phi: usize,
    pub residual: usize,
}

/// Numeric evaluation of the five smallness conditions of the iterative
/// step, with measured norms standing in for the unspecified constants.
/// These are diagnostics, never gates: the degree bookkeeping proceeds
/// regardless and failures are recorded for the growth-analysis narrative.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionReport {
    /// `M^{5/2} rho^2 < 1` with the constant set to 1.
    pub a_unit: bool,
    /// Same with the measured conditioning norm divided by sqrt(M) as the
    /// constant.
    pub a_measured: bool,
    /// `gamma1^{2M} < eps`.
    pub b: bool,
    /// `(1 + C1 rho^2)^{-M} > gamma2`.
    pub c: bool,
    /// `C4 mu rho < gamma0 |s0|` and `1 + C1 rho^2 < 1/gamma0`.
    pub d: bool,
    /// `eps < (1 - gamma0)^3 gamma0^3 gamma2^3 rho^3`.
    pub e: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormReport {
    pub q_norm3: f64,
    pub phi_norm3: f64,
    pub h_norm: f64,
    pub inv_h_norm: f64,
    pub kappa_dev_norm: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepReport {
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n_claimed: usize,
    /// Exact decimal of the working radius.
    pub rho: String,
    /// Exact decimal of the epsilon-ledger value before the step.
    pub eps: String,
    /// `||E(q^n, phi^n)||_{rho_n}` before the step.
    pub residual_norm: f64,
    /// `||E(q^{n+1}, phi^{n+1})||_{rho_n}` after the step.
    pub new_residual_norm: f64,
    /// Re-verified `max |Lambda_{2M}([S_{q*}]) - 1|` coefficient.
    pub avg_s_defect: f64,
    pub orders: OrderReport,
    pub conditions: ConditionReport,
    pub norms: NormReport,
    /// `max |Pi(psi/h) - (R1 + R2)|` coefficient.
    pub inner_defect: f64,
    pub r_orders: [usize; 5],
    /// Measured conditioning norm of the scaled triangular inverse.
    pub conditioning: f64,
}

/// The analytic seed packaged as a step-0 state.
pub fn initial_state(rot: &Rotation, max_degree: usize, rho0: &Float) -> Result<IterationState> {
    let (q, phi) = crate::billiard::seed_pair(rot, max_degree)?;
    let asm = SAssembler::new(&phi, rot)?;
    let e = asm.assemble(&q, rot)?.residual();
    let eps = e.norm(rho0);
    Ok(IterationState {
        q,
        phi,
        n: 0,
        m_n: 0,
        n_n: 1,
        rho_n: rho0.clone(),
        eps_n: eps,
        history: Vec::new(),
    })
}

/// Executes one corrective step at truncation order `M`: outer solve for
/// `Delta q`, inner solve for `Delta phi`, update, re-measure. Any solver
/// error aborts the step and leaves the input state untouched. The new
/// residual must vanish through degree `2 min(M, 2N)` within 1000x zero
/// tolerance, else the run has exhausted its precision
/// (`ToleranceCollapse`).
pub fn iterate_once(
    state: &IterationState,
    m: usize,
    rot: &Rotation,
    gamma0: f64,
) -> Result<IterationState> {
    let d = state.phi.max_degree();
    if m < 2 || 2 * m > d {
        return Err(Error::BadTruncation { m, max_degree: d });
    }
    let prec = state.q.prec();
    let tol = zero_tolerance(prec);
    let collapse_tol = Float::with_val(prec, &tol * &Float::with_val(prec, 1000));

    let asm = SAssembler::new(&state.phi, rot)?;
    let pack = asm.assemble(&state.q, rot)?;
    let e_before = pack.residual();
    check_vanishing(&e_before, 2 * state.n_n + 1, &collapse_tol)?;
    let residual_norm = e_before.norm(&state.rho_n);

    let outer = solve_delta_q_prepared(&asm, &state.q, rot, m)?;
    let q_star = state.q.try_add(&outer.delta_q)?;
    let pack_star = asm.assemble(&q_star, rot)?;
    let aux = aux_fields(&pack_star, &state.phi, rot)?;
    let inner = solve_inner_with_aux(&asm, &pack_star, &aux, &q_star, &state.phi, rot)?;

    let k = m.min(2 * state.n_n);
    check_vanishing(&inner.e_new, 2 * k + 1, &collapse_tol)?;
    let e_order = inner.e_new.order(&tol);
    let n_new = (e_order.max(1) - 1) / 2;

    // condition diagnostics with measured surrogates for the constants
    let rho = &state.rho_n;
    let c0_first = state
        .q
        .weighted_norm(rho, 3)
        .max(&state.phi.weighted_norm(rho, 3));
    let c1 = Float::with_val(prec, &c0_first * &Float::with_val(prec, 2));
    let rho_sq = rho.clone().square();
    let q_radius = Float::with_val(prec, rot.mu() * rho)
        * (Float::with_val(prec, 1) + Float::with_val(prec, &c1 * &rho_sq));
    let c0 = state
        .q
        .weighted_norm(&q_radius, 3)
        .max(&state.phi.weighted_norm(rho, 3));
    let c1 = Float::with_val(prec, &c0 * &Float::with_val(prec, 2));

    let (rho1, rho2) = conditioning_radii(rot, rho, &c1, m);
    let conditioning = conditioning_report(&outer.system, &rho1, &rho2);
    let c4_measured =
        Float::with_val(prec, &conditioning / &Float::with_val(prec, m as u32).sqrt());

    let g0 = Float::with_val(prec, gamma0);
    let m_f = Float::with_val(prec, m as u32);
    let m52_rho2 = m_f.pow(5u32).sqrt() * &rho_sq;
    let one_plus = Float::with_val(prec, 1) + Float::with_val(prec, &c1 * &rho_sq);
    let s0 = (Float::with_val(prec, 1) + state.q.coeff(2).clone() * 2u32) / 4u32;
    let cond = ConditionReport {
        a_unit: m52_rho2.clone() < 1,
        a_measured: Float::with_val(prec, &c4_measured * &m52_rho2) < 1,
        b: g0.clone().pow((2 * m) as u32) < state.eps_n,
        c: one_plus.clone().pow(m as u32).recip() > g0,
        d: Float::with_val(prec, &c4_measured * &Float::with_val(prec, rot.mu() * rho))
            < Float::with_val(prec, &g0 * &s0.abs())
            && one_plus < g0.clone().recip(),
        e: state.eps_n
            < (Float::with_val(prec, 1) - &g0).pow(3u32)
                * g0.clone().pow(6u32)
                * rho.clone().pow(3u32),
    };

    let kappa_dev = (&aux.kappa - &diag_average(&aux.kappa)).norm(rho);
    let norms = NormReport {
        q_norm3: q_star.weighted_norm(rho, 3).to_f64(),
        phi_norm3: inner.phi_new.weighted_norm(rho, 3).to_f64(),
        h_norm: aux.h.norm(rho).to_f64(),
        inv_h_norm: aux.h.invert_unit()?.norm(rho).to_f64(),
        kappa_dev_norm: kappa_dev.to_f64(),
    };

    let inner_defect = (&inner.pi_psi_over_h - &(&inner.r1 + &inner.r2))
        .max_coeff_magnitude()
        .to_f64();
    let r_orders = [
        inner.r1.order(&tol),
        inner.r2.order(&tol),
        inner.r3.order(&tol),
        inner.r4.order(&tol),
        inner.r5.order(&tol),
    ];

    let report = StepReport {
        n: state.n,
        m,
        n_claimed: n_new,
        rho: float_to_decimal(rho),
        eps: float_to_decimal(&state.eps_n),
        residual_norm: residual_norm.to_f64(),
        new_residual_norm: inner.e_new.norm(rho).to_f64(),
        avg_s_defect: outer.verified_defect.to_f64(),
        orders: OrderReport {
            delta_q: outer.delta_q.order(&tol),
            delta_phi: inner.delta_phi.order(&tol),
            residual: e_order,
        },
        conditions: cond,
        norms,
        inner_defect,
        r_orders,
        conditioning: conditioning.to_f64(),
    };

    let mut history = state.history.clone();
    history.push(report);
    Ok(IterationState {
        q: q_star,
        phi: inner.phi_new,
        n: state.n + 1,
        m_n: m,
        n_n: n_new,
        rho_n: state.rho_n.clone(),
        eps_n: state.eps_n.clone(),
        history,
    })
}

fn check_vanishing(e: &BiSeries, order_claim: usize, threshold: &Float) -> Result<()> {
    for (j, k, c) in e.iter() {
        if j + k + 1 <= order_claim {
            let mag = c.abs();
            if mag > *threshold {
                return Err(Error::ToleranceCollapse {
                    degree: j + k,
                    magnitude: mag.to_f64(),
                    threshold: threshold.to_f64(),
                });
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    /// `M_0 = 2`, `M_{n+1} = 2 M_n`; the radius ledger stays put.
    Doubling,
    /// `M_{n+1} = floor(3 M_n / 2) + 1`, `rho_{n+1} = gamma_bar rho_n`,
    /// `eps_{n+1} = eps_n^{3/2}`, with `gamma_bar = gamma0^5`.
    Kam,
}

#[derive(Clone, Debug)]
pub struct ScheduleParams {
    pub kind: ScheduleKind,
    pub steps: usize,
    pub rho0: Float,
    pub gamma0: Float,
}

impl ScheduleParams {
    pub fn new(kind: ScheduleKind, steps: usize, prec: u32) -> Self {
        ScheduleParams {
            kind,
            steps,
            rho0: Float::with_val(prec, 0.05),
            gamma0: Float::with_val(prec, 0.9),
        }
    }
}

/// `gamma_bar = gamma0^5`, which must stay below `(2/3)^{5/4}` for the 3/2
/// schedule to contract.
pub fn gamma_bar(gamma0: &Float) -> Float {
    gamma0.clone().pow(5u32)
}

pub fn kam_gamma_admissible(gamma0: &Float) -> bool {
    let prec = gamma0.prec();
    let bound = Float::with_val(prec, 2) / 3u32;
    let bound = bound.pow(Float::with_val(prec, 1.25));
    gamma_bar(gamma0) < bound && *gamma0 > 0
}

/// Runs `params.steps` corrective steps under the chosen schedule,
/// maintaining the radius/epsilon ledger. Schedule truncation orders are
/// clamped to `max_degree / 2`, the most the stored series can support.
pub fn run_schedule(
    seed: IterationState,
    params: &ScheduleParams,
    rot: &Rotation,
) -> Result<IterationState> {
    let prec = seed.q.prec();
    let d = seed.phi.max_degree();
    let m_cap = d / 2;
    let gamma0_f64 = params.gamma0.to_f64();
    let mut state = seed;

    match params.kind {
        ScheduleKind::Doubling => {
            state.rho_n = params.rho0.clone();
            let asm = SAssembler::new(&state.phi, rot)?;
            state.eps_n = asm.assemble(&state.q, rot)?.residual().norm(&state.rho_n);
            let mut m = if state.m_n < 2 { 2 } else { 2 * state.m_n };
            for _ in 0..params.steps {
                let m_used = m.min(m_cap);
                state = iterate_once(&state, m_used, rot, gamma0_f64)?;
                state.eps_n = Float::with_val(
                    prec,
                    state.history.last().unwrap().new_residual_norm,
                );
                m = 2 * m_used;
            }
        }
        ScheduleKind::Kam => {
            if !kam_gamma_admissible(&params.gamma0) {
                return Err(Error::Parse(format!(
                    "gamma0 = {} gives gamma_bar >= (2/3)^(5/4)",
                    params.gamma0.to_f64()
                )));
            }
            let gbar = gamma_bar(&params.gamma0);
            if state.n == 0 {
                state.rho_n = params.rho0.clone();
                let asm = SAssembler::new(&state.phi, rot)?;
                state.eps_n = asm.assemble(&state.q, rot)?.residual().norm(&state.rho_n);
            }
            // M_0 = floor(log(1/rho0) / log(1/gamma1)) + 1
            let m0 = {
                let num = params.rho0.clone().recip().ln();
                let den = params.gamma0.clone().recip().ln();
                (num / den).floor().to_f64() as usize + 1
            };
            let mut m = if state.m_n == 0 {
                m0
            } else {
                3 * state.m_n / 2 + 1
            };
            for _ in 0..params.steps {
                let m_used = m.min(m_cap).max(2);
                state = iterate_once(&state, m_used, rot, gamma0_f64)?;
                state.rho_n = Float::with_val(prec, &gbar * &state.rho_n);
                state.eps_n = state.eps_n.clone().pow(Float::with_val(prec, 1.5));
                m = 3 * m_used / 2 + 1;
            }
        }
    }
    Ok(state)
}

/// Produces a truncated-polynomial seed whose residual has at least the
/// requested odd order: the analytic seed for order 3, otherwise a doubling
/// run truncated back to the smallest polynomials that retain the order.
pub fn kam_seed(
    rot: &Rotation,
    target_order: usize,
    max_degree: usize,
    rho0: &Float,
) -> Result<IterationState> {
    if target_order % 2 == 0 || target_order < 3 {
        return Err(Error::Parse(format!(
            "target order {target_order} must be odd and at least 3"
        )));
    }
    let prec = rot.prec();
    let tol = zero_tolerance(prec);
    let mut state = initial_state(rot, max_degree, rho0)?;
    let mut m = 2usize;
    while 2 * state.n_n + 1 < target_order {
        state = iterate_once(&state, m.min(max_degree / 2).max(2), rot, 0.9)?;
        m *= 2;
    }
    let q = state.q.truncated(target_order - 1);
    let phi = state.phi.truncated(target_order - 2);
    let asm = SAssembler::new(&phi, rot)?;
    let e = asm.assemble(&q, rot)?.residual();
    let order = e.order(&tol);
    if order < target_order {
        return Err(Error::VerificationFailed {
            what: format!("seed residual order (target {target_order})"),
            defect: order as f64,
            tolerance: target_order as f64,
        });
    }
    let eps = e.norm(rho0);
    Ok(IterationState {
        q,
        phi,
        n: 0,
        m_n: 0,
        n_n: (target_order - 1) / 2,
        rho_n: rho0.clone(),
        eps_n: eps,
        history: Vec::new(),
    })
}

/// Run metadata persisted beside the coefficients; everything needed to
/// reproduce the run deterministically.
#[derive(Clone, Debug)]
pub struct RunMeta {
    pub theta: Float,
    pub precision_bits: u32,
    pub c: f64,
    pub tau: f64,
    pub schedule: ScheduleKind,
    pub rho0: Float,
    pub gamma0: Float,
}

#[derive(Serialize, Deserialize)]
struct StateBlock {
    n: usize,
    m_n: usize,
    n_n: usize,
    rho: String,
    eps: String,
}

#[derive(Serialize, Deserialize)]
struct LedgerFile {
    theta: String,
    precision_bits: u32,
    c: f64,
    tau: f64,
    schedule: ScheduleKind,
    rho0: String,
    gamma0: String,
    state: StateBlock,
    steps: Vec<StepReport>,
}

/// Writes `q.csv`, `phi.csv`, and `ledger.json` into `dir`.
pub fn save_state(state: &IterationState, meta: &RunMeta, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut qf = BufWriter::new(fs::File::create(dir.join("q.csv"))?);
    state.q.write_csv(&mut qf)?;
    let mut pf = BufWriter::new(fs::File::create(dir.join("phi.csv"))?);
    state.phi.write_csv(&mut pf)?;
    let ledger = LedgerFile {
        theta: float_to_decimal(&meta.theta),
        precision_bits: meta.precision_bits,
        c: meta.c,
        tau: meta.tau,
        schedule: meta.schedule,
        rho0: float_to_decimal(&meta.rho0),
        gamma0: float_to_decimal(&meta.gamma0),
        state: StateBlock {
            n: state.n,
            m_n: state.m_n,
            n_n: state.n_n,
            rho: float_to_decimal(&state.rho_n),
            eps: float_to_decimal(&state.eps_n),
        },
        steps: state.history.clone(),
    };
    let f = fs::File::create(dir.join("ledger.json"))?;
    serde_json::to_writer_pretty(BufWriter::new(f), &ledger)
        .map_err(|e| Error::Parse(format!("ledger write: {e}")))?;
    Ok(())
}

pub fn load_state(dir: &Path) -> Result<(IterationState, RunMeta)> {
    let f = fs::File::open(dir.join("ledger.json"))?;
    let ledger: LedgerFile = serde_json::from_reader(BufReader::new(f))
        .map_err(|e| Error::Parse(format!("ledger read: {e}")))?;
    let prec = ledger.precision_bits;
    let q = UniSeries::read_csv(BufReader::new(fs::File::open(dir.join("q.csv"))?), prec)?;
    let phi = BiSeries::read_csv(BufReader::new(fs::File::open(dir.join("phi.csv"))?), prec)?;
    let state = IterationState {
        q,
        phi,
        n: ledger.state.n,
        m_n: ledger.state.m_n,
        n_n: ledger.state.n_n,
        rho_n: decimal_to_float(&ledger.state.rho, prec)?,
        eps_n: decimal_to_float(&ledger.state.eps, prec)?,
        history: ledger.steps,
    };
    let meta = RunMeta {
        theta: decimal_to_float(&ledger.theta, prec)?,
        precision_bits: prec,
        c: ledger.c,
        tau: ledger.tau,
        schedule: ledger.schedule,
        rho0: decimal_to_float(&ledger.rho0, prec)?,
        gamma0: decimal_to_float(&ledger.gamma0, prec)?,
    };
    Ok((state, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{golden_theta, make_rotation};

    const PREC: u32 = 256;

    fn rot_for(d: usize) -> Rotation {
        make_rotation(&golden_theta(PREC), 0.5, 1.0, PREC, 4 * d + 4).unwrap()
    }

    #[test]
    fn degenerate_truncation_rejected() {
        let rot = rot_for(9);
        let rho0 = Float::with_val(PREC, 0.05);
        let state = initial_state(&rot, 9, &rho0).unwrap();
        assert!(matches!(
            iterate_once(&state, 0, &rot, 0.9),
            Err(Error::BadTruncation { .. })
        ));
        assert!(matches!(
            iterate_once(&state, 1, &rot, 0.9),
            Err(Error::BadTruncation { .. })
        ));
        assert!(matches!(
            iterate_once(&state, 5, &rot, 0.9),
            Err(Error::BadTruncation { .. })
        ));
    }

    #[test]
    fn single_step_reaches_order_five() {
        let rot = rot_for(11);
        let rho0 = Float::with_val(PREC, 0.05);
        let state = initial_state(&rot, 11, &rho0).unwrap();
        let next = iterate_once(&state, 2, &rot, 0.9).unwrap();
        let rep = next.history.last().unwrap();
        assert!(
            rep.orders.residual >= 5,
            "residual order {}",
            rep.orders.residual
        );
        assert!(rep.orders.delta_q >= 4);
        assert!(rep.orders.delta_phi >= 3);
        assert!(next.n_n >= 2);
    }

    #[test]
    fn doubling_three_steps_order_ledger() {
        let rot = rot_for(19);
        let mut params = ScheduleParams::new(ScheduleKind::Doubling, 3, PREC);
        params.rho0 = Float::with_val(PREC, 0.05);
        let seed = initial_state(&rot, 19, &params.rho0).unwrap();
        let out = run_schedule(seed, &params, &rot).unwrap();
        let orders: Vec<usize> = out.history.iter().map(|r| r.orders.residual).collect();
        assert!(
            orders[0] >= 5 && orders[1] >= 9 && orders[2] >= 17,
            "{orders:?}"
        );

        // order ratchet: strictly increasing while below the truncation
        for w in out.history.windows(2) {
            assert!(w[1].orders.residual > w[0].orders.residual);
        }

        // stabilization: Delta q = O_{2N+2}
        assert!(out.history[1].orders.delta_q >= 6);
        assert!(out.history[2].orders.delta_q >= 10);

        // inner decomposition defect stays at tolerance level
        let tol = zero_tolerance(PREC) * 10u32;
        for r in &out.history {
            assert!(r.inner_defect <= tol.to_f64());
        }
    }

    #[test]
    fn kam_ledger_follows_closed_form() {
        let rot = rot_for(15);
        let mut params = ScheduleParams::new(ScheduleKind::Kam, 2, PREC);
        params.rho0 = Float::with_val(PREC, 0.05);
        params.gamma0 = Float::with_val(PREC, 0.9);
        assert!(kam_gamma_admissible(&params.gamma0));
        // seed with target order 3 at small degree: M0 from the formula
        // clamps to max_degree / 2
        let seed = kam_seed(&rot, 3, 15, &params.rho0).unwrap();
        let eps0 = seed.eps_n.clone();
        let out = run_schedule(seed, &params, &rot).unwrap();

        let gbar = gamma_bar(&params.gamma0);
        let expect_rho = Float::with_val(PREC, &gbar * &gbar) * &params.rho0;
        assert_eq!(out.rho_n, expect_rho);
        let expect_eps = eps0.pow(Float::with_val(PREC, 2.25));
        let rel = (Float::with_val(PREC, &out.eps_n - &expect_eps) / expect_eps).abs();
        assert!(rel < 1e-60, "eps ledger drift {:e}", rel.to_f64());
    }

    #[test]
    fn kam_seed_targets() {
        let rot = rot_for(15);
        let rho0 = Float::with_val(PREC, 0.05);
        // target 3: exactly the analytic seed
        let s3 = kam_seed(&rot, 3, 15, &rho0).unwrap();
        let (q0, phi0) = crate::billiard::seed_pair(&rot, 15).unwrap();
        assert!((&s3.q - &q0).max_coeff_magnitude().is_zero());
        assert!((&s3.phi - &phi0).max_coeff_magnitude().is_zero());
        assert_eq!(s3.n_n, 1);

        // target 15 = the N0 = 7 seed; re-measured order is part of kam_seed
        let s15 = kam_seed(&rot, 15, 15, &rho0).unwrap();
        assert_eq!(s15.n_n, 7);
        let tol = zero_tolerance(PREC);
        let e = crate::billiard::residual(&s15.q, &s15.phi, &rot).unwrap();
        assert!(e.order(&tol) >= 15);
        // truncated polynomials, still carrying the high-order data
        assert!(s15.q.coeff(14).clone().abs() > 0);
        assert!(s15.phi.max_coeff_magnitude_through(13) > 0);
    }

    #[test]
    fn dump_load_round_trip_and_determinism() {
        let rot = rot_for(13);
        let mut params = ScheduleParams::new(ScheduleKind::Doubling, 2, PREC);
        params.rho0 = Float::with_val(PREC, 0.05);
        let seed = initial_state(&rot, 13, &params.rho0).unwrap();
        let two = run_schedule(seed.clone(), &params, &rot).unwrap();

        let meta = RunMeta {
            theta: golden_theta(PREC),
            precision_bits: PREC,
            c: 0.5,
            tau: 1.0,
            schedule: ScheduleKind::Doubling,
            rho0: params.rho0.clone(),
            gamma0: params.gamma0.clone(),
        };
        let dir = std::env::temp_dir().join(format!("bkam-test-{}", std::process::id()));
        save_state(&two, &meta, &dir).unwrap();
        let (loaded, meta2) = load_state(&dir).unwrap();
        std::fs::remove_dir_all(&dir).ok();

        assert_eq!(meta2.precision_bits, PREC);
        assert_eq!(loaded.n, two.n);
        assert!(loaded.rho_n == two.rho_n && loaded.eps_n == two.eps_n);
        for k in 0..=two.q.max_degree() {
            assert!(loaded.q.coeff(k) == two.q.coeff(k), "q[{k}] not bit-exact");
        }
        for ((_, _, a), (_, _, b)) in loaded.phi.iter().zip(two.phi.iter()) {
            assert!(a.re == b.re && a.im == b.im, "phi not bit-exact");
        }

        // continuing from the loaded state reproduces the direct run
        let three_direct = {
            let mut p = params.clone();
            p.steps = 3;
            run_schedule(seed, &p, &rot).unwrap()
        };
        let three_resumed = {
            let mut p = params.clone();
            p.steps = 1;
            run_schedule(loaded, &p, &rot).unwrap()
        };
        for k in 0..=three_direct.q.max_degree() {
            assert!(three_direct.q.coeff(k) == three_resumed.q.coeff(k));
        }
        for ((_, _, a), (_, _, b)) in three_direct.phi.iter().zip(three_resumed.phi.iter()) {
            assert!(a.re == b.re && a.im == b.im);
        }
    }
}
