//! Coefficient-growth analysis and the machine-readable verification
//! report.
//!
//! The growth model is `log|c_x| <= log_C * x + alpha * x * log(x)`: a
//! factorial-type envelope whose exponent `alpha` measures the Gevrey
//! class. The fit is an ordinary least-squares in the two features
//! `(x, x log x)`; a grid scan separately reports the smallest exponent
//! that admits a bounded constant on the window.

use crate::billiard::{aux_fields, SAssembler};
use crate::error::{Error, Result};
use crate::inner::solve_inner_with_aux;
use crate::numerics::{zero_tolerance, Rotation};
use crate::operators::diag_average;
use crate::series::{BiSeries, UniSeries};
use rug::Float;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GevreyFit {
    /// Fitted exponent of the `x log x` feature.
    pub alpha: f64,
    /// Fitted coefficient of the linear feature (log of the geometric
    /// constant).
    pub log_c: f64,
    /// Degree window `(lowest, highest)` actually used.
    pub window: (usize, usize),
    /// Per-point fit residuals `log|c_x| - fit(x)`.
    pub residuals: Vec<(usize, f64)>,
    /// Smallest grid exponent admitting a bounded constant on the window,
    /// if any.
    pub satisfied_alpha: Option<f64>,
}

/// Least-squares fit of `log|c_x|` against `(x, x log x)` plus a grid scan
/// for the smallest exponent with bounded partial suprema. Points with
/// zero magnitude are dropped; at least six must survive.
pub fn gevrey_fit(points: &[(usize, Float)], alpha_grid: &[f64]) -> Result<GevreyFit> {
    let data: Vec<(usize, f64)> = points
        .iter()
        .filter(|(x, c)| *x >= 2 && !c.is_zero() && c.clone().abs() > 0)
        .map(|(x, c)| (*x, c.clone().abs().ln().to_f64()))
        .collect();
    if data.len() < 6 {
        return Err(Error::InsufficientData {
            got: data.len(),
            need: 6,
        });
    }

    // normal equations for y ~ a * x log x + b * x
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0f64, 0f64, 0f64, 0f64, 0f64);
    for &(x, y) in &data {
        let xf = x as f64;
        let f1 = xf * xf.ln();
        let f2 = xf;
        s11 += f1 * f1;
        s12 += f1 * f2;
        s22 += f2 * f2;
        r1 += f1 * y;
        r2 += f2 * y;
    }
    let det = s11 * s22 - s12 * s12;
    if det.abs() < 1e-30 {
        return Err(Error::InsufficientData {
            got: data.len(),
            need: 6,
        });
    }
    let alpha = (r1 * s22 - r2 * s12) / det;
    let log_c = (s11 * r2 - s12 * r1) / det;

    let residuals: Vec<(usize, f64)> = data
        .iter()
        .map(|&(x, y)| {
            let xf = x as f64;
            (x, y - alpha * xf * xf.ln() - log_c * xf)
        })
        .collect();

    // grid scan: alpha is satisfied when the per-point constant
    // (log|c_x| - alpha x log x)/x stops growing across the window
    // (partial-sup proxy for "finite C exists").
    let mut satisfied_alpha = None;
    let mut grid = alpha_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for &a in &grid {
        let u: Vec<f64> = data
            .iter()
            .map(|&(x, y)| {
                let xf = x as f64;
                (y - a * xf * xf.ln()) / xf
            })
            .collect();
        let half = u.len() / 2;
        let sup1 = u[..half].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sup2 = u[half..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if sup2 <= sup1 + 0.02 {
            satisfied_alpha = Some(a);
            break;
        }
    }

    let window = (data.first().unwrap().0, data.last().unwrap().0);
    Ok(GevreyFit {
        alpha,
        log_c,
        window,
        residuals,
        satisfied_alpha,
    })
}

/// `(2k, |q_{2k}|)` for the even support coefficients above tolerance.
pub fn q_growth_points(q: &UniSeries) -> Vec<(usize, Float)> {
    let tol = zero_tolerance(q.prec());
    q.iter()
        .filter(|(k, c)| *k >= 2 && (*c).clone().abs() > tol)
        .map(|(k, c)| (k, c.clone().abs()))
        .collect()
}

/// `(n, sup_{j+k=n} |phi_{j,k}|)` for the conjugacy coefficients.
pub fn phi_growth_points(phi: &BiSeries) -> Vec<(usize, Float)> {
    let prec = phi.prec();
    let tol = zero_tolerance(prec);
    let mut sup = vec![Float::new(prec); phi.max_degree() + 1];
    for (j, k, c) in phi.iter() {
        let a = c.abs();
        if a > sup[j + k] {
            sup[j + k] = a;
        }
    }
    sup.into_iter()
        .enumerate()
        .filter(|(n, s)| *n >= 2 && *s > tol)
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub defect: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckEntry {
    fn new(name: &str, defect: &Float, tolerance: &Float) -> Self {
        CheckEntry {
            name: name.to_string(),
            defect: defect.to_f64(),
            tolerance: tolerance.to_f64(),
            pass: defect <= tolerance,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub entries: Vec<CheckEntry>,
    pub passed: bool,
}

impl VerifyReport {
    fn from_entries(entries: Vec<CheckEntry>) -> Self {
        let passed = entries.iter().all(|e| e.pass);
        VerifyReport { entries, passed }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_else(|e| format!("{{\"error\":\"{e}\"}}"))
    }
}

/// Runs every structural invariant against a `(q, phi)` state: seed
/// normalization, parity, symmetry, real structure, the residual-order
/// claim, the averaged generating function, and the inner decomposition
/// identity. Failures become report entries, never errors.
pub fn verify_state(
    q: &UniSeries,
    phi: &BiSeries,
    rot: &Rotation,
    claimed_order: Option<usize>,
) -> VerifyReport {
    let prec = q.prec();
    let tol = zero_tolerance(prec);
    let tol10 = Float::with_val(prec, &tol * &Float::with_val(prec, 10));
    let mut entries = Vec::new();

    let q0_defect = (q.coeff(0).clone() - Float::with_val(prec, 1)).abs();
    entries.push(CheckEntry::new("q constant term is 1", &q0_defect, &tol));

    let mut odd_q = Float::new(prec);
    for (k, c) in q.iter() {
        if k % 2 == 1 {
            let a = c.clone().abs();
            if a > odd_q {
                odd_q = a;
            }
        }
    }
    entries.push(CheckEntry::new("q is even", &odd_q, &tol));

    let one = crate::numerics::Scalar::one(prec);
    let seed_defect = (phi.coeff(1, 0) - &one)
        .abs()
        .max(&(phi.coeff(0, 1) - &one).abs());
    entries.push(CheckEntry::new(
        "phi degree-1 part is z + zbar",
        &seed_defect,
        &tol,
    ));

    entries.push(CheckEntry::new(
        "phi is symmetric",
        &phi.max_asymmetry(),
        &tol,
    ));

    let mut real_defect = Float::new(prec);
    for (j, k, c) in phi.iter() {
        if j < k {
            continue;
        }
        let d = (&c.conj() - phi.coeff(k, j)).abs();
        if d > real_defect {
            real_defect = d;
        }
    }
    entries.push(CheckEntry::new(
        "phi has real-function structure",
        &real_defect,
        &tol,
    ));

    let mut even_phi = Float::new(prec);
    for (j, k, c) in phi.iter() {
        if (j + k) % 2 == 0 {
            let a = c.abs();
            if a > even_phi {
                even_phi = a;
            }
        }
    }
    entries.push(CheckEntry::new("phi has only odd degrees", &even_phi, &tol));

    match SAssembler::new(phi, rot) {
        Ok(asm) => match asm.assemble(q, rot) {
            Ok(pack) => {
                let e = pack.residual();
                let claim = claimed_order.unwrap_or(3);
                let resid_defect = if claim == 0 {
                    Float::new(prec)
                } else {
                    e.max_coeff_magnitude_through(claim - 1)
                };
                let collapse = Float::with_val(prec, &tol * &Float::with_val(prec, 1000));
                entries.push(CheckEntry::new(
                    &format!("residual vanishes through degree {}", claim.max(1) - 1),
                    &resid_defect,
                    &collapse,
                ));

                // [S] - 1 vanishes one degree past the residual order
                let avg = diag_average(&pack.s_minus);
                let mut avg_defect = Float::new(prec);
                for j in 0..=(claim / 2) {
                    let mut c = avg.coeff(j, j).clone();
                    if j == 0 {
                        c -= &one;
                    }
                    let a = c.abs();
                    if a > avg_defect {
                        avg_defect = a;
                    }
                }
                entries.push(CheckEntry::new(
                    "averaged S is 1 through the residual order",
                    &avg_defect,
                    &collapse,
                ));

                match aux_fields(&pack, phi, rot) {
                    Ok(aux) => match solve_inner_with_aux(&asm, &pack, &aux, q, phi, rot) {
                        Ok(step) => {
                            let defect = (&step.pi_psi_over_h - &(&step.r1 + &step.r2))
                                .max_coeff_magnitude();
                            entries.push(CheckEntry::new(
                                "inner decomposition Pi(psi/h) = R1 + R2",
                                &defect,
                                &tol10,
                            ));
                        }
                        Err(e) => entries.push(CheckEntry {
                            name: format!("inner solve failed: {e}"),
                            defect: f64::INFINITY,
                            tolerance: 0.0,
                            pass: false,
                        }),
                    },
                    Err(e) => entries.push(CheckEntry {
                        name: format!("aux fields failed: {e}"),
                        defect: f64::INFINITY,
                        tolerance: 0.0,
                        pass: false,
                    }),
                }
            }
            Err(e) => entries.push(CheckEntry {
                name: format!("assembly failed: {e}"),
                defect: f64::INFINITY,
                tolerance: 0.0,
                pass: false,
            }),
        },
        Err(e) => entries.push(CheckEntry {
            name: format!("seed validation failed: {e}"),
            defect: f64::INFINITY,
            tolerance: 0.0,
            pass: false,
        }),
    }

    VerifyReport::from_entries(entries)
}

/// Coefficientwise comparison of two states under a shared gauge, at the
/// given relative tolerance, through the smaller common degree.
pub fn compare_states(
    a: (&UniSeries, &BiSeries),
    b: (&UniSeries, &BiSeries),
    through_degree: usize,
    rel_tol: f64,
) -> CheckEntry {
    let prec = a.0.prec();
    let tol = zero_tolerance(prec);
    let mut worst = Float::new(prec);
    let d = through_degree
        .min(a.1.max_degree())
        .min(b.1.max_degree())
        .min(a.0.max_degree())
        .min(b.0.max_degree());
    for k in 0..=d {
        let x = a.0.coeff(k);
        let y = b.0.coeff(k);
        let diff = Float::with_val(prec, x - y).abs();
        let scale = x.clone().abs().max(&y.clone().abs()).max(&tol);
        let rel = diff / scale;
        if rel > worst {
            worst = rel;
        }
    }
    for dd in 0..=d {
        for j in 0..=dd {
            let x = a.1.coeff(j, dd - j);
            let y = b.1.coeff(j, dd - j);
            let diff = (x - y).abs();
            let scale = x.abs().max(&y.abs()).max(&tol);
            let rel = diff / scale;
            if rel > worst {
                worst = rel;
            }
        }
    }
    CheckEntry::new(
        &format!("coefficient agreement through degree {d} (relative)"),
        &worst,
        &Float::with_val(prec, rel_tol),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const PREC: u32 = 256;

    #[test]
    fn geometric_sequence_has_zero_alpha() {
        let points: Vec<(usize, Float)> = (2..40)
            .map(|k| (k, Float::with_val(PREC, 0.7f64.powi(k as i32))))
            .collect();
        let fit = gevrey_fit(&points, &[0.0, 0.5, 1.0]).unwrap();
        assert!(fit.alpha.abs() < 0.05, "alpha = {}", fit.alpha);
        assert_eq!(fit.satisfied_alpha, Some(0.0));
    }

    #[test]
    fn factorial_sequence_has_alpha_one() {
        let mut c = Float::with_val(PREC, 1);
        let mut points = Vec::new();
        for k in 1..40usize {
            c *= k as u32;
            if k >= 2 {
                points.push((k, c.clone()));
            }
        }
        let fit = gevrey_fit(&points, &[0.0, 0.5, 1.0, 1.5]).unwrap();
        assert!((fit.alpha - 1.0).abs() < 0.05, "alpha = {}", fit.alpha);
        // k! admits a bounded constant only from alpha = 1 on
        assert_eq!(fit.satisfied_alpha, Some(1.0));
    }

    #[test]
    fn fit_is_deterministic_and_needs_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(80);
        let points: Vec<(usize, Float)> = (2..30)
            .map(|k| {
                (
                    k,
                    Float::with_val(PREC, rng.gen_range(0.5f64..2.0) * 0.9f64.powi(k as i32)),
                )
            })
            .collect();
        let f1 = gevrey_fit(&points, &[0.0, 1.0]).unwrap();
        let f2 = gevrey_fit(&points, &[0.0, 1.0]).unwrap();
        assert_eq!(f1.alpha, f2.alpha);
        assert_eq!(f1.log_c, f2.log_c);

        let few: Vec<(usize, Float)> = points.into_iter().take(4).collect();
        assert!(matches!(
            gevrey_fit(&few, &[0.0]),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn verify_report_passes_on_seed_and_fails_on_corruption() {
        use crate::billiard::seed_pair;
        use crate::numerics::{golden_theta, make_rotation, Scalar};

        let rot = make_rotation(&golden_theta(PREC), 0.5, 1.0, PREC, 64).unwrap();
        let (q0, phi0) = seed_pair(&rot, 10).unwrap();
        let report = verify_state(&q0, &phi0, &rot, Some(3));
        assert!(report.passed, "{}", report.to_json());

        // perturb one coefficient asymmetrically by 1e-10
        let mut bad = phi0.clone();
        *bad.coeff_mut(3, 0) =
            &bad.coeff(3, 0).clone() + &Scalar::from_f64(PREC, 1e-10);
        let report = verify_state(&q0, &bad, &rot, Some(3));
        assert!(!report.passed);
        let sym = report
            .entries
            .iter()
            .find(|e| e.name.contains("symmetric"))
            .unwrap();
        assert!(!sym.pass);
    }

    #[test]
    fn comparison_entry_detects_divergence() {
        use crate::billiard::seed_pair;
        use crate::numerics::{golden_theta, make_rotation};
        let rot = make_rotation(&golden_theta(PREC), 0.5, 1.0, PREC, 64).unwrap();
        let (q0, phi0) = seed_pair(&rot, 8).unwrap();
        let same = compare_states((&q0, &phi0), (&q0, &phi0), 8, 1e-20);
        assert!(same.pass);
        let mut q1 = q0.clone();
        *q1.coeff_mut(2) += &Float::with_val(PREC, 1e-10);
        let diff = compare_states((&q0, &phi0), (&q1, &phi0), 8, 1e-20);
        assert!(!diff.pass);
    }
}
