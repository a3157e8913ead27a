//! Small dense complex linear solves at working precision.
//!
//! The systems here are tiny (tens of unknowns): the per-degree systems of
//! the direct solver and the cross-check solves for the triangular outer
//! system. Partial-pivoted Gaussian elimination is entirely adequate.

use crate::error::{Error, Result};
use crate::numerics::Scalar;
use rug::Float;

/// Solves `A x = b` in place by LU with partial pivoting. `A` is given in
/// row-major order. Returns `Err` with the supplied `degree` tag when a
/// pivot falls below `pivot_tol`.
pub fn solve_dense(
    mut a: Vec<Vec<Scalar>>,
    mut b: Vec<Scalar>,
    pivot_tol: &Float,
    degree: usize,
) -> Result<Vec<Scalar>> {
    let n = a.len();
    assert_eq!(b.len(), n);
    for row in &a {
        assert_eq!(row.len(), n);
    }
    for col in 0..n {
        // pivot search
        let mut best = col;
        let mut best_mag = a[col][col].abs();
        for row in (col + 1)..n {
            let mag = a[row][col].abs();
            if mag > best_mag {
                best_mag = mag;
                best = row;
            }
        }
        if best_mag <= *pivot_tol {
            return Err(Error::SingularDegree { degree });
        }
        if best != col {
            a.swap(col, best);
            b.swap(col, best);
        }
        let pivot = a[col][col].clone();
        let pivot_inv = pivot.recip();
        for row in (col + 1)..n {
            if a[row][col].is_zero() {
                continue;
            }
            let factor = &a[row][col] * &pivot_inv;
            for k in col..n {
                let t = &factor * &a[col][k];
                a[row][k] -= &t;
            }
            let t = &factor * &b[col];
            b[row] -= &t;
        }
    }
    // back substitution
    let prec = b[0].prec();
    let mut x = vec![Scalar::zero(prec); n];
    for row in (0..n).rev() {
        let mut acc = b[row].clone();
        for k in (row + 1)..n {
            acc.sub_prod(&a[row][k], &x[k]);
        }
        x[row] = &acc / &a[row][row];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::zero_tolerance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const PREC: u32 = 256;

    #[test]
    fn random_solve_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let tol = zero_tolerance(PREC);
        for n in [1usize, 3, 8] {
            let a: Vec<Vec<Scalar>> = (0..n)
                .map(|_| {
                    (0..n)
                        .map(|_| {
                            Scalar::new(
                                Float::with_val(PREC, rng.gen_range(-1.0f64..1.0)),
                                Float::with_val(PREC, rng.gen_range(-1.0f64..1.0)),
                            )
                        })
                        .collect()
                })
                .collect();
            let x_true: Vec<Scalar> = (0..n)
                .map(|_| {
                    Scalar::new(
                        Float::with_val(PREC, rng.gen_range(-1.0f64..1.0)),
                        Float::with_val(PREC, rng.gen_range(-1.0f64..1.0)),
                    )
                })
                .collect();
            let b: Vec<Scalar> = (0..n)
                .map(|i| {
                    let mut acc = Scalar::zero(PREC);
                    for k in 0..n {
                        acc.add_prod(&a[i][k], &x_true[k]);
                    }
                    acc
                })
                .collect();
            let x = solve_dense(a, b, &tol, 0).unwrap();
            for (got, want) in x.iter().zip(x_true.iter()) {
                assert!((got - want).abs() <= Float::with_val(PREC, &tol * &Float::with_val(PREC, 100)));
            }
        }
    }

    #[test]
    fn singular_matrix_reported() {
        let tol = zero_tolerance(PREC);
        let a = vec![
            vec![Scalar::one(PREC), Scalar::one(PREC)],
            vec![Scalar::one(PREC), Scalar::one(PREC)],
        ];
        let b = vec![Scalar::one(PREC), Scalar::zero(PREC)];
        assert!(matches!(
            solve_dense(a, b, &tol, 7),
            Err(Error::SingularDegree { degree: 7 })
        ));
    }
}
