//! Small dense linear algebra over `Scalar` (Gauss-Jordan; exact when the
//! input is exact).

use crate::scalar::Scalar;

/// Inverse and determinant of a square matrix; `None` when singular. Pivots
/// on the entry of largest magnitude so the float path stays stable.
pub(crate) fn invert(m: &[Vec<Scalar>]) -> Option<(Vec<Vec<Scalar>>, Scalar)> {
    let n = m.len();
    let mut a: Vec<Vec<Scalar>> = m.to_vec();
    let mut inv: Vec<Vec<Scalar>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { Scalar::one() } else { Scalar::zero() })
                .collect()
        })
        .collect();
    let mut det = Scalar::one();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col]
                .abs_f64()
                .partial_cmp(&a[j][col].abs_f64())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot][col].is_zero() {
            return None;
        }
        if pivot != col {
            a.swap(pivot, col);
            inv.swap(pivot, col);
            det = -det;
        }
        let p = a[col][col].clone();
        det = &det * &p;
        for j in 0..n {
            a[col][j] = a[col][j].checked_div(&p).unwrap();
            inv[col][j] = inv[col][j].checked_div(&p).unwrap();
        }
        for i in 0..n {
            if i == col || a[i][col].is_zero() {
                continue;
            }
            let f = a[i][col].clone();
            for j in 0..n {
                a[i][j] = &a[i][j] - &(&f * &a[col][j]);
                inv[i][j] = &inv[i][j] - &(&f * &inv[col][j]);
            }
        }
    }
    Some((inv, det))
}

/// Solve `A x = b`; `None` when `A` is singular.
pub(crate) fn solve(a: &[Vec<Scalar>], b: &[Scalar]) -> Option<Vec<Scalar>> {
    let (inv, _) = invert(a)?;
    let n = b.len();
    Some(
        (0..n)
            .map(|i| {
                let mut acc = Scalar::zero();
                for j in 0..n {
                    acc = &acc + &(&inv[i][j] * &b[j]);
                }
                acc
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_inverse() {
        let m = vec![
            vec![Scalar::from_int(2), Scalar::one()],
            vec![Scalar::one(), Scalar::one()],
        ];
        let (inv, det) = invert(&m).unwrap();
        assert_eq!(det, Scalar::one());
        assert_eq!(inv[0][0], Scalar::one());
        assert_eq!(inv[0][1], Scalar::from_int(-1));
        assert!(inv.iter().flatten().all(Scalar::is_exact));
    }

    #[test]
    fn singular_is_none() {
        let m = vec![
            vec![Scalar::one(), Scalar::one()],
            vec![Scalar::from_int(2), Scalar::from_int(2)],
        ];
        assert!(invert(&m).is_none());
    }
}
