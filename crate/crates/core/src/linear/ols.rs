//! Least squares through a Householder QR of the column-scaled design.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Relative pivot size below which a column counts as dependent.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Solves `min ||X b - y||²`. `names` label the columns in error messages.
pub fn solve(x: &DMatrix<f64>, y: &[f64], names: &[String]) -> Result<Vec<f64>> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::Shape {
            expected: n,
            actual: y.len(),
        });
    }
    if names.len() != k {
        return Err(Error::Shape {
            expected: k,
            actual: names.len(),
        });
    }
    if n < k {
        return Err(Error::SeriesTooShort {
            needed: k,
            actual: n,
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Config("non-finite value in regression data".into()));
    }

    let norms: Vec<f64> = (0..k).map(|j| x.column(j).norm()).collect();
    let zero: Vec<String> = (0..k)
        .filter(|&j| norms[j] == 0.0)
        .map(|j| names[j].clone())
        .collect();
    if !zero.is_empty() {
        return Err(Error::IllConditioned { columns: zero });
    }
    let mut scaled = x.clone();
    for (j, norm) in norms.iter().enumerate() {
        scaled.column_mut(j).unscale_mut(*norm);
    }

    let qr = scaled.qr();
    let r = qr.r();
    let max_pivot = (0..k).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    let dependent: Vec<String> = (0..k)
        .filter(|&j| r[(j, j)].abs() <= RANK_TOLERANCE * max_pivot)
        .map(|j| names[j].clone())
        .collect();
    if !dependent.is_empty() {
        return Err(Error::IllConditioned { columns: dependent });
    }

    let mut qty = DVector::from_column_slice(y);
    qr.q_tr_mul(&mut qty);
    let head = qty.rows(0, k).into_owned();
    let z = r
        .solve_upper_triangular(&head)
        .ok_or_else(|| Error::IllConditioned {
            columns: names.to_vec(),
        })?;
    let beta: Vec<f64> = z.iter().zip(&norms).map(|(z, s)| z / s).collect();
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::IllConditioned {
            columns: names.to_vec(),
        });
    }
    Ok(beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|j| format!("x{j}")).collect()
    }

    #[test]
    fn exact_multiple() {
        let x = DMatrix::from_column_slice(5, 1, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let y = [2.0, 4.0, 6.0, 8.0, 10.0];
        let b = solve(&x, &y, &names(1)).unwrap();
        assert!((b[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn duplicated_column_named() {
        let c = [1.0, 3.0, 2.0, 5.0, 4.0];
        let mut data = c.to_vec();
        data.extend(c);
        data.extend([1.0, 0.0, 1.0, 0.0, 1.0]);
        let x = DMatrix::from_column_slice(5, 3, &data);
        let err = solve(&x, &[1.0; 5], &names(3)).unwrap_err();
        assert!(matches!(err, Error::IllConditioned { ref columns } if columns == &["x1"]), "{err}");
    }

    #[test]
    fn zero_column_named() {
        let x = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 3.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            solve(&x, &[1.0, 2.0, 3.0], &names(2)),
            Err(Error::IllConditioned { columns }) if columns == ["x1"]
        ));
    }

    #[test]
    fn underdetermined_rejected() {
        let x = DMatrix::from_element(2, 3, 1.0);
        assert!(matches!(
            solve(&x, &[1.0, 2.0], &names(3)),
            Err(Error::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn residual_orthogonal() {
        let n = 50;
        let data: Vec<f64> = (0..n * 3)
            .map(|i| ((i * 7919) % 101) as f64 / 17.0 - 2.0)
            .collect();
        let x = DMatrix::from_column_slice(n, 3, &data);
        let y: Vec<f64> = (0..n).map(|i| ((i * 31) % 13) as f64).collect();
        let b = solve(&x, &y, &names(3)).unwrap();
        let r = DVector::from_column_slice(&y) - &x * DVector::from_column_slice(&b);
        let xtr = x.transpose() * r;
        let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(xtr.amax() <= 1e-6 * ynorm);
    }
}
