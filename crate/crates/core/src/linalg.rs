use nalgebra::DMatrix;

/// Relative residual below which a column counts as a linear combination of
/// earlier columns.
const COLLINEAR_TOL: f64 = 1e-10;

/// Indices of columns that are (numerically) linear combinations of earlier
/// columns, found by a greedy Cholesky pass over the Gram matrix `XᵀX`.
pub(crate) fn collinear_columns(gram: &DMatrix<f64>) -> Vec<usize> {
    let k = gram.nrows();
    let mut l = DMatrix::<f64>::zeros(k, k);
    let mut accepted: Vec<usize> = Vec::new();
    let mut rejected = Vec::new();
    for j in 0..k {
        let gjj = gram[(j, j)];
        let mut row = vec![0.0; accepted.len()];
        for (p, &i) in accepted.iter().enumerate() {
            let mut s = gram[(j, i)];
            for q in 0..p {
                s -= row[q] * l[(i, accepted[q])];
            }
            row[p] = s / l[(i, i)];
        }
        let resid = gjj - row.iter().map(|r| r * r).sum::<f64>();
        if !(gjj > 0.0) || resid <= COLLINEAR_TOL * gjj {
            rejected.push(j);
            continue;
        }
        for (p, &i) in accepted.iter().enumerate() {
            l[(j, i)] = row[p];
        }
        l[(j, j)] = resid.sqrt();
        accepted.push(j);
    }
    rejected
}

pub(crate) fn gram(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.tr_mul(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_duplicate_and_zero_columns() {
        let x = DMatrix::from_row_slice(4, 4, &[
            1.0, 1.0, 0.5, 0.0, //
            1.0, 1.0, 2.0, 0.0, //
            1.0, 1.0, -1.0, 0.0, //
            1.0, 1.0, 3.0, 0.0,
        ]);
        assert_eq!(collinear_columns(&gram(&x)), vec![1, 3]);
    }

    #[test]
    fn full_rank_has_none() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        assert!(collinear_columns(&gram(&x)).is_empty());
    }

    #[test]
    fn linear_combination_is_flagged() {
        let x = DMatrix::from_row_slice(4, 3, &[
            1.0, 0.0, 2.0, //
            1.0, 1.0, 1.0, //
            1.0, 2.0, 0.0, //
            1.0, 5.0, -3.0,
        ]);
        // third column = 2·first − second
        assert_eq!(collinear_columns(&gram(&x)), vec![2]);
    }
}
