//! Symbolic matrices: determinant and adjugate-based inverse.
//!
//! Keeping the inverse symbolic (as quotients of cofactors by the shared
//! determinant) means downstream partial derivatives stay exact. Minors are
//! memoized over column subsets so the determinant builds an `O(2^dim)`
//! shared DAG instead of a `dim!` tree.

use std::collections::HashMap;

use crate::expr::ScalarExpr;

/// Row-major square matrix of expressions.
pub(crate) type SymMatrix = Vec<Vec<ScalarExpr>>;

struct MinorTable<'m> {
    matrix: &'m SymMatrix,
    rows: Vec<usize>,
    cols_of: HashMap<(usize, u32), ScalarExpr>,
    dim: usize,
}

impl<'m> MinorTable<'m> {
    /// Determinant of the submatrix using `rows[depth..]` and the columns in
    /// `mask`, expanding along `rows[depth]`.
    fn det(&mut self, depth: usize, mask: u32) -> ScalarExpr {
        let dim = self.dim;
        if depth == self.rows.len() {
            return ScalarExpr::one(dim);
        }
        if let Some(d) = self.cols_of.get(&(depth, mask)) {
            return d.clone();
        }
        let row = self.rows[depth];
        let mut acc = ScalarExpr::zero(dim);
        let mut sign = 1.0;
        for col in 0..self.matrix.len() {
            if mask & (1 << col) == 0 {
                continue;
            }
            let entry = &self.matrix[row][col];
            if !entry.is_zero() {
                let sub = self.det(depth + 1, mask & !(1 << col));
                acc = acc.add(&entry.mul(&sub).scale(sign));
            }
            // Cofactor signs follow the column's position within the mask.
            sign = -sign;
        }
        self.cols_of.insert((depth, mask), acc.clone());
        acc
    }
}

fn det_of(matrix: &SymMatrix, rows: Vec<usize>, mask: u32, dim: usize) -> ScalarExpr {
    let mut table = MinorTable {
        matrix,
        rows,
        cols_of: HashMap::new(),
        dim,
    };
    table.det(0, mask)
}

pub(crate) fn determinant(matrix: &SymMatrix) -> ScalarExpr {
    let n = matrix.len();
    let dim = matrix[0][0].dim();
    det_of(matrix, (0..n).collect(), (1 << n) - 1, dim)
}

/// Inverse as `(adjugate / det, det)`. The determinant expression is shared
/// by every entry, so a memoizing evaluator computes it once per point.
pub(crate) fn inverse(matrix: &SymMatrix) -> (SymMatrix, ScalarExpr) {
    let n = matrix.len();
    let dim = matrix[0][0].dim();
    let det = determinant(matrix);
    let mut inv = vec![vec![ScalarExpr::zero(dim); n]; n];
    for i in 0..n {
        for j in 0..n {
            // inverse[i][j] = cofactor[j][i] / det
            let rows: Vec<usize> = (0..n).filter(|&r| r != j).collect();
            let mask = ((1u32 << n) - 1) & !(1 << i);
            let minor = det_of(matrix, rows, mask, dim);
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            inv[i][j] = minor.scale(sign).div(&det);
        }
    }
    (inv, det)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consts(values: &[&[f64]], dim: usize) -> SymMatrix {
        values
            .iter()
            .map(|row| row.iter().map(|&v| ScalarExpr::constant(v, dim)).collect())
            .collect()
    }

    #[test]
    fn determinant_of_constant_matrices() {
        let m = consts(&[&[2.0, 0.0], &[0.0, 3.0]], 1);
        assert_eq!(determinant(&m).as_constant(), Some(6.0));

        let m = consts(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], &[7.0, 8.0, 10.0]], 1);
        assert_eq!(determinant(&m).as_constant(), Some(-3.0));
    }

    #[test]
    fn inverse_matches_numeric_inverse() {
        // Entries 1 + x^2 etc. keep the matrix well-conditioned on [-1,1].
        let dim = 2;
        let x = ScalarExpr::coord(0, dim);
        let y = ScalarExpr::coord(1, dim);
        let m: SymMatrix = vec![
            vec![ScalarExpr::one(dim).add(&x.powi(2)), x.mul(&y).scale(0.3)],
            vec![x.mul(&y).scale(0.3), ScalarExpr::one(dim).add(&y.powi(2))],
        ];
        let (inv, det) = inverse(&m);
        for p in [[0.0, 0.0], [0.5, -0.8], [1.0, 1.0]] {
            let a = nalgebra::DMatrix::from_fn(2, 2, |i, j| m[i][j].evaluate(&p).unwrap());
            let num = a.clone().try_inverse().unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    let sym = inv[i][j].evaluate(&p).unwrap();
                    assert!((sym - num[(i, j)]).abs() < 1e-12);
                }
            }
            assert!((det.evaluate(&p).unwrap() - a.determinant()).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_constant_matrix_folds_to_zero_determinant() {
        let m = consts(&[&[1.0, 2.0], &[2.0, 4.0]], 1);
        assert!(determinant(&m).is_zero());
    }
}
