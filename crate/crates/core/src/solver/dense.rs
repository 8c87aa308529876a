use nalgebra::{DMatrix, DVector};

use super::SparseMatrix;
use crate::error::{Error, Result};

/// Largest system handed to the dense direct solver.
pub const MAX_DENSE_DIM: usize = 2000;

/// LU factorisation with partial pivoting of a small sparse matrix.
#[derive(Clone, Debug)]
pub struct DenseLu {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl DenseLu {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        let n = a.nrows();
        if n > MAX_DENSE_DIM {
            return Err(Error::CoarseTooLarge(n));
        }
        let mut m = DMatrix::<f64>::zeros(n, n);
        for (i, j, v) in a.triplets() {
            m[(i, j)] += v;
        }
        let lu = m.lu();
        let scale = a.values().iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let u = lu.u();
        if (0..n).any(|i| !(u[(i, i)].abs() > 1e-14 * scale)) {
            return Err(Error::SingularCoarse);
        }
        Ok(DenseLu { lu })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let x = self.lu.solve(&DVector::from_column_slice(b)).expect("factor checked for singularity");
        x.as_slice().to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = SparseMatrix::from_dense(&[vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]]);
        let lu = DenseLu::factor(&a).unwrap();
        let x = lu.solve(&[5.0, 3.0, 6.0]);
        let r = super::super::residual(&a, &x, &[5.0, 3.0, 6.0]);
        assert!(super::super::norm2(&r) < 1e-12);
    }

    #[test]
    fn singular_and_oversized() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(DenseLu::factor(&a), Err(Error::SingularCoarse)));
        let big = SparseMatrix::identity(MAX_DENSE_DIM + 1);
        assert!(matches!(DenseLu::factor(&big), Err(Error::CoarseTooLarge(_))));
    }
}
