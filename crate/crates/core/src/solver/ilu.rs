use super::SparseMatrix;
use crate::error::{Error, Result};

/// Incomplete LU factorisation with the sparsity pattern of `A` (natural
/// ordering). `L` has a unit diagonal and is stored below the diagonal of
/// the same CSR arrays as `U`.
#[derive(Clone, Debug)]
pub struct Ilu0 {
    lu: SparseMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        assert_eq!(a.nrows(), a.ncols(), "ILU(0) needs a square matrix");
        let n = a.nrows();
        let mut lu = a.clone();
        let rp = lu.row_ptr().to_vec();
        let ci = lu.col_idx().to_vec();
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            for k in rp[i]..rp[i + 1] {
                if ci[k] == i {
                    diag[i] = k;
                }
            }
            if diag[i] == usize::MAX {
                return Err(Error::ZeroPivot(i));
            }
        }
        let mut pos = vec![usize::MAX; n];
        let vals = lu.values_mut();
        for i in 0..n {
            for k in rp[i]..rp[i + 1] {
                pos[ci[k]] = k;
            }
            for kk in rp[i]..rp[i + 1] {
                let k = ci[kk];
                if k >= i {
                    break;
                }
                let pivot = vals[diag[k]];
                let lik = vals[kk] / pivot;
                vals[kk] = lik;
                for jj in diag[k] + 1..rp[k + 1] {
                    let p = pos[ci[jj]];
                    if p != usize::MAX {
                        vals[p] -= lik * vals[jj];
                    }
                }
            }
            let d = vals[diag[i]];
            if d == 0.0 || !d.is_finite() {
                return Err(Error::ZeroPivot(i));
            }
            for k in rp[i]..rp[i + 1] {
                pos[ci[k]] = usize::MAX;
            }
        }
        Ok(Ilu0 { lu, diag })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Solves `L U x = b`.
    pub fn apply_into(&self, b: &[f64], x: &mut [f64]) {
        let n = self.dim();
        let rp = self.lu.row_ptr();
        let ci = self.lu.col_idx();
        let v = self.lu.values();
        for i in 0..n {
            let mut s = b[i];
            for k in rp[i]..self.diag[i] {
                s -= v[k] * x[ci[k]];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in self.diag[i] + 1..rp[i + 1] {
                s -= v[k] * x[ci[k]];
            }
            x[i] = s / v[self.diag[i]];
        }
    }

    pub fn apply(&self, b: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; b.len()];
        self.apply_into(b, &mut x);
        x
    }

    /// Dense product `L U`, for inspection on small problems.
    pub fn product(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let d = self.lu.to_dense();
        let mut out = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..=i.min(j) {
                    let l = if k == i { 1.0 } else { d[i][k] };
                    s += l * d[k][j];
                }
                out[i][j] = s;
            }
        }
        out
    }
}
