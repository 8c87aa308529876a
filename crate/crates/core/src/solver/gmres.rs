use std::fmt::Write as _;
use std::time::Instant;

use super::{norm2, residual, SparseMatrix};

/// Something that approximately applies `A^{-1}`.
pub trait Preconditioner {
    fn apply(&self, r: &[f64]) -> Vec<f64>;
}

pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        r.to_vec()
    }
}

impl Preconditioner for super::Ilu0 {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        super::Ilu0::apply(self, r)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GmresOptions {
    pub rtol: f64,
    pub restart: usize,
    pub max_iters: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions { rtol: 1e-12, restart: 30, max_iters: 10_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub relative_residual: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct GmresResult {
    pub x: Vec<f64>,
    /// Total inner iterations (preconditioner applications).
    pub iterations: usize,
    pub converged: bool,
    /// True relative residual at exit.
    pub relative_residual: f64,
    pub history: Vec<HistoryEntry>,
}

impl GmresResult {
    /// CSV with columns iteration, relative_residual, seconds.
    pub fn history_csv(&self) -> String {
        let mut s = String::from("iteration,relative_residual,seconds\n");
        for h in &self.history {
            let _ = writeln!(s, "{},{:e},{}", h.iteration, h.relative_residual, h.seconds);
        }
        s
    }
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

/// Right-preconditioned restarted GMRES with modified Gram-Schmidt. The
/// initial guess is zero.
pub fn gmres(a: &SparseMatrix, b: &[f64], m: &dyn Preconditioner, opts: &GmresOptions) -> GmresResult {
    assert!(opts.rtol > 0.0 && opts.restart > 0);
    let n = b.len();
    let t0 = Instant::now();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    let mut history = vec![HistoryEntry { iteration: 0, relative_residual: 1.0, seconds: 0.0 }];
    if bnorm == 0.0 {
        return GmresResult { x, iterations: 0, converged: true, relative_residual: 0.0, history };
    }
    let mut iters = 0;
    let mut r = b.to_vec();
    let mut rel = 1.0;
    let mut stagnant = 0;
    while iters < opts.max_iters {
        let beta = norm2(&r);
        let k_max = opts.restart.min(opts.max_iters - iters);
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|x| x / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(k_max);
        let mut h = vec![vec![0.0; k_max]; k_max + 1];
        let mut cs = vec![0.0; k_max];
        let mut sn = vec![0.0; k_max];
        let mut g = vec![0.0; k_max + 1];
        g[0] = beta;
        let mut k_done = 0;
        for j in 0..k_max {
            let zj = m.apply(&v[j]);
            let mut w = a.matvec(&zj);
            z.push(zj);
            for i in 0..=j {
                let hij: f64 = w.iter().zip(&v[i]).map(|(a, b)| a * b).sum();
                h[i][j] = hij;
                for (wk, vk) in w.iter_mut().zip(&v[i]) {
                    *wk -= hij * vk;
                }
            }
            let wn = norm2(&w);
            h[j + 1][j] = wn;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let (c, s) = givens(h[j][j], h[j + 1][j]);
            cs[j] = c;
            sn[j] = s;
            h[j][j] = c * h[j][j] + s * h[j + 1][j];
            h[j + 1][j] = 0.0;
            g[j + 1] = -s * g[j];
            g[j] *= c;
            iters += 1;
            k_done = j + 1;
            let est = g[j + 1].abs() / bnorm;
            history.push(HistoryEntry { iteration: iters, relative_residual: est, seconds: t0.elapsed().as_secs_f64() });
            if est <= opts.rtol || wn <= 1e-300 {
                break;
            }
            v.push(w.iter().map(|x| x / wn).collect());
        }
        let mut y = vec![0.0; k_done];
        for i in (0..k_done).rev() {
            let mut s = g[i];
            for l in i + 1..k_done {
                s -= h[i][l] * y[l];
            }
            y[i] = s / h[i][i];
        }
        for (l, zl) in z.iter().enumerate().take(k_done) {
            for (xk, zk) in x.iter_mut().zip(zl) {
                *xk += y[l] * zk;
            }
        }
        r = residual(a, &x, b);
        let new_rel = norm2(&r) / bnorm;
        if let Some(last) = history.last_mut() {
            last.relative_residual = new_rel;
        }
        if new_rel <= opts.rtol {
            rel = new_rel;
            return GmresResult { x, iterations: iters, converged: true, relative_residual: rel, history };
        }
        if new_rel >= rel * (1.0 - 1e-12) {
            stagnant += 1;
            if stagnant >= 3 {
                log::warn!("GMRES stagnated at relative residual {new_rel:e} after {iters} iterations");
                return GmresResult { x, iterations: iters, converged: false, relative_residual: new_rel, history };
            }
        } else {
            stagnant = 0;
        }
        rel = new_rel;
    }
    GmresResult { x, iterations: iters, converged: false, relative_residual: rel, history }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_in_one_iteration() {
        let a = SparseMatrix::identity(5);
        let b = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let r = gmres(&a, &b, &IdentityPreconditioner, &GmresOptions::default());
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert_eq!(r.x, b);
    }

    #[test]
    fn two_by_two() {
        let a = SparseMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let r = gmres(&a, &[1.0, 1.0], &IdentityPreconditioner, &GmresOptions::default());
        assert!(r.converged && r.iterations <= 2);
        assert!((r.x[0] - 1.0 / 3.0).abs() < 1e-14 && (r.x[1] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn restarted_nonsymmetric() {
        let n = 200;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 3.0));
            if i > 0 {
                t.push((i, i - 1, -1.2));
            }
            if i + 1 < n {
                t.push((i, i + 1, -0.8));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &t);
        let b: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64).collect();
        let opts = GmresOptions { rtol: 1e-10, restart: 5, max_iters: 2000 };
        let r = gmres(&a, &b, &IdentityPreconditioner, &opts);
        assert!(r.converged);
        assert!(norm2(&residual(&a, &r.x, &b)) / norm2(&b) <= 1e-10);
        let csv = r.history_csv();
        assert!(csv.starts_with("iteration,relative_residual,seconds\n"));
        assert_eq!(csv.lines().count(), r.history.len() + 1);
    }
}
