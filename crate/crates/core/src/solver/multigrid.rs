use rayon::prelude::*;

use super::{DenseLu, Ilu0, Preconditioner, SparseMatrix};
use crate::error::{Error, Result};
use crate::fem::{self, LinearSystem, ModelProblem};
use crate::hierarchy::MeshHierarchy;
use crate::interp;

pub const DEFAULT_SMOOTHS: usize = 3;

/// One level of the V-cycle: operator, constrained rows and smoother.
#[derive(Clone, Debug)]
pub struct MgLevel {
    pub matrix: SparseMatrix,
    /// Rows fixed by Dirichlet conditions; corrections vanish there.
    pub constrained: Vec<bool>,
}

/// V-cycle preconditioner over rediscretised level operators. Level 0 is
/// the finest; `prolongations[k]` maps level `k + 1` to level `k`.
#[derive(Clone, Debug)]
pub struct MgPreconditioner {
    levels: Vec<MgLevel>,
    prolongations: Vec<SparseMatrix>,
    smoothers: Vec<Ilu0>,
    coarse: DenseLu,
    pre_smooths: usize,
    post_smooths: usize,
}

impl MgPreconditioner {
    pub fn new(levels: Vec<MgLevel>, prolongations: Vec<SparseMatrix>, smooths: usize) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::SingleLevel);
        }
        if prolongations.len() + 1 != levels.len() {
            return Err(Error::DimensionMismatch { expected: levels.len() - 1, got: prolongations.len() });
        }
        for (k, p) in prolongations.iter().enumerate() {
            if p.nrows() != levels[k].matrix.nrows() {
                return Err(Error::DimensionMismatch { expected: levels[k].matrix.nrows(), got: p.nrows() });
            }
            if p.ncols() != levels[k + 1].matrix.nrows() {
                return Err(Error::DimensionMismatch { expected: levels[k + 1].matrix.nrows(), got: p.ncols() });
            }
        }
        let last = levels.len() - 1;
        let smoothers = levels[..last].iter().map(|l| Ilu0::factor(&l.matrix)).collect::<Result<Vec<_>>>()?;
        let coarse = DenseLu::factor(&levels[last].matrix)?;
        Ok(MgPreconditioner { levels, prolongations, smoothers, coarse, pre_smooths: smooths, post_smooths: smooths })
    }

    /// Rediscretises `problem` on every level of `h` and links the levels
    /// with the traversal-built prolongations. Returns the finest system
    /// alongside the preconditioner.
    pub fn from_hierarchy(h: &MeshHierarchy, problem: &ModelProblem, smooths: usize) -> Result<(LinearSystem, Self)> {
        if h.is_empty() {
            return Err(Error::SingleLevel);
        }
        let mut systems =
            (0..h.len()).into_par_iter().map(|k| fem::assemble(h.mesh(k), problem)).collect::<Result<Vec<_>>>()?;
        let prolongations = (1..h.len())
            .into_par_iter()
            .map(|k| interp::build_prolongation(h.mesh(k - 1), h.mesh(k)).map(|(p, _)| p.matrix().clone()))
            .collect::<Result<Vec<_>>>()?;
        let levels = systems
            .iter()
            .map(|s| MgLevel { matrix: s.matrix.clone(), constrained: s.constrained_mask() })
            .collect();
        let mg = MgPreconditioner::new(levels, prolongations, smooths)?;
        Ok((systems.swap_remove(0), mg))
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, k: usize) -> &MgLevel {
        &self.levels[k]
    }

    fn smooth(&self, k: usize, b: &[f64], x: &mut [f64], sweeps: usize) {
        let a = &self.levels[k].matrix;
        let mut r = vec![0.0; b.len()];
        let mut d = vec![0.0; b.len()];
        for _ in 0..sweeps {
            a.matvec_into(x, &mut r);
            for (ri, bi) in r.iter_mut().zip(b) {
                *ri = bi - *ri;
            }
            self.smoothers[k].apply_into(&r, &mut d);
            for (xi, di) in x.iter_mut().zip(&d) {
                *xi += di;
            }
        }
    }

    fn cycle(&self, k: usize, b: &[f64]) -> Vec<f64> {
        if k + 1 == self.levels.len() {
            return self.coarse.solve(b);
        }
        let mut x = vec![0.0; b.len()];
        self.smooth(k, b, &mut x, self.pre_smooths);
        let mut r = super::residual(&self.levels[k].matrix, &x, b);
        for (ri, &c) in r.iter_mut().zip(&self.levels[k].constrained) {
            if c {
                *ri = 0.0;
            }
        }
        let mut rc = self.prolongations[k].matvec_transpose(&r);
        for (ri, &c) in rc.iter_mut().zip(&self.levels[k + 1].constrained) {
            if c {
                *ri = 0.0;
            }
        }
        let ec = self.cycle(k + 1, &rc);
        let e = self.prolongations[k].matvec(&ec);
        for ((xi, ei), &c) in x.iter_mut().zip(&e).zip(&self.levels[k].constrained) {
            if !c {
                *xi += ei;
            }
        }
        self.smooth(k, b, &mut x, self.post_smooths);
        x
    }

    /// One V-cycle applied to `r` with a zero initial guess.
    pub fn vcycle(&self, r: &[f64]) -> Result<Vec<f64>> {
        let n = self.levels[0].matrix.nrows();
        if r.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: r.len() });
        }
        Ok(self.cycle(0, r))
    }
}

impl Preconditioner for MgPreconditioner {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        self.cycle(0, r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{build_hierarchy, HierarchyConfig};
    use crate::meshgen::{generate_pacman, GradingSpec};
    use crate::solver::{gmres, norm2, residual, GmresOptions};

    fn pacman(n: usize) -> MeshHierarchy {
        let mesh = generate_pacman(&GradingSpec::graded(5.0 / 9.0), n).unwrap();
        let cfg = HierarchyConfig { metrics: false, ..HierarchyConfig::for_dim(2) };
        build_hierarchy(&mesh, &cfg).unwrap()
    }

    #[test]
    fn single_level_is_direct_solve() {
        let mesh = generate_pacman(&GradingSpec::graded(5.0 / 9.0), 150).unwrap();
        let h = MeshHierarchy::from_meshes(vec![mesh], false).unwrap();
        let (sys, mg) = MgPreconditioner::from_hierarchy(&h, &ModelProblem::pacman(), DEFAULT_SMOOTHS).unwrap();
        assert_eq!(mg.num_levels(), 1);
        let x = mg.vcycle(&sys.rhs).unwrap();
        assert!(norm2(&residual(&sys.matrix, &x, &sys.rhs)) < 1e-12 * norm2(&sys.rhs));
    }

    #[test]
    fn vcycle_is_linear() {
        let h = pacman(3000);
        assert!(h.len() >= 3);
        let (sys, mg) = MgPreconditioner::from_hierarchy(&h, &ModelProblem::pacman(), DEFAULT_SMOOTHS).unwrap();
        let n = sys.num_dofs();
        let r1: Vec<f64> = (0..n).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let r2: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let (a, b) = (1.7, -0.6);
        let comb: Vec<f64> = r1.iter().zip(&r2).map(|(x, y)| a * x + b * y).collect();
        let lhs = mg.vcycle(&comb).unwrap();
        let (z1, z2) = (mg.vcycle(&r1).unwrap(), mg.vcycle(&r2).unwrap());
        let scale = lhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            assert!((lhs[i] - (a * z1[i] + b * z2[i])).abs() <= 1e-12 * scale.max(1.0));
        }
        assert!(matches!(mg.vcycle(&r1[1..]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn stationary_iteration_contracts() {
        let h = pacman(5000);
        let (sys, mg) = MgPreconditioner::from_hierarchy(&h, &ModelProblem::pacman(), DEFAULT_SMOOTHS).unwrap();
        let exact = crate::solver::DenseLu::factor(&sys.matrix).map(|lu| lu.solve(&sys.rhs));
        let exact = match exact {
            Ok(x) => x,
            Err(_) => {
                let ilu = Ilu0::factor(&sys.matrix).unwrap();
                gmres(&sys.matrix, &sys.rhs, &ilu, &GmresOptions { rtol: 1e-14, restart: 50, max_iters: 20_000 }).x
            }
        };
        let mut x = vec![0.0; sys.num_dofs()];
        let err = |x: &[f64]| norm2(&x.iter().zip(&exact).map(|(a, b)| a - b).collect::<Vec<_>>());
        let mut e = err(&x);
        let mut ratios = Vec::new();
        for _ in 0..5 {
            let r = residual(&sys.matrix, &x, &sys.rhs);
            let d = mg.vcycle(&r).unwrap();
            x.iter_mut().zip(&d).for_each(|(a, b)| *a += b);
            let e1 = err(&x);
            ratios.push(e1 / e);
            e = e1;
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!(mean <= 0.5, "{ratios:?}");
    }

    #[test]
    fn small_pacman_converges_quickly() {
        let h = pacman(762);
        let (sys, mg) = MgPreconditioner::from_hierarchy(&h, &ModelProblem::pacman(), DEFAULT_SMOOTHS).unwrap();
        assert!(h.len() >= 2);
        let r = gmres(&sys.matrix, &sys.rhs, &mg, &GmresOptions { rtol: 1e-12, restart: 50, max_iters: 200 });
        assert!(r.converged && r.iterations <= 12, "{} levels, {} iterations", h.len(), r.iterations);
    }

    #[test]
    fn mismatched_levels_rejected() {
        let a = SparseMatrix::identity(3);
        let lv = |m: &SparseMatrix| MgLevel { matrix: m.clone(), constrained: vec![false; m.nrows()] };
        let p = SparseMatrix::identity(2);
        let r = MgPreconditioner::new(vec![lv(&a), lv(&SparseMatrix::identity(2))], vec![p], 3);
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
        assert!(matches!(MgPreconditioner::new(vec![], vec![], 3), Err(Error::SingleLevel)));
    }
}
