//! P1 finite elements for the Laplace model problems.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3};

use crate::error::{Error, Result};
use crate::geom::{self, Point};
use crate::meshgen::PACMAN_ANGLE;
use crate::solver::{SparseMatrix, Triplets};
use crate::SimplicialMesh;

const ON_BOUNDARY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Pacman,
    Fichera,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

type ScalarFn = Box<dyn Fn(&Point) -> f64 + Send + Sync>;
type Classifier = Box<dyn Fn(&[Point]) -> Option<BoundaryKind> + Send + Sync>;

/// `-Δu = 0` with Dirichlet data `u = g_D` and Neumann data `∂u/∂n = g_N`.
pub struct ModelProblem {
    domain: Domain,
    classify: Classifier,
    dirichlet: ScalarFn,
    neumann: ScalarFn,
    exact: Option<ScalarFn>,
}

impl std::fmt::Debug for ModelProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelProblem").field("domain", &self.domain).finish_non_exhaustive()
    }
}

/// Polar angle in `[0, 2pi)`, with points just below the positive x axis
/// mapped to small negative angles.
fn pacman_angle(p: &Point) -> f64 {
    let t = p[1].atan2(p[0]);
    if t < -(2.0 * PI - PACMAN_ANGLE) / 2.0 {
        t + 2.0 * PI
    } else {
        t
    }
}

/// `r^(2/3) sin(2θ/3)`, θ measured from the positive x axis.
pub fn exact_pacman(p: &Point) -> f64 {
    let r = p[0].hypot(p[1]);
    if r == 0.0 {
        return 0.0;
    }
    r.powf(2.0 / 3.0) * (2.0 * pacman_angle(p) / 3.0).sin()
}

fn on_pacman_boundary(p: &Point) -> bool {
    let r = p[0].hypot(p[1]);
    if (r - 1.0).abs() < ON_BOUNDARY_TOL || r < ON_BOUNDARY_TOL {
        return true;
    }
    let on_ray = |t: f64| {
        let (s, c) = t.sin_cos();
        (c * p[1] - s * p[0]).abs() < ON_BOUNDARY_TOL && c * p[0] + s * p[1] > 0.0
    };
    on_ray(0.0) || on_ray(PACMAN_ANGLE)
}

/// Sum of `r^(2/3) cos θ` over the xy, yz and zx planes, θ measured from the
/// first axis of each pair.
pub fn fichera_neumann(p: &Point) -> f64 {
    let term = |a: f64, b: f64| {
        let r = a.hypot(b);
        if r == 0.0 {
            0.0
        } else {
            r.powf(2.0 / 3.0) * (a / r)
        }
    };
    term(p[0], p[1]) + term(p[1], p[2]) + term(p[2], p[0])
}

fn classify_fichera(pts: &[Point]) -> Option<BoundaryKind> {
    for ax in 0..3 {
        if pts.iter().all(|p| p[ax].abs() < ON_BOUNDARY_TOL) {
            let c = geom::barycenter(pts);
            let inner = (0..3).filter(|&k| k != ax).all(|k| c[k] > 0.0);
            return Some(if inner { BoundaryKind::Dirichlet } else { BoundaryKind::Neumann });
        }
        if pts.iter().all(|p| (p[ax].abs() - 1.0).abs() < ON_BOUNDARY_TOL) && pts.iter().all(|p| p[ax] * pts[0][ax] > 0.0) {
            return Some(BoundaryKind::Neumann);
        }
    }
    None
}

impl ModelProblem {
    /// Pacman: Dirichlet data from the exact singular solution on the whole
    /// boundary.
    pub fn pacman() -> Self {
        ModelProblem {
            domain: Domain::Pacman,
            classify: Box::new(|pts| pts.iter().all(on_pacman_boundary).then_some(BoundaryKind::Dirichlet)),
            dirichlet: Box::new(exact_pacman),
            neumann: Box::new(|_| 0.0),
            exact: Some(Box::new(exact_pacman)),
        }
    }

    /// Fichera corner: `u = 0` on the three faces bounding the removed
    /// octant, `∂u/∂n = g` on the outer faces.
    pub fn fichera() -> Self {
        ModelProblem {
            domain: Domain::Fichera,
            classify: Box::new(classify_fichera),
            dirichlet: Box::new(|_| 0.0),
            neumann: Box::new(fichera_neumann),
            exact: None,
        }
    }

    /// Pure Dirichlet problem on any mesh.
    pub fn dirichlet_everywhere(g: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        ModelProblem {
            domain: Domain::Custom,
            classify: Box::new(|_| Some(BoundaryKind::Dirichlet)),
            dirichlet: Box::new(g),
            neumann: Box::new(|_| 0.0),
            exact: None,
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn classify(&self, facet: &[Point]) -> Option<BoundaryKind> {
        (self.classify)(facet)
    }

    pub fn dirichlet_value(&self, p: &Point) -> f64 {
        (self.dirichlet)(p)
    }

    pub fn neumann_value(&self, p: &Point) -> f64 {
        (self.neumann)(p)
    }

    pub fn exact(&self) -> Option<&(dyn Fn(&Point) -> f64 + Send + Sync)> {
        self.exact.as_deref()
    }
}

/// Assembled system with Dirichlet rows eliminated symmetrically.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    /// Constrained DoFs and their prescribed values, ascending.
    pub dirichlet: Vec<(usize, f64)>,
    pub dof_to_vertex: Vec<usize>,
}

impl LinearSystem {
    pub fn num_dofs(&self) -> usize {
        self.rhs.len()
    }

    pub fn constrained_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.num_dofs()];
        for &(i, _) in &self.dirichlet {
            m[i] = true;
        }
        m
    }
}

/// Gradients of the barycentric coordinates of a simplex.
fn basis_gradients(pts: &[Point]) -> Option<Vec<Point>> {
    let d = pts.len() - 1;
    let mut grads = vec![[0.0; 3]; d + 1];
    match d {
        2 => {
            let j = Matrix2::new(pts[1][0] - pts[0][0], pts[1][1] - pts[0][1], pts[2][0] - pts[0][0], pts[2][1] - pts[0][1]);
            let inv = j.try_inverse()?;
            for k in 0..2 {
                grads[k + 1] = [inv[(0, k)], inv[(1, k)], 0.0];
            }
        }
        3 => {
            let e = |k: usize| geom::sub(&pts[k], &pts[0]);
            let (a, b, c) = (e(1), e(2), e(3));
            let j = Matrix3::new(a[0], a[1], a[2], b[0], b[1], b[2], c[0], c[1], c[2]);
            let inv = j.try_inverse()?;
            for k in 0..3 {
                grads[k + 1] = [inv[(0, k)], inv[(1, k)], inv[(2, k)]];
            }
        }
        _ => return None,
    }
    let mut g0 = [0.0; 3];
    for g in &grads[1..] {
        g0 = geom::sub(&g0, g);
    }
    grads[0] = g0;
    Some(grads)
}

/// Element stiffness `|τ| ∇φ_i·∇φ_j`.
pub fn local_stiffness(pts: &[Point]) -> Option<Vec<Vec<f64>>> {
    let grads = basis_gradients(pts)?;
    let vol = geom::signed_measure(pts).abs();
    Some(grads.iter().map(|gi| grads.iter().map(|gj| vol * geom::dot(gi, gj)).collect()).collect())
}

/// Facet quadrature: midpoint in 2D, edge midpoints in 3D. Returns points
/// with the weights of each basis function, scaled by the facet measure.
fn facet_quadrature(pts: &[Point]) -> Vec<(Point, Vec<f64>, f64)> {
    if pts.len() == 2 {
        let len = geom::dist(&pts[0], &pts[1]);
        vec![(geom::barycenter(pts), vec![0.5, 0.5], len)]
    } else {
        let area = geom::triangle_area(&pts[0], &pts[1], &pts[2]);
        let mut q = Vec::with_capacity(3);
        for (a, b) in [(0, 1), (1, 2), (2, 0)] {
            let mut phi = vec![0.0; 3];
            phi[a] = 0.5;
            phi[b] = 0.5;
            q.push((geom::barycenter(&[pts[a], pts[b]]), phi, area / 3.0));
        }
        q
    }
}

/// Stiffness matrix and load vector before constraints are applied, plus
/// the Dirichlet vertices.
fn assemble_raw(mesh: &SimplicialMesh, problem: &ModelProblem) -> Result<(Triplets, Vec<f64>, Vec<bool>)> {
    let n = mesh.num_vertices();
    let mut trip = Vec::with_capacity(mesh.num_cells() * (mesh.dim() + 1).pow(2));
    for c in 0..mesh.num_cells() {
        let cell = mesh.cell(c);
        let k = local_stiffness(&mesh.cell_points(c)).ok_or(Error::DegenerateCell(c))?;
        for (a, &i) in cell.iter().enumerate() {
            for (b, &j) in cell.iter().enumerate() {
                trip.push((i, j, k[a][b]));
            }
        }
    }
    let mut rhs = vec![0.0; n];
    let mut constrained = vec![false; n];
    let mut neumann = Vec::new();
    for f in mesh.boundary_facets() {
        let pts: Vec<Point> = f.vertices.iter().map(|&v| *mesh.point(v)).collect();
        match problem.classify(&pts) {
            Some(BoundaryKind::Dirichlet) => f.vertices.iter().for_each(|&v| constrained[v] = true),
            Some(BoundaryKind::Neumann) => neumann.push((f.vertices, pts)),
            None => return Err(Error::UnclassifiedFacet(f.vertices)),
        }
    }
    for (verts, pts) in neumann {
        for (x, phi, w) in facet_quadrature(&pts) {
            let g = problem.neumann_value(&x);
            for (&v, p) in verts.iter().zip(&phi) {
                rhs[v] += w * g * p;
            }
        }
    }
    Ok((trip, rhs, constrained))
}

/// P1 stiffness system for `problem` on `mesh`; DoF `i` is vertex `i`.
pub fn assemble(mesh: &SimplicialMesh, problem: &ModelProblem) -> Result<LinearSystem> {
    let n = mesh.num_vertices();
    let (trip, mut rhs, constrained) = assemble_raw(mesh, problem)?;
    let values: Vec<f64> = (0..n).map(|v| if constrained[v] { problem.dirichlet_value(mesh.point(v)) } else { 0.0 }).collect();
    let full = SparseMatrix::from_triplets(n, n, &trip);
    let mut kept = Vec::with_capacity(trip.len());
    for i in 0..n {
        if constrained[i] {
            kept.push((i, i, 1.0));
            continue;
        }
        let (cols, vals) = full.row(i);
        for (&j, &a) in cols.iter().zip(vals) {
            if constrained[j] {
                rhs[i] -= a * values[j];
            } else {
                kept.push((i, j, a));
            }
        }
    }
    let dirichlet: Vec<(usize, f64)> = (0..n).filter(|&v| constrained[v]).map(|v| (v, values[v])).collect();
    for &(v, g) in &dirichlet {
        rhs[v] = g;
    }
    Ok(LinearSystem { matrix: SparseMatrix::from_triplets(n, n, &kept), rhs, dirichlet, dof_to_vertex: (0..n).collect() })
}

/// Vertex interpolant of `f`.
pub fn interpolate(mesh: &SimplicialMesh, f: impl Fn(&Point) -> f64) -> Vec<f64> {
    mesh.coords().iter().map(f).collect()
}

/// Six-point degree-4 rule on the reference triangle (barycentric points,
/// weights summing to 1).
const TRI_DEG4: [([f64; 3], f64); 6] = [
    ([0.445948490915965, 0.445948490915965, 0.108103018168070], 0.223381589678011),
    ([0.445948490915965, 0.108103018168070, 0.445948490915965], 0.223381589678011),
    ([0.108103018168070, 0.445948490915965, 0.445948490915965], 0.223381589678011),
    ([0.091576213509771, 0.091576213509771, 0.816847572980459], 0.109951743655322),
    ([0.091576213509771, 0.816847572980459, 0.091576213509771], 0.109951743655322),
    ([0.816847572980459, 0.091576213509771, 0.091576213509771], 0.109951743655322),
];

/// `‖u_h - u‖_{L2}` on a triangle mesh.
pub fn l2_error(mesh: &SimplicialMesh, solution: &[f64], exact: impl Fn(&Point) -> f64) -> Result<f64> {
    if mesh.dim() != 2 {
        return Err(Error::BadDimension(mesh.dim()));
    }
    if solution.len() != mesh.num_vertices() {
        return Err(Error::DimensionMismatch { expected: mesh.num_vertices(), got: solution.len() });
    }
    let mut sum = 0.0;
    for c in 0..mesh.num_cells() {
        let cell = mesh.cell(c);
        let pts = mesh.cell_points(c);
        let area = mesh.measure(c);
        for (lam, w) in TRI_DEG4 {
            let mut x = [0.0; 3];
            let mut uh = 0.0;
            for k in 0..3 {
                x = geom::add(&x, &geom::scale(&pts[k], lam[k]));
                uh += lam[k] * solution[cell[k]];
            }
            let e = uh - exact(&x);
            sum += area * w * e * e;
        }
    }
    Ok(sum.sqrt())
}
