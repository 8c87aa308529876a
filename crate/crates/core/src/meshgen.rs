//! Model domains with a priori grading toward the reentrant feature.
//!
//! * Pacman: the unit disk with the wedge `theta in (9*pi/5, 2*pi)` removed.
//!   Vertices sit on concentric rings whose radii follow the grading law,
//!   then a constrained Delaunay triangulation is taken.
//! * Fichera: `[-1, 1]^3` minus the octant `(0, 1]^3`, meshed as a tensor
//!   grid whose planes are stretched toward the coordinate planes, each box
//!   split into six tetrahedra.
//!
//! Both generators are deterministic.

use std::f64::consts::PI;

use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};

use crate::error::{Error, Result};
use crate::geom::{self, Point};
use crate::mesh::{detect_features, SimplicialMesh, DEFAULT_CURVATURE_THRESHOLD};

/// Interior angle of the Pacman domain at its reentrant corner.
pub const PACMAN_ANGLE: f64 = 9.0 * PI / 5.0;
/// Interior dihedral angle along the Fichera reentrant edges.
pub const FICHERA_EDGE_ANGLE: f64 = 3.0 * PI / 2.0;

/// Grading law `h(r) ~ scale * r^(1 - mu)`, capped at `h_max`.
///
/// `c_a` and `c_b` bound the realised cell size relative to the generator's
/// length scale: `c_a * s * r^(1-mu) <= h <= c_b * s * max(r, h_min)^(1-mu)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradingSpec {
    pub mu: f64,
    pub h_max: f64,
    pub c_a: f64,
    pub c_b: f64,
}

impl GradingSpec {
    pub fn graded(mu: f64) -> Self {
        GradingSpec { mu, h_max: f64::INFINITY, c_a: 0.25, c_b: 4.0 }
    }

    pub fn uniform() -> Self {
        Self::graded(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(Error::InvalidGrading(format!("mu = {} outside (0, 1]", self.mu)));
        }
        if !(self.c_a > 0.0) || !self.c_b.is_finite() || self.c_b < self.c_a {
            return Err(Error::InvalidGrading(format!("envelope constants c_a = {}, c_b = {}", self.c_a, self.c_b)));
        }
        if !(self.h_max > 0.0) {
            return Err(Error::InvalidGrading(format!("h_max = {}", self.h_max)));
        }
        Ok(())
    }
}

/// Smallest admissible grading exponent for a reentrant angle, `pi / theta_r`.
pub fn mu_for_angle(theta_r: f64) -> Result<f64> {
    if !(theta_r >= PI) {
        return Err(Error::NotReentrant(theta_r));
    }
    Ok(PI / theta_r)
}

/// Ring radii `r_k = (k/K)^(1/mu)`, so that ring spacing follows
/// `r^(1-mu)`; with `h_max` the spacing is additionally capped.
fn ring_radii(rings: usize, g: &GradingSpec) -> Vec<f64> {
    let mut r: Vec<f64> = (0..=rings).map(|k| (k as f64 / rings as f64).powf(1.0 / g.mu)).collect();
    if g.h_max.is_finite() {
        // Insert extra rings wherever the graded spacing exceeds h_max.
        let mut out = vec![0.0];
        for w in r.windows(2) {
            let n = ((w[1] - w[0]) / g.h_max).ceil().max(1.0) as usize;
            for i in 1..=n {
                out.push(w[0] + (w[1] - w[0]) * i as f64 / n as f64);
            }
        }
        r = out;
    }
    r
}

/// Points on ring `k`: arc spacing no longer than the ring's radial spacing
/// divided by `sqrt(3)/2`, so cells are close to equilateral.
fn ring_counts(radii: &[f64]) -> Vec<usize> {
    let mut n = vec![0];
    for k in 1..radii.len() {
        let dr = radii[k] - radii[k - 1];
        let arc = dr * 1.6;
        n.push(((PACMAN_ANGLE * radii[k] / arc).round() as usize).max(3));
    }
    n
}

fn pacman_vertex_count(radii: &[f64]) -> usize {
    1 + ring_counts(radii).iter().skip(1).map(|n| n + 1).sum::<usize>()
}

/// Number of rings whose vertex count is closest to `target`.
fn pacman_rings(g: &GradingSpec, target: usize) -> usize {
    let mut best = (usize::MAX, 1);
    for k in 1..=4096 {
        let c = pacman_vertex_count(&ring_radii(k, g));
        let err = c.abs_diff(target);
        if err < best.0 {
            best = (err, k);
        }
        if c > 2 * target {
            break;
        }
    }
    best.1
}

/// Graded Pacman mesh with roughly `target_vertices` vertices.
pub fn generate_pacman(grading: &GradingSpec, target_vertices: usize) -> Result<SimplicialMesh> {
    grading.validate()?;
    if target_vertices < 50 {
        return Err(Error::InfeasibleTarget(format!("{target_vertices} vertices cannot resolve the Pacman domain")));
    }
    let rings = pacman_rings(grading, target_vertices);
    pacman_with_rings(grading, rings)
}

/// Pacman mesh with an explicit number of graded rings.
pub fn pacman_with_rings(grading: &GradingSpec, rings: usize) -> Result<SimplicialMesh> {
    grading.validate()?;
    if rings < 2 {
        return Err(Error::InfeasibleTarget(format!("{rings} rings")));
    }
    let radii = ring_radii(rings, grading);
    let counts = ring_counts(&radii);
    let mut pts: Vec<Point2<f64>> = vec![Point2::new(0.0, 0.0)];
    let mut first = vec![0usize];
    let mut last = vec![0usize];
    for k in 1..radii.len() {
        let r = radii[k];
        first.push(pts.len());
        for j in 0..=counts[k] {
            let (x, y) = if j == 0 {
                (r, 0.0)
            } else {
                let t = PACMAN_ANGLE * j as f64 / counts[k] as f64;
                (r * t.cos(), r * t.sin())
            };
            pts.push(Point2::new(x, y));
        }
        last.push(pts.len() - 1);
    }
    let mut edges = Vec::new();
    for k in 1..radii.len() {
        edges.push([first[k - 1], first[k]]);
        edges.push([last[k - 1], last[k]]);
    }
    let cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::bulk_load_cdt(pts.clone(), edges)
        .map_err(|e| Error::InfeasibleTarget(format!("triangulation failed: {e:?}")))?;
    if cdt.num_vertices() != pts.len() {
        return Err(Error::InfeasibleTarget("duplicate ring vertices".into()));
    }
    let coords: Vec<Point> = pts.iter().map(|p| [p.x, p.y, 0.0]).collect();
    let mut cells = Vec::new();
    for f in cdt.inner_faces() {
        let vs = f.vertices().map(|v| v.fix().index());
        let c = geom::barycenter(&[coords[vs[0]], coords[vs[1]], coords[vs[2]]]);
        let mut theta = c[1].atan2(c[0]);
        if theta < 0.0 {
            theta += 2.0 * PI;
        }
        if theta < PACMAN_ANGLE {
            cells.push(vs.to_vec());
        }
    }
    cells.sort();
    finish(2, coords, cells)
}

fn finish(dim: usize, coords: Vec<Point>, cells: Vec<Vec<usize>>) -> Result<SimplicialMesh> {
    let mut mesh = SimplicialMesh::new(dim, coords, cells)?;
    let features = detect_features(&mesh, DEFAULT_CURVATURE_THRESHOLD)?;
    mesh.set_markers(features.markers)?;
    Ok(mesh)
}

/// Plane positions on `[0, 1]` for one half-axis, stretched toward 0.
fn fichera_planes(g: &GradingSpec, cells_per_half: usize) -> Vec<f64> {
    let m = cells_per_half;
    let half: Vec<f64> = (0..=m).map(|j| (j as f64 / m as f64).powf(1.0 / g.mu)).collect();
    let mut planes: Vec<f64> = half.iter().rev().map(|t| -t).collect();
    planes.extend_from_slice(&half[1..]);
    planes
}

pub fn fichera_vertex_count(cells_per_half: usize) -> usize {
    let n = 2 * cells_per_half + 1;
    n * n * n - cells_per_half.pow(3)
}

/// Graded Fichera mesh with roughly `target_vertices` vertices.
pub fn generate_fichera(grading: &GradingSpec, target_vertices: usize) -> Result<SimplicialMesh> {
    grading.validate()?;
    if target_vertices < 50 {
        return Err(Error::InfeasibleTarget(format!("{target_vertices} vertices cannot resolve the Fichera domain")));
    }
    let m = (1..=256).min_by_key(|&m| fichera_vertex_count(m).abs_diff(target_vertices)).unwrap();
    fichera_with_cells(grading, m)
}

/// Fichera mesh with `cells_per_half` boxes per axis in each octant.
pub fn fichera_with_cells(grading: &GradingSpec, cells_per_half: usize) -> Result<SimplicialMesh> {
    grading.validate()?;
    if cells_per_half == 0 {
        return Err(Error::InfeasibleTarget("zero cells per octant".into()));
    }
    let planes = fichera_planes(grading, cells_per_half);
    let n = planes.len();
    let m = cells_per_half;
    let removed = |i: usize, j: usize, k: usize| i > m && j > m && k > m;
    let mut index = vec![usize::MAX; n * n * n];
    let mut coords = Vec::new();
    let id = |i: usize, j: usize, k: usize| (k * n + j) * n + i;
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                if !removed(i, j, k) {
                    index[id(i, j, k)] = coords.len();
                    coords.push([planes[i], planes[j], planes[k]]);
                }
            }
        }
    }
    // Kuhn split along the main diagonal; conforming because every box uses
    // the same diagonal direction.
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut cells = Vec::new();
    for k in 0..n - 1 {
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                if i >= m && j >= m && k >= m {
                    continue;
                }
                for p in PERMS {
                    let mut cur = [i, j, k];
                    let mut tet = vec![index[id(i, j, k)]];
                    for ax in p {
                        cur[ax] += 1;
                        tet.push(index[id(cur[0], cur[1], cur[2])]);
                    }
                    let pts: Vec<Point> = tet.iter().map(|&v| coords[v]).collect();
                    if geom::signed_measure(&pts) < 0.0 {
                        tet.swap(0, 1);
                    }
                    cells.push(tet);
                }
            }
        }
    }
    finish(3, coords, cells)
}

/// Distance from `p` to the nearest Fichera reentrant edge (the three
/// half-axes bounding the removed octant).
pub fn fichera_edge_distance(p: &Point) -> f64 {
    let mut best = f64::INFINITY;
    for axis in 0..3 {
        let t = p[axis].clamp(0.0, 1.0);
        let mut q = [0.0; 3];
        q[axis] = t;
        best = best.min(geom::dist(p, &q));
    }
    best
}
