//! Nodal P1 interpolation between adjacent hierarchy levels, built by
//! tandem breadth-first traversal of the fine and coarse meshes.

use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::geom::{self, Aabb, Point};
use crate::mesh::SimplicialMesh;
use crate::solver::SparseMatrix;

/// Barycentric slack for containment.
pub const CONTAIN_TOL: f64 = -1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocationKind {
    /// Fine vertex coincides with a coarse vertex.
    Shared,
    Inside,
    Projected,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RowLocation {
    /// Coarse cell used for the weights (for shared rows, any incident cell).
    pub cell: usize,
    pub kind: LocationKind,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Location {
    pub cell: usize,
    pub inside: bool,
    pub steps: usize,
}

/// Traversal instrumentation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LocationStats {
    /// Cells popped per point location, in query order.
    pub steps: Vec<usize>,
    pub projected: usize,
    pub fine_cells: usize,
}

impl LocationStats {
    pub fn total_pops(&self) -> usize {
        self.steps.iter().sum()
    }

    pub fn mean_steps(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.total_pops() as f64 / self.steps.len() as f64
    }

    pub fn percentile_steps(&self, q: f64) -> usize {
        if self.steps.is_empty() {
            return 0;
        }
        let mut s = self.steps.clone();
        s.sort_unstable();
        let k = ((q * s.len() as f64).ceil() as usize).clamp(1, s.len()) - 1;
        s[k]
    }
}

/// Interpolation from a coarse P1 space onto a fine one.
#[derive(Clone, Debug, PartialEq)]
pub struct ProlongationOperator {
    matrix: SparseMatrix,
    rows: Vec<RowLocation>,
}

impl ProlongationOperator {
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn locations(&self) -> &[RowLocation] {
        &self.rows
    }

    pub fn prolongate(&self, coarse: &[f64]) -> Result<Vec<f64>> {
        self.matrix.try_matvec(coarse)
    }

    pub fn restrict(&self, fine: &[f64]) -> Result<Vec<f64>> {
        if fine.len() != self.nrows() {
            return Err(Error::DimensionMismatch { expected: self.nrows(), got: fine.len() });
        }
        Ok(self.matrix.matvec_transpose(fine))
    }

    /// `rows cols nnz` header followed by `row col value` lines.
    pub fn dump(&self) -> String {
        crate::io::matrix_to_string(self.nrows(), self.ncols(), &self.matrix.triplets())
    }
}

fn contains(pts: &[Point], x: &Point) -> Option<[f64; 4]> {
    let b = geom::barycentric(pts, x);
    b[..pts.len()].iter().all(|&l| l >= CONTAIN_TOL).then_some(b)
}

/// Weights of the coarse P1 basis at the point of `pts` closest to `x`.
fn projected_weights(pts: &[Point], x: &Point) -> [f64; 4] {
    let q = geom::closest_point_on_simplex(pts, x);
    let mut b = geom::barycentric(pts, &q);
    let n = pts.len();
    let mut s = 0.0;
    for w in b[..n].iter_mut() {
        *w = w.max(0.0);
        s += *w;
    }
    for w in b[..n].iter_mut() {
        *w /= s;
    }
    b
}

/// Per-cell geometry cached for repeated queries.
pub struct CellCache {
    pub boxes: Vec<Aabb>,
    pub h: Vec<f64>,
    pub centers: Vec<Point>,
}

impl CellCache {
    pub fn new(mesh: &SimplicialMesh) -> Self {
        let mut boxes = Vec::with_capacity(mesh.num_cells());
        let mut h = Vec::with_capacity(mesh.num_cells());
        let mut centers = Vec::with_capacity(mesh.num_cells());
        for c in 0..mesh.num_cells() {
            let p = mesh.cell_points(c);
            boxes.push(Aabb::of(&p));
            h.push(geom::longest_edge(&p));
            centers.push(geom::barycenter(&p));
        }
        CellCache { boxes, h, centers }
    }
}

/// Breadth-first point location starting at `start`. Cells are explored
/// while their box reaches the ball of radius `radius` about `x`. Without a containing cell the search widens to find
/// the nearest cell, and the result is marked as not inside.
pub fn locate_by_bfs(
    mesh: &SimplicialMesh,
    cache: &CellCache,
    start: usize,
    x: &Point,
    radius: f64,
    visited: &mut HashMap<usize, ()>,
) -> Location {
    visited.clear();
    let mut queue = VecDeque::from([start]);
    visited.insert(start, ());
    let mut steps = 0;
    let mut seen = Vec::new();
    while let Some(c) = queue.pop_front() {
        steps += 1;
        seen.push(c);
        if contains(&mesh.cell_points(c), x).is_some() {
            return Location { cell: c, inside: true, steps };
        }
        // Nearer neighbours are queued first so that the common one-cell-over
        // case resolves after a pop or two.
        let mut next: Vec<(f64, usize)> = mesh
            .cell_neighbors(c)
            .iter()
            .filter(|&&d| !visited.contains_key(&d) && cache.boxes[d].distance_to(x) <= radius)
            .map(|&d| (geom::dist(&cache.centers[d], x), d))
            .collect();
        next.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (_, d) in next {
            visited.insert(d, ());
            queue.push_back(d);
        }
    }
    // Nearest-cell mode: keep expanding through cells that could still be
    // closer than the best found so far.
    let dist = |c: usize| geom::distance_to_simplex(&mesh.cell_points(c), x);
    let mut best = (f64::INFINITY, usize::MAX);
    for &c in &seen {
        let d = dist(c);
        if d < best.0 || (d == best.0 && c < best.1) {
            best = (d, c);
        }
    }
    let mut frontier: VecDeque<usize> = seen.into();
    let mut expanded: HashMap<usize, ()> = HashMap::new();
    while let Some(c) = frontier.pop_front() {
        if expanded.insert(c, ()).is_some() {
            continue;
        }
        for &d in mesh.cell_neighbors(c) {
            if visited.contains_key(&d) {
                continue;
            }
            if cache.boxes[d].distance_to(x) <= best.0 + 1e-12 * cache.h[d] {
                visited.insert(d, ());
                steps += 1;
                let dd = dist(d);
                if contains(&mesh.cell_points(d), x).is_some() {
                    return Location { cell: d, inside: true, steps };
                }
                if dd < best.0 || (dd == best.0 && d < best.1) {
                    best = (dd, d);
                }
                frontier.push_back(d);
            }
        }
    }
    Location { cell: best.1, inside: false, steps }
}

fn key(p: &Point) -> [u64; 3] {
    [p[0].to_bits(), p[1].to_bits(), p[2].to_bits()]
}

/// For each fine vertex, the coarse vertex at the same coordinates.
pub fn shared_vertices(fine: &SimplicialMesh, coarse: &SimplicialMesh) -> Vec<Option<usize>> {
    let map: HashMap<[u64; 3], usize> = coarse.coords().iter().enumerate().map(|(i, p)| (key(p), i)).collect();
    fine.coords().iter().map(|p| map.get(&key(p)).copied()).collect()
}

struct RowBuilder {
    triplets: Vec<(usize, usize, f64)>,
    rows: Vec<Option<RowLocation>>,
}

impl RowBuilder {
    fn set(&mut self, coarse: &SimplicialMesh, v: usize, x: &Point, cell: usize, inside: bool) {
        let pts = coarse.cell_points(cell);
        let w = if inside { geom::barycentric(&pts, x) } else { projected_weights(&pts, x) };
        for (k, &cv) in coarse.cell(cell).iter().enumerate() {
            if w[k] != 0.0 {
                self.triplets.push((v, cv, w[k]));
            }
        }
        let kind = if inside { LocationKind::Inside } else { LocationKind::Projected };
        self.rows[v] = Some(RowLocation { cell, kind });
    }

    fn finish(self, nf: usize, nc: usize) -> ProlongationOperator {
        ProlongationOperator {
            matrix: SparseMatrix::from_triplets(nf, nc, &self.triplets),
            rows: self.rows.into_iter().map(|r| r.expect("every row located")).collect(),
        }
    }
}

fn shared_rows(fine: &SimplicialMesh, coarse: &SimplicialMesh, b: &mut RowBuilder) -> Vec<Option<usize>> {
    let shared = shared_vertices(fine, coarse);
    for (v, s) in shared.iter().enumerate() {
        if let Some(cv) = *s {
            b.triplets.push((v, cv, 1.0));
            b.rows[v] = Some(RowLocation { cell: coarse.vertex_cells(cv)[0], kind: LocationKind::Shared });
        }
    }
    shared
}

/// Builds the prolongation by traversal. The outer loop locates fine cell
/// barycentres, seeded from cells at shared vertices and then from the
/// results of neighbouring fine cells; the inner loop locates each fine
/// vertex starting from its cell's coarse cell.
pub fn build_prolongation(fine: &SimplicialMesh, coarse: &SimplicialMesh) -> Result<(ProlongationOperator, LocationStats)> {
    if fine.dim() != coarse.dim() {
        return Err(Error::DimensionMismatch { expected: fine.dim(), got: coarse.dim() });
    }
    let nf = fine.num_vertices();
    let mut b = RowBuilder { triplets: Vec::new(), rows: vec![None; nf] };
    let shared = shared_rows(fine, coarse, &mut b);
    let cache = CellCache::new(coarse);
    let fine_h: Vec<f64> = (0..fine.num_cells()).map(|c| geom::longest_edge(&fine.cell_points(c))).collect();
    let mut stats = LocationStats { fine_cells: fine.num_cells(), ..Default::default() };

    let mut hint: Vec<Option<usize>> = vec![None; fine.num_cells()];
    let mut loc: Vec<Option<usize>> = vec![None; fine.num_cells()];
    let mut origin: Vec<usize> = (0..fine.num_cells()).collect();
    let mut queue = VecDeque::new();
    for (v, s) in shared.iter().enumerate() {
        if let Some(cv) = *s {
            let seed = coarse.vertex_cells(cv)[0];
            for &c in fine.vertex_cells(v) {
                if hint[c].is_none() {
                    hint[c] = Some(seed);
                    origin[c] = c;
                    queue.push_back(c);
                }
            }
        }
    }
    if queue.is_empty() && fine.num_cells() > 0 {
        hint[0] = Some(0);
        queue.push_back(0);
    }
    let mut visited = HashMap::new();
    let mut done = vec![false; nf];
    while let Some(c) = queue.pop_front() {
        let start = hint[c].expect("queued cells carry a hint");
        let x = fine.barycenter(c);
        let r = fine_h[c] + fine_h[origin[c]];
        let l = locate_by_bfs(coarse, &cache, start, &x, r, &mut visited);
        stats.steps.push(l.steps);
        loc[c] = Some(l.cell);
        for &v in fine.cell(c) {
            if done[v] {
                continue;
            }
            done[v] = true;
            if shared[v].is_some() {
                continue;
            }
            let p = *fine.point(v);
            let rv = fine_h[c];
            let lv = locate_by_bfs(coarse, &cache, l.cell, &p, rv, &mut visited);
            stats.steps.push(lv.steps);
            if !lv.inside {
                stats.projected += 1;
            }
            b.set(coarse, v, &p, lv.cell, lv.inside);
        }
        for &d in fine.cell_neighbors(c) {
            if hint[d].is_none() {
                hint[d] = Some(l.cell);
                origin[d] = c;
                queue.push_back(d);
            }
        }
    }
    let missing = loc.iter().filter(|l| l.is_none()).count();
    if missing > 0 || b.rows.iter().any(Option::is_none) {
        return Err(Error::TraversalIncomplete(missing));
    }
    Ok((b.finish(nf, coarse.num_vertices()), stats))
}

/// Reference construction by exhaustive point location.
pub fn build_prolongation_brute_force(fine: &SimplicialMesh, coarse: &SimplicialMesh) -> ProlongationOperator {
    let nf = fine.num_vertices();
    let mut b = RowBuilder { triplets: Vec::new(), rows: vec![None; nf] };
    let shared = shared_rows(fine, coarse, &mut b);
    for v in 0..nf {
        if shared[v].is_some() {
            continue;
        }
        let p = *fine.point(v);
        let inside = (0..coarse.num_cells()).find(|&c| contains(&coarse.cell_points(c), &p).is_some());
        match inside {
            Some(c) => b.set(coarse, v, &p, c, true),
            None => {
                let mut best = (f64::INFINITY, 0);
                for c in 0..coarse.num_cells() {
                    let d = geom::distance_to_simplex(&coarse.cell_points(c), &p);
                    if d < best.0 {
                        best = (d, c);
                    }
                }
                b.set(coarse, v, &p, best.1, false);
            }
        }
    }
    b.finish(nf, coarse.num_vertices())
}

/// Largest entrywise difference between two operators of equal shape.
pub fn max_entry_difference(a: &SparseMatrix, b: &SparseMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, j, v) in a.triplets() {
        worst = worst.max((v - b.get(i, j)).abs());
    }
    for (i, j, v) in b.triplets() {
        worst = worst.max((v - a.get(i, j)).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{build_hierarchy, HierarchyConfig};
    use crate::mesh::tests::unit_square_grid;
    use crate::meshgen::{generate_pacman, GradingSpec};

    fn pacman_hierarchy(n: usize, min: usize) -> crate::hierarchy::MeshHierarchy {
        let m = generate_pacman(&GradingSpec::graded(5.0 / 9.0), n).unwrap();
        let mut cfg = HierarchyConfig::for_dim(2);
        cfg.min_vertices = min;
        cfg.metrics = false;
        build_hierarchy(&m, &cfg).unwrap()
    }

    #[test]
    fn identical_meshes_give_identity() {
        let m = unit_square_grid(5);
        let (p, _) = build_prolongation(&m, &m).unwrap();
        assert_eq!(p.matrix(), &SparseMatrix::identity(m.num_vertices()));
    }

    #[test]
    fn barycentre_row() {
        let coarse =
            SimplicialMesh::new(2, vec![[0.0, 0.0, 0.0], [3.0, 0.0, 0.0], [0.0, 3.0, 0.0]], vec![vec![0, 1, 2]]).unwrap();
        let fine = SimplicialMesh::new(
            2,
            vec![[0.0, 0.0, 0.0], [3.0, 0.0, 0.0], [0.0, 3.0, 0.0], [1.0, 1.0, 0.0]],
            vec![vec![0, 1, 3], vec![1, 2, 3], vec![2, 0, 3]],
        )
        .unwrap();
        let (p, _) = build_prolongation(&fine, &coarse).unwrap();
        for j in 0..3 {
            assert!((p.matrix().get(3, j) - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn start_cell_barycentre_takes_one_step() {
        let m = unit_square_grid(4);
        let cache = CellCache::new(&m);
        let mut vis = HashMap::new();
        let l = locate_by_bfs(&m, &cache, 11, &m.barycenter(11), 1.0, &mut vis);
        assert_eq!(l, Location { cell: 11, inside: true, steps: 1 });
        for &n in m.cell_neighbors(11) {
            let l = locate_by_bfs(&m, &cache, 11, &m.barycenter(n), 2.0, &mut vis);
            assert_eq!(l.cell, n);
            assert!(l.steps <= 1 + m.cell_neighbors(11).len());
        }
    }

    #[test]
    fn traversal_matches_brute_force() {
        let h = pacman_hierarchy(800, 30);
        for k in 1..h.len() {
            let (f, c) = (h.mesh(k - 1), h.mesh(k));
            let (p, _) = build_prolongation(f, c).unwrap();
            let q = build_prolongation_brute_force(f, c);
            assert!(max_entry_difference(p.matrix(), q.matrix()) < 1e-12, "level {k}");
        }
    }

    #[test]
    fn traversal_steps_stay_local() {
        let h = pacman_hierarchy(20000, 200);
        for k in 1..h.len() {
            let (_, stats) = build_prolongation(h.mesh(k - 1), h.mesh(k)).unwrap();
            assert!(stats.mean_steps() <= 3.0, "level {k}: mean {}", stats.mean_steps());
            assert!(stats.percentile_steps(0.99) <= 12, "level {k}");
            assert!(stats.total_pops() <= 6 * (h.mesh(k - 1).num_cells() + h.mesh(k - 1).num_vertices()));
        }
    }

    #[test]
    fn unity_and_linear_reproduction() {
        let h = pacman_hierarchy(2000, 100);
        let f = |x: &Point| 0.3 * x[0] - 1.7 * x[1] + 0.25;
        for k in 1..h.len() {
            let (fm, cm) = (h.mesh(k - 1), h.mesh(k));
            let (p, _) = build_prolongation(fm, cm).unwrap();
            let ones = p.prolongate(&vec![1.0; cm.num_vertices()]).unwrap();
            let lin = p.prolongate(&cm.coords().iter().map(f).collect::<Vec<_>>()).unwrap();
            for (v, r) in p.locations().iter().enumerate() {
                assert!((ones[v] - 1.0).abs() < 1e-10);
                if r.kind != LocationKind::Projected {
                    assert!((lin[v] - f(fm.point(v))).abs() < 1e-10);
                }
            }
            for j in [0, cm.num_vertices() / 2, cm.num_vertices() - 1] {
                let mut e = vec![0.0; cm.num_vertices()];
                e[j] = 1.0;
                let back = p.restrict(&p.prolongate(&e).unwrap()).unwrap();
                assert!(back[j] > 0.0);
            }
        }
    }

    #[test]
    fn arc_vertex_is_projected_onto_coarse_boundary() {
        let h = pacman_hierarchy(1500, 100);
        let (f, c) = (h.mesh(0), h.mesh(1));
        let (p, stats) = build_prolongation(f, c).unwrap();
        assert!(stats.projected > 0);
        let bfacets = c.boundary_facets();
        for (v, r) in p.locations().iter().enumerate() {
            if r.kind != LocationKind::Projected {
                continue;
            }
            assert!((geom::norm(f.point(v)) - 1.0).abs() < 1e-9);
            let pts = c.cell_points(r.cell);
            let q = geom::closest_point_on_simplex(&pts, f.point(v));
            let on_facet = bfacets.iter().any(|bf| {
                let a = c.point(bf.vertices[0]);
                let b = c.point(bf.vertices[1]);
                geom::dist(&geom::closest_point_on_segment(&q, a, b), &q) < 1e-12
            });
            assert!(on_facet);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let m = unit_square_grid(3);
        let (p, _) = build_prolongation(&m, &m).unwrap();
        assert!(p.prolongate(&[1.0]).is_err());
        assert!(p.restrict(&[1.0]).is_err());
    }
}
