//! Vertex removal: Delaunay star retriangulation in 2D and
//! quality-conserving edge contraction in 3D (and as a 2D fallback).

use std::collections::{HashMap, VecDeque};

use crate::error::Result;
use crate::geom::{self, Point};
use crate::mesh::{outward_facets, BoundaryMarker, SimplicialMesh};

/// Default aspect-ratio cap for 3D contraction.
pub const DEFAULT_C_AR_3D: f64 = 60.0;
/// Cap applied to 2D fallback contractions.
pub const DEFAULT_C_AR_2D: f64 = 20.0;

const INCIRCLE_EPS: f64 = 1e-10;
const VOLUME_RTOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RemeshConfig {
    pub c_ar: f64,
    /// Attempt Delaunay star retriangulation before contraction (2D only).
    pub delaunay_2d: bool,
    /// Re-attempt retained vertices when their link changes.
    pub retry: bool,
}

impl RemeshConfig {
    pub fn for_dim(dim: usize) -> Self {
        RemeshConfig {
            c_ar: if dim == 2 { DEFAULT_C_AR_2D } else { DEFAULT_C_AR_3D },
            delaunay_2d: true,
            retry: true,
        }
    }

    pub fn with_c_ar(mut self, c_ar: f64) -> Self {
        self.c_ar = c_ar;
        self
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RemeshStats {
    pub requested: usize,
    pub removed: usize,
    pub retained: usize,
    pub retries: usize,
    pub delaunay_removals: usize,
    pub contractions: usize,
    /// Geometric predicate evaluations, a proxy for removal cost.
    pub predicate_evals: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Removal {
    Retriangulated,
    Contracted(usize),
    Retained,
}

/// Mutable simplicial mesh with tombstoned cells, used during removal.
#[derive(Clone, Debug)]
pub struct WorkingMesh {
    dim: usize,
    coords: Vec<Point>,
    markers: Vec<BoundaryMarker>,
    cells: Vec<[usize; 4]>,
    alive: Vec<bool>,
    vertex_cells: Vec<Vec<usize>>,
    vertex_alive: Vec<bool>,
    predicate_evals: usize,
}

impl WorkingMesh {
    pub fn new(mesh: &SimplicialMesh) -> Self {
        let n = mesh.num_vertices();
        let cells: Vec<[usize; 4]> = mesh.packed_cells().to_vec();
        let mut vertex_cells = vec![Vec::new(); n];
        for (c, cell) in cells.iter().enumerate() {
            for &v in &cell[..=mesh.dim()] {
                vertex_cells[v].push(c);
            }
        }
        WorkingMesh {
            dim: mesh.dim(),
            coords: mesh.coords().to_vec(),
            markers: mesh.markers().to_vec(),
            alive: vec![true; cells.len()],
            cells,
            vertex_cells,
            vertex_alive: vec![true; n],
            predicate_evals: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_alive(&self, v: usize) -> bool {
        self.vertex_alive[v]
    }

    pub fn star(&self, v: usize) -> &[usize] {
        &self.vertex_cells[v]
    }

    fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c][..=self.dim]
    }

    fn points(&self, cell: &[usize]) -> Vec<Point> {
        cell.iter().map(|&v| self.coords[v]).collect()
    }

    pub fn alive_cells(&self) -> impl Iterator<Item = &[usize]> + '_ {
        (0..self.cells.len()).filter(|&c| self.alive[c]).map(move |c| self.cell(c))
    }

    /// Vertices sharing a cell with `v`, ascending.
    pub fn link_vertices(&self, v: usize) -> Vec<usize> {
        let mut l: Vec<usize> =
            self.vertex_cells[v].iter().flat_map(|&c| self.cell(c).iter().copied()).filter(|&u| u != v).collect();
        l.sort_unstable();
        l.dedup();
        l
    }

    /// Facets in the star of `v` that contain `v` and bound the domain.
    fn boundary_facets_at(&self, v: usize) -> Vec<Vec<usize>> {
        let mut count: HashMap<Vec<usize>, usize> = HashMap::new();
        for &c in &self.vertex_cells[v] {
            let cell = self.cell(c);
            for f in outward_facets(self.dim) {
                let mut fv: Vec<usize> = f.iter().map(|&k| cell[k]).collect();
                if !fv.contains(&v) {
                    continue;
                }
                fv.sort_unstable();
                *count.entry(fv).or_insert(0) += 1;
            }
        }
        let mut out: Vec<Vec<usize>> = count.into_iter().filter(|&(_, n)| n == 1).map(|(f, _)| f).collect();
        out.sort_unstable();
        out
    }

    fn kill_cell(&mut self, c: usize) {
        self.alive[c] = false;
        for k in 0..=self.dim {
            let v = self.cells[c][k];
            let list = &mut self.vertex_cells[v];
            if let Some(p) = list.iter().position(|&x| x == c) {
                list.swap_remove(p);
            }
        }
    }

    fn add_cell(&mut self, verts: &[usize]) {
        let mut p = [usize::MAX; 4];
        p[..verts.len()].copy_from_slice(verts);
        let c = self.cells.len();
        self.cells.push(p);
        self.alive.push(true);
        for &v in verts {
            self.vertex_cells[v].push(c);
        }
    }

    fn replace_star(&mut self, v: usize, new_cells: &[Vec<usize>]) {
        let star = self.vertex_cells[v].clone();
        for c in star {
            self.kill_cell(c);
        }
        for nc in new_cells {
            self.add_cell(nc);
        }
        self.vertex_alive[v] = false;
    }

    fn scale(&self, v: usize) -> f64 {
        self.link_vertices(v).iter().map(|&u| geom::dist(&self.coords[u], &self.coords[v])).fold(0.0, f64::max)
    }

    /// Ordered link polygon of a 2D vertex and whether it is closed.
    fn link_polygon(&self, v: usize) -> Option<(Vec<usize>, bool)> {
        let mut next: HashMap<usize, usize> = HashMap::new();
        let mut has_prev: HashMap<usize, bool> = HashMap::new();
        for &c in &self.vertex_cells[v] {
            let cell = self.cell(c);
            let k = cell.iter().position(|&x| x == v)?;
            let a = cell[(k + 1) % 3];
            let b = cell[(k + 2) % 3];
            if next.insert(a, b).is_some() {
                return None;
            }
            has_prev.insert(b, true);
            has_prev.entry(a).or_insert(false);
        }
        let starts: Vec<usize> = has_prev.iter().filter(|(_, &p)| !p).map(|(&u, _)| u).collect();
        let (start, closed) = match starts.len() {
            0 => (*next.keys().min()?, true),
            1 => (starts[0], false),
            _ => return None,
        };
        let mut poly = vec![start];
        let mut cur = start;
        while let Some(&n) = next.get(&cur) {
            if n == start {
                break;
            }
            if poly.len() > next.len() + 1 {
                return None;
            }
            poly.push(n);
            cur = n;
        }
        let expected = if closed { next.len() } else { next.len() + 1 };
        (poly.len() == expected).then_some((poly, closed))
    }

    /// Delaunay retriangulation of the polygon left by deleting `v` (2D).
    /// For a boundary vertex the half-star is closed by the chord between its
    /// two boundary neighbours.
    fn delaunay_star(&mut self, v: usize) -> Option<Vec<Vec<usize>>> {
        let (mut poly, _closed) = self.link_polygon(v)?;
        if poly.len() < 3 {
            return None;
        }
        let h = self.scale(v);
        let area_tol = 1e-12 * h * h;
        let all = poly.clone();
        let mut out = Vec::with_capacity(poly.len() - 2);
        while poly.len() > 3 {
            let m = poly.len();
            let mut chosen = None;
            for i in 0..m {
                let (a, b, c) = (poly[(i + m - 1) % m], poly[i], poly[(i + 1) % m]);
                let (pa, pb, pc) = (self.coords[a], self.coords[b], self.coords[c]);
                self.predicate_evals += 1;
                if geom::orient2d(&pa, &pb, &pc) <= 2.0 * area_tol {
                    continue;
                }
                let mut ok = true;
                for &d in &all {
                    if d == a || d == b || d == c {
                        continue;
                    }
                    self.predicate_evals += 1;
                    if geom::in_circumcircle(&pa, &pb, &pc, &self.coords[d], INCIRCLE_EPS) {
                        ok = false;
                        break;
                    }
                    let pd = self.coords[d];
                    if poly.contains(&d)
                        && geom::orient2d(&pa, &pb, &pd) > 0.0
                        && geom::orient2d(&pb, &pc, &pd) > 0.0
                        && geom::orient2d(&pc, &pa, &pd) > 0.0
                    {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    chosen = Some(i);
                    break;
                }
            }
            let i = chosen?;
            let m = poly.len();
            out.push(vec![poly[(i + m - 1) % m], poly[i], poly[(i + 1) % m]]);
            poly.remove(i);
        }
        let (pa, pb, pc) = (self.coords[poly[0]], self.coords[poly[1]], self.coords[poly[2]]);
        if geom::orient2d(&pa, &pb, &pc) <= 2.0 * area_tol {
            return None;
        }
        out.push(poly);
        Some(out)
    }

    /// Removes an interior or boundary vertex of a 2D mesh by Delaunay
    /// retriangulation of its star. Returns false and leaves the mesh
    /// untouched when the star cannot be retriangulated.
    pub fn remove_vertex_2d(&mut self, v: usize) -> bool {
        assert_eq!(self.dim, 2);
        match self.delaunay_star(v) {
            Some(cells) => {
                self.replace_star(v, &cells);
                true
            }
            None => false,
        }
    }

    /// Cells produced by contracting `v` onto `n`, or `None` when the
    /// contraction is infeasible. Returns the worst new aspect ratio.
    pub fn contraction_candidate(&mut self, v: usize, n: usize, c_ar: f64) -> Option<(f64, Vec<Vec<usize>>)> {
        let star = self.vertex_cells[v].clone();
        let h = self.scale(v);
        let d = self.dim;
        let mut star_measure = 0.0;
        let mut new_measure = 0.0;
        let mut worst: f64 = 0.0;
        let mut cells = Vec::new();
        for &c in &star {
            let cell = self.cell(c).to_vec();
            let pts = self.points(&cell);
            star_measure += geom::signed_measure(&pts);
            if cell.contains(&n) {
                continue;
            }
            let nc: Vec<usize> = cell.iter().map(|&x| if x == v { n } else { x }).collect();
            let np = self.points(&nc);
            self.predicate_evals += 1;
            let m = geom::signed_measure(&np);
            if !(m > 1e-12 * h.powi(d as i32)) {
                return None;
            }
            let ar = geom::simplex_aspect_ratio(&np)?;
            if !(ar < c_ar) {
                return None;
            }
            worst = worst.max(ar);
            new_measure += m;
            cells.push(nc);
        }
        if (new_measure - star_measure).abs() > VOLUME_RTOL * star_measure.abs() {
            return None;
        }
        if !self.link_condition(v, n) {
            return None;
        }
        Some((worst, cells))
    }

    /// Whether contracting the edge `vn` keeps the complex a manifold:
    /// `Lk(v) ∩ Lk(n) = Lk(vn)`, with boundary facets coned to a ghost
    /// vertex.
    fn link_condition(&self, v: usize, n: usize) -> bool {
        const GHOST: usize = usize::MAX;
        let link = |x: usize, also: Option<usize>| -> Vec<Vec<usize>> {
            let mut faces: Vec<Vec<usize>> = Vec::new();
            let mut tops: Vec<Vec<usize>> = Vec::new();
            for &c in &self.vertex_cells[x] {
                let cell = self.cell(c);
                if also.is_some_and(|y| !cell.contains(&y)) {
                    continue;
                }
                tops.push(cell.iter().copied().filter(|&u| u != x && Some(u) != also).collect());
            }
            for f in self.boundary_facets_at(x) {
                if also.is_some_and(|y| !f.contains(&y)) {
                    continue;
                }
                let mut t: Vec<usize> = f.into_iter().filter(|&u| u != x && Some(u) != also).collect();
                t.push(GHOST);
                tops.push(t);
            }
            for t in tops {
                let k = t.len();
                for mask in 1u32..(1 << k) {
                    let mut s: Vec<usize> = (0..k).filter(|&i| mask & (1 << i) != 0).map(|i| t[i]).collect();
                    s.sort_unstable();
                    faces.push(s);
                }
            }
            faces.sort_unstable();
            faces.dedup();
            faces
        };
        let lv = link(v, None);
        let ln = link(n, None);
        let le = link(v, Some(n));
        let mut common = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < lv.len() && j < ln.len() {
            match lv[i].cmp(&ln[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    common.push(lv[i].clone());
                    i += 1;
                    j += 1;
                }
            }
        }
        common == le
    }

    /// Neighbours `n` along which `v` may be contracted, given its marker.
    fn contraction_targets(&self, v: usize) -> Vec<usize> {
        let link = self.link_vertices(v);
        match self.markers[v] {
            BoundaryMarker::Interior => link,
            BoundaryMarker::Corner => Vec::new(),
            mk => {
                let bf = self.boundary_facets_at(v);
                let mut t: Vec<usize> = bf.iter().flatten().copied().filter(|&u| u != v).collect();
                t.sort_unstable();
                t.dedup();
                if mk == BoundaryMarker::Ridge {
                    t.retain(|&u| matches!(self.markers[u], BoundaryMarker::Ridge | BoundaryMarker::Corner));
                }
                t
            }
        }
    }

    /// Contracts `v` onto the feasible neighbour minimising the worst new
    /// aspect ratio (ties to the lowest index). Returns the target, or `None`
    /// when every candidate is infeasible.
    pub fn remove_vertex_contract(&mut self, v: usize, c_ar: f64) -> Option<usize> {
        let mut best: Option<(f64, usize, Vec<Vec<usize>>)> = None;
        for n in self.contraction_targets(v) {
            if let Some((w, cells)) = self.contraction_candidate(v, n, c_ar) {
                if best.as_ref().is_none_or(|b| w < b.0) {
                    best = Some((w, n, cells));
                }
            }
        }
        let (_, n, cells) = best?;
        self.replace_star(v, &cells);
        Some(n)
    }

    pub fn remove_vertex(&mut self, v: usize, config: &RemeshConfig) -> Removal {
        if self.markers[v] == BoundaryMarker::Corner {
            return Removal::Retained;
        }
        if self.dim == 2 && config.delaunay_2d && self.remove_vertex_2d(v) {
            return Removal::Retriangulated;
        }
        match self.remove_vertex_contract(v, config.c_ar) {
            Some(n) => Removal::Contracted(n),
            None => Removal::Retained,
        }
    }

    /// Compacts surviving vertices (ascending original index) into a mesh.
    /// Also returns, for each new vertex, its index in the input mesh.
    pub fn compact(&self) -> Result<(SimplicialMesh, Vec<usize>)> {
        let old: Vec<usize> = (0..self.coords.len()).filter(|&v| self.vertex_alive[v]).collect();
        let mut map = vec![usize::MAX; self.coords.len()];
        for (i, &v) in old.iter().enumerate() {
            map[v] = i;
        }
        let coords = old.iter().map(|&v| self.coords[v]).collect();
        let markers = old.iter().map(|&v| self.markers[v]).collect();
        let mut cells: Vec<[usize; 4]> = self
            .alive_cells()
            .map(|c| {
                let mut p = [usize::MAX; 4];
                for (k, &v) in c.iter().enumerate() {
                    p[k] = map[v];
                }
                p
            })
            .collect();
        cells.sort_unstable();
        let mesh = SimplicialMesh::from_packed(self.dim, coords, cells, Some(markers))?;
        Ok((mesh, old))
    }
}

/// Output of [`remesh`].
#[derive(Clone, Debug)]
pub struct RemeshResult {
    pub mesh: SimplicialMesh,
    /// Index in the input mesh of every output vertex.
    pub fine_index: Vec<usize>,
    /// Vertices requested for removal that could not be removed.
    pub retained: Vec<usize>,
    pub stats: RemeshStats,
}

/// Removes every vertex not flagged in `keep`, one at a time in ascending
/// order. Retained vertices are queued again, up to their degree, whenever a
/// neighbour is removed.
pub fn remesh(mesh: &SimplicialMesh, keep: &[bool], config: &RemeshConfig) -> Result<RemeshResult> {
    assert_eq!(keep.len(), mesh.num_vertices());
    let mut w = WorkingMesh::new(mesh);
    let mut stats = RemeshStats::default();
    let mut queue: VecDeque<usize> = (0..mesh.num_vertices()).filter(|&v| !keep[v]).collect();
    stats.requested = queue.len();
    let mut queued = vec![false; mesh.num_vertices()];
    for &v in &queue {
        queued[v] = true;
    }
    let mut failed = vec![false; mesh.num_vertices()];
    let mut attempts = vec![0usize; mesh.num_vertices()];
    while let Some(v) = queue.pop_front() {
        queued[v] = false;
        if !w.is_alive(v) {
            continue;
        }
        let link = w.link_vertices(v);
        attempts[v] += 1;
        if attempts[v] > 1 {
            stats.retries += 1;
        }
        match w.remove_vertex(v, config) {
            Removal::Retained => {
                failed[v] = true;
            }
            r => {
                failed[v] = false;
                stats.removed += 1;
                match r {
                    Removal::Retriangulated => stats.delaunay_removals += 1,
                    _ => stats.contractions += 1,
                }
                if config.retry {
                    for u in link {
                        if failed[u] && !queued[u] && attempts[u] <= w.star(u).len() {
                            queued[u] = true;
                            queue.push_back(u);
                        }
                    }
                }
            }
        }
    }
    let retained: Vec<usize> = (0..mesh.num_vertices()).filter(|&v| !keep[v] && w.is_alive(v)).collect();
    stats.retained = retained.len();
    stats.predicate_evals = w.predicate_evals;
    let (out, fine_index) = w.compact()?;
    Ok(RemeshResult { mesh: out, fine_index, retained, stats })
}
