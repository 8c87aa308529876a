//! Simplicial mesh storage, adjacency, quality measures, the spacing
//! function and boundary feature detection.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geom::{self, Point};

/// Classification of a vertex with respect to the domain boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum BoundaryMarker {
    #[default]
    Interior = 0,
    Boundary = 1,
    Ridge = 2,
    Corner = 3,
}

impl BoundaryMarker {
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Self::Interior),
            1 => Some(Self::Boundary),
            2 => Some(Self::Ridge),
            3 => Some(Self::Corner),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn on_boundary(self) -> bool {
        self != Self::Interior
    }
}

/// Compressed adjacency lists.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Adjacency {
    offsets: Vec<usize>,
    data: Vec<usize>,
}

impl Adjacency {
    pub fn from_lists(lists: &[Vec<usize>]) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        let mut data = Vec::with_capacity(lists.iter().map(Vec::len).sum());
        offsets.push(0);
        for l in lists {
            data.extend_from_slice(l);
            offsets.push(data.len());
        }
        Adjacency { offsets, data }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[usize] {
        &self.data[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn len(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Local vertex indices of the facets of a positively oriented simplex,
/// ordered so that each facet is outward oriented (counter-clockwise
/// boundary traversal in 2D, outward normal by the right-hand rule in 3D).
pub fn outward_facets(dim: usize) -> &'static [&'static [usize]] {
    match dim {
        2 => &[&[1, 2], &[2, 0], &[0, 1]],
        3 => &[&[1, 2, 3], &[0, 3, 2], &[0, 1, 3], &[0, 2, 1]],
        _ => panic!("unsupported dimension {dim}"),
    }
}

fn sorted_key(vs: &[usize]) -> [usize; 3] {
    let mut k = [usize::MAX; 3];
    k[..vs.len()].copy_from_slice(vs);
    k[..vs.len()].sort_unstable();
    k
}

/// A boundary facet, outward oriented, with the cell it belongs to.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryFacet {
    pub vertices: Vec<usize>,
    pub cell: usize,
}

/// A 2D triangle mesh or 3D tetrahedral mesh.
///
/// Cells are stored as `[usize; 4]`; in 2D the last slot is unused.
#[derive(Clone, Debug)]
pub struct SimplicialMesh {
    dim: usize,
    coords: Vec<Point>,
    cells: Vec<[usize; 4]>,
    markers: Vec<BoundaryMarker>,
    vertex_cells: Adjacency,
    cell_neighbors: Adjacency,
}

impl SimplicialMesh {
    /// Builds a mesh, checking indices and orientation. Boundary markers are
    /// initialised from facet incidence (interior or plain boundary); run
    /// [`detect_features`] to classify ridges and corners.
    pub fn new(dim: usize, coords: Vec<Point>, cells: Vec<Vec<usize>>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::BadDimension(dim));
        }
        let nv = coords.len();
        let mut packed = Vec::with_capacity(cells.len());
        for (ci, c) in cells.iter().enumerate() {
            if c.len() != dim + 1 {
                return Err(Error::DimensionMismatch { expected: dim + 1, got: c.len() });
            }
            let mut p = [usize::MAX; 4];
            for (k, &v) in c.iter().enumerate() {
                if v >= nv {
                    return Err(Error::BadVertexIndex { cell: ci, vertex: v, nv });
                }
                p[k] = v;
            }
            packed.push(p);
        }
        Self::from_packed(dim, coords, packed, None)
    }

    pub(crate) fn from_packed(
        dim: usize,
        coords: Vec<Point>,
        cells: Vec<[usize; 4]>,
        markers: Option<Vec<BoundaryMarker>>,
    ) -> Result<Self> {
        let nv = coords.len();
        let mut mesh = SimplicialMesh {
            dim,
            coords,
            cells,
            markers: Vec::new(),
            vertex_cells: Adjacency::default(),
            cell_neighbors: Adjacency::default(),
        };
        for c in 0..mesh.num_cells() {
            let pts = mesh.cell_points(c);
            let m = geom::signed_measure(&pts);
            let h = geom::longest_edge(&pts);
            if !(m > 1e-12 * h.powi(dim as i32)) {
                return Err(Error::InvertedCell { cell: c, measure: m });
            }
        }
        let mut vc: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for c in 0..mesh.num_cells() {
            for &v in mesh.cell(c) {
                vc[v].push(c);
            }
        }
        mesh.vertex_cells = Adjacency::from_lists(&vc);
        let mut stamp = vec![usize::MAX; mesh.num_cells()];
        let mut nbrs: Vec<Vec<usize>> = Vec::with_capacity(mesh.num_cells());
        for c in 0..mesh.num_cells() {
            let mut list = Vec::new();
            stamp[c] = c;
            for &v in mesh.cell(c) {
                for &d in mesh.vertex_cells.row(v) {
                    if stamp[d] != c {
                        stamp[d] = c;
                        list.push(d);
                    }
                }
            }
            list.sort_unstable();
            nbrs.push(list);
        }
        mesh.cell_neighbors = Adjacency::from_lists(&nbrs);
        mesh.markers = match markers {
            Some(m) => {
                if m.len() != nv {
                    return Err(Error::DimensionMismatch { expected: nv, got: m.len() });
                }
                m
            }
            None => mesh.facet_markers(),
        };
        Ok(mesh)
    }

    fn facet_markers(&self) -> Vec<BoundaryMarker> {
        let mut markers = vec![BoundaryMarker::Interior; self.num_vertices()];
        for f in self.boundary_facets() {
            for v in f.vertices {
                markers[v] = BoundaryMarker::Boundary;
            }
        }
        markers
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn num_vertices(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    #[inline]
    pub fn coords(&self) -> &[Point] {
        &self.coords
    }

    #[inline]
    pub fn point(&self, v: usize) -> &Point {
        &self.coords[v]
    }

    #[inline]
    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c][..self.dim + 1]
    }

    pub(crate) fn packed_cells(&self) -> &[[usize; 4]] {
        &self.cells
    }

    pub fn cell_points(&self, c: usize) -> Vec<Point> {
        self.cell(c).iter().map(|&v| self.coords[v]).collect()
    }

    pub fn markers(&self) -> &[BoundaryMarker] {
        &self.markers
    }

    pub fn marker(&self, v: usize) -> BoundaryMarker {
        self.markers[v]
    }

    pub fn set_markers(&mut self, markers: Vec<BoundaryMarker>) -> Result<()> {
        if markers.len() != self.num_vertices() {
            return Err(Error::DimensionMismatch { expected: self.num_vertices(), got: markers.len() });
        }
        self.markers = markers;
        Ok(())
    }

    /// Cells incident to vertex `v`.
    #[inline]
    pub fn vertex_cells(&self, v: usize) -> &[usize] {
        self.vertex_cells.row(v)
    }

    /// Cells sharing at least one vertex with `c` (excluding `c`).
    #[inline]
    pub fn cell_neighbors(&self, c: usize) -> &[usize] {
        self.cell_neighbors.row(c)
    }

    pub fn measure(&self, c: usize) -> f64 {
        geom::signed_measure(&self.cell_points(c))
    }

    /// Longest edge of cell `c`.
    pub fn cell_size(&self, c: usize) -> f64 {
        geom::longest_edge(&self.cell_points(c))
    }

    pub fn barycenter(&self, c: usize) -> Point {
        geom::barycenter(&self.cell_points(c))
    }

    /// Sorted unique undirected edges `(a, b)` with `a < b`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e = Vec::with_capacity(self.num_cells() * if self.dim == 2 { 3 } else { 6 });
        for c in 0..self.num_cells() {
            let cv = self.cell(c);
            for i in 0..cv.len() {
                for j in (i + 1)..cv.len() {
                    let (a, b) = (cv[i].min(cv[j]), cv[i].max(cv[j]));
                    e.push((a, b));
                }
            }
        }
        e.sort_unstable();
        e.dedup();
        e
    }

    /// Vertex-to-vertex adjacency over mesh edges (sorted rows).
    pub fn vertex_neighbors(&self) -> Adjacency {
        let mut lists = vec![Vec::new(); self.num_vertices()];
        for (a, b) in self.edges() {
            lists[a].push(b);
            lists[b].push(a);
        }
        for l in &mut lists {
            l.sort_unstable();
        }
        Adjacency::from_lists(&lists)
    }

    /// Facets incident to exactly one cell, outward oriented, in a
    /// deterministic order.
    pub fn boundary_facets(&self) -> Vec<BoundaryFacet> {
        let mut count: HashMap<[usize; 3], (u32, usize, usize)> = HashMap::new();
        let local = outward_facets(self.dim);
        for c in 0..self.num_cells() {
            let cv = self.cell(c);
            for (li, f) in local.iter().enumerate() {
                let vs: Vec<usize> = f.iter().map(|&k| cv[k]).collect();
                let e = count.entry(sorted_key(&vs)).or_insert((0, c, li));
                e.0 += 1;
            }
        }
        let mut out: Vec<BoundaryFacet> = count
            .into_values()
            .filter(|&(n, _, _)| n == 1)
            .map(|(_, c, li)| {
                let cv = self.cell(c);
                BoundaryFacet { vertices: local[li].iter().map(|&k| cv[k]).collect(), cell: c }
            })
            .collect();
        out.sort_by(|a, b| (a.cell, &a.vertices).cmp(&(b.cell, &b.vertices)));
        out
    }

    /// Largest facet incidence count; a valid conforming mesh has 2.
    pub fn max_facet_incidence(&self) -> usize {
        let mut count: HashMap<[usize; 3], usize> = HashMap::new();
        for c in 0..self.num_cells() {
            let cv = self.cell(c);
            for f in outward_facets(self.dim) {
                let vs: Vec<usize> = f.iter().map(|&k| cv[k]).collect();
                *count.entry(sorted_key(&vs)).or_default() += 1;
            }
        }
        count.into_values().max().unwrap_or(0)
    }
}

/// Longest edge over inscribed diameter of one cell.
pub fn aspect_ratio(mesh: &SimplicialMesh, cell: usize) -> Result<f64> {
    geom::simplex_aspect_ratio(&mesh.cell_points(cell)).ok_or(Error::DegenerateCell(cell))
}

#[derive(Clone, Debug, PartialEq)]
pub struct QualityReport {
    pub max_aspect_ratio: f64,
    pub cell_count: usize,
    pub vertex_count: usize,
    pub worst_cell: usize,
}

pub fn quality_report(mesh: &SimplicialMesh) -> Result<QualityReport> {
    let mut worst = 0;
    let mut max_ar = 0.0;
    for c in 0..mesh.num_cells() {
        let ar = aspect_ratio(mesh, c)?;
        if ar > max_ar {
            max_ar = ar;
            worst = c;
        }
    }
    Ok(QualityReport {
        max_aspect_ratio: max_ar,
        cell_count: mesh.num_cells(),
        vertex_count: mesh.num_vertices(),
        worst_cell: worst,
    })
}

/// Shortest incident edge length at every vertex.
pub fn spacing_function(mesh: &SimplicialMesh) -> Result<Vec<f64>> {
    let mut sp = vec![f64::INFINITY; mesh.num_vertices()];
    for (a, b) in mesh.edges() {
        let d = geom::dist(mesh.point(a), mesh.point(b));
        sp[a] = sp[a].min(d);
        sp[b] = sp[b].min(d);
    }
    if let Some(v) = sp.iter().position(|s| !s.is_finite()) {
        return Err(Error::IsolatedVertex(v));
    }
    Ok(sp)
}

/// Default feature threshold, pi/3.
pub const DEFAULT_CURVATURE_THRESHOLD: f64 = std::f64::consts::FRAC_PI_3;

/// Result of boundary feature detection.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    pub markers: Vec<BoundaryMarker>,
    /// Boundary edges whose dihedral deviation exceeds the threshold (3D
    /// only), as sorted pairs.
    pub ridge_edges: Vec<(usize, usize)>,
}

impl FeatureSet {
    pub fn corners(&self) -> impl Iterator<Item = usize> + '_ {
        self.markers.iter().enumerate().filter(|(_, &m)| m == BoundaryMarker::Corner).map(|(v, _)| v)
    }
}

fn angle_between(a: &Point, b: &Point) -> f64 {
    let c = geom::cross(a, b);
    geom::norm(&c).atan2(geom::dot(a, b))
}

/// Classifies boundary vertices into plain boundary, ridge and corner.
///
/// 2D: a boundary vertex whose two boundary edges turn by more than
/// `threshold` is a corner. 3D: boundary edges whose facet normals differ by
/// more than `threshold` are ridges; a vertex is a corner when its discrete
/// curvature `2*pi - sum(facet angles)` exceeds `threshold` in magnitude, when
/// its ridge count is not 0 or 2, or when its two ridge edges bend by more
/// than `threshold`.
pub fn detect_features(mesh: &SimplicialMesh, threshold: f64) -> Result<FeatureSet> {
    let facets = mesh.boundary_facets();
    let nv = mesh.num_vertices();
    let mut markers = vec![BoundaryMarker::Interior; nv];
    for f in &facets {
        for &v in &f.vertices {
            markers[v] = BoundaryMarker::Boundary;
        }
    }
    let mut ridge_edges = Vec::new();
    if mesh.dim() == 2 {
        let mut next = vec![usize::MAX; nv];
        let mut prev = vec![usize::MAX; nv];
        for f in &facets {
            let (a, b) = (f.vertices[0], f.vertices[1]);
            if next[a] != usize::MAX || prev[b] != usize::MAX {
                return Err(Error::NonManifoldBoundary(format!("vertex {}", if next[a] != usize::MAX { a } else { b })));
            }
            next[a] = b;
            prev[b] = a;
        }
        for v in 0..nv {
            if markers[v] != BoundaryMarker::Boundary {
                continue;
            }
            if next[v] == usize::MAX || prev[v] == usize::MAX {
                return Err(Error::NonManifoldBoundary(format!("vertex {v}")));
            }
            let din = geom::sub(mesh.point(v), mesh.point(prev[v]));
            let dout = geom::sub(mesh.point(next[v]), mesh.point(v));
            let turn = (din[0] * dout[1] - din[1] * dout[0]).atan2(geom::dot(&din, &dout));
            if turn.abs() > threshold {
                markers[v] = BoundaryMarker::Corner;
            }
        }
        return Ok(FeatureSet { markers, ridge_edges });
    }

    // 3D: facet normals, angle sums and edge-to-facet incidence.
    let mut angle_sum = vec![0.0; nv];
    let mut edge_facets: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    let mut normals = Vec::with_capacity(facets.len());
    for (fi, f) in facets.iter().enumerate() {
        let p: Vec<Point> = f.vertices.iter().map(|&v| *mesh.point(v)).collect();
        let n = geom::cross(&geom::sub(&p[1], &p[0]), &geom::sub(&p[2], &p[0]));
        normals.push(n);
        for k in 0..3 {
            let v = f.vertices[k];
            let a = geom::sub(&p[(k + 1) % 3], &p[k]);
            let b = geom::sub(&p[(k + 2) % 3], &p[k]);
            angle_sum[v] += angle_between(&a, &b);
            let (x, y) = (f.vertices[k], f.vertices[(k + 1) % 3]);
            edge_facets.entry((x.min(y), x.max(y))).or_default().push(fi);
        }
    }
    let mut ridge_nbrs: Vec<Vec<usize>> = vec![Vec::new(); nv];
    let mut keys: Vec<_> = edge_facets.keys().copied().collect();
    keys.sort_unstable();
    for e in keys {
        let fs = &edge_facets[&e];
        if fs.len() != 2 {
            return Err(Error::NonManifoldBoundary(format!("edge {e:?} has {} boundary facets", fs.len())));
        }
        let dihedral = angle_between(&normals[fs[0]], &normals[fs[1]]);
        if dihedral.abs() > threshold {
            ridge_edges.push(e);
            ridge_nbrs[e.0].push(e.1);
            ridge_nbrs[e.1].push(e.0);
        }
    }
    for v in 0..nv {
        if markers[v] == BoundaryMarker::Interior {
            continue;
        }
        let curvature = 2.0 * std::f64::consts::PI - angle_sum[v];
        let rn = &ridge_nbrs[v];
        let corner = curvature.abs() > threshold
            || !(rn.is_empty() || rn.len() == 2)
            || (rn.len() == 2 && {
                let a = geom::sub(mesh.point(rn[0]), mesh.point(v));
                let b = geom::sub(mesh.point(rn[1]), mesh.point(v));
                std::f64::consts::PI - angle_between(&a, &b) > threshold
            });
        markers[v] = if corner {
            BoundaryMarker::Corner
        } else if rn.len() == 2 {
            BoundaryMarker::Ridge
        } else {
            BoundaryMarker::Boundary
        };
    }
    Ok(FeatureSet { markers, ridge_edges })
}
