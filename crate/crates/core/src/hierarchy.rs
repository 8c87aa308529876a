//! Repeated coarsening and remeshing into a mesh hierarchy, with the
//! inter-level quality metrics (overlap counts and length-scale ratios).

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::coarsen::{self, CoarseningStats};
use crate::error::{Error, Result};
use crate::geom::{self, Aabb, Point};
use crate::mesh::{self, BoundaryMarker, SimplicialMesh, DEFAULT_CURVATURE_THRESHOLD};
use crate::remesh::{self, RemeshConfig, RemeshStats};

/// Required cell-count decrease between adjacent levels.
pub const C_M: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HierarchyConfig {
    pub beta: f64,
    pub remesh: RemeshConfig,
    pub min_vertices: usize,
    pub max_levels: usize,
    pub curvature_threshold: f64,
    /// Compute overlap and length-scale ratios for every level.
    pub metrics: bool,
}

impl HierarchyConfig {
    pub fn for_dim(dim: usize) -> Self {
        HierarchyConfig {
            beta: coarsen::default_beta(dim),
            remesh: RemeshConfig::for_dim(dim),
            min_vertices: if dim == 2 { 200 } else { 300 },
            max_levels: 20,
            curvature_threshold: DEFAULT_CURVATURE_THRESHOLD,
            metrics: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelMetrics {
    pub level: usize,
    pub cells: usize,
    pub vertices: usize,
    pub max_ar: f64,
    /// `sup |S_tau|` against the next finer level (absent on level 0).
    pub max_overlap: Option<usize>,
    /// Largest coarse/fine length-scale ratio against the next finer level.
    pub max_lengthscale_ratio: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Level {
    pub mesh: SimplicialMesh,
    /// Index in the next finer level of every vertex of this level.
    pub fine_index: Vec<usize>,
    /// Vertices (indices into the finer level) that were selected for
    /// removal but could not be removed.
    pub retained: Vec<usize>,
    pub coarsening: CoarseningStats,
    pub remesh: RemeshStats,
    pub metrics: LevelMetrics,
}

/// Meshes `M^0` (finest) to `M^n` (coarsest).
#[derive(Clone, Debug)]
pub struct MeshHierarchy {
    levels: Vec<Level>,
}

impl MeshHierarchy {
    /// Wraps an existing sequence of meshes, e.g. read from disk.
    pub fn from_meshes(meshes: Vec<SimplicialMesh>, metrics: bool) -> Result<Self> {
        let mut levels: Vec<Level> = Vec::with_capacity(meshes.len());
        for (k, m) in meshes.into_iter().enumerate() {
            let fine_index = match levels.last() {
                Some(prev) => nested_index(&prev.mesh, &m),
                None => (0..m.num_vertices()).collect(),
            };
            let mut lm = level_metrics(k, &m)?;
            if metrics {
                if let Some(prev) = levels.last() {
                    let o = overlap_metrics(&prev.mesh, &m);
                    lm.max_overlap = Some(o.max_overlap);
                    lm.max_lengthscale_ratio = Some(o.max_lengthscale_ratio);
                }
            }
            levels.push(Level {
                mesh: m,
                fine_index,
                retained: Vec::new(),
                coarsening: CoarseningStats::default(),
                remesh: RemeshStats::default(),
                metrics: lm,
            });
        }
        Ok(MeshHierarchy { levels })
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level(&self, k: usize) -> &Level {
        &self.levels[k]
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn mesh(&self, k: usize) -> &SimplicialMesh {
        &self.levels[k].mesh
    }

    pub fn meshes(&self) -> impl Iterator<Item = &SimplicialMesh> {
        self.levels.iter().map(|l| &l.mesh)
    }

    pub fn metrics(&self) -> Vec<LevelMetrics> {
        self.levels.iter().map(|l| l.metrics).collect()
    }
}

fn coord_key(p: &Point) -> [u64; 3] {
    [p[0].to_bits(), p[1].to_bits(), p[2].to_bits()]
}

/// For every coarse vertex, the fine vertex with bitwise identical
/// coordinates (`usize::MAX` when absent).
pub fn nested_index(fine: &SimplicialMesh, coarse: &SimplicialMesh) -> Vec<usize> {
    let map: HashMap<[u64; 3], usize> = fine.coords().iter().enumerate().map(|(i, p)| (coord_key(p), i)).collect();
    coarse.coords().iter().map(|p| map.get(&coord_key(p)).copied().unwrap_or(usize::MAX)).collect()
}

fn level_metrics(level: usize, m: &SimplicialMesh) -> Result<LevelMetrics> {
    let q = mesh::quality_report(m)?;
    Ok(LevelMetrics {
        level,
        cells: m.num_cells(),
        vertices: m.num_vertices(),
        max_ar: q.max_aspect_ratio,
        max_overlap: None,
        max_lengthscale_ratio: None,
    })
}

fn merge_markers(a: &[BoundaryMarker], b: &[BoundaryMarker]) -> Vec<BoundaryMarker> {
    a.iter().zip(b).map(|(&x, &y)| if x.code() >= y.code() { x } else { y }).collect()
}

/// Builds the hierarchy. Features are detected on every level and merged
/// with the markers inherited from the finer level.
pub fn build_hierarchy(mesh: &SimplicialMesh, cfg: &HierarchyConfig) -> Result<MeshHierarchy> {
    if cfg.min_vertices < mesh.dim() + 2 {
        return Err(Error::InfeasibleTarget(format!("min_vertices {} too small", cfg.min_vertices)));
    }
    let mut current = mesh.clone();
    let f0 = mesh::detect_features(&current, cfg.curvature_threshold)?;
    current.set_markers(merge_markers(current.markers(), &f0.markers))?;
    let mut levels = vec![Level {
        metrics: level_metrics(0, &current)?,
        fine_index: (0..current.num_vertices()).collect(),
        mesh: current.clone(),
        retained: Vec::new(),
        coarsening: CoarseningStats::default(),
        remesh: RemeshStats::default(),
    }];
    while levels.len() < cfg.max_levels && current.num_vertices() > cfg.min_vertices {
        let k = levels.len();
        let mut features = mesh::detect_features(&current, cfg.curvature_threshold)?;
        features.markers = merge_markers(current.markers(), &features.markers);
        current.set_markers(features.markers.clone())?;
        let sel = coarsen::staged_coarsen(&current, &features, cfg.beta)?;
        if sel.keep.iter().all(|&k| k) {
            if k == 1 {
                return Err(Error::NotCoarsenable(cfg.beta));
            }
            break;
        }
        let rm = remesh::remesh(&current, &sel.keep, &cfg.remesh)?;
        if rm.mesh.num_vertices() == current.num_vertices() && k == 1 {
            return Err(Error::NotCoarsenable(cfg.beta));
        }
        if !(current.num_cells() as f64 > C_M * rm.mesh.num_cells() as f64) {
            log::info!(
                "level {k}: {} cells after {} is not a sufficient decrease; stopping",
                rm.mesh.num_cells(),
                current.num_cells()
            );
            break;
        }
        let mut metrics = level_metrics(k, &rm.mesh)?;
        if cfg.metrics {
            let o = overlap_metrics(&current, &rm.mesh);
            metrics.max_overlap = Some(o.max_overlap);
            metrics.max_lengthscale_ratio = Some(o.max_lengthscale_ratio);
        }
        log::info!(
            "level {k}: {} vertices, {} cells, {} retained",
            rm.mesh.num_vertices(),
            rm.mesh.num_cells(),
            rm.retained.len()
        );
        current = rm.mesh.clone();
        levels.push(Level {
            mesh: rm.mesh,
            fine_index: rm.fine_index,
            retained: rm.retained,
            coarsening: sel.stats(),
            remesh: rm.stats,
            metrics,
        });
    }
    Ok(MeshHierarchy { levels })
}

/// Inter-level comparability between a fine mesh and the next coarser one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OverlapMetrics {
    /// Largest number of fine cells intersecting one coarse cell.
    pub max_overlap: usize,
    /// Largest `h_coarse(x) / h_fine(x)` over fine barycentres and vertices.
    pub max_lengthscale_ratio: f64,
    /// Fine samples that fell outside every coarse cell and were assigned
    /// to the nearest intersecting one.
    pub projected_samples: usize,
}

const CONTAIN_TOL: f64 = -1e-12;

fn contains(pts: &[Point], x: &Point) -> bool {
    let b = geom::barycentric(pts, x);
    b[..pts.len()].iter().all(|&l| l >= CONTAIN_TOL)
}

/// Fine cells intersecting coarse cell `tau`, by breadth-first search over
/// fine cell adjacency seeded from cells at the shared vertices.
fn overlap_set(
    fine: &SimplicialMesh,
    coarse: &SimplicialMesh,
    nest: &[usize],
    boxes: &[Aabb],
    tau: usize,
    visited: &mut Vec<usize>,
    epoch: usize,
) -> Vec<usize> {
    let tp = coarse.cell_points(tau);
    let tb = Aabb::of(&tp);
    let tol = 1e-12 * geom::longest_edge(&tp);
    let hits = |c: usize| boxes[c].overlaps(&tb.inflate(tol)) && geom::simplices_intersect(&tp, &fine.cell_points(c), tol);
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for &cv in coarse.cell(tau) {
        let fv = nest[cv];
        if fv == usize::MAX {
            continue;
        }
        for &c in fine.vertex_cells(fv) {
            if visited[c] != epoch {
                visited[c] = epoch;
                if hits(c) {
                    out.push(c);
                    queue.push_back(c);
                }
            }
        }
    }
    if queue.is_empty() {
        for c in 0..fine.num_cells() {
            if hits(c) {
                visited[c] = epoch;
                out.push(c);
                queue.push_back(c);
            }
        }
    }
    while let Some(c) = queue.pop_front() {
        for &d in fine.cell_neighbors(c) {
            if visited[d] != epoch {
                visited[d] = epoch;
                if hits(d) {
                    out.push(d);
                    queue.push_back(d);
                }
            }
        }
    }
    out.sort_unstable();
    out
}

fn ratio_from_candidates(
    fine: &SimplicialMesh,
    coarse: &SimplicialMesh,
    candidates: &[Vec<usize>],
    cell_h: (&[f64], &[f64]),
) -> (f64, usize) {
    let (hf, hc) = cell_h;
    let mut best: f64 = 0.0;
    let mut projected = 0;
    let locate = |x: &Point, cands: &[usize]| -> (Option<f64>, Option<f64>) {
        // Smallest coarse h among containing cells, else the nearest cell.
        let mut inside: Option<f64> = None;
        let mut near: Option<(f64, f64)> = None;
        for &t in cands {
            let tp = coarse.cell_points(t);
            if contains(&tp, x) {
                inside = Some(inside.map_or(hc[t], |v: f64| v.min(hc[t])));
            } else {
                let d = geom::distance_to_simplex(&tp, x);
                if near.is_none_or(|n| d < n.0) {
                    near = Some((d, hc[t]));
                }
            }
        }
        (inside, near.map(|n| n.1))
    };
    for c in 0..fine.num_cells() {
        let (inside, near) = locate(&fine.barycenter(c), &candidates[c]);
        match (inside, near) {
            (Some(h), _) => best = best.max(h / hf[c]),
            (None, Some(h)) => {
                projected += 1;
                best = best.max(h / hf[c]);
            }
            _ => {}
        }
    }
    for v in 0..fine.num_vertices() {
        let inc = fine.vertex_cells(v);
        let hmax = inc.iter().map(|&c| hf[c]).fold(0.0, f64::max);
        let mut cands: Vec<usize> = inc.iter().flat_map(|&c| candidates[c].iter().copied()).collect();
        cands.sort_unstable();
        cands.dedup();
        match locate(fine.point(v), &cands) {
            (Some(h), _) => best = best.max(h / hmax),
            (None, Some(h)) => {
                projected += 1;
                best = best.max(h / hmax);
            }
            _ => {}
        }
    }
    (best, projected)
}

fn cell_lengths(m: &SimplicialMesh) -> Vec<f64> {
    (0..m.num_cells()).map(|c| geom::longest_edge(&m.cell_points(c))).collect()
}

/// Overlap and length-scale metrics, computed by traversal in parallel over
/// coarse cells.
pub fn overlap_metrics(fine: &SimplicialMesh, coarse: &SimplicialMesh) -> OverlapMetrics {
    let nest = nested_index(fine, coarse);
    let boxes: Vec<Aabb> = (0..fine.num_cells()).map(|c| Aabb::of(&fine.cell_points(c))).collect();
    let sets: Vec<Vec<usize>> = (0..coarse.num_cells())
        .into_par_iter()
        .map_init(
            || (vec![0usize; fine.num_cells()], 0usize),
            |(visited, epoch), tau| {
                *epoch += 1;
                overlap_set(fine, coarse, &nest, &boxes, tau, visited, *epoch)
            },
        )
        .collect();
    summarise(fine, coarse, &sets)
}

/// All-pairs reference for [`overlap_metrics`].
pub fn overlap_metrics_brute_force(fine: &SimplicialMesh, coarse: &SimplicialMesh) -> OverlapMetrics {
    let sets: Vec<Vec<usize>> = (0..coarse.num_cells())
        .map(|t| {
            let tp = coarse.cell_points(t);
            let tol = 1e-12 * geom::longest_edge(&tp);
            (0..fine.num_cells()).filter(|&c| geom::simplices_intersect(&tp, &fine.cell_points(c), tol)).collect()
        })
        .collect();
    summarise(fine, coarse, &sets)
}

fn summarise(fine: &SimplicialMesh, coarse: &SimplicialMesh, sets: &[Vec<usize>]) -> OverlapMetrics {
    let max_overlap = sets.iter().map(Vec::len).max().unwrap_or(0);
    let mut candidates = vec![Vec::new(); fine.num_cells()];
    for (t, s) in sets.iter().enumerate() {
        for &c in s {
            candidates[c].push(t);
        }
    }
    let hf = cell_lengths(fine);
    let hc = cell_lengths(coarse);
    let (ratio, projected) = ratio_from_candidates(fine, coarse, &candidates, (&hf, &hc));
    OverlapMetrics { max_overlap, max_lengthscale_ratio: ratio, projected_samples: projected }
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or("-".to_string(), |x| x.to_string())
}

/// Aligned text table with columns level, cells, vertices, max_ar,
/// max_overlap, max_ratio.
pub fn metrics_table(rows: &[LevelMetrics]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>5} {:>9} {:>9} {:>8} {:>11} {:>9}", "level", "cells", "vertices", "max_ar", "max_overlap", "max_ratio");
    for r in rows {
        let _ = writeln!(
            s,
            "{:>5} {:>9} {:>9} {:>8.2} {:>11} {:>9}",
            r.level,
            r.cells,
            r.vertices,
            r.max_ar,
            opt(r.max_overlap),
            r.max_lengthscale_ratio.map_or("-".to_string(), |x| format!("{x:.2}"))
        );
    }
    s
}

pub fn metrics_csv(rows: &[LevelMetrics]) -> String {
    let mut s = String::from("level,cells,vertices,max_ar,max_overlap,max_ratio\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.level,
            r.cells,
            r.vertices,
            r.max_ar,
            r.max_overlap.map_or(String::new(), |x| x.to_string()),
            r.max_lengthscale_ratio.map_or(String::new(), |x| x.to_string())
        );
    }
    s
}
