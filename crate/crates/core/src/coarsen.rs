//! Greedy graph coarsening: choose a node-nested coarse vertex set whose
//! graph neighbours satisfy the spacing condition
//! `beta * (Sp(v1) + Sp(v2)) < dist(v1, v2)`.

use crate::error::Result;
use crate::geom::{self, Point};
use crate::mesh::{self, BoundaryMarker, FeatureSet, SimplicialMesh};

/// Lower bound on useful `beta` in 2D.
pub const BETA0_2D: f64 = std::f64::consts::SQRT_2;
/// Lower bound on useful `beta` in 3D.
pub const BETA0_3D: f64 = 1.732_050_807_568_877_2;

pub fn default_beta(dim: usize) -> f64 {
    if dim == 2 {
        1.5
    } else {
        1.8
    }
}

/// Per-vertex spacing used by the selection: half the shortest incident
/// edge, so that `beta` just above `beta0` reproduces 2:1 structured
/// coarsening.
pub fn coarsening_spacing(mesh: &SimplicialMesh) -> Result<Vec<f64>> {
    Ok(mesh::spacing_function(mesh)?.into_iter().map(|s| 0.5 * s).collect())
}

pub fn beta0(dim: usize) -> f64 {
    if dim == 2 {
        BETA0_2D
    } else {
        BETA0_3D
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexStatus {
    Unknown,
    Included,
    Excluded,
}

/// Work counters for one selection pass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CoarseningStats {
    pub initial_edges: usize,
    pub edges_created: usize,
    pub edge_tests: usize,
    pub contractions: usize,
}

impl CoarseningStats {
    pub fn edges_ever_present(&self) -> usize {
        self.initial_edges + self.edges_created
    }

    fn absorb(&mut self, o: &CoarseningStats) {
        self.initial_edges += o.initial_edges;
        self.edges_created += o.edges_created;
        self.edge_tests += o.edge_tests;
        self.contractions += o.contractions;
    }
}

/// Mutable graph, statuses and spacing for one pass.
#[derive(Clone, Debug)]
pub struct CoarseningState {
    graph: Vec<Vec<usize>>,
    status: Vec<VertexStatus>,
    spacing: Vec<f64>,
    coords: Vec<Point>,
    beta: f64,
    stats: CoarseningStats,
    stamp: Vec<usize>,
    epoch: usize,
    rank: Vec<usize>,
    next_rank: usize,
}

impl CoarseningState {
    /// State over `coords` with the given undirected edges. Vertices that do
    /// not appear in `active` start excluded and take no part.
    pub fn new(coords: Vec<Point>, spacing: Vec<f64>, edges: &[(usize, usize)], beta: f64, active: Option<&[bool]>) -> Self {
        let n = coords.len();
        assert_eq!(spacing.len(), n);
        let mut graph = vec![Vec::new(); n];
        for &(a, b) in edges {
            debug_assert_ne!(a, b);
            graph[a].push(b);
            graph[b].push(a);
        }
        for g in graph.iter_mut() {
            g.sort_unstable();
            g.dedup();
        }
        let initial_edges = graph.iter().map(Vec::len).sum::<usize>() / 2;
        let status = match active {
            Some(act) => act.iter().map(|&a| if a { VertexStatus::Unknown } else { VertexStatus::Excluded }).collect(),
            None => vec![VertexStatus::Unknown; n],
        };
        if let Some(act) = active {
            for (v, g) in graph.iter().enumerate() {
                assert!(act[v] || g.is_empty(), "inactive vertex {v} has graph edges");
            }
        }
        CoarseningState {
            graph,
            status,
            spacing,
            coords,
            beta,
            stats: CoarseningStats { initial_edges, ..Default::default() },
            stamp: vec![0; n],
            epoch: 0,
            rank: vec![usize::MAX; n],
            next_rank: 0,
        }
    }

    pub fn from_mesh(mesh: &SimplicialMesh, beta: f64) -> Result<Self> {
        let sp = coarsening_spacing(mesh)?;
        Ok(Self::new(mesh.coords().to_vec(), sp, &mesh.edges(), beta, None))
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn status(&self, v: usize) -> VertexStatus {
        self.status[v]
    }

    pub fn statuses(&self) -> &[VertexStatus] {
        &self.status
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.graph[v]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn stats(&self) -> CoarseningStats {
        self.stats
    }

    /// Current graph edges as sorted pairs.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<_> = self
            .graph
            .iter()
            .enumerate()
            .flat_map(|(a, g)| g.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
            .collect();
        e.sort_unstable();
        e
    }

    pub fn included(&self) -> Vec<usize> {
        (0..self.status.len()).filter(|&v| self.status[v] == VertexStatus::Included).collect()
    }

    pub fn graph_spacing_violated(&self, v1: usize, v2: usize) -> bool {
        debug_assert_ne!(v1, v2);
        self.beta * (self.spacing[v1] + self.spacing[v2]) >= geom::dist(&self.coords[v1], &self.coords[v2])
    }

    fn mark_included(&mut self, v: usize) {
        if self.status[v] != VertexStatus::Included {
            self.status[v] = VertexStatus::Included;
            self.rank[v] = self.next_rank;
            self.next_rank += 1;
        }
    }

    pub fn force_include(&mut self, v: usize) {
        assert_ne!(self.status[v], VertexStatus::Excluded, "cannot force excluded vertex {v}");
        self.mark_included(v);
    }

    /// Includes `v` and contracts every violating unknown neighbour onto it
    /// until all remaining unknown neighbours satisfy the condition.
    pub fn visit_vertex(&mut self, v: usize) {
        assert_ne!(self.status[v], VertexStatus::Excluded, "visit of excluded vertex {v}");
        self.mark_included(v);
        self.epoch += 1;
        let ep = self.epoch;
        self.stamp[v] = ep;
        for &u in &self.graph[v] {
            self.stamp[u] = ep;
        }
        let mut nbrs = std::mem::take(&mut self.graph[v]);
        let mut i = 0;
        while i < nbrs.len() {
            let w = nbrs[i];
            self.stats.edge_tests += 1;
            if self.status[w] != VertexStatus::Unknown || !self.graph_spacing_violated(v, w) {
                i += 1;
                continue;
            }
            self.status[w] = VertexStatus::Excluded;
            self.stats.contractions += 1;
            nbrs.swap_remove(i);
            for u in std::mem::take(&mut self.graph[w]) {
                if u == v {
                    continue;
                }
                let gu = &mut self.graph[u];
                if let Some(k) = gu.iter().position(|&x| x == w) {
                    gu.swap_remove(k);
                }
                if self.stamp[u] != ep {
                    self.stamp[u] = ep;
                    gu.push(v);
                    nbrs.push(u);
                    self.stats.edges_created += 1;
                }
            }
        }
        self.graph[v] = nbrs;
    }

    /// Visits forced vertices first, then the rest by ascending index.
    pub fn visit_all(&mut self, forced: &[usize]) {
        for &v in forced {
            self.force_include(v);
        }
        for &v in forced {
            self.visit_vertex(v);
        }
        for v in 0..self.status.len() {
            if self.status[v] == VertexStatus::Unknown {
                self.visit_vertex(v);
            }
        }
    }

    /// A contraction during a visit can join the visited vertex to one that
    /// was included earlier. Each such violating pair with neither vertex
    /// in `exempt` is resolved by contracting the later-included vertex
    /// onto the earlier one.
    pub fn repair(&mut self, exempt: &[bool]) {
        let mut queue = self.spacing_violations(exempt);
        queue.reverse();
        while let Some((a, b)) = queue.pop() {
            if self.status[a] != VertexStatus::Included || self.status[b] != VertexStatus::Included {
                continue;
            }
            let (keep, drop) = if self.rank[a] <= self.rank[b] { (a, b) } else { (b, a) };
            self.status[drop] = VertexStatus::Excluded;
            self.stats.contractions += 1;
            self.epoch += 1;
            let ep = self.epoch;
            self.stamp[keep] = ep;
            for &u in &self.graph[keep] {
                self.stamp[u] = ep;
            }
            if let Some(k) = self.graph[keep].iter().position(|&x| x == drop) {
                self.graph[keep].swap_remove(k);
            }
            for u in std::mem::take(&mut self.graph[drop]) {
                if u == keep {
                    continue;
                }
                let gu = &mut self.graph[u];
                if let Some(k) = gu.iter().position(|&x| x == drop) {
                    gu.swap_remove(k);
                }
                if self.stamp[u] == ep {
                    continue;
                }
                self.stamp[u] = ep;
                gu.push(keep);
                self.graph[keep].push(u);
                self.stats.edges_created += 1;
                self.stats.edge_tests += 1;
                if self.status[u] == VertexStatus::Included
                    && !exempt[u]
                    && !exempt[keep]
                    && self.graph_spacing_violated(keep, u)
                {
                    queue.push((keep.min(u), keep.max(u)));
                }
            }
        }
    }

    /// Full selection pass: `visit_all` followed by `repair` with the forced
    /// vertices exempt.
    pub fn run(&mut self, forced: &[usize]) {
        self.visit_all(forced);
        let mut exempt = vec![false; self.status.len()];
        for &v in forced {
            exempt[v] = true;
        }
        self.repair(&exempt);
    }

    /// Final graph edges joining two included vertices that break the
    /// spacing condition, ignoring pairs with a vertex in `exempt`.
    pub fn spacing_violations(&self, exempt: &[bool]) -> Vec<(usize, usize)> {
        self.edges()
            .into_iter()
            .filter(|&(a, b)| {
                self.status[a] == VertexStatus::Included
                    && self.status[b] == VertexStatus::Included
                    && !exempt[a]
                    && !exempt[b]
                    && self.graph_spacing_violated(a, b)
            })
            .collect()
    }
}

/// Result of a single selection pass.
#[derive(Clone, Debug)]
pub struct Selection {
    pub included: Vec<usize>,
    pub stats: CoarseningStats,
    pub state: CoarseningState,
}

/// One pass of graph coarsening over the mesh edge graph.
pub fn select_coarse_vertices(mesh: &SimplicialMesh, beta: f64, forced: &[usize]) -> Result<Selection> {
    warn_beta(mesh.dim(), beta);
    let mut state = CoarseningState::from_mesh(mesh, beta)?;
    state.run(forced);
    Ok(Selection { included: state.included(), stats: state.stats(), state })
}

fn warn_beta(dim: usize, beta: f64) {
    if beta <= beta0(dim) {
        log::warn!("beta {beta} does not exceed the lower bound {} for dimension {dim}", beta0(dim));
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Interior,
    Boundary,
    Ridge,
}

#[derive(Clone, Debug)]
pub struct StageOutcome {
    pub stage: Stage,
    pub forced: Vec<bool>,
    pub state: CoarseningState,
}

impl StageOutcome {
    pub fn spacing_violations(&self) -> Vec<(usize, usize)> {
        self.state.spacing_violations(&self.forced)
    }
}

#[derive(Clone, Debug)]
pub struct StagedSelection {
    pub keep: Vec<bool>,
    pub stages: Vec<StageOutcome>,
}

impl StagedSelection {
    pub fn kept(&self) -> Vec<usize> {
        (0..self.keep.len()).filter(|&v| self.keep[v]).collect()
    }

    pub fn stats(&self) -> CoarseningStats {
        let mut s = CoarseningStats::default();
        for st in &self.stages {
            s.absorb(&st.state.stats());
        }
        s
    }
}

fn stage(
    coords: &[Point],
    sp: &[f64],
    edges: &[(usize, usize)],
    active: &[bool],
    forced: Vec<bool>,
    beta: f64,
    which: Stage,
) -> StageOutcome {
    let mut state = CoarseningState::new(coords.to_vec(), sp.to_vec(), edges, beta, Some(active));
    let list: Vec<usize> = (0..forced.len()).filter(|&v| forced[v]).collect();
    state.run(&list);
    StageOutcome { stage: which, forced, state }
}

/// Interior, boundary and (3D) ridge stages. Spacing is computed once on
/// `mesh`; corners are kept in every stage.
pub fn staged_coarsen(mesh: &SimplicialMesh, features: &FeatureSet, beta: f64) -> Result<StagedSelection> {
    warn_beta(mesh.dim(), beta);
    let n = mesh.num_vertices();
    let sp = coarsening_spacing(mesh)?;
    let mk = &features.markers;
    let coords = mesh.coords();
    let all = vec![true; n];
    let on_bnd: Vec<bool> = mk.iter().map(|m| m.on_boundary()).collect();

    let interior = stage(coords, &sp, &mesh.edges(), &all, on_bnd.clone(), beta, Stage::Interior);
    let mut keep: Vec<bool> =
        (0..n).map(|v| interior.state.status(v) == VertexStatus::Included).collect();
    let mut stages = vec![interior];

    let mut bedges: Vec<(usize, usize)> = Vec::new();
    for f in mesh.boundary_facets() {
        let vs = &f.vertices;
        for i in 0..vs.len() {
            for j in i + 1..vs.len() {
                bedges.push((vs[i].min(vs[j]), vs[i].max(vs[j])));
            }
        }
    }
    bedges.sort_unstable();
    bedges.dedup();
    let bforced: Vec<bool> = if mesh.dim() == 2 {
        mk.iter().map(|&m| m == BoundaryMarker::Corner).collect()
    } else {
        mk.iter().map(|&m| matches!(m, BoundaryMarker::Ridge | BoundaryMarker::Corner)).collect()
    };
    let boundary = stage(coords, &sp, &bedges, &on_bnd, bforced, beta, Stage::Boundary);
    for v in 0..n {
        if on_bnd[v] {
            keep[v] = boundary.state.status(v) == VertexStatus::Included;
        }
    }
    stages.push(boundary);

    if mesh.dim() == 3 {
        let on_ridge: Vec<bool> = mk.iter().map(|&m| matches!(m, BoundaryMarker::Ridge | BoundaryMarker::Corner)).collect();
        let redges: Vec<(usize, usize)> =
            features.ridge_edges.iter().copied().filter(|&(a, b)| on_ridge[a] && on_ridge[b]).collect();
        let rforced: Vec<bool> = mk.iter().map(|&m| m == BoundaryMarker::Corner).collect();
        let ridge = stage(coords, &sp, &redges, &on_ridge, rforced, beta, Stage::Ridge);
        for v in 0..n {
            if on_ridge[v] {
                keep[v] = ridge.state.status(v) == VertexStatus::Included;
            }
        }
        stages.push(ridge);
    }
    Ok(StagedSelection { keep, stages })
}
