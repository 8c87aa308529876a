//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

use std::sync::OnceLock;
use std::time::Instant;

use gradedmg::coarsen::staged_coarsen;
use gradedmg::fem::{exact_pacman, l2_error, ModelProblem};
use gradedmg::geom::{self, Point};
use gradedmg::hierarchy::{build_hierarchy, HierarchyConfig, MeshHierarchy};
use gradedmg::interp::{build_prolongation, build_prolongation_brute_force, max_entry_difference, LocationKind};
use gradedmg::mesh::{aspect_ratio, detect_features, DEFAULT_CURVATURE_THRESHOLD};
use gradedmg::meshgen::{generate_fichera, generate_pacman, GradingSpec};
use gradedmg::remesh::{WorkingMesh, DEFAULT_C_AR_3D};
use gradedmg::solver::{gmres, GmresOptions, Ilu0, MgPreconditioner, DEFAULT_SMOOTHS};
use gradedmg::{BoundaryMarker, SimplicialMesh};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: usize, pass: bool, detail: String) {
    println!("criterion {n}: {} - {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} failed: {detail}");
}

fn pacman_mu() -> GradingSpec {
    GradingSpec::graded(5.0 / 9.0)
}

fn fichera_mu() -> GradingSpec {
    GradingSpec::graded(2.0 / 3.0)
}

fn pacman_35k() -> &'static MeshHierarchy {
    static H: OnceLock<MeshHierarchy> = OnceLock::new();
    H.get_or_init(|| {
        let mesh = generate_pacman(&pacman_mu(), 35_000).unwrap();
        let cfg = HierarchyConfig { beta: 1.5, ..HierarchyConfig::for_dim(2) };
        build_hierarchy(&mesh, &cfg).unwrap()
    })
}

fn fichera_20k() -> &'static MeshHierarchy {
    static H: OnceLock<MeshHierarchy> = OnceLock::new();
    H.get_or_init(|| {
        let mesh = generate_fichera(&fichera_mu(), 20_000).unwrap();
        let cfg = HierarchyConfig { beta: 1.8, metrics: false, ..HierarchyConfig::for_dim(3) };
        build_hierarchy(&mesh, &cfg).unwrap()
    })
}

fn solver_hierarchy(mesh: &SimplicialMesh) -> MeshHierarchy {
    let cfg = HierarchyConfig { metrics: false, ..HierarchyConfig::for_dim(mesh.dim()) };
    build_hierarchy(mesh, &cfg).unwrap()
}

#[test]
fn criterion_1_coarsening_is_linear() {
    let mut lines = Vec::new();
    let mut pass = true;
    let mut per_edge = Vec::new();
    for n in [5_000, 20_000, 35_000] {
        let mesh = generate_pacman(&pacman_mu(), n).unwrap();
        let features = detect_features(&mesh, DEFAULT_CURVATURE_THRESHOLD).unwrap();
        let t = Instant::now();
        let sel = staged_coarsen(&mesh, &features, 1.5).unwrap();
        let secs = t.elapsed().as_secs_f64();
        let s = sel.stats();
        let edges = mesh.edges().len();
        let work = s.edge_tests + s.edges_created + s.contractions;
        per_edge.push(work as f64 / edges as f64);
        pass &= s.edge_tests <= 2 * s.edges_ever_present() && secs < 5.0;
        lines.push(format!("{} v: tests {} / ever {} in {:.3}s", mesh.num_vertices(), s.edge_tests, s.edges_ever_present(), secs));
    }
    let spread = per_edge.iter().cloned().fold(0.0, f64::max) / per_edge.iter().cloned().fold(f64::INFINITY, f64::min);
    pass &= spread < 2.0;
    report(1, pass, format!("{}; work/|E| {per_edge:.3?} spread {spread:.3}", lines.join("; ")));
}

#[test]
fn criterion_2_hierarchy_quality() {
    let h = pacman_35k();
    let m = h.metrics();
    let max_ar = m.iter().map(|r| r.max_ar).fold(0.0, f64::max);
    let decrease = m.windows(2).map(|w| w[0].vertices as f64 / w[1].vertices as f64).fold(f64::INFINITY, f64::min);
    let overlap = m.iter().filter_map(|r| r.max_overlap).max().unwrap_or(0);
    let ratio = m.iter().filter_map(|r| r.max_lengthscale_ratio).fold(0.0, f64::max);
    let pacman_ok = h.len() >= 6 && max_ar <= 10.0 && decrease >= 2.4 && overlap <= 30 && ratio <= 12.0;

    let f = fichera_20k();
    let fm = f.metrics();
    let f_ar = fm.iter().map(|r| r.max_ar).fold(0.0, f64::max);
    let monotone = fm.windows(2).all(|w| w[1].cells < w[0].cells);
    let fichera_ok = f.len() >= 2 && f_ar <= DEFAULT_C_AR_3D && monotone;
    report(
        2,
        pacman_ok && fichera_ok,
        format!(
            "pacman {} levels from {} v, max AR {max_ar:.2}, min decrease {decrease:.2}, overlap {overlap}, ratio {ratio:.2}; \
             fichera {} levels from {} v, max AR {f_ar:.2}, cells {:?}",
            h.len(),
            h.mesh(0).num_vertices(),
            f.len(),
            f.mesh(0).num_vertices(),
            fm.iter().map(|r| r.cells).collect::<Vec<_>>()
        ),
    );
}

fn spacing_violations_per_pass(h: &MeshHierarchy, beta: f64) -> (usize, usize) {
    let mut passes = 0;
    let mut bad = 0;
    for k in 0..h.len() - 1 {
        let mesh = h.mesh(k);
        let mut features = detect_features(mesh, DEFAULT_CURVATURE_THRESHOLD).unwrap();
        features.markers = features
            .markers
            .iter()
            .zip(mesh.markers())
            .map(|(&a, &b)| if a.code() >= b.code() { a } else { b })
            .collect();
        let sel = staged_coarsen(mesh, &features, beta).unwrap();
        for st in &sel.stages {
            passes += 1;
            bad += st.spacing_violations().len();
        }
    }
    (passes, bad)
}

#[test]
fn criterion_3_spacing_guarantee() {
    let (p2, b2) = spacing_violations_per_pass(pacman_35k(), 1.5);
    let (p3, b3) = spacing_violations_per_pass(fichera_20k(), 1.8);
    report(3, b2 == 0 && b3 == 0, format!("pacman {p2} passes, {b2} violations; fichera {p3} passes, {b3} violations"));
}

#[test]
fn criterion_4_interpolation_oracle() {
    let mesh = generate_pacman(&pacman_mu(), 900).unwrap();
    assert!(mesh.num_cells() < 2000);
    let h = solver_hierarchy(&mesh);
    let lin = |p: &Point| 0.25 - 1.5 * p[0] + 0.75 * p[1];
    let (mut diff, mut pou, mut repro, mut checked) = (0.0f64, 0.0f64, 0.0f64, 0);
    for k in 1..h.len() {
        let (fine, coarse) = (h.mesh(k - 1), h.mesh(k));
        let (p, _) = build_prolongation(fine, coarse).unwrap();
        let brute = build_prolongation_brute_force(fine, coarse);
        diff = diff.max(max_entry_difference(p.matrix(), brute.matrix()));
        let ones = p.matrix().matvec(&vec![1.0; coarse.num_vertices()]);
        pou = pou.max(ones.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max));
        let fc: Vec<f64> = coarse.coords().iter().map(lin).collect();
        let ff = p.matrix().matvec(&fc);
        for (v, loc) in p.locations().iter().enumerate() {
            if loc.kind != LocationKind::Projected {
                repro = repro.max((ff[v] - lin(fine.point(v))).abs());
                checked += 1;
            }
        }
    }
    report(
        4,
        h.len() >= 2 && diff <= 1e-12 && pou <= 1e-10 && repro <= 1e-10,
        format!("{} level pairs, max |P - P_brute| {diff:.1e}, row-sum error {pou:.1e}, linear error {repro:.1e} over {checked} rows", h.len() - 1),
    );
}

struct PacmanRun {
    dofs: usize,
    mg: usize,
    ilu: usize,
    l2: f64,
}

fn pacman_runs() -> &'static (Vec<PacmanRun>, f64) {
    static R: OnceLock<(Vec<PacmanRun>, f64)> = OnceLock::new();
    R.get_or_init(|| {
        let t = Instant::now();
        let mut runs = Vec::new();
        for n in [750, 1_500, 3_900, 9_000, 20_000, 50_000] {
            let mesh = generate_pacman(&pacman_mu(), n).unwrap();
            let h = solver_hierarchy(&mesh);
            let (sys, mg) = MgPreconditioner::from_hierarchy(&h, &ModelProblem::pacman(), DEFAULT_SMOOTHS).unwrap();
            let r = gmres(&sys.matrix, &sys.rhs, &mg, &GmresOptions { rtol: 1e-12, restart: 50, max_iters: 500 });
            assert!(r.converged);
            let ilu = Ilu0::factor(&sys.matrix).unwrap();
            let ri = gmres(&sys.matrix, &sys.rhs, &ilu, &GmresOptions { rtol: 1e-12, restart: 30, max_iters: 100_000 });
            assert!(ri.converged);
            let l2 = l2_error(&mesh, &r.x, exact_pacman).unwrap();
            runs.push(PacmanRun { dofs: sys.num_dofs(), mg: r.iterations, ilu: ri.iterations, l2 });
        }
        (runs, t.elapsed().as_secs_f64())
    })
}

#[test]
fn criterion_5_multigrid_is_bounded() {
    let (runs, secs) = pacman_runs();
    let mg: Vec<usize> = runs.iter().map(|r| r.mg).collect();
    let ilu: Vec<usize> = runs.iter().map(|r| r.ilu).collect();
    let spread = mg.iter().max().unwrap() - mg.iter().min().unwrap();
    let last = runs.last().unwrap();
    let pass = mg.iter().all(|&m| m <= 15)
        && spread <= 4
        && ilu.windows(2).all(|w| w[1] > w[0])
        && last.ilu > 10 * last.mg
        && *secs < 120.0;
    report(
        5,
        pass,
        format!("dofs {:?}, MG cycles {mg:?}, ILU iterations {ilu:?}, {secs:.1}s", runs.iter().map(|r| r.dofs).collect::<Vec<_>>()),
    );
}

#[test]
fn criterion_6_grading_reduces_error() {
    let (runs, _) = pacman_runs();
    let errs: Vec<f64> = runs.iter().map(|r| r.l2).collect();
    let monotone = errs.windows(2).all(|w| w[1] < w[0]);
    let graded = runs.iter().min_by_key(|r| r.dofs.abs_diff(3_900)).unwrap();
    let mesh = generate_pacman(&GradingSpec::uniform(), 3_900).unwrap();
    let sys = gradedmg::fem::assemble(&mesh, &ModelProblem::pacman()).unwrap();
    let ilu = Ilu0::factor(&sys.matrix).unwrap();
    let r = gmres(&sys.matrix, &sys.rhs, &ilu, &GmresOptions { rtol: 1e-12, restart: 30, max_iters: 100_000 });
    let uniform = l2_error(&mesh, &r.x, exact_pacman).unwrap();
    let comparable = (graded.dofs as f64 / sys.num_dofs() as f64 - 1.0).abs() < 0.05;
    let gain = uniform / graded.l2;
    report(
        6,
        monotone && comparable && gain >= 3.0,
        format!("L2 errors [{}]; graded {} dofs {:.3e} vs uniform {} dofs {uniform:.3e} (x{gain:.1})", errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(", "), graded.dofs, graded.l2, sys.num_dofs()),
    );
}

fn random_delaunay(n: usize, rng: &mut ChaCha8Rng) -> SimplicialMesh {
    use spade::{DelaunayTriangulation, Point2, Triangulation};
    let mut pts = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(1.0, 1.0), Point2::new(0.0, 1.0)];
    for _ in 0..n {
        pts.push(Point2::new(rng.random_range(0.01..0.99), rng.random_range(0.01..0.99)));
    }
    let dt = DelaunayTriangulation::<Point2<f64>>::bulk_load(pts).unwrap();
    let coords: Vec<Point> = dt.vertices().map(|v| [v.position().x, v.position().y, 0.0]).collect();
    let cells = dt.inner_faces().map(|f| f.vertices().iter().map(|v| v.fix().index()).collect()).collect();
    SimplicialMesh::new(2, coords, cells).unwrap()
}

fn in_circle_violations(coords: &[Point], cell: &[usize], alive: &[bool]) -> usize {
    let t: Vec<Point> = cell.iter().map(|&v| coords[v]).collect();
    (0..coords.len())
        .filter(|&q| alive[q] && !cell.contains(&q) && geom::in_circumcircle(&t[0], &t[1], &t[2], &coords[q], 1e-10))
        .count()
}

#[test]
fn criterion_7_remeshing_soundness() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut deletions, mut bad, mut refused) = (0, 0, 0);
    while deletions < 10_000 {
        let mesh = random_delaunay(400, &mut rng);
        let coords = mesh.coords().to_vec();
        let mut alive = vec![true; coords.len()];
        let mut w = WorkingMesh::new(&mesh);
        for _ in 0..250 {
            let v = rng.random_range(0..coords.len());
            if !alive[v] || mesh.marker(v) != BoundaryMarker::Interior {
                continue;
            }
            let link = w.link_vertices(v);
            if !w.remove_vertex_2d(v) {
                refused += 1;
                continue;
            }
            alive[v] = false;
            deletions += 1;
            let affected: Vec<Vec<usize>> =
                w.alive_cells().filter(|c| c.iter().any(|u| link.contains(u))).map(|c| c.to_vec()).collect();
            bad += affected.iter().map(|c| in_circle_violations(&coords, c, &alive)).sum::<usize>();
        }
    }

    let f = fichera_20k();
    let (mut worst, mut inverted, mut cells) = (0.0f64, 0, 0);
    for k in 1..f.len() {
        let m = f.mesh(k);
        for c in 0..m.num_cells() {
            cells += 1;
            if geom::signed_measure(&m.cell_points(c)) <= 0.0 {
                inverted += 1;
            }
            worst = worst.max(aspect_ratio(m, c).unwrap_or(f64::INFINITY));
        }
    }
    report(
        7,
        bad == 0 && refused == 0 && inverted == 0 && worst < DEFAULT_C_AR_3D,
        format!(
            "{deletions} 2D deletions, {bad} circumcircle violations, {refused} refused; \
             3D {cells} coarse cells, {inverted} non-positive, max AR {worst:.2}"
        ),
    );
}

#[test]
fn criterion_8_fichera_solve() {
    let mut rows = Vec::new();
    let mut pass = true;
    for n in [2_000, 8_000, 30_000] {
        let mesh = generate_fichera(&fichera_mu(), n).unwrap();
        let h = solver_hierarchy(&mesh);
        let (sys, mg) = MgPreconditioner::from_hierarchy(&h, &ModelProblem::fichera(), DEFAULT_SMOOTHS).unwrap();
        let r = gmres(&sys.matrix, &sys.rhs, &mg, &GmresOptions { rtol: 1e-12, restart: 50, max_iters: 500 });
        pass &= r.converged && r.iterations <= 15;
        rows.push((sys.num_dofs(), h.len(), r.iterations));
    }
    let its: Vec<usize> = rows.iter().map(|r| r.2).collect();
    pass &= its.iter().max().unwrap() - its.iter().min().unwrap() <= 4;
    report(8, pass, format!("(dofs, levels, MG cycles) {rows:?}"));
}
