//! Small fixed-size geometry kernels shared by the mesh, remeshing and
//! interpolation code. Points are always stored as `[f64; 3]`; 2D data
//! keeps `z == 0`.

pub type Point = [f64; 3];

#[inline]
pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: &Point, b: &Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: &Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist(a: &Point, b: &Point) -> f64 {
    norm(&sub(a, b))
}

/// Twice the signed area of the triangle `abc` in the xy-plane.
#[inline]
pub fn orient2d(a: &Point, b: &Point, c: &Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Six times the signed volume of the tetrahedron `abcd`.
#[inline]
pub fn orient3d(a: &Point, b: &Point, c: &Point, d: &Point) -> f64 {
    dot(&sub(b, a), &cross(&sub(c, a), &sub(d, a)))
}

/// Signed area (2D) or volume (3D) of a simplex given by `dim + 1` points.
pub fn signed_measure(pts: &[Point]) -> f64 {
    match pts.len() {
        3 => 0.5 * orient2d(&pts[0], &pts[1], &pts[2]),
        4 => orient3d(&pts[0], &pts[1], &pts[2], &pts[3]) / 6.0,
        n => panic!("signed_measure: unsupported simplex with {n} points"),
    }
}

pub fn longest_edge(pts: &[Point]) -> f64 {
    let mut h: f64 = 0.0;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            h = h.max(dist(&pts[i], &pts[j]));
        }
    }
    h
}

pub fn shortest_edge(pts: &[Point]) -> f64 {
    let mut h = f64::INFINITY;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            h = h.min(dist(&pts[i], &pts[j]));
        }
    }
    h
}

/// Area of a 3D triangle.
#[inline]
pub fn triangle_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * norm(&cross(&sub(b, a), &sub(c, a)))
}

/// Diameter of the inscribed circle (2D) or sphere (3D).
///
/// Uses `r = d * |measure| / boundary_measure`. Returns 0 for degenerate
/// simplices.
pub fn inscribed_diameter(pts: &[Point]) -> f64 {
    match pts.len() {
        3 => {
            let area = signed_measure(pts).abs();
            let perim = dist(&pts[0], &pts[1]) + dist(&pts[1], &pts[2]) + dist(&pts[2], &pts[0]);
            if perim == 0.0 {
                0.0
            } else {
                4.0 * area / perim
            }
        }
        4 => {
            let vol = signed_measure(pts).abs();
            let faces = triangle_area(&pts[1], &pts[2], &pts[3])
                + triangle_area(&pts[0], &pts[2], &pts[3])
                + triangle_area(&pts[0], &pts[1], &pts[3])
                + triangle_area(&pts[0], &pts[1], &pts[2]);
            if faces == 0.0 {
                0.0
            } else {
                6.0 * vol / faces
            }
        }
        n => panic!("inscribed_diameter: unsupported simplex with {n} points"),
    }
}

/// Longest edge over inscribed diameter; `None` when the simplex is degenerate.
pub fn simplex_aspect_ratio(pts: &[Point]) -> Option<f64> {
    let h = longest_edge(pts);
    let rho = inscribed_diameter(pts);
    if !(rho > 1e-14 * h) || h == 0.0 {
        return None;
    }
    Some(h / rho)
}

pub fn barycenter(pts: &[Point]) -> Point {
    let mut c = [0.0; 3];
    for p in pts {
        c = add(&c, p);
    }
    scale(&c, 1.0 / pts.len() as f64)
}

/// Barycentric coordinates of `p` with respect to the simplex `pts`.
/// Degenerate simplices produce non-finite values.
pub fn barycentric(pts: &[Point], p: &Point) -> [f64; 4] {
    match pts.len() {
        3 => {
            let d = orient2d(&pts[0], &pts[1], &pts[2]);
            let l1 = orient2d(&pts[0], p, &pts[2]) / d;
            let l2 = orient2d(&pts[0], &pts[1], p) / d;
            [1.0 - l1 - l2, l1, l2, 0.0]
        }
        4 => {
            let d = orient3d(&pts[0], &pts[1], &pts[2], &pts[3]);
            let l1 = orient3d(&pts[0], p, &pts[2], &pts[3]) / d;
            let l2 = orient3d(&pts[0], &pts[1], p, &pts[3]) / d;
            let l3 = orient3d(&pts[0], &pts[1], &pts[2], p) / d;
            [1.0 - l1 - l2 - l3, l1, l2, l3]
        }
        n => panic!("barycentric: unsupported simplex with {n} points"),
    }
}

/// Positive when `d` lies strictly inside the circumcircle of the
/// counter-clockwise triangle `abc`.
pub fn incircle(a: &Point, b: &Point, c: &Point, d: &Point) -> f64 {
    let adx = a[0] - d[0];
    let ady = a[1] - d[1];
    let bdx = b[0] - d[0];
    let bdy = b[1] - d[1];
    let cdx = c[0] - d[0];
    let cdy = c[1] - d[1];
    let ad = adx * adx + ady * ady;
    let bd = bdx * bdx + bdy * bdy;
    let cd = cdx * cdx + cdy * cdy;
    adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx)
}

/// Scale-aware version of [`incircle`]: strictly inside by more than a
/// relative tolerance.
pub fn in_circumcircle(a: &Point, b: &Point, c: &Point, d: &Point, rel_eps: f64) -> bool {
    let h = longest_edge(&[*a, *b, *c]).max(dist(a, d));
    incircle(a, b, c, d) > rel_eps * h.powi(4)
}

pub fn closest_point_on_segment(p: &Point, a: &Point, b: &Point) -> Point {
    let ab = sub(b, a);
    let len2 = dot(&ab, &ab);
    if len2 == 0.0 {
        return *a;
    }
    let t = (dot(&sub(p, a), &ab) / len2).clamp(0.0, 1.0);
    add(a, &scale(&ab, t))
}

/// Closest point on a triangle in 3-space (Ericson, Real-Time Collision
/// Detection, 5.1.5).
pub fn closest_point_on_triangle(p: &Point, a: &Point, b: &Point, c: &Point) -> Point {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(&ab, &ap);
    let d2 = dot(&ac, &ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = sub(p, b);
    let d3 = dot(&ab, &bp);
    let d4 = dot(&ac, &bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return add(a, &scale(&ab, v));
    }
    let cp = sub(p, c);
    let d5 = dot(&ab, &cp);
    let d6 = dot(&ac, &cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return add(a, &scale(&ac, w));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return add(b, &scale(&sub(c, b), w));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    add(a, &add(&scale(&ab, v), &scale(&ac, w)))
}

/// Closest point of a (closed) simplex to `p`. Returns `p` itself when it
/// lies inside.
pub fn closest_point_on_simplex(pts: &[Point], p: &Point) -> Point {
    let lam = barycentric(pts, p);
    let n = pts.len();
    if lam[..n].iter().all(|&l| l >= 0.0) {
        return *p;
    }
    let mut best = *p;
    let mut best_d = f64::INFINITY;
    match n {
        3 => {
            for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                let q = closest_point_on_segment(p, &pts[i], &pts[j]);
                let d = dist(&q, p);
                if d < best_d {
                    best_d = d;
                    best = q;
                }
            }
        }
        4 => {
            for (i, j, k) in [(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)] {
                let q = closest_point_on_triangle(p, &pts[i], &pts[j], &pts[k]);
                let d = dist(&q, p);
                if d < best_d {
                    best_d = d;
                    best = q;
                }
            }
        }
        _ => unreachable!(),
    }
    best
}

pub fn distance_to_simplex(pts: &[Point], p: &Point) -> f64 {
    dist(&closest_point_on_simplex(pts, p), p)
}

#[derive(Clone, Copy, Debug)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn of(pts: &[Point]) -> Self {
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for p in pts {
            for k in 0..3 {
                min[k] = min[k].min(p[k]);
                max[k] = max[k].max(p[k]);
            }
        }
        Aabb { min, max }
    }

    pub fn inflate(&self, r: f64) -> Self {
        Aabb {
            min: [self.min[0] - r, self.min[1] - r, self.min[2] - r],
            max: [self.max[0] + r, self.max[1] + r, self.max[2] + r],
        }
    }

    pub fn overlaps(&self, other: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= other.max[k] && other.min[k] <= self.max[k])
    }

    pub fn distance_to(&self, p: &Point) -> f64 {
        let mut d2 = 0.0;
        for k in 0..3 {
            let e = if p[k] < self.min[k] {
                self.min[k] - p[k]
            } else if p[k] > self.max[k] {
                p[k] - self.max[k]
            } else {
                0.0
            };
            d2 += e * e;
        }
        d2.sqrt()
    }
}

fn separated_on_axis(a: &[Point], b: &[Point], axis: &Point, tol: f64) -> bool {
    let len = norm(axis);
    if len < 1e-300 {
        return false;
    }
    let (mut amin, mut amax) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in a {
        let s = dot(p, axis) / len;
        amin = amin.min(s);
        amax = amax.max(s);
    }
    let (mut bmin, mut bmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in b {
        let s = dot(p, axis) / len;
        bmin = bmin.min(s);
        bmax = bmax.max(s);
    }
    amax < bmin - tol || bmax < amin - tol
}

/// Closed intersection test between two simplices of the same dimension
/// (triangles in the xy-plane or tetrahedra) by the separating axis theorem.
/// Touching at a single point counts as intersecting; `tol` is an absolute
/// length slack.
pub fn simplices_intersect(a: &[Point], b: &[Point], tol: f64) -> bool {
    match (a.len(), b.len()) {
        (3, 3) => {
            for s in [a, b] {
                for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                    let e = sub(&s[j], &s[i]);
                    let axis = [-e[1], e[0], 0.0];
                    if separated_on_axis(a, b, &axis, tol) {
                        return false;
                    }
                }
            }
            true
        }
        (4, 4) => {
            const FACES: [(usize, usize, usize); 4] = [(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)];
            const EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
            for s in [a, b] {
                for &(i, j, k) in &FACES {
                    let axis = cross(&sub(&s[j], &s[i]), &sub(&s[k], &s[i]));
                    if separated_on_axis(a, b, &axis, tol) {
                        return false;
                    }
                }
            }
            for &(i, j) in &EDGES {
                let ea = sub(&a[j], &a[i]);
                for &(k, l) in &EDGES {
                    let eb = sub(&b[l], &b[k]);
                    let axis = cross(&ea, &eb);
                    // Near-parallel edge pairs give no reliable axis.
                    if norm(&axis) <= 1e-12 * norm(&ea) * norm(&eb) {
                        continue;
                    }
                    if separated_on_axis(a, b, &axis, tol) {
                        return false;
                    }
                }
            }
            true
        }
        _ => panic!("simplices_intersect: mismatched simplex sizes"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilateral_and_right_triangle_aspect_ratios() {
        let eq = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, 3f64.sqrt() / 2.0, 0.0]];
        assert!((simplex_aspect_ratio(&eq).unwrap() - 3f64.sqrt()).abs() < 1e-12);
        let right = [[0.0, 0.0, 0.0], [4.0, 0.0, 0.0], [0.0, 3.0, 0.0]];
        assert!((simplex_aspect_ratio(&right).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_simplex_has_no_aspect_ratio() {
        let flat = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        assert!(simplex_aspect_ratio(&flat).is_none());
    }

    #[test]
    fn closest_point_outside_triangle_lands_on_edge() {
        let tri = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let q = closest_point_on_simplex(&tri, &[0.5, -1.0, 0.0]);
        assert!((q[0] - 0.5).abs() < 1e-15 && q[1].abs() < 1e-15);
        let q = closest_point_on_simplex(&tri, &[1.0, 1.0, 0.0]);
        assert!((q[0] - 0.5).abs() < 1e-15 && (q[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sat_detects_touching_and_separated_triangles() {
        let a = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let touching = [[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [2.0, 1.0, 0.0]];
        let apart = [[1.1, 0.0, 0.0], [2.0, 0.0, 0.0], [2.0, 1.0, 0.0]];
        assert!(simplices_intersect(&a, &touching, 1e-12));
        assert!(!simplices_intersect(&a, &apart, 1e-12));
    }

    #[test]
    fn sat_tetrahedra() {
        let a = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let shifted = a.map(|p| [p[0] + 0.2, p[1] + 0.2, p[2] + 0.2]);
        let far = a.map(|p| [p[0] + 0.7, p[1] + 0.7, p[2] + 0.7]);
        assert!(simplices_intersect(&a, &shifted, 1e-12));
        assert!(!simplices_intersect(&a, &far, 1e-12));
    }
}
