//! Plain-text formats: meshes, coordinate-format sparse matrices and
//! vectors. All readers accept `#` comments and arbitrary whitespace.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryMarker, SimplicialMesh};
use crate::solver::{SparseMatrix, Triplets};

/// Whitespace tokens with their 1-based line numbers, comments stripped.
struct Tokens<'a> {
    path: &'a Path,
    items: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(path: &'a Path, text: &'a str) -> Self {
        let mut items = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("");
            items.extend(body.split_whitespace().map(|t| (ln + 1, t)));
        }
        Tokens { path, items, pos: 0 }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        let line = self.items.get(self.pos.min(self.items.len().saturating_sub(1))).map_or(0, |t| t.0);
        Error::Parse { path: self.path.to_path_buf(), line, msg: msg.into() }
    }

    fn next<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let Some(&(_, tok)) = self.items.get(self.pos) else {
            return Err(self.err(format!("unexpected end of file, expected {what}")));
        };
        let v = tok.parse().map_err(|_| self.err(format!("bad {what}: {tok:?}")))?;
        self.pos += 1;
        Ok(v)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.items.len() {
            return Err(self.err("trailing data"));
        }
        Ok(())
    }
}

/// Serialises a mesh: `dim nv nc`, coordinates, cells, boundary markers.
pub fn mesh_to_string(mesh: &SimplicialMesh) -> String {
    let d = mesh.dim();
    let mut s = String::new();
    let _ = writeln!(s, "{} {} {}", d, mesh.num_vertices(), mesh.num_cells());
    for p in mesh.coords() {
        let _ = writeln!(s, "{}", p[..d].iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" "));
    }
    for c in 0..mesh.num_cells() {
        let _ = writeln!(s, "{}", mesh.cell(c).iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "));
    }
    for m in mesh.markers() {
        let _ = writeln!(s, "{}", m.code());
    }
    s
}

pub fn parse_mesh(path: &Path, text: &str) -> Result<SimplicialMesh> {
    let mut t = Tokens::new(path, text);
    let dim: usize = t.next("dimension")?;
    if dim != 2 && dim != 3 {
        return Err(t.err(format!("dimension must be 2 or 3, got {dim}")));
    }
    let nv: usize = t.next("vertex count")?;
    let nc: usize = t.next("cell count")?;
    let mut coords = Vec::with_capacity(nv);
    for _ in 0..nv {
        let mut p = [0.0; 3];
        for x in p.iter_mut().take(dim) {
            *x = t.next("coordinate")?;
        }
        coords.push(p);
    }
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let mut c = Vec::with_capacity(dim + 1);
        for _ in 0..=dim {
            c.push(t.next::<usize>("vertex index")?);
        }
        cells.push(c);
    }
    let mut markers = Vec::with_capacity(nv);
    for _ in 0..nv {
        let code: u8 = t.next("boundary marker")?;
        markers.push(BoundaryMarker::from_code(code).ok_or_else(|| t.err(format!("bad marker {code}")))?);
    }
    t.finish()?;
    let mut mesh = SimplicialMesh::new(dim, coords, cells)?;
    mesh.set_markers(markers)?;
    Ok(mesh)
}

pub fn write_mesh(path: &Path, mesh: &SimplicialMesh) -> Result<()> {
    fs::write(path, mesh_to_string(mesh))?;
    Ok(())
}

pub fn read_mesh(path: &Path) -> Result<SimplicialMesh> {
    let text = fs::read_to_string(path)?;
    parse_mesh(path, &text)
}

/// `rows cols nnz` header followed by `row col value` triplets.
pub fn matrix_to_string(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{rows} {cols} {}", triplets.len());
    for (i, j, v) in triplets {
        let _ = writeln!(s, "{i} {j} {v:?}");
    }
    s
}

pub fn parse_triplets(path: &Path, text: &str) -> Result<(usize, usize, Triplets)> {
    let mut t = Tokens::new(path, text);
    let rows: usize = t.next("row count")?;
    let cols: usize = t.next("column count")?;
    let nnz: usize = t.next("nonzero count")?;
    let mut trip = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        let i: usize = t.next("row")?;
        let j: usize = t.next("column")?;
        let v: f64 = t.next("value")?;
        if i >= rows || j >= cols {
            return Err(t.err(format!("entry ({i}, {j}) out of range")));
        }
        trip.push((i, j, v));
    }
    t.finish()?;
    Ok((rows, cols, trip))
}

pub fn write_sparse(path: &Path, a: &SparseMatrix) -> Result<()> {
    fs::write(path, matrix_to_string(a.nrows(), a.ncols(), &a.triplets()))?;
    Ok(())
}

pub fn read_sparse(path: &Path) -> Result<SparseMatrix> {
    let text = fs::read_to_string(path)?;
    let (rows, cols, trip) = parse_triplets(path, &text)?;
    Ok(SparseMatrix::from_triplets(rows, cols, &trip))
}

/// Length on the first line, then one value per line.
pub fn vector_to_string(v: &[f64]) -> String {
    let mut s = String::with_capacity(v.len() * 24);
    let _ = writeln!(s, "{}", v.len());
    for x in v {
        let _ = writeln!(s, "{x:?}");
    }
    s
}

pub fn parse_vector(path: &Path, text: &str) -> Result<Vec<f64>> {
    let mut t = Tokens::new(path, text);
    let n: usize = t.next("length")?;
    let v = (0..n).map(|_| t.next("value")).collect::<Result<Vec<f64>>>()?;
    t.finish()?;
    Ok(v)
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    fs::write(path, vector_to_string(v))?;
    Ok(())
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    parse_vector(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_text_round_trip_is_bitwise() {
        let third = 1.0 / 3.0;
        let mut m = SimplicialMesh::new(
            2,
            vec![[0.0, 0.0, 0.0], [1.0, 0.1, 0.0], [third, 0.7 + 1e-17, 0.0], [1.0 + f64::EPSILON, 1.0, 0.0]],
            vec![vec![0, 1, 2], vec![1, 3, 2]],
        )
        .unwrap();
        let mut mk = m.markers().to_vec();
        mk[0] = BoundaryMarker::Corner;
        m.set_markers(mk).unwrap();
        let text = mesh_to_string(&m);
        let back = parse_mesh(Path::new("mem"), &text).unwrap();
        assert_eq!(back.coords(), m.coords());
        assert_eq!(back.markers(), m.markers());
        assert_eq!(mesh_to_string(&back), text);
    }

    #[test]
    fn comments_and_errors() {
        let text = "# a triangle\n2 3 1\n0 0\n1 0 # x axis\n0 1\n0 1 2\n1\n1\n1\n";
        let m = parse_mesh(Path::new("mem"), text).unwrap();
        assert_eq!(m.num_cells(), 1);
        let bad = "2 3 1\n0 0\n1 0\n0 1\n0 1 2\n1\n1\n";
        assert!(matches!(parse_mesh(Path::new("mem"), bad), Err(Error::Parse { .. })));
        let bad_marker = "2 3 1\n0 0\n1 0\n0 1\n0 1 2\n1\n7\n1\n";
        assert!(parse_mesh(Path::new("mem"), bad_marker).is_err());
    }

    #[test]
    fn triplet_round_trip() {
        let trip = vec![(0, 0, 2.0), (0, 1, -1.0 / 3.0), (1, 1, 1e-300)];
        let s = matrix_to_string(2, 2, &trip);
        let (r, c, back) = parse_triplets(Path::new("mem"), &s).unwrap();
        assert_eq!((r, c), (2, 2));
        assert_eq!(back, trip);
    }
}
