//! Simplicial meshes — closed polygons in the plane (d = 1) and triangle
//! meshes in space (d = 2) — together with the per-element normal map and its
//! derivative tensors, discrete vertex normals, and plain-text mesh I/O.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A simplicial surface of dimension `d` embedded in `R^{d+1}`: a closed
/// polygonal curve for `d = 1`, a triangle mesh for `d = 2`. Coordinates are
/// stored flat, vertex-major (`m = d + 1` components per vertex).
#[derive(Debug, Clone)]
pub struct SimplicialSurface {
    d: usize,
    coords: Vec<f64>,
    conn: Vec<usize>,
    closed_curve: bool,
}

impl SimplicialSurface {
    /// Builds a closed polygonal curve; element `i` connects vertices
    /// `i` and `(i + 1) mod n`.
    pub fn closed_curve(points: &[[f64; 2]]) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "closed curve needs at least 3 vertices, got {}",
                points.len()
            )));
        }
        let n = points.len();
        let mut coords = Vec::with_capacity(2 * n);
        for p in points {
            coords.extend_from_slice(p);
        }
        let mut conn = Vec::with_capacity(2 * n);
        for i in 0..n {
            conn.push(i);
            conn.push((i + 1) % n);
        }
        let s = SimplicialSurface { d: 1, coords, conn, closed_curve: true };
        s.validate()?;
        Ok(s)
    }

    /// Builds a triangle mesh (d = 2); not required to be closed.
    pub fn triangle_mesh(points: &[[f64; 3]], tris: &[[usize; 3]]) -> Result<Self> {
        if tris.is_empty() {
            return Err(Error::InvalidInput("triangle mesh needs at least one element".into()));
        }
        let mut coords = Vec::with_capacity(3 * points.len());
        for p in points {
            coords.extend_from_slice(p);
        }
        let conn = tris.iter().flatten().copied().collect();
        let s = SimplicialSurface { d: 2, coords, conn, closed_curve: false };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        let m = self.m();
        if self.coords.len() % m != 0 {
            return Err(Error::InvalidInput("coordinate array not a multiple of the component count".into()));
        }
        if self.coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("mesh has non-finite coordinates".into()));
        }
        let nv = self.nv();
        for e in 0..self.ne() {
            let el = self.element(e);
            for &v in el {
                if v >= nv {
                    return Err(Error::InvalidInput(format!("element {e} references vertex {v} >= {nv}")));
                }
            }
            for a in 0..el.len() {
                for b in (a + 1)..el.len() {
                    if el[a] == el[b] {
                        return Err(Error::InvalidInput(format!("element {e} has repeated vertex {}", el[a])));
                    }
                }
            }
        }
        if self.d == 1 {
            if self.ne() != nv {
                return Err(Error::InvalidInput("closed curve must have as many elements as vertices".into()));
            }
            for e in 0..self.ne() {
                let el = self.element(e);
                if el[0] != e || el[1] != (e + 1) % nv {
                    return Err(Error::InvalidInput(format!(
                        "curve element {e} must connect vertices {e} and {}",
                        (e + 1) % nv
                    )));
                }
            }
        }
        let dm = self.degeneracy_threshold();
        for e in 0..self.ne() {
            let nm = element_normal_map(self.d, &self.element_coords(e));
            if norm3(&nm.r, self.m()) < dm {
                return Err(Error::NearSingular(format!("element {e} is degenerate")));
            }
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Components per vertex (`d + 1`).
    pub fn m(&self) -> usize {
        self.d + 1
    }

    pub fn nv(&self) -> usize {
        self.coords.len() / self.m()
    }

    pub fn ne(&self) -> usize {
        self.conn.len() / (self.d + 1)
    }

    pub fn is_closed_curve(&self) -> bool {
        self.closed_curve
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        let m = self.m();
        &self.coords[m * i..m * (i + 1)]
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let k = self.d + 1;
        &self.conn[k * e..k * (e + 1)]
    }

    /// Local coordinate block of an element, padded to 3 components.
    pub fn element_coords(&self, e: usize) -> [[f64; 3]; 3] {
        let m = self.m();
        let mut out = [[0.0; 3]; 3];
        for (a, &v) in self.element(e).iter().enumerate() {
            out[a][..m].copy_from_slice(self.vertex(v));
        }
        out
    }

    /// Same mesh connectivity with replaced coordinates. Checks shape and
    /// finiteness; degeneracy is the caller's concern (trial states in a line
    /// search may be rejected rather than constructed invalid).
    pub fn with_coords(&self, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != self.coords.len() {
            return Err(Error::InvalidInput(format!(
                "coordinate array has length {}, expected {}",
                coords.len(),
                self.coords.len()
            )));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("replacement coordinates not finite".into()));
        }
        Ok(SimplicialSurface { d: self.d, coords, conn: self.conn.clone(), closed_curve: self.closed_curve })
    }

    pub fn same_connectivity(&self, other: &SimplicialSurface) -> bool {
        self.d == other.d && self.conn == other.conn
    }

    /// Maximum element diameter.
    pub fn mesh_size(&self) -> f64 {
        let m = self.m();
        let mut h = 0.0_f64;
        for e in 0..self.ne() {
            let el = self.element(e);
            for a in 0..el.len() {
                for b in (a + 1)..el.len() {
                    let pa = self.vertex(el[a]);
                    let pb = self.vertex(el[b]);
                    let len: f64 = (0..m).map(|c| (pa[c] - pb[c]).powi(2)).sum::<f64>().sqrt();
                    h = h.max(len);
                }
            }
        }
        h
    }

    pub fn bbox_diameter(&self) -> f64 {
        let m = self.m();
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for i in 0..self.nv() {
            let p = self.vertex(i);
            for c in 0..m {
                lo[c] = lo[c].min(p[c]);
                hi[c] = hi[c].max(p[c]);
            }
        }
        (0..m).map(|c| (hi[c] - lo[c]).powi(2)).sum::<f64>().sqrt()
    }

    /// Scale-aware degeneracy threshold for element normals.
    pub fn degeneracy_threshold(&self) -> f64 {
        1e-12 * self.bbox_diameter().max(f64::MIN_POSITIVE)
    }

    /// Smallest element-normal magnitude over the mesh.
    pub fn min_element_normal(&self) -> f64 {
        let mut worst = f64::INFINITY;
        for e in 0..self.ne() {
            let nm = element_normal_map(self.d, &self.element_coords(e));
            worst = worst.min(norm3(&nm.r, self.m()));
        }
        worst
    }

    /// Outward unit normal at vertex `i` of a counterclockwise closed curve:
    /// length-weighted average of the two incident element normals, oriented
    /// outward.
    pub fn vertex_normal(&self, i: usize) -> Result<[f64; 2]> {
        if self.d != 1 {
            return Err(Error::Unsupported("vertex normals are defined for curves only".into()));
        }
        let n = self.nv();
        let prev = (i + n - 1) % n;
        let dm = self.degeneracy_threshold();
        let mut acc = [0.0f64; 2];
        for e in [prev, i] {
            let nm = element_normal_map(1, &self.element_coords(e));
            if norm3(&nm.r, 2) < dm {
                return Err(Error::NearSingular(format!("edge {e} incident to vertex {i} is degenerate")));
            }
            acc[0] += nm.r[0];
            acc[1] += nm.r[1];
        }
        let len = (acc[0] * acc[0] + acc[1] * acc[1]).sqrt();
        if len < dm {
            return Err(Error::NearSingular(format!("vertex {i} has cancelling edge normals")));
        }
        // element normals point inward on counterclockwise curves
        Ok([-acc[0] / len, -acc[1] / len])
    }

    /// Lumped vertex weight: half the total length of incident edges (d = 1).
    pub fn lumped_vertex_weight(&self, i: usize) -> Result<f64> {
        if self.d != 1 {
            return Err(Error::Unsupported("lumped weights are defined for curves only".into()));
        }
        let n = self.nv();
        let mut acc = 0.0;
        for e in [(i + n - 1) % n, i] {
            let el = self.element(e);
            let a = self.vertex(el[0]);
            let b = self.vertex(el[1]);
            acc += ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        }
        Ok(0.5 * acc)
    }

    /// Signed enclosed area of a closed curve (positive for counterclockwise).
    pub fn enclosed_area(&self) -> Result<f64> {
        if self.d != 1 {
            return Err(Error::Unsupported("enclosed area is defined for curves only".into()));
        }
        let n = self.nv();
        let mut acc = 0.0;
        for i in 0..n {
            let a = self.vertex(i);
            let b = self.vertex((i + 1) % n);
            acc += a[0] * b[1] - b[0] * a[1];
        }
        Ok(0.5 * acc)
    }

    pub fn total_edge_length(&self) -> f64 {
        let m = self.m();
        let mut acc = 0.0;
        for e in 0..self.ne() {
            let el = self.element(e);
            if self.d == 1 {
                let a = self.vertex(el[0]);
                let b = self.vertex(el[1]);
                acc += (0..m).map(|c| (a[c] - b[c]).powi(2)).sum::<f64>().sqrt();
            }
        }
        acc
    }

    /// Plain-text format: header `d n_vertices n_elements`, one coordinate
    /// line per vertex, one index line per element.
    pub fn write_mesh<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{} {} {}", self.d, self.nv(), self.ne())?;
        for i in 0..self.nv() {
            let p = self.vertex(i);
            let line: Vec<String> = p.iter().map(|x| format!("{x}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        for e in 0..self.ne() {
            let line: Vec<String> = self.element(e).iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn read_mesh<R: BufRead>(r: &mut R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty mesh file".into()))??;
        let head: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| Error::InvalidInput(format!("bad mesh header: {header}"))))
            .collect::<Result<_>>()?;
        if head.len() != 3 {
            return Err(Error::InvalidInput(format!("bad mesh header: {header}")));
        }
        let (d, nv, ne) = (head[0], head[1], head[2]);
        if !(1..=2).contains(&d) {
            return Err(Error::InvalidInput(format!("unsupported mesh dimension {d}")));
        }
        let m = d + 1;
        let mut coords = Vec::with_capacity(nv * m);
        for _ in 0..nv {
            let line = lines.next().ok_or_else(|| Error::InvalidInput("truncated mesh file".into()))??;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| Error::InvalidInput(format!("bad coordinate line: {line}"))))
                .collect::<Result<_>>()?;
            if vals.len() != m {
                return Err(Error::InvalidInput(format!("expected {m} coordinates per line, got {}", vals.len())));
            }
            coords.extend_from_slice(&vals);
        }
        let mut conn = Vec::with_capacity(ne * (d + 1));
        for _ in 0..ne {
            let line = lines.next().ok_or_else(|| Error::InvalidInput("truncated mesh file".into()))??;
            let vals: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|_| Error::InvalidInput(format!("bad element line: {line}"))))
                .collect::<Result<_>>()?;
            if vals.len() != d + 1 {
                return Err(Error::InvalidInput(format!("expected {} indices per element, got {}", d + 1, vals.len())));
            }
            conn.extend_from_slice(&vals);
        }
        let s = SimplicialSurface { d, coords, conn, closed_curve: d == 1 };
        s.validate()?;
        Ok(s)
    }

    pub fn write_mesh_file<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_mesh(&mut f)
    }

    pub fn read_mesh_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_mesh(&mut f)
    }

    /// CSV snapshot: one `x,y` row per vertex (curves only, no header).
    pub fn write_curve_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        if self.d != 1 {
            return Err(Error::Unsupported("CSV snapshots are defined for curves only".into()));
        }
        for i in 0..self.nv() {
            let p = self.vertex(i);
            writeln!(w, "{},{}", p[0], p[1])?;
        }
        Ok(())
    }
}

/// A per-vertex vector field in `R^{d+1}` aligned with a mesh's vertex list.
#[derive(Debug, Clone)]
pub struct NodalField {
    m: usize,
    data: Vec<f64>,
}

impl NodalField {
    pub fn zeros(surface: &SimplicialSurface) -> Self {
        NodalField { m: surface.m(), data: vec![0.0; surface.coords().len()] }
    }

    pub fn from_vec(data: Vec<f64>, m: usize) -> Result<Self> {
        if data.len() % m != 0 {
            return Err(Error::InvalidInput("field length is not a multiple of the component count".into()));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("field has non-finite entries".into()));
        }
        Ok(NodalField { m, data })
    }

    /// Vertex-wise difference of two coordinate vectors (`a - b`).
    pub fn difference(a: &SimplicialSurface, b: &SimplicialSurface) -> Result<Self> {
        if !a.same_connectivity(b) {
            return Err(Error::InvalidInput("surfaces have different connectivity".into()));
        }
        let data = a.coords().iter().zip(b.coords()).map(|(x, y)| x - y).collect();
        Ok(NodalField { m: a.m(), data })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn nv(&self) -> usize {
        self.data.len() / self.m
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.data[self.m * i..self.m * (i + 1)]
    }

    pub fn aligned_with(&self, surface: &SimplicialSurface) -> bool {
        self.m == surface.m() && self.data.len() == surface.coords().len()
    }
}

/// Element normal map and its derivatives with respect to the element's
/// vertex coordinates. For `d = 1` the normal is the 90-degree rotated edge
/// (outward on clockwise traversal; inward on counterclockwise curves), and
/// the map is linear so second derivatives vanish. For `d = 2` it is the
/// cross product of the edge vectors, quadratic in the coordinates. Third
/// derivatives vanish identically in both cases.
#[derive(Debug, Clone)]
pub struct NormalMap {
    pub m: usize,
    /// `r[w]`: normal component, scaled by the element measure.
    pub r: [f64; 3],
    /// `dr[w][j][s]`: derivative of `r[w]` w.r.t. coordinate `s` of node `j`.
    pub dr: [[[f64; 3]; 3]; 3],
    /// `d2r[w][j][s][l][t]`: second derivatives (zero for d = 1).
    pub d2r: [[[[[f64; 3]; 3]; 3]; 3]; 3],
}

pub fn element_normal_map(d: usize, x: &[[f64; 3]; 3]) -> NormalMap {
    let m = d + 1;
    let mut nm = NormalMap { m, r: [0.0; 3], dr: [[[0.0; 3]; 3]; 3], d2r: [[[[[0.0; 3]; 3]; 3]; 3]; 3] };
    match d {
        1 => {
            nm.r[0] = x[0][1] - x[1][1];
            nm.r[1] = x[1][0] - x[0][0];
            nm.dr[0][0][1] = 1.0;
            nm.dr[0][1][1] = -1.0;
            nm.dr[1][0][0] = -1.0;
            nm.dr[1][1][0] = 1.0;
        }
        2 => {
            let eps = levi_civita();
            for w in 0..3 {
                for u in 0..3 {
                    for v in 0..3 {
                        let e = eps[w][u][v];
                        if e == 0.0 {
                            continue;
                        }
                        nm.r[w] += e * (x[1][u] - x[0][u]) * (x[2][v] - x[0][v]);
                        for j in 0..3 {
                            let dj1 = delta(1, j) - delta(0, j);
                            let dj2 = delta(2, j) - delta(0, j);
                            nm.dr[w][j][u] += e * dj1 * (x[2][v] - x[0][v]);
                            nm.dr[w][j][v] += e * dj2 * (x[1][u] - x[0][u]);
                            for l in 0..3 {
                                let dl1 = delta(1, l) - delta(0, l);
                                let dl2 = delta(2, l) - delta(0, l);
                                nm.d2r[w][j][u][l][v] += e * dj1 * dl2;
                                nm.d2r[w][j][v][l][u] += e * dj2 * dl1;
                            }
                        }
                    }
                }
            }
        }
        _ => panic!("unsupported dimension {d}"),
    }
    nm
}

fn levi_civita() -> [[[f64; 3]; 3]; 3] {
    let mut e = [[[0.0; 3]; 3]; 3];
    e[0][1][2] = 1.0;
    e[1][2][0] = 1.0;
    e[2][0][1] = 1.0;
    e[0][2][1] = -1.0;
    e[2][1][0] = -1.0;
    e[1][0][2] = -1.0;
    e
}

fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

fn norm3(v: &[f64; 3], m: usize) -> f64 {
    (0..m).map(|c| v[c] * v[c]).sum::<f64>().sqrt()
}

/// Regular polygon on a circle of radius `r` (counterclockwise).
pub fn regular_polygon(r: f64, n: usize) -> Result<SimplicialSurface> {
    let pts: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * (i as f64) / (n as f64);
            [r * t.cos(), r * t.sin()]
        })
        .collect();
    SimplicialSurface::closed_curve(&pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_normal_map_matches_rotation() {
        let x = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0; 3]];
        let nm = element_normal_map(1, &x);
        assert_eq!(nm.r[0], 0.0);
        assert_eq!(nm.r[1], 1.0);
        // constant first derivatives
        assert_eq!(nm.dr[0][0][1], 1.0);
        assert_eq!(nm.dr[1][0][0], -1.0);
        assert_eq!(nm.dr[1][1][0], 1.0);
        assert_eq!(nm.dr[0][1][1], -1.0);
    }

    #[test]
    fn triangle_normal_is_cross_product() {
        let x = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let nm = element_normal_map(2, &x);
        assert_eq!(nm.r, [0.0, 0.0, 1.0]);
    }

    #[test]
    fn edge_normals_telescope_on_closed_curves() {
        let poly = regular_polygon(1.0, 17).unwrap();
        let mut acc = [0.0; 2];
        for e in 0..poly.ne() {
            let nm = element_normal_map(1, &poly.element_coords(e));
            acc[0] += nm.r[0];
            acc[1] += nm.r[1];
        }
        assert!(acc[0].abs() < 1e-14 && acc[1].abs() < 1e-14);
    }

    #[test]
    fn vertex_normals_point_outward() {
        let poly = regular_polygon(1.0, 16).unwrap();
        for i in 0..16 {
            let nu = poly.vertex_normal(i).unwrap();
            let p = poly.vertex(i);
            let radial = [p[0], p[1]];
            let dot = nu[0] * radial[0] + nu[1] * radial[1];
            assert!((dot - 1.0).abs() < 1e-12, "vertex {i} normal not radial: dot {dot}");
        }
        // unit square, corner (1,1) -> (1,1)/sqrt(2)
        let sq = SimplicialSurface::closed_curve(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        let nu = sq.vertex_normal(2).unwrap();
        let e = 1.0 / 2.0_f64.sqrt();
        assert!((nu[0] - e).abs() < 1e-14 && (nu[1] - e).abs() < 1e-14);
    }

    #[test]
    fn vertex_normals_rotate_with_the_polygon() {
        let pts: Vec<[f64; 2]> = vec![[1.2, 0.0], [0.4, 0.9], [-0.8, 0.6], [-1.0, -0.5], [0.3, -1.1]];
        let poly = SimplicialSurface::closed_curve(&pts).unwrap();
        let phi = 0.73_f64;
        let (c, s) = (phi.cos(), phi.sin());
        let rotated: Vec<[f64; 2]> = pts.iter().map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1]]).collect();
        let rpoly = SimplicialSurface::closed_curve(&rotated).unwrap();
        for i in 0..pts.len() {
            let nu = poly.vertex_normal(i).unwrap();
            let nur = rpoly.vertex_normal(i).unwrap();
            let expect = [c * nu[0] - s * nu[1], s * nu[0] + c * nu[1]];
            assert!((nur[0] - expect[0]).abs() < 1e-12 && (nur[1] - expect[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn mesh_size_examples() {
        let poly = regular_polygon(1.0, 64).unwrap();
        let expect = 2.0 * (std::f64::consts::PI / 64.0).sin();
        assert!((poly.mesh_size() - expect).abs() < 1e-14);
        assert!((expect - 0.0981).abs() < 1e-4);
        let sq = SimplicialSurface::closed_curve(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        assert!((sq.mesh_size() - 1.0).abs() < 1e-15);
        // scaling doubles h
        let scaled: Vec<[f64; 2]> = (0..64)
            .map(|i| {
                let p = poly.vertex(i);
                [2.0 * p[0], 2.0 * p[1]]
            })
            .collect();
        let poly2 = SimplicialSurface::closed_curve(&scaled).unwrap();
        assert!((poly2.mesh_size() - 2.0 * poly.mesh_size()).abs() < 1e-13);
    }

    #[test]
    fn mesh_roundtrip() {
        let poly = regular_polygon(0.7, 9).unwrap();
        let mut buf = Vec::new();
        poly.write_mesh(&mut buf).unwrap();
        let back = SimplicialSurface::read_mesh(&mut std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(back.nv(), 9);
        for i in 0..9 {
            assert_eq!(back.vertex(i), poly.vertex(i));
        }
    }

    #[test]
    fn invalid_meshes_are_rejected() {
        // repeated vertex in an element
        assert!(SimplicialSurface::closed_curve(&[[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]]).is_err());
        // degenerate (collinear duplicate points)
        let r = SimplicialSurface::closed_curve(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1e-16]]);
        assert!(r.is_err());
    }

    #[test]
    fn convex_polygon_normals_face_away_from_centroid() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        // random convex polygon: sorted angles on a random-radius star
        let mut angles: Vec<f64> = (0..12).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let pts: Vec<[f64; 2]> = angles.iter().map(|t| [2.0 * t.cos(), 2.0 * t.sin()]).collect();
        if let Ok(poly) = SimplicialSurface::closed_curve(&pts) {
            let cx: f64 = pts.iter().map(|p| p[0]).sum::<f64>() / pts.len() as f64;
            let cy: f64 = pts.iter().map(|p| p[1]).sum::<f64>() / pts.len() as f64;
            for i in 0..poly.nv() {
                let nu = poly.vertex_normal(i).unwrap();
                let p = poly.vertex(i);
                assert!(nu[0] * (p[0] - cx) + nu[1] * (p[1] - cy) > 0.0);
            }
        }
    }
}
