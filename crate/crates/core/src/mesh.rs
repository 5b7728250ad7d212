//! Conforming simplicial meshes of axis-aligned boxes.
//!
//! Only structured subdivisions are built here: every square of an `n x n`
//! grid is cut along its main diagonal in 2D, and every cube of an
//! `n x n x n` grid is cut into the six Kuhn tetrahedra sharing the main
//! diagonal in 3D. Both families are closed under red refinement, so all
//! cells stay similar to each other across levels.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, VmsError};

pub type Point = [f64; 3];

/// Default bound on `h_max / h_min` accepted by [`Mesh::validate`].
pub const DEFAULT_QUASI_UNIFORMITY_BOUND: f64 = 4.0;

/// Axis-aligned box `[lo, hi]`; the third coordinate is ignored in 2D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDomain {
    pub lo: Point,
    pub hi: Point,
}

impl BoxDomain {
    pub fn unit() -> Self {
        BoxDomain {
            lo: [0.0; 3],
            hi: [1.0; 3],
        }
    }

    pub fn new(lo: Point, hi: Point) -> Self {
        BoxDomain { lo, hi }
    }

    pub fn volume(&self, dim: usize) -> f64 {
        (0..dim).map(|d| self.hi[d] - self.lo[d]).product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFacet {
    pub vertices: Vec<usize>,
    /// Box face index: `2 * axis` for the low side, `2 * axis + 1` for the high side.
    pub tag: usize,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    vertices: Vec<Point>,
    cells: Vec<Vec<usize>>,
    boundary_facets: Vec<BoundaryFacet>,
    domain: BoxDomain,
    h_max: f64,
    h_min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub h_max: f64,
    pub h_min: f64,
    /// Smallest inradius / diameter ratio over all cells.
    pub min_shape_ratio: f64,
    /// `h_max / h_min`.
    pub quasi_uniformity: f64,
    /// Cells whose signed volume is not strictly positive.
    pub degenerate_cells: Vec<usize>,
}

impl QualityReport {
    pub fn is_valid(&self) -> bool {
        self.degenerate_cells.is_empty()
    }
}

impl Mesh {
    /// Builds a mesh from raw parts and checks all invariants.
    pub fn from_parts(
        dim: usize,
        vertices: Vec<Point>,
        cells: Vec<Vec<usize>>,
        domain: BoxDomain,
    ) -> Result<Mesh> {
        let mesh = Mesh::from_parts_unchecked(dim, vertices, cells, domain)?;
        mesh.validate(DEFAULT_QUASI_UNIFORMITY_BOUND)?;
        Ok(mesh)
    }

    /// Like [`Mesh::from_parts`] but skips the geometric invariants, so that
    /// [`mesh_quality`] can be pointed at broken input. Index ranges are
    /// still checked.
    pub fn from_parts_unchecked(
        dim: usize,
        vertices: Vec<Point>,
        cells: Vec<Vec<usize>>,
        domain: BoxDomain,
    ) -> Result<Mesh> {
        if dim != 2 && dim != 3 {
            return Err(VmsError::Config(format!("unsupported dimension {dim}")));
        }
        for (k, c) in cells.iter().enumerate() {
            if c.len() != dim + 1 {
                return Err(VmsError::Input(format!(
                    "cell {k} has {} vertices, expected {}",
                    c.len(),
                    dim + 1
                )));
            }
            if let Some(&v) = c.iter().find(|&&v| v >= vertices.len()) {
                return Err(VmsError::Input(format!("cell {k} references vertex {v}")));
            }
        }
        let mut mesh = Mesh {
            dim,
            vertices,
            cells,
            boundary_facets: Vec::new(),
            domain,
            h_max: 0.0,
            h_min: 0.0,
        };
        mesh.boundary_facets = mesh.find_boundary_facets();
        let (h_min, h_max) = (0..mesh.cells.len())
            .map(|k| mesh.cell_diameter(k))
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
        mesh.h_min = h_min;
        mesh.h_max = h_max;
        Ok(mesh)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn cell(&self, k: usize) -> &[usize] {
        &self.cells[k]
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary_facets
    }

    pub fn domain(&self) -> BoxDomain {
        self.domain
    }

    /// Mesh size `h = max_K diam K`.
    pub fn h(&self) -> f64 {
        self.h_max
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn h_min(&self) -> f64 {
        self.h_min
    }

    pub fn cell_points(&self, k: usize) -> Vec<Point> {
        self.cells[k].iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn signed_volume(&self, k: usize) -> f64 {
        let p = self.cell_points(k);
        simplex_signed_volume(self.dim, &p)
    }

    pub fn cell_diameter(&self, k: usize) -> f64 {
        let c = &self.cells[k];
        let mut d: f64 = 0.0;
        for i in 0..c.len() {
            for j in i + 1..c.len() {
                d = d.max(dist(&self.vertices[c[i]], &self.vertices[c[j]]));
            }
        }
        d
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.n_cells()).map(|k| self.signed_volume(k).abs()).sum()
    }

    /// Vertices lying on the boundary of the box.
    pub fn boundary_vertex_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n_vertices()];
        for f in &self.boundary_facets {
            for &v in &f.vertices {
                mask[v] = true;
            }
        }
        mask
    }

    fn find_boundary_facets(&self) -> Vec<BoundaryFacet> {
        let mut count: HashMap<Vec<usize>, (usize, Vec<usize>)> = HashMap::new();
        let mut order = Vec::new();
        for c in &self.cells {
            for skip in 0..c.len() {
                let facet: Vec<usize> = c
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != skip)
                    .map(|(_, &v)| v)
                    .collect();
                let mut key = facet.clone();
                key.sort_unstable();
                let e = count.entry(key.clone()).or_insert_with(|| {
                    order.push(key);
                    (0, facet)
                });
                e.0 += 1;
            }
        }
        order
            .into_iter()
            .filter_map(|key| {
                let (n, facet) = &count[&key];
                if *n != 1 {
                    return None;
                }
                let tag = self.facet_tag(facet).unwrap_or(usize::MAX);
                Some(BoundaryFacet {
                    vertices: facet.clone(),
                    tag,
                })
            })
            .collect()
    }

    fn facet_tag(&self, facet: &[usize]) -> Option<usize> {
        let scale = (0..self.dim)
            .map(|d| self.domain.hi[d] - self.domain.lo[d])
            .fold(0.0f64, f64::max);
        let tol = 1e-12 * scale.max(1.0);
        for axis in 0..self.dim {
            for (side, plane) in [self.domain.lo[axis], self.domain.hi[axis]]
                .into_iter()
                .enumerate()
            {
                if facet
                    .iter()
                    .all(|&v| (self.vertices[v][axis] - plane).abs() <= tol)
                {
                    return Some(2 * axis + side);
                }
            }
        }
        None
    }

    /// Checks positivity, facet conformity and quasi-uniformity.
    pub fn validate(&self, quasi_uniformity_bound: f64) -> Result<()> {
        let q = mesh_quality(self);
        if !q.degenerate_cells.is_empty() {
            return Err(VmsError::Invariant(format!(
                "{} cells with nonpositive volume (first: {})",
                q.degenerate_cells.len(),
                q.degenerate_cells[0]
            )));
        }
        let mut count: HashMap<Vec<usize>, usize> = HashMap::new();
        for c in &self.cells {
            for skip in 0..c.len() {
                let mut key: Vec<usize> = c
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != skip)
                    .map(|(_, &v)| v)
                    .collect();
                key.sort_unstable();
                *count.entry(key).or_default() += 1;
            }
        }
        if let Some((f, n)) = count.iter().find(|(_, &n)| n > 2) {
            return Err(VmsError::Invariant(format!(
                "facet {f:?} shared by {n} cells"
            )));
        }
        if let Some(f) = self.boundary_facets.iter().find(|f| f.tag == usize::MAX) {
            return Err(VmsError::Invariant(format!(
                "facet {:?} has a single neighbour but is not on the domain boundary",
                f.vertices
            )));
        }
        if q.quasi_uniformity > quasi_uniformity_bound {
            return Err(VmsError::Invariant(format!(
                "quasi-uniformity ratio {} exceeds {}",
                q.quasi_uniformity, quasi_uniformity_bound
            )));
        }
        Ok(())
    }

    /// Dumps the mesh as a VTK legacy ASCII unstructured grid.
    pub fn write_vtk(&self, path: &Path) -> Result<()> {
        let mut s = String::new();
        self.vtk_geometry(&mut s, "vmsns mesh");
        std::fs::write(path, s).map_err(|e| VmsError::io(path, e))
    }

    pub(crate) fn vtk_geometry(&self, s: &mut String, title: &str) {
        let _ = writeln!(s, "# vtk DataFile Version 3.0");
        let _ = writeln!(s, "{title}");
        let _ = writeln!(s, "ASCII");
        let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
        let _ = writeln!(s, "POINTS {} double", self.n_vertices());
        for p in &self.vertices {
            let _ = writeln!(s, "{:e} {:e} {:e}", p[0], p[1], p[2]);
        }
        let nv = self.dim + 1;
        let _ = writeln!(s, "CELLS {} {}", self.n_cells(), self.n_cells() * (nv + 1));
        for c in &self.cells {
            let _ = write!(s, "{nv}");
            for v in c {
                let _ = write!(s, " {v}");
            }
            let _ = writeln!(s);
        }
        let _ = writeln!(s, "CELL_TYPES {}", self.n_cells());
        let ty = if self.dim == 2 { 5 } else { 10 };
        for _ in 0..self.n_cells() {
            let _ = writeln!(s, "{ty}");
        }
    }
}

fn dist(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn simplex_signed_volume(dim: usize, p: &[Point]) -> f64 {
    let e1 = sub(&p[1], &p[0]);
    let e2 = sub(&p[2], &p[0]);
    if dim == 2 {
        0.5 * (e1[0] * e2[1] - e1[1] * e2[0])
    } else {
        let e3 = sub(&p[3], &p[0]);
        let det = e1[0] * (e2[1] * e3[2] - e2[2] * e3[1]) - e1[1] * (e2[0] * e3[2] - e2[2] * e3[0])
            + e1[2] * (e2[0] * e3[1] - e2[1] * e3[0]);
        det / 6.0
    }
}

fn facet_measure(dim: usize, p: &[Point]) -> f64 {
    if dim == 2 {
        dist(&p[0], &p[1])
    } else {
        let a = sub(&p[1], &p[0]);
        let b = sub(&p[2], &p[0]);
        let c = [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ];
        0.5 * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
    }
}

/// Structured simplicial mesh of `domain` with `n` cells per side.
pub fn build_structured(dim: usize, n: usize, domain: BoxDomain) -> Result<Mesh> {
    if n == 0 {
        return Err(VmsError::Config("cells per side must be at least 1".into()));
    }
    if dim != 2 && dim != 3 {
        return Err(VmsError::Config(format!("unsupported dimension {dim}")));
    }
    for d in 0..dim {
        let w = domain.hi[d] - domain.lo[d];
        if !(w > 0.0 && w.is_finite()) {
            return Err(VmsError::Config(format!(
                "box side {d} has nonpositive length {w}"
            )));
        }
    }
    let coord = |d: usize, i: usize| {
        if i == n {
            domain.hi[d]
        } else {
            domain.lo[d] + (domain.hi[d] - domain.lo[d]) * i as f64 / n as f64
        }
    };
    let np = n + 1;
    let mut vertices = Vec::new();
    let mut cells = Vec::new();
    if dim == 2 {
        for j in 0..np {
            for i in 0..np {
                vertices.push([coord(0, i), coord(1, j), 0.0]);
            }
        }
        let id = |i: usize, j: usize| i + np * j;
        for j in 0..n {
            for i in 0..n {
                let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
                cells.push(vec![v00, v10, v11]);
                cells.push(vec![v00, v11, v01]);
            }
        }
    } else {
        for k in 0..np {
            for j in 0..np {
                for i in 0..np {
                    vertices.push([coord(0, i), coord(1, j), coord(2, k)]);
                }
            }
        }
        let id = |i: [usize; 3]| i[0] + np * (i[1] + np * i[2]);
        const PERMS: [[usize; 3]; 6] = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    for perm in PERMS {
                        let mut idx = [i, j, k];
                        let mut tet = vec![id(idx)];
                        for axis in perm {
                            idx[axis] += 1;
                            tet.push(id(idx));
                        }
                        cells.push(tet);
                    }
                }
            }
        }
        orient_cells(dim, &vertices, &mut cells);
    }
    Mesh::from_parts(dim, vertices, cells, domain)
}

fn orient_cells(dim: usize, vertices: &[Point], cells: &mut [Vec<usize>]) {
    for c in cells.iter_mut() {
        let p: Vec<Point> = c.iter().map(|&v| vertices[v]).collect();
        if simplex_signed_volume(dim, &p) < 0.0 {
            c.swap(dim - 1, dim);
        }
    }
}

/// Red refinement: every cell is split into `2^dim` children through its
/// edge midpoints.
pub fn refine_uniform(m: &Mesh) -> Mesh {
    let mut vertices = m.vertices.clone();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
        let key = (a.min(b), a.max(b));
        *midpoint.entry(key).or_insert_with(|| {
            let (pa, pb) = (vertices[a], vertices[b]);
            vertices.push([
                0.5 * (pa[0] + pb[0]),
                0.5 * (pa[1] + pb[1]),
                0.5 * (pa[2] + pb[2]),
            ]);
            vertices.len() - 1
        })
    };
    let mut cells = Vec::with_capacity(m.n_cells() << m.dim);
    for c in &m.cells {
        if m.dim == 2 {
            let (a, b, cc) = (c[0], c[1], c[2]);
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, cc, &mut vertices);
            let ca = mid(cc, a, &mut vertices);
            cells.push(vec![a, ab, ca]);
            cells.push(vec![ab, b, bc]);
            cells.push(vec![ca, bc, cc]);
            cells.push(vec![ab, bc, ca]);
        } else {
            // Bey's ordering: sort along the Kuhn path so that children of
            // Kuhn tetrahedra are Kuhn tetrahedra again.
            let mut x = c.clone();
            let key = |v: usize| {
                let p = m.vertices[v];
                p[0] + p[1] + p[2]
            };
            x.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
            let mut x_ = [[0usize; 4]; 4];
            for i in 0..4 {
                x_[i][i] = x[i];
                for j in i + 1..4 {
                    let v = mid(x[i], x[j], &mut vertices);
                    x_[i][j] = v;
                    x_[j][i] = v;
                }
            }
            let e = |i: usize, j: usize| x_[i][j];
            cells.push(vec![e(0, 0), e(0, 1), e(0, 2), e(0, 3)]);
            cells.push(vec![e(0, 1), e(1, 1), e(1, 2), e(1, 3)]);
            cells.push(vec![e(0, 2), e(1, 2), e(2, 2), e(2, 3)]);
            cells.push(vec![e(0, 3), e(1, 3), e(2, 3), e(3, 3)]);
            cells.push(vec![e(0, 1), e(0, 2), e(0, 3), e(1, 3)]);
            cells.push(vec![e(0, 1), e(0, 2), e(1, 2), e(1, 3)]);
            cells.push(vec![e(0, 2), e(0, 3), e(1, 3), e(2, 3)]);
            cells.push(vec![e(0, 2), e(1, 2), e(1, 3), e(2, 3)]);
        }
    }
    orient_cells(m.dim, &vertices, &mut cells);
    Mesh::from_parts_unchecked(m.dim, vertices, cells, m.domain)
        .expect("refinement of a valid mesh keeps indices in range")
}

pub fn mesh_quality(m: &Mesh) -> QualityReport {
    let mut min_shape_ratio = f64::INFINITY;
    let mut degenerate_cells = Vec::new();
    for k in 0..m.n_cells() {
        let p = m.cell_points(k);
        let vol = simplex_signed_volume(m.dim, &p);
        if !(vol > 0.0) {
            degenerate_cells.push(k);
            min_shape_ratio = 0.0;
            continue;
        }
        let surface: f64 = (0..=m.dim)
            .map(|skip| {
                let f: Vec<Point> = p
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != skip)
                    .map(|(_, &q)| q)
                    .collect();
                facet_measure(m.dim, &f)
            })
            .sum();
        let inradius = m.dim as f64 * vol / surface;
        min_shape_ratio = min_shape_ratio.min(inradius / m.cell_diameter(k));
    }
    let quasi_uniformity = if m.h_min > 0.0 {
        m.h_max / m.h_min
    } else {
        f64::INFINITY
    };
    QualityReport {
        h_max: m.h_max,
        h_min: m.h_min,
        min_shape_ratio,
        quasi_uniformity,
        degenerate_cells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(dim: usize, n: usize) -> Mesh {
        build_structured(dim, n, BoxDomain::unit()).unwrap()
    }

    #[test]
    fn minimal_meshes() {
        let m = unit(2, 1);
        assert_eq!((m.n_cells(), m.n_vertices()), (2, 4));
        let m = unit(3, 1);
        assert_eq!((m.n_cells(), m.n_vertices()), (6, 8));
        assert!((m.total_volume() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn criss_cross_counts() {
        let m = unit(2, 4);
        assert_eq!(m.n_cells(), 32);
        assert!((m.h_max() - 2f64.sqrt() / 4.0).abs() < 1e-15);
        assert_eq!(m.boundary_facets().len(), 16);
    }

    #[test]
    fn bad_configuration() {
        assert!(matches!(
            build_structured(2, 0, BoxDomain::unit()),
            Err(VmsError::Config(_))
        ));
        let flat = BoxDomain::new([0.0; 3], [1.0, 0.0, 1.0]);
        assert!(matches!(build_structured(2, 2, flat), Err(VmsError::Config(_))));
    }

    #[test]
    fn refinement_halves_h_and_keeps_volume() {
        for dim in [2, 3] {
            let m = unit(dim, 1);
            let mut r = m.clone();
            for level in 1..=2 {
                let prev_h = r.h_max();
                r = refine_uniform(&r);
                assert_eq!(r.n_cells(), m.n_cells() << (dim * level));
                assert!((r.h_max() - prev_h / 2.0).abs() < 1e-14);
                assert!((r.total_volume() - 1.0).abs() < 1e-12);
                r.validate(DEFAULT_QUASI_UNIFORMITY_BOUND).unwrap();
                let q = mesh_quality(&r);
                assert!((q.quasi_uniformity - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn refinement_matches_structured_family() {
        let r = refine_uniform(&unit(2, 2));
        let s = unit(2, 4);
        let q1 = mesh_quality(&r);
        let q2 = mesh_quality(&s);
        assert!((q1.min_shape_ratio - q2.min_shape_ratio).abs() < 1e-12);
        let r3 = refine_uniform(&unit(3, 1));
        let s3 = unit(3, 2);
        assert!((mesh_quality(&r3).min_shape_ratio - mesh_quality(&s3).min_shape_ratio).abs() < 1e-12);
    }

    #[test]
    fn equilateral_shape_ratio() {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, 3f64.sqrt() / 2.0, 0.0]];
        let m = Mesh::from_parts_unchecked(2, v, vec![vec![0, 1, 2]], BoxDomain::unit()).unwrap();
        let q = mesh_quality(&m);
        assert!((q.min_shape_ratio - 1.0 / (2.0 * 3f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn degenerate_cell_is_reported() {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        let m = Mesh::from_parts_unchecked(2, v.clone(), vec![vec![0, 1, 2]], BoxDomain::unit())
            .unwrap();
        let q = mesh_quality(&m);
        assert_eq!(q.degenerate_cells, vec![0]);
        assert!(!q.is_valid());
        assert!(Mesh::from_parts(2, v, vec![vec![0, 1, 2]], BoxDomain::unit()).is_err());
    }

    #[test]
    fn boundary_tags() {
        let m = unit(3, 2);
        let mut per_tag = [0usize; 6];
        for f in m.boundary_facets() {
            per_tag[f.tag] += 1;
        }
        assert_eq!(per_tag, [8; 6]);
    }
}
