//! Conforming simplicial meshes with tagged boundary facets.

use std::collections::HashMap;

use crate::error::{Error, Result};

pub type Point = [f64; 3];

/// Boundary condition carried by a boundary facet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FacetTag {
    Dirichlet,
    Neumann,
}

impl FacetTag {
    pub fn letter(self) -> char {
        match self {
            FacetTag::Dirichlet => 'D',
            FacetTag::Neumann => 'N',
        }
    }
}

/// Cached per-cell geometry of a simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGeometry {
    pub volume: f64,
    /// Gradients of the barycentric coordinates, one per local vertex.
    pub grads: [[f64; 3]; 4],
    pub centroid: Point,
    pub diameter: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFacet {
    /// Facet vertices; the first `dim` entries are used.
    pub vertices: [usize; 3],
    pub tag: FacetTag,
    /// The unique cell containing the facet.
    pub cell: usize,
    pub measure: f64,
    pub normal: Point,
    pub centroid: Point,
}

impl BoundaryFacet {
    pub fn nodes(&self, dim: usize) -> &[usize] {
        &self.vertices[..dim]
    }
}

/// A conforming simplicial mesh of a bounded domain in `R^d`, `d ≤ 3`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshDomain {
    dim: usize,
    coords: Vec<Point>,
    cells: Vec<[usize; 4]>,
    geometry: Vec<CellGeometry>,
    facets: Vec<BoundaryFacet>,
    vertex_cells: Vec<Vec<usize>>,
    dirichlet_node: Vec<bool>,
    boundary_node: Vec<bool>,
}

fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dist(a: &Point, b: &Point) -> f64 {
    let d = sub(a, b);
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn det(dim: usize, cols: &[Point]) -> f64 {
    match dim {
        1 => cols[0][0],
        2 => cols[0][0] * cols[1][1] - cols[1][0] * cols[0][1],
        _ => {
            let c = cross(&cols[1], &cols[2]);
            cols[0][0] * c[0] + cols[0][1] * c[1] + cols[0][2] * c[2]
        }
    }
}

fn factorial(d: usize) -> f64 {
    (1..=d).product::<usize>() as f64
}

fn cell_geometry(dim: usize, coords: &[Point], cell: &[usize]) -> Result<CellGeometry> {
    let p0 = coords[cell[0]];
    let edges: Vec<Point> = (1..=dim).map(|i| sub(&coords[cell[i]], &p0)).collect();
    let dj = det(dim, &edges);
    if !(dj > 0.0) {
        return Err(Error::Domain(format!("degenerate or inverted cell {cell:?}")));
    }
    // Rows of J⁻¹ are the gradients of λ_1..λ_d, where J has the edge
    // vectors as columns.
    let mut grads = [[0.0; 3]; 4];
    match dim {
        1 => grads[1][0] = 1.0 / edges[0][0],
        2 => {
            let (a, b, c, d) = (edges[0][0], edges[1][0], edges[0][1], edges[1][1]);
            grads[1] = [d / dj, -b / dj, 0.0];
            grads[2] = [-c / dj, a / dj, 0.0];
        }
        _ => {
            let c12 = cross(&edges[1], &edges[2]);
            let c20 = cross(&edges[2], &edges[0]);
            let c01 = cross(&edges[0], &edges[1]);
            for k in 0..3 {
                grads[1][k] = c12[k] / dj;
                grads[2][k] = c20[k] / dj;
                grads[3][k] = c01[k] / dj;
            }
        }
    }
    for k in 0..dim {
        grads[0][k] = -(1..=dim).map(|i| grads[i][k]).sum::<f64>();
    }
    let mut centroid = [0.0; 3];
    for &v in cell {
        for k in 0..3 {
            centroid[k] += coords[v][k] / (dim + 1) as f64;
        }
    }
    let mut diameter: f64 = 0.0;
    for i in 0..cell.len() {
        for j in 0..i {
            diameter = diameter.max(dist(&coords[cell[i]], &coords[cell[j]]));
        }
    }
    Ok(CellGeometry {
        volume: dj / factorial(dim),
        grads,
        centroid,
        diameter,
    })
}

/// Local facets of a simplex: all vertex subsets of size `dim`, paired
/// with the index of the opposite local vertex.
fn local_facets(dim: usize) -> Vec<(Vec<usize>, usize)> {
    (0..=dim)
        .map(|skip| ((0..=dim).filter(|&i| i != skip).collect(), skip))
        .collect()
}

fn facet_measure_normal(dim: usize, pts: &[Point], opposite: &Point) -> (f64, Point) {
    let (measure, mut normal) = match dim {
        1 => (1.0, [1.0, 0.0, 0.0]),
        2 => {
            let t = sub(&pts[1], &pts[0]);
            let l = (t[0] * t[0] + t[1] * t[1]).sqrt();
            (l, [t[1] / l, -t[0] / l, 0.0])
        }
        _ => {
            let c = cross(&sub(&pts[1], &pts[0]), &sub(&pts[2], &pts[0]));
            let l = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
            (0.5 * l, [c[0] / l, c[1] / l, c[2] / l])
        }
    };
    let away = sub(&pts[0], opposite);
    if away[0] * normal[0] + away[1] * normal[1] + away[2] * normal[2] < 0.0 {
        normal = [-normal[0], -normal[1], -normal[2]];
    }
    (measure, normal)
}

/// Boundary facets of a cell list: `(sorted vertices, owning cell, opposite local vertex)`.
fn find_boundary(dim: usize, cells: &[[usize; 4]]) -> Vec<(Vec<usize>, usize, usize)> {
    let mut seen: HashMap<Vec<usize>, (usize, usize, usize)> = HashMap::new();
    let lf = local_facets(dim);
    for (c, cell) in cells.iter().enumerate() {
        for (local, opp) in &lf {
            let mut key: Vec<usize> = local.iter().map(|&i| cell[i]).collect();
            key.sort_unstable();
            seen.entry(key).and_modify(|e| e.2 += 1).or_insert((c, *opp, 1));
        }
    }
    let mut out: Vec<(Vec<usize>, usize, usize)> = seen
        .into_iter()
        .filter(|(_, v)| v.2 == 1)
        .map(|(k, v)| (k, v.0, v.1))
        .collect();
    out.sort();
    out
}

impl MeshDomain {
    /// Build a mesh from raw parts. Cells with negative orientation are
    /// reoriented; `facets` must tag every boundary facet exactly once.
    pub fn from_parts(
        dim: usize,
        coords: Vec<Point>,
        cells: Vec<Vec<usize>>,
        facets: Vec<(Vec<usize>, FacetTag)>,
    ) -> Result<Self> {
        let mut tags: HashMap<Vec<usize>, FacetTag> = HashMap::new();
        for (mut verts, tag) in facets {
            if verts.len() != dim {
                return Err(Error::Domain(format!("facet {verts:?} must have {dim} vertices")));
            }
            verts.sort_unstable();
            if tags.insert(verts.clone(), tag).is_some() {
                return Err(Error::Domain(format!("facet {verts:?} tagged twice")));
            }
        }
        Self::assemble(dim, coords, cells, |verts, _| {
            tags.remove(verts)
                .ok_or_else(|| Error::Domain(format!("boundary facet {verts:?} carries no tag")))
        })
        .and_then(|mesh| {
            if let Some(extra) = tags.keys().next() {
                return Err(Error::Domain(format!("tagged facet {extra:?} is not on the boundary")));
            }
            Ok(mesh)
        })
    }

    /// Build a mesh and tag each boundary facet through `tagger`, which
    /// receives the sorted facet vertices and the facet centroid.
    pub fn with_tagger<F>(dim: usize, coords: Vec<Point>, cells: Vec<Vec<usize>>, mut tagger: F) -> Result<Self>
    where
        F: FnMut(&[usize], &Point) -> Result<FacetTag>,
    {
        Self::assemble(dim, coords, cells, |verts, centroid| tagger(verts, centroid))
    }

    fn assemble<F>(dim: usize, coords: Vec<Point>, cells: Vec<Vec<usize>>, mut tagger: F) -> Result<Self>
    where
        F: FnMut(&[usize], &Point) -> Result<FacetTag>,
    {
        if !(1..=3).contains(&dim) {
            return Err(Error::Domain(format!("dimension {dim} unsupported")));
        }
        if cells.is_empty() {
            return Err(Error::Domain("mesh has no cells".into()));
        }
        if coords.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::Domain("non-finite vertex coordinate".into()));
        }
        let mut fixed = Vec::with_capacity(cells.len());
        for cell in cells {
            if cell.len() != dim + 1 {
                return Err(Error::Domain(format!("cell {cell:?} must have {} vertices", dim + 1)));
            }
            if let Some(&bad) = cell.iter().find(|&&v| v >= coords.len()) {
                return Err(Error::Domain(format!("cell references missing vertex {bad}")));
            }
            let mut c = [0usize; 4];
            c[..=dim].copy_from_slice(&cell);
            let p0 = coords[c[0]];
            let edges: Vec<Point> = (1..=dim).map(|i| sub(&coords[c[i]], &p0)).collect();
            if det(dim, &edges) < 0.0 {
                c.swap(0, 1);
            }
            fixed.push(c);
        }
        let geometry = fixed
            .iter()
            .map(|c| cell_geometry(dim, &coords, &c[..=dim]))
            .collect::<Result<Vec<_>>>()?;

        let mut facets = Vec::new();
        for (verts, cell, opp) in find_boundary(dim, &fixed) {
            let pts: Vec<Point> = verts.iter().map(|&v| coords[v]).collect();
            let (measure, normal) = facet_measure_normal(dim, &pts, &coords[fixed[cell][opp]]);
            let mut centroid = [0.0; 3];
            for p in &pts {
                for k in 0..3 {
                    centroid[k] += p[k] / dim as f64;
                }
            }
            let tag = tagger(&verts, &centroid)?;
            let mut vertices = [0usize; 3];
            vertices[..dim].copy_from_slice(&verts);
            facets.push(BoundaryFacet {
                vertices,
                tag,
                cell,
                measure,
                normal,
                centroid,
            });
        }

        let mut vertex_cells = vec![Vec::new(); coords.len()];
        for (c, cell) in fixed.iter().enumerate() {
            for &v in &cell[..=dim] {
                vertex_cells[v].push(c);
            }
        }
        if let Some(v) = vertex_cells.iter().position(|c| c.is_empty()) {
            return Err(Error::Domain(format!("vertex {v} belongs to no cell")));
        }
        let mut dirichlet_node = vec![false; coords.len()];
        let mut boundary_node = vec![false; coords.len()];
        for f in &facets {
            for &v in f.nodes(dim) {
                boundary_node[v] = true;
                if f.tag == FacetTag::Dirichlet {
                    dirichlet_node[v] = true;
                }
            }
        }
        Ok(MeshDomain {
            dim,
            coords,
            cells: fixed,
            geometry,
            facets,
            vertex_cells,
            dirichlet_node,
            boundary_node,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn n_vertices(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    #[inline]
    pub fn vertex(&self, v: usize) -> &Point {
        &self.coords[v]
    }

    pub fn vertices(&self) -> &[Point] {
        &self.coords
    }

    /// Vertex indices of cell `c` (positively oriented).
    #[inline]
    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c][..=self.dim]
    }

    #[inline]
    pub fn geometry(&self, c: usize) -> &CellGeometry {
        &self.geometry[c]
    }

    pub fn facets(&self) -> &[BoundaryFacet] {
        &self.facets
    }

    pub fn neumann_facets(&self) -> impl Iterator<Item = (usize, &BoundaryFacet)> {
        self.facets
            .iter()
            .enumerate()
            .filter(|(_, f)| f.tag == FacetTag::Neumann)
    }

    /// Cells containing vertex `v`.
    pub fn vertex_patch(&self, v: usize) -> &[usize] {
        &self.vertex_cells[v]
    }

    /// Nodes lying on a Dirichlet facet.
    pub fn dirichlet_nodes(&self) -> &[bool] {
        &self.dirichlet_node
    }

    pub fn boundary_nodes(&self) -> &[bool] {
        &self.boundary_node
    }

    pub fn has_dirichlet(&self) -> bool {
        self.facets.iter().any(|f| f.tag == FacetTag::Dirichlet)
    }

    pub fn has_neumann(&self) -> bool {
        self.facets.iter().any(|f| f.tag == FacetTag::Neumann)
    }

    /// Total measure `|Ω|`.
    pub fn measure(&self) -> f64 {
        self.geometry.iter().map(|g| g.volume).sum()
    }

    pub fn min_cell_diameter(&self) -> f64 {
        self.geometry.iter().map(|g| g.diameter).fold(f64::INFINITY, f64::min)
    }

    pub fn max_cell_diameter(&self) -> f64 {
        self.geometry.iter().map(|g| g.diameter).fold(0.0, f64::max)
    }

    /// Copy of the mesh with every boundary facet retagged by `tagger`.
    pub fn retagged<F: Fn(&BoundaryFacet) -> FacetTag>(&self, tagger: F) -> MeshDomain {
        let mut out = self.clone();
        for f in &mut out.facets {
            f.tag = tagger(f);
        }
        out.dirichlet_node = vec![false; out.coords.len()];
        out.boundary_node = vec![false; out.coords.len()];
        for f in &out.facets {
            for &v in f.nodes(out.dim) {
                out.boundary_node[v] = true;
                if f.tag == FacetTag::Dirichlet {
                    out.dirichlet_node[v] = true;
                }
            }
        }
        out
    }

    /// Uniform refinement: each interval is bisected and each triangle is
    /// split into four by its edge midpoints. Facet tags are inherited.
    pub fn refine_uniform(&self) -> Result<MeshDomain> {
        let dim = self.dim;
        if dim == 3 {
            return Err(Error::InvalidInput(
                "uniform refinement is implemented for d ≤ 2; rebuild 3D meshes at higher resolution".into(),
            ));
        }
        let mut coords = self.coords.clone();
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, coords: &mut Vec<Point>| -> usize {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                let (p, q) = (coords[a], coords[b]);
                coords.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]), 0.5 * (p[2] + q[2])]);
                coords.len() - 1
            })
        };
        let mut cells = Vec::with_capacity(self.cells.len() * (1 << dim));
        for c in 0..self.n_cells() {
            let v = self.cell(c);
            if dim == 1 {
                let m = midpoint(v[0], v[1], &mut coords);
                cells.push(vec![v[0], m]);
                cells.push(vec![m, v[1]]);
            } else {
                let m01 = midpoint(v[0], v[1], &mut coords);
                let m12 = midpoint(v[1], v[2], &mut coords);
                let m02 = midpoint(v[0], v[2], &mut coords);
                cells.push(vec![v[0], m01, m02]);
                cells.push(vec![m01, v[1], m12]);
                cells.push(vec![m02, m12, v[2]]);
                cells.push(vec![m01, m12, m02]);
            }
        }
        let mut facets = Vec::new();
        for f in &self.facets {
            if dim == 1 {
                facets.push((vec![f.vertices[0]], f.tag));
            } else {
                let (a, b) = (f.vertices[0], f.vertices[1]);
                let m = midpoint(a, b, &mut coords);
                facets.push((vec![a, m], f.tag));
                facets.push((vec![m, b], f.tag));
            }
        }
        MeshDomain::from_parts(dim, coords, cells, facets)
    }

    /// Index of the vertex nearest to `p`.
    pub fn nearest_vertex(&self, p: &Point) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, q) in self.coords.iter().enumerate() {
            let d = dist(p, q);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }
}

/// Euclidean distance between points.
pub fn distance(a: &Point, b: &Point) -> f64 {
    dist(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_triangle_pair() -> MeshDomain {
        let coords = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]];
        MeshDomain::with_tagger(2, coords, vec![vec![0, 1, 2], vec![0, 2, 3]], |_, c| {
            Ok(if c[0] < 1e-12 {
                FacetTag::Dirichlet
            } else {
                FacetTag::Neumann
            })
        })
        .unwrap()
    }

    #[test]
    fn geometry_and_facets() {
        let m = unit_triangle_pair();
        assert_eq!(m.facets().len(), 4);
        assert!((m.measure() - 1.0).abs() < 1e-15);
        for f in m.facets() {
            let n = f.normal;
            let out = [f.centroid[0] - 0.5, f.centroid[1] - 0.5];
            assert!(n[0] * out[0] + n[1] * out[1] > 0.0);
        }
        assert_eq!(m.dirichlet_nodes(), &[true, false, false, true]);
    }

    #[test]
    fn barycentric_gradients_sum_to_zero() {
        let m = unit_triangle_pair();
        for c in 0..m.n_cells() {
            let g = m.geometry(c);
            for k in 0..2 {
                let s: f64 = (0..3).map(|i| g.grads[i][k]).sum();
                assert!(s.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn inverted_cell_is_reoriented() {
        let coords = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let m = MeshDomain::with_tagger(2, coords, vec![vec![0, 2, 1]], |_, _| Ok(FacetTag::Neumann)).unwrap();
        assert!((m.geometry(0).volume - 0.5).abs() < 1e-15);
    }

    #[test]
    fn untagged_facet_rejected() {
        let coords = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        let e = MeshDomain::from_parts(1, coords, vec![vec![0, 1]], vec![(vec![0], FacetTag::Dirichlet)]);
        assert!(e.is_err());
    }

    #[test]
    fn refinement_preserves_measure_and_tags() {
        let m = unit_triangle_pair();
        let r = m.refine_uniform().unwrap();
        assert_eq!(r.n_cells(), 8);
        assert_eq!(r.facets().len(), 8);
        assert!((r.measure() - 1.0).abs() < 1e-14);
        let nd = r.facets().iter().filter(|f| f.tag == FacetTag::Dirichlet).count();
        assert_eq!(nd, 2);
    }

    #[test]
    fn tetrahedron_volume() {
        let coords = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let m = MeshDomain::with_tagger(3, coords, vec![vec![0, 1, 2, 3]], |_, _| Ok(FacetTag::Neumann)).unwrap();
        assert!((m.measure() - 1.0 / 6.0).abs() < 1e-15);
        let area: f64 = m.facets().iter().map(|f| f.measure).sum();
        assert!((area - (1.5 + 3f64.sqrt() / 2.0)).abs() < 1e-14);
    }
}
