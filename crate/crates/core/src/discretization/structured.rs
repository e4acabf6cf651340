//! Structured test geometries: interval, rectangle, L-shape and box.
//!
//! Boundary parts are named; a facet is Dirichlet when its part is listed
//! in the Dirichlet set and Neumann otherwise.
//!
//! | geometry  | boundary parts |
//! |-----------|----------------|
//! | interval  | `left` (x = x0), `right` (x = x1) |
//! | rectangle | `left`, `right`, `bottom` (y = y0), `top` (y = y1) |
//! | L-shape   | `left`, `bottom`, `right`, `top`, `notch_vertical` (x = ½, y > ½), `notch_horizontal` (y = ½, x > ½) |
//! | box       | `left`, `right`, `front` (y = y0), `back` (y = y1), `bottom` (z = z0), `top` (z = z1) |
//!
//! The special name `all` selects every part.

use super::mesh::{FacetTag, MeshDomain, Point};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum GeometrySpec {
    Interval {
        x0: f64,
        x1: f64,
        cells: usize,
    },
    Rectangle {
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
        nx: usize,
        ny: usize,
    },
    /// Unit square minus the open upper-right quadrant, with `resolution`
    /// squares per quadrant side; reentrant corner at (0.5, 0.5).
    LShape {
        resolution: usize,
    },
    Box {
        lo: [f64; 3],
        hi: [f64; 3],
        n: [usize; 3],
    },
}

impl GeometrySpec {
    pub fn unit_interval(cells: usize) -> Self {
        GeometrySpec::Interval {
            x0: 0.0,
            x1: 1.0,
            cells,
        }
    }

    pub fn unit_square(n: usize) -> Self {
        GeometrySpec::Rectangle {
            x0: 0.0,
            x1: 1.0,
            y0: 0.0,
            y1: 1.0,
            nx: n,
            ny: n,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            GeometrySpec::Interval { .. } => 1,
            GeometrySpec::Rectangle { .. } | GeometrySpec::LShape { .. } => 2,
            GeometrySpec::Box { .. } => 3,
        }
    }

    pub fn boundary_parts(&self) -> &'static [&'static str] {
        match self {
            GeometrySpec::Interval { .. } => &["left", "right"],
            GeometrySpec::Rectangle { .. } => &["left", "right", "bottom", "top"],
            GeometrySpec::LShape { .. } => &["left", "bottom", "right", "top", "notch_vertical", "notch_horizontal"],
            GeometrySpec::Box { .. } => &["left", "right", "front", "back", "bottom", "top"],
        }
    }

    /// Same geometry with every axis resolution multiplied by `2^levels`.
    pub fn refined(&self, levels: u32) -> Self {
        let f = 1usize << levels;
        match self.clone() {
            GeometrySpec::Interval { x0, x1, cells } => GeometrySpec::Interval {
                x0,
                x1,
                cells: cells * f,
            },
            GeometrySpec::Rectangle { x0, x1, y0, y1, nx, ny } => GeometrySpec::Rectangle {
                x0,
                x1,
                y0,
                y1,
                nx: nx * f,
                ny: ny * f,
            },
            GeometrySpec::LShape { resolution } => GeometrySpec::LShape {
                resolution: resolution * f,
            },
            GeometrySpec::Box { lo, hi, n } => GeometrySpec::Box {
                lo,
                hi,
                n: [n[0] * f, n[1] * f, n[2] * f],
            },
        }
    }

    /// Name of the boundary part containing a facet centroid.
    fn part_of(&self, c: &Point) -> &'static str {
        let close = |a: f64, b: f64, scale: f64| (a - b).abs() <= 1e-9 * scale.max(1.0);
        match *self {
            GeometrySpec::Interval { x0, x1, .. } => {
                if close(c[0], x0, x1 - x0) {
                    "left"
                } else {
                    "right"
                }
            }
            GeometrySpec::Rectangle { x0, x1, y0, y1, .. } => {
                let s = (x1 - x0).max(y1 - y0);
                if close(c[0], x0, s) {
                    "left"
                } else if close(c[0], x1, s) {
                    "right"
                } else if close(c[1], y0, s) {
                    "bottom"
                } else {
                    "top"
                }
            }
            GeometrySpec::LShape { .. } => {
                if close(c[0], 0.0, 1.0) {
                    "left"
                } else if close(c[1], 0.0, 1.0) {
                    "bottom"
                } else if close(c[0], 1.0, 1.0) {
                    "right"
                } else if close(c[1], 1.0, 1.0) {
                    "top"
                } else if close(c[0], 0.5, 1.0) {
                    "notch_vertical"
                } else {
                    "notch_horizontal"
                }
            }
            GeometrySpec::Box { lo, hi, .. } => {
                let s = (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
                if close(c[0], lo[0], s) {
                    "left"
                } else if close(c[0], hi[0], s) {
                    "right"
                } else if close(c[1], lo[1], s) {
                    "front"
                } else if close(c[1], hi[1], s) {
                    "back"
                } else if close(c[2], lo[2], s) {
                    "bottom"
                } else {
                    "top"
                }
            }
        }
    }
}

fn grid_2d(
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    nx: usize,
    ny: usize,
    keep: impl Fn(usize, usize) -> bool,
) -> (Vec<Point>, Vec<Vec<usize>>) {
    let mut index = vec![usize::MAX; (nx + 1) * (ny + 1)];
    let mut coords = Vec::new();
    let keep_vertex = |i: usize, j: usize| {
        // A vertex is kept if any adjacent square is kept.
        [(0, 0), (1, 0), (0, 1), (1, 1)]
            .iter()
            .any(|&(di, dj)| i >= di && j >= dj && i - di < nx && j - dj < ny && keep(i - di, j - dj))
    };
    for j in 0..=ny {
        for i in 0..=nx {
            if keep_vertex(i, j) {
                index[j * (nx + 1) + i] = coords.len();
                coords.push([
                    x0 + (x1 - x0) * i as f64 / nx as f64,
                    y0 + (y1 - y0) * j as f64 / ny as f64,
                    0.0,
                ]);
            }
        }
    }
    let mut cells = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if !keep(i, j) {
                continue;
            }
            let v = |a: usize, b: usize| index[b * (nx + 1) + a];
            let (p00, p10, p01, p11) = (v(i, j), v(i + 1, j), v(i, j + 1), v(i + 1, j + 1));
            cells.push(vec![p00, p10, p11]);
            cells.push(vec![p00, p11, p01]);
        }
    }
    (coords, cells)
}

/// Kuhn subdivision of each hexahedron into six tetrahedra; conforming
/// across faces because every cube uses the same main diagonal.
fn grid_3d(lo: [f64; 3], hi: [f64; 3], n: [usize; 3]) -> (Vec<Point>, Vec<Vec<usize>>) {
    let idx = |i: usize, j: usize, k: usize| (k * (n[1] + 1) + j) * (n[0] + 1) + i;
    let mut coords = Vec::new();
    for k in 0..=n[2] {
        for j in 0..=n[1] {
            for i in 0..=n[0] {
                coords.push([
                    lo[0] + (hi[0] - lo[0]) * i as f64 / n[0] as f64,
                    lo[1] + (hi[1] - lo[1]) * j as f64 / n[1] as f64,
                    lo[2] + (hi[2] - lo[2]) * k as f64 / n[2] as f64,
                ]);
            }
        }
    }
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut cells = Vec::new();
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                for p in &perms {
                    let mut cur = [i, j, k];
                    let mut tet = vec![idx(cur[0], cur[1], cur[2])];
                    for &axis in p {
                        cur[axis] += 1;
                        tet.push(idx(cur[0], cur[1], cur[2]));
                    }
                    cells.push(tet);
                }
            }
        }
    }
    (coords, cells)
}

/// Build a structured simplicial mesh; facets on the named `dirichlet`
/// parts are tagged Dirichlet, all others Neumann.
pub fn build_structured_mesh<S: AsRef<str>>(spec: &GeometrySpec, dirichlet: &[S]) -> Result<MeshDomain> {
    let parts = spec.boundary_parts();
    let mut selected = Vec::new();
    for name in dirichlet {
        let name = name.as_ref();
        if name == "all" {
            selected.extend_from_slice(parts);
        } else if let Some(p) = parts.iter().find(|p| **p == name) {
            selected.push(*p);
        } else {
            return Err(Error::Config(format!(
                "unknown boundary part '{name}' (available: {})",
                parts.join(", ")
            )));
        }
    }
    let positive = |n: usize, what: &str| {
        if n == 0 {
            Err(Error::Config(format!("{what} resolution must be at least 1")))
        } else {
            Ok(())
        }
    };
    let (dim, coords, cells) = match *spec {
        GeometrySpec::Interval { x0, x1, cells } => {
            positive(cells, "interval")?;
            if !(x1 > x0) {
                return Err(Error::Config("interval must satisfy x0 < x1".into()));
            }
            let coords = (0..=cells)
                .map(|i| [x0 + (x1 - x0) * i as f64 / cells as f64, 0.0, 0.0])
                .collect();
            let c = (0..cells).map(|i| vec![i, i + 1]).collect();
            (1, coords, c)
        }
        GeometrySpec::Rectangle { x0, x1, y0, y1, nx, ny } => {
            positive(nx, "rectangle x")?;
            positive(ny, "rectangle y")?;
            if !(x1 > x0 && y1 > y0) {
                return Err(Error::Config("rectangle must have positive extent".into()));
            }
            let (c, e) = grid_2d(x0, x1, y0, y1, nx, ny, |_, _| true);
            (2, c, e)
        }
        GeometrySpec::LShape { resolution } => {
            positive(resolution, "L-shape")?;
            let r = resolution;
            let (c, e) = grid_2d(0.0, 1.0, 0.0, 1.0, 2 * r, 2 * r, |i, j| !(i >= r && j >= r));
            (2, c, e)
        }
        GeometrySpec::Box { lo, hi, n } => {
            for (k, nk) in n.iter().enumerate() {
                positive(*nk, "box")?;
                if !(hi[k] > lo[k]) {
                    return Err(Error::Config("box must have positive extent".into()));
                }
            }
            let (c, e) = grid_3d(lo, hi, n);
            (3, c, e)
        }
    };
    MeshDomain::with_tagger(dim, coords, cells, |_, centroid| {
        Ok(if selected.contains(&spec.part_of(centroid)) {
            FacetTag::Dirichlet
        } else {
            FacetTag::Neumann
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_counts() {
        let m = build_structured_mesh(&GeometrySpec::unit_interval(4), &["left"]).unwrap();
        assert_eq!(m.n_vertices(), 5);
        assert_eq!(m.facets().len(), 2);
        assert_eq!(m.facets().iter().filter(|f| f.tag == FacetTag::Dirichlet).count(), 1);
    }

    #[test]
    fn square_2x2_all_dirichlet() {
        let m = build_structured_mesh(&GeometrySpec::unit_square(2), &["all"]).unwrap();
        assert_eq!(m.n_cells(), 8);
        assert_eq!(m.facets().len(), 8);
        assert!(m.facets().iter().all(|f| f.tag == FacetTag::Dirichlet));
    }

    #[test]
    fn lshape_counts() {
        let m = build_structured_mesh(&GeometrySpec::LShape { resolution: 2 }, &["left"]).unwrap();
        assert_eq!(m.n_cells(), 24);
        assert!((m.measure() - 0.75).abs() < 1e-14);
        assert!(m.vertices().iter().any(|p| p[0] == 0.5 && p[1] == 0.5));
        let boundary: f64 = m.facets().iter().map(|f| f.measure).sum();
        assert!((boundary - 4.0).abs() < 1e-14);
        let notch = m
            .facets()
            .iter()
            .filter(|f| f.centroid[0] > 0.5 && (f.centroid[1] - 0.5).abs() < 1e-12)
            .count();
        assert_eq!(notch, 2);
    }

    #[test]
    fn lshape_resolution_one() {
        let m = build_structured_mesh(&GeometrySpec::LShape { resolution: 1 }, &[] as &[&str]).unwrap();
        assert_eq!(m.n_cells(), 6);
        assert_eq!(m.n_vertices(), 8);
    }

    #[test]
    fn box_is_conforming() {
        let m = build_structured_mesh(
            &GeometrySpec::Box {
                lo: [0.0; 3],
                hi: [1.0; 3],
                n: [2, 2, 2],
            },
            &["bottom"],
        )
        .unwrap();
        assert_eq!(m.n_cells(), 48);
        assert!((m.measure() - 1.0).abs() < 1e-14);
        // 6 faces × 4 squares × 2 triangles
        assert_eq!(m.facets().len(), 48);
    }

    #[test]
    fn unknown_part_is_config_error() {
        let e = build_structured_mesh(&GeometrySpec::unit_square(2), &["north"]).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }
}
