//! Nodal P1 vector fields, quadrature-point tensor fields, data functions
//! and the discrete gradient operators.

use std::fmt;
use std::sync::Arc;

use super::mesh::{CellGeometry, MeshDomain, Point};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Which derivative of the displacement enters the constitutive relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GradientKind {
    /// `∇u`, tensors of shape `N × d`.
    Full,
    /// `ε(u) = ½(∇u + ∇uᵀ)`, requires `N = d`.
    Symmetric,
}

/// Quadrature rules on simplices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuadratureRule {
    /// One point at the centroid; exact for affine integrands.
    Centroid,
    /// `d + 1` interior points; exact for quadratics.
    Degree2,
}

impl QuadratureRule {
    /// Barycentric points (first `d + 1` entries used) and weights as
    /// fractions of the cell volume.
    pub fn reference(self, dim: usize) -> Vec<([f64; 4], f64)> {
        match self {
            QuadratureRule::Centroid => {
                let c = 1.0 / (dim + 1) as f64;
                vec![([c; 4], 1.0)]
            }
            QuadratureRule::Degree2 => match dim {
                1 => {
                    let g = 0.5 / 3f64.sqrt();
                    vec![([0.5 - g, 0.5 + g, 0.0, 0.0], 0.5), ([0.5 + g, 0.5 - g, 0.0, 0.0], 0.5)]
                }
                2 => {
                    let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
                    vec![
                        ([a, b, b, 0.0], 1.0 / 3.0),
                        ([b, a, b, 0.0], 1.0 / 3.0),
                        ([b, b, a, 0.0], 1.0 / 3.0),
                    ]
                }
                _ => {
                    let a = 0.585_410_196_624_968_5;
                    let b = 0.138_196_601_125_010_5;
                    (0..4)
                        .map(|k| {
                            let mut l = [b; 4];
                            l[k] = a;
                            (l, 0.25)
                        })
                        .collect()
                }
            },
        }
    }

    pub fn points_per_cell(self, dim: usize) -> usize {
        match self {
            QuadratureRule::Centroid => 1,
            QuadratureRule::Degree2 => dim + 1,
        }
    }
}

/// Quadrature on a boundary facet: barycentric points over the `d`
/// facet vertices, weights as fractions of the facet measure. Exact for
/// quadratics.
pub fn facet_rule(dim: usize) -> Vec<([f64; 3], f64)> {
    match dim {
        1 => vec![([1.0, 0.0, 0.0], 1.0)],
        2 => {
            let g = 0.5 / 3f64.sqrt();
            vec![([0.5 - g, 0.5 + g, 0.0], 0.5), ([0.5 + g, 0.5 - g, 0.0], 0.5)]
        }
        _ => {
            let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
            vec![([a, b, b], 1.0 / 3.0), ([b, a, b], 1.0 / 3.0), ([b, b, a], 1.0 / 3.0)]
        }
    }
}

type DataClosure = Arc<dyn Fn(&Point, &Point) -> [f64; 3] + Send + Sync>;

#[derive(Clone)]
enum DataKind {
    Constant([f64; 3]),
    Affine { offset: [f64; 3], matrix: [[f64; 3]; 3] },
    Traction(Tensor),
    Closure(DataClosure),
}

/// Vector-valued data `x ↦ f(x)` (sources, tractions, boundary values).
///
/// Boundary data may also depend on the outward unit normal, which is
/// zero when a function is evaluated in the interior.
#[derive(Clone)]
pub struct DataFn {
    components: usize,
    kind: DataKind,
}

impl fmt::Debug for DataFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            DataKind::Constant(c) => format!("constant({:?})", &c[..self.components]),
            DataKind::Affine { .. } => "affine".to_string(),
            DataKind::Traction(t) => format!("traction({t:?})"),
            DataKind::Closure(_) => "closure".to_string(),
        };
        write!(f, "DataFn[{}]({kind})", self.components)
    }
}

impl DataFn {
    pub fn zero(components: usize) -> Self {
        Self::constant(&vec![0.0; components])
    }

    pub fn constant(values: &[f64]) -> Self {
        assert!((1..=3).contains(&values.len()));
        let mut c = [0.0; 3];
        c[..values.len()].copy_from_slice(values);
        DataFn {
            components: values.len(),
            kind: DataKind::Constant(c),
        }
    }

    /// `x ↦ offset + M x`, `M` given row by row (`components × dim`).
    pub fn affine(offset: &[f64], matrix: &[&[f64]]) -> Self {
        let n = offset.len();
        assert!((1..=3).contains(&n) && matrix.len() == n);
        let mut o = [0.0; 3];
        o[..n].copy_from_slice(offset);
        let mut m = [[0.0; 3]; 3];
        for (i, row) in matrix.iter().enumerate() {
            m[i][..row.len()].copy_from_slice(row);
        }
        DataFn {
            components: n,
            kind: DataKind::Affine { offset: o, matrix: m },
        }
    }

    /// Boundary traction `x ↦ T0 n(x)` of a constant stress `T0`.
    pub fn traction(t0: Tensor) -> Self {
        DataFn {
            components: t0.rows(),
            kind: DataKind::Traction(t0),
        }
    }

    pub fn from_fn<F>(components: usize, f: F) -> Self
    where
        F: Fn(&Point, &Point) -> [f64; 3] + Send + Sync + 'static,
    {
        DataFn {
            components,
            kind: DataKind::Closure(Arc::new(f)),
        }
    }

    pub fn components(&self) -> usize {
        self.components
    }

    /// True for data known to vanish identically.
    pub fn is_zero(&self) -> bool {
        match &self.kind {
            DataKind::Constant(c) => c.iter().all(|v| *v == 0.0),
            DataKind::Affine { offset, matrix } => {
                offset.iter().all(|v| *v == 0.0) && matrix.iter().flatten().all(|v| *v == 0.0)
            }
            DataKind::Traction(t) => t.norm() == 0.0,
            DataKind::Closure(_) => false,
        }
    }

    pub fn eval(&self, x: &Point, normal: &Point) -> [f64; 3] {
        match &self.kind {
            DataKind::Constant(c) => *c,
            DataKind::Affine { offset, matrix } => {
                let mut out = *offset;
                for i in 0..self.components {
                    for k in 0..3 {
                        out[i] += matrix[i][k] * x[k];
                    }
                }
                out
            }
            DataKind::Traction(t) => {
                let mut out = [0.0; 3];
                for i in 0..t.rows() {
                    out[i] = (0..t.cols()).map(|j| t[(i, j)] * normal[j]).sum();
                }
                out
            }
            DataKind::Closure(f) => f(x, normal),
        }
    }

    /// Evaluation in the interior (zero normal).
    pub fn at(&self, x: &Point) -> [f64; 3] {
        self.eval(x, &[0.0; 3])
    }
}

/// A continuous piecewise-linear vector field given by nodal values.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    components: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(n_nodes: usize, components: usize) -> Self {
        Field {
            components,
            values: vec![0.0; n_nodes * components],
        }
    }

    pub fn from_values(components: usize, values: Vec<f64>) -> Result<Self> {
        if components == 0 || !values.len().is_multiple_of(components) {
            return Err(Error::InvalidInput(format!(
                "{} values do not split into {components} components",
                values.len()
            )));
        }
        Ok(Field { components, values })
    }

    /// Nodal interpolant of `data`.
    pub fn interpolate(mesh: &MeshDomain, data: &DataFn) -> Self {
        let n = data.components();
        let mut values = Vec::with_capacity(mesh.n_vertices() * n);
        for p in mesh.vertices() {
            values.extend_from_slice(&data.at(p)[..n]);
        }
        Field { components: n, values }
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn n_nodes(&self) -> usize {
        self.values.len() / self.components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn node(&self, v: usize) -> &[f64] {
        &self.values[v * self.components..(v + 1) * self.components]
    }

    #[inline]
    pub fn dof(&self, v: usize, i: usize) -> usize {
        v * self.components + i
    }

    pub fn axpy(&mut self, alpha: f64, other: &Field) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Field {
        Field {
            components: self.components,
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    /// Largest nodal difference; for P1 fields this is the L∞ distance.
    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Value at a point of cell `c` given by barycentric coordinates.
    pub fn eval_in_cell(&self, mesh: &MeshDomain, c: usize, bary: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (a, &v) in mesh.cell(c).iter().enumerate() {
            for i in 0..self.components {
                out[i] += bary[a] * self.values[v * self.components + i];
            }
        }
        out
    }
}

/// A tensor field sampled at the quadrature points of every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTensorField {
    rule: QuadratureRule,
    per_cell: usize,
    values: Vec<Tensor>,
    weights: Vec<f64>,
    points: Vec<Point>,
}

fn cell_points(mesh: &MeshDomain, c: usize, rule: QuadratureRule) -> Vec<(Point, f64)> {
    let dim = mesh.dim();
    let geom = mesh.geometry(c);
    let verts = mesh.cell(c);
    rule.reference(dim)
        .into_iter()
        .map(|(bary, w)| {
            let mut p = [0.0; 3];
            for (a, &v) in verts.iter().enumerate() {
                for k in 0..3 {
                    p[k] += bary[a] * mesh.vertex(v)[k];
                }
            }
            (p, w * geom.volume)
        })
        .collect()
}

impl CellTensorField {
    /// Piecewise-constant field with one value per cell at the centroid.
    pub fn from_cell_values(mesh: &MeshDomain, values: Vec<Tensor>) -> Result<Self> {
        if values.len() != mesh.n_cells() {
            return Err(Error::InvalidInput(format!(
                "{} cell values for {} cells",
                values.len(),
                mesh.n_cells()
            )));
        }
        let weights = (0..mesh.n_cells()).map(|c| mesh.geometry(c).volume).collect();
        let points = (0..mesh.n_cells()).map(|c| mesh.geometry(c).centroid).collect();
        Ok(CellTensorField {
            rule: QuadratureRule::Centroid,
            per_cell: 1,
            values,
            weights,
            points,
        })
    }

    /// Sample `f` at the points of `rule`.
    pub fn from_fn<F: Fn(&Point) -> Tensor>(mesh: &MeshDomain, rule: QuadratureRule, f: F) -> Self {
        let mut values = Vec::new();
        let mut weights = Vec::new();
        let mut points = Vec::new();
        for c in 0..mesh.n_cells() {
            for (p, w) in cell_points(mesh, c, rule) {
                values.push(f(&p));
                weights.push(w);
                points.push(p);
            }
        }
        CellTensorField {
            rule,
            per_cell: rule.points_per_cell(mesh.dim()),
            values,
            weights,
            points,
        }
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }

    pub fn points_per_cell(&self) -> usize {
        self.per_cell
    }

    pub fn n_cells(&self) -> usize {
        self.values.len() / self.per_cell
    }

    pub fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Tensor] {
        &mut self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn cell_values(&self, c: usize) -> &[Tensor] {
        &self.values[c * self.per_cell..(c + 1) * self.per_cell]
    }

    /// Cell average of the tensor (exact value for piecewise constants).
    pub fn cell_mean(&self, c: usize) -> Tensor {
        let r = c * self.per_cell..(c + 1) * self.per_cell;
        let w: f64 = self.weights[r.clone()].iter().sum();
        let mut acc = Tensor::zeros(self.values[r.start].rows(), self.values[r.start].cols());
        for q in r {
            acc += self.values[q].scaled(self.weights[q] / w);
        }
        acc
    }

    /// Same quadrature layout with values `f(T)`.
    pub fn map<F: Fn(&Tensor) -> Tensor>(&self, f: F) -> Self {
        CellTensorField {
            values: self.values.iter().map(f).collect(),
            ..self.clone()
        }
    }

    /// Same quadrature layout with new values.
    pub fn with_values(&self, values: Vec<Tensor>) -> Self {
        assert_eq!(values.len(), self.values.len());
        CellTensorField { values, ..self.clone() }
    }

    /// `Σ_q w_q f(T_q, x_q)`.
    pub fn integrate<F: Fn(&Tensor, &Point) -> f64>(&self, f: F) -> f64 {
        self.values
            .iter()
            .zip(&self.weights)
            .zip(&self.points)
            .map(|((t, w), p)| w * f(t, p))
            .sum()
    }

    /// Quadrature `L^p` norm of `|T|`; `p = ∞` gives the maximum over
    /// quadrature points.
    pub fn norm(&self, p: f64) -> f64 {
        norms(self, p)
    }

    pub fn max_abs_diff(&self, other: &CellTensorField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }
}

/// Quadrature `L^p` norm of the pointwise Frobenius norm.
pub fn norms(tf: &CellTensorField, p: f64) -> f64 {
    if p.is_infinite() {
        return tf.values.iter().map(Tensor::norm).fold(0.0, f64::max);
    }
    let s: f64 = tf
        .values
        .iter()
        .zip(&tf.weights)
        .map(|(t, w)| {
            let n = t.norm();
            if n == 0.0 {
                0.0
            } else {
                w * n.powf(p)
            }
        })
        .sum();
    s.powf(1.0 / p)
}

/// Gradient of the P1 basis function `e_i φ_a` on a cell, in the
/// requested form.
#[inline]
pub fn basis_gradient(
    geom: &CellGeometry,
    a: usize,
    i: usize,
    components: usize,
    dim: usize,
    kind: GradientKind,
) -> Tensor {
    let mut g = Tensor::zeros(components, dim);
    for j in 0..dim {
        g[(i, j)] = geom.grads[a][j];
    }
    match kind {
        GradientKind::Full => g,
        GradientKind::Symmetric => g.symmetric_part(),
    }
}

/// Constant gradient of `field` on cell `c`.
pub fn cell_gradient(mesh: &MeshDomain, field: &Field, c: usize, kind: GradientKind) -> Tensor {
    let dim = mesh.dim();
    let n = field.components();
    let geom = mesh.geometry(c);
    let mut g = Tensor::zeros(n, dim);
    for (a, &v) in mesh.cell(c).iter().enumerate() {
        let u = field.node(v);
        for i in 0..n {
            for j in 0..dim {
                g[(i, j)] += u[i] * geom.grads[a][j];
            }
        }
    }
    match kind {
        GradientKind::Full => g,
        GradientKind::Symmetric => g.symmetric_part(),
    }
}

/// Check that a gradient kind is compatible with the field shape.
pub fn check_kind(mesh: &MeshDomain, components: usize, kind: GradientKind) -> Result<()> {
    if kind == GradientKind::Symmetric && components != mesh.dim() {
        return Err(Error::InvalidInput(format!(
            "symmetric gradient needs {} components, field has {components}",
            mesh.dim()
        )));
    }
    Ok(())
}

/// Cellwise gradient (or symmetric gradient) of a P1 field, one value per
/// cell at the centroid.
pub fn gradient(mesh: &MeshDomain, field: &Field, kind: GradientKind) -> Result<CellTensorField> {
    check_kind(mesh, field.components(), kind)?;
    if field.n_nodes() != mesh.n_vertices() {
        return Err(Error::InvalidInput("field does not live on this mesh".into()));
    }
    let values = (0..mesh.n_cells())
        .map(|c| cell_gradient(mesh, field, c, kind))
        .collect();
    CellTensorField::from_cell_values(mesh, values)
}

/// Volume-weighted average of cellwise scalars at each vertex; the P1
/// interpolation of a piecewise-constant quantity.
pub fn cell_to_nodal(mesh: &MeshDomain, cell_values: &[f64]) -> Vec<f64> {
    (0..mesh.n_vertices())
        .map(|v| {
            let patch = mesh.vertex_patch(v);
            let (mut num, mut den) = (0.0, 0.0);
            for &c in patch {
                let w = mesh.geometry(c).volume;
                num += w * cell_values[c];
                den += w;
            }
            num / den
        })
        .collect()
}

/// `∫_Ω u dx` per component.
pub fn field_integral(mesh: &MeshDomain, u: &Field) -> Vec<f64> {
    let n = u.components();
    let mut out = vec![0.0; n];
    let dim = mesh.dim();
    for c in 0..mesh.n_cells() {
        let vol = mesh.geometry(c).volume;
        for &v in mesh.cell(c) {
            for i in 0..n {
                out[i] += vol / (dim + 1) as f64 * u.node(v)[i];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::structured::{build_structured_mesh, GeometrySpec};
    use super::*;

    #[test]
    fn weights_sum_to_cell_volume() {
        let m = build_structured_mesh(&GeometrySpec::unit_square(3), &["left"]).unwrap();
        for rule in [QuadratureRule::Centroid, QuadratureRule::Degree2] {
            let tf = CellTensorField::from_fn(&m, rule, |_| Tensor::zeros(2, 2));
            for c in 0..m.n_cells() {
                let k = tf.points_per_cell();
                let s: f64 = tf.weights()[c * k..(c + 1) * k].iter().sum();
                assert!((s - m.geometry(c).volume).abs() <= 1e-12 * s);
            }
        }
    }

    #[test]
    fn gradient_of_identity_map_1d() {
        let m = build_structured_mesh(&GeometrySpec::unit_interval(5), &["left"]).unwrap();
        let u = Field::interpolate(&m, &DataFn::affine(&[0.0], &[&[1.0]]));
        let g = gradient(&m, &u, GradientKind::Full).unwrap();
        assert!(g.values().iter().all(|t| (t[(0, 0)] - 1.0).abs() < 1e-14));
    }

    #[test]
    fn shear_and_rotation() {
        let m = build_structured_mesh(&GeometrySpec::unit_square(2), &["all"]).unwrap();
        let shear = Field::interpolate(&m, &DataFn::affine(&[0.0, 0.0], &[&[0.0, 1.0], &[0.0, 0.0]]));
        let full = gradient(&m, &shear, GradientKind::Full).unwrap();
        let sym = gradient(&m, &shear, GradientKind::Symmetric).unwrap();
        let want_full = Tensor::from_rows(&[[0.0, 1.0], [0.0, 0.0]]);
        let want_sym = Tensor::from_rows(&[[0.0, 0.5], [0.5, 0.0]]);
        assert!(full.values().iter().all(|t| t.max_abs_diff(&want_full) < 1e-14));
        assert!(sym.values().iter().all(|t| t.max_abs_diff(&want_sym) < 1e-14));
        let rot = Field::interpolate(&m, &DataFn::affine(&[0.0, 0.0], &[&[0.0, -1.0], &[1.0, 0.0]]));
        let e = gradient(&m, &rot, GradientKind::Symmetric).unwrap();
        assert!(e.values().iter().all(|t| t.norm() < 1e-14));
    }

    #[test]
    fn norm_examples() {
        let m = build_structured_mesh(&GeometrySpec::unit_square(4), &["all"]).unwrap();
        let c = Tensor::from_rows(&[[0.3, -0.4], [0.0, 0.0]]);
        let tf = CellTensorField::from_fn(&m, QuadratureRule::Centroid, |_| c);
        assert!((norms(&tf, 1.0) - 0.5).abs() < 1e-14);
        assert_eq!(norms(&tf.map(|t| t.scaled(0.0)), 3.0), 0.0);
        let line = build_structured_mesh(&GeometrySpec::unit_interval(16), &["left"]).unwrap();
        let tx = CellTensorField::from_fn(&line, QuadratureRule::Degree2, |p| Tensor::scalar(p[0]));
        assert!((norms(&tx, 2.0) - 1.0 / 3f64.sqrt()).abs() < 1e-14);
        assert!((norms(&tx, f64::INFINITY) - (1.0 - (0.5 - 0.5 / 3f64.sqrt()) / 16.0)).abs() < 1e-14);
    }

    #[test]
    fn traction_data_uses_normal() {
        let t0 = Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let g = DataFn::traction(t0);
        let v = g.eval(&[0.0; 3], &[0.0, 1.0, 0.0]);
        assert_eq!(&v[..2], &[2.0, 4.0]);
    }
}
