//! Degree-of-freedom bookkeeping, load assembly, rigid-motion handling and
//! the discrete Korn constant.

use rayon::prelude::*;

use super::field::{basis_gradient, facet_rule, DataFn, Field, GradientKind, QuadratureRule};
use super::mesh::{distance, MeshDomain, Point};
use crate::error::{Error, Result};
use crate::linalg::{dot, SpdSolver, Triplets};

/// Default relative tolerance of the pure-Neumann compatibility check.
pub const COMPATIBILITY_TOL: f64 = 1e-10;

/// Split of the nodal degrees of freedom (`dof = node·N + component`)
/// into free and constrained ones.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    components: usize,
    fixed: Vec<bool>,
    free: Vec<usize>,
    index: Vec<usize>,
    /// Constraints that only remove the rigid kernel (pure Neumann).
    pinned: bool,
}

impl DofMap {
    fn from_fixed(components: usize, fixed: Vec<bool>, pinned: bool) -> Self {
        let mut index = vec![usize::MAX; fixed.len()];
        let mut free = Vec::new();
        for (d, &f) in fixed.iter().enumerate() {
            if !f {
                index[d] = free.len();
                free.push(d);
            }
        }
        DofMap {
            components,
            fixed,
            free,
            index,
            pinned,
        }
    }

    /// Degrees of freedom on Dirichlet nodes are fixed. Without a
    /// Dirichlet part, a minimal set of dofs is pinned to remove the
    /// kernel of the gradient (constants, plus infinitesimal rotations
    /// for the symmetric gradient).
    pub fn new(mesh: &MeshDomain, components: usize, kind: GradientKind) -> Self {
        let nv = mesh.n_vertices();
        let mut fixed = vec![false; nv * components];
        if mesh.has_dirichlet() {
            for (v, &d) in mesh.dirichlet_nodes().iter().enumerate() {
                if d {
                    for i in 0..components {
                        fixed[v * components + i] = true;
                    }
                }
            }
            return Self::from_fixed(components, fixed, false);
        }
        for d in pinned_dofs(mesh, components, kind) {
            fixed[d] = true;
        }
        Self::from_fixed(components, fixed, true)
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn n_dofs(&self) -> usize {
        self.fixed.len()
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    /// Global indices of the free dofs, in solver order.
    pub fn free(&self) -> &[usize] {
        &self.free
    }

    #[inline]
    pub fn is_fixed(&self, dof: usize) -> bool {
        self.fixed[dof]
    }

    /// Solver index of a free dof.
    #[inline]
    pub fn free_index(&self, dof: usize) -> Option<usize> {
        let i = self.index[dof];
        (i != usize::MAX).then_some(i)
    }

    /// True when the constraints are pins for a pure-Neumann problem.
    pub fn is_pinned(&self) -> bool {
        self.pinned
    }

    pub fn gather(&self, global: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&d| global[d]).collect()
    }

    pub fn scatter_add(&self, local: &[f64], global: &mut [f64], alpha: f64) {
        for (k, &d) in self.free.iter().enumerate() {
            global[d] += alpha * local[k];
        }
    }
}

/// Dofs pinned to remove the rigid kernel without a Dirichlet part.
fn pinned_dofs(mesh: &MeshDomain, components: usize, kind: GradientKind) -> Vec<usize> {
    let p = 0usize;
    let mut out: Vec<usize> = (0..components).map(|i| p * components + i).collect();
    if kind == GradientKind::Full || mesh.dim() == 1 {
        return out;
    }
    let xp = *mesh.vertex(p);
    let q = (0..mesh.n_vertices())
        .max_by(|&a, &b| distance(mesh.vertex(a), &xp).total_cmp(&distance(mesh.vertex(b), &xp)))
        .unwrap_or(0);
    let dq: Vec<f64> = (0..3).map(|k| mesh.vertex(q)[k] - xp[k]).collect();
    if mesh.dim() == 2 {
        // A rotation about p moves q along (−dy, dx).
        let comp = if dq[0].abs() >= dq[1].abs() { 1 } else { 0 };
        out.push(q * components + comp);
        return out;
    }
    let axis = (0..3).max_by(|&a, &b| dq[a].abs().total_cmp(&dq[b].abs())).unwrap_or(0);
    for k in 0..3 {
        if k != axis {
            out.push(q * components + k);
        }
    }
    let len = dq.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let e: Vec<f64> = dq.iter().map(|v| v / len).collect();
    let mut best = (0, -1.0, [0.0; 3]);
    for v in 0..mesh.n_vertices() {
        let r: Vec<f64> = (0..3).map(|k| mesh.vertex(v)[k] - xp[k]).collect();
        let along: f64 = (0..3).map(|k| r[k] * e[k]).sum();
        let perp: Vec<f64> = (0..3).map(|k| r[k] - along * e[k]).collect();
        let pn = perp.iter().map(|x| x * x).sum::<f64>().sqrt();
        if pn > best.1 {
            let t = [
                e[1] * r[2] - e[2] * r[1],
                e[2] * r[0] - e[0] * r[2],
                e[0] * r[1] - e[1] * r[0],
            ];
            best = (v, pn, t);
        }
    }
    let comp = (0..3)
        .max_by(|&a, &b| best.2[a].abs().total_cmp(&best.2[b].abs()))
        .unwrap_or(0);
    out.push(best.0 * components + comp);
    out
}

/// Exact `L²` inner product of two P1 fields.
pub fn l2_inner(mesh: &MeshDomain, u: &Field, v: &Field) -> f64 {
    let dim = mesh.dim();
    let n = u.components();
    let denom = ((dim + 1) * (dim + 2)) as f64;
    let mut s = 0.0;
    for c in 0..mesh.n_cells() {
        let vol = mesh.geometry(c).volume;
        let cell = mesh.cell(c);
        for &a in cell {
            for &b in cell {
                let m = if a == b { 2.0 } else { 1.0 } * vol / denom;
                for i in 0..n {
                    s += m * u.node(a)[i] * v.node(b)[i];
                }
            }
        }
    }
    s
}

/// Basis of the kernel of the gradient: constants for the full gradient,
/// rigid motions for the symmetric one.
pub fn rigid_modes(mesh: &MeshDomain, components: usize, kind: GradientKind) -> Vec<Field> {
    let nv = mesh.n_vertices();
    let mut modes = Vec::new();
    for i in 0..components {
        let mut f = Field::zeros(nv, components);
        for v in 0..nv {
            f.values_mut()[v * components + i] = 1.0;
        }
        modes.push(f);
    }
    if kind == GradientKind::Symmetric && mesh.dim() >= 2 {
        let pairs: &[(usize, usize)] = if mesh.dim() == 2 {
            &[(0, 1)]
        } else {
            &[(0, 1), (1, 2), (0, 2)]
        };
        for &(i, j) in pairs {
            let mut f = Field::zeros(nv, components);
            for v in 0..nv {
                let x = mesh.vertex(v);
                f.values_mut()[v * components + i] = -x[j];
                f.values_mut()[v * components + j] = x[i];
            }
            modes.push(f);
        }
    }
    modes
}

/// Remove the `L²` projection onto the kernel of the gradient, fixing the
/// mean value (and mean rotation) of a pure-Neumann solution.
pub fn remove_rigid_part(mesh: &MeshDomain, u: &mut Field, kind: GradientKind) {
    let mut basis: Vec<Field> = Vec::new();
    for mut m in rigid_modes(mesh, u.components(), kind) {
        for b in &basis {
            let c = l2_inner(mesh, &m, b);
            m.axpy(-c, b);
        }
        let nrm = l2_inner(mesh, &m, &m).sqrt();
        if nrm > 0.0 {
            basis.push(m.scaled(1.0 / nrm));
        }
    }
    for b in &basis {
        let c = l2_inner(mesh, u, b);
        u.axpy(-c, b);
    }
}

/// `∫_Ω f·φ dx + ∫_{Γ_N} g·φ dS` for every nodal basis function, without
/// removing Dirichlet rows and without the compatibility check.
pub fn assemble_load_raw(mesh: &MeshDomain, f: &DataFn, g: &DataFn, components: usize) -> Vec<f64> {
    let dim = mesh.dim();
    let mut load = vec![0.0; mesh.n_vertices() * components];
    let rule = QuadratureRule::Degree2.reference(dim);
    if !f.is_zero() {
        let per_cell: Vec<Vec<(usize, f64)>> = (0..mesh.n_cells())
            .into_par_iter()
            .map(|c| {
                let geom = mesh.geometry(c);
                let cell = mesh.cell(c);
                let mut out = Vec::with_capacity(cell.len() * components);
                let mut local = vec![0.0; cell.len() * components];
                for (bary, w) in &rule {
                    let mut x = [0.0; 3];
                    for (a, &v) in cell.iter().enumerate() {
                        for k in 0..3 {
                            x[k] += bary[a] * mesh.vertex(v)[k];
                        }
                    }
                    let fx = f.at(&x);
                    for a in 0..cell.len() {
                        for i in 0..components {
                            local[a * components + i] += w * geom.volume * bary[a] * fx[i];
                        }
                    }
                }
                for (a, &v) in cell.iter().enumerate() {
                    for i in 0..components {
                        out.push((v * components + i, local[a * components + i]));
                    }
                }
                out
            })
            .collect();
        for cell in per_cell {
            for (d, val) in cell {
                load[d] += val;
            }
        }
    }
    if !g.is_zero() {
        let frule = facet_rule(dim);
        for (_, facet) in mesh.neumann_facets() {
            let nodes = facet.nodes(dim);
            for (bary, w) in &frule {
                let mut x = [0.0; 3];
                for (a, &v) in nodes.iter().enumerate() {
                    for k in 0..3 {
                        x[k] += bary[a] * mesh.vertex(v)[k];
                    }
                }
                let gx = g.eval(&x, &facet.normal);
                for (a, &v) in nodes.iter().enumerate() {
                    for i in 0..components {
                        load[v * components + i] += w * facet.measure * bary[a] * gx[i];
                    }
                }
            }
        }
    }
    load
}

/// `∫|f| dx + ∫_{Γ_N}|g| dS` by the same quadrature as the load.
fn data_l1(mesh: &MeshDomain, f: &DataFn, g: &DataFn, components: usize) -> f64 {
    let dim = mesh.dim();
    let norm = |v: [f64; 3]| v[..components].iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut s = 0.0;
    for c in 0..mesh.n_cells() {
        let geom = mesh.geometry(c);
        for (bary, w) in QuadratureRule::Degree2.reference(dim) {
            let mut x = [0.0; 3];
            for (a, &v) in mesh.cell(c).iter().enumerate() {
                for k in 0..3 {
                    x[k] += bary[a] * mesh.vertex(v)[k];
                }
            }
            s += w * geom.volume * norm(f.at(&x));
        }
    }
    for (_, facet) in mesh.neumann_facets() {
        for (bary, w) in facet_rule(dim) {
            let mut x: Point = [0.0; 3];
            for (a, &v) in facet.nodes(dim).iter().enumerate() {
                for k in 0..3 {
                    x[k] += bary[a] * mesh.vertex(v)[k];
                }
            }
            s += w * facet.measure * norm(g.eval(&x, &facet.normal));
        }
    }
    s
}

/// Residual of the pure-Neumann compatibility conditions, computed from
/// the raw load: the net force `|∫f + ∫g|` and, for the symmetric
/// gradient, the net moment.
pub fn compatibility_residual(mesh: &MeshDomain, raw_load: &[f64], components: usize, kind: GradientKind) -> f64 {
    let nv = mesh.n_vertices();
    let mut res2 = 0.0;
    for i in 0..components {
        let s: f64 = (0..nv).map(|v| raw_load[v * components + i]).sum();
        res2 += s * s;
    }
    if kind == GradientKind::Symmetric && mesh.dim() >= 2 {
        let pairs: &[(usize, usize)] = if mesh.dim() == 2 {
            &[(0, 1)]
        } else {
            &[(0, 1), (1, 2), (0, 2)]
        };
        for &(i, j) in pairs {
            let m: f64 = (0..nv)
                .map(|v| {
                    let x = mesh.vertex(v);
                    raw_load[v * components + j] * x[i] - raw_load[v * components + i] * x[j]
                })
                .sum();
            res2 += m * m;
        }
    }
    res2.sqrt()
}

/// Load vector over all nodal dofs, with zero entries on Dirichlet nodes
/// (the test functions vanish there).
///
/// Without a Dirichlet part the data must be balanced: a net force (or,
/// for the symmetric gradient, a net moment) larger than
/// `tol·(‖f‖₁ + ‖g‖₁)` is a compatibility error.
pub fn assemble_load(
    mesh: &MeshDomain,
    f: &DataFn,
    g: &DataFn,
    components: usize,
    kind: GradientKind,
    tol: f64,
) -> Result<Vec<f64>> {
    if f.components() != components || g.components() != components {
        return Err(Error::InvalidInput(format!(
            "data has {} / {} components, expected {components}",
            f.components(),
            g.components()
        )));
    }
    let mut load = assemble_load_raw(mesh, f, g, components);
    if mesh.has_dirichlet() {
        for (v, &d) in mesh.dirichlet_nodes().iter().enumerate() {
            if d {
                for i in 0..components {
                    load[v * components + i] = 0.0;
                }
            }
        }
    } else {
        let residual = compatibility_residual(mesh, &load, components, kind);
        let tolerance = tol * data_l1(mesh, f, g, components);
        if residual > tolerance.max(1e-300) && residual > 1e-14 {
            return Err(Error::Compatibility { residual, tolerance });
        }
    }
    Ok(load)
}

/// Assemble `Σ_K |K| (∇_kind φ_a e_i)·(∇_kind φ_b e_j)` over free dofs.
fn gradient_gram(mesh: &MeshDomain, dofs: &DofMap, kind: GradientKind) -> Triplets {
    let dim = mesh.dim();
    let n = dofs.components();
    let mut trip = Triplets::new(dofs.n_free());
    for c in 0..mesh.n_cells() {
        let geom = mesh.geometry(c);
        let cell = mesh.cell(c);
        let mut locals = Vec::new();
        for (a, &v) in cell.iter().enumerate() {
            for i in 0..n {
                if let Some(k) = dofs.free_index(v * n + i) {
                    locals.push((k, basis_gradient(geom, a, i, n, dim, kind)));
                }
            }
        }
        for (k, gk) in &locals {
            for (l, gl) in &locals {
                trip.push(*k, *l, geom.volume * gk.dot(gl));
            }
        }
    }
    trip
}

/// Estimate of the discrete Korn constant `K` with
/// `‖∇u‖₂ ≤ K ‖ε(u)‖₂` on fields vanishing on `Γ_D`, by power iteration
/// for the largest generalized eigenvalue of the two Gram matrices.
pub fn korn_constant(mesh: &MeshDomain) -> Result<f64> {
    if !mesh.has_dirichlet() {
        return Err(Error::InvalidInput(
            "Korn estimate needs a Dirichlet part of positive measure".into(),
        ));
    }
    let dim = mesh.dim();
    let dofs = DofMap::new(mesh, dim, GradientKind::Symmetric);
    if dofs.n_free() == 0 {
        return Ok(1.0);
    }
    let e = gradient_gram(mesh, &dofs, GradientKind::Symmetric).to_csc();
    let g = gradient_gram(mesh, &dofs, GradientKind::Full).to_csc();
    let solver = SpdSolver::factor(&e)?;
    let nf = dofs.n_free();
    let mut x: Vec<f64> = (0..nf).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
    let mut lambda = 0.0;
    for _ in 0..500 {
        let gx = crate::linalg::csc_mul(&g, &x);
        let y = solver.solve(&gx);
        let ex = crate::linalg::csc_mul(&e, &x);
        let next = dot(&x, &gx) / dot(&x, &ex);
        let scale = dot(&y, &y).sqrt();
        x = y.iter().map(|v| v / scale).collect();
        if (next - lambda).abs() <= 1e-10 * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    if !lambda.is_finite() {
        return Err(Error::NumericalDegeneracy("Korn power iteration diverged".into()));
    }
    Ok(lambda.max(1.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::super::field::gradient;
    use super::super::structured::{build_structured_mesh, GeometrySpec};
    use super::*;

    #[test]
    fn zero_data_zero_load() {
        let m = build_structured_mesh(&GeometrySpec::unit_square(3), &["left"]).unwrap();
        let z = DataFn::zero(2);
        let l = assemble_load(&m, &z, &z, 2, GradientKind::Full, COMPATIBILITY_TOL).unwrap();
        assert!(l.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn hat_integrals_1d() {
        let m = build_structured_mesh(&GeometrySpec::unit_interval(4), &["left"]).unwrap();
        let l = assemble_load(
            &m,
            &DataFn::constant(&[1.0]),
            &DataFn::zero(1),
            1,
            GradientKind::Full,
            COMPATIBILITY_TOL,
        )
        .unwrap();
        let want = [0.0, 0.25, 0.25, 0.25, 0.125];
        for (a, b) in l.iter().zip(want) {
            assert!((a - b).abs() < 1e-15, "{l:?}");
        }
    }

    #[test]
    fn neumann_point_load_1d() {
        let m = build_structured_mesh(&GeometrySpec::unit_interval(4), &["left"]).unwrap();
        let l = assemble_load(
            &m,
            &DataFn::zero(1),
            &DataFn::constant(&[2.0]),
            1,
            GradientKind::Full,
            COMPATIBILITY_TOL,
        )
        .unwrap();
        assert_eq!(l[4], 2.0);
        assert_eq!(l[..4].iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn incompatible_pure_neumann() {
        let m = build_structured_mesh(&GeometrySpec::unit_square(2), &[] as &[&str]).unwrap();
        let e = assemble_load(
            &m,
            &DataFn::constant(&[1.0, 0.0]),
            &DataFn::zero(2),
            2,
            GradientKind::Full,
            COMPATIBILITY_TOL,
        )
        .unwrap_err();
        assert!(matches!(e, Error::Compatibility { .. }));
    }

    #[test]
    fn balanced_pure_neumann_accepted() {
        let m = build_structured_mesh(&GeometrySpec::unit_square(2), &[] as &[&str]).unwrap();
        let t0 = crate::tensor::Tensor::from_rows(&[[1.0, 0.3], [0.3, -0.5]]);
        let l = assemble_load(
            &m,
            &DataFn::zero(2),
            &DataFn::traction(t0),
            2,
            GradientKind::Symmetric,
            COMPATIBILITY_TOL,
        );
        assert!(l.is_ok());
    }

    #[test]
    fn pins_remove_rigid_kernel() {
        let m = build_structured_mesh(&GeometrySpec::unit_square(3), &[] as &[&str]).unwrap();
        let d = DofMap::new(&m, 2, GradientKind::Symmetric);
        assert!(d.is_pinned());
        assert_eq!(d.n_dofs() - d.n_free(), 3);
        // the symmetric-gradient Gram matrix on the free dofs is SPD
        let e = gradient_gram(&m, &d, GradientKind::Symmetric).to_csc();
        assert_eq!(SpdSolver::factor(&e).unwrap().shift(), 0.0);
    }

    #[test]
    fn rigid_projection_zeroes_rotation() {
        let m = build_structured_mesh(&GeometrySpec::unit_square(4), &[] as &[&str]).unwrap();
        let mut u = Field::interpolate(&m, &DataFn::affine(&[1.0, -2.0], &[&[0.1, -0.3], &[0.3, 0.2]]));
        let strain_before = gradient(&m, &u, GradientKind::Symmetric).unwrap();
        remove_rigid_part(&m, &mut u, GradientKind::Symmetric);
        let strain_after = gradient(&m, &u, GradientKind::Symmetric).unwrap();
        assert!(strain_before.max_abs_diff(&strain_after) < 1e-13);
        for mode in rigid_modes(&m, 2, GradientKind::Symmetric) {
            assert!(l2_inner(&m, &u, &mode).abs() < 1e-13);
        }
    }

    #[test]
    fn korn_constant_is_finite_and_at_least_one() {
        let m = build_structured_mesh(&GeometrySpec::unit_square(4), &["left"]).unwrap();
        let k = korn_constant(&m).unwrap();
        assert!((1.0..10.0).contains(&k), "K = {k}");
    }
}
