//! Primal, dual and relaxed dual functionals, a direct minimizer of the
//! primal problem, and checks of the variational inequality and of the
//! duality relations between the two problems.
//!
//! With `L(v) = ∫f·v + ∫_{Γ_N} g·v`:
//!
//! ```text
//! J*(u) = ∫ F*(ε(u)) − L(u)             over u = u0 on Γ_D
//! J(T)  = ∫ F(T) − ∫ ε(u0)·T            over T with div T = −f, T n = g
//! ```
//!
//! and `J*(u) + J(T) + L(u0) ≥ 0` for admissible pairs, with equality at
//! the weak solution.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::constitutive::{random_unit_tensor, ConstitutiveLaw};
use crate::discretization::assembly::assemble_load_raw;
use crate::discretization::{gradient, CellTensorField, DataFn, Field, GradientKind, MeshDomain};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, SpdSolver};
use crate::potentials::{conjugate_fstar, potential_f, recession_finf};
use crate::regularized::{
    cell_response, newton, require_safe_datum, Assembler, Merit, Problem, SolverOptions, SolverReport,
};
use crate::tensor::{Tensor, TensorMap};

/// `L(v) = ∫f·v dx + ∫_{Γ_N} g·v dS`.
pub fn load_functional(mesh: &MeshDomain, f: &DataFn, g: &DataFn, v: &Field) -> f64 {
    dot(&assemble_load_raw(mesh, f, g, v.components()), v.values())
}

/// `∫ F*(ε(u))`, `+∞` if some cell leaves the closure of the range.
fn conjugate_integral(law: &ConstitutiveLaw, strain: &CellTensorField) -> Result<f64> {
    let vals: Vec<Result<f64>> = strain
        .values()
        .par_iter()
        .zip(strain.weights())
        .map(|(e, w)| Ok(w * conjugate_fstar(law, e)?.value))
        .collect();
    let mut s = 0.0;
    for v in vals {
        s += v?;
    }
    Ok(s)
}

/// `J*(u) = ∫F*(ε(u)) − ∫f·u − ∫_{Γ_N} g·u`; `+∞` when the strain leaves
/// the closure of the range somewhere.
pub fn primal_energy(
    law: &ConstitutiveLaw,
    mesh: &MeshDomain,
    kind: GradientKind,
    u: &Field,
    f: &DataFn,
    g: &DataFn,
) -> Result<f64> {
    if u.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("displacement has non-finite values".into()));
    }
    let strain = gradient(mesh, u, kind)?;
    let e = conjugate_integral(law, &strain)?;
    if e.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(e - load_functional(mesh, f, g, u))
}

/// `∫ F(T)`.
fn potential_integral(law: &ConstitutiveLaw, t: &CellTensorField) -> Result<f64> {
    let vals: Vec<Result<f64>> = t
        .values()
        .par_iter()
        .zip(t.weights())
        .map(|(t, w)| Ok(w * potential_f(law, t)?))
        .collect();
    vals.into_iter().sum()
}

/// `∫ ε(u0)·T`, quadrature points matched to cells.
fn coupling(mesh: &MeshDomain, t: &CellTensorField, u0: &Field, kind: GradientKind) -> Result<f64> {
    let e0 = gradient(mesh, u0, kind)?;
    let per = t.points_per_cell();
    Ok(t.values()
        .iter()
        .zip(t.weights())
        .enumerate()
        .map(|(q, (tq, w))| w * e0.values()[q / per].dot(tq))
        .sum())
}

/// `J(T) = ∫F(T) − ∫ε(u0)·T`. Membership of `T` in the equilibrium set is
/// not checked here; see [`equilibrium_defect`].
pub fn dual_energy(
    law: &ConstitutiveLaw,
    mesh: &MeshDomain,
    kind: GradientKind,
    t: &CellTensorField,
    u0: &Field,
) -> Result<f64> {
    if t.values().iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("stress has non-finite entries".into()));
    }
    Ok(potential_integral(law, t)? - coupling(mesh, t, u0, kind)?)
}

/// Singular stress concentrated on a Neumann facet: `mass · direction`
/// times the facet's surface measure, normalized to unit total mass.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularMass {
    /// Index into [`MeshDomain::facets`].
    pub facet: usize,
    pub mass: f64,
    /// Unit tensor.
    pub direction: Tensor,
}

/// `J(T^r) + Σ F_∞(U)·mass − Σ mass·ε(u0)·U`, the relaxed dual functional
/// with the singular part carried by boundary facets.
pub fn relaxed_dual_energy(
    law: &ConstitutiveLaw,
    mesh: &MeshDomain,
    kind: GradientKind,
    t_regular: &CellTensorField,
    singular: &[SingularMass],
    u0: &Field,
) -> Result<f64> {
    let mut value = dual_energy(law, mesh, kind, t_regular, u0)?;
    for s in singular {
        let facet = mesh
            .facets()
            .get(s.facet)
            .ok_or_else(|| Error::InvalidInput(format!("facet {} does not exist", s.facet)))?;
        if facet.tag != crate::discretization::FacetTag::Neumann {
            return Err(Error::Domain(format!(
                "singular mass on facet {} lies on the Dirichlet boundary",
                s.facet
            )));
        }
        if !(s.mass >= 0.0) || !s.mass.is_finite() {
            return Err(Error::InvalidInput(format!(
                "singular mass must be nonnegative, got {}",
                s.mass
            )));
        }
        if s.mass == 0.0 {
            continue;
        }
        let e0 = crate::discretization::cell_gradient(mesh, u0, facet.cell, kind);
        value += s.mass * (recession_finf(law, &s.direction)? - e0.dot(&s.direction));
    }
    Ok(value)
}

/// Result of [`minimize_primal`].
#[derive(Debug, Clone)]
pub struct PrimalSolution {
    pub u: Field,
    /// `D⁻¹(ε(u))` per cell.
    pub t: CellTensorField,
    pub energy: f64,
    pub report: SolverReport,
}

/// Minimize `J*` over displacements equal to `u0` on `Γ_D` by Newton's
/// method with an energy line search.
///
/// Trial steps whose strain leaves the range interior (by less than the
/// law's margin) are rejected and the step halved, so every iterate stays
/// feasible.
pub fn minimize_primal(problem: &Problem, warm_start: Option<&Field>, opts: &SolverOptions) -> Result<PrimalSolution> {
    require_safe_datum(problem, opts.safety_margin)?;
    let law = &problem.law;
    let mesh = &problem.mesh;
    let load = problem.load()?;
    let raw = assemble_load_raw(mesh, &problem.f, &problem.g, problem.components());
    let asm = Assembler::new(mesh, problem.dofs(), problem.kind, load);
    let init = match warm_start {
        Some(w) => asm.with_free(&problem.u0, &asm.dofs.gather(w.values())),
        None => problem.u0.clone(),
    };
    let kind = problem.kind;
    let energy = |u: &Field, stresses: &[Tensor]| -> f64 {
        let strains = asm.strains(u);
        let vals: Vec<f64> = strains
            .par_iter()
            .zip(stresses)
            .enumerate()
            .map(|(c, (e, t))| match potential_f(law, t) {
                Ok(f) => mesh.geometry(c).volume * (e.dot(t) - f),
                Err(_) => f64::INFINITY,
            })
            .collect();
        vals.iter().sum::<f64>() - dot(&raw, u.values())
    };
    let eval = |e: &Tensor| -> Result<(Tensor, TensorMap)> { cell_response(law, e, None) };
    let out = newton(&asm, init, &eval, Merit::Energy(&energy), opts).map_err(|e| e.with_context("primal"))?;
    let mut u = out.u;
    if !mesh.has_dirichlet() {
        crate::discretization::remove_rigid_part(mesh, &mut u, kind);
    }
    let t = CellTensorField::from_cell_values(mesh, out.stresses)?;
    let energy = primal_energy(law, mesh, kind, &u, &problem.f, &problem.g)?;
    Ok(PrimalSolution {
        u,
        t,
        energy,
        report: out.report,
    })
}

/// Worst violation of the variational inequality over probes.
#[derive(Debug, Clone, PartialEq)]
pub struct ViResidual {
    /// `max_v ∫T·(ε(u)−ε(v)) − L(u−v)`; `-∞` when no probe was admissible.
    pub worst: f64,
    pub evaluated: usize,
    /// Probes rejected as inadmissible.
    pub skipped: usize,
}

/// `∫T·(ε(u)−ε(v)) − L(u−v)` maximized over admissible probes `v`: equal
/// to `u0` on `Γ_D` and with strain inside the range interior.
#[allow(clippy::too_many_arguments)]
pub fn variational_inequality_residual(
    law: &ConstitutiveLaw,
    mesh: &MeshDomain,
    kind: GradientKind,
    u: &Field,
    t: &CellTensorField,
    f: &DataFn,
    g: &DataFn,
    u0: &Field,
    probes: &[Field],
) -> Result<ViResidual> {
    let raw = assemble_load_raw(mesh, f, g, u.components());
    let eu = gradient(mesh, u, kind)?;
    let per = t.points_per_cell();
    let mut worst = f64::NEG_INFINITY;
    let mut evaluated = 0;
    let mut skipped = 0;
    for v in probes {
        if !is_admissible(law, mesh, kind, v, u0)? {
            skipped += 1;
            continue;
        }
        let ev = gradient(mesh, v, kind)?;
        let mut val = 0.0;
        for (q, (tq, w)) in t.values().iter().zip(t.weights()).enumerate() {
            let c = q / per;
            val += w * tq.dot(&(eu.values()[c] - ev.values()[c]));
        }
        let diff: Vec<f64> = u.values().iter().zip(v.values()).map(|(a, b)| a - b).collect();
        val -= dot(&raw, &diff);
        worst = worst.max(val);
        evaluated += 1;
    }
    Ok(ViResidual {
        worst,
        evaluated,
        skipped,
    })
}

fn is_admissible(law: &ConstitutiveLaw, mesh: &MeshDomain, kind: GradientKind, v: &Field, u0: &Field) -> Result<bool> {
    if v.values().len() != u0.values().len() {
        return Err(Error::InvalidInput("probe does not match the displacement size".into()));
    }
    let n = v.components();
    for (node, &d) in mesh.dirichlet_nodes().iter().enumerate() {
        if d && (0..n).any(|i| (v.node(node)[i] - u0.node(node)[i]).abs() > 1e-12 * (1.0 + u0.node(node)[i].abs())) {
            return Ok(false);
        }
    }
    let ev = gradient(mesh, v, kind)?;
    Ok(ev.values().iter().all(|e| law.range_distance(e) > law.margin()))
}

const PROBE_MODES: usize = 3;

/// Random admissible probes `v = u + w` with `w` a random trigonometric
/// field set to zero on `Γ_D`, scaled down until the strain of `v` stays
/// inside the range.
pub fn random_probes(
    law: &ConstitutiveLaw,
    mesh: &MeshDomain,
    kind: GradientKind,
    u: &Field,
    count: usize,
    amplitude: f64,
    seed: u64,
) -> Result<Vec<Field>> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = u.components();
    let dirichlet = mesh.dirichlet_nodes();
    let mut out = Vec::with_capacity(count);
    let dim = mesh.dim();
    for _ in 0..count {
        // A few low-frequency cosines per component; nodewise noise would
        // make the strain term dwarf the load term.
        let modes: Vec<Vec<([f64; 3], f64, f64)>> = (0..n)
            .map(|_| {
                (0..PROBE_MODES)
                    .map(|_| {
                        let mut k = [0.0; 3];
                        for kj in k.iter_mut().take(dim) {
                            *kj = f64::from(rng.gen_range(-2i32..=2));
                        }
                        (k, rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(-1.0..1.0))
                    })
                    .collect()
            })
            .collect();
        let mut w = Field::zeros(mesh.n_vertices(), n);
        for (node, &d) in dirichlet.iter().enumerate() {
            if !d {
                let x = mesh.vertex(node);
                for (i, comp) in modes.iter().enumerate() {
                    let k = w.dof(node, i);
                    w.values_mut()[k] = comp
                        .iter()
                        .map(|(kv, phase, c)| {
                            let arg: f64 = (0..3).map(|j| kv[j] * x[j]).sum();
                            c * (std::f64::consts::TAU * arg + phase).cos()
                        })
                        .sum::<f64>()
                        / PROBE_MODES as f64;
                }
            }
        }
        let mut scale = amplitude;
        let mut found = None;
        for _ in 0..60 {
            let mut v = u.clone();
            v.axpy(scale, &w);
            if is_admissible(law, mesh, kind, &v, u)? {
                found = Some(v);
                break;
            }
            scale *= 0.5;
        }
        out.push(found.ok_or_else(|| Error::NumericalDegeneracy("no admissible probe found".into()))?);
    }
    Ok(out)
}

/// How far a pair `(u, T)` is from being admissible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityDefects {
    /// `max |u − u0|` over Dirichlet nodes.
    pub dirichlet: f64,
    /// Euclidean norm of the weak equilibrium residual of `T` over all
    /// test functions vanishing on `Γ_D`.
    pub equilibrium: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualityReport {
    pub primal_value: f64,
    pub dual_value: f64,
    /// `J*(u) + J(T) + L(u0)`.
    pub gap: f64,
    pub vi_residual: f64,
    pub feasibility: FeasibilityDefects,
}

/// Weak equilibrium residual `∫T·ε(φ) − L(φ)` for every nodal basis
/// function `φ` (all dofs, Dirichlet ones included).
pub fn weak_residual(
    mesh: &MeshDomain,
    kind: GradientKind,
    t: &CellTensorField,
    f: &DataFn,
    g: &DataFn,
    components: usize,
) -> Vec<f64> {
    let mut r = assemble_load_raw(mesh, f, g, components);
    for v in r.iter_mut() {
        *v = -*v;
    }
    let dim = mesh.dim();
    let per = t.points_per_cell();
    for (q, (tq, w)) in t.values().iter().zip(t.weights()).enumerate() {
        let c = q / per;
        let geom = mesh.geometry(c);
        for (a, &v) in mesh.cell(c).iter().enumerate() {
            for i in 0..components {
                let b = crate::discretization::basis_gradient(geom, a, i, components, dim, kind);
                r[v * components + i] += w * tq.dot(&b);
            }
        }
    }
    r
}

/// Equilibrium residual restricted to test functions vanishing on `Γ_D`.
pub fn equilibrium_defect(
    mesh: &MeshDomain,
    kind: GradientKind,
    t: &CellTensorField,
    f: &DataFn,
    g: &DataFn,
    components: usize,
) -> f64 {
    let r = weak_residual(mesh, kind, t, f, g, components);
    let dir = mesh.dirichlet_nodes();
    let free: Vec<f64> = r
        .iter()
        .enumerate()
        .filter(|(k, _)| !dir[k / components])
        .map(|(_, v)| *v)
        .collect();
    norm2(&free)
}

/// Primal and dual values, the gap, the variational inequality residual
/// over `probes` and the feasibility defects of `(u, T)`.
pub fn duality_report(problem: &Problem, u: &Field, t: &CellTensorField, probes: &[Field]) -> Result<DualityReport> {
    let Problem {
        law,
        mesh,
        kind,
        u0,
        f,
        g,
        ..
    } = problem;
    let primal = primal_energy(law, mesh, *kind, u, f, g)?;
    let dual = dual_energy(law, mesh, *kind, t, u0)?;
    let lu0 = load_functional(mesh, f, g, u0);
    let vi = variational_inequality_residual(law, mesh, *kind, u, t, f, g, u0, probes)?;
    let n = u.components();
    let mut dirichlet = 0.0f64;
    for (node, &d) in mesh.dirichlet_nodes().iter().enumerate() {
        if d {
            for i in 0..n {
                dirichlet = dirichlet.max((u.node(node)[i] - u0.node(node)[i]).abs());
            }
        }
    }
    Ok(DualityReport {
        primal_value: primal,
        dual_value: dual,
        gap: primal + dual + lu0,
        vi_residual: if vi.evaluated > 0 { vi.worst } else { 0.0 },
        feasibility: FeasibilityDefects {
            dirichlet,
            equilibrium: equilibrium_defect(mesh, *kind, t, f, g, n),
        },
    })
}

/// Random cellwise field `P` with `∫P·ε(w) = 0` for every discrete test
/// function `w` vanishing on `Γ_D`, scaled to `max |P| = amplitude`.
///
/// `P = Q − ε(z)` where `Q` is random and `z` is the Galerkin projection of
/// `Q` onto discrete strains, so `T + P` stays discretely equilibrated.
pub fn divergence_free_perturbation(
    mesh: &MeshDomain,
    kind: GradientKind,
    components: usize,
    amplitude: f64,
    seed: u64,
) -> Result<CellTensorField> {
    crate::discretization::field::check_kind(mesh, components, kind)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = mesh.dim();
    let q: Vec<Tensor> = (0..mesh.n_cells())
        .map(|_| random_unit_tensor(&mut rng, components, dim, kind == GradientKind::Symmetric))
        .collect();
    let dofs = crate::discretization::DofMap::new(mesh, components, kind);
    let zero_load = vec![0.0; mesh.n_vertices() * components];
    let asm = Assembler::new(mesh, dofs, kind, zero_load);
    let m = components * dim;
    let k = asm.tangent(&vec![TensorMap::identity(m, m); mesh.n_cells()]);
    // Right-hand side ∫Q·ε(φ) comes from the residual with stresses Q.
    let (rhs, _) = asm.residual(&q);
    let z_free = if asm.dofs.n_free() > 0 {
        SpdSolver::factor(&k)?.solve(&rhs)
    } else {
        Vec::new()
    };
    let z = asm.with_free(&Field::zeros(mesh.n_vertices(), components), &z_free);
    let ez = asm.strains(&z);
    let p: Vec<Tensor> = q.iter().zip(&ez).map(|(q, e)| *q - *e).collect();
    let max = p.iter().map(Tensor::norm).fold(0.0, f64::max);
    let scale = if max > 0.0 { amplitude / max } else { 0.0 };
    CellTensorField::from_cell_values(mesh, p.into_iter().map(|t| t.scaled(scale)).collect())
}
