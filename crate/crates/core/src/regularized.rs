//! The `n`-regularized problems
//!
//! ```text
//! −div Tⁿ = f,   ε(uⁿ) = D(Tⁿ) + Tⁿ / (n (1+|Tⁿ|²)^((n−1)/(2n)))
//! ```
//!
//! with mixed boundary conditions, solved for the displacement by damped
//! Newton iteration. The stress is eliminated cell by cell through the
//! inverse of the regularized relation, so the only global unknown is `u`.

use nalgebra_sparse::CscMatrix;
use rayon::prelude::*;

use crate::constitutive::{newton_polish, prototype, radial_solve, ConstitutiveLaw, LawKind};
use crate::discretization::{
    assemble_load, basis_gradient, cell_gradient, gradient, remove_rigid_part, CellTensorField, DataFn, DofMap, Field,
    GradientKind, MeshDomain, COMPATIBILITY_TOL,
};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, SpdSolver, Triplets};
use crate::potentials::safety_strain_check;
use crate::tensor::{Tensor, TensorMap};

/// Upper end of the default doubling schedule.
pub const DEFAULT_SCHEDULE_CAP: u32 = 256;
/// The default schedule stops early once `‖reg(Tⁿ, n)‖₁` drops below this.
pub const DEFAULT_SCHEDULE_REG_STOP: f64 = 1e-8;

/// `ln(1 + s²)` without overflow.
#[inline]
fn ln1p_sq(s: f64) -> f64 {
    prototype::ln1p_pow(s, 2.0)
}

/// Scalar factor `c_n(s) = 1 / (n (1+s²)^((n−1)/(2n)))` of the
/// regularization term.
#[inline]
pub fn regularization_factor(s: f64, n: u32) -> f64 {
    let nf = f64::from(n);
    (-nf.ln() - (nf - 1.0) / (2.0 * nf) * ln1p_sq(s)).exp()
}

/// `|reg(T, n)|` as a function of `s = |T|`, evaluated in logarithms.
#[inline]
fn regularization_magnitude(s: f64, n: u32) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    let nf = f64::from(n);
    (s.ln() - nf.ln() - (nf - 1.0) / (2.0 * nf) * ln1p_sq(s)).exp()
}

/// `reg(T, n) = T / (n (1+|T|²)^((n−1)/(2n)))`.
pub fn regularization_term(t: &Tensor, n: u32) -> Tensor {
    t.scaled(regularization_factor(t.norm(), n))
}

/// The derivative `Bⁿ(T) = c_n (I − (n−1)/n · T⊗T/(1+|T|²))` of the
/// regularization term, flattened.
pub fn bn_matrix(t: &Tensor, n: u32) -> TensorMap {
    let m = t.len();
    let s = t.norm();
    let c = regularization_factor(s, n);
    let nf = f64::from(n);
    let w = c * (nf - 1.0) / nf / (1.0 + s * s);
    let ts = t.as_slice();
    let mut out = TensorMap::identity(m, m) * c;
    for k in 0..m {
        for l in 0..m {
            out[(k, l)] -= w * ts[k] * ts[l];
        }
    }
    out
}

/// Quadratic form `(B, B)_{Bⁿ(T)}`.
pub fn bn_form(t: &Tensor, n: u32, b: &Tensor) -> f64 {
    let s = t.norm();
    let c = regularization_factor(s, n);
    let nf = f64::from(n);
    let tb = t.dot(b);
    // (T·B)²/(1+s²) computed as (T̂·B)² s²/(1+s²) to stay finite for huge T.
    let proj = if s > 0.0 {
        let p = tb / s;
        p * p * (1.0 / (1.0 + 1.0 / (s * s)))
    } else {
        0.0
    };
    c * (b.norm_squared() - (nf - 1.0) / nf * proj)
}

/// Radial profile of `T ↦ D(T) + reg(T, n)` along the direction `dir`;
/// `n = None` drops the regularization.
fn relation_magnitude(law: &ConstitutiveLaw, dir: &Tensor, s: f64, n: Option<u32>) -> f64 {
    let base = match law.kind() {
        LawKind::Prototype { a } => prototype::magnitude(s, *a),
        LawKind::Custom(_) => law.response(&dir.scaled(s)).dot(dir),
    };
    base + n.map_or(0.0, |n| regularization_magnitude(s, n))
}

/// Solve `D(T) + reg(T, n) = E` for `T`.
///
/// The regularized relation is a bijection of the whole tensor space, so
/// every finite `E` has a (unique) solution. A scalar solve along `E/|E|`
/// is exact for radial laws such as the prototype; other laws are then
/// polished by Newton's method on the full relation.
pub fn invert_relation(law: &ConstitutiveLaw, e: &Tensor, n: u32) -> Result<Tensor> {
    if !e.is_finite() {
        return Err(Error::InvalidInput("strain tensor has non-finite entries".into()));
    }
    if n == 0 {
        return Err(Error::InvalidInput("regularization index must be at least 1".into()));
    }
    invert_cell(law, e, Some(n))
}

fn invert_cell(law: &ConstitutiveLaw, e: &Tensor, n: Option<u32>) -> Result<Tensor> {
    let ne = e.norm();
    if ne == 0.0 {
        // Odd laws map 0 to 0; for others the polish below starts at 0.
        if matches!(law.kind(), LawKind::Prototype { .. }) {
            return Ok(*e);
        }
    }
    if n.is_none() {
        return law.invert_d(e);
    }
    let dir = e
        .normalized()
        .unwrap_or_else(|| Tensor::unit_diagonal(e.rows(), e.cols()));
    let s = radial_solve(|s| relation_magnitude(law, &dir, s, n), ne, 1e-15 * ne.max(1e-300))?;
    let t = dir.scaled(s);
    if matches!(law.kind(), LawKind::Prototype { .. }) {
        return Ok(t);
    }
    let nn = n.unwrap_or(1);
    newton_polish(
        |t| law.response(t) + regularization_term(t, nn),
        |t| Ok(law.derivative_unchecked(t)? + bn_matrix(t, nn)),
        e,
        t,
        1e-13,
    )
}

/// Stress and tangent `dT/dE` of the cell relation at strain `E`.
///
/// With `n = None` the relation is `E = D(T)` (the primal problem), whose
/// inverse only exists inside the range of `D`.
pub(crate) fn cell_response(law: &ConstitutiveLaw, e: &Tensor, n: Option<u32>) -> Result<(Tensor, TensorMap)> {
    let t = invert_cell(law, e, n)?;
    let m = t.len();
    if let LawKind::Prototype { a } = law.kind() {
        // A + Bⁿ = α I + β T̂⊗T̂ with α + β the radial slope, so the
        // inverse is available in closed form.
        let s = t.norm();
        let phi = prototype::phi(s, *a);
        let (c, slope_reg) = match n {
            Some(n) => {
                let c = regularization_factor(s, n);
                let nf = f64::from(n);
                let frac = if s > 0.0 { 1.0 / (1.0 + 1.0 / (s * s)) } else { 0.0 };
                (c, c * (1.0 - (nf - 1.0) / nf * frac))
            }
            None => (0.0, 0.0),
        };
        let alpha = phi + c;
        let radial = prototype::h(s, *a) + slope_reg;
        let mut tangent = TensorMap::identity(m, m) / alpha;
        if s > 0.0 {
            let w = (1.0 / radial - 1.0 / alpha) / (s * s);
            let ts = t.as_slice();
            for k in 0..m {
                for l in 0..m {
                    tangent[(k, l)] += w * ts[k] * ts[l];
                }
            }
        }
        return Ok((t, tangent));
    }
    let mut jac = law.derivative_unchecked(&t)?;
    if let Some(n) = n {
        jac += bn_matrix(&t, n);
    }
    let inv = jac
        .try_inverse()
        .ok_or_else(|| Error::NumericalDegeneracy("singular relation derivative".into()))?;
    Ok((t, inv))
}

/// The boundary value problem without the regularization index.
#[derive(Debug, Clone)]
pub struct Problem {
    pub law: ConstitutiveLaw,
    pub mesh: MeshDomain,
    pub kind: GradientKind,
    /// Dirichlet datum as a nodal field on the whole mesh; its values off
    /// `Γ_D` serve as the initial guess.
    pub u0: Field,
    pub f: DataFn,
    pub g: DataFn,
}

impl Problem {
    pub fn new(
        law: ConstitutiveLaw,
        mesh: MeshDomain,
        kind: GradientKind,
        u0: Field,
        f: DataFn,
        g: DataFn,
    ) -> Result<Self> {
        let n = u0.components();
        if u0.n_nodes() != mesh.n_vertices() {
            return Err(Error::InvalidInput("u0 does not live on the mesh".into()));
        }
        crate::discretization::field::check_kind(&mesh, n, kind)?;
        if f.components() != n || g.components() != n {
            return Err(Error::InvalidInput(format!(
                "data components (f: {}, g: {}) differ from the displacement components {n}",
                f.components(),
                g.components()
            )));
        }
        Ok(Problem {
            law,
            mesh,
            kind,
            u0,
            f,
            g,
        })
    }

    /// Problem with `u0` interpolated from data.
    pub fn from_data(
        law: ConstitutiveLaw,
        mesh: MeshDomain,
        kind: GradientKind,
        u0: &DataFn,
        f: DataFn,
        g: DataFn,
    ) -> Result<Self> {
        let u0 = Field::interpolate(&mesh, u0);
        Self::new(law, mesh, kind, u0, f, g)
    }

    pub fn components(&self) -> usize {
        self.u0.components()
    }

    pub fn dofs(&self) -> DofMap {
        DofMap::new(&self.mesh, self.components(), self.kind)
    }

    /// Load vector over all dofs (zero on Dirichlet nodes).
    pub fn load(&self) -> Result<Vec<f64>> {
        assemble_load(
            &self.mesh,
            &self.f,
            &self.g,
            self.components(),
            self.kind,
            COMPATIBILITY_TOL,
        )
    }

    /// Strain of the boundary datum extension.
    pub fn datum_strain(&self) -> Result<CellTensorField> {
        gradient(&self.mesh, &self.u0, self.kind)
    }
}

/// One regularized problem: a [`Problem`] and an index `n ≥ d`.
#[derive(Debug, Clone, Copy)]
pub struct ApproxProblem<'a> {
    pub problem: &'a Problem,
    pub n: u32,
}

impl<'a> ApproxProblem<'a> {
    pub fn new(problem: &'a Problem, n: u32) -> Result<Self> {
        let d = problem.mesh.dim() as u32;
        if n < d {
            return Err(Error::InvalidInput(format!(
                "regularization index n = {n} must be at least d = {d}"
            )));
        }
        Ok(ApproxProblem { problem, n })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Newton stops when the residual is below `rtol` times the force scale.
    pub rtol: f64,
    /// Absolute residual floor.
    pub atol: f64,
    pub max_iterations: usize,
    /// Line-search halvings before giving up.
    pub max_halvings: usize,
    /// Required distance of `ε(u0)` from the range boundary.
    pub safety_margin: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rtol: 1e-10,
            atol: 1e-300,
            max_iterations: 200,
            max_halvings: 60,
            safety_margin: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub newton_iters: usize,
    pub final_residual: f64,
    /// Force scale the relative tolerance refers to.
    pub residual_scale: f64,
    /// Number of line-search halvings over the whole solve.
    pub damping_events: usize,
    pub residual_history: Vec<f64>,
    /// `max |ε(u) − D(T) − reg(T, n)|` over the cells.
    pub relation_residual: f64,
}

#[derive(Debug, Clone)]
pub struct ApproxSolution {
    pub u: Field,
    pub t: CellTensorField,
    pub strain: CellTensorField,
    pub n: u32,
    pub report: SolverReport,
}

/// Cell loops shared by the regularized and the primal Newton solvers.
pub(crate) struct Assembler<'a> {
    pub mesh: &'a MeshDomain,
    pub dofs: DofMap,
    pub kind: GradientKind,
    pub load: Vec<f64>,
    /// Per cell: `(free index, basis gradient)` for each local free dof.
    locals: Vec<Vec<(usize, Tensor)>>,
}

impl<'a> Assembler<'a> {
    pub fn new(mesh: &'a MeshDomain, dofs: DofMap, kind: GradientKind, load: Vec<f64>) -> Self {
        let components = dofs.components();
        let dim = mesh.dim();
        let locals = (0..mesh.n_cells())
            .map(|c| {
                let geom = mesh.geometry(c);
                let mut out = Vec::new();
                for (a, &v) in mesh.cell(c).iter().enumerate() {
                    for i in 0..components {
                        if let Some(k) = dofs.free_index(v * components + i) {
                            out.push((k, basis_gradient(geom, a, i, components, dim, kind)));
                        }
                    }
                }
                out
            })
            .collect();
        Assembler {
            mesh,
            dofs,
            kind,
            load,
            locals,
        }
    }

    pub fn strains(&self, u: &Field) -> Vec<Tensor> {
        (0..self.mesh.n_cells())
            .into_par_iter()
            .map(|c| cell_gradient(self.mesh, u, c, self.kind))
            .collect()
    }

    /// Free-dof residual `Σ_K |K| T_K·∇φ − L` and the gross force scale.
    pub fn residual(&self, stresses: &[Tensor]) -> (Vec<f64>, f64) {
        let nf = self.dofs.n_free();
        let mut r = vec![0.0; nf];
        let mut gross = vec![0.0; nf];
        for (c, locals) in self.locals.iter().enumerate() {
            let vol = self.mesh.geometry(c).volume;
            let t = &stresses[c];
            let tn = t.norm();
            for (k, b) in locals {
                r[*k] += vol * t.dot(b);
                gross[*k] += vol * tn * b.norm();
            }
        }
        let mut load_free = vec![0.0; nf];
        for (k, &d) in self.dofs.free().iter().enumerate() {
            r[k] -= self.load[d];
            load_free[k] = self.load[d];
        }
        let scale = norm2(&gross).max(norm2(&load_free));
        (r, scale)
    }

    pub fn tangent(&self, tangents: &[TensorMap]) -> CscMatrix<f64> {
        let blocks: Vec<Vec<(usize, usize, f64)>> = self
            .locals
            .par_iter()
            .enumerate()
            .map(|(c, locals)| {
                let vol = self.mesh.geometry(c).volume;
                let cm = &tangents[c];
                let mapped: Vec<Tensor> = locals.iter().map(|(_, b)| Tensor::apply(cm, b)).collect();
                let mut out = Vec::with_capacity(locals.len() * locals.len());
                for (p, (k, bk)) in locals.iter().enumerate() {
                    for (q, (l, _)) in locals.iter().enumerate() {
                        // Symmetrized: ½(B_k·C B_l + B_l·C B_k).
                        let v = 0.5 * vol * (bk.dot(&mapped[q]) + locals[q].1.dot(&mapped[p]));
                        out.push((*k, *l, v));
                    }
                }
                out
            })
            .collect();
        let mut trip = Triplets::new(self.dofs.n_free());
        for block in blocks {
            for (i, j, v) in block {
                trip.push(i, j, v);
            }
        }
        trip.to_csc()
    }

    pub fn with_free(&self, base: &Field, free: &[f64]) -> Field {
        let mut u = base.clone();
        for (k, &d) in self.dofs.free().iter().enumerate() {
            u.values_mut()[d] = free[k];
        }
        u
    }
}

/// Merit function of the Newton line search.
pub(crate) enum Merit<'m> {
    /// Armijo decrease of the residual norm.
    ResidualNorm,
    /// Armijo decrease of an energy `J(u, stresses)` (must be `+∞` where
    /// undefined).
    Energy(&'m (dyn Fn(&Field, &[Tensor]) -> f64 + Sync)),
}

pub(crate) struct NewtonOutcome {
    pub u: Field,
    pub strains: Vec<Tensor>,
    pub stresses: Vec<Tensor>,
    pub report: SolverReport,
}

type CellEval<'e> = &'e (dyn Fn(&Tensor) -> Result<(Tensor, TensorMap)> + Sync);

fn evaluate(asm: &Assembler<'_>, u: &Field, eval: CellEval<'_>) -> Result<(Vec<Tensor>, Vec<Tensor>, Vec<TensorMap>)> {
    let strains = asm.strains(u);
    let results: Vec<Result<(Tensor, TensorMap)>> = strains.par_iter().map(eval).collect();
    let mut stresses = Vec::with_capacity(results.len());
    let mut tangents = Vec::with_capacity(results.len());
    for r in results {
        let (t, c) = r?;
        stresses.push(t);
        tangents.push(c);
    }
    Ok((strains, stresses, tangents))
}

/// Damped Newton iteration on the free dofs of `u`.
pub(crate) fn newton(
    asm: &Assembler<'_>,
    init: Field,
    eval: CellEval<'_>,
    merit: Merit<'_>,
    opts: &SolverOptions,
) -> Result<NewtonOutcome> {
    let mut u = init;
    let (mut strains, mut stresses, mut tangents) = evaluate(asm, &u, eval)?;
    let (mut r, mut scale) = asm.residual(&stresses);
    let mut rn = norm2(&r);
    let mut history = vec![rn];
    let mut damping = 0usize;
    let mut energy = match &merit {
        Merit::Energy(j) => j(&u, &stresses),
        Merit::ResidualNorm => 0.0,
    };
    let mut iters = 0;
    while rn > opts.rtol * scale + opts.atol {
        if iters >= opts.max_iterations {
            return Err(Error::solver(
                format!(
                    "Newton did not converge in {} iterations (residual {rn:.3e})",
                    opts.max_iterations
                ),
                history,
            ));
        }
        iters += 1;
        if asm.dofs.n_free() == 0 {
            break;
        }
        let k = asm.tangent(&tangents);
        let solver = SpdSolver::factor(&k)?;
        let delta: Vec<f64> = solver.solve(&r).iter().map(|v| -v).collect();
        let x0 = asm.dofs.gather(u.values());
        let slope = dot(&r, &delta);
        let mut lambda = 1.0;
        let mut accepted = None;
        for halving in 0..=opts.max_halvings {
            let trial_free: Vec<f64> = x0.iter().zip(&delta).map(|(x, d)| x + lambda * d).collect();
            let trial = asm.with_free(&u, &trial_free);
            if let Ok((ts, tt, tc)) = evaluate(asm, &trial, eval) {
                let (tr, tscale) = asm.residual(&tt);
                let trn = norm2(&tr);
                let ok = match &merit {
                    Merit::ResidualNorm => trn.is_finite() && trn <= (1.0 - 1e-4 * lambda) * rn,
                    Merit::Energy(j) => {
                        let e = j(&trial, &tt);
                        let ok = e.is_finite() && e <= energy + 1e-4 * lambda * slope.min(0.0);
                        // Energy stalls at roundoff near the minimizer; accept a
                        // residual decrease there.
                        let stalled = e.is_finite() && (e - energy).abs() <= 1e-14 * energy.abs().max(1.0) && trn < rn;
                        if ok || stalled {
                            energy = e;
                        }
                        ok || stalled
                    }
                };
                if ok {
                    accepted = Some((trial, ts, tt, tc, tr, tscale, trn));
                    damping += halving;
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((nu, ns, nt, nc, nr, nscale, nrn)) = accepted else {
            return Err(Error::solver(
                format!(
                    "line search exhausted after {} halvings (residual {rn:.3e})",
                    opts.max_halvings
                ),
                history,
            ));
        };
        u = nu;
        strains = ns;
        stresses = nt;
        tangents = nc;
        r = nr;
        scale = nscale;
        rn = nrn;
        history.push(rn);
    }
    Ok(NewtonOutcome {
        u,
        strains,
        stresses,
        report: SolverReport {
            newton_iters: iters,
            final_residual: rn,
            residual_scale: scale,
            damping_events: damping,
            residual_history: history,
            relation_residual: 0.0,
        },
    })
}

/// Check the safety strain condition on the datum extension.
pub(crate) fn require_safe_datum(problem: &Problem, margin: f64) -> Result<()> {
    if !problem.mesh.has_dirichlet() {
        return Ok(());
    }
    let strain = problem.datum_strain()?;
    let report = safety_strain_check(&problem.law, &strain, margin);
    if !report.satisfied {
        return Err(Error::SafetyStrain(format!(
            "the datum's strain comes within {:.3e} of the range boundary (margin {margin:e})",
            report.margin_to_range_boundary
        )));
    }
    Ok(())
}

/// Solve one regularized problem, optionally warm-started.
pub fn solve_approx(
    ap: &ApproxProblem<'_>,
    warm_start: Option<&Field>,
    opts: &SolverOptions,
) -> Result<ApproxSolution> {
    let problem = ap.problem;
    let n = ap.n;
    require_safe_datum(problem, opts.safety_margin)?;
    let load = problem.load()?;
    let dofs = problem.dofs();
    let asm = Assembler::new(&problem.mesh, dofs, problem.kind, load);
    let init = match warm_start {
        Some(w) => {
            if w.values().len() != problem.u0.values().len() {
                return Err(Error::InvalidInput("warm start does not match the problem size".into()));
            }
            // Dirichlet values always come from u0.
            let free = asm.dofs.gather(w.values());
            asm.with_free(&problem.u0, &free)
        }
        None => problem.u0.clone(),
    };
    let law = &problem.law;
    let eval = move |e: &Tensor| cell_response(law, e, Some(n));
    let out = newton(&asm, init, &eval, Merit::ResidualNorm, opts).map_err(|e| e.with_context(&format!("n = {n}")))?;
    finish(problem, n, out)
}

fn finish(problem: &Problem, n: u32, out: NewtonOutcome) -> Result<ApproxSolution> {
    let NewtonOutcome {
        mut u,
        strains,
        mut stresses,
        mut report,
    } = out;
    if problem.kind == GradientKind::Symmetric {
        for t in &mut stresses {
            *t = t.symmetric_part();
        }
    }
    report.relation_residual = strains
        .iter()
        .zip(&stresses)
        .map(|(e, t)| (*e - problem.law.response(t) - regularization_term(t, n)).norm())
        .fold(0.0, f64::max);
    if problem.mesh.has_dirichlet() {
        // Exact Dirichlet values.
        for (v, &d) in problem.mesh.dirichlet_nodes().iter().enumerate() {
            if d {
                for i in 0..u.components() {
                    let k = u.dof(v, i);
                    u.values_mut()[k] = problem.u0.values()[k];
                }
            }
        }
    } else {
        remove_rigid_part(&problem.mesh, &mut u, problem.kind);
    }
    let t = CellTensorField::from_cell_values(&problem.mesh, stresses)?;
    let strain = gradient(&problem.mesh, &u, problem.kind)?;
    Ok(ApproxSolution {
        u,
        t,
        strain,
        n,
        report,
    })
}

/// Solve along a strictly increasing schedule, warm-starting each solve
/// from the previous displacement.
pub fn continuation_solve(problem: &Problem, schedule: &[u32], opts: &SolverOptions) -> Result<Vec<ApproxSolution>> {
    validate_schedule(schedule, problem.mesh.dim())?;
    let mut out: Vec<ApproxSolution> = Vec::with_capacity(schedule.len());
    for &n in schedule {
        let ap = ApproxProblem::new(problem, n)?;
        let warm = out.last().map(|s| &s.u);
        let sol = solve_approx(&ap, warm, opts)?;
        out.push(sol);
    }
    Ok(out)
}

/// Continuation from a given initial displacement (instead of the datum
/// extension) for the first solve.
pub fn continuation_solve_from(
    problem: &Problem,
    schedule: &[u32],
    init: &Field,
    opts: &SolverOptions,
) -> Result<Vec<ApproxSolution>> {
    validate_schedule(schedule, problem.mesh.dim())?;
    let mut out: Vec<ApproxSolution> = Vec::with_capacity(schedule.len());
    for &n in schedule {
        let ap = ApproxProblem::new(problem, n)?;
        let warm = out.last().map(|s| &s.u).unwrap_or(init);
        out.push(solve_approx(&ap, Some(warm), opts)?);
    }
    Ok(out)
}

/// Non-empty, strictly increasing, first entry at least `dim`.
pub fn validate_schedule(schedule: &[u32], dim: usize) -> Result<()> {
    let d = dim as u32;
    if schedule.is_empty() {
        return Err(Error::InvalidInput("empty schedule".into()));
    }
    if schedule[0] < d {
        return Err(Error::InvalidInput(format!(
            "schedule starts at {} < d = {d}",
            schedule[0]
        )));
    }
    if schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("schedule must be strictly increasing".into()));
    }
    Ok(())
}

/// `d, 2d, 4d, …` up to [`DEFAULT_SCHEDULE_CAP`].
pub fn default_schedule(dim: usize) -> Vec<u32> {
    let mut out = Vec::new();
    let mut n = dim.max(1) as u32;
    while n <= DEFAULT_SCHEDULE_CAP {
        out.push(n);
        n *= 2;
    }
    out
}

/// `‖reg(T, n)‖₁`.
pub fn regularization_l1(t: &CellTensorField, n: u32) -> f64 {
    t.integrate(|t, _| regularization_term(t, n).norm())
}

/// Run the default schedule, stopping once `‖reg(Tⁿ, n)‖₁` falls below
/// [`DEFAULT_SCHEDULE_REG_STOP`].
pub fn continuation_default(problem: &Problem, opts: &SolverOptions) -> Result<Vec<ApproxSolution>> {
    let schedule = default_schedule(problem.mesh.dim());
    let mut out: Vec<ApproxSolution> = Vec::new();
    for n in schedule {
        let ap = ApproxProblem::new(problem, n)?;
        let sol = solve_approx(&ap, out.last().map(|s| &s.u), opts)?;
        let stop = regularization_l1(&sol.t, n) < DEFAULT_SCHEDULE_REG_STOP;
        out.push(sol);
        if stop {
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{build_structured_mesh, GeometrySpec};

    fn proto(a: f64) -> ConstitutiveLaw {
        ConstitutiveLaw::prototype(a).unwrap()
    }

    #[test]
    fn regularization_examples() {
        assert_eq!(regularization_term(&Tensor::scalar(0.0), 4).norm(), 0.0);
        let r = regularization_term(&Tensor::scalar(1.0), 4);
        assert!((r.norm() - 1.0 / (4.0 * 2f64.powf(0.375))).abs() < 1e-15);
        assert!((r.norm() - 0.192_776_4).abs() < 1e-7);
    }

    #[test]
    fn bn_examples() {
        let b = Tensor::from_rows(&[[0.6, 0.0], [0.0, 0.8]]);
        assert!((bn_form(&Tensor::zeros(2, 2), 2, &b) - 0.5).abs() < 1e-15);
        assert_eq!(bn_form(&Tensor::scalar(3.0), 5, &Tensor::scalar(0.0)), 0.0);
        let t = Tensor::from_rows(&[[1.0, -2.0], [0.5, 3.0]]);
        let m = bn_matrix(&t, 7);
        assert!((Tensor::bilinear(&m, &b, &b) - bn_form(&t, 7, &b)).abs() < 1e-15);
    }

    #[test]
    fn invert_relation_scalar_oracle() {
        let law = proto(2.0);
        assert_eq!(invert_relation(&law, &Tensor::scalar(0.0), 8).unwrap().norm(), 0.0);
        let t = invert_relation(&law, &Tensor::scalar(0.9), 8).unwrap()[(0, 0)];
        let map = |t: f64| t / (1.0 + t * t).sqrt() + t / (8.0 * (1.0 + t * t).powf(7.0 / 16.0));
        // independent bisection
        let (mut lo, mut hi) = (0.0, 100.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if map(mid) < 0.9 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((t - lo).abs() < 1e-10 * lo);
        let big = invert_relation(&law, &Tensor::scalar(2.0), 8).unwrap()[(0, 0)];
        assert!(big.is_finite() && big > 1e6);
        assert!((map(big) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn cell_tangent_matches_finite_differences() {
        let law = proto(1.5);
        let e = Tensor::from_rows(&[[0.3, 0.2], [0.2, -0.4]]);
        let (t, c) = cell_response(&law, &e, Some(6)).unwrap();
        assert!((law.response(&t) + regularization_term(&t, 6) - e).norm() < 1e-13);
        for l in 0..4 {
            let mut ep = e;
            let mut em = e;
            ep.as_mut_slice()[l] += 1e-6;
            em.as_mut_slice()[l] -= 1e-6;
            let tp = invert_relation(&law, &ep, 6).unwrap();
            let tm = invert_relation(&law, &em, 6).unwrap();
            for k in 0..4 {
                let fd = (tp.as_slice()[k] - tm.as_slice()[k]) / 2e-6;
                assert!((fd - c[(k, l)]).abs() < 1e-6 * (1.0 + fd.abs()), "{k},{l}");
            }
        }
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let mesh = build_structured_mesh(&GeometrySpec::unit_square(4), &["left"]).unwrap();
        let p = Problem::from_data(
            proto(2.0),
            mesh,
            GradientKind::Symmetric,
            &DataFn::zero(2),
            DataFn::zero(2),
            DataFn::zero(2),
        )
        .unwrap();
        let sols = continuation_solve(&p, &[8, 16], &SolverOptions::default()).unwrap();
        for s in sols {
            assert_eq!(s.u.max_abs(), 0.0);
            assert_eq!(s.t.norm(f64::INFINITY), 0.0);
        }
    }

    #[test]
    fn schedule_validation() {
        let mesh = build_structured_mesh(&GeometrySpec::unit_square(2), &["left"]).unwrap();
        let p = Problem::from_data(
            proto(2.0),
            mesh,
            GradientKind::Full,
            &DataFn::zero(2),
            DataFn::zero(2),
            DataFn::zero(2),
        )
        .unwrap();
        let o = SolverOptions::default();
        assert!(continuation_solve(&p, &[1], &o).is_err());
        assert!(continuation_solve(&p, &[4, 4], &o).is_err());
        assert_eq!(default_schedule(2), vec![2, 4, 8, 16, 32, 64, 128, 256]);
    }
}
