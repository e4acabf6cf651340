//! Diagnostics along the regularization schedule: a-priori bounds,
//! renormalized equilibrium residuals, a discrete maximal function for
//! locating stress concentration, the boundary defect on `Γ_N`, and
//! mollified direction fields.

use rayon::prelude::*;

use crate::constitutive::{linear_fit, ConstitutiveLaw};
use crate::discretization::assembly::assemble_load_raw;
use crate::discretization::field::cell_to_nodal;
use crate::discretization::mesh::distance;
use crate::discretization::{
    basis_gradient, cell_gradient, CellTensorField, DataFn, FacetTag, Field, GradientKind, MeshDomain,
};
use crate::error::{Error, Result};
use crate::potentials::h_tilde;
use crate::quadrature::{integrate, QUADRATURE_TOL};
use crate::regularized::{regularization_l1, ApproxSolution};
use crate::tensor::Tensor;

/// Growth exponent above which a vertex is flagged as concentrating.
pub const CONCENTRATING_EXPONENT: f64 = 0.25;
/// Growth exponent above which a vertex is flagged as suspicious.
pub const SUSPICIOUS_EXPONENT: f64 = 0.1;
/// Minimum coefficient of determination of the exponent fit.
pub const MIN_FIT_R2: f64 = 0.9;
/// Radii needed before a vertex can be flagged as concentrating.
pub const MIN_FIT_RADII: usize = 4;
/// `|T|` below this is treated as zero when normalizing directions.
pub const DIRECTION_ZERO: f64 = 1e-12;

/// Cutoff `τ_k`: 1 on `[0, k]`, 0 on `[2k, ∞)`, a cubic smoothstep between.
pub fn tau_k(s: f64, k: f64) -> f64 {
    if s <= k {
        1.0
    } else if s >= 2.0 * k {
        0.0
    } else {
        let x = (s - k) / k;
        1.0 - x * x * (3.0 - 2.0 * x)
    }
}

/// `τ_k′(s)`; bounded by `1.5/k`.
pub fn dtau_k(s: f64, k: f64) -> f64 {
    if s <= k || s >= 2.0 * k {
        0.0
    } else {
        let x = (s - k) / k;
        -6.0 * x * (1.0 - x) / k
    }
}

/// `G_k(s) = ∫₀ˢ τ_k′(t) g(t) dt`.
pub fn g_k<G: Fn(f64) -> f64>(s: f64, k: f64, g: G) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::InvalidInput(format!("cutoff level must be positive, got {k}")));
    }
    if s <= k {
        return Ok(0.0);
    }
    let hi = s.min(2.0 * k);
    Ok(integrate(|t| dtau_k(t, k) * g(t), k, hi, QUADRATURE_TOL, 100_000)?.value)
}

/// `G_k` with the law's weight `g`.
pub fn g_k_law(law: &ConstitutiveLaw, s: f64, k: f64) -> Result<f64> {
    if law.g(1.0).is_none() {
        return Err(Error::InvalidInput("the law has no weight g".into()));
    }
    g_k(s, k, |t| law.g(t).unwrap_or(f64::NAN))
}

/// Renormalized equilibrium check at one cutoff level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenormResidual {
    pub k: f64,
    /// `|∫T·ε(ψ) − ∫f·ψ|` for `ψ = I_h(w τ_k(|T|))`.
    pub residual: f64,
    /// `|∫ T_ij w_i ∂_j τ_k(|T|)|`.
    pub transport: f64,
}

/// `|T|` per cell (cell means).
pub fn cell_magnitudes(t: &CellTensorField) -> Vec<f64> {
    (0..t.n_cells()).map(|c| t.cell_mean(c).norm()).collect()
}

/// `|∫T·ε(ψ) − ∫f·ψ|`.
fn tested_residual(mesh: &MeshDomain, kind: GradientKind, t: &CellTensorField, raw_f: &[f64], psi: &Field) -> f64 {
    let per = t.points_per_cell();
    let mut lhs = 0.0;
    for (q, (tq, w)) in t.values().iter().zip(t.weights()).enumerate() {
        lhs += w * tq.dot(&cell_gradient(mesh, psi, q / per, kind));
    }
    let rhs: f64 = raw_f.iter().zip(psi.values()).map(|(a, b)| a * b).sum();
    (lhs - rhs).abs()
}

/// `|∫T·ε(w) − ∫f·w|` for a test function vanishing on the boundary.
pub fn equilibrium_residual(
    mesh: &MeshDomain,
    kind: GradientKind,
    t: &CellTensorField,
    f: &DataFn,
    w: &Field,
) -> Result<f64> {
    check_compact(mesh, w)?;
    let raw = assemble_load_raw(mesh, f, &DataFn::zero(w.components()), w.components());
    Ok(tested_residual(mesh, kind, t, &raw, w))
}

fn check_compact(mesh: &MeshDomain, w: &Field) -> Result<()> {
    if w.n_nodes() != mesh.n_vertices() {
        return Err(Error::InvalidInput("test function does not live on the mesh".into()));
    }
    for (v, &b) in mesh.boundary_nodes().iter().enumerate() {
        if b && w.node(v).iter().any(|x| *x != 0.0) {
            return Err(Error::InvalidInput(format!(
                "test function does not vanish at boundary node {v}"
            )));
        }
    }
    Ok(())
}

/// Renormalized residual at cutoff `k`.
///
/// `|T|` is first averaged to a P1 field so that `τ_k(|T|)` has a cellwise
/// gradient; the test function is the P1 interpolant of `w τ_k(|T|)`.
pub fn renorm_residual(
    mesh: &MeshDomain,
    kind: GradientKind,
    t: &CellTensorField,
    f: &DataFn,
    w: &Field,
    k: f64,
) -> Result<RenormResidual> {
    Ok(renorm_ladder(mesh, kind, t, f, w, &[k])?[0])
}

/// [`renorm_residual`] for each level of a ladder.
pub fn renorm_ladder(
    mesh: &MeshDomain,
    kind: GradientKind,
    t: &CellTensorField,
    f: &DataFn,
    w: &Field,
    ks: &[f64],
) -> Result<Vec<RenormResidual>> {
    check_compact(mesh, w)?;
    if ks.iter().any(|k| !(*k > 0.0)) {
        return Err(Error::InvalidInput("cutoff levels must be positive".into()));
    }
    let n = w.components();
    let raw = assemble_load_raw(mesh, f, &DataFn::zero(n), n);
    let nodal = cell_to_nodal(mesh, &cell_magnitudes(t));
    let per = t.points_per_cell();
    Ok(ks
        .par_iter()
        .map(|&k| {
            let tau: Vec<f64> = nodal.iter().map(|&s| tau_k(s, k)).collect();
            let mut psi = w.clone();
            for (v, &tv) in tau.iter().enumerate() {
                for i in 0..n {
                    let d = psi.dof(v, i);
                    psi.values_mut()[d] *= tv;
                }
            }
            let residual = tested_residual(mesh, kind, t, &raw, &psi);
            let mut transport = 0.0;
            for (q, (tq, wq)) in t.values().iter().zip(t.weights()).enumerate() {
                let c = q / per;
                let geom = mesh.geometry(c);
                let cell = mesh.cell(c);
                let mut grad = [0.0; 3];
                let mut wbar = [0.0; 3];
                for (a, &v) in cell.iter().enumerate() {
                    for (j, g) in grad.iter_mut().enumerate().take(mesh.dim()) {
                        *g += tau[v] * geom.grads[a][j];
                    }
                    for (i, wb) in wbar.iter_mut().enumerate().take(n) {
                        *wb += w.node(v)[i] / cell.len() as f64;
                    }
                }
                let mut s = 0.0;
                for i in 0..n {
                    for (j, g) in grad.iter().enumerate().take(mesh.dim()) {
                        s += tq[(i, j)] * wbar[i] * g;
                    }
                }
                transport += wq * s;
            }
            RenormResidual {
                k,
                residual,
                transport: transport.abs(),
            }
        })
        .collect())
}

/// Nearest-rank quantiles of the cellwise `|T|`.
pub fn quantile_ladder(t: &CellTensorField, qs: &[f64]) -> Vec<f64> {
    let mut m = cell_magnitudes(t);
    m.sort_by(f64::total_cmp);
    qs.iter()
        .map(|q| {
            if m.is_empty() {
                return 0.0;
            }
            let idx = ((q.clamp(0.0, 1.0) * m.len() as f64).ceil() as usize).clamp(1, m.len()) - 1;
            m[idx]
        })
        .collect()
}

/// P1 test function `Π sin(π (x_j − lo_j)/(hi_j − lo_j))` over the mesh's
/// bounding box in every component, zeroed on boundary nodes.
pub fn interior_bump(mesh: &MeshDomain, components: usize) -> Field {
    let dim = mesh.dim();
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in mesh.vertices() {
        for j in 0..dim {
            lo[j] = lo[j].min(p[j]);
            hi[j] = hi[j].max(p[j]);
        }
    }
    let mut w = Field::zeros(mesh.n_vertices(), components);
    for (v, (&b, p)) in mesh.boundary_nodes().iter().zip(mesh.vertices()).enumerate() {
        if b {
            continue;
        }
        let mut val = 1.0;
        for j in 0..dim {
            val *= (std::f64::consts::PI * (p[j] - lo[j]) / (hi[j] - lo[j])).sin();
        }
        for i in 0..components {
            let d = w.dof(v, i);
            w.values_mut()[d] = val;
        }
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ConcentrationFlag {
    Clean,
    Suspicious,
    Concentrating,
}

impl ConcentrationFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            ConcentrationFlag::Clean => "clean",
            ConcentrationFlag::Suspicious => "suspicious",
            ConcentrationFlag::Concentrating => "concentrating",
        }
    }

    /// Flag for a fitted exponent.
    pub fn classify(exponent: f64, r2: f64, radii: usize) -> Self {
        if exponent > CONCENTRATING_EXPONENT && r2 > MIN_FIT_R2 && radii >= MIN_FIT_RADII {
            ConcentrationFlag::Concentrating
        } else if exponent > SUSPICIOUS_EXPONENT {
            ConcentrationFlag::Suspicious
        } else {
            ConcentrationFlag::Clean
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexConcentration {
    pub vertex: usize,
    /// Ball average per radius of the ladder.
    pub averages: Vec<f64>,
    /// Average over the cells containing the vertex.
    pub patch_average: f64,
    /// Largest of the patch and ball averages.
    pub maximal: f64,
    /// `−d log(average) / d log(radius)`.
    pub exponent: f64,
    pub r2: f64,
    pub flag: ConcentrationFlag,
    pub interior: bool,
    /// Tag of the closest boundary facet and the distance to its centroid.
    pub nearest_tag: FacetTag,
    pub boundary_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularSupportMap {
    pub radii: Vec<f64>,
    pub vertices: Vec<VertexConcentration>,
}

impl SingularSupportMap {
    pub fn count(&self, flag: ConcentrationFlag, interior_only: bool) -> usize {
        self.vertices
            .iter()
            .filter(|v| v.flag == flag && (!interior_only || v.interior))
            .count()
    }
}

/// Discrete maximal function of a cellwise scalar: per vertex, volume
/// averages over the cells whose centroid lies within each radius (the
/// vertex patch is always included), and a power-law fit of the averages
/// against the radius.
pub fn maximal_function(mesh: &MeshDomain, cell_values: &[f64], radii: &[f64]) -> Result<SingularSupportMap> {
    if cell_values.len() != mesh.n_cells() {
        return Err(Error::InvalidInput("one value per cell expected".into()));
    }
    if radii.is_empty() || radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("radii must be strictly decreasing".into()));
    }
    let hmin = mesh.min_cell_diameter();
    let smallest = radii[radii.len() - 1];
    if smallest < 2.0 * hmin * (1.0 - 1e-12) {
        return Err(Error::Config(format!(
            "radius {smallest:e} is below twice the smallest cell diameter {hmin:e}"
        )));
    }
    let centroids: Vec<_> = (0..mesh.n_cells()).map(|c| mesh.geometry(c).centroid).collect();
    let vols: Vec<f64> = (0..mesh.n_cells()).map(|c| mesh.geometry(c).volume).collect();
    let vertices = (0..mesh.n_vertices())
        .into_par_iter()
        .map(|v| {
            let x = mesh.vertex(v);
            let patch = mesh.vertex_patch(v);
            let avg = |cells: &mut dyn Iterator<Item = usize>| {
                let (mut num, mut den) = (0.0, 0.0);
                for c in cells {
                    num += vols[c] * cell_values[c];
                    den += vols[c];
                }
                num / den
            };
            let patch_average = avg(&mut patch.iter().copied());
            let averages: Vec<f64> = radii
                .iter()
                .map(|&r| {
                    avg(&mut (0..mesh.n_cells()).filter(|&c| distance(&centroids[c], x) <= r || patch.contains(&c)))
                })
                .collect();
            let maximal = averages.iter().copied().fold(patch_average, f64::max);
            let (exponent, r2) = fit_exponent(radii, &averages);
            let (nearest_tag, boundary_distance) = mesh
                .facets()
                .iter()
                .map(|f| (f.tag, distance(&f.centroid, x)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap_or((FacetTag::Dirichlet, f64::INFINITY));
            VertexConcentration {
                vertex: v,
                flag: ConcentrationFlag::classify(exponent, r2, radii.len()),
                averages,
                patch_average,
                maximal,
                exponent,
                r2,
                interior: !mesh.boundary_nodes()[v],
                nearest_tag,
                boundary_distance,
            }
        })
        .collect();
    Ok(SingularSupportMap {
        radii: radii.to_vec(),
        vertices,
    })
}

fn fit_exponent(radii: &[f64], averages: &[f64]) -> (f64, f64) {
    let max = averages.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) || radii.len() < 2 {
        return (0.0, 1.0);
    }
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(averages)
        .filter(|(_, a)| **a > 0.0)
        .map(|(r, a)| (r.ln(), a.ln()))
        .collect();
    let mean = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let spread = pts.iter().map(|p| (p.1 - mean).abs()).fold(0.0, f64::max);
    if spread <= 1e-12 {
        return (0.0, 1.0);
    }
    match linear_fit(&pts) {
        Some((slope, r2)) => (-slope, r2),
        None => (0.0, 1.0),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FacetDefect {
    pub facet: usize,
    /// `∫f·w̃ + ∫_{Γ_N} g·w̃ − ∫T·ε(w̃)` per component.
    pub defect: Vec<f64>,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDefectEstimate {
    pub facets: Vec<FacetDefect>,
    /// `Σ |defect|` over the facet family.
    pub total_variation: f64,
    /// No Neumann boundary: the defect is absent by construction.
    pub absent: bool,
}

/// Defect of the flux on `Γ_N` against facet bumps.
///
/// The bump of facet `F` is `Σ_a φ_a / m_a` over its vertices `a` not on
/// `Γ_D`, where `m_a` counts the Neumann facets containing `a`; the bumps
/// sum to one on the Neumann nodes.
pub fn boundary_defect(
    mesh: &MeshDomain,
    kind: GradientKind,
    t: &CellTensorField,
    f: &DataFn,
    g: &DataFn,
) -> Result<BoundaryDefectEstimate> {
    let n = f.components();
    if g.components() != n {
        return Err(Error::InvalidInput("f and g differ in components".into()));
    }
    if !mesh.has_neumann() {
        return Ok(BoundaryDefectEstimate {
            facets: Vec::new(),
            total_variation: 0.0,
            absent: true,
        });
    }
    let dim = mesh.dim();
    let mut r = assemble_load_raw(mesh, f, g, n);
    for v in r.iter_mut() {
        *v = -*v;
    }
    let per = t.points_per_cell();
    for (q, (tq, w)) in t.values().iter().zip(t.weights()).enumerate() {
        let c = q / per;
        let geom = mesh.geometry(c);
        for (a, &v) in mesh.cell(c).iter().enumerate() {
            for i in 0..n {
                r[v * n + i] += w * tq.dot(&basis_gradient(geom, a, i, n, dim, kind));
            }
        }
    }
    let mut multiplicity = vec![0usize; mesh.n_vertices()];
    for (_, facet) in mesh.neumann_facets() {
        for &a in facet.nodes(dim) {
            multiplicity[a] += 1;
        }
    }
    let dirichlet = mesh.dirichlet_nodes();
    let mut facets = Vec::new();
    let mut tv = 0.0;
    for (idx, facet) in mesh.neumann_facets() {
        let mut defect = vec![0.0; n];
        for &a in facet.nodes(dim) {
            if dirichlet[a] {
                continue;
            }
            for (i, d) in defect.iter_mut().enumerate() {
                *d -= r[a * n + i] / multiplicity[a] as f64;
            }
        }
        let magnitude = defect.iter().map(|d| d * d).sum::<f64>().sqrt();
        tv += magnitude;
        facets.push(FacetDefect {
            facet: idx,
            defect,
            magnitude,
        });
    }
    Ok(BoundaryDefectEstimate {
        facets,
        total_variation: tv,
        absent: false,
    })
}

/// Mollified unit direction fields at one radius.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionFields {
    pub eps: f64,
    /// Normalized ball average of `ε(u)/α`, per cell.
    pub strain: Vec<Tensor>,
    /// Normalized ball average of `T/|T|`, per cell.
    pub stress: Vec<Tensor>,
}

/// Ball-average mollification of `ε(u)/α` and `T/|T|`, renormalized to
/// unit length (zero where the average vanishes).
pub fn direction_fields(
    mesh: &MeshDomain,
    t: &CellTensorField,
    strain: &CellTensorField,
    alpha: f64,
    eps_ladder: &[f64],
) -> Result<Vec<DirectionFields>> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidInput(format!("alpha must be positive, got {alpha}")));
    }
    let hmin = mesh.min_cell_diameter();
    if let Some(e) = eps_ladder.iter().find(|e| **e < 2.0 * hmin * (1.0 - 1e-12)) {
        return Err(Error::Config(format!(
            "mollification radius {e:e} is below twice the smallest cell diameter {hmin:e}"
        )));
    }
    let nc = mesh.n_cells();
    let centroids: Vec<_> = (0..nc).map(|c| mesh.geometry(c).centroid).collect();
    let vols: Vec<f64> = (0..nc).map(|c| mesh.geometry(c).volume).collect();
    let s_dir: Vec<Tensor> = (0..nc).map(|c| strain.cell_mean(c).scaled(1.0 / alpha)).collect();
    let t_dir: Vec<Tensor> = (0..nc)
        .map(|c| {
            let m = t.cell_mean(c);
            let n = m.norm();
            if n < DIRECTION_ZERO {
                m.scaled(0.0)
            } else {
                m.scaled(1.0 / n)
            }
        })
        .collect();
    let unit = |m: Tensor| {
        if m.norm() < DIRECTION_ZERO {
            m.scaled(0.0)
        } else {
            m.scaled(1.0 / m.norm())
        }
    };
    Ok(eps_ladder
        .iter()
        .map(|&eps| {
            let (strain, stress): (Vec<Tensor>, Vec<Tensor>) = (0..nc)
                .into_par_iter()
                .map(|c| {
                    let mut a = s_dir[c].scaled(0.0);
                    let mut b = t_dir[c].scaled(0.0);
                    for k in 0..nc {
                        if distance(&centroids[k], &centroids[c]) <= eps {
                            a += s_dir[k].scaled(vols[k]);
                            b += t_dir[k].scaled(vols[k]);
                        }
                    }
                    (unit(a), unit(b))
                })
                .unzip();
            DirectionFields { eps, strain, stress }
        })
        .collect())
}

/// `L¹` distance over `cells` between successive stress direction fields
/// of a ladder.
pub fn direction_cauchy_differences(mesh: &MeshDomain, fields: &[DirectionFields], cells: &[usize]) -> Vec<f64> {
    fields
        .windows(2)
        .map(|w| {
            cells
                .iter()
                .map(|&c| mesh.geometry(c).volume * (w[1].stress[c] - w[0].stress[c]).norm())
                .sum()
        })
        .collect()
}

/// One row of the a-priori trace.
#[derive(Debug, Clone, PartialEq)]
pub struct AprioriRow {
    pub n: u32,
    /// `‖Tⁿ‖₁`.
    pub t_l1: f64,
    /// `‖Tⁿ‖_{1+1/n}^{1+1/n} / n`.
    pub t_power: f64,
    /// `‖ε(uⁿ)‖_{n+1}`.
    pub strain_norm: f64,
    /// `‖reg(Tⁿ, n)‖₁`.
    pub reg_l1: f64,
    pub t_sup: f64,
    pub strain_sup: f64,
    /// `‖h̃(|Tⁿ|) Tⁿ‖₁`, when a law was supplied.
    pub b_l1: Option<f64>,
}

impl AprioriRow {
    /// `‖Tⁿ‖₁ + ‖Tⁿ‖_{1+1/n}^{1+1/n}/n`.
    pub fn bound_quantity(&self) -> f64 {
        self.t_l1 + self.t_power
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AprioriTrace {
    pub rows: Vec<AprioriRow>,
    /// `‖Tⁿ‖₁` grew by more than a factor 10 along the schedule.
    pub growth_violation: bool,
}

impl AprioriTrace {
    pub fn reg_strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].reg_l1 < w[0].reg_l1)
    }

    /// `max / min` of [`AprioriRow::bound_quantity`] over the schedule.
    pub fn bound_ratio(&self) -> f64 {
        let q: Vec<f64> = self.rows.iter().map(AprioriRow::bound_quantity).collect();
        let max = q.iter().copied().fold(0.0, f64::max);
        let min = q.iter().copied().fold(f64::INFINITY, f64::min);
        if max == 0.0 {
            1.0
        } else {
            max / min
        }
    }
}

/// `(∫|x|^p)^{1/p}` evaluated relative to the maximum so large `p` do not
/// underflow.
fn lp_norm(tf: &CellTensorField, p: f64) -> f64 {
    let max = tf.norm(f64::INFINITY);
    if max == 0.0 {
        return 0.0;
    }
    let s = tf.integrate(|t, _| (t.norm() / max).powf(p));
    max * s.powf(1.0 / p)
}

/// A-priori quantities along a continuation run.
pub fn apriori_monitor(solutions: &[ApproxSolution], law: Option<&ConstitutiveLaw>) -> Result<AprioriTrace> {
    if solutions.is_empty() {
        return Err(Error::InvalidInput("no solutions to monitor".into()));
    }
    if solutions.windows(2).any(|w| w[1].n <= w[0].n) {
        return Err(Error::InvalidInput("solutions must have increasing n".into()));
    }
    let mut rows = Vec::with_capacity(solutions.len());
    for s in solutions {
        let n = s.n;
        let nf = f64::from(n);
        let p = 1.0 + 1.0 / nf;
        let b_l1 = match law {
            Some(law) => {
                let vals: Vec<Result<f64>> =
                    s.t.values()
                        .par_iter()
                        .zip(s.t.weights())
                        .map(|(t, w)| Ok(w * h_tilde(law, t.norm())? * t.norm()))
                        .collect();
                Some(vals.into_iter().sum::<Result<f64>>()?)
            }
            None => None,
        };
        rows.push(AprioriRow {
            n,
            t_l1: s.t.norm(1.0),
            t_power: s.t.integrate(|t, _| t.norm().powf(p)) / nf,
            strain_norm: lp_norm(&s.strain, nf + 1.0),
            reg_l1: regularization_l1(&s.t, n),
            t_sup: s.t.norm(f64::INFINITY),
            strain_sup: s.strain.norm(f64::INFINITY),
            b_l1,
        });
    }
    let mut growth = false;
    let mut running_min = f64::INFINITY;
    for r in &rows {
        if running_min > 0.0 && running_min.is_finite() && r.t_l1 > 10.0 * running_min {
            growth = true;
        }
        running_min = running_min.min(r.t_l1);
    }
    Ok(AprioriTrace {
        rows,
        growth_violation: growth,
    })
}
