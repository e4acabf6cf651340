//! The five run commands and the files they write.

use std::fs;
use std::path::{Path, PathBuf};

use limstrain::diagnostics::{
    apriori_monitor, boundary_defect, cell_magnitudes, direction_cauchy_differences, direction_fields, interior_bump,
    maximal_function, quantile_ladder, renorm_ladder,
};
use limstrain::discretization::{write_field_file, CellBlock, NodalBlock};
use limstrain::oracles::oracle_1d;
use limstrain::potentials::alpha_limit;
use limstrain::regularized::continuation_solve;
use limstrain::variational::{duality_report, minimize_primal, random_probes};
use limstrain::{ApproxSolution, ConcentrationFlag, Problem, SamplingSpec};
use serde::Serialize;

use crate::config::{Config, GeometryKind, LawKindConfig};
use crate::error::CliError;
use crate::table::{num, opt, Summary, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    CheckLaw,
    Solve,
    Diagnose,
    Sweep,
    OracleCompare,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CheckLaw => "check-law",
            Command::Solve => "solve",
            Command::Diagnose => "diagnose",
            Command::Sweep => "sweep",
            Command::OracleCompare => "oracle-compare",
        }
    }
}

/// Files written below the output directory, in write order.
struct Writer {
    root: PathBuf,
    files: Vec<String>,
}

impl Writer {
    fn new(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Writer {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, rel: &str, contents: &str) -> Result<(), CliError> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.files.push(rel.to_string());
        Ok(())
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    files: &'a [String],
}

/// What a finished run produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub out: PathBuf,
    pub files: Vec<String>,
    /// One line per headline result, for the terminal.
    pub lines: Vec<String>,
}

/// Run `command` on a validated config, writing into `out`.
///
/// The manifest and the resolved config are written even when the oracle
/// comparison fails, so a mismatch can be inspected.
pub fn execute(config: &Config, command: Command, out: &Path) -> Result<RunReport, CliError> {
    let config = config.resolved();
    let mut w = Writer::new(out)?;
    let mut lines = Vec::new();
    let outcome = match command {
        Command::CheckLaw => check_law(&config, &mut w, &mut lines),
        Command::Solve => solve(&config, &mut w, "", &mut lines).map(|_| ()),
        Command::Diagnose => diagnose(&config, &mut w, "", &mut lines).map(|_| ()),
        Command::Sweep => sweep(&config, &mut w, &mut lines),
        Command::OracleCompare => oracle_compare(&config, &mut w, &mut lines),
    };
    if let Err(e) = &outcome {
        if !matches!(e, CliError::OracleMismatch(_)) {
            return Err(outcome.unwrap_err());
        }
    }
    w.write("resolved_config.toml", &config.to_toml())?;
    let mut files = w.files.clone();
    files.push("manifest.toml".into());
    let manifest = Manifest {
        command: command.name(),
        version: env!("CARGO_PKG_VERSION"),
        seed: config.law.seed,
        files: &files,
    };
    w.write(
        "manifest.toml",
        &toml::to_string(&manifest).expect("manifest serializes"),
    )?;
    outcome?;
    Ok(RunReport {
        out: out.to_path_buf(),
        files: w.files,
        lines,
    })
}

fn yes(b: bool) -> String {
    b.to_string()
}

fn check_law(config: &Config, w: &mut Writer, lines: &mut Vec<String>) -> Result<(), CliError> {
    let law = config.law()?;
    let dim = config.dim();
    let mut spec = SamplingSpec::new(
        dim,
        config.kind() == limstrain::GradientKind::Symmetric,
        config.law.seed,
    );
    spec.rows = config.components();
    let r = law.check_structure(&spec);
    let k = law.constants();
    let mut t = Table::new(&[
        "law",
        "parameter",
        "c0",
        "c1",
        "c2",
        "coercivity_ok",
        "boundedness_ok",
        "h_sandwich_ok",
        "asym_symmetry_checked",
        "asym_symmetry_ok",
        "smooth_ok",
        "uhlenbeck_ok",
        "bifu_exponent",
        "bifu_admissible",
        "empirical_c0",
        "worst_violation",
        "samples",
    ]);
    let (name, param) = match config.law.kind {
        LawKindConfig::Prototype => ("prototype", config.law.a),
        LawKindConfig::Clipped => ("clipped", config.law.c2),
    };
    t.push(vec![
        name.into(),
        opt(param),
        num(k.c0),
        num(k.c1),
        num(k.c2),
        yes(r.coercivity_ok),
        yes(r.boundedness_ok),
        yes(r.h_sandwich_ok),
        yes(r.asym_symmetry_checked),
        yes(r.asym_symmetry_ok),
        yes(r.smooth_ok),
        r.uhlenbeck_ok.map_or("NA".into(), yes),
        opt(r.bifu_exponent),
        yes(r.bifu_admissible),
        num(r.empirical_c0),
        num(r.worst_violation),
        r.sample_count.to_string(),
    ]);
    w.write("structure.tsv", &t.render())?;
    lines.push(format!(
        "structure: worst violation {:e} over {} samples",
        r.worst_violation, r.sample_count
    ));
    Ok(())
}

struct Solved {
    problem: Problem,
    sols: Vec<ApproxSolution>,
}

fn solve(config: &Config, w: &mut Writer, prefix: &str, lines: &mut Vec<String>) -> Result<Solved, CliError> {
    let problem = config.problem()?;
    let opts = config.solver_options();
    let sols = continuation_solve(&problem, &config.schedule(), &opts)?;
    let last = sols.last().expect("schedule is non-empty");

    let mut t = Table::new(&[
        "n",
        "newton_iters",
        "final_residual",
        "residual_scale",
        "damping_events",
        "relation_residual",
        "t_l1",
        "reg_l1",
    ]);
    for s in &sols {
        t.push(vec![
            s.n.to_string(),
            s.report.newton_iters.to_string(),
            num(s.report.final_residual),
            num(s.report.residual_scale),
            s.report.damping_events.to_string(),
            num(s.report.relation_residual),
            num(s.t.norm(1.0)),
            num(limstrain::regularized::regularization_l1(&s.t, s.n)),
        ]);
    }
    w.write(&format!("{prefix}schedule.tsv"), &t.render())?;

    let primal = if config.solver.primal {
        Some(minimize_primal(&problem, Some(&last.u), &opts)?)
    } else {
        None
    };

    let d = &config.diagnostics;
    let mut t = Table::new(&[
        "solution",
        "primal_value",
        "dual_value",
        "gap",
        "vi_residual",
        "dirichlet_defect",
        "equilibrium_defect",
        "u_diff_vs_continuation",
    ]);
    let mut row = |label: String, u: &limstrain::Field, tf: &limstrain::CellTensorField| -> Result<(), CliError> {
        let probes = random_probes(
            &problem.law,
            &problem.mesh,
            problem.kind,
            u,
            d.probes,
            d.probe_amplitude,
            config.law.seed,
        )?;
        let r = duality_report(&problem, u, tf, &probes)?;
        t.push(vec![
            label,
            num(r.primal_value),
            num(r.dual_value),
            num(r.gap),
            num(r.vi_residual),
            num(r.feasibility.dirichlet),
            num(r.feasibility.equilibrium),
            num(u.max_abs_diff(&last.u)),
        ]);
        Ok(())
    };
    row(format!("n={}", last.n), &last.u, &last.t)?;
    if let Some(p) = &primal {
        row("primal".into(), &p.u, &p.t)?;
    }
    w.write(&format!("{prefix}duality.tsv"), &t.render())?;

    if config.output.fields {
        let mut nodal = vec![NodalBlock::from_field("u", &last.u)];
        if let Some(p) = &primal {
            nodal.push(NodalBlock::from_field("u_primal", &p.u));
        }
        let cells = vec![
            CellBlock::from_tensor_field("T", &last.t),
            CellBlock::from_tensor_field("strain", &last.strain),
            CellBlock::scalars("T_magnitude", cell_magnitudes(&last.t)),
        ];
        w.write(
            &format!("{prefix}fields.txt"),
            &write_field_file(&problem.mesh, &nodal, &cells),
        )?;
    }
    lines.push(format!(
        "{prefix}solve: n = {}, |T|_1 = {:e}, relation residual {:e}",
        last.n,
        last.t.norm(1.0),
        last.report.relation_residual
    ));
    if let Some(p) = &primal {
        lines.push(format!(
            "{prefix}primal: energy {:e}, max |u - u_n| = {:e}",
            p.energy,
            p.u.max_abs_diff(&last.u)
        ));
    }
    Ok(Solved { problem, sols })
}

/// Headline numbers of a diagnose run, reused by the sweep summary.
struct DiagnoseSummary {
    n: u32,
    t_l1: f64,
    t_sup: f64,
    concentrating: usize,
    concentrating_interior: usize,
    suspicious_interior: usize,
    max_interior_exponent: f64,
    boundary_tv: f64,
}

fn diagnose(
    config: &Config,
    w: &mut Writer,
    prefix: &str,
    lines: &mut Vec<String>,
) -> Result<DiagnoseSummary, CliError> {
    let Solved { problem, sols } = solve(config, w, prefix, lines)?;
    let mesh = &problem.mesh;
    let last = sols.last().expect("schedule is non-empty");
    let d = &config.diagnostics;
    let hmin = mesh.min_cell_diameter();
    let mut summary = Summary::default();
    summary.put("n", last.n);

    let trace = apriori_monitor(&sols, Some(&problem.law))?;
    let mut t = Table::new(&[
        "n",
        "t_l1",
        "t_power",
        "bound_quantity",
        "strain_norm",
        "reg_l1",
        "t_sup",
        "strain_sup",
        "b_l1",
    ]);
    for r in &trace.rows {
        t.push(vec![
            r.n.to_string(),
            num(r.t_l1),
            num(r.t_power),
            num(r.bound_quantity()),
            num(r.strain_norm),
            num(r.reg_l1),
            num(r.t_sup),
            num(r.strain_sup),
            opt(r.b_l1),
        ]);
    }
    w.write(&format!("{prefix}apriori.tsv"), &t.render())?;
    summary.put("bound_ratio", num(trace.bound_ratio()));
    summary.put("growth_violation", trace.growth_violation);
    summary.put("reg_strictly_decreasing", trace.reg_strictly_decreasing());

    let bump = interior_bump(mesh, problem.components());
    let mut ks = quantile_ladder(&last.t, &d.k_quantiles);
    let t_sup = last.t.norm(f64::INFINITY);
    ks.push(t_sup.max(f64::MIN_POSITIVE));
    let renorm = renorm_ladder(mesh, problem.kind, &last.t, &problem.f, &bump, &ks)?;
    let mut t = Table::new(&["level", "k", "residual", "transport"]);
    let labels = d.k_quantiles.iter().map(|q| format!("q{q}")).chain(["max".to_string()]);
    let mut worst = 0.0f64;
    for (label, r) in labels.zip(&renorm) {
        worst = worst.max(r.residual);
        t.push(vec![label, num(r.k), num(r.residual), num(r.transport)]);
    }
    w.write(&format!("{prefix}renorm.tsv"), &t.render())?;
    summary.put("renorm_worst", num(worst));

    let radii: Vec<f64> = d.radii_factors.iter().map(|f| f * hmin).collect();
    let map = maximal_function(mesh, &cell_magnitudes(&last.t), &radii)?;
    let mut t = Table::new(&[
        "vertex",
        "x",
        "y",
        "z",
        "interior",
        "patch_average",
        "maximal",
        "exponent",
        "r2",
        "flag",
        "nearest_tag",
        "boundary_distance",
    ]);
    let mut max_interior_exponent = f64::NEG_INFINITY;
    for v in &map.vertices {
        let x = mesh.vertex(v.vertex);
        if v.interior {
            max_interior_exponent = max_interior_exponent.max(v.exponent);
        }
        t.push(vec![
            v.vertex.to_string(),
            num(x[0]),
            num(x[1]),
            num(x[2]),
            v.interior.to_string(),
            num(v.patch_average),
            num(v.maximal),
            num(v.exponent),
            num(v.r2),
            v.flag.as_str().into(),
            v.nearest_tag.letter().to_string(),
            num(v.boundary_distance),
        ]);
    }
    w.write(&format!("{prefix}concentration.tsv"), &t.render())?;
    let mut t = Table::new(&["flag", "vertices", "interior_vertices"]);
    for flag in [
        ConcentrationFlag::Clean,
        ConcentrationFlag::Suspicious,
        ConcentrationFlag::Concentrating,
    ] {
        t.push(vec![
            flag.as_str().into(),
            map.count(flag, false).to_string(),
            map.count(flag, true).to_string(),
        ]);
    }
    w.write(&format!("{prefix}concentration_summary.tsv"), &t.render())?;
    let concentrating = map.count(ConcentrationFlag::Concentrating, false);
    let concentrating_interior = map.count(ConcentrationFlag::Concentrating, true);
    let suspicious_interior = map.count(ConcentrationFlag::Suspicious, true);
    summary.put("concentrating_interior", concentrating_interior);

    let defect = boundary_defect(mesh, problem.kind, &last.t, &problem.f, &problem.g)?;
    let n = problem.components();
    let mut header = vec!["facet", "magnitude"];
    let comps = ["defect_0", "defect_1", "defect_2"];
    header.extend_from_slice(&comps[..n]);
    let mut t = Table::new(&header);
    for f in &defect.facets {
        let mut row = vec![f.facet.to_string(), num(f.magnitude)];
        row.extend(f.defect.iter().map(|v| num(*v)));
        t.push(row);
    }
    w.write(&format!("{prefix}boundary_defect.tsv"), &t.render())?;
    summary.put("boundary_defect_absent", defect.absent);
    summary.put("boundary_defect_tv", num(defect.total_variation));

    let mut t = Table::new(&["eps_from", "eps_to", "stress_direction_l1_change"]);
    match alpha_limit(&problem.law) {
        Ok(alpha) => {
            let eps: Vec<f64> = d.eps_factors.iter().map(|f| f * hmin).collect();
            let fields = direction_fields(mesh, &last.t, &last.strain, alpha, &eps)?;
            let cells: Vec<usize> = (0..mesh.n_cells()).collect();
            let diffs = direction_cauchy_differences(mesh, &fields, &cells);
            for (pair, v) in fields.windows(2).zip(diffs) {
                t.push(vec![num(pair[0].eps), num(pair[1].eps), num(v)]);
            }
            summary.put("alpha", num(alpha));
        }
        Err(_) => summary.put("alpha", "NA"),
    }
    w.write(&format!("{prefix}directions.tsv"), &t.render())?;
    w.write(&format!("{prefix}summary.tsv"), &summary.render())?;

    lines.push(format!(
        "{prefix}diagnose: {concentrating_interior} interior concentrating vertices, boundary defect TV {:e}{}",
        defect.total_variation,
        if defect.absent { " (absent)" } else { "" }
    ));
    Ok(DiagnoseSummary {
        n: last.n,
        t_l1: last.t.norm(1.0),
        t_sup,
        concentrating,
        concentrating_interior,
        suspicious_interior,
        max_interior_exponent,
        boundary_tv: defect.total_variation,
    })
}

fn sweep(config: &Config, w: &mut Writer, lines: &mut Vec<String>) -> Result<(), CliError> {
    let Some(sw) = &config.sweep else {
        return Err(CliError::Config("sweep: section required for the sweep command".into()));
    };
    if config.law.kind != LawKindConfig::Prototype {
        return Err(CliError::Config(
            "law.kind: the sweep varies the prototype exponent".into(),
        ));
    }
    let mut t = Table::new(&[
        "a",
        "status",
        "n",
        "t_l1",
        "t_sup",
        "concentrating",
        "concentrating_interior",
        "suspicious_interior",
        "max_interior_exponent",
        "boundary_defect_tv",
    ]);
    let mut first_error = None;
    for &a in &sw.a {
        let mut c = config.clone();
        c.law.a = Some(a);
        c.sweep = None;
        let prefix = format!("a_{a:e}/");
        match diagnose(&c, w, &prefix, lines) {
            Ok(s) => t.push(vec![
                num(a),
                "ok".into(),
                s.n.to_string(),
                num(s.t_l1),
                num(s.t_sup),
                s.concentrating.to_string(),
                s.concentrating_interior.to_string(),
                s.suspicious_interior.to_string(),
                num(s.max_interior_exponent),
                num(s.boundary_tv),
            ]),
            Err(e) => {
                let mut row = vec![num(a), format!("error (exit {})", e.exit_code())];
                row.extend(std::iter::repeat_n("NA".to_string(), 8));
                t.push(row);
                lines.push(format!("a = {a}: {e}"));
                first_error.get_or_insert(e.context(format!("sweep at a = {a}")));
            }
        }
    }
    w.write("sweep_summary.tsv", &t.render())?;
    match first_error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// `∫ |v − T|` over `[x0, x1]` for a constant `v` and affine `T`.
fn abs_affine_integral(v: f64, t0: f64, t1: f64, h: f64) -> f64 {
    let (e0, e1) = (v - t0, v - t1);
    if e0 * e1 >= 0.0 {
        0.5 * h * (e0.abs() + e1.abs())
    } else {
        0.5 * h * (e0 * e0 + e1 * e1) / (e0.abs() + e1.abs())
    }
}

fn oracle_compare(config: &Config, w: &mut Writer, lines: &mut Vec<String>) -> Result<(), CliError> {
    let g = &config.geometry;
    if g.kind != GeometryKind::Interval || g.dirichlet != ["left"] || g.lo != Some(vec![0.0]) || g.hi != Some(vec![1.0])
    {
        return Err(CliError::Config(
            "geometry: the 1D oracle needs the unit interval with dirichlet = [\"left\"]".into(),
        ));
    }
    let constant = |key: &str| -> Result<f64, CliError> {
        let d = config.data_fn(key)?;
        let probes = [0.0, 0.3, 0.7, 1.0];
        let v = d.eval(&[0.0; 3], &[1.0, 0.0, 0.0])[0];
        if probes.iter().any(|x| d.eval(&[*x, 0.0, 0.0], &[1.0, 0.0, 0.0])[0] != v) {
            return Err(CliError::Config(format!(
                "data.{key}: the 1D oracle needs constant data"
            )));
        }
        Ok(v)
    };
    let (c, g1, u_left) = (constant("f")?, constant("g")?, constant("u0")?);
    let tol = config.oracle.clone().unwrap_or_default();

    let Solved { problem, sols } = solve(config, w, "", lines)?;
    let oracle = oracle_1d(&problem.law, c, u_left, g1)?;
    let mesh = &problem.mesh;
    let exact_u: Vec<f64> = (0..mesh.n_vertices())
        .map(|v| oracle.u_exact(mesh.vertex(v)[0]))
        .collect::<Result<_, _>>()?;
    let mut t = Table::new(&["n", "t_l1_error", "u_max_error", "t_l1", "t_l1_exact"]);
    let t_exact_l1 = oracle.t_l1()?;
    let mut last = (0.0, 0.0);
    for s in &sols {
        let mut et = 0.0;
        for cell in 0..mesh.n_cells() {
            let ids = mesh.cell(cell);
            let (x0, x1) = (mesh.vertex(ids[0])[0], mesh.vertex(ids[1])[0]);
            et += abs_affine_integral(
                s.t.cell_mean(cell)[(0, 0)],
                oracle.t_exact(x0),
                oracle.t_exact(x1),
                (x1 - x0).abs(),
            );
        }
        let eu = exact_u
            .iter()
            .enumerate()
            .map(|(v, ue)| (s.u.node(v)[0] - ue).abs())
            .fold(0.0, f64::max);
        t.push(vec![
            s.n.to_string(),
            num(et),
            num(eu),
            num(s.t.norm(1.0)),
            num(t_exact_l1),
        ]);
        last = (et, eu);
    }
    w.write("oracle.tsv", &t.render())?;
    lines.push(format!(
        "oracle: |T - T_exact|_1 = {:e}, max |u - u_exact| = {:e}",
        last.0, last.1
    ));
    if !(last.0 <= tol.t_l1_tolerance && last.1 <= tol.u_max_tolerance) {
        return Err(CliError::OracleMismatch(format!(
            "T error {:e} (tolerance {:e}), u error {:e} (tolerance {:e})",
            last.0, tol.t_l1_tolerance, last.1, tol.u_max_tolerance
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_abs_integral() {
        assert_eq!(abs_affine_integral(0.0, 1.0, 1.0, 2.0), 2.0);
        // |x − 1/2| on [0, 1].
        assert!((abs_affine_integral(0.5, 0.0, 1.0, 1.0) - 0.25).abs() < 1e-15);
        assert!((abs_affine_integral(0.0, -1.0, 3.0, 1.0) - 1.25).abs() < 1e-15);
    }
}
