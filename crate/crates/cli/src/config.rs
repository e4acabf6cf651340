//! Run configuration: TOML in, validated problem pieces out.

use std::sync::Arc;

use limstrain::discretization::build_structured_mesh;
use limstrain::regularized::{default_schedule, validate_schedule};
use limstrain::{ConstitutiveLaw, DataFn, GeometrySpec, GradientKind, MeshDomain, Problem, SolverOptions};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::expr::Expr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub law: LawConfig,
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LawKindConfig {
    Prototype,
    Clipped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientConfig {
    Symmetric,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawConfig {
    pub kind: LawKindConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_gradient")]
    pub gradient: GradientConfig,
}

fn default_margin() -> f64 {
    1e-8
}

fn default_gradient() -> GradientConfig {
    GradientConfig::Symmetric
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Interval,
    Rectangle,
    Lshape,
    Box,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub kind: GeometryKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<Vec<f64>>,
    /// Cells per axis (per quadrant side for the L-shape).
    pub resolution: usize,
    #[serde(default)]
    pub refinements: u32,
    #[serde(default)]
    pub dirichlet: Vec<String>,
}

/// A data entry: a number or an expression string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Num(f64),
    Expr(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<Vec<Scalar>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<Scalar>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<Scalar>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<u32>>,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_max_halvings")]
    pub max_halvings: usize,
    /// Also minimize the primal problem directly and compare.
    #[serde(default)]
    pub primal: bool,
}

fn default_rtol() -> f64 {
    1e-10
}
fn default_max_iterations() -> usize {
    200
}
fn default_max_halvings() -> usize {
    60
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            schedule: None,
            rtol: default_rtol(),
            max_iterations: default_max_iterations(),
            max_halvings: default_max_halvings(),
            primal: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    #[serde(default = "default_quantiles")]
    pub k_quantiles: Vec<f64>,
    /// Maximal-function radii as multiples of the smallest cell diameter.
    #[serde(default = "default_radii")]
    pub radii_factors: Vec<f64>,
    /// Direction mollification radii, same units.
    #[serde(default = "default_eps")]
    pub eps_factors: Vec<f64>,
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default = "default_amplitude")]
    pub probe_amplitude: f64,
}

fn default_quantiles() -> Vec<f64> {
    vec![0.5, 0.75, 0.9]
}
fn default_radii() -> Vec<f64> {
    vec![16.0, 8.0, 4.0, 2.0]
}
fn default_eps() -> Vec<f64> {
    vec![8.0, 4.0, 2.0]
}
fn default_probes() -> usize {
    20
}
fn default_amplitude() -> f64 {
    0.05
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            k_quantiles: default_quantiles(),
            radii_factors: default_radii(),
            eps_factors: default_eps(),
            probes: default_probes(),
            probe_amplitude: default_amplitude(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
    /// Write field files next to the tables.
    #[serde(default = "default_true")]
    pub fields: bool,
}

fn default_dir() -> String {
    "limstrain-out".into()
}
fn default_true() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            fields: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub a: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// Bound on `‖Tⁿ − T_exact‖₁` at the last schedule entry.
    #[serde(default = "default_t_tol")]
    pub t_l1_tolerance: f64,
    /// Bound on `max |uⁿ − u_exact|` over the vertices at the last entry.
    #[serde(default = "default_u_tol")]
    pub u_max_tolerance: f64,
}

fn default_t_tol() -> f64 {
    0.02
}
fn default_u_tol() -> f64 {
    0.02
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            t_l1_tolerance: default_t_tol(),
            u_max_tolerance: default_u_tol(),
        }
    }
}

fn bad(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Config, CliError> {
        let c: Config = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn dim(&self) -> usize {
        match self.geometry.kind {
            GeometryKind::Interval => 1,
            GeometryKind::Rectangle | GeometryKind::Lshape => 2,
            GeometryKind::Box => 3,
        }
    }

    pub fn components(&self) -> usize {
        let d = &self.data;
        [&d.u0, &d.f, &d.g]
            .into_iter()
            .flatten()
            .map(Vec::len)
            .next()
            .unwrap_or_else(|| self.dim())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let l = &self.law;
        match l.kind {
            LawKindConfig::Prototype => {
                let a = l.a.ok_or_else(|| bad("law.a", "required for the prototype law"))?;
                if !(a > 0.0 && a.is_finite()) {
                    return Err(bad("law.a", format!("must be positive, got {a}")));
                }
                if l.c2.is_some() {
                    return Err(bad("law.c2", "only used by the clipped law"));
                }
            }
            LawKindConfig::Clipped => {
                let c2 = l.c2.ok_or_else(|| bad("law.c2", "required for the clipped law"))?;
                if !(c2 > 0.0 && c2.is_finite()) {
                    return Err(bad("law.c2", format!("must be positive, got {c2}")));
                }
                if l.a.is_some() {
                    return Err(bad("law.a", "only used by the prototype law"));
                }
            }
        }
        if !(l.margin >= 0.0 && l.margin < 1.0) {
            return Err(bad("law.margin", "must lie in [0, 1)"));
        }

        let g = &self.geometry;
        let dim = self.dim();
        if g.resolution == 0 {
            return Err(bad("geometry.resolution", "must be at least 1"));
        }
        if g.refinements > 6 {
            return Err(bad("geometry.refinements", "at most 6 levels"));
        }
        for (key, v) in [("geometry.lo", &g.lo), ("geometry.hi", &g.hi)] {
            if let Some(v) = v {
                if g.kind == GeometryKind::Lshape {
                    return Err(bad(key, "the L-shape is fixed to the unit square"));
                }
                if v.len() != dim {
                    return Err(bad(key, format!("expected {dim} coordinates, got {}", v.len())));
                }
            }
        }
        let parts = self.geometry_spec().boundary_parts();
        if let Some(p) = g.dirichlet.iter().find(|p| *p != "all" && !parts.contains(&p.as_str())) {
            return Err(bad(
                "geometry.dirichlet",
                format!("unknown boundary part '{p}' (available: all, {})", parts.join(", ")),
            ));
        }
        let (lo, hi) = self.bounds();
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(bad("geometry.hi", "must exceed geometry.lo in every coordinate"));
        }

        let n = self.components();
        if !(1..=3).contains(&n) {
            return Err(bad("data", "fields need 1 to 3 components"));
        }
        for (key, v) in [
            ("data.u0", &self.data.u0),
            ("data.f", &self.data.f),
            ("data.g", &self.data.g),
        ] {
            if let Some(v) = v {
                if v.len() != n {
                    return Err(bad(key, format!("expected {n} components, got {}", v.len())));
                }
                for (i, s) in v.iter().enumerate() {
                    if let Scalar::Expr(src) = s {
                        Expr::parse(src).map_err(|e| bad(&format!("{key}[{i}]"), e))?;
                    }
                }
            }
        }
        if self.law.gradient == GradientConfig::Symmetric && n != dim {
            return Err(bad(
                "law.gradient",
                format!("symmetric gradients need {dim} components, data has {n}"),
            ));
        }

        let s = &self.solver;
        if let Some(sched) = &s.schedule {
            validate_schedule(sched, dim).map_err(|e| bad("solver.schedule", e))?;
        }
        if !(s.rtol > 0.0 && s.rtol < 1.0) {
            return Err(bad("solver.rtol", "must lie in (0, 1)"));
        }
        if s.max_iterations == 0 {
            return Err(bad("solver.max_iterations", "must be at least 1"));
        }

        let d = &self.diagnostics;
        if d.k_quantiles.iter().any(|q| !(*q > 0.0 && *q <= 1.0)) {
            return Err(bad("diagnostics.k_quantiles", "quantiles must lie in (0, 1]"));
        }
        if d.radii_factors.windows(2).any(|w| !(w[1] < w[0])) || d.radii_factors.iter().any(|r| !(*r >= 2.0)) {
            return Err(bad(
                "diagnostics.radii_factors",
                "must be strictly decreasing and at least 2",
            ));
        }
        if d.eps_factors.iter().any(|r| !(*r >= 2.0)) {
            return Err(bad("diagnostics.eps_factors", "must be at least 2"));
        }
        if !(d.probe_amplitude > 0.0) {
            return Err(bad("diagnostics.probe_amplitude", "must be positive"));
        }
        if let Some(sw) = &self.sweep {
            if sw.a.is_empty() || sw.a.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
                return Err(bad("sweep.a", "needs positive exponents"));
            }
        }
        if let Some(o) = &self.oracle {
            if !(o.t_l1_tolerance > 0.0) || !(o.u_max_tolerance > 0.0) {
                return Err(bad("oracle", "tolerances must be positive"));
            }
        }
        Ok(())
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let g = &self.geometry;
        (
            g.lo.clone().unwrap_or_else(|| vec![0.0; d]),
            g.hi.clone().unwrap_or_else(|| vec![1.0; d]),
        )
    }

    /// Fill every defaulted field so the echo reproduces the run exactly.
    pub fn resolved(&self) -> Config {
        let mut c = self.clone();
        let n = c.components();
        let zeros = || Some(vec![Scalar::Num(0.0); n]);
        c.data.u0 = c.data.u0.or_else(zeros);
        c.data.f = c.data.f.or_else(zeros);
        c.data.g = c.data.g.or_else(zeros);
        if c.solver.schedule.is_none() {
            c.solver.schedule = Some(default_schedule(c.dim()));
        }
        if c.geometry.kind != GeometryKind::Lshape {
            let (lo, hi) = c.bounds();
            c.geometry.lo = Some(lo);
            c.geometry.hi = Some(hi);
        }
        c
    }

    pub fn law(&self) -> Result<ConstitutiveLaw, CliError> {
        let law = match self.law.kind {
            LawKindConfig::Prototype => ConstitutiveLaw::prototype(self.law.a.unwrap_or_default()),
            LawKindConfig::Clipped => ConstitutiveLaw::clipped(self.law.c2.unwrap_or_default()),
        }
        .map_err(|e| bad("law", e))?;
        Ok(law.with_margin(self.law.margin))
    }

    pub fn kind(&self) -> GradientKind {
        match self.law.gradient {
            GradientConfig::Symmetric => GradientKind::Symmetric,
            GradientConfig::Full => GradientKind::Full,
        }
    }

    pub fn geometry_spec(&self) -> GeometrySpec {
        let (lo, hi) = self.bounds();
        let r = self.geometry.resolution;
        let spec = match self.geometry.kind {
            GeometryKind::Interval => GeometrySpec::Interval {
                x0: lo[0],
                x1: hi[0],
                cells: r,
            },
            GeometryKind::Rectangle => GeometrySpec::Rectangle {
                x0: lo[0],
                x1: hi[0],
                y0: lo[1],
                y1: hi[1],
                nx: r,
                ny: r,
            },
            GeometryKind::Lshape => GeometrySpec::LShape { resolution: r },
            GeometryKind::Box => GeometrySpec::Box {
                lo: [lo[0], lo[1], lo[2]],
                hi: [hi[0], hi[1], hi[2]],
                n: [r; 3],
            },
        };
        spec.refined(self.geometry.refinements)
    }

    pub fn mesh(&self) -> Result<MeshDomain, CliError> {
        build_structured_mesh(&self.geometry_spec(), &self.geometry.dirichlet).map_err(|e| bad("geometry.dirichlet", e))
    }

    /// Data entries as a [`DataFn`]; all-constant entries stay constant so
    /// zero data is recognised.
    pub fn data_fn(&self, key: &str) -> Result<DataFn, CliError> {
        let n = self.components();
        let entries = match key {
            "u0" => &self.data.u0,
            "f" => &self.data.f,
            _ => &self.data.g,
        };
        let Some(entries) = entries else {
            return Ok(DataFn::zero(n));
        };
        let mut exprs = Vec::with_capacity(n);
        for (i, s) in entries.iter().enumerate() {
            exprs.push(match s {
                Scalar::Num(v) => {
                    if !v.is_finite() {
                        return Err(bad(&format!("data.{key}[{i}]"), "must be finite"));
                    }
                    Expr::parse(&format!("{v:e}")).expect("number parses")
                }
                Scalar::Expr(src) => Expr::parse(src).map_err(|e| bad(&format!("data.{key}[{i}]"), e))?,
            });
        }
        let origin = [0.0; 3];
        if exprs.iter().all(Expr::is_constant) {
            let v: Vec<f64> = exprs.iter().map(|e| e.eval(&origin, &origin)).collect();
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(bad(&format!("data.{key}[{i}]"), "evaluates to a non-finite value"));
            }
            return Ok(DataFn::constant(&v));
        }
        let exprs = Arc::new(exprs);
        Ok(DataFn::from_fn(n, move |x, nrm| {
            let mut out = [0.0; 3];
            for (o, e) in out.iter_mut().zip(exprs.iter()) {
                *o = e.eval(x, nrm);
            }
            out
        }))
    }

    pub fn problem(&self) -> Result<Problem, CliError> {
        let mesh = self.mesh()?;
        let u0 = self.data_fn("u0")?;
        let f = self.data_fn("f")?;
        let g = self.data_fn("g")?;
        for (key, d) in [("data.u0", &u0), ("data.f", &f)] {
            if mesh
                .vertices()
                .iter()
                .any(|x| d.at(x)[..d.components()].iter().any(|v| !v.is_finite()))
            {
                return Err(bad(key, "evaluates to a non-finite value on the mesh"));
            }
        }
        Ok(Problem::from_data(self.law()?, mesh, self.kind(), &u0, f, g)?)
    }

    pub fn schedule(&self) -> Vec<u32> {
        self.solver
            .schedule
            .clone()
            .unwrap_or_else(|| default_schedule(self.dim()))
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            rtol: self.solver.rtol,
            max_iterations: self.solver.max_iterations,
            max_halvings: self.solver.max_halvings,
            safety_margin: self.law.margin,
            ..SolverOptions::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[law]
kind = "prototype"
a = 2

[geometry]
kind = "rectangle"
resolution = 4
dirichlet = ["left"]

[data]
f = [0.1, "0"]
"#;

    #[test]
    fn parses_with_defaults() {
        let c = Config::from_toml(BASE).unwrap();
        assert_eq!(c.law.a, Some(2.0));
        assert_eq!(c.components(), 2);
        assert_eq!(c.solver.rtol, 1e-10);
        assert_eq!(c.output.dir, "limstrain-out");
        let p = c.problem().unwrap();
        assert_eq!(p.mesh.n_cells(), 32);
        assert!(c.data_fn("g").unwrap().is_zero());
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = Config::from_toml(BASE).unwrap().resolved();
        let back = Config::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.resolved(), c);
    }

    #[test]
    fn errors_name_the_key() {
        let cases = [
            (BASE.replace("a = 2", "a = -1"), "law.a"),
            (BASE.replace("resolution = 4", "resolution = 0"), "geometry.resolution"),
            (BASE.replace("\"left\"", "\"west\""), "geometry.dirichlet"),
            (BASE.replace("\"0\"", "\"q + 1\""), "data.f[1]"),
            (BASE.replace("f = [0.1, \"0\"]", "f = [0.1]"), "law.gradient"),
            (format!("{BASE}\n[solver]\nschedule = [4, 2]\n"), "solver.schedule"),
            (
                format!("{BASE}\n[diagnostics]\nradii_factors = [1, 2]\n"),
                "diagnostics.radii_factors",
            ),
            (BASE.replace("a = 2", "a = 2\nc2 = 1"), "law.c2"),
        ];
        for (text, key) in cases {
            let err = Config::from_toml(&text).unwrap_err().to_string();
            assert!(err.contains(key), "{key}: {err}");
        }
        let err = Config::from_toml(&BASE.replace("a = 2", "a = 2\nbogus = 1")).unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn expression_data() {
        let c = Config::from_toml(&BASE.replace("f = [0.1, \"0\"]", "f = [\"x * y\", \"2 * nx\"]")).unwrap();
        let f = c.data_fn("f").unwrap();
        assert_eq!(f.eval(&[0.5, 0.5, 0.0], &[1.0, 0.0, 0.0])[..2], [0.25, 2.0]);
    }
}
