use limstrain::diagnostics::{apriori_monitor, boundary_defect, interior_bump, renorm_ladder};
use limstrain::discretization::{build_structured_mesh, read_field_file, write_field_file, CellBlock, NodalBlock};
use limstrain::oracles::oracle_1d;
use limstrain::regularized::{
    continuation_solve, continuation_solve_from, regularization_l1, solve_approx, ApproxProblem, Problem, SolverOptions,
};
use limstrain::variational::{
    divergence_free_perturbation, dual_energy, duality_report, minimize_primal, primal_energy, random_probes,
};
use limstrain::{ConstitutiveLaw, DataFn, Error, Field, GeometrySpec, GradientKind, Tensor};

fn proto(a: f64) -> ConstitutiveLaw {
    ConstitutiveLaw::prototype(a).unwrap()
}

fn tight() -> SolverOptions {
    SolverOptions {
        rtol: 1e-12,
        ..Default::default()
    }
}

fn mixed_1d(cells: usize) -> Problem {
    let mesh = build_structured_mesh(&GeometrySpec::unit_interval(cells), &["left"]).unwrap();
    Problem::from_data(
        proto(2.0),
        mesh,
        GradientKind::Full,
        &DataFn::zero(1),
        DataFn::constant(&[1.0]),
        DataFn::zero(1),
    )
    .unwrap()
}

fn square(n: usize, a: f64) -> Problem {
    let mesh = build_structured_mesh(&GeometrySpec::unit_square(n), &["left"]).unwrap();
    Problem::from_data(
        proto(a),
        mesh,
        GradientKind::Symmetric,
        &DataFn::zero(2),
        DataFn::constant(&[0.1, 0.0]),
        DataFn::zero(2),
    )
    .unwrap()
}

fn t_l1_error(p: &Problem, t: &limstrain::CellTensorField, exact: impl Fn(f64) -> f64) -> f64 {
    // Piecewise constant minus affine: exact per-cell integral of |c − (α + βx)|.
    let mut err = 0.0;
    for c in 0..p.mesh.n_cells() {
        let cell = p.mesh.cell(c);
        let (x0, x1) = (p.mesh.vertex(cell[0])[0], p.mesh.vertex(cell[1])[0]);
        let (x0, x1) = (x0.min(x1), x0.max(x1));
        let v = t.cell_mean(c)[(0, 0)];
        let m = 2000;
        let h = (x1 - x0) / m as f64;
        err += (0..m)
            .map(|i| (v - exact(x0 + (i as f64 + 0.5) * h)).abs() * h)
            .sum::<f64>();
    }
    err
}

#[test]
fn one_dimensional_solution_tracks_the_oracle() {
    let p = mixed_1d(32);
    let oracle = oracle_1d(&p.law, 1.0, 0.0, 0.0).unwrap();
    let sols = continuation_solve(&p, &[4, 8, 16, 32], &tight()).unwrap();
    let mut prev_t = f64::INFINITY;
    let mut prev_u = f64::INFINITY;
    for s in &sols {
        let et = t_l1_error(&p, &s.t, |x| oracle.t_exact(x));
        assert!(et <= prev_t + 1e-12, "T error grew: {et} > {prev_t}");
        // Piecewise-constant approximation of an affine stress.
        assert!(et < 1.0 / (4.0 * 32.0) + 1e-6, "{et}");
        prev_t = et;
        let eu = (0..p.mesh.n_vertices())
            .map(|v| (s.u.node(v)[0] - oracle.u_exact(p.mesh.vertex(v)[0]).unwrap()).abs())
            .fold(0.0, f64::max);
        assert!(eu < prev_u, "u error did not decrease");
        prev_u = eu;
        assert!(s.report.relation_residual <= 1e-9);
    }
    let trace = apriori_monitor(&sols, None).unwrap();
    let exact_l1 = oracle.t_l1().unwrap();
    for r in &trace.rows {
        assert!((r.t_l1 - exact_l1).abs() < 1e-3, "{} vs {exact_l1}", r.t_l1);
    }
    assert!(trace.reg_strictly_decreasing());
}

#[test]
fn single_entry_schedule_equals_direct_solve() {
    let p = mixed_1d(8);
    let a = continuation_solve(&p, &[1], &SolverOptions::default()).unwrap();
    let b = solve_approx(&ApproxProblem::new(&p, 1).unwrap(), None, &SolverOptions::default()).unwrap();
    assert_eq!(a[0].u, b.u);
}

#[test]
fn two_dimensional_invariants() {
    let p = square(8, 2.0);
    let sols = continuation_solve(&p, &[2, 4, 8, 16, 32], &tight()).unwrap();
    let omega = p.mesh.measure();
    let c2 = p.law.constants().c2;
    let mut prev = f64::INFINITY;
    for s in &sols {
        let n = f64::from(s.n);
        assert!(s.report.relation_residual <= 1e-9);
        let reg = regularization_l1(&s.t, s.n);
        let t1 = s.t.norm(1.0);
        let bound = (t1.powf(1.0 / n) * omega.powf(1.0 - 1.0 / n) + omega) / n;
        assert!(reg <= bound, "{reg} > {bound}");
        assert!(reg < prev);
        prev = reg;
        let e_sup = s.strain.norm(f64::INFINITY);
        assert!(e_sup <= c2 + s.t.norm(f64::INFINITY).powf(1.0 / n) / n);
    }
    let trace = apriori_monitor(&sols, Some(&p.law)).unwrap();
    assert!(trace.bound_ratio() <= 10.0);
    assert!(!trace.growth_violation);
    assert!(trace
        .rows
        .iter()
        .all(|r| r.b_l1.is_some_and(|b| b.is_finite() && b >= 0.0)));
}

#[test]
fn solutions_are_independent_of_the_initial_guess() {
    use rand::{Rng, SeedableRng};
    let p = square(6, 2.0);
    let sched = [2, 4, 8];
    let a = continuation_solve(&p, &sched, &tight()).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let mut init = p.u0.clone();
    let h = p.mesh.min_cell_diameter();
    for (v, &d) in p.mesh.dirichlet_nodes().iter().enumerate() {
        if !d {
            for i in 0..2 {
                let k = init.dof(v, i);
                init.values_mut()[k] += 0.2 * h * rng.gen_range(-1.0..1.0);
            }
        }
    }
    let b = continuation_solve_from(&p, &sched, &init, &tight()).unwrap();
    let (sa, sb) = (a.last().unwrap(), b.last().unwrap());
    assert!(sa.u.max_abs_diff(&sb.u) <= 1e-6 * sa.u.max_abs());
    assert!(sa.t.max_abs_diff(&sb.t) <= 1e-6 * sa.t.norm(f64::INFINITY));
}

#[test]
fn pure_neumann_constant_stress() {
    let mesh = build_structured_mesh(&GeometrySpec::unit_square(4), &[] as &[&str]).unwrap();
    let t0 = Tensor::from_rows(&[[0.8, 0.3], [0.3, -0.5]]);
    let p = Problem::from_data(
        proto(2.0),
        mesh,
        GradientKind::Symmetric,
        &DataFn::zero(2),
        DataFn::zero(2),
        DataFn::traction(t0),
    )
    .unwrap();
    let s = solve_approx(&ApproxProblem::new(&p, 8).unwrap(), None, &tight()).unwrap();
    assert!(s.t.values().iter().all(|t| (*t - t0).norm() < 1e-9));
    // Rigid part removed: zero mean displacement.
    let mean = limstrain::discretization::field::field_integral(&p.mesh, &s.u);
    assert!(mean.iter().all(|m| m.abs() < 1e-12));
    let d = boundary_defect(&p.mesh, p.kind, &s.t, &p.f, &p.g).unwrap();
    assert!(d.total_variation < 1e-10);
}

#[test]
fn incompatible_neumann_data_is_rejected() {
    let mesh = build_structured_mesh(&GeometrySpec::unit_square(3), &[] as &[&str]).unwrap();
    let p = Problem::from_data(
        proto(2.0),
        mesh,
        GradientKind::Symmetric,
        &DataFn::zero(2),
        DataFn::constant(&[1.0, 0.0]),
        DataFn::zero(2),
    )
    .unwrap();
    let err = solve_approx(&ApproxProblem::new(&p, 4).unwrap(), None, &SolverOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Compatibility { .. }), "{err:?}");
}

#[test]
fn unsafe_boundary_datum_is_rejected() {
    let mesh = build_structured_mesh(&GeometrySpec::unit_interval(4), &["left", "right"]).unwrap();
    let p = Problem::from_data(
        proto(2.0),
        mesh,
        GradientKind::Full,
        &DataFn::affine(&[0.0], &[&[1.5]]),
        DataFn::zero(1),
        DataFn::zero(1),
    )
    .unwrap();
    let err = solve_approx(&ApproxProblem::new(&p, 4).unwrap(), None, &SolverOptions::default()).unwrap_err();
    assert!(matches!(err, Error::SafetyStrain(_)));
    assert!(matches!(
        minimize_primal(&p, None, &SolverOptions::default()),
        Err(Error::SafetyStrain(_))
    ));
}

#[test]
fn small_n_is_rejected() {
    let p = square(2, 2.0);
    assert!(ApproxProblem::new(&p, 1).is_err());
}

#[test]
fn three_dimensional_box() {
    let spec = GeometrySpec::Box {
        lo: [0.0; 3],
        hi: [1.0; 3],
        n: [2, 2, 2],
    };
    let mesh = build_structured_mesh(&spec, &["left"]).unwrap();
    let p = Problem::from_data(
        proto(1.0),
        mesh,
        GradientKind::Symmetric,
        &DataFn::zero(3),
        DataFn::constant(&[0.0, 0.0, -0.2]),
        DataFn::zero(3),
    )
    .unwrap();
    let sols = continuation_solve(&p, &[3, 6, 12], &tight()).unwrap();
    for s in &sols {
        assert!(s.report.relation_residual <= 1e-9);
        assert!(s.t.values().iter().all(Tensor::is_symmetric));
    }
}

#[test]
fn scaled_custom_law_solves() {
    let law = proto(2.0).scaled(2.0).unwrap();
    let mesh = build_structured_mesh(&GeometrySpec::unit_square(4), &["left"]).unwrap();
    let p = Problem::from_data(
        law,
        mesh,
        GradientKind::Symmetric,
        &DataFn::zero(2),
        DataFn::constant(&[0.2, 0.0]),
        DataFn::zero(2),
    )
    .unwrap();
    let sols = continuation_solve(&p, &[2, 4, 8], &tight()).unwrap();
    assert!(sols.iter().all(|s| s.report.relation_residual <= 1e-9));
}

#[test]
fn duality_relations_at_the_primal_minimizer() {
    let p = square(6, 2.0);
    let prim = minimize_primal(&p, None, &tight()).unwrap();
    let probes = random_probes(&p.law, &p.mesh, p.kind, &prim.u, 10, 0.05, 5).unwrap();
    let rep = duality_report(&p, &prim.u, &prim.t, &probes).unwrap();
    let scale = prim.t.norm(1.0).max(1e-3);
    assert!(rep.gap.abs() <= 1e-8 * scale, "{}", rep.gap);
    assert!(rep.vi_residual.abs() <= 1e-8 * scale);
    assert_eq!(rep.feasibility.dirichlet, 0.0);
    for v in &probes {
        assert!(prim.energy <= primal_energy(&p.law, &p.mesh, p.kind, v, &p.f, &p.g).unwrap() + 1e-14);
    }
    let j = dual_energy(&p.law, &p.mesh, p.kind, &prim.t, &p.u0).unwrap();
    for seed in 0..5 {
        let pert = divergence_free_perturbation(&p.mesh, p.kind, 2, 0.05, seed).unwrap();
        let w = prim.t.with_values(
            prim.t
                .values()
                .iter()
                .zip(pert.values())
                .map(|(a, b)| *a + *b)
                .collect(),
        );
        assert!(j <= dual_energy(&p.law, &p.mesh, p.kind, &w, &p.u0).unwrap());
    }
}

#[test]
fn renormalized_residual_on_converged_solution() {
    let p = mixed_1d(16);
    let s = continuation_solve(&p, &[4, 8], &tight()).unwrap().pop().unwrap();
    let w = interior_bump(&p.mesh, 1);
    let tmax = s.t.norm(f64::INFINITY);
    let out = renorm_ladder(&p.mesh, p.kind, &s.t, &p.f, &w, &[0.25, 0.5, tmax * 1.01]).unwrap();
    for r in &out {
        assert!(r.residual < 1e-9, "{r:?}");
    }
    assert_eq!(out[2].transport, 0.0);
}

#[test]
fn solution_field_file_round_trip() {
    let p = square(3, 2.0);
    let s = continuation_solve(&p, &[2], &SolverOptions::default())
        .unwrap()
        .pop()
        .unwrap();
    let text = write_field_file(
        &p.mesh,
        &[NodalBlock::from_field("u", &s.u)],
        &[CellBlock::from_tensor_field("T", &s.t)],
    );
    let back = read_field_file(&text).unwrap();
    assert_eq!(back.mesh, p.mesh);
    assert_eq!(Field::from_values(2, back.nodal[0].values.clone()).unwrap(), s.u);
    let flat: Vec<f64> = s.t.values().iter().flat_map(|t| t.as_slice().to_vec()).collect();
    assert_eq!(back.cellwise[0].values, flat);
}
