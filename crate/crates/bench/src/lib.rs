//! Shared fixtures for the criterion benchmarks.

use limstrain::discretization::build_structured_mesh;
use limstrain::{ConstitutiveLaw, DataFn, GeometrySpec, GradientKind, Problem, Tensor};

/// Unit square, clamped left edge, body force along x.
pub fn square_problem(n: usize, a: f64) -> Problem {
    let mesh = build_structured_mesh(&GeometrySpec::unit_square(n), &["left"]).expect("valid geometry");
    Problem::from_data(
        ConstitutiveLaw::prototype(a).expect("valid exponent"),
        mesh,
        GradientKind::Symmetric,
        &DataFn::zero(2),
        DataFn::constant(&[0.1, 0.0]),
        DataFn::zero(2),
    )
    .expect("valid problem")
}

/// Deterministic spread of 3×3 tensors with magnitudes from 1e-2 to 1e2.
pub fn tensor_samples(count: usize) -> Vec<Tensor> {
    (0..count)
        .map(|k| {
            let v: Vec<f64> = (0..9).map(|i| ((k * 9 + i) as f64 * 0.618_034).sin()).collect();
            let t = Tensor::from_slice(3, 3, &v);
            let mag = 10f64.powf(-2.0 + 4.0 * k as f64 / count.max(2) as f64);
            t.scaled(mag / t.norm())
        })
        .collect()
}
