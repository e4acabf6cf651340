//! Independent reference solutions: the 1D mixed problem in closed form,
//! the scalar `a = 2` prototype potentials, a grid-sup conjugate and a
//! brute-force primal minimizer for tiny meshes.

use rayon::prelude::*;

use crate::constitutive::ConstitutiveLaw;
use crate::discretization::Field;
use crate::error::{Error, Result};
use crate::quadrature::integrate;
use crate::regularized::Problem;
use crate::tensor::Tensor;
use crate::variational::primal_energy;

/// Exact solution of `−T′ = c` on `(0, 1)`, `u(0) = u_left`,
/// `T(1) = g₁`, `u′ = D(T)`.
#[derive(Debug, Clone)]
pub struct Oracle1DSolution {
    law: ConstitutiveLaw,
    pub c: f64,
    pub g1: f64,
    pub u_left: f64,
}

pub fn oracle_1d(law: &ConstitutiveLaw, c: f64, u_left: f64, g1: f64) -> Result<Oracle1DSolution> {
    if !(c.is_finite() && u_left.is_finite() && g1.is_finite()) {
        return Err(Error::InvalidInput("oracle parameters must be finite".into()));
    }
    law.eval_d(&Tensor::scalar(g1))?;
    Ok(Oracle1DSolution {
        law: law.clone(),
        c,
        g1,
        u_left,
    })
}

impl Oracle1DSolution {
    pub fn t_exact(&self, x: f64) -> f64 {
        self.g1 + self.c * (1.0 - x)
    }

    /// `u′(x) = D(T(x))`.
    pub fn strain(&self, x: f64) -> f64 {
        self.law.response(&Tensor::scalar(self.t_exact(x)))[(0, 0)]
    }

    /// `u(x) = u_left + ∫₀ˣ D(T(s)) ds` to `1e-12`.
    pub fn u_exact(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(self.u_left);
        }
        let r = integrate(|s| self.strain(s), 0.0, x, 1e-12, 100_000)?;
        Ok(self.u_left + r.value)
    }

    /// `∫₀¹ |T_exact|`.
    pub fn t_l1(&self) -> Result<f64> {
        // Affine, so split at the sign change.
        let mut pts = vec![0.0, 1.0];
        if self.c != 0.0 {
            let x0 = 1.0 + self.g1 / self.c;
            if x0 > 0.0 && x0 < 1.0 {
                pts.insert(1, x0);
            }
        }
        Ok(pts
            .windows(2)
            .map(|w| 0.5 * (w[1] - w[0]) * (self.t_exact(w[0]).abs() + self.t_exact(w[1]).abs()))
            .sum())
    }
}

/// `F(t) = √(1+t²) − 1`, the scalar prototype potential for `a = 2`.
pub fn prototype2_f(t: f64) -> f64 {
    t * t / (1.0 + (1.0 + t * t).sqrt())
}

/// `F*(b) = 1 − √(1−b²)` for `|b| ≤ 1`, `+∞` beyond.
pub fn prototype2_fstar(b: f64) -> f64 {
    if b.abs() > 1.0 {
        f64::INFINITY
    } else {
        b * b / (1.0 + (1.0 - b * b).sqrt())
    }
}

/// `sup_t (b t − F(t))` for a scalar potential by a dense grid on
/// `[−radius, radius]` refined with golden-section search.
pub fn grid_sup_conjugate<F: Fn(f64) -> f64>(f: F, b: f64, radius: f64, points: usize) -> f64 {
    let obj = |t: f64| b * t - f(t);
    let n = points.max(3);
    let h = 2.0 * radius / (n - 1) as f64;
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..n {
        let v = obj(-radius + i as f64 * h);
        if v > best.1 {
            best = (i, v);
        }
    }
    let centre = -radius + best.0 as f64 * h;
    let (mut lo, mut hi) = (centre - h, centre + h);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (obj(x1), obj(x2));
    for _ in 0..200 {
        if hi - lo < 1e-14 * (1.0 + centre.abs()) {
            break;
        }
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = obj(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = obj(x2);
        }
    }
    best.1.max(f1).max(f2)
}

/// Result of [`brute_force_primal`].
#[derive(Debug, Clone)]
pub struct BruteForceResult {
    pub u: Field,
    pub value: f64,
    pub grid_step: f64,
    /// Largest change of the objective between the best point and its grid
    /// neighbours: the resolution of the search.
    pub resolution: f64,
}

pub const BRUTE_FORCE_MAX_FREE: usize = 6;

/// Exhaustive grid search of `J*` over the free dofs in the box
/// `u0 ± half_width`, `resolution` points per dof.
pub fn brute_force_primal(problem: &Problem, resolution: usize, half_width: f64) -> Result<BruteForceResult> {
    let dofs = problem.dofs();
    let free = dofs.free().to_vec();
    if free.len() > BRUTE_FORCE_MAX_FREE {
        return Err(Error::InvalidInput(format!(
            "brute force supports at most {BRUTE_FORCE_MAX_FREE} free values, problem has {}",
            free.len()
        )));
    }
    if resolution < 2 || !(half_width > 0.0) {
        return Err(Error::InvalidInput(
            "grid needs at least 2 points per dof and a positive width".into(),
        ));
    }
    let total = resolution
        .checked_pow(free.len() as u32)
        .filter(|t| *t <= 50_000_000)
        .ok_or_else(|| Error::InvalidInput("grid too large".into()))?;
    let step = 2.0 * half_width / (resolution - 1) as f64;
    let centre: Vec<f64> = free.iter().map(|&d| problem.u0.values()[d]).collect();
    let point = |mut idx: usize| -> Field {
        let mut u = problem.u0.clone();
        for (k, &d) in free.iter().enumerate() {
            let i = idx % resolution;
            idx /= resolution;
            u.values_mut()[d] = centre[k] - half_width + i as f64 * step;
        }
        u
    };
    let value = |u: &Field| primal_energy(&problem.law, &problem.mesh, problem.kind, u, &problem.f, &problem.g);
    let best = (0..total)
        .into_par_iter()
        .map(|i| (i, value(&point(i)).unwrap_or(f64::INFINITY)))
        .reduce(
            || (usize::MAX, f64::INFINITY),
            |a, b| if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a },
        );
    if !best.1.is_finite() {
        return Err(Error::Oracle("every grid point is infeasible".into()));
    }
    let mut res = 0.0f64;
    let mut stride = 1;
    for _ in &free {
        let i = (best.0 / stride) % resolution;
        for j in [i.wrapping_sub(1), i + 1] {
            if j < resolution {
                let nb = best.0 - i * stride + j * stride;
                let v = value(&point(nb))?;
                if v.is_finite() {
                    res = res.max((v - best.1).abs());
                }
            }
        }
        stride *= resolution;
    }
    Ok(BruteForceResult {
        u: point(best.0),
        value: best.1,
        grid_step: step,
        resolution: res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{build_structured_mesh, DataFn, GeometrySpec, GradientKind};
    use crate::regularized::SolverOptions;
    use crate::variational::minimize_primal;

    fn proto(a: f64) -> ConstitutiveLaw {
        ConstitutiveLaw::prototype(a).unwrap()
    }

    #[test]
    fn oracle_examples() {
        let z = oracle_1d(&proto(2.0), 0.0, 0.3, 0.0).unwrap();
        assert_eq!(z.t_exact(0.4), 0.0);
        assert_eq!(z.u_exact(0.7).unwrap(), 0.3);
        let o = oracle_1d(&proto(2.0), 1.0, 0.0, 0.0).unwrap();
        assert_eq!(o.t_exact(0.25), 0.75);
        assert!((o.u_exact(1.0).unwrap() - (2f64.sqrt() - 1.0)).abs() < 1e-12);
        assert!((o.t_l1().unwrap() - 0.5).abs() < 1e-15);
        let l = oracle_1d(&proto(2.0), 0.0, 0.0, 2.0).unwrap();
        assert!((l.strain(0.3) - 2.0 / 5f64.sqrt()).abs() < 1e-15);
        assert!((l.u_exact(0.5).unwrap() - 1.0 / 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn closed_forms_and_grid_sup() {
        assert!((prototype2_f(1.0) - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!(prototype2_fstar(1.01).is_infinite());
        for b in [0.0, 0.3, -0.7, 0.99] {
            let g = grid_sup_conjugate(prototype2_f, b, 50.0, 20_001);
            assert!((g - prototype2_fstar(b)).abs() < 1e-12, "{b}: {g}");
        }
    }

    #[test]
    fn brute_force_zero_data() {
        let mesh = build_structured_mesh(&GeometrySpec::unit_interval(2), &["left"]).unwrap();
        let p = Problem::from_data(
            proto(2.0),
            mesh,
            GradientKind::Full,
            &DataFn::zero(1),
            DataFn::zero(1),
            DataFn::zero(1),
        )
        .unwrap();
        let r = brute_force_primal(&p, 21, 0.2).unwrap();
        assert!(r.u.max_abs() <= r.grid_step);
        assert!(r.value.abs() < 1e-14);
    }

    #[test]
    fn brute_force_matches_minimizer() {
        let mesh = build_structured_mesh(&GeometrySpec::unit_interval(2), &["left"]).unwrap();
        let p = Problem::from_data(
            proto(2.0),
            mesh,
            GradientKind::Full,
            &DataFn::zero(1),
            DataFn::constant(&[1.0]),
            DataFn::zero(1),
        )
        .unwrap();
        let m = minimize_primal(&p, None, &SolverOptions::default()).unwrap();
        let r = brute_force_primal(&p, 201, 0.5).unwrap();
        assert!(r.value >= m.energy - 1e-12);
        assert!(
            r.value - m.energy <= r.resolution,
            "{} {} {}",
            r.value,
            m.energy,
            r.resolution
        );
    }

    #[test]
    fn brute_force_rejects_large_problems() {
        let mesh = build_structured_mesh(&GeometrySpec::unit_interval(8), &["left"]).unwrap();
        let p = Problem::from_data(
            proto(2.0),
            mesh,
            GradientKind::Full,
            &DataFn::zero(1),
            DataFn::zero(1),
            DataFn::zero(1),
        )
        .unwrap();
        assert!(brute_force_primal(&p, 3, 0.1).is_err());
    }
}
