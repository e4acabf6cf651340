//! The potential `F` of the constitutive map, its convex conjugate `F*`,
//! the recession function `F_∞`, the Uhlenbeck limit `α` and the safety
//! strain check on boundary data.

use crate::constitutive::{radial_solve, ConstitutiveLaw};
use crate::discretization::CellTensorField;
use crate::error::{Error, Result};
use crate::quadrature::{aitken_limit, integrate, QUADRATURE_TOL};
use crate::tensor::Tensor;

/// Radius cap of the sup defining `F*` at the range boundary.
pub const CONJUGATE_CAP_RADIUS: f64 = 1e6;

const MAX_EVALS: usize = 200_000;

/// Extended-real value of `F*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialValue {
    /// Finite value, or `+∞` outside the closure of the range.
    pub value: f64,
    /// The argument was within the margin of the range boundary, so the
    /// value is a capped-radius sup rather than an exact evaluation.
    pub at_boundary: bool,
}

impl PotentialValue {
    pub fn finite(value: f64) -> Self {
        PotentialValue {
            value,
            at_boundary: false,
        }
    }

    pub fn infinite() -> Self {
        PotentialValue {
            value: f64::INFINITY,
            at_boundary: false,
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.value == f64::INFINITY
    }
}

/// `F(T) = ∫₀¹ D(tT)·T dt` by adaptive quadrature to an absolute
/// tolerance of `1e-10·(1+|T|)`.
pub fn potential_f(law: &ConstitutiveLaw, t: &Tensor) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::InvalidInput("potential argument has non-finite entries".into()));
    }
    let s = t.norm();
    if s == 0.0 {
        return Ok(0.0);
    }
    let tol = QUADRATURE_TOL * (1.0 + s);
    if let Some(a) = law.prototype_a() {
        // Radial law: D(tT)·T = |D(ts)| s, integrated in the radius.
        use crate::constitutive::prototype::magnitude;
        return radial_integral(|r| magnitude(r, a), s, tol);
    }
    let r = integrate(|x| law.response(&t.scaled(x)).dot(t), 0.0, 1.0, tol, MAX_EVALS)?;
    Ok(r.value)
}

/// `∫₀^s m(r) dr`, split at `r = 1` so the knee of the profile sits on a
/// breakpoint.
fn radial_integral<M: Fn(f64) -> f64>(m: M, s: f64, tol: f64) -> Result<f64> {
    if s <= 1.0 {
        return Ok(integrate(&m, 0.0, s, tol, MAX_EVALS)?.value);
    }
    let head = integrate(&m, 0.0, 1.0, 0.5 * tol, MAX_EVALS)?.value;
    // Geometric panels keep the tail integrand smooth on every piece.
    let mut lo = 1.0;
    let mut total = head;
    let panels = (s.ln() / 4f64.ln()).ceil().max(1.0) as usize;
    let budget = 0.5 * tol / panels as f64;
    while lo < s {
        let hi = (lo * 4.0).min(s);
        total += integrate(&m, lo, hi, budget, MAX_EVALS)?.value;
        lo = hi;
    }
    Ok(total)
}

/// `F*(B) = sup_T (B·T − F(T))`.
///
/// Inside the range this is `B·D⁻¹(B) − F(D⁻¹(B))`; outside the closure it
/// is `+∞`; within the law's margin of the boundary the sup is taken
/// along the ray through `B` up to [`CONJUGATE_CAP_RADIUS`] and flagged.
pub fn conjugate_fstar(law: &ConstitutiveLaw, b: &Tensor) -> Result<PotentialValue> {
    if !b.is_finite() {
        return Ok(PotentialValue::infinite());
    }
    let margin = law.margin();
    let distance = law.range_distance(b);
    if distance > margin {
        let t = law.invert_d(b)?;
        return Ok(PotentialValue::finite(b.dot(&t) - potential_f(law, &t)?));
    }
    if distance < -margin {
        return Ok(PotentialValue::infinite());
    }
    let nb = b.norm();
    let dir = b.scaled(1.0 / nb);
    let radial = |s: f64| law.response(&dir.scaled(s)).dot(&dir);
    let s = if radial(CONJUGATE_CAP_RADIUS) <= nb {
        CONJUGATE_CAP_RADIUS
    } else {
        radial_solve(radial, nb, 1e-15 * nb)?.min(CONJUGATE_CAP_RADIUS)
    };
    let t = dir.scaled(s);
    Ok(PotentialValue {
        value: b.dot(&t) - potential_f(law, &t)?,
        at_boundary: true,
    })
}

/// The ladder `F(nU)/n`, `n = 2^6 .. 2^16`, used by [`recession_finf`].
pub fn recession_ladder(law: &ConstitutiveLaw, u: &Tensor) -> Result<Vec<f64>> {
    (6..=16)
        .map(|k| {
            let n = f64::from(1u32 << k);
            Ok(potential_f(law, &u.scaled(n))? / n)
        })
        .collect()
}

/// Recession function `F_∞(U) = lim F(nU)/n` for a unit tensor `U`, by
/// Aitken extrapolation of the doubling ladder.
pub fn recession_finf(law: &ConstitutiveLaw, u: &Tensor) -> Result<f64> {
    if (u.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!(
            "recession direction must be a unit tensor, |U| = {}",
            u.norm()
        )));
    }
    let ladder = recession_ladder(law, u)?;
    let (limit, spread) = aitken_limit(&ladder).ok_or_else(|| Error::Accuracy {
        context: "recession extrapolation".into(),
        estimate: f64::INFINITY,
    })?;
    if !(spread <= 1e-4) || !(limit > 0.0) {
        return Err(Error::Accuracy {
            context: "recession extrapolation".into(),
            estimate: spread,
        });
    }
    Ok(limit)
}

/// `α = lim t/g(t)` from log-spaced samples up to `t = 10^8`.
pub fn alpha_limit(law: &ConstitutiveLaw) -> Result<f64> {
    if !law.has_weight() {
        return Err(Error::InvalidInput("law carries no Uhlenbeck weight".into()));
    }
    let seq: Vec<f64> = (0..=16)
        .map(|k| {
            let t = 10f64.powf(k as f64 * 0.5);
            t / law.g(t).unwrap_or(f64::NAN)
        })
        .collect();
    if seq.iter().any(|v| !v.is_finite()) {
        return Err(Error::Accuracy {
            context: "alpha limit (non-finite weight)".into(),
            estimate: f64::INFINITY,
        });
    }
    let tail = &seq[seq.len() - 6..];
    // Differences at roundoff level count as converged.
    let noise = 1e-13 * tail[tail.len() - 1].abs();
    let diffs: Vec<f64> = tail
        .windows(2)
        .map(|w| w[1] - w[0])
        .map(|d| if d.abs() <= noise { 0.0 } else { d })
        .collect();
    let signs_agree = diffs.iter().all(|d| *d >= 0.0) || diffs.iter().all(|d| *d <= 0.0);
    let shrinking = diffs
        .windows(2)
        .all(|w| w[1].abs() <= w[0].abs() * (1.0 + 1e-9) + noise);
    if !(signs_agree && shrinking) {
        return Err(Error::Accuracy {
            context: "alpha limit (oscillating tail)".into(),
            estimate: diffs.iter().fold(0.0f64, |m, d| m.max(d.abs())),
        });
    }
    let (limit, _) = aitken_limit(tail).unwrap_or((tail[tail.len() - 1], 0.0));
    if !(limit > 0.0 && limit.is_finite()) {
        return Err(Error::Accuracy {
            context: "alpha limit is not positive and finite".into(),
            estimate: limit,
        });
    }
    Ok(limit)
}

/// Outcome of [`safety_strain_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyStrainReport {
    pub satisfied: bool,
    /// `max |D⁻¹(∇u0)|` over the quadrature points (∞ if some point fails).
    pub t_c: f64,
    /// Smallest distance of `∇u0` to the range boundary.
    pub margin_to_range_boundary: f64,
    /// `ess sup |∇u0| < C1`.
    pub sufficient_condition_holds: bool,
}

/// Check that the boundary datum's (symmetric) gradient lies uniformly
/// inside the range of `D`, at least `margin` from its boundary.
pub fn safety_strain_check(law: &ConstitutiveLaw, grad_u0: &CellTensorField, margin: f64) -> SafetyStrainReport {
    let mut t_c = 0.0f64;
    let mut min_dist = f64::INFINITY;
    let mut sup = 0.0f64;
    let mut ok = true;
    for e in grad_u0.values() {
        sup = sup.max(e.norm());
        let d = law.range_distance(e);
        min_dist = min_dist.min(d);
        match law.invert_d_with_margin(e, margin) {
            Ok(t) => t_c = t_c.max(t.norm()),
            Err(_) => ok = false,
        }
    }
    if !ok {
        t_c = f64::INFINITY;
    }
    SafetyStrainReport {
        satisfied: ok && min_dist > margin && t_c.is_finite(),
        t_c,
        margin_to_range_boundary: min_dist,
        sufficient_condition_holds: sup < law.constants().c1,
    }
}

/// `h̃(t) = ∫_t^∞ h(s)/(1+s)² ds`, via the substitution `x = 1/(1+s)`.
pub fn h_tilde(law: &ConstitutiveLaw, t: f64) -> Result<f64> {
    let upper = 1.0 / (1.0 + t.max(0.0));
    let r = integrate(
        |x| if x <= 0.0 { 0.0 } else { law.h(1.0 / x - 1.0) },
        0.0,
        upper,
        QUADRATURE_TOL * upper,
        MAX_EVALS,
    )?;
    Ok(r.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn proto(a: f64) -> ConstitutiveLaw {
        ConstitutiveLaw::prototype(a).unwrap()
    }

    #[test]
    fn potential_closed_form_a2() {
        let law = proto(2.0);
        assert_eq!(potential_f(&law, &Tensor::scalar(0.0)).unwrap(), 0.0);
        let f1 = potential_f(&law, &Tensor::scalar(1.0)).unwrap();
        assert!((f1 - (2f64.sqrt() - 1.0)).abs() < 1e-12);
        let f10 = potential_f(&law, &Tensor::scalar(10.0)).unwrap();
        assert!((f10 - (101f64.sqrt() - 1.0)).abs() < 1e-11);
    }

    #[test]
    fn potential_large_argument() {
        let law = proto(2.0);
        let s = 1e6;
        let f = potential_f(&law, &Tensor::scalar(s)).unwrap();
        let exact = s * (1.0 + 1.0 / (s * s)).sqrt() - 1.0;
        assert!((f - exact).abs() <= 1e-10 * (1.0 + s));
    }

    #[test]
    fn conjugate_examples() {
        let law = proto(2.0);
        assert_eq!(conjugate_fstar(&law, &Tensor::scalar(0.0)).unwrap().value, 0.0);
        let v = conjugate_fstar(&law, &Tensor::scalar(0.6)).unwrap();
        assert!((v.value - 0.2).abs() < 1e-12 && !v.at_boundary);
        assert!(conjugate_fstar(&law, &Tensor::scalar(1.5)).unwrap().is_infinite());
    }

    #[test]
    fn conjugate_at_boundary_is_flagged() {
        let law = proto(2.0);
        let v = conjugate_fstar(&law, &Tensor::scalar(1.0)).unwrap();
        assert!(v.at_boundary && v.value.is_finite());
        // capped sup of T − (√(1+T²) − 1) at T = 1e6
        assert!((v.value - 1.0).abs() < 1e-5);
    }

    #[test]
    fn recession_values() {
        let u = Tensor::scalar(1.0);
        assert!((recession_finf(&proto(2.0), &u).unwrap() - 1.0).abs() < 1e-6);
        let dir = Tensor::from_rows(&[[0.6, 0.0], [0.0, 0.8]]);
        assert!((recession_finf(&proto(1.0), &dir).unwrap() - 1.0).abs() < 1e-5);
        let scaled = proto(2.0).scaled(3.0).unwrap();
        assert!((recession_finf(&scaled, &u).unwrap() - 3.0).abs() < 1e-5);
        assert!(recession_finf(&proto(2.0), &Tensor::scalar(2.0)).is_err());
    }

    #[test]
    fn recession_ladder_nondecreasing() {
        let ladder = recession_ladder(&proto(1.0), &Tensor::scalar(1.0)).unwrap();
        assert!(ladder.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn alpha_examples() {
        assert!((alpha_limit(&proto(2.0)).unwrap() - 1.0).abs() < 1e-10);
        let lin = crate::constitutive::CustomLaw {
            name: "linear-weight".into(),
            response: std::sync::Arc::new(|t: &Tensor| *t),
            derivative: None,
            h: std::sync::Arc::new(|_| 1.0),
            g: Some(std::sync::Arc::new(|t| 2.0 * (1.0 + t))),
        };
        let consts = crate::constitutive::LawConstants {
            c0: 1.0,
            c1: 1.0,
            c2: 2.0,
        };
        let law = ConstitutiveLaw::custom(lin.clone(), consts).unwrap();
        assert!((alpha_limit(&law).unwrap() - 0.5).abs() < 1e-6);
        let sq = crate::constitutive::CustomLaw {
            g: Some(std::sync::Arc::new(|t: f64| (1.0 + t.sqrt()).powi(2))),
            ..lin
        };
        let law = ConstitutiveLaw::custom(sq, consts).unwrap();
        assert!((alpha_limit(&law).unwrap() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn oscillating_weight_rejected() {
        let osc = crate::constitutive::CustomLaw {
            name: "osc".into(),
            response: std::sync::Arc::new(|t: &Tensor| *t),
            derivative: None,
            h: std::sync::Arc::new(|_| 1.0),
            g: Some(std::sync::Arc::new(|t: f64| t * (1.5 + (t.ln()).sin()))),
        };
        let law = ConstitutiveLaw::custom(
            osc,
            crate::constitutive::LawConstants {
                c0: 1.0,
                c1: 1.0,
                c2: 3.0,
            },
        )
        .unwrap();
        assert!(matches!(alpha_limit(&law), Err(Error::Accuracy { .. })));
    }

    #[test]
    fn h_tilde_bounded_by_h() {
        let law = proto(2.0);
        for t in [0.0, 0.5, 3.0, 100.0] {
            let v = h_tilde(&law, t).unwrap();
            assert!(v > 0.0 && v <= law.h(t));
        }
    }
}
