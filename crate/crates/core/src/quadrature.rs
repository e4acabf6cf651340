//! One-dimensional adaptive quadrature and sequence acceleration.

use crate::error::{Error, Result};

/// Absolute tolerance scale used by the integral-defined quantities
/// (potentials, `G_k`, 1D oracle) and, multiplied by 10, by the residual
/// checks that compare against "quadrature tolerance".
pub const QUADRATURE_TOL: f64 = 1e-10;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) integration of `f` over `[a, b]` to the
/// absolute tolerance `tol`.
///
/// Intervals with the largest error estimate are bisected first. Fails
/// with an accuracy error carrying the achieved estimate once `max_evals`
/// integrand calls are exhausted.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, max_evals: usize) -> Result<Integral> {
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let (v, e) = gk15(&f, a, b);
    let mut parts = vec![(a, b, v, e)];
    let mut evals = 15;
    loop {
        let value: f64 = parts.iter().map(|p| p.2).sum();
        let error: f64 = parts.iter().map(|p| p.3).sum();
        if !value.is_finite() {
            return Err(Error::Accuracy {
                context: "adaptive quadrature (non-finite integrand)".into(),
                estimate: f64::INFINITY,
            });
        }
        if error <= tol {
            return Ok(Integral {
                value,
                error,
                evaluations: evals,
            });
        }
        if evals + 30 > max_evals {
            return Err(Error::Accuracy {
                context: "adaptive quadrature".into(),
                estimate: error,
            });
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, p)| if p.3 > best.1 { (i, p.3) } else { best });
        let (lo, hi, _, _) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(Error::Accuracy {
                context: "adaptive quadrature (interval underflow)".into(),
                estimate: error,
            });
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        evals += 30;
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}

/// Fixed composite Gauss–Legendre rule with 32 panels of the 7-point
/// Gauss rule embedded in [`gk15`]; used when adaptivity is not wanted.
pub fn integrate_fixed<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let panels = 32;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = a + i as f64 * h;
            gk15(&f, lo, lo + h).0
        })
        .sum()
}

/// Aitken Δ² extrapolation of the tail of a sequence.
///
/// Returns the last accelerated value and the spread between the last two
/// accelerated values. When the sequence has already converged (zero
/// second difference) the last term is returned unchanged.
pub fn aitken_limit(seq: &[f64]) -> Option<(f64, f64)> {
    if seq.len() < 3 {
        return None;
    }
    let accel: Vec<f64> = seq
        .windows(3)
        .map(|w| {
            let d1 = w[1] - w[0];
            let d2 = w[2] - w[1];
            let den = d2 - d1;
            if den.abs() <= 1e-15 * w[2].abs().max(1e-300) || !(d1 * d2 > 0.0) {
                w[2]
            } else {
                w[2] - d2 * d2 / den
            }
        })
        .collect();
    let last = *accel.last()?;
    let spread = if accel.len() >= 2 {
        (last - accel[accel.len() - 2]).abs()
    } else {
        (last - seq[seq.len() - 1]).abs()
    };
    Some((last, spread))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x| x.powi(5) - 2.0 * x, 0.0, 2.0, 1e-13, 10_000).unwrap();
        assert!((r.value - (64.0 / 6.0 - 4.0)).abs() < 1e-12);
    }

    #[test]
    fn sqrt_singularity_adapts() {
        let r = integrate(f64::sqrt, 0.0, 1.0, 1e-11, 100_000).unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn budget_exhaustion_reports_estimate() {
        let e = integrate(|x| (1.0 / x).sin(), 1e-8, 1.0, 1e-15, 100).unwrap_err();
        assert!(matches!(e, Error::Accuracy { .. }));
    }

    #[test]
    fn fixed_rule_smooth() {
        let v = integrate_fixed(f64::exp, 0.0, 1.0);
        assert!((v - (std::f64::consts::E - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn aitken_geometric() {
        let seq: Vec<f64> = (0..6).map(|k| 1.0 - 0.5f64.powi(k)).collect();
        let (lim, spread) = aitken_limit(&seq).unwrap();
        assert!((lim - 1.0).abs() < 1e-14);
        assert!(spread < 1e-14);
    }
}
