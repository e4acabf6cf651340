//! Constitutive maps `D` with their derivative tensors, inverses and a
//! sampling-based certification of the structural assumptions.
//!
//! The prototype law is `D(T) = T / (1 + |T|^a)^(1/a)`. All of its scalar
//! profiles are evaluated in a form that neither overflows nor loses
//! precision for `|T|` up to the largest finite doubles.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Tensor, TensorMap};

pub type ResponseFn = Arc<dyn Fn(&Tensor) -> Tensor + Send + Sync>;
pub type DerivativeFn = Arc<dyn Fn(&Tensor) -> TensorMap + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Default distance kept from the boundary of the range of `D`.
pub const DEFAULT_MARGIN: f64 = 1e-8;

/// Radius used to probe the range of a custom law along a ray.
const RANGE_PROBE_RADIUS: f64 = 1e8;

/// Scalar profiles of the prototype law.
pub mod prototype {
    /// `ln(1 + s^a)` without overflow.
    #[inline]
    pub fn ln1p_pow(s: f64, a: f64) -> f64 {
        if s <= 1.0 {
            s.powf(a).ln_1p()
        } else {
            a * s.ln() + s.powf(-a).ln_1p()
        }
    }

    /// `φ(s) = (1 + s^a)^(-1/a)`, so that `D(T) = φ(|T|) T`.
    #[inline]
    pub fn phi(s: f64, a: f64) -> f64 {
        (-ln1p_pow(s, a) / a).exp()
    }

    /// `|D(T)|` as a function of `s = |T|`.
    #[inline]
    pub fn magnitude(s: f64, a: f64) -> f64 {
        if s <= 1.0 {
            s * phi(s, a)
        } else {
            (-s.powf(-a).ln_1p() / a).exp()
        }
    }

    /// `κ(s) = s^a / (1 + s^a)`, the weight of the radial projector in `A`.
    #[inline]
    pub fn kappa(s: f64, a: f64) -> f64 {
        if s == 0.0 {
            0.0
        } else {
            1.0 / (1.0 + s.powf(-a))
        }
    }

    /// Monotonicity floor `h(s) = (1 + s^a)^(-1-1/a)`; equals `d|D|/ds`.
    #[inline]
    pub fn h(s: f64, a: f64) -> f64 {
        (-(1.0 + 1.0 / a) * ln1p_pow(s, a)).exp()
    }

    /// Uhlenbeck weight `g(t) = (1 + t^a)^(1/a)`, for which `g(|T|) D(T) = T`.
    #[inline]
    pub fn g(t: f64, a: f64) -> f64 {
        (ln1p_pow(t, a) / a).exp()
    }

    /// `C2 = max{1, 2^(1-1/a)}`.
    pub fn c2(a: f64) -> f64 {
        1f64.max(2f64.powf(1.0 - 1.0 / a))
    }

    /// Inverse magnitude `b / (1 - b^a)^(1/a)` for `0 ≤ b < 1`.
    #[inline]
    pub fn inverse_magnitude(b: f64, a: f64) -> f64 {
        if b == 0.0 {
            return 0.0;
        }
        let one_minus = -(a * b.ln()).exp_m1();
        b * (-one_minus.ln() / a).exp()
    }
}

/// User-supplied constitutive map.
#[derive(Clone)]
pub struct CustomLaw {
    pub name: String,
    pub response: ResponseFn,
    /// Analytic derivative; central finite differences are used otherwise.
    pub derivative: Option<DerivativeFn>,
    pub h: ScalarFn,
    pub g: Option<ScalarFn>,
}

#[derive(Clone)]
pub enum LawKind {
    Prototype { a: f64 },
    Custom(CustomLaw),
}

/// Constants of the growth, coercivity and monotonicity bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LawConstants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

/// A constitutive law `D` together with its structural data.
///
/// Immutable after construction and cheap to clone.
#[derive(Clone)]
pub struct ConstitutiveLaw {
    kind: LawKind,
    constants: LawConstants,
    margin: f64,
}

impl fmt::Debug for ConstitutiveLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            LawKind::Prototype { a } => format!("prototype(a={a})"),
            LawKind::Custom(c) => format!("custom({})", c.name),
        };
        f.debug_struct("ConstitutiveLaw")
            .field("kind", &kind)
            .field("constants", &self.constants)
            .field("margin", &self.margin)
            .finish()
    }
}

fn check_finite(t: &Tensor, what: &str) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} has non-finite entries")))
    }
}

impl ConstitutiveLaw {
    /// The prototype law with parameter `a > 0`, `C0 = C1 = 1` and
    /// `C2 = max{1, 2^(1-1/a)}`.
    pub fn prototype(a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidInput(format!(
                "prototype parameter a must be positive, got {a}"
            )));
        }
        Ok(ConstitutiveLaw {
            kind: LawKind::Prototype { a },
            constants: LawConstants {
                c0: 1.0,
                c1: 1.0,
                c2: prototype::c2(a),
            },
            margin: DEFAULT_MARGIN,
        })
    }

    pub fn custom(law: CustomLaw, constants: LawConstants) -> Result<Self> {
        let LawConstants { c0, c1, c2 } = constants;
        if !(c0 >= 0.0 && c1 > 0.0 && c2 >= c1 && c2.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "law constants must satisfy C0 ≥ 0, C1 > 0, C2 ≥ C1 (got {c0}, {c1}, {c2})"
            )));
        }
        Ok(ConstitutiveLaw {
            kind: LawKind::Custom(law),
            constants,
            margin: DEFAULT_MARGIN,
        })
    }

    /// `D(T) = C2 T / max(1, |T|)`: bounded and monotone, but its
    /// derivative jumps across `|T| = 1` and vanishes radially outside.
    pub fn clipped(c2: f64) -> Result<Self> {
        let law = CustomLaw {
            name: format!("clipped(C2={c2})"),
            response: Arc::new(move |t: &Tensor| t.scaled(c2 / t.norm().max(1.0))),
            derivative: None,
            h: Arc::new(move |s| if s < 1.0 { c2 } else { 0.0 }),
            g: Some(Arc::new(move |t| t.max(1.0) / c2)),
        };
        Self::custom(
            law,
            LawConstants {
                c0: 0.0,
                c1: c2.min(1.0),
                c2,
            },
        )
    }

    /// `c·D` for a positive factor `c`, with analytic derivative and
    /// constants scaled accordingly.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidInput(format!("scale factor must be positive, got {c}")));
        }
        let base = self.clone();
        let base_d = base.clone();
        let base_h = base.clone();
        let base_g = base.clone();
        let name = match &self.kind {
            LawKind::Prototype { a } => format!("{c}*prototype(a={a})"),
            LawKind::Custom(cl) => format!("{c}*{}", cl.name),
        };
        let g: Option<ScalarFn> = if self.has_weight() {
            Some(Arc::new(move |t| base_g.g(t).unwrap_or(f64::NAN) / c))
        } else {
            None
        };
        let law = CustomLaw {
            name,
            response: Arc::new(move |t: &Tensor| base.response(t).scaled(c)),
            derivative: Some(Arc::new(move |t: &Tensor| {
                base_d
                    .derivative_unchecked(t)
                    .unwrap_or_else(|_| TensorMap::from_element(t.len(), t.len(), f64::NAN))
                    * c
            })),
            h: Arc::new(move |s| c * base_h.h(s)),
            g,
        };
        let k = self.constants;
        let mut out = Self::custom(
            law,
            LawConstants {
                c0: c * k.c0,
                c1: c * k.c1,
                c2: c * k.c2,
            },
        )?;
        out.margin = self.margin;
        Ok(out)
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    pub fn kind(&self) -> &LawKind {
        &self.kind
    }

    pub fn constants(&self) -> LawConstants {
        self.constants
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// Prototype parameter, if any.
    pub fn prototype_a(&self) -> Option<f64> {
        match self.kind {
            LawKind::Prototype { a } => Some(a),
            LawKind::Custom(_) => None,
        }
    }

    /// Monotonicity floor `h(s)`.
    pub fn h(&self, s: f64) -> f64 {
        match &self.kind {
            LawKind::Prototype { a } => prototype::h(s, *a),
            LawKind::Custom(c) => (c.h)(s),
        }
    }

    pub fn has_weight(&self) -> bool {
        match &self.kind {
            LawKind::Prototype { .. } => true,
            LawKind::Custom(c) => c.g.is_some(),
        }
    }

    /// Uhlenbeck weight `g(t)` if the law carries one.
    pub fn g(&self, t: f64) -> Option<f64> {
        match &self.kind {
            LawKind::Prototype { a } => Some(prototype::g(t, *a)),
            LawKind::Custom(c) => c.g.as_ref().map(|g| g(t)),
        }
    }

    /// `D(T)` without input validation.
    #[inline]
    pub(crate) fn response(&self, t: &Tensor) -> Tensor {
        match &self.kind {
            LawKind::Prototype { a } => t.scaled(prototype::phi(t.norm(), *a)),
            LawKind::Custom(c) => (c.response)(t),
        }
    }

    /// `D(T)`.
    pub fn eval_d(&self, t: &Tensor) -> Result<Tensor> {
        check_finite(t, "stress tensor")?;
        Ok(self.response(t))
    }

    fn fd_derivative(&self, t: &Tensor) -> Result<TensorMap> {
        let m = t.len();
        let step = 1e-6 * (1.0 + t.norm());
        let mut out = TensorMap::zeros(m, m);
        for l in 0..m {
            let mut tp = *t;
            let mut tm = *t;
            tp.as_mut_slice()[l] += step;
            tm.as_mut_slice()[l] -= step;
            let width = tp.as_slice()[l] - tm.as_slice()[l];
            if !(width > 0.0) {
                return Err(Error::NumericalDegeneracy(format!(
                    "finite-difference step {step:e} underflows at entry {l}"
                )));
            }
            let diff = self.response(&tp) - self.response(&tm);
            for k in 0..m {
                out[(k, l)] = diff.as_slice()[k] / width;
            }
        }
        Ok(out)
    }

    pub(crate) fn derivative_unchecked(&self, t: &Tensor) -> Result<TensorMap> {
        match &self.kind {
            LawKind::Prototype { a } => {
                let s = t.norm();
                let m = t.len();
                let phi = prototype::phi(s, *a);
                let mut out = TensorMap::identity(m, m) * phi;
                if s > 0.0 {
                    let w = phi * prototype::kappa(s, *a) / (s * s);
                    let ts = t.as_slice();
                    for k in 0..m {
                        for l in 0..m {
                            out[(k, l)] -= w * ts[k] * ts[l];
                        }
                    }
                }
                Ok(out)
            }
            LawKind::Custom(c) => match &c.derivative {
                Some(d) => Ok(d(t)),
                None => self.fd_derivative(t),
            },
        }
    }

    /// The derivative tensor `A(T) = ∂D/∂T` as a flattened matrix.
    pub fn derivative(&self, t: &Tensor) -> Result<TensorMap> {
        check_finite(t, "stress tensor")?;
        self.derivative_unchecked(t)
    }

    /// `A(T)B` and the quadratic form `(B, B)_A(T)`.
    pub fn eval_a(&self, t: &Tensor, b: &Tensor) -> Result<(Tensor, f64)> {
        check_finite(t, "stress tensor")?;
        check_finite(b, "direction tensor")?;
        if !t.same_shape(b) {
            return Err(Error::InvalidInput("T and B shapes differ".into()));
        }
        if let LawKind::Prototype { a } = self.kind {
            let s = t.norm();
            let phi = prototype::phi(s, a);
            if s == 0.0 {
                return Ok((b.scaled(phi), phi * b.norm_squared()));
            }
            let that = t.scaled(1.0 / s);
            let kappa = prototype::kappa(s, a);
            let proj = that.dot(b);
            let applied = (*b - that.scaled(kappa * proj)).scaled(phi);
            let quad = phi * (b.norm_squared() - kappa * proj * proj);
            return Ok((applied, quad));
        }
        let map = self.derivative_unchecked(t)?;
        let applied = Tensor::apply(&map, b);
        Ok((applied, applied.dot(b)))
    }

    /// Signed distance estimate of `B` to the boundary of the range of `D`
    /// (positive inside).
    pub fn range_distance(&self, b: &Tensor) -> f64 {
        let nb = b.norm();
        match &self.kind {
            LawKind::Prototype { .. } => 1.0 - nb,
            LawKind::Custom(_) => {
                if nb == 0.0 {
                    let probe = Tensor::unit_diagonal(b.rows(), b.cols()).scaled(RANGE_PROBE_RADIUS);
                    return self.response(&probe).norm();
                }
                let dir = b.scaled(1.0 / nb);
                self.response(&dir.scaled(RANGE_PROBE_RADIUS)).dot(&dir) - nb
            }
        }
    }

    /// `D⁻¹(B)` with the law's default margin.
    pub fn invert_d(&self, b: &Tensor) -> Result<Tensor> {
        self.invert_d_with_margin(b, self.margin)
    }

    /// `D⁻¹(B)`, refusing arguments closer than `margin` to the range
    /// boundary.
    pub fn invert_d_with_margin(&self, b: &Tensor, margin: f64) -> Result<Tensor> {
        check_finite(b, "strain tensor")?;
        let distance = self.range_distance(b);
        if !(distance > margin) {
            return Err(Error::OutOfRange { distance, margin });
        }
        let nb = b.norm();
        if nb == 0.0 {
            return Ok(*b);
        }
        if let LawKind::Prototype { a } = self.kind {
            return Ok(b.scaled(prototype::inverse_magnitude(nb, a) / nb));
        }
        let dir = b.scaled(1.0 / nb);
        let s = radial_solve(|s| self.response(&dir.scaled(s)).dot(&dir), nb, 1e-14 * nb)?;
        let guess = dir.scaled(s);
        newton_polish(|t| self.response(t), |t| self.derivative_unchecked(t), b, guess, 1e-13)
    }
}

/// Solve `m(s) = target` for an increasing `m` with `m(0) = 0` on `s ≥ 0`.
///
/// Works in `σ = ln s` with Illinois false position and bisection
/// safeguards, so targets requiring huge `s` are reached in a handful of
/// steps. Fails when `m` saturates below `target`.
pub(crate) fn radial_solve<M: Fn(f64) -> f64>(m: M, target: f64, atol: f64) -> Result<f64> {
    if target <= 0.0 {
        return Ok(0.0);
    }
    let f = |sigma: f64| m(sigma.exp()) - target;
    let mut lo = target.ln();
    let mut flo = f(lo);
    let mut step = 1.0;
    while flo > 0.0 {
        lo -= step;
        step *= 2.0;
        if lo < -745.0 {
            return Err(Error::NumericalDegeneracy("radial solve: no lower bracket".into()));
        }
        flo = f(lo);
    }
    let mut hi = lo + 1.0;
    let mut fhi = f(hi);
    step = 1.0;
    while fhi < 0.0 {
        lo = hi;
        flo = fhi;
        hi += step;
        step *= 2.0;
        if hi > 709.0 {
            hi = 709.0;
            fhi = f(hi);
            if fhi < 0.0 {
                return Err(Error::solver(
                    format!("radial solve: target {target:e} not attained below s = e^709"),
                    vec![fhi],
                ));
            }
            break;
        }
        fhi = f(hi);
    }
    if flo == 0.0 {
        return Ok(lo.exp());
    }
    let mut side = 0i8;
    for _ in 0..400 {
        if (hi - lo) <= 4.0 * f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
        let mut x = hi - fhi * (hi - lo) / (fhi - flo);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x);
        if fx.abs() <= atol {
            return Ok(x.exp());
        }
        if fx < 0.0 {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    let x = if flo.abs() < fhi.abs() { lo } else { hi };
    Ok(x.exp())
}

/// Damped Newton iteration for `map(T) = target` from `guess`.
pub(crate) fn newton_polish<M, J>(map: M, jac: J, target: &Tensor, guess: Tensor, rtol: f64) -> Result<Tensor>
where
    M: Fn(&Tensor) -> Tensor,
    J: Fn(&Tensor) -> Result<TensorMap>,
{
    let tol = rtol * target.norm().max(1.0);
    let mut t = guess;
    let mut r = map(&t) - *target;
    let mut rn = r.norm();
    let mut history = vec![rn];
    for _ in 0..100 {
        if rn <= tol {
            return Ok(t);
        }
        let jm = jac(&t)?;
        let rhs = nalgebra::DVector::from_column_slice(r.as_slice());
        let delta = jm
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::NumericalDegeneracy("singular derivative in Newton polish".into()))?;
        let step = Tensor::from_slice(t.rows(), t.cols(), delta.as_slice());
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = t - step.scaled(lambda);
            let rt = map(&trial) - *target;
            let rtn = rt.norm();
            if rtn.is_finite() && rtn <= (1.0 - 1e-4 * lambda) * rn {
                t = trial;
                r = rt;
                rn = rtn;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        history.push(rn);
        if !accepted {
            if rn <= 1e3 * tol {
                return Ok(t);
            }
            return Err(Error::solver("Newton polish stagnated", history));
        }
    }
    if rn <= 1e3 * tol {
        Ok(t)
    } else {
        Err(Error::solver("Newton polish did not converge", history))
    }
}

/// How `check_structure` samples tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingSpec {
    /// Shape of sampled tensors (components × spatial dimension).
    pub rows: usize,
    pub cols: usize,
    /// Sample only symmetric tensors (limiting-strain variant).
    pub symmetric: bool,
    /// Spatial dimension used for the BiFu admissibility threshold.
    pub dimension: usize,
    pub radii: usize,
    pub directions: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub seed: u64,
}

impl SamplingSpec {
    pub fn new(dimension: usize, symmetric: bool, seed: u64) -> Self {
        SamplingSpec {
            rows: dimension,
            cols: dimension,
            symmetric,
            dimension,
            radii: 64,
            directions: 32,
            r_min: 1e-3,
            r_max: 1e6,
            seed,
        }
    }

    /// Log-spaced radii from `r_min` to `r_max`.
    pub fn radius_ladder(&self) -> Vec<f64> {
        let (l0, l1) = (self.r_min.ln(), self.r_max.ln());
        let k = self.radii.max(2);
        (0..k)
            .map(|i| (l0 + (l1 - l0) * i as f64 / (k - 1) as f64).exp())
            .collect()
    }
}

/// Uniformly distributed unit tensor of the given shape.
pub fn random_unit_tensor<R: Rng>(rng: &mut R, rows: usize, cols: usize, symmetric: bool) -> Tensor {
    loop {
        let mut t = Tensor::zeros(rows, cols);
        for v in t.as_mut_slice() {
            *v = rng.gen_range(-1.0..1.0);
        }
        if symmetric {
            t = t.symmetric_part();
        }
        let n = t.norm();
        if n > 1e-3 && (symmetric || n <= 1.0) {
            return t.scaled(1.0 / n);
        }
    }
}

/// Outcome of [`ConstitutiveLaw::check_structure`].
///
/// Each `*_ok` flag states that the corresponding inequality held at every
/// sample within a relative tolerance of 1e-9. `worst_violation` is the
/// largest signed violation over all checks (normalized by the size of the
/// right-hand side), so a nonpositive value means every flag is true.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    /// `D(T)·T ≥ C1|T| − C0`.
    pub coercivity_ok: bool,
    /// `|D(T)| ≤ C2`.
    pub boundedness_ok: bool,
    /// `h(|T|)|B|² ≤ (B,B)_A(T) ≤ C2|B|²/(1+|T|)`.
    pub h_sandwich_ok: bool,
    /// `|A^s − A|²/h ≤ C2/(1+|T|)`; false when skipped for a nonsmooth law.
    pub asym_symmetry_ok: bool,
    /// Whether the asymmetry check ran (it needs a continuous `A`).
    pub asym_symmetry_checked: bool,
    /// `A` showed no jump along the probed rays.
    pub smooth_ok: bool,
    /// `g(t) ≤ C2(1+t)` and `|g D(T) − T|²/h ≤ C2(1+|T|³)`; `None` without a weight.
    pub uhlenbeck_ok: Option<bool>,
    /// Fitted decay exponent `q` of `h(s) ~ (1+s)^(-q)` on the top two
    /// decades of the radius ladder.
    pub bifu_exponent: Option<f64>,
    /// `q < 1 + 2/d` (or `q ≤ 2` when `d = 2`).
    pub bifu_admissible: bool,
    /// Smallest `C0` that makes the coercivity inequality hold on the samples.
    pub empirical_c0: f64,
    pub worst_violation: f64,
    pub sample_count: usize,
}

const STRUCTURE_RTOL: f64 = 1e-9;

impl ConstitutiveLaw {
    /// Test every structural inequality on a log-radial sample cloud.
    pub fn check_structure(&self, spec: &SamplingSpec) -> StructureReport {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let LawConstants { c0, c1, c2 } = self.constants;
        let radii = spec.radius_ladder();
        let dirs: Vec<Tensor> = (0..spec.directions)
            .map(|_| random_unit_tensor(&mut rng, spec.rows, spec.cols, spec.symmetric))
            .collect();

        let mut worst = f64::NEG_INFINITY;
        let mut worst_coerc = f64::NEG_INFINITY;
        let mut worst_bound = f64::NEG_INFINITY;
        let mut worst_sandwich = f64::NEG_INFINITY;
        let mut worst_asym = f64::NEG_INFINITY;
        let mut worst_uhl = f64::NEG_INFINITY;
        let mut empirical_c0 = 0.0f64;
        let mut samples = 0usize;
        let weighted = self.has_weight();

        for dir in &dirs {
            for &r in &radii {
                let t = dir.scaled(r);
                let d = self.response(&t);
                let s = t.norm();
                samples += 1;

                let lhs = d.dot(&t);
                empirical_c0 = empirical_c0.max(c1 * s - lhs);
                worst_coerc = worst_coerc.max((c1 * s - c0 - lhs) / (1.0 + c1 * s) - STRUCTURE_RTOL);
                worst_bound = worst_bound.max((d.norm() - c2) / c2 - STRUCTURE_RTOL);

                let b = random_unit_tensor(&mut rng, spec.rows, spec.cols, spec.symmetric);
                let hs = self.h(s);
                let upper = c2 / (1.0 + s);
                let map = match self.derivative_unchecked(&t) {
                    Ok(m) => m,
                    Err(_) => {
                        worst_sandwich = f64::INFINITY;
                        continue;
                    }
                };
                let quad = Tensor::bilinear(&map, &b, &b);
                worst_sandwich = worst_sandwich
                    .max((hs - quad) / upper - STRUCTURE_RTOL)
                    .max((quad - upper) / upper - STRUCTURE_RTOL);

                let skew = (&map - map.transpose()) * 0.5;
                let skew2 = skew.norm_squared();
                let asym = if hs > 0.0 {
                    skew2 / hs
                } else if skew2 > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                };
                worst_asym = worst_asym.max((asym - upper) / upper - STRUCTURE_RTOL);

                if weighted {
                    let gt = self.g(s).unwrap_or(f64::NAN);
                    let lin = c2 * (1.0 + s);
                    worst_uhl = worst_uhl.max((gt - lin) / lin - STRUCTURE_RTOL);
                    let defect = (d.scaled(gt) - t).norm_squared();
                    let rhs = c2 * (1.0 + s.powi(3));
                    let ratio = if hs > 0.0 {
                        defect / hs
                    } else if defect > 0.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    };
                    worst_uhl = worst_uhl.max((ratio - rhs) / rhs - STRUCTURE_RTOL);
                }
            }
        }

        let jump = self.smoothness_probe(&dirs, &radii);
        let smooth_ok = jump <= 0.0;
        worst = worst.max(worst_coerc).max(worst_bound).max(worst_sandwich);
        if smooth_ok {
            worst = worst.max(worst_asym);
        } else {
            worst = worst.max(jump);
        }
        if weighted {
            worst = worst.max(worst_uhl);
        }

        let bifu_exponent = self.bifu_fit(spec);
        let dim = spec.dimension;
        let bifu_admissible = bifu_exponent
            .map(|q| if dim == 2 { q <= 2.0 } else { q < 1.0 + 2.0 / dim as f64 })
            .unwrap_or(false);

        StructureReport {
            coercivity_ok: worst_coerc <= 0.0,
            boundedness_ok: worst_bound <= 0.0,
            h_sandwich_ok: worst_sandwich <= 0.0,
            asym_symmetry_ok: smooth_ok && worst_asym <= 0.0,
            asym_symmetry_checked: smooth_ok,
            smooth_ok,
            uhlenbeck_ok: weighted.then_some(worst_uhl <= 0.0),
            bifu_exponent,
            bifu_admissible,
            empirical_c0,
            worst_violation: worst,
            sample_count: samples,
        }
    }

    /// Largest relative jump of `A` that survives 30 bisections of a radial
    /// interval, minus the detection threshold; nonpositive for continuous `A`.
    fn smoothness_probe(&self, dirs: &[Tensor], radii: &[f64]) -> f64 {
        let probe_dirs = &dirs[..dirs.len().min(8)];
        let mut worst = f64::NEG_INFINITY;
        let a_at = |t: &Tensor| self.derivative_unchecked(t).ok();
        for dir in probe_dirs {
            for w in radii.windows(2) {
                let (mut lo, mut hi) = (w[0], w[1]);
                let (Some(mut alo), Some(mut ahi)) = (a_at(&dir.scaled(lo)), a_at(&dir.scaled(hi))) else {
                    return f64::INFINITY;
                };
                for _ in 0..30 {
                    let mid = 0.5 * (lo + hi);
                    let Some(amid) = a_at(&dir.scaled(mid)) else {
                        return f64::INFINITY;
                    };
                    if (&amid - &alo).norm() >= (&ahi - &amid).norm() {
                        hi = mid;
                        ahi = amid;
                    } else {
                        lo = mid;
                        alo = amid;
                    }
                }
                let scale = alo.norm().max(ahi.norm()).max(f64::MIN_POSITIVE);
                worst = worst.max((&ahi - &alo).norm() / scale - 1e-4);
            }
        }
        worst
    }

    /// Least-squares slope of `-ln h(s)` against `ln(1+s)` over
    /// `s ∈ [r_max/100, r_max]`.
    fn bifu_fit(&self, spec: &SamplingSpec) -> Option<f64> {
        let pts: Vec<(f64, f64)> = spec
            .radius_ladder()
            .into_iter()
            .filter(|&s| s >= spec.r_max / 100.0 * (1.0 - 1e-12))
            .filter_map(|s| {
                let h = self.h(s);
                (h > 0.0 && h.is_finite()).then(|| ((1.0 + s).ln(), -h.ln()))
            })
            .collect();
        let (slope, _) = linear_fit(&pts)?;
        Some(slope)
    }
}

/// Ordinary least squares `y ≈ slope·x + intercept`; also used for the
/// growth fits in the diagnostics. Returns `(slope, r²)`.
pub(crate) fn linear_fit(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Some((slope, r2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn proto(a: f64) -> ConstitutiveLaw {
        ConstitutiveLaw::prototype(a).unwrap()
    }

    #[test]
    fn scalar_prototype_values() {
        let law = proto(2.0);
        assert_eq!(law.eval_d(&Tensor::scalar(0.0)).unwrap()[(0, 0)], 0.0);
        let d = law.eval_d(&Tensor::scalar(1.0)).unwrap()[(0, 0)];
        assert!((d - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn a1_matrix_example() {
        let t = Tensor::identity(2).scaled(3.0 / 2f64.sqrt());
        let d = proto(1.0).eval_d(&t).unwrap();
        assert!(d.max_abs_diff(&t.scaled(0.25)) < 1e-15);
        assert!((d.norm() - 0.75).abs() < 1e-14);
    }

    #[test]
    fn non_finite_rejected() {
        let e = proto(2.0).eval_d(&Tensor::scalar(f64::NAN)).unwrap_err();
        assert!(matches!(e, Error::InvalidInput(_)));
    }

    #[test]
    fn derivative_scalar_example() {
        let (applied, quad) = proto(2.0).eval_a(&Tensor::scalar(1.0), &Tensor::scalar(1.0)).unwrap();
        assert!((quad - 2f64.powf(-1.5)).abs() < 1e-15);
        assert!((applied[(0, 0)] - 2f64.powf(-1.5)).abs() < 1e-15);
    }

    #[test]
    fn derivative_at_zero_is_identity() {
        let b = Tensor::from_rows(&[[0.3, -1.0], [2.0, 0.5]]);
        let (applied, quad) = proto(2.0).eval_a(&Tensor::zeros(2, 2), &b).unwrap();
        assert_eq!(applied, b);
        assert_eq!(quad, b.norm_squared());
    }

    #[test]
    fn inverse_examples() {
        let law = proto(2.0);
        assert_eq!(law.invert_d(&Tensor::scalar(0.0)).unwrap()[(0, 0)], 0.0);
        let t = law.invert_d(&Tensor::scalar(0.5f64.sqrt())).unwrap()[(0, 0)];
        assert!((t - 1.0).abs() < 1e-14);
        let e = law.invert_d_with_margin(&Tensor::scalar(0.999999), 1e-5).unwrap_err();
        assert!(matches!(e, Error::OutOfRange { .. }));
    }

    #[test]
    fn inverse_magnitude_near_boundary() {
        let b = 1.0 - 1e-12;
        let s = prototype::inverse_magnitude(b, 2.0);
        assert!((prototype::magnitude(s, 2.0) - b).abs() < 1e-15);
    }

    #[test]
    fn profiles_do_not_overflow() {
        for a in [0.5, 1.0, 2.0, 7.0] {
            let big = 1e300;
            assert!((prototype::magnitude(big, a) - 1.0).abs() < 1e-12);
            assert!(prototype::phi(big, a) > 0.0);
            assert!(prototype::h(big, a).is_finite());
        }
    }

    #[test]
    fn custom_inverse_via_newton() {
        let law = proto(2.0).scaled(2.0).unwrap();
        let t = Tensor::from_rows(&[[0.3, 1.2], [-0.7, 2.0]]);
        let b = law.eval_d(&t).unwrap();
        let back = law.invert_d(&b).unwrap();
        assert!(back.max_abs_diff(&t) < 1e-10);
    }

    #[test]
    fn custom_finite_difference_matches_analytic() {
        let p = proto(1.0);
        let inner = p.clone();
        let fd = ConstitutiveLaw::custom(
            CustomLaw {
                name: "fd".into(),
                response: Arc::new(move |t| inner.response(t)),
                derivative: None,
                h: Arc::new(|s| prototype::h(s, 1.0)),
                g: None,
            },
            p.constants(),
        )
        .unwrap();
        let t = Tensor::from_rows(&[[0.4, -2.0], [1.0, 0.1]]);
        let exact = p.derivative(&t).unwrap();
        let approx = fd.derivative(&t).unwrap();
        assert!((exact - approx).norm() < 1e-8);
    }

    #[test]
    fn structure_prototype_a2() {
        let r = proto(2.0).check_structure(&SamplingSpec::new(2, false, 7));
        assert!(r.coercivity_ok && r.boundedness_ok && r.h_sandwich_ok);
        assert!(r.asym_symmetry_ok && r.smooth_ok);
        assert_eq!(r.uhlenbeck_ok, Some(true));
        assert!(r.worst_violation <= 0.0);
        let q = r.bifu_exponent.unwrap();
        assert!((q - 3.0).abs() < 0.05, "q = {q}");
        assert!(!r.bifu_admissible);
        assert_eq!(r.sample_count, 64 * 32);
    }

    #[test]
    fn structure_prototype_small_a_is_bifu() {
        let r = proto(0.5).check_structure(&SamplingSpec::new(3, true, 3));
        let q = r.bifu_exponent.unwrap();
        assert!((q - 1.5).abs() < 0.05, "q = {q}");
        assert!(r.bifu_admissible);
    }

    #[test]
    fn structure_clipped_is_nonsmooth() {
        let r = ConstitutiveLaw::clipped(1.0)
            .unwrap()
            .check_structure(&SamplingSpec::new(2, false, 11));
        assert!(!r.smooth_ok);
        assert!(!r.asym_symmetry_checked);
        assert!(!r.asym_symmetry_ok);
        assert!(r.worst_violation > 0.0);
    }

    #[test]
    fn radial_solve_huge_root() {
        let s = radial_solve(|s| s.powf(0.125), 10.0, 1e-14).unwrap();
        assert!((s / 1e8 - 1.0).abs() < 1e-12);
    }
}
