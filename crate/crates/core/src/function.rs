//! Evaluatable entire-function specifications with exact auxiliary data
//! (zero generators, closed-form moduli) and overflow-safe log-polar
//! evaluation for iterates beyond floating-point range.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::complex_ext::{log_abs_sum, wrap_angle, ComplexSample, MAX_PLAIN_LOG};
use crate::error::{Error, Result};

/// Relative tail bound required of a truncated series evaluation.
const SERIES_TAIL_REL: f64 = 1e-14;
/// |Im z| beyond which sin/cos switch to the single-exponential form.
const TRIG_ASYMPTOTIC_IM: f64 = 20.0;

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Cx {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for Cx {
    fn from(z: Complex64) -> Self {
        Cx { re: z.re, im: z.im }
    }
}

impl From<Cx> for Complex64 {
    fn from(c: Cx) -> Self {
        Complex64::new(c.re, c.im)
    }
}

/// The built-in function families.
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionKind {
    ScaledExp { lambda: Complex64 },
    Sin,
    Cos,
    /// Coefficients in ascending degree order.
    Polynomial { coefficients: Vec<Complex64> },
    /// Truncated power series, valid for |argument| <= validity_radius.
    TaylorSeries {
        coefficients: Vec<Complex64>,
        validity_radius: f64,
    },
}

/// An entire function `f(z) = post_scale * kind(z + pre_shift)`.
///
/// The affine wrappers cover normalizations such as `sin(z + 1)/sin 1`
/// while keeping the zero generators and closed forms of the base family.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSpec {
    pub kind: FunctionKind,
    pub pre_shift: Complex64,
    pub post_scale: Complex64,
    pub numeric_roots: bool,
}

// ---------------------------------------------------------------------------
// serde: {"kind": "...", "params": {...}, "shift": ..., "scale": ...}
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct SpecDoc {
    kind: String,
    #[serde(default)]
    params: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shift: Option<Cx>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale: Option<Cx>,
}

impl Serialize for FunctionSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let params = match &self.kind {
            FunctionKind::ScaledExp { lambda } => {
                serde_json::json!({"lambda": Cx::from(*lambda)})
            }
            FunctionKind::Sin | FunctionKind::Cos => serde_json::json!({}),
            FunctionKind::Polynomial { coefficients } => {
                serde_json::json!({"coefficients": coefficients.iter().map(|c| Cx::from(*c)).collect::<Vec<_>>()})
            }
            FunctionKind::TaylorSeries {
                coefficients,
                validity_radius,
            } => serde_json::json!({
                "coefficients": coefficients.iter().map(|c| Cx::from(*c)).collect::<Vec<_>>(),
                "validity_radius": validity_radius
            }),
        };
        let doc = SpecDoc {
            kind: match &self.kind {
                FunctionKind::ScaledExp { .. } => "scaled_exp",
                FunctionKind::Sin => "sin",
                FunctionKind::Cos => "cos",
                FunctionKind::Polynomial { .. } => "polynomial",
                FunctionKind::TaylorSeries { .. } => "taylor_series",
            }
            .to_string(),
            params,
            shift: (self.pre_shift != Complex64::ZERO).then(|| self.pre_shift.into()),
            scale: (self.post_scale != Complex64::ONE).then(|| self.post_scale.into()),
        };
        doc.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FunctionSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let doc = SpecDoc::deserialize(d)?;
        let get_cx = |v: &serde_json::Value| -> std::result::Result<Complex64, D::Error> {
            let c: Cx = serde_json::from_value(v.clone()).map_err(DeError::custom)?;
            Ok(c.into())
        };
        let kind = match doc.kind.as_str() {
            "scaled_exp" => FunctionKind::ScaledExp {
                lambda: get_cx(doc.params.get("lambda").ok_or_else(|| {
                    DeError::custom("scaled_exp requires params.lambda")
                })?)?,
            },
            "sin" => FunctionKind::Sin,
            "cos" => FunctionKind::Cos,
            "polynomial" | "taylor_series" => {
                let coeffs: Vec<Cx> = serde_json::from_value(
                    doc.params
                        .get("coefficients")
                        .cloned()
                        .ok_or_else(|| DeError::custom("missing params.coefficients"))?,
                )
                .map_err(DeError::custom)?;
                let coefficients: Vec<Complex64> = coeffs.into_iter().map(Into::into).collect();
                if doc.kind == "polynomial" {
                    FunctionKind::Polynomial { coefficients }
                } else {
                    let validity_radius = doc
                        .params
                        .get("validity_radius")
                        .and_then(|v| v.as_f64())
                        .ok_or_else(|| DeError::custom("missing params.validity_radius"))?;
                    FunctionKind::TaylorSeries {
                        coefficients,
                        validity_radius,
                    }
                }
            }
            other => return Err(DeError::custom(format!("unknown kind {other:?}"))),
        };
        Ok(FunctionSpec {
            kind,
            pre_shift: doc.shift.map(Into::into).unwrap_or(Complex64::ZERO),
            post_scale: doc.scale.map(Into::into).unwrap_or(Complex64::ONE),
            numeric_roots: true,
        })
    }
}

impl FunctionSpec {
    pub fn new(kind: FunctionKind) -> Self {
        FunctionSpec {
            kind,
            pre_shift: Complex64::ZERO,
            post_scale: Complex64::ONE,
            numeric_roots: true,
        }
    }

    pub fn scaled_exp(lambda: Complex64) -> Self {
        Self::new(FunctionKind::ScaledExp { lambda })
    }

    pub fn exp() -> Self {
        Self::scaled_exp(Complex64::ONE)
    }

    pub fn sin() -> Self {
        Self::new(FunctionKind::Sin)
    }

    pub fn cos() -> Self {
        Self::new(FunctionKind::Cos)
    }

    pub fn polynomial(coefficients: Vec<Complex64>) -> Self {
        Self::new(FunctionKind::Polynomial { coefficients })
    }

    pub fn polynomial_real(coefficients: &[f64]) -> Self {
        Self::polynomial(coefficients.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn taylor(coefficients: Vec<Complex64>, validity_radius: f64) -> Self {
        Self::new(FunctionKind::TaylorSeries {
            coefficients,
            validity_radius,
        })
    }

    /// Truncation of exp(z) with `terms` coefficients.
    pub fn taylor_exp(terms: usize, validity_radius: f64) -> Self {
        let mut coeffs = Vec::with_capacity(terms);
        let mut c = 1.0f64;
        for k in 0..terms {
            if k > 0 {
                c /= k as f64;
            }
            coeffs.push(Complex64::new(c, 0.0));
        }
        Self::taylor(coeffs, validity_radius)
    }

    pub fn with_shift(mut self, shift: Complex64) -> Self {
        self.pre_shift = shift;
        self
    }

    pub fn with_scale(mut self, scale: Complex64) -> Self {
        self.post_scale = scale;
        self
    }

    pub fn without_numeric_roots(mut self) -> Self {
        self.numeric_roots = false;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("function JSON: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("function spec serializes")
    }

    /// Rescaled copy with f(0) = 1.
    pub fn normalized(&self) -> Result<FunctionSpec> {
        let f0 = self.evaluate(Complex64::ZERO)?;
        if f0.norm() == 0.0 {
            return Err(Error::NormalizationError(
                "f(0) = 0, rescaling impossible".into(),
            ));
        }
        let mut out = self.clone();
        out.post_scale /= f0;
        Ok(out)
    }

    // -- plain evaluation ---------------------------------------------------

    /// f(z). Errors with `Overflow` when the value exceeds f64 range and
    /// with `OutOfValidity` for series arguments beyond their radius.
    pub fn evaluate(&self, z: Complex64) -> Result<Complex64> {
        let w = z + self.pre_shift;
        let raw = match &self.kind {
            FunctionKind::ScaledExp { lambda } => {
                let log_mag = lambda.norm().ln() + self.post_scale.norm().ln() + w.re;
                if log_mag > MAX_PLAIN_LOG {
                    return Err(Error::Overflow(format!(
                        "|f(z)| has log modulus {log_mag:.3e}"
                    )));
                }
                lambda * w.exp()
            }
            FunctionKind::Sin => w.sin(),
            FunctionKind::Cos => w.cos(),
            FunctionKind::Polynomial { coefficients } => horner(coefficients, w),
            FunctionKind::TaylorSeries {
                coefficients,
                validity_radius,
            } => {
                if w.norm() > *validity_radius {
                    return Err(Error::OutOfValidity(format!(
                        "|z + shift| = {:.6e} exceeds validity radius {:.6e}",
                        w.norm(),
                        validity_radius
                    )));
                }
                series_sum(coefficients, w)?
            }
        };
        let out = self.post_scale * raw;
        if out.re.is_finite() && out.im.is_finite() {
            Ok(out)
        } else {
            Err(Error::Overflow(format!("f({z}) exceeds f64 range")))
        }
    }

    // -- extended-range evaluation -------------------------------------------

    /// log |f(z)| and arg f(z) for a log-polar argument, without overflow.
    pub fn evaluate_log(&self, z: ComplexSample) -> Result<ComplexSample> {
        // Plain route whenever the argument itself is representable.
        if z.is_zero || z.log_mag <= MAX_PLAIN_LOG {
            return self.evaluate_log_plain(z.to_complex()?);
        }
        // |z| itself exceeds f64 range: closed-form families only.
        self.evaluate_log_huge_arg(z)
    }

    /// log |f(z)| and arg f(z) for a plain argument, without overflow and
    /// without any polar round trip on the argument itself.
    pub fn evaluate_log_plain(&self, zc: Complex64) -> Result<ComplexSample> {
        match self.evaluate(zc) {
            Ok(v) => {
                if v.norm() > 1e-300 || matches!(self.kind, FunctionKind::TaylorSeries { .. }) {
                    Ok(ComplexSample::from_complex(v))
                } else {
                    // underflow (or a genuine zero): the extended form
                    // recovers the finite log modulus when there is one
                    match self.evaluate_log_extended_plain_arg(zc) {
                        Ok(s) => Ok(s),
                        Err(Error::NearZeroDivision(_)) => Ok(ComplexSample::zero()),
                        Err(e) => Err(e),
                    }
                }
            }
            Err(Error::Overflow(_)) => self.evaluate_log_extended_plain_arg(zc),
            Err(e) => Err(e),
        }
    }

    /// Argument fits in f64 but f(z) overflows.
    fn evaluate_log_extended_plain_arg(&self, z: Complex64) -> Result<ComplexSample> {
        let w = z + self.pre_shift;
        let scale_log = self.post_scale.norm().ln();
        let scale_arg = self.post_scale.arg();
        match &self.kind {
            FunctionKind::ScaledExp { lambda } => Ok(ComplexSample::new(
                lambda.norm().ln() + scale_log + w.re,
                lambda.arg() + scale_arg + w.im,
            )),
            FunctionKind::Sin => {
                let (lm, ar) = log_sin(w)?;
                Ok(ComplexSample::new(lm + scale_log, ar + scale_arg))
            }
            FunctionKind::Cos => {
                let (lm, ar) = log_cos(w)?;
                Ok(ComplexSample::new(lm + scale_log, ar + scale_arg))
            }
            FunctionKind::Polynomial { coefficients } => {
                let s = poly_log(coefficients, ComplexSample::from_complex(w))?;
                Ok(ComplexSample::new(s.log_mag + scale_log, s.arg + scale_arg))
            }
            FunctionKind::TaylorSeries { .. } => Err(Error::OutOfValidity(
                "series evaluation overflowed inside its validity radius".into(),
            )),
        }
    }

    /// |z| beyond f64 range: only families with closed-form log evaluation.
    fn evaluate_log_huge_arg(&self, z: ComplexSample) -> Result<ComplexSample> {
        let scale_log = self.post_scale.norm().ln();
        let scale_arg = self.post_scale.arg();
        match &self.kind {
            FunctionKind::ScaledExp { lambda } => {
                // Re(z) = |z| cos(arg z); the shift is negligible at this scale
                // unless it is itself huge (it is a plain f64, so it is not).
                let re = signed_exp_mul(z.log_mag, z.arg.cos())? + self.pre_shift.re;
                let im_reduced = huge_imag_wrapped(z)? + self.pre_shift.im;
                Ok(ComplexSample::new(
                    lambda.norm().ln() + scale_log + re,
                    lambda.arg() + scale_arg + im_reduced,
                ))
            }
            FunctionKind::Polynomial { coefficients } => {
                let arg = if self.pre_shift == Complex64::ZERO {
                    z
                } else {
                    // |z + shift| via stable log-sum; at this scale the shift
                    // cannot change the value in f64.
                    ComplexSample::new(
                        log_abs_sum(z, ComplexSample::from_complex(self.pre_shift))
                            .unwrap_or(z.log_mag),
                        z.arg,
                    )
                };
                let s = poly_log(coefficients, arg)?;
                Ok(ComplexSample::new(s.log_mag + scale_log, s.arg + scale_arg))
            }
            _ => Err(Error::Unsupported(
                "no extended-range evaluator for this family at |z| beyond f64".into(),
            )),
        }
    }

    // -- logarithmic derivative ----------------------------------------------

    /// f'(z)/f(z) via the closed form of each family.
    pub fn log_derivative(&self, z: Complex64) -> Result<Complex64> {
        let w = z + self.pre_shift;
        match &self.kind {
            FunctionKind::ScaledExp { .. } => Ok(Complex64::ONE),
            FunctionKind::Sin => stable_cot(w),
            FunctionKind::Cos => stable_cot(w - Complex64::new(PI / 2.0, 0.0)),
            FunctionKind::Polynomial { coefficients } => {
                if self.numeric_roots {
                    if let Ok(roots) = polynomial_roots(coefficients) {
                        return zero_sum_log_derivative(&roots, w);
                    }
                }
                let p = horner(coefficients, w);
                if p.norm() < 1e-280 {
                    return Err(Error::NearZeroDivision(format!("|f(z)| = {:.3e}", p.norm())));
                }
                Ok(horner(&derivative_coeffs(coefficients), w) / p)
            }
            FunctionKind::TaylorSeries {
                coefficients,
                validity_radius,
            } => {
                if w.norm() > *validity_radius {
                    return Err(Error::OutOfValidity("series argument out of range".into()));
                }
                let p = series_sum(coefficients, w)?;
                if p.norm() < 1e-280 {
                    return Err(Error::NearZeroDivision(format!("|f(z)| = {:.3e}", p.norm())));
                }
                let dp = series_sum(&derivative_coeffs(coefficients), w)?;
                Ok(dp / p)
            }
        }
    }

    // -- zeros ----------------------------------------------------------------

    /// All zeros with |z| <= r, with multiplicity, sorted by modulus.
    pub fn known_zeros(&self, r: f64) -> Result<Vec<(Complex64, usize)>> {
        if r <= 0.0 {
            return Err(Error::InvalidInput("known_zeros requires r > 0".into()));
        }
        let reach = r + self.pre_shift.norm() + 1.0;
        let mut zeros: Vec<(Complex64, usize)> = match &self.kind {
            FunctionKind::ScaledExp { .. } => Vec::new(),
            FunctionKind::Sin => lattice_zeros(reach, 0.0, self.pre_shift),
            FunctionKind::Cos => lattice_zeros(reach, PI / 2.0, self.pre_shift),
            FunctionKind::Polynomial { coefficients } => polynomial_roots(coefficients)?
                .into_iter()
                .map(|(root, m)| (root - self.pre_shift, m))
                .collect(),
            FunctionKind::TaylorSeries {
                coefficients,
                validity_radius,
            } => {
                if !self.numeric_roots {
                    return Err(Error::Unsupported(
                        "numeric root finding disabled for this series".into(),
                    ));
                }
                let bound = r.min(*validity_radius);
                polynomial_roots(coefficients)?
                    .into_iter()
                    .map(|(root, m)| (root - self.pre_shift, m))
                    .filter(|(z, _)| z.norm() <= bound + 1e-9)
                    .collect()
            }
        };
        zeros.retain(|(z, _)| z.norm() <= r * (1.0 + 1e-12) + 1e-12);
        zeros.sort_by(|a, b| {
            (a.0.norm(), a.0.re, a.0.im)
                .partial_cmp(&(b.0.norm(), b.0.re, b.0.im))
                .unwrap()
        });
        Ok(zeros)
    }

    /// Number of zeros with |z| <= r, counted with multiplicity.
    pub fn zero_count(&self, r: f64) -> Result<usize> {
        Ok(self.known_zeros(r)?.iter().map(|(_, m)| m).sum())
    }

    // -- closed forms for oracles ---------------------------------------------

    /// Exact log max modulus on |z| = r, when the family admits one.
    pub fn closed_form_log_max(&self, r: f64) -> Option<f64> {
        let a = self.affine_log_const();
        match &self.kind {
            FunctionKind::ScaledExp { .. } => Some(a + r),
            FunctionKind::Sin if self.pre_shift == Complex64::ZERO => {
                Some(self.post_scale.norm().ln() + log_sinh(r))
            }
            FunctionKind::Cos if self.pre_shift == Complex64::ZERO => {
                Some(self.post_scale.norm().ln() + log_cosh(r))
            }
            FunctionKind::Polynomial { coefficients }
                if self.pre_shift == Complex64::ZERO && monomial_degree(coefficients).is_some() =>
            {
                let d = monomial_degree(coefficients).unwrap();
                Some(
                    self.post_scale.norm().ln()
                        + coefficients[d].norm().ln()
                        + d as f64 * r.ln(),
                )
            }
            _ => None,
        }
    }

    /// Exact log min modulus on |z| = r, when the family admits one.
    pub fn closed_form_log_min(&self, r: f64) -> Option<f64> {
        let a = self.affine_log_const();
        match &self.kind {
            FunctionKind::ScaledExp { .. } => Some(a - r),
            FunctionKind::Polynomial { coefficients }
                if self.pre_shift == Complex64::ZERO && monomial_degree(coefficients).is_some() =>
            {
                self.closed_form_log_max(r)
            }
            _ => None,
        }
    }

    /// Exact Nevanlinna characteristic, when the family admits one.
    pub fn closed_form_characteristic(&self, r: f64) -> Option<f64> {
        match &self.kind {
            FunctionKind::ScaledExp { .. } => {
                let a = self.affine_log_const();
                // (1/2pi) \int max(a + r cos t, 0) dt
                if a >= r {
                    Some(a)
                } else if a <= -r {
                    Some(0.0)
                } else {
                    let t = (-a / r).acos();
                    Some((a * t + r * t.sin()) / PI)
                }
            }
            FunctionKind::Polynomial { coefficients }
                if self.pre_shift == Complex64::ZERO && monomial_degree(coefficients).is_some() =>
            {
                Some(self.closed_form_log_max(r).unwrap().max(0.0))
            }
            _ => None,
        }
    }

    /// ln |post_scale * lambda * e^{shift}|-style constant for ScaledExp.
    fn affine_log_const(&self) -> f64 {
        match &self.kind {
            FunctionKind::ScaledExp { lambda } => {
                self.post_scale.norm().ln() + lambda.norm().ln() + self.pre_shift.re
            }
            _ => self.post_scale.norm().ln(),
        }
    }

    /// True when the family has closed-form log evaluation at any radius.
    pub fn supports_huge_radius(&self) -> bool {
        matches!(
            self.kind,
            FunctionKind::ScaledExp { .. } | FunctionKind::Polynomial { .. }
        )
    }
}

// ---------------------------------------------------------------------------
// helpers
// ---------------------------------------------------------------------------

fn horner(coefficients: &[Complex64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::ZERO;
    for &c in coefficients.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

fn derivative_coeffs(coefficients: &[Complex64]) -> Vec<Complex64> {
    coefficients
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| c * k as f64)
        .collect()
}

/// Term-by-term series sum with the tail-bound validity check.
fn series_sum(coefficients: &[Complex64], z: Complex64) -> Result<Complex64> {
    let mut sum = Complex64::ZERO;
    let mut term = Complex64::ONE;
    let mut last_mag = 0.0f64;
    for (k, &c) in coefficients.iter().enumerate() {
        if k > 0 {
            term *= z;
        }
        let contrib = c * term;
        last_mag = contrib.norm();
        sum += contrib;
        if !sum.re.is_finite() || !sum.im.is_finite() {
            return Err(Error::Overflow("series sum exceeded f64 range".into()));
        }
    }
    if last_mag > SERIES_TAIL_REL * sum.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::OutOfValidity(format!(
            "series tail estimate {:.3e} above {:.0e} of |sum| = {:.3e}",
            last_mag,
            SERIES_TAIL_REL,
            sum.norm()
        )));
    }
    Ok(sum)
}

/// sign * e^t * c without intermediate overflow surprises; errors when the
/// product genuinely exceeds f64 range.
fn signed_exp_mul(log_mag: f64, factor: f64) -> Result<f64> {
    if factor == 0.0 {
        return Ok(0.0);
    }
    let t = log_mag + factor.abs().ln();
    if t > f64::MAX.ln() {
        return Err(Error::Overflow(format!(
            "|z| * |trig(arg)| has log {t:.6e}"
        )));
    }
    Ok(factor.signum() * t.exp())
}

/// Im(z) mod 2pi for a huge log-polar argument. Precision is lost once
/// |z| sin(arg) exceeds 2^52, so the reduced angle is best-effort; callers
/// in that regime only use it through closed forms that tolerate it.
fn huge_imag_wrapped(z: ComplexSample) -> Result<f64> {
    let im = signed_exp_mul(z.log_mag, z.arg.sin())?;
    Ok(wrap_angle(im % std::f64::consts::TAU))
}

/// log|sin w| and arg sin w, stable for large |Im w|.
fn log_sin(w: Complex64) -> Result<(f64, f64)> {
    let y = w.im;
    if y.abs() <= TRIG_ASYMPTOTIC_IM {
        let v = w.sin();
        let n = v.norm();
        if n == 0.0 {
            return Err(Error::NearZeroDivision("sin(z) = 0".into()));
        }
        return Ok((n.ln(), v.arg()));
    }
    // sin w = (i/2) e^{-iw} (1 - e^{2iw})   for Im w > 0
    //       = (-i/2) e^{iw} (1 - e^{-2iw})  for Im w < 0
    let (lead_log, lead_arg, q) = if y > 0.0 {
        ((-Complex64::I * w).re, (-Complex64::I * w).im + PI / 2.0, (Complex64::I * w * 2.0).exp())
    } else {
        ((Complex64::I * w).re, (Complex64::I * w).im - PI / 2.0, (-Complex64::I * w * 2.0).exp())
    };
    let corr = Complex64::ONE - q;
    Ok((
        lead_log - std::f64::consts::LN_2 + corr.norm().ln(),
        lead_arg + corr.arg(),
    ))
}

/// log|cos w| and arg cos w, stable for large |Im w|.
fn log_cos(w: Complex64) -> Result<(f64, f64)> {
    let y = w.im;
    if y.abs() <= TRIG_ASYMPTOTIC_IM {
        let v = w.cos();
        let n = v.norm();
        if n == 0.0 {
            return Err(Error::NearZeroDivision("cos(z) = 0".into()));
        }
        return Ok((n.ln(), v.arg()));
    }
    // cos w = (1/2) e^{-iw} (1 + e^{2iw})  for Im w > 0, symmetric otherwise
    let (lead_log, lead_arg, q) = if y > 0.0 {
        ((-Complex64::I * w).re, (-Complex64::I * w).im, (Complex64::I * w * 2.0).exp())
    } else {
        ((Complex64::I * w).re, (Complex64::I * w).im, (-Complex64::I * w * 2.0).exp())
    };
    let corr = Complex64::ONE + q;
    Ok((
        lead_log - std::f64::consts::LN_2 + corr.norm().ln(),
        lead_arg + corr.arg(),
    ))
}

/// cot w, stable for large |Im w|.
fn stable_cot(w: Complex64) -> Result<Complex64> {
    let y = w.im;
    if y.abs() <= TRIG_ASYMPTOTIC_IM {
        let s = w.sin();
        if s.norm() < 1e-280 {
            return Err(Error::NearZeroDivision(format!(
                "|sin| = {:.3e} at the cotangent pole",
                s.norm()
            )));
        }
        return Ok(w.cos() / s);
    }
    if y > 0.0 {
        let q = (Complex64::I * w * 2.0).exp(); // |q| = e^{-2y} tiny
        Ok(-Complex64::I * (Complex64::ONE + q) / (Complex64::ONE - q))
    } else {
        let q = (-Complex64::I * w * 2.0).exp();
        Ok(Complex64::I * (Complex64::ONE + q) / (Complex64::ONE - q))
    }
}

/// log-polar value of a polynomial at a (possibly huge) log-polar argument,
/// via the leading term plus a convergent correction series.
fn poly_log(coefficients: &[Complex64], z: ComplexSample) -> Result<ComplexSample> {
    let d = coefficients
        .iter()
        .rposition(|c| c.norm() > 0.0)
        .ok_or_else(|| Error::InvalidInput("zero polynomial".into()))?;
    if d == 0 {
        return Ok(ComplexSample::from_complex(coefficients[0]));
    }
    let lead = coefficients[d];
    // correction = sum_{j<d} (a_j / a_d) z^{j-d}; |z| > 1 makes this tiny.
    let mut corr = Complex64::ZERO;
    for (j, &c) in coefficients.iter().enumerate().take(d) {
        if c.norm() == 0.0 {
            continue;
        }
        let rel = c / lead;
        let power_log = (j as f64 - d as f64) * z.log_mag;
        if power_log < -745.0 {
            continue;
        }
        if power_log > MAX_PLAIN_LOG {
            return Err(Error::Overflow("polynomial correction overflow".into()));
        }
        let p = Complex64::from_polar(power_log.exp(), (j as f64 - d as f64) * z.arg);
        corr += rel * p;
    }
    if corr.norm() >= 0.5 {
        // not in the asymptotic regime: fall back to plain evaluation
        let zc = z.to_complex()?;
        let v = horner(coefficients, zc);
        if v.norm() == 0.0 {
            return Ok(ComplexSample::zero());
        }
        if v.re.is_finite() && v.im.is_finite() {
            return Ok(ComplexSample::from_complex(v));
        }
        return Err(Error::Overflow("polynomial evaluation overflow".into()));
    }
    let one_plus = Complex64::ONE + corr;
    let log_mag = lead.norm().ln() + d as f64 * z.log_mag + one_plus.norm().ln();
    if !log_mag.is_finite() {
        return Err(Error::Overflow("polynomial log modulus overflow".into()));
    }
    Ok(ComplexSample::new(
        log_mag,
        lead.arg() + d as f64 * z.arg + one_plus.arg(),
    ))
}

fn monomial_degree(coefficients: &[Complex64]) -> Option<usize> {
    let nonzero: Vec<usize> = coefficients
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm() > 0.0)
        .map(|(i, _)| i)
        .collect();
    (nonzero.len() == 1).then(|| nonzero[0])
}

fn log_sinh(r: f64) -> f64 {
    if r > 20.0 {
        r - std::f64::consts::LN_2 + (1.0 - (-2.0 * r).exp()).ln()
    } else {
        r.sinh().ln()
    }
}

fn log_cosh(r: f64) -> f64 {
    if r > 20.0 {
        r - std::f64::consts::LN_2 + (1.0 + (-2.0 * r).exp()).ln()
    } else {
        r.cosh().ln()
    }
}

fn lattice_zeros(reach: f64, offset: f64, shift: Complex64) -> Vec<(Complex64, usize)> {
    let kmax = ((reach + offset.abs()) / PI).ceil() as i64 + 1;
    (-kmax..=kmax)
        .map(|k| (Complex64::new(k as f64 * PI + offset, 0.0) - shift, 1))
        .collect()
}

fn zero_sum_log_derivative(roots: &[(Complex64, usize)], w: Complex64) -> Result<Complex64> {
    let mut sum = Complex64::ZERO;
    for (root, m) in roots {
        let d = w - root;
        if d.norm() < 1e-280 {
            return Err(Error::NearZeroDivision(format!(
                "z within {:.3e} of a zero",
                d.norm()
            )));
        }
        sum += Complex64::new(*m as f64, 0.0) / d;
    }
    Ok(sum)
}

// ---------------------------------------------------------------------------
// polynomial roots (Durand-Kerner with origin stripping and clustering)
// ---------------------------------------------------------------------------

/// Roots of a polynomial with multiplicities, ascending-degree coefficients.
pub fn polynomial_roots(coefficients: &[Complex64]) -> Result<Vec<(Complex64, usize)>> {
    let scale = coefficients
        .iter()
        .map(|c| c.norm())
        .fold(0.0f64, f64::max);
    if scale == 0.0 {
        return Err(Error::InvalidInput("zero polynomial has no root set".into()));
    }
    let tol = 1e-12 * scale;
    let deg_top = coefficients
        .iter()
        .rposition(|c| c.norm() > tol)
        .unwrap_or(0);
    if deg_top == 0 {
        return Ok(Vec::new());
    }
    let m0 = coefficients[..deg_top]
        .iter()
        .position(|c| c.norm() > tol)
        .unwrap_or(deg_top);
    let mut out: Vec<(Complex64, usize)> = Vec::new();
    if m0 > 0 {
        out.push((Complex64::ZERO, m0));
    }
    let reduced: Vec<Complex64> = coefficients[m0..=deg_top].to_vec();
    let d = reduced.len() - 1;
    if d > 0 {
        let monic: Vec<Complex64> = reduced.iter().map(|c| c / reduced[d]).collect();
        let bound = 1.0 + monic[..d].iter().map(|c| c.norm()).fold(0.0f64, f64::max);
        let seed = Complex64::new(0.4, 0.9);
        let mut roots: Vec<Complex64> = (0..d)
            .map(|k| seed.powu(k as u32 + 1) * bound)
            .collect();
        for _ in 0..600 {
            let mut max_step = 0.0f64;
            for k in 0..d {
                let pv = horner(&monic, roots[k]);
                let mut denom = Complex64::ONE;
                for j in 0..d {
                    if j != k {
                        denom *= roots[k] - roots[j];
                    }
                }
                if denom.norm() == 0.0 {
                    roots[k] += Complex64::new(1e-8 * bound, 1e-8 * bound);
                    max_step = f64::MAX;
                    continue;
                }
                let step = pv / denom;
                roots[k] -= step;
                max_step = max_step.max(step.norm());
            }
            if max_step < 1e-14 * bound.max(1.0) {
                break;
            }
        }
        // cluster nearby roots into multiple roots
        let cluster_tol = 1e-6 * bound.max(1.0);
        let mut used = vec![false; d];
        for k in 0..d {
            if used[k] {
                continue;
            }
            let mut members = vec![k];
            used[k] = true;
            for j in k + 1..d {
                if !used[j] && (roots[j] - roots[k]).norm() < cluster_tol {
                    used[j] = true;
                    members.push(j);
                }
            }
            let centroid = members.iter().map(|&i| roots[i]).sum::<Complex64>()
                / members.len() as f64;
            out.push((centroid, members.len()));
        }
    }
    out.sort_by(|a, b| {
        (a.0.norm(), a.0.re, a.0.im)
            .partial_cmp(&(b.0.norm(), b.0.re, b.0.im))
            .unwrap()
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exp_at_zero_is_one() {
        let f = FunctionSpec::exp();
        let v = f.evaluate(Complex64::ZERO).unwrap();
        assert_relative_eq!(v.re, 1.0, max_relative = 1e-15);
        assert_relative_eq!(v.im, 0.0);
    }

    #[test]
    fn cubic_minus_one_at_two() {
        let f = FunctionSpec::polynomial_real(&[-1.0, 0.0, 0.0, 1.0]);
        let v = f.evaluate(Complex64::new(2.0, 0.0)).unwrap();
        assert_relative_eq!(v.re, 7.0, max_relative = 1e-14);
        assert_relative_eq!(v.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn sin_at_i_is_i_sinh_one() {
        let f = FunctionSpec::sin();
        let v = f.evaluate(Complex64::I).unwrap();
        assert_relative_eq!(v.im, 1.0f64.sinh(), max_relative = 1e-12);
        assert_relative_eq!(v.im, 1.1752011936438014, max_relative = 1e-12);
        assert!(v.re.abs() < 1e-15);
    }

    #[test]
    fn evaluate_log_exp_large_real() {
        let f = FunctionSpec::exp();
        let s = f
            .evaluate_log(ComplexSample::new(100.0f64.ln(), 0.0))
            .unwrap();
        assert_relative_eq!(s.log_mag, 100.0, max_relative = 1e-12);
        assert_relative_eq!(s.arg, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn evaluate_log_exp_where_plain_overflows() {
        let f = FunctionSpec::exp();
        assert!(matches!(
            f.evaluate(Complex64::new(1000.0, 0.0)),
            Err(Error::Overflow(_))
        ));
        let s = f
            .evaluate_log(ComplexSample::new(1000.0f64.ln(), 0.0))
            .unwrap();
        assert_relative_eq!(s.log_mag, 1000.0, max_relative = 1e-12);
    }

    #[test]
    fn evaluate_log_monomial_doubles() {
        let f = FunctionSpec::polynomial_real(&[0.0, 0.0, 1.0]);
        let s = f.evaluate_log(ComplexSample::new(37.5, 0.7)).unwrap();
        assert_relative_eq!(s.log_mag, 75.0, max_relative = 1e-12);
        assert_relative_eq!(s.arg, 1.4, max_relative = 1e-12);
    }

    #[test]
    fn evaluate_log_agrees_with_plain_log() {
        let specs = [
            FunctionSpec::exp(),
            FunctionSpec::sin(),
            FunctionSpec::cos(),
            FunctionSpec::polynomial_real(&[-1.0, 0.0, 0.0, 1.0]),
        ];
        for f in &specs {
            for k in 0..200 {
                let t = k as f64 * 0.1 - 10.0;
                let z = Complex64::new(t.cos() * (1.0 + t.abs()), t.sin() * 3.0);
                let plain = match f.evaluate(z) {
                    Ok(v) if v.norm() > 0.0 => v,
                    _ => continue,
                };
                let s = f.evaluate_log(ComplexSample::from_complex(z)).unwrap();
                assert_relative_eq!(s.log_mag, plain.norm().ln(), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn log_derivative_closed_forms() {
        let f = FunctionSpec::scaled_exp(Complex64::new(0.25, 0.0));
        let v = f.log_derivative(Complex64::new(3.0, 2.0)).unwrap();
        assert_relative_eq!(v.re, 1.0, max_relative = 1e-15);
        assert_relative_eq!(v.im, 0.0);

        let cubic = FunctionSpec::polynomial_real(&[0.0, 0.0, 0.0, 1.0]);
        let v = cubic.log_derivative(Complex64::new(2.0, 0.0)).unwrap();
        assert_relative_eq!(v.re, 1.5, max_relative = 1e-9);
        assert!(v.im.abs() < 1e-10);

        let s = FunctionSpec::sin();
        let v = s.log_derivative(Complex64::new(PI / 2.0, 0.0)).unwrap();
        assert!(v.norm() < 1e-12);
    }

    #[test]
    fn known_zeros_of_sin_within_ten() {
        let f = FunctionSpec::sin();
        let zs = f.known_zeros(10.0).unwrap();
        assert_eq!(zs.len(), 7);
        let expected: Vec<f64> = vec![0.0, -PI, PI, -2.0 * PI, 2.0 * PI, -3.0 * PI, 3.0 * PI];
        for ((z, m), e) in zs.iter().zip(expected) {
            assert_eq!(*m, 1);
            assert_relative_eq!(z.re, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn exp_has_no_zeros() {
        let f = FunctionSpec::exp();
        assert!(f.known_zeros(1e6).unwrap().is_empty());
    }

    #[test]
    fn cube_roots_of_unity() {
        let f = FunctionSpec::polynomial_real(&[-1.0, 0.0, 0.0, 1.0]);
        let zs = f.known_zeros(2.0).unwrap();
        assert_eq!(zs.len(), 3);
        for (z, m) in zs {
            assert_eq!(m, 1);
            assert_relative_eq!(z.norm(), 1.0, max_relative = 1e-10);
            let v = f.evaluate(z).unwrap();
            assert!(v.norm() < 1e-9);
        }
    }

    #[test]
    fn triple_root_at_origin() {
        let f = FunctionSpec::polynomial_real(&[0.0, 0.0, 0.0, 1.0]);
        let zs = f.known_zeros(2.0).unwrap();
        assert_eq!(zs, vec![(Complex64::ZERO, 3)]);
    }

    #[test]
    fn taylor_tail_bound_enforced() {
        // exp truncated to 8 terms is far from converged at |z| = 20
        let f = FunctionSpec::taylor_exp(8, 50.0);
        assert!(matches!(
            f.evaluate(Complex64::new(20.0, 0.0)),
            Err(Error::OutOfValidity(_))
        ));
        // 40 terms at |z| = 5 is fine
        let g = FunctionSpec::taylor_exp(40, 50.0);
        let v = g.evaluate(Complex64::new(5.0, 0.0)).unwrap();
        assert_relative_eq!(v.re, 5.0f64.exp(), max_relative = 1e-12);
    }

    #[test]
    fn taylor_out_of_radius() {
        let f = FunctionSpec::taylor_exp(40, 6.0);
        assert!(matches!(
            f.evaluate(Complex64::new(7.0, 0.0)),
            Err(Error::OutOfValidity(_))
        ));
    }

    #[test]
    fn shifted_sin_normalizes_to_one_at_origin() {
        let f = FunctionSpec::sin()
            .with_shift(Complex64::ONE)
            .with_scale(Complex64::new(1.0 / 1.0f64.sin(), 0.0));
        let v = f.evaluate(Complex64::ZERO).unwrap();
        assert_relative_eq!(v.re, 1.0, max_relative = 1e-14);
        // zeros sit at k pi - 1
        let zs = f.known_zeros(10.0).unwrap();
        assert_eq!(zs.len(), 6);
        for (z, _) in zs {
            let v = f.evaluate(z).unwrap();
            assert!(v.norm() < 1e-9);
        }
    }

    #[test]
    fn normalization_error_for_zero_at_origin() {
        let f = FunctionSpec::polynomial_real(&[0.0, 0.0, 0.0, 1.0]);
        assert!(matches!(
            f.normalized(),
            Err(Error::NormalizationError(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        let f = FunctionSpec::scaled_exp(Complex64::new(0.25, 0.0));
        let text = f.to_json();
        let back = FunctionSpec::from_json(&text).unwrap();
        assert_eq!(f, back);

        let doc = r#"{"kind":"polynomial","params":{"coefficients":[{"re":-1.0,"im":0.0},{"re":0.0,"im":0.0},{"re":0.0,"im":0.0},{"re":1.0,"im":0.0}]}}"#;
        let p = FunctionSpec::from_json(doc).unwrap();
        assert_eq!(
            p.evaluate(Complex64::new(2.0, 0.0)).unwrap().re,
            7.0
        );
    }

    #[test]
    fn stable_cot_matches_plain_in_overlap() {
        for y in [-19.0, -5.0, 1.0, 19.0, 25.0, 200.0] {
            let w = Complex64::new(0.7, y);
            let stable = stable_cot(w).unwrap();
            if y.abs() < 300.0 {
                let direct = w.cos() / w.sin();
                assert_relative_eq!(stable.re, direct.re, epsilon = 1e-10);
                assert_relative_eq!(stable.im, direct.im, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn log_sin_matches_plain_in_overlap() {
        for y in [5.0, 19.9, 20.1, 100.0] {
            let w = Complex64::new(1.3, y);
            let (lm, ar) = log_sin(w).unwrap();
            let direct = w.sin();
            assert_relative_eq!(lm, direct.norm().ln(), epsilon = 1e-10);
            assert_relative_eq!(
                wrap_angle(ar - direct.arg()),
                0.0,
                epsilon = 1e-10
            );
        }
    }
}
