//! Circle quantities: max/min modulus, Nevanlinna characteristic,
//! argument-principle zero counting and the first-fundamental-theorem
//! consistency check. All moduli are carried as natural logs so radii far
//! beyond f64 value range still profile correctly.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::complex_ext::ComplexSample;
use crate::error::{Error, Result};
use crate::function::FunctionSpec;

/// Largest log-modulus still representable as a plain f64 value.
const PLAIN_VALUE_LOG: f64 = 709.0;
/// Golden-section refinement iterations (interval shrinks by 0.618 each).
const GOLDEN_ITERS: usize = 80;
/// Hard cap on adaptive quadrature refinement.
const MAX_QUAD_POINTS: usize = 1 << 21;

/// One row of a radius scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadiusProfile {
    pub r: f64,
    /// ln M(r); `M(r)` itself may overflow f64.
    pub log_max: f64,
    /// ln L(r); 0 modulus is represented by -inf here (flagged in CSV).
    pub log_min: f64,
    /// Nevanlinna characteristic T(r) in nats.
    pub characteristic: f64,
    /// Zeros in the closed disk of radius r, with multiplicity.
    pub zero_count: usize,
    /// Integrated counting function N(r, 0).
    pub integrated_count: f64,
    pub samples_per_circle: usize,
    pub refined: bool,
}

impl RadiusProfile {
    pub fn max_overflows(&self) -> bool {
        self.log_max > PLAIN_VALUE_LOG
    }
    pub fn min_underflows(&self) -> bool {
        !self.log_min.is_finite() || self.log_min < -PLAIN_VALUE_LOG
    }
}

/// Extremum of log |f| over a circle.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CircleExtremum {
    /// ln of the extremal modulus.
    pub log_value: f64,
    /// Angle attaining it.
    pub theta: f64,
    /// True when the plain value exceeds f64 range (log-domain only).
    pub log_domain: bool,
}

impl CircleExtremum {
    /// The plain value, when representable.
    pub fn value(&self) -> Option<f64> {
        (!self.log_domain).then(|| self.log_value.exp())
    }
}

fn log_abs_at(f: &FunctionSpec, r: f64, theta: f64) -> Result<f64> {
    let s = f.evaluate_log(ComplexSample::new(r.ln(), theta))?;
    if s.is_zero {
        Ok(f64::NEG_INFINITY)
    } else {
        Ok(s.log_mag)
    }
}

fn circle_extremum(
    f: &FunctionSpec,
    r: f64,
    resolution: usize,
    maximize: bool,
) -> Result<CircleExtremum> {
    if r <= 0.0 {
        return Err(Error::InvalidInput("circle radius must be positive".into()));
    }
    if resolution < 64 {
        return Err(Error::InvalidInput(
            "circle sweep needs resolution >= 64".into(),
        ));
    }
    let sign = if maximize { 1.0 } else { -1.0 };
    let vals: Vec<Result<f64>> = (0..resolution)
        .into_par_iter()
        .map(|k| {
            let theta = -PI + TAU * k as f64 / resolution as f64;
            log_abs_at(f, r, theta).map(|v| sign * v)
        })
        .collect();
    let mut samples = Vec::with_capacity(resolution);
    for (k, v) in vals.into_iter().enumerate() {
        samples.push((k, v?));
    }
    // best three local starting points, refined by golden section
    let mut order: Vec<usize> = (0..resolution).collect();
    order.sort_by(|&a, &b| samples[b].1.partial_cmp(&samples[a].1).unwrap());
    let step = TAU / resolution as f64;
    let mut best = f64::NEG_INFINITY;
    let mut best_theta = 0.0;
    for &k in order.iter().take(3) {
        let center = -PI + step * k as f64;
        let (theta, v) = golden_section(
            |t| log_abs_at(f, r, t).map(|x| sign * x),
            center - step,
            center + step,
        )?;
        if v > best {
            best = v;
            best_theta = theta;
        }
    }
    let log_value = sign * best;
    Ok(CircleExtremum {
        log_value,
        theta: best_theta,
        log_domain: log_value > PLAIN_VALUE_LOG,
    })
}

fn golden_section<F: Fn(f64) -> Result<f64>>(f: F, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..GOLDEN_ITERS {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d)?;
        }
    }
    let mid = 0.5 * (a + b);
    Ok((mid, f(mid)?))
}

/// max_{|z|=r} |f(z)| as a circle extremum (log-carried).
pub fn max_modulus(f: &FunctionSpec, r: f64, resolution: usize) -> Result<CircleExtremum> {
    circle_extremum(f, r, resolution, true)
}

/// min_{|z|=r} |f(z)| as a circle extremum (log-carried).
pub fn min_modulus(f: &FunctionSpec, r: f64, resolution: usize) -> Result<CircleExtremum> {
    circle_extremum(f, r, resolution, false)
}

/// Trapezoidal circle average of a log-integrand with adaptive doubling.
/// `g(theta)` must be 2pi-periodic; convergence is relative 1e-8.
fn adaptive_circle_mean<G: Fn(f64) -> Result<f64> + Sync>(
    g: G,
    start_points: usize,
) -> Result<f64> {
    let mut n = start_points.next_power_of_two().max(256);
    // uniform grid on [0, 2pi): trapezoid equals the plain mean by periodicity
    let eval_mean = |n: usize| -> Result<f64> {
        let terms: Vec<Result<f64>> = (0..n)
            .into_par_iter()
            .map(|k| g(TAU * k as f64 / n as f64))
            .collect();
        let mut sum = 0.0;
        for t in terms {
            sum += t?;
        }
        Ok(sum / n as f64)
    };
    let mut prev = eval_mean(n)?;
    let mut refinements = 0;
    loop {
        n *= 2;
        if n > MAX_QUAD_POINTS {
            return Err(Error::NonConvergence(refinements));
        }
        let cur = eval_mean(n)?;
        let scale = cur.abs().max(1e-12);
        if (cur - prev).abs() <= 1e-8 * scale {
            return Ok(cur);
        }
        prev = cur;
        refinements += 1;
    }
}

/// Nevanlinna characteristic T(r, f) = circle mean of log+ |f| (entire f).
pub fn characteristic(f: &FunctionSpec, r: f64, quadrature_points: usize) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::InvalidInput("characteristic requires r > 0".into()));
    }
    let pts = quadrature_points.max(256);
    adaptive_circle_mean(
        |theta| {
            let v = log_abs_at(f, r, theta)?;
            Ok(v.max(0.0))
        },
        pts,
    )
}

/// Proximity function m(r, 1/f) = circle mean of log+ (1/|f|).
pub fn proximity_inverse(f: &FunctionSpec, r: f64, quadrature_points: usize) -> Result<f64> {
    adaptive_circle_mean(
        |theta| {
            let v = log_abs_at(f, r, theta)?;
            Ok((-v).max(0.0))
        },
        quadrature_points.max(256),
    )
}

/// Zero count inside |z| <= r by the argument principle: the contour
/// integral of f'/f, rounded to the nearest integer.
pub fn count_zeros(f: &FunctionSpec, r: f64) -> Result<usize> {
    // precondition: no zero within 1e-6 r of the contour
    if let Ok(zeros) = f.known_zeros(2.0 * r) {
        for (z, _) in &zeros {
            let dist = (z.norm() - r).abs();
            if dist < 1e-6 * r {
                return Err(Error::ZeroOnContour { radius: r, dist });
            }
        }
    }
    let integrand = |theta: f64| -> Result<f64> {
        let z = Complex64::from_polar(r, theta);
        let ld = f.log_derivative(z)?;
        Ok((z * ld).re)
    };
    let mut n = 256usize;
    let mut prev = f64::NAN;
    loop {
        let terms: Vec<Result<f64>> = (0..n)
            .into_par_iter()
            .map(|k| integrand(TAU * k as f64 / n as f64))
            .collect();
        let mut sum = 0.0;
        for t in terms {
            sum += t?;
        }
        let raw = sum / n as f64;
        if (raw - prev).abs() < 1e-3 {
            let nearest = raw.round();
            if (raw - nearest).abs() > 0.1 {
                return Err(Error::NonIntegerResidue(raw));
            }
            if nearest < -0.5 {
                return Err(Error::NonIntegerResidue(raw));
            }
            return Ok(nearest as usize);
        }
        prev = raw;
        n *= 2;
        if n > MAX_QUAD_POINTS {
            return Err(Error::NonConvergence(n.trailing_zeros() as usize));
        }
    }
}

/// N(r, 0) from the known zeros: sum of mult * ln(r/|z_j|) over 0 < |z_j| <= r,
/// plus n(0) ln r for zeros at the origin.
pub fn integrated_counting(f: &FunctionSpec, r: f64) -> Result<f64> {
    let zeros = f.known_zeros(r)?;
    let mut acc = 0.0;
    for (z, m) in zeros {
        let n = z.norm();
        if n == 0.0 {
            acc += m as f64 * r.ln();
        } else {
            acc += m as f64 * (r / n).ln();
        }
    }
    Ok(acc)
}

/// Outcome of the first-fundamental-theorem consistency check at radius r.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityReport {
    pub r: f64,
    pub characteristic: f64,
    pub integrated_count: f64,
    pub proximity_inverse: f64,
    /// |T(r) - N(r,0) - m(r,1/f)|
    pub residual: f64,
    pub tolerance: f64,
    pub residual_ok: bool,
    /// T(r) <= log+ M(r)
    pub lower_2a_ok: bool,
    /// log+ M(r) <= 3 T(2r)
    pub upper_2a_ok: bool,
}

/// Check T(r) = N(r,0) + m(r,1/f) + O(1) for a normalized function and the
/// two-sided characteristic/max-modulus comparison at R = 2r.
pub fn nevanlinna_identity_check(f: &FunctionSpec, r: f64) -> Result<IdentityReport> {
    if r <= 1.0 {
        return Err(Error::InvalidInput("identity check requires r > 1".into()));
    }
    let g = f.normalized()?;
    let t_r = characteristic(&g, r, 512)?;
    let n_r = integrated_counting(&g, r)?;
    let m_inv = proximity_inverse(&g, r, 512)?;
    let residual = (t_r - n_r - m_inv).abs();
    let tolerance = 1.0;
    let log_max_r = max_modulus(&g, r, 1024)?.log_value;
    let t_2r = characteristic(&g, 2.0 * r, 512)?;
    let slack = 1e-9 * t_r.abs().max(1.0);
    Ok(IdentityReport {
        r,
        characteristic: t_r,
        integrated_count: n_r,
        proximity_inverse: m_inv,
        residual,
        tolerance,
        residual_ok: residual <= tolerance,
        lower_2a_ok: t_r <= log_max_r.max(0.0) + slack,
        upper_2a_ok: log_max_r.max(0.0) <= 3.0 * t_2r + slack,
    })
}

/// Full profile at one radius.
pub fn profile_at(f: &FunctionSpec, r: f64, resolution: usize) -> Result<RadiusProfile> {
    let max = max_modulus(f, r, resolution)?;
    let min = min_modulus(f, r, resolution)?;
    let t = characteristic(f, r, resolution.max(256))?;
    let zeros = f.known_zeros(r)?;
    let zero_count = zeros.iter().map(|(_, m)| m).sum();
    let integrated = integrated_counting(f, r)?;
    let slack = 1e-9 * t.abs().max(1.0);
    if min.log_value > max.log_value + 1e-9 {
        return Err(Error::InvalidInput(format!(
            "min modulus exceeds max modulus at r = {r}"
        )));
    }
    if t > max.log_value.max(0.0) + slack {
        return Err(Error::InvalidInput(format!(
            "characteristic {t} above log+ max modulus {} at r = {r}",
            max.log_value
        )));
    }
    Ok(RadiusProfile {
        r,
        log_max: max.log_value,
        log_min: min.log_value,
        characteristic: t,
        zero_count,
        integrated_count: integrated,
        samples_per_circle: resolution,
        refined: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::FunctionSpec;
    use approx::assert_relative_eq;

    #[test]
    fn exp_extrema_closed_form() {
        let f = FunctionSpec::exp();
        for r in [1.0, 10.0] {
            let m = max_modulus(&f, r, 256).unwrap();
            assert_relative_eq!(m.log_value, r, max_relative = 1e-10);
            assert_relative_eq!(m.value().unwrap(), r.exp(), max_relative = 1e-9);
            let l = min_modulus(&f, r, 256).unwrap();
            assert_relative_eq!(l.log_value, -r, max_relative = 1e-10);
        }
    }

    #[test]
    fn exp_max_at_r_ten_value() {
        let f = FunctionSpec::exp();
        let m = max_modulus(&f, 10.0, 1024).unwrap();
        assert_relative_eq!(m.value().unwrap(), 22026.465794806718, max_relative = 1e-9);
    }

    #[test]
    fn sin_max_is_sinh() {
        let f = FunctionSpec::sin();
        let m = max_modulus(&f, 2.0, 256).unwrap();
        assert_relative_eq!(m.value().unwrap(), 2.0f64.sinh(), max_relative = 1e-9);
        assert_relative_eq!(m.value().unwrap(), 3.626860407847019, max_relative = 1e-9);
    }

    #[test]
    fn sin_min_on_circle_through_zero() {
        let f = FunctionSpec::sin();
        let l = min_modulus(&f, PI, 512).unwrap();
        assert!(l.value().unwrap() < 1e-9);
    }

    #[test]
    fn cubic_min_modulus_at_two() {
        let f = FunctionSpec::polynomial_real(&[-1.0, 0.0, 0.0, 1.0]);
        let l = min_modulus(&f, 2.0, 256).unwrap();
        assert_relative_eq!(l.value().unwrap(), 7.0, max_relative = 1e-9);
        let m = max_modulus(&f, 2.0, 256).unwrap();
        assert_relative_eq!(m.value().unwrap(), 9.0, max_relative = 1e-9);
    }

    #[test]
    fn characteristic_of_exp() {
        let f = FunctionSpec::exp();
        let t = characteristic(&f, 10.0, 256).unwrap();
        assert_relative_eq!(t, 10.0 / PI, max_relative = 1e-7);
    }

    #[test]
    fn characteristic_of_monomials() {
        let cubic = FunctionSpec::polynomial_real(&[0.0, 0.0, 0.0, 1.0]);
        let t = characteristic(&cubic, std::f64::consts::E, 256).unwrap();
        assert_relative_eq!(t, 3.0, max_relative = 1e-8);
        let small = FunctionSpec::polynomial_real(&[0.0, 0.1]);
        let t = characteristic(&small, 1.0, 256).unwrap();
        assert_relative_eq!(t, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn count_zeros_examples() {
        assert_eq!(count_zeros(&FunctionSpec::sin(), 10.0).unwrap(), 7);
        assert_eq!(count_zeros(&FunctionSpec::exp(), 100.0).unwrap(), 0);
        assert_eq!(
            count_zeros(&FunctionSpec::polynomial_real(&[-1.0, 0.0, 0.0, 1.0]), 2.0).unwrap(),
            3
        );
    }

    #[test]
    fn count_zeros_rejects_contour_zero() {
        let err = count_zeros(&FunctionSpec::sin(), PI).unwrap_err();
        assert!(matches!(err, Error::ZeroOnContour { .. }));
    }

    #[test]
    fn count_zeros_monotone_in_r_for_sin() {
        let f = FunctionSpec::sin();
        let mut prev = 0;
        for r in [1.0, 2.0, 4.0, 7.0, 10.0, 12.0] {
            let n = count_zeros(&f, r).unwrap();
            assert!(n >= prev);
            prev = n;
        }
    }

    #[test]
    fn identity_check_exp() {
        let rep = nevanlinna_identity_check(&FunctionSpec::exp(), 20.0).unwrap();
        assert!(rep.residual < 1e-6);
        assert!(rep.residual_ok && rep.lower_2a_ok && rep.upper_2a_ok);
        assert_relative_eq!(rep.proximity_inverse, 20.0 / PI, max_relative = 1e-6);
    }

    #[test]
    fn identity_check_rejects_zero_at_origin() {
        let f = FunctionSpec::polynomial_real(&[0.0, 0.0, 0.0, 1.0]);
        assert!(matches!(
            nevanlinna_identity_check(&f, 10.0),
            Err(Error::NormalizationError(_))
        ));
    }

    #[test]
    fn identity_check_shifted_sin() {
        let f = FunctionSpec::sin()
            .with_shift(Complex64::ONE)
            .with_scale(Complex64::new(1.0 / 1.0f64.sin(), 0.0));
        let rep = nevanlinna_identity_check(&f, 10.0).unwrap();
        assert!(rep.residual < 1.0, "residual {}", rep.residual);
        assert!(rep.lower_2a_ok && rep.upper_2a_ok);
    }

    #[test]
    fn taylor_exp_matches_exp_max() {
        let t = FunctionSpec::taylor_exp(40, 50.0);
        let e = FunctionSpec::exp();
        let mt = max_modulus(&t, 5.0, 256).unwrap();
        let me = max_modulus(&e, 5.0, 256).unwrap();
        assert_relative_eq!(mt.log_value, me.log_value, max_relative = 1e-10);
    }

    #[test]
    fn resolution_stability() {
        // refinement saturates: coarse and fine sweeps agree
        for f in [
            FunctionSpec::exp(),
            FunctionSpec::sin(),
            FunctionSpec::polynomial_real(&[-1.0, 0.0, 0.0, 1.0]),
        ] {
            let a = max_modulus(&f, 3.0, 256).unwrap().log_value;
            let b = max_modulus(&f, 3.0, 4096).unwrap().log_value;
            assert_relative_eq!(a, b, max_relative = 1e-6);
        }
    }

    #[test]
    fn profile_log_domain_beyond_float_range() {
        let f = FunctionSpec::exp();
        let p = profile_at(&f, 1000.0, 256).unwrap();
        assert!(p.max_overflows());
        assert_relative_eq!(p.log_max, 1000.0, max_relative = 1e-10);
        assert_relative_eq!(p.log_min, -1000.0, max_relative = 1e-10);
        assert_relative_eq!(p.characteristic, 1000.0 / PI, max_relative = 1e-7);
    }
}
