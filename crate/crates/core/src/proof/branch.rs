//! Branch-targeted inversion: Newton iteration on log f(w) - target.

use num_complex::Complex64;

use crate::complex_ext::{wrap_angle, ComplexSample};
use crate::error::{Error, Result};
use crate::function::FunctionSpec;

const MAX_NEWTON_ITERS: usize = 50;
const RESIDUAL_TOL: f64 = 1e-10;

/// Admissible range for the continuous imaginary part of log f at the
/// solution: center plus/minus halfwidth.
#[derive(Debug, Clone, Copy)]
pub struct BranchWindow {
    pub center: f64,
    pub halfwidth: f64,
}

impl BranchWindow {
    pub fn new(center: f64, halfwidth: f64) -> Self {
        BranchWindow { center, halfwidth }
    }

    /// Does the continuous imaginary part land in the window?
    pub fn admits(&self, im_continuous: f64) -> bool {
        (im_continuous - self.center).abs() <= self.halfwidth + 1e-12
    }
}

/// Solve log f(w) = target by Newton iteration from `seed`, staying on the
/// branch selected by the seed. The returned point satisfies
/// |log f(w) - target| < 1e-10 in both the log-modulus and (wrapped)
/// argument components, with Im log f(w) admissible for `window`.
pub fn inverse_branch(
    f: &FunctionSpec,
    target: ComplexSample,
    seed: Complex64,
    window: BranchWindow,
) -> Result<Complex64> {
    // a vanishing seed derivative is fatal unless the target is already
    // within unit log-distance, where the damped iteration self-corrects
    let ld_seed = f.log_derivative(seed)?;
    let f_seed = f.evaluate_log(ComplexSample::from_complex(seed))?;
    if f_seed.is_zero {
        return Err(Error::CriticalSeed(0.0));
    }
    let initial_residual = Complex64::new(
        f_seed.log_mag - target.log_mag,
        wrap_angle(f_seed.arg - target.arg),
    );
    if ld_seed.norm() < 1e-12 && initial_residual.norm() > 1.0 {
        return Err(Error::CriticalSeed(ld_seed.norm() * f_seed.modulus()));
    }

    let mut w = seed;
    // continuous imaginary part of log f along the Newton path (damped
    // steps keep per-step argument changes well under pi)
    let mut im_cont = f_seed.arg;
    let mut prev_arg = f_seed.arg;
    for _ in 0..MAX_NEWTON_ITERS {
        let val = f.evaluate_log(ComplexSample::from_complex(w))?;
        if val.is_zero {
            return Err(Error::NearZeroDivision("hit a zero during Newton".into()));
        }
        im_cont += wrap_angle(val.arg - prev_arg);
        prev_arg = val.arg;
        let residual = Complex64::new(
            val.log_mag - target.log_mag,
            wrap_angle(val.arg - target.arg),
        );
        if residual.re.abs() < RESIDUAL_TOL && residual.im.abs() < RESIDUAL_TOL {
            if !window.admits(im_cont) {
                return Err(Error::WrongBranch(im_cont));
            }
            return Ok(w);
        }
        let ld = f.log_derivative(w)?;
        if ld.norm() < 1e-300 {
            return Err(Error::CriticalSeed(0.0));
        }
        let step = residual / ld;
        // damp wild steps so the iteration cannot tunnel across branches
        let cap = 0.5 * (1.0 + w.norm());
        let step = if step.norm() > cap {
            step * (cap / step.norm())
        } else {
            step
        };
        w -= step;
    }
    Err(Error::NoConvergence(MAX_NEWTON_ITERS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn exp_log_is_identity_on_the_branch() {
        let f = FunctionSpec::exp();
        let target = ComplexSample::new(2.0, 0.5);
        let w = inverse_branch(
            &f,
            target,
            Complex64::new(2.0, 0.5),
            BranchWindow::new(0.0, 2.0 * PI),
        )
        .unwrap();
        assert_relative_eq!(w.re, 2.0, max_relative = 1e-12);
        assert_relative_eq!(w.im, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn sin_recovers_arcsine() {
        let f = FunctionSpec::sin();
        let target = ComplexSample::new(0.9f64.ln(), 0.0);
        let w = inverse_branch(
            &f,
            target,
            Complex64::new(PI / 2.0, 0.0),
            BranchWindow::new(0.0, 2.0 * PI),
        )
        .unwrap();
        assert_relative_eq!(w.re, 0.9f64.asin(), max_relative = 1e-10);
        assert_relative_eq!(w.re, 1.1197695149986342, max_relative = 1e-9);
        assert!(w.im.abs() < 1e-10);
    }

    #[test]
    fn critical_seed_rejected_for_far_target() {
        let f = FunctionSpec::sin();
        let err = inverse_branch(
            &f,
            ComplexSample::new(5.0, 1.0),
            Complex64::new(PI / 2.0, 0.0),
            BranchWindow::new(0.0, 2.0 * PI),
        )
        .unwrap_err();
        assert!(matches!(err, Error::CriticalSeed(_)), "{err:?}");
    }

    #[test]
    fn wrong_branch_detected() {
        // ask for Im log f near 2 pi while seeding the principal branch
        let f = FunctionSpec::exp();
        let target = ComplexSample::new(1.0, 0.3);
        let err = inverse_branch(
            &f,
            target,
            Complex64::new(1.0, 0.3),
            BranchWindow::new(2.0 * PI, 1.0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::WrongBranch(_)));
    }
}
