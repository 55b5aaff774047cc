//! Logarithmic-derivative machinery: the T-based pointwise bound, exclusion
//! disks controlling sums of reciprocal distances to zeros, the good-radius
//! scan for the characteristic, and distortion checks for univalent maps.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{E, PI, TAU};

use crate::error::{Error, Result};
use crate::function::FunctionSpec;
use crate::modulus::{characteristic, max_modulus};

/// Default cap on the number of zeros fed to the disk construction.
pub const ZERO_COUNT_CAP: usize = 10_000;

/// r (1 + m / (ln T)^2): the shell radii used throughout the construction.
pub fn r_shell(r: f64, m: u32, t: f64) -> Result<f64> {
    if t <= E {
        return Err(Error::DegenerateT(t));
    }
    let lt = t.ln();
    Ok(r * (1.0 + m as f64 / (lt * lt)))
}

/// Same shell in log-radius form for radii beyond f64 range.
pub fn log_r_shell(log_r: f64, m: u32, log_t: f64) -> Result<f64> {
    if log_t <= 1.0 {
        return Err(Error::DegenerateT(log_t.exp()));
    }
    Ok(log_r + (m as f64 / (log_t * log_t)).ln_1p())
}

// ---------------------------------------------------------------------------
// pointwise logarithmic-derivative bound
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LogDerivBound {
    /// 4s/(s-|z|)^2 T(s) + sum 2/|z - z_j|.
    pub bound: f64,
    /// |f'(z)/f(z)| when evaluable.
    pub log_deriv_mag: Option<f64>,
    pub satisfied: bool,
}

/// Bound |f'/f| at z from the characteristic at radius s > |z| and the
/// zeros inside |w| <= s. The function is rescaled to f(0) = 1 first.
pub fn goldberg_bound(
    f: &FunctionSpec,
    z: Complex64,
    s: f64,
    zeros: &[(Complex64, usize)],
) -> Result<LogDerivBound> {
    if s <= z.norm() {
        return Err(Error::InvalidInput("goldberg_bound requires s > |z|".into()));
    }
    let g = f.normalized()?;
    let t_s = characteristic(&g, s, 512)?;
    let mut sum = 0.0f64;
    for (zj, m) in zeros {
        let d = (z - zj).norm();
        if d < 1e-280 {
            sum = f64::INFINITY;
            break;
        }
        sum += 2.0 * *m as f64 / d;
    }
    let gap = s - z.norm();
    let bound = 4.0 * s / (gap * gap) * t_s + sum;
    let log_deriv_mag = g.log_derivative(z).ok().map(|v| v.norm());
    let satisfied = match log_deriv_mag {
        Some(m) => m <= bound * (1.0 + 1e-9),
        None => true,
    };
    Ok(LogDerivBound {
        bound,
        log_deriv_mag,
        satisfied,
    })
}

// ---------------------------------------------------------------------------
// exclusion disks (staged covering construction)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiskBudget {
    /// Sum of squared radii <= 4H^2; bound 2n/H outside.
    QuadraticSum,
    /// Sum of radii <= 2H; bound n(1+ln n)/H outside.
    LinearSum,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Disk {
    pub center_re: f64,
    pub center_im: f64,
    pub radius: f64,
}

impl Disk {
    pub fn center(&self) -> Complex64 {
        Complex64::new(self.center_re, self.center_im)
    }
    pub fn contains(&self, z: Complex64) -> bool {
        (z - self.center()).norm() < self.radius
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExclusionDiskSet {
    pub mode: DiskBudget,
    pub h: f64,
    /// Number of points the construction covered (with multiplicity).
    pub n: usize,
    pub disks: Vec<Disk>,
    /// Guaranteed value of sum 1/|z - z_k| outside all disks.
    pub bound: f64,
}

impl ExclusionDiskSet {
    pub fn radius_budget(&self) -> f64 {
        match self.mode {
            DiskBudget::QuadraticSum => 4.0 * self.h * self.h,
            DiskBudget::LinearSum => 2.0 * self.h,
        }
    }

    pub fn radius_spend(&self) -> f64 {
        match self.mode {
            DiskBudget::QuadraticSum => self.disks.iter().map(|d| d.radius * d.radius).sum(),
            DiskBudget::LinearSum => self.disks.iter().map(|d| d.radius).sum(),
        }
    }

    pub fn covers(&self, z: Complex64) -> bool {
        self.disks.iter().any(|d| d.contains(z))
    }

    /// Inflate every disk radius by `extra` (the packing step needs this).
    pub fn inflated(&self, extra: f64) -> Vec<Disk> {
        self.disks
            .iter()
            .map(|d| Disk {
                radius: d.radius + extra,
                ..*d
            })
            .collect()
    }
}

/// Exact maximum number of points covered by a closed disk of radius
/// `lambda` with free center, plus a realizing center. Point-centered
/// candidates win ties so fully coincident clusters get the tight radius.
fn max_cover(points: &[Complex64], lambda: f64) -> (usize, Complex64) {
    let mut best = (0usize, Complex64::ZERO);
    let within = lambda * (1.0 + 1e-12) + 1e-300;
    // centers at the points themselves
    for &c in points {
        let count = points.iter().filter(|p| (*p - c).norm() <= within).count();
        if count > best.0 {
            best = (count, c);
        }
    }
    // centers with two points on the boundary, via angular sweep per point
    for (i, &zi) in points.iter().enumerate() {
        let mut events: Vec<(f64, i8)> = Vec::new();
        for (j, &zj) in points.iter().enumerate() {
            if j == i {
                continue;
            }
            let d = (zj - zi).norm();
            if d > 2.0 * lambda * (1.0 + 1e-12) || d == 0.0 {
                continue;
            }
            let mid = (zj - zi).arg();
            let delta = (d / (2.0 * lambda)).clamp(-1.0, 1.0).acos();
            let (lo, hi) = (mid - delta, mid + delta);
            // unroll the arc onto [-pi, pi] with wraparound
            let push = |events: &mut Vec<(f64, i8)>, a: f64, b: f64| {
                events.push((a, 1));
                events.push((b, -1));
            };
            if lo < -PI {
                push(&mut events, lo + TAU, PI + 1e-12);
                push(&mut events, -PI - 1e-12, hi);
            } else if hi > PI {
                push(&mut events, lo, PI + 1e-12);
                push(&mut events, -PI - 1e-12, hi - TAU);
            } else {
                push(&mut events, lo, hi);
            }
        }
        events.sort_by(|a, b| (a.0, -a.1).partial_cmp(&(b.0, -b.1)).unwrap());
        let mut depth = 0i32;
        for &(phi, kind) in &events {
            depth += kind as i32;
            let count = depth as usize + 1; // + the boundary point itself
            if kind == 1 && count > best.0 {
                best = (count, zi + Complex64::from_polar(lambda, phi));
            }
        }
    }
    best
}

/// Build the exclusion disks for the given zeros (multiplicities expanded)
/// and verify the mode's radius budget.
pub fn fuchs_macintyre_disks(
    zeros: &[(Complex64, usize)],
    h: f64,
    mode: DiskBudget,
) -> Result<ExclusionDiskSet> {
    let mut points: Vec<Complex64> = Vec::new();
    for (z, m) in zeros {
        for _ in 0..*m {
            points.push(*z);
        }
    }
    let n = points.len();
    if n == 0 {
        return Err(Error::InvalidInput("disk construction needs n >= 1".into()));
    }
    if n > ZERO_COUNT_CAP {
        return Err(Error::BudgetExceeded(format!(
            "zero count {n} above the cap {ZERO_COUNT_CAP}"
        )));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidInput("H must be positive".into()));
    }
    // self-normalizing radius schedules: sum over p of 1/lambda_p equals the
    // advertised bound exactly, and stage radii stay inside the budget
    let nf = n as f64;
    let s_sqrt: f64 = (1..=n).map(|q| 1.0 / (q as f64).sqrt()).sum();
    let s_harm: f64 = (1..=n).map(|q| 1.0 / q as f64).sum();
    let lambda = |p: usize| -> f64 {
        let pf = p as f64;
        match mode {
            DiskBudget::QuadraticSum => h * pf.sqrt() * s_sqrt / (2.0 * nf),
            DiskBudget::LinearSum => h * pf * s_harm / (nf * (1.0 + nf.ln())),
        }
    };
    let bound = match mode {
        DiskBudget::QuadraticSum => 2.0 * nf / h,
        DiskBudget::LinearSum => nf * (1.0 + nf.ln()) / h,
    };

    let mut remaining = points;
    let mut disks = Vec::new();
    let mut p_prev = n;
    while !remaining.is_empty() {
        let m = remaining.len();
        let mut stage: Option<(usize, Complex64)> = None;
        for p in (1..=p_prev.min(m)).rev() {
            let (count, center) = max_cover(&remaining, lambda(p));
            if count >= p {
                stage = Some((p, center));
                break;
            }
        }
        let (p_i, center) =
            stage.ok_or_else(|| Error::BudgetExceeded("no stage found (construction bug)".into()))?;
        let lam = lambda(p_i);
        let cover_r = lam * (1.0 + 1e-12) + 1e-300;
        let covered: Vec<Complex64> = remaining
            .iter()
            .copied()
            .filter(|z| (z - center).norm() <= cover_r)
            .collect();
        if covered.len() < p_i {
            return Err(Error::BudgetExceeded(
                "stage covered fewer points than promised".into(),
            ));
        }
        remaining.retain(|z| (z - center).norm() > cover_r);
        // a stage whose covered points all sit at the center needs no
        // doubling in the distance argument
        let tight = covered.iter().all(|z| (z - center).norm() == 0.0);
        disks.push(Disk {
            center_re: center.re,
            center_im: center.im,
            radius: if tight { lam } else { 2.0 * lam },
        });
        p_prev = p_i;
    }

    let set = ExclusionDiskSet {
        mode,
        h,
        n,
        disks,
        bound,
    };
    if set.radius_spend() > set.radius_budget() * (1.0 + 1e-9) {
        return Err(Error::BudgetExceeded(format!(
            "radius spend {:.6e} above budget {:.6e}",
            set.radius_spend(),
            set.radius_budget()
        )));
    }
    if set.disks.len() > n {
        return Err(Error::BudgetExceeded("more disks than points".into()));
    }
    Ok(set)
}

/// Monte Carlo maximum of sum 1/|z - z_k| over points outside the disks,
/// sampled from a box around the configuration. Used to verify the bound.
pub fn verify_disk_bound(
    zeros: &[(Complex64, usize)],
    set: &ExclusionDiskSet,
    samples: usize,
    seed: u64,
) -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lo = Complex64::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Complex64::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (z, _) in zeros {
        lo.re = lo.re.min(z.re);
        lo.im = lo.im.min(z.im);
        hi.re = hi.re.max(z.re);
        hi.im = hi.im.max(z.im);
    }
    let pad = 2.0 * set.h + 1.0;
    let (x0, x1) = (lo.re - pad, hi.re + pad);
    let (y0, y1) = (lo.im - pad, hi.im + pad);
    let mut max_sum = 0.0f64;
    let mut violations = 0usize;
    let mut accepted = 0usize;
    while accepted < samples {
        let z = Complex64::new(
            rng.random_range(x0..x1),
            rng.random_range(y0..y1),
        );
        if set.covers(z) {
            continue;
        }
        accepted += 1;
        let mut sum = 0.0;
        for (zj, m) in zeros {
            sum += *m as f64 / (z - zj).norm();
        }
        if sum > max_sum {
            max_sum = sum;
        }
        if sum > set.bound * (1.0 + 1e-9) {
            violations += 1;
        }
    }
    (max_sum, violations)
}

// ---------------------------------------------------------------------------
// good radii
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoodRadiusRow {
    pub r: f64,
    pub t_r: f64,
    pub r6: f64,
    pub t_r6: f64,
    pub good: bool,
    /// log M(r) <= T(r) (ln T(r))^2, evaluated for good radii.
    pub char_controls_log_max: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoodRadiusScan {
    pub rows: Vec<GoodRadiusRow>,
    /// Shell comes from phi(x) = x^2/6 applied to ln T.
    pub phi_note: String,
    /// Upper estimate: sum of grid-interval log lengths touching bad radii.
    pub exceptional_log_measure_estimate: f64,
}

impl GoodRadiusScan {
    pub fn bad_count(&self) -> usize {
        self.rows.iter().filter(|r| !r.good).count()
    }
    pub fn good_radii(&self) -> Vec<f64> {
        self.rows.iter().filter(|r| r.good).map(|r| r.r).collect()
    }
}

/// Scan radii for the characteristic shell-growth test
/// T(R_6(r)) <= e T(r), recording the control of log M for good radii.
pub fn good_radius_scan(f: &FunctionSpec, r_grid: &[f64]) -> Result<GoodRadiusScan> {
    let mut rows = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let t_r = characteristic(f, r, 512)?;
        if t_r <= E {
            return Err(Error::DegenerateT(t_r));
        }
        let r6 = r_shell(r, 6, t_r)?;
        let t_r6 = characteristic(f, r6, 512)?;
        let good = t_r6 <= E * t_r * (1.0 + 1e-12);
        let char_controls_log_max = if good {
            let log_max = max_modulus(f, r, 1024)?.log_value;
            let lt = t_r.ln();
            Some(log_max <= t_r * lt * lt * (1.0 + 1e-12))
        } else {
            None
        };
        rows.push(GoodRadiusRow {
            r,
            t_r,
            r6,
            t_r6,
            good,
            char_controls_log_max,
        });
    }
    let mut exceptional = 0.0;
    for w in rows.windows(2) {
        if !w[0].good || !w[1].good {
            exceptional += (w[1].r / w[0].r).ln();
        }
    }
    Ok(GoodRadiusScan {
        rows,
        phi_note: "shell exponent from phi(x) = x^2/6 on ln T".into(),
        exceptional_log_measure_estimate: exceptional,
    })
}

/// Abstract form of the growth scan for property tests: flags r where
/// F(r (1 + 1/phi(F(r)))) <= F(r) + 1.
pub fn growth_lemma_scan<F, P>(f: F, phi: P, r_grid: &[f64]) -> Vec<(f64, bool)>
where
    F: Fn(f64) -> f64,
    P: Fn(f64) -> f64,
{
    r_grid
        .iter()
        .map(|&r| {
            let fr = f(r);
            let shell = r * (1.0 + 1.0 / phi(fr));
            (r, f(shell) <= fr + 1.0)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// distortion checks
// ---------------------------------------------------------------------------

/// A holomorphic map handle with derivative, for distortion checks.
pub trait ConformalMap: Sync {
    fn apply(&self, z: Complex64) -> Result<Complex64>;
    fn derivative(&self, z: Complex64) -> Result<Complex64>;
}

pub struct FnMap<A, D>
where
    A: Fn(Complex64) -> Result<Complex64> + Sync,
    D: Fn(Complex64) -> Result<Complex64> + Sync,
{
    pub apply: A,
    pub derivative: D,
}

impl<A, D> ConformalMap for FnMap<A, D>
where
    A: Fn(Complex64) -> Result<Complex64> + Sync,
    D: Fn(Complex64) -> Result<Complex64> + Sync,
{
    fn apply(&self, z: Complex64) -> Result<Complex64> {
        (self.apply)(z)
    }
    fn derivative(&self, z: Complex64) -> Result<Complex64> {
        (self.derivative)(z)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KoebeReport {
    pub samples: usize,
    pub lambda: f64,
    /// Extremes of |g(z)-g(a)| / (|z-a| |g'(a)|).
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Extremes of |g'(z)| / |g'(a)|.
    pub deriv_ratio_min: f64,
    pub deriv_ratio_max: f64,
    pub sandwich_ok: bool,
    pub derivative_sandwich_ok: bool,
    /// Rays from g(a) of length |g'(a)| r / 4 that Newton pulled back in.
    pub quarter_hits: usize,
    pub quarter_rays: usize,
    pub quarter_ok: bool,
}

/// Sample the two distortion sandwiches for a map univalent on D(a, r) and
/// run the one-quarter inclusion test with inverse Newton on 50 rays.
pub fn koebe_check(
    map: &dyn ConformalMap,
    a: Complex64,
    r: f64,
    lambda: f64,
    samples: usize,
) -> Result<KoebeReport> {
    if !(0.0 < lambda && lambda < 1.0) {
        return Err(Error::InvalidInput("koebe_check needs 0 < lambda < 1".into()));
    }
    let ga = map.apply(a)?;
    let da = map.derivative(a)?;
    if da.norm() == 0.0 {
        return Err(Error::CriticalSeed(0.0));
    }
    // deterministic rings of sample points in the closed disk of radius
    // lambda r, excluding the center itself
    let rings = 8usize.max(samples / 16);
    let mut pts = Vec::with_capacity(samples);
    let mut k = 0usize;
    'outer: for ring in 1..=rings {
        let rad = lambda * r * ring as f64 / rings as f64;
        let m = (samples / rings).max(3);
        for j in 0..m {
            let th = TAU * j as f64 / m as f64 + 0.1 * ring as f64;
            pts.push(a + Complex64::from_polar(rad, th));
            k += 1;
            if k >= samples {
                break 'outer;
            }
        }
    }
    let images: Vec<Complex64> = pts
        .iter()
        .map(|&z| map.apply(z))
        .collect::<Result<_>>()?;
    // injectivity on the sample set
    let scale = images
        .iter()
        .map(|w| (w - ga).norm())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    for i in 0..images.len() {
        for j in i + 1..images.len() {
            let d = (images[i] - images[j]).norm();
            if d < 1e-12 * scale {
                return Err(Error::InjectivityViolation(d));
            }
        }
    }
    let lo = 1.0 / ((1.0 + lambda) * (1.0 + lambda));
    let hi = 1.0 / ((1.0 - lambda) * (1.0 - lambda));
    let dlo = (1.0 - lambda) / (1.0 + lambda).powi(3);
    let dhi = (1.0 + lambda) / (1.0 - lambda).powi(3);
    let slack = 1e-9;
    let mut ratio_min = f64::INFINITY;
    let mut ratio_max = 0.0f64;
    let mut deriv_min = f64::INFINITY;
    let mut deriv_max = 0.0f64;
    for (&z, &gz) in pts.iter().zip(&images) {
        let ratio = (gz - ga).norm() / ((z - a).norm() * da.norm());
        ratio_min = ratio_min.min(ratio);
        ratio_max = ratio_max.max(ratio);
        let dr = map.derivative(z)?.norm() / da.norm();
        deriv_min = deriv_min.min(dr);
        deriv_max = deriv_max.max(dr);
    }
    let sandwich_ok = ratio_min >= lo - slack && ratio_max <= hi + slack;
    let derivative_sandwich_ok = deriv_min >= dlo - slack && deriv_max <= dhi + slack;

    // one-quarter inclusion: pull the endpoint of each ray back by Newton
    let quarter_rays = 50usize;
    let reach = da.norm() * r / 4.0;
    let mut quarter_hits = 0usize;
    for j in 0..quarter_rays {
        let w = ga + Complex64::from_polar(reach * (1.0 - 1e-9), TAU * j as f64 / quarter_rays as f64);
        let mut x = a;
        let mut hit = false;
        for _ in 0..60 {
            let gx = match map.apply(x) {
                Ok(v) => v,
                Err(_) => break,
            };
            let dx = match map.derivative(x) {
                Ok(v) if v.norm() > 1e-300 => v,
                _ => break,
            };
            let step = (gx - w) / dx;
            x -= step;
            if (x - a).norm() > r {
                // walked out of the domain: clamp back toward the center
                x = a + (x - a) * (0.95 * r / (x - a).norm());
            }
            if step.norm() < 1e-12 * r.max(1.0) {
                hit = (map.apply(x)? - w).norm() < 1e-8 * reach.max(1e-300)
                    && (x - a).norm() < r;
                break;
            }
        }
        if hit {
            quarter_hits += 1;
        }
    }
    Ok(KoebeReport {
        samples: pts.len(),
        lambda,
        ratio_min,
        ratio_max,
        deriv_ratio_min: deriv_min,
        deriv_ratio_max: deriv_max,
        sandwich_ok,
        derivative_sandwich_ok,
        quarter_hits,
        quarter_rays,
        quarter_ok: quarter_hits == quarter_rays,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn r_shell_values() {
        let t = 10.0f64.exp();
        assert_relative_eq!(r_shell(100.0, 6, t).unwrap(), 106.0, max_relative = 1e-12);
        assert_relative_eq!(r_shell(1000.0, 1, t).unwrap(), 1010.0, max_relative = 1e-12);
        let t = 50.0 / PI;
        let expected = 50.0 * (1.0 + 4.0 / t.ln().powi(2));
        assert_relative_eq!(r_shell(50.0, 4, t).unwrap(), expected, max_relative = 1e-12);
        assert!((r_shell(50.0, 4, t).unwrap() - 76.1166).abs() < 1e-3);
        assert!(matches!(r_shell(10.0, 1, 2.0), Err(Error::DegenerateT(_))));
    }

    #[test]
    fn r_shell_monotonicity() {
        let t = 100.0;
        let base = r_shell(50.0, 2, t).unwrap();
        assert!(r_shell(50.0, 3, t).unwrap() > base);
        assert!(r_shell(50.0, 2, 200.0).unwrap() < base);
    }

    #[test]
    fn goldberg_closed_form_for_exp() {
        // normalized exp at z = r real, s = 2r: bound (8/r)(2r/pi) = 16/pi
        let f = FunctionSpec::exp();
        let r = 10.0;
        let b = goldberg_bound(&f, Complex64::new(r, 0.0), 2.0 * r, &[]).unwrap();
        assert_relative_eq!(b.bound, 16.0 / PI, max_relative = 1e-6);
        assert!(b.satisfied);
        assert_relative_eq!(b.log_deriv_mag.unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn goldberg_diverges_near_zero() {
        let f = FunctionSpec::polynomial_real(&[-1.0, 0.0, 0.0, 1.0]);
        let zeros = f.known_zeros(4.0).unwrap();
        let near = Complex64::new(1.0 + 1e-9, 0.0);
        let b = goldberg_bound(&f, near, 4.0, &zeros).unwrap();
        assert!(b.bound > 1e8);
        assert!(b.satisfied);
    }

    #[test]
    fn single_zero_quadratic_mode_gives_half_h_disk() {
        let set = fuchs_macintyre_disks(&[(Complex64::ZERO, 1)], 1.0, DiskBudget::QuadraticSum)
            .unwrap();
        assert_eq!(set.disks.len(), 1);
        assert_relative_eq!(set.disks[0].radius, 0.5, max_relative = 1e-12);
        assert_relative_eq!(set.bound, 2.0, max_relative = 1e-12);
        // outside D(0, 1/2): 1/|z| < 2
        let (max_sum, violations) = verify_disk_bound(&[(Complex64::ZERO, 1)], &set, 2000, 7);
        assert_eq!(violations, 0);
        assert!(max_sum <= 2.0);
    }

    #[test]
    fn coincident_zeros_single_tight_disk() {
        let a = Complex64::new(3.0, -2.0);
        let n = 12usize;
        let set =
            fuchs_macintyre_disks(&[(a, n)], 2.0, DiskBudget::QuadraticSum).unwrap();
        assert_eq!(set.disks.len(), 1);
        assert!(set.disks[0].radius <= 2.0 * 2.0);
        assert!(set.radius_spend() <= set.radius_budget() * (1.0 + 1e-12));
        let (max_sum, violations) = verify_disk_bound(&[(a, n)], &set, 2000, 11);
        assert_eq!(violations, 0);
        assert!(max_sum <= set.bound);
    }

    #[test]
    fn random_configurations_hold_budget_and_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(20260810);
        for case in 0..30 {
            let n = 1 + (case % 15);
            let zeros: Vec<(Complex64, usize)> = (0..n)
                .map(|_| {
                    (
                        Complex64::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)),
                        1,
                    )
                })
                .collect();
            for mode in [DiskBudget::QuadraticSum, DiskBudget::LinearSum] {
                let h = rng.random_range(0.2..3.0);
                let set = fuchs_macintyre_disks(&zeros, h, mode).unwrap();
                assert!(set.radius_spend() <= set.radius_budget() * (1.0 + 1e-9));
                assert!(set.disks.len() <= n);
                let (_, violations) = verify_disk_bound(&zeros, &set, 3000, case as u64);
                assert_eq!(violations, 0, "mode {mode:?} case {case}");
            }
        }
    }

    #[test]
    fn twenty_uniform_zeros_linear_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let zeros: Vec<(Complex64, usize)> = (0..20)
            .map(|_| {
                let r = 5.0 * rng.random_range(0.0f64..1.0).sqrt();
                let th = rng.random_range(0.0..TAU);
                (Complex64::from_polar(r, th), 1)
            })
            .collect();
        let set = fuchs_macintyre_disks(&zeros, 1.0, DiskBudget::LinearSum).unwrap();
        let expected_bound = 20.0 * (1.0 + 20.0f64.ln());
        assert_relative_eq!(set.bound, expected_bound, max_relative = 1e-12);
        let (max_sum, violations) = verify_disk_bound(&zeros, &set, 10_000, 99);
        assert_eq!(violations, 0);
        assert!(max_sum <= expected_bound);
    }

    #[test]
    fn good_radius_scan_exp_all_good() {
        let f = FunctionSpec::exp();
        let grid: Vec<f64> = (0..16).map(|k| 100.0 * 10f64.powf(k as f64 / 8.0)).collect();
        let scan = good_radius_scan(&f, &grid).unwrap();
        assert_eq!(scan.bad_count(), 0);
        assert_relative_eq!(scan.exceptional_log_measure_estimate, 0.0);
        for row in &scan.rows {
            assert_eq!(row.char_controls_log_max, Some(true));
        }
    }

    #[test]
    fn good_radius_scan_rejects_small_t() {
        let f = FunctionSpec::exp();
        assert!(matches!(
            good_radius_scan(&f, &[1.0]),
            Err(Error::DegenerateT(_))
        ));
    }

    #[test]
    fn synthetic_jump_is_flagged_bad() {
        // F jumps by 10 at r = 500: radii whose shell crosses the jump fail
        // F(shell) <= F + 1, radii past the jump are good again
        let f = |r: f64| if r < 500.0 { r.ln().ln() } else { r.ln().ln() + 10.0 };
        let phi = |x: f64| x * x / 6.0;
        let grid: Vec<f64> = (0..40).map(|k| 300.0 * 1.02f64.powi(k)).collect();
        let rows = growth_lemma_scan(f, phi, &grid);
        let bad: Vec<f64> = rows.iter().filter(|(_, g)| !g).map(|&(r, _)| r).collect();
        assert!(!bad.is_empty());
        assert!(bad.iter().all(|&r| r < 500.0));
        assert!(bad.iter().any(|&r| r > 480.0));
        assert!(rows.iter().filter(|(r, _)| *r >= 500.0).all(|(_, g)| *g));
    }

    #[test]
    fn koebe_identity_map() {
        let map = FnMap {
            apply: |z| Ok(z),
            derivative: |_| Ok(Complex64::ONE),
        };
        let rep = koebe_check(&map, Complex64::ZERO, 1.0, 0.5, 128).unwrap();
        assert!(rep.sandwich_ok && rep.derivative_sandwich_ok && rep.quarter_ok);
        assert_relative_eq!(rep.ratio_min, 1.0, max_relative = 1e-12);
        assert_relative_eq!(rep.ratio_max, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn koebe_extremal_function_touches_lower_bound() {
        // g(z) = z/(1-z)^2 attains the lower distortion bound at z = -lambda
        let map = FnMap {
            apply: |z: Complex64| Ok(z / ((Complex64::ONE - z) * (Complex64::ONE - z))),
            derivative: |z: Complex64| {
                Ok((Complex64::ONE + z) / (Complex64::ONE - z).powu(3))
            },
        };
        let lambda = 0.6;
        let z = Complex64::new(-lambda, 0.0);
        let gz = map.apply(z).unwrap();
        let ratio = gz.norm() / lambda;
        assert_relative_eq!(ratio, 1.0 / (1.0 + lambda).powi(2), max_relative = 1e-6);
        let rep = koebe_check(&map, Complex64::ZERO, 1.0, lambda, 256).unwrap();
        assert!(rep.sandwich_ok);
        assert!(rep.ratio_min >= 1.0 / (1.0 + lambda).powi(2) - 1e-9);
    }

    #[test]
    fn koebe_rejects_noninjective_samples() {
        // a map collapsing everything to one value trips the sample check
        let map = FnMap {
            apply: |_z: Complex64| Ok(Complex64::ONE),
            derivative: |_z: Complex64| Ok(Complex64::ONE),
        };
        assert!(matches!(
            koebe_check(&map, Complex64::ZERO, 1.0, 0.9, 64),
            Err(Error::InjectivityViolation(_))
        ));
    }

    #[test]
    fn koebe_rejects_vanishing_derivative_at_center() {
        let map = FnMap {
            apply: |z: Complex64| Ok(z * z),
            derivative: |z: Complex64| Ok(2.0 * z),
        };
        assert!(matches!(
            koebe_check(&map, Complex64::ZERO, 1.0, 0.9, 64),
            Err(Error::CriticalSeed(_))
        ));
    }
}
