//! The annular candidate set (modulus and derivative tests on a polar
//! lattice) and the greedy disjoint-disk packing after zero exclusion.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::{E, PI, TAU};

use super::{CheckRecord, ProofParams};
use crate::complex_ext::ComplexSample;
use crate::error::{Error, Result};
use crate::function::FunctionSpec;
use crate::logderiv::{fuchs_macintyre_disks, r_shell, Disk, DiskBudget, ExclusionDiskSet};
use crate::modulus::{characteristic, max_modulus};

/// A lattice sample passing both candidate tests.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FlaggedSample {
    pub re: f64,
    pub im: f64,
    /// ln |f(z)|.
    pub log_f: f64,
    /// arg f(z).
    pub arg_f: f64,
    /// ln |f'(z)/f(z)|.
    pub log_deriv: f64,
}

impl FlaggedSample {
    pub fn z(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateSet {
    pub r: f64,
    pub delta: f64,
    pub t_r: f64,
    /// ln M(r).
    pub log_max: f64,
    /// Shell radii R_1 .. R_6.
    pub shells: [f64; 6],
    pub lattice_radial: usize,
    pub lattice_angular: usize,
    pub flagged: Vec<FlaggedSample>,
    pub area_estimate: f64,
    pub area_stderr: f64,
    /// 2 r^2 / T^{2 delta}.
    pub area_floor: f64,
    pub area_floor_ok: bool,
    /// Lattice radii where the derivative ceiling T (ln T)^7 / r holds
    /// for every sampled angle.
    pub f_r_radii: Vec<f64>,
    /// (radius, angular measure of qualifying directions).
    pub j_s_measures: Vec<(f64, f64)>,
    pub checks: Vec<CheckRecord>,
}

/// Candidate membership for a normalized function: |f| at least sqrt M(r)
/// and |f'/f| at least T^{1-delta}/r.
fn membership(
    f: &FunctionSpec,
    z: Complex64,
    half_log_max: f64,
    log_deriv_floor: f64,
) -> Result<Option<(f64, f64, f64)>> {
    let val = f.evaluate_log(ComplexSample::from_complex(z))?;
    if val.is_zero {
        return Ok(None);
    }
    if val.log_mag < half_log_max {
        return Ok(None);
    }
    let ld = f.log_derivative(z)?;
    let ld_log = ld.norm().max(1e-300).ln();
    if ld_log < log_deriv_floor {
        return Ok(None);
    }
    Ok(Some((val.log_mag, val.arg, ld_log)))
}

/// Build the candidate set at a good radius r.
pub fn candidate_set(
    f: &FunctionSpec,
    r: f64,
    delta: f64,
    params: &ProofParams,
) -> Result<CandidateSet> {
    if !(delta > 0.0 && delta < 2.0 / 7.0) {
        return Err(Error::InvalidInput(format!(
            "delta = {delta} outside (0, 2/7)"
        )));
    }
    let g = f.normalized()?;
    let t_r = characteristic(&g, r, 512)?;
    if t_r <= E {
        return Err(Error::DegenerateT(t_r));
    }
    let shells: [f64; 6] = [
        r_shell(r, 1, t_r)?,
        r_shell(r, 2, t_r)?,
        r_shell(r, 3, t_r)?,
        r_shell(r, 4, t_r)?,
        r_shell(r, 5, t_r)?,
        r_shell(r, 6, t_r)?,
    ];
    // good-radius precondition
    let t_r6 = characteristic(&g, shells[5], 512)?;
    if t_r6 > E * t_r * (1.0 + 1e-12) {
        return Err(Error::BadRadius(r));
    }
    let log_max = max_modulus(&g, r, 1024)?.log_value;
    let half_log_max = 0.5 * log_max;
    let lt = t_r.ln();
    let log_deriv_floor = (1.0 - delta) * lt - r.ln();

    let n_s = params.grid_density.max(8);
    let n_theta = ((TAU * params.grid_density as f64).round() as usize).max(16);
    let (r1, r3) = (shells[0], shells[2]);
    let radial: Vec<f64> = (0..n_s)
        .map(|i| r1 + (r3 - r1) * i as f64 / (n_s - 1) as f64)
        .collect();

    // lattice flags, parallel over radial lines
    let rows: Vec<Result<Vec<FlaggedSample>>> = radial
        .par_iter()
        .map(|&s| {
            let mut row = Vec::new();
            for j in 0..n_theta {
                let theta = -PI + TAU * j as f64 / n_theta as f64;
                let z = Complex64::from_polar(s, theta);
                if let Some((lf, af, ldl)) = membership(&g, z, half_log_max, log_deriv_floor)? {
                    row.push(FlaggedSample {
                        re: z.re,
                        im: z.im,
                        log_f: lf,
                        arg_f: af,
                        log_deriv: ldl,
                    });
                }
            }
            Ok(row)
        })
        .collect();
    let mut flagged = Vec::new();
    for row in rows {
        flagged.extend(row?);
    }
    if flagged.is_empty() {
        return Err(Error::EmptyCandidate);
    }

    // diagnostics per lattice radius
    let deriv_ceiling_log = (t_r * lt.powi(7) / r).ln();
    let diag: Vec<Result<(Option<f64>, (f64, f64))>> = radial
        .par_iter()
        .map(|&s| {
            let mut all_below_ceiling = true;
            let mut qualifying = 0usize;
            for j in 0..n_theta {
                let theta = -PI + TAU * j as f64 / n_theta as f64;
                let z = Complex64::from_polar(s, theta);
                let ld_log = g.log_derivative(z).map(|v| v.norm().max(1e-300).ln());
                match ld_log {
                    Ok(l) => {
                        if l > deriv_ceiling_log {
                            all_below_ceiling = false;
                        }
                        if l >= log_deriv_floor {
                            let val = g.evaluate_log(ComplexSample::from_complex(z))?;
                            if !val.is_zero && val.log_mag >= half_log_max {
                                qualifying += 1;
                            }
                        }
                    }
                    Err(Error::NearZeroDivision(_)) => {
                        all_below_ceiling = false;
                    }
                    Err(e) => return Err(e),
                }
            }
            let measure = TAU * qualifying as f64 / n_theta as f64;
            Ok((all_below_ceiling.then_some(s), (s, measure)))
        })
        .collect();
    let mut f_r_radii = Vec::new();
    let mut j_s_measures = Vec::new();
    for d in diag {
        let (fr, js) = d?;
        if let Some(s) = fr {
            f_r_radii.push(s);
        }
        j_s_measures.push(js);
    }

    // Monte Carlo area estimate, uniform in area over the annulus
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x61726561);
    let annulus_area = PI * (r3 * r3 - r1 * r1);
    let n_mc = params.mc_samples.max(1000);
    let mut hits = 0usize;
    for _ in 0..n_mc {
        let u: f64 = rng.random_range(0.0..1.0);
        let s = (r1 * r1 + u * (r3 * r3 - r1 * r1)).sqrt();
        let theta = rng.random_range(-PI..PI);
        let z = Complex64::from_polar(s, theta);
        if membership(&g, z, half_log_max, log_deriv_floor)?.is_some() {
            hits += 1;
        }
    }
    let p = hits as f64 / n_mc as f64;
    let area_estimate = p * annulus_area;
    let area_stderr = annulus_area * (p * (1.0 - p) / n_mc as f64).sqrt();
    let area_floor = 2.0 * r * r / t_r.powf(2.0 * delta);
    let area_floor_ok = area_estimate >= area_floor;

    let mut checks = vec![CheckRecord::new(
        "area-floor",
        "candidate area >= 2 r^2 / T^{2 delta}",
        area_estimate,
        area_floor,
        area_floor_ok,
    )];
    checks.push(CheckRecord::new(
        "char-vs-logmax",
        "log M(r) <= T (ln T)^2",
        log_max,
        t_r * lt * lt,
        log_max <= t_r * lt * lt * (1.0 + 1e-12),
    ));

    Ok(CandidateSet {
        r,
        delta,
        t_r,
        log_max,
        shells,
        lattice_radial: n_s,
        lattice_angular: n_theta,
        flagged,
        area_estimate,
        area_stderr,
        area_floor,
        area_floor_ok,
        f_r_radii,
        j_s_measures,
        checks,
    })
}

// ---------------------------------------------------------------------------
// packing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PackedCenter {
    pub re: f64,
    pub im: f64,
    pub log_f: f64,
    pub arg_f: f64,
}

impl PackedCenter {
    pub fn z(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PackedSet {
    pub r: f64,
    pub delta: f64,
    pub t_r: f64,
    /// rho(r) = r / T^{1 - 2 delta}.
    pub rho: f64,
    pub exclusion: Option<ExclusionDiskSet>,
    /// Accepted centers in scan order (ascending ln |f|).
    pub centers: Vec<PackedCenter>,
    pub m_count: usize,
    pub area_b_estimate: f64,
    pub area_b_stderr: f64,
    pub checks: Vec<CheckRecord>,
}

/// Greedy packing with a spatial hash: accept a candidate when it is at
/// least 2 rho away from every accepted center.
fn greedy_pack(candidates: &[FlaggedSample], rho: f64) -> Vec<usize> {
    let cell = 2.0 * rho;
    let key = |z: Complex64| -> (i64, i64) {
        ((z.re / cell).floor() as i64, (z.im / cell).floor() as i64)
    };
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut accepted = Vec::new();
    'cand: for (idx, c) in candidates.iter().enumerate() {
        let z = c.z();
        let (kx, ky) = key(z);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = grid.get(&(kx + dx, ky + dy)) {
                    for &other in bucket {
                        if (candidates[other].z() - z).norm() < 2.0 * rho {
                            continue 'cand;
                        }
                    }
                }
            }
        }
        grid.entry((kx, ky)).or_default().push(idx);
        accepted.push(idx);
    }
    accepted
}

/// Remove exclusion-disk neighborhoods from the candidate set and pack
/// disjoint disks of radius rho greedily.
pub fn exclude_and_pack(
    f: &FunctionSpec,
    cand: &CandidateSet,
    params: &ProofParams,
) -> Result<PackedSet> {
    let r = cand.r;
    let delta = cand.delta;
    let t_r = cand.t_r;
    let lt = t_r.ln();
    let rho = r / t_r.powf(1.0 - 2.0 * delta);
    let r5 = cand.shells[4];
    let zeros = f.known_zeros(r5)?;
    let n_zeros: usize = zeros.iter().map(|(_, m)| m).sum();

    let mut checks = Vec::new();
    // zero-count sanity from the shell-growth estimate
    let zero_ceiling = 2.0 * E * t_r * lt * lt;
    let zero_count_ok = (n_zeros as f64) <= zero_ceiling;
    checks.push(CheckRecord::new(
        "zero-count-ceiling",
        "n(R_5) <= 2 e T (ln T)^2",
        n_zeros as f64,
        zero_ceiling,
        zero_count_ok,
    ));
    if !zero_count_ok {
        return Err(Error::Precondition {
            check: "zero-count-ceiling",
            detail: format!("n(R_5) = {n_zeros} above {zero_ceiling:.3e}"),
        });
    }

    // exclusion disks with quadratic budget, eta = 3 delta
    let exclusion = if n_zeros > 0 {
        let h = r / (2.0 * t_r.powf(1.5 * delta));
        Some(fuchs_macintyre_disks(&zeros, h, DiskBudget::QuadraticSum)?)
    } else {
        None
    };
    let inflated: Vec<Disk> = exclusion
        .as_ref()
        .map(|set| set.inflated(rho))
        .unwrap_or_default();
    let outside = |z: Complex64| -> bool { !inflated.iter().any(|d| d.contains(z)) };

    let mut survivors: Vec<FlaggedSample> = cand
        .flagged
        .iter()
        .copied()
        .filter(|c| outside(c.z()))
        .collect();
    if survivors.is_empty() {
        return Err(Error::EmptyAfterExclusion);
    }
    // deterministic scan order: smallest |f(b)| first, lattice order tie-break
    survivors.sort_by(|a, b| {
        (a.log_f, a.re, a.im)
            .partial_cmp(&(b.log_f, b.re, b.im))
            .unwrap()
    });
    let accepted = greedy_pack(&survivors, rho);
    let centers: Vec<PackedCenter> = accepted
        .iter()
        .map(|&i| PackedCenter {
            re: survivors[i].re,
            im: survivors[i].im,
            log_f: survivors[i].log_f,
            arg_f: survivors[i].arg_f,
        })
        .collect();
    let m_count = centers.len();

    // exhaustive pairwise separation audit for modest counts
    let audit_cap = 2000;
    let mut pairwise_ok = true;
    if m_count <= audit_cap {
        'outer: for i in 0..m_count {
            for j in i + 1..m_count {
                if (centers[i].z() - centers[j].z()).norm() < 2.0 * rho * (1.0 - 1e-12) {
                    pairwise_ok = false;
                    break 'outer;
                }
            }
        }
    }
    checks.push(CheckRecord::new(
        "pairwise-separation",
        "accepted centers are >= 2 rho apart",
        if pairwise_ok { 1.0 } else { 0.0 },
        1.0,
        pairwise_ok,
    ));

    // no zeros within rho of any center
    let mut min_zero_gap = f64::INFINITY;
    for c in &centers {
        for (z, _) in &zeros {
            min_zero_gap = min_zero_gap.min((c.z() - z).norm());
        }
    }
    let no_zero_ok = zeros.is_empty() || min_zero_gap > rho;
    checks.push(CheckRecord::new(
        "no-zeros-near-center",
        "every packed center keeps zeros out of its rho-disk",
        min_zero_gap,
        rho,
        no_zero_ok,
    ));

    // area of the excluded neighborhoods stays below r^2 / T^{2 delta}
    let spend: f64 = inflated.iter().map(|d| PI * d.radius * d.radius).sum();
    let excl_area_cap = r * r / t_r.powf(2.0 * delta);
    let excl_ok = spend <= excl_area_cap;
    let mut excl_check = CheckRecord::new(
        "exclusion-area",
        "inflated exclusion area <= r^2 / T^{2 delta}",
        spend,
        excl_area_cap,
        excl_ok,
    );
    if delta >= 1.0 / 6.0 {
        excl_check = excl_check.not_applicable();
    }
    checks.push(excl_check);

    // Monte Carlo area of the packed-set domain
    let g = f.normalized()?;
    let (r1, r3) = (cand.shells[0], cand.shells[2]);
    let annulus_area = PI * (r3 * r3 - r1 * r1);
    let half_log_max = 0.5 * cand.log_max;
    let floor = (1.0 - delta) * lt - r.ln();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x62617265);
    let n_mc = params.mc_samples.max(1000);
    let mut hits = 0usize;
    for _ in 0..n_mc {
        let u: f64 = rng.random_range(0.0..1.0);
        let s = (r1 * r1 + u * (r3 * r3 - r1 * r1)).sqrt();
        let theta = rng.random_range(-PI..PI);
        let z = Complex64::from_polar(s, theta);
        if outside(z) && membership(&g, z, half_log_max, floor)?.is_some() {
            hits += 1;
        }
    }
    let p = hits as f64 / n_mc as f64;
    let area_b_estimate = p * annulus_area;
    let area_b_stderr = annulus_area * (p * (1.0 - p) / n_mc as f64).sqrt();
    let area_b_floor = r * r / t_r.powf(2.0 * delta);
    let mut area_b_check = CheckRecord::new(
        "packed-area-floor",
        "remaining area >= r^2 / T^{2 delta}",
        area_b_estimate,
        area_b_floor,
        area_b_estimate >= area_b_floor,
    );
    if delta >= 1.0 / 6.0 {
        area_b_check = area_b_check.not_applicable();
    }
    checks.push(area_b_check);

    let m_floor = t_r.powf(2.0 - 7.0 * delta);
    checks.push(CheckRecord::new(
        "packing-count-floor",
        "greedy count >= T^{2 - 7 delta}",
        m_count as f64,
        m_floor,
        m_count as f64 >= m_floor,
    ));

    Ok(PackedSet {
        r,
        delta,
        t_r,
        rho,
        exclusion,
        centers,
        m_count,
        area_b_estimate,
        area_b_stderr,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn exp_candidate_1000() -> CandidateSet {
        let f = FunctionSpec::exp();
        let params = ProofParams {
            grid_density: 200,
            mc_samples: 40_000,
            seed: 3,
        };
        candidate_set(&f, 1000.0, 0.25, &params).unwrap()
    }

    #[test]
    fn exp_candidate_area_matches_geometry() {
        let cand = exp_candidate_1000();
        // exact slice area for |f| = e^{Re z}: integral of 2 acos(r/(2s)) s ds
        let (r1, r3) = (cand.shells[0], cand.shells[2]);
        let n = 20_000usize;
        let mut exact = 0.0;
        for i in 0..n {
            let s = r1 + (r3 - r1) * (i as f64 + 0.5) / n as f64;
            exact += 2.0 * (500.0 / s).acos() * s * (r3 - r1) / n as f64;
        }
        assert!(
            (cand.area_estimate - exact).abs() <= (0.05 * exact).max(4.0 * cand.area_stderr),
            "estimate {} vs exact {}",
            cand.area_estimate,
            exact
        );
        assert!(cand.area_floor_ok);
        assert_relative_eq!(cand.area_floor, 1.12101e5, max_relative = 1e-3);
        // whole annulus supports the derivative ceiling for exp
        assert_eq!(cand.f_r_radii.len(), cand.lattice_radial);
    }

    #[test]
    fn candidate_rejects_tiny_functions() {
        let f = FunctionSpec::polynomial_real(&[0.0, 0.1]);
        let params = ProofParams::default();
        // T(1) = 0 for |z/10| on the unit circle: degenerate
        assert!(matches!(
            candidate_set(&f, 1.0, 0.25, &params),
            Err(Error::DegenerateT(_) | Error::NormalizationError(_))
        ));
    }

    #[test]
    fn grid_density_convergence() {
        let f = FunctionSpec::exp();
        let a = candidate_set(
            &f,
            1000.0,
            0.25,
            &ProofParams {
                grid_density: 200,
                mc_samples: 40_000,
                seed: 5,
            },
        )
        .unwrap();
        let b = candidate_set(
            &f,
            1000.0,
            0.25,
            &ProofParams {
                grid_density: 400,
                mc_samples: 160_000,
                seed: 6,
            },
        )
        .unwrap();
        let combined = (a.area_stderr.powi(2) + b.area_stderr.powi(2)).sqrt();
        assert!(
            (a.area_estimate - b.area_estimate).abs() <= 3.0 * combined,
            "{} vs {} (stderr {})",
            a.area_estimate,
            b.area_estimate,
            combined
        );
    }

    #[test]
    fn exp_packing_meets_count_floor() {
        let f = FunctionSpec::exp();
        let cand = exp_candidate_1000();
        let packed = exclude_and_pack(&f, &cand, &ProofParams::default()).unwrap();
        let needed = cand.t_r.powf(2.0 - 7.0 * 0.25).ceil() as usize;
        assert_eq!(needed, 5);
        assert!(packed.m_count >= needed, "m = {}", packed.m_count);
        assert!(packed.exclusion.is_none());
        // scan order starts at the smallest image modulus
        for w in packed.centers.windows(2) {
            assert!(w[0].log_f <= w[1].log_f + 1e-12);
        }
        assert!(packed
            .checks
            .iter()
            .all(|c| c.holds || !c.applicable));
    }

    #[test]
    fn packing_with_zeros_excludes_them() {
        // sin has zeros on the real axis; packed centers must keep away
        let f = FunctionSpec::sin()
            .with_shift(Complex64::ONE)
            .with_scale(Complex64::new(1.0 / 1.0f64.sin(), 0.0));
        let params = ProofParams {
            grid_density: 120,
            mc_samples: 20_000,
            seed: 9,
        };
        let cand = candidate_set(&f, 40.0, 0.15, &params).unwrap();
        let packed = exclude_and_pack(&f, &cand, &params).unwrap();
        assert!(packed.exclusion.is_some());
        assert!(packed.m_count >= 1);
        let no_zero = packed
            .checks
            .iter()
            .find(|c| c.tag == "no-zeros-near-center")
            .unwrap();
        assert!(no_zero.holds);
    }

    #[test]
    fn empty_candidate_for_bounded_function() {
        // z/10 on a unit circle never reaches sqrt M with the derivative floor
        let f = FunctionSpec::polynomial_real(&[1.0, 0.1]);
        let params = ProofParams::default();
        let result = candidate_set(&f, 2.0, 0.25, &params);
        assert!(result.is_err());
    }

    #[test]
    fn greedy_pack_enforces_separation() {
        // a dense line of samples collapses to every-other-2rho spacing
        let samples: Vec<FlaggedSample> = (0..1000)
            .map(|i| FlaggedSample {
                re: i as f64 * 0.1,
                im: 0.0,
                log_f: 0.0,
                arg_f: 0.0,
                log_deriv: 0.0,
            })
            .collect();
        let rho = 1.0;
        let accepted = greedy_pack(&samples, rho);
        assert_eq!(accepted.len(), 50);
        for w in accepted.windows(2) {
            let d = (samples[w[0]].z() - samples[w[1]].z()).norm();
            assert!(d >= 2.0 * rho - 1e-12);
        }
    }
}
