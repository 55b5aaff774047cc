//! Escape-time classification on pixel grids, the boundary proxy for the
//! escaping/Julia intersection, and box-counting dimension fits.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complex_ext::ComplexSample;
use crate::error::{Error, Result};
use crate::function::FunctionSpec;

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct EscapePolicy {
    /// ln |z| beyond which an orbit is considered past the horizon.
    pub escape_log_threshold: f64,
    /// Consecutive growing steps past the horizon before declaring escape.
    pub confirm: usize,
    /// Orbits inside this disk for `confirm` steps are bounded.
    pub trap_radius: f64,
    pub cycle_tol: f64,
    pub cycle_window: usize,
}

impl Default for EscapePolicy {
    fn default() -> Self {
        EscapePolicy {
            escape_log_threshold: 100.0,
            confirm: 3,
            trap_radius: 0.5,
            cycle_tol: 1e-9,
            cycle_window: 24,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Escaping { first_passage: u32 },
    Bounded,
    Undecided,
}

/// Classify one orbit by iterating in the log-polar domain.
pub fn escape_classify(
    f: &FunctionSpec,
    z: Complex64,
    max_iter: u32,
    policy: &EscapePolicy,
) -> Classification {
    let mut x = ComplexSample::from_complex(z);
    let mut growth_streak = 0usize;
    let mut trap_streak = 0usize;
    let mut first_passage: Option<u32> = None;
    let mut prev_log = f64::NEG_INFINITY;
    let mut recent: Vec<Complex64> = Vec::with_capacity(policy.cycle_window);
    let trap_log = policy.trap_radius.ln();
    for n in 0..max_iter {
        let log_mag = if x.is_zero { f64::NEG_INFINITY } else { x.log_mag };
        // escape bookkeeping
        if log_mag > policy.escape_log_threshold {
            if first_passage.is_none() {
                first_passage = Some(n);
            }
            if log_mag >= prev_log {
                growth_streak += 1;
            } else {
                growth_streak = 0;
                first_passage = None;
            }
            if growth_streak >= policy.confirm {
                return Classification::Escaping {
                    first_passage: first_passage.unwrap_or(n),
                };
            }
        } else {
            growth_streak = 0;
            first_passage = None;
        }
        // bounded bookkeeping
        if log_mag <= trap_log {
            trap_streak += 1;
            if trap_streak >= policy.confirm {
                return Classification::Bounded;
            }
        } else {
            trap_streak = 0;
        }
        if let Ok(plain) = x.to_complex() {
            if plain.norm() < 1e6 {
                if recent
                    .iter()
                    .any(|p| (p - plain).norm() < policy.cycle_tol)
                {
                    return Classification::Bounded;
                }
                if recent.len() == policy.cycle_window {
                    recent.remove(0);
                }
                recent.push(plain);
            }
        }
        prev_log = log_mag;
        // iterate
        x = match f.evaluate_log(x) {
            Ok(v) => v,
            Err(Error::Overflow(_)) if log_mag > policy.escape_log_threshold => {
                // the next modulus exceeds every representation: growth
                ComplexSample::new(f64::MAX, 0.0)
            }
            Err(_) => return Classification::Undecided,
        };
    }
    Classification::Undecided
}

// ---------------------------------------------------------------------------
// grids and masks
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridWindow {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl GridWindow {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        GridWindow { x0, y0, x1, y1 }
    }
    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }
    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
}

#[derive(Debug, Clone)]
pub struct EscapeGrid {
    pub window: GridWindow,
    pub epsilon: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major cell classes (y outer, x inner).
    pub cells: Vec<Classification>,
    /// Per-cell sample facts feeding the boundary mask.
    pub has_escaping: Vec<bool>,
    pub has_non_escaping: Vec<bool>,
    pub max_iter: u32,
    pub escape_log_threshold: f64,
}

impl EscapeGrid {
    pub fn cell(&self, ix: usize, iy: usize) -> Classification {
        self.cells[iy * self.nx + ix]
    }

    /// Boundary mask: cells holding escaping samples adjacent (in the
    /// 8-neighborhood, or through their own mixed samples) to
    /// bounded/undecided samples.
    pub fn boundary_mask(&self) -> Vec<bool> {
        let (nx, ny) = (self.nx, self.ny);
        let mut mask = vec![false; nx * ny];
        for iy in 0..ny {
            for ix in 0..nx {
                let i = iy * nx + ix;
                if !self.has_escaping[i] {
                    continue;
                }
                let mut touches = self.has_non_escaping[i];
                if !touches {
                    'nb: for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            if dx == 0 && dy == 0 {
                                continue;
                            }
                            let (jx, jy) = (ix as i64 + dx, iy as i64 + dy);
                            if jx < 0 || jy < 0 || jx >= nx as i64 || jy >= ny as i64 {
                                continue;
                            }
                            if self.has_non_escaping[jy as usize * nx + jx as usize] {
                                touches = true;
                                break 'nb;
                            }
                        }
                    }
                }
                mask[i] = touches;
            }
        }
        mask
    }

    /// Mask of all cells containing escaping samples.
    pub fn escaping_mask(&self) -> Vec<bool> {
        self.has_escaping.clone()
    }
}

fn grid_cells(window: &GridWindow, epsilon: f64) -> Result<(usize, usize)> {
    let nxf = window.width() / epsilon;
    let nyf = window.height() / epsilon;
    let nx = nxf.round() as usize;
    let ny = nyf.round() as usize;
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidInput("window too small for epsilon".into()));
    }
    if (nxf - nx as f64).abs() > 1e-9 * nxf.max(1.0)
        || (nyf - ny as f64).abs() > 1e-9 * nyf.max(1.0)
    {
        return Err(Error::InvalidInput(format!(
            "epsilon {epsilon} does not divide the window commensurably"
        )));
    }
    Ok((nx, ny))
}

/// Classify a window at cell size epsilon and report the grid plus its
/// escaping-boundary mask.
pub fn julia_proxy_grid(
    f: &FunctionSpec,
    window: &GridWindow,
    epsilon: f64,
    samples_per_cell: usize,
    max_iter: u32,
    policy: &EscapePolicy,
    seed: u64,
) -> Result<(EscapeGrid, Vec<bool>)> {
    let (nx, ny) = grid_cells(window, epsilon)?;
    let samples = samples_per_cell.max(1);
    let rows: Vec<Vec<(Classification, bool, bool)>> = (0..ny)
        .into_par_iter()
        .map(|iy| {
            let mut row = Vec::with_capacity(nx);
            for ix in 0..nx {
                let cx = window.x0 + (ix as f64 + 0.5) * epsilon;
                let cy = window.y0 + (iy as f64 + 0.5) * epsilon;
                let mut esc = false;
                let mut non = false;
                let mut first: Option<u32> = None;
                let mut all_esc = true;
                let mut all_bnd = true;
                for s in 0..samples {
                    let (px, py) = if s == 0 {
                        (cx, cy)
                    } else {
                        let mut rng = ChaCha8Rng::seed_from_u64(
                            seed ^ (ix as u64)
                                .wrapping_mul(0x9e3779b97f4a7c15)
                                .wrapping_add((iy as u64) << 20)
                                .wrapping_add(s as u64),
                        );
                        (
                            cx + (rng.random_range(-0.5..0.5)) * epsilon,
                            cy + (rng.random_range(-0.5..0.5)) * epsilon,
                        )
                    };
                    match escape_classify(f, Complex64::new(px, py), max_iter, policy) {
                        Classification::Escaping { first_passage } => {
                            esc = true;
                            all_bnd = false;
                            first = Some(first.map_or(first_passage, |v: u32| v.min(first_passage)));
                        }
                        Classification::Bounded => {
                            non = true;
                            all_esc = false;
                        }
                        Classification::Undecided => {
                            non = true;
                            all_esc = false;
                            all_bnd = false;
                        }
                    }
                }
                let class = if all_esc {
                    Classification::Escaping {
                        first_passage: first.unwrap_or(0),
                    }
                } else if all_bnd {
                    Classification::Bounded
                } else {
                    Classification::Undecided
                };
                row.push((class, esc, non));
            }
            row
        })
        .collect();
    let mut cells = Vec::with_capacity(nx * ny);
    let mut has_escaping = Vec::with_capacity(nx * ny);
    let mut has_non = Vec::with_capacity(nx * ny);
    for row in rows {
        for (c, e, n) in row {
            cells.push(c);
            has_escaping.push(e);
            has_non.push(n);
        }
    }
    let grid = EscapeGrid {
        window: *window,
        epsilon,
        nx,
        ny,
        cells,
        has_escaping,
        has_non_escaping: has_non,
        max_iter,
        escape_log_threshold: policy.escape_log_threshold,
    };
    let mask = grid.boundary_mask();
    Ok((grid, mask))
}

// ---------------------------------------------------------------------------
// box counting
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskTarget {
    EscapingBoundary,
    FullEscaping,
    CustomMask,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxCountCurve {
    pub window: GridWindow,
    pub target: MaskTarget,
    /// (epsilon, box count), ascending epsilon.
    pub points: Vec<(f64, usize)>,
    pub slope: f64,
    pub slope_stderr: f64,
    pub fit_range: (f64, f64),
}

/// Coarsen a mask by an integer factor: a block is set when any of its
/// sub-cells is set.
pub fn downsample_mask(mask: &[bool], nx: usize, ny: usize, factor: usize) -> (Vec<bool>, usize, usize) {
    let mx = nx.div_ceil(factor);
    let my = ny.div_ceil(factor);
    let mut out = vec![false; mx * my];
    for iy in 0..ny {
        for ix in 0..nx {
            if mask[iy * nx + ix] {
                out[(iy / factor) * mx + ix / factor] = true;
            }
        }
    }
    (out, mx, my)
}

/// Dyadic box counts derived from the finest mask: epsilon, 2 epsilon, ...
pub fn dyadic_counts(
    mask: &[bool],
    nx: usize,
    ny: usize,
    epsilon_finest: f64,
    octaves: usize,
) -> Vec<(f64, usize)> {
    let mut out = Vec::with_capacity(octaves + 1);
    out.push((
        epsilon_finest,
        mask.iter().filter(|&&b| b).count(),
    ));
    for j in 1..=octaves {
        let factor = 1usize << j;
        let (m, mx, my) = downsample_mask(mask, nx, ny, factor);
        let _ = (mx, my);
        out.push((
            epsilon_finest * factor as f64,
            m.iter().filter(|&&b| b).count(),
        ));
    }
    out
}

/// Least-squares slope of log N against log(1/epsilon). The coarsest
/// octave is excluded from the fit by default (transient regime).
pub fn box_count_fit(
    window: &GridWindow,
    target: MaskTarget,
    points: &[(f64, usize)],
) -> Result<BoxCountCurve> {
    if points.len() < 4 {
        return Err(Error::InsufficientData(
            "box-count fit needs at least 4 scales".into(),
        ));
    }
    let mut pts: Vec<(f64, usize)> = points.to_vec();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let (eps_min, eps_max) = (pts[0].0, pts[pts.len() - 1].0);
    if eps_max / eps_min < 4.0 * (1.0 - 1e-9) {
        return Err(Error::InsufficientData(
            "box-count scales must span at least two octaves".into(),
        ));
    }
    for w in pts.windows(2) {
        let ratio = w[1].0 / w[0].0;
        let log2r = ratio.log2();
        if (log2r - log2r.round()).abs() > 1e-6 || log2r < 1.0 - 1e-6 {
            return Err(Error::InvalidInput(
                "box-count scales must be nested dyadically".into(),
            ));
        }
        if w[1].1 > w[0].1 {
            return Err(Error::InvalidInput(
                "box counts must be nonincreasing in epsilon".into(),
            ));
        }
    }
    if let Some(&(eps, _)) = pts.iter().find(|(_, n)| *n == 0) {
        return Err(Error::DegenerateFit(format!("N({eps}) = 0")));
    }
    // drop the coarsest octave
    let fit_pts: Vec<(f64, usize)> = pts
        .iter()
        .copied()
        .filter(|(e, _)| *e <= eps_max / 2.0 * (1.0 + 1e-9))
        .collect();
    let fit_pts = if fit_pts.len() >= 3 { fit_pts } else { pts.clone() };
    let xs: Vec<f64> = fit_pts.iter().map(|(e, _)| (1.0 / e).ln()).collect();
    let ys: Vec<f64> = fit_pts.iter().map(|(_, n)| (*n as f64).ln()).collect();
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let residuals: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let pred = ybar + slope * (x - xbar);
            (y - pred) * (y - pred)
        })
        .sum();
    let dof = (xs.len() as f64 - 2.0).max(1.0);
    let slope_stderr = (residuals / dof / sxx).sqrt();
    Ok(BoxCountCurve {
        window: *window,
        target,
        points: pts,
        slope,
        slope_stderr,
        fit_range: (
            fit_pts.first().unwrap().0,
            fit_pts.last().unwrap().0,
        ),
    })
}

/// Classify a window at the finest scale, then fit dyadic box counts of
/// the requested mask.
pub fn window_curve(
    f: &FunctionSpec,
    window: &GridWindow,
    epsilon_finest: f64,
    octaves: usize,
    samples_per_cell: usize,
    max_iter: u32,
    policy: &EscapePolicy,
    seed: u64,
    target: MaskTarget,
) -> Result<BoxCountCurve> {
    let (grid, boundary) = julia_proxy_grid(
        f,
        window,
        epsilon_finest,
        samples_per_cell,
        max_iter,
        policy,
        seed,
    )?;
    let mask = match target {
        MaskTarget::EscapingBoundary => boundary,
        MaskTarget::FullEscaping => grid.escaping_mask(),
        MaskTarget::CustomMask => {
            return Err(Error::InvalidInput(
                "custom masks are fitted via box_count_fit directly".into(),
            ))
        }
    };
    let counts = dyadic_counts(&mask, grid.nx, grid.ny, epsilon_finest, octaves);
    box_count_fit(window, target, &counts)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowComparison {
    pub curves: Vec<BoxCountCurve>,
    pub max_pairwise_slope_diff: f64,
}

/// Per-window fits plus the maximal pairwise slope difference.
pub fn window_independence(
    f: &FunctionSpec,
    windows: &[GridWindow],
    epsilon_finest: f64,
    octaves: usize,
    samples_per_cell: usize,
    max_iter: u32,
    policy: &EscapePolicy,
    seed: u64,
) -> Result<WindowComparison> {
    if windows.len() < 2 {
        return Err(Error::InsufficientData(
            "window independence needs at least two windows".into(),
        ));
    }
    let mut curves = Vec::with_capacity(windows.len());
    for (i, w) in windows.iter().enumerate() {
        let curve = match window_curve(
            f,
            w,
            epsilon_finest * w.width() / windows[0].width(),
            octaves,
            samples_per_cell,
            max_iter,
            policy,
            seed,
            MaskTarget::EscapingBoundary,
        ) {
            Ok(c) => c,
            Err(Error::DegenerateFit(_)) => return Err(Error::EmptyWindow(i)),
            Err(e) => return Err(e),
        };
        if curve.points.last().map(|&(_, n)| n) == Some(0) {
            return Err(Error::EmptyWindow(i));
        }
        curves.push(curve);
    }
    let mut max_diff = 0.0f64;
    for i in 0..curves.len() {
        for j in i + 1..curves.len() {
            max_diff = max_diff.max((curves[i].slope - curves[j].slope).abs());
        }
    }
    Ok(WindowComparison {
        curves,
        max_pairwise_slope_diff: max_diff,
    })
}

// ---------------------------------------------------------------------------
// reference masks for oracle tests and the dimension suite
// ---------------------------------------------------------------------------

/// True when [a, b] meets the depth-d middle-thirds construction on [0, 1].
fn interval_meets_cantor(a: f64, b: f64, depth: usize) -> bool {
    if b < 0.0 || a > 1.0 {
        return false;
    }
    if depth == 0 {
        return true;
    }
    interval_meets_cantor(3.0 * a, 3.0 * b, depth - 1)
        || interval_meets_cantor(3.0 * a - 2.0, 3.0 * b - 2.0, depth - 1)
}

/// Product-of-Cantor-sets mask on a 2^k by 2^k grid over the unit square.
pub fn cantor_dust_mask(resolution_exp: u32, depth: usize) -> (Vec<bool>, usize) {
    let n = 1usize << resolution_exp;
    let line: Vec<bool> = (0..n)
        .map(|i| {
            let a = i as f64 / n as f64;
            let b = (i + 1) as f64 / n as f64;
            interval_meets_cantor(a, b, depth)
        })
        .collect();
    let mut mask = vec![false; n * n];
    for iy in 0..n {
        if !line[iy] {
            continue;
        }
        for ix in 0..n {
            mask[iy * n + ix] = line[ix] && line[iy];
        }
    }
    (mask, n)
}

/// Mask of grid cells meeting the circle |z| = radius, exact geometry.
pub fn circle_mask(window: &GridWindow, n: usize, radius: f64) -> Vec<bool> {
    let eps_x = window.width() / n as f64;
    let eps_y = window.height() / n as f64;
    let mut mask = vec![false; n * n];
    for iy in 0..n {
        for ix in 0..n {
            let x0 = window.x0 + ix as f64 * eps_x;
            let y0 = window.y0 + iy as f64 * eps_y;
            let (x1, y1) = (x0 + eps_x, y0 + eps_y);
            // distance range from the origin over the cell
            let dx = if x0 > 0.0 {
                x0
            } else if x1 < 0.0 {
                -x1
            } else {
                0.0
            };
            let dy = if y0 > 0.0 {
                y0
            } else if y1 < 0.0 {
                -y1
            } else {
                0.0
            };
            let dmin = (dx * dx + dy * dy).sqrt();
            let corners = [
                (x0, y0),
                (x0, y1),
                (x1, y0),
                (x1, y1),
            ];
            let dmax = corners
                .iter()
                .map(|(x, y)| (x * x + y * y).sqrt())
                .fold(0.0f64, f64::max);
            mask[iy * n + ix] = dmin <= radius && radius <= dmax;
        }
    }
    mask
}
