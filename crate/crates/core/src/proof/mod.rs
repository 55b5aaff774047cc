//! The escaping-point construction engine: candidate annulus sets, disk
//! packings after zero exclusion, targeted inverse branches, and the nested
//! pullback cascade with its per-level verification checks.

mod branch;
mod cascade;
mod sets;

pub use branch::{inverse_branch, BranchWindow};
pub use cascade::{
    build_cascade, dimension_lower_bound, CascadeLevel, ConstructionTrace, DimensionEstimate,
    LevelRegime,
};
pub use sets::{candidate_set, exclude_and_pack, CandidateSet, PackedCenter, PackedSet};

use serde::{Deserialize, Serialize};

/// Radii with natural log above this run in the log-radius regime (the
/// radius itself no longer fits in an f64 value).
pub const PLAIN_RADIUS_LOG: f64 = 600.0;

/// One recorded inequality check, named by what it verifies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckRecord {
    pub tag: String,
    pub description: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// False when the check's hypothesis (e.g. a delta range) is not met,
    /// in which case `holds` reports the raw comparison anyway.
    pub applicable: bool,
}

impl CheckRecord {
    pub fn new(tag: &str, description: &str, lhs: f64, rhs: f64, holds: bool) -> Self {
        CheckRecord {
            tag: tag.to_string(),
            description: description.to_string(),
            lhs,
            rhs,
            holds,
            applicable: true,
        }
    }

    pub fn not_applicable(mut self) -> Self {
        self.applicable = false;
        self
    }
}

/// Tunables for the construction engine.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProofParams {
    /// Radial lattice lines; the angular count is ~ 2 pi times this.
    pub grid_density: usize,
    /// Monte Carlo samples for area estimates.
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for ProofParams {
    fn default() -> Self {
        ProofParams {
            grid_density: 200,
            mc_samples: 40_000,
            seed: 1,
        }
    }
}
