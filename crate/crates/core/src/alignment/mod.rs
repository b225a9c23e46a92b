//! Global deformable alignment of the per-face spherical disparity maps.
//!
//! Each face carries a [`DeformationGrid`] of `(scale, offset)` pairs that is
//! bilinearly interpolated over the tangent image. The grids of all faces
//! are optimized jointly so that overlapping maps agree, the fields stay
//! smooth and scales stay away from zero; the solve is repeated over a
//! coarse-to-fine schedule of grid sizes.

mod energy;
mod grid;
pub mod lbfgs;
mod overlap;

pub use energy::{energy, energy_gradient, AlignmentProblem, EnergyTerms, GridGradient};
pub use grid::{apply_deformation, bilinear_weights, DeformationGrid};
pub use overlap::{
    build_overlap_sets, overlap_disagreement, Disagreement, OverlapSample, OverlapSet,
};

pub(crate) use overlap::in_pole_cap;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::disparity::DisparityMap;
use crate::error::{Error, Result};
use lbfgs::{LbfgsOptions, LbfgsReport};

/// Scales at or below this value are infeasible for the line search.
pub const MIN_SCALE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignmentConfig {
    pub lambda_smoothness: f64,
    pub lambda_scale: f64,
    /// Fraction of each pairwise overlap sampled per scale.
    pub sample_fraction: f64,
    pub iterations_per_scale: usize,
    /// `(cols, rows)` of the deformation grid at each scale, coarse to fine.
    pub grid_schedule: Vec<(usize, usize)>,
    /// Radius in degrees of the polar caps left out of the overlap sets.
    pub pole_exclusion_deg: f64,
    pub rng_seed: u64,
    pub lbfgs_memory: usize,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        Self {
            lambda_smoothness: 40.0,
            lambda_scale: 0.007,
            sample_fraction: 0.01,
            iterations_per_scale: 50,
            grid_schedule: vec![(4, 3), (8, 7), (16, 14)],
            pole_exclusion_deg: 0.0,
            rng_seed: 0,
            lbfgs_memory: 10,
        }
    }
}

impl AlignmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "sample_fraction {} outside (0, 1]",
                self.sample_fraction
            )));
        }
        if self.lambda_smoothness < 0.0 || self.lambda_scale < 0.0 {
            return Err(Error::Config(
                "regularization weights must be non-negative".into(),
            ));
        }
        if !(0.0..90.0).contains(&self.pole_exclusion_deg) {
            return Err(Error::Config(format!(
                "pole_exclusion_deg {} outside [0, 90)",
                self.pole_exclusion_deg
            )));
        }
        for w in self.grid_schedule.windows(2) {
            if w[1].0 * w[1].1 < w[0].0 * w[0].1 {
                return Err(Error::Config(format!(
                    "grid schedule must not shrink: {:?} after {:?}",
                    w[1], w[0]
                )));
            }
        }
        if let Some(&(c, r)) = self.grid_schedule.iter().find(|(c, r)| *c < 2 || *r < 2) {
            return Err(Error::Config(format!("grid {c}x{r} must be at least 2x2")));
        }
        Ok(())
    }

    fn lbfgs_options(&self) -> LbfgsOptions {
        LbfgsOptions {
            max_iterations: self.iterations_per_scale,
            memory: self.lbfgs_memory,
            ..LbfgsOptions::default()
        }
    }
}

/// Outcome of one optimization at a fixed grid size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleOutcome {
    pub cols: usize,
    pub rows: usize,
    pub grids: Vec<DeformationGrid>,
    pub initial: EnergyTerms,
    pub last: EnergyTerms,
    pub sample_count: usize,
    pub report: LbfgsReport,
}

/// Runs the quasi-Newton solve for one grid size, starting from `grids`.
pub fn optimize_scale(
    grids: &[DeformationGrid],
    overlaps: &[OverlapSet],
    config: &AlignmentConfig,
) -> Result<ScaleOutcome> {
    let first = grids
        .first()
        .ok_or_else(|| Error::Parameter("no deformation grids".into()))?;
    let (cols, rows) = (first.cols, first.rows);
    let problem = AlignmentProblem::new(grids.len(), cols, rows, overlaps, config)?;
    let x0 = problem.pack(grids)?;
    if problem.min_scale(&x0) <= MIN_SCALE {
        return Err(Error::Domain(
            "initial grids have non-positive scales".into(),
        ));
    }
    let initial = problem.energy(&x0)?;
    let objective = |x: &[f64], g: &mut [f64]| {
        if problem.min_scale(x) <= MIN_SCALE {
            return None;
        }
        problem.energy_and_gradient(x, g).ok().map(|e| e.total)
    };
    let (x, report) = lbfgs::minimize(objective, x0, &config.lbfgs_options());
    if !report.converged_cleanly() {
        warn!(
            "{cols}x{rows} alignment stopped early ({:?}) after {} iterations",
            report.termination, report.iterations
        );
    }
    let last = problem.energy(&x)?;
    let mut out = problem.unpack(&x);
    for (g, src) in out.iter_mut().zip(grids) {
        g.face_index = src.face_index;
    }
    Ok(ScaleOutcome {
        cols,
        rows,
        grids: out,
        initial,
        last,
        sample_count: problem.sample_count(),
        report,
    })
}

/// Final aligned maps plus the per-scale record of the solve.
#[derive(Clone, Debug)]
pub struct AlignmentOutcome {
    /// Standardized, deformed spherical maps (tangent domain).
    pub maps: Vec<DisparityMap>,
    pub scales: Vec<ScaleOutcome>,
}

/// Standardizes the maps once, then for every grid size in the schedule
/// samples overlaps, optimizes the grids from identity and applies them.
pub fn align_multiscale(
    maps: &[DisparityMap],
    erp_width: usize,
    erp_height: usize,
    config: &AlignmentConfig,
) -> Result<AlignmentOutcome> {
    config.validate()?;
    let mut current = maps
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let face = m.camera().map_or(i, |c| c.face_index);
            m.standardize().map_err(|e| e.for_face(face))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut scales = Vec::with_capacity(config.grid_schedule.len());
    for (k, &(cols, rows)) in config.grid_schedule.iter().enumerate() {
        let seed = config.rng_seed.wrapping_add(k as u64);
        let overlaps = build_overlap_sets(&current, erp_width, erp_height, config, seed)?;
        let grids: Vec<_> = current
            .iter()
            .enumerate()
            .map(|(i, m)| {
                DeformationGrid::identity(m.camera().map_or(i, |c| c.face_index), cols, rows)
            })
            .collect();
        let outcome = optimize_scale(&grids, &overlaps, config)?;
        debug!(
            "{cols}x{rows}: {} samples, energy {:.6e} -> {:.6e} (alignment {:.3e} -> {:.3e})",
            outcome.sample_count,
            outcome.initial.total,
            outcome.last.total,
            outcome.initial.alignment,
            outcome.last.alignment
        );
        current = current
            .iter()
            .zip(&outcome.grids)
            .map(|(m, g)| apply_deformation(m, g).map_err(|e| e.for_face(g.face_index)))
            .collect::<Result<Vec<_>>>()?;
        scales.push(outcome);
    }
    Ok(AlignmentOutcome {
        maps: current,
        scales,
    })
}
