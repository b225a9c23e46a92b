//! Merging aligned per-face ERP disparity maps into one spherical map.

mod poisson;
mod weights;

pub use poisson::{blend_poisson, SolveReport};
pub use weights::{compute_weights, BlendWeightField, WeightScheme};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ErpImage, Raster};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlendConfig {
    pub lambda_fidelity: f64,
    /// Angle from the tangent point where radial weights start to fall off.
    pub radial_decay_start_deg: f64,
    /// Fraction of each corner-to-principal-point diagonal over which frustum
    /// weights fall off.
    pub frustum_decay_start: f64,
    /// Relative residual at which the Poisson solve stops.
    pub solver_tolerance: f64,
    pub solver_max_iterations: usize,
    /// Polar caps (degrees) that keep the nearest-neighbour stitch instead of
    /// being solved for.
    pub pole_passthrough_deg: f64,
}

impl Default for BlendConfig {
    fn default() -> Self {
        Self {
            lambda_fidelity: 0.1,
            radial_decay_start_deg: 15.0,
            frustum_decay_start: 0.3,
            solver_tolerance: 1e-8,
            solver_max_iterations: 5000,
            pole_passthrough_deg: 0.0,
        }
    }
}

impl BlendConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda_fidelity", self.lambda_fidelity),
            ("radial_decay_start_deg", self.radial_decay_start_deg),
            ("frustum_decay_start", self.frustum_decay_start),
            ("solver_tolerance", self.solver_tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.frustum_decay_start > 1.0 {
            return Err(Error::Config(
                "frustum_decay_start must not exceed 1".into(),
            ));
        }
        if !(0.0..90.0).contains(&self.pole_passthrough_deg) {
            return Err(Error::Config("pole_passthrough_deg outside [0, 90)".into()));
        }
        Ok(())
    }
}

/// Checks that maps and weight fields share one ERP grid and face order.
pub(crate) fn check_maps(
    maps: &[ErpImage],
    weights: &[BlendWeightField],
) -> Result<(usize, usize)> {
    let first = maps
        .first()
        .ok_or_else(|| Error::Parameter("no maps to blend".into()))?;
    if maps.len() != weights.len() {
        return Err(Error::Parameter(format!(
            "{} maps but {} weight fields",
            maps.len(),
            weights.len()
        )));
    }
    let (w, h) = (first.width(), first.height());
    for (i, (m, f)) in maps.iter().zip(weights).enumerate() {
        if m.width() != w || m.height() != h || f.width != w || f.height != h {
            return Err(Error::Parameter(format!(
                "face {i}: blend inputs are not on one grid"
            )));
        }
        if m.raster.channels != 1 {
            return Err(Error::Parameter(format!(
                "face {i}: disparity maps are single channel"
            )));
        }
    }
    Ok((w, h))
}

/// Nearest-neighbour stitch: every pixel copies the face that owns it.
pub fn stitch_nn(maps: &[ErpImage], weights: &[BlendWeightField]) -> Result<ErpImage> {
    let (w, h) = check_maps(maps, weights)?;
    if weights.iter().any(|f| f.scheme != WeightScheme::Nn) {
        return Err(Error::Misuse(
            "stitch_nn needs nearest-neighbour weights".into(),
        ));
    }
    let mut out = Raster::new(w, h, 1);
    for (map, field) in maps.iter().zip(weights) {
        for (p, _) in field.iter() {
            if map.raster.mask[p] {
                out.mask[p] = true;
                out.data[p] = map.raster.data[p];
            }
        }
    }
    Ok(ErpImage { raster: out })
}

/// Per-pixel convex combination `Σ_a ω_a·D̃_a`, renormalized over the faces
/// whose map is valid at the pixel.
pub fn blend_weighted(maps: &[ErpImage], weights: &[BlendWeightField]) -> Result<ErpImage> {
    let (w, h) = check_maps(maps, weights)?;
    let mut sum = vec![0.0; w * h];
    let mut total = vec![0.0; w * h];
    for (map, field) in maps.iter().zip(weights) {
        for (p, wt) in field.iter() {
            if map.raster.mask[p] {
                sum[p] += wt * map.raster.data[p];
                total[p] += wt;
            }
        }
    }
    let mut out = Raster::new(w, h, 1);
    for p in 0..w * h {
        if total[p] > 0.0 {
            out.mask[p] = true;
            out.data[p] = if (total[p] - 1.0).abs() < 1e-12 {
                sum[p]
            } else {
                sum[p] / total[p]
            };
        }
    }
    Ok(ErpImage { raster: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_icosahedron_layout;

    fn constant_maps(values: &[f64], w: usize, h: usize) -> Vec<ErpImage> {
        values
            .iter()
            .map(|&v| ErpImage::new(Raster::filled(w, h, 1, v)).unwrap())
            .collect()
    }

    #[test]
    fn identical_maps_pass_through_every_scheme() {
        let (w, h) = (128, 64);
        let layout = build_icosahedron_layout(0.3, 400, 346).unwrap();
        let maps = constant_maps(&[0.75; 20], w, h);
        let cfg = BlendConfig::default();
        for scheme in [
            WeightScheme::Mean,
            WeightScheme::Radial,
            WeightScheme::Frustum,
        ] {
            let weights = compute_weights(&layout, scheme, w, h, &cfg).unwrap();
            let out = blend_weighted(&maps, &weights).unwrap();
            assert!(out.raster.data.iter().all(|v| (v - 0.75).abs() < 1e-12));
        }
        let nn = compute_weights(&layout, WeightScheme::Nn, w, h, &cfg).unwrap();
        let stitched = stitch_nn(&maps, &nn).unwrap();
        assert_eq!(stitched.raster.data, maps[0].raster.data);
        let onehot = blend_weighted(&maps, &nn).unwrap();
        assert_eq!(onehot, stitched);
        assert!(matches!(
            stitch_nn(
                &maps,
                &compute_weights(&layout, WeightScheme::Mean, w, h, &cfg).unwrap()
            ),
            Err(Error::Misuse(_))
        ));
    }

    #[test]
    fn nn_stitch_of_two_halves_is_a_hard_step() {
        let (w, h) = (128, 64);
        let layout = build_icosahedron_layout(0.3, 400, 346).unwrap();
        let values: Vec<f64> = (0..20).map(|f| if f < 10 { 0.0 } else { 1.0 }).collect();
        let maps = constant_maps(&values, w, h);
        let nn = compute_weights(&layout, WeightScheme::Nn, w, h, &BlendConfig::default()).unwrap();
        let stitched = stitch_nn(&maps, &nn).unwrap();
        assert!(stitched.raster.data.iter().all(|&v| v == 0.0 || v == 1.0));
        assert!(stitched.raster.data.contains(&0.0) && stitched.raster.data.contains(&1.0));
    }

    #[test]
    fn poisson_with_constant_anchor_is_constant() {
        let (w, h) = (64, 32);
        let layout = build_icosahedron_layout(0.3, 400, 346).unwrap();
        let cfg = BlendConfig::default();
        let maps = constant_maps(&[3.0; 20], w, h);
        let frustum = compute_weights(&layout, WeightScheme::Frustum, w, h, &cfg).unwrap();
        let anchor = ErpImage::new(Raster::filled(w, h, 1, 3.0)).unwrap();
        let (out, report) = blend_poisson(&maps, &frustum, &anchor, &cfg).unwrap();
        assert!(report.converged);
        assert!(out.raster.data.iter().all(|&v| v == 3.0));
    }

    #[test]
    fn poisson_respects_pole_passthrough() {
        let (w, h) = (64, 32);
        let layout = build_icosahedron_layout(0.3, 400, 346).unwrap();
        let cfg = BlendConfig {
            pole_passthrough_deg: 25.0,
            ..BlendConfig::default()
        };
        let maps = constant_maps(&[1.0; 20], w, h);
        let frustum = compute_weights(&layout, WeightScheme::Frustum, w, h, &cfg).unwrap();
        let mut anchor = ErpImage::new(Raster::filled(w, h, 1, 1.0)).unwrap();
        anchor.raster.data[3] = 9.0; // top row, inside the cap
        let (out, _) = blend_poisson(&maps, &frustum, &anchor, &cfg).unwrap();
        assert_eq!(out.raster.data[3], 9.0);
    }
}
