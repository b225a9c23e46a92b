//! Disparity maps: robust standardization and the perspective → spherical
//! conversion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::TangentCamera;
use crate::image::{ErpImage, Raster, TangentImage};

/// What a disparity value is the inverse of.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Semantics {
    /// Inverse depth along the tangent camera's optical axis.
    Perspective,
    /// Inverse radial distance from the centre of projection.
    Spherical,
}

/// Image domain a disparity map lives on.
#[derive(Clone, Debug, PartialEq)]
pub enum DisparityDomain {
    Tangent(TangentImage),
    Erp(ErpImage),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DisparityMap {
    pub domain: DisparityDomain,
    semantics: Semantics,
    standardized: bool,
}

impl DisparityMap {
    pub fn tangent(image: TangentImage, semantics: Semantics) -> Result<Self> {
        if image.raster.channels != 1 {
            return Err(Error::Parameter("disparity maps are single channel".into()));
        }
        Ok(Self {
            domain: DisparityDomain::Tangent(image),
            semantics,
            standardized: false,
        })
    }

    pub fn erp(image: ErpImage, semantics: Semantics) -> Result<Self> {
        if image.raster.channels != 1 {
            return Err(Error::Parameter("disparity maps are single channel".into()));
        }
        Ok(Self {
            domain: DisparityDomain::Erp(image),
            semantics,
            standardized: false,
        })
    }

    pub fn semantics(&self) -> Semantics {
        self.semantics
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn raster(&self) -> &Raster {
        match &self.domain {
            DisparityDomain::Tangent(t) => &t.raster,
            DisparityDomain::Erp(e) => &e.raster,
        }
    }

    pub(crate) fn raster_mut(&mut self) -> &mut Raster {
        match &mut self.domain {
            DisparityDomain::Tangent(t) => &mut t.raster,
            DisparityDomain::Erp(e) => &mut e.raster,
        }
    }

    pub fn camera(&self) -> Option<&TangentCamera> {
        match &self.domain {
            DisparityDomain::Tangent(t) => Some(&t.camera),
            DisparityDomain::Erp(_) => None,
        }
    }

    pub fn as_tangent(&self) -> Option<&TangentImage> {
        match &self.domain {
            DisparityDomain::Tangent(t) => Some(t),
            DisparityDomain::Erp(_) => None,
        }
    }

    /// Same map with new values on the same mask; keeps the semantic tags.
    pub(crate) fn with_raster(&self, raster: Raster) -> Self {
        let mut out = self.clone();
        *out.raster_mut() = raster;
        out
    }

    /// Subtracts the median and divides by the mean absolute deviation about
    /// it, both taken over valid pixels.
    pub fn standardize(&self) -> Result<DisparityMap> {
        let values = self.raster().valid_values();
        if values.is_empty() {
            return Err(Error::Degenerate(
                "disparity map has no valid pixels".into(),
            ));
        }
        let (median, mad) = median_and_mad(&values)?;
        if mad < 1e-12 {
            return Err(Error::Degenerate(format!(
                "disparity map has zero spread (mean absolute deviation {mad:e})"
            )));
        }
        let mut out = self.with_raster(self.raster().map_valid(|v| (v - median) / mad));
        out.standardized = true;
        Ok(out)
    }

    /// Multiplies perspective disparity by the cosine between each pixel ray
    /// and the optical axis, giving inverse radial distance.
    pub fn convert_to_spherical(&self) -> Result<DisparityMap> {
        if self.semantics != Semantics::Perspective {
            return Err(Error::Misuse(
                "map already holds spherical disparity".into(),
            ));
        }
        let DisparityDomain::Tangent(img) = &self.domain else {
            return Err(Error::Misuse(
                "perspective disparity must live on a tangent image".into(),
            ));
        };
        let camera = &img.camera;
        let mut raster = img.raster.clone();
        for row in 0..raster.height {
            for col in 0..raster.width {
                let i = raster.index(col, row);
                if raster.mask[i] {
                    let (x, y) = camera.pixel_to_plane(col as f64, row as f64);
                    raster.data[i] *= ray_cosine(x, y);
                }
            }
        }
        let mut out = self.with_raster(raster);
        out.semantics = Semantics::Spherical;
        Ok(out)
    }
}

/// Cosine between the ray through plane point `(x, y)` and the optical axis.
#[inline]
pub fn ray_cosine(x: f64, y: f64) -> f64 {
    1.0 / (1.0 + x * x + y * y).sqrt()
}

/// Median (lower median for even counts) and mean absolute deviation about
/// that median.
pub fn median_and_mad(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Parameter("median of an empty set".into()));
    }
    let mut sorted = values.to_vec();
    let k = (sorted.len() - 1) / 2;
    let (_, median, _) = sorted.select_nth_unstable_by(k, f64::total_cmp);
    let median = *median;
    let mad = values.iter().map(|v| (v - median).abs()).sum::<f64>() / values.len() as f64;
    Ok((median, mad))
}
