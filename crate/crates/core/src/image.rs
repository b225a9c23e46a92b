//! Masked scalar/RGB rasters on the ERP grid and on tangent images.

use crate::error::{Error, Result};
use crate::geometry::{check_erp_dims, TangentCamera};

/// Row-major, channel-interleaved `f64` samples with a per-pixel validity mask.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
    pub mask: Vec<bool>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
            mask: vec![false; width * height],
        }
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
            mask: vec![true; width * height],
        }
    }

    /// Wraps single-channel data; non-finite samples are masked out.
    pub fn from_scalar(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Parameter(format!(
                "expected {} samples for {width}x{height}, got {}",
                width * height,
                data.len()
            )));
        }
        let mask = data.iter().map(|v| v.is_finite()).collect();
        Ok(Self {
            width,
            height,
            channels: 1,
            data,
            mask,
        })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize, channel: usize) -> f64 {
        self.data[self.index(col, row) * self.channels + channel]
    }

    #[inline]
    pub fn is_valid(&self, col: usize, row: usize) -> bool {
        self.mask[self.index(col, row)]
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Channel-0 values at valid pixels, in raster order.
    pub fn valid_values(&self) -> Vec<f64> {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| self.data[i * self.channels])
            .collect()
    }

    /// Applies `f` to every valid sample of every channel.
    pub fn map_valid(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        let mut out = self.clone();
        for (i, &valid) in self.mask.iter().enumerate() {
            if valid {
                for c in 0..self.channels {
                    let k = i * self.channels + c;
                    out.data[k] = f(self.data[k]);
                }
            }
        }
        out
    }

    /// Rounds every sample through `f32`, the precision of the on-disk formats.
    pub fn quantize_f32(&mut self) {
        for v in &mut self.data {
            *v = *v as f32 as f64;
        }
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        for (i, &valid) in self.mask.iter().enumerate() {
            if valid {
                let px = &self.data[i * self.channels..(i + 1) * self.channels];
                if px.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Domain(format!(
                        "non-finite sample at pixel ({}, {})",
                        i % self.width,
                        i / self.width
                    )));
                }
            }
        }
        Ok(())
    }
}

/// An equirectangular image (`width = 2·height`).
#[derive(Clone, Debug, PartialEq)]
pub struct ErpImage {
    pub raster: Raster,
}

impl ErpImage {
    pub fn new(raster: Raster) -> Result<Self> {
        check_erp_dims(raster.width, raster.height)?;
        if raster.channels != 1 && raster.channels != 3 {
            return Err(Error::Parameter(format!(
                "ERP images carry 1 or 3 channels, got {}",
                raster.channels
            )));
        }
        raster.check_finite()?;
        Ok(Self { raster })
    }

    pub fn width(&self) -> usize {
        self.raster.width
    }

    pub fn height(&self) -> usize {
        self.raster.height
    }
}

/// An image rendered on a tangent camera's plane.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentImage {
    pub camera: TangentCamera,
    pub raster: Raster,
}

impl TangentImage {
    pub fn new(camera: TangentCamera, raster: Raster) -> Result<Self> {
        if raster.width != camera.width_px || raster.height != camera.height_px {
            return Err(Error::Parameter(format!(
                "face {}: image is {}x{}, camera expects {}x{}",
                camera.face_index, raster.width, raster.height, camera.width_px, camera.height_px
            )));
        }
        if raster.channels != 1 && raster.channels != 3 {
            return Err(Error::Parameter(format!(
                "tangent images carry 1 or 3 channels, got {}",
                raster.channels
            )));
        }
        raster.check_finite()?;
        Ok(Self { camera, raster })
    }
}
