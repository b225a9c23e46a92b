//! Resampling between the ERP grid and tangent images.
//!
//! Bilinear sampling is mask aware: corners that are masked out are dropped
//! and the remaining weights renormalized; a sample with no valid corner of
//! non-zero weight is itself masked.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{
    check_erp_dims, erp_pixel_direction, spherical_to_erp_unchecked, SphericalCoord, TangentCamera,
};
use crate::image::{ErpImage, Raster, TangentImage};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Filter {
    Nearest,
    #[default]
    Bilinear,
}

/// Samples `raster` at continuous pixel position `(x, y)` (centres at
/// integers). `wrap_x` wraps columns (ERP longitude); otherwise positions are
/// clamped to the outermost pixel centres. Writes `raster.channels` values
/// into `out` and returns whether the sample is valid.
pub fn sample(
    raster: &Raster,
    x: f64,
    y: f64,
    filter: Filter,
    wrap_x: bool,
    out: &mut [f64],
) -> bool {
    let w = raster.width;
    let h = raster.height;
    let ch = raster.channels;
    let y = y.clamp(0.0, (h - 1) as f64);
    let x = if wrap_x {
        x.rem_euclid(w as f64)
    } else {
        x.clamp(0.0, (w - 1) as f64)
    };
    match filter {
        Filter::Nearest => {
            let mut col = x.round() as usize;
            if col >= w {
                col = if wrap_x { 0 } else { w - 1 };
            }
            let row = (y.round() as usize).min(h - 1);
            let i = row * w + col;
            if !raster.mask[i] {
                return false;
            }
            out[..ch].copy_from_slice(&raster.data[i * ch..(i + 1) * ch]);
            true
        }
        Filter::Bilinear => {
            let x0 = x.floor();
            let y0 = y.floor();
            let fx = x - x0;
            let fy = y - y0;
            let c0 = (x0 as usize).min(w - 1);
            let r0 = (y0 as usize).min(h - 1);
            let c1 = if wrap_x {
                (c0 + 1) % w
            } else {
                (c0 + 1).min(w - 1)
            };
            let r1 = (r0 + 1).min(h - 1);
            let corners = [
                (c0, r0, (1.0 - fx) * (1.0 - fy)),
                (c1, r0, fx * (1.0 - fy)),
                (c0, r1, (1.0 - fx) * fy),
                (c1, r1, fx * fy),
            ];
            let mut total = 0.0;
            out[..ch].iter_mut().for_each(|v| *v = 0.0);
            for (c, r, wgt) in corners {
                let i = r * w + c;
                if wgt > 0.0 && raster.mask[i] {
                    total += wgt;
                    for (o, v) in out[..ch].iter_mut().zip(&raster.data[i * ch..(i + 1) * ch]) {
                        *o += wgt * v;
                    }
                }
            }
            if total <= 0.0 {
                return false;
            }
            if (total - 1.0).abs() > 1e-15 {
                out[..ch].iter_mut().for_each(|v| *v /= total);
            }
            true
        }
    }
}

/// Renders the tangent image seen by `camera` from an ERP image.
pub fn erp_to_tangent(erp: &ErpImage, camera: &TangentCamera, filter: Filter) -> TangentImage {
    let src = &erp.raster;
    let (tw, th, ch) = (camera.width_px, camera.height_px, src.channels);
    let mut out = Raster::new(tw, th, ch);
    out.data
        .par_chunks_mut(tw * ch)
        .zip(out.mask.par_chunks_mut(tw))
        .enumerate()
        .for_each(|(row, (data, mask))| {
            let mut px = [0.0; 3];
            for col in 0..tw {
                let (x, y) = camera.pixel_to_plane(col as f64, row as f64);
                let dir = SphericalCoord::from_unit_vector(&camera.plane_to_vector(x, y));
                let (u, v) = spherical_to_erp_unchecked(&dir, src.width, src.height);
                if sample(src, u, v, filter, true, &mut px) {
                    mask[col] = true;
                    data[col * ch..(col + 1) * ch].copy_from_slice(&px[..ch]);
                }
            }
        });
    TangentImage {
        camera: camera.clone(),
        raster: out,
    }
}

/// Projects a tangent image back onto an ERP grid; pixels outside the
/// camera's padded footprint are masked.
pub fn tangent_to_erp(
    img: &TangentImage,
    erp_width: usize,
    erp_height: usize,
    filter: Filter,
) -> Result<ErpImage> {
    check_erp_dims(erp_width, erp_height)?;
    let camera = &img.camera;
    let src = &img.raster;
    let ch = src.channels;
    let mut out = Raster::new(erp_width, erp_height, ch);
    out.data
        .par_chunks_mut(erp_width * ch)
        .zip(out.mask.par_chunks_mut(erp_width))
        .enumerate()
        .for_each(|(row, (data, mask))| {
            let mut px = [0.0; 3];
            for col in 0..erp_width {
                let dir = erp_pixel_direction(col, row, erp_width, erp_height);
                let Some((x, y)) = camera.footprint_coords(&dir) else {
                    continue;
                };
                let (tc, tr) = camera.plane_to_pixel(x, y);
                if sample(src, tc, tr, filter, false, &mut px) {
                    mask[col] = true;
                    data[col * ch..(col + 1) * ch].copy_from_slice(&px[..ch]);
                }
            }
        });
    Ok(ErpImage { raster: out })
}

/// Samples a single-channel tangent image at a unit direction, if the
/// direction lies in the footprint and the sample is valid.
#[inline]
pub(crate) fn sample_tangent_at(img: &TangentImage, x: f64, y: f64) -> Option<f64> {
    let (tc, tr) = img.camera.plane_to_pixel(x, y);
    let mut px = [0.0; 3];
    sample(&img.raster, tc, tr, Filter::Bilinear, false, &mut px).then_some(px[0])
}
