//! File formats: PFM disparity, PNG/EXR images, and the provider directory.

mod pfm;
mod provider;

pub use pfm::{decode_pfm, encode_pfm, read_pfm, write_pfm};
pub use provider::{
    check_provider_dir, face_file_name, load_face_images, load_provider_dir, write_provider_dir,
    ContractReport, FaceEntry, ProviderManifest, MANIFEST_FILE,
};

use std::path::Path;

use image::{DynamicImage, GrayImage, Luma, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::image::Raster;

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

/// Reads an RGB image (8/16-bit PNG, PFM or EXR) with values in `[0, 1]`
/// for integer formats.
pub fn read_color_image(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    if extension(path) == "pfm" {
        let r = read_pfm(path)?;
        return Ok(if r.channels == 3 { r } else { gray_to_rgb(&r) });
    }
    let img = image::open(path)?.into_rgb32f();
    let (w, h) = img.dimensions();
    let data = img.into_raw().into_iter().map(f64::from).collect();
    Ok(Raster {
        width: w as usize,
        height: h as usize,
        channels: 3,
        data,
        mask: vec![true; (w * h) as usize],
    })
}

fn gray_to_rgb(r: &Raster) -> Raster {
    let mut out = Raster::new(r.width, r.height, 3);
    out.mask.clone_from(&r.mask);
    for (i, &v) in r.data.iter().enumerate() {
        out.data[3 * i..3 * i + 3].fill(v);
    }
    out
}

/// Reads a single-channel float map from PFM or EXR (first channel).
pub fn read_scalar_map(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    match extension(path).as_str() {
        "pfm" => {
            let r = read_pfm(path)?;
            if r.channels != 1 {
                return Err(Error::Format(format!(
                    "{} is not single channel",
                    path.display()
                )));
            }
            Ok(r)
        }
        "exr" => {
            let img = image::open(path)?.into_rgba32f();
            let (w, h) = img.dimensions();
            let data = img.pixels().map(|p| f64::from(p.0[0])).collect();
            Raster::from_scalar(w as usize, h as usize, data)
        }
        other => Err(Error::Format(format!(
            "unsupported float map extension '{other}'"
        ))),
    }
}

/// Writes an 8-bit visualization of a scalar map, linearly mapping the
/// valid minimum to 0 and maximum to 255; masked pixels are black. Returns
/// the `(min, max)` used.
pub fn write_visualization_png(path: impl AsRef<Path>, raster: &Raster) -> Result<(f64, f64)> {
    let values = raster.valid_values();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = if hi > lo { hi - lo } else { 1.0 };
    let mut img = GrayImage::new(raster.width as u32, raster.height as u32);
    for (i, px) in img.pixels_mut().enumerate() {
        if raster.mask[i] {
            let v = (raster.data[i * raster.channels] - lo) / range;
            *px = Luma([(v * 255.0).round().clamp(0.0, 255.0) as u8]);
        }
    }
    img.save(path)?;
    Ok((lo, hi))
}

/// Writes weights in `[0, 1]` as an 8-bit greyscale PNG.
pub fn write_weight_png(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    weights: &[f64],
) -> Result<()> {
    let img = GrayImage::from_fn(width as u32, height as u32, |x, y| {
        let w = weights[y as usize * width + x as usize];
        Luma([(w * 255.0).round().clamp(0.0, 255.0) as u8])
    });
    img.save(path)?;
    Ok(())
}

/// Writes an RGB raster with values in `[0, 1]` as an 8-bit PNG.
pub fn write_color_png(path: impl AsRef<Path>, raster: &Raster) -> Result<()> {
    if raster.channels != 3 {
        return Err(Error::Format("colour PNG needs three channels".into()));
    }
    let img = RgbImage::from_fn(raster.width as u32, raster.height as u32, |x, y| {
        let i = (y as usize * raster.width + x as usize) * 3;
        let q = |v: f64| (v * 255.0).round().clamp(0.0, 255.0) as u8;
        Rgb([
            q(raster.data[i]),
            q(raster.data[i + 1]),
            q(raster.data[i + 2]),
        ])
    });
    DynamicImage::ImageRgb8(img).save(path)?;
    Ok(())
}
