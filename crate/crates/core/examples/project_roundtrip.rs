//! Splits a smooth ERP image into the 20 tangent images and recombines them
//! with mean weights, reporting the PSNR of the round trip.
//!
//!     cargo run --release --example project_roundtrip -- 1024

use anyhow::Result;
use panodepth::blending::{blend_weighted, compute_weights, BlendConfig, WeightScheme};
use panodepth::evaluation::{pole_cap_mask, psnr};
use panodepth::geometry::{build_icosahedron_layout, erp_pixel_to_spherical};
use panodepth::resample::{erp_to_tangent, tangent_to_erp, Filter};
use panodepth::{ErpImage, Raster};
use rayon::prelude::*;

/// A smooth test signal in `[0, 1]` over the sphere.
pub fn smooth_image(width: usize, height: usize) -> Result<ErpImage> {
    let mut data = Vec::with_capacity(width * height);
    for row in 0..height {
        for col in 0..width {
            let p = erp_pixel_to_spherical(col as f64, row as f64, width, height)?;
            let v = 0.5 + 0.25 * (3.0 * p.lon).sin() * p.lat.cos() + 0.2 * (2.0 * p.lat).sin();
            data.push(v);
        }
    }
    Ok(ErpImage::new(Raster::from_scalar(width, height, data)?)?)
}

/// PSNR (dB) of the ERP → tangent → ERP round trip, leaving out the top and
/// bottom `cap_deg` degrees.
pub fn run(width: usize, cap_deg: f64) -> Result<f64> {
    let height = width / 2;
    let layout = build_icosahedron_layout(0.3, 400, 346)?;
    let erp = smooth_image(width, height)?;
    let back: Vec<ErpImage> = layout
        .cameras
        .par_iter()
        .map(|cam| {
            tangent_to_erp(
                &erp_to_tangent(&erp, cam, Filter::Bilinear),
                width,
                height,
                Filter::Bilinear,
            )
        })
        .collect::<panodepth::Result<_>>()?;
    let weights = compute_weights(
        &layout,
        WeightScheme::Mean,
        width,
        height,
        &BlendConfig::default(),
    )?;
    let merged = blend_weighted(&back, &weights)?;
    let mask = pole_cap_mask(width, height, cap_deg);
    Ok(psnr(&merged.raster, &erp.raster, Some(&mask), 1.0)?)
}

fn main() -> Result<()> {
    let width: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(1024);
    let db = run(width, 5.0)?;
    println!(
        "round trip at {}x{}: PSNR {db:.2} dB (poles beyond 85 deg excluded)",
        width,
        width / 2
    );
    Ok(())
}
