//! The provider hand-off: write 20 per-face PFM maps plus a manifest that
//! echoes the layout hash, validate the directory, and run the pipeline on
//! it as an external estimator's output would be.
//!
//!     cargo run --release --example provider_files -- provider_dir

use std::path::Path;

use anyhow::{ensure, Result};
use panodepth::config::ProviderConfig;
use panodepth::geometry::build_icosahedron_layout;
use panodepth::io::{check_provider_dir, write_provider_dir, ProviderManifest};
use panodepth::pipeline::run_pipeline;
use panodepth::synthetic::{generate_synthetic, SyntheticConfig};
use panodepth::{PipelineConfig, Raster};

pub fn run(dir: &Path, erp_width: usize) -> Result<usize> {
    let layout = build_icosahedron_layout(0.3, 400, 346)?;
    let data = generate_synthetic(
        &SyntheticConfig::default(),
        &layout,
        erp_width,
        erp_width / 2,
    )?;
    let rasters: Vec<Raster> = data.maps.iter().map(|m| m.raster().clone()).collect();
    write_provider_dir(
        dir,
        &ProviderManifest::for_layout(&layout, "oracle", "1"),
        &rasters,
    )?;

    let report = check_provider_dir(dir, &layout)?;
    ensure!(
        report.is_valid(),
        "contract violations: {:?}",
        report.violations
    );

    let config = PipelineConfig {
        erp_width,
        erp_height: erp_width / 2,
        provider: ProviderConfig::Files {
            dir: dir.to_path_buf(),
        },
        ..PipelineConfig::default()
    };
    let run = run_pipeline(&config)?;
    let nan = run
        .blend
        .disparity
        .raster
        .data
        .iter()
        .filter(|v| v.is_nan())
        .count();
    Ok(run.blend.disparity.raster.valid_count() - nan)
}

fn main() -> Result<()> {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "provider_dir".into());
    let valid = run(Path::new(&dir), 512)?;
    println!("provider directory {dir} passed the contract; {valid} valid output pixels");
    Ok(())
}
