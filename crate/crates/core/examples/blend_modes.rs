//! Blends the same aligned maps with every weighting scheme and with the
//! Poisson solver, and scores each result against the ground truth.
//!
//!     cargo run --release --example blend_modes -- 512

use anyhow::Result;
use panodepth::alignment::{align_multiscale, AlignmentConfig};
use panodepth::blending::BlendConfig;
use panodepth::config::BlendMode;
use panodepth::evaluation::{evaluate_pipeline, MetricReport};
use panodepth::geometry::build_icosahedron_layout;
use panodepth::pipeline::{blend_erp_maps, project_to_erp, to_spherical, WeightCache};
use panodepth::synthetic::{generate_synthetic, SyntheticConfig};

pub fn run(erp_width: usize) -> Result<Vec<(BlendMode, MetricReport)>> {
    let erp_height = erp_width / 2;
    let layout = build_icosahedron_layout(0.3, 400, 346)?;
    let data = generate_synthetic(&SyntheticConfig::default(), &layout, erp_width, erp_height)?;
    let spherical = to_spherical(&data.maps)?;
    let aligned = align_multiscale(
        &spherical,
        erp_width,
        erp_height,
        &AlignmentConfig::default(),
    )?;
    let tangents: Vec<_> = aligned
        .maps
        .iter()
        .filter_map(|m| m.as_tangent().cloned())
        .collect();
    let erp_maps = project_to_erp(&tangents, erp_width, erp_height)?;

    let config = BlendConfig::default();
    let mut weights = WeightCache::new(&layout, erp_width, erp_height, &config);
    let mut out = Vec::new();
    for mode in BlendMode::ALL {
        let blended = blend_erp_maps(&erp_maps, mode, &mut weights, &config)?;
        if let Some(s) = blended.solve {
            println!(
                "poisson: {} iterations, relative residual {:.1e}",
                s.iterations, s.relative_residual
            );
        }
        out.push((
            mode,
            evaluate_pipeline(&blended.disparity, &data.gt_depth, None)?,
        ));
    }
    Ok(out)
}

fn main() -> Result<()> {
    let width: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(512);
    let rows: Vec<_> = run(width)?
        .into_iter()
        .map(|(mode, m)| (mode.name().to_string(), m))
        .collect();
    print!("{}", MetricReport::table(&rows));
    Ok(())
}
