//! Every alignment variant (none, one grid size, coarse-to-fine) under every
//! blend mode, on one synthetic scene.
//!
//!     cargo run --release --example ablation_table -- 512

use anyhow::Result;
use panodepth::config::BlendMode;
use panodepth::pipeline::{run_ablation, AblationTable, AlignmentVariant};
use panodepth::PipelineConfig;

pub fn run(erp_width: usize, seed: u64) -> Result<AblationTable> {
    let config = PipelineConfig {
        erp_width,
        erp_height: erp_width / 2,
        rng_seed: seed,
        ..PipelineConfig::default()
    };
    let variants = AlignmentVariant::standard_set(&config.alignment.grid_schedule);
    let modes = [
        BlendMode::Nn,
        BlendMode::Mean,
        BlendMode::Frustum,
        BlendMode::Poisson,
    ];
    Ok(run_ablation(&config, &variants, &modes)?)
}

fn main() -> Result<()> {
    let width: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(512);
    print!("{}", run(width, 7)?.to_text());
    Ok(())
}
