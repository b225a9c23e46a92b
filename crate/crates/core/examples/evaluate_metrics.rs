//! Scores a disparity prediction against ground-truth depth: the prediction
//! is first mapped onto the true disparity by a least-squares scale and
//! offset, then inverted to depth.
//!
//!     cargo run --release --example evaluate_metrics

use anyhow::Result;
use panodepth::evaluation::{
    compute_metrics, evaluate_pipeline, fit_affine_disparity, MetricReport,
};
use panodepth::synthetic::{SceneKind, SyntheticConfig, SyntheticScene};
use panodepth::ErpImage;

pub fn run(width: usize) -> Result<Vec<(String, MetricReport)>> {
    let scene = SyntheticScene::new(SyntheticConfig {
        scene: SceneKind::SphereInRoom,
        ..SyntheticConfig::default()
    })?;
    let gt = scene.render_depth(width, width / 2)?;

    // a perfect prediction up to an unknown affine map of disparity
    let affine = ErpImage::new(gt.raster.map_valid(|z| 3.0 / z - 0.2))?;
    let (s, o) = fit_affine_disparity(&affine, &gt, None)?;
    println!("recovered disparity map: scale {s:.4}, offset {o:+.4}");

    // a prediction that is wrong by a smooth multiplicative ripple
    let mut rippled = affine.clone();
    for (i, v) in rippled.raster.data.iter_mut().enumerate() {
        *v *= 1.0 + 0.1 * (i as f64 * 0.001).sin();
    }
    let doubled = ErpImage::new(gt.raster.map_valid(|z| 2.0 * z))?;

    Ok(vec![
        ("affine".into(), evaluate_pipeline(&affine, &gt, None)?),
        ("ripple".into(), evaluate_pipeline(&rippled, &gt, None)?),
        ("2x depth".into(), compute_metrics(&doubled, &gt, None)?),
    ])
}

fn main() -> Result<()> {
    print!("{}", MetricReport::table(&run(256)?));
    Ok(())
}
