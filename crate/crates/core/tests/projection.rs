use panodepth::blending::{blend_weighted, compute_weights, BlendConfig, WeightScheme};
use panodepth::evaluation::{pole_cap_mask, psnr};
use panodepth::geometry::build_icosahedron_layout;
use panodepth::resample::{erp_to_tangent, tangent_to_erp, Filter};
use panodepth::{ErpImage, Raster};

#[path = "../examples/project_roundtrip.rs"]
#[allow(dead_code)]
mod project_roundtrip;

#[test]
fn constant_image_survives_the_round_trip_exactly() {
    let layout = build_icosahedron_layout(0.3, 100, 87).unwrap();
    let erp = ErpImage::new(Raster::filled(256, 128, 1, 0.625)).unwrap();
    let back: Vec<ErpImage> = layout
        .cameras
        .iter()
        .map(|c| {
            tangent_to_erp(
                &erp_to_tangent(&erp, c, Filter::Bilinear),
                256,
                128,
                Filter::Bilinear,
            )
            .unwrap()
        })
        .collect();
    let weights = compute_weights(
        &layout,
        WeightScheme::Mean,
        256,
        128,
        &BlendConfig::default(),
    )
    .unwrap();
    let merged = blend_weighted(&back, &weights).unwrap();
    assert_eq!(merged.raster.valid_count(), 256 * 128);
    for &v in &merged.raster.data {
        assert!((v - 0.625).abs() < 1e-12);
    }
}

#[test]
fn smooth_image_round_trip_is_above_40_db() {
    let db = project_roundtrip::run(512, 5.0).unwrap();
    assert!(db >= 40.0, "{db:.2} dB");
}

#[test]
fn psnr_of_identical_images_is_infinite() {
    let a = Raster::filled(8, 4, 1, 0.5);
    assert!(psnr(&a, &a, Some(&pole_cap_mask(8, 4, 0.0)), 1.0)
        .unwrap()
        .is_infinite());
}
