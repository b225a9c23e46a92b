use panodepth::blending::{
    blend_poisson, blend_weighted, compute_weights, stitch_nn, BlendConfig, WeightScheme,
};
use panodepth::geometry::{
    build_icosahedron_layout, erp_pixel_to_spherical, footprint_mask, IcosahedronLayout,
};
use panodepth::{ErpImage, Raster};

/// Restricts `field` to each face's footprint.
fn per_face(layout: &IcosahedronLayout, field: &Raster, offsets: &[f64]) -> Vec<ErpImage> {
    layout
        .cameras
        .iter()
        .zip(offsets)
        .map(|(cam, off)| {
            let mask = footprint_mask(cam, field.width, field.height).unwrap();
            let mut r = Raster::new(field.width, field.height, 1);
            for (i, &m) in mask.iter().enumerate() {
                if m {
                    r.data[i] = field.data[i] + off;
                    r.mask[i] = true;
                }
            }
            ErpImage::new(r).unwrap()
        })
        .collect()
}

fn smooth_field(width: usize, height: usize) -> Raster {
    let data = (0..width * height)
        .map(|i| {
            let p = erp_pixel_to_spherical((i % width) as f64, (i / width) as f64, width, height)
                .unwrap();
            1.0 + 0.3 * p.lon.cos() * p.lat.cos() + 0.2 * (3.0 * p.lat).sin()
        })
        .collect();
    Raster::from_scalar(width, height, data).unwrap()
}

fn poisson(
    layout: &IcosahedronLayout,
    maps: &[ErpImage],
    config: &BlendConfig,
) -> (ErpImage, ErpImage) {
    let (w, h) = (maps[0].width(), maps[0].height());
    let nn = compute_weights(layout, WeightScheme::Nn, w, h, config).unwrap();
    let d_nn = stitch_nn(maps, &nn).unwrap();
    let frustum = compute_weights(layout, WeightScheme::Frustum, w, h, config).unwrap();
    let (out, report) = blend_poisson(maps, &frustum, &d_nn, config).unwrap();
    assert!(report.converged, "{report:?}");
    (out, d_nn)
}

#[test]
fn agreeing_maps_are_a_fixed_point() {
    let layout = build_icosahedron_layout(0.3, 400, 346).unwrap();
    let field = smooth_field(1024, 512);
    let maps = per_face(&layout, &field, &[0.0; 20]);
    let (out, d_nn) = poisson(&layout, &maps, &BlendConfig::default());
    let mut worst: f64 = 0.0;
    for i in 0..field.len() {
        assert!(out.raster.mask[i]);
        assert_eq!(d_nn.raster.data[i], field.data[i]);
        worst = worst.max(((out.raster.data[i] - field.data[i]) / field.data[i]).abs());
    }
    assert!(worst < 1e-6, "max relative deviation {worst:.3e}");
}

#[test]
fn output_is_continuous_across_the_longitude_seam() {
    let layout = build_icosahedron_layout(0.3, 100, 87).unwrap();
    let (w, h) = (256, 128);
    let field = smooth_field(w, h);
    let offsets: Vec<f64> = (0..20).map(|f| 0.01 * f as f64).collect();
    let maps = per_face(&layout, &field, &offsets);
    let (out, _) = poisson(&layout, &maps, &BlendConfig::default());
    let d = &out.raster.data;
    let mut seam: f64 = 0.0;
    let mut interior: f64 = 0.0;
    for row in 0..h {
        seam = seam.max((d[row * w] - d[row * w + w - 1]).abs());
        for col in 1..w {
            interior = interior.max((d[row * w + col] - d[row * w + col - 1]).abs());
        }
    }
    // the wrap-around edge is an ordinary edge of the solve
    assert!(
        seam <= interior,
        "seam jump {seam:.4} vs interior {interior:.4}"
    );
}

#[test]
fn poisson_softens_steps_between_disagreeing_faces() {
    let layout = build_icosahedron_layout(0.3, 100, 87).unwrap();
    let (w, h) = (256, 128);
    let flat = Raster::filled(w, h, 1, 1.0);
    let offsets: Vec<f64> = (0..20)
        .map(|f| if f % 2 == 0 { 0.0 } else { 1.0 })
        .collect();
    let maps = per_face(&layout, &flat, &offsets);
    let (out, d_nn) = poisson(&layout, &maps, &BlendConfig::default());
    let max_jump = |r: &Raster| {
        (0..h)
            .flat_map(|row| (1..w).map(move |col| (row, col)))
            .map(|(row, col)| (r.data[row * w + col] - r.data[row * w + col - 1]).abs())
            .fold(0.0f64, f64::max)
    };
    assert!((max_jump(&d_nn.raster) - 1.0).abs() < 1e-12);
    assert!(max_jump(&out.raster) < 0.5, "{}", max_jump(&out.raster));
}

#[test]
fn weighted_blends_of_agreeing_maps_reproduce_the_field() {
    let layout = build_icosahedron_layout(0.3, 100, 87).unwrap();
    let field = smooth_field(256, 128);
    let maps = per_face(&layout, &field, &[0.0; 20]);
    for scheme in [
        WeightScheme::Mean,
        WeightScheme::Radial,
        WeightScheme::Frustum,
    ] {
        let weights = compute_weights(&layout, scheme, 256, 128, &BlendConfig::default()).unwrap();
        let out = blend_weighted(&maps, &weights).unwrap();
        for (a, b) in out.raster.data.iter().zip(&field.data) {
            assert!((a - b).abs() < 1e-12, "{scheme:?}");
        }
    }
}
