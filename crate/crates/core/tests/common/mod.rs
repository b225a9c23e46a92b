#![allow(dead_code)]

use panodepth::alignment::{build_overlap_sets, AlignmentConfig, DeformationGrid, OverlapSet};
use panodepth::disparity::DisparityMap;
use panodepth::geometry::{build_icosahedron_layout, IcosahedronLayout};
use panodepth::pipeline::to_spherical;
use panodepth::synthetic::{generate_synthetic, SyntheticConfig, SyntheticData};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A reduced-resolution layout that keeps the test suite fast.
pub fn small_layout() -> IcosahedronLayout {
    build_icosahedron_layout(0.3, 100, 87).unwrap()
}

pub fn synthetic(
    layout: &IcosahedronLayout,
    width: usize,
    clean: bool,
    seed: u64,
) -> SyntheticData {
    let mut cfg = SyntheticConfig {
        seed,
        ..SyntheticConfig::default()
    };
    if clean {
        cfg = cfg.clean();
    }
    generate_synthetic(&cfg, layout, width, width / 2).unwrap()
}

/// Standardized spherical maps of the synthetic scene.
pub fn standardized_maps(
    layout: &IcosahedronLayout,
    width: usize,
    clean: bool,
) -> Vec<DisparityMap> {
    let data = synthetic(layout, width, clean, 5);
    to_spherical(&data.maps)
        .unwrap()
        .iter()
        .map(|m| m.standardize().unwrap())
        .collect()
}

pub fn overlaps(maps: &[DisparityMap], width: usize, fraction: f64) -> Vec<OverlapSet> {
    let cfg = AlignmentConfig {
        sample_fraction: fraction,
        ..AlignmentConfig::default()
    };
    build_overlap_sets(maps, width, width / 2, &cfg, 11).unwrap()
}

pub fn random_grids(
    rng: &mut ChaCha8Rng,
    faces: usize,
    cols: usize,
    rows: usize,
) -> Vec<DeformationGrid> {
    (0..faces)
        .map(|f| {
            let mut g = DeformationGrid::identity(f, cols, rows);
            g.scales
                .iter_mut()
                .for_each(|s| *s = rng.random_range(0.5..2.0));
            g.offsets
                .iter_mut()
                .for_each(|o| *o = rng.random_range(-0.5..0.5));
            g
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
