mod common;

use approx::assert_relative_eq;
use panodepth::alignment::{
    align_multiscale, energy, energy_gradient, optimize_scale, AlignmentConfig, AlignmentProblem,
    DeformationGrid, OverlapSample, OverlapSet,
};
use panodepth::geometry::SphericalCoord;

use common::*;

const FACES: usize = 20;

fn identity_grids(cols: usize, rows: usize) -> Vec<DeformationGrid> {
    (0..FACES)
        .map(|f| DeformationGrid::identity(f, cols, rows))
        .collect()
}

/// Copies face a's value onto face b so every overlap agrees exactly.
fn agreeing(sets: &[OverlapSet]) -> Vec<OverlapSet> {
    sets.iter()
        .cloned()
        .map(|mut s| {
            s.samples.iter_mut().for_each(|p| p.value_b = p.value_a);
            s
        })
        .collect()
}

/// Two faces sharing samples spread over the whole image with constant
/// values `value_a` and `value_b`.
fn constant_pair(value_a: f64, value_b: f64, n: usize) -> Vec<OverlapSet> {
    let mut r = rng(4);
    use rand::Rng;
    let samples = (0..n)
        .map(|_| {
            let c = [r.random_range(0.0..1.0), r.random_range(0.0..1.0)];
            OverlapSample {
                erp_dir: SphericalCoord::new(0.0, 0.0),
                value_a,
                value_b,
                coord_a: c,
                coord_b: [1.0 - c[0], c[1]],
            }
        })
        .collect();
    vec![OverlapSet {
        a: 0,
        b: 1,
        population: n,
        samples,
    }]
}

#[test]
fn gradient_matches_central_differences() {
    let layout = small_layout();
    let maps = standardized_maps(&layout, 256, false);
    let sets = overlaps(&maps, 256, 0.05);
    let cfg = AlignmentConfig::default();
    let problem = AlignmentProblem::new(FACES, 4, 3, &sets, &cfg).unwrap();
    let mut r = rng(1);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = problem.pack(&random_grids(&mut r, FACES, 4, 3)).unwrap();
        let mut g = vec![0.0; x.len()];
        problem.energy_and_gradient(&x, &mut g).unwrap();
        let mut fd = vec![0.0; x.len()];
        let mut xp = x.clone();
        for i in 0..x.len() {
            xp[i] = x[i] + h;
            let up = problem.energy(&xp).unwrap().total;
            xp[i] = x[i] - h;
            let down = problem.energy(&xp).unwrap().total;
            xp[i] = x[i];
            fd[i] = (up - down) / (2.0 * h);
        }
        let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = g
            .iter()
            .zip(&fd)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(err / scale);
    }
    assert!(worst < 1e-5, "max relative gradient error {worst:.3e}");
}

#[test]
fn identity_grids_on_agreeing_maps_leave_only_the_scale_term() {
    let layout = small_layout();
    let maps = standardized_maps(&layout, 256, false);
    let sets = agreeing(&overlaps(&maps, 256, 0.05));
    let cfg = AlignmentConfig::default();
    let e = energy(&identity_grids(4, 3), &sets, &cfg).unwrap();
    // interpolation weights sum to one up to rounding
    assert!(e.alignment < 1e-28, "{}", e.alignment);
    assert_eq!(e.smoothness, 0.0);
    assert_eq!(e.scale, (FACES * 12) as f64);

    let grads = energy_gradient(&identity_grids(4, 3), &sets, &cfg).unwrap();
    for g in &grads {
        g.d_offsets.iter().for_each(|&d| assert!(d.abs() < 1e-15));
        g.d_scales
            .iter()
            .for_each(|&d| assert_relative_eq!(d, -cfg.lambda_scale, epsilon = 1e-15));
    }
}

#[test]
fn constant_maps_one_apart_have_unit_alignment_energy() {
    let sets = constant_pair(0.0, 1.0, 50);
    let grids: Vec<_> = (0..2).map(|f| DeformationGrid::identity(f, 4, 3)).collect();
    let e = energy(&grids, &sets, &AlignmentConfig::default()).unwrap();
    assert_relative_eq!(e.alignment, 1.0, epsilon = 1e-12);
}

#[test]
fn doubling_scales_halves_the_scale_term_and_quadruples_scale_smoothness() {
    let sets = constant_pair(0.3, 0.3, 10);
    let mut grid = DeformationGrid::identity(0, 4, 3);
    grid.scales
        .iter_mut()
        .enumerate()
        .for_each(|(i, s)| *s = 1.0 + 0.1 * i as f64);
    let mut doubled = grid.clone();
    doubled.scales.iter_mut().for_each(|s| *s *= 2.0);
    let other = DeformationGrid::identity(1, 4, 3);
    let cfg = AlignmentConfig::default();
    let e1 = energy(&[grid, other.clone()], &sets, &cfg).unwrap();
    let e2 = energy(&[doubled, other], &sets, &cfg).unwrap();
    // face 1 is the identity and contributes 12 to the scale term
    assert_relative_eq!(e2.scale - 12.0, 0.5 * (e1.scale - 12.0), epsilon = 1e-12);
    assert_relative_eq!(e2.smoothness, 4.0 * e1.smoothness, epsilon = 1e-12);
}

#[test]
fn symmetric_pair_has_mirrored_gradients() {
    let sets = constant_pair(0.2, 0.9, 40);
    let grids: Vec<_> = (0..2).map(|f| DeformationGrid::identity(f, 4, 3)).collect();
    let cfg = AlignmentConfig {
        lambda_scale: 0.0,
        ..AlignmentConfig::default()
    };
    let g = energy_gradient(&grids, &sets, &cfg).unwrap();
    // face b sees the same samples mirrored left to right
    for r in 0..3 {
        for c in 0..4 {
            let ia = r * 4 + c;
            let ib = r * 4 + (3 - c);
            assert_relative_eq!(g[0].d_offsets[ia], -g[1].d_offsets[ib], epsilon = 1e-12);
        }
    }
}

#[test]
fn offsets_close_the_gap_between_constant_maps() {
    let sets = constant_pair(0.0, 1.0, 200);
    let grids: Vec<_> = (0..2).map(|f| DeformationGrid::identity(f, 4, 3)).collect();
    let out = optimize_scale(&grids, &sets, &AlignmentConfig::default()).unwrap();
    assert!(
        out.last.alignment <= 0.01 * out.initial.alignment,
        "{} -> {}",
        out.initial.alignment,
        out.last.alignment
    );
}

#[test]
fn agreeing_maps_stay_aligned() {
    let layout = small_layout();
    let maps = standardized_maps(&layout, 256, false);
    let sets = agreeing(&overlaps(&maps, 256, 0.05));
    let out = optimize_scale(&identity_grids(4, 3), &sets, &AlignmentConfig::default()).unwrap();
    let (lo, hi) = out
        .grids
        .iter()
        .flat_map(|g| g.scales.iter())
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| {
            (lo.min(s), hi.max(s))
        });
    // nothing bounds a uniform scale-up, so the scales drift together while
    // the maps keep agreeing exactly up to rounding
    assert!(lo > 1.0 && (hi - lo) <= 1e-8 * hi, "scales [{lo}, {hi}]");
    assert!(
        out.last.alignment / (lo * lo) < 1e-12,
        "alignment energy {}",
        out.last.alignment
    );
}

#[test]
fn accepted_energies_never_increase() {
    let layout = small_layout();
    let maps = standardized_maps(&layout, 256, false);
    let sets = overlaps(&maps, 256, 0.05);
    let out = optimize_scale(&identity_grids(4, 3), &sets, &AlignmentConfig::default()).unwrap();
    let e = &out.report.energies;
    assert_eq!(e.len(), out.report.iterations + 1);
    assert!(e.windows(2).all(|w| w[1] <= w[0]));
    assert!(out.grids.iter().all(|g| g.scales.iter().all(|&s| s > 1e-6)));
}

#[test]
fn zero_iterations_return_the_input_grids() {
    let layout = small_layout();
    let maps = standardized_maps(&layout, 256, false);
    let sets = overlaps(&maps, 256, 0.05);
    let grids = random_grids(&mut rng(2), FACES, 4, 3);
    let cfg = AlignmentConfig {
        iterations_per_scale: 0,
        ..AlignmentConfig::default()
    };
    assert_eq!(optimize_scale(&grids, &sets, &cfg).unwrap().grids, grids);
}

#[test]
fn per_face_affine_corruption_is_undone() {
    let layout = small_layout();
    let maps = standardized_maps(&layout, 256, true);
    let sets = overlaps(&maps, 256, 0.05);
    let out = optimize_scale(&identity_grids(4, 3), &sets, &AlignmentConfig::default()).unwrap();
    let mean_scale: f64 =
        out.grids.iter().flat_map(|g| g.scales.iter()).sum::<f64>() / (FACES * 12) as f64;
    // the energy has no preferred global scale, so compare in units of it
    let relative = out.last.alignment / (mean_scale * mean_scale);
    println!(
        "alignment {:.3e} -> {:.3e}, mean scale {mean_scale:.2}, relative {relative:.3e}",
        out.initial.alignment, out.last.alignment
    );
    assert!(relative < 0.05 * out.initial.alignment);
}

#[test]
fn coarse_to_fine_schedule_reduces_disagreement() {
    let layout = small_layout();
    let data = synthetic(&layout, 256, false, 5);
    let maps = panodepth::pipeline::to_spherical(&data.maps).unwrap();
    let cfg = AlignmentConfig::default();
    let none = align_multiscale(
        &maps,
        256,
        128,
        &AlignmentConfig {
            grid_schedule: vec![],
            ..cfg.clone()
        },
    )
    .unwrap();
    assert!(none.scales.is_empty());
    assert!(none.maps.iter().all(|m| m.is_standardized()));
    let before = panodepth::alignment::overlap_disagreement(&none.maps, 256, 128, 0.0).unwrap();
    let out = align_multiscale(&maps, 256, 128, &cfg).unwrap();
    assert_eq!(out.scales.len(), 3);
    let after = panodepth::alignment::overlap_disagreement(&out.maps, 256, 128, 0.0).unwrap();
    assert!(
        after.relative() < 0.5 * before.relative(),
        "{before:?} -> {after:?}"
    );
}
