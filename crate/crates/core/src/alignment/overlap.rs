use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AlignmentConfig;
use crate::disparity::{DisparityMap, Semantics};
use crate::error::{Error, Result};
use crate::geometry::{
    check_erp_dims, erp_pixel_direction, erp_to_spherical_unchecked, SphericalCoord,
};
use crate::image::TangentImage;
use crate::resample::sample_tangent_at;

/// One ERP pixel seen by both faces of a pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapSample {
    pub erp_dir: SphericalCoord,
    pub value_a: f64,
    pub value_b: f64,
    /// Position in face `a`'s padded image, normalized to `[0, 1]²`.
    pub coord_a: [f64; 2],
    pub coord_b: [f64; 2],
}

/// Sampled overlap between faces `a < b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapSet {
    pub a: usize,
    pub b: usize,
    /// Number of overlapping ERP pixels before sampling.
    pub population: usize,
    pub samples: Vec<OverlapSample>,
}

/// Tangent-domain spherical maps, checked for the overlap builder.
pub(crate) fn tangent_maps(maps: &[DisparityMap]) -> Result<Vec<&TangentImage>> {
    maps.iter()
        .enumerate()
        .map(|(i, m)| {
            if m.semantics() != Semantics::Spherical {
                return Err(
                    Error::Misuse("overlaps are built on spherical disparity".into()).for_face(i),
                );
            }
            m.as_tangent().ok_or_else(|| {
                Error::Misuse("overlaps need tangent-domain maps".into()).for_face(i)
            })
        })
        .collect()
}

/// Whether an ERP row centre lies inside a pole cap of `cap_deg` degrees.
#[inline]
pub(crate) fn in_pole_cap(lat: f64, cap_deg: f64) -> bool {
    cap_deg > 0.0 && lat.abs() > (90.0 - cap_deg).to_radians()
}

/// Enumerates, for every face pair `a < b`, the ERP pixels whose centres
/// fall inside both padded footprints with valid disparity in both maps,
/// outside the configured pole caps, and draws a seeded uniform sample of
/// `⌈fraction·|Ω(a, b)|⌉` of them.
pub fn build_overlap_sets(
    maps: &[DisparityMap],
    erp_width: usize,
    erp_height: usize,
    config: &AlignmentConfig,
    seed: u64,
) -> Result<Vec<OverlapSet>> {
    check_erp_dims(erp_width, erp_height)?;
    config.validate()?;
    let images = tangent_maps(maps)?;
    let n = images.len();
    let cap = config.pole_exclusion_deg;

    let rows: Vec<Vec<(u32, u32)>> = (0..erp_height)
        .into_par_iter()
        .map(|row| {
            let mut hits = Vec::new();
            let lat = erp_to_spherical_unchecked(0.0, row as f64, erp_width, erp_height).lat;
            if in_pole_cap(lat, cap) {
                return hits;
            }
            let mut seen = Vec::with_capacity(8);
            for col in 0..erp_width {
                let dir = erp_pixel_direction(col, row, erp_width, erp_height);
                seen.clear();
                for (f, img) in images.iter().enumerate() {
                    if let Some((x, y)) = img.camera.footprint_coords(&dir) {
                        if sample_tangent_at(img, x, y).is_some() {
                            seen.push(f);
                        }
                    }
                }
                let pixel = (row * erp_width + col) as u32;
                for (k, &a) in seen.iter().enumerate() {
                    for &b in &seen[k + 1..] {
                        hits.push(((a * n + b) as u32, pixel));
                    }
                }
            }
            hits
        })
        .collect();

    let mut population: Vec<Vec<u32>> = vec![Vec::new(); n * n];
    for hits in rows {
        for (pair, pixel) in hits {
            population[pair as usize].push(pixel);
        }
    }

    let sets = population
        .into_par_iter()
        .enumerate()
        .filter(|(_, pixels)| !pixels.is_empty())
        .map(|(pair, pixels)| {
            let (a, b) = (pair / n, pair % n);
            let total = pixels.len();
            let amount = ((config.sample_fraction * total as f64).ceil() as usize).clamp(1, total);
            let chosen: Vec<u32> = if amount == total {
                pixels
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(pair_seed(seed, pair as u64));
                let mut picks = index::sample(&mut rng, total, amount).into_vec();
                picks.sort_unstable();
                picks.into_iter().map(|i| pixels[i]).collect()
            };
            let samples = chosen
                .into_iter()
                .map(|pixel| {
                    let (col, row) = (pixel as usize % erp_width, pixel as usize / erp_width);
                    let dir = erp_pixel_direction(col, row, erp_width, erp_height);
                    let (ia, ib) = (images[a], images[b]);
                    let (xa, ya) = ia
                        .camera
                        .footprint_coords(&dir)
                        .expect("pixel in footprint a");
                    let (xb, yb) = ib
                        .camera
                        .footprint_coords(&dir)
                        .expect("pixel in footprint b");
                    OverlapSample {
                        erp_dir: SphericalCoord::from_unit_vector(&dir),
                        value_a: sample_tangent_at(ia, xa, ya).expect("valid in a"),
                        value_b: sample_tangent_at(ib, xb, yb).expect("valid in b"),
                        coord_a: ia.camera.plane_to_normalized(xa, ya),
                        coord_b: ib.camera.plane_to_normalized(xb, yb),
                    }
                })
                .collect();
            OverlapSet {
                a,
                b,
                population: total,
                samples,
            }
        })
        .collect();
    Ok(sets)
}

/// SplitMix64-style mixing of the run seed with a pair index.
fn pair_seed(seed: u64, pair: u64) -> u64 {
    let mut z = seed ^ pair.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Overlap disagreement between a set of maps, measured over every
/// overlapping ERP pixel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    /// Root mean square of `D_a − D_b` over all overlap samples.
    pub rms: f64,
    /// Mean absolute deviation about the median of all sampled values; the
    /// natural unit of the maps, which carry an arbitrary global scale.
    pub spread: f64,
    pub samples: usize,
}

impl Disagreement {
    /// RMS disagreement in units of the maps' own spread.
    pub fn relative(&self) -> f64 {
        if self.spread > 0.0 {
            self.rms / self.spread
        } else {
            0.0
        }
    }
}

/// Measures how well a set of spherical maps agree where they overlap.
pub fn overlap_disagreement(
    maps: &[DisparityMap],
    erp_width: usize,
    erp_height: usize,
    pole_exclusion_deg: f64,
) -> Result<Disagreement> {
    let config = AlignmentConfig {
        sample_fraction: 1.0,
        pole_exclusion_deg,
        ..AlignmentConfig::default()
    };
    let sets = build_overlap_sets(maps, erp_width, erp_height, &config, 0)?;
    let mut sq = 0.0;
    let mut count = 0usize;
    let mut values = Vec::new();
    for set in &sets {
        for s in &set.samples {
            sq += (s.value_a - s.value_b).powi(2);
            values.push(s.value_a);
            values.push(s.value_b);
        }
        count += set.samples.len();
    }
    if count == 0 {
        return Err(Error::Degenerate("maps do not overlap".into()));
    }
    let (_, spread) = crate::disparity::median_and_mad(&values)?;
    Ok(Disagreement {
        rms: (sq / count as f64).sqrt(),
        spread,
        samples: count,
    })
}
