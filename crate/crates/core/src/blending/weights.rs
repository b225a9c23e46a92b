use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::BlendConfig;
use crate::error::Result;
use crate::geometry::{angle_between, check_erp_dims, erp_pixel_direction, IcosahedronLayout};

/// Per-face weighting of the ERP grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightScheme {
    /// Only the face with the angularly closest tangent point.
    Nn,
    /// Uniform over all covering faces.
    Mean,
    /// Flat up to a fixed angle from the tangent point, then a linear ramp
    /// down to the footprint boundary.
    Radial,
    /// Flat inside a shrunken copy of the image rectangle, then a linear ramp
    /// down to the image border.
    Frustum,
}

impl std::str::FromStr for WeightScheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "nn" => Ok(Self::Nn),
            "mean" => Ok(Self::Mean),
            "radial" => Ok(Self::Radial),
            "frustum" => Ok(Self::Frustum),
            _ => Err(format!("unknown weight scheme '{s}'")),
        }
    }
}

/// Weights of one face over the ERP grid, stored sparsely: `pixels` holds
/// the row-major indices with non-zero weight in increasing order.
#[derive(Clone, Debug, PartialEq)]
pub struct BlendWeightField {
    pub face_index: usize,
    pub scheme: WeightScheme,
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u32>,
    pub weights: Vec<f64>,
}

impl BlendWeightField {
    /// Weight at a row-major pixel index.
    pub fn get(&self, pixel: usize) -> f64 {
        match self.pixels.binary_search(&(pixel as u32)) {
            Ok(k) => self.weights[k],
            Err(_) => 0.0,
        }
    }

    pub fn dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.width * self.height];
        for (&p, &w) in self.pixels.iter().zip(&self.weights) {
            out[p as usize] = w;
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.pixels
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| (p as usize, w))
    }
}

/// Unnormalized weight of one face at a direction inside its footprint,
/// given its plane coordinates.
fn raw_weight(
    scheme: WeightScheme,
    config: &BlendConfig,
    theta: f64,
    gauge: f64,
    plane_radius: f64,
) -> f64 {
    match scheme {
        WeightScheme::Nn | WeightScheme::Mean => 1.0,
        WeightScheme::Radial => {
            let start = config.radial_decay_start_deg.to_radians();
            if theta <= start || plane_radius == 0.0 {
                return 1.0;
            }
            // the footprint boundary along this azimuth
            let boundary = (plane_radius / gauge).atan();
            if boundary <= start {
                return if theta < boundary { 1.0 } else { 0.0 };
            }
            ((boundary - theta) / (boundary - start)).clamp(0.0, 1.0)
        }
        WeightScheme::Frustum => ((1.0 - gauge) / config.frustum_decay_start).clamp(0.0, 1.0),
    }
}

/// Computes the per-face weight fields of `scheme` over a `width × height`
/// ERP grid. For every covered pixel the weights of the mean, radial and
/// frustum schemes sum to one; the nn scheme is one-hot.
pub fn compute_weights(
    layout: &IcosahedronLayout,
    scheme: WeightScheme,
    width: usize,
    height: usize,
    config: &BlendConfig,
) -> Result<Vec<BlendWeightField>> {
    check_erp_dims(width, height)?;
    config.validate()?;
    let faces = layout.len();
    let rows: Vec<Vec<(u32, u32, f64)>> = (0..height)
        .into_par_iter()
        .map(|row| {
            let mut out = Vec::new();
            let mut local: Vec<(usize, f64)> = Vec::with_capacity(8);
            for col in 0..width {
                let dir = erp_pixel_direction(col, row, width, height);
                let pixel = (row * width + col) as u32;
                local.clear();
                if scheme == WeightScheme::Nn {
                    let f = layout.nearest_face(&dir);
                    if layout.cameras[f].footprint_coords(&dir).is_some() {
                        out.push((f as u32, pixel, 1.0));
                    }
                    continue;
                }
                for (f, cam) in layout.cameras.iter().enumerate() {
                    if let Some((x, y)) = cam.footprint_coords(&dir) {
                        let theta = angle_between(&dir, &cam.axis());
                        let w = raw_weight(
                            scheme,
                            config,
                            theta,
                            cam.principal_gauge(x, y),
                            x.hypot(y),
                        );
                        local.push((f, w));
                    }
                }
                if local.is_empty() {
                    continue;
                }
                let total: f64 = local.iter().map(|l| l.1).sum();
                if total > 0.0 {
                    for &(f, w) in &local {
                        if w > 0.0 {
                            out.push((f as u32, pixel, w / total));
                        }
                    }
                } else {
                    // every covering face is at its border: fall back to nn
                    let f = layout.nearest_face(&dir);
                    out.push((f as u32, pixel, 1.0));
                }
            }
            out
        })
        .collect();

    let mut fields: Vec<BlendWeightField> = (0..faces)
        .map(|f| BlendWeightField {
            face_index: layout.cameras[f].face_index,
            scheme,
            width,
            height,
            pixels: Vec::new(),
            weights: Vec::new(),
        })
        .collect();
    for row in rows {
        for (f, pixel, w) in row {
            let field = &mut fields[f as usize];
            field.pixels.push(pixel);
            field.weights.push(w);
        }
    }
    Ok(fields)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_icosahedron_layout, spherical_to_erp_pixel};

    fn sums(fields: &[BlendWeightField]) -> Vec<f64> {
        let mut total = vec![0.0; fields[0].width * fields[0].height];
        for f in fields {
            for (p, w) in f.iter() {
                total[p] += w;
            }
        }
        total
    }

    #[test]
    fn normalized_schemes_sum_to_one() {
        let layout = build_icosahedron_layout(0.3, 400, 346).unwrap();
        let config = BlendConfig::default();
        for scheme in [
            WeightScheme::Mean,
            WeightScheme::Radial,
            WeightScheme::Frustum,
            WeightScheme::Nn,
        ] {
            let fields = compute_weights(&layout, scheme, 256, 128, &config).unwrap();
            for s in sums(&fields) {
                assert!((s - 1.0).abs() < 1e-9, "{scheme:?}: {s}");
            }
        }
    }

    #[test]
    fn nn_is_one_hot() {
        let layout = build_icosahedron_layout(0.3, 400, 346).unwrap();
        let fields =
            compute_weights(&layout, WeightScheme::Nn, 128, 64, &BlendConfig::default()).unwrap();
        let mut owners = vec![0; 128 * 64];
        for f in &fields {
            for (p, w) in f.iter() {
                assert_eq!(w, 1.0);
                owners[p] += 1;
            }
        }
        assert!(owners.iter().all(|&c| c == 1));
    }

    #[test]
    fn mean_weight_is_inverse_coverage() {
        let layout = build_icosahedron_layout(0.3, 400, 346).unwrap();
        let (w, h) = (256, 128);
        let coverage = crate::geometry::coverage_map(&layout, w, h).unwrap();
        let fields =
            compute_weights(&layout, WeightScheme::Mean, w, h, &BlendConfig::default()).unwrap();
        for f in &fields {
            for (p, wt) in f.iter() {
                assert!((wt - 1.0 / coverage[p] as f64).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn tangent_point_gets_the_largest_weight() {
        let layout = build_icosahedron_layout(0.3, 400, 346).unwrap();
        let config = BlendConfig::default();
        for scheme in [WeightScheme::Radial, WeightScheme::Frustum] {
            for cam in &layout.cameras {
                let (x, y, _) = cam.project_vector(&cam.axis());
                let theta = 0.0;
                let own = raw_weight(scheme, &config, theta, cam.principal_gauge(x, y), 0.0);
                assert_eq!(own, 1.0);
                for other in &layout.cameras {
                    if let Some((ox, oy)) = other.footprint_coords(&cam.axis()) {
                        let t = angle_between(&cam.axis(), &other.axis());
                        let w = raw_weight(
                            scheme,
                            &config,
                            t,
                            other.principal_gauge(ox, oy),
                            ox.hypot(oy),
                        );
                        assert!(w <= own);
                    }
                }
            }
        }
        // and the nn winner at the tangent point's pixel is that face
        let (w, h) = (512, 256);
        let fields = compute_weights(&layout, WeightScheme::Nn, w, h, &config).unwrap();
        let cam = &layout.cameras[9];
        let (u, v) = spherical_to_erp_pixel(&cam.tangent_point, w, h).unwrap();
        let p = v.round() as usize * w + u.round() as usize % w;
        assert_eq!(fields[9].get(p), 1.0);
    }
}
