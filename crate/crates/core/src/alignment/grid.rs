use serde::{Deserialize, Serialize};

use crate::disparity::{DisparityMap, Semantics};
use crate::error::{Error, Result};

/// Lattice of `(scale, offset)` pairs spanning one padded tangent image.
///
/// Grid-points are stored row-major with `cols` across and `rows` down; the
/// corner grid-points sit on the image corners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeformationGrid {
    pub face_index: usize,
    pub cols: usize,
    pub rows: usize,
    pub scales: Vec<f64>,
    pub offsets: Vec<f64>,
}

impl DeformationGrid {
    pub fn uniform(face_index: usize, cols: usize, rows: usize, scale: f64, offset: f64) -> Self {
        Self {
            face_index,
            cols,
            rows,
            scales: vec![scale; cols * rows],
            offsets: vec![offset; cols * rows],
        }
    }

    /// Unit scale, zero offset.
    pub fn identity(face_index: usize, cols: usize, rows: usize) -> Self {
        Self::uniform(face_index, cols, rows, 1.0, 0.0)
    }

    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Interpolated `(s, o)` at a normalized image position. Evaluated as
    /// nested lerps so that a constant grid reproduces its value exactly.
    pub fn scale_offset_at(&self, pos: [f64; 2]) -> (f64, f64) {
        let (c0, fx) = cell(self.cols, pos[0]);
        let (r0, fy) = cell(self.rows, pos[1]);
        let i = r0 * self.cols + c0;
        let j = i + self.cols;
        let lerp = |a: f64, b: f64, t: f64| a + t * (b - a);
        let field = |v: &[f64]| lerp(lerp(v[i], v[i + 1], fx), lerp(v[j], v[j + 1], fx), fy);
        (field(&self.scales), field(&self.offsets))
    }
}

/// Bilinear weights of the four grid-points around a normalized image
/// position `pos ∈ [0, 1]²` (`(0, 0)` = top-left corner). Positions outside
/// the unit square are clamped.
#[inline]
pub fn bilinear_weights(cols: usize, rows: usize, pos: [f64; 2]) -> [(usize, f64); 4] {
    let (c0, fx) = cell(cols, pos[0]);
    let (r0, fy) = cell(rows, pos[1]);
    let i00 = r0 * cols + c0;
    [
        (i00, (1.0 - fx) * (1.0 - fy)),
        (i00 + 1, fx * (1.0 - fy)),
        (i00 + cols, (1.0 - fx) * fy),
        (i00 + cols + 1, fx * fy),
    ]
}

#[inline]
fn cell(n: usize, t: f64) -> (usize, f64) {
    let g = t.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = (g.floor() as usize).min(n - 2);
    (i, (g - i as f64).clamp(0.0, 1.0))
}

/// Rescales a spherical tangent disparity map with its deformation grid,
/// `D̃(x) = s(x)·D(x) + o(x)`.
pub fn apply_deformation(map: &DisparityMap, grid: &DeformationGrid) -> Result<DisparityMap> {
    let Some(img) = map.as_tangent() else {
        return Err(Error::Misuse(
            "deformation grids act on tangent-domain maps".into(),
        ));
    };
    if img.camera.face_index != grid.face_index {
        return Err(Error::Misuse(format!(
            "grid for face {} applied to map of face {}",
            grid.face_index, img.camera.face_index
        )));
    }
    if map.semantics() != Semantics::Spherical {
        return Err(Error::Misuse(
            "deformation expects spherical disparity".into(),
        ));
    }
    let mut raster = img.raster.clone();
    let (w, h) = (raster.width as f64, raster.height as f64);
    for row in 0..raster.height {
        for col in 0..raster.width {
            let i = raster.index(col, row);
            if raster.mask[i] {
                let pos = [(col as f64 + 0.5) / w, (row as f64 + 0.5) / h];
                let (s, o) = grid.scale_offset_at(pos);
                raster.data[i] = s * raster.data[i] + o;
            }
        }
    }
    Ok(map.with_raster(raster))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_icosahedron_layout;
    use crate::image::{Raster, TangentImage};

    fn spherical_map(face: usize, w: usize, h: usize) -> DisparityMap {
        let layout = build_icosahedron_layout(0.3, w, h).unwrap();
        let data = (0..w * h).map(|i| (i as f64 * 0.37).sin()).collect();
        let img = TangentImage::new(
            layout.cameras[face].clone(),
            Raster::from_scalar(w, h, data).unwrap(),
        )
        .unwrap();
        DisparityMap::tangent(img, Semantics::Spherical).unwrap()
    }

    #[test]
    fn identity_grid_is_exact() {
        let map = spherical_map(4, 9, 7);
        let out = apply_deformation(&map, &DeformationGrid::identity(4, 4, 3)).unwrap();
        assert_eq!(out.raster().data, map.raster().data);
    }

    #[test]
    fn uniform_grid_is_affine() {
        let map = spherical_map(4, 9, 7);
        let out = apply_deformation(&map, &DeformationGrid::uniform(4, 8, 7, 2.0, 1.0)).unwrap();
        for (a, b) in out.raster().data.iter().zip(&map.raster().data) {
            assert!((a - (2.0 * b + 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn two_by_two_center_interpolates_by_hand() {
        let mut grid = DeformationGrid::identity(0, 2, 2);
        grid.scales = vec![1.0, 1.0, 3.0, 3.0];
        let (s, o) = grid.scale_offset_at([0.5, 0.5]);
        assert_eq!((s, o), (2.0, 0.0));
        // image centre pixel of an odd-sized image sits exactly at (0.5, 0.5)
        let mut map = spherical_map(0, 5, 3);
        let raster = Raster::filled(5, 3, 1, 1.0);
        *map.raster_mut() = raster;
        let out = apply_deformation(&map, &grid).unwrap();
        assert_eq!(out.raster().get(2, 1, 0), 2.0);
    }

    #[test]
    fn corner_weights_hit_corner_points() {
        let w = bilinear_weights(4, 3, [0.0, 0.0]);
        assert_eq!(w[0], (0, 1.0));
        let w = bilinear_weights(4, 3, [1.0, 1.0]);
        assert_eq!(w[3], (11, 1.0));
        let total: f64 = bilinear_weights(16, 14, [0.33, 0.71])
            .iter()
            .map(|p| p.1)
            .sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mismatched_face_and_semantics_are_rejected() {
        let map = spherical_map(2, 5, 4);
        assert!(matches!(
            apply_deformation(&map, &DeformationGrid::identity(3, 2, 2)),
            Err(Error::Misuse(_))
        ));
        let persp =
            DisparityMap::tangent(map.as_tangent().unwrap().clone(), Semantics::Perspective)
                .unwrap();
        assert!(matches!(
            apply_deformation(&persp, &DeformationGrid::identity(2, 2, 2)),
            Err(Error::Misuse(_))
        ));
    }
}
