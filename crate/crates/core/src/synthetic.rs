//! Analytic test scenes standing in for a monocular depth network: exact
//! ERP depth plus per-face perspective disparity with a random affine
//! corruption per face.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disparity::{DisparityMap, Semantics};
use crate::error::{Error, Result};
use crate::geometry::{check_erp_dims, erp_pixel_direction, IcosahedronLayout, TangentCamera};
use crate::image::{ErpImage, Raster, TangentImage};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    #[default]
    BoxRoom,
    SphereInRoom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub scene: SceneKind,
    /// Half extents of the axis-aligned room, centred on the origin.
    pub room_half_extents: [f64; 3],
    /// Position of the centre of projection inside the room.
    pub camera_position: [f64; 3],
    pub sphere_center: [f64; 3],
    pub sphere_radius: f64,
    /// Per-face disparity scale is drawn uniformly from this range.
    pub scale_range: [f64; 2],
    pub offset_range: [f64; 2],
    /// Amplitude of an extra smooth, low-frequency additive field per face
    /// (zero disables it).
    pub smooth_amplitude: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            scene: SceneKind::BoxRoom,
            room_half_extents: [1.6, 1.2, 1.0],
            camera_position: [0.25, -0.15, 0.1],
            sphere_center: [0.9, 0.5, -0.35],
            sphere_radius: 0.3,
            scale_range: [0.5, 2.0],
            offset_range: [-0.5, 0.5],
            smooth_amplitude: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    /// Same scene without any corruption.
    pub fn clean(&self) -> Self {
        Self {
            scale_range: [1.0, 1.0],
            offset_range: [0.0, 0.0],
            smooth_amplitude: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let inside = (0..3).all(|i| {
            self.room_half_extents[i] > 0.0
                && self.camera_position[i].abs() < self.room_half_extents[i]
        });
        if !inside {
            return Err(Error::Config(
                "camera must lie strictly inside the room".into(),
            ));
        }
        let [s0, s1] = self.scale_range;
        if !(s0 > 0.0 && s0 <= s1) {
            return Err(Error::Config(format!(
                "scale range [{s0}, {s1}] must be positive and ordered"
            )));
        }
        if !(self.offset_range[0] <= self.offset_range[1]) {
            return Err(Error::Config("offset range must be ordered".into()));
        }
        if self.smooth_amplitude < 0.0 || !self.smooth_amplitude.is_finite() {
            return Err(Error::Config(
                "smooth_amplitude must be non-negative".into(),
            ));
        }
        if self.scene == SceneKind::SphereInRoom {
            let c = Vector3::from(self.sphere_center);
            let cam = Vector3::from(self.camera_position);
            if !(self.sphere_radius > 0.0) || (c - cam).norm() <= self.sphere_radius {
                return Err(Error::Config(
                    "camera must lie outside a sphere of positive radius".into(),
                ));
            }
            if (0..3).any(|i| c[i].abs() + self.sphere_radius >= self.room_half_extents[i]) {
                return Err(Error::Config("sphere must fit inside the room".into()));
            }
        }
        Ok(())
    }
}

/// Ray-cast scene seen from `camera_position`.
#[derive(Clone, Debug)]
pub struct SyntheticScene {
    config: SyntheticConfig,
}

impl SyntheticScene {
    pub fn new(config: SyntheticConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &SyntheticConfig {
        &self.config
    }

    fn room_distance(&self, dir: &Vector3<f64>) -> f64 {
        let c = &self.config.camera_position;
        let h = &self.config.room_half_extents;
        (0..3)
            .filter(|&i| dir[i] != 0.0)
            .map(|i| (h[i].copysign(dir[i]) - c[i]) / dir[i])
            .fold(f64::INFINITY, f64::min)
    }

    fn sphere_distance(&self, dir: &Vector3<f64>) -> Option<f64> {
        let rel =
            Vector3::from(self.config.sphere_center) - Vector3::from(self.config.camera_position);
        let b = dir.dot(&rel);
        let disc = b * b - (rel.norm_squared() - self.config.sphere_radius.powi(2));
        if disc < 0.0 {
            return None;
        }
        let t = b - disc.sqrt();
        (t > 0.0).then_some(t)
    }

    /// Radial distance to the first surface along the unit direction `dir`.
    pub fn depth(&self, dir: &Vector3<f64>) -> f64 {
        let room = self.room_distance(dir);
        match self.config.scene {
            SceneKind::BoxRoom => room,
            SceneKind::SphereInRoom => self.sphere_distance(dir).map_or(room, |t| t.min(room)),
        }
    }

    /// Exact perspective disparity `1/z` at plane coordinates of `camera`.
    pub fn perspective_disparity(&self, camera: &TangentCamera, x: f64, y: f64) -> f64 {
        let dir = camera.plane_to_vector(x, y);
        let cos = 1.0 / (1.0 + x * x + y * y).sqrt();
        1.0 / (self.depth(&dir) * cos)
    }

    /// Procedural RGB texture in `[0, 1]` at the surface hit along `dir`.
    pub fn radiance(&self, dir: &Vector3<f64>) -> [f64; 3] {
        let p = Vector3::from(self.config.camera_position) + dir * self.depth(dir);
        let checker =
            ((p.x * 4.0).floor() + (p.y * 4.0).floor() + (p.z * 4.0).floor()).rem_euclid(2.0);
        let base = 0.35 + 0.3 * checker;
        [
            base + 0.15 * (p.x * 7.0).sin(),
            base + 0.15 * (p.y * 5.0 + 1.0).sin(),
            base + 0.15 * (p.z * 6.0 + 2.0).sin(),
        ]
    }

    /// Ground-truth radial depth on an ERP grid.
    pub fn render_depth(&self, width: usize, height: usize) -> Result<ErpImage> {
        check_erp_dims(width, height)?;
        let data = (0..width * height)
            .into_par_iter()
            .map(|i| self.depth(&erp_pixel_direction(i % width, i / width, width, height)))
            .collect();
        ErpImage::new(Raster::from_scalar(width, height, data)?)
    }

    /// RGB rendering of the textured scene on an ERP grid.
    pub fn render_color(&self, width: usize, height: usize) -> Result<ErpImage> {
        check_erp_dims(width, height)?;
        let data = (0..width * height)
            .into_par_iter()
            .flat_map_iter(|i| {
                self.radiance(&erp_pixel_direction(i % width, i / width, width, height))
            })
            .collect();
        ErpImage::new(Raster {
            width,
            height,
            channels: 3,
            data,
            mask: vec![true; width * height],
        })
    }

    /// Exact perspective disparity rendered for one tangent camera.
    pub fn render_perspective(&self, camera: &TangentCamera) -> Result<TangentImage> {
        let (w, h) = (camera.width_px, camera.height_px);
        let mut data = vec![0.0; w * h];
        data.par_chunks_mut(w).enumerate().for_each(|(row, out)| {
            for (col, v) in out.iter_mut().enumerate() {
                let (x, y) = camera.pixel_to_plane(col as f64, row as f64);
                *v = self.perspective_disparity(camera, x, y);
            }
        });
        TangentImage::new(camera.clone(), Raster::from_scalar(w, h, data)?)
    }
}

/// The affine corruption applied to one face: `D ↦ scale·D + offset`,
/// plus an optional smooth field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceCorruption {
    pub face_index: usize,
    pub scale: f64,
    pub offset: f64,
    /// Amplitude and phases of `a·sin(πu + φ₁)·cos(πv + φ₂)` over the
    /// normalized image coordinates.
    pub smooth: [f64; 3],
}

impl FaceCorruption {
    pub fn apply(&self, value: f64, u: f64, v: f64) -> f64 {
        let [a, p1, p2] = self.smooth;
        let field = if a == 0.0 {
            0.0
        } else {
            a * (std::f64::consts::PI * u + p1).sin() * (std::f64::consts::PI * v + p2).cos()
        };
        self.scale * value + self.offset + field
    }
}

/// Draws the per-face corruption table; the draw order is fixed so a seed
/// always gives the same table.
pub fn draw_corruptions(config: &SyntheticConfig, faces: usize) -> Vec<FaceCorruption> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..faces)
        .map(|face_index| {
            let scale = rng.random_range(config.scale_range[0]..=config.scale_range[1]);
            let offset = rng.random_range(config.offset_range[0]..=config.offset_range[1]);
            let p1 = rng.random_range(0.0..std::f64::consts::TAU);
            let p2 = rng.random_range(0.0..std::f64::consts::TAU);
            FaceCorruption {
                face_index,
                scale,
                offset,
                smooth: [config.smooth_amplitude, p1, p2],
            }
        })
        .collect()
}

/// Everything a synthetic run needs.
#[derive(Clone, Debug)]
pub struct SyntheticData {
    /// Radial ground-truth depth.
    pub gt_depth: ErpImage,
    /// Corrupted perspective disparity per face, as a provider would emit it.
    pub maps: Vec<DisparityMap>,
    pub corruptions: Vec<FaceCorruption>,
}

/// Renders the ground truth and 20 corrupted perspective disparity maps.
pub fn generate_synthetic(
    config: &SyntheticConfig,
    layout: &IcosahedronLayout,
    erp_width: usize,
    erp_height: usize,
) -> Result<SyntheticData> {
    let scene = SyntheticScene::new(config.clone())?;
    let gt_depth = scene.render_depth(erp_width, erp_height)?;
    let corruptions = draw_corruptions(config, layout.len());
    let maps = layout
        .cameras
        .par_iter()
        .zip(&corruptions)
        .map(|(camera, c)| {
            let mut img = scene.render_perspective(camera)?;
            let (w, h) = (img.raster.width, img.raster.height);
            for (i, v) in img.raster.data.iter_mut().enumerate() {
                let u = ((i % w) as f64 + 0.5) / w as f64;
                let t = ((i / w) as f64 + 0.5) / h as f64;
                *v = c.apply(*v, u, t);
            }
            DisparityMap::tangent(img, Semantics::Perspective)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SyntheticData {
        gt_depth,
        maps,
        corruptions,
    })
}
