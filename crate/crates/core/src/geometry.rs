//! Spherical coordinates, the icosahedral tangent-camera layout and the
//! gnomonic projection between the sphere and each tangent plane.
//!
//! Conventions:
//! - unit vectors are `(cos lat cos lon, cos lat sin lon, sin lat)`, so `+z`
//!   is the north pole;
//! - every camera has an orthonormal frame `(axis, east, north)` where `axis`
//!   is the tangent point, `east` points towards increasing longitude and
//!   `north` completes the right-handed in-plane basis (image "up");
//! - plane coordinates are `x = p·east / p·axis`, `y = p·north / p·axis`;
//! - tangent pixel `(i, j)` has its centre at
//!   `x = x_min + (i + 0.5)·w/W`, `y = y_max − (j + 0.5)·h/H` (row 0 on top).

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{Rotation3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of tangent cameras in the icosahedral layout.
pub const FACE_COUNT: usize = 20;

/// Minimum `cos` of the angle between a direction and a tangent point for the
/// gnomonic projection to be considered valid.
pub const GNOMONIC_MIN_COS: f64 = 1e-9;

/// A direction on the unit sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphericalCoord {
    /// Longitude in radians, `[−π, π)`.
    pub lon: f64,
    /// Latitude in radians, `[−π/2, π/2]`.
    pub lat: f64,
}

impl SphericalCoord {
    /// Builds a coordinate, wrapping longitude and clamping latitude.
    pub fn new(lon: f64, lat: f64) -> Self {
        Self {
            lon: normalize_lon(lon),
            lat: lat.clamp(-FRAC_PI_2, FRAC_PI_2),
        }
    }

    pub fn to_unit_vector(&self) -> Vector3<f64> {
        let (sin_lat, cos_lat) = self.lat.sin_cos();
        let (sin_lon, cos_lon) = self.lon.sin_cos();
        Vector3::new(cos_lat * cos_lon, cos_lat * sin_lon, sin_lat)
    }

    /// Converts a (not necessarily unit) non-zero vector to a direction.
    pub fn from_unit_vector(v: &Vector3<f64>) -> Self {
        let horizontal = v.x.hypot(v.y);
        Self::new(v.y.atan2(v.x), v.z.atan2(horizontal))
    }

    /// Great-circle distance in radians.
    pub fn angular_distance(&self, other: &SphericalCoord) -> f64 {
        angle_between(&self.to_unit_vector(), &other.to_unit_vector())
    }
}

/// Wraps a longitude into `[−π, π)`.
pub fn normalize_lon(lon: f64) -> f64 {
    let wrapped = (lon + PI).rem_euclid(TAU) - PI;
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if wrapped >= PI {
        wrapped - TAU
    } else {
        wrapped
    }
}

/// Numerically stable angle between two vectors.
pub fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Converts a continuous ERP pixel position (pixel centres at integers) to a
/// direction on the sphere.
pub fn erp_pixel_to_spherical(
    u: f64,
    v: f64,
    width: usize,
    height: usize,
) -> Result<SphericalCoord> {
    check_erp_dims(width, height)?;
    Ok(erp_to_spherical_unchecked(u, v, width, height))
}

/// Inverse of [`erp_pixel_to_spherical`]; `u` is wrapped into `[−0.5, width − 0.5)`.
pub fn spherical_to_erp_pixel(
    coord: &SphericalCoord,
    width: usize,
    height: usize,
) -> Result<(f64, f64)> {
    check_erp_dims(width, height)?;
    Ok(spherical_to_erp_unchecked(coord, width, height))
}

pub(crate) fn check_erp_dims(width: usize, height: usize) -> Result<()> {
    if height == 0 || width != 2 * height {
        return Err(Error::Parameter(format!(
            "equirectangular grid must be 2:1, got {width}x{height}"
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn erp_to_spherical_unchecked(
    u: f64,
    v: f64,
    width: usize,
    height: usize,
) -> SphericalCoord {
    let lon = (u + 0.5) / width as f64 * TAU - PI;
    let lat = FRAC_PI_2 - (v + 0.5) / height as f64 * PI;
    SphericalCoord::new(lon, lat)
}

#[inline]
pub(crate) fn spherical_to_erp_unchecked(
    coord: &SphericalCoord,
    width: usize,
    height: usize,
) -> (f64, f64) {
    let w = width as f64;
    let mut u = (coord.lon + PI) / TAU * w - 0.5;
    if u < -0.5 {
        u += w;
    } else if u >= w - 0.5 {
        u -= w;
    }
    let v = (FRAC_PI_2 - coord.lat) / PI * height as f64 - 0.5;
    (u, v)
}

/// Unit direction of the centre of ERP pixel `(col, row)`.
#[inline]
pub(crate) fn erp_pixel_direction(
    col: usize,
    row: usize,
    width: usize,
    height: usize,
) -> Vector3<f64> {
    erp_to_spherical_unchecked(col as f64, row as f64, width, height).to_unit_vector()
}

/// A gnomonic tangent-plane camera covering one icosahedron face.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentCamera {
    pub face_index: usize,
    pub tangent_point: SphericalCoord,
    /// Optical axis (unit vector of the tangent point).
    pub axis: [f64; 3],
    /// In-plane `+x` direction.
    pub east: [f64; 3],
    /// In-plane `+y` direction.
    pub north: [f64; 3],
    /// Centre of the image rectangle in plane coordinates. The tight bound of
    /// a triangle is not centred on its centroid, so this is generally not
    /// the principal point `(0, 0)`.
    pub center_x: f64,
    pub center_y: f64,
    /// Padded half-widths of the image rectangle in plane units.
    pub half_extent_x: f64,
    pub half_extent_y: f64,
    pub padding: f64,
    pub width_px: usize,
    pub height_px: usize,
}

/// Plane-space rectangle `[x_min, x_max] × [y_min, y_max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneRect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl PlaneRect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }
}

/// Factor between padded and tight rectangle extents: every side moves
/// outwards by `padding` times the tight width (or height), so the extent
/// grows by `1 + 2p`.
#[inline]
pub fn padding_scale(padding: f64) -> f64 {
    1.0 + 2.0 * padding
}

impl TangentCamera {
    /// Builds a camera tangent at `tangent_point` whose un-padded rectangle
    /// tightly bounds the gnomonic image of `face_vertices`.
    pub fn for_face(
        face_index: usize,
        tangent_point: Vector3<f64>,
        face_vertices: &[Vector3<f64>],
        padding: f64,
        width_px: usize,
        height_px: usize,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&padding) {
            return Err(Error::Parameter(format!(
                "padding {padding} outside [0, 1]"
            )));
        }
        if width_px < 2 || height_px < 2 {
            return Err(Error::Parameter(format!(
                "tangent resolution {width_px}x{height_px} must be at least 2x2"
            )));
        }
        let axis = tangent_point.normalize();
        let (east, north) = tangent_frame(&axis);
        let mut rect = PlaneRect {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for vertex in face_vertices {
            let cos = vertex.dot(&axis);
            if cos <= GNOMONIC_MIN_COS {
                return Err(Error::Parameter(format!(
                    "face {face_index} vertex not in the tangent hemisphere"
                )));
            }
            let x = vertex.dot(&east) / cos;
            let y = vertex.dot(&north) / cos;
            rect.x_min = rect.x_min.min(x);
            rect.x_max = rect.x_max.max(x);
            rect.y_min = rect.y_min.min(y);
            rect.y_max = rect.y_max.max(y);
        }
        Ok(Self {
            face_index,
            tangent_point: SphericalCoord::from_unit_vector(&axis),
            axis: axis.into(),
            east: east.into(),
            north: north.into(),
            center_x: 0.5 * (rect.x_min + rect.x_max),
            center_y: 0.5 * (rect.y_min + rect.y_max),
            half_extent_x: 0.5 * (rect.x_max - rect.x_min) * padding_scale(padding),
            half_extent_y: 0.5 * (rect.y_max - rect.y_min) * padding_scale(padding),
            padding,
            width_px,
            height_px,
        })
    }

    #[inline]
    pub fn axis(&self) -> Vector3<f64> {
        Vector3::from(self.axis)
    }

    #[inline]
    pub fn east(&self) -> Vector3<f64> {
        Vector3::from(self.east)
    }

    #[inline]
    pub fn north(&self) -> Vector3<f64> {
        Vector3::from(self.north)
    }

    /// Padded image rectangle in plane coordinates.
    pub fn rect(&self) -> PlaneRect {
        PlaneRect {
            x_min: self.center_x - self.half_extent_x,
            x_max: self.center_x + self.half_extent_x,
            y_min: self.center_y - self.half_extent_y,
            y_max: self.center_y + self.half_extent_y,
        }
    }

    /// Rectangle before padding was applied.
    pub fn unpadded_rect(&self) -> PlaneRect {
        let hx = self.half_extent_x / padding_scale(self.padding);
        let hy = self.half_extent_y / padding_scale(self.padding);
        PlaneRect {
            x_min: self.center_x - hx,
            x_max: self.center_x + hx,
            y_min: self.center_y - hy,
            y_max: self.center_y + hy,
        }
    }

    /// Projects a spherical direction onto the tangent plane.
    pub fn gnomonic_forward(&self, point: &SphericalCoord) -> (f64, f64, bool) {
        self.project_vector(&point.to_unit_vector())
    }

    /// Same as [`Self::gnomonic_forward`] for a unit vector.
    #[inline]
    pub fn project_vector(&self, dir: &Vector3<f64>) -> (f64, f64, bool) {
        let cos = dir.dot(&self.axis());
        if cos <= GNOMONIC_MIN_COS {
            return (0.0, 0.0, false);
        }
        (
            dir.dot(&self.east()) / cos,
            dir.dot(&self.north()) / cos,
            true,
        )
    }

    /// Back-projects plane coordinates to a direction on the sphere.
    pub fn gnomonic_inverse(&self, x: f64, y: f64) -> SphericalCoord {
        SphericalCoord::from_unit_vector(&self.plane_to_vector(x, y))
    }

    /// Unit ray through plane point `(x, y)`.
    #[inline]
    pub fn plane_to_vector(&self, x: f64, y: f64) -> Vector3<f64> {
        (self.axis() + self.east() * x + self.north() * y).normalize()
    }

    /// Plane coordinates of the centre of pixel `(col, row)`.
    #[inline]
    pub fn pixel_to_plane(&self, col: f64, row: f64) -> (f64, f64) {
        let r = self.rect();
        let x = r.x_min + (col + 0.5) / self.width_px as f64 * (r.x_max - r.x_min);
        let y = r.y_max - (row + 0.5) / self.height_px as f64 * (r.y_max - r.y_min);
        (x, y)
    }

    /// Continuous pixel position (centres at integers) of a plane point.
    #[inline]
    pub fn plane_to_pixel(&self, x: f64, y: f64) -> (f64, f64) {
        let r = self.rect();
        let col = (x - r.x_min) / (r.x_max - r.x_min) * self.width_px as f64 - 0.5;
        let row = (r.y_max - y) / (r.y_max - r.y_min) * self.height_px as f64 - 0.5;
        (col, row)
    }

    /// Position of a plane point normalized to the padded image, `[0, 1]²`
    /// with `(0, 0)` at the top-left image corner.
    #[inline]
    pub fn plane_to_normalized(&self, x: f64, y: f64) -> [f64; 2] {
        let r = self.rect();
        [
            (x - r.x_min) / (r.x_max - r.x_min),
            (r.y_max - y) / (r.y_max - r.y_min),
        ]
    }

    /// Whether a unit direction falls inside the padded footprint; returns
    /// its plane coordinates when it does.
    #[inline]
    pub fn footprint_coords(&self, dir: &Vector3<f64>) -> Option<(f64, f64)> {
        let (x, y, valid) = self.project_vector(dir);
        (valid && self.rect().contains(x, y)).then_some((x, y))
    }

    pub fn footprint_contains(&self, point: &SphericalCoord) -> bool {
        self.footprint_coords(&point.to_unit_vector()).is_some()
    }

    /// Gauge of a plane point relative to the padded rectangle, measured from
    /// the principal point: 0 at the principal point, 1 on the border,
    /// linear along every ray from the principal point.
    pub fn principal_gauge(&self, x: f64, y: f64) -> f64 {
        let r = self.rect();
        let gx = if x >= 0.0 { x / r.x_max } else { x / r.x_min };
        let gy = if y >= 0.0 { y / r.y_max } else { y / r.y_min };
        gx.max(gy)
    }

    /// Returns the camera with its whole frame rotated.
    pub fn rotated(&self, rotation: &Rotation3<f64>) -> Self {
        let axis = rotation * self.axis();
        Self {
            tangent_point: SphericalCoord::from_unit_vector(&axis),
            axis: axis.into(),
            east: (rotation * self.east()).into(),
            north: (rotation * self.north()).into(),
            ..self.clone()
        }
    }

    /// Angular radius from the tangent point to the farthest padded corner.
    pub fn max_angular_radius(&self) -> f64 {
        let r = self.rect();
        [
            (r.x_min, r.y_min),
            (r.x_min, r.y_max),
            (r.x_max, r.y_min),
            (r.x_max, r.y_max),
        ]
        .iter()
        .map(|&(x, y)| x.hypot(y).atan())
        .fold(0.0, f64::max)
    }
}

/// In-plane basis at `axis`: east along increasing longitude, north towards
/// the pole. Directions at a pole use the `lon = 0` meridian as reference.
fn tangent_frame(axis: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let z = Vector3::z();
    let east = z.cross(axis);
    let east = if east.norm() < 1e-12 {
        // looking straight at a pole: +y is east of the lon = 0 meridian
        Vector3::y()
    } else {
        east.normalize()
    };
    let north = axis.cross(&east).normalize();
    (east, north)
}

/// The 20 tangent cameras of an icosahedron.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IcosahedronLayout {
    pub cameras: Vec<TangentCamera>,
}

/// Vertices of the icosahedron with vertices at both poles: index 0 is the
/// north pole, 1..=5 the upper ring at `lon = 72°k`, 6..=10 the lower ring
/// at `lon = 36° + 72°k`, 11 the south pole.
pub fn icosahedron_vertices() -> [Vector3<f64>; 12] {
    let ring_lat = 0.5f64.atan();
    let mut v = [Vector3::zeros(); 12];
    v[0] = Vector3::z();
    v[11] = -Vector3::z();
    for k in 0..5 {
        let upper = (72.0 * k as f64).to_radians();
        let lower = (36.0 + 72.0 * k as f64).to_radians();
        v[1 + k] = SphericalCoord::new(upper, ring_lat).to_unit_vector();
        v[6 + k] = SphericalCoord::new(lower, -ring_lat).to_unit_vector();
    }
    v
}

/// Vertex triples of the 20 faces: 0..5 around the north pole, 5..10 the
/// upper middle band, 10..15 the lower middle band, 15..20 around the south
/// pole.
pub fn icosahedron_faces() -> [[usize; 3]; 20] {
    let mut faces = [[0usize; 3]; 20];
    for k in 0..5 {
        let u0 = 1 + k;
        let u1 = 1 + (k + 1) % 5;
        let l0 = 6 + k;
        let l1 = 6 + (k + 1) % 5;
        faces[k] = [0, u0, u1];
        faces[5 + k] = [u0, u1, l0];
        faces[10 + k] = [l0, l1, u1];
        faces[15 + k] = [11, l0, l1];
    }
    faces
}

/// Builds the 20-camera layout with padding factor `padding`.
pub fn build_icosahedron_layout(
    padding: f64,
    width_px: usize,
    height_px: usize,
) -> Result<IcosahedronLayout> {
    let vertices = icosahedron_vertices();
    let cameras = icosahedron_faces()
        .iter()
        .enumerate()
        .map(|(index, face)| {
            let corners = face.map(|i| vertices[i]);
            let centroid = (corners[0] + corners[1] + corners[2]) / 3.0;
            TangentCamera::for_face(index, centroid, &corners, padding, width_px, height_px)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IcosahedronLayout { cameras })
}

impl IcosahedronLayout {
    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    pub fn padding(&self) -> f64 {
        self.cameras.first().map_or(0.0, |c| c.padding)
    }

    pub fn tangent_size(&self) -> (usize, usize) {
        self.cameras
            .first()
            .map_or((0, 0), |c| (c.width_px, c.height_px))
    }

    /// Index of the camera whose tangent point is angularly closest.
    pub fn nearest_face(&self, dir: &Vector3<f64>) -> usize {
        let mut best = 0;
        let mut best_dot = f64::NEG_INFINITY;
        for (i, cam) in self.cameras.iter().enumerate() {
            let d = dir.dot(&cam.axis());
            if d > best_dot {
                best_dot = d;
                best = i;
            }
        }
        best
    }

    /// Canonical JSON description shared with disparity providers.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("layout serializes")
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

/// Number of padded camera footprints containing each ERP pixel centre,
/// row-major.
pub fn coverage_map(
    layout: &IcosahedronLayout,
    erp_width: usize,
    erp_height: usize,
) -> Result<Vec<u8>> {
    check_erp_dims(erp_width, erp_height)?;
    let mut counts = vec![0u8; erp_width * erp_height];
    counts
        .par_chunks_mut(erp_width)
        .enumerate()
        .for_each(|(row, line)| {
            for (col, count) in line.iter_mut().enumerate() {
                let dir = erp_pixel_direction(col, row, erp_width, erp_height);
                *count = layout
                    .cameras
                    .iter()
                    .filter(|c| c.footprint_coords(&dir).is_some())
                    .count() as u8;
            }
        });
    Ok(counts)
}

/// Pixel-centre footprint mask of one camera over the ERP grid.
pub fn footprint_mask(
    camera: &TangentCamera,
    erp_width: usize,
    erp_height: usize,
) -> Result<Vec<bool>> {
    check_erp_dims(erp_width, erp_height)?;
    let mut mask = vec![false; erp_width * erp_height];
    mask.par_chunks_mut(erp_width)
        .enumerate()
        .for_each(|(row, line)| {
            for (col, m) in line.iter_mut().enumerate() {
                *m = camera
                    .footprint_coords(&erp_pixel_direction(col, row, erp_width, erp_height))
                    .is_some();
            }
        });
    Ok(mask)
}
