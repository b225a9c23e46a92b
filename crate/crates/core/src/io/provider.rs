//! Provider directory: 20 per-face PFM disparity maps plus `manifest.json`
//! echoing the hash of the camera layout they were computed for.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pfm::{read_pfm, write_pfm};
use crate::disparity::{DisparityMap, Semantics};
use crate::error::{Error, Result};
use crate::geometry::{IcosahedronLayout, FACE_COUNT};
use crate::image::{Raster, TangentImage};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaceEntry {
    pub face_index: usize,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderManifest {
    pub layout_hash: String,
    pub model_id: String,
    pub model_version: String,
    pub tangent_width: usize,
    pub tangent_height: usize,
    pub faces: Vec<FaceEntry>,
}

pub fn face_file_name(face: usize) -> String {
    format!("face_{face:02}.pfm")
}

impl ProviderManifest {
    pub fn for_layout(layout: &IcosahedronLayout, model_id: &str, model_version: &str) -> Self {
        let (w, h) = layout.tangent_size();
        Self {
            layout_hash: layout.hash(),
            model_id: model_id.to_string(),
            model_version: model_version.to_string(),
            tangent_width: w,
            tangent_height: h,
            faces: (0..layout.len())
                .map(|f| FaceEntry {
                    face_index: f,
                    file: face_file_name(f),
                })
                .collect(),
        }
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path)
            .map_err(|e| Error::Provider(format!("cannot read {}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn write_atomic(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let tmp = path.with_extension("tmp");
    write(&tmp)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes raw per-face disparity rasters (face order) and the manifest.
pub fn write_provider_dir(
    dir: &Path,
    manifest: &ProviderManifest,
    rasters: &[Raster],
) -> Result<()> {
    if rasters.len() != manifest.faces.len() {
        return Err(Error::Provider(format!(
            "{} rasters for {} manifest entries",
            rasters.len(),
            manifest.faces.len()
        )));
    }
    fs::create_dir_all(dir)?;
    for (entry, raster) in manifest.faces.iter().zip(rasters) {
        write_atomic(&dir.join(&entry.file), |p| write_pfm(p, raster))?;
    }
    let json = serde_json::to_string_pretty(manifest)?;
    write_atomic(&dir.join(MANIFEST_FILE), |p| Ok(fs::write(p, json)?))
}

/// Outcome of checking a provider directory against a layout.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContractReport {
    pub faces_found: usize,
    pub violations: Vec<String>,
}

impl ContractReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn entry_paths(dir: &Path, manifest: &ProviderManifest) -> Result<Vec<PathBuf>> {
    let mut paths = vec![None; FACE_COUNT];
    for entry in &manifest.faces {
        if entry.face_index >= FACE_COUNT {
            return Err(Error::Provider(format!(
                "manifest names face {}",
                entry.face_index
            )));
        }
        if paths[entry.face_index].is_some() {
            return Err(Error::Provider(format!(
                "face {} listed twice",
                entry.face_index
            )));
        }
        paths[entry.face_index] = Some(dir.join(&entry.file));
    }
    let missing: Vec<usize> = (0..FACE_COUNT)
        .filter(|&f| paths[f].as_ref().is_none_or(|p| !p.is_file()))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingFaces(missing));
    }
    Ok(paths.into_iter().flatten().collect())
}

fn check_header(manifest: &ProviderManifest, layout: &IcosahedronLayout) -> Vec<String> {
    let mut v = Vec::new();
    if manifest.layout_hash != layout.hash() {
        v.push(format!(
            "manifest layout hash {} does not match layout {}",
            manifest.layout_hash,
            layout.hash()
        ));
    }
    let (w, h) = layout.tangent_size();
    if (manifest.tangent_width, manifest.tangent_height) != (w, h) {
        v.push(format!(
            "manifest resolution {}x{} does not match layout {w}x{h}",
            manifest.tangent_width, manifest.tangent_height
        ));
    }
    v
}

fn check_face(face: usize, raster: &Raster, layout: &IcosahedronLayout) -> Vec<String> {
    let (w, h) = layout.tangent_size();
    let mut v = Vec::new();
    if raster.channels != 1 {
        v.push(format!(
            "face {face}: {} channels, expected 1",
            raster.channels
        ));
    }
    if (raster.width, raster.height) != (w, h) {
        v.push(format!(
            "face {face}: {}x{}, expected {w}x{h}",
            raster.width, raster.height
        ));
    }
    let invalid = raster.len() - raster.valid_count();
    if invalid > 0 {
        v.push(format!("face {face}: {invalid} non-finite values"));
    }
    v
}

/// Lists every contract violation of a provider directory without stopping
/// at the first one.
pub fn check_provider_dir(dir: &Path, layout: &IcosahedronLayout) -> Result<ContractReport> {
    let manifest = ProviderManifest::read(dir)?;
    let mut report = ContractReport {
        violations: check_header(&manifest, layout),
        ..Default::default()
    };
    let paths = match entry_paths(dir, &manifest) {
        Ok(p) => p,
        Err(Error::MissingFaces(missing)) => {
            report.faces_found = FACE_COUNT - missing.len();
            report.violations.push(format!("missing faces {missing:?}"));
            return Ok(report);
        }
        Err(e) => {
            report.violations.push(e.to_string());
            return Ok(report);
        }
    };
    report.faces_found = FACE_COUNT;
    let per_face: Vec<Vec<String>> = paths
        .par_iter()
        .enumerate()
        .map(|(f, p)| match read_pfm(p) {
            Ok(r) => check_face(f, &r, layout),
            Err(e) => vec![format!("face {f}: {e}")],
        })
        .collect();
    report.violations.extend(per_face.into_iter().flatten());
    Ok(report)
}

/// Loads the 20 single-channel tangent images of a provider directory,
/// failing on the first contract violation.
pub fn load_face_images(dir: &Path, layout: &IcosahedronLayout) -> Result<Vec<TangentImage>> {
    let manifest = ProviderManifest::read(dir)?;
    if let Some(v) = check_header(&manifest, layout).into_iter().next() {
        return Err(Error::Provider(v));
    }
    let paths = entry_paths(dir, &manifest)?;
    paths
        .par_iter()
        .enumerate()
        .map(|(f, p)| {
            let raster = read_pfm(p).map_err(|e| e.for_face(f))?;
            if let Some(v) = check_face(f, &raster, layout).into_iter().next() {
                return Err(Error::Provider(v));
            }
            TangentImage::new(layout.cameras[f].clone(), raster).map_err(|e| e.for_face(f))
        })
        .collect()
}

/// Loads a provider directory as raw perspective disparity maps.
pub fn load_provider_dir(dir: &Path, layout: &IcosahedronLayout) -> Result<Vec<DisparityMap>> {
    load_face_images(dir, layout)?
        .into_iter()
        .enumerate()
        .map(|(f, img)| {
            DisparityMap::tangent(img, Semantics::Perspective).map_err(|e| e.for_face(f))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_icosahedron_layout;

    fn small_layout() -> IcosahedronLayout {
        build_icosahedron_layout(0.3, 8, 7).unwrap()
    }

    fn rasters(layout: &IcosahedronLayout) -> Vec<Raster> {
        let (w, h) = layout.tangent_size();
        (0..FACE_COUNT)
            .map(|f| Raster::filled(w, h, 1, 1.0 + f as f64))
            .collect()
    }

    #[test]
    fn written_directory_passes_the_contract() {
        let dir = tempfile::tempdir().unwrap();
        let layout = small_layout();
        let manifest = ProviderManifest::for_layout(&layout, "test", "0");
        write_provider_dir(dir.path(), &manifest, &rasters(&layout)).unwrap();
        let report = check_provider_dir(dir.path(), &layout).unwrap();
        assert!(report.is_valid(), "{:?}", report.violations);
        let maps = load_provider_dir(dir.path(), &layout).unwrap();
        assert_eq!(maps.len(), 20);
        assert_eq!(maps[7].raster().data[0], 8.0);
    }

    #[test]
    fn missing_face_is_reported_by_index() {
        let dir = tempfile::tempdir().unwrap();
        let layout = small_layout();
        let manifest = ProviderManifest::for_layout(&layout, "test", "0");
        write_provider_dir(dir.path(), &manifest, &rasters(&layout)).unwrap();
        fs::remove_file(dir.path().join(face_file_name(13))).unwrap();
        match load_provider_dir(dir.path(), &layout) {
            Err(Error::MissingFaces(f)) => assert_eq!(f, vec![13]),
            other => panic!("unexpected {other:?}"),
        }
        assert!(!check_provider_dir(dir.path(), &layout).unwrap().is_valid());
    }

    #[test]
    fn layout_hash_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let layout = small_layout();
        let other = build_icosahedron_layout(0.2, 8, 7).unwrap();
        let manifest = ProviderManifest::for_layout(&other, "test", "0");
        write_provider_dir(dir.path(), &manifest, &rasters(&layout)).unwrap();
        assert!(matches!(
            load_provider_dir(dir.path(), &layout),
            Err(Error::Provider(_))
        ));
    }

    #[test]
    fn non_finite_values_are_violations() {
        let dir = tempfile::tempdir().unwrap();
        let layout = small_layout();
        let manifest = ProviderManifest::for_layout(&layout, "test", "0");
        let mut r = rasters(&layout);
        r[4].mask[3] = false;
        write_provider_dir(dir.path(), &manifest, &r).unwrap();
        let report = check_provider_dir(dir.path(), &layout).unwrap();
        assert_eq!(report.violations.len(), 1);
        assert!(report.violations[0].starts_with("face 4"));
    }
}
