//! End-to-end runs: provider maps → spherical disparity → multi-scale
//! alignment → blending → optional evaluation, plus the ablation grid.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{
    align_multiscale, overlap_disagreement, AlignmentConfig, Disagreement, ScaleOutcome,
};
use crate::blending::{
    blend_poisson, blend_weighted, compute_weights, stitch_nn, BlendConfig, BlendWeightField,
    SolveReport, WeightScheme,
};
use crate::config::{BlendMode, PipelineConfig, ProviderConfig};
use crate::disparity::{DisparityMap, Semantics};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_pipeline, pole_cap_mask, MetricReport};
use crate::geometry::{build_icosahedron_layout, IcosahedronLayout};
use crate::image::{ErpImage, TangentImage};
use crate::io::{
    face_file_name, load_provider_dir, read_scalar_map, write_pfm, write_provider_dir,
    write_visualization_png, write_weight_png, ProviderManifest,
};
use crate::resample::{tangent_to_erp, Filter};
use crate::synthetic::{generate_synthetic, FaceCorruption};

/// Weight fields computed on demand and kept for reuse across blends.
pub struct WeightCache<'a> {
    layout: &'a IcosahedronLayout,
    width: usize,
    height: usize,
    config: BlendConfig,
    fields: HashMap<WeightScheme, Vec<BlendWeightField>>,
}

impl<'a> WeightCache<'a> {
    pub fn new(
        layout: &'a IcosahedronLayout,
        width: usize,
        height: usize,
        config: &BlendConfig,
    ) -> Self {
        Self {
            layout,
            width,
            height,
            config: config.clone(),
            fields: HashMap::new(),
        }
    }

    pub fn get(&mut self, scheme: WeightScheme) -> Result<&[BlendWeightField]> {
        if !self.fields.contains_key(&scheme) {
            let f = compute_weights(self.layout, scheme, self.width, self.height, &self.config)?;
            self.fields.insert(scheme, f);
        }
        Ok(&self.fields[&scheme])
    }
}

/// Output of one blend.
#[derive(Clone, Debug)]
pub struct BlendOutput {
    pub disparity: ErpImage,
    pub d_nn: ErpImage,
    pub solve: Option<SolveReport>,
}

/// Resamples aligned tangent maps onto the ERP grid, one map per face.
pub fn project_to_erp(maps: &[TangentImage], width: usize, height: usize) -> Result<Vec<ErpImage>> {
    maps.par_iter()
        .map(|m| tangent_to_erp(m, width, height, Filter::Bilinear))
        .collect()
}

/// Blends ERP-resampled aligned maps with `mode`.
pub fn blend_erp_maps(
    maps: &[ErpImage],
    mode: BlendMode,
    weights: &mut WeightCache<'_>,
    config: &BlendConfig,
) -> Result<BlendOutput> {
    let d_nn = stitch_nn(maps, weights.get(WeightScheme::Nn)?)?;
    let (disparity, solve) = match mode {
        BlendMode::Nn => (d_nn.clone(), None),
        BlendMode::Poisson => {
            let (out, report) =
                blend_poisson(maps, weights.get(WeightScheme::Frustum)?, &d_nn, config)?;
            (out, Some(report))
        }
        other => (
            blend_weighted(maps, weights.get(other.weight_scheme())?)?,
            None,
        ),
    };
    Ok(BlendOutput {
        disparity,
        d_nn,
        solve,
    })
}

/// Blends aligned tangent maps; the entry point behind the `blend` command.
pub fn blend_aligned(
    layout: &IcosahedronLayout,
    aligned: &[TangentImage],
    width: usize,
    height: usize,
    mode: BlendMode,
    config: &BlendConfig,
) -> Result<BlendOutput> {
    let maps = project_to_erp(aligned, width, height)?;
    let mut cache = WeightCache::new(layout, width, height, config);
    blend_erp_maps(&maps, mode, &mut cache, config)
}

/// Converts raw provider maps to spherical disparity, tagging failures with
/// their face.
pub fn to_spherical(maps: &[DisparityMap]) -> Result<Vec<DisparityMap>> {
    maps.iter()
        .enumerate()
        .map(|(i, m)| {
            let face = m.camera().map_or(i, |c| c.face_index);
            m.convert_to_spherical().map_err(|e| e.for_face(face))
        })
        .collect()
}

/// Aligned maps rounded to `f32`, the precision they are stored at, so a
/// blend from the dumped files reproduces the pipeline output exactly.
fn quantized_tangents(maps: &[DisparityMap]) -> Result<Vec<TangentImage>> {
    maps.iter()
        .map(|m| {
            let mut img = m
                .as_tangent()
                .ok_or_else(|| Error::Misuse("aligned maps must be tangent images".into()))?
                .clone();
            img.raster.quantize_f32();
            Ok(img)
        })
        .collect()
}

/// Provider maps and, for the synthetic oracle, its ground truth.
pub struct ProviderData {
    pub maps: Vec<DisparityMap>,
    pub gt_depth: Option<ErpImage>,
    pub corruptions: Option<Vec<FaceCorruption>>,
}

pub fn load_provider(config: &PipelineConfig, layout: &IcosahedronLayout) -> Result<ProviderData> {
    let mut data = match &config.provider {
        ProviderConfig::Files { dir } => ProviderData {
            maps: load_provider_dir(dir, layout)?,
            gt_depth: None,
            corruptions: None,
        },
        ProviderConfig::Synthetic(_) => {
            let synth = config.effective_synthetic().expect("synthetic provider");
            let data = generate_synthetic(&synth, layout, config.erp_width, config.erp_height)?;
            ProviderData {
                maps: data.maps,
                gt_depth: Some(data.gt_depth),
                corruptions: Some(data.corruptions),
            }
        }
    };
    if let Some(path) = &config.gt_depth {
        let raster = read_scalar_map(path)?;
        data.gt_depth = Some(ErpImage::new(raster)?);
    }
    Ok(data)
}

fn evaluation_mask(config: &PipelineConfig) -> Option<Vec<bool>> {
    config
        .matterport_mode
        .then(|| pole_cap_mask(config.erp_width, config.erp_height, config.pole_cap_deg()))
}

/// Summary of one alignment scale, as written to the run report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleSummary {
    pub cols: usize,
    pub rows: usize,
    pub samples: usize,
    pub iterations: usize,
    pub termination: String,
    pub energy_before: f64,
    pub energy_after: f64,
    pub alignment_before: f64,
    pub alignment_after: f64,
}

impl From<&ScaleOutcome> for ScaleSummary {
    fn from(s: &ScaleOutcome) -> Self {
        Self {
            cols: s.cols,
            rows: s.rows,
            samples: s.sample_count,
            iterations: s.report.iterations,
            termination: format!("{:?}", s.report.termination),
            energy_before: s.initial.total,
            energy_after: s.last.total,
            alignment_before: s.initial.alignment,
            alignment_after: s.last.alignment,
        }
    }
}

/// Machine-readable record of a run; contains no timings so that repeated
/// runs give identical files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub layout_hash: String,
    pub blend_mode: BlendMode,
    pub scales: Vec<ScaleSummary>,
    pub solve: Option<SolveReport>,
    pub disagreement_unaligned: Disagreement,
    pub disagreement_aligned: Disagreement,
    pub metrics: Option<MetricReport>,
}

/// Everything a pipeline run produces.
pub struct PipelineRun {
    pub layout: IcosahedronLayout,
    pub provider: ProviderData,
    /// Aligned spherical disparity per face, rounded to `f32`.
    pub aligned: Vec<TangentImage>,
    pub scales: Vec<ScaleOutcome>,
    pub blend: BlendOutput,
    pub report: RunReport,
}

/// Runs the whole pipeline in memory; see [`write_run`] for the outputs.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineRun> {
    config.validate()?;
    let layout =
        build_icosahedron_layout(config.padding, config.tangent_width, config.tangent_height)?;
    let (w, h) = (config.erp_width, config.erp_height);
    let provider = load_provider(config, &layout)?;
    let spherical = to_spherical(&provider.maps)?;

    let align_cfg = config.effective_alignment();
    let outcome = align_multiscale(&spherical, w, h, &align_cfg)?;
    let aligned = quantized_tangents(&outcome.maps)?;

    let unaligned = AlignmentConfig {
        grid_schedule: Vec::new(),
        ..align_cfg.clone()
    };
    let standardized = align_multiscale(&spherical, w, h, &unaligned)?.maps;
    let cap = align_cfg.pole_exclusion_deg;
    let disagreement_unaligned = overlap_disagreement(&standardized, w, h, cap)?;
    let aligned_maps: Vec<DisparityMap> = aligned
        .iter()
        .map(|t| DisparityMap::tangent(t.clone(), Semantics::Spherical))
        .collect::<Result<_>>()?;
    let disagreement_aligned = overlap_disagreement(&aligned_maps, w, h, cap)?;
    info!(
        "overlap disagreement {:.4} -> {:.4} (relative to spread)",
        disagreement_unaligned.relative(),
        disagreement_aligned.relative()
    );

    let blend_cfg = config.effective_blending();
    let blend = blend_aligned(&layout, &aligned, w, h, config.blend_mode, &blend_cfg)?;
    let metrics = match &provider.gt_depth {
        Some(gt) => Some(evaluate_pipeline(
            &blend.disparity,
            gt,
            evaluation_mask(config).as_deref(),
        )?),
        None => None,
    };
    let report = RunReport {
        layout_hash: layout.hash(),
        blend_mode: config.blend_mode,
        scales: outcome.scales.iter().map(ScaleSummary::from).collect(),
        solve: blend.solve,
        disagreement_unaligned,
        disagreement_aligned,
        metrics,
    };
    Ok(PipelineRun {
        layout,
        provider,
        aligned,
        scales: outcome.scales,
        blend,
        report,
    })
}

pub const DISPARITY_FILE: &str = "disparity.pfm";

/// Writes the outputs of `run` into `dir`: the final map, the layout, the
/// run report and, when requested, every intermediate artifact.
pub fn write_run(run: &PipelineRun, config: &PipelineConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_pfm(dir.join(DISPARITY_FILE), &run.blend.disparity.raster)?;
    fs::write(dir.join("layout.json"), run.layout.to_json())?;
    fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(&run.report)?,
    )?;
    if let Some(m) = &run.report.metrics {
        fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(m)?)?;
    }
    if config.output.visualization {
        write_visualization_png(dir.join("disparity.png"), &run.blend.disparity.raster)?;
    }
    if !config.output.dump_intermediates {
        return Ok(());
    }
    let raw: Vec<_> = run
        .provider
        .maps
        .iter()
        .map(|m| m.raster().clone())
        .collect();
    write_provider_dir(
        &dir.join("tangent"),
        &ProviderManifest::for_layout(&run.layout, "provider", "raw"),
        &raw,
    )?;
    let aligned: Vec<_> = run.aligned.iter().map(|t| t.raster.clone()).collect();
    write_provider_dir(
        &dir.join("aligned"),
        &ProviderManifest::for_layout(&run.layout, "aligned", "spherical"),
        &aligned,
    )?;
    let grids_dir = dir.join("grids");
    fs::create_dir_all(&grids_dir)?;
    for s in &run.scales {
        let path = grids_dir.join(format!("grids_{}x{}.json", s.cols, s.rows));
        fs::write(path, serde_json::to_string_pretty(&s.grids)?)?;
    }
    write_pfm(dir.join("d_nn.pfm"), &run.blend.d_nn.raster)?;
    let weights_dir = dir.join("weights");
    fs::create_dir_all(&weights_dir)?;
    let (w, h) = (config.erp_width, config.erp_height);
    let fields = compute_weights(
        &run.layout,
        config.blend_mode.weight_scheme(),
        w,
        h,
        &config.effective_blending(),
    )?;
    for f in &fields {
        let name = face_file_name(f.face_index).replace(".pfm", ".png");
        write_weight_png(weights_dir.join(name), w, h, &f.dense())?;
    }
    if let Some(gt) = &run.provider.gt_depth {
        write_pfm(dir.join("gt_depth.pfm"), &gt.raster)?;
    }
    if let Some(c) = &run.provider.corruptions {
        fs::write(
            dir.join("corruption.json"),
            serde_json::to_string_pretty(c)?,
        )?;
    }
    Ok(())
}

/// One alignment variant of the ablation grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentVariant {
    pub label: String,
    pub schedule: Vec<(usize, usize)>,
}

impl AlignmentVariant {
    /// No alignment, each single grid size, and the configured multi-scale
    /// schedule.
    pub fn standard_set(multi_scale: &[(usize, usize)]) -> Vec<Self> {
        let mut out = vec![Self {
            label: "no-align".into(),
            schedule: Vec::new(),
        }];
        for (c, r) in [(2, 2), (4, 3), (8, 7), (16, 14)] {
            out.push(Self {
                label: format!("{c}x{r}"),
                schedule: vec![(c, r)],
            });
        }
        out.push(Self {
            label: "multi-scale".into(),
            schedule: multi_scale.to_vec(),
        });
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub alignment: String,
    pub blend: BlendMode,
    pub metrics: MetricReport,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn get(&self, alignment: &str, blend: BlendMode) -> Option<&MetricReport> {
        self.rows
            .iter()
            .find(|r| r.alignment == alignment && r.blend == blend)
            .map(|r| &r.metrics)
    }

    pub fn to_text(&self) -> String {
        let rows: Vec<(String, MetricReport)> = self
            .rows
            .iter()
            .map(|r| (format!("{} / {}", r.alignment, r.blend.name()), r.metrics))
            .collect();
        MetricReport::table(&rows)
    }
}

/// Evaluates every alignment variant under every blend mode on the same
/// provider maps. Needs ground truth.
pub fn run_ablation(
    config: &PipelineConfig,
    variants: &[AlignmentVariant],
    modes: &[BlendMode],
) -> Result<AblationTable> {
    config.validate()?;
    let layout =
        build_icosahedron_layout(config.padding, config.tangent_width, config.tangent_height)?;
    let (w, h) = (config.erp_width, config.erp_height);
    let provider = load_provider(config, &layout)?;
    let gt = provider.gt_depth.as_ref().ok_or_else(|| {
        Error::Config("ablation needs ground truth (synthetic provider or gt_depth)".into())
    })?;
    let spherical = to_spherical(&provider.maps)?;
    let blend_cfg = config.effective_blending();
    let mut cache = WeightCache::new(&layout, w, h, &blend_cfg);
    let mask = evaluation_mask(config);
    let mut table = AblationTable::default();
    for variant in variants {
        let align_cfg = AlignmentConfig {
            grid_schedule: variant.schedule.clone(),
            ..config.effective_alignment()
        };
        let aligned = quantized_tangents(&align_multiscale(&spherical, w, h, &align_cfg)?.maps)?;
        let maps = project_to_erp(&aligned, w, h)?;
        for &mode in modes {
            let out = blend_erp_maps(&maps, mode, &mut cache, &blend_cfg)?;
            let metrics = evaluate_pipeline(&out.disparity, gt, mask.as_deref())?;
            info!(
                "{} / {}: AbsRel {:.4}",
                variant.label,
                mode.name(),
                metrics.abs_rel
            );
            table.rows.push(AblationRow {
                alignment: variant.label.clone(),
                blend: mode,
                metrics,
            });
        }
    }
    Ok(table)
}
