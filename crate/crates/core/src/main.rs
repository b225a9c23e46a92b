use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use panodepth::alignment::{align_multiscale, overlap_disagreement};
use panodepth::config::{BlendMode, PipelineConfig, ProviderConfig};
use panodepth::evaluation::{evaluate_pipeline, pole_cap_mask};
use panodepth::geometry::{build_icosahedron_layout, IcosahedronLayout};
use panodepth::io::{
    check_provider_dir, load_face_images, load_provider_dir, read_color_image, read_scalar_map,
    write_color_png, write_pfm, write_provider_dir, ProviderManifest,
};
use panodepth::pipeline::{
    blend_aligned, run_ablation, run_pipeline, to_spherical, write_run, AlignmentVariant,
};
use panodepth::resample::{erp_to_tangent, Filter};
use panodepth::synthetic::{generate_synthetic, SceneKind, SyntheticScene};
use panodepth::{ErpImage, Raster};

/// 360° depth fusion from icosahedral tangent-image disparity maps.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the 20-camera layout as JSON.
    Layout {
        #[command(flatten)]
        common: Common,
    },
    /// Render the 20 tangent images of an ERP image (PNG or PFM).
    Project {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a provider directory against the layout.
    EstimateCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dir: PathBuf,
    },
    /// Align a provider directory; writes aligned maps and grids.
    Align {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Blend a directory of aligned maps into one ERP disparity map.
    Blend {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        aligned: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the whole pipeline.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        provider: ProviderArgs,
        #[arg(long)]
        out: PathBuf,
        /// Also write intermediate artifacts.
        #[arg(long)]
        dump: bool,
        #[arg(long)]
        visualize: bool,
    },
    /// Render a synthetic scene: ground truth, colour image and provider maps.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_scene)]
        scene: Option<SceneKind>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Affine-fit a predicted disparity map to ground-truth depth and print
    /// the metrics as JSON.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Leave out polar caps of this many degrees.
        #[arg(long, default_value_t = 0.0)]
        pole_cap: f64,
    },
    /// Evaluate every alignment variant under every blend mode.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        provider: ProviderArgs,
        /// Write the table as JSON here as well.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

/// Settings shared by most commands; flags override the config file.
#[derive(Args)]
struct Common {
    /// TOML or JSON pipeline configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    padding: Option<f64>,
    #[arg(long)]
    erp_width: Option<usize>,
    #[arg(long)]
    erp_height: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    blend: Option<BlendMode>,
    #[arg(long)]
    matterport: bool,
}

#[derive(Args)]
struct ProviderArgs {
    /// `synthetic` or `files`.
    #[arg(long)]
    provider: Option<String>,
    /// Provider directory for `--provider files`.
    #[arg(long)]
    provider_dir: Option<PathBuf>,
    /// Ground-truth ERP depth for evaluation.
    #[arg(long)]
    gt: Option<PathBuf>,
}

fn parse_scene(s: &str) -> std::result::Result<SceneKind, String> {
    match s {
        "box" | "box_room" => Ok(SceneKind::BoxRoom),
        "sphere" | "sphere_in_room" => Ok(SceneKind::SphereInRoom),
        _ => Err(format!("unknown scene '{s}'")),
    }
}

impl Common {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(p) = self.padding {
            cfg.padding = p;
        }
        if let Some(w) = self.erp_width {
            cfg.erp_width = w;
            cfg.erp_height = self.erp_height.unwrap_or(w / 2);
        } else if let Some(h) = self.erp_height {
            cfg.erp_height = h;
            cfg.erp_width = 2 * h;
        }
        if let Some(s) = self.seed {
            cfg.rng_seed = s;
        }
        if let Some(b) = self.blend {
            cfg.blend_mode = b;
        }
        cfg.matterport_mode |= self.matterport;
        cfg.validate()?;
        Ok(cfg)
    }

    fn layout(&self) -> Result<(PipelineConfig, IcosahedronLayout)> {
        let cfg = self.config()?;
        let layout = build_icosahedron_layout(cfg.padding, cfg.tangent_width, cfg.tangent_height)?;
        Ok((cfg, layout))
    }
}

impl ProviderArgs {
    fn apply(&self, cfg: &mut PipelineConfig) -> Result<()> {
        match (self.provider.as_deref(), &self.provider_dir) {
            (Some("files"), Some(dir)) | (None, Some(dir)) => {
                cfg.provider = ProviderConfig::Files { dir: dir.clone() }
            }
            (Some("files"), None) => bail!("--provider files needs --provider-dir"),
            (Some("synthetic"), _) => {
                if !matches!(cfg.provider, ProviderConfig::Synthetic(_)) {
                    cfg.provider = ProviderConfig::Synthetic(Default::default());
                }
            }
            (Some(other), _) => bail!("unknown provider '{other}'"),
            (None, None) => {}
        }
        if let Some(gt) = &self.gt {
            cfg.gt_depth = Some(gt.clone());
        }
        cfg.validate()?;
        Ok(())
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)
        .with_context(|| format!("writing {}", path.display()))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Layout { common } => {
            let (_, layout) = common.layout()?;
            println!("{}", layout.to_json());
        }
        Command::Project { common, image, out } => {
            let (_, layout) = common.layout()?;
            let erp = ErpImage::new(read_color_image(&image)?)?;
            fs::create_dir_all(&out)?;
            fs::write(out.join("layout.json"), layout.to_json())?;
            for cam in &layout.cameras {
                let tangent = erp_to_tangent(&erp, cam, Filter::Bilinear);
                write_color_png(
                    out.join(format!("face_{:02}.png", cam.face_index)),
                    &tangent.raster,
                )?;
            }
            println!("wrote {} tangent images to {}", layout.len(), out.display());
        }
        Command::EstimateCheck { common, dir } => {
            let (_, layout) = common.layout()?;
            let report = check_provider_dir(&dir, &layout)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.is_valid() {
                bail!("{} contract violations", report.violations.len());
            }
        }
        Command::Align { common, dir, out } => {
            let (cfg, layout) = common.layout()?;
            let spherical = to_spherical(&load_provider_dir(&dir, &layout)?)?;
            let align_cfg = cfg.effective_alignment();
            let outcome = align_multiscale(&spherical, cfg.erp_width, cfg.erp_height, &align_cfg)?;
            let mut rasters = Vec::new();
            for m in &outcome.maps {
                let mut r = m.raster().clone();
                r.quantize_f32();
                rasters.push(r);
            }
            write_provider_dir(
                &out,
                &ProviderManifest::for_layout(&layout, "aligned", "spherical"),
                &rasters,
            )?;
            for s in &outcome.scales {
                write_json(
                    &out.join(format!("grids_{}x{}.json", s.cols, s.rows)),
                    &s.grids,
                )?;
            }
            let d = overlap_disagreement(
                &outcome.maps,
                cfg.erp_width,
                cfg.erp_height,
                align_cfg.pole_exclusion_deg,
            )?;
            println!(
                "aligned {} faces; overlap RMS {:.4} ({:.4} of spread)",
                rasters.len(),
                d.rms,
                d.relative()
            );
        }
        Command::Blend {
            common,
            aligned,
            out,
        } => {
            let (cfg, layout) = common.layout()?;
            let maps = load_face_images(&aligned, &layout)?;
            let result = blend_aligned(
                &layout,
                &maps,
                cfg.erp_width,
                cfg.erp_height,
                cfg.blend_mode,
                &cfg.effective_blending(),
            )?;
            write_pfm(&out, &result.disparity.raster)?;
            if let Some(s) = result.solve {
                println!(
                    "poisson: {} unknowns, {} iterations, residual {:.2e}",
                    s.unknowns, s.iterations, s.relative_residual
                );
            }
        }
        Command::Pipeline {
            common,
            provider,
            out,
            dump,
            visualize,
        } => {
            let mut cfg = common.config()?;
            provider.apply(&mut cfg)?;
            cfg.output.dir = Some(out.clone());
            cfg.output.dump_intermediates |= dump;
            cfg.output.visualization |= visualize;
            let run = run_pipeline(&cfg)?;
            write_run(&run, &cfg, &out)?;
            if let Some(m) = &run.report.metrics {
                print!("{m}");
            }
        }
        Command::Synth { common, scene, out } => {
            let (cfg, layout) = common.layout()?;
            let mut synth = cfg.effective_synthetic().unwrap_or_default();
            synth.seed = cfg.rng_seed;
            if let Some(kind) = scene {
                synth.scene = kind;
            }
            let data = generate_synthetic(&synth, &layout, cfg.erp_width, cfg.erp_height)?;
            fs::create_dir_all(&out)?;
            write_pfm(out.join("gt_depth.pfm"), &data.gt_depth.raster)?;
            let color =
                SyntheticScene::new(synth.clone())?.render_color(cfg.erp_width, cfg.erp_height)?;
            write_color_png(out.join("image.png"), &color.raster)?;
            let rasters: Vec<Raster> = data.maps.iter().map(|m| m.raster().clone()).collect();
            write_provider_dir(
                &out.join("provider"),
                &ProviderManifest::for_layout(&layout, "synthetic", env!("CARGO_PKG_VERSION")),
                &rasters,
            )?;
            write_json(&out.join("corruption.json"), &data.corruptions)?;
            println!("wrote synthetic scene to {}", out.display());
        }
        Command::Eval { pred, gt, pole_cap } => {
            let pred = ErpImage::new(read_scalar_map(&pred)?)?;
            let gt = ErpImage::new(read_scalar_map(&gt)?)?;
            let mask = (pole_cap > 0.0).then(|| pole_cap_mask(gt.width(), gt.height(), pole_cap));
            let m = evaluate_pipeline(&pred, &gt, mask.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&m)?);
        }
        Command::Ablate {
            common,
            provider,
            json,
        } => {
            let mut cfg = common.config()?;
            provider.apply(&mut cfg)?;
            let variants = AlignmentVariant::standard_set(&cfg.alignment.grid_schedule);
            let modes = [
                BlendMode::Nn,
                BlendMode::Mean,
                BlendMode::Frustum,
                BlendMode::Poisson,
            ];
            let table = run_ablation(&cfg, &variants, &modes)?;
            print!("{}", table.to_text());
            if let Some(path) = json {
                write_json(&path, &table)?;
            }
        }
    }
    Ok(())
}
