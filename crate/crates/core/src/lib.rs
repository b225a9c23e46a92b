//! High-resolution 360° depth from 20 icosahedral tangent views.
//!
//! An equirectangular (ERP) panorama is split into 20 padded gnomonic
//! tangent images, one per icosahedron face. A monocular estimator (or the
//! [`synthetic`] oracle) supplies a relative disparity map per face; these
//! are standardized, converted to spherical disparity, aligned jointly with
//! coarse-to-fine deformation grids of per-point scale and offset, and
//! merged into one ERP disparity map, optionally in the gradient domain.
//!
//! ```no_run
//! use panodepth::{run_pipeline, PipelineConfig};
//!
//! let config = PipelineConfig {
//!     erp_width: 1024,
//!     erp_height: 512,
//!     ..PipelineConfig::default()
//! };
//! let run = run_pipeline(&config)?;
//! println!("{}", run.report.metrics.unwrap());
//! # Ok::<(), panodepth::Error>(())
//! ```

// `!(x > 0.0)` deliberately treats NaN as invalid.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alignment;
pub mod blending;
pub mod config;
pub mod disparity;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod image;
pub mod io;
pub mod pipeline;
pub mod resample;
pub mod synthetic;

pub use alignment::{align_multiscale, AlignmentConfig, DeformationGrid};
pub use blending::{blend_poisson, compute_weights, BlendConfig, WeightScheme};
pub use config::{BlendMode, PipelineConfig, ProviderConfig};
pub use disparity::{DisparityMap, Semantics};
pub use error::{Error, Result};
pub use evaluation::{compute_metrics, evaluate_pipeline, MetricReport};
pub use geometry::{build_icosahedron_layout, IcosahedronLayout, SphericalCoord, TangentCamera};
pub use image::{ErpImage, Raster, TangentImage};
pub use pipeline::{run_ablation, run_pipeline, write_run};
pub use synthetic::{generate_synthetic, SyntheticConfig};
