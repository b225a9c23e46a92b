//! Affine fitting of disparity predictions to ground truth and the standard
//! depth metrics.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::alignment::in_pole_cap;
use crate::error::{Error, Result};
use crate::geometry::erp_to_spherical_unchecked;
use crate::image::{ErpImage, Raster};

/// Thresholds of the δ accuracy metrics: 1.25, 1.25², 1.25³.
pub const DELTA_THRESHOLDS: [f64; 3] = [1.25, 1.5625, 1.953125];

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub abs_rel: f64,
    pub mae: f64,
    pub rmse: f64,
    pub rmse_log: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub n_pixels: usize,
    /// Pixels whose predicted depth is not positive; they are left out of
    /// the log and ratio metrics.
    pub n_negative_depth: usize,
}

impl MetricReport {
    pub const HEADER: [&'static str; 7] = [
        "AbsRel", "MAE", "RMSE", "RMSE-log", "d<1.25", "d<1.25^2", "d<1.25^3",
    ];

    pub fn values(&self) -> [f64; 7] {
        [
            self.abs_rel,
            self.mae,
            self.rmse,
            self.rmse_log,
            self.delta1,
            self.delta2,
            self.delta3,
        ]
    }

    /// Plain-text table, optionally with a leading label column.
    pub fn table(rows: &[(String, MetricReport)]) -> String {
        let label_width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(6);
        let mut out = format!("{:<label_width$}", "Method");
        for h in Self::HEADER {
            out.push_str(&format!(" {h:>9}"));
        }
        out.push('\n');
        for (label, report) in rows {
            out.push_str(&format!("{label:<label_width$}"));
            for v in report.values() {
                out.push_str(&format!(" {v:>9.4}"));
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", MetricReport::table(&[("ours".to_string(), *self)]))
    }
}

fn jointly_valid(a: &Raster, b: &Raster, mask: Option<&[bool]>) -> Result<Vec<usize>> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::Parameter(format!(
            "prediction is {}x{} but ground truth is {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    if let Some(m) = mask {
        if m.len() != a.len() {
            return Err(Error::Parameter(
                "evaluation mask has the wrong size".into(),
            ));
        }
    }
    Ok((0..a.len())
        .filter(|&i| a.mask[i] && b.mask[i] && mask.is_none_or(|m| m[i]))
        .collect())
}

/// Least-squares `(scale, offset)` mapping `pred` onto the ground-truth
/// disparity `1 / gt_depth` over jointly valid pixels.
pub fn fit_affine_disparity(
    pred: &ErpImage,
    gt_depth: &ErpImage,
    mask: Option<&[bool]>,
) -> Result<(f64, f64)> {
    let idx = jointly_valid(&pred.raster, &gt_depth.raster, mask)?;
    if idx.len() < 2 {
        return Err(Error::Degenerate(
            "affine fit needs at least two valid pixels".into(),
        ));
    }
    let n = idx.len() as f64;
    let (mut mx, mut my) = (0.0, 0.0);
    for &i in &idx {
        let z = gt_depth.raster.data[i];
        if !(z > 0.0) {
            return Err(Error::Domain(format!(
                "ground-truth depth {z} is not positive"
            )));
        }
        mx += pred.raster.data[i];
        my += 1.0 / z;
    }
    mx /= n;
    my /= n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &i in &idx {
        let dx = pred.raster.data[i] - mx;
        sxx += dx * dx;
        sxy += dx * (1.0 / gt_depth.raster.data[i] - my);
    }
    if sxx <= 1e-12 * n * (1.0 + mx * mx) {
        return Err(Error::Degenerate(
            "prediction is constant; affine fit is rank deficient".into(),
        ));
    }
    let scale = sxy / sxx;
    Ok((scale, my - scale * mx))
}

/// Depth metrics of `pred_depth` against `gt_depth` over jointly valid pixels
/// (restricted further by `mask` when given).
pub fn compute_metrics(
    pred_depth: &ErpImage,
    gt_depth: &ErpImage,
    mask: Option<&[bool]>,
) -> Result<MetricReport> {
    let idx = jointly_valid(&pred_depth.raster, &gt_depth.raster, mask)?;
    if idx.is_empty() {
        return Err(Error::Degenerate("no valid pixels to evaluate".into()));
    }
    let mut abs_rel = 0.0;
    let mut abs = 0.0;
    let mut sq = 0.0;
    let mut sq_log = 0.0;
    let mut deltas = [0usize; 3];
    let mut positive = 0usize;
    for &i in &idx {
        let z = pred_depth.raster.data[i];
        let zt = gt_depth.raster.data[i];
        if !(zt > 0.0) {
            return Err(Error::Domain(format!(
                "ground-truth depth {zt} is not positive"
            )));
        }
        let err = z - zt;
        abs_rel += err.abs() / zt;
        abs += err.abs();
        sq += err * err;
        if z > 0.0 {
            positive += 1;
            sq_log += (z.log10() - zt.log10()).powi(2);
            let ratio = (z / zt).max(zt / z);
            for (d, t) in deltas.iter_mut().zip(DELTA_THRESHOLDS) {
                if ratio < t {
                    *d += 1;
                }
            }
        }
    }
    let n = idx.len() as f64;
    let frac = |c: usize| {
        if positive > 0 {
            c as f64 / positive as f64
        } else {
            0.0
        }
    };
    Ok(MetricReport {
        abs_rel: abs_rel / n,
        mae: abs / n,
        rmse: (sq / n).sqrt(),
        rmse_log: if positive > 0 {
            (sq_log / positive as f64).sqrt()
        } else {
            0.0
        },
        delta1: frac(deltas[0]),
        delta2: frac(deltas[1]),
        delta3: frac(deltas[2]),
        n_pixels: idx.len(),
        n_negative_depth: idx.len() - positive,
    })
}

/// Fits the predicted disparity to the ground truth, inverts it to depth and
/// evaluates. Fitted disparities that are not positive give non-positive
/// depths, which are counted in `n_negative_depth`.
pub fn evaluate_pipeline(
    pred_disparity: &ErpImage,
    gt_depth: &ErpImage,
    mask: Option<&[bool]>,
) -> Result<MetricReport> {
    let (scale, offset) = fit_affine_disparity(pred_disparity, gt_depth, mask)?;
    let depth = pred_disparity.raster.map_valid(|d| {
        let fitted = scale * d + offset;
        // zero disparity lies at infinity; report it as a non-positive depth
        if fitted == 0.0 {
            0.0
        } else {
            1.0 / fitted
        }
    });
    compute_metrics(&ErpImage { raster: depth }, gt_depth, mask)
}

/// Peak signal-to-noise ratio in dB of `a` against `b` over jointly valid
/// pixels (and `mask`), for signals with dynamic range `peak`.
pub fn psnr(a: &Raster, b: &Raster, mask: Option<&[bool]>, peak: f64) -> Result<f64> {
    let idx = jointly_valid(a, b, mask)?;
    if idx.is_empty() || a.channels != b.channels {
        return Err(Error::Parameter(
            "PSNR needs matching rasters with valid pixels".into(),
        ));
    }
    let ch = a.channels;
    let mut sq = 0.0;
    for &i in &idx {
        for c in 0..ch {
            sq += (a.data[i * ch + c] - b.data[i * ch + c]).powi(2);
        }
    }
    let mse = sq / (idx.len() * ch) as f64;
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Evaluation mask leaving out polar caps of `cap_deg` degrees.
pub fn pole_cap_mask(width: usize, height: usize, cap_deg: f64) -> Vec<bool> {
    let mut mask = vec![true; width * height];
    for row in 0..height {
        let lat = erp_to_spherical_unchecked(0.0, row as f64, width, height).lat;
        if in_pole_cap(lat, cap_deg) {
            mask[row * width..(row + 1) * width].fill(false);
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn erp(values: Vec<f64>) -> ErpImage {
        let h = ((values.len() / 2) as f64).sqrt() as usize;
        ErpImage::new(Raster::from_scalar(2 * h, h, values).unwrap()).unwrap()
    }

    fn depth_field() -> Vec<f64> {
        (0..32).map(|i| 1.0 + 0.25 * i as f64).collect()
    }

    #[test]
    fn exact_prediction_fits_identity() {
        let gt = erp(depth_field());
        let pred = erp(depth_field().iter().map(|z| 1.0 / z).collect());
        let (s, o) = fit_affine_disparity(&pred, &gt, None).unwrap();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(o, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn affine_prediction_fits_inverse_map() {
        let gt = erp(depth_field());
        let pred = erp(depth_field().iter().map(|z| 2.0 / z + 3.0).collect());
        let (s, o) = fit_affine_disparity(&pred, &gt, None).unwrap();
        assert_abs_diff_eq!(s, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(o, -1.5, epsilon = 1e-12);
    }

    #[test]
    fn constant_prediction_is_rank_deficient() {
        let gt = erp(depth_field());
        let pred = erp(vec![0.4; 32]);
        assert!(matches!(
            fit_affine_disparity(&pred, &gt, None),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn perfect_prediction_scores_perfectly() {
        let gt = erp(depth_field());
        let m = compute_metrics(&gt, &gt, None).unwrap();
        assert_eq!(m.values(), [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(m.n_pixels, 32);
    }

    #[test]
    fn doubled_depth_by_formula() {
        let gt = erp(depth_field());
        let pred = erp(depth_field().iter().map(|z| 2.0 * z).collect());
        let m = compute_metrics(&pred, &gt, None).unwrap();
        assert_abs_diff_eq!(m.abs_rel, 1.0, epsilon = 1e-15);
        assert_eq!((m.delta1, m.delta2, m.delta3), (0.0, 0.0, 0.0));
        assert_abs_diff_eq!(m.rmse_log, 2f64.log10(), epsilon = 1e-15);
        let mean_z: f64 = depth_field().iter().sum::<f64>() / 32.0;
        assert_abs_diff_eq!(m.mae, mean_z, epsilon = 1e-12);
    }

    #[test]
    fn fitted_doubled_depth_is_exact() {
        let gt = erp(depth_field());
        // disparity of a depth map twice as far
        let pred = erp(depth_field().iter().map(|z| 1.0 / (2.0 * z)).collect());
        let m = evaluate_pipeline(&pred, &gt, None).unwrap();
        assert!(m.abs_rel < 1e-12 && m.rmse < 1e-12);
        assert_eq!(m.delta1, 1.0);
    }

    #[test]
    fn negative_fitted_depth_is_counted() {
        let gt = erp(depth_field());
        let mut disp: Vec<f64> = depth_field().iter().map(|z| 1.0 / z).collect();
        // one wild outlier pulls the fit so that the far end turns negative
        disp[31] = -5.0;
        let pred = erp(disp);
        let m = evaluate_pipeline(&pred, &gt, None).unwrap();
        assert!(m.n_negative_depth > 0);
        assert!(m.delta1 <= m.delta2 && m.delta2 <= m.delta3);
    }

    #[test]
    fn empty_mask_is_an_error() {
        let gt = erp(depth_field());
        let mask = vec![false; 32];
        assert!(compute_metrics(&gt, &gt, Some(&mask)).is_err());
        assert!(evaluate_pipeline(&gt, &gt, Some(&mask)).is_err());
    }

    #[test]
    fn table_has_one_column_per_metric() {
        let t = MetricReport::table(&[("a".into(), MetricReport::default())]);
        let header = t.lines().next().unwrap();
        assert_eq!(header.split_whitespace().count(), 8);
    }
}
