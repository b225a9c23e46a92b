use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{bilinear_weights, DeformationGrid};
use super::overlap::OverlapSet;
use super::AlignmentConfig;
use crate::error::{Error, Result};

/// Values of the alignment objective and its three terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyTerms {
    pub total: f64,
    pub alignment: f64,
    pub smoothness: f64,
    pub scale: f64,
}

/// Partial derivatives of the energy with respect to one face's grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridGradient {
    pub face_index: usize,
    pub d_scales: Vec<f64>,
    pub d_offsets: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
struct PreparedSample {
    value_a: f64,
    value_b: f64,
    /// Parameter-vector indices of the scale variables; offsets follow at
    /// `+ points` within the same face block.
    points_a: [u32; 4],
    weights_a: [f64; 4],
    points_b: [u32; 4],
    weights_b: [f64; 4],
}

const CHUNK: usize = 4096;

/// The alignment objective over a fixed set of overlap samples, in a flat
/// parameter vector: face `f` owns `[f·2mn, (f+1)·2mn)`, scales first.
#[derive(Clone, Debug)]
pub struct AlignmentProblem {
    faces: usize,
    cols: usize,
    rows: usize,
    lambda_smoothness: f64,
    lambda_scale: f64,
    samples: Vec<PreparedSample>,
}

impl AlignmentProblem {
    pub fn new(
        faces: usize,
        cols: usize,
        rows: usize,
        overlaps: &[OverlapSet],
        config: &AlignmentConfig,
    ) -> Result<Self> {
        if cols < 2 || rows < 2 {
            return Err(Error::Parameter(format!(
                "deformation grid {cols}x{rows} must be at least 2x2"
            )));
        }
        let points = cols * rows;
        let block = 2 * points;
        let prepare = |face: usize, coord: [f64; 2]| {
            let w = bilinear_weights(cols, rows, coord);
            (
                w.map(|(i, _)| (face * block + i) as u32),
                w.map(|(_, wt)| wt),
            )
        };
        let mut samples = Vec::new();
        for set in overlaps {
            if set.a >= faces || set.b >= faces {
                return Err(Error::Parameter(format!(
                    "overlap pair ({}, {}) out of range for {faces} faces",
                    set.a, set.b
                )));
            }
            for s in &set.samples {
                let (points_a, weights_a) = prepare(set.a, s.coord_a);
                let (points_b, weights_b) = prepare(set.b, s.coord_b);
                samples.push(PreparedSample {
                    value_a: s.value_a,
                    value_b: s.value_b,
                    points_a,
                    weights_a,
                    points_b,
                    weights_b,
                });
            }
        }
        Ok(Self {
            faces,
            cols,
            rows,
            lambda_smoothness: config.lambda_smoothness,
            lambda_scale: config.lambda_scale,
            samples,
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.faces * 2 * self.cols * self.rows
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    pub fn pack(&self, grids: &[DeformationGrid]) -> Result<Vec<f64>> {
        if grids.len() != self.faces {
            return Err(Error::Parameter(format!(
                "expected {} grids, got {}",
                self.faces,
                grids.len()
            )));
        }
        let mut x = Vec::with_capacity(self.parameter_count());
        for g in grids {
            if g.cols != self.cols || g.rows != self.rows {
                return Err(Error::Parameter(format!(
                    "grid {}x{} does not match problem {}x{}",
                    g.cols, g.rows, self.cols, self.rows
                )));
            }
            x.extend_from_slice(&g.scales);
            x.extend_from_slice(&g.offsets);
        }
        Ok(x)
    }

    pub fn unpack(&self, x: &[f64]) -> Vec<DeformationGrid> {
        let points = self.cols * self.rows;
        x.chunks(2 * points)
            .enumerate()
            .map(|(face, block)| DeformationGrid {
                face_index: face,
                cols: self.cols,
                rows: self.rows,
                scales: block[..points].to_vec(),
                offsets: block[points..].to_vec(),
            })
            .collect()
    }

    /// Smallest scale variable.
    pub fn min_scale(&self, x: &[f64]) -> f64 {
        let points = self.cols * self.rows;
        x.chunks(2 * points)
            .flat_map(|b| b[..points].iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn energy(&self, x: &[f64]) -> Result<EnergyTerms> {
        self.evaluate(x, None)
    }

    /// Energy and its gradient (written into `grad`).
    pub fn energy_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> Result<EnergyTerms> {
        self.evaluate(x, Some(grad))
    }

    fn evaluate(&self, x: &[f64], grad: Option<&mut [f64]>) -> Result<EnergyTerms> {
        let n = self.parameter_count();
        if x.len() != n {
            return Err(Error::Parameter(format!(
                "parameter vector has {} entries, expected {n}",
                x.len()
            )));
        }
        let min_scale = self.min_scale(x);
        if min_scale.is_nan() || min_scale <= 0.0 {
            return Err(Error::Domain(format!(
                "non-positive deformation scale {min_scale}"
            )));
        }
        let points = self.cols * self.rows;
        let want_grad = grad.is_some();

        // chunks are reduced in order so the result does not depend on the
        // thread count
        let partials: Vec<(f64, Option<Vec<f64>>)> = self
            .samples
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut sum = 0.0;
                let mut g = want_grad.then(|| vec![0.0; n]);
                for s in chunk {
                    let (mut sa, mut oa, mut sb, mut ob) = (0.0, 0.0, 0.0, 0.0);
                    for k in 0..4 {
                        let ia = s.points_a[k] as usize;
                        let ib = s.points_b[k] as usize;
                        sa += s.weights_a[k] * x[ia];
                        oa += s.weights_a[k] * x[ia + points];
                        sb += s.weights_b[k] * x[ib];
                        ob += s.weights_b[k] * x[ib + points];
                    }
                    let r = (sa * s.value_a + oa) - (sb * s.value_b + ob);
                    sum += r * r;
                    if let Some(g) = g.as_mut() {
                        let two_r = 2.0 * r;
                        for k in 0..4 {
                            let ia = s.points_a[k] as usize;
                            let ib = s.points_b[k] as usize;
                            let wa = two_r * s.weights_a[k];
                            let wb = two_r * s.weights_b[k];
                            g[ia] += wa * s.value_a;
                            g[ia + points] += wa;
                            g[ib] -= wb * s.value_b;
                            g[ib + points] -= wb;
                        }
                    }
                }
                (sum, g)
            })
            .collect();

        let z_align = self.samples.len().max(1) as f64;
        let mut align = 0.0;
        let mut grad = grad;
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        for (sum, partial) in partials {
            align += sum;
            if let (Some(g), Some(p)) = (grad.as_deref_mut(), partial) {
                for (gi, pi) in g.iter_mut().zip(p) {
                    *gi += pi;
                }
            }
        }
        align /= z_align;
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v /= z_align);
        }

        let z_smooth = (self.faces * points) as f64;
        let mut smooth = 0.0;
        let mut scale = 0.0;
        let (cols, rows) = (self.cols, self.rows);
        for face in 0..self.faces {
            let base = face * 2 * points;
            for var in [base, base + points] {
                for r in 0..rows {
                    for c in 0..cols {
                        let i = var + r * cols + c;
                        let mut neighbours = [None, None];
                        if c + 1 < cols {
                            neighbours[0] = Some(i + 1);
                        }
                        if r + 1 < rows {
                            neighbours[1] = Some(i + cols);
                        }
                        for j in neighbours.into_iter().flatten() {
                            let d = x[i] - x[j];
                            smooth += d * d;
                            if let Some(g) = grad.as_deref_mut() {
                                let dg = self.lambda_smoothness * 2.0 * d / z_smooth;
                                g[i] += dg;
                                g[j] -= dg;
                            }
                        }
                    }
                }
            }
            for i in base..base + points {
                scale += 1.0 / x[i];
                if let Some(g) = grad.as_deref_mut() {
                    g[i] -= self.lambda_scale / (x[i] * x[i]);
                }
            }
        }
        smooth /= z_smooth;

        Ok(EnergyTerms {
            total: align + self.lambda_smoothness * smooth + self.lambda_scale * scale,
            alignment: align,
            smoothness: smooth,
            scale,
        })
    }
}

fn grid_shape(grids: &[DeformationGrid]) -> Result<(usize, usize)> {
    let first = grids
        .first()
        .ok_or_else(|| Error::Parameter("no deformation grids".into()))?;
    Ok((first.cols, first.rows))
}

/// Evaluates the alignment energy of a set of per-face grids.
pub fn energy(
    grids: &[DeformationGrid],
    overlaps: &[OverlapSet],
    config: &AlignmentConfig,
) -> Result<EnergyTerms> {
    let (cols, rows) = grid_shape(grids)?;
    let problem = AlignmentProblem::new(grids.len(), cols, rows, overlaps, config)?;
    problem.energy(&problem.pack(grids)?)
}

/// Analytic gradient of [`energy`] with respect to every grid variable.
pub fn energy_gradient(
    grids: &[DeformationGrid],
    overlaps: &[OverlapSet],
    config: &AlignmentConfig,
) -> Result<Vec<GridGradient>> {
    let (cols, rows) = grid_shape(grids)?;
    let problem = AlignmentProblem::new(grids.len(), cols, rows, overlaps, config)?;
    let x = problem.pack(grids)?;
    let mut g = vec![0.0; x.len()];
    problem.energy_and_gradient(&x, &mut g)?;
    Ok(problem
        .unpack(&g)
        .into_iter()
        .map(|d| GridGradient {
            face_index: d.face_index,
            d_scales: d.scales,
            d_offsets: d.offsets,
        })
        .collect())
}
