//! Gradient-domain blending: a screened Poisson problem on the ERP grid,
//! solved matrix-free with Jacobi-preconditioned conjugate gradients.
//!
//! Unknowns are the pixels where the nearest-neighbour stitch is valid and
//! that are not pole-cap passthrough pixels. Edges are forward differences:
//! to the right neighbour (wrapping at the longitude seam) and to the pixel
//! below (no wrap across the poles).

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::weights::BlendWeightField;
use super::{check_maps, BlendConfig};
use crate::alignment::in_pole_cap;
use crate::error::{Error, Result};
use crate::geometry::erp_to_spherical_unchecked;
use crate::image::{ErpImage, Raster};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub unknowns: usize,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Per-edge accumulated weight `Σ_a ω_a` and weighted target gradient
/// `Σ_a ω_a ∇D̃_a`, for the edge leaving each pixel rightwards and downwards.
struct EdgeTargets {
    right_weight: Vec<f64>,
    right_target: Vec<f64>,
    down_weight: Vec<f64>,
    down_target: Vec<f64>,
}

fn accumulate_edges(
    maps: &[ErpImage],
    weights: &[BlendWeightField],
    width: usize,
    height: usize,
) -> EdgeTargets {
    let n = width * height;
    let mut e = EdgeTargets {
        right_weight: vec![0.0; n],
        right_target: vec![0.0; n],
        down_weight: vec![0.0; n],
        down_target: vec![0.0; n],
    };
    // faces are accumulated one after the other so the summation order is fixed
    for (map, field) in maps.iter().zip(weights) {
        let omega = field.dense();
        let r = &map.raster;
        e.right_weight
            .par_chunks_mut(width)
            .zip(e.right_target.par_chunks_mut(width))
            .zip(e.down_weight.par_chunks_mut(width))
            .zip(e.down_target.par_chunks_mut(width))
            .enumerate()
            .for_each(|(row, (((rw, rt), dw), dt))| {
                for col in 0..width {
                    let i = row * width + col;
                    let w = omega[i];
                    if w <= 0.0 || !r.mask[i] {
                        continue;
                    }
                    let j = row * width + (col + 1) % width;
                    if r.mask[j] {
                        rw[col] += w;
                        rt[col] += w * (r.data[j] - r.data[i]);
                    }
                    if row + 1 < height {
                        let j = i + width;
                        if r.mask[j] {
                            dw[col] += w;
                            dt[col] += w * (r.data[j] - r.data[i]);
                        }
                    }
                }
            });
    }
    e
}

/// Sparse SPD system in compact unknown numbering.
struct System {
    diag: Vec<f64>,
    /// Up to four `(neighbour, weight)` couplings per unknown; unused slots
    /// have weight zero.
    links: Vec<[(u32, f64); 4]>,
    rhs: Vec<f64>,
}

impl System {
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.par_iter_mut().enumerate().for_each(|(k, y)| {
            let mut v = self.diag[k] * x[k];
            for &(j, w) in &self.links[k] {
                v -= w * x[j as usize];
            }
            *y = v;
        });
    }
}

const REDUCE_CHUNK: usize = 16384;

/// Dot product with a fixed reduction order.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(REDUCE_CHUNK)
        .zip(b.par_chunks(REDUCE_CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partial.iter().sum()
}

/// Preconditioned conjugate gradients; returns the best iterate found.
fn solve_pcg(
    system: &System,
    x: &mut [f64],
    tolerance: f64,
    max_iterations: usize,
) -> (usize, f64, bool) {
    let n = x.len();
    let b_norm = dot(&system.rhs, &system.rhs).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return (0, 0.0, true);
    }
    let mut r = vec![0.0; n];
    system.apply(x, &mut r);
    r.par_iter_mut()
        .zip(&system.rhs)
        .for_each(|(ri, bi)| *ri = bi - *ri);
    let inv_diag: Vec<f64> = system.diag.iter().map(|d| 1.0 / d).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut residual = dot(&r, &r).sqrt() / b_norm;
    let mut best = (residual, x.to_vec());
    let mut iterations = 0;
    while residual > tolerance && iterations < max_iterations {
        system.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rz / pap;
        x.par_iter_mut()
            .zip(&p)
            .for_each(|(xi, pi)| *xi += alpha * pi);
        r.par_iter_mut()
            .zip(&ap)
            .for_each(|(ri, api)| *ri -= alpha * api);
        z.par_iter_mut()
            .zip(&r)
            .zip(&inv_diag)
            .for_each(|((zi, ri), di)| *zi = ri * di);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut()
            .zip(&z)
            .for_each(|(pi, zi)| *pi = zi + beta * *pi);
        iterations += 1;
        residual = dot(&r, &r).sqrt() / b_norm;
        if residual < best.0 {
            best.0 = residual;
            best.1.copy_from_slice(x);
        }
    }
    let converged = residual <= tolerance;
    if !converged && best.0 < residual {
        x.copy_from_slice(&best.1);
        residual = best.0;
    }
    (iterations, residual, converged)
}

/// Blends the per-face ERP disparity maps in the gradient domain, anchored to
/// the nearest-neighbour stitch `d_nn`:
///
/// `argmin_B Σ_a Σ_x ω_a(x)·‖∇B(x) − ∇D̃_a(x)‖² + λ·Σ_x (B(x) − D_NN(x))²`.
///
/// Pixels inside the configured pole caps keep their `d_nn` value; pixels
/// where `d_nn` is masked stay masked.
pub fn blend_poisson(
    maps: &[ErpImage],
    weights: &[BlendWeightField],
    d_nn: &ErpImage,
    config: &BlendConfig,
) -> Result<(ErpImage, SolveReport)> {
    config.validate()?;
    let (width, height) = check_maps(maps, weights)?;
    if d_nn.width() != width || d_nn.height() != height || d_nn.raster.channels != 1 {
        return Err(Error::Parameter(
            "nearest-neighbour stitch does not match the maps".into(),
        ));
    }
    let n = width * height;
    let anchor = &d_nn.raster;
    let cap = config.pole_passthrough_deg;
    let row_capped: Vec<bool> = (0..height)
        .map(|row| {
            in_pole_cap(
                erp_to_spherical_unchecked(0.0, row as f64, width, height).lat,
                cap,
            )
        })
        .collect();

    let mut compact = vec![u32::MAX; n];
    let mut unknowns = Vec::new();
    for i in 0..n {
        if anchor.mask[i] && !row_capped[i / width] {
            compact[i] = unknowns.len() as u32;
            unknowns.push(i);
        }
    }

    let edges = accumulate_edges(maps, weights, width, height);
    let lambda = config.lambda_fidelity;
    let m = unknowns.len();
    let mut system = System {
        diag: vec![lambda; m],
        links: vec![[(0, 0.0); 4]; m],
        rhs: unknowns.iter().map(|&i| lambda * anchor.data[i]).collect(),
    };
    let mut slot = vec![0u8; m];
    let mut couple = |system: &mut System, i: usize, j: usize, w: f64, g: f64| {
        // term w·(B_j − B_i − g/w)², expanded into the normal equations
        if w <= 0.0 {
            return;
        }
        let (ki, kj) = (compact[i], compact[j]);
        match (ki != u32::MAX, kj != u32::MAX) {
            (true, true) => {
                let (ki, kj) = (ki as usize, kj as usize);
                system.diag[ki] += w;
                system.diag[kj] += w;
                system.links[ki][slot[ki] as usize] = (kj as u32, w);
                slot[ki] += 1;
                system.links[kj][slot[kj] as usize] = (ki as u32, w);
                slot[kj] += 1;
                system.rhs[ki] -= g;
                system.rhs[kj] += g;
            }
            (true, false) if anchor.mask[j] => {
                let ki = ki as usize;
                system.diag[ki] += w;
                system.rhs[ki] += w * anchor.data[j] - g;
            }
            (false, true) if anchor.mask[i] => {
                let kj = kj as usize;
                system.diag[kj] += w;
                system.rhs[kj] += w * anchor.data[i] + g;
            }
            _ => {}
        }
    };
    for i in 0..n {
        let (row, col) = (i / width, i % width);
        let right = row * width + (col + 1) % width;
        if right != i {
            couple(
                &mut system,
                i,
                right,
                edges.right_weight[i],
                edges.right_target[i],
            );
        }
        if row + 1 < height {
            couple(
                &mut system,
                i,
                i + width,
                edges.down_weight[i],
                edges.down_target[i],
            );
        }
    }

    let mut x: Vec<f64> = unknowns.iter().map(|&i| anchor.data[i]).collect();
    let (iterations, relative_residual, converged) = solve_pcg(
        &system,
        &mut x,
        config.solver_tolerance,
        config.solver_max_iterations,
    );
    if !converged {
        warn!(
            "Poisson solve stopped at relative residual {relative_residual:.3e} after {iterations} iterations"
        );
    }

    let mut out = Raster::new(width, height, 1);
    for (i, &k) in compact.iter().enumerate().take(n) {
        if anchor.mask[i] {
            out.mask[i] = true;
            out.data[i] = match k {
                u32::MAX => anchor.data[i],
                k => x[k as usize],
            };
        }
    }
    Ok((
        ErpImage { raster: out },
        SolveReport {
            unknowns: m,
            iterations,
            relative_residual,
            converged,
        },
    ))
}
