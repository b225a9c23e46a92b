//! Limited-memory BFGS with a strong-Wolfe line search (bracketing and
//! zoom with safeguarded cubic interpolation).
//!
//! The objective returns `None` for infeasible points; the line search treats
//! them as infinitely bad and shrinks the step, so feasibility constraints are
//! enforced without reparameterizing the variables.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbfgsOptions {
    pub max_iterations: usize,
    /// Number of correction pairs kept.
    pub memory: usize,
    pub gradient_tolerance: f64,
    /// Sufficient-decrease constant of the Wolfe conditions.
    pub armijo: f64,
    /// Curvature constant of the strong Wolfe condition.
    pub curvature: f64,
    /// Objective evaluations allowed per line search.
    pub max_line_search_evaluations: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            memory: 10,
            gradient_tolerance: 1e-10,
            armijo: 1e-4,
            curvature: 0.9,
            max_line_search_evaluations: 30,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxIterations,
    GradientTolerance,
    /// No acceptable step was found; the best iterate is returned.
    LineSearchFailed,
    /// The starting point itself was infeasible.
    InfeasibleStart,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbfgsReport {
    pub iterations: usize,
    pub termination: Termination,
    /// Objective at the start and after every accepted step.
    pub energies: Vec<f64>,
    pub gradient_norm: f64,
}

impl LbfgsReport {
    pub fn converged_cleanly(&self) -> bool {
        matches!(
            self.termination,
            Termination::MaxIterations | Termination::GradientTolerance
        )
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A point on the search line: step length, value and directional
/// derivative. Infeasible points have an infinite value and no derivative.
#[derive(Clone, Copy, Debug)]
struct Probe {
    step: f64,
    value: f64,
    slope: f64,
}

struct LineSearch<'a, F> {
    objective: &'a mut F,
    x: &'a [f64],
    direction: &'a [f64],
    f0: f64,
    slope0: f64,
    options: &'a LbfgsOptions,
}

impl<F> LineSearch<'_, F>
where
    F: FnMut(&[f64], &mut [f64]) -> Option<f64>,
{
    fn probe(&mut self, step: f64, x_new: &mut [f64], g_new: &mut [f64]) -> Probe {
        x_new
            .iter_mut()
            .zip(self.x)
            .zip(self.direction)
            .for_each(|((xn, xi), di)| *xn = xi + step * di);
        match (self.objective)(x_new, g_new) {
            Some(value) if value.is_finite() => Probe {
                step,
                value,
                slope: dot(g_new, self.direction),
            },
            _ => Probe {
                step,
                value: f64::INFINITY,
                slope: f64::NAN,
            },
        }
    }

    fn sufficient_decrease(&self, p: &Probe) -> bool {
        p.value <= self.f0 + self.options.armijo * p.step * self.slope0
    }

    fn curvature_ok(&self, p: &Probe) -> bool {
        p.slope.abs() <= -self.options.curvature * self.slope0
    }

    /// Returns the accepted value with `x_new`/`g_new` holding the accepted
    /// point, or `None` when no step decreases the objective.
    fn run(&mut self, initial: f64, x_new: &mut [f64], g_new: &mut [f64]) -> Option<f64> {
        let budget = self.options.max_line_search_evaluations.max(1);
        let mut prev = Probe {
            step: 0.0,
            value: self.f0,
            slope: self.slope0,
        };
        let mut step = initial;
        let mut evaluations = 0;
        // bracketing phase
        let (mut lo, mut hi) = loop {
            let p = self.probe(step, x_new, g_new);
            evaluations += 1;
            if !self.sufficient_decrease(&p) || (evaluations > 1 && p.value >= prev.value) {
                break (prev, p);
            }
            if self.curvature_ok(&p) {
                return Some(p.value);
            }
            if p.slope >= 0.0 {
                break (p, prev);
            }
            if evaluations >= budget {
                return Some(p.value);
            }
            prev = p;
            step *= 2.0;
        };
        // zoom phase: `lo` satisfies sufficient decrease and has the lowest
        // value so far; the minimizer lies between `lo` and `hi`
        while evaluations < budget {
            let trial = interpolate(&lo, &hi);
            let p = self.probe(trial, x_new, g_new);
            evaluations += 1;
            if !self.sufficient_decrease(&p) || p.value >= lo.value {
                hi = p;
            } else {
                if self.curvature_ok(&p) {
                    return Some(p.value);
                }
                if p.slope * (hi.step - lo.step) >= 0.0 {
                    hi = lo;
                }
                lo = p;
            }
            if (hi.step - lo.step).abs() <= 1e-12 * lo.step.abs().max(1e-300) {
                break;
            }
        }
        // out of budget: fall back to the best point with sufficient decrease
        if lo.step > 0.0 {
            let p = self.probe(lo.step, x_new, g_new);
            return Some(p.value);
        }
        None
    }
}

/// Minimizer of the cubic through two probes, kept at least 10% of the
/// interval away from either end; bisection when a derivative is missing.
fn interpolate(a: &Probe, b: &Probe) -> f64 {
    let (lo, hi) = (a.step.min(b.step), a.step.max(b.step));
    let width = hi - lo;
    let bisect = 0.5 * (lo + hi);
    if !(a.value.is_finite() && b.value.is_finite() && a.slope.is_finite() && b.slope.is_finite()) {
        return bisect;
    }
    let d = b.step - a.step;
    let d1 = a.slope + b.slope - 3.0 * (a.value - b.value) / (a.step - b.step);
    let disc = d1 * d1 - a.slope * b.slope;
    if disc < 0.0 {
        return bisect;
    }
    let d2 = disc.sqrt().copysign(d);
    let t = b.step - d * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2);
    if t.is_finite() {
        t.clamp(lo + 0.1 * width, hi - 0.1 * width)
    } else {
        bisect
    }
}

/// Minimizes `objective`, which writes the gradient into its second argument
/// and returns the value (or `None` when the point is infeasible).
pub fn minimize<F>(
    mut objective: F,
    x0: Vec<f64>,
    options: &LbfgsOptions,
) -> (Vec<f64>, LbfgsReport)
where
    F: FnMut(&[f64], &mut [f64]) -> Option<f64>,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let Some(mut fx) = objective(&x, &mut g) else {
        return (
            x,
            LbfgsReport {
                iterations: 0,
                termination: Termination::InfeasibleStart,
                energies: Vec::new(),
                gradient_norm: f64::NAN,
            },
        );
    };
    let mut energies = vec![fx];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(options.memory);
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    let mut direction = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut alpha = vec![0.0; options.memory.max(1)];

    while iterations < options.max_iterations {
        let gnorm = dot(&g, &g).sqrt();
        if gnorm < options.gradient_tolerance {
            termination = Termination::GradientTolerance;
            break;
        }

        // two-loop recursion
        direction.copy_from_slice(&g);
        for (k, (s, y, rho)) in history.iter().enumerate().rev() {
            alpha[k] = rho * dot(s, &direction);
            direction
                .iter_mut()
                .zip(y)
                .for_each(|(d, yi)| *d -= alpha[k] * yi);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            direction.iter_mut().for_each(|d| *d *= gamma);
        }
        for (k, (s, y, rho)) in history.iter().enumerate() {
            let beta = rho * dot(y, &direction);
            direction
                .iter_mut()
                .zip(s)
                .for_each(|(d, si)| *d += (alpha[k] - beta) * si);
        }
        direction.iter_mut().for_each(|d| *d = -*d);

        let mut slope = dot(&g, &direction);
        if slope >= 0.0 || !slope.is_finite() {
            history.clear();
            direction.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
            slope = -gnorm * gnorm;
        }

        let step = if history.is_empty() {
            (1.0 / gnorm).min(1.0)
        } else {
            1.0
        };
        let mut search = LineSearch {
            objective: &mut objective,
            x: &x,
            direction: &direction,
            f0: fx,
            slope0: slope,
            options,
        };
        let Some(f_new) = search.run(step, &mut x_new, &mut g_new) else {
            termination = Termination::LineSearchFailed;
            break;
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-16 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            if history.len() == options.memory {
                history.pop_front();
            }
            if options.memory > 0 {
                history.push_back((s, y, 1.0 / sy));
            }
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        fx = f_new;
        energies.push(fx);
        iterations += 1;
    }

    let gradient_norm = dot(&g, &g).sqrt();
    (
        x,
        LbfgsReport {
            iterations,
            termination,
            energies,
            gradient_norm,
        },
    )
}
