//! Deterministic L-BFGS for smooth, strongly convex objectives.
//!
//! The line search enforces the strong Wolfe conditions. Close to the
//! minimizer the sufficient-decrease test becomes meaningless in floating
//! point, so a step is also accepted under the approximate Wolfe conditions
//! of Hager and Zhang: the curvature condition holds and `f` did not grow by
//! more than a relative `1e-10`.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// A differentiable objective. `eval` writes the gradient into `grad` and
/// returns the value.
pub trait Objective {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct LbfgsOptions {
    pub memory: usize,
    /// Stop when `||grad||_inf <= tolerance * max(1, ||grad(x0)||_inf)`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl LbfgsOptions {
    /// Memory 10, tolerance `1e-9`, at most `10 * max(dim, 1000)` iterations.
    pub fn for_dim(dim: usize) -> Self {
        Self {
            memory: 10,
            tolerance: 1e-9,
            max_iterations: 10 * dim.max(1000),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_inf_norm: f64,
    pub iterations: usize,
}

const WOLFE_C1: f64 = 1e-4;
const WOLFE_C2: f64 = 0.9;
const APPROX_EPS: f64 = 1e-10;
const MAX_LINE_EVALS: usize = 60;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

struct LinePoint {
    alpha: f64,
    value: f64,
    slope: f64,
}

struct LineSearch<'a, F: Objective + ?Sized> {
    f: &'a F,
    x: &'a [f64],
    dir: &'a [f64],
    f0: f64,
    d0: f64,
    trial: Vec<f64>,
    grad: Vec<f64>,
    evals: usize,
}

impl<F: Objective + ?Sized> LineSearch<'_, F> {
    fn probe(&mut self, alpha: f64) -> LinePoint {
        for ((t, x), d) in self.trial.iter_mut().zip(self.x).zip(self.dir) {
            *t = x + alpha * d;
        }
        let value = self.f.eval(&self.trial, &mut self.grad);
        self.evals += 1;
        LinePoint {
            alpha,
            value,
            slope: dot(&self.grad, self.dir),
        }
    }

    fn sufficient_decrease(&self, p: &LinePoint) -> bool {
        p.value <= self.f0 + WOLFE_C1 * p.alpha * self.d0
    }

    fn approx_wolfe(&self, p: &LinePoint) -> bool {
        p.value <= self.f0 + APPROX_EPS * self.f0.abs()
            && (2.0 * WOLFE_C1 - 1.0) * self.d0 >= p.slope
            && p.slope >= WOLFE_C2 * self.d0
    }

    fn curvature(&self, p: &LinePoint) -> bool {
        p.slope.abs() <= -WOLFE_C2 * self.d0
    }

    fn accept(&self, p: &LinePoint) -> bool {
        (self.sufficient_decrease(p) && self.curvature(p)) || self.approx_wolfe(p)
    }

    /// Returns the accepted step; the gradient at it is left in `self.grad`
    /// and the point in `self.trial`.
    fn run(&mut self, initial: f64) -> Option<LinePoint> {
        let mut prev = LinePoint {
            alpha: 0.0,
            value: self.f0,
            slope: self.d0,
        };
        let mut alpha = initial;
        let mut first = true;
        while self.evals < MAX_LINE_EVALS {
            let p = self.probe(alpha);
            if !p.value.is_finite() {
                // Overshot into overflow; shrink.
                alpha = 0.5 * (prev.alpha + alpha);
                continue;
            }
            if self.accept(&p) {
                return Some(p);
            }
            if !self.sufficient_decrease(&p) || (!first && p.value >= prev.value) {
                return self.zoom(prev, p);
            }
            if p.slope >= 0.0 {
                return self.zoom(p, prev);
            }
            first = false;
            let c = cubic_min(&prev, &p);
            let next = if c.is_finite() {
                c.clamp(2.0 * alpha, 10.0 * alpha)
            } else {
                2.0 * alpha
            };
            prev = p;
            alpha = next;
        }
        None
    }

    fn zoom(&mut self, mut lo: LinePoint, mut hi: LinePoint) -> Option<LinePoint> {
        while self.evals < MAX_LINE_EVALS {
            let (a, b) = if lo.alpha < hi.alpha {
                (lo.alpha, hi.alpha)
            } else {
                (hi.alpha, lo.alpha)
            };
            let width = b - a;
            if width <= f64::EPSILON * b.abs() {
                return None;
            }
            let mut alpha = cubic_min(&lo, &hi);
            if !(alpha > a + 0.1 * width && alpha < b - 0.1 * width) {
                alpha = 0.5 * (a + b);
            }
            let p = self.probe(alpha);
            if self.accept(&p) {
                return Some(p);
            }
            if !p.value.is_finite() || !self.sufficient_decrease(&p) || p.value >= lo.value {
                hi = p;
            } else {
                if p.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = p;
            }
        }
        None
    }
}

/// Minimizer of the cubic interpolating values and slopes at two points.
fn cubic_min(p: &LinePoint, q: &LinePoint) -> f64 {
    let d1 = p.slope + q.slope - 3.0 * (p.value - q.value) / (p.alpha - q.alpha);
    let disc = d1 * d1 - p.slope * q.slope;
    if !(disc >= 0.0) {
        return f64::NAN;
    }
    let d2 = (q.alpha - p.alpha).signum() * disc.sqrt();
    q.alpha - (q.alpha - p.alpha) * (q.slope + d2 - d1) / (q.slope - p.slope + 2.0 * d2)
}

/// Minimizes `f` from `x0`.
///
/// Fails with [`Error::OptimizerFailure`] if the gradient criterion is not met
/// within the iteration cap or the line search cannot make progress.
pub fn lbfgs<F: Objective + ?Sized>(f: &F, x0: &[f64], opts: &LbfgsOptions) -> Result<Minimum> {
    let n = f.dim();
    assert_eq!(x0.len(), n);
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut value = f.eval(&x, &mut g);
    if !value.is_finite() {
        return Err(Error::NonFinite("objective at the starting point".into()));
    }
    let target = opts.tolerance * inf_norm(&g).max(1.0);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut dir = vec![0.0; n];
    let mut alphas = vec![0.0; opts.memory];

    for iteration in 0..opts.max_iterations {
        let gnorm = inf_norm(&g);
        if gnorm <= target {
            return Ok(Minimum {
                x,
                value,
                grad_inf_norm: gnorm,
                iterations: iteration,
            });
        }

        // Two-loop recursion.
        dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
        for (k, (s, y, rho)) in history.iter().enumerate().rev() {
            let a = rho * dot(s, &dir);
            alphas[k] = a;
            dir.iter_mut().zip(y).for_each(|(d, yi)| *d -= a * yi);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            dir.iter_mut().for_each(|d| *d *= gamma);
        }
        for (k, (s, y, rho)) in history.iter().enumerate() {
            let b = rho * dot(y, &dir);
            dir.iter_mut().zip(s).for_each(|(d, si)| *d += (alphas[k] - b) * si);
        }
        let mut d0 = dot(&g, &dir);
        if !(d0 < 0.0) {
            // Lost descent; restart from steepest descent.
            history.clear();
            dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
            d0 = dot(&g, &dir);
        }
        let initial = if history.is_empty() {
            (1.0 / inf_norm(&dir)).min(1.0)
        } else {
            1.0
        };

        let mut search = LineSearch {
            f,
            x: &x,
            dir: &dir,
            f0: value,
            d0,
            trial: vec![0.0; n],
            grad: vec![0.0; n],
            evals: 0,
        };
        let step = search.run(initial);
        let Some(step) = step else {
            return Err(Error::OptimizerFailure {
                iterations: iteration,
                grad_norm: gnorm,
            });
        };
        let (new_x, new_g) = (search.trial, search.grad);
        let s: Vec<f64> = new_x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = new_g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > f64::EPSILON * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        x = new_x;
        g = new_g;
        value = step.value;
    }
    Err(Error::OptimizerFailure {
        iterations: opts.max_iterations,
        grad_norm: inf_norm(&g),
    })
}
