//! Deterministic full-batch L-BFGS with a backtracking Armijo line search.
//!
//! Every accepted step strictly decreases the objective, so the recorded
//! loss history is monotone.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    pub max_iter: usize,
    /// Converged once the largest absolute gradient entry falls below this.
    pub grad_tol: f64,
    pub history: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-6,
            history: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub loss: f64,
    pub grad_max_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at the start point and after each accepted step.
    pub loss_history: Vec<f64>,
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f`, which writes the gradient into its second argument and returns the value.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, opts: LbfgsOptions) -> LbfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut loss = f(&x, &mut g);
    let mut history = vec![loss];
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.history);
    let mut iterations = 0;

    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];

    while iterations < opts.max_iter {
        if max_abs(&g) < opts.grad_tol {
            break;
        }
        let mut direction = two_loop(&g, &mem);
        let mut slope = dot(&g, &direction);
        if !(slope < 0.0) {
            mem.clear();
            direction = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        // without curvature information, start with a step of unit max-norm
        let mut step = if mem.is_empty() {
            1.0 / max_abs(&direction).max(1.0)
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            for i in 0..n {
                x_new[i] = x[i] + step * direction[i];
            }
            let candidate = f(&x_new, &mut g_new);
            if candidate.is_finite() && candidate <= loss + ARMIJO_C1 * step * slope && candidate < loss {
                accepted = Some(candidate);
                break;
            }
            step *= 0.5;
        }
        let Some(new_loss) = accepted else {
            if mem.is_empty() {
                // steepest descent made no progress: numerically stationary
                break;
            }
            mem.clear();
            continue;
        };

        let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).max(f64::MIN_POSITIVE) {
            if mem.len() == opts.history {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        loss = new_loss;
        history.push(loss);
        iterations += 1;
    }

    let grad_max_norm = max_abs(&g);
    LbfgsResult {
        x,
        loss,
        grad_max_norm,
        iterations,
        converged: grad_max_norm < opts.grad_tol,
        loss_history: history,
    }
}

fn two_loop(g: &[f64], mem: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(mem.len());
    for (s, y, rho) in mem.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = mem.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in mem.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}
