//! Derivative-free refinement of the constants in a fixed tree shape.

use crate::expr::Expr;

use super::{evaluate_fitness, TrainingSet};

/// Cyclic coordinate descent over the constants of `e`.
///
/// Each constant starts with step `0.1 * |c| + 0.1`. A coordinate probes
/// `c + step` and `c - step`, then tries the vertex of the parabola through
/// the three values. The best improving point is kept and the step becomes
/// the distance moved; a coordinate that cannot improve halves its step.
/// After each cycle that moved, a parabolic line search runs along the
/// cycle's displacement. At most `budget` objective evaluations are spent
/// per constant, and the result is never worse than the input.
pub fn optimize_constants(e: &Expr, data: &TrainingSet, budget: usize) -> Expr {
    let start = e.constants();
    if start.is_empty() || budget == 0 {
        return e.clone();
    }
    let mut work = e.clone();
    let mut search = Search {
        objective: |values: &[f64]| {
            work.set_constants(values);
            evaluate_fitness(&work, data).unwrap_or(f64::INFINITY)
        },
        evals: 0,
        total: budget * start.len(),
    };

    let mut best = start.clone();
    let Some(mut best_mse) = search.eval(&best) else {
        return e.clone();
    };
    let mut steps: Vec<f64> = best.iter().map(|c| 0.1 * c.abs() + 0.1).collect();

    while !search.exhausted() {
        let cycle_start = best.clone();
        for i in 0..best.len() {
            let h = steps[i];
            if h <= f64::EPSILON * (best[i].abs() + 1.0) {
                continue;
            }
            let unit: Vec<f64> = (0..best.len()).map(|j| if j == i { 1.0 } else { 0.0 }).collect();
            match search.line(&best, best_mse, &unit, h) {
                Some((alpha, point, mse)) => {
                    best = point;
                    best_mse = mse;
                    steps[i] = alpha.abs();
                }
                None => steps[i] *= 0.5,
            }
            if search.exhausted() {
                break;
            }
        }
        if best == cycle_start {
            let converged = steps.iter().zip(&best).all(|(s, c)| *s <= f64::EPSILON * (c.abs() + 1.0));
            if converged {
                break;
            }
            continue;
        }
        let direction: Vec<f64> = best.iter().zip(&cycle_start).map(|(b, s)| b - s).collect();
        if let Some((_, point, mse)) = search.line(&best, best_mse, &direction, 1.0) {
            best = point;
            best_mse = mse;
        }
    }

    work.set_constants(&best);
    work
}

struct Search<F> {
    objective: F,
    evals: usize,
    total: usize,
}

impl<F: FnMut(&[f64]) -> f64> Search<F> {
    fn exhausted(&self) -> bool {
        self.evals >= self.total
    }

    /// `None` once the budget is spent.
    fn eval(&mut self, x: &[f64]) -> Option<f64> {
        if self.exhausted() {
            return None;
        }
        self.evals += 1;
        Some((self.objective)(x))
    }

    /// Probes `x ± h*d` and the parabola vertex through the three values;
    /// returns the best improving `(alpha, point, mse)` with point `x + alpha*d`.
    fn line(&mut self, x: &[f64], fx: f64, d: &[f64], h: f64) -> Option<(f64, Vec<f64>, f64)> {
        let at = |alpha: f64| -> Vec<f64> { x.iter().zip(d).map(|(x, d)| x + alpha * d).collect() };
        let mut best: Option<(f64, Vec<f64>, f64)> = None;
        let consider = |alpha: f64, p: Vec<f64>, m: f64, best: &mut Option<(f64, Vec<f64>, f64)>| {
            if m < best.as_ref().map_or(fx, |b| b.2) {
                *best = Some((alpha, p, m));
            }
        };
        let plus = at(h);
        let f_plus = self.eval(&plus)?;
        consider(h, plus, f_plus, &mut best);
        let minus = at(-h);
        let Some(f_minus) = self.eval(&minus) else { return best };
        consider(-h, minus, f_minus, &mut best);
        let curvature = f_plus - 2.0 * fx + f_minus;
        if curvature.is_finite() && curvature > 0.0 {
            let alpha = h * (f_minus - f_plus) / (2.0 * curvature);
            if alpha.is_finite() && alpha != h && alpha != -h && alpha != 0.0 {
                let p = at(alpha);
                if let Some(m) = self.eval(&p) {
                    consider(alpha, p, m, &mut best);
                }
            }
        }
        best
    }
}
