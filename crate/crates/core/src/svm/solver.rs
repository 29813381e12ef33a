//! Linear soft-margin SVM with an unregularized bias.
//!
//! Minimizes `J(w,b) = λ/2·‖w‖² + (1/n)·Σ cᵢ·max(0, 1 − yᵢ(w·xᵢ + b))`.
//!
//! For a fixed `b` the problem in `w` is a standard bias-free SVM with
//! margins `mᵢ = 1 − yᵢb`, solved by dual coordinate descent on
//! `max Σαᵢmᵢ − ½‖Σαᵢyᵢxᵢ‖²` subject to `0 ≤ αᵢ ≤ cᵢ/(λn)`. The reduced
//! objective `g(b) = min_w J(w,b)` is convex with derivative `−λ·Σαᵢyᵢ` at the
//! inner optimum, so the outer loop bisects on `b` using that sign. The inner
//! solve is warm-started from the previous `α`, which stays feasible because
//! the box does not depend on `b`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{SvmConfig, SvmError};
use crate::vector::SparseVector;

const MAX_OUTER: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub w: Vec<f64>,
    pub b: f64,
    pub objective: f64,
    pub outer_steps: usize,
    pub epochs: usize,
}

/// `J(w, b)` for the given examples.
pub fn objective(xs: &[SparseVector], ys: &[f64], costs: &[f64], lambda: f64, w: &[f64], b: f64) -> f64 {
    let n = xs.len() as f64;
    let reg = 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>();
    let loss: f64 = xs
        .iter()
        .zip(ys)
        .zip(costs)
        .map(|((x, y), c)| c * (1.0 - y * (x.dot_dense(w) + b)).max(0.0))
        .sum();
    reg + loss / n
}

/// Exact minimizer over `b` of the hinge part for fixed scores `s = w·x`.
/// The loss is convex piecewise linear with breakpoints at `yᵢ − sᵢ`; when
/// the minimum is attained on an interval its midpoint is returned.
pub fn best_bias(scores: &[f64], ys: &[f64], costs: &[f64]) -> Option<f64> {
    let mut points: Vec<(f64, f64)> = scores
        .iter()
        .zip(ys)
        .zip(costs)
        .filter(|(_, c)| **c > 0.0)
        .map(|((s, y), c)| (y - s, *c))
        .collect();
    let mut slope: f64 = -ys.iter().zip(costs).filter(|(y, _)| **y > 0.0).map(|(_, c)| c).sum::<f64>();
    if slope >= 0.0 || points.is_empty() {
        return None;
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut k = 0;
    while k < points.len() {
        let t = points[k].0;
        while k < points.len() && points[k].0 == t {
            slope += points[k].1;
            k += 1;
        }
        if slope > 0.0 {
            return Some(t);
        }
        if slope == 0.0 {
            return Some(match points.get(k) {
                Some(next) => 0.5 * (t + next.0),
                None => t,
            });
        }
    }
    None
}

struct Dual<'a> {
    xs: &'a [SparseVector],
    ys: &'a [f64],
    upper: Vec<f64>,
    qii: Vec<f64>,
    alpha: Vec<f64>,
    w: Vec<f64>,
}

impl Dual<'_> {
    /// Coordinate descent at fixed bias. Returns the number of passes made.
    fn solve(&mut self, b: f64, cfg: &SvmConfig, order: &mut [usize], rng: &mut ChaCha8Rng) -> usize {
        for pass in 1..=cfg.epochs {
            order.shuffle(rng);
            let mut gain = 0.0;
            for &i in order.iter() {
                let (x, y) = (&self.xs[i], self.ys[i]);
                let margin = 1.0 - y * b;
                let old = self.alpha[i];
                let new = if self.qii[i] > 0.0 {
                    let g = y * x.dot_dense(&self.w) - margin;
                    let new = (old - g / self.qii[i]).clamp(0.0, self.upper[i]);
                    let d = new - old;
                    if d != 0.0 {
                        gain += -d * g - 0.5 * d * d * self.qii[i];
                        for (j, v) in x.iter() {
                            self.w[j as usize] += d * y * v;
                        }
                    }
                    new
                } else {
                    let new = if margin > 0.0 { self.upper[i] } else { 0.0 };
                    gain += (new - old) * margin;
                    new
                };
                self.alpha[i] = new;
            }
            if cfg.lambda * gain < cfg.tolerance {
                return pass;
            }
        }
        cfg.epochs
    }

    fn signed_sum(&self) -> f64 {
        self.alpha.iter().zip(self.ys).map(|(a, y)| a * y).sum()
    }
}

/// Trains on raw examples. `ys` must be ±1 and contain both signs.
pub fn solve(xs: &[SparseVector], ys: &[f64], dim: usize, cfg: &SvmConfig) -> Result<Solution, SvmError> {
    cfg.validate()?;
    let n = xs.len();
    if !(ys.iter().any(|y| *y > 0.0) && ys.iter().any(|y| *y < 0.0)) {
        return Err(SvmError::SingleClass);
    }
    if let Some(x) = xs.iter().find(|x| x.min_dim() > dim) {
        return Err(SvmError::DimensionMismatch {
            expected: dim,
            found: x.min_dim(),
        });
    }
    let costs: Vec<f64> = ys.iter().map(|y| if *y > 0.0 { cfg.class_weight_pos } else { 1.0 }).collect();
    let scale = 1.0 / (cfg.lambda * n as f64);
    let mut dual = Dual {
        xs,
        ys,
        upper: costs.iter().map(|c| c * scale).collect(),
        qii: xs.iter().map(|x| x.norm().powi(2)).collect(),
        alpha: vec![0.0; n],
        w: vec![0.0; dim],
    };

    let j0 = costs.iter().sum::<f64>() / n as f64;
    let radius = xs.iter().map(SparseVector::norm).fold(0.0, f64::max);
    let bound = 1.0 + radius * (2.0 * j0 / cfg.lambda).sqrt();
    let (mut lo, mut hi) = (-bound, bound);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut best = Solution {
        w: vec![0.0; dim],
        b: 0.0,
        objective: f64::INFINITY,
        outer_steps: 0,
        epochs: 0,
    };
    let mut epochs = 0;
    let mut steps = 0;
    while steps < MAX_OUTER {
        steps += 1;
        let b = 0.5 * (lo + hi);
        epochs += dual.solve(b, cfg, &mut order, &mut rng);

        let scores: Vec<f64> = xs.iter().map(|x| x.dot_dense(&dual.w)).collect();
        let mut candidates = vec![b];
        candidates.extend(best_bias(&scores, ys, &costs));
        for cb in candidates {
            let j = objective(xs, ys, &costs, cfg.lambda, &dual.w, cb);
            if !j.is_finite() {
                return Err(SvmError::NonFiniteObjective);
            }
            if j < best.objective {
                best.objective = j;
                best.b = cb;
                best.w.clone_from(&dual.w);
            }
        }

        let s = dual.signed_sum();
        if s > 0.0 {
            lo = b;
        } else if s < 0.0 {
            hi = b;
        } else {
            break;
        }
        if hi - lo <= 1e-10 * (1.0 + b.abs()) {
            break;
        }
    }
    best.outer_steps = steps;
    best.epochs = epochs;
    Ok(best)
}
