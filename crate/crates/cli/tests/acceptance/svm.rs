use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segmodel_core::svm::{train, Example, Provenance, SvmConfig, SvmModel, TrainingSet};
use segmodel_core::vector::{FeatureSetMask, SparseVector};

use crate::{ensure, Outcome};

type Point = ([f64; 2], f64);

fn objective(points: &[Point], lambda: f64, w: [f64; 2], b: f64) -> f64 {
    let loss: f64 = points
        .iter()
        .map(|(x, y)| (1.0 - y * (w[0] * x[0] + w[1] * x[1] + b)).max(0.0))
        .sum();
    0.5 * lambda * (w[0] * w[0] + w[1] * w[1]) + loss / points.len() as f64
}

/// Minimum of the objective over a grid with spacing `step` centered on
/// `center`, `radius` steps in each direction, clipped to [-5, 5]³.
fn grid(points: &[Point], lambda: f64, center: [f64; 3], step: f64, radius: i32) -> ([f64; 3], f64) {
    let axis = |c: f64| -> Vec<f64> {
        (-radius..=radius)
            .map(|k| c + k as f64 * step)
            .filter(|v| (-5.0 - 1e-12..=5.0 + 1e-12).contains(v))
            .collect()
    };
    let (ax, ay, ab) = (axis(center[0]), axis(center[1]), axis(center[2]));
    let mut best = ([0.0; 3], f64::INFINITY);
    let mut scores = vec![0.0; points.len()];
    for &w0 in &ax {
        for &w1 in &ay {
            for (s, (x, _)) in scores.iter_mut().zip(points) {
                *s = w0 * x[0] + w1 * x[1];
            }
            let reg = 0.5 * lambda * (w0 * w0 + w1 * w1);
            for &b in &ab {
                let loss: f64 = scores.iter().zip(points).map(|(s, (_, y))| (1.0 - y * (s + b)).max(0.0)).sum();
                let j = reg + loss / points.len() as f64;
                if j < best.1 {
                    best = ([w0, w1, b], j);
                }
            }
        }
    }
    best
}

/// Exhaustive search on a 0.1 grid over the whole cube, then successively
/// finer grids around the incumbent.
fn grid_minimum(points: &[Point], lambda: f64) -> f64 {
    let (mut at, mut best) = grid(points, lambda, [0.0; 3], 0.1, 50);
    for step in [0.01, 0.001, 0.0001] {
        let (a, j) = grid(points, lambda, at, step, 25);
        if j < best {
            at = a;
            best = j;
        }
    }
    best
}

fn fit(points: &[Point], lambda: f64, epochs: usize) -> Result<SvmModel, String> {
    let examples = points
        .iter()
        .enumerate()
        .map(|(i, (x, y))| Example {
            user_id: format!("p{i}"),
            x: SparseVector::from_dense(x).unwrap(),
            y: if *y > 0.0 { 1 } else { -1 },
        })
        .collect();
    let ts = TrainingSet {
        examples,
        dim: 2,
        provenance: Provenance {
            query: "synthetic".into(),
            seed: 0,
            neg_ratio: 1.0,
            min_visits: 1,
            mask: FeatureSetMask::ALL,
            feature_space_id: "plane".into(),
        },
    };
    let cfg = SvmConfig { lambda, epochs, ..SvmConfig::default() };
    train(&ts, &cfg).map_err(|e| e.to_string())
}

fn noisy_problem(rng: &mut ChaCha8Rng) -> Vec<Point> {
    let n = rng.gen_range(6..=50);
    let u = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
    let c = rng.gen_range(-0.5..0.5);
    let mut pts: Vec<Point> = (0..n)
        .map(|_| {
            let x = [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)];
            let s = u[0] * x[0] + u[1] * x[1] + c + rng.gen_range(-0.8..0.8);
            (x, if s > 0.0 { 1.0 } else { -1.0 })
        })
        .collect();
    pts[0].1 = 1.0;
    pts[1].1 = -1.0;
    pts
}

fn separable_problem(rng: &mut ChaCha8Rng) -> Vec<Point> {
    let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let u = [angle.cos(), angle.sin()];
    let c = rng.gen_range(-0.3..0.3);
    let n = rng.gen_range(10..=50);
    let mut pts = Vec::with_capacity(n);
    while pts.len() < n {
        let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let s: f64 = u[0] * x[0] + u[1] * x[1] - c;
        if s.abs() < 0.1 {
            continue;
        }
        let y = if pts.len() < 2 { if pts.is_empty() { 1.0 } else { -1.0 } } else { s.signum() };
        if y != s.signum() {
            continue;
        }
        pts.push((x, y));
    }
    pts
}

pub fn check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let points = noisy_problem(&mut rng);
        let lambda = [0.05, 0.1, 0.5][case % 3];
        let model = fit(&points, lambda, 200)?;
        let j = objective(&points, lambda, [model.w[0], model.w[1]], model.b);
        let g = grid_minimum(&points, lambda);
        ensure((j - g).abs() <= 1e-3, || format!("problem {case}: trained J {j}, grid minimum {g}"))?;
        worst = worst.max(j - g);
    }
    for case in 0..20 {
        let points = separable_problem(&mut rng);
        let model = fit(&points, 1e-4, 2000)?;
        let wrong = points
            .iter()
            .filter(|(x, y)| (model.w[0] * x[0] + model.w[1] * x[1] + model.b) * y <= 0.0)
            .count();
        ensure(wrong == 0, || format!("separable problem {case}: {wrong} of {} misclassified", points.len()))?;
    }
    Ok(format!("20 noisy problems, trained J - grid minimum <= {worst:.2e}; 20 separable problems fit exactly"))
}
