use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segmodel_core::eval::{auc, bep};

use crate::{ensure, Outcome};

/// Walks every cutoff of the ranking (descending score, ties in input order)
/// and returns the value at the cutoff where precision equals recall with at
/// least one hit, or 0 when no such cutoff exists.
fn oracle_bep(preds: &[(f64, i8)]) -> f64 {
    let p = preds.iter().filter(|x| x.1 > 0).count();
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].0.partial_cmp(&preds[a].0).unwrap().then(a.cmp(&b)));
    let mut tp = 0usize;
    for (r, &i) in order.iter().enumerate() {
        let rank = r + 1;
        if preds[i].1 > 0 {
            tp += 1;
        }
        // precision tp/rank equals recall tp/p
        if tp > 0 && tp * p == tp * rank {
            return tp as f64 / rank as f64;
        }
    }
    0.0
}

fn oracle_auc(preds: &[(f64, i8)]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for a in preds.iter().filter(|x| x.1 > 0) {
        for b in preds.iter().filter(|x| x.1 <= 0) {
            pairs += 1.0;
            if a.0 > b.0 {
                wins += 1.0;
            } else if a.0 == b.0 {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

fn random_set(rng: &mut ChaCha8Rng) -> Vec<(f64, i8)> {
    let n = rng.gen_range(2..=200);
    let rate = rng.gen_range(0.05..0.95);
    let levels = if rng.gen_bool(0.5) { Some(rng.gen_range(1..=6)) } else { None };
    let mut v: Vec<(f64, i8)> = (0..n)
        .map(|_| {
            let s = match levels {
                Some(k) => rng.gen_range(0..k) as f64 * 0.5 - 1.0,
                None => rng.gen_range(-3.0..3.0),
            };
            (s, if rng.gen_bool(rate) { 1 } else { -1 })
        })
        .collect();
    v[0].1 = 1;
    v[1].1 = -1;
    v
}

pub fn check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut tied = 0;
    for case in 0..1000 {
        let preds = random_set(&mut rng);
        let mut scores: Vec<f64> = preds.iter().map(|p| p.0).collect();
        scores.sort_by(f64::total_cmp);
        if scores.windows(2).any(|w| w[0] == w[1]) {
            tied += 1;
        }
        let b = bep(&preds).map_err(|e| format!("case {case}: bep failed: {e}"))?;
        let a = auc(&preds).map_err(|e| format!("case {case}: auc failed: {e}"))?;
        let (ob, oa) = (oracle_bep(&preds), oracle_auc(&preds));
        ensure((b - ob).abs() <= 1e-9, || format!("case {case}: bep {b} vs oracle {ob}"))?;
        ensure((a - oa).abs() <= 1e-9, || format!("case {case}: auc {a} vs oracle {oa}"))?;
        worst = worst.max((b - ob).abs()).max((a - oa).abs());
    }
    Ok(format!("1000 sets ({tied} with ties), max deviation {worst:.1e}"))
}
