use super::EvalError;

/// Break-even point: precision at rank `P`, where `P` is the number of
/// positives. At that rank precision and recall coincide.
///
/// Predictions are ranked by descending score; equal scores keep their input
/// order.
pub fn bep(predictions: &[(f64, i8)]) -> Result<f64, EvalError> {
    check_scores(predictions)?;
    let positives = predictions.iter().filter(|p| p.1 > 0).count();
    if positives == 0 {
        return Err(EvalError::NoPositives);
    }
    let order = ranking(predictions);
    let hits = order[..positives].iter().filter(|&&i| predictions[i].1 > 0).count();
    Ok(hits as f64 / positives as f64)
}

/// ROC curve as `(fpr, tpr)` points from `(0,0)` to `(1,1)`, one point per
/// distinct score, and the area under it. Tied positive/negative pairs count
/// one half.
pub fn roc(predictions: &[(f64, i8)]) -> Result<(Vec<(f64, f64)>, f64), EvalError> {
    check_scores(predictions)?;
    let p = predictions.iter().filter(|x| x.1 > 0).count() as u64;
    let n = predictions.len() as u64 - p;
    if p == 0 || n == 0 {
        return Err(EvalError::SingleClass);
    }
    let order = ranking(predictions);
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    // twice the number of won pairs, so ties stay integral
    let mut twice_wins: u128 = 0;
    let mut k = 0;
    while k < order.len() {
        let s = predictions[order[k]].0;
        let (mut gp, mut gn) = (0u64, 0u64);
        while k < order.len() && predictions[order[k]].0 == s {
            if predictions[order[k]].1 > 0 {
                gp += 1;
            } else {
                gn += 1;
            }
            k += 1;
        }
        let below = n - fp - gn;
        twice_wins += u128::from(gp) * u128::from(2 * below + gn);
        tp += gp;
        fp += gn;
        points.push((fp as f64 / n as f64, tp as f64 / p as f64));
    }
    let auc = twice_wins as f64 / (2.0 * p as f64 * n as f64);
    Ok((points, auc))
}

pub fn auc(predictions: &[(f64, i8)]) -> Result<f64, EvalError> {
    roc(predictions).map(|r| r.1)
}

fn ranking(predictions: &[(f64, i8)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..predictions.len()).collect();
    order.sort_by(|&a, &b| predictions[b].0.total_cmp(&predictions[a].0));
    order
}

fn check_scores(predictions: &[(f64, i8)]) -> Result<(), EvalError> {
    match predictions.iter().position(|p| !p.0.is_finite()) {
        Some(i) => Err(EvalError::NonFiniteScore(i)),
        None => Ok(()),
    }
}
