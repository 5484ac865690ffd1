use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};

fn check_inputs(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::dim(
            "metric",
            format!("{} scores for {} labels", scores.len(), labels.len()),
        ));
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::Numeric {
            op: "metric",
            detail: format!("score {s} cannot be ranked"),
        });
    }
    if let Some(l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Usage(format!("labels must be 0 or 1, got {l}")));
    }
    Ok(())
}

/// Indices grouped into blocks of equal score, highest score first.
fn descending_blocks(scores: &[f64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match blocks.last_mut() {
            Some(block) if scores[block[0]] == scores[i] => block.push(i),
            _ => blocks.push(vec![i]),
        }
    }
    blocks
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_inputs(scores, labels)?;
    let positives = labels.iter().filter(|&&l| l == 1).count() as u128;
    let negatives = labels.len() as u128 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedMetric(
            "AUROC needs both positive and negative labels".into(),
        ));
    }
    // Counted in half-pairs so the sum stays an integer.
    let mut half_wins: u128 = 0;
    let mut negatives_below = negatives;
    for block in descending_blocks(scores) {
        let pos = block.iter().filter(|&&i| labels[i] == 1).count() as u128;
        let neg = block.len() as u128 - pos;
        negatives_below -= neg;
        half_wins += 2 * pos * negatives_below + pos * neg;
    }
    Ok(half_wins as f64 / (2 * positives * negatives) as f64)
}

/// Average precision: the mean over positives of the precision at their
/// rank, where a block of tied scores is ranked at its end.
pub fn aupr(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_inputs(scores, labels)?;
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 {
        return Err(Error::UndefinedMetric("AUPR needs at least one positive label".into()));
    }
    let mut total = BigRational::zero();
    let mut seen = 0usize;
    let mut hits = 0usize;
    for block in descending_blocks(scores) {
        let pos = block.iter().filter(|&&i| labels[i] == 1).count();
        seen += block.len();
        hits += pos;
        if pos > 0 {
            total += BigRational::new(BigInt::from(pos * hits), BigInt::from(seen));
        }
    }
    let ap = total / BigRational::from_integer(BigInt::from(positives));
    ap.to_f64()
        .ok_or_else(|| Error::Numeric {
            op: "aupr",
            detail: "average precision not representable".into(),
        })
}

/// Whether the `true_lags.len()` largest scores sit exactly at the true
/// (1-based) lags. A tie across the cut-off leaves the top set ambiguous and
/// counts as a miss.
pub fn lag_recovery(lag_scores: &[f64], true_lags: &[usize]) -> bool {
    let m = true_lags.len();
    if m > lag_scores.len() || true_lags.iter().any(|&k| k == 0 || k > lag_scores.len()) {
        return false;
    }
    let mut order: Vec<usize> = (0..lag_scores.len()).collect();
    order.sort_by(|&a, &b| lag_scores[b].total_cmp(&lag_scores[a]));
    if m > 0 && m < order.len() && lag_scores[order[m - 1]] == lag_scores[order[m]] {
        return false;
    }
    let mut top: Vec<usize> = order[..m].iter().map(|i| i + 1).collect();
    let mut truth = true_lags.to_vec();
    top.sort_unstable();
    truth.sort_unstable();
    truth.dedup();
    top == truth
}
