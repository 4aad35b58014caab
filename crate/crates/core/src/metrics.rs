//! Threshold-free ranking metrics and method ranking.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

fn check(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch { what: "labels", expected: scores.len(), found: labels.len() });
    }
    Ok(())
}

/// Average (1-based) ranks with ties sharing the mean of their positions.
fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // Positions i+1 ..= j share the rank (i + 1 + j) / 2.
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

/// Area under the ROC curve via the Mann–Whitney U statistic: the
/// probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn auc_roc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// Area under the precision–recall curve with step interpolation:
/// `sum (R_k - R_{k-1}) * P_k` over distinct thresholds, highest first.
pub fn auc_pr(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 {
        return Err(Error::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            tp += labels[order[i]] as usize;
            seen += 1;
            i += 1;
        }
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / seen as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(area)
}

/// Mean rank of each method (row) across categories (columns); higher
/// metric is better, rank 1 is best, ties share the average rank.
pub fn mean_rank(table: &[Vec<f64>]) -> Result<Vec<f64>> {
    let Some(first) = table.first() else {
        return Ok(Vec::new());
    };
    let cats = first.len();
    if let Some(row) = table.iter().find(|r| r.len() != cats) {
        return Err(Error::LengthMismatch { what: "metric table row", expected: cats, found: row.len() });
    }
    if cats == 0 {
        return Err(Error::invalid("metric table", "needs at least one category"));
    }
    let mut totals = vec![0.0; table.len()];
    for c in 0..cats {
        // Negate so ascending midranks put the best metric first.
        let column: Vec<f64> = table.iter().map(|r| -r[c]).collect();
        for (t, r) in totals.iter_mut().zip(midranks(&column)) {
            *t += r;
        }
    }
    Ok(totals.into_iter().map(|t| t / cats as f64).collect())
}
