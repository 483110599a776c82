use super::TuningError;

/// Mann-Whitney AUC: the probability that a random positive outscores a
/// random negative, ties counting one half. Computed from midranks after a
/// sort; the arithmetic is exact (integer half-counts).
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64, TuningError> {
    if scores.len() != labels.len() {
        return Err(TuningError::Length {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    let n1 = labels.iter().filter(|&&l| l == 1).count() as u64;
    let n0 = labels.len() as u64 - n1;
    if n1 == 0 || n0 == 0 {
        return Err(TuningError::SingleClass);
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(TuningError::NanScore);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the positive rank sum, with midranks for ties
    let mut two_rank_sum: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1; twice their mean is i + j + 2
        let two_mid = (i + j + 2) as u64;
        let pos = order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as u64;
        two_rank_sum += pos * two_mid;
        i = j + 1;
    }
    let two_u = two_rank_sum - n1 * (n1 + 1);
    Ok(two_u as f64 * 0.5 / (n1 as f64 * n0 as f64))
}
