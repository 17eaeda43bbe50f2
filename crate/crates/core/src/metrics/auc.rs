use crate::error::{Error, Result};

/// Area under the ROC curve as the Mann–Whitney statistic; tied scores get
/// half credit.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape("auc", scores.len(), labels.len()));
    }
    if let Some(bad) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
        return Err(Error::InvalidArgument(format!("label {bad} is not binary")));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("auc scores".into()));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1.0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidArgument(
            "auc needs both positive and negative labels".into(),
        ));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // sum of (1-based, tie-averaged) ranks of the positives
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        let pos_in_run = order[i..=j].iter().filter(|&&k| labels[k] == 1.0).count();
        rank_sum += mid * pos_in_run as f64;
        i = j + 1;
    }
    let np = n_pos as f64;
    let u = rank_sum - np * (np + 1.0) / 2.0;
    Ok(u / (np * n_neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairwise(scores: &[f64], labels: &[f64]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if labels[i] == 1.0 && labels[j] == 0.0 {
                    pairs += 1.0;
                    if si > sj {
                        wins += 1.0;
                    } else if si == sj {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn perfect_and_tied() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[0.0, 0.0, 1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(auc(&[0.5; 6], &[0.0, 1.0, 0.0, 1.0, 1.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn hand_case_matches_quadratic_oracle_exactly() {
        let scores = [
            0.3, 0.7, 0.7, 0.1, 0.9, 0.4, 0.4, 0.4, 0.2, 0.6, 0.8, 0.5, 0.3, 0.7, 0.05, 0.95, 0.55,
            0.4, 0.65, 0.3,
        ];
        let labels = [
            0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0,
            0.0, 1.0, 0.0,
        ];
        assert_eq!(auc(&scores, &labels).unwrap(), pairwise(&scores, &labels));
    }

    #[test]
    fn single_class_rejected() {
        assert!(auc(&[0.1, 0.2], &[1.0, 1.0]).is_err());
        assert!(auc(&[0.1], &[0.5]).is_err());
    }

    proptest! {
        #[test]
        fn invariant_under_increasing_transform(
            pts in prop::collection::vec((0u32..20, any::<bool>()), 2..60)
        ) {
            let scores: Vec<f64> = pts.iter().map(|p| f64::from(p.0) / 4.0).collect();
            let labels: Vec<f64> = pts.iter().map(|p| f64::from(u8::from(p.1))).collect();
            prop_assume!(labels.contains(&0.0) && labels.contains(&1.0));
            let a = auc(&scores, &labels).unwrap();
            let t: Vec<f64> = scores.iter().map(|s| (s * 3.0).exp() - 7.0).collect();
            prop_assert_eq!(a, auc(&t, &labels).unwrap());
            prop_assert_eq!(a, pairwise(&scores, &labels));
        }
    }
}
