use crate::error::{Error, Result};

/// Weighted average of class-probability rows from several models,
/// renormalized per row.
pub fn soft_vote(prob_sets: &[Vec<Vec<f64>>], weights: &[f64]) -> Result<Vec<Vec<f64>>> {
    if prob_sets.is_empty() || prob_sets.len() != weights.len() {
        return Err(Error::InvalidArgument(format!(
            "{} probability sets but {} weights",
            prob_sets.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InvalidArgument("voting weights must be non-negative with a positive sum".into()));
    }
    let rows = prob_sets[0].len();
    let classes = prob_sets[0].first().map_or(0, |r| r.len());
    for set in prob_sets {
        if set.len() != rows || set.iter().any(|r| r.len() != classes) {
            return Err(Error::InvalidArgument("probability sets differ in shape".into()));
        }
    }
    Ok((0..rows)
        .map(|i| {
            let mut p = vec![0.0; classes];
            for (set, &w) in prob_sets.iter().zip(weights) {
                for (acc, v) in p.iter_mut().zip(&set[i]) {
                    *acc += w * v;
                }
            }
            let s: f64 = p.iter().sum();
            p.iter().map(|v| v / s).collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn opposite_one_hots_average() {
        let v = soft_vote(&[vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]], &[0.5, 0.5]).unwrap();
        assert_eq!(v, vec![vec![0.5, 0.5]]);
    }

    #[test]
    fn identical_inputs_unchanged() {
        let rows = vec![vec![0.2, 0.3, 0.5], vec![0.6, 0.4, 0.0]];
        let v = soft_vote(&[rows.clone(), rows.clone()], &[0.9, 0.1]).unwrap();
        for (a, b) in v.iter().flatten().zip(rows.iter().flatten()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn weighted_mean() {
        let a = vec![vec![0.8, 0.2]];
        let b = vec![vec![0.4, 0.6]];
        let v = soft_vote(&[a, b], &[0.3, 0.7]).unwrap();
        assert!((v[0][0] - (0.3 * 0.8 + 0.7 * 0.4)).abs() < 1e-15);
        assert!((v[0][1] - (0.3 * 0.2 + 0.7 * 0.6)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_weights_and_shapes() {
        let a = vec![vec![1.0, 0.0]];
        assert!(soft_vote(std::slice::from_ref(&a), &[0.0]).is_err());
        assert!(soft_vote(&[a.clone(), a.clone()], &[1.0]).is_err());
        assert!(soft_vote(&[a, vec![vec![1.0]]], &[1.0, 1.0]).is_err());
    }
}
