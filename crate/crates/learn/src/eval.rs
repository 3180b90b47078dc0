use cmr_core::DiseaseClass;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const K: usize = DiseaseClass::ALL.len();

/// Confusion matrix (rows are the true class) and derived scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: [[usize; K]; K],
    pub n: usize,
    pub accuracy: f64,
    /// Recall per true class; `None` for classes absent from the truth.
    pub recall: [Option<f64>; K],
}

pub fn evaluate(preds: &[DiseaseClass], truth: &[DiseaseClass]) -> Result<EvalReport> {
    if preds.len() != truth.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} reference labels",
            preds.len(),
            truth.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::InvalidArgument("nothing to evaluate".into()));
    }
    let mut confusion = [[0usize; K]; K];
    for (p, t) in preds.iter().zip(truth) {
        confusion[t.index()][p.index()] += 1;
    }
    let n = preds.len();
    let trace: usize = (0..K).map(|i| confusion[i][i]).sum();
    let recall = std::array::from_fn(|i| {
        let row: usize = confusion[i].iter().sum();
        (row > 0).then(|| confusion[i][i] as f64 / row as f64)
    });
    Ok(EvalReport { confusion, n, accuracy: trace as f64 / n as f64, recall })
}

impl EvalReport {
    /// Plain-text confusion matrix with class headers.
    pub fn render(&self) -> String {
        let mut s = String::from("truth\\pred");
        for c in DiseaseClass::ALL {
            s.push_str(&format!("{:>6}", c.name()));
        }
        s.push_str("  recall\n");
        for c in DiseaseClass::ALL {
            s.push_str(&format!("{:<10}", c.name()));
            for v in self.confusion[c.index()] {
                s.push_str(&format!("{v:>6}"));
            }
            match self.recall[c.index()] {
                Some(r) => s.push_str(&format!("  {r:.3}\n")),
                None => s.push_str("  -\n"),
            }
        }
        s.push_str(&format!("accuracy {:.4} ({} cases)\n", self.accuracy, self.n));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use DiseaseClass::*;

    #[test]
    fn all_correct() {
        let t = DiseaseClass::ALL.to_vec();
        let r = evaluate(&t, &t).unwrap();
        assert_eq!(r.accuracy, 1.0);
        for i in 0..K {
            assert_eq!(r.confusion[i][i], 1);
            assert_eq!(r.recall[i], Some(1.0));
        }
    }

    #[test]
    fn all_nor_on_balanced_truth() {
        let t: Vec<DiseaseClass> = DiseaseClass::ALL.iter().flat_map(|&c| [c, c]).collect();
        let r = evaluate(&[Nor; 10], &t).unwrap();
        assert_eq!(r.accuracy, 0.2);
        assert_eq!(r.confusion[Dcm.index()][Nor.index()], 2);
    }

    #[test]
    fn hand_tallied() {
        let truth = [Minf, Minf, Dcm, Dcm, Hcm, Arv, Nor];
        let preds = [Minf, Dcm, Dcm, Minf, Hcm, Arv, Hcm];
        let r = evaluate(&preds, &truth).unwrap();
        assert_eq!(r.confusion[Minf.index()][Dcm.index()], 1);
        assert_eq!(r.confusion[Dcm.index()][Minf.index()], 1);
        assert_eq!(r.confusion[Nor.index()][Hcm.index()], 1);
        assert_eq!(r.confusion.iter().flatten().sum::<usize>(), 7);
        assert!((r.accuracy - 4.0 / 7.0).abs() < 1e-15);
        assert_eq!(r.recall[Minf.index()], Some(0.5));
        assert!(r.render().contains("accuracy 0.5714"));
    }

    #[test]
    fn length_mismatch() {
        assert!(evaluate(&[Nor], &[]).is_err());
    }
}
