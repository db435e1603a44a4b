//! Open-set detection metrics and closed-set mean average precision.
//!
//! Curves sweep every distinct score as a threshold, predicting "novel" for
//! scores at or above it, so tied samples always cross together.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subjective_logic::Mechanism;

/// Novelty scores (higher means more novel) with binary ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    scores: Vec<f64>,
    truths: Vec<u8>,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, truths: Vec<u8>) -> Result<Self> {
        if scores.len() != truths.len() {
            return Err(Error::shape(
                "ScoredSet",
                format!("{} scores for {} labels", scores.len(), truths.len()),
            ));
        }
        if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
            return Err(Error::domain("ScoredSet", format!("non-finite score {s}")));
        }
        if truths.iter().any(|&t| t > 1) {
            return Err(Error::domain("ScoredSet", "truths must be 0 or 1"));
        }
        let positives = truths.iter().filter(|&&t| t == 1).count();
        if positives == 0 || positives == truths.len() {
            return Err(Error::domain(
                "ScoredSet",
                "need at least one novel and one known sample",
            ));
        }
        Ok(Self { scores, truths })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn truths(&self) -> &[u8] {
        &self.truths
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Cumulative `(TP, FP)` after each group of tied scores, highest first.
fn sweep(scores: &[f64], truths: &[u8]) -> Vec<(f64, usize, usize)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    for (pos, &i) in order.iter().enumerate() {
        if truths[i] == 1 {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_group = order.get(pos + 1).is_none_or(|&j| scores[j] != scores[i]);
        if last_of_group {
            points.push((scores[i], tp, fp));
        }
    }
    points
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveMetrics {
    pub auroc: f64,
    pub aupr: f64,
    pub fpr_at_95tpr: f64,
    pub detection_error: f64,
    /// TPR actually reached at the operating threshold.
    pub operating_tpr: f64,
    pub operating_threshold: f64,
}

/// AUROC (trapezoidal), AUPR (step sum of precision over recall increments)
/// and the error rates at the largest threshold whose TPR reaches 95%.
pub fn binary_curve_metrics(data: &ScoredSet) -> CurveMetrics {
    let pos = data.truths.iter().filter(|&&t| t == 1).count();
    let neg = data.len() - pos;
    let (p, n) = (pos as f64, neg as f64);

    // Twice the trapezoid area in units of one positive-negative pair; exact
    // in integers.
    let mut area2: u128 = 0;
    let mut aupr = 0.0;
    let (mut prev_tp, mut prev_fp) = (0usize, 0usize);
    let mut operating = None;
    for (threshold, tp, fp) in sweep(&data.scores, &data.truths) {
        area2 += ((fp - prev_fp) * (tp + prev_tp)) as u128;
        aupr += (tp - prev_tp) as f64 / p * tp as f64 / (tp + fp) as f64;
        if operating.is_none() && 100 * tp >= 95 * pos {
            operating = Some((threshold, tp as f64 / p, fp as f64 / n));
        }
        (prev_tp, prev_fp) = (tp, fp);
    }
    let (operating_threshold, tpr, fpr) = operating.expect("the lowest threshold reaches TPR = 1");
    CurveMetrics {
        auroc: area2 as f64 / (2.0 * p * n),
        aupr,
        fpr_at_95tpr: fpr,
        detection_error: 0.5 * (1.0 - tpr) + 0.5 * fpr,
        operating_tpr: tpr,
        operating_threshold,
    }
}

/// Average precision `Σ ΔR·P` over tie groups. `None` without positives.
pub fn average_precision(scores: &[f64], truths: &[u8]) -> Option<f64> {
    let pos = truths.iter().filter(|&&t| t == 1).count();
    if pos == 0 {
        return None;
    }
    let mut ap = 0.0;
    let mut prev_tp = 0;
    for (_, tp, fp) in sweep(scores, truths) {
        ap += (tp - prev_tp) as f64 / pos as f64 * tp as f64 / (tp + fp) as f64;
        prev_tp = tp;
    }
    Some(ap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanAp {
    pub map: f64,
    /// `None` for classes without a positive sample.
    pub per_class: Vec<Option<f64>>,
    pub skipped: Vec<usize>,
}

/// Per-class average precision averaged over classes with a positive.
pub fn mean_ap(prob: ArrayView2<f64>, truth: ArrayView2<f64>) -> Result<MeanAp> {
    if prob.dim() != truth.dim() {
        return Err(Error::shape(
            "mean_ap",
            format!("scores {:?} vs truth {:?}", prob.dim(), truth.dim()),
        ));
    }
    let per_class: Vec<Option<f64>> = prob
        .columns()
        .into_iter()
        .zip(truth.columns())
        .map(|(s, t)| {
            let t: Vec<u8> = t.iter().map(|&v| u8::from(v > 0.5)).collect();
            average_precision(&s.to_vec(), &t)
        })
        .collect();
    let skipped: Vec<usize> = per_class
        .iter()
        .enumerate()
        .filter(|(_, ap)| ap.is_none())
        .map(|(i, _)| i)
        .collect();
    let evaluable: Vec<f64> = per_class.iter().flatten().copied().collect();
    if evaluable.is_empty() {
        return Err(Error::domain("mean_ap", "no class has a positive sample"));
    }
    Ok(MeanAp {
        map: evaluable.iter().sum::<f64>() / evaluable.len() as f64,
        per_class,
        skipped,
    })
}

/// One row of the open-set table: Error / AUROC / AUPR / FPR at 95% TPR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanismRow {
    pub mechanism: Mechanism,
    pub error: f64,
    pub auroc: f64,
    pub aupr: f64,
    pub fpr_at_95tpr: f64,
    pub operating_tpr: f64,
}

impl MechanismRow {
    pub fn new(mechanism: Mechanism, m: &CurveMetrics) -> Self {
        Self {
            mechanism,
            error: m.detection_error,
            auroc: m.auroc,
            aupr: m.aupr,
            fpr_at_95tpr: m.fpr_at_95tpr,
            operating_tpr: m.operating_tpr,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn perfect_and_reversed_separation() {
        let truths = vec![1, 1, 1, 0, 0, 0, 0];
        let scores: Vec<f64> = truths.iter().map(|&t| f64::from(t)).collect();
        let m = binary_curve_metrics(&ScoredSet::new(scores.clone(), truths.clone()).unwrap());
        assert_eq!(
            (m.auroc, m.aupr, m.fpr_at_95tpr, m.detection_error),
            (1.0, 1.0, 0.0, 0.0)
        );
        assert_eq!(m.operating_tpr, 1.0);

        let reversed: Vec<f64> = scores.iter().map(|s| -s).collect();
        let m = binary_curve_metrics(&ScoredSet::new(reversed, truths).unwrap());
        assert_eq!(m.auroc, 0.0);
    }

    #[test]
    fn detection_error_at_exact_95() {
        // 20 novel: 19 ranked above everything, one at the bottom.
        let mut scores = vec![1.0; 19];
        let mut truths = vec![1u8; 19];
        scores.extend([0.5; 30]);
        truths.extend([0; 30]);
        scores.push(0.0);
        truths.push(1);
        let m = binary_curve_metrics(&ScoredSet::new(scores, truths).unwrap());
        assert_eq!(m.operating_tpr, 0.95);
        assert_eq!(m.fpr_at_95tpr, 0.0);
        assert!((m.detection_error - 0.025).abs() < 1e-15);
    }

    #[test]
    fn ties_cross_together() {
        let m = binary_curve_metrics(&ScoredSet::new(vec![0.5; 4], vec![1, 0, 1, 0]).unwrap());
        assert_eq!(m.auroc, 0.5);
        assert_eq!(m.aupr, 0.5);
        assert_eq!(m.fpr_at_95tpr, 1.0);
    }

    #[test]
    fn degenerate_sets_are_rejected() {
        assert!(ScoredSet::new(vec![0.1, 0.2], vec![1, 1]).is_err());
        assert!(ScoredSet::new(vec![0.1], vec![1, 0]).is_err());
        assert!(ScoredSet::new(vec![f64::NAN, 0.2], vec![1, 0]).is_err());
    }

    #[test]
    fn hand_enumerated_average_precision() {
        let ap = average_precision(&[0.9, 0.8, 0.1], &[1, 0, 1]).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(average_precision(&[0.3; 5], &[1, 0, 0, 1, 0]), Some(0.4));
    }

    #[test]
    fn mean_ap_skips_empty_classes() {
        let prob = array![[0.9, 0.2, 0.1], [0.1, 0.8, 0.3]];
        let truth = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let r = mean_ap(prob.view(), truth.view()).unwrap();
        assert_eq!(r.map, 1.0);
        assert_eq!(r.skipped, vec![2]);
        assert!(mean_ap(prob.view(), (truth * 0.0).view()).is_err());
    }
}
