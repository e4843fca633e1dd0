//! Interval calibration and detection metrics.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::sqr::PredictionInterval;

/// Accepted validation coverage band, inclusive.
pub const CALIBRATION_BAND: (f64, f64) = (0.925, 0.975);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiEvaluation {
    pub picp: f64,
    pub mpiw: f64,
    pub n: usize,
    pub alpha: f64,
}

/// Fraction of targets inside their closed interval.
pub fn picp(intervals: &[PredictionInterval], ys: &[f64]) -> Result<f64> {
    check_dim(intervals.len(), ys.len())?;
    if ys.is_empty() {
        return Err(Error::invalid("no intervals to evaluate"));
    }
    let hits = intervals.iter().zip(ys).filter(|(iv, &y)| iv.contains(y)).count();
    Ok(hits as f64 / ys.len() as f64)
}

/// Mean interval width divided by `target_range`.
pub fn mpiw(intervals: &[PredictionInterval], target_range: f64) -> Result<f64> {
    if !(target_range > 0.0) {
        return Err(Error::invalid(format!("target range must be positive, got {target_range}")));
    }
    if intervals.is_empty() {
        return Err(Error::invalid("no intervals to evaluate"));
    }
    Ok(intervals.iter().map(|iv| iv.width()).sum::<f64>() / intervals.len() as f64 / target_range)
}

pub fn evaluate_intervals(intervals: &[PredictionInterval], ys: &[f64], target_range: f64) -> Result<PiEvaluation> {
    let alpha = intervals.first().map_or(f64::NAN, |iv| iv.alpha);
    Ok(PiEvaluation { picp: picp(intervals, ys)?, mpiw: mpiw(intervals, target_range)?, n: ys.len(), alpha })
}

/// One trained configuration's coverage numbers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigResult {
    pub val_picp: f64,
    pub test_picp: f64,
    pub test_mpiw: f64,
}

/// Mean and population standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<MeanStd> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(MeanStd { mean, std: var.sqrt() })
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.2} ± {:.2}", self.mean, self.std)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibratedSummary {
    pub picp: MeanStd,
    pub mpiw: MeanStd,
    pub survivors: usize,
    pub total: usize,
}

/// Outcome of the validation-band model selection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Summary(CalibratedSummary),
    /// No configuration reached the band.
    None,
}

impl Selection {
    pub fn summary(&self) -> Option<&CalibratedSummary> {
        match self {
            Selection::Summary(s) => Some(s),
            Selection::None => None,
        }
    }
}

impl std::fmt::Display for Selection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Selection::Summary(s) => write!(f, "{} ({})", s.picp, s.mpiw),
            Selection::None => write!(f, "none"),
        }
    }
}

/// Keeps configurations whose validation PICP lies in [`CALIBRATION_BAND`]
/// (inclusive) and summarizes their test PICP and MPIW.
pub fn select_calibrated(results: &[ConfigResult]) -> Selection {
    let (lo, hi) = CALIBRATION_BAND;
    let kept: Vec<&ConfigResult> = results.iter().filter(|r| r.val_picp >= lo && r.val_picp <= hi).collect();
    let picps: Vec<f64> = kept.iter().map(|r| r.test_picp).collect();
    let mpiws: Vec<f64> = kept.iter().map(|r| r.test_mpiw).collect();
    match (MeanStd::of(&picps), MeanStd::of(&mpiws)) {
        (Some(picp), Some(mpiw)) => {
            Selection::Summary(CalibratedSummary { picp, mpiw, survivors: kept.len(), total: results.len() })
        }
        _ => Selection::None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AucResult {
    pub auc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// ROC AUC as the Mann–Whitney statistic with midranks for ties;
/// `labels[i] = true` marks the positive class.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<AucResult> {
    check_dim(scores.len(), labels.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid("both classes must be present"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += midrank * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(AucResult { auc: u / (n_pos * n_neg) as f64, n_pos, n_neg })
}

/// Fraction of equal entries.
pub fn accuracy<T: PartialEq>(predicted: &[T], truth: &[T]) -> Result<f64> {
    check_dim(truth.len(), predicted.len())?;
    if truth.is_empty() {
        return Err(Error::invalid("no predictions to evaluate"));
    }
    Ok(predicted.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iv(lower: f64, upper: f64) -> PredictionInterval {
        PredictionInterval { lower, upper, alpha: 0.05, repaired: false }
    }

    #[test]
    fn picp_examples() {
        let ys = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(picp(&[iv(-1e9, 1e9); 4], &ys).unwrap(), 1.0);
        let misses: Vec<_> = ys.iter().map(|y| iv(y + 0.5, y + 0.5)).collect();
        assert_eq!(picp(&misses, &ys).unwrap(), 0.0);
        let some = [iv(0.0, 0.0), iv(0.5, 1.0), iv(2.0, 3.0), iv(5.0, 6.0)];
        assert_eq!(picp(&some, &ys).unwrap(), 0.75);
        assert!(picp(&some, &ys[..3]).is_err());
        assert!(picp(&[], &[]).is_err());
    }

    #[test]
    fn mpiw_examples() {
        assert_eq!(mpiw(&[iv(0.0, 1.0), iv(1.0, 4.0)], 4.0).unwrap(), 0.5);
        assert_eq!(mpiw(&[iv(2.0, 2.0)], 4.0).unwrap(), 0.0);
        assert_eq!(mpiw(&[iv(0.0, 3.0), iv(1.0, 4.0)], 4.0).unwrap(), 0.75);
        assert!(mpiw(&[iv(0.0, 1.0)], 0.0).is_err());
    }

    #[test]
    fn selection_rules() {
        let r = |v, t, m| ConfigResult { val_picp: v, test_picp: t, test_mpiw: m };
        let all = [r(0.95, 0.9, 0.3), r(0.95, 1.0, 0.5)];
        let s = *select_calibrated(&all).summary().unwrap();
        assert_eq!(s.survivors, 2);
        assert!((s.picp.mean - 0.95).abs() < 1e-12 && (s.picp.std - 0.05).abs() < 1e-12);
        assert_eq!(select_calibrated(&[r(0.8, 0.8, 0.1); 3]), Selection::None);
        assert_eq!(select_calibrated(&[]), Selection::None);
        assert_eq!(Selection::None.to_string(), "none");
        let edges = [r(0.925, 0.9, 0.1), r(0.975, 0.9, 0.1), r(0.924, 0.0, 0.0)];
        assert_eq!(select_calibrated(&edges).summary().unwrap().survivors, 2);
    }

    #[test]
    fn auc_examples() {
        let l = [false, false, true, true];
        assert_eq!(roc_auc(&[1.0, 2.0, 3.0, 4.0], &l).unwrap().auc, 1.0);
        assert_eq!(roc_auc(&[1.0, 3.0, 2.0, 4.0], &l).unwrap().auc, 0.75);
        assert_eq!(roc_auc(&[7.0; 4], &l).unwrap().auc, 0.5);
        assert!(roc_auc(&[1.0, 2.0], &[true, true]).is_err());
    }

    proptest! {
        #[test]
        fn auc_complement_and_monotone_invariance(
            pts in proptest::collection::vec((-3i32..3, any::<bool>()), 2..30)
        ) {
            let scores: Vec<f64> = pts.iter().map(|p| f64::from(p.0)).collect();
            let labels: Vec<bool> = pts.iter().map(|p| p.1).collect();
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            let a = roc_auc(&scores, &labels).unwrap().auc;
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            prop_assert_eq!(a + roc_auc(&neg, &labels).unwrap().auc, 1.0);
            let exp: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
            let aff: Vec<f64> = scores.iter().map(|s| 3.0 * s + 7.0).collect();
            prop_assert_eq!(roc_auc(&exp, &labels).unwrap().auc, a);
            prop_assert_eq!(roc_auc(&aff, &labels).unwrap().auc, a);
        }
    }

    #[test]
    fn accuracy_counts() {
        assert_eq!(accuracy(&[1, 0, 1, 1], &[1, 1, 1, 0]).unwrap(), 0.5);
        assert!(accuracy::<u8>(&[], &[]).is_err());
    }
}
