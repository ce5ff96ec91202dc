//! Confusion-matrix statistics with closures as the positive class.
//!
//! Ratios whose denominator is zero are reported as `None` rather than 0,
//! so fold averages can exclude them explicitly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn scaled(&self, k: u64) -> Self {
        Self::new(self.tp * k, self.fp * k, self.fn_ * k, self.tn * k)
    }

    /// Same predictions with the opposite class treated as positive.
    pub fn swapped(&self) -> Self {
        Self::new(self.tn, self.fn_, self.fp, self.tp)
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Tally predictions against labels (both 0/1, 1 = closed).
pub fn confusion(predictions: &[u8], labels: &[u8]) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::Data(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Data("empty prediction set".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p == 1, y == 1) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

pub fn accuracy(cm: &ConfusionMatrix) -> Option<f64> {
    ratio(cm.tp + cm.tn, cm.total())
}

pub fn recall(cm: &ConfusionMatrix) -> Option<f64> {
    ratio(cm.tp, cm.tp + cm.fn_)
}

pub fn specificity(cm: &ConfusionMatrix) -> Option<f64> {
    ratio(cm.tn, cm.tn + cm.fp)
}

pub fn precision(cm: &ConfusionMatrix) -> Option<f64> {
    ratio(cm.tp, cm.tp + cm.fp)
}

pub fn f1(cm: &ConfusionMatrix) -> Option<f64> {
    let r = recall(cm)?;
    let p = precision(cm)?;
    if r + p == 0.0 {
        return None;
    }
    Some(2.0 * (r * p) / (r + p))
}

/// Observed and chance agreement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub observed: f64,
    pub chance: f64,
}

pub fn agreement(cm: &ConfusionMatrix) -> Option<Agreement> {
    let n = cm.total();
    if n == 0 {
        return None;
    }
    let n = n as f64;
    let (tp, fp, fn_, tn) = (cm.tp as f64, cm.fp as f64, cm.fn_ as f64, cm.tn as f64);
    Some(Agreement {
        observed: (tp + tn) / n,
        chance: ((tp + fp) * (tp + fn_) + (fn_ + tn) * (fp + tn)) / (n * n),
    })
}

/// Cohen's kappa. Defined as 1 when both raters use a single class and
/// agree everywhere.
pub fn kappa(cm: &ConfusionMatrix) -> Option<f64> {
    let a = agreement(cm)?;
    // Chance agreement is 1 only when predictions and labels are all the same class.
    let n = cm.total() as u128;
    let chance_num = (cm.tp + cm.fp) as u128 * (cm.tp + cm.fn_) as u128
        + (cm.fn_ + cm.tn) as u128 * (cm.fp + cm.tn) as u128;
    if chance_num == n * n {
        return Some(1.0);
    }
    Some((a.observed - a.chance) / (1.0 - a.chance))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum KappaBand {
    NoAgreement,
    Slight,
    Fair,
    Moderate,
    Substantial,
    AlmostPerfect,
}

impl KappaBand {
    pub fn label(self) -> &'static str {
        match self {
            KappaBand::NoAgreement => "No agreement",
            KappaBand::Slight => "Slight",
            KappaBand::Fair => "Fair",
            KappaBand::Moderate => "Moderate",
            KappaBand::Substantial => "Substantial",
            KappaBand::AlmostPerfect => "Almost perfect",
        }
    }
}

/// Landis-Koch interpretation; bands are closed on the right.
pub fn kappa_band(k: f64) -> KappaBand {
    if k < 0.0 {
        KappaBand::NoAgreement
    } else if k <= 0.20 {
        KappaBand::Slight
    } else if k <= 0.40 {
        KappaBand::Fair
    } else if k <= 0.60 {
        KappaBand::Moderate
    } else if k <= 0.80 {
        KappaBand::Substantial
    } else {
        KappaBand::AlmostPerfect
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: Option<f64>,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub kappa: Option<f64>,
    pub kappa_band: Option<KappaBand>,
    #[serde(skip)]
    pub agreement: Option<Agreement>,
}

impl MetricsReport {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Self {
        let k = kappa(cm);
        Self {
            accuracy: accuracy(cm),
            recall: recall(cm),
            precision: precision(cm),
            f1: f1(cm),
            kappa: k,
            kappa_band: k.map(kappa_band),
            agreement: agreement(cm),
        }
    }

    pub fn evaluate(predictions: &[u8], labels: &[u8]) -> Result<Self> {
        Ok(Self::from_confusion(&confusion(predictions, labels)?))
    }

    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Accuracy => self.accuracy,
            Metric::Recall => self.recall,
            Metric::Precision => self.precision,
            Metric::F1 => self.f1,
            Metric::Kappa => self.kappa,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Accuracy,
    Recall,
    Precision,
    F1,
    Kappa,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Accuracy,
        Metric::Recall,
        Metric::Precision,
        Metric::F1,
        Metric::Kappa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Recall => "recall",
            Metric::Precision => "precision",
            Metric::F1 => "f1",
            Metric::Kappa => "kappa",
        }
    }
}

/// Mean and sample standard deviation of one metric over folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// Folds that contributed a defined value.
    pub count: usize,
    /// Set when at least one fold had an undefined value.
    pub excluded: bool,
}

impl MetricSummary {
    pub fn from_values(values: &[Option<f64>]) -> Self {
        let defined: Vec<f64> = values.iter().flatten().copied().collect();
        let (mean, std) = mean_std(&defined);
        Self {
            mean,
            std,
            count: defined.len(),
            excluded: defined.len() < values.len(),
        }
    }
}

/// Arithmetic mean and sample (n − 1) standard deviation.
pub fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.len() >= 2).then(|| {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1.0)).sqrt()
    });
    (Some(mean), std)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub accuracy: MetricSummary,
    pub recall: MetricSummary,
    pub precision: MetricSummary,
    pub f1: MetricSummary,
    pub kappa: MetricSummary,
}

impl FoldSummary {
    pub fn get(&self, m: Metric) -> &MetricSummary {
        match m {
            Metric::Accuracy => &self.accuracy,
            Metric::Recall => &self.recall,
            Metric::Precision => &self.precision,
            Metric::F1 => &self.f1,
            Metric::Kappa => &self.kappa,
        }
    }
}

pub fn summarize_folds(reports: &[MetricsReport]) -> Result<FoldSummary> {
    if reports.len() < 2 {
        return Err(Error::Data(format!(
            "fold summary needs at least 2 reports, got {}",
            reports.len()
        )));
    }
    let col = |m: Metric| {
        MetricSummary::from_values(&reports.iter().map(|r| r.get(m)).collect::<Vec<_>>())
    };
    Ok(FoldSummary {
        accuracy: col(Metric::Accuracy),
        recall: col(Metric::Recall),
        precision: col(Metric::Precision),
        f1: col(Metric::F1),
        kappa: col(Metric::Kappa),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn confusion_counts() {
        let cm = confusion(&[1, 1, 0, 0], &[1, 0, 0, 1]).unwrap();
        assert_eq!(cm, ConfusionMatrix::new(1, 1, 1, 1));
        let cm = confusion(&[1; 7], &[1; 7]).unwrap();
        assert_eq!(cm, ConfusionMatrix::new(7, 0, 0, 0));
        assert!(confusion(&[], &[]).is_err());
        assert!(confusion(&[1], &[1, 0]).is_err());
    }

    #[test]
    fn ratios() {
        let cm = ConfusionMatrix::new(5, 0, 2, 0);
        assert_abs_diff_eq!(recall(&cm).unwrap(), 5.0 / 7.0, epsilon = 1e-15);
        let none = ConfusionMatrix::new(0, 0, 3, 4);
        assert_eq!(precision(&none), None);
        assert_eq!(f1(&none), None);

        let cm = ConfusionMatrix::new(40, 5, 10, 45);
        assert_abs_diff_eq!(accuracy(&cm).unwrap(), 0.85, epsilon = 1e-15);
        assert_abs_diff_eq!(precision(&cm).unwrap(), 8.0 / 9.0, epsilon = 1e-15);
        // 2·(0.8·8/9)/(0.8 + 8/9) = 16/19
        assert_abs_diff_eq!(f1(&cm).unwrap(), 16.0 / 19.0, epsilon = 1e-15);
    }

    #[test]
    fn kappa_cases() {
        let cm = ConfusionMatrix::new(40, 5, 10, 45);
        let a = agreement(&cm).unwrap();
        assert_abs_diff_eq!(a.observed, 0.85, epsilon = 1e-15);
        assert_abs_diff_eq!(a.chance, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(kappa(&cm).unwrap(), 0.70, epsilon = 1e-12);
        assert_eq!(kappa(&ConfusionMatrix::new(30, 0, 0, 70)), Some(1.0));
        assert_eq!(kappa(&ConfusionMatrix::new(25, 25, 25, 25)), Some(0.0));
        assert_eq!(kappa(&ConfusionMatrix::new(12, 0, 0, 0)), Some(1.0));
        assert_eq!(kappa(&ConfusionMatrix::default()), None);
    }

    #[test]
    fn bands() {
        assert_eq!(kappa_band(0.70), KappaBand::Substantial);
        assert_eq!(kappa_band(0.80), KappaBand::Substantial);
        assert_eq!(kappa_band(0.81), KappaBand::AlmostPerfect);
        assert_eq!(kappa_band(-0.1), KappaBand::NoAgreement);
        assert_eq!(kappa_band(0.0), KappaBand::Slight);
        assert_eq!(kappa_band(0.21), KappaBand::Fair);
    }

    #[test]
    fn report_json_keys() {
        let r = MetricsReport::from_confusion(&ConfusionMatrix::new(0, 0, 3, 4));
        let v = serde_json::to_value(&r).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort_unstable();
        assert_eq!(keys, ["accuracy", "f1", "kappa", "kappa_band", "precision", "recall"]);
        assert!(v["precision"].is_null());
    }

    #[test]
    fn fold_summary() {
        let mk = |r: f64| MetricsReport {
            accuracy: Some(0.5),
            recall: Some(r),
            precision: Some(0.5),
            f1: Some(0.5),
            kappa: Some(0.0),
            kappa_band: Some(KappaBand::Slight),
            agreement: None,
        };
        let s = summarize_folds(&[mk(0.9), mk(1.0)]).unwrap();
        assert_abs_diff_eq!(s.recall.mean.unwrap(), 0.95, epsilon = 1e-15);
        assert_abs_diff_eq!(s.recall.std.unwrap(), 0.070_710_678_118_654_75, epsilon = 1e-12);
        assert_eq!(s.accuracy.std, Some(0.0));
        assert!(summarize_folds(&[mk(0.9)]).is_err());

        let mut reports: Vec<MetricsReport> = (0..10).map(|_| mk(0.8)).collect();
        reports[3].precision = None;
        let s = summarize_folds(&reports).unwrap();
        assert_eq!(s.precision.count, 9);
        assert!(s.precision.excluded);
        assert!(!s.recall.excluded);
    }

    fn arb_cm() -> impl Strategy<Value = ConfusionMatrix> {
        (0u64..500, 0u64..500, 0u64..500, 0u64..500)
            .prop_filter("non-empty", |(a, b, c, d)| a + b + c + d > 0)
            .prop_map(|(a, b, c, d)| ConfusionMatrix::new(a, b, c, d))
    }

    proptest! {
        #[test]
        fn f1_is_harmonic_mean(cm in arb_cm()) {
            if let (Some(p), Some(r), Some(f)) = (precision(&cm), recall(&cm), f1(&cm)) {
                let h = 2.0 / (1.0 / p + 1.0 / r);
                prop_assert!((f - h).abs() < 1e-12);
            }
        }

        #[test]
        fn accuracy_between_recall_and_specificity(cm in arb_cm()) {
            if let (Some(r), Some(s)) = (recall(&cm), specificity(&cm)) {
                let a = accuracy(&cm).unwrap();
                prop_assert!(a >= r.min(s) - 1e-12 && a <= r.max(s) + 1e-12);
            }
        }

        #[test]
        fn kappa_scale_invariant(cm in arb_cm(), k in 1u64..50) {
            let a = kappa(&cm).unwrap();
            let b = kappa(&cm.scaled(k)).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&a));
        }

        #[test]
        fn swapping_positive_class(cm in arb_cm()) {
            let sw = cm.swapped();
            prop_assert_eq!(recall(&cm), specificity(&sw));
            prop_assert_eq!(specificity(&cm), recall(&sw));
            prop_assert!((kappa(&cm).unwrap() - kappa(&sw).unwrap()).abs() < 1e-12);
        }
    }
}
