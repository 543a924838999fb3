use super::confusion::ConfusionMatrix;

/// One-vs-rest scores of a label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMetrics<L> {
    pub label: L,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    /// A denominator was zero and the affected score was set to 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport<L> {
    pub per_label: Vec<LabelMetrics<L>>,
    /// Trace over total.
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f_measure: f64,
}

impl<L> MetricReport<L> {
    pub fn get(&self, label: &L) -> Option<&LabelMetrics<L>>
    where
        L: PartialEq,
    {
        self.per_label.iter().find(|m| &m.label == label)
    }
}

fn ratio(num: u64, den: u64, degenerate: &mut bool) -> f64 {
    if den == 0 {
        *degenerate = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and F-measure per label, their macro averages, and
/// accuracy.
pub fn metrics<L: Ord + Clone>(cm: &ConfusionMatrix<L>) -> MetricReport<L> {
    let n = cm.labels.len();
    assert!(n > 0, "metrics of an empty confusion matrix");
    let mut per_label = Vec::with_capacity(n);
    for i in 0..n {
        let tp = cm.counts[i][i];
        let fp: u64 = (0..n).filter(|&r| r != i).map(|r| cm.counts[r][i]).sum();
        let fn_: u64 = (0..n).filter(|&c| c != i).map(|c| cm.counts[i][c]).sum();
        let mut degenerate = false;
        let precision = ratio(tp, tp + fp, &mut degenerate);
        let recall = ratio(tp, tp + fn_, &mut degenerate);
        let f_measure = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            degenerate = true;
            0.0
        };
        per_label.push(LabelMetrics {
            label: cm.labels[i].clone(),
            tp,
            fp,
            fn_,
            precision,
            recall,
            f_measure,
            degenerate,
        });
    }
    let total = cm.total();
    let trace: u64 = (0..n).map(|i| cm.counts[i][i]).sum();
    let mean = |f: fn(&LabelMetrics<L>) -> f64| per_label.iter().map(f).sum::<f64>() / n as f64;
    MetricReport {
        accuracy: if total == 0 { 0.0 } else { trace as f64 / total as f64 },
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f_measure: mean(|m| m.f_measure),
        per_label,
    }
}
