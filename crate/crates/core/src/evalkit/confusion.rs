use std::collections::BTreeSet;
use std::fmt::Display;

use super::EvalError;

/// Counts of `(truth, predicted)` pairs over a sorted label set.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix<L> {
    pub labels: Vec<L>,
    /// `counts[i][j]`: truth `labels[i]`, predicted `labels[j]`.
    pub counts: Vec<Vec<u64>>,
}

impl<L: Ord + Clone> ConfusionMatrix<L> {
    /// Empty matrix over `labels`.
    pub fn with_labels(labels: impl IntoIterator<Item = L>) -> Self {
        let labels: Vec<L> = labels.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let n = labels.len();
        Self {
            labels,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn index_of(&self, label: &L) -> Option<usize> {
        self.labels.binary_search(label).ok()
    }

    /// Adds one observation; both labels must be in the label set.
    pub fn add(&mut self, truth: &L, predicted: &L) {
        let i = self.index_of(truth).expect("truth label in label set");
        let j = self.index_of(predicted).expect("predicted label in label set");
        self.counts[i][j] += 1;
    }

    pub fn count(&self, truth: &L, predicted: &L) -> u64 {
        match (self.index_of(truth), self.index_of(predicted)) {
            (Some(i), Some(j)) => self.counts[i][j],
            _ => 0,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_total(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    /// Row-normalized rates; rows with no observations stay all zero.
    pub fn rates(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let n: u64 = row.iter().sum();
                row.iter()
                    .map(|&c| if n == 0 { 0.0 } else { c as f64 / n as f64 })
                    .collect()
            })
            .collect()
    }

    /// Fraction of `truth` observations predicted as `predicted`.
    pub fn rate(&self, truth: &L, predicted: &L) -> f64 {
        match (self.index_of(truth), self.index_of(predicted)) {
            (Some(i), Some(j)) => {
                let n = self.row_total(i);
                if n == 0 {
                    0.0
                } else {
                    self.counts[i][j] as f64 / n as f64
                }
            }
            _ => 0.0,
        }
    }

    /// Diagonal rate of every label that occurs as truth.
    pub fn diagonal_rates(&self) -> Vec<(L, f64)> {
        let rates = self.rates();
        (0..self.labels.len())
            .filter(|&i| self.row_total(i) > 0)
            .map(|i| (self.labels[i].clone(), rates[i][i]))
            .collect()
    }
}

impl<L: Ord + Clone + Display> ConfusionMatrix<L> {
    /// Plain-text table of row-normalized rates.
    pub fn to_text(&self) -> String {
        let names: Vec<String> = self.labels.iter().map(|l| l.to_string()).collect();
        let w = names.iter().map(String::len).max().unwrap_or(0).max(6);
        let mut s = format!("{:>w$}", "truth\\pred");
        for n in &names {
            s += &format!(" {n:>w$}");
        }
        s.push('\n');
        for (i, row) in self.rates().iter().enumerate() {
            s += &format!("{:>w$}", names[i]);
            for r in row {
                s += &format!(" {r:>w$.4}");
            }
            s += &format!("  (n={})\n", self.row_total(i));
        }
        s
    }
}

/// Tallies `truth` against `predicted`; the label set is the union of both.
pub fn confusion<L: Ord + Clone>(truth: &[L], predicted: &[L]) -> Result<ConfusionMatrix<L>, EvalError> {
    if truth.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            truth: truth.len(),
            predicted: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut cm = ConfusionMatrix::with_labels(truth.iter().chain(predicted).cloned());
    for (t, p) in truth.iter().zip(predicted) {
        cm.add(t, p);
    }
    Ok(cm)
}
