//! Small tables rendered as CSV or aligned text.

use std::fmt::Display;
use std::path::Path;

use canoa::evalkit::{ConfusionMatrix, MetricReport};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    #[default]
    Text,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Text => "txt",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<S: ToString>(&mut self, row: impl IntoIterator<Item = S>) {
        self.rows.push(row.into_iter().map(|c| c.to_string()).collect());
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }

    pub fn to_text(&self) -> String {
        let cols = self.header.len();
        let mut width = vec![0; cols];
        for r in std::iter::once(&self.header).chain(&self.rows) {
            for (w, c) in width.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut s = String::new();
        for r in std::iter::once(&self.header).chain(&self.rows) {
            let cells: Vec<String> = r.iter().zip(&width).map(|(c, &w)| format!("{c:>w$}")).collect();
            s += cells.join("  ").trim_end();
            s.push('\n');
        }
        s
    }

    pub fn render(&self, fmt: OutputFormat) -> String {
        match fmt {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Text => self.to_text(),
        }
    }

    pub fn save(&self, path: &Path, fmt: OutputFormat) -> Result<(), CliError> {
        std::fs::write(path, self.render(fmt)).map_err(|e| CliError::io(path, e))
    }
}

/// Row-normalized rates with the row count as the last column.
pub fn confusion_table<L: Ord + Clone + Display>(cm: &ConfusionMatrix<L>) -> Table {
    let mut t = Table::new(
        std::iter::once("truth\\predicted".to_string())
            .chain(cm.labels.iter().map(ToString::to_string))
            .chain(std::iter::once("n".to_string())),
    );
    for (i, row) in cm.rates().iter().enumerate() {
        t.push(
            std::iter::once(cm.labels[i].to_string())
                .chain(row.iter().map(|r| format!("{r:.4}")))
                .chain(std::iter::once(cm.row_total(i).to_string())),
        );
    }
    t
}

pub fn metric_table<L: Display>(m: &MetricReport<L>) -> Table {
    let mut t = Table::new(["label", "precision", "recall", "f_measure", "degenerate"]);
    for l in &m.per_label {
        t.push([
            l.label.to_string(),
            format!("{:.4}", l.precision),
            format!("{:.4}", l.recall),
            format!("{:.4}", l.f_measure),
            l.degenerate.to_string(),
        ]);
    }
    t.push([
        "macro".to_string(),
        format!("{:.4}", m.macro_precision),
        format!("{:.4}", m.macro_recall),
        format!("{:.4}", m.macro_f_measure),
        format!("accuracy={:.4}", m.accuracy),
    ]);
    t
}
