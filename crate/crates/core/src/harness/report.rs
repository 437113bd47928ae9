//! Result tables: one row per case and dataset, one column per classifier.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::results::{read_results, summarize, RunRecord, Summary};
use crate::classifier::ClassifierKind;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::validation(format!("unknown report format '{other}'"))),
        }
    }
}

/// Ranks of `values` with 1 for the largest; tied values share the mean of
/// the positions they occupy.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        order[i..=j].iter().for_each(|&k| ranks[k] = rank);
        i = j + 1;
    }
    ranks
}

/// Mean rank of each column over the rows where it has a value.
pub fn average_ranks(matrix: &[Vec<Option<f64>>]) -> Vec<Option<f64>> {
    let cols = matrix.first().map_or(0, Vec::len);
    let mut sums = vec![(0.0, 0usize); cols];
    for row in matrix {
        let present: Vec<usize> = (0..cols).filter(|&j| row[j].is_some()).collect();
        let values: Vec<f64> = present.iter().map(|&j| row[j].unwrap()).collect();
        for (&j, r) in present.iter().zip(mid_ranks(&values)) {
            sums[j].0 += r;
            sums[j].1 += 1;
        }
    }
    sums.into_iter().map(|(s, n)| (n > 0).then(|| s / n as f64)).collect()
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Per-(row, classifier) summaries laid out as in the paper's tables.
#[derive(Clone, Debug)]
pub struct ReportTable {
    pub rows: Vec<String>,
    pub classifiers: Vec<ClassifierKind>,
    pub cells: Vec<Vec<Option<Summary>>>,
}

impl ReportTable {
    pub fn from_records(records: &[RunRecord]) -> Result<Self> {
        if !records.iter().any(RunRecord::is_ok) {
            return Err(Error::validation("no successful runs to report"));
        }
        let summaries = summarize(records);
        let distinct = |f: &dyn Fn(&Summary) -> String| summaries.iter().map(f).collect::<BTreeSet<_>>().len() > 1;
        let show_experiment = distinct(&|s| s.key.experiment.clone());
        let show_interval = distinct(&|s| s.key.interval_s.to_string());
        let show_size = summaries.iter().any(|s| s.key.data_size_mode != "none");
        let label = |s: &Summary| {
            let k = &s.key;
            let mut l = format!("{} / {}", k.case_id, k.dataset);
            if show_experiment {
                l = format!("{} {l}", k.experiment);
            }
            if show_interval {
                write!(l, " @ {}s", k.interval_s).unwrap();
            }
            if show_size {
                write!(l, " {} p={}", k.data_size_mode, k.fraction()).unwrap();
            }
            l
        };
        let classifiers: Vec<ClassifierKind> =
            summaries.iter().map(|s| s.key.classifier).collect::<BTreeSet<_>>().into_iter().collect();
        let mut rows: Vec<String> = Vec::new();
        let mut cells: BTreeMap<String, Vec<Option<Summary>>> = BTreeMap::new();
        for s in summaries {
            let l = label(&s);
            let row = cells.entry(l.clone()).or_insert_with(|| {
                rows.push(l);
                vec![None; classifiers.len()]
            });
            let j = classifiers.iter().position(|c| *c == s.key.classifier).expect("collected above");
            row[j] = Some(s);
        }
        let cells = rows.iter().map(|r| cells.remove(r).expect("row was inserted")).collect();
        Ok(ReportTable { rows, classifiers, cells })
    }

    /// Mean Macro F1 per cell; `None` without successful runs.
    pub fn means(&self) -> Vec<Vec<Option<f64>>> {
        self.cells.iter().map(|row| row.iter().map(|c| c.as_ref().and_then(|s| s.mean)).collect()).collect()
    }

    pub fn row_averages(&self) -> Vec<Option<f64>> {
        self.means().iter().map(|row| mean(row.iter().flatten().copied())).collect()
    }

    pub fn classifier_averages(&self) -> Vec<Option<f64>> {
        let m = self.means();
        (0..self.classifiers.len()).map(|j| mean(m.iter().filter_map(|row| row[j]))).collect()
    }

    pub fn average_ranks(&self) -> Vec<Option<f64>> {
        average_ranks(&self.means())
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Csv => self.csv(),
            ReportFormat::Markdown => self.markdown(),
        }
    }

    fn csv(&self) -> String {
        let quote = |s: &str| {
            if s.contains([',', '"', '\n']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.to_string()
            }
        };
        let num = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let names: Vec<&str> = self.classifiers.iter().map(|c| c.name()).collect();
        let mut out = format!("row,{},average\n", names.join(","));
        let means = self.means();
        for ((label, row), avg) in self.rows.iter().zip(&means).zip(self.row_averages()) {
            let cells: Vec<String> = row.iter().map(|v| num(*v)).collect();
            writeln!(out, "{},{},{}", quote(label), cells.join(","), num(avg)).unwrap();
        }
        for (label, values) in [("average", self.classifier_averages()), ("average rank", self.average_ranks())] {
            let cells: Vec<String> = values.iter().map(|v| num(*v)).collect();
            writeln!(out, "{label},{},", cells.join(",")).unwrap();
        }
        out.push('\n');
        let mut header = String::from("row");
        for n in &names {
            write!(header, ",{n} std,{n} min,{n} max").unwrap();
        }
        writeln!(out, "{header}").unwrap();
        for (label, row) in self.rows.iter().zip(&self.cells) {
            let mut line = quote(label);
            for c in row {
                let s = c.as_ref();
                for v in [s.and_then(|s| s.std), s.and_then(|s| s.min), s.and_then(|s| s.max)] {
                    write!(line, ",{}", num(v)).unwrap();
                }
            }
            writeln!(out, "{line}").unwrap();
        }
        out
    }

    fn markdown(&self) -> String {
        let names: Vec<&str> = self.classifiers.iter().map(|c| c.name()).collect();
        let mut out = format!("| | {} | Average |\n", names.join(" | "));
        writeln!(out, "|---|{}---:|", "---:|".repeat(names.len())).unwrap();
        let cell = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
        for ((label, row), avg) in self.rows.iter().zip(self.means()).zip(self.row_averages()) {
            writeln!(out, "| {label} | {} | {} |", highlighted(&row, true, cell).join(" | "), cell(avg)).unwrap();
        }
        let avgs = self.classifier_averages();
        writeln!(out, "| Average | {} | |", highlighted(&avgs, true, cell).join(" | ")).unwrap();
        let ranks = self.average_ranks();
        writeln!(out, "| Avg. rank | {} | |", highlighted(&ranks, false, cell).join(" | ")).unwrap();

        writeln!(out, "\nVariability over runs: std (min to max), ok runs / total.\n").unwrap();
        writeln!(out, "| | {} |", names.join(" | ")).unwrap();
        writeln!(out, "|---|{}", "---|".repeat(names.len())).unwrap();
        for (label, row) in self.rows.iter().zip(&self.cells) {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Some(s) => {
                        let total = s.n_ok + s.n_timeout + s.n_error;
                        match (s.std, s.min, s.max) {
                            (Some(sd), Some(lo), Some(hi)) => {
                                format!("{sd:.3} ({lo:.3} to {hi:.3}), {}/{total}", s.n_ok)
                            }
                            _ => format!("{}/{total}", s.n_ok),
                        }
                    }
                    None => "-".to_string(),
                })
                .collect();
            writeln!(out, "| {label} | {} |", cells.join(" | ")).unwrap();
        }
        out
    }
}

/// Formats `values`, bolding the best and underlining the second best
/// (largest when `high` is set, smallest otherwise). Ties share a mark.
fn highlighted(values: &[Option<f64>], high: bool, fmt: impl Fn(Option<f64>) -> String) -> Vec<String> {
    let mut distinct: Vec<f64> = values.iter().flatten().copied().collect();
    distinct.sort_by(|a, b| if high { b.total_cmp(a) } else { a.total_cmp(b) });
    distinct.dedup();
    values
        .iter()
        .map(|v| match v {
            Some(x) if distinct.first() == Some(x) => format!("**{}**", fmt(*v)),
            Some(x) if distinct.get(1) == Some(x) => format!("<u>{}</u>", fmt(*v)),
            _ => fmt(*v),
        })
        .collect()
}

pub fn report(records: &[RunRecord], format: ReportFormat) -> Result<String> {
    Ok(ReportTable::from_records(records)?.render(format))
}

/// Reads results (a file, directory or wildcard) and renders the table.
pub fn report_path(path: impl AsRef<Path>, format: ReportFormat) -> Result<String> {
    report(&read_results(path)?, format)
}
