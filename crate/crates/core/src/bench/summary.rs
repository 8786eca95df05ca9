use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::split_label;
use super::run::ResultRecord;
use crate::eval::{wtl_tally, Wtl};
use crate::{Error, Result};

/// Quantile with linear interpolation between order statistics at
/// `h = (n - 1) q` (the inclusive method). `sorted` must be ascending.
pub fn quantile_inclusive(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub technique: String,
    pub labeled_fraction: f64,
    pub n: usize,
    /// Failed runs left out of the statistics.
    pub n_failed: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Values below `q1 - 1.5 IQR` or above `q3 + 1.5 IQR`, ascending.
    pub outliers: Vec<f64>,
}

impl BoxStats {
    pub fn from_values(technique: &str, labeled_fraction: f64, values: &[f64]) -> Self {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
        v.sort_by(f64::total_cmp);
        let (q1, q3) = (quantile_inclusive(&v, 0.25), quantile_inclusive(&v, 0.75));
        let iqr = q3 - q1;
        let outliers = v
            .iter()
            .copied()
            .filter(|&x| x < q1 - 1.5 * iqr || x > q3 + 1.5 * iqr)
            .collect();
        BoxStats {
            technique: technique.to_string(),
            labeled_fraction,
            n: v.len(),
            n_failed: values.len() - v.len(),
            min: v.first().copied().unwrap_or(f64::NAN),
            q1,
            median: quantile_inclusive(&v, 0.5),
            q3,
            max: v.last().copied().unwrap_or(f64::NAN),
            outliers,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub dataset: String,
    pub labeled_fraction: f64,
    /// Mean AUC per column; `None` when the cell has no finite runs.
    pub cells: Vec<Option<f64>>,
}

/// Mean AUC of one technique: rows are dataset × fraction, columns are the
/// hyperparameter values it was run with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub technique: String,
    pub columns: Vec<String>,
    pub rows: Vec<GridRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WtlTable {
    pub baseline: String,
    /// Per labeled fraction, the tally of every technique.
    pub by_fraction: Vec<(f64, BTreeMap<String, Wtl>)>,
    pub total: BTreeMap<String, Wtl>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub grids: Vec<Grid>,
    pub boxplots: Vec<BoxStats>,
    pub wtl: Option<WtlTable>,
}

#[derive(Clone, Copy)]
struct Fraction(f64);

impl PartialEq for Fraction {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for Fraction {}

impl PartialOrd for Fraction {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Fraction {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

type Cells<'a> = BTreeMap<(&'a str, Fraction), Vec<(usize, f64)>>;

/// Orders hyperparameter labels numerically by value where possible.
fn column_order(a: &str, b: &str) -> std::cmp::Ordering {
    let num = |s: &str| s.split_once('=').and_then(|(_, v)| v.parse::<f64>().ok());
    match (num(a), num(b)) {
        (Some(x), Some(y)) => x.total_cmp(&y).then_with(|| a.cmp(b)),
        _ => a.cmp(b),
    }
}

fn mean_finite(values: &[f64]) -> Option<f64> {
    let v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn sorted_runs(mut runs: Vec<(usize, f64)>) -> Vec<f64> {
    runs.sort_by_key(|r| r.0);
    runs.into_iter().map(|r| r.1).collect()
}

/// Mean grids, box-plot quantiles and the W-T-L table against `supervised`
/// at α = 0.05.
pub fn summarize(records: &[ResultRecord]) -> Result<Summary> {
    summarize_against(records, "supervised", 0.05)
}

pub fn summarize_against(records: &[ResultRecord], baseline: &str, alpha: f64) -> Result<Summary> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to summarize".into()));
    }
    let mut seen = BTreeSet::new();
    for r in records {
        if !seen.insert((&r.dataset, &r.technique, Fraction(r.labeled_fraction), r.run)) {
            return Err(Error::InvalidArgument(format!(
                "duplicate record for {} / {} / {} / run {}",
                r.dataset, r.technique, r.labeled_fraction, r.run
            )));
        }
    }

    // technique label -> (dataset, fraction) -> runs
    let mut cells: BTreeMap<&str, Cells> = BTreeMap::new();
    for r in records {
        cells
            .entry(&r.technique)
            .or_default()
            .entry((&r.dataset, Fraction(r.labeled_fraction)))
            .or_default()
            .push((r.run, r.auc));
    }

    let mut by_name: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for label in cells.keys() {
        let (name, _) = split_label(label);
        by_name.entry(name).or_default().insert(label);
    }
    let mut grids = Vec::new();
    for (name, labels) in &by_name {
        let mut labels: Vec<&str> = labels.iter().copied().collect();
        labels.sort_by(|a, b| column_order(split_label(a).1.unwrap_or(""), split_label(b).1.unwrap_or("")));
        let keys: BTreeSet<(&str, Fraction)> = labels.iter().flat_map(|l| cells[l].keys().copied()).collect();
        let rows = keys
            .into_iter()
            .map(|(dataset, f)| GridRow {
                dataset: dataset.to_string(),
                labeled_fraction: f.0,
                cells: labels
                    .iter()
                    .map(|l| {
                        cells[l]
                            .get(&(dataset, f))
                            .and_then(|runs| mean_finite(&sorted_runs(runs.clone())))
                    })
                    .collect(),
            })
            .collect();
        grids.push(Grid {
            technique: name.to_string(),
            columns: labels
                .iter()
                .map(|l| split_label(l).1.unwrap_or(name).to_string())
                .collect(),
            rows,
        });
    }

    let mut boxplots = Vec::new();
    for (label, per_cell) in &cells {
        let mut by_fraction: BTreeMap<Fraction, Vec<f64>> = BTreeMap::new();
        for ((_, f), runs) in per_cell {
            by_fraction.entry(*f).or_default().extend(runs.iter().map(|r| r.1));
        }
        for (f, values) in by_fraction {
            boxplots.push(BoxStats::from_values(label, f.0, &values));
        }
    }

    let wtl = if cells.contains_key(baseline) {
        let mut by_fraction: BTreeMap<Fraction, BTreeMap<String, BTreeMap<String, Vec<f64>>>> = BTreeMap::new();
        for (label, per_cell) in &cells {
            for ((dataset, f), runs) in per_cell {
                by_fraction
                    .entry(*f)
                    .or_default()
                    .entry(dataset.to_string())
                    .or_default()
                    .insert(label.to_string(), sorted_runs(runs.clone()));
            }
        }
        let mut total: BTreeMap<String, Wtl> = BTreeMap::new();
        let mut rows = Vec::new();
        for (f, fraction_cells) in by_fraction {
            let tally = wtl_tally(&fraction_cells, baseline, alpha)?;
            for (t, w) in &tally {
                let e = total.entry(t.clone()).or_default();
                e.win += w.win;
                e.tie += w.tie;
                e.loss += w.loss;
            }
            rows.push((f.0, tally));
        }
        Some(WtlTable {
            baseline: baseline.to_string(),
            by_fraction: rows,
            total,
        })
    } else {
        None
    };

    Ok(Summary { grids, boxplots, wtl })
}

fn fmt_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

fn fmt_pct(f: f64) -> String {
    format!("{}", (f * 1e4).round() / 1e2)
}

fn csv_line(fields: &[String]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(fields).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

impl Summary {
    /// Grid tables (one per technique, blank-line separated) followed by the
    /// box-plot table.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for g in &self.grids {
            let mut header = vec!["technique".to_string(), "dataset".into(), "labeled_pct".into()];
            header.extend(g.columns.iter().cloned());
            out.push_str(&csv_line(&header));
            for r in &g.rows {
                let mut line = vec![g.technique.clone(), r.dataset.clone(), fmt_pct(r.labeled_fraction)];
                line.extend(r.cells.iter().map(|&c| fmt_cell(c)));
                out.push_str(&csv_line(&line));
            }
            out.push('\n');
        }
        let header = [
            "technique",
            "labeled_pct",
            "n",
            "failed",
            "min",
            "q1",
            "median",
            "q3",
            "max",
            "outliers",
        ];
        out.push_str(&csv_line(&header.map(String::from)));
        for b in &self.boxplots {
            let outliers: Vec<String> = b.outliers.iter().map(|o| format!("{o:.4}")).collect();
            out.push_str(&csv_line(&[
                b.technique.clone(),
                fmt_pct(b.labeled_fraction),
                b.n.to_string(),
                b.n_failed.to_string(),
                fmt_cell(Some(b.min).filter(|x| !x.is_nan())),
                fmt_cell(Some(b.q1).filter(|x| !x.is_nan())),
                fmt_cell(Some(b.median).filter(|x| !x.is_nan())),
                fmt_cell(Some(b.q3).filter(|x| !x.is_nan())),
                fmt_cell(Some(b.max).filter(|x| !x.is_nan())),
                outliers.join(" "),
            ]));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for g in &self.grids {
            let _ = writeln!(out, "{}", g.technique);
            let mut table = vec![{
                let mut h = vec!["dataset".to_string(), "labeled%".into()];
                h.extend(g.columns.iter().cloned());
                h
            }];
            for r in &g.rows {
                let mut line = vec![r.dataset.clone(), fmt_pct(r.labeled_fraction)];
                line.extend(r.cells.iter().map(|&c| c.map_or("-".into(), |x| format!("{x:.4}"))));
                table.push(line);
            }
            out.push_str(&aligned(&table));
            out.push('\n');
        }
        let _ = writeln!(out, "box plots");
        let mut table = vec![[
            "technique",
            "labeled%",
            "n",
            "failed",
            "min",
            "q1",
            "median",
            "q3",
            "max",
            "outliers",
        ]
        .map(String::from)
        .to_vec()];
        for b in &self.boxplots {
            let f = |x: f64| if x.is_nan() { "-".to_string() } else { format!("{x:.4}") };
            table.push(vec![
                b.technique.clone(),
                fmt_pct(b.labeled_fraction),
                b.n.to_string(),
                b.n_failed.to_string(),
                f(b.min),
                f(b.q1),
                f(b.median),
                f(b.q3),
                f(b.max),
                b.outliers.len().to_string(),
            ]);
        }
        out.push_str(&aligned(&table));
        out
    }
}

impl WtlTable {
    pub fn to_text(&self) -> String {
        let techniques: BTreeSet<&String> = self.total.keys().collect();
        let mut header = vec!["labeled%".to_string()];
        header.extend(techniques.iter().map(|t| t.to_string()));
        let mut table = vec![header];
        for (f, tally) in &self.by_fraction {
            let mut line = vec![fmt_pct(*f)];
            line.extend(
                techniques
                    .iter()
                    .map(|t| tally.get(*t).map_or("-".into(), Wtl::to_string)),
            );
            table.push(line);
        }
        let mut line = vec!["total".to_string()];
        line.extend(techniques.iter().map(|t| self.total[*t].to_string()));
        table.push(line);
        format!("W-T-L against {}\n{}", self.baseline, aligned(&table))
    }

    pub fn to_csv(&self) -> String {
        let mut out = csv_line(&["labeled_pct", "technique", "win", "tie", "loss"].map(String::from));
        let rows = self
            .by_fraction
            .iter()
            .map(|(f, t)| (fmt_pct(*f), t))
            .chain(std::iter::once(("total".to_string(), &self.total)));
        for (f, tally) in rows {
            for (t, w) in tally {
                out.push_str(&csv_line(&[
                    f.clone(),
                    t.clone(),
                    w.win.to_string(),
                    w.tie.to_string(),
                    w.loss.to_string(),
                ]));
            }
        }
        out
    }
}

fn aligned(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c == 0 {
                    format!("{s:<w$}", w = widths[c])
                } else {
                    format!("{s:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(dataset: &str, technique: &str, f: f64, run: usize, auc: f64) -> ResultRecord {
        ResultRecord {
            dataset: dataset.into(),
            technique: technique.into(),
            labeled_fraction: f,
            run,
            seed: 0,
            auc,
            wall_time: 0.0,
            model_meta: BTreeMap::new(),
        }
    }

    #[test]
    fn quartiles_by_hand() {
        // sorted: 1 2 3 4 5 6 7 8 9 30; h = 9q
        let v = [7.0, 1.0, 30.0, 4.0, 2.0, 9.0, 3.0, 6.0, 8.0, 5.0];
        let b = BoxStats::from_values("cc", 0.1, &v);
        assert_eq!((b.min, b.max), (1.0, 30.0));
        assert_eq!(b.q1, 3.25); // 3 + 0.25 * (4 - 3)
        assert_eq!(b.median, 5.5);
        assert_eq!(b.q3, 7.75); // 7 + 0.75 * (8 - 7)
                                // upper fence 7.75 + 1.5 * 4.5 = 14.5
        assert_eq!(b.outliers, vec![30.0]);
    }

    #[test]
    fn single_record_mean() {
        let s = summarize(&[rec("d", "supervised", 0.1, 0, 0.42)]).unwrap();
        assert_eq!(s.grids[0].rows[0].cells, vec![Some(0.42)]);
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn grid_shape_and_failed_runs() {
        let mut r = Vec::new();
        for d in ["a", "b", "c"] {
            for f in [0.1, 0.9] {
                for run in 0..2 {
                    r.push(rec(d, "supervised", f, run, 0.5));
                    r.push(rec(d, "cc:m=2", f, run, 0.6));
                    r.push(rec(d, "cc:m=12", f, run, if run == 0 { f64::NAN } else { 0.7 }));
                    r.push(rec(d, "cc:m=6", f, run, 0.65));
                }
            }
        }
        let s = summarize(&r).unwrap();
        let cc = s.grids.iter().find(|g| g.technique == "cc").unwrap();
        assert_eq!(cc.columns, ["m=2", "m=6", "m=12"]);
        assert_eq!(cc.rows.len(), 6);
        assert_eq!(cc.rows[0].cells, vec![Some(0.6), Some(0.65), Some(0.7)]);
        let wtl = s.wtl.as_ref().unwrap();
        assert_eq!(wtl.by_fraction.len(), 2);
        assert_eq!(wtl.total["cc:m=2"].total(), 6);
        let b = s.boxplots.iter().find(|b| b.technique == "cc:m=12").unwrap();
        assert_eq!((b.n, b.n_failed), (3, 3));
        assert!(s.to_csv().contains("technique,dataset,labeled_pct,m=2,m=6,m=12"));
        assert!(s.to_text().contains("box plots"));
    }

    #[test]
    fn duplicate_keys_rejected() {
        let r = vec![rec("d", "cc:m=6", 0.1, 0, 0.3), rec("d", "cc:m=6", 0.1, 0, 0.4)];
        assert!(summarize(&r).is_err());
    }
}
