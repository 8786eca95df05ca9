//! CSV ingestion with a typed header line.
//!
//! The first line declares every column as `name:type` where `type` is
//! `num`, `cat` or `class`. `cat:N` / `class:N` fix the arity, in which case
//! cells must be integer indices below `N`. Without a fixed arity, integer
//! cells are used as indices directly and any other tokens are indexed in
//! sorted order. A class cell of `?` marks the row unlabeled; `?` in a `num`
//! column is a missing value.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use super::{Dataset, FeatureKind};
use crate::{Error, Result};

pub const MISSING: &str = "?";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ColumnType {
    Num,
    Cat(Option<usize>),
    Class(Option<usize>),
}

struct Column {
    name: String,
    ty: ColumnType,
}

fn parse_header(line: &[String]) -> Result<Vec<Column>> {
    let mut cols = Vec::with_capacity(line.len());
    for cell in line {
        let mut parts = cell.trim().split(':');
        let name = parts.next().unwrap_or_default().to_string();
        let ty = parts
            .next()
            .ok_or_else(|| Error::Header(format!("column `{cell}` has no type")))?;
        let arity = parts
            .next()
            .map(|a| {
                a.parse::<usize>()
                    .map_err(|_| Error::Header(format!("bad arity in `{cell}`")))
            })
            .transpose()?;
        if parts.next().is_some() {
            return Err(Error::Header(format!("malformed column `{cell}`")));
        }
        if matches!(arity, Some(a) if a < 2) {
            return Err(Error::Header(format!("arity must be >= 2 in `{cell}`")));
        }
        let ty = match (ty, arity) {
            ("num", None) => ColumnType::Num,
            ("cat", a) => ColumnType::Cat(a),
            ("class", a) => ColumnType::Class(a),
            _ => return Err(Error::Header(format!("unknown column type in `{cell}`"))),
        };
        if name.is_empty() {
            return Err(Error::Header("empty column name".into()));
        }
        cols.push(Column { name, ty });
    }
    let n_class = cols.iter().filter(|c| matches!(c.ty, ColumnType::Class(_))).count();
    if n_class > 1 {
        return Err(Error::Header("more than one class column".into()));
    }
    Ok(cols)
}

/// Maps raw tokens of one categorical column to indices.
fn encode_tokens(
    tokens: &[(usize, &str)],
    fixed: Option<usize>,
    allow_missing: bool,
) -> Result<(Vec<Option<usize>>, usize)> {
    let present = tokens.iter().filter(|(_, t)| !(allow_missing && *t == MISSING));
    if let Some(arity) = fixed {
        let mut out = Vec::with_capacity(tokens.len());
        for &(line, t) in tokens {
            if allow_missing && t == MISSING {
                out.push(None);
                continue;
            }
            match t.parse::<usize>() {
                Ok(v) if v < arity => out.push(Some(v)),
                _ => {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown category `{t}` (arity {arity})"),
                    })
                }
            }
        }
        return Ok((out, arity));
    }
    let all_int = present.clone().all(|(_, t)| t.parse::<usize>().is_ok());
    if all_int {
        let mut max = 0usize;
        let out = tokens
            .iter()
            .map(|&(_, t)| {
                if allow_missing && t == MISSING {
                    None
                } else {
                    let v: usize = t.parse().unwrap();
                    max = max.max(v);
                    Some(v)
                }
            })
            .collect();
        return Ok((out, (max + 1).max(2)));
    }
    let vocab: Vec<&str> = present.map(|(_, t)| *t).collect::<BTreeSet<_>>().into_iter().collect();
    let out = tokens
        .iter()
        .map(|&(_, t)| {
            if allow_missing && t == MISSING {
                None
            } else {
                Some(vocab.binary_search(&t).unwrap())
            }
        })
        .collect();
    Ok((out, vocab.len().max(2)))
}

/// Parses CSV text in the typed-header format.
pub fn parse_table(text: &str, name: &str) -> Result<Dataset> {
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(::csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        records.push((line, rec.iter().map(str::to_string).collect::<Vec<_>>()));
    }
    let (_, header) = records.first().ok_or_else(|| Error::Header("empty file".into()))?;
    let cols = parse_header(header)?;
    let body = &records[1..];
    for (line, rec) in body {
        if rec.len() != cols.len() {
            return Err(Error::RowWidth {
                line: *line,
                expected: cols.len(),
                found: rec.len(),
            });
        }
    }

    let n = body.len();
    let mut meta = Vec::new();
    let mut names = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut n_classes = 2;
    let mut class_name = "class".to_string();

    for (c, col) in cols.iter().enumerate() {
        let tokens: Vec<(usize, &str)> = body.iter().map(|(l, r)| (*l, r[c].as_str())).collect();
        match col.ty {
            ColumnType::Num => {
                let mut values = Vec::with_capacity(n);
                for &(line, t) in &tokens {
                    let v = if t == MISSING {
                        f64::NAN
                    } else {
                        t.parse::<f64>().map_err(|_| Error::Parse {
                            line,
                            message: format!("`{t}` is not a number"),
                        })?
                    };
                    values.push(v);
                }
                meta.push(FeatureKind::Continuous);
                names.push(col.name.clone());
                columns.push(values);
            }
            ColumnType::Cat(fixed) => {
                let (idx, arity) = encode_tokens(&tokens, fixed, false)?;
                meta.push(FeatureKind::Nominal { arity });
                names.push(col.name.clone());
                columns.push(idx.into_iter().map(|v| v.unwrap() as f64).collect());
            }
            ColumnType::Class(fixed) => {
                let (idx, k) = encode_tokens(&tokens, fixed, true)?;
                labels = idx;
                n_classes = k;
                class_name = col.name.clone();
            }
        }
    }

    let width = meta.len();
    let mut values = Vec::with_capacity(n * width);
    for i in 0..n {
        for col in &columns {
            values.push(col[i]);
        }
    }
    Dataset::from_flat(name, meta, values, labels, n_classes)?.with_feature_names(names, class_name)
}

/// Reads a typed-header CSV file. The dataset is named after the file stem.
pub fn load_table(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_table(&text, &name)
}

/// Renders `data` in the typed-header format. Nominal arities and the class
/// count are written explicitly so a reload reproduces the schema.
pub fn write_table(data: &Dataset) -> String {
    let mut out = String::new();
    let mut header: Vec<String> = data
        .feature_names()
        .iter()
        .zip(data.meta())
        .map(|(name, kind)| match kind {
            FeatureKind::Continuous => format!("{name}:num"),
            FeatureKind::Nominal { arity } if *arity >= 2 => format!("{name}:cat:{arity}"),
            FeatureKind::Nominal { .. } => format!("{name}:cat"),
        })
        .collect();
    header.push(format!("{}:class:{}", data.class_name(), data.n_classes()));
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..data.n_rows() {
        for (f, v) in data.row(i).iter().enumerate() {
            if v.is_nan() {
                out.push_str(MISSING);
            } else if data.meta()[f].is_continuous() {
                let _ = write!(out, "{v:?}");
            } else {
                let _ = write!(out, "{}", *v as usize);
            }
            out.push(',');
        }
        match data.label(i) {
            Some(y) => {
                let _ = write!(out, "{y}");
            }
            None => out.push_str(MISSING),
        }
        out.push('\n');
    }
    out
}

pub fn save_table(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_table(data)).map_err(|e| Error::io(path, e))
}
