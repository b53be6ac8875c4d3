//! Result tables and their TSV / markdown renderings.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub keys: Vec<String>,
    /// Fractions in [0, 1]; rendered as percentages.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub key_columns: Vec<String>,
    pub metric_columns: Vec<String>,
    pub rows: Vec<ResultRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Tsv,
    Markdown,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(ReportFormat::Tsv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::invalid(format!("unknown report format `{other}`"))),
        }
    }
}

fn percent(v: f64) -> String {
    format!("{:.1}", v * 100.0)
}

impl ResultTable {
    pub fn new(key_columns: Vec<String>, metric_columns: Vec<String>) -> Self {
        ResultTable {
            key_columns,
            metric_columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, keys: Vec<String>, values: Vec<f64>) {
        assert_eq!(keys.len(), self.key_columns.len(), "key arity");
        assert_eq!(values.len(), self.metric_columns.len(), "metric arity");
        self.rows.push(ResultRow { keys, values });
    }

    pub fn header(&self) -> Vec<&str> {
        self.key_columns
            .iter()
            .chain(&self.metric_columns)
            .map(String::as_str)
            .collect()
    }

    /// Value of `metric` in the row whose keys equal `keys`.
    pub fn get(&self, keys: &[&str], metric: &str) -> Option<f64> {
        let m = self.metric_columns.iter().position(|c| c == metric)?;
        self.rows
            .iter()
            .find(|r| r.keys.iter().map(String::as_str).eq(keys.iter().copied()))
            .map(|r| r.values[m])
    }

    fn lines(&self, fmt: impl Fn(f64) -> String) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| r.keys.iter().cloned().chain(r.values.iter().map(|&v| fmt(v))).collect())
            .collect()
    }

    /// Percentages with one decimal.
    pub fn to_tsv(&self) -> String {
        self.tsv_with(percent)
    }

    /// Raw fractions at full precision.
    pub fn to_raw_tsv(&self) -> String {
        self.tsv_with(|v| format!("{v}"))
    }

    fn tsv_with(&self, fmt: impl Fn(f64) -> String) -> String {
        let mut out = self.header().join("\t");
        out.push('\n');
        for line in self.lines(fmt) {
            out.push_str(&line.join("\t"));
            out.push('\n');
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "| {} |", self.header().join(" | "));
        let _ = writeln!(out, "|{}", "---|".repeat(self.header().len()));
        for line in self.lines(percent) {
            let _ = writeln!(out, "| {} |", line.join(" | "));
        }
        out
    }

    /// Reads a raw TSV; `num_keys` leading columns are keys.
    pub fn parse_raw_tsv(text: &str, num_keys: usize) -> Result<Self> {
        Self::parse_rows(text.lines().map(|l| l.split('\t').map(str::to_string).collect()), num_keys, 1.0)
    }

    /// Reads back [`ResultTable::to_markdown`]; values return as fractions.
    pub fn parse_markdown(text: &str, num_keys: usize) -> Result<Self> {
        let rows = text
            .lines()
            .filter(|l| l.trim_start().starts_with('|') && !l.contains("---"))
            .map(|l| {
                l.trim()
                    .trim_matches('|')
                    .split('|')
                    .map(|c| c.trim().to_string())
                    .collect::<Vec<_>>()
            });
        Self::parse_rows(rows, num_keys, 100.0)
    }

    fn parse_rows(mut rows: impl Iterator<Item = Vec<String>>, num_keys: usize, scale: f64) -> Result<Self> {
        let header = rows.next().ok_or_else(|| Error::invalid("empty table"))?;
        if header.len() <= num_keys {
            return Err(Error::invalid("table has no metric columns"));
        }
        let mut table = ResultTable::new(header[..num_keys].to_vec(), header[num_keys..].to_vec());
        for (i, cells) in rows.enumerate() {
            if cells.iter().all(|c| c.is_empty()) {
                continue;
            }
            if cells.len() != header.len() {
                return Err(Error::MalformedRecord {
                    line: i + 2,
                    message: format!("expected {} cells, found {}", header.len(), cells.len()),
                });
            }
            let values = cells[num_keys..]
                .iter()
                .map(|c| {
                    c.parse::<f64>().map(|v| v / scale).map_err(|_| Error::MalformedRecord {
                        line: i + 2,
                        message: format!("not a number: `{c}`"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            table.push(cells[..num_keys].to_vec(), values);
        }
        Ok(table)
    }
}

/// Path of the full-precision companion of a report file.
pub fn raw_path(path: &Path) -> PathBuf {
    let mut name = path.file_stem().unwrap_or_default().to_os_string();
    name.push(".raw.tsv");
    path.with_file_name(name)
}

/// Writes the table at `path` in `format` and its raw values next to it;
/// returns the raw file's path.
pub fn emit_report(table: &ResultTable, path: impl AsRef<Path>, format: ReportFormat) -> Result<PathBuf> {
    let path = path.as_ref();
    if table.rows.is_empty() {
        return Err(Error::invalid("refusing to write an empty table"));
    }
    let text = match format {
        ReportFormat::Tsv => table.to_tsv(),
        ReportFormat::Markdown => table.to_markdown(),
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    let raw = raw_path(path);
    fs::write(&raw, table.to_raw_tsv()).map_err(|e| Error::io(&raw, e))?;
    Ok(raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table3() -> ResultTable {
        let mut t = ResultTable::new(vec!["history".into()], vec!["weighted_f1".into(), "hits@1/10".into()]);
        for (h, f, r) in [(1, 0.2421, 0.1702), (2, 0.25, 0.181234), (5, 0.26, 0.2), (10, 0.3333333, 0.19)] {
            t.push(vec![h.to_string()], vec![f, r]);
        }
        t
    }

    #[test]
    fn tsv_shape() {
        let tsv = table3().to_tsv();
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "history\tweighted_f1\thits@1/10");
        assert_eq!(lines[1], "1\t24.2\t17.0");
        assert_eq!(lines[4], "10\t33.3\t19.0");
    }

    #[test]
    fn markdown_roundtrip() {
        let t = table3();
        let back = ResultTable::parse_markdown(&t.to_markdown(), 1).unwrap();
        assert_eq!(back.key_columns, t.key_columns);
        assert_eq!(back.metric_columns, t.metric_columns);
        for (a, b) in t.rows.iter().zip(&back.rows) {
            assert_eq!(a.keys, b.keys);
            for (x, y) in a.values.iter().zip(&b.values) {
                assert_eq!(percent(*x), percent(*y));
            }
        }
        let raw = ResultTable::parse_raw_tsv(&t.to_raw_tsv(), 1).unwrap();
        assert_eq!(raw, t);
    }

    #[test]
    fn emit_writes_both_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("history.md");
        let raw = emit_report(&table3(), &p, ReportFormat::Markdown).unwrap();
        assert_eq!(raw, dir.path().join("history.raw.tsv"));
        let first = fs::read(&p).unwrap();
        emit_report(&table3(), &p, ReportFormat::Markdown).unwrap();
        assert_eq!(first, fs::read(&p).unwrap());
        let empty = ResultTable::new(vec!["k".into()], vec!["v".into()]);
        assert!(emit_report(&empty, &p, ReportFormat::Tsv).is_err());
        assert!(emit_report(&table3(), dir.path().join("missing/x.tsv"), ReportFormat::Tsv).is_err());
    }
}
