//! Tabular output for solutions, checks and verification verdicts.
//!
//! Two formats: CSV and JSON lines. Floating-point fields use the shortest
//! round-trip decimal representation, so re-parsing a report reproduces the
//! in-memory numbers bit for bit. Files are written atomically (temp file
//! plus rename), never appended.

use std::fmt::Write as _;
use std::io;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    JsonLines,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json-lines" | "jsonl" => Ok(OutputFormat::JsonLines),
            other => Err(format!("unknown format `{other}` (use csv or json-lines)")),
        }
    }
}

impl OutputFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::JsonLines => "jsonl",
        }
    }
}

/// One solved grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub cell: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub invest: Vec<f64>,
    pub weights: Vec<f64>,
    pub kernel: f64,
    pub consumption: f64,
    pub certificate: f64,
}

/// Scalar outcome of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub utility: String,
    pub horizon: f64,
    pub initial_wealth: f64,
    pub metric_exponent: f64,
    pub cells: usize,
    pub kernel_min: f64,
    pub kernel_max: f64,
    pub max_certificate: f64,
    pub global_value: f64,
    pub value_function: f64,
}

/// Per-segment assumption-check outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckRow {
    pub segment: usize,
    pub kappa: f64,
    pub jump_free: bool,
    pub kappa_nd: f64,
    pub kappa_bound: f64,
    pub sharpe_bound_sq: f64,
    pub sharpe_worst_sq: f64,
    pub sharpe_worst_at: String,
    pub pass: bool,
}

/// One verification verdict (ODE cross-check, HJB containment, martingale
/// z-score, saddle perturbation, ...).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerdictRow {
    pub check: String,
    pub pass: bool,
    pub detail: String,
}

/// Shortest round-trip decimal for an f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn join_vec(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";")
}

fn parse_vec(s: &str) -> Result<Vec<f64>, String> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|t| t.parse::<f64>().map_err(|e| e.to_string()))
        .collect()
}

pub fn render_cell_rows(rows: &[CellRow], format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => {
            let mut out =
                String::from("cell,t_start,t_end,invest,weights,kernel,consumption,certificate\n");
            for r in rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    r.cell,
                    fmt_f64(r.t_start),
                    fmt_f64(r.t_end),
                    join_vec(&r.invest),
                    join_vec(&r.weights),
                    fmt_f64(r.kernel),
                    fmt_f64(r.consumption),
                    fmt_f64(r.certificate),
                );
            }
            out
        }
        OutputFormat::JsonLines => json_lines(rows),
    }
}

pub fn parse_cell_rows(text: &str, format: OutputFormat) -> Result<Vec<CellRow>, String> {
    match format {
        OutputFormat::Csv => {
            let mut rows = Vec::new();
            for (i, line) in text.lines().enumerate().skip(1) {
                if line.is_empty() {
                    continue;
                }
                let fields: Vec<&str> = line.split(',').collect();
                if fields.len() != 8 {
                    return Err(format!("line {}: expected 8 fields, got {}", i + 1, fields.len()));
                }
                rows.push(CellRow {
                    cell: fields[0].parse().map_err(|e| format!("line {}: {e}", i + 1))?,
                    t_start: fields[1].parse().map_err(|e| format!("line {}: {e}", i + 1))?,
                    t_end: fields[2].parse().map_err(|e| format!("line {}: {e}", i + 1))?,
                    invest: parse_vec(fields[3]).map_err(|e| format!("line {}: {e}", i + 1))?,
                    weights: parse_vec(fields[4]).map_err(|e| format!("line {}: {e}", i + 1))?,
                    kernel: fields[5].parse().map_err(|e| format!("line {}: {e}", i + 1))?,
                    consumption: fields[6].parse().map_err(|e| format!("line {}: {e}", i + 1))?,
                    certificate: fields[7].parse().map_err(|e| format!("line {}: {e}", i + 1))?,
                });
            }
            Ok(rows)
        }
        OutputFormat::JsonLines => parse_json_lines(text),
    }
}

pub fn render_summary(record: &SummaryRecord, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => {
            let mut out = String::from(
                "utility,horizon,initial_wealth,metric_exponent,cells,kernel_min,kernel_max,max_certificate,global_value,value_function\n",
            );
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                record.utility,
                fmt_f64(record.horizon),
                fmt_f64(record.initial_wealth),
                fmt_f64(record.metric_exponent),
                record.cells,
                fmt_f64(record.kernel_min),
                fmt_f64(record.kernel_max),
                fmt_f64(record.max_certificate),
                fmt_f64(record.global_value),
                fmt_f64(record.value_function),
            );
            out
        }
        OutputFormat::JsonLines => json_lines(std::slice::from_ref(record)),
    }
}

pub fn parse_summary(text: &str, format: OutputFormat) -> Result<SummaryRecord, String> {
    match format {
        OutputFormat::Csv => {
            let line = text.lines().nth(1).ok_or("missing summary row")?;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 10 {
                return Err(format!("expected 10 fields, got {}", fields.len()));
            }
            let get = |i: usize| -> Result<f64, String> {
                fields[i].parse::<f64>().map_err(|e| e.to_string())
            };
            Ok(SummaryRecord {
                utility: fields[0].to_string(),
                horizon: get(1)?,
                initial_wealth: get(2)?,
                metric_exponent: get(3)?,
                cells: fields[4].parse().map_err(|e: std::num::ParseIntError| e.to_string())?,
                kernel_min: get(5)?,
                kernel_max: get(6)?,
                max_certificate: get(7)?,
                global_value: get(8)?,
                value_function: get(9)?,
            })
        }
        OutputFormat::JsonLines => {
            let rows: Vec<SummaryRecord> = parse_json_lines(text)?;
            rows.into_iter().next().ok_or_else(|| "missing summary row".to_string())
        }
    }
}

pub fn render_check_rows(rows: &[CheckRow], format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => {
            let mut out = String::from(
                "segment,kappa,jump_free,kappa_nd,kappa_bound,sharpe_bound_sq,sharpe_worst_sq,sharpe_worst_at,pass\n",
            );
            for r in rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    r.segment,
                    fmt_f64(r.kappa),
                    r.jump_free,
                    fmt_f64(r.kappa_nd),
                    fmt_f64(r.kappa_bound),
                    fmt_f64(r.sharpe_bound_sq),
                    fmt_f64(r.sharpe_worst_sq),
                    r.sharpe_worst_at.replace(',', ";"),
                    r.pass,
                );
            }
            out
        }
        OutputFormat::JsonLines => json_lines(rows),
    }
}

pub fn render_verdicts(rows: &[VerdictRow], format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => {
            let mut out = String::from("check,pass,detail\n");
            for r in rows {
                let _ = writeln!(out, "{},{},{}", r.check, r.pass, r.detail.replace(',', ";"));
            }
            out
        }
        OutputFormat::JsonLines => json_lines(rows),
    }
}

fn json_lines<T: Serialize>(rows: &[T]) -> String {
    let mut out = String::new();
    for r in rows {
        let _ = writeln!(out, "{}", serde_json::to_string(r).expect("serializable row"));
    }
    out
}

fn parse_json_lines<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, String> {
    text.lines()
        .filter(|l| !l.is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| e.to_string()))
        .collect()
}

/// Writes `content` to `path` atomically: a sibling temp file is written and
/// fsynced, then renamed over the target, so interrupted runs never leave a
/// partial table.
pub fn write_atomic(path: &Path, content: &str) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        use std::io::Write;
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(content.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_rows() -> Vec<CellRow> {
        vec![
            CellRow {
                cell: 0,
                t_start: 0.0,
                t_end: 0.1,
                invest: vec![1.25],
                weights: vec![1.0, 0.0],
                kernel: 0.03125,
                consumption: 0.5113534750325727,
                certificate: 1.1e-16,
            },
            CellRow {
                cell: 1,
                t_start: 0.1,
                t_end: 0.2,
                invest: vec![0.1 + 0.2], // deliberately non-representable nicely
                weights: vec![0.3333333333333333, 0.6666666666666666],
                kernel: -0.005,
                consumption: 1.0,
                certificate: 0.0,
            },
        ]
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let rows = sample_rows();
        let text = render_cell_rows(&rows, OutputFormat::Csv);
        let back = parse_cell_rows(&text, OutputFormat::Csv).unwrap();
        assert_eq!(rows, back);
        for (a, b) in rows.iter().zip(back.iter()) {
            assert_eq!(a.invest[0].to_bits(), b.invest[0].to_bits());
        }
    }

    #[test]
    fn jsonl_round_trip_is_lossless() {
        let rows = sample_rows();
        let text = render_cell_rows(&rows, OutputFormat::JsonLines);
        let back = parse_cell_rows(&text, OutputFormat::JsonLines).unwrap();
        assert_eq!(rows, back);
    }

    #[test]
    fn summary_round_trip() {
        let record = SummaryRecord {
            utility: "crra-power".into(),
            horizon: 1.0,
            initial_wealth: 1.0,
            metric_exponent: 2.0,
            cells: 1000,
            kernel_min: 0.015625,
            kernel_max: 0.015625,
            max_certificate: 3.0e-12,
            global_value: -2.824349517015278,
            value_function: -3.824349517015278,
        };
        for fmt in [OutputFormat::Csv, OutputFormat::JsonLines] {
            let text = render_summary(&record, fmt);
            let back = parse_summary(&text, fmt).unwrap();
            assert_eq!(record, back);
        }
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = std::env::temp_dir().join(format!("report-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cells.csv");
        write_atomic(&path, "first\n").unwrap();
        write_atomic(&path, "second\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second\n");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
