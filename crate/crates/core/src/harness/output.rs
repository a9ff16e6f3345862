//! CSV and line-delimited JSON output.
//!
//! Sweep CSV columns: the swept parameter paths in alphabetical order, then
//! `seed`, `gamma_hat`, `delta_hat`, `maturity_hat`, `delay_hat`, `q_hat`,
//! `final_regret`, `floor_value`. Run CSV columns: `seed`, `round`,
//! `cumulative_regret`, one row per checkpoint. Floats are written in the
//! shortest form that parses back to the identical value; undefined values
//! are empty fields (CSV) or `null` (JSON).

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde_json::{Map, Value};

use super::sim::RunResult;
use super::sweep::{SweepRow, SweepTable};
use crate::error::{Error, Result};

pub const SWEEP_COLUMNS: [&str; 8] = [
    "seed",
    "gamma_hat",
    "delta_hat",
    "maturity_hat",
    "delay_hat",
    "q_hat",
    "final_regret",
    "floor_value",
];

pub const RUN_COLUMNS: [&str; 3] = ["seed", "round", "cumulative_regret"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::config(format!("unknown format `{s}`; expected csv or json"))),
        }
    }
}

/// Something `emit_results` can write.
#[derive(Debug, Clone, Copy)]
pub enum Table<'a> {
    Sweep(&'a SweepTable),
    Runs(&'a [RunResult]),
}

fn float(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn sweep_fields(row: &SweepRow, paths: &[String]) -> Vec<String> {
    let mut out: Vec<String> = paths
        .iter()
        .map(|p| row.params.get(p).map(cell).unwrap_or_default())
        .collect();
    out.extend([
        row.seed.to_string(),
        float(row.gamma_hat),
        float(row.delta_hat),
        opt(row.maturity_hat),
        float(row.delay_hat),
        float(row.q_hat),
        float(row.final_regret),
        opt(row.floor_value),
    ]);
    out
}

fn json_number(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

fn sweep_record(row: &SweepRow, paths: &[String]) -> Value {
    let mut m = Map::new();
    for p in paths {
        m.insert(p.clone(), row.params.get(p).cloned().unwrap_or(Value::Null));
    }
    m.insert("seed".into(), Value::from(row.seed));
    m.insert("gamma_hat".into(), json_number(row.gamma_hat));
    m.insert("delta_hat".into(), json_number(row.delta_hat));
    m.insert("maturity_hat".into(), row.maturity_hat.map_or(Value::Null, json_number));
    m.insert("delay_hat".into(), json_number(row.delay_hat));
    m.insert("q_hat".into(), json_number(row.q_hat));
    m.insert("final_regret".into(), json_number(row.final_regret));
    m.insert("floor_value".into(), row.floor_value.map_or(Value::Null, json_number));
    Value::Object(m)
}

/// Render `table` fully in memory.
pub fn render(table: Table<'_>, format: Format) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    match (table, format) {
        (Table::Sweep(t), Format::Csv) => {
            let mut w = csv::Writer::from_writer(&mut buf);
            let header: Vec<&str> = t.param_paths.iter().map(String::as_str).chain(SWEEP_COLUMNS).collect();
            w.write_record(&header).map_err(csv_err)?;
            for row in &t.rows {
                w.write_record(sweep_fields(row, &t.param_paths)).map_err(csv_err)?;
            }
            w.flush()?;
        }
        (Table::Sweep(t), Format::Json) => {
            for row in &t.rows {
                serde_json::to_writer(&mut buf, &sweep_record(row, &t.param_paths))?;
                buf.push(b'\n');
            }
        }
        (Table::Runs(runs), Format::Csv) => {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(RUN_COLUMNS).map_err(csv_err)?;
            for run in runs {
                for c in &run.regret_trajectory {
                    w.write_record([run.seed.to_string(), c.round.to_string(), float(c.cumulative_regret)])
                        .map_err(csv_err)?;
                }
            }
            w.flush()?;
        }
        (Table::Runs(runs), Format::Json) => {
            for run in runs {
                serde_json::to_writer(&mut buf, run)?;
                buf.push(b'\n');
            }
        }
    }
    Ok(buf)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::config(format!("csv: {other:?}")),
    }
}

/// Write `table` to `destination`, or standard output when `None`. The
/// output is rendered before the destination is opened, so a failure never
/// leaves a partial file.
pub fn emit_results(table: Table<'_>, format: Format, destination: Option<&Path>) -> Result<()> {
    let bytes = render(table, format)?;
    match destination {
        Some(path) => std::fs::write(path, bytes)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(&bytes)?;
            out.flush()?;
        }
    }
    Ok(())
}

/// Parse a sweep CSV produced by `render` back into a table.
pub fn parse_sweep_csv(text: &str) -> Result<SweepTable> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let np = header
        .len()
        .checked_sub(SWEEP_COLUMNS.len())
        .filter(|&n| header[n..] == SWEEP_COLUMNS)
        .ok_or_else(|| Error::config("not a sweep table"))?;
    let param_paths = header[..np].to_vec();
    let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::config(format!("bad number `{s}`"))) };
    let opt_num = |s: &str| -> Result<Option<f64>> { if s.is_empty() { Ok(None) } else { num(s).map(Some) } };
    let mut rows = Vec::new();
    let mut last: Option<Vec<String>> = None;
    let mut grid_index = 0;
    for record in r.records() {
        let record = record.map_err(csv_err)?;
        let f: Vec<&str> = record.iter().collect();
        let params: Vec<String> = f[..np].iter().map(|s| s.to_string()).collect();
        if let Some(prev) = &last {
            if *prev != params {
                grid_index += 1;
            }
        }
        last = Some(params);
        rows.push(SweepRow {
            grid_index,
            params: param_paths
                .iter()
                .zip(&f[..np])
                .map(|(p, v)| (p.clone(), serde_json::from_str(v).unwrap_or_else(|_| Value::from(*v))))
                .collect(),
            seed: f[np].parse().map_err(|_| Error::config("bad seed"))?,
            gamma_hat: num(f[np + 1])?,
            delta_hat: num(f[np + 2])?,
            maturity_hat: opt_num(f[np + 3])?,
            delay_hat: num(f[np + 4])?,
            q_hat: num(f[np + 5])?,
            final_regret: num(f[np + 6])?,
            floor_value: opt_num(f[np + 7])?,
        });
    }
    Ok(SweepTable { param_paths, rows })
}
