use std::io::Write;
use std::path::Path;

use serde_json::Value;

use super::{csv_columns, Format, TrialRecord};
use crate::error::Result;

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        // serde_json prints f64 in shortest round-trip form.
        other => other.to_string(),
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes a header row from [`csv_columns`] and one row per record. Missing
/// results are empty cells; `config` holds the run spec as compact JSON.
pub fn write_csv<W: Write>(experiment: &str, records: &[TrialRecord], out: W) -> Result<()> {
    let cols = csv_columns(experiment)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&cols)?;
    for r in records {
        let mut row = Vec::with_capacity(cols.len());
        for c in &cols {
            row.push(match c.as_str() {
                "kind" => r.kind.as_str().to_string(),
                "trial" => opt(r.trial),
                "stream_id" => opt(r.stream_id),
                "seed" => r.config.master_seed.to_string(),
                "error" => r.error.clone().unwrap_or_default(),
                "wall_time_s" => r.wall_time_s.to_string(),
                "config" => serde_json::to_string(&r.config)?,
                other => r.results.get(other).map(cell).unwrap_or_default(),
            });
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// A JSON array of records.
pub fn write_json<W: Write>(records: &[TrialRecord], mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, records)?;
    writeln!(out)?;
    Ok(())
}

pub fn read_json_records(text: &str) -> Result<Vec<TrialRecord>> {
    Ok(serde_json::from_str(text)?)
}

/// Writes to `path`, or to stdout when `path` is `None`.
pub fn emit(experiment: &str, records: &[TrialRecord], format: Format, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => {
            let f = std::io::BufWriter::new(std::fs::File::create(p)?);
            match format {
                Format::Csv => write_csv(experiment, records, f),
                Format::Json => write_json(records, f),
            }
        }
        None => {
            let out = std::io::stdout().lock();
            match format {
                Format::Csv => write_csv(experiment, records, out),
                Format::Json => write_json(records, out),
            }
        }
    }
}
