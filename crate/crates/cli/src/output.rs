//! CSV rendering with a `#` metadata block.

use crate::config::ExperimentConfig;
use crate::CliError;
use dbmc::CodecId;
use std::io::Write;
use std::path::Path;

/// Columns shared by every sweep and rate table.
pub const SWEEP_HEADER: [&str; 8] = ["axis_value", "codec", "ber_mc", "ci95", "ber_analytic", "rate", "n_bits", "seed"];

/// One `(axis value, codec)` result. `None` fields are written empty.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis_value: f64,
    pub codec: CodecId,
    pub ber_mc: Option<f64>,
    pub ci95: Option<f64>,
    pub ber_analytic: Option<f64>,
    pub rate: Option<f64>,
    pub n_bits: Option<u64>,
    pub seed: u64,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SweepRow {
    pub fn record(&self) -> Vec<String> {
        vec![
            self.axis_value.to_string(),
            self.codec.to_string(),
            opt(self.ber_mc),
            opt(self.ci95),
            opt(self.ber_analytic),
            opt(self.rate),
            opt(self.n_bits),
            self.seed.to_string(),
        ]
    }
}

/// Orders rows by axis value, then by the canonical codec order.
pub fn sort_rows(rows: &mut [SweepRow]) {
    let rank = |c: CodecId| CodecId::ALL.iter().position(|&x| x == c).unwrap_or(usize::MAX);
    rows.sort_by(|a, b| a.axis_value.total_cmp(&b.axis_value).then(rank(a.codec).cmp(&rank(b.codec))));
}

/// A finished table: metadata comments, header and records.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub metadata: Vec<String>,
    pub header: Vec<String>,
    pub records: Vec<Vec<String>>,
}

impl Table {
    /// Table whose metadata records the command, extra notes and every
    /// configuration key.
    pub fn new(command: &str, cfg: &ExperimentConfig, notes: &[(&str, String)], header: &[&str]) -> Self {
        let mut metadata = vec![format!("dbmc {command}")];
        metadata.extend(notes.iter().map(|(k, v)| format!("{k} = {v}")));
        metadata.extend(cfg.entries().into_iter().map(|(k, v)| format!("{k} = {v}")));
        Self { metadata, header: header.iter().map(|s| s.to_string()).collect(), records: Vec::new() }
    }

    pub fn from_sweep(command: &str, cfg: &ExperimentConfig, axis: &str, rows: &[SweepRow]) -> Self {
        let mut t = Self::new(command, cfg, &[("axis_value", axis.to_string())], &SWEEP_HEADER);
        t.records = rows.iter().map(SweepRow::record).collect();
        t
    }

    /// Header plus records, without the metadata block.
    pub fn body(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(|e| CliError::Io(e.to_string()))?;
        for r in &self.records {
            w.write_record(r).map_err(|e| CliError::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn render(&self) -> Result<String, CliError> {
        let mut out: String = self.metadata.iter().map(|m| format!("# {m}\n")).collect();
        out.push_str(&self.body()?);
        Ok(out)
    }
}

/// Strips `#` lines, leaving the CSV body.
pub fn strip_metadata(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect()
}

/// Writes to `path`, or to stdout when no path is given.
pub fn emit(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(format!("cannot write to stdout: {e}"))),
    }
}
