//! CSV series and JSON run summaries.
//!
//! Every CSV uses the long format `t,quantity,truncation,value` with shortest
//! round-trip floats and LF line endings.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::Normalizer;
use super::{ErrorSeries, ResolvedSim, ScenarioConfig, ScenarioResult};
use crate::attitude_lift::TruncationConfig;
use crate::error::Result;

pub const CSV_HEADER: &str = "t,quantity,truncation,value";

/// Streaming writer for the long CSV format.
pub struct CsvWriter<W: Write> {
    out: W,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        out.write_all(CSV_HEADER.as_bytes())?;
        out.write_all(b"\n")?;
        Ok(Self { out })
    }

    pub fn row(&mut self, t: f64, quantity: &str, truncation: &str, value: f64) -> Result<()> {
        writeln!(self.out, "{t:?},{quantity},{truncation},{value:?}")?;
        Ok(())
    }

    pub fn series(&mut self, times: &[f64], quantity: &str, truncation: &str, values: &[f64]) -> Result<()> {
        for (t, v) in times.iter().zip(values) {
            self.row(*t, quantity, truncation, *v)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Error curves of one truncation, quantity by quantity.
pub fn write_series<W: Write>(series: &ErrorSeries, out: W) -> Result<W> {
    let mut w = CsvWriter::new(out)?;
    for (quantity, values) in &series.errors {
        w.series(&series.times, &format!("e_{quantity}"), &series.label, values)?;
    }
    w.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub label: String,
    pub truncation: TruncationConfig,
    pub file: String,
    pub samples: usize,
    pub maxima: BTreeMap<String, f64>,
    pub total: Option<f64>,
    pub divergence_time: Option<f64>,
    pub onset_time: Option<f64>,
    pub t_lim_forced: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub config: ScenarioConfig,
    pub resolved: ResolvedSim,
    pub normalizers: BTreeMap<String, Normalizer>,
    pub series: Vec<SeriesSummary>,
}

pub fn series_file_name(series: &ErrorSeries) -> String {
    format!("{}.csv", series.label)
}

pub fn summarize(result: &ScenarioResult) -> RunSummary {
    RunSummary {
        scenario: result.config.name.clone(),
        config: result.config.clone(),
        resolved: result.resolved,
        normalizers: result.normalizers.clone(),
        series: result
            .series
            .iter()
            .map(|s| SeriesSummary {
                label: s.label.clone(),
                truncation: s.truncation,
                file: series_file_name(s),
                samples: s.times.len(),
                maxima: s.maxima.clone(),
                total: s.total,
                divergence_time: s.divergence_time,
                onset_time: s.onset_time,
                t_lim_forced: s.t_lim_forced,
            })
            .collect(),
    }
}

/// Write one CSV per series and `summary.json` into `dir` (created if needed).
pub fn emit_results(result: &ScenarioResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(result.series.len() + 1);
    for s in &result.series {
        let path = dir.join(series_file_name(s));
        write_series(s, BufWriter::new(fs::File::create(&path)?))?;
        written.push(path);
    }
    let path = dir.join("summary.json");
    write_json(&summarize(result), &path)?;
    written.push(path);
    Ok(written)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| crate::Error::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series() -> ErrorSeries {
        let mut errors = BTreeMap::new();
        errors.insert("nu".to_string(), vec![0.0, 1e-7, 0.25]);
        ErrorSeries {
            truncation: TruncationConfig::new(2, 1).unwrap(),
            label: "nu2z1".into(),
            times: vec![0.0, 0.1, 0.2],
            errors,
            maxima: BTreeMap::new(),
            total: None,
            divergence_time: None,
            onset_time: None,
            t_lim_forced: None,
        }
    }

    #[test]
    fn csv_layout() {
        let bytes = write_series(&series(), Vec::new()).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(
            text,
            "t,quantity,truncation,value\n0.0,e_nu,nu2z1,0.0\n0.1,e_nu,nu2z1,1e-7\n0.2,e_nu,nu2z1,0.25\n"
        );
        for line in text.lines().skip(1) {
            let v: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
            assert!(v.is_finite());
        }
    }
}
