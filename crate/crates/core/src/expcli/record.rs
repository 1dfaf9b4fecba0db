use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::tailest::CurvePoint;

pub const SCHEMA_VERSION: u32 = 1;

/// A checked claim of an experiment; the process exit code reflects these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

/// One row of a long-format plot table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub series: String,
    pub x: f64,
    pub y: f64,
    pub yerr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub series: Vec<SeriesPoint>,
    pub survival: BTreeMap<String, Vec<CurvePoint>>,
}

impl PlotData {
    pub fn push(&mut self, series: &str, x: f64, y: f64, yerr: f64) {
        self.series.push(SeriesPoint { series: series.to_string(), x, y, yerr });
    }
}

/// Output of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub config_hash: String,
    pub experiment: String,
    pub config: ExperimentConfig,
    /// Finite metrics only.
    pub metrics: BTreeMap<String, f64>,
    /// Metrics that are not finite or are reported as divergence
    /// diagnostics, with a tag saying why.
    pub diagnostics: BTreeMap<String, String>,
    pub assertions: Vec<Assertion>,
    pub artifacts: Vec<PathBuf>,
    pub wall_time_s: f64,
    pub code_version: String,
    #[serde(skip)]
    pub plot: PlotData,
}

impl ResultRecord {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }

    pub fn assertion(&self, name: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.name == name)
    }
}

pub fn code_version() -> String {
    format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

/// Writes `metrics.csv` (`name,value`), `series.csv` (`series,x,y,yerr`) and
/// one `survival_<name>.csv` (`t,phat,stderr`) per curve into `dir`.
pub fn emit_plotdata(record: &ResultRecord, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();

    let path = dir.join("metrics.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(["name", "value"]).map_err(|e| csv_err(&path, e))?;
    for (k, v) in &record.metrics {
        w.serialize((k, v)).map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    out.push(path);

    let path = dir.join("series.csv");
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(["series", "x", "y", "yerr"]).map_err(|e| csv_err(&path, e))?;
    for p in &record.plot.series {
        w.serialize(p).map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    out.push(path);

    for (name, curve) in &record.plot.survival {
        let path = dir.join(format!("survival_{name}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
        w.write_record(["t", "phat", "stderr"]).map_err(|e| csv_err(&path, e))?;
        for c in curve {
            w.serialize((c.t, c.p, c.stderr)).map_err(|e| csv_err(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        out.push(path);
    }
    Ok(out)
}

/// Writes `record.json` into `dir`.
pub fn write_record(record: &ResultRecord, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("record.json");
    let json = serde_json::to_string_pretty(record).map_err(|e| Error::io(&path, std::io::Error::other(e)))?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn read_record(path: &Path) -> Result<ResultRecord> {
    let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&s).map_err(|e| Error::io(path, std::io::Error::other(e)))
}

/// Reads a `series.csv` back.
pub fn read_series(path: &Path) -> Result<Vec<SeriesPoint>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expcli::{Experiment, ExperimentConfig};

    fn record() -> ResultRecord {
        let config = ExperimentConfig::default_for(Experiment::MaxLaw);
        ResultRecord {
            schema_version: SCHEMA_VERSION,
            config_hash: config.hash(),
            experiment: "max-law".into(),
            config,
            metrics: BTreeMap::new(),
            diagnostics: BTreeMap::new(),
            assertions: vec![],
            artifacts: vec![],
            wall_time_s: 0.0,
            code_version: code_version(),
            plot: PlotData::default(),
        }
    }

    #[test]
    fn empty_record_gives_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_plotdata(&record(), dir.path()).unwrap();
        assert_eq!(fs::read_to_string(&paths[0]).unwrap(), "name,value\n");
        assert_eq!(fs::read_to_string(&paths[1]).unwrap(), "series,x,y,yerr\n");
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut rec = record();
        let vals = [std::f64::consts::PI * 1e-7, 1.0 / 3.0, 123456.789012345678, -2.5e300];
        for (i, v) in vals.iter().enumerate() {
            rec.plot.push("a,b", i as f64, *v, v.abs().sqrt());
        }
        rec.plot.survival.insert("grid".into(), vec![CurvePoint::new(1.5, 0.25, 0.01)]);
        let paths = emit_plotdata(&rec, dir.path()).unwrap();
        let back = read_series(&paths[1]).unwrap();
        assert_eq!(back, rec.plot.series);
        let text = fs::read_to_string(&paths[2]).unwrap();
        assert!(text.starts_with("t,phat,stderr\n1.5,0.25,0.01"));
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut rec = record();
        rec.metrics.insert("x".into(), 0.1 + 0.2);
        let p = write_record(&rec, dir.path()).unwrap();
        let back = read_record(&p).unwrap();
        assert_eq!(back.metrics, rec.metrics);
        assert_eq!(back.config, rec.config);
    }
}
