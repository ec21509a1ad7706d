//! Configuration loading, result files and run manifests.
//!
//! Floats are written with 12 significant digits in both CSV and JSON.
//! Manifests and result files are written to a temporary name and renamed
//! into place.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hbn::{PhysicalConstants, ANGSTROM, HZ_TO_RAD_PER_US};
use crate::protocol::{ChainOutcome, Comparison, ConfigDocument, HbnOutcome, SweepTable, TimeSeries};

/// Formats a float with 12 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.11e}")
}

/// `v` rounded to 12 significant digits.
pub fn round12(v: f64) -> f64 {
    if v.is_finite() {
        fmt_float(v).parse().expect("formatted float parses")
    } else {
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Parses and validates a configuration. A run manifest is accepted too:
/// its stored configuration is used after the hash is re-checked.
pub fn parse_config_str(text: &str) -> Result<ConfigDocument> {
    let value: Value = serde_json::from_str(text)?;
    let doc: ConfigDocument = if value.get("config_hash").is_some() {
        let manifest: RunManifest = serde_json::from_value(value)?;
        manifest.verify()?;
        serde_json::from_value(manifest.config)?
    } else {
        serde_json::from_value(value)?
    };
    doc.validate()?;
    Ok(doc)
}

pub fn parse_config(path: &Path) -> Result<ConfigDocument> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

/// SHA-256 of the canonical JSON form of `doc`.
pub fn config_hash(doc: &ConfigDocument) -> Result<String> {
    let canonical = serde_json::to_string(doc)?;
    Ok(format!("{:x}", Sha256::digest(canonical.as_bytes())))
}

/// Writes `bytes` next to `path` and renames the file into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

fn json_num(v: f64) -> Value {
    if v.is_finite() {
        json!(round12(v))
    } else {
        Value::Null
    }
}

fn opt_num(v: Option<f64>) -> Value {
    v.map_or(Value::Null, json_num)
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

fn series_header(s: &TimeSeries) -> Vec<String> {
    let mut h = vec!["cycle".to_string(), "t".to_string()];
    h.extend(s.value_columns());
    h
}

/// Serializes a series: `cycle, t, mean_polarization, site_XXXX..., groups`.
pub fn series_bytes(s: &TimeSeries, format: Format) -> Result<Vec<u8>> {
    let header = series_header(s);
    match format {
        Format::Csv => csv_bytes(
            &header,
            s.rows.iter().map(|r| {
                let mut cells = vec![r.cycle.to_string(), fmt_float(r.t)];
                cells.extend(s.values(r).into_iter().map(fmt_float));
                cells
            }),
        ),
        Format::Json => {
            let rows: Vec<Value> = s
                .rows
                .iter()
                .map(|r| {
                    let mut cells = vec![json!(r.cycle), json_num(r.t)];
                    cells.extend(s.values(r).into_iter().map(json_num));
                    Value::Array(cells)
                })
                .collect();
            Ok(serde_json::to_vec_pretty(&json!({ "engine": s.engine, "columns": header, "rows": rows }))?)
        }
    }
}

pub fn comparison_bytes(c: &Comparison, format: Format) -> Result<Vec<u8>> {
    let header: Vec<String> = ["cycle", "t", "exact_mean", "hpa_mean", "abs_gap", "epsilon"].map(String::from).to_vec();
    match format {
        Format::Csv => csv_bytes(
            &header,
            c.rows.iter().map(|r| vec![r.cycle.to_string(), fmt_float(r.t), fmt_float(r.exact), fmt_float(r.hpa), fmt_float(r.gap()), opt_cell(r.epsilon)]),
        ),
        Format::Json => {
            let rows: Vec<Value> =
                c.rows.iter().map(|r| json!([r.cycle, json_num(r.t), json_num(r.exact), json_num(r.hpa), json_num(r.gap()), opt_num(r.epsilon)])).collect();
            Ok(serde_json::to_vec_pretty(&json!({ "columns": header, "rows": rows }))?)
        }
    }
}

pub fn sweep_bytes(t: &SweepTable, format: Format) -> Result<Vec<u8>> {
    let header = t.columns();
    match format {
        Format::Csv => csv_bytes(
            &header,
            t.rows.iter().map(|r| {
                let mut cells: Vec<String> = r.point.iter().map(|&v| fmt_float(v)).collect();
                cells.extend([opt_cell(r.exact), opt_cell(r.hpa), opt_cell(r.epsilon), r.error.clone().unwrap_or_default()]);
                cells
            }),
        ),
        Format::Json => {
            let rows: Vec<Value> = t
                .rows
                .iter()
                .map(|r| {
                    let mut cells: Vec<Value> = r.point.iter().map(|&v| json_num(v)).collect();
                    cells.extend([opt_num(r.exact), opt_num(r.hpa), opt_num(r.epsilon), json!(r.error)]);
                    Value::Array(cells)
                })
                .collect();
            Ok(serde_json::to_vec_pretty(&json!({ "columns": header, "rows": rows }))?)
        }
    }
}

fn scan_bytes(scan: &[(f64, f64)]) -> Result<Vec<u8>> {
    csv_bytes(&["phi_deg".to_string(), "objective".to_string()], scan.iter().map(|&(p, v)| vec![fmt_float(p), fmt_float(v)]))
}

/// Columns and numeric rows of a JSON result file; `null` becomes `None`.
pub fn read_json_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<Option<f64>>>)> {
    #[derive(Deserialize)]
    struct Table {
        columns: Vec<String>,
        rows: Vec<Vec<Value>>,
    }
    let t: Table = serde_json::from_slice(&fs::read(path)?)?;
    let rows = t.rows.into_iter().map(|r| r.into_iter().map(|v| v.as_f64()).collect()).collect();
    Ok((t.columns, rows))
}

/// Result files of one run, written into one directory.
pub struct OutputSet {
    dir: PathBuf,
    format: Format,
    files: Vec<String>,
}

impl OutputSet {
    pub fn new(dir: &Path, format: Format) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("cannot create {}: {e}", dir.display()))))?;
        Ok(Self { dir: dir.to_path_buf(), format, files: Vec::new() })
    }

    pub fn format(&self) -> Format {
        self.format
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.files.push(name.to_string());
        Ok(path)
    }

    fn named(&self, stem: &str) -> String {
        format!("{stem}.{}", self.format.extension())
    }

    pub fn write_series(&mut self, s: &TimeSeries) -> Result<PathBuf> {
        let name = self.named(&s.engine);
        self.write(&name, &series_bytes(s, self.format)?)
    }

    pub fn write_comparison(&mut self, c: &Comparison) -> Result<PathBuf> {
        let name = self.named("comparison");
        self.write(&name, &comparison_bytes(c, self.format)?)
    }

    pub fn write_chain(&mut self, out: &ChainOutcome) -> Result<()> {
        for s in out.series() {
            self.write_series(s)?;
        }
        if let Some(c) = &out.comparison {
            self.write_comparison(c)?;
        }
        Ok(())
    }

    pub fn write_hbn(&mut self, out: &HbnOutcome) -> Result<()> {
        for s in out.series() {
            self.write_series(s)?;
        }
        if let Some(c) = &out.comparison {
            self.write_comparison(c)?;
        }
        let mut table = Vec::new();
        out.setup.table.write_csv(&mut table)?;
        self.write("couplings.csv", &table)?;
        if let Some(scan) = &out.setup.scan {
            self.write("azimuth_scan.csv", &scan_bytes(scan)?)?;
        }
        Ok(())
    }

    pub fn write_sweep(&mut self, t: &SweepTable) -> Result<()> {
        let name = self.named("sweep");
        self.write(&name, &sweep_bytes(t, self.format)?)?;
        Ok(())
    }

    /// Writes `manifest.json` last, listing every file written so far.
    pub fn finish(mut self, mut manifest: RunManifest) -> Result<RunManifest> {
        manifest.outputs = std::mem::take(&mut self.files);
        manifest.finished_unix_s = unix_now();
        write_atomic(&self.dir.join("manifest.json"), &serde_json::to_vec_pretty(&manifest)?)?;
        Ok(manifest)
    }
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

/// Provenance of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    /// Fully resolved configuration, defaults included.
    pub config: Value,
    pub seed: u64,
    /// Physical constants and unit conversions that entered the run.
    pub constants: Value,
    /// Quantities fixed while preparing the run (drives, durations, azimuth).
    pub derived: Value,
    pub workers: usize,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(doc: &ConfigDocument, workers: usize) -> Result<Self> {
        let constants = match doc {
            ConfigDocument::Hbn(c) => hbn_constants(&c.constants),
            _ => json!({ "units": "dimensionless (frequencies and times in the units of the configuration)" }),
        };
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash(doc)?,
            config: serde_json::to_value(doc)?,
            seed: doc.seed(),
            constants,
            derived: Value::Null,
            workers,
            started_unix_s: unix_now(),
            finished_unix_s: 0.0,
            outputs: Vec::new(),
        })
    }

    pub fn record_hbn(&mut self, out: &HbnOutcome) {
        let s = &out.setup;
        self.derived = json!({
            "omega_N_rad_per_us": s.omega_n,
            "omega_B_rad_per_us": s.omega_b,
            "tau_N_us": s.tau_n,
            "tau_B_us": s.tau_b,
            "phi_deg": s.phi_deg,
            "sites": s.table.sites.len(),
        });
    }

    /// Re-hashes the stored configuration.
    pub fn verify(&self) -> Result<()> {
        let doc: ConfigDocument = serde_json::from_value(self.config.clone())?;
        let hash = config_hash(&doc)?;
        if hash != self.config_hash {
            return Err(Error::Config(format!("manifest hash {} does not match its configuration ({hash})", self.config_hash)));
        }
        Ok(())
    }
}

fn hbn_constants(c: &PhysicalConstants) -> Value {
    json!({
        "physical": c,
        "hz_to_rad_per_us": HZ_TO_RAD_PER_US,
        "angstrom_m": ANGSTROM,
        "internal_units": "angular frequencies in rad/us, times in us, distances in angstrom",
    })
}
