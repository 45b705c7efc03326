//! CSV ingestion, run configuration, saved models and report artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::iofrs::{IofrsConfig, PoolEntry};
use crate::ofr::{Criterion, StopRule};
use crate::rct::{IdentificationReport, ModelKind, RctMethod, StageReport};
use crate::regressors::IoData;
use crate::sim::{Model, ProbeSettings, Provenance};
use crate::term::{LagSpec, Term};
use crate::validation::{ValidationReport, TEST_NAMES};

/// Version of the saved-model and report layouts.
pub const SCHEMA_VERSION: u32 = 1;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

/// A run described by one flat key/value file. Every key is optional except
/// `data`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: PathBuf,
    pub u_column: String,
    pub y_column: String,
    /// First training sample (0-based, inclusive).
    pub train_start: usize,
    /// End of the training range (exclusive); the whole record when absent.
    pub train_end: Option<usize>,
    pub sample_period: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub degree: u32,
    pub include_constant: bool,
    pub criterion: Criterion,
    pub rct: String,
    pub want_narx: bool,
    pub max_iterations: usize,
    pub epsilon: f64,
    pub max_terms: Option<usize>,
    pub validation_max_lag: Option<usize>,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: PathBuf::new(),
            u_column: "u".into(),
            y_column: "y".into(),
            train_start: 0,
            train_end: None,
            sample_period: 1.0,
            n_a: 2,
            n_b: 2,
            degree: 2,
            include_constant: false,
            criterion: Criterion::Press,
            rct: "none".into(),
            want_narx: true,
            max_iterations: 10,
            epsilon: 1e-2,
            max_terms: None,
            validation_max_lag: None,
            out_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))
    }

    pub fn lag_spec(&self) -> LagSpec {
        LagSpec::new(self.n_a, self.n_b, self.degree, self.include_constant)
    }

    pub fn method(&self) -> Result<RctMethod> {
        self.rct.parse()
    }

    pub fn iofrs_config(&self) -> IofrsConfig {
        IofrsConfig {
            max_iterations: self.max_iterations,
            criterion: self.criterion,
            max_terms: self.max_terms,
            stop: StopRule::Default,
            parallel_paths: true,
            probe: ProbeSettings { epsilon: self.epsilon, ..ProbeSettings::default() },
        }
    }

    /// Resolved `[start, end)` training range for a record of `len` samples.
    pub fn train_range(&self, len: usize) -> Result<(usize, usize)> {
        let end = self.train_end.unwrap_or(len);
        if end > len || self.train_start >= end {
            return Err(Error::Config(format!("train range {}..{} does not fit {len} samples", self.train_start, end)));
        }
        Ok((self.train_start, end))
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.as_os_str().is_empty() {
            return Err(Error::Config("missing 'data' path".into()));
        }
        if !(self.sample_period > 0.0 && self.sample_period.is_finite()) {
            return Err(Error::Config("sample_period must be positive".into()));
        }
        self.lag_spec().validate()?;
        self.method()?;
        self.iofrs_config().validate()?;
        if self.validation_max_lag == Some(0) {
            return Err(Error::Config("validation_max_lag must be at least 1".into()));
        }
        Ok(())
    }
}

/// Reads two named numeric columns from a headed CSV file.
pub fn ingest_csv(path: &Path, u_column: &str, y_column: &str) -> Result<IoData<f64>> {
    let (u, y) = read_columns(path, u_column, Some(y_column))?;
    IoData::new(u, y.expect("requested"), 1.0)
}

/// Like [`ingest_csv`] with an optional output column.
pub fn read_columns(path: &Path, u_column: &str, y_column: Option<&str>) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let ingest = |message: String| Error::Ingest { path: path.to_path_buf(), message };
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers().map_err(|e| ingest(e.to_string()))?.clone();
    let find =
        |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| ingest(format!("missing column '{name}'")));
    let ui = find(u_column)?;
    let yi = y_column.map(find).transpose()?;
    let mut u = Vec::new();
    let mut y = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| ingest(format!("row {row}: {e}")))?;
        let cell = |idx: usize, name: &str| -> Result<f64> {
            let raw = record.get(idx).unwrap_or("");
            if raw.is_empty() {
                return Err(ingest(format!("row {row}: empty '{name}' cell")));
            }
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| ingest(format!("row {row}: '{raw}' in column '{name}' is not a finite number")))
        };
        u.push(cell(ui, u_column)?);
        if let (Some(yi), Some(name)) = (yi, y_column) {
            y.push(cell(yi, name)?);
        }
    }
    if u.is_empty() {
        return Err(ingest("no data rows".into()));
    }
    Ok((u, yi.map(|_| y)))
}

/// Writes `t,u,y` rows.
pub fn write_csv(path: &Path, data: &IoData<f64>) -> Result<()> {
    let mut out = String::from("t,u,y\n");
    for (t, (u, y)) in data.u().iter().zip(data.y()).enumerate() {
        let _ = writeln!(out, "{t},{u:e},{y:e}");
    }
    write_file(path, &out)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(io_err(path))
}

/// SHA-256 over the little-endian bytes of `u` then `y`.
pub fn data_hash(data: &IoData<f64>) -> String {
    let mut h = Sha256::new();
    for v in data.u().iter().chain(data.y()) {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

fn coef(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedTerm {
    pub term: String,
    pub coefficient: String,
}

/// On-disk model: canonical term strings and 17-significant-digit
/// coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub schema_version: u32,
    pub lag_spec: LagSpec,
    pub bias: String,
    pub terms: Vec<SavedTerm>,
    pub provenance: Provenance,
}

impl SavedModel {
    pub fn from_model(model: &Model<f64>) -> Self {
        SavedModel {
            schema_version: SCHEMA_VERSION,
            lag_spec: model.lag_spec,
            bias: coef(model.bias),
            terms: model
                .terms
                .iter()
                .zip(&model.coefficients)
                .map(|(t, &c)| SavedTerm { term: t.to_string(), coefficient: coef(c) })
                .collect(),
            provenance: model.provenance.clone(),
        }
    }

    pub fn to_model(&self) -> Result<Model<f64>> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Serde(format!("unsupported model schema version {}", self.schema_version)));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Serde(format!("bad coefficient '{s}'")));
        let mut pairs = vec![(Term::constant(), num(&self.bias)?)];
        for t in &self.terms {
            pairs.push((t.term.parse()?, num(&t.coefficient)?));
        }
        let mut model = Model::new(pairs, self.lag_spec)?;
        model.provenance = self.provenance.clone();
        Ok(model)
    }
}

pub fn save_model(path: &Path, model: &Model<f64>) -> Result<()> {
    let text = serde_json::to_string_pretty(&SavedModel::from_model(model)).map_err(|e| Error::Serde(e.to_string()))?;
    write_file(path, &(text + "\n"))
}

pub fn load_model(path: &Path) -> Result<Model<f64>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let saved: SavedModel =
        serde_json::from_str(&text).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))?;
    saved.to_model()
}

/// Everything [`render_report`] writes besides the identification itself.
#[derive(Debug, Clone)]
pub struct RunArtifacts<'a> {
    pub config: &'a RunConfig,
    pub data: &'a IoData<f64>,
    pub train: (usize, usize),
    /// Free-run output over the whole record, seeded with measured samples.
    pub simulated: &'a [f64],
    pub validation: &'a ValidationReport<f64>,
}

/// Human-readable model table with columns term / ms PRESS / ERR /
/// coefficient, followed by the BIC comparison.
pub fn render_table(report: &IdentificationReport<f64>) -> String {
    let mut out = String::new();
    let kind = match report.chosen {
        ModelKind::Arx => "ARX",
        ModelKind::Narx => "NARX",
    };
    let _ = writeln!(out, "{kind} model ({} terms)", report.table.len());
    let _ = writeln!(out, "{:<24} {:>14} {:>14} {:>14}", "term", "ms PRESS", "ERR", "coefficient");
    for row in &report.table {
        let _ = writeln!(out, "{:<24} {:>14.5e} {:>14.5e} {:>14.6}", row.term, row.ms_press, row.err, row.coefficient);
    }
    out.push('\n');
    match (&report.arx, &report.narx) {
        (Some(a), Some(n)) => {
            let _ = writeln!(out, "BIC: ARX {:.6}, NARX {:.6}", a.bic(), n.bic());
            if report.chosen == ModelKind::Arx {
                let _ = writeln!(out, "NARX does not improve on ARX; the ARX model is kept.");
            }
        }
        (Some(a), None) if report.narx_failed.is_some() => {
            let _ = writeln!(out, "BIC: ARX {:.6} (no stable NARX model)", a.bic());
        }
        (Some(a), None) => {
            let _ = writeln!(out, "BIC: ARX {:.6} (NARX not requested)", a.bic());
        }
        (None, Some(n)) => {
            let _ = writeln!(out, "BIC: NARX {:.6} (no stable ARX model)", n.bic());
        }
        (None, None) => {}
    }
    out
}

fn pool_json(entry: &PoolEntry<f64>) -> Value {
    json!({
        "iteration": entry.iteration,
        "origin": entry.origin.to_string(),
        "terms": entry.model.term_set().iter().map(ToString::to_string).collect::<Vec<_>>(),
        "stable": entry.verdict.stable,
        "diverged": entry.verdict.diverged,
        "msse": entry.msse,
        "bic": entry.bic,
        "stop": format!("{:?}", entry.path.stop),
    })
}

fn stage_json(stage: &StageReport<f64>) -> Value {
    let best = stage.result.best_entry();
    json!({
        "dictionary_size": stage.dictionary_size,
        "preselect": stage.preselect.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "iterations": stage.result.iterations,
        "evaluations": stage.evaluations(),
        "overfit_evaluations": stage.overfit_evaluations,
        "bic_trace": stage.result.bic_trace,
        "bic": stage.bic(),
        "msse": stage.result.msse(),
        "terms": best.model.term_set().iter().map(ToString::to_string).collect::<Vec<_>>(),
        "stability": {
            "stable": best.verdict.stable,
            "mean0": best.verdict.mean0,
            "var0": best.verdict.var0,
            "mean1": best.verdict.mean1,
            "var1": best.verdict.var1,
            "mean0_at_bias": best.verdict.mean0_at_bias,
        },
        "pool": stage.result.pool.candidates.iter().map(pool_json).collect::<Vec<_>>(),
    })
}

/// The machine-readable report. Contains no timings and no output location,
/// so identical runs give identical bytes.
pub fn report_json(report: &IdentificationReport<f64>, artifacts: &RunArtifacts<'_>) -> Value {
    let model = report.model();
    let y = artifacts.data.y();
    let lag = model.max_lag();
    let sim_residual: Vec<f64> = y[lag..].iter().zip(&artifacts.simulated[lag..]).map(|(a, b)| a - b).collect();
    let sim_var = crate::scalar::variance(&sim_residual);
    let kind = match report.chosen {
        ModelKind::Arx => "ARX",
        ModelKind::Narx => "NARX",
    };
    let mut config = serde_json::to_value(artifacts.config).expect("config serialises");
    if let Some(map) = config.as_object_mut() {
        map.remove("out_dir");
    }
    json!({
        "schema_version": SCHEMA_VERSION,
        "config": config,
        "data_hash": data_hash(artifacts.data),
        "train_range": [artifacts.train.0, artifacts.train.1],
        "method": report.method,
        "chosen": kind,
        "bic": {
            "arx": report.arx.as_ref().map(StageReport::bic),
            "narx": report.narx.as_ref().map(StageReport::bic),
        },
        "model": SavedModel::from_model(model),
        "table": report.table,
        "arx": report.arx.as_ref().map(stage_json),
        "narx": report.narx.as_ref().map(stage_json),
        "narx_failed": report.narx_failed.as_ref().map(|pool| pool.iter().map(|c| json!({
            "origin": c.origin,
            "terms": c.terms,
            "stable": c.stable,
            "diverged": c.diverged,
        })).collect::<Vec<_>>()),
        "evaluations": report.evaluations(),
        "free_run": {
            "samples": sim_residual.len(),
            "residual_variance": sim_var,
        },
        "validation": {
            "n_samples": artifacts.validation.n_samples,
            "residual_variance": artifacts.validation.residual_variance,
            "tests": artifacts.validation.tests.iter().map(|t| json!({
                "name": t.name,
                "pass": t.pass,
                "bound": t.bound,
                "fraction_inside": t.fraction_inside,
                "degenerate": t.degenerate,
            })).collect::<Vec<_>>(),
        },
    })
}

fn timings_json(report: &IdentificationReport<f64>) -> Value {
    json!({
        "arx_seconds": report.arx.as_ref().map(|s| s.seconds),
        "narx_seconds": report.narx.as_ref().map(|s| s.seconds),
    })
}

/// Writes `table.txt`, `report.json`, `timings.json`, `model.json`,
/// `sim.csv` and one `corr_<test>.csv` per correlation test into
/// `config.out_dir`. Returns the written paths.
pub fn render_report(report: &IdentificationReport<f64>, artifacts: &RunArtifacts<'_>) -> Result<Vec<PathBuf>> {
    let dir = &artifacts.config.out_dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    let mut put = |name: &str, contents: String| -> Result<()> {
        let path = dir.join(name);
        write_file(&path, &contents)?;
        written.push(path);
        Ok(())
    };
    let pretty = |v: &Value| serde_json::to_string_pretty(v).expect("JSON values serialise") + "\n";

    put("table.txt", render_table(report))?;
    put("report.json", pretty(&report_json(report, artifacts)))?;
    put("timings.json", pretty(&timings_json(report)))?;
    put(
        "model.json",
        serde_json::to_string_pretty(&SavedModel::from_model(report.model())).expect("model serialises") + "\n",
    )?;

    let mut sim = String::from("t,u,measured,simulated,train\n");
    let (start, end) = artifacts.train;
    for (t, ((u, y), s)) in artifacts.data.u().iter().zip(artifacts.data.y()).zip(artifacts.simulated).enumerate() {
        let _ = writeln!(sim, "{t},{u:e},{y:e},{s:e},{}", u8::from((start..end).contains(&t)));
    }
    put("sim.csv", sim)?;

    for name in TEST_NAMES {
        if artifacts.validation.test(name).is_some() {
            put(&format!("corr_{name}.csv"), artifacts.validation.to_csv(Some(&[name])))?;
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp_csv(contents: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        fs::write(f.path(), contents).unwrap();
        f
    }

    #[test]
    fn three_rows() {
        let f = tmp_csv("t,u,y\n0,1.0,2.0\n1,0.5,0.1\n2,-1,3e-2\n");
        let d = ingest_csv(f.path(), "u", "y").unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.y()[2], 0.03);
    }

    #[test]
    fn blank_cell_names_row() {
        let f = tmp_csv("t,u,y\n0,1.0,2.0\n1,,0.1\n");
        let msg = ingest_csv(f.path(), "u", "y").unwrap_err().to_string();
        assert!(msg.contains("row 2"), "{msg}");
    }

    #[test]
    fn non_numeric_and_missing_column() {
        let f = tmp_csv("t,u,y\n0,abc,2.0\n");
        assert!(ingest_csv(f.path(), "u", "y").unwrap_err().to_string().contains("row 1"));
        let f = tmp_csv("t,u\n0,1\n");
        assert!(ingest_csv(f.path(), "u", "y").unwrap_err().to_string().contains("missing column 'y'"));
        let f = tmp_csv("t,u,y\n0,1,inf\n");
        assert!(ingest_csv(f.path(), "u", "y").is_err());
    }

    #[test]
    fn csv_round_trip() {
        let data = IoData::new(vec![0.1, -2.5e-7, 1.0 / 3.0], vec![std::f64::consts::PI, 0.0, -1e300], 1.0).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_csv(f.path(), &data).unwrap();
        assert_eq!(ingest_csv(f.path(), "u", "y").unwrap(), data);
    }

    #[test]
    fn saved_model_round_trip() {
        let model = crate::synth::dc_motor_model::<f64>();
        let mut model = Model::new(
            model
                .terms
                .iter()
                .cloned()
                .zip(model.coefficients.iter().map(|c| c / 3.0))
                .chain([(Term::constant(), 0.1)]),
            model.lag_spec,
        )
        .unwrap();
        model.provenance.path = vec!["u(t-1)".into()];
        let back = SavedModel::from_model(&model).to_model().unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn config_keys() {
        let cfg: RunConfig =
            toml::from_str("data = \"x.csv\"\ntrain_end = 60\nrct = \"3\"\ncriterion = \"err\"\n").unwrap();
        assert_eq!(cfg.train_end, Some(60));
        assert_eq!(cfg.method().unwrap(), RctMethod::M3);
        assert_eq!(cfg.criterion, Criterion::Err);
        cfg.validate().unwrap();
        assert!(cfg.train_range(50).is_err());
        assert_eq!(cfg.train_range(100).unwrap(), (0, 60));
        assert!(toml::from_str::<RunConfig>("data = \"x\"\nbogus = 1\n").is_err());
    }
}
