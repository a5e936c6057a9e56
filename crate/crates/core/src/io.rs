//! Long-format CSV ingestion, scenario files, and result emission.
//!
//! Data files have one row per visit with header
//! `subject_id, visit_time, response, <covariates...>`. Lines starting with
//! `#` are comments; emitted files use them to carry the run metadata.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{FitConfig, FitResult};
use crate::inference::{BandPoint, CoefRow, InferenceResult, SelectionReport};
use crate::model::{PanelDataset, Subject};
use crate::simulation::{Baseline, CovariateDist, SimScenario, SimSummary};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestOptions {
    /// Number of levels; inferred as the largest response when absent.
    pub levels: Option<u32>,
    /// Responses above this level are recoded to it.
    pub merge_above: Option<u32>,
    /// End of follow-up; defaults to the last visit.
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub data: PanelDataset,
    pub covariate_names: Vec<String>,
}

pub fn ingest_csv(path: &Path, opts: &IngestOptions) -> Result<Ingested> {
    let file = fs::File::open(path)?;
    ingest_reader(file, opts)
}

/// Groups rows by subject (first-appearance order) and sorts visits.
pub fn ingest_reader<R: Read>(reader: R, opts: &IngestOptions) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Csv { row: 1, message: e.to_string() })?.clone();
    if header.len() < 3 {
        return Err(Error::Csv {
            row: 1,
            message: "expected columns subject_id, visit_time, response, then covariates".into(),
        });
    }
    let covariate_names: Vec<String> = header.iter().skip(3).map(str::to_string).collect();
    let p = covariate_names.len();

    struct Pending {
        id: String,
        covariates: Vec<f64>,
        first_row: usize,
        rows: Vec<(f64, u32, usize)>,
    }
    let mut order: Vec<Pending> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Csv {
            row: e.position().map_or(0, |pos| pos.line() as usize),
            message: e.to_string(),
        })?;
        let row = rec.position().map_or(0, |pos| pos.line() as usize);
        let err = |message: String| Error::Csv { row, message };
        if rec.len() != p + 3 {
            return Err(err(format!("expected {} fields, found {}", p + 3, rec.len())));
        }
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(err("empty subject_id".into()));
        }
        let time: f64 = rec[1].parse().map_err(|_| err(format!("unparseable visit_time {:?}", &rec[1])))?;
        if !(time.is_finite() && time > 0.0) {
            return Err(err(format!("visit_time must be positive, got {time}")));
        }
        let mut response: u32 = rec[2].parse().map_err(|_| err(format!("unparseable response {:?}", &rec[2])))?;
        if response < 1 {
            return Err(err(format!("response {response} out of range; levels start at 1")));
        }
        if let Some(k) = opts.merge_above {
            response = response.min(k);
        }
        if let Some(k) = opts.levels {
            if response > k {
                return Err(err(format!("response {response} out of range 1..={k}")));
            }
        }
        let covariates: Vec<f64> = (3..p + 3)
            .map(|c| rec[c].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                err(format!("unparseable covariate {} value {:?}", &header[c], &rec[c]))
            }))
            .collect::<Result<_>>()?;
        let slot = *index.entry(id.clone()).or_insert_with(|| {
            order.push(Pending { id: id.clone(), covariates: covariates.clone(), first_row: row, rows: Vec::new() });
            order.len() - 1
        });
        let pending = &mut order[slot];
        if pending.covariates != covariates {
            return Err(err(format!(
                "covariates of subject {id} differ from its first row (line {})",
                pending.first_row
            )));
        }
        pending.rows.push((time, response, row));
    }
    if order.is_empty() {
        return Err(Error::Csv { row: 1, message: "no data rows".into() });
    }

    let mut max_response = 1;
    let mut subjects = Vec::with_capacity(order.len());
    for mut pending in order {
        pending.rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        if let Some(w) = pending.rows.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Csv {
                row: w[1].2,
                message: format!("duplicate visit time {} for subject {} (also line {})", w[1].0, pending.id, w[0].2),
            });
        }
        max_response = pending.rows.iter().fold(max_response, |m, r| m.max(r.1));
        subjects.push(Subject::new(
            pending.id,
            pending.covariates,
            pending.rows.iter().map(|r| r.0).collect(),
            pending.rows.iter().map(|r| r.1).collect(),
        ));
    }
    let levels = opts.levels.unwrap_or(max_response);
    let data = PanelDataset::new(subjects, levels, opts.tau)?;
    Ok(Ingested { data, covariate_names })
}

/// Default covariate column names `x1..xp`.
pub fn default_covariate_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

/// Writes `data` in the long format read by [`ingest_csv`].
pub fn dataset_to_csv(data: &PanelDataset, covariate_names: &[String]) -> Result<String> {
    if covariate_names.len() != data.covariate_dim() {
        return Err(Error::Config(format!(
            "{} covariate names for {} covariates",
            covariate_names.len(),
            data.covariate_dim()
        )));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["subject_id".to_string(), "visit_time".into(), "response".into()];
    header.extend(covariate_names.iter().cloned());
    w.write_record(&header).map_err(csv_write)?;
    for s in data.subjects() {
        for (t, y) in s.visits.iter().zip(&s.responses) {
            let mut rec = vec![s.id.clone(), t.to_string(), y.to_string()];
            rec.extend(s.covariates.iter().map(|c| c.to_string()));
            w.write_record(&rec).map_err(csv_write)?;
        }
    }
    finish_csv(w)
}

pub fn write_dataset_csv(data: &PanelDataset, covariate_names: &[String], path: &Path) -> Result<()> {
    fs::write(path, dataset_to_csv(data, covariate_names)?)?;
    Ok(())
}

fn csv_write(e: csv::Error) -> Error {
    Error::Io(e.into())
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits the UTF-8 it was given"))
}

/// Empty string for non-finite values.
fn num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

/// Reproducibility header carried by every emitted file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub program: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
}

impl RunMetadata {
    pub fn new<C: Serialize>(command: &str, seed: u64, config: &C) -> Result<Self> {
        Ok(RunMetadata {
            program: "opanel".into(),
            version: VERSION.into(),
            command: command.into(),
            seed,
            config: serde_json::to_value(config)?,
        })
    }

    /// `#`-prefixed lines placed before a CSV header.
    pub fn csv_preamble(&self) -> Result<String> {
        let mut s = String::new();
        let _ = writeln!(s, "# {} {} {}", self.program, self.version, self.command);
        let _ = writeln!(s, "# seed={}", self.seed);
        let _ = writeln!(s, "# config={}", serde_json::to_string(&self.config)?);
        Ok(s)
    }
}

fn write_with_preamble(dir: &Path, name: &str, meta: &RunMetadata, body: String) -> Result<()> {
    let mut text = meta.csv_preamble()?;
    text.push_str(&body);
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

pub fn coefficients_csv(names: &[String], rows: &[CoefRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["covariate", "est", "se", "ci_low", "ci_high", "p_value"]).map_err(csv_write)?;
    for (name, r) in names.iter().zip(rows) {
        w.write_record([name.clone(), num(r.estimate), num(r.se), num(r.ci_low), num(r.ci_high), num(r.p_value)])
            .map_err(csv_write)?;
    }
    finish_csv(w)
}

pub fn baseline_csv(band: &[BandPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "lambda", "se", "lower", "upper"]).map_err(csv_write)?;
    for b in band {
        w.write_record([num(b.t), num(b.lambda), num(b.se), num(b.lower), num(b.upper)]).map_err(csv_write)?;
    }
    finish_csv(w)
}

/// Machine-readable record of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub metadata: RunMetadata,
    pub covariates: Vec<String>,
    pub n_subjects: usize,
    pub n_obs: usize,
    pub levels: u32,
    pub tau: f64,
    pub fit: FitResult,
    pub inference: Option<InferenceResult>,
    pub inference_error: Option<String>,
}

/// Writes `coefficients.csv`, `baseline.csv`, `fit.json` and `metadata.json`.
pub fn emit_fit(dir: &Path, report: &FitReport, band: &[BandPoint]) -> Result<()> {
    prepare_dir(dir)?;
    let meta = &report.metadata;
    let rows = match &report.inference {
        Some(inf) => inf.coefficients.clone(),
        None => report
            .fit
            .beta
            .iter()
            .map(|&b| CoefRow { estimate: b, se: f64::NAN, ci_low: f64::NAN, ci_high: f64::NAN, z: f64::NAN, p_value: f64::NAN })
            .collect(),
    };
    write_with_preamble(dir, "coefficients.csv", meta, coefficients_csv(&report.covariates, &rows)?)?;
    write_with_preamble(dir, "baseline.csv", meta, baseline_csv(band)?)?;
    write_json(dir, "fit.json", report)?;
    write_json(dir, "metadata.json", meta)
}

pub fn selection_csv(report: &SelectionReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["interior_knots", "order", "converged", "loglik", "n_params", "aic", "bic", "best_aic", "best_bic", "error"])
        .map_err(csv_write)?;
    for (i, c) in report.cells.iter().enumerate() {
        let (ll, q, aic, bic) = match &c.criteria {
            Some(ic) => (num(ic.loglik), ic.n_params.to_string(), num(ic.aic), num(ic.bic)),
            None => Default::default(),
        };
        w.write_record([
            c.interior_knots.to_string(),
            c.order.to_string(),
            c.converged.to_string(),
            ll,
            q,
            aic,
            bic,
            (i == report.best_aic).to_string(),
            (i == report.best_bic).to_string(),
            c.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_write)?;
    }
    finish_csv(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutput {
    pub metadata: RunMetadata,
    pub report: SelectionReport,
}

pub fn emit_selection(dir: &Path, out: &SelectionOutput) -> Result<()> {
    prepare_dir(dir)?;
    write_with_preamble(dir, "selection.csv", &out.metadata, selection_csv(&out.report)?)?;
    write_json(dir, "selection.json", out)?;
    write_json(dir, "metadata.json", &out.metadata)
}

/// Table layout: one row per target with true value, Bias, SD, SE, CP%.
pub fn summary_csv(summary: &SimSummary) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["n", "target", "true", "bias", "sd", "se", "cp", "mc_se"]).map_err(csv_write)?;
    for t in &summary.targets {
        w.write_record([
            summary.n.to_string(),
            t.name.clone(),
            num(t.truth),
            num(t.bias),
            num(t.sd),
            num(t.se),
            num(t.cp),
            num(t.mc_se),
        ])
        .map_err(csv_write)?;
    }
    finish_csv(w)
}

/// True and averaged estimated baseline on the curve grid.
pub fn curve_csv(summary: &SimSummary) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "true", "mean_estimate"]).map_err(csv_write)?;
    for &(t, truth, mean) in &summary.curve {
        w.write_record([num(t), num(truth), num(mean)]).map_err(csv_write)?;
    }
    finish_csv(w)
}

pub fn replicates_csv(summary: &SimSummary, names: &[String]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["replicate".to_string(), "converged".into(), "iterations".into()];
    for n in names {
        header.push(format!("{n}_est"));
        header.push(format!("{n}_se"));
    }
    header.push("error".into());
    w.write_record(&header).map_err(csv_write)?;
    for o in &summary.outcomes {
        let mut rec = vec![o.index.to_string(), o.converged.to_string(), o.iterations.to_string()];
        for (e, s) in o.estimates.iter().zip(&o.std_errors) {
            rec.push(num(*e));
            rec.push(num(*s));
        }
        rec.push(o.error.clone().unwrap_or_default());
        w.write_record(&rec).map_err(csv_write)?;
    }
    finish_csv(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutput {
    pub metadata: RunMetadata,
    pub scenario: SimScenario,
    pub summary: SimSummary,
}

/// Writes `summary.csv`, `curve.csv`, `replicates.csv`, `summary.json` and
/// `metadata.json`.
pub fn emit_simulation(dir: &Path, out: &SimulationOutput, names: &[String]) -> Result<()> {
    prepare_dir(dir)?;
    let meta = &out.metadata;
    write_with_preamble(dir, "summary.csv", meta, summary_csv(&out.summary)?)?;
    write_with_preamble(dir, "curve.csv", meta, curve_csv(&out.summary)?)?;
    write_with_preamble(dir, "replicates.csv", meta, replicates_csv(&out.summary, names)?)?;
    write_json(dir, "summary.json", out)?;
    write_json(dir, "metadata.json", meta)
}

/// Flat key-value scenario file. Keys left out fall back to `preset`
/// (default `scenario1`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub preset: Option<String>,
    pub name: Option<String>,
    /// `logarithmic`, `linear` or `custom`.
    pub baseline: Option<String>,
    pub scale: Option<f64>,
    pub rate: Option<f64>,
    pub slope: Option<f64>,
    pub spline_order: Option<usize>,
    pub coefficients: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
    /// `normal` or `bernoulli`, one per covariate.
    pub covariates: Option<Vec<String>>,
    pub bernoulli_p: Option<f64>,
    pub tau: Option<f64>,
    pub max_visits: Option<usize>,
    pub cutpoints: Option<Vec<i64>>,
    pub frailty_var: Option<f64>,
    pub boxcox_rho: Option<f64>,
    pub seed: Option<u64>,
    pub estimate_cutpoints: Option<bool>,
    pub interior_knots: Option<usize>,
    pub order: Option<usize>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn scenario(&self) -> Result<SimScenario> {
        let mut s = match self.preset.as_deref() {
            None | Some("scenario1") => SimScenario::scenario1(),
            Some("scenario2") => SimScenario::scenario2(),
            Some(other) => return Err(Error::Config(format!("unknown preset {other:?}"))),
        };
        if let Some(n) = &self.name {
            s.name = n.clone();
        }
        let kind = self.baseline.as_deref().map(str::to_string).unwrap_or_else(|| match s.baseline {
            Baseline::Logarithmic { .. } => "logarithmic".into(),
            Baseline::Linear { .. } => "linear".into(),
            Baseline::Custom { .. } => "custom".into(),
        });
        s.baseline = match kind.as_str() {
            "logarithmic" => {
                let (scale0, rate0) = match s.baseline {
                    Baseline::Logarithmic { scale, rate } => (scale, rate),
                    _ => (15.0, 0.7),
                };
                Baseline::Logarithmic { scale: self.scale.unwrap_or(scale0), rate: self.rate.unwrap_or(rate0) }
            }
            "linear" => {
                let slope0 = match s.baseline {
                    Baseline::Linear { slope } => slope,
                    _ => 3.0,
                };
                Baseline::Linear { slope: self.slope.unwrap_or(slope0) }
            }
            "custom" => Baseline::Custom {
                order: self.spline_order.unwrap_or(3),
                coefficients: self
                    .coefficients
                    .clone()
                    .ok_or_else(|| Error::Config("custom baseline needs coefficients".into()))?,
            },
            other => return Err(Error::Config(format!("unknown baseline {other:?}"))),
        };
        if let Some(b) = &self.beta {
            s.beta = b.clone();
        }
        if let Some(c) = &self.covariates {
            let p = self.bernoulli_p.unwrap_or(0.5);
            s.covariates = c
                .iter()
                .map(|k| match k.as_str() {
                    "normal" => Ok(CovariateDist::Normal),
                    "bernoulli" => Ok(CovariateDist::Bernoulli { p }),
                    other => Err(Error::Config(format!("unknown covariate distribution {other:?}"))),
                })
                .collect::<Result<_>>()?;
        }
        if let Some(v) = self.tau {
            s.tau = v;
        }
        if let Some(v) = self.max_visits {
            s.max_visits = v;
        }
        if let Some(v) = &self.cutpoints {
            s.cutpoints = v.clone();
        }
        if let Some(v) = self.frailty_var {
            s.frailty_var = v;
        }
        if let Some(v) = self.boxcox_rho {
            s.boxcox_rho = v;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        s.validate()?;
        Ok(s)
    }
}

/// Parses `a:b` (inclusive) or a comma list such as `1,3,5`.
pub fn parse_grid(text: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("cannot parse grid {text:?}; use a:b or a,b,c"));
    let values: Vec<usize> = if let Some((a, b)) = text.split_once(':') {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        text.split(',').map(|v| v.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if values.is_empty() {
        return Err(bad());
    }
    Ok(values)
}

/// Parses a comma list of integer cut points.
pub fn parse_cutpoints(text: &str) -> Result<Vec<i64>> {
    text.split(',')
        .map(|v| v.trim().parse().map_err(|_| Error::Config(format!("cannot parse cut points {text:?}"))))
        .collect()
}

/// Fit configuration echoed into outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRunConfig {
    pub data: String,
    pub ingest_levels: Option<u32>,
    pub merge_above: Option<u32>,
    pub tau: Option<f64>,
    pub grid_points: usize,
    pub fit: FitConfig,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ingest(text: &str) -> Result<Ingested> {
        ingest_reader(text.as_bytes(), &IngestOptions::default())
    }

    #[test]
    fn two_rows_one_subject() {
        let got = ingest("subject_id,visit_time,response,age\na,4.0,2,30\na,2.0,1,30\n").unwrap();
        assert_eq!(got.data.n_subjects(), 1);
        let s = &got.data.subjects()[0];
        assert_eq!(s.visits, vec![2.0, 4.0]);
        assert_eq!(s.responses, vec![1, 2]);
        assert_eq!(got.covariate_names, vec!["age"]);
        assert_eq!(got.data.levels(), 2);
    }

    #[test]
    fn errors_name_rows() {
        let dup = ingest("subject_id,visit_time,response\na,1,1\nb,1,2\na,1,2\n").unwrap_err();
        assert!(matches!(dup, Error::Csv { row: 4, .. }), "{dup}");
        let vary = ingest("subject_id,visit_time,response,x\na,1,1,0\na,2,2,1\n").unwrap_err();
        assert!(matches!(vary, Error::Csv { row: 3, .. }), "{vary}");
        let parse = ingest("subject_id,visit_time,response\na,1,1\na,two,1\n").unwrap_err();
        assert!(matches!(parse, Error::Csv { row: 3, .. }), "{parse}");
        let zero = ingest("subject_id,visit_time,response\na,1,0\n").unwrap_err();
        assert!(matches!(zero, Error::Csv { row: 2, .. }), "{zero}");
        let opts = IngestOptions { levels: Some(2), ..Default::default() };
        let high = ingest_reader("subject_id,visit_time,response\na,1,1\na,2,3\n".as_bytes(), &opts).unwrap_err();
        assert!(matches!(high, Error::Csv { row: 3, .. }), "{high}");
        assert!(ingest("subject_id,visit_time\na,1\n").is_err());
    }

    #[test]
    fn merge_above_collapses_top_levels() {
        let opts = IngestOptions { merge_above: Some(2), ..Default::default() };
        let got = ingest_reader("subject_id,visit_time,response\na,1,1\na,2,5\na,3,2\n".as_bytes(), &opts).unwrap();
        assert_eq!(got.data.subjects()[0].responses, vec![1, 2, 2]);
        assert_eq!(got.data.levels(), 2);
    }

    #[test]
    fn comments_are_skipped() {
        let got = ingest("# a note\nsubject_id,visit_time,response\n# another\na,1,1\na,2,2\n").unwrap();
        assert_eq!(got.data.n_obs(), 2);
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("1:5").unwrap(), vec![1, 2, 3, 4, 5]);
        assert_eq!(parse_grid("2,4").unwrap(), vec![2, 4]);
        assert!(parse_grid("3:1").is_err());
        assert!(parse_grid("x").is_err());
        assert_eq!(parse_cutpoints("1, 3,8").unwrap(), vec![1, 3, 8]);
    }

    #[test]
    fn scenario_file_overrides_preset() {
        let f = ScenarioFile::parse("preset = \"scenario2\"\nfrailty_var = 0.1\nseed = 9\n").unwrap();
        let s = f.scenario().unwrap();
        assert_eq!(s.beta, vec![1.0, 0.0]);
        assert_eq!(s.frailty_var, 0.1);
        assert_eq!(s.seed, 9);
        assert!(ScenarioFile::parse("bogus = 1\n").is_err());
        let custom = ScenarioFile::parse("baseline = \"custom\"\nspline_order = 2\ncoefficients = [1.0, 2.0, 3.0]\n")
            .unwrap()
            .scenario()
            .unwrap();
        assert!(matches!(custom.baseline, Baseline::Custom { order: 2, .. }));
        assert!(ScenarioFile::parse("boxcox_rho = 0.5\n").unwrap().scenario().is_err());
    }
}
