//! CSV tables and versioned JSON documents.
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! yields the same bits.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bnn::{BnnPosterior, Dataset, GaussianFactor};
use crate::decompose::{AcquisitionScore, AlRecord};
use crate::envs::TransitionBatch;
use crate::mlp::{MlpArch, MlpParams};
use crate::policy::{FrontierRecord, PolicyNet};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Shortest decimal that parses back to `x`.
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if x != 0.0 && x.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// A header plus numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn prefixed(&self, prefix: &str) -> Vec<usize> {
        let mut cols: Vec<(usize, usize)> = self
            .header
            .iter()
            .enumerate()
            .filter_map(|(i, h)| {
                h.strip_prefix(prefix)
                    .and_then(|rest| rest.parse::<usize>().ok())
                    .map(|j| (j, i))
            })
            .collect();
        cols.sort();
        cols.into_iter().map(|(_, i)| i).collect()
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(self.to_csv_string().as_bytes())?;
        Ok(())
    }

    /// Parse a numeric CSV. Errors name the offending data row (1-based).
    pub fn read(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_path(path)
            .map_err(|e| format_err(path, e.to_string()))?;
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| format_err(path, e.to_string()))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        if header.is_empty() || header.iter().all(|h| h.is_empty()) {
            return Err(format_err(path, "missing header"));
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let row_no = i + 1;
            let rec = rec.map_err(|e| format_err(path, format!("row {row_no}: {e}")))?;
            if rec.len() != header.len() {
                return Err(format_err(
                    path,
                    format!("row {row_no}: expected {} fields, found {}", header.len(), rec.len()),
                ));
            }
            let mut row = Vec::with_capacity(rec.len());
            for (j, cell) in rec.iter().enumerate() {
                let v = cell.trim().parse::<f64>().map_err(|_| {
                    format_err(path, format!("row {row_no}, column '{}': cannot parse '{cell}'", header[j]))
                })?;
                row.push(v);
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }
}

fn names(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}{i}"))
}

pub fn dataset_table(data: &Dataset) -> Table {
    let mut t = Table::new(names("x_", data.input_dim()).chain(names("y_", data.output_dim())).collect());
    for i in 0..data.len() {
        t.rows.push([data.input(i), data.target(i)].concat());
    }
    t
}

pub fn write_dataset(data: &Dataset, path: &Path) -> Result<()> {
    dataset_table(data).write(path)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let t = Table::read(path)?;
    let xs = t.prefixed("x_");
    let ys = t.prefixed("y_");
    if xs.is_empty() || ys.is_empty() || xs.len() + ys.len() != t.header.len() {
        return Err(format_err(path, "dataset header must be x_0..,y_0.."));
    }
    if t.rows.is_empty() {
        return Err(format_err(path, "dataset has no rows"));
    }
    let pick = |cols: &[usize]| -> Vec<f64> {
        t.rows.iter().flat_map(|r| cols.iter().map(move |&c| r[c])).collect()
    };
    Dataset::from_flat(t.rows.len(), xs.len(), ys.len(), pick(&xs), pick(&ys))
}

pub fn transitions_table(b: &TransitionBatch) -> Table {
    let mut t = Table::new(
        names("s_", b.state_dim)
            .chain(names("a_", b.action_dim))
            .chain(names("sp_", b.state_dim))
            .collect(),
    );
    for i in 0..b.len() {
        t.rows.push([b.state(i), b.action(i), b.next_state(i)].concat());
    }
    t
}

pub fn write_transitions(b: &TransitionBatch, path: &Path) -> Result<()> {
    transitions_table(b).write(path)
}

pub fn is_transition_header(header: &[String]) -> bool {
    header.first().is_some_and(|h| h == "s_0")
}

pub fn read_transitions(path: &Path) -> Result<TransitionBatch> {
    let t = Table::read(path)?;
    let (s, a, sp) = (t.prefixed("s_"), t.prefixed("a_"), t.prefixed("sp_"));
    if s.is_empty() || a.is_empty() || s.len() != sp.len() || s.len() + a.len() + sp.len() != t.header.len() {
        return Err(format_err(path, "transition header must be s_0..,a_0..,sp_0.."));
    }
    let pick = |cols: &[usize]| -> Vec<f64> {
        t.rows.iter().flat_map(|r| cols.iter().map(move |&c| r[c])).collect()
    };
    TransitionBatch::new(s.len(), a.len(), pick(&s), pick(&a), pick(&sp))
}

pub fn scores_table(scores: &[AcquisitionScore]) -> Table {
    let d = scores.first().map_or(1, |s| s.x.len());
    let mut t = Table::new(
        names("x_", d)
            .chain(["total_entropy", "aleatoric_entropy", "epistemic_score"].map(String::from))
            .collect(),
    );
    for s in scores {
        let mut row = s.x.clone();
        row.extend([s.total_entropy, s.aleatoric_entropy, s.epistemic_score]);
        t.rows.push(row);
    }
    t
}

pub fn al_table(records: &[AlRecord]) -> Table {
    let mut t = Table::new(
        ["round", "dataset_size", "test_log_likelihood", "mean_epistemic_score"]
            .map(String::from)
            .to_vec(),
    );
    for r in records {
        t.rows.push(vec![
            r.round as f64,
            r.dataset_size as f64,
            r.test_log_likelihood,
            r.mean_epistemic_score,
        ]);
    }
    t
}

pub fn frontier_table(records: &[FrontierRecord]) -> Table {
    let mut t = Table::new(
        ["beta", "seed", "expected_model_cost", "expected_true_cost", "model_bias"]
            .map(String::from)
            .to_vec(),
    );
    for r in records {
        t.rows.push(vec![
            r.beta,
            r.seed as f64,
            r.expected_model_cost,
            r.expected_true_cost,
            r.model_bias,
        ]);
    }
    t
}

pub fn trace_table(name: &str, values: &[f64]) -> Table {
    let mut t = Table::new(vec!["step".into(), name.into()]);
    t.rows = values.iter().enumerate().map(|(i, &v)| vec![i as f64, v]).collect();
    t
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    format_version: u32,
    arch: Vec<usize>,
    lambda: f64,
    gamma: f64,
    sigma: Vec<f64>,
    weight_factors: Vec<GaussianFactor>,
    latent_factors: Vec<GaussianFactor>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyDocument {
    format_version: u32,
    arch: Vec<usize>,
    action_low: Vec<f64>,
    action_high: Vec<f64>,
    params: Vec<f64>,
}

fn check_version(v: u32) -> Result<()> {
    if v != FORMAT_VERSION {
        return Err(Error::invalid(format!(
            "unsupported format_version {v} (expected {FORMAT_VERSION})"
        )));
    }
    Ok(())
}

pub fn model_to_json(p: &BnnPosterior) -> Result<String> {
    let doc = ModelDocument {
        format_version: FORMAT_VERSION,
        arch: p.arch.layer_sizes().to_vec(),
        lambda: p.prior_weight_variance,
        gamma: p.prior_latent_variance,
        sigma: p.output_noise_variance.clone(),
        weight_factors: p.weight_factors.clone(),
        latent_factors: p.latent_factors.clone(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn model_from_json(s: &str) -> Result<BnnPosterior> {
    let doc: ModelDocument = serde_json::from_str(s)?;
    check_version(doc.format_version)?;
    let p = BnnPosterior {
        arch: MlpArch::new(doc.arch)?,
        weight_factors: doc.weight_factors,
        latent_factors: doc.latent_factors,
        prior_weight_variance: doc.lambda,
        prior_latent_variance: doc.gamma,
        output_noise_variance: doc.sigma,
    };
    p.validate()?;
    Ok(p)
}

pub fn save_model(p: &BnnPosterior, path: &Path) -> Result<()> {
    fs::write(path, model_to_json(p)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<BnnPosterior> {
    model_from_json(&fs::read_to_string(path)?).map_err(|e| with_path(e, path))
}

pub fn policy_to_json(p: &PolicyNet) -> Result<String> {
    let doc = PolicyDocument {
        format_version: FORMAT_VERSION,
        arch: p.arch.layer_sizes().to_vec(),
        action_low: p.action_low.clone(),
        action_high: p.action_high.clone(),
        params: p.params.values.clone(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn policy_from_json(s: &str) -> Result<PolicyNet> {
    let doc: PolicyDocument = serde_json::from_str(s)?;
    check_version(doc.format_version)?;
    let arch = MlpArch::new(doc.arch)?;
    let p = PolicyNet {
        params: MlpParams::from_values(&arch, doc.params)?,
        arch,
        action_low: doc.action_low,
        action_high: doc.action_high,
    };
    p.validate()?;
    Ok(p)
}

pub fn save_policy(p: &PolicyNet, path: &Path) -> Result<()> {
    fs::write(path, policy_to_json(p)?)?;
    Ok(())
}

pub fn load_policy(path: &Path) -> Result<PolicyNet> {
    policy_from_json(&fs::read_to_string(path)?).map_err(|e| with_path(e, path))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Json(j) => format_err(path, j.to_string()),
        Error::InvalidParameter(m) | Error::Shape(m) => format_err(path, m),
        e => e,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{heteroskedastic_env, make_dataset};

    #[test]
    fn floats_round_trip_through_text() {
        for x in [0.0, -0.0, 1.0, 0.1, 1.0 / 3.0, 1e-300, 6.02e23, -2.5e-7, f64::MAX, f64::MIN_POSITIVE] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(format_float(0.5), "0.5");
        assert_eq!(format_float(1e-7), "1e-7");
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let d = make_dataset(&heteroskedastic_env(), 40, 3).unwrap();
        write_dataset(&d, &path).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), d);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x_0,y_0\n"));
    }

    #[test]
    fn malformed_row_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "x_0,y_0\n1,2\n3,oops\n").unwrap();
        let msg = read_dataset(&path).unwrap_err().to_string();
        assert!(msg.contains("row 2"), "{msg}");
        fs::write(&path, "x_0,y_0\n1,2\n3\n").unwrap();
        let msg = read_dataset(&path).unwrap_err().to_string();
        assert!(msg.contains("row 2"), "{msg}");
    }

    #[test]
    fn model_json_is_bit_stable() {
        let d = make_dataset(&heteroskedastic_env(), 10, 1).unwrap();
        let mut p = BnnPosterior::for_dataset(&Default::default(), &d, 4).unwrap();
        p.weight_factors[0].mean = 1.0 / 3.0;
        p.latent_factors[2].log_variance = -1e-300;
        let s = model_to_json(&p).unwrap();
        let q = model_from_json(&s).unwrap();
        assert_eq!(p, q);
        assert_eq!(model_to_json(&q).unwrap(), s);
    }

    #[test]
    fn model_json_rejects_unknown_version_and_fields() {
        let d = make_dataset(&heteroskedastic_env(), 3, 1).unwrap();
        let p = BnnPosterior::for_dataset(&Default::default(), &d, 4).unwrap();
        let s = model_to_json(&p).unwrap();
        assert!(model_from_json(&s.replacen("\"format_version\": 1", "\"format_version\": 9", 1)).is_err());
        assert!(model_from_json(&s.replacen('{', "{\"extra\": 1,", 1)).is_err());
    }

    #[test]
    fn policy_json_round_trip() {
        let p = PolicyNet::new(1, &[5], vec![-1.0], vec![1.0], 2).unwrap();
        let q = policy_from_json(&policy_to_json(&p).unwrap()).unwrap();
        assert_eq!(p, q);
    }
}
