//! Persistence: versioned JSON documents, CSV tables and flat config files.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::functionals::aux_from_state;
use crate::integrator::{State, Trajectory};
use crate::ladder::SweepAtlas;

pub const SCHEMA: &str = "boundstate-lab/1";

/// Every JSON output: schema tag, the resolved configuration, then the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document<C, T> {
    pub schema: String,
    pub config: C,
    pub result: T,
}

impl<C, T> Document<C, T> {
    pub fn new(config: C, result: T) -> Self {
        Self { schema: SCHEMA.to_string(), config, result }
    }
}

pub fn to_json<C: Serialize, T: Serialize>(config: &C, result: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Document::new(config, result))?;
    s.push('\n');
    Ok(s)
}

/// Parses a document and rejects any other schema tag.
pub fn from_json<C: DeserializeOwned, T: DeserializeOwned>(text: &str) -> Result<Document<C, T>> {
    let doc: Document<C, T> = serde_json::from_str(text)?;
    if doc.schema != SCHEMA {
        return Err(LabError::Config(format!("unsupported schema '{}'", doc.schema)));
    }
    Ok(doc)
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}

pub const TRAJECTORY_HEADER: [&str; 5] = ["r", "u", "up", "v", "vp"];

pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    for s in &traj.samples {
        w.write_record([s.r, s.u, s.up, s.v, s.vp].map(fmt_real))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory_csv<R: Read>(input: R) -> Result<Vec<State>> {
    let mut rd = csv::Reader::from_reader(input);
    if rd.headers()?.iter().ne(TRAJECTORY_HEADER) {
        return Err(LabError::Config("unexpected trajectory header".into()));
    }
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let x: Vec<f64> = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| LabError::Config(format!("bad real '{f}': {e}"))))
            .collect::<Result<_>>()?;
        if x.len() != 5 {
            return Err(LabError::Config(format!("expected 5 columns, got {}", x.len())));
        }
        out.push(State { r: x[0], u: x[1], up: x[2], v: x[3], vp: x[4] });
    }
    Ok(out)
}

pub const FUNCTIONALS_HEADER: [&str; 22] = [
    "r", "u", "up", "v", "vp", "E", "E_hat", "P", "P1", "P2", "omega", "rho", "Q", "Q1", "Q2", "Qn", "M", "T1", "T2",
    "B0", "phi_n", "varpi",
];

/// Functional traces at every sample; undefined entries are empty cells.
pub fn write_functionals_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FUNCTIONALS_HEADER)?;
    for s in &traj.samples {
        let a = aux_from_state(&traj.field, s);
        let mut row: Vec<String> = [s.r, s.u, s.up, s.v, s.vp, a.e, a.e_hat, a.p, a.p1, a.p2].map(fmt_real).to_vec();
        row.push(fmt_opt(a.omega));
        row.extend([a.rho, a.q, a.q1, a.q2, a.qn, a.m].map(fmt_real));
        row.extend([a.t1, a.t2, a.b0, a.phi_n, a.varpi].map(fmt_opt));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per shot: `alpha, node_count, class_tag, z_1..z_m, E_negative_radius`,
/// with the zero columns padded to the longest row.
pub fn write_sweep_csv<W: Write>(atlas: &SweepAtlas, out: W) -> Result<()> {
    let m = atlas.rows.iter().map(|r| r.zeros.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["alpha".to_string(), "node_count".into(), "class_tag".into()];
    header.extend((1..=m).map(|i| format!("z_{i}")));
    header.push("E_negative_radius".into());
    w.write_record(&header)?;
    for row in &atlas.rows {
        let mut rec = vec![fmt_real(row.alpha), row.class.node_count().to_string(), row.class.tag().to_string()];
        rec.extend((0..m).map(|i| row.zeros.get(i).copied().map(fmt_real).unwrap_or_default()));
        rec.push(fmt_opt(row.class.witness().and_then(|w| w.energy_nonpositive_at)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses `key = value` lines; `#` starts a comment. Duplicate keys are errors.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| LabError::Config(format!("line {}: expected key=value", i + 1)))?;
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(LabError::Config(format!("line {}: empty key", i + 1)));
        }
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(LabError::Config(format!("line {}: duplicate key '{key}'", i + 1)));
        }
    }
    Ok(map)
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    parse_config(&fs::read_to_string(path)?)
}

/// Writes through a temporary sibling and renames, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
