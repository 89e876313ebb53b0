//! CSV and JSON result files.

use crate::run::{PointResult, RunResult};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};

pub const CSV_HEADER: [&str; 14] =
    ["config_hash", "seed", "gadget", "param_name", "param", "state", "shots", "discards", "failures", "p_l", "ci_low", "ci_high", "wall_s", "branches"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Option<Format> {
        match s {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EmitError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("bad branches field {0:?}")]
    Branches(String),
}

#[derive(Serialize, Deserialize)]
struct Row {
    config_hash: String,
    seed: u64,
    gadget: String,
    param_name: String,
    param: f64,
    state: String,
    shots: u64,
    discards: u64,
    failures: u64,
    p_l: f64,
    ci_low: f64,
    ci_high: f64,
    wall_s: f64,
    branches: String,
}

fn branches_text(b: &BTreeMap<u32, u64>) -> String {
    b.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}

fn parse_branches(s: &str) -> Result<BTreeMap<u32, u64>, EmitError> {
    s.split(';')
        .filter(|x| !x.is_empty())
        .map(|kv| {
            let (k, v) = kv.split_once('=').ok_or_else(|| EmitError::Branches(s.into()))?;
            Ok((k.parse().map_err(|_| EmitError::Branches(s.into()))?, v.parse().map_err(|_| EmitError::Branches(s.into()))?))
        })
        .collect()
}

pub fn emit_results<W: Write>(r: &RunResult, format: Format, out: W) -> Result<(), EmitError> {
    match format {
        Format::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            w.write_record(CSV_HEADER)?;
            for p in &r.points {
                w.serialize(Row {
                    config_hash: r.config_hash.clone(),
                    seed: r.seed,
                    gadget: r.gadget.clone(),
                    param_name: r.param_name.clone(),
                    param: p.param,
                    state: p.state.clone(),
                    shots: p.shots,
                    discards: p.discards,
                    failures: p.failures,
                    p_l: p.p_l,
                    ci_low: p.ci_low,
                    ci_high: p.ci_high,
                    wall_s: p.wall_s,
                    branches: branches_text(&p.branches),
                })?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// Reads results back. A header-only CSV gives an empty result with blank
/// metadata.
pub fn parse_results<R: Read>(input: R, format: Format) -> Result<RunResult, EmitError> {
    if format == Format::Json {
        return Ok(serde_json::from_reader(input)?);
    }
    let mut rd = csv::Reader::from_reader(input);
    let mut r = RunResult { config_hash: String::new(), seed: 0, gadget: String::new(), param_name: String::new(), points: vec![] };
    for row in rd.deserialize::<Row>() {
        let row = row?;
        r.config_hash = row.config_hash;
        r.seed = row.seed;
        r.gadget = row.gadget;
        r.param_name = row.param_name;
        r.points.push(PointResult {
            param: row.param,
            state: row.state,
            shots: row.shots,
            discards: row.discards,
            failures: row.failures,
            p_l: row.p_l,
            ci_low: row.ci_low,
            ci_high: row.ci_high,
            wall_s: row.wall_s,
            branches: parse_branches(&row.branches)?,
        });
    }
    Ok(r)
}
