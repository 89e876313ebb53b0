//! Monte Carlo runs over a noise sweep.

use crate::config::{ExperimentConfig, GadgetSpec, NoiseSpec};
use crate::stats::wilson;
use colorcode::gadgets::{Cardinal, GadgetError};
use iontrap::{ArchKind, Architecture, LowerError, Scenario};
use pframe::noise::{scem_attach, NoiseError};
use pframe::{execute, validate_tree, ExecError, ExecOptions, ProtocolTree, ScemParams, Tally};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::Instant;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("tree {tree} failed validation: {report}")]
    Validation { tree: String, report: String },
    #[error(transparent)]
    Gadget(#[from] GadgetError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Lower(#[from] LowerError),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub param: f64,
    /// Input state, or "avg" for the pooled row over all states.
    pub state: String,
    pub shots: u64,
    pub discards: u64,
    pub failures: u64,
    /// failures / (shots - discards); 0 when nothing was kept.
    pub p_l: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub wall_s: f64,
    /// Shots ending at each leaf, keyed by node id.
    pub branches: BTreeMap<u32, u64>,
}

impl PointResult {
    pub fn from_tally(param: f64, state: &str, t: &Tally, wall_s: f64) -> Self {
        let kept = t.kept();
        let (ci_low, ci_high) = wilson(t.failures, kept);
        PointResult {
            param,
            state: state.into(),
            shots: t.shots,
            discards: t.discards,
            failures: t.failures,
            p_l: if kept == 0 { 0.0 } else { t.failures as f64 / kept as f64 },
            ci_low,
            ci_high,
            wall_s,
            branches: t.terminals.iter().map(|(&k, &v)| (k as u32, v)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config_hash: String,
    pub seed: u64,
    pub gadget: String,
    pub param_name: String,
    pub points: Vec<PointResult>,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one batch, independent of worker count and of other points.
pub fn batch_seed(seed: u64, point: usize, state: usize, batch: u32) -> u64 {
    [point as u64, state as u64, batch as u64].iter().fold(splitmix(seed), |h, &k| splitmix(h ^ k))
}

/// Attaches the configured noise at one sweep value.
pub fn noisy_tree(tree: &ProtocolTree, noise: &NoiseSpec, value: f64) -> Result<ProtocolTree, RunError> {
    match noise {
        NoiseSpec::Scem { .. } => Ok(tree.map_circuits(|c| scem_attach(c, ScemParams { p: value }))?),
        NoiseSpec::Multichannel { arch, scenario, .. } => {
            let arch = Architecture::load(ArchKind::parse(arch).expect("validated config"));
            let scenario = Scenario::parse(scenario).expect("validated config");
            Ok(iontrap::compile(tree, &arch, scenario, value)?.0)
        }
    }
}

/// Runs `shots`, then doubles the total until `min_failures` or `max_shots`.
pub fn adaptive(tree: &ProtocolTree, cfg: &ExperimentConfig, point: usize, state: usize) -> Result<Tally, RunError> {
    let mut total = Tally::default();
    let mut batch = 0u32;
    let mut next = cfg.shots;
    loop {
        let opts = ExecOptions { seed: batch_seed(cfg.seed, point, state, batch), workers: cfg.workers, ..ExecOptions::default() };
        total.merge(&execute(tree, next, &opts)?);
        batch += 1;
        if cfg.min_failures == 0 || total.failures >= cfg.min_failures || total.shots >= cfg.max_shots {
            return Ok(total);
        }
        next = total.shots.min(cfg.max_shots - total.shots);
    }
}

/// Noiseless validation of a gadget tree.
pub fn check_tree(tree: &ProtocolTree, seed: u64) -> Result<(), RunError> {
    let rep = validate_tree(tree, 12, seed);
    if rep.is_ok() {
        return Ok(());
    }
    let report = rep.violations.iter().take(5).map(|v| format!("{v:?}")).collect::<Vec<_>>().join("; ");
    Err(RunError::Validation { tree: tree.name.clone(), report })
}

fn gadget_name(g: &GadgetSpec) -> String {
    serde_json::to_value(g).ok().and_then(|v| v.get("kind").and_then(|k| k.as_str().map(String::from))).unwrap_or_default()
}

/// Executes every (sweep value, input state) point of the config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult, RunError> {
    let states: Vec<Cardinal> = cfg.gadget.states()?;
    let trees: Vec<ProtocolTree> = states.iter().map(|&s| cfg.gadget.build(s)).collect::<Result<_, _>>()?;
    for t in &trees {
        check_tree(t, cfg.seed)?;
    }
    let mut points = Vec::new();
    for (pi, &value) in cfg.noise.sweep().iter().enumerate() {
        let mut pooled = Tally::default();
        let mut pooled_wall = 0.0;
        for (si, (tree, state)) in trees.iter().zip(&states).enumerate() {
            let start = Instant::now();
            let noisy = noisy_tree(tree, &cfg.noise, value)?;
            let tally = adaptive(&noisy, cfg, pi, si)?;
            let wall = start.elapsed().as_secs_f64();
            points.push(PointResult::from_tally(value, state.name(), &tally, wall));
            pooled.merge(&tally);
            pooled_wall += wall;
        }
        if trees.len() > 1 {
            pooled.terminals.clear();
            points.push(PointResult::from_tally(value, "avg", &pooled, pooled_wall));
        }
    }
    Ok(RunResult {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        gadget: gadget_name(&cfg.gadget),
        param_name: cfg.noise.param_name().into(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_seeds_differ() {
        let s = [batch_seed(1, 0, 0, 0), batch_seed(1, 0, 0, 1), batch_seed(1, 1, 0, 0), batch_seed(1, 0, 1, 0), batch_seed(2, 0, 0, 0)];
        let set: std::collections::BTreeSet<u64> = s.iter().copied().collect();
        assert_eq!(set.len(), s.len());
    }
}
