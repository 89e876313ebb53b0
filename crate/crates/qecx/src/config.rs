//! Experiment configuration files.

use colorcode::gadgets::{self, Cardinal, GadgetError, Scheme};
use iontrap::{ArchKind, Scenario};
use pframe::ProtocolTree;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Gadget(#[from] GadgetError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GadgetSpec {
    Memory {
        scheme: String,
        #[serde(default = "yes")]
        flagged: bool,
        state: String,
        #[serde(default = "three")]
        rounds: usize,
    },
    PrepVerified {
        state: String,
    },
    PrepStabilizer {
        state: String,
    },
    TeleportLs {
        scheme: String,
        state: String,
    },
    TeleportDirect {
        #[serde(default = "yes")]
        repeated: bool,
        state: String,
    },
}

fn yes() -> bool {
    true
}

fn three() -> usize {
    3
}

impl GadgetSpec {
    fn state_str(&self) -> &str {
        match self {
            GadgetSpec::Memory { state, .. }
            | GadgetSpec::PrepVerified { state }
            | GadgetSpec::PrepStabilizer { state }
            | GadgetSpec::TeleportLs { state, .. }
            | GadgetSpec::TeleportDirect { state, .. } => state,
        }
    }

    /// Input states to run: one cardinal state, or all six for `"all"`.
    pub fn states(&self) -> Result<Vec<Cardinal>, GadgetError> {
        match self.state_str() {
            "all" => Ok(Cardinal::ALL.to_vec()),
            s => Ok(vec![Cardinal::parse(s)?]),
        }
    }

    /// Noiseless tree for one input state.
    pub fn build(&self, state: Cardinal) -> Result<ProtocolTree, GadgetError> {
        match self {
            GadgetSpec::Memory { scheme, flagged, rounds, .. } => gadgets::memory(Scheme::parse(scheme)?, *flagged, state, *rounds),
            GadgetSpec::PrepVerified { .. } => gadgets::prep_verified(state),
            GadgetSpec::PrepStabilizer { .. } => gadgets::prep_stabilizer(state),
            GadgetSpec::TeleportLs { scheme, .. } => gadgets::teleport_ls(state, Scheme::parse(scheme)?),
            GadgetSpec::TeleportDirect { repeated, .. } => gadgets::teleport_direct(state, *repeated),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    /// Single-rate depolarizing circuit noise swept over `p`.
    Scem { p: Vec<f64> },
    /// Scheduled trapped-ion noise swept over the dephasing time (seconds).
    Multichannel { arch: String, scenario: String, t2: Vec<f64> },
}

impl NoiseSpec {
    pub fn sweep(&self) -> &[f64] {
        match self {
            NoiseSpec::Scem { p } => p,
            NoiseSpec::Multichannel { t2, .. } => t2,
        }
    }

    pub fn param_name(&self) -> &'static str {
        match self {
            NoiseSpec::Scem { .. } => "p",
            NoiseSpec::Multichannel { .. } => "t2",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub gadget: GadgetSpec,
    pub noise: NoiseSpec,
    /// First batch per point; later batches double the total.
    pub shots: u64,
    /// Stop doubling once a point has this many failures; 0 runs `shots` only.
    #[serde(default = "default_min_failures")]
    pub min_failures: u64,
    #[serde(default = "default_max_shots")]
    pub max_shots: u64,
    #[serde(default)]
    pub seed: u64,
    /// 0 uses every core; 1 runs on the calling thread.
    #[serde(default)]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Target logical error rate for the `footprint` subcommand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_pl: Option<f64>,
}

fn default_min_failures() -> u64 {
    100
}

fn default_max_shots() -> u64 {
    100_000_000
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self, ConfigError> {
        let c: ExperimentConfig = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let s = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_json(&s)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.shots == 0 {
            return bad("shots must be at least 1".into());
        }
        if self.max_shots < self.shots {
            return bad(format!("max_shots {} is below shots {}", self.max_shots, self.shots));
        }
        let sweep = self.noise.sweep();
        if sweep.is_empty() {
            return bad("the noise sweep is empty".into());
        }
        if sweep.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("the noise sweep must be strictly increasing".into());
        }
        match &self.noise {
            NoiseSpec::Scem { p } => {
                if p.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                    return bad("p must lie in [0, 1]".into());
                }
            }
            NoiseSpec::Multichannel { arch, scenario, t2 } => {
                if ArchKind::parse(arch).is_none() {
                    return bad(format!("unknown architecture {arch:?}"));
                }
                if Scenario::parse(scenario).is_none() {
                    return bad(format!("unknown scenario {scenario:?}"));
                }
                if t2.iter().any(|&x| !(x > 0.0)) {
                    return bad("t2 must be positive".into());
                }
            }
        }
        if let Some(t) = self.target_pl {
            if !(t > 0.0 && t < 1.0) {
                return bad("target_pl must lie in (0, 1)".into());
            }
        }
        self.gadget.states()?;
        match &self.gadget {
            GadgetSpec::Memory { scheme, .. } | GadgetSpec::TeleportLs { scheme, .. } => {
                Scheme::parse(scheme)?;
            }
            _ => {}
        }
        Ok(())
    }

    /// Stable 64-bit hash of everything that affects the numbers: the
    /// config minus worker count and output path.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.workers = 0;
        c.output = None;
        let text = serde_json::to_string(&c).expect("config serializes");
        format!("{:016x}", fnv1a(text.as_bytes()))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}
