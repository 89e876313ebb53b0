//! Pauli noise channels and the two attachment policies (single-parameter
//! circuit-level model and the multi-channel trapped-ion model).

use crate::circuit::{Circuit, Instr};
use crate::gate::Basis;
use crate::pauli::{Letter, PauliFrame, Qubit};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum NoiseChannel {
    Depol1 { p: f64, q: Qubit },
    Depol2 { p: f64, a: Qubit, b: Qubit },
    /// Two-qubit depolarizing spillover on a (gate target, neighbor) pair.
    Crosstalk { p: f64, target: Qubit, neighbor: Qubit },
    /// Classical flip of the node-local record bit `bit`.
    MeasFlip { p: f64, bit: u32 },
    /// Wrong preparation: X after a Z-basis reset, Z after an X-basis reset.
    ResetFlip { p: f64, q: Qubit, basis: Basis },
    /// Z with probability (1 - exp(-t/T2)) / 2.
    IdleDephase { t: f64, t2: f64, q: Qubit },
}

/// What one sampled outcome of a channel does to a shot.
#[derive(Clone, Debug, PartialEq)]
pub enum Effect {
    Pauli(Vec<(Qubit, Letter)>),
    FlipBit(u32),
}

const PAIRS: [(Letter, Letter); 15] = {
    use Letter::*;
    [
        (I, X), (I, Y), (I, Z),
        (X, I), (X, X), (X, Y), (X, Z),
        (Y, I), (Y, X), (Y, Y), (Y, Z),
        (Z, I), (Z, X), (Z, Y), (Z, Z),
    ]
};

impl NoiseChannel {
    /// Total probability that any non-identity outcome occurs.
    pub fn rate(&self) -> f64 {
        match *self {
            NoiseChannel::Depol1 { p, .. }
            | NoiseChannel::Depol2 { p, .. }
            | NoiseChannel::Crosstalk { p, .. }
            | NoiseChannel::MeasFlip { p, .. }
            | NoiseChannel::ResetFlip { p, .. } => p,
            NoiseChannel::IdleDephase { t, t2, .. } => idle_dephase_prob(t, t2).unwrap_or(0.0),
        }
    }

    /// Number of equiprobable outcomes conditional on an event.
    pub fn n_outcomes(&self) -> usize {
        match self {
            NoiseChannel::Depol1 { .. } => 3,
            NoiseChannel::Depol2 { .. } | NoiseChannel::Crosstalk { .. } => 15,
            _ => 1,
        }
    }

    pub fn letter_prob(&self) -> f64 {
        self.rate() / self.n_outcomes() as f64
    }

    pub fn effect(&self, k: usize) -> Effect {
        match *self {
            NoiseChannel::Depol1 { q, .. } => Effect::Pauli(vec![(q, Letter::NON_IDENTITY[k])]),
            NoiseChannel::Depol2 { a, b, .. } | NoiseChannel::Crosstalk { target: a, neighbor: b, .. } => {
                let (la, lb) = PAIRS[k];
                Effect::Pauli(vec![(a, la), (b, lb)])
            }
            NoiseChannel::MeasFlip { bit, .. } => Effect::FlipBit(bit),
            NoiseChannel::ResetFlip { q, basis, .. } => Effect::Pauli(vec![(
                q,
                match basis {
                    Basis::Z => Letter::X,
                    Basis::X => Letter::Z,
                },
            )]),
            NoiseChannel::IdleDephase { q, .. } => Effect::Pauli(vec![(q, Letter::Z)]),
        }
    }

    pub fn effect_frame(&self, k: usize) -> Option<PauliFrame> {
        match self.effect(k) {
            Effect::Pauli(v) => Some(PauliFrame::from_letters(v)),
            Effect::FlipBit(_) => None,
        }
    }

    pub fn qubits(&self) -> Vec<Qubit> {
        match *self {
            NoiseChannel::Depol1 { q, .. } | NoiseChannel::ResetFlip { q, .. } | NoiseChannel::IdleDephase { q, .. } => {
                vec![q]
            }
            NoiseChannel::Depol2 { a, b, .. } => vec![a, b],
            NoiseChannel::Crosstalk { target, neighbor, .. } => vec![target, neighbor],
            NoiseChannel::MeasFlip { .. } => vec![],
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            NoiseChannel::Depol1 { .. } => "depol1",
            NoiseChannel::Depol2 { .. } => "depol2",
            NoiseChannel::Crosstalk { .. } => "crosstalk",
            NoiseChannel::MeasFlip { .. } => "meas_flip",
            NoiseChannel::ResetFlip { .. } => "reset_flip",
            NoiseChannel::IdleDephase { .. } => "idle_dephase",
        }
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        let r = match *self {
            NoiseChannel::IdleDephase { t, t2, .. } => {
                idle_dephase_prob(t, t2)?;
                return Ok(());
            }
            _ => self.rate(),
        };
        if !(0.0..=1.0).contains(&r) {
            return Err(NoiseError::BadRate(r));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NoiseError {
    #[error("rate {0} outside [0, 1]")]
    BadRate(f64),
    #[error("negative idle duration {0}")]
    NegativeDuration(f64),
    #[error("non-positive T2 {0}")]
    BadT2(f64),
    #[error("circuit already carries noise channels")]
    AlreadyNoisy,
    #[error("idle marker at instruction {0} has no resolved duration")]
    UnresolvedIdle(usize),
}

/// Dephasing probability for an idle period `t` with coherence time `t2` (seconds).
pub fn idle_dephase_prob(t: f64, t2: f64) -> Result<f64, NoiseError> {
    if t < 0.0 {
        return Err(NoiseError::NegativeDuration(t));
    }
    if t2 <= 0.0 || t2.is_nan() {
        return Err(NoiseError::BadT2(t2));
    }
    if t2.is_infinite() {
        return Ok(0.0);
    }
    Ok(-0.5 * (-t / t2).exp_m1())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScemParams {
    pub p: f64,
}

impl ScemParams {
    pub fn new(p: f64) -> Result<Self, NoiseError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(NoiseError::BadRate(p));
        }
        Ok(Self { p })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiChannelParams {
    pub p_1q: f64,
    pub p_2q: f64,
    pub p_ct: f64,
    pub p_m: f64,
    pub p_r: f64,
    /// Seconds; infinity disables dephasing.
    pub t2: f64,
    pub scenario: String,
}

impl MultiChannelParams {
    pub fn validate(&self) -> Result<(), NoiseError> {
        for r in [self.p_1q, self.p_2q, self.p_ct, self.p_m, self.p_r] {
            if !(0.0..=1.0).contains(&r) {
                return Err(NoiseError::BadRate(r));
            }
        }
        if self.t2 <= 0.0 || self.t2.is_nan() {
            return Err(NoiseError::BadT2(self.t2));
        }
        Ok(())
    }

    /// The SCEM limit: every per-kind rate equal, no crosstalk, infinite T2.
    pub fn uniform(p: f64) -> Self {
        Self { p_1q: p, p_2q: p, p_ct: 0.0, p_m: p, p_r: p, t2: f64::INFINITY, scenario: "uniform".into() }
    }
}

/// Versioned Table VI rows, keyed by architecture then scenario.
#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct NoiseParamFile {
    pub version: u32,
    pub architectures: BTreeMap<String, BTreeMap<String, MultiChannelRow>>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct MultiChannelRow {
    pub p_1q: f64,
    pub p_2q: f64,
    pub p_ct: f64,
    pub p_m: f64,
    pub p_r: f64,
}

const NOISE_PARAMS: &str = include_str!("../data/noise_params.json");

/// Loads the shipped multi-channel parameters for `arch` ("AbaQusA",
/// "AbaQusS", "AbaQusX") and `scenario` ("current", "intermediate", "optimistic").
pub fn load_multichannel(arch: &str, scenario: &str, t2: f64) -> Option<MultiChannelParams> {
    let file: NoiseParamFile = serde_json::from_str(NOISE_PARAMS).expect("shipped noise table parses");
    let row = file.architectures.get(arch)?.get(scenario)?;
    Some(MultiChannelParams {
        p_1q: row.p_1q,
        p_2q: row.p_2q,
        p_ct: row.p_ct,
        p_m: row.p_m,
        p_r: row.p_r,
        t2,
        scenario: scenario.to_string(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum NoiseModel {
    None,
    Scem(ScemParams),
    MultiChannel(MultiChannelParams),
}

/// Attaches SCEM channels to a channel-free circuit.
pub fn scem_attach(circuit: &Circuit, params: ScemParams) -> Result<Circuit, NoiseError> {
    if circuit.noisy {
        return Err(NoiseError::AlreadyNoisy);
    }
    ScemParams::new(params.p)?;
    if circuit.ideal {
        return Ok(Circuit { noisy: true, ..circuit.clone() });
    }
    let p = params.p;
    let mut out = Vec::with_capacity(circuit.instrs.len() * 2);
    let mut bit = 0u32;
    for ins in &circuit.instrs {
        match ins {
            Instr::Gate { gate, qubits } => {
                out.push(ins.clone());
                if gate.arity() == 1 {
                    out.push(Instr::Noise(NoiseChannel::Depol1 { p, q: qubits[0] }));
                } else {
                    out.push(Instr::Noise(NoiseChannel::Depol2 { p, a: qubits[0], b: qubits[1] }));
                }
            }
            Instr::Idle { qubits, .. } => {
                out.push(ins.clone());
                for &q in qubits {
                    out.push(Instr::Noise(NoiseChannel::Depol1 { p, q }));
                }
            }
            Instr::Measure { qubit, .. } => {
                out.push(Instr::Noise(NoiseChannel::Depol1 { p, q: *qubit }));
                out.push(ins.clone());
                out.push(Instr::Noise(NoiseChannel::MeasFlip { p, bit }));
            }
            Instr::Reset { qubit, basis } => {
                out.push(ins.clone());
                out.push(Instr::Noise(NoiseChannel::ResetFlip { p, q: *qubit, basis: *basis }));
            }
            Instr::Noise(_) => return Err(NoiseError::AlreadyNoisy),
            _ => out.push(ins.clone()),
        }
        if ins.produces_bit() {
            bit += 1;
        }
    }
    Ok(Circuit { instrs: out, noisy: true, ideal: false })
}

/// Attaches the multi-channel model. `neighbors` maps a gate target to the
/// qubits receiving crosstalk; empty for architectures without crosstalk.
pub fn multichannel_attach(
    circuit: &Circuit,
    params: &MultiChannelParams,
    neighbors: &BTreeMap<Qubit, Vec<Qubit>>,
) -> Result<Circuit, NoiseError> {
    if circuit.noisy {
        return Err(NoiseError::AlreadyNoisy);
    }
    params.validate()?;
    if circuit.ideal {
        return Ok(Circuit { noisy: true, ..circuit.clone() });
    }
    let mut out = Vec::with_capacity(circuit.instrs.len() * 2);
    let mut bit = 0u32;
    for (k, ins) in circuit.instrs.iter().enumerate() {
        match ins {
            Instr::Gate { gate, qubits } => {
                out.push(ins.clone());
                if gate.arity() == 1 {
                    out.push(Instr::Noise(NoiseChannel::Depol1 { p: params.p_1q, q: qubits[0] }));
                } else {
                    out.push(Instr::Noise(NoiseChannel::Depol2 { p: params.p_2q, a: qubits[0], b: qubits[1] }));
                    if params.p_ct > 0.0 {
                        for &t in qubits {
                            for &n in neighbors.get(&t).map(|v| v.as_slice()).unwrap_or(&[]) {
                                if !qubits.contains(&n) {
                                    out.push(Instr::Noise(NoiseChannel::Crosstalk { p: params.p_ct, target: t, neighbor: n }));
                                }
                            }
                        }
                    }
                }
            }
            Instr::Idle { qubits, duration } => {
                let t = duration.ok_or(NoiseError::UnresolvedIdle(k))?;
                out.push(ins.clone());
                if t > 0.0 && params.t2.is_finite() {
                    for &q in qubits {
                        out.push(Instr::Noise(NoiseChannel::IdleDephase { t, t2: params.t2, q }));
                    }
                }
            }
            Instr::Measure { .. } => {
                out.push(ins.clone());
                out.push(Instr::Noise(NoiseChannel::MeasFlip { p: params.p_m, bit }));
            }
            Instr::Reset { qubit, basis } => {
                out.push(ins.clone());
                out.push(Instr::Noise(NoiseChannel::ResetFlip { p: params.p_r, q: *qubit, basis: *basis }));
            }
            Instr::Noise(_) => return Err(NoiseError::AlreadyNoisy),
            _ => out.push(ins.clone()),
        }
        if ins.produces_bit() {
            bit += 1;
        }
    }
    Ok(Circuit { instrs: out, noisy: true, ideal: false })
}

/// Attaches a model, passing channel-free circuits through for `None`.
pub fn attach(circuit: &Circuit, model: &NoiseModel, neighbors: &BTreeMap<Qubit, Vec<Qubit>>) -> Result<Circuit, NoiseError> {
    match model {
        NoiseModel::None => {
            if circuit.noisy {
                return Err(NoiseError::AlreadyNoisy);
            }
            Ok(Circuit { noisy: true, ..circuit.clone() })
        }
        NoiseModel::Scem(p) => scem_attach(circuit, *p),
        NoiseModel::MultiChannel(m) => multichannel_attach(circuit, m, neighbors),
    }
}
