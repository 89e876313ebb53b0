//! Turns a schedule into timed idle markers and attaches the multi-channel
//! noise model to the protocol tree.

use crate::arch::{Architecture, QubitRoles};
use crate::schedule::{NodeSchedule, Schedule};
use crate::timing::{Scenario, TimingScenario};
use crate::transpile::{transpile, TranspileError};
use pframe::noise::{load_multichannel, multichannel_attach, NoiseError};
use pframe::{Circuit, Instr, MultiChannelParams, NodeId, ProtocolTree, Qubit};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error)]
pub enum LowerError {
    #[error(transparent)]
    Transpile(#[from] TranspileError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Arch(#[from] crate::arch::ArchError),
    #[error("node {node}: instruction {instr} has no scheduled time")]
    Unscheduled { node: NodeId, instr: usize },
    #[error("no noise parameters for {arch} under the {scenario} scenario")]
    NoParams { arch: String, scenario: String },
    #[error("schedule has {got} nodes, tree has {want}")]
    Shape { got: usize, want: usize },
}

/// Replaces idle markers with one timed idle per qubit gap: before each gate
/// or readout, the time since the qubit's previous operation, and at node
/// end, the rest of the node. Resets need no idle since they discard the
/// state. Noise is then attached by operation kind.
pub fn lower_node(
    circuit: &Circuit,
    ns: &NodeSchedule,
    n_qubits: u32,
    params: &MultiChannelParams,
    neighbors: &BTreeMap<Qubit, Vec<Qubit>>,
) -> Result<Circuit, LowerError> {
    if circuit.ideal {
        return Ok(multichannel_attach(circuit, params, neighbors)?);
    }
    let mut last = vec![0.0f64; n_qubits as usize];
    let mut instrs = Vec::with_capacity(circuit.instrs.len() * 2);
    let idle = |q: Qubit, dt_us: f64| Instr::Idle { qubits: vec![q], duration: Some(dt_us * 1e-6) };
    for (k, ins) in circuit.instrs.iter().enumerate() {
        match ins {
            Instr::Idle { .. } => {}
            Instr::Gate { .. } | Instr::Measure { .. } => {
                let (s, e) = ns.instr_times.get(k).copied().flatten().ok_or(LowerError::Unscheduled { node: ns.node, instr: k })?;
                for q in ins.qubits() {
                    if s > last[q as usize] {
                        instrs.push(idle(q, s - last[q as usize]));
                    }
                    last[q as usize] = e;
                }
                instrs.push(ins.clone());
            }
            Instr::Reset { qubit, .. } => {
                let (_, e) = ns.instr_times.get(k).copied().flatten().ok_or(LowerError::Unscheduled { node: ns.node, instr: k })?;
                last[*qubit as usize] = e;
                instrs.push(ins.clone());
            }
            _ => instrs.push(ins.clone()),
        }
    }
    for (q, &t) in last.iter().enumerate() {
        if ns.duration > t {
            instrs.push(idle(q as Qubit, ns.duration - t));
        }
    }
    let timed = Circuit { instrs, noisy: false, ideal: false };
    Ok(multichannel_attach(&timed, params, neighbors)?)
}

/// Lowers every node of `tree` with its node schedule.
pub fn lower_tree(
    tree: &ProtocolTree,
    schedule: &Schedule,
    params: &MultiChannelParams,
    neighbors: &BTreeMap<Qubit, Vec<Qubit>>,
) -> Result<ProtocolTree, LowerError> {
    if schedule.nodes.len() != tree.nodes.len() {
        return Err(LowerError::Shape { got: schedule.nodes.len(), want: tree.nodes.len() });
    }
    let mut out = tree.clone();
    for (node, ns) in out.nodes.iter_mut().zip(&schedule.nodes) {
        node.circuit = lower_node(&node.circuit, ns, tree.n_qubits, params, neighbors)?;
    }
    Ok(out)
}

/// Transpiles `tree` onto `arch` and lowers it with the shipped noise row for
/// the architecture and scenario at dephasing time `t2` (seconds).
pub fn compile(tree: &ProtocolTree, arch: &Architecture, scenario: Scenario, t2: f64) -> Result<(ProtocolTree, Schedule), LowerError> {
    let timing = TimingScenario::load(scenario);
    let schedule = transpile(tree, arch, &timing)?;
    let params = load_multichannel(arch.kind.name(), scenario.name(), t2)
        .ok_or_else(|| LowerError::NoParams { arch: arch.kind.name().into(), scenario: scenario.name().into() })?;
    let neighbors = arch.neighbor_map(&QubitRoles::from_tree(tree)?);
    let lowered = lower_tree(tree, &schedule, &params, &neighbors)?;
    Ok((lowered, schedule))
}
