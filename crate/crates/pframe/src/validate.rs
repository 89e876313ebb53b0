//! Tree validation: structural checks plus randomized noiseless runs along
//! every root-to-leaf path.

use crate::circuit::{BitRef, Instr, NodeId};
use crate::exec::{run_single, SingleOptions};
use crate::sample::keyed_rng;
use crate::tree::{Next, ProtocolTree};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

pub const DEFAULT_VALIDATION_SHOTS: u64 = 10_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    OperandRange,
    BadRef,
    /// A measurement declared deterministic flipped under randomization.
    NonDeterministicBit,
    DetectorFlip,
    /// An out-edge predicate changed value across randomized shots.
    PredicateVaries,
    /// Not exactly one out-edge predicate held.
    PredicatePartition,
    Exec,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub node: NodeId,
    pub node_name: String,
    pub instr: Option<usize>,
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub paths: usize,
    pub shots_per_path: u64,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn violation(tree: &ProtocolTree, node: NodeId, instr: Option<usize>, kind: ViolationKind, detail: String) -> Violation {
    Violation { node, node_name: tree.node(node).name.clone(), instr, kind, detail }
}

/// Operand bounds and record-reference scoping.
pub fn validate_structure(tree: &ProtocolTree) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, node) in tree.nodes.iter().enumerate() {
        let id = i as NodeId;
        let ref_ok = |b: BitRef, limit_self: u32| -> bool {
            if b.node == id {
                b.idx < limit_self
            } else {
                (b.node as usize) < tree.nodes.len()
                    && tree.is_ancestor_or_self(b.node, id)
                    && b.idx < tree.node(b.node).rec_len
            }
        };
        let mut cursor = 0u32;
        for (k, ins) in node.circuit.instrs.iter().enumerate() {
            if let Some(q) = ins.qubits().into_iter().find(|&q| q >= tree.n_qubits) {
                out.push(violation(tree, id, Some(k), ViolationKind::OperandRange, format!("qubit {q} >= {}", tree.n_qubits)));
            }
            if let Instr::Gate { gate, qubits } = ins {
                if qubits.len() != gate.arity() || (qubits.len() == 2 && qubits[0] == qubits[1]) {
                    out.push(violation(tree, id, Some(k), ViolationKind::OperandRange, format!("bad operands {qubits:?}")));
                }
            }
            for r in ins.refs() {
                if !ref_ok(r, cursor) {
                    out.push(violation(tree, id, Some(k), ViolationKind::BadRef, format!("{r:?}")));
                }
            }
            if ins.produces_bit() {
                cursor += 1;
            }
        }
        let mut refs = Vec::new();
        match &node.next {
            Next::Edges(es) => es.iter().for_each(|e| e.when.refs(&mut refs)),
            Next::Leaf(t) => {
                t.checks.iter().for_each(|c| c.flip.refs(&mut refs));
                t.checks.iter().filter_map(|c| c.decode.as_ref()).for_each(|d| d.refs(&mut refs));
                t.report.iter().for_each(|(_, e)| e.refs(&mut refs));
                for c in &t.checks {
                    if let Some(q) = c.observable.support().into_iter().find(|q| !t.alive.contains(q)) {
                        out.push(violation(tree, id, None, ViolationKind::OperandRange, format!("observable on dead qubit {q}")));
                    }
                }
            }
        }
        for r in refs {
            if !ref_ok(r, cursor) {
                out.push(violation(tree, id, None, ViolationKind::BadRef, format!("{r:?}")));
            }
        }
    }
    out
}

/// Structural checks, then `shots_per_path` randomized noiseless shots forced
/// along each root-to-leaf path.
pub fn validate_tree(tree: &ProtocolTree, shots_per_path: u64, seed: u64) -> ValidationReport {
    let mut report = ValidationReport { paths: 0, shots_per_path, violations: validate_structure(tree) };
    if !report.violations.is_empty() {
        return report;
    }
    let offsets = tree.offsets();
    let paths = tree.paths();
    report.paths = paths.len();
    let mut seen: BTreeSet<(NodeId, Option<usize>, String)> = BTreeSet::new();
    let mut push = |v: Violation, report: &mut ValidationReport| {
        let key = (v.node, v.instr, format!("{:?}", v.kind));
        if seen.insert(key) {
            report.violations.push(v);
        }
    };
    for (pi, path) in paths.iter().enumerate() {
        let mut first_edges: Option<Vec<Vec<bool>>> = None;
        for s in 0..shots_per_path {
            let run = match run_single(
                tree,
                &[],
                SingleOptions { randomize: Some(seed ^ ((pi as u64) << 32) ^ s), forced: Some(path) },
            ) {
                Ok(r) => r,
                Err(e) => {
                    push(violation(tree, path[0], None, ViolationKind::Exec, e.to_string()), &mut report);
                    break;
                }
            };
            let get = |b: BitRef| run.state.rec.get(offsets[b.node as usize] + b.idx);
            for &id in path {
                let node = tree.node(id);
                let mut cursor = 0u32;
                for (k, ins) in node.circuit.instrs.iter().enumerate() {
                    match ins {
                        Instr::Measure { random: false, .. } => {
                            if get(BitRef { node: id, idx: cursor }) {
                                push(
                                    violation(tree, id, Some(k), ViolationKind::NonDeterministicBit, format!("record bit {cursor}")),
                                    &mut report,
                                );
                            }
                        }
                        Instr::Detector { bits } => {
                            if bits.iter().fold(false, |a, &b| a ^ get(b)) {
                                push(violation(tree, id, Some(k), ViolationKind::DetectorFlip, format!("{bits:?}")), &mut report);
                            }
                        }
                        _ => {}
                    }
                    if ins.produces_bit() {
                        cursor += 1;
                    }
                }
            }
            for (i, vals) in run.edge_values.iter().enumerate() {
                if vals.iter().filter(|&&v| v).count() != 1 {
                    push(
                        violation(tree, path[i], None, ViolationKind::PredicatePartition, format!("values {vals:?}")),
                        &mut report,
                    );
                }
            }
            match &first_edges {
                None => first_edges = Some(run.edge_values.clone()),
                Some(f) => {
                    for (i, (a, b)) in f.iter().zip(&run.edge_values).enumerate() {
                        if a != b {
                            push(
                                violation(tree, path[i], None, ViolationKind::PredicateVaries, format!("{a:?} vs {b:?}")),
                                &mut report,
                            );
                        }
                    }
                }
            }
        }
    }
    report
}

/// Evaluates every node's out-edge predicates on `samples` uniformly random
/// records and reports nodes where not exactly one holds.
pub fn check_partition(tree: &ProtocolTree, samples: u64, seed: u64) -> Vec<Violation> {
    let offsets = tree.offsets();
    let n_bits = tree.max_record_len();
    let mut rng = keyed_rng(seed, &[]);
    let mut out = Vec::new();
    for (i, node) in tree.nodes.iter().enumerate() {
        let Next::Edges(es) = &node.next else { continue };
        for _ in 0..samples {
            let bits: Vec<bool> = (0..n_bits).map(|_| rng.gen()).collect();
            let f = |b: BitRef| bits[(offsets[b.node as usize] + b.idx) as usize];
            let hits = es.iter().filter(|e| e.when.eval(f)).count();
            if hits != 1 {
                out.push(violation(tree, i as NodeId, None, ViolationKind::PredicatePartition, format!("{hits} edges hold")));
                break;
            }
        }
    }
    out
}
