//! Protocol trees: circuits joined by record predicates, with terminals that
//! carry logical-outcome rules.
//!
//! Serialized as JSON (see `to_json`). Field summary:
//! - `version`: format version, currently 1.
//! - `name`, `tags`: free text; a tag `ft` marks trees certified fault tolerant,
//!   `non-ft` trees carry an explanation tag.
//! - `n_qubits`: operand bound; `roles`: named qubit groups (data, syndrome, ...).
//! - `nodes[i]`: node id `i`, node 0 is the root; `circuit` holds instructions,
//!   `next` is either `Edges` (list of `{when, to, label}`) or `Leaf` (a terminal).
//! - Record bits are addressed as `{node, idx}` and may reference the node
//!   itself or any ancestor.

use crate::circuit::{BitRef, Circuit, Expr, NodeId};
use crate::pauli::{PauliFrame, Qubit};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const TREE_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub when: Expr,
    pub to: NodeId,
    #[serde(default)]
    pub label: String,
}

/// Lookup decoding of a self-dual block applied to the final frame before
/// reading a logical observable, as if a noiseless readout of every check
/// followed. `table[ctx][syndrome]` lists local qubit indices; syndrome bit
/// `i` (MSB first) is the overlap parity with `checks[i]`. The X correction
/// takes its context from `x_flags` and the Z correction from `z_flags`
/// (0 = none raised, else 1 + first raised).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdealDecode {
    pub qubits: Vec<Qubit>,
    pub checks: Vec<Vec<u32>>,
    pub table: Vec<Vec<Vec<u32>>>,
    #[serde(default)]
    pub x_flags: Vec<Expr>,
    #[serde(default)]
    pub z_flags: Vec<Expr>,
}

impl IdealDecode {
    fn syndrome(&self, frame: &PauliFrame, x_part: bool) -> usize {
        let mut s = 0;
        let n = self.checks.len();
        for (i, c) in self.checks.iter().enumerate() {
            let mut par = false;
            for &l in c {
                let (x, z) = frame.bits(self.qubits[l as usize]);
                par ^= if x_part { x } else { z };
            }
            if par {
                s |= 1 << (n - 1 - i);
            }
        }
        s
    }

    fn ctx<F: Fn(BitRef) -> bool + Copy>(&self, flags: &[Expr], f: F) -> usize {
        flags.iter().position(|e| e.eval(f)).map_or(0, |i| i + 1).min(self.table.len() - 1)
    }

    /// Multiplies the X and Z corrections into `frame`; `f` resolves flag bits.
    pub fn apply<F: Fn(BitRef) -> bool + Copy>(&self, frame: &mut PauliFrame, f: F) {
        let sx = self.syndrome(frame, true);
        let sz = self.syndrome(frame, false);
        for &l in &self.table[self.ctx(&self.x_flags, f)][sx] {
            frame.mul_letter(self.qubits[l as usize], crate::pauli::Letter::X);
        }
        for &l in &self.table[self.ctx(&self.z_flags, f)][sz] {
            frame.mul_letter(self.qubits[l as usize], crate::pauli::Letter::Z);
        }
    }

    pub fn refs(&self, out: &mut Vec<BitRef>) {
        self.x_flags.iter().chain(&self.z_flags).for_each(|e| e.refs(out));
    }

    pub fn map_refs(&mut self, f: &impl Fn(BitRef) -> BitRef) {
        self.x_flags.iter_mut().chain(self.z_flags.iter_mut()).for_each(|e| e.map_refs(f));
    }
}

/// One logical observable read out at a terminal. The check fails when the
/// (optionally decoded) frame anticommutes with `observable`, XOR `flip`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogicalCheck {
    pub name: String,
    pub observable: PauliFrame,
    #[serde(default)]
    pub decode: Option<IdealDecode>,
    #[serde(default = "const_false")]
    pub flip: Expr,
}

fn const_false() -> Expr {
    Expr::Const(false)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Terminal {
    /// Post-selected away (excluded from the logical-error denominator).
    #[serde(default)]
    pub discard: bool,
    #[serde(default)]
    pub checks: Vec<LogicalCheck>,
    /// Named record expressions tallied as joint patterns.
    #[serde(default)]
    pub report: Vec<(String, Expr)>,
    /// Data qubits holding logical information at this terminal.
    #[serde(default)]
    pub alive: Vec<Qubit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Next {
    Edges(Vec<Edge>),
    Leaf(Terminal),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub name: String,
    pub circuit: Circuit,
    pub next: Next,
    #[serde(skip)]
    pub parent: Option<NodeId>,
    /// Position of this node's first record bit on its root path.
    #[serde(skip)]
    pub offset: u32,
    #[serde(skip)]
    pub rec_len: u32,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TreeError {
    #[error("unsupported tree format version {0}")]
    Version(u32),
    #[error("node {0} has more than one parent")]
    MultipleParents(NodeId),
    #[error("node {0} is unreachable from the root")]
    Unreachable(NodeId),
    #[error("edge from node {from} to missing node {to}")]
    MissingNode { from: NodeId, to: NodeId },
    #[error("root node has a parent")]
    RootHasParent,
    #[error("tree is empty")]
    Empty,
    #[error("parse error: {0}")]
    Parse(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTree {
    pub version: u32,
    pub name: String,
    pub n_qubits: u32,
    #[serde(default)]
    pub roles: BTreeMap<String, Vec<Qubit>>,
    #[serde(default)]
    pub tags: Vec<String>,
    pub nodes: Vec<Node>,
}

impl ProtocolTree {
    pub fn new(name: &str, n_qubits: u32) -> Self {
        Self {
            version: TREE_FORMAT_VERSION,
            name: name.to_string(),
            n_qubits,
            roles: BTreeMap::new(),
            tags: Vec::new(),
            nodes: Vec::new(),
        }
    }

    /// A tree holding one circuit that ends in `terminal`.
    pub fn single(name: &str, n_qubits: u32, circuit: Circuit, terminal: Terminal) -> Self {
        let mut t = Self::new(name, n_qubits);
        t.add_node(name, circuit);
        t.set_leaf(0, terminal);
        t.finalize().expect("single-node tree is well formed");
        t
    }

    pub fn add_node(&mut self, name: &str, circuit: Circuit) -> NodeId {
        self.nodes.push(Node {
            name: name.to_string(),
            circuit,
            next: Next::Leaf(Terminal::default()),
            parent: None,
            offset: 0,
            rec_len: 0,
        });
        (self.nodes.len() - 1) as NodeId
    }

    pub fn set_edges(&mut self, id: NodeId, edges: Vec<Edge>) {
        self.nodes[id as usize].next = Next::Edges(edges);
    }

    pub fn set_leaf(&mut self, id: NodeId, t: Terminal) {
        self.nodes[id as usize].next = Next::Leaf(t);
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id as usize]
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.iter().any(|t| t == tag)
    }

    /// Recomputes parents and record offsets; checks the tree shape.
    pub fn finalize(&mut self) -> Result<(), TreeError> {
        if self.version != TREE_FORMAT_VERSION {
            return Err(TreeError::Version(self.version));
        }
        if self.nodes.is_empty() {
            return Err(TreeError::Empty);
        }
        let n = self.nodes.len();
        let mut parent: Vec<Option<NodeId>> = vec![None; n];
        for (i, node) in self.nodes.iter().enumerate() {
            if let Next::Edges(es) = &node.next {
                for e in es {
                    if e.to as usize >= n {
                        return Err(TreeError::MissingNode { from: i as NodeId, to: e.to });
                    }
                    if e.to == 0 {
                        return Err(TreeError::RootHasParent);
                    }
                    if parent[e.to as usize].is_some() {
                        return Err(TreeError::MultipleParents(e.to));
                    }
                    parent[e.to as usize] = Some(i as NodeId);
                }
            }
        }
        // Breadth-first from the root; single parents make this acyclic.
        let mut order = vec![0usize];
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut k = 0;
        while k < order.len() {
            let i = order[k];
            k += 1;
            if let Next::Edges(es) = &self.nodes[i].next {
                for e in es {
                    if !seen[e.to as usize] {
                        seen[e.to as usize] = true;
                        order.push(e.to as usize);
                    }
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(TreeError::Unreachable(i as NodeId));
        }
        for &i in &order {
            let off = match parent[i] {
                Some(p) => self.nodes[p as usize].offset + self.nodes[p as usize].rec_len,
                None => 0,
            };
            let node = &mut self.nodes[i];
            node.parent = parent[i];
            node.offset = off;
            node.rec_len = node.circuit.record_len();
        }
        Ok(())
    }

    pub fn offsets(&self) -> Vec<u32> {
        self.nodes.iter().map(|n| n.offset).collect()
    }

    /// Longest root-to-leaf record length.
    pub fn max_record_len(&self) -> u32 {
        self.nodes.iter().map(|n| n.offset + n.rec_len).max().unwrap_or(0)
    }

    /// Nodes from the root to `id`, inclusive.
    pub fn path_to(&self, id: NodeId) -> Vec<NodeId> {
        let mut p = vec![id];
        let mut cur = id;
        while let Some(par) = self.nodes[cur as usize].parent {
            p.push(par);
            cur = par;
        }
        p.reverse();
        p
    }

    pub fn is_ancestor_or_self(&self, anc: NodeId, id: NodeId) -> bool {
        let mut cur = Some(id);
        while let Some(c) = cur {
            if c == anc {
                return true;
            }
            cur = self.nodes[c as usize].parent;
        }
        false
    }

    pub fn leaves(&self) -> Vec<NodeId> {
        (0..self.nodes.len() as NodeId)
            .filter(|&i| matches!(self.nodes[i as usize].next, Next::Leaf(_)))
            .collect()
    }

    pub fn terminal(&self, id: NodeId) -> Option<&Terminal> {
        match &self.nodes[id as usize].next {
            Next::Leaf(t) => Some(t),
            Next::Edges(_) => None,
        }
    }

    /// All root-to-leaf paths.
    pub fn paths(&self) -> Vec<Vec<NodeId>> {
        self.leaves().into_iter().map(|l| self.path_to(l)).collect()
    }

    pub fn is_linear(&self) -> bool {
        self.nodes.iter().all(|n| match &n.next {
            Next::Edges(es) => es.len() <= 1,
            Next::Leaf(_) => true,
        })
    }

    /// Applies `f` to every node circuit.
    pub fn map_circuits<E>(&self, mut f: impl FnMut(&Circuit) -> Result<Circuit, E>) -> Result<ProtocolTree, E> {
        let mut t = self.clone();
        for n in &mut t.nodes {
            n.circuit = f(&n.circuit)?;
        }
        Ok(t)
    }

    pub fn noise_site_count(&self, path: &[NodeId]) -> usize {
        path.iter().map(|&i| self.nodes[i as usize].circuit.noise_sites().count()).sum()
    }

    /// Replaces every non-discarding leaf with a copy of `next`. Reports and
    /// checks of the replaced leaf are carried into the copy's terminals.
    pub fn chain(&mut self, next: &ProtocolTree) -> Result<(), TreeError> {
        let leaves: Vec<NodeId> = self
            .leaves()
            .into_iter()
            .filter(|&l| !self.terminal(l).map(|t| t.discard).unwrap_or(false))
            .collect();
        self.n_qubits = self.n_qubits.max(next.n_qubits);
        for (k, v) in &next.roles {
            let e = self.roles.entry(k.clone()).or_default();
            for q in v {
                if !e.contains(q) {
                    e.push(*q);
                }
            }
        }
        for leaf in leaves {
            let old = match std::mem::replace(&mut self.nodes[leaf as usize].next, Next::Edges(vec![])) {
                Next::Leaf(t) => t,
                Next::Edges(_) => unreachable!(),
            };
            let base = self.nodes.len() as NodeId;
            let remap = |b: BitRef| BitRef { node: b.node + base, idx: b.idx };
            for n in &next.nodes {
                let mut c = n.clone();
                c.circuit.instrs.iter_mut().for_each(|i| i.map_refs(&remap));
                match &mut c.next {
                    Next::Edges(es) => {
                        for e in es.iter_mut() {
                            e.to += base;
                            e.when.map_refs(&remap);
                        }
                    }
                    Next::Leaf(t) => {
                        map_terminal_refs(t, &remap);
                        if !t.discard {
                            let mut report = old.report.clone();
                            report.append(&mut t.report);
                            t.report = report;
                            let mut checks = old.checks.clone();
                            checks.append(&mut t.checks);
                            t.checks = checks;
                        }
                    }
                }
                self.nodes.push(c);
            }
            self.nodes[leaf as usize].next = Next::Edges(vec![Edge { when: Expr::Const(true), to: base, label: String::new() }]);
        }
        self.finalize()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, TreeError> {
        let mut t: ProtocolTree = serde_json::from_str(s).map_err(|e| TreeError::Parse(e.to_string()))?;
        t.finalize()?;
        Ok(t)
    }
}

fn map_terminal_refs(t: &mut Terminal, f: &impl Fn(BitRef) -> BitRef) {
    for c in &mut t.checks {
        c.flip.map_refs(f);
        if let Some(d) = &mut c.decode {
            d.map_refs(f);
        }
    }
    for (_, e) in &mut t.report {
        e.map_refs(f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gate::Basis;

    fn two_level() -> ProtocolTree {
        let mut t = ProtocolTree::new("t", 2);
        let mut c = Circuit::new();
        c.measure(0, Basis::Z, false);
        let r = t.add_node("root", c);
        let mut c1 = Circuit::new();
        c1.measure(1, Basis::Z, false);
        let a = t.add_node("a", c1.clone());
        let b = t.add_node("b", c1);
        t.set_edges(
            r,
            vec![
                Edge { when: Expr::not(Expr::bit(0, 0)), to: a, label: "clean".into() },
                Edge { when: Expr::bit(0, 0), to: b, label: "flip".into() },
            ],
        );
        t.finalize().unwrap();
        t
    }

    #[test]
    fn offsets_follow_paths() {
        let t = two_level();
        assert_eq!(t.node(1).offset, 1);
        assert_eq!(t.node(2).offset, 1);
        assert_eq!(t.max_record_len(), 2);
        assert_eq!(t.paths(), vec![vec![0, 1], vec![0, 2]]);
    }

    #[test]
    fn chaining_remaps_refs() {
        let mut t = two_level();
        let n = t.clone();
        t.chain(&n).unwrap();
        assert_eq!(t.nodes.len(), 3 + 2 * 3);
        assert_eq!(t.leaves().len(), 4);
        if let Next::Edges(es) = &t.node(3).next {
            assert_eq!(es[0].when, Expr::not(Expr::bit(3, 0)));
        } else {
            panic!("copied root lost its edges");
        }
        assert_eq!(t.node(4).offset, 3);
    }

    #[test]
    fn json_roundtrip() {
        let t = two_level();
        let back = ProtocolTree::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn rejects_double_parent() {
        let mut t = two_level();
        t.set_edges(2, vec![Edge { when: Expr::Const(true), to: 1, label: String::new() }]);
        assert_eq!(t.finalize(), Err(TreeError::MultipleParents(1)));
    }
}
