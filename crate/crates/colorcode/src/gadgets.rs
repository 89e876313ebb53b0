//! Protocol-tree generators for the distance-3 gadgets: verified and
//! stabilizer-based state preparation, the bare / flagged / superdense
//! syndrome-extraction circuits, sequential and simultaneous QEC rounds,
//! memory experiments, and logical teleportation by lattice surgery or by a
//! direct joint measurement.
//!
//! Every node circuit is scheduled as-soon-as-possible into layers separated
//! by `Tick`; qubits in the node's scope that sit out a layer get an `Idle`
//! marker. Lookup corrections and teleportation frame updates are classical
//! instructions (`Decode`, `FrameXor`), never gates.

use crate::code::{STEANE_LOGICAL, STEANE_PLAQUETTES};
use crate::decoders::LookupTable;
use pframe::tree::TreeError;
use pframe::{
    BitRef, Circuit, Decode, DecodeTarget, Edge, Expr, Gate, IdealDecode, Instr, Letter, LogicalCheck, Basis, Next, NodeId,
    PauliFrame, ProtocolTree, Qubit, Terminal,
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GadgetError {
    #[error("unsupported state {0:?}")]
    UnsupportedState(String),
    #[error("unsupported gadget: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// The six cardinal single-qubit states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Cardinal {
    Zero,
    One,
    Plus,
    Minus,
    PlusI,
    MinusI,
}

impl Cardinal {
    pub const ALL: [Cardinal; 6] = [Cardinal::Zero, Cardinal::One, Cardinal::Plus, Cardinal::Minus, Cardinal::PlusI, Cardinal::MinusI];

    pub fn name(self) -> &'static str {
        match self {
            Cardinal::Zero => "0",
            Cardinal::One => "1",
            Cardinal::Plus => "+",
            Cardinal::Minus => "-",
            Cardinal::PlusI => "+i",
            Cardinal::MinusI => "-i",
        }
    }

    pub fn parse(s: &str) -> Result<Self, GadgetError> {
        Ok(match s.trim() {
            "0" | "zero" => Cardinal::Zero,
            "1" | "one" => Cardinal::One,
            "+" | "plus" => Cardinal::Plus,
            "-" | "minus" => Cardinal::Minus,
            "+i" | "plus_i" => Cardinal::PlusI,
            "-i" | "minus_i" => Cardinal::MinusI,
            other => return Err(GadgetError::UnsupportedState(other.to_string())),
        })
    }

    /// Logical Pauli stabilizing the state, up to sign.
    pub fn letter(self) -> Letter {
        match self {
            Cardinal::Zero | Cardinal::One => Letter::Z,
            Cardinal::Plus | Cardinal::Minus => Letter::X,
            Cardinal::PlusI | Cardinal::MinusI => Letter::Y,
        }
    }

    /// Transversal gates taking the encoded |0> to this state.
    pub fn transversal(self) -> Vec<Gate> {
        match self {
            Cardinal::Zero => vec![],
            Cardinal::One => vec![Gate::RotX(2)],
            Cardinal::Plus => vec![Gate::H],
            Cardinal::Minus => vec![Gate::H, Gate::RotZ(2)],
            Cardinal::PlusI => vec![Gate::H, Gate::SDag],
            Cardinal::MinusI => vec![Gate::H, Gate::S],
        }
    }
}

/// Syndrome-readout strategy; fixes both the circuits and the ancilla budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    Sequential,
    Simultaneous,
    Superdense,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Sequential, Scheme::Simultaneous, Scheme::Superdense];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Sequential => "sequential",
            Scheme::Simultaneous => "simultaneous",
            Scheme::Superdense => "superdense",
        }
    }

    pub fn parse(s: &str) -> Result<Self, GadgetError> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s.trim())
            .ok_or_else(|| GadgetError::Unsupported(format!("scheme {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CheckType {
    X,
    Z,
}

/// Ancilla style of one syndrome-extraction circuit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SeKind {
    Bare,
    Flagged,
    Superdense,
}

/// Qubit assignment: data blocks first, then per-block syndrome and flag
/// ancillas, then the surgery ancillas shared by two blocks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub scheme: Scheme,
    pub data: Vec<Vec<Qubit>>,
    pub syndrome: Vec<Vec<Qubit>>,
    pub flags: Vec<Vec<Qubit>>,
    pub surgery: Vec<Qubit>,
}

impl Layout {
    pub fn new(scheme: Scheme, blocks: usize) -> Self {
        let (n_syn, n_flag, n_surg) = match scheme {
            Scheme::Sequential => (1, 1, 1),
            Scheme::Simultaneous => (3, 3, 2),
            Scheme::Superdense => (6, 0, 2),
        };
        let mut next = 0u32;
        let mut take = |k: u32| {
            let v: Vec<Qubit> = (next..next + k).collect();
            next += k;
            v
        };
        let data = (0..blocks).map(|_| take(7)).collect();
        let mut syndrome = Vec::new();
        let mut flags = Vec::new();
        for _ in 0..blocks {
            syndrome.push(take(n_syn));
            flags.push(take(n_flag));
        }
        let surgery = if blocks >= 2 { take(n_surg) } else { Vec::new() };
        Self { scheme, data, syndrome, flags, surgery }
    }

    pub fn n_qubits(&self) -> u32 {
        self.data.iter().chain(&self.syndrome).chain(&self.flags).flatten().chain(&self.surgery).max().map_or(0, |q| q + 1)
    }

    /// Role map stored on generated trees (`data/<block>`, `syndrome/<block>`,
    /// `flag/<block>`, `surgery`).
    pub fn roles(&self) -> BTreeMap<String, Vec<Qubit>> {
        let mut r = BTreeMap::new();
        for (b, d) in self.data.iter().enumerate() {
            r.insert(format!("data/{b}"), d.clone());
            r.insert(format!("syndrome/{b}"), self.syndrome[b].clone());
            r.insert(format!("flag/{b}"), self.flags[b].clone());
        }
        if !self.surgery.is_empty() {
            r.insert("surgery".into(), self.surgery.clone());
        }
        r
    }

    /// (syndrome, flag) ancilla pairs of a block; layouts without flag
    /// qubits pair up their syndrome qubits.
    fn flagged_pairs(&self, b: usize) -> Vec<(Qubit, Option<Qubit>)> {
        if self.flags[b].is_empty() {
            self.syndrome[b].chunks(2).map(|c| (c[0], c.get(1).copied())).take(3).collect()
        } else {
            self.syndrome[b].iter().zip(&self.flags[b]).map(|(&s, &f)| (s, Some(f))).collect()
        }
    }

    fn bare_pairs(&self, b: usize) -> Vec<(Qubit, Option<Qubit>)> {
        self.syndrome[b].iter().take(3).map(|&s| (s, None)).collect()
    }

    fn pairs(&self, b: usize, flagged: bool) -> Vec<(Qubit, Option<Qubit>)> {
        if flagged {
            self.flagged_pairs(b)
        } else {
            self.bare_pairs(b)
        }
    }

    fn bell_pairs(&self, b: usize) -> Result<Vec<(Qubit, Qubit)>, GadgetError> {
        if self.syndrome[b].len() < 6 {
            return Err(GadgetError::Unsupported("superdense readout needs six syndrome qubits per block".into()));
        }
        Ok(self.syndrome[b].chunks(2).map(|c| (c[0], c[1])).collect())
    }
}

/// As-soon-as-possible layer scheduler for one node circuit.
#[derive(Default)]
struct Sched {
    layers: Vec<Vec<(Instr, Option<usize>)>>,
    ready: BTreeMap<Qubit, usize>,
    floor: usize,
    handles: usize,
}

impl Sched {
    fn place(&mut self, ins: Instr, handle: Option<usize>) {
        let qs = ins.qubits();
        let l = qs.iter().map(|q| self.ready.get(q).copied().unwrap_or(0)).max().unwrap_or(0).max(self.floor);
        while self.layers.len() <= l {
            self.layers.push(Vec::new());
        }
        self.layers[l].push((ins, handle));
        for q in qs {
            self.ready.insert(q, l + 1);
        }
    }

    fn reset(&mut self, q: Qubit, basis: Basis) {
        self.place(Instr::Reset { qubit: q, basis }, None);
    }

    fn cx(&mut self, c: Qubit, t: Qubit) {
        self.place(Instr::Gate { gate: Gate::CX, qubits: vec![c, t] }, None);
    }

    fn gate1(&mut self, g: Gate, q: Qubit) {
        self.place(Instr::Gate { gate: g, qubits: vec![q] }, None);
    }

    fn measure(&mut self, q: Qubit, basis: Basis, random: bool) -> usize {
        let h = self.handles;
        self.handles += 1;
        self.place(Instr::Measure { qubit: q, basis, random }, Some(h));
        h
    }

    /// Later operations start after every layer placed so far.
    fn barrier(&mut self) {
        self.floor = self.layers.len();
    }

    /// Emits the layers; returns the circuit and each measurement handle's
    /// record index. Idle markers cover `scope` plus every touched qubit.
    fn finish(self, scope: &[Qubit]) -> (Circuit, Vec<u32>) {
        let mut all: BTreeSet<Qubit> = scope.iter().copied().collect();
        for l in &self.layers {
            for (i, _) in l {
                all.extend(i.qubits());
            }
        }
        let mut c = Circuit::new();
        let mut map = vec![0u32; self.handles];
        let mut idx = 0u32;
        for layer in self.layers {
            let active: BTreeSet<Qubit> = layer.iter().flat_map(|(i, _)| i.qubits()).collect();
            for (ins, h) in layer {
                if let Some(h) = h {
                    map[h] = idx;
                    idx += 1;
                }
                c.push(ins);
            }
            let idle: Vec<Qubit> = all.difference(&active).copied().collect();
            if !idle.is_empty() {
                c.push(Instr::Idle { qubits: idle, duration: None });
            }
            c.tick();
        }
        (c, map)
    }
}

/// Layers holding at least one reset, measurement or two-qubit gate.
pub fn circuit_depth(c: &Circuit) -> usize {
    let mut depth = 0;
    let mut counted = false;
    for ins in &c.instrs {
        match ins {
            Instr::Tick => {
                if counted {
                    depth += 1;
                }
                counted = false;
            }
            Instr::Reset { .. } | Instr::Measure { .. } => counted = true,
            Instr::Gate { gate, .. } if gate.arity() == 2 => counted = true,
            _ => {}
        }
    }
    depth + counted as usize
}

fn plaquette(data: &[Qubit], k: usize) -> [Qubit; 4] {
    STEANE_PLAQUETTES[k].map(|i| data[i as usize])
}

fn logical_support(data: &[Qubit]) -> Vec<Qubit> {
    STEANE_LOGICAL.iter().map(|&i| data[i as usize]).collect()
}

fn logical_op(data: &[Qubit], letter: Letter) -> PauliFrame {
    PauliFrame::from_letters(logical_support(data).into_iter().map(|q| (q, letter)))
}

fn table3() -> Vec<Vec<Vec<u32>>> {
    LookupTable::table_iii().entries
}

fn bit(r: BitRef) -> Expr {
    Expr::Bit(r)
}

fn any(v: Vec<Expr>) -> Expr {
    Expr::Or(v)
}

fn frame_decode(syndrome: Vec<Expr>, flags: Vec<Expr>, data: &[Qubit], letter: Letter) -> Instr {
    frame_decode_with(table3(), syndrome, flags, data, letter)
}

fn frame_decode_with(table: Vec<Vec<Vec<u32>>>, syndrome: Vec<Expr>, flags: Vec<Expr>, data: &[Qubit], letter: Letter) -> Instr {
    Instr::Decode(Decode { syndrome, flags, table, target: DecodeTarget::Frame { qubits: data.to_vec(), letter } })
}

/// Tables (X corrections, Z corrections) for a triggered pair of superdense
/// rounds, built once from the single-fault probe. Entries are the errors
/// left after the second round, which moves Z errors between data qubits
/// while it reads them out.
pub fn superdense_tables() -> Result<&'static (LookupTable, LookupTable), GadgetError> {
    static TABLES: std::sync::OnceLock<Result<(LookupTable, LookupTable), String>> = std::sync::OnceLock::new();
    TABLES
        .get_or_init(|| {
            let probe = se_probe(SeKind::Superdense).map_err(|e| e.to_string())?;
            crate::decoders::build_lookup_split(&probe).map_err(|e| e.to_string())
        })
        .as_ref()
        .map_err(|e| GadgetError::Unsupported(format!("superdense table: {e}")))
}

/// Lookup decoding of a block as if a perfect readout followed.
pub fn ideal_decode(data: &[Qubit], x_flags: Vec<Expr>, z_flags: Vec<Expr>) -> IdealDecode {
    IdealDecode {
        qubits: data.to_vec(),
        checks: STEANE_PLAQUETTES.iter().map(|p| p.to_vec()).collect(),
        table: table3(),
        x_flags,
        z_flags,
    }
}

/// Terminal check for the stabilizing logical operator of `state` on a block.
pub fn state_check(state: Cardinal, data: &[Qubit], x_flags: Vec<Expr>, z_flags: Vec<Expr>) -> LogicalCheck {
    LogicalCheck {
        name: format!("{}_L", state.letter().to_char()),
        observable: logical_op(data, state.letter()),
        decode: Some(ideal_decode(data, x_flags, z_flags)),
        flip: Expr::Const(false),
    }
}

trait LetterChar {
    fn to_char(self) -> char;
}

impl LetterChar for Letter {
    fn to_char(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }
}

/// Record handles of one plaquette measurement.
#[derive(Clone, Copy, Debug)]
struct PlaqHandles {
    syn: usize,
    flag: Option<usize>,
}

enum Op {
    Reset(Qubit, Basis),
    Cx(Qubit, Qubit),
    Meas(Qubit, Basis, bool, bool),
}

/// One plaquette check as steps; flag CNOTs surround the two middle data CNOTs.
fn plaquette_steps(d: [Qubit; 4], ty: CheckType, (a, f): (Qubit, Option<Qubit>), random: bool) -> Vec<Vec<Op>> {
    let (ab, fb) = match ty {
        CheckType::X => (Basis::X, Basis::Z),
        CheckType::Z => (Basis::Z, Basis::X),
    };
    let link = |q: Qubit| match ty {
        CheckType::X => Op::Cx(a, q),
        CheckType::Z => Op::Cx(q, a),
    };
    let mut steps = vec![];
    let mut first = vec![Op::Reset(a, ab)];
    if let Some(f) = f {
        first.push(Op::Reset(f, fb));
    }
    steps.push(first);
    for (i, &q) in d.iter().enumerate() {
        if let Some(f) = f {
            if i == 1 || i == 3 {
                steps.push(vec![link(f)]);
            }
        }
        steps.push(vec![link(q)]);
    }
    let mut last = vec![Op::Meas(a, ab, random, true)];
    if let Some(f) = f {
        last.push(Op::Meas(f, fb, false, false));
    }
    steps.push(last);
    steps
}

/// Measures `plaqs` of one block. Plaquettes are dealt to the ancilla
/// pairs; plaquettes sharing a round of pairs run step-interleaved.
fn measure_plaquettes(
    s: &mut Sched,
    data: &[Qubit],
    ty: CheckType,
    plaqs: &[usize],
    pairs: &[(Qubit, Option<Qubit>)],
    random: impl Fn(usize) -> bool,
) -> BTreeMap<usize, PlaqHandles> {
    let mut out = BTreeMap::new();
    for group in plaqs.chunks(pairs.len()) {
        let steps: Vec<Vec<Vec<Op>>> =
            group.iter().enumerate().map(|(j, &k)| plaquette_steps(plaquette(data, k), ty, pairs[j], random(k))).collect();
        let mut handles: Vec<(Option<usize>, Option<usize>)> = vec![(None, None); group.len()];
        for st in 0..steps[0].len() {
            for (j, _) in group.iter().enumerate() {
                for op in &steps[j][st] {
                    match *op {
                        Op::Reset(q, b) => s.reset(q, b),
                        Op::Cx(c, t) => s.cx(c, t),
                        Op::Meas(q, b, r, is_syn) => {
                            let h = s.measure(q, b, r);
                            if is_syn {
                                handles[j].0 = Some(h);
                            } else {
                                handles[j].1 = Some(h);
                            }
                        }
                    }
                }
            }
        }
        for (j, &k) in group.iter().enumerate() {
            out.insert(k, PlaqHandles { syn: handles[j].0.expect("syndrome measured"), flag: handles[j].1 });
        }
    }
    out
}

/// Proper edge coloring of a bipartite (ancilla, data) multigraph with
/// max-degree colors, by backtracking in edge order.
fn color_edges(edges: &[(Qubit, Qubit)]) -> Vec<usize> {
    let mut deg: BTreeMap<Qubit, usize> = BTreeMap::new();
    for &(a, d) in edges {
        *deg.entry(a).or_default() += 1;
        *deg.entry(d).or_default() += 1;
    }
    let k = deg.values().copied().max().unwrap_or(0);
    let mut colors = vec![usize::MAX; edges.len()];
    fn go(i: usize, edges: &[(Qubit, Qubit)], k: usize, colors: &mut Vec<usize>) -> bool {
        if i == edges.len() {
            return true;
        }
        let (a, d) = edges[i];
        for c in 0..k {
            let clash = (0..i).any(|j| colors[j] == c && (edges[j].0 == a || edges[j].1 == d || edges[j].0 == d || edges[j].1 == a));
            if !clash {
                colors[i] = c;
                if go(i + 1, edges, k, colors) {
                    return true;
                }
            }
        }
        colors[i] = usize::MAX;
        false
    }
    assert!(go(0, edges, k, &mut colors), "bipartite graph is max-degree colorable");
    colors
}

/// Superdense readout of all three plaquettes: Bell pair (a, b) per
/// plaquette; `a` ends up holding the X check and `b` the Z check.
fn measure_superdense(
    s: &mut Sched,
    data: &[Qubit],
    pairs: &[(Qubit, Qubit)],
    x_phase: bool,
    z_phase: bool,
) -> Vec<(usize, usize)> {
    for &(a, b) in pairs {
        s.reset(a, Basis::X);
        s.reset(b, Basis::Z);
    }
    for &(a, b) in pairs {
        s.cx(a, b);
    }
    s.barrier();
    let phase = |s: &mut Sched, x: bool| {
        let mut edges = Vec::new();
        for (k, &(a, b)) in pairs.iter().enumerate() {
            let d = plaquette(data, k);
            let owners = if x { [a, a, b, b] } else { [b, b, a, a] };
            for i in 0..4 {
                edges.push((owners[i], d[i]));
            }
        }
        let colors = color_edges(&edges);
        let n_colors = colors.iter().max().map_or(0, |m| m + 1);
        for c in 0..n_colors {
            for (e, &col) in edges.iter().zip(&colors) {
                if col == c {
                    if x {
                        s.cx(e.0, e.1);
                    } else {
                        s.cx(e.1, e.0);
                    }
                }
            }
        }
        s.barrier();
    };
    if x_phase {
        phase(s, true);
    }
    if z_phase {
        phase(s, false);
    }
    for &(a, b) in pairs {
        s.cx(a, b);
    }
    pairs.iter().map(|&(a, b)| (s.measure(a, Basis::X, false), s.measure(b, Basis::Z, false))).collect()
}

/// Decoder keys of a triggered superdense pair of rounds: both rounds'
/// Z-check bits (for X corrections) and X-check bits (for Z corrections),
/// first round most significant. Every round moves Z errors between data
/// qubits, so the first round's pattern is needed beyond flag position.
fn superdense_keys(a1: &[BitRef], b1: &[BitRef], a2: &[BitRef], b2: &[BitRef]) -> (Vec<Expr>, Vec<Expr>) {
    let key = |p: &[BitRef], q: &[BitRef]| p.iter().chain(q).map(|&x| bit(x)).collect();
    (key(b1, b2), key(a1, a2))
}

/// Circuit for one block's readout of the requested check types.
pub fn gen_se_circuit(kind: SeKind, scheme: Scheme, types: &[CheckType]) -> Result<Circuit, GadgetError> {
    let layout = Layout::new(if kind == SeKind::Superdense { Scheme::Superdense } else { scheme }, 1);
    let data = &layout.data[0];
    let mut s = Sched::default();
    match kind {
        SeKind::Superdense => {
            let pairs = layout.bell_pairs(0)?;
            measure_superdense(&mut s, data, &pairs, types.contains(&CheckType::X), types.contains(&CheckType::Z));
        }
        SeKind::Bare | SeKind::Flagged => {
            let pairs = layout.pairs(0, kind == SeKind::Flagged);
            for &ty in types {
                measure_plaquettes(&mut s, data, ty, &[0, 1, 2], &pairs, |_| false);
            }
        }
    }
    Ok(s.finish(data).0)
}

/// Adds nodes to a tree under construction.
struct Tb {
    t: ProtocolTree,
}

impl Tb {
    fn new(name: &str, layout: &Layout) -> Self {
        let mut t = ProtocolTree::new(name, layout.n_qubits());
        t.roles = layout.roles();
        Self { t }
    }

    fn node(&mut self, name: &str) -> NodeId {
        self.t.add_node(name, Circuit::new())
    }

    fn set(&mut self, id: NodeId, c: Circuit) {
        self.t.nodes[id as usize].circuit = c;
    }

    fn edges(&mut self, id: NodeId, es: Vec<(Expr, NodeId, &str)>) {
        self.t.set_edges(id, es.into_iter().map(|(when, to, label)| Edge { when, to, label: label.to_string() }).collect());
    }

    fn branch(&mut self, id: NodeId, cond: Expr, yes: (NodeId, &str), no: (NodeId, &str)) {
        self.edges(id, vec![(cond.clone(), yes.0, yes.1), (Expr::not(cond), no.0, no.1)]);
    }

    fn leaf(&mut self, id: NodeId, t: Terminal) {
        self.t.set_leaf(id, t);
    }

    fn done(mut self, tags: &[&str]) -> Result<ProtocolTree, GadgetError> {
        self.t.tags = tags.iter().map(|s| s.to_string()).collect();
        self.t.finalize()?;
        Ok(self.t)
    }
}

fn refs(id: NodeId, map: &[u32]) -> impl Fn(usize) -> BitRef + '_ {
    move |h| BitRef { node: id, idx: map[h] }
}

/// Sets every kept leaf's checks; used to turn a gadget body into a
/// standalone experiment.
fn with_checks(mut t: ProtocolTree, checks: Vec<LogicalCheck>) -> ProtocolTree {
    for n in &mut t.nodes {
        if let Next::Leaf(term) = &mut n.next {
            if !term.discard {
                term.checks = checks.clone();
            }
        }
    }
    t
}

fn goto_encoder(s: &mut Sched, d: &[Qubit]) {
    for (i, &q) in d.iter().enumerate() {
        s.reset(q, if [0, 5, 6].contains(&i) { Basis::X } else { Basis::Z });
    }
    for (c, t) in [(0, 2), (5, 4), (6, 3), (5, 2), (6, 4), (3, 1), (2, 1), (0, 3)] {
        s.cx(d[c], d[t]);
    }
}

fn transversal(s: &mut Sched, d: &[Qubit], state: Cardinal) {
    for g in state.transversal() {
        for &q in d {
            s.gate1(g, q);
        }
    }
}

/// Noiseless encoder for a cardinal state: a single ideal node.
pub fn encode_ideal(layout: &Layout, block: usize, state: Cardinal) -> Result<ProtocolTree, GadgetError> {
    let data = &layout.data[block];
    let mut s = Sched::default();
    goto_encoder(&mut s, data);
    transversal(&mut s, data, state);
    let (mut c, _) = s.finish(&[]);
    c.ideal = true;
    let mut tb = Tb::new("encode", layout);
    let id = tb.node("ideal encode");
    tb.set(id, c);
    tb.leaf(id, Terminal { alive: data.clone(), ..Default::default() });
    tb.done(&[])
}

/// Goto encoder with a flagged Z_L check; a raised flag discards the shot.
fn prep_verified_body(state: Cardinal, layout: &Layout, block: usize) -> Result<ProtocolTree, GadgetError> {
    let data = &layout.data[block];
    let mut tb = Tb::new("prep-verified", layout);
    let enc = tb.node("encode and verify");
    let mut s = Sched::default();
    goto_encoder(&mut s, data);
    s.barrier();
    let a = layout.syndrome[block][0];
    s.reset(a, Basis::Z);
    for i in STEANE_LOGICAL {
        s.cx(data[i as usize], a);
    }
    let h = s.measure(a, Basis::Z, false);
    let (c, map) = s.finish(data);
    let flag = refs(enc, &map)(h);
    tb.set(enc, c);
    let rej = tb.node("reject");
    tb.leaf(rej, Terminal { discard: true, ..Default::default() });
    let acc = tb.node("accept");
    let mut s = Sched::default();
    transversal(&mut s, data, state);
    tb.set(acc, s.finish(data).0);
    tb.leaf(acc, Terminal { alive: data.clone(), ..Default::default() });
    tb.branch(enc, bit(flag), (rej, "flag raised"), (acc, "verified"));
    let tags: Vec<&str> = if matches!(state, Cardinal::PlusI | Cardinal::MinusI) {
        vec!["non-ft", "non-ft:transversal S after verification spreads a correlated X/Z pair"]
    } else {
        vec!["ft"]
    };
    tb.done(&tags)
}

/// Verified preparation (encoder plus flagged logical check) as a standalone tree.
pub fn prep_verified(state: Cardinal) -> Result<ProtocolTree, GadgetError> {
    let layout = Layout::new(Scheme::Simultaneous, 1);
    let mut t = prep_verified_body(state, &layout, 0)?;
    t.name = format!("prep-verified-{}", state.name());
    Ok(with_checks(t, vec![state_check(state, &layout.data[0], vec![], vec![])]))
}

/// Unflagged X then Z readout of a block followed by lookup corrections;
/// leaf node. `x_ctx` / `z_ctx` are the flag contexts for X / Z corrections.
#[allow(clippy::too_many_arguments)]
fn unflagged_leaf(
    tb: &mut Tb,
    layout: &Layout,
    block: usize,
    name: &str,
    x_ctx: Vec<Expr>,
    z_ctx: Vec<Expr>,
    random_x: bool,
    compare_x: Option<&[BitRef]>,
    state_gates: Option<Cardinal>,
) -> NodeId {
    let data = &layout.data[block];
    let id = tb.node(name);
    let mut s = Sched::default();
    let pairs = layout.bare_pairs(block);
    let hx = measure_plaquettes(&mut s, data, CheckType::X, &[0, 1, 2], &pairs, |_| random_x);
    let hz = measure_plaquettes(&mut s, data, CheckType::Z, &[0, 1, 2], &pairs, |_| false);
    let (mut c, map) = s.finish(data);
    let r = refs(id, &map);
    let xs: Vec<BitRef> = (0..3).map(|k| r(hx[&k].syn)).collect();
    let zs: Vec<BitRef> = (0..3).map(|k| r(hz[&k].syn)).collect();
    if let Some(prev) = compare_x {
        for k in 0..3 {
            c.push(Instr::Detector { bits: vec![prev[k], xs[k]] });
        }
    }
    c.push(frame_decode(zs.iter().map(|&b| bit(b)).collect(), x_ctx, data, Letter::X));
    c.push(frame_decode(xs.iter().map(|&b| bit(b)).collect(), z_ctx, data, Letter::Z));
    if let Some(st) = state_gates {
        let mut s = Sched::default();
        transversal(&mut s, data, st);
        c.extend(&s.finish(data).0);
    }
    tb.set(id, c);
    tb.leaf(id, Terminal { alive: data.clone(), ..Default::default() });
    id
}

/// Stabilizer-measurement preparation: data in |0>, two flagged X rounds,
/// falling back to an unflagged full readout on a flag or a disagreement.
fn prep_stabilizer_body(state: Cardinal, layout: &Layout, block: usize) -> Result<ProtocolTree, GadgetError> {
    let data = &layout.data[block];
    let pairs = layout.flagged_pairs(block);
    let mut tb = Tb::new("prep-stabilizer", layout);

    let r1 = tb.node("flagged X round 1");
    let mut s = Sched::default();
    for &q in data {
        s.reset(q, Basis::Z);
    }
    let h1 = measure_plaquettes(&mut s, data, CheckType::X, &[0, 1, 2], &pairs, |_| true);
    let (c, map) = s.finish(data);
    let r = refs(r1, &map);
    let s1: Vec<BitRef> = (0..3).map(|k| r(h1[&k].syn)).collect();
    let f1: Vec<BitRef> = (0..3).filter_map(|k| h1[&k].flag.map(&r)).collect();
    tb.set(r1, c);

    let u1 = unflagged_leaf(&mut tb, layout, block, "unflagged after round 1", f1.iter().map(|&b| bit(b)).collect(), vec![], true, Some(&s1), Some(state));

    let r2 = tb.node("flagged X round 2");
    let mut s = Sched::default();
    let h2 = measure_plaquettes(&mut s, data, CheckType::X, &[0, 1, 2], &pairs, |_| true);
    let (mut c, map) = s.finish(data);
    let r = refs(r2, &map);
    let s2: Vec<BitRef> = (0..3).map(|k| r(h2[&k].syn)).collect();
    let f2: Vec<BitRef> = (0..3).filter_map(|k| h2[&k].flag.map(&r)).collect();
    for k in 0..3 {
        c.push(Instr::Detector { bits: vec![s1[k], s2[k]] });
    }
    tb.set(r2, c);

    let ctx: Vec<Expr> = f1.iter().zip(&f2).map(|(&a, &b)| any(vec![bit(a), bit(b)])).collect();
    let u2 = unflagged_leaf(&mut tb, layout, block, "unflagged after round 2", ctx, vec![], true, Some(&s2), Some(state));

    let acc = tb.node("agreed");
    let mut c = Circuit::new();
    c.push(frame_decode(s2.iter().map(|&b| bit(b)).collect(), vec![], data, Letter::Z));
    let mut s = Sched::default();
    transversal(&mut s, data, state);
    c.extend(&s.finish(data).0);
    tb.set(acc, c);
    tb.leaf(acc, Terminal { alive: data.clone(), ..Default::default() });

    tb.branch(r1, any(f1.iter().map(|&b| bit(b)).collect()), (u1, "flag"), (r2, "no flag"));
    let mut trig: Vec<Expr> = f2.iter().map(|&b| bit(b)).collect();
    trig.extend((0..3).map(|k| Expr::Xor(vec![bit(s1[k]), bit(s2[k])])));
    tb.branch(r2, any(trig), (u2, "flag or disagreement"), (acc, "agree"));
    tb.done(&["ft"])
}

/// Stabilizer-measurement preparation as a standalone tree.
pub fn prep_stabilizer(state: Cardinal) -> Result<ProtocolTree, GadgetError> {
    prep_stabilizer_in(state, Scheme::Simultaneous)
}

pub fn prep_stabilizer_in(state: Cardinal, scheme: Scheme) -> Result<ProtocolTree, GadgetError> {
    let layout = Layout::new(scheme, 1);
    let mut t = prep_stabilizer_body(state, &layout, 0)?;
    t.name = format!("prep-stabilizer-{}", state.name());
    Ok(with_checks(t, vec![state_check(state, &layout.data[0], vec![], vec![])]))
}

/// One QEC round on `block`. Leaves carry the lookup corrections, so rounds
/// chain without cross-references.
pub fn qec_round(scheme: Scheme, flagged: bool, layout: &Layout, block: usize) -> Result<ProtocolTree, GadgetError> {
    let data = &layout.data[block];
    let name = format!("round-{}{}", scheme.name(), if flagged { "" } else { "-bare" });
    let mut tb = Tb::new(&name, layout);
    let fx = |v: &[Option<BitRef>]| -> Vec<Expr> { v.iter().map(|b| b.map_or(Expr::Const(false), bit)).collect() };
    match scheme {
        Scheme::Superdense => {
            let pairs = layout.bell_pairs(block)?;
            let r1 = tb.node("superdense round 1");
            let mut s = Sched::default();
            let h1 = measure_superdense(&mut s, data, &pairs, true, true);
            let (c, map) = s.finish(data);
            let r = refs(r1, &map);
            let a1: Vec<BitRef> = h1.iter().map(|h| r(h.0)).collect();
            let b1: Vec<BitRef> = h1.iter().map(|h| r(h.1)).collect();
            tb.set(r1, c);
            let r2 = tb.node("superdense round 2");
            let mut s = Sched::default();
            let h2 = measure_superdense(&mut s, data, &pairs, true, true);
            let (mut c, map) = s.finish(data);
            let r = refs(r2, &map);
            let a2: Vec<BitRef> = h2.iter().map(|h| r(h.0)).collect();
            let b2: Vec<BitRef> = h2.iter().map(|h| r(h.1)).collect();
            let (xk, zk) = superdense_keys(&a1, &b1, &a2, &b2);
            let (xt, zt) = superdense_tables()?;
            c.push(frame_decode_with(xt.entries.clone(), xk, vec![], data, Letter::X));
            c.push(frame_decode_with(zt.entries.clone(), zk, vec![], data, Letter::Z));
            tb.set(r2, c);
            tb.leaf(r2, Terminal { alive: data.clone(), ..Default::default() });
            let done = tb.node("clean");
            tb.leaf(done, Terminal { alive: data.clone(), ..Default::default() });
            let all: Vec<Expr> = a1.iter().chain(&b1).map(|&x| bit(x)).collect();
            tb.branch(r1, any(all), (r2, "triggered"), (done, "clean"));
            return tb.done(&["ft"]);
        }
        Scheme::Sequential | Scheme::Simultaneous => {}
    }
    let pairs = layout.pairs(block, flagged);
    let order: Vec<(CheckType, Vec<usize>)> = match scheme {
        Scheme::Simultaneous => vec![(CheckType::X, vec![0, 1, 2]), (CheckType::Z, vec![0, 1, 2])],
        _ => [CheckType::X, CheckType::Z].into_iter().flat_map(|t| (0..3).map(move |k| (t, vec![k]))).collect(),
    };
    let mut xf: Vec<Option<BitRef>> = vec![None; 3];
    let mut zf: Vec<Option<BitRef>> = vec![None; 3];
    let mut pending: Option<(NodeId, Expr, NodeId)> = None;
    for (i, (ty, plaqs)) in order.iter().enumerate() {
        let id = tb.node(&format!("{} {:?} {:?}", if flagged { "flagged" } else { "bare" }, ty, plaqs));
        if let Some((prev, trig, u)) = pending.take() {
            tb.branch(prev, trig, (u, "triggered"), (id, "clean"));
        }
        let mut s = Sched::default();
        let h = measure_plaquettes(&mut s, data, *ty, plaqs, &pairs, |_| false);
        let (c, map) = s.finish(data);
        let r = refs(id, &map);
        let mut bits = Vec::new();
        for (&k, ph) in &h {
            bits.push(bit(r(ph.syn)));
            if let Some(f) = ph.flag {
                bits.push(bit(r(f)));
                match ty {
                    CheckType::X => xf[k] = Some(r(f)),
                    CheckType::Z => zf[k] = Some(r(f)),
                }
            }
        }
        tb.set(id, c);
        let u = unflagged_leaf(&mut tb, layout, block, &format!("unflagged after step {i}"), fx(&xf), fx(&zf), false, None, None);
        pending = Some((id, any(bits), u));
    }
    let done = tb.node("clean");
    tb.leaf(done, Terminal { alive: data.clone(), ..Default::default() });
    let (prev, trig, u) = pending.expect("at least one step");
    tb.branch(prev, trig, (u, "triggered"), (done, "clean"));
    if flagged {
        tb.done(&["ft"])
    } else {
        tb.done(&["non-ft", "non-ft:bare ancillas let one fault spread to two data qubits"])
    }
}

/// Ideal encoding, `rounds` noisy QEC rounds, then an ideal lookup readout.
pub fn memory(scheme: Scheme, flagged: bool, state: Cardinal, rounds: usize) -> Result<ProtocolTree, GadgetError> {
    let layout = Layout::new(scheme, 1);
    let data = &layout.data[0];
    let mut t = encode_ideal(&layout, 0, state)?;
    let round = qec_round(scheme, flagged, &layout, 0)?;
    for _ in 0..rounds {
        t.chain(&round)?;
    }
    let readout = ProtocolTree::single(
        "readout",
        layout.n_qubits(),
        Circuit::new(),
        Terminal { checks: vec![state_check(state, data, vec![], vec![])], alive: data.clone(), ..Default::default() },
    );
    t.chain(&readout)?;
    t.name = format!("memory-{}{}-{}", scheme.name(), if flagged || scheme == Scheme::Superdense { "" } else { "-bare" }, state.name());
    t.tags = round.tags.clone();
    t.roles = layout.roles();
    Ok(t)
}

/// Single-fault probe for the table builder: a linear tree running one
/// readout (two for superdense, whose flags are round-to-round changes).
#[derive(Clone, Debug)]
pub struct SeProbe {
    pub tree: ProtocolTree,
    pub data: Vec<Qubit>,
    pub x_flags: Vec<Expr>,
    pub z_flags: Vec<Expr>,
    /// Measured syndrome keys the decoder reads (for X corrections, then
    /// for Z corrections); `None` means a perfect readout of the final error.
    pub syndromes: Option<(Vec<Expr>, Vec<Expr>)>,
}

impl SeProbe {
    /// Number of distinct syndrome keys.
    pub fn syndrome_space(&self) -> usize {
        1 << self.syndromes.as_ref().map_or(3, |(x, _)| x.len())
    }
}

fn probe_checks(data: &[Qubit]) -> Vec<LogicalCheck> {
    [Letter::Z, Letter::X]
        .map(|l| LogicalCheck { name: format!("{}_L", l.to_char()), observable: logical_op(data, l), decode: None, flip: Expr::Const(false) })
        .to_vec()
}

/// The probe expects a codeword input: every syndrome bit carries a
/// single-bit detector and the leaf checks both logical operators.
pub fn se_probe(kind: SeKind) -> Result<SeProbe, GadgetError> {
    let scheme = if kind == SeKind::Superdense { Scheme::Superdense } else { Scheme::Simultaneous };
    let layout = Layout::new(scheme, 1);
    let data = layout.data[0].clone();
    let mut tb = Tb::new(&format!("probe-{kind:?}").to_lowercase(), &layout);
    let mut syndromes = None;
    let (x_flags, z_flags) = if kind == SeKind::Superdense {
        let pairs = layout.bell_pairs(0)?;
        let mut rounds = Vec::new();
        let mut prev: Option<NodeId> = None;
        for i in 0..2 {
            let id = tb.node(&format!("superdense round {}", i + 1));
            if let Some(p) = prev {
                tb.edges(p, vec![(Expr::Const(true), id, "")]);
            }
            let mut s = Sched::default();
            let h = measure_superdense(&mut s, &data, &pairs, true, true);
            let (mut c, map) = s.finish(&data);
            // The second round stands in for a perfect readout.
            c.ideal = i == 1;
            let r = refs(id, &map);
            for &(a, b) in &h {
                c.push(Instr::Detector { bits: vec![r(a)] });
                c.push(Instr::Detector { bits: vec![r(b)] });
            }
            rounds.push(h.iter().map(|&(a, b)| (r(a), r(b))).collect::<Vec<_>>());
            tb.set(id, c);
            prev = Some(id);
        }
        tb.leaf(prev.expect("two rounds"), Terminal { checks: probe_checks(&data), alive: data.clone(), ..Default::default() });
        let (a1, b1): (Vec<BitRef>, Vec<BitRef>) = rounds[0].iter().copied().unzip();
        let (a2, b2): (Vec<BitRef>, Vec<BitRef>) = rounds[1].iter().copied().unzip();
        let (xk, zk) = superdense_keys(&a1, &b1, &a2, &b2);
        syndromes = Some((xk, zk));
        (vec![], vec![])
    } else {
        let id = tb.node("readout");
        let mut s = Sched::default();
        let pairs = layout.pairs(0, kind == SeKind::Flagged);
        let hx = measure_plaquettes(&mut s, &data, CheckType::X, &[0, 1, 2], &pairs, |_| false);
        let hz = measure_plaquettes(&mut s, &data, CheckType::Z, &[0, 1, 2], &pairs, |_| false);
        let (mut c, map) = s.finish(&data);
        let r = refs(id, &map);
        for h in hx.values().chain(hz.values()) {
            c.push(Instr::Detector { bits: vec![r(h.syn)] });
        }
        tb.set(id, c);
        tb.leaf(id, Terminal { checks: probe_checks(&data), alive: data.clone(), ..Default::default() });
        let fl = |h: &BTreeMap<usize, PlaqHandles>| -> Vec<Expr> { (0..3).filter_map(|k| h[&k].flag.map(|f| bit(r(f)))).collect() };
        (fl(&hx), fl(&hz))
    };
    Ok(SeProbe { tree: tb.done(&[])?, data, x_flags, z_flags, syndromes })
}

/// Circuit pieces of the transversal-S hazard: a |+> block carrying the
/// injected pair X2 Z5, then S_L, with one flagged round either before or
/// after the S gate.
pub fn s_gate_hazard(round_before_s: bool) -> Result<ProtocolTree, GadgetError> {
    let layout = Layout::new(Scheme::Simultaneous, 1);
    let data = layout.data[0].clone();
    let mut t = encode_ideal(&layout, 0, Cardinal::Plus)?;
    let mut inj = Circuit::new();
    inj.push(Instr::FrameXor { cond: Expr::Const(true), pauli: PauliFrame::from_letters([(data[2], Letter::X), (data[5], Letter::Z)]) });
    inj.ideal = true;
    t.chain(&ProtocolTree::single("inject", layout.n_qubits(), inj, Terminal::default()))?;
    let round = qec_round(Scheme::Simultaneous, true, &layout, 0)?;
    if round_before_s {
        t.chain(&round)?;
    }
    let mut s = Sched::default();
    for &q in &data {
        s.gate1(Gate::SDag, q);
    }
    let (mut sg, _) = s.finish(&[]);
    sg.ideal = true;
    t.chain(&ProtocolTree::single("transversal S", layout.n_qubits(), sg, Terminal::default()))?;
    if !round_before_s {
        t.chain(&round)?;
    }
    let readout = ProtocolTree::single(
        "readout",
        layout.n_qubits(),
        Circuit::new(),
        Terminal { checks: vec![state_check(Cardinal::PlusI, &data, vec![], vec![])], alive: data.clone(), ..Default::default() },
    );
    t.chain(&readout)?;
    t.name = format!("s-hazard-{}", if round_before_s { "corrected-first" } else { "corrected-after" });
    Ok(t)
}

/// Two-block joint X operators used by teleportation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Joint {
    /// Weight-4 boundary check across both blocks on local qubits 4 and 5.
    Boundary4,
    /// Weight-2 boundary check on local qubit 6.
    Boundary2,
    /// Weight-6 logical X X on local qubits 4, 5, 6.
    Logical,
}

impl Joint {
    fn support(self) -> &'static [u32] {
        match self {
            Joint::Boundary4 => &[4, 5],
            Joint::Boundary2 => &[6],
            Joint::Logical => &[4, 5, 6],
        }
    }

    fn name(self) -> &'static str {
        match self {
            Joint::Boundary4 => "boundary-4",
            Joint::Boundary2 => "boundary-2",
            Joint::Logical => "joint XX",
        }
    }
}

/// Measures a joint operator with CNOTs alternating between the blocks; the
/// weight-6 operator gets a flag around its middle CNOTs.
fn joint_measure(s: &mut Sched, layout: &Layout, j: Joint) -> (usize, Option<usize>) {
    let (a, f) = match j {
        Joint::Boundary4 => (layout.surgery[0], None),
        Joint::Boundary2 => (*layout.surgery.last().expect("surgery ancilla"), None),
        Joint::Logical => (layout.surgery[0], Some(layout.surgery[1])),
    };
    s.reset(a, Basis::X);
    if let Some(f) = f {
        s.reset(f, Basis::Z);
    }
    let order: Vec<Qubit> = j.support().iter().flat_map(|&i| [layout.data[0][i as usize], layout.data[1][i as usize]]).collect();
    for (i, &q) in order.iter().enumerate() {
        if let Some(f) = f {
            if i == 2 || i == 4 {
                s.cx(a, f);
            }
        }
        s.cx(a, q);
    }
    let m = s.measure(a, Basis::X, true);
    let fl = f.map(|f| s.measure(f, Basis::Z, false));
    (m, fl)
}

#[derive(Clone, Debug)]
struct Stored {
    j: Joint,
    bit: BitRef,
    /// Value came from a tie-breaking third measurement.
    third: bool,
}

/// Classical state carried down one branch of the teleportation tree.
#[derive(Clone, Debug)]
struct TelePath {
    stored: Vec<Stored>,
    /// No fault detected so far.
    clean: bool,
    /// Per block, per plaquette: contexts for X corrections.
    x_ctx: [Vec<Expr>; 2],
    /// Trusted X-check syndromes (for Z corrections), when any were nonzero.
    x_syn: Option<[Vec<Expr>; 2]>,
    /// Corrections to the stored joint value.
    flips: Vec<Expr>,
    /// Any flag raised while measuring the weight-6 operator.
    joint_flag: Vec<Expr>,
}

struct TeleCfg<'a> {
    layout: &'a Layout,
    state: Cardinal,
    joints: Vec<Joint>,
    repeat: bool,
    fixup: bool,
    /// Split of a merged code: the third Z plaquettes are random.
    merged: bool,
    halt_before_split: bool,
}

impl TeleCfg<'_> {
    fn both(&self) -> Vec<Qubit> {
        self.layout.data[0].iter().chain(&self.layout.data[1]).copied().collect()
    }
}

fn tele_joint(tb: &mut Tb, cfg: &TeleCfg, st: TelePath, idx: usize) -> NodeId {
    if idx == cfg.joints.len() {
        return tele_x_checks(tb, cfg, st);
    }
    let j = cfg.joints[idx];
    let id = tb.node(&format!("measure {}", j.name()));
    let mut s = Sched::default();
    let h1 = joint_measure(&mut s, cfg.layout, j);
    let h2 = cfg.repeat.then(|| joint_measure(&mut s, cfg.layout, j));
    let (mut c, map) = s.finish(&cfg.both());
    let r = refs(id, &map);
    let m1 = r(h1.0);
    let mut flags: Vec<Expr> = h1.1.map(|f| bit(r(f))).into_iter().collect();
    let Some(h2) = h2 else {
        let mut st = st;
        st.stored.push(Stored { j, bit: m1, third: false });
        st.joint_flag.extend(flags);
        tb.set(id, c);
        let child = tele_joint(tb, cfg, st, idx + 1);
        tb.edges(id, vec![(Expr::Const(true), child, "")]);
        return id;
    };
    let m2 = r(h2.0);
    flags.extend(h2.1.map(|f| bit(r(f))));
    c.push(Instr::Detector { bits: vec![m1, m2] });
    tb.set(id, c);
    let mut trouble = vec![Expr::Xor(vec![bit(m1), bit(m2)])];
    trouble.extend(flags.iter().cloned());
    let trouble = any(trouble);

    let mut ok = st.clone();
    ok.stored.push(Stored { j, bit: m2, third: false });
    ok.joint_flag.extend(flags.iter().cloned());
    let ok_child = tele_joint(tb, cfg, ok, idx + 1);

    let third = tb.node(&format!("measure {} again", j.name()));
    let mut s = Sched::default();
    let h3 = joint_measure(&mut s, cfg.layout, j);
    let (c3, map3) = s.finish(&cfg.both());
    let r3 = refs(third, &map3);
    tb.set(third, c3);
    let mut bad = st;
    bad.clean = false;
    bad.stored.push(Stored { j, bit: r3(h3.0), third: true });
    bad.joint_flag.extend(flags);
    bad.joint_flag.extend(h3.1.map(|f| bit(r3(f))));
    let bad_child = tele_joint(tb, cfg, bad, idx + 1);
    tb.edges(third, vec![(Expr::Const(true), bad_child, "")]);
    tb.branch(id, trouble, (third, "disagree or flag"), (ok_child, "agree"));
    id
}

/// Flagged X checks on both blocks after the joint measurements.
fn tele_x_checks(tb: &mut Tb, cfg: &TeleCfg, mut st: TelePath) -> NodeId {
    let id = tb.node("flagged X checks");
    let mut s = Sched::default();
    let hs: Vec<_> = (0..2)
        .map(|b| measure_plaquettes(&mut s, &cfg.layout.data[b], CheckType::X, &[0, 1, 2], &cfg.layout.flagged_pairs(b), |_| false))
        .collect();
    let (c, map) = s.finish(&cfg.both());
    let r = refs(id, &map);
    tb.set(id, c);
    let mut all = Vec::new();
    for b in 0..2 {
        for k in 0..3 {
            let ph = hs[b][&k];
            all.push(bit(r(ph.syn)));
            let mut ctx = Vec::new();
            if let Some(f) = ph.flag {
                all.push(bit(r(f)));
                ctx.push(bit(r(f)));
            }
            // An X fault inside the weight-6 circuit lands on the last pair
            // of a block, which the third-plaquette context corrects.
            if k == 2 {
                ctx.extend(st.joint_flag.iter().cloned());
            }
            st.x_ctx[b].push(any(ctx));
        }
    }
    let clean_child = tele_split(tb, cfg, st.clone());

    let ux = tb.node("unflagged X checks");
    let mut s = Sched::default();
    let us: Vec<_> = (0..2)
        .map(|b| measure_plaquettes(&mut s, &cfg.layout.data[b], CheckType::X, &[0, 1, 2], &cfg.layout.bare_pairs(b), |_| false))
        .collect();
    let (c, map) = s.finish(&cfg.both());
    let r = refs(ux, &map);
    tb.set(ux, c);
    let syn: [Vec<Expr>; 2] = [0, 1].map(|b| (0..3).map(|k| bit(r(us[b][&k].syn))).collect());
    let mut trig = st;
    trig.clean = false;
    trig.x_syn = Some(syn);
    tele_fixup(tb, cfg, trig, ux);
    tb.branch(id, any(all), (ux, "triggered"), (clean_child, "clean"));
    id
}

/// Parity of the lookup Z correction's overlap with a joint operator, as a
/// function of both blocks' X-check syndromes.
fn overlap_parity(j: Joint, bits: &[bool]) -> bool {
    let table = LookupTable::table_iii();
    let mut par = false;
    for b in 0..2 {
        let s = bits[3 * b..3 * b + 3].iter().fold(0usize, |acc, &x| (acc << 1) | x as usize);
        par ^= table.get(s, 0).iter().filter(|q| j.support().contains(q)).count() % 2 == 1;
    }
    par
}

/// Decides whether each stored joint value predates a detected Z error on
/// its support, re-measuring the operator when that is ambiguous.
fn tele_fixup(tb: &mut Tb, cfg: &TeleCfg, mut st: TelePath, from: NodeId) {
    if !cfg.fixup {
        let child = tele_split(tb, cfg, st);
        tb.edges(from, vec![(Expr::Const(true), child, "")]);
        return;
    }
    let syn = st.x_syn.clone().expect("fixup follows a triggered readout");
    let inputs: Vec<Expr> = syn[0].iter().chain(&syn[1]).cloned().collect();
    let need = |j: Joint| Expr::lut(inputs.clone(), move |b| overlap_parity(j, b));
    for s in st.stored.iter().filter(|s| s.third) {
        st.flips.push(need(s.j));
    }
    let open: Vec<Stored> = st.stored.iter().filter(|s| !s.third).cloned().collect();
    let mut edges = Vec::new();
    for mask in 0..1usize << open.len() {
        let pred = Expr::And(
            open.iter().enumerate().map(|(i, s)| if mask >> i & 1 == 1 { need(s.j) } else { Expr::not(need(s.j)) }).collect(),
        );
        if mask == 0 {
            let child = tele_split(tb, cfg, st.clone());
            edges.push((pred, child, "no overlap".to_string()));
            continue;
        }
        let id = tb.node("re-measure joint value");
        let mut s = Sched::default();
        let mut hs = Vec::new();
        for (i, o) in open.iter().enumerate() {
            if mask >> i & 1 == 1 {
                hs.push((o.clone(), joint_measure(&mut s, cfg.layout, o.j).0));
            }
        }
        let (c, map) = s.finish(&cfg.both());
        let r = refs(id, &map);
        tb.set(id, c);
        let mut br = st.clone();
        for (o, h) in hs {
            // Agreement means the error preceded the stored value.
            br.flips.push(Expr::not(Expr::Xor(vec![bit(r(h)), bit(o.bit)])));
        }
        let child = tele_split(tb, cfg, br);
        tb.edges(id, vec![(Expr::Const(true), child, "")]);
        edges.push((pred, id, format!("overlap mask {mask:b}")));
    }
    tb.t.set_edges(from, edges.into_iter().map(|(when, to, label)| Edge { when, to, label }).collect());
}

fn joint_value(st: &TelePath) -> Expr {
    Expr::Xor(st.stored.iter().map(|s| bit(s.bit)).chain(st.flips.iter().cloned()).collect())
}

fn tele_split(tb: &mut Tb, cfg: &TeleCfg, st: TelePath) -> NodeId {
    let (d0, d1) = (&cfg.layout.data[0], &cfg.layout.data[1]);
    if cfg.halt_before_split {
        let id = tb.node("halt");
        let mut c = Circuit::new();
        let a = c.compute(joint_value(&st));
        tb.set(id, c);
        let xx = PauliFrame::from_letters(logical_support(d0).into_iter().chain(logical_support(d1)).map(|q| (q, Letter::X)));
        let zz = PauliFrame::from_letters(logical_support(d0).into_iter().chain(logical_support(d1)).map(|q| (q, Letter::Z)));
        tb.leaf(
            id,
            Terminal {
                checks: vec![
                    LogicalCheck { name: "XX_L".into(), observable: xx, decode: None, flip: bit(BitRef { node: id, idx: a }) },
                    LogicalCheck { name: "ZZ_L".into(), observable: zz, decode: None, flip: Expr::Const(false) },
                ],
                alive: cfg.both(),
                ..Default::default()
            },
        );
        return id;
    }
    let random = |k: usize| cfg.merged && k == 2;
    let z_readout = |tb: &mut Tb, name: &str, flagged: bool| -> (NodeId, [Vec<Expr>; 2], [Vec<Expr>; 2]) {
        let id = tb.node(name);
        let mut s = Sched::default();
        let hs: Vec<_> = (0..2)
            .map(|b| measure_plaquettes(&mut s, &cfg.layout.data[b], CheckType::Z, &[0, 1, 2], &cfg.layout.pairs(b, flagged), random))
            .collect();
        let (mut c, map) = s.finish(&cfg.both());
        let r = refs(id, &map);
        c.push(Instr::Detector { bits: vec![r(hs[0][&2].syn), r(hs[1][&2].syn)] });
        tb.set(id, c);
        let syn = [0, 1].map(|b| (0..3).map(|k| bit(r(hs[b][&k].syn))).collect());
        let fl = [0, 1].map(|b| (0..3).filter_map(|k| hs[b][&k].flag.map(|f| bit(r(f)))).collect());
        (id, syn, fl)
    };
    if !st.clean {
        let (uz, syn, _) = z_readout(tb, "unflagged Z checks", false);
        let child = tele_finish(tb, cfg, &st, &syn, vec![]);
        tb.edges(uz, vec![(Expr::Const(true), child, "")]);
        return uz;
    }
    let (fz, syn, fl) = z_readout(tb, "flagged Z checks", true);
    let mut trig: Vec<Expr> = fl[0].iter().chain(&fl[1]).cloned().collect();
    for s in &syn {
        trig.extend(s[..2].iter().cloned());
    }
    trig.push(Expr::Xor(vec![syn[0][2].clone(), syn[1][2].clone()]));
    let (uz, usyn, _) = z_readout(tb, "unflagged Z checks", false);
    let uchild = tele_finish(tb, cfg, &st, &usyn, fl[1].clone());
    tb.edges(uz, vec![(Expr::Const(true), uchild, "")]);
    let done = tele_finish(tb, cfg, &st, &syn, fl[1].clone());
    tb.branch(fz, any(trig), (uz, "triggered"), (done, "clean"));
    fz
}

/// Gauge choice for the third Z plaquettes after a split: flip both (the
/// X6 X6 convention) when that explains the syndromes with fewer faulty
/// blocks. Inputs: block syndromes (3 + 3) then X-correction contexts (3 + 3).
fn gauge_flip(bits: &[bool]) -> bool {
    let s = |b: usize| bits[3 * b..3 * b + 3].iter().fold(0usize, |acc, &x| (acc << 1) | x as usize);
    let flagged = |b: usize| bits[6 + 3 * b..9 + 3 * b].iter().any(|&x| x);
    let cost = |gauge: bool| -> u32 { (0..2).map(|b| ((s(b) ^ gauge as usize) != 0 || flagged(b)) as u32).sum() };
    cost(true) < cost(false)
}

fn tele_finish(tb: &mut Tb, cfg: &TeleCfg, st: &TelePath, z_syn: &[Vec<Expr>; 2], z_ctx_dest: Vec<Expr>) -> NodeId {
    let (d0, d1) = (&cfg.layout.data[0], &cfg.layout.data[1]);
    let id = tb.node("readout");
    let r = |idx: u32| BitRef { node: id, idx };
    let mut c = Circuit::new();
    let inputs: Vec<Expr> = z_syn[0].iter().chain(&z_syn[1]).chain(&st.x_ctx[0]).chain(&st.x_ctx[1]).cloned().collect();
    let g = r(c.compute(Expr::lut(inputs, gauge_flip)));
    c.push(Instr::FrameXor { cond: bit(g), pauli: PauliFrame::from_letters([(d0[6], Letter::X), (d1[6], Letter::X)]) });
    let dest_syn = vec![z_syn[1][0].clone(), z_syn[1][1].clone(), Expr::Xor(vec![z_syn[1][2].clone(), bit(g)])];
    c.push(frame_decode(dest_syn, st.x_ctx[1].clone(), d1, Letter::X));
    if let Some(xs) = &st.x_syn {
        c.push(frame_decode(xs[1].clone(), vec![], d1, Letter::Z));
    }
    let a = r(c.compute(joint_value(st)));
    c.push(Instr::FrameXor { cond: bit(a), pauli: logical_op(d1, Letter::Z) });
    let ms: Vec<BitRef> = d0.iter().map(|&q| r(c.measure(q, Basis::Z, true))).collect();
    c.push(Instr::Idle { qubits: d1.clone(), duration: None });
    c.tick();
    let checks: Vec<Vec<BitRef>> = STEANE_PLAQUETTES.iter().map(|p| p.iter().map(|&i| ms[i as usize]).collect()).collect();
    for ch in &checks {
        c.push(Instr::Detector { bits: ch.clone() });
    }
    c.push(Instr::Decode(Decode {
        syndrome: checks.iter().map(|ch| Expr::parity(ch)).collect(),
        flags: st.x_ctx[0].clone(),
        table: table3(),
        target: DecodeTarget::Parity { support: STEANE_LOGICAL.to_vec() },
    }));
    let corr = r(c.record_len() - 1);
    let mut bparts: Vec<Expr> = STEANE_LOGICAL.iter().map(|&i| bit(ms[i as usize])).collect();
    bparts.push(bit(corr));
    let b = r(c.compute(Expr::Xor(bparts)));
    c.push(Instr::FrameXor { cond: bit(b), pauli: logical_op(d1, Letter::X) });
    tb.set(id, c);
    tb.leaf(
        id,
        Terminal {
            checks: vec![state_check(cfg.state, d1, vec![], z_ctx_dest)],
            report: vec![("a".into(), bit(a)), ("b".into(), bit(b))],
            alive: d1.clone(),
            ..Default::default()
        },
    );
    id
}

fn tele_core(cfg: &TeleCfg, name: &str, tags: &[&str]) -> Result<ProtocolTree, GadgetError> {
    let mut tb = Tb::new(name, cfg.layout);
    let st = TelePath {
        stored: vec![],
        clean: true,
        x_ctx: [vec![], vec![]],
        x_syn: None,
        flips: vec![],
        joint_flag: vec![],
    };
    tele_joint(&mut tb, cfg, st, 0);
    tb.done(tags)
}

/// Source preparation used by teleportation: verified for Z/X eigenstates,
/// stabilizer-measurement for the Y eigenstates.
fn source_prep(state: Cardinal, layout: &Layout) -> Result<ProtocolTree, GadgetError> {
    match state {
        Cardinal::PlusI | Cardinal::MinusI => prep_stabilizer_body(state, layout, 0),
        _ => prep_verified_body(state, layout, 0),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TeleportOptions {
    /// Stop after the merge and check the logical Bell-pair stabilizers.
    pub halt_before_split: bool,
}

fn assemble(state: Cardinal, layout: &Layout, core: ProtocolTree, name: String) -> Result<ProtocolTree, GadgetError> {
    let mut t = source_prep(state, layout)?;
    t.chain(&prep_verified_body(Cardinal::Zero, layout, 1)?)?;
    t.chain(&core)?;
    t.name = name;
    t.tags = core.tags.clone();
    t.roles = layout.roles();
    Ok(t)
}

/// Lattice-surgery teleportation from block 0 to block 1.
pub fn teleport_ls(state: Cardinal, scheme: Scheme) -> Result<ProtocolTree, GadgetError> {
    teleport_ls_with(state, scheme, TeleportOptions::default())
}

pub fn teleport_ls_with(state: Cardinal, scheme: Scheme, opts: TeleportOptions) -> Result<ProtocolTree, GadgetError> {
    if scheme == Scheme::Superdense {
        return Err(GadgetError::Unsupported("lattice surgery is generated for flagged readout only".into()));
    }
    if opts.halt_before_split && !matches!(state, Cardinal::Zero | Cardinal::One) {
        return Err(GadgetError::Unsupported("halting before the split leaves a Bell pair only for Z-basis inputs".into()));
    }
    let layout = Layout::new(scheme, 2);
    let cfg = TeleCfg {
        layout: &layout,
        state,
        joints: vec![Joint::Boundary4, Joint::Boundary2],
        repeat: true,
        fixup: true,
        merged: true,
        halt_before_split: opts.halt_before_split,
    };
    let core = tele_core(&cfg, "lattice-surgery", &["ft"])?;
    assemble(state, &layout, core, format!("teleport-ls-{}-{}", scheme.name(), state.name()))
}

/// Teleportation through a flagged weight-6 joint measurement.
pub fn teleport_direct(state: Cardinal, repeated: bool) -> Result<ProtocolTree, GadgetError> {
    let layout = Layout::new(Scheme::Simultaneous, 2);
    let cfg = TeleCfg {
        layout: &layout,
        state,
        joints: vec![Joint::Logical],
        repeat: repeated,
        fixup: repeated,
        merged: false,
        halt_before_split: false,
    };
    let tags: &[&str] = if repeated { &["ft"] } else { &["non-ft", "non-ft:one flipped joint outcome goes undetected"] };
    let core = tele_core(&cfg, "direct", tags)?;
    assemble(state, &layout, core, format!("teleport-direct-{}-{}", if repeated { "repeated" } else { "single" }, state.name()))
}

/// Table-I style resource summary for one readout scheme at d=3.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceCount {
    pub scheme: Scheme,
    /// Teleportation context: two blocks plus surgery ancillas.
    pub qubits_total: usize,
    pub data: Vec<usize>,
    pub syndrome: Vec<usize>,
    pub flags: Vec<usize>,
    pub surgery: usize,
    /// CNOTs of one full X+Z readout, per block.
    pub cnots_flagged: Vec<usize>,
    pub cnots_unflagged: Option<Vec<usize>>,
    /// (half round, full round).
    pub depth_flagged: (usize, usize),
    pub depth_unflagged: Option<(usize, usize)>,
}

/// Counts qubits from the teleportation layout and gates/depth from the
/// generated readout circuits.
pub fn count_resources(scheme: Scheme) -> Result<ResourceCount, GadgetError> {
    let layout = Layout::new(scheme, 2);
    let roles = layout.roles();
    let count = |prefix: &str| -> Vec<usize> { (0..2).map(|b| roles[&format!("{prefix}/{b}")].len()).collect() };
    let both = [CheckType::X, CheckType::Z];
    let measure = |kind: SeKind| -> Result<(usize, (usize, usize)), GadgetError> {
        let full = gen_se_circuit(kind, scheme, &both)?;
        let half = gen_se_circuit(kind, scheme, &[CheckType::X])?;
        Ok((full.count_gates(2), (circuit_depth(&half), circuit_depth(&full))))
    };
    let (flag_kind, bare) = match scheme {
        Scheme::Superdense => (SeKind::Superdense, None),
        _ => (SeKind::Flagged, Some(measure(SeKind::Bare)?)),
    };
    let (cf, df) = measure(flag_kind)?;
    Ok(ResourceCount {
        scheme,
        qubits_total: layout.n_qubits() as usize,
        data: count("data"),
        syndrome: count("syndrome"),
        flags: count("flag"),
        surgery: roles.get("surgery").map_or(0, |v| v.len()),
        cnots_flagged: vec![cf; 2],
        cnots_unflagged: bare.map(|(c, _)| vec![c; 2]),
        depth_flagged: df,
        depth_unflagged: bare.map(|(_, d)| d),
    })
}

/// Qubit counts per role of a generated tree.
pub fn qubit_partition(tree: &ProtocolTree) -> BTreeMap<String, usize> {
    tree.roles.iter().map(|(k, v)| (k.clone(), v.len())).collect()
}

/// Data qubits of the distance-d triangular code, (3d^2 + 1) / 4.
pub fn data_qubits(d: u32) -> u32 {
    (3 * d * d + 1) / 4
}
