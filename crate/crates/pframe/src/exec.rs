//! Branching execution of protocol trees.
//!
//! Shots are split into fixed-size chunks. Each chunk walks the tree on its
//! own, keyed by (seed, chunk, node), so results do not depend on how chunks
//! are spread over workers. Inside a chunk, shots at a node form a group: the
//! untouched shots share one base state and only faulty shots are stored.

use crate::circuit::{BitRef, DecodeTarget, Instr, NodeId};
use crate::gate::{apply_measurement, apply_reset, Basis};
use crate::pauli::{Letter, PauliFrame, Qubit};
use crate::sample::{keyed_rng, sample_noise_sites, SampleError};
use crate::store::{Members, Record, ShotState, ShotStore};
use crate::tree::{Next, ProtocolTree, Terminal};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const DEFAULT_CHUNK: u64 = 16_384;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExecOptions {
    pub seed: u64,
    /// 0 uses the global pool; 1 runs on the calling thread.
    pub workers: usize,
    pub chunk: u64,
}

impl Default for ExecOptions {
    fn default() -> Self {
        Self { seed: 0, workers: 0, chunk: DEFAULT_CHUNK }
    }
}

impl ExecOptions {
    pub fn seeded(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ExecError {
    #[error("node {node} ({name}): {matched} out-edge predicates hold, expected exactly one")]
    Predicate { node: NodeId, name: String, matched: usize },
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error("forced path is not a root-to-leaf path (at node {0})")]
    ForcedPath(NodeId),
    #[error("observable touches qubit {0}, which is not alive at the terminal")]
    DeadQubit(Qubit),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Applies one non-noise instruction to a shot. `cursor` is the node-local
/// record index of the next produced bit. With `rand`, a random stabilizer
/// (Z after Z-basis preparation or measurement, X after X-basis ones) is
/// injected with probability 1/2.
pub fn apply_instr(
    st: &mut ShotState,
    ins: &Instr,
    off: u32,
    cursor: &mut u32,
    offsets: &[u32],
    rand: Option<&mut ChaCha8Rng>,
) {
    match ins {
        Instr::Gate { gate, qubits } => gate.conjugate(&mut st.frame, qubits),
        Instr::Reset { qubit, basis } => {
            apply_reset(&mut st.frame, *qubit);
            randomize(&mut st.frame, *qubit, *basis, rand);
        }
        Instr::Measure { qubit, basis, .. } => {
            let b = apply_measurement(&mut st.frame, *qubit, *basis);
            st.rec.set(off + *cursor, b);
            *cursor += 1;
            randomize(&mut st.frame, *qubit, *basis, rand);
        }
        Instr::Compute(e) => {
            let rec = &st.rec;
            let v = e.eval(|b: BitRef| rec.get(offsets[b.node as usize] + b.idx));
            st.rec.set(off + *cursor, v);
            *cursor += 1;
        }
        Instr::FrameXor { cond, pauli } => {
            let rec = &st.rec;
            if cond.eval(|b: BitRef| rec.get(offsets[b.node as usize] + b.idx)) {
                st.frame.mul(pauli);
            }
        }
        Instr::Decode(d) => {
            let rec = &st.rec;
            let corr = d.correction(|b: BitRef| rec.get(offsets[b.node as usize] + b.idx)).to_vec();
            match &d.target {
                DecodeTarget::Frame { qubits, letter } => {
                    for l in corr {
                        st.frame.mul_letter(qubits[l as usize], *letter);
                    }
                }
                DecodeTarget::Parity { support } => {
                    let par = corr.iter().filter(|l| support.contains(l)).count() % 2 == 1;
                    st.rec.set(off + *cursor, par);
                    *cursor += 1;
                }
            }
        }
        Instr::Noise(_) | Instr::Idle { .. } | Instr::Detector { .. } | Instr::Tick => {}
    }
}

fn randomize(frame: &mut PauliFrame, q: Qubit, basis: Basis, rand: Option<&mut ChaCha8Rng>) {
    if let Some(r) = rand {
        if r.gen::<bool>() {
            frame.mul_letter(q, if basis == Basis::Z { Letter::Z } else { Letter::X });
        }
    }
}

/// Result of evaluating a terminal on one shot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub discarded: bool,
    pub failures: Vec<bool>,
    pub report: Vec<bool>,
}

impl Outcome {
    pub fn failed(&self) -> bool {
        !self.discarded && self.failures.iter().any(|&f| f)
    }
}

pub fn evaluate_terminal(t: &Terminal, st: &ShotState, offsets: &[u32]) -> Outcome {
    let rec = &st.rec;
    let f = |b: BitRef| rec.get(offsets[b.node as usize] + b.idx);
    let failures = t
        .checks
        .iter()
        .map(|c| {
            let anti = match &c.decode {
                Some(d) => {
                    let mut fr = st.frame.clone();
                    d.apply(&mut fr, f);
                    fr.anticommutes(&c.observable)
                }
                None => st.frame.anticommutes(&c.observable),
            };
            anti ^ c.flip.eval(f)
        })
        .collect();
    Outcome { discarded: t.discard, failures, report: t.report.iter().map(|(_, e)| e.eval(f)).collect() }
}

/// Anticommutation parity of the final frame with `observable`.
pub fn logical_outcome(terminal: &Terminal, frame: &PauliFrame, observable: &PauliFrame) -> Result<bool, ExecError> {
    for q in observable.support() {
        if !terminal.alive.contains(&q) {
            return Err(ExecError::DeadQubit(q));
        }
    }
    Ok(frame.anticommutes(observable))
}

/// Aggregated counts of an execution.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub shots: u64,
    pub discards: u64,
    /// Kept shots where at least one logical check failed.
    pub failures: u64,
    /// Shots hit by at least one noise event.
    pub faulty: u64,
    pub check_failures: BTreeMap<String, u64>,
    pub terminals: BTreeMap<NodeId, u64>,
    /// Joint report patterns as bit strings.
    pub reports: BTreeMap<String, u64>,
}

impl Tally {
    fn add(&mut self, node: NodeId, t: &Terminal, o: &Outcome, count: u64, faulty: bool) {
        if count == 0 {
            return;
        }
        self.shots += count;
        if faulty {
            self.faulty += count;
        }
        *self.terminals.entry(node).or_default() += count;
        if !t.report.is_empty() {
            let key: String = o.report.iter().map(|&b| if b { '1' } else { '0' }).collect();
            *self.reports.entry(key).or_default() += count;
        }
        if o.discarded {
            self.discards += count;
            return;
        }
        for (c, &f) in t.checks.iter().zip(&o.failures) {
            let e = self.check_failures.entry(c.name.clone()).or_default();
            if f {
                *e += count;
            }
        }
        if o.failed() {
            self.failures += count;
        }
    }

    pub fn merge(&mut self, o: &Tally) {
        self.shots += o.shots;
        self.discards += o.discards;
        self.failures += o.failures;
        self.faulty += o.faulty;
        for (k, v) in &o.check_failures {
            *self.check_failures.entry(k.clone()).or_default() += v;
        }
        for (k, v) in &o.terminals {
            *self.terminals.entry(*k).or_default() += v;
        }
        for (k, v) in &o.reports {
            *self.reports.entry(k.clone()).or_default() += v;
        }
    }

    pub fn kept(&self) -> u64 {
        self.shots - self.discards
    }

    /// Logical error rate over kept shots.
    pub fn p_l(&self) -> f64 {
        if self.kept() == 0 {
            0.0
        } else {
            self.failures as f64 / self.kept() as f64
        }
    }
}

/// Per-shot terminal data (for replay checks and small runs).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TerminalResult {
    pub shot: u64,
    pub terminal: NodeId,
    pub frame: PauliFrame,
    pub record: Record,
    pub outcome: Outcome,
}

struct Group {
    node: NodeId,
    members: Members,
    base: ShotState,
    store: ShotStore,
}

fn run_node(tree: &ProtocolTree, offsets: &[u32], g: &mut Group, seed: u64, chunk: u64) -> Result<(), ExecError> {
    let node = tree.node(g.node);
    let off = node.offset;
    let mut rng = keyed_rng(seed, &[chunk, g.node as u64]);
    let mut cursor = 0u32;
    for ins in &node.circuit.instrs {
        match ins {
            Instr::Noise(ch) => {
                let m = g.members.count();
                let pos = sample_noise_sites(ch.rate(), m as usize, &mut rng)?;
                if pos.is_empty() {
                    continue;
                }
                let ids = g.members.select(&pos);
                g.store.apply_channel(&ids, ch, &g.base, off, &mut rng);
            }
            _ => {
                let start = cursor;
                apply_instr(&mut g.base, ins, off, &mut cursor, offsets, None);
                for st in g.store.values_mut() {
                    let mut c = start;
                    apply_instr(st, ins, off, &mut c, offsets, None);
                }
            }
        }
    }
    Ok(())
}

fn select_edge(tree: &ProtocolTree, node: NodeId, st: &ShotState, offsets: &[u32]) -> Result<usize, ExecError> {
    let Next::Edges(es) = &tree.node(node).next else { unreachable!() };
    let rec = &st.rec;
    let f = |b: BitRef| rec.get(offsets[b.node as usize] + b.idx);
    let mut hit = None;
    let mut matched = 0;
    for (i, e) in es.iter().enumerate() {
        if e.when.eval(f) {
            matched += 1;
            hit = Some(i);
        }
    }
    match (matched, hit) {
        (1, Some(i)) => Ok(i),
        _ => Err(ExecError::Predicate { node, name: tree.node(node).name.clone(), matched }),
    }
}

/// Walks one chunk; `sink` receives each terminal group.
fn run_chunk<F>(tree: &ProtocolTree, opts: &ExecOptions, chunk: u64, start: u64, len: u64, mut sink: F) -> Result<(), ExecError>
where
    F: FnMut(NodeId, &Members, &ShotState, ShotStore),
{
    let offsets = tree.offsets();
    let rec_bits = tree.max_record_len();
    let mut stack = vec![Group {
        node: 0,
        members: Members::range(start, len),
        base: ShotState::new(rec_bits),
        store: ShotStore::new(start + len),
    }];
    while let Some(mut g) = stack.pop() {
        run_node(tree, &offsets, &mut g, opts.seed, chunk)?;
        match &tree.node(g.node).next {
            Next::Leaf(_) => sink(g.node, &g.members, &g.base, g.store),
            Next::Edges(es) => {
                let base_edge = if g.members.count() > g.store.len() as u64 {
                    Some(select_edge(tree, g.node, &g.base, &offsets)?)
                } else {
                    None
                };
                let mut moved: Vec<(usize, u64)> = Vec::new();
                for (&id, st) in g.store.iter() {
                    let e = select_edge(tree, g.node, st, &offsets)?;
                    if Some(e) != base_edge {
                        moved.push((e, id));
                    }
                }
                let mut parts: Vec<Option<Group>> = (0..es.len()).map(|_| None).collect();
                let moved_ids: Vec<u64> = moved.iter().map(|m| m.1).collect();
                for (e, id) in moved {
                    let st = g.store.remove(id).expect("moved shot is stored");
                    let part = parts[e].get_or_insert_with(|| Group {
                        node: es[e].to,
                        members: Members::Only(Vec::new()),
                        base: g.base.clone(),
                        store: ShotStore::new(g.store.n_shots),
                    });
                    if let Members::Only(v) = &mut part.members {
                        v.push(id);
                    }
                    part.store.insert(id, st);
                }
                // Without trivial members every shot has moved and `g` is spent.
                if let Some(b) = base_edge {
                    g.members.remove(&moved_ids);
                    g.node = es[b].to;
                    parts[b] = Some(g);
                }
                for p in parts.into_iter().rev().flatten() {
                    if let Members::Only(v) = &p.members {
                        debug_assert!(v.windows(2).all(|w| w[0] < w[1]));
                    }
                    if p.members.count() > 0 {
                        stack.push(p);
                    }
                }
            }
        }
    }
    Ok(())
}

fn chunks(n_shots: u64, chunk: u64) -> Vec<(u64, u64, u64)> {
    let chunk = chunk.max(1);
    (0..n_shots.div_ceil(chunk))
        .map(|c| {
            let start = c * chunk;
            (c, start, chunk.min(n_shots - start))
        })
        .collect()
}

#[cfg(feature = "parallel")]
fn map_chunks<T, F>(list: &[(u64, u64, u64)], workers: usize, f: F) -> Result<Vec<T>, ExecError>
where
    T: Send,
    F: Fn(&(u64, u64, u64)) -> Result<T, ExecError> + Sync,
{
    use rayon::prelude::*;
    match workers {
        1 => list.iter().map(f).collect(),
        0 => list.par_iter().map(&f).collect(),
        w => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| ExecError::Pool(e.to_string()))?;
            pool.install(|| list.par_iter().map(&f).collect())
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn map_chunks<T, F>(list: &[(u64, u64, u64)], _workers: usize, f: F) -> Result<Vec<T>, ExecError>
where
    F: Fn(&(u64, u64, u64)) -> Result<T, ExecError>,
{
    list.iter().map(f).collect()
}

fn tally_chunk(tree: &ProtocolTree, opts: &ExecOptions, c: &(u64, u64, u64)) -> Result<Tally, ExecError> {
    let offsets = tree.offsets();
    let mut tally = Tally::default();
    run_chunk(tree, opts, c.0, c.1, c.2, |node, members, base, store| {
        let t = tree.terminal(node).expect("leaf");
        let trivial = members.count() - store.len() as u64;
        if trivial > 0 {
            tally.add(node, t, &evaluate_terminal(t, base, &offsets), trivial, false);
        }
        for (_, st) in store.iter() {
            tally.add(node, t, &evaluate_terminal(t, st, &offsets), 1, true);
        }
    })?;
    Ok(tally)
}

/// Runs `n_shots` through the tree and returns aggregated counts.
pub fn execute(tree: &ProtocolTree, n_shots: u64, opts: &ExecOptions) -> Result<Tally, ExecError> {
    let list = chunks(n_shots, opts.chunk);
    let parts = map_chunks(&list, opts.workers, |c| tally_chunk(tree, opts, c))?;
    let mut out = Tally::default();
    for p in &parts {
        out.merge(p);
    }
    Ok(out)
}

/// Same as [`execute`] on the calling thread only.
pub fn execute_sequential(tree: &ProtocolTree, n_shots: u64, opts: &ExecOptions) -> Result<Tally, ExecError> {
    let mut out = Tally::default();
    for c in chunks(n_shots, opts.chunk) {
        out.merge(&tally_chunk(tree, opts, &c)?);
    }
    Ok(out)
}

/// Per-shot results ordered by shot index.
pub fn execute_detailed(tree: &ProtocolTree, n_shots: u64, opts: &ExecOptions) -> Result<Vec<TerminalResult>, ExecError> {
    let list = chunks(n_shots, opts.chunk);
    let parts = map_chunks(&list, opts.workers, |c| {
        let offsets = tree.offsets();
        let mut out = Vec::new();
        run_chunk(tree, opts, c.0, c.1, c.2, |node, members, base, store| {
            let t = tree.terminal(node).expect("leaf");
            let base_out = evaluate_terminal(t, base, &offsets);
            for id in members.iter() {
                let st = store.get(id).unwrap_or(base);
                let outcome = if store.get(id).is_some() { evaluate_terminal(t, st, &offsets) } else { base_out.clone() };
                out.push(TerminalResult { shot: id, terminal: node, frame: st.frame.clone(), record: st.rec.clone(), outcome });
            }
        })?;
        Ok(out)
    })?;
    let mut all: Vec<TerminalResult> = parts.into_iter().flatten().collect();
    all.sort_by_key(|r| r.shot);
    Ok(all)
}

/// A forced outcome of one channel site.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Injection {
    pub node: NodeId,
    pub instr: u32,
    pub outcome: u32,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SingleOptions<'a> {
    /// Seed for stabilizer randomization; `None` runs the all-zero reference.
    pub randomize: Option<u64>,
    /// Follow this root-to-leaf path regardless of predicates.
    pub forced: Option<&'a [NodeId]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SingleRun {
    pub path: Vec<NodeId>,
    pub terminal: NodeId,
    pub state: ShotState,
    /// Out-edge predicate values at each non-leaf node on the path.
    pub edge_values: Vec<Vec<bool>>,
    pub outcome: Outcome,
}

/// Runs one shot with explicit channel outcomes and no sampled noise.
pub fn run_single(tree: &ProtocolTree, injections: &[Injection], opts: SingleOptions<'_>) -> Result<SingleRun, ExecError> {
    let offsets = tree.offsets();
    let mut st = ShotState::new(tree.max_record_len());
    let mut node = 0;
    let mut path = Vec::new();
    let mut edge_values = Vec::new();
    let mut rng = opts.randomize.map(|s| keyed_rng(s, &[u64::MAX]));
    loop {
        if let Some(f) = opts.forced {
            if f.get(path.len()) != Some(&node) {
                return Err(ExecError::ForcedPath(node));
            }
        }
        path.push(node);
        let n = tree.node(node);
        let mut cursor = 0;
        for (k, ins) in n.circuit.instrs.iter().enumerate() {
            match ins {
                Instr::Noise(ch) => {
                    for inj in injections.iter().filter(|i| i.node == node && i.instr as usize == k) {
                        st.apply_effect(&ch.effect(inj.outcome as usize), n.offset);
                    }
                }
                _ => apply_instr(&mut st, ins, n.offset, &mut cursor, &offsets, rng.as_mut()),
            }
        }
        match &n.next {
            Next::Leaf(t) => {
                if let Some(f) = opts.forced {
                    if f.len() != path.len() {
                        return Err(ExecError::ForcedPath(node));
                    }
                }
                let outcome = evaluate_terminal(t, &st, &offsets);
                return Ok(SingleRun { path, terminal: node, state: st, edge_values, outcome });
            }
            Next::Edges(es) => {
                let rec = &st.rec;
                let vals: Vec<bool> = es.iter().map(|e| e.when.eval(|b: BitRef| rec.get(offsets[b.node as usize] + b.idx))).collect();
                let next = match opts.forced {
                    Some(f) => {
                        let want = *f.get(path.len()).ok_or(ExecError::ForcedPath(node))?;
                        if !es.iter().any(|e| e.to == want) {
                            return Err(ExecError::ForcedPath(want));
                        }
                        want
                    }
                    None => {
                        let hits: Vec<usize> = (0..vals.len()).filter(|&i| vals[i]).collect();
                        if hits.len() != 1 {
                            return Err(ExecError::Predicate { node, name: n.name.clone(), matched: hits.len() });
                        }
                        es[hits[0]].to
                    }
                };
                edge_values.push(vals);
                node = next;
            }
        }
    }
}

/// Path taken by a noiseless shot.
pub fn reference_path(tree: &ProtocolTree) -> Result<Vec<NodeId>, ExecError> {
    Ok(run_single(tree, &[], SingleOptions::default())?.path)
}

/// Every (site, outcome) on the given nodes.
pub fn fault_sites(tree: &ProtocolTree, path: &[NodeId]) -> Vec<Injection> {
    let mut out = Vec::new();
    for &node in path {
        for (k, ch) in tree.node(node).circuit.noise_sites() {
            for o in 0..ch.n_outcomes() {
                out.push(Injection { node, instr: k as u32, outcome: o as u32 });
            }
        }
    }
    out
}
