//! Maps protocol trees onto a trap: placement, routing and timing of every
//! gate, readout and transport primitive.

use crate::arch::{ArchError, Architecture, IonRole, Link, Model, QubitRoles, ZoneRole};
use crate::schedule::{apply, NodeSchedule, Placement, Schedule, TimedOp};
use crate::timing::{OpKind, TimingScenario};
use pframe::{Circuit, Instr, NodeId, ProtocolTree, Qubit};
use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TranspileError {
    #[error(transparent)]
    Arch(#[from] ArchError),
    #[error("node {node}: {constraint} constraint cannot be met ({detail})")]
    Infeasible { node: NodeId, constraint: String, detail: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Gate,
    Measure,
    Reset,
}

#[derive(Clone, Debug)]
struct Item {
    kind: Kind,
    instrs: Vec<usize>,
    ions: Vec<Qubit>,
}

/// Quantum instructions grouped into layers on disjoint qubits, cut at ticks.
fn layers(c: &Circuit) -> Vec<Vec<Item>> {
    let mut out = Vec::new();
    let mut cur: Vec<Item> = Vec::new();
    let mut used = BTreeSet::new();
    for (k, ins) in c.instrs.iter().enumerate() {
        let (kind, ions) = match ins {
            Instr::Gate { qubits, .. } => (Kind::Gate, qubits.clone()),
            Instr::Measure { qubit, .. } => (Kind::Measure, vec![*qubit]),
            Instr::Reset { qubit, .. } => (Kind::Reset, vec![*qubit]),
            Instr::Tick => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                    used.clear();
                }
                continue;
            }
            _ => continue,
        };
        if ions.iter().any(|q| used.contains(q)) {
            out.push(std::mem::take(&mut cur));
            used.clear();
        }
        used.extend(ions.iter().copied());
        cur.push(Item { kind, instrs: vec![k], ions });
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Readouts paired two per working well.
fn pair_readouts(items: Vec<Item>) -> Vec<Item> {
    items
        .chunks(2)
        .map(|ch| Item {
            kind: Kind::Measure,
            instrs: ch.iter().flat_map(|i| i.instrs.clone()).collect(),
            ions: ch.iter().flat_map(|i| i.ions.clone()).collect(),
        })
        .collect()
}

/// Transpiles every node, carrying the final placement of a node into its
/// children. Times restart at zero in each node.
pub fn transpile(tree: &ProtocolTree, arch: &Architecture, scenario: &TimingScenario) -> Result<Schedule, TranspileError> {
    let roles = QubitRoles::from_tree(tree)?;
    let start = initial_placement(arch, &roles, scenario.nbar0)?;
    let n = tree.nodes.len();
    let mut children = vec![Vec::new(); n];
    let mut stack = Vec::new();
    for (i, node) in tree.nodes.iter().enumerate() {
        match node.parent {
            Some(p) => children[p as usize].push(i),
            None => stack.push((i, start.clone())),
        }
    }
    stack.reverse();
    let mut out: Vec<Option<NodeSchedule>> = vec![None; n];
    while let Some((id, p)) = stack.pop() {
        let node = &tree.nodes[id];
        let mut e = Engine::new(arch, scenario, &roles, id as NodeId, p, node.circuit.instrs.len());
        if !node.circuit.ideal {
            e.run(&node.circuit)?;
        }
        let (ns, end) = e.finish(node.name.clone());
        for &c in children[id].iter().rev() {
            stack.push((c, end.clone()));
        }
        out[id] = Some(ns);
    }
    Ok(Schedule { arch: arch.kind, scenario: scenario.tag, nodes: out.into_iter().map(|s| s.expect("every node is reached")).collect() })
}

fn site_of(arch: &Architecture, zone: usize) -> usize {
    arch.zone_sites[zone][0]
}

/// Home positions. Segmented: one chain of data then ancillas per block, and
/// surgery ions in the interface zone. Integrated: surgery ions in interface
/// idle wells, then block ions spread one per idle well before doubling up.
pub fn initial_placement(arch: &Architecture, roles: &QubitRoles, nbar0: f64) -> Result<Placement, ArchError> {
    let mut p = Placement::empty(arch.sites.len(), roles.role.len());
    p.nbar.fill(nbar0);
    let overfull = |region: &str, ions: usize| ArchError::Overfull { region: region.into(), ions };
    match arch.model {
        Model::Segmented => {
            for b in 0..2 {
                let chain: Vec<Qubit> = roles.data[b].iter().chain(&roles.ancilla[b]).copied().collect();
                if chain.is_empty() {
                    continue;
                }
                let z = arch.region_zone(b, ZoneRole::Working).ok_or_else(|| overfull("block", chain.len()))?;
                if chain.len() > arch.zones[z].capacity as usize {
                    return Err(overfull(&arch.zones[z].name, chain.len()));
                }
                p.sites[site_of(arch, z)].push(chain);
            }
            if !roles.surgery.is_empty() {
                let z = arch.region_zone(2, ZoneRole::Detection).ok_or_else(|| overfull("interface", roles.surgery.len()))?;
                for &q in &roles.surgery {
                    p.sites[site_of(arch, z)].push(vec![q]);
                }
            }
        }
        Model::Integrated => {
            let idle = |r: usize| -> Vec<usize> {
                arch.regions[r].iter().filter(|&&z| arch.zones[z].role == ZoneRole::Idle).flat_map(|&z| arch.zone_sites[z].clone()).collect()
            };
            let mut fill = |sites: &[usize], ions: &[Qubit], region: &str| -> Result<(), ArchError> {
                let mut left = ions.iter().copied();
                for pass in 1..=2 {
                    for &s in sites {
                        while p.ions_in(s) < pass.min(arch.well_capacity(s)) {
                            let Some(q) = left.next() else { return Ok(()) };
                            match p.sites[s].first_mut() {
                                Some(c) => c.push(q),
                                None => p.sites[s].push(vec![q]),
                            }
                        }
                    }
                }
                match left.next() {
                    None => Ok(()),
                    Some(_) => Err(overfull(region, ions.len())),
                }
            };
            fill(&idle(2), &roles.surgery, "interface")?;
            for b in 0..2 {
                let ions: Vec<Qubit> = roles.data[b].iter().chain(&roles.ancilla[b]).copied().collect();
                fill(&idle(b), &ions, if b == 0 { "block0" } else { "block1" })?;
            }
        }
    }
    Ok(p)
}

const INF: u32 = u32::MAX / 4;
/// Extra cost for passing a full well, which must be cleared first.
const FORCE: u32 = 8;
const EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug)]
struct Hop {
    from: usize,
    from_entry: Option<u8>,
    exit: u8,
    link: Link,
}

/// Shortest routes for one ion over (well, entry end) states. Costs count
/// primitives, so every timing scenario gets the same operation sequence.
struct Paths {
    dist: Vec<[u32; 2]>,
    prev: Vec<[Option<Hop>; 2]>,
}

impl Paths {
    fn to(&self, site: usize) -> Option<(u32, u8)> {
        let [a, b] = self.dist[site];
        let best = if a <= b { (a, 0) } else { (b, 1) };
        (best.0 < INF).then_some(best)
    }

    fn hops(&self, site: usize, entry: u8) -> Vec<Hop> {
        let mut out = Vec::new();
        let mut cur = self.prev[site][entry as usize];
        while let Some(h) = cur {
            out.push(h);
            cur = h.from_entry.and_then(|e| self.prev[h.from][e as usize]);
        }
        out.reverse();
        out
    }
}

struct Engine<'a> {
    arch: &'a Architecture,
    sc: &'a TimingScenario,
    roles: &'a QubitRoles,
    node: NodeId,
    start: Placement,
    p: Placement,
    ops: Vec<TimedOp>,
    site_free: Vec<f64>,
    hub_free: Vec<f64>,
    ready: Vec<f64>,
    times: Vec<Option<(f64, f64)>>,
}

impl<'a> Engine<'a> {
    fn new(arch: &'a Architecture, sc: &'a TimingScenario, roles: &'a QubitRoles, node: NodeId, p: Placement, n_instrs: usize) -> Self {
        Engine {
            arch,
            sc,
            roles,
            node,
            start: p.clone(),
            site_free: vec![0.0; arch.sites.len()],
            hub_free: vec![0.0; arch.hubs.len()],
            ready: vec![0.0; p.nbar.len()],
            p,
            ops: Vec::new(),
            times: vec![None; n_instrs],
        }
    }

    fn err(&self, constraint: &str, detail: String) -> TranspileError {
        TranspileError::Infeasible { node: self.node, constraint: constraint.into(), detail }
    }

    fn finish(self, name: String) -> (NodeSchedule, Placement) {
        let op_end = self.ops.iter().map(TimedOp::end).fold(0.0, f64::max);
        let duration = self.times.iter().flatten().map(|t| t.1).fold(op_end, f64::max);
        let ns = NodeSchedule { node: self.node, name, start: self.start, ops: self.ops, instr_times: self.times, duration };
        (ns, self.p)
    }

    fn timing(&self, kind: OpKind) -> (f64, f64) {
        match self.arch.model {
            Model::Integrated => {
                let t = self.sc.integrated_op(kind);
                (t.duration_us, t.excitation())
            }
            Model::Segmented => (self.sc.segmented_duration(kind), 0.0),
        }
    }

    fn push(&mut self, op: TimedOp) -> Result<(), TranspileError> {
        apply(&mut self.p, &op, self.sc.nbar0).map_err(|(rule, d)| self.err(rule, d))?;
        self.ops.push(op);
        Ok(())
    }

    /// Emits a primitive at the earliest time its ions, wells and junction
    /// are free; returns its end.
    fn emit(&mut self, kind: OpKind, ions: Vec<Qubit>, site: usize, to: Option<usize>, hub: Option<usize>, end: Option<u8>) -> Result<f64, TranspileError> {
        let (duration, excitation) = self.timing(kind);
        let mut start = ions.iter().map(|&q| self.ready[q as usize]).fold(self.site_free[site], f64::max);
        if let Some(t) = to {
            start = start.max(self.site_free[t]);
        }
        if let Some(h) = hub {
            start = start.max(self.hub_free[h]);
        }
        let stop = start + duration;
        for &q in &ions {
            self.ready[q as usize] = stop;
        }
        self.site_free[site] = stop;
        if let Some(t) = to {
            self.site_free[t] = stop;
        }
        if let Some(h) = hub {
            self.hub_free[h] = stop;
        }
        self.push(TimedOp { kind, ions, site, to, hub, end, start, duration, excitation, nbar: 0.0, instr: None })?;
        Ok(stop)
    }

    fn run(&mut self, c: &Circuit) -> Result<(), TranspileError> {
        for layer in layers(c) {
            let (resets, rest): (Vec<Item>, Vec<Item>) = layer.into_iter().partition(|i| i.kind == Kind::Reset);
            for r in resets {
                let t = self.ready[r.ions[0] as usize];
                self.times[r.instrs[0]] = Some((t, t));
            }
            let (gates, reads): (Vec<Item>, Vec<Item>) = rest.into_iter().partition(|i| i.kind == Kind::Gate);
            match self.arch.model {
                Model::Integrated => {
                    self.run_batches(gates)?;
                    self.run_batches(pair_readouts(reads))?;
                }
                Model::Segmented => {
                    for g in gates {
                        self.seg_gate(&g)?;
                    }
                    self.seg_readout(&reads)?;
                }
            }
        }
        Ok(())
    }

    // ---- integrated traps ----

    fn others(&self, site: usize, ion: Qubit) -> usize {
        self.p.sites[site].iter().flatten().filter(|&&q| q != ion).count()
    }

    fn paths(&self, ion: Qubit, blocked: &BTreeSet<usize>) -> Paths {
        let n = self.arch.sites.len();
        let mut dist = vec![[INF; 2]; n];
        let mut prev = vec![[None; 2]; n];
        let (src, c) = self.p.locate(ion).expect("every ion is placed");
        let cr = &self.p.sites[src][c];
        let mut heap = BinaryHeap::new();
        let entry_cost = |v: usize| u32::from(self.others(v, ion) >= 1);
        let relax = |dist: &mut Vec<[u32; 2]>, prev: &mut Vec<[Option<Hop>; 2]>, heap: &mut BinaryHeap<_>, d: u32, hop: Hop| {
            let v = hop.link.site;
            if v == src || blocked.contains(&v) {
                return;
            }
            let nd = d + 1 + entry_cost(v);
            let e = hop.link.end as usize;
            if nd < dist[v][e] {
                dist[v][e] = nd;
                prev[v][e] = Some(hop);
                heap.push(Reverse((nd, v, hop.link.end)));
            }
        };
        for exit in 0..2u8 {
            let at_exit = if exit == 0 { cr[0] == ion } else { *cr.last().expect("nonempty") == ion };
            let d = if cr.len() > 1 { 1 + u32::from(!at_exit) } else { 0 };
            for &link in &self.arch.sites[src].ends[exit as usize] {
                relax(&mut dist, &mut prev, &mut heap, d, Hop { from: src, from_entry: None, exit, link });
            }
        }
        while let Some(Reverse((d, v, ein))) = heap.pop() {
            if d > dist[v][ein as usize] {
                continue;
            }
            let k = self.others(v, ion);
            let full = k >= self.arch.well_capacity(v);
            for exit in 0..2u8 {
                let extra = if k >= 1 { 1 + u32::from(exit != ein) } else { 0 } + if full { FORCE } else { 0 };
                for &link in &self.arch.sites[v].ends[exit as usize] {
                    relax(&mut dist, &mut prev, &mut heap, d + extra, Hop { from: v, from_entry: Some(ein), exit, link });
                }
            }
        }
        Paths { dist, prev }
    }

    fn hop(&mut self, ion: Qubit, exit: u8, link: Link) -> Result<(), TranspileError> {
        let (u, c) = self.p.locate(ion).expect("every ion is placed");
        let cr = self.p.sites[u][c].clone();
        if cr.len() > 2 {
            return Err(self.err("well-capacity", format!("crystal {cr:?} cannot be split by one ion")));
        }
        if cr.len() == 2 {
            let at_exit = if exit == 0 { cr[0] == ion } else { cr[1] == ion };
            if !at_exit {
                self.emit(OpKind::Swap, cr.clone(), u, None, None, None)?;
            }
            self.emit(OpKind::Split, vec![ion], u, None, None, None)?;
        }
        let kind = if link.hub.is_some() { OpKind::JunctionCross } else { OpKind::LinearShuttle };
        self.emit(kind, vec![ion], u, Some(link.site), link.hub, Some(link.end))?;
        if self.p.sites[link.site].len() == 2 {
            self.emit(OpKind::Merge, vec![ion], link.site, None, None, None)?;
        }
        Ok(())
    }

    /// Moves `ion` to `target` along the least congested route, clearing
    /// full wells on the way; false if no route avoids `blocked`.
    fn route(&mut self, ion: Qubit, target: usize, blocked: &BTreeSet<usize>, keep: &[Qubit]) -> Result<bool, TranspileError> {
        if self.p.locate(ion).map(|l| l.0) == Some(target) {
            return Ok(true);
        }
        let ps = self.paths(ion, blocked);
        let Some((_, entry)) = ps.to(target) else { return Ok(false) };
        let mut keep = keep.to_vec();
        keep.push(ion);
        for h in ps.hops(target, entry) {
            let u = h.link.site;
            if self.others(u, ion) >= self.arch.well_capacity(u) && !self.make_room(u, &keep, blocked)? {
                return Ok(false);
            }
            self.hop(ion, h.exit, h.link)?;
        }
        Ok(true)
    }

    /// Frees one slot in `site` by moving an ion outside `keep` toward the
    /// nearest idle well with room. Every full well on the way hands one ion
    /// to the next, starting from the far end. Wells in `protected` are
    /// neither entered nor used as destinations.
    fn make_room(&mut self, site: usize, keep: &[Qubit], protected: &BTreeSet<usize>) -> Result<bool, TranspileError> {
        let movers: Vec<Qubit> = self.p.sites[site].iter().flatten().copied().filter(|q| !keep.contains(q)).collect();
        let mut best: Option<(u32, Vec<Hop>)> = None;
        // Full wells holding only kept ions cannot hand one on.
        let mut blocked = protected.clone();
        blocked.extend((0..self.arch.sites.len()).filter(|&v| {
            v != site && self.p.ions_in(v) >= self.arch.well_capacity(v) && self.p.sites[v].iter().flatten().all(|q| keep.contains(q))
        }));
        for &x in &movers {
            let ps = self.paths(x, &blocked);
            let cand = (0..self.arch.sites.len())
                .filter(|&t| t != site && self.arch.site_role(t) == ZoneRole::Idle && !blocked.contains(&t))
                .filter(|&t| self.others(t, x) < self.arch.well_capacity(t))
                .filter_map(|t| ps.to(t).map(|(d, e)| (d + 2 * u32::from(self.others(t, x) > 0), t, e)))
                .min();
            if let Some((d, t, e)) = cand {
                if best.as_ref().is_none_or(|b| d < b.0) {
                    best = Some((d, ps.hops(t, e)));
                }
            }
        }
        let Some((_, hops)) = best else { return Ok(false) };
        let wells: Vec<usize> = std::iter::once(site).chain(hops.iter().map(|h| h.link.site)).collect();
        let mut cuts = vec![0];
        cuts.extend((1..wells.len() - 1).filter(|&i| self.p.ions_in(wells[i]) >= self.arch.well_capacity(wells[i])));
        for (j, &a) in cuts.iter().enumerate().rev() {
            let b = cuts.get(j + 1).copied().unwrap_or(wells.len() - 1);
            let mut cr: Vec<Qubit> = self.p.sites[wells[a]].iter().flatten().copied().collect();
            if hops[a].exit == 1 {
                cr.reverse();
            }
            let Some(&y) = cr.iter().find(|q| !keep.contains(q)) else { return Ok(false) };
            for h in &hops[a..b] {
                self.hop(y, h.exit, h.link)?;
            }
        }
        Ok(true)
    }

    /// Chooses the cheapest free working well for `item`, clears it and
    /// routes the item's ions there.
    fn place(&mut self, item: &Item, working: &[usize], locked: &BTreeSet<usize>) -> Result<Option<usize>, TranspileError> {
        let ps: Vec<Paths> = item.ions.iter().map(|&q| self.paths(q, locked)).collect();
        let mut best: Option<(u32, usize)> = None;
        for &w in working.iter().filter(|w| !locked.contains(w)) {
            let mut cost = 0;
            for (j, &q) in item.ions.iter().enumerate() {
                cost += if self.p.locate(q).map(|l| l.0) == Some(w) { 0 } else { ps[j].to(w).map_or(INF, |t| t.0) };
            }
            let strangers = self.p.sites[w].iter().flatten().filter(|q| !item.ions.contains(q)).count() as u32;
            cost += 2 * strangers;
            if cost < INF && best.is_none_or(|b| (cost, w) < b) {
                best = Some((cost, w));
            }
        }
        let Some((_, w)) = best else { return Ok(None) };
        let mut bl = locked.clone();
        bl.insert(w);
        while self.p.sites[w].iter().flatten().any(|q| !item.ions.contains(q)) {
            if !self.make_room(w, &item.ions, &bl)? {
                return Ok(None);
            }
        }
        for &q in &item.ions {
            if !self.route(q, w, locked, &item.ions)? {
                return Ok(None);
            }
        }
        Ok(Some(w))
    }

    fn run_batches(&mut self, items: Vec<Item>) -> Result<(), TranspileError> {
        let working = self.arch.working_sites();
        let mut pending = items;
        while !pending.is_empty() {
            let mut locked = BTreeSet::new();
            let mut placed = Vec::new();
            let mut rest = Vec::new();
            for item in std::mem::take(&mut pending) {
                if placed.len() == working.len() {
                    rest.push(item);
                    continue;
                }
                match self.place(&item, &working, &locked)? {
                    Some(w) => {
                        locked.insert(w);
                        placed.push((item, w));
                    }
                    None => rest.push(item),
                }
            }
            if placed.is_empty() {
                return Err(self.err("capacity", format!("no working well reachable for ions {:?}", rest[0].ions)));
            }
            self.step(&placed, &working)?;
            pending = rest;
        }
        Ok(())
    }

    /// One global step: every working well waits for the slowest arrival,
    /// hot crystals are re-cooled, then all gates (or readouts) run together.
    fn step(&mut self, placed: &[(Item, usize)], working: &[usize]) -> Result<(), TranspileError> {
        let ions: Vec<Qubit> = placed.iter().flat_map(|(i, _)| i.ions.clone()).collect();
        let t0 = ions.iter().map(|&q| self.ready[q as usize]).fold(working.iter().map(|&w| self.site_free[w]).fold(0.0, f64::max), f64::max);
        let readout = placed[0].0.kind == Kind::Measure;
        let mut cool = 0.0f64;
        if !readout {
            for (_, w) in placed {
                let cr: Vec<Qubit> = self.p.sites[*w].iter().flatten().copied().collect();
                let nbar = cr.iter().map(|&q| self.p.nbar[q as usize]).fold(0.0, f64::max);
                if nbar > self.sc.nbar0 + EPS {
                    let duration = self.sc.recool_us(nbar);
                    cool = cool.max(duration);
                    self.push(TimedOp { kind: OpKind::Recool, ions: cr, site: *w, to: None, hub: None, end: None, start: t0, duration, excitation: 0.0, nbar, instr: None })?;
                }
            }
        }
        let g = t0 + cool;
        let mut stop = g;
        for (item, w) in placed {
            for (j, &k) in item.instrs.iter().enumerate() {
                let (kind, op_ions) = match (readout, item.ions.len()) {
                    (true, _) => (OpKind::Readout, vec![item.ions[j]]),
                    (false, 1) => (OpKind::Gate1q, item.ions.clone()),
                    (false, _) => (OpKind::Gate2q, item.ions.clone()),
                };
                let (duration, exc) = self.timing(kind);
                // Two readouts in one crystal heat it once.
                let excitation = if j == 0 { exc } else { 0.0 };
                self.push(TimedOp { kind, ions: op_ions, site: *w, to: None, hub: None, end: None, start: g, duration, excitation, nbar: 0.0, instr: Some(k) })?;
                self.times[k] = Some((g, g + duration));
                stop = stop.max(g + duration);
            }
        }
        for &w in working {
            self.site_free[w] = stop;
        }
        for q in ions {
            self.ready[q as usize] = stop;
        }
        Ok(())
    }

    // ---- segmented trap ----

    fn seg_sites(&self) -> ([usize; 2], [usize; 2], Option<usize>) {
        let z = |r: usize, role: ZoneRole| self.arch.region_zone(r, role).map(|z| site_of(self.arch, z)).expect("segmented regions are complete");
        let dc = self.arch.region_zone(2, ZoneRole::Detection).map(|z| site_of(self.arch, z));
        ([z(0, ZoneRole::Working), z(1, ZoneRole::Working)], [z(0, ZoneRole::Detection), z(1, ZoneRole::Detection)], dc)
    }

    fn chain_of(&self, site: usize, f: impl Fn(IonRole) -> bool) -> Vec<Qubit> {
        self.p.sites[site].iter().flatten().copied().filter(|&q| f(self.roles.role[q as usize])).collect()
    }

    /// Moves a crystal one zone along the chain and merges it with whatever
    /// crystal waits there.
    fn seg_move(&mut self, ions: Vec<Qubit>, from: usize, to: usize, merge: bool) -> Result<(), TranspileError> {
        self.emit(OpKind::LinearShuttle, ions.clone(), from, Some(to), None, None)?;
        if merge && self.p.sites[to].len() == 2 {
            self.emit(OpKind::Merge, ions, to, None, None, None)?;
        }
        Ok(())
    }

    /// Splits `ions` off the chain in `site`, unless they already form it.
    fn seg_split(&mut self, ions: &[Qubit], site: usize) -> Result<(), TranspileError> {
        if self.p.ions_in(site) > ions.len() && !self.p.sites[site].iter().any(|c| c.len() == ions.len() && ions.iter().all(|q| c.contains(q))) {
            self.emit(OpKind::Split, ions.to_vec(), site, None, None, None)?;
        }
        Ok(())
    }

    fn park_ancillas(&mut self, b: usize) -> Result<(), TranspileError> {
        let (w, d, _) = self.seg_sites();
        let anc = self.chain_of(w[b], |r| r == IonRole::Ancilla(b));
        if anc.is_empty() {
            return Ok(());
        }
        self.seg_split(&anc, w[b])?;
        self.seg_move(anc, w[b], d[b], true)
    }

    fn park_surgery(&mut self, b: usize) -> Result<bool, TranspileError> {
        let (w, _, dc) = self.seg_sites();
        let Some(dc) = dc else { return Ok(false) };
        let sur = self.chain_of(w[b], |r| r == IonRole::Surgery);
        for &q in &sur {
            self.seg_split(&[q], w[b])?;
            self.seg_move(vec![q], w[b], dc, false)?;
        }
        Ok(!sur.is_empty())
    }

    /// Brings `q` into block `b`'s working chain.
    fn ensure_chain(&mut self, q: Qubit, b: usize) -> Result<(), TranspileError> {
        let (w, d, dc) = self.seg_sites();
        let (s, c) = self.p.locate(q).expect("every ion is placed");
        if s == w[b] {
            return Ok(());
        }
        let role = self.roles.role[q as usize];
        let moving = if s == w[1 - b] { 1 } else { self.p.sites[s][c].len() };
        let cap = self.arch.well_capacity(w[b]);
        while self.p.ions_in(w[b]) + moving > cap {
            let freed = match role {
                IonRole::Ancilla(_) => self.park_surgery(b)?,
                _ => {
                    let had = !self.chain_of(w[b], |r| r == IonRole::Ancilla(b)).is_empty();
                    self.park_ancillas(b)?;
                    had
                }
            };
            if !freed {
                return Err(self.err("zone-capacity", format!("chain of block {b} cannot take ion {q}")));
            }
        }
        match role {
            IonRole::Data(_) => Err(self.err("chain", format!("data ion {q} left its chain"))),
            IonRole::Ancilla(a) => {
                if a != b || s != d[b] {
                    return Err(self.err("chain", format!("ancilla {q} of block {a} requested in block {b}")));
                }
                let cr = self.p.sites[s][c].clone();
                self.seg_move(cr, d[b], w[b], true)
            }
            IonRole::Surgery => {
                let dc = dc.ok_or_else(|| self.err("chain", "no interface zone".into()))?;
                if s == w[1 - b] {
                    self.seg_split(&[q], s)?;
                    self.seg_move(vec![q], s, dc, false)?;
                }
                self.seg_move(vec![q], dc, w[b], true)
            }
        }
    }

    fn seg_gate(&mut self, g: &Item) -> Result<(), TranspileError> {
        let blocks: BTreeSet<usize> = g.ions.iter().filter_map(|&q| self.roles.block(q)).collect();
        if blocks.len() > 1 {
            return Err(self.err("chain", format!("gate on ions {:?} spans both blocks", g.ions)));
        }
        let b = match blocks.first() {
            Some(&b) => b,
            // Surgery-only gates run in whichever chain already holds one of them.
            None => {
                let (w, _, _) = self.seg_sites();
                g.ions.iter().find_map(|&q| (0..2).find(|&b| self.p.locate(q).map(|l| l.0) == Some(w[b]))).unwrap_or(0)
            }
        };
        for &q in &g.ions {
            self.ensure_chain(q, b)?;
        }
        let (w, _, _) = self.seg_sites();
        let kind = if g.ions.len() == 1 { OpKind::Gate1q } else { OpKind::Gate2q };
        let stop = self.emit(kind, g.ions.clone(), w[b], None, None, None)?;
        let last = self.ops.last_mut().expect("just emitted");
        last.instr = Some(g.instrs[0]);
        self.times[g.instrs[0]] = Some((last.start, stop));
        Ok(())
    }

    /// Ancillas are read out in their block's detection zone and surgery ions
    /// in the interface zone; data ions in place. Each readout is followed by
    /// re-cooling at the same zone.
    fn seg_readout(&mut self, reads: &[Item]) -> Result<(), TranspileError> {
        if reads.is_empty() {
            return Ok(());
        }
        let (w, d, dc) = self.seg_sites();
        let mut at: BTreeMap<usize, Vec<(usize, Qubit)>> = BTreeMap::new();
        for r in reads {
            let q = r.ions[0];
            let s = self.p.locate(q).expect("every ion is placed").0;
            let site = match self.roles.role[q as usize] {
                IonRole::Data(b) => {
                    if s != w[b] {
                        return Err(self.err("chain", format!("data ion {q} left its chain")));
                    }
                    w[b]
                }
                IonRole::Ancilla(b) => {
                    if s == w[b] {
                        self.park_ancillas(b)?;
                    }
                    d[b]
                }
                IonRole::Surgery => {
                    let dc = dc.ok_or_else(|| self.err("chain", "no interface zone".into()))?;
                    if s != dc {
                        self.seg_split(&[q], s)?;
                        self.seg_move(vec![q], s, dc, false)?;
                    }
                    dc
                }
            };
            at.entry(site).or_default().push((r.instrs[0], q));
        }
        let readout = self.sc.segmented_duration(OpKind::Readout);
        let recool = self.sc.segmented_duration(OpKind::Recool);
        for (site, list) in at {
            let ions: Vec<Qubit> = list.iter().map(|l| l.1).collect();
            let t = ions.iter().map(|&q| self.ready[q as usize]).fold(self.site_free[site], f64::max);
            for &(k, q) in &list {
                self.push(TimedOp { kind: OpKind::Readout, ions: vec![q], site, to: None, hub: None, end: None, start: t, duration: readout, excitation: 0.0, nbar: 0.0, instr: Some(k) })?;
                self.times[k] = Some((t, t + readout));
            }
            self.push(TimedOp { kind: OpKind::Recool, ions: ions.clone(), site, to: None, hub: None, end: None, start: t + readout, duration: recool, excitation: 0.0, nbar: 0.0, instr: None })?;
            let stop = t + readout + recool;
            self.site_free[site] = stop;
            for q in ions {
                self.ready[q as usize] = stop;
            }
        }
        Ok(())
    }
}
