//! Timed schedules, their duration breakdown, a post-hoc legality audit and
//! CSV export.

use crate::arch::{ArchKind, Architecture, Model, ZoneRole};
use crate::timing::{OpKind, Scenario};
use pframe::{NodeId, Qubit};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One primitive with its place in time (µs, relative to the node start).
///
/// Site semantics per kind: `Split` detaches `ions` into their own crystal
/// in `site`; `LinearShuttle`/`JunctionCross` move the crystal made of
/// `ions` from `site` to `to`, entering at `end`; `Merge` joins the two
/// crystals in `site`; the rest act on crystals in `site`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedOp {
    pub kind: OpKind,
    pub ions: Vec<Qubit>,
    pub site: usize,
    pub to: Option<usize>,
    pub hub: Option<usize>,
    /// Entry end at `to` for moves.
    pub end: Option<u8>,
    pub start: f64,
    pub duration: f64,
    /// Quanta added to every ion of the affected crystals. A split touches
    /// the crystal before it parts, a merge the crystal after it forms.
    pub excitation: f64,
    /// Occupation before cooling, for `Recool`.
    pub nbar: f64,
    /// Circuit instruction realized by a gate or readout.
    pub instr: Option<usize>,
}

impl TimedOp {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

/// Crystals per well, each ordered from end 0 to end 1.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub sites: Vec<Vec<Vec<Qubit>>>,
    /// Accumulated excitation per ion.
    pub nbar: Vec<f64>,
}

impl Placement {
    pub fn empty(n_sites: usize, n_qubits: usize) -> Placement {
        Placement { sites: vec![Vec::new(); n_sites], nbar: vec![0.0; n_qubits] }
    }

    pub fn locate(&self, q: Qubit) -> Option<(usize, usize)> {
        self.sites.iter().enumerate().find_map(|(s, cs)| cs.iter().position(|c| c.contains(&q)).map(|i| (s, i)))
    }

    pub fn ions_in(&self, site: usize) -> usize {
        self.sites[site].iter().map(Vec::len).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSchedule {
    pub node: NodeId,
    pub name: String,
    pub start: Placement,
    pub ops: Vec<TimedOp>,
    /// Per circuit instruction: (start, end) in µs for gates, measurements
    /// and resets.
    pub instr_times: Vec<Option<(f64, f64)>>,
    pub duration: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub gate: f64,
    pub transport: f64,
    pub recool: f64,
}

impl Breakdown {
    pub fn total(&self) -> f64 {
        self.gate + self.transport + self.recool
    }

    pub fn add(&mut self, o: &Breakdown) {
        self.gate += o.gate;
        self.transport += o.transport;
        self.recool += o.recool;
    }
}

/// Merged length of a set of intervals, minus the parts inside `minus`.
fn covered(mut iv: Vec<(f64, f64)>, minus: &[(f64, f64)]) -> f64 {
    iv.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (s, e) in iv {
        match merged.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    let mut total = 0.0;
    for (s, e) in merged {
        let mut cuts: Vec<(f64, f64)> = minus.iter().map(|&(a, b)| (a.max(s), b.min(e))).filter(|(a, b)| b > a).collect();
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
        let mut len = e - s;
        let mut reach = s;
        for (a, b) in cuts {
            let a = a.max(reach);
            if b > a {
                len -= b - a;
                reach = b;
            }
        }
        total += len;
    }
    total
}

fn merged(mut iv: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    iv.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (s, e) in iv {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

impl NodeSchedule {
    /// Wall time split by the activity occupying it, with gates (and
    /// readout) taking precedence over re-cooling, and re-cooling over
    /// transport. Uncovered time is counted as transport wait.
    pub fn breakdown(&self) -> Breakdown {
        let iv = |f: &dyn Fn(OpKind) -> bool| -> Vec<(f64, f64)> {
            self.ops.iter().filter(|o| f(o.kind) && o.duration > 0.0).map(|o| (o.start, o.end())).collect()
        };
        let gate_iv = merged(iv(&|k| matches!(k, OpKind::Gate1q | OpKind::Gate2q | OpKind::Readout)));
        let gate = covered(gate_iv.clone(), &[]);
        let recool = covered(iv(&|k| k == OpKind::Recool), &gate_iv);
        Breakdown { gate, recool, transport: (self.duration - gate - recool).max(0.0) }
    }

    pub fn count(&self, f: impl Fn(OpKind) -> bool) -> usize {
        self.ops.iter().filter(|o| f(o.kind)).count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub arch: ArchKind,
    pub scenario: Scenario,
    /// Indexed by tree node.
    pub nodes: Vec<NodeSchedule>,
}

impl Schedule {
    /// Sum of the per-node breakdowns along a root-to-leaf path.
    pub fn path_breakdown(&self, path: &[NodeId]) -> Breakdown {
        let mut b = Breakdown::default();
        for &n in path {
            b.add(&self.nodes[n as usize].breakdown());
        }
        b
    }

    pub fn path_count(&self, path: &[NodeId], f: impl Fn(OpKind) -> bool + Copy) -> usize {
        path.iter().map(|&n| self.nodes[n as usize].count(f)).sum()
    }

    /// Per-zone timeline, one row per primitive.
    pub fn to_csv(&self, arch: &Architecture) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["node", "zone", "to_zone", "op", "ions", "start_us", "end_us", "excitation", "instr"]).expect("in-memory write");
        for ns in &self.nodes {
            for o in &ns.ops {
                let zone = |s: usize| arch.zones[arch.sites[s].zone].name.clone();
                let ions: Vec<String> = o.ions.iter().map(|q| q.to_string()).collect();
                w.write_record([
                    ns.node.to_string(),
                    zone(o.site),
                    o.to.map(zone).unwrap_or_default(),
                    o.kind.name().to_string(),
                    ions.join(" "),
                    format!("{:.3}", o.start),
                    format!("{:.3}", o.end()),
                    format!("{:.4}", o.excitation),
                    o.instr.map(|i| i.to_string()).unwrap_or_default(),
                ])
                .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditViolation {
    pub node: NodeId,
    pub op: usize,
    pub rule: String,
    pub detail: String,
}

const EPS: f64 = 1e-6;

/// Replays every node schedule from its start placement and checks well and
/// zone capacities, merges of exactly two crystals, swaps on two-ion
/// crystals, one crossing per junction at a time, resource overlap, gate
/// co-location in working zones, and the cooling rule of the trap model.
pub fn audit(arch: &Architecture, schedule: &Schedule, nbar0: f64) -> Vec<AuditViolation> {
    let mut out = Vec::new();
    for ns in &schedule.nodes {
        audit_node(arch, ns, nbar0, &mut out);
    }
    out
}

/// Applies the site semantics and the excitation of `o` to `p`. Errors name
/// the broken rule.
pub fn apply(p: &mut Placement, o: &TimedOp, nbar0: f64) -> Result<(), (&'static str, String)> {
    let touched: Vec<Qubit> = match o.kind {
        OpKind::Split => {
            let (s, c) = p.locate(o.ions[0]).ok_or(("split", "ion not placed".to_string()))?;
            let cr = p.sites[s][c].clone();
            if s != o.site || !o.ions.iter().all(|q| cr.contains(q)) || cr.len() <= o.ions.len() {
                return Err(("split", format!("crystal {cr:?} at site {s}")));
            }
            let (part, rest): (Vec<Qubit>, Vec<Qubit>) = cr.iter().partition(|q| o.ions.contains(q));
            let front = o.ions.contains(&cr[0]);
            p.sites[s][c] = rest;
            p.sites[s].insert(if front { c } else { c + 1 }, part);
            cr
        }
        OpKind::LinearShuttle | OpKind::JunctionCross => {
            let to = o.to.ok_or(("move", "no destination".to_string()))?;
            let c = p.sites[o.site]
                .iter()
                .position(|c| sorted(c) == sorted(&o.ions))
                .ok_or(("move", format!("no crystal {:?} at site {}", o.ions, o.site)))?;
            let cr = p.sites[o.site].remove(c);
            if o.end == Some(0) {
                p.sites[to].insert(0, cr);
            } else {
                p.sites[to].push(cr);
            }
            o.ions.clone()
        }
        OpKind::Merge => {
            if p.sites[o.site].len() != 2 {
                return Err(("merge", format!("{} crystals in site {}", p.sites[o.site].len(), o.site)));
            }
            if !p.sites[o.site].iter().any(|c| sorted(c) == sorted(&o.ions)) {
                return Err(("merge", format!("crystal {:?} not in site {}", o.ions, o.site)));
            }
            let all: Vec<Qubit> = std::mem::take(&mut p.sites[o.site]).into_iter().flatten().collect();
            p.sites[o.site] = vec![all.clone()];
            all
        }
        OpKind::Swap => {
            if !(p.sites[o.site].len() == 1 && p.sites[o.site][0].len() == 2) {
                return Err(("swap", format!("site {} holds {:?}", o.site, p.sites[o.site])));
            }
            p.sites[o.site][0].reverse();
            p.sites[o.site][0].clone()
        }
        OpKind::Gate1q | OpKind::Gate2q | OpKind::Readout | OpKind::Recool => {
            p.sites[o.site].iter().filter(|c| c.iter().any(|q| o.ions.contains(q))).flatten().copied().collect()
        }
    };
    if o.kind == OpKind::Recool {
        for &q in &o.ions {
            p.nbar[q as usize] = nbar0;
        }
    } else {
        for q in touched {
            p.nbar[q as usize] += o.excitation;
        }
    }
    Ok(())
}

fn audit_node(arch: &Architecture, ns: &NodeSchedule, nbar0: f64, out: &mut Vec<AuditViolation>) {
    let mut push = |op: usize, rule: &str, detail: String| out.push(AuditViolation { node: ns.node, op, rule: rule.into(), detail });
    let mut p = ns.start.clone();
    // Busy intervals per site and per hub.
    let mut site_busy: BTreeMap<usize, Vec<(f64, f64, usize)>> = BTreeMap::new();
    let mut hub_busy: BTreeMap<usize, Vec<(f64, f64, usize)>> = BTreeMap::new();
    let zone_load = |p: &Placement, z: usize| -> usize { arch.zone_sites[z].iter().map(|&s| p.ions_in(s)).sum() };
    for (i, o) in ns.ops.iter().enumerate() {
        if o.duration < 0.0 || o.start < -EPS {
            push(i, "time", format!("start {} duration {}", o.start, o.duration));
        }
        let mut sites = vec![o.site];
        sites.extend(o.to);
        for &s in &sites {
            if o.duration > 0.0 {
                site_busy.entry(s).or_default().push((o.start, o.end(), i));
            }
        }
        if let Some(h) = o.hub {
            hub_busy.entry(h).or_default().push((o.start, o.end(), i));
        }
        match o.kind {
            OpKind::LinearShuttle | OpKind::JunctionCross => {
                let adjacent = o.to.is_some_and(|to| {
                    arch.sites[o.site].ends.iter().flatten().any(|l| l.site == to && l.hub.is_some() == (o.kind == OpKind::JunctionCross))
                });
                if !adjacent {
                    push(i, "move", format!("site {} is not linked to {:?}", o.site, o.to));
                }
            }
            OpKind::Gate1q | OpKind::Gate2q | OpKind::Readout | OpKind::Recool => {
                let together = if matches!(o.kind, OpKind::Readout | OpKind::Recool) && arch.model == Model::Segmented {
                    o.ions.iter().all(|&q| p.locate(q).map(|(s, _)| s) == Some(o.site))
                } else {
                    p.sites[o.site].iter().any(|c| o.ions.iter().all(|q| c.contains(q)))
                };
                if !together {
                    push(i, "colocation", format!("{:?} not in one crystal at site {}", o.ions, o.site));
                }
                let role = arch.site_role(o.site);
                let gate = matches!(o.kind, OpKind::Gate1q | OpKind::Gate2q);
                if gate && role != ZoneRole::Working {
                    push(i, "working-zone", format!("{:?} in a {role:?} zone", o.kind));
                }
                if arch.model == Model::Integrated && gate {
                    let hot = p.sites[o.site]
                        .iter()
                        .filter(|c| c.iter().any(|q| o.ions.contains(q)))
                        .flatten()
                        .map(|&q| p.nbar[q as usize])
                        .fold(0.0, f64::max);
                    if hot > nbar0 + EPS {
                        push(i, "recool-before-gate", format!("occupation {hot:.3} above target"));
                    }
                }
            }
            _ => {}
        }
        if let Err((rule, detail)) = apply(&mut p, o, nbar0) {
            push(i, rule, detail);
            continue;
        }
        for (z, zone) in arch.zones.iter().enumerate() {
            let load = zone_load(&p, z);
            if load > zone.capacity as usize {
                push(i, "zone-capacity", format!("{} holds {load} > {}", zone.name, zone.capacity));
            }
        }
        if arch.model == Model::Integrated {
            for &s in &sites {
                // A well may transiently hold two crystals between a move and
                // its merge; the ion count is what the capacity bounds.
                if p.ions_in(s) > arch.well_capacity(s) {
                    push(i, "well-capacity", format!("site {s} holds {:?}", p.sites[s]));
                }
            }
        }
    }
    if arch.model == Model::Segmented {
        for (i, o) in ns.ops.iter().enumerate().filter(|(_, o)| o.kind == OpKind::Readout) {
            let cooled = ns.ops.iter().any(|r| r.kind == OpKind::Recool && r.site == o.site && (r.start - o.end()).abs() < EPS);
            if !cooled {
                push(i, "recool-after-readout", format!("no cooling follows readout at site {}", o.site));
            }
        }
    }
    for (what, busy) in [("site-overlap", site_busy), ("junction-overlap", hub_busy)] {
        for (k, mut iv) in busy {
            iv.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            for w in iv.windows(2) {
                // Parallel ions sharing a site in one global step are one operation.
                let same_step = ns.ops[w[0].2].kind == ns.ops[w[1].2].kind
                    && (w[0].0 - w[1].0).abs() < EPS
                    && !ns.ops[w[0].2].kind.is_transport();
                if w[1].0 < w[0].1 - EPS && !same_step {
                    push(w[1].2, what, format!("resource {k} overlaps op {}", w[0].2));
                }
            }
        }
    }
}

fn sorted(v: &[Qubit]) -> Vec<Qubit> {
    let mut v = v.to_vec();
    v.sort_unstable();
    v
}
