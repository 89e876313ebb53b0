//! Flag-aware lookup decoding for the distance-3 block, the fault-enumerating
//! table builder, a brute-force maximum-likelihood oracle, single-fault
//! certificates and detector-error-model export.

use crate::code::{STEANE_LOGICAL, STEANE_PLAQUETTES};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Number of flag contexts: none, then one per plaquette.
pub const CONTEXTS: usize = 4;

/// Flag-aware lookup table, `entries[ctx][syndrome]` with the syndrome read
/// MSB first over the plaquettes in `STEANE_PLAQUETTES` order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LookupTable {
    pub entries: Vec<Vec<Vec<u32>>>,
}

impl LookupTable {
    /// The published table for flagged extraction.
    pub fn table_iii() -> Self {
        let base: [&[u32]; 8] = [&[], &[6], &[4], &[5], &[0], &[3], &[1], &[2]];
        let mut entries: Vec<Vec<Vec<u32>>> = (0..CONTEXTS).map(|_| base.iter().map(|e| e.to_vec()).collect()).collect();
        entries[1][0b010] = vec![2, 3];
        entries[2][0b001] = vec![4, 5];
        entries[3][0b010] = vec![5, 6];
        Self { entries }
    }

    pub fn get(&self, syndrome: usize, ctx: usize) -> &[u32] {
        &self.entries[ctx.min(self.entries.len() - 1)][syndrome]
    }
}

/// Table entry for a 3-bit syndrome under a flag context (0 = no flag).
pub fn decode_lookup(table: &LookupTable, syndrome: usize, ctx: usize) -> Vec<u32> {
    table.get(syndrome, ctx).to_vec()
}

/// Syndrome of an error support (bitmask over the 7 qubits), MSB = first plaquette.
pub fn steane_syndrome(mask: u32) -> usize {
    let mut s = 0;
    for p in &STEANE_PLAQUETTES {
        let par = p.iter().filter(|&&q| mask >> q & 1 == 1).count() % 2;
        s = (s << 1) | par;
    }
    s
}

pub fn mask_of(qubits: &[u32]) -> u32 {
    qubits.iter().fold(0, |m, &q| m | 1 << q)
}

/// True when two same-type errors differ by a stabilizer.
pub fn steane_equivalent(a: u32, b: u32) -> bool {
    let d = a ^ b;
    steane_syndrome(d) == 0 && (d & mask_of(&STEANE_LOGICAL)).count_ones() % 2 == 0
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DecoderError {
    #[error("inconsistent fault class at syndrome {syndrome:03b}, context {ctx}: {a:?} vs {b:?}")]
    Inconsistent { syndrome: usize, ctx: usize, a: Vec<u32>, b: Vec<u32> },
    #[error("code has {0} qubits; exhaustive decoding is limited to {ML_LIMIT}")]
    TooLarge(u32),
    #[error("tree {0:?} branches; export one path at a time")]
    Branching(String),
    #[error("bad table text at line {0}: {1}")]
    Parse(usize, String),
    #[error(transparent)]
    Exec(#[from] pframe::ExecError),
    #[error(transparent)]
    Noise(#[from] pframe::noise::NoiseError),
}

/// Largest code the maximum-likelihood oracle enumerates.
pub const ML_LIMIT: u32 = 20;

fn ctx_of(flags: &[bool]) -> usize {
    flags.iter().position(|&f| f).map_or(0, |i| (i + 1).min(CONTEXTS - 1))
}

fn support_of(mask: u32) -> Vec<u32> {
    (0..7).filter(|q| mask >> q & 1 == 1).collect()
}

/// One single fault propagated to the end of a readout probe.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FaultClass {
    pub site: pframe::Injection,
    /// Final error supports on the data block (bitmask over local qubits).
    pub x_mask: u32,
    pub z_mask: u32,
    pub x_ctx: usize,
    pub z_ctx: usize,
    /// Syndromes the decoder reads for the X and Z corrections.
    pub x_syndrome: usize,
    pub z_syndrome: usize,
}

/// Injects every single fault of a (SCEM-noisy) probe and records the final
/// data error with the flag context that will decode it.
pub fn enumerate_faults(probe: &crate::gadgets::SeProbe) -> Result<Vec<FaultClass>, DecoderError> {
    use pframe::exec::{fault_sites, reference_path};
    let tree = probe.tree.map_circuits(|c| pframe::noise::scem_attach(c, pframe::ScemParams { p: 1e-3 }))?;
    let path = reference_path(&tree)?;
    let offsets = tree.offsets();
    let mut out = Vec::new();
    for inj in fault_sites(&tree, &path) {
        let run = pframe::run_single(&tree, &[inj], pframe::SingleOptions { randomize: None, forced: Some(&path) })?;
        let get = |b: pframe::BitRef| run.state.rec.get(offsets[b.node as usize] + b.idx);
        let mut x_mask = 0;
        let mut z_mask = 0;
        for (i, &q) in probe.data.iter().enumerate() {
            let (x, z) = run.state.frame.bits(q);
            x_mask |= (x as u32) << i;
            z_mask |= (z as u32) << i;
        }
        let flags = |v: &[pframe::Expr]| -> Vec<bool> { v.iter().map(|e| e.eval(get)).collect() };
        let index = |v: &[pframe::Expr]| v.iter().fold(0usize, |acc, e| (acc << 1) | e.eval(get) as usize);
        let (x_syndrome, z_syndrome) = match &probe.syndromes {
            Some((xs, zs)) => (index(xs), index(zs)),
            None => (steane_syndrome(x_mask), steane_syndrome(z_mask)),
        };
        out.push(FaultClass {
            site: inj,
            x_mask,
            z_mask,
            x_ctx: ctx_of(&flags(&probe.x_flags)),
            z_ctx: ctx_of(&flags(&probe.z_flags)),
            x_syndrome,
            z_syndrome,
        });
    }
    Ok(out)
}

/// Builds a flag-aware table from every single fault of `probe`: for each
/// (syndrome, context) the minimum-weight final error, ties broken by
/// lexicographic qubit order. X and Z faults fill one shared table, so an
/// entry must agree across both types. Unseen entries fall back to the
/// no-flag column, then to the published table.
pub fn build_lookup(probe: &crate::gadgets::SeProbe) -> Result<LookupTable, DecoderError> {
    let faults = enumerate_faults(probe)?;
    let mut acc = TableBuilder::new(probe.syndrome_space());
    for f in &faults {
        acc.add(f.x_mask, f.x_ctx, f.x_syndrome)?;
        acc.add(f.z_mask, f.z_ctx, f.z_syndrome)?;
    }
    Ok(acc.finish())
}

/// Separate tables for X corrections and Z corrections, for readouts whose
/// propagation differs between the two error types.
pub fn build_lookup_split(probe: &crate::gadgets::SeProbe) -> Result<(LookupTable, LookupTable), DecoderError> {
    let faults = enumerate_faults(probe)?;
    let mut x = TableBuilder::new(probe.syndrome_space());
    let mut z = TableBuilder::new(probe.syndrome_space());
    for f in &faults {
        x.add(f.x_mask, f.x_ctx, f.x_syndrome)?;
        z.add(f.z_mask, f.z_ctx, f.z_syndrome)?;
    }
    Ok((x.finish(), z.finish()))
}

struct TableBuilder {
    seen: Vec<Vec<Option<u32>>>,
}

impl TableBuilder {
    fn new(n_syndromes: usize) -> Self {
        let mut seen = vec![vec![None; n_syndromes]; CONTEXTS];
        seen[0][0] = Some(0);
        Self { seen }
    }

    fn add(&mut self, mask: u32, ctx: usize, s: usize) -> Result<(), DecoderError> {
        match self.seen[ctx][s] {
            None => self.seen[ctx][s] = Some(mask),
            Some(prev) => {
                if !steane_equivalent(prev, mask) {
                    return Err(DecoderError::Inconsistent { syndrome: s, ctx, a: support_of(prev), b: support_of(mask) });
                }
                let key = |m: u32| (m.count_ones(), support_of(m));
                if key(mask) < key(prev) {
                    self.seen[ctx][s] = Some(mask);
                }
            }
        }
        Ok(())
    }

    /// Unseen keys of wider tables fall back on their low three bits, the
    /// last readout.
    fn finish(self) -> LookupTable {
        let published = LookupTable::table_iii();
        let n = self.seen[0].len();
        let mut entries = vec![vec![Vec::new(); n]; CONTEXTS];
        for s in 0..n {
            let base = self.seen[0][s].map(support_of).unwrap_or_else(|| published.entries[0][s % 8].clone());
            for (ctx, row) in entries.iter_mut().enumerate() {
                row[s] = self.seen[ctx][s].map(support_of).unwrap_or_else(|| base.clone());
            }
        }
        LookupTable { entries }
    }
}

impl LookupTable {
    /// Entries that differ from `other` by more than a stabilizer.
    pub fn differences(&self, other: &LookupTable) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for ctx in 0..CONTEXTS {
            for s in 0..self.entries[0].len().min(other.entries[0].len()) {
                if !steane_equivalent(mask_of(self.get(s, ctx)), mask_of(other.get(s, ctx))) {
                    out.push((ctx, s));
                }
            }
        }
        out
    }

    /// Text form: a version line, then `<syndrome> <context> <qubits...>`
    /// per entry, with `-` for an empty correction.
    pub fn to_text(&self) -> String {
        let mut s = String::from("lookup-table v1\n");
        for (ctx, row) in self.entries.iter().enumerate() {
            for (syn, e) in row.iter().enumerate() {
                let qs = if e.is_empty() { "-".to_string() } else { e.iter().map(u32::to_string).collect::<Vec<_>>().join(" ") };
                s.push_str(&format!("{syn:03b} {ctx} {qs}\n"));
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, DecoderError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some((_, "lookup-table v1")) => {}
            other => return Err(DecoderError::Parse(other.map_or(0, |(i, _)| i + 1), "expected header".into())),
        }
        let mut entries = vec![vec![Vec::new(); 8]; CONTEXTS];
        for (i, line) in lines {
            let bad = |m: &str| DecoderError::Parse(i + 1, m.to_string());
            let mut it = line.split_whitespace();
            let syn = usize::from_str_radix(it.next().ok_or_else(|| bad("missing syndrome"))?, 2).map_err(|e| bad(&e.to_string()))?;
            let ctx: usize = it.next().ok_or_else(|| bad("missing context"))?.parse().map_err(|_| bad("bad context"))?;
            if syn >= 8 || ctx >= CONTEXTS {
                return Err(bad("index out of range"));
            }
            let qs: Vec<u32> = it.filter(|t| *t != "-").map(|t| t.parse().map_err(|_| bad("bad qubit"))).collect::<Result<_, _>>()?;
            entries[ctx][syn] = qs;
        }
        Ok(Self { entries })
    }
}

/// Maximum-likelihood correction for one error type of a CSS code under
/// independent flips with probability `p`: scores both logical cosets
/// consistent with `syndrome` (one bit per check) and returns the
/// minimum-weight member of the likelier one; ties go to the coset that
/// commutes with `logical`.
pub fn ml_correction(checks: &[Vec<u32>], logical: &[u32], n: u32, syndrome: &[bool], p: f64) -> Result<Vec<u32>, DecoderError> {
    if n > ML_LIMIT {
        return Err(DecoderError::TooLarge(n));
    }
    let masks: Vec<u64> = checks.iter().map(|c| c.iter().fold(0u64, |m, &q| m | 1 << q)).collect();
    let lmask = logical.iter().fold(0u64, |m, &q| m | 1 << q);
    let mut weight = [0.0f64; 2];
    let mut best: [Option<u64>; 2] = [None, None];
    for e in 0u64..1 << n {
        if masks.iter().zip(syndrome).any(|(m, &s)| ((e & m).count_ones() % 2 == 1) != s) {
            continue;
        }
        let w = e.count_ones();
        let class = ((e & lmask).count_ones() % 2) as usize;
        weight[class] += p.powi(w as i32) * (1.0 - p).powi((n - w) as i32);
        let better = match best[class] {
            None => true,
            Some(b) => (w, (0..n).filter(|q| e >> q & 1 == 1).collect::<Vec<_>>()) < (b.count_ones(), (0..n).filter(|q| b >> q & 1 == 1).collect()),
        };
        if better {
            best[class] = Some(e);
        }
    }
    let class = if weight[1] > weight[0] { 1 } else { 0 };
    let e = best[class].or(best[1 - class]).unwrap_or(0);
    Ok((0..n).filter(|q| e >> q & 1 == 1).collect())
}

/// Exhaustive decoding of a syndrome pair: `x_syndrome` from the Z checks
/// (locates X errors), `z_syndrome` from the X checks. Returns the (X, Z)
/// corrections.
pub fn brute_force_ml_decode(
    code: &crate::code::CssCode,
    x_syndrome: &[bool],
    z_syndrome: &[bool],
    p: f64,
) -> Result<(Vec<u32>, Vec<u32>), DecoderError> {
    let x = ml_correction(&code.z_checks, &code.z_logical, code.n, x_syndrome, p)?;
    let z = ml_correction(&code.x_checks, &code.x_logical, code.n, z_syndrome, p)?;
    Ok((x, z))
}

/// Syndrome bits of a support against a check list.
pub fn syndrome_bits(checks: &[Vec<u32>], support: &[u32]) -> Vec<bool> {
    checks.iter().map(|c| c.iter().filter(|q| support.contains(q)).count() % 2 == 1).collect()
}

/// Single-fault fault-tolerance certificate of a noisy tree.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Certificate {
    pub sites: usize,
    /// Faults that end in a logical failure, with the randomization seed
    /// (`None` for the all-zero reference run) that exposed them.
    pub failures: Vec<(pframe::Injection, Option<u64>)>,
}

impl Certificate {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Injects every outcome of every noise site on the noiseless path, one at
/// a time, and runs the shot (routing by its own record) with and without
/// stabilizer randomization.
pub fn ft_certificate(noisy: &pframe::ProtocolTree, seeds: &[u64]) -> Result<Certificate, DecoderError> {
    use pframe::exec::{fault_sites, reference_path};
    let path = reference_path(noisy)?;
    let sites = fault_sites(noisy, &path);
    let mut cert = Certificate { sites: sites.len(), failures: Vec::new() };
    for inj in sites {
        let runs = std::iter::once(None).chain(seeds.iter().map(|&s| Some(s)));
        for r in runs {
            let run = pframe::run_single(noisy, &[inj], pframe::SingleOptions { randomize: r, forced: None })?;
            if run.outcome.failed() {
                cert.failures.push((inj, r));
                break;
            }
        }
    }
    Ok(cert)
}

/// One error mechanism of a detector error model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mechanism {
    pub p: f64,
    pub detectors: Vec<u32>,
    pub observables: Vec<u32>,
}

/// Detector error model of a fixed-path tree.
///
/// Text grammar, one item per line:
///
/// ```text
/// file      := header line*
/// header    := "# dem v1 detectors=" INT " observables=" INT
/// line      := "error(" FLOAT ")" (" D" INT)* (" L" INT)*
/// ```
///
/// Detectors are numbered in path order of the `Detector` instructions;
/// observables follow the terminal's checks (raw frame parity with the
/// observable, before any terminal decoding).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dem {
    pub n_detectors: u32,
    pub n_observables: u32,
    pub mechanisms: Vec<Mechanism>,
}

impl Dem {
    pub fn to_text(&self) -> String {
        let mut s = format!("# dem v1 detectors={} observables={}\n", self.n_detectors, self.n_observables);
        for m in &self.mechanisms {
            s.push_str(&format!("error({})", m.p));
            for d in &m.detectors {
                s.push_str(&format!(" D{d}"));
            }
            for l in &m.observables {
                s.push_str(&format!(" L{l}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Exports single-fault mechanisms of a noisy linear tree. Outcomes with the
/// same signature are merged by independent-XOR combination; outcomes that
/// trigger nothing are dropped.
pub fn export_dem(noisy: &pframe::ProtocolTree) -> Result<Dem, DecoderError> {
    use pframe::exec::fault_sites;
    use pframe::{Instr, Next};
    if !noisy.is_linear() {
        return Err(DecoderError::Branching(noisy.name.clone()));
    }
    let path = noisy.paths().remove(0);
    let offsets = noisy.offsets();
    let mut dets: Vec<Vec<pframe::BitRef>> = Vec::new();
    for &id in &path {
        for ins in &noisy.node(id).circuit.instrs {
            if let Instr::Detector { bits } = ins {
                dets.push(bits.clone());
            }
        }
    }
    let leaf = *path.last().expect("non-empty path");
    let term = match &noisy.node(leaf).next {
        Next::Leaf(t) => t.clone(),
        Next::Edges(_) => unreachable!("path ends at a leaf"),
    };
    let mut merged: BTreeMap<(Vec<u32>, Vec<u32>), f64> = BTreeMap::new();
    let mut order = Vec::new();
    for inj in fault_sites(noisy, &path) {
        let ch = noisy.node(inj.node).circuit.instrs[inj.instr as usize].clone();
        let p = match ch {
            Instr::Noise(c) => c.letter_prob(),
            _ => unreachable!("fault sites are noise instructions"),
        };
        let run = pframe::run_single(noisy, &[inj], pframe::SingleOptions { randomize: None, forced: Some(&path) })?;
        let get = |b: pframe::BitRef| run.state.rec.get(offsets[b.node as usize] + b.idx);
        let d: Vec<u32> = (0..dets.len() as u32).filter(|&i| dets[i as usize].iter().fold(false, |a, &b| a ^ get(b))).collect();
        let l: Vec<u32> = (0..term.checks.len() as u32)
            .filter(|&i| {
                let c = &term.checks[i as usize];
                run.state.frame.anticommutes(&c.observable) ^ c.flip.eval(get)
            })
            .collect();
        if d.is_empty() && l.is_empty() {
            continue;
        }
        let key = (d, l);
        match merged.get_mut(&key) {
            Some(q) => *q = *q * (1.0 - p) + p * (1.0 - *q),
            None => {
                merged.insert(key.clone(), p);
                order.push(key);
            }
        }
    }
    let mechanisms = order.into_iter().map(|k| Mechanism { p: merged[&k], detectors: k.0, observables: k.1 }).collect();
    Ok(Dem { n_detectors: dets.len() as u32, n_observables: term.checks.len() as u32, mechanisms })
}
