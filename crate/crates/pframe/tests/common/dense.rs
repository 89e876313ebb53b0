//! Dense per-shot reference sampler. Every shot draws a Bernoulli variate at
//! every channel site and carries a full (x, z) bit array; gate rules are
//! written out here independently of the engine.

#![allow(dead_code)]

use pframe::circuit::{Circuit, Instr};
use pframe::gate::{Basis, Gate};
use pframe::noise::NoiseChannel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

struct Dense {
    x: Vec<bool>,
    z: Vec<bool>,
}

impl Dense {
    fn letter(&mut self, q: usize, code: u8) {
        // code: 0=I 1=X 2=Y 3=Z
        if code == 1 || code == 2 {
            self.x[q] = !self.x[q];
        }
        if code == 2 || code == 3 {
            self.z[q] = !self.z[q];
        }
    }

    fn gate(&mut self, g: Gate, ops: &[u32]) {
        let a = ops[0] as usize;
        match g {
            Gate::H => std::mem::swap(&mut self.x[a], &mut self.z[a]),
            Gate::S | Gate::SDag => self.z[a] ^= self.x[a],
            Gate::RotZ(k) if k % 2 == 1 => self.z[a] ^= self.x[a],
            Gate::RotX(k) if k % 2 == 1 => self.x[a] ^= self.z[a],
            Gate::RotY(k) if k % 2 == 1 => std::mem::swap(&mut self.x[a], &mut self.z[a]),
            Gate::RotX(_) | Gate::RotY(_) | Gate::RotZ(_) => {}
            Gate::CX => {
                let b = ops[1] as usize;
                self.x[b] ^= self.x[a];
                self.z[a] ^= self.z[b];
            }
            Gate::XX => {
                let b = ops[1] as usize;
                let t = self.z[a] ^ self.z[b];
                self.x[a] ^= t;
                self.x[b] ^= t;
            }
            Gate::ZZ => {
                let b = ops[1] as usize;
                let t = self.x[a] ^ self.x[b];
                self.z[a] ^= t;
                self.z[b] ^= t;
            }
        }
    }
}

fn rate(ch: &NoiseChannel) -> f64 {
    match *ch {
        NoiseChannel::Depol1 { p, .. }
        | NoiseChannel::Depol2 { p, .. }
        | NoiseChannel::Crosstalk { p, .. }
        | NoiseChannel::MeasFlip { p, .. }
        | NoiseChannel::ResetFlip { p, .. } => p,
        NoiseChannel::IdleDephase { t, t2, .. } => 0.5 * (1.0 - (-t / t2).exp()),
    }
}

/// Histogram of measurement-record patterns (bit i = i-th measurement).
pub fn dense_histogram(c: &Circuit, n_qubits: usize, shots: u64, seed: u64) -> BTreeMap<u64, u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hist = BTreeMap::new();
    for _ in 0..shots {
        let mut s = Dense { x: vec![false; n_qubits], z: vec![false; n_qubits] };
        let mut rec = 0u64;
        let mut n_meas = 0;
        for ins in &c.instrs {
            match ins {
                Instr::Gate { gate, qubits } => s.gate(*gate, qubits),
                Instr::Reset { qubit, .. } => {
                    s.x[*qubit as usize] = false;
                    s.z[*qubit as usize] = false;
                }
                Instr::Measure { qubit, basis, .. } => {
                    let q = *qubit as usize;
                    let bit = match basis {
                        Basis::Z => {
                            s.z[q] = false;
                            s.x[q]
                        }
                        Basis::X => {
                            s.x[q] = false;
                            s.z[q]
                        }
                    };
                    if bit {
                        rec |= 1 << n_meas;
                    }
                    n_meas += 1;
                }
                Instr::Noise(ch) => {
                    if rng.gen::<f64>() >= rate(ch) {
                        continue;
                    }
                    match *ch {
                        NoiseChannel::Depol1 { q, .. } => s.letter(q as usize, rng.gen_range(1..4)),
                        NoiseChannel::Depol2 { a, b, .. } | NoiseChannel::Crosstalk { target: a, neighbor: b, .. } => {
                            let k: u8 = rng.gen_range(1..16);
                            s.letter(a as usize, k / 4);
                            s.letter(b as usize, k % 4);
                        }
                        NoiseChannel::MeasFlip { bit, .. } => rec ^= 1 << bit,
                        NoiseChannel::ResetFlip { q, basis, .. } => s.letter(q as usize, if basis == Basis::Z { 1 } else { 3 }),
                        NoiseChannel::IdleDephase { q, .. } => s.letter(q as usize, 3),
                    }
                }
                _ => {}
            }
        }
        *hist.entry(rec).or_default() += 1;
    }
    hist
}

/// Total-variation distance between two histograms of equal mass.
pub fn tv_distance(a: &BTreeMap<u64, u64>, b: &BTreeMap<u64, u64>) -> f64 {
    let na: u64 = a.values().sum();
    let nb: u64 = b.values().sum();
    let keys: std::collections::BTreeSet<u64> = a.keys().chain(b.keys()).copied().collect();
    0.5 * keys
        .iter()
        .map(|k| {
            let pa = *a.get(k).unwrap_or(&0) as f64 / na as f64;
            let pb = *b.get(k).unwrap_or(&0) as f64 / nb as f64;
            (pa - pb).abs()
        })
        .sum::<f64>()
}

/// Three fixed small circuits (channel-free) used for equivalence checks.
pub fn fixed_circuits() -> Vec<(String, Circuit, usize)> {
    let mut out = Vec::new();

    let mut c = Circuit::new();
    c.reset(0, Basis::Z).reset(1, Basis::Z).reset(2, Basis::Z);
    c.cx(0, 1).cx(1, 2);
    c.gate(Gate::H, &[0]);
    c.measure(0, Basis::X, false);
    c.measure(1, Basis::Z, false);
    c.measure(2, Basis::Z, false);
    out.push(("ghz-chain".to_string(), c, 3));

    let mut c = Circuit::new();
    for q in 0..5 {
        c.reset(q, Basis::Z);
    }
    for (d, a) in [(0, 4), (1, 4), (2, 4), (3, 4)] {
        c.cx(d, a);
    }
    c.measure(4, Basis::Z, false);
    c.measure(0, Basis::Z, false);
    c.measure(3, Basis::Z, false);
    out.push(("weight4-check".to_string(), c, 5));

    let mut c = Circuit::new();
    c.reset(0, Basis::X).reset(1, Basis::Z).reset(2, Basis::Z);
    c.cx(0, 2);
    c.gate(Gate::S, &[1]);
    c.cx(1, 2);
    c.cx(0, 1);
    c.gate(Gate::H, &[2]);
    c.measure(2, Basis::X, false);
    c.measure(1, Basis::Z, false);
    c.measure(0, Basis::X, false);
    out.push(("mixed-basis".to_string(), c, 3));
    out
}

/// Wraps a flat circuit in a one-node tree that reports every measurement.
pub fn report_tree(c: &Circuit, n_qubits: u32) -> pframe::ProtocolTree {
    use pframe::{Expr, ProtocolTree, Terminal};
    let report = (0..c.record_len()).map(|i| (format!("m{i}"), Expr::bit(0, i))).collect();
    ProtocolTree::single("flat", n_qubits, c.clone(), Terminal { report, ..Default::default() })
}

/// Converts engine report patterns ("0110", bit i = measurement i) to the
/// dense histogram keying.
pub fn engine_histogram(t: &pframe::Tally) -> BTreeMap<u64, u64> {
    t.reports
        .iter()
        .map(|(k, &v)| (k.chars().enumerate().fold(0u64, |a, (i, ch)| a | (((ch == '1') as u64) << i)), v))
        .collect()
}
