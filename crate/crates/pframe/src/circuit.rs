//! Flat circuit representation: gates, resets, measurements, noise sites,
//! idle markers, detectors and classical feed-forward.

use crate::gate::{Basis, Gate};
use crate::noise::NoiseChannel;
use crate::pauli::{Letter, PauliFrame, Qubit};
use serde::{Deserialize, Serialize};

pub type NodeId = u32;

/// Record bit addressed by the node that produced it and its index within
/// that node's record (measurements and computed bits share one counter).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BitRef {
    pub node: NodeId,
    pub idx: u32,
}

/// Boolean expression over record bits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Const(bool),
    Bit(BitRef),
    Not(Box<Expr>),
    Xor(Vec<Expr>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
    /// Truth table over `inputs` (first input is the most significant index
    /// bit), packed 64 entries per word.
    Lut { inputs: Vec<Expr>, table: Vec<u64> },
}

impl Expr {
    pub fn bit(node: NodeId, idx: u32) -> Expr {
        Expr::Bit(BitRef { node, idx })
    }

    pub fn parity(bits: &[BitRef]) -> Expr {
        Expr::Xor(bits.iter().map(|&b| Expr::Bit(b)).collect())
    }

    pub fn any(bits: &[BitRef]) -> Expr {
        Expr::Or(bits.iter().map(|&b| Expr::Bit(b)).collect())
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    /// True when the bit vector `es` equals the constant pattern `v`.
    pub fn equals(es: &[Expr], v: &[bool]) -> Expr {
        Expr::And(
            es.iter()
                .zip(v)
                .map(|(e, &b)| if b { e.clone() } else { Expr::not(e.clone()) })
                .collect(),
        )
    }

    /// Tabulates `f` over all assignments of `inputs`.
    pub fn lut(inputs: Vec<Expr>, f: impl Fn(&[bool]) -> bool) -> Expr {
        let k = inputs.len();
        assert!(k <= 24, "lookup table over {k} inputs");
        let mut table = vec![0u64; (1usize << k).div_ceil(64)];
        let mut bits = vec![false; k];
        for idx in 0..1usize << k {
            for (i, b) in bits.iter_mut().enumerate() {
                *b = (idx >> (k - 1 - i)) & 1 == 1;
            }
            if f(&bits) {
                table[idx / 64] |= 1 << (idx % 64);
            }
        }
        Expr::Lut { inputs, table }
    }

    pub fn refs(&self, out: &mut Vec<BitRef>) {
        match self {
            Expr::Const(_) => {}
            Expr::Bit(b) => out.push(*b),
            Expr::Not(e) => e.refs(out),
            Expr::Xor(v) | Expr::And(v) | Expr::Or(v) | Expr::Lut { inputs: v, .. } => v.iter().for_each(|e| e.refs(out)),
        }
    }

    pub fn map_refs(&mut self, f: &impl Fn(BitRef) -> BitRef) {
        match self {
            Expr::Const(_) => {}
            Expr::Bit(b) => *b = f(*b),
            Expr::Not(e) => e.map_refs(f),
            Expr::Xor(v) | Expr::And(v) | Expr::Or(v) | Expr::Lut { inputs: v, .. } => {
                v.iter_mut().for_each(|e| e.map_refs(f))
            }
        }
    }

    /// Evaluates with a resolver from bit references to values.
    pub fn eval<F: Fn(BitRef) -> bool + Copy>(&self, f: F) -> bool {
        match self {
            Expr::Const(b) => *b,
            Expr::Bit(r) => f(*r),
            Expr::Not(e) => !e.eval(f),
            Expr::Xor(v) => v.iter().fold(false, |acc, e| acc ^ e.eval(f)),
            Expr::And(v) => v.iter().all(|e| e.eval(f)),
            Expr::Or(v) => v.iter().any(|e| e.eval(f)),
            Expr::Lut { inputs, table } => {
                let idx = inputs.iter().fold(0usize, |acc, e| (acc << 1) | e.eval(f) as usize);
                (table[idx / 64] >> (idx % 64)) & 1 == 1
            }
        }
    }
}

/// How a lookup correction is consumed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DecodeTarget {
    /// Multiply the correction into the frame on these physical qubits.
    Frame { qubits: Vec<Qubit>, letter: Letter },
    /// Append one record bit: parity of the correction's overlap with `support`
    /// (indices into the table's qubit labels).
    Parity { support: Vec<u32> },
}

/// Flag-aware lookup correction. `table[ctx][syndrome]` lists local qubit
/// indices; `ctx` is 0 for no raised flag, else 1 + index of the first raised
/// entry of `flags`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decode {
    pub syndrome: Vec<Expr>,
    pub flags: Vec<Expr>,
    pub table: Vec<Vec<Vec<u32>>>,
    pub target: DecodeTarget,
}

impl Decode {
    pub fn correction<F: Fn(BitRef) -> bool + Copy>(&self, f: F) -> &[u32] {
        let mut s = 0usize;
        for (i, e) in self.syndrome.iter().enumerate() {
            if e.eval(f) {
                s |= 1 << (self.syndrome.len() - 1 - i);
            }
        }
        let ctx = self.flags.iter().position(|e| e.eval(f)).map_or(0, |i| i + 1);
        let ctx = ctx.min(self.table.len() - 1);
        &self.table[ctx][s]
    }

    pub fn refs(&self, out: &mut Vec<BitRef>) {
        self.syndrome.iter().chain(&self.flags).for_each(|e| e.refs(out));
    }

    pub fn map_refs(&mut self, f: &impl Fn(BitRef) -> BitRef) {
        self.syndrome.iter_mut().chain(self.flags.iter_mut()).for_each(|e| e.map_refs(f));
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Instr {
    Gate { gate: Gate, qubits: Vec<Qubit> },
    Reset { qubit: Qubit, basis: Basis },
    /// `random` declares the noiseless outcome to be random rather than zero.
    Measure { qubit: Qubit, basis: Basis, random: bool },
    Noise(NoiseChannel),
    /// One marker per qubit per inactive layer; `duration` in seconds once
    /// a schedule has resolved it.
    Idle { qubits: Vec<Qubit>, duration: Option<f64> },
    /// Parity of record bits that is zero in the absence of noise.
    Detector { bits: Vec<BitRef> },
    /// Layer boundary.
    Tick,
    /// Appends a computed bit to the node record.
    Compute(Expr),
    /// Multiplies `pauli` into the frame when `cond` holds.
    FrameXor { cond: Expr, pauli: PauliFrame },
    Decode(Decode),
}

impl Instr {
    pub fn produces_bit(&self) -> bool {
        matches!(
            self,
            Instr::Measure { .. } | Instr::Compute(_) | Instr::Decode(Decode { target: DecodeTarget::Parity { .. }, .. })
        )
    }

    pub fn qubits(&self) -> Vec<Qubit> {
        match self {
            Instr::Gate { qubits, .. } => qubits.clone(),
            Instr::Reset { qubit, .. } | Instr::Measure { qubit, .. } => vec![*qubit],
            Instr::Idle { qubits, .. } => qubits.clone(),
            Instr::Noise(ch) => ch.qubits(),
            Instr::FrameXor { pauli, .. } => pauli.support(),
            Instr::Decode(d) => match &d.target {
                DecodeTarget::Frame { qubits, .. } => qubits.clone(),
                DecodeTarget::Parity { .. } => vec![],
            },
            _ => vec![],
        }
    }

    pub fn refs(&self) -> Vec<BitRef> {
        let mut out = Vec::new();
        match self {
            Instr::Detector { bits } => out.extend_from_slice(bits),
            Instr::Compute(e) | Instr::FrameXor { cond: e, .. } => e.refs(&mut out),
            Instr::Decode(d) => d.refs(&mut out),
            _ => {}
        }
        out
    }

    pub fn map_refs(&mut self, f: &impl Fn(BitRef) -> BitRef) {
        match self {
            Instr::Detector { bits } => bits.iter_mut().for_each(|b| *b = f(*b)),
            Instr::Compute(e) | Instr::FrameXor { cond: e, .. } => e.map_refs(f),
            Instr::Decode(d) => d.map_refs(f),
            _ => {}
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub instrs: Vec<Instr>,
    /// Set once noise channels have been attached.
    #[serde(default)]
    pub noisy: bool,
    /// Ideal sections never receive noise (e.g. a perfect initial encoding).
    #[serde(default)]
    pub ideal: bool,
}

impl Circuit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, i: Instr) -> &mut Self {
        self.instrs.push(i);
        self
    }

    pub fn gate(&mut self, gate: Gate, qubits: &[Qubit]) -> &mut Self {
        self.push(Instr::Gate { gate, qubits: qubits.to_vec() })
    }

    pub fn cx(&mut self, c: Qubit, t: Qubit) -> &mut Self {
        self.gate(Gate::CX, &[c, t])
    }

    pub fn reset(&mut self, q: Qubit, basis: Basis) -> &mut Self {
        self.push(Instr::Reset { qubit: q, basis })
    }

    /// Appends a measurement and returns its node-local record index.
    pub fn measure(&mut self, q: Qubit, basis: Basis, random: bool) -> u32 {
        let idx = self.record_len();
        self.push(Instr::Measure { qubit: q, basis, random });
        idx
    }

    pub fn compute(&mut self, e: Expr) -> u32 {
        let idx = self.record_len();
        self.push(Instr::Compute(e));
        idx
    }

    pub fn tick(&mut self) -> &mut Self {
        self.push(Instr::Tick)
    }

    pub fn record_len(&self) -> u32 {
        self.instrs.iter().filter(|i| i.produces_bit()).count() as u32
    }

    pub fn extend(&mut self, other: &Circuit) {
        self.instrs.extend(other.instrs.iter().cloned());
    }

    pub fn max_qubit(&self) -> Option<Qubit> {
        self.instrs.iter().flat_map(|i| i.qubits()).max()
    }

    pub fn count_gates(&self, arity: usize) -> usize {
        self.instrs
            .iter()
            .filter(|i| matches!(i, Instr::Gate { gate, .. } if gate.arity() == arity))
            .count()
    }

    pub fn noise_sites(&self) -> impl Iterator<Item = (usize, &NoiseChannel)> {
        self.instrs.iter().enumerate().filter_map(|(k, i)| match i {
            Instr::Noise(ch) => Some((k, ch)),
            _ => None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_indices_count_measurements_and_computes() {
        let mut c = Circuit::new();
        c.reset(0, Basis::Z);
        assert_eq!(c.measure(0, Basis::Z, false), 0);
        assert_eq!(c.compute(Expr::Const(true)), 1);
        assert_eq!(c.measure(1, Basis::X, true), 2);
        assert_eq!(c.record_len(), 3);
    }

    #[test]
    fn expr_equals_pattern() {
        let es = vec![Expr::bit(0, 0), Expr::bit(0, 1)];
        let e = Expr::equals(&es, &[true, false]);
        assert!(e.eval(|b| b.idx == 0));
        assert!(!e.eval(|_| true));
    }

    #[test]
    fn decode_context_picks_first_raised_flag() {
        let d = Decode {
            syndrome: vec![Expr::bit(0, 0), Expr::bit(0, 1), Expr::bit(0, 2)],
            flags: vec![Expr::bit(0, 3), Expr::bit(0, 4)],
            table: vec![vec![vec![]; 8], vec![vec![1]; 8], vec![vec![2]; 8]],
            target: DecodeTarget::Parity { support: vec![] },
        };
        assert_eq!(d.correction(|b| b.idx == 4), &[2]);
        assert_eq!(d.correction(|b| b.idx == 3 || b.idx == 4), &[1]);
        assert!(d.correction(|_| false).is_empty());
    }
}
