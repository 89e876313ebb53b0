//! Phase-free Pauli letters and sparse per-shot frames.

use serde::{Deserialize, Serialize};
use std::fmt;

pub type Qubit = u32;

/// Single-qubit Pauli letter stored as its (x, z) bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    pub const NON_IDENTITY: [Letter; 3] = [Letter::X, Letter::Y, Letter::Z];

    pub fn from_bits(x: bool, z: bool) -> Letter {
        match (x, z) {
            (false, false) => Letter::I,
            (true, false) => Letter::X,
            (true, true) => Letter::Y,
            (false, true) => Letter::Z,
        }
    }

    pub fn bits(self) -> u8 {
        match self {
            Letter::I => 0,
            Letter::X => 1,
            Letter::Y => 3,
            Letter::Z => 2,
        }
    }

    pub fn x(self) -> bool {
        self.bits() & 1 != 0
    }

    pub fn z(self) -> bool {
        self.bits() & 2 != 0
    }

    fn from_u8(b: u8) -> Letter {
        Letter::from_bits(b & 1 != 0, b & 2 != 0)
    }

    pub fn anticommutes(self, other: Letter) -> bool {
        (self.x() && other.z()) ^ (self.z() && other.x())
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        };
        write!(f, "{c}")
    }
}

/// Sparse Pauli string: sorted by qubit, never holds identity entries.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliFrame {
    entries: Vec<(Qubit, u8)>,
}

impl PauliFrame {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_letters<I: IntoIterator<Item = (Qubit, Letter)>>(it: I) -> Self {
        let mut f = Self::new();
        for (q, l) in it {
            f.mul_letter(q, l);
        }
        f
    }

    /// Parses strings like `X0 Z3 Y5`.
    pub fn parse(s: &str) -> Option<Self> {
        let mut f = Self::new();
        for tok in s.split_whitespace() {
            let (l, q) = tok.split_at(1);
            let letter = match l {
                "I" => Letter::I,
                "X" => Letter::X,
                "Y" => Letter::Y,
                "Z" => Letter::Z,
                _ => return None,
            };
            f.mul_letter(q.parse().ok()?, letter);
        }
        Some(f)
    }

    pub fn is_identity(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    fn find(&self, q: Qubit) -> Result<usize, usize> {
        self.entries.binary_search_by_key(&q, |e| e.0)
    }

    pub fn get(&self, q: Qubit) -> Letter {
        match self.find(q) {
            Ok(i) => Letter::from_u8(self.entries[i].1),
            Err(_) => Letter::I,
        }
    }

    pub fn bits(&self, q: Qubit) -> (bool, bool) {
        let l = self.get(q);
        (l.x(), l.z())
    }

    pub fn set(&mut self, q: Qubit, l: Letter) {
        let b = l.bits();
        match self.find(q) {
            Ok(i) => {
                if b == 0 {
                    self.entries.remove(i);
                } else {
                    self.entries[i].1 = b;
                }
            }
            Err(i) => {
                if b != 0 {
                    self.entries.insert(i, (q, b));
                }
            }
        }
    }

    pub fn set_bits(&mut self, q: Qubit, x: bool, z: bool) {
        self.set(q, Letter::from_bits(x, z));
    }

    /// Multiplies a letter into qubit `q` (phase discarded).
    pub fn mul_letter(&mut self, q: Qubit, l: Letter) {
        let cur = self.get(q).bits();
        self.set(q, Letter::from_u8(cur ^ l.bits()));
    }

    pub fn mul(&mut self, other: &PauliFrame) {
        for &(q, b) in &other.entries {
            self.mul_letter(q, Letter::from_u8(b));
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Qubit, Letter)> + '_ {
        self.entries.iter().map(|&(q, b)| (q, Letter::from_u8(b)))
    }

    pub fn support(&self) -> Vec<Qubit> {
        self.entries.iter().map(|e| e.0).collect()
    }

    /// Parity of anticommuting positions with `other`.
    pub fn anticommutes(&self, other: &PauliFrame) -> bool {
        let (mut i, mut j) = (0, 0);
        let mut parity = false;
        while i < self.entries.len() && j < other.entries.len() {
            let (qa, a) = self.entries[i];
            let (qb, b) = other.entries[j];
            match qa.cmp(&qb) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    parity ^= Letter::from_u8(a).anticommutes(Letter::from_u8(b));
                    i += 1;
                    j += 1;
                }
            }
        }
        parity
    }

    /// Restricts the frame to the given qubits.
    pub fn restrict(&self, qubits: &[Qubit]) -> PauliFrame {
        PauliFrame {
            entries: self
                .entries
                .iter()
                .copied()
                .filter(|(q, _)| qubits.contains(q))
                .collect(),
        }
    }

    /// Sorted by qubit with no identity entries.
    pub fn is_canonical(&self) -> bool {
        self.entries.iter().all(|e| e.1 != 0) && self.entries.windows(2).all(|w| w[0].0 < w[1].0)
    }
}

impl fmt::Display for PauliFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entries.is_empty() {
            return write!(f, "I");
        }
        let parts: Vec<String> = self.iter().map(|(q, l)| format!("{l}{q}")).collect();
        write!(f, "{}", parts.join(" "))
    }
}
