//! Clifford gate kinds and their phase-free conjugation rules.

use crate::pauli::{PauliFrame, Qubit};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
}

/// Unitary Clifford gate kinds. Rotations carry the number of quarter turns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gate {
    RotX(u8),
    RotY(u8),
    RotZ(u8),
    H,
    S,
    SDag,
    /// Controlled-NOT, operands (control, target).
    CX,
    /// Molmer-Sorensen type exp(-i pi/4 XX).
    XX,
    /// exp(-i pi/4 ZZ).
    ZZ,
}

impl Gate {
    pub fn arity(self) -> usize {
        match self {
            Gate::CX | Gate::XX | Gate::ZZ => 2,
            _ => 1,
        }
    }

    pub fn inverse(self) -> Gate {
        match self {
            Gate::RotX(k) => Gate::RotX((4 - k % 4) % 4),
            Gate::RotY(k) => Gate::RotY((4 - k % 4) % 4),
            Gate::RotZ(k) => Gate::RotZ((4 - k % 4) % 4),
            Gate::S => Gate::SDag,
            Gate::SDag => Gate::S,
            g => g,
        }
    }

    pub fn name(self) -> String {
        match self {
            Gate::RotX(k) => format!("RX{}", k % 4),
            Gate::RotY(k) => format!("RY{}", k % 4),
            Gate::RotZ(k) => format!("RZ{}", k % 4),
            Gate::H => "H".into(),
            Gate::S => "S".into(),
            Gate::SDag => "SDAG".into(),
            Gate::CX => "CX".into(),
            Gate::XX => "XX".into(),
            Gate::ZZ => "ZZ".into(),
        }
    }

    /// Conjugates the frame by the gate, discarding phases.
    pub fn conjugate(self, frame: &mut PauliFrame, ops: &[Qubit]) {
        match self {
            Gate::RotX(k) => {
                if k % 2 == 1 {
                    let (x, z) = frame.bits(ops[0]);
                    frame.set_bits(ops[0], x ^ z, z);
                }
            }
            Gate::RotY(k) => {
                if k % 2 == 1 {
                    let (x, z) = frame.bits(ops[0]);
                    frame.set_bits(ops[0], z, x);
                }
            }
            Gate::RotZ(k) => {
                if k % 2 == 1 {
                    let (x, z) = frame.bits(ops[0]);
                    frame.set_bits(ops[0], x, z ^ x);
                }
            }
            Gate::H => {
                let (x, z) = frame.bits(ops[0]);
                frame.set_bits(ops[0], z, x);
            }
            Gate::S | Gate::SDag => {
                let (x, z) = frame.bits(ops[0]);
                frame.set_bits(ops[0], x, z ^ x);
            }
            Gate::CX => {
                let (c, t) = (ops[0], ops[1]);
                let (xc, zc) = frame.bits(c);
                let (xt, zt) = frame.bits(t);
                frame.set_bits(c, xc, zc ^ zt);
                frame.set_bits(t, xt ^ xc, zt);
            }
            Gate::XX => {
                let (a, b) = (ops[0], ops[1]);
                let (xa, za) = frame.bits(a);
                let (xb, zb) = frame.bits(b);
                if za ^ zb {
                    frame.set_bits(a, !xa, za);
                    frame.set_bits(b, !xb, zb);
                }
            }
            Gate::ZZ => {
                let (a, b) = (ops[0], ops[1]);
                let (xa, za) = frame.bits(a);
                let (xb, zb) = frame.bits(b);
                if xa ^ xb {
                    frame.set_bits(a, xa, !za);
                    frame.set_bits(b, xb, !zb);
                }
            }
        }
    }
}

/// Any instruction the frame engine can apply to a single shot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CliffordAction {
    Unitary { gate: Gate, qubits: Vec<Qubit> },
    Reset { qubit: Qubit, basis: Basis },
    Measure { qubit: Qubit, basis: Basis },
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GateError {
    #[error("gate {0} is not unitary")]
    NotUnitary(String),
    #[error("gate {gate} expects {expected} operands, got {got}")]
    Arity { gate: String, expected: usize, got: usize },
    #[error("repeated operand {0}")]
    RepeatedOperand(Qubit),
}

/// Returns the conjugated frame. Resets and measurements are rejected.
pub fn conjugate_frame(frame: &PauliFrame, action: &CliffordAction) -> Result<PauliFrame, GateError> {
    match action {
        CliffordAction::Unitary { gate, qubits } => {
            if qubits.len() != gate.arity() {
                return Err(GateError::Arity {
                    gate: gate.name(),
                    expected: gate.arity(),
                    got: qubits.len(),
                });
            }
            if qubits.len() == 2 && qubits[0] == qubits[1] {
                return Err(GateError::RepeatedOperand(qubits[0]));
            }
            let mut out = frame.clone();
            gate.conjugate(&mut out, qubits);
            Ok(out)
        }
        CliffordAction::Reset { .. } => Err(GateError::NotUnitary("reset".into())),
        CliffordAction::Measure { .. } => Err(GateError::NotUnitary("measure".into())),
    }
}

/// Clears both components of `q`: a fresh state carries no frame.
pub fn apply_reset(frame: &mut PauliFrame, q: Qubit) {
    frame.set_bits(q, false, false);
}

/// Returns the flip bit and clears the component the measurement collapses.
pub fn apply_measurement(frame: &mut PauliFrame, q: Qubit, basis: Basis) -> bool {
    let (x, z) = frame.bits(q);
    match basis {
        Basis::Z => {
            frame.set_bits(q, x, false);
            x
        }
        Basis::X => {
            frame.set_bits(q, false, z);
            z
        }
    }
}
