//! Qubit footprint from logical error rates at small distances.

use serde::{Deserialize, Serialize};

/// Qubits of two distance-d blocks with flagged simultaneous readout plus
/// the surgery ancillas along the shared boundary.
pub fn block_qubits(d: u32) -> u64 {
    let n = colorcode::gadgets::data_qubits(d) as u64;
    // One syndrome and one flag ancilla per plaquette, (n - 1) / 2 plaquettes.
    2 * (n + (n - 1)) + (d as u64 + 1) / 2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Footprint {
    Qubits {
        qubits: u64,
        distance: u32,
        /// The chosen distance lies beyond every simulated distance.
        extrapolated: bool,
    },
    NoFiniteFootprint {
        reason: String,
    },
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FootprintError {
    #[error("no measured distances")]
    Empty,
    #[error("distances must be odd and at least 3, got {0}")]
    Distance(u32),
    #[error("logical error rates must lie in (0, 1], got {0}")]
    Rate(f64),
}

/// Smallest odd distance whose logical error rate reaches `target` at
/// physical rate `p`, as qubits.
///
/// `measured` holds (distance, p_L) after d rounds. Rates are modeled as
/// p_L(d) = A * r^((d+1)/2); with two or more distances A and r are fitted,
/// with one distance A is taken as the pseudo-threshold p^2 / p_L(3).
pub fn footprint(measured: &[(u32, f64)], p: f64, target: f64) -> Result<Footprint, FootprintError> {
    let mut pts = measured.to_vec();
    pts.sort_by_key(|x| x.0);
    let Some(&(d0, pl0)) = pts.first() else { return Err(FootprintError::Empty) };
    for &(d, pl) in &pts {
        if d < 3 || d % 2 == 0 {
            return Err(FootprintError::Distance(d));
        }
        if !(pl > 0.0 && pl <= 1.0) {
            return Err(FootprintError::Rate(pl));
        }
    }
    let d_max = pts.last().expect("non-empty").0;
    if let Some(&(d, _)) = pts.iter().find(|x| x.1 <= target) {
        return Ok(Footprint::Qubits { qubits: block_qubits(d), distance: d, extrapolated: false });
    }
    if pl0 > p {
        return Ok(Footprint::NoFiniteFootprint { reason: format!("p_L = {pl0:e} at d = {d0} exceeds p = {p:e}") });
    }
    let (ln_a, ln_r) = if pts.len() == 1 {
        let th = p * p / pl0;
        (th.ln(), (p / th).ln())
    } else {
        let xs: Vec<f64> = pts.iter().map(|x| (x.0 as f64 + 1.0) / 2.0).collect();
        let ys: Vec<f64> = pts.iter().map(|x| x.1.ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let s = sxy / sxx;
        (my - s * mx, s)
    };
    if ln_r >= 0.0 {
        return Ok(Footprint::NoFiniteFootprint { reason: "p_L does not decrease with distance".into() });
    }
    let k = ((target.ln() - ln_a) / ln_r - 1e-9).ceil().max(2.0);
    let d = (2.0 * k - 1.0) as u32;
    Ok(Footprint::Qubits { qubits: block_qubits(d), distance: d, extrapolated: d > d_max })
}
