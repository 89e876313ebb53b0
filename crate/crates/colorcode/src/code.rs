//! Hexagonal (6.6.6) triangular color codes, the two-block merged code used
//! by lattice surgery, and CSS consistency checks.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Color {
    R,
    G,
    B,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plaquette {
    pub color: Color,
    pub qubits: Vec<u32>,
}

/// Generic CSS code given by check supports.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CssCode {
    pub n: u32,
    pub x_checks: Vec<Vec<u32>>,
    pub z_checks: Vec<Vec<u32>>,
    pub x_logical: Vec<u32>,
    pub z_logical: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorCode {
    pub d: u32,
    pub plaquettes: Vec<Plaquette>,
    pub css: CssCode,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CodeError {
    #[error("distance must be odd and at least 3, got {0}")]
    BadDistance(u32),
    #[error("merging requires two distance-3 blocks")]
    MergeDistance,
    #[error("exhaustive search limited to n <= {limit}, got {n}")]
    TooLarge { n: u32, limit: u32 },
}

/// The three d=3 plaquettes, syndrome bit order P1, P2, P3.
pub const STEANE_PLAQUETTES: [[u32; 4]; 3] = [[0, 1, 2, 3], [1, 2, 4, 5], [2, 3, 5, 6]];
pub const STEANE_LOGICAL: [u32; 3] = [0, 1, 4];

impl ColorCode {
    pub fn n(&self) -> u32 {
        self.css.n
    }

    pub fn checks(&self) -> Vec<Vec<u32>> {
        self.plaquettes.iter().map(|p| p.qubits.clone()).collect()
    }
}

/// Builds the distance-`d` triangular color code. d=3 uses the fixed
/// Steane labeling; larger codes label qubits row-major over the triangular
/// patch (row r = 0.., column c = 0..=r, plaquette centers at r + c = 1 mod 3).
pub fn build_hex_color_code(d: u32) -> Result<ColorCode, CodeError> {
    if d < 3 || d % 2 == 0 {
        return Err(CodeError::BadDistance(d));
    }
    if d == 3 {
        let colors = [Color::R, Color::G, Color::B];
        let plaquettes: Vec<Plaquette> = STEANE_PLAQUETTES
            .iter()
            .zip(colors)
            .map(|(q, color)| Plaquette { color, qubits: q.to_vec() })
            .collect();
        let checks: Vec<Vec<u32>> = plaquettes.iter().map(|p| p.qubits.clone()).collect();
        return Ok(ColorCode {
            d,
            plaquettes,
            css: CssCode {
                n: 7,
                x_checks: checks.clone(),
                z_checks: checks,
                x_logical: STEANE_LOGICAL.to_vec(),
                z_logical: STEANE_LOGICAL.to_vec(),
            },
        });
    }
    let b = 3 * (d as i64 - 1) / 2;
    let is_plaq = |r: i64, c: i64| (r + c).rem_euclid(3) == 1;
    let inside = |r: i64, c: i64| r >= 0 && r <= b && c >= 0 && c <= r;
    let mut site_id = std::collections::BTreeMap::new();
    for r in 0..=b {
        for c in 0..=r {
            if !is_plaq(r, c) {
                let id = site_id.len() as u32;
                site_id.insert((r, c), id);
            }
        }
    }
    let mut plaquettes = Vec::new();
    for r in 0..=b {
        for c in 0..=r {
            if !is_plaq(r, c) {
                continue;
            }
            let mut qs: Vec<u32> = [(0, 1), (0, -1), (1, 0), (-1, 0), (1, 1), (-1, -1)]
                .iter()
                .map(|(dr, dc)| (r + dr, c + dc))
                .filter(|&(rr, cc)| inside(rr, cc))
                .map(|k| site_id[&k])
                .collect();
            qs.sort_unstable();
            let color = [Color::R, Color::G, Color::B][(r % 3) as usize];
            plaquettes.push(Plaquette { color, qubits: qs });
        }
    }
    let logical: Vec<u32> = (0..=b).filter(|&r| !is_plaq(r, 0)).map(|r| site_id[&(r, 0)]).collect();
    let checks: Vec<Vec<u32>> = plaquettes.iter().map(|p| p.qubits.clone()).collect();
    Ok(ColorCode {
        d,
        plaquettes,
        css: CssCode {
            n: site_id.len() as u32,
            x_checks: checks.clone(),
            z_checks: checks,
            x_logical: logical.clone(),
            z_logical: logical,
        },
    })
}

/// Two d=3 blocks joined along the {4,5,6} boundary. Block 2 qubits are
/// offset by 7.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergedCode {
    pub css: CssCode,
    /// New X checks: weight-4 on (4,5) of both blocks, weight-2 on 6 of both.
    pub boundary_x: [Vec<u32>; 2],
    /// Merged weight-8 Z check.
    pub z_w8: Vec<u32>,
    pub block_offset: u32,
}

pub fn merge_codes(a: &ColorCode, b: &ColorCode) -> Result<MergedCode, CodeError> {
    if a.d != 3 || b.d != 3 {
        return Err(CodeError::MergeDistance);
    }
    let off = a.n();
    let shift = |v: &Vec<u32>| v.iter().map(|q| q + off).collect::<Vec<u32>>();
    let b4 = vec![4, 5, 4 + off, 5 + off];
    let b2 = vec![6, 6 + off];
    let mut x_checks: Vec<Vec<u32>> = a.css.x_checks.clone();
    x_checks.extend(b.css.x_checks.iter().map(shift));
    x_checks.push(b4.clone());
    x_checks.push(b2.clone());
    let p3 = &a.css.z_checks[2];
    let mut z_w8: Vec<u32> = p3.clone();
    z_w8.extend(b.css.z_checks[2].iter().map(|q| q + off));
    let mut z_checks: Vec<Vec<u32>> = a.css.z_checks[..2].to_vec();
    z_checks.extend(b.css.z_checks[..2].iter().map(shift));
    z_checks.push(z_w8.clone());
    let mut z_logical = a.css.z_logical.clone();
    z_logical.extend(b.css.z_logical.iter().map(|q| q + off));
    Ok(MergedCode {
        css: CssCode { n: 2 * off, x_checks, z_checks, x_logical: a.css.x_logical.clone(), z_logical },
        boundary_x: [b4, b2],
        z_w8,
        block_offset: off,
    })
}

// ---- GF(2) helpers ----

pub type BitRow = Vec<u64>;

pub fn row_from_support(n: u32, support: &[u32]) -> BitRow {
    let mut r = vec![0u64; (n as usize).div_ceil(64)];
    for &q in support {
        r[(q / 64) as usize] ^= 1 << (q % 64);
    }
    r
}

fn dot(a: &BitRow, b: &BitRow) -> bool {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum::<u32>() % 2 == 1
}

/// Rank over GF(2).
pub fn gf2_rank(rows: &[BitRow]) -> usize {
    let mut m: Vec<BitRow> = rows.to_vec();
    let words = m.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for col in 0..words * 64 {
        let (w, bit) = (col / 64, 1u64 << (col % 64));
        let Some(p) = (rank..m.len()).find(|&i| m[i][w] & bit != 0) else { continue };
        m.swap(rank, p);
        for i in 0..m.len() {
            if i != rank && m[i][w] & bit != 0 {
                let pivot = m[rank].clone();
                m[i].iter_mut().zip(&pivot).for_each(|(a, b)| *a ^= b);
            }
        }
        rank += 1;
    }
    rank
}

/// True when `v` lies in the row space of `rows`.
pub fn in_row_space(rows: &[BitRow], v: &BitRow) -> bool {
    let mut with = rows.to_vec();
    with.push(v.clone());
    gf2_rank(&with) == gf2_rank(rows)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CssReport {
    pub k: i64,
    pub violations: Vec<String>,
}

impl CssReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks commutation, k = 1 and the logical pair.
pub fn verify_css(code: &CssCode) -> CssReport {
    let n = code.n;
    let hx: Vec<BitRow> = code.x_checks.iter().map(|c| row_from_support(n, c)).collect();
    let hz: Vec<BitRow> = code.z_checks.iter().map(|c| row_from_support(n, c)).collect();
    let xl = row_from_support(n, &code.x_logical);
    let zl = row_from_support(n, &code.z_logical);
    let mut v = Vec::new();
    for (i, x) in hx.iter().enumerate() {
        for (j, z) in hz.iter().enumerate() {
            if dot(x, z) {
                v.push(format!("X check {i} anticommutes with Z check {j}"));
            }
        }
        if dot(x, &zl) {
            v.push(format!("X check {i} anticommutes with Z logical"));
        }
    }
    for (j, z) in hz.iter().enumerate() {
        if dot(z, &xl) {
            v.push(format!("Z check {j} anticommutes with X logical"));
        }
    }
    if !dot(&xl, &zl) {
        v.push("logical X and Z commute".into());
    }
    if in_row_space(&hx, &xl) {
        v.push("X logical is a stabilizer".into());
    }
    if in_row_space(&hz, &zl) {
        v.push("Z logical is a stabilizer".into());
    }
    let k = n as i64 - gf2_rank(&hx) as i64 - gf2_rank(&hz) as i64;
    if k != 1 {
        v.push(format!("k = {k}, expected 1"));
    }
    CssReport { k, violations: v }
}

/// Color-code specific invariants on top of [`verify_css`].
pub fn verify_color_code(code: &ColorCode) -> CssReport {
    let mut r = verify_css(&code.css);
    if code.css.x_checks != code.css.z_checks {
        r.violations.push("X and Z checks differ (not self-dual)".into());
    }
    for (i, p) in code.plaquettes.iter().enumerate() {
        if p.qubits.len() != 4 && p.qubits.len() != 6 {
            r.violations.push(format!("plaquette {i} has weight {}", p.qubits.len()));
        }
        for (j, q) in code.plaquettes.iter().enumerate().skip(i + 1) {
            if p.color == q.color && p.qubits.iter().any(|x| q.qubits.contains(x)) {
                r.violations.push(format!("adjacent plaquettes {i} and {j} share a color"));
            }
        }
    }
    if code.css.x_logical.len() as u32 != code.d || code.css.z_logical.len() as u32 != code.d {
        r.violations.push("logical weight differs from d".into());
    }
    r
}

pub const EXHAUSTIVE_LIMIT: u32 = 25;

/// Code distance: the smaller of the X-type and Z-type minimum logical
/// weights, found by exhaustive search.
pub fn min_logical_weight(code: &CssCode) -> Result<u32, CodeError> {
    let (x, z) = logical_weights(code)?;
    Ok(x.min(z))
}

/// (X-type, Z-type) minimum logical weights. A Z-type logical commutes with
/// every X check and lies outside the Z-check row space, and vice versa.
pub fn logical_weights(code: &CssCode) -> Result<(u32, u32), CodeError> {
    let n = code.n;
    if n > EXHAUSTIVE_LIMIT {
        return Err(CodeError::TooLarge { n, limit: EXHAUSTIVE_LIMIT });
    }
    let x = min_weight(n, &code.z_checks, &code.x_checks);
    let z = min_weight(n, &code.x_checks, &code.z_checks);
    Ok((x, z))
}

fn min_weight(n: u32, commute: &[Vec<u32>], stabilizers: &[Vec<u32>]) -> u32 {
    let h: Vec<u64> = commute.iter().map(|c| c.iter().fold(0u64, |a, &q| a | 1 << q)).collect();
    let rows: Vec<BitRow> = stabilizers.iter().map(|c| row_from_support(n, c)).collect();
    for w in 1..=n {
        let mut found = false;
        for_each_combination(n, w, &mut |mask| {
            if h.iter().all(|&x| (x & mask).count_ones() % 2 == 0) && !in_row_space(&rows, &vec![mask]) {
                found = true;
                return true;
            }
            false
        });
        if found {
            return w;
        }
    }
    n
}

/// Calls `f` on each n-bit mask of weight `w`; stops early when `f` returns true.
fn for_each_combination(n: u32, w: u32, f: &mut impl FnMut(u64) -> bool) {
    if w == 0 || w > n {
        return;
    }
    let mut m: u64 = (1u64 << w) - 1;
    let limit = 1u64 << n;
    while m < limit {
        if f(m) {
            return;
        }
        // Gosper's hack: next mask with the same popcount.
        let c = m & m.wrapping_neg();
        let r = m + c;
        m = (((r ^ m) >> 2) / c) | r;
    }
}

/// Plain-text alist export of both check matrices and the logicals.
pub fn to_alist(code: &CssCode) -> String {
    let mut s = String::new();
    let block = |s: &mut String, name: &str, rows: &[Vec<u32>]| {
        let _ = writeln!(s, "# {name}");
        let _ = writeln!(s, "{} {}", code.n, rows.len());
        let maxw = rows.iter().map(|r| r.len()).max().unwrap_or(0);
        let mut col_deg = vec![0usize; code.n as usize];
        rows.iter().flatten().for_each(|&q| col_deg[q as usize] += 1);
        let _ = writeln!(s, "{} {}", col_deg.iter().max().unwrap_or(&0), maxw);
        let _ = writeln!(s, "{}", col_deg.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" "));
        let _ = writeln!(s, "{}", rows.iter().map(|r| r.len().to_string()).collect::<Vec<_>>().join(" "));
        for q in 0..code.n {
            let rs: Vec<String> = rows
                .iter()
                .enumerate()
                .filter(|(_, r)| r.contains(&q))
                .map(|(i, _)| (i + 1).to_string())
                .collect();
            let _ = writeln!(s, "{}", rs.join(" "));
        }
        for r in rows {
            let _ = writeln!(s, "{}", r.iter().map(|q| (q + 1).to_string()).collect::<Vec<_>>().join(" "));
        }
    };
    block(&mut s, "HX", &code.x_checks);
    block(&mut s, "HZ", &code.z_checks);
    let _ = writeln!(s, "# XL\n{}", code.x_logical.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(" "));
    let _ = writeln!(s, "# ZL\n{}", code.z_logical.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(" "));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steane_layout() {
        let c = build_hex_color_code(3).unwrap();
        assert_eq!(c.n(), 7);
        assert!(c.plaquettes.iter().all(|p| p.qubits.len() == 4));
        assert_eq!(c.css.z_logical, vec![0, 1, 4]);
        assert!(verify_color_code(&c).is_clean());
    }

    #[test]
    fn larger_codes() {
        let c5 = build_hex_color_code(5).unwrap();
        assert_eq!(c5.n(), 19);
        assert!(c5.plaquettes.iter().any(|p| p.qubits.len() == 6));
        assert!(verify_color_code(&c5).is_clean(), "{:?}", verify_color_code(&c5));
        let c7 = build_hex_color_code(7).unwrap();
        assert_eq!(c7.n(), 37);
        assert_eq!(verify_color_code(&c7).k, 1);
        assert!(build_hex_color_code(4).is_err());
        assert!(build_hex_color_code(1).is_err());
    }

    #[test]
    fn merged_counts() {
        let c = build_hex_color_code(3).unwrap();
        let m = merge_codes(&c, &c).unwrap();
        assert_eq!(m.css.n, 14);
        assert_eq!(m.css.x_checks.len(), 8);
        assert_eq!(m.css.z_checks.len(), 5);
        let r = verify_css(&m.css);
        assert!(r.is_clean(), "{r:?}");
        assert_eq!(r.k, 1);
        assert_eq!(logical_weights(&m.css).unwrap(), (3, 6));
        assert_eq!(min_logical_weight(&m.css).unwrap(), 3);
    }

    #[test]
    fn flipped_bit_is_reported() {
        let mut c = build_hex_color_code(3).unwrap().css;
        c.x_checks[0] = vec![0, 1, 2, 4];
        assert!(verify_css(&c).violations.iter().any(|v| v.contains("anticommutes")));
    }

    #[test]
    fn rank_of_identity() {
        let rows: Vec<BitRow> = (0..5).map(|i| row_from_support(5, &[i])).collect();
        assert_eq!(gf2_rank(&rows), 5);
        assert!(in_row_space(&rows, &row_from_support(5, &[1, 3])));
    }
}
