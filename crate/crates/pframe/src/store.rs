//! Packed measurement records, per-shot state and the sparse shot store.

use crate::noise::{Effect, NoiseChannel};
use crate::pauli::PauliFrame;
use rand::Rng;
use std::collections::BTreeMap;

/// Packed bit sequence of measurement flips (1 = flipped relative to the
/// all-zero reference).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Record {
    words: Vec<u64>,
}

impl Record {
    pub fn zeros(n_bits: u32) -> Self {
        Self { words: vec![0; (n_bits as usize).div_ceil(64)] }
    }

    #[inline]
    pub fn get(&self, i: u32) -> bool {
        let w = (i / 64) as usize;
        w < self.words.len() && (self.words[w] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: u32, v: bool) {
        let w = (i / 64) as usize;
        if w >= self.words.len() {
            self.words.resize(w + 1, 0);
        }
        let m = 1u64 << (i % 64);
        if v {
            self.words[w] |= m;
        } else {
            self.words[w] &= !m;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: u32) {
        let v = self.get(i);
        self.set(i, !v);
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn bits(&self, n: u32) -> Vec<bool> {
        (0..n).map(|i| self.get(i)).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ShotState {
    pub frame: PauliFrame,
    pub rec: Record,
}

impl ShotState {
    pub fn new(n_bits: u32) -> Self {
        Self { frame: PauliFrame::new(), rec: Record::zeros(n_bits) }
    }

    /// Applies one channel outcome; record flips land at `offset + bit`.
    pub fn apply_effect(&mut self, effect: &Effect, offset: u32) {
        match effect {
            Effect::Pauli(v) => {
                for &(q, l) in v {
                    self.frame.mul_letter(q, l);
                }
            }
            Effect::FlipBit(b) => self.rec.flip(offset + b),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StoreError {
    #[error("shot {0} present in both partitions")]
    Overlap(u64),
    #[error("shot {0} outside [0, {1})")]
    OutOfRange(u64, u64),
}

/// Faulty shots only; absent shots carry the shared base state.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ShotStore {
    pub n_shots: u64,
    faulty: BTreeMap<u64, ShotState>,
}

impl ShotStore {
    pub fn new(n_shots: u64) -> Self {
        Self { n_shots, faulty: BTreeMap::new() }
    }

    pub fn len(&self) -> usize {
        self.faulty.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faulty.is_empty()
    }

    pub fn get(&self, shot: u64) -> Option<&ShotState> {
        self.faulty.get(&shot)
    }

    pub fn insert(&mut self, shot: u64, st: ShotState) {
        self.faulty.insert(shot, st);
    }

    pub fn remove(&mut self, shot: u64) -> Option<ShotState> {
        self.faulty.remove(&shot)
    }

    pub fn entry_or(&mut self, shot: u64, base: &ShotState) -> &mut ShotState {
        self.faulty.entry(shot).or_insert_with(|| base.clone())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&u64, &ShotState)> {
        self.faulty.iter()
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut ShotState> {
        self.faulty.values_mut()
    }

    pub fn into_entries(self) -> impl Iterator<Item = (u64, ShotState)> {
        self.faulty.into_iter()
    }

    /// Draws one outcome of `channel` per site and multiplies it into that
    /// shot, creating the entry from `base` when the shot was trivial.
    pub fn apply_channel<R: Rng + ?Sized>(
        &mut self,
        sites: &[u64],
        channel: &NoiseChannel,
        base: &ShotState,
        offset: u32,
        rng: &mut R,
    ) {
        let n = channel.n_outcomes();
        for &s in sites {
            let k = if n == 1 { 0 } else { rng.gen_range(0..n) };
            self.entry_or(s, base).apply_effect(&channel.effect(k), offset);
        }
    }

    /// Union of two stores over disjoint shot sets.
    pub fn merge(mut self, other: ShotStore) -> Result<ShotStore, StoreError> {
        for (k, v) in other.faulty {
            if self.faulty.contains_key(&k) {
                return Err(StoreError::Overlap(k));
            }
            self.faulty.insert(k, v);
        }
        self.n_shots = self.n_shots.max(other.n_shots);
        Ok(self)
    }

    pub fn frames_canonical(&self) -> bool {
        self.faulty.values().all(|s| s.frame.is_canonical())
    }
}

/// Shot ids belonging to one execution group.
#[derive(Clone, Debug, PartialEq)]
pub enum Members {
    /// A contiguous range minus a sorted exclusion list.
    AllExcept { start: u64, len: u64, excluded: Vec<u64> },
    /// Explicit sorted list.
    Only(Vec<u64>),
}

impl Members {
    pub fn range(start: u64, len: u64) -> Self {
        Members::AllExcept { start, len, excluded: Vec::new() }
    }

    pub fn count(&self) -> u64 {
        match self {
            Members::AllExcept { len, excluded, .. } => len - excluded.len() as u64,
            Members::Only(v) => v.len() as u64,
        }
    }

    /// Maps ascending member positions to shot ids.
    pub fn select(&self, positions: &[usize]) -> Vec<u64> {
        match self {
            Members::Only(v) => positions.iter().map(|&p| v[p]).collect(),
            Members::AllExcept { start, excluded, .. } => {
                let mut j = 0usize;
                positions
                    .iter()
                    .map(|&p| {
                        let mut id = start + p as u64 + j as u64;
                        while j < excluded.len() && excluded[j] <= id {
                            j += 1;
                            id = start + p as u64 + j as u64;
                        }
                        id
                    })
                    .collect()
            }
        }
    }

    /// Removes sorted ids that are members.
    pub fn remove(&mut self, ids: &[u64]) {
        if ids.is_empty() {
            return;
        }
        match self {
            Members::Only(v) => {
                let mut j = 0;
                v.retain(|x| {
                    while j < ids.len() && ids[j] < *x {
                        j += 1;
                    }
                    !(j < ids.len() && ids[j] == *x)
                });
            }
            Members::AllExcept { excluded, .. } => {
                let mut out = Vec::with_capacity(excluded.len() + ids.len());
                let (mut a, mut b) = (0, 0);
                while a < excluded.len() || b < ids.len() {
                    if b == ids.len() || (a < excluded.len() && excluded[a] < ids[b]) {
                        out.push(excluded[a]);
                        a += 1;
                    } else {
                        out.push(ids[b]);
                        b += 1;
                    }
                }
                *excluded = out;
            }
        }
    }

    pub fn iter(&self) -> Box<dyn Iterator<Item = u64> + '_> {
        match self {
            Members::Only(v) => Box::new(v.iter().copied()),
            Members::AllExcept { start, len, excluded } => {
                let mut j = 0usize;
                Box::new((*start..start + len).filter(move |&id| {
                    while j < excluded.len() && excluded[j] < id {
                        j += 1;
                    }
                    !(j < excluded.len() && excluded[j] == id)
                }))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::Letter;
    use crate::sample::keyed_rng;

    #[test]
    fn record_bits() {
        let mut r = Record::zeros(70);
        r.set(65, true);
        r.flip(3);
        assert!(r.get(65) && r.get(3) && !r.get(4));
        r.flip(3);
        assert_eq!(r.count_ones(), 1);
    }

    #[test]
    fn depol1_into_trivial_then_cancel() {
        let mut st = ShotState::new(0);
        st.apply_effect(&Effect::Pauli(vec![(3, Letter::Z)]), 0);
        assert_eq!(st.frame, PauliFrame::parse("Z3").unwrap());
        let mut st = ShotState { frame: PauliFrame::parse("X3").unwrap(), rec: Record::zeros(0) };
        st.apply_effect(&Effect::Pauli(vec![(3, Letter::X)]), 0);
        assert!(st.frame.is_identity());
    }

    #[test]
    fn apply_channel_creates_entries() {
        let mut s = ShotStore::new(10);
        let base = ShotState::new(1);
        let mut rng = keyed_rng(1, &[]);
        s.apply_channel(&[2, 7], &NoiseChannel::MeasFlip { p: 0.5, bit: 0 }, &base, 0, &mut rng);
        assert_eq!(s.len(), 2);
        assert!(s.get(7).unwrap().rec.get(0));
        assert!(s.frames_canonical());
    }

    #[test]
    fn merge_disjoint_and_overlap() {
        let mut a = ShotStore::new(4);
        a.insert(0, ShotState::new(0));
        let mut b = ShotStore::new(4);
        b.insert(3, ShotState::new(0));
        let m = a.clone().merge(b).unwrap();
        assert_eq!(m.len(), 2);
        let mut c = ShotStore::new(4);
        c.insert(0, ShotState::new(0));
        assert_eq!(a.merge(c), Err(StoreError::Overlap(0)));
    }

    #[test]
    fn members_select_skips_excluded() {
        let mut m = Members::range(10, 10);
        m.remove(&[11, 12, 15]);
        assert_eq!(m.count(), 7);
        assert_eq!(m.select(&[0, 1, 2, 3, 6]), vec![10, 13, 14, 16, 19]);
        assert_eq!(m.iter().collect::<Vec<_>>(), vec![10, 13, 14, 16, 17, 18, 19]);
        let mut o = Members::Only(vec![1, 4, 9]);
        o.remove(&[4]);
        assert_eq!(o.iter().collect::<Vec<_>>(), vec![1, 9]);
    }
}
