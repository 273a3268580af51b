//! Which rule captures which observation, for a live rule list.
//!
//! Positions are 0-based: rule `j` of the list is `ids()[j]`. The default
//! rule is kept separately and always captures what no rule does.

use std::collections::HashSet;

use crate::bitvec::BitVector;
use crate::error::{Error, Result};
use crate::miner::{AntecedentId, RulePool};
use crate::posterior::LabelCounts;

/// What a mutation changed, in post-mutation positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delta {
    pub kind: DeltaKind,
    /// Rule positions whose counts may differ from before the mutation
    /// (beyond the structural shift implied by `kind`).
    pub touched: Vec<usize>,
    pub default_touched: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaKind {
    Removed { pos: usize },
    Inserted { pos: usize },
    /// Positions keep their slots; touched ones are compared in place.
    Swapped { first: usize, second: usize },
}

/// Common interface of the bit-vector engine and the set-based reference.
pub trait CaptureEngine<'a>: Sized {
    fn build(pool: &'a RulePool, labels: &'a BitVector, ids: &[AntecedentId]) -> Result<Self>;

    fn ids(&self) -> &[AntecedentId];

    fn rule_counts(&self) -> &[LabelCounts];

    fn default_counts(&self) -> LabelCounts;

    fn contains(&self, id: AntecedentId) -> bool;

    fn remove_rule(&mut self, pos: usize) -> Result<Delta>;

    fn insert_rule(&mut self, pos: usize, id: AntecedentId) -> Result<Delta>;

    /// Exchanges the rules at `first < second`.
    fn swap_rules(&mut self, first: usize, second: usize) -> Result<Delta>;

    fn len(&self) -> usize {
        self.ids().len()
    }

    fn is_empty(&self) -> bool {
        self.ids().is_empty()
    }

    /// Counts for rules `0..m` followed by the default rule.
    fn all_counts(&self) -> Vec<LabelCounts> {
        let mut v = self.rule_counts().to_vec();
        v.push(self.default_counts());
        v
    }
}

fn validate_ids(pool: &RulePool, ids: &[AntecedentId]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for &id in ids {
        if id >= pool.len() {
            return Err(Error::UnknownId(id));
        }
        if !seen.insert(id) {
            return Err(Error::DuplicateId(id));
        }
    }
    Ok(())
}

fn check_swap(first: usize, second: usize, len: usize) -> Result<()> {
    if first >= second {
        return Err(Error::InvalidSwap { first, second });
    }
    if second >= len {
        return Err(Error::PositionOutOfRange { pos: second, len });
    }
    Ok(())
}

fn check_insert(pool: &RulePool, in_list: &[bool], pos: usize, len: usize, id: AntecedentId) -> Result<()> {
    if pos > len {
        return Err(Error::PositionOutOfRange { pos, len });
    }
    if id >= pool.len() {
        return Err(Error::UnknownId(id));
    }
    if in_list[id] {
        return Err(Error::DuplicateId(id));
    }
    Ok(())
}

/// The bit-vector capture engine.
#[derive(Debug, Clone)]
pub struct CaptureState<'a> {
    pool: &'a RulePool,
    labels: &'a BitVector,
    ids: Vec<AntecedentId>,
    in_list: Vec<bool>,
    captures: Vec<BitVector>,
    default_captures: BitVector,
    counts: Vec<LabelCounts>,
    default_counts: LabelCounts,
    captured: BitVector,
    spare: Vec<BitVector>,
}

impl<'a> CaptureState<'a> {
    pub fn captures(&self) -> &[BitVector] {
        &self.captures
    }

    pub fn default_captures(&self) -> &BitVector {
        &self.default_captures
    }

    pub fn pool(&self) -> &'a RulePool {
        self.pool
    }

    pub fn labels(&self) -> &'a BitVector {
        self.labels
    }

    fn counts_of(&self, bits: &BitVector) -> LabelCounts {
        let n1 = bits.count_and(self.labels);
        LabelCounts::new(bits.count_ones() - n1, n1)
    }

    fn fresh(&mut self) -> BitVector {
        self.spare
            .pop()
            .unwrap_or_else(|| BitVector::zeros(self.labels.len()))
    }

    /// Re-derives counts at `pos` and reports whether they changed.
    fn refresh(&mut self, pos: usize) -> bool {
        let c = self.counts_of(&self.captures[pos]);
        let changed = c != self.counts[pos];
        self.counts[pos] = c;
        changed
    }

    fn refresh_default(&mut self) -> bool {
        let c = self.counts_of(&self.default_captures);
        let changed = c != self.default_counts;
        self.default_counts = c;
        changed
    }
}

impl<'a> CaptureEngine<'a> for CaptureState<'a> {
    /// First-match captures from scratch.
    fn build(pool: &'a RulePool, labels: &'a BitVector, ids: &[AntecedentId]) -> Result<Self> {
        validate_ids(pool, ids)?;
        if labels.len() != pool.n() {
            return Err(Error::InvalidParameter(format!(
                "labels have {} rows but the pool was mined on {}",
                labels.len(),
                pool.n()
            )));
        }
        let n = labels.len();
        let mut captured = BitVector::zeros(n);
        let mut captures = Vec::with_capacity(ids.len());
        let mut in_list = vec![false; pool.len()];
        for &id in ids {
            let cap = pool.init_bits(id).and_not(&captured);
            captured.or_assign(&cap);
            captures.push(cap);
            in_list[id] = true;
        }
        let mut state = CaptureState {
            pool,
            labels,
            ids: ids.to_vec(),
            in_list,
            counts: Vec::with_capacity(ids.len()),
            default_captures: captured.not(),
            captures,
            default_counts: LabelCounts::default(),
            captured,
            spare: Vec::new(),
        };
        state.counts = state.captures.iter().map(|c| state.counts_of(c)).collect();
        state.default_counts = state.counts_of(&state.default_captures);
        Ok(state)
    }

    fn ids(&self) -> &[AntecedentId] {
        &self.ids
    }

    fn rule_counts(&self) -> &[LabelCounts] {
        &self.counts
    }

    fn default_counts(&self) -> LabelCounts {
        self.default_counts
    }

    fn contains(&self, id: AntecedentId) -> bool {
        self.in_list.get(id).copied().unwrap_or(false)
    }

    fn remove_rule(&mut self, k: usize) -> Result<Delta> {
        let m = self.ids.len();
        if k >= m {
            return Err(Error::PositionOutOfRange { pos: k, len: m });
        }
        let mut remaining = self.captures.remove(k);
        let id = self.ids.remove(k);
        self.counts.remove(k);
        self.in_list[id] = false;

        let mut touched = Vec::new();
        let mut tmp = self.fresh();
        // Successors have shifted down by one: old position j is now j - 1.
        for j in k..m - 1 {
            if remaining.is_zero() {
                break;
            }
            tmp.assign_and(self.pool.init_bits(self.ids[j]), &remaining);
            if tmp.is_zero() {
                continue;
            }
            self.captures[j].or_assign(&tmp);
            remaining.and_not_assign(&tmp);
            self.refresh(j);
            touched.push(j);
        }
        let default_touched = !remaining.is_zero();
        if default_touched {
            self.default_captures.or_assign(&remaining);
            self.refresh_default();
        }
        self.spare.push(tmp);
        self.spare.push(remaining);
        Ok(Delta {
            kind: DeltaKind::Removed { pos: k },
            touched,
            default_touched,
        })
    }

    fn insert_rule(&mut self, k: usize, id: AntecedentId) -> Result<Delta> {
        let m = self.ids.len();
        check_insert(self.pool, &self.in_list, k, m, id)?;
        let mut captured = std::mem::replace(&mut self.captured, BitVector::zeros(0));
        captured.clear();
        for cap in &self.captures[..k] {
            captured.or_assign(cap);
        }
        self.ids.insert(k, id);
        self.in_list[id] = true;
        let slot = self.fresh();
        self.captures.insert(k, slot);
        self.counts.insert(k, LabelCounts::default());

        let mut touched = vec![k];
        for j in k..=m {
            let init = self.pool.init_bits(self.ids[j]);
            self.captures[j].assign_and_not(init, &captured);
            captured.or_assign(&self.captures[j]);
            if self.refresh(j) && j > k {
                touched.push(j);
            }
        }
        self.default_captures.copy_from(&captured);
        self.default_captures.not_assign();
        let default_touched = self.refresh_default();
        self.captured = captured;
        Ok(Delta {
            kind: DeltaKind::Inserted { pos: k },
            touched,
            default_touched,
        })
    }

    fn swap_rules(&mut self, first: usize, second: usize) -> Result<Delta> {
        check_swap(first, second, self.ids.len())?;
        let mut captured = std::mem::replace(&mut self.captured, BitVector::zeros(0));
        captured.clear();
        for cap in &self.captures[first..=second] {
            captured.or_assign(cap);
        }
        self.ids.swap(first, second);
        let mut touched = Vec::new();
        for t in first..=second {
            let init = self.pool.init_bits(self.ids[t]);
            self.captures[t].assign_and(&captured, init);
            captured.and_not_assign(&self.captures[t]);
            if self.refresh(t) {
                touched.push(t);
            }
        }
        debug_assert!(captured.is_zero());
        self.captured = captured;
        Ok(Delta {
            kind: DeltaKind::Swapped { first, second },
            touched,
            default_touched: false,
        })
    }
}

/// Reference engine over hash sets of row indices. It runs the same
/// remove/insert/swap procedures with set operations in place of word-level
/// logic, and serves as the slow side of the capture benchmark.
#[derive(Debug, Clone)]
pub struct NaiveCaptureState<'a> {
    pool: &'a RulePool,
    positives: HashSet<usize>,
    init: Vec<HashSet<usize>>,
    ids: Vec<AntecedentId>,
    captures: Vec<HashSet<usize>>,
    default_captures: HashSet<usize>,
    counts: Vec<LabelCounts>,
    default_counts: LabelCounts,
}

impl NaiveCaptureState<'_> {
    fn counts_of(&self, set: &HashSet<usize>) -> LabelCounts {
        let n1 = set.iter().filter(|i| self.positives.contains(i)).count();
        LabelCounts::new(set.len() - n1, n1)
    }

    /// Captured rows per rule, then the default, as sorted index lists.
    pub fn capture_sets(&self) -> (Vec<Vec<usize>>, Vec<usize>) {
        let sorted = |s: &HashSet<usize>| {
            let mut v: Vec<usize> = s.iter().copied().collect();
            v.sort_unstable();
            v
        };
        (self.captures.iter().map(sorted).collect(), sorted(&self.default_captures))
    }

    fn recount(&mut self, pos: usize) -> bool {
        let c = self.counts_of(&self.captures[pos]);
        let changed = c != self.counts[pos];
        self.counts[pos] = c;
        changed
    }

    fn recount_default(&mut self) -> bool {
        let c = self.counts_of(&self.default_captures);
        let changed = c != self.default_counts;
        self.default_counts = c;
        changed
    }
}

impl<'a> CaptureEngine<'a> for NaiveCaptureState<'a> {
    fn build(pool: &'a RulePool, labels: &'a BitVector, ids: &[AntecedentId]) -> Result<Self> {
        validate_ids(pool, ids)?;
        if labels.len() != pool.n() {
            return Err(Error::InvalidParameter(format!(
                "labels have {} rows but the pool was mined on {}",
                labels.len(),
                pool.n()
            )));
        }
        let init: Vec<HashSet<usize>> = pool
            .antecedents()
            .iter()
            .map(|a| a.init_bits.iter_ones().collect())
            .collect();
        let mut remaining: HashSet<usize> = (0..labels.len()).collect();
        let mut captures = Vec::with_capacity(ids.len());
        for &id in ids {
            let cap: HashSet<usize> = init[id].intersection(&remaining).copied().collect();
            remaining.retain(|i| !cap.contains(i));
            captures.push(cap);
        }
        let mut state = NaiveCaptureState {
            pool,
            positives: labels.iter_ones().collect(),
            init,
            ids: ids.to_vec(),
            captures,
            default_captures: remaining,
            counts: Vec::new(),
            default_counts: LabelCounts::default(),
        };
        state.counts = state.captures.iter().map(|c| state.counts_of(c)).collect();
        state.default_counts = state.counts_of(&state.default_captures);
        Ok(state)
    }

    fn ids(&self) -> &[AntecedentId] {
        &self.ids
    }

    fn rule_counts(&self) -> &[LabelCounts] {
        &self.counts
    }

    fn default_counts(&self) -> LabelCounts {
        self.default_counts
    }

    fn contains(&self, id: AntecedentId) -> bool {
        self.ids.contains(&id)
    }

    fn remove_rule(&mut self, k: usize) -> Result<Delta> {
        let m = self.ids.len();
        if k >= m {
            return Err(Error::PositionOutOfRange { pos: k, len: m });
        }
        let mut remaining = self.captures.remove(k);
        self.ids.remove(k);
        self.counts.remove(k);
        let mut touched = Vec::new();
        for j in k..m - 1 {
            let tmp: HashSet<usize> = self.init[self.ids[j]]
                .intersection(&remaining)
                .copied()
                .collect();
            if tmp.is_empty() {
                continue;
            }
            remaining.retain(|i| !tmp.contains(i));
            self.captures[j].extend(tmp);
            self.recount(j);
            touched.push(j);
        }
        let default_touched = !remaining.is_empty();
        self.default_captures.extend(remaining);
        if default_touched {
            self.recount_default();
        }
        Ok(Delta {
            kind: DeltaKind::Removed { pos: k },
            touched,
            default_touched,
        })
    }

    fn insert_rule(&mut self, k: usize, id: AntecedentId) -> Result<Delta> {
        let m = self.ids.len();
        let in_list: Vec<bool> = {
            let mut v = vec![false; self.pool.len()];
            for &i in &self.ids {
                v[i] = true;
            }
            v
        };
        check_insert(self.pool, &in_list, k, m, id)?;
        let mut captured: HashSet<usize> = HashSet::new();
        for cap in &self.captures[..k] {
            captured.extend(cap.iter().copied());
        }
        self.ids.insert(k, id);
        self.captures.insert(k, HashSet::new());
        self.counts.insert(k, LabelCounts::default());
        let mut touched = vec![k];
        for j in k..=m {
            let cap: HashSet<usize> = self.init[self.ids[j]].difference(&captured).copied().collect();
            captured.extend(cap.iter().copied());
            self.captures[j] = cap;
            if self.recount(j) && j > k {
                touched.push(j);
            }
        }
        self.default_captures = (0..self.pool.n()).filter(|i| !captured.contains(i)).collect();
        let default_touched = self.recount_default();
        Ok(Delta {
            kind: DeltaKind::Inserted { pos: k },
            touched,
            default_touched,
        })
    }

    fn swap_rules(&mut self, first: usize, second: usize) -> Result<Delta> {
        check_swap(first, second, self.ids.len())?;
        let mut captured: HashSet<usize> = HashSet::new();
        for cap in &self.captures[first..=second] {
            captured.extend(cap.iter().copied());
        }
        self.ids.swap(first, second);
        let mut touched = Vec::new();
        for t in first..=second {
            let cap: HashSet<usize> = captured
                .intersection(&self.init[self.ids[t]])
                .copied()
                .collect();
            captured.retain(|i| !cap.contains(i));
            self.captures[t] = cap;
            if self.recount(t) {
                touched.push(t);
            }
        }
        Ok(Delta {
            kind: DeltaKind::Swapped { first, second },
            touched,
            default_touched: false,
        })
    }
}
