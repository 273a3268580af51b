//! Level-wise enumeration of frequent conjunctions of binary features.

use std::collections::HashSet;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::bitvec::BitVector;
use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};

pub type AntecedentId = usize;

/// Support levels tried by [`tune_support`].
pub const SUPPORT_GRID: [f64; 19] = [
    0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80,
    0.85, 0.90, 0.95,
];

#[derive(Debug, Clone)]
pub struct Antecedent {
    pub id: AntecedentId,
    /// Feature indices, strictly increasing.
    pub literals: Vec<usize>,
    pub init_bits: BitVector,
    pub support: usize,
}

impl Antecedent {
    pub fn cardinality(&self) -> usize {
        self.literals.len()
    }
}

/// The mined antecedents with per-cardinality inventories.
#[derive(Debug, Clone)]
pub struct RulePool {
    n: usize,
    feature_names: Vec<String>,
    antecedents: Vec<Antecedent>,
    by_cardinality: Vec<Vec<AntecedentId>>,
}

impl RulePool {
    /// Builds a pool from `(literals, bits)` pairs. Entries are sorted by
    /// cardinality then literals and given dense ids in that order.
    pub fn from_parts(
        n: usize,
        feature_names: Vec<String>,
        items: Vec<(Vec<usize>, BitVector)>,
    ) -> Result<Self> {
        let mut items = items;
        for (lits, bits) in &mut items {
            lits.sort_unstable();
            if lits.is_empty() {
                return Err(Error::InvalidParameter("antecedents need at least one literal".into()));
            }
            if lits.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidParameter(format!("repeated literal in {lits:?}")));
            }
            if let Some(&f) = lits.iter().find(|&&f| f >= feature_names.len()) {
                return Err(Error::InvalidParameter(format!("literal {f} has no feature name")));
            }
            if bits.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "antecedent {lits:?} has {} bits, expected {n}",
                    bits.len()
                )));
            }
        }
        items.sort_by(|a, b| (a.0.len(), &a.0).cmp(&(b.0.len(), &b.0)));
        if items.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter("antecedent listed twice".into()));
        }

        let max_card = items.last().map_or(0, |(l, _)| l.len());
        let mut by_cardinality = vec![Vec::new(); max_card + 1];
        let antecedents = items
            .into_iter()
            .enumerate()
            .map(|(id, (literals, init_bits))| {
                by_cardinality[literals.len()].push(id);
                Antecedent {
                    id,
                    support: init_bits.count_ones(),
                    literals,
                    init_bits,
                }
            })
            .collect();
        Ok(RulePool {
            n,
            feature_names,
            antecedents,
            by_cardinality,
        })
    }

    pub fn len(&self) -> usize {
        self.antecedents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.antecedents.is_empty()
    }

    /// Rows covered by each antecedent's bit vector.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, id: AntecedentId) -> Option<&Antecedent> {
        self.antecedents.get(id)
    }

    pub fn antecedent(&self, id: AntecedentId) -> &Antecedent {
        &self.antecedents[id]
    }

    pub fn antecedents(&self) -> &[Antecedent] {
        &self.antecedents
    }

    pub fn init_bits(&self, id: AntecedentId) -> &BitVector {
        &self.antecedents[id].init_bits
    }

    pub fn cardinality(&self, id: AntecedentId) -> usize {
        self.antecedents[id].literals.len()
    }

    pub fn max_cardinality(&self) -> usize {
        self.by_cardinality.len().saturating_sub(1)
    }

    /// `|Q_c|` for an empty list, indexed by cardinality.
    pub fn inventory(&self) -> Vec<usize> {
        self.by_cardinality.iter().map(Vec::len).collect()
    }

    pub fn ids_of_cardinality(&self, c: usize) -> &[AntecedentId] {
        self.by_cardinality.get(c).map_or(&[], Vec::as_slice)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn literal_names(&self, id: AntecedentId) -> Vec<String> {
        self.antecedents[id]
            .literals
            .iter()
            .map(|&f| self.feature_names[f].clone())
            .collect()
    }

    /// Literal names joined with `&`.
    pub fn describe(&self, id: AntecedentId) -> String {
        self.literal_names(id).join("&")
    }

    /// Finds the antecedent made of exactly these feature names.
    pub fn find_by_names(&self, names: &[&str]) -> Option<AntecedentId> {
        let mut lits = Vec::with_capacity(names.len());
        for name in names {
            lits.push(self.feature_names.iter().position(|f| f == name)?);
        }
        lits.sort_unstable();
        self.ids_of_cardinality(lits.len())
            .iter()
            .copied()
            .find(|&id| self.antecedents[id].literals == lits)
    }

    /// One antecedent per line: `id<TAB>lit1&lit2<TAB>support`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for a in &self.antecedents {
            let _ = writeln!(out, "{}\t{}\t{}", a.id, self.describe(a.id), a.support);
        }
        out
    }

    /// The sub-pool of antecedents meeting a higher support threshold.
    fn filtered(&self, threshold: usize) -> Result<RulePool> {
        let items = self
            .antecedents
            .iter()
            .filter(|a| a.support >= threshold)
            .map(|a| (a.literals.clone(), a.init_bits.clone()))
            .collect();
        RulePool::from_parts(self.n, self.feature_names.clone(), items)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MineOptions {
    pub min_support: f64,
    pub min_card: usize,
    pub max_card: usize,
}

impl Default for MineOptions {
    fn default() -> Self {
        MineOptions {
            min_support: 0.10,
            min_card: 1,
            max_card: 2,
        }
    }
}

pub fn support_threshold(min_support: f64, n: usize) -> usize {
    ((min_support * n as f64) - 1e-9).ceil().max(0.0) as usize
}

fn check_cards(min_card: usize, max_card: usize) -> Result<()> {
    if min_card < 1 || min_card > max_card {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= min_card <= max_card, got {min_card} and {max_card}"
        )));
    }
    Ok(())
}

/// All conjunctions of `min_card..=max_card` literals, at most one per source
/// column, whose support reaches `ceil(min_support * n)`.
pub fn mine(data: &BinaryDataset, opts: &MineOptions) -> Result<RulePool> {
    if !(opts.min_support > 0.0 && opts.min_support < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "min_support must lie in (0, 1), got {}",
            opts.min_support
        )));
    }
    check_cards(opts.min_card, opts.max_card)?;
    let n = data.n();
    let threshold = support_threshold(opts.min_support, n).max(1);

    let mut level: Vec<(Vec<usize>, BitVector)> = (0..data.n_features())
        .filter(|&f| data.feature_bits(f).count_ones() >= threshold)
        .map(|f| (vec![f], data.feature_bits(f).clone()))
        .collect();
    let mut kept = Vec::new();
    let mut card = 1;
    loop {
        if card >= opts.min_card {
            kept.extend(level.iter().cloned());
        }
        if card == opts.max_card || level.is_empty() {
            break;
        }
        level = extend_level(data, &level, threshold);
        card += 1;
    }
    log::debug!(
        "mined {} antecedents at support >= {threshold} of {n} rows",
        kept.len()
    );
    if kept.is_empty() {
        return Err(Error::EmptyPool {
            min_support: opts.min_support,
            threshold,
            n,
        });
    }
    RulePool::from_parts(n, data.feature_names().to_vec(), kept)
}

/// Joins each frequent k-set with a later feature from an unused column,
/// keeping candidates whose k-subsets are all frequent and whose support
/// clears the threshold.
fn extend_level(
    data: &BinaryDataset,
    level: &[(Vec<usize>, BitVector)],
    threshold: usize,
) -> Vec<(Vec<usize>, BitVector)> {
    let frequent: HashSet<&[usize]> = level.iter().map(|(l, _)| l.as_slice()).collect();
    let singles: Vec<usize> = {
        let mut s: Vec<usize> = level.iter().flat_map(|(l, _)| l.iter().copied()).collect();
        s.sort_unstable();
        s.dedup();
        s
    };
    let mut next: Vec<(Vec<usize>, BitVector)> = level
        .par_iter()
        .flat_map_iter(|(lits, bits)| {
            let last = *lits.last().expect("non-empty");
            let used: Vec<usize> = lits.iter().map(|&f| data.feature_source(f)).collect();
            let frequent = &frequent;
            singles
                .iter()
                .copied()
                .filter(move |&f| f > last && !used.contains(&data.feature_source(f)))
                .filter_map(move |f| {
                    let mut cand = lits.clone();
                    cand.push(f);
                    let all_subsets_frequent = (0..cand.len() - 1).all(|skip| {
                        let sub: Vec<usize> = cand
                            .iter()
                            .enumerate()
                            .filter(|&(i, _)| i != skip)
                            .map(|(_, &x)| x)
                            .collect();
                        frequent.contains(sub.as_slice())
                    });
                    if !all_subsets_frequent || bits.count_and(data.feature_bits(f)) < threshold {
                        return None;
                    }
                    Some((cand, bits.and(data.feature_bits(f))))
                })
        })
        .collect();
    next.sort_by(|a, b| a.0.cmp(&b.0));
    next
}

/// Picks the grid support whose pool size is closest to `target`
/// (ties go to the higher support).
pub fn tune_support(
    data: &BinaryDataset,
    target: usize,
    min_card: usize,
    max_card: usize,
) -> Result<(f64, RulePool)> {
    if target < 1 {
        return Err(Error::InvalidParameter("target rule count must be at least 1".into()));
    }
    check_cards(min_card, max_card)?;
    // Pools at higher supports are subsets of the lowest-support pool.
    let base = mine(
        data,
        &MineOptions {
            min_support: SUPPORT_GRID[0],
            min_card,
            max_card,
        },
    )?;
    let mut best: Option<(usize, f64, usize)> = None;
    for &s in SUPPORT_GRID.iter() {
        let threshold = support_threshold(s, data.n()).max(1);
        let size = base
            .antecedents()
            .iter()
            .filter(|a| a.support >= threshold)
            .count();
        if size == 0 {
            continue;
        }
        let dist = size.abs_diff(target);
        log::debug!("support {s:.2}: {size} antecedents");
        if best.is_none_or(|(d, _, _)| dist <= d) {
            best = Some((dist, s, threshold));
        }
    }
    let (_, s, threshold) = best.expect("the lowest grid point is non-empty");
    Ok((s, base.filtered(threshold)?))
}
