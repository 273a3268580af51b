//! Shared generators and brute-force oracles for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rulelist::{AntecedentId, BitVector, CaptureEngine, CaptureState, LabelCounts, RulePool};

/// A random pool over `n` rows: `n_features` random feature columns and up
/// to `n_ants` distinct conjunctions of 1..=`max_card` of them.
pub fn random_pool(rng: &mut impl Rng, n: usize, n_features: usize, n_ants: usize, max_card: usize) -> RulePool {
    let features: Vec<BitVector> = (0..n_features)
        .map(|_| {
            let density = rng.random_range(0.2..0.8);
            BitVector::from_bools((0..n).map(|_| rng.random_bool(density)))
        })
        .collect();
    let names = (0..n_features).map(|f| format!("f{f}")).collect();
    let mut seen = BTreeSet::new();
    let mut items = Vec::new();
    let mut attempts = 0;
    while items.len() < n_ants && attempts < 50 * n_ants {
        attempts += 1;
        let card = rng.random_range(1..=max_card.min(n_features));
        let mut lits: Vec<usize> = (0..n_features).collect();
        lits.shuffle(rng);
        lits.truncate(card);
        lits.sort_unstable();
        if !seen.insert(lits.clone()) {
            continue;
        }
        let mut bits = BitVector::ones(n);
        for &f in &lits {
            bits.and_assign(&features[f]);
        }
        items.push((lits, bits));
    }
    RulePool::from_parts(n, names, items).expect("generated pool is valid")
}

pub fn random_labels(rng: &mut impl Rng, n: usize) -> BitVector {
    let p = rng.random_range(0.2..0.8);
    BitVector::from_bools((0..n).map(|_| rng.random_bool(p)))
}

/// Every conjunction of the `p` feature columns, as one pool.
pub fn full_pool(features: &[BitVector]) -> RulePool {
    let p = features.len();
    let n = features[0].len();
    let names = (0..p).map(|f| format!("f{f}")).collect();
    let items = (1u32..(1 << p))
        .map(|mask| {
            let lits: Vec<usize> = (0..p).filter(|&f| mask & (1 << f) != 0).collect();
            let mut bits = BitVector::ones(n);
            for &f in &lits {
                bits.and_assign(&features[f]);
            }
            (lits, bits)
        })
        .collect();
    RulePool::from_parts(n, names, items).unwrap()
}

/// Rows captured by each rule and by the default, found by scanning every
/// observation down the list until its first matching rule.
pub fn first_match(pool: &RulePool, ids: &[AntecedentId]) -> (Vec<Vec<usize>>, Vec<usize>) {
    let mut rules = vec![Vec::new(); ids.len()];
    let mut default = Vec::new();
    for row in 0..pool.n() {
        match ids.iter().position(|&id| pool.init_bits(id).get(row)) {
            Some(j) => rules[j].push(row),
            None => default.push(row),
        }
    }
    (rules, default)
}

pub fn counts_of(rows: &[usize], labels: &BitVector) -> LabelCounts {
    let n1 = rows.iter().filter(|&&r| labels.get(r)).count();
    LabelCounts::new(rows.len() - n1, n1)
}

/// Per-rule and default counts by first match, default last.
pub fn oracle_counts(pool: &RulePool, labels: &BitVector, ids: &[AntecedentId]) -> Vec<LabelCounts> {
    let (rules, default) = first_match(pool, ids);
    let mut out: Vec<LabelCounts> = rules.iter().map(|r| counts_of(r, labels)).collect();
    out.push(counts_of(&default, labels));
    out
}

/// Compares an updated engine with a fresh build and with the first-match
/// oracle. Returns a description of the first mismatch.
pub fn check_against_rebuild(state: &CaptureState, pool: &RulePool, labels: &BitVector) -> Result<(), String> {
    let fresh = CaptureState::build(pool, labels, state.ids()).map_err(|e| e.to_string())?;
    if state.captures() != fresh.captures() {
        return Err(format!("captures differ from rebuild for {:?}", state.ids()));
    }
    if state.default_captures() != fresh.default_captures() {
        return Err(format!("default differs from rebuild for {:?}", state.ids()));
    }
    if state.all_counts() != fresh.all_counts() {
        return Err(format!("counts differ from rebuild for {:?}", state.ids()));
    }
    let (rules, default) = first_match(pool, state.ids());
    for (j, rows) in rules.iter().enumerate() {
        if state.captures()[j].iter_ones().collect::<Vec<_>>() != *rows {
            return Err(format!("rule {j} differs from first match for {:?}", state.ids()));
        }
    }
    if state.default_captures().iter_ones().collect::<Vec<_>>() != default {
        return Err(format!("default differs from first match for {:?}", state.ids()));
    }
    if state.all_counts() != oracle_counts(pool, labels, state.ids()) {
        return Err(format!("counts differ from first match for {:?}", state.ids()));
    }
    Ok(())
}

/// A random legal remove, insert or swap on `state`.
pub fn random_mutation<'a, E: CaptureEngine<'a>>(rng: &mut impl Rng, state: &mut E, pool_len: usize) -> rulelist::Delta {
    let m = state.len();
    loop {
        match rng.random_range(0..3) {
            0 if m < pool_len => {
                let id = loop {
                    let id = rng.random_range(0..pool_len);
                    if !state.contains(id) {
                        break id;
                    }
                };
                let pos = rng.random_range(0..=m);
                return state.insert_rule(pos, id).unwrap();
            }
            1 if m >= 1 => return state.remove_rule(rng.random_range(0..m)).unwrap(),
            2 if m >= 2 => {
                let a = rng.random_range(0..m);
                let mut b = rng.random_range(0..m - 1);
                if b >= a {
                    b += 1;
                }
                return state.swap_rules(a.min(b), a.max(b)).unwrap();
            }
            _ => continue,
        }
    }
}

/// Every ordered list of distinct ids from `0..len`, the empty list included.
pub fn all_lists(len: usize) -> Vec<Vec<AntecedentId>> {
    fn extend(len: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        out.push(cur.clone());
        for id in 0..len {
            if !used[id] {
                used[id] = true;
                cur.push(id);
                extend(len, cur, used, out);
                cur.pop();
                used[id] = false;
            }
        }
    }
    let mut out = Vec::new();
    extend(len, &mut Vec::new(), &mut vec![false; len], &mut out);
    out
}

/// ln Γ(k + 1) for integer `k`, by summing logs.
pub fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// Beta-binomial rule likelihood at α = (1, 1) in exact integer form:
/// `N₀! N₁! / (N₀ + N₁ + 1)!`.
pub fn unit_alpha_rule_likelihood(c: LabelCounts) -> f64 {
    ln_factorial(c.n0) + ln_factorial(c.n1) - ln_factorial(c.n0 + c.n1 + 1)
}
