//! A cap on the length of any maximum-posterior list, and an upper bound on
//! the posterior of every list that starts with a given prefix.

use crate::error::{Error, Result};
use crate::posterior::{ln_gamma, rule_log_likelihood, Hyperparams, LabelCounts, PriorModel};

/// Largest feature count for which the full b-vector is materialized.
pub const MAX_MATERIALIZED_P: usize = 24;

/// Largest feature count the lazy sequence supports (binomials fit in `u64`).
pub const MAX_LAZY_P: usize = 64;

fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

/// Worst-case inventory sequence for `P` features: for each `c` in
/// `0..=P/2`, a countdown from `C(P,c)` to 1, then (when `2c != P`) a
/// countdown from `C(P,P-c)` to 1.
#[derive(Debug, Clone)]
pub struct BSequence {
    p: usize,
    c: usize,
    mirrored: bool,
    next: u64,
}

impl BSequence {
    pub fn new(p: usize) -> Result<Self> {
        if p == 0 || p > MAX_LAZY_P {
            return Err(Error::InvalidParameter(format!(
                "feature count must lie in 1..={MAX_LAZY_P}, got {p}"
            )));
        }
        Ok(BSequence {
            p,
            c: 0,
            mirrored: false,
            next: 1,
        })
    }
}

impl Iterator for BSequence {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        loop {
            if self.next > 0 {
                let v = self.next;
                self.next -= 1;
                return Some(v);
            }
            if !self.mirrored && 2 * self.c != self.p {
                self.mirrored = true;
                self.next = binomial(self.p, self.p - self.c);
                continue;
            }
            self.c += 1;
            if self.c > self.p / 2 {
                return None;
            }
            self.mirrored = false;
            self.next = binomial(self.p, self.c);
        }
    }
}

/// The full b-vector (length `2^P`) for `1 <= P <= 24`.
pub fn build_b_vector(p: usize) -> Result<Vec<u64>> {
    if p == 0 || p > MAX_MATERIALIZED_P {
        return Err(Error::InvalidParameter(format!(
            "feature count must lie in 1..={MAX_MATERIALIZED_P}, got {p}"
        )));
    }
    Ok(BSequence::new(p)?.collect())
}

/// `ln[Γ(N₋+α₀)Γ(N₊+α₁)/Γ(N+α₀+α₁)]`: the likelihood of the empty list.
fn log_gamma_ratio(n_pos: usize, n_neg: usize, hp: &Hyperparams) -> f64 {
    rule_log_likelihood(LabelCounts::new(n_neg, n_pos), hp.alpha0, hp.alpha1)
}

/// Largest `m'` in `1..=cap` with `λ^{m'}/m'! ≥ ratio · Π_{j≤m'} factors_j`,
/// or 0 when no `m'` qualifies.
fn largest_admissible(
    factors: impl Iterator<Item = u64>,
    cap: u64,
    log_ratio: f64,
    lambda: f64,
) -> usize {
    let ln_l = lambda.ln();
    let mut log_prod = 0.0;
    let mut best = 0;
    for (i, b) in factors.enumerate() {
        let m = (i + 1) as u64;
        if m > cap {
            break;
        }
        log_prod += (b as f64).ln();
        let lhs = m as f64 * ln_l - ln_gamma(m as f64 + 1.0);
        let rhs = log_ratio + log_prod;
        if lhs >= rhs - 1e-12 * rhs.abs().max(1.0) {
            best = m as usize;
        } else if m as f64 >= lambda {
            // Past the mode the left side only falls and the right side never does.
            break;
        }
    }
    best
}

/// Length cap on any maximum-posterior list over `p` binary features.
pub fn compute_m_max(p: usize, n_pos: usize, n_neg: usize, hp: &Hyperparams) -> Result<usize> {
    let cap = if p >= 64 { u64::MAX } else { (1u64 << p) - 1 };
    // b_0 belongs to the empty conjunction and is not a choosable rule.
    let factors = BSequence::new(p)?.skip(1);
    Ok(largest_admissible(
        factors,
        cap,
        log_gamma_ratio(n_pos, n_neg, hp),
        hp.lambda,
    ))
}

/// The same cap with the pool's own inventories in place of the binomial
/// worst case: inventories are sorted ascending and counted down, which is
/// the smallest product any sequence of choices from the pool can reach.
pub fn compute_m_max_for_pool(
    inventory: &[usize],
    n_pos: usize,
    n_neg: usize,
    hp: &Hyperparams,
) -> usize {
    let mut sizes: Vec<u64> = inventory.iter().filter(|&&q| q > 0).map(|&q| q as u64).collect();
    sizes.sort_unstable();
    let total: u64 = sizes.iter().sum();
    let factors = sizes.into_iter().flat_map(|q| (1..=q).rev());
    largest_admissible(factors, total, log_gamma_ratio(n_pos, n_neg, hp), hp.lambda)
}

/// `log Υ` for a prefix with the given per-rule counts and cardinalities.
/// `totals` holds `(N₋, N₊)` over the whole training set.
pub fn upsilon(
    prefix_counts: &[LabelCounts],
    prefix_cards: &[usize],
    totals: LabelCounts,
    prior: &PriorModel,
    hp: &Hyperparams,
) -> Result<f64> {
    if hp.alpha0 != 1.0 || hp.alpha1 != 1.0 {
        return Err(Error::AlphaUnsupported {
            alpha0: hp.alpha0,
            alpha1: hp.alpha1,
        });
    }
    if prefix_counts.len() != prefix_cards.len() {
        return Err(Error::InvalidParameter(
            "prefix counts and cardinalities differ in length".into(),
        ));
    }
    let p = prefix_cards.len();
    if p > prior.pool_size() {
        return Err(Error::ListTooLong {
            len: p,
            pool: prior.pool_size(),
        });
    }
    // Most probable admissible length: the Poisson mode ⌊λ⌋ unless the prefix
    // is already longer, and never beyond the pool.
    let mode = (hp.lambda.floor() as usize).max(p).min(prior.pool_size());
    let mut total = prior.log_length_prior(mode);
    total += prior.log_cardinality_terms(prefix_cards.iter().copied())?;
    let (mut used0, mut used1) = (0usize, 0usize);
    for &c in prefix_counts {
        total += rule_log_likelihood(c, 1.0, 1.0);
        used0 += c.n0;
        used1 += c.n1;
    }
    if used0 > totals.n0 || used1 > totals.n1 {
        return Err(Error::InvalidParameter(
            "prefix captures more rows than the data holds".into(),
        ));
    }
    total -= ((1 + totals.n0 - used0) as f64).ln();
    total -= ((1 + totals.n1 - used1) as f64).ln();
    Ok(total)
}

/// True when no list starting with the prefix can beat `v_star`.
pub fn prefix_excluded(log_upsilon: f64, v_star: f64) -> bool {
    log_upsilon < v_star
}
