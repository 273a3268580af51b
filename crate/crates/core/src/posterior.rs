//! Log prior, log likelihood and log posterior of a rule list.

use serde::{Deserialize, Serialize};
use statrs::function::gamma;

use crate::capture::{CaptureEngine, Delta, DeltaKind};
use crate::error::{Error, Result};
use crate::miner::{AntecedentId, RulePool};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Expected list length.
    pub lambda: f64,
    /// Expected antecedent cardinality.
    pub eta: f64,
    /// Beta pseudo-count for label 0.
    pub alpha0: f64,
    /// Beta pseudo-count for label 1.
    pub alpha1: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            lambda: 5.0,
            eta: 1.0,
            alpha0: 1.0,
            alpha1: 1.0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda", self.lambda),
            ("eta", self.eta),
            ("alpha0", self.alpha0),
            ("alpha1", self.alpha1),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// `(N_{j,0}, N_{j,1})` for one rule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelCounts {
    pub n0: usize,
    pub n1: usize,
}

impl LabelCounts {
    pub fn new(n0: usize, n1: usize) -> Self {
        LabelCounts { n0, n1 }
    }

    pub fn total(&self) -> usize {
        self.n0 + self.n1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorValue {
    pub log_prior: f64,
    pub log_likelihood: f64,
    pub log_posterior: f64,
}

impl PosteriorValue {
    pub fn new(log_prior: f64, log_likelihood: f64) -> Self {
        PosteriorValue {
            log_prior,
            log_likelihood,
            log_posterior: log_prior + log_likelihood,
        }
    }
}

/// `ln Γ(x)`, exact at 1 and 2 where the series carries rounding error, so
/// that an empty rule at α = (1, 1) contributes exactly zero.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    if x == 1.0 || x == 2.0 {
        0.0
    } else {
        gamma::ln_gamma(x)
    }
}

/// Beta-Binomial marginal likelihood of one rule's captured labels.
pub fn rule_log_likelihood(c: LabelCounts, alpha0: f64, alpha1: f64) -> f64 {
    ln_gamma(c.n0 as f64 + alpha0) + ln_gamma(c.n1 as f64 + alpha1)
        - ln_gamma(c.total() as f64 + alpha0 + alpha1)
}

/// Sum of per-rule terms over all rules including the default.
pub fn log_likelihood(counts: &[LabelCounts], hp: &Hyperparams) -> f64 {
    counts
        .iter()
        .map(|&c| rule_log_likelihood(c, hp.alpha0, hp.alpha1))
        .sum()
}

fn log_sum_exp(xs: impl Iterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.collect();
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Prior over rule lists for one pool, with its normalizers precomputed.
#[derive(Debug, Clone)]
pub struct PriorModel {
    lambda: f64,
    pool_size: usize,
    inventory: Vec<usize>,
    log_length_norm: f64,
    /// `c ln η − ln c!` per cardinality.
    log_card_weight: Vec<f64>,
}

impl PriorModel {
    pub fn new(pool: &RulePool, hp: &Hyperparams) -> Self {
        PriorModel::from_inventory(pool.inventory(), hp)
    }

    /// `inventory[c]` = number of antecedents of cardinality `c`.
    pub fn from_inventory(inventory: Vec<usize>, hp: &Hyperparams) -> Self {
        let pool_size = inventory.iter().sum();
        let ln_l = hp.lambda.ln();
        let log_length_norm =
            log_sum_exp((0..=pool_size).map(|j| j as f64 * ln_l - ln_gamma(j as f64 + 1.0)));
        let ln_e = hp.eta.ln();
        let log_card_weight = (0..inventory.len())
            .map(|c| c as f64 * ln_e - ln_gamma(c as f64 + 1.0))
            .collect();
        PriorModel {
            lambda: hp.lambda,
            pool_size,
            inventory,
            log_length_norm,
            log_card_weight,
        }
    }

    pub fn pool_size(&self) -> usize {
        self.pool_size
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn inventory(&self) -> &[usize] {
        &self.inventory
    }

    /// `ln[(λ^m/m!) / Σ_{j≤|A|} λ^j/j!]`.
    pub fn log_length_prior(&self, m: usize) -> f64 {
        m as f64 * self.lambda.ln() - ln_gamma(m as f64 + 1.0) - self.log_length_norm
    }

    /// Cardinality and uniform-choice terms for a sequence of rule sizes:
    /// `Σ_j ln p(c_j | c_<j) − ln |Q_{c_j}|`, with inventories depleted as
    /// the list is walked.
    pub fn log_cardinality_terms(&self, cards: impl IntoIterator<Item = usize>) -> Result<f64> {
        let mut remaining = self.inventory.clone();
        let mut total = 0.0;
        for c in cards {
            if remaining.get(c).copied().unwrap_or(0) == 0 {
                return Err(Error::CardinalityExhausted { cardinality: c });
            }
            let norm = log_sum_exp(
                remaining
                    .iter()
                    .enumerate()
                    .filter(|&(_, &q)| q > 0)
                    .map(|(k, _)| self.log_card_weight[k]),
            );
            total += self.log_card_weight[c] - norm - (remaining[c] as f64).ln();
            remaining[c] -= 1;
        }
        Ok(total)
    }

    pub fn log_prior(&self, cards: &[usize]) -> Result<f64> {
        if cards.len() > self.pool_size {
            return Err(Error::ListTooLong {
                len: cards.len(),
                pool: self.pool_size,
            });
        }
        Ok(self.log_length_prior(cards.len()) + self.log_cardinality_terms(cards.iter().copied())?)
    }
}

/// Log prior of the list `ids` drawn from `pool`.
pub fn log_prior(ids: &[AntecedentId], pool: &RulePool, hp: &Hyperparams) -> Result<f64> {
    for &id in ids {
        if id >= pool.len() {
            return Err(Error::UnknownId(id));
        }
    }
    let cards: Vec<usize> = ids.iter().map(|&id| pool.cardinality(id)).collect();
    PriorModel::new(pool, hp).log_prior(&cards)
}

fn cards_of(ids: &[AntecedentId], pool: &RulePool) -> Vec<usize> {
    ids.iter().map(|&id| pool.cardinality(id)).collect()
}

/// Full evaluation from the engine's current counts.
pub fn log_posterior<'a, E: CaptureEngine<'a>>(
    state: &E,
    pool: &RulePool,
    prior: &PriorModel,
    hp: &Hyperparams,
) -> Result<PosteriorValue> {
    let lp = prior.log_prior(&cards_of(state.ids(), pool))?;
    let ll = log_likelihood(&state.all_counts(), hp);
    Ok(PosteriorValue::new(lp, ll))
}

/// Posterior kept in step with a capture engine: per-rule likelihood terms
/// are cached and only the positions named by a [`Delta`] are recomputed.
#[derive(Debug, Clone)]
pub struct IncrementalPosterior {
    hp: Hyperparams,
    rule_terms: Vec<f64>,
    default_term: f64,
    value: PosteriorValue,
}

impl IncrementalPosterior {
    pub fn new<'a, E: CaptureEngine<'a>>(
        state: &E,
        pool: &RulePool,
        prior: &PriorModel,
        hp: &Hyperparams,
    ) -> Result<Self> {
        let rule_terms = state
            .rule_counts()
            .iter()
            .map(|&c| rule_log_likelihood(c, hp.alpha0, hp.alpha1))
            .collect();
        let default_term = rule_log_likelihood(state.default_counts(), hp.alpha0, hp.alpha1);
        let mut inc = IncrementalPosterior {
            hp: *hp,
            rule_terms,
            default_term,
            value: PosteriorValue::new(0.0, 0.0),
        };
        inc.value = PosteriorValue::new(
            prior.log_prior(&cards_of(state.ids(), pool))?,
            inc.likelihood_sum(),
        );
        Ok(inc)
    }

    pub fn value(&self) -> PosteriorValue {
        self.value
    }

    fn likelihood_sum(&self) -> f64 {
        self.rule_terms.iter().sum::<f64>() + self.default_term
    }

    fn term(&self, c: LabelCounts) -> f64 {
        rule_log_likelihood(c, self.hp.alpha0, self.hp.alpha1)
    }

    /// Brings the cached terms in line with `state` after the mutation
    /// described by `delta`.
    pub fn apply<'a, E: CaptureEngine<'a>>(
        &mut self,
        delta: &Delta,
        state: &E,
        pool: &RulePool,
        prior: &PriorModel,
    ) -> Result<PosteriorValue> {
        match delta.kind {
            DeltaKind::Removed { pos } => {
                self.rule_terms.remove(pos);
            }
            DeltaKind::Inserted { pos } => self.rule_terms.insert(pos, 0.0),
            DeltaKind::Swapped { .. } => {}
        }
        if self.rule_terms.len() != state.len() {
            return Err(Error::InternalInconsistency(format!(
                "posterior cache has {} rules, engine has {}",
                self.rule_terms.len(),
                state.len()
            )));
        }
        let counts = state.rule_counts();
        for &j in &delta.touched {
            self.rule_terms[j] = self.term(counts[j]);
        }
        if delta.default_touched {
            self.default_term = self.term(state.default_counts());
        }
        let lp = match delta.kind {
            // A swap of equal cardinalities leaves every prior term unchanged.
            DeltaKind::Swapped { first, second }
                if pool.cardinality(state.ids()[first]) == pool.cardinality(state.ids()[second]) =>
            {
                self.value.log_prior
            }
            _ => prior.log_prior(&cards_of(state.ids(), pool))?,
        };
        self.value = PosteriorValue::new(lp, self.likelihood_sum());
        Ok(self.value)
    }
}
