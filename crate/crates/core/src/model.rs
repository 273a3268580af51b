//! A learned rule list as a probabilistic classifier.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bitvec::BitVector;
use crate::capture::{CaptureEngine, CaptureState};
use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};
use crate::miner::{AntecedentId, RulePool};
use crate::posterior::{Hyperparams, LabelCounts, PosteriorValue};
use crate::search::SearchOutcome;

/// Posterior-mean estimate `(N₁+α₁)/(N₀+N₁+α₀+α₁)` for each count pair.
pub fn fit_thetas(counts: &[LabelCounts], hp: &Hyperparams) -> Vec<f64> {
    counts
        .iter()
        .map(|c| (c.n1 as f64 + hp.alpha1) / (c.total() as f64 + hp.alpha0 + hp.alpha1))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub literals: Vec<String>,
    pub theta: f64,
    /// Training rows captured, by label.
    pub counts: LabelCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub chains: usize,
    pub iterations_per_chain: usize,
    pub seed: u64,
    pub total_steps: usize,
    pub acceptance_rate: f64,
    pub screened_restarts: usize,
    pub max_list_length: usize,
    pub pool_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub rules: Vec<Rule>,
    pub default_theta: f64,
    pub default_counts: LabelCounts,
    pub hyperparams: Hyperparams,
    pub posterior: PosteriorValue,
    pub search: SearchSummary,
    /// Not serialized, so that seeded runs produce identical model files.
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl TrainedModel {
    /// Builds the classifier for list `ids`, estimating each θ from the
    /// training rows it captures.
    pub fn from_list(
        ids: &[AntecedentId],
        pool: &RulePool,
        labels: &BitVector,
        hp: &Hyperparams,
        posterior: PosteriorValue,
        search: SearchSummary,
    ) -> Result<Self> {
        let state = CaptureState::build(pool, labels, ids)?;
        let counts = state.all_counts();
        let thetas = fit_thetas(&counts, hp);
        let rules = ids
            .iter()
            .zip(&counts)
            .zip(&thetas)
            .map(|((&id, &c), &theta)| Rule {
                literals: pool.literal_names(id),
                theta,
                counts: c,
            })
            .collect();
        Ok(TrainedModel {
            rules,
            default_theta: thetas[ids.len()],
            default_counts: counts[ids.len()],
            hyperparams: *hp,
            posterior,
            search,
            wall_seconds: 0.0,
        })
    }

    pub fn from_outcome(
        outcome: &SearchOutcome,
        pool: &RulePool,
        labels: &BitVector,
        hp: &Hyperparams,
        seed: u64,
    ) -> Result<Self> {
        let d = &outcome.diagnostics;
        let summary = SearchSummary {
            chains: d.chains,
            iterations_per_chain: d.iterations_per_chain,
            seed,
            total_steps: d.total_steps,
            acceptance_rate: d.acceptance_rate,
            screened_restarts: d.screened_restarts,
            max_list_length: d.max_list_length,
            pool_size: pool.len(),
        };
        let mut model = TrainedModel::from_list(&outcome.best_ids, pool, labels, hp, outcome.best_value, summary)?;
        model.wall_seconds = d.wall_seconds;
        Ok(model)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Every feature name the rules mention, in first-use order.
    pub fn referenced_features(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for r in &self.rules {
            for l in &r.literals {
                if !seen.contains(&l.as_str()) {
                    seen.push(l.as_str());
                }
            }
        }
        seen
    }

    /// θ of the first rule the observation satisfies, with its 1-based
    /// position (0 for the default rule).
    pub fn predict_with_index(&self, obs: &HashMap<&str, bool>) -> Result<(f64, usize)> {
        for f in self.referenced_features() {
            if !obs.contains_key(f) {
                return Err(Error::MissingFeature(f.to_string()));
            }
        }
        for (j, r) in self.rules.iter().enumerate() {
            if r.literals.iter().all(|l| obs[l.as_str()]) {
                return Ok((r.theta, j + 1));
            }
        }
        Ok((self.default_theta, 0))
    }

    pub fn predict(&self, obs: &HashMap<&str, bool>) -> Result<f64> {
        self.predict_with_index(obs).map(|(p, _)| p)
    }

    /// Rule index (1-based, 0 = default) capturing each row of `data`.
    pub fn assign(&self, data: &BinaryDataset) -> Result<Vec<usize>> {
        let index = data.feature_index();
        let mut unassigned = BitVector::ones(data.n());
        let mut out = vec![0; data.n()];
        for (j, r) in self.rules.iter().enumerate() {
            let mut bits = unassigned.clone();
            for l in &r.literals {
                let f = *index
                    .get(l.as_str())
                    .ok_or_else(|| Error::MissingFeature(l.clone()))?;
                bits.and_assign(data.feature_bits(f));
            }
            for i in bits.iter_ones() {
                out[i] = j + 1;
            }
            unassigned.and_not_assign(&bits);
        }
        Ok(out)
    }

    /// `(probability, rule index)` for each row of `data`.
    pub fn predict_dataset(&self, data: &BinaryDataset) -> Result<Vec<(f64, usize)>> {
        Ok(self
            .assign(data)?
            .into_iter()
            .map(|j| (self.theta_of(j), j))
            .collect())
    }

    /// θ for a 1-based rule index, 0 meaning the default rule.
    pub fn theta_of(&self, index: usize) -> f64 {
        if index == 0 {
            self.default_theta
        } else {
            self.rules[index - 1].theta
        }
    }
}

/// Three significant figures, as in `0.999` or `0.0123`.
pub fn format_sig3(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let digits = 2 - x.abs().log10().floor() as i32;
    if digits <= 0 {
        format!("{x:.0}")
    } else {
        format!("{x:.*}", digits as usize)
    }
}

impl fmt::Display for TrainedModel {
    /// `if (a & b) then probability of positive = 0.9`, then `else if`
    /// lines, then the default.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (j, r) in self.rules.iter().enumerate() {
            let kw = if j == 0 { "if" } else { "else if" };
            writeln!(
                f,
                "{kw} ({}) then probability of positive = {}",
                r.literals.join(" & "),
                format_sig3(r.theta)
            )?;
        }
        let kw = if self.rules.is_empty() { "always" } else { "else" };
        write!(
            f,
            "{kw} (default) probability of positive = {}",
            format_sig3(self.default_theta)
        )
    }
}
