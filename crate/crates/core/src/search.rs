//! Multi-chain Metropolis-Hastings search over rule lists.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bitvec::BitVector;
use crate::bounds::{compute_m_max_for_pool, prefix_excluded, upsilon};
use crate::capture::{CaptureEngine, CaptureState};
use crate::error::{Error, Result};
use crate::miner::{AntecedentId, RulePool};
use crate::posterior::{log_posterior, Hyperparams, IncrementalPosterior, LabelCounts, PosteriorValue, PriorModel};

/// Draws of a first rule before a screened restart settles for the
/// candidate with the highest bound.
pub const MAX_SCREEN_RETRIES: usize = 1000;

/// How often (in steps) the incremental posterior is checked against a
/// full recomputation outside debug builds.
pub const CONSISTENCY_CHECK_EVERY: usize = 1000;

const CONSISTENCY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoveWeights {
    pub add: f64,
    pub remove: f64,
    pub swap: f64,
}

impl Default for MoveWeights {
    fn default() -> Self {
        MoveWeights {
            add: 1.0 / 3.0,
            remove: 1.0 / 3.0,
            swap: 1.0 / 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub chains: usize,
    pub iterations: usize,
    pub seed: u64,
    pub initial_length: usize,
    pub enforce_m_max: bool,
    pub prefix_screen: bool,
    pub weights: MoveWeights,
    /// Run chains one after another so screening sees a reproducible `v*`.
    pub deterministic: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            chains: 20,
            iterations: 5000,
            seed: 0,
            initial_length: 1,
            enforce_m_max: true,
            prefix_screen: true,
            weights: MoveWeights::default(),
            deterministic: false,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains < 1 {
            return Err(Error::InvalidParameter("chains must be at least 1".into()));
        }
        if self.iterations < 1 {
            return Err(Error::InvalidParameter("iterations must be at least 1".into()));
        }
        let w = self.weights;
        if [w.add, w.remove, w.swap].iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidParameter("move weights must be non-negative".into()));
        }
        if ((w.add + w.remove + w.swap) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter("move weights must sum to 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Add { pos: usize, id: AntecedentId },
    Remove { pos: usize },
    Swap { first: usize, second: usize },
}

/// Everything the chains share: data, pool, prior and the length cap.
#[derive(Debug)]
pub struct SearchContext<'a> {
    pub pool: &'a RulePool,
    pub labels: &'a BitVector,
    pub hp: Hyperparams,
    pub prior: PriorModel,
    /// `(N₋, N₊)`.
    pub totals: LabelCounts,
    /// Longest list a proposal may produce.
    pub max_len: usize,
    first_rule_bound: Option<Vec<f64>>,
}

impl<'a> SearchContext<'a> {
    pub fn new(
        pool: &'a RulePool,
        labels: &'a BitVector,
        hp: &Hyperparams,
        cfg: &SearchConfig,
    ) -> Result<Self> {
        hp.validate()?;
        if pool.is_empty() {
            return Err(Error::NoLegalMove);
        }
        if labels.len() != pool.n() {
            return Err(Error::InvalidParameter(format!(
                "labels have {} rows but the pool was mined on {}",
                labels.len(),
                pool.n()
            )));
        }
        let n_pos = labels.count_ones();
        let totals = LabelCounts::new(labels.len() - n_pos, n_pos);
        let prior = PriorModel::new(pool, hp);
        let max_len = if cfg.enforce_m_max {
            compute_m_max_for_pool(&pool.inventory(), n_pos, totals.n0, hp).min(pool.len())
        } else {
            pool.len()
        };
        let unit_alpha = hp.alpha0 == 1.0 && hp.alpha1 == 1.0;
        if cfg.prefix_screen && !unit_alpha {
            log::warn!("prefix screening needs alpha = (1, 1); disabled for this run");
        }
        let first_rule_bound = if cfg.prefix_screen && unit_alpha {
            let bounds = pool
                .antecedents()
                .par_iter()
                .map(|a| {
                    let n1 = a.init_bits.count_and(labels);
                    let counts = LabelCounts::new(a.support - n1, n1);
                    upsilon(&[counts], &[a.cardinality()], totals, &prior, hp)
                })
                .collect::<Result<Vec<f64>>>()?;
            Some(bounds)
        } else {
            None
        };
        Ok(SearchContext {
            pool,
            labels,
            hp: *hp,
            prior,
            totals,
            max_len,
            first_rule_bound,
        })
    }

    /// `log Υ` of the one-rule prefix `[id]`, when screening is active.
    pub fn first_rule_bound(&self, id: AntecedentId) -> Option<f64> {
        self.first_rule_bound.as_ref().map(|b| b[id])
    }

    /// Probabilities of (add, remove, swap) at list length `m`, after
    /// masking impossible kinds and renormalizing.
    pub fn kind_probs(&self, m: usize, w: &MoveWeights) -> [f64; 3] {
        let raw = [
            if m < self.max_len { w.add } else { 0.0 },
            if m >= 1 { w.remove } else { 0.0 },
            if m >= 2 { w.swap } else { 0.0 },
        ];
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return [0.0; 3];
        }
        raw.map(|x| x / total)
    }

    /// `ln[q(reverse) / q(forward)]` for a move taken at list length `m`.
    pub fn log_proposal_ratio(&self, mv: &Move, m: usize, w: &MoveWeights) -> f64 {
        let a = self.pool.len() as f64;
        match mv {
            Move::Add { .. } => {
                let p_rm_after = self.kind_probs(m + 1, w)[1];
                let p_add = self.kind_probs(m, w)[0];
                (p_rm_after * (a - m as f64) / p_add).ln()
            }
            Move::Remove { .. } => {
                let p_add_after = self.kind_probs(m - 1, w)[0];
                let p_rm = self.kind_probs(m, w)[1];
                (p_add_after / (p_rm * (a - m as f64 + 1.0))).ln()
            }
            Move::Swap { .. } => 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Improvement {
    pub chain: usize,
    pub iteration: usize,
    pub m: usize,
    pub log_prior: f64,
    pub log_likelihood: f64,
    pub log_posterior: f64,
}

#[derive(Debug, Clone)]
pub struct BestRecord {
    pub ids: Vec<AntecedentId>,
    pub value: PosteriorValue,
    pub chain: usize,
    pub iteration: usize,
}

impl BestRecord {
    /// Higher posterior wins; equal posteriors go to the earlier
    /// (chain, iteration).
    fn beats(&self, other: &BestRecord) -> bool {
        let (a, b) = (self.value.log_posterior, other.value.log_posterior);
        a > b || (a == b && (self.chain, self.iteration) < (other.chain, other.iteration))
    }
}

#[derive(Debug, Default)]
struct TrackerInner {
    best: Option<BestRecord>,
    improvements: Vec<Improvement>,
}

/// Best list seen by any chain. `v*` is readable without locking and never
/// decreases.
#[derive(Debug)]
pub struct BestTracker {
    v_star: AtomicU64,
    inner: Mutex<TrackerInner>,
}

impl Default for BestTracker {
    fn default() -> Self {
        BestTracker {
            v_star: AtomicU64::new(f64::NEG_INFINITY.to_bits()),
            inner: Mutex::new(TrackerInner::default()),
        }
    }
}

impl BestTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn v_star(&self) -> f64 {
        f64::from_bits(self.v_star.load(Ordering::Acquire))
    }

    /// Offers a visited list; returns true if it became the new best.
    pub fn offer(&self, value: PosteriorValue, ids: &[AntecedentId], chain: usize, iteration: usize) -> bool {
        if value.log_posterior < self.v_star() {
            return false;
        }
        let candidate = BestRecord {
            ids: ids.to_vec(),
            value,
            chain,
            iteration,
        };
        let mut inner = self.inner.lock().expect("tracker lock poisoned");
        if inner.best.as_ref().is_some_and(|b| !candidate.beats(b)) {
            return false;
        }
        inner.improvements.push(Improvement {
            chain,
            iteration,
            m: ids.len(),
            log_prior: value.log_prior,
            log_likelihood: value.log_likelihood,
            log_posterior: value.log_posterior,
        });
        self.v_star
            .store(value.log_posterior.to_bits(), Ordering::Release);
        inner.best = Some(candidate);
        true
    }

    pub fn best(&self) -> Option<BestRecord> {
        self.inner.lock().expect("tracker lock poisoned").best.clone()
    }

    pub fn improvements(&self) -> Vec<Improvement> {
        self.inner
            .lock()
            .expect("tracker lock poisoned")
            .improvements
            .clone()
    }
}

/// One chain's live list, its posterior and its random stream.
#[derive(Debug, Clone)]
pub struct ChainState<'a, E> {
    pub index: usize,
    pub capture: E,
    pub posterior: IncrementalPosterior,
    pub rng: ChaCha8Rng,
    pub best_ids: Vec<AntecedentId>,
    pub best_value: PosteriorValue,
    pub steps: usize,
    pub accepted: usize,
    pub screened: usize,
    _marker: std::marker::PhantomData<&'a ()>,
}

impl<'a, E: CaptureEngine<'a>> ChainState<'a, E> {
    /// A chain positioned at an explicit list.
    pub fn from_list(ctx: &SearchContext<'a>, ids: &[AntecedentId], index: usize, rng: ChaCha8Rng) -> Result<Self> {
        if ids.len() > ctx.pool.len() {
            return Err(Error::ListTooLong {
                len: ids.len(),
                pool: ctx.pool.len(),
            });
        }
        let capture = E::build(ctx.pool, ctx.labels, ids)?;
        let posterior = IncrementalPosterior::new(&capture, ctx.pool, &ctx.prior, &ctx.hp)?;
        let value = posterior.value();
        Ok(ChainState {
            index,
            capture,
            posterior,
            rng,
            best_ids: ids.to_vec(),
            best_value: value,
            steps: 0,
            accepted: 0,
            screened: 0,
            _marker: std::marker::PhantomData,
        })
    }

    pub fn value(&self) -> PosteriorValue {
        self.posterior.value()
    }

    pub fn ids(&self) -> &[AntecedentId] {
        self.capture.ids()
    }

    fn draw_unused(&mut self, pool_len: usize) -> AntecedentId {
        loop {
            let id = self.rng.random_range(0..pool_len);
            if !self.capture.contains(id) {
                return id;
            }
        }
    }
}

/// Draws a move for the chain's current list.
pub fn propose<'a, E: CaptureEngine<'a>>(
    chain: &mut ChainState<'a, E>,
    ctx: &SearchContext<'a>,
    cfg: &SearchConfig,
) -> Result<Move> {
    let m = chain.capture.len();
    let probs = ctx.kind_probs(m, &cfg.weights);
    if probs.iter().all(|&p| p == 0.0) {
        return Err(Error::NoLegalMove);
    }
    let u: f64 = chain.rng.random();
    let mut kind = if u < probs[0] {
        0
    } else if u < probs[0] + probs[1] {
        1
    } else {
        2
    };
    // Rounding can leave `u` past the last non-zero bucket.
    while probs[kind] == 0.0 {
        kind -= 1;
    }
    Ok(match kind {
        0 => {
            let id = chain.draw_unused(ctx.pool.len());
            let pos = chain.rng.random_range(0..=m);
            Move::Add { pos, id }
        }
        1 => Move::Remove {
            pos: chain.rng.random_range(0..m),
        },
        _ => {
            let first = chain.rng.random_range(0..m);
            let mut second = chain.rng.random_range(0..m - 1);
            if second >= first {
                second += 1;
            }
            Move::Swap {
                first: first.min(second),
                second: first.max(second),
            }
        }
    })
}

#[derive(Debug, Clone, Copy)]
pub struct StepOutcome {
    pub proposal: Move,
    /// `ln` of the MH acceptance ratio (before capping at 1).
    pub log_alpha: f64,
    pub accepted: bool,
}

fn apply_move<'a, E: CaptureEngine<'a>>(
    chain: &mut ChainState<'a, E>,
    ctx: &SearchContext<'a>,
    mv: Move,
) -> Result<PosteriorValue> {
    let delta = match mv {
        Move::Add { pos, id } => chain.capture.insert_rule(pos, id)?,
        Move::Remove { pos } => chain.capture.remove_rule(pos)?,
        Move::Swap { first, second } => chain.capture.swap_rules(first, second)?,
    };
    chain
        .posterior
        .apply(&delta, &chain.capture, ctx.pool, &ctx.prior)
}

fn check_consistency<'a, E: CaptureEngine<'a>>(chain: &ChainState<'a, E>, ctx: &SearchContext<'a>) -> Result<()> {
    let scratch = log_posterior(&chain.capture, ctx.pool, &ctx.prior, &ctx.hp)?;
    let inc = chain.value();
    if (scratch.log_posterior - inc.log_posterior).abs() > CONSISTENCY_TOLERANCE {
        return Err(Error::InternalInconsistency(format!(
            "chain {} step {}: incremental log posterior {} vs full {}",
            chain.index, chain.steps, inc.log_posterior, scratch.log_posterior
        )));
    }
    Ok(())
}

/// One Metropolis-Hastings step. A rejected move is undone by its inverse
/// capture operation.
pub fn mh_step<'a, E: CaptureEngine<'a>>(
    chain: &mut ChainState<'a, E>,
    ctx: &SearchContext<'a>,
    cfg: &SearchConfig,
    tracker: &BestTracker,
) -> Result<StepOutcome> {
    let m = chain.capture.len();
    let before = chain.value();
    let mv = propose(chain, ctx, cfg)?;
    let removed = match mv {
        Move::Remove { pos } => Some(chain.capture.ids()[pos]),
        _ => None,
    };
    let after = apply_move(chain, ctx, mv)?;
    let log_alpha =
        after.log_posterior - before.log_posterior + ctx.log_proposal_ratio(&mv, m, &cfg.weights);
    let accepted = log_alpha >= 0.0 || chain.rng.random::<f64>().ln() < log_alpha;
    chain.steps += 1;
    if accepted {
        chain.accepted += 1;
        if after.log_posterior > chain.best_value.log_posterior {
            chain.best_value = after;
            chain.best_ids = chain.capture.ids().to_vec();
        }
        if after.log_posterior >= tracker.v_star() {
            tracker.offer(after, chain.capture.ids(), chain.index, chain.steps);
        }
    } else {
        let inverse = match mv {
            Move::Add { pos, .. } => Move::Remove { pos },
            Move::Remove { pos } => Move::Add {
                pos,
                id: removed.expect("removed id recorded"),
            },
            swap @ Move::Swap { .. } => swap,
        };
        apply_move(chain, ctx, inverse)?;
    }
    if cfg!(debug_assertions) || chain.steps.is_multiple_of(CONSISTENCY_CHECK_EVERY) {
        check_consistency(chain, ctx)?;
    }
    Ok(StepOutcome {
        proposal: mv,
        log_alpha,
        accepted,
    })
}

/// Starts a chain from a random list of `initial_length` rules. With
/// screening on, first rules whose bound falls below the tracker's `v*`
/// are redrawn.
pub fn restart<'a, E: CaptureEngine<'a>>(
    ctx: &SearchContext<'a>,
    cfg: &SearchConfig,
    tracker: &BestTracker,
    index: usize,
    mut rng: ChaCha8Rng,
) -> Result<ChainState<'a, E>> {
    let len = cfg.initial_length.min(ctx.max_len);
    let mut ids: Vec<AntecedentId> = Vec::with_capacity(len);
    let mut screened = 0;
    if len > 0 {
        let v_star = tracker.v_star();
        let mut first = rng.random_range(0..ctx.pool.len());
        if let Some(bound) = ctx.first_rule_bound(first) {
            let mut best = (bound, first);
            let mut current = bound;
            while prefix_excluded(current, v_star) {
                screened += 1;
                if screened >= MAX_SCREEN_RETRIES {
                    first = best.1;
                    break;
                }
                first = rng.random_range(0..ctx.pool.len());
                current = ctx.first_rule_bound(first).expect("screening active");
                if current > best.0 {
                    best = (current, first);
                }
            }
        }
        ids.push(first);
        while ids.len() < len {
            let id = rng.random_range(0..ctx.pool.len());
            if !ids.contains(&id) {
                ids.push(id);
            }
        }
    }
    let mut chain = ChainState::from_list(ctx, &ids, index, rng)?;
    chain.screened = screened;
    tracker.offer(chain.value(), chain.ids(), index, 0);
    Ok(chain)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub chains: usize,
    pub iterations_per_chain: usize,
    pub total_steps: usize,
    pub accepted: usize,
    pub acceptance_rate: f64,
    pub screened_restarts: usize,
    /// Longest list proposals could reach.
    pub max_list_length: usize,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best_ids: Vec<AntecedentId>,
    pub best_value: PosteriorValue,
    pub best_chain: usize,
    pub best_iteration: usize,
    pub diagnostics: Diagnostics,
    pub improvements: Vec<Improvement>,
}

fn run_chain<'a, E: CaptureEngine<'a>>(
    ctx: &SearchContext<'a>,
    cfg: &SearchConfig,
    tracker: &BestTracker,
    index: usize,
) -> Result<(usize, usize, usize)> {
    let rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ index as u64);
    let mut chain: ChainState<'a, E> = restart(ctx, cfg, tracker, index, rng)?;
    for _ in 0..cfg.iterations {
        mh_step(&mut chain, ctx, cfg, tracker)?;
    }
    check_consistency(&chain, ctx)?;
    Ok((chain.steps, chain.accepted, chain.screened))
}

/// Runs all chains with the given capture backend.
pub fn run_with_engine<'a, E: CaptureEngine<'a>>(
    pool: &'a RulePool,
    labels: &'a BitVector,
    hp: &Hyperparams,
    cfg: &SearchConfig,
) -> Result<SearchOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let ctx = SearchContext::new(pool, labels, hp, cfg)?;
    let tracker = BestTracker::new();
    let per_chain: Vec<(usize, usize, usize)> = if cfg.deterministic {
        (0..cfg.chains)
            .map(|i| run_chain::<E>(&ctx, cfg, &tracker, i))
            .collect::<Result<_>>()?
    } else {
        (0..cfg.chains)
            .into_par_iter()
            .map(|i| run_chain::<E>(&ctx, cfg, &tracker, i))
            .collect::<Result<Vec<_>>>()?
    };
    let best = tracker.best().ok_or(Error::NoLegalMove)?;
    let total_steps: usize = per_chain.iter().map(|c| c.0).sum();
    let accepted: usize = per_chain.iter().map(|c| c.1).sum();
    let screened: usize = per_chain.iter().map(|c| c.2).sum();
    let diagnostics = Diagnostics {
        chains: cfg.chains,
        iterations_per_chain: cfg.iterations,
        total_steps,
        accepted,
        acceptance_rate: if total_steps == 0 {
            0.0
        } else {
            accepted as f64 / total_steps as f64
        },
        screened_restarts: screened,
        max_list_length: ctx.max_len,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    log::info!(
        "search: {} chains x {} steps, acceptance {:.3}, {} screened restarts, best log posterior {:.3} ({} rules)",
        cfg.chains,
        cfg.iterations,
        diagnostics.acceptance_rate,
        screened,
        best.value.log_posterior,
        best.ids.len()
    );
    Ok(SearchOutcome {
        best_ids: best.ids,
        best_value: best.value,
        best_chain: best.chain,
        best_iteration: best.iteration,
        diagnostics,
        improvements: tracker.improvements(),
    })
}

/// Runs all chains on the bit-vector engine.
pub fn run(pool: &RulePool, labels: &BitVector, hp: &Hyperparams, cfg: &SearchConfig) -> Result<SearchOutcome> {
    run_with_engine::<CaptureState>(pool, labels, hp, cfg)
}

/// Expected list length for the main run: a pilot search at `λ = 5`,
/// then the length of the list it returns (at least 1).
pub fn auto_lambda(pool: &RulePool, labels: &BitVector, hp: &Hyperparams, cfg: &SearchConfig) -> Result<f64> {
    let pilot = Hyperparams { lambda: 5.0, ..*hp };
    let outcome = run(pool, labels, &pilot, cfg)?;
    let lambda = outcome.best_ids.len().max(1) as f64;
    log::info!("pilot run returned {} rules; lambda = {lambda}", outcome.best_ids.len());
    Ok(lambda)
}
