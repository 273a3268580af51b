//! Timing the bit-vector capture engine against the set-based reference on
//! the same seeded move sequence.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bitvec::BitVector;
use crate::capture::{CaptureEngine, CaptureState, NaiveCaptureState};
use crate::error::Result;
use crate::miner::{AntecedentId, RulePool};
use crate::posterior::Hyperparams;
use crate::search::{mh_step, restart, BestTracker, ChainState, SearchConfig, SearchContext};

#[derive(Debug, Clone, Serialize)]
pub struct BackendTiming {
    pub backend: &'static str,
    pub seconds: f64,
    pub steps: usize,
    pub best_ids: Vec<AntecedentId>,
    pub best_log_posterior: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub bitvector: BackendTiming,
    pub naive: BackendTiming,
    /// Naive time over bit-vector time.
    pub speedup: f64,
    pub identical_best: bool,
}

/// Times `cfg.chains` chains of `cfg.iterations` steps per backend. Only
/// the steps are timed; building each engine's initial state is not.
fn time_backend<'a, E: CaptureEngine<'a>>(
    backend: &'static str,
    ctx: &SearchContext<'a>,
    cfg: &SearchConfig,
) -> Result<BackendTiming> {
    let tracker = BestTracker::new();
    let mut elapsed = Duration::ZERO;
    let mut steps = 0;
    for index in 0..cfg.chains {
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ index as u64);
        let mut chain: ChainState<'a, E> = restart(ctx, cfg, &tracker, index, rng)?;
        let start = Instant::now();
        for _ in 0..cfg.iterations {
            mh_step(&mut chain, ctx, cfg, &tracker)?;
        }
        elapsed += start.elapsed();
        steps += chain.steps;
    }
    let best = tracker.best().expect("every chain offers its start");
    Ok(BackendTiming {
        backend,
        seconds: elapsed.as_secs_f64(),
        steps,
        best_ids: best.ids,
        best_log_posterior: best.value.log_posterior,
    })
}

/// A zero-iteration workload is reported as a speedup of exactly 1.
pub fn bench(pool: &RulePool, labels: &BitVector, hp: &Hyperparams, cfg: &SearchConfig) -> Result<BenchReport> {
    let mut cfg = cfg.clone();
    cfg.deterministic = true;
    let ctx = SearchContext::new(pool, labels, hp, &cfg)?;
    let bitvector = time_backend::<CaptureState>("bitvector", &ctx, &cfg)?;
    let naive = time_backend::<NaiveCaptureState>("naive-sets", &ctx, &cfg)?;
    let speedup = if bitvector.steps == 0 {
        1.0
    } else {
        naive.seconds / bitvector.seconds.max(1e-12)
    };
    Ok(BenchReport {
        identical_best: bitvector.best_ids == naive.best_ids,
        speedup,
        bitvector,
        naive,
    })
}
