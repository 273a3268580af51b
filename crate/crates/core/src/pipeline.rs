//! Raw table in, trained classifier out.

use std::time::Instant;

use crate::dataset::{BinarizeOptions, Binarizer, BinaryDataset, RawTable};
use crate::error::Result;
use crate::miner::{mine, tune_support, MineOptions, RulePool};
use crate::model::TrainedModel;
use crate::posterior::Hyperparams;
use crate::search::{auto_lambda, run, SearchConfig, SearchOutcome};

#[derive(Debug, Clone, PartialEq)]
pub enum Mining {
    Fixed(MineOptions),
    /// Grid-search the support so the pool size lands near `target`.
    Tuned {
        target: usize,
        min_card: usize,
        max_card: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda {
    Fixed(f64),
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub binarize: BinarizeOptions,
    pub mining: Mining,
    pub lambda: Lambda,
    pub eta: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub search: SearchConfig,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            binarize: BinarizeOptions::default(),
            mining: Mining::Tuned {
                target: 300,
                min_card: 1,
                max_card: 2,
            },
            lambda: Lambda::Auto,
            eta: 1.0,
            alpha0: 1.0,
            alpha1: 1.0,
            search: SearchConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fitted {
    pub binarizer: Binarizer,
    pub data: BinaryDataset,
    pub pool: RulePool,
    pub min_support: f64,
    pub hyperparams: Hyperparams,
    pub outcome: SearchOutcome,
    pub model: TrainedModel,
}

pub fn build_pool(data: &BinaryDataset, mining: &Mining) -> Result<(f64, RulePool)> {
    match mining {
        Mining::Fixed(opts) => Ok((opts.min_support, mine(data, opts)?)),
        Mining::Tuned {
            target,
            min_card,
            max_card,
        } => tune_support(data, *target, *min_card, *max_card),
    }
}

/// Binarize, mine, pick λ, search, and fit θ on a labelled table.
pub fn train(table: &RawTable, opts: &TrainOptions) -> Result<Fitted> {
    let start = Instant::now();
    opts.search.validate()?;
    let binarizer = Binarizer::fit(table, &opts.binarize)?;
    let data = binarizer.transform(table)?;
    let (min_support, pool) = build_pool(&data, &opts.mining)?;
    log::info!(
        "{} rows, {} binary features, {} antecedents at support {min_support}",
        data.n(),
        data.n_features(),
        pool.len()
    );
    let mut hp = Hyperparams {
        lambda: 5.0,
        eta: opts.eta,
        alpha0: opts.alpha0,
        alpha1: opts.alpha1,
    };
    hp.lambda = match opts.lambda {
        Lambda::Fixed(l) => l,
        Lambda::Auto => auto_lambda(&pool, data.labels(), &hp, &opts.search)?,
    };
    hp.validate()?;
    let outcome = run(&pool, data.labels(), &hp, &opts.search)?;
    let mut model = TrainedModel::from_outcome(&outcome, &pool, data.labels(), &hp, opts.search.seed)?;
    model.wall_seconds = start.elapsed().as_secs_f64();
    Ok(Fitted {
        binarizer,
        data,
        pool,
        min_support,
        hyperparams: hp,
        outcome,
        model,
    })
}
