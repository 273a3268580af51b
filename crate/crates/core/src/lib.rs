//! Bayesian rule lists over pre-mined antecedents.
//!
//! The pipeline is: load a CSV ([`dataset`]), binarize it, mine frequent
//! conjunctions ([`miner`]), search rule-list space with an incremental
//! bit-vector capture engine ([`capture`], [`search`]) scored by the exact
//! log posterior ([`posterior`]) and pruned by [`bounds`], then evaluate the
//! resulting classifier ([`evaluate`]).

pub mod bench;
pub mod bitvec;
pub mod bounds;
pub mod capture;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod miner;
pub mod model;
pub mod pipeline;
pub mod posterior;
pub mod search;

pub use bitvec::BitVector;
pub use capture::{CaptureEngine, CaptureState, Delta, DeltaKind, NaiveCaptureState};
pub use dataset::{
    binarize, load_csv, load_csv_unlabeled, BinarizeOptions, Binarizer, BinaryDataset, RawTable,
};
pub use error::{Error, Result};
pub use miner::{mine, tune_support, Antecedent, AntecedentId, MineOptions, RulePool};
pub use posterior::{Hyperparams, IncrementalPosterior, LabelCounts, PosteriorValue, PriorModel};
pub use evaluate::{accuracy, auc, cross_validate, CvReport};
pub use model::{fit_thetas, TrainedModel};
pub use pipeline::{train, Fitted, Lambda, Mining, TrainOptions};
pub use search::{auto_lambda, run, SearchConfig, SearchOutcome};
