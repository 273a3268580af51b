//! End-to-end acceptance criteria. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails. Pass criterion numbers as arguments
//! (`cargo test --test acceptance -- 4 6`) to run a subset.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rulelist::bench::bench;
use rulelist::bounds::{compute_m_max, compute_m_max_for_pool, upsilon};
use rulelist::evaluate::fold_assignment;
use rulelist::pipeline::build_pool;
use rulelist::posterior::{log_likelihood, log_posterior, log_prior, rule_log_likelihood};
use rulelist::search::{mh_step, restart, BestTracker, ChainState, SearchConfig, SearchContext};
use rulelist::{
    cross_validate, load_csv, AntecedentId, BinarizeOptions, Binarizer, BitVector, CaptureEngine, CaptureState,
    CvReport, Hyperparams, IncrementalPosterior, LabelCounts, Lambda, MineOptions, Mining, PriorModel, RawTable,
    RulePool, TrainOptions,
};

use common::{
    all_lists, check_against_rebuild, full_pool, ln_factorial, oracle_counts, random_labels, random_mutation,
    random_pool,
};

// Tolerances and thresholds.
const C1_MIN_ACCURACY: f64 = 0.98;
const C1_MIN_AUC: f64 = 0.98;
const C1_MIN_LINES: usize = 6;
const C1_MAX_SECONDS: f64 = 60.0;
const C2_MIN_AUC: f64 = 0.99;
const C2_LENGTH: (usize, usize) = (5, 25);
const C2_MAX_SECONDS: f64 = 300.0;
const C3_MIN_AUC: f64 = 0.85;
const C3_MAX_RULES: f64 = 25.0;
const C3_MAX_SECONDS: f64 = 1800.0;
const C4_RANGE: (usize, usize) = (30, 42);
const C4_PINNED: usize = 36;
const C5_PAPER: [f64; 3] = [-272.51, -105.012, -35.90];
const C5_TOLERANCE: f64 = 15.0;
const C6_SEQUENCES: usize = 10_000;
const C7_MUTATIONS: usize = 10_000;
const C7_INCREMENTAL_TOL: f64 = 1e-9;
const C7_NORMALIZATION_TOL: f64 = 1e-10;
const C8_CASES: usize = 1000;
const C9_MAP_TRIALS: usize = 100;
const C9_BOUND_SLACK: f64 = 1e-9;
const C10_MIN_SPEEDUP: f64 = 10.0;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn tic_tac_toe() -> RawTable {
    load_csv(data("tic-tac-toe.csv"), "class", Some("positive")).expect("tic-tac-toe data")
}

const SQUARES: [&str; 9] = [
    "top-left-square",
    "top-middle-square",
    "top-right-square",
    "middle-left-square",
    "middle-middle-square",
    "middle-right-square",
    "bottom-left-square",
    "bottom-middle-square",
    "bottom-right-square",
];

/// The eight three-in-a-row lines as square indices.
const LINES: [[usize; 3]; 8] = [
    [0, 1, 2],
    [3, 4, 5],
    [6, 7, 8],
    [0, 3, 6],
    [1, 4, 7],
    [2, 5, 8],
    [0, 4, 8],
    [2, 4, 6],
];

fn line_literals(line: &[usize], mark: char) -> Vec<String> {
    let mut lits: Vec<String> = line.iter().map(|&s| format!("{}={mark}", SQUARES[s])).collect();
    lits.sort();
    lits
}

fn line_id(pool: &RulePool, line: &[usize], mark: char) -> Option<AntecedentId> {
    let lits = line_literals(line, mark);
    pool.find_by_names(&lits.iter().map(String::as_str).collect::<Vec<_>>())
}

fn cv_summary(r: &CvReport) -> String {
    format!(
        "mean AUC {:.4}, mean accuracy {:.4}, rules mean {:.1} (min {}, max {})",
        r.auc.mean,
        r.accuracy.mean,
        r.n_rules.mean,
        r.folds.iter().map(|f| f.n_rules).min().unwrap_or(0),
        r.folds.iter().map(|f| f.n_rules).max().unwrap_or(0),
    )
}

/// Tic-tac-toe 10-fold CV. The support is pinned at 5%: x-lines hold on
/// about 8% of boards, and tuning toward 300 antecedents picks 10%, which
/// would exclude every one of them.
fn criterion_1() -> Verdict {
    let table = tic_tac_toe();
    let opts = TrainOptions {
        mining: Mining::Fixed(MineOptions {
            min_support: 0.05,
            min_card: 1,
            max_card: 3,
        }),
        ..Default::default()
    };
    let start = Instant::now();
    let report = cross_validate(&table, 10, 0, &opts).expect("cross-validation");
    let secs = start.elapsed().as_secs_f64();
    let lines: Vec<Vec<String>> = LINES.iter().map(|l| line_literals(l, 'x')).collect();
    let most_lines = report
        .folds
        .iter()
        .map(|f| {
            f.model
                .rules
                .iter()
                .filter(|r| {
                    let mut lits = r.literals.clone();
                    lits.sort();
                    lines.contains(&lits)
                })
                .count()
        })
        .max()
        .unwrap_or(0);
    let pass = report.accuracy.mean >= C1_MIN_ACCURACY
        && report.auc.mean >= C1_MIN_AUC
        && most_lines >= C1_MIN_LINES
        && secs <= C1_MAX_SECONDS;
    verdict(
        pass,
        format!(
            "{}; most x-lines in one list {most_lines}/8; {secs:.1}s",
            cv_summary(&report)
        ),
    )
}

fn criterion_2() -> Verdict {
    let table = load_csv(data("mushroom.csv"), "class", Some("e")).expect("mushroom data");
    let start = Instant::now();
    let report = cross_validate(&table, 10, 0, &TrainOptions::default()).expect("cross-validation");
    let secs = start.elapsed().as_secs_f64();
    let lengths_ok = report
        .folds
        .iter()
        .all(|f| (C2_LENGTH.0..=C2_LENGTH.1).contains(&f.n_rules));
    let pass = report.auc.mean >= C2_MIN_AUC && lengths_ok && secs <= C2_MAX_SECONDS;
    verdict(pass, format!("{}; {secs:.1}s", cv_summary(&report)))
}

fn criterion_3() -> Verdict {
    let table = load_csv(data("adult.csv"), "income", Some(">50K")).expect("adult data");
    let start = Instant::now();
    let report = cross_validate(&table, 10, 0, &TrainOptions::default()).expect("cross-validation");
    let secs = start.elapsed().as_secs_f64();
    let pass = report.auc.mean >= C3_MIN_AUC && report.n_rules.mean <= C3_MAX_RULES && secs <= C3_MAX_SECONDS;
    verdict(pass, format!("{}; {secs:.1}s", cv_summary(&report)))
}

fn criterion_4() -> Verdict {
    let hp = Hyperparams {
        lambda: 3.0,
        eta: 1.0,
        alpha0: 1.0,
        alpha1: 1.0,
    };
    let m = compute_m_max(10, 100, 100, &hp).expect("m_max");
    let pass = (C4_RANGE.0..=C4_RANGE.1).contains(&m) && m == C4_PINNED;
    verdict(pass, format!("m_max(P=10, N+=N-=100, λ=3) = {m}, pinned {C4_PINNED}"))
}

/// Values of the two demonstration prefixes and the eight-x-line list on
/// one training split.
struct Demonstration {
    fold: usize,
    bad: f64,
    perfect: f64,
    good: f64,
}

impl Demonstration {
    fn ordered(&self) -> bool {
        self.bad < self.perfect && self.perfect < self.good
    }

    fn worst_gap(&self) -> f64 {
        [self.bad, self.perfect, self.good]
            .iter()
            .zip(C5_PAPER)
            .map(|(v, p)| (v - p).abs())
            .fold(0.0, f64::max)
    }
}

/// On each 90/10 training split: the pool is mined at 3% support with up to
/// three literals so that the O-lines (about 4% of boards) are present, and
/// λ is the eight-rule length of the perfect list.
fn demonstrations() -> Vec<Demonstration> {
    let table = tic_tac_toe();
    let folds = fold_assignment(table.n_rows(), 10, 0);
    let hp = Hyperparams {
        lambda: 8.0,
        eta: 1.0,
        alpha0: 1.0,
        alpha1: 1.0,
    };
    let mut out = Vec::new();
    for (f, test) in folds.iter().enumerate() {
        let train_rows: Vec<usize> = (0..table.n_rows()).filter(|r| !test.contains(r)).collect();
        let train = table.select_rows(&train_rows);
        let data = Binarizer::fit(&train, &BinarizeOptions::default())
            .and_then(|b| b.transform(&train))
            .expect("binarize");
        let mining = Mining::Fixed(MineOptions {
            min_support: 0.03,
            min_card: 1,
            max_card: 3,
        });
        let (_, pool) = build_pool(&data, &mining).expect("pool");
        let labels = data.labels();
        let prior = PriorModel::new(&pool, &hp);
        let n1 = labels.count_ones();
        let totals = LabelCounts::new(labels.len() - n1, n1);
        let bound = |ids: &[AntecedentId]| {
            let state = CaptureState::build(&pool, labels, ids).expect("prefix");
            let cards: Vec<usize> = ids.iter().map(|&id| pool.cardinality(id)).collect();
            upsilon(state.rule_counts(), &cards, totals, &prior, &hp).expect("upsilon")
        };
        let single = |name: &str| pool.find_by_names(&[name]).expect("single literal in pool");
        let bad = bound(&[single("bottom-middle-square=o"), single("middle-right-square=o")]);
        let good_ids: Option<Vec<AntecedentId>> = [[3, 4, 5], [0, 3, 6]]
            .iter()
            .map(|l| line_id(&pool, l, 'o'))
            .collect();
        let perfect_ids: Option<Vec<AntecedentId>> = LINES.iter().map(|l| line_id(&pool, l, 'x')).collect();
        let (Some(good_ids), Some(perfect_ids)) = (good_ids, perfect_ids) else {
            continue;
        };
        let good = bound(&good_ids);
        let state = CaptureState::build(&pool, labels, &perfect_ids).expect("perfect list");
        let perfect = log_posterior(&state, &pool, &prior, &hp).expect("posterior").log_posterior;
        out.push(Demonstration {
            fold: f + 1,
            bad,
            perfect,
            good,
        });
    }
    out
}

fn criterion_5() -> Verdict {
    let demos = demonstrations();
    let ordered = demos.iter().filter(|d| d.ordered()).count();
    let matched = demos
        .iter()
        .filter(|d| d.ordered())
        .min_by(|a, b| a.worst_gap().total_cmp(&b.worst_gap()));
    let Some(best) = matched else {
        return verdict(false, format!("ordering held on 0 of {} folds", demos.len()));
    };
    let pass = best.worst_gap() <= C5_TOLERANCE;
    verdict(
        pass,
        format!(
            "ordering on {ordered}/{} folds; fold {}: bad prefix {:.2} < perfect list {:.3} < good prefix {:.2}; \
             gaps to reference {:.2}, {:.2}, {:.2} (tolerance {C5_TOLERANCE})",
            demos.len(),
            best.fold,
            best.bad,
            best.perfect,
            best.good,
            (best.bad - C5_PAPER[0]).abs(),
            (best.perfect - C5_PAPER[1]).abs(),
            (best.good - C5_PAPER[2]).abs()
        ),
    )
}

fn criterion_6() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut sequences = 0;
    let mut operations = 0;
    while sequences < C6_SEQUENCES {
        let n = rng.random_range(1..256);
        let n_ants = rng.random_range(2..40);
        let pool = random_pool(&mut rng, n, 10, n_ants, 3);
        let labels = random_labels(&mut rng, n);
        for _ in 0..100 {
            let mut state = CaptureState::build(&pool, &labels, &[]).expect("empty list");
            for _ in 0..rng.random_range(1..=25) {
                random_mutation(&mut rng, &mut state, pool.len());
                operations += 1;
                if let Err(e) = check_against_rebuild(&state, &pool, &labels) {
                    return verdict(false, format!("sequence {sequences}: {e}"));
                }
            }
            sequences += 1;
        }
    }
    verdict(
        true,
        format!("{sequences} sequences, {operations} operations, all identical to rebuild and first-match oracle"),
    )
}

fn criterion_7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut mutations = 0;
    while mutations < C7_MUTATIONS {
        let n = rng.random_range(10..500);
        let pool = random_pool(&mut rng, n, 10, 40, 3);
        let labels = random_labels(&mut rng, n);
        let hp = Hyperparams {
            lambda: rng.random_range(0.5..10.0),
            eta: rng.random_range(0.5..3.0),
            alpha0: rng.random_range(0.5..3.0),
            alpha1: rng.random_range(0.5..3.0),
        };
        let prior = PriorModel::new(&pool, &hp);
        let mut state = CaptureState::build(&pool, &labels, &[]).expect("empty list");
        let mut inc = IncrementalPosterior::new(&state, &pool, &prior, &hp).expect("posterior");
        for _ in 0..1000 {
            let delta = random_mutation(&mut rng, &mut state, pool.len());
            let v = inc.apply(&delta, &state, &pool, &prior).expect("apply");
            let scratch = log_prior(state.ids(), &pool, &hp).expect("prior")
                + log_likelihood(&oracle_counts(&pool, &labels, state.ids()), &hp);
            worst = worst.max((v.log_posterior - scratch).abs());
            mutations += 1;
        }
    }
    // Normalization over every list of small pools.
    let mut worst_sum: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for size in 1..=6 {
        for _ in 0..3 {
            let pool = random_pool(&mut rng, 8, 8, size, 3);
            let hp = Hyperparams {
                lambda: rng.random_range(0.5..8.0),
                eta: rng.random_range(0.5..3.0),
                alpha0: 1.0,
                alpha1: 1.0,
            };
            let total: f64 = all_lists(pool.len())
                .iter()
                .map(|ids| log_prior(ids, &pool, &hp).expect("prior").exp())
                .sum();
            worst_sum = worst_sum.max((total - 1.0).abs());
        }
    }
    let pass = worst < C7_INCREMENTAL_TOL && worst_sum < C7_NORMALIZATION_TOL;
    verdict(
        pass,
        format!("{mutations} mutations, max |incremental - scratch| {worst:.2e}; max |Σ prior - 1| {worst_sum:.2e}"),
    )
}

fn criterion_8() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut split_ok = 0;
    for _ in 0..C8_CASES {
        let (n0, n1) = (rng.random_range(1..5000), rng.random_range(1..5000));
        let before = rule_log_likelihood(LabelCounts::new(n0, n1), 1.0, 1.0);
        let after = rule_log_likelihood(LabelCounts::new(n0, 0), 1.0, 1.0)
            + rule_log_likelihood(LabelCounts::new(0, n1), 1.0, 1.0);
        let closed = ln_factorial(n0 + n1 + 1) - ln_factorial(n0 + 1) - ln_factorial(n1 + 1);
        if after > before && ((after - before) - closed).abs() < 1e-8 * closed.max(1.0) {
            split_ok += 1;
        }
    }
    let mut merge_ok = 0;
    for alpha in [1.0, 2.0, 3.0] {
        for _ in 0..C8_CASES {
            let (a, b) = (rng.random_range(1..5000), rng.random_range(1..5000));
            let rule = |k: usize, positive: bool| {
                if positive {
                    LabelCounts::new(0, k)
                } else {
                    LabelCounts::new(k, 0)
                }
            };
            let positive = rng.random_bool(0.5);
            let before = rule_log_likelihood(rule(a, positive), alpha, alpha)
                + rule_log_likelihood(rule(b, positive), alpha, alpha);
            let after = rule_log_likelihood(rule(a + b, positive), alpha, alpha);
            if after > before {
                merge_ok += 1;
            }
        }
    }
    let pass = split_ok == C8_CASES && merge_ok == 3 * C8_CASES;
    verdict(
        pass,
        format!("split {split_ok}/{C8_CASES} at α=(1,1); merge {merge_ok}/{} at α∈{{1,2,3}}", 3 * C8_CASES),
    )
}

fn criterion_9() -> Verdict {
    // Every (prefix, list) pair visited by a seeded search on a 40-rule pool.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 300;
    let pool = random_pool(&mut rng, n, 10, 40, 3);
    let labels = random_labels(&mut rng, n);
    let hp = Hyperparams {
        lambda: 4.0,
        eta: 1.0,
        alpha0: 1.0,
        alpha1: 1.0,
    };
    let cfg = SearchConfig {
        chains: 10,
        iterations: 2000,
        seed: 9,
        deterministic: true,
        ..Default::default()
    };
    let ctx = SearchContext::new(&pool, &labels, &hp, &cfg).expect("context");
    let tracker = BestTracker::new();
    let n1 = labels.count_ones();
    let totals = LabelCounts::new(n - n1, n1);
    let (mut pairs, mut violations) = (0usize, 0usize);
    for index in 0..cfg.chains {
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ index as u64);
        let mut chain: ChainState<CaptureState> = restart(&ctx, &cfg, &tracker, index, rng).expect("restart");
        for _ in 0..cfg.iterations {
            mh_step(&mut chain, &ctx, &cfg, &tracker).expect("step");
            let v = chain.value().log_posterior;
            let counts = chain.capture.rule_counts();
            let cards: Vec<usize> = chain.ids().iter().map(|&id| pool.cardinality(id)).collect();
            for p in 0..=cards.len() {
                let b = upsilon(&counts[..p], &cards[..p], totals, &ctx.prior, &hp).expect("upsilon");
                pairs += 1;
                if b < v - C9_BOUND_SLACK {
                    violations += 1;
                }
            }
        }
    }
    // Exhaustive MAP length against the cap on all-conjunction pools.
    let mut within = 0;
    for _ in 0..C9_MAP_TRIALS {
        let p = 3;
        let n = rng.random_range(3..40);
        let features: Vec<BitVector> = (0..p)
            .map(|_| BitVector::from_bools((0..n).map(|_| rng.random_bool(0.5))))
            .collect();
        let pool = full_pool(&features);
        let labels = random_labels(&mut rng, n);
        let hp = Hyperparams {
            lambda: rng.random_range(0.3..7.0),
            ..hp
        };
        let prior = PriorModel::new(&pool, &hp);
        let scored: Vec<(usize, f64)> = all_lists(pool.len())
            .iter()
            .map(|ids| {
                let s = CaptureState::build(&pool, &labels, ids).expect("list");
                (ids.len(), log_posterior(&s, &pool, &prior, &hp).expect("posterior").log_posterior)
            })
            .collect();
        let best = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        let longest = scored.iter().filter(|s| s.1 >= best - 1e-12).map(|s| s.0).max().unwrap();
        let n_pos = labels.count_ones();
        let cap = compute_m_max(p, n_pos, n - n_pos, &hp).expect("m_max");
        let pool_cap = compute_m_max_for_pool(&pool.inventory(), n_pos, n - n_pos, &hp);
        if longest <= cap.min(pool_cap) {
            within += 1;
        }
    }
    let pass = violations == 0 && within == C9_MAP_TRIALS;
    verdict(
        pass,
        format!(
            "{violations} violations in {pairs} (prefix, list) pairs; MAP length within m_max in {within}/{C9_MAP_TRIALS}"
        ),
    )
}

fn criterion_10() -> Verdict {
    let table = load_csv(data("adult.csv"), "income", Some(">50K")).expect("adult data");
    let data = rulelist::binarize(&table, &BinarizeOptions::default()).expect("binarize");
    let defaults = TrainOptions::default();
    let (_, pool) = build_pool(&data, &defaults.mining).expect("pool");
    let hp = Hyperparams {
        lambda: match defaults.lambda {
            Lambda::Fixed(l) => l,
            Lambda::Auto => 5.0,
        },
        ..Default::default()
    };
    let cfg = SearchConfig {
        chains: 1,
        iterations: 2000,
        seed: 10,
        ..Default::default()
    };
    let report = bench(&pool, data.labels(), &hp, &cfg).expect("bench");
    let pass = report.speedup >= C10_MIN_SPEEDUP && report.identical_best;
    verdict(
        pass,
        format!(
            "{} rows, {} antecedents, {} steps: bit-vector {:.3}s, sets {:.3}s, speedup {:.1}x, identical best lists {}",
            data.n(),
            pool.len(),
            report.bitvector.steps,
            report.bitvector.seconds,
            report.naive.seconds,
            report.speedup,
            report.identical_best
        ),
    )
}

type Criterion = (usize, &'static str, fn() -> Verdict);

const CRITERIA: [Criterion; 10] = [
    (1, "tic-tac-toe fidelity", criterion_1),
    (2, "mushroom fidelity", criterion_2),
    (3, "adult sanity", criterion_3),
    (4, "length cap regression", criterion_4),
    (5, "prefix bound demonstrations", criterion_5),
    (6, "capture algebra oracle", criterion_6),
    (7, "posterior numerics", criterion_7),
    (8, "split and merge lemmas", criterion_8),
    (9, "bound soundness", criterion_9),
    (10, "bit-vector speedup", criterion_10),
];

fn main() -> ExitCode {
    // Cargo forwards harness flags such as `--nocapture`; only bare numbers select criteria.
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (num, name, run) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&num) {
            continue;
        }
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {num:>2} ({name}): {} [{:.1}s] {}",
            if v.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            v.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
