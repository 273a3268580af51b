//! AUC, accuracy and k-fold cross-validation.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::RawTable;
use crate::error::{Error, Result};
use crate::model::TrainedModel;
use crate::pipeline::{train, TrainOptions};

/// Mann-Whitney estimate of the area under the ROC curve; tied scores
/// share their mid-rank.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidParameter(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClassLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1 ..= j+1 share their mean.
        let mid = (i + j) as f64 / 2.0 + 1.0;
        pos_rank_sum += mid * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Fraction of rows whose thresholded score (positive when `>= 0.5`)
/// matches the label.
pub fn accuracy(scores: &[f64], labels: &[bool]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = scores
        .iter()
        .zip(labels)
        .filter(|&(&s, &y)| (s >= 0.5) == y)
        .count();
    hits as f64 / labels.len() as f64
}

/// Seeded shuffle of `0..n` dealt round-robin into `k` folds.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (i, row) in idx.into_iter().enumerate() {
        folds[i % k].push(row);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    folds
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleTestAccuracy {
    /// 1-based rule position; 0 is the default rule.
    pub rule: usize,
    pub captured: usize,
    /// Accuracy among the test rows this rule captures, if any.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub auc: f64,
    pub accuracy: f64,
    pub n_rules: usize,
    pub seconds: f64,
    pub min_support: f64,
    pub pool_size: usize,
    pub lambda: f64,
    pub per_rule: Vec<RuleTestAccuracy>,
    pub model: TrainedModel,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub std: f64,
}

impl Summary {
    /// Sample standard deviation (n − 1 denominator).
    pub fn of(xs: &[f64]) -> Summary {
        if xs.is_empty() {
            return Summary {
                mean: f64::NAN,
                median: f64::NAN,
                std: f64::NAN,
            };
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let mut sorted = xs.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len().is_multiple_of(2) {
            (sorted[mid - 1] + sorted[mid]) / 2.0
        } else {
            sorted[mid]
        };
        let std = if xs.len() < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Summary { mean, median, std }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
    pub auc: Summary,
    pub accuracy: Summary,
    pub n_rules: Summary,
    pub seconds: Summary,
}

impl CvReport {
    /// `fold,auc,accuracy,n_rules,seconds` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fold,auc,accuracy,n_rules,seconds\n");
        for f in &self.folds {
            out.push_str(&format!(
                "{},{:.6},{:.6},{},{:.3}\n",
                f.fold + 1,
                f.auc,
                f.accuracy,
                f.n_rules,
                f.seconds
            ));
        }
        out
    }

    /// `n_rules,auc` per fold, for AUC-versus-sparsity plots.
    pub fn scatter_csv(&self) -> String {
        let mut out = String::from("n_rules,auc\n");
        for f in &self.folds {
            out.push_str(&format!("{},{:.6}\n", f.n_rules, f.auc));
        }
        out
    }
}

/// Accuracy of each rule over the test rows it captures.
pub fn per_rule_accuracy(model: &TrainedModel, assignment: &[usize], labels: &[bool]) -> Vec<RuleTestAccuracy> {
    (0..=model.len())
        .map(|rule| {
            let predicted = model.theta_of(rule) >= 0.5;
            let mut captured = 0;
            let mut hits = 0;
            for (&j, &y) in assignment.iter().zip(labels) {
                if j == rule {
                    captured += 1;
                    hits += usize::from(predicted == y);
                }
            }
            RuleTestAccuracy {
                rule,
                captured,
                accuracy: (captured > 0).then(|| hits as f64 / captured as f64),
            }
        })
        .collect()
}

/// `k`-fold cross-validation. Binarization edges, level maps and the rule
/// pool are fitted on each training split only.
pub fn cross_validate(table: &RawTable, k: usize, fold_seed: u64, opts: &TrainOptions) -> Result<CvReport> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {k}")));
    }
    if !table.has_labels() {
        return Err(Error::InvalidParameter("cross-validation needs a labelled table".into()));
    }
    if table.n_rows() < k {
        return Err(Error::InvalidParameter(format!(
            "{} rows cannot fill {k} folds",
            table.n_rows()
        )));
    }
    let folds = fold_assignment(table.n_rows(), k, fold_seed);
    let labels = table.labels();
    for (f, test_rows) in folds.iter().enumerate() {
        let pos = test_rows.iter().filter(|&&r| labels[r]).count();
        if pos == 0 || pos == test_rows.len() {
            return Err(Error::DegenerateFold { fold: f + 1, part: "test" });
        }
        let train_pos = labels.iter().filter(|&&y| y).count() - pos;
        let train_n = table.n_rows() - test_rows.len();
        if train_pos == 0 || train_pos == train_n {
            return Err(Error::DegenerateFold { fold: f + 1, part: "training" });
        }
    }

    let mut results = Vec::with_capacity(k);
    for (f, test_rows) in folds.iter().enumerate() {
        let start = Instant::now();
        let mut in_test = vec![false; table.n_rows()];
        for &r in test_rows {
            in_test[r] = true;
        }
        let train_rows: Vec<usize> = (0..table.n_rows()).filter(|&r| !in_test[r]).collect();
        let fitted = train(&table.select_rows(&train_rows), opts)?;
        let test_table = table.select_rows(test_rows);
        let test_data = fitted.binarizer.transform(&test_table)?;
        let assignment = fitted.model.assign(&test_data)?;
        let scores: Vec<f64> = assignment.iter().map(|&j| fitted.model.theta_of(j)).collect();
        let test_labels = test_table.labels();
        let result = FoldResult {
            fold: f,
            train_size: train_rows.len(),
            test_size: test_rows.len(),
            auc: auc(&scores, test_labels)?,
            accuracy: accuracy(&scores, test_labels),
            n_rules: fitted.model.len(),
            seconds: start.elapsed().as_secs_f64(),
            min_support: fitted.min_support,
            pool_size: fitted.pool.len(),
            lambda: fitted.hyperparams.lambda,
            per_rule: per_rule_accuracy(&fitted.model, &assignment, test_labels),
            model: fitted.model,
        };
        log::info!(
            "fold {}/{k}: auc {:.4}, accuracy {:.4}, {} rules, {:.2}s",
            f + 1,
            result.auc,
            result.accuracy,
            result.n_rules,
            result.seconds
        );
        results.push(result);
    }
    let collect = |g: fn(&FoldResult) -> f64| Summary::of(&results.iter().map(g).collect::<Vec<_>>());
    Ok(CvReport {
        auc: collect(|f| f.auc),
        accuracy: collect(|f| f.accuracy),
        n_rules: collect(|f| f.n_rules as f64),
        seconds: collect(|f| f.seconds),
        folds: results,
    })
}
