//! Stratified k-fold cross-validation and its JSON report.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use turs_core::{
    fit_ruleset, overlap_fraction, weighted_ovr_auc, Aggregation, Dataset, RuleSet, ScoreMode,
    SearchConfig, TursError,
};

use crate::error::{Error, Result};

pub const REPORT_FORMAT: &str = "turs-eval-report";
pub const REPORT_VERSION: u32 = 1;

/// Which part of each fold the overlap fraction is measured on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlapOn {
    #[default]
    Test,
    Train,
}

#[derive(Clone, Debug, Default)]
pub struct CvOptions {
    pub overlap_on: OverlapOn,
    /// Record fit wall time per fold; makes reports differ between runs.
    pub include_timing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigJson {
    pub beam_width: usize,
    pub alpha: f64,
    pub num_seeds: usize,
    pub min_leaf_sizes: Vec<usize>,
    pub num_cut_points: usize,
    pub max_rules: usize,
    pub surrogate_aggregation: String,
    pub score_mode: String,
}

impl From<&SearchConfig> for ConfigJson {
    fn from(c: &SearchConfig) -> Self {
        ConfigJson {
            beam_width: c.beam_width,
            alpha: c.alpha,
            num_seeds: c.seeds(),
            min_leaf_sizes: c.min_leaf_grid.clone(),
            num_cut_points: c.num_cut_points,
            max_rules: c.max_rules,
            surrogate_aggregation: match c.aggregation {
                Aggregation::Max => "max",
                Aggregation::Min => "min",
            }
            .into(),
            score_mode: match c.score_mode {
                ScoreMode::Surrogate => "surrogate",
                ScoreMode::Direct => "direct",
            }
            .into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub auc: f64,
    pub overlap_fraction: f64,
    pub num_rules: usize,
    pub total_literals: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_seconds: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format: String,
    pub version: u32,
    pub folds: usize,
    pub seed: u64,
    pub n: usize,
    pub class_labels: Vec<String>,
    pub config: ConfigJson,
    pub overlap_measured_on: OverlapOn,
    pub per_fold: Vec<FoldReport>,
    pub mean_auc: f64,
    pub mean_overlap_fraction: f64,
    pub mean_num_rules: f64,
    pub mean_total_literals: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_fit_seconds: Option<f64>,
}

impl EvalReport {
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Fold index of every instance. Each class is shuffled with a seeded RNG
/// and dealt round-robin, continuing the deal across classes, so fold
/// sizes differ by at most one and every fold gets every class.
pub fn stratified_folds(target: &[u32], num_classes: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(TursError::InvalidArgument(format!("need at least 2 folds, got {folds}")).into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; target.len()];
    let mut next = 0usize;
    for class in 0..num_classes as u32 {
        let mut members: Vec<usize> = (0..target.len()).filter(|&i| target[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < folds {
            return Err(TursError::InvalidArgument(format!(
                "class {class} has {} instances, fewer than {folds} folds",
                members.len()
            ))
            .into());
        }
        members.shuffle(&mut rng);
        for i in members {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    Ok(assignment)
}

fn run_fold(
    dataset: &Dataset,
    assignment: &[usize],
    fold: usize,
    config: &SearchConfig,
    options: &CvOptions,
) -> Result<FoldReport> {
    let train_idx: Vec<usize> = (0..dataset.n()).filter(|&i| assignment[i] != fold).collect();
    let test_idx: Vec<usize> = (0..dataset.n()).filter(|&i| assignment[i] == fold).collect();
    let train = dataset.subset(&train_idx);
    let test = dataset.subset(&test_idx);

    let start = Instant::now();
    let ruleset: RuleSet = fit_ruleset(&train, config)?;
    let elapsed = start.elapsed().as_secs_f64();

    let probs: Vec<Vec<f64>> = ruleset
        .predict_dataset(&test)?
        .into_iter()
        .map(|(p, _)| p)
        .collect();
    let auc = weighted_ovr_auc(&probs, test.target()).map_err(|e| match e {
        TursError::UndefinedAuc(msg) => TursError::UndefinedAuc(format!("fold {fold}: {msg}")),
        other => other,
    })?;
    let overlap = match options.overlap_on {
        OverlapOn::Test => overlap_fraction(&ruleset, &test),
        OverlapOn::Train => overlap_fraction(&ruleset, &train),
    };
    Ok(FoldReport {
        fold,
        n_train: train.n(),
        n_test: test.n(),
        auc,
        overlap_fraction: overlap,
        num_rules: ruleset.rules().len(),
        total_literals: ruleset.total_literals(),
        fit_seconds: options.include_timing.then_some(elapsed),
    })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

/// Stratified k-fold cross-validation. Folds are fitted concurrently; the
/// report lists them in fold order and is identical for identical inputs.
pub fn cross_validate(
    dataset: &Dataset,
    folds: usize,
    config: &SearchConfig,
    seed: u64,
    options: &CvOptions,
) -> Result<EvalReport> {
    config.validate()?;
    let assignment = stratified_folds(dataset.target(), dataset.num_classes(), folds, seed)?;
    let outcomes: Vec<Result<FoldReport>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..folds)
            .map(|fold| {
                let assignment = &assignment;
                scope.spawn(move || run_fold(dataset, assignment, fold, config, options))
            })
            .collect();
        handles
            .into_iter()
            .enumerate()
            .map(|(fold, h)| h.join().unwrap_or_else(|_| Err(Error::Internal(format!("fold {fold} worker panicked")))))
            .collect()
    });
    let per_fold: Vec<FoldReport> = outcomes.into_iter().collect::<Result<_>>()?;
    Ok(EvalReport {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        folds,
        seed,
        n: dataset.n(),
        class_labels: dataset.class_labels().to_vec(),
        config: config.into(),
        overlap_measured_on: options.overlap_on,
        mean_auc: mean(per_fold.iter().map(|f| f.auc)),
        mean_overlap_fraction: mean(per_fold.iter().map(|f| f.overlap_fraction)),
        mean_num_rules: mean(per_fold.iter().map(|f| f.num_rules as f64)),
        mean_total_literals: mean(per_fold.iter().map(|f| f.total_literals as f64)),
        total_fit_seconds: options
            .include_timing
            .then(|| per_fold.iter().filter_map(|f| f.fit_seconds).sum()),
        per_fold,
    })
}
