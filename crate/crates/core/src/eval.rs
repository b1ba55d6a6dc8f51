//! Experiment drivers: streaming budget sweeps and batch (split or K-fold)
//! evaluation.
//!
//! A streaming cell is one (variant, budget, seed) triple: a fresh model run
//! over a seed-permuted stream. Cells are independent and run in parallel;
//! aggregation reduces them in a fixed order, so results are reproducible
//! bit for bit.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::active::{stream_step, ActiveState, StreamStats, Variant, DEFAULT_TAU};
use crate::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::model::{CoverModel, ModelConfig};
use crate::types::VideoBag;

/// Budget grid used when sweeping without an explicit list.
pub const DEFAULT_BUDGET_GRID: [f64; 12] = [
    0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.75, 1.0,
];

pub const DEFAULT_MAX_BALLS: usize = 5000;

/// Seed salts: one base seed drives the permutation, the step RNG, and the
/// model's eviction RNG through distinct derived streams.
const PERMUTE_SALT: u64 = 0x5eed_0001;
const MODEL_SALT: u64 = 0x5eed_0002;
const FOLD_SALT: u64 = 0x5eed_0003;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Stream,
    Batch,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stream" => Ok(Mode::Stream),
            "batch" => Ok(Mode::Batch),
            other => Err(Error::invalid(
                "mode",
                format!("`{other}` is not one of stream, batch"),
            )),
        }
    }
}

/// A full experiment description; parsed from a plan file or assembled by
/// the CLI.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub mode: Mode,
    pub variants: Vec<Variant>,
    pub budgets: Vec<f64>,
    pub seeds: Vec<u64>,
    pub folds: Option<usize>,
    /// Ball cap applied by the `VarUnFix` variant.
    pub max_balls: usize,
    pub tau: f64,
    /// Shuffle the stream by seed (disable for order-sensitive benchmarks
    /// such as drift streams).
    pub permute: bool,
    pub dataset: Option<PathBuf>,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            mode: Mode::Stream,
            variants: Variant::ALL.to_vec(),
            budgets: DEFAULT_BUDGET_GRID.to_vec(),
            seeds: (0..10).collect(),
            folds: None,
            max_balls: DEFAULT_MAX_BALLS,
            tau: DEFAULT_TAU,
            permute: true,
            dataset: None,
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds", "at least one seed required"));
        }
        match self.mode {
            Mode::Stream => {
                if self.budgets.is_empty() {
                    return Err(Error::invalid("budgets", "stream mode needs budgets"));
                }
                for &b in &self.budgets {
                    if !(b > 0.0 && b <= 1.0) {
                        return Err(Error::invalid("budgets", format!("{b} not in (0, 1]")));
                    }
                }
            }
            Mode::Batch => {
                if let Some(k) = self.folds {
                    if k < 2 {
                        return Err(Error::invalid("folds", "K-fold needs K >= 2"));
                    }
                }
            }
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::invalid("tau", "must lie in (0, 1]"));
        }
        if self.max_balls == 0 {
            return Err(Error::invalid("max_balls", "must be positive"));
        }
        Ok(())
    }

    /// Parses the plain-text `key = value` plan format. Lists are
    /// comma-separated; `#` lines are comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut plan = ExperimentPlan::default();
        for (lineno, raw) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::data("plan", lineno, format!("expected `key = value`, found `{line}`")));
            };
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| Error::data("plan", lineno, format!("bad {what} `{value}`"));
            match key {
                "mode" => plan.mode = value.parse()?,
                "variants" => {
                    plan.variants = value
                        .split(',')
                        .map(|v| v.trim().parse())
                        .collect::<Result<_>>()?;
                }
                "budgets" => {
                    plan.budgets = value
                        .split(',')
                        .map(|v| v.trim().parse::<f64>().map_err(|_| bad("budget")))
                        .collect::<Result<_>>()?;
                }
                "seeds" => {
                    plan.seeds = value
                        .split(',')
                        .map(|v| v.trim().parse::<u64>().map_err(|_| bad("seed")))
                        .collect::<Result<_>>()?;
                }
                "folds" => plan.folds = Some(value.parse().map_err(|_| bad("fold count"))?),
                "max_balls" => plan.max_balls = value.parse().map_err(|_| bad("max_balls"))?,
                "tau" => plan.tau = value.parse().map_err(|_| bad("tau"))?,
                "permute" => plan.permute = value.parse().map_err(|_| bad("permute flag"))?,
                "dataset" => plan.dataset = Some(PathBuf::from(value)),
                other => {
                    return Err(Error::data("plan", lineno, format!("unknown key `{other}`")));
                }
            }
        }
        plan.validate()?;
        Ok(plan)
    }
}

/// Outcome of one (variant, budget, seed) stream run.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub variant: Variant,
    pub budget: f64,
    pub seed: u64,
    pub realized_query_rate: f64,
    pub online_accuracy: f64,
    pub stats: StreamStats,
}

/// One aggregated point of an accuracy-versus-query-rate curve.
#[derive(Debug, Clone)]
pub struct CurvePoint {
    pub variant: Variant,
    pub budget: f64,
    pub realized_query_rate_mean: f64,
    pub online_accuracy_mean: f64,
    pub online_accuracy_std: f64,
}

fn stream_order(n: usize, seed: u64, permute: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if permute {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ PERMUTE_SALT));
    }
    order
}

/// Runs one streaming cell on a fresh model, returning the trained model
/// alongside the cell statistics.
pub fn run_stream_cell_with_model(
    dataset: &Dataset,
    variant: Variant,
    budget: f64,
    seed: u64,
    tau: f64,
    max_balls: usize,
    permute: bool,
) -> Result<(CellResult, CoverModel)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let oracle = dataset.oracle();
    let bags: Vec<&VideoBag> = dataset.bags().collect();
    let order = stream_order(bags.len(), seed, permute);

    let config = ModelConfig {
        max_balls: (variant == Variant::VarUnFix).then_some(max_balls),
        seed: seed ^ MODEL_SALT,
        ..ModelConfig::default()
    };
    let mut model = CoverModel::new(config);
    let mut state = ActiveState::for_variant(variant, budget, tau)?;
    let mut stats = StreamStats::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for idx in order {
        stream_step(
            &mut model, &mut state, &mut stats, bags[idx], &oracle, variant, &mut rng,
        )?;
    }
    let cell = CellResult {
        variant,
        budget: state.budget, // effective budget (Full pins to 1)
        seed,
        realized_query_rate: state.query_rate(),
        online_accuracy: stats.online_accuracy,
        stats,
    };
    Ok((cell, model))
}

/// Runs one streaming cell on a fresh model.
pub fn run_stream_cell(
    dataset: &Dataset,
    variant: Variant,
    budget: f64,
    seed: u64,
    tau: f64,
    max_balls: usize,
    permute: bool,
) -> Result<CellResult> {
    run_stream_cell_with_model(dataset, variant, budget, seed, tau, max_balls, permute)
        .map(|(cell, _)| cell)
}

/// Expands the plan grid, runs every cell, and aggregates curves.
///
/// `Full` ignores the budget knob, so it contributes a single budget column
/// instead of one per grid value.
pub fn run_stream_experiment(
    plan: &ExperimentPlan,
    dataset: &Dataset,
) -> Result<(Vec<CellResult>, Vec<CurvePoint>)> {
    plan.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut jobs = Vec::new();
    for &variant in &plan.variants {
        let budgets: Vec<f64> = match variant {
            Variant::Full => vec![1.0],
            _ => plan.budgets.clone(),
        };
        for budget in budgets {
            for &seed in &plan.seeds {
                jobs.push((variant, budget, seed));
            }
        }
    }
    let cells: Vec<CellResult> = jobs
        .par_iter()
        .map(|&(variant, budget, seed)| {
            run_stream_cell(
                dataset,
                variant,
                budget,
                seed,
                plan.tau,
                plan.max_balls,
                plan.permute,
            )
        })
        .collect::<Result<_>>()?;

    let mut curves = Vec::new();
    let per_group = plan.seeds.len();
    for group in cells.chunks(per_group) {
        let accs: Vec<f64> = group.iter().map(|c| c.online_accuracy).collect();
        let rates: Vec<f64> = group.iter().map(|c| c.realized_query_rate).collect();
        curves.push(CurvePoint {
            variant: group[0].variant,
            budget: group[0].budget,
            realized_query_rate_mean: mean(&rates),
            online_accuracy_mean: mean(&accs),
            online_accuracy_std: sample_std(&accs),
        });
    }
    Ok((cells, curves))
}

/// One batch evaluation: fold index, training permutation seed, accuracy.
#[derive(Debug, Clone, Copy)]
pub struct FoldResult {
    pub fold: usize,
    pub seed: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct BatchReport {
    pub folds: Vec<FoldResult>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

/// Trains on a seed-permuted training set with every label available, then
/// scores the held-out bags without learning from them.
pub fn train_and_eval(
    train: &[&VideoBag],
    test: &[&VideoBag],
    seed: u64,
    max_balls: Option<usize>,
) -> Result<f64> {
    if train.is_empty() {
        return Err(Error::invalid("train", "no training bags"));
    }
    if test.is_empty() {
        return Err(Error::invalid("test", "fold with zero test bags"));
    }
    let config = ModelConfig {
        max_balls,
        seed: seed ^ MODEL_SALT,
        ..ModelConfig::default()
    };
    let mut model = CoverModel::new(config);
    let order = stream_order(train.len(), seed, true);
    for idx in order {
        let bag = train[idx];
        let label = bag
            .true_label()
            .ok_or_else(|| Error::OracleMiss(bag.id().to_string()))?;
        model.learn_bag(bag, label)?;
    }
    let mut correct = 0usize;
    for bag in test {
        let predicted = model.predict_label(bag)?;
        if predicted.as_deref() == bag.true_label() {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

/// Runs the batch protocol: the dataset's train/test split when present,
/// otherwise K-fold cross-validation with seed-driven fold assignment.
pub fn run_batch_experiment(plan: &ExperimentPlan, dataset: &Dataset) -> Result<BatchReport> {
    plan.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut folds = Vec::new();
    let explicit = dataset.has_split(Split::Test) && plan.folds.is_none();
    if explicit {
        let train = dataset.split_bags(Split::Train);
        let test = dataset.split_bags(Split::Test);
        let results: Vec<FoldResult> = plan
            .seeds
            .par_iter()
            .map(|&seed| {
                train_and_eval(&train, &test, seed, None).map(|accuracy| FoldResult {
                    fold: 0,
                    seed,
                    accuracy,
                })
            })
            .collect::<Result<_>>()?;
        folds.extend(results);
    } else {
        let k = plan
            .folds
            .ok_or_else(|| Error::invalid("folds", "required without an explicit test split"))?;
        let all: Vec<&VideoBag> = dataset.bags().collect();
        if all.len() < k {
            return Err(Error::invalid("folds", "fold with zero test bags"));
        }
        let mut jobs = Vec::new();
        for &seed in &plan.seeds {
            let mut order: Vec<usize> = (0..all.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ FOLD_SALT));
            for fold in 0..k {
                let lo = fold * all.len() / k;
                let hi = (fold + 1) * all.len() / k;
                let test: Vec<&VideoBag> = order[lo..hi].iter().map(|&i| all[i]).collect();
                let train: Vec<&VideoBag> = order[..lo]
                    .iter()
                    .chain(&order[hi..])
                    .map(|&i| all[i])
                    .collect();
                jobs.push((fold, seed, train, test));
            }
        }
        let results: Vec<FoldResult> = jobs
            .par_iter()
            .map(|(fold, seed, train, test)| {
                train_and_eval(train, test, *seed, None).map(|accuracy| FoldResult {
                    fold: *fold,
                    seed: *seed,
                    accuracy,
                })
            })
            .collect::<Result<_>>()?;
        folds.extend(results);
    }
    let accs: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
    Ok(BatchReport {
        mean_accuracy: mean(&accs),
        std_accuracy: sample_std(&accs),
        folds,
    })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64;
    var.sqrt()
}

/// Results CSV: one row per curve point.
pub fn curves_to_csv(curves: &[CurvePoint]) -> String {
    let mut out = String::from("# results v1\n");
    out.push_str("variant,budget,realized_query_rate_mean,online_accuracy_mean,online_accuracy_std\n");
    for c in curves {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            c.variant,
            c.budget,
            c.realized_query_rate_mean,
            c.online_accuracy_mean,
            c.online_accuracy_std
        );
    }
    out
}

/// Batch CSV: one row per (fold, seed), then a summary comment line.
pub fn batch_to_csv(report: &BatchReport) -> String {
    let mut out = String::from("# batch v1\n");
    out.push_str("fold,seed,accuracy\n");
    for f in &report.folds {
        let _ = writeln!(out, "{},{},{}", f.fold, f.seed, f.accuracy);
    }
    let _ = writeln!(
        out,
        "# summary mean={} std={}",
        report.mean_accuracy, report.std_accuracy
    );
    out
}
