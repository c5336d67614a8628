//! Experimental protocol: stratified folds, grid search with inner
//! cross-validation, outer-fold benchmarking, presentation-order studies
//! and training-time measurement.
//!
//! Grid cells and folds run on the current rayon pool. Results are collected
//! by cell index, so the outcome does not depend on scheduling.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agglo::{train_agglo_2, train_agglo_sm, AggloConfig, SimilarityMeasure};
use crate::dataset::{Dataset, Normalizer};
use crate::error::{GfmmError, Result};
use crate::hyperbox::{ClassId, GfmmModel, Hyperbox, IntervalPattern};
use crate::online::{train_online, train_online_adaptive, OnlineConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Online,
    OnlineAdaptive,
    AggloSm,
    Agglo2,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Online,
        Algorithm::OnlineAdaptive,
        Algorithm::AggloSm,
        Algorithm::Agglo2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Online => "online",
            Algorithm::OnlineAdaptive => "online-adaptive",
            Algorithm::AggloSm => "agglo-sm",
            Algorithm::Agglo2 => "agglo-2",
        }
    }

    pub fn is_agglomerative(self) -> bool {
        matches!(self, Algorithm::AggloSm | Algorithm::Agglo2)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = GfmmError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| GfmmError::InvalidParameter(format!("unknown algorithm {s:?}")))
    }
}

/// Everything needed to train one model with any of the algorithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub theta: f64,
    pub theta_min: f64,
    pub phi: f64,
    pub max_passes: usize,
    pub sigma: f64,
    pub measure: SimilarityMeasure,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let online = OnlineConfig::default();
        Self {
            algorithm: Algorithm::Online,
            theta: online.theta,
            theta_min: online.theta_min,
            phi: online.phi,
            max_passes: online.max_passes,
            sigma: 0.0,
            measure: SimilarityMeasure::Longest,
        }
    }
}

impl TrainConfig {
    pub fn new(algorithm: Algorithm, theta: f64) -> Self {
        Self { algorithm, theta, ..Self::default() }
    }

    pub fn online_config(&self) -> OnlineConfig {
        OnlineConfig {
            theta: self.theta,
            adaptive: self.algorithm == Algorithm::OnlineAdaptive,
            theta_min: self.theta_min,
            phi: self.phi,
            max_passes: self.max_passes,
        }
    }

    pub fn agglo_config(&self) -> AggloConfig {
        AggloConfig::new(self.theta, self.sigma, self.measure)
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithm.is_agglomerative() {
            self.agglo_config().validate()
        } else {
            self.online_config().validate()
        }
    }
}

pub fn train(data: &[IntervalPattern], config: &TrainConfig, gamma: &[f64]) -> Result<GfmmModel> {
    Ok(match config.algorithm {
        Algorithm::Online => train_online(data, &config.online_config(), gamma)?.model,
        Algorithm::OnlineAdaptive => train_online_adaptive(data, &config.online_config(), gamma)?.model,
        Algorithm::AggloSm => train_agglo_sm(data, &config.agglo_config(), gamma)?.model,
        Algorithm::Agglo2 => train_agglo_2(data, &config.agglo_config(), gamma)?.model,
    })
}

/// Train and measure the wall-clock seconds spent in training alone.
pub fn timed_run(data: &[IntervalPattern], config: &TrainConfig, gamma: &[f64]) -> Result<(GfmmModel, f64)> {
    let start = Instant::now();
    let model = train(data, config, gamma)?;
    Ok((model, start.elapsed().as_secs_f64()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FoldStrategy {
    Stratified,
}

/// Assignment of every sample to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub strategy: FoldStrategy,
}

impl FoldPlan {
    pub fn fold(&self, f: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == f).collect()
    }

    /// Indices of every sample outside fold `f`.
    pub fn rest(&self, f: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] != f).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }

    /// The plan restricted to `indices`, with fold ids renumbered densely.
    pub fn restrict(&self, indices: &[usize]) -> FoldPlan {
        let mut present: Vec<usize> = indices.iter().map(|&i| self.assignments[i]).collect();
        present.sort_unstable();
        present.dedup();
        FoldPlan {
            k: present.len(),
            assignments: indices
                .iter()
                .map(|&i| present.binary_search(&self.assignments[i]).unwrap())
                .collect(),
            strategy: self.strategy,
        }
    }
}

/// Stratified k-fold split.
///
/// Each class is shuffled with the seeded generator, classes are laid end
/// to end in label order, and position `p` goes to fold `p mod k`. Per-class
/// counts in any two folds differ by at most one.
pub fn split_folds(labels: &[ClassId], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(GfmmError::InvalidParameter(format!("need at least 2 folds, got {k}")));
    }
    if k > labels.len() {
        return Err(GfmmError::InvalidParameter(format!(
            "cannot split {} samples into {k} folds",
            labels.len()
        )));
    }
    let mut classes: Vec<ClassId> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0; labels.len()];
    let mut pos = 0;
    for c in classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if members.len() < k {
            warn!("class {c} has {} samples, fewer than the {k} folds", members.len());
        }
        members.shuffle(&mut rng);
        for i in members {
            assignments[i] = pos % k;
            pos += 1;
        }
    }
    Ok(FoldPlan { k, assignments, strategy: FoldStrategy::Stratified })
}

/// Hyperparameter lists searched by [`grid_search`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub thetas: Vec<f64>,
    /// Only used by the agglomerative algorithms.
    pub sigmas: Vec<f64>,
    /// Only used by the agglomerative algorithms.
    pub measures: Vec<SimilarityMeasure>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            thetas: vec![
                0.06, 0.1, 0.16, 0.2, 0.26, 0.3, 0.36, 0.4, 0.46, 0.5, 0.56, 0.6, 0.66, 0.7, 0.76, 0.8,
            ],
            sigmas: vec![0.0],
            measures: vec![SimilarityMeasure::Longest],
        }
    }
}

impl GridSpec {
    pub fn single(theta: f64, sigma: f64, measure: SimilarityMeasure) -> Self {
        Self { thetas: vec![theta], sigmas: vec![sigma], measures: vec![measure] }
    }

    pub fn validate(&self, algorithm: Algorithm) -> Result<()> {
        if self.cells(algorithm).is_empty() {
            return Err(GfmmError::InvalidParameter("grid has no cells".into()));
        }
        if let Some(t) = self.thetas.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(GfmmError::InvalidParameter(format!("grid theta {t} outside (0, 1]")));
        }
        if let Some(s) = self.sigmas.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(GfmmError::InvalidParameter(format!("grid sigma {s} outside [0, 1]")));
        }
        Ok(())
    }

    /// Cells in enumeration order: θ outermost, then σ, then measure.
    pub fn cells(&self, algorithm: Algorithm) -> Vec<GridCell> {
        let mut cells = Vec::new();
        for &theta in &self.thetas {
            if algorithm.is_agglomerative() {
                for &sigma in &self.sigmas {
                    for &measure in &self.measures {
                        cells.push(GridCell { theta, sigma: Some(sigma), measure: Some(measure) });
                    }
                }
            } else {
                cells.push(GridCell { theta, sigma: None, measure: None });
            }
        }
        cells
    }

    fn measure_rank(&self, m: Option<SimilarityMeasure>) -> usize {
        m.and_then(|m| self.measures.iter().position(|&x| x == m)).unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub theta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measure: Option<SimilarityMeasure>,
}

impl GridCell {
    pub fn apply(&self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            theta: self.theta,
            sigma: self.sigma.unwrap_or(base.sigma),
            measure: self.measure.unwrap_or(base.measure),
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: GridCell,
    pub fold_errors: Vec<f64>,
    pub mean_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub cells: Vec<CellResult>,
    /// Index into `cells` of the selected cell.
    pub best: usize,
}

impl GridResult {
    pub fn best_cell(&self) -> &CellResult {
        &self.cells[self.best]
    }
}

/// Mean errors closer than this count as a tie.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Grid search with the built-in trainers.
pub fn grid_search(
    data: &[IntervalPattern],
    plan: &FoldPlan,
    grid: &GridSpec,
    base: &TrainConfig,
    gamma: &[f64],
) -> Result<GridResult> {
    grid_search_with(data, plan, grid, base, |train_set, cfg| train(train_set, cfg, gamma))
}

/// Grid search with a caller-supplied trainer.
///
/// Every cell is scored by rotating each fold of `plan` as the validation
/// set and training on the others. The cell with the lowest mean validation
/// error wins; ties go to the smaller θ, then the smaller σ, then the
/// measure listed first.
pub fn grid_search_with<F>(
    data: &[IntervalPattern],
    plan: &FoldPlan,
    grid: &GridSpec,
    base: &TrainConfig,
    trainer: F,
) -> Result<GridResult>
where
    F: Fn(&[IntervalPattern], &TrainConfig) -> Result<GfmmModel> + Sync,
{
    grid.validate(base.algorithm)?;
    if plan.assignments.len() != data.len() {
        return Err(GfmmError::DimensionMismatch { expected: data.len(), found: plan.assignments.len() });
    }
    if plan.k < 2 {
        return Err(GfmmError::InvalidParameter("grid search needs at least 2 inner folds".into()));
    }
    let cells = grid.cells(base.algorithm);
    let splits: Vec<(Vec<IntervalPattern>, Vec<IntervalPattern>)> = (0..plan.k)
        .map(|f| {
            let pick = |idx: Vec<usize>| idx.into_iter().map(|i| data[i].clone()).collect();
            (pick(plan.rest(f)), pick(plan.fold(f)))
        })
        .collect();
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..plan.k).map(move |f| (c, f))).collect();
    let errors: Vec<f64> = jobs
        .par_iter()
        .map(|&(c, f)| {
            let cfg = cells[c].apply(base);
            let (train_set, validation) = &splits[f];
            trainer(train_set, &cfg)?.error_rate(validation)
        })
        .collect::<Result<_>>()?;

    let results: Vec<CellResult> = cells
        .iter()
        .enumerate()
        .map(|(c, &cell)| {
            let fold_errors = errors[c * plan.k..(c + 1) * plan.k].to_vec();
            let mean_error = fold_errors.iter().sum::<f64>() / plan.k as f64;
            CellResult { cell, fold_errors, mean_error }
        })
        .collect();
    let mut best = 0;
    for i in 1..results.len() {
        if prefer(&results[i], &results[best], grid) {
            best = i;
        }
    }
    Ok(GridResult { cells: results, best })
}

/// Whether cell `a` should replace the current best `b`.
fn prefer(a: &CellResult, b: &CellResult, grid: &GridSpec) -> bool {
    let diff = a.mean_error - b.mean_error;
    if diff.abs() > TIE_TOLERANCE {
        return diff < 0.0;
    }
    let key = |c: &GridCell| (c.theta, c.sigma.unwrap_or(0.0), grid.measure_rank(c.measure));
    let (ka, kb) = (key(&a.cell), key(&b.cell));
    ka.0.total_cmp(&kb.0)
        .then(ka.1.total_cmp(&kb.1))
        .then(ka.2.cmp(&kb.2))
        .is_lt()
}

/// Outer cross-validation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub folds: usize,
    pub seed: u64,
    /// Algorithm and the parameters the grid does not override.
    pub base: TrainConfig,
    pub grid: GridSpec,
    /// Sensitivity applied to every dimension.
    pub gamma: f64,
}

/// Deterministic per-fold outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub selected: GridCell,
    pub validation_error: f64,
    pub test_error: f64,
    pub box_count: usize,
    pub grid: Vec<CellResult>,
}

/// Wall-clock costs of one outer fold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldTiming {
    pub fold: usize,
    pub train_seconds: f64,
    pub tune_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkResult {
    pub folds: Vec<FoldReport>,
    pub timings: Vec<FoldTiming>,
    pub mean_test_error: f64,
    pub mean_box_count: f64,
}

/// Outer k-fold evaluation with grid search on the training folds.
///
/// For each outer fold, normalization is fitted on the remaining folds, the
/// grid is searched by rotating those folds as validation sets, and the
/// selected configuration is retrained on all of them and scored on the
/// held-out fold.
pub fn run_benchmark(dataset: &Dataset, config: &BenchmarkConfig) -> Result<BenchmarkResult> {
    config.base.validate()?;
    let outer = split_folds(&dataset.labels, config.folds, config.seed)?;
    let gamma = vec![config.gamma; dataset.n_dims()];
    let mut folds = Vec::with_capacity(outer.k);
    let mut timings = Vec::with_capacity(outer.k);
    for f in 0..outer.k {
        let train_idx = outer.rest(f);
        let test_idx = outer.fold(f);
        let norm = Normalizer::fit(dataset, &train_idx)?;
        let train_set = norm.patterns(dataset, &train_idx)?;
        let test_set = norm.patterns(dataset, &test_idx)?;
        let inner = outer.restrict(&train_idx);

        let tune_start = Instant::now();
        let search = grid_search(&train_set, &inner, &config.grid, &config.base, &gamma)?;
        let tune_seconds = tune_start.elapsed().as_secs_f64();

        let best = search.best_cell().clone();
        let (model, train_seconds) = timed_run(&train_set, &best.cell.apply(&config.base), &gamma)?;
        folds.push(FoldReport {
            fold: f,
            n_train: train_set.len(),
            n_test: test_set.len(),
            selected: best.cell,
            validation_error: best.mean_error,
            test_error: model.error_rate(&test_set)?,
            box_count: model.len(),
            grid: search.cells,
        });
        timings.push(FoldTiming { fold: f, train_seconds, tune_seconds });
    }
    let k = folds.len() as f64;
    Ok(BenchmarkResult {
        mean_test_error: folds.iter().map(|r| r.test_error).sum::<f64>() / k,
        mean_box_count: folds.iter().map(|r| r.box_count as f64).sum::<f64>() / k,
        folds,
        timings,
    })
}

/// One training run in a presentation-order study.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderRun {
    pub order: Vec<usize>,
    pub model: GfmmModel,
    pub box_count: usize,
    pub test_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderStudy {
    pub runs: Vec<OrderRun>,
    /// Sample standard deviations across runs.
    pub box_count_std: f64,
    pub test_error_std: f64,
    /// Every run produced the same set of hyperboxes.
    pub identical_models: bool,
}

/// Train on `n_shuffles` seeded permutations of `train_set` and summarize the spread.
pub fn order_stability_experiment(
    train_set: &[IntervalPattern],
    test_set: &[IntervalPattern],
    config: &TrainConfig,
    gamma: &[f64],
    n_shuffles: usize,
    seed: u64,
) -> Result<OrderStudy> {
    if n_shuffles < 2 {
        return Err(GfmmError::InvalidParameter("need at least 2 shuffles".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let orders: Vec<Vec<usize>> = (0..n_shuffles)
        .map(|_| {
            let mut o: Vec<usize> = (0..train_set.len()).collect();
            o.shuffle(&mut rng);
            o
        })
        .collect();
    order_study_with_orders(train_set, test_set, config, gamma, &orders)
}

/// Order study over explicit permutations of `train_set`.
pub fn order_study_with_orders(
    train_set: &[IntervalPattern],
    test_set: &[IntervalPattern],
    config: &TrainConfig,
    gamma: &[f64],
    orders: &[Vec<usize>],
) -> Result<OrderStudy> {
    if orders.len() < 2 {
        return Err(GfmmError::InvalidParameter("need at least 2 orders".into()));
    }
    for o in orders {
        let mut sorted = o.clone();
        sorted.sort_unstable();
        if sorted != (0..train_set.len()).collect::<Vec<_>>() {
            return Err(GfmmError::InvalidParameter("order is not a permutation of the training set".into()));
        }
    }
    let runs: Vec<OrderRun> = orders
        .par_iter()
        .map(|order| {
            let data: Vec<IntervalPattern> = order.iter().map(|&i| train_set[i].clone()).collect();
            let model = train(&data, config, gamma)?;
            Ok(OrderRun {
                order: order.clone(),
                box_count: model.len(),
                test_error: model.error_rate(test_set)?,
                model,
            })
        })
        .collect::<Result<_>>()?;
    let first = canonical_boxes(&runs[0].model);
    let identical_models = runs.iter().all(|r| canonical_boxes(&r.model) == first);
    Ok(OrderStudy {
        box_count_std: sample_std(&runs.iter().map(|r| r.box_count as f64).collect::<Vec<_>>()),
        test_error_std: sample_std(&runs.iter().map(|r| r.test_error).collect::<Vec<_>>()),
        identical_models,
        runs,
    })
}

/// A seeded permutation of `0..n`.
pub fn shuffled_order(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

/// Boxes sorted into a canonical order so models can be compared as sets.
pub fn canonical_boxes(model: &GfmmModel) -> Vec<Hyperbox> {
    let mut boxes = model.boxes().to_vec();
    boxes.sort_by(|a, b| {
        a.label.cmp(&b.label).then_with(|| {
            a.min
                .iter()
                .chain(&a.max)
                .zip(b.min.iter().chain(&b.max))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    boxes
}

pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 || xs.iter().all(|&x| x == xs[0]) {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}
