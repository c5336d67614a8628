//! Agglomerative GFMM learning.
//!
//! Both trainers start from one point box per (distinct) training pattern and
//! repeatedly merge pairs of class-compatible boxes. A merge is admissible
//! only when the merged box
//!
//! * (a) overlaps no box of another class,
//! * (b) stays within the maximum size `θ` in every dimension,
//! * (c) comes from a pair whose similarity is at least `σ`,
//! * (d) joins boxes of the same class, or where at least one is unlabelled.
//!
//! [`train_agglo_sm`] always takes the globally most similar admissible pair
//! from the full similarity matrix. [`train_agglo_2`] sweeps the boxes in
//! order and merges each with its most similar admissible partner, which
//! avoids keeping the full matrix.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{GfmmError, Result};
use crate::hyperbox::{
    ramp_unchecked, ClassId, GfmmModel, Hyperbox, IntervalPattern, SIZE_TOLERANCE, UNLABELLED,
};
use crate::online::{overlap_test, validate_data};

/// Box-to-box similarity used to rank merge candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimilarityMeasure {
    /// Smaller of the two directed max/min-point similarities.
    MidMin,
    /// Larger of the two directed max/min-point similarities.
    MidMax,
    /// Based on the smallest gap between the boxes.
    Shortest,
    /// Based on the largest possible distance between the boxes.
    Longest,
}

impl SimilarityMeasure {
    pub const ALL: [SimilarityMeasure; 4] = [
        SimilarityMeasure::MidMin,
        SimilarityMeasure::MidMax,
        SimilarityMeasure::Shortest,
        SimilarityMeasure::Longest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SimilarityMeasure::MidMin => "mid-min",
            SimilarityMeasure::MidMax => "mid-max",
            SimilarityMeasure::Shortest => "shortest",
            SimilarityMeasure::Longest => "longest",
        }
    }
}

impl fmt::Display for SimilarityMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SimilarityMeasure {
    type Err = GfmmError;

    fn from_str(s: &str) -> Result<Self> {
        SimilarityMeasure::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| GfmmError::InvalidParameter(format!("unknown similarity measure `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggloConfig {
    pub theta: f64,
    /// Minimum similarity for a merge.
    pub sigma: f64,
    pub measure: SimilarityMeasure,
}

impl AggloConfig {
    pub fn new(theta: f64, sigma: f64, measure: SimilarityMeasure) -> Self {
        Self { theta, sigma, measure }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(GfmmError::InvalidParameter(format!(
                "theta must lie in (0, 1], got {}",
                self.theta
            )));
        }
        if !(0.0..=1.0).contains(&self.sigma) {
            return Err(GfmmError::InvalidParameter(format!(
                "sigma must lie in [0, 1], got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Similarity of two boxes under `measure`, in `[0, 1]`.
pub fn similarity(a: &Hyperbox, b: &Hyperbox, measure: SimilarityMeasure, gamma: &[f64]) -> Result<f64> {
    let n = a.n_dims();
    for found in [b.n_dims(), gamma.len()] {
        if found != n {
            return Err(GfmmError::DimensionMismatch { expected: n, found });
        }
    }
    if a.is_empty() || b.is_empty() {
        return Err(GfmmError::EmptyHyperbox);
    }
    Ok(similarity_unchecked(a, b, measure, gamma))
}

/// `min_j min(1 - f(x_j), 1 - f(y_j))` for the per-dimension terms `(x_j, y_j)`.
fn directed(gamma: &[f64], terms: impl Fn(usize) -> (f64, f64)) -> f64 {
    let mut s = 1.0f64;
    for (j, &g) in gamma.iter().enumerate() {
        let (x, y) = terms(j);
        s = s.min(1.0 - ramp_unchecked(x, g)).min(1.0 - ramp_unchecked(y, g));
    }
    s
}

pub(crate) fn similarity_unchecked(a: &Hyperbox, b: &Hyperbox, measure: SimilarityMeasure, gamma: &[f64]) -> f64 {
    match measure {
        SimilarityMeasure::MidMin | SimilarityMeasure::MidMax => {
            let ab = directed(gamma, |j| (b.max[j] - a.max[j], a.min[j] - b.min[j]));
            let ba = directed(gamma, |j| (a.max[j] - b.max[j], b.min[j] - a.min[j]));
            if measure == SimilarityMeasure::MidMin {
                ab.min(ba)
            } else {
                ab.max(ba)
            }
        }
        SimilarityMeasure::Shortest => {
            directed(gamma, |j| (b.min[j] - a.max[j], a.min[j] - b.max[j]))
        }
        SimilarityMeasure::Longest => {
            directed(gamma, |j| (b.max[j] - a.min[j], a.max[j] - b.min[j]))
        }
    }
}

fn compatible(a: ClassId, b: ClassId) -> bool {
    a == b || a == UNLABELLED || b == UNLABELLED
}

fn merged_label(a: ClassId, b: ClassId) -> ClassId {
    if a == UNLABELLED {
        b
    } else {
        a
    }
}

fn conflicts(merged: ClassId, other: ClassId) -> bool {
    other != UNLABELLED && other != merged
}

fn within_size(a: &Hyperbox, b: &Hyperbox, theta: f64) -> bool {
    (0..a.n_dims()).all(|j| a.max[j].max(b.max[j]) - a.min[j].min(b.min[j]) <= theta + SIZE_TOLERANCE)
}

fn merge(a: &Hyperbox, b: &Hyperbox) -> Hyperbox {
    let mut m = a.union(b);
    m.label = merged_label(a.label, b.label);
    m
}

/// Check the four merge conditions for `a` and `b` against the remaining boxes.
///
/// `others` must not contain `a` or `b` themselves.
pub fn aggregation_admissible(
    a: &Hyperbox,
    b: &Hyperbox,
    others: &[Hyperbox],
    config: &AggloConfig,
    gamma: &[f64],
) -> bool {
    compatible(a.label, b.label)
        && within_size(a, b, config.theta)
        && similarity_unchecked(a, b, config.measure, gamma) >= config.sigma
        && {
            let m = merge(a, b);
            others
                .iter()
                .filter(|o| conflicts(m.label, o.label))
                .all(|o| overlap_test(&m, o).is_none())
        }
}

/// One merge performed during agglomerative training. Indices refer to the
/// initial box list ([`AggloOutcome::initial`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub kept: usize,
    pub removed: usize,
    pub similarity: f64,
    pub merged: Hyperbox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggloOutcome {
    pub model: GfmmModel,
    /// Point boxes the run started from, one per distinct training pattern.
    pub initial: Vec<Hyperbox>,
    /// Number of training patterns collapsed onto each initial box.
    pub multiplicity: Vec<usize>,
    pub merges: Vec<MergeRecord>,
}

/// Working set of boxes with tombstones; indices stay stable across merges.
struct BoxPool {
    boxes: Vec<Hyperbox>,
    alive: Vec<bool>,
    gamma: Vec<f64>,
    config: AggloConfig,
    merges: Vec<MergeRecord>,
}

impl BoxPool {
    fn new(data: &[IntervalPattern], config: &AggloConfig, gamma: &[f64]) -> Result<(Self, Vec<usize>)> {
        config.validate()?;
        validate_data(data, gamma)?;
        let mut boxes: Vec<Hyperbox> = Vec::new();
        let mut multiplicity: Vec<usize> = Vec::new();
        let mut seen = std::collections::HashMap::new();
        for p in data {
            let key: (Vec<u64>, Vec<u64>, ClassId) = (
                p.lower().iter().map(|x| x.to_bits()).collect(),
                p.upper().iter().map(|x| x.to_bits()).collect(),
                p.label(),
            );
            match seen.get(&key) {
                Some(&i) => multiplicity[i] += 1,
                None => {
                    seen.insert(key, boxes.len());
                    boxes.push(Hyperbox::from_pattern(p));
                    multiplicity.push(1);
                }
            }
        }
        let alive = vec![true; boxes.len()];
        Ok((
            Self {
                boxes,
                alive,
                gamma: gamma.to_vec(),
                config: config.clone(),
                merges: Vec::new(),
            },
            multiplicity,
        ))
    }

    fn similarity(&self, i: usize, k: usize) -> f64 {
        similarity_unchecked(&self.boxes[i], &self.boxes[k], self.config.measure, &self.gamma)
    }

    fn compatible(&self, i: usize, k: usize) -> bool {
        compatible(self.boxes[i].label, self.boxes[k].label)
    }

    /// Conditions (a) and (b); (c) and (d) are enforced by candidate ordering
    /// and filtering in the trainers.
    fn admissible(&self, i: usize, k: usize) -> bool {
        let (a, b) = (&self.boxes[i], &self.boxes[k]);
        if !within_size(a, b, self.config.theta) {
            return false;
        }
        let m = merge(a, b);
        self.boxes.iter().enumerate().all(|(x, o)| {
            x == i || x == k || !self.alive[x] || !conflicts(m.label, o.label) || overlap_test(&m, o).is_none()
        })
    }

    fn merge_into(&mut self, keep: usize, remove: usize, similarity: f64) {
        let merged = merge(&self.boxes[keep], &self.boxes[remove]);
        self.boxes[keep] = merged.clone();
        self.alive[remove] = false;
        self.merges.push(MergeRecord {
            kept: keep,
            removed: remove,
            similarity,
            merged,
        });
    }

    fn finish(self, initial: Vec<Hyperbox>, multiplicity: Vec<usize>) -> Result<AggloOutcome> {
        let n = self.gamma.len();
        let boxes = self
            .boxes
            .into_iter()
            .zip(&self.alive)
            .filter(|(_, a)| **a)
            .map(|(b, _)| b)
            .collect();
        Ok(AggloOutcome {
            model: GfmmModel::from_boxes(n, self.gamma, boxes)?,
            initial,
            multiplicity,
            merges: self.merges,
        })
    }
}

/// Agglomerative training driven by the full similarity matrix.
///
/// Each step sorts all live class-compatible pairs by similarity (ties by
/// lower first index, then lower second index) and merges the first
/// admissible pair into its lower-indexed box; only that box's similarity
/// row is recomputed afterwards.
pub fn train_agglo_sm(data: &[IntervalPattern], config: &AggloConfig, gamma: &[f64]) -> Result<AggloOutcome> {
    let (mut pool, multiplicity) = BoxPool::new(data, config, gamma)?;
    let initial = pool.boxes.clone();
    let m = pool.boxes.len();
    let mut sim = vec![f64::NAN; m * m];
    // pairs that already failed (a) or (b); they cannot become admissible
    // again unless one of their boxes changes
    let mut rejected = vec![false; m * m];
    for i in 0..m {
        for k in (i + 1)..m {
            if pool.compatible(i, k) {
                sim[i * m + k] = pool.similarity(i, k);
            }
        }
    }

    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(m * (m.saturating_sub(1)) / 2);
    loop {
        pairs.clear();
        for i in (0..m).filter(|&i| pool.alive[i]) {
            for k in ((i + 1)..m).filter(|&k| pool.alive[k]) {
                let s = sim[i * m + k];
                if s >= config.sigma && !rejected[i * m + k] {
                    pairs.push((s, i, k));
                }
            }
        }
        pairs.sort_unstable_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

        let mut chosen = None;
        for &(s, i, k) in &pairs {
            if pool.admissible(i, k) {
                chosen = Some((s, i, k));
                break;
            }
            rejected[i * m + k] = true;
        }
        let Some((s, i, k)) = chosen else { break };
        pool.merge_into(i, k, s);

        for x in (0..m).filter(|&x| x != i && pool.alive[x]) {
            let (lo, hi) = (x.min(i), x.max(i));
            rejected[lo * m + hi] = false;
            sim[lo * m + hi] = if pool.compatible(lo, hi) {
                pool.similarity(lo, hi)
            } else {
                f64::NAN
            };
        }
    }
    pool.finish(initial, multiplicity)
}

/// Accelerated agglomerative training without the full similarity matrix.
///
/// Sweeps the live boxes in index order; each box is merged in place with
/// the most similar partner that passes all merge conditions, falling back
/// to the next most similar one on failure. Sweeps repeat until one
/// completes without any merge.
pub fn train_agglo_2(data: &[IntervalPattern], config: &AggloConfig, gamma: &[f64]) -> Result<AggloOutcome> {
    let (mut pool, multiplicity) = BoxPool::new(data, config, gamma)?;
    let initial = pool.boxes.clone();
    let m = pool.boxes.len();
    let mut partners: Vec<(f64, usize)> = Vec::with_capacity(m);
    loop {
        let mut merged_any = false;
        for i in 0..m {
            if !pool.alive[i] {
                continue;
            }
            partners.clear();
            for k in (0..m).filter(|&k| k != i && pool.alive[k] && pool.compatible(i, k)) {
                let s = pool.similarity(i, k);
                if s >= config.sigma {
                    partners.push((s, k));
                }
            }
            partners.sort_unstable_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
            if let Some(&(s, k)) = partners.iter().find(|&&(_, k)| pool.admissible(i, k)) {
                pool.merge_into(i, k, s);
                merged_any = true;
            }
        }
        if !merged_any {
            break;
        }
    }
    pool.finish(initial, multiplicity)
}

/// Replay a merge log from the initial boxes, re-checking every merge
/// condition at the moment the merge was made.
pub fn verify_merges(
    initial: &[Hyperbox],
    merges: &[MergeRecord],
    config: &AggloConfig,
    gamma: &[f64],
) -> std::result::Result<(), String> {
    let mut boxes: Vec<Option<Hyperbox>> = initial.iter().cloned().map(Some).collect();
    for (step, rec) in merges.iter().enumerate() {
        let (Some(a), Some(b)) = (
            boxes.get(rec.kept).cloned().flatten(),
            boxes.get(rec.removed).cloned().flatten(),
        ) else {
            return Err(format!("merge {step}: refers to a removed box"));
        };
        let others: Vec<Hyperbox> = boxes
            .iter()
            .enumerate()
            .filter(|(x, _)| *x != rec.kept && *x != rec.removed)
            .filter_map(|(_, b)| b.clone())
            .collect();
        if !aggregation_admissible(&a, &b, &others, config, gamma) {
            return Err(format!("merge {step}: boxes {} and {} were not admissible", rec.kept, rec.removed));
        }
        let s = similarity_unchecked(&a, &b, config.measure, gamma);
        if s != rec.similarity {
            return Err(format!("merge {step}: recorded similarity {} != {s}", rec.similarity));
        }
        let m = merge(&a, &b);
        if m != rec.merged {
            return Err(format!("merge {step}: merged box differs from the union"));
        }
        boxes[rec.kept] = Some(m);
        boxes[rec.removed] = None;
    }
    Ok(())
}
