//! Hyperbox fuzzy sets, the GFMM membership function and class-node union.
//!
//! A pattern is an interval `[lower, upper]` in the unit cube with a class
//! label; label `0` marks an unlabelled pattern (or box). Crisp points are
//! intervals with `lower == upper`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{GfmmError, Result};

/// Class identifier. `0` is reserved for unlabelled data.
pub type ClassId = u32;

/// Label used for unlabelled patterns and hyperboxes.
pub const UNLABELLED: ClassId = 0;

/// Slack allowed when comparing a box span against the maximum size `θ`,
/// so that spans like `0.4 - 0.1` are not rejected for `θ = 0.3`.
pub const SIZE_TOLERANCE: f64 = 1e-9;

/// An input sample `X = [X^l, X^u]` with its class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalPattern {
    lower: Vec<f64>,
    upper: Vec<f64>,
    label: ClassId,
}

impl IntervalPattern {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, label: ClassId) -> Result<Self> {
        if lower.is_empty() {
            return Err(GfmmError::InvalidPattern("pattern has no dimensions".into()));
        }
        if lower.len() != upper.len() {
            return Err(GfmmError::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        for (j, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if !(0.0..=1.0).contains(&l) || !(0.0..=1.0).contains(&u) {
                return Err(GfmmError::InvalidPattern(format!(
                    "coordinate {j} outside the unit interval: [{l}, {u}]"
                )));
            }
            if l > u {
                return Err(GfmmError::InvalidPattern(format!(
                    "lower bound exceeds upper bound in dimension {j}: {l} > {u}"
                )));
            }
        }
        Ok(Self { lower, upper, label })
    }

    /// A crisp pattern: lower and upper bounds coincide.
    pub fn point(x: Vec<f64>, label: ClassId) -> Result<Self> {
        Self::new(x.clone(), x, label)
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn label(&self) -> ClassId {
        self.label
    }

    pub fn n_dims(&self) -> usize {
        self.lower.len()
    }

    pub fn with_label(mut self, label: ClassId) -> Self {
        self.label = label;
        self
    }
}

/// A hyperbox fuzzy set with min point `V`, max point `W` and a class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperbox {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub label: ClassId,
}

impl Hyperbox {
    /// A freshly initialised box: `V = 1`, `W = 0` in every dimension, so the
    /// first adjustment snaps it onto the absorbed pattern.
    pub fn empty(n_dims: usize, label: ClassId) -> Self {
        Self {
            min: vec![1.0; n_dims],
            max: vec![0.0; n_dims],
            label,
        }
    }

    /// A box covering exactly the given pattern.
    pub fn from_pattern(pattern: &IntervalPattern) -> Self {
        Self {
            min: pattern.lower.clone(),
            max: pattern.upper.clone(),
            label: pattern.label,
        }
    }

    pub fn n_dims(&self) -> usize {
        self.min.len()
    }

    /// True while the box is still in its initial (inverted) state.
    pub fn is_empty(&self) -> bool {
        self.min.iter().zip(&self.max).any(|(v, w)| v > w)
    }

    /// Per-dimension extent `W - V`.
    pub fn spans(&self) -> impl Iterator<Item = f64> + '_ {
        self.min.iter().zip(&self.max).map(|(v, w)| w - v)
    }

    pub fn contains(&self, pattern: &IntervalPattern) -> bool {
        self.min
            .iter()
            .zip(&self.max)
            .zip(pattern.lower.iter().zip(&pattern.upper))
            .all(|((v, w), (l, u))| v <= l && u <= w)
    }

    /// Component-wise union with another box.
    pub fn union(&self, other: &Hyperbox) -> Hyperbox {
        Hyperbox {
            min: self.min.iter().zip(&other.min).map(|(a, b)| a.min(*b)).collect(),
            max: self.max.iter().zip(&other.max).map(|(a, b)| a.max(*b)).collect(),
            label: self.label,
        }
    }
}

/// The ramp threshold function `f(z, γ)` bounding `z·γ` to `[0, 1]`.
pub fn ramp(z: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(GfmmError::InvalidParameter(format!(
            "sensitivity must be positive, got {gamma}"
        )));
    }
    Ok(ramp_unchecked(z, gamma))
}

#[inline]
pub(crate) fn ramp_unchecked(z: f64, gamma: f64) -> f64 {
    (z * gamma).clamp(0.0, 1.0)
}

/// Degree-of-fit of `pattern` to `hyperbox`.
///
/// Takes the minimum over dimensions of how far the pattern's upper bound
/// sticks out above `W` and its lower bound below `V`, each passed through
/// the ramp. Equals 1 exactly when the pattern lies inside the box.
pub fn membership(hyperbox: &Hyperbox, pattern: &IntervalPattern, gamma: &[f64]) -> Result<f64> {
    let n = hyperbox.n_dims();
    for found in [pattern.n_dims(), gamma.len()] {
        if found != n {
            return Err(GfmmError::DimensionMismatch { expected: n, found });
        }
    }
    if hyperbox.is_empty() {
        return Err(GfmmError::EmptyHyperbox);
    }
    if let Some(g) = gamma.iter().find(|g| !(**g > 0.0)) {
        return Err(GfmmError::InvalidParameter(format!(
            "sensitivity must be positive, got {g}"
        )));
    }
    Ok(membership_unchecked(hyperbox, pattern, gamma))
}

#[inline]
pub(crate) fn membership_unchecked(
    hyperbox: &Hyperbox,
    pattern: &IntervalPattern,
    gamma: &[f64],
) -> f64 {
    let mut b = 1.0f64;
    for j in 0..hyperbox.min.len() {
        let above = 1.0 - ramp_unchecked(pattern.upper[j] - hyperbox.max[j], gamma[j]);
        let below = 1.0 - ramp_unchecked(hyperbox.min[j] - pattern.lower[j], gamma[j]);
        b = b.min(above).min(below);
    }
    b
}

/// Result of classifying one pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: ClassId,
    /// Class-node outputs, sorted by class id.
    pub scores: Vec<(ClassId, f64)>,
    /// Index of the box that produced the winning class score.
    pub winner: usize,
}

impl Prediction {
    pub fn score(&self, class: ClassId) -> Option<f64> {
        self.scores.iter().find(|(c, _)| *c == class).map(|(_, s)| *s)
    }
}

/// A trained GFMM network: the hyperbox layer plus the sensitivity vector.
///
/// Class connection weights are implicit in each box's label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GfmmModel {
    boxes: Vec<Hyperbox>,
    gamma: Vec<f64>,
    n_dims: usize,
}

impl GfmmModel {
    pub fn new(n_dims: usize, gamma: Vec<f64>) -> Result<Self> {
        validate_gamma(&gamma, n_dims)?;
        Ok(Self {
            boxes: Vec::new(),
            gamma,
            n_dims,
        })
    }

    pub fn from_boxes(n_dims: usize, gamma: Vec<f64>, boxes: Vec<Hyperbox>) -> Result<Self> {
        let mut model = Self::new(n_dims, gamma)?;
        for b in boxes {
            model.push(b)?;
        }
        Ok(model)
    }

    pub fn push(&mut self, hyperbox: Hyperbox) -> Result<()> {
        if hyperbox.n_dims() != self.n_dims {
            return Err(GfmmError::DimensionMismatch {
                expected: self.n_dims,
                found: hyperbox.n_dims(),
            });
        }
        self.boxes.push(hyperbox);
        Ok(())
    }

    pub fn boxes(&self) -> &[Hyperbox] {
        &self.boxes
    }

    pub(crate) fn boxes_mut(&mut self) -> &mut Vec<Hyperbox> {
        &mut self.boxes
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Class labels present among the boxes.
    pub fn classes(&self) -> BTreeSet<ClassId> {
        self.boxes.iter().map(|b| b.label).collect()
    }

    /// A copy holding only the boxes whose index satisfies `keep`.
    pub fn retain_indices(&self, mut keep: impl FnMut(usize) -> bool) -> GfmmModel {
        GfmmModel {
            boxes: self
                .boxes
                .iter()
                .enumerate()
                .filter(|(i, _)| keep(*i))
                .map(|(_, b)| b.clone())
                .collect(),
            gamma: self.gamma.clone(),
            n_dims: self.n_dims,
        }
    }

    /// Classify a pattern by the max-union of box memberships per class.
    ///
    /// Unlabelled boxes never compete. Ties between classes go to the
    /// smallest class id; ties between boxes of one class to the smallest
    /// box index.
    pub fn predict(&self, pattern: &IntervalPattern) -> Result<Prediction> {
        if pattern.n_dims() != self.n_dims {
            return Err(GfmmError::DimensionMismatch {
                expected: self.n_dims,
                found: pattern.n_dims(),
            });
        }
        // (class, score, box index), kept sorted by class
        let mut best: Vec<(ClassId, f64, usize)> = Vec::new();
        for (i, b) in self.boxes.iter().enumerate() {
            if b.label == UNLABELLED || b.is_empty() {
                continue;
            }
            let m = membership_unchecked(b, pattern, &self.gamma);
            match best.binary_search_by_key(&b.label, |e| e.0) {
                Ok(pos) => {
                    if m > best[pos].1 {
                        best[pos] = (b.label, m, i);
                    }
                }
                Err(pos) => best.insert(pos, (b.label, m, i)),
            }
        }
        let mut top: Option<(ClassId, f64, usize)> = None;
        for &entry in &best {
            if top.is_none_or(|t| entry.1 > t.1) {
                top = Some(entry);
            }
        }
        let (class, _, winner) = top.ok_or(GfmmError::EmptyModel)?;
        Ok(Prediction {
            class,
            scores: best.iter().map(|&(c, s, _)| (c, s)).collect(),
            winner,
        })
    }

    /// Fraction of labelled patterns whose predicted class differs from the label.
    pub fn error_rate(&self, patterns: &[IntervalPattern]) -> Result<f64> {
        let mut total = 0usize;
        let mut wrong = 0usize;
        for p in patterns.iter().filter(|p| p.label() != UNLABELLED) {
            total += 1;
            if self.predict(p)?.class != p.label() {
                wrong += 1;
            }
        }
        if total == 0 {
            return Err(GfmmError::EmptyInput("no labelled patterns to score".into()));
        }
        Ok(wrong as f64 / total as f64)
    }
}

pub(crate) fn validate_gamma(gamma: &[f64], n_dims: usize) -> Result<()> {
    if n_dims == 0 {
        return Err(GfmmError::InvalidParameter("model needs at least one dimension".into()));
    }
    if gamma.len() != n_dims {
        return Err(GfmmError::DimensionMismatch {
            expected: n_dims,
            found: gamma.len(),
        });
    }
    if let Some(g) = gamma.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
        return Err(GfmmError::InvalidParameter(format!(
            "sensitivity must be positive, got {g}"
        )));
    }
    Ok(())
}

/// Default sensitivity: `γ_j = 1`, a linear ramp across the unit cube.
pub fn default_gamma(n_dims: usize) -> Vec<f64> {
    vec![1.0; n_dims]
}
