//! Incremental (online) GFMM learning.
//!
//! Each pattern either expands the best compatible hyperbox that can grow to
//! cover it within the maximum size `θ`, or seeds a new hyperbox. Every
//! adjusted box is then tested for overlap against boxes of other classes and
//! contracted along the single dimension of smallest overlap.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{GfmmError, Result};
use crate::hyperbox::{
    membership_unchecked, validate_gamma, GfmmModel, Hyperbox, IntervalPattern, SIZE_TOLERANCE,
    UNLABELLED,
};

/// Hyperparameters for online training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineConfig {
    /// Maximum hyperbox size.
    pub theta: f64,
    /// Shrink `theta` between passes until the training set is learned.
    pub adaptive: bool,
    pub theta_min: f64,
    /// Decay coefficient for adaptive mode: `θ ← φ·θ`.
    pub phi: f64,
    pub max_passes: usize,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        Self {
            theta: 0.26,
            adaptive: false,
            theta_min: 0.01,
            phi: 0.9,
            max_passes: 100,
        }
    }
}

impl OnlineConfig {
    pub fn fixed(theta: f64) -> Self {
        Self {
            theta,
            ..Self::default()
        }
    }

    pub fn adaptive(theta: f64, theta_min: f64, phi: f64) -> Self {
        Self {
            theta,
            adaptive: true,
            theta_min,
            phi,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(GfmmError::InvalidParameter(format!(
                "theta must lie in (0, 1], got {}",
                self.theta
            )));
        }
        if self.adaptive {
            if !(self.theta_min > 0.0 && self.theta_min <= self.theta) {
                return Err(GfmmError::InvalidParameter(format!(
                    "theta_min must lie in (0, theta], got {}",
                    self.theta_min
                )));
            }
            if !(0.0..=1.0).contains(&self.phi) {
                return Err(GfmmError::InvalidParameter(format!(
                    "phi must lie in [0, 1], got {}",
                    self.phi
                )));
            }
        }
        if self.max_passes == 0 {
            return Err(GfmmError::InvalidParameter("max_passes must be positive".into()));
        }
        Ok(())
    }
}

/// The four ways two intervals can overlap in one dimension, seen from the
/// expanded box `a` against box `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OverlapCase {
    /// `a` starts first and `b` ends last.
    LowerStraddle = 1,
    /// `b` starts first and `a` ends last.
    UpperStraddle = 2,
    /// `a` contains `b`.
    AContainsB = 3,
    /// `b` contains `a`.
    BContainsA = 4,
}

impl OverlapCase {
    pub fn id(self) -> u8 {
        self as u8
    }
}

/// Outcome of a positive overlap test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Overlap {
    pub dim: usize,
    pub case: OverlapCase,
    pub width: f64,
}

/// Size test: can `hyperbox` grow to cover `pattern` within `theta`?
pub fn can_expand(hyperbox: &Hyperbox, pattern: &IntervalPattern, theta: f64) -> Result<bool> {
    check_dims(hyperbox.n_dims(), pattern.n_dims())?;
    Ok(fits(hyperbox, pattern, theta))
}

fn fits(hyperbox: &Hyperbox, pattern: &IntervalPattern, theta: f64) -> bool {
    (0..hyperbox.n_dims()).all(|j| {
        hyperbox.max[j].max(pattern.upper()[j]) - hyperbox.min[j].min(pattern.lower()[j]) <= theta + SIZE_TOLERANCE
    })
}

/// Grow `hyperbox` to cover `pattern`.
pub fn expand(hyperbox: &Hyperbox, pattern: &IntervalPattern) -> Result<Hyperbox> {
    check_dims(hyperbox.n_dims(), pattern.n_dims())?;
    let mut out = hyperbox.clone();
    expand_in_place(&mut out, pattern);
    Ok(out)
}

fn expand_in_place(hyperbox: &mut Hyperbox, pattern: &IntervalPattern) {
    for j in 0..hyperbox.n_dims() {
        hyperbox.min[j] = hyperbox.min[j].min(pattern.lower()[j]);
        hyperbox.max[j] = hyperbox.max[j].max(pattern.upper()[j]);
    }
}

/// Overlap of one dimension, or `None` when the intervals are disjoint or
/// merely touch.
///
/// A zero-width interval strictly inside the other counts as overlapping
/// (containment with positive clearance on both sides); identical point
/// intervals do not.
pub(crate) fn dim_overlap(va: f64, wa: f64, vb: f64, wb: f64) -> Option<(OverlapCase, f64)> {
    let (case, width) = if va <= vb && wb <= wa {
        (OverlapCase::AContainsB, (wb - va).min(wa - vb))
    } else if vb <= va && wa <= wb {
        (OverlapCase::BContainsA, (wa - vb).min(wb - va))
    } else if va < vb {
        (OverlapCase::LowerStraddle, wa - vb)
    } else {
        (OverlapCase::UpperStraddle, wb - va)
    };
    (width > 0.0).then_some((case, width))
}

/// Test two boxes for overlap, dimension by dimension.
///
/// Boxes overlap only if every dimension overlaps; the reported dimension is
/// the one with the smallest overlap (ties go to the lowest index).
pub fn overlap_test(a: &Hyperbox, b: &Hyperbox) -> Option<Overlap> {
    let mut best: Option<Overlap> = None;
    for j in 0..a.n_dims() {
        let (case, width) = dim_overlap(a.min[j], a.max[j], b.min[j], b.max[j])?;
        if best.is_none_or(|o| width < o.width) {
            best = Some(Overlap { dim: j, case, width });
        }
    }
    best
}

/// Remove the overlap between `a` and `b` by adjusting dimension `dim` only.
pub fn contract(a: &Hyperbox, b: &Hyperbox, dim: usize, case: OverlapCase) -> (Hyperbox, Hyperbox) {
    let mut a = a.clone();
    let mut b = b.clone();
    contract_in_place(&mut a, &mut b, dim, case);
    (a, b)
}

fn contract_in_place(a: &mut Hyperbox, b: &mut Hyperbox, j: usize, case: OverlapCase) {
    let (va, wa, vb, wb) = (a.min[j], a.max[j], b.min[j], b.max[j]);
    match case {
        OverlapCase::LowerStraddle => {
            let mid = 0.5 * (vb + wa);
            a.max[j] = mid;
            b.min[j] = mid;
        }
        OverlapCase::UpperStraddle => {
            let mid = 0.5 * (va + wb);
            a.min[j] = mid;
            b.max[j] = mid;
        }
        OverlapCase::AContainsB => {
            if wb - va < wa - vb {
                a.min[j] = wb;
            } else {
                a.max[j] = vb;
            }
        }
        OverlapCase::BContainsA => {
            if wb - va < wa - vb {
                b.max[j] = va;
            } else {
                b.min[j] = wa;
            }
        }
    }
}

/// Why adaptive training stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    /// Single pass in fixed-size mode.
    SinglePass,
    /// No training pattern is misclassified.
    Converged,
    /// The next `θ` would fall below `θ_min`.
    ThetaMinReached,
    /// Safety bound on passes hit with training errors remaining.
    MaxPassesReached,
}

/// Trained model plus training diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineOutcome {
    pub model: GfmmModel,
    /// Boxes seeded by a pattern that is itself wider than `θ`.
    pub oversized: Vec<usize>,
    pub passes: usize,
    /// `θ` used on each pass.
    pub thetas: Vec<f64>,
    pub stop: StopReason,
    /// Fraction of labelled training patterns misclassified at the end.
    pub training_error: f64,
}

/// One presentation of `data` at a fixed maximum hyperbox size.
pub fn train_online(data: &[IntervalPattern], config: &OnlineConfig, gamma: &[f64]) -> Result<OnlineOutcome> {
    config.validate()?;
    let n = validate_data(data, gamma)?;
    let mut trainer = OnlineTrainer::new(GfmmModel::new(n, gamma.to_vec())?);
    for p in data {
        trainer.present(p, config.theta);
    }
    let training_error = misclassified(&trainer.model, data).len() as f64 / labelled_count(data);
    Ok(OnlineOutcome {
        model: trainer.model,
        oversized: trainer.oversized,
        passes: 1,
        thetas: vec![config.theta],
        stop: StopReason::SinglePass,
        training_error,
    })
}

/// Online training with a shrinking maximum hyperbox size.
///
/// The first pass presents every pattern at `θ`; each later pass keeps the
/// model and re-presents only the currently misclassified patterns at
/// `φ·θ`. Stops once the training set is learned, `θ` drops below
/// `θ_min`, or `max_passes` is reached.
pub fn train_online_adaptive(
    data: &[IntervalPattern],
    config: &OnlineConfig,
    gamma: &[f64],
) -> Result<OnlineOutcome> {
    config.validate()?;
    let n = validate_data(data, gamma)?;
    let mut trainer = OnlineTrainer::new(GfmmModel::new(n, gamma.to_vec())?);
    let mut theta = config.theta;
    let mut thetas = Vec::new();
    let mut pending: Vec<usize> = (0..data.len()).collect();
    let mut passes = 0;
    let stop = loop {
        thetas.push(theta);
        for &i in &pending {
            trainer.present(&data[i], theta);
        }
        passes += 1;
        pending = misclassified(&trainer.model, data);
        if pending.is_empty() {
            break StopReason::Converged;
        }
        if passes >= config.max_passes {
            warn!(
                "adaptive training stopped after {passes} passes with {} misclassified patterns",
                pending.len()
            );
            break StopReason::MaxPassesReached;
        }
        theta *= config.phi;
        if theta < config.theta_min {
            break StopReason::ThetaMinReached;
        }
    };
    let training_error = pending.len() as f64 / labelled_count(data);
    Ok(OnlineOutcome {
        model: trainer.model,
        oversized: trainer.oversized,
        passes,
        thetas,
        stop,
        training_error,
    })
}

struct OnlineTrainer {
    model: GfmmModel,
    oversized: Vec<usize>,
}

impl OnlineTrainer {
    fn new(model: GfmmModel) -> Self {
        Self {
            model,
            oversized: Vec::new(),
        }
    }

    fn present(&mut self, pattern: &IntervalPattern, theta: f64) {
        let label = pattern.label();
        let gamma = self.model.gamma().to_vec();
        let boxes = self.model.boxes_mut();

        let mut candidates: Vec<(usize, f64)> = boxes
            .iter()
            .enumerate()
            .filter(|(_, b)| label == UNLABELLED || b.label == label || b.label == UNLABELLED)
            .map(|(i, b)| (i, membership_unchecked(b, pattern, &gamma)))
            .collect();
        candidates.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));

        let chosen = candidates
            .iter()
            .map(|&(i, _)| i)
            .find(|&i| fits(&boxes[i], pattern, theta));
        let index = match chosen {
            Some(i) => {
                let b = &mut boxes[i];
                expand_in_place(b, pattern);
                if b.label == UNLABELLED {
                    b.label = label;
                }
                i
            }
            None => {
                let mut b = Hyperbox::empty(pattern.n_dims(), label);
                expand_in_place(&mut b, pattern);
                if b.spans().any(|s| s > theta + SIZE_TOLERANCE) {
                    self.oversized.push(boxes.len());
                }
                boxes.push(b);
                boxes.len() - 1
            }
        };
        resolve_overlaps(boxes, index);
    }
}

/// Contract `boxes[i]` against every box it must not overlap.
fn resolve_overlaps(boxes: &mut [Hyperbox], i: usize) {
    for k in 0..boxes.len() {
        if k == i {
            continue;
        }
        let (li, lk) = (boxes[i].label, boxes[k].label);
        if li != UNLABELLED && li == lk {
            continue;
        }
        if let Some(ov) = overlap_test(&boxes[i], &boxes[k]) {
            let (a, b) = pair_mut(boxes, i, k);
            contract_in_place(a, b, ov.dim, ov.case);
        }
    }
}

fn pair_mut<T>(xs: &mut [T], i: usize, k: usize) -> (&mut T, &mut T) {
    assert!(i != k);
    if i < k {
        let (lo, hi) = xs.split_at_mut(k);
        (&mut lo[i], &mut hi[0])
    } else {
        let (lo, hi) = xs.split_at_mut(i);
        (&mut hi[0], &mut lo[k])
    }
}

/// Indices of labelled patterns the model currently gets wrong.
fn misclassified(model: &GfmmModel, data: &[IntervalPattern]) -> Vec<usize> {
    data.iter()
        .enumerate()
        .filter(|(_, p)| p.label() != UNLABELLED)
        .filter(|(_, p)| model.predict(p).map_or(true, |pred| pred.class != p.label()))
        .map(|(i, _)| i)
        .collect()
}

fn labelled_count(data: &[IntervalPattern]) -> f64 {
    data.iter().filter(|p| p.label() != UNLABELLED).count().max(1) as f64
}

pub(crate) fn validate_data(data: &[IntervalPattern], gamma: &[f64]) -> Result<usize> {
    let first = data
        .first()
        .ok_or_else(|| GfmmError::EmptyInput("training data is empty".into()))?;
    let n = first.n_dims();
    validate_gamma(gamma, n)?;
    for p in data {
        check_dims(n, p.n_dims())?;
    }
    Ok(n)
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(GfmmError::DimensionMismatch { expected, found })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn b1(v: f64, w: f64, label: u32) -> Hyperbox {
        Hyperbox {
            min: vec![v],
            max: vec![w],
            label,
        }
    }

    fn p1(l: f64, u: f64, label: u32) -> IntervalPattern {
        IntervalPattern::new(vec![l], vec![u], label).unwrap()
    }

    /// Exhaustive 1-D overlap check: sample the open intersection.
    fn intervals_overlap(va: f64, wa: f64, vb: f64, wb: f64) -> bool {
        let lo = va.max(vb);
        let hi = wa.min(wb);
        if hi > lo {
            return true;
        }
        // degenerate: a point strictly inside the other interval
        (va == wa && vb < va && va < wb) || (vb == wb && va < vb && vb < wa)
    }

    #[test]
    fn can_expand_examples() {
        let bx = b1(0.2, 0.4, 1);
        assert!(can_expand(&bx, &p1(0.1, 0.1, 1), 0.3).unwrap());
        assert!(!can_expand(&bx, &p1(0.1, 0.1, 1), 0.25).unwrap());
        let empty = Hyperbox::empty(1, 1);
        assert!(can_expand(&empty, &p1(0.3, 0.5, 1), 0.2).unwrap());
        assert!(can_expand(&Hyperbox::empty(2, 1), &p1(0.3, 0.5, 1), 0.2).is_err());
    }

    #[test]
    fn expand_examples() {
        let e = expand(&Hyperbox::empty(1, 0), &p1(0.3, 0.5, 0)).unwrap();
        assert_eq!((e.min[0], e.max[0]), (0.3, 0.5));
        let e = expand(&b1(0.2, 0.4, 1), &p1(0.1, 0.1, 1)).unwrap();
        assert_eq!((e.min[0], e.max[0]), (0.1, 0.4));
        let e = expand(&b1(0.2, 0.4, 1), &p1(0.1, 0.6, 1)).unwrap();
        assert_eq!((e.min[0], e.max[0]), (0.1, 0.6));
    }

    #[test]
    fn overlap_examples() {
        let ov = overlap_test(&b1(0.1, 0.4, 1), &b1(0.3, 0.6, 2)).unwrap();
        assert_eq!(ov.dim, 0);
        assert_eq!(ov.case.id(), 1);
        assert_abs_diff_eq!(ov.width, 0.1, epsilon = 1e-12);
        assert!(intervals_overlap(0.1, 0.4, 0.3, 0.6));

        assert_eq!(overlap_test(&b1(0.1, 0.2, 1), &b1(0.3, 0.4, 2)), None);
        assert!(!intervals_overlap(0.1, 0.2, 0.3, 0.4));

        // overlapping in dim 0 only
        let a = Hyperbox { min: vec![0.1, 0.1], max: vec![0.4, 0.2], label: 1 };
        let b = Hyperbox { min: vec![0.3, 0.5], max: vec![0.6, 0.6], label: 2 };
        assert_eq!(overlap_test(&a, &b), None);

        // touching faces are not an overlap
        assert_eq!(overlap_test(&b1(0.1, 0.3, 1), &b1(0.3, 0.6, 2)), None);
        // identical point boxes only touch
        assert_eq!(overlap_test(&b1(0.3, 0.3, 1), &b1(0.3, 0.3, 2)), None);
        // a point strictly inside a box does overlap
        let ov = overlap_test(&b1(0.1, 0.6, 1), &b1(0.2, 0.2, 2)).unwrap();
        assert_eq!(ov.case, OverlapCase::AContainsB);
        assert_abs_diff_eq!(ov.width, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn overlap_picks_smallest_dimension_with_index_tiebreak() {
        let a = Hyperbox { min: vec![0.0, 0.0, 0.0], max: vec![0.5, 0.5, 0.5], label: 1 };
        let b = Hyperbox { min: vec![0.3, 0.4, 0.4], max: vec![0.9, 0.9, 0.9], label: 2 };
        let ov = overlap_test(&a, &b).unwrap();
        assert_eq!(ov.dim, 1);
        assert_abs_diff_eq!(ov.width, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn contract_examples() {
        let (a, b) = contract(&b1(0.1, 0.4, 1), &b1(0.3, 0.6, 2), 0, OverlapCase::LowerStraddle);
        assert_abs_diff_eq!(a.max[0], 0.35, epsilon = 1e-12);
        assert_abs_diff_eq!(b.min[0], 0.35, epsilon = 1e-12);
        assert_eq!(a.min[0], 0.1);
        assert_eq!(b.max[0], 0.6);
        assert_eq!(overlap_test(&a, &b), None);

        // containment: compare against both admissible face moves
        let a0 = b1(0.1, 0.6, 1);
        let b0 = b1(0.3, 0.4, 2);
        let ov = overlap_test(&a0, &b0).unwrap();
        assert_eq!(ov.case.id(), 3);
        let (a, b) = contract(&a0, &b0, ov.dim, ov.case);
        assert_eq!(b, b0);
        assert_eq!(overlap_test(&a, &b), None);
        let options = [b1(0.4, 0.6, 1), b1(0.1, 0.3, 1)];
        let loss = |x: &Hyperbox| (a0.max[0] - a0.min[0]) - (x.max[0] - x.min[0]);
        let best = options.iter().map(loss).fold(f64::INFINITY, f64::min);
        assert!(options.contains(&a));
        assert_abs_diff_eq!(loss(&a), best, epsilon = 1e-12);

        let (a, b) = contract(&b1(0.1, 0.3, 1), &b1(0.0, 0.9, 2), 0, OverlapCase::BContainsA);
        // moving b's lower face to 0.3 gives up less of b than moving its upper face to 0.1
        assert_eq!(a, b1(0.1, 0.3, 1));
        assert_eq!(b, b1(0.3, 0.9, 2));
    }

    #[test]
    fn single_pattern_gives_single_box() {
        let data = vec![IntervalPattern::new(vec![0.2, 0.3], vec![0.25, 0.3], 1).unwrap()];
        let out = train_online(&data, &OnlineConfig::fixed(0.3), &[1.0, 1.0]).unwrap();
        assert_eq!(out.model.len(), 1);
        assert_eq!(out.model.boxes()[0], Hyperbox::from_pattern(&data[0]));
    }

    #[test]
    fn identical_points_with_different_labels_stay_touching() {
        let data = vec![p1(0.5, 0.5, 1), p1(0.5, 0.5, 2)];
        let out = train_online(&data, &OnlineConfig::fixed(0.3), &[1.0]).unwrap();
        assert_eq!(out.model.len(), 2);
        assert_eq!(out.model.boxes()[0], b1(0.5, 0.5, 1));
        assert_eq!(out.model.boxes()[1], b1(0.5, 0.5, 2));
        assert_eq!(overlap_test(&out.model.boxes()[0], &out.model.boxes()[1]), None);
        // tie resolved toward the smaller class id
        assert_eq!(out.model.predict(&p1(0.5, 0.5, 2)).unwrap().class, 1);
    }

    #[test]
    fn new_point_inside_foreign_box_is_carved_out() {
        let data = vec![p1(0.1, 0.1, 1), p1(0.4, 0.4, 1), p1(0.3, 0.3, 2)];
        let out = train_online(&data, &OnlineConfig::fixed(0.5), &[1.0]).unwrap();
        let boxes = out.model.boxes();
        assert_eq!(boxes.len(), 2);
        assert_eq!(overlap_test(&boxes[0], &boxes[1]), None);
        assert_eq!(boxes[0], b1(0.1, 0.3, 1));
    }

    #[test]
    fn unlabelled_inputs_adjust_any_box_and_labelled_ones_claim_unlabelled_boxes() {
        let data = vec![p1(0.2, 0.2, 0), p1(0.25, 0.25, 3)];
        let out = train_online(&data, &OnlineConfig::fixed(0.2), &[1.0]).unwrap();
        assert_eq!(out.model.boxes(), &[b1(0.2, 0.25, 3)]);

        let data = vec![p1(0.2, 0.2, 2), p1(0.3, 0.3, 0)];
        let out = train_online(&data, &OnlineConfig::fixed(0.2), &[1.0]).unwrap();
        assert_eq!(out.model.boxes(), &[b1(0.2, 0.3, 2)]);
    }

    #[test]
    fn oversized_pattern_becomes_flagged_box() {
        let data = vec![p1(0.1, 0.2, 1), p1(0.3, 0.9, 1)];
        let out = train_online(&data, &OnlineConfig::fixed(0.3), &[1.0]).unwrap();
        assert_eq!(out.model.len(), 2);
        assert_eq!(out.oversized, vec![1]);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            train_online(&[], &OnlineConfig::fixed(0.3), &[1.0]),
            Err(GfmmError::EmptyInput(_))
        ));
        let mixed = vec![p1(0.1, 0.1, 1), IntervalPattern::point(vec![0.1, 0.2], 1).unwrap()];
        assert!(train_online(&mixed, &OnlineConfig::fixed(0.3), &[1.0]).is_err());
        assert!(train_online(&[p1(0.1, 0.1, 1)], &OnlineConfig::fixed(0.0), &[1.0]).is_err());
        assert!(train_online(&[p1(0.1, 0.1, 1)], &OnlineConfig::fixed(0.3), &[1.0, 1.0]).is_err());
    }

    #[test]
    fn adaptive_theta_schedule() {
        // a class-1 point inside the class-2 run breaks that box up on the first pass
        let mut data: Vec<IntervalPattern> = (0..5).map(|i| p1(0.05 + 0.1 * i as f64, 0.05 + 0.1 * i as f64, 1)).collect();
        data.extend((0..5).map(|i| p1(0.52 + 0.1 * i as f64, 0.52 + 0.1 * i as f64, 2)));
        data.push(p1(0.77, 0.77, 1));
        let cfg = OnlineConfig::adaptive(0.5, 0.01, 0.9);
        let out = train_online_adaptive(&data, &cfg, &[1.0]).unwrap();
        assert_abs_diff_eq!(out.thetas[1], 0.45, epsilon = 1e-12);
        assert!(out.thetas.windows(2).all(|w| w[1] < w[0]));
        assert!(out.passes > 1);
        assert_eq!(out.stop, StopReason::Converged);
        assert_eq!(out.training_error, 0.0);
    }

    #[test]
    fn adaptive_separable_converges_in_one_pass() {
        let data: Vec<IntervalPattern> = (0..10)
            .map(|i| {
                let x = i as f64 / 10.0;
                p1(x, x, if x < 0.5 { 1 } else { 2 })
            })
            .collect();
        let out = train_online_adaptive(&data, &OnlineConfig::adaptive(0.5, 0.01, 0.9), &[1.0]).unwrap();
        assert_eq!(out.passes, 1);
        assert_eq!(out.stop, StopReason::Converged);
    }

    #[test]
    fn adaptive_pass_bound_from_geometric_decay() {
        // identical points with different labels can never be separated
        let data = vec![p1(0.5, 0.5, 1), p1(0.5, 0.5, 2)];
        let cfg = OnlineConfig {
            max_passes: 1000,
            ..OnlineConfig::adaptive(0.56, 0.01, 0.9)
        };
        let out = train_online_adaptive(&data, &cfg, &[1.0]).unwrap();
        let bound = ((0.01f64 / 0.56).ln() / 0.9f64.ln()).ceil() as usize;
        assert_eq!(bound, 39);
        assert_eq!(out.stop, StopReason::ThetaMinReached);
        assert!(out.passes <= bound);
        assert_eq!(out.passes, bound);

        let stuck = OnlineConfig {
            max_passes: 7,
            ..OnlineConfig::adaptive(0.56, 0.01, 1.0)
        };
        let out = train_online_adaptive(&data, &stuck, &[1.0]).unwrap();
        assert_eq!(out.stop, StopReason::MaxPassesReached);
        assert_eq!(out.passes, 7);
    }

    #[test]
    fn deterministic() {
        let data: Vec<IntervalPattern> = (0..40)
            .map(|i| {
                let x = ((i * 37) % 41) as f64 / 41.0;
                let y = ((i * 11) % 43) as f64 / 43.0;
                IntervalPattern::point(vec![x, y], 1 + (i % 3) as u32).unwrap()
            })
            .collect();
        let a = train_online(&data, &OnlineConfig::fixed(0.2), &[1.0, 1.0]).unwrap();
        let b = train_online(&data, &OnlineConfig::fixed(0.2), &[1.0, 1.0]).unwrap();
        assert_eq!(a.model, b.model);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn interval() -> impl Strategy<Value = (f64, f64)> {
            (0.0..=1.0f64, 0.0..=1.0f64).prop_map(|(a, b)| (a.min(b), a.max(b)))
        }

        proptest! {
            #[test]
            fn dim_overlap_matches_exhaustive_check(a in interval(), b in interval()) {
                let got = dim_overlap(a.0, a.1, b.0, b.1).is_some();
                prop_assert_eq!(got, intervals_overlap(a.0, a.1, b.0, b.1));
            }

            #[test]
            fn contraction_removes_overlap_and_keeps_boxes_valid(
                a in prop::collection::vec(interval(), 1..4),
                b in prop::collection::vec(interval(), 1..4),
            ) {
                let n = a.len().min(b.len());
                let ha = Hyperbox { min: a[..n].iter().map(|i| i.0).collect(), max: a[..n].iter().map(|i| i.1).collect(), label: 1 };
                let hb = Hyperbox { min: b[..n].iter().map(|i| i.0).collect(), max: b[..n].iter().map(|i| i.1).collect(), label: 2 };
                if let Some(ov) = overlap_test(&ha, &hb) {
                    let (ca, cb) = contract(&ha, &hb, ov.dim, ov.case);
                    prop_assert_eq!(overlap_test(&ca, &cb), None);
                    for j in 0..n {
                        prop_assert!(ca.min[j] <= ca.max[j] && cb.min[j] <= cb.max[j]);
                        if j != ov.dim {
                            prop_assert_eq!(ca.min[j], ha.min[j]);
                            prop_assert_eq!(ca.max[j], ha.max[j]);
                            prop_assert_eq!(cb.min[j], hb.min[j]);
                            prop_assert_eq!(cb.max[j], hb.max[j]);
                        }
                    }
                }
            }
        }
    }
}
