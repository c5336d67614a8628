//! Validation-set pruning of low-quality hyperboxes.
//!
//! Each box is scored by the validation samples it wins. Boxes whose
//! accuracy falls below the threshold are removed. Boxes that never win carry
//! no evidence either way, so they are kept or removed as one group,
//! whichever gives the lower validation error (ties keep them).
//!
//! Removing boxes reassigns their samples to other boxes, which can expose
//! new low-accuracy winners, so [`prune`] repeats the round until the model
//! stops changing. The result is therefore a fixed point: pruning it again
//! with the same validation set is a no-op.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{GfmmError, Result};
use crate::hyperbox::{GfmmModel, IntervalPattern, UNLABELLED};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeverWinnerPolicy {
    /// Keep or drop the group by validation error; ties keep.
    Auto,
    Keep,
    Remove,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneConfig {
    /// Boxes winning with accuracy strictly below this are removed.
    pub min_accuracy: f64,
    pub never_winners: NeverWinnerPolicy,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            min_accuracy: 0.5,
            never_winners: NeverWinnerPolicy::Auto,
        }
    }
}

/// Validation record of one box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxStats {
    pub index: usize,
    pub wins: usize,
    pub correct: usize,
}

impl BoxStats {
    pub fn accuracy(&self) -> Option<f64> {
        (self.wins > 0).then(|| self.correct as f64 / self.wins as f64)
    }
}

/// Win/correct counts per box over the labelled validation samples.
pub fn box_stats(model: &GfmmModel, validation: &[IntervalPattern]) -> Result<Vec<BoxStats>> {
    let mut stats: Vec<BoxStats> = (0..model.len())
        .map(|index| BoxStats { index, wins: 0, correct: 0 })
        .collect();
    check_validation(validation)?;
    for p in validation.iter().filter(|p| p.label() != UNLABELLED) {
        let pred = model.predict(p)?;
        let s = &mut stats[pred.winner];
        s.wins += 1;
        if pred.class == p.label() {
            s.correct += 1;
        }
    }
    Ok(stats)
}

/// What one pruning round decided.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneRound {
    /// Indices (into the round's input model) of boxes below the accuracy threshold.
    pub low_accuracy: Vec<usize>,
    pub never_winners: Vec<usize>,
    pub never_winners_removed: bool,
    /// Validation error with low-accuracy boxes removed and never-winners kept.
    pub error_keep: Option<f64>,
    /// Validation error with never-winners removed as well.
    pub error_remove: Option<f64>,
    pub boxes_before: usize,
    pub boxes_after: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PruneStatus {
    Pruned,
    Unchanged,
    /// Pruning would have removed every labelled box; the last non-empty model is returned.
    WouldEmpty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneOutcome {
    pub model: GfmmModel,
    pub rounds: Vec<PruneRound>,
    pub status: PruneStatus,
    pub validation_error_before: f64,
    pub validation_error_after: f64,
}

/// A single pruning round against winners of the given model.
///
/// Returns `None` in place of the model when every variant would leave no
/// labelled box.
pub fn prune_round(
    model: &GfmmModel,
    validation: &[IntervalPattern],
    config: &PruneConfig,
) -> Result<(Option<GfmmModel>, PruneRound)> {
    let stats = box_stats(model, validation)?;
    let low: Vec<usize> = stats
        .iter()
        .filter(|s| s.accuracy().is_some_and(|a| a < config.min_accuracy))
        .map(|s| s.index)
        .collect();
    let never: Vec<usize> = stats.iter().filter(|s| s.wins == 0).map(|s| s.index).collect();

    let keep_variant = model.retain_indices(|i| !low.contains(&i));
    let remove_variant = model.retain_indices(|i| !low.contains(&i) && !never.contains(&i));
    let error_keep = variant_error(&keep_variant, validation)?;
    let error_remove = if never.is_empty() {
        error_keep
    } else {
        variant_error(&remove_variant, validation)?
    };

    let remove_never = !never.is_empty()
        && match config.never_winners {
            NeverWinnerPolicy::Keep => false,
            NeverWinnerPolicy::Remove => error_remove.is_some(),
            NeverWinnerPolicy::Auto => match (error_keep, error_remove) {
                (Some(k), Some(r)) => r < k,
                (None, Some(_)) => true,
                _ => false,
            },
        };
    let (chosen, chosen_error) = if remove_never {
        (remove_variant, error_remove)
    } else {
        (keep_variant, error_keep)
    };
    let round = PruneRound {
        low_accuracy: low,
        never_winners: never,
        never_winners_removed: remove_never,
        error_keep,
        error_remove,
        boxes_before: model.len(),
        boxes_after: chosen.len(),
    };
    Ok((chosen_error.map(|_| chosen), round))
}

/// Prune `model` against `validation` until no further box is removed.
pub fn prune(model: &GfmmModel, validation: &[IntervalPattern], config: &PruneConfig) -> Result<PruneOutcome> {
    if !(0.0..=1.0).contains(&config.min_accuracy) {
        return Err(GfmmError::InvalidParameter(format!(
            "min_accuracy must lie in [0, 1], got {}",
            config.min_accuracy
        )));
    }
    if model.is_empty() {
        return Err(GfmmError::EmptyModel);
    }
    check_validation(validation)?;
    let before = model.error_rate(validation)?;
    let mut current = model.clone();
    let mut rounds = Vec::new();
    let status = loop {
        let (next, round) = prune_round(&current, validation, config)?;
        let removed_any = round.boxes_after < round.boxes_before;
        rounds.push(round);
        match next {
            None => {
                warn!("pruning would remove every labelled hyperbox; keeping the unpruned boxes");
                break PruneStatus::WouldEmpty;
            }
            Some(m) if removed_any => current = m,
            Some(_) => {
                break if current.len() < model.len() {
                    PruneStatus::Pruned
                } else {
                    PruneStatus::Unchanged
                };
            }
        }
    };
    let after = current.error_rate(validation)?;
    Ok(PruneOutcome {
        model: current,
        rounds,
        status,
        validation_error_before: before,
        validation_error_after: after,
    })
}

fn check_validation(validation: &[IntervalPattern]) -> Result<()> {
    if validation.is_empty() {
        return Err(GfmmError::EmptyInput("validation set is empty".into()));
    }
    if validation.iter().all(|p| p.label() == UNLABELLED) {
        return Err(GfmmError::EmptyInput("validation set has no labelled samples".into()));
    }
    Ok(())
}

/// Validation error of a candidate model, or `None` if it cannot classify.
fn variant_error(model: &GfmmModel, validation: &[IntervalPattern]) -> Result<Option<f64>> {
    match model.error_rate(validation) {
        Ok(e) => Ok(Some(e)),
        Err(GfmmError::EmptyModel) => Ok(None),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperbox::Hyperbox;

    fn bx(v: f64, w: f64, label: u32) -> Hyperbox {
        Hyperbox { min: vec![v], max: vec![w], label }
    }

    fn pts(xs: &[(f64, u32)]) -> Vec<IntervalPattern> {
        xs.iter().map(|&(x, l)| IntervalPattern::point(vec![x], l).unwrap()).collect()
    }

    fn model(boxes: Vec<Hyperbox>) -> GfmmModel {
        GfmmModel::from_boxes(1, vec![1.0], boxes).unwrap()
    }

    #[test]
    fn stats_count_wins_and_hits() {
        let m = model(vec![bx(0.0, 0.2, 1), bx(0.8, 1.0, 2), bx(0.45, 0.55, 1)]);
        let v = pts(&[(0.1, 1), (0.15, 2), (0.9, 2), (0.5, 2), (0.5, 2)]);
        let s = box_stats(&m, &v).unwrap();
        assert_eq!(s[0], BoxStats { index: 0, wins: 2, correct: 1 });
        assert_eq!(s[1], BoxStats { index: 1, wins: 1, correct: 1 });
        assert_eq!(s[2], BoxStats { index: 2, wins: 2, correct: 0 });
        assert!(s.iter().all(|x| x.correct <= x.wins));
    }

    #[test]
    fn inaccurate_box_is_removed_and_accurate_one_kept() {
        // box 2 wins twice and is wrong both times; box 0 wins 10 with 9 correct
        let m = model(vec![bx(0.0, 0.3, 1), bx(0.7, 1.0, 2), bx(0.45, 0.55, 1)]);
        let mut v: Vec<(f64, u32)> = (0..9).map(|i| (0.01 + 0.03 * i as f64, 1)).collect();
        v.push((0.2, 2));
        v.extend([(0.8, 2), (0.5, 2), (0.52, 2)]);
        let out = prune(&m, &pts(&v), &PruneConfig::default()).unwrap();
        assert_eq!(out.rounds[0].low_accuracy, vec![2]);
        assert_eq!(out.model.boxes(), &[bx(0.0, 0.3, 1), bx(0.7, 1.0, 2)]);
        assert_eq!(out.status, PruneStatus::Pruned);
        assert!(out.validation_error_after < out.validation_error_before);
    }

    #[test]
    fn half_accurate_box_survives() {
        let m = model(vec![bx(0.0, 0.3, 1), bx(0.7, 1.0, 2)]);
        let v = pts(&[(0.1, 1), (0.2, 2), (0.8, 2)]);
        let out = prune(&m, &v, &PruneConfig::default()).unwrap();
        assert_eq!(out.model.len(), 2);
        assert_eq!(out.status, PruneStatus::Unchanged);
    }

    #[test]
    fn never_winners_kept_on_ties_and_dropped_when_it_helps() {
        // box 2 never wins: removing it changes nothing, so it stays
        let m = model(vec![bx(0.0, 0.3, 1), bx(0.7, 1.0, 2), bx(0.4, 0.45, 1)]);
        let v = pts(&[(0.1, 1), (0.8, 2)]);
        let out = prune(&m, &v, &PruneConfig::default()).unwrap();
        assert_eq!(out.rounds[0].never_winners, vec![2]);
        assert!(!out.rounds[0].never_winners_removed);
        assert_eq!(out.model.len(), 3);

        // removing the inaccurate box 2 hands sample 0.6 to never-winner box 3
        // (class 1, wrong); dropping the never-winners lets box 1 win it instead
        let m = model(vec![bx(0.0, 0.2, 1), bx(0.7, 1.0, 2), bx(0.55, 0.65, 1), bx(0.5, 0.58, 1)]);
        let v = pts(&[(0.1, 1), (0.8, 2), (0.6, 2)]);
        let (next, round) = prune_round(&m, &v, &PruneConfig::default()).unwrap();
        assert_eq!(round.low_accuracy, vec![2]);
        assert_eq!(round.never_winners, vec![3]);
        assert!(round.error_remove.unwrap() < round.error_keep.unwrap());
        assert!(round.never_winners_removed);
        assert_eq!(next.unwrap().boxes(), &[bx(0.0, 0.2, 1), bx(0.7, 1.0, 2)]);
    }

    #[test]
    fn would_empty_returns_original() {
        let m = model(vec![bx(0.0, 0.3, 1)]);
        let v = pts(&[(0.1, 2), (0.2, 2)]);
        let out = prune(&m, &v, &PruneConfig::default()).unwrap();
        assert_eq!(out.status, PruneStatus::WouldEmpty);
        assert_eq!(out.model, m);
    }

    #[test]
    fn validation_errors() {
        let m = model(vec![bx(0.0, 0.3, 1)]);
        assert!(prune(&m, &[], &PruneConfig::default()).is_err());
        assert!(matches!(
            prune(&m, &pts(&[(0.1, 0)]), &PruneConfig::default()),
            Err(GfmmError::EmptyInput(_))
        ));
        assert_eq!(
            prune(&model(vec![]), &pts(&[(0.1, 1)]), &PruneConfig::default()).unwrap_err(),
            GfmmError::EmptyModel
        );
    }

    #[test]
    fn surviving_boxes_untouched_and_idempotent() {
        let boxes: Vec<Hyperbox> = (0..20)
            .map(|i| {
                let v = i as f64 / 20.0;
                bx(v, v + 0.04, 1 + ((i * 7) % 3) as u32)
            })
            .collect();
        let m = model(boxes.clone());
        let v: Vec<IntervalPattern> = (0..60)
            .map(|i| {
                let x = ((i * 17) % 61) as f64 / 61.0;
                IntervalPattern::point(vec![x], 1 + ((i * 5) % 3) as u32).unwrap()
            })
            .collect();
        let cfg = PruneConfig::default();
        let once = prune(&m, &v, &cfg).unwrap();
        assert!(once.model.boxes().iter().all(|b| boxes.contains(b)));
        let twice = prune(&once.model, &v, &cfg).unwrap();
        assert_eq!(twice.model, once.model);
    }
}
