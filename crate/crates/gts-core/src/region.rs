//! Epoch-driven task region scheduling.
//!
//! The task distribution is split into easy / middle / difficult regions on
//! the difficulty coordinate. The split is seeded from the epoch-0 score
//! sweep, frozen for the first half of training, then expanded on a fixed
//! epoch schedule until easy ∪ middle covers the whole distribution.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task_space::{DifficultyCoordinate, TaskBounds, TaskParam};

/// A real interval with explicit endpoint membership.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        above && below
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo).max(0.0)
    }

    /// Zero-width intervals carry no probability mass and are treated as
    /// empty by the sampler.
    pub fn is_empty(&self) -> bool {
        self.width() <= 0.0
    }

    /// Clamp `x` into the interval, nudging off open endpoints so the result
    /// is always a member.
    pub fn clamp_into(&self, x: f64) -> f64 {
        let mut v = x.clamp(self.lo, self.hi);
        if !self.hi_closed && v >= self.hi {
            v = self.hi.next_down();
        }
        if !self.lo_closed && v <= self.lo {
            v = self.lo.next_up();
        }
        v
    }
}

/// A union of disjoint intervals, ordered by lower endpoint.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntervalSet {
    intervals: Vec<Interval>,
}

impl IntervalSet {
    /// Build a set from raw intervals, dropping zero-width members.
    pub fn from_parts(parts: Vec<Interval>) -> Self {
        Self { intervals: parts.into_iter().filter(|iv| !iv.is_empty()).collect() }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|iv| iv.contains(x))
    }

    pub fn total_width(&self) -> f64 {
        self.intervals.iter().map(Interval::width).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Uniform draw over the union, weighting intervals by width.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<f64> {
        let total = self.total_width();
        if total <= 0.0 {
            return None;
        }
        let mut pick = rng.gen_range(0.0..total);
        for iv in &self.intervals {
            if pick < iv.width() {
                return Some(iv.clamp_into(iv.lo + pick));
            }
            pick -= iv.width();
        }
        self.intervals.last().map(|iv| iv.clamp_into(iv.hi))
    }
}

/// Region labels. Only easy and middle are ever sampled; difficult shrinks
/// away as the schedule expands the other two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    Easy,
    Middle,
    Difficult,
}

impl Region {
    pub fn as_str(&self) -> &'static str {
        match self {
            Region::Easy => "easy",
            Region::Middle => "middle",
            Region::Difficult => "difficult",
        }
    }
}

/// The (easy, middle, difficult) split, parameterized by its two boundary
/// values on the difficulty coordinate.
///
/// Boundary membership follows closed-lower / half-open-upper punctuation,
/// with two exceptions: any endpoint that coincides with an outer bound is
/// closed (so the final expanded state covers `[tau_min, tau_max]` exactly),
/// and in the symmetric case the negative middle lobe mirrors to
/// open-lower / closed-upper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionPartition {
    pub tau_middle1: f64,
    pub tau_middle2: f64,
    pub bounds: TaskBounds,
    pub changes_applied: u32,
}

impl RegionPartition {
    /// A degenerate partition whose easy region is the whole distribution.
    /// Used when prioritized sampling runs without region restriction.
    pub fn whole_as_easy(bounds: TaskBounds) -> Self {
        Self {
            tau_middle1: bounds.tau_max,
            tau_middle2: bounds.tau_max,
            bounds,
            changes_applied: 0,
        }
    }

    fn hi_closed_at(&self, hi: f64) -> bool {
        hi >= self.bounds.tau_max
    }

    fn lo_closed_at(&self, lo: f64) -> bool {
        lo <= self.bounds.tau_min
    }

    pub fn easy(&self) -> IntervalSet {
        let (m1, b) = (self.tau_middle1, self.bounds);
        let lo = if b.symmetric { -m1 } else { b.tau_min };
        IntervalSet::from_parts(vec![Interval {
            lo,
            hi: m1,
            lo_closed: true,
            hi_closed: self.hi_closed_at(m1),
        }])
    }

    pub fn middle(&self) -> IntervalSet {
        let (m1, m2, b) = (self.tau_middle1, self.tau_middle2, self.bounds);
        let pos = Interval {
            lo: m1,
            hi: m2,
            lo_closed: true,
            hi_closed: self.hi_closed_at(m2),
        };
        if b.symmetric {
            let neg = Interval {
                lo: -m2,
                hi: -m1,
                lo_closed: self.lo_closed_at(-m2),
                hi_closed: true,
            };
            IntervalSet::from_parts(vec![neg, pos])
        } else {
            IntervalSet::from_parts(vec![pos])
        }
    }

    pub fn difficult(&self) -> IntervalSet {
        let (m2, b) = (self.tau_middle2, self.bounds);
        let pos = Interval {
            lo: m2,
            hi: b.tau_max,
            lo_closed: true,
            hi_closed: true,
        };
        if b.symmetric {
            let neg = Interval {
                lo: b.tau_min,
                hi: -m2,
                lo_closed: true,
                hi_closed: true,
            };
            IntervalSet::from_parts(vec![neg, pos])
        } else {
            IntervalSet::from_parts(vec![pos])
        }
    }

    /// Classify a difficulty coordinate. Boundary points shared by two
    /// regions resolve in easy → middle → difficult order, keeping the
    /// classification a proper partition.
    pub fn region_of(&self, difficulty: f64) -> Option<Region> {
        if self.easy().contains(difficulty) {
            Some(Region::Easy)
        } else if self.middle().contains(difficulty) {
            Some(Region::Middle)
        } else if self.difficult().contains(difficulty) {
            Some(Region::Difficult)
        } else {
            None
        }
    }
}

/// The epoch schedule controlling when and by how much the regions expand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// Total meta-training epochs.
    pub n_epoch: u32,
    /// Number of region changes over the second half of training.
    pub n_interval: u32,
    /// Epochs between consecutive region changes.
    pub n_batch_epochs: u32,
    /// Boundary increment applied at each change.
    pub d_tau: f64,
}

impl Schedule {
    pub fn new(n_epoch: u32, n_interval: u32, tau_mean: f64, bounds: TaskBounds) -> Result<Self> {
        if n_epoch == 0 || n_interval == 0 {
            return Err(Error::Input("n_epoch and n_interval must be positive".into()));
        }
        let n_batch_epochs = (n_epoch / 2) / n_interval;
        if n_batch_epochs == 0 {
            return Err(Error::Input(format!(
                "n_interval ({n_interval}) exceeds half the epoch budget ({n_epoch})"
            )));
        }
        let seed = fold_mean(bounds, tau_mean);
        let d_tau = (bounds.tau_max - seed) / n_interval as f64;
        if d_tau < 0.0 {
            return Err(Error::Input(format!(
                "tau_mean ({tau_mean}) lies above tau_max ({})",
                bounds.tau_max
            )));
        }
        Ok(Self { n_epoch, n_interval, n_batch_epochs, d_tau })
    }

    fn half(&self) -> u32 {
        self.n_epoch / 2
    }
}

/// In the symmetric case the boundaries live on the positive half-axis, so
/// the seed task's difficulty folds to its absolute value.
fn fold_mean(bounds: TaskBounds, tau_mean: f64) -> f64 {
    if bounds.symmetric {
        tau_mean.abs()
    } else {
        tau_mean
    }
}

/// Pick the seed boundary from the epoch-0 grid sweep: the difficulty of the
/// task whose score is nearest the arithmetic mean of all epoch-0 scores,
/// ties resolved toward the smaller difficulty.
pub fn estimate_tau_mean(
    epoch0_scores: &[(TaskParam, f64)],
    coord: DifficultyCoordinate,
) -> Result<f64> {
    if epoch0_scores.is_empty() {
        return Err(Error::State("tau_mean estimation needs epoch-0 scores".into()));
    }
    let mean = epoch0_scores.iter().map(|(_, s)| s).sum::<f64>() / epoch0_scores.len() as f64;
    let mut best: Option<(f64, f64)> = None; // (|score - mean|, difficulty)
    for (tau, score) in epoch0_scores {
        let d = coord.difficulty(tau)?;
        let dist = (score - mean).abs();
        let better = match best {
            None => true,
            Some((bd, bt)) => dist < bd || (dist == bd && d < bt),
        };
        if better {
            best = Some((dist, d));
        }
    }
    Ok(best.unwrap().1)
}

/// Build the epoch-0 partition: `tau_middle1 = tau_mean` and `tau_middle2`
/// a quarter of the way from `tau_mean` to `tau_max`.
pub fn initial_partition(
    tau_mean: f64,
    schedule: &Schedule,
    bounds: TaskBounds,
) -> Result<RegionPartition> {
    if tau_mean < bounds.tau_min || tau_mean > bounds.tau_max {
        return Err(Error::Input(format!(
            "tau_mean ({tau_mean}) outside bounds [{}, {}]",
            bounds.tau_min, bounds.tau_max
        )));
    }
    let m1 = fold_mean(bounds, tau_mean);
    let m2 = m1 + 0.5 * schedule.n_interval as f64 * 0.5 * schedule.d_tau;
    Ok(RegionPartition {
        tau_middle1: m1.min(bounds.tau_max),
        tau_middle2: m2.min(bounds.tau_max),
        bounds,
        changes_applied: 0,
    })
}

/// Advance the partition to the state it should have at `epoch`.
///
/// Boundaries are frozen over the first half of training, then shift by
/// `d_tau` at every change point (`tau_middle1` takes the old `tau_middle2`),
/// clamped to `tau_max`. The function is idempotent: it applies exactly the
/// changes owed between the partition's recorded state and `epoch`, so
/// calling it repeatedly or after a checkpoint restore gives the same result
/// as stepping epoch by epoch.
pub fn advance(partition: &RegionPartition, schedule: &Schedule, epoch: u32) -> RegionPartition {
    let expected = if epoch < schedule.half() {
        0
    } else {
        (epoch - schedule.half()) / schedule.n_batch_epochs + 1
    };
    let mut out = *partition;
    while out.changes_applied < expected {
        out.tau_middle1 = out.tau_middle2;
        out.tau_middle2 = (out.tau_middle2 + schedule.d_tau).min(out.bounds.tau_max);
        out.changes_applied += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bounds(lo: f64, hi: f64) -> TaskBounds {
        TaskBounds::new(lo, hi).unwrap()
    }

    fn scores(pairs: &[(f64, f64)]) -> Vec<(TaskParam, f64)> {
        pairs.iter().map(|&(t, s)| (TaskParam::one(t), s)).collect()
    }

    #[test]
    fn tau_mean_exact_hit() {
        let s = scores(&[(0.0, 10.0), (1.5, 6.0), (3.0, 2.0)]);
        let m = estimate_tau_mean(&s, DifficultyCoordinate::Identity).unwrap();
        assert_eq!(m, 1.5);
    }

    #[test]
    fn tau_mean_tie_breaks_low() {
        let s = scores(&[(0.0, 10.0), (3.0, 10.0)]);
        let m = estimate_tau_mean(&s, DifficultyCoordinate::Identity).unwrap();
        assert_eq!(m, 0.0);
    }

    #[test]
    fn tau_mean_nearest_by_enumeration() {
        // mean = (90 + 60 + 10 - 40)/4 = 30; nearest score is 10 at tau = 2?
        // distances: |90-30|=60, |60-30|=30, |10-30|=20, |-40-30|=70 -> tau = 2.
        let s = scores(&[(0.0, 90.0), (1.0, 60.0), (2.0, 10.0), (3.0, -40.0)]);
        let m = estimate_tau_mean(&s, DifficultyCoordinate::Identity).unwrap();
        assert_eq!(m, 2.0);
    }

    #[test]
    fn tau_mean_empty_errors() {
        assert!(estimate_tau_mean(&[], DifficultyCoordinate::Identity).is_err());
    }

    fn schedule(n_epoch: u32, n_interval: u32, tau_mean: f64, b: TaskBounds) -> Schedule {
        Schedule::new(n_epoch, n_interval, tau_mean, b).unwrap()
    }

    #[test]
    fn initial_partition_quarter_rule() {
        let b = bounds(0.0, 3.0);
        let sch = schedule(200, 10, 1.0, b);
        assert!((sch.d_tau - 0.2).abs() < 1e-12);
        let p = initial_partition(1.0, &sch, b).unwrap();
        assert!((p.tau_middle1 - 1.0).abs() < 1e-12);
        assert!((p.tau_middle2 - 1.5).abs() < 1e-12);
    }

    #[test]
    fn initial_partition_degenerate_at_max() {
        let b = bounds(0.0, 3.0);
        let sch = schedule(200, 10, 3.0, b);
        let p = initial_partition(3.0, &sch, b).unwrap();
        assert_eq!(p.tau_middle1, 3.0);
        assert_eq!(p.tau_middle2, 3.0);
        assert!(p.middle().is_empty());
        assert!(p.difficult().is_empty());
        // easy absorbs the closed upper endpoint
        assert!(p.easy().contains(3.0));
    }

    #[test]
    fn initial_partition_symmetric() {
        let b = bounds(-3.0, 3.0);
        let sch = schedule(200, 10, 1.0, b);
        let p = initial_partition(1.0, &sch, b).unwrap();
        assert!((p.tau_middle2 - 1.5).abs() < 1e-12);
        let easy = p.easy();
        assert_eq!(easy.intervals().len(), 1);
        assert_eq!(easy.intervals()[0].lo, -1.0);
        assert_eq!(easy.intervals()[0].hi, 1.0);
        assert!(easy.intervals()[0].lo_closed && !easy.intervals()[0].hi_closed);
        let middle = p.middle();
        assert_eq!(middle.intervals().len(), 2);
        let neg = middle.intervals()[0];
        let pos = middle.intervals()[1];
        assert_eq!((neg.lo, neg.hi), (-1.5, -1.0));
        assert!(!neg.lo_closed && neg.hi_closed);
        assert_eq!((pos.lo, pos.hi), (1.0, 1.5));
        assert!(pos.lo_closed && !pos.hi_closed);
    }

    #[test]
    fn initial_partition_rejects_out_of_bounds_mean() {
        let b = bounds(0.0, 3.0);
        let sch = schedule(200, 10, 1.0, b);
        assert!(initial_partition(3.5, &sch, b).is_err());
    }

    #[test]
    fn advance_first_change() {
        let b = bounds(0.0, 3.0);
        let sch = schedule(200, 10, 1.0, b);
        let p0 = initial_partition(1.0, &sch, b).unwrap();
        // frozen during the first half
        let p10 = advance(&p0, &sch, 10);
        assert_eq!((p10.tau_middle1, p10.tau_middle2), (p0.tau_middle1, p0.tau_middle2));
        // first change point
        let p100 = advance(&p0, &sch, 100);
        assert!((p100.tau_middle1 - 1.5).abs() < 1e-12);
        assert!((p100.tau_middle2 - 1.7).abs() < 1e-12);
        // idempotent between change points
        let p105 = advance(&p100, &sch, 105);
        assert_eq!(p105, p100);
    }

    #[test]
    fn advance_reaches_full_coverage() {
        let b = bounds(0.0, 3.0);
        let sch = schedule(200, 10, 1.0, b);
        let mut p = initial_partition(1.0, &sch, b).unwrap();
        for epoch in 1..200 {
            p = advance(&p, &sch, epoch);
        }
        assert_eq!(p.tau_middle2, 3.0);
        assert!(p.difficult().is_empty());
        let union_width = p.easy().total_width() + p.middle().total_width();
        assert!((union_width - b.span()).abs() < 1e-12);
        // closed outer endpoint is reachable
        assert!(p.easy().contains(3.0) || p.middle().contains(3.0));
    }

    #[test]
    fn classification_is_total_and_unique() {
        let b = bounds(-3.0, 3.0);
        let sch = schedule(200, 10, 1.2, b);
        let mut p = initial_partition(1.2, &sch, b).unwrap();
        for epoch in [0, 50, 100, 130, 170, 199] {
            p = advance(&p, &sch, epoch);
            let mut x = b.tau_min;
            while x <= b.tau_max {
                let r = p.region_of(x);
                assert!(r.is_some(), "unclassified difficulty {x} at epoch {epoch}");
                x += 0.05;
            }
            assert!(p.region_of(b.tau_max).is_some());
        }
    }

    proptest! {
        // easy strictly expands at each change until it saturates at tau_max
        #[test]
        fn monotone_expansion(tau_mean in 0.0..2.99f64) {
            let b = bounds(0.0, 3.0);
            let sch = schedule(200, 10, tau_mean, b);
            let mut p = initial_partition(tau_mean, &sch, b).unwrap();
            let mut prev_m1 = p.tau_middle1;
            for k in 0..10u32 {
                let epoch = 100 + k * 10;
                p = advance(&p, &sch, epoch);
                prop_assert!(p.tau_middle1 >= prev_m1);
                if prev_m1 < 3.0 {
                    prop_assert!(p.tau_middle1 > prev_m1);
                }
                prop_assert!(p.tau_middle1 <= p.tau_middle2);
                prop_assert!(p.tau_middle2 <= 3.0);
                prev_m1 = p.tau_middle1;
            }
            let union = p.easy().total_width() + p.middle().total_width();
            prop_assert!((union - 3.0).abs() < 1e-9);
        }

        // the partition is invariant under difficulty negation in the symmetric case
        #[test]
        fn symmetric_partition_mirrors(tau_mean in 0.0..2.5f64, x in -3.0..3.0f64) {
            let b = bounds(-3.0, 3.0);
            let sch = schedule(200, 10, tau_mean, b);
            let p = advance(&initial_partition(tau_mean, &sch, b).unwrap(), &sch, 120);
            let r1 = p.easy().contains(x);
            let r2 = p.easy().contains(-x);
            // interiors mirror; boundary punctuation may differ at the lobe edges
            let near_edge = [p.tau_middle1, p.tau_middle2]
                .iter()
                .any(|m| (x.abs() - m).abs() < 1e-9);
            if !near_edge {
                prop_assert_eq!(r1, r2);
            }
        }
    }
}
