//! Score bookkeeping and the sampling-probability pipeline.
//!
//! Every meta-epoch records the mean total reward per sampled task. Nearby
//! tasks are pooled into fixed-width bins and aggregated with epoch-indexed
//! weights so recent performance dominates. A cubic spline fills in bins
//! that were never sampled, the result is min-max normalized, and the
//! complement becomes a discrete sampling distribution: tasks that score
//! poorly get drawn more often.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region::IntervalSet;
use crate::spline::CubicSpline;
use crate::task_space::{DifficultyCoordinate, TaskBounds, TaskParam};

/// One per-task score observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub tau: TaskParam,
    pub epoch: u32,
    /// Mean total (undiscounted) reward over the rollouts for this task.
    pub r_mean: f64,
}

/// Append-only log of score records plus the binning grid they map onto.
#[derive(Debug, Clone)]
pub struct ScoreTable {
    records: Vec<ScoreRecord>,
    bounds: TaskBounds,
    coord: DifficultyCoordinate,
    d_tau_bin: f64,
    n_bins: usize,
    current_epoch: u32,
}

impl ScoreTable {
    pub fn new(bounds: TaskBounds, coord: DifficultyCoordinate, d_tau_bin: f64) -> Result<Self> {
        if !(d_tau_bin > 0.0) || !d_tau_bin.is_finite() {
            return Err(Error::Input(format!("d_tau_bin must be positive, got {d_tau_bin}")));
        }
        let ratio = bounds.span() / d_tau_bin;
        let rounded = ratio.round();
        let n_bins = if (ratio - rounded).abs() < 1e-9 * ratio.max(1.0) {
            rounded as usize
        } else {
            ratio.ceil() as usize
        }
        .max(1);
        Ok(Self {
            records: Vec::new(),
            bounds,
            coord,
            d_tau_bin,
            n_bins,
            current_epoch: 0,
        })
    }

    pub fn push(&mut self, tau: TaskParam, epoch: u32, r_mean: f64) -> Result<()> {
        if !r_mean.is_finite() {
            return Err(Error::Input(format!("non-finite score for task {tau:?}")));
        }
        self.coord.difficulty(&tau)?; // validates dimension
        self.current_epoch = self.current_epoch.max(epoch);
        self.records.push(ScoreRecord { tau, epoch, r_mean });
        Ok(())
    }

    pub fn records(&self) -> &[ScoreRecord] {
        &self.records
    }

    pub fn restore(&mut self, records: Vec<ScoreRecord>) {
        self.current_epoch = records.iter().map(|r| r.epoch).max().unwrap_or(0);
        self.records = records;
    }

    pub fn current_epoch(&self) -> u32 {
        self.current_epoch
    }

    pub fn d_tau_bin(&self) -> f64 {
        self.d_tau_bin
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// Lower edge of bin `k`.
    pub fn bin_start(&self, k: usize) -> f64 {
        self.bounds.tau_min + k as f64 * self.d_tau_bin
    }

    /// Center of bin `k`. The last bin may be truncated by `tau_max`.
    pub fn bin_center(&self, k: usize) -> f64 {
        let lo = self.bin_start(k);
        let hi = (lo + self.d_tau_bin).min(self.bounds.tau_max);
        0.5 * (lo + hi)
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        (0..self.n_bins).map(|k| self.bin_center(k)).collect()
    }

    /// Bin index for a difficulty coordinate. Bins are half-open except the
    /// last, which absorbs the closed `tau_max` endpoint.
    pub fn bin_index(&self, difficulty: f64) -> usize {
        let raw = ((difficulty - self.bounds.tau_min) / self.d_tau_bin).floor();
        (raw.max(0.0) as usize).min(self.n_bins - 1)
    }

    /// Per-bin (weighted score sum, record count).
    fn bin_accumulate(&self) -> Result<Vec<(f64, usize)>> {
        let mut acc = vec![(0.0, 0usize); self.n_bins];
        for rec in &self.records {
            let d = self.coord.difficulty(&rec.tau)?;
            let k = self.bin_index(d);
            acc[k].0 += rec.epoch as f64 * rec.r_mean;
            acc[k].1 += 1;
        }
        Ok(acc)
    }
}

/// Arithmetic mean of per-rollout total rewards.
pub fn mean_total_reward(rollout_returns: &[f64]) -> Result<f64> {
    if rollout_returns.is_empty() {
        return Err(Error::Input("mean total reward over zero rollouts".into()));
    }
    Ok(rollout_returns.iter().sum::<f64>() / rollout_returns.len() as f64)
}

/// Epoch-weighted score of the bin starting at `bin_start`: the sum of
/// `epoch * r_mean` over the bin's records divided by the record count.
/// Epoch-0 records count toward the divisor but contribute zero weight.
/// Returns `None` when the bin holds no data (the curve interpolates it).
pub fn weighted_bin_score(table: &ScoreTable, bin_start: f64) -> Result<Option<f64>> {
    let k = ((bin_start - table.bounds.tau_min) / table.d_tau_bin).round();
    if k < 0.0 || k as usize >= table.n_bins {
        return Err(Error::Input(format!("bin start {bin_start} outside the binning grid")));
    }
    let k = k as usize;
    let recon = table.bin_start(k);
    if (recon - bin_start).abs() > 1e-6 * table.d_tau_bin.max(1.0) {
        return Err(Error::Input(format!(
            "bin start {bin_start} is not aligned to the grid (nearest edge {recon})"
        )));
    }
    let acc = table.bin_accumulate()?;
    let (sum, count) = acc[k];
    Ok(if count == 0 { None } else { Some(sum / count as f64) })
}

/// The interpolated, normalized score curve over the bin-center grid.
#[derive(Debug, Clone)]
pub struct ScoreCurve {
    bin_centers: Vec<f64>,
    knots: Vec<(f64, f64)>,
    spline: CubicSpline,
    f_bar: Vec<f64>,
}

impl ScoreCurve {
    pub fn bin_centers(&self) -> &[f64] {
        &self.bin_centers
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    /// Normalized curve values, aligned with `bin_centers`.
    pub fn f_bar(&self) -> &[f64] {
        &self.f_bar
    }

    /// Pre-normalization curve value at a difficulty coordinate: spline
    /// inside the knot range (clipped to the observed score range to damp
    /// overshoot), nearest knot value outside it.
    pub fn raw_value(&self, difficulty: f64) -> f64 {
        let (lo, hi) = self.score_range();
        if difficulty <= self.spline.x_min() {
            self.knots.first().unwrap().1
        } else if difficulty >= self.spline.x_max() {
            self.knots.last().unwrap().1
        } else {
            self.spline.evaluate(difficulty).clamp(lo, hi)
        }
    }

    fn score_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &(_, y) in &self.knots {
            lo = lo.min(y);
            hi = hi.max(y);
        }
        (lo, hi)
    }
}

/// Build the score curve: weighted bin scores become spline knots, the
/// spline is evaluated on the full bin-center grid, and the grid values are
/// min-max normalized to `[0, 1]`. All-equal values normalize to 0.5.
pub fn build_curve(table: &ScoreTable, bounds: &TaskBounds) -> Result<ScoreCurve> {
    if *bounds != table.bounds {
        return Err(Error::Input("curve bounds do not match the score table".into()));
    }
    let acc = table.bin_accumulate()?;
    let mut knots = Vec::new();
    for (k, &(sum, count)) in acc.iter().enumerate() {
        if count > 0 {
            knots.push((table.bin_center(k), sum / count as f64));
        }
    }
    if knots.len() < 2 {
        return Err(Error::State(format!(
            "curve needs at least two non-empty bins, have {}",
            knots.len()
        )));
    }
    let spline = CubicSpline::new(
        knots.iter().map(|&(x, _)| x).collect(),
        knots.iter().map(|&(_, y)| y).collect(),
    )?;

    let bin_centers = table.bin_centers();
    let mut curve = ScoreCurve { bin_centers, knots, spline, f_bar: Vec::new() };

    let grid: Vec<f64> = curve.bin_centers.iter().map(|&c| curve.raw_value(c)).collect();
    let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    curve.f_bar = if range <= 1e-12 * hi.abs().max(lo.abs()).max(1.0) {
        vec![0.5; grid.len()]
    } else {
        grid.iter().map(|&g| ((g - lo) / range).clamp(0.0, 1.0)).collect()
    };
    Ok(curve)
}

/// Discrete sampling distribution over the bin-center grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BinDistribution {
    centers: Vec<f64>,
    probs: Vec<f64>,
}

impl BinDistribution {
    pub fn new(centers: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if centers.len() != probs.len() || centers.is_empty() {
            return Err(Error::Input("distribution needs matching, nonempty supports".into()));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::Input("probabilities must be finite and nonnegative".into()));
        }
        Ok(Self { centers, probs })
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Draw a bin center.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen_range(0.0..1.0);
        let mut cum = 0.0;
        for (&c, &p) in self.centers.iter().zip(&self.probs) {
            cum += p;
            if u < cum {
                return c;
            }
        }
        *self.centers.last().unwrap()
    }

    /// Restrict to bins whose centers lie in `set` and renormalize.
    /// `None` when no mass remains (caller falls back to uniform draws).
    pub fn restrict(&self, set: &IntervalSet) -> Option<BinDistribution> {
        let mut centers = Vec::new();
        let mut probs = Vec::new();
        for (&c, &p) in self.centers.iter().zip(&self.probs) {
            if set.contains(c) {
                centers.push(c);
                probs.push(p);
            }
        }
        let total: f64 = probs.iter().sum();
        if centers.is_empty() || total <= 0.0 {
            return None;
        }
        for p in &mut probs {
            *p /= total;
        }
        Some(BinDistribution { centers, probs })
    }
}

/// Convert a normalized score curve into sampling probabilities:
/// `p = (1 - f_bar) / sum(1 - f_bar)`. If every score is maximal the
/// distribution falls back to uniform.
pub fn probability(curve: &ScoreCurve) -> BinDistribution {
    let weights: Vec<f64> = curve.f_bar.iter().map(|&f| (1.0 - f).max(0.0)).collect();
    let total: f64 = weights.iter().sum();
    let n = weights.len();
    let probs = if total <= 0.0 {
        vec![1.0 / n as f64; n]
    } else {
        weights.iter().map(|&w| w / total).collect()
    };
    BinDistribution { centers: curve.bin_centers.clone(), probs }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(bounds: (f64, f64), d: f64) -> ScoreTable {
        ScoreTable::new(
            TaskBounds::new(bounds.0, bounds.1).unwrap(),
            DifficultyCoordinate::Identity,
            d,
        )
        .unwrap()
    }

    #[test]
    fn mean_total_reward_basics() {
        assert_eq!(mean_total_reward(&[10.0, 20.0, 30.0]).unwrap(), 20.0);
        assert_eq!(mean_total_reward(&[5.0]).unwrap(), 5.0);
        assert!(mean_total_reward(&[]).is_err());
        // 20 perfect-tracking rollouts, each 1.05 per step over H = 100
        let perfect = vec![105.0; 20];
        assert_eq!(mean_total_reward(&perfect).unwrap(), 105.0);
    }

    #[test]
    fn binning_grid_shape() {
        let t = table((0.0, 3.0), 0.1);
        assert_eq!(t.n_bins(), 30);
        assert!((t.bin_center(0) - 0.05).abs() < 1e-12);
        assert!((t.bin_center(29) - 2.95).abs() < 1e-12);
        // closed upper endpoint lands in the last bin
        assert_eq!(t.bin_index(3.0), 29);
        assert_eq!(t.bin_index(0.0), 0);
        assert_eq!(t.bin_index(0.1), 1);
    }

    #[test]
    fn weighted_score_epoch_weights() {
        let mut t = table((0.0, 3.0), 0.1);
        t.push(TaskParam::one(0.52), 1, 10.0).unwrap();
        t.push(TaskParam::one(0.58), 3, 20.0).unwrap();
        let s = weighted_bin_score(&t, 0.5).unwrap().unwrap();
        assert!((s - 35.0).abs() < 1e-12, "(1*10 + 3*20)/2 = 35, got {s}");

        let mut t2 = table((0.0, 3.0), 0.1);
        t2.push(TaskParam::one(1.01), 2, -4.0).unwrap();
        assert_eq!(weighted_bin_score(&t2, 1.0).unwrap().unwrap(), -8.0);

        let mut t3 = table((0.0, 3.0), 0.1);
        t3.push(TaskParam::one(0.05), 0, 100.0).unwrap();
        assert_eq!(weighted_bin_score(&t3, 0.0).unwrap().unwrap(), 0.0);
    }

    #[test]
    fn weighted_score_empty_bin_is_no_data() {
        let t = table((0.0, 3.0), 0.1);
        assert!(weighted_bin_score(&t, 0.5).unwrap().is_none());
        assert!(weighted_bin_score(&t, 17.0).is_err());
    }

    #[test]
    fn curve_interpolates_and_normalizes() {
        let mut t = table((0.0, 3.0), 1.0); // 3 bins, centers 0.5 1.5 2.5
        t.push(TaskParam::one(0.5), 1, 2.0).unwrap();
        t.push(TaskParam::one(1.5), 1, 4.0).unwrap();
        t.push(TaskParam::one(2.5), 1, 6.0).unwrap();
        let c = build_curve(&t, &t.bounds).unwrap();
        // knots hit exactly
        for &(x, y) in c.knots() {
            assert!((c.raw_value(x) - y).abs() <= 1e-9);
        }
        // min-max normalization of {2, 4, 6}
        assert_eq!(c.f_bar(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn curve_requires_two_bins() {
        let mut t = table((0.0, 3.0), 0.1);
        t.push(TaskParam::one(0.5), 1, 2.0).unwrap();
        assert!(matches!(build_curve(&t, &t.bounds), Err(Error::State(_))));
    }

    #[test]
    fn constant_scores_normalize_to_half() {
        let mut t = table((0.0, 3.0), 1.0);
        for x in [0.5, 1.5, 2.5] {
            t.push(TaskParam::one(x), 2, 7.0).unwrap();
        }
        let c = build_curve(&t, &t.bounds).unwrap();
        assert!(c.f_bar().iter().all(|&f| f == 0.5));
        let p = probability(&c);
        for &q in p.probs() {
            assert!((q - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn probability_hand_values() {
        let mut t = table((0.0, 3.0), 1.0);
        t.push(TaskParam::one(0.5), 1, 0.0).unwrap();
        t.push(TaskParam::one(1.5), 1, 5.0).unwrap();
        t.push(TaskParam::one(2.5), 1, 10.0).unwrap();
        let c = build_curve(&t, &t.bounds).unwrap();
        assert_eq!(c.f_bar(), &[0.0, 0.5, 1.0]);
        let p = probability(&c);
        assert!((p.probs()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.probs()[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!(p.probs()[2] == 0.0);
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn probability_all_max_falls_back_uniform() {
        // f_bar = {1, 1, 0} -> only the hard task has mass
        let curve = ScoreCurve {
            bin_centers: vec![0.5, 1.5, 2.5],
            knots: vec![(0.5, 1.0), (2.5, 0.0)],
            spline: CubicSpline::new(vec![0.5, 2.5], vec![1.0, 0.0]).unwrap(),
            f_bar: vec![1.0, 1.0, 0.0],
        };
        let p = probability(&curve);
        assert_eq!(p.probs(), &[0.0, 0.0, 1.0]);

        let degenerate = ScoreCurve { f_bar: vec![1.0, 1.0, 1.0], ..curve };
        let p = probability(&degenerate);
        for &q in p.probs() {
            assert!((q - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn lower_score_gets_higher_mass() {
        let mut t = table((0.0, 3.0), 0.5);
        for (i, x) in [0.3, 0.8, 1.3, 1.8, 2.3, 2.8].iter().enumerate() {
            t.push(TaskParam::one(*x), 1, 10.0 - i as f64 * 3.0).unwrap();
        }
        let c = build_curve(&t, &t.bounds).unwrap();
        let p = probability(&c);
        for i in 0..p.probs().len() {
            for j in 0..p.probs().len() {
                if c.f_bar()[i] < c.f_bar()[j] {
                    assert!(p.probs()[i] > p.probs()[j]);
                }
            }
        }
    }

    #[test]
    fn later_epochs_dominate_bin_scores() {
        // fixed reference bin vs a bin that keeps receiving poor scores
        let base = |extra: Option<(u32, f64)>| {
            let mut t = table((0.0, 3.0), 1.0);
            t.push(TaskParam::one(0.5), 1, 10.0).unwrap();
            t.push(TaskParam::one(1.5), 1, 10.0).unwrap();
            t.push(TaskParam::one(2.5), 1, 10.0).unwrap();
            if let Some((e, r)) = extra {
                t.push(TaskParam::one(0.5), e, r).unwrap();
            }
            weighted_bin_score(&t, 0.0).unwrap().unwrap()
        };
        let s0 = base(None);
        let s_early = base(Some((2, -10.0)));
        let s_late = base(Some((5, -10.0)));
        assert!(s_early < s0, "a later poor record must pull the score down");
        assert!(s_late < s_early, "the pull grows with the epoch weight");
    }

    #[test]
    fn identical_tables_give_identical_curves() {
        let build = || {
            let mut t = table((0.0, 3.0), 0.1);
            for i in 0..40 {
                let x = 3.0 * i as f64 / 39.0;
                t.push(TaskParam::one(x), 1 + (i % 3) as u32, (x * 7.3).sin() * 50.0).unwrap();
            }
            build_curve(&t, &t.bounds).unwrap()
        };
        let a = build();
        let b = build();
        assert_eq!(a.f_bar(), b.f_bar());
        let (pa, pb) = (probability(&a), probability(&b));
        assert_eq!(pa.probs(), pb.probs());
    }

    #[test]
    fn restrict_renormalizes() {
        let d = BinDistribution::new(vec![0.5, 1.5, 2.5], vec![0.2, 0.3, 0.5]).unwrap();
        let set = IntervalSet::from_parts(vec![crate::region::Interval {
            lo: 1.0,
            hi: 3.0,
            lo_closed: true,
            hi_closed: true,
        }]);
        let r = d.restrict(&set).unwrap();
        assert_eq!(r.centers(), &[1.5, 2.5]);
        assert!((r.probs()[0] - 0.375).abs() < 1e-15);
        assert!((r.probs()[1] - 0.625).abs() < 1e-15);

        let empty = IntervalSet::from_parts(vec![]);
        assert!(d.restrict(&empty).is_none());
    }
}
