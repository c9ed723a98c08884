//! Batch assembly: the epoch-0 grid and region-respecting prioritized
//! sampling.
//!
//! After epoch 0, half of each batch comes from the easy region and half
//! from the middle region. Inside the easy region a small fixed fraction of
//! draws is uniform (so easy-task scores stay fresh); everything else draws
//! bin centers from the score-derived distribution restricted to the region,
//! then jitters within the bin and clamps back into the region.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::region::{IntervalSet, Region, RegionPartition};
use crate::score::BinDistribution;
use crate::task_space::{DifficultyCoordinate, TaskBounds, TaskParam};

/// Sampler knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    /// Tasks per meta-epoch.
    pub n_batch: usize,
    /// Uniform-draw rate inside the easy region, in `[0, 1]`.
    pub delta: f64,
    /// Bin width; also the jitter span around a drawn bin center.
    pub d_tau_bin: f64,
    /// Run seed the caller derives the rng stream from.
    pub seed: u64,
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_batch < 2 {
            return Err(Error::Input("n_batch must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::Input(format!("delta must lie in [0,1], got {}", self.delta)));
        }
        if !(self.d_tau_bin > 0.0) {
            return Err(Error::Input("d_tau_bin must be positive".into()));
        }
        Ok(())
    }
}

/// The tasks chosen for one meta-epoch, each labeled with the region it was
/// drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub tasks: Vec<(TaskParam, Region)>,
    pub epoch: u32,
}

impl SamplingPlan {
    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}

/// Epoch-0 sweep: `n_batch` tasks evenly spaced over the whole distribution,
/// endpoints included. 2D difficulties are lifted with random directions.
pub fn epoch0_grid<R: Rng + ?Sized>(
    bounds: &TaskBounds,
    n_batch: usize,
    coord: DifficultyCoordinate,
    rng: &mut R,
) -> Result<SamplingPlan> {
    if n_batch < 2 {
        return Err(Error::Input("epoch-0 grid needs at least 2 tasks".into()));
    }
    let step = bounds.span() / (n_batch - 1) as f64;
    let tasks = (0..n_batch)
        .map(|k| {
            let d = if k + 1 == n_batch { bounds.tau_max } else { bounds.tau_min + k as f64 * step };
            (coord.lift(d, rng), Region::Easy)
        })
        .collect();
    Ok(SamplingPlan { tasks, epoch: 0 })
}

/// Uniform draws over the whole distribution (the plain meta-learning
/// baseline; no regions, no scores).
pub fn sample_uniform<R: Rng + ?Sized>(
    bounds: &TaskBounds,
    n_batch: usize,
    coord: DifficultyCoordinate,
    epoch: u32,
    rng: &mut R,
) -> SamplingPlan {
    let tasks = (0..n_batch)
        .map(|_| {
            let d = rng.gen_range(bounds.tau_min..bounds.tau_max);
            (coord.lift(d, rng), Region::Easy)
        })
        .collect();
    SamplingPlan { tasks, epoch }
}

/// Region-restricted but score-blind sampling: half the batch uniform in the
/// easy region, half uniform in the middle region (split evenly over the
/// middle lobes in the symmetric case).
pub fn sample_regions_uniform(
    partition: &RegionPartition,
    n_batch: usize,
    coord: DifficultyCoordinate,
    epoch: u32,
    rng: &mut ChaCha8Rng,
) -> Result<SamplingPlan> {
    sample_with(partition, None, n_batch, 0.0, 0.0, coord, epoch, rng)
}

/// Full guided sampling: prioritized draws restricted per region with the
/// uniform mixture in the easy region and per-bin jitter.
pub fn sample_batch(
    partition: &RegionPartition,
    dist: &BinDistribution,
    config: &SamplerConfig,
    coord: DifficultyCoordinate,
    epoch: u32,
    rng: &mut ChaCha8Rng,
) -> Result<SamplingPlan> {
    config.validate()?;
    sample_with(
        partition,
        Some(dist),
        config.n_batch,
        config.delta,
        config.d_tau_bin,
        coord,
        epoch,
        rng,
    )
}

#[allow(clippy::too_many_arguments)]
fn sample_with(
    partition: &RegionPartition,
    dist: Option<&BinDistribution>,
    n_batch: usize,
    delta: f64,
    d_tau_bin: f64,
    coord: DifficultyCoordinate,
    epoch: u32,
    rng: &mut ChaCha8Rng,
) -> Result<SamplingPlan> {
    let easy = partition.easy();
    let middle = partition.middle();
    if easy.is_empty() && middle.is_empty() {
        return Err(Error::State("both sampleable regions are empty".into()));
    }

    let mut n_easy = (n_batch + 1) / 2;
    let mut n_middle = n_batch - n_easy;
    if middle.is_empty() {
        n_easy = n_batch;
        n_middle = 0;
    } else if easy.is_empty() {
        n_easy = 0;
        n_middle = n_batch;
    }

    let mut tasks = Vec::with_capacity(n_batch);

    let easy_dist = dist.and_then(|d| d.restrict(&easy));
    for _ in 0..n_easy {
        let d = if dist.is_none() || rng.gen::<f64>() < delta {
            uniform_in(&easy, rng)?
        } else {
            match &easy_dist {
                Some(ed) => jittered_draw(ed, &easy, d_tau_bin, rng),
                None => uniform_in(&easy, rng)?,
            }
        };
        tasks.push((coord.lift(d, rng), Region::Easy));
    }

    if n_middle > 0 {
        let lobes = middle.intervals();
        if partition.bounds.symmetric && lobes.len() == 2 {
            // equal split between the negative and positive lobes, the odd
            // draw going to the positive side
            let n_pos = n_middle / 2 + n_middle % 2;
            let n_neg = n_middle / 2;
            for (lobe, n) in [(lobes[0], n_neg), (lobes[1], n_pos)] {
                let set = IntervalSet::from_parts(vec![lobe]);
                draw_middle(&set, dist, n, d_tau_bin, coord, rng, &mut tasks)?;
            }
        } else {
            draw_middle(&middle, dist, n_middle, d_tau_bin, coord, rng, &mut tasks)?;
        }
    }

    Ok(SamplingPlan { tasks, epoch })
}

fn draw_middle(
    set: &IntervalSet,
    dist: Option<&BinDistribution>,
    n: usize,
    d_tau_bin: f64,
    coord: DifficultyCoordinate,
    rng: &mut ChaCha8Rng,
    tasks: &mut Vec<(TaskParam, Region)>,
) -> Result<()> {
    let restricted = dist.and_then(|d| d.restrict(set));
    for _ in 0..n {
        let d = match &restricted {
            Some(rd) => jittered_draw(rd, set, d_tau_bin, rng),
            None => uniform_in(set, rng)?,
        };
        tasks.push((coord.lift(d, rng), Region::Middle));
    }
    Ok(())
}

fn uniform_in(set: &IntervalSet, rng: &mut (impl Rng + ?Sized)) -> Result<f64> {
    set.sample_uniform(rng)
        .ok_or_else(|| Error::State("uniform draw from an empty region".into()))
}

/// Draw a bin center, jitter uniformly within one bin width, and clamp back
/// into the interval the center came from (so lobe attribution survives).
fn jittered_draw(
    dist: &BinDistribution,
    set: &IntervalSet,
    d_tau_bin: f64,
    rng: &mut (impl Rng + ?Sized),
) -> f64 {
    let center = dist.sample(rng);
    let noise = if d_tau_bin > 0.0 {
        rng.gen_range(-d_tau_bin / 2.0..d_tau_bin / 2.0)
    } else {
        0.0
    };
    let home = set
        .intervals()
        .iter()
        .find(|iv| iv.contains(center))
        .copied()
        .unwrap_or_else(|| set.intervals()[0]);
    home.clamp_into(center + noise)
}
