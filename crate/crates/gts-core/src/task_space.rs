//! Task parameters, distribution bounds, and the difficulty coordinate.
//!
//! A task parameter is a point in a 1D or 2D task space (a target velocity,
//! a goal position). Every scheduling decision in the crate operates on a
//! scalar *difficulty coordinate* derived from the task parameter: the
//! identity for 1D spaces, the radial norm for 2D goal spaces, so that
//! larger coordinate always means harder task.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in task space, dimension 1 or 2.
///
/// The dimension is fixed per experiment; mixing dimensions in one run is a
/// caller bug and is rejected by the operations that would observe it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskParam {
    dim: usize,
    xs: [f64; 2],
}

impl TaskParam {
    /// 1D task parameter (e.g. target velocity).
    pub fn one(v: f64) -> Self {
        Self { dim: 1, xs: [v, 0.0] }
    }

    /// 2D task parameter (e.g. goal position).
    pub fn two(x: f64, y: f64) -> Self {
        Self { dim: 2, xs: [x, y] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[f64] {
        &self.xs[..self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|x| x.is_finite())
    }
}

/// Closed task-distribution bounds `[tau_min, tau_max]` on the difficulty
/// coordinate.
///
/// Two layouts are supported: the plain case `0 <= tau_min < tau_max` and
/// the symmetric case `tau_min = -tau_max < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskBounds {
    pub tau_min: f64,
    pub tau_max: f64,
    pub symmetric: bool,
}

impl TaskBounds {
    pub fn new(tau_min: f64, tau_max: f64) -> Result<Self> {
        if !tau_min.is_finite() || !tau_max.is_finite() {
            return Err(Error::Input("task bounds must be finite".into()));
        }
        if tau_min >= tau_max {
            return Err(Error::Input(format!(
                "tau_min ({tau_min}) must be strictly below tau_max ({tau_max})"
            )));
        }
        let symmetric = tau_min < 0.0;
        if symmetric && tau_min != -tau_max {
            return Err(Error::Input(format!(
                "negative tau_min requires tau_min = -tau_max, got [{tau_min}, {tau_max}]"
            )));
        }
        Ok(Self { tau_min, tau_max, symmetric })
    }

    pub fn span(&self) -> f64 {
        self.tau_max - self.tau_min
    }
}

/// Monotone map from a task parameter to its scalar difficulty coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DifficultyCoordinate {
    /// 1D task spaces: the coordinate is the parameter itself.
    Identity,
    /// 2D goal spaces: the coordinate is the Euclidean norm of the goal, so
    /// regions become annuli around the start position.
    RadialNorm,
}

impl DifficultyCoordinate {
    /// Expected task dimension for this transform.
    pub fn dim(&self) -> usize {
        match self {
            DifficultyCoordinate::Identity => 1,
            DifficultyCoordinate::RadialNorm => 2,
        }
    }

    /// Scalar difficulty of a task.
    pub fn difficulty(&self, tau: &TaskParam) -> Result<f64> {
        if tau.dim() != self.dim() {
            return Err(Error::Input(format!(
                "task dimension {} does not match coordinate dimension {}",
                tau.dim(),
                self.dim()
            )));
        }
        Ok(match self {
            DifficultyCoordinate::Identity => tau.components()[0],
            DifficultyCoordinate::RadialNorm => {
                let c = tau.components();
                (c[0] * c[0] + c[1] * c[1]).sqrt()
            }
        })
    }

    /// Inverse direction: turn a sampled difficulty back into a task.
    ///
    /// 1D is exact; a 2D difficulty is lifted to a goal by drawing a uniform
    /// random direction.
    pub fn lift<R: Rng + ?Sized>(&self, difficulty: f64, rng: &mut R) -> TaskParam {
        match self {
            DifficultyCoordinate::Identity => TaskParam::one(difficulty),
            DifficultyCoordinate::RadialNorm => {
                let angle = rng.gen_range(0.0..std::f64::consts::TAU);
                TaskParam::two(difficulty * angle.cos(), difficulty * angle.sin())
            }
        }
    }

    /// Deterministic lift used by evaluation sweeps: directions rotate by the
    /// golden angle with the grid index so a sweep covers directions evenly
    /// while staying reproducible.
    pub fn lift_deterministic(&self, difficulty: f64, index: usize) -> TaskParam {
        match self {
            DifficultyCoordinate::Identity => TaskParam::one(difficulty),
            DifficultyCoordinate::RadialNorm => {
                let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
                let angle = (index as f64 * golden) % std::f64::consts::TAU;
                TaskParam::two(difficulty * angle.cos(), difficulty * angle.sin())
            }
        }
    }
}

/// True iff the difficulty coordinate of `tau` lies in `[tau_min, tau_max]`.
pub fn contains(bounds: &TaskBounds, coord: DifficultyCoordinate, tau: &TaskParam) -> Result<bool> {
    let d = coord.difficulty(tau)?;
    Ok(d >= bounds.tau_min && d <= bounds.tau_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn bounds(lo: f64, hi: f64) -> TaskBounds {
        TaskBounds::new(lo, hi).unwrap()
    }

    #[test]
    fn contains_interior_and_boundary() {
        let b = bounds(0.0, 3.0);
        let c = DifficultyCoordinate::Identity;
        assert!(contains(&b, c, &TaskParam::one(1.5)).unwrap());
        // upper bound is closed
        assert!(contains(&b, c, &TaskParam::one(3.0)).unwrap());
        assert!(!contains(&b, c, &TaskParam::one(3.05)).unwrap());
    }

    #[test]
    fn contains_rejects_dimension_mismatch() {
        let b = bounds(0.0, 3.0);
        let err = contains(&b, DifficultyCoordinate::Identity, &TaskParam::two(1.0, 1.0));
        assert!(matches!(err, Err(Error::Input(_))));
    }

    #[test]
    fn difficulty_identity_and_norm() {
        let c1 = DifficultyCoordinate::Identity;
        assert_eq!(c1.difficulty(&TaskParam::one(2.0)).unwrap(), 2.0);
        let c2 = DifficultyCoordinate::RadialNorm;
        assert_eq!(c2.difficulty(&TaskParam::two(3.0, 4.0)).unwrap(), 5.0);
        assert_eq!(c2.difficulty(&TaskParam::two(0.0, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn bounds_validation() {
        assert!(TaskBounds::new(0.0, 3.0).is_ok());
        assert!(TaskBounds::new(3.0, 0.0).is_err());
        assert!(TaskBounds::new(-2.0, 3.0).is_err());
        let sym = bounds(-3.0, 3.0);
        assert!(sym.symmetric);
        assert!(!bounds(0.5, 3.0).symmetric);
    }

    #[test]
    fn lift_preserves_difficulty() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let coord = DifficultyCoordinate::RadialNorm;
        for i in 0..50 {
            let d = 0.1 * i as f64;
            let tau = coord.lift(d, &mut rng);
            assert!((coord.difficulty(&tau).unwrap() - d).abs() < 1e-12);
            let tau2 = coord.lift_deterministic(d, i);
            assert!((coord.difficulty(&tau2).unwrap() - d).abs() < 1e-12);
        }
    }

    proptest! {
        // membership of two 1D points implies membership of any convex combination
        #[test]
        fn contains_convex_in_1d(a in 0.0..3.0f64, b in 0.0..3.0f64, t in 0.0..1.0f64) {
            let bd = bounds(0.0, 3.0);
            let c = DifficultyCoordinate::Identity;
            prop_assume!(contains(&bd, c, &TaskParam::one(a)).unwrap());
            prop_assume!(contains(&bd, c, &TaskParam::one(b)).unwrap());
            let mix = t * a + (1.0 - t) * b;
            prop_assert!(contains(&bd, c, &TaskParam::one(mix)).unwrap());
        }

        // difficulty grows monotonically along any ray from the origin
        #[test]
        fn difficulty_monotone_on_rays(angle in 0.0..std::f64::consts::TAU, r1 in 0.0..5.0f64, r2 in 0.0..5.0f64) {
            prop_assume!(r1 < r2);
            let coord = DifficultyCoordinate::RadialNorm;
            let p1 = TaskParam::two(r1 * angle.cos(), r1 * angle.sin());
            let p2 = TaskParam::two(r2 * angle.cos(), r2 * angle.sin());
            prop_assert!(coord.difficulty(&p1).unwrap() <= coord.difficulty(&p2).unwrap());
        }
    }
}
