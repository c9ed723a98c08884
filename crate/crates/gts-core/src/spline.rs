//! Natural cubic spline interpolation.
//!
//! Used to fill in score estimates for task bins that were never sampled.
//! Natural boundary conditions (zero second derivative at the endpoints)
//! keep the interpolant parameter-free.

use crate::error::{Error, Result};

/// A natural cubic spline through `n >= 2` knots with strictly increasing x.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at each knot, from the tridiagonal solve.
    y2s: Vec<f64>,
}

impl CubicSpline {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::Input("spline: xs and ys must have equal length".into()));
        }
        if xs.len() < 2 {
            return Err(Error::State("spline: need at least 2 knots".into()));
        }
        for i in 1..xs.len() {
            if xs[i] <= xs[i - 1] {
                return Err(Error::Input(format!(
                    "spline: xs must be strictly increasing at index {i}"
                )));
            }
        }

        let n = xs.len();
        let mut y2s = vec![0.0; n];
        let mut u = vec![0.0; n - 1];

        // Forward sweep of the tridiagonal system; natural ends stay zero.
        for i in 1..n - 1 {
            let sig = (xs[i] - xs[i - 1]) / (xs[i + 1] - xs[i - 1]);
            let p = sig * y2s[i - 1] + 2.0;
            y2s[i] = (sig - 1.0) / p;
            u[i] = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])
                - (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1]);
            u[i] = (6.0 * u[i] / (xs[i + 1] - xs[i - 1]) - sig * u[i - 1]) / p;
        }

        for k in (0..n - 2).rev() {
            y2s[k + 1] = y2s[k + 1] * y2s[k + 2] + u[k + 1];
        }

        Ok(Self { xs, ys, y2s })
    }

    /// Evaluate at `x`. Outside the knot range the boundary cubic is
    /// extended; callers that want constant extrapolation clamp first.
    pub fn evaluate(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.xs[mid] > x {
                hi = mid;
            } else {
                lo = mid;
            }
        }

        let h = self.xs[hi] - self.xs[lo];
        let a = (self.xs[hi] - x) / h;
        let b = (x - self.xs[lo]) / h;

        a * self.ys[lo]
            + b * self.ys[hi]
            + ((a * a * a - a) * self.y2s[lo] + (b * b * b - b) * self.y2s[hi]) * h * h / 6.0
    }

    pub fn x_min(&self) -> f64 {
        self.xs[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.xs.last().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn passes_through_knots() {
        let xs = vec![0.0, 1.0, 2.0];
        let ys = vec![0.0, 1.0, 0.0];
        let s = CubicSpline::new(xs.clone(), ys.clone()).unwrap();
        for (x, y) in xs.iter().zip(ys.iter()) {
            assert!((s.evaluate(*x) - y).abs() < 1e-12, "spline({x}) != {y}");
        }
        assert_eq!(s.evaluate(1.0), 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(CubicSpline::new(vec![0.0], vec![1.0]).is_err());
        assert!(CubicSpline::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(CubicSpline::new(vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn two_knots_is_linear() {
        let s = CubicSpline::new(vec![0.0, 2.0], vec![1.0, 5.0]).unwrap();
        assert!((s.evaluate(1.0) - 3.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn interpolates_random_knots(ys in proptest::collection::vec(-100.0..100.0f64, 2..20)) {
            let xs: Vec<f64> = (0..ys.len()).map(|i| i as f64 * 0.1).collect();
            let s = CubicSpline::new(xs.clone(), ys.clone()).unwrap();
            for (x, y) in xs.iter().zip(ys.iter()) {
                prop_assert!((s.evaluate(*x) - y).abs() <= 1e-9);
            }
        }
    }
}
