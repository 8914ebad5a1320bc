//! Discretised type space.
//!
//! Every integral against the type distribution becomes a weighted sum over
//! a finite grid. Binary grids (two points, high-type mass `mu`) are a
//! first-class kind because several closed forms only exist there.

use crate::error::{Error, Result};

/// Default number of points for uniform continuous grids.
pub const DEFAULT_GRID_POINTS: usize = 201;

const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeGrid {
    theta: Vec<f64>,
    weight: Vec<f64>,
    kind: GridKind,
}

impl TypeGrid {
    /// Builds a grid from explicit points and weights. Weights are
    /// normalised when they sum to something other than one, so table
    /// densities may be given in any positive units.
    pub fn new(theta: Vec<f64>, weight: Vec<f64>, kind: GridKind) -> Result<Self> {
        if theta.len() != weight.len() {
            return Err(Error::LengthMismatch {
                expected: theta.len(),
                got: weight.len(),
            });
        }
        if theta.is_empty() {
            return Err(Error::InvalidGrid("grid has no points".into()));
        }
        if kind == GridKind::Binary && theta.len() != 2 {
            return Err(Error::InvalidGrid(format!(
                "binary grid needs exactly two points, got {}",
                theta.len()
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidGrid("non-finite type value".into()));
        }
        if theta.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("theta must be strictly increasing".into()));
        }
        if weight.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidGrid("every weight must be positive".into()));
        }
        let total: f64 = weight.iter().sum();
        let weight = if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            weight.into_iter().map(|w| w / total).collect()
        } else {
            weight
        };
        Ok(Self {
            theta,
            weight,
            kind,
        })
    }

    /// Two-point grid with mass `mu` on the high type.
    pub fn binary(theta_low: f64, theta_high: f64, mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu < 1.0) {
            return Err(Error::InvalidGrid(format!("mu must lie in (0,1), got {mu}")));
        }
        Self::new(
            vec![theta_low, theta_high],
            vec![1.0 - mu, mu],
            GridKind::Binary,
        )
    }

    /// Uniformly spaced points with equal weights.
    pub fn uniform(theta_min: f64, theta_max: f64, n: usize) -> Result<Self> {
        Self::from_density(theta_min, theta_max, n, |_| 1.0)
    }

    /// Uniform points on `[theta_min, theta_max]` weighted by a density using
    /// the trapezoid rule, so smooth integrands converge at O(h^2).
    pub fn from_density<F: Fn(f64) -> f64>(
        theta_min: f64,
        theta_max: f64,
        n: usize,
        density: F,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {n}")));
        }
        if !(theta_max > theta_min) {
            return Err(Error::InvalidGrid(format!(
                "empty support [{theta_min}, {theta_max}]"
            )));
        }
        let h = (theta_max - theta_min) / (n - 1) as f64;
        let theta: Vec<f64> = (0..n)
            .map(|i| if i == n - 1 { theta_max } else { theta_min + h * i as f64 })
            .collect();
        let weight = theta
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let end = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                end * density(t)
            })
            .collect();
        Self::new(theta, weight, GridKind::Continuous)
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn is_binary(&self) -> bool {
        self.kind == GridKind::Binary
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn theta_min(&self) -> f64 {
        self.theta[0]
    }

    pub fn theta_max(&self) -> f64 {
        self.theta[self.theta.len() - 1]
    }

    /// Mass on the top grid point; for binary grids this is `mu`.
    pub fn mu(&self) -> f64 {
        self.weight[self.weight.len() - 1]
    }

    pub fn mean_type(&self) -> f64 {
        self.integrate(|i| self.theta[i])
    }

    /// `sum_i w_i * f(i)`.
    pub fn integrate<F: Fn(usize) -> f64>(&self, f: F) -> f64 {
        self.weight.iter().enumerate().map(|(i, w)| w * f(i)).sum()
    }

    pub fn brackets_zero(&self) -> bool {
        self.theta_min() <= 0.0 && self.theta_max() >= 0.0
    }

    /// Value of a grid-aligned sequence at θ = 0 by linear interpolation.
    pub fn interpolate_at_zero(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: values.len(),
            });
        }
        if !self.brackets_zero() {
            return Err(Error::GridDoesNotBracketZero {
                min: self.theta_min(),
                max: self.theta_max(),
            });
        }
        // first index with theta >= 0
        let j = self.theta.partition_point(|&t| t < 0.0);
        if self.theta[j] == 0.0 || j == 0 {
            return Ok(values[j]);
        }
        let (t0, t1) = (self.theta[j - 1], self.theta[j]);
        let s = -t0 / (t1 - t0);
        Ok(values[j - 1] + s * (values[j] - values[j - 1]))
    }

    /// Same grid with every type multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::ParameterOutOfRange(format!("scale must be positive, got {c}")));
        }
        Self::new(
            self.theta.iter().map(|t| t * c).collect(),
            self.weight.clone(),
            self.kind,
        )
    }

    /// Same points, different weights (used for prior sweeps).
    pub fn with_weights(&self, weight: Vec<f64>) -> Result<Self> {
        Self::new(self.theta.clone(), weight, self.kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn binary_means() {
        for (mu, want) in [(0.4, -0.2), (0.5, 0.0), (0.6, 0.2)] {
            let g = TypeGrid::binary(-1.0, 1.0, mu).unwrap();
            assert_abs_diff_eq!(g.mean_type(), want, epsilon = 1e-15);
        }
    }

    #[test]
    fn interpolation_cases() {
        let g = TypeGrid::binary(-1.0, 1.0, 0.5).unwrap();
        assert_abs_diff_eq!(g.interpolate_at_zero(&[0.2, 0.8]).unwrap(), 0.5, epsilon = 1e-15);
        let g = TypeGrid::uniform(-1.0, 1.0, 3).unwrap();
        assert_eq!(g.interpolate_at_zero(&[0.2, 0.5, 0.8]).unwrap(), 0.5);
        let g = TypeGrid::new(vec![-0.5, 1.5], vec![0.5, 0.5], GridKind::Continuous).unwrap();
        assert_abs_diff_eq!(g.interpolate_at_zero(&[0.0, 1.0]).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn interpolation_needs_zero_bracket() {
        let g = TypeGrid::uniform(0.5, 1.0, 5).unwrap();
        assert!(matches!(
            g.interpolate_at_zero(&[0.0; 5]),
            Err(Error::GridDoesNotBracketZero { .. })
        ));
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TypeGrid::new(vec![0.0, 0.0], vec![0.5, 0.5], GridKind::Continuous).is_err());
        assert!(TypeGrid::new(vec![0.0, 1.0], vec![1.0, 0.0], GridKind::Continuous).is_err());
        assert!(TypeGrid::new(vec![0.0, 1.0, 2.0], vec![1.0; 3], GridKind::Binary).is_err());
        assert!(TypeGrid::binary(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn table_weights_are_normalised() {
        let g = TypeGrid::new(vec![0.0, 1.0], vec![1.0, 3.0], GridKind::Continuous).unwrap();
        assert_abs_diff_eq!(g.weights()[1], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn uniform_endpoints_exact() {
        let g = TypeGrid::uniform(-1.0, 0.7, DEFAULT_GRID_POINTS).unwrap();
        assert_eq!(g.theta_min(), -1.0);
        assert_eq!(g.theta_max(), 0.7);
        assert_abs_diff_eq!(g.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }
}
