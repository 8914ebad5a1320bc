//! Binary-signal tests over a type grid.
//!
//! A test is the curve `pi(theta)` giving each type's probability of the
//! high signal; the low signal is its complement.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::type_space::TypeGrid;

/// Default tolerance for membership in the minimally informative set.
pub const MIN_INFO_TOL: f64 = 1e-12;

/// Slack allowed when validating monotonicity of computed curves.
const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Signal {
    High,
    Low,
}

impl Signal {
    pub const BOTH: [Signal; 2] = [Signal::High, Signal::Low];

    /// Probability of this signal given high-signal probability `pi`.
    #[inline]
    pub fn prob(self, pi: f64) -> f64 {
        match self {
            Signal::High => pi,
            Signal::Low => 1.0 - pi,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Signal::High => "h",
            Signal::Low => "l",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Test {
    grid: Arc<TypeGrid>,
    pi: Arc<[f64]>,
}

impl PartialEq for Test {
    fn eq(&self, other: &Self) -> bool {
        self.pi == other.pi && (Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid)
    }
}

impl Test {
    pub fn new(grid: Arc<TypeGrid>, pi: Vec<f64>) -> Result<Self> {
        if pi.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: pi.len(),
            });
        }
        for (i, &p) in pi.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidTest(format!(
                    "pi[{i}] = {p} lies outside [0,1]"
                )));
            }
        }
        if let Some(i) = pi.windows(2).position(|w| w[1] < w[0] - MONOTONE_SLACK) {
            return Err(Error::InvalidTest(format!(
                "pi decreases between grid points {i} and {}",
                i + 1
            )));
        }
        Ok(Self {
            grid,
            pi: pi.into(),
        })
    }

    /// Uninformative test with `pi = c` everywhere.
    pub fn constant(grid: Arc<TypeGrid>, c: f64) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![c; n])
    }

    pub fn grid(&self) -> &TypeGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<TypeGrid> {
        &self.grid
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn same_grid(&self, other: &Test) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    /// Indices of interior grid points where `pi` touches 0 or 1. These are
    /// tolerated but break strict interiority.
    pub fn interior_warnings(&self) -> Vec<usize> {
        let n = self.pi.len();
        (1..n.saturating_sub(1))
            .filter(|&i| self.pi[i] <= 0.0 || self.pi[i] >= 1.0)
            .collect()
    }

    /// True when the test carries no information about the type.
    pub fn is_uninformative(&self, tol: f64) -> bool {
        let first = self.pi[0];
        self.pi.iter().all(|p| (p - first).abs() <= tol)
    }

    pub fn stats(&self) -> SignalStats {
        SignalStats::compute(&self.grid, &self.pi)
    }

    /// Posterior over the grid after observing `signal` under the grid prior.
    pub fn posterior(&self, signal: Signal) -> Result<Vec<f64>> {
        posterior_under(self.grid.weights(), &self.pi, signal)
            .ok_or(Error::ZeroSignalMass(signal.name()))
    }

    pub fn is_minimally_informative(&self, tol: f64) -> bool {
        self.stats().is_minimally_informative(tol)
    }

    fn map<F: Fn(f64) -> f64>(&self, f: F) -> Result<Self> {
        Self::new(self.grid.clone(), self.pi.iter().map(|&p| f(p)).collect())
    }

    /// Mixture with an uninformative test: `beta * pi + (1 - beta) * c`.
    pub fn garble(&self, beta: f64, c: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) || !(0.0..=1.0).contains(&c) {
            return Err(Error::ParameterOutOfRange(format!(
                "garbling needs beta, c in [0,1], got beta={beta}, c={c}"
            )));
        }
        self.map(|p| beta * p + (1.0 - beta) * c)
    }

    /// Inverse of [`garble`](Self::garble): `c + (pi - c) / beta`. Fails when
    /// the result leaves `[0,1]`.
    pub fn degarble(&self, beta: f64, c: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::ParameterOutOfRange(format!(
                "de-garbling needs beta in (0,1], got {beta}"
            )));
        }
        self.map(|p| c + (p - c) / beta)
    }

    /// Same value at the lowest type, slope scaled by `c` everywhere.
    pub fn damp_slope(&self, c: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::ParameterOutOfRange(format!(
                "slope factor must lie in [0,1], got {c}"
            )));
        }
        let base = self.pi[0];
        self.map(|p| base + c * (p - base))
    }

    /// Additive shift `pi + c`.
    pub fn shift(&self, c: f64) -> Result<Self> {
        self.map(|p| p + c)
    }

    /// Pointwise power `pi^c`, `c > 0`.
    pub fn power(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::ParameterOutOfRange(format!(
                "power must be positive, got {c}"
            )));
        }
        self.map(|p| p.powf(c))
    }

    /// Deterministic certification test `1[theta >= cut]`.
    pub fn threshold(grid: Arc<TypeGrid>, cut: f64) -> Result<Self> {
        let pi = grid
            .theta()
            .iter()
            .map(|&t| if t >= cut { 1.0 } else { 0.0 })
            .collect();
        Self::new(grid, pi)
    }
}

/// Posterior over grid points for a given prior and high-signal curve.
/// `None` when the signal has zero probability under the prior.
pub fn posterior_under(prior: &[f64], pi: &[f64], signal: Signal) -> Option<Vec<f64>> {
    let joint: Vec<f64> = prior
        .iter()
        .zip(pi)
        .map(|(w, &p)| w * signal.prob(p))
        .collect();
    let mass: f64 = joint.iter().sum();
    if mass <= 0.0 {
        return None;
    }
    Some(joint.into_iter().map(|j| j / mass).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalStats {
    /// Probability of the high signal.
    pub pi_bar: f64,
    pub int_theta_pi: f64,
    pub int_theta_1mpi: f64,
    /// Posterior mean type after the high signal; `None` if that signal
    /// never occurs.
    pub post_mean_h: Option<f64>,
    pub post_mean_l: Option<f64>,
}

impl SignalStats {
    pub fn compute(grid: &TypeGrid, pi: &[f64]) -> Self {
        let theta = grid.theta();
        let pi_bar = grid.integrate(|i| pi[i]);
        let int_theta_pi = grid.integrate(|i| theta[i] * pi[i]);
        let int_theta_1mpi = grid.integrate(|i| theta[i] * (1.0 - pi[i]));
        let post_mean_h = (pi_bar > 0.0).then(|| int_theta_pi / pi_bar);
        let post_mean_l = (pi_bar < 1.0).then(|| int_theta_1mpi / (1.0 - pi_bar));
        Self {
            pi_bar,
            int_theta_pi,
            int_theta_1mpi,
            post_mean_h,
            post_mean_l,
        }
    }

    pub fn mean_type(&self) -> f64 {
        self.int_theta_pi + self.int_theta_1mpi
    }

    /// High signal weakly good news and low signal weakly bad news relative
    /// to the zero acceptance threshold.
    pub fn is_minimally_informative(&self, tol: f64) -> bool {
        self.int_theta_1mpi <= tol && self.int_theta_pi >= -tol
    }
}

/// Parametric families indexed by an accuracy parameter `sigma` and a
/// difficulty parameter `d`.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `(sigma/2 + (1 - sigma) x)^d` with `x` the type rescaled to `[0,1]`.
    PowerLinear,
    /// `sigma * base + (1 - sigma) d`.
    LinearMix { base: Option<Vec<f64>> },
    /// `Pr[theta + sigma * eps >= d]`, `eps ~ U[0,1]`.
    ThresholdNoiseUniform,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::PowerLinear => "power_linear",
            Family::LinearMix { .. } => "linear_mix",
            Family::ThresholdNoiseUniform => "threshold_noise_uniform",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyParams {
    pub family: Family,
    pub sigma: f64,
    pub d: f64,
}

impl FamilyParams {
    pub fn new(family: Family, sigma: f64, d: f64) -> Self {
        Self { family, sigma, d }
    }

    pub fn build(&self, grid: Arc<TypeGrid>) -> Result<Test> {
        build_family_test(self, grid)
    }
}

/// Identity ramp on grid position squeezed into `(0.05, 0.95)`.
pub fn default_ramp(grid: &TypeGrid) -> Vec<f64> {
    let (lo, hi) = (grid.theta_min(), grid.theta_max());
    grid.theta()
        .iter()
        .map(|&t| 0.05 + 0.9 * (t - lo) / (hi - lo))
        .collect()
}

pub fn build_family_test(params: &FamilyParams, grid: Arc<TypeGrid>) -> Result<Test> {
    let FamilyParams { family, sigma, d } = params;
    let (sigma, d) = (*sigma, *d);
    let (lo, hi) = (grid.theta_min(), grid.theta_max());
    let span = hi - lo;
    let pi: Vec<f64> = match family {
        Family::PowerLinear => {
            if !(0.0..=1.0).contains(&sigma) || !(d > 0.0) {
                return Err(Error::ParameterOutOfRange(format!(
                    "power-linear needs sigma in [0,1] and d > 0, got sigma={sigma}, d={d}"
                )));
            }
            grid.theta()
                .iter()
                .map(|&t| (sigma / 2.0 + (1.0 - sigma) * (t - lo) / span).powf(d))
                .collect()
        }
        Family::LinearMix { base } => {
            if !(0.0..=1.0).contains(&sigma) || !(0.0..=1.0).contains(&d) {
                return Err(Error::ParameterOutOfRange(format!(
                    "linear mix needs sigma, d in [0,1], got sigma={sigma}, d={d}"
                )));
            }
            let ramp;
            let base = match base {
                Some(b) => {
                    if b.len() != grid.len() {
                        return Err(Error::LengthMismatch {
                            expected: grid.len(),
                            got: b.len(),
                        });
                    }
                    if b.windows(2).any(|w| w[1] <= w[0]) || b.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
                        return Err(Error::ParameterOutOfRange(
                            "base curve must be increasing inside (0,1)".into(),
                        ));
                    }
                    b.as_slice()
                }
                None => {
                    ramp = default_ramp(&grid);
                    ramp.as_slice()
                }
            };
            base.iter().map(|&p| sigma * p + (1.0 - sigma) * d).collect()
        }
        Family::ThresholdNoiseUniform => {
            if !(sigma > 0.0) {
                return Err(Error::ParameterOutOfRange(format!(
                    "noise scale must be positive, got {sigma}"
                )));
            }
            if !(lo > d - sigma && hi < d) {
                return Err(Error::ParameterOutOfRange(format!(
                    "support [{lo}, {hi}] must lie inside ({}, {d})",
                    d - sigma
                )));
            }
            grid.theta().iter().map(|&t| 1.0 - (d - t) / sigma).collect()
        }
    };
    Test::new(grid, pi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bin(mu: f64) -> Arc<TypeGrid> {
        Arc::new(TypeGrid::binary(-1.0, 1.0, mu).unwrap())
    }

    #[test]
    fn stats_binary() {
        let t = Test::new(bin(0.4), vec![0.2, 0.8]).unwrap();
        let s = t.stats();
        assert_abs_diff_eq!(s.pi_bar, 0.44, epsilon = 1e-12);
        assert_abs_diff_eq!(s.int_theta_pi, 0.20, epsilon = 1e-12);
        assert_abs_diff_eq!(s.int_theta_1mpi, -0.40, epsilon = 1e-12);
        assert_abs_diff_eq!(s.post_mean_h.unwrap(), 0.2 / 0.44, epsilon = 1e-12);
        assert!(s.is_minimally_informative(MIN_INFO_TOL));

        let t = Test::new(bin(0.5), vec![0.2, 0.8]).unwrap();
        let s = t.stats();
        assert_abs_diff_eq!(s.pi_bar, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.int_theta_pi, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn posterior_masses() {
        let t = Test::new(bin(0.5), vec![0.2, 0.8]).unwrap();
        assert_abs_diff_eq!(t.posterior(Signal::High).unwrap()[1], 0.8, epsilon = 1e-12);
        let t = Test::new(bin(0.4), vec![0.2, 0.8]).unwrap();
        assert_abs_diff_eq!(t.posterior(Signal::High).unwrap()[1], 0.32 / 0.44, epsilon = 1e-12);
        let t = Test::constant(bin(0.4), 1.0).unwrap();
        assert_eq!(t.posterior(Signal::Low), Err(Error::ZeroSignalMass("l")));
        assert!(t.stats().post_mean_l.is_none());
    }

    #[test]
    fn uninformative_not_minimal_when_mean_negative() {
        let t = Test::constant(bin(0.4), 0.5).unwrap();
        assert!(!t.is_minimally_informative(MIN_INFO_TOL));
        let t = Test::new(bin(0.4), vec![0.35, 0.65]).unwrap();
        let s = t.stats();
        assert_abs_diff_eq!(s.int_theta_pi, 0.05, epsilon = 1e-12);
        assert_abs_diff_eq!(s.int_theta_1mpi, -0.25, epsilon = 1e-12);
        assert!(s.is_minimally_informative(MIN_INFO_TOL));
    }

    #[test]
    fn family_corner_cases() {
        let g = Arc::new(TypeGrid::uniform(0.0, 1.0, 11).unwrap());
        let t = build_family_test(&FamilyParams::new(Family::PowerLinear, 1.0, 2.0), g.clone()).unwrap();
        assert!(t.pi().iter().all(|&p| (p - 0.25).abs() < 1e-15));
        let t = build_family_test(&FamilyParams::new(Family::PowerLinear, 0.0, 1.0), g.clone()).unwrap();
        for (p, th) in t.pi().iter().zip(g.theta()) {
            assert_abs_diff_eq!(*p, *th, epsilon = 1e-15);
        }
        let t = build_family_test(
            &FamilyParams::new(Family::LinearMix { base: None }, 0.0, 0.3),
            g.clone(),
        )
        .unwrap();
        assert!(t.pi().iter().all(|&p| (p - 0.3).abs() < 1e-15));
    }

    #[test]
    fn threshold_support_condition() {
        let g = Arc::new(TypeGrid::uniform(0.0, 1.0, 11).unwrap());
        let p = FamilyParams::new(Family::ThresholdNoiseUniform, 1.5, 1.2);
        let t = p.build(g.clone()).unwrap();
        assert_abs_diff_eq!(t.pi()[0], 1.0 - 1.2 / 1.5, epsilon = 1e-12);
        assert!(FamilyParams::new(Family::ThresholdNoiseUniform, 1.0, 1.2).build(g.clone()).is_err());
        assert!(FamilyParams::new(Family::ThresholdNoiseUniform, 1.5, 0.9).build(g).is_err());
    }

    #[test]
    fn rejects_decreasing_curve() {
        assert!(Test::new(bin(0.5), vec![0.8, 0.2]).is_err());
        assert!(Test::new(bin(0.5), vec![-0.1, 0.2]).is_err());
    }

    #[test]
    fn transforms() {
        let t = Test::new(bin(0.5), vec![0.2, 0.8]).unwrap();
        assert_eq!(t.garble(0.5, 0.5).unwrap().pi(), &[0.35, 0.65]);
        let back = t.garble(0.5, 0.5).unwrap().degarble(0.5, 0.5).unwrap();
        assert_abs_diff_eq!(back.pi()[0], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(t.damp_slope(0.5).unwrap().pi()[1], 0.5, epsilon = 1e-15);
        assert!(t.shift(0.3).is_err());
        assert!(t.degarble(0.2, 0.5).is_err());
    }
}
