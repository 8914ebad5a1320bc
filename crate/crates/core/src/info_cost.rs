//! Posterior-separable test costs and budget-constrained equilibria.
//!
//! A test's cost is the signal-weighted divergence of each posterior from
//! the prior, always evaluated at the market prior.

use crate::equilibrium::{scan_deviations, symmetric_payoff, SearchConfig, TestSet};
use crate::error::{Error, Result};
use crate::market::{Market, Procedure};
use crate::orders::{compare_difficulty, Comparison};
use crate::signal::{Signal, Test};

pub const COST_TOL: f64 = 1e-8;
pub const BISECTION_ITERS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Divergence {
    /// Relative entropy to the prior; the total cost is mutual information
    /// in nats.
    #[default]
    KlToPrior,
    /// Pearson chi-square distance to the prior.
    QuadraticToPrior,
}

impl std::str::FromStr for Divergence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kl" | "kl_to_prior" => Ok(Divergence::KlToPrior),
            "quadratic" | "quadratic_to_prior" => Ok(Divergence::QuadraticToPrior),
            other => Err(Error::ParameterOutOfRange(format!("unknown divergence '{other}'"))),
        }
    }
}

impl Divergence {
    /// Divergence of posterior `g` from prior `f`.
    pub fn eval(self, g: &[f64], f: &[f64]) -> f64 {
        match self {
            Divergence::KlToPrior => g
                .iter()
                .zip(f)
                .filter(|(gi, _)| **gi > 0.0)
                .map(|(gi, fi)| gi * (gi / fi).ln())
                .sum(),
            Divergence::QuadraticToPrior => g
                .iter()
                .zip(f)
                .map(|(gi, fi)| (gi - fi).powi(2) / fi)
                .sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostSpec {
    pub divergence: Divergence,
    pub kappa: f64,
}

/// Cost of a test. Informative tests that rule some type in or out for sure
/// (`pi` hitting 0 or 1) cost `+inf`.
pub fn test_cost(test: &Test, divergence: Divergence) -> f64 {
    if test.is_uninformative(0.0) {
        return 0.0;
    }
    if test.pi().iter().any(|&p| p <= 0.0 || p >= 1.0) {
        return f64::INFINITY;
    }
    let prior = test.grid().weights();
    let pi_bar = test.stats().pi_bar;
    let h = test.posterior(Signal::High).expect("interior curve has both signals");
    let l = test.posterior(Signal::Low).expect("interior curve has both signals");
    (pi_bar * divergence.eval(&h, prior) + (1.0 - pi_bar) * divergence.eval(&l, prior)).max(0.0)
}

/// Upper end (exclusive) of the admissible mixing weight for
/// [`easier_mixture`].
pub fn max_mu_mix(test: &Test) -> f64 {
    let top = test.pi()[test.len() - 1];
    let pi_bar = test.stats().pi_bar;
    if pi_bar >= 1.0 {
        0.0
    } else {
        (1.0 - top) / (1.0 - pi_bar)
    }
}

/// Easier test built by mixing the high-signal posterior toward the prior
/// (weight `lambda`) and the low-signal posterior away from it (weight
/// `mu_mix`). At `lambda = mu_mix = 0` it returns the input; at
/// `lambda = 1` it is uninformative.
pub fn easier_mixture(test: &Test, lambda: f64, mu_mix: f64) -> Result<Test> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::ParameterOutOfRange(format!("lambda must lie in [0,1], got {lambda}")));
    }
    let upper = max_mu_mix(test);
    if !(mu_mix >= 0.0 && mu_mix < upper) {
        return Err(Error::ParameterOutOfRange(format!(
            "mu_mix must lie in [0, {upper}), got {mu_mix}"
        )));
    }
    let pi_bar = test.stats().pi_bar;
    let denom = (1.0 - mu_mix) * (1.0 - lambda * (1.0 - pi_bar)) + mu_mix * pi_bar;
    let pi = test
        .pi()
        .iter()
        .map(|&p| ((lambda * pi_bar + (1.0 - lambda) * p) / denom).min(1.0))
        .collect();
    Test::new(test.grid_arc().clone(), pi)
}

/// Largest pointwise violation of the two posterior mixing identities
/// linking `test` and `easier_mixture(test, lambda, mu_mix)`.
pub fn mixing_identity_residual(test: &Test, easier: &Test, lambda: f64, mu_mix: f64) -> Result<f64> {
    let f = test.grid().weights();
    let th = test.posterior(Signal::High)?;
    let tl = test.posterior(Signal::Low)?;
    let dh = easier.posterior(Signal::High)?;
    let dl = easier.posterior(Signal::Low)?;
    let mut worst: f64 = 0.0;
    for i in 0..f.len() {
        worst = worst.max((lambda * f[i] + (1.0 - lambda) * th[i] - dh[i]).abs());
        worst = worst.max((mu_mix * f[i] + (1.0 - mu_mix) * dl[i] - tl[i]).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Isocost {
    pub test: Test,
    pub lambda: f64,
    pub cost: f64,
    pub target: f64,
    pub iterations: usize,
}

/// Strictly easier test with the same cost, found by bisection on the
/// mixing weight toward the prior.
pub fn isocost_easier(test: &Test, divergence: Divergence, mu_mix: f64) -> Result<Isocost> {
    if !(mu_mix > 0.0) {
        return Err(Error::PreconditionFailed(format!(
            "mu_mix must be strictly positive for a strict difficulty ranking, got {mu_mix}"
        )));
    }
    let target = test_cost(test, divergence);
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::PreconditionFailed(format!(
            "input must be informative with finite cost, got cost {target}"
        )));
    }
    let cost_at = |lambda: f64| -> Result<(Test, f64)> {
        let d = easier_mixture(test, lambda, mu_mix)?;
        let c = test_cost(&d, divergence);
        Ok((d, c))
    };
    let (_, c0) = cost_at(0.0)?;
    let (_, c1) = cost_at(1.0)?;
    if !(c0 > target && c1 < target) {
        return Err(Error::NoRootBracketed {
            cost_at_zero: c0,
            cost_at_one: c1,
            target,
        });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut best = None;
    for it in 1..=BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        let (d, c) = cost_at(mid)?;
        let done = (c - target).abs() <= COST_TOL;
        best = Some((d, mid, c, it));
        if done {
            break;
        }
        if c > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (test, lambda, cost, iterations) = best.expect("at least one iteration");
    Ok(Isocost {
        test,
        lambda,
        cost,
        target,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeviationKind {
    EasierMixture,
    Garbling,
    Degarbling,
}

impl DeviationKind {
    pub const ALL: [DeviationKind; 3] = [
        DeviationKind::EasierMixture,
        DeviationKind::Garbling,
        DeviationKind::Degarbling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DeviationKind::EasierMixture => "easier_mixture",
            DeviationKind::Garbling => "garbling",
            DeviationKind::Degarbling => "degarbling",
        }
    }
}

/// Perturbation lattice used to sample the feasible set around a candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSearch {
    pub lambdas: Vec<f64>,
    /// Fractions of the admissible mixing-weight range.
    pub mu_fractions: Vec<f64>,
    pub betas: Vec<f64>,
    pub centers: Vec<f64>,
    pub deviation: SearchConfig,
    pub zero_mean_tol: f64,
}

impl Default for CostSearch {
    fn default() -> Self {
        let grid = |n: usize, lo: f64, hi: f64| -> Vec<f64> {
            (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
        };
        Self {
            lambdas: grid(20, 0.0, 0.95),
            mu_fractions: vec![0.0, 0.01, 0.05, 0.2, 0.5],
            betas: grid(10, 0.5, 0.99),
            centers: vec![0.25, 0.5, 0.75],
            deviation: SearchConfig::default(),
            zero_mean_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KindResult {
    pub kind: DeviationKind,
    pub sampled: usize,
    pub feasible: usize,
    /// Best deviation of this kind, with its cost.
    pub best: Option<(Procedure, f64)>,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub cost: f64,
    pub budget_binds: bool,
    pub zero_mean_high: bool,
    pub equilibrium_payoff: f64,
    pub by_kind: Vec<KindResult>,
    pub best_gain: f64,
    pub no_deviation: bool,
}

impl CostReport {
    pub fn kind(&self, kind: DeviationKind) -> &KindResult {
        self.by_kind
            .iter()
            .find(|r| r.kind == kind)
            .expect("every kind is reported")
    }

    pub fn passes(&self) -> bool {
        self.budget_binds && self.zero_mean_high && self.no_deviation
    }
}

fn sample_kind(test: &Test, kind: DeviationKind, search: &CostSearch) -> Vec<Test> {
    let mut out = Vec::new();
    match kind {
        DeviationKind::EasierMixture => {
            let upper = max_mu_mix(test);
            for &f in &search.mu_fractions {
                for &l in &search.lambdas {
                    if let Ok(d) = easier_mixture(test, l, f * upper) {
                        out.push(d);
                    }
                }
            }
        }
        DeviationKind::Garbling | DeviationKind::Degarbling => {
            let mut centers = search.centers.clone();
            centers.push(test.stats().pi_bar);
            for &c in &centers {
                for &b in &search.betas {
                    let d = if kind == DeviationKind::Garbling {
                        test.garble(b, c)
                    } else {
                        test.degarble(b, c)
                    };
                    if let Ok(d) = d {
                        out.push(d);
                    }
                }
            }
        }
    }
    out
}

/// Checks the three conditions a cost-constrained equilibrium must meet:
/// the budget binds, the high signal leaves a zero posterior mean, and no
/// sampled feasible perturbation of the test is a profitable deviation.
pub fn verify_cost_equilibrium(
    candidate: &Procedure,
    spec: &CostSpec,
    market: &Market,
    search: &CostSearch,
) -> Result<CostReport> {
    let cost = test_cost(&candidate.test, spec.divergence);
    if !cost.is_finite() {
        return Err(Error::PreconditionFailed("candidate test has infinite cost".into()));
    }
    let stats = candidate.test.stats();
    let eq_payoff = symmetric_payoff(market, candidate);
    let mut by_kind = Vec::new();
    for kind in DeviationKind::ALL {
        let sampled = sample_kind(&candidate.test, kind, search);
        let n = sampled.len();
        let mut feasible: Vec<Test> = sampled
            .into_iter()
            .filter(|d| test_cost(d, spec.divergence) <= spec.kappa + COST_TOL)
            .collect();
        let n_feasible = feasible.len();
        if n_feasible == 0 {
            by_kind.push(KindResult {
                kind,
                sampled: n,
                feasible: 0,
                best: None,
                gain: 0.0,
            });
            continue;
        }
        feasible.insert(0, candidate.test.clone());
        let set = TestSet::new(feasible)?;
        let scan = scan_deviations(candidate, &set, market, &search.deviation)?;
        let dev_cost = test_cost(&scan.procedure.test, spec.divergence);
        by_kind.push(KindResult {
            kind,
            sampled: n,
            feasible: n_feasible,
            gain: (scan.payoff - eq_payoff).max(0.0),
            best: Some((scan.procedure, dev_cost)),
        });
    }
    let best_gain = by_kind.iter().map(|r| r.gain).fold(0.0, f64::max);
    Ok(CostReport {
        cost,
        budget_binds: (cost - spec.kappa).abs() <= COST_TOL,
        zero_mean_high: stats.int_theta_pi.abs() <= search.zero_mean_tol,
        equilibrium_payoff: eq_payoff,
        by_kind,
        best_gain,
        no_deviation: best_gain <= search.deviation.gain_tol,
    })
}

/// True when `d` is strictly easier than `t`.
pub fn strictly_easier(t: &Test, d: &Test) -> Result<bool> {
    Ok(compare_difficulty(t, d)? == Comparison::MoreThan)
}
