//! The stage game: selection procedures, candidates' choice between the two
//! firms, and firm payoffs.

use crate::error::{Error, Result};
use crate::signal::Test;

/// Default width of the indifference band in candidate choice.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MarketMode {
    #[default]
    Baseline,
    Capacity,
    Wage,
}

impl std::str::FromStr for MarketMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(MarketMode::Baseline),
            "capacity" => Ok(MarketMode::Capacity),
            "wage" => Ok(MarketMode::Wage),
            other => Err(Error::ParameterOutOfRange(format!("unknown market mode '{other}'"))),
        }
    }
}

/// A posted test with acceptance probabilities after each signal and,
/// in wage mode, a transfer paid on acceptance after each signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Procedure {
    pub test: Test,
    pub alpha_h: f64,
    pub alpha_l: f64,
    pub wage_h: f64,
    pub wage_l: f64,
}

impl Procedure {
    pub fn new(test: Test, alpha_h: f64, alpha_l: f64) -> Result<Self> {
        Self::with_wages(test, alpha_h, alpha_l, 0.0, 0.0)
    }

    pub fn with_wages(test: Test, alpha_h: f64, alpha_l: f64, wage_h: f64, wage_l: f64) -> Result<Self> {
        for (name, a) in [("alpha_h", alpha_h), ("alpha_l", alpha_l)] {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::ParameterOutOfRange(format!("{name} = {a} outside [0,1]")));
            }
        }
        for (name, m) in [("wage_h", wage_h), ("wage_l", wage_l)] {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(Error::ParameterOutOfRange(format!("{name} = {m} must be nonnegative")));
            }
        }
        Ok(Self {
            test,
            alpha_h,
            alpha_l,
            wage_h,
            wage_l,
        })
    }

    /// Procedure on a one-dimensional cutoff scale `a` in `[0,2]`: below one
    /// only part of the high signal is accepted, above one all high signals
    /// and a fraction `a - 1` of low signals.
    pub fn from_cutoff(test: Test, a: f64) -> Result<Self> {
        let (h, l) = cutoff_alpha(a);
        Self::new(test, h, l)
    }

    #[inline]
    pub fn acceptance(&self, i: usize) -> f64 {
        let p = self.test.pi()[i];
        self.alpha_h * p + self.alpha_l * (1.0 - p)
    }

    pub fn acceptance_curve(&self) -> Vec<f64> {
        (0..self.test.len()).map(|i| self.acceptance(i)).collect()
    }

    /// Expected transfer to type `i` (wage mode, before rationing).
    #[inline]
    pub fn expected_wage(&self, i: usize) -> f64 {
        let p = self.test.pi()[i];
        self.alpha_h * p * self.wage_h + self.alpha_l * (1.0 - p) * self.wage_l
    }

    pub fn is_cutoff_form(&self) -> bool {
        self.alpha_l <= 0.0 || self.alpha_h >= 1.0
    }
}

/// `(alpha_h, alpha_l)` for cutoff parameter `a` in `[0,2]`.
pub fn cutoff_alpha(a: f64) -> (f64, f64) {
    let a = a.clamp(0.0, 2.0);
    if a <= 1.0 {
        (a, 0.0)
    } else {
        (1.0, a - 1.0)
    }
}

/// Per-type probability of applying to firm 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ApplicationProfile {
    pub phi: Vec<f64>,
}

impl ApplicationProfile {
    pub fn uniform(n: usize, value: f64) -> Self {
        Self { phi: vec![value; n] }
    }

    /// Probabilities of applying to firm 2.
    pub fn complement(&self) -> Self {
        Self {
            phi: self.phi.iter().map(|p| 1.0 - p).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Market {
    pub mode: MarketMode,
    pub tie_tol: f64,
}

impl Default for Market {
    fn default() -> Self {
        Self {
            mode: MarketMode::Baseline,
            tie_tol: TIE_TOL,
        }
    }
}

impl Market {
    pub fn new(mode: MarketMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    /// What type `i` expects from applying to `proc` given that an acceptance
    /// survives rationing with probability `ration`.
    #[inline]
    pub fn utility(&self, proc: &Procedure, i: usize, ration: f64) -> f64 {
        match self.mode {
            MarketMode::Wage => ration * proc.expected_wage(i),
            MarketMode::Baseline | MarketMode::Capacity => ration * proc.acceptance(i),
        }
    }

    pub fn utility_curve(&self, proc: &Procedure, ration: f64) -> Vec<f64> {
        (0..proc.test.len()).map(|i| self.utility(proc, i, ration)).collect()
    }

    /// Each type applies to the firm offering higher utility, splitting
    /// evenly when the two are within `tie_tol`.
    pub fn best_response_split(
        &self,
        proc1: &Procedure,
        proc2: &Procedure,
        ration1: f64,
        ration2: f64,
    ) -> ApplicationProfile {
        let phi = (0..proc1.test.len())
            .map(|i| {
                choice(
                    self.utility(proc1, i, ration1),
                    self.utility(proc2, i, ration2),
                    self.tie_tol,
                )
            })
            .collect();
        ApplicationProfile { phi }
    }

    /// Profit of a firm running `own` when type `i` applies to it with
    /// probability `share[i]` and acceptances are never rationed.
    pub fn firm_payoff(&self, own: &Procedure, share: &[f64]) -> f64 {
        let grid = own.test.grid();
        let theta = grid.theta();
        let pi = own.test.pi();
        match self.mode {
            MarketMode::Wage => grid.integrate(|i| {
                share[i]
                    * ((theta[i] - own.wage_h) * own.alpha_h * pi[i]
                        + (theta[i] - own.wage_l) * own.alpha_l * (1.0 - pi[i]))
            }),
            MarketMode::Baseline | MarketMode::Capacity => {
                grid.integrate(|i| share[i] * theta[i] * own.acceptance(i))
            }
        }
    }

    /// Payoffs of both firms under a profile describing applications to
    /// firm 1.
    pub fn payoffs(&self, proc1: &Procedure, proc2: &Procedure, profile: &ApplicationProfile) -> (f64, f64) {
        let other = profile.complement();
        (
            self.firm_payoff(proc1, &profile.phi),
            self.firm_payoff(proc2, &other.phi),
        )
    }
}

/// Probability of choosing the first option given the two utilities.
#[inline]
pub fn choice(u1: f64, u2: f64, tie_tol: f64) -> f64 {
    if u1 > u2 + tie_tol {
        1.0
    } else if u2 > u1 + tie_tol {
        0.0
    } else {
        0.5
    }
}

/// Cutoff-form procedure with the same acceptance probability at θ = 0.
pub fn to_cutoff(proc: &Procedure) -> Result<Procedure> {
    let pi0 = proc.test.grid().interpolate_at_zero(proc.test.pi())?;
    let acc0 = proc.alpha_h * pi0 + proc.alpha_l * (1.0 - pi0);
    let (h, l) = if acc0 <= pi0 {
        let h = if pi0 > 0.0 { acc0 / pi0 } else { 1.0 };
        (h.min(1.0), 0.0)
    } else {
        (1.0, ((acc0 - pi0) / (1.0 - pi0)).min(1.0))
    };
    Procedure::with_wages(proc.test.clone(), h, l, proc.wage_h, proc.wage_l)
}
