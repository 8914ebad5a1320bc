//! Wage competition: firms post a test, acceptance rule and a transfer per
//! signal, and candidates maximise their expected transfer.

use crate::equilibrium::{deviation_payoff, symmetric_payoff, TestSet};
use crate::error::{Error, Result};
use crate::market::{Market, MarketMode, Procedure};
use crate::orders::{compare_difficulty, Comparison};
use crate::par;
use crate::signal::Test;

/// Wage that leaves zero profit when hiring exactly the high signals.
pub fn zero_profit_wage(test: &Test) -> Result<f64> {
    let s = test.stats();
    if s.pi_bar <= 0.0 {
        return Err(Error::ZeroSignalMass("h"));
    }
    Ok((s.int_theta_pi / s.pi_bar).max(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WageSearch {
    /// Acceptance grid for high-signal-only deviations.
    pub alpha_steps: usize,
    /// Wage grid on `[0, theta_max]`.
    pub wage_steps: usize,
    /// Relative markups `eps` tried on each test's own zero-profit wage and
    /// on the candidate's wage.
    pub markups: Vec<f64>,
    /// Coarse grid for deviations that also accept low signals.
    pub mixed_steps: usize,
    /// Step used for the cross-subsidy and breakpoint perturbations.
    pub epsilon: f64,
    pub gain_tol: f64,
    pub wage_tol: f64,
    pub parallel: bool,
}

impl Default for WageSearch {
    fn default() -> Self {
        Self {
            alpha_steps: 21,
            wage_steps: 201,
            markups: vec![-0.05, -0.01, 0.001, 0.01, 0.05, 0.1, 0.2, 0.3, 0.5],
            mixed_steps: 6,
            epsilon: 1e-6,
            gain_tol: 1e-9,
            wage_tol: 1e-10,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WageReport {
    pub candidate: Procedure,
    pub alpha_l_zero: bool,
    pub difficulty_maximal: bool,
    pub zero_profit_wage: f64,
    pub wage_matches: bool,
    /// Industry profit under symmetric play.
    pub total_profit: f64,
    /// Gain of the raise-high/cut-low transfer deviation, when it applies.
    pub cross_subsidy_gain: Option<f64>,
    pub cross_subsidy_deviation: Option<Procedure>,
    pub best_deviation: Procedure,
    pub best_gain: f64,
    pub no_deviation: bool,
    pub deviations_checked: usize,
}

impl WageReport {
    pub fn passes(&self) -> bool {
        self.alpha_l_zero && self.difficulty_maximal && self.wage_matches && self.no_deviation
    }
}

/// Transfer deviation that raises the high-signal wage by `eps` and lowers
/// the low-signal wage to keep the firm's unselected profit unchanged. When
/// the low-signal wage is already zero, it drops low-signal hiring instead.
pub fn cross_subsidy_deviation(candidate: &Procedure, eps: f64) -> Result<Option<Procedure>> {
    if candidate.alpha_l <= 0.0 {
        return Ok(None);
    }
    let pi_bar = candidate.test.stats().pi_bar;
    if candidate.wage_l > 0.0 {
        if pi_bar >= 1.0 {
            return Ok(None);
        }
        let delta = eps * candidate.alpha_h * pi_bar / (candidate.alpha_l * (1.0 - pi_bar));
        let delta = delta.min(candidate.wage_l);
        let eps = delta * candidate.alpha_l * (1.0 - pi_bar) / (candidate.alpha_h * pi_bar).max(f64::MIN_POSITIVE);
        Procedure::with_wages(
            candidate.test.clone(),
            candidate.alpha_h,
            candidate.alpha_l,
            candidate.wage_h + eps,
            candidate.wage_l - delta,
        )
        .map(Some)
    } else {
        Procedure::with_wages(candidate.test.clone(), candidate.alpha_h, 0.0, candidate.wage_h, 0.0).map(Some)
    }
}

/// Checks acceptance after low signals, difficulty maximality, the zero
/// profit wage, and searches test/acceptance/wage deviations.
pub fn verify_wage_equilibrium(candidate: &Procedure, set: &TestSet, search: &WageSearch) -> Result<WageReport> {
    set.index_of(&candidate.test).ok_or(Error::CandidateNotInSet)?;
    let market = Market::new(MarketMode::Wage);
    let eq_payoff = symmetric_payoff(&market, candidate);
    let rival_u = market.utility_curve(candidate, 1.0);
    let theta_max = set.grid().theta_max().max(0.0);

    let mut difficulty_maximal = true;
    for t in set.tests() {
        if compare_difficulty(t, &candidate.test)? == Comparison::MoreThan {
            difficulty_maximal = false;
            break;
        }
    }
    let m_zero = zero_profit_wage(&candidate.test)?;

    let mut devs: Vec<(usize, f64, f64, f64, f64)> = vec![];
    let ci = set.index_of(&candidate.test).expect("checked above");
    devs.push((ci, candidate.alpha_h, candidate.alpha_l, candidate.wage_h, candidate.wage_l));
    let na = search.alpha_steps.max(2) - 1;
    let nw = search.wage_steps.max(2) - 1;
    for (j, t) in set.tests().iter().enumerate() {
        let mut wages: Vec<f64> = (0..=nw).map(|k| theta_max * k as f64 / nw as f64).collect();
        if let Ok(m) = zero_profit_wage(t) {
            wages.push(m);
            for &e in &search.markups {
                wages.push((m * (1.0 + e)).max(0.0));
            }
        }
        for &e in &search.markups {
            wages.push((candidate.wage_h * (1.0 + e)).max(0.0));
        }
        // wages making each type indifferent at full high-signal acceptance
        for (i, &p) in t.pi().iter().enumerate() {
            if p > 0.0 {
                let w = rival_u[i] / p;
                for x in [w - search.epsilon, w + search.epsilon] {
                    if x >= 0.0 {
                        wages.push(x);
                    }
                }
            }
        }
        for a in 0..=na {
            let a = a as f64 / na as f64;
            for &w in &wages {
                devs.push((j, a, 0.0, w, 0.0));
            }
        }
        let nm = search.mixed_steps.max(2) - 1;
        for b in 1..=nm {
            let b = b as f64 / nm as f64;
            for x in 0..=nm {
                for y in 0..=nm {
                    let wh = theta_max * x as f64 / nm as f64;
                    let wl = theta_max * y as f64 / nm as f64;
                    devs.push((j, 1.0, b, wh, wl));
                }
            }
        }
    }
    let payoffs = par::map_slice(&devs, search.parallel, |&(j, h, l, wh, wl)| {
        let dev = Procedure::with_wages(set.get(j).clone(), h, l, wh, wl).expect("valid deviation");
        deviation_payoff(&market, &dev, &rival_u)
    });
    let k = par::argmax_first(&payoffs).expect("nonempty");
    let (j, h, l, wh, wl) = devs[k];
    let mut best_gain = (payoffs[k] - eq_payoff).max(0.0);
    let mut best_deviation = Procedure::with_wages(set.get(j).clone(), h, l, wh, wl)?;

    let cross = cross_subsidy_deviation(candidate, search.epsilon.max(1e-4))?;
    let cross_subsidy_gain = cross.as_ref().map(|d| (deviation_payoff(&market, d, &rival_u) - eq_payoff).max(0.0));
    if let (Some(d), Some(g)) = (&cross, cross_subsidy_gain) {
        if g > best_gain {
            best_gain = g;
            best_deviation = d.clone();
        }
    }

    Ok(WageReport {
        candidate: candidate.clone(),
        alpha_l_zero: candidate.alpha_l == 0.0,
        difficulty_maximal,
        zero_profit_wage: m_zero,
        wage_matches: (candidate.wage_h - m_zero).abs() <= search.wage_tol.max(1e-12 * m_zero),
        total_profit: 2.0 * eq_payoff,
        cross_subsidy_gain,
        cross_subsidy_deviation: cross,
        best_deviation,
        best_gain,
        no_deviation: best_gain <= search.gain_tol,
        deviations_checked: devs.len() + usize::from(cross_subsidy_gain.is_some()),
    })
}
