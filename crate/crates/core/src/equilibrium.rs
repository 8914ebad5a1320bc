//! Symmetric equilibria of the baseline market: zero-profit acceptance
//! rules, candidate selection, and verification by deviation search.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::market::{choice, cutoff_alpha, Market, Procedure};
use crate::orders::{compare_accuracy, compare_difficulty, Comparison};
use crate::par;
use crate::signal::{build_family_test, Family, FamilyParams, Test, MIN_INFO_TOL};
use crate::type_space::TypeGrid;

pub const GAIN_TOL: f64 = 1e-9;
pub const ALPHA_STEPS: usize = 101;

/// Offset placed on either side of a type's indifference cutoff.
const BREAKPOINT_EPS: f64 = 1e-7;

/// Finite feasible set of tests sharing one grid, optionally generated from
/// a family lattice.
#[derive(Debug, Clone)]
pub struct TestSet {
    grid: Arc<TypeGrid>,
    tests: Vec<Test>,
    params: Option<Vec<(f64, f64)>>,
}

impl TestSet {
    pub fn new(tests: Vec<Test>) -> Result<Self> {
        let first = tests
            .first()
            .ok_or_else(|| Error::InvalidTest("empty test set".into()))?;
        let grid = first.grid_arc().clone();
        if tests.iter().any(|t| !t.same_grid(first)) {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid,
            tests,
            params: None,
        })
    }

    /// Builds `pi` tables on a shared grid.
    pub fn from_tables(grid: Arc<TypeGrid>, tables: &[Vec<f64>]) -> Result<Self> {
        let tests = tables
            .iter()
            .map(|pi| Test::new(grid.clone(), pi.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(tests)
    }

    /// Every `(sigma, d)` combination, `sigma` varying slowest.
    pub fn from_family(family: &Family, grid: Arc<TypeGrid>, sigmas: &[f64], ds: &[f64]) -> Result<Self> {
        let mut tests = Vec::with_capacity(sigmas.len() * ds.len());
        let mut params = Vec::with_capacity(tests.capacity());
        for &sigma in sigmas {
            for &d in ds {
                let p = FamilyParams::new(family.clone(), sigma, d);
                tests.push(build_family_test(&p, grid.clone())?);
                params.push((sigma, d));
            }
        }
        let mut set = Self::new(tests)?;
        set.params = Some(params);
        Ok(set)
    }

    pub fn grid(&self) -> &TypeGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<TypeGrid> {
        &self.grid
    }

    pub fn tests(&self) -> &[Test] {
        &self.tests
    }

    pub fn get(&self, i: usize) -> &Test {
        &self.tests[i]
    }

    pub fn len(&self) -> usize {
        self.tests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tests.is_empty()
    }

    /// `(sigma, d)` of member `i` when the set came from a family.
    pub fn params(&self, i: usize) -> Option<(f64, f64)> {
        self.params.as_ref().map(|p| p[i])
    }

    pub fn index_of(&self, test: &Test) -> Option<usize> {
        self.tests
            .iter()
            .position(|t| t.same_grid(test) && t.pi() == test.pi())
    }

    pub fn minimally_informative(&self, tol: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.tests[i].is_minimally_informative(tol))
            .collect()
    }

    /// Copy without the listed members; family parameters follow.
    pub fn without(&self, drop: &[usize]) -> Result<Self> {
        let keep: Vec<usize> = (0..self.len()).filter(|i| !drop.contains(i)).collect();
        let mut set = Self::new(keep.iter().map(|&i| self.tests[i].clone()).collect())?;
        set.params = self.params.as_ref().map(|p| keep.iter().map(|&i| p[i]).collect());
        Ok(set)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroProfit {
    pub procedure: Procedure,
    /// False when no acceptance rule lets both firms break even with a
    /// nonzero hiring rate.
    pub supportable: bool,
}

/// Acceptance rule that competition drives to: accept everyone when the
/// pool is good on average, otherwise accept all high signals and just
/// enough low signals to break even.
pub fn zero_profit_alpha(test: &Test, tol: f64) -> ZeroProfit {
    let s = test.stats();
    let mean = s.mean_type();
    let (h, l, supportable) = if mean >= 0.0 {
        (1.0, 1.0, true)
    } else if s.int_theta_pi > tol {
        (1.0, (s.int_theta_pi / -s.int_theta_1mpi).min(1.0), true)
    } else if s.int_theta_pi.abs() <= tol {
        (1.0, 0.0, true)
    } else {
        (0.0, 0.0, false)
    };
    ZeroProfit {
        procedure: Procedure::new(test.clone(), h, l).expect("alphas lie in [0,1]"),
        supportable,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    /// Cutoff resolution: the grid on `[0,2]` has step `1/(alpha_steps-1)`.
    pub alpha_steps: usize,
    pub gain_tol: f64,
    /// Add cutoffs just either side of each type's indifference point.
    pub breakpoints: bool,
    /// Also scan the full `(alpha_h, alpha_l)` square.
    pub full_grid: bool,
    pub parallel: bool,
    pub min_info_tol: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            alpha_steps: ALPHA_STEPS,
            gain_tol: GAIN_TOL,
            breakpoints: true,
            full_grid: false,
            parallel: true,
            min_info_tol: MIN_INFO_TOL,
        }
    }
}

impl SearchConfig {
    pub fn cutoff_grid(&self) -> Vec<f64> {
        let n = self.alpha_steps.max(2) - 1;
        (0..=2 * n).map(|k| k as f64 / n as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StructuralFlags {
    pub zero_profit_ok: bool,
    pub accuracy_maximal: bool,
    pub difficulty_minimal_in_ti: bool,
    pub in_ti: bool,
    /// Members comparable to this test in both orders without being equal
    /// to it (constant likelihood ratio pairs).
    pub knife_edge_pairs: usize,
}

impl StructuralFlags {
    /// The shape an equilibrium test must have when the mean type is negative.
    pub fn selectable(&self) -> bool {
        self.in_ti && self.accuracy_maximal && self.difficulty_minimal_in_ti
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationReport {
    pub candidate: Procedure,
    pub candidate_index: usize,
    pub equilibrium_payoff: f64,
    pub best_deviation: Procedure,
    pub best_deviation_index: usize,
    pub best_deviation_payoff: f64,
    pub best_gain: f64,
    pub is_equilibrium: bool,
    pub structural: StructuralFlags,
    pub deviations_checked: usize,
}

/// Flags describing where `set[index]` sits in the two orders.
pub fn structural_checks(index: usize, set: &TestSet, tol: f64) -> Result<StructuralFlags> {
    let test = set.get(index);
    let in_ti = test.is_minimally_informative(tol);
    let mut accuracy_maximal = true;
    let mut difficulty_minimal_in_ti = true;
    let mut knife_edge_pairs = 0;
    for (j, other) in set.tests().iter().enumerate() {
        if j == index {
            continue;
        }
        let acc = compare_accuracy(other, test)?;
        let dif = compare_difficulty(other, test)?;
        if acc == Comparison::MoreThan {
            accuracy_maximal = false;
        }
        if dif == Comparison::LessThan && other.is_minimally_informative(tol) {
            difficulty_minimal_in_ti = false;
        }
        let identical = acc == Comparison::Equal && dif == Comparison::Equal;
        if acc != Comparison::Incomparable && dif != Comparison::Incomparable && !identical {
            knife_edge_pairs += 1;
        }
    }
    Ok(StructuralFlags {
        zero_profit_ok: false,
        accuracy_maximal,
        difficulty_minimal_in_ti,
        in_ti,
        knife_edge_pairs,
    })
}

/// Candidate's profit under symmetric play with even splitting.
pub fn symmetric_payoff(market: &Market, candidate: &Procedure) -> f64 {
    let half = vec![0.5; candidate.test.len()];
    market.firm_payoff(candidate, &half)
}

/// Profit of a deviation against a rival whose per-type utility is `rival_u`.
pub fn deviation_payoff(market: &Market, dev: &Procedure, rival_u: &[f64]) -> f64 {
    let grid = dev.test.grid();
    let theta = grid.theta();
    let pi = dev.test.pi();
    grid.integrate(|i| {
        let share = choice(market.utility(dev, i, 1.0), rival_u[i], market.tie_tol);
        if share == 0.0 {
            return 0.0;
        }
        let p = pi[i];
        let value = match market.mode {
            crate::market::MarketMode::Wage => {
                (theta[i] - dev.wage_h) * dev.alpha_h * p + (theta[i] - dev.wage_l) * dev.alpha_l * (1.0 - p)
            }
            _ => theta[i] * dev.acceptance(i),
        };
        share * value
    })
}

/// Cutoffs at which type `i` is exactly indifferent between `test` run at
/// that cutoff and a rival giving it utility `target`.
pub(crate) fn indifference_cutoff(pi: f64, target: f64) -> Option<f64> {
    if target <= pi {
        (pi > 0.0).then(|| target / pi)
    } else if pi < 1.0 {
        let a = 1.0 + (target - pi) / (1.0 - pi);
        (a <= 2.0).then_some(a)
    } else {
        None
    }
}

/// Cutoff values to try against a rival with utility `rival_u`.
pub(crate) fn cutoffs_for(test: &Test, rival_u: &[f64], search: &SearchConfig) -> Vec<f64> {
    let mut cuts = search.cutoff_grid();
    if search.breakpoints {
        for (i, &p) in test.pi().iter().enumerate() {
            if let Some(a) = indifference_cutoff(p, rival_u[i]) {
                for x in [a - BREAKPOINT_EPS, a + BREAKPOINT_EPS] {
                    if (0.0..=2.0).contains(&x) {
                        cuts.push(x);
                    }
                }
            }
        }
    }
    cuts
}

/// Best payoff over a list of deviations; ties go to the earliest entry.
pub(crate) fn best_deviation(
    market: &Market,
    devs: &[(usize, f64, f64)],
    set: &TestSet,
    rival_u: &[f64],
    parallel: bool,
) -> (usize, f64) {
    let payoffs = par::map_slice(devs, parallel, |&(j, h, l)| {
        let p = Procedure::new(set.get(j).clone(), h, l).expect("alphas in range");
        deviation_payoff(market, &p, rival_u)
    });
    let k = par::argmax_first(&payoffs).expect("deviation list is never empty");
    (k, payoffs[k])
}

/// Most profitable deviation found against a symmetric candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationScan {
    pub test_index: usize,
    pub procedure: Procedure,
    pub payoff: f64,
    pub checked: usize,
}

/// Scans `(t', cutoff)` deviations over every member of `set` against a
/// rival posting `candidate`. The candidate itself is always included when
/// it belongs to the set, so the result never falls below the null
/// deviation.
pub fn scan_deviations(
    candidate: &Procedure,
    set: &TestSet,
    market: &Market,
    search: &SearchConfig,
) -> Result<DeviationScan> {
    let rival_u = market.utility_curve(candidate, 1.0);
    let mut devs: Vec<(usize, f64, f64)> = Vec::new();
    if let Some(ci) = set.index_of(&candidate.test) {
        devs.push((ci, candidate.alpha_h, candidate.alpha_l));
    }
    for (j, t) in set.tests().iter().enumerate() {
        for a in cutoffs_for(t, &rival_u, search) {
            let (h, l) = cutoff_alpha(a);
            devs.push((j, h, l));
        }
        if search.full_grid {
            let n = search.alpha_steps.max(2) - 1;
            for x in 0..=n {
                for y in 0..=n {
                    devs.push((j, x as f64 / n as f64, y as f64 / n as f64));
                }
            }
        }
    }
    let (k, payoff) = best_deviation(market, &devs, set, &rival_u, search.parallel);
    let (j, h, l) = devs[k];
    Ok(DeviationScan {
        test_index: j,
        procedure: Procedure::new(set.get(j).clone(), h, l)?,
        payoff,
        checked: devs.len(),
    })
}

/// Searches deviations `(t', alpha)` over every member of `set` and reports
/// the most profitable one against `candidate`.
pub fn verify_symmetric(
    candidate: &Procedure,
    set: &TestSet,
    market: &Market,
    search: &SearchConfig,
) -> Result<DeviationReport> {
    let candidate_index = set.index_of(&candidate.test).ok_or(Error::CandidateNotInSet)?;
    let eq_payoff = symmetric_payoff(market, candidate);
    let scan = scan_deviations(candidate, set, market, search)?;
    // the null deviation reproduces the candidate's payoff up to rounding
    let best_gain = (scan.payoff - eq_payoff).max(0.0);
    let mut structural = structural_checks(candidate_index, set, search.min_info_tol)?;
    let mean = set.grid().mean_type();
    structural.zero_profit_ok = (eq_payoff - (0.5 * mean).max(0.0)).abs() <= 1e-10;
    Ok(DeviationReport {
        candidate: candidate.clone(),
        candidate_index,
        equilibrium_payoff: eq_payoff,
        best_deviation: scan.procedure,
        best_deviation_index: scan.test_index,
        best_deviation_payoff: scan.payoff,
        best_gain,
        is_equilibrium: best_gain <= search.gain_tol,
        structural,
        deviations_checked: scan.checked,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub procedure: Procedure,
    pub supportable: bool,
}

/// Picks the test an equilibrium must use: within the minimally informative
/// set, the easiest member, then the most accurate, then the lowest index.
/// Binary grids use the likelihood-ratio closed form. `None` when no member
/// is minimally informative.
pub fn candidate_equilibrium(set: &TestSet, tol: f64) -> Result<Option<Selection>> {
    let ti = set.minimally_informative(tol);
    if ti.is_empty() {
        return Ok(None);
    }
    let index = if set.grid().is_binary() {
        select_binary(set, &ti)
    } else {
        select_by_orders(set, &ti)?
    };
    let zp = zero_profit_alpha(set.get(index), tol);
    Ok(Some(Selection {
        index,
        procedure: zp.procedure,
        supportable: zp.supportable,
    }))
}

const RATIO_TOL: f64 = 1e-12;

/// Minimises `(1-pi_hi)/(1-pi_lo)`, then maximises `pi_hi/pi_lo`, comparing
/// ratios by cross-multiplication.
fn select_binary(set: &TestSet, ti: &[usize]) -> usize {
    let pair = |i: usize| {
        let p = set.get(i).pi();
        (p[0], p[1])
    };
    // a/b < c/d with nonnegative entries and a zero denominator read as +inf
    let low_less = |x: (f64, f64), y: (f64, f64)| {
        (1.0 - x.1) * (1.0 - y.0) < (1.0 - y.1) * (1.0 - x.0) - RATIO_TOL
    };
    let high_greater = |x: (f64, f64), y: (f64, f64)| x.1 * y.0 > y.1 * x.0 + RATIO_TOL;
    let mut best = ti[0];
    for &i in &ti[1..] {
        let (x, b) = (pair(i), pair(best));
        if low_less(x, b) || (!low_less(b, x) && high_greater(x, b)) {
            best = i;
        }
    }
    best
}

fn select_by_orders(set: &TestSet, ti: &[usize]) -> Result<usize> {
    let mut easiest = Vec::new();
    for &i in ti {
        let mut minimal = true;
        for &j in ti {
            if j != i && compare_difficulty(set.get(j), set.get(i))? == Comparison::LessThan {
                minimal = false;
                break;
            }
        }
        if minimal {
            easiest.push(i);
        }
    }
    let dominated_within = |i: usize, pool: &[usize]| -> Result<bool> {
        for &j in pool {
            if j != i && compare_accuracy(set.get(j), set.get(i))? == Comparison::MoreThan {
                return Ok(true);
            }
        }
        Ok(false)
    };
    let all: Vec<usize> = (0..set.len()).collect();
    for &i in &easiest {
        if !dominated_within(i, &all)? {
            return Ok(i);
        }
    }
    for &i in &easiest {
        if !dominated_within(i, &easiest)? {
            return Ok(i);
        }
    }
    Ok(easiest[0])
}

/// Members whose zero-profit procedure survives the deviation search.
pub fn brute_force_equilibria(set: &TestSet, market: &Market, search: &SearchConfig) -> Result<Vec<usize>> {
    let mut found = Vec::new();
    for i in 0..set.len() {
        let zp = zero_profit_alpha(set.get(i), search.min_info_tol);
        if verify_symmetric(&zp.procedure, set, market, search)?.is_equilibrium {
            found.push(i);
        }
    }
    Ok(found)
}
