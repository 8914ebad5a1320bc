//! Capacity-constrained hiring with random-queue rationing.
//!
//! Each firm can hire at most `k`. When the acceptance mass it faces
//! exceeds `k`, every acceptance survives with probability
//! `p = k / mass`, so a candidate's utility at firm `i` is `p_i * acc_i`.

use crate::equilibrium::{SearchConfig, TestSet};
use crate::error::{Error, Result};
use crate::market::{cutoff_alpha, ApplicationProfile, Procedure};
use crate::par;

/// Largest admissible relative error of the indifference split.
const SPLIT_TOL: f64 = 1e-13;
const BISECTION_ITERS: usize = 200;
pub const FEASIBILITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityConfig {
    pub k: f64,
}

impl CapacityConfig {
    pub fn new(k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::ParameterOutOfRange(format!("capacity must be positive, got {k}")));
        }
        Ok(Self { k })
    }
}

/// Probability an acceptance survives rationing.
pub fn rationing(mass_demanded: f64, k: f64) -> f64 {
    if mass_demanded <= 0.0 {
        1.0
    } else {
        (k / mass_demanded).min(1.0)
    }
}

/// How indifferent candidates split between the firms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieRule {
    /// Indifferent types split evenly when that is consistent, otherwise
    /// use the consistent split closest to one half.
    #[default]
    Uniform,
    /// Indifferent types go to firm 1, highest types first.
    HighFirst,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityOutcome {
    pub profile: ApplicationProfile,
    pub ration1: f64,
    pub ration2: f64,
    pub demand1: f64,
    pub demand2: f64,
    pub payoff1: f64,
    pub payoff2: f64,
}

impl CapacityOutcome {
    fn evaluate(proc1: &Procedure, proc2: &Procedure, k: f64, phi: Vec<f64>) -> Self {
        let grid = proc1.test.grid();
        let theta = grid.theta();
        let demand1 = grid.integrate(|i| phi[i] * proc1.acceptance(i));
        let demand2 = grid.integrate(|i| (1.0 - phi[i]) * proc2.acceptance(i));
        let ration1 = rationing(demand1, k);
        let ration2 = rationing(demand2, k);
        let payoff1 = ration1 * grid.integrate(|i| phi[i] * theta[i] * proc1.acceptance(i));
        let payoff2 = ration2 * grid.integrate(|i| (1.0 - phi[i]) * theta[i] * proc2.acceptance(i));
        Self {
            profile: ApplicationProfile { phi },
            ration1,
            ration2,
            demand1,
            demand2,
            payoff1,
            payoff2,
        }
    }

    /// Hires never exceed capacity.
    pub fn feasible(&self, k: f64) -> bool {
        self.ration1 * self.demand1 <= k + FEASIBILITY_TOL && self.ration2 * self.demand2 <= k + FEASIBILITY_TOL
    }

    /// Largest utility gain any type could get by switching firms against
    /// its current mix.
    pub fn incentive_violation(&self, proc1: &Procedure, proc2: &Procedure) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, &phi) in self.profile.phi.iter().enumerate() {
            let u1 = self.ration1 * proc1.acceptance(i);
            let u2 = self.ration2 * proc2.acceptance(i);
            if phi > 0.0 {
                worst = worst.max(u2 - u1);
            }
            if phi < 1.0 {
                worst = worst.max(u1 - u2);
            }
        }
        worst
    }
}

/// Application equilibrium after both firms post procedures.
///
/// A type prefers firm 1 exactly when `acc1 / acc2 > rho` with
/// `rho = p2 / p1`. Raising `rho` sends demand to firm 2, which can only
/// lower the implied `p2 / p1`, so the consistent `rho` is found by walking
/// the sorted likelihood-ratio atoms and the gaps between them.
pub fn solve_continuation(
    proc1: &Procedure,
    proc2: &Procedure,
    cap: &CapacityConfig,
    rule: TieRule,
) -> Result<CapacityOutcome> {
    let n = proc1.test.len();
    let a1 = proc1.acceptance_curve();
    let a2 = proc2.acceptance_curve();
    let k = cap.k;
    let weights = proc1.test.grid().weights();

    // types nobody accepts are irrelevant; park them at one half
    let inert: Vec<bool> = (0..n).map(|i| a1[i] <= 0.0 && a2[i] <= 0.0).collect();
    let mut atoms: Vec<f64> = (0..n)
        .filter(|&i| !inert[i] && a1[i] > 0.0 && a2[i] > 0.0)
        .map(|i| a1[i] / a2[i])
        .collect();
    atoms.sort_by(|x, y| x.partial_cmp(y).expect("finite ratios"));
    atoms.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * y.abs().max(1.0));

    let implied_rho = |phi: &[f64]| -> f64 {
        let d1: f64 = (0..n).map(|i| weights[i] * phi[i] * a1[i]).sum();
        let d2: f64 = (0..n).map(|i| weights[i] * (1.0 - phi[i]) * a2[i]).sum();
        rationing(d2, k) / rationing(d1, k)
    };
    // strict preferences at rho, indifferent set marked None
    let prefs_at = |rho: f64| -> Vec<Option<f64>> {
        (0..n)
            .map(|i| {
                if inert[i] {
                    Some(0.5)
                } else if a2[i] <= 0.0 || a1[i] > rho * a2[i] * (1.0 + 1e-15) {
                    Some(1.0)
                } else if a1[i] <= 0.0 || a1[i] < rho * a2[i] * (1.0 - 1e-15) {
                    Some(0.0)
                } else {
                    None
                }
            })
            .collect()
    };

    let gap_mid = |j: usize| -> f64 {
        // gap j lies below atom j; gap atoms.len() lies above the last
        match (j.checked_sub(1).map(|p| atoms[p]), atoms.get(j)) {
            (None, Some(&hi)) => hi * 0.5,
            (Some(lo), Some(&hi)) => 0.5 * (lo + hi),
            (Some(lo), None) => lo * 2.0 + 1.0,
            (None, None) => 1.0,
        }
    };
    for j in 0..=atoms.len() {
        // open gap below atom j
        let lo = if j == 0 { 0.0 } else { atoms[j - 1] };
        let hi = atoms.get(j).copied().unwrap_or(f64::INFINITY);
        let phi: Vec<f64> = prefs_at(gap_mid(j))
            .into_iter()
            .map(|p| p.expect("no indifference inside a gap"))
            .collect();
        let rho = implied_rho(&phi);
        if rho > lo && rho < hi {
            return Ok(CapacityOutcome::evaluate(proc1, proc2, k, phi));
        }
        if let Some(&atom) = atoms.get(j) {
            if let Some(phi) = split_at_atom(atom, &prefs_at(atom), weights, &a1, rule, &implied_rho) {
                return Ok(CapacityOutcome::evaluate(proc1, proc2, k, phi));
            }
        }
    }
    Err(Error::NoConsistentProfile)
}

/// Finds the split of the indifferent group that makes `rho = atom`
/// self-consistent, or `None` if no split does.
fn split_at_atom(
    atom: f64,
    prefs: &[Option<f64>],
    weights: &[f64],
    a1: &[f64],
    rule: TieRule,
    implied_rho: &dyn Fn(&[f64]) -> f64,
) -> Option<Vec<f64>> {
    let indiff: Vec<usize> = (0..prefs.len()).filter(|&i| prefs[i].is_none()).collect();
    let base: Vec<f64> = prefs.iter().map(|p| p.unwrap_or(0.0)).collect();
    // s in [0,1] moves the indifferent group's acceptance mass to firm 1
    let total: f64 = indiff.iter().map(|&i| weights[i] * a1[i]).sum();
    let fill = |s: f64| -> Vec<f64> {
        let mut phi = base.clone();
        match rule {
            TieRule::Uniform => {
                for &i in &indiff {
                    phi[i] = s;
                }
            }
            TieRule::HighFirst => {
                let mut left = s * total;
                for &i in indiff.iter().rev() {
                    let m = weights[i] * a1[i];
                    let take = if m <= 0.0 { 1.0 } else { (left / m).clamp(0.0, 1.0) };
                    phi[i] = take;
                    left -= take * m;
                }
            }
        }
        phi
    };
    let g = |s: f64| implied_rho(&fill(s)) - atom;
    let tol = SPLIT_TOL * atom.max(1.0);
    let (g0, g1) = (g(0.0), g(1.0));
    if g0 > tol || g1 < -tol {
        return None;
    }
    // g is nondecreasing in s; pick within the zero set per the tie rule
    let preferred = match rule {
        TieRule::Uniform => 0.5,
        TieRule::HighFirst => 1.0,
    };
    if g(preferred).abs() <= tol {
        return Some(fill(preferred));
    }
    let s = if g(preferred) > 0.0 {
        // zero set lies below the preferred split: take its upper end
        bisect(&g, 0.0, preferred, tol, true)
    } else {
        bisect(&g, preferred, 1.0, tol, false)
    };
    Some(fill(s))
}

/// Boundary of `{ s : |g(s)| <= tol }` inside `[lo, hi]` for nondecreasing
/// `g`; `upper` selects the largest such point, otherwise the smallest.
fn bisect(g: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64, upper: bool) -> f64 {
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        let v = g(mid);
        let go_up = if upper { v <= tol } else { v < -tol };
        if go_up {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    if upper {
        lo
    } else {
        hi
    }
}

/// Support pattern of a type in the binary application game.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    Firm1,
    Firm2,
    Mix,
}

/// Pattern enumeration order, written as (low type, high type).
pub fn pattern_order(rule: TieRule) -> [(Support, Support); 9] {
    use Support::*;
    match rule {
        TieRule::Uniform => [
            (Mix, Mix),
            (Firm1, Mix),
            (Mix, Firm1),
            (Firm2, Mix),
            (Mix, Firm2),
            (Firm1, Firm2),
            (Firm2, Firm1),
            (Firm1, Firm1),
            (Firm2, Firm2),
        ],
        TieRule::HighFirst => [
            (Mix, Firm1),
            (Firm1, Firm1),
            (Firm2, Firm1),
            (Mix, Mix),
            (Firm1, Mix),
            (Firm2, Mix),
            (Mix, Firm2),
            (Firm1, Firm2),
            (Firm2, Firm2),
        ],
    }
}

/// Application equilibrium on a binary grid by enumerating support
/// patterns and solving each pattern's indifference condition.
pub fn solve_binary_application_equilibrium(
    proc1: &Procedure,
    proc2: &Procedure,
    cap: &CapacityConfig,
    rule: TieRule,
    tie_tol: f64,
) -> Result<CapacityOutcome> {
    if !proc1.test.grid().is_binary() {
        return Err(Error::NotBinary);
    }
    let k = cap.k;
    let a1 = proc1.acceptance_curve();
    let a2 = proc2.acceptance_curve();
    let gap = |phi: &[f64], i: usize| {
        let o = CapacityOutcome::evaluate(proc1, proc2, k, phi.to_vec());
        o.ration1 * a1[i] - o.ration2 * a2[i]
    };
    let pure = |s: Support| match s {
        Support::Firm1 => 1.0,
        Support::Firm2 => 0.0,
        Support::Mix => f64::NAN,
    };
    // under the high-first rule an indifferent high type may sit at firm 1
    let consistent = |phi: &[f64], pattern: [Support; 2]| {
        (0..2).all(|i| match pattern[i] {
            Support::Firm1 if i == 1 && rule == TieRule::HighFirst => gap(phi, i) >= -tie_tol.max(1e-12),
            Support::Firm1 => gap(phi, i) > tie_tol,
            Support::Firm2 => gap(phi, i) < -tie_tol,
            Support::Mix => gap(phi, i).abs() <= tie_tol.max(1e-12),
        })
    };
    let preferred = match rule {
        TieRule::Uniform => 0.5,
        TieRule::HighFirst => 1.0,
    };
    for (lo, hi) in pattern_order(rule) {
        let pattern = [lo, hi];
        let mixers: Vec<usize> = (0..2).filter(|&i| pattern[i] == Support::Mix).collect();
        let mut phi = [pure(lo), pure(hi)];
        let solved = match mixers.len() {
            0 => true,
            _ => {
                // one common mixing weight; for two mixers both ratios must agree
                let set = |x: f64, phi: &mut [f64; 2]| {
                    for &i in &mixers {
                        phi[i] = x;
                    }
                };
                let m = mixers[0];
                let h = |x: f64| {
                    let mut p = phi;
                    set(x, &mut p);
                    gap(&p, m)
                };
                // utility gap of a mixer falls as more of it applies to firm 1
                let (h0, h1) = (h(0.0), h(1.0));
                if h0 < -tie_tol || h1 > tie_tol {
                    false
                } else {
                    let x = if h(preferred).abs() <= tie_tol {
                        preferred
                    } else if h(preferred) > 0.0 {
                        root_decreasing(&h, preferred, 1.0)
                    } else {
                        root_decreasing(&h, 0.0, preferred)
                    };
                    set(x, &mut phi);
                    true
                }
            }
        };
        if solved && consistent(&phi, pattern) {
            return Ok(CapacityOutcome::evaluate(proc1, proc2, k, phi.to_vec()));
        }
    }
    Err(Error::NoConsistentProfile)
}

fn root_decreasing(h: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityReport {
    pub candidate: Procedure,
    pub equilibrium: CapacityOutcome,
    pub equilibrium_payoff: f64,
    pub best_deviation: Procedure,
    pub best_deviation_payoff: f64,
    pub best_gain: f64,
    pub is_equilibrium: bool,
    /// `k < pi_bar / 2` for the candidate's test.
    pub capacity_binds_at_candidate: bool,
    pub all_feasible: bool,
    pub deviations_checked: usize,
}

/// Continuation solver used for deviations: the likelihood-ratio walk,
/// falling back to pattern enumeration on binary grids.
pub fn continuation(
    proc1: &Procedure,
    proc2: &Procedure,
    cap: &CapacityConfig,
    rule: TieRule,
    tie_tol: f64,
) -> Result<CapacityOutcome> {
    match solve_continuation(proc1, proc2, cap, rule) {
        Ok(o) => Ok(o),
        Err(e) if proc1.test.grid().is_binary() => {
            solve_binary_application_equilibrium(proc1, proc2, cap, rule, tie_tol).map_err(|_| e)
        }
        Err(e) => Err(e),
    }
}

/// Searches `(t', cutoff)` deviations against a symmetric candidate with the
/// application split and rationing re-solved after each deviation.
pub fn verify_capacity_equilibrium(
    candidate: &Procedure,
    set: &TestSet,
    cap: &CapacityConfig,
    search: &SearchConfig,
    tie_tol: f64,
) -> Result<CapacityReport> {
    set.index_of(&candidate.test).ok_or(Error::CandidateNotInSet)?;
    let rule = TieRule::Uniform;
    let eq = continuation(candidate, candidate, cap, rule, tie_tol)?;
    let eq_payoff = eq.payoff1;

    let mut devs: Vec<(usize, f64, f64)> = Vec::new();
    let cuts = search.cutoff_grid();
    for j in 0..set.len() {
        for &a in &cuts {
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
    let outcomes = par::map_slice(&devs, search.parallel, |&(j, h, l)| {
        let dev = Procedure::new(set.get(j).clone(), h, l).expect("alphas in range");
        continuation(&dev, candidate, cap, rule, tie_tol).map(|o| (o.payoff1, o.feasible(cap.k)))
    });
    let mut payoffs = Vec::with_capacity(outcomes.len());
    let mut all_feasible = eq.feasible(cap.k);
    for o in outcomes {
        let (p, f) = o?;
        payoffs.push(p);
        all_feasible &= f;
    }
    let best = par::argmax_first(&payoffs).expect("nonempty deviation list");
    let (j, h, l) = devs[best];
    let best_gain = (payoffs[best] - eq_payoff).max(0.0);
    Ok(CapacityReport {
        candidate: candidate.clone(),
        equilibrium: eq,
        equilibrium_payoff: eq_payoff,
        best_deviation: Procedure::new(set.get(j).clone(), h, l)?,
        best_deviation_payoff: payoffs[best],
        best_gain,
        is_equilibrium: best_gain <= search.gain_tol,
        capacity_binds_at_candidate: cap.k < 0.5 * candidate.test.stats().pi_bar,
        all_feasible,
        deviations_checked: devs.len(),
    })
}
