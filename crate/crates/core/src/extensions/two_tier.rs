//! Two-tier asymmetric equilibria on binary type grids: a selective firm
//! attracting the high type and a safe firm absorbing the rest.

use crate::equilibrium::{cutoffs_for, deviation_payoff, SearchConfig, TestSet};
use crate::error::{Error, Result};
use crate::extensions::capacity::{
    rationing, solve_binary_application_equilibrium, CapacityConfig, CapacityOutcome, TieRule,
};
use crate::market::{cutoff_alpha, Market, Procedure};
use crate::par;
use crate::signal::Test;
use crate::type_space::TypeGrid;

const RATIO_TOL: f64 = 1e-12;

/// The four sufficient conditions for the capacity construction, in order:
/// low type productive, mixing feasible, selective firm binds, safe firm
/// binds.
pub fn two_tier_conditions(
    grid: &TypeGrid,
    selective: &Test,
    safe: &Test,
    cap: &CapacityConfig,
) -> Result<[bool; 4]> {
    if !grid.is_binary() {
        return Err(Error::NotBinary);
    }
    let mu = grid.mu();
    let (lo1, hi1) = (selective.pi()[0], selective.pi()[1]);
    let lo2 = safe.pi()[0];
    Ok([
        grid.theta_min() >= 0.0,
        (1.0 - mu) * lo1 >= mu * hi1,
        (mu * hi1 + (1.0 - mu) * lo1) / 2.0 >= cap.k,
        lo2 / 2.0 >= cap.k,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoTierProfile {
    /// Probability the low type applies to the safe firm.
    pub phi_low: f64,
    /// Difference of the low type's utilities across the two firms.
    pub indifference_residual: f64,
}

/// Closed-form mixing probability of the low type. The selective test must
/// have the larger high-signal likelihood ratio.
pub fn two_tier_profile(
    grid: &TypeGrid,
    selective: &Test,
    safe: &Test,
    cap: &CapacityConfig,
) -> Result<TwoTierProfile> {
    let flags = two_tier_conditions(grid, selective, safe, cap)?;
    if !flags.iter().all(|&f| f) {
        return Err(Error::PreconditionFailed(format!(
            "two-tier conditions not met: {flags:?}"
        )));
    }
    let (sp, tp) = (selective.pi(), safe.pi());
    if sp[1] * tp[0] < tp[1] * sp[0] - RATIO_TOL {
        return Err(Error::PreconditionFailed(
            "selective test must have the larger likelihood ratio".into(),
        ));
    }
    let mu = grid.mu();
    let (lo1, hi1) = (sp[0], sp[1]);
    let lo2 = tp[0];
    let phi = (mu * hi1 + (1.0 - mu) * lo1) / (2.0 * (1.0 - mu) * lo1);
    let p1 = rationing(mu * hi1 + (1.0 - mu) * (1.0 - phi) * lo1, cap.k);
    let p2 = rationing((1.0 - mu) * phi * lo2, cap.k);
    Ok(TwoTierProfile {
        phi_low: phi,
        indifference_residual: p1 * lo1 - p2 * lo2,
    })
}

/// Test maximising the high-signal likelihood ratio, lowest index on ties.
pub fn most_selective(set: &TestSet) -> usize {
    let mut best = 0;
    for i in 1..set.len() {
        let (a, b) = (set.get(i).pi(), set.get(best).pi());
        if a[1] * b[0] > b[1] * a[0] + RATIO_TOL {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoTierCertificate {
    pub selective_proc: Procedure,
    pub safe_proc: Procedure,
    pub with_capacity: bool,
    /// Set to false when the construction's preconditions fail.
    pub applicable: bool,
    pub conditions: [bool; 4],
    pub selective_maximises_ratio: bool,
    pub phi_low: f64,
    /// Low type's mixing weight on the safe firm as found by the pattern
    /// solver.
    pub phi_low_solver: f64,
    pub payoff_selective: f64,
    pub payoff_safe: f64,
    pub deviation_gain_selective: f64,
    pub deviation_gain_safe: f64,
    pub best_deviation_selective: Option<Procedure>,
    pub best_deviation_safe: Option<Procedure>,
}

impl TwoTierCertificate {
    /// With capacity: neither firm gains. Without: the selective firm's
    /// witness deviation is strictly profitable.
    pub fn confirmed(&self, gain_tol: f64) -> bool {
        if self.with_capacity {
            self.applicable
                && self.deviation_gain_selective <= gain_tol
                && self.deviation_gain_safe <= gain_tol
        } else {
            self.deviation_gain_selective > gain_tol
        }
    }
}

/// Deviations for one firm: every member of the set on the cutoff grid,
/// plus a coarse full `(alpha_h, alpha_l)` square.
fn deviation_list(set: &TestSet, search: &SearchConfig, full_steps: usize) -> Vec<(usize, f64, f64)> {
    let cuts = search.cutoff_grid();
    let mut devs = Vec::new();
    for j in 0..set.len() {
        for &a in &cuts {
            let (h, l) = cutoff_alpha(a);
            devs.push((j, h, l));
        }
        if full_steps >= 2 {
            let n = full_steps - 1;
            for x in 0..=n {
                for y in 0..=n {
                    devs.push((j, x as f64 / n as f64, y as f64 / n as f64));
                }
            }
        }
    }
    devs
}

/// Certifies (with capacity) or refutes (without) a two-tier configuration
/// in which firm 1 is selective with `selective` and firm 2 is safe with
/// `safe`, both accepting only high signals.
pub fn verify_two_tier(
    selective: &Test,
    safe: &Test,
    set: &TestSet,
    cap: Option<&CapacityConfig>,
    search: &SearchConfig,
    tie_tol: f64,
) -> Result<TwoTierCertificate> {
    let grid = set.grid();
    if !grid.is_binary() {
        return Err(Error::NotBinary);
    }
    let sel = Procedure::new(selective.clone(), 1.0, 0.0)?;
    let saf = Procedure::new(safe.clone(), 1.0, 0.0)?;
    let top = set.get(most_selective(set)).pi();
    let sp = selective.pi();
    let selective_maximises_ratio = sp[1] * top[0] >= top[1] * sp[0] - RATIO_TOL;

    let Some(cap) = cap else {
        return refute_without_capacity(sel, saf, set, search, tie_tol, selective_maximises_ratio);
    };

    let conditions = two_tier_conditions(grid, selective, safe, cap)?;
    let applicable = conditions.iter().all(|&c| c) && selective_maximises_ratio;
    let mut cert = TwoTierCertificate {
        selective_proc: sel.clone(),
        safe_proc: saf.clone(),
        with_capacity: true,
        applicable,
        conditions,
        selective_maximises_ratio,
        phi_low: f64::NAN,
        phi_low_solver: f64::NAN,
        payoff_selective: f64::NAN,
        payoff_safe: f64::NAN,
        deviation_gain_selective: f64::NAN,
        deviation_gain_safe: f64::NAN,
        best_deviation_selective: None,
        best_deviation_safe: None,
    };
    if !applicable {
        return Ok(cert);
    }
    let rule = TieRule::HighFirst;
    let profile = two_tier_profile(grid, selective, safe, cap)?;
    let eq = solve_binary_application_equilibrium(&sel, &saf, cap, rule, tie_tol)?;
    cert.phi_low = profile.phi_low;
    cert.phi_low_solver = 1.0 - eq.profile.phi[0];
    cert.payoff_selective = eq.payoff1;
    cert.payoff_safe = eq.payoff2;

    let devs = deviation_list(set, search, 21);
    let solve = |dev: &Procedure, firm1_deviates: bool| -> Result<CapacityOutcome> {
        if firm1_deviates {
            solve_binary_application_equilibrium(dev, &saf, cap, rule, tie_tol)
        } else {
            solve_binary_application_equilibrium(&sel, dev, cap, rule, tie_tol)
        }
    };
    for firm1 in [true, false] {
        let results = par::map_slice(&devs, search.parallel, |&(j, h, l)| {
            let dev = Procedure::new(set.get(j).clone(), h, l).expect("alphas in range");
            solve(&dev, firm1).map(|o| if firm1 { o.payoff1 } else { o.payoff2 })
        });
        let payoffs = results.into_iter().collect::<Result<Vec<_>>>()?;
        let k = par::argmax_first(&payoffs).expect("nonempty");
        let (j, h, l) = devs[k];
        let dev = Procedure::new(set.get(j).clone(), h, l)?;
        if firm1 {
            cert.deviation_gain_selective = (payoffs[k] - eq.payoff1).max(0.0);
            cert.best_deviation_selective = Some(dev);
        } else {
            cert.deviation_gain_safe = (payoffs[k] - eq.payoff2).max(0.0);
            cert.best_deviation_safe = Some(dev);
        }
    }
    Ok(cert)
}

/// Without capacity the selective firm serves only the high type; lowering
/// its standards against the safe firm must pay whenever the safe firm
/// earns something.
fn refute_without_capacity(
    sel: Procedure,
    saf: Procedure,
    set: &TestSet,
    search: &SearchConfig,
    tie_tol: f64,
    selective_maximises_ratio: bool,
) -> Result<TwoTierCertificate> {
    let market = Market {
        tie_tol,
        ..Market::default()
    };
    let split = market.best_response_split(&sel, &saf, 1.0, 1.0);
    let (v1, v2) = market.payoffs(&sel, &saf, &split);
    let rival_u = market.utility_curve(&saf, 1.0);

    let mut devs = deviation_list(set, search, 0);
    for (j, t) in set.tests().iter().enumerate() {
        for a in cutoffs_for(t, &rival_u, search) {
            let (h, l) = cutoff_alpha(a);
            devs.push((j, h, l));
        }
    }
    let payoffs = par::map_slice(&devs, search.parallel, |&(j, h, l)| {
        let dev = Procedure::new(set.get(j).clone(), h, l).expect("alphas in range");
        deviation_payoff(&market, &dev, &rival_u)
    });
    let k = par::argmax_first(&payoffs).expect("nonempty");
    let (j, h, l) = devs[k];
    Ok(TwoTierCertificate {
        selective_proc: sel,
        safe_proc: saf,
        with_capacity: false,
        applicable: true,
        conditions: [false; 4],
        selective_maximises_ratio,
        phi_low: 1.0 - split.phi[0],
        phi_low_solver: 1.0 - split.phi[0],
        payoff_selective: v1,
        payoff_safe: v2,
        deviation_gain_selective: (payoffs[k] - v1).max(0.0),
        deviation_gain_safe: 0.0,
        best_deviation_selective: Some(Procedure::new(set.get(j).clone(), h, l)?),
        best_deviation_safe: None,
    })
}
