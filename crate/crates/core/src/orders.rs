//! Accuracy (Lehmann) and difficulty orders on tests, with the posterior
//! dominance and continuous-signal characterisations used to certify them.
//!
//! Both orders are checked on adjacent grid pairs in division-free
//! cross-product form, so curves touching 0 or 1 never divide by zero.

use crate::error::{Error, Result};
use crate::signal::{posterior_under, Signal, Test};

/// Absolute tolerance on cross products.
pub const ORDER_TOL: f64 = 1e-9;

/// Tolerance on CDF comparisons in the posterior dominance check.
pub const FOSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparison {
    MoreThan,
    LessThan,
    Equal,
    Incomparable,
}

impl Comparison {
    fn from_dominance(forward: bool, backward: bool) -> Self {
        match (forward, backward) {
            (true, true) => Comparison::Equal,
            (true, false) => Comparison::MoreThan,
            (false, true) => Comparison::LessThan,
            (false, false) => Comparison::Incomparable,
        }
    }

    /// The comparison seen from the other argument.
    pub fn flip(self) -> Self {
        match self {
            Comparison::MoreThan => Comparison::LessThan,
            Comparison::LessThan => Comparison::MoreThan,
            c => c,
        }
    }

    /// `MoreThan` or `Equal`.
    pub fn at_least(self) -> bool {
        matches!(self, Comparison::MoreThan | Comparison::Equal)
    }

    pub fn name(self) -> &'static str {
        match self {
            Comparison::MoreThan => "more",
            Comparison::LessThan => "less",
            Comparison::Equal => "equal",
            Comparison::Incomparable => "incomparable",
        }
    }
}

impl std::fmt::Display for Comparison {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn check_grid(t: &Test, d: &Test) -> Result<()> {
    if t.same_grid(d) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// `t` weakly more accurate than `d`: `pi_t / pi_d` nondecreasing and
/// `(1-pi_t)/(1-pi_d)` nonincreasing along the grid.
pub fn accuracy_dominates(t: &[f64], d: &[f64], tol: f64) -> bool {
    (1..t.len()).all(|i| {
        let high = t[i] * d[i - 1] >= d[i] * t[i - 1] - tol;
        let low = (1.0 - t[i]) * (1.0 - d[i - 1]) <= (1.0 - d[i]) * (1.0 - t[i - 1]) + tol;
        high && low
    })
}

/// `t` weakly more difficult than `d`: both likelihood ratios `pi_t/pi_d`
/// and `(1-pi_t)/(1-pi_d)` nondecreasing along the grid.
pub fn difficulty_dominates(t: &[f64], d: &[f64], tol: f64) -> bool {
    (1..t.len()).all(|i| {
        let high = t[i] * d[i - 1] >= d[i] * t[i - 1] - tol;
        let low = (1.0 - t[i]) * (1.0 - d[i - 1]) >= (1.0 - d[i]) * (1.0 - t[i - 1]) - tol;
        high && low
    })
}

pub fn compare_accuracy(t: &Test, d: &Test) -> Result<Comparison> {
    compare_accuracy_tol(t, d, ORDER_TOL)
}

pub fn compare_accuracy_tol(t: &Test, d: &Test, tol: f64) -> Result<Comparison> {
    check_grid(t, d)?;
    Ok(Comparison::from_dominance(
        accuracy_dominates(t.pi(), d.pi(), tol),
        accuracy_dominates(d.pi(), t.pi(), tol),
    ))
}

/// `MoreThan` means `t` is the more difficult test.
pub fn compare_difficulty(t: &Test, d: &Test) -> Result<Comparison> {
    compare_difficulty_tol(t, d, ORDER_TOL)
}

pub fn compare_difficulty_tol(t: &Test, d: &Test, tol: f64) -> Result<Comparison> {
    check_grid(t, d)?;
    Ok(Comparison::from_dominance(
        difficulty_dominates(t.pi(), d.pi(), tol),
        difficulty_dominates(d.pi(), t.pi(), tol),
    ))
}

/// `p` first-order dominates `q`: `CDF_p <= CDF_q + tol` at every point.
pub fn fosd(p: &[f64], q: &[f64], tol: f64) -> Result<bool> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    let (mut cp, mut cq) = (0.0, 0.0);
    for (a, b) in p.iter().zip(q) {
        cp += a;
        cq += b;
        if cp > cq + tol {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FosdReport {
    pub holds: bool,
    /// First prior index and signal at which dominance failed.
    pub witness: Option<(usize, Signal)>,
    /// Signal/prior combinations skipped because a signal had zero mass.
    pub skipped: usize,
}

/// For every prior, checks that both posteriors of `t` first-order dominate
/// the matching posteriors of `d`. A signal with zero mass under either test
/// is skipped for that prior.
pub fn check_difficulty_fosd_equiv(
    t: &Test,
    d: &Test,
    priors: &[Vec<f64>],
    tol: f64,
) -> Result<FosdReport> {
    check_grid(t, d)?;
    let mut skipped = 0;
    for (k, prior) in priors.iter().enumerate() {
        if prior.len() != t.len() {
            return Err(Error::LengthMismatch {
                expected: t.len(),
                got: prior.len(),
            });
        }
        for x in Signal::BOTH {
            let (pt, pd) = match (
                posterior_under(prior, t.pi(), x),
                posterior_under(prior, d.pi(), x),
            ) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    skipped += 1;
                    continue;
                }
            };
            if !fosd(&pt, &pd, tol)? {
                return Ok(FosdReport {
                    holds: false,
                    witness: Some((k, x)),
                    skipped,
                });
            }
        }
    }
    Ok(FosdReport {
        holds: true,
        witness: None,
        skipped,
    })
}

/// CDF of the continuous rewrite of a binary signal: uniform on `[0,1/2)`
/// with mass `1-pi` and on `[1/2,1]` with mass `pi`.
pub fn continuous_signal_cdf(pi: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x < 0.5 {
        2.0 * (1.0 - pi) * x
    } else if x < 1.0 {
        1.0 + 2.0 * pi * (x - 1.0)
    } else {
        1.0
    }
}

/// Generalised inverse `inf { x : F(x) >= q }` of [`continuous_signal_cdf`].
pub fn continuous_signal_quantile(pi: f64, q: f64) -> f64 {
    if q <= 0.0 {
        0.0
    } else if q <= 1.0 - pi {
        q / (2.0 * (1.0 - pi))
    } else {
        1.0 + (q - 1.0) / (2.0 * pi)
    }
}

/// `F(F^{-1}(q | from) | to)` for both tests, where `from` and `to` are grid
/// indices. `t` is more accurate than `d` iff the first coordinate is at most
/// the second for every `q` and every `from < to`.
pub fn lehmann_cdf_cross(
    t: &Test,
    d: &Test,
    from: usize,
    to: usize,
    q: f64,
) -> Result<(f64, f64)> {
    check_grid(t, d)?;
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::ParameterOutOfRange(format!("q must lie in [0,1], got {q}")));
    }
    let n = t.len();
    if from >= n || to >= n {
        return Err(Error::ParameterOutOfRange(format!(
            "grid index out of range ({from}, {to}) for {n} points"
        )));
    }
    let cross = |pi: &[f64]| {
        continuous_signal_cdf(pi[to], continuous_signal_quantile(pi[from], q))
    };
    Ok((cross(t.pi()), cross(d.pi())))
}

/// Accuracy dominance decided by the quantile-crossing characterisation on
/// `q_points` evenly spaced quantiles over every ordered grid pair.
pub fn lehmann_dominates(t: &Test, d: &Test, q_points: usize, tol: f64) -> Result<bool> {
    check_grid(t, d)?;
    let n = t.len();
    let steps = q_points.max(2) - 1;
    for from in 0..n {
        for to in from + 1..n {
            for k in 0..=steps {
                let q = k as f64 / steps as f64;
                let (a, b) = lehmann_cdf_cross(t, d, from, to, q)?;
                if a > b + tol {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Accuracy comparison produced by [`lehmann_dominates`] in both directions.
pub fn compare_accuracy_lehmann(t: &Test, d: &Test, q_points: usize, tol: f64) -> Result<Comparison> {
    Ok(Comparison::from_dominance(
        lehmann_dominates(t, d, q_points, tol)?,
        lehmann_dominates(d, t, q_points, tol)?,
    ))
}
