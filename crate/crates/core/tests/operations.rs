//! Worked examples for each operation, checked against hand arithmetic or
//! a small brute-force payoff model written independently of the library.

mod common;

use approx::assert_abs_diff_eq;
use seleq_core::extensions::capacity::{verify_capacity_equilibrium, CapacityConfig};
use seleq_core::extensions::two_tier::{two_tier_conditions, two_tier_profile, verify_two_tier};
use seleq_core::extensions::wage::{verify_wage_equilibrium, zero_profit_wage, WageSearch};
use seleq_core::info_cost::{easier_mixture, test_cost, Divergence};
use seleq_core::orders::{check_difficulty_fosd_equiv, lehmann_cdf_cross, FOSD_TOL};
use seleq_core::signal::MIN_INFO_TOL;
use seleq_core::*;
use std::sync::Arc;

fn binary(mu: f64) -> Arc<TypeGrid> {
    Arc::new(TypeGrid::binary(-1.0, 1.0, mu).unwrap())
}

fn bt(mu: f64, lo: f64, hi: f64) -> Test {
    Test::new(binary(mu), vec![lo, hi]).unwrap()
}

/// Two-type market: types (-1, +1) with masses (1-mu, mu). A procedure is
/// (pi_lo, pi_hi, alpha_h, alpha_l).
#[derive(Clone, Copy)]
struct Toy {
    lo: f64,
    hi: f64,
    ah: f64,
    al: f64,
}

impl Toy {
    fn acc(&self, high_type: bool) -> f64 {
        let p = if high_type { self.hi } else { self.lo };
        self.ah * p + self.al * (1.0 - p)
    }
}

/// Best payoff over a fine `(alpha_h, alpha_l)` square for each test, against
/// a rival playing `cand`, minus the symmetric payoff.
fn toy_best_gain(mu: f64, tests: &[(f64, f64)], cand: Toy, steps: usize) -> (f64, usize) {
    let share = |u: f64, v: f64| {
        if u > v + 1e-12 {
            1.0
        } else if v > u + 1e-12 {
            0.0
        } else {
            0.5
        }
    };
    let sym = 0.5 * (mu * cand.acc(true) - (1.0 - mu) * cand.acc(false));
    let mut best = (f64::NEG_INFINITY, 0);
    for (j, &(lo, hi)) in tests.iter().enumerate() {
        for x in 0..=steps {
            for y in 0..=steps {
                let d = Toy {
                    lo,
                    hi,
                    ah: x as f64 / steps as f64,
                    al: y as f64 / steps as f64,
                };
                let v = mu * share(d.acc(true), cand.acc(true)) * d.acc(true)
                    - (1.0 - mu) * share(d.acc(false), cand.acc(false)) * d.acc(false);
                if v > best.0 {
                    best = (v, j);
                }
            }
        }
    }
    (best.0 - sym, best.1)
}

#[test]
fn mean_type_examples() {
    assert_abs_diff_eq!(binary(0.4).mean_type(), -0.2, epsilon = 1e-15);
    assert_abs_diff_eq!(binary(0.6).mean_type(), 0.2, epsilon = 1e-15);
    let g = TypeGrid::new(vec![-0.5, 1.5], vec![0.5, 0.5], GridKind::Continuous).unwrap();
    assert_abs_diff_eq!(g.interpolate_at_zero(&[0.0, 1.0]).unwrap(), 0.25, epsilon = 1e-15);
}

#[test]
fn signal_statistics() {
    let s = bt(0.4, 0.2, 0.8).stats();
    assert_abs_diff_eq!(s.pi_bar, 0.6 * 0.2 + 0.4 * 0.8, epsilon = 1e-15);
    assert_abs_diff_eq!(s.int_theta_pi, 0.4 * 0.8 - 0.6 * 0.2, epsilon = 1e-15);
    assert_abs_diff_eq!(s.int_theta_1mpi, 0.4 * 0.2 - 0.6 * 0.8, epsilon = 1e-15);
    assert_abs_diff_eq!(s.post_mean_h.unwrap(), 0.2 / 0.44, epsilon = 1e-12);
    let s = bt(0.5, 0.2, 0.8).stats();
    assert_abs_diff_eq!(s.pi_bar, 0.5, epsilon = 1e-15);
    assert_abs_diff_eq!(s.int_theta_pi, 0.3, epsilon = 1e-15);

    assert_abs_diff_eq!(bt(0.5, 0.2, 0.8).posterior(Signal::High).unwrap()[1], 0.8, epsilon = 1e-15);
    assert_abs_diff_eq!(bt(0.4, 0.2, 0.8).posterior(Signal::High).unwrap()[1], 0.32 / 0.44, epsilon = 1e-15);

    assert!(bt(0.4, 0.2, 0.8).is_minimally_informative(MIN_INFO_TOL));
    let t = bt(0.4, 0.35, 0.65);
    assert!(t.is_minimally_informative(MIN_INFO_TOL));
    assert_abs_diff_eq!(t.stats().int_theta_pi, 0.05, epsilon = 1e-15);
    assert_abs_diff_eq!(t.stats().int_theta_1mpi, -0.25, epsilon = 1e-15);
}

#[test]
fn family_examples() {
    let g = Arc::new(TypeGrid::uniform(-1.0, 1.0, 11).unwrap());
    let t = build_family_test(&FamilyParams::new(Family::LinearMix { base: None }, 0.0, 0.3), g.clone()).unwrap();
    assert!(t.pi().iter().all(|&p| (p - 0.3).abs() < 1e-15));
    let t = build_family_test(&FamilyParams::new(Family::PowerLinear, 1.0, 1.0), g).unwrap();
    assert!(t.pi().iter().all(|&p| (p - 0.5).abs() < 1e-15));
}

#[test]
fn order_examples() {
    let t = bt(0.4, 0.2, 0.8);
    let garbled = t.garble(0.5, 0.5).unwrap();
    assert_abs_diff_eq!(garbled.pi()[0], 0.35, epsilon = 1e-15);
    assert_eq!(compare_accuracy(&t, &garbled).unwrap(), Comparison::MoreThan);
    // 0.8/0.9 > 0.2/0.3 and 0.2/0.1 > 0.8/0.7
    assert_eq!(compare_accuracy(&t, &bt(0.4, 0.3, 0.9)).unwrap(), Comparison::Incomparable);
    assert_eq!(compare_difficulty(&t, &t.shift(0.1).unwrap()).unwrap(), Comparison::MoreThan);
    assert_eq!(compare_difficulty(&t, &bt(0.4, 0.35, 0.65)).unwrap(), Comparison::Incomparable);
}

#[test]
fn posterior_dominance_examples() {
    let t = bt(0.4, 0.2, 0.8);
    let d = bt(0.4, 0.3, 0.9);
    let mut r = common::rng(11);
    let priors: Vec<Vec<f64>> = (0..100).map(|_| common::full_prior(&mut r, 2)).collect();
    assert!(check_difficulty_fosd_equiv(&t, &d, &priors, FOSD_TOL).unwrap().holds);

    let inc = bt(0.4, 0.35, 0.65);
    let rep = check_difficulty_fosd_equiv(&t, &inc, &priors, FOSD_TOL).unwrap();
    assert!(!rep.holds);
    let (k, sig) = rep.witness.unwrap();
    // the witness is a genuine failure: the harder test's posterior puts less
    // mass on the high type
    let post = |pi: &[f64]| {
        let p = &priors[k];
        let a = p[1] * sig.prob(pi[1]);
        a / (a + p[0] * sig.prob(pi[0]))
    };
    assert!(post(t.pi()) < post(inc.pi()));
}

#[test]
fn crossing_oracle_example() {
    let t = bt(0.4, 0.2, 0.8);
    let d = bt(0.4, 0.35, 0.65);
    for k in 0..=400 {
        let q = k as f64 / 400.0;
        let (a, b) = lehmann_cdf_cross(&t, &d, 0, 1, q).unwrap();
        assert!(a <= b + 1e-12, "q={q}: {a} > {b}");
    }
}

#[test]
fn procedure_and_market_examples() {
    let g = Arc::new(TypeGrid::uniform(-1.0, 1.0, 3).unwrap());
    let t = Test::new(g.clone(), vec![0.2, 0.5, 0.8]).unwrap();
    let p = Procedure::new(t.clone(), 1.0, 0.5).unwrap();
    assert_abs_diff_eq!(p.acceptance(0), 0.6, epsilon = 1e-15);

    let w = Test::new(g.clone(), vec![0.44, 0.5, 0.8]).unwrap();
    let pw = Procedure::with_wages(w, 1.0, 0.0, 0.2 / 0.44, 0.0).unwrap();
    assert_abs_diff_eq!(Market::new(MarketMode::Wage).utility(&pw, 0, 1.0), 0.2, epsilon = 1e-12);

    let m = Market::default();
    let a = Procedure::new(t.clone(), 1.0, 0.6).unwrap();
    let b = Procedure::new(t.clone(), 1.0, 0.5).unwrap();
    assert!(m.best_response_split(&a, &b, 1.0, 1.0).phi.iter().all(|&x| x == 1.0));
    let harder = Procedure::new(t.power(2.0).unwrap(), 1.0, 0.0).unwrap();
    let easier = Procedure::new(t.clone(), 1.0, 0.0).unwrap();
    assert!(m.best_response_split(&harder, &easier, 1.0, 1.0).phi.iter().all(|&x| x == 0.0));

    let all = Procedure::new(bt(0.6, 0.2, 0.8), 1.0, 1.0).unwrap();
    let (v1, v2) = m.payoffs(&all, &all, &ApplicationProfile::uniform(2, 0.5));
    assert_abs_diff_eq!(v1, 0.1, epsilon = 1e-15);
    assert_abs_diff_eq!(v2, 0.1, epsilon = 1e-15);
    let zp = Procedure::new(bt(0.4, 0.2, 0.8), 1.0, 0.5).unwrap();
    assert_abs_diff_eq!(m.payoffs(&zp, &zp, &ApplicationProfile::uniform(2, 0.5)).0, 0.0, epsilon = 1e-15);

    let grid0 = Arc::new(TypeGrid::uniform(-1.0, 1.0, 3).unwrap());
    let half = Test::new(grid0, vec![0.3, 0.5, 0.7]).unwrap();
    let c = to_cutoff(&Procedure::new(half.clone(), 0.5, 0.4).unwrap()).unwrap();
    assert_abs_diff_eq!(c.alpha_h, 0.9, epsilon = 1e-12);
    assert_eq!(c.alpha_l, 0.0);
    let c = to_cutoff(&Procedure::new(half, 0.9, 0.9).unwrap()).unwrap();
    assert_eq!(c.alpha_h, 1.0);
    assert_abs_diff_eq!(c.alpha_l, 0.8, epsilon = 1e-12);
}

#[test]
fn zero_profit_examples() {
    let zp = zero_profit_alpha(&bt(0.6, 0.2, 0.8), MIN_INFO_TOL);
    assert_eq!((zp.procedure.alpha_h, zp.procedure.alpha_l), (1.0, 1.0));
    let zp = zero_profit_alpha(&bt(0.4, 0.2, 0.8), MIN_INFO_TOL);
    assert_eq!(zp.procedure.alpha_h, 1.0);
    assert_abs_diff_eq!(zp.procedure.alpha_l, 0.5, epsilon = 1e-12);
}

#[test]
fn mixing_family_equilibrium_matches_toy_model() {
    let t = bt(0.4, 0.2, 0.8);
    let set = TestSet::new(vec![t.clone(), t.garble(0.75, 0.5).unwrap(), t.garble(0.5, 0.5).unwrap()]).unwrap();
    let m = Market::default();
    let search = SearchConfig::default();
    let tables: Vec<(f64, f64)> = set.tests().iter().map(|x| (x.pi()[0], x.pi()[1])).collect();

    let good = zero_profit_alpha(set.get(0), MIN_INFO_TOL).procedure;
    let rep = verify_symmetric(&good, &set, &m, &search).unwrap();
    assert!(rep.is_equilibrium, "gain {}", rep.best_gain);
    let toy = Toy { lo: 0.2, hi: 0.8, ah: good.alpha_h, al: good.alpha_l };
    assert!(toy_best_gain(0.4, &tables, toy, 200).0 <= 1e-9);

    let bad = zero_profit_alpha(set.get(2), MIN_INFO_TOL).procedure;
    let rep = verify_symmetric(&bad, &set, &m, &search).unwrap();
    assert!(!rep.is_equilibrium);
    assert_eq!(rep.best_deviation_index, 0);
    let toy = Toy { lo: tables[2].0, hi: tables[2].1, ah: bad.alpha_h, al: bad.alpha_l };
    let (gain, j) = toy_best_gain(0.4, &tables, toy, 200);
    assert!(gain > 1e-3);
    assert_eq!(j, 0);
    assert!(rep.best_gain >= gain - 1e-9, "search {} vs toy {}", rep.best_gain, gain);

    let pooled = Procedure::new(bt(0.6, 0.2, 0.8), 1.0, 1.0).unwrap();
    let set6 = TestSet::new(vec![pooled.test.clone()]).unwrap();
    let rep = verify_symmetric(&pooled, &set6, &m, &search).unwrap();
    assert!(rep.is_equilibrium);
    assert_eq!(rep.best_gain, 0.0);
}

#[test]
fn binary_selection_example() {
    let set = TestSet::from_tables(binary(0.4), &[vec![0.2, 0.8], vec![0.3, 0.9], vec![0.35, 0.65]]).unwrap();
    assert_eq!(set.minimally_informative(MIN_INFO_TOL).len(), 3);
    assert_eq!(candidate_equilibrium(&set, MIN_INFO_TOL).unwrap().unwrap().index, 1);
    let single = TestSet::from_tables(binary(0.4), &[vec![0.2, 0.8]]).unwrap();
    let sel = candidate_equilibrium(&single, MIN_INFO_TOL).unwrap().unwrap();
    assert_eq!(sel.index, 0);
    assert_abs_diff_eq!(sel.procedure.alpha_l, 0.5, epsilon = 1e-12);
    let none = TestSet::from_tables(binary(0.2), &[vec![0.4, 0.5]]).unwrap();
    assert!(candidate_equilibrium(&none, MIN_INFO_TOL).unwrap().is_none());
}

#[test]
fn structural_examples() {
    let g = Arc::new(TypeGrid::uniform(-1.0, 0.5, 5).unwrap());
    let t = Test::new(g.clone(), vec![0.1, 0.3, 0.5, 0.7, 0.9]).unwrap();
    let chain = TestSet::new(vec![t.clone(), t.garble(0.7, 0.5).unwrap(), t.garble(0.4, 0.5).unwrap()]).unwrap();
    assert!(structural_checks(0, &chain, MIN_INFO_TOL).unwrap().accuracy_maximal);
    assert!(!structural_checks(1, &chain, MIN_INFO_TOL).unwrap().accuracy_maximal);

    let b = bt(0.4, 0.2, 0.5);
    let dchain = TestSet::new(vec![b.clone(), b.shift(0.1).unwrap(), b.shift(0.2).unwrap()]).unwrap();
    assert_eq!(dchain.minimally_informative(MIN_INFO_TOL).len(), 3);
    assert!(!structural_checks(1, &dchain, MIN_INFO_TOL).unwrap().difficulty_minimal_in_ti);

    let lone = TestSet::from_tables(binary(0.4), &[vec![0.2, 0.8], vec![0.3, 0.9], vec![0.35, 0.65]]).unwrap();
    let f = structural_checks(1, &lone, MIN_INFO_TOL).unwrap();
    assert!(f.accuracy_maximal && f.difficulty_minimal_in_ti);
}

#[test]
fn cost_examples() {
    let h = |p: f64| -(p * p.ln() + (1.0 - p) * (1.0 - p).ln());
    let t = bt(0.5, 0.2, 0.8);
    let want = h(0.5) - 0.5 * h(0.8) - 0.5 * h(0.2);
    assert_abs_diff_eq!(test_cost(&t, Divergence::KlToPrior), want, epsilon = 1e-12);
    assert_abs_diff_eq!(want, 0.19275, epsilon = 1e-5);
    let d = easier_mixture(&t, 0.5, 0.0).unwrap();
    assert_eq!(compare_difficulty(&t, &d).unwrap(), Comparison::MoreThan);
    assert!(test_cost(&d, Divergence::KlToPrior) < want);
}

#[test]
fn capacity_example() {
    let set = TestSet::from_tables(binary(0.4), &[vec![0.2, 0.8], vec![0.3, 0.9]]).unwrap();
    let cap = CapacityConfig::new(0.1).unwrap();
    let s = SearchConfig::default();
    let hard = verify_capacity_equilibrium(&Procedure::new(set.get(0).clone(), 1.0, 0.0).unwrap(), &set, &cap, &s, 1e-12)
        .unwrap();
    assert!(hard.is_equilibrium && hard.capacity_binds_at_candidate && hard.all_feasible);
    assert_abs_diff_eq!(hard.equilibrium_payoff, 0.1 * 0.2 / 0.44, epsilon = 1e-9);
    let easy = verify_capacity_equilibrium(&Procedure::new(set.get(1).clone(), 1.0, 0.0).unwrap(), &set, &cap, &s, 1e-12)
        .unwrap();
    assert!(!easy.is_equilibrium);
    assert_eq!(easy.best_deviation.test.pi(), set.get(0).pi());
}

#[test]
fn two_tier_examples() {
    let g = Arc::new(TypeGrid::binary(0.2, 1.0, 0.3).unwrap());
    let set = TestSet::from_tables(g.clone(), &[vec![0.3, 0.6], vec![0.5, 0.8]]).unwrap();
    let cap = CapacityConfig::new(0.15).unwrap();
    assert_eq!(two_tier_conditions(&g, set.get(0), set.get(1), &cap).unwrap(), [true; 4]);
    let big = CapacityConfig::new(0.3).unwrap();
    assert!(!two_tier_conditions(&g, set.get(0), set.get(1), &big).unwrap()[2]);
    let p = two_tier_profile(&g, set.get(0), set.get(1), &cap).unwrap();
    assert_abs_diff_eq!(p.phi_low, 0.39 / 0.42, epsilon = 1e-12);
    let s = SearchConfig::default();
    let cert = verify_two_tier(set.get(0), set.get(1), &set, Some(&cap), &s, 1e-12).unwrap();
    assert!(cert.confirmed(1e-9));
    let not_applicable = verify_two_tier(set.get(0), set.get(1), &set, Some(&big), &s, 1e-12).unwrap();
    assert!(!not_applicable.applicable && !not_applicable.confirmed(1e-9));
    let none = verify_two_tier(set.get(0), set.get(1), &set, None, &s, 1e-12).unwrap();
    assert!(none.deviation_gain_selective > 1e-9);
}

#[test]
fn wage_examples() {
    let set = TestSet::from_tables(binary(0.4), &[vec![0.2, 0.8], vec![0.3, 0.9]]).unwrap();
    let m = zero_profit_wage(set.get(0)).unwrap();
    assert_abs_diff_eq!(m, 0.4545454545, epsilon = 1e-9);
    let cand = Procedure::with_wages(set.get(0).clone(), 1.0, 0.0, m, 0.0).unwrap();
    let rep = verify_wage_equilibrium(&cand, &set, &WageSearch::default()).unwrap();
    assert!(rep.passes());

    let me = zero_profit_wage(set.get(1)).unwrap();
    let easy = Procedure::with_wages(set.get(1).clone(), 1.0, 0.0, me, 0.0).unwrap();
    let rep = verify_wage_equilibrium(&easy, &set, &WageSearch::default()).unwrap();
    assert!(!rep.passes());
    assert_eq!(rep.best_deviation.test.pi(), set.get(0).pi());
    // the harder test attracts the high type once it pays slightly more per
    // high-type hire than the candidate
    assert!(0.8 * rep.best_deviation.wage_h > 0.9 * me);
}
