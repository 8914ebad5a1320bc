use std::fs::File;
use std::io::{BufWriter, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seleq_core::extensions::capacity::{verify_capacity_equilibrium, CapacityConfig};
use seleq_core::extensions::two_tier::verify_two_tier;
use seleq_core::extensions::wage::{verify_wage_equilibrium, zero_profit_wage, WageSearch};
use seleq_core::info_cost::{isocost_easier, test_cost, verify_cost_equilibrium, CostSearch, CostSpec, Divergence};
use seleq_core::orders::{check_difficulty_fosd_equiv, compare_accuracy_lehmann, compare_accuracy_tol, compare_difficulty_tol, FOSD_TOL};
use seleq_core::{candidate_equilibrium, par, verify_symmetric, zero_profit_alpha, DeviationReport, Procedure};

use crate::config::{ConfigError, Loaded};
use crate::instance::Instance;
use crate::report::{num, Block};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug)]
pub enum Failure {
    Input(ConfigError),
    Run(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Input(e)
    }
}

impl From<seleq_core::Error> for Failure {
    fn from(e: seleq_core::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

/// Certificate text plus whether it confirms (exit 0) or falsifies (exit 1).
pub struct Outcome {
    pub block: Block,
    pub confirmed: bool,
}

fn finish(mut block: Block, key: &str, confirmed: bool) -> Outcome {
    block.put(key, confirmed);
    Outcome { block, confirmed }
}

fn missing(l: &Loaded, section: &str) -> Failure {
    Failure::Input(l.error_at(section, format!("config has no [{section}] section")))
}

fn sample_priors(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normalise = |w: Vec<f64>| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect::<Vec<_>>()
    };
    // every adjacent pair gets a two-point prior, the rest have full support
    let two_point = (count / 5).max(n - 1);
    let mut priors = Vec::with_capacity(count.max(two_point));
    for k in 0..two_point {
        let at = k % (n - 1);
        let mut w = vec![0.0; n];
        let a: f64 = rng.gen_range(0.05..0.95);
        w[at] = a;
        w[at + 1] = 1.0 - a;
        priors.push(w);
    }
    while priors.len() < count {
        priors.push(normalise((0..n).map(|_| rng.gen_range(0.01..1.0)).collect()));
    }
    priors
}

pub fn orders(l: &Loaded, inst: &Instance, certify: bool) -> Result<Outcome, Failure> {
    let o = l.config.orders.as_ref().ok_or_else(|| missing(l, "orders"))?;
    let t = inst.resolve(l, "orders.t", &o.t)?;
    let d = inst.resolve(l, "orders.d", &o.d)?;
    let acc = compare_accuracy_tol(&t.test, &d.test, o.tol)?;
    let dif = compare_difficulty_tol(&t.test, &d.test, o.tol)?;
    let mut b = Block::new("orders");
    b.test("t", &inst.set, t.index, t.test.pi());
    b.test("d", &inst.set, d.index, d.test.pi());
    b.put("accuracy", acc.name());
    b.put("difficulty", dif.name());
    if !certify {
        return Ok(Outcome { block: b, confirmed: true });
    }
    let priors = sample_priors(inst.grid.len(), o.priors, l.config.seed);
    let forward = check_difficulty_fosd_equiv(&t.test, &d.test, &priors, FOSD_TOL)?;
    let backward = check_difficulty_fosd_equiv(&d.test, &t.test, &priors, FOSD_TOL)?;
    let fosd_ok = forward.holds == dif.at_least() && backward.holds == dif.flip().at_least();
    let lehmann = compare_accuracy_lehmann(&t.test, &d.test, o.q_points, o.tol)?;
    let lehmann_ok = lehmann == acc;
    b.put("priors", priors.len());
    b.put("fosd.t_over_d", forward.holds);
    b.put("fosd.d_over_t", backward.holds);
    b.put("fosd.skipped", forward.skipped + backward.skipped);
    if let Some((k, s)) = forward.witness {
        b.put("fosd.witness", format!("prior {k} signal {}", s.name()));
    }
    b.put("fosd.consistent", fosd_ok);
    b.put("lehmann.q_points", o.q_points);
    b.put("lehmann.accuracy", lehmann.name());
    b.put("lehmann.consistent", lehmann_ok);
    Ok(finish(b, "consistent", fosd_ok && lehmann_ok))
}

fn deviation_block(command: &str, inst: &Instance, rep: &DeviationReport) -> Block {
    let mut b = Block::new(command);
    b.procedure("candidate", &inst.set, &rep.candidate, false);
    b.put("equilibrium_payoff", rep.equilibrium_payoff);
    b.procedure("best_deviation", &inst.set, &rep.best_deviation, false);
    b.put("best_deviation_payoff", rep.best_deviation_payoff);
    b.put("best_gain", rep.best_gain);
    b.put("gain_tol", inst.search.gain_tol);
    b.put("deviations_checked", rep.deviations_checked);
    b.put("cutoff_step", 1.0 / (inst.search.alpha_steps.max(2) - 1) as f64);
    lattice_spacing(&mut b, inst);
    let s = &rep.structural;
    b.put("flags.in_ti", s.in_ti);
    b.put("flags.zero_profit", s.zero_profit_ok);
    b.put("flags.accuracy_maximal", s.accuracy_maximal);
    b.put("flags.difficulty_minimal_in_ti", s.difficulty_minimal_in_ti);
    b.put("flags.knife_edge_pairs", s.knife_edge_pairs);
    b
}

fn lattice_spacing(b: &mut Block, inst: &Instance) {
    let (Some(sig), Some(d)) = (&inst_axis(inst, 0), &inst_axis(inst, 1)) else {
        return;
    };
    b.put("lattice.sigma_step", spacing(sig));
    b.put("lattice.d_step", spacing(d));
}

fn inst_axis(inst: &Instance, which: usize) -> Option<Vec<f64>> {
    let mut v: Vec<f64> = (0..inst.set.len())
        .map(|i| inst.set.params(i).map(|p| if which == 0 { p.0 } else { p.1 }))
        .collect::<Option<_>>()?;
    v.sort_by(f64::total_cmp);
    v.dedup();
    Some(v)
}

fn spacing(v: &[f64]) -> f64 {
    v.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

pub fn verify(l: &Loaded, inst: &Instance) -> Result<Outcome, Failure> {
    let c = l.config.candidate.as_ref().ok_or_else(|| missing(l, "candidate"))?;
    let i = inst.resolve_member(l, "candidate.test", &c.test)?;
    let test = inst.set.get(i).clone();
    let zp = zero_profit_alpha(&test, inst.search.min_info_tol).procedure;
    let cand = Procedure::new(test, c.alpha_h.unwrap_or(zp.alpha_h), c.alpha_l.unwrap_or(zp.alpha_l))
        .map_err(|e| l.error_at("candidate", e.to_string()))?;
    let rep = verify_symmetric(&cand, &inst.set, &inst.market, &inst.search)?;
    Ok(finish(deviation_block("verify", inst, &rep), "is_equilibrium", rep.is_equilibrium))
}

pub fn solve(_l: &Loaded, inst: &Instance) -> Result<Outcome, Failure> {
    let Some(sel) = candidate_equilibrium(&inst.set, inst.search.min_info_tol)? else {
        let mut b = Block::new("solve");
        b.put("candidate", "none");
        b.put("reason", "no minimally informative test");
        return Ok(finish(b, "is_equilibrium", false));
    };
    let rep = verify_symmetric(&sel.procedure, &inst.set, &inst.market, &inst.search)?;
    let mut b = deviation_block("solve", inst, &rep);
    b.put("selection.index", sel.index);
    b.put("selection.supportable", sel.supportable);
    Ok(finish(b, "is_equilibrium", rep.is_equilibrium))
}

/// Region CSV over the family lattice: each member played symmetrically at
/// its zero-profit rule and checked against the whole lattice.
pub fn scan(l: &Loaded, inst: &Instance) -> Result<Outcome, Failure> {
    if inst.family.is_none() {
        return Err(Failure::Input(l.error_at("test_set", "scan needs a family lattice")));
    }
    let set = &inst.set;
    let inner = seleq_core::SearchConfig {
        parallel: false,
        ..inst.search
    };
    let rows = par::map_indexed(set.len(), inst.search.parallel, |i| {
        let t = set.get(i);
        let stats = t.stats();
        let zp = zero_profit_alpha(t, inner.min_info_tol).procedure;
        let rep = verify_symmetric(&zp, set, &inst.market, &inner);
        (stats, rep.map(|r| (r.is_equilibrium, r.best_gain)))
    });
    let out_dir = &l.config.output.dir;
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(&l.config.output.scan_file);
    let mut file = BufWriter::new(File::create(&path)?);
    writeln!(file, "# seleq {VERSION} config_sha256={}", l.hash)?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file);
    w.write_record(["sigma", "d", "in_Ti", "int_theta_pi", "post_mean_h", "is_equilibrium", "best_gain"])
        .map_err(|e| Failure::Run(e.to_string()))?;
    let mut equilibria = 0;
    for (i, (stats, rep)) in rows.into_iter().enumerate() {
        let (sigma, d) = set.params(i).expect("family lattice has params");
        let (eq, gain) = rep?;
        equilibria += eq as usize;
        w.write_record([
            num(sigma),
            num(d),
            stats.is_minimally_informative(inst.search.min_info_tol).to_string(),
            num(stats.int_theta_pi),
            stats.post_mean_h.map(num).unwrap_or_default(),
            eq.to_string(),
            num(gain),
        ])
        .map_err(|e| Failure::Run(e.to_string()))?;
    }
    w.flush()?;
    let mut b = Block::new("scan");
    b.put("rows", set.len());
    b.put("equilibria", equilibria);
    b.put("config_sha256", &l.hash);
    lattice_spacing(&mut b, inst);
    b.put("csv", path.display().to_string());
    Ok(Outcome { block: b, confirmed: true })
}

/// `mu=<v>` or `kappa=<v>` flag payloads.
pub fn keyed_value(flag: &str, key: &str, text: &str) -> Result<f64, Failure> {
    let bad = || {
        Failure::Input(ConfigError {
            origin: format!("--{flag}"),
            line: None,
            message: format!("expected {key}=<number>, got '{text}'"),
        })
    };
    let (k, v) = text.split_once('=').ok_or_else(bad)?;
    if k.trim() != key {
        return Err(bad());
    }
    v.trim().parse().map_err(|_| bad())
}

pub fn cost(l: &Loaded, inst: &Instance, isocost: Option<f64>, kappa: Option<f64>) -> Result<Outcome, Failure> {
    let c = l.config.cost.as_ref().ok_or_else(|| missing(l, "cost"))?;
    let divergence: Divergence = c.divergence.parse().map_err(|e: seleq_core::Error| l.error_at("cost.divergence", e.to_string()))?;
    let t = inst.resolve(l, "cost.test", &c.test)?;
    let base = test_cost(&t.test, divergence);
    let mut b = Block::new("cost");
    b.test("test", &inst.set, t.index, t.test.pi());
    b.put("divergence", &c.divergence);
    b.put("cost", base);
    let mut ok = true;

    if let Some(mu) = isocost.or(c.mu_mix.filter(|_| kappa.is_none())) {
        let iso = isocost_easier(&t.test, divergence, mu)?;
        let gap = (iso.cost - iso.target).abs();
        let easier = seleq_core::info_cost::strictly_easier(&t.test, &iso.test)?;
        b.put("isocost.mu_mix", mu);
        b.list("isocost.pi", iso.test.pi());
        b.put("isocost.lambda", iso.lambda);
        b.put("isocost.cost", iso.cost);
        b.put("isocost.gap", gap);
        b.put("isocost.iterations", iso.iterations);
        b.put("isocost.strictly_easier", easier);
        ok &= gap <= seleq_core::info_cost::COST_TOL && easier;
    }

    if let Some(kappa) = kappa.or(c.kappa.filter(|_| isocost.is_none())) {
        let zp = zero_profit_alpha(&t.test, inst.search.min_info_tol).procedure;
        let search = CostSearch {
            deviation: inst.search,
            ..CostSearch::default()
        };
        let rep = verify_cost_equilibrium(&zp, &CostSpec { divergence, kappa }, &inst.market, &search)?;
        b.put("kappa", kappa);
        b.procedure("candidate", &inst.set, &zp, false);
        b.put("budget_binds", rep.budget_binds);
        b.put("zero_mean_high", rep.zero_mean_high);
        b.put("equilibrium_payoff", rep.equilibrium_payoff);
        for k in &rep.by_kind {
            let name = k.kind.name();
            b.put(&format!("{name}.sampled"), k.sampled);
            b.put(&format!("{name}.feasible"), k.feasible);
            b.put(&format!("{name}.gain"), k.gain);
            if let Some((p, cost)) = &k.best {
                b.list(&format!("{name}.best.pi"), p.test.pi());
                b.put(&format!("{name}.best.alpha_h"), p.alpha_h);
                b.put(&format!("{name}.best.alpha_l"), p.alpha_l);
                b.put(&format!("{name}.best.cost"), cost);
            }
        }
        b.put("best_gain", rep.best_gain);
        b.put("no_deviation", rep.no_deviation);
        ok &= rep.passes();
    }
    Ok(finish(b, "confirmed", ok))
}

fn candidate_alpha_hl(l: &Loaded) -> (f64, f64) {
    let c = l.config.candidate.as_ref();
    (
        c.and_then(|c| c.alpha_h).unwrap_or(1.0),
        c.and_then(|c| c.alpha_l).unwrap_or(0.0),
    )
}

pub fn capacity(l: &Loaded, inst: &Instance) -> Result<Outcome, Failure> {
    let k = l.config.capacity.as_ref().ok_or_else(|| missing(l, "capacity"))?.k;
    let cap = CapacityConfig::new(k).map_err(|e| l.error_at("capacity.k", e.to_string()))?;
    let c = l.config.candidate.as_ref().ok_or_else(|| missing(l, "candidate"))?;
    let i = inst.resolve_member(l, "candidate.test", &c.test)?;
    let (ah, al) = candidate_alpha_hl(l);
    let cand = Procedure::new(inst.set.get(i).clone(), ah, al).map_err(|e| l.error_at("candidate", e.to_string()))?;
    let rep = verify_capacity_equilibrium(&cand, &inst.set, &cap, &inst.search, inst.market.tie_tol)?;
    let mut b = Block::new("capacity");
    b.put("k", k);
    b.procedure("candidate", &inst.set, &rep.candidate, false);
    b.put("equilibrium_payoff", rep.equilibrium_payoff);
    b.put("ration", rep.equilibrium.ration1);
    b.put("capacity_binds_at_candidate", rep.capacity_binds_at_candidate);
    if !rep.capacity_binds_at_candidate {
        b.put("note", "k is not below half the candidate's high-signal rate; the scarcity argument does not apply");
    }
    b.procedure("best_deviation", &inst.set, &rep.best_deviation, false);
    b.put("best_deviation_payoff", rep.best_deviation_payoff);
    b.put("best_gain", rep.best_gain);
    b.put("all_feasible", rep.all_feasible);
    b.put("deviations_checked", rep.deviations_checked);
    Ok(finish(b, "is_equilibrium", rep.is_equilibrium))
}

pub fn two_tier(l: &Loaded, inst: &Instance) -> Result<Outcome, Failure> {
    let tt = l.config.two_tier.as_ref().ok_or_else(|| missing(l, "two_tier"))?;
    let sel = inst.resolve(l, "two_tier.selective_test", &tt.selective_test)?;
    let safe = inst.resolve(l, "two_tier.safe_test", &tt.safe_test)?;
    let cap = if tt.with_capacity {
        let k = l.config.capacity.as_ref().ok_or_else(|| missing(l, "capacity"))?.k;
        Some(CapacityConfig::new(k).map_err(|e| l.error_at("capacity.k", e.to_string()))?)
    } else {
        None
    };
    let cert = verify_two_tier(&sel.test, &safe.test, &inst.set, cap.as_ref(), &inst.search, inst.market.tie_tol)?;
    let mut b = Block::new("two-tier");
    b.procedure("selective", &inst.set, &cert.selective_proc, false);
    b.procedure("safe", &inst.set, &cert.safe_proc, false);
    b.put("with_capacity", cert.with_capacity);
    if let Some(cap) = cap {
        b.put("k", cap.k);
    }
    b.put("applicable", cert.applicable);
    let names = ["low_type_productive", "mixing_feasible", "selective_binds", "safe_binds"];
    for (n, f) in names.iter().zip(cert.conditions) {
        b.put(&format!("conditions.{n}"), f);
    }
    b.put("selective_maximises_ratio", cert.selective_maximises_ratio);
    b.put("phi_low", cert.phi_low);
    b.put("phi_low_solver", cert.phi_low_solver);
    b.put("payoff_selective", cert.payoff_selective);
    b.put("payoff_safe", cert.payoff_safe);
    b.put("deviation_gain_selective", cert.deviation_gain_selective);
    b.put("deviation_gain_safe", cert.deviation_gain_safe);
    if let Some(p) = &cert.best_deviation_selective {
        b.procedure("best_deviation_selective", &inst.set, p, false);
    }
    if let Some(p) = &cert.best_deviation_safe {
        b.procedure("best_deviation_safe", &inst.set, p, false);
    }
    Ok(finish(b, "confirmed", cert.confirmed(inst.search.gain_tol)))
}

pub fn wage(l: &Loaded, inst: &Instance) -> Result<Outcome, Failure> {
    let c = l.config.candidate.as_ref().ok_or_else(|| missing(l, "candidate"))?;
    let i = inst.resolve_member(l, "candidate.test", &c.test)?;
    let test = inst.set.get(i).clone();
    let (ah, al) = candidate_alpha_hl(l);
    let wh = match c.wage_h {
        Some(w) => w,
        None => zero_profit_wage(&test)?,
    };
    let cand = Procedure::with_wages(test, ah, al, wh, c.wage_l.unwrap_or(0.0))
        .map_err(|e| l.error_at("candidate", e.to_string()))?;
    let mut search = WageSearch {
        gain_tol: inst.search.gain_tol,
        parallel: inst.search.parallel,
        ..WageSearch::default()
    };
    if let Some(w) = &l.config.wage {
        search.alpha_steps = w.alpha_steps.unwrap_or(search.alpha_steps);
        search.wage_steps = w.wage_steps.unwrap_or(search.wage_steps);
        search.mixed_steps = w.mixed_steps.unwrap_or(search.mixed_steps);
        search.epsilon = w.epsilon.unwrap_or(search.epsilon);
        if let Some(m) = &w.markups {
            search.markups = m.clone();
        }
    }
    let rep = verify_wage_equilibrium(&cand, &inst.set, &search)?;
    let mut b = Block::new("wage");
    b.procedure("candidate", &inst.set, &rep.candidate, true);
    b.put("zero_profit_wage", rep.zero_profit_wage);
    b.put("wage_matches", rep.wage_matches);
    b.put("alpha_l_zero", rep.alpha_l_zero);
    b.put("difficulty_maximal", rep.difficulty_maximal);
    b.put("total_profit", rep.total_profit);
    b.opt("cross_subsidy_gain", rep.cross_subsidy_gain);
    b.procedure("best_deviation", &inst.set, &rep.best_deviation, true);
    b.put("best_gain", rep.best_gain);
    b.put("no_deviation", rep.no_deviation);
    b.put("deviations_checked", rep.deviations_checked);
    Ok(finish(b, "confirmed", rep.passes()))
}
