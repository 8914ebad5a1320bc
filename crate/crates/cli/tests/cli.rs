use std::path::PathBuf;
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn seleq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seleq"))
        .args(args)
        .env_remove("SELEQ_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no {key} in\n{text}"))
}

fn num(text: &str, key: &str) -> f64 {
    field(text, key).parse().unwrap()
}

#[test]
fn solve_baseline_picks_sharpest_test() {
    let cfg = config("binary_baseline.toml");
    let o = seleq(&["solve", "--config", cfg.to_str().unwrap()]);
    let s = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{s}");
    assert_eq!(field(&s, "candidate.pi"), "[0.2,0.8]");
    assert_eq!(num(&s, "candidate.alpha_h"), 1.0);
    assert!((num(&s, "candidate.alpha_l") - 0.5).abs() < 1e-12);
    assert_eq!(field(&s, "is_equilibrium"), "true");
}

#[test]
fn solve_selects_smallest_low_ratio() {
    let cfg = config("binary_selection.toml");
    let o = seleq(&["solve", "--config", cfg.to_str().unwrap()]);
    let s = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{s}");
    assert_eq!(field(&s, "candidate.pi"), "[0.3,0.9]");
    assert_eq!(field(&s, "selection.index"), "1");
}

#[test]
fn verify_perturbed_low_acceptance_is_undercut() {
    let cfg = config("binary_baseline.toml");
    let o = seleq(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "candidate.test=0",
        "--set",
        "candidate.alpha_l=0.55",
    ]);
    let s = stdout(&o);
    assert_eq!(o.status.code(), Some(1), "{s}");
    assert!(num(&s, "best_gain") > 1e-9);
    assert!(s.contains("best_deviation.alpha_l="));
    assert_eq!(field(&s, "is_equilibrium"), "false");
}

#[test]
fn scan_region_matches_integral_sign() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("powerlinear_scan.toml");
    let args = [
        "scan",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "types.points=21",
        "--out",
        dir.path().to_str().unwrap(),
    ];
    let o = seleq(&args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let path = dir.path().join("powerlinear_scan.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    let comment = lines.next().unwrap();
    assert!(comment.starts_with(&format!("# seleq {} config_sha256=", env!("CARGO_PKG_VERSION"))));
    assert_eq!(comment.len(), "# seleq  config_sha256=".len() + env!("CARGO_PKG_VERSION").len() + 64);
    assert_eq!(lines.next().unwrap(), "sigma,d,in_Ti,int_theta_pi,post_mean_h,is_equilibrium,best_gain");
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 400);

    // the mean type is negative on this grid, so membership reduces to the
    // sign of the integral
    let (mut inside, mut outside) = (0, 0);
    for r in &rows {
        let flag: bool = r[2].parse().unwrap();
        let integral: f64 = r[3].parse().unwrap();
        assert_eq!(flag, integral >= -1e-12, "{r:?}");
        if flag {
            inside += 1;
        } else {
            outside += 1;
        }
    }
    assert!(inside > 0 && outside > 0);
    // along each accuracy level membership switches at most once in d
    for chunk in rows.chunks(20) {
        let flags: Vec<bool> = chunk.iter().map(|r| r[2] == "true").collect();
        assert!(flags.windows(2).filter(|w| w[0] != w[1]).count() <= 1, "{flags:?}");
    }
    // every equilibrium found lies in the region
    assert!(rows.iter().all(|r| r[5] == "false" || r[2] == "true"));

    let again = seleq(&args);
    assert_eq!(o.stdout, again.stdout);
    assert_eq!(text, std::fs::read_to_string(&path).unwrap());
}

#[test]
fn output_is_identical_across_thread_counts() {
    let cfg = config("binary_selection.toml");
    let c = cfg.to_str().unwrap();
    let one = seleq(&["solve", "--config", c, "--threads", "1"]);
    let env = Command::new(env!("CARGO_BIN_EXE_seleq"))
        .args(["solve", "--config", c])
        .env("SELEQ_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(one.stdout, env.stdout);
}

#[test]
fn orders_certificate_is_consistent() {
    let cfg = config("binary_baseline.toml");
    let o = seleq(&["orders", "--config", cfg.to_str().unwrap(), "--certify"]);
    let s = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{s}");
    assert_eq!(field(&s, "accuracy"), "more");
    assert_eq!(field(&s, "consistent"), "true");
}

#[test]
fn extension_certificates() {
    let cap = seleq(&["capacity", "--config", config("capacity.toml").to_str().unwrap()]);
    let s = stdout(&cap);
    assert_eq!(cap.status.code(), Some(0), "{s}");
    assert!((num(&s, "equilibrium_payoff") - 0.1 * 0.2 / 0.44).abs() < 1e-9);
    let easy = seleq(&[
        "capacity",
        "--config",
        config("capacity.toml").to_str().unwrap(),
        "--set",
        "candidate.test=1",
    ]);
    assert_eq!(easy.status.code(), Some(1));

    let tt = seleq(&["two-tier", "--config", config("two_tier.toml").to_str().unwrap()]);
    let s = stdout(&tt);
    assert_eq!(tt.status.code(), Some(0), "{s}");
    assert!((num(&s, "phi_low") - 0.39 / 0.42).abs() < 1e-9);

    let cost = seleq(&["cost", "--config", config("cost.toml").to_str().unwrap(), "--isocost", "mu=0.1"]);
    let s = stdout(&cost);
    assert_eq!(cost.status.code(), Some(0), "{s}");
    assert!((num(&s, "cost") - 0.19274475702).abs() < 1e-9);
    assert!(num(&s, "isocost.gap") <= 1e-8);
}

#[test]
fn malformed_config_exits_two_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[types]\nkind = \"binary\"\nmu = 0.4\ntheta_low = -1\ntheta_high = 1\nwhat = 3\n").unwrap();
    let o = seleq(&["verify", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("bad.toml:6:"), "{err}");

    std::fs::write(&path, "[types\nkind = 1\n").unwrap();
    let o = seleq(&["verify", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("bad.toml:1:"));

    let o = seleq(&["verify", "--config", config("binary_baseline.toml").to_str().unwrap(), "--set", "candidate.test=9"]);
    assert_eq!(o.status.code(), Some(2));
}
