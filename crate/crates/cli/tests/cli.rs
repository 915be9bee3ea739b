use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pilm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pilm")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small synthetic network so strain runs take well under a second.
const SMALL_STRAIN: &[&str] = &[
    "--station-count",
    "80",
    "--half-width",
    "50",
    "--spacing",
    "25",
    "--grid-spacing",
    "25",
    "--alpha-grid",
    "-2:8:1",
];

#[test]
fn help_lists_every_experiment_with_its_figure() {
    let o = pilm(&["--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for (name, reference) in [
        ("oscillator-forward", "Fig. 2"),
        ("oscillator-scaling", "Fig. 3"),
        ("oscillator-inverse", "Fig. 4"),
        ("diffusion-inverse", "Figs. 5-6"),
        ("elasticity-verify", "Figs. S3-S4"),
        ("strain", "Table 2"),
        ("hybrid-scan", "Fig. 8b"),
    ] {
        let line = text.lines().find(|l| l.trim_start().starts_with(name)).unwrap_or_else(|| panic!("{name} missing"));
        assert!(line.contains(reference), "{line}");
    }
}

#[test]
fn inverse_run_reports_the_damping_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let o = pilm(&["oscillator-inverse", "--out", path(&first)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("c_star = 0.50"));

    let config = fs::read_to_string(first.join("config.txt")).unwrap();
    assert!(config.starts_with("experiment = oscillator-inverse\n"));
    assert!(config.contains("seed = 1\n"));

    let second = dir.path().join("second");
    let o = pilm(&["oscillator-inverse", "--config", path(&first.join("config.txt")), "--out", path(&second)]);
    assert!(o.status.success());
    for name in ["observations.csv", "profile.csv", "fit.csv", "report.txt"] {
        assert_eq!(fs::read(first.join(name)).unwrap(), fs::read(second.join(name)).unwrap(), "{name}");
    }

    let o = pilm(&["compare", path(&first), path(&second)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).is_empty());
}

#[test]
fn noisy_rerun_is_reproducible_and_compare_flags_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = pilm(&["oscillator-inverse", "--noise", "0.05", "--seed", seed, "--out", path(&out)]);
        assert!(o.status.success());
        out
    };
    let (a, b, c) = (run("a", "7"), run("b", "7"), run("c", "8"));
    assert_eq!(fs::read(a.join("observations.csv")).unwrap(), fs::read(b.join("observations.csv")).unwrap());
    assert_ne!(fs::read(a.join("observations.csv")).unwrap(), fs::read(c.join("observations.csv")).unwrap());

    let o = pilm(&["compare", path(&a), path(&c), "--tol", "0"]);
    assert_eq!(o.status.code(), Some(5));
    assert!(stdout(&o).contains("loss_star"));
    let o = pilm(&["compare", path(&a), path(&c), "--tol", "1e9"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn precedence_is_defaults_config_set_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.txt");
    fs::write(&cfg, "experiment = oscillator-forward\ncounts = 13\ndamping = 1\nsamples = 50\n").unwrap();
    let out = dir.path().join("out");
    let o = pilm(&[
        "oscillator-forward",
        "--config",
        path(&cfg),
        "--set",
        "damping=2",
        "--set",
        "samples=20",
        "--samples",
        "10",
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let config = fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(config.contains("counts = 13\n") && config.contains("damping = 2\n") && config.contains("samples = 10\n"));
    let csv = fs::read_to_string(out.join("forward_M13_c2_ic1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn small_strain_runs_compare_by_log_likelihood() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec!["strain", "--out", path(&out)];
        args.extend_from_slice(SMALL_STRAIN);
        args.extend_from_slice(extra);
        let o = pilm(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let math = run("math", &["--reg", "math"]);
    let phys = run("phys", &["--reg", "phys", "--nu", "0.5"]);
    for name in ["stations.csv", "ll_math.csv", "strain_math.csv", "summary.txt"] {
        assert!(math.join(name).is_file(), "{name}");
    }
    assert!(phys.join("strain_phys_nu0.5.csv").is_file());

    let read = |d: &Path| fs::read_to_string(d.join("report.txt")).unwrap();
    let ll = |text: &str| -> f64 {
        text.lines().find_map(|l| l.strip_prefix("ll_star = ")).unwrap().parse().unwrap()
    };
    let (ll_math, ll_phys) = (ll(&read(&math)), ll(&read(&phys)));
    let o = pilm(&["compare", path(&math), path(&phys), "--tol", "ll_star=1e12", "--tol", "1e12"]);
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("ll_star:")).unwrap();
    let delta: f64 = line.split("delta ").nth(1).unwrap().trim_end_matches(')').parse().unwrap();
    assert!((delta - (ll_phys - ll_math)).abs() < 1e-9, "{line}");
    assert!(text.contains("phys(nu=0.5).ll: (missing) -> "), "{text}");
    // `best` differs as text, which no numeric tolerance covers
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = |n: &str| dir.path().join(n).to_str().unwrap().to_string();

    assert_eq!(pilm(&["oscillator-inverse", "--bogus", "1"]).status.code(), Some(2));
    assert_eq!(pilm(&["oscillator-inverse", "--set", "bogus=1", "--out", &out("a")]).status.code(), Some(2));
    assert_eq!(pilm(&["oscillator-inverse", "--count", "many", "--out", &out("b")]).status.code(), Some(2));
    assert_eq!(pilm(&["diffusion-inverse", "--profile", "trimodal", "--out", &out("c")]).status.code(), Some(2));

    let o = pilm(&["strain", "--stations", &out("absent.csv"), "--out", &out("d")]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("data error"));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "lon_deg,lat_deg,ve_mm_yr,vn_mm_yr\n138,36,1,oops\n").unwrap();
    assert_eq!(pilm(&["strain", "--stations", path(&bad), "--out", &out("e")]).status.code(), Some(3));

    // too few stations for the basis: the marginal likelihood has no degrees of freedom
    let mut args = vec!["strain", "--station-count", "3", "--out"];
    let f = out("f");
    args.push(&f);
    assert_eq!(pilm(&args).status.code(), Some(4));

    let cfg = dir.path().join("wrong.txt");
    fs::write(&cfg, "experiment = strain\n").unwrap();
    assert_eq!(pilm(&["oscillator-inverse", "--config", path(&cfg), "--out", &out("g")]).status.code(), Some(2));
}

#[test]
fn compare_rejects_reports_from_different_experiments() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    fs::write(&a, "experiment = strain\nll_star = -1\n").unwrap();
    fs::write(&b, "experiment = hybrid-scan\nll_star = -1\n").unwrap();
    assert_eq!(pilm(&["compare", path(&a), path(&b)]).status.code(), Some(2));
    assert_eq!(pilm(&["compare", path(&a), path(&dir.path().join("none.txt"))]).status.code(), Some(3));
}

#[test]
fn integrals_are_written_as_csv() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("r.csv");
    let o = pilm(&["integrals", "--length", "10", "--count", "13", "--out", path(&file)]);
    assert!(o.status.success());
    let text = fs::read_to_string(&file).unwrap();
    assert_eq!(text.lines().next(), Some("a,b,i,j,value"));
    // R^00 is symmetric and banded with half-bandwidth 3
    let entries: Vec<(u32, u32, usize, usize, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap(), f[4].parse().unwrap())
        })
        .collect();
    assert!(entries.iter().filter(|e| e.0 == 0 && e.1 == 0).all(|e| e.2.abs_diff(e.3) <= 3));
    assert!(entries.iter().any(|e| (e.0, e.1) == (2, 2)));
}
