use std::path::Path;
use std::process::{Command, Output};

use clap::Parser;
use corrkit::cli::{self, Cli, ConvertArgs, DensityArgs, EigenArgs, GlobalArgs, InfluenceArgs, MomentsArgs, ResampleArgs, SimulateArgs};
use serde::Serialize;

fn corrkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corrkit"))
        .args(args)
        .env_remove(cli::OUT_DIR_ENV)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn data_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

#[test]
fn convert_prints_population_values() {
    let o = corrkit(&["convert", "--rp", "0.2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("R_s=0.191"), "{text}");
    assert!(text.contains("R_t=0.128"), "{text}");
    let o = corrkit(&["convert", "--rs", "0.1913", "--n", "20"]);
    assert!(stdout(&o).contains("R_p=0.200"));
    assert!(stdout(&o).contains("E(r_p)=0.195"));
}

#[test]
fn density_csv_integrates_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = corrkit(&["density", "--rp", "0.8", "--n", "5", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines = data_lines(&dir.path().join("density_rp0.8_n5.csv"));
    assert_eq!(lines[0], "r,density");
    let pts: Vec<(f64, f64)> = lines[1..]
        .iter()
        .map(|l| {
            let mut it = l.split(',').map(|v| v.parse::<f64>().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .collect();
    let area: f64 = pts.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum();
    assert!((area - 1.0).abs() < 1e-3, "{area}");
}

#[test]
fn simulate_flags_resolve_to_a_plan() {
    let cli = Cli::try_parse_from(["corrkit", "simulate", "--rp", "0.2", "--marginals", "normal", "--seed", "7"]).unwrap();
    let r = cli::resolve(cli).unwrap();
    assert_eq!(r.seed, 7);
    match r.command {
        cli::Command::Simulate(a) => {
            assert_eq!(a.rp, Some(0.2));
            assert_eq!(a.marginals.as_deref(), Some("normal"));
        }
        other => panic!("{other:?}"),
    }
    assert!(Cli::try_parse_from(["corrkit", "simulate", "--no-such-flag"]).is_err());
}

#[test]
fn unknown_config_key_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 1\n[simulate]\nrp = 0.2\nreplicates = 10\n").unwrap();
    let o = corrkit(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("replicates"), "{}", stderr(&o));

    std::fs::write(&cfg, "sed = 1\n").unwrap();
    let o = corrkit(&["convert", "--rp", "0.1", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sed"));
}

#[test]
fn flags_override_file_values_and_echo_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 3\n[simulate]\nrp = 0.5\nreplications = 50\nsizes = [10, 20]\n").unwrap();
    let out = dir.path().join("a");
    let o = corrkit(&["simulate", "--config", cfg.to_str().unwrap(), "--rp", "0.1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let echo = std::fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(echo.contains("rp = 0.1"), "{echo}");
    assert!(echo.contains("replications = 50"));
    assert!(echo.contains("seed = 3"));

    // the echoed file reproduces the run exactly
    let again = dir.path().join("b");
    let o = corrkit(&["simulate", "--config", out.join("config.toml").to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["config.toml", "simulation.csv", "ratios.csv", "summary.json"] {
        assert_eq!(std::fs::read(out.join(f)).unwrap(), std::fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn fig2_desk_ratios_match_the_normal_band() {
    let dir = tempfile::tempdir().unwrap();
    let o = corrkit(&["simulate", "--preset", "fig2-desk", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines = data_lines(&dir.path().join("ratios.csv"));
    assert_eq!(lines[0], "condition,kind,n,sd_ratio_vs_pearson,rmse_ratio_vs_pearson");
    let ratios: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(ratios.len(), 25);
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!((1.0..=1.02).contains(&mean), "{mean} {ratios:?}");
    assert!(ratios.iter().all(|r| (0.98..=1.04).contains(r)), "{ratios:?}");
}

#[test]
fn outputs_are_identical_across_reruns_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = corrkit(&[
            "density", "--rp", "0.2", "--n", "5", "--histogram-draws", "20000", "--seed", "9",
            "--threads", threads, "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let (a, b, c) = (run("a", "1"), run("b", "1"), run("c", "3"));
    for f in ["config.toml", "density_rp0.2_n5.csv", "histogram_rp0.2_n5.csv", "summary.json"] {
        let x = std::fs::read(a.join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.join(f)).unwrap(), "{f}");
        assert_eq!(x, std::fs::read(c.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn every_artifact_carries_the_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let o = corrkit(&["influence", "--preset", "fig5", "--step", "0.5", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let echo = std::fs::read_to_string(dir.path().join("config.toml")).unwrap();
    let header = echo.lines().next().unwrap().to_owned();
    let hash = header.split("config-sha256=").nth(1).unwrap().to_owned();
    assert_eq!(hash.len(), 16);
    let mut seen = 0;
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        if path.extension().is_some_and(|e| e == "json") {
            let v: serde_json::Value = serde_json::from_str(&text).unwrap();
            assert_eq!(v["config_hash"], hash.as_str());
        } else {
            assert_eq!(text.lines().next().unwrap(), header, "{}", path.display());
        }
        seen += 1;
    }
    assert_eq!(seen, 4);
}

fn keys<T: Serialize + Default>() -> Vec<String> {
    match serde_json::to_value(T::default()).unwrap() {
        serde_json::Value::Object(m) => m.keys().cloned().collect(),
        other => panic!("{other:?}"),
    }
}

#[test]
fn help_lists_every_config_key() {
    let schema: Vec<(&str, Vec<String>)> = vec![
        ("simulate", keys::<SimulateArgs>()),
        ("density", keys::<DensityArgs>()),
        ("moments", keys::<MomentsArgs>()),
        ("influence", keys::<InfluenceArgs>()),
        ("resample", keys::<ResampleArgs>()),
        ("eigen", keys::<EigenArgs>()),
        ("convert", keys::<ConvertArgs>()),
    ];
    let global = keys::<GlobalArgs>();
    for (sub, fields) in schema {
        let o = corrkit(&[sub, "--help"]);
        assert!(o.status.success());
        let help = stdout(&o);
        assert!(!fields.is_empty());
        for key in fields.iter().chain(&global).chain(std::iter::once(&"config".to_owned())) {
            let flag = format!("--{}", key.replace('_', "-"));
            assert!(help.contains(&flag), "`{sub} --help` lacks {flag}");
        }
    }
}

#[test]
fn exit_codes_follow_the_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let out = out.to_str().unwrap();

    assert_eq!(corrkit(&["simulate", "--out", out]).status.code(), Some(2));
    assert_eq!(corrkit(&["convert", "--rp", "0.2", "--rs", "0.2"]).status.code(), Some(2));
    assert_eq!(corrkit(&["frobnicate"]).status.code(), Some(2));

    let missing = dir.path().join("missing.csv");
    let o = corrkit(&["resample", "--input", missing.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(3));

    let constant = dir.path().join("constant.csv");
    std::fs::write(&constant, "a,b\n1,5\n2,5\n3,5\n").unwrap();
    let o = corrkit(&["moments", "--input", constant.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("`b`"));

    let o = corrkit(&[
        "simulate", "--rp", "-0.9", "--marginals", "exponential", "--calibration-n", "20000", "--out", out,
    ]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));

    assert_eq!(cli::CliError::Core(corrkit::Error::Numeric("x".into())).exit_code(), 4);
    // failed runs leave nothing behind
    assert!(!Path::new(out).exists());
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_corrkit"))
        .args(["density", "--rp", "0", "--n", "10", "--points", "11"])
        .env(cli::OUT_DIR_ENV, dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("density_rp0_n10.csv").exists());
    let names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names.len(), 3, "{names:?}");
}

#[test]
fn resample_writes_ten_summary_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = corrkit(&[
        "resample", "--synthetic", "asvab-like", "--rows", "2000", "--samples", "50", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines = data_lines(&dir.path().join("summary.csv"));
    assert_eq!(lines.len(), 11);
    assert_eq!(data_lines(&dir.path().join("pairs.csv")).len(), 1 + 45);

    let o = corrkit(&[
        "eigen", "--synthetic", "dbq-scales", "--rows", "2000", "--samples", "50", "--out",
        dir.path().join("e").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines = data_lines(&dir.path().join("e").join("eigen.csv"));
    assert_eq!(lines[0], "index,mean_rp,sd_rp,mean_rs,sd_rs,population_rp,population_rs");
    assert_eq!(lines.len(), 1 + 5);
}
