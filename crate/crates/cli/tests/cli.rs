use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use concate_core::manski::{manski_region, trimmed_support};
use concate_core::{assign_treatment, group_stats, load_csv, Schema};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_concate"))
}

fn tipping_csv() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/tipping55.csv")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn bounds_hybrid_multiplier() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.json");
    let input = tipping_csv();
    let text = ok(&[
        "bounds", "-i", input.to_str().unwrap(), "--tau", "50", "--method", "hybrid", "--alpha", "0.05", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(text.contains("multiplier   2.2414"), "{text}");
    let j = read_json(&out);
    let m = j["band"]["multiplier"].as_f64().unwrap();
    assert!((m - 2.241_402_727_604_947).abs() < 1e-9);
    for key in ["version", "seed", "config_hash", "rng"] {
        assert!(j["metadata"].get(key).is_some(), "{key}");
    }
    assert_eq!(j["metadata"]["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn bounds_manski_q05_uses_trimmed_support() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.json");
    let input = tipping_csv();
    ok(&[
        "bounds", "-i", input.to_str().unwrap(), "--tau", "40", "--method", "manski-q05", "--out",
        out.to_str().unwrap(),
    ]);
    let j = read_json(&out);
    let panel = load_csv(&input, &Schema::default()).unwrap();
    let s = group_stats(&panel, &assign_treatment(&panel, 40.0).unwrap()).unwrap();
    let r = manski_region(&s, &trimmed_support(&s, 0.05).unwrap()).unwrap();
    assert_eq!(j["band"]["region"]["lower"].as_f64().unwrap(), r.lower);
    assert_eq!(j["band"]["region"]["upper"].as_f64().unwrap(), r.upper);
    assert_eq!(j["band"]["support"]["source"]["quantile"], 0.05);
}

#[test]
fn lower_truncation_uses_budget_four() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.json");
    let input = tipping_csv();
    ok(&[
        "bounds", "-i", input.to_str().unwrap(), "--tau", "50", "--method", "hybrid", "--truncation-lower", "-5",
        "--out", out.to_str().unwrap(),
    ]);
    let j = read_json(&out);
    let a: f64 = 0.05;
    for (arm, n) in [("control", "n0"), ("treated", "n1")] {
        let nk = j["band"][n].as_f64().unwrap();
        let eps = j["eps"][arm].as_f64().unwrap();
        assert!((eps - (2.0 * (4.0 / a).ln() / nk).sqrt()).abs() < 1e-12);
        assert_eq!(j["band"]["support"][arm]["lower"].as_f64().unwrap(), -5.0);
    }
}

#[test]
fn exit_codes() {
    let input = tipping_csv();
    let i = input.to_str().unwrap();
    assert_eq!(run(&["bounds", "-i", i, "--tau", "99.9"]).status.code(), Some(4));
    assert_eq!(run(&["bounds", "-i", i, "--tau", "50", "--alpha", "1.5"]).status.code(), Some(2));
    assert_eq!(run(&["bounds", "-i", i, "--tau", "50", "--method", "bogus"]).status.code(), Some(2));
    assert_eq!(run(&["bounds", "-i", "/no/such/file.csv", "--tau", "50"]).status.code(), Some(3));
    assert_eq!(run(&["scan", "-i", i, "--grid", "5:95:0"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "unit_id,time,outcome\na,1,2\n").unwrap();
    assert_eq!(run(&["bounds", "-i", bad.to_str().unwrap(), "--tau", "50"]).status.code(), Some(3));
}

#[test]
fn empty_scan_reports_na() {
    let input = tipping_csv();
    let out = run(&["scan", "-i", input.to_str().unwrap(), "--min-group", "500"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("N/A"));
}

#[test]
fn scan_artifacts_and_chart() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, svg, json) = (dir.path().join("s.csv"), dir.path().join("s.svg"), dir.path().join("s.json"));
    let input = tipping_csv();
    ok(&[
        "scan", "-i", input.to_str().unwrap(), "--grid", "5:95:5", "--out", csv.to_str().unwrap(), "--svg",
        svg.to_str().unwrap(), "--json", json.to_str().unwrap(),
    ]);
    let mut rdr = csv::Reader::from_path(&csv).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        ["tau", "N0", "N1", "alpha_u", "lower", "upper", "band_lower", "band_upper", "excludes_zero", "skipped"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 19);
    for r in &rows {
        let n1: usize = r[2].parse().unwrap();
        assert_eq!(n1 < 10, !r[9].is_empty(), "tau {}", &r[0]);
    }
    let j = read_json(&json);
    assert_eq!(j["looks"], 19);
    assert_eq!(j["tipping_tau"], 55.0);
    assert_eq!(j["direction"], "positive");

    let text = std::fs::read_to_string(&svg).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    let pts = |id: &str| -> Vec<(f64, f64)> {
        let node = doc.descendants().find(|n| n.attribute("id") == Some(id)).unwrap();
        node.attribute("points")
            .unwrap()
            .split(' ')
            .map(|p| {
                let (x, y) = p.split_once(',').unwrap();
                (x.parse().unwrap(), y.parse().unwrap())
            })
            .collect()
    };
    let env = pts("envelope");
    let mid = pts("midpoint");
    let k = mid.len();
    assert_eq!(env.len(), 2 * k);
    for (i, &(x, y)) in mid.iter().enumerate() {
        let (ux, uy) = env[i];
        let (lx, ly) = env[2 * k - 1 - i];
        assert_eq!((ux, lx), (x, x));
        assert!(uy <= y && y <= ly, "midpoint outside envelope at x={x}");
    }
}

#[test]
fn describe_summary_and_rolling() {
    let dir = tempfile::tempdir().unwrap();
    let (out, roll) = (dir.path().join("d.csv"), dir.path().join("r.csv"));
    let input = tipping_csv();
    let text = ok(&[
        "describe", "-i", input.to_str().unwrap(), "--out", out.to_str().unwrap(), "--rolling",
        roll.to_str().unwrap(),
    ]);
    assert!(text.contains("over 4 periods"), "{text}");
    let d = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = d.lines().collect();
    assert_eq!(lines[0], "variable,n,min,mean,median,max,sd,skewness,kurtosis");
    assert!(lines[1].starts_with("outcome,800,") && lines[2].starts_with("signal,800,"));
    // 8 periods, window 4: windows end at periods 3..=7.
    assert_eq!(std::fs::read_to_string(&roll).unwrap().lines().count(), 1 + 5);

    let empty = dir.path().join("e.csv");
    std::fs::write(&empty, "unit_id,time,outcome,signal\n").unwrap();
    assert_ne!(run(&["describe", "-i", empty.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("b.json");
    std::fs::write(&cfg, "method = \"manski-max\"\nalpha = 0.1\n").unwrap();
    let input = tipping_csv();
    ok(&[
        "bounds", "--config", cfg.to_str().unwrap(), "-i", input.to_str().unwrap(), "--tau", "50", "--method",
        "hybrid", "--out", out.to_str().unwrap(),
    ]);
    let j = read_json(&out);
    assert_eq!(j["band"]["method"], "manski-max");
    assert_eq!(j["band"]["alpha_u"], 0.1);

    std::fs::write(&cfg, "metod = \"hybrid\"\n").unwrap();
    let r = run(&["bounds", "--config", cfg.to_str().unwrap(), "-i", input.to_str().unwrap(), "--tau", "50"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("metod"));
}

#[test]
fn simulate_table_columns_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for p in [&a, &b] {
        ok(&[
            "simulate", "--dgp", "A,G", "--T", "1,2", "--reps", "200", "--seed", "5", "--out",
            p.to_str().unwrap(),
        ]);
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "dgp,N,method,coverage_pct,B,seed,redraws");
    assert_eq!(lines.len(), 1 + 2 * 2 * 2);
    assert!(lines[1].starts_with("A,50,manski,") && lines[1].contains(",200,5,"));
    assert!(lines.iter().filter(|l| l.starts_with("G,")).all(|l| l.contains(",100.00,")));
}
