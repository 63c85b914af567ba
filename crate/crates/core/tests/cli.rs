use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;
use txcost_core::analytics::black_scholes_call;
use txcost_core::postproc::CSV_HEADER;

const MARKET: &str = r#"
[market]
strike = 100.0
rate = 0.05
sigma = 0.2
maturity = 1.0
rehedge_dt = 0.25

[grid]
s_max = 400.0
n_space = 100
boundary = "discounted_intrinsic"
"#;

struct Run {
    code: Option<i32>,
    stdout: String,
    stderr: String,
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

fn txcost(args: &[&str], config: &Path, out: Option<&Path>) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_txcost"));
    cmd.args(args).arg("--config").arg(config);
    if let Some(out) = out {
        cmd.arg("--out").arg(out);
    }
    let o = cmd.output().unwrap();
    Run {
        code: o.status.code(),
        stdout: String::from_utf8(o.stdout).unwrap(),
        stderr: String::from_utf8(o.stderr).unwrap(),
    }
}

fn structure(name: &str, body: &str) -> String {
    format!("\n[[structures]]\nname = \"{name}\"\n{body}\n")
}

#[test]
fn price_is_deterministic_and_well_formed() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!(
            "{MARKET}{}{}",
            structure("flat", "type = \"constant\"\nk = 0.03"),
            structure(
                "steps",
                "type = \"piecewise_constant\"\nbreakpoints = [30.0]\nrates = [0.03, 0.01]"
            )
        ),
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(txcost(&["price"], &cfg, Some(&a)).code, Some(0));
    assert_eq!(txcost(&["price"], &cfg, Some(&b)).code, Some(0));
    for name in ["flat.csv", "steps.csv"] {
        let first = std::fs::read(a.join(name)).unwrap();
        assert_eq!(
            first,
            std::fs::read(b.join(name)).unwrap(),
            "{name} differs between runs"
        );

        let text = String::from_utf8(first).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        let mut rows = 0;
        let mut last_spot = f64::NEG_INFINITY;
        for line in lines {
            let cells: Vec<&str> = line.split(',').collect();
            assert_eq!(cells.len(), 6, "{line}");
            for c in &cells {
                let digits = c.trim_start_matches('-').split('e').next().unwrap().replace('.', "");
                assert!(digits.trim_start_matches('0').len() <= 12, "{c}");
            }
            let v: Vec<f64> = cells.iter().map(|c| c.parse().unwrap()).collect();
            assert!(v[0] > last_spot);
            last_spot = v[0];
            // Printed difference equals printed baseline − printed costed to the last digit.
            let scale = v[1].abs().max(v[2].abs());
            let quantum = if scale > 0.0 {
                10f64.powf(scale.log10().floor() - 11.0)
            } else {
                0.0
            };
            assert!((v[2] - v[1] - v[3]).abs() <= 0.5 * quantum + 1e-15 * scale, "{line}");
            rows += 1;
        }
        assert_eq!(rows, 99);
    }
    let stdout = txcost(&["price"], &cfg, Some(&a)).stdout;
    assert!(stdout.contains("flat: min_price="));
    assert!(stdout.contains("violations=0"));
    assert!(stdout.contains("peak_difference="));
}

#[test]
fn zero_cost_structure_reproduces_the_baseline_column() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!("{MARKET}{}", structure("free", "type = \"constant\"\nk = 0.0")),
    );
    assert_eq!(txcost(&["price"], &cfg, Some(dir.path())).code, Some(0));
    let text = std::fs::read_to_string(dir.path().join("free.csv")).unwrap();
    for line in text.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[1], cells[2]);
        assert_eq!(cells[3], "0");
    }
}

#[test]
fn output_path_from_config_and_baseline_only_run() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("from_config");
    let body = format!("output_path = {:?}\n{MARKET}", out.to_str().unwrap());
    let cfg = write_config(dir.path(), &body);
    assert_eq!(txcost(&["price"], &cfg, None).code, Some(0));
    let text = std::fs::read_to_string(out.join("baseline.csv")).unwrap();
    assert!(text.starts_with(CSV_HEADER));
}

#[test]
fn config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.toml");
    let r = txcost(&["price"], &missing, Some(dir.path()));
    assert_eq!(r.code, Some(2));
    assert!(r.stderr.contains("cannot read"));

    let bad = write_config(dir.path(), "[market]\nstrike = \"x\"\n");
    assert_eq!(txcost(&["price"], &bad, Some(dir.path())).code, Some(2));
    assert_eq!(txcost(&["table"], &bad, None).code, Some(2));
    assert_eq!(txcost(&["validate"], &bad, None).code, Some(2));

    let off_grid = write_config(
        dir.path(),
        &format!("evaluation_time = 0.123456789\n{MARKET}\n").replace(
            "boundary = \"discounted_intrinsic\"",
            "boundary = \"discounted_intrinsic\"\nn_time = 1000",
        ),
    );
    assert_eq!(txcost(&["price"], &off_grid, Some(dir.path())).code, Some(2));

    let no_args = Command::new(env!("CARGO_BIN_EXE_txcost"))
        .arg("price")
        .output()
        .unwrap();
    assert_eq!(no_args.status.code(), Some(2));
}

#[test]
fn stability_refusal_exits_3_and_names_required_steps() {
    let dir = TempDir::new().unwrap();
    let body = format!("{MARKET}{}", structure("flat", "type = \"constant\"\nk = 0.03")).replace(
        "boundary = \"discounted_intrinsic\"",
        "boundary = \"discounted_intrinsic\"\nn_time = 10",
    );
    let cfg = write_config(dir.path(), &body);
    let r = txcost(&["price"], &cfg, Some(dir.path()));
    assert_eq!(r.code, Some(3));
    assert!(r.stderr.contains("at least"), "{}", r.stderr);
    assert!(!dir.path().join("flat.csv").exists());
}

#[test]
fn ill_posed_run_exits_4_with_output() {
    let dir = TempDir::new().unwrap();
    let body = format!("{MARKET}{}", structure("heavy", "type = \"constant\"\nk = 0.02"))
        .replace("rehedge_dt = 0.25", "rehedge_dt = 0.019230769230769232");
    let cfg = write_config(dir.path(), &body);
    let r = txcost(&["price"], &cfg, Some(dir.path()));
    assert_eq!(r.code, Some(4), "{}{}", r.stdout, r.stderr);
    assert!(dir.path().join("heavy.csv").exists());
    assert!(!r.stdout.contains("violations=0"));

    let v = txcost(&["validate"], &cfg, None);
    assert_eq!(v.code, Some(4));
    assert!(v.stdout.contains("heavy: ill-posed for Gamma>0"), "{}", v.stdout);
    assert!(v.stdout.contains("closed form: k = 0.02 >= 0.01738"));
}

#[test]
fn unwritable_output_exits_5() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), MARKET);
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let r = txcost(&["price"], &cfg, Some(&blocker.join("sub")));
    assert_eq!(r.code, Some(5));
}

#[test]
fn validate_reports_zero_cost_and_agrees_with_solver_monitor() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), MARKET);
    let r = txcost(&["validate"], &cfg, None);
    assert_eq!(r.code, Some(0));
    assert!(r.stdout.contains("baseline: well-posed everywhere, LHS = 0.5"));

    // e^{-a} small: the cost is negligible next to the limit.
    let cfg = write_config(
        dir.path(),
        &format!(
            "{MARKET}{}",
            structure("cheap", "type = \"exponential_decreasing\"\na = 6.0")
        ),
    );
    let v = txcost(&["validate"], &cfg, None);
    assert_eq!(v.code, Some(0));
    assert!(v.stdout.contains("cheap: well-posed on scanned range"));
    let p = txcost(&["price"], &cfg, Some(dir.path()));
    assert_eq!(p.code, Some(0));
    assert!(p.stdout.contains("cheap: ") && p.stdout.contains("violations=0"));
}

#[test]
fn table_single_baseline_row_matches_closed_form() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &MARKET.replace("n_space = 100", "n_space = 400"));
    let r = txcost(&["table", "--csv"], &cfg, None);
    assert_eq!(r.code, Some(0));
    let lines: Vec<&str> = r.stdout.lines().collect();
    assert_eq!(lines[0], "structure,atm_price,atm_baseline,atm_difference");
    assert_eq!(lines.len(), 2);
    let cells: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(cells[0], "baseline");
    let atm: f64 = cells[1].parse().unwrap();
    let exact = black_scholes_call(100.0, 100.0, 0.05, 0.2, 1.0);
    assert!((atm - exact).abs() < 0.1, "{atm} vs {exact}");
}

#[test]
fn table_sorts_by_atm_difference() {
    let dir = TempDir::new().unwrap();
    let body = format!(
        "{MARKET}{}{}{}",
        structure("low", "type = \"constant\"\nk = 0.01"),
        structure("high", "type = \"constant\"\nk = 0.05"),
        structure("mid", "type = \"constant\"\nk = 0.03")
    );
    let cfg = write_config(dir.path(), &body);
    let r = txcost(&["table"], &cfg, None);
    assert_eq!(r.code, Some(0));
    let names: Vec<&str> = r
        .stdout
        .lines()
        .skip(1)
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    assert_eq!(names, ["high", "mid", "low"]);
}
