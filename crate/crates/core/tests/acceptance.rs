//! Acceptance suite: one pass/fail line per criterion at the required
//! tolerances.

use std::process::Command;

use qsfock::suites::{self, Check, RandomSuite, SuiteReport};
use qsfock::C;

const SEED: u64 = 20240601;

fn line(id: usize, title: &str, report: &SuiteReport) -> bool {
    let ok = report.passed();
    println!("[{}] criterion {id:>2}: {title}", if ok { "PASS" } else { "FAIL" });
    for c in &report.checks {
        println!(
            "        {:<44} lhs={:<12.6e} rhs={:<12.6e} residual={:.3e} tol={:.1e} {:?}",
            c.name, c.lhs, c.rhs, c.residual, c.tolerance, c.status
        );
    }
    ok
}

fn criterion_1() -> SuiteReport {
    suites::splitter_isometry(&RandomSuite::new(SEED, 200, 1e-12)).unwrap()
}

fn criterion_2() -> SuiteReport {
    suites::principal_formula(&RandomSuite::new(SEED + 1, 100, 1e-12)).unwrap()
}

fn criterion_3() -> SuiteReport {
    suites::unit_norms(&RandomSuite::new(SEED + 2, 40, 1e-9)).unwrap()
}

fn criterion_4() -> SuiteReport {
    suites::integral_estimate(&RandomSuite::new(SEED + 3, 100, 1e-9), None).unwrap()
}

fn criterion_5() -> SuiteReport {
    suites::adjoint_identity(&RandomSuite::new(SEED + 4, 100, 1e-11)).unwrap()
}

fn criterion_6() -> SuiteReport {
    suites::differential(&RandomSuite::new(SEED + 5, 100, 1e-11)).unwrap()
}

fn criterion_7() -> SuiteReport {
    suites::oracle_equivalence(&RandomSuite::new(SEED + 6, 100, 1e-13)).unwrap()
}

fn criterion_8() -> SuiteReport {
    suites::point_commutators(SEED + 7, 1e-13).unwrap()
}

fn criterion_9() -> SuiteReport {
    suites::refinement(SEED + 8, 4, 1e-12, C::new(1.0, 0.0)).unwrap()
}

fn criterion_10() -> SuiteReport {
    suites::wiener_moments(4, 4, 1e-13).unwrap()
}

fn run_cli(dir: &std::path::Path, out: &str, args: &[&str]) -> (i32, String) {
    let out_path = dir.join(out);
    let status = Command::new(env!("CARGO_BIN_EXE_qsfock"))
        .args(args)
        .arg("--out")
        .arg(&out_path)
        .output()
        .expect("binary runs");
    let text = std::fs::read_to_string(&out_path).unwrap_or_default();
    (status.status.code().unwrap_or(-1), text)
}

fn without_clock(report: &str) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(report).expect("report is JSON");
    v.as_object_mut().unwrap().remove("wall_clock_seconds");
    v
}

fn criterion_11() -> SuiteReport {
    let dir = tempfile::tempdir().unwrap();
    let mut r = SuiteReport::default();
    let args = ["check", "splitter", "--seed", "7"];
    let (c1, a) = run_cli(dir.path(), "a.json", &args);
    let (c2, b) = run_cli(dir.path(), "b.json", &args);
    let same = !a.is_empty() && without_clock(&a) == without_clock(&b);
    r.checks.push(Check::within("identical-reports", c1 as f64, c2 as f64, if same { 0.0 } else { 1.0 }, 0.0));
    r.checks.push(Check::within("exit-ok", c1 as f64, 0.0, c1 as f64, 0.0));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[lattice]\ntimes = [1.0, 1.0]\nweights = [1.0, 1.0]\n").unwrap();
    let (c, _) = run_cli(dir.path(), "bad.json", &["check", "splitter", "--config", bad.to_str().unwrap()]);
    r.checks.push(Check::within("exit-config-error", c as f64, 2.0, (c - 2).abs() as f64, 0.0));

    let violated = dir.path().join("violated.toml");
    std::fs::write(
        &violated,
        "[lattice]\ntimes = [1.0, 2.0]\nweights = [0.5, 0.7]\n\n[weights]\nq = \"constant:1.0\"\nr = \"constant:1.0\"\ns = \"constant:1.0\"\np = \"constant:2.0\"\n",
    )
    .unwrap();
    let (c, text) = run_cli(dir.path(), "violated.json", &["check", "bound", "--config", violated.to_str().unwrap()]);
    let na = text.contains("not-applicable");
    r.checks.push(Check::within("exit-not-applicable", c as f64, 0.0, c as f64 + if na { 0.0 } else { 1.0 }, 0.0));

    let (c, text) = run_cli(dir.path(), "fail.json", &["refine", "--levels", "1"]);
    let written = !text.is_empty();
    r.checks.push(Check::within("exit-check-failed", c as f64, 1.0, (c - 1).abs() as f64 + if written { 0.0 } else { 1.0 }, 0.0));
    r
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> SuiteReport); 11] = [
        ("splitter isometry", criterion_1),
        ("principal formula", criterion_2),
        ("unit norms of the splitter and its adjoint", criterion_3),
        ("integral estimate", criterion_4),
        ("adjoint identity", criterion_5),
        ("differential decomposition", criterion_6),
        ("oracle equivalence", criterion_7),
        ("commutation relations", criterion_8),
        ("commutator refinement", criterion_9),
        ("Wiener moments", criterion_10),
        ("CLI determinism and exit codes", criterion_11),
    ];
    let mut failed = Vec::new();
    for (i, (title, run)) in criteria.iter().enumerate() {
        if !line(i + 1, title, &run()) {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
