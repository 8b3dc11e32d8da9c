//! End-to-end runs of the verification engine through the public library
//! surface: full-suite happy path, skip and cap handling, report emission,
//! cache transparency, determinism, and the shipped twisted preset whose
//! split class the reports must describe honestly.

use lusztig_cli::cache::Cache;
use lusztig_cli::report::{Status, VerificationReport};
use lusztig_cli::scenario::{load_config, presets, Scenario};
use lusztig_cli::suites::{run_scenario, RunOptions};

fn scenario(toml: &str) -> Scenario {
    let mut list = load_config(toml).expect("test scenario parses");
    assert_eq!(list.len(), 1);
    list.remove(0)
}

fn preset(id: &str) -> Scenario {
    presets()
        .into_iter()
        .find(|sc| sc.id == id)
        .unwrap_or_else(|| panic!("preset {id} exists"))
}

fn run(sc: &Scenario) -> VerificationReport {
    run_scenario(sc, &RunOptions::default()).expect("scenario runs")
}

#[test]
fn gl2_diagonal_scenario_passes_every_suite() {
    let sc = scenario(
        r#"
[scenario.gl2-all]
group = "GL"
n = 2
template = "diag:1,2"
primes = [3, 5, 7, 11, 13]
suites = ["lemma33", "kawanaka34", "lemma41", "dims21", "theorem42", "hecke-props"]
fit_geometric = true
"#,
    );
    let report = run(&sc);
    assert_eq!(report.exit_code(), 0, "{}", report.to_text());
    assert!(!report.rows.iter().any(|r| r.status == Status::Fail));
    assert!(!report.rows.iter().any(|r| r.status == Status::SkippedFatal));
    for suite in [
        "lemma33",
        "kawanaka34",
        "lemma41",
        "dims21",
        "theorem42",
        "hecke-props",
    ] {
        assert!(
            report
                .rows
                .iter()
                .any(|r| r.suite == suite && r.status == Status::Pass),
            "no passing row for suite {suite}"
        );
    }
}

#[test]
fn colliding_prime_is_skipped_and_the_rest_run() {
    let sc = scenario(
        r#"
[scenario.gl2-collide]
group = "GL"
n = 2
template = "diag:1,2"
primes = [2, 3, 5, 7]
suites = ["lemma41", "dims21"]
"#,
    );
    let report = run(&sc);
    assert_eq!(report.exit_code(), 0, "{}", report.to_text());
    let skip = report
        .rows
        .iter()
        .find(|r| r.status == Status::SkippedBenign && r.check.contains("p=2"))
        .expect("prime 2 is skipped");
    assert!(
        skip.witness.values().any(|v| v.contains("mod 2")),
        "skip reason names the collision: {:?}",
        skip.witness
    );
    assert!(report
        .rows
        .iter()
        .any(|r| r.status == Status::Pass && r.check.contains("p=3")));
}

#[test]
fn reports_round_trip_and_emit_csv_and_text() {
    let sc = scenario(
        r#"
[scenario.a2-sym]
coxeter = "A2"
suites = ["hecke-props"]
"#,
    );
    let report = run(&sc);
    let parsed = VerificationReport::from_json(&report.to_json()).unwrap();
    assert_eq!(parsed, report);

    let csv = report.to_csv();
    assert_eq!(csv.lines().count(), report.rows.len() + 1);
    assert!(csv.lines().next().unwrap().starts_with("scenario,"));

    let text = report.to_text();
    assert!(text.contains("hecke-associativity"));
    assert!(text.contains(&format!("{} rows", report.rows.len())));
}

#[test]
fn cache_rebuilds_identical_reports() {
    let sc = scenario(
        r#"
[scenario.gl2-cache]
group = "GL"
n = 2
template = "jordan:1"
primes = [2, 3, 5, 7, 11]
suites = ["lemma41", "dims21", "theorem42"]
fit_geometric = true
"#,
    );
    let plain = run_scenario(&sc, &RunOptions::default()).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let cold = RunOptions {
        cache: Some(Cache::open(dir.path()).unwrap()),
        ..RunOptions::default()
    };
    let first = run_scenario(&sc, &cold).unwrap();
    let entries = std::fs::read_dir(dir.path()).unwrap().count();
    assert!(entries > 0, "cache directory was populated");

    let warm = RunOptions {
        cache: Some(Cache::open(dir.path()).unwrap()),
        ..RunOptions::default()
    };
    let second = run_scenario(&sc, &warm).unwrap();

    assert_eq!(plain.canonical(), first.canonical());
    assert_eq!(first.canonical(), second.canonical());
}

#[test]
fn repeated_runs_are_bit_identical() {
    let sc = preset("gl2-nonsplit");
    let a = run(&sc);
    let b = run(&sc);
    assert_eq!(a.canonical().to_json(), b.canonical().to_json());
}

#[test]
fn sweep_cap_in_config_turns_into_fatal_skips() {
    // 100 admits every sweep at p = 2 but not the 125 lower unitriangular
    // matrices at p = 5, so the p = 5 rows must skip fatally while the
    // p = 2 rows still run.
    let sc = scenario(
        r#"
[scenario.gl3-capped]
group = "GL"
n = 3
template = "jordan:1"
primes = [2, 5]
suites = ["kawanaka34"]
sweep_cap = 100
"#,
    );
    let report = run(&sc);
    assert_eq!(report.exit_code(), 1, "{}", report.to_text());
    let fatal: Vec<_> = report
        .rows
        .iter()
        .filter(|r| r.status == Status::SkippedFatal)
        .collect();
    assert!(!fatal.is_empty());
    assert!(fatal.iter().all(|r| r
        .witness
        .get("error")
        .is_some_and(|e| e.contains("cap of 100"))));
    assert!(report.rows.iter().any(|r| r.status == Status::Pass));
    assert!(!report.rows.iter().any(|r| r.status == Status::Fail));
}

#[test]
fn negative_control_reports_without_asserting() {
    let report = run(&preset("gl2-identity-control"));
    assert_eq!(report.exit_code(), 0, "{}", report.to_text());
    assert!(!report.rows.iter().any(|r| r.status == Status::Fail));
    assert!(report.rows.iter().any(|r| r.status == Status::Observed));
    // The orbit count identity carries no regularity hypothesis, so it is
    // asserted even here.
    assert!(report
        .rows
        .iter()
        .any(|r| r.anchor == "orbit-count-identity" && r.status == Status::Pass));
}

/// The flip-twisted SL3 preset exercises a regular class that splits into
/// two rational orbits whose prime-field flag counts are not individually
/// monic away from the twist-fixed Weyl elements. The report must show that
/// outcome exactly as measured: monic at the twist-fixed longest element,
/// leading coefficient two elsewhere, with every exact identity still
/// passing.
#[test]
fn flip_twisted_preset_reports_the_orbit_split_honestly() {
    let report = run(&preset("sl3-flip"));
    assert_eq!(report.exit_code(), 1);

    let failures: Vec<_> = report
        .rows
        .iter()
        .filter(|r| r.status == Status::Fail)
        .collect();
    assert_eq!(failures.len(), 4, "{}", report.to_text());
    for row in &failures {
        assert_eq!(row.anchor, "slice-leading-term");
        assert_eq!(row.witness["twist_fixes_w"], "false");
        let fit = row.witness["fit"].as_str();
        assert!(fit == "2*t" || fit == "2*t^2 - t", "fit was {fit}");
    }

    let longest = report
        .rows
        .iter()
        .find(|r| r.anchor == "slice-leading-term" && r.check == "w=1,2,1")
        .expect("longest element row");
    assert_eq!(longest.status, Status::Pass);
    assert_eq!(longest.witness["twist_fixes_w"], "true");
    assert_eq!(longest.witness["fit"], "t^3 - 2*t^2");

    // Every exact identity in the same report still holds.
    for anchor in [
        "unipotent-bridge",
        "unipotent-partition",
        "orbit-count-identity",
        "orbit-stabilizer",
        "orbit-cell-partition",
        "flag-partition",
    ] {
        let rows: Vec<_> = report.rows.iter().filter(|r| r.anchor == anchor).collect();
        assert!(!rows.is_empty(), "no rows for {anchor}");
        assert!(
            rows.iter().all(|r| r.status == Status::Pass),
            "non-passing {anchor} row"
        );
    }
}
