//! Config text to report on disk, through the public API only.

use proptest::prelude::*;
use rdspread_core::config::parse_config;
use rdspread_core::experiments::{aggregate, execute, ExperimentReport};
use rdspread_core::reaction::ReactionTerm;
use rdspread_core::solver::{read_snapshot, run, write_snapshot, Grid, RunConfig};
use rdspread_core::geometry::SupportSpec;

const LINE: &str = r#"
scenario = "short_line"
support = "half_space"
reaction = "kpp_logistic"
grid = { mode = "line", range = [-20.0, 140.0], h = 0.2 }
time = { t_final = 50.0, snapshots = 12 }
boundary = { sentinel = ["top"] }

[[diagnostics]]
kind = "speed"
angles = [0.0]
"#;

#[test]
fn config_to_report_and_back() {
    // a bare "half_space" is the plane normal to e_N, so give the line form
    let text = LINE.replace("support = \"half_space\"", "support = { kind = \"half_space\", dim = 1, normal = [0.0, 1.0] }");
    let cfg = parse_config(&text).unwrap();
    let (report, snaps) = execute(&cfg).unwrap();
    assert!(report.passed(), "{}", report.summary());
    assert_eq!(snaps.len(), 12);

    let dir = tempfile::tempdir().unwrap();
    report.write_to(dir.path()).unwrap();
    let back = ExperimentReport::read_from(&dir.path().join("short_line/report.json")).unwrap();
    assert_eq!(back.criteria, report.criteria);
    assert_eq!(back.config_hash, cfg.hash());
    let csv = std::fs::read_to_string(dir.path().join("short_line/speed.csv")).unwrap();
    assert!(csv.starts_with(&format!("# config_hash={}", cfg.hash())));
    assert_eq!(aggregate(&[back]).unwrap().len(), 1);

    let last = &snaps.last().unwrap().field;
    let path = dir.path().join("last.rdf");
    write_snapshot(&path, last).unwrap();
    let read = read_snapshot(&path).unwrap();
    assert_eq!(read.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), last.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
}

#[test]
fn toml_round_trip_keeps_the_hash() {
    let text = LINE.replace("support = \"half_space\"", "support = { kind = \"half_space\", dim = 1, normal = [0.0, 1.0] }");
    let cfg = parse_config(&text).unwrap();
    let again = parse_config(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(again, cfg);
    assert_eq!(again.hash(), cfg.hash());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    // the solution of a KPP problem stays in [0, 1] and is monotone in the
    // support radius
    #[test]
    fn bounded_and_ordered_in_the_radius(r in 1.0f64..4.0, extra in 0.25f64..2.0) {
        let g = Grid::plane([-8.0, 8.0], [-8.0, 8.0], 0.5).unwrap();
        let mk = |rad: f64| RunConfig::new(SupportSpec::ball(2, [0.0, 0.0], rad).unwrap(), ReactionTerm::logistic(), g, 2.0)
            .with_even_snapshots(2);
        let (small, _) = run(&mk(r)).unwrap();
        let (big, _) = run(&mk(r + extra)).unwrap();
        for (a, b) in small.iter().zip(&big) {
            prop_assert!(a.field.values.iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert!(a.field.values.iter().zip(&b.field.values).all(|(x, y)| *x <= y + 1e-12));
        }
    }
}
