use std::time::Instant;

use blockmf::model::example_model;
use blockmf::verify::{run_verification, Level, Status, CHECK_KEYS};

#[test]
fn fast_suite_passes_on_example() {
    let start = Instant::now();
    let report = run_verification(&example_model(4.0), Level::Fast);
    print!("{report}");
    assert!(report.passed(), "{report}");
    assert_eq!(report.rows.len(), CHECK_KEYS.len());
    assert!(start.elapsed().as_secs() < 60);
}

#[test]
fn asymmetric_kernel_fails_exactness_row() {
    let mut spec = example_model(4.0);
    spec.interaction.set_w_unchecked(1, 0, -2.0);
    let report = run_verification(&spec, Level::Fast);
    let row = report.rows.iter().find(|r| r.key == "energy.exactness").unwrap();
    assert_eq!(row.status, Status::Fail, "{report}");
    assert!(!report.passed());
}
