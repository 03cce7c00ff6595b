//! Shared fixtures for the benchmarks.

use std::path::Path;

use evnum::harness::STATIC_MINUTE;
use evnum::{static_problem, FeederFiles, NumProblem};

/// Static single-phase instance of the bundled feeder.
pub fn static_instance() -> NumProblem {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/eulv");
    let (feeder, shapes) = FeederFiles::in_dir(&dir).load().expect("bundled feeder loads");
    static_problem(&feeder, &shapes, STATIC_MINUTE).expect("static instance builds")
}
