//! Harness around the exact counting toolkit: scenario configuration,
//! verification suites, a disk cache for expensive counts, and report
//! serialization. The `lusztig` binary is a thin command-line front end
//! over this library.

pub mod cache;
pub mod report;
pub mod scenario;
pub mod suites;
