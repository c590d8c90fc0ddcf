//! Command-line front end for `relsynth-core`: spec and rule files, the wall-clock
//! budget, a composition-level worker pool and JSON reports.

pub mod cli;
pub mod report;
pub mod run;
