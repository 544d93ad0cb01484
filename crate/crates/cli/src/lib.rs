//! Scenario runner for quantum-instrument detector sequences.
//!
//! A scenario file declares a sequence of detectors and connecting channels
//! together with outcome labels, an optional conditioning directive, boundary
//! states, interdictive insertions and a weak-measurement block. [`run`]
//! evaluates the requested outputs into [`ResultRecord`]s, [`verify`]
//! cross-checks the scenario against brute-force enumeration, and [`sweep`]
//! tabulates the approach of pre- and post-selected averages to the weak
//! value.

pub mod error;
pub mod report;
pub mod scenario;

pub use error::{CliError, EXIT_INVARIANT, EXIT_VALIDATION};
pub use report::{render_sweep_table, render_table, run, sweep, verify, write_csv, write_sweep_csv, Check, ResultRecord, VerifyReport};
pub use scenario::{parse, parse_str, Scenario, ScenarioFile};
