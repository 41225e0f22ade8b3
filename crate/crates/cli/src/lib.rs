//! Configuration, scenario orchestration and artifact emission for the
//! `kinshock` command line tool.

pub mod config;
pub mod run;
pub mod scenarios;

pub use config::{load_config, parse_config, RunConfig, Scenario};
pub use run::{run, RunManifest};
pub use scenarios::{Status, Verdict};
