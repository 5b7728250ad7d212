//! Scenario files, ledgers, field output and the command line.

pub mod cli;
pub mod config;
pub mod ledger;
pub mod vtk;

pub use cli::{exit_code, run_cli, Scenario};
pub use config::{parse_config, parse_config_str, OutputFormat, ScenarioConfig};
pub use ledger::{check_ledger, read_ledger, write_ledger, LedgerCheck, LEDGER_HEADER};
pub use vtk::{read_fields, write_fields, VtkArrays};
