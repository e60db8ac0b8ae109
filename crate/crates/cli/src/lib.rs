//! Scenario runner behind the `vlantree` command.
//!
//! ```no_run
//! use std::path::Path;
//! use vlantree_cli::{runner, Scenario};
//!
//! let s = Scenario::parse("grid 4 100\nuniform 10\n").unwrap();
//! let report = runner::run(&s, Path::new("."), None).unwrap();
//! print!("{}", report.summary());
//! ```

pub mod compare;
pub mod error;
pub mod runner;
pub mod scenario;

pub use error::CliError;
pub use scenario::Scenario;
