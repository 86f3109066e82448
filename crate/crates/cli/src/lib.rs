//! Command-line front end: JSON configuration, expression models and report emission.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod config;
pub mod expr;
pub mod output;

pub use app::{main_with_args, run, Cli, EXIT_CONDITION, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK};
pub use config::ModelConfig;
pub use expr::{parse_expr, Expr, ParseError};
