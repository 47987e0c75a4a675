//! Parameter sweeps, moment dumps and oracle self-checks for the acoustical
//! polaron bounds, written as CSV or JSON tables.

pub mod commands;
pub mod config;
pub mod error;
pub mod table;

pub use commands::{cmd_bounds, cmd_dump_shapes, cmd_figure, cmd_moments, cmd_moving, cmd_oracle_check};
pub use config::{Format, Grid, Material, Overrides, SweepConfig};
pub use error::CliError;
pub use table::{Cell, Table};
