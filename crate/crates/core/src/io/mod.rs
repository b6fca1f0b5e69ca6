//! Configuration parsing, seeded initial conditions, preset experiments, and
//! the on-disk output formats (CSV diagnostics, raw snapshots, PGM images).

pub mod config;
pub mod driver;
pub mod output;
pub mod presets;
pub mod prng;
