//! File formats, JSON reports and the command-line front end for
//! `srkilling-core`.

pub mod cli;
pub mod formats;
pub mod report;
