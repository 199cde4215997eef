//! Command-line front end: spec files, generators and report output.

pub mod gen;
pub mod input;
pub mod run;
