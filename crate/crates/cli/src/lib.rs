//! Command-line front end for the jamming toolkit: scenario files, command
//! dispatch and JSON reports.

pub mod commands;
pub mod report;
pub mod scenario;
