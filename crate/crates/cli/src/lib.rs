//! Experiment harness behind the `mmlearn` binary: config parsing, dataset
//! plumbing, metrics reports, synthetic benchmark tasks and the five
//! subcommands (perturb, train-source, transfer, evaluate, benchmark).

pub mod commands;
pub mod config;
pub mod metrics;
pub mod synthetic;
