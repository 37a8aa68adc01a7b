//! Command line and HTTP front ends for the research data repository.

pub mod api;
pub mod cli;
pub mod config;
pub mod error;
pub mod jobs;
pub mod logging;
pub mod service;
