//! Command-line driver and HTTP inference service for `tenn-core`.

pub mod cli;
pub mod service;
