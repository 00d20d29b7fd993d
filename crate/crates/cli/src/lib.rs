//! Command-line companion: configuration, artifacts and verification suites.

pub mod commands;
pub mod config;
pub mod emit;
pub mod error;
pub mod seeded;
pub mod suites;
