//! File formats, remote oracles, configuration and command implementations
//! on top of [`molgrammar_core`].

pub mod config;
pub mod files;
pub mod http;
pub mod pipeline;
pub mod remote;
pub mod report;

pub use molgrammar_core as core;
