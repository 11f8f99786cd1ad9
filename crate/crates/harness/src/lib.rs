//! File formats, experiment recipes and the `semiblind` command-line tool.

pub mod commands;
pub mod config;
pub mod experiment;
pub mod imageio;
pub mod padding;
pub mod plot;
pub mod scene;
