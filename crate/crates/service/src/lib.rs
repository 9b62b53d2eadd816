//! HTTP service around the generation pipeline, a stub SPARQL endpoint for
//! offline runs, and helpers shared by the command line.

pub mod api;
pub mod logs;
pub mod setup;
pub mod stub;
