//! File formats, image I/O, and command plumbing for the `qke` binary.

pub mod commands;
pub mod keyfile;
pub mod pgm;
pub mod report;
