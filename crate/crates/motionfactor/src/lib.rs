//! File formats, the remote planner client and the command-line driver
//! around `motionfactor-core`.

pub mod cli;
pub mod fvol;
pub mod gmsk;
pub mod json;
pub mod lexicon_file;
pub mod planner;
pub mod render;
pub mod trace;

pub use motionfactor_core;
