#![no_std]
extern crate alloc;

pub mod attention;
pub mod features;
pub mod graph;
pub mod grid;
pub mod guidance;
pub mod layout;
pub mod lexicon;
mod math;
pub mod parser;

pub use math::Vec2;
