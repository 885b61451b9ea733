#![allow(clippy::needless_range_loop)]

pub mod exactlin;
pub mod dynkin;
pub mod polytope;
pub mod surface;
pub mod blowup;
pub mod certify;
pub mod harness;
