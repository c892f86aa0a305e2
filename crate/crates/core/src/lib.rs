pub mod affine;
pub mod brackets;
pub mod duality;
pub mod mechanics;
pub mod phase;
pub mod report;
pub mod sampling;
pub mod symexpr;
