pub mod bounds;
pub mod cli;
pub mod convolve;
pub mod diagnostics;
pub mod error;
pub mod kernel;
pub mod minimize;
pub mod solver;
