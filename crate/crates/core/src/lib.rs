pub mod dd;
pub mod fc2d;
pub mod fcblend;
pub mod fft;
pub mod geometry;
pub mod harness;
pub mod interp;
pub mod multipliers;
pub mod nlops;
pub mod solvers;

