pub mod eval;
pub mod generate;
pub mod sample;
pub mod train;
