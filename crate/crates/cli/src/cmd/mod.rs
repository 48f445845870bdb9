pub mod eval;
pub mod preprocess;
pub mod split;
pub mod stats;
