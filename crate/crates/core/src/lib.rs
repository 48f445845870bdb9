pub mod annot;
pub mod imgproc;
pub mod matching;
pub mod metrics;
pub mod plot;
pub mod split;
pub mod synth;
