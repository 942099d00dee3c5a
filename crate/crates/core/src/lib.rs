pub mod engine;
pub mod features;
pub mod imgio;
pub mod roistore;
pub mod synthbench;
pub mod tuner;
