//! Text-to-color inference with a tokenizing encoder and a small feed-forward network.
//!
//! The pipeline turns a free-text color description ("very light grey") into
//! integer token ids, normalizes them with one of four per-feature scalers and
//! regresses an RGB recipe. Predictions are scored in CIELAB with CIE76 or
//! CIEDE2000.

pub mod checkpoint;
pub mod color;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod network;
pub mod scalers;
pub mod tokenizer;

pub use checkpoint::Checkpoint;
pub use color::{
    delta_e_2000, delta_e_76, mean_delta_e, rgb_to_lab, DeltaE, LabColor, Metric, Rgb,
};
pub use dataset::{ColorSample, SplitDataset};
pub use error::{Error, Result};
pub use experiment::{EvalReport, ExperimentConfig, Pipeline};
pub use network::{Activation, Network, NetworkConfig, TrainReport};
pub use scalers::{ScaleMethod, ScalerParams};
pub use tokenizer::{EncodedVector, Vocabulary};
