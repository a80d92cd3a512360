//! Single-document JSON checkpoint: network config, vocabulary, scaler
//! parameters, weights and biases, run metadata, and the color palette used
//! for nearest-name lookups at inference time.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::ColorSample;
use crate::error::{Error, Result};
use crate::experiment::{Pipeline, TrainedRun};
use crate::network::{Layer, Network, NetworkConfig};
use crate::scalers::ScalerParams;
use crate::tokenizer::Vocabulary;

pub const FORMAT_VERSION: &str = "tenn-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub version: String,
    pub seed: u64,
    pub param_count: usize,
    pub split_ratio: f64,
    pub dataset_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: NetworkConfig,
    pub vocabulary: Vocabulary,
    pub scaler_params: ScalerParams,
    /// Per layer, `in` rows of `out` weights.
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
    pub metadata: Metadata,
    pub palette: Vec<ColorSample>,
}

impl Checkpoint {
    pub fn from_pipeline(
        pipeline: &Pipeline,
        metadata: Metadata,
        palette: Vec<ColorSample>,
    ) -> Self {
        let layers = pipeline.network.layers();
        Checkpoint {
            config: pipeline.network.config().clone(),
            vocabulary: pipeline.vocabulary.clone(),
            scaler_params: pipeline.scaler.clone(),
            weights: layers.iter().map(Layer::weight_rows).collect(),
            biases: layers.iter().map(|l| l.biases().to_vec()).collect(),
            metadata,
            palette,
        }
    }

    pub fn from_run(run: &TrainedRun, palette: Vec<ColorSample>) -> Self {
        let metadata = Metadata {
            version: FORMAT_VERSION.to_string(),
            seed: run.config.seed,
            param_count: run.pipeline.network.parameter_count(),
            split_ratio: run.config.ratio,
            dataset_size: palette.len(),
        };
        Self::from_pipeline(&run.pipeline, metadata, palette)
    }

    /// Validates shapes and rebuilds the inference pipeline.
    pub fn to_pipeline(&self) -> Result<Pipeline> {
        if self.metadata.version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version `{}`",
                self.metadata.version
            )));
        }
        let max_len = self.vocabulary.max_len();
        self.config
            .validate_rgb(max_len)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        if self.scaler_params.feature_count() != max_len {
            return Err(Error::Checkpoint(format!(
                "scaler has {} features, vocabulary max_len is {max_len}",
                self.scaler_params.feature_count()
            )));
        }
        let network = Network::from_parts(
            self.config.clone(),
            self.weights.clone(),
            self.biases.clone(),
        )?;
        if network.parameter_count() != self.metadata.param_count {
            return Err(Error::Checkpoint(format!(
                "metadata says {} parameters, weights hold {}",
                self.metadata.param_count,
                network.parameter_count()
            )));
        }
        Ok(Pipeline {
            vocabulary: self.vocabulary.clone(),
            scaler: self.scaler_params.clone(),
            network,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NoSuchFile(path.to_path_buf()),
            _ => Error::Io {
                path: path.to_path_buf(),
                source: e,
            },
        })?;
        Self::from_json(&text)
    }
}
