//! End-to-end runs: split, fit vocabulary and scaler, train, and score.
//!
//! Accuracy is nearest-neighbor retrieval accuracy: a prediction is correct
//! when the dataset color closest to it (by CIEDE2000) carries the true
//! recipe. A thresholded rate (ΔE2000 ≤ τ) is reported alongside it.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::color::{Metric, Rgb};
use crate::dataset::{self, ColorSample, SplitDataset};
use crate::error::{Error, Result};
use crate::network::{
    self, Activation, Network, NetworkConfig, TrainReport, DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS,
    DEFAULT_HIDDEN, DEFAULT_LEARNING_RATE,
};
use crate::scalers::{ScaleMethod, ScalerParams};
use crate::tokenizer::{EncodedVector, Vocabulary, DEFAULT_MAX_LEN};

pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_RATIO: f64 = 0.8;
pub const DEFAULT_EVAL_N: usize = 30;
pub const DEFAULT_THRESHOLD: f64 = 20.0;
pub const DEFAULT_NEAREST_K: usize = 3;

/// Published accuracy per normalization method, printed next to measured values.
pub fn reference_accuracy(method: ScaleMethod) -> f64 {
    match method {
        ScaleMethod::MinMax => 0.79,
        ScaleMethod::MaxAbs => 0.68,
        ScaleMethod::Robust => 0.42,
        ScaleMethod::Standard => 0.73,
    }
}

/// Published parameter count of the reference model.
pub const REFERENCE_PARAM_COUNT: usize = 38_731;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub max_len: usize,
    pub ratio: f64,
    pub seed: u64,
    pub scaler: ScaleMethod,
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub metric: Metric,
    pub eval_n: usize,
    pub threshold: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            max_len: DEFAULT_MAX_LEN,
            ratio: DEFAULT_RATIO,
            seed: DEFAULT_SEED,
            scaler: ScaleMethod::MinMax,
            hidden: DEFAULT_HIDDEN.to_vec(),
            learning_rate: DEFAULT_LEARNING_RATE,
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            metric: Metric::Ciede2000,
            eval_n: DEFAULT_EVAL_N,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl ExperimentConfig {
    pub fn with_scaler(&self, scaler: ScaleMethod) -> Self {
        ExperimentConfig {
            scaler,
            ..self.clone()
        }
    }

    pub fn network_config(&self) -> NetworkConfig {
        let mut cfg = NetworkConfig::for_scaler(self.max_len, &self.hidden, self.scaler, self.seed);
        cfg.learning_rate = self.learning_rate;
        cfg.epochs = self.epochs;
        cfg.batch_size = self.batch_size;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_len == 0 {
            return Err(Error::invalid("max_len must be at least 1"));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::invalid(format!(
                "split ratio {} not in (0, 1)",
                self.ratio
            )));
        }
        if self.eval_n == 0 {
            return Err(Error::invalid("evaluation size must be at least 1"));
        }
        if self.threshold.is_nan() || self.threshold < 0.0 {
            return Err(Error::invalid(format!("threshold {}", self.threshold)));
        }
        self.network_config().validate_rgb(self.max_len)
    }
}

/// Anything that maps a description to a recipe.
pub trait RecipePredictor {
    fn predict(&self, description: &str) -> Result<Rgb>;
}

impl<F> RecipePredictor for F
where
    F: Fn(&str) -> Result<Rgb>,
{
    fn predict(&self, description: &str) -> Result<Rgb> {
        self(description)
    }
}

/// Vocabulary, fitted scaler and network: everything needed for inference.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub vocabulary: Vocabulary,
    pub scaler: ScalerParams,
    pub network: Network,
}

impl Pipeline {
    pub fn encode(&self, description: &str) -> Result<(EncodedVector, Vec<f64>)> {
        let ids = self.vocabulary.encode(description)?;
        let scaled = self.scaler.transform(&ids)?;
        Ok((ids, scaled))
    }
}

impl RecipePredictor for Pipeline {
    fn predict(&self, description: &str) -> Result<Rgb> {
        let (_, scaled) = self.encode(description)?;
        self.network.predict_rgb(&scaled)
    }
}

type Pairs = Vec<(Vec<f64>, Vec<f64>)>;

/// Encoded, scaled training material for one run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub split: SplitDataset,
    pub vocabulary: Vocabulary,
    pub scaler: ScalerParams,
    pub train_pairs: Pairs,
    pub test_pairs: Pairs,
}

/// Splits the data and fits vocabulary and scaler on the training split only.
pub fn prepare(data: &[ColorSample], cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let split = dataset::split(data, cfg.ratio, cfg.seed)?;
    let vocabulary = Vocabulary::fit(&split.train, cfg.max_len)?;
    let train_enc = vocabulary.encode_batch(&split.train)?;
    let test_enc = vocabulary.encode_batch(&split.test)?;
    let train_ids: Vec<EncodedVector> = train_enc.iter().map(|(v, _)| v.clone()).collect();
    let scaler = ScalerParams::fit(cfg.scaler, &train_ids)?;
    let to_pairs = |enc: &[(EncodedVector, Rgb)]| -> Result<Pairs> {
        enc.iter()
            .map(|(v, rgb)| Ok((scaler.transform(v)?, rgb.to_unit().to_vec())))
            .collect()
    };
    let train_pairs = to_pairs(&train_enc)?;
    let test_pairs = to_pairs(&test_enc)?;
    Ok(Prepared {
        split,
        vocabulary,
        scaler,
        train_pairs,
        test_pairs,
    })
}

#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub config: ExperimentConfig,
    pub pipeline: Pipeline,
    pub split: SplitDataset,
    pub report: TrainReport,
}

impl TrainedRun {
    /// Same vocabulary, scaler and initial weights as the trained model, before any update.
    pub fn untrained_twin(&self) -> Result<Pipeline> {
        Ok(Pipeline {
            vocabulary: self.pipeline.vocabulary.clone(),
            scaler: self.pipeline.scaler.clone(),
            network: Network::init(self.pipeline.network.config().clone())?,
        })
    }
}

pub fn train_pipeline(data: &[ColorSample], cfg: &ExperimentConfig) -> Result<TrainedRun> {
    let prepared = prepare(data, cfg)?;
    let (network, report) = network::train(
        &cfg.network_config(),
        &prepared.train_pairs,
        &prepared.test_pairs,
    )?;
    Ok(TrainedRun {
        config: cfg.clone(),
        pipeline: Pipeline {
            vocabulary: prepared.vocabulary,
            scaler: prepared.scaler,
            network,
        },
        split: prepared.split,
        report,
    })
}

/// The `k` palette entries closest to `color`, ascending by ΔE. Ties keep palette order.
pub fn nearest_colors(
    palette: &[ColorSample],
    color: Rgb,
    k: usize,
    metric: Metric,
) -> Vec<(&ColorSample, f64)> {
    let lab = color.to_lab();
    let mut scored: Vec<(&ColorSample, f64)> = palette
        .iter()
        .map(|s| (s, metric.between(lab, s.recipe.to_lab()).value))
        .collect();
    scored.sort_by(|a, b| a.1.total_cmp(&b.1));
    scored.truncate(k);
    scored
}

/// Fraction of `(predicted, truth)` pairs whose nearest palette color has the true recipe.
pub fn nearest_neighbor_accuracy(pairs: &[(Rgb, Rgb)], palette: &[ColorSample]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    if palette.is_empty() {
        return Err(Error::invalid("empty palette"));
    }
    let hits = pairs
        .iter()
        .filter(|(pred, truth)| {
            nearest_colors(palette, *pred, 1, Metric::Ciede2000)
                .first()
                .is_some_and(|(s, _)| s.recipe == *truth)
        })
        .count();
    Ok(hits as f64 / pairs.len() as f64)
}

fn predict_pairs(model: &impl RecipePredictor, samples: &[ColorSample]) -> Result<Vec<(Rgb, Rgb)>> {
    samples
        .iter()
        .enumerate()
        .map(|(index, s)| {
            model
                .predict(&s.description)
                .map(|p| (p, s.recipe))
                .map_err(|e| Error::Sample {
                    index,
                    source: Box::new(e),
                })
        })
        .collect()
}

/// Nearest-neighbor retrieval accuracy of `model` on `test`, against the full `dataset`.
pub fn accuracy(
    model: &impl RecipePredictor,
    test: &[ColorSample],
    dataset: &[ColorSample],
) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    nearest_neighbor_accuracy(&predict_pairs(model, test)?, dataset)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEval {
    pub description: String,
    pub truth: Rgb,
    pub predicted: Rgb,
    pub delta_e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub definition: String,
    pub nearest_neighbor: f64,
    pub threshold: f64,
    pub within_threshold: f64,
    pub test_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: Metric,
    pub sample_count: usize,
    pub mean_delta_e: f64,
    pub samples: Vec<SampleEval>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub accuracy: Option<AccuracyReport>,
}

impl EvalReport {
    pub fn delta_es(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.delta_e).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let width = self
            .samples
            .iter()
            .map(|s| s.description.chars().count())
            .max()
            .unwrap_or(0)
            .max("description".len());
        let _ = writeln!(
            out,
            "{:<width$}  {:>11}  {:>11}  {:>9}",
            "description", "truth", "predicted", "ΔE"
        );
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{:<width$}  {:>11}  {:>11}  {:>9.4}",
                s.description,
                s.truth.to_string(),
                s.predicted.to_string(),
                s.delta_e
            );
        }
        let _ = writeln!(
            out,
            "mean ΔE ({}) over {} samples: {:.4}",
            self.metric, self.sample_count, self.mean_delta_e
        );
        if let Some(acc) = &self.accuracy {
            let _ = writeln!(
                out,
                "accuracy ({}): {:.4} over {} test samples",
                acc.definition, acc.nearest_neighbor, acc.test_count
            );
            let _ = writeln!(
                out,
                "within ΔE2000 <= {}: {:.4}",
                acc.threshold, acc.within_threshold
            );
        }
        out
    }
}

/// ΔE between predicted and true recipes for the first `n` samples.
pub fn evaluate_delta_e(
    model: &impl RecipePredictor,
    samples: &[ColorSample],
    metric: Metric,
    n: usize,
) -> Result<EvalReport> {
    if n == 0 {
        return Err(Error::invalid("evaluation size must be at least 1"));
    }
    if n > samples.len() {
        return Err(Error::invalid(format!(
            "evaluation size {n} exceeds {} available samples",
            samples.len()
        )));
    }
    let subset = &samples[..n];
    let evals: Vec<SampleEval> = predict_pairs(model, subset)?
        .into_iter()
        .zip(subset)
        .map(|((predicted, truth), s)| SampleEval {
            description: s.description.clone(),
            truth,
            predicted,
            delta_e: metric.between_rgb(predicted, truth),
        })
        .collect();
    let mean = evals.iter().map(|e| e.delta_e).sum::<f64>() / evals.len() as f64;
    Ok(EvalReport {
        metric,
        sample_count: evals.len(),
        mean_delta_e: mean,
        samples: evals,
        accuracy: None,
    })
}

pub fn accuracy_definition(palette_len: usize) -> String {
    format!("nearest-neighbor retrieval by ciede2000 over {palette_len} dataset colors")
}

/// ΔE over the first `cfg.eval_n` test samples (fewer if the split is smaller)
/// plus both accuracy figures over the whole test split.
pub fn evaluate_split(
    model: &impl RecipePredictor,
    test: &[ColorSample],
    dataset: &[ColorSample],
    cfg: &ExperimentConfig,
) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let n = cfg.eval_n.min(test.len());
    let mut report = evaluate_delta_e(model, test, cfg.metric, n)?;
    let pairs = predict_pairs(model, test)?;
    let within = pairs
        .iter()
        .filter(|(p, t)| Metric::Ciede2000.between_rgb(*p, *t) <= cfg.threshold)
        .count();
    report.accuracy = Some(AccuracyReport {
        definition: accuracy_definition(dataset.len()),
        nearest_neighbor: nearest_neighbor_accuracy(&pairs, dataset)?,
        threshold: cfg.threshold,
        within_threshold: within as f64 / pairs.len() as f64,
        test_count: pairs.len(),
    });
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub method: ScaleMethod,
    pub hidden_activation: Activation,
    pub layer_dims: Vec<usize>,
    pub seed: u64,
    pub split_fingerprint: String,
    pub parameter_count: usize,
    pub initial_train_loss: f64,
    pub final_train_loss: f64,
    pub final_test_loss: Option<f64>,
    pub reference_accuracy: f64,
    pub evaluation: EvalReport,
}

impl MethodRun {
    pub fn accuracy(&self) -> f64 {
        self.evaluation
            .accuracy
            .as_ref()
            .map_or(0.0, |a| a.nearest_neighbor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerComparison {
    pub accuracy_definition: String,
    pub metric: Metric,
    pub runs: Vec<MethodRun>,
}

impl ScalerComparison {
    pub fn accuracy_by_method(&self) -> Vec<(ScaleMethod, f64)> {
        self.runs.iter().map(|r| (r.method, r.accuracy())).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:>9} {:>10} {:>12} {:>11} {:>11}",
            "Methods", "Accuracy", "Reference", "Within ΔE", "Mean ΔE", "Activation"
        );
        for run in &self.runs {
            let eval = &run.evaluation;
            let within = eval.accuracy.as_ref().map_or(0.0, |a| a.within_threshold);
            let _ = writeln!(
                out,
                "{:<16} {:>9.4} {:>10.2} {:>12.4} {:>11.4} {:>11}",
                run.method.display_name(),
                run.accuracy(),
                run.reference_accuracy,
                within,
                eval.mean_delta_e,
                match run.hidden_activation {
                    Activation::Relu => "relu",
                    Activation::Linear => "linear",
                }
            );
        }
        if let Some(first) = self.runs.first() {
            let _ = writeln!(
                out,
                "accuracy: {}; mean ΔE: {} over {} test samples; layer dims {:?}",
                self.accuracy_definition,
                self.metric,
                first.evaluation.sample_count,
                first.layer_dims
            );
        }
        out
    }
}

/// FNV-1a over the split's serialized form; stable across runs and platforms.
pub fn split_fingerprint(split: &SplitDataset) -> String {
    let bytes = serde_json::to_vec(split).expect("split serializes");
    let hash = bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    });
    format!("{hash:016x}")
}

fn run_method(data: &[ColorSample], cfg: &ExperimentConfig) -> Result<MethodRun> {
    let run = train_pipeline(data, cfg)?;
    let evaluation = evaluate_split(&run.pipeline, &run.split.test, data, cfg)?;
    let net_cfg = run.pipeline.network.config();
    Ok(MethodRun {
        method: cfg.scaler,
        hidden_activation: net_cfg.activations[0],
        layer_dims: net_cfg.layer_dims.clone(),
        seed: cfg.seed,
        split_fingerprint: split_fingerprint(&run.split),
        parameter_count: run.report.parameter_count,
        initial_train_loss: run.report.initial_loss,
        final_train_loss: run.report.final_train_loss(),
        final_test_loss: run.report.final_test_loss,
        reference_accuracy: reference_accuracy(cfg.scaler),
        evaluation,
    })
}

/// Trains one model per scaler on the same split, seed and layer widths.
/// The four runs execute on separate threads.
pub fn compare_scalers(cfg: &ExperimentConfig, data: &[ColorSample]) -> Result<ScalerComparison> {
    cfg.validate()?;
    let results: Vec<Result<MethodRun>> = std::thread::scope(|scope| {
        let handles: Vec<_> = ScaleMethod::ALL
            .iter()
            .map(|&method| {
                let cfg = cfg.with_scaler(method);
                scope.spawn(move || run_method(data, &cfg))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scaler run panicked"))
            .collect()
    });
    let runs = results
        .into_iter()
        .zip(ScaleMethod::ALL)
        .map(|(r, method)| {
            r.map_err(|e| Error::Method {
                method: method.display_name().to_string(),
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScalerComparison {
        accuracy_definition: accuracy_definition(data.len()),
        metric: cfg.metric,
        runs,
    })
}
