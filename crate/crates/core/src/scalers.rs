//! Per-feature normalization of encoded token vectors.
//!
//! Four methods are supported: min-max, max-abs, robust (median / IQR) and
//! standard (mean / population std). A feature whose denominator is zero
//! (constant column) is mapped to 0.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenizer::EncodedVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleMethod {
    MinMax,
    MaxAbs,
    Robust,
    Standard,
}

impl ScaleMethod {
    pub const ALL: [ScaleMethod; 4] = [
        ScaleMethod::MinMax,
        ScaleMethod::MaxAbs,
        ScaleMethod::Robust,
        ScaleMethod::Standard,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ScaleMethod::MinMax => "minmax",
            ScaleMethod::MaxAbs => "maxabs",
            ScaleMethod::Robust => "robust",
            ScaleMethod::Standard => "standard",
        }
    }

    pub fn display_name(&self) -> &'static str {
        match self {
            ScaleMethod::MinMax => "MinMaxScaler",
            ScaleMethod::MaxAbs => "MaxAbsScaler",
            ScaleMethod::Robust => "RobustScaler",
            ScaleMethod::Standard => "StandardScaler",
        }
    }
}

impl fmt::Display for ScaleMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScaleMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace(['-', '_'], "");
        let key = key.strip_suffix("scaler").unwrap_or(&key);
        ScaleMethod::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| Error::invalid(format!("unknown scaler `{s}`")))
    }
}

/// Fitted per-feature statistics. One entry per feature position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum ScalerParams {
    MinMax { min: Vec<f64>, max: Vec<f64> },
    MaxAbs { max_abs: Vec<f64> },
    Robust { median: Vec<f64>, iqr: Vec<f64> },
    Standard { mean: Vec<f64>, std: Vec<f64> },
}

impl ScalerParams {
    pub fn fit(method: ScaleMethod, train: &[EncodedVector]) -> Result<Self> {
        let rows: Vec<Vec<f64>> = train.iter().map(EncodedVector::to_f64).collect();
        Self::fit_values(method, &rows)
    }

    /// Column-wise fit over real-valued rows of uniform length.
    pub fn fit_values(method: ScaleMethod, rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().ok_or(Error::EmptyTrainingData)?.len();
        if width == 0 {
            return Err(Error::invalid("feature vectors must be non-empty"));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != width) {
            return Err(Error::DimensionMismatch {
                expected: width,
                actual: bad.len(),
            });
        }
        let columns: Vec<Vec<f64>> = (0..width)
            .map(|j| rows.iter().map(|r| r[j]).collect())
            .collect();
        let per_column = |f: fn(&[f64]) -> f64| columns.iter().map(|c| f(c)).collect::<Vec<_>>();

        Ok(match method {
            ScaleMethod::MinMax => ScalerParams::MinMax {
                min: per_column(|c| c.iter().copied().fold(f64::INFINITY, f64::min)),
                max: per_column(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
            },
            ScaleMethod::MaxAbs => ScalerParams::MaxAbs {
                max_abs: per_column(|c| c.iter().fold(0.0, |m, x| f64::max(m, x.abs()))),
            },
            ScaleMethod::Robust => ScalerParams::Robust {
                median: per_column(|c| quantile(c, 0.5)),
                iqr: per_column(|c| quantile(c, 0.75) - quantile(c, 0.25)),
            },
            ScaleMethod::Standard => ScalerParams::Standard {
                mean: per_column(mean),
                std: per_column(|c| {
                    let m = mean(c);
                    (c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / c.len() as f64).sqrt()
                }),
            },
        })
    }

    pub fn method(&self) -> ScaleMethod {
        match self {
            ScalerParams::MinMax { .. } => ScaleMethod::MinMax,
            ScalerParams::MaxAbs { .. } => ScaleMethod::MaxAbs,
            ScalerParams::Robust { .. } => ScaleMethod::Robust,
            ScalerParams::Standard { .. } => ScaleMethod::Standard,
        }
    }

    pub fn feature_count(&self) -> usize {
        match self {
            ScalerParams::MinMax { min, .. } => min.len(),
            ScalerParams::MaxAbs { max_abs } => max_abs.len(),
            ScalerParams::Robust { median, .. } => median.len(),
            ScalerParams::Standard { mean, .. } => mean.len(),
        }
    }

    /// Per-feature `(offset, denominator)` so that `scaled = (x - offset) / denominator`.
    fn affine(&self, j: usize) -> (f64, f64) {
        match self {
            ScalerParams::MinMax { min, max } => (min[j], max[j] - min[j]),
            ScalerParams::MaxAbs { max_abs } => (0.0, max_abs[j]),
            ScalerParams::Robust { median, iqr } => (median[j], iqr[j]),
            ScalerParams::Standard { mean, std } => (mean[j], std[j]),
        }
    }

    pub fn transform(&self, v: &EncodedVector) -> Result<Vec<f64>> {
        self.transform_values(&v.to_f64())
    }

    pub fn transform_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.feature_count();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: x.len(),
            });
        }
        Ok(x.iter()
            .enumerate()
            .map(|(j, &v)| {
                let (offset, denom) = self.affine(j);
                if denom == 0.0 {
                    0.0
                } else {
                    (v - offset) / denom
                }
            })
            .collect())
    }

    pub fn transform_batch(&self, rows: &[EncodedVector]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.transform(r)).collect()
    }
}

fn mean(c: &[f64]) -> f64 {
    c.iter().sum::<f64>() / c.len() as f64
}

/// Quantile with linear interpolation between order statistics (position `q * (n - 1)`).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn column(values: &[f64]) -> Vec<Vec<f64>> {
        values.iter().map(|&v| vec![v]).collect()
    }

    #[test]
    fn minmax_stats_and_transform() {
        let p = ScalerParams::fit_values(ScaleMethod::MinMax, &column(&[0.0, 5.0, 10.0])).unwrap();
        assert_eq!(
            p,
            ScalerParams::MinMax {
                min: vec![0.0],
                max: vec![10.0]
            }
        );
        assert_eq!(p.transform_values(&[5.0]).unwrap(), [0.5]);
    }

    #[test]
    fn standard_stats_and_transform() {
        let p =
            ScalerParams::fit_values(ScaleMethod::Standard, &column(&[0.0, 5.0, 10.0])).unwrap();
        let ScalerParams::Standard { mean, std } = &p else {
            panic!("wrong variant")
        };
        assert_abs_diff_eq!(mean[0], 5.0);
        assert_abs_diff_eq!(std[0], (50.0f64 / 3.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(std[0], 4.0825, epsilon = 1e-4);
        assert_eq!(p.transform_values(&[5.0]).unwrap(), [0.0]);
    }

    #[test]
    fn robust_uses_interpolated_quartiles() {
        let p = ScalerParams::fit_values(ScaleMethod::Robust, &column(&[1.0, 2.0, 3.0, 4.0, 5.0]))
            .unwrap();
        assert_eq!(
            p,
            ScalerParams::Robust {
                median: vec![3.0],
                iqr: vec![2.0]
            }
        );
        // Hand computation: positions 0.25*3 = 0.75 and 0.75*3 = 2.25 over [1, 2, 4, 8].
        assert_abs_diff_eq!(quantile(&[8.0, 1.0, 4.0, 2.0], 0.25), 1.75);
        assert_abs_diff_eq!(quantile(&[8.0, 1.0, 4.0, 2.0], 0.75), 5.0);
        assert_abs_diff_eq!(quantile(&[8.0, 1.0, 4.0, 2.0], 0.5), 3.0);
    }

    #[test]
    fn maxabs_maps_negative_extreme_to_minus_one() {
        let p = ScalerParams::fit_values(ScaleMethod::MaxAbs, &column(&[-10.0, 3.0, 7.0])).unwrap();
        assert_eq!(p.transform_values(&[-10.0]).unwrap(), [-1.0]);
    }

    #[test]
    fn constant_columns_map_to_zero() {
        let rows = vec![vec![4.0, 0.0], vec![4.0, 2.0]];
        for method in ScaleMethod::ALL {
            let p = ScalerParams::fit_values(method, &rows).unwrap();
            let out = p.transform_values(&[4.0, 1.0]).unwrap();
            if method != ScaleMethod::MaxAbs {
                assert_eq!(out[0], 0.0, "{method}");
            }
            assert!(out[1].is_finite());
        }
        let zeros = vec![vec![0.0], vec![0.0]];
        let p = ScalerParams::fit_values(ScaleMethod::MaxAbs, &zeros).unwrap();
        assert_eq!(p.transform_values(&[3.0]).unwrap(), [0.0]);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            ScalerParams::fit(ScaleMethod::MinMax, &[]),
            Err(Error::EmptyTrainingData)
        ));
        let ragged = vec![vec![1.0, 2.0], vec![1.0]];
        assert!(ScalerParams::fit_values(ScaleMethod::Robust, &ragged).is_err());
        let p = ScalerParams::fit_values(ScaleMethod::MinMax, &column(&[0.0, 1.0])).unwrap();
        assert!(matches!(
            p.transform_values(&[1.0, 2.0]),
            Err(Error::DimensionMismatch {
                expected: 1,
                actual: 2
            })
        ));
    }

    #[test]
    fn parse_method_names() {
        assert_eq!(
            "MinMaxScaler".parse::<ScaleMethod>().unwrap(),
            ScaleMethod::MinMax
        );
        assert_eq!(
            "max-abs".parse::<ScaleMethod>().unwrap(),
            ScaleMethod::MaxAbs
        );
        assert_eq!(
            "standard".parse::<ScaleMethod>().unwrap(),
            ScaleMethod::Standard
        );
        assert!("zscore".parse::<ScaleMethod>().is_err());
    }

    #[test]
    fn json_is_tagged_by_method() {
        let p = ScalerParams::MaxAbs { max_abs: vec![2.0] };
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, r#"{"method":"maxabs","max_abs":[2.0]}"#);
    }
}
