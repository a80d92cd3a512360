//! Color-name corpus: CSV ingest and seeded train/test splitting.

use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::color::Rgb;
use crate::error::{Error, Result};

/// The bundled color chart (`name,r,g,b`, 300 rows).
pub const BUNDLED_CSV: &str = include_str!("../data/colors.csv");

pub const CSV_HEADER: [&str; 4] = ["name", "r", "g", "b"];

/// One labeled pair: a free-text description and its RGB recipe.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColorSample {
    pub description: String,
    pub recipe: Rgb,
}

impl ColorSample {
    pub fn new(description: impl Into<String>, recipe: Rgb) -> Result<Self> {
        let description = description.into();
        if description.trim().is_empty() {
            return Err(Error::EmptyDescription);
        }
        Ok(ColorSample {
            description,
            recipe,
        })
    }
}

pub fn bundled() -> Vec<ColorSample> {
    parse_csv(BUNDLED_CSV.as_bytes()).expect("bundled color chart is valid")
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<ColorSample>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NoSuchFile(path.to_path_buf()),
        _ => Error::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    parse_csv(file)
}

/// Parses `name,r,g,b` rows. Errors carry the 1-based line number of the offending row.
pub fn parse_csv<R: Read>(reader: R) -> Result<Vec<ColorSample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);

    let mut records = rdr.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(|e| csv_error(&e, 1))?,
        None => return Err(Error::BadHeader(String::new())),
    };
    let header_fields: Vec<&str> = header.iter().map(str::trim).collect();
    if header_fields != CSV_HEADER {
        return Err(Error::BadHeader(header_fields.join(",")));
    }

    let mut samples = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_error(&e, 0))?;
        let line = rec.position().map_or(0, |p| p.line());
        let malformed = |message: String| Error::MalformedRow { line, message };
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        if rec.len() != 4 {
            return Err(malformed(format!(
                "expected 4 columns, found {}",
                rec.len()
            )));
        }
        let name = rec[0].trim();
        if name.is_empty() {
            return Err(malformed("empty name".into()));
        }
        let mut channels = [0u8; 3];
        for (slot, field) in channels.iter_mut().zip(rec.iter().skip(1)) {
            let field = field.trim();
            let value: i64 = field
                .parse()
                .map_err(|_| malformed(format!("channel `{field}` is not an integer")))?;
            *slot = u8::try_from(value)
                .map_err(|_| malformed(format!("channel {value} outside 0..=255")))?;
        }
        samples.push(ColorSample {
            description: name.to_string(),
            recipe: Rgb::from(channels),
        });
    }
    Ok(samples)
}

fn csv_error(e: &csv::Error, fallback_line: u64) -> Error {
    let line = e.position().map_or(fallback_line, |p| p.line());
    Error::MalformedRow {
        line,
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDataset {
    pub train: Vec<ColorSample>,
    pub test: Vec<ColorSample>,
    pub seed: u64,
    pub ratio: f64,
}

/// Shuffles with a ChaCha8 stream seeded by `seed`, then takes the first
/// `round(ratio * N)` samples as the training split.
pub fn split(data: &[ColorSample], ratio: f64, seed: u64) -> Result<SplitDataset> {
    if data.len() < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 samples to split, got {}",
            data.len()
        )));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!("split ratio {ratio} not in (0, 1)")));
    }
    let mut shuffled = data.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (ratio * data.len() as f64).round() as usize;
    let test = shuffled.split_off(n_train);
    Ok(SplitDataset {
        train: shuffled,
        test,
        seed,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(n: usize) -> Vec<ColorSample> {
        (0..n)
            .map(|i| ColorSample::new(format!("color {i}"), Rgb::new(i as u8, 0, 0)).unwrap())
            .collect()
    }

    #[test]
    fn parses_rows_in_order() {
        let csv = "name,r,g,b\nvery light grey,205,205,192\nblack,0,0,0\n";
        let rows = parse_csv(csv.as_bytes()).unwrap();
        assert_eq!(
            rows,
            vec![
                ColorSample::new("very light grey", Rgb::new(205, 205, 192)).unwrap(),
                ColorSample::new("black", Rgb::BLACK).unwrap(),
            ]
        );
    }

    #[test]
    fn reports_line_numbers() {
        let line_of = |csv: &str| match parse_csv(csv.as_bytes()) {
            Err(Error::MalformedRow { line, .. }) => line,
            other => panic!("expected malformed row, got {other:?}"),
        };
        assert_eq!(line_of("name,r,g,b\nblack,0,0,0\nbad,300,0,0\n"), 3);
        assert_eq!(line_of("name,r,g,b\nbad,1,2\n"), 2);
        assert_eq!(line_of("name,r,g,b\nok,1,2,3\nok,1,2,3\nbad,1.5,2,3\n"), 4);
        assert_eq!(line_of("name,r,g,b\nbad,-1,2,3\n"), 2);
        let err = parse_csv("name,r,g,b\nbad,300,0,0\n".as_bytes()).unwrap_err();
        assert!(err.to_string().starts_with("line 2:"), "{err}");
    }

    #[test]
    fn rejects_wrong_header() {
        assert!(matches!(
            parse_csv("color,r,g,b\nred,255,0,0\n".as_bytes()),
            Err(Error::BadHeader(_))
        ));
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = load_csv("/definitely/not/here.csv").unwrap_err();
        assert_eq!(err.to_string(), "no such file: /definitely/not/here.csv");
    }

    #[test]
    fn bundled_chart_loads() {
        let data = bundled();
        assert_eq!(data.len(), 300);
        assert_eq!(data[0].description, "very light grey");
        assert_eq!(data[0].recipe, Rgb::new(205, 205, 192));
    }

    #[test]
    fn split_sizes() {
        let s = split(&samples(10), 0.8, 1).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (8, 2));
        let s = split(&samples(300), 0.8, 1).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (240, 60));
    }

    #[test]
    fn split_is_deterministic() {
        let data = samples(50);
        let a = serde_json::to_vec(&split(&data, 0.8, 9).unwrap()).unwrap();
        let b = serde_json::to_vec(&split(&data, 0.8, 9).unwrap()).unwrap();
        assert_eq!(a, b);
        assert_ne!(
            split(&data, 0.8, 9).unwrap(),
            split(&data, 0.8, 10).unwrap()
        );
    }

    #[test]
    fn split_rejects_bad_inputs() {
        assert!(split(&samples(1), 0.8, 0).is_err());
        assert!(split(&samples(10), 0.0, 0).is_err());
        assert!(split(&samples(10), 1.0, 0).is_err());
        assert!(split(&samples(10), f64::NAN, 0).is_err());
    }
}
