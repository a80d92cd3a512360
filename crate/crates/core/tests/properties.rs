mod support;

use std::collections::HashMap;

use proptest::prelude::*;
use tenn_core::dataset::{split, ColorSample};
use tenn_core::network::{
    output_to_rgb, parameter_count, Activation, Loss, Network, NetworkConfig,
};
use tenn_core::scalers::{quantile, ScaleMethod, ScalerParams};
use tenn_core::tokenizer::{tokenize, Vocabulary, PAD_ID, UNK_ID};
use tenn_core::{delta_e_2000, delta_e_76, mean_delta_e, rgb_to_lab, LabColor, Metric, Rgb};

fn rgb() -> impl Strategy<Value = Rgb> {
    any::<[u8; 3]>().prop_map(Rgb::from)
}

fn lab() -> impl Strategy<Value = LabColor> {
    (0.0..100.0f64, -128.0..128.0f64, -128.0..128.0f64).prop_map(|(l, a, b)| LabColor::new(l, a, b))
}

const WORDS: [&str; 12] = [
    "light", "dark", "pale", "deep", "medium", "very", "blue", "green", "red", "grey", "rose",
    "sea",
];

fn description() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(WORDS.to_vec()), 1..5).prop_map(|w| w.join(" "))
}

#[test]
fn ciede2000_verification_pairs() {
    for (i, p) in support::CIEDE2000_PAIRS.iter().enumerate() {
        let x = LabColor::new(p[0], p[1], p[2]);
        let y = LabColor::new(p[3], p[4], p[5]);
        let d = delta_e_2000(x, y).value;
        assert!((d - p[6]).abs() < 1e-4, "pair {}: {d} vs {}", i + 1, p[6]);
        assert!(
            (delta_e_2000(y, x).value - d).abs() < 1e-9,
            "pair {} asymmetric",
            i + 1
        );
    }
}

proptest! {
    #[test]
    fn identity_for_every_rgb(c in rgb()) {
        let lab = rgb_to_lab(c);
        prop_assert_eq!(delta_e_76(lab, lab).value, 0.0);
        prop_assert_eq!(delta_e_2000(lab, lab).value, 0.0);
        prop_assert!((0.0..=100.0 + 1e-9).contains(&lab.l));
    }

    #[test]
    fn metrics_are_symmetric_and_non_negative(x in lab(), y in lab()) {
        for metric in [Metric::Cie76, Metric::Ciede2000] {
            let d = metric.between(x, y).value;
            prop_assert!(d >= 0.0);
            prop_assert!((d - metric.between(y, x).value).abs() < 1e-9);
        }
    }

    #[test]
    fn cie76_triangle_inequality(x in lab(), y in lab(), z in lab()) {
        let xz = delta_e_76(x, z).value;
        let bound = delta_e_76(x, y).value + delta_e_76(y, z).value;
        prop_assert!(xz <= bound + 1e-9);
    }

    #[test]
    fn mean_delta_e_matches_resummation(pairs in prop::collection::vec((rgb(), rgb()), 30)) {
        for metric in [Metric::Cie76, Metric::Ciede2000] {
            let mut sum = 0.0;
            for (p, q) in &pairs {
                sum += metric.between(rgb_to_lab(*p), rgb_to_lab(*q)).value;
            }
            let mean = mean_delta_e(&pairs, metric).unwrap();
            prop_assert!((mean - sum / 30.0).abs() < 1e-9);
        }
    }

    #[test]
    fn split_partitions_the_input(n in 2usize..80, ratio in 0.05..0.95f64, seed in any::<u64>()) {
        let data: Vec<ColorSample> = (0..n)
            .map(|i| ColorSample::new(format!("c{i}"), Rgb::new(i as u8, 1, 2)).unwrap())
            .collect();
        let s = split(&data, ratio, seed).unwrap();
        prop_assert_eq!(s.train.len(), (ratio * n as f64).round() as usize);
        let mut counts: HashMap<&str, i32> = HashMap::new();
        for c in &data {
            *counts.entry(&c.description).or_default() += 1;
        }
        for c in s.train.iter().chain(&s.test) {
            *counts.entry(&c.description).or_default() -= 1;
        }
        prop_assert!(counts.values().all(|&v| v == 0));
        prop_assert_eq!(s, split(&data, ratio, seed).unwrap());
    }

    #[test]
    fn encoding_round_trips_known_text(
        train in prop::collection::vec(description(), 1..10),
        max_len in 1usize..7,
    ) {
        let vocab = Vocabulary::fit_texts(train.iter().map(String::as_str), max_len).unwrap();
        prop_assert_eq!(&vocab, &Vocabulary::fit_texts(train.iter().map(String::as_str), max_len).unwrap());
        for text in &train {
            let enc = vocab.encode(text).unwrap();
            prop_assert_eq!(enc.len(), max_len);
            let tokens = tokenize(text);
            for (i, &id) in enc.ids().iter().enumerate() {
                prop_assert!((id as usize) < vocab.id_count());
                if id == PAD_ID {
                    prop_assert!(i >= tokens.len());
                } else {
                    prop_assert_ne!(id, UNK_ID);
                    prop_assert_eq!(vocab.token_of(id), Some(tokens[i].as_str()));
                }
            }
        }
    }

    #[test]
    fn encoding_never_grows_the_vocabulary(
        train in prop::collection::vec(description(), 1..5),
        test in prop::collection::vec("[a-z]{1,6}( [a-z]{1,6}){0,3}", 1..10),
    ) {
        let vocab = Vocabulary::fit_texts(train.iter().map(String::as_str), 6).unwrap();
        let before = vocab.clone();
        for text in &test {
            let enc = vocab.encode(text).unwrap();
            prop_assert!(enc.ids().iter().all(|&id| (id as usize) < vocab.id_count()));
        }
        prop_assert_eq!(vocab, before);
    }

    #[test]
    fn scalers_meet_their_ranges(rows in prop::collection::vec(prop::collection::vec(0u32..400, 6), 2..40)) {
        let rows: Vec<Vec<f64>> = rows.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect();
        for method in ScaleMethod::ALL {
            let p = ScalerParams::fit_values(method, &rows).unwrap();
            let out: Vec<Vec<f64>> = rows.iter().map(|r| p.transform_values(r).unwrap()).collect();
            for j in 0..6 {
                let col: Vec<f64> = out.iter().map(|r| r[j]).collect();
                let raw: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                let constant = raw.iter().all(|&v| v == raw[0]);
                match method {
                    ScaleMethod::MinMax => prop_assert!(col.iter().all(|v| (0.0..=1.0).contains(v))),
                    ScaleMethod::MaxAbs => prop_assert!(col.iter().all(|v| (-1.0..=1.0).contains(v))),
                    ScaleMethod::Standard if !constant => {
                        let n = col.len() as f64;
                        let mean = col.iter().sum::<f64>() / n;
                        let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
                        prop_assert!(mean.abs() < 1e-9);
                        prop_assert!((std - 1.0).abs() < 1e-9);
                    }
                    ScaleMethod::Robust if quantile(&raw, 0.75) > quantile(&raw, 0.25) => {
                        prop_assert!(quantile(&col, 0.5).abs() < 1e-9);
                    }
                    _ => {}
                }
            }
            prop_assert_eq!(&out, &rows.iter().map(|r| p.transform_values(r).unwrap()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn scaler_transform_is_affine(
        rows in prop::collection::vec(prop::collection::vec(-50.0..50.0f64, 3), 2..20),
        x in prop::collection::vec(-100.0..100.0f64, 3),
        y in prop::collection::vec(-100.0..100.0f64, 3),
        t in 0.0..1.0f64,
    ) {
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + t * (b - a)).collect();
        for method in ScaleMethod::ALL {
            let p = ScalerParams::fit_values(method, &rows).unwrap();
            let (fx, fy, fm) = (
                p.transform_values(&x).unwrap(),
                p.transform_values(&y).unwrap(),
                p.transform_values(&mid).unwrap(),
            );
            for j in 0..3 {
                let expected = fx[j] + t * (fy[j] - fx[j]);
                prop_assert!((fm[j] - expected).abs() < 1e-6 * (1.0 + expected.abs()));
            }
        }
    }

    #[test]
    fn predicted_rgb_stays_in_gamut(out in prop::array::uniform3(-1e6..1e6f64)) {
        let c = output_to_rgb(out);
        for (v, ch) in out.iter().zip(c.channels()) {
            let expected = (v * 255.0).clamp(0.0, 255.0).round();
            prop_assert_eq!(f64::from(ch), expected);
        }
    }

    #[test]
    fn parameter_count_matches_closed_form(dims in prop::collection::vec(1usize..20, 2..8), seed in any::<u64>()) {
        let config = NetworkConfig {
            activations: vec![Activation::Relu; dims.len() - 1],
            layer_dims: dims.clone(),
            learning_rate: 0.1,
            epochs: 1,
            batch_size: 1,
            seed,
            loss: Loss::Mse,
        };
        let expected: usize = (0..dims.len() - 1).map(|i| dims[i] * dims[i + 1] + dims[i + 1]).sum();
        prop_assert_eq!(parameter_count(&dims), expected);
        prop_assert_eq!(Network::init(config).unwrap().parameter_count(), expected);
    }
}

#[test]
fn analytic_gradients_match_finite_differences() {
    for seed in 0..100 {
        let (net, x, t) = support::random_case(seed);
        let err = support::gradient_check(&net, &x, &t);
        assert!(err < 1e-5, "seed {seed}: max relative error {err:e}");
    }
}
