//! Independent oracles shared by the integration and acceptance suites.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tenn_core::network::{loss_mse, Activation, Loss, Network, NetworkConfig};

/// Published CIEDE2000 verification pairs: `(L1, a1, b1, L2, a2, b2, ΔE00)`.
pub const CIEDE2000_PAIRS: [[f64; 7]; 34] = [
    [50.0000, 2.6772, -79.7751, 50.0000, 0.0000, -82.7485, 2.0425],
    [50.0000, 3.1571, -77.2803, 50.0000, 0.0000, -82.7485, 2.8615],
    [50.0000, 2.8361, -74.0200, 50.0000, 0.0000, -82.7485, 3.4412],
    [
        50.0000, -1.3802, -84.2814, 50.0000, 0.0000, -82.7485, 1.0000,
    ],
    [
        50.0000, -1.1848, -84.8006, 50.0000, 0.0000, -82.7485, 1.0000,
    ],
    [
        50.0000, -0.9009, -85.5211, 50.0000, 0.0000, -82.7485, 1.0000,
    ],
    [50.0000, 0.0000, 0.0000, 50.0000, -1.0000, 2.0000, 2.3669],
    [50.0000, -1.0000, 2.0000, 50.0000, 0.0000, 0.0000, 2.3669],
    [50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0009, 7.1792],
    [50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0010, 7.1792],
    [50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0011, 7.2195],
    [50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0012, 7.2195],
    [50.0000, -0.0010, 2.4900, 50.0000, 0.0009, -2.4900, 4.8045],
    [50.0000, -0.0010, 2.4900, 50.0000, 0.0010, -2.4900, 4.8045],
    [50.0000, -0.0010, 2.4900, 50.0000, 0.0011, -2.4900, 4.7461],
    [50.0000, 2.5000, 0.0000, 50.0000, 0.0000, -2.5000, 4.3065],
    [50.0000, 2.5000, 0.0000, 73.0000, 25.0000, -18.0000, 27.1492],
    [50.0000, 2.5000, 0.0000, 61.0000, -5.0000, 29.0000, 22.8977],
    [50.0000, 2.5000, 0.0000, 56.0000, -27.0000, -3.0000, 31.9030],
    [50.0000, 2.5000, 0.0000, 58.0000, 24.0000, 15.0000, 19.4535],
    [50.0000, 2.5000, 0.0000, 50.0000, 3.1736, 0.5854, 1.0000],
    [50.0000, 2.5000, 0.0000, 50.0000, 3.2972, 0.0000, 1.0000],
    [50.0000, 2.5000, 0.0000, 50.0000, 1.8634, 0.5757, 1.0000],
    [50.0000, 2.5000, 0.0000, 50.0000, 3.2592, 0.3350, 1.0000],
    [
        60.2574, -34.0099, 36.2677, 60.4626, -34.1751, 39.4387, 1.2644,
    ],
    [
        63.0109, -31.0961, -5.8663, 62.8187, -29.7946, -4.0864, 1.2630,
    ],
    [61.2901, 3.7196, -5.3901, 61.4292, 2.2480, -4.9620, 1.8731],
    [35.0831, -44.1164, 3.7933, 35.0232, -40.0716, 1.5901, 1.8645],
    [
        22.7233, 20.0904, -46.6940, 23.0331, 14.9730, -42.5619, 2.0373,
    ],
    [36.4612, 47.8580, 18.3852, 36.2715, 50.5065, 21.2231, 1.4146],
    [90.8027, -2.0831, 1.4410, 91.1528, -1.6435, 0.0447, 1.4441],
    [90.9257, -0.5406, -0.9208, 88.6381, -0.8985, -0.7239, 1.5381],
    [6.7747, -0.2908, -2.4247, 5.8714, -0.0985, -2.2286, 0.6377],
    [2.0776, 0.0795, -1.1350, 0.9033, -0.0636, -0.5514, 0.9082],
];

pub const FD_STEP: f64 = 1e-5;

/// Gradients below this magnitude are compared absolutely; float round-off in
/// the finite difference (~1e-11) would otherwise dominate the ratio.
pub const GRAD_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_FLOOR)
}

/// Central finite differences of the MSE loss w.r.t. every weight and bias,
/// in the same layout as `Gradients`.
pub fn numeric_gradients(
    net: &Network,
    x: &[f64],
    target: &[f64],
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let loss = |n: &Network| loss_mse(&n.forward(x).unwrap(), target);
    let mut probe = net.clone();
    let mut gw = Vec::new();
    let mut gb = Vec::new();
    for li in 0..net.layers().len() {
        let mut w = Vec::new();
        for k in 0..net.layers()[li].weights().len() {
            let orig = probe.layers()[li].weights()[k];
            probe.layers_mut()[li].weights_mut()[k] = orig + FD_STEP;
            let up = loss(&probe);
            probe.layers_mut()[li].weights_mut()[k] = orig - FD_STEP;
            let down = loss(&probe);
            probe.layers_mut()[li].weights_mut()[k] = orig;
            w.push((up - down) / (2.0 * FD_STEP));
        }
        let mut b = Vec::new();
        for k in 0..net.layers()[li].biases().len() {
            let orig = probe.layers()[li].biases()[k];
            probe.layers_mut()[li].biases_mut()[k] = orig + FD_STEP;
            let up = loss(&probe);
            probe.layers_mut()[li].biases_mut()[k] = orig - FD_STEP;
            let down = loss(&probe);
            probe.layers_mut()[li].biases_mut()[k] = orig;
            b.push((up - down) / (2.0 * FD_STEP));
        }
        gw.push(w);
        gb.push(b);
    }
    (gw, gb)
}

/// Random network of 1..=4 weight layers with widths in 1..=8, mixed activations,
/// random non-zero biases, plus a random input and target.
pub fn random_case(seed: u64) -> (Network, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_layers = rng.random_range(1..=4);
    let dims: Vec<usize> = (0..=n_layers).map(|_| rng.random_range(1..=8)).collect();
    let activations = (0..n_layers)
        .map(|_| {
            if rng.random_bool(0.6) {
                Activation::Relu
            } else {
                Activation::Linear
            }
        })
        .collect();
    let config = NetworkConfig {
        layer_dims: dims.clone(),
        activations,
        learning_rate: 0.1,
        epochs: 1,
        batch_size: 1,
        seed,
        loss: Loss::Mse,
    };
    let mut net = Network::init(config).unwrap();
    for layer in net.layers_mut() {
        for b in layer.biases_mut() {
            *b = rng.random_range(-0.5..0.5);
        }
    }
    let x = (0..dims[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
    let t = (0..dims[n_layers])
        .map(|_| rng.random_range(0.0..1.0))
        .collect();
    (net, x, t)
}

/// Max relative error between analytic and numeric gradients over all parameters.
pub fn gradient_check(net: &Network, x: &[f64], target: &[f64]) -> f64 {
    let (_, analytic) = net.backward(x, target).unwrap();
    let (nw, nb) = numeric_gradients(net, x, target);
    let mut worst: f64 = 0.0;
    for (a, n) in analytic.weights.iter().flatten().zip(nw.iter().flatten()) {
        worst = worst.max(relative_error(*a, *n));
    }
    for (a, n) in analytic.biases.iter().flatten().zip(nb.iter().flatten()) {
        worst = worst.max(relative_error(*a, *n));
    }
    worst
}
