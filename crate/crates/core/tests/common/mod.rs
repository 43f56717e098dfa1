#![allow(dead_code)]

pub mod oracle;

use brewsolve::datagen::{enumerate_simplex, split_dataset, Dataset};
use brewsolve::inverse::N_TARGETS;
use brewsolve::nn::{Layer, Network, Sequential};
use brewsolve::rng::Rng;
use brewsolve::{Chemistry, Granulometry, LabeledSample, MinMaxScaler, Provenance, Recipe};
use nalgebra::DMatrix;
use ndarray::Array2;
use rand_distr::StandardNormal;
use rand::{Rng as _, SeedableRng};

const W: [[f64; 8]; 4] = [
    [90.0, 300.0, 80.0, 4.0, 20.0, 90.0, 60.0, 20.0],
    [180.0, 420.0, 60.0, 9.0, 12.0, 60.0, 45.0, 90.0],
    [120.0, 250.0, 110.0, 2.0, 30.0, 140.0, 80.0, 40.0],
    [140.0, 500.0, 70.0, 14.0, 16.0, 110.0, 35.0, 150.0],
];
const TEMP_RATE: [f64; 8] = [0.9, 0.5, 0.2, 1.4, 0.7, 0.3, 1.1, 0.6];
const GRIND: [f64; 8] = [0.25, 0.1, -0.15, 0.3, 0.05, -0.2, 0.15, 0.35];

/// Smooth synthetic forward map: linear in the blend, exponential in
/// temperature, with a per-species grind response.
pub fn toy_chemistry(r: &Recipe) -> Chemistry {
    let g = r.granulometry.code() as f64 - 1.0;
    let mut y = [0.0; 8];
    for k in 0..8 {
        let blend: f64 = (0..4).map(|j| r.fractions[j] * W[j][k]).sum();
        y[k] = blend * (TEMP_RATE[k] * (r.temperature - 93.0) / 10.0).exp() * (1.0 + GRIND[k] * g);
    }
    Chemistry::new(y).unwrap()
}

pub fn toy_dataset(temperatures: &[f64], step: f64) -> Dataset {
    let mut samples = Vec::new();
    for &t in temperatures {
        for g in Granulometry::ALL {
            for f in enumerate_simplex(step).unwrap() {
                let r = Recipe::new(t, 9.0, g, f).unwrap();
                samples.push(LabeledSample::new(r, toy_chemistry(&r), Provenance::Grid));
            }
        }
    }
    Dataset::new(samples)
}

pub fn toy_split(temperatures: &[f64], step: f64, seed: u64) -> Dataset {
    split_dataset(&toy_dataset(temperatures, step), [0.7, 0.15, 0.15], seed).unwrap()
}

fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn recipe_scaler() -> MinMaxScaler {
    MinMaxScaler {
        min: vec![88.0, 9.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        max: vec![98.0, 9.0, 2.0, 1.0, 1.0, 1.0, 1.0],
    }
}

/// Two-layer surrogate 7 → 5 → 8.
pub fn toy_surrogate(seed: u64) -> Network {
    let mut g = rng(seed);
    let mut net = Network::new(
        7,
        Sequential::new(vec![Layer::dense(7, 5, &mut g), Layer::Sigmoid]),
        vec![Sequential::new(vec![Layer::dense(5, 8, &mut g)])],
    )
    .unwrap();
    net.input_scaler = Some(recipe_scaler());
    net.output_scaler = Some(MinMaxScaler {
        min: vec![0.0; 8],
        max: vec![10.0; 8],
    });
    net
}

/// Two-layer inverse 8 → 6 → heads.
pub fn toy_inverse(seed: u64) -> Network {
    let mut g = rng(seed);
    Network::new(
        8,
        Sequential::new(vec![Layer::dense(8, 6, &mut g), Layer::Sigmoid]),
        vec![
            Sequential::new(vec![Layer::dense(6, 4, &mut g), Layer::Softmax]),
            Sequential::new(vec![Layer::dense(6, 1, &mut g), Layer::Sigmoid]),
            Sequential::new(vec![Layer::dense(6, 1, &mut g), Layer::Sigmoid]),
            Sequential::new(vec![Layer::dense(6, 3, &mut g), Layer::Softmax]),
        ],
    )
    .unwrap()
}

pub fn random_targets(n: usize, seed: u64) -> Array2<f64> {
    let mut g = rng(seed);
    let mut t = Array2::zeros((n, N_TARGETS));
    for mut row in t.rows_mut() {
        let w: Vec<f64> = (0..4).map(|_| g.random_range(0.05..1.0)).collect();
        let sum: f64 = w.iter().sum();
        for k in 0..4 {
            row[k] = w[k] / sum;
        }
        row[4] = g.random_range(0.0..1.0);
        row[5] = 0.0;
        row[6 + g.random_range(0..3)] = 1.0;
        for k in 9..N_TARGETS {
            row[k] = g.random_range(0.0..1.0);
        }
    }
    t
}

pub fn gaussian(r: usize, c: usize, seed: u64) -> Array2<f64> {
    let mut g = rng(seed);
    Array2::from_shape_fn((r, c), |_| g.sample(StandardNormal))
}

/// Random `n × n` orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn orthogonal(n: usize, seed: u64) -> Array2<f64> {
    let a = gaussian(n, n, seed);
    let q = DMatrix::from_fn(n, n, |i, j| a[[i, j]]).qr().q();
    Array2::from_shape_fn((n, n), |(i, j)| q[(i, j)])
}

/// Points `p(t)` of a `dim`-parameter patch embedded isometrically in 8-D.
pub fn embedded_cloud(dim: usize, n: usize, noise: f64, seed: u64) -> Vec<Vec<f64>> {
    let q = orthogonal(8, seed);
    let mut g = rng(seed + 1);
    (0..n)
        .map(|_| {
            let t: Vec<f64> = (0..dim).map(|_| g.random_range(-1.0..1.0)).collect();
            // Gently curved coordinates in the first dim + 1 axes.
            let mut local = vec![0.0; 8];
            local[..dim].copy_from_slice(&t);
            local[dim] = 0.05 * t.iter().map(|v| v * v).sum::<f64>();
            (0..8)
                .map(|i| (0..8).map(|j| q[[i, j]] * local[j]).sum::<f64>() + noise * g.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect()
}
