//! Bundled reference data and synthetic-data generators used by the
//! experiments and the acceptance suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::linalg::Mat;
use crate::model::CovDataset;
use crate::real::Real;

/// The 82 galaxy velocities (km/s divided by 1000).
pub fn galaxy<T: Real>() -> Vec<T> {
    GALAXY_KM_S.iter().map(|&v| T::of(v as f64 / 1000.0)).collect()
}

const GALAXY_KM_S: [u32; 82] = [
    9172, 9350, 9483, 9558, 9775, 10227, 10406, 16084, 16170, 18419, 18552, 18600, 18927, 19052,
    19070, 19330, 19343, 19349, 19440, 19473, 19529, 19541, 19547, 19663, 19846, 19856, 19863,
    19914, 19918, 19973, 19989, 20166, 20175, 20179, 20196, 20215, 20221, 20415, 20629, 20795,
    20821, 20846, 20875, 20986, 21137, 21492, 21701, 21814, 21921, 21960, 22185, 22209, 22242,
    22249, 22314, 22374, 22495, 22746, 22747, 22888, 22914, 23206, 23241, 23263, 23484, 23538,
    23542, 23666, 23706, 23711, 24129, 24285, 24289, 24366, 24717, 24990, 25633, 26960, 26995,
    32065, 32789, 34279,
];

/// n = 100 draws from the eight-component benchmark mixture: component means
/// evenly spaced inside (-10, 10), common variance 0.05, items assigned round
/// robin. Returns the data and the generating labels.
pub fn simulate_eight_components<T: Real>(seed: u64) -> (Vec<T>, Vec<u32>) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let sd = T::of(0.05f64.sqrt());
    let means: Vec<T> = (1..=8).map(|k| T::of(-10.0 + 20.0 * k as f64 / 9.0)).collect();
    let mut y = Vec::with_capacity(100);
    let mut labels = Vec::with_capacity(100);
    for i in 0..100 {
        let c = i % 8;
        labels.push(c as u32);
        y.push(means[c] + sd * T::sample_std_normal(&mut rng));
    }
    (y, labels)
}

/// Self-generated covariate benchmark: three components with well-separated
/// intercepts, softmax gating on p = 2 standard-normal covariates, and
/// cluster-specific regression slopes.
pub struct GatingSim<T> {
    pub data: CovDataset<T>,
    pub labels: Vec<u32>,
}

pub fn simulate_gating_mixture<T: Real>(n: usize, seed: u64) -> GatingSim<T> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let beta: [[f64; 2]; 3] = [[0.0, 0.0], [1.5, -1.5], [-1.5, 1.5]];
    let mu = [-8.0, 0.0, 8.0];
    let gamma: [[f64; 2]; 3] = [[0.5, 0.0], [0.0, 0.5], [0.4, 0.4]];
    let sd = 0.5;
    let mut y = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let x = [
            T::sample_std_normal(&mut rng).to_f64(),
            T::sample_std_normal(&mut rng).to_f64(),
        ];
        let scores: Vec<f64> = beta.iter().map(|b| b[0] * x[0] + b[1] * x[1]).collect();
        let mx = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ws: Vec<f64> = scores.iter().map(|s| (s - mx).exp()).collect();
        let total: f64 = ws.iter().sum();
        let mut u = rng.random_range(0.0..1.0) * total;
        let mut c = 0;
        for (i, w) in ws.iter().enumerate() {
            u -= w;
            if u <= 0.0 {
                c = i;
                break;
            }
        }
        let mean = mu[c] + gamma[c][0] * x[0] + gamma[c][1] * x[1];
        let yi = mean + sd * T::sample_std_normal(&mut rng).to_f64();
        labels.push(c as u32);
        y.push(T::of(yi));
        rows.push(vec![T::of(x[0]), T::of(x[1])]);
    }
    let x = Mat::from_rows(&rows);
    let data = CovDataset::new(y, x, vec!["x1".into(), "x2".into()]).expect("valid design");
    GatingSim { data, labels }
}
