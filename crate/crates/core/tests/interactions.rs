// SPDX-License-Identifier: MIT OR Apache-2.0

mod oracles;

use crossmetric::interactions::{
    feature_interactions_fast, feature_interactions_naive, temporal_interactions_fast,
    temporal_interactions_naive,
};
use crossmetric::matrix::Matrix;
use crossmetric::CollabMachineParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use oracles::{direct_feature, direct_temporal, rel_diff};

const METRICS: [usize; 7] = [1, 2, 4, 8, 16, 32, 64];
const WINDOWS: [usize; 5] = [1, 4, 16, 64, 256];

fn assert_close(a: &[f64], b: &[f64], what: &str) {
    assert_eq!(a.len(), b.len());
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        assert!(rel_diff(*x, *y) <= 1e-9, "{what}[{i}]: {x} vs {y}");
    }
}

#[test]
fn kernels_agree_with_direct_sums_across_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for (m, omega) in METRICS
        .iter()
        .flat_map(|&m| WINDOWS.iter().map(move |&w| (m, w)))
    {
        for _ in 0..3 {
            let p = CollabMachineParams::<f64>::init(omega, m, &mut rng);
            let x = Matrix::from_vec(
                omega,
                m,
                (0..omega * m)
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect(),
            )
            .unwrap();
            let what = format!("m={m} omega={omega}");
            let hf = direct_feature(&x, &p);
            let ht = direct_temporal(&x, &p);
            assert_close(&feature_interactions_fast(&x, &p).unwrap(), &hf, &what);
            assert_close(&feature_interactions_naive(&x, &p).unwrap(), &hf, &what);
            assert_close(&temporal_interactions_fast(&x, &p).unwrap(), &ht, &what);
            assert_close(&temporal_interactions_naive(&x, &p).unwrap(), &ht, &what);
        }
    }
}

#[test]
fn pooled_value_is_the_sum_of_the_vector() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (omega, m) = (6, 3);
    let p = CollabMachineParams::<f64>::init(omega, m, &mut rng);
    let x = Matrix::from_vec(
        omega,
        m,
        (0..omega * m).map(|_| rng.random_range(0.0..1.0)).collect(),
    )
    .unwrap();
    // Scalar form: one bias, then per-timestamp linear and pair terms summed.
    let mut scalar = p.feat_bias;
    for r in 0..omega {
        for i in 0..m {
            scalar += p.feat_w[i] * x[(r, i)];
            for j in (i + 1)..m {
                scalar += x[(r, i)] * x[(r, j)] * p.feat_v[i] * p.feat_v[j];
            }
        }
    }
    let h_f = feature_interactions_fast(&x, &p).unwrap();
    let summed: f64 = h_f.iter().sum::<f64>() - (omega as f64 - 1.0) * p.feat_bias;
    assert!(rel_diff(summed, scalar) < 1e-12);
}
