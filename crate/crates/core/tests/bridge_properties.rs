mod common;

use chembridge::bridge::{
    bridge_loss, decode_checkpoint, encode_checkpoint, grad_check, init_params, negative_weights,
    project, train, Batch,
};
use chembridge::{Matrix, TrainConfig, Xoshiro256StarStar};
use common::{gaussian_matrix, unit_rows};

/// Symmetric cross-entropy written directly from the definition, no weights.
fn plain_infonce(bt: &Matrix<f64>, bm: &Matrix<f64>, t: f64) -> f64 {
    let n = bt.rows();
    let sim = |i: usize, j: usize| (0..bt.cols()).map(|k| bt[(i, k)] * bm[(j, k)]).sum::<f64>() / t;
    let mut rows = 0.0;
    let mut cols = 0.0;
    for i in 0..n {
        let denom_r: f64 = (0..n).map(|j| sim(i, j).exp()).sum();
        let denom_c: f64 = (0..n).map(|j| sim(j, i).exp()).sum();
        rows += -(sim(i, i).exp() / denom_r).ln();
        cols += -(sim(i, i).exp() / denom_c).ln();
    }
    0.5 * (rows / n as f64 + cols / n as f64)
}

fn targets(n: usize, groups: usize) -> Vec<String> {
    (0..n).map(|i| format!("T{}", i % groups)).collect()
}

fn cfg(beta: f64, lambda: f64) -> TrainConfig {
    TrainConfig {
        temperature: 0.5,
        hard_negative_beta: beta,
        margin_weight: lambda,
        ..Default::default()
    }
}

#[test]
fn unweighted_loss_matches_plain_infonce() {
    let mut rng = Xoshiro256StarStar::from_seed_u64(11);
    for trial in 0..100 {
        let n = 2 + trial % 9;
        let bt = unit_rows(&gaussian_matrix(&mut rng, n, 6, 1.0));
        let bm = unit_rows(&gaussian_matrix(&mut rng, n, 6, 1.0));
        let t = targets(n, 3);
        let out = bridge_loss(&bt, &bm, &negative_weights(&t, 1.0), &cfg(1.0, 0.0), &t).unwrap();
        let expected = plain_infonce(&bt, &bm, 0.5);
        assert!(
            (out.loss - expected).abs() < 1e-12,
            "trial {trial}: {} vs {expected}",
            out.loss
        );
    }
}

#[test]
fn swapping_modalities_swaps_directions() {
    let mut rng = Xoshiro256StarStar::from_seed_u64(12);
    for _ in 0..20 {
        let bt = unit_rows(&gaussian_matrix(&mut rng, 7, 5, 1.0));
        let bm = unit_rows(&gaussian_matrix(&mut rng, 7, 5, 1.0));
        let t = targets(7, 2);
        // arbitrary positive weights, not symmetric
        let w = Matrix::from_fn(7, 7, |i, j| {
            if i == j {
                1.0
            } else {
                1.0 + ((i * 7 + j) % 5) as f64
            }
        });
        let a = bridge_loss(&bt, &bm, &w, &cfg(2.0, 0.0), &t).unwrap();
        let b = bridge_loss(&bm, &bt, &w.transpose(), &cfg(2.0, 0.0), &t).unwrap();
        assert!((a.loss - b.loss).abs() < 1e-12);
        for (x, y) in a.grad_text.as_slice().iter().zip(b.grad_mol.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn input_scaling_leaves_loss_unchanged() {
    let mut rng = Xoshiro256StarStar::from_seed_u64(13);
    let p = init_params::<f64>(8, 10, 12, 4);
    let z = gaussian_matrix(&mut rng, 6, 10, 1.0);
    let x = gaussian_matrix(&mut rng, 6, 12, 1.0);
    let t = targets(6, 2);
    let c = cfg(2.0, 1.0);
    let w = negative_weights(&t, 2.0);
    let base = bridge_loss(
        &project(&p.text, &z).unwrap(),
        &project(&p.mol, &x).unwrap(),
        &w,
        &c,
        &t,
    )
    .unwrap();
    let mut zs = z.clone();
    zs.row_mut(3).iter_mut().for_each(|v| *v *= 37.5);
    let mut xs = x.clone();
    xs.row_mut(0).iter_mut().for_each(|v| *v *= 0.01);
    let scaled = bridge_loss(
        &project(&p.text, &zs).unwrap(),
        &project(&p.mol, &xs).unwrap(),
        &w,
        &c,
        &t,
    )
    .unwrap();
    assert!((base.loss - scaled.loss).abs() < 1e-12);
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = Xoshiro256StarStar::from_seed_u64(14);
    for (beta, lambda) in [(1.0, 0.0), (2.0, 0.0), (2.0, 1.0), (4.0, 0.5)] {
        let p = init_params::<f64>(16, 32, 48, 1);
        let batch = Batch::new(
            gaussian_matrix(&mut rng, 8, 48, 1.0),
            gaussian_matrix(&mut rng, 8, 32, 1.0),
            targets(8, 3),
        )
        .unwrap();
        let c = TrainConfig {
            temperature: 0.07,
            hard_negative_beta: beta,
            margin_weight: lambda,
            margin: 0.15,
            ..Default::default()
        };
        let r = grad_check(&p, &batch, &c, 1e-5, 300, 3).unwrap();
        assert!(r.checked + r.excluded == 300);
        assert!(r.max_rel_error < 1e-6, "beta {beta} lambda {lambda}: {r:?}");
    }
}

#[test]
fn training_is_reproducible_and_checkpoints_exactly() {
    let mut rng = Xoshiro256StarStar::from_seed_u64(15);
    let x = common::binary_matrix(&mut rng, 30, 40, 0.2);
    let z = gaussian_matrix(&mut rng, 30, 12, 1.0).cast::<f32>();
    let t = targets(30, 6);
    let c = TrainConfig {
        dim: 8,
        epochs: 5,
        batch_size: 8,
        seed: 3,
        ..Default::default()
    };
    let (a, ha) = train(&x, &z, &t, &c).unwrap();
    let (b, hb) = train(&x, &z, &t, &c).unwrap();
    assert_eq!(a, b);
    assert_eq!(ha, hb);
    let other = TrainConfig {
        seed: 4,
        ..c.clone()
    };
    assert_ne!(train(&x, &z, &t, &other).unwrap().0, a);
    let bytes = encode_checkpoint(&a, &c).unwrap();
    assert_eq!(decode_checkpoint(&bytes).unwrap(), (a, c));
}
