//! Thin contrastive bridge between a molecule encoder and a text encoder.
//!
//! Two linear heads `W_T` (d × D_text) and `W_M` (d × D_mol) map frozen
//! encoder outputs into a shared space where rows are L2-normalized:
//! `B_T = norm(Z_T W_Tᵀ)`, `B_M = norm(X_M W_Mᵀ)`. Training minimizes the
//! symmetric InfoNCE over in-batch similarities `S = B_T B_Mᵀ / T`, with
//! same-target negatives up-weighted by `β` in the softmax denominator and a
//! hinge on `S_ii − S_ij` for same-target pairs (weight `λ`, margin `m`).
//!
//! All gradients are derived by hand; [`grad_check`] verifies them against
//! central finite differences at `f64`.

mod checkpoint;
mod gradcheck;
mod loss;
mod optim;
mod train;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, BRG1_MAGIC,
};
pub use gradcheck::{grad_check, GradCheckReport};
pub use loss::{bridge_loss, hinge_active, margin_penalty, LossOutput};
pub use optim::AdamW;
pub use train::{forward_backward, train, Batch, TrainHistory};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::Xoshiro256StarStar;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Shared embedding dimension `d`.
    pub dim: usize,
    pub temperature: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Denominator weight for same-target negatives; 1 disables it.
    pub hard_negative_beta: f64,
    pub margin: f64,
    /// Multiplier on the margin penalty; 0 disables it.
    pub margin_weight: f64,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 256,
            temperature: 0.07,
            lr: 1e-3,
            weight_decay: 1e-4,
            epochs: 100,
            batch_size: 512,
            hard_negative_beta: 2.0,
            margin: 0.15,
            margin_weight: 1.0,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    /// Plain symmetric InfoNCE: no hard-negative weighting, no margin.
    pub fn plain(self) -> Self {
        Self {
            hard_negative_beta: 1.0,
            margin_weight: 0.0,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad(format!("temperature must be > 0, got {}", self.temperature));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate must be > 0, got {}", self.lr));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!(
                "weight decay must be >= 0, got {}",
                self.weight_decay
            ));
        }
        if !(self.hard_negative_beta >= 1.0 && self.hard_negative_beta.is_finite()) {
            return bad(format!(
                "beta must be >= 1, got {}",
                self.hard_negative_beta
            ));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return bad(format!("margin must be >= 0, got {}", self.margin));
        }
        if !(self.margin_weight >= 0.0 && self.margin_weight.is_finite()) {
            return bad(format!(
                "margin weight must be >= 0, got {}",
                self.margin_weight
            ));
        }
        if self.batch_size < 2 {
            return bad(format!("batch size must be >= 2, got {}", self.batch_size));
        }
        if self.dim == 0 {
            return bad("projection dimension must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam betas must lie in [0, 1)".into());
        }
        if self.adam_eps <= 0.0 || self.adam_eps.is_nan() {
            return bad("Adam epsilon must be > 0".into());
        }
        Ok(())
    }
}

/// The two projection heads.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeParams<S> {
    /// `W_T`, d × D_text.
    pub text: Matrix<S>,
    /// `W_M`, d × D_mol.
    pub mol: Matrix<S>,
}

impl<S: Scalar> BridgeParams<S> {
    pub fn dim(&self) -> usize {
        self.text.rows()
    }

    pub fn text_input_dim(&self) -> usize {
        self.text.cols()
    }

    pub fn mol_input_dim(&self) -> usize {
        self.mol.cols()
    }

    pub fn cast<T: Scalar>(&self) -> BridgeParams<T> {
        BridgeParams {
            text: self.text.cast(),
            mol: self.mol.cast(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.text.all_finite() && self.mol.all_finite()
    }

    /// Shared-space embeddings of text rows.
    pub fn embed_text(&self, z: &Matrix<S>) -> Result<Matrix<S>> {
        project(&self.text, z)
    }

    /// Shared-space embeddings of molecule rows.
    pub fn embed_mol(&self, x: &Matrix<S>) -> Result<Matrix<S>> {
        project(&self.mol, x)
    }
}

/// Glorot-uniform heads: entries in `±sqrt(6 / (d + D_in))`, `W_T` drawn
/// before `W_M` from one xoshiro256** stream seeded with `seed`.
pub fn init_params<S: Scalar>(d: usize, d_text: usize, d_mol: usize, seed: u64) -> BridgeParams<S> {
    let mut rng = Xoshiro256StarStar::from_seed_u64(seed);
    let mut draw = |rows: usize, cols: usize| {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        Matrix::from_fn(rows, cols, |_, _| {
            S::of((2.0 * rng.next_f64() - 1.0) * bound)
        })
    };
    let text = draw(d, d_text);
    let mol = draw(d, d_mol);
    BridgeParams { text, mol }
}

/// Projected rows before normalization, with their norms.
#[derive(Debug, Clone)]
pub struct Projection<S> {
    pub unit: Matrix<S>,
    pub norms: Vec<S>,
}

/// `X Wᵀ` with each row L2-normalized, keeping norms for the backward pass.
pub fn project_with_norms<S: Scalar>(w: &Matrix<S>, x: &Matrix<S>) -> Result<Projection<S>> {
    if w.cols() != x.cols() {
        return Err(Error::Shape(format!(
            "projection expects {}-dimensional inputs, got {}",
            w.cols(),
            x.cols()
        )));
    }
    // X · (Wᵀ) skips zero inputs, which matters for sparse fingerprints
    let mut unit = x.matmul(&w.transpose())?;
    let mut norms = Vec::with_capacity(unit.rows());
    for i in 0..unit.rows() {
        let row = unit.row_mut(i);
        let norm = crate::linalg::l2_norm(row);
        if norm <= S::zero() || !norm.is_finite() {
            return Err(Error::Numeric(format!(
                "projected row {i} has norm {norm}; the input row is degenerate"
            )));
        }
        for v in row.iter_mut() {
            *v = *v / norm;
        }
        norms.push(norm);
    }
    Ok(Projection { unit, norms })
}

/// `norm(X Wᵀ)`: N × d, unit rows.
pub fn project<S: Scalar>(w: &Matrix<S>, x: &Matrix<S>) -> Result<Matrix<S>> {
    project_with_norms(w, x).map(|p| p.unit)
}

/// Denominator weights: 1 on the diagonal and across targets, `beta` for
/// distinct records sharing a target.
pub fn negative_weights<S: Scalar>(target_ids: &[String], beta: f64) -> Matrix<S> {
    let n = target_ids.len();
    let beta = S::of(beta);
    Matrix::from_fn(n, n, |i, j| {
        if i != j && target_ids[i] == target_ids[j] {
            beta
        } else {
            S::one()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_seeded_and_bounded() {
        let a: BridgeParams<f32> = init_params(256, 64, 2048, 5);
        let b: BridgeParams<f32> = init_params(256, 64, 2048, 5);
        let c: BridgeParams<f32> = init_params(256, 64, 2048, 6);
        assert_eq!(a, b);
        assert_ne!(a.mol, c.mol);
        let bound = (6.0f64 / 2304.0).sqrt();
        assert!((bound - 0.0510).abs() < 1e-4);
        let max = a.mol.as_slice().iter().fold(0.0f32, |m, v| m.max(v.abs()));
        assert!(f64::from(max) <= bound && f64::from(max) > 0.9 * bound);
        assert_eq!(a.text.shape(), (256, 64));
        assert_eq!(a.mol.shape(), (256, 2048));
    }

    #[test]
    fn projection_examples() {
        let w = Matrix::<f64>::identity(3);
        let x = Matrix::from_rows(&[[0.6, 0.8, 0.0]]).unwrap();
        assert_eq!(project(&w, &x).unwrap(), x);

        let w: Matrix<f64> = init_params(4, 3, 3, 1).text;
        let x = Matrix::from_rows(&[[1.0, -2.0, 0.5], [0.3, 0.1, 0.9]]).unwrap();
        let y = project(&w, &x).unwrap();
        for r in y.row_iter() {
            assert!((crate::linalg::l2_norm(r) - 1.0).abs() < 1e-12);
        }
        let scaled = Matrix::from_rows(&[[5.0, -10.0, 2.5], [0.3, 0.1, 0.9]]).unwrap();
        let ys = project(&w, &scaled).unwrap();
        for (a, b) in ys.row(0).iter().zip(y.row(0)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_row_is_numeric_error() {
        let w = Matrix::<f32>::identity(2);
        let x = Matrix::from_rows(&[[1.0f32, 0.0], [0.0, 0.0]]).unwrap();
        match project(&w, &x) {
            Err(Error::Numeric(msg)) => assert!(msg.contains("row 1")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            project(&w, &Matrix::zeros(1, 3)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn weight_matrix() {
        let ids: Vec<String> = ["a", "b", "a", "c"].iter().map(|s| s.to_string()).collect();
        let w: Matrix<f64> = negative_weights(&ids, 2.0);
        assert_eq!(w[(0, 2)], 2.0);
        assert_eq!(w[(2, 0)], 2.0);
        assert_eq!(w[(0, 0)], 1.0);
        assert_eq!(w[(0, 1)], 1.0);
        let ones: Matrix<f64> = negative_weights(&ids, 1.0);
        assert!(ones.as_slice().iter().all(|&v| v == 1.0));
        let distinct: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let w: Matrix<f64> = negative_weights(&distinct, 3.0);
        assert!(w.as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig {
                temperature: 0.0,
                ..Default::default()
            },
            TrainConfig {
                hard_negative_beta: 0.5,
                ..Default::default()
            },
            TrainConfig {
                margin: -0.1,
                ..Default::default()
            },
            TrainConfig {
                batch_size: 1,
                ..Default::default()
            },
            TrainConfig {
                lr: f64::NAN,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
        let plain = TrainConfig::default().plain();
        assert_eq!((plain.hard_negative_beta, plain.margin_weight), (1.0, 0.0));
    }
}
