use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

use super::TrainConfig;

/// Loss value, its parts, and gradients with respect to the unit-norm
/// embeddings.
#[derive(Debug, Clone)]
pub struct LossOutput<S> {
    pub loss: S,
    pub infonce: S,
    pub margin: S,
    pub grad_text: Matrix<S>,
    pub grad_mol: Matrix<S>,
}

/// Hinge `max(0, m − (S_ii − S_ij))` averaged over ordered same-target
/// pairs `i ≠ j`. Returns the value and `∂/∂S`; the kink gets gradient 0.
pub fn margin_penalty<S: Scalar>(s: &Matrix<S>, target_ids: &[String], m: f64) -> (S, Matrix<S>) {
    let n = s.rows();
    let m = S::of(m);
    let mut grad = Matrix::zeros(n, n);
    let pairs = same_target_pairs(target_ids);
    if pairs.is_empty() {
        return (S::zero(), grad);
    }
    let inv = S::one() / S::of(pairs.len() as f64);
    let mut total = S::zero();
    for (i, j) in pairs {
        let slack = m - (s[(i, i)] - s[(i, j)]);
        if slack > S::zero() {
            total = total + slack;
            grad[(i, i)] = grad[(i, i)] - inv;
            grad[(i, j)] = grad[(i, j)] + inv;
        }
    }
    (total * inv, grad)
}

/// Which hinge terms are active, in pair order; used to spot kinks.
pub fn hinge_active<S: Scalar>(s: &Matrix<S>, target_ids: &[String], m: f64) -> Vec<bool> {
    let m = S::of(m);
    same_target_pairs(target_ids)
        .into_iter()
        .map(|(i, j)| m - (s[(i, i)] - s[(i, j)]) > S::zero())
        .collect()
}

fn same_target_pairs(target_ids: &[String]) -> Vec<(usize, usize)> {
    let n = target_ids.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && target_ids[i] == target_ids[j] {
                out.push((i, j));
            }
        }
    }
    out
}

/// One softmax cross-entropy row with weighted denominator.
///
/// `logit(j)` is the similarity over temperature and `weight(j)` the
/// denominator weight; writes `∂loss/∂logit` scaled by `scale` through `emit`.
fn weighted_ce_row<S: Scalar>(
    n: usize,
    target: usize,
    logit: impl Fn(usize) -> S,
    weight: impl Fn(usize) -> S,
    scale: S,
    mut emit: impl FnMut(usize, S),
) -> S {
    let z: Vec<S> = (0..n).map(|j| logit(j) + weight(j).ln()).collect();
    let max = z.iter().copied().fold(S::neg_infinity(), S::max);
    let sum: S = z.iter().map(|&v| (v - max).exp()).sum();
    let lse = max + sum.ln();
    for (j, &zj) in z.iter().enumerate() {
        let p = (zj - lse).exp();
        let d = if j == target { p - S::one() } else { p };
        emit(j, d * scale);
    }
    lse - logit(target)
}

/// Symmetric weighted InfoNCE plus margin penalty on a batch of unit-norm
/// embeddings, with analytic gradients.
///
/// Text→molecule rows use `weights[i][j]`; molecule→text rows use the
/// transpose, so swapping the modalities together with transposing the
/// weights swaps the two directions.
pub fn bridge_loss<S: Scalar>(
    b_text: &Matrix<S>,
    b_mol: &Matrix<S>,
    weights: &Matrix<S>,
    cfg: &TrainConfig,
    target_ids: &[String],
) -> Result<LossOutput<S>> {
    let n = b_text.rows();
    if b_mol.rows() != n || weights.shape() != (n, n) || target_ids.len() != n {
        return Err(Error::Shape(format!(
            "bridge loss on {n} text rows, {} molecule rows, {:?} weights, {} targets",
            b_mol.rows(),
            weights.shape(),
            target_ids.len()
        )));
    }
    if n == 0 {
        return Err(Error::Shape("empty batch".into()));
    }
    let s = b_text.matmul_t(b_mol)?;
    let inv_t = S::one() / S::of(cfg.temperature);
    // each direction is a mean over n rows, the two directions averaged
    let scale = S::of(0.5 / n as f64) * inv_t;

    let mut grad_s = Matrix::zeros(n, n);
    let mut text_to_mol = S::zero();
    let mut mol_to_text = S::zero();
    for i in 0..n {
        text_to_mol = text_to_mol
            + weighted_ce_row(
                n,
                i,
                |j| s[(i, j)] * inv_t,
                |j| weights[(i, j)],
                scale,
                |j, g| grad_s[(i, j)] = grad_s[(i, j)] + g,
            );
    }
    for i in 0..n {
        mol_to_text = mol_to_text
            + weighted_ce_row(
                n,
                i,
                |j| s[(j, i)] * inv_t,
                |j| weights[(j, i)],
                scale,
                |j, g| grad_s[(j, i)] = grad_s[(j, i)] + g,
            );
    }
    let nn = S::of(n as f64);
    let half = S::of(0.5);
    let infonce = half * (text_to_mol / nn + mol_to_text / nn);

    let lambda = S::of(cfg.margin_weight);
    let mut margin = S::zero();
    if cfg.margin_weight > 0.0 {
        let (value, g) = margin_penalty(&s, target_ids, cfg.margin);
        margin = value;
        for (a, b) in grad_s.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *a = *a + lambda * *b;
        }
    }
    let loss = infonce + lambda * margin;
    if !loss.is_finite() || !grad_s.all_finite() {
        return Err(Error::Numeric(format!(
            "bridge loss is not finite ({loss})"
        )));
    }

    let grad_text = grad_s.matmul(b_mol)?;
    let grad_mol = grad_s.t_matmul(b_text)?;
    Ok(LossOutput {
        loss,
        infonce,
        margin,
        grad_text,
        grad_mol,
    })
}
