use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{shuffle, Xoshiro256StarStar};
use crate::scalar::Scalar;

use super::{
    bridge_loss, init_params, negative_weights, project_with_norms, AdamW, BridgeParams,
    LossOutput, Projection, TrainConfig,
};

/// Aligned rows: molecule `i` pairs with text `i`.
#[derive(Debug, Clone)]
pub struct Batch<S> {
    pub mol: Matrix<S>,
    pub text: Matrix<S>,
    pub targets: Vec<String>,
}

impl<S: Scalar> Batch<S> {
    pub fn new(mol: Matrix<S>, text: Matrix<S>, targets: Vec<String>) -> Result<Self> {
        if mol.rows() != text.rows() || mol.rows() != targets.len() {
            return Err(Error::Shape(format!(
                "unaligned batch: {} molecule rows, {} text rows, {} targets",
                mol.rows(),
                text.rows(),
                targets.len()
            )));
        }
        Ok(Self { mol, text, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            mol: self.mol.select_rows(indices),
            text: self.text.select_rows(indices),
            targets: indices.iter().map(|&i| self.targets[i].clone()).collect(),
        }
    }
}

/// Per-epoch means over batches, weighted by batch size.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub loss: Vec<f64>,
    pub infonce: Vec<f64>,
    pub margin: Vec<f64>,
}

impl TrainHistory {
    pub fn epochs(&self) -> usize {
        self.loss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loss.is_empty()
    }

    /// Final epoch no worse than the first. Vacuously true when empty.
    pub fn improved(&self) -> bool {
        match (self.loss.first(), self.loss.last()) {
            (Some(first), Some(last)) => last <= first,
            _ => true,
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("epoch,loss,infonce,margin\n");
        for e in 0..self.loss.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e + 1,
                self.loss[e],
                self.infonce[e],
                self.margin[e]
            ));
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}

fn backprop_head<S: Scalar>(
    proj: &Projection<S>,
    grad_unit: &Matrix<S>,
    x: &Matrix<S>,
) -> Result<Matrix<S>> {
    // d/dp of p/|p| applied to g: (g - u (u·g)) / |p|
    let mut dp = grad_unit.clone();
    for i in 0..dp.rows() {
        let u = proj.unit.row(i);
        let row = dp.row_mut(i);
        let ug = crate::linalg::dot(u, row);
        let inv = S::one() / proj.norms[i];
        for (g, &uk) in row.iter_mut().zip(u) {
            *g = (*g - uk * ug) * inv;
        }
    }
    // dW = dPᵀ X, formed as (Xᵀ dP)ᵀ to skip zero inputs
    Ok(x.t_matmul(&dp)?.transpose())
}

/// Loss on one batch and its gradient with respect to both heads.
pub fn forward_backward<S: Scalar>(
    params: &BridgeParams<S>,
    batch: &Batch<S>,
    weights: &Matrix<S>,
    cfg: &TrainConfig,
) -> Result<(LossOutput<S>, BridgeParams<S>)> {
    let pt = project_with_norms(&params.text, &batch.text)?;
    let pm = project_with_norms(&params.mol, &batch.mol)?;
    let out = bridge_loss(&pt.unit, &pm.unit, weights, cfg, &batch.targets)?;
    let grads = BridgeParams {
        text: backprop_head(&pt, &out.grad_text, &batch.text)?,
        mol: backprop_head(&pm, &out.grad_mol, &batch.mol)?,
    };
    if !grads.all_finite() {
        return Err(Error::Numeric("non-finite parameter gradient".into()));
    }
    Ok((out, grads))
}

/// Fit both heads with AdamW on in-batch negatives.
///
/// Each epoch reshuffles the rows with Fisher-Yates; a trailing batch with a
/// single row is dropped.
pub fn train<S: Scalar>(
    mol_x: &Matrix<S>,
    text_z: &Matrix<S>,
    target_ids: &[String],
    cfg: &TrainConfig,
) -> Result<(BridgeParams<S>, TrainHistory)> {
    cfg.validate()?;
    let data = Batch::new(mol_x.clone(), text_z.clone(), target_ids.to_vec())?;
    let n = data.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "training needs at least 2 pairs, got {n}"
        )));
    }
    let mut params = init_params::<S>(cfg.dim, text_z.cols(), mol_x.cols(), cfg.seed);
    let mut history = TrainHistory::default();
    if cfg.epochs == 0 {
        return Ok((params, history));
    }
    let mut opt = AdamW::new(&params, cfg);
    let mut rng = Xoshiro256StarStar::derived(cfg.seed, 1);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..cfg.epochs {
        shuffle(&mut order, &mut rng);
        let (mut loss, mut infonce, mut margin, mut seen) = (0.0, 0.0, 0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            let batch = data.select(chunk);
            let weights = negative_weights::<S>(&batch.targets, cfg.hard_negative_beta);
            let (out, grads) = forward_backward(&params, &batch, &weights, cfg)?;
            opt.step(&mut params, &grads);
            if !params.all_finite() {
                return Err(Error::Numeric(
                    "parameters diverged to non-finite values".into(),
                ));
            }
            let w = chunk.len() as f64;
            loss += out.loss.as_f64() * w;
            infonce += out.infonce.as_f64() * w;
            margin += out.margin.as_f64() * w;
            seen += chunk.len();
        }
        let seen = seen as f64;
        history.loss.push(loss / seen);
        history.infonce.push(infonce / seen);
        history.margin.push(margin / seen);
    }
    Ok((params, history))
}
