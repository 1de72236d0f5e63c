use crate::linalg::Matrix;
use crate::scalar::Scalar;

use super::{BridgeParams, TrainConfig};

/// Adam with decoupled weight decay, applied to the weights only.
#[derive(Debug, Clone)]
pub struct AdamW<S> {
    lr: S,
    weight_decay: S,
    beta1: S,
    beta2: S,
    eps: S,
    step: i32,
    m: BridgeParams<S>,
    v: BridgeParams<S>,
}

impl<S: Scalar> AdamW<S> {
    pub fn new(params: &BridgeParams<S>, cfg: &TrainConfig) -> Self {
        let zeros = || BridgeParams {
            text: Matrix::zeros(params.text.rows(), params.text.cols()),
            mol: Matrix::zeros(params.mol.rows(), params.mol.cols()),
        };
        Self {
            lr: S::of(cfg.lr),
            weight_decay: S::of(cfg.weight_decay),
            beta1: S::of(cfg.adam_beta1),
            beta2: S::of(cfg.adam_beta2),
            eps: S::of(cfg.adam_eps),
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps(&self) -> i32 {
        self.step
    }

    pub fn step(&mut self, params: &mut BridgeParams<S>, grads: &BridgeParams<S>) {
        self.step += 1;
        let bc1 = S::one() - self.beta1.powi(self.step);
        let bc2 = S::one() - self.beta2.powi(self.step);
        let h = Hyper {
            lr: self.lr,
            decay: S::one() - self.lr * self.weight_decay,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            bc1,
            bc2,
        };
        h.update(
            &mut params.text,
            &grads.text,
            &mut self.m.text,
            &mut self.v.text,
        );
        h.update(
            &mut params.mol,
            &grads.mol,
            &mut self.m.mol,
            &mut self.v.mol,
        );
    }
}

struct Hyper<S> {
    lr: S,
    decay: S,
    beta1: S,
    beta2: S,
    eps: S,
    bc1: S,
    bc2: S,
}

impl<S: Scalar> Hyper<S> {
    fn update(&self, w: &mut Matrix<S>, g: &Matrix<S>, m: &mut Matrix<S>, v: &mut Matrix<S>) {
        let one = S::one();
        let it = w
            .as_mut_slice()
            .iter_mut()
            .zip(g.as_slice())
            .zip(m.as_mut_slice().iter_mut().zip(v.as_mut_slice()));
        for ((w, &g), (m, v)) in it {
            *m = self.beta1 * *m + (one - self.beta1) * g;
            *v = self.beta2 * *v + (one - self.beta2) * g * g;
            let m_hat = *m / self.bc1;
            let v_hat = *v / self.bc2;
            *w = *w * self.decay - self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}
