use crate::error::Result;
use crate::rng::{shuffle, Xoshiro256StarStar};

use super::{
    forward_backward, hinge_active, negative_weights, project, Batch, BridgeParams, TrainConfig,
};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Largest `|g_a − g_fd| / max(1e-12, |g_a| + |g_fd|)` over checked entries.
    pub max_rel_error: f64,
    pub checked: usize,
    /// Entries whose perturbation moved a hinge across its kink.
    pub excluded: usize,
}

fn entry(p: &mut BridgeParams<f64>, e: usize, n_text: usize) -> &mut f64 {
    if e < n_text {
        &mut p.text.as_mut_slice()[e]
    } else {
        &mut p.mol.as_mut_slice()[e - n_text]
    }
}

fn loss_and_active(
    params: &BridgeParams<f64>,
    batch: &Batch<f64>,
    cfg: &TrainConfig,
) -> Result<(f64, Vec<bool>)> {
    let bt = project(&params.text, &batch.text)?;
    let bm = project(&params.mol, &batch.mol)?;
    let weights = negative_weights::<f64>(&batch.targets, cfg.hard_negative_beta);
    let out = super::bridge_loss(&bt, &bm, &weights, cfg, &batch.targets)?;
    let active = if cfg.margin_weight > 0.0 {
        hinge_active(&bt.matmul_t(&bm)?, &batch.targets, cfg.margin)
    } else {
        Vec::new()
    };
    Ok((out.loss, active))
}

/// Compare analytic gradients to central differences on `samples` randomly
/// chosen weight entries (all of them if there are fewer).
pub fn grad_check(
    params: &BridgeParams<f64>,
    batch: &Batch<f64>,
    cfg: &TrainConfig,
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let weights = negative_weights::<f64>(&batch.targets, cfg.hard_negative_beta);
    let (_, mut grads) = forward_backward(params, batch, &weights, cfg)?;
    let (_, base_active) = loss_and_active(params, batch, cfg)?;

    let n_text = params.text.as_slice().len();
    let total = n_text + params.mol.as_slice().len();
    let mut entries: Vec<usize> = (0..total).collect();
    let mut rng = Xoshiro256StarStar::from_seed_u64(seed);
    shuffle(&mut entries, &mut rng);
    entries.truncate(samples.min(total));

    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        excluded: 0,
    };
    for e in entries {
        let analytic = *entry(&mut grads, e, n_text);
        let orig = *entry(&mut probe, e, n_text);
        *entry(&mut probe, e, n_text) = orig + eps;
        let (plus, active_plus) = loss_and_active(&probe, batch, cfg)?;
        *entry(&mut probe, e, n_text) = orig - eps;
        let (minus, active_minus) = loss_and_active(&probe, batch, cfg)?;
        *entry(&mut probe, e, n_text) = orig;
        if active_plus != base_active || active_minus != base_active {
            report.excluded += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * eps);
        let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-12);
        report.max_rel_error = report.max_rel_error.max(rel);
        report.checked += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridge::init_params;
    use crate::linalg::Matrix;

    fn batch(seed: u64) -> Batch<f64> {
        let mut rng = Xoshiro256StarStar::from_seed_u64(seed);
        let mol = Matrix::from_fn(6, 10, |_, _| rng.next_gaussian());
        let text = Matrix::from_fn(6, 7, |_, _| rng.next_gaussian());
        let targets = ["a", "a", "b", "b", "b", "c"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        Batch::new(mol, text, targets).unwrap()
    }

    #[test]
    fn analytic_matches_finite_difference() {
        let params = init_params::<f64>(5, 7, 10, 3);
        for (beta, lambda) in [(1.0, 0.0), (2.0, 0.0), (2.0, 1.0)] {
            let cfg = TrainConfig {
                temperature: 0.5,
                hard_negative_beta: beta,
                margin_weight: lambda,
                margin: 0.5,
                ..Default::default()
            };
            let r = grad_check(&params, &batch(1), &cfg, 1e-5, 200, 7).unwrap();
            assert_eq!(r.checked + r.excluded, 85, "{r:?}");
            assert!(r.max_rel_error < 1e-6, "beta {beta} lambda {lambda}: {r:?}");
        }
    }
}
