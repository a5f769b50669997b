//! Loss terms: Gaussian KL divergences, the combined objective, and the
//! trajectory MAE metric.

use super::model::{LatentDistribution, SvaeModel, TrainingStage};
use super::SvaeError;
use crate::dataio::window::MotionWindow;
use crate::nn::{NodeId, Tape};
use nalgebra::Vector3;
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

/// KL(N(mu, exp(lv)) || N(0, I)) = 1/2 sum(mu^2 + e^lv - 1 - lv).
pub fn gaussian_kl_standard(mu: &Array1<f64>, log_var: &Array1<f64>) -> f64 {
    assert_eq!(mu.len(), log_var.len(), "latent dims differ");
    0.5 * mu
        .iter()
        .zip(log_var.iter())
        .map(|(&m, &lv)| m * m + lv.exp() - 1.0 - lv)
        .sum::<f64>()
}

/// KL between two diagonal Gaussians:
/// 1/2 sum((lv2 - lv1) + e^(lv1 - lv2) + (mu1 - mu2)^2 e^(-lv2) - 1).
pub fn gaussian_kl_between(a: &LatentDistribution, b: &LatentDistribution) -> f64 {
    assert_eq!(a.dim(), b.dim(), "latent dims differ");
    0.5 * a
        .mu
        .iter()
        .zip(a.log_var.iter())
        .zip(b.mu.iter().zip(b.log_var.iter()))
        .map(|((&m1, &lv1), (&m2, &lv2))| {
            (lv2 - lv1) + (lv1 - lv2).exp() + (m1 - m2).powi(2) * (-lv2).exp() - 1.0
        })
        .sum::<f64>()
}

/// In-graph standard-normal KL, averaged over the batch rows of `mu`.
pub(crate) fn kl_standard_node(tape: &mut Tape, mu: NodeId, log_var: NodeId) -> NodeId {
    let mu_sq = tape.square(mu);
    let var = tape.exp(log_var);
    let a = tape.add(mu_sq, var);
    let b = tape.sub(a, log_var);
    let c = tape.add_scalar(b, -1.0);
    let per_window = tape.sum_cols(c);
    let mean = tape.mean_all(per_window);
    tape.scale(mean, 0.5)
}

/// In-graph KL between two diagonal Gaussians, batch mean.
pub(crate) fn kl_between_node(
    tape: &mut Tape,
    mu1: NodeId,
    lv1: NodeId,
    mu2: NodeId,
    lv2: NodeId,
) -> NodeId {
    let lv_diff = tape.sub(lv2, lv1);
    let neg = tape.scale(lv_diff, -1.0);
    let ratio = tape.exp(neg);
    let mu_diff = tape.sub(mu1, mu2);
    let mu_sq = tape.square(mu_diff);
    let neg_lv2 = tape.scale(lv2, -1.0);
    let inv_var2 = tape.exp(neg_lv2);
    let mahal = tape.mul(mu_sq, inv_var2);
    let a = tape.add(lv_diff, ratio);
    let b = tape.add(a, mahal);
    let c = tape.add_scalar(b, -1.0);
    let per_window = tape.sum_cols(c);
    let mean = tape.mean_all(per_window);
    tape.scale(mean, 0.5)
}

/// In-graph squared-l2 reconstruction, batch mean of per-row norms.
pub(crate) fn recon_node(tape: &mut Tape, pred: NodeId, target: NodeId) -> NodeId {
    let diff = tape.sub(pred, target);
    let sq = tape.square(diff);
    let per_window = tape.sum_cols(sq);
    tape.mean_all(per_window)
}

/// Reparameterized latent: z = mu + exp(lv / 2) * eps.
pub(crate) fn reparameterize(tape: &mut Tape, mu: NodeId, lv: NodeId, eps: NodeId) -> NodeId {
    let half = tape.scale(lv, 0.5);
    let sigma = tape.exp(half);
    let noise = tape.mul(sigma, eps);
    tape.add(mu, noise)
}

pub(crate) fn sample_eps<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

/// Single-window training objective. Stage 1 samples the latent from the
/// full-window encoder and regularizes it toward N(0, I); stage 2 samples
/// from the latent controller and aligns it with the (frozen) full
/// encoder's posterior. Returns (loss, recon, kl).
pub fn elbo_loss<R: Rng>(
    model: &SvaeModel,
    window: &MotionWindow,
    beta: f64,
    rng: &mut R,
) -> Result<(f64, f64, f64), SvaeError> {
    let mut tape = Tape::new();
    let full = tape.constant(SvaeModel::join_windows(window.h_full(), window.r_full()));
    let (mu_full, lv_full) = model.encode_full_nodes(&mut tape, full);
    let eps = tape.constant(sample_eps(rng, 1, model.config.latent_dim));

    let (z, kl) = match model.stage {
        TrainingStage::Stage1 => {
            let z = reparameterize(&mut tape, mu_full, lv_full, eps);
            let kl = kl_standard_node(&mut tape, mu_full, lv_full);
            (z, kl)
        }
        TrainingStage::Stage2 => {
            let lc_input = tape.constant(SvaeModel::join_windows_with_state(
                window.h_seen(),
                window.r_seen(),
                window.state,
            ));
            let (mu_lc, lv_lc, _) = model.encode_lc_nodes(&mut tape, lc_input);
            let z = reparameterize(&mut tape, mu_lc, lv_lc, eps);
            let kl = kl_between_node(&mut tape, mu_full, lv_full, mu_lc, lv_lc);
            (z, kl)
        }
    };

    let ctx = tape.constant(SvaeModel::context_row(window.h_seen(), window.r_seen()));
    let (pred, _) = model.decode_nodes(&mut tape, z, ctx);
    let target_v = window.target_next_ee();
    let target = tape.constant(Array2::from_shape_vec(
        (1, 3),
        vec![target_v.x, target_v.y, target_v.z],
    )
    .expect("3 elements"));
    let recon = recon_node(&mut tape, pred, target);
    let kl_scaled = tape.scale(kl, beta);
    let loss = tape.add(recon, kl_scaled);
    Ok((tape.scalar(loss), tape.scalar(recon), tape.scalar(kl)))
}

/// Mean absolute error over trajectory pairs: for each pair the mean over
/// frames of the mean absolute per-coordinate difference, averaged over
/// all pairs.
pub fn mae(
    generated: &[Vec<Vector3<f64>>],
    ground_truth: &[Vec<Vector3<f64>>],
) -> Result<f64, SvaeError> {
    if generated.len() != ground_truth.len() {
        return Err(SvaeError::ShapeMismatch {
            what: "mae trajectory count",
            expected: format!("{}", ground_truth.len()),
            got: format!("{}", generated.len()),
        });
    }
    if generated.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (g, t) in generated.iter().zip(ground_truth.iter()) {
        if g.len() != t.len() || g.is_empty() {
            return Err(SvaeError::ShapeMismatch {
                what: "mae trajectory length",
                expected: format!("{}", t.len().max(1)),
                got: format!("{}", g.len()),
            });
        }
        let per_frame: f64 = g
            .iter()
            .zip(t.iter())
            .map(|(a, b)| ((a.x - b.x).abs() + (a.y - b.y).abs() + (a.z - b.z).abs()) / 3.0)
            .sum::<f64>()
            / g.len() as f64;
        total += per_frame;
    }
    Ok(total / generated.len() as f64)
}
