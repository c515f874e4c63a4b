//! Finite-difference verification of the analytic gradients.

use crate::rng::Rng;
use crate::{Error, Result};

use super::{
    backward, forward_train_frozen, init_params, mse_loss, ModelConfig, ModelParams, Real,
};

/// Central-difference step.
const FD_STEP: f64 = 1e-5;

/// Coordinates whose analytic and numeric gradients are both below this
/// magnitude are compared on an absolute scale: the relative-error
/// denominator is floored here so finite-difference noise on structurally
/// zero gradients (~1e-11) cannot masquerade as 100% error.
const REL_FLOOR: f64 = 1e-6;

/// One checked coordinate.
#[derive(Clone, Debug)]
pub struct GradCheckCoordinate {
    pub array: &'static str,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

/// Outcome of a full gradient check.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// The worst coordinate (always present once at least one coordinate
    /// was checked).
    pub worst: Option<GradCheckCoordinate>,
    pub coordinates_checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

fn array_mut<T: Real>(params: &mut ModelParams<T>, which: usize) -> &mut Vec<T> {
    match which {
        0 => &mut params.embedding,
        1 => &mut params.w_fwd,
        2 => &mut params.u_fwd,
        3 => &mut params.b_fwd,
        4 => &mut params.w_bwd,
        5 => &mut params.u_bwd,
        6 => &mut params.b_bwd,
        7 => &mut params.w_out,
        8 => &mut params.b_out,
        _ => unreachable!("nine parameter arrays"),
    }
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares a supplied analytic gradient against central finite differences
/// of the frozen-mask training loss, coordinate by coordinate. PAD
/// embedding coordinates (row 0) are pinned parameters: they are asserted
/// to carry zero analytic gradient and excluded from differencing.
fn check_coordinates(
    params: &mut ModelParams<f64>,
    batch: &[Vec<usize>],
    targets: &[f64],
    multipliers: &[f64],
    grads: &ModelParams<f64>,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let refs: Vec<&[usize]> = batch.iter().map(|v| v.as_slice()).collect();
    let loss = |params: &ModelParams<f64>| -> Result<f64> {
        let cache = forward_train_frozen(&refs, params, multipliers.to_vec())?;
        mse_loss(cache.predictions(), targets)
    };

    let d = params.config.embed_dim;
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        coordinates_checked: 0,
        tolerance,
        passed: true,
    };
    let record = |array, index, analytic, numeric, report: &mut GradCheckReport| {
        let rel = rel_error(analytic, numeric);
        report.coordinates_checked += 1;
        if rel >= report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = rel;
            report.worst = Some(GradCheckCoordinate {
                array,
                index,
                analytic,
                numeric,
                rel_error: rel,
            });
        }
    };

    let grad_arrays = grads.arrays();
    for which in 0..grad_arrays.len() {
        let (name, grad) = (grad_arrays[which].0, grad_arrays[which].1.to_vec());
        for index in 0..grad.len() {
            if which == 0 && index < d {
                // PAD row: pinned at zero, gradient defined as discarded.
                record(name, index, grad[index], 0.0, &mut report);
                continue;
            }
            let original = array_mut(params, which)[index];
            array_mut(params, which)[index] = original + FD_STEP;
            let loss_plus = loss(params)?;
            array_mut(params, which)[index] = original - FD_STEP;
            let loss_minus = loss(params)?;
            array_mut(params, which)[index] = original;
            let numeric = (loss_plus - loss_minus) / (2.0 * FD_STEP);
            record(name, index, grad[index], numeric, &mut report);
        }
    }
    report.passed = report.max_rel_error < tolerance;
    Ok(report)
}

/// Runs a full gradient check in 64-bit precision on a seeded batch:
/// random pre-padded sequences, random targets in [0,1], and — when
/// `freeze_mask` is set and dropout is active — a single dropout mask drawn
/// once and reused for every finite-difference evaluation.
///
/// With dropout active and no frozen mask the loss would be a different
/// random function at every evaluation, so that combination is rejected.
pub fn gradient_check(
    config: ModelConfig,
    seed: u64,
    tolerance: f64,
    batch_size: usize,
    freeze_mask: bool,
) -> Result<GradCheckReport> {
    config.validate()?;
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be ≥ 1".into()));
    }
    if config.dropout_rate > 0.0 && !freeze_mask {
        return Err(Error::InvalidArgument(
            "gradient check with dropout_rate > 0 requires a frozen mask".into(),
        ));
    }

    let mut rng = Rng::from_seed(seed);
    let mut params = init_params::<f64>(config, rng.next_u64())?;
    let (v, l, h) = (config.vocab_size, config.seq_len, config.lstm_units);

    let mut batch = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let true_len = 1 + rng.below(l as u64) as usize;
        let mut ids = vec![0usize; l - true_len];
        for _ in 0..true_len {
            ids.push(1 + rng.below(v as u64 - 1) as usize);
        }
        batch.push(ids);
    }
    let targets: Vec<f64> = (0..batch_size).map(|_| rng.next_f64()).collect();

    let keep = 1.0 - config.dropout_rate;
    let multipliers: Vec<f64> = (0..batch_size * 2 * h)
        .map(|_| {
            if rng.next_f64() < keep {
                1.0 / keep
            } else {
                0.0
            }
        })
        .collect();

    let refs: Vec<&[usize]> = batch.iter().map(|b| b.as_slice()).collect();
    let cache = forward_train_frozen(&refs, &params, multipliers.clone())?;
    let grads = backward(&cache, &targets, &params)?;

    check_coordinates(&mut params, &batch, &targets, &multipliers, &grads, tolerance)
}
