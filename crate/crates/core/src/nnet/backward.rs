//! Exact reverse-mode gradients of the batch MSE loss.

use crate::{Error, Result};

use super::forward::{DirectionCache, ForwardCache};
use super::{ModelParams, Real};

/// Backpropagates one direction's chain. `dh_final` carries the loss
/// gradient w.r.t. each sample's terminal hidden state (B×H); gradients
/// accumulate into `gw`/`gu`/`gb`/`gemb` in fixed sample order.
#[allow(clippy::too_many_arguments)]
fn backprop_direction<T: Real>(
    ids: &[Vec<usize>],
    cache: &DirectionCache<T>,
    dh_final: &[T],
    embedding: &[T],
    w: &[T],
    u: &[T],
    d: usize,
    h: usize,
    l: usize,
    forward: bool,
    gw: &mut [T],
    gu: &mut [T],
    gb: &mut [T],
    gemb: &mut [T],
) {
    let mut da = vec![T::zero(); 4 * h];
    let mut dh = vec![T::zero(); h];
    let mut dh_prev = vec![T::zero(); h];
    let mut dc = vec![T::zero(); h];
    let mut dx = vec![T::zero(); d];
    for (b, ids_b) in ids.iter().enumerate() {
        dh.copy_from_slice(&dh_final[b * h..(b + 1) * h]);
        for v in dc.iter_mut() {
            *v = T::zero();
        }
        for s in (0..l).rev() {
            let gate = (b * l + s) * h;
            let prev = (b * (l + 1) + s) * h;
            let pos = if forward { s } else { l - 1 - s };
            let id = ids_b[pos];

            // Gate-local chain rule. dct is the full cell-state gradient at
            // this step: the running dc plus the path through h = o·tanh(c).
            for unit in 0..h {
                let i_g = cache.i[gate + unit];
                let f_g = cache.f[gate + unit];
                let g_g = cache.g[gate + unit];
                let o_g = cache.o[gate + unit];
                let tc = cache.tanh_c[gate + unit];
                let c_prev = cache.c[prev + unit];
                let dh_u = dh[unit];
                let dct = dc[unit] + dh_u * o_g * (T::one() - tc * tc);
                da[unit] = dct * g_g * i_g * (T::one() - i_g);
                da[h + unit] = dct * c_prev * f_g * (T::one() - f_g);
                da[2 * h + unit] = dct * i_g * (T::one() - g_g * g_g);
                da[3 * h + unit] = dh_u * tc * o_g * (T::one() - o_g);
                dc[unit] = dct * f_g;
            }

            let x = &embedding[id * d..(id + 1) * d];
            for v in dx.iter_mut() {
                *v = T::zero();
            }
            for v in dh_prev.iter_mut() {
                *v = T::zero();
            }
            for row in 0..4 * h {
                let g_row = da[row];
                let w_row = &w[row * d..(row + 1) * d];
                let gw_row = &mut gw[row * d..(row + 1) * d];
                for k in 0..d {
                    gw_row[k] = gw_row[k] + g_row * x[k];
                    dx[k] = dx[k] + w_row[k] * g_row;
                }
                let u_row = &u[row * h..(row + 1) * h];
                let gu_row = &mut gu[row * h..(row + 1) * h];
                for k in 0..h {
                    gu_row[k] = gu_row[k] + g_row * cache.h[prev + k];
                    dh_prev[k] = dh_prev[k] + u_row[k] * g_row;
                }
                gb[row] = gb[row] + g_row;
            }
            let gemb_row = &mut gemb[id * d..(id + 1) * d];
            for k in 0..d {
                gemb_row[k] = gemb_row[k] + dx[k];
            }
            std::mem::swap(&mut dh, &mut dh_prev);
        }
    }
}

/// Gradients of `mse_loss(predictions, targets)` w.r.t. every parameter,
/// through the dense head, the dropout mask, both LSTM chains, and the
/// embedding rows. The PAD embedding row's gradient is zeroed.
///
/// `params` must be the parameters the cache was computed with: the weight
/// matrices re-enter the vector-Jacobian products.
pub fn backward<T: Real>(
    cache: &ForwardCache<T>,
    targets: &[T],
    params: &ModelParams<T>,
) -> Result<ModelParams<T>> {
    let batch = cache.preds.len();
    if targets.len() != batch {
        return Err(Error::Dimension(format!(
            "cache holds {batch} predictions but {} targets were supplied",
            targets.len()
        )));
    }
    let cfg = params.config;
    let (d, h, l) = (cfg.embed_dim, cfg.lstm_units, cfg.seq_len);
    let width = 2 * h;
    if cache.multipliers.len() != batch * width
        || cache.ids.iter().any(|ids| ids.len() != l)
    {
        return Err(Error::Dimension(
            "forward cache does not match the supplied parameters".into(),
        ));
    }

    let mut grads = ModelParams::zeros(cfg);
    let scale = T::from_f64(2.0 / batch as f64);
    let mut dh_fwd = vec![T::zero(); batch * h];
    let mut dh_bwd = vec![T::zero(); batch * h];
    for b in 0..batch {
        let dpred = (cache.preds[b] - targets[b]) * scale;
        grads.b_out[0] = grads.b_out[0] + dpred;
        for k in 0..width {
            let fk = b * width + k;
            grads.w_out[k] = grads.w_out[k] + dpred * cache.features_dropped[fk];
            // Through dropout: the mask multiplier is part of the forward map.
            let dfeat = dpred * params.w_out[k] * cache.multipliers[fk];
            if k < h {
                dh_fwd[b * h + k] = dfeat;
            } else {
                dh_bwd[b * h + (k - h)] = dfeat;
            }
        }
    }

    backprop_direction(
        &cache.ids,
        &cache.fwd,
        &dh_fwd,
        &params.embedding,
        &params.w_fwd,
        &params.u_fwd,
        d,
        h,
        l,
        true,
        &mut grads.w_fwd,
        &mut grads.u_fwd,
        &mut grads.b_fwd,
        &mut grads.embedding,
    );
    backprop_direction(
        &cache.ids,
        &cache.bwd,
        &dh_bwd,
        &params.embedding,
        &params.w_bwd,
        &params.u_bwd,
        d,
        h,
        l,
        false,
        &mut grads.w_bwd,
        &mut grads.u_bwd,
        &mut grads.b_bwd,
        &mut grads.embedding,
    );

    // PAD stays pinned at zero: discard whatever accumulated on row 0.
    for k in 0..d {
        grads.embedding[k] = T::zero();
    }
    Ok(grads)
}
