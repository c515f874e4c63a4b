//! Forward pass: embedding lookup, both LSTM chains, dropout, dense head.

use crate::rng::Rng;
use crate::{Error, Result};

use super::params::{GATE_CANDIDATE, GATE_FORGET, GATE_INPUT, GATE_OUTPUT};
use super::{sigmoid, ModelParams, Real};

/// Per-direction activation record. Gate and state arrays are step-major:
/// gates at `(b·L + s)·H + u` for chain step s, states at
/// `(b·(L+1) + s)·H + u` where index s holds the state *entering* step s
/// (s = 0 is the zero initial state, s = L the final state).
pub(crate) struct DirectionCache<T> {
    pub i: Vec<T>,
    pub f: Vec<T>,
    pub g: Vec<T>,
    pub o: Vec<T>,
    pub tanh_c: Vec<T>,
    pub h: Vec<T>,
    pub c: Vec<T>,
}

impl<T: Real> DirectionCache<T> {
    fn new(batch: usize, l: usize, h: usize) -> Self {
        DirectionCache {
            i: vec![T::zero(); batch * l * h],
            f: vec![T::zero(); batch * l * h],
            g: vec![T::zero(); batch * l * h],
            o: vec![T::zero(); batch * l * h],
            tanh_c: vec![T::zero(); batch * l * h],
            h: vec![T::zero(); batch * (l + 1) * h],
            c: vec![T::zero(); batch * (l + 1) * h],
        }
    }
}

/// Everything the backward pass needs, retained from a train-mode forward.
pub struct ForwardCache<T> {
    pub(crate) ids: Vec<Vec<usize>>,
    pub(crate) fwd: DirectionCache<T>,
    pub(crate) bwd: DirectionCache<T>,
    /// B×2H inverted-dropout multipliers: 0 for dropped coordinates,
    /// 1/(1−p) for kept ones.
    pub(crate) multipliers: Vec<T>,
    /// B×2H feature vectors after the dropout multipliers.
    pub(crate) features_dropped: Vec<T>,
    pub(crate) preds: Vec<T>,
}

impl<T: Real> ForwardCache<T> {
    pub fn predictions(&self) -> &[T] {
        &self.preds
    }

    pub fn batch_len(&self) -> usize {
        self.preds.len()
    }
}

fn validate_batch<T: Real>(batch: &[&[usize]], params: &ModelParams<T>) -> Result<()> {
    let (v, l) = (params.config.vocab_size, params.config.seq_len);
    for (b, ids) in batch.iter().enumerate() {
        if ids.len() != l {
            return Err(Error::Dimension(format!(
                "sample {b} has {} ids, expected seq_len {l}",
                ids.len()
            )));
        }
        if let Some(&id) = ids.iter().find(|&&id| id >= v) {
            return Err(Error::Dimension(format!(
                "sample {b} contains id {id} ≥ vocab_size {v}"
            )));
        }
    }
    Ok(())
}

/// Chain direction: `forward` scans positions 0..L, `!forward` scans L..0.
fn run_direction<T: Real>(
    batch: &[&[usize]],
    embedding: &[T],
    w: &[T],
    u: &[T],
    bias: &[T],
    d: usize,
    h: usize,
    l: usize,
    forward: bool,
) -> DirectionCache<T> {
    let mut cache = DirectionCache::new(batch.len(), l, h);
    let mut a = vec![T::zero(); 4 * h];
    for (b, ids) in batch.iter().enumerate() {
        for s in 0..l {
            let pos = if forward { s } else { l - 1 - s };
            let x = &embedding[ids[pos] * d..(ids[pos] + 1) * d];
            let prev = (b * (l + 1) + s) * h;
            a.copy_from_slice(bias);
            for row in 0..4 * h {
                let mut acc = a[row];
                let w_row = &w[row * d..(row + 1) * d];
                for k in 0..d {
                    acc = acc + w_row[k] * x[k];
                }
                let u_row = &u[row * h..(row + 1) * h];
                for k in 0..h {
                    acc = acc + u_row[k] * cache.h[prev + k];
                }
                a[row] = acc;
            }
            let gate = (b * l + s) * h;
            let next = (b * (l + 1) + s + 1) * h;
            for unit in 0..h {
                let ig = sigmoid(a[GATE_INPUT * h + unit]);
                let fg = sigmoid(a[GATE_FORGET * h + unit]);
                let gg = a[GATE_CANDIDATE * h + unit].tanh();
                let og = sigmoid(a[GATE_OUTPUT * h + unit]);
                let c = fg * cache.c[prev + unit] + ig * gg;
                let tc = c.tanh();
                cache.i[gate + unit] = ig;
                cache.f[gate + unit] = fg;
                cache.g[gate + unit] = gg;
                cache.o[gate + unit] = og;
                cache.tanh_c[gate + unit] = tc;
                cache.c[next + unit] = c;
                cache.h[next + unit] = og * tc;
            }
        }
    }
    cache
}

/// One LSTM cell step for a single direction. Weight layouts match
/// [`ModelParams`]: `w` is 4H×D, `u` is 4H×H, `bias` is 4H, gates [i,f,g,o].
pub fn lstm_cell_forward<T: Real>(
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
    w: &[T],
    u: &[T],
    bias: &[T],
) -> (Vec<T>, Vec<T>) {
    let d = x.len();
    let h = h_prev.len();
    debug_assert_eq!(c_prev.len(), h);
    debug_assert_eq!(w.len(), 4 * h * d);
    debug_assert_eq!(u.len(), 4 * h * h);
    debug_assert_eq!(bias.len(), 4 * h);
    let mut a = bias.to_vec();
    for row in 0..4 * h {
        let mut acc = a[row];
        for k in 0..d {
            acc = acc + w[row * d + k] * x[k];
        }
        for k in 0..h {
            acc = acc + u[row * h + k] * h_prev[k];
        }
        a[row] = acc;
    }
    let mut h_out = vec![T::zero(); h];
    let mut c_out = vec![T::zero(); h];
    for unit in 0..h {
        let ig = sigmoid(a[GATE_INPUT * h + unit]);
        let fg = sigmoid(a[GATE_FORGET * h + unit]);
        let gg = a[GATE_CANDIDATE * h + unit].tanh();
        let og = sigmoid(a[GATE_OUTPUT * h + unit]);
        let c = fg * c_prev[unit] + ig * gg;
        c_out[unit] = c;
        h_out[unit] = og * c.tanh();
    }
    (h_out, c_out)
}

/// Runs both chains and concatenates the terminal hidden states: forward
/// half first (position L−1), then backward (position 0). Returns the two
/// direction caches plus the B×2H feature matrix.
fn compute_features<T: Real>(
    batch: &[&[usize]],
    params: &ModelParams<T>,
) -> (DirectionCache<T>, DirectionCache<T>, Vec<T>) {
    let cfg = &params.config;
    let (d, h, l) = (cfg.embed_dim, cfg.lstm_units, cfg.seq_len);
    let fwd = run_direction(
        batch,
        &params.embedding,
        &params.w_fwd,
        &params.u_fwd,
        &params.b_fwd,
        d,
        h,
        l,
        true,
    );
    let bwd = run_direction(
        batch,
        &params.embedding,
        &params.w_bwd,
        &params.u_bwd,
        &params.b_bwd,
        d,
        h,
        l,
        false,
    );
    let mut features = vec![T::zero(); batch.len() * 2 * h];
    for b in 0..batch.len() {
        let last = (b * (l + 1) + l) * h;
        features[b * 2 * h..b * 2 * h + h].copy_from_slice(&fwd.h[last..last + h]);
        features[b * 2 * h + h..(b + 1) * 2 * h].copy_from_slice(&bwd.h[last..last + h]);
    }
    (fwd, bwd, features)
}

/// The 2H feature vector for a single sequence (eval path, no dropout).
pub fn bilstm_feature<T: Real>(ids: &[usize], params: &ModelParams<T>) -> Result<Vec<T>> {
    validate_batch(&[ids], params)?;
    let (_, _, features) = compute_features(&[ids], params);
    Ok(features)
}

fn dense<T: Real>(features: &[T], params: &ModelParams<T>) -> Vec<T> {
    let width = params.w_out.len();
    features
        .chunks_exact(width)
        .map(|feat| {
            let mut acc = params.b_out[0];
            for k in 0..width {
                acc = acc + params.w_out[k] * feat[k];
            }
            acc
        })
        .collect()
}

/// Evaluation forward: no dropout, no cache, no state mutation. The raw
/// linear outputs are returned unclamped.
pub fn forward_eval<T: Real>(batch: &[&[usize]], params: &ModelParams<T>) -> Result<Vec<T>> {
    validate_batch(batch, params)?;
    let (_, _, features) = compute_features(batch, params);
    Ok(dense(&features, params))
}

/// Training forward: draws a fresh inverted-dropout mask from `rng` with
/// keep probability 1−p and scale 1/(1−p), and retains the full cache.
pub fn forward_train<T: Real>(
    batch: &[&[usize]],
    params: &ModelParams<T>,
    rng: &mut Rng,
) -> Result<ForwardCache<T>> {
    let p = params.config.dropout_rate;
    let keep = 1.0 - p;
    let scale = T::from_f64(1.0 / keep);
    let width = 2 * params.config.lstm_units;
    let multipliers: Vec<T> = (0..batch.len() * width)
        .map(|_| {
            if rng.next_f64() < keep {
                scale
            } else {
                T::zero()
            }
        })
        .collect();
    forward_train_frozen(batch, params, multipliers)
}

/// Training forward with a caller-supplied dropout mask (B×2H multiplier
/// entries, 0 or 1/(1−p)). This is what makes dropout deterministic for
/// gradient checking.
pub fn forward_train_frozen<T: Real>(
    batch: &[&[usize]],
    params: &ModelParams<T>,
    multipliers: Vec<T>,
) -> Result<ForwardCache<T>> {
    validate_batch(batch, params)?;
    let width = 2 * params.config.lstm_units;
    if multipliers.len() != batch.len() * width {
        return Err(Error::Dimension(format!(
            "dropout mask has {} entries, expected {}",
            multipliers.len(),
            batch.len() * width
        )));
    }
    let (fwd, bwd, mut features) = compute_features(batch, params);
    for (x, m) in features.iter_mut().zip(&multipliers) {
        *x = *x * *m;
    }
    let preds = dense(&features, params);
    Ok(ForwardCache {
        ids: batch.iter().map(|ids| ids.to_vec()).collect(),
        fwd,
        bwd,
        multipliers,
        features_dropped: features,
        preds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::{init_params, ModelConfig};

    fn config(v: usize, d: usize, h: usize, l: usize, p: f64) -> ModelConfig {
        ModelConfig {
            vocab_size: v,
            embed_dim: d,
            lstm_units: h,
            dropout_rate: p,
            seq_len: l,
        }
    }

    #[test]
    fn zero_weights_give_zero_cell() {
        let (h, c) = lstm_cell_forward::<f64>(
            &[0.3, -0.2],
            &[0.0],
            &[0.0],
            &vec![0.0; 8],
            &vec![0.0; 4],
            &vec![0.0; 4],
        );
        assert_eq!(h, vec![0.0]);
        assert_eq!(c, vec![0.0]);
    }

    #[test]
    fn saturated_gates_preserve_memory() {
        // f ≈ 1 (huge forget bias), i ≈ 0 (huge negative input bias):
        // the cell must carry c_prev through unchanged.
        let bias = vec![-40.0, 40.0, 0.0, 40.0]; // i, f, g, o
        let c0 = 0.7;
        let (h, c) = lstm_cell_forward::<f64>(
            &[0.5],
            &[0.0],
            &[c0],
            &vec![0.0; 4],
            &vec![0.0; 4],
            &bias,
        );
        assert!((c[0] - c0).abs() < 1e-12);
        assert!((h[0] - c0.tanh()).abs() < 1e-12);
    }

    #[test]
    fn scalar_cell_matches_hand_recurrence() {
        // H=1, D=1, every weight distinct; recompute by hand formulas.
        let (x, h_prev, c_prev) = (0.4, 0.2, -0.3);
        let w = [0.1, -0.2, 0.3, 0.5]; // 4H×D
        let u = [0.7, 0.11, -0.13, 0.17];
        let bias = [0.01, 0.02, 0.03, 0.04];
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let i = sig(w[0] * x + u[0] * h_prev + bias[0]);
        let f = sig(w[1] * x + u[1] * h_prev + bias[1]);
        let g = (w[2] * x + u[2] * h_prev + bias[2]).tanh();
        let o = sig(w[3] * x + u[3] * h_prev + bias[3]);
        let c = f * c_prev + i * g;
        let h = o * c.tanh();
        let (h_out, c_out) = lstm_cell_forward(&[x], &[h_prev], &[c_prev], &w, &u, &bias);
        assert!((h_out[0] - h).abs() < 1e-15);
        assert!((c_out[0] - c).abs() < 1e-15);
    }

    #[test]
    fn zero_params_give_zero_feature_and_bias_prediction() {
        let cfg = config(5, 3, 2, 4, 0.0);
        let params: ModelParams<f64> = ModelParams::zeros(cfg);
        let ids = vec![1usize, 2, 3, 4];
        let feature = bilstm_feature(&ids, &params).unwrap();
        assert!(feature.iter().all(|&x| x == 0.0));
        let preds = forward_eval(&[&ids], &params).unwrap();
        assert_eq!(preds, vec![0.0]);
    }

    #[test]
    fn palindrome_with_symmetric_weights_gives_equal_halves() {
        // If both directions share weights and the id sequence is a
        // palindrome, the two chains see identical inputs step by step.
        let cfg = config(6, 3, 2, 4, 0.0);
        let mut params: ModelParams<f64> = init_params(cfg, 9).unwrap();
        params.w_bwd = params.w_fwd.clone();
        params.u_bwd = params.u_fwd.clone();
        params.b_bwd = params.b_fwd.clone();
        let ids = vec![2usize, 5, 5, 2];
        let feature = bilstm_feature(&ids, &params).unwrap();
        let h = cfg.lstm_units;
        for u in 0..h {
            assert!(
                (feature[u] - feature[h + u]).abs() < 1e-15,
                "unit {u}: {} vs {}",
                feature[u],
                feature[h + u]
            );
        }
    }

    #[test]
    fn feature_matches_chained_cells() {
        // H=1, L=2: the forward half of the feature must equal two manual
        // cell applications.
        let cfg = config(4, 2, 1, 2, 0.0);
        let params: ModelParams<f64> = init_params(cfg, 11).unwrap();
        let ids = vec![1usize, 3];
        let x0 = &params.embedding[ids[0] * 2..ids[0] * 2 + 2];
        let x1 = &params.embedding[ids[1] * 2..ids[1] * 2 + 2];
        let (h1, c1) = lstm_cell_forward(
            x0,
            &[0.0],
            &[0.0],
            &params.w_fwd,
            &params.u_fwd,
            &params.b_fwd,
        );
        let (h2, _) = lstm_cell_forward(
            x1,
            &h1,
            &c1,
            &params.w_fwd,
            &params.u_fwd,
            &params.b_fwd,
        );
        let feature = bilstm_feature(&ids, &params).unwrap();
        assert!((feature[0] - h2[0]).abs() < 1e-15);
    }

    #[test]
    fn eval_equals_train_when_dropout_off() {
        let cfg = config(10, 4, 3, 6, 0.0);
        let params: ModelParams<f64> = init_params(cfg, 21).unwrap();
        let a = vec![1usize, 2, 3, 4, 5, 6];
        let b = vec![0usize, 0, 7, 8, 9, 1];
        let batch = [a.as_slice(), b.as_slice()];
        let eval = forward_eval(&batch, &params).unwrap();
        let mut rng = crate::rng::Rng::from_seed(5);
        let cache = forward_train(&batch, &params, &mut rng).unwrap();
        assert_eq!(eval, cache.preds);
    }

    #[test]
    fn frozen_all_keep_mask_scales_features() {
        // p=0.5 with an all-keep mask multiplies each feature by 2 before
        // the dense layer.
        let cfg = config(6, 2, 1, 3, 0.5);
        let params: ModelParams<f64> = init_params(cfg, 31).unwrap();
        let ids = vec![1usize, 2, 3];
        let batch = [ids.as_slice()];

        let feature = bilstm_feature(&ids, &params).unwrap();
        let expected = 2.0 * (params.w_out[0] * feature[0] + params.w_out[1] * feature[1])
            + params.b_out[0];

        let mask = vec![2.0f64; 2]; // 1/(1-0.5)
        let cache = forward_train_frozen(&batch, &params, mask).unwrap();
        assert!((cache.preds[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_ids_and_lengths() {
        let cfg = config(5, 2, 2, 3, 0.0);
        let params: ModelParams<f64> = init_params(cfg, 1).unwrap();
        let too_short = vec![1usize, 2];
        assert!(forward_eval(&[too_short.as_slice()], &params).is_err());
        let bad_id = vec![1usize, 2, 5];
        assert!(forward_eval(&[bad_id.as_slice()], &params).is_err());
    }

    #[test]
    fn dropout_mask_expectation_matches_eval_feature() {
        // Inverted dropout is unbiased: the mask-averaged dropped feature
        // converges to the eval feature. Monte-Carlo with analytic standard
        // error |f|·sqrt(p/(1-p)/N); assert within 3 SE per coordinate.
        let cfg = config(8, 3, 2, 5, 0.3);
        let params: ModelParams<f64> = init_params(cfg, 77).unwrap();
        let ids = vec![1usize, 3, 5, 7, 2];
        let batch = [ids.as_slice()];
        let eval_feature = bilstm_feature(&ids, &params).unwrap();

        let n = 40_000;
        let mut rng = crate::rng::Rng::from_seed(123);
        let mut mean = vec![0.0f64; eval_feature.len()];
        for _ in 0..n {
            let cache = forward_train(&batch, &params, &mut rng).unwrap();
            for (m, x) in mean.iter_mut().zip(&cache.features_dropped) {
                *m += x;
            }
        }
        for m in mean.iter_mut() {
            *m /= n as f64;
        }
        let p = cfg.dropout_rate;
        for (k, (&avg, &f)) in mean.iter().zip(&eval_feature).enumerate() {
            let se = f.abs() * (p / (1.0 - p) / n as f64).sqrt();
            assert!(
                (avg - f).abs() <= 3.0 * se + 1e-12,
                "coordinate {k}: averaged {avg}, eval {f}, se {se}"
            );
        }
    }
}
