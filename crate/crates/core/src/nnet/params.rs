//! Trainable parameters and their initialization.

use crate::rng::Rng;
use crate::Result;

use super::{ModelConfig, Real};

/// Gate block order along the 4H dimension. The checkpoint format and the
/// backward pass both depend on this ordering.
pub(crate) const GATE_INPUT: usize = 0;
pub(crate) const GATE_FORGET: usize = 1;
pub(crate) const GATE_CANDIDATE: usize = 2;
pub(crate) const GATE_OUTPUT: usize = 3;

/// All trainable arrays. Layouts:
///
/// * `embedding`: V×D row-major; row 0 (PAD) is all zeros and stays zero.
/// * `w_*`: 4H×D row-major input weights, rows grouped by gate [i, f, g, o].
/// * `u_*`: 4H×H row-major recurrent weights, same gate grouping.
/// * `b_*`: 4H biases, same gate grouping.
/// * `w_out`: 2H dense weights — forward-direction half first, then backward.
/// * `b_out`: the dense bias as a 1-element array, so every parameter lives
///   in a uniformly shaped slice.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    pub config: ModelConfig,
    pub embedding: Vec<T>,
    pub w_fwd: Vec<T>,
    pub u_fwd: Vec<T>,
    pub b_fwd: Vec<T>,
    pub w_bwd: Vec<T>,
    pub u_bwd: Vec<T>,
    pub b_bwd: Vec<T>,
    pub w_out: Vec<T>,
    pub b_out: Vec<T>,
}

/// Names of the parameter arrays in their canonical (checkpoint) order.
pub const ARRAY_NAMES: [&str; 9] = [
    "embedding",
    "w_fwd",
    "u_fwd",
    "b_fwd",
    "w_bwd",
    "u_bwd",
    "b_bwd",
    "w_out",
    "b_out",
];

impl<T: Real> ModelParams<T> {
    /// All-zero parameters with the shapes implied by `config`.
    pub fn zeros(config: ModelConfig) -> Self {
        let (v, d, h) = (config.vocab_size, config.embed_dim, config.lstm_units);
        ModelParams {
            config,
            embedding: vec![T::zero(); v * d],
            w_fwd: vec![T::zero(); 4 * h * d],
            u_fwd: vec![T::zero(); 4 * h * h],
            b_fwd: vec![T::zero(); 4 * h],
            w_bwd: vec![T::zero(); 4 * h * d],
            u_bwd: vec![T::zero(); 4 * h * h],
            b_bwd: vec![T::zero(); 4 * h],
            w_out: vec![T::zero(); 2 * h],
            b_out: vec![T::zero(); 1],
        }
    }

    /// The arrays in canonical order, paired with their names.
    pub fn arrays(&self) -> [(&'static str, &[T]); 9] {
        [
            ("embedding", &self.embedding),
            ("w_fwd", &self.w_fwd),
            ("u_fwd", &self.u_fwd),
            ("b_fwd", &self.b_fwd),
            ("w_bwd", &self.w_bwd),
            ("u_bwd", &self.u_bwd),
            ("b_bwd", &self.b_bwd),
            ("w_out", &self.w_out),
            ("b_out", &self.b_out),
        ]
    }

    pub fn arrays_mut(&mut self) -> [(&'static str, &mut Vec<T>); 9] {
        [
            ("embedding", &mut self.embedding),
            ("w_fwd", &mut self.w_fwd),
            ("u_fwd", &mut self.u_fwd),
            ("b_fwd", &mut self.b_fwd),
            ("w_bwd", &mut self.w_bwd),
            ("u_bwd", &mut self.u_bwd),
            ("b_bwd", &mut self.b_bwd),
            ("w_out", &mut self.w_out),
            ("b_out", &mut self.b_out),
        ]
    }

    /// Total number of scalar parameters.
    pub fn len(&self) -> usize {
        self.arrays().iter().map(|(_, a)| a.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// True when every entry of every array is finite.
    pub fn all_finite(&self) -> bool {
        self.arrays()
            .iter()
            .all(|(_, a)| a.iter().all(|x| x.is_finite()))
    }

    /// Converts between scalar widths (f32 checkpoints → f64 analysis and
    /// back). Conversion through f64 is exact for f32 sources.
    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        let conv = |a: &[T]| a.iter().map(|x| U::from_f64(Real::as_f64(*x))).collect();
        ModelParams {
            config: self.config,
            embedding: conv(&self.embedding),
            w_fwd: conv(&self.w_fwd),
            u_fwd: conv(&self.u_fwd),
            b_fwd: conv(&self.b_fwd),
            w_bwd: conv(&self.w_bwd),
            u_bwd: conv(&self.u_bwd),
            b_bwd: conv(&self.b_bwd),
            w_out: conv(&self.w_out),
            b_out: conv(&self.b_out),
        }
    }
}

fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn fill_uniform<T: Real>(rng: &mut Rng, slice: &mut [T], bound: f64) {
    for x in slice.iter_mut() {
        *x = T::from_f64(rng.uniform(-bound, bound));
    }
}

/// Seeded parameter initialization:
///
/// * embedding rows 1..V ~ Uniform(−0.05, 0.05); row 0 stays zero,
/// * W and U Glorot-uniform with bound √(6/(fan_in+fan_out)) — every gate
///   block shares the same fan pair, so the whole matrix is drawn row-major,
/// * biases zero except the forget-gate block, which starts at 1,
/// * dense weights Glorot over (2H, 1).
///
/// Draw order is fixed (embedding, W_fwd, U_fwd, W_bwd, U_bwd, w_out) so a
/// seed pins every bit of the result.
pub fn init_params<T: Real>(config: ModelConfig, seed: u64) -> Result<ModelParams<T>> {
    config.validate()?;
    let (d, h) = (config.embed_dim, config.lstm_units);
    let mut rng = Rng::from_seed(seed);
    let mut params = ModelParams::zeros(config);

    fill_uniform(&mut rng, &mut params.embedding[d..], 0.05);

    let w_bound = glorot_bound(d, h);
    let u_bound = glorot_bound(h, h);
    fill_uniform(&mut rng, &mut params.w_fwd, w_bound);
    fill_uniform(&mut rng, &mut params.u_fwd, u_bound);
    fill_uniform(&mut rng, &mut params.w_bwd, w_bound);
    fill_uniform(&mut rng, &mut params.u_bwd, u_bound);
    fill_uniform(&mut rng, &mut params.w_out, glorot_bound(2 * h, 1));

    for bias in [&mut params.b_fwd, &mut params.b_bwd] {
        for u in 0..h {
            bias[GATE_FORGET * h + u] = T::one();
        }
    }
    Ok(params)
}
