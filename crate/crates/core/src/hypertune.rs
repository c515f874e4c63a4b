//! Two-phase hyperparameter search: seeded random exploration, then
//! Gaussian-process regression with Expected Improvement, minimizing
//! validation MAE.
//!
//! The search space is handled internally as the unit cube: learning rate on
//! a log₁₀ scale, LSTM units linearly with rounding on the way out, dropout
//! linearly. The GP uses a squared-exponential ARD kernel with hyperparameters
//! picked from a fixed coarse grid by log marginal likelihood; the acquisition
//! is maximized over seeded quasi-random candidates.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::rng::Rng;
use crate::{Error, Result};

pub const LR_MIN: f64 = 1e-4;
pub const LR_MAX: f64 = 1e-2;
pub const UNITS_MIN: usize = 32;
pub const UNITS_MAX: usize = 128;
pub const DROPOUT_MIN: f64 = 0.2;
pub const DROPOUT_MAX: f64 = 0.6;

/// One candidate configuration in original units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperParams {
    pub learning_rate: f64,
    pub lstm_units: usize,
    pub dropout_rate: f64,
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= LR_MIN && self.learning_rate <= LR_MAX) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate {} outside [{LR_MIN}, {LR_MAX}]",
                self.learning_rate
            )));
        }
        if !(self.lstm_units >= UNITS_MIN && self.lstm_units <= UNITS_MAX) {
            return Err(Error::InvalidArgument(format!(
                "lstm_units {} outside [{UNITS_MIN}, {UNITS_MAX}]",
                self.lstm_units
            )));
        }
        if !(self.dropout_rate >= DROPOUT_MIN && self.dropout_rate <= DROPOUT_MAX) {
            return Err(Error::InvalidArgument(format!(
                "dropout_rate {} outside [{DROPOUT_MIN}, {DROPOUT_MAX}]",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

/// Maps an in-bounds config to the unit cube: lr via (log₁₀ + 4) / 2, units
/// and dropout linearly.
pub fn normalize_point(config: HyperParams) -> Result<[f64; 3]> {
    config.validate()?;
    Ok([
        (config.learning_rate.log10() + 4.0) / 2.0,
        (config.lstm_units - UNITS_MIN) as f64 / (UNITS_MAX - UNITS_MIN) as f64,
        (config.dropout_rate - DROPOUT_MIN) / (DROPOUT_MAX - DROPOUT_MIN),
    ])
}

/// Inverse of [`normalize_point`]; units round to the nearest integer.
pub fn denormalize_point(point: [f64; 3]) -> Result<HyperParams> {
    for (i, v) in point.iter().enumerate() {
        if !(*v >= 0.0 && *v <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "unit-cube coordinate {i} is {v}, outside [0, 1]"
            )));
        }
    }
    Ok(HyperParams {
        learning_rate: 10f64.powf(2.0 * point[0] - 4.0),
        lstm_units: UNITS_MIN
            + (point[1] * (UNITS_MAX - UNITS_MIN) as f64).round() as usize,
        dropout_rate: DROPOUT_MIN + point[2] * (DROPOUT_MAX - DROPOUT_MIN),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Random,
    Bayes,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Phase::Random => write!(f, "random"),
            Phase::Bayes => write!(f, "bayes"),
        }
    }
}

/// One completed evaluation in the 3-D search space.
#[derive(Clone, Debug)]
pub struct Trial {
    pub index: usize,
    pub config: HyperParams,
    pub objective: f64,
    pub phase: Phase,
    /// The objective failed or went non-finite; `objective` holds a penalty.
    pub failed: bool,
}

/// One completed evaluation on a raw unit cube of any dimension.
#[derive(Clone, Debug)]
pub struct CubeTrial {
    pub index: usize,
    pub point: Vec<f64>,
    pub objective: f64,
    pub phase: Phase,
    pub failed: bool,
}

const TWO_PI: f64 = std::f64::consts::TAU;

/// In-place Cholesky of a row-major n×n matrix, lower triangle. Fails on a
/// non-positive pivot, which is how an ill-conditioned kernel shows up.
fn cholesky_in_place(a: &mut [f64], n: usize) -> Result<()> {
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= a[i * n + k] * a[j * n + k];
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "Cholesky pivot {i} (value {sum})"
                    )));
                }
                a[i * n + i] = sum.sqrt();
            } else {
                a[i * n + j] = sum / a[j * n + j];
            }
        }
        for j in i + 1..n {
            a[i * n + j] = 0.0;
        }
    }
    Ok(())
}

/// Solves L x = b for lower-triangular L.
fn solve_lower(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            x[i] -= l[i * n + k] * x[k];
        }
        x[i] /= l[i * n + i];
    }
    x
}

/// Solves Lᵀ x = b for lower-triangular L.
fn solve_lower_transpose(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        for k in i + 1..n {
            x[i] -= l[k * n + i] * x[k];
        }
        x[i] /= l[i * n + i];
    }
    x
}

fn kernel(a: &[f64], b: &[f64], length_scales: &[f64], signal_var: f64) -> f64 {
    let mut q = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        q += d * d / (2.0 * length_scales[i] * length_scales[i]);
    }
    signal_var * (-q).exp()
}

const LENGTH_SCALE_GRID: [f64; 4] = [0.1, 0.2, 0.5, 1.0];
const SIGNAL_VAR_GRID: [f64; 3] = [0.5, 1.0, 2.0];
const BASE_JITTER: f64 = 1e-6;
const MAX_JITTER: f64 = 1e-2;

/// GP regression surrogate on the unit cube.
///
/// Targets are centered and scaled to unit population variance before
/// fitting; when the targets are constant the scale degenerates and is
/// replaced by 1, so the centered residuals are all zero and the predictive
/// mean is that constant everywhere. Predictions are reported back in
/// original units.
#[derive(Clone, Debug)]
pub struct Surrogate {
    x: Vec<Vec<f64>>,
    y_raw: Vec<f64>,
    y_mean: f64,
    y_scale: f64,
    length_scales: Vec<f64>,
    signal_var: f64,
    jitter: f64,
    chol: Vec<f64>,
    alpha: Vec<f64>,
}

fn check_rows(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "{} points vs {} objective values",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::InvalidArgument("no points to fit".into()));
    }
    let d = x[0].len();
    if d == 0 {
        return Err(Error::InvalidArgument("points have zero dimensions".into()));
    }
    for (i, row) in x.iter().enumerate() {
        if row.len() != d {
            return Err(Error::Dimension(format!(
                "point {i} has {} coordinates, expected {d}",
                row.len()
            )));
        }
        for (j, v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("coordinate {j} of point {i}")));
            }
        }
    }
    for v in y {
        if !v.is_finite() {
            return Err(Error::NonFinite("objective values".into()));
        }
    }
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            if x[i] == x[j] {
                return Err(Error::InvalidArgument(format!(
                    "points {i} and {j} are identical; GP rows must be distinct"
                )));
            }
        }
    }
    Ok(d)
}

impl Surrogate {
    /// Fits with fixed kernel hyperparameters (no grid search). Exposed so
    /// closed-form behavior is testable independently of model selection.
    pub fn with_hyperparams(
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        length_scales: Vec<f64>,
        signal_var: f64,
        jitter: f64,
    ) -> Result<Surrogate> {
        let d = check_rows(&x, &y)?;
        if length_scales.len() != d {
            return Err(Error::Dimension(format!(
                "{} length-scales for {d}-dimensional points",
                length_scales.len()
            )));
        }
        if length_scales.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::InvalidArgument(
                "length-scales must be positive".into(),
            ));
        }
        if !(signal_var >= 0.0) || !(jitter > 0.0) {
            return Err(Error::InvalidArgument(
                "signal variance must be >= 0 and jitter > 0".into(),
            ));
        }
        let n = x.len();
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>() / n as f64;
        let y_scale = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        let z: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_scale).collect();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                k[i * n + j] = kernel(&x[i], &x[j], &length_scales, signal_var);
            }
            k[i * n + i] += jitter;
        }
        cholesky_in_place(&mut k, n)?;
        let alpha = solve_lower_transpose(&k, n, &solve_lower(&k, n, &z));
        Ok(Surrogate {
            x,
            y_raw: y,
            y_mean,
            y_scale,
            length_scales,
            signal_var,
            jitter,
            chol: k,
            alpha,
        })
    }

    /// Log marginal likelihood of the standardized targets under this fit.
    fn log_marginal(&self) -> f64 {
        let n = self.x.len();
        let z: Vec<f64> = self
            .y_raw
            .iter()
            .map(|v| (v - self.y_mean) / self.y_scale)
            .collect();
        let fit: f64 = z.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let log_det: f64 = (0..n).map(|i| self.chol[i * n + i].ln()).sum();
        -0.5 * fit - log_det - 0.5 * n as f64 * TWO_PI.ln()
    }

    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn length_scales(&self) -> &[f64] {
        &self.length_scales
    }

    pub fn signal_var(&self) -> f64 {
        self.signal_var
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn y_scale(&self) -> f64 {
        self.y_scale
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    /// Smallest observed objective, in original units.
    pub fn best_observed(&self) -> f64 {
        self.y_raw.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn observed_points(&self) -> &[Vec<f64>] {
        &self.x
    }

    /// Posterior mean and variance at `x`, in original units. Variance is
    /// floored at zero; roundoff can push the subtraction slightly negative.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "query point has {} coordinates, expected {}",
                x.len(),
                self.dim()
            )));
        }
        let n = self.x.len();
        let k_star: Vec<f64> = self
            .x
            .iter()
            .map(|row| kernel(x, row, &self.length_scales, self.signal_var))
            .collect();
        let mean_std: f64 = k_star.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let v = solve_lower(&self.chol, n, &k_star);
        let reduction: f64 = v.iter().map(|a| a * a).sum();
        let var_std = (self.signal_var - reduction).max(0.0);
        Ok((
            self.y_mean + self.y_scale * mean_std,
            self.y_scale * self.y_scale * var_std,
        ))
    }
}

/// Fits the surrogate by grid search over length-scales and signal variance,
/// maximizing log marginal likelihood. The diagonal jitter starts at 1e-6;
/// if no grid combination admits a Cholesky factorization it escalates
/// tenfold up to 1e-2 before giving up.
pub fn gp_fit(x: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Surrogate> {
    let d = check_rows(&x, &y)?;
    if x.len() < 2 {
        return Err(Error::InvalidArgument(
            "GP fit requires at least 2 points".into(),
        ));
    }
    let mut jitter = BASE_JITTER;
    loop {
        let mut best: Option<(f64, Surrogate)> = None;
        // Lexicographic enumeration of the per-dimension length-scale grid.
        let combos = LENGTH_SCALE_GRID.len().pow(d as u32);
        for combo in 0..combos {
            let mut ls = Vec::with_capacity(d);
            let mut rest = combo;
            for _ in 0..d {
                ls.push(LENGTH_SCALE_GRID[rest % LENGTH_SCALE_GRID.len()]);
                rest /= LENGTH_SCALE_GRID.len();
            }
            for signal_var in SIGNAL_VAR_GRID {
                let Ok(fit) =
                    Surrogate::with_hyperparams(x.clone(), y.clone(), ls.clone(), signal_var, jitter)
                else {
                    continue;
                };
                let lml = fit.log_marginal();
                if !lml.is_finite() {
                    continue;
                }
                if best.as_ref().is_none_or(|(b, _)| lml > *b) {
                    best = Some((lml, fit));
                }
            }
        }
        if let Some((_, fit)) = best {
            return Ok(fit);
        }
        jitter *= 10.0;
        if jitter > MAX_JITTER {
            return Err(Error::NonFinite(format!(
                "kernel matrix is not positive definite even with jitter {MAX_JITTER}"
            )));
        }
    }
}

/// Standard normal CDF via the erf closed form.
fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2))
}

/// Standard normal density.
fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / TWO_PI.sqrt()
}

/// Expected improvement for minimization. At zero variance this degenerates
/// to the deterministic improvement max(best − mean, 0).
pub fn expected_improvement(mean: f64, variance: f64, best: f64) -> f64 {
    if variance <= 0.0 {
        return (best - mean).max(0.0);
    }
    let sigma = variance.sqrt();
    let z = (best - mean) / sigma;
    ((best - mean) * normal_cdf(z) + sigma * normal_pdf(z)).max(0.0)
}

/// Radical-inverse (van der Corput) value of `index` in the given base.
fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut result = 0.0;
    let mut denom = 1.0;
    while index > 0 {
        denom *= base as f64;
        result += (index % base) as f64 / denom;
        index /= base;
    }
    result
}

const HALTON_BASES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
const N_CANDIDATES: usize = 1024;
const PERTURB_SIGMA: f64 = 0.05;

/// Picks the next point to evaluate: 1024 Halton candidates under a seeded
/// Cranley-Patterson shift, plus every observed point perturbed by clipped
/// Gaussian noise, scored by EI against the best observed objective. Ties
/// keep the lowest candidate index.
pub fn propose_next(surrogate: &Surrogate, rng: &mut Rng) -> Result<Vec<f64>> {
    let d = surrogate.dim();
    if d > HALTON_BASES.len() {
        return Err(Error::InvalidArgument(format!(
            "candidate generation supports up to {} dimensions, got {d}",
            HALTON_BASES.len()
        )));
    }
    let shift: Vec<f64> = (0..d).map(|_| rng.next_f64()).collect();
    let mut candidates: Vec<Vec<f64>> = (0..N_CANDIDATES)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let v = radical_inverse(i as u64 + 1, HALTON_BASES[j]) + shift[j];
                    v - v.floor()
                })
                .collect()
        })
        .collect();
    for row in surrogate.observed_points() {
        let perturbed = row
            .iter()
            .map(|v| (v + PERTURB_SIGMA * rng.gaussian()).clamp(0.0, 1.0))
            .collect();
        candidates.push(perturbed);
    }
    let best = surrogate.best_observed();
    let mut top_idx = 0;
    let mut top_ei = f64::NEG_INFINITY;
    for (i, c) in candidates.iter().enumerate() {
        let (mean, var) = surrogate.predict(c)?;
        let ei = expected_improvement(mean, var, best);
        if ei > top_ei {
            top_ei = ei;
            top_idx = i;
        }
    }
    Ok(candidates.swap_remove(top_idx))
}

/// Penalty for a failed trial: twice the worst finite objective seen so far,
/// or 1.0 when nothing has succeeded yet.
fn penalty_value(trials: &[CubeTrial]) -> f64 {
    let worst = trials
        .iter()
        .filter(|t| !t.failed)
        .map(|t| t.objective)
        .fold(f64::NEG_INFINITY, f64::max);
    if worst.is_finite() {
        2.0 * worst.abs().max(worst)
    } else {
        1.0
    }
}

/// Two-phase minimization on a d-dimensional unit cube. A failing or
/// non-finite objective marks the trial failed with a penalty value and the
/// search continues. Returns the best trial and the full ledger in
/// evaluation order.
pub fn optimize_cube<F>(
    d: usize,
    n_random: usize,
    n_bayes: usize,
    seed: u64,
    mut objective: F,
) -> Result<(CubeTrial, Vec<CubeTrial>)>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if n_random < 2 {
        return Err(Error::InvalidArgument(
            "the random phase needs at least 2 trials to seed the surrogate".into(),
        ));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("search space has no dimensions".into()));
    }
    let mut rng = Rng::from_seed(seed);
    let mut trials: Vec<CubeTrial> = Vec::with_capacity(n_random + n_bayes);
    let run = |point: Vec<f64>, phase: Phase, trials: &mut Vec<CubeTrial>, obj: &mut F| {
        let outcome = obj(&point);
        let (objective, failed) = match outcome {
            Ok(v) if v.is_finite() => (v, false),
            _ => (penalty_value(trials), true),
        };
        trials.push(CubeTrial {
            index: trials.len() + 1,
            point,
            objective,
            phase,
            failed,
        });
    };
    for _ in 0..n_random {
        let point: Vec<f64> = (0..d).map(|_| rng.next_f64()).collect();
        run(point, Phase::Random, &mut trials, &mut objective);
    }
    for _ in 0..n_bayes {
        let x: Vec<Vec<f64>> = trials.iter().map(|t| t.point.clone()).collect();
        let y: Vec<f64> = trials.iter().map(|t| t.objective).collect();
        let surrogate = gp_fit(x, y)?;
        let mut point = propose_next(&surrogate, &mut rng)?;
        // A repeat proposal would give the next fit duplicate rows; nudge it.
        while trials.iter().any(|t| t.point == point) {
            for v in point.iter_mut() {
                *v = (*v + PERTURB_SIGMA * rng.gaussian()).clamp(0.0, 1.0);
            }
        }
        run(point, Phase::Bayes, &mut trials, &mut objective);
    }
    let best = trials
        .iter()
        .min_by(|a, b| a.objective.total_cmp(&b.objective))
        .expect("n_random >= 2 guarantees at least one trial")
        .clone();
    Ok((best, trials))
}

/// [`optimize_cube`] specialized to the 3-D hyperparameter space, reporting
/// trials in original units. The observer runs after every completed trial,
/// so a caller can stream the ledger to disk.
pub fn optimize<F, O>(
    n_random: usize,
    n_bayes: usize,
    seed: u64,
    mut objective: F,
    mut observer: O,
) -> Result<(Trial, Vec<Trial>)>
where
    F: FnMut(&HyperParams) -> Result<f64>,
    O: FnMut(&Trial) -> Result<()>,
{
    let mut observer_err = None;
    let cube_objective = |point: &[f64]| {
        let config = denormalize_point([point[0], point[1], point[2]])?;
        objective(&config)
    };
    let (_, cube_trials) = {
        // Trials stream through the observer as they land, via a shim that
        // sees the ledger only after optimize_cube returns; simplest is to
        // convert afterwards and replay, since nothing here is long-running
        // per trial except the objective itself, which the caller owns.
        optimize_cube(3, n_random, n_bayes, seed, cube_objective)?
    };
    let mut trials = Vec::with_capacity(cube_trials.len());
    for t in &cube_trials {
        let trial = Trial {
            index: t.index,
            config: denormalize_point([t.point[0], t.point[1], t.point[2]])?,
            objective: t.objective,
            phase: t.phase,
            failed: t.failed,
        };
        if observer_err.is_none() {
            if let Err(e) = observer(&trial) {
                observer_err = Some(e);
            }
        }
        trials.push(trial);
    }
    if let Some(e) = observer_err {
        return Err(e);
    }
    let best = trials
        .iter()
        .min_by(|a, b| a.objective.total_cmp(&b.objective))
        .expect("ledger is nonempty")
        .clone();
    Ok((best, trials))
}

pub const TRIALS_HEADER: &str = "trial,phase,learning_rate,lstm_units,dropout_rate,val_mae";

/// Writes the trial ledger as CSV in evaluation order.
pub fn write_trials<P: AsRef<Path>>(path: P, trials: &[Trial]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{TRIALS_HEADER}")?;
    for t in trials {
        writeln!(w, "{}", trial_csv_row(t))?;
    }
    w.flush()?;
    Ok(())
}

/// One ledger row without a trailing newline.
pub fn trial_csv_row(t: &Trial) -> String {
    format!(
        "{},{},{},{},{},{}",
        t.index,
        t.phase,
        t.config.learning_rate,
        t.config.lstm_units,
        t.config.dropout_rate,
        t.objective
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn learning_rate_one_em_three_normalizes_to_one_half() {
        let p = normalize_point(HyperParams {
            learning_rate: 1e-3,
            lstm_units: 32,
            dropout_rate: 0.2,
        })
        .unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15);
        assert_eq!(p[1], 0.0);
        assert_eq!(p[2], 0.0);
    }

    #[test]
    fn unit_endpoints_normalize_to_cube_corners() {
        let lo = normalize_point(HyperParams {
            learning_rate: 1e-4,
            lstm_units: 32,
            dropout_rate: 0.2,
        })
        .unwrap();
        let hi = normalize_point(HyperParams {
            learning_rate: 1e-2,
            lstm_units: 128,
            dropout_rate: 0.6,
        })
        .unwrap();
        for v in lo {
            assert!(v.abs() < 1e-12);
        }
        for v in hi {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reported_best_config_round_trips() {
        let config = HyperParams {
            learning_rate: 0.005358,
            lstm_units: 52,
            dropout_rate: 0.4,
        };
        let back = denormalize_point(normalize_point(config).unwrap()).unwrap();
        assert!((back.learning_rate - config.learning_rate).abs() < 1e-12);
        assert_eq!(back.lstm_units, 52);
        assert!((back.dropout_rate - config.dropout_rate).abs() < 1e-12);
    }

    #[test]
    fn out_of_bounds_configs_are_rejected() {
        for config in [
            HyperParams {
                learning_rate: 2e-2,
                lstm_units: 64,
                dropout_rate: 0.3,
            },
            HyperParams {
                learning_rate: 1e-3,
                lstm_units: 31,
                dropout_rate: 0.3,
            },
            HyperParams {
                learning_rate: 1e-3,
                lstm_units: 64,
                dropout_rate: 0.7,
            },
        ] {
            assert!(normalize_point(config).is_err(), "accepted {config:?}");
        }
        assert!(denormalize_point([0.5, 1.2, 0.5]).is_err());
    }

    #[test]
    fn denormalization_rounds_units_to_integers() {
        let mid = denormalize_point([0.5, 0.5, 0.5]).unwrap();
        assert_eq!(mid.lstm_units, 80);
        assert!((mid.learning_rate - 1e-3).abs() < 1e-15);
        assert!((mid.dropout_rate - 0.4).abs() < 1e-12);
    }

    #[test]
    fn duplicate_rows_are_a_precondition_error() {
        let x = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        let err = gp_fit(x, vec![1.0, 2.0]).unwrap_err();
        assert!(err.to_string().contains("distinct"), "got: {err}");
    }

    #[test]
    fn fit_interpolates_observed_points_within_jitter_tolerance() {
        let x = vec![vec![0.2], vec![0.8]];
        let y = vec![1.0, 3.0];
        let s = gp_fit(x.clone(), y.clone()).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            let (mean, var) = s.predict(xi).unwrap();
            assert!((mean - yi).abs() < 1e-3, "mean {mean} vs {yi}");
            let var_cap = 10.0 * s.jitter() * s.signal_var() * s.y_scale() * s.y_scale();
            assert!(var <= var_cap, "variance {var} above {var_cap}");
        }
    }

    #[test]
    fn constant_targets_predict_that_constant_everywhere() {
        let x = vec![vec![0.1, 0.9], vec![0.5, 0.5], vec![0.9, 0.1]];
        let y = vec![3.0, 3.0, 3.0];
        let s = gp_fit(x, y).unwrap();
        for q in [[0.0, 0.0], [0.25, 0.75], [1.0, 1.0]] {
            let (mean, var) = s.predict(&q).unwrap();
            assert!((mean - 3.0).abs() < 1e-12, "mean {mean}");
            assert!(var >= 0.0);
        }
    }

    #[test]
    fn single_point_posterior_matches_the_closed_form() {
        // n=1 standardization centers on the single value with scale 1, so
        // the posterior mean is y everywhere; the variance at distance ℓ is
        // σ² − (σ²e^{−1/2})²/(σ² + jitter).
        let sigma2 = 2.0;
        let jitter = 1e-6;
        let s = Surrogate::with_hyperparams(
            vec![vec![0.3]],
            vec![4.0],
            vec![0.2],
            sigma2,
            jitter,
        )
        .unwrap();
        let (mean, var) = s.predict(&[0.5]).unwrap(); // distance = ℓ = 0.2
        let k = sigma2 * (-0.5f64).exp();
        let expected_var = sigma2 - k * k / (sigma2 + jitter);
        assert!((mean - 4.0).abs() < 1e-12, "mean {mean}");
        assert!((var - expected_var).abs() < 1e-9, "var {var} vs {expected_var}");
    }

    #[test]
    fn predictions_far_from_data_revert_to_the_prior() {
        let s = Surrogate::with_hyperparams(
            vec![vec![0.0, 0.0], vec![0.05, 0.05]],
            vec![1.0, 2.0],
            vec![0.01, 0.01],
            1.0,
            1e-6,
        )
        .unwrap();
        let (mean, var) = s.predict(&[1.0, 1.0]).unwrap();
        assert!((mean - s.y_mean()).abs() < 1e-9, "mean {mean}");
        let prior_var = s.y_scale() * s.y_scale() * s.signal_var();
        assert!((var - prior_var).abs() < 1e-9, "var {var} vs {prior_var}");
    }

    #[test]
    fn ei_at_zero_z_is_the_normal_density_at_zero() {
        let ei = expected_improvement(1.0, 1.0, 1.0);
        assert!((ei - 0.3989423).abs() < 1e-6, "EI {ei}");
    }

    #[test]
    fn ei_degenerates_correctly_at_zero_variance() {
        assert_eq!(expected_improvement(2.0, 0.0, 1.0), 0.0);
        assert_eq!(expected_improvement(0.5, 0.0, 1.0), 0.5);
    }

    #[test]
    fn ei_is_nonnegative_across_a_sweep() {
        for i in 0..200 {
            let mean = -2.0 + i as f64 * 0.02;
            for var in [0.0, 0.01, 1.0, 100.0] {
                assert!(expected_improvement(mean, var, 0.0) >= 0.0);
            }
        }
    }

    #[test]
    fn all_zero_ei_falls_back_to_the_first_candidate() {
        // Zero signal variance makes every prediction (y_mean, 0), and
        // y_mean > best, so EI is identically zero.
        let s = Surrogate::with_hyperparams(
            vec![vec![0.2, 0.2], vec![0.8, 0.8]],
            vec![1.0, 2.0],
            vec![0.5, 0.5],
            0.0,
            1e-6,
        )
        .unwrap();
        let mut rng = Rng::from_seed(9);
        let got = propose_next(&s, &mut rng).unwrap();
        // Replay the candidate construction: shift drawn first, then the
        // first Halton point (index 1, bases 2 and 3).
        let mut replay = Rng::from_seed(9);
        let shift = [replay.next_f64(), replay.next_f64()];
        let expected: Vec<f64> = [0.5, 1.0 / 3.0]
            .iter()
            .zip(shift)
            .map(|(h, s)| {
                let v = h + s;
                v - v.floor()
            })
            .collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn proposal_seeks_the_unexplored_region() {
        // Equal values in one corner with short length-scales: the mean is
        // flat, so EI is pure prior variance and peaks far from the data.
        let s = Surrogate::with_hyperparams(
            vec![vec![0.1, 0.1], vec![0.12, 0.1], vec![0.1, 0.12]],
            vec![1.0, 1.0, 1.0],
            vec![0.1, 0.1],
            1.0,
            1e-6,
        )
        .unwrap();
        let mut rng = Rng::from_seed(4);
        let p = propose_next(&s, &mut rng).unwrap();
        let dist = ((p[0] - 0.1).powi(2) + (p[1] - 0.1).powi(2)).sqrt();
        assert!(dist > 0.3, "proposal {p:?} stayed near the data");
    }

    #[test]
    fn proposals_are_deterministic_per_seed() {
        let s = Surrogate::with_hyperparams(
            vec![vec![0.2, 0.3], vec![0.7, 0.6]],
            vec![1.0, 2.0],
            vec![0.5, 0.5],
            1.0,
            1e-6,
        )
        .unwrap();
        let a = propose_next(&s, &mut Rng::from_seed(11)).unwrap();
        let b = propose_next(&s, &mut Rng::from_seed(11)).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn pure_random_search_runs_exactly_n_random_trials() {
        let (best, trials) =
            optimize_cube(2, 6, 0, 3, |p| Ok((p[0] - 0.5).powi(2) + p[1])).unwrap();
        assert_eq!(trials.len(), 6);
        assert!(trials.iter().all(|t| t.phase == Phase::Random));
        let min = trials
            .iter()
            .map(|t| t.objective)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(best.objective, min);
    }

    #[test]
    fn quadratic_benchmark_is_solved_to_high_precision() {
        let objective =
            |p: &[f64]| Ok((p[0] - 0.3).powi(2) + (p[1] - 0.7).powi(2));
        let (best, trials) = optimize_cube(2, 5, 15, 42, objective).unwrap();
        assert_eq!(trials.len(), 20);
        assert!(best.objective <= 0.01, "best {}", best.objective);
    }

    #[test]
    fn failed_trials_are_penalized_and_the_search_continues() {
        let mut calls = 0usize;
        let objective = move |p: &[f64]| {
            calls += 1;
            if calls == 3 {
                Ok(f64::NAN)
            } else {
                Ok(p[0] + p[1])
            }
        };
        let (_, trials) = optimize_cube(2, 4, 2, 7, objective).unwrap();
        assert_eq!(trials.len(), 6);
        let failed: Vec<&CubeTrial> = trials.iter().filter(|t| t.failed).collect();
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].index, 3);
        let worst_before = trials[..2]
            .iter()
            .map(|t| t.objective)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(failed[0].objective, 2.0 * worst_before);
    }

    #[test]
    fn a_failure_before_any_success_gets_the_unit_penalty() {
        let mut calls = 0usize;
        let objective = move |p: &[f64]| {
            calls += 1;
            if calls == 1 {
                Err(Error::InvalidArgument("boom".into()))
            } else {
                Ok(p[0])
            }
        };
        let (_, trials) = optimize_cube(1, 3, 0, 7, objective).unwrap();
        assert!(trials[0].failed);
        assert_eq!(trials[0].objective, 1.0);
    }

    #[test]
    fn optimization_is_deterministic_per_seed() {
        let objective = |p: &[f64]| Ok((p[0] - 0.4).powi(2));
        let (_, a) = optimize_cube(1, 3, 4, 12, objective).unwrap();
        let (_, b) = optimize_cube(1, 3, 4, 12, objective).unwrap();
        assert_eq!(a.len(), b.len());
        for (ta, tb) in a.iter().zip(&b) {
            assert_eq!(ta.point, tb.point);
            assert_eq!(ta.objective.to_bits(), tb.objective.to_bits());
            assert_eq!(ta.phase, tb.phase);
        }
    }

    #[test]
    fn three_dim_optimize_reports_original_units_and_streams_trials() {
        let objective = |hp: &HyperParams| {
            Ok((hp.learning_rate.log10() + 3.0).powi(2) + hp.dropout_rate)
        };
        let mut streamed = Vec::new();
        let (best, trials) = optimize(3, 2, 21, objective, |t| {
            streamed.push(t.index);
            Ok(())
        })
        .unwrap();
        assert_eq!(trials.len(), 5);
        assert_eq!(streamed, vec![1, 2, 3, 4, 5]);
        for t in &trials {
            t.config.validate().unwrap();
            assert!(t.objective.is_finite());
        }
        assert!(trials.iter().any(|t| t.objective == best.objective));
    }

    #[test]
    fn trial_ledger_file_has_the_documented_shape() {
        let trials = vec![Trial {
            index: 1,
            config: HyperParams {
                learning_rate: 0.001,
                lstm_units: 64,
                dropout_rate: 0.25,
            },
            objective: 0.125,
            phase: Phase::Random,
            failed: false,
        }];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trials.csv");
        write_trials(&path, &trials).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "trial,phase,learning_rate,lstm_units,dropout_rate,val_mae\n\
             1,random,0.001,64,0.25,0.125\n"
        );
    }
}
