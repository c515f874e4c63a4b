//! Regression metric suite and histogram binning.
//!
//! Eight statistics over (y_true, y_pred) pairs: MSE, RMSE, MAE, MAPE,
//! MSLE, median absolute error, R2, and explained variance. Variances are
//! population variances (divide by n). MAPE excludes near-zero targets and
//! counts the exclusions instead of inventing an epsilon denominator.

use std::io::Write;
use std::path::Path;

use crate::{Error, Result};

/// Targets at or below this magnitude are excluded from MAPE.
pub const MAPE_EXCLUSION_THRESHOLD: f64 = 1e-8;

/// The full metric report. `mape`, `r2`, and `evs` are `None` when
/// undefined: MAPE when every target was excluded, R2 and explained
/// variance when the targets have zero variance.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    pub mape: Option<f64>,
    pub msle: f64,
    pub medae: f64,
    pub r2: Option<f64>,
    pub evs: Option<f64>,
    pub n: usize,
    pub n_excluded_mape: usize,
}

impl MetricsReport {
    /// Plain-text export, one `name = value` line per field. Undefined
    /// metrics render as `undefined`.
    pub fn to_text(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.6}"))
        }
        format!(
            "n = {}\nmse = {:.6}\nrmse = {:.6}\nmae = {:.6}\nmape = {}\n\
             msle = {:.6}\nmedae = {:.6}\nr2 = {}\nevs = {}\nmape_excluded = {}\n",
            self.n,
            self.mse,
            self.rmse,
            self.mae,
            opt(self.mape),
            self.msle,
            self.medae,
            opt(self.r2),
            opt(self.evs),
            self.n_excluded_mape,
        )
    }
}

/// Computes all eight statistics. `y_true` is expected on the 0–5 rating
/// scale (MSLE takes log1p of it unclamped; predictions are clamped to 0
/// before log1p because the linear model head can go negative).
pub fn compute_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<MetricsReport> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Dimension(format!(
            "y_true has {} samples, y_pred has {}",
            y_true.len(),
            y_pred.len()
        )));
    }
    let n = y_true.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "metrics need at least 2 samples".into(),
        ));
    }
    let nf = n as f64;

    let mut sum_sq = 0.0;
    let mut sum_abs = 0.0;
    let mut sum_err = 0.0;
    let mut sum_msle = 0.0;
    let mut sum_mape = 0.0;
    let mut n_mape = 0usize;
    let mut abs_errors = Vec::with_capacity(n);
    for i in 0..n {
        let e = y_true[i] - y_pred[i];
        sum_sq += e * e;
        sum_abs += e.abs();
        sum_err += e;
        abs_errors.push(e.abs());
        let log_diff = y_true[i].ln_1p() - y_pred[i].max(0.0).ln_1p();
        sum_msle += log_diff * log_diff;
        if y_true[i] > MAPE_EXCLUSION_THRESHOLD {
            sum_mape += e.abs() / y_true[i];
            n_mape += 1;
        }
    }

    let mse = sum_sq / nf;
    let mae = sum_abs / nf;
    let msle = sum_msle / nf;
    let mape = (n_mape > 0).then(|| sum_mape / n_mape as f64);

    abs_errors.sort_by(|a, b| a.partial_cmp(b).expect("finite absolute errors"));
    let medae = if n % 2 == 1 {
        abs_errors[n / 2]
    } else {
        (abs_errors[n / 2 - 1] + abs_errors[n / 2]) / 2.0
    };

    let y_mean = y_true.iter().sum::<f64>() / nf;
    let ss_tot: f64 = y_true.iter().map(|y| (y - y_mean) * (y - y_mean)).sum();
    let r2 = (ss_tot > 0.0).then(|| 1.0 - sum_sq / ss_tot);

    let var_y = ss_tot / nf;
    let err_mean = sum_err / nf;
    let var_err = sum_sq / nf - err_mean * err_mean;
    let evs = (var_y > 0.0).then(|| 1.0 - var_err / var_y);

    Ok(MetricsReport {
        mse,
        rmse: mse.sqrt(),
        mae,
        mape,
        msle,
        medae,
        r2,
        evs,
        n,
        n_excluded_mape: n - n_mape,
    })
}

/// Equal-width histogram with out-of-range counters.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    /// Total mass in the first and last in-range bins. Used to compare how
    /// strongly two score distributions cluster at the extremes.
    pub fn extreme_bin_mass(&self) -> u64 {
        match self.counts.as_slice() {
            [] => 0,
            [only] => *only,
            [first, .., last] => first + last,
        }
    }

    /// Comma-separated export: one `bin_lo,bin_hi,count` row per bin, then
    /// `underflow,,n` and `overflow,,n` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(file, "bin_lo,bin_hi,count")?;
        let width = (self.hi - self.lo) / self.counts.len() as f64;
        for (i, count) in self.counts.iter().enumerate() {
            let lo = self.lo + i as f64 * width;
            let hi = if i + 1 == self.counts.len() {
                self.hi
            } else {
                self.lo + (i + 1) as f64 * width
            };
            writeln!(file, "{lo},{hi},{count}")?;
        }
        writeln!(file, "underflow,,{}", self.underflow)?;
        writeln!(file, "overflow,,{}", self.overflow)?;
        file.flush()?;
        Ok(())
    }
}

/// Bins values into `bins` equal-width intervals over [lo, hi]. A value
/// lands in bin i iff lo + i·w ≤ v < lo + (i+1)·w, except hi itself lands
/// in the last bin. Out-of-range and non-finite values go to the
/// underflow/overflow counters, so counts always sum to the input length.
pub fn histogram(values: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::InvalidArgument("histogram needs at least 1 bin".into()));
    }
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "histogram range [{lo}, {hi}] is empty"
        )));
    }
    let mut counts = vec![0u64; bins];
    let mut underflow = 0u64;
    let mut overflow = 0u64;
    for &v in values {
        if v.is_nan() || v > hi {
            overflow += 1;
        } else if v < lo {
            underflow += 1;
        } else if v == hi {
            counts[bins - 1] += 1;
        } else {
            let idx = (((v - lo) / (hi - lo)) * bins as f64).floor() as usize;
            counts[idx.min(bins - 1)] += 1;
        }
    }
    Ok(Histogram {
        lo,
        hi,
        counts,
        underflow,
        overflow,
    })
}
