//! Small statistics helpers shared by the analysis code.

use crate::{wrap_phase, Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator). Zero for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Direction of the mean unit phasor, in (−π, π].
pub fn circular_mean(phases: &[f64]) -> f64 {
    let (s, c) = phases
        .iter()
        .fold((0.0, 0.0), |(s, c), p| (s + p.sin(), c + p.cos()));
    wrap_phase(s.atan2(c))
}

/// Re-expresses each phase on the branch closest to `center`.
pub fn unwrap_around(phases: &[f64], center: f64) -> Vec<f64> {
    phases.iter().map(|&p| center + wrap_phase(p - center)).collect()
}

/// Phase unwrapping along a sequence, starting from index `anchor` (left as
/// is) and walking outward so that successive values differ by at most π.
pub fn unwrap_from(phases: &[f64], anchor: usize) -> Vec<f64> {
    let mut out = phases.to_vec();
    for i in anchor + 1..out.len() {
        out[i] = out[i - 1] + wrap_phase(phases[i] - out[i - 1]);
    }
    for i in (0..anchor).rev() {
        out[i] = out[i + 1] + wrap_phase(phases[i] - out[i + 1]);
    }
    out
}

/// Least-squares slope of `y = s·x` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OriginFit {
    pub slope: f64,
    pub stderr: f64,
}

pub fn fit_through_origin(x: &[f64], y: &[f64]) -> Result<OriginFit> {
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    if x.len() < 2 || sxx == 0.0 {
        return Err(Error::RankDeficient(
            "need at least two points with a nonzero abscissa".into(),
        ));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let slope = sxy / sxx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a).powi(2)).sum();
    let stderr = (rss / (x.len() - 1) as f64 / sxx).sqrt();
    Ok(OriginFit { slope, stderr })
}

/// Straight line `y = slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    pub intercept_stderr: f64,
}

/// Weighted least-squares line. `weights` of `None` means equal weights.
///
/// With equal weights the parameter errors are scaled by the residual
/// variance; with explicit weights (inverse variances) they are not.
pub fn fit_line(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Result<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::RankDeficient("need at least two points".into()));
    }
    let w: Vec<f64> = match weights {
        Some(w) => w.to_vec(),
        None => vec![1.0; n],
    };
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(&w).map(|(a, b)| b * (a - xm).powi(2)).sum();
    if !(sxx > 0.0) || !sxx.is_finite() {
        return Err(Error::RankDeficient("abscissae are not distinct".into()));
    }
    let sxy: f64 = x
        .iter()
        .zip(y)
        .zip(&w)
        .map(|((a, b), c)| c * (a - xm) * (b - ym))
        .sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;

    let scale = if weights.is_some() {
        1.0
    } else if n > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (b - slope * a - intercept).powi(2))
            .sum();
        rss / (n - 2) as f64
    } else {
        0.0
    };
    let slope_var = scale / sxx;
    let intercept_var = scale * (1.0 / sw + xm * xm / sxx);
    Ok(LineFit {
        slope,
        slope_stderr: slope_var.sqrt(),
        intercept,
        intercept_stderr: intercept_var.sqrt(),
    })
}
