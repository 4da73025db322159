//! Noise models for the regression error: stationary Gaussian, stationary
//! Laplacian and first-order autoregressive Gaussian.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Smallest variance or scale a fit may return.
pub const SCALE_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    Gaussian,
    Laplacian,
    Ar1,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [NoiseKind::Gaussian, NoiseKind::Laplacian, NoiseKind::Ar1];

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Laplacian => "laplacian",
            NoiseKind::Ar1 => "ar1",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoiseKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        NoiseKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown noise kind '{s}' (gaussian, laplacian, ar1)")))
    }
}

impl Serialize for NoiseKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for NoiseKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseModel {
    Gaussian { variance: f64 },
    Laplacian { scale: f64 },
    Ar1 { c: f64, variance: f64 },
}

/// Reference distribution for standardized errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    StandardNormal,
    StandardLaplace,
}

impl Reference {
    pub fn cdf(self, x: f64) -> f64 {
        match self {
            Reference::StandardNormal => std_normal().cdf(x),
            Reference::StandardLaplace => {
                if x < 0.0 {
                    0.5 * x.exp()
                } else {
                    1.0 - 0.5 * (-x).exp()
                }
            }
        }
    }

    pub fn pdf(self, x: f64) -> f64 {
        match self {
            Reference::StandardNormal => (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            Reference::StandardLaplace => 0.5 * (-x.abs()).exp(),
        }
    }

    pub fn quantile(self, p: f64) -> f64 {
        match self {
            Reference::StandardNormal => std_normal().inverse_cdf(p),
            Reference::StandardLaplace => {
                if p < 0.5 {
                    (2.0 * p).ln()
                } else {
                    -(2.0 * (1.0 - p)).ln()
                }
            }
        }
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal is valid")
}

fn floored(v: f64, what: &str) -> f64 {
    if v < SCALE_FLOOR {
        log::warn!("degenerate {what} fit ({v:e}); flooring at {SCALE_FLOOR:e}");
        SCALE_FLOOR
    } else {
        v
    }
}

impl NoiseModel {
    pub fn kind(&self) -> NoiseKind {
        match self {
            NoiseModel::Gaussian { .. } => NoiseKind::Gaussian,
            NoiseModel::Laplacian { .. } => NoiseKind::Laplacian,
            NoiseModel::Ar1 { .. } => NoiseKind::Ar1,
        }
    }

    pub fn reference(&self) -> Reference {
        match self {
            NoiseModel::Laplacian { .. } => Reference::StandardLaplace,
            _ => Reference::StandardNormal,
        }
    }

    /// Half-width of the central interval of probability `c` for a variable
    /// with the given per-index scale.
    pub fn half_width(&self, scale: f64, c: f64) -> f64 {
        match self {
            NoiseModel::Laplacian { .. } => scale * (1.0 / (1.0 - c)).ln(),
            _ => scale * std_normal().inverse_cdf(0.5 + 0.5 * c),
        }
    }
}

fn nonempty<'a>(errors: impl IntoIterator<Item = &'a f64>) -> Result<Vec<f64>> {
    let v: Vec<f64> = errors.into_iter().copied().collect();
    if v.is_empty() {
        return Err(Error::EmptyTraining("no regression errors to fit".into()));
    }
    Ok(v)
}

pub fn fit_gaussian(errors: &[f64]) -> Result<NoiseModel> {
    let e = nonempty(errors)?;
    let var = e.iter().map(|v| v * v).sum::<f64>() / e.len() as f64;
    Ok(NoiseModel::Gaussian {
        variance: floored(var, "Gaussian"),
    })
}

pub fn fit_laplacian(errors: &[f64]) -> Result<NoiseModel> {
    let e = nonempty(errors)?;
    let b = e.iter().map(|v| v.abs()).sum::<f64>() / e.len() as f64;
    Ok(NoiseModel::Laplacian {
        scale: floored(b, "Laplacian"),
    })
}

/// Conditional MLE over error sequences; each sequence is preceded by a
/// zero initial error.
pub fn fit_ar1(sequences: &[Vec<f64>]) -> Result<NoiseModel> {
    let total: usize = sequences.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(Error::EmptyTraining("no regression error sequences to fit".into()));
    }
    let pairs = || {
        sequences.iter().flat_map(|s| {
            std::iter::once(0.0)
                .chain(s.iter().copied())
                .zip(s.iter().copied())
        })
    };
    let num: f64 = pairs().map(|(a, b)| a * b).sum();
    let den: f64 = pairs().map(|(a, _)| a * a).sum();
    if den == 0.0 {
        return Err(Error::UndefinedCoefficient(
            "all lagged errors are zero; the AR1 coefficient is undefined".into(),
        ));
    }
    let c = num / den;
    if c.abs() >= 1.0 {
        log::warn!("AR1 coefficient {c} is not below 1 in magnitude; the scale grows without bound");
    }
    let var = pairs().map(|(a, b)| (c * a - b).powi(2)).sum::<f64>() / total as f64;
    Ok(NoiseModel::Ar1 {
        c,
        variance: floored(var, "AR1"),
    })
}

/// Fits the requested kind; the stationary kinds pool all entries.
pub fn fit(kind: NoiseKind, sequences: &[Vec<f64>]) -> Result<NoiseModel> {
    let flat: Vec<f64> = sequences.iter().flatten().copied().collect();
    match kind {
        NoiseKind::Gaussian => fit_gaussian(&flat),
        NoiseKind::Laplacian => fit_laplacian(&flat),
        NoiseKind::Ar1 => fit_ar1(sequences),
    }
}

/// Scale (standard deviation, or Laplace `b`) for coarse indices 1..=horizon.
pub fn noise_scale_sequence(model: &NoiseModel, horizon: usize) -> Vec<f64> {
    match *model {
        NoiseModel::Gaussian { variance } => vec![variance.sqrt(); horizon],
        NoiseModel::Laplacian { scale } => vec![scale; horizon],
        NoiseModel::Ar1 { c, variance } => {
            let mut var = 0.0;
            (0..horizon)
                .map(|_| {
                    var = c * c * var + variance;
                    var.sqrt()
                })
                .collect()
        }
    }
}

/// Fraction of errors inside the central interval of probability `c`.
pub fn validation_frequency(model: &NoiseModel, sequences: &[Vec<f64>], c: f64) -> Result<f64> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::Domain(format!("coverage level {c} outside (0, 1)")));
    }
    let horizon = sequences.iter().map(Vec::len).max().unwrap_or(0);
    let total: usize = sequences.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(Error::EmptyTest("no test errors".into()));
    }
    let widths: Vec<f64> = noise_scale_sequence(model, horizon)
        .into_iter()
        .map(|s| model.half_width(s, c))
        .collect();
    let inside = sequences
        .iter()
        .flat_map(|s| s.iter().zip(&widths))
        .filter(|(e, w)| e.abs() <= **w)
        .count();
    Ok(inside as f64 / total as f64)
}

/// Errors divided by the per-index scale of the model.
pub fn standardize_errors(model: &NoiseModel, sequences: &[Vec<f64>]) -> Vec<f64> {
    let horizon = sequences.iter().map(Vec::len).max().unwrap_or(0);
    let scales = noise_scale_sequence(model, horizon);
    sequences
        .iter()
        .flat_map(|s| s.iter().zip(&scales).map(|(e, sc)| e / sc))
        .collect()
}

/// Two-sided Kolmogorov–Smirnov distance between the sample and the reference.
pub fn ks_statistic(samples: &[f64], reference: Reference) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyTest("no samples for the K-S statistic".into()));
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    Ok(x.iter().enumerate().fold(0.0, |d: f64, (i, &xi)| {
        let f = reference.cdf(xi);
        d.max((i + 1) as f64 / n - f).max(f - i as f64 / n)
    }))
}

/// One histogram bin with the reference density at its centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub density: f64,
}

/// Equal-width histogram of standardized errors over their range.
pub fn histogram(samples: &[f64], bins: usize, reference: Reference) -> Vec<HistogramBin> {
    if samples.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        hi = lo + 1.0;
    }
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &s in samples {
        let b = (((s - lo) / w) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| {
            let lower = lo + i as f64 * w;
            HistogramBin {
                lower,
                upper: lower + w,
                count,
                density: reference.pdf(lower + 0.5 * w),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_fits() {
        assert_eq!(fit_gaussian(&[1.0, -1.0]).unwrap(), NoiseModel::Gaussian { variance: 1.0 });
        assert_eq!(fit_laplacian(&[2.0, -2.0]).unwrap(), NoiseModel::Laplacian { scale: 2.0 });
        assert_eq!(fit_gaussian(&[0.0; 3]).unwrap(), NoiseModel::Gaussian { variance: SCALE_FLOOR });
        assert!(matches!(fit_laplacian(&[]), Err(Error::EmptyTraining(_))));
    }

    #[test]
    fn ar1_hand_example() {
        let NoiseModel::Ar1 { c, variance } = fit_ar1(&[vec![1.0, 0.5, 0.25]]).unwrap() else {
            panic!()
        };
        assert_eq!(c, 0.5);
        assert!((variance - 1.0 / 3.0).abs() < 1e-15);
        // Length-one sequences only see the zero initial lag.
        assert!(matches!(fit_ar1(&[vec![3.0], vec![2.0]]), Err(Error::UndefinedCoefficient(_))));
    }

    #[test]
    fn scale_sequences() {
        let s = noise_scale_sequence(&NoiseModel::Ar1 { c: 1.0, variance: 1.0 }, 4);
        for (n, v) in s.iter().enumerate() {
            assert!((v * v - (n + 1) as f64).abs() < 1e-12);
        }
        assert_eq!(noise_scale_sequence(&NoiseModel::Gaussian { variance: 4.0 }, 3), vec![2.0; 3]);
        assert!(noise_scale_sequence(&NoiseModel::Ar1 { c: 0.5, variance: 1.0 }, 0).is_empty());
    }

    #[test]
    fn laplace_interval_matches_cdf() {
        let m = NoiseModel::Laplacian { scale: 1.0 };
        let e = vec![vec![0.5, -0.5]];
        // P(|X| <= 0.5) = 1 - exp(-0.5).
        let edge = 1.0 - (-0.5f64).exp();
        assert_eq!(validation_frequency(&m, &e, edge + 1e-9).unwrap(), 1.0);
        assert_eq!(validation_frequency(&m, &e, edge - 1e-9).unwrap(), 0.0);
        let zeros = vec![vec![0.0; 5]];
        assert_eq!(validation_frequency(&NoiseModel::Gaussian { variance: 1.0 }, &zeros, 0.1).unwrap(), 1.0);
    }

    #[test]
    fn ks_examples() {
        assert!((ks_statistic(&[0.0], Reference::StandardNormal).unwrap() - 0.5).abs() < 1e-12);
        let x = Reference::StandardNormal.quantile(0.999);
        assert!((ks_statistic(&[x], Reference::StandardNormal).unwrap() - 0.999).abs() < 1e-9);
        let q: Vec<f64> = (1..=100)
            .map(|i| Reference::StandardLaplace.quantile((i as f64 - 0.5) / 100.0))
            .collect();
        assert!(ks_statistic(&q, Reference::StandardLaplace).unwrap() <= 0.005 + 1e-12);
        assert!(ks_statistic(&[], Reference::StandardNormal).is_err());
    }

    #[test]
    fn histogram_counts_everything() {
        let h = histogram(&[-1.0, 0.0, 0.1, 1.0], 4, Reference::StandardNormal);
        assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 4);
        assert_eq!(h[3].count, 1);
    }
}
