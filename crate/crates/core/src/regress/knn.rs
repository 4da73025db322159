use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    Uniform,
    InverseDistance,
}

impl Weighting {
    pub fn as_str(self) -> &'static str {
        match self {
            Weighting::Uniform => "uniform",
            Weighting::InverseDistance => "inverse-distance",
        }
    }
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Weighting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Weighting::Uniform),
            "inverse-distance" => Ok(Weighting::InverseDistance),
            _ => Err(Error::Config(format!("unknown kNN weighting '{s}'"))),
        }
    }
}

impl Serialize for Weighting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Weighting {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Weighted average of the responses of the `k` nearest training features
/// (Euclidean distance, ties broken by record order). Under inverse-distance
/// weighting, neighbours at zero distance take all the weight.
pub fn knn_fit_predict(
    features: &[Vec<f64>],
    responses: &[f64],
    k: usize,
    weighting: Weighting,
    query: &[f64],
) -> Result<f64> {
    if features.is_empty() {
        return Err(Error::EmptyTraining("kNN has no training records".into()));
    }
    if features.len() != responses.len() {
        return Err(Error::Shape(format!(
            "{} feature vectors vs {} responses",
            features.len(),
            responses.len()
        )));
    }
    if k == 0 || k > features.len() {
        return Err(Error::Config(format!(
            "k = {k} with {} training records",
            features.len()
        )));
    }
    let mut dist: Vec<(f64, usize)> = features
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let d2: f64 = f.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
            (d2.sqrt(), i)
        })
        .collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let near = &dist[..k];
    Ok(match weighting {
        Weighting::Uniform => near.iter().map(|&(_, i)| responses[i]).sum::<f64>() / k as f64,
        Weighting::InverseDistance => {
            let zeros: Vec<usize> = near.iter().filter(|(d, _)| *d == 0.0).map(|&(_, i)| i).collect();
            if !zeros.is_empty() {
                zeros.iter().map(|&i| responses[i]).sum::<f64>() / zeros.len() as f64
            } else {
                let (num, den) = near.iter().fold((0.0, 0.0), |(n, d), &(di, i)| {
                    (n + responses[i] / di, d + 1.0 / di)
                });
                num / den
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let f = vec![vec![0.0], vec![2.0], vec![-2.0]];
        let r = vec![5.0, 1.0, 3.0];
        assert_eq!(knn_fit_predict(&f, &r, 1, Weighting::Uniform, &[2.0]).unwrap(), 1.0);
        assert_eq!(knn_fit_predict(&f[1..], &r[1..], 2, Weighting::Uniform, &[0.0]).unwrap(), 2.0);
        assert_eq!(knn_fit_predict(&f, &r, 3, Weighting::InverseDistance, &[0.0]).unwrap(), 5.0);
        let w = knn_fit_predict(&f, &r, 2, Weighting::InverseDistance, &[1.0]).unwrap();
        assert!((w - 3.0).abs() < 1e-15);
        assert!(matches!(
            knn_fit_predict(&[], &[], 1, Weighting::Uniform, &[0.0]),
            Err(Error::EmptyTraining(_))
        ));
    }
}
