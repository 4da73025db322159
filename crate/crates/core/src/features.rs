//! Feature extraction from parameters, time and surrogate residuals, and
//! standardization of features and responses.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::reduction::{gappy_reconstruct, pca_project, ResidualPca, SamplingMatrix};

/// The thirteen feature constructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureKind {
    Params,
    ParamsTime,
    ResNorm,
    ParamsResNorm,
    ParamsResNormTime,
    ParamsResidual,
    ParamsResidualTime,
    ParamsResPca,
    ParamsResPcaTime,
    ParamsGappyPca,
    ParamsGappyPcaTime,
    ParamsSampledRes,
    ParamsSampledResTime,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 13] = [
        FeatureKind::Params,
        FeatureKind::ParamsTime,
        FeatureKind::ResNorm,
        FeatureKind::ParamsResNorm,
        FeatureKind::ParamsResNormTime,
        FeatureKind::ParamsResidual,
        FeatureKind::ParamsResidualTime,
        FeatureKind::ParamsResPca,
        FeatureKind::ParamsResPcaTime,
        FeatureKind::ParamsGappyPca,
        FeatureKind::ParamsGappyPcaTime,
        FeatureKind::ParamsSampledRes,
        FeatureKind::ParamsSampledResTime,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Params => "params",
            FeatureKind::ParamsTime => "params+time",
            FeatureKind::ResNorm => "resnorm",
            FeatureKind::ParamsResNorm => "params+resnorm",
            FeatureKind::ParamsResNormTime => "params+resnorm+time",
            FeatureKind::ParamsResidual => "params+residual",
            FeatureKind::ParamsResidualTime => "params+residual+time",
            FeatureKind::ParamsResPca => "params+res-PCA",
            FeatureKind::ParamsResPcaTime => "params+res-PCA+time",
            FeatureKind::ParamsGappyPca => "params+gappy-PCA",
            FeatureKind::ParamsGappyPcaTime => "params+gappy-PCA+time",
            FeatureKind::ParamsSampledRes => "params+sampled-res",
            FeatureKind::ParamsSampledResTime => "params+sampled-res+time",
        }
    }

    pub fn uses_params(self) -> bool {
        self != FeatureKind::ResNorm
    }

    pub fn uses_time(self) -> bool {
        matches!(
            self,
            FeatureKind::ParamsTime
                | FeatureKind::ParamsResNormTime
                | FeatureKind::ParamsResidualTime
                | FeatureKind::ParamsResPcaTime
                | FeatureKind::ParamsGappyPcaTime
                | FeatureKind::ParamsSampledResTime
        )
    }

    pub fn uses_norm(self) -> bool {
        matches!(
            self,
            FeatureKind::ResNorm | FeatureKind::ParamsResNorm | FeatureKind::ParamsResNormTime
        )
    }

    pub fn uses_full_residual(self) -> bool {
        matches!(self, FeatureKind::ParamsResidual | FeatureKind::ParamsResidualTime)
    }

    pub fn uses_pca(self) -> bool {
        matches!(self, FeatureKind::ParamsResPca | FeatureKind::ParamsResPcaTime)
    }

    pub fn uses_gappy(self) -> bool {
        matches!(self, FeatureKind::ParamsGappyPca | FeatureKind::ParamsGappyPcaTime)
    }

    pub fn uses_sampled(self) -> bool {
        matches!(self, FeatureKind::ParamsSampledRes | FeatureKind::ParamsSampledResTime)
    }

    pub fn needs_residual(self) -> bool {
        !matches!(self, FeatureKind::Params | FeatureKind::ParamsTime)
    }

    /// Kinds whose features are computed from residual principal components.
    pub fn needs_pca(self) -> bool {
        self.uses_pca() || self.uses_gappy()
    }

    /// Kinds that only ever read the sampled residual entries.
    pub fn needs_sampling(self) -> bool {
        self.uses_gappy() || self.uses_sampled()
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = FeatureKind::ALL.iter().map(|k| k.as_str()).collect();
                Error::Config(format!("unknown feature kind '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

impl Serialize for FeatureKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for FeatureKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A feature kind together with the residual artifacts it needs.
#[derive(Debug, Clone)]
pub struct FeatureSpec {
    pub kind: FeatureKind,
    pub pca: Option<ResidualPca>,
    pub sampling: Option<SamplingMatrix>,
}

impl FeatureSpec {
    pub fn new(kind: FeatureKind, pca: Option<ResidualPca>, sampling: Option<SamplingMatrix>) -> Result<Self> {
        if kind.needs_pca() != pca.is_some() {
            return Err(Error::Config(format!(
                "feature kind {kind} {} residual principal components",
                if kind.needs_pca() { "requires" } else { "does not take" }
            )));
        }
        if kind.needs_sampling() != sampling.is_some() {
            return Err(Error::Config(format!(
                "feature kind {kind} {} a sampling matrix",
                if kind.needs_sampling() { "requires" } else { "does not take" }
            )));
        }
        Ok(FeatureSpec { kind, pca, sampling })
    }

    pub fn plain(kind: FeatureKind) -> Result<Self> {
        FeatureSpec::new(kind, None, None)
    }

    /// Feature dimension for `n_params` parameters and state dimension `n_state`.
    pub fn dim(&self, n_params: usize, n_state: usize) -> usize {
        let k = self.kind;
        let mut d = if k.uses_params() { n_params } else { 0 };
        if k.uses_norm() {
            d += 1;
        }
        if k.uses_full_residual() {
            d += n_state;
        }
        if k.uses_pca() || k.uses_gappy() {
            d += self.pca.as_ref().map_or(0, |p| p.n_components());
        }
        if k.uses_sampled() {
            d += self.sampling.as_ref().map_or(0, |p| p.len());
        }
        if k.uses_time() {
            d += 1;
        }
        d
    }
}

/// Residual information passed to feature extraction.
#[derive(Debug, Clone, Copy)]
pub enum ResidualInput<'a> {
    None,
    /// The full residual vector.
    Full(&'a [f64]),
    /// Only the entries selected by the feature set's sampling matrix, in its order.
    Sampled(&'a [f64]),
}

/// Assembles `[μ; ‖r‖; r; Φ_rᵀ(r - r̄); gappy coefficients; P r; t]`
/// restricted to the blocks of its feature kind.
pub fn extract_features(spec: &FeatureSpec, mu: &[f64], t: f64, residual: ResidualInput<'_>) -> Result<Vec<f64>> {
    let k = spec.kind;
    let mut out = Vec::new();
    if k.uses_params() {
        out.extend_from_slice(mu);
    }
    if k.needs_residual() {
        let missing = || Error::MissingInput(format!("feature kind {k} needs residual information"));
        let full = match residual {
            ResidualInput::Full(r) => Some(r),
            ResidualInput::Sampled(_) if k.needs_sampling() => None,
            _ => return Err(missing()),
        };
        if k.uses_norm() {
            out.push(norm2(full.ok_or_else(missing)?));
        }
        if k.uses_full_residual() {
            out.extend_from_slice(full.ok_or_else(missing)?);
        }
        if k.uses_pca() {
            let pca = spec.pca.as_ref().expect("validated attachments");
            out.extend(pca_project(pca, full.ok_or_else(missing)?)?);
        }
        if k.needs_sampling() {
            let p = spec.sampling.as_ref().expect("validated attachments");
            let sampled = match residual {
                ResidualInput::Full(r) => p.sample(r),
                ResidualInput::Sampled(s) => {
                    if s.len() != p.len() {
                        return Err(Error::Shape(format!(
                            "{} sampled entries for {} sample indices",
                            s.len(),
                            p.len()
                        )));
                    }
                    s.to_vec()
                }
                ResidualInput::None => unreachable!(),
            };
            if k.uses_gappy() {
                let pca = spec.pca.as_ref().expect("validated attachments");
                let mean = p.sample(&pca.mean);
                out.extend(gappy_reconstruct(pca, p, &sampled, &mean)?);
            } else {
                out.extend(sampled);
            }
        }
    }
    if k.uses_time() {
        out.push(t);
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition(format!("non-finite feature for kind {k}")));
    }
    Ok(out)
}

/// Per-component mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Moments {
    /// Population statistics; components with (numerically) zero spread get
    /// std 1 so they pass through unscaled.
    pub fn fit(rows: &[&[f64]]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::EmptyTraining("no rows to standardize".into()))?;
        let d = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            if r.len() != d {
                return Err(Error::Shape(format!("row length {} vs {d}", r.len())));
            }
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .iter()
            .zip(&mean)
            .map(|(s, m)| {
                let sd = (s / n).sqrt();
                if sd == 0.0 || sd <= 1e-12 * m.abs() {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Moments { mean, std })
    }

    pub fn forward(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v)?;
        Ok(v.iter().zip(&self.mean).zip(&self.std).map(|((x, m), s)| (x - m) / s).collect())
    }

    pub fn inverse(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v)?;
        Ok(v.iter().zip(&self.mean).zip(&self.std).map(|((x, m), s)| x * s + m).collect())
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.mean.len() {
            return Err(Error::Shape(format!(
                "vector length {} vs standardizer dimension {}",
                v.len(),
                self.mean.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Feature,
    Response,
}

/// Feature-side and response-side statistics fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub features: Moments,
    pub responses: Moments,
}

pub fn fit_standardizer(features: &[&[f64]], responses: &[&[f64]]) -> Result<Standardizer> {
    Ok(Standardizer {
        features: Moments::fit(features)?,
        responses: Moments::fit(responses)?,
    })
}

pub fn standardize(s: &Standardizer, v: &[f64], direction: Direction, side: Side) -> Result<Vec<f64>> {
    let m = match side {
        Side::Feature => &s.features,
        Side::Response => &s.responses,
    };
    match direction {
        Direction::Forward => m.forward(v),
        Direction::Inverse => m.inverse(v),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn kind_names_round_trip() {
        for k in FeatureKind::ALL {
            assert_eq!(k.as_str().parse::<FeatureKind>().unwrap(), k);
        }
        assert!("params+magic".parse::<FeatureKind>().is_err());
    }

    #[test]
    fn params_only() {
        let spec = FeatureSpec::plain(FeatureKind::Params).unwrap();
        let f = extract_features(&spec, &[-1.0, 0.5], 3.0, ResidualInput::None).unwrap();
        assert_eq!(f, vec![-1.0, 0.5]);
    }

    #[test]
    fn resnorm_time_layout() {
        let spec = FeatureSpec::plain(FeatureKind::ParamsResNormTime).unwrap();
        let f = extract_features(&spec, &[-1.0, 0.5], 0.2, ResidualInput::Full(&[3.0, 4.0])).unwrap();
        assert_eq!(f, vec![-1.0, 0.5, 5.0, 0.2]);
        assert_eq!(spec.dim(2, 2), 4);
        assert!(matches!(
            extract_features(&spec, &[-1.0, 0.5], 0.2, ResidualInput::None),
            Err(Error::MissingInput(_))
        ));
    }

    #[test]
    fn attachments_are_checked() {
        assert!(FeatureSpec::plain(FeatureKind::ParamsResPca).is_err());
        let pca = ResidualPca {
            basis: DMatrix::identity(3, 1),
            mean: vec![0.0; 3],
            singular_values: vec![1.0],
        };
        assert!(FeatureSpec::new(FeatureKind::Params, Some(pca), None).is_err());
    }

    #[test]
    fn standardizer_examples() {
        let f0 = [0.0];
        let f2 = [2.0];
        let s = fit_standardizer(&[&f0, &f2], &[&[-3.0], &[-1.0], &[1.0], &[3.0]]).unwrap();
        assert_eq!(s.features.mean, vec![1.0]);
        assert_eq!(s.features.std, vec![1.0]);
        assert_eq!(s.responses.mean, vec![0.0]);
        assert!((s.responses.std[0] - 5f64.sqrt()).abs() < 1e-15);
        let c = Moments::fit(&[&[4.0], &[4.0]]).unwrap();
        assert_eq!(c.std, vec![1.0]);
        let m = Moments {
            mean: vec![1.0],
            std: vec![2.0],
        };
        assert_eq!(m.forward(&[5.0]).unwrap(), vec![2.0]);
        assert!(fit_standardizer(&[], &[]).is_err());
    }
}
