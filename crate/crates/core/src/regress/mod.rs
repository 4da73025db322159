//! Regression models of the surrogate error: nearest neighbours, feed-forward
//! networks, error-feedback models (ARX, ANN-I), latent linear dynamics
//! (LARX), recurrent networks (RNN, LSTM) and a time-local GP baseline.

pub mod adam;
pub mod gp;
pub mod knn;
pub mod nets;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{mix_seed, Response, Sequence};
use crate::error::{Error, Result};
use crate::features::{FeatureKind, Moments as Stats, Standardizer};
pub use adam::{adam_step, Moments, TrainConfig};
pub use gp::{gp_fit_predict, lambda_grid, GpFactor};
pub use knn::{knn_fit_predict, Weighting};
pub use nets::{run_sequence, Arch, Layout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Knn,
    Ann,
    Arx,
    AnnI,
    Larx,
    Rnn,
    Lstm,
    Gp,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::Knn,
        Family::Ann,
        Family::Arx,
        Family::AnnI,
        Family::Larx,
        Family::Rnn,
        Family::Lstm,
        Family::Gp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Knn => "knn",
            Family::Ann => "ann",
            Family::Arx => "arx",
            Family::AnnI => "ann-i",
            Family::Larx => "larx",
            Family::Rnn => "rnn",
            Family::Lstm => "lstm",
            Family::Gp => "gp",
        }
    }

    /// Mode used when none is requested.
    pub fn default_mode(self) -> Mode {
        match self {
            Family::Knn | Family::Ann | Family::Gp => Mode::Nonrecursive,
            _ => Mode::Rt,
        }
    }

    /// Hyperparameter grid used for model selection.
    pub fn default_grid(self) -> Vec<Hyper> {
        let alphas: Vec<f64> = (1..=5).map(|i| 10f64.powi(-i)).collect();
        let mut grid = Vec::new();
        match self {
            Family::Knn => {
                for k in 1..=5 {
                    for weighting in [Weighting::Uniform, Weighting::InverseDistance] {
                        grid.push(Hyper::Knn { k, weighting });
                    }
                }
            }
            Family::Arx => grid.extend(alphas.iter().map(|&alpha| Hyper::Arx { alpha })),
            Family::Larx => {
                for latent in [10, 25, 50, 100] {
                    for &alpha in &alphas {
                        grid.push(Hyper::Larx { latent, alpha });
                    }
                }
            }
            Family::Gp => grid.extend(lambda_grid().into_iter().map(|lambda| Hyper::Gp { lambda })),
            Family::Ann | Family::AnnI | Family::Rnn | Family::Lstm => {
                for layers in [1, 2] {
                    for width in [10, 25, 50, 100] {
                        for &alpha in &alphas {
                            grid.push(Hyper::network(self, layers, width, alpha));
                        }
                    }
                }
            }
        }
        grid
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Family::ALL.iter().copied().find(|f| f.as_str() == s).ok_or_else(|| {
            let names: Vec<&str> = Family::ALL.iter().map(|f| f.as_str()).collect();
            Error::Config(format!("unknown family '{s}' (registered: {})", names.join(", ")))
        })
    }
}

impl Serialize for Family {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Family {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Training mode: plain regression, teacher-forced latent (NRT), or
/// prediction-fed recursion trained through time (RT).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Nonrecursive,
    Nrt,
    Rt,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Nonrecursive => "nonrecursive",
            Mode::Nrt => "nrt",
            Mode::Rt => "rt",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nonrecursive" => Ok(Mode::Nonrecursive),
            "nrt" => Ok(Mode::Nrt),
            "rt" => Ok(Mode::Rt),
            _ => Err(Error::Config(format!("unknown training mode '{s}' (nonrecursive, nrt, rt)"))),
        }
    }
}

impl Serialize for Mode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Mode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// One point of a hyperparameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Hyper {
    Knn { k: usize, weighting: Weighting },
    Ann { layers: usize, width: usize, alpha: f64 },
    Arx { alpha: f64 },
    AnnI { layers: usize, width: usize, alpha: f64 },
    Larx { latent: usize, alpha: f64 },
    Rnn { layers: usize, width: usize, alpha: f64 },
    Lstm { layers: usize, width: usize, alpha: f64 },
    Gp { lambda: f64 },
}

impl Hyper {
    pub fn network(family: Family, layers: usize, width: usize, alpha: f64) -> Hyper {
        match family {
            Family::Ann => Hyper::Ann { layers, width, alpha },
            Family::AnnI => Hyper::AnnI { layers, width, alpha },
            Family::Rnn => Hyper::Rnn { layers, width, alpha },
            Family::Lstm => Hyper::Lstm { layers, width, alpha },
            _ => panic!("{family} is not a layered network"),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Hyper::Knn { .. } => Family::Knn,
            Hyper::Ann { .. } => Family::Ann,
            Hyper::Arx { .. } => Family::Arx,
            Hyper::AnnI { .. } => Family::AnnI,
            Hyper::Larx { .. } => Family::Larx,
            Hyper::Rnn { .. } => Family::Rnn,
            Hyper::Lstm { .. } => Family::Lstm,
            Hyper::Gp { .. } => Family::Gp,
        }
    }

    pub fn alpha(&self) -> f64 {
        match *self {
            Hyper::Ann { alpha, .. }
            | Hyper::Arx { alpha }
            | Hyper::AnnI { alpha, .. }
            | Hyper::Larx { alpha, .. }
            | Hyper::Rnn { alpha, .. }
            | Hyper::Lstm { alpha, .. } => alpha,
            Hyper::Knn { .. } | Hyper::Gp { .. } => 0.0,
        }
    }

    pub fn arch(&self, n_in: usize) -> Arch {
        let (layers, width) = match *self {
            Hyper::Ann { layers, width, .. }
            | Hyper::AnnI { layers, width, .. }
            | Hyper::Rnn { layers, width, .. }
            | Hyper::Lstm { layers, width, .. } => (layers, width),
            Hyper::Larx { latent, .. } => (0, latent),
            _ => (0, 0),
        };
        Arch {
            family: self.family(),
            n_in,
            layers,
            width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Hyper::Knn { k, .. } => k >= 1,
            Hyper::Ann { layers, width, alpha }
            | Hyper::AnnI { layers, width, alpha }
            | Hyper::Rnn { layers, width, alpha }
            | Hyper::Lstm { layers, width, alpha } => layers >= 1 && width >= 1 && alpha >= 0.0,
            Hyper::Arx { alpha } => alpha >= 0.0,
            Hyper::Larx { latent, alpha } => latent >= 1 && alpha >= 0.0,
            Hyper::Gp { lambda } => lambda > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid hyperparameters {self:?}")))
        }
    }
}

/// A standardized training sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSeq {
    pub feats: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub y0: f64,
}

/// Summed squared error over the batch plus `alpha` times the squared
/// weight norm, and its exact gradient.
pub fn loss_and_grad(arch: &Arch, params: &[f64], batch: &[TrainSeq], mode: Mode, alpha: f64) -> Result<(f64, Vec<f64>)> {
    arch.check_mode(mode)?;
    let layout = arch.layout();
    if params.len() != layout.len {
        return Err(Error::Shape(format!(
            "{} parameters for a layout of {}",
            params.len(),
            layout.len
        )));
    }
    let mut g = vec![0.0; layout.len];
    let mut loss = 0.0;
    for s in batch {
        let pred = run_sequence(arch, &layout, params, &s.feats, s.y0, Some(&s.targets), mode, Some(&mut g))?;
        loss += pred.iter().zip(&s.targets).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    loss += alpha * layout.weight_norm2(params);
    layout.add_ridge_grad(params, alpha, &mut g);
    Ok((loss, g))
}

fn batch_sse(arch: &Arch, layout: &Layout, params: &[f64], batch: &[TrainSeq], mode: Mode) -> Result<f64> {
    let mut loss = 0.0;
    for s in batch {
        let pred = run_sequence(arch, layout, params, &s.feats, s.y0, Some(&s.targets), mode, None)?;
        loss += pred.iter().zip(&s.targets).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartLog {
    pub seed: u64,
    pub epochs: usize,
    pub best_epoch: usize,
    /// `None` when the restart produced a non-finite loss.
    pub best_holdout_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainingLog {
    pub restarts: Vec<RestartLog>,
    pub selected_restart: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnData {
    pub features: Vec<Vec<f64>>,
    pub responses: Vec<f64>,
}

/// Per-coarse-index GP weights over standardized parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpData {
    pub inputs: Vec<Vec<f64>>,
    pub weights: Vec<Vec<f64>>,
    pub means: Vec<f64>,
}

/// A trained regression function with its standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub hyper: Hyper,
    pub mode: Mode,
    pub response: Response,
    pub feature_kind: FeatureKind,
    pub n_in: usize,
    pub layout: Layout,
    pub params: Vec<f64>,
    pub standardizer: Standardizer,
    pub knn: Option<KnnData>,
    pub gp: Option<GpData>,
    pub log: TrainingLog,
}

impl RegressionModel {
    pub fn family(&self) -> Family {
        self.hyper.family()
    }

    pub fn arch(&self) -> Arch {
        self.hyper.arch(self.n_in)
    }

    /// Latent dimension of the recursion (0 for static maps).
    pub fn latent_dim(&self) -> usize {
        match self.hyper {
            Hyper::Arx { .. } | Hyper::AnnI { .. } => 1,
            Hyper::Larx { latent, .. } => latent,
            Hyper::Rnn { layers, width, .. } => layers * width,
            Hyper::Lstm { layers, width, .. } => 2 * layers * width,
            _ => 0,
        }
    }
}

fn standardize_seq(s: &Standardizer, seq: &Sequence, response: Response, use_mu: bool) -> Result<TrainSeq> {
    let feats = if use_mu {
        vec![s.features.forward(&seq.mu)?]
    } else {
        seq.features
            .iter()
            .map(|f| s.features.forward(f))
            .collect::<Result<Vec<_>>>()?
    };
    let r = &s.responses;
    let targets = seq
        .targets(response)
        .iter()
        .map(|v| (v - r.mean[0]) / r.std[0])
        .collect();
    Ok(TrainSeq {
        feats,
        targets,
        y0: (seq.initial(response) - r.mean[0]) / r.std[0],
    })
}

fn fit_stats(train: &[&Sequence], response: Response, use_mu: bool) -> Result<Standardizer> {
    if train.is_empty() {
        return Err(Error::EmptyTraining("no training sequences".into()));
    }
    let feats: Vec<&[f64]> = if use_mu {
        train.iter().map(|s| s.mu.as_slice()).collect()
    } else {
        train.iter().flat_map(|s| s.features.iter().map(|f| f.as_slice())).collect()
    };
    let resp: Vec<[f64; 1]> = train.iter().flat_map(|s| s.targets(response).iter().map(|v| [*v])).collect();
    let resp_refs: Vec<&[f64]> = resp.iter().map(|r| r.as_slice()).collect();
    Ok(Standardizer {
        features: Stats::fit(&feats)?,
        responses: Stats::fit(&resp_refs)?,
    })
}

#[allow(clippy::too_many_arguments)]
fn train_restart(
    arch: &Arch,
    layout: &Layout,
    train: &[TrainSeq],
    hold: &[TrainSeq],
    mode: Mode,
    alpha: f64,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    seed: u64,
) -> Result<(Option<Vec<f64>>, RestartLog)> {
    let mut p = arch.init(rng);
    let mut moments = Moments::zeros(p.len());
    let monitor = if hold.is_empty() { train } else { hold };
    let mut best: Option<(f64, Vec<f64>, usize)> = None;
    let mut bad = 0;
    let mut epochs = 0;
    let mut failed = false;
    for epoch in 1..=cfg.max_epochs {
        let (loss, g) = loss_and_grad(arch, &p, train, mode, alpha)?;
        if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
            failed = true;
            break;
        }
        adam_step(&mut p, &g, &mut moments, epoch as u64, cfg);
        let h = batch_sse(arch, layout, &p, monitor, mode)?;
        epochs = epoch;
        if !h.is_finite() {
            failed = true;
            break;
        }
        if best.as_ref().is_none_or(|b| h < b.0) {
            best = Some((h, p.clone(), epoch));
            bad = 0;
        } else {
            bad += 1;
            if bad > cfg.patience {
                break;
            }
        }
    }
    if failed && best.is_none() {
        return Ok((
            None,
            RestartLog {
                seed,
                epochs,
                best_epoch: 0,
                best_holdout_loss: None,
            },
        ));
    }
    let (h, params, best_epoch) = best.expect("at least one epoch ran");
    Ok((
        Some(params),
        RestartLog {
            seed,
            epochs,
            best_epoch,
            best_holdout_loss: Some(h),
        },
    ))
}

/// Trains one hyperparameter setting: restarts with independent seeds,
/// each holding out a share of the training sequences for early stopping;
/// the restart with the lowest holdout loss is kept.
pub fn train_model(
    hyper: Hyper,
    mode: Mode,
    train: &[&Sequence],
    response: Response,
    kind: FeatureKind,
    cfg: &TrainConfig,
) -> Result<RegressionModel> {
    hyper.validate()?;
    cfg.validate()?;
    let family = hyper.family();
    let use_mu = family == Family::Gp;
    let standardizer = fit_stats(train, response, use_mu)?;
    let data: Vec<TrainSeq> = train
        .iter()
        .map(|s| standardize_seq(&standardizer, s, response, use_mu))
        .collect::<Result<_>>()?;
    let n_in = standardizer.features.mean.len();
    let arch = hyper.arch(n_in);
    let layout = arch.layout();
    let mut model = RegressionModel {
        hyper,
        mode,
        response,
        feature_kind: kind,
        n_in,
        layout: layout.clone(),
        params: Vec::new(),
        standardizer,
        knn: None,
        gp: None,
        log: TrainingLog::default(),
    };
    match family {
        Family::Knn => {
            if mode != Mode::Nonrecursive {
                return Err(Error::Config("kNN is trained nonrecursively".into()));
            }
            let mut features = Vec::new();
            let mut responses = Vec::new();
            for (s, d) in train.iter().zip(&data) {
                features.extend(d.feats.iter().cloned());
                responses.extend_from_slice(s.targets(response));
            }
            model.knn = Some(KnnData { features, responses });
            return Ok(model);
        }
        Family::Gp => {
            if mode != Mode::Nonrecursive {
                return Err(Error::Config("the GP baseline is trained nonrecursively".into()));
            }
            let Hyper::Gp { lambda } = hyper else { unreachable!() };
            let len = data[0].targets.len();
            if data.iter().any(|d| d.targets.len() != len) {
                return Err(Error::Shape("GP needs sequences on a common time grid".into()));
            }
            let inputs: Vec<Vec<f64>> = data.iter().map(|d| d.feats[0].clone()).collect();
            let factor = GpFactor::new(&inputs, lambda)?;
            let mut weights = Vec::with_capacity(len);
            let mut means = Vec::with_capacity(len);
            for n in 0..len {
                let y: Vec<f64> = data.iter().map(|d| d.targets[n]).collect();
                let (w, m) = factor.weights(&y)?;
                weights.push(w);
                means.push(m);
            }
            model.gp = Some(GpData { inputs, weights, means });
            return Ok(model);
        }
        _ => arch.check_mode(mode)?,
    }
    let n_hold = if data.len() >= 2 {
        ((data.len() as f64 * cfg.holdout_fraction).round() as usize).clamp(1, data.len() - 1)
    } else {
        0
    };
    let results: Vec<Result<(Option<Vec<f64>>, RestartLog)>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let seed = mix_seed(cfg.seed, r as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut order: Vec<usize> = (0..data.len()).collect();
            order.shuffle(&mut rng);
            let hold: Vec<TrainSeq> = order[..n_hold].iter().map(|&i| data[i].clone()).collect();
            let fit: Vec<TrainSeq> = order[n_hold..].iter().map(|&i| data[i].clone()).collect();
            train_restart(&arch, &layout, &fit, &hold, mode, hyper.alpha(), cfg, &mut rng, seed)
        })
        .collect();
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    for (r, res) in results.into_iter().enumerate() {
        let (params, log) = res?;
        if let (Some(p), Some(h)) = (params, log.best_holdout_loss) {
            if best.as_ref().is_none_or(|b| h < b.0) {
                best = Some((h, r, p));
            }
        }
        model.log.restarts.push(log);
    }
    let (_, r, p) = best.ok_or_else(|| {
        Error::TrainingFailure(format!("all {} restarts of {} diverged", cfg.restarts, family))
    })?;
    model.log.selected_restart = r;
    model.params = p;
    Ok(model)
}

/// Recursive prediction over raw feature vectors, seeded by the raw initial
/// error. Returns raw-scale predictions.
pub fn predict_sequence(model: &RegressionModel, features: &[Vec<f64>], delta0: f64) -> Result<Vec<f64>> {
    let family = model.family();
    if matches!(family, Family::Knn | Family::Gp) {
        return Err(Error::WrongEntryPoint(format!(
            "{family} predictions go through knn_fit_predict / gp_fit_predict"
        )));
    }
    let s = &model.standardizer;
    let feats = features
        .iter()
        .map(|f| s.features.forward(f))
        .collect::<Result<Vec<_>>>()?;
    let (m, sd) = (s.responses.mean[0], s.responses.std[0]);
    let mode = if family == Family::Ann { Mode::Nonrecursive } else { Mode::Rt };
    let arch = model.arch();
    let pred = run_sequence(&arch, &model.layout, &model.params, &feats, (delta0 - m) / sd, None, mode, None)?;
    Ok(pred.into_iter().map(|v| v * sd + m).collect())
}

/// Raw-scale predictions for a dataset sequence, for any family.
pub fn predict(model: &RegressionModel, seq: &Sequence) -> Result<Vec<f64>> {
    let s = &model.standardizer;
    let (m, sd) = (s.responses.mean[0], s.responses.std[0]);
    match model.family() {
        Family::Knn => {
            let data = model.knn.as_ref().ok_or_else(|| Error::Config("kNN model without data".into()))?;
            let Hyper::Knn { k, weighting } = model.hyper else { unreachable!() };
            seq.features
                .iter()
                .map(|f| knn_fit_predict(&data.features, &data.responses, k, weighting, &s.features.forward(f)?))
                .collect()
        }
        Family::Gp => {
            let data = model.gp.as_ref().ok_or_else(|| Error::Config("GP model without data".into()))?;
            if seq.len() != data.means.len() {
                return Err(Error::Shape(format!(
                    "sequence of length {} for a GP trained on {} time indices",
                    seq.len(),
                    data.means.len()
                )));
            }
            let q = s.features.forward(&seq.mu)?;
            let ks: Vec<f64> = data.inputs.iter().map(|x| gp::se_kernel(x, &q)).collect();
            Ok(data
                .weights
                .iter()
                .zip(&data.means)
                .map(|(w, mean)| {
                    let v = mean + ks.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
                    v * sd + m
                })
                .collect())
        }
        _ => predict_sequence(model, &seq.features, seq.initial(model.response)),
    }
}

/// Summed squared error of recursive predictions over the sequences.
pub fn validation_score(model: &RegressionModel, val: &[&Sequence]) -> Result<f64> {
    let mut total = 0.0;
    for s in val {
        let p = predict(model, s)?;
        total += p
            .iter()
            .zip(s.targets(model.response))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    Ok(total)
}

/// Outcome of a grid search.
#[derive(Debug, Clone)]
pub struct Selection {
    pub model: RegressionModel,
    pub score: f64,
    /// Validation score per grid point (`None` for failed points).
    pub scores: Vec<Option<f64>>,
}

/// Trains every grid point and keeps the lowest validation score; ties go
/// to the earlier grid point.
pub fn grid_search_select(
    grid: &[Hyper],
    mode: Mode,
    train: &[&Sequence],
    val: &[&Sequence],
    response: Response,
    kind: FeatureKind,
    cfg: &TrainConfig,
) -> Result<Selection> {
    if grid.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    let outcomes: Vec<Result<(RegressionModel, f64)>> = grid
        .par_iter()
        .map(|h| {
            let m = train_model(*h, mode, train, response, kind, cfg)?;
            let s = validation_score(&m, val)?;
            Ok((m, s))
        })
        .collect();
    let mut best: Option<(RegressionModel, f64)> = None;
    let mut scores = Vec::with_capacity(grid.len());
    let mut last_err = None;
    for o in outcomes {
        match o {
            Ok((m, s)) if s.is_finite() => {
                scores.push(Some(s));
                if best.as_ref().is_none_or(|b| s < b.1) {
                    best = Some((m, s));
                }
            }
            Ok(_) => scores.push(None),
            Err(e @ (Error::Config(_) | Error::Shape(_) | Error::EmptyTraining(_))) => return Err(e),
            Err(e) => {
                log::warn!("grid point failed: {e}");
                last_err = Some(e);
                scores.push(None);
            }
        }
    }
    let (model, score) = best.ok_or_else(|| {
        Error::TrainingFailure(format!(
            "every grid point failed{}",
            last_err.map(|e| format!(" (last: {e})")).unwrap_or_default()
        ))
    })?;
    Ok(Selection { model, score, scores })
}

/// ARX coefficients mapped back to raw units: `(θ_ρ, θ_h, b)` such that
/// `δ̂ⁿ = θ_ρᵀ ρⁿ + θ_h δ̂ⁿ⁻¹ + b` on unstandardized data.
pub fn arx_raw_coefficients(model: &RegressionModel) -> Result<(Vec<f64>, f64, f64)> {
    if model.family() != Family::Arx {
        return Err(Error::WrongEntryPoint("raw coefficients exist only for ARX".into()));
    }
    let p = &model.params;
    let n = model.n_in;
    let f = &model.standardizer.features;
    let (my, sy) = (model.standardizer.responses.mean[0], model.standardizer.responses.std[0]);
    let theta: Vec<f64> = (0..n).map(|i| sy * p[i] / f.std[i]).collect();
    let th = p[n];
    let b = my - th * my + sy * p[n + 1] - (0..n).map(|i| theta[i] * f.mean[i]).sum::<f64>();
    Ok((theta, th, b))
}
