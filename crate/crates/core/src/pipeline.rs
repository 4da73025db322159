//! End-to-end workflow: campaign generation, dataset construction, model
//! selection with noise fitting, and test-set evaluation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::{build_problem, BuiltProblem, CampaignConfig, ModelConfig};
use crate::datagen::{
    build_sequence, campaign_parameters, fit_feature_spec, run_campaign, split_indices, InstanceData, Response,
    Sequence, SplitIndices,
};
use crate::dynsys::ParamVector;
use crate::error::{Error, Result};
use crate::eval::fvu;
use crate::features::{FeatureKind, FeatureSpec};
use crate::noise::{self, ks_statistic, noise_scale_sequence, standardize_errors, validation_frequency, NoiseKind, NoiseModel};
use crate::regress::{grid_search_select, predict, Selection, TrainConfig};

/// Coverage levels reported for every noise model.
pub const COVERAGE_LEVELS: [f64; 3] = [0.68, 0.95, 0.99];

#[derive(Debug, Clone)]
pub struct Campaign {
    pub built: BuiltProblem,
    pub mus: Vec<ParamVector>,
    pub instances: Vec<InstanceData>,
    pub splits: SplitIndices,
}

/// Samples parameters and solves every full-order/surrogate pair.
pub fn run_generation(cfg: &CampaignConfig) -> Result<Campaign> {
    cfg.validate()?;
    let built = build_problem(cfg)?;
    let split = cfg.split_config();
    let mus = campaign_parameters(built.problem.fom.domain(), &split)?;
    let instances = run_campaign(&built.problem, &mus)?;
    let splits = split_indices(instances.len(), &split)?;
    Ok(Campaign {
        built,
        mus,
        instances,
        splits,
    })
}

/// Feature sequences of every instance; residual artifacts are fitted on
/// the training instances only.
pub fn build_sequences(
    instances: &[InstanceData],
    train: &[usize],
    kind: FeatureKind,
    energy: f64,
) -> Result<(FeatureSpec, Vec<Sequence>)> {
    let training: Vec<&InstanceData> = train.iter().map(|&i| &instances[i]).collect();
    let spec = fit_feature_spec(kind, &training, energy)?;
    let seqs = instances
        .iter()
        .map(|inst| build_sequence(inst, &spec))
        .collect::<Result<Vec<_>>>()?;
    Ok((spec, seqs))
}

fn pick<'a>(seqs: &'a [Sequence], idx: &[usize]) -> Vec<&'a Sequence> {
    idx.iter().map(|&i| &seqs[i]).collect()
}

/// Regression errors `δ - δ̂` per sequence.
pub fn regression_errors(selection: &crate::regress::RegressionModel, seqs: &[&Sequence]) -> Result<Vec<Vec<f64>>> {
    seqs.iter()
        .map(|s| {
            let p = predict(selection, s)?;
            Ok(s.targets(selection.response).iter().zip(&p).map(|(t, q)| t - q).collect())
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Fitted {
    pub selection: Selection,
    pub noise: Vec<NoiseModel>,
}

/// Grid search on train/validation, then noise models on the noise-train split.
#[allow(clippy::too_many_arguments)]
pub fn fit_model(
    model: &ModelConfig,
    seqs: &[Sequence],
    splits: &SplitIndices,
    response: Response,
    kind: FeatureKind,
    train_cfg: &TrainConfig,
    noise_kinds: &[NoiseKind],
) -> Result<Fitted> {
    let train = pick(seqs, &splits.train);
    let val = pick(seqs, &splits.val);
    let selection = grid_search_select(&model.grid(), model.mode(), &train, &val, response, kind, train_cfg)?;
    let noise = if noise_kinds.is_empty() || splits.noise_train.is_empty() {
        Vec::new()
    } else {
        let errors = regression_errors(&selection.model, &pick(seqs, &splits.noise_train))?;
        noise_kinds
            .iter()
            .map(|&k| noise::fit(k, &errors))
            .collect::<Result<Vec<_>>>()?
    };
    Ok(Fitted { selection, noise })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseEvaluation {
    pub model: NoiseModel,
    /// Keyed by the coverage level formatted with two decimals.
    pub omega: BTreeMap<String, f64>,
    pub ks: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSeries {
    pub instance: usize,
    pub times: Vec<f64>,
    pub truth: Vec<f64>,
    pub prediction: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub fvu: Option<f64>,
    pub r2: Option<f64>,
    /// Why the FVU is missing, when it is.
    pub degenerate: Option<String>,
    pub noise: Vec<NoiseEvaluation>,
    pub predictions: Vec<PredictionSeries>,
    /// Standardized noise-test errors per noise model, for histograms.
    #[serde(skip)]
    pub standardized: Vec<Vec<f64>>,
}

/// FVU over the test split; coverage and K-S statistics on the noise-test split.
pub fn evaluate(
    model: &crate::regress::RegressionModel,
    noise_models: &[NoiseModel],
    seqs: &[Sequence],
    splits: &SplitIndices,
) -> Result<Evaluation> {
    if splits.test.is_empty() {
        return Err(Error::EmptyTest("no test instances".into()));
    }
    let mut truth = Vec::new();
    let mut pred = Vec::new();
    let mut predictions = Vec::new();
    for &i in &splits.test {
        let s = &seqs[i];
        let p = predict(model, s)?;
        let t = s.targets(model.response);
        truth.extend_from_slice(t);
        pred.extend_from_slice(&p);
        predictions.push(PredictionSeries {
            instance: i,
            times: s.times.clone(),
            truth: t.to_vec(),
            prediction: p,
        });
    }
    let (fvu_value, degenerate) = match fvu(&truth, &pred) {
        Ok(v) => (Some(v), None),
        Err(e @ Error::DegenerateVariance(_)) => {
            log::warn!("{e}");
            (None, Some(e.to_string()))
        }
        Err(e) => return Err(e),
    };
    let mut noise_evals = Vec::new();
    let mut standardized = Vec::new();
    if !splits.noise_test.is_empty() {
        let errors = regression_errors(model, &pick(seqs, &splits.noise_test))?;
        for m in noise_models {
            let mut omega = BTreeMap::new();
            for c in COVERAGE_LEVELS {
                omega.insert(format!("{c:.2}"), validation_frequency(m, &errors, c)?);
            }
            let z = standardize_errors(m, &errors);
            let ks = ks_statistic(&z, m.reference())?;
            noise_evals.push(NoiseEvaluation { model: *m, omega, ks });
            standardized.push(z);
        }
    } else if !noise_models.is_empty() {
        log::warn!("noise-test split is empty; coverage statistics skipped");
    }
    Ok(Evaluation {
        fvu: fvu_value,
        r2: fvu_value.map(|v| 1.0 - v),
        degenerate,
        noise: noise_evals,
        predictions,
        standardized,
    })
}

/// Per-index noise scale of each model over a horizon.
pub fn noise_scales(models: &[NoiseModel], horizon: usize) -> Vec<Vec<f64>> {
    models.iter().map(|m| noise_scale_sequence(m, horizon)).collect()
}
