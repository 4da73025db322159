//! Command-line front end: generate datasets, train models, evaluate them
//! and merge evaluations into a report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{CampaignConfig, ModelConfig, SCHEMA_VERSION};
use crate::datagen::{Response, SplitIndices};
use crate::error::{Error, Result};
use crate::eval::{report_grid, ReportEntry};
use crate::features::FeatureKind;
use crate::io::{
    dense_row_major, histogram_csv, instance_file_name, read_json, write_json, write_matrix, write_sequence_csv,
    write_text, Checkpoint, InstanceEntry, Manifest, Metadata, Metrics, SeedRecord, METRICS_FILE,
};
use crate::noise::histogram;
use crate::pipeline::{build_sequences, evaluate, fit_model, noise_scales, run_generation};
use crate::regress::{Family, Mode};

#[derive(Debug, Parser)]
#[command(name = "errmodel", version, about = "Error models for surrogate solutions of parameterized ODEs")]
pub struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the full-order and surrogate models and write the dataset.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the master seed of the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Select and train a regression model plus noise models.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        family: Family,
        #[arg(long)]
        mode: Option<Mode>,
        /// Must match the dataset; defaults to the dataset's kind.
        #[arg(long)]
        feature_kind: Option<FeatureKind>,
        /// Defaults to the response in the campaign config.
        #[arg(long)]
        response: Option<Response>,
        /// Training settings and grids; defaults to the config stored with the data.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Use only the first N training instances.
        #[arg(long)]
        train_size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a trained model on the test split.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge evaluation directories into a report grid.
    Report {
        #[arg(long = "input", required = false)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    match cli.command {
        Command::Generate { config, out, seed } => cmd_generate(&config, &out, seed),
        Command::Train {
            data,
            family,
            mode,
            feature_kind,
            response,
            config,
            train_size,
            seed,
            out,
        } => cmd_train(&TrainArgs {
            data,
            family,
            mode,
            feature_kind,
            response,
            config,
            train_size,
            seed,
            out,
        }),
        Command::Evaluate { model, data, out } => cmd_evaluate(&model, &data, &out),
        Command::Report { inputs, out } => cmd_report(&inputs, &out),
    }
}

pub fn cmd_generate(config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut cfg = CampaignConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let campaign = run_generation(&cfg)?;
    let (spec, seqs) = build_sequences(
        &campaign.instances,
        &campaign.splits.train,
        cfg.feature_kind,
        cfg.pca_energy,
    )?;
    let coarse = &campaign.built.problem.coarse.indices;
    let coarse_numbers: Vec<usize> = (1..=coarse.len()).collect();
    let mut instances = Vec::with_capacity(seqs.len());
    for (i, s) in seqs.iter().enumerate() {
        let file = format!("instances/{}", instance_file_name(i));
        write_sequence_csv(&out.join(&file), &coarse_numbers, s)?;
        instances.push(InstanceEntry {
            file,
            mu: s.mu.clone(),
            delta0_x: s.delta0_x,
            delta0_q: s.delta0_q,
        });
    }
    let mut artifacts = BTreeMap::new();
    let mut put = |name: &str, rows: usize, cols: usize, data: &[f64]| -> Result<()> {
        let file = format!("artifacts/{name}.txt");
        write_matrix(&out.join(&file), rows, cols, data)?;
        artifacts.insert(name.to_string(), file);
        Ok(())
    };
    if let Some(pod) = &campaign.built.pod {
        let (r, c, d) = dense_row_major(&pod.columns);
        put("pod_basis", r, c, &d)?;
        put("pod_reference", pod.reference.len(), 1, &pod.reference)?;
    }
    if let Some(pca) = &spec.pca {
        let (r, c, d) = dense_row_major(&pca.basis);
        put("pca_basis", r, c, &d)?;
        put("pca_mean", pca.mean.len(), 1, &pca.mean)?;
    }
    if let Some(sampling) = &spec.sampling {
        let rows: Vec<f64> = sampling.rows.iter().map(|&r| r as f64).collect();
        put("sampling_indices", rows.len(), 1, &rows)?;
    }
    write_summaries(out, &campaign.instances, &campaign.splits)?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        feature_kind: cfg.feature_kind,
        coarse_indices: coarse.clone(),
        seeds: SeedRecord::new(cfg.seed),
        split: campaign.splits.clone(),
        instances,
        artifacts,
        config: cfg.clone(),
        metadata: Metadata::now(),
    };
    write_json(&out.join(crate::io::MANIFEST_FILE), &manifest)?;
    log::info!("wrote {} instances to {}", seqs.len(), out.display());
    Ok(())
}

fn split_name(splits: &SplitIndices, i: usize) -> &'static str {
    if splits.train.contains(&i) {
        "train"
    } else if splits.val.contains(&i) {
        "val"
    } else if splits.noise_train.contains(&i) {
        "test,noise-train"
    } else if splits.test.contains(&i) {
        "test,noise-test"
    } else {
        "unused"
    }
}

fn write_summaries(out: &Path, instances: &[crate::datagen::InstanceData], splits: &SplitIndices) -> Result<()> {
    let n_mu = instances.first().map_or(0, |d| d.mu.len());
    let mut text = String::from("instance,split");
    for j in 0..n_mu {
        text.push_str(&format!(",mu_{j}"));
    }
    text.push_str(",max_delta_x,max_abs_delta_q,max_residual_norm\n");
    for (i, d) in instances.iter().enumerate() {
        text.push_str(&format!("{i},\"{}\"", split_name(splits, i)));
        for m in d.mu.as_slice() {
            text.push_str(&format!(",{m}"));
        }
        let mx = d.delta_x.iter().copied().fold(0.0, f64::max);
        let mq = d.delta_q.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let mr = d
            .residuals
            .iter()
            .map(|r| crate::linalg::norm2(r))
            .fold(0.0, f64::max);
        text.push_str(&format!(",{mx},{mq},{mr}\n"));
    }
    write_text(&out.join("summaries.csv"), &text)
}

#[derive(Debug, Clone)]
pub struct TrainArgs {
    pub data: PathBuf,
    pub family: Family,
    pub mode: Option<Mode>,
    pub feature_kind: Option<FeatureKind>,
    pub response: Option<Response>,
    pub config: Option<PathBuf>,
    pub train_size: Option<usize>,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let manifest = Manifest::load(&args.data)?;
    let mut cfg = match &args.config {
        Some(p) => CampaignConfig::load(p)?,
        None => manifest.config.clone(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let kind = args.feature_kind.unwrap_or(manifest.feature_kind);
    if kind != manifest.feature_kind {
        return Err(Error::Compatibility(format!(
            "requested feature kind {} but the dataset holds {}",
            kind.as_str(),
            manifest.feature_kind.as_str()
        )));
    }
    let response = args.response.unwrap_or(cfg.response);
    let mut model_cfg = cfg
        .models
        .iter()
        .find(|m| m.family == args.family)
        .cloned()
        .unwrap_or(ModelConfig {
            family: args.family,
            mode: None,
            grid: None,
        });
    if args.mode.is_some() {
        model_cfg.mode = args.mode;
    }
    let probe = CampaignConfig {
        models: vec![model_cfg.clone()],
        ..cfg.clone()
    };
    probe.validate()?;
    let mut splits = manifest.split.clone();
    if let Some(n) = args.train_size {
        if n == 0 || n > splits.train.len() {
            return Err(Error::Cardinality(format!(
                "training size {n} outside 1..={}",
                splits.train.len()
            )));
        }
        splits.train.truncate(n);
    }
    let seqs = manifest.sequences(&args.data)?;
    let fitted = fit_model(
        &model_cfg,
        &seqs,
        &splits,
        response,
        kind,
        &cfg.train_config(),
        &cfg.noise,
    )?;
    let sel = fitted.selection;
    let checkpoint = Checkpoint {
        schema_version: SCHEMA_VERSION,
        family: args.family,
        mode: model_cfg.mode(),
        feature_kind: kind,
        response,
        train_size: splits.train.len(),
        selected: sel.model.hyper,
        validation_score: sel.score,
        grid_scores: sel.scores,
        model: sel.model,
        noise: fitted.noise,
    };
    write_json(&args.out, &checkpoint)?;
    log::info!("validation score {:e}; checkpoint at {}", sel.score, args.out.display());
    Ok(())
}

pub fn cmd_evaluate(model: &Path, data: &Path, out: &Path) -> Result<()> {
    let ck = Checkpoint::load(model)?;
    let manifest = Manifest::load(data)?;
    if ck.feature_kind != manifest.feature_kind {
        return Err(Error::Compatibility(format!(
            "model uses {} features but the dataset holds {}",
            ck.feature_kind.as_str(),
            manifest.feature_kind.as_str()
        )));
    }
    let seqs = manifest.sequences(data)?;
    if let Some(s) = seqs.first() {
        let dim = s.features.first().map_or(0, Vec::len);
        let expected = ck.model.standardizer.features.mean.len();
        if ck.model.family() != Family::Gp && dim != expected {
            return Err(Error::Compatibility(format!(
                "model expects {expected} features, dataset rows have {dim}"
            )));
        }
    }
    let ev = evaluate(&ck.model, &ck.noise, &seqs, &manifest.split)?;
    let horizon = manifest.coarse_indices.len();
    let scales = noise_scales(&ck.noise, horizon);
    for p in &ev.predictions {
        let mut text = String::from("time,truth,prediction");
        for m in &ck.noise {
            text.push_str(&format!(",scale_{}", m.kind()));
        }
        text.push('\n');
        for n in 0..p.times.len() {
            text.push_str(&format!("{},{},{}", p.times[n], p.truth[n], p.prediction[n]));
            for s in &scales {
                text.push_str(&format!(",{}", s[n]));
            }
            text.push('\n');
        }
        write_text(&out.join("predictions").join(instance_file_name(p.instance)), &text)?;
    }
    let blocks: Vec<(String, Vec<crate::noise::HistogramBin>)> = ev
        .noise
        .iter()
        .zip(&ev.standardized)
        .map(|(n, z)| (n.model.kind().to_string(), histogram(z, 20, n.model.reference())))
        .collect();
    write_text(&out.join("histogram.csv"), &histogram_csv(&blocks))?;
    let metrics = Metrics {
        schema_version: SCHEMA_VERSION,
        family: ck.family,
        mode: ck.mode,
        feature_kind: ck.feature_kind,
        response: ck.response,
        train_size: ck.train_size,
        fvu: ev.fvu,
        r2: ev.r2,
        degenerate: ev.degenerate.clone(),
        noise: ev
            .noise
            .iter()
            .map(|n| (n.model.kind().to_string(), n.clone()))
            .collect(),
    };
    write_json(&out.join(METRICS_FILE), &metrics)?;
    match ev.fvu {
        Some(v) => log::info!("test FVU {v:e}"),
        None => log::warn!("test FVU undefined: {}", ev.degenerate.unwrap_or_default()),
    }
    Ok(())
}

pub fn cmd_report(inputs: &[PathBuf], out: &Path) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::Config("report needs at least one evaluation directory".into()));
    }
    let entries = inputs
        .iter()
        .map(|dir| {
            let m: Metrics = read_json(&dir.join(METRICS_FILE))?;
            Ok(ReportEntry {
                family: m.family.to_string(),
                feature_kind: m.feature_kind.as_str().to_string(),
                train_size: m.train_size,
                response: m.response.as_str().to_string(),
                fvu: m.fvu,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = report_grid(&entries)?;
    let mut text = String::from("family,feature_kind,train_size,response,fvu\n");
    for r in &report.rows {
        let f = r.fvu.map_or_else(|| "undefined".to_string(), |v| v.to_string());
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            r.family, r.feature_kind, r.train_size, r.response, f
        ));
    }
    write_text(&out.join("report.csv"), &text)?;
    write_json(&out.join("report.json"), &report)?;
    Ok(())
}
