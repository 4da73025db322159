//! Campaign configuration (TOML) and construction of the benchmark problems.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{CoarseTimeGrid, Problem, Response, SplitConfig, Surrogate};
use crate::dynsys::{build_advection_diffusion, build_burgers_fom, burgers_prolongation, SharedSystem};
use crate::error::{Error, Result};
use crate::features::FeatureKind;
use crate::integrator::{integrate, MultistepScheme, TimeGrid};
use crate::noise::NoiseKind;
use crate::reduction::{compute_pod, galerkin_reduce, PodBasis, ReferenceRule};
use crate::regress::{Family, Hyper, Mode, TrainConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SystemConfig {
    AdvectionDiffusion { n_cells: usize },
    Burgers { cell_width: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SurrogateConfig {
    PodGalerkin {
        rank: usize,
        /// Parameter instances whose trajectories feed the POD.
        pod_grid: Vec<Vec<f64>>,
        skip: usize,
        reference: ReferenceRule,
    },
    CoarseLfm { cell_width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    CrankNicolson,
    ImplicitEuler,
}

impl SchemeName {
    pub fn scheme(self) -> MultistepScheme {
        match self {
            SchemeName::CrankNicolson => MultistepScheme::crank_nicolson(),
            SchemeName::ImplicitEuler => MultistepScheme::implicit_euler(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub scheme: SchemeName,
    pub dt: f64,
    pub n_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoarseGridConfig {
    pub stride: usize,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitCounts {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub n_noise_train: usize,
}

/// A regression family to train, with an optional mode and grid override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<Hyper>>,
}

impl ModelConfig {
    pub fn mode(&self) -> Mode {
        self.mode.unwrap_or_else(|| self.family.default_mode())
    }

    pub fn grid(&self) -> Vec<Hyper> {
        self.grid.clone().unwrap_or_else(|| self.family.default_grid())
    }
}

fn default_energy() -> f64 {
    0.99
}

fn default_noise() -> Vec<NoiseKind> {
    NoiseKind::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub seed: u64,
    pub feature_kind: FeatureKind,
    pub response: Response,
    #[serde(default = "default_energy")]
    pub pca_energy: f64,
    #[serde(default = "default_noise")]
    pub noise: Vec<NoiseKind>,
    pub system: SystemConfig,
    pub surrogate: SurrogateConfig,
    pub integrator: IntegratorConfig,
    pub coarse_grid: CoarseGridConfig,
    pub split: SplitCounts,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default)]
    pub models: Vec<ModelConfig>,
}

impl CampaignConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: CampaignConfig = toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn split_config(&self) -> SplitConfig {
        SplitConfig {
            n_train: self.split.n_train,
            n_val: self.split.n_val,
            n_test: self.split.n_test,
            n_noise_train: self.split.n_noise_train,
            seed: self.seed,
        }
    }

    /// Training settings with the master seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.training
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.split_config().validate()?;
        if self.integrator.n_steps == 0 || !(self.integrator.dt > 0.0) {
            return Err(Error::Config("integrator needs dt > 0 and at least one step".into()));
        }
        let cg = self.coarse_grid;
        if cg.stride == 0 || cg.count == 0 || cg.stride * cg.count > self.integrator.n_steps {
            return Err(Error::Config(format!(
                "coarse grid stride {} x count {} does not fit in {} steps",
                cg.stride, cg.count, self.integrator.n_steps
            )));
        }
        if !(self.pca_energy > 0.0 && self.pca_energy <= 1.0) {
            return Err(Error::Config(format!("PCA energy {} outside (0, 1]", self.pca_energy)));
        }
        self.training.validate()?;
        match (&self.system, &self.surrogate) {
            (SystemConfig::AdvectionDiffusion { .. }, SurrogateConfig::PodGalerkin { rank, skip, pod_grid, .. }) => {
                if *rank == 0 || *skip == 0 || pod_grid.is_empty() {
                    return Err(Error::Config("POD needs rank, skip and a non-empty grid".into()));
                }
            }
            (SystemConfig::Burgers { .. }, SurrogateConfig::CoarseLfm { .. }) => {}
            (SystemConfig::Burgers { .. }, SurrogateConfig::PodGalerkin { rank, skip, pod_grid, .. }) => {
                if *rank == 0 || *skip == 0 || pod_grid.is_empty() {
                    return Err(Error::Config("POD needs rank, skip and a non-empty grid".into()));
                }
            }
            (SystemConfig::AdvectionDiffusion { .. }, SurrogateConfig::CoarseLfm { .. }) => {
                return Err(Error::Config(
                    "a coarse-mesh surrogate is only available for the Burgers system".into(),
                ))
            }
        }
        for m in &self.models {
            let mode = m.mode();
            for h in m.grid() {
                h.validate()?;
                if h.family() != m.family {
                    return Err(Error::Config(format!(
                        "grid entry {h:?} does not belong to family {}",
                        m.family
                    )));
                }
                h.arch(1).check_mode(mode).or_else(|e| match m.family {
                    Family::Knn | Family::Gp if mode == Mode::Nonrecursive => Ok(()),
                    _ => Err(e),
                })?;
            }
        }
        Ok(())
    }
}

fn build_fom(cfg: &SystemConfig) -> Result<SharedSystem> {
    Ok(match *cfg {
        SystemConfig::AdvectionDiffusion { n_cells } => Arc::new(build_advection_diffusion(n_cells)?),
        SystemConfig::Burgers { cell_width } => Arc::new(build_burgers_fom(cell_width)?),
    })
}

/// The assembled benchmark plus the POD basis when the surrogate is a ROM.
#[derive(Debug, Clone)]
pub struct BuiltProblem {
    pub problem: Problem,
    pub pod: Option<PodBasis>,
}

pub fn build_problem(cfg: &CampaignConfig) -> Result<BuiltProblem> {
    let fom = build_fom(&cfg.system)?;
    let scheme = cfg.integrator.scheme.scheme();
    let grid = TimeGrid::new(cfg.integrator.dt, cfg.integrator.n_steps)?;
    let coarse = CoarseTimeGrid::strided(cfg.coarse_grid.stride, cfg.coarse_grid.count, cfg.integrator.n_steps)?;
    let (surrogate, pod) = match &cfg.surrogate {
        SurrogateConfig::PodGalerkin {
            rank,
            pod_grid,
            skip,
            reference,
        } => {
            let mus = pod_grid
                .iter()
                .map(|v| fom.domain().param(v.clone()))
                .collect::<Result<Vec<_>>>()?;
            let trajs = mus
                .par_iter()
                .map(|mu| integrate(fom.as_ref(), &scheme, grid, mu))
                .collect::<Result<Vec<_>>>()?;
            let basis = compute_pod(&trajs, *reference, *skip, *rank)?;
            let rom = galerkin_reduce(fom.clone(), basis.clone())?;
            (Surrogate::Rom(rom), Some(basis))
        }
        SurrogateConfig::CoarseLfm { cell_width } => {
            let SystemConfig::Burgers { cell_width: fine_w } = cfg.system else {
                return Err(Error::Config("coarse-mesh surrogate needs the Burgers system".into()));
            };
            let fine = build_burgers_fom(fine_w)?;
            let lfm = build_burgers_fom(*cell_width)?;
            let prolongation = burgers_prolongation(&lfm, &fine)?;
            (
                Surrogate::Coarse {
                    system: Arc::new(lfm),
                    prolongation,
                },
                None,
            )
        }
    };
    Ok(BuiltProblem {
        problem: Problem {
            fom,
            surrogate,
            scheme,
            grid,
            coarse,
        },
        pod,
    })
}

/// Advection-diffusion benchmark settings at full size.
pub fn advection_diffusion_default(seed: u64, feature_kind: FeatureKind) -> CampaignConfig {
    let mut pod_grid = Vec::new();
    for a in [-2.0, -1.05, -0.1] {
        for b in [0.1, 0.55, 1.0] {
            pod_grid.push(vec![a, b]);
        }
    }
    CampaignConfig {
        seed,
        feature_kind,
        response: Response::StateNorm,
        pca_energy: 0.99,
        noise: default_noise(),
        system: SystemConfig::AdvectionDiffusion { n_cells: 101 },
        surrogate: SurrogateConfig::PodGalerkin {
            rank: 5,
            pod_grid,
            skip: 10,
            reference: ReferenceRule::InitialState,
        },
        integrator: IntegratorConfig {
            scheme: SchemeName::CrankNicolson,
            dt: 3e-4,
            n_steps: 1000,
        },
        coarse_grid: CoarseGridConfig { stride: 20, count: 50 },
        split: SplitCounts {
            n_train: 40,
            n_val: 10,
            n_test: 50,
            n_noise_train: 20,
        },
        training: TrainConfig::default(),
        models: Vec::new(),
    }
}

/// Burgers benchmark with the coarse-mesh surrogate.
pub fn burgers_default(seed: u64, feature_kind: FeatureKind, n_steps: usize) -> CampaignConfig {
    CampaignConfig {
        seed,
        feature_kind,
        response: Response::Qoi,
        pca_energy: 0.99,
        noise: default_noise(),
        system: SystemConfig::Burgers { cell_width: 0.1 },
        surrogate: SurrogateConfig::CoarseLfm { cell_width: 2.0 },
        integrator: IntegratorConfig {
            scheme: SchemeName::ImplicitEuler,
            dt: 0.05,
            n_steps,
        },
        coarse_grid: CoarseGridConfig {
            stride: n_steps / 100,
            count: 100,
        },
        split: SplitCounts {
            n_train: 40,
            n_val: 10,
            n_test: 50,
            n_noise_train: 20,
        },
        training: TrainConfig::default(),
        models: Vec::new(),
    }
}
