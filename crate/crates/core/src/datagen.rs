//! Parameter sampling, surrogate/full-order campaigns and assembly of
//! response–feature sequences with their splits.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynsys::{prolong, qoi_eval, DynamicalSystem, ParamBox, ParamVector, ProlongationOp, SharedSystem};
use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureKind, FeatureSpec, ResidualInput};
use crate::integrator::{integrate, trajectory_residual, MultistepScheme, TimeGrid};
use crate::linalg::norm2;
use crate::reduction::{fit_residual_pca, qsample_select, GalerkinRom};

/// SplitMix64 finalizer applied to `master ⊕ mix(stream)`; used to derive
/// independent sub-seeds from one master seed.
pub fn mix_seed(master: u64, stream: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(master ^ splitmix(stream))
}

/// Independent uniform samples from the box.
pub fn sample_parameters(domain: &ParamBox, count: usize, seed: u64) -> Result<Vec<ParamVector>> {
    if count == 0 {
        return Err(Error::Cardinality("sample count must be at least 1".into()));
    }
    if domain.lower.iter().zip(&domain.upper).any(|(l, u)| !(l <= u)) {
        return Err(Error::Domain("empty parameter box".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            ParamVector::new(
                domain
                    .lower
                    .iter()
                    .zip(&domain.upper)
                    .map(|(&l, &u)| l + (u - l) * rng.random::<f64>())
                    .collect(),
            )
        })
        .collect())
}

/// Subset 𝕋 of fine time indices with τ(0) = 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoarseTimeGrid {
    pub indices: Vec<usize>,
}

impl CoarseTimeGrid {
    pub fn new(indices: Vec<usize>, n_steps: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Config("coarse time grid is empty".into()));
        }
        if indices[0] == 0 || indices.windows(2).any(|w| w[1] <= w[0]) || *indices.last().unwrap() > n_steps {
            return Err(Error::Config(format!(
                "coarse indices must be strictly increasing within 1..={n_steps}"
            )));
        }
        Ok(CoarseTimeGrid { indices })
    }

    /// `{stride·n : n = 1..count}`.
    pub fn strided(stride: usize, count: usize, n_steps: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::Config("coarse stride must be positive".into()));
        }
        CoarseTimeGrid::new((1..=count).map(|n| n * stride).collect(), n_steps)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn tau(&self, n: usize) -> usize {
        if n == 0 {
            0
        } else {
            self.indices[n - 1]
        }
    }
}

/// Which error is the regression target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Response {
    StateNorm,
    Qoi,
}

impl Response {
    pub fn as_str(self) -> &'static str {
        match self {
            Response::StateNorm => "state-norm",
            Response::Qoi => "qoi",
        }
    }
}

impl fmt::Display for Response {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Response {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "state-norm" => Ok(Response::StateNorm),
            "qoi" => Ok(Response::Qoi),
            _ => Err(Error::Config(format!("unknown response '{s}' (expected state-norm or qoi)"))),
        }
    }
}

impl Serialize for Response {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Response {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// An approximate model whose states can be mapped into the full-order space.
#[derive(Debug, Clone)]
pub enum Surrogate {
    Rom(GalerkinRom),
    Coarse {
        system: SharedSystem,
        prolongation: ProlongationOp,
    },
}

impl Surrogate {
    pub fn system(&self) -> &dyn DynamicalSystem {
        match self {
            Surrogate::Rom(r) => r,
            Surrogate::Coarse { system, .. } => system.as_ref(),
        }
    }

    pub fn to_fine(&self, state: &[f64], mu: &ParamVector) -> Result<Vec<f64>> {
        match self {
            Surrogate::Rom(r) => Ok(r.basis().reconstruct(state)),
            Surrogate::Coarse { prolongation, .. } => prolong(prolongation, state, mu),
        }
    }
}

/// Everything needed to run one full-order/surrogate pair.
#[derive(Debug, Clone)]
pub struct Problem {
    pub fom: SharedSystem,
    pub surrogate: Surrogate,
    pub scheme: MultistepScheme,
    pub grid: TimeGrid,
    pub coarse: CoarseTimeGrid,
}

/// Raw per-instance data on the coarse grid, before feature construction.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceData {
    pub mu: ParamVector,
    pub fine_indices: Vec<usize>,
    pub times: Vec<f64>,
    pub delta_x: Vec<f64>,
    pub delta_q: Vec<f64>,
    pub delta0_x: f64,
    pub delta0_q: f64,
    /// Full-order residual at the surrogate state, one vector per coarse index.
    pub residuals: Vec<Vec<f64>>,
}

/// Errors and residuals at the coarse indices given both trajectories in
/// the full-order space (`surrogate[n]` is the prolonged surrogate state).
#[allow(clippy::too_many_arguments)]
pub fn assemble_instance(
    system: &dyn DynamicalSystem,
    scheme: &MultistepScheme,
    grid: TimeGrid,
    coarse: &CoarseTimeGrid,
    fom: &[Vec<f64>],
    surrogate: &[Vec<f64>],
    mu: &ParamVector,
) -> Result<InstanceData> {
    if fom.len() != grid.n_steps + 1 || surrogate.len() != fom.len() {
        return Err(Error::Shape(format!(
            "trajectories of length {} and {} on a grid of {} steps",
            fom.len(),
            surrogate.len(),
            grid.n_steps
        )));
    }
    if coarse.indices.last().is_some_and(|&l| l > grid.n_steps) {
        return Err(Error::Shape("coarse grid exceeds the fine grid".into()));
    }
    let errors = |n: usize| -> Result<(f64, f64)> {
        let dx: Vec<f64> = fom[n].iter().zip(&surrogate[n]).map(|(a, b)| a - b).collect();
        let t = grid.time(n);
        let dq = qoi_eval(system, &fom[n], t, mu)? - qoi_eval(system, &surrogate[n], t, mu)?;
        Ok((norm2(&dx), dq))
    };
    let (delta0_x, delta0_q) = errors(0)?;
    let mut out = InstanceData {
        mu: mu.clone(),
        fine_indices: coarse.indices.clone(),
        times: coarse.indices.iter().map(|&n| grid.time(n)).collect(),
        delta_x: Vec::with_capacity(coarse.len()),
        delta_q: Vec::with_capacity(coarse.len()),
        delta0_x,
        delta0_q,
        residuals: Vec::with_capacity(coarse.len()),
    };
    for &n in &coarse.indices {
        let (dx, dq) = errors(n)?;
        out.delta_x.push(dx);
        out.delta_q.push(dq);
        out.residuals
            .push(trajectory_residual(system, scheme, surrogate, n, mu, grid.dt)?);
    }
    Ok(out)
}

/// Solves the full-order and surrogate models at `mu` and assembles the
/// coarse-grid data.
pub fn run_instance(problem: &Problem, mu: &ParamVector) -> Result<InstanceData> {
    let fom = integrate(problem.fom.as_ref(), &problem.scheme, problem.grid, mu)?;
    let sur = integrate(problem.surrogate.system(), &problem.scheme, problem.grid, mu)?;
    // Only states inside some residual stencil are needed in the fine space.
    let k = problem.scheme.steps();
    let mut needed = vec![false; problem.grid.n_steps + 1];
    needed[0] = true;
    for &n in &problem.coarse.indices {
        for i in 0..=k.min(n) {
            needed[n - i] = true;
        }
    }
    let dim = problem.fom.dim();
    let fine: Vec<Vec<f64>> = sur
        .states
        .iter()
        .enumerate()
        .map(|(n, s)| {
            if needed[n] {
                problem.surrogate.to_fine(s, mu)
            } else {
                Ok(vec![0.0; dim])
            }
        })
        .collect::<Result<_>>()?;
    assemble_instance(
        problem.fom.as_ref(),
        &problem.scheme,
        problem.grid,
        &problem.coarse,
        &fom.states,
        &fine,
        mu,
    )
}

/// Runs all instances in parallel; results keep the input order.
pub fn run_campaign(problem: &Problem, mus: &[ParamVector]) -> Result<Vec<InstanceData>> {
    mus.par_iter().map(|mu| run_instance(problem, mu)).collect()
}

/// Feature/response sequence of one parameter instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    pub mu: Vec<f64>,
    pub fine_indices: Vec<usize>,
    pub times: Vec<f64>,
    pub features: Vec<Vec<f64>>,
    pub delta_x: Vec<f64>,
    pub delta_q: Vec<f64>,
    pub delta0_x: f64,
    pub delta0_q: f64,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn targets(&self, response: Response) -> &[f64] {
        match response {
            Response::StateNorm => &self.delta_x,
            Response::Qoi => &self.delta_q,
        }
    }

    pub fn initial(&self, response: Response) -> f64 {
        match response {
            Response::StateNorm => self.delta0_x,
            Response::Qoi => self.delta0_q,
        }
    }
}

pub fn build_sequence(instance: &InstanceData, spec: &FeatureSpec) -> Result<Sequence> {
    let features = instance
        .residuals
        .iter()
        .zip(&instance.times)
        .map(|(r, &t)| {
            let input = if spec.kind.needs_residual() {
                ResidualInput::Full(r)
            } else {
                ResidualInput::None
            };
            extract_features(spec, instance.mu.as_slice(), t, input)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Sequence {
        mu: instance.mu.0.clone(),
        fine_indices: instance.fine_indices.clone(),
        times: instance.times.clone(),
        features,
        delta_x: instance.delta_x.clone(),
        delta_q: instance.delta_q.clone(),
        delta0_x: instance.delta0_x,
        delta0_q: instance.delta0_q,
    })
}

/// One dataset sequence from a full-order trajectory and a surrogate
/// trajectory already mapped into the full-order space.
#[allow(clippy::too_many_arguments)]
pub fn assemble_dataset(
    fom: &[Vec<f64>],
    surrogate: &[Vec<f64>],
    system: &dyn DynamicalSystem,
    scheme: &MultistepScheme,
    grid: TimeGrid,
    spec: &FeatureSpec,
    coarse: &CoarseTimeGrid,
    mu: &ParamVector,
) -> Result<Sequence> {
    let inst = assemble_instance(system, scheme, grid, coarse, fom, surrogate, mu)?;
    build_sequence(&inst, spec)
}

/// Fits the residual artifacts a feature kind needs on training instances:
/// principal components at the requested energy, and `n_s = n_r` q-sampled
/// indices.
pub fn fit_feature_spec(kind: FeatureKind, training: &[&InstanceData], energy: f64) -> Result<FeatureSpec> {
    if !kind.needs_pca() && !kind.needs_sampling() {
        return FeatureSpec::plain(kind);
    }
    let snaps: Vec<Vec<f64>> = training.iter().flat_map(|d| d.residuals.iter().cloned()).collect();
    let pca = fit_residual_pca(&snaps, energy)?;
    let sampling = if kind.needs_sampling() {
        Some(qsample_select(&pca, pca.n_components())?)
    } else {
        None
    };
    let pca = if kind.needs_pca() { Some(pca) } else { None };
    FeatureSpec::new(kind, pca, sampling)
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub kind: FeatureKind,
    pub grid: CoarseTimeGrid,
    pub sequences: Vec<Sequence>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub n_noise_train: usize,
    pub seed: u64,
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_val == 0 || self.n_test == 0 {
            return Err(Error::Cardinality("split counts must be positive".into()));
        }
        if self.n_train != 4 * self.n_val {
            return Err(Error::Cardinality(format!(
                "training count {} must be four times the validation count {}",
                self.n_train, self.n_val
            )));
        }
        if self.n_noise_train > self.n_test {
            return Err(Error::Cardinality(format!(
                "noise-training count {} exceeds test count {}",
                self.n_noise_train, self.n_test
            )));
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.n_train + self.n_val + self.n_test
    }
}

/// Parameter instances for a campaign: training, validation and test sets
/// drawn from separate sub-seeded streams, concatenated in that order.
/// A smaller training count yields a prefix of a larger one.
pub fn campaign_parameters(domain: &ParamBox, cfg: &SplitConfig) -> Result<Vec<ParamVector>> {
    cfg.validate()?;
    let mut all = sample_parameters(domain, cfg.n_train, mix_seed(cfg.seed, 1))?;
    all.extend(sample_parameters(domain, cfg.n_val, mix_seed(cfg.seed, 2))?);
    all.extend(sample_parameters(domain, cfg.n_test, mix_seed(cfg.seed, 3))?);
    Ok(all)
}

/// Index sets of the five splits into an item list ordered
/// `[train.., val.., test..]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub noise_train: Vec<usize>,
    pub noise_test: Vec<usize>,
}

pub fn split_indices(n_items: usize, cfg: &SplitConfig) -> Result<SplitIndices> {
    cfg.validate()?;
    if n_items < cfg.total() {
        return Err(Error::Cardinality(format!(
            "{n_items} instances available, {} requested",
            cfg.total()
        )));
    }
    let train: Vec<usize> = (0..cfg.n_train).collect();
    let val: Vec<usize> = (cfg.n_train..cfg.n_train + cfg.n_val).collect();
    let test: Vec<usize> = (cfg.n_train + cfg.n_val..cfg.total()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 4));
    let mut perm = test.clone();
    // Fisher–Yates, explicit so the permutation is fixed by the seed alone.
    for i in (1..perm.len()).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    let mut noise_train: Vec<usize> = perm[..cfg.n_noise_train].to_vec();
    noise_train.sort_unstable();
    let noise_test: Vec<usize> = test.iter().copied().filter(|i| !noise_train.contains(i)).collect();
    Ok(SplitIndices {
        train,
        val,
        test,
        noise_train,
        noise_test,
    })
}

#[derive(Debug, Clone)]
pub struct Splits<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
    pub noise_train: Vec<T>,
    pub noise_test: Vec<T>,
}

pub fn split_dataset<T: Clone>(items: &[T], cfg: &SplitConfig) -> Result<Splits<T>> {
    let idx = split_indices(items.len(), cfg)?;
    let pick = |v: &[usize]| v.iter().map(|&i| items[i].clone()).collect::<Vec<T>>();
    Ok(Splits {
        train: pick(&idx.train),
        val: pick(&idx.val),
        test: pick(&idx.test),
        noise_train: pick(&idx.noise_train),
        noise_test: pick(&idx.noise_test),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_box_and_determinism() {
        let b = ParamBox::new(vec![0.3, 0.3], vec![0.3, 0.3]).unwrap();
        for p in sample_parameters(&b, 5, 1).unwrap() {
            assert_eq!(p.0, vec![0.3, 0.3]);
        }
        let u = ParamBox::new(vec![0.0], vec![1.0]).unwrap();
        assert_eq!(sample_parameters(&u, 7, 9).unwrap(), sample_parameters(&u, 7, 9).unwrap());
        let big = sample_parameters(&u, 10_000, 3).unwrap();
        let mean = big.iter().map(|p| p[0]).sum::<f64>() / 1e4;
        assert!((mean - 0.5).abs() < 0.02);
    }

    #[test]
    fn split_counts() {
        let cfg = SplitConfig {
            n_train: 40,
            n_val: 10,
            n_test: 50,
            n_noise_train: 20,
            seed: 5,
        };
        let s = split_indices(100, &cfg).unwrap();
        assert_eq!(s.noise_test.len(), 30);
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 100);
        assert!(s.noise_train.iter().all(|i| s.test.contains(i) && !s.noise_test.contains(i)));
        assert!(matches!(split_indices(99, &cfg), Err(Error::Cardinality(_))));
        let small = SplitConfig {
            n_train: 8,
            n_val: 2,
            ..cfg
        };
        let s = split_indices(60, &small).unwrap();
        assert_eq!((s.train.len(), s.val.len()), (8, 2));
    }

    #[test]
    fn training_sets_are_prefixes() {
        let b = ParamBox::new(vec![0.0, 1.0], vec![1.0, 2.0]).unwrap();
        let big = SplitConfig {
            n_train: 40,
            n_val: 10,
            n_test: 5,
            n_noise_train: 2,
            seed: 11,
        };
        let small = SplitConfig {
            n_train: 8,
            n_val: 2,
            ..big
        };
        let a = campaign_parameters(&b, &big).unwrap();
        let c = campaign_parameters(&b, &small).unwrap();
        assert_eq!(&a[..8], &c[..8]);
    }

    #[test]
    fn coarse_grid() {
        let g = CoarseTimeGrid::strided(20, 50, 1000).unwrap();
        assert_eq!(g.len(), 50);
        assert_eq!(g.tau(0), 0);
        assert_eq!(g.tau(50), 1000);
        assert!(CoarseTimeGrid::strided(20, 51, 1000).is_err());
    }
}
