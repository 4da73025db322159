//! POD bases, Galerkin reduced-order models, residual principal
//! components, q-sampling and gappy reconstruction.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynsys::{DynamicalSystem, ParamBox, ParamVector, SharedSystem};
use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::linalg::{least_squares, left_singular_vectors, pivoted_qr_order, Jacobian};

/// Relative singular-value floor below which a requested POD mode is
/// considered numerically absent.
pub const POD_RANK_TOL: f64 = 1e-12;

/// Relative conditioning floor for gappy least squares.
pub const GAPPY_COND_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceRule {
    /// Initial state of the first snapshot trajectory.
    InitialState,
    Zero,
}

/// Orthonormal trial basis Φ (N×K) with reference state.
#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    pub columns: DMatrix<f64>,
    pub reference: Vec<f64>,
    pub singular_values: Vec<f64>,
}

impl PodBasis {
    pub fn dim(&self) -> usize {
        self.columns.ncols()
    }

    pub fn full_dim(&self) -> usize {
        self.columns.nrows()
    }

    /// `x_ref + Φ x̂`.
    pub fn reconstruct(&self, coords: &[f64]) -> Vec<f64> {
        let v = &self.columns * DVector::from_column_slice(coords);
        v.iter().zip(&self.reference).map(|(a, b)| a + b).collect()
    }

    /// `Φᵀ (x - x_ref)`.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let d = DVector::from_iterator(x.len(), x.iter().zip(&self.reference).map(|(a, b)| a - b));
        (self.columns.transpose() * d).as_slice().to_vec()
    }
}

/// Builds a POD basis from explicit snapshots (columns are `s - reference`).
pub fn pod_from_snapshots(snapshots: &[Vec<f64>], reference: Vec<f64>, k: usize) -> Result<PodBasis> {
    let n = reference.len();
    if snapshots.is_empty() || k == 0 {
        return Err(Error::Precondition("POD needs at least one snapshot and K >= 1".into()));
    }
    if k > snapshots.len() || k > n {
        return Err(Error::RankDeficient(format!(
            "K={k} exceeds snapshot count {} or dimension {n}",
            snapshots.len()
        )));
    }
    let mut s = DMatrix::zeros(n, snapshots.len());
    for (j, snap) in snapshots.iter().enumerate() {
        if snap.len() != n {
            return Err(Error::Shape(format!("snapshot length {} vs {n}", snap.len())));
        }
        for i in 0..n {
            s[(i, j)] = snap[i] - reference[i];
        }
    }
    let (u, sigma) = left_singular_vectors(&s);
    if !(sigma[0] > 0.0) || sigma[k - 1] < POD_RANK_TOL * sigma[0] {
        return Err(Error::RankDeficient(format!(
            "requested K={k} but sigma_K/sigma_1 = {:e}",
            if sigma[0] > 0.0 { sigma[k - 1] / sigma[0] } else { 0.0 }
        )));
    }
    Ok(PodBasis {
        columns: u.columns(0, k).into_owned(),
        reference,
        singular_values: sigma,
    })
}

/// POD from trajectories, sampling every `skip`-th state (excluding the
/// initial one).
pub fn compute_pod(trajectories: &[Trajectory], rule: ReferenceRule, skip: usize, k: usize) -> Result<PodBasis> {
    if skip == 0 {
        return Err(Error::Precondition("snapshot skip must be at least 1".into()));
    }
    let first = trajectories
        .first()
        .ok_or_else(|| Error::Precondition("no snapshot trajectories".into()))?;
    let reference = match rule {
        ReferenceRule::InitialState => first.states[0].clone(),
        ReferenceRule::Zero => vec![0.0; first.states[0].len()],
    };
    let mut snaps = Vec::new();
    for t in trajectories {
        let nt = t.states.len() - 1;
        for j in 1..=nt / skip {
            snaps.push(t.states[j * skip].clone());
        }
    }
    pod_from_snapshots(&snaps, reference, k)
}

/// Galerkin projection of a full-order system onto a POD basis.
#[derive(Debug, Clone)]
pub struct GalerkinRom {
    fom: SharedSystem,
    basis: PodBasis,
    phi_t: DMatrix<f64>,
}

pub fn galerkin_reduce(system: SharedSystem, basis: PodBasis) -> Result<GalerkinRom> {
    if basis.full_dim() != system.dim() || basis.reference.len() != system.dim() {
        return Err(Error::Shape(format!(
            "basis has {} rows, system dimension is {}",
            basis.full_dim(),
            system.dim()
        )));
    }
    let phi_t = basis.columns.transpose();
    Ok(GalerkinRom {
        fom: system,
        basis,
        phi_t,
    })
}

impl GalerkinRom {
    pub fn basis(&self) -> &PodBasis {
        &self.basis
    }

    pub fn fom(&self) -> &SharedSystem {
        &self.fom
    }

    /// Maps a reduced trajectory into the full-order state space.
    pub fn prolong_states(&self, states: &[Vec<f64>]) -> Vec<Vec<f64>> {
        states.iter().map(|s| self.basis.reconstruct(s)).collect()
    }
}

impl DynamicalSystem for GalerkinRom {
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn domain(&self) -> &ParamBox {
        self.fom.domain()
    }

    fn velocity(&self, x: &[f64], t: f64, mu: &ParamVector) -> Vec<f64> {
        let full = self.basis.reconstruct(x);
        let f = self.fom.velocity(&full, t, mu);
        (&self.phi_t * DVector::from_vec(f)).as_slice().to_vec()
    }

    fn jacobian(&self, x: &[f64], t: f64, mu: &ParamVector) -> Jacobian {
        let full = self.basis.reconstruct(x);
        let jphi = self.fom.jacobian(&full, t, mu).mul_dense(&self.basis.columns);
        Jacobian::Dense(&self.phi_t * jphi)
    }

    fn initial_condition(&self, mu: &ParamVector) -> Vec<f64> {
        self.basis.project(&self.fom.initial_condition(mu))
    }

    fn qoi(&self, x: &[f64], t: f64, mu: &ParamVector) -> f64 {
        self.fom.qoi(&self.basis.reconstruct(x), t, mu)
    }
}

/// Smallest `n` whose leading squared singular values carry at least the
/// requested fraction of the total.
pub fn energy_truncate(singular_values: &[f64], energy: f64) -> Result<usize> {
    if !(energy > 0.0 && energy <= 1.0) {
        return Err(Error::Precondition(format!("energy fraction {energy} outside (0, 1]")));
    }
    if singular_values.iter().any(|s| !(*s >= 0.0)) || singular_values.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Precondition(
            "singular values must be nonnegative and nonincreasing".into(),
        ));
    }
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return Err(Error::DegenerateSpectrum("all singular values are zero".into()));
    }
    let rank = singular_values.iter().filter(|&&s| s > 0.0).count();
    let mut cum = 0.0;
    for (i, s) in singular_values.iter().enumerate() {
        cum += s * s;
        if cum / total >= energy {
            return Ok(i + 1);
        }
    }
    Ok(rank)
}

/// Mean-centred principal components of a residual snapshot set.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualPca {
    pub basis: DMatrix<f64>,
    pub mean: Vec<f64>,
    pub singular_values: Vec<f64>,
}

impl ResidualPca {
    pub fn n_components(&self) -> usize {
        self.basis.ncols()
    }

    pub fn full_dim(&self) -> usize {
        self.basis.nrows()
    }
}

/// Fits residual principal components, keeping the modes that carry the
/// requested energy fraction.
pub fn fit_residual_pca(residuals: &[Vec<f64>], energy: f64) -> Result<ResidualPca> {
    let first = residuals
        .first()
        .ok_or_else(|| Error::EmptyTraining("no residual snapshots".into()))?;
    let n = first.len();
    let m = residuals.len();
    let mut mean = vec![0.0; n];
    for r in residuals {
        if r.len() != n {
            return Err(Error::Shape(format!("residual length {} vs {n}", r.len())));
        }
        for (a, b) in mean.iter_mut().zip(r) {
            *a += b;
        }
    }
    mean.iter_mut().for_each(|a| *a /= m as f64);
    let s = DMatrix::from_fn(n, m, |i, j| residuals[j][i] - mean[i]);
    let (u, sigma) = left_singular_vectors(&s);
    let n_r = energy_truncate(&sigma, energy)?;
    let numerical_rank = sigma.iter().filter(|&&v| v > POD_RANK_TOL * sigma[0]).count();
    let n_r = n_r.min(numerical_rank).max(1);
    Ok(ResidualPca {
        basis: u.columns(0, n_r).into_owned(),
        mean,
        singular_values: sigma,
    })
}

/// Ordered sample indices (0-based) into the full residual vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingMatrix {
    pub rows: Vec<usize>,
}

impl SamplingMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn sample(&self, v: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|&i| v[i]).collect()
    }
}

/// q-sampling: leading pivots of a column-pivoted QR of `Φ_rᵀ`.
pub fn qsample_select(pca: &ResidualPca, n_s: usize) -> Result<SamplingMatrix> {
    let n_r = pca.n_components();
    if n_s < n_r {
        return Err(Error::UnderSampling(format!("{n_s} samples for {n_r} components")));
    }
    if n_s > pca.full_dim() {
        return Err(Error::Precondition(format!(
            "{n_s} samples requested from a vector of length {}",
            pca.full_dim()
        )));
    }
    let order = pivoted_qr_order(&pca.basis.transpose());
    Ok(SamplingMatrix {
        rows: order[..n_s].to_vec(),
    })
}

/// `Φ_rᵀ (r - r̄)`.
pub fn pca_project(pca: &ResidualPca, r: &[f64]) -> Result<Vec<f64>> {
    if r.len() != pca.full_dim() {
        return Err(Error::Shape(format!(
            "residual length {} vs {}",
            r.len(),
            pca.full_dim()
        )));
    }
    let d = DVector::from_iterator(r.len(), r.iter().zip(&pca.mean).map(|(a, b)| a - b));
    Ok((pca.basis.transpose() * d).as_slice().to_vec())
}

/// Least-squares coefficients `[P Φ_r]⁺ (sampled - sampled_mean)`.
pub fn gappy_reconstruct(
    pca: &ResidualPca,
    sampling: &SamplingMatrix,
    sampled: &[f64],
    sampled_mean: &[f64],
) -> Result<Vec<f64>> {
    let n_s = sampling.len();
    if sampled.len() != n_s || sampled_mean.len() != n_s {
        return Err(Error::Shape(format!(
            "gappy input lengths {} and {} vs {n_s} samples",
            sampled.len(),
            sampled_mean.len()
        )));
    }
    let n_r = pca.n_components();
    let pphi = DMatrix::from_fn(n_s, n_r, |i, j| pca.basis[(sampling.rows[i], j)]);
    let rhs: Vec<f64> = sampled.iter().zip(sampled_mean).map(|(a, b)| a - b).collect();
    least_squares(&pphi, &rhs, GAPPY_COND_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_pca(cols: &[usize], n: usize) -> ResidualPca {
        let mut basis = DMatrix::zeros(n, cols.len());
        for (j, &c) in cols.iter().enumerate() {
            basis[(c, j)] = 1.0;
        }
        ResidualPca {
            basis,
            mean: vec![0.0; n],
            singular_values: vec![1.0; cols.len()],
        }
    }

    #[test]
    fn rank_one_snapshots() {
        let v = vec![1.0, -2.0, 2.0];
        let b = pod_from_snapshots(&[v.clone(), v.clone(), v.clone()], vec![0.0; 3], 1).unwrap();
        let proj: f64 = (0..3).map(|i| b.columns[(i, 0)] * v[i]).sum();
        assert!((proj.abs() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn two_directions_reproduced() {
        let snaps = vec![vec![3.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let b = pod_from_snapshots(&snaps, vec![0.0; 3], 2).unwrap();
        assert!((b.singular_values[0] - 3.0).abs() < 1e-12);
        assert!((b.singular_values[1] - 1.0).abs() < 1e-12);
        for s in &snaps {
            let back = b.reconstruct(&b.project(s));
            for (x, y) in back.iter().zip(s) {
                assert!((x - y).abs() < 1e-10);
            }
        }
        assert!(matches!(
            pod_from_snapshots(&[snaps[0].clone(), snaps[1].clone(), snaps[0].clone()], vec![0.0; 3], 3),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn energy_examples() {
        assert_eq!(energy_truncate(&[1.0, 0.0, 0.0], 0.99).unwrap(), 1);
        assert_eq!(energy_truncate(&[2.0, 1.0, 1.0], 0.99).unwrap(), 3);
        assert!(matches!(energy_truncate(&[3.0, 4.0], 0.99), Err(Error::Precondition(_))));
        assert!(matches!(energy_truncate(&[0.0, 0.0], 0.99), Err(Error::DegenerateSpectrum(_))));
    }

    #[test]
    fn qsample_examples() {
        let p = qsample_select(&unit_pca(&[0, 1], 3), 2).unwrap();
        let mut rows = p.rows.clone();
        rows.sort();
        assert_eq!(rows, vec![0, 1]);
        assert_eq!(qsample_select(&unit_pca(&[2], 3), 1).unwrap().rows, vec![2]);
        let mut all = qsample_select(&unit_pca(&[2], 3), 3).unwrap().rows;
        all.sort();
        assert_eq!(all, vec![0, 1, 2]);
        assert!(matches!(qsample_select(&unit_pca(&[0, 1], 3), 1), Err(Error::UnderSampling(_))));
    }

    #[test]
    fn projection_examples() {
        let mut pca = unit_pca(&[0, 2], 4);
        pca.mean = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(pca_project(&pca, &pca.mean.clone()).unwrap(), vec![0.0, 0.0]);
        let r = vec![1.5, 2.0, 1.0, 4.0];
        assert_eq!(pca_project(&pca, &r).unwrap(), vec![0.5, -2.0]);
        let p = SamplingMatrix { rows: vec![0, 2] };
        let g = gappy_reconstruct(&pca, &p, &p.sample(&r), &p.sample(&pca.mean)).unwrap();
        assert!((g[0] - 0.5).abs() < 1e-12 && (g[1] + 2.0).abs() < 1e-12);
        let bad = SamplingMatrix { rows: vec![0, 1] };
        assert!(matches!(
            gappy_reconstruct(&pca, &bad, &bad.sample(&r), &bad.sample(&pca.mean)),
            Err(Error::Conditioning(_))
        ));
    }
}
