//! Accuracy metrics, the a posteriori state-error bound and report tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dynsys::{AdvectionDiffusion, ParamVector};
use crate::error::{Error, Result};
use crate::integrator::MultistepScheme;
use crate::linalg::spectral_norm;

/// Fraction of variance unexplained: SSres / SStot about the truth mean.
pub fn fvu(truth: &[f64], pred: &[f64]) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(Error::Shape(format!("{} truths vs {} predictions", truth.len(), pred.len())));
    }
    if truth.len() < 2 {
        return Err(Error::EmptyTest(format!("FVU needs at least 2 points, got {}", truth.len())));
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    let ss_res: f64 = truth.iter().zip(pred).map(|(t, p)| (t - p).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::DegenerateVariance(
            "test responses have zero variance; FVU is undefined".into(),
        ));
    }
    Ok(ss_res / ss_tot)
}

pub fn r2(truth: &[f64], pred: &[f64]) -> Result<f64> {
    Ok(1.0 - fvu(truth, pred)?)
}

/// Constants of the state-error bound for a Lipschitz velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundParams {
    pub kappa: f64,
    pub scheme: MultistepScheme,
    pub dt: f64,
}

impl BoundParams {
    pub fn new(kappa: f64, scheme: MultistepScheme, dt: f64) -> Result<Self> {
        if !(kappa >= 0.0) || !(dt > 0.0) {
            return Err(Error::Domain(format!("kappa {kappa} and dt {dt} must be non-negative / positive")));
        }
        let p = BoundParams { kappa, scheme, dt };
        let hbar = p.h_bar();
        if !(hbar > 0.0) {
            let limit = p.scheme.alphas[0].abs() / (p.scheme.betas[0].abs() * kappa);
            return Err(Error::InadmissibleBound(format!(
                "time step {dt} violates the restriction dt < {limit:e} for kappa = {kappa:e}"
            )));
        }
        Ok(p)
    }

    pub fn h_bar(&self) -> f64 {
        self.scheme.alphas[0].abs() - self.scheme.betas[0].abs() * self.kappa * self.dt
    }

    /// `gamma[j - 1]` multiplies the bound `j` steps back.
    pub fn gammas(&self) -> Vec<f64> {
        let h = self.h_bar();
        (1..=self.scheme.steps())
            .map(|j| (self.scheme.alphas[j].abs() + self.scheme.betas[j].abs() * self.kappa * self.dt) / h)
            .collect()
    }
}

/// Bound on the state error at fine indices `0..=residual_norms.len()`.
/// `initial[j]` is the exact error at index `j` and seeds the recursion;
/// `residual_norms[n - 1]` is the surrogate residual norm at index `n`.
pub fn error_bound_sequence(residual_norms: &[f64], initial: &[f64], p: &BoundParams) -> Result<Vec<f64>> {
    if initial.is_empty() {
        return Err(Error::MissingHistory("the bound needs the initial error".into()));
    }
    let h = p.h_bar();
    let gammas = p.gammas();
    let n_total = residual_norms.len() + 1;
    let mut b = Vec::with_capacity(n_total);
    for n in 0..n_total {
        if n < initial.len() {
            b.push(initial[n]);
            continue;
        }
        let kn = n.min(gammas.len());
        let hist: f64 = (1..=kn).map(|j| gammas[j - 1] * b[n - j]).sum();
        b.push(residual_norms[n - 1] / h + hist);
    }
    Ok(b)
}

/// Spectral norm of the advection-diffusion system matrix, the exact
/// Lipschitz constant of its linear velocity.
pub fn ad_kappa(system: &AdvectionDiffusion, mu: &ParamVector) -> f64 {
    let a = system.system_matrix(mu).to_dense();
    let at = a.transpose();
    let n = a.nrows();
    let mul = |m: &nalgebra::DMatrix<f64>, v: &[f64]| (m * nalgebra::DVector::from_column_slice(v)).as_slice().to_vec();
    spectral_norm(n, |v| mul(&a, v), |v| mul(&at, v), 1e-8, 100_000)
}

/// One evaluated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub family: String,
    pub feature_kind: String,
    pub train_size: usize,
    pub response: String,
    /// `None` when the FVU is undefined.
    pub fvu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestFeature {
    pub family: String,
    pub response: String,
    pub train_size: usize,
    pub feature_kind: String,
    pub fvu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportEntry>,
    pub best_features: Vec<BestFeature>,
    /// Percentage of cases (feature kind, training size, response) in which
    /// each family has the lowest FVU; ties share credit equally.
    pub lowest_fvu_percent: BTreeMap<String, f64>,
    pub cases: usize,
}

pub fn report_grid(entries: &[ReportEntry]) -> Result<Report> {
    if entries.is_empty() {
        return Err(Error::EmptyTest("no evaluations to report".into()));
    }
    let mut rows = entries.to_vec();
    rows.sort_by(|a, b| {
        (&a.response, a.train_size, &a.feature_kind, &a.family).cmp(&(&b.response, b.train_size, &b.feature_kind, &b.family))
    });
    let mut tally: BTreeMap<String, f64> = rows.iter().map(|r| (r.family.clone(), 0.0)).collect();
    let mut cases: BTreeMap<(&str, usize, &str), Vec<&ReportEntry>> = BTreeMap::new();
    for r in &rows {
        cases
            .entry((r.response.as_str(), r.train_size, r.feature_kind.as_str()))
            .or_default()
            .push(r);
    }
    let mut n_cases = 0;
    for members in cases.values() {
        let best = members.iter().filter_map(|r| r.fvu).fold(f64::INFINITY, f64::min);
        if !best.is_finite() {
            continue;
        }
        n_cases += 1;
        let winners: Vec<&&ReportEntry> = members.iter().filter(|r| r.fvu == Some(best)).collect();
        for w in &winners {
            *tally.get_mut(&w.family).expect("family registered") += 1.0 / winners.len() as f64;
        }
    }
    if n_cases > 0 {
        tally.values_mut().for_each(|v| *v *= 100.0 / n_cases as f64);
    }
    let mut best_map: BTreeMap<(&str, &str, usize), &ReportEntry> = BTreeMap::new();
    for r in &rows {
        let Some(f) = r.fvu else { continue };
        let key = (r.family.as_str(), r.response.as_str(), r.train_size);
        match best_map.get(&key) {
            Some(b) if b.fvu.unwrap() <= f => {}
            _ => {
                best_map.insert(key, r);
            }
        }
    }
    let best_features = best_map
        .into_values()
        .map(|r| BestFeature {
            family: r.family.clone(),
            response: r.response.clone(),
            train_size: r.train_size,
            feature_kind: r.feature_kind.clone(),
            fvu: r.fvu.unwrap(),
        })
        .collect();
    Ok(Report {
        rows,
        best_features,
        lowest_fvu_percent: tally,
        cases: n_cases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fvu_examples() {
        assert_eq!(fvu(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap(), 0.5);
        assert_eq!(fvu(&[1.0, 2.0, 3.0], &[2.0; 3]).unwrap(), 1.0);
        assert_eq!(fvu(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!(matches!(fvu(&[1.0, 1.0], &[1.0, 1.0]), Err(Error::DegenerateVariance(_))));
    }

    #[test]
    fn bound_constants() {
        let scheme = MultistepScheme::new(vec![1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let p = BoundParams::new(2.0, scheme, 0.4).unwrap();
        assert!((p.h_bar() - 0.2).abs() < 1e-15);
        assert!((p.gammas()[0] - 9.0).abs() < 1e-12);
        assert!(matches!(
            BoundParams::new(2.0, MultistepScheme::implicit_euler(), 0.5),
            Err(Error::InadmissibleBound(_))
        ));
    }

    #[test]
    fn zero_lipschitz_bound_telescopes() {
        let p = BoundParams::new(0.0, MultistepScheme::implicit_euler(), 0.1).unwrap();
        let b = error_bound_sequence(&[0.3; 5], &[0.0], &p).unwrap();
        for (n, v) in b.iter().enumerate() {
            assert!((v - 0.3 * n as f64).abs() < 1e-12);
        }
    }

    fn entry(family: &str, fvu: f64) -> ReportEntry {
        ReportEntry {
            family: family.into(),
            feature_kind: "params".into(),
            train_size: 40,
            response: "qoi".into(),
            fvu: Some(fvu),
        }
    }

    #[test]
    fn tallies() {
        let r = report_grid(&[entry("arx", 0.1)]).unwrap();
        assert_eq!(r.lowest_fvu_percent["arx"], 100.0);
        let r = report_grid(&[entry("arx", 0.1), entry("lstm", 0.2)]).unwrap();
        assert_eq!(r.lowest_fvu_percent["arx"], 100.0);
        assert_eq!(r.lowest_fvu_percent["lstm"], 0.0);
        let r = report_grid(&[entry("arx", 0.1), entry("lstm", 0.1)]).unwrap();
        assert_eq!(r.lowest_fvu_percent["arx"], 50.0);
        assert!(report_grid(&[]).is_err());
    }
}
