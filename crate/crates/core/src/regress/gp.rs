use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// The λ grid: 20 log-spaced points from 1e-8 to 1.
pub fn lambda_grid() -> Vec<f64> {
    (0..20).map(|i| 10f64.powf(-8.0 + 8.0 * i as f64 / 19.0)).collect()
}

/// Squared-exponential kernel with unit length scale and unit amplitude.
pub fn se_kernel(a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-0.5 * d2).exp()
}

/// Cholesky factor of `K + λI` for fixed training inputs.
#[derive(Debug, Clone)]
pub struct GpFactor {
    pub inputs: Vec<Vec<f64>>,
    chol: Cholesky<f64, Dyn>,
}

impl GpFactor {
    pub fn new(inputs: &[Vec<f64>], lambda: f64) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::EmptyTraining("GP has no training inputs".into()));
        }
        if !(lambda > 0.0) {
            return Err(Error::Config(format!("GP noise magnitude must be positive, got {lambda}")));
        }
        let n = inputs.len();
        let k = DMatrix::from_fn(n, n, |i, j| se_kernel(&inputs[i], &inputs[j]) + if i == j { lambda } else { 0.0 });
        let chol = k
            .cholesky()
            .ok_or_else(|| Error::Conditioning("GP kernel matrix is not positive definite".into()))?;
        Ok(GpFactor {
            inputs: inputs.to_vec(),
            chol,
        })
    }

    /// Weights `(K + λI)⁻¹ (y - ȳ)` and the mean ȳ.
    pub fn weights(&self, y: &[f64]) -> Result<(Vec<f64>, f64)> {
        if y.len() != self.inputs.len() {
            return Err(Error::Shape(format!(
                "{} responses for {} inputs",
                y.len(),
                self.inputs.len()
            )));
        }
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let centred = DVector::from_iterator(y.len(), y.iter().map(|v| v - mean));
        Ok((self.chol.solve(&centred).as_slice().to_vec(), mean))
    }

    fn kstar(&self, query: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.inputs.len(), self.inputs.iter().map(|x| se_kernel(x, query)))
    }

    pub fn mean(&self, weights: &[f64], mean: f64, query: &[f64]) -> f64 {
        let ks = self.kstar(query);
        mean + ks.iter().zip(weights).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn variance(&self, query: &[f64]) -> f64 {
        let ks = self.kstar(query);
        let v = self.chol.solve(&ks);
        (se_kernel(query, query) - ks.dot(&v)).max(0.0)
    }
}

/// Posterior mean and variance at `query` from one set of training pairs.
pub fn gp_fit_predict(inputs: &[Vec<f64>], responses: &[f64], lambda: f64, query: &[f64]) -> Result<(f64, f64)> {
    let f = GpFactor::new(inputs, lambda)?;
    let (w, m) = f.weights(responses)?;
    Ok((f.mean(&w, m, query), f.variance(query)))
}
