//! Parameterized dynamical systems: the two benchmark full-order models,
//! a generic linear system, prolongation operators and QoI evaluation.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{BandMatrix, Jacobian};

/// Axis-aligned box of admissible parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ParamBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::Domain("box bounds must be nonempty and of equal length".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::Domain(format!("empty box {lower:?} .. {upper:?}")));
        }
        Ok(ParamBox { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, values: &[f64]) -> bool {
        values.len() == self.dim()
            && values
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    /// Validates `values` against the box.
    pub fn param(&self, values: Vec<f64>) -> Result<ParamVector> {
        if !self.contains(&values) {
            return Err(Error::Domain(format!(
                "{values:?} not in [{:?}, {:?}]",
                self.lower, self.upper
            )));
        }
        Ok(ParamVector(values))
    }
}

/// A parameter instance μ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        ParamVector(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A parameterized ODE system `dx/dt = f(x, t; μ)`, `x(0) = x₀(μ)`, with a
/// scalar quantity of interest `g(x, t; μ)`.
///
/// Implementations are immutable and reentrant.
pub trait DynamicalSystem: Send + Sync + Debug {
    fn dim(&self) -> usize;
    fn domain(&self) -> &ParamBox;
    fn velocity(&self, x: &[f64], t: f64, mu: &ParamVector) -> Vec<f64>;
    fn jacobian(&self, x: &[f64], t: f64, mu: &ParamVector) -> Jacobian;
    fn initial_condition(&self, mu: &ParamVector) -> Vec<f64>;
    fn qoi(&self, x: &[f64], t: f64, mu: &ParamVector) -> f64;

    fn n_params(&self) -> usize {
        self.domain().dim()
    }
}

pub type SharedSystem = Arc<dyn DynamicalSystem>;

/// Evaluates the QoI after checking the state dimension.
pub fn qoi_eval(system: &dyn DynamicalSystem, state: &[f64], t: f64, mu: &ParamVector) -> Result<f64> {
    if state.len() != system.dim() {
        return Err(Error::Shape(format!(
            "qoi: state length {} vs system dimension {}",
            state.len(),
            system.dim()
        )));
    }
    Ok(system.qoi(state, t, mu))
}

/// 0-based index of the midpoint coordinate, `⌈(N+1)/2⌉` in 1-based terms.
pub fn midpoint_index(n: usize) -> usize {
    (n + 2) / 2 - 1
}

/// Initial profile `x (2 - x) e^{2x}` of the advection–diffusion benchmark.
pub fn advection_diffusion_profile(x: f64) -> f64 {
    x * (2.0 - x) * (2.0 * x).exp()
}

/// Finite-difference advection–diffusion on `[0, 2]` with homogeneous
/// Dirichlet ends: forward differences for advection, central differences
/// for diffusion. μ = (wave speed, diffusivity).
#[derive(Debug, Clone)]
pub struct AdvectionDiffusion {
    n: usize,
    dx: f64,
    domain: ParamBox,
}

pub fn build_advection_diffusion(n_cells: usize) -> Result<AdvectionDiffusion> {
    if n_cells < 3 {
        return Err(Error::InvalidDiscretization(format!(
            "advection-diffusion needs at least 3 cells, got {n_cells}"
        )));
    }
    Ok(AdvectionDiffusion {
        n: n_cells - 1,
        dx: 2.0 / n_cells as f64,
        domain: ParamBox {
            lower: vec![-2.0, 0.1],
            upper: vec![-0.1, 1.0],
        },
    })
}

impl AdvectionDiffusion {
    pub fn spacing(&self) -> f64 {
        self.dx
    }

    pub fn qoi_index(&self) -> usize {
        midpoint_index(self.n)
    }

    /// Grid point coordinates `x_k = k Δx`, k = 1..N.
    pub fn nodes(&self) -> Vec<f64> {
        (1..=self.n).map(|k| k as f64 * self.dx).collect()
    }

    /// The constant system matrix `A(μ)` (the velocity is `A x`).
    pub fn system_matrix(&self, mu: &ParamVector) -> BandMatrix {
        let (adv, dif) = (mu[0] / self.dx, mu[1] / (self.dx * self.dx));
        let mut a = BandMatrix::zeros(self.n, 1, 1);
        for k in 0..self.n {
            a.set(k, k, adv - 2.0 * dif);
            if k > 0 {
                a.set(k, k - 1, dif);
            }
            if k + 1 < self.n {
                a.set(k, k + 1, -adv + dif);
            }
        }
        a
    }
}

impl DynamicalSystem for AdvectionDiffusion {
    fn dim(&self) -> usize {
        self.n
    }

    fn domain(&self) -> &ParamBox {
        &self.domain
    }

    fn velocity(&self, x: &[f64], _t: f64, mu: &ParamVector) -> Vec<f64> {
        let (adv, dif) = (mu[0] / self.dx, mu[1] / (self.dx * self.dx));
        let n = self.n;
        (0..n)
            .map(|k| {
                let left = if k > 0 { x[k - 1] } else { 0.0 };
                let right = if k + 1 < n { x[k + 1] } else { 0.0 };
                -adv * (right - x[k]) + dif * (right - 2.0 * x[k] + left)
            })
            .collect()
    }

    fn jacobian(&self, _x: &[f64], _t: f64, mu: &ParamVector) -> Jacobian {
        Jacobian::Band(self.system_matrix(mu))
    }

    fn initial_condition(&self, _mu: &ParamVector) -> Vec<f64> {
        self.nodes().into_iter().map(advection_diffusion_profile).collect()
    }

    fn qoi(&self, x: &[f64], _t: f64, _mu: &ParamVector) -> f64 {
        x[self.qoi_index()]
    }
}

/// Finite-volume inviscid Burgers on `[0, 100]` with upwind flux `u²/2`,
/// inflow value μ₃ at the left face, zero-gradient outflow, source
/// `μ₁ exp(μ₂ x)` at cell centres and uniform initial state μ₄.
#[derive(Debug, Clone)]
pub struct BurgersFv {
    n: usize,
    width: f64,
    domain: ParamBox,
}

pub const BURGERS_LENGTH: f64 = 100.0;

pub fn build_burgers_fom(cell_width: f64) -> Result<BurgersFv> {
    if !(cell_width > 0.0) || !cell_width.is_finite() {
        return Err(Error::InvalidDiscretization(format!(
            "cell width must be positive, got {cell_width}"
        )));
    }
    let cells = (BURGERS_LENGTH / cell_width).round();
    if cells < 1.0 || (cells * cell_width - BURGERS_LENGTH).abs() > 1e-9 * BURGERS_LENGTH {
        return Err(Error::InvalidDiscretization(format!(
            "cell width {cell_width} does not divide the domain length {BURGERS_LENGTH}"
        )));
    }
    Ok(BurgersFv {
        n: cells as usize,
        width: cell_width,
        domain: ParamBox {
            lower: vec![0.005, 0.005, 3.0, 0.5],
            upper: vec![0.05, 0.05, 5.0, 2.5],
        },
    })
}

impl BurgersFv {
    pub fn cell_width(&self) -> f64 {
        self.width
    }

    pub fn qoi_index(&self) -> usize {
        midpoint_index(self.n)
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n).map(|i| (i as f64 + 0.5) * self.width).collect()
    }
}

impl DynamicalSystem for BurgersFv {
    fn dim(&self) -> usize {
        self.n
    }

    fn domain(&self) -> &ParamBox {
        &self.domain
    }

    fn velocity(&self, u: &[f64], _t: f64, mu: &ParamVector) -> Vec<f64> {
        let w = self.width;
        let mut prev_flux = 0.5 * mu[2] * mu[2];
        (0..self.n)
            .map(|i| {
                let flux = 0.5 * u[i] * u[i];
                let xc = (i as f64 + 0.5) * w;
                let v = -(flux - prev_flux) / w + mu[0] * (mu[1] * xc).exp();
                prev_flux = flux;
                v
            })
            .collect()
    }

    fn jacobian(&self, u: &[f64], _t: f64, _mu: &ParamVector) -> Jacobian {
        let w = self.width;
        let mut j = BandMatrix::zeros(self.n, 1, 0);
        for i in 0..self.n {
            j.set(i, i, -u[i] / w);
            if i > 0 {
                j.set(i, i - 1, u[i - 1] / w);
            }
        }
        Jacobian::Band(j)
    }

    fn initial_condition(&self, mu: &ParamVector) -> Vec<f64> {
        vec![mu[3]; self.n]
    }

    fn qoi(&self, x: &[f64], _t: f64, _mu: &ParamVector) -> f64 {
        x[self.qoi_index()]
    }
}

/// Linear system `dx/dt = A x` with a fixed initial state and a coordinate
/// QoI. Used for scalar test problems and as a dense reference.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: DMatrix<f64>,
    pub x0: Vec<f64>,
    pub qoi_index: usize,
    domain: ParamBox,
}

impl LinearSystem {
    pub fn new(matrix: DMatrix<f64>, x0: Vec<f64>) -> Self {
        LinearSystem {
            matrix,
            x0,
            qoi_index: 0,
            domain: ParamBox {
                lower: vec![0.0],
                upper: vec![1.0],
            },
        }
    }
}

impl DynamicalSystem for LinearSystem {
    fn dim(&self) -> usize {
        self.x0.len()
    }

    fn domain(&self) -> &ParamBox {
        &self.domain
    }

    fn velocity(&self, x: &[f64], _t: f64, _mu: &ParamVector) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(x)).as_slice().to_vec()
    }

    fn jacobian(&self, _x: &[f64], _t: f64, _mu: &ParamVector) -> Jacobian {
        Jacobian::Dense(self.matrix.clone())
    }

    fn initial_condition(&self, _mu: &ParamVector) -> Vec<f64> {
        self.x0.clone()
    }

    fn qoi(&self, x: &[f64], _t: f64, _mu: &ParamVector) -> f64 {
        x[self.qoi_index]
    }
}

/// Sparse linear prolongation from a coarse to a fine state space. Each row
/// holds `(coarse index, weight)` pairs summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProlongationOp {
    pub coarse_dim: usize,
    pub fine_dim: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl ProlongationOp {
    /// Piecewise-linear interpolation between coarse sample locations,
    /// extended linearly past the outermost coarse points. Both location
    /// lists must be strictly increasing.
    pub fn linear_interpolation(coarse: &[f64], fine: &[f64]) -> Result<Self> {
        if fine.len() < coarse.len() || coarse.is_empty() {
            return Err(Error::Shape(format!(
                "prolongation from {} to {} points",
                coarse.len(),
                fine.len()
            )));
        }
        if coarse.len() == 1 {
            return Ok(ProlongationOp {
                coarse_dim: 1,
                fine_dim: fine.len(),
                rows: vec![vec![(0, 1.0)]; fine.len()],
            });
        }
        let last = coarse.len() - 2;
        let rows = fine
            .iter()
            .map(|&x| {
                // Segment [c_j, c_{j+1}] containing x, clamped to the ends.
                let j = match coarse.iter().position(|&c| c > x) {
                    Some(0) => 0,
                    Some(p) => (p - 1).min(last),
                    None => last,
                };
                let (a, b) = (coarse[j], coarse[j + 1]);
                let s = (x - a) / (b - a);
                vec![(j, 1.0 - s), (j + 1, s)]
            })
            .collect();
        Ok(ProlongationOp {
            coarse_dim: coarse.len(),
            fine_dim: fine.len(),
            rows,
        })
    }

    pub fn dense_weights(&self) -> DMatrix<f64> {
        let mut w = DMatrix::zeros(self.fine_dim, self.coarse_dim);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                w[(i, j)] += v;
            }
        }
        w
    }
}

/// Applies the prolongation to a coarse state.
pub fn prolong(op: &ProlongationOp, coarse_state: &[f64], _mu: &ParamVector) -> Result<Vec<f64>> {
    if coarse_state.len() != op.coarse_dim {
        return Err(Error::Shape(format!(
            "prolong: coarse state length {} vs {}",
            coarse_state.len(),
            op.coarse_dim
        )));
    }
    Ok(op
        .rows
        .iter()
        .map(|row| row.iter().map(|&(j, w)| w * coarse_state[j]).sum())
        .collect())
}

/// Prolongation between two Burgers discretizations (cell centres).
pub fn burgers_prolongation(coarse: &BurgersFv, fine: &BurgersFv) -> Result<ProlongationOp> {
    ProlongationOp::linear_interpolation(&coarse.centers(), &fine.centers())
}
