//! Implicit linear multistep time integration with Newton solves.

use serde::{Deserialize, Serialize};

use crate::dynsys::{DynamicalSystem, ParamVector};
use crate::error::{Error, Result};
use crate::linalg::norm2;

/// Coefficients of `Σ α_i x^{n-i} = Δt Σ β_i f(x^{n-i})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultistepScheme {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl MultistepScheme {
    pub fn new(alphas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() || alphas.len() != betas.len() {
            return Err(Error::Config(format!(
                "scheme needs equally long coefficient lists, got {} and {}",
                alphas.len(),
                betas.len()
            )));
        }
        if alphas[0] == 0.0 {
            return Err(Error::Config("leading alpha must be nonzero".into()));
        }
        Ok(MultistepScheme { alphas, betas })
    }

    pub fn crank_nicolson() -> Self {
        MultistepScheme {
            alphas: vec![1.0, -1.0],
            betas: vec![0.5, 0.5],
        }
    }

    pub fn implicit_euler() -> Self {
        MultistepScheme {
            alphas: vec![1.0, -1.0],
            betas: vec![1.0, 0.0],
        }
    }

    /// Stencil width k.
    pub fn steps(&self) -> usize {
        self.alphas.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() || n_steps == 0 {
            return Err(Error::Config(format!("invalid time grid dt={dt}, n_steps={n_steps}")));
        }
        Ok(TimeGrid { dt, n_steps })
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol: 1e-10,
            max_iter: 25,
        }
    }
}

/// States `x⁰ … x^{N_t}` on a uniform fine grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub grid: TimeGrid,
    pub mu: ParamVector,
}

/// Contribution of the previous states to the residual at step `n`.
/// `history[0]` is `x^{n-1}`, `history[1]` is `x^{n-2}`, and so on.
fn history_term(
    system: &dyn DynamicalSystem,
    scheme: &MultistepScheme,
    history: &[&[f64]],
    n: usize,
    mu: &ParamVector,
    dt: f64,
) -> Result<Vec<f64>> {
    let kn = n.min(scheme.steps());
    if history.len() < kn {
        return Err(Error::MissingHistory(format!(
            "step {n} needs {kn} previous states, got {}",
            history.len()
        )));
    }
    let dim = system.dim();
    let mut acc = vec![0.0; dim];
    for i in 1..=kn {
        let x = history[i - 1];
        if x.len() != dim {
            return Err(Error::Shape(format!(
                "history state of length {} vs dimension {dim}",
                x.len()
            )));
        }
        let (a, b) = (scheme.alphas[i], scheme.betas[i]);
        if b != 0.0 {
            let f = system.velocity(x, (n - i) as f64 * dt, mu);
            for ((s, xj), fj) in acc.iter_mut().zip(x).zip(&f) {
                *s += a * xj - dt * b * fj;
            }
        } else {
            for (s, xj) in acc.iter_mut().zip(x) {
                *s += a * xj;
            }
        }
    }
    Ok(acc)
}

fn residual_with(
    system: &dyn DynamicalSystem,
    scheme: &MultistepScheme,
    w: &[f64],
    hist: &[f64],
    n: usize,
    mu: &ParamVector,
    dt: f64,
) -> Vec<f64> {
    let (a0, b0) = (scheme.alphas[0], scheme.betas[0]);
    let f = system.velocity(w, n as f64 * dt, mu);
    w.iter()
        .zip(&f)
        .zip(hist)
        .map(|((wi, fi), hi)| a0 * wi - dt * b0 * fi + hi)
        .collect()
}

/// Discrete O∆E residual at step `n` for a candidate state `w`, with the
/// stencil truncated to `min(n, k)` previous states.
pub fn discrete_residual(
    system: &dyn DynamicalSystem,
    scheme: &MultistepScheme,
    w: &[f64],
    history: &[&[f64]],
    n: usize,
    mu: &ParamVector,
    dt: f64,
) -> Result<Vec<f64>> {
    if w.len() != system.dim() {
        return Err(Error::Shape(format!(
            "residual: state length {} vs dimension {}",
            w.len(),
            system.dim()
        )));
    }
    let hist = history_term(system, scheme, history, n, mu, dt)?;
    Ok(residual_with(system, scheme, w, &hist, n, mu, dt))
}

/// Solves the O∆E at step `n` by Newton's method starting from the most
/// recent state.
pub fn newton_step_solve(
    system: &dyn DynamicalSystem,
    scheme: &MultistepScheme,
    history: &[&[f64]],
    n: usize,
    mu: &ParamVector,
    dt: f64,
    newton: NewtonConfig,
) -> Result<Vec<f64>> {
    if !(newton.tol > 0.0) {
        return Err(Error::Config(format!("Newton tolerance must be positive, got {}", newton.tol)));
    }
    if n == 0 || history.is_empty() {
        return Err(Error::MissingHistory(format!("no previous state at step {n}")));
    }
    let hist = history_term(system, scheme, history, n, mu, dt)?;
    let (a0, b0) = (scheme.alphas[0], scheme.betas[0]);
    let t = n as f64 * dt;
    let mut w = history[0].to_vec();
    let mut r = residual_with(system, scheme, &w, &hist, n, mu, dt);
    let mut rnorm = norm2(&r);
    let mut iter = 0;
    while !(rnorm <= newton.tol) {
        if iter == newton.max_iter || !rnorm.is_finite() {
            return Err(Error::SolverDivergence {
                iterations: iter,
                residual_norm: rnorm,
                context: format!(" at step {n}"),
            });
        }
        let jac = system.jacobian(&w, t, mu);
        let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
        let delta = jac.solve_shifted(a0, -dt * b0, &neg_r)?;
        for (wi, d) in w.iter_mut().zip(&delta) {
            *wi += d;
        }
        r = residual_with(system, scheme, &w, &hist, n, mu, dt);
        rnorm = norm2(&r);
        iter += 1;
    }
    Ok(w)
}

/// Integrates from `x₀(μ)` over the grid.
pub fn integrate(
    system: &dyn DynamicalSystem,
    scheme: &MultistepScheme,
    grid: TimeGrid,
    mu: &ParamVector,
) -> Result<Trajectory> {
    integrate_with(system, scheme, grid, mu, NewtonConfig::default())
}

pub fn integrate_with(
    system: &dyn DynamicalSystem,
    scheme: &MultistepScheme,
    grid: TimeGrid,
    mu: &ParamVector,
    newton: NewtonConfig,
) -> Result<Trajectory> {
    let x0 = system.initial_condition(mu);
    let k = scheme.steps();
    let mut states: Vec<Vec<f64>> = Vec::with_capacity(grid.n_steps + 1);
    states.push(x0);
    for n in 1..=grid.n_steps {
        let kn = n.min(k).max(1);
        let history: Vec<&[f64]> = (1..=kn).map(|i| states[n - i].as_slice()).collect();
        let next = newton_step_solve(system, scheme, &history, n, mu, grid.dt, newton).map_err(|e| match e {
            Error::SolverDivergence {
                iterations,
                residual_norm,
                context,
            } => Error::SolverDivergence {
                iterations,
                residual_norm,
                context: format!("{context} for mu = {:?}", mu.as_slice()),
            },
            other => other,
        })?;
        states.push(next);
    }
    Ok(Trajectory {
        states,
        grid,
        mu: mu.clone(),
    })
}

/// Residual of the fine-grid O∆E at step `n` evaluated along a stored
/// trajectory, using that trajectory's own history.
pub fn trajectory_residual(
    system: &dyn DynamicalSystem,
    scheme: &MultistepScheme,
    states: &[Vec<f64>],
    n: usize,
    mu: &ParamVector,
    dt: f64,
) -> Result<Vec<f64>> {
    if n == 0 || n >= states.len() {
        return Err(Error::Shape(format!(
            "residual index {n} outside 1..{}",
            states.len().saturating_sub(1)
        )));
    }
    let kn = n.min(scheme.steps());
    let history: Vec<&[f64]> = (1..=kn).map(|i| states[n - i].as_slice()).collect();
    discrete_residual(system, scheme, &states[n], &history, n, mu, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::{build_advection_diffusion, build_burgers_fom, LinearSystem};
    use nalgebra::DMatrix;

    fn scalar(lambda: f64, x0: f64) -> LinearSystem {
        LinearSystem::new(DMatrix::from_element(1, 1, lambda), vec![x0])
    }

    fn mu0() -> ParamVector {
        ParamVector::new(vec![0.5])
    }

    #[test]
    fn crank_nicolson_fixed_point_has_zero_residual() {
        let sys = scalar(-1.0, 1.0);
        let w = 0.95 / 1.05;
        let r = discrete_residual(&sys, &MultistepScheme::crank_nicolson(), &[w], &[&[1.0]], 1, &mu0(), 0.1)
            .unwrap();
        assert!(r[0].abs() < 1e-15);
    }

    #[test]
    fn implicit_euler_plug_in() {
        let sys = scalar(0.0, 0.0);
        let r = discrete_residual(&sys, &MultistepScheme::implicit_euler(), &[5.0], &[&[2.0]], 3, &mu0(), 0.1)
            .unwrap();
        assert_eq!(r, vec![3.0]);
    }

    #[test]
    fn missing_history_is_reported() {
        let sys = scalar(-1.0, 1.0);
        let e = discrete_residual(&sys, &MultistepScheme::implicit_euler(), &[1.0], &[], 1, &mu0(), 0.1);
        assert!(matches!(e, Err(Error::MissingHistory(_))));
    }

    #[test]
    fn scalar_decay_matches_amplification() {
        let sys = scalar(-1.0, 2.0);
        let traj = integrate(&sys, &MultistepScheme::crank_nicolson(), TimeGrid::new(0.1, 10).unwrap(), &mu0())
            .unwrap();
        let exact = (0.95f64 / 1.05).powi(10) * 2.0;
        assert!((traj.states[10][0] - exact).abs() < 1e-12);
    }

    #[test]
    fn zero_velocity_keeps_initial_state() {
        let sys = LinearSystem::new(DMatrix::zeros(3, 3), vec![1.0, -2.0, 0.5]);
        let traj = integrate(&sys, &MultistepScheme::crank_nicolson(), TimeGrid::new(0.3, 5).unwrap(), &mu0())
            .unwrap();
        for s in &traj.states {
            assert_eq!(s, &vec![1.0, -2.0, 0.5]);
        }
    }

    #[test]
    fn zero_budget_diverges() {
        let sys = scalar(-1.0, 1.0);
        let e = newton_step_solve(
            &sys,
            &MultistepScheme::implicit_euler(),
            &[&[1.0]],
            1,
            &mu0(),
            0.1,
            NewtonConfig { tol: 1e-10, max_iter: 0 },
        );
        assert!(matches!(e, Err(Error::SolverDivergence { iterations: 0, .. })));
    }

    #[test]
    fn truncated_start_matches_one_step_scheme() {
        let sys = scalar(-2.0, 1.0);
        let two = MultistepScheme::new(vec![1.5, -2.0, 0.5], vec![1.0, 0.0, 0.0]).unwrap();
        let one = MultistepScheme::new(vec![1.5, -2.0], vec![1.0, 0.0]).unwrap();
        let nc = NewtonConfig::default();
        let a = newton_step_solve(&sys, &two, &[&[1.0]], 1, &mu0(), 0.1, nc).unwrap();
        let b = newton_step_solve(&sys, &one, &[&[1.0]], 1, &mu0(), 0.1, nc).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn linear_system_converges_in_one_iteration() {
        let sys = build_advection_diffusion(21).unwrap();
        let mu = ParamVector::new(vec![-1.0, 0.5]);
        let x0 = sys.initial_condition(&mu);
        let nc = NewtonConfig { tol: 1e-10, max_iter: 1 };
        let w = newton_step_solve(&sys, &MultistepScheme::crank_nicolson(), &[&x0], 1, &mu, 3e-4, nc).unwrap();
        let r = discrete_residual(&sys, &MultistepScheme::crank_nicolson(), &w, &[&x0], 1, &mu, 3e-4).unwrap();
        assert!(norm2(&r) <= 1e-10);
    }

    #[test]
    fn burgers_step_matches_scalar_root_finding() {
        // Upwind implicit Euler decouples into one scalar quadratic per cell,
        // solved left to right by bisection.
        let sys = build_burgers_fom(25.0).unwrap();
        let mu = ParamVector::new(vec![0.02, 0.03, 4.0, 1.0]);
        let x0 = sys.initial_condition(&mu);
        let dt = 0.5;
        let w = newton_step_solve(&sys, &MultistepScheme::implicit_euler(), &[&x0], 1, &mu, dt, NewtonConfig::default())
            .unwrap();
        let width = 25.0;
        let mut upstream = mu[2];
        for i in 0..4 {
            let xc = (i as f64 + 0.5) * width;
            let src = mu[0] * (mu[1] * xc).exp();
            let g = |u: f64| u - x0[i] + dt * ((u * u - upstream * upstream) / (2.0 * width) - src);
            let (mut lo, mut hi) = (0.0, 10.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(mid) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            assert!((w[i] - 0.5 * (lo + hi)).abs() < 1e-9);
            upstream = w[i];
        }
    }
}
