//! Gradient-descent estimators and the exact regularized optimum.
//!
//! The regularized iteration minimizes
//! `Φ(x) = ‖Ax - b‖²/σ² + ‖x - x0‖²/ν²` via
//!
//! ```text
//! x[t+1] = Q x[t] + w,   Q = (1 - τγ) I - τ L,   w = τ Aᵀb + τγ x0,   x[0] = x0
//! ```
//!
//! and the baseline runs plain gradient descent on `Ψ(x) = ‖Ax - b‖²`,
//! `x[t+1] = (I - τL) x[t] + τ Aᵀb`. The baseline is a reconstruction of the
//! earlier unregularized algorithm at matched step size, not a verbatim copy.
//!
//! Both steps are evaluated node by node: entry `i` of the next state reads
//! only `x_i`, the neighbors' `x_j` and the measurements on incident edges.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::problem::{ProblemSpec, Realization};

/// Relative slack when comparing a step size against its bound, so that a
/// value printed and re-read (e.g. `1/2.0025`) still counts as admissible.
const STEP_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Regularized,
    Baseline,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Regularized => "regularized",
            Algorithm::Baseline => "baseline",
        }
    }
}

/// Step size and regularization for a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tau: f64,
    pub gamma: f64,
    /// Reject step sizes above `1/(d_max + γ)` instead of running anyway.
    pub enforce_assumption: bool,
    /// Step size for the baseline; `tau` when unset.
    pub tau_baseline: Option<f64>,
}

impl SolverConfig {
    pub fn new(tau: f64, gamma: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Self {
            tau,
            gamma,
            enforce_assumption: true,
            tau_baseline: None,
        })
    }

    /// Config using the largest admissible step, [`default_tau`].
    pub fn for_graph(g: &Graph, gamma: f64) -> Result<Self> {
        Self::new(default_tau(g, gamma), gamma)
    }

    pub fn with_tau_baseline(mut self, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("baseline tau must be positive, got {tau}")));
        }
        self.tau_baseline = Some(tau);
        Ok(self)
    }

    pub fn with_enforcement(mut self, enforce: bool) -> Self {
        self.enforce_assumption = enforce;
        self
    }

    pub fn baseline_tau(&self) -> f64 {
        self.tau_baseline.unwrap_or(self.tau)
    }

    /// `α = 1/(τγ)`.
    pub fn alpha(&self) -> f64 {
        1.0 / (self.tau * self.gamma)
    }

    /// Whether `τ ≤ 1/(d_max + γ)` holds on `g`.
    pub fn assumption_holds(&self, g: &Graph) -> bool {
        self.tau <= default_tau(g, self.gamma) * (1.0 + STEP_SLACK)
    }

    /// Errors with [`Error::StepSize`] when enforcement is on and the
    /// regularized step size exceeds `1/(d_max + γ)`.
    pub fn check(&self, g: &Graph) -> Result<()> {
        if self.enforce_assumption && !self.assumption_holds(g) {
            return Err(Error::StepSize {
                tau: self.tau,
                limit: default_tau(g, self.gamma),
            });
        }
        Ok(())
    }

    /// Same as [`check`](Self::check) for the baseline, whose bound is `1/d_max`.
    pub fn check_baseline(&self, g: &Graph) -> Result<()> {
        let limit = 1.0 / g.max_degree() as f64;
        let tau = self.baseline_tau();
        if self.enforce_assumption && tau > limit * (1.0 + STEP_SLACK) {
            return Err(Error::StepSize { tau, limit });
        }
        Ok(())
    }
}

/// Largest step size allowed on `g`: `1/(d_max + γ)`.
pub fn default_tau(g: &Graph, gamma: f64) -> f64 {
    1.0 / (g.max_degree() as f64 + gamma)
}

/// Dense iteration matrix `Q = (1 - τγ) I - τ L`.
pub fn build_q(g: &Graph, cfg: &SolverConfig) -> Result<DMatrix<f64>> {
    cfg.check(g)?;
    let n = g.node_count();
    let mut q = g.laplacian() * (-cfg.tau);
    for i in 0..n {
        q[(i, i)] += 1.0 - cfg.tau * cfg.gamma;
    }
    Ok(q)
}

/// `Φ(x) = ‖Ax - b‖²/σ² + ‖x - x0‖²/ν²`.
pub fn objective_phi(x: &[f64], b: &[f64], x0: &[f64], g: &Graph, sigma: f64, nu: f64) -> f64 {
    let residual: f64 = g
        .apply_incidence(x)
        .iter()
        .zip(b)
        .map(|(ax, b)| (ax - b).powi(2))
        .sum();
    let prior: f64 = x.iter().zip(x0).map(|(x, m)| (x - m).powi(2)).sum();
    residual / (sigma * sigma) + prior / (nu * nu)
}

/// `∇Φ(x) = (2/σ²) (L x - Aᵀb + γ (x - x0))` with `γ = σ²/ν²`.
pub fn gradient_phi(x: &[f64], b: &[f64], x0: &[f64], g: &Graph, sigma: f64, gamma: f64) -> Vec<f64> {
    check_dims(g, x, b, x0);
    let lx = g.apply_laplacian(x);
    let atb = g.apply_incidence_transpose(b);
    let scale = 2.0 / (sigma * sigma);
    (0..x.len())
        .map(|i| scale * (lx[i] - atb[i] + gamma * (x[i] - x0[i])))
        .collect()
}

/// One regularized step, `Q x + τ Aᵀb + τγ x0`.
pub fn step_regularized(x: &[f64], b: &[f64], x0: &[f64], g: &Graph, cfg: &SolverConfig) -> Vec<f64> {
    check_dims(g, x, b, x0);
    let it = LocalIteration::regularized(g, b, x0, cfg.tau, cfg.gamma);
    let mut out = vec![0.0; x.len()];
    it.step(x, &mut out);
    out
}

/// One baseline step, `(I - τL) x + τ Aᵀb`.
pub fn step_baseline(x: &[f64], b: &[f64], g: &Graph, tau: f64) -> Vec<f64> {
    check_dims(g, x, b, x);
    let it = LocalIteration::baseline(g, b, tau);
    let mut out = vec![0.0; x.len()];
    it.step(x, &mut out);
    out
}

fn check_dims(g: &Graph, x: &[f64], b: &[f64], x0: &[f64]) {
    assert_eq!(x.len(), g.node_count(), "state length must equal node count");
    assert_eq!(x0.len(), g.node_count(), "prior mean length must equal node count");
    assert_eq!(b.len(), g.edge_count(), "measurement length must equal edge count");
}

/// `out_i = keep·x_i - τ Σ_{j~i} (x_i - x_j) + offset_i`, with the constant
/// offset computed once per run.
struct LocalIteration<'g> {
    graph: &'g Graph,
    keep: f64,
    tau: f64,
    offset: Vec<f64>,
}

impl<'g> LocalIteration<'g> {
    fn regularized(graph: &'g Graph, b: &[f64], x0: &[f64], tau: f64, gamma: f64) -> Self {
        let tg = tau * gamma;
        let offset = (0..graph.node_count())
            .map(|i| {
                let atb: f64 = graph.neighbors(i).map(|(_, e, s)| s * b[e]).sum();
                tau * atb + tg * x0[i]
            })
            .collect();
        Self {
            graph,
            keep: 1.0 - tg,
            tau,
            offset,
        }
    }

    fn baseline(graph: &'g Graph, b: &[f64], tau: f64) -> Self {
        let offset = (0..graph.node_count())
            .map(|i| tau * graph.neighbors(i).map(|(_, e, s)| s * b[e]).sum::<f64>())
            .collect();
        Self {
            graph,
            keep: 1.0,
            tau,
            offset,
        }
    }

    fn step(&self, x: &[f64], out: &mut [f64]) {
        for (i, slot) in out.iter_mut().enumerate() {
            let xi = x[i];
            let diffusion: f64 = self.graph.neighbors(i).map(|(j, _, _)| xi - x[j]).sum();
            *slot = self.keep * xi - self.tau * diffusion + self.offset[i];
        }
    }
}

/// States `x[0..=T]` of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub algorithm: Algorithm,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().unwrap()
    }
}

/// Runs `horizon` steps from `x[0] = x0`, keeping every state.
pub fn run(
    spec: &ProblemSpec,
    realization: &Realization,
    cfg: &SolverConfig,
    horizon: usize,
    algorithm: Algorithm,
) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(horizon + 1);
    run_with(spec, realization, cfg, horizon, algorithm, |_, x| states.push(x.to_vec()))?;
    Ok(Trajectory { states, algorithm })
}

/// Runs `horizon` steps from `x0`, handing each state `(t, x[t])` to `visit`
/// for `t = 0..=horizon` without storing the trajectory.
pub fn run_with<F>(
    spec: &ProblemSpec,
    realization: &Realization,
    cfg: &SolverConfig,
    horizon: usize,
    algorithm: Algorithm,
    mut visit: F,
) -> Result<()>
where
    F: FnMut(usize, &[f64]),
{
    let g = spec.graph();
    if realization.b.len() != g.edge_count() {
        return Err(Error::Dimension(format!(
            "{} measurements for {} edges",
            realization.b.len(),
            g.edge_count()
        )));
    }
    let it = match algorithm {
        Algorithm::Regularized => {
            cfg.check(g)?;
            LocalIteration::regularized(g, &realization.b, spec.x0(), cfg.tau, cfg.gamma)
        }
        Algorithm::Baseline => {
            cfg.check_baseline(g)?;
            LocalIteration::baseline(g, &realization.b, cfg.baseline_tau())
        }
    };
    let mut x = spec.x0().to_vec();
    let mut next = vec![0.0; x.len()];
    visit(0, &x);
    for t in 1..=horizon {
        it.step(&x, &mut next);
        std::mem::swap(&mut x, &mut next);
        visit(t, &x);
    }
    Ok(())
}

/// `x* = (L + γI)⁻¹ (Aᵀb + γ x0)` by Cholesky with one refinement pass.
pub fn optimal_solution(realization: &Realization, spec: &ProblemSpec, gamma: f64) -> Result<Vec<f64>> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    let g = spec.graph();
    let n = g.node_count();
    let atb = g.apply_incidence_transpose(&realization.b);
    let rhs = DVector::from_iterator(n, (0..n).map(|i| atb[i] + gamma * spec.x0()[i]));
    let mut m = g.laplacian();
    for i in 0..n {
        m[(i, i)] += gamma;
    }
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NumericalFailure("L + γI is not positive definite".into()))?;
    let mut x = chol.solve(&rhs);
    let r = &rhs - &m * &x;
    x += chol.solve(&r);
    let residual = (&rhs - &m * &x).norm();
    if residual > 1e-10 * rhs.norm() {
        return Err(Error::NumericalFailure(format!(
            "normal-equation residual {residual:e} exceeds tolerance"
        )));
    }
    Ok(x.iter().copied().collect())
}
