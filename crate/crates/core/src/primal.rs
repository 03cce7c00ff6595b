//! Budget-based (primal decomposition) congestion control.
//!
//! The network hands each charger a budget `b_i`; chargers run at
//! `min(b_i, x_max_i)` and report their marginal benefit `mu_i = w_i / x_i`
//! (zero at the cap). Budgets move along `mu` and are then projected link by
//! link onto `R_l b <= c_l`, so every issued rate vector is feasible.

use std::time::Instant;

use crate::dual::l2_distance;
use crate::error::{Error, Result};
use crate::problem::{IterationRecord, IterationTrace, NumProblem, SolverConfig, StabilityMonitor, Termination};

/// Smallest budget handed out; keeps `mu = w / x` finite.
pub const X_FLOOR: f64 = 1e-6;

/// Rates and marginal benefits for budgets `b` (floored at [`X_FLOOR`]).
pub fn primal_x_mu_update(b: &[f64], p: &NumProblem) -> (Vec<f64>, Vec<f64>) {
    b.iter()
        .zip(p.max_rate())
        .zip(p.weights())
        .map(|((&bi, &cap), &w)| {
            let x = bi.max(X_FLOOR).min(cap);
            let mu = if x == cap { 0.0 } else { w / x };
            (x, mu)
        })
        .unzip()
}

/// Gradient step `b + gamma mu` (before projection).
pub fn primal_budget_step(b: &[f64], mu: &[f64], gamma: f64) -> Vec<f64> {
    b.iter().zip(mu).map(|(bi, m)| bi + gamma * m).collect()
}

/// One pass of halfplane projections in ascending link order.
///
/// A link whose budgets sum above its capacity subtracts the excess evenly
/// from its users. If that would push a budget below [`X_FLOOR`], the row is
/// projected onto `{R_l b <= c_l, b >= X_FLOOR}` instead: floored budgets stay
/// at the floor and the rest share the remaining reduction evenly. Budgets
/// only ever decrease, so links already visited stay satisfied.
pub fn sequential_project(b: &[f64], p: &NumProblem) -> Vec<f64> {
    let mut b: Vec<f64> = b.iter().map(|v| v.max(X_FLOOR)).collect();
    let routing = p.routing();
    let mut free: Vec<usize> = Vec::new();
    for (l, &c) in p.capacity().iter().enumerate() {
        let users = routing.users(l);
        if users.is_empty() {
            continue;
        }
        let load: f64 = users.iter().map(|&i| b[i]).sum();
        if load <= c {
            continue;
        }
        let shift = (load - c) / users.len() as f64;
        if users.iter().all(|&i| b[i] - shift >= X_FLOOR) {
            for &i in users {
                b[i] -= shift;
            }
            continue;
        }
        // Water-fill down to a common level above the floor.
        free.clear();
        free.extend_from_slice(users);
        let mut pinned = 0usize;
        loop {
            let target = c - pinned as f64 * X_FLOOR;
            let sum: f64 = free.iter().map(|&i| b[i]).sum();
            if free.is_empty() {
                break;
            }
            let shift = (sum - target) / free.len() as f64;
            let before = free.len();
            free.retain(|&i| {
                if b[i] - shift < X_FLOOR {
                    b[i] = X_FLOOR;
                    false
                } else {
                    true
                }
            });
            pinned += before - free.len();
            if free.len() == before {
                for &i in &free {
                    b[i] -= shift;
                }
                break;
            }
        }
    }
    b
}

/// Equal share of each charger's tightest link,
/// `b_i = min_{l on route i} c_l / |users(l)|`, floored at [`X_FLOOR`].
pub fn default_budgets(p: &NumProblem) -> Vec<f64> {
    let routing = p.routing();
    (0..p.num_chargers())
        .map(|i| {
            routing
                .route(i)
                .iter()
                .map(|&l| p.capacity()[l] / routing.users(l).len() as f64)
                .fold(f64::INFINITY, f64::min)
                .max(X_FLOOR)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrimalState {
    pub x: Vec<f64>,
    /// Budgets after the latest projection.
    pub b: Vec<f64>,
    pub mu: Vec<f64>,
    pub k: usize,
    /// `||b^{k} - b^{k-1}||_2` between consecutive projected budgets.
    pub residual: f64,
}

impl PrimalState {
    /// Starts from feasible budgets `b0` (checked against `p` within `tol`).
    pub fn new(p: &NumProblem, b0: Vec<f64>, tol: f64) -> Result<Self> {
        if b0.len() != p.num_chargers() {
            return Err(Error::InvalidProblem(format!(
                "{} initial budgets for {} chargers",
                b0.len(),
                p.num_chargers()
            )));
        }
        let load = p.routing().mul(&b0);
        for (l, (&load, &c)) in load.iter().zip(p.capacity()).enumerate() {
            if load > c + tol {
                return Err(Error::InfeasibleStart { link: l, load, capacity: c });
            }
        }
        let (x, mu) = primal_x_mu_update(&b0, p);
        Ok(PrimalState { x, b: b0, mu, k: 0, residual: f64::INFINITY })
    }

    pub fn with_default_budgets(p: &NumProblem) -> Self {
        let b = default_budgets(p);
        let (x, mu) = primal_x_mu_update(&b, p);
        PrimalState { x, b, mu, k: 0, residual: f64::INFINITY }
    }

    /// One round: chargers take rates from the current (feasible) budgets,
    /// budgets step along the marginal benefits and are projected back.
    pub fn step(&mut self, p: &NumProblem, gamma: f64) {
        let (x, mu) = primal_x_mu_update(&self.b, p);
        let stepped = primal_budget_step(&self.b, &mu, gamma);
        let b = sequential_project(&stepped, p);
        self.residual = l2_distance(&b, &self.b);
        self.x = x;
        self.mu = mu;
        self.b = b;
        self.k += 1;
    }
}

pub fn primal_solve(p: &NumProblem, cfg: &SolverConfig, b0: Option<&[f64]>) -> Result<(PrimalState, IterationTrace)> {
    cfg.validate()?;
    let mut state = match b0 {
        Some(b) => PrimalState::new(p, b.to_vec(), cfg.tol)?,
        None => PrimalState::with_default_budgets(p),
    };
    let mut trace =
        IterationTrace { initial_x: state.x.clone(), records: Vec::new(), termination: Termination::Converged };
    if p.num_chargers() == 0 {
        state.residual = 0.0;
        return Ok((state, trace));
    }

    let start = Instant::now();
    let mut monitor = StabilityMonitor::default();
    trace.termination = Termination::MaxIterations;
    while state.k < cfg.max_iters {
        state.step(p, cfg.step_size);
        let finite = state.b.iter().all(|v| v.is_finite());
        trace.records.push(IterationRecord {
            k: state.k,
            x: state.x.clone(),
            objective: p.objective(&state.x),
            max_violation: p.max_violation(&state.x),
            residual: state.residual,
            elapsed: start.elapsed(),
        });
        if monitor.observe(state.residual, finite) {
            trace.termination = Termination::Unstable;
            break;
        }
        if state.residual <= cfg.epsilon {
            trace.termination = Termination::Converged;
            break;
        }
    }
    if trace.termination == Termination::MaxIterations && monitor.stalled() {
        trace.termination = Termination::Unstable;
    }
    Ok((state, trace))
}
