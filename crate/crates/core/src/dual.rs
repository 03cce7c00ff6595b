//! Price-based (dual decomposition) congestion control.
//!
//! Each charger picks `x_i = min(w_i / R_i^T lambda, x_max_i)` against the
//! current link prices; each link then moves its price along its constraint
//! violation, `lambda_l = max(lambda_l + kappa (R_l x - c_l), 0)`. Iterates
//! carry no feasibility guarantee before convergence.

use std::time::Instant;

use crate::error::Result;
use crate::problem::{IterationRecord, IterationTrace, NumProblem, SolverConfig, StabilityMonitor, Termination};

/// Charger response to link prices. A charger whose route is free
/// (`R_i^T lambda = 0`) runs at its cap.
pub fn dual_x_update(lambda: &[f64], p: &NumProblem) -> Vec<f64> {
    let price = p.routing().tmul(lambda);
    price
        .iter()
        .zip(p.weights())
        .zip(p.max_rate())
        .map(|((&q, &w), &cap)| if q > 0.0 { (w / q).min(cap) } else { cap })
        .collect()
}

/// Projected gradient step on the link prices.
pub fn dual_lambda_update(lambda: &[f64], x: &[f64], p: &NumProblem, step: f64) -> Vec<f64> {
    let load = p.routing().mul(x);
    lambda.iter().zip(load).zip(p.capacity()).map(|((&lam, load), &c)| (lam + step * (load - c)).max(0.0)).collect()
}

/// Step-size bound `2 / (x_max * L * N)` with `L` the longest route and `N`
/// the largest number of chargers sharing a link.
pub fn dual_step_bound(p: &NumProblem) -> f64 {
    let x_max = p.max_rate().iter().copied().fold(0.0, f64::max);
    let longest = p.routing().max_route_len() as f64;
    let shared = p.routing().max_link_users() as f64;
    2.0 / (x_max * longest * shared)
}

/// Step-size bound `2 w_min / (x_max^2 * L * N)` from the Lipschitz constant
/// of the dual gradient. The rate response `w / q` has slope `x^2 / w`, so
/// this bound is below [`dual_step_bound`] whenever `x_max > w_min`.
pub fn dual_lipschitz_bound(p: &NumProblem) -> f64 {
    let x_max = p.max_rate().iter().copied().fold(0.0, f64::max);
    let w_min = p.weights().iter().copied().fold(f64::INFINITY, f64::min);
    let longest = p.routing().max_route_len() as f64;
    let shared = p.routing().max_link_users() as f64;
    2.0 * w_min / (x_max * x_max * longest * shared)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualState {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub k: usize,
    /// `||lambda^{k} - lambda^{k-1}||_2` of the latest iteration.
    pub residual: f64,
}

impl DualState {
    /// Zero prices; the matching rates are the caps.
    pub fn new(p: &NumProblem) -> Self {
        DualState { x: p.max_rate().to_vec(), lambda: vec![0.0; p.num_links()], k: 0, residual: f64::INFINITY }
    }

    /// One synchronous round: chargers respond to the current prices, then
    /// links update prices against the fresh rates.
    pub fn step(&mut self, p: &NumProblem, step: f64) {
        let x = dual_x_update(&self.lambda, p);
        let lambda = dual_lambda_update(&self.lambda, &x, p, step);
        self.residual = l2_distance(&lambda, &self.lambda);
        self.x = x;
        self.lambda = lambda;
        self.k += 1;
    }
}

pub fn dual_solve(p: &NumProblem, cfg: &SolverConfig) -> Result<(DualState, IterationTrace)> {
    cfg.validate()?;
    let mut state = DualState::new(p);
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
        let finite = state.lambda.iter().chain(&state.x).all(|v| v.is_finite());
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

pub(crate) fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::routing::RoutingMatrix;

    fn single_link(c: f64, w: Vec<f64>, cap: Vec<f64>) -> NumProblem {
        let n = w.len();
        let r = RoutingMatrix::from_routes(1, vec![vec![0]; n]).unwrap();
        NumProblem::new(r, vec![c], w, cap).unwrap()
    }

    #[test]
    fn x_update_formula() {
        let p = single_link(10.0, vec![1.0], vec![1.0]);
        assert_eq!(dual_x_update(&[2.0], &p), vec![0.5]);
        assert_eq!(dual_x_update(&[0.0], &p), vec![1.0]);
        let p = single_link(10.0, vec![2.0, 1.0], vec![100.0, 100.0]);
        let x = dual_x_update(&[0.1], &p);
        assert!((x[0] - 20.0).abs() < 1e-12 && (x[1] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn lambda_update_formula() {
        // R_l x - c_l = -5 from a zero price stays at zero.
        let p = single_link(10.0, vec![1.0], vec![100.0]);
        assert_eq!(dual_lambda_update(&[0.0], &[5.0], &p, 0.1), vec![0.0]);
        // R_l x - c_l = 2, kappa = 0.5: 1 + 1 = 2.
        assert_eq!(dual_lambda_update(&[1.0], &[12.0], &p, 0.5), vec![2.0]);
        assert_eq!(dual_lambda_update(&[0.7], &[10.0], &p, 0.5), vec![0.7]);
    }

    #[test]
    fn step_bound_formula() {
        // x_max = 20, L = 3, N = 10
        let routes = (0..10).map(|i| if i == 0 { vec![0, 1, 2] } else { vec![0] }).collect();
        let r = RoutingMatrix::from_routes(3, routes).unwrap();
        let p = NumProblem::new(r, vec![1.0; 3], vec![1.0; 10], vec![20.0; 10]).unwrap();
        assert!((dual_step_bound(&p) - 2.0 / 600.0).abs() < 1e-15);
        let p = single_link(1.0, vec![1.0], vec![1.0]);
        assert_eq!(dual_step_bound(&p), 2.0);
        assert_eq!(dual_lipschitz_bound(&p), 2.0);
    }

    #[test]
    fn lipschitz_bound_formula() {
        // 2 * 0.5 / (20^2 * 1 * 2)
        let p = single_link(1.0, vec![0.5, 3.0], vec![20.0, 10.0]);
        assert!((dual_lipschitz_bound(&p) - 1.0 / 800.0).abs() < 1e-15);
    }

    #[test]
    fn linear_bound_can_oscillate_above_unit_rates() {
        // x_max = 100 >> w: the linear bound 2/100 exceeds 2 / c^2 = 2/900
        let p = single_link(30.0, vec![1.0], vec![100.0]);
        let cfg = SolverConfig::new(dual_step_bound(&p)).with_max_iters(20_000);
        assert!(!dual_solve(&p, &cfg).unwrap().1.converged());
        let cfg = SolverConfig::new(dual_lipschitz_bound(&p)).with_max_iters(20_000);
        let (state, trace) = dual_solve(&p, &cfg).unwrap();
        assert!(trace.converged());
        assert!((state.x[0] - 30.0).abs() < 1e-2, "{:?}", state.x);
    }

    #[test]
    fn equal_split_on_one_link() {
        let p = single_link(100.0, vec![1.0, 1.0], vec![100.0, 100.0]);
        let cfg = SolverConfig::new(0.5 * dual_step_bound(&p)).with_epsilon(1e-12);
        let (state, trace) = dual_solve(&p, &cfg).unwrap();
        assert!(trace.converged());
        for x in &state.x {
            assert!((x - 50.0).abs() < 1e-4, "{:?}", state.x);
        }
    }

    #[test]
    fn uncongested_converges_in_one_iteration() {
        let p = single_link(1000.0, vec![1.0, 3.0], vec![5.0, 7.0]);
        let (state, trace) = dual_solve(&p, &SolverConfig::new(0.01)).unwrap();
        assert!(trace.converged());
        assert_eq!(trace.iterations(), 1);
        assert_eq!(state.x, vec![5.0, 7.0]);
        assert_eq!(state.lambda, vec![0.0]);
    }

    #[test]
    fn iterates_stay_in_bounds() {
        let r = RoutingMatrix::from_dense(&[vec![1, 1, 1], vec![0, 1, 1], vec![0, 0, 1]]).unwrap();
        let p = NumProblem::new(r, vec![5.0, 2.0, 0.5], vec![1.0, 2.0, 1.0], vec![4.0, 4.0, 4.0]).unwrap();
        let (_, trace) = dual_solve(&p, &SolverConfig::new(0.05).with_max_iters(2000)).unwrap();
        let mut state = DualState::new(&p);
        for _ in 0..500 {
            state.step(&p, 0.05);
            assert!(state.lambda.iter().all(|&l| l >= 0.0));
            assert!(state.x.iter().zip(p.max_rate()).all(|(x, c)| *x >= 0.0 && x <= c));
        }
        // the first rounds overshoot the capacities
        assert!(trace.records[0].max_violation > 0.0);
    }

    #[test]
    fn empty_problem_is_trivial() {
        let r = RoutingMatrix::from_routes(2, vec![]).unwrap();
        let p = NumProblem::new(r, vec![1.0, 1.0], vec![], vec![]).unwrap();
        let (_, trace) = dual_solve(&p, &SolverConfig::new(0.1)).unwrap();
        assert!(trace.converged());
        assert_eq!(trace.iterations(), 0);
    }

    #[test]
    fn oversized_step_is_flagged() {
        let p = single_link(10.0, vec![1.0; 4], vec![100.0; 4]);
        let cfg = SolverConfig::new(50.0).with_max_iters(5000);
        let (_, trace) = dual_solve(&p, &cfg).unwrap();
        assert!(trace.unstable(), "{:?}", trace.termination);
    }
}
