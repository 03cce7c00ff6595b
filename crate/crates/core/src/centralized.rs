//! Centralized reference solution by a log-barrier interior-point method.
//!
//! Minimizes `t * sum_i -w_i log x_i - sum_l log(c_l - R_l x) - sum_i log(x_max_i - x_i)`
//! by damped Newton steps for increasing `t`, stopping once the duality gap
//! bound `m / t` is below the requested tolerance. The result is checked
//! against the KKT conditions of the original problem.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::NumProblem;

#[derive(Clone, Debug, PartialEq)]
pub struct CentralizedSolution {
    /// Optimal rates; zero for excluded chargers.
    pub x: Vec<f64>,
    /// Link prices recovered from the barrier.
    pub lambda: Vec<f64>,
    /// Objective over the chargers that were not excluded.
    pub objective: f64,
    /// Chargers routed through a zero-capacity link. Their log utility is
    /// unbounded below, so they are reported and left out.
    pub excluded: Vec<usize>,
    /// Worst of stationarity, complementary slackness and primal
    /// infeasibility at the returned point.
    pub kkt_residual: f64,
    pub newton_steps: usize,
}

/// Solves the instance to an objective gap below `tol`.
pub fn centralized_solve(p: &NumProblem, tol: f64) -> Result<CentralizedSolution> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    let n_all = p.num_chargers();
    let zero_links: Vec<usize> =
        (0..p.num_links()).filter(|&l| p.capacity()[l] <= 0.0 && !p.routing().users(l).is_empty()).collect();
    let excluded: Vec<usize> =
        (0..n_all).filter(|&i| p.routing().route(i).iter().any(|l| zero_links.contains(l))).collect();
    if !excluded.is_empty() {
        log::warn!("{} charger(s) route through zero-capacity links and are excluded", excluded.len());
    }
    let kept: Vec<usize> = (0..n_all).filter(|i| !excluded.contains(i)).collect();
    let sub = p.select_chargers(&kept);
    let mut x_full = vec![0.0; n_all];
    if kept.is_empty() {
        return Ok(CentralizedSolution {
            x: x_full,
            lambda: vec![0.0; p.num_links()],
            objective: 0.0,
            excluded,
            kkt_residual: 0.0,
            newton_steps: 0,
        });
    }

    let mut barrier = Barrier::new(&sub);
    let (x, lambda, steps) = barrier.solve(tol)?;
    for (k, &i) in kept.iter().enumerate() {
        x_full[i] = x[k];
    }
    let kkt_residual = kkt_residual(&sub, &x, &lambda);
    Ok(CentralizedSolution {
        objective: sub.objective(&x),
        x: x_full,
        lambda,
        excluded,
        kkt_residual,
        newton_steps: steps,
    })
}

/// KKT residual of `(x, lambda)` for the original problem, relative to
/// the marginal utilities and capacities. The cap multipliers are chosen
/// optimally for the given `x` and `lambda`.
pub fn kkt_residual(p: &NumProblem, x: &[f64], lambda: &[f64]) -> f64 {
    let price = p.routing().tmul(lambda);
    let load = p.routing().mul(x);
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let marginal = p.weights()[i] / x[i];
        let cap = p.max_rate()[i];
        // nu_i = max(marginal - price, 0) may only be positive at the cap
        let g = price[i] - marginal;
        let nu = (-g).max(0.0);
        worst = worst.max(g.max(0.0) / marginal);
        worst = worst.max(nu / marginal * (cap - x[i]).max(0.0) / cap);
        worst = worst.max((x[i] - cap).max(0.0) / cap);
    }
    for (l, (&load, &c)) in load.iter().zip(p.capacity()).enumerate() {
        let scale = c.max(1e-12);
        worst = worst.max((load - c).max(0.0) / scale);
        worst = worst.max(lambda[l] * (c - load).max(0.0));
    }
    worst
}

struct Barrier<'a> {
    p: &'a NumProblem,
    /// Links with at least one user.
    rows: Vec<usize>,
    x: Vec<f64>,
    steps: usize,
}

impl<'a> Barrier<'a> {
    const MU: f64 = 10.0;
    const NEWTON_TOL: f64 = 1e-10;
    const MAX_NEWTON: usize = 200;

    fn new(p: &'a NumProblem) -> Self {
        let routing = p.routing();
        let rows: Vec<usize> = (0..p.num_links()).filter(|&l| !routing.users(l).is_empty()).collect();
        // half of the equal-share point is strictly feasible
        let x = (0..p.num_chargers())
            .map(|i| {
                let share = routing
                    .route(i)
                    .iter()
                    .map(|&l| p.capacity()[l] / routing.users(l).len() as f64)
                    .fold(p.max_rate()[i], f64::min);
                0.5 * share
            })
            .collect();
        Barrier { p, rows, x, steps: 0 }
    }

    fn constraint_count(&self) -> f64 {
        (self.rows.len() + self.p.num_chargers()) as f64
    }

    fn slacks(&self, x: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let load = self.p.routing().mul(x);
        let s: Vec<f64> = self.rows.iter().map(|&l| self.p.capacity()[l] - load[l]).collect();
        let u: Vec<f64> = x.iter().zip(self.p.max_rate()).map(|(xi, cap)| cap - xi).collect();
        let ok = x.iter().all(|&v| v > 0.0) && s.iter().all(|&v| v > 0.0) && u.iter().all(|&v| v > 0.0);
        ok.then_some((s, u))
    }

    fn value(&self, t: f64, x: &[f64]) -> f64 {
        match self.slacks(x) {
            None => f64::INFINITY,
            Some((s, u)) => {
                t * self.p.objective(x) - s.iter().map(|v| v.ln()).sum::<f64>() - u.iter().map(|v| v.ln()).sum::<f64>()
            }
        }
    }

    fn solve(&mut self, tol: f64) -> Result<(Vec<f64>, Vec<f64>, usize)> {
        let m = self.constraint_count();
        let mut t = 1.0;
        loop {
            self.center(t)?;
            if m / t < tol {
                break;
            }
            t *= Self::MU;
        }
        let (s, _) = self.slacks(&self.x).expect("iterates stay strictly feasible");
        let mut lambda = vec![0.0; self.p.num_links()];
        for (k, &l) in self.rows.iter().enumerate() {
            lambda[l] = 1.0 / (t * s[k]);
        }
        Ok((self.x.clone(), lambda, self.steps))
    }

    fn center(&mut self, t: f64) -> Result<()> {
        let n = self.x.len();
        let routing = self.p.routing();
        for _ in 0..Self::MAX_NEWTON {
            let (s, u) = self.slacks(&self.x).expect("iterates stay strictly feasible");
            let mut grad = DVector::zeros(n);
            let mut hess = DMatrix::zeros(n, n);
            for i in 0..n {
                let w = self.p.weights()[i];
                let xi = self.x[i];
                grad[i] = -t * w / xi + 1.0 / u[i];
                hess[(i, i)] = t * w / (xi * xi) + 1.0 / (u[i] * u[i]);
            }
            for (k, &l) in self.rows.iter().enumerate() {
                let inv = 1.0 / s[k];
                let inv2 = inv * inv;
                let users = routing.users(l);
                for &i in users {
                    grad[i] += inv;
                    for &j in users {
                        hess[(i, j)] += inv2;
                    }
                }
            }
            let chol = hess
                .cholesky()
                .ok_or_else(|| Error::InvalidProblem("barrier Hessian is not positive definite".into()))?;
            let dx = -chol.solve(&grad);
            let decrement = -grad.dot(&dx);
            if decrement / 2.0 <= Self::NEWTON_TOL {
                return Ok(());
            }
            // full steps inside the quadratic convergence region
            if decrement < 0.0625 {
                let cand: Vec<f64> = self.x.iter().zip(dx.iter()).map(|(x, d)| x + d).collect();
                if self.slacks(&cand).is_some() {
                    self.x = cand;
                    self.steps += 1;
                    continue;
                }
            }
            // backtracking line search
            let f0 = self.value(t, &self.x);
            let mut step = 1.0;
            let mut accepted = false;
            while step > 1e-14 {
                let cand: Vec<f64> = self.x.iter().zip(dx.iter()).map(|(x, d)| x + step * d).collect();
                if self.value(t, &cand) <= f0 - 0.25 * step * decrement {
                    self.x = cand;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            self.steps += 1;
            if !accepted {
                // no further progress at this precision
                return Ok(());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::routing::RoutingMatrix;

    fn problem(dense: &[Vec<u8>], c: Vec<f64>, w: Vec<f64>, cap: Vec<f64>) -> NumProblem {
        NumProblem::new(RoutingMatrix::from_dense(dense).unwrap(), c, w, cap).unwrap()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn equal_split() {
        let p = problem(&[vec![1, 1]], vec![100.0], vec![1.0, 1.0], vec![1e3, 1e3]);
        let sol = centralized_solve(&p, 1e-9).unwrap();
        assert_close(&sol.x, &[50.0, 50.0], 1e-6);
        assert!(sol.kkt_residual < 1e-6);
    }

    #[test]
    fn proportional_split() {
        // x_i = w_i c / sum w
        let p = problem(&[vec![1, 1]], vec![90.0], vec![2.0, 1.0], vec![1e3, 1e3]);
        let sol = centralized_solve(&p, 1e-9).unwrap();
        assert_close(&sol.x, &[60.0, 30.0], 1e-6);
    }

    #[test]
    fn nested_chain() {
        let p = problem(&[vec![1, 1], vec![0, 1]], vec![30.0, 10.0], vec![1.0, 1.0], vec![100.0, 100.0]);
        let sol = centralized_solve(&p, 1e-9).unwrap();
        // chain optimum: x_2 fills its leaf link, x_1 takes the rest
        assert_close(&sol.x, &[20.0, 10.0], 1e-6);
        // both links bind with price 1/20 on the shared one
        assert!((sol.lambda[0] - 0.05).abs() < 1e-6, "{:?}", sol.lambda);
        assert!((sol.lambda[1] - 0.05).abs() < 1e-6, "{:?}", sol.lambda);
    }

    #[test]
    fn caps_bind() {
        let p = problem(&[vec![1, 1]], vec![100.0], vec![1.0, 1.0], vec![10.0, 200.0]);
        let sol = centralized_solve(&p, 1e-9).unwrap();
        assert_close(&sol.x, &[10.0, 90.0], 1e-6);
    }

    #[test]
    fn zero_capacity_excludes_chargers() {
        let p =
            problem(&[vec![1, 1, 0], vec![0, 1, 0], vec![0, 0, 1]], vec![10.0, 0.0, 5.0], vec![1.0; 3], vec![100.0; 3]);
        let sol = centralized_solve(&p, 1e-9).unwrap();
        assert_eq!(sol.excluded, vec![1]);
        assert_eq!(sol.x[1], 0.0);
        assert_close(&[sol.x[0], sol.x[2]], &[10.0, 5.0], 1e-6);
    }
}
