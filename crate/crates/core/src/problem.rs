//! The EV charging NUM instance: maximize `sum_i w_i log x_i` subject to
//! `R x <= c` and `0 <= x <= x_max`.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::routing::RoutingMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct NumProblem {
    routing: RoutingMatrix,
    capacity: Vec<f64>,
    weights: Vec<f64>,
    max_rate: Vec<f64>,
}

impl NumProblem {
    pub fn new(routing: RoutingMatrix, capacity: Vec<f64>, weights: Vec<f64>, max_rate: Vec<f64>) -> Result<Self> {
        if capacity.len() != routing.rows() {
            return Err(Error::InvalidProblem(format!("{} capacities for {} links", capacity.len(), routing.rows())));
        }
        if weights.len() != routing.cols() || max_rate.len() != routing.cols() {
            return Err(Error::InvalidProblem(format!(
                "{} weights and {} rate caps for {} chargers",
                weights.len(),
                max_rate.len(),
                routing.cols()
            )));
        }
        if let Some((l, c)) = capacity.iter().enumerate().find(|(_, c)| !(**c >= 0.0) || !c.is_finite()) {
            return Err(Error::InvalidProblem(format!("capacity of link {l} is {c}")));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidProblem(format!("weight of charger {i} is {w}")));
        }
        if let Some((i, x)) = max_rate.iter().enumerate().find(|(_, x)| !(**x > 0.0) || !x.is_finite()) {
            return Err(Error::InvalidProblem(format!("rate cap of charger {i} is {x}")));
        }
        Ok(NumProblem { routing, capacity, weights, max_rate })
    }

    pub fn routing(&self) -> &RoutingMatrix {
        &self.routing
    }

    pub fn capacity(&self) -> &[f64] {
        &self.capacity
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn max_rate(&self) -> &[f64] {
        &self.max_rate
    }

    pub fn num_links(&self) -> usize {
        self.routing.rows()
    }

    pub fn num_chargers(&self) -> usize {
        self.routing.cols()
    }

    /// `sum_i -w_i log x_i`; `+inf` if any rate is not positive.
    pub fn objective(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.weights).map(|(&xi, &w)| if xi > 0.0 { -w * xi.ln() } else { f64::INFINITY }).sum()
    }

    /// `max_l (R_l x - c_l)`, or 0 for a problem without links.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.routing
            .mul(x)
            .iter()
            .zip(&self.capacity)
            .map(|(load, c)| load - c)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
            .unwrap_or(0.0)
    }

    /// Same instance with new link capacities.
    pub fn with_capacity(&self, capacity: Vec<f64>) -> Result<Self> {
        Self::new(self.routing.clone(), capacity, self.weights.clone(), self.max_rate.clone())
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.routing.clone(), self.capacity.clone(), weights, self.max_rate.clone())
    }

    /// Instance restricted to the listed chargers (renumbered in order).
    pub fn select_chargers(&self, chargers: &[usize]) -> NumProblem {
        NumProblem {
            routing: self.routing.select_columns(chargers),
            capacity: self.capacity.clone(),
            weights: chargers.iter().map(|&i| self.weights[i]).collect(),
            max_rate: chargers.iter().map(|&i| self.max_rate[i]).collect(),
        }
    }

    /// Self-contained tabular snapshot, header `kind,row,col,value`:
    /// a `dims` record, `R` as sparse triplets, then `c`, `w` and `xmax`.
    pub fn to_snapshot(&self) -> String {
        let mut out = String::from("kind,row,col,value\n");
        let _ = writeln!(out, "dims,{},{},", self.num_links(), self.num_chargers());
        for i in 0..self.num_chargers() {
            for &l in self.routing.route(i) {
                let _ = writeln!(out, "R,{l},{i},1");
            }
        }
        for (l, c) in self.capacity.iter().enumerate() {
            let _ = writeln!(out, "c,{l},,{c:?}");
        }
        for (i, w) in self.weights.iter().enumerate() {
            let _ = writeln!(out, "w,,{i},{w:?}");
        }
        for (i, x) in self.max_rate.iter().enumerate() {
            let _ = writeln!(out, "xmax,,{i},{x:?}");
        }
        out
    }

    pub fn from_snapshot(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "kind,row,col,value" => {}
            _ => return Err(Error::parse(path, 1, "expected header `kind,row,col,value`")),
        }
        let mut dims: Option<(usize, usize)> = None;
        let mut routes: Vec<Vec<usize>> = Vec::new();
        let (mut c, mut w, mut xmax) = (Vec::new(), Vec::new(), Vec::new());
        for (i, raw) in lines {
            let lineno = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = raw.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(Error::parse(path, lineno, "expected 4 fields"));
            }
            let idx =
                |s: &str| s.parse::<usize>().map_err(|_| Error::parse(path, lineno, format!("invalid index `{s}`")));
            let val =
                |s: &str| s.parse::<f64>().map_err(|_| Error::parse(path, lineno, format!("invalid value `{s}`")));
            let (m, n) = match (f[0], dims) {
                ("dims", None) => {
                    let (m, n) = (idx(f[1])?, idx(f[2])?);
                    dims = Some((m, n));
                    routes = vec![Vec::new(); n];
                    c = vec![f64::NAN; m];
                    w = vec![f64::NAN; n];
                    xmax = vec![f64::NAN; n];
                    continue;
                }
                ("dims", Some(_)) => return Err(Error::parse(path, lineno, "duplicate dims record")),
                (_, None) => return Err(Error::parse(path, lineno, "dims record must come first")),
                (_, Some(d)) => d,
            };
            let in_range = |k: usize, len: usize| {
                if k < len {
                    Ok(k)
                } else {
                    Err(Error::parse(path, lineno, format!("index {k} out of range")))
                }
            };
            match f[0] {
                "R" => {
                    let (l, i) = (in_range(idx(f[1])?, m)?, in_range(idx(f[2])?, n)?);
                    if val(f[3])? != 0.0 {
                        routes[i].push(l);
                    }
                }
                "c" => c[in_range(idx(f[1])?, m)?] = val(f[3])?,
                "w" => w[in_range(idx(f[2])?, n)?] = val(f[3])?,
                "xmax" => xmax[in_range(idx(f[2])?, n)?] = val(f[3])?,
                other => return Err(Error::parse(path, lineno, format!("unknown record kind `{other}`"))),
            }
        }
        let (m, _) = dims.ok_or_else(|| Error::parse(path, 1, "missing dims record"))?;
        let routing = RoutingMatrix::from_routes(m, routes)?;
        Self::new(routing, c, w, xmax)
    }
}

/// Iteration parameters shared by the dual and primal solvers.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// `kappa` for the dual algorithm, `gamma` for the primal one.
    pub step_size: f64,
    /// Convergence threshold on the multiplier (dual) or budget (primal) change.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Feasibility tolerance.
    pub tol: f64,
}

impl SolverConfig {
    pub const DEFAULT_EPSILON: f64 = 1e-6;
    pub const DEFAULT_MAX_ITERS: usize = 100_000;
    pub const DEFAULT_TOL: f64 = 1e-9;

    pub fn new(step_size: f64) -> Self {
        SolverConfig {
            step_size,
            epsilon: Self::DEFAULT_EPSILON,
            max_iters: Self::DEFAULT_MAX_ITERS,
            tol: Self::DEFAULT_TOL,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::Config(format!("step size must be positive, got {}", self.step_size)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("threshold must be positive, got {}", self.epsilon)));
        }
        if self.max_iters < 1 {
            return Err(Error::Config("max iterations must be at least 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::Config(format!("tolerance must be non-negative, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
    /// Oscillating or diverging; see [`StabilityMonitor`].
    Unstable,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIterations => "max_iterations",
            Termination::Unstable => "unstable",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    /// 1-based iteration index; `x` is the rate vector produced by it.
    pub k: usize,
    pub x: Vec<f64>,
    pub objective: f64,
    pub max_violation: f64,
    pub residual: f64,
    /// Wall-clock time since the solve started. Not exported.
    pub elapsed: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationTrace {
    /// Rates before the first iteration.
    pub initial_x: Vec<f64>,
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn unstable(&self) -> bool {
        self.termination == Termination::Unstable
    }

    /// Largest constraint violation over all recorded iterates.
    pub fn worst_violation(&self) -> f64 {
        self.records.iter().map(|r| r.max_violation).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Comma-separated export: `k,objective,max_violation,residual,x_0..x_{N-1}`.
    pub fn to_csv(&self) -> String {
        self.to_csv_every(1)
    }

    /// Like [`IterationTrace::to_csv`], keeping every `stride`-th iteration
    /// and the last one.
    pub fn to_csv_every(&self, stride: usize) -> String {
        let stride = stride.max(1);
        let n = self.initial_x.len();
        let mut out = String::from("k,objective,max_violation,residual");
        for i in 0..n {
            let _ = write!(out, ",x_{i}");
        }
        out.push('\n');
        let last = self.records.len();
        for r in self.records.iter().filter(|r| r.k % stride == 0 || r.k == last) {
            let _ = write!(out, "{},{:?},{:?},{:?}", r.k, r.objective, r.max_violation, r.residual);
            for x in &r.x {
                let _ = write!(out, ",{x:?}");
            }
            out.push('\n');
        }
        out
    }
}

/// Flags oscillating or diverging iterations from the residual sequence.
///
/// A run is unstable when a value is non-finite, when the residual stays
/// above ten times its first value for 100 consecutive iterations, or when
/// a run that exhausts its iteration budget has stalled: the smallest
/// residual of the final tenth of the run (at least 100 iterations) is no
/// better than 0.9 times the smallest residual of the tenth before it.
#[derive(Clone, Debug, Default)]
pub struct StabilityMonitor {
    initial: Option<f64>,
    above: usize,
    residuals: Vec<f64>,
}

impl StabilityMonitor {
    pub const GROWTH: f64 = 10.0;
    pub const PATIENCE: usize = 100;

    /// Records one residual; returns true once divergence is detected.
    pub fn observe(&mut self, residual: f64, values_finite: bool) -> bool {
        self.residuals.push(residual);
        if !residual.is_finite() || !values_finite {
            return true;
        }
        let initial = *self.initial.get_or_insert(residual);
        if residual > Self::GROWTH * initial {
            self.above += 1;
        } else {
            self.above = 0;
        }
        self.above >= Self::PATIENCE
    }

    /// Whether a run that hit its iteration limit is stalled.
    pub fn stalled(&self) -> bool {
        let n = self.residuals.len();
        let window = (n / 10).max(Self::PATIENCE);
        if n < 2 * window {
            return false;
        }
        let min = |s: &[f64]| s.iter().copied().fold(f64::INFINITY, f64::min);
        let last = min(&self.residuals[n - window..]);
        let prev = min(&self.residuals[n - 2 * window..n - window]);
        last > 0.9 * prev
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> NumProblem {
        let r = RoutingMatrix::from_dense(&[vec![1, 1], vec![0, 1]]).unwrap();
        NumProblem::new(r, vec![30.0, 10.0], vec![1.0, 2.0], vec![100.0, 100.0]).unwrap()
    }

    #[test]
    fn validation() {
        let r = RoutingMatrix::from_dense(&[vec![1]]).unwrap();
        assert!(NumProblem::new(r.clone(), vec![-1.0], vec![1.0], vec![1.0]).is_err());
        assert!(NumProblem::new(r.clone(), vec![1.0], vec![0.0], vec![1.0]).is_err());
        assert!(NumProblem::new(r.clone(), vec![1.0], vec![1.0], vec![0.0]).is_err());
        assert!(NumProblem::new(r.clone(), vec![1.0, 2.0], vec![1.0], vec![1.0]).is_err());
        assert!(NumProblem::new(r, vec![0.0], vec![1.0], vec![1.0]).is_ok());
    }

    #[test]
    fn objective_and_violation() {
        let p = chain();
        let x = [10.0, 20.0];
        let f = -(10f64.ln()) - 2.0 * 20f64.ln();
        assert!((p.objective(&x) - f).abs() < 1e-12);
        assert_eq!(p.max_violation(&x), 10.0);
        assert_eq!(p.objective(&[0.0, 1.0]), f64::INFINITY);
    }

    #[test]
    fn snapshot_round_trip() {
        let p = chain().with_capacity(vec![0.1 + 0.2, 1.0 / 3.0]).unwrap();
        let back = NumProblem::from_snapshot(&p.to_snapshot(), Path::new("snap")).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn snapshot_errors() {
        let bad = "kind,row,col,value\nc,0,,1\n";
        assert!(NumProblem::from_snapshot(bad, Path::new("s")).is_err());
        let missing = "kind,row,col,value\ndims,1,1,\n";
        assert!(NumProblem::from_snapshot(missing, Path::new("s")).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::new(0.1).validate().is_ok());
        assert!(SolverConfig::new(0.0).validate().is_err());
        assert!(SolverConfig::new(0.1).with_epsilon(0.0).validate().is_err());
        assert!(SolverConfig::new(0.1).with_max_iters(0).validate().is_err());
    }

    #[test]
    fn monitor_growth_rule() {
        let mut m = StabilityMonitor::default();
        assert!(!m.observe(1.0, true));
        for k in 0..StabilityMonitor::PATIENCE {
            let flagged = m.observe(11.0, true);
            assert_eq!(flagged, k + 1 == StabilityMonitor::PATIENCE);
        }
        let mut m = StabilityMonitor::default();
        assert!(m.observe(f64::NAN, true));
    }

    #[test]
    fn monitor_stall_rule() {
        let mut osc = StabilityMonitor::default();
        let mut decay = StabilityMonitor::default();
        for k in 0..2000 {
            osc.observe(if k % 2 == 0 { 1.0 } else { 0.5 }, true);
            decay.observe(0.999f64.powi(k), true);
        }
        assert!(osc.stalled());
        assert!(!decay.stalled());
    }
}
