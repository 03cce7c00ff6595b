//! Static convergence sweeps and the paired dynamic experiment.

use std::fmt::Write as _;
use std::thread;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::centralized::centralized_solve;
use crate::dual::{dual_lipschitz_bound, dual_solve, dual_step_bound};
use crate::error::{Error, Result};
use crate::feeder::{CapacityModel, Feeder, LoadShapes, PhaseMode, CHARGER_POWER_KW, NOMINAL_PHASE_VOLTAGE};
use crate::primal::primal_solve;
use crate::problem::{IterationTrace, NumProblem, SolverConfig};
use crate::routing::RoutingMatrix;
use crate::scenario::{run_scenario, Algorithm, ScenarioConfig, ScenarioReport};

/// Minute of the day (09:26) whose base load defines the static instance.
pub const STATIC_MINUTE: usize = 565;

/// Tolerance of the reference solutions.
pub const ORACLE_TOL: f64 = 1e-7;

/// Single-phase static instance: one link per line, chargers capped at the
/// single-phase current of a 20 kW charger.
pub fn static_problem(feeder: &Feeder, shapes: &LoadShapes, minute: usize) -> Result<NumProblem> {
    let mode = PhaseMode::Single;
    let model = CapacityModel::new(feeder, mode, NOMINAL_PHASE_VOLTAGE)?;
    let cap = model.capacity(&shapes.kw_at(feeder, minute)?);
    let n = feeder.chargers().len();
    NumProblem::new(
        RoutingMatrix::from_feeder(feeder, mode),
        cap.capacity,
        feeder.chargers().iter().map(|c| c.weight).collect(),
        vec![mode.charger_current(CHARGER_POWER_KW, NOMINAL_PHASE_VOLTAGE); n],
    )
}

/// `|f - f*| / max(1, |f*|)`.
pub fn relative_gap(f: f64, f_star: f64) -> f64 {
    (f - f_star).abs() / f_star.abs().max(1.0)
}

/// Distances to the optimum below this fraction of `1 + ||x*||` are within
/// the accuracy of the reference solution.
pub const DISTANCE_FLOOR: f64 = 1e-6;

/// First iteration `k` with `||x^k - x*|| <= 0.05 ||x^0 - x*||`; zero when
/// `x^0` already matches `x*` to the accuracy of the reference.
pub fn iterations_to_95(trace: &IterationTrace, x_star: &[f64]) -> Option<usize> {
    let floor = DISTANCE_FLOOR * (1.0 + x_star.iter().map(|v| v * v).sum::<f64>().sqrt());
    let start = dist(&trace.initial_x, x_star);
    if start <= floor {
        return Some(0);
    }
    trace.records.iter().find(|r| dist(&r.x, x_star) <= (0.05 * start).max(floor)).map(|r| r.k)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    StepSize,
    /// Number of chargers, subsampled from the feeder's sites.
    Chargers,
    /// Number of lines, truncated in source-to-leaf order.
    Lines,
}

impl SweepParam {
    /// Step sizes in scientific notation, sizes as integers.
    pub fn format_value(self, v: f64) -> String {
        match self {
            SweepParam::StepSize => format!("{v:e}"),
            _ => format!("{v}"),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::StepSize => "step-size",
            SweepParam::Chargers => "N",
            SweepParam::Lines => "M",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "step-size" | "step_size" | "step" => Ok(SweepParam::StepSize),
            "N" | "n" | "chargers" => Ok(SweepParam::Chargers),
            "M" | "m" | "lines" => Ok(SweepParam::Lines),
            other => Err(Error::Config(format!("unknown sweep parameter `{other}`"))),
        }
    }
}

/// Per-instance dual step size used by size sweeps without a fixed step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DualBound {
    /// `2 / (x_max L N)`, see [`dual_step_bound`].
    Linear,
    /// `2 w_min / (x_max^2 L N)`, see [`dual_lipschitz_bound`].
    Lipschitz,
}

impl DualBound {
    pub fn as_str(self) -> &'static str {
        match self {
            DualBound::Linear => "linear",
            DualBound::Lipschitz => "lipschitz",
        }
    }

    pub fn step(self, p: &NumProblem) -> f64 {
        match self {
            DualBound::Linear => dual_step_bound(p),
            DualBound::Lipschitz => dual_lipschitz_bound(p),
        }
    }
}

impl std::str::FromStr for DualBound {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(DualBound::Linear),
            "lipschitz" => Ok(DualBound::Lipschitz),
            other => Err(Error::Config(format!("unknown dual bound `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub algorithm: Algorithm,
    /// Step size for size sweeps. `None` uses the per-instance `dual_bound`
    /// for the dual algorithm and 1 for the primal one.
    pub step_size: Option<f64>,
    pub dual_bound: DualBound,
    pub epsilon: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub minute: usize,
    pub jobs: usize,
}

impl SweepSpec {
    pub fn new(param: SweepParam, values: Vec<f64>, algorithm: Algorithm) -> Self {
        SweepSpec {
            param,
            values,
            algorithm,
            step_size: None,
            dual_bound: DualBound::Lipschitz,
            epsilon: SolverConfig::DEFAULT_EPSILON,
            max_iters: SolverConfig::DEFAULT_MAX_ITERS,
            seed: 7,
            minute: STATIC_MINUTE,
            jobs: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep needs at least one value".into()));
        }
        if self.algorithm == Algorithm::Uncontrolled {
            return Err(Error::Config("sweeps run the dual or primal algorithm".into()));
        }
        for &v in &self.values {
            let ok = match self.param {
                SweepParam::StepSize => v > 0.0 && v.is_finite(),
                SweepParam::Chargers => v >= 0.0 && v.fract() == 0.0,
                SweepParam::Lines => v >= 1.0 && v.fract() == 0.0,
            };
            if !ok {
                return Err(Error::Config(format!("invalid {} value {v}", self.param.as_str())));
            }
        }
        if self.param == SweepParam::StepSize && self.step_size.is_some() {
            return Err(Error::Config("a step-size sweep takes no fixed step size".into()));
        }
        Ok(())
    }

    /// SHA-256 of every field, in hex.
    pub fn config_hash(&self) -> String {
        hex_digest(format!("{self:?}").as_bytes())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub k: usize,
    pub objective: f64,
    pub gap: f64,
    pub max_violation: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub step_size: f64,
    pub iterations: usize,
    pub iters_to_95: Option<usize>,
    pub final_gap: f64,
    pub converged: bool,
    pub stable: bool,
    /// Iterations whose rates overload some link.
    pub violations: usize,
    pub worst_violation: f64,
    pub curve: Vec<CurvePoint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub rows: Vec<SweepRow>,
    pub config_hash: String,
}

impl SweepResult {
    /// `param,value,iters_to_95,final_gap,stable,violations`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("param,value,iters_to_95,final_gap,stable,violations\n");
        for r in &self.rows {
            let iters = r.iters_to_95.map(|k| k.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{:e},{},{}",
                self.spec.param.as_str(),
                self.spec.param.format_value(r.value),
                iters,
                r.final_gap,
                r.stable,
                r.violations
            );
        }
        out
    }

    /// `value,k,objective,gap,max_violation,residual`
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("value,k,objective,gap,max_violation,residual\n");
        for r in &self.rows {
            for p in &r.curve {
                let _ = writeln!(
                    out,
                    "{},{},{:?},{:e},{:e},{:e}",
                    self.spec.param.format_value(r.value),
                    p.k,
                    p.objective,
                    p.gap,
                    p.max_violation,
                    p.residual
                );
            }
        }
        out
    }
}

/// Solves `p` with the chosen algorithm and scores it against the reference
/// optimum. The curve keeps at most about 1000 evenly spaced points.
pub fn evaluate(p: &NumProblem, algorithm: Algorithm, cfg: &SolverConfig, value: f64) -> Result<SweepRow> {
    let reference = centralized_solve(p, ORACLE_TOL)?;
    if !reference.excluded.is_empty() {
        return Err(Error::InvalidProblem(format!(
            "{} charger(s) sit behind zero-capacity links",
            reference.excluded.len()
        )));
    }
    let trace = match algorithm {
        Algorithm::Dual => dual_solve(p, cfg)?.1,
        Algorithm::Primal => primal_solve(p, cfg, None)?.1,
        Algorithm::Uncontrolled => return Err(Error::Config("uncontrolled charging has no iterations".into())),
    };
    let f_star = reference.objective;
    let final_x = trace.records.last().map(|r| r.x.as_slice()).unwrap_or(&trace.initial_x);
    let every = trace.records.len().div_ceil(1000).max(1);
    let curve = trace
        .records
        .iter()
        .filter(|r| r.k % every == 0 || r.k == trace.records.len())
        .map(|r| CurvePoint {
            k: r.k,
            objective: r.objective,
            gap: relative_gap(r.objective, f_star),
            max_violation: r.max_violation,
            residual: r.residual,
        })
        .collect();
    Ok(SweepRow {
        value,
        step_size: cfg.step_size,
        iterations: trace.iterations(),
        iters_to_95: iterations_to_95(&trace, &reference.x),
        final_gap: relative_gap(p.objective(final_x), f_star),
        converged: trace.converged(),
        stable: !trace.unstable(),
        violations: trace.records.iter().filter(|r| r.max_violation > cfg.tol).count(),
        worst_violation: trace.worst_violation(),
        curve,
    })
}

fn solver_config(spec: &SweepSpec, step: f64) -> SolverConfig {
    SolverConfig::new(step).with_epsilon(spec.epsilon).with_max_iters(spec.max_iters)
}

/// Runs `f` on every value, on up to `jobs` threads; rows keep the value order.
fn par_map<F>(values: &[f64], jobs: usize, f: F) -> Result<Vec<SweepRow>>
where
    F: Fn(f64) -> Result<SweepRow> + Sync,
{
    let jobs = jobs.clamp(1, values.len().max(1));
    let chunk = values.len().div_ceil(jobs);
    thread::scope(|s| {
        let handles: Vec<_> = values
            .chunks(chunk.max(1))
            .map(|part| s.spawn(|| part.iter().map(|&v| f(v)).collect::<Result<Vec<_>>>()))
            .collect();
        let mut rows = Vec::with_capacity(values.len());
        for h in handles {
            rows.extend(h.join().expect("sweep worker panicked")?);
        }
        Ok(rows)
    })
}

/// One run per step size on a fixed instance.
pub fn run_step_size_sweep(spec: &SweepSpec, p: &NumProblem) -> Result<SweepResult> {
    spec.validate()?;
    if spec.param != SweepParam::StepSize {
        return Err(Error::Config("not a step-size sweep".into()));
    }
    let rows = par_map(&spec.values, spec.jobs, |step| evaluate(p, spec.algorithm, &solver_config(spec, step), step))?;
    Ok(SweepResult { spec: spec.clone(), rows, config_hash: spec.config_hash() })
}

/// Small random instance on a random tree.
///
/// Links `0..m` form a tree with `parent[l] < l` (link 0 at the source);
/// each charger attaches below a uniformly chosen link and uses every link
/// up to the source. Draws `m, n` in `1..=max_size`, capacities in
/// `[1.5, 4]`, weights in `[1, 2]` and caps in `[0.5, 1]`, so that
/// `x_max <= w_min` holds. Returns the problem and the parent of each link
/// (`None` for the root).
pub fn random_nested_problem(seed: u64, max_size: usize) -> Result<(NumProblem, Vec<Option<usize>>)> {
    if max_size == 0 {
        return Err(Error::Config("instance size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(1..=max_size);
    let n = rng.random_range(1..=max_size);
    let parent: Vec<Option<usize>> = (0..m).map(|l| (l > 0).then(|| rng.random_range(0..l))).collect();
    let routes = (0..n)
        .map(|_| {
            let mut l = Some(rng.random_range(0..m));
            let mut route = Vec::new();
            while let Some(k) = l {
                route.push(k);
                l = parent[k];
            }
            route.reverse();
            route
        })
        .collect();
    let capacity = (0..m).map(|_| rng.random_range(1.5..=4.0)).collect();
    let weights = (0..n).map(|_| rng.random_range(1.0..=2.0)).collect();
    let max_rate = (0..n).map(|_| rng.random_range(0.5..=1.0)).collect();
    let p = NumProblem::new(RoutingMatrix::from_routes(m, routes)?, capacity, weights, max_rate)?;
    Ok((p, parent))
}

/// Chargers kept by the N-sweep: the first `n` sites of a seeded random
/// permutation, in site order. Samples for increasing `n` are nested.
pub fn subsample_chargers(total: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n > total {
        return Err(Error::Config(format!("cannot keep {n} of {total} chargers")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut rng);
    let mut keep = order[..n].to_vec();
    keep.sort_unstable();
    Ok(keep)
}

/// Static instance of the given size on the feeder.
pub fn sized_problem(spec: &SweepSpec, feeder: &Feeder, shapes: &LoadShapes, value: f64) -> Result<NumProblem> {
    let size = value as usize;
    match spec.param {
        SweepParam::StepSize => static_problem(feeder, shapes, spec.minute),
        SweepParam::Chargers => {
            let keep = subsample_chargers(feeder.chargers().len(), size, spec.seed)?;
            static_problem(&feeder.with_chargers(&keep), shapes, spec.minute)
        }
        SweepParam::Lines => static_problem(&feeder.truncated(size)?, shapes, spec.minute),
    }
}

/// One run per problem size.
pub fn run_size_sweep(spec: &SweepSpec, feeder: &Feeder, shapes: &LoadShapes) -> Result<SweepResult> {
    spec.validate()?;
    if spec.param == SweepParam::StepSize {
        return Err(Error::Config("not a size sweep".into()));
    }
    let rows = par_map(&spec.values, spec.jobs, |value| {
        let p = sized_problem(spec, feeder, shapes, value)?;
        let step = spec.step_size.unwrap_or(match spec.algorithm {
            Algorithm::Dual => spec.dual_bound.step(&p),
            _ => 1.0,
        });
        evaluate(&p, spec.algorithm, &solver_config(spec, step), value)
    })?;
    Ok(SweepResult { spec: spec.clone(), rows, config_hash: spec.config_hash() })
}

/// Dispatches on the swept parameter.
pub fn run_sweep(spec: &SweepSpec, feeder: &Feeder, shapes: &LoadShapes) -> Result<SweepResult> {
    match spec.param {
        SweepParam::StepSize => run_step_size_sweep(spec, &static_problem(feeder, shapes, spec.minute)?),
        _ => run_size_sweep(spec, feeder, shapes),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicSummary {
    pub algorithm: Algorithm,
    pub violation_minutes: usize,
    pub first_violation_minute: Option<usize>,
    pub total_energy_kwh: f64,
    pub completed_sessions: usize,
    pub sessions: usize,
    /// Peak loading over ampacity of the worst phase of the first report line.
    pub head_peak_ratio: f64,
}

impl DynamicSummary {
    pub fn of(report: &ScenarioReport) -> Self {
        let head_peak_ratio = report.line_loadings.iter().map(|r| r.loading / r.ampacity).fold(0.0, f64::max);
        DynamicSummary {
            algorithm: report.algorithm,
            violation_minutes: report.violation_minutes(),
            first_violation_minute: report.first_violation_minute(),
            total_energy_kwh: report.total_energy_kwh(),
            completed_sessions: report.completed_sessions(),
            sessions: report.sessions.len(),
            head_peak_ratio,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicComparison {
    pub dual: ScenarioReport,
    pub primal: ScenarioReport,
    pub summary: Vec<DynamicSummary>,
}

impl DynamicComparison {
    /// `algorithm,violation_minutes,first_violation_minute,total_energy_kwh,completed_sessions,sessions,head_peak_ratio`
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "algorithm,violation_minutes,first_violation_minute,total_energy_kwh,completed_sessions,sessions,head_peak_ratio\n",
        );
        for s in &self.summary {
            let first = s.first_violation_minute.map(|m| m.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{},{},{:.6}",
                s.algorithm.as_str(),
                s.violation_minutes,
                first,
                s.total_energy_kwh,
                s.completed_sessions,
                s.sessions,
                s.head_peak_ratio
            );
        }
        out
    }
}

/// Runs the same day (same seed and arrivals) under both controllers.
/// `dual_step` and `primal_step` override the default step sizes.
pub fn run_dynamic_experiment(
    base: &ScenarioConfig,
    dual_step: Option<f64>,
    primal_step: Option<f64>,
    feeder: &Feeder,
    shapes: &LoadShapes,
) -> Result<DynamicComparison> {
    let cfg_for = |algorithm: Algorithm, step: Option<f64>| ScenarioConfig {
        algorithm,
        step_size: step.unwrap_or(algorithm.default_dynamic_step()),
        ..base.clone()
    };
    let (dual, primal) = thread::scope(|s| {
        let dual = s.spawn(|| run_scenario(&cfg_for(Algorithm::Dual, dual_step), feeder, shapes));
        let primal = run_scenario(&cfg_for(Algorithm::Primal, primal_step), feeder, shapes);
        (dual.join().expect("dual scenario panicked"), primal)
    });
    let (dual, primal) = (dual?, primal?);
    let summary = vec![DynamicSummary::of(&dual), DynamicSummary::of(&primal)];
    Ok(DynamicComparison { dual, primal, summary })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineImpact {
    pub link: usize,
    pub label: String,
    pub ampacity: f64,
    pub peak_loading: f64,
    pub peak_minute: usize,
    /// Peak loading over ampacity.
    pub ratio: f64,
    /// Peak base-load current over ampacity.
    pub base_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AmpacityImpact {
    pub lines: Vec<LineImpact>,
    /// Labels of links whose peak loading exceeded the ampacity.
    pub violated: Vec<String>,
}

impl AmpacityImpact {
    /// `line_id,ampacity_a,peak_loading_a,peak_minute,ratio,base_ratio`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("line_id,ampacity_a,peak_loading_a,peak_minute,ratio,base_ratio\n");
        for l in &self.lines {
            let _ = writeln!(
                out,
                "{},{},{:.6},{},{:.6},{:.6}",
                l.label, l.ampacity, l.peak_loading, l.peak_minute, l.ratio, l.base_ratio
            );
        }
        out
    }
}

/// Per-link peak loading ratios of a simulated day, and the links that
/// exceeded their ampacity.
pub fn check_ampacity_impact(report: &ScenarioReport) -> AmpacityImpact {
    let lines: Vec<LineImpact> = report
        .link_peaks
        .iter()
        .map(|p| LineImpact {
            link: p.link,
            label: p.label.clone(),
            ampacity: p.ampacity,
            peak_loading: p.peak_loading,
            peak_minute: p.minute,
            ratio: p.peak_loading / p.ampacity,
            base_ratio: p.base_peak / p.ampacity,
        })
        .collect();
    let violated = lines.iter().filter(|l| l.peak_loading > l.ampacity + report.tol).map(|l| l.label.clone()).collect();
    AmpacityImpact { lines, violated }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::IterationRecord;

    fn single_link(c: f64, n: usize) -> NumProblem {
        let r = RoutingMatrix::from_routes(1, vec![vec![0]; n]).unwrap();
        NumProblem::new(r, vec![c], vec![1.0; n], vec![100.0; n]).unwrap()
    }

    #[test]
    fn ninety_five_percent_metric() {
        let rec = |k: usize, x: f64| IterationRecord {
            k,
            x: vec![x],
            objective: 0.0,
            max_violation: 0.0,
            residual: 0.0,
            elapsed: Default::default(),
        };
        let trace = IterationTrace {
            initial_x: vec![0.0],
            records: vec![rec(1, 5.0), rec(2, 9.0), rec(3, 9.6), rec(4, 9.9)],
            termination: crate::problem::Termination::Converged,
        };
        assert_eq!(iterations_to_95(&trace, &[10.0]), Some(3));
        assert_eq!(iterations_to_95(&trace, &[0.0]), Some(0));
        assert_eq!(iterations_to_95(&trace, &[-100.0]), None);
    }

    #[test]
    fn gap_is_relative_above_one() {
        assert_eq!(relative_gap(2.0, 1.0), 1.0);
        assert_eq!(relative_gap(-99.0, -100.0), 0.01);
        assert_eq!(relative_gap(0.5, 0.25), 0.25);
    }

    #[test]
    fn step_sweep_rows_follow_values() {
        let p = single_link(100.0, 3);
        let mut spec = SweepSpec::new(SweepParam::StepSize, vec![0.01, 1.0, 0.1], Algorithm::Primal);
        spec.jobs = 2;
        let res = run_step_size_sweep(&spec, &p).unwrap();
        let values: Vec<f64> = res.rows.iter().map(|r| r.value).collect();
        assert_eq!(values, vec![0.01, 1.0, 0.1]);
        assert!(res.rows.iter().all(|r| r.stable && r.violations == 0));
        assert_eq!(res.to_csv().lines().count(), 4);
        assert_eq!(res, run_step_size_sweep(&spec, &p).unwrap());
    }

    #[test]
    fn empty_problem_sweep_is_trivial() {
        let r = RoutingMatrix::from_routes(1, vec![]).unwrap();
        let p = NumProblem::new(r, vec![10.0], vec![], vec![]).unwrap();
        for algorithm in [Algorithm::Dual, Algorithm::Primal] {
            let spec = SweepSpec::new(SweepParam::StepSize, vec![0.1], algorithm);
            let row = &run_step_size_sweep(&spec, &p).unwrap().rows[0];
            assert_eq!(row.iterations, 0);
            assert!(row.converged);
            assert_eq!(row.final_gap, 0.0);
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let p = single_link(1.0, 1);
        let bad = SweepSpec::new(SweepParam::StepSize, vec![], Algorithm::Dual);
        assert!(run_step_size_sweep(&bad, &p).is_err());
        let bad = SweepSpec::new(SweepParam::StepSize, vec![-1.0], Algorithm::Dual);
        assert!(run_step_size_sweep(&bad, &p).is_err());
        let bad = SweepSpec::new(SweepParam::Chargers, vec![2.5], Algorithm::Dual);
        assert!(bad.validate().is_err());
        let bad = SweepSpec::new(SweepParam::StepSize, vec![0.1], Algorithm::Uncontrolled);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn subsample_is_seeded_and_sorted() {
        let a = subsample_chargers(55, 10, 3).unwrap();
        assert_eq!(a, subsample_chargers(55, 10, 3).unwrap());
        assert_eq!(a.len(), 10);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(subsample_chargers(5, 6, 0).is_err());
        let b = subsample_chargers(55, 20, 3).unwrap();
        assert!(a.iter().all(|i| b.contains(i)));
    }

    #[test]
    fn config_hash_tracks_fields() {
        let a = SweepSpec::new(SweepParam::Chargers, vec![10.0], Algorithm::Dual);
        let mut b = a.clone();
        b.seed = 8;
        assert_eq!(a.config_hash().len(), 64);
        assert_ne!(a.config_hash(), b.config_hash());
    }
}
