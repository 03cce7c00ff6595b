//! One simulated day of EV charging at one-minute resolution.
//!
//! EVs arrive by a seeded Poisson process, each at its own load site, fully
//! discharged. Every minute the link headroom is recomputed from the base
//! load shapes, the controller runs a fixed number of rounds (warm-started
//! from the previous minute), and each charging EV draws its allocated
//! current until its battery is full.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;

use crate::dual::{dual_lambda_update, dual_x_update};
use crate::error::{Error, Result};
use crate::feeder::{
    CapacityModel, ChargerSite, Feeder, LoadShapes, PhaseMode, CHARGER_POWER_KW, MINUTES_PER_DAY, NOMINAL_PHASE_VOLTAGE,
};
use crate::primal::{default_budgets, primal_budget_step, primal_x_mu_update, sequential_project};
use crate::problem::NumProblem;
use crate::routing::RoutingMatrix;

/// Energy slack below which a battery counts as full.
pub const ENERGY_TOL_KWH: f64 = 1e-9;

/// Links with less headroom than this block their chargers for the minute.
const BLOCKED_CAPACITY: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Dual,
    Primal,
    /// Every charging EV draws its full rate.
    Uncontrolled,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Dual => "dual",
            Algorithm::Primal => "primal",
            Algorithm::Uncontrolled => "uncontrolled",
        }
    }

    /// Step size used by the dynamic experiments: `kappa = 1e-5` for the
    /// dual controller, `gamma = 1` for the primal one.
    pub fn default_dynamic_step(self) -> f64 {
        match self {
            Algorithm::Dual => 1e-5,
            Algorithm::Primal | Algorithm::Uncontrolled => 1.0,
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dual" => Ok(Algorithm::Dual),
            "primal" => Ok(Algorithm::Primal),
            "uncontrolled" | "none" => Ok(Algorithm::Uncontrolled),
            other => Err(Error::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub seed: u64,
    /// EVs per minute.
    pub arrival_rate: f64,
    pub arrival_start_minute: usize,
    pub charger_power_kw: f64,
    pub battery_kwh: f64,
    pub nominal_voltage: f64,
    pub phase_mode: PhaseMode,
    pub algorithm: Algorithm,
    pub step_size: f64,
    pub iterations_per_minute: usize,
    /// Lines (by source-to-leaf index) whose per-minute loading is reported.
    pub report_lines: Vec<usize>,
    pub tol: f64,
}

impl ScenarioConfig {
    /// Evening arrivals from 17:00 at one EV per minute, 20 kW chargers,
    /// 24 kWh batteries, one controller round per minute.
    pub fn new(algorithm: Algorithm) -> Self {
        ScenarioConfig {
            seed: 7,
            arrival_rate: 1.0,
            arrival_start_minute: 17 * 60,
            charger_power_kw: CHARGER_POWER_KW,
            battery_kwh: 24.0,
            nominal_voltage: NOMINAL_PHASE_VOLTAGE,
            phase_mode: PhaseMode::Three,
            algorithm,
            step_size: algorithm.default_dynamic_step(),
            iterations_per_minute: 1,
            report_lines: vec![0],
            tol: 1e-9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.arrival_rate >= 0.0) || !self.arrival_rate.is_finite() {
            return Err(Error::Config(format!("arrival rate must be >= 0, got {}", self.arrival_rate)));
        }
        if self.iterations_per_minute < 1 {
            return Err(Error::Config("iterations per minute must be at least 1".into()));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::Config(format!("step size must be positive, got {}", self.step_size)));
        }
        if !(self.charger_power_kw > 0.0) || !(self.battery_kwh > 0.0) || !(self.nominal_voltage > 0.0) {
            return Err(Error::Config("charger power, battery size and voltage must be positive".into()));
        }
        if self.arrival_start_minute >= MINUTES_PER_DAY {
            return Err(Error::Config(format!("arrival start minute {} outside the day", self.arrival_start_minute)));
        }
        Ok(())
    }

    /// Per-conductor rate cap of every charger.
    pub fn charger_current(&self) -> f64 {
        self.phase_mode.charger_current(self.charger_power_kw, self.nominal_voltage)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SessionState {
    Waiting,
    Charging,
    Done,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvSession {
    pub id: usize,
    pub charger: usize,
    pub arrival_minute: usize,
    pub battery_capacity: f64,
    pub energy_delivered: f64,
    pub state: SessionState,
    /// Minute boundary at which the battery became full.
    pub done_minute: Option<usize>,
    /// Average power (kW) delivered in each minute since arrival.
    pub power_log: Vec<f64>,
}

/// Draws the day's arrivals. Sessions go to distinct charger sites in a
/// seeded random order; arrivals beyond the number of sites are dropped.
pub fn generate_arrivals(cfg: &ScenarioConfig, chargers: &[ChargerSite]) -> Result<Vec<EvSession>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sites: Vec<usize> = chargers.iter().map(|c| c.id).collect();
    sites.shuffle(&mut rng);
    if cfg.arrival_rate == 0.0 {
        return Ok(Vec::new());
    }
    let gap = Exp::new(cfg.arrival_rate).map_err(|e| Error::Config(e.to_string()))?;
    let mut t = cfg.arrival_start_minute as f64;
    let mut sessions = Vec::new();
    let mut dropped = 0usize;
    loop {
        t += rng.sample(gap);
        if t >= MINUTES_PER_DAY as f64 {
            break;
        }
        if sessions.len() == sites.len() {
            dropped += 1;
            continue;
        }
        let id = sessions.len();
        sessions.push(EvSession {
            id,
            charger: sites[id],
            arrival_minute: t as usize,
            battery_capacity: cfg.battery_kwh,
            energy_delivered: 0.0,
            state: SessionState::Waiting,
            done_minute: None,
            power_log: Vec::new(),
        });
    }
    if dropped > 0 {
        log::warn!("{dropped} arrival(s) found every charger site taken and were dropped");
    }
    Ok(sessions)
}

#[derive(Clone, Debug, PartialEq)]
enum Controller {
    Dual { lambda: Vec<f64> },
    Primal { budgets: Vec<Option<f64>> },
    Uncontrolled,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinuteRecord {
    pub minute: usize,
    pub active_sessions: usize,
    pub ev_power_kw: f64,
    /// `max_l (R_l x - c_l)` for the rates applied this minute.
    pub max_violation: f64,
    /// Links with `R_l x - c_l` above the tolerance.
    pub violated_links: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineLoading {
    pub minute: usize,
    pub link: usize,
    pub label: String,
    /// Base-load plus EV current, amperes.
    pub loading: f64,
    pub ampacity: f64,
    pub violation: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkPeak {
    pub link: usize,
    pub label: String,
    pub ampacity: f64,
    pub peak_loading: f64,
    pub minute: usize,
    /// Peak of the base-load current alone.
    pub base_peak: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioReport {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub minutes: Vec<MinuteRecord>,
    pub line_loadings: Vec<LineLoading>,
    pub sessions: Vec<EvSession>,
    pub link_peaks: Vec<LinkPeak>,
    pub tol: f64,
}

impl ScenarioReport {
    /// Minutes in which the EV allocation overloaded at least one link.
    pub fn violation_minutes(&self) -> usize {
        self.minutes.iter().filter(|m| m.violated_links > 0).count()
    }

    pub fn first_violation_minute(&self) -> Option<usize> {
        self.minutes.iter().find(|m| m.violated_links > 0).map(|m| m.minute)
    }

    pub fn total_energy_kwh(&self) -> f64 {
        self.sessions.iter().map(|s| s.energy_delivered).sum()
    }

    pub fn completed_sessions(&self) -> usize {
        self.sessions.iter().filter(|s| s.state == SessionState::Done).count()
    }

    /// `minute,line_id,loading_a,ampacity_a,violation`
    pub fn lines_csv(&self) -> String {
        let mut out = String::from("minute,line_id,loading_a,ampacity_a,violation\n");
        for r in &self.line_loadings {
            let _ = writeln!(out, "{},{},{:.6},{},{}", r.minute, r.label, r.loading, r.ampacity, u8::from(r.violation));
        }
        out
    }

    /// `session_id,charger_id,arrival_minute,done_minute,energy_kwh`
    pub fn sessions_csv(&self) -> String {
        let mut out = String::from("session_id,charger_id,arrival_minute,done_minute,energy_kwh\n");
        for s in &self.sessions {
            let done = s.done_minute.map(|m| m.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{:.9}", s.id, s.charger, s.arrival_minute, done, s.energy_delivered);
        }
        out
    }

    /// `minute,active_sessions,ev_power_kw,max_violation,violated_links`
    pub fn minutes_csv(&self) -> String {
        let mut out = String::from("minute,active_sessions,ev_power_kw,max_violation,violated_links\n");
        for m in &self.minutes {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.9},{}",
                m.minute, m.active_sessions, m.ev_power_kw, m.max_violation, m.violated_links
            );
        }
        out
    }
}

/// Day-long simulation state; advance with [`Simulation::step_minute`].
pub struct Simulation<'a> {
    cfg: ScenarioConfig,
    feeder: &'a Feeder,
    shapes: &'a LoadShapes,
    model: CapacityModel,
    routing: RoutingMatrix,
    labels: Vec<String>,
    rate_cap: f64,
    pub minute: usize,
    pub sessions: Vec<EvSession>,
    /// Headroom of the current minute.
    pub capacity: Vec<f64>,
    /// Current allocated per charger site (zero when idle).
    pub rates: Vec<f64>,
    controller: Controller,
    pub log: Vec<MinuteRecord>,
    pub line_loadings: Vec<LineLoading>,
    peaks: Vec<(f64, usize, f64)>,
}

impl<'a> Simulation<'a> {
    pub fn new(cfg: &ScenarioConfig, feeder: &'a Feeder, shapes: &'a LoadShapes) -> Result<Self> {
        cfg.validate()?;
        if let Some(&l) = cfg.report_lines.iter().find(|&&l| l >= feeder.lines().len()) {
            return Err(Error::Config(format!("report line {l} does not exist")));
        }
        let model = CapacityModel::new(feeder, cfg.phase_mode, cfg.nominal_voltage)?;
        let routing = RoutingMatrix::from_feeder(feeder, cfg.phase_mode);
        let labels = link_labels(feeder, cfg.phase_mode);
        let sessions = generate_arrivals(cfg, feeder.chargers())?;
        let n = feeder.chargers().len();
        let controller = match cfg.algorithm {
            Algorithm::Dual => Controller::Dual { lambda: vec![0.0; routing.rows()] },
            Algorithm::Primal => Controller::Primal { budgets: vec![None; n] },
            Algorithm::Uncontrolled => Controller::Uncontrolled,
        };
        Ok(Simulation {
            rate_cap: cfg.charger_current(),
            cfg: cfg.clone(),
            feeder,
            shapes,
            peaks: vec![(f64::NEG_INFINITY, 0, 0.0); routing.rows()],
            capacity: vec![0.0; routing.rows()],
            rates: vec![0.0; n],
            model,
            routing,
            labels,
            minute: 0,
            sessions,
            controller,
            log: Vec::new(),
            line_loadings: Vec::new(),
        })
    }

    pub fn finished(&self) -> bool {
        self.minute >= MINUTES_PER_DAY
    }

    pub fn step_minute(&mut self) -> Result<&MinuteRecord> {
        if self.finished() {
            return Err(Error::Config("the simulated day is over".into()));
        }
        let t = self.minute;
        for s in &mut self.sessions {
            if s.state == SessionState::Waiting && s.arrival_minute <= t {
                s.state = SessionState::Charging;
            }
        }
        let cap = self.model.capacity(&self.shapes.kw_at(self.feeder, t)?);
        self.capacity = cap.capacity.clone();

        let mut charging: Vec<(usize, usize)> = self
            .sessions
            .iter()
            .enumerate()
            .filter(|(_, s)| s.state == SessionState::Charging)
            .map(|(k, s)| (s.charger, k))
            .collect();
        charging.sort_unstable();
        let active: Vec<usize> = charging
            .iter()
            .map(|&(c, _)| c)
            .filter(|&c| self.routing.route(c).iter().all(|&l| self.capacity[l] >= BLOCKED_CAPACITY))
            .collect();

        let n_active = active.len();
        let problem = NumProblem::new(
            self.routing.select_columns(&active),
            self.capacity.clone(),
            vec![1.0; n_active],
            vec![self.rate_cap; n_active],
        )?;
        let x = self.allocate(&problem, &active);

        self.rates.iter_mut().for_each(|r| *r = 0.0);
        for (&c, &xi) in active.iter().zip(&x) {
            self.rates[c] = xi;
        }

        // energy accounting
        let mode = self.cfg.phase_mode;
        let mut ev_power = 0.0;
        for &(c, k) in &charging {
            let s = &mut self.sessions[k];
            let kw = mode.charger_power_kw(self.rates[c], self.cfg.nominal_voltage);
            let kwh = (kw / 60.0).min(s.battery_capacity - s.energy_delivered);
            s.energy_delivered += kwh;
            s.power_log.push(kwh * 60.0);
            ev_power += kwh * 60.0;
            if s.battery_capacity - s.energy_delivered <= ENERGY_TOL_KWH {
                s.energy_delivered = s.battery_capacity;
                s.state = SessionState::Done;
                s.done_minute = Some(t + 1);
            }
        }

        let ev_current = self.routing.mul(&self.rates);
        let mut max_violation = f64::NEG_INFINITY;
        let mut violated = 0;
        for (l, &ev) in ev_current.iter().enumerate() {
            let excess = ev - self.capacity[l];
            max_violation = max_violation.max(excess);
            if excess > self.cfg.tol {
                violated += 1;
            }
            let loading = cap.base_current[l] + ev;
            let peak = &mut self.peaks[l];
            if loading > peak.0 {
                peak.0 = loading;
                peak.1 = t;
            }
            peak.2 = peak.2.max(cap.base_current[l]);
        }
        let per = mode.links_per_line();
        for &line in &self.cfg.report_lines {
            for (l, &ev) in ev_current.iter().enumerate().skip(per * line).take(per) {
                let loading = cap.base_current[l] + ev;
                self.line_loadings.push(LineLoading {
                    minute: t,
                    link: l,
                    label: self.labels[l].clone(),
                    loading,
                    ampacity: cap.ampacity[l],
                    violation: loading > cap.ampacity[l] + self.cfg.tol,
                });
            }
        }

        self.log.push(MinuteRecord {
            minute: t,
            active_sessions: charging.len(),
            ev_power_kw: ev_power,
            max_violation,
            violated_links: violated,
        });
        self.minute += 1;
        Ok(self.log.last().expect("just pushed"))
    }

    /// Runs the controller rounds for this minute; returns the applied rates
    /// of the active chargers.
    fn allocate(&mut self, p: &NumProblem, active: &[usize]) -> Vec<f64> {
        let rounds = self.cfg.iterations_per_minute;
        let step = self.cfg.step_size;
        match &mut self.controller {
            Controller::Uncontrolled => p.max_rate().to_vec(),
            Controller::Dual { lambda } => {
                let mut x = p.max_rate().to_vec();
                for _ in 0..rounds {
                    x = dual_x_update(lambda, p);
                    *lambda = dual_lambda_update(lambda, &x, p, step);
                }
                x
            }
            Controller::Primal { budgets } => {
                // newcomers start from their equal share of the current headroom
                let share = default_budgets(p);
                let b: Vec<f64> = active.iter().zip(&share).map(|(&c, &s)| budgets[c].unwrap_or(s)).collect();
                // headroom may have dropped since the last minute
                let mut b = sequential_project(&b, p);
                let mut x = Vec::new();
                for _ in 0..rounds {
                    let (xk, mu) = primal_x_mu_update(&b, p);
                    b = sequential_project(&primal_budget_step(&b, &mu, step), p);
                    x = xk;
                }
                budgets.iter_mut().for_each(|v| *v = None);
                for (&c, &bi) in active.iter().zip(&b) {
                    budgets[c] = Some(bi);
                }
                x
            }
        }
    }

    pub fn into_report(self) -> ScenarioReport {
        let link_peaks = self
            .peaks
            .iter()
            .enumerate()
            .map(|(l, &(peak, minute, base))| LinkPeak {
                link: l,
                label: self.labels[l].clone(),
                ampacity: self.model.ampacity()[l],
                peak_loading: peak,
                minute,
                base_peak: base,
            })
            .collect();
        ScenarioReport {
            algorithm: self.cfg.algorithm,
            seed: self.cfg.seed,
            minutes: self.log,
            line_loadings: self.line_loadings,
            sessions: self.sessions,
            link_peaks,
            tol: self.cfg.tol,
        }
    }
}

/// Simulates the whole day.
pub fn run_scenario(cfg: &ScenarioConfig, feeder: &Feeder, shapes: &LoadShapes) -> Result<ScenarioReport> {
    let mut sim = Simulation::new(cfg, feeder, shapes)?;
    while !sim.finished() {
        sim.step_minute()?;
    }
    Ok(sim.into_report())
}

/// `LINE_ID` per link in single-phase mode, `LINE_ID.A` etc. in three-phase mode.
pub fn link_labels(feeder: &Feeder, mode: PhaseMode) -> Vec<String> {
    feeder
        .lines()
        .iter()
        .flat_map(|line| match mode {
            PhaseMode::Single => vec![line.id.clone()],
            PhaseMode::Three => ["A", "B", "C"].iter().map(|p| format!("{}.{p}", line.id)).collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feeder::{AmpacityTable, LineRecord, LoadPhase, LoadRecord, Phase};

    fn star(n: usize, code: &str) -> Feeder {
        let mut lines = vec![LineRecord {
            id: "head".into(),
            from_bus: "S".into(),
            to_bus: "H".into(),
            phases: "ABC".into(),
            line_code: code.into(),
            length_m: 1.0,
        }];
        let mut loads = Vec::new();
        for i in 0..n {
            lines.push(LineRecord {
                id: format!("svc{i}"),
                from_bus: "H".into(),
                to_bus: format!("B{i}"),
                phases: "ABC".into(),
                line_code: "4c_.1".into(),
                length_m: 1.0,
            });
            loads.push(LoadRecord {
                id: format!("L{i}"),
                bus: format!("B{i}"),
                phase: LoadPhase::Single(Phase::ALL[i % 3]),
                shape_file: String::new(),
            });
        }
        Feeder::from_records("S", &lines, &AmpacityTable::default(), &loads, 1.0).unwrap()
    }

    #[test]
    fn no_arrivals_at_zero_rate() {
        let f = star(3, "4c_70");
        let cfg = ScenarioConfig { arrival_rate: 0.0, ..ScenarioConfig::new(Algorithm::Primal) };
        assert!(generate_arrivals(&cfg, f.chargers()).unwrap().is_empty());
    }

    #[test]
    fn arrivals_are_deterministic_and_distinct() {
        let f = star(10, "4c_70");
        let cfg = ScenarioConfig::new(Algorithm::Primal);
        let a = generate_arrivals(&cfg, f.chargers()).unwrap();
        let b = generate_arrivals(&cfg, f.chargers()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        let mut sites: Vec<usize> = a.iter().map(|s| s.charger).collect();
        sites.sort_unstable();
        sites.dedup();
        assert_eq!(sites.len(), 10);
        assert!(a.windows(2).all(|w| w[0].arrival_minute <= w[1].arrival_minute));
        assert!(a[0].arrival_minute >= 1020);
    }

    #[test]
    fn empty_system_draws_nothing() {
        let f = star(3, "4c_70");
        let shapes = LoadShapes::constant(&f, 1.0);
        let cfg = ScenarioConfig { arrival_rate: 0.0, ..ScenarioConfig::new(Algorithm::Dual) };
        let mut sim = Simulation::new(&cfg, &f, &shapes).unwrap();
        let rec = sim.step_minute().unwrap().clone();
        assert_eq!(rec.violated_links, 0);
        assert_eq!(rec.ev_power_kw, 0.0);
        assert!(sim.rates.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn lone_ev_charges_in_72_minutes() {
        let f = star(1, "4c_70").with_chargers(&[0]);
        let shapes = LoadShapes::zeros(&f);
        for algorithm in [Algorithm::Dual, Algorithm::Primal, Algorithm::Uncontrolled] {
            let cfg = ScenarioConfig { seed: 3, ..ScenarioConfig::new(algorithm) };
            let report = run_scenario(&cfg, &f, &shapes).unwrap();
            assert_eq!(report.sessions.len(), 1);
            let s = &report.sessions[0];
            assert_eq!(s.state, SessionState::Done, "{algorithm:?}");
            assert_eq!(s.done_minute.unwrap() - s.arrival_minute, 72, "{algorithm:?}");
            assert!((s.energy_delivered - 24.0).abs() < 1e-6);
            assert_eq!(report.violation_minutes(), 0);
        }
    }

    #[test]
    fn congested_primal_never_overloads() {
        // 5 chargers of 27.8 A behind a 110 A head line
        let f = star(5, "35_SAC_XSC");
        let shapes = LoadShapes::constant(&f, 0.5);
        let cfg = ScenarioConfig { arrival_rate: 2.0, ..ScenarioConfig::new(Algorithm::Primal) };
        let report = run_scenario(&cfg, &f, &shapes).unwrap();
        assert_eq!(report.violation_minutes(), 0);
        assert!(report.minutes.iter().all(|m| m.max_violation <= 1e-9));
        assert_eq!(report.completed_sessions(), 5);

        let cfg = ScenarioConfig { algorithm: Algorithm::Uncontrolled, ..cfg };
        let report = run_scenario(&cfg, &f, &shapes).unwrap();
        assert!(report.violation_minutes() > 0);
    }

    #[test]
    fn energy_matches_power_integral() {
        let f = star(6, "35_SAC_XSC");
        let shapes = LoadShapes::constant(&f, 0.3);
        for algorithm in [Algorithm::Dual, Algorithm::Primal] {
            let cfg = ScenarioConfig { arrival_rate: 0.5, ..ScenarioConfig::new(algorithm) };
            let report = run_scenario(&cfg, &f, &shapes).unwrap();
            for s in &report.sessions {
                let integral: f64 = s.power_log.iter().map(|kw| kw / 60.0).sum();
                assert!((integral - s.energy_delivered).abs() < 1e-6);
                assert!(s.energy_delivered <= s.battery_capacity);
                if let Some(done) = s.done_minute {
                    // nothing drawn after completion
                    assert_eq!(s.arrival_minute + s.power_log.len(), done);
                }
            }
        }
    }

    #[test]
    fn csv_headers() {
        let f = star(2, "4c_70");
        let shapes = LoadShapes::zeros(&f);
        let report = run_scenario(&ScenarioConfig::new(Algorithm::Primal), &f, &shapes).unwrap();
        assert!(report.lines_csv().starts_with("minute,line_id,loading_a,ampacity_a,violation\n0,head.A,"));
        assert!(report.sessions_csv().starts_with("session_id,charger_id,arrival_minute,done_minute,energy_kwh\n"));
        assert_eq!(report.line_loadings.len(), 3 * MINUTES_PER_DAY);
    }
}
