//! Congestion control for EV charging on radial low-voltage feeders, posed
//! as network utility maximization.
//!
//! The feeder model turns line ampacities and base-load shapes into per-link
//! headroom. Two distributed controllers share it among the chargers: a
//! price-based dual algorithm and a budget-based primal algorithm whose
//! iterates are always feasible. A centralized interior-point solver
//! provides reference optima, and the scenario engine simulates a day of
//! EV arrivals at one-minute resolution.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod centralized;
pub mod dual;
pub mod error;
pub mod feeder;
pub mod harness;
pub mod primal;
pub mod problem;
pub mod routing;
pub mod scenario;

pub use centralized::{centralized_solve, kkt_residual, CentralizedSolution};
pub use dual::{dual_lambda_update, dual_lipschitz_bound, dual_solve, dual_step_bound, dual_x_update, DualState};
pub use error::{Error, Result};
pub use feeder::{
    available_capacity, parse_feeder, read_load_shapes, AmpacityTable, Capacity, CapacityModel, ChargerSite, Feeder,
    FeederFiles, Line, LoadPhase, LoadShape, LoadShapes, Phase, PhaseMode, CHARGER_POWER_KW, MINUTES_PER_DAY,
    NOMINAL_PHASE_VOLTAGE,
};
pub use harness::{
    check_ampacity_impact, random_nested_problem, run_dynamic_experiment, run_size_sweep, run_step_size_sweep,
    run_sweep, static_problem, AmpacityImpact, DynamicComparison, SweepParam, SweepResult, SweepRow, SweepSpec,
};
pub use primal::{
    default_budgets, primal_budget_step, primal_solve, primal_x_mu_update, sequential_project, PrimalState, X_FLOOR,
};
pub use problem::{IterationRecord, IterationTrace, NumProblem, SolverConfig, StabilityMonitor, Termination};
pub use routing::RoutingMatrix;
pub use scenario::{
    generate_arrivals, run_scenario, Algorithm, EvSession, ScenarioConfig, ScenarioReport, SessionState, Simulation,
};
