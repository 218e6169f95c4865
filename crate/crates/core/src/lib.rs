//! Receding-horizon battery dispatch for an isolated microgrid with two load
//! classes, riding through a storm that cuts wind output and load telemetry.
//!
//! Every decision hour the controller builds a 24-hour mixed-integer program
//! (battery modes, state of charge, lifecycle credit, imbalance penalty, and
//! a resilience term favouring essential load), solves it with
//! [`gridmpc_milp`], commits the first hour, and slides forward. While load
//! telemetry is down, hidden loads are filled in by a two-hour moving average.
//!
//! The modules are generic over the float type; the aliases below fix it to
//! `f64`.

pub mod battery;
pub mod error;
pub mod forecast;
pub mod metrics;
pub mod mpc;
pub mod scenario;

pub use battery::{
    blc_eval, discharge_episodes, dod_of, estimate_lifespan, soc_update, switching_cost, BatteryMode,
    Lifespan,
};
pub use error::{Error, Result};
pub use forecast::{comm_loss_rmse, fill_window, predict_next, rmse};
pub use gridmpc_milp::Scalar;
pub use metrics::{count_switches, loss_totals, resilience_index, summarize, Summary};
pub use mpc::{build_horizon_problem, commit_hour, run, run_with, step, StrideMode};
pub use scenario::{generate_synthetic, load_scenario, window, GeneratorConfig};

pub type BatteryParams = battery::BatteryParams<f64>;
pub type BlcCurve = battery::BlcCurve<f64>;
pub type LoadHistory = forecast::LoadHistory<f64>;
pub type RmseReport = forecast::RmseReport<f64>;
pub type LossTotals = metrics::LossTotals<f64>;
pub type SimulationResult = metrics::SimulationResult<f64>;
pub type Weights = mpc::Weights<f64>;
pub type MpcConfig = mpc::MpcConfig<f64>;
pub type HorizonInputs = mpc::HorizonInputs<f64>;
pub type HorizonModel = mpc::HorizonModel<f64>;
pub type HorizonSolution = mpc::HorizonSolution<f64>;
pub type HourPlan = mpc::HourPlan<f64>;
pub type MpcDecision = mpc::MpcDecision<f64>;
pub type MpcState = mpc::MpcState<f64>;
pub type ScenarioTimeSeries = scenario::ScenarioTimeSeries<f64>;
pub type ScenarioWindow<'a> = scenario::ScenarioWindow<'a, f64>;
