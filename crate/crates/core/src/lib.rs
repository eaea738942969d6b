//! Simulation and analysis toolkit for energy-efficient Ethernet link policies.
//!
//! The crate is organised around the life of a packet trace:
//!
//! * [`traffic`] synthesises self-similar traffic from superposed Pareto
//!   ON/OFF sources, ingests `packets-csv` trace files and bins packet
//!   streams into load series.
//! * [`selfsim`] estimates the Hurst parameter of a load series with the
//!   variance-time method.
//! * [`predictor`] maintains the online conditional-probability table used
//!   to forecast the traffic level of the second part of each window.
//! * [`link`] is the discrete-event link simulator for the Always-On, EEE
//!   burst and EEEP (EEE with prediction) strategies.
//! * [`theory`] evaluates the closed-form quiet-time, efficiency and energy
//!   figures the simulator is validated against.

pub mod link;
pub mod predictor;
pub mod selfsim;
pub mod theory;
pub mod time;
pub mod traffic;

pub use link::{
    advance_state, energy_accumulate, run_always_on, run_eee_burst, run_eeep, LinkEvent,
    LinkParams, LinkState, Policy, Residency, SimError, SimOutput, SimResult, Simulator,
    StrategyConfig, WindowRecord, WindowStrategy,
};
pub use predictor::{
    CondProbTable, PredictionConfig, Predictor, QuantizerState, WindowObservation,
};
pub use selfsim::{estimate_hurst, HurstEstimate, HurstOptions, VarianceTimePoint};
pub use theory::{BoundsReport, TheoryInputs};
pub use traffic::{LoadSeries, PacketEvent, ParetoSourceConfig, TrafficTrace};
