//! Discrete-event simulation of one egress link.
//!
//! Time is kept in integer nanoseconds, and residency in each [`LinkState`]
//! is accumulated exactly. Three strategies are available:
//!
//! * Always-On: the link never leaves `Active`.
//! * EEE burst transmission: arrivals are held for one burst unit and sent
//!   together at the next unit boundary, with the link sleeping in between.
//! * EEEP: EEE during the learning interval of each window; at `T'` the
//!   predictor decides whether to sleep until a computed wake time near the
//!   end of the window.

mod engine;
mod policy;

pub use policy::{run_always_on, run_eee_burst, run_eeep, Simulator};

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::predictor::{PredictionConfig, Predictor, PredictorError};
use crate::time::{millis_to_nanos, nanos_to_secs, Nanos};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("illegal link transition {event:?} from {state:?}")]
    IllegalTransition { state: LinkState, event: LinkEvent },
    #[error("invalid link parameters: {0}")]
    InvalidParams(String),
    #[error("invalid strategy configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Prediction(#[from] PredictorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum LinkState {
    Active,
    GoingToSleep,
    Quiet,
    Waking,
    Refresh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LinkEvent {
    SleepRequest,
    SleepDone,
    WakeRequest,
    WakeDone,
    RefreshStart,
    RefreshEnd,
}

/// Applies one event to the link state machine.
pub fn advance_state(state: LinkState, event: LinkEvent) -> Result<LinkState, SimError> {
    use LinkEvent::*;
    use LinkState::*;
    match (state, event) {
        (Active, SleepRequest) => Ok(GoingToSleep),
        (GoingToSleep, SleepDone) => Ok(Quiet),
        (Quiet, WakeRequest) => Ok(Waking),
        (Waking, WakeDone) => Ok(Active),
        (Quiet, RefreshStart) => Ok(Refresh),
        (Refresh, RefreshEnd) => Ok(Quiet),
        _ => Err(SimError::IllegalTransition { state, event }),
    }
}

/// Physical link timings and power draw.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkParams {
    pub line_rate_bps: u64,
    pub t_s: Nanos,
    pub t_w: Nanos,
    pub t_r: Nanos,
    pub refresh_period: Nanos,
    pub pw_on: f64,
    pub pw_off: f64,
}

impl Default for LinkParams {
    /// 1000BASE-T.
    fn default() -> Self {
        Self {
            line_rate_bps: 1_000_000_000,
            t_s: 202_000,
            t_w: 16_500,
            t_r: 200_000,
            refresh_period: 20_000_000,
            pw_on: 0.697,
            pw_off: 0.053,
        }
    }
}

impl LinkParams {
    pub fn t_trans(&self) -> Nanos {
        self.t_s + self.t_w
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidParams(m.to_owned()));
        if self.line_rate_bps == 0 {
            return bad("line rate must be positive");
        }
        if !(self.pw_off >= 0.0 && self.pw_on > self.pw_off && self.pw_on.is_finite()) {
            return bad("need pw_on > pw_off >= 0");
        }
        Ok(())
    }
}

/// Window layout and strategy switches.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyConfig {
    /// Window length T.
    pub window: Nanos,
    /// Learning interval T'.
    pub learn: Nanos,
    /// Burst unit T_B.
    pub burst: Nanos,
    pub prediction: PredictionConfig,
    /// Wake and sleep in every burst unit, even when nothing is queued.
    pub model_faithful_eee: bool,
    pub refresh_enabled: bool,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            window: millis_to_nanos(100.0),
            learn: millis_to_nanos(50.0),
            burst: millis_to_nanos(1.0),
            prediction: PredictionConfig::default(),
            model_faithful_eee: true,
            refresh_enabled: false,
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self, link: &LinkParams) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if self.burst == 0 {
            return bad("burst unit must be positive".into());
        }
        if !(0 < self.learn && self.learn < self.window) {
            return bad("need 0 < T' < T".into());
        }
        if !self.window.is_multiple_of(self.burst) || !self.learn.is_multiple_of(self.burst) {
            return bad("T and T' must be multiples of T_B".into());
        }
        if self.burst <= link.t_trans() {
            return bad(format!(
                "burst unit {} ns must exceed the transition time {} ns",
                self.burst,
                link.t_trans()
            ));
        }
        self.prediction.validate()?;
        Ok(())
    }
}

/// Nanoseconds spent in each state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Residency {
    pub active_ns: Nanos,
    pub going_to_sleep_ns: Nanos,
    pub quiet_ns: Nanos,
    pub waking_ns: Nanos,
    pub refresh_ns: Nanos,
}

impl Residency {
    pub fn total_ns(&self) -> Nanos {
        self.active_ns + self.going_to_sleep_ns + self.quiet_ns + self.waking_ns + self.refresh_ns
    }

    pub fn add(&mut self, state: LinkState, ns: Nanos) {
        *match state {
            LinkState::Active => &mut self.active_ns,
            LinkState::GoingToSleep => &mut self.going_to_sleep_ns,
            LinkState::Quiet => &mut self.quiet_ns,
            LinkState::Waking => &mut self.waking_ns,
            LinkState::Refresh => &mut self.refresh_ns,
        } += ns;
    }

    pub fn quiet_fraction(&self) -> f64 {
        match self.total_ns() {
            0 => 0.0,
            t => self.quiet_ns as f64 / t as f64,
        }
    }
}

/// Joules: quiet time at `pw_off`, everything else (transitions and refresh
/// included) at `pw_on`.
pub fn energy_accumulate(residency: &Residency, params: &LinkParams) -> f64 {
    let quiet = nanos_to_secs(residency.quiet_ns);
    let rest = nanos_to_secs(residency.total_ns() - residency.quiet_ns);
    params.pw_off * quiet + params.pw_on * rest
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    #[serde(rename = "on")]
    AlwaysOn,
    Eee,
    Eeep,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::AlwaysOn, Policy::Eee, Policy::Eeep];

    pub fn name(self) -> &'static str {
        match self {
            Policy::AlwaysOn => "on",
            Policy::Eee => "eee",
            Policy::Eeep => "eeep",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "on" | "always-on" | "always_on" => Ok(Policy::AlwaysOn),
            "eee" => Ok(Policy::Eee),
            "eeep" => Ok(Policy::Eeep),
            other => Err(format!(
                "unknown policy {other:?} (expected on, eee or eeep)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WindowStrategy {
    #[serde(rename = "EEE")]
    Eee,
    #[serde(rename = "EEEP")]
    Eeep,
}

impl WindowStrategy {
    pub fn name(self) -> &'static str {
        match self {
            WindowStrategy::Eee => "EEE",
            WindowStrategy::Eeep => "EEEP",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowRecord {
    pub index: usize,
    pub strategy: WindowStrategy,
    /// Predicted tail length, 0 when no prediction was made.
    pub tau_s: f64,
    pub delta_tau_s: f64,
    /// Bits still queued at the window end and sent in the next window.
    pub carried_bits: u64,
    /// Hurst estimate in force at the decision point, if any.
    pub h_hat: Option<f64>,
    /// Learning-interval load, carry-in included.
    pub v1_bits: u64,
    pub v2_bits: u64,
}

pub const WINDOW_CSV_HEADER: &str = "index,strategy,tau_s,delta_tau_s,carried_bits,H_hat";

pub fn write_windows_csv<W: Write>(windows: &[WindowRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{WINDOW_CSV_HEADER}")?;
    for w in windows {
        let h = w.h_hat.map(|h| h.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            w.index,
            w.strategy.name(),
            w.tau_s,
            w.delta_tau_s,
            w.carried_bits,
            h
        )?;
    }
    Ok(())
}

/// Outcome of one run. `windows` is left out of the JSON form; export it
/// with [`write_windows_csv`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub policy: Policy,
    pub duration_s: f64,
    pub quiet_fraction: f64,
    pub energy_j: f64,
    /// Bits offered by the trace.
    pub total_bits: u64,
    pub transmitted_bits: u64,
    pub queued_bits_at_end: u64,
    pub packets_transmitted: u64,
    /// Fraction of full windows that used the predictive tail.
    pub eeep_usage: f64,
    /// Among tail windows, the fraction that carried bits into the next one.
    pub delayed_window_fraction: f64,
    pub max_packet_delay_s: f64,
    pub mean_packet_delay_s: f64,
    /// Mean tail length over tail windows.
    pub mean_tau_s: f64,
    pub mean_delta_tau_s: f64,
    pub overload: bool,
    pub overloaded_units: u64,
    pub residency: Residency,
    /// Last Hurst estimate used by the gate.
    pub h_hat: Option<f64>,
    #[serde(skip)]
    pub windows: Vec<WindowRecord>,
}

/// Policy-independent scalar figures of a [`SimResult`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimScalars {
    pub quiet_fraction: f64,
    pub energy_j: f64,
    pub total_bits: u64,
    pub transmitted_bits: u64,
    pub queued_bits_at_end: u64,
    pub packets_transmitted: u64,
    pub eeep_usage: f64,
    pub delayed_window_fraction: f64,
    pub max_packet_delay_s: f64,
    pub mean_packet_delay_s: f64,
    pub mean_tau_s: f64,
    pub mean_delta_tau_s: f64,
    pub overload: bool,
    pub overloaded_units: u64,
    pub residency: Residency,
}

impl SimResult {
    pub fn scalars(&self) -> SimScalars {
        SimScalars {
            quiet_fraction: self.quiet_fraction,
            energy_j: self.energy_j,
            total_bits: self.total_bits,
            transmitted_bits: self.transmitted_bits,
            queued_bits_at_end: self.queued_bits_at_end,
            packets_transmitted: self.packets_transmitted,
            eeep_usage: self.eeep_usage,
            delayed_window_fraction: self.delayed_window_fraction,
            max_packet_delay_s: self.max_packet_delay_s,
            mean_packet_delay_s: self.mean_packet_delay_s,
            mean_tau_s: self.mean_tau_s,
            mean_delta_tau_s: self.mean_delta_tau_s,
            overload: self.overload,
            overloaded_units: self.overloaded_units,
            residency: self.residency,
        }
    }
}

/// One transmitted packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Delivery {
    /// Index of the packet in the trace.
    pub seq: usize,
    pub arrival_ns: Nanos,
    pub start_ns: Nanos,
    pub finish_ns: Nanos,
    pub size_bits: u64,
}

impl Delivery {
    pub fn delay_ns(&self) -> Nanos {
        self.finish_ns - self.arrival_ns
    }
}

/// A result plus the optional per-packet log and final predictor.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub result: SimResult,
    pub deliveries: Vec<Delivery>,
    pub predictor: Option<Predictor>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transition_table() {
        use LinkEvent::*;
        use LinkState::*;
        assert_eq!(advance_state(Quiet, WakeRequest), Ok(Waking));
        assert_eq!(advance_state(Waking, WakeDone), Ok(Active));
        assert_eq!(advance_state(Active, SleepRequest), Ok(GoingToSleep));
        assert_eq!(advance_state(GoingToSleep, SleepDone), Ok(Quiet));
        assert_eq!(advance_state(Quiet, RefreshStart), Ok(Refresh));
        assert_eq!(advance_state(Refresh, RefreshEnd), Ok(Quiet));
        assert_eq!(
            advance_state(Active, WakeRequest),
            Err(SimError::IllegalTransition {
                state: Active,
                event: WakeRequest
            })
        );
        let states = [Active, GoingToSleep, Quiet, Waking, Refresh];
        let events = [
            SleepRequest,
            SleepDone,
            WakeRequest,
            WakeDone,
            RefreshStart,
            RefreshEnd,
        ];
        let legal = states
            .iter()
            .flat_map(|&s| events.iter().map(move |&e| (s, e)))
            .filter(|&(s, e)| advance_state(s, e).is_ok())
            .count();
        assert_eq!(legal, 6);
    }

    #[test]
    fn energy_examples() {
        let p = LinkParams::default();
        let quiet = Residency {
            quiet_ns: 200_000_000_000,
            ..Residency::default()
        };
        assert!((energy_accumulate(&quiet, &p) - 10.6).abs() < 1e-9);
        let active = Residency {
            active_ns: 200_000_000_000,
            ..Residency::default()
        };
        assert!((energy_accumulate(&active, &p) - 139.4).abs() < 1e-9);
        let mixed = Residency {
            quiet_ns: 141_200_000_000,
            active_ns: 58_800_000_000,
            ..Residency::default()
        };
        assert!((energy_accumulate(&mixed, &p) - 48.5).abs() < 0.1);
        // transitions and refresh are billed at the active rate
        let trans = Residency {
            going_to_sleep_ns: 1_000_000_000,
            waking_ns: 1_000_000_000,
            refresh_ns: 1_000_000_000,
            ..Residency::default()
        };
        assert!((energy_accumulate(&trans, &p) - 3.0 * 0.697).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let link = LinkParams::default();
        assert!(StrategyConfig::default().validate(&link).is_ok());
        let odd = StrategyConfig {
            learn: 50_500_000,
            ..StrategyConfig::default()
        };
        assert!(odd.validate(&link).is_err());
        let short = StrategyConfig {
            burst: 200_000,
            window: 1_000_000,
            learn: 400_000,
            ..StrategyConfig::default()
        };
        assert!(short.validate(&link).is_err());
        let bad_power = LinkParams {
            pw_off: 1.0,
            ..link
        };
        assert!(bad_power.validate().is_err());
    }

    #[test]
    fn policy_names_round_trip() {
        for p in Policy::ALL {
            assert_eq!(p.name().parse::<Policy>().unwrap(), p);
            assert_eq!(serde_json::to_value(p).unwrap(), p.name());
        }
        assert!("sometimes".parse::<Policy>().is_err());
    }

    #[test]
    fn window_csv() {
        let rec = WindowRecord {
            index: 3,
            strategy: WindowStrategy::Eeep,
            tau_s: 0.002,
            delta_tau_s: 0.0,
            carried_bits: 16,
            h_hat: Some(0.75),
            v1_bits: 1,
            v2_bits: 2,
        };
        let mut buf = Vec::new();
        write_windows_csv(&[rec], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "index,strategy,tau_s,delta_tau_s,carried_bits,H_hat\n3,EEEP,0.002,0,16,0.75\n"
        );
    }
}
