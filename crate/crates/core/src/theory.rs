//! Closed-form quiet-time, efficiency and energy figures for the single- and
//! mixed-strategy analyses. These are the oracles the simulator is checked
//! against.
//!
//! All times are in seconds; `n_bar` is the mean number of packets per burst
//! unit and may be fractional.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::link::{LinkParams, SimResult, StrategyConfig};
use crate::time::nanos_to_secs;
use crate::traffic::TrafficTrace;

#[derive(Debug, Error, PartialEq)]
pub enum TheoryError {
    #[error("offered load {busy_secs} s per burst unit exceeds the budget {budget_secs} s")]
    Overload { busy_secs: f64, budget_secs: f64 },
    #[error("time gain is undefined for p_eee = 0")]
    ZeroQuietFraction,
    #[error("energy gain denominator vanishes")]
    DegenerateDenominator,
    #[error("invalid inputs: {0}")]
    Invalid(&'static str),
}

fn check(cond: bool, what: &'static str) -> Result<(), TheoryError> {
    if cond {
        Ok(())
    } else {
        Err(TheoryError::Invalid(what))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryInputs {
    pub n_bar: f64,
    pub t_pack: f64,
    /// Window length T.
    pub window: f64,
    /// Learning interval T'.
    pub learn: f64,
    /// Burst unit T_B.
    pub burst: f64,
    pub t_trans: f64,
    pub tau_bar: f64,
    pub delta_tau_bar: f64,
    /// Fraction U of windows using the predictive tail.
    pub usage: f64,
    pub pw_on: f64,
    pub pw_off: f64,
    /// Observation length L.
    pub duration: f64,
}

impl Default for TheoryInputs {
    /// 1000BASE-T timings, T = 100 ms, T' = 50 ms, T_B = 1 ms, L = 200 s, no load.
    fn default() -> Self {
        Self::from_link(
            &LinkParams::default(),
            &StrategyConfig::default(),
            0.0,
            0.0,
            200.0,
        )
    }
}

impl TheoryInputs {
    pub fn from_link(
        link: &LinkParams,
        cfg: &StrategyConfig,
        n_bar: f64,
        t_pack: f64,
        duration: f64,
    ) -> Self {
        Self {
            n_bar,
            t_pack,
            window: nanos_to_secs(cfg.window),
            learn: nanos_to_secs(cfg.learn),
            burst: nanos_to_secs(cfg.burst),
            t_trans: nanos_to_secs(link.t_trans()),
            tau_bar: 0.0,
            delta_tau_bar: 0.0,
            usage: 0.0,
            pw_on: link.pw_on,
            pw_off: link.pw_off,
            duration,
        }
    }

    /// Load figures measured on a trace: packets per burst unit and mean
    /// serialization time. `tau_bar`, `delta_tau_bar` and `usage` are taken
    /// from `eeep` when given.
    pub fn measured(
        trace: &TrafficTrace,
        link: &LinkParams,
        cfg: &StrategyConfig,
        eeep: Option<&SimResult>,
    ) -> Self {
        let duration = trace.duration_secs();
        let units = duration / nanos_to_secs(cfg.burst);
        let n_bar = trace.len() as f64 / units;
        let t_pack = trace.mean_packet_bits() / link.line_rate_bps as f64;
        let mut inputs = Self::from_link(link, cfg, n_bar, t_pack, duration);
        if let Some(r) = eeep {
            inputs.usage = r.eeep_usage;
            inputs.tau_bar = r.mean_tau_s;
            inputs.delta_tau_bar = r.mean_delta_tau_s;
        }
        inputs
    }

    /// Same inputs with `delta_tau_bar = p_tau * tau_bar`.
    pub fn with_p_tau(mut self, p_tau: f64) -> Self {
        self.delta_tau_bar = p_tau * self.tau_bar;
        self
    }

    /// `(T' + T_B) / T`.
    pub fn kappa(&self) -> f64 {
        (self.learn + self.burst) / self.window
    }

    /// Busy time per burst unit, `n_bar * t_pack`.
    fn load_time(&self) -> f64 {
        self.n_bar * self.t_pack
    }

    pub fn validate(&self) -> Result<(), TheoryError> {
        check(self.n_bar >= 0.0, "n_bar must be non-negative")?;
        check(self.t_pack >= 0.0, "t_pack must be non-negative")?;
        check(self.burst > 0.0, "burst unit must be positive")?;
        check(
            self.learn > 0.0 && self.learn < self.window,
            "need 0 < T' < T",
        )?;
        check(self.t_trans >= 0.0, "t_trans must be non-negative")?;
        check((0.0..=1.0).contains(&self.usage), "U must lie in [0, 1]")?;
        Ok(())
    }
}

/// Quiet fraction of EEE burst transmission, `(T_B - T_trans - N T_pack) / T_B`.
pub fn p_eee_theory(inp: &TheoryInputs) -> Result<f64, TheoryError> {
    let budget = inp.burst - inp.t_trans;
    if !(inp.load_time() < budget) {
        return Err(TheoryError::Overload {
            busy_secs: inp.load_time(),
            budget_secs: budget,
        });
    }
    Ok((budget - inp.load_time()) / inp.burst)
}

fn eeep_budget_check(inp: &TheoryInputs) -> Result<(), TheoryError> {
    let budget = inp.burst - inp.t_trans * inp.kappa();
    if !(inp.load_time() < budget) {
        return Err(TheoryError::Overload {
            busy_secs: inp.load_time(),
            budget_secs: budget,
        });
    }
    Ok(())
}

/// Quiet fraction of EEEP with the given mean tail `tau_bar + delta_tau_bar`.
pub fn p_eeep_theory(inp: &TheoryInputs) -> Result<f64, TheoryError> {
    eeep_budget_check(inp)?;
    let units_learn = inp.learn / inp.burst;
    let learn_part =
        (inp.burst - inp.load_time()) * units_learn - inp.t_trans * (units_learn + 1.0);
    let tail_part = (inp.window - inp.learn) - (inp.tau_bar + inp.delta_tau_bar);
    Ok((learn_part + tail_part) / inp.window)
}

/// EEEP quiet fraction when the tail carries exactly the average load of the
/// prediction interval and no extension is added.
pub fn p_eeep_ideal(inp: &TheoryInputs) -> Result<f64, TheoryError> {
    eeep_budget_check(inp)?;
    let units_window = inp.window / inp.burst;
    let units_learn = inp.learn / inp.burst;
    Ok(
        ((inp.burst - inp.load_time()) * units_window - inp.t_trans * (units_learn + 1.0))
            / inp.window,
    )
}

/// Tail length that carries the mean prediction-interval load.
pub fn ideal_tau(inp: &TheoryInputs) -> f64 {
    inp.load_time() * (inp.window - inp.learn) / inp.burst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Efficiencies {
    pub on: f64,
    pub eee: f64,
    pub eeep: f64,
}

/// Transmission time over active time for Always-On, EEE and EEEP.
pub fn efficiencies(inp: &TheoryInputs) -> Efficiencies {
    let n = inp.n_bar;
    let on = inp.load_time() / inp.burst;
    if n == 0.0 {
        return Efficiencies {
            on,
            eee: 0.0,
            eeep: 0.0,
        };
    }
    let ratio = inp.t_trans / inp.t_pack;
    Efficiencies {
        on,
        eee: n / (n + ratio),
        eeep: n / (n + ratio * inp.kappa()),
    }
}

/// Un-floored load limits `T_B/T_pack - (T_trans/T_pack)` and the
/// `kappa`-scaled EEEP analogue.
pub fn load_limits_raw(inp: &TheoryInputs) -> (f64, f64) {
    let b = inp.burst / inp.t_pack;
    let a = inp.t_trans / inp.t_pack;
    (b - a, b - a * inp.kappa())
}

/// Packets per burst unit at which Always-On catches up with EEE and EEEP.
pub fn load_limits(inp: &TheoryInputs) -> (u64, u64) {
    let (eee, eeep) = load_limits_raw(inp);
    (eee.floor().max(0.0) as u64, eeep.floor().max(0.0) as u64)
}

pub fn optimal_loads_raw(inp: &TheoryInputs) -> (f64, f64) {
    let sb = (inp.burst / inp.t_pack).sqrt();
    let a = inp.t_trans / inp.t_pack;
    let sa = a.sqrt();
    let sak = (a * inp.kappa()).sqrt();
    (sa * (sb - sa), sak * (sb - sak))
}

/// Loads that maximise the efficiency gain over Always-On.
pub fn optimal_loads(inp: &TheoryInputs) -> Result<(u64, u64), TheoryError> {
    if !(inp.burst > inp.t_trans) {
        return Err(TheoryError::Invalid("optimal loads need T_B > T_trans"));
    }
    let (eee, eeep) = optimal_loads_raw(inp);
    Ok((eee.floor().max(0.0) as u64, eeep.floor().max(0.0) as u64))
}

/// Efficiency ceilings `1 - T_trans/T_B` and `1 - kappa T_trans/T_B`.
pub fn efficiency_bounds(inp: &TheoryInputs) -> (f64, f64) {
    let r = inp.t_trans / inp.burst;
    (1.0 - r, 1.0 - r * inp.kappa())
}

/// Efficiency gains over Always-On at `n_bar = n`.
pub fn efficiency_gains_at(inp: &TheoryInputs, n: f64) -> (f64, f64) {
    let e = efficiencies(&TheoryInputs { n_bar: n, ..*inp });
    (e.eee - e.on, e.eeep - e.on)
}

/// Convex mix of the two single-strategy quiet fractions and efficiencies.
pub fn mix_u(p_eee: f64, p_eeep: f64, eta_eee: f64, eta_eeep: f64, usage: f64) -> (f64, f64) {
    (
        usage * p_eeep + (1.0 - usage) * p_eee,
        usage * eta_eeep + (1.0 - usage) * eta_eee,
    )
}

/// Joules over the horizon for quiet fraction `p`.
pub fn energy_from_quiet_fraction(p: f64, inp: &TheoryInputs) -> f64 {
    inp.duration * (p * inp.pw_off + (1.0 - p) * inp.pw_on)
}

/// Relative increase of quiet time over EEE.
pub fn time_gain(p_eee: f64, p_eeep: f64, usage: f64) -> Result<f64, TheoryError> {
    if p_eee == 0.0 {
        return Err(TheoryError::ZeroQuietFraction);
    }
    Ok(usage * (p_eeep - p_eee) / p_eee)
}

fn power_ratio_denominator(inp: &TheoryInputs) -> Result<f64, TheoryError> {
    let p_eee = p_eee_theory(inp)?;
    let denom = inp.pw_on / (inp.pw_on - inp.pw_off) - p_eee;
    if !denom.is_finite() || denom.abs() < 1e-15 {
        return Err(TheoryError::DegenerateDenominator);
    }
    Ok(denom)
}

/// Relative energy saving over EEE, evaluated in the power-ratio form
/// `U (X - (tau + delta_tau)/T) / (PW_ON/(PW_ON - PW_OFF) - p_eee)`.
pub fn energy_gain(inp: &TheoryInputs) -> Result<f64, TheoryError> {
    let denom = power_ratio_denominator(inp)?;
    eeep_budget_check(inp)?;
    let tail_units = (inp.window - inp.learn) / inp.burst;
    let x =
        inp.t_trans / inp.window * (tail_units - 1.0) + inp.load_time() / inp.window * tail_units;
    let eg = inp.usage * (x - (inp.tau_bar + inp.delta_tau_bar) / inp.window) / denom;
    debug_assert!(
        energy_gain_from_energies(inp).map_or(true, |alt| (alt - eg).abs() < 1e-9),
        "energy gain forms disagree"
    );
    Ok(eg)
}

/// `(E_EEE - E_U) / E_EEE` with the energies computed from quiet fractions.
pub fn energy_gain_from_energies(inp: &TheoryInputs) -> Result<f64, TheoryError> {
    let p_eee = p_eee_theory(inp)?;
    let p_eeep = p_eeep_theory(inp)?;
    let e_eee = energy_from_quiet_fraction(p_eee, inp);
    if e_eee == 0.0 {
        return Err(TheoryError::DegenerateDenominator);
    }
    let (p_u, _) = mix_u(p_eee, p_eeep, 0.0, 0.0, inp.usage);
    let e_u = energy_from_quiet_fraction(p_u, inp);
    Ok((e_eee - e_u) / e_eee)
}

/// Energy gain at each `p_tau`.
pub fn eg_vs_ptau_sweep(
    inp: &TheoryInputs,
    p_tau_values: &[f64],
) -> Result<Vec<(f64, f64)>, TheoryError> {
    p_tau_values
        .iter()
        .map(|&p| energy_gain(&inp.with_p_tau(p)).map(|eg| (p, eg)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundsReport {
    pub p_eee: f64,
    pub p_eeep: f64,
    pub p_u: f64,
    pub eta_on: f64,
    pub eta_eee: f64,
    pub eta_eeep: f64,
    pub eta_u: f64,
    pub n_limit_eee: u64,
    pub n_limit_eeep: u64,
    pub n_star_eee: u64,
    pub n_star_eeep: u64,
    pub eta_bound_eee: f64,
    pub eta_bound_eeep: f64,
    pub e_eee: f64,
    pub e_u: f64,
    pub tg: f64,
    pub eg: f64,
}

pub fn bounds_report(inp: &TheoryInputs) -> Result<BoundsReport, TheoryError> {
    inp.validate()?;
    let p_eee = p_eee_theory(inp)?;
    let p_eeep = p_eeep_theory(inp)?;
    let eta = efficiencies(inp);
    let (p_u, eta_u) = mix_u(p_eee, p_eeep, eta.eee, eta.eeep, inp.usage);
    let (n_limit_eee, n_limit_eeep) = load_limits(inp);
    let (n_star_eee, n_star_eeep) = optimal_loads(inp)?;
    let (eta_bound_eee, eta_bound_eeep) = efficiency_bounds(inp);
    Ok(BoundsReport {
        p_eee,
        p_eeep,
        p_u,
        eta_on: eta.on,
        eta_eee: eta.eee,
        eta_eeep: eta.eeep,
        eta_u,
        n_limit_eee,
        n_limit_eeep,
        n_star_eee,
        n_star_eeep,
        eta_bound_eee,
        eta_bound_eeep,
        e_eee: energy_from_quiet_fraction(p_eee, inp),
        e_u: energy_from_quiet_fraction(p_u, inp),
        tg: time_gain(p_eee, p_eeep, inp.usage)?,
        eg: energy_gain(inp)?,
    })
}

/// `n_bar,eta_on,eta_eee,eta_eeep` rows.
pub fn write_efficiency_curve_csv<W: Write>(
    inp: &TheoryInputs,
    n_values: &[f64],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "n_bar,eta_on,eta_eee,eta_eeep")?;
    for &n in n_values {
        let e = efficiencies(&TheoryInputs { n_bar: n, ..*inp });
        writeln!(out, "{n},{},{},{}", e.on, e.eee, e.eeep)?;
    }
    Ok(())
}

/// `p_tau,eg` rows.
pub fn write_eg_sweep_csv<W: Write>(rows: &[(f64, f64)], mut out: W) -> std::io::Result<()> {
    writeln!(out, "p_tau,eg")?;
    for (p, eg) in rows {
        writeln!(out, "{p},{eg}")?;
    }
    Ok(())
}

/// Published per-trace figures bundled with the crate.
pub mod reference {
    use serde::Deserialize;

    use super::TheoryInputs;

    const DATA: &str = include_str!("../fixtures/reference_traces.json");

    #[derive(Debug, Clone, Deserialize)]
    pub struct Figures {
        pub p_eee: f64,
        pub e_eee: f64,
        pub p_u: f64,
        pub e_u: f64,
        pub eg: f64,
    }

    #[derive(Debug, Clone, Deserialize)]
    pub struct Reported {
        pub theory: Figures,
        pub sim: Figures,
    }

    #[derive(Debug, Clone, Deserialize)]
    pub struct PTauRow {
        pub p_tau: f64,
        pub non_delayed: f64,
        pub eg_theory: f64,
        pub eg_sim: f64,
    }

    #[derive(Debug, Clone, Deserialize)]
    pub struct ReferenceTrace {
        pub label: String,
        pub mean_packet_bits: f64,
        pub n_bar: f64,
        pub usage: f64,
        pub tau_theory_ms: f64,
        pub tau_sim_ms: f64,
        pub reported: Reported,
        #[serde(default)]
        pub p_tau_sweep: Vec<PTauRow>,
    }

    #[derive(Deserialize)]
    struct File {
        traces: Vec<ReferenceTrace>,
    }

    pub fn traces() -> Vec<ReferenceTrace> {
        serde_json::from_str::<File>(DATA)
            .expect("bundled reference data is valid")
            .traces
    }

    pub fn find(label: &str) -> Option<ReferenceTrace> {
        traces()
            .into_iter()
            .find(|t| t.label.eq_ignore_ascii_case(label))
    }

    impl ReferenceTrace {
        /// Default link and window parameters with this trace's load, usage
        /// and theoretical tau.
        pub fn inputs(&self) -> TheoryInputs {
            TheoryInputs {
                n_bar: self.n_bar,
                t_pack: self.mean_packet_bits / 1e9,
                tau_bar: self.tau_theory_ms / 1e3,
                usage: self.usage,
                ..TheoryInputs::default()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn defaults(t_pack: f64) -> TheoryInputs {
        TheoryInputs {
            t_pack,
            ..TheoryInputs::default()
        }
    }

    fn real1() -> TheoryInputs {
        reference::find("Real1").unwrap().inputs()
    }

    #[test]
    fn defaults_match_gigabit_link() {
        let d = TheoryInputs::default();
        assert!((d.t_trans - 0.2185e-3).abs() < 1e-15);
        assert!((d.kappa() - 0.51).abs() < 1e-12);
        assert_eq!(d.duration, 200.0);
    }

    #[test]
    fn p_eee_examples() {
        let d = defaults(5.68e-6);
        assert!((p_eee_theory(&d).unwrap() - 0.7815).abs() < 1e-12);
        let r = real1();
        assert!((p_eee_theory(&r).unwrap() - 0.706).abs() < 5e-4);
        // at the un-floored limit the quiet time is exhausted
        let (raw, _) = load_limits_raw(&d);
        let near = TheoryInputs {
            n_bar: raw - 1e-6,
            ..d
        };
        assert!(p_eee_theory(&near).unwrap().abs() < 1e-6);
        let over = TheoryInputs {
            n_bar: raw + 1.0,
            ..d
        };
        assert!(matches!(
            p_eee_theory(&over),
            Err(TheoryError::Overload { .. })
        ));
    }

    #[test]
    fn p_eeep_examples() {
        let r = real1();
        let p = p_eeep_theory(&r).unwrap();
        assert!((p - 0.813).abs() < 1e-3, "{p}");
        let ratio = p / p_eee_theory(&r).unwrap();
        assert!((ratio - 1.15).abs() < 0.01, "{ratio}");
        // learning interval covering all but one burst unit reduces to EEE
        let limit = TheoryInputs {
            learn: r.window - r.burst,
            tau_bar: ideal_tau(&TheoryInputs {
                learn: r.window - r.burst,
                ..r
            }),
            ..r
        };
        let diff = p_eeep_theory(&limit).unwrap() - p_eee_theory(&limit).unwrap();
        assert!(diff.abs() < 1e-12, "{diff}");
    }

    #[test]
    fn ideal_tail_reduces_general_form() {
        let r = real1();
        let ideal = TheoryInputs {
            tau_bar: ideal_tau(&r),
            delta_tau_bar: 0.0,
            ..r
        };
        let a = p_eeep_theory(&ideal).unwrap();
        let b = p_eeep_ideal(&ideal).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn efficiency_examples() {
        let zero = TheoryInputs::default();
        let e = efficiencies(&zero);
        assert_eq!((e.on, e.eee, e.eeep), (0.0, 0.0, 0.0));
        let e = efficiencies(&real1());
        assert!((e.on - 0.07).abs() <= 0.01, "{}", e.on);
        assert!((e.eee - 0.26).abs() <= 0.01, "{}", e.eee);
        assert!((e.eeep - 0.41).abs() <= 0.01, "{}", e.eeep);
    }

    #[test]
    fn limits_and_optima() {
        let d = defaults(5.68e-6);
        assert_eq!(load_limits(&d), (137, 156));
        assert_eq!(optimal_loads(&d).unwrap().0, 43);
        let free = TheoryInputs { t_trans: 0.0, ..d };
        let b = (d.burst / d.t_pack).floor() as u64;
        assert_eq!(load_limits(&free), (b, b));
        assert_eq!(optimal_loads(&free).unwrap(), (0, 0));
        let k1 = TheoryInputs {
            learn: d.window - d.burst,
            ..d
        };
        let (x, y) = load_limits(&k1);
        assert_eq!(x, y);
        let (bx, by) = efficiency_bounds(&k1);
        assert!((bx - by).abs() < 1e-15);
    }

    #[test]
    fn efficiency_ceilings() {
        let d = defaults(5.68e-6);
        let (be, bp) = efficiency_bounds(&d);
        assert!((be - 0.7815).abs() < 1e-9);
        assert!((bp - (1.0 - 0.2185 * 0.51)).abs() < 1e-9);
        let (lim, _) = load_limits_raw(&d);
        for i in 0..=1000 {
            let n = lim * i as f64 / 1000.0;
            let e = efficiencies(&TheoryInputs { n_bar: n, ..d });
            assert!(e.eee <= be + 1e-12 && e.eeep <= bp + 1e-12);
        }
    }

    #[test]
    fn optimum_maximises_gain() {
        let d = defaults(5.68e-6);
        let (ne, np) = optimal_loads(&d).unwrap();
        for (n_star, pick) in [(ne, 0usize), (np, 1)] {
            let g = |n: f64| {
                let (a, b) = efficiency_gains_at(&d, n);
                if pick == 0 {
                    a
                } else {
                    b
                }
            };
            let best = (1..=156)
                .map(|n| (n, g(n as f64)))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap()
                .0;
            assert!(
                (best as i64 - n_star as i64).abs() <= 1,
                "{best} vs {n_star}"
            );
        }
    }

    #[test]
    fn mixing_and_gains() {
        assert_eq!(mix_u(0.7, 0.8, 0.2, 0.4, 0.0), (0.7, 0.2));
        assert_eq!(mix_u(0.7, 0.8, 0.2, 0.4, 1.0), (0.8, 0.4));
        assert_eq!(time_gain(0.7, 0.9, 0.0).unwrap(), 0.0);
        assert_eq!(time_gain(0.7, 0.7, 0.5).unwrap(), 0.0);
        assert_eq!(
            time_gain(0.0, 0.7, 0.5),
            Err(TheoryError::ZeroQuietFraction)
        );
        let r = real1();
        let tg = time_gain(
            p_eee_theory(&r).unwrap(),
            p_eeep_theory(&r).unwrap(),
            r.usage,
        )
        .unwrap();
        assert!((tg - 0.126).abs() < 0.003, "{tg}");
        assert_eq!(energy_gain(&TheoryInputs { usage: 0.0, ..r }).unwrap(), 0.0);
    }

    #[test]
    fn energies() {
        let d = TheoryInputs::default();
        assert!((energy_from_quiet_fraction(0.0, &d) - 139.4).abs() < 1e-9);
        assert!((energy_from_quiet_fraction(1.0, &d) - 10.6).abs() < 1e-9);
        assert!((energy_from_quiet_fraction(0.706, &d) - 48.5).abs() < 0.1);
        assert!((energy_from_quiet_fraction(0.795, &d) - 37.0).abs() < 0.1);
    }

    #[test]
    fn sweep_is_linear() {
        let r = real1();
        let ps: Vec<f64> = (0..=8).map(|i| i as f64 / 10.0).collect();
        let rows = eg_vs_ptau_sweep(&r, &ps).unwrap();
        let diffs: Vec<f64> = rows.windows(2).map(|w| w[1].1 - w[0].1).collect();
        for d in &diffs {
            assert!((d - diffs[0]).abs() < 1e-9);
        }
        assert!((diffs[0] + 0.008).abs() < 0.001, "{}", diffs[0]);
        let flat = eg_vs_ptau_sweep(&TheoryInputs { tau_bar: 0.0, ..r }, &ps).unwrap();
        assert!(flat.iter().all(|(_, eg)| (eg - flat[0].1).abs() < 1e-15));
    }

    #[test]
    fn report_is_consistent() {
        let rep = bounds_report(&real1()).unwrap();
        assert!(rep.eta_bound_eee >= rep.eta_eee && rep.eta_bound_eeep >= rep.eta_eeep);
        assert!(rep.p_u >= rep.p_eee && rep.p_u <= rep.p_eeep);
        let json = serde_json::to_value(rep).unwrap();
        assert!(json.get("eg").is_some() && json.get("n_star_eeep").is_some());
    }

    #[test]
    fn csv_outputs() {
        let mut buf = Vec::new();
        write_efficiency_curve_csv(&defaults(5.68e-6), &[0.0], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "n_bar,eta_on,eta_eee,eta_eeep\n0,0,0,0\n"
        );
        let mut buf = Vec::new();
        write_eg_sweep_csv(&[(0.5, 0.25)], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "p_tau,eg\n0.5,0.25\n");
    }

    #[test]
    fn kappa_monotonicity() {
        let d = TheoryInputs {
            n_bar: 20.0,
            ..defaults(5.68e-6)
        };
        let mut prev = f64::INFINITY;
        for units in 1..99 {
            let inp = TheoryInputs {
                learn: units as f64 * d.burst,
                ..d
            };
            let e = efficiencies(&inp);
            assert!(e.eeep < prev);
            prev = e.eeep;
        }
        let k1 = TheoryInputs {
            learn: d.window - d.burst,
            ..d
        };
        let e = efficiencies(&k1);
        assert!((e.eee - e.eeep).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn energy_gain_forms_agree(
            t_pack_us in 1.0f64..12.0,
            load in 0.0f64..0.6,
            learn_units in 1u32..99,
            usage in 0.0f64..1.0,
            tau_frac in 0.0f64..1.0,
            p_tau in 0.0f64..1.0,
        ) {
            let t_pack = t_pack_us * 1e-6;
            let base = defaults(t_pack);
            let learn = learn_units as f64 * base.burst;
            let inp = TheoryInputs {
                n_bar: load * base.burst / t_pack,
                learn,
                usage,
                tau_bar: tau_frac * (base.window - learn) * 0.5,
                ..base
            }.with_p_tau(p_tau);
            let a = energy_gain(&inp).unwrap();
            let b = energy_gain_from_energies(&inp).unwrap();
            prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
        }

        #[test]
        fn mixing_is_convex(a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0, d in 0.0f64..1.0, u in 0.0f64..=1.0) {
            let (p, eta) = mix_u(a, b, c, d, u);
            prop_assert!(p >= a.min(b) - 1e-15 && p <= a.max(b) + 1e-15);
            prop_assert!(eta >= c.min(d) - 1e-15 && eta <= c.max(d) + 1e-15);
        }
    }
}
