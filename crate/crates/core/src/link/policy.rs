use super::engine::Engine;
use super::{
    energy_accumulate, LinkParams, LinkState, Policy, SimError, SimOutput, SimResult,
    StrategyConfig, WindowRecord, WindowStrategy,
};
use crate::predictor::{compute_tau, Predictor, WindowObservation};
use crate::selfsim::estimate_hurst;
use crate::time::{nanos_to_secs, secs_to_nanos, Nanos};
use crate::traffic::{LoadSeries, TrafficTrace};

pub fn run_always_on(trace: &TrafficTrace, params: &LinkParams) -> Result<SimResult, SimError> {
    Simulator::new(params.clone(), StrategyConfig::default())
        .run(Policy::AlwaysOn, trace)
        .map(|o| o.result)
}

pub fn run_eee_burst(
    trace: &TrafficTrace,
    params: &LinkParams,
    cfg: &StrategyConfig,
) -> Result<SimResult, SimError> {
    Simulator::new(params.clone(), cfg.clone())
        .run(Policy::Eee, trace)
        .map(|o| o.result)
}

pub fn run_eeep(
    trace: &TrafficTrace,
    params: &LinkParams,
    cfg: &StrategyConfig,
) -> Result<SimResult, SimError> {
    Simulator::new(params.clone(), cfg.clone())
        .run(Policy::Eeep, trace)
        .map(|o| o.result)
}

/// Runs any policy with fixed link parameters and strategy configuration.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub params: LinkParams,
    pub cfg: StrategyConfig,
    record_deliveries: bool,
}

impl Simulator {
    pub fn new(params: LinkParams, cfg: StrategyConfig) -> Self {
        Self {
            params,
            cfg,
            record_deliveries: false,
        }
    }

    /// Keeps a per-packet delivery log in the output.
    pub fn record_deliveries(mut self, on: bool) -> Self {
        self.record_deliveries = on;
        self
    }

    pub fn run(&self, policy: Policy, trace: &TrafficTrace) -> Result<SimOutput, SimError> {
        self.params.validate()?;
        if trace.line_rate_bps() != self.params.line_rate_bps {
            return Err(SimError::InvalidParams(format!(
                "trace line rate {} b/s differs from link rate {} b/s",
                trace.line_rate_bps(),
                self.params.line_rate_bps
            )));
        }
        if policy != Policy::AlwaysOn {
            self.cfg.validate(&self.params)?;
        }
        match policy {
            Policy::AlwaysOn => {
                let mut eng = self.engine(trace, LinkState::Active);
                eng.always_on();
                Ok(self.finish(policy, trace, eng, Vec::new(), None, None))
            }
            Policy::Eee | Policy::Eeep => self.run_windows(policy, trace),
        }
    }

    fn engine<'a>(&'a self, trace: &'a TrafficTrace, initial: LinkState) -> Engine<'a> {
        Engine::new(
            trace,
            &self.params,
            initial,
            self.cfg.refresh_enabled,
            self.record_deliveries,
        )
    }

    /// Window loop shared by EEE and EEEP; EEE simply never opens the gate.
    fn run_windows(&self, policy: Policy, trace: &TrafficTrace) -> Result<SimOutput, SimError> {
        let cfg = &self.cfg;
        let pred_cfg = &cfg.prediction;
        let faithful = cfg.model_faithful_eee;
        let initial = if faithful {
            LinkState::Active
        } else {
            LinkState::Quiet
        };
        let mut eng = self.engine(trace, initial);
        let horizon = eng.horizon();
        let (tb, win, learn) = (cfg.burst, cfg.window, cfg.learn);
        let full_windows = (horizon / win) as usize;
        let unit_bits = per_unit_bits(trace, tb);

        let mut predictor = Predictor::new(pred_cfg.levels);
        let mut converged = false;
        let mut hurst: Option<f64> = None;
        let mut hurst_age = 0usize;
        let mut carry_in = 0u64;
        let mut windows = Vec::with_capacity(full_windows);

        let run_units = |eng: &mut Engine, from: Nanos, to: Nanos| -> Result<(), SimError> {
            let mut u0 = from;
            while u0 < to {
                eng.eee_unit(u0, (u0 + tb).min(to), faithful)?;
                u0 += tb;
            }
            Ok(())
        };

        for index in 0..full_windows {
            let w0 = index as Nanos * win;
            let m = w0 + learn;
            let w1 = w0 + win;
            run_units(&mut eng, w0, m)?;
            let v1 = carry_in + trace.bits_between(w0, m);
            let v2 = trace.bits_between(m, w1);

            let mut record = WindowRecord {
                index,
                strategy: WindowStrategy::Eee,
                tau_s: 0.0,
                delta_tau_s: 0.0,
                carried_bits: 0,
                h_hat: None,
                v1_bits: v1,
                v2_bits: v2,
            };

            let mut tail = None;
            if policy == Policy::Eeep && converged {
                if hurst.is_none() || hurst_age >= pred_cfg.hurst_recheck_windows.max(1) {
                    hurst = prefix_hurst(&unit_bits, (w0 / tb) as usize, nanos_to_secs(tb));
                    hurst_age = 0;
                }
                hurst_age += 1;
                record.h_hat = hurst;
                if let Some(p) = predictor.predict(v1 as f64) {
                    let (tau, dtau) = compute_tau(
                        p.expected_bits,
                        self.params.line_rate_bps as f64,
                        pred_cfg.p_tau,
                    );
                    record.tau_s = tau;
                    record.delta_tau_s = dtau;
                    let gate =
                        p.expected_bits <= v1 as f64 && hurst.is_some_and(|h| h > pred_cfg.h_bar);
                    if gate {
                        let len = secs_to_nanos(tau + dtau).min(win - learn);
                        tail = Some(w1 - len);
                    }
                }
            }

            match tail {
                Some(tail_start) => {
                    record.strategy = WindowStrategy::Eeep;
                    eng.eeep_tail(tail_start, w1)?;
                    record.carried_bits = eng.queued_bits_before(w1);
                    eng.mark_carried();
                }
                None => {
                    run_units(&mut eng, m, w1)?;
                    // bits that should already have gone out in this window
                    record.carried_bits = eng.queued_bits_before(w1.saturating_sub(tb));
                }
            }
            carry_in = record.carried_bits;

            if policy == Policy::Eeep {
                predictor.observe(WindowObservation {
                    v1: v1 as f64,
                    v2: v2 as f64,
                });
                if !converged && predictor.has_converged(pred_cfg.theta) {
                    converged = true;
                }
            }
            windows.push(record);
        }
        run_units(&mut eng, full_windows as Nanos * win, horizon)?;

        let predictor = (policy == Policy::Eeep).then_some(predictor);
        Ok(self.finish(policy, trace, eng, windows, hurst, predictor))
    }

    fn finish(
        &self,
        policy: Policy,
        trace: &TrafficTrace,
        mut eng: Engine,
        windows: Vec<WindowRecord>,
        h_hat: Option<f64>,
        predictor: Option<Predictor>,
    ) -> SimOutput {
        eng.finish();
        let residency = eng.residency;
        debug_assert_eq!(residency.total_ns(), trace.duration_ns());
        let tails: Vec<&WindowRecord> = windows
            .iter()
            .filter(|w| w.strategy == WindowStrategy::Eeep)
            .collect();
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let mean = |f: fn(&WindowRecord) -> f64| {
            if tails.is_empty() {
                0.0
            } else {
                tails.iter().map(|w| f(w)).sum::<f64>() / tails.len() as f64
            }
        };
        let result = SimResult {
            policy,
            duration_s: trace.duration_secs(),
            quiet_fraction: residency.quiet_fraction(),
            energy_j: energy_accumulate(&residency, &self.params),
            total_bits: trace.total_bits(),
            transmitted_bits: eng.transmitted_bits,
            queued_bits_at_end: eng.backlog_bits(),
            packets_transmitted: eng.packets,
            eeep_usage: ratio(tails.len(), windows.len()),
            delayed_window_fraction: ratio(
                tails.iter().filter(|w| w.carried_bits > 0).count(),
                tails.len(),
            ),
            max_packet_delay_s: nanos_to_secs(eng.max_delay),
            mean_packet_delay_s: eng.mean_delay_ns() / 1e9,
            mean_tau_s: mean(|w| w.tau_s),
            mean_delta_tau_s: mean(|w| w.delta_tau_s),
            overload: eng.overloaded_units > 0,
            overloaded_units: eng.overloaded_units,
            residency,
            h_hat,
            windows,
        };
        let deliveries = eng.take_log();
        SimOutput {
            result,
            deliveries,
            predictor,
        }
    }
}

/// Bits arriving in each burst unit.
fn per_unit_bits(trace: &TrafficTrace, tb: Nanos) -> Vec<f64> {
    let mut v = vec![0.0; trace.duration_ns().div_ceil(tb) as usize];
    for e in trace.events() {
        v[(e.arrival_ns / tb) as usize] += e.size_bits as f64;
    }
    v
}

/// Hurst estimate over the first `units` burst units, `None` when the
/// prefix is too short or flat to fit.
fn prefix_hurst(unit_bits: &[f64], units: usize, tick_secs: f64) -> Option<f64> {
    let series = LoadSeries::new(tick_secs, unit_bits[..units.min(unit_bits.len())].to_vec());
    estimate_hurst(&series).ok().map(|e| e.h_reported)
}
