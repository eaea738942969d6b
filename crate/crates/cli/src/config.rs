//! Flat `section.key = value` experiment configuration.
//!
//! Every key has a default, so a resolved parameter map always lists the
//! complete parameter set; reports echo it verbatim. Sweep axes are written
//! as `sweep.<key> = v1,v2,...` and keep their declaration order.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};

use eeep_core::time::millis_to_nanos;
use eeep_core::traffic::{synthesize_iid_trace, synthesize_trace, SynthPreset, TraceFormat};
use eeep_core::{
    LinkParams, ParetoSourceConfig, PredictionConfig, StrategyConfig, TheoryInputs, TrafficTrace,
};

/// Known keys and their defaults.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "1"),
    ("trace.preset", "A-high"),
    ("trace.file", ""),
    ("trace.strict", "false"),
    ("trace.M", "10"),
    ("trace.alpha", "1.4"),
    ("trace.b", "1"),
    ("trace.packet_bits", "8000"),
    ("trace.p_on", "0.5"),
    ("trace.duration_s", "200"),
    ("trace.tick_ms", "1"),
    ("analyze.tick_ms", "1"),
    ("link.rate_bps", "1000000000"),
    ("link.t_s_ms", "0.202"),
    ("link.t_w_ms", "0.0165"),
    ("link.t_r_ms", "0.2"),
    ("link.refresh_period_ms", "20"),
    ("link.pw_on", "0.697"),
    ("link.pw_off", "0.053"),
    ("strategy.T_ms", "100"),
    ("strategy.T_prime_ms", "50"),
    ("strategy.T_B_ms", "1"),
    ("strategy.model_faithful_eee", "true"),
    ("strategy.refresh", "false"),
    ("predict.theta", "0.05"),
    ("predict.H_bar", "0.6"),
    ("predict.h", "10"),
    ("predict.p_tau", "0"),
    ("predict.hurst_recheck_windows", "50"),
    ("theory.n_bar", "13.3"),
    ("theory.t_pack_us", "5.68"),
    ("theory.tau_ms", "3.8"),
    ("theory.usage", "0.827"),
    ("theory.L_s", "200"),
    ("sweep.mode", "sim"),
];

pub fn is_known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

/// Raw settings: resolved values plus sweep axes.
#[derive(Debug, Clone)]
pub struct Settings {
    values: BTreeMap<String, String>,
    pub axes: Vec<(String, Vec<String>)>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            values: KEYS
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            axes: Vec::new(),
        }
    }
}

impl Settings {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.apply_assignment(line)
                .with_context(|| format!("{origin}:{}", i + 1))?;
        }
        Ok(())
    }

    pub fn apply_assignment(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| anyhow!("expected key=value, got {assignment:?}"))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if let Some(param) = key.strip_prefix("sweep.").filter(|p| *p != "mode") {
            if !is_known(param) || param.starts_with("sweep.") {
                bail!("sweep axis {param:?} is not a known parameter");
            }
            let values: Vec<String> = value
                .split(',')
                .map(|v| v.trim().to_string())
                .filter(|v| !v.is_empty())
                .collect();
            if values.is_empty() {
                bail!("sweep axis {param:?} has no values");
            }
            match self.axes.iter_mut().find(|(k, _)| k == param) {
                Some(axis) => axis.1 = values,
                None => self.axes.push((param.to_string(), values)),
            }
            return Ok(());
        }
        if !is_known(key) {
            bail!("unknown parameter {key:?}");
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("unregistered key {key}"))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.get(key);
        v.parse()
            .map_err(|e| anyhow!("parameter {key} = {v:?}: {e}"))
    }

    /// Full parameter echo, sweep axes included.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = self.values.clone();
        for (k, vs) in &self.axes {
            m.insert(format!("sweep.{k}"), vs.join(","));
        }
        m
    }

    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let preset = self.get("trace.preset");
        let file = self.get("trace.file");
        let source = match (file.is_empty(), self.values_differ("trace.preset")) {
            (false, true) => bail!("give either trace.file or trace.preset, not both"),
            (false, false) => TraceSource::File(PathBuf::from(file)),
            (true, _) => TraceSource::Synth(self.synth_setup(preset)?),
        };
        let link = LinkParams {
            line_rate_bps: self.parse("link.rate_bps")?,
            t_s: ms(self.parse("link.t_s_ms")?),
            t_w: ms(self.parse("link.t_w_ms")?),
            t_r: ms(self.parse("link.t_r_ms")?),
            refresh_period: ms(self.parse("link.refresh_period_ms")?),
            pw_on: self.parse("link.pw_on")?,
            pw_off: self.parse("link.pw_off")?,
        };
        link.validate()?;
        let strategy = StrategyConfig {
            window: ms(self.parse("strategy.T_ms")?),
            learn: ms(self.parse("strategy.T_prime_ms")?),
            burst: ms(self.parse("strategy.T_B_ms")?),
            prediction: PredictionConfig {
                theta: self.parse("predict.theta")?,
                h_bar: self.parse("predict.H_bar")?,
                levels: self.parse("predict.h")?,
                p_tau: self.parse("predict.p_tau")?,
                hurst_recheck_windows: self.parse("predict.hurst_recheck_windows")?,
            },
            model_faithful_eee: self.parse("strategy.model_faithful_eee")?,
            refresh_enabled: self.parse("strategy.refresh")?,
        };
        strategy.validate(&link)?;
        let theory = TheoryInputs {
            n_bar: self.parse("theory.n_bar")?,
            t_pack: self.parse::<f64>("theory.t_pack_us")? * 1e-6,
            tau_bar: self.parse::<f64>("theory.tau_ms")? * 1e-3,
            usage: self.parse("theory.usage")?,
            duration: self.parse("theory.L_s")?,
            ..TheoryInputs::from_link(&link, &strategy, 0.0, 0.0, 0.0)
        }
        .with_p_tau(strategy.prediction.p_tau);
        let mode = match self.get("sweep.mode") {
            "sim" => SweepMode::Sim,
            "theory" => SweepMode::Theory,
            other => bail!("sweep.mode must be sim or theory, got {other:?}"),
        };
        Ok(ExperimentConfig {
            source,
            link,
            strategy,
            theory,
            seed: self.parse("seed")?,
            analyze_tick_s: self.parse::<f64>("analyze.tick_ms")? * 1e-3,
            strict: self.parse("trace.strict")?,
            mode,
        })
    }

    fn values_differ(&self, key: &str) -> bool {
        KEYS.iter()
            .find(|(k, _)| *k == key)
            .is_some_and(|(_, d)| self.get(key) != *d)
    }

    fn synth_setup(&self, preset: &str) -> Result<SynthSetup> {
        let duration_s: f64 = self.parse("trace.duration_s")?;
        let tick_s = self.parse::<f64>("trace.tick_ms")? * 1e-3;
        let line_rate_bps: u64 = self.parse("link.rate_bps")?;
        let kind = match preset.to_ascii_lowercase().as_str() {
            "custom" => SynthKind::Pareto {
                sources: self.parse("trace.M")?,
                alpha: self.parse("trace.alpha")?,
                location: self.parse("trace.b")?,
                packet_bits: self.parse("trace.packet_bits")?,
            },
            "iid" => SynthKind::Iid {
                sources: self.parse("trace.M")?,
                p_on: self.parse("trace.p_on")?,
                packet_bits: self.parse("trace.packet_bits")?,
            },
            _ => SynthKind::Preset(SynthPreset::parse(preset).ok_or_else(|| {
                anyhow!("unknown trace.preset {preset:?} (A-high, A-low, B-random, custom, iid)")
            })?),
        };
        Ok(SynthSetup {
            kind,
            duration_s,
            tick_s,
            line_rate_bps,
        })
    }
}

fn ms(v: f64) -> u64 {
    millis_to_nanos(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    Sim,
    Theory,
}

#[derive(Debug, Clone)]
pub enum SynthKind {
    Preset(SynthPreset),
    Pareto {
        sources: usize,
        alpha: f64,
        location: f64,
        packet_bits: u64,
    },
    Iid {
        sources: usize,
        p_on: f64,
        packet_bits: u64,
    },
}

#[derive(Debug, Clone)]
pub struct SynthSetup {
    pub kind: SynthKind,
    pub duration_s: f64,
    pub tick_s: f64,
    pub line_rate_bps: u64,
}

#[derive(Debug, Clone)]
pub enum TraceSource {
    Synth(SynthSetup),
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub source: TraceSource,
    pub link: LinkParams,
    pub strategy: StrategyConfig,
    /// Inputs for theory-mode sweeps.
    pub theory: TheoryInputs,
    pub seed: u64,
    pub analyze_tick_s: f64,
    pub strict: bool,
    pub mode: SweepMode,
}

impl ExperimentConfig {
    pub fn load_trace(&self) -> Result<TrafficTrace> {
        match &self.source {
            TraceSource::File(path) => {
                eeep_core::traffic::ingest_trace_file(path, TraceFormat::PacketsCsv, self.strict)
                    .with_context(|| format!("reading {}", path.display()))
            }
            TraceSource::Synth(setup) => {
                let trace = match &setup.kind {
                    SynthKind::Preset(p) => synthesize_trace(
                        &p.source_config(self.seed),
                        setup.duration_s,
                        setup.tick_s,
                        setup.line_rate_bps,
                    ),
                    SynthKind::Pareto {
                        sources,
                        alpha,
                        location,
                        packet_bits,
                    } => synthesize_trace(
                        &ParetoSourceConfig {
                            sources: *sources,
                            alpha: *alpha,
                            location: *location,
                            packet_size_bits: *packet_bits,
                            seed: self.seed,
                        },
                        setup.duration_s,
                        setup.tick_s,
                        setup.line_rate_bps,
                    ),
                    SynthKind::Iid {
                        sources,
                        p_on,
                        packet_bits,
                    } => synthesize_iid_trace(
                        *sources,
                        *p_on,
                        *packet_bits,
                        self.seed,
                        setup.duration_s,
                        setup.tick_s,
                        setup.line_rate_bps,
                    ),
                };
                Ok(trace?)
            }
        }
    }
}
