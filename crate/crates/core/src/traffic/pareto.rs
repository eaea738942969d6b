use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{PacketEvent, TrafficError, TrafficTrace};
use crate::time::{secs_to_nanos, Nanos};

/// Inverse-CDF draw from the Pareto law `P[C <= t] = 1 - (b/t)^alpha`, `t >= b`.
pub fn pareto_sample(alpha: f64, b: f64, u: f64) -> Result<f64, TrafficError> {
    if !(alpha > 0.0) {
        return Err(TrafficError::InvalidTailIndex(alpha));
    }
    if !(b > 0.0) {
        return Err(TrafficError::InvalidLocation(b));
    }
    if !(u > 0.0 && u <= 1.0) {
        return Err(TrafficError::InvalidUniform(u));
    }
    Ok(b * u.powf(-1.0 / alpha))
}

/// A population of `sources` independent Pareto ON/OFF sources.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParetoSourceConfig {
    pub sources: usize,
    pub alpha: f64,
    /// Location parameter, in ticks.
    pub location: f64,
    pub packet_size_bits: u64,
    pub seed: u64,
}

impl ParetoSourceConfig {
    pub fn validate(&self) -> Result<(), TrafficError> {
        if !(self.alpha > 0.0) {
            return Err(TrafficError::InvalidTailIndex(self.alpha));
        }
        if !(self.location > 0.0) {
            return Err(TrafficError::InvalidLocation(self.location));
        }
        if self.packet_size_bits == 0 {
            return Err(TrafficError::InvalidPacketSize);
        }
        Ok(())
    }
}

/// Named trace families. `AHigh`/`ALow` are the ten-source sets with
/// `alpha = 1` and `alpha = 1.8`; `BRandom` draws `M ~ U(30, 70)` and
/// `alpha ~ U(1.2, 1.6)` from the seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthPreset {
    AHigh,
    ALow,
    BRandom,
}

impl SynthPreset {
    pub fn parse(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "a-high" | "a_high" | "ahigh" => Some(Self::AHigh),
            "a-low" | "a_low" | "alow" => Some(Self::ALow),
            "b-random" | "b_random" | "brandom" => Some(Self::BRandom),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::AHigh => "A-high",
            Self::ALow => "A-low",
            Self::BRandom => "B-random",
        }
    }

    pub fn source_config(self, seed: u64) -> ParetoSourceConfig {
        let (sources, alpha) = match self {
            Self::AHigh => (10, 1.0),
            Self::ALow => (10, 1.8),
            Self::BRandom => {
                // Separate stream so the per-source draws are not shifted.
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_b0b0_u64);
                (rng.gen_range(30..=70), rng.gen_range(1.2..=1.6))
            }
        };
        ParetoSourceConfig {
            sources,
            alpha,
            location: 1.0,
            packet_size_bits: 8000,
            seed,
        }
    }
}

/// Superposes `cfg.sources` strictly alternating ON/OFF sources on a
/// `tick`-spaced grid. Each period length is a Pareto draw rounded up to a
/// whole number of ticks; an ON tick emits one `packet_size_bits` packet at
/// the tick start.
pub fn synthesize_trace(
    cfg: &ParetoSourceConfig,
    duration_secs: f64,
    tick_secs: f64,
    line_rate_bps: u64,
) -> Result<TrafficTrace, TrafficError> {
    cfg.validate()?;
    let duration_ns = secs_to_nanos(duration_secs);
    if duration_ns == 0 {
        return Err(TrafficError::ZeroDuration);
    }
    let tick_ns = secs_to_nanos(tick_secs);
    if !(tick_secs > 0.0) || tick_ns == 0 {
        return Err(TrafficError::InvalidTick(tick_secs));
    }
    let ticks = duration_ns.div_ceil(tick_ns) as usize;

    // diff[t] accumulates +1 where an ON period starts and -1 where it ends.
    let mut diff = vec![0i64; ticks + 1];
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.sources {
        let mut rng = ChaCha8Rng::seed_from_u64(master.gen());
        let mut on = rng.gen_bool(0.5);
        let mut t = 0usize;
        while t < ticks {
            // gen::<f64>() is in [0, 1); flip to (0, 1].
            let u = 1.0 - rng.gen::<f64>();
            let len = pareto_sample(cfg.alpha, cfg.location, u)?.ceil().max(1.0);
            let end = if len >= (ticks - t) as f64 {
                ticks
            } else {
                t + len as usize
            };
            if on {
                diff[t] += 1;
                diff[end] -= 1;
            }
            t = end;
            on = !on;
        }
    }

    let mut events = Vec::new();
    let mut active = 0i64;
    for (tick, d) in diff.iter().take(ticks).enumerate() {
        active += d;
        let arrival_ns = tick as Nanos * tick_ns;
        for _ in 0..active {
            events.push(PacketEvent {
                arrival_ns,
                size_bits: cfg.packet_size_bits,
            });
        }
    }
    let label = format!("synth-M{}-a{}-s{}", cfg.sources, cfg.alpha, cfg.seed);
    TrafficTrace::new(events, duration_ns, line_rate_bps, label)
}

/// Control trace with no long-range dependence: in every tick each of
/// `sources` sources independently emits a packet with probability `p_on`.
pub fn synthesize_iid_trace(
    sources: usize,
    p_on: f64,
    packet_size_bits: u64,
    seed: u64,
    duration_secs: f64,
    tick_secs: f64,
    line_rate_bps: u64,
) -> Result<TrafficTrace, TrafficError> {
    if packet_size_bits == 0 {
        return Err(TrafficError::InvalidPacketSize);
    }
    let duration_ns = secs_to_nanos(duration_secs);
    let tick_ns = secs_to_nanos(tick_secs);
    if tick_ns == 0 {
        return Err(TrafficError::InvalidTick(tick_secs));
    }
    let ticks = duration_ns.div_ceil(tick_ns);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::new();
    for tick in 0..ticks {
        for _ in 0..sources {
            if rng.gen_bool(p_on.clamp(0.0, 1.0)) {
                events.push(PacketEvent {
                    arrival_ns: tick * tick_ns,
                    size_bits: packet_size_bits,
                });
            }
        }
    }
    TrafficTrace::new(
        events,
        duration_ns,
        line_rate_bps,
        format!("iid-M{sources}-s{seed}"),
    )
}
