//! Packet traces, synthetic self-similar sources and load series.

mod io;
mod pareto;

pub use io::{ingest_trace_file, parse_packets_csv, write_packets_csv, IngestError, TraceFormat};
pub use pareto::{
    pareto_sample, synthesize_iid_trace, synthesize_trace, ParetoSourceConfig, SynthPreset,
};

use serde::Serialize;
use thiserror::Error;

use crate::time::{nanos_to_secs, secs_to_nanos, Nanos};

#[derive(Debug, Error, PartialEq)]
pub enum TrafficError {
    #[error("packet {index} has zero size")]
    ZeroSize { index: usize },
    #[error("packet {index} arrives at {arrival_ns} ns, before its predecessor")]
    Unsorted { index: usize, arrival_ns: Nanos },
    #[error(
        "packet {index} arrives at {arrival_ns} ns, not before the trace end {duration_ns} ns"
    )]
    BeyondDuration {
        index: usize,
        arrival_ns: Nanos,
        duration_ns: Nanos,
    },
    #[error("trace duration must be positive")]
    ZeroDuration,
    #[error("line rate must be positive")]
    ZeroLineRate,
    #[error("tick must be positive, got {0} s")]
    InvalidTick(f64),
    #[error("aggregation level must be at least 1")]
    InvalidAggregation,
    #[error("pareto sample needs u in (0, 1], got {0}")]
    InvalidUniform(f64),
    #[error("pareto tail index must be positive, got {0}")]
    InvalidTailIndex(f64),
    #[error("pareto location must be positive, got {0}")]
    InvalidLocation(f64),
    #[error("packet size must be positive")]
    InvalidPacketSize,
}

/// One packet arrival on the egress queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PacketEvent {
    pub arrival_ns: Nanos,
    pub size_bits: u64,
}

/// Ordered packet arrivals plus the metadata every policy needs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficTrace {
    events: Vec<PacketEvent>,
    duration_ns: Nanos,
    line_rate_bps: u64,
    label: String,
}

impl TrafficTrace {
    /// Builds a trace, checking sortedness, positive sizes and that every
    /// arrival falls strictly inside `[0, duration)`.
    pub fn new(
        events: Vec<PacketEvent>,
        duration_ns: Nanos,
        line_rate_bps: u64,
        label: impl Into<String>,
    ) -> Result<Self, TrafficError> {
        if duration_ns == 0 {
            return Err(TrafficError::ZeroDuration);
        }
        if line_rate_bps == 0 {
            return Err(TrafficError::ZeroLineRate);
        }
        let mut prev = 0;
        for (index, ev) in events.iter().enumerate() {
            if ev.size_bits == 0 {
                return Err(TrafficError::ZeroSize { index });
            }
            if ev.arrival_ns < prev {
                return Err(TrafficError::Unsorted {
                    index,
                    arrival_ns: ev.arrival_ns,
                });
            }
            if ev.arrival_ns >= duration_ns {
                return Err(TrafficError::BeyondDuration {
                    index,
                    arrival_ns: ev.arrival_ns,
                    duration_ns,
                });
            }
            prev = ev.arrival_ns;
        }
        Ok(Self {
            events,
            duration_ns,
            line_rate_bps,
            label: label.into(),
        })
    }

    pub fn events(&self) -> &[PacketEvent] {
        &self.events
    }

    pub fn duration_ns(&self) -> Nanos {
        self.duration_ns
    }

    pub fn duration_secs(&self) -> f64 {
        nanos_to_secs(self.duration_ns)
    }

    pub fn line_rate_bps(&self) -> u64 {
        self.line_rate_bps
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn total_bits(&self) -> u64 {
        self.events.iter().map(|e| e.size_bits).sum()
    }

    /// Mean packet size in bits, 0 for an empty trace.
    pub fn mean_packet_bits(&self) -> f64 {
        if self.events.is_empty() {
            0.0
        } else {
            self.total_bits() as f64 / self.events.len() as f64
        }
    }

    /// Fraction of the line capacity used over the whole trace.
    pub fn offered_load(&self) -> f64 {
        self.total_bits() as f64 / (self.line_rate_bps as f64 * self.duration_secs())
    }

    /// Total bits with arrival in `[from, to)`.
    pub fn bits_between(&self, from: Nanos, to: Nanos) -> u64 {
        let lo = self.events.partition_point(|e| e.arrival_ns < from);
        let hi = self.events.partition_point(|e| e.arrival_ns < to);
        self.events[lo..hi.max(lo)]
            .iter()
            .map(|e| e.size_bits)
            .sum()
    }

    /// Number of packets with arrival in `[from, to)`.
    pub fn count_between(&self, from: Nanos, to: Nanos) -> usize {
        let lo = self.events.partition_point(|e| e.arrival_ns < from);
        let hi = self.events.partition_point(|e| e.arrival_ns < to);
        hi.saturating_sub(lo)
    }
}

/// Bits per tick, the discrete process the estimators work on.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadSeries {
    pub tick_secs: f64,
    pub values: Vec<f64>,
}

impl LoadSeries {
    pub fn new(tick_secs: f64, values: Vec<f64>) -> Self {
        Self { tick_secs, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.sum() / self.values.len() as f64
        }
    }
}

/// Sums packet bits into `[i·tick, (i+1)·tick)` bins covering the whole trace.
pub fn bin_trace(trace: &TrafficTrace, tick_secs: f64) -> Result<LoadSeries, TrafficError> {
    let tick_ns = secs_to_nanos(tick_secs);
    if !(tick_secs > 0.0) || tick_ns == 0 {
        return Err(TrafficError::InvalidTick(tick_secs));
    }
    let bins = trace.duration_ns().div_ceil(tick_ns) as usize;
    let mut values = vec![0.0; bins];
    for ev in trace.events() {
        values[(ev.arrival_ns / tick_ns) as usize] += ev.size_bits as f64;
    }
    Ok(LoadSeries::new(tick_secs, values))
}

/// Block means over non-overlapping blocks of `a` ticks; a trailing partial
/// block is dropped.
pub fn aggregate_series(series: &LoadSeries, a: usize) -> Result<LoadSeries, TrafficError> {
    if a == 0 {
        return Err(TrafficError::InvalidAggregation);
    }
    if a == 1 {
        return Ok(series.clone());
    }
    let values = series
        .values
        .chunks_exact(a)
        .map(|block| block.iter().sum::<f64>() / a as f64)
        .collect();
    Ok(LoadSeries::new(series.tick_secs * a as f64, values))
}
