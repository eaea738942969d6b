//! Integer nanosecond time base shared by the trace and link layers.

/// Nanoseconds since trace start.
pub type Nanos = u64;

pub const NANOS_PER_SEC: u64 = 1_000_000_000;

/// Converts seconds to the nearest whole nanosecond. Negative and NaN inputs map to 0.
pub fn secs_to_nanos(secs: f64) -> Nanos {
    if secs.is_nan() || secs <= 0.0 {
        0
    } else {
        (secs * NANOS_PER_SEC as f64).round() as Nanos
    }
}

pub fn millis_to_nanos(ms: f64) -> Nanos {
    secs_to_nanos(ms / 1e3)
}

pub fn nanos_to_secs(ns: Nanos) -> f64 {
    ns as f64 / NANOS_PER_SEC as f64
}

/// Serialization time of `bits` at `rate_bps`, rounded up to a whole nanosecond.
pub fn serialization_nanos(bits: u64, rate_bps: u64) -> Nanos {
    debug_assert!(rate_bps > 0);
    let num = bits as u128 * NANOS_PER_SEC as u128;
    num.div_ceil(rate_bps as u128) as Nanos
}
