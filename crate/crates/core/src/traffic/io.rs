//! `packets-csv` trace files.
//!
//! ```text
//! # line_rate_bps=1000000000 duration_s=200
//! time_ns,size_bits
//! 0,8000
//! 1000000,8000
//! ```
//!
//! The comment line is optional. Without it the line rate defaults to
//! 1 Gbit/s, arrival times are shifted so the first packet is at t = 0 and the
//! duration ends one nanosecond after the last arrival. With a `duration_s`
//! value the timestamps are taken verbatim.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

use super::{PacketEvent, TrafficError, TrafficTrace};
use crate::time::{nanos_to_secs, secs_to_nanos, Nanos};

pub const PACKETS_CSV_HEADER: &str = "time_ns,size_bits";
const DEFAULT_LINE_RATE_BPS: u64 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    PacketsCsv,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trace file has no packets and no declared duration")]
    Empty,
    #[error("line {line}: timestamp goes backwards")]
    NonMonotone { line: usize },
    #[error(transparent)]
    Trace(#[from] TrafficError),
}

fn parse_err(line: usize, message: impl Into<String>) -> IngestError {
    IngestError::Parse {
        line,
        message: message.into(),
    }
}

/// Reads a trace file. `strict` rejects out-of-order timestamps instead of
/// stably sorting them.
pub fn ingest_trace_file(
    path: impl AsRef<Path>,
    format: TraceFormat,
    strict: bool,
) -> Result<TrafficTrace, IngestError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match format {
        TraceFormat::PacketsCsv => parse_packets_csv(BufReader::new(file), &label, strict),
    }
}

pub fn parse_packets_csv<R: BufRead>(
    reader: R,
    label: &str,
    strict: bool,
) -> Result<TrafficTrace, IngestError> {
    let mut line_rate = DEFAULT_LINE_RATE_BPS;
    let mut duration: Option<Nanos> = None;
    let mut seen_header = false;
    let mut events = Vec::new();
    let mut sorted = true;

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if seen_header {
                continue;
            }
            for token in comment.split_whitespace() {
                let Some((key, value)) = token.split_once('=') else {
                    continue;
                };
                match key {
                    "line_rate_bps" => {
                        line_rate = value.parse().map_err(|_| {
                            parse_err(lineno, format!("bad line_rate_bps {value:?}"))
                        })?;
                    }
                    "duration_s" => {
                        let secs: f64 = value
                            .parse()
                            .map_err(|_| parse_err(lineno, format!("bad duration_s {value:?}")))?;
                        if !(secs > 0.0) {
                            return Err(parse_err(lineno, "duration_s must be positive"));
                        }
                        duration = Some(secs_to_nanos(secs));
                    }
                    _ => {}
                }
            }
            continue;
        }
        if !seen_header {
            if line.trim() != PACKETS_CSV_HEADER {
                return Err(parse_err(
                    lineno,
                    format!("expected header {PACKETS_CSV_HEADER:?}"),
                ));
            }
            seen_header = true;
            continue;
        }
        let (t, size) = line
            .split_once(',')
            .ok_or_else(|| parse_err(lineno, "expected two comma-separated fields"))?;
        let arrival_ns: Nanos = t
            .trim()
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad time_ns {t:?}")))?;
        let size_bits: u64 = size
            .trim()
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad size_bits {size:?}")))?;
        if size_bits == 0 {
            return Err(parse_err(lineno, "size_bits must be positive"));
        }
        if let Some(prev) = events
            .last()
            .map(|(e, _): &(PacketEvent, usize)| e.arrival_ns)
        {
            if arrival_ns < prev {
                if strict {
                    return Err(IngestError::NonMonotone { line: lineno });
                }
                sorted = false;
            }
        }
        events.push((
            PacketEvent {
                arrival_ns,
                size_bits,
            },
            lineno,
        ));
    }

    if !sorted {
        events.sort_by_key(|(e, _)| e.arrival_ns);
    }
    let mut events: Vec<PacketEvent> = events.into_iter().map(|(e, _)| e).collect();

    let duration_ns = match duration {
        Some(d) => d,
        None => {
            let (Some(first), Some(last)) = (events.first().copied(), events.last().copied())
            else {
                return Err(IngestError::Empty);
            };
            for e in &mut events {
                e.arrival_ns -= first.arrival_ns;
            }
            last.arrival_ns - first.arrival_ns + 1
        }
    };
    Ok(TrafficTrace::new(events, duration_ns, line_rate, label)?)
}

/// Writes a trace with its metadata comment so that reading it back yields
/// the identical trace.
pub fn write_packets_csv<W: Write>(trace: &TrafficTrace, mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "# line_rate_bps={} duration_s={}",
        trace.line_rate_bps(),
        nanos_to_secs(trace.duration_ns())
    )?;
    writeln!(out, "{PACKETS_CSV_HEADER}")?;
    for e in trace.events() {
        writeln!(out, "{},{}", e.arrival_ns, e.size_bits)?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str, strict: bool) -> Result<TrafficTrace, IngestError> {
        parse_packets_csv(s.as_bytes(), "t", strict)
    }

    #[test]
    fn two_rows() {
        let t = parse("time_ns,size_bits\n100,8000\n200,4000\n", true).unwrap();
        assert_eq!(t.len(), 2);
        // normalised to the first packet
        assert_eq!(t.events()[0].arrival_ns, 0);
        assert_eq!(t.events()[1].arrival_ns, 100);
        assert_eq!(t.duration_ns(), 101);
        assert_eq!(t.line_rate_bps(), 1_000_000_000);
    }

    #[test]
    fn negative_size_names_the_line() {
        let err = parse("time_ns,size_bits\n0,8000\n5,-3\n", true).unwrap_err();
        match err {
            IngestError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_comment_is_honoured() {
        let t = parse(
            "# line_rate_bps=10000000000 duration_s=0.5\ntime_ns,size_bits\n7,64\n",
            true,
        )
        .unwrap();
        assert_eq!(t.line_rate_bps(), 10_000_000_000);
        assert_eq!(t.duration_ns(), 500_000_000);
        assert_eq!(t.events()[0].arrival_ns, 7);
    }

    #[test]
    fn empty_inputs() {
        assert!(matches!(parse("", true), Err(IngestError::Empty)));
        assert!(matches!(
            parse("time_ns,size_bits\n", true),
            Err(IngestError::Empty)
        ));
        let t = parse("# duration_s=1\ntime_ns,size_bits\n", true).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn ordering_modes() {
        let body = "time_ns,size_bits\n10,1\n5,2\n20,3\n";
        assert!(matches!(
            parse(body, true),
            Err(IngestError::NonMonotone { line: 3 })
        ));
        let t = parse(body, false).unwrap();
        let sizes: Vec<u64> = t.events().iter().map(|e| e.size_bits).collect();
        assert_eq!(sizes, vec![2, 1, 3]);
    }

    #[test]
    fn missing_header_and_bad_rows() {
        assert!(matches!(
            parse("0,1\n", true),
            Err(IngestError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse("time_ns,size_bits\n0;1\n", true),
            Err(IngestError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse("time_ns,size_bits\n0,0\n", true),
            Err(IngestError::Parse { line: 2, .. })
        ));
        // arrival beyond a declared duration
        assert!(matches!(
            parse("# duration_s=0.000001\ntime_ns,size_bits\n5000,1\n", true),
            Err(IngestError::Trace(TrafficError::BeyondDuration { .. }))
        ));
    }

    #[test]
    fn export_then_ingest_is_identity() {
        let src = TrafficTrace::new(
            vec![
                PacketEvent {
                    arrival_ns: 3_000_000,
                    size_bits: 12_000,
                },
                PacketEvent {
                    arrival_ns: 3_000_000,
                    size_bits: 64,
                },
            ],
            2_000_000_000,
            1_000_000_000,
            "t",
        )
        .unwrap();
        let mut buf = Vec::new();
        write_packets_csv(&src, &mut buf).unwrap();
        let back = parse_packets_csv(buf.as_slice(), "t", true).unwrap();
        assert_eq!(back, src);
    }
}
