//! Cross-product parameter sweeps.
//!
//! Points are evaluated on the rayon pool and written in grid order (first
//! axis outermost). Traces are synthesized once per distinct trace-relevant
//! parameter set and shared between points. A failing point keeps its row,
//! with the message in the `error` column.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Result};
use rayon::prelude::*;

use eeep_core::theory::{self, efficiencies};
use eeep_core::{Policy, Simulator, TrafficTrace};

use crate::commands::{compare, energy_gain, find};
use crate::config::{Settings, SweepMode};
use crate::Outcome;

const PER_POLICY: &[&str] = &[
    "quiet_fraction",
    "energy_j",
    "eeep_usage",
    "delayed_window_fraction",
    "mean_delay_s",
    "max_delay_s",
    "overloaded_units",
];

const THEORY_COLUMNS: &[&str] = &[
    "eta_on", "eta_eee", "eta_eeep", "p_eee", "p_eeep", "p_u", "e_eee", "e_u", "tg", "eg",
];

/// Grid points, first axis outermost.
pub fn grid(axes: &[(String, Vec<String>)]) -> Vec<Vec<(String, String)>> {
    let mut points = vec![Vec::new()];
    for (key, values) in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((key.clone(), v.clone()));
                    q
                })
            })
            .collect();
    }
    points
}

fn point_settings(base: &Settings, point: &[(String, String)]) -> Result<Settings> {
    let mut s = base.clone();
    s.axes.clear();
    for (k, v) in point {
        s.set(k, v)?;
    }
    Ok(s)
}

/// Parameters that determine the trace.
fn trace_key(s: &Settings) -> BTreeMap<String, String> {
    s.echo()
        .into_iter()
        .filter(|(k, _)| k.starts_with("trace.") || k == "seed" || k == "link.rate_bps")
        .collect()
}

struct Row {
    cells: Vec<String>,
    error: Option<String>,
    overload: bool,
}

impl Row {
    fn failed(width: usize, msg: String) -> Self {
        Self {
            cells: vec![String::new(); width],
            error: Some(msg),
            overload: false,
        }
    }
}

fn cell(x: f64) -> String {
    x.to_string()
}

fn sim_columns(policies: &[Policy]) -> Vec<String> {
    let mut cols: Vec<String> = policies
        .iter()
        .flat_map(|p| PER_POLICY.iter().map(move |c| format!("{}_{c}", p.name())))
        .collect();
    if policies.contains(&Policy::Eeep) {
        cols.push("non_delayed_fraction".into());
    }
    if policies.contains(&Policy::Eee) && policies.contains(&Policy::Eeep) {
        cols.extend(["eg", "tg", "eg_theory"].map(String::from));
    }
    cols
}

fn sim_row(s: &Settings, trace: &TrafficTrace, policies: &[Policy], width: usize) -> Row {
    let cfg = match s.resolve() {
        Ok(c) => c,
        Err(e) => return Row::failed(width, format!("{e:#}")),
    };
    let sim = Simulator::new(cfg.link, cfg.strategy);
    let mut results = Vec::new();
    for &p in policies {
        match sim.run(p, trace) {
            Ok(o) => results.push(o.result),
            Err(e) => return Row::failed(width, format!("{p}: {e}")),
        }
    }
    let mut cells = Vec::with_capacity(width);
    for r in &results {
        cells.extend([
            cell(r.quiet_fraction),
            cell(r.energy_j),
            cell(r.eeep_usage),
            cell(r.delayed_window_fraction),
            cell(r.mean_packet_delay_s),
            cell(r.max_packet_delay_s),
            r.overloaded_units.to_string(),
        ]);
    }
    let mut error = None;
    if let Some(eeep) = find(&results, Policy::Eeep) {
        cells.push(cell(1.0 - eeep.delayed_window_fraction));
        if let Some(eee) = find(&results, Policy::Eee) {
            cells.push(cell(energy_gain(eee, eeep)));
            cells.push(cell(
                (eeep.quiet_fraction - eee.quiet_fraction) / eee.quiet_fraction,
            ));
            match compare(trace, &sim, &results).map(|(_, b)| b) {
                Some(Ok((b, _))) => cells.push(cell(b.eg)),
                Some(Err(e)) => {
                    cells.push(String::new());
                    error = Some(format!("theory: {e}"));
                }
                None => cells.push(String::new()),
            }
        }
    }
    Row {
        cells,
        error,
        overload: results.iter().any(|r| r.overload),
    }
}

fn theory_row(s: &Settings, width: usize) -> Row {
    let inp = match s.resolve() {
        Ok(c) => c.theory,
        Err(e) => return Row::failed(width, format!("{e:#}")),
    };
    let eta = efficiencies(&inp);
    let mut cells = vec![cell(eta.on), cell(eta.eee), cell(eta.eeep)];
    let mut error = None;
    match theory::bounds_report(&inp) {
        Ok(b) => cells.extend([b.p_eee, b.p_eeep, b.p_u, b.e_eee, b.e_u, b.tg, b.eg].map(cell)),
        Err(e) => {
            cells.resize(width, String::new());
            error = Some(e.to_string());
        }
    }
    Row {
        cells,
        error,
        overload: false,
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn run(base: &Settings, policies: &[Policy], out: &Path) -> Result<Outcome> {
    if base.axes.is_empty() {
        bail!("sweep needs at least one sweep.<key> = v1,v2,... axis");
    }
    let mode = base.resolve()?.mode;
    let points = grid(&base.axes);
    let settings: Vec<Result<Settings>> = points.iter().map(|p| point_settings(base, p)).collect();

    let columns = match mode {
        SweepMode::Sim => sim_columns(policies),
        SweepMode::Theory => THEORY_COLUMNS.iter().map(|c| c.to_string()).collect(),
    };
    let width = columns.len();

    let rows: Vec<Row> = match mode {
        SweepMode::Theory => settings
            .par_iter()
            .map(|s| match s {
                Ok(s) => theory_row(s, width),
                Err(e) => Row::failed(width, format!("{e:#}")),
            })
            .collect(),
        SweepMode::Sim => {
            let mut keys: BTreeMap<BTreeMap<String, String>, usize> = BTreeMap::new();
            let mut sources = Vec::new();
            for s in settings.iter().flatten() {
                if let std::collections::btree_map::Entry::Vacant(e) = keys.entry(trace_key(s)) {
                    e.insert(sources.len());
                    sources.push(s.clone());
                }
            }
            let traces: Vec<Result<Arc<TrafficTrace>, String>> = sources
                .par_iter()
                .map(|s| {
                    s.resolve()
                        .and_then(|c| c.load_trace())
                        .map(Arc::new)
                        .map_err(|e| format!("{e:#}"))
                })
                .collect();
            settings
                .par_iter()
                .map(|s| {
                    let s = match s {
                        Ok(s) => s,
                        Err(e) => return Row::failed(width, format!("{e:#}")),
                    };
                    match &traces[keys[&trace_key(s)]] {
                        Ok(t) => sim_row(s, t, policies, width),
                        Err(e) => Row::failed(width, e.clone()),
                    }
                })
                .collect()
        }
    };

    let path = out.join("sweep.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
    let mut header: Vec<String> = base.axes.iter().map(|(k, _)| k.clone()).collect();
    header.extend(columns);
    header.push("error".into());
    writeln!(w, "{}", header.join(","))?;
    let mut flagged = false;
    for (point, row) in points.iter().zip(&rows) {
        flagged |= row.error.is_some() || row.overload;
        let mut fields: Vec<String> = point.iter().map(|(_, v)| csv_field(v)).collect();
        fields.extend(row.cells.iter().cloned());
        fields.push(csv_field(row.error.as_deref().unwrap_or("")));
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()?;
    println!("{} points -> {}", rows.len(), path.display());
    Ok(if flagged {
        Outcome::Flagged
    } else {
        Outcome::Clean
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_row_major() {
        let axes = vec![
            ("a".to_string(), vec!["1".to_string(), "2".to_string()]),
            (
                "b".to_string(),
                vec!["x".to_string(), "y".to_string(), "z".to_string()],
            ),
        ];
        let g = grid(&axes);
        assert_eq!(g.len(), 6);
        assert_eq!(
            g[0],
            vec![("a".into(), "1".into()), ("b".into(), "x".into())]
        );
        assert_eq!(
            g[3],
            vec![("a".into(), "2".into()), ("b".into(), "x".into())]
        );
        assert!(grid(&[]).len() == 1);
    }

    #[test]
    fn field_quoting() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a, b"), "\"a, b\"");
    }
}
