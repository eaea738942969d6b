use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use eeep_core::link::write_windows_csv;
use eeep_core::selfsim::SelfSimError;
use eeep_core::theory::{self, BoundsReport};
use eeep_core::traffic::{bin_trace, write_packets_csv};
use eeep_core::{estimate_hurst, Policy, SimResult, Simulator, TheoryInputs, TrafficTrace};

use crate::config::Settings;
use crate::Outcome;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn synth(s: &Settings, out: &Path) -> Result<Outcome> {
    let cfg = s.resolve()?;
    let trace = cfg.load_trace()?;
    let mut w = create(out, "trace.csv")?;
    write_packets_csv(&trace, &mut w)?;
    w.flush()?;
    println!("packets      {}", trace.len());
    println!("total bits   {}", trace.total_bits());
    println!("mean size    {:.1} bits", trace.mean_packet_bits());
    println!("duration     {} s", trace.duration_secs());
    println!("load         {:.4}", trace.offered_load());
    Ok(Outcome::Clean)
}

#[derive(Serialize)]
struct HurstReport<'a> {
    params: BTreeMap<String, String>,
    trace: &'a str,
    tick_s: f64,
    bins: usize,
    h_hat: f64,
    h_reported: f64,
    beta_hat: f64,
    r_squared: f64,
    skipped_levels: Vec<usize>,
}

pub fn analyze(s: &Settings, out: &Path) -> Result<Outcome> {
    let cfg = s.resolve()?;
    let trace = cfg.load_trace()?;
    let series = bin_trace(&trace, cfg.analyze_tick_s)?;
    let est = estimate_hurst(&series).map_err(|e| match e {
        SelfSimError::TooFewPoints(_) | SelfSimError::DegenerateAbscissae => {
            anyhow::anyhow!("degenerate series: {e}")
        }
        other => other.into(),
    })?;

    let mut w = create(out, "variance_time.csv")?;
    writeln!(w, "a,log10_a,log10_var")?;
    for p in &est.points {
        writeln!(w, "{},{},{}", p.a, p.log10_a, p.log10_var)?;
    }
    w.flush()?;
    write_json(
        out,
        "hurst.json",
        &HurstReport {
            params: s.echo(),
            trace: trace.label(),
            tick_s: cfg.analyze_tick_s,
            bins: series.len(),
            h_hat: est.h_hat,
            h_reported: est.h_reported,
            beta_hat: est.beta_hat,
            r_squared: est.r_squared,
            skipped_levels: est.skipped_levels.clone(),
        },
    )?;
    println!("H      {:.4}", est.h_reported);
    println!("beta   {:.4}", est.beta_hat);
    println!("R^2    {:.4}", est.r_squared);
    Ok(Outcome::Clean)
}

/// Simulated minus closed-form figures.
#[derive(Debug, Serialize)]
pub struct Deltas {
    pub p_eee: f64,
    pub p_u: f64,
    pub e_eee: f64,
    pub e_u: f64,
    pub eg: f64,
}

#[derive(Serialize)]
struct TheoryBlock {
    inputs: TheoryInputs,
    #[serde(skip_serializing_if = "Option::is_none")]
    bounds: Option<BoundsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    deltas: Option<Deltas>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct SimulateReport {
    params: BTreeMap<String, String>,
    trace: String,
    offered_load: f64,
    results: Vec<SimResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theory: Option<TheoryBlock>,
}

pub fn find(results: &[SimResult], p: Policy) -> Option<&SimResult> {
    results.iter().find(|r| r.policy == p)
}

pub type Comparison = Result<(BoundsReport, Option<Deltas>), theory::TheoryError>;

/// Measured-vs-closed-form comparison; needs the EEEP run for U and tau.
pub fn compare(
    trace: &TrafficTrace,
    sim: &Simulator,
    results: &[SimResult],
) -> Option<(TheoryInputs, Comparison)> {
    let eeep = find(results, Policy::Eeep)?;
    let inputs = TheoryInputs::measured(trace, &sim.params, &sim.cfg, Some(eeep));
    let bounds = theory::bounds_report(&inputs).map(|b| {
        let deltas = find(results, Policy::Eee).map(|eee| Deltas {
            p_eee: eee.quiet_fraction - b.p_eee,
            p_u: eeep.quiet_fraction - b.p_u,
            e_eee: eee.energy_j - b.e_eee,
            e_u: eeep.energy_j - b.e_u,
            eg: energy_gain(eee, eeep) - b.eg,
        });
        (b, deltas)
    });
    Some((inputs, bounds))
}

pub fn energy_gain(eee: &SimResult, eeep: &SimResult) -> f64 {
    (eee.energy_j - eeep.energy_j) / eee.energy_j
}

pub fn simulate(s: &Settings, policies: &[Policy], out: &Path) -> Result<Outcome> {
    let cfg = s.resolve()?;
    let trace = cfg.load_trace()?;
    let sim = Simulator::new(cfg.link.clone(), cfg.strategy.clone());
    let mut results = Vec::new();
    for &p in policies {
        let o = sim.run(p, &trace).with_context(|| format!("policy {p}"))?;
        if p != Policy::AlwaysOn {
            let mut w = create(out, &format!("windows_{}.csv", p.name()))?;
            write_windows_csv(&o.result.windows, &mut w)?;
            w.flush()?;
        }
        if let Some(pred) = &o.predictor {
            let mut w = create(out, "table_eeep.csv")?;
            pred.table.write_csv(&mut w)?;
            w.flush()?;
        }
        println!(
            "{:<5} quiet {:.4}  energy {:.3} J  usage {:.3}{}",
            p.name(),
            o.result.quiet_fraction,
            o.result.energy_j,
            o.result.eeep_usage,
            if o.result.overload { "  OVERLOAD" } else { "" }
        );
        results.push(o.result);
    }

    let theory = compare(&trace, &sim, &results).map(|(inputs, r)| match r {
        Ok((b, deltas)) => {
            println!(
                "theory quiet EEE {:.4}  U {:.4}  EG {:.4}",
                b.p_eee, b.p_u, b.eg
            );
            TheoryBlock {
                inputs,
                bounds: Some(b),
                deltas,
                error: None,
            }
        }
        Err(e) => TheoryBlock {
            inputs,
            bounds: None,
            deltas: None,
            error: Some(e.to_string()),
        },
    });
    if let (Some(eee), Some(eeep)) = (find(&results, Policy::Eee), find(&results, Policy::Eeep)) {
        println!("EG sim {:.4}", energy_gain(eee, eeep));
    }
    let overload = results.iter().any(|r| r.overload);
    write_json(
        out,
        "simulate.json",
        &SimulateReport {
            params: s.echo(),
            trace: trace.label().to_string(),
            offered_load: trace.offered_load(),
            results,
            theory,
        },
    )?;
    Ok(if overload {
        Outcome::Flagged
    } else {
        Outcome::Clean
    })
}
