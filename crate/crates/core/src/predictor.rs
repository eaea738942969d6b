//! Online conditional-probability table of the next-interval traffic level.
//!
//! Each window contributes one observation: the bits seen in its learning
//! interval (`v1`) and in its prediction interval (`v2`). Both are mapped to
//! one of `h` levels using edges derived from the smallest and largest `v1`
//! seen so far, and `counts[l1][l2]` is incremented. Normalising each row of
//! the count matrix gives `P[L2 = l' | L1 = l]`.
//!
//! Levels are 1-based throughout the public API.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PredictorError {
    #[error("convergence threshold must be positive, got {0}")]
    Theta(f64),
    #[error("self-similarity gate must lie in [0.5, 1], got {0}")]
    HBar(f64),
    #[error("need at least 2 quantisation levels, got {0}")]
    Levels(usize),
    #[error("p_tau must be non-negative, got {0}")]
    PTau(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionConfig {
    /// Per-row L1 change below which the table counts as converged.
    pub theta: f64,
    /// Prediction is used only when the estimated Hurst parameter exceeds this.
    pub h_bar: f64,
    pub levels: usize,
    /// Safety extension of the predicted active tail, as a fraction of tau.
    pub p_tau: f64,
    /// Windows between re-estimates of the Hurst parameter after setup.
    pub hurst_recheck_windows: usize,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        Self {
            theta: 0.05,
            h_bar: 0.6,
            levels: 10,
            p_tau: 0.0,
            hurst_recheck_windows: 50,
        }
    }
}

impl PredictionConfig {
    pub fn validate(&self) -> Result<(), PredictorError> {
        if !(self.theta > 0.0) {
            return Err(PredictorError::Theta(self.theta));
        }
        if !(0.5..=1.0).contains(&self.h_bar) {
            return Err(PredictorError::HBar(self.h_bar));
        }
        if self.levels < 2 {
            return Err(PredictorError::Levels(self.levels));
        }
        if !(self.p_tau >= 0.0) {
            return Err(PredictorError::PTau(self.p_tau));
        }
        Ok(())
    }
}

/// Quantiser edges. Before the first observation `v_min = +inf` and
/// `v_max = -inf`, and every value maps to level 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantizerState {
    pub v_min: f64,
    pub v_max: f64,
    pub h: usize,
    pub mu: f64,
}

impl QuantizerState {
    pub fn empty(h: usize) -> Self {
        Self {
            v_min: f64::INFINITY,
            v_max: f64::NEG_INFINITY,
            h,
            mu: 0.0,
        }
    }

    pub fn with_bounds(v_min: f64, v_max: f64, h: usize) -> Self {
        let mut q = Self {
            v_min,
            v_max,
            h,
            mu: 0.0,
        };
        q.refresh_step();
        q
    }

    pub fn is_empty(&self) -> bool {
        self.v_max < self.v_min
    }

    fn refresh_step(&mut self) {
        self.mu = if self.v_max > self.v_min {
            (self.v_max - self.v_min) / self.h as f64
        } else {
            0.0
        };
    }

    /// Extends the traffic limits to cover `v`.
    pub fn widen(&mut self, v: f64) {
        self.v_min = self.v_min.min(v);
        self.v_max = self.v_max.max(v);
        self.refresh_step();
    }

    /// Lower edge of `level` (level >= 2).
    fn edge(&self, level: usize) -> f64 {
        self.v_min + (level - 1) as f64 * self.mu
    }

    /// Bin representative: midpoint for the bounded bins, `v_max` for the
    /// open top bin.
    pub fn representative(&self, level: usize) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        if level >= self.h {
            self.v_max
        } else {
            self.v_min + (level as f64 - 0.5) * self.mu
        }
    }
}

/// Maps a traffic volume to its level in `1..=h`.
pub fn quantize_level(v: f64, q: &QuantizerState) -> usize {
    if q.is_empty() || !(q.v_max > q.v_min) || !(q.mu > 0.0) {
        return 1;
    }
    let rel = (v - q.v_min) / q.mu;
    let mut level = if rel.is_nan() || rel < 1.0 {
        1
    } else {
        (rel.floor() as usize + 1).min(q.h)
    };
    // The float guess can be off by one at an edge; settle it on the edges themselves.
    while level > 1 && v < q.edge(level) {
        level -= 1;
    }
    while level < q.h && v >= q.edge(level + 1) {
        level += 1;
    }
    level
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowObservation {
    pub v1: f64,
    pub v2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CondProbTable {
    h: usize,
    counts: Vec<u64>,
    probs: Vec<f64>,
    last_probs: Option<Vec<f64>>,
    last_totals: Vec<u64>,
}

impl CondProbTable {
    pub fn new(h: usize) -> Self {
        Self {
            h,
            counts: vec![0; h * h],
            probs: vec![0.0; h * h],
            last_probs: None,
            last_totals: vec![0; h],
        }
    }

    pub fn levels(&self) -> usize {
        self.h
    }

    fn idx(&self, l1: usize, l2: usize) -> usize {
        debug_assert!((1..=self.h).contains(&l1) && (1..=self.h).contains(&l2));
        (l1 - 1) * self.h + (l2 - 1)
    }

    pub fn count(&self, l1: usize, l2: usize) -> u64 {
        self.counts[self.idx(l1, l2)]
    }

    pub fn prob(&self, l1: usize, l2: usize) -> f64 {
        self.probs[self.idx(l1, l2)]
    }

    pub fn row(&self, l1: usize) -> &[f64] {
        &self.probs[(l1 - 1) * self.h..l1 * self.h]
    }

    pub fn count_row(&self, l1: usize) -> &[u64] {
        &self.counts[(l1 - 1) * self.h..l1 * self.h]
    }

    pub fn row_total(&self, l1: usize) -> u64 {
        self.count_row(l1).iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn has_snapshot(&self) -> bool {
        self.last_probs.is_some()
    }

    /// Snapshots the current probabilities, counts one `(l1, l2)`
    /// transition and renormalises row `l1`.
    pub fn record(&mut self, l1: usize, l2: usize) {
        self.last_probs = Some(self.probs.clone());
        for l in 1..=self.h {
            self.last_totals[l - 1] = self.row_total(l);
        }
        let i = self.idx(l1, l2);
        self.counts[i] += 1;
        let start = (l1 - 1) * self.h;
        let total = self.row_total(l1) as f64;
        for j in start..start + self.h {
            self.probs[j] = self.counts[j] as f64 / total;
        }
    }

    /// True when every observed row moved by at most `theta` (L1) since the
    /// previous snapshot. Rows first observed in the latest update, and a
    /// table with no snapshot, count as not converged.
    pub fn has_converged(&self, theta: f64) -> bool {
        let Some(prev) = &self.last_probs else {
            return false;
        };
        let mut any = false;
        for l in 1..=self.h {
            if self.row_total(l) == 0 {
                continue;
            }
            if self.last_totals[l - 1] == 0 {
                return false;
            }
            any = true;
            let start = (l - 1) * self.h;
            let dist: f64 = (start..start + self.h)
                .map(|j| (self.probs[j] - prev[j]).abs())
                .sum();
            if dist > theta {
                return false;
            }
        }
        any
    }

    /// Count-weighted mean of `|l - argmax_l' P(l, l')|` over observed rows;
    /// small values mean the mass sits near the diagonal.
    pub fn mean_diagonal_offset(&self) -> Option<f64> {
        let mut weighted = 0.0;
        let mut weight = 0.0;
        for l in 1..=self.h {
            let n = self.row_total(l);
            if n == 0 {
                continue;
            }
            let row = self.count_row(l);
            let argmax = (0..self.h)
                .max_by_key(|&j| (row[j], std::cmp::Reverse(j)))
                .unwrap()
                + 1;
            weighted += n as f64 * (l as f64 - argmax as f64).abs();
            weight += n as f64;
        }
        (weight > 0.0).then(|| weighted / weight)
    }

    /// One CSV row per `l1`, columns `l2 = 1..h`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.h).map(|l| format!("p{l}")).collect();
        writeln!(out, "l1,n,{}", header.join(","))?;
        for l in 1..=self.h {
            let cells: Vec<String> = self.row(l).iter().map(|p| format!("{p}")).collect();
            writeln!(out, "{l},{},{}", self.row_total(l), cells.join(","))?;
        }
        Ok(())
    }
}

/// Widens the limits with `obs.v1`, then counts the quantised `(v1, v2)` pair.
pub fn observe_window(table: &mut CondProbTable, q: &mut QuantizerState, obs: WindowObservation) {
    q.widen(obs.v1);
    let l1 = quantize_level(obs.v1, q);
    let l2 = quantize_level(obs.v2, q);
    table.record(l1, l2);
}

pub fn has_converged(table: &CondProbTable, theta: f64) -> bool {
    table.has_converged(theta)
}

/// Expected bits in the prediction interval given learning-interval level
/// `l1`; `None` when that row has never been observed.
pub fn expected_future_load(table: &CondProbTable, q: &QuantizerState, l1: usize) -> Option<f64> {
    if table.row_total(l1) == 0 {
        return None;
    }
    Some(
        table
            .row(l1)
            .iter()
            .enumerate()
            .map(|(j, p)| p * q.representative(j + 1))
            .sum(),
    )
}

/// `(tau, delta_tau)` in seconds: time to send `expected_bits` at the line
/// rate and its `p_tau` extension.
pub fn compute_tau(expected_bits: f64, line_rate_bps: f64, p_tau: f64) -> (f64, f64) {
    let tau = expected_bits / line_rate_bps;
    (tau, p_tau * tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prediction {
    pub level: usize,
    pub expected_bits: f64,
}

/// Table plus quantiser, owned by one EEEP run.
#[derive(Debug, Clone)]
pub struct Predictor {
    pub table: CondProbTable,
    pub quantizer: QuantizerState,
}

impl Predictor {
    pub fn new(levels: usize) -> Self {
        Self {
            table: CondProbTable::new(levels),
            quantizer: QuantizerState::empty(levels),
        }
    }

    pub fn observe(&mut self, obs: WindowObservation) {
        observe_window(&mut self.table, &mut self.quantizer, obs);
    }

    pub fn has_converged(&self, theta: f64) -> bool {
        self.table.has_converged(theta)
    }

    pub fn predict(&self, v1: f64) -> Option<Prediction> {
        let level = quantize_level(v1, &self.quantizer);
        expected_future_load(&self.table, &self.quantizer, level).map(|expected_bits| Prediction {
            level,
            expected_bits,
        })
    }
}
