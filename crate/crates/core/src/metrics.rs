//! MFD/NEF binning, per-vehicle delay records and the empirical stability
//! audit.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vehicle::{VehicleClass, VehicleId};

pub const DEFAULT_BIN_S: f64 = 100.0;

/// One aggregation bin of the network-level time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFrame {
    /// Bin start, seconds.
    pub bin: f64,
    /// Mean network density over the bin, veh/lane-km.
    pub rho: f64,
    /// Mean interior density, when a perimeter is defined.
    pub rho_p: Option<f64>,
    /// Trip completions in the bin scaled to veh/h.
    pub nef: f64,
    /// Held vehicles at the end of the bin.
    pub held: u64,
    pub cum_exits: u64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StepSample {
    pub density: f64,
    pub interior_density: Option<f64>,
    pub exits: u64,
    pub held: u64,
    pub in_network: u64,
}

#[derive(Debug, Clone)]
pub struct MetricsRecorder {
    step_s: f64,
    bin_steps: usize,
    frames: Vec<MetricsFrame>,
    in_network: Vec<u64>,
    cum_exits: u64,
    // current bin
    steps: usize,
    rho_sum: f64,
    rho_p_sum: Option<f64>,
    exits: u64,
    held: u64,
}

impl MetricsRecorder {
    /// `bin_s` must be a whole number of steps.
    pub fn new(step_s: f64, bin_s: f64) -> Self {
        let bin_steps = (bin_s / step_s).round().max(1.0) as usize;
        MetricsRecorder {
            step_s,
            bin_steps,
            frames: Vec::new(),
            in_network: Vec::new(),
            cum_exits: 0,
            steps: 0,
            rho_sum: 0.0,
            rho_p_sum: None,
            exits: 0,
            held: 0,
        }
    }

    pub fn record_step(&mut self, sample: StepSample) {
        self.in_network.push(sample.in_network);
        self.steps += 1;
        self.rho_sum += sample.density;
        if let Some(rp) = sample.interior_density {
            *self.rho_p_sum.get_or_insert(0.0) += rp;
        }
        self.exits += sample.exits;
        self.cum_exits += sample.exits;
        self.held = sample.held;
        if self.steps == self.bin_steps {
            self.flush();
        }
    }

    fn flush(&mut self) {
        if self.steps == 0 {
            return;
        }
        let n = self.steps as f64;
        let width = n * self.step_s;
        let start = self.frames.len() as f64 * self.bin_steps as f64 * self.step_s;
        self.frames.push(MetricsFrame {
            bin: start,
            rho: self.rho_sum / n,
            rho_p: self.rho_p_sum.map(|s| s / n),
            nef: self.exits as f64 * 3600.0 / width,
            held: self.held,
            cum_exits: self.cum_exits,
        });
        self.steps = 0;
        self.rho_sum = 0.0;
        self.rho_p_sum = None;
        self.exits = 0;
    }

    /// Closes a trailing partial bin, if any.
    pub fn finish(mut self) -> (Vec<MetricsFrame>, Vec<u64>) {
        self.flush();
        (self.frames, self.in_network)
    }

    pub fn frames(&self) -> &[MetricsFrame] {
        &self.frames
    }

    pub fn in_network(&self) -> &[u64] {
        &self.in_network
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayRecord {
    pub vehicle: VehicleId,
    pub class: VehicleClass,
    pub held: bool,
    pub holds: u32,
    pub route_len: usize,
    pub depart_s: f64,
    pub arrive_s: Option<f64>,
    pub free_flow_s: f64,
    /// Travel time minus free-flow time plus manoeuvre penalties; empty for
    /// vehicles still travelling at the end of the run.
    pub delay_s: Option<f64>,
}

impl DelayRecord {
    pub fn completed(&self) -> bool {
        self.arrive_s.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupRow {
    pub route_len: usize,
    pub held: bool,
    pub count: usize,
    pub total_delay_s: f64,
    pub mean_delay_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DelayTable {
    pub rows: Vec<GroupRow>,
    pub unfinished: usize,
}

impl DelayTable {
    pub fn total_delay(&self) -> f64 {
        self.rows.iter().map(|r| r.total_delay_s).sum()
    }
}

/// Delay totals and means per route length, split held / never held.
/// Vehicles that did not finish are only counted.
pub fn delay_by_group(records: &[DelayRecord]) -> DelayTable {
    let mut groups: BTreeMap<(usize, bool), (usize, f64)> = BTreeMap::new();
    let mut unfinished = 0;
    for r in records {
        match r.delay_s {
            Some(d) => {
                let g = groups.entry((r.route_len, r.held)).or_default();
                g.0 += 1;
                g.1 += d;
            }
            None => unfinished += 1,
        }
    }
    DelayTable {
        rows: groups
            .into_iter()
            .map(|((route_len, held), (count, total))| GroupRow {
                route_len,
                held,
                count,
                total_delay_s: total,
                mean_delay_s: total / count as f64,
            })
            .collect(),
        unfinished,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionRow {
    pub route_len: usize,
    /// Held in the treatment run.
    pub held: bool,
    pub count: usize,
    /// Baseline minus treatment delay, summed over the group.
    pub total_reduction_s: f64,
}

/// Pairs vehicles by id across two runs sharing demand and routes and
/// reports the delay reduction per route length and treatment hold status.
/// Only vehicles completed in both runs are compared.
pub fn paired_delay_reduction(baseline: &[DelayRecord], treatment: &[DelayRecord]) -> Vec<ReductionRow> {
    let base: HashMap<VehicleId, &DelayRecord> = baseline.iter().map(|r| (r.vehicle, r)).collect();
    let mut groups: BTreeMap<(usize, bool), (usize, f64)> = BTreeMap::new();
    for t in treatment {
        let Some(b) = base.get(&t.vehicle) else { continue };
        if let (Some(db), Some(dt)) = (b.delay_s, t.delay_s) {
            let g = groups.entry((b.route_len, t.held)).or_default();
            g.0 += 1;
            g.1 += db - dt;
        }
    }
    groups
        .into_iter()
        .map(|((route_len, held), (count, total))| ReductionRow {
            route_len,
            held,
            count,
            total_reduction_s: total,
        })
        .collect()
}

/// Completed travel distance in km; a route of `n` crossings covers `n` links.
pub fn total_travel_distance(records: &[DelayRecord], link_length_m: f64) -> f64 {
    records
        .iter()
        .filter(|r| r.completed())
        .map(|r| r.route_len as f64 * link_length_m / 1000.0)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditConfig {
    /// Largest admissible slope of the running mean, veh/step.
    pub epsilon: f64,
    /// Trailing fraction of the run used for the slope fit.
    pub window_frac: f64,
    /// Upper bound on the in-network count.
    pub max_vehicles: u64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            epsilon: 0.01,
            window_frac: 0.25,
            max_vehicles: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub stable: bool,
    /// Least-squares slope of the running mean over the window, veh/step.
    pub drift: f64,
    pub max_count: u64,
}

fn ls_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let mean_x = (n - 1.0) / 2.0;
    let mean_y = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - mean_x;
        sxy += dx * (y - mean_y);
        sxx += dx * dx;
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Checks that the time-averaged vehicle count stays bounded: the running
/// mean must be flat (slope at most `epsilon`) over the trailing window and
/// the count must never reach `max_vehicles`.
pub fn stability_audit(in_network: &[u64], cfg: &AuditConfig) -> Result<StabilityVerdict> {
    let window = (cfg.window_frac * in_network.len() as f64).ceil() as usize;
    if window < 2 || window > in_network.len() {
        return Err(Error::WindowTooLong {
            window: window.max(2),
            horizon: in_network.len(),
        });
    }
    let mut running = Vec::with_capacity(in_network.len());
    let mut sum = 0.0;
    for (t, n) in in_network.iter().enumerate() {
        sum += *n as f64;
        running.push(sum / (t + 1) as f64);
    }
    let drift = ls_slope(&running[running.len() - window..]);
    let max_count = in_network.iter().copied().max().unwrap_or(0);
    Ok(StabilityVerdict {
        stable: drift <= cfg.epsilon && max_count < cfg.max_vehicles,
        drift,
        max_count,
    })
}
