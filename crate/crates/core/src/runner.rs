//! Replications, preset sweeps and CSV output.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::control::ControllerKind;
use crate::demand::DemandPattern;
use crate::error::{Error, Result};
use crate::metrics::{stability_audit, total_travel_distance, StabilityVerdict};
use crate::scenario::{Placement, Scenario};
use crate::sim::RunOutput;
use crate::topology::{Capacity, Network};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "GRIDHOLD_WORKERS";

/// Worker count from [`WORKERS_ENV`], falling back to the available cores.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::scenario(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Per-seed aggregates, one row of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedSummary {
    pub label: String,
    pub seed: u64,
    pub injected: u64,
    pub exited: u64,
    pub unfinished: usize,
    pub total_delay_s: f64,
    pub mean_delay_s: f64,
    pub held_vehicles: usize,
    pub holds: u64,
    pub travel_km: f64,
    pub max_in_network: u64,
    pub peak_occupancy: u32,
    pub drift: f64,
    pub stable: bool,
}

impl SeedSummary {
    pub fn from_output(label: &str, seed: u64, out: &RunOutput, verdict: &StabilityVerdict, link_m: f64) -> Self {
        let completed = out.records.iter().filter(|r| r.completed()).count();
        let total_delay_s = out.total_delay();
        SeedSummary {
            label: label.to_string(),
            seed,
            injected: out.injected,
            exited: out.exited,
            unfinished: out.unfinished(),
            total_delay_s,
            mean_delay_s: if completed > 0 {
                total_delay_s / completed as f64
            } else {
                0.0
            },
            held_vehicles: out.records.iter().filter(|r| r.held).count(),
            holds: out.records.iter().map(|r| u64::from(r.holds)).sum(),
            travel_km: total_travel_distance(&out.records, link_m),
            max_in_network: verdict.max_count,
            peak_occupancy: out.facilities.iter().map(|f| f.2).max().unwrap_or(0),
            drift: verdict.drift,
            stable: verdict.stable,
        }
    }
}

/// One finished replication.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub output: RunOutput,
    pub summary: SeedSummary,
}

/// Runs one replication in memory.
pub fn run_seed(scenario: &Scenario, network: &Arc<Network>, seed: u64) -> Result<SeedRun> {
    let output = scenario.build(network, seed)?.run()?;
    let verdict = stability_audit(&output.in_network, &scenario.audit)?;
    let summary = SeedSummary::from_output(&scenario.label, seed, &output, &verdict, scenario.network.link_length_m);
    Ok(SeedRun { seed, output, summary })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct VehicleRow {
    vehicle: usize,
    class: &'static str,
    held: bool,
    holds: u32,
    route_len: usize,
    depart_s: f64,
    arrive_s: Option<f64>,
    free_flow_s: f64,
    delay_s: Option<f64>,
}

/// Writes `vehicles.csv`, `mfd.csv`, `events.csv` and `occupancy.csv`.
pub fn write_run(dir: &Path, output: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let vehicles: Vec<VehicleRow> = output
        .records
        .iter()
        .map(|r| VehicleRow {
            vehicle: r.vehicle,
            class: r.class.label(),
            held: r.held,
            holds: r.holds,
            route_len: r.route_len,
            depart_s: r.depart_s,
            arrive_s: r.arrive_s,
            free_flow_s: r.free_flow_s,
            delay_s: r.delay_s,
        })
        .collect();
    write_rows(&dir.join("vehicles.csv"), &vehicles)?;
    write_rows(&dir.join("mfd.csv"), &output.frames)?;
    write_rows(&dir.join("events.csv"), &output.events)?;
    write_rows(&dir.join("occupancy.csv"), &output.occupancy)?;
    Ok(())
}

/// Runs every seed of `scenario` on `workers` threads. When `out` is given,
/// each seed writes to `out/<label>/seed_<n>/` and the pooled table to
/// `out/<label>/summary.csv`.
pub fn run_scenario(scenario: &Scenario, out: Option<&Path>, workers: usize) -> Result<Vec<SeedSummary>> {
    scenario.validate()?;
    let network = Arc::new(scenario.network()?);
    let root = out.map(|o| o.join(&scenario.label));
    let summaries = with_workers(workers, || {
        scenario
            .seeds
            .par_iter()
            .map(|seed| {
                let run = run_seed(scenario, &network, *seed)?;
                if let Some(root) = &root {
                    write_run(&root.join(format!("seed_{seed}")), &run.output)?;
                }
                Ok(run.summary)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    if let Some(root) = &root {
        write_rows(&root.join("summary.csv"), &summaries)?;
    }
    Ok(summaries)
}

/// A named sweep: a baseline and one scenario per swept value.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub parameter: &'static str,
    pub baseline: Scenario,
    pub points: Vec<(String, Scenario)>,
}

pub const PRESET_NAMES: [&str; 9] = [
    "rho-cr-sweep",
    "phi-sweep",
    "tau-sweep",
    "parking-rings",
    "capacity-sweep",
    "random-parking",
    "penetration-sweep",
    "perimeter-comparison",
    "bangbang-rho-sweep",
];

/// Per-OD demand used by the presets. The reference 1.05 veh/h never
/// congests a point-queue grid, so the sweeps run at a level where density
/// peaks near 60 veh/lane-km and every trip still finishes within 2 h.
pub const CONGESTED_RATE_VPH: f64 = 4.0;

/// Per-OD demand for the concentrated pattern, which has far fewer OD
/// pairs; chosen so the interior crosses ρ^p_cr = 40 under plain Q-MP.
pub const CONCENTRATED_RATE_VPH: f64 = 25.0;

/// Reference holding run at [`CONGESTED_RATE_VPH`]: hold once for 6 min,
/// φ = 8 links, ρ_cr = 20, unbounded parking on ring 7.
pub fn holding_base() -> Scenario {
    let mut s = Scenario::default();
    s.record_events = false;
    s.demand.rate_per_od_vph = CONGESTED_RATE_VPH;
    s.holding.enabled = true;
    s.holding.rho_cr = 20.0;
    s.holding.phi = 8;
    s.holding.tau = 360.0;
    s.holding.max_holds = Some(1);
    s
}

fn point(base: &Scenario, name: &str, value: impl std::fmt::Display, edit: impl FnOnce(&mut Scenario)) -> (String, Scenario) {
    let mut s = base.clone();
    edit(&mut s);
    s.label = format!("{name}/{value}");
    (value.to_string(), s)
}

pub fn preset(name: &str) -> Result<Preset> {
    let base = holding_base();
    let mut baseline = base.clone();
    baseline.holding.enabled = false;
    let (name, parameter, baseline, points): (&'static str, &'static str, Scenario, Vec<(String, Scenario)>) =
        match name {
            "rho-cr-sweep" => {
                // Calibration runs: multi-hold, parking next to every centroid.
                let mut b = base.clone();
                b.holding.phi = 10;
                b.holding.tau = 300.0;
                b.holding.max_holds = None;
                b.parking.rings = vec![1, 3, 5, 7, 9];
                let pts = [15.0, 20.0, 25.0, 30.0, 35.0, 40.0]
                    .iter()
                    .map(|r| point(&b, "rho-cr-sweep", r, |s| s.holding.rho_cr = *r))
                    .collect();
                ("rho-cr-sweep", "rho_cr", baseline, pts)
            }
            "phi-sweep" => {
                let mut b = base.clone();
                b.holding.tau = 300.0;
                b.holding.max_holds = None;
                b.parking.rings = vec![1, 3, 5, 7, 9];
                let pts = [6, 8, 10, 12, 14]
                    .iter()
                    .map(|p| point(&b, "phi-sweep", p, |s| s.holding.phi = *p))
                    .collect();
                ("phi-sweep", "phi", baseline, pts)
            }
            "tau-sweep" => {
                let mut b = base.clone();
                b.parking.rings = vec![1, 3, 5, 7, 9];
                let pts = [2, 4, 6, 8, 10]
                    .iter()
                    .map(|m| point(&b, "tau-sweep", format!("{m}min"), |s| s.holding.tau = f64::from(*m) * 60.0))
                    .collect();
                ("tau-sweep", "tau", baseline, pts)
            }
            "parking-rings" => {
                let pts = [1, 3, 5, 7, 9]
                    .iter()
                    .map(|i| point(&base, "parking-rings", i, |s| s.parking.rings = vec![*i]))
                    .collect();
                ("parking-rings", "ring", baseline, pts)
            }
            "capacity-sweep" => {
                let pts = [Capacity::Limited(10), Capacity::Limited(20), Capacity::Limited(30), Capacity::Limited(40), Capacity::Unbounded]
                    .iter()
                    .map(|c| point(&base, "capacity-sweep", c, |s| s.parking.capacity = *c))
                    .collect();
                ("capacity-sweep", "capacity", baseline, pts)
            }
            "random-parking" => {
                let pts = [12, 20, 28, 36]
                    .iter()
                    .map(|n| {
                        point(&base, "random-parking", n, |s| {
                            s.parking.placement = Placement::Random;
                            s.parking.count = *n;
                        })
                    })
                    .collect();
                ("random-parking", "count", baseline, pts)
            }
            "penetration-sweep" => {
                let pts = [0.0, 20.0, 40.0, 60.0, 80.0, 100.0]
                    .iter()
                    .map(|a| {
                        point(&base, "penetration-sweep", a, |s| {
                            s.holding.penetration_pct = *a;
                            s.parking.placement = Placement::Random;
                            s.parking.count = 28;
                        })
                    })
                    .collect();
                ("penetration-sweep", "penetration_pct", baseline, pts)
            }
            "perimeter-comparison" => {
                let mut b = base.clone();
                b.demand.pattern = DemandPattern::Concentrated;
                b.demand.rate_per_od_vph = CONCENTRATED_RATE_VPH;
                b.controller.perimeter_side = Some(7);
                b.controller.rho_p_cr = 40.0;
                let mut bang = b.clone();
                bang.holding.enabled = false;
                bang.controller.kind = ControllerKind::Bangbang;
                bang.label = "perimeter-comparison/bangbang".into();
                let pts = vec![
                    point(&b, "perimeter-comparison", "nmp", |s| {
                        s.holding.enabled = false;
                        s.controller.kind = ControllerKind::Nmp;
                    }),
                    point(&b, "perimeter-comparison", "qmp-hold", |s| {
                        s.holding.phi = 5;
                        s.holding.rho_cr = 40.0;
                    }),
                ];
                ("perimeter-comparison", "controller", bang, pts)
            }
            "bangbang-rho-sweep" => {
                let mut b = base.clone();
                b.holding.enabled = false;
                b.demand.pattern = DemandPattern::Concentrated;
                b.demand.rate_per_od_vph = CONCENTRATED_RATE_VPH;
                b.controller.perimeter_side = Some(7);
                let mut q = b.clone();
                q.label = "bangbang-rho-sweep/qmp".into();
                b.controller.kind = ControllerKind::Bangbang;
                let pts = [30.0, 35.0, 40.0, 45.0, 50.0]
                    .iter()
                    .map(|r| point(&b, "bangbang-rho-sweep", r, |s| s.controller.rho_p_cr = *r))
                    .collect();
                ("bangbang-rho-sweep", "rho_p_cr", q, pts)
            }
            other => return Err(Error::UnknownPreset(other.to_string())),
        };
    let mut baseline = baseline;
    if baseline.label == base.label {
        baseline.label = format!("{name}/baseline");
    }
    Ok(Preset {
        name,
        parameter,
        baseline,
        points,
    })
}

/// One row of `sweep.csv`: pooled means over seeds for one swept value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub preset: String,
    pub parameter: String,
    pub value: String,
    pub seeds: usize,
    pub mean_exits: f64,
    pub baseline_exits: f64,
    /// Mean over seeds and bins of the cumulative-exit gain over baseline.
    pub mean_exit_gain: f64,
    pub mean_total_delay_s: f64,
    pub baseline_total_delay_s: f64,
    pub delay_reduction_pct: f64,
    pub mean_delay_per_vehicle_s: f64,
    pub held_vehicles: f64,
    pub stable_seeds: usize,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn exit_gain(run: &RunOutput, base: &RunOutput) -> f64 {
    mean(
        run.frames
            .iter()
            .zip(&base.frames)
            .map(|(a, b)| a.cum_exits as f64 - b.cum_exits as f64),
    )
}

/// Sweep results: the baseline runs and the runs for each swept value, in
/// seed order.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub baseline: Vec<SeedRun>,
    pub points: Vec<(String, Vec<SeedRun>)>,
}

/// Runs a preset across the seeds of `seeds` (or its own seeds), writing
/// per-run directories and `sweep.csv` under `out/<preset>/` when `out` is
/// given.
pub fn run_preset_with(preset: &Preset, seeds: Option<&[u64]>, out: Option<&Path>, workers: usize) -> Result<SweepResult> {
    let mut scenarios = vec![preset.baseline.clone()];
    scenarios.extend(preset.points.iter().map(|(_, s)| s.clone()));
    if let Some(seeds) = seeds {
        for s in &mut scenarios {
            s.seeds = seeds.to_vec();
        }
    }
    let mut networks = Vec::with_capacity(scenarios.len());
    for s in &scenarios {
        s.validate()?;
        networks.push(Arc::new(s.network()?));
    }
    let jobs: Vec<(usize, u64)> = scenarios
        .iter()
        .enumerate()
        .flat_map(|(i, s)| s.seeds.iter().map(move |seed| (i, *seed)))
        .collect();
    let results = with_workers(workers, || {
        jobs.par_iter()
            .map(|(i, seed)| {
                let run = run_seed(&scenarios[*i], &networks[*i], *seed)?;
                if let Some(out) = out {
                    write_run(&out.join(&scenarios[*i].label).join(format!("seed_{seed}")), &run.output)?;
                }
                Ok((*i, run))
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let mut grouped: Vec<Vec<SeedRun>> = vec![Vec::new(); scenarios.len()];
    for (i, run) in results {
        grouped[i].push(run);
    }
    let baseline = grouped.remove(0);
    let base_exits = mean(baseline.iter().map(|r| r.output.exited as f64));
    let base_delay = mean(baseline.iter().map(|r| r.summary.total_delay_s));
    let rows: Vec<SweepRow> = preset
        .points
        .iter()
        .zip(&grouped)
        .map(|((value, _), runs)| {
            let total_delay = mean(runs.iter().map(|r| r.summary.total_delay_s));
            SweepRow {
                preset: preset.name.to_string(),
                parameter: preset.parameter.to_string(),
                value: value.clone(),
                seeds: runs.len(),
                mean_exits: mean(runs.iter().map(|r| r.output.exited as f64)),
                baseline_exits: base_exits,
                mean_exit_gain: mean(runs.iter().zip(&baseline).map(|(r, b)| exit_gain(&r.output, &b.output))),
                mean_total_delay_s: total_delay,
                baseline_total_delay_s: base_delay,
                delay_reduction_pct: if base_delay > 0.0 {
                    100.0 * (base_delay - total_delay) / base_delay
                } else {
                    0.0
                },
                mean_delay_per_vehicle_s: mean(runs.iter().map(|r| r.summary.mean_delay_s)),
                held_vehicles: mean(runs.iter().map(|r| r.summary.held_vehicles as f64)),
                stable_seeds: runs.iter().filter(|r| r.summary.stable).count(),
            }
        })
        .collect();
    if let Some(out) = out {
        let dir = out.join(preset.name);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_rows(&dir.join("sweep.csv"), &rows)?;
    }
    let points = preset
        .points
        .iter()
        .map(|(v, _)| v.clone())
        .zip(grouped)
        .collect();
    Ok(SweepResult { rows, baseline, points })
}

pub fn run_preset(name: &str, out: Option<&Path>, workers: usize) -> Result<Vec<SweepRow>> {
    Ok(run_preset_with(&preset(name)?, None, out, workers)?.rows)
}

/// Default output root when none is given on the command line.
pub fn default_out() -> PathBuf {
    PathBuf::from("out")
}
