//! The point-queue simulation loop.
//!
//! Each step of length `step_s` runs, in order:
//!
//! 1. demand generation (new vehicles start on their origin link),
//! 2. link arrivals: vehicles whose free-flow traversal ends join the queue
//!    of the movement their route takes next, or leave the network when
//!    on the destination street,
//! 3. density measurement,
//! 4. holding: releases first, then new holds,
//! 5. the signal decision from present queues,
//! 6. FIFO discharge of served movements onto their next link,
//! 7. metrics and the conservation check.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::control::{ControlInput, ControllerDecision, SignalController};
use crate::demand::{DemandGenerator, DemandSpec};
use crate::error::{Error, Result};
use crate::holding::{assign_class, eligible_hold_count, HoldEntry, HoldLedger, HoldingParams};
use crate::metrics::{DelayRecord, MetricsFrame, MetricsRecorder, StepSample, DEFAULT_BIN_S};
use crate::rng::{stream, Stream};
use crate::routing::Router;
use crate::topology::{Capacity, Centroid, LinkId, MovementId, Network, Street};
use crate::vehicle::{Position, Vehicle, VehicleClass, VehicleId};

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub step_s: f64,
    pub horizon_s: f64,
    /// Yellow plus all-red time lost whenever an intersection changes phase.
    pub lost_time_s: f64,
    pub bin_s: f64,
    pub demand: DemandSpec,
    pub holding: HoldingParams,
    pub record_events: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            step_s: 10.0,
            horizon_s: 7200.0,
            lost_time_s: 4.0,
            bin_s: DEFAULT_BIN_S,
            demand: DemandSpec::default(),
            holding: HoldingParams::default(),
            record_events: false,
        }
    }
}

impl SimConfig {
    pub fn horizon_steps(&self) -> u64 {
        (self.horizon_s / self.step_s).round() as u64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub cav: u32,
    pub hdv: u32,
}

impl ClassCounts {
    pub fn total(&self) -> u32 {
        self.cav + self.hdv
    }

    fn add(&mut self, class: VehicleClass) {
        match class {
            VehicleClass::Cav => self.cav += 1,
            VehicleClass::Hdv => self.hdv += 1,
        }
    }
}

/// What happened during one step, per movement where relevant.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub step: u64,
    pub density: f64,
    pub interior_density: Option<f64>,
    pub decision: ControllerDecision,
    /// Vehicles that joined each movement's queue from upstream.
    pub arrivals: Vec<ClassCounts>,
    /// Vehicles discharged by each movement (`y`).
    pub departures: Vec<ClassCounts>,
    /// `n_hold` per movement.
    pub held: Vec<u32>,
    /// `n_enter` per movement.
    pub released: Vec<u32>,
    pub generated: u64,
    pub exits: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Depart,
    Enter,
    Hold,
    Release,
    Arrive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub vehicle: VehicleId,
    pub time_s: f64,
    pub kind: EventKind,
    pub link: Option<LinkId>,
    pub facility: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupancySample {
    pub time_s: f64,
    pub facility: usize,
    pub street: String,
    pub occupancy: u32,
}

#[derive(Debug, Clone)]
pub struct Facility {
    pub street: Street,
    pub capacity: Capacity,
    /// Movements discharging either direction of the street.
    pub movements: Vec<MovementId>,
    pub ledger: HoldLedger,
    pub peak_occupancy: u32,
}

impl Facility {
    pub fn occupancy(&self) -> u32 {
        self.ledger.len() as u32
    }
}

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub frames: Vec<MetricsFrame>,
    /// Vehicles in the network (queued, travelling or held) after each step.
    pub in_network: Vec<u64>,
    pub records: Vec<DelayRecord>,
    pub events: Vec<Event>,
    pub occupancy: Vec<OccupancySample>,
    pub facilities: Vec<(Street, Capacity, u32)>,
    pub injected: u64,
    pub exited: u64,
}

impl RunOutput {
    pub fn total_delay(&self) -> f64 {
        self.records.iter().filter_map(|r| r.delay_s).sum()
    }

    pub fn unfinished(&self) -> usize {
        self.records.iter().filter(|r| !r.completed()).count()
    }
}

pub struct Simulation {
    network: Arc<Network>,
    cfg: SimConfig,
    controller: Box<dyn SignalController>,
    centroids: Vec<Centroid>,
    demand: DemandGenerator,
    router: Router,
    rng_demand: ChaCha8Rng,
    rng_routing: ChaCha8Rng,
    rng_class: ChaCha8Rng,

    vehicles: Vec<Vehicle>,
    fifos: Vec<VecDeque<VehicleId>>,
    transit: BTreeMap<u64, Vec<VehicleId>>,
    on_link: Vec<u32>,
    held_on: Vec<u32>,
    facilities: Vec<Facility>,
    facility_of: Vec<Option<usize>>,
    credit: Vec<f64>,
    prev_active: Vec<Option<usize>>,
    full_steps: Vec<u64>,
    half_steps: Vec<u64>,
    interior: Option<Vec<LinkId>>,
    interior_lane_km: f64,
    total_lane_km: f64,

    step: u64,
    injected: u64,
    exited: u64,
    metrics: MetricsRecorder,
    events: Vec<Event>,
    occupancy: Vec<OccupancySample>,
}

fn steps_for(secs: f64, step_s: f64) -> u64 {
    ((secs / step_s - 1e-9).ceil() as u64).max(1)
}

impl Simulation {
    /// `parking` lists the streets with a facility; their `parking` field
    /// must be set. Demand is generated between `centroids`.
    pub fn new(
        network: Arc<Network>,
        centroids: Vec<Centroid>,
        parking: &[Centroid],
        controller: Box<dyn SignalController>,
        cfg: SimConfig,
        seed: u64,
    ) -> Result<Self> {
        if !(cfg.step_s > 0.0) {
            return Err(Error::scenario("step_s must be positive"));
        }
        if !(cfg.lost_time_s >= 0.0) || cfg.lost_time_s > cfg.step_s {
            return Err(Error::scenario("lost time must lie in [0, step_s]"));
        }
        let n_mov = network.movements.len();
        let n_link = network.links.len();

        let mut facilities = Vec::new();
        let mut facility_of = vec![None; n_mov];
        for c in parking {
            let Some(p) = c.parking else {
                return Err(Error::scenario(format!("parking location {} has no facility", c.street)));
            };
            let links = network
                .street_links(c.street)
                .ok_or_else(|| Error::scenario(format!("parking street {} is not in the network", c.street)))?;
            let mut movements: Vec<MovementId> = links
                .iter()
                .flat_map(|l| network.movements_from(*l).iter().copied())
                .collect();
            movements.sort_unstable();
            for m in &movements {
                if facility_of[*m].is_some() {
                    return Err(Error::scenario(format!("two facilities on street {}", c.street)));
                }
                facility_of[*m] = Some(facilities.len());
            }
            facilities.push(Facility {
                street: c.street,
                capacity: p.capacity,
                movements,
                ledger: HoldLedger::default(),
                peak_occupancy: 0,
            });
        }
        for c in &centroids {
            if network.street_links(c.street).is_none() {
                return Err(Error::scenario(format!("centroid street {} is not in the network", c.street)));
            }
        }

        let full_steps = network
            .links
            .iter()
            .map(|l| steps_for(l.free_flow_secs(), cfg.step_s))
            .collect();
        let half_steps = network
            .links
            .iter()
            .map(|l| steps_for(l.free_flow_secs() / 2.0, cfg.step_s))
            .collect();
        let (interior, interior_lane_km) = match network.perimeter() {
            Some(p) => (Some(p.interior_links().collect()), p.interior_lane_km),
            None => (None, 0.0),
        };

        let demand = DemandGenerator::new(&cfg.demand, &centroids, cfg.step_s);
        let metrics = MetricsRecorder::new(cfg.step_s, cfg.bin_s);
        Ok(Simulation {
            router: Router::new(&network),
            total_lane_km: network.total_lane_km(),
            network,
            controller,
            centroids,
            demand,
            rng_demand: stream(seed, Stream::Demand),
            rng_routing: stream(seed, Stream::Routing),
            rng_class: stream(seed, Stream::Class),
            vehicles: Vec::new(),
            fifos: vec![VecDeque::new(); n_mov],
            transit: BTreeMap::new(),
            on_link: vec![0; n_link],
            held_on: vec![0; n_mov],
            facilities,
            facility_of,
            credit: vec![0.0; n_mov],
            prev_active: Vec::new(),
            full_steps,
            half_steps,
            interior,
            interior_lane_km,
            step: 0,
            injected: 0,
            exited: 0,
            metrics,
            events: Vec::new(),
            occupancy: Vec::new(),
            cfg,
        })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn current_step(&self) -> u64 {
        self.step
    }

    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    pub fn facilities(&self) -> &[Facility] {
        &self.facilities
    }

    /// Facility serving `movement`, if its street has parking.
    pub fn facility_of(&self, movement: MovementId) -> Option<usize> {
        self.facility_of[movement]
    }

    pub fn queue(&self, movement: MovementId) -> &VecDeque<VehicleId> {
        &self.fifos[movement]
    }

    /// Present vehicles on a movement split by class (`x^CAV,P`, `x^HDV`).
    pub fn present(&self, movement: MovementId) -> ClassCounts {
        let mut c = ClassCounts::default();
        for v in &self.fifos[movement] {
            c.add(self.vehicles[*v].class);
        }
        c
    }

    /// Held CAVs that will rejoin `movement` (`x^CAV,H`).
    pub fn held(&self, movement: MovementId) -> u32 {
        self.held_on[movement]
    }

    pub fn in_transit(&self, link: LinkId) -> u32 {
        self.on_link[link]
    }

    pub fn injected(&self) -> u64 {
        self.injected
    }

    pub fn exited(&self) -> u64 {
        self.exited
    }

    pub fn total_queued(&self) -> u64 {
        self.fifos.iter().map(|f| f.len() as u64).sum()
    }

    pub fn total_in_transit(&self) -> u64 {
        self.on_link.iter().map(|n| u64::from(*n)).sum()
    }

    pub fn total_held(&self) -> u64 {
        self.facilities.iter().map(|f| u64::from(f.occupancy())).sum()
    }

    /// On-street vehicles (queued or travelling) per lane-km of network.
    /// Held vehicles are off-street and excluded.
    pub fn density(&self) -> f64 {
        (self.total_queued() + self.total_in_transit()) as f64 / self.total_lane_km
    }

    /// Density over the perimeter's interior links.
    pub fn interior_density(&self) -> Option<f64> {
        let links = self.interior.as_ref()?;
        if self.interior_lane_km <= 0.0 {
            return Some(0.0);
        }
        let count: u64 = links
            .iter()
            .map(|l| {
                u64::from(self.on_link[*l])
                    + self
                        .network
                        .movements_from(*l)
                        .iter()
                        .map(|m| self.fifos[*m].len() as u64)
                        .sum::<u64>()
            })
            .sum();
        Some(count as f64 / self.interior_lane_km)
    }

    fn log(&mut self, vehicle: VehicleId, kind: EventKind, link: Option<LinkId>, facility: Option<usize>) {
        if self.cfg.record_events {
            self.events.push(Event {
                vehicle,
                time_s: self.step as f64 * self.cfg.step_s,
                kind,
                link,
                facility,
            });
        }
    }

    fn spawn(&mut self, route: Vec<LinkId>, class: VehicleClass) -> VehicleId {
        let t = self.step;
        let last = route.len() - 1;
        let ff_steps: u64 = route
            .iter()
            .enumerate()
            .map(|(i, l)| {
                if i == 0 || i == last {
                    self.half_steps[*l]
                } else {
                    self.full_steps[*l]
                }
            })
            .sum();
        let id = self.vehicles.len();
        let first = route[0];
        let ready = t + self.half_steps[first];
        self.vehicles.push(Vehicle {
            id,
            class,
            route,
            leg: 0,
            position: Position::InTransit {
                link: first,
                ready_step: ready,
            },
            depart_step: t,
            arrive_step: None,
            free_flow_s: ff_steps as f64 * self.cfg.step_s,
            holds_used: 0,
            held_steps: 0,
        });
        self.on_link[first] += 1;
        self.transit.entry(ready).or_default().push(id);
        self.injected += 1;
        self.log(id, EventKind::Depart, Some(first), None);
        id
    }

    /// Adds a vehicle with an explicit route at the current step, as if
    /// generated by demand. The route must cross at least one intersection.
    pub fn inject(&mut self, route: Vec<LinkId>, class: VehicleClass) -> Result<VehicleId> {
        if route.len() < 2 {
            return Err(Error::scenario("an injected route needs at least two links"));
        }
        for w in route.windows(2) {
            if self.network.movement_between(w[0], w[1]).is_none() {
                return Err(Error::scenario(format!("links {} and {} are not connected by a movement", w[0], w[1])));
            }
        }
        Ok(self.spawn(route, class))
    }

    fn generate(&mut self) -> Result<u64> {
        let pairs = self.demand.arrivals(self.step, &mut self.rng_demand);
        let n = pairs.len() as u64;
        for (o, d) in pairs {
            let (os, ds) = (self.centroids[o].street, self.centroids[d].street);
            let route = self.router.route(&self.network, os, ds, &mut self.rng_routing)?;
            let class = assign_class(self.cfg.holding.penetration_pct, &mut self.rng_class);
            self.spawn(route, class);
        }
        Ok(n)
    }

    fn arrive(&mut self, report: &mut StepReport) -> Result<()> {
        let t = self.step;
        while let Some(entry) = self.transit.first_entry() {
            if *entry.key() > t {
                break;
            }
            for v in entry.remove() {
                let veh = &mut self.vehicles[v];
                let link = veh.current_link();
                self.on_link[link] -= 1;
                match veh.next_link() {
                    None => {
                        veh.position = Position::Exited;
                        veh.arrive_step = Some(t);
                        self.exited += 1;
                        report.exits += 1;
                        self.log(v, EventKind::Arrive, Some(link), None);
                    }
                    Some(next) => {
                        let m = self.network.movement_between(link, next).ok_or_else(|| Error::Consistency {
                            step: t,
                            detail: format!("vehicle {v} route has no movement {link}->{next}"),
                        })?;
                        veh.position = Position::Queued {
                            movement: m,
                            joined_step: t,
                        };
                        report.arrivals[m].add(veh.class);
                        self.fifos[m].push_back(v);
                    }
                }
            }
        }
        Ok(())
    }

    fn hold_and_release(&mut self, density: f64, report: &mut StepReport) {
        let params = self.cfg.holding.clone();
        if !params.enabled || self.facilities.is_empty() {
            return;
        }
        let t = self.step;
        let step_s = self.cfg.step_s;

        for f in 0..self.facilities.len() {
            for e in self.facilities[f].ledger.release(t, step_s, params.tau) {
                let veh = &mut self.vehicles[e.vehicle];
                veh.position = Position::Queued {
                    movement: e.movement,
                    joined_step: t,
                };
                veh.held_steps += t - e.start_step;
                self.held_on[e.movement] -= 1;
                self.fifos[e.movement].push_back(e.vehicle);
                report.released[e.movement] += 1;
                self.log(e.vehicle, EventKind::Release, Some(self.vehicles[e.vehicle].current_link()), Some(f));
            }
        }

        if density < params.rho_cr {
            return;
        }
        for f in 0..self.facilities.len() {
            for mi in 0..self.facilities[f].movements.len() {
                let m = self.facilities[f].movements[mi];
                let is_eligible = |v: &Vehicle| {
                    v.is_cav()
                        && v.remaining() >= params.phi as usize
                        && params.may_hold_again(v.holds_used)
                        && matches!(v.position, Position::Queued { joined_step, .. } if joined_step < t)
                };
                let eligible = self.fifos[m].iter().filter(|v| is_eligible(&self.vehicles[**v])).count();
                let fac = &self.facilities[f];
                let n = eligible_hold_count(density, params.rho_cr, eligible, fac.capacity, fac.occupancy());
                if n == 0 {
                    continue;
                }
                let mut kept = VecDeque::with_capacity(self.fifos[m].len());
                let mut taken = Vec::with_capacity(n);
                for v in self.fifos[m].drain(..) {
                    if taken.len() < n && is_eligible(&self.vehicles[v]) {
                        taken.push(v);
                    } else {
                        kept.push_back(v);
                    }
                }
                self.fifos[m] = kept;
                for v in taken {
                    let veh = &mut self.vehicles[v];
                    veh.position = Position::Held {
                        facility: f,
                        movement: m,
                        start_step: t,
                    };
                    veh.holds_used += 1;
                    self.held_on[m] += 1;
                    report.held[m] += 1;
                    self.facilities[f].ledger.push(HoldEntry {
                        vehicle: v,
                        movement: m,
                        start_step: t,
                    });
                    let link = self.vehicles[v].current_link();
                    self.log(v, EventKind::Hold, Some(link), Some(f));
                }
            }
        }
    }

    fn discharge(&mut self, decision: &ControllerDecision, report: &mut StepReport) {
        let t = self.step;
        let step_s = self.cfg.step_s;
        if self.prev_active.is_empty() {
            self.prev_active = vec![None; self.network.intersections.len()];
        }
        let network = Arc::clone(&self.network);
        for node in &network.intersections {
            let slot = decision.active[node.id];
            let switched = self.prev_active[node.id].is_some_and(|p| p != slot);
            let effective = if switched {
                step_s - self.cfg.lost_time_s
            } else {
                step_s
            };
            self.prev_active[node.id] = Some(slot);
            for &m in &node.phases[slot].movements {
                if decision.blocked[m] {
                    continue;
                }
                let available = network.movements[m].saturation_flow * effective / 3600.0 + self.credit[m];
                let service = (available + 1e-9).floor().max(0.0) as usize;
                let queue = self.fifos[m].len();
                let y = service.min(queue);
                self.credit[m] = if queue >= service.max(1) {
                    (available - service as f64).max(0.0)
                } else {
                    0.0
                };
                for _ in 0..y {
                    let v = self.fifos[m].pop_front().expect("queue length checked");
                    let veh = &mut self.vehicles[v];
                    report.departures[m].add(veh.class);
                    veh.leg += 1;
                    let link = veh.current_link();
                    let ready = t + if veh.remaining() == 0 {
                        self.half_steps[link]
                    } else {
                        self.full_steps[link]
                    };
                    veh.position = Position::InTransit { link, ready_step: ready };
                    self.on_link[link] += 1;
                    self.transit.entry(ready).or_default().push(v);
                    self.log(v, EventKind::Enter, Some(link), None);
                }
            }
        }
    }

    fn check_conservation(&self) -> Result<()> {
        let queued = self.total_queued();
        let transit = self.total_in_transit();
        let held = self.total_held();
        if self.injected != queued + transit + held + self.exited {
            return Err(Error::Consistency {
                step: self.step,
                detail: format!(
                    "injected {} != queued {queued} + in transit {transit} + held {held} + exited {}",
                    self.injected, self.exited
                ),
            });
        }
        let held_by_movement: u64 = self.held_on.iter().map(|h| u64::from(*h)).sum();
        if held_by_movement != held {
            return Err(Error::Consistency {
                step: self.step,
                detail: format!("held per movement {held_by_movement} != facility occupancy {held}"),
            });
        }
        for (i, f) in self.facilities.iter().enumerate() {
            if !f.capacity.admits(f.occupancy()) {
                return Err(Error::Consistency {
                    step: self.step,
                    detail: format!("facility {i} holds {} over capacity {}", f.occupancy(), f.capacity),
                });
            }
        }
        Ok(())
    }

    /// Advances one step and reports what happened.
    pub fn step(&mut self) -> Result<StepReport> {
        let n_mov = self.network.movements.len();
        let mut report = StepReport {
            step: self.step,
            density: 0.0,
            interior_density: None,
            decision: ControllerDecision {
                active: Vec::new(),
                blocked: Vec::new(),
            },
            arrivals: vec![ClassCounts::default(); n_mov],
            departures: vec![ClassCounts::default(); n_mov],
            held: vec![0; n_mov],
            released: vec![0; n_mov],
            generated: 0,
            exits: 0,
        };

        report.generated = self.generate()?;
        self.arrive(&mut report)?;

        let density = self.density();
        let interior_density = self.interior_density();
        report.density = density;
        report.interior_density = interior_density;

        self.hold_and_release(density, &mut report);

        let present: Vec<u32> = self.fifos.iter().map(|f| f.len() as u32).collect();
        let decision = self.controller.decide(&ControlInput {
            network: &self.network,
            present: &present,
            interior_density,
            step: self.step,
        });
        if decision.active.len() != self.network.intersections.len() || decision.blocked.len() != n_mov {
            return Err(Error::Consistency {
                step: self.step,
                detail: format!("controller `{}` returned a malformed decision", self.controller.name()),
            });
        }
        self.discharge(&decision, &mut report);
        report.decision = decision;

        let held = self.total_held();
        for (i, f) in self.facilities.iter_mut().enumerate() {
            f.peak_occupancy = f.peak_occupancy.max(f.occupancy());
            if self.cfg.holding.enabled {
                self.occupancy.push(OccupancySample {
                    time_s: self.step as f64 * self.cfg.step_s,
                    facility: i,
                    street: f.street.to_string(),
                    occupancy: f.occupancy(),
                });
            }
        }
        self.check_conservation()?;
        self.metrics.record_step(StepSample {
            density,
            interior_density,
            exits: report.exits,
            held,
            in_network: self.injected - self.exited,
        });
        self.step += 1;
        Ok(report)
    }

    /// Runs to the configured horizon.
    pub fn run(mut self) -> Result<RunOutput> {
        let horizon = self.cfg.horizon_steps();
        while self.step < horizon {
            self.step()?;
        }
        Ok(self.finish())
    }

    /// Per-vehicle records and series for the steps run so far.
    pub fn finish(self) -> RunOutput {
        let step_s = self.cfg.step_s;
        let penalty = self.cfg.holding.maneuver_penalty;
        let records = self
            .vehicles
            .iter()
            .map(|v| {
                let arrive_s = v.arrive_step.map(|a| a as f64 * step_s);
                let depart_s = v.depart_step as f64 * step_s;
                DelayRecord {
                    vehicle: v.id,
                    class: v.class,
                    held: v.holds_used > 0,
                    holds: v.holds_used,
                    route_len: v.route_len(),
                    depart_s,
                    arrive_s,
                    free_flow_s: v.free_flow_s,
                    delay_s: arrive_s.map(|a| a - depart_s - v.free_flow_s + penalty * f64::from(v.holds_used)),
                }
            })
            .collect();
        let (frames, in_network) = self.metrics.finish();
        RunOutput {
            frames,
            in_network,
            records,
            events: self.events,
            occupancy: self.occupancy,
            facilities: self
                .facilities
                .iter()
                .map(|f| (f.street, f.capacity, f.peak_occupancy))
                .collect(),
            injected: self.injected,
            exited: self.exited,
        }
    }
}
