//! Drives a 3×3 grid by hand: scripted signals, injected vehicles, and a
//! view of every queue after each step.
//!
//! cargo run --example step_by_step

use std::sync::Arc;

use gridhold::control::ScriptedController;
use gridhold::sim::{SimConfig, Simulation};
use gridhold::{DemandSpec, Network, VehicleClass};

fn main() -> gridhold::Result<()> {
    let net = Arc::new(Network::build_grid(3, 3, 200.0, 3, 50.0, 1800.0)?);
    let cfg = SimConfig {
        demand: DemandSpec {
            rate_per_od_vph: 0.0,
            ..Default::default()
        },
        ..Default::default()
    };
    // Fixed-time plan: every node steps through its phases, two steps each.
    let schedule: Vec<Vec<usize>> = (0..8)
        .map(|k| net.intersections.iter().map(|i| (k / 2) % i.phases.len()).collect())
        .collect();
    let mut sim = Simulation::new(Arc::clone(&net), Vec::new(), &[], Box::new(ScriptedController::new(schedule)), cfg, 0)?;

    let path = |nodes: &[usize]| nodes.windows(2).map(|w| net.link_between(w[0], w[1]).unwrap()).collect::<Vec<_>>();
    for _ in 0..4 {
        sim.inject(path(&[0, 1, 2, 5, 8]), VehicleClass::Cav)?;
    }
    sim.inject(path(&[6, 3, 4, 5]), VehicleClass::Hdv)?;

    while sim.exited() < sim.injected() && sim.current_step() < 100 {
        let report = sim.step()?;
        let queues: Vec<String> = (0..net.movements.len())
            .filter(|m| !sim.queue(*m).is_empty())
            .map(|m| format!("m{m}:{:?}", sim.queue(m)))
            .collect();
        println!(
            "t={:>3}s in transit {:>2}  exits {}  queues {}",
            report.step * 10,
            sim.total_in_transit(),
            sim.exited(),
            queues.join(" ")
        );
    }
    for r in sim.finish().records {
        println!("vehicle {} ({:?}): delay {:?} s", r.vehicle, r.class, r.delay_s);
    }
    Ok(())
}
