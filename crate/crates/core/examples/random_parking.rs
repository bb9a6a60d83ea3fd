//! Holding at randomly placed facilities of limited size: how full they get.
//!
//! cargo run --release --example random_parking -- [count] [capacity]

use std::sync::Arc;

use gridhold::runner::{holding_base, run_seed};
use gridhold::scenario::Placement;
use gridhold::Capacity;

fn main() -> gridhold::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u32>().ok());
    let count = args.next().flatten().unwrap_or(28);
    let capacity = args.next().flatten().unwrap_or(20);

    let mut s = holding_base();
    s.parking.placement = Placement::Random;
    s.parking.count = count as usize;
    s.parking.capacity = Capacity::Limited(capacity);
    let network = Arc::new(s.network()?);
    let run = run_seed(&s, &network, 1)?;
    let full = run.output.facilities.iter().filter(|f| f.2 == capacity).count();
    println!("{count} facilities of {capacity} spaces, {full} filled at some point");
    for (street, _, peak) in &run.output.facilities {
        println!("  street {street}: peak {peak}");
    }
    println!("held vehicles {}, total delay {:.0} s", run.summary.held_vehicles, run.summary.total_delay_s);
    Ok(())
}
