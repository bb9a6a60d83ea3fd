//! One seed of the reference scenario.
//!
//! cargo run --release --example quickstart

use std::sync::Arc;

use gridhold::runner::run_seed;
use gridhold::Scenario;

fn main() -> gridhold::Result<()> {
    let scenario = Scenario::default();
    let network = Arc::new(scenario.network()?);
    let run = run_seed(&scenario, &network, 1)?;
    let s = &run.summary;
    println!("trips injected   {}", s.injected);
    println!("trips completed  {}", s.exited);
    println!("total delay      {:.0} s", s.total_delay_s);
    println!("mean delay       {:.1} s/veh", s.mean_delay_s);
    println!("distance         {:.0} veh-km", s.travel_km);
    println!("peak in network  {}", s.max_in_network);
    println!("stability drift  {:.5} veh/step ({})", s.drift, if s.stable { "stable" } else { "unstable" });
    Ok(())
}
