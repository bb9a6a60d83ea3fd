//! Network exit function of plain Q-MP under congesting uniform demand,
//! binned by density.
//!
//! cargo run --release --example mfd -- [rate_vph]

use std::collections::BTreeMap;
use std::sync::Arc;

use gridhold::runner::run_seed;
use gridhold::Scenario;

fn main() -> gridhold::Result<()> {
    let rate: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(5.0);
    let mut scenario = Scenario::default();
    scenario.demand.rate_per_od_vph = rate;
    scenario.record_events = false;
    let network = Arc::new(scenario.network()?);

    let mut bins: BTreeMap<i64, (f64, f64, usize)> = BTreeMap::new();
    for seed in scenario.seeds.clone() {
        for f in run_seed(&scenario, &network, seed)?.output.frames {
            if f.rho > 0.0 {
                let e = bins.entry((f.rho / 5.0).floor() as i64).or_default();
                e.0 += f.rho;
                e.1 += f.nef;
                e.2 += 1;
            }
        }
    }
    println!("{:>10} {:>10} {:>6}", "rho", "NEF (vph)", "bins");
    for (rho, nef, n) in bins.values() {
        println!("{:>10.1} {:>10.0} {:>6}", rho / *n as f64, nef / *n as f64, n);
    }
    Ok(())
}
