//! Empirical stability audit under sustained demand, with and without holding.
//!
//! cargo run --release --example stability_audit -- [hours]

use std::sync::Arc;

use gridhold::metrics::stability_audit;
use gridhold::runner::holding_base;

fn main() -> gridhold::Result<()> {
    let hours: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(12.0);
    for rate in [1.5, 3.0] {
        for holding in [false, true] {
            let mut s = holding_base();
            s.holding.enabled = holding;
            s.demand.rate_per_od_vph = rate;
            s.demand.duration_s = hours * 3600.0;
            s.horizon_s = hours * 3600.0;
            let network = Arc::new(s.network()?);
            let out = s.build(&network, 1)?.run()?;
            let v = stability_audit(&out.in_network, &s.audit)?;
            println!(
                "{rate} veh/h, holding {:<5} drift {:+.4} veh/step, max {:>6} vehicles: {}",
                holding,
                v.drift,
                v.max_count,
                if v.stable { "stable" } else { "unstable" }
            );
        }
    }
    Ok(())
}
