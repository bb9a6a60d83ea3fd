//! Paired comparison of plain Q-MP against Q-MP with CAV holding.
//!
//! cargo run --release --example holding_comparison

use std::sync::Arc;

use gridhold::metrics::{delay_by_group, paired_delay_reduction};
use gridhold::runner::{holding_base, run_seed};

fn main() -> gridhold::Result<()> {
    let held = holding_base();
    let mut base = held.clone();
    base.holding.enabled = false;
    let network = Arc::new(held.network()?);

    println!("{:>4} {:>14} {:>14} {:>8} {:>7}", "seed", "base delay", "held delay", "change", "held");
    for seed in held.seeds.clone() {
        let b = run_seed(&base, &network, seed)?;
        let h = run_seed(&held, &network, seed)?;
        println!(
            "{seed:>4} {:>14.0} {:>14.0} {:>7.1}% {:>7}",
            b.summary.total_delay_s,
            h.summary.total_delay_s,
            100.0 * (h.summary.total_delay_s - b.summary.total_delay_s) / b.summary.total_delay_s,
            h.summary.held_vehicles
        );
        if seed == held.seeds[0] {
            println!("  delay change by route length (seed {seed}):");
            for row in paired_delay_reduction(&b.output.records, &h.output.records) {
                if row.count > 0 {
                    println!(
                        "    len {:>2} {:>5} n={:>5} saved {:>10.0} s",
                        row.route_len,
                        if row.held { "held" } else { "other" },
                        row.count,
                        row.total_reduction_s
                    );
                }
            }
            let table = delay_by_group(&h.output.records);
            println!("  unfinished trips with holding: {}", table.unfinished);
        }
    }
    Ok(())
}
