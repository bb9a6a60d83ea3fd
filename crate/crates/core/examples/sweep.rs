//! Runs a named preset sweep and writes `sweep.csv`.
//!
//! cargo run --release --example sweep -- phi-sweep [out_dir]

use std::path::PathBuf;

use gridhold::runner::{run_preset, worker_count, PRESET_NAMES};

fn main() -> gridhold::Result<()> {
    let mut args = std::env::args().skip(1);
    let Some(name) = args.next() else {
        eprintln!("usage: sweep <preset> [out_dir]\npresets: {}", PRESET_NAMES.join(", "));
        std::process::exit(2);
    };
    let out = args.next().map_or_else(|| PathBuf::from("out"), PathBuf::from);
    for row in run_preset(&name, Some(&out), worker_count())? {
        println!(
            "{}={:<10} delay {:.4e} s  ({:+.2}% vs baseline)  held {:.0}",
            row.parameter, row.value, row.mean_total_delay_s, row.delay_reduction_pct, row.held_vehicles
        );
    }
    println!("wrote {}", out.join(&name).join("sweep.csv").display());
    Ok(())
}
