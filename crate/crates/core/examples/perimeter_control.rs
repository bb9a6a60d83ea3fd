//! Q-MP, N-MP and Bang-Bang gating on demand concentrated in the centre.
//!
//! cargo run --release --example perimeter_control

use std::sync::Arc;

use gridhold::demand::DemandPattern;
use gridhold::runner::{run_seed, CONCENTRATED_RATE_VPH};
use gridhold::{ControllerKind, Scenario};

fn main() -> gridhold::Result<()> {
    for kind in [ControllerKind::Qmp, ControllerKind::Nmp, ControllerKind::Bangbang] {
        let mut s = Scenario::default();
        s.record_events = false;
        s.demand.pattern = DemandPattern::Concentrated;
        s.demand.rate_per_od_vph = CONCENTRATED_RATE_VPH;
        s.controller.kind = kind;
        s.controller.perimeter_side = Some(7);
        s.controller.rho_p_cr = 40.0;
        let network = Arc::new(s.network()?);
        let (mut delay, mut peak) = (0.0, 0.0f64);
        for seed in s.seeds.clone() {
            let run = run_seed(&s, &network, seed)?;
            delay += run.summary.total_delay_s;
            let p = run.output.frames.iter().filter_map(|f| f.rho_p).fold(0.0, f64::max);
            peak = peak.max(p);
        }
        println!(
            "{kind:?}: mean total delay {:.3e} s, peak interior density {peak:.1} veh/lane-km",
            delay / s.seeds.len() as f64
        );
    }
    Ok(())
}
