//! Scenario documents.
//!
//! A scenario is a TOML document. Every key is optional and falls back to
//! the reference settings (10×10 grid, 1.05 veh/h per OD pair for one hour,
//! Q-MP, holding off, two-hour horizon, seeds 1 to 5). Durations accept a
//! number of seconds or a string such as `"6min"`; capacities and hold
//! limits accept an integer or `"unbounded"`.
//!
//! ```toml
//! label = "hold-ring7"
//! seeds = [1, 2, 3]
//! horizon_s = "2h"
//!
//! [controller]
//! kind = "qmp"
//!
//! [holding]
//! enabled = true
//! rho_cr = 20
//! tau = "6min"
//!
//! [parking]
//! placement = "rings"
//! rings = [7]
//! capacity = "unbounded"
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::control::ControllerSpec;
use crate::demand::DemandSpec;
use crate::error::{Error, Result};
use crate::holding::HoldingParams;
use crate::metrics::{AuditConfig, DEFAULT_BIN_S};
use crate::rng::{stream_seed, Stream};
use crate::sim::{SimConfig, Simulation};
use crate::topology::{
    random_centroids, ring_centroids, Capacity, Centroid, GridSpec, Network, NodeId, ParkingFacility, Street,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CentroidSpec {
    /// Trip ends on every boundary street of these rings.
    pub rings: Vec<usize>,
    /// Explicit streets as node-id pairs; overrides `rings` when non-empty.
    pub streets: Vec<[NodeId; 2]>,
}

impl Default for CentroidSpec {
    fn default() -> Self {
        CentroidSpec {
            rings: vec![1, 3, 5, 7, 9],
            streets: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    None,
    #[default]
    Rings,
    Random,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParkingSpec {
    pub placement: Placement,
    pub rings: Vec<usize>,
    /// Number of randomly placed facilities.
    pub count: usize,
    /// Placement seed; when absent it is derived from the replication seed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub streets: Vec<[NodeId; 2]>,
    /// Spaces per facility.
    pub capacity: Capacity,
}

impl Default for ParkingSpec {
    fn default() -> Self {
        ParkingSpec {
            placement: Placement::Rings,
            rings: vec![7],
            count: 28,
            seed: None,
            streets: Vec::new(),
            capacity: Capacity::Unbounded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub label: String,
    pub seeds: Vec<u64>,
    #[serde(with = "crate::units::seconds")]
    pub step_s: f64,
    #[serde(with = "crate::units::seconds")]
    pub horizon_s: f64,
    #[serde(with = "crate::units::seconds")]
    pub lost_time_s: f64,
    #[serde(with = "crate::units::seconds")]
    pub bin_s: f64,
    pub out_dir: PathBuf,
    pub record_events: bool,
    pub network: GridSpec,
    pub centroids: CentroidSpec,
    pub demand: DemandSpec,
    pub controller: ControllerSpec,
    pub holding: HoldingParams,
    pub parking: ParkingSpec,
    pub audit: AuditConfig,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            label: "default".into(),
            seeds: vec![1, 2, 3, 4, 5],
            step_s: 10.0,
            horizon_s: 7200.0,
            lost_time_s: 4.0,
            bin_s: DEFAULT_BIN_S,
            out_dir: PathBuf::from("out"),
            record_events: true,
            network: GridSpec::default(),
            centroids: CentroidSpec::default(),
            demand: DemandSpec::default(),
            controller: ControllerSpec::default(),
            holding: HoldingParams::default(),
            parking: ParkingSpec::default(),
            audit: AuditConfig::default(),
        }
    }
}

fn streets_from_pairs(network: &Network, pairs: &[[NodeId; 2]]) -> Result<Vec<Street>> {
    pairs
        .iter()
        .map(|[u, v]| {
            let s = Street::new(*u, *v);
            network
                .street_links(s)
                .map(|_| s)
                .ok_or_else(|| Error::scenario(format!("street {u}-{v} does not join adjacent intersections")))
        })
        .collect()
}

fn is_whole_multiple(x: f64, step: f64) -> bool {
    let r = x / step;
    (r - r.round()).abs() < 1e-9
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::scenario("seeds must not be empty"));
        }
        if !(self.step_s > 0.0) {
            return Err(Error::scenario(format!("step_s must be positive, got {}", self.step_s)));
        }
        if !(self.horizon_s > 0.0) || !is_whole_multiple(self.horizon_s, self.step_s) {
            return Err(Error::scenario(format!(
                "horizon_s must be a positive multiple of step_s ({}), got {}",
                self.step_s, self.horizon_s
            )));
        }
        if !(0.0..=self.step_s).contains(&self.lost_time_s) {
            return Err(Error::scenario(format!(
                "lost_time_s must lie in [0, step_s], got {}",
                self.lost_time_s
            )));
        }
        if !(self.bin_s > 0.0) || !is_whole_multiple(self.bin_s, self.step_s) {
            return Err(Error::scenario(format!(
                "bin_s must be a positive multiple of step_s, got {}",
                self.bin_s
            )));
        }
        if !(self.controller.rho_p_cr > 0.0) {
            return Err(Error::scenario("controller.rho_p_cr must be positive"));
        }
        if self.controller.kind.needs_perimeter() && self.controller.perimeter_side.is_none() {
            return Err(Error::MissingPerimeter(match self.controller.kind {
                crate::ControllerKind::Bangbang => "bangbang",
                _ => "nmp",
            }));
        }
        if self.parking.placement == Placement::Random && self.parking.count == 0 {
            return Err(Error::scenario("parking.count must be positive for random placement"));
        }
        if self.audit.window_frac <= 0.0 || self.audit.window_frac > 1.0 {
            return Err(Error::scenario("audit.window_frac must lie in (0, 1]"));
        }
        self.demand.validate()?;
        self.holding.validate()?;

        let network = self.network()?;
        let centroids = self.centroids(&network)?;
        if self.demand.od_pairs(&centroids).is_empty() && self.demand.rate_per_od_vph > 0.0 {
            return Err(Error::scenario("demand has no origin-destination pairs"));
        }
        self.parking(&network, self.seeds[0])?;
        self.controller.build(&network)?;
        Ok(())
    }

    /// The grid, with the controller's perimeter when one is configured.
    pub fn network(&self) -> Result<Network> {
        let network = self.network.build()?;
        match self.controller.perimeter_side {
            Some(side) => network.define_perimeter(side),
            None => Ok(network),
        }
    }

    pub fn centroids(&self, network: &Network) -> Result<Vec<Centroid>> {
        if self.centroids.streets.is_empty() {
            return ring_centroids(network, &self.centroids.rings);
        }
        let streets = streets_from_pairs(network, &self.centroids.streets)?;
        let mut out = Vec::with_capacity(streets.len());
        for (id, street) in streets.into_iter().enumerate() {
            if out.iter().any(|c: &Centroid| c.street == street) {
                return Err(Error::scenario(format!("centroid street {street} listed twice")));
            }
            out.push(Centroid {
                id,
                street,
                ring_index: None,
                parking: None,
            });
        }
        // Tag explicit streets with their ring so concentrated demand works.
        for ring in network.valid_rings() {
            let ring_streets = network.ring_streets(ring)?;
            for c in out.iter_mut().filter(|c| c.ring_index.is_none()) {
                if ring_streets.contains(&c.street) {
                    c.ring_index = Some(ring);
                }
            }
        }
        Ok(out)
    }

    /// Parking facilities for the replication with master seed `seed`.
    pub fn parking(&self, network: &Network, seed: u64) -> Result<Vec<Centroid>> {
        let spec = &self.parking;
        let mut sites = match spec.placement {
            Placement::None => Vec::new(),
            Placement::Rings => ring_centroids(network, &spec.rings)?,
            Placement::Random => {
                let s = spec.seed.unwrap_or_else(|| stream_seed(seed, Stream::Placement));
                random_centroids(network, spec.count, s)?
            }
            Placement::Explicit => {
                let streets = streets_from_pairs(network, &spec.streets)?;
                let mut sorted = streets.clone();
                sorted.sort();
                sorted.dedup();
                if sorted.len() != streets.len() {
                    return Err(Error::scenario("parking.streets lists a street twice"));
                }
                streets
                    .into_iter()
                    .enumerate()
                    .map(|(id, street)| Centroid {
                        id,
                        street,
                        ring_index: None,
                        parking: None,
                    })
                    .collect()
            }
        };
        for c in &mut sites {
            c.parking = Some(ParkingFacility::new(spec.capacity));
        }
        Ok(sites)
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            step_s: self.step_s,
            horizon_s: self.horizon_s,
            lost_time_s: self.lost_time_s,
            bin_s: self.bin_s,
            demand: self.demand.clone(),
            holding: self.holding.clone(),
            record_events: self.record_events,
        }
    }

    /// A ready-to-run simulation for one replication seed.
    pub fn build(&self, network: &Arc<Network>, seed: u64) -> Result<Simulation> {
        let centroids = self.centroids(network)?;
        let parking = if self.holding.enabled {
            self.parking(network, seed)?
        } else {
            Vec::new()
        };
        let controller = self.controller.build(network)?;
        Simulation::new(
            Arc::clone(network),
            centroids,
            &parking,
            controller,
            self.sim_config(),
            seed,
        )
    }
}
