//! Grid network construction: links, movements, the four-phase plan,
//! centroid rings, random parking placement and perimeter regions.
//!
//! Intersections sit on an integer lattice with `x` growing east and `y`
//! growing north. Node ids are row-major: `id = y * cols + x`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;
pub type LinkId = usize;
pub type MovementId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Heading {
    North,
    East,
    South,
    West,
}

impl Heading {
    fn left(self) -> Heading {
        match self {
            Heading::North => Heading::West,
            Heading::West => Heading::South,
            Heading::South => Heading::East,
            Heading::East => Heading::North,
        }
    }

    fn right(self) -> Heading {
        match self {
            Heading::North => Heading::East,
            Heading::East => Heading::South,
            Heading::South => Heading::West,
            Heading::West => Heading::North,
        }
    }

    fn opposite(self) -> Heading {
        self.left().left()
    }

    pub fn is_north_south(self) -> bool {
        matches!(self, Heading::North | Heading::South)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Turn {
    Left,
    Through,
    Right,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: LinkId,
    pub from: NodeId,
    pub to: NodeId,
    pub length_m: f64,
    pub lanes: u32,
    pub free_flow_kmh: f64,
    pub heading: Heading,
}

impl Link {
    pub fn free_flow_secs(&self) -> f64 {
        self.length_m / (self.free_flow_kmh / 3.6)
    }

    pub fn lane_km(&self) -> f64 {
        self.length_m / 1000.0 * f64::from(self.lanes)
    }
}

/// A pair of incoming and outgoing links sharing an intersection.
#[derive(Debug, Clone, PartialEq)]
pub struct Movement {
    pub id: MovementId,
    pub node: NodeId,
    pub inbound: LinkId,
    pub outbound: LinkId,
    pub turn: Turn,
    /// Heading of the approach the movement is served from.
    pub approach: Heading,
    /// Saturation flow in veh/h.
    pub saturation_flow: f64,
}

/// An admissible phase: the set of movements it serves. `index` is the
/// position in the four-phase plan (1..=4) and is used for tie-breaking.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    pub index: u8,
    pub movements: Vec<MovementId>,
}

impl Phase {
    pub fn serves(&self, movement: MovementId) -> bool {
        self.movements.contains(&movement)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Intersection {
    pub id: NodeId,
    pub x: usize,
    pub y: usize,
    pub movements: Vec<MovementId>,
    pub phases: Vec<Phase>,
}

impl Intersection {
    /// Phase as a binary vector over this intersection's movements.
    pub fn phase_vector(&self, phase: &Phase) -> Vec<bool> {
        self.movements.iter().map(|m| phase.serves(*m)).collect()
    }
}

/// An undirected street segment between two adjacent intersections,
/// stored with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Street {
    pub a: NodeId,
    pub b: NodeId,
}

impl Street {
    pub fn new(u: NodeId, v: NodeId) -> Self {
        Street {
            a: u.min(v),
            b: u.max(v),
        }
    }
}

impl fmt::Display for Street {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.a, self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Capacity {
    #[default]
    Unbounded,
    Limited(u32),
}

impl Capacity {
    pub fn remaining(self, occupancy: u32) -> u32 {
        match self {
            Capacity::Unbounded => u32::MAX - occupancy,
            Capacity::Limited(n) => n.saturating_sub(occupancy),
        }
    }

    pub fn admits(self, occupancy: u32) -> bool {
        match self {
            Capacity::Unbounded => true,
            Capacity::Limited(n) => occupancy <= n,
        }
    }

    pub fn as_option(self) -> Option<u32> {
        match self {
            Capacity::Unbounded => None,
            Capacity::Limited(n) => Some(n),
        }
    }
}

impl From<Option<u32>> for Capacity {
    fn from(v: Option<u32>) -> Self {
        v.map_or(Capacity::Unbounded, Capacity::Limited)
    }
}

impl Serialize for Capacity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        crate::units::limit::serialize(&self.as_option(), s)
    }
}

impl<'de> Deserialize<'de> for Capacity {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        crate::units::limit::deserialize(d).map(Capacity::from)
    }
}

impl fmt::Display for Capacity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Capacity::Unbounded => f.write_str("unbounded"),
            Capacity::Limited(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParkingFacility {
    pub capacity: Capacity,
    pub occupancy: u32,
}

impl ParkingFacility {
    pub fn new(capacity: Capacity) -> Self {
        ParkingFacility {
            capacity,
            occupancy: 0,
        }
    }
}

/// A location that generates and attracts trips, attached to a street.
/// Vehicles enter at the street midpoint in either direction and leave
/// when they reach the midpoint of either direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centroid {
    pub id: usize,
    pub street: Street,
    pub ring_index: Option<usize>,
    pub parking: Option<ParkingFacility>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkZone {
    /// Both endpoints inside or on the perimeter square.
    Interior,
    /// Both endpoints strictly outside the square.
    Exterior,
    /// One endpoint on the perimeter, the other outside.
    Crossing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Perimeter {
    pub side: usize,
    pub nodes: BTreeSet<NodeId>,
    pub zones: Vec<LinkZone>,
    /// Indexed by movement id: true when the movement feeds an interior
    /// link from a non-interior one at a perimeter intersection.
    pub inbound: Vec<bool>,
    pub interior_lane_km: f64,
}

impl Perimeter {
    pub fn interior_links(&self) -> impl Iterator<Item = LinkId> + '_ {
        self.zones
            .iter()
            .enumerate()
            .filter(|(_, z)| **z == LinkZone::Interior)
            .map(|(id, _)| id)
    }

    pub fn is_inbound(&self, movement: MovementId) -> bool {
        self.inbound[movement]
    }

    pub fn inbound_movements(&self) -> impl Iterator<Item = MovementId> + '_ {
        self.inbound
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(id, _)| id)
    }
}

/// Geometry parameters of a square-lattice network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub link_length_m: f64,
    pub lanes: u32,
    pub free_flow_kmh: f64,
    pub sat_flow_vphpl: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            rows: 10,
            cols: 10,
            link_length_m: 200.0,
            lanes: 3,
            free_flow_kmh: 50.0,
            sat_flow_vphpl: 1800.0,
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<Network> {
        Network::build_grid(
            self.rows,
            self.cols,
            self.link_length_m,
            self.lanes,
            self.free_flow_kmh,
            self.sat_flow_vphpl,
        )
    }
}

#[derive(Debug, Clone)]
pub struct Network {
    pub rows: usize,
    pub cols: usize,
    pub intersections: Vec<Intersection>,
    pub links: Vec<Link>,
    pub movements: Vec<Movement>,
    link_lookup: HashMap<(NodeId, NodeId), LinkId>,
    /// Movements whose inbound link is the key link, ordered by id.
    out_movements: Vec<Vec<MovementId>>,
    movement_lookup: HashMap<(LinkId, LinkId), MovementId>,
    perimeter: Option<Perimeter>,
}

impl Network {
    /// Two-way streets between lattice neighbours, one dedicated lane per
    /// turn type on every approach and the four-phase plan at every node.
    ///
    /// Each movement's saturation flow is `sat_flow` times the lanes serving
    /// it, taken as `max(1, lanes / 3)` since left, through and right share
    /// the link's lanes equally.
    pub fn build_grid(
        rows: usize,
        cols: usize,
        link_length_m: f64,
        lanes: u32,
        free_flow_kmh: f64,
        sat_flow: f64,
    ) -> Result<Network> {
        if rows < 2 || cols < 2 {
            return Err(Error::GridTooSmall { rows, cols });
        }
        if !(link_length_m > 0.0) {
            return Err(Error::Geometry(format!(
                "link length must be positive, got {link_length_m}"
            )));
        }
        if lanes == 0 {
            return Err(Error::Geometry("links need at least one lane".into()));
        }
        if !(free_flow_kmh > 0.0) || !(sat_flow > 0.0) {
            return Err(Error::Geometry(
                "free-flow speed and saturation flow must be positive".into(),
            ));
        }

        let intersections: Vec<Intersection> = (0..rows * cols)
            .map(|id| Intersection {
                id,
                x: id % cols,
                y: id / cols,
                movements: Vec::new(),
                phases: Vec::new(),
            })
            .collect();

        let mut links = Vec::new();
        let mut link_lookup = HashMap::new();
        for node in &intersections {
            let (x, y) = (node.x, node.y);
            let neighbours = [
                (y + 1 < rows).then(|| (x, y + 1, Heading::North)),
                (x + 1 < cols).then(|| (x + 1, y, Heading::East)),
                (y > 0).then(|| (x, y - 1, Heading::South)),
                (x > 0).then(|| (x - 1, y, Heading::West)),
            ];
            for (nx, ny, heading) in neighbours.into_iter().flatten() {
                let to = ny * cols + nx;
                let id = links.len();
                links.push(Link {
                    id,
                    from: node.id,
                    to,
                    length_m: link_length_m,
                    lanes,
                    free_flow_kmh,
                    heading,
                });
                link_lookup.insert((node.id, to), id);
            }
        }

        let lanes_per_movement = f64::from((lanes / 3).max(1));
        let mut movements = Vec::new();
        let mut movement_lookup = HashMap::new();
        let mut out_movements = vec![Vec::new(); links.len()];
        let mut intersections = intersections;
        // Incoming links grouped by the node they end at.
        let mut incoming: Vec<Vec<LinkId>> = vec![Vec::new(); rows * cols];
        let mut outgoing: Vec<Vec<LinkId>> = vec![Vec::new(); rows * cols];
        for link in &links {
            incoming[link.to].push(link.id);
            outgoing[link.from].push(link.id);
        }
        for node in 0..rows * cols {
            for &inb in &incoming[node] {
                let h_in = links[inb].heading;
                for &out in &outgoing[node] {
                    let h_out = links[out].heading;
                    let turn = if h_out == h_in {
                        Turn::Through
                    } else if h_out == h_in.left() {
                        Turn::Left
                    } else if h_out == h_in.right() {
                        Turn::Right
                    } else {
                        debug_assert_eq!(h_out, h_in.opposite());
                        continue;
                    };
                    let id = movements.len();
                    movements.push(Movement {
                        id,
                        node,
                        inbound: inb,
                        outbound: out,
                        turn,
                        approach: h_in,
                        saturation_flow: sat_flow * lanes_per_movement,
                    });
                    movement_lookup.insert((inb, out), id);
                    out_movements[inb].push(id);
                    intersections[node].movements.push(id);
                }
            }
        }

        for node in &mut intersections {
            let plan: [(u8, bool, &[Turn]); 4] = [
                (1, true, &[Turn::Through, Turn::Right]),
                (2, true, &[Turn::Left]),
                (3, false, &[Turn::Through, Turn::Right]),
                (4, false, &[Turn::Left]),
            ];
            for (index, north_south, turns) in plan {
                let served: Vec<MovementId> = node
                    .movements
                    .iter()
                    .copied()
                    .filter(|m| {
                        let mv = &movements[*m];
                        mv.approach.is_north_south() == north_south && turns.contains(&mv.turn)
                    })
                    .collect();
                if !served.is_empty() {
                    node.phases.push(Phase {
                        index,
                        movements: served,
                    });
                }
            }
        }

        Ok(Network {
            rows,
            cols,
            intersections,
            links,
            movements,
            link_lookup,
            out_movements,
            movement_lookup,
            perimeter: None,
        })
    }

    pub fn node_id(&self, x: usize, y: usize) -> NodeId {
        y * self.cols + x
    }

    pub fn link_between(&self, from: NodeId, to: NodeId) -> Option<LinkId> {
        self.link_lookup.get(&(from, to)).copied()
    }

    pub fn movement_between(&self, inbound: LinkId, outbound: LinkId) -> Option<MovementId> {
        self.movement_lookup.get(&(inbound, outbound)).copied()
    }

    /// Movements that discharge vehicles from `link`.
    pub fn movements_from(&self, link: LinkId) -> &[MovementId] {
        &self.out_movements[link]
    }

    /// Both directed links of a street.
    pub fn street_links(&self, street: Street) -> Option<[LinkId; 2]> {
        Some([
            self.link_between(street.a, street.b)?,
            self.link_between(street.b, street.a)?,
        ])
    }

    pub fn street_of(&self, link: LinkId) -> Street {
        let l = &self.links[link];
        Street::new(l.from, l.to)
    }

    pub fn streets(&self) -> Vec<Street> {
        let set: BTreeSet<Street> = self
            .links
            .iter()
            .map(|l| Street::new(l.from, l.to))
            .collect();
        set.into_iter().collect()
    }

    pub fn total_lane_km(&self) -> f64 {
        self.links.iter().map(Link::lane_km).sum()
    }

    pub fn perimeter(&self) -> Option<&Perimeter> {
        self.perimeter.as_ref()
    }

    /// Lower-left corner of the centred square of side `side` blocks.
    fn ring_corner(&self, side: usize) -> Result<(usize, usize)> {
        let invalid = |reason: &str| Error::InvalidRing {
            index: side,
            reason: reason.to_string(),
        };
        if side % 2 == 0 {
            return Err(invalid("ring side must be odd"));
        }
        if side >= self.rows.min(self.cols) {
            return Err(invalid("ring does not fit inside the grid"));
        }
        if (self.cols - 1 - side) % 2 != 0 || (self.rows - 1 - side) % 2 != 0 {
            return Err(invalid("ring cannot be centred on this grid"));
        }
        Ok(((self.cols - 1 - side) / 2, (self.rows - 1 - side) / 2))
    }

    /// The `4 * side` street segments forming the square ring of `side` blocks.
    pub fn ring_streets(&self, side: usize) -> Result<Vec<Street>> {
        let (x0, y0) = self.ring_corner(side)?;
        let (x1, y1) = (x0 + side, y0 + side);
        let mut streets = Vec::with_capacity(4 * side);
        for x in x0..x1 {
            streets.push(Street::new(self.node_id(x, y0), self.node_id(x + 1, y0)));
        }
        for y in y0..y1 {
            streets.push(Street::new(self.node_id(x1, y), self.node_id(x1, y + 1)));
        }
        for x in (x0..x1).rev() {
            streets.push(Street::new(self.node_id(x, y1), self.node_id(x + 1, y1)));
        }
        for y in (y0..y1).rev() {
            streets.push(Street::new(self.node_id(x0, y), self.node_id(x0, y + 1)));
        }
        Ok(streets)
    }

    /// Every odd ring that can be centred on this grid, innermost first.
    pub fn valid_rings(&self) -> Vec<usize> {
        (1..self.rows.min(self.cols))
            .filter(|i| self.ring_corner(*i).is_ok())
            .collect()
    }

    /// Marks the perimeter on the square ring of side `side`.
    pub fn define_perimeter(mut self, side: usize) -> Result<Network> {
        let (x0, y0) = self.ring_corner(side)?;
        let (x1, y1) = (x0 + side, y0 + side);
        let inside = |n: &Intersection| n.x >= x0 && n.x <= x1 && n.y >= y0 && n.y <= y1;
        let on_ring = |n: &Intersection| inside(n) && (n.x == x0 || n.x == x1 || n.y == y0 || n.y == y1);

        let nodes: BTreeSet<NodeId> = self
            .intersections
            .iter()
            .filter(|n| on_ring(n))
            .map(|n| n.id)
            .collect();
        let zones: Vec<LinkZone> = self
            .links
            .iter()
            .map(|l| {
                let (a, b) = (&self.intersections[l.from], &self.intersections[l.to]);
                match (inside(a), inside(b)) {
                    (true, true) => LinkZone::Interior,
                    (false, false) => LinkZone::Exterior,
                    _ => LinkZone::Crossing,
                }
            })
            .collect();
        let inbound = self
            .movements
            .iter()
            .map(|m| {
                nodes.contains(&m.node)
                    && zones[m.inbound] != LinkZone::Interior
                    && zones[m.outbound] == LinkZone::Interior
            })
            .collect();
        let interior_lane_km = self
            .links
            .iter()
            .filter(|l| zones[l.id] == LinkZone::Interior)
            .map(Link::lane_km)
            .sum();
        self.perimeter = Some(Perimeter {
            side,
            nodes,
            zones,
            inbound,
            interior_lane_km,
        });
        Ok(self)
    }
}

/// Centroids on the rings listed in `ring_indices`, `4 * i` per ring.
pub fn ring_centroids(network: &Network, ring_indices: &[usize]) -> Result<Vec<Centroid>> {
    let mut out = Vec::new();
    for &ring in ring_indices {
        for street in network.ring_streets(ring)? {
            out.push(Centroid {
                id: out.len(),
                street,
                ring_index: Some(ring),
                parking: None,
            });
        }
    }
    Ok(out)
}

/// Uniform sample without replacement over all street segments of the grid.
pub fn random_centroids(network: &Network, count: usize, seed: u64) -> Result<Vec<Centroid>> {
    let candidates = network.streets();
    if count > candidates.len() {
        return Err(Error::TooManyLocations {
            requested: count,
            available: candidates.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, candidates.len(), count).into_vec();
    picked.sort_unstable();
    Ok(picked
        .into_iter()
        .enumerate()
        .map(|(id, c)| Centroid {
            id,
            street: candidates[c],
            ring_index: None,
            parking: None,
        })
        .collect())
}
