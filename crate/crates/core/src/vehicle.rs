use serde::{Deserialize, Serialize};

use crate::topology::{LinkId, MovementId};

pub type VehicleId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VehicleClass {
    #[serde(rename = "CAV")]
    Cav,
    #[serde(rename = "HDV")]
    Hdv,
}

impl VehicleClass {
    pub fn label(self) -> &'static str {
        match self {
            VehicleClass::Cav => "CAV",
            VehicleClass::Hdv => "HDV",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Position {
    /// Travelling along `link`; reaches its downstream end at `ready_step`.
    InTransit { link: LinkId, ready_step: u64 },
    /// Waiting in the point queue of `movement` since `joined_step`.
    Queued { movement: MovementId, joined_step: u64 },
    /// Parked at `facility` since `start_step`, will rejoin `movement`.
    Held {
        facility: usize,
        movement: MovementId,
        start_step: u64,
    },
    Exited,
}

#[derive(Debug, Clone)]
pub struct Vehicle {
    pub id: VehicleId,
    pub class: VehicleClass,
    /// Links from the origin street to the destination street.
    pub route: Vec<LinkId>,
    /// Index into `route` of the current link.
    pub leg: usize,
    pub position: Position,
    pub depart_step: u64,
    pub arrive_step: Option<u64>,
    /// Unobstructed travel time along `route` at the simulation's step size.
    pub free_flow_s: f64,
    pub holds_used: u32,
    pub held_steps: u64,
}

impl Vehicle {
    /// Remaining travel distance `g_v`: intersections still to cross.
    /// Zero once the vehicle is on its destination street.
    pub fn remaining(&self) -> usize {
        self.route.len() - 1 - self.leg
    }

    pub fn route_len(&self) -> usize {
        self.route.len() - 1
    }

    pub fn current_link(&self) -> LinkId {
        self.route[self.leg]
    }

    pub fn next_link(&self) -> Option<LinkId> {
        self.route.get(self.leg + 1).copied()
    }

    pub fn is_cav(&self) -> bool {
        self.class == VehicleClass::Cav
    }
}
