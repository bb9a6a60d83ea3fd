//! Temporary holding of CAVs at roadside parking facilities.
//!
//! When the network density reaches the critical value, CAVs queued on a
//! street that has a facility and whose remaining distance is at least
//! `phi` are parked, up to the facility's free capacity. Each parked vehicle
//! rejoins the back of the queue it left once its holding time reaches `tau`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{Capacity, MovementId};
use crate::vehicle::{VehicleClass, VehicleId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HoldingParams {
    pub enabled: bool,
    /// Network critical density, veh/lane-km.
    pub rho_cr: f64,
    /// Remaining-distance threshold in links.
    pub phi: u32,
    #[serde(with = "crate::units::seconds")]
    pub tau: f64,
    #[serde(with = "crate::units::limit")]
    pub max_holds: Option<u32>,
    /// CAV share of generated vehicles, percent.
    pub penetration_pct: f64,
    /// Added to a held vehicle's delay for each exit/re-entry manoeuvre.
    #[serde(with = "crate::units::seconds")]
    pub maneuver_penalty: f64,
}

impl Default for HoldingParams {
    fn default() -> Self {
        HoldingParams {
            enabled: false,
            rho_cr: 20.0,
            phi: 8,
            tau: 360.0,
            max_holds: Some(1),
            penetration_pct: 100.0,
            maneuver_penalty: 20.0,
        }
    }
}

impl HoldingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_cr > 0.0) {
            return Err(Error::scenario(format!(
                "holding.rho_cr must be positive, got {}",
                self.rho_cr
            )));
        }
        if self.phi < 1 {
            return Err(Error::scenario("holding.phi must be at least 1 link"));
        }
        if !(self.tau > 0.0) {
            return Err(Error::scenario(format!(
                "holding.tau must be positive, got {}",
                self.tau
            )));
        }
        if !(0.0..=100.0).contains(&self.penetration_pct) {
            return Err(Error::scenario(format!(
                "holding.penetration_pct must lie in [0, 100], got {}",
                self.penetration_pct
            )));
        }
        if !(self.maneuver_penalty >= 0.0) {
            return Err(Error::scenario("holding.maneuver_penalty must be non-negative"));
        }
        Ok(())
    }

    pub fn may_hold_again(&self, holds_used: u32) -> bool {
        self.max_holds.is_none_or(|m| holds_used < m)
    }
}

/// Bernoulli class draw. Always consumes exactly one draw from `rng`.
pub fn assign_class<R: Rng + ?Sized>(penetration_pct: f64, rng: &mut R) -> VehicleClass {
    let u: f64 = rng.random();
    if u < penetration_pct / 100.0 {
        VehicleClass::Cav
    } else {
        VehicleClass::Hdv
    }
}

/// Number of vehicles to hold: zero below the critical density, otherwise
/// the eligible count capped by the facility's free spaces.
pub fn eligible_hold_count(
    density: f64,
    rho_cr: f64,
    eligible: usize,
    capacity: Capacity,
    occupancy: u32,
) -> usize {
    if density < rho_cr {
        return 0;
    }
    eligible.min(capacity.remaining(occupancy) as usize)
}

/// Held and present CAV counts after one step:
/// `held' = held - enter + hold`, `present' = present + q + enter - hold`.
pub fn evolve_hold_state(
    held: u32,
    present: u32,
    n_hold: u32,
    n_enter: u32,
    net_flow: i64,
) -> std::result::Result<(u32, u32), String> {
    let h = i64::from(held) - i64::from(n_enter) + i64::from(n_hold);
    let p = i64::from(present) + net_flow + i64::from(n_enter) - i64::from(n_hold);
    if h < 0 || p < 0 {
        return Err(format!(
            "negative count: held {held} - {n_enter} + {n_hold}, present {present} + {net_flow} + {n_enter} - {n_hold}"
        ));
    }
    Ok((h as u32, p as u32))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HoldEntry {
    pub vehicle: VehicleId,
    pub movement: MovementId,
    pub start_step: u64,
}

/// Vehicles parked at one facility, in the order they arrived.
#[derive(Debug, Clone, Default)]
pub struct HoldLedger {
    entries: Vec<HoldEntry>,
}

impl HoldLedger {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[HoldEntry] {
        &self.entries
    }

    pub fn push(&mut self, entry: HoldEntry) {
        self.entries.push(entry);
    }

    /// Cumulative holding time `e_v` of an entry at `step`.
    pub fn held_time(entry: &HoldEntry, step: u64, step_s: f64) -> f64 {
        (step - entry.start_step) as f64 * step_s
    }

    fn is_due(entry: &HoldEntry, step: u64, step_s: f64, tau: f64) -> bool {
        // Tolerate float noise when tau is an exact multiple of the step.
        Self::held_time(entry, step, step_s) >= tau - 1e-9
    }

    /// Count of entries whose holding time has reached `tau`.
    pub fn release_count(&self, step: u64, step_s: f64, tau: f64) -> usize {
        self.entries
            .iter()
            .filter(|e| Self::is_due(e, step, step_s, tau))
            .count()
    }

    /// Removes and returns the entries due for release, in ledger order.
    pub fn release(&mut self, step: u64, step_s: f64, tau: f64) -> Vec<HoldEntry> {
        let (due, keep): (Vec<_>, Vec<_>) = self
            .entries
            .iter()
            .partition(|e| Self::is_due(e, step, step_s, tau));
        self.entries = keep;
        due
    }
}
