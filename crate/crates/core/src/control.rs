//! Decentralised signal control: queue-based max pressure (Q-MP), Bang-Bang
//! perimeter gating layered on Q-MP, and N-MP's penalised inbound weights.
//!
//! All controllers see the same read-only snapshot each control interval:
//! the number of *present* vehicles queued on every movement (held
//! vehicles are off-street and never counted) and, when a perimeter is
//! defined, the interior density.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{LinkId, Network, Phase};

/// Movement weight: own queue minus the downstream queues weighted by the
/// turning ratios out of the receiving link.
pub fn qmp_weight(present: f64, downstream: &[(f64, f64)]) -> f64 {
    present - downstream.iter().map(|(x, r)| x * r).sum::<f64>()
}

/// Sum of `w * C` over the movements a phase serves.
pub fn phase_pressure<I: IntoIterator<Item = (f64, f64)>>(served: I) -> f64 {
    served.into_iter().map(|(w, c)| w * c).sum()
}

/// Index of the maximum pressure; ties go to the lowest index.
///
/// # Panics
/// If `pressures` is empty.
pub fn select_phase(pressures: &[f64]) -> usize {
    assert!(!pressures.is_empty(), "intersection without admissible phases");
    let mut best = 0;
    for (i, p) in pressures.iter().enumerate().skip(1) {
        if *p > pressures[best] {
            best = i;
        }
    }
    best
}

/// Transformed-sigmoid penalty on inbound movements.
pub fn psi(excess_density: f64, queue: f64, xi: f64) -> f64 {
    let sigmoid = 1.0 / (1.0 + (-queue / 400.0).exp());
    xi * excess_density * excess_density * (sigmoid - 0.5) * 1e3
}

/// N-MP weight for an inbound perimeter movement. The penalty only
/// applies while the interior density exceeds its critical value.
pub fn nmp_weight(weight: f64, excess_density: f64, queue: f64, xi: f64) -> f64 {
    if excess_density > 0.0 {
        weight - psi(excess_density, queue, xi)
    } else {
        weight
    }
}

/// Turning ratios out of `link` observed from the routes of the vehicles
/// queued on it. Empty links contribute no terms.
pub fn turning_terms(network: &Network, link: LinkId, present: &[u32]) -> Vec<(f64, f64)> {
    let outs = network.movements_from(link);
    let total: u32 = outs.iter().map(|m| present[*m]).sum();
    if total == 0 {
        return Vec::new();
    }
    outs.iter()
        .map(|m| {
            let x = f64::from(present[*m]);
            (x, x / f64::from(total))
        })
        .collect()
}

pub struct ControlInput<'a> {
    pub network: &'a Network,
    /// Present (queued, not held) vehicles per movement.
    pub present: &'a [u32],
    /// Interior density, when a perimeter is defined.
    pub interior_density: Option<f64>,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControllerDecision {
    /// Slot in `Intersection::phases` of the active phase, per intersection.
    pub active: Vec<usize>,
    /// Movements metered to zero service this interval.
    pub blocked: Vec<bool>,
}

impl ControllerDecision {
    pub fn active_phase<'n>(&self, network: &'n Network, node: usize) -> &'n Phase {
        &network.intersections[node].phases[self.active[node]]
    }
}

pub trait SignalController: Send + Sync {
    fn name(&self) -> &'static str;
    fn decide(&self, input: &ControlInput<'_>) -> ControllerDecision;
}

fn base_weights(input: &ControlInput<'_>) -> Vec<f64> {
    let net = input.network;
    let downstream: Vec<Vec<(f64, f64)>> = (0..net.links.len())
        .map(|l| turning_terms(net, l, input.present))
        .collect();
    net.movements
        .iter()
        .map(|m| qmp_weight(f64::from(input.present[m.id]), &downstream[m.outbound]))
        .collect()
}

/// Movements with an empty queue cannot discharge and are left out of the
/// phase pressure, so their (possibly negative) weights cannot starve a
/// phase that has vehicles to serve.
fn max_pressure(input: &ControlInput<'_>, weights: &[f64], blocked: Vec<bool>) -> ControllerDecision {
    let network = input.network;
    let active = network
        .intersections
        .iter()
        .map(|node| {
            let pressures: Vec<f64> = node
                .phases
                .iter()
                .map(|p| {
                    let served = p.movements.iter().filter(|m| !blocked[**m] && input.present[**m] > 0);
                    phase_pressure(served.map(|m| (weights[*m], network.movements[*m].saturation_flow)))
                })
                .collect();
            select_phase(&pressures)
        })
        .collect();
    ControllerDecision { active, blocked }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct QueueMaxPressure;

impl SignalController for QueueMaxPressure {
    fn name(&self) -> &'static str {
        "qmp"
    }

    fn decide(&self, input: &ControlInput<'_>) -> ControllerDecision {
        let weights = base_weights(input);
        max_pressure(input, &weights, vec![false; input.network.movements.len()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerimeterParams {
    /// Critical interior density, veh/lane-km.
    pub critical_density: f64,
    /// N-MP penalty gain.
    pub xi: f64,
}

/// Q-MP everywhere; while the interior is above critical density every
/// inbound movement at the perimeter gets a red meter and drops out of
/// the pressure calculation.
#[derive(Debug, Clone)]
pub struct BangBang {
    params: PerimeterParams,
    inbound: Vec<bool>,
}

impl BangBang {
    pub fn new(network: &Network, params: PerimeterParams) -> Result<Self> {
        let perimeter = network.perimeter().ok_or(Error::MissingPerimeter("bangbang"))?;
        if !(params.critical_density > 0.0) {
            return Err(Error::scenario("controller.rho_p_cr must be positive"));
        }
        Ok(BangBang {
            params,
            inbound: perimeter.inbound.clone(),
        })
    }

    /// Movements to block for a given interior density.
    pub fn mask(&self, interior_density: f64) -> Vec<bool> {
        if interior_density > self.params.critical_density {
            self.inbound.clone()
        } else {
            vec![false; self.inbound.len()]
        }
    }
}

impl SignalController for BangBang {
    fn name(&self) -> &'static str {
        "bangbang"
    }

    fn decide(&self, input: &ControlInput<'_>) -> ControllerDecision {
        let weights = base_weights(input);
        let blocked = self.mask(input.interior_density.unwrap_or(0.0));
        max_pressure(input, &weights, blocked)
    }
}

#[derive(Debug, Clone)]
pub struct NetworkMaxPressure {
    params: PerimeterParams,
    inbound: Vec<bool>,
}

impl NetworkMaxPressure {
    pub fn new(network: &Network, params: PerimeterParams) -> Result<Self> {
        let perimeter = network.perimeter().ok_or(Error::MissingPerimeter("nmp"))?;
        if !(params.critical_density > 0.0) || !(params.xi > 0.0) {
            return Err(Error::scenario(
                "controller.rho_p_cr and controller.xi must be positive for nmp",
            ));
        }
        Ok(NetworkMaxPressure {
            params,
            inbound: perimeter.inbound.clone(),
        })
    }

    pub fn weights(&self, input: &ControlInput<'_>) -> Vec<f64> {
        let mut weights = base_weights(input);
        let excess = input.interior_density.unwrap_or(0.0) - self.params.critical_density;
        if excess > 0.0 {
            for (m, w) in weights.iter_mut().enumerate() {
                if self.inbound[m] {
                    *w = nmp_weight(*w, excess, f64::from(input.present[m]), self.params.xi);
                }
            }
        }
        weights
    }
}

impl SignalController for NetworkMaxPressure {
    fn name(&self) -> &'static str {
        "nmp"
    }

    fn decide(&self, input: &ControlInput<'_>) -> ControllerDecision {
        let weights = self.weights(input);
        max_pressure(input, &weights, vec![false; input.network.movements.len()])
    }
}

/// Replays a fixed phase schedule: entry `t % len` gives the phase slot of
/// every intersection at step `t`. Useful for hand-checked traces.
#[derive(Debug, Clone)]
pub struct ScriptedController {
    schedule: Vec<Vec<usize>>,
}

impl ScriptedController {
    pub fn new(schedule: Vec<Vec<usize>>) -> Self {
        assert!(!schedule.is_empty(), "empty schedule");
        ScriptedController { schedule }
    }
}

impl SignalController for ScriptedController {
    fn name(&self) -> &'static str {
        "scripted"
    }

    fn decide(&self, input: &ControlInput<'_>) -> ControllerDecision {
        let slots = &self.schedule[input.step as usize % self.schedule.len()];
        ControllerDecision {
            active: slots.clone(),
            blocked: vec![false; input.network.movements.len()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    #[default]
    Qmp,
    Bangbang,
    Nmp,
}

impl ControllerKind {
    pub fn needs_perimeter(self) -> bool {
        !matches!(self, ControllerKind::Qmp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerSpec {
    pub kind: ControllerKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perimeter_side: Option<usize>,
    pub rho_p_cr: f64,
    pub xi: f64,
}

impl Default for ControllerSpec {
    fn default() -> Self {
        ControllerSpec {
            kind: ControllerKind::Qmp,
            perimeter_side: None,
            rho_p_cr: 40.0,
            xi: 1.4,
        }
    }
}

impl ControllerSpec {
    pub fn params(&self) -> PerimeterParams {
        PerimeterParams {
            critical_density: self.rho_p_cr,
            xi: self.xi,
        }
    }

    pub fn build(&self, network: &Network) -> Result<Box<dyn SignalController>> {
        Ok(match self.kind {
            ControllerKind::Qmp => Box::new(QueueMaxPressure),
            ControllerKind::Bangbang => Box::new(BangBang::new(network, self.params())?),
            ControllerKind::Nmp => Box::new(NetworkMaxPressure::new(network, self.params())?),
        })
    }
}
