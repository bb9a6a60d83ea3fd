use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::Centroid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DemandPattern {
    /// Every ordered centroid pair carries the same rate.
    #[default]
    Uniform,
    /// Origins everywhere, destinations restricted to the central rings.
    Concentrated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemandSpec {
    pub pattern: DemandPattern,
    /// Expected trips per hour for each OD pair.
    pub rate_per_od_vph: f64,
    /// Demand is generated on `[0, duration_s)` and zero afterwards.
    #[serde(with = "crate::units::seconds")]
    pub duration_s: f64,
    /// Destination rings used by the concentrated pattern.
    pub central_rings: Vec<usize>,
}

impl Default for DemandSpec {
    fn default() -> Self {
        DemandSpec {
            pattern: DemandPattern::Uniform,
            rate_per_od_vph: 1.05,
            duration_s: 3600.0,
            central_rings: vec![1, 3],
        }
    }
}

impl DemandSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate_per_od_vph >= 0.0) || !self.rate_per_od_vph.is_finite() {
            return Err(Error::scenario(format!(
                "demand.rate_per_od_vph must be a finite non-negative number, got {}",
                self.rate_per_od_vph
            )));
        }
        if !(self.duration_s >= 0.0) {
            return Err(Error::scenario("demand.duration_s must be non-negative"));
        }
        Ok(())
    }

    /// Expected arrivals per step for a single OD pair.
    pub fn mean_per_od_step(&self, step_s: f64) -> f64 {
        self.rate_per_od_vph * step_s / 3600.0
    }

    /// Ordered (origin, destination) centroid index pairs.
    pub fn od_pairs(&self, centroids: &[Centroid]) -> Vec<(usize, usize)> {
        let dest_ok = |c: &Centroid| match self.pattern {
            DemandPattern::Uniform => true,
            DemandPattern::Concentrated => c
                .ring_index
                .is_some_and(|r| self.central_rings.contains(&r)),
        };
        let mut pairs = Vec::new();
        for (o, co) in centroids.iter().enumerate() {
            for (d, cd) in centroids.iter().enumerate() {
                if o != d && co.street != cd.street && dest_ok(cd) {
                    pairs.push((o, d));
                }
            }
        }
        pairs
    }
}

/// Per-step Poisson trip generation. All OD pairs share one rate, so the
/// step total is drawn from the superposed Poisson process and each trip
/// is assigned to a pair uniformly.
pub struct DemandGenerator {
    pairs: Vec<(usize, usize)>,
    poisson: Option<Poisson<f64>>,
    active_until_s: f64,
    step_s: f64,
}

impl DemandGenerator {
    pub fn new(spec: &DemandSpec, centroids: &[Centroid], step_s: f64) -> Self {
        let pairs = spec.od_pairs(centroids);
        let total = spec.mean_per_od_step(step_s) * pairs.len() as f64;
        let poisson = (total > 0.0).then(|| Poisson::new(total).expect("positive finite mean"));
        DemandGenerator {
            pairs,
            poisson,
            active_until_s: spec.duration_s,
            step_s,
        }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn arrivals<R: Rng + ?Sized>(&self, step: u64, rng: &mut R) -> Vec<(usize, usize)> {
        let Some(poisson) = &self.poisson else {
            return Vec::new();
        };
        if step as f64 * self.step_s >= self.active_until_s {
            return Vec::new();
        }
        let n = poisson.sample(rng) as usize;
        (0..n)
            .map(|_| self.pairs[rng.random_range(0..self.pairs.len())])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use crate::topology::{ring_centroids, Network};

    fn centroids() -> Vec<Centroid> {
        let net = Network::build_grid(10, 10, 200.0, 3, 50.0, 1800.0).unwrap();
        ring_centroids(&net, &[1, 3, 5, 7, 9]).unwrap()
    }

    #[test]
    fn per_od_mean() {
        let spec = DemandSpec::default();
        assert!((spec.mean_per_od_step(10.0) - 1.05 * 10.0 / 3600.0).abs() < 1e-15);
        assert!((spec.mean_per_od_step(10.0) - 0.0029).abs() < 1e-4);
    }

    #[test]
    fn uniform_and_concentrated_pairs() {
        let c = centroids();
        let uni = DemandSpec::default().od_pairs(&c);
        assert_eq!(uni.len(), 100 * 99);
        let conc = DemandSpec {
            pattern: DemandPattern::Concentrated,
            ..Default::default()
        }
        .od_pairs(&c);
        // 16 central destinations, each reachable from the 99 other centroids.
        assert_eq!(conc.len(), 16 * 99);
        assert!(conc.iter().all(|(o, d)| o != d));
    }

    #[test]
    fn demand_stops_after_duration() {
        let c = centroids();
        let gen = DemandGenerator::new(&DemandSpec::default(), &c, 10.0);
        let mut rng = stream(1, Stream::Demand);
        for step in 360..400 {
            assert!(gen.arrivals(step, &mut rng).is_empty());
        }
        let first_hour: usize = (0..360).map(|s| gen.arrivals(s, &mut rng).len()).sum();
        // 9900 pairs at 1.05 vph: mean 10395, sd ~102.
        assert!((first_hour as f64 - 10395.0).abs() < 500.0, "{first_hour}");
    }

    #[test]
    fn zero_rate_never_generates() {
        let c = centroids();
        let spec = DemandSpec {
            rate_per_od_vph: 0.0,
            ..Default::default()
        };
        let gen = DemandGenerator::new(&spec, &c, 10.0);
        let mut rng = stream(1, Stream::Demand);
        assert!((0..360).all(|s| gen.arrivals(s, &mut rng).is_empty()));
    }

    #[test]
    fn empirical_mean_matches_rate() {
        // Single OD pair: the arrival count over many steps is Poisson with
        // mean rate * duration.
        let c = centroids()[..2].to_vec();
        let spec = DemandSpec {
            rate_per_od_vph: 36.0,
            duration_s: 1e9,
            ..Default::default()
        };
        let gen = DemandGenerator::new(&spec, &c, 10.0);
        assert_eq!(gen.pairs().len(), 2);
        let mut rng = stream(5, Stream::Demand);
        let steps = 50_000u64;
        let total: usize = (0..steps).map(|s| gen.arrivals(s, &mut rng).len()).sum();
        let mean = total as f64 / steps as f64;
        // Two pairs at 0.1 per step each; 5 sigma on 50k steps.
        let sd = (0.2f64 / steps as f64).sqrt();
        assert!((mean - 0.2).abs() < 5.0 * sd, "{mean}");
    }
}
