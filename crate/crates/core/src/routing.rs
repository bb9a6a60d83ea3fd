//! Static route choice: a path with the fewest intersection crossings,
//! drawn uniformly among all such paths and fixed at departure.

use std::collections::{HashMap, VecDeque};

use rand::Rng;

use crate::error::{Error, Result};
use crate::topology::{LinkId, Network, Street};

struct Tree {
    dist: Vec<u32>,
    paths: Vec<f64>,
}

/// Breadth-first search over the link graph (links as vertices, movements
/// as edges), memoised per origin street.
pub struct Router {
    preds: Vec<Vec<LinkId>>,
    succs: Vec<Vec<LinkId>>,
    trees: HashMap<Street, Tree>,
}

impl Router {
    pub fn new(network: &Network) -> Self {
        let mut preds = vec![Vec::new(); network.links.len()];
        let mut succs = vec![Vec::new(); network.links.len()];
        for m in &network.movements {
            preds[m.outbound].push(m.inbound);
            succs[m.inbound].push(m.outbound);
        }
        Router {
            preds,
            succs,
            trees: HashMap::new(),
        }
    }

    fn tree(&mut self, network: &Network, origin: Street) -> Result<&Tree> {
        if !self.trees.contains_key(&origin) {
            let sources = network
                .street_links(origin)
                .ok_or_else(|| Error::Geometry(format!("street {origin} is not in the network")))?;
            let n = self.succs.len();
            let mut dist = vec![u32::MAX; n];
            let mut paths = vec![0.0; n];
            let mut queue = VecDeque::new();
            for s in sources {
                dist[s] = 0;
                paths[s] = 1.0;
                queue.push_back(s);
            }
            while let Some(u) = queue.pop_front() {
                for &v in &self.succs[u] {
                    if dist[v] == u32::MAX {
                        dist[v] = dist[u] + 1;
                        queue.push_back(v);
                    }
                    if dist[v] == dist[u] + 1 {
                        paths[v] += paths[u];
                    }
                }
            }
            self.trees.insert(origin, Tree { dist, paths });
        }
        Ok(&self.trees[&origin])
    }

    /// Number of intersection crossings on a shortest route between streets.
    pub fn distance(&mut self, network: &Network, origin: Street, destination: Street) -> Result<u32> {
        let targets = network
            .street_links(destination)
            .ok_or_else(|| Error::Geometry(format!("street {destination} is not in the network")))?;
        let tree = self.tree(network, origin)?;
        let d = targets.iter().map(|t| tree.dist[*t]).min().unwrap_or(u32::MAX);
        if d == u32::MAX {
            return Err(Error::Unreachable {
                origin: (origin.a, origin.b),
                destination: (destination.a, destination.b),
            });
        }
        Ok(d)
    }

    /// Samples a route as the sequence of links from the origin street to
    /// the destination street. The route has `len() - 1` crossings.
    pub fn route<R: Rng + ?Sized>(
        &mut self,
        network: &Network,
        origin: Street,
        destination: Street,
        rng: &mut R,
    ) -> Result<Vec<LinkId>> {
        if origin == destination {
            return Err(Error::Geometry(format!(
                "origin and destination are the same street {origin}"
            )));
        }
        let best = self.distance(network, origin, destination)?;
        let targets = network.street_links(destination).expect("checked by distance");
        self.tree(network, origin)?;
        let tree = &self.trees[&origin];

        let ends: Vec<LinkId> = targets.into_iter().filter(|t| tree.dist[*t] == best).collect();
        let mut cur = pick(&ends, &tree.paths, rng);
        let mut path = vec![cur];
        while tree.dist[cur] > 0 {
            let want = tree.dist[cur] - 1;
            let cands: Vec<LinkId> = self.preds[cur]
                .iter()
                .copied()
                .filter(|p| tree.dist[*p] == want)
                .collect();
            cur = pick(&cands, &tree.paths, rng);
            path.push(cur);
        }
        path.reverse();
        Ok(path)
    }
}

fn pick<R: Rng + ?Sized>(cands: &[LinkId], weights: &[f64], rng: &mut R) -> LinkId {
    if cands.len() == 1 {
        return cands[0];
    }
    let total: f64 = cands.iter().map(|c| weights[*c]).sum();
    let mut r = rng.random::<f64>() * total;
    for &c in cands {
        r -= weights[c];
        if r < 0.0 {
            return c;
        }
    }
    *cands.last().expect("non-empty candidates")
}
