//! Seeded synthetic graphs for tests, benchmarks and the `generate` command.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, LabeledTriple, RelationId};
use crate::rng;

/// Clusters of entities arranged on rings. Each cluster owns its relations;
/// relation `k` links `u` to one of `u + k + 1 ..= u + k + 3` around the
/// ring. A fraction of triples instead link two clusters; when `bridges` is
/// non-zero those links run only between the first `bridges` entities of
/// each cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusteredSpec {
    pub clusters: usize,
    pub per_cluster: usize,
    pub relations_per_cluster: usize,
    pub train: usize,
    pub test: usize,
    pub cross_fraction: f64,
    pub bridges: usize,
    pub seed: u64,
}

impl Default for ClusteredSpec {
    fn default() -> Self {
        ClusteredSpec {
            clusters: 4,
            per_cluster: 50,
            relations_per_cluster: 5,
            train: 2000,
            test: 200,
            cross_fraction: 0.1,
            bridges: 5,
            seed: 0,
        }
    }
}

pub struct Synthetic {
    pub kg: KnowledgeGraph,
    pub test: Vec<LabeledTriple>,
}

pub fn clustered(spec: &ClusteredSpec) -> Result<Synthetic> {
    let n = spec.clusters * spec.per_cluster;
    let capacity = n * spec.relations_per_cluster * 3;
    if spec.clusters < 2
        || spec.per_cluster < 8
        || spec.relations_per_cluster == 0
        || spec.bridges > spec.per_cluster
        || !(0.0..=1.0).contains(&spec.cross_fraction)
    {
        return Err(Error::Config("clustered graph needs ≥2 clusters of ≥8 entities".into()));
    }
    if (spec.train + spec.test) as f64 > 0.8 * capacity as f64 {
        return Err(Error::Config(format!(
            "{} triples requested but the layout only supports about {}",
            spec.train + spec.test,
            capacity * 8 / 10
        )));
    }
    let mut rng = rng::derive(spec.seed, 0);
    let mut seen = HashSet::new();
    let mut all = Vec::with_capacity(spec.train + spec.test);
    while all.len() < spec.train + spec.test {
        let c = rng.gen_range(0..spec.clusters);
        let cross = rng.gen_bool(spec.cross_fraction);
        let pool = if cross && spec.bridges > 0 { spec.bridges } else { spec.per_cluster };
        let local = rng.gen_range(0..pool);
        let k = rng.gen_range(0..spec.relations_per_cluster);
        let head = c * spec.per_cluster + local;
        let rel = c * spec.relations_per_cluster + k;
        let tail = if cross {
            let other = (c + rng.gen_range(1..spec.clusters)) % spec.clusters;
            other * spec.per_cluster + rng.gen_range(0..pool)
        } else {
            let off = k + 1 + rng.gen_range(0..3);
            c * spec.per_cluster + (local + off) % spec.per_cluster
        };
        if seen.insert((head, rel, tail)) {
            all.push((head as u32, rel as u32, tail as u32));
        }
    }
    let test_raw = all.split_off(spec.train);
    let kg = KnowledgeGraph::from_ids(n, spec.clusters * spec.relations_per_cluster, all);
    let test = test_raw
        .into_iter()
        .map(|(h, r, t)| LabeledTriple {
            head: EntityId(h),
            rel: RelationId::forward(r),
            tail: EntityId(t),
        })
        .collect();
    Ok(Synthetic { kg, test })
}

/// Barabási–Albert style growth: every new node attaches to `m` distinct
/// earlier nodes chosen proportionally to degree. Relations are uniform,
/// edge direction is a coin flip and the triple order is shuffled.
pub fn preferential_attachment(
    nodes: usize,
    m: usize,
    relations: usize,
    seed: u64,
) -> Result<KnowledgeGraph> {
    if m == 0 || nodes <= m + 1 || relations == 0 {
        return Err(Error::Config("need nodes > m + 1, m ≥ 1 and ≥ 1 relation".into()));
    }
    let mut rng = rng::derive(seed, 0);
    let mut edges: Vec<(u32, u32)> = Vec::new();
    // one entry per edge endpoint
    let mut ends: Vec<u32> = Vec::new();
    for u in 0..=m as u32 {
        for v in 0..u {
            edges.push((u, v));
            ends.extend([u, v]);
        }
    }
    for u in (m + 1) as u32..nodes as u32 {
        let mut targets = HashSet::with_capacity(m);
        while targets.len() < m {
            targets.insert(*ends.choose(&mut rng).expect("non-empty"));
        }
        let mut targets: Vec<u32> = targets.into_iter().collect();
        targets.sort_unstable();
        for v in targets {
            edges.push((u, v));
            ends.extend([u, v]);
        }
    }
    let mut triples: Vec<(u32, u32, u32)> = edges
        .into_iter()
        .map(|(u, v)| {
            let r = rng.gen_range(0..relations as u32);
            if rng.gen_bool(0.5) {
                (u, r, v)
            } else {
                (v, r, u)
            }
        })
        .collect();
    triples.shuffle(&mut rng);
    Ok(KnowledgeGraph::from_ids(nodes, relations, triples))
}
