//! Random-walk subgraph extraction around each training triple.
//!
//! A walk starts from one endpoint of the center triple (chosen with
//! probability proportional to inverse degree), restarts to that start
//! entity with probability `p_r`, and otherwise moves to a neighbor drawn
//! from the configured neighbor distribution, collecting the traversed
//! triple. The center head's BFS distance to every entity of the subgraph is
//! then recorded for the proximity term of the loss.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, Triple, TripleId};
use crate::paths::{self, Hops};
use crate::rng::{self, Rng};

/// Walks give up after this many steps per requested triple.
pub const STEP_CAP_FACTOR: usize = 50;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum NeighborMode {
    /// p_v ∝ 1/|N(v)| (BRWR)
    InverseDegree,
    /// p_v = 1/|N(u)| (RWR)
    Uniform,
    /// p_v ∝ |N(v)| (BRWR_P)
    DegreeProportional,
}

impl NeighborMode {
    fn weight(self, degree: usize) -> f64 {
        match self {
            NeighborMode::InverseDegree => 1.0 / degree as f64,
            NeighborMode::Uniform => 1.0,
            NeighborMode::DegreeProportional => degree as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    pub restart_prob: f64,
    pub max_triples: usize,
    pub neighbor_mode: NeighborMode,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            restart_prob: 1.0 / 25.0,
            max_triples: 10_000,
            neighbor_mode: NeighborMode::InverseDegree,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.restart_prob > 0.0 && self.restart_prob <= 1.0) {
            return Err(Error::Config(format!(
                "restart probability must be in (0, 1], got {}",
                self.restart_prob
            )));
        }
        if self.max_triples == 0 {
            return Err(Error::Config("max triples must be at least 1".into()));
        }
        Ok(())
    }
}

/// Which sampler produced a store.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum SamplerKind {
    Brwr,
    Rwr,
    BrwrP,
    Mcmc,
}

impl SamplerKind {
    pub fn neighbor_mode(self) -> Option<NeighborMode> {
        match self {
            SamplerKind::Brwr => Some(NeighborMode::InverseDegree),
            SamplerKind::Rwr => Some(NeighborMode::Uniform),
            SamplerKind::BrwrP => Some(NeighborMode::DegreeProportional),
            SamplerKind::Mcmc => None,
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerKind::Brwr => "brwr",
            SamplerKind::Rwr => "rwr",
            SamplerKind::BrwrP => "brwr_p",
            SamplerKind::Mcmc => "mcmc",
        })
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brwr" => Ok(SamplerKind::Brwr),
            "rwr" => Ok(SamplerKind::Rwr),
            "brwr_p" => Ok(SamplerKind::BrwrP),
            "mcmc" => Ok(SamplerKind::Mcmc),
            other => Err(Error::Config(format!("unknown sampler '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subgraph {
    pub center: TripleId,
    /// Duplicate-free, center first.
    pub triples: Vec<TripleId>,
    /// Sorted by entity; BFS hops from the center head.
    pub distances: Vec<(EntityId, Hops)>,
}

impl Subgraph {
    pub fn distance(&self, e: EntityId) -> Option<Hops> {
        self.distances
            .binary_search_by_key(&e, |&(x, _)| x)
            .ok()
            .map(|i| self.distances[i].1)
    }

    /// Distinct entities touched by the listed triples, sorted.
    pub fn entities(&self, kg: &KnowledgeGraph) -> Vec<EntityId> {
        let mut es: Vec<EntityId> = self
            .triples
            .iter()
            .flat_map(|&id| {
                let t = kg.triple(id);
                [t.head, t.tail]
            })
            .collect();
        es.sort_unstable();
        es.dedup();
        es
    }
}

/// Product of two center-relative hop counts, a zero factor counting as 1.
pub fn approx_from_hops(d1: Hops, d2: Hops) -> Hops {
    let (a, b) = (d1?, d2?);
    Some(a.max(1).saturating_mul(b.max(1)))
}

/// Approximate `h`–`t` distance through the center head.
pub fn approx_distance(sub: &Subgraph, h: EntityId, t: EntityId) -> Result<Hops> {
    let lookup = |e: EntityId| {
        sub.distance(e).ok_or_else(|| {
            Error::Contract(format!(
                "entity {e} has no distance entry in the subgraph of center {}",
                sub.center
            ))
        })
    };
    Ok(approx_from_hops(lookup(h)?, lookup(t)?))
}

/// Picks `h` with probability |N(h)|⁻¹ / (|N(h)|⁻¹ + |N(t)|⁻¹), else `t`.
pub fn select_start_entity(kg: &KnowledgeGraph, center: &Triple, rng: &mut Rng) -> EntityId {
    let (dh, dt) = (kg.degree(center.head), kg.degree(center.tail));
    match (dh, dt) {
        // only reachable through self-loop triples
        (0, 0) => center.head,
        (0, _) => center.tail,
        (_, 0) => center.head,
        _ => {
            let (ih, it) = (1.0 / dh as f64, 1.0 / dt as f64);
            if rng.gen::<f64>() < ih / (ih + it) {
                center.head
            } else {
                center.tail
            }
        }
    }
}

/// Probability of stepping from `u` to each of its neighbors, aligned with
/// [`KnowledgeGraph::neighbors`].
pub fn neighbor_distribution(
    kg: &KnowledgeGraph,
    u: EntityId,
    mode: NeighborMode,
) -> Result<Vec<f64>> {
    let nbrs = kg.neighbors(u)?;
    if nbrs.is_empty() {
        return Err(Error::Domain(format!("entity {u} has no neighbors")));
    }
    let w: Vec<f64> = nbrs.iter().map(|&v| mode.weight(kg.degree(v))).collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / z).collect())
}

/// Precomputed per-slot cumulative weights and component supplies; shared by
/// every walk over one graph.
pub struct Sampler<'a> {
    kg: &'a KnowledgeGraph,
    cfg: SamplerConfig,
    cumulative: Vec<f64>,
    component: Vec<u32>,
    // walkable (non-self-loop) triples per component
    supply: Vec<usize>,
}

impl<'a> Sampler<'a> {
    pub fn new(kg: &'a KnowledgeGraph, cfg: SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        let mut cumulative = Vec::new();
        for u in 0..kg.num_entities() {
            let mut acc = 0.0;
            let nbrs = kg.neighbors_unchecked(EntityId(u as u32));
            let weights: Vec<f64> = nbrs
                .iter()
                .map(|&v| cfg.neighbor_mode.weight(kg.degree(v)))
                .collect();
            let z: f64 = weights.iter().sum();
            for w in weights {
                acc += w / z;
                cumulative.push(acc);
            }
        }
        let component = paths::components(kg);
        let ncomp = component.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
        let mut supply = vec![0usize; ncomp];
        for t in kg.triples() {
            if t.head != t.tail {
                supply[component[t.head.index()] as usize] += 1;
            }
        }
        Ok(Sampler {
            kg,
            cfg,
            cumulative,
            component,
            supply,
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    /// One non-restart move from `u`: the neighbor the walk steps to.
    /// `u` must have at least one neighbor.
    pub fn choose_neighbor(&self, u: EntityId, rng: &mut Rng) -> EntityId {
        self.kg.neighbors_unchecked(u)[self.step(u, rng)]
    }

    fn step(&self, u: EntityId, rng: &mut Rng) -> usize {
        let start = self.kg.adj_start(u);
        let deg = self.kg.degree(u);
        let cum = &self.cumulative[start..start + deg];
        let x: f64 = rng.gen();
        cum.partition_point(|&c| c <= x).min(deg - 1)
    }

    /// Collects up to `max_triples` distinct triples by walking from the
    /// start entity. The center is always first.
    pub fn sample(&self, center: &Triple, rng: &mut Rng) -> Vec<TripleId> {
        let kg = self.kg;
        let m = self.cfg.max_triples;
        let start = select_start_entity(kg, center, rng);
        let mut collected = vec![center.id];
        let mut seen: HashSet<TripleId> = HashSet::new();
        seen.insert(center.id);

        let comp = self.component[start.index()] as usize;
        let center_walkable = center.head != center.tail;
        let supply = self.supply[comp] + usize::from(!center_walkable);
        let target = m.min(supply);
        if kg.degree(start) == 0 {
            return collected;
        }

        let cap = STEP_CAP_FACTOR.saturating_mul(m);
        let mut cur = start;
        let mut steps = 0usize;
        while collected.len() < target && steps < cap {
            steps += 1;
            if rng.gen::<f64>() < self.cfg.restart_prob {
                cur = start;
                continue;
            }
            let slot = self.step(cur, rng);
            let parallel = kg.slot_triples(cur, slot);
            let picked = if parallel.len() == 1 {
                parallel[0]
            } else {
                parallel[rng.gen_range(0..parallel.len())]
            };
            if seen.insert(picked) {
                collected.push(picked);
            }
            cur = kg.neighbors_unchecked(cur)[slot];
        }
        collected
    }

    /// Samples and attaches center-head distances.
    pub fn sample_subgraph(&self, center: &Triple, rng: &mut Rng) -> Subgraph {
        let triples = self.sample(center, rng);
        let mut sub = Subgraph {
            center: center.id,
            triples,
            distances: Vec::new(),
        };
        compute_center_distances(self.kg, &mut sub);
        sub
    }
}

/// Convenience wrapper building a [`Sampler`] for a single walk.
pub fn sample_subgraph(
    kg: &KnowledgeGraph,
    center: &Triple,
    cfg: &SamplerConfig,
    rng: &mut Rng,
) -> Result<Subgraph> {
    let sampler = Sampler::new(kg, cfg.clone())?;
    Ok(sampler.sample_subgraph(center, rng))
}

/// Fills `sub.distances` with BFS hops from the center head, over the full
/// graph, for every entity of the listed triples.
pub fn compute_center_distances(kg: &KnowledgeGraph, sub: &mut Subgraph) {
    let hc = kg.triple(sub.center).head;
    let entities = sub.entities(kg);
    let hops = paths::bfs_to_targets(kg, hc, &entities);
    sub.distances = entities.into_iter().zip(hops).collect();
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubgraphStore {
    pub sampler: SamplerKind,
    /// Indexed by center triple id.
    pub subgraphs: Vec<Subgraph>,
}

impl SubgraphStore {
    pub fn len(&self) -> usize {
        self.subgraphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subgraphs.is_empty()
    }

    pub fn get(&self, center: TripleId) -> &Subgraph {
        &self.subgraphs[center.index()]
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "# sampler={}", self.sampler).map_err(io)?;
        for (i, sub) in self.subgraphs.iter().enumerate() {
            if i > 0 {
                writeln!(w).map_err(io)?;
            }
            writeln!(w, "C {}", sub.center).map_err(io)?;
            for t in &sub.triples {
                writeln!(w, "T {t}").map_err(io)?;
            }
            for (e, d) in &sub.distances {
                match d {
                    Some(d) => writeln!(w, "D {e} {d}").map_err(io)?,
                    None => writeln!(w, "D {e} INF").map_err(io)?,
                }
            }
        }
        w.flush().map_err(io)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let shown = path.display().to_string();
        let perr = |line: usize, msg: &str| Error::Parse {
            path: shown.clone(),
            line,
            msg: msg.to_owned(),
        };
        let mut sampler = SamplerKind::Brwr;
        let mut subgraphs: Vec<Subgraph> = Vec::new();
        let mut current: Option<Subgraph> = None;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(kind) = rest.trim().strip_prefix("sampler=") {
                    sampler = kind.parse()?;
                }
                continue;
            }
            if line.is_empty() {
                if let Some(sub) = current.take() {
                    subgraphs.push(sub);
                }
                continue;
            }
            let mut parts = line.split(' ');
            let tag = parts.next().unwrap_or("");
            let num = |s: Option<&str>| -> Result<u32> {
                s.and_then(|x| x.parse().ok())
                    .ok_or_else(|| perr(lineno, "expected an integer id"))
            };
            match tag {
                "C" => {
                    if let Some(sub) = current.take() {
                        subgraphs.push(sub);
                    }
                    current = Some(Subgraph {
                        center: TripleId(num(parts.next())?),
                        triples: Vec::new(),
                        distances: Vec::new(),
                    });
                }
                "T" | "D" => {
                    let sub = current
                        .as_mut()
                        .ok_or_else(|| perr(lineno, "record line before 'C'"))?;
                    if tag == "T" {
                        sub.triples.push(TripleId(num(parts.next())?));
                    } else {
                        let e = EntityId(num(parts.next())?);
                        let d = match parts.next() {
                            Some("INF") => None,
                            other => Some(num(other)?),
                        };
                        sub.distances.push((e, d));
                    }
                }
                _ => return Err(perr(lineno, "unknown record tag")),
            }
        }
        if let Some(sub) = current.take() {
            subgraphs.push(sub);
        }
        for (i, sub) in subgraphs.iter().enumerate() {
            if sub.center.index() != i {
                return Err(Error::Parse {
                    path: shown.clone(),
                    line: 0,
                    msg: format!("record {i} has center {}, expected {i}", sub.center),
                });
            }
        }
        Ok(SubgraphStore {
            sampler,
            subgraphs,
        })
    }
}

/// One subgraph per training triple. Each center owns the RNG stream derived
/// from `(seed, center id)`, so the result does not depend on the thread
/// count.
pub fn precompute_all(kg: &KnowledgeGraph, cfg: &SamplerConfig) -> Result<SubgraphStore> {
    let sampler = Sampler::new(kg, cfg.clone())?;
    let subgraphs: Vec<Subgraph> = kg
        .triples()
        .par_iter()
        .map(|t| {
            let mut rng = rng::derive(cfg.seed, t.id.0 as u64);
            sampler.sample_subgraph(t, &mut rng)
        })
        .collect();
    let kind = match cfg.neighbor_mode {
        NeighborMode::InverseDegree => SamplerKind::Brwr,
        NeighborMode::Uniform => SamplerKind::Rwr,
        NeighborMode::DegreeProportional => SamplerKind::BrwrP,
    };
    Ok(SubgraphStore {
        sampler: kind,
        subgraphs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> KnowledgeGraph {
        // a–b–c
        KnowledgeGraph::from_ids(3, 1, [(0, 0, 1), (1, 0, 2)])
    }

    #[test]
    fn start_probabilities() {
        // deg(h)=3, deg(t)=1 → P(h)=1/4
        let kg = KnowledgeGraph::from_ids(5, 1, [(0, 0, 1), (0, 0, 2), (0, 0, 3), (1, 0, 4)]);
        assert_eq!(kg.degree(EntityId(0)), 3);
        let center = *kg.triple(TripleId(0));
        assert_eq!(kg.degree(center.tail), 2);
        let kg = KnowledgeGraph::from_ids(4, 1, [(0, 0, 1), (0, 0, 2), (0, 0, 3)]);
        let center = *kg.triple(TripleId(0));
        let mut rng = rng::seeded(7);
        let n = 40_000;
        let hits = (0..n)
            .filter(|_| select_start_entity(&kg, &center, &mut rng) == center.tail)
            .count();
        assert!((hits as f64 / n as f64 - 0.75).abs() < 0.01);
    }

    #[test]
    fn neighbor_distribution_modes() {
        // u=0 with neighbors 1 (deg 1) and 2 (deg 2)
        let kg = KnowledgeGraph::from_ids(4, 1, [(0, 0, 1), (0, 0, 2), (2, 0, 3)]);
        let p = neighbor_distribution(&kg, EntityId(0), NeighborMode::InverseDegree).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12 && (p[1] - 1.0 / 3.0).abs() < 1e-12);

        // neighbors with degrees 1 and 3
        let kg = KnowledgeGraph::from_ids(5, 1, [(0, 0, 1), (0, 0, 2), (2, 0, 3), (2, 0, 4)]);
        let p = neighbor_distribution(&kg, EntityId(0), NeighborMode::DegreeProportional).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-12 && (p[1] - 0.75).abs() < 1e-12);

        let kg = KnowledgeGraph::from_ids(5, 1, [(0, 0, 1), (0, 0, 2), (0, 0, 3), (0, 0, 4)]);
        let p = neighbor_distribution(&kg, EntityId(0), NeighborMode::Uniform).unwrap();
        assert_eq!(p, vec![0.25; 4]);

        let iso = KnowledgeGraph::from_ids(3, 1, [(0, 0, 1)]);
        assert!(neighbor_distribution(&iso, EntityId(2), NeighborMode::Uniform).is_err());
    }

    #[test]
    fn path_graph_walk_takes_both_triples() {
        let kg = path3();
        let cfg = SamplerConfig {
            restart_prob: 1e-9,
            max_triples: 2,
            ..Default::default()
        };
        let mut rng = rng::seeded(1);
        let sub = sample_subgraph(&kg, kg.triple(TripleId(0)), &cfg, &mut rng).unwrap();
        assert_eq!(sub.triples, vec![TripleId(0), TripleId(1)]);
    }

    #[test]
    fn single_triple_budget() {
        let kg = path3();
        let cfg = SamplerConfig {
            max_triples: 1,
            ..Default::default()
        };
        let mut rng = rng::seeded(3);
        for t in kg.triples() {
            let sub = sample_subgraph(&kg, t, &cfg, &mut rng).unwrap();
            assert_eq!(sub.triples, vec![t.id]);
            assert_eq!(sub.distance(t.head), Some(Some(0)));
        }
    }

    #[test]
    fn supply_exhaustion_terminates() {
        // two components; M exceeds both
        let kg = KnowledgeGraph::from_ids(5, 1, [(0, 0, 1), (1, 0, 2), (3, 0, 4)]);
        let cfg = SamplerConfig {
            max_triples: 10_000,
            ..Default::default()
        };
        let store = precompute_all(&kg, &cfg).unwrap();
        assert_eq!(store.get(TripleId(0)).triples.len(), 2);
        assert_eq!(store.get(TripleId(2)).triples, vec![TripleId(2)]);
    }

    #[test]
    fn distances_on_path() {
        // a–b–c–d with center (a, b)
        let kg = KnowledgeGraph::from_ids(4, 1, [(0, 0, 1), (1, 0, 2), (2, 0, 3)]);
        let mut sub = Subgraph {
            center: TripleId(0),
            triples: vec![TripleId(0), TripleId(1), TripleId(2)],
            distances: vec![],
        };
        compute_center_distances(&kg, &mut sub);
        let d: Vec<_> = sub.distances.iter().map(|x| x.1).collect();
        assert_eq!(d, vec![Some(0), Some(1), Some(2), Some(3)]);
    }

    #[test]
    fn approx_distance_rules() {
        assert_eq!(approx_from_hops(Some(2), Some(3)), Some(6));
        assert_eq!(approx_from_hops(Some(0), Some(4)), Some(4));
        assert_eq!(approx_from_hops(Some(0), Some(0)), Some(1));
        assert_eq!(approx_from_hops(None, Some(4)), None);
        assert_eq!(approx_from_hops(Some(1), None), None);

        let sub = Subgraph {
            center: TripleId(0),
            triples: vec![TripleId(0)],
            distances: vec![(EntityId(0), Some(0)), (EntityId(1), Some(1))],
        };
        assert_eq!(approx_distance(&sub, EntityId(0), EntityId(1)).unwrap(), Some(1));
        assert!(matches!(
            approx_distance(&sub, EntityId(0), EntityId(9)),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn config_validation() {
        let mut cfg = SamplerConfig::default();
        cfg.restart_prob = 0.0;
        assert!(cfg.validate().is_err());
        cfg.restart_prob = 1.0;
        assert!(cfg.validate().is_ok());
        cfg.max_triples = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn store_file_round_trip() {
        let kg = KnowledgeGraph::from_ids(6, 2, [(0, 0, 1), (1, 1, 2), (2, 0, 3), (4, 1, 5)]);
        let cfg = SamplerConfig {
            max_triples: 3,
            seed: 11,
            ..Default::default()
        };
        let store = precompute_all(&kg, &cfg).unwrap();
        assert_eq!(store.len(), 4);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.txt");
        store.write(&p).unwrap();
        let back = SubgraphStore::read(&p).unwrap();
        assert_eq!(back, store);
        let p2 = dir.path().join("s2.txt");
        back.write(&p2).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&p2).unwrap());
    }
}
