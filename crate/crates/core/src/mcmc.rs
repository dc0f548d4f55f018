//! Metropolis–Hastings subgraph sampler.
//!
//! A depth-first traversal from the center collects `d` path triples. For
//! each path triple `(h, r, t)` a chain over entities targets
//! `max(cos(x_hr, x_t(y)), 1e-6)^α` and every post-burn-in state `y` anchors
//! a random training triple whose head is `y`. The chain state carries over
//! from one path triple to the next.

use std::collections::HashSet;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;

use crate::encoder::{dot, EncoderParams};
use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, RelationId, TripleId};
use crate::rng::{self, Rng};
use crate::sampler::{compute_center_distances, SamplerKind, Subgraph, SubgraphStore};

pub const COSINE_FLOOR: f64 = 1e-6;
/// Extra M–H steps tried when a sampled entity has no outgoing triple.
pub const ANCHOR_RETRIES: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct McmcConfig {
    pub alpha: f64,
    /// Chain draws per path triple, also the nearest-neighbour count.
    pub k: usize,
    /// DFS path length.
    pub path_len: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            alpha: 0.5,
            k: 16,
            path_len: 32,
            burn_in: 100,
            seed: 0,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self, num_entities: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.k == 0 || self.path_len == 0 {
            return Err(Error::Config("k and the path length must be positive".into()));
        }
        if num_entities <= self.k {
            return Err(Error::Config(format!(
                "k = {} needs more than {} entities",
                self.k, num_entities
            )));
        }
        Ok(())
    }
}

/// A proposed move with its forward and reverse proposal densities.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Proposal {
    pub y: EntityId,
    pub q_forward: f64,
    pub q_reverse: f64,
}

/// Output of one chain-driven traversal, before deduplication.
#[derive(Clone, Debug, PartialEq)]
pub struct McmcSample {
    pub path: Vec<TripleId>,
    pub anchored: Vec<TripleId>,
}

impl McmcSample {
    /// Batch rows the sample expands to, inverses included.
    pub fn row_count(&self) -> usize {
        2 * (self.path.len() + self.anchored.len())
    }
}

pub struct McmcSampler<'a> {
    kg: &'a KnowledgeGraph,
    params: &'a EncoderParams,
    cfg: McmcConfig,
    tails: Vec<f64>,
    nearest: Vec<OnceLock<Vec<EntityId>>>,
}

impl<'a> McmcSampler<'a> {
    pub fn new(kg: &'a KnowledgeGraph, params: &'a EncoderParams, cfg: McmcConfig) -> Result<Self> {
        cfg.validate(kg.num_entities())?;
        if params.num_entities != kg.num_entities() {
            return Err(Error::Config("parameter shapes do not match the graph".into()));
        }
        if !params.is_finite() {
            return Err(Error::Numeric("non-finite parameters".into()));
        }
        Ok(McmcSampler {
            kg,
            params,
            tails: params.encode_all_tails(),
            nearest: (0..kg.num_entities()).map(|_| OnceLock::new()).collect(),
            cfg,
        })
    }

    pub fn config(&self) -> &McmcConfig {
        &self.cfg
    }

    fn tail(&self, e: EntityId) -> &[f64] {
        let d = self.params.dim;
        &self.tails[e.index() * d..(e.index() + 1) * d]
    }

    /// The `k` entities other than `x` whose tail encodings are most similar
    /// to `x`'s, ties broken by id. Exact scan, cached per entity.
    pub fn nearest(&self, x: EntityId) -> &[EntityId] {
        self.nearest[x.index()].get_or_init(|| {
            let tx = self.tail(x);
            let mut all: Vec<(f64, EntityId)> = (0..self.kg.num_entities() as u32)
                .map(EntityId)
                .filter(|&e| e != x)
                .map(|e| (dot(tx, self.tail(e)), e))
                .collect();
            all.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            all.truncate(self.cfg.k);
            let mut v: Vec<EntityId> = all.into_iter().map(|p| p.1).collect();
            v.sort_unstable();
            v
        })
    }

    /// q(y | x) = 0.5/|ℰ| + 0.5·[y ∈ NN_k(x)]/k.
    pub fn proposal_density(&self, x: EntityId, y: EntityId) -> f64 {
        let n = self.kg.num_entities() as f64;
        let near = self.nearest(x).binary_search(&y).is_ok();
        0.5 / n + if near { 0.5 / self.cfg.k as f64 } else { 0.0 }
    }

    pub fn propose(&self, x: EntityId, rng: &mut Rng) -> Proposal {
        let y = if rng.gen_bool(0.5) {
            EntityId(rng.gen_range(0..self.kg.num_entities() as u32))
        } else {
            *self.nearest(x).choose(rng).expect("k ≥ 1")
        };
        Proposal {
            y,
            q_forward: self.proposal_density(x, y),
            q_reverse: self.proposal_density(y, x),
        }
    }

    /// Unnormalized target density for state `y` under query `(h, r)`.
    pub fn target(&self, x_hr: &[f64], y: EntityId) -> f64 {
        dot(x_hr, self.tail(y)).max(COSINE_FLOOR).powf(self.cfg.alpha)
    }

    pub fn acceptance(&self, x_hr: &[f64], x: EntityId, p: &Proposal) -> f64 {
        let ratio = self.target(x_hr, p.y) / self.target(x_hr, x) * (p.q_reverse / p.q_forward);
        ratio.min(1.0)
    }

    pub fn mh_step(&self, x_hr: &[f64], x: EntityId, rng: &mut Rng) -> EntityId {
        let p = self.propose(x, rng);
        let a = self.acceptance(x_hr, x, &p);
        if a >= 1.0 || rng.gen::<f64>() < a {
            p.y
        } else {
            x
        }
    }

    pub fn query_encoding(&self, h: EntityId, r: RelationId) -> Result<Vec<f64>> {
        self.params.encode_head_rel(h, r)
    }

    /// Depth-first order of up to `path_len` triples starting at the center,
    /// moving over triples incident to either endpoint.
    fn dfs_path(&self, center: TripleId, rng: &mut Rng) -> Vec<TripleId> {
        let kg = self.kg;
        let mut seen: HashSet<TripleId> = HashSet::new();
        let mut stack = vec![center];
        let mut path = Vec::with_capacity(self.cfg.path_len);
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                continue;
            }
            path.push(id);
            if path.len() == self.cfg.path_len {
                break;
            }
            let t = kg.triple(id);
            let mut next: Vec<TripleId> = Vec::new();
            for v in [t.head, t.tail] {
                for slot in 0..kg.degree(v) {
                    next.extend(kg.slot_triples(v, slot).iter().filter(|x| !seen.contains(x)));
                }
            }
            next.sort_unstable();
            next.dedup();
            next.shuffle(rng);
            stack.extend(next);
        }
        path
    }

    pub fn sample(&self, center: TripleId, rng: &mut Rng) -> Result<McmcSample> {
        let kg = self.kg;
        let path = self.dfs_path(center, rng);
        let mut anchored = Vec::new();
        let mut x = EntityId(rng.gen_range(0..kg.num_entities() as u32));
        let mut i = 0usize;
        for &id in &path {
            let t = kg.triple(id);
            let x_hr = self.query_encoding(t.head, t.rel)?;
            for _ in 0..self.cfg.k {
                x = self.mh_step(&x_hr, x, rng);
                let keep = i >= self.cfg.burn_in;
                i += 1;
                if !keep {
                    continue;
                }
                let mut tries = 0;
                while kg.outgoing(x).is_empty() && tries < ANCHOR_RETRIES {
                    x = self.mh_step(&x_hr, x, rng);
                    tries += 1;
                }
                match kg.outgoing(x).choose(rng) {
                    Some(&a) => anchored.push(a),
                    None => log::warn!("no outgoing triple for sampled entity {x}; draw skipped"),
                }
            }
        }
        Ok(McmcSample { path, anchored })
    }

    pub fn sample_subgraph(&self, center: TripleId, rng: &mut Rng) -> Result<Subgraph> {
        let s = self.sample(center, rng)?;
        let mut seen = HashSet::new();
        let triples: Vec<TripleId> = s
            .path
            .iter()
            .chain(&s.anchored)
            .copied()
            .filter(|id| seen.insert(*id))
            .collect();
        let mut sub = Subgraph {
            center,
            triples,
            distances: Vec::new(),
        };
        compute_center_distances(self.kg, &mut sub);
        Ok(sub)
    }
}

/// MCMC subgraph for every training triple, each with its own derived stream.
pub fn precompute_all_mcmc(
    kg: &KnowledgeGraph,
    params: &EncoderParams,
    cfg: &McmcConfig,
) -> Result<SubgraphStore> {
    let sampler = McmcSampler::new(kg, params, cfg.clone())?;
    let subgraphs = kg
        .triples()
        .par_iter()
        .map(|t| {
            let mut r = rng::derive(cfg.seed ^ rng::stream::MCMC, t.id.0 as u64);
            sampler.sample_subgraph(t.id, &mut r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SubgraphStore {
        sampler: SamplerKind::Mcmc,
        subgraphs,
    })
}
