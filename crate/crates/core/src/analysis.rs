//! Structural diagnostics over rank dumps, visit counters and trained
//! parameters. Every table can be written as CSV and as a gnuplot data file.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;

use crate::encoder::{dot, EncoderParams};
use crate::error::{Error, Result};
use crate::eval::RankRecord;
use crate::kg::{EntityId, KnowledgeGraph, Triple, TripleId};
use crate::loss::{row_loss, LossConfig};
use crate::paths::{self, Hops};
use crate::rng::{self, Rng};
use crate::sampler::SubgraphStore;
use crate::scheduler::{build_query_batch, BatchMode, MiniBatch, RowOrigin, Scheduler};

pub const DEFAULT_BETWEENNESS_CAP: usize = 5000;
pub const RELATION_TYPE_THRESHOLD: f64 = 1.5;

/// A named two-column table.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub key: String,
    pub value: String,
    pub rows: Vec<(String, f64)>,
}

impl Table {
    pub fn new(name: &str, key: &str, value: &str, rows: Vec<(String, f64)>) -> Self {
        Table {
            name: name.into(),
            key: key.into(),
            value: value.into(),
            rows,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{},{}\n", self.key, self.value);
        for (k, v) in &self.rows {
            s.push_str(&format!("{k},{v:.9}\n"));
        }
        s
    }

    /// Two numeric columns; non-numeric keys become a 1-based index with the
    /// label as a quoted third column for `xtic(3)`.
    pub fn to_dat(&self) -> String {
        let mut s = format!("# {} {}\n", self.key, self.value);
        for (i, (k, v)) in self.rows.iter().enumerate() {
            if k.parse::<f64>().is_ok() {
                s.push_str(&format!("{k}\t{v:.9}\n"));
            } else {
                s.push_str(&format!("{}\t{v:.9}\t\"{k}\"\n", i + 1));
            }
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        for (ext, body) in [("csv", self.to_csv()), ("dat", self.to_dat())] {
            let path = dir.join(format!("{}.{ext}", self.name));
            let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut w = BufWriter::new(file);
            w.write_all(body.as_bytes()).map_err(|e| Error::io(&path, e))?;
            w.flush().map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StructReport {
    pub tables: Vec<Table>,
}

impl StructReport {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.tables.iter().try_for_each(|t| t.write(dir))
    }
}

fn dist_label(d: Hops) -> String {
    d.map_or_else(|| "inf".to_owned(), |d| d.to_string())
}

/// Gini coefficient of a non-negative vector; 0 for empty or all-zero input.
pub fn gini(values: &[f64]) -> f64 {
    let n = values.len();
    let total: f64 = values.iter().sum();
    if n == 0 || total <= 0.0 {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let weighted: f64 = v.iter().enumerate().map(|(i, x)| (i + 1) as f64 * x).sum();
    2.0 * weighted / (n as f64 * total) - (n as f64 + 1.0) / n as f64
}

/// Number of unordered entity pairs at each shortest-path distance;
/// unreachable pairs are keyed by `None`.
pub fn pair_counts_by_distance(kg: &KnowledgeGraph) -> BTreeMap<Hops, u64> {
    let n = kg.num_entities();
    (0..n)
        .into_par_iter()
        .map(|u| {
            let dist = paths::bfs_distances(kg, EntityId(u as u32));
            let mut m = BTreeMap::new();
            for d in &dist[u + 1..] {
                *m.entry(*d).or_insert(0u64) += 1;
            }
            m
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        })
}

/// Query entity and distance for every false positive in the dump.
fn fp_distances(kg: &KnowledgeGraph, records: &[RankRecord]) -> Vec<Hops> {
    let mut by_source: BTreeMap<EntityId, Vec<EntityId>> = BTreeMap::new();
    for r in records {
        let (q, _, _) = r.query();
        by_source.entry(q).or_default().extend(&r.fps);
    }
    let sources: Vec<_> = by_source.into_iter().collect();
    sources
        .par_iter()
        .flat_map_iter(|(src, fps)| {
            let dist = paths::bfs_distances(kg, *src);
            fps.iter().map(move |f| dist[f.index()]).collect::<Vec<_>>()
        })
        .collect()
}

/// FP count at each distance divided by the number of entity pairs at
/// that distance. Distances with no pairs are omitted.
pub fn fp_ratio_by_distance(kg: &KnowledgeGraph, records: &[RankRecord]) -> Result<Vec<(Hops, f64)>> {
    if records.is_empty() {
        return Err(Error::Domain("empty rank dump".into()));
    }
    let pairs = pair_counts_by_distance(kg);
    let mut fps: HashMap<Hops, u64> = HashMap::new();
    for d in fp_distances(kg, records) {
        *fps.entry(d).or_insert(0) += 1;
    }
    let mut out: Vec<(Hops, f64)> = pairs
        .iter()
        .filter(|&(d, &c)| c > 0 && *d != Some(0))
        .map(|(d, &c)| (*d, *fps.get(d).unwrap_or(&0) as f64 / c as f64))
        .collect();
    // unreachable last
    out.sort_by_key(|(d, _)| d.unwrap_or(u32::MAX));
    Ok(out)
}

/// Sorted distinct degrees split into five contiguous groups of equal
/// size, the remainder going to the last groups.
pub fn degree_groups(kg: &KnowledgeGraph) -> Result<Vec<Vec<usize>>> {
    let distinct: Vec<usize> = (0..kg.num_entities())
        .map(|e| kg.degree(EntityId(e as u32)))
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    partition_degrees(&distinct)
}

pub(crate) fn partition_degrees(distinct: &[usize]) -> Result<Vec<Vec<usize>>> {
    const GROUPS: usize = 5;
    if distinct.len() < GROUPS {
        return Err(Error::Domain(format!(
            "need at least {GROUPS} distinct degrees, found {}",
            distinct.len()
        )));
    }
    let base = distinct.len() / GROUPS;
    let rem = distinct.len() % GROUPS;
    let mut out = Vec::with_capacity(GROUPS);
    let mut at = 0;
    for g in 0..GROUPS {
        let size = base + usize::from(g >= GROUPS - rem);
        out.push(distinct[at..at + size].to_vec());
        at += size;
    }
    Ok(out)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum DegreeAveraging {
    /// FPs whose tail falls in the group / entities in the group.
    PerEntity,
    /// Mean over the group's distinct degrees of FPs / entities at that degree.
    PerDistinctDegree,
}

pub fn fp_ratio_by_degree_group(
    kg: &KnowledgeGraph,
    records: &[RankRecord],
    averaging: DegreeAveraging,
) -> Result<Vec<(String, f64)>> {
    let groups = degree_groups(kg)?;
    let mut entities_at: HashMap<usize, u64> = HashMap::new();
    for e in 0..kg.num_entities() {
        *entities_at.entry(kg.degree(EntityId(e as u32))).or_insert(0) += 1;
    }
    let mut fps_at: HashMap<usize, u64> = HashMap::new();
    for r in records {
        for f in &r.fps {
            *fps_at.entry(kg.degree(*f)).or_insert(0) += 1;
        }
    }
    Ok(groups
        .iter()
        .map(|g| {
            let label = format!("{}-{}", g[0], g[g.len() - 1]);
            let v = match averaging {
                DegreeAveraging::PerEntity => {
                    let fps: u64 = g.iter().map(|d| fps_at.get(d).unwrap_or(&0)).sum();
                    let ents: u64 = g.iter().map(|d| entities_at[d]).sum();
                    fps as f64 / ents as f64
                }
                DegreeAveraging::PerDistinctDegree => {
                    g.iter()
                        .map(|d| *fps_at.get(d).unwrap_or(&0) as f64 / entities_at[d] as f64)
                        .sum::<f64>()
                        / g.len() as f64
                }
            };
            (label, v)
        })
        .collect())
}

/// Entity visits implied by triple membership counts: each visit of a
/// triple counts once for its head and once for its tail.
pub fn entity_visits(kg: &KnowledgeGraph, membership: &[u64]) -> Vec<f64> {
    let mut out = vec![0.0; kg.num_entities()];
    for (t, &c) in kg.triples().iter().zip(membership) {
        out[t.head.index()] += c as f64;
        out[t.tail.index()] += c as f64;
    }
    out
}

fn descending(values: &[f64]) -> Vec<(String, f64)> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v.into_iter().enumerate().map(|(i, x)| ((i + 1).to_string(), x)).collect()
}

/// Frequency curves and their Gini coefficients from triple membership counts.
pub fn distribution_reports(kg: &KnowledgeGraph, membership: &[u64]) -> Result<StructReport> {
    if membership.len() != kg.num_triples() {
        return Err(Error::Domain(format!(
            "{} counts for {} triples",
            membership.len(),
            kg.num_triples()
        )));
    }
    let triples: Vec<f64> = membership.iter().map(|&c| c as f64).collect();
    let entities = entity_visits(kg, membership);
    let degrees: Vec<f64> = (0..kg.num_entities())
        .map(|e| kg.degree(EntityId(e as u32)) as f64)
        .collect();

    // entities ascending by degree, ties by id
    let mut order: Vec<usize> = (0..kg.num_entities()).collect();
    order.sort_by_key(|&e| (degrees[e] as u64, e));
    let by_degree = |vals: &[f64]| -> Vec<(String, f64)> {
        order
            .iter()
            .enumerate()
            .map(|(i, &e)| ((i + 1).to_string(), vals[e]))
            .collect()
    };
    let normalized = |vals: &[f64]| -> Vec<f64> {
        let s: f64 = vals.iter().sum();
        vals.iter().map(|v| if s > 0.0 { v / s } else { 0.0 }).collect()
    };

    Ok(StructReport {
        tables: vec![
            Table::new("kg_degree_by_degree", "entity_rank", "share", by_degree(&normalized(&degrees))),
            Table::new(
                "entity_visits_by_degree",
                "entity_rank",
                "share",
                by_degree(&normalized(&entities)),
            ),
            Table::new("triple_visits_sorted", "rank", "count", descending(&triples)),
            Table::new("entity_visits_sorted", "rank", "count", descending(&entities)),
            Table::new(
                "gini",
                "curve",
                "gini",
                vec![
                    ("kg_degree".into(), gini(&degrees)),
                    ("triple_visits".into(), gini(&triples)),
                    ("entity_visits".into(), gini(&entities)),
                ],
            ),
        ],
    })
}

/// Runs the scheduler for `passes` random-mode pass lengths without
/// training and returns the triple membership counts.
pub fn simulate_visits(
    kg: &KnowledgeGraph,
    store: Option<&SubgraphStore>,
    mode: BatchMode,
    batch_size: usize,
    passes: usize,
    seed: u64,
) -> Result<Vec<u64>> {
    let mut sched = Scheduler::new(kg, store, mode, batch_size)?;
    let mut rng = rng::derive(seed, rng::stream::SCHEDULE);
    for _ in 0..sched.pass_len() * passes {
        sched.next_batch(&mut rng)?;
    }
    Ok(sched.counter.membership)
}

pub fn check_bin_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2
        || edges.windows(2).any(|w| !(w[0] < w[1]))
        || edges[0] > -1.0
        || edges[edges.len() - 1] < 1.0
    {
        return Err(Error::Config(
            "histogram edges must be strictly increasing and cover [-1, 1]".into(),
        ));
    }
    Ok(())
}

/// Half-open bins `[e_k, e_k+1)`, the last one closed.
fn bin_of(edges: &[f64], x: f64) -> Option<usize> {
    let last = edges.len() - 2;
    if x < edges[0] || x > edges[last + 1] {
        return None;
    }
    let k = edges.partition_point(|&e| e <= x);
    Some(k.saturating_sub(1).min(last))
}

pub fn evenly_spaced_edges(bins: usize) -> Vec<f64> {
    (0..=bins).map(|i| -1.0 + 2.0 * i as f64 / bins as f64).collect()
}

/// Adds the in-batch negative cosines of `batch` into `counts`.
pub fn bin_negative_cosines(
    params: &EncoderParams,
    batch: &MiniBatch,
    edges: &[f64],
    counts: &mut [u64],
) -> Result<()> {
    let n = batch.len();
    let hr: Vec<Vec<f64>> = batch
        .rows
        .iter()
        .map(|r| params.encode_head_rel(r.triple.head, r.triple.rel))
        .collect::<Result<_>>()?;
    let tails: Vec<Vec<f64>> = batch
        .rows
        .iter()
        .map(|r| params.encode_tail(r.triple.tail))
        .collect::<Result<_>>()?;
    for i in 0..n {
        for j in 0..n {
            if i == j || batch.masked(i, j) {
                continue;
            }
            let c = dot(&hr[i], &tails[j]).clamp(-1.0, 1.0);
            if let Some(b) = bin_of(edges, c) {
                counts[b] += 1;
            }
        }
    }
    Ok(())
}

/// Fraction of in-batch negative cosines per bin over the given batches.
pub fn negative_score_histogram(
    params: &EncoderParams,
    batches: &[MiniBatch],
    edges: &[f64],
) -> Result<Vec<f64>> {
    check_bin_edges(edges)?;
    let mut counts = vec![0u64; edges.len() - 1];
    for b in batches {
        bin_negative_cosines(params, b, edges, &mut counts)?;
    }
    let total: u64 = counts.iter().sum();
    Ok(counts
        .iter()
        .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
        .collect())
}

pub fn histogram_table(name: &str, edges: &[f64], fractions: &[f64]) -> Table {
    let rows = fractions
        .iter()
        .enumerate()
        .map(|(k, &f)| (format!("{:.3}", (edges[k] + edges[k + 1]) / 2.0), f))
        .collect();
    Table::new(name, "bin_center", "fraction", rows)
}

/// Unordered pairs `(u, v)`, `u < v`, grouped by exact distance `1..=max_d`.
pub fn pairs_by_distance(kg: &KnowledgeGraph, max_d: u32) -> Vec<Vec<(EntityId, EntityId)>> {
    let n = kg.num_entities();
    let per_source: Vec<Vec<(u32, EntityId)>> = (0..n)
        .into_par_iter()
        .map(|u| {
            let dist = paths::bfs_distances(kg, EntityId(u as u32));
            dist.iter()
                .enumerate()
                .skip(u + 1)
                .filter_map(|(v, d)| match d {
                    Some(d) if (1..=max_d).contains(d) => Some((*d, EntityId(v as u32))),
                    _ => None,
                })
                .collect()
        })
        .collect();
    let mut out = vec![Vec::new(); max_d as usize];
    for (u, list) in per_source.into_iter().enumerate() {
        for (d, v) in list {
            out[d as usize - 1].push((EntityId(u as u32), v));
        }
    }
    out
}

/// Mean tail-encoding cosine between entities at each distance `1..=max_d`;
/// `None` where no pair exists. At most `budget` pairs per distance are used,
/// drawn uniformly when more exist.
pub fn distance_similarity_table(
    params: &EncoderParams,
    kg: &KnowledgeGraph,
    max_distance: u32,
    budget: usize,
    rng: &mut Rng,
) -> Result<Vec<(u32, Option<f64>)>> {
    if budget == 0 {
        return Err(Error::Config("pair budget must be positive".into()));
    }
    let enc = params.encode_all_tails();
    let d = params.dim;
    let row = |e: EntityId| &enc[e.index() * d..(e.index() + 1) * d];
    let groups = pairs_by_distance(kg, max_distance);
    Ok(groups
        .iter()
        .enumerate()
        .map(|(i, pairs)| {
            let dist = i as u32 + 1;
            if pairs.is_empty() {
                return (dist, None);
            }
            let picked: Vec<usize> = if pairs.len() <= budget {
                (0..pairs.len()).collect()
            } else {
                let mut v = index::sample(rng, pairs.len(), budget).into_vec();
                v.sort_unstable();
                v
            };
            let sum: f64 = picked.iter().map(|&k| dot(row(pairs[k].0), row(pairs[k].1))).sum();
            (dist, Some(sum / picked.len() as f64))
        })
        .collect())
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelationType {
    OneToOne,
    OneToMany,
    ManyToOne,
    ManyToMany,
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelationType::OneToOne => "1-1",
            RelationType::OneToMany => "1-N",
            RelationType::ManyToOne => "N-1",
            RelationType::ManyToMany => "N-N",
        })
    }
}

/// Classifies each base relation by mean tails-per-head and heads-per-tail.
pub fn relation_types(kg: &KnowledgeGraph) -> Vec<RelationType> {
    let nr = kg.num_relations();
    let mut heads = vec![HashSet::new(); nr];
    let mut tails = vec![HashSet::new(); nr];
    let mut count = vec![0usize; nr];
    for t in kg.triples() {
        let r = t.rel.base() as usize;
        heads[r].insert(t.head);
        tails[r].insert(t.tail);
        count[r] += 1;
    }
    (0..nr)
        .map(|r| {
            if count[r] == 0 {
                return RelationType::OneToOne;
            }
            let tph = count[r] as f64 / heads[r].len() as f64;
            let hpt = count[r] as f64 / tails[r].len() as f64;
            match (hpt >= RELATION_TYPE_THRESHOLD, tph >= RELATION_TYPE_THRESHOLD) {
                (false, false) => RelationType::OneToOne,
                (false, true) => RelationType::OneToMany,
                (true, false) => RelationType::ManyToOne,
                (true, true) => RelationType::ManyToMany,
            }
        })
        .collect()
}

/// Per relation class: share of evaluated queries and their Hits@1.
pub fn relation_type_breakdown(
    kg: &KnowledgeGraph,
    records: &[RankRecord],
) -> Result<Vec<(RelationType, f64, f64)>> {
    if records.is_empty() {
        return Err(Error::Domain("empty rank dump".into()));
    }
    let types = relation_types(kg);
    let mut acc: BTreeMap<RelationType, (usize, usize)> = BTreeMap::new();
    for r in records {
        let e = acc.entry(types[r.rel.base() as usize]).or_default();
        e.0 += 1;
        e.1 += usize::from(r.rank == 1);
    }
    let n = records.len() as f64;
    Ok(acc
        .into_iter()
        .map(|(t, (c, h))| (t, c as f64 / n, h as f64 / c as f64))
        .collect())
}

/// Exact normalized betweenness (Brandes) over the undirected graph.
pub fn betweenness(kg: &KnowledgeGraph, node_cap: usize) -> Result<Vec<f64>> {
    let n = kg.num_entities();
    if n > node_cap {
        return Err(Error::Domain(format!(
            "exact betweenness refused: {n} entities exceeds the cap of {node_cap}"
        )));
    }
    let raw = (0..n)
        .into_par_iter()
        .map(|s| {
            let mut delta = vec![0.0; n];
            let mut sigma = vec![0.0f64; n];
            let mut dist = vec![u32::MAX; n];
            let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
            let mut order = Vec::with_capacity(n);
            let mut queue = std::collections::VecDeque::new();
            sigma[s] = 1.0;
            dist[s] = 0;
            queue.push_back(s);
            while let Some(v) = queue.pop_front() {
                order.push(v);
                for w in kg.neighbors_unchecked(EntityId(v as u32)) {
                    let w = w.index();
                    if dist[w] == u32::MAX {
                        dist[w] = dist[v] + 1;
                        queue.push_back(w);
                    }
                    if dist[w] == dist[v] + 1 {
                        sigma[w] += sigma[v];
                        preds[w].push(v);
                    }
                }
            }
            let mut bc = vec![0.0; n];
            for &w in order.iter().rev() {
                for &v in &preds[w] {
                    delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
                }
                if w != s {
                    bc[w] += delta[w];
                }
            }
            bc
        })
        .reduce(
            || vec![0.0; n],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    if n < 3 {
        return Ok(vec![0.0; n]);
    }
    // each unordered pair is counted from both ends
    let scale = 1.0 / ((n - 1) as f64 * (n - 2) as f64);
    Ok(raw.into_iter().map(|x| x * scale).collect())
}

/// Mean degree and mean betweenness over the entities of each triple set.
pub fn centrality_stats(
    kg: &KnowledgeGraph,
    sets: &[Vec<TripleId>],
    node_cap: usize,
) -> Result<Vec<(f64, f64)>> {
    if sets.iter().any(Vec::is_empty) {
        return Err(Error::Domain("empty triple set".into()));
    }
    let bc = betweenness(kg, node_cap)?;
    Ok(sets
        .iter()
        .map(|set| {
            let ents: std::collections::BTreeSet<EntityId> = set
                .iter()
                .flat_map(|&id| {
                    let t = kg.triple(id);
                    [t.head, t.tail]
                })
                .collect();
            let n = ents.len() as f64;
            let deg = ents.iter().map(|&e| kg.degree(e) as f64).sum::<f64>() / n;
            let b = ents.iter().map(|e| bc[e.index()]).sum::<f64>() / n;
            (deg, b)
        })
        .collect())
}

/// Mean ψ·L and mean L for each set of triples. Each triple is scored as the
/// first forward row of a batch whose remaining rows are drawn uniformly from
/// the training set with a per-triple derived seed.
pub fn fp_loss_comparison(
    params: &EncoderParams,
    kg: &KnowledgeGraph,
    sets: &[Vec<Triple>],
    batch_size: usize,
    loss: &LossConfig,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let half = batch_size / 2;
    if half == 0 || half > kg.num_triples() + 1 {
        return Err(Error::Config(format!("unusable batch size {batch_size}")));
    }
    let cfg = LossConfig {
        use_freq_weight: false,
        ..loss.clone()
    };
    sets.iter()
        .enumerate()
        .map(|(si, set)| {
            if set.is_empty() {
                return Err(Error::Domain("empty triple set".into()));
            }
            let per: Vec<(f64, f64)> = set
                .par_iter()
                .enumerate()
                .map(|(k, &t)| {
                    let mut rng = rng::derive(seed ^ ((si as u64) << 32), k as u64);
                    let mut rows = vec![(t, RowOrigin::Subgraph)];
                    while rows.len() < half {
                        let id = TripleId(rng.gen_range(0..kg.num_triples() as u32));
                        let other = *kg.triple(id);
                        if rows.iter().all(|(r, _)| r.id != other.id) {
                            rows.push((other, RowOrigin::Random));
                        }
                    }
                    let batch = build_query_batch(kg, &rows);
                    let l = row_loss(params, &batch, &cfg, 0)?;
                    Ok((kg.psi(t.tail) * l, l))
                })
                .collect::<Result<_>>()?;
            let n = per.len() as f64;
            Ok((
                per.iter().map(|p| p.0).sum::<f64>() / n,
                per.iter().map(|p| p.1).sum::<f64>() / n,
            ))
        })
        .collect()
}

/// Triples `(query, relation, fp)` for every false positive in the dump.
pub fn fp_triples(records: &[RankRecord]) -> Vec<Triple> {
    let mut out = Vec::new();
    for r in records {
        let (h, rel, _) = r.query();
        for &f in &r.fps {
            out.push(Triple {
                head: h,
                rel,
                tail: f,
                id: TripleId(u32::MAX),
            });
        }
    }
    out
}

pub fn distance_table(name: &str, rows: &[(Hops, f64)]) -> Table {
    Table::new(
        name,
        "distance",
        "ratio",
        rows.iter().map(|(d, v)| (dist_label(*d), *v)).collect(),
    )
}
