//! Independent oracles shared by the integration tests. Nothing here calls
//! the library's own scoring, ranking or path code; everything is recomputed
//! from public fields with the most direct method available.
#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use rand::Rng as _;
use satkgc::encoder::EncoderParams;
use satkgc::eval::{evaluate, Direction, EvalOptions, KnownTails, TableScorer};
use satkgc::kg::{EntityId, KnowledgeGraph, LabeledTriple, RelationId, Triple, TripleId};
use satkgc::loss::{batch_loss, gradients, LossConfig};
use satkgc::rng::Rng;
use satkgc::scheduler::{BatchRow, MiniBatch, RowOrigin};
use statrs::distribution::{ChiSquared, ContinuousCDF};

// ---------------------------------------------------------------- loss

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n < 1e-12 {
        let mut e = vec![0.0; v.len()];
        e[0] = 1.0;
        return e;
    }
    v.into_iter().map(|x| x / n).collect()
}

fn row(table: &[f64], i: usize, d: usize) -> &[f64] {
    &table[i * d..(i + 1) * d]
}

fn cos(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Hops product with the zero-to-one rule; `None` when either side is
/// unreachable.
pub fn approx(d1: Option<u32>, d2: Option<u32>) -> Option<u32> {
    let f = |d: u32| if d == 0 { 1 } else { d };
    Some(f(d1?) * f(d2?))
}

/// Scalar transcription of the margin InfoNCE with structural hardness and
/// frequency weights: per row
/// `-ln( e^{(φ_ii-γ)/τ} / (e^{(φ_ii-γ)/τ} + Σ_{j≠i, unmasked} e^{φ_ij/τ}) )`.
pub fn naive_loss(p: &EncoderParams, b: &MiniBatch, cfg: &LossConfig) -> (f64, Vec<f64>) {
    let d = p.dim;
    let n = b.rows.len();
    let s = p.log_inv_temperature.clamp(0.0, 100f64.ln());
    let tau = (-s).exp();
    let q: Vec<Vec<f64>> = b
        .rows
        .iter()
        .map(|r| {
            let h = row(&p.entity, r.triple.head.index(), d);
            let rel = row(&p.relation, r.triple.rel.index(), d);
            unit(h.iter().zip(rel).map(|(x, y)| x + y).collect())
        })
        .collect();
    let t: Vec<Vec<f64>> = b
        .rows
        .iter()
        .map(|r| unit(row(&p.tail, r.triple.tail.index(), d).to_vec()))
        .collect();
    let phi = |i: usize, j: usize| {
        let omega = if cfg.use_hardness {
            match approx(b.rows[i].head_hops, b.rows[j].tail_hops) {
                Some(x) => 1.0 / x as f64,
                None => 0.0,
            }
        } else {
            0.0
        };
        cos(&q[i], &t[j]) + p.beta * omega
    };
    let mut per_row = Vec::new();
    let mut total = 0.0;
    for i in 0..n {
        let pos = ((phi(i, i) - cfg.margin) / tau).exp();
        let mut den = pos;
        for j in 0..n {
            if j != i && !b.known_true[i * n + j] {
                den += (phi(i, j) / tau).exp();
            }
        }
        let l = -(pos / den).ln();
        let w = if cfg.use_freq_weight { b.rows[i].psi } else { 1.0 };
        per_row.push(l);
        total += w * l;
    }
    (total, per_row)
}

/// Textbook InfoNCE with cosine scores and τ = 1: every other row's tail is
/// a negative.
pub fn plain_infonce(p: &EncoderParams, b: &MiniBatch) -> f64 {
    let d = p.dim;
    let n = b.rows.len();
    let mut total = 0.0;
    for i in 0..n {
        let r = &b.rows[i].triple;
        let h = row(&p.entity, r.head.index(), d);
        let rel = row(&p.relation, r.rel.index(), d);
        let q = unit(h.iter().zip(rel).map(|(x, y)| x + y).collect());
        let sims: Vec<f64> = b
            .rows
            .iter()
            .map(|o| cos(&q, &unit(row(&p.tail, o.triple.tail.index(), d).to_vec())))
            .collect();
        let den: f64 = sims.iter().map(|s| s.exp()).sum();
        total -= (sims[i].exp() / den).ln();
    }
    total
}

pub const CASE_ENTITIES: usize = 6;
pub const CASE_RELATION_IDS: usize = 4;

fn random_hops(rng: &mut Rng) -> Option<u32> {
    if rng.gen_bool(0.15) {
        None
    } else {
        Some(rng.gen_range(0..5))
    }
}

/// A random encoder over a small vocabulary and a random well-formed batch
/// of `n` rows. τ is drawn from `tau_range`.
pub fn random_case(rng: &mut Rng, d: usize, n: usize, tau_range: (f64, f64)) -> (EncoderParams, MiniBatch) {
    let mut p = EncoderParams::zeros(d, CASE_ENTITIES, CASE_RELATION_IDS);
    for x in p.entity.iter_mut().chain(p.relation.iter_mut()).chain(p.tail.iter_mut()) {
        *x = rng.gen_range(-1.0..1.0);
    }
    p.beta = rng.gen_range(-1.0..1.0);
    p.set_temperature(rng.gen_range(tau_range.0..tau_range.1));
    let rows: Vec<BatchRow> = (0..n)
        .map(|i| BatchRow {
            triple: Triple {
                head: EntityId(rng.gen_range(0..CASE_ENTITIES as u32)),
                rel: RelationId(rng.gen_range(0..CASE_RELATION_IDS as u32)),
                tail: EntityId(rng.gen_range(0..CASE_ENTITIES as u32)),
                id: TripleId(i as u32),
            },
            inverse: false,
            origin: RowOrigin::Random,
            head_hops: random_hops(rng),
            tail_hops: random_hops(rng),
            psi: rng.gen_range(0.1..3.0),
        })
        .collect();
    let mut known_true = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            known_true[i * n + j] = i != j && rng.gen_bool(0.15);
        }
    }
    (
        p,
        MiniBatch {
            center: None,
            rows,
            known_true,
        },
    )
}

pub fn random_loss_config(rng: &mut Rng) -> LossConfig {
    LossConfig {
        margin: rng.gen_range(0.0..0.2),
        use_hardness: rng.gen_bool(0.7),
        use_freq_weight: rng.gen_bool(0.7),
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

// ---------------------------------------------------------------- gradients

/// Loss with one parameter coordinate moved by `delta`.
fn shifted(
    p: &EncoderParams,
    b: &MiniBatch,
    cfg: &LossConfig,
    edit: &dyn Fn(&mut EncoderParams, f64),
    delta: f64,
) -> f64 {
    let mut q = p.clone();
    edit(&mut q, delta);
    batch_loss(&q, b, cfg).unwrap().total
}

/// Largest finite-difference mismatch over every coordinate of the batch's
/// parameters, reported as a relative error with an absolute floor.
pub fn max_gradient_error(p: &EncoderParams, b: &MiniBatch, cfg: &LossConfig, h: f64) -> f64 {
    let g = gradients(p, b, cfg).unwrap();
    let d = p.dim;
    let mut worst = 0.0f64;
    let mut check = |analytic: f64, edit: &dyn Fn(&mut EncoderParams, f64)| {
        let fd = (shifted(p, b, cfg, edit, h) - shifted(p, b, cfg, edit, -h)) / (2.0 * h);
        let err = (analytic - fd).abs();
        if err > 1e-8 {
            worst = worst.max(err / analytic.abs().max(fd.abs()));
        }
    };
    let lookup = |m: &std::collections::BTreeMap<u32, Vec<f64>>, row: usize, k: usize| {
        m.get(&(row as u32)).map_or(0.0, |v| v[k])
    };
    for row in 0..p.num_entities {
        for k in 0..d {
            check(lookup(&g.entity, row, k), &|q, x| q.entity[row * d + k] += x);
            check(lookup(&g.tail, row, k), &|q, x| q.tail[row * d + k] += x);
        }
    }
    for row in 0..p.num_relation_ids {
        for k in 0..d {
            check(lookup(&g.relation, row, k), &|q, x| q.relation[row * d + k] += x);
        }
    }
    check(g.beta, &|q, x| q.beta += x);
    check(g.log_inv_temperature, &|q, x| q.log_inv_temperature += x);
    worst
}

// ---------------------------------------------------------------- graphs

/// Random simple graph on `n` nodes with each pair linked with probability
/// `p` and one of `rels` relations, in a random direction.
pub fn random_graph(rng: &mut Rng, n: usize, p: f64, rels: usize) -> KnowledgeGraph {
    let mut triples = Vec::new();
    for u in 0..n as u32 {
        for v in u + 1..n as u32 {
            if rng.gen_bool(p) {
                let r = rng.gen_range(0..rels as u32);
                triples.push(if rng.gen_bool(0.5) { (u, r, v) } else { (v, r, u) });
            }
        }
    }
    KnowledgeGraph::from_ids(n, rels, triples)
}

/// Undirected simple adjacency matrix straight from the triple list.
pub fn adjacency(kg: &KnowledgeGraph) -> Vec<Vec<bool>> {
    let n = kg.num_entities();
    let mut a = vec![vec![false; n]; n];
    for t in kg.triples() {
        let (u, v) = (t.head.index(), t.tail.index());
        if u != v {
            a[u][v] = true;
            a[v][u] = true;
        }
    }
    a
}

/// All-pairs hop counts by Floyd–Warshall.
pub fn floyd_warshall(kg: &KnowledgeGraph) -> Vec<Vec<Option<u32>>> {
    let a = adjacency(kg);
    let n = a.len();
    const INF: u64 = u64::MAX / 4;
    let mut d = vec![vec![INF; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        for j in 0..n {
            if a[i][j] {
                d[i][j] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d.into_iter()
        .map(|r| r.into_iter().map(|x| (x < INF).then_some(x as u32)).collect())
        .collect()
}

/// Normalized betweenness by enumerating every simple path between every
/// pair and keeping the shortest ones. Only for tiny graphs.
pub fn betweenness_by_enumeration(kg: &KnowledgeGraph) -> Vec<f64> {
    let a = adjacency(kg);
    let n = a.len();
    let mut bc = vec![0.0; n];
    for s in 0..n {
        for t in s + 1..n {
            let mut paths: Vec<Vec<usize>> = Vec::new();
            let mut stack = vec![vec![s]];
            while let Some(path) = stack.pop() {
                let last = *path.last().unwrap();
                if last == t {
                    paths.push(path);
                    continue;
                }
                for v in 0..n {
                    if a[last][v] && !path.contains(&v) {
                        let mut next = path.clone();
                        next.push(v);
                        stack.push(next);
                    }
                }
            }
            let Some(shortest) = paths.iter().map(Vec::len).min() else {
                continue;
            };
            let best: Vec<&Vec<usize>> = paths.iter().filter(|p| p.len() == shortest).collect();
            for v in 0..n {
                if v == s || v == t {
                    continue;
                }
                let through = best.iter().filter(|p| p.contains(&v)).count();
                bc[v] += through as f64 / best.len() as f64;
            }
        }
    }
    if n < 3 {
        return vec![0.0; n];
    }
    let pairs = (n - 1) as f64 * (n - 2) as f64 / 2.0;
    bc.into_iter().map(|x| x / pairs).collect()
}

/// Gini by mean absolute difference.
pub fn gini_mad(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return 0.0;
    }
    let mut s = 0.0;
    for a in x {
        for b in x {
            s += (a - b).abs();
        }
    }
    s / (2.0 * n * n * mean)
}

// ---------------------------------------------------------------- ranking

/// Sorts the surviving candidates by score, gold placed after every tie,
/// and reads off the gold's position.
pub fn naive_rank(scores: &[f64], gold: usize, filter: &[EntityId]) -> usize {
    let drop: HashSet<usize> = filter.iter().map(|e| e.index()).filter(|&e| e != gold).collect();
    let mut cands: Vec<(f64, bool)> = scores
        .iter()
        .enumerate()
        .filter(|(e, _)| !drop.contains(e))
        .map(|(e, &s)| (s, e == gold))
        .collect();
    // descending score; within a tie the gold goes last
    cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    cands.iter().position(|c| c.1).unwrap() + 1
}


type Query = (EntityId, RelationId);

pub struct EvalCase {
    n: usize,
    known: Vec<LabeledTriple>,
    test: Vec<LabeledTriple>,
    scores: HashMap<Query, Vec<f64>>,
}

fn random_eval_case(r: &mut Rng) -> EvalCase {
    let n = r.gen_range(2..=50);
    let rels = r.gen_range(1..=3u32);
    let mut seen = HashSet::new();
    let mut known = Vec::new();
    for _ in 0..r.gen_range(1..=3 * n) {
        let t = LabeledTriple {
            head: EntityId(r.gen_range(0..n as u32)),
            rel: RelationId::forward(r.gen_range(0..rels)),
            tail: EntityId(r.gen_range(0..n as u32)),
        };
        if seen.insert((t.head, t.rel, t.tail)) {
            known.push(t);
        }
    }
    let test: Vec<LabeledTriple> = known.iter().copied().filter(|_| r.gen_bool(0.4)).collect();
    let test = if test.is_empty() { vec![known[0]] } else { test };
    // few distinct levels so that ties are common
    let levels = r.gen_range(2..6);
    let mut scores = HashMap::new();
    for t in &test {
        for q in [(t.head, t.rel), (t.tail, t.rel.inverse())] {
            scores
                .entry(q)
                .or_insert_with(|| (0..n).map(|_| r.gen_range(0..levels) as f64 / levels as f64).collect());
        }
    }
    EvalCase { n, known, test, scores }
}

/// Tails to filter for each query, built straight from the triple list.
pub fn eval_filters(known: &[LabeledTriple]) -> HashMap<Query, Vec<EntityId>> {
    let mut m: HashMap<Query, Vec<EntityId>> = HashMap::new();
    for t in known {
        m.entry((t.head, t.rel)).or_default().push(t.tail);
        m.entry((t.tail, t.rel.inverse())).or_default().push(t.head);
    }
    m
}

/// Runs `evaluate` on one random score table in filtered and raw mode and
/// compares every rank and metric against `naive_rank`.
pub fn check_random_eval_case(r: &mut Rng) -> Result<(), String> {
    let case = random_eval_case(r);
    let mut known = KnownTails::new();
    known.extend(&case.known);
    let scorer = TableScorer {
        num_entities: case.n,
        scores: case.scores.clone(),
    };
    let f = eval_filters(&case.known);
    for filtered in [true, false] {
        let opts = EvalOptions {
            filtered,
            collect_fps: false,
        };
        let ev = evaluate(&scorer, &known, &case.test, &opts).map_err(|e| e.to_string())?;
        ensure(ev.records.len() == 2 * case.test.len(), "record count")?;
        let mut ranks = Vec::new();
        for (i, t) in case.test.iter().enumerate() {
            for (k, dir) in [Direction::Forward, Direction::Backward].into_iter().enumerate() {
                let (q, gold) = match dir {
                    Direction::Forward => ((t.head, t.rel), t.tail),
                    Direction::Backward => ((t.tail, t.rel.inverse()), t.head),
                };
                let filter: &[EntityId] = if filtered { &f[&q] } else { &[] };
                let want = naive_rank(&case.scores[&q], gold.index(), filter);
                let rec = &ev.records[2 * i + k];
                ensure(rec.direction == dir, "direction")?;
                ensure(rec.rank == want, &format!("rank {} vs {want}", rec.rank))?;
                ranks.push(want);
            }
        }
        let mrr = ranks.iter().map(|&x| 1.0 / x as f64).sum::<f64>() / ranks.len() as f64;
        let hits = |k: usize| ranks.iter().filter(|&&x| x <= k).count() as f64 / ranks.len() as f64;
        let m = &ev.metrics.overall;
        ensure((m.mrr - mrr).abs() < 1e-12, "mrr")?;
        ensure(m.hits1 == hits(1), "hits@1")?;
        ensure(m.hits3 == hits(3), "hits@3")?;
        ensure(m.hits10 == hits(10), "hits@10")?;
        ensure(m.queries == ranks.len(), "query count")?;
    }
    Ok(())
}

fn ensure(ok: bool, what: &str) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what.to_string())
    }
}

// ---------------------------------------------------------------- statistics

/// Pearson χ² statistic and the α = 0.01 critical value.
pub fn chi_square(observed: &[u64], expected_p: &[f64]) -> (f64, f64) {
    let n: u64 = observed.iter().sum();
    let stat = observed
        .iter()
        .zip(expected_p)
        .map(|(&o, &p)| {
            let e = p * n as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dof = (observed.len() - 1) as f64;
    let crit = ChiSquared::new(dof).unwrap().inverse_cdf(0.99);
    (stat, crit)
}

/// The inverse-degree neighbor law written straight from its definition.
pub fn neighbor_law(kg: &KnowledgeGraph, u: usize, mode: &str) -> Vec<(usize, f64)> {
    let a = adjacency(kg);
    let deg = |v: usize| a[v].iter().filter(|&&x| x).count() as f64;
    let nbrs: Vec<usize> = (0..a.len()).filter(|&v| a[u][v]).collect();
    let w: Vec<f64> = nbrs
        .iter()
        .map(|&v| match mode {
            "inverse" => 1.0 / deg(v),
            "uniform" => 1.0,
            _ => deg(v),
        })
        .collect();
    let z: f64 = w.iter().sum();
    nbrs.into_iter().zip(w.into_iter().map(|x| x / z)).collect()
}

/// Exact distribution of the triple set collected by a restart walk on a
/// star whose hub is entity 0 and whose spokes are triples `0..leaves`
/// (spoke `i` joins the hub and leaf `i + 1`). The walk starts at the leaf
/// with probability leaves/(leaves+1), restarts with `p_r`, runs at most
/// `cap` steps and stops at `m` distinct triples. Returns the inclusion
/// probability of each spoke.
pub fn star_inclusion(leaves: usize, center: usize, p_r: f64, m: usize, cap: usize) -> Vec<f64> {
    use std::collections::BTreeMap;
    // (start, current, collected spokes sorted) -> probability
    let mut live: BTreeMap<(usize, usize, Vec<usize>), f64> = BTreeMap::new();
    let start_leaf = leaves as f64 / (leaves as f64 + 1.0);
    live.insert((center + 1, center + 1, vec![center]), start_leaf);
    live.insert((0, 0, vec![center]), 1.0 - start_leaf);
    let mut incl = vec![0.0; leaves];
    let finish = |set: &[usize], p: f64, incl: &mut Vec<f64>| {
        for &s in set {
            incl[s] += p;
        }
    };
    for _ in 0..cap {
        let mut next: BTreeMap<(usize, usize, Vec<usize>), f64> = BTreeMap::new();
        for ((start, cur, set), p) in live {
            if set.len() >= m {
                finish(&set, p, &mut incl);
                continue;
            }
            *next.entry((start, start, set.clone())).or_insert(0.0) += p * p_r;
            let moves: Vec<(usize, usize)> = if cur == 0 {
                (0..leaves).map(|i| (i + 1, i)).collect()
            } else {
                vec![(0, cur - 1)]
            };
            let q = p * (1.0 - p_r) / moves.len() as f64;
            for (to, spoke) in moves {
                let mut s = set.clone();
                if !s.contains(&spoke) {
                    s.push(spoke);
                    s.sort_unstable();
                }
                *next.entry((start, to, s)).or_insert(0.0) += q;
            }
        }
        live = next;
    }
    for ((_, _, set), p) in live {
        finish(&set, p, &mut incl);
    }
    incl
}
