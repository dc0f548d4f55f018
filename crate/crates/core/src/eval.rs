//! Ranking evaluation: MRR and Hits@{1,3,10} over forward and backward
//! queries, filtered by default, with pessimistic tie-breaking.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::encoder::{dot, EncoderParams};
use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, LabeledTriple, RelationId};

/// Anything that can score every candidate tail for a query.
pub trait TailScorer: Sync {
    fn num_entities(&self) -> usize;
    fn score_tails(&self, head: EntityId, rel: RelationId) -> Result<Vec<f64>>;
}

/// Cosine scoring with the bi-encoder; tail encodings are computed once.
pub struct CosineScorer<'a> {
    params: &'a EncoderParams,
    tails: Vec<f64>,
}

impl<'a> CosineScorer<'a> {
    pub fn new(params: &'a EncoderParams) -> Result<Self> {
        if !params.is_finite() {
            return Err(Error::Numeric("non-finite parameters".into()));
        }
        Ok(CosineScorer {
            params,
            tails: params.encode_all_tails(),
        })
    }
}

impl TailScorer for CosineScorer<'_> {
    fn num_entities(&self) -> usize {
        self.params.num_entities
    }

    fn score_tails(&self, head: EntityId, rel: RelationId) -> Result<Vec<f64>> {
        let q = self.params.encode_head_rel(head, rel)?;
        Ok(self.tails.chunks_exact(self.params.dim).map(|t| dot(&q, t)).collect())
    }
}

/// A fixed score table, mostly for tests: `scores[(h, r)]` holds one score per entity.
pub struct TableScorer {
    pub num_entities: usize,
    pub scores: HashMap<(EntityId, RelationId), Vec<f64>>,
}

impl TailScorer for TableScorer {
    fn num_entities(&self) -> usize {
        self.num_entities
    }

    fn score_tails(&self, head: EntityId, rel: RelationId) -> Result<Vec<f64>> {
        self.scores
            .get(&(head, rel))
            .cloned()
            .ok_or_else(|| Error::Domain(format!("no score row for ({head}, {rel})")))
    }
}

/// Known-true tails per `(head, relation)`, inverse relations included.
#[derive(Clone, Debug, Default)]
pub struct KnownTails {
    map: HashMap<(EntityId, RelationId), Vec<EntityId>>,
}

impl KnownTails {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_graph(kg: &KnowledgeGraph) -> Self {
        let mut k = Self::new();
        for t in kg.triples() {
            k.insert(LabeledTriple {
                head: t.head,
                rel: t.rel,
                tail: t.tail,
            });
        }
        k
    }

    /// Adds the triple and its inverse.
    pub fn insert(&mut self, t: LabeledTriple) {
        let mut push = |h, r, e| {
            let v = self.map.entry((h, r)).or_default();
            if !v.contains(&e) {
                v.push(e);
            }
        };
        push(t.head, t.rel, t.tail);
        push(t.tail, t.rel.inverse(), t.head);
    }

    pub fn extend(&mut self, triples: &[LabeledTriple]) {
        for &t in triples {
            self.insert(t);
        }
    }

    pub fn tails(&self, head: EntityId, rel: RelationId) -> &[EntityId] {
        self.map.get(&(head, rel)).map_or(&[], Vec::as_slice)
    }
}

/// 1 + number of surviving candidates scoring at least the gold. Entities in
/// `filter` other than the gold do not survive.
pub fn rank_from_scores(scores: &[f64], gold: EntityId, filter: &[EntityId]) -> Result<usize> {
    let g = *scores
        .get(gold.index())
        .ok_or_else(|| Error::Domain(format!("gold {gold} out of range")))?;
    if !g.is_finite() {
        return Err(Error::Numeric(format!("non-finite score for gold {gold}")));
    }
    let mut rank = 1;
    for (e, &s) in scores.iter().enumerate() {
        if e != gold.index() && s >= g {
            rank += 1;
        }
    }
    for &f in filter {
        if f != gold && scores[f.index()] >= g {
            rank -= 1;
        }
    }
    Ok(rank)
}

/// Candidates strictly above the gold after filtering.
pub fn false_positives(scores: &[f64], gold: EntityId, filter: &[EntityId]) -> Vec<EntityId> {
    let g = scores[gold.index()];
    let mut out: Vec<EntityId> = scores
        .iter()
        .enumerate()
        .filter(|&(e, &s)| e != gold.index() && s > g)
        .map(|(e, _)| EntityId(e as u32))
        .filter(|e| !filter.contains(e))
        .collect();
    out.sort_unstable();
    out
}

pub fn rank_tail(
    params: &EncoderParams,
    query: (EntityId, RelationId),
    gold: EntityId,
    filter_set: &[EntityId],
) -> Result<usize> {
    let q = params.encode_head_rel(query.0, query.1)?;
    let scores: Vec<f64> = (0..params.num_entities)
        .map(|e| params.encode_tail(EntityId(e as u32)).map(|t| dot(&q, &t)))
        .collect::<Result<_>>()?;
    rank_from_scores(&scores, gold, filter_set)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        })
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(Direction::Forward),
            "backward" => Ok(Direction::Backward),
            _ => Err(Error::Config(format!("unknown direction '{s}'"))),
        }
    }
}

/// One evaluated query. `head, rel, tail` is the test triple as given;
/// backward queries predict `head` from `(tail, rel⁻¹)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RankRecord {
    pub head: EntityId,
    pub rel: RelationId,
    pub tail: EntityId,
    pub direction: Direction,
    pub rank: usize,
    /// Filled only when false positives are collected.
    pub fps: Vec<EntityId>,
}

impl RankRecord {
    pub fn query(&self) -> (EntityId, RelationId, EntityId) {
        match self.direction {
            Direction::Forward => (self.head, self.rel, self.tail),
            Direction::Backward => (self.tail, self.rel.inverse(), self.head),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DirectionMetrics {
    pub queries: usize,
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
}

impl DirectionMetrics {
    pub fn from_ranks(ranks: impl IntoIterator<Item = usize>) -> Self {
        let mut m = DirectionMetrics::default();
        for r in ranks {
            m.queries += 1;
            m.mrr += 1.0 / r as f64;
            m.hits1 += (r <= 1) as u8 as f64;
            m.hits3 += (r <= 3) as u8 as f64;
            m.hits10 += (r <= 10) as u8 as f64;
        }
        if m.queries > 0 {
            let n = m.queries as f64;
            m.mrr /= n;
            m.hits1 /= n;
            m.hits3 /= n;
            m.hits10 /= n;
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub overall: DirectionMetrics,
    pub forward: DirectionMetrics,
    pub backward: DirectionMetrics,
}

impl Metrics {
    pub fn from_records(records: &[RankRecord]) -> Self {
        let of = |d: Direction| {
            DirectionMetrics::from_ranks(records.iter().filter(|r| r.direction == d).map(|r| r.rank))
        };
        Metrics {
            overall: DirectionMetrics::from_ranks(records.iter().map(|r| r.rank)),
            forward: of(Direction::Forward),
            backward: of(Direction::Backward),
        }
    }

    fn rows(&self) -> [(&'static str, &DirectionMetrics); 3] {
        [
            ("all", &self.overall),
            ("forward", &self.forward),
            ("backward", &self.backward),
        ]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("direction,queries,mrr,hits1,hits3,hits10\n");
        for (name, m) in self.rows() {
            s.push_str(&format!(
                "{name},{},{:.6},{:.6},{:.6},{:.6}\n",
                m.queries, m.mrr, m.hits1, m.hits3, m.hits10
            ));
        }
        s
    }

    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<10}{:>9}{:>10}{:>10}{:>10}{:>10}\n",
            "direction", "queries", "MRR", "Hits@1", "Hits@3", "Hits@10"
        );
        for (name, m) in self.rows() {
            s.push_str(&format!(
                "{name:<10}{:>9}{:>10.4}{:>10.4}{:>10.4}{:>10.4}\n",
                m.queries, m.mrr, m.hits1, m.hits3, m.hits10
            ));
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    pub filtered: bool,
    pub collect_fps: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            filtered: true,
            collect_fps: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub metrics: Metrics,
    /// Forward record of test triple `i` at `2i`, backward at `2i + 1`.
    pub records: Vec<RankRecord>,
}

/// Ranks every test triple in both directions. `known` should hold every
/// train, valid and test triple for the filtered setting.
pub fn evaluate(
    scorer: &dyn TailScorer,
    known: &KnownTails,
    test: &[LabeledTriple],
    opts: &EvalOptions,
) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::Domain("empty test set".into()));
    }
    let n = scorer.num_entities();
    if let Some(t) = test.iter().find(|t| t.head.index() >= n || t.tail.index() >= n) {
        return Err(Error::Domain(format!(
            "test triple ({}, {}, {}) references an unseen entity",
            t.head, t.rel, t.tail
        )));
    }
    let queries: Vec<(LabeledTriple, Direction)> = test
        .iter()
        .flat_map(|&t| [(t, Direction::Forward), (t, Direction::Backward)])
        .collect();
    let records = queries
        .par_iter()
        .map(|&(t, direction)| {
            let (h, r, gold) = match direction {
                Direction::Forward => (t.head, t.rel, t.tail),
                Direction::Backward => (t.tail, t.rel.inverse(), t.head),
            };
            let scores = scorer.score_tails(h, r)?;
            let filter = if opts.filtered { known.tails(h, r) } else { &[] };
            let rank = rank_from_scores(&scores, gold, filter)?;
            let fps = if opts.collect_fps {
                false_positives(&scores, gold, filter)
            } else {
                Vec::new()
            };
            Ok(RankRecord {
                head: t.head,
                rel: t.rel,
                tail: t.tail,
                direction,
                rank,
                fps,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation {
        metrics: Metrics::from_records(&records),
        records,
    })
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_metrics(metrics: &Metrics, csv: &Path, table: &Path) -> Result<()> {
    write_text(csv, &metrics.to_csv())?;
    write_text(table, &metrics.to_table())
}

/// Rank dump `h,r,t,direction,rank` with entity and relation names.
pub fn write_rank_dump(kg: &KnowledgeGraph, records: &[RankRecord], path: &Path) -> Result<()> {
    let mut s = String::from("h,r,t,direction,rank\n");
    for r in records {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            kg.entity_name(r.head),
            kg.relation_name(r.rel),
            kg.entity_name(r.tail),
            r.direction,
            r.rank
        ));
    }
    write_text(path, &s)
}

/// One line per record, same order as the rank dump: space-separated names
/// of the false positives.
pub fn write_fp_lists(kg: &KnowledgeGraph, records: &[RankRecord], path: &Path) -> Result<()> {
    let mut s = String::new();
    for r in records {
        let names: Vec<&str> = r.fps.iter().map(|&e| kg.entity_name(e)).collect();
        s.push_str(&names.join(" "));
        s.push('\n');
    }
    write_text(path, &s)
}

/// Reads a rank dump and, optionally, its false-positive list.
pub fn read_rank_dump(kg: &KnowledgeGraph, path: &Path, fps: Option<&Path>) -> Result<Vec<RankRecord>> {
    let shown = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: shown.clone(),
        line,
        msg,
    };
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 5 {
            return Err(parse_err(i + 1, "expected 5 comma-separated fields".into()));
        }
        let ent = |name: &str| {
            kg.entity_id(name).ok_or_else(|| Error::Unknown {
                kind: "entity",
                name: name.into(),
                path: shown.clone(),
                line: i + 1,
            })
        };
        let rel = kg.relation_id(f[1]).ok_or_else(|| Error::Unknown {
            kind: "relation",
            name: f[1].into(),
            path: shown.clone(),
            line: i + 1,
        })?;
        out.push(RankRecord {
            head: ent(f[0])?,
            rel,
            tail: ent(f[2])?,
            direction: f[3].parse().map_err(|_| parse_err(i + 1, "bad direction".into()))?,
            rank: f[4].parse().map_err(|_| parse_err(i + 1, "bad rank".into()))?,
            fps: Vec::new(),
        });
    }
    if let Some(fp_path) = fps {
        let text = std::fs::read_to_string(fp_path).map_err(|e| Error::io(fp_path, e))?;
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() != out.len() {
            return Err(Error::Parse {
                path: fp_path.display().to_string(),
                line: lines.len(),
                msg: format!("{} lines for {} rank records", lines.len(), out.len()),
            });
        }
        for (i, (rec, line)) in out.iter_mut().zip(lines).enumerate() {
            for name in line.split_whitespace() {
                rec.fps.push(kg.entity_id(name).ok_or_else(|| Error::Unknown {
                    kind: "entity",
                    name: name.into(),
                    path: fp_path.display().to_string(),
                    line: i + 1,
                })?);
            }
        }
    }
    Ok(out)
}
