//! Knowledge graph storage.
//!
//! Entities and relations get dense ids in order of first appearance in the
//! triple file. Every forward relation `k` has an inverse twin; the two share
//! a base index and differ in the low bit of [`RelationId`], so `r ^ 1` flips
//! direction without needing to know the relation count.
//!
//! The undirected view used by the samplers is stored in CSR form. Parallel
//! triples between the same pair of entities collapse into one neighbor slot
//! whose triple ids are kept in a second CSR level. Self-loops are not
//! neighbors.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId(pub u32);

impl EntityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Dense relation id: `2k` is forward relation `k`, `2k + 1` its inverse.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationId(pub u32);

impl RelationId {
    #[inline]
    pub fn forward(base: u32) -> Self {
        RelationId(base << 1)
    }

    #[inline]
    pub fn inverse(self) -> Self {
        RelationId(self.0 ^ 1)
    }

    #[inline]
    pub fn is_inverse(self) -> bool {
        self.0 & 1 == 1
    }

    /// Index of the underlying forward relation.
    #[inline]
    pub fn base(self) -> u32 {
        self.0 >> 1
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TripleId(pub u32);

impl TripleId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TripleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct Triple {
    pub head: EntityId,
    pub rel: RelationId,
    pub tail: EntityId,
    pub id: TripleId,
}

impl Triple {
    /// The mirrored triple `(t, r⁻¹, h)`; it keeps the id of its source.
    pub fn inverted(&self) -> Triple {
        Triple {
            head: self.tail,
            rel: self.rel.inverse(),
            tail: self.head,
            id: self.id,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EntityMeta {
    pub name: String,
    pub description: String,
}

/// A labelled `(head, relation, tail)` query, as read from an evaluation split.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct LabeledTriple {
    pub head: EntityId,
    pub rel: RelationId,
    pub tail: EntityId,
}

#[derive(Clone, Debug)]
pub struct KnowledgeGraph {
    entities: Vec<String>,
    entity_index: HashMap<String, EntityId>,
    relations: Vec<String>,
    relation_index: HashMap<String, u32>,
    triples: Vec<Triple>,
    known: HashSet<(u32, u32, u32)>,
    // undirected CSR
    adj_offsets: Vec<usize>,
    adj: Vec<EntityId>,
    // per neighbor slot, the triples connecting the pair
    slot_offsets: Vec<usize>,
    slot_triples: Vec<TripleId>,
    // forward triples by head
    out_offsets: Vec<usize>,
    out_triples: Vec<TripleId>,
    meta: Vec<Option<EntityMeta>>,
}

/// Incremental construction of a [`KnowledgeGraph`].
#[derive(Default)]
pub struct KgBuilder {
    entities: Vec<String>,
    entity_index: HashMap<String, EntityId>,
    relations: Vec<String>,
    relation_index: HashMap<String, u32>,
    raw: Vec<(u32, u32, u32)>,
    known: HashSet<(u32, u32, u32)>,
    meta: HashMap<u32, EntityMeta>,
}

impl KgBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entity(&mut self, name: &str) -> EntityId {
        if let Some(&id) = self.entity_index.get(name) {
            return id;
        }
        let id = EntityId(self.entities.len() as u32);
        self.entities.push(name.to_owned());
        self.entity_index.insert(name.to_owned(), id);
        id
    }

    pub fn relation(&mut self, name: &str) -> u32 {
        if let Some(&k) = self.relation_index.get(name) {
            return k;
        }
        let k = self.relations.len() as u32;
        self.relations.push(name.to_owned());
        self.relation_index.insert(name.to_owned(), k);
        k
    }

    /// Adds a triple; returns `false` if it was already present.
    pub fn add(&mut self, head: &str, rel: &str, tail: &str) -> bool {
        let h = self.entity(head);
        let k = self.relation(rel);
        let t = self.entity(tail);
        let key = (h.0, RelationId::forward(k).0, t.0);
        if !self.known.insert(key) {
            return false;
        }
        self.raw.push(key);
        true
    }

    pub fn set_meta(&mut self, entity: &str, meta: EntityMeta) {
        let id = self.entity(entity);
        self.meta.insert(id.0, meta);
    }

    pub fn build(self) -> KnowledgeGraph {
        let n = self.entities.len();
        let triples: Vec<Triple> = self
            .raw
            .iter()
            .enumerate()
            .map(|(i, &(h, r, t))| Triple {
                head: EntityId(h),
                rel: RelationId(r),
                tail: EntityId(t),
                id: TripleId(i as u32),
            })
            .collect();

        // (u, v, triple) incidences over the undirected view, no self-loops
        let mut inc: Vec<(u32, u32, u32)> = Vec::with_capacity(triples.len() * 2);
        for t in &triples {
            if t.head == t.tail {
                continue;
            }
            inc.push((t.head.0, t.tail.0, t.id.0));
            inc.push((t.tail.0, t.head.0, t.id.0));
        }
        inc.sort_unstable();

        let mut adj_offsets = vec![0usize; n + 1];
        let mut adj = Vec::new();
        let mut slot_offsets = vec![0usize];
        let mut slot_triples = Vec::with_capacity(inc.len());
        let mut i = 0;
        for u in 0..n as u32 {
            while i < inc.len() && inc[i].0 == u {
                let v = inc[i].1;
                adj.push(EntityId(v));
                while i < inc.len() && inc[i].0 == u && inc[i].1 == v {
                    slot_triples.push(TripleId(inc[i].2));
                    i += 1;
                }
                slot_offsets.push(slot_triples.len());
            }
            adj_offsets[u as usize + 1] = adj.len();
        }

        let mut out_counts = vec![0usize; n + 1];
        for t in &triples {
            out_counts[t.head.index() + 1] += 1;
        }
        for v in 0..n {
            out_counts[v + 1] += out_counts[v];
        }
        let out_offsets = out_counts.clone();
        let mut fill = out_counts;
        let mut out_triples = vec![TripleId(0); triples.len()];
        for t in &triples {
            out_triples[fill[t.head.index()]] = t.id;
            fill[t.head.index()] += 1;
        }

        let mut meta = vec![None; n];
        for (id, m) in self.meta {
            meta[id as usize] = Some(m);
        }

        let kg = KnowledgeGraph {
            entities: self.entities,
            entity_index: self.entity_index,
            relations: self.relations,
            relation_index: self.relation_index,
            triples,
            known: self.known,
            adj_offsets,
            adj,
            slot_offsets,
            slot_triples,
            out_offsets,
            out_triples,
            meta,
        };
        let stranded = kg
            .triples
            .iter()
            .filter(|t| kg.degree(t.tail) == 0)
            .count();
        if stranded > 0 {
            log::warn!(
                "{stranded} triples have a degree-0 tail (self-loop only); their frequency weight is 0"
            );
        }
        kg
    }
}

fn split_line<'a>(line: &'a str, path: &str, lineno: usize) -> Result<[&'a str; 3]> {
    let mut parts = line.split('\t');
    let mut out = [""; 3];
    for slot in out.iter_mut() {
        *slot = parts.next().ok_or_else(|| Error::Parse {
            path: path.to_owned(),
            line: lineno,
            msg: "expected 3 tab-separated fields".into(),
        })?;
    }
    if parts.next().is_some() {
        return Err(Error::Parse {
            path: path.to_owned(),
            line: lineno,
            msg: "expected exactly 3 tab-separated fields".into(),
        });
    }
    if out.iter().any(|s| s.is_empty()) {
        return Err(Error::Parse {
            path: path.to_owned(),
            line: lineno,
            msg: "empty field".into(),
        });
    }
    Ok(out)
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                msg: "invalid UTF-8".into(),
            },
            _ => Error::io(path, e),
        })?;
        let line = line.strip_suffix('\r').unwrap_or(&line).to_owned();
        if line.is_empty() {
            continue;
        }
        out.push((i + 1, line));
    }
    Ok(out)
}

/// Reads a `head<TAB>relation<TAB>tail` file and, optionally, an
/// `entity<TAB>name<TAB>description` metadata file.
pub fn ingest_triples(path: &Path, entity_meta: Option<&Path>) -> Result<KnowledgeGraph> {
    let shown = path.display().to_string();
    let mut b = KgBuilder::new();
    for (lineno, line) in read_lines(path)? {
        let [h, r, t] = split_line(&line, &shown, lineno)?;
        if !b.add(h, r, t) {
            return Err(Error::DuplicateTriple {
                path: shown,
                line: lineno,
                triple: format!("{h}\t{r}\t{t}"),
            });
        }
    }
    if let Some(meta_path) = entity_meta {
        let shown = meta_path.display().to_string();
        for (lineno, line) in read_lines(meta_path)? {
            let [e, name, desc] = split_line(&line, &shown, lineno)?;
            b.set_meta(
                e,
                EntityMeta {
                    name: name.to_owned(),
                    description: desc.to_owned(),
                },
            );
        }
    }
    Ok(b.build())
}

impl KnowledgeGraph {
    /// Builds a graph from already-dense ids; names are synthesised as
    /// `e<i>` and `r<k>`. Duplicate triples are dropped.
    pub fn from_ids(
        num_entities: usize,
        num_relations: usize,
        triples: impl IntoIterator<Item = (u32, u32, u32)>,
    ) -> Self {
        let mut b = KgBuilder::new();
        for i in 0..num_entities {
            b.entity(&format!("e{i}"));
        }
        for k in 0..num_relations {
            b.relation(&format!("r{k}"));
        }
        for (h, r, t) in triples {
            b.add(&format!("e{h}"), &format!("r{r}"), &format!("e{t}"));
        }
        b.build()
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    /// Number of forward relations.
    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    /// Forward plus inverse relation ids.
    pub fn num_relation_ids(&self) -> usize {
        self.relations.len() * 2
    }

    pub fn num_triples(&self) -> usize {
        self.triples.len()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn triple(&self, id: TripleId) -> &Triple {
        &self.triples[id.index()]
    }

    pub fn entity_name(&self, e: EntityId) -> &str {
        &self.entities[e.index()]
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entity_index.get(name).copied()
    }

    pub fn relation_name(&self, r: RelationId) -> String {
        let base = &self.relations[r.base() as usize];
        if r.is_inverse() {
            format!("{base}^-1")
        } else {
            base.clone()
        }
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relation_index
            .get(name)
            .map(|&k| RelationId::forward(k))
    }

    pub fn meta(&self, e: EntityId) -> Option<&EntityMeta> {
        self.meta.get(e.index()).and_then(|m| m.as_ref())
    }

    pub fn check_entity(&self, e: EntityId) -> Result<()> {
        if e.index() < self.entities.len() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "entity id {e} out of range (|E| = {})",
                self.entities.len()
            )))
        }
    }

    /// Sorted, duplicate-free neighbors of `v` in the undirected view.
    pub fn neighbors(&self, v: EntityId) -> Result<&[EntityId]> {
        self.check_entity(v)?;
        Ok(self.neighbors_unchecked(v))
    }

    #[inline]
    pub(crate) fn neighbors_unchecked(&self, v: EntityId) -> &[EntityId] {
        &self.adj[self.adj_offsets[v.index()]..self.adj_offsets[v.index() + 1]]
    }

    #[inline]
    pub(crate) fn adj_start(&self, v: EntityId) -> usize {
        self.adj_offsets[v.index()]
    }

    #[inline]
    pub fn degree(&self, v: EntityId) -> usize {
        self.adj_offsets[v.index() + 1] - self.adj_offsets[v.index()]
    }

    /// Triples joining `u` to its `slot`-th neighbor.
    #[inline]
    pub(crate) fn slot_triples(&self, u: EntityId, slot: usize) -> &[TripleId] {
        let s = self.adj_offsets[u.index()] + slot;
        &self.slot_triples[self.slot_offsets[s]..self.slot_offsets[s + 1]]
    }

    /// Forward triples whose head is `v`.
    pub fn outgoing(&self, v: EntityId) -> &[TripleId] {
        &self.out_triples[self.out_offsets[v.index()]..self.out_offsets[v.index() + 1]]
    }

    /// Whether `(head, rel, tail)` is a known triple; inverse relations are
    /// answered through their forward mirror.
    pub fn contains(&self, head: EntityId, rel: RelationId, tail: EntityId) -> bool {
        if rel.is_inverse() {
            self.known.contains(&(tail.0, rel.inverse().0, head.0))
        } else {
            self.known.contains(&(head.0, rel.0, tail.0))
        }
    }

    /// ψ(t) = ln(|N(t)| + 1).
    pub fn frequency_weight(&self, t: EntityId) -> Result<f64> {
        self.check_entity(t)?;
        let deg = self.degree(t);
        if deg == 0 {
            log::warn!("frequency weight of isolated entity {t} is 0");
        }
        Ok((deg as f64 + 1.0).ln())
    }

    pub(crate) fn psi(&self, t: EntityId) -> f64 {
        (self.degree(t) as f64 + 1.0).ln()
    }

    pub fn num_undirected_edges(&self) -> usize {
        self.adj.len() / 2
    }

    /// Average number of neighbors per entity.
    pub fn average_degree(&self) -> f64 {
        if self.entities.is_empty() {
            return 0.0;
        }
        self.adj.len() as f64 / self.entities.len() as f64
    }

    /// Resolves an evaluation split against this graph's vocabularies.
    /// Unseen entities or relations are an error (transductive setting).
    pub fn resolve_split(&self, path: &Path) -> Result<Vec<LabeledTriple>> {
        let shown = path.display().to_string();
        let mut out = Vec::new();
        for (lineno, line) in read_lines(path)? {
            let [h, r, t] = split_line(&line, &shown, lineno)?;
            let lookup_e = |name: &str| {
                self.entity_id(name).ok_or_else(|| Error::Unknown {
                    kind: "entity",
                    name: name.to_owned(),
                    path: shown.clone(),
                    line: lineno,
                })
            };
            let head = lookup_e(h)?;
            let tail = lookup_e(t)?;
            let rel = self.relation_id(r).ok_or_else(|| Error::Unknown {
                kind: "relation",
                name: r.to_owned(),
                path: shown.clone(),
                line: lineno,
            })?;
            out.push(LabeledTriple { head, rel, tail });
        }
        Ok(out)
    }

    /// Writes the triples back out in id order, names verbatim.
    pub fn write_triples(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for t in &self.triples {
            writeln!(
                w,
                "{}\t{}\t{}",
                self.entity_name(t.head),
                self.relations[t.rel.base() as usize],
                self.entity_name(t.tail)
            )
            .map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Writes `id<TAB>name` for entities and relations plus a small stats file.
    pub fn write_index(&self, dir: &Path) -> Result<()> {
        let write = |name: &str, body: String| -> Result<()> {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))
        };
        let mut ents = String::new();
        for (i, name) in self.entities.iter().enumerate() {
            ents.push_str(&format!("{i}\t{name}\n"));
        }
        write("entities.idx", ents)?;
        let mut rels = String::new();
        for (k, name) in self.relations.iter().enumerate() {
            rels.push_str(&format!("{}\t{name}\n", RelationId::forward(k as u32)));
            rels.push_str(&format!(
                "{}\t{name}^-1\n",
                RelationId::forward(k as u32).inverse()
            ));
        }
        write("relations.idx", rels)?;
        let mut trip = String::new();
        for t in &self.triples {
            trip.push_str(&format!("{}\t{}\t{}\t{}\n", t.id, t.head, t.rel, t.tail));
        }
        write("triples.idx", trip)?;
        write(
            "stats.txt",
            format!(
                "entities\t{}\nrelations\t{}\nrelation_ids\t{}\ntriples\t{}\nundirected_edges\t{}\naverage_degree\t{:.6}\n",
                self.num_entities(),
                self.num_relations(),
                self.num_relation_ids(),
                self.num_triples(),
                self.num_undirected_edges(),
                self.average_degree()
            ),
        )
    }
}
