//! Mini-batch scheduling: least-visited center selection and batch assembly.
//!
//! A batch of size |B| holds |B|/2 forward triples in rows `0..|B|/2` and
//! their inverses in rows `|B|/2..|B|`, so row `i + |B|/2` mirrors row `i`.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, Triple, TripleId};
use crate::paths::{self, Hops};
use crate::rng::Rng;
use crate::sampler::{approx_from_hops, Subgraph, SubgraphStore};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum BatchMode {
    /// All forward triples from one subgraph.
    Saam,
    /// Uniform over the training set without replacement.
    Random,
    /// Half from the subgraph, half uniform.
    Mixed,
}

impl fmt::Display for BatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BatchMode::Saam => "saam",
            BatchMode::Random => "random",
            BatchMode::Mixed => "mixed",
        })
    }
}

impl FromStr for BatchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "saam" => Ok(BatchMode::Saam),
            "random" => Ok(BatchMode::Random),
            "mixed" => Ok(BatchMode::Mixed),
            other => Err(Error::Config(format!("unknown scheduler '{other}'"))),
        }
    }
}

/// Where a forward row came from.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum RowOrigin {
    Subgraph,
    /// Filled in because the subgraph had too few triples.
    TopUp,
    Random,
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct BatchRow {
    /// Oriented triple; for inverse rows this is `(t, r⁻¹, h)`.
    pub triple: Triple,
    pub inverse: bool,
    pub origin: RowOrigin,
    /// Hops from the center head to the row head / tail.
    pub head_hops: Hops,
    pub tail_hops: Hops,
    /// ψ of the row's tail.
    pub psi: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MiniBatch {
    pub center: Option<TripleId>,
    pub rows: Vec<BatchRow>,
    /// Row-major |B|×|B|; `[i][j]` is set when `(h_i, r_i, t_j)` is a known
    /// triple for `j != i`, which removes `t_j` from row `i`'s negatives.
    pub known_true: Vec<bool>,
}

impl MiniBatch {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    #[inline]
    pub fn masked(&self, i: usize, j: usize) -> bool {
        self.known_true[i * self.rows.len() + j]
    }

    /// Approximate distance between row `i`'s head and row `j`'s tail.
    #[inline]
    pub fn approx_distance(&self, i: usize, j: usize) -> Hops {
        approx_from_hops(self.rows[i].head_hops, self.rows[j].tail_hops)
    }

    /// Forward rows only.
    pub fn forward_rows(&self) -> &[BatchRow] {
        &self.rows[..self.rows.len() / 2]
    }
}

/// Visit tallies. `membership` counts how often each triple appeared as a
/// forward row; `selection` counts how often it was chosen as a center.
/// `last_selected` holds the selection clock at the most recent pick (0 for
/// never), which orders ties like a queue: a freshly picked center goes to
/// the back of its count class.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VisitCounter {
    pub membership: Vec<u64>,
    pub selection: Vec<u64>,
    pub last_selected: Vec<u64>,
    clock: u64,
}

impl VisitCounter {
    pub fn new(num_triples: usize) -> Self {
        VisitCounter {
            membership: vec![0; num_triples],
            selection: vec![0; num_triples],
            last_selected: vec![0; num_triples],
            clock: 0,
        }
    }

    pub fn record_selection(&mut self, center: TripleId) -> Result<()> {
        let slot = self.selection.get_mut(center.index()).ok_or_else(|| {
            Error::Contract(format!("center {center} is not a training triple"))
        })?;
        *slot += 1;
        self.clock += 1;
        self.last_selected[center.index()] = self.clock;
        Ok(())
    }

    pub fn total_membership(&self) -> u64 {
        self.membership.iter().sum()
    }

    /// Writes `triple_id<TAB>count` for the membership tally.
    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        write_counts(&self.membership, path)
    }

    /// Same format, for center selections.
    pub fn write_selection(&self, path: &Path) -> Result<()> {
        write_counts(&self.selection, path)
    }
}

fn write_counts(counts: &[u64], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (i, c) in counts.iter().enumerate() {
        writeln!(w, "{i}\t{c}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a `triple_id<TAB>count` file back into a dense vector.
pub fn read_counts(path: &Path, num_triples: usize) -> Result<Vec<u64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = vec![0u64; num_triples];
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            msg: msg.to_owned(),
        };
        let (id, count) = line.split_once('\t').ok_or_else(|| bad("expected id<TAB>count"))?;
        let id: usize = id.trim().parse().map_err(|_| bad("bad triple id"))?;
        let count: u64 = count.trim().parse().map_err(|_| bad("bad count"))?;
        *out.get_mut(id).ok_or_else(|| bad("triple id out of range"))? = count;
    }
    Ok(out)
}

/// Center with the fewest selections so far. Ties go to the center picked
/// least recently, then to the lowest id.
pub fn next_center(store: &SubgraphStore, counter: &VisitCounter) -> Result<TripleId> {
    if store.is_empty() {
        return Err(Error::Domain("subgraph store is empty".into()));
    }
    let key = |i: usize| (counter.selection[i], counter.last_selected[i]);
    let best = (0..store.len()).min_by_key(|&i| key(i)).unwrap();
    Ok(TripleId(best as u32))
}

/// Adds one membership visit per forward row. Inverse rows mirror a forward
/// row and are not counted again.
pub fn record_visits(counter: &mut VisitCounter, batch: &MiniBatch) -> Result<()> {
    for row in batch.forward_rows() {
        let slot = counter
            .membership
            .get_mut(row.triple.id.index())
            .ok_or_else(|| {
                Error::Contract(format!("triple {} is not a training triple", row.triple.id))
            })?;
        *slot += 1;
    }
    Ok(())
}

fn check_batch_size(kg: &KnowledgeGraph, batch_size: usize) -> Result<usize> {
    if batch_size < 2 || batch_size % 2 != 0 {
        return Err(Error::Config(format!(
            "batch size must be even and at least 2, got {batch_size}"
        )));
    }
    let half = batch_size / 2;
    if half > kg.num_triples() {
        return Err(Error::Config(format!(
            "batch size {batch_size} needs {half} distinct triples but the graph has {}",
            kg.num_triples()
        )));
    }
    Ok(half)
}

/// Draws `count` triples uniformly from the whole training set, skipping
/// those already in `taken`.
fn draw_uniform(
    kg: &KnowledgeGraph,
    count: usize,
    taken: &mut HashSet<TripleId>,
    rng: &mut Rng,
) -> Vec<TripleId> {
    let n = kg.num_triples();
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    if taken.len() + count * 4 >= n {
        let mut pool: Vec<TripleId> = (0..n as u32)
            .map(TripleId)
            .filter(|t| !taken.contains(t))
            .collect();
        pool.shuffle(rng);
        pool.truncate(count);
        taken.extend(pool.iter().copied());
        return pool;
    }
    while out.len() < count {
        let t = TripleId(rng.gen_range(0..n as u32));
        if taken.insert(t) {
            out.push(t);
        }
    }
    out
}

/// Builds the batch rows for the given forward triples. Hops come from the
/// subgraph when it has them; anything missing triggers one full BFS from the
/// center head. Without a subgraph the first row's head plays the center.
pub fn build_batch(
    kg: &KnowledgeGraph,
    sub: Option<&Subgraph>,
    forward: &[(TripleId, RowOrigin)],
) -> MiniBatch {
    let triples: Vec<(Triple, RowOrigin)> =
        forward.iter().map(|&(id, o)| (*kg.triple(id), o)).collect();
    build_batch_from(kg, sub, &triples)
}

/// As [`build_batch`], for rows that need not be training triples.
pub fn build_batch_from(
    kg: &KnowledgeGraph,
    sub: Option<&Subgraph>,
    forward: &[(Triple, RowOrigin)],
) -> MiniBatch {
    build_masked(kg, sub, forward, 2 * forward.len())
}

/// As [`build_batch_from`], but only row 0 gets its known-triple mask.
/// Enough for scoring the first row with [`crate::loss::row_loss`].
pub fn build_query_batch(kg: &KnowledgeGraph, forward: &[(Triple, RowOrigin)]) -> MiniBatch {
    build_masked(kg, None, forward, 1)
}

fn build_masked(
    kg: &KnowledgeGraph,
    sub: Option<&Subgraph>,
    forward: &[(Triple, RowOrigin)],
    mask_rows: usize,
) -> MiniBatch {
    let half = forward.len();
    let center_head = match sub {
        Some(s) => kg.triple(s.center).head,
        None => forward[0].0.head,
    };

    let mut full: Option<Vec<Hops>> = None;
    let mut hops = |e: EntityId| -> Hops {
        if let Some(d) = sub.and_then(|s| s.distance(e)) {
            return d;
        }
        full.get_or_insert_with(|| paths::bfs_distances(kg, center_head))[e.index()]
    };

    let mut rows = Vec::with_capacity(half * 2);
    for &(t, origin) in forward {
        rows.push(BatchRow {
            triple: t,
            inverse: false,
            origin,
            head_hops: hops(t.head),
            tail_hops: hops(t.tail),
            psi: kg.psi(t.tail),
        });
    }
    for i in 0..half {
        let fwd = rows[i];
        let t = fwd.triple.inverted();
        rows.push(BatchRow {
            triple: t,
            inverse: true,
            origin: fwd.origin,
            head_hops: fwd.tail_hops,
            tail_hops: fwd.head_hops,
            psi: kg.psi(t.tail),
        });
    }

    let n = rows.len();
    let mut known_true = vec![false; n * n];
    known_true
        .par_chunks_mut(n.max(1))
        .take(mask_rows)
        .enumerate()
        .for_each(|(i, mask)| {
            let (h, r) = (rows[i].triple.head, rows[i].triple.rel);
            for (j, m) in mask.iter_mut().enumerate() {
                *m = j != i && kg.contains(h, r, rows[j].triple.tail);
            }
        });
    MiniBatch {
        center: sub.map(|s| s.center),
        rows,
        known_true,
    }
}

/// Assembles one batch of `batch_size` rows.
///
/// `saam` draws |B|/2 distinct subgraph triples (topping up uniformly from
/// the training set when the subgraph is smaller); `mixed` takes the first
/// half of those from the subgraph and the rest uniformly; `random` ignores
/// the subgraph entirely.
pub fn assemble_batch(
    kg: &KnowledgeGraph,
    sub: Option<&Subgraph>,
    batch_size: usize,
    mode: BatchMode,
    rng: &mut Rng,
) -> Result<MiniBatch> {
    let half = check_batch_size(kg, batch_size)?;
    let from_subgraph = match mode {
        BatchMode::Saam => half,
        BatchMode::Mixed => half - half / 2,
        BatchMode::Random => 0,
    };
    let sub = match (mode, sub) {
        (BatchMode::Random, _) => None,
        (_, Some(s)) => Some(s),
        (_, None) => {
            return Err(Error::Contract(format!(
                "{mode} batches need a subgraph"
            )))
        }
    };

    let mut taken = HashSet::with_capacity(half);
    let mut forward: Vec<(TripleId, RowOrigin)> = Vec::with_capacity(half);
    if let Some(s) = sub {
        let k = from_subgraph.min(s.triples.len());
        for i in index::sample(rng, s.triples.len(), k).into_iter() {
            let id = s.triples[i];
            taken.insert(id);
            forward.push((id, RowOrigin::Subgraph));
        }
        let short = from_subgraph - k;
        for id in draw_uniform(kg, short, &mut taken, rng) {
            forward.push((id, RowOrigin::TopUp));
        }
    }
    let rest = half - forward.len();
    for id in draw_uniform(kg, rest, &mut taken, rng) {
        forward.push((id, RowOrigin::Random));
    }
    Ok(build_batch(kg, sub, &forward))
}

/// Stateful batch source used by training: owns the counters and, for the
/// random mode, a without-replacement permutation of the training set that
/// is reshuffled once exhausted.
pub struct Scheduler<'a> {
    kg: &'a KnowledgeGraph,
    store: Option<&'a SubgraphStore>,
    mode: BatchMode,
    batch_size: usize,
    pub counter: VisitCounter,
    perm: Vec<TripleId>,
    pos: usize,
}

impl<'a> Scheduler<'a> {
    pub fn new(
        kg: &'a KnowledgeGraph,
        store: Option<&'a SubgraphStore>,
        mode: BatchMode,
        batch_size: usize,
    ) -> Result<Self> {
        check_batch_size(kg, batch_size)?;
        if mode != BatchMode::Random {
            let store = store.ok_or_else(|| {
                Error::Config(format!("scheduler '{mode}' needs a subgraph store"))
            })?;
            if store.len() != kg.num_triples() {
                return Err(Error::Config(format!(
                    "subgraph store has {} records but the graph has {} triples",
                    store.len(),
                    kg.num_triples()
                )));
            }
        }
        Ok(Scheduler {
            kg,
            store,
            mode,
            batch_size,
            counter: VisitCounter::new(kg.num_triples()),
            perm: Vec::new(),
            pos: 0,
        })
    }

    pub fn mode(&self) -> BatchMode {
        self.mode
    }

    /// Batches needed to draw every training triple once in random mode.
    pub fn pass_len(&self) -> usize {
        self.kg.num_triples().div_ceil(self.batch_size / 2)
    }

    /// Next batch; visit tallies are updated before returning.
    pub fn next_batch(&mut self, rng: &mut Rng) -> Result<MiniBatch> {
        let batch = match self.mode {
            BatchMode::Random => {
                let half = self.batch_size / 2;
                if self.pos >= self.perm.len() {
                    self.perm = (0..self.kg.num_triples() as u32).map(TripleId).collect();
                    self.perm.shuffle(rng);
                    self.pos = 0;
                }
                let end = (self.pos + half).min(self.perm.len());
                let forward: Vec<(TripleId, RowOrigin)> = self.perm[self.pos..end]
                    .iter()
                    .map(|&t| (t, RowOrigin::Random))
                    .collect();
                self.pos = end;
                build_batch(self.kg, None, &forward)
            }
            mode => {
                let store = self.store.expect("checked in new");
                let center = next_center(store, &self.counter)?;
                self.counter.record_selection(center)?;
                assemble_batch(self.kg, Some(store.get(center)), self.batch_size, mode, rng)?
            }
        };
        record_visits(&mut self.counter, &batch)?;
        Ok(batch)
    }
}
