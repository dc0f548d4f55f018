//! Lookup bi-encoder.
//!
//! `x_hr = normalize(E_h[h] + R[r])` and `x_t = normalize(E_t[t])`. The
//! relation table covers forward and inverse ids. Parameters are kept in
//! `f64`; checkpoints store them as little-endian `f32`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, RelationId};
use crate::rng::Rng;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SATK";
pub const CHECKPOINT_VERSION: u32 = 1;

pub const MIN_TEMPERATURE: f64 = 0.01;
pub const MAX_TEMPERATURE: f64 = 1.0;
pub const DEFAULT_TEMPERATURE: f64 = 0.05;

/// Norms below this are treated as the zero vector.
const ZERO_NORM: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    pub dim: usize,
    pub num_entities: usize,
    pub num_relation_ids: usize,
    /// |E| × d, head side
    pub entity: Vec<f64>,
    /// |R_total| × d
    pub relation: Vec<f64>,
    /// |E| × d, tail side
    pub tail: Vec<f64>,
    pub beta: f64,
    /// τ = exp(−s), with s clamped so that τ stays in [0.01, 1].
    pub log_inv_temperature: f64,
}

/// A unit vector together with the norm of the raw vector it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoded {
    pub unit: Vec<f64>,
    pub norm: f64,
}

pub(crate) fn normalize(raw: Vec<f64>) -> Encoded {
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < ZERO_NORM {
        // fixed direction for a degenerate input
        let mut unit = vec![0.0; raw.len()];
        unit[0] = 1.0;
        return Encoded { unit, norm: 0.0 };
    }
    Encoded {
        unit: raw.into_iter().map(|x| x / norm).collect(),
        norm,
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl EncoderParams {
    pub fn zeros(dim: usize, num_entities: usize, num_relation_ids: usize) -> Self {
        EncoderParams {
            dim,
            num_entities,
            num_relation_ids,
            entity: vec![0.0; num_entities * dim],
            relation: vec![0.0; num_relation_ids * dim],
            tail: vec![0.0; num_entities * dim],
            beta: 0.0,
            log_inv_temperature: (1.0 / DEFAULT_TEMPERATURE).ln(),
        }
    }

    /// Embeddings i.i.d. uniform in [−1/√d, 1/√d]; β = 0; τ = 0.05.
    pub fn init(kg: &KnowledgeGraph, dim: usize, rng: &mut Rng) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Config(format!("embedding dimension must be ≥ 2, got {dim}")));
        }
        let mut p = Self::zeros(dim, kg.num_entities(), kg.num_relation_ids());
        let a = 1.0 / (dim as f64).sqrt();
        for table in [&mut p.entity, &mut p.relation, &mut p.tail] {
            for x in table.iter_mut() {
                *x = rng.gen_range(-a..=a);
            }
        }
        Ok(p)
    }

    pub fn temperature(&self) -> f64 {
        1.0 / self.inv_temperature()
    }

    pub fn inv_temperature(&self) -> f64 {
        self.clamped_log_inv_temperature().exp()
    }

    pub(crate) fn clamped_log_inv_temperature(&self) -> f64 {
        self.log_inv_temperature
            .clamp((1.0 / MAX_TEMPERATURE).ln(), (1.0 / MIN_TEMPERATURE).ln())
    }

    /// Whether `s` lies inside the clamp range (where the clamp has slope 1).
    pub(crate) fn temperature_active(&self) -> bool {
        let s = self.log_inv_temperature;
        s >= (1.0 / MAX_TEMPERATURE).ln() && s <= (1.0 / MIN_TEMPERATURE).ln()
    }

    pub fn set_temperature(&mut self, tau: f64) {
        self.log_inv_temperature = (1.0 / tau).ln();
    }

    #[inline]
    pub fn entity_row(&self, e: EntityId) -> &[f64] {
        &self.entity[e.index() * self.dim..(e.index() + 1) * self.dim]
    }

    #[inline]
    pub fn relation_row(&self, r: RelationId) -> &[f64] {
        &self.relation[r.index() * self.dim..(r.index() + 1) * self.dim]
    }

    #[inline]
    pub fn tail_row(&self, e: EntityId) -> &[f64] {
        &self.tail[e.index() * self.dim..(e.index() + 1) * self.dim]
    }

    fn check_ids(&self, e: EntityId, r: Option<RelationId>) -> Result<()> {
        if e.index() >= self.num_entities {
            return Err(Error::Domain(format!("entity {e} out of range")));
        }
        if let Some(r) = r {
            if r.index() >= self.num_relation_ids {
                return Err(Error::Domain(format!("relation {r} out of range")));
            }
        }
        Ok(())
    }

    /// Unnormalized head-relation vector.
    pub(crate) fn head_rel_raw(&self, h: EntityId, r: RelationId) -> Vec<f64> {
        self.entity_row(h)
            .iter()
            .zip(self.relation_row(r))
            .map(|(a, b)| a + b)
            .collect()
    }

    pub(crate) fn encode_head_rel_full(&self, h: EntityId, r: RelationId) -> Encoded {
        normalize(self.head_rel_raw(h, r))
    }

    pub(crate) fn encode_tail_full(&self, t: EntityId) -> Encoded {
        normalize(self.tail_row(t).to_vec())
    }

    pub fn encode_head_rel(&self, h: EntityId, r: RelationId) -> Result<Vec<f64>> {
        self.check_ids(h, Some(r))?;
        let raw = self.head_rel_raw(h, r);
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite parameters encoding ({h}, {r})"
            )));
        }
        Ok(normalize(raw).unit)
    }

    pub fn encode_tail(&self, t: EntityId) -> Result<Vec<f64>> {
        self.check_ids(t, None)?;
        let raw = self.tail_row(t);
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("non-finite parameters encoding tail {t}")));
        }
        Ok(normalize(raw.to_vec()).unit)
    }

    /// Unit tail encodings for every entity, row-major.
    pub fn encode_all_tails(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.tail.len());
        for e in 0..self.num_entities {
            out.extend(self.encode_tail_full(EntityId(e as u32)).unit);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.entity
            .iter()
            .chain(&self.relation)
            .chain(&self.tail)
            .all(|x| x.is_finite())
            && self.beta.is_finite()
            && self.log_inv_temperature.is_finite()
    }

    /// Checkpoint layout: magic, version, d, |E|, |R_total| as u32 LE, then
    /// the entity, relation and tail tables, β and s as f32 LE.
    pub fn write_checkpoint(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut buf = Vec::with_capacity(20 + 4 * (self.entity.len() * 2 + self.relation.len() + 2));
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        for v in [
            CHECKPOINT_VERSION,
            self.dim as u32,
            self.num_entities as u32,
            self.num_relation_ids as u32,
        ] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for table in [&self.entity, &self.relation, &self.tail] {
            for &x in table.iter() {
                buf.extend_from_slice(&(x as f32).to_le_bytes());
            }
        }
        buf.extend_from_slice(&(self.beta as f32).to_le_bytes());
        buf.extend_from_slice(&(self.log_inv_temperature as f32).to_le_bytes());
        w.write_all(&buf).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_checkpoint(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut bytes = Vec::new();
        BufReader::new(file)
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(path, e))?;
        let bad = |msg: &str| Error::Parse {
            path: path.display().to_string(),
            line: 0,
            msg: msg.to_owned(),
        };
        if bytes.len() < 20 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint (bad magic)"));
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        if u32_at(4) != CHECKPOINT_VERSION {
            return Err(bad("unsupported checkpoint version"));
        }
        let (dim, ne, nr) = (u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize);
        let floats = ne * dim * 2 + nr * dim + 2;
        if bytes.len() != 20 + floats * 4 {
            return Err(bad("checkpoint size does not match its header"));
        }
        let mut vals = bytes[20..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
        let mut take = |n: usize| -> Vec<f64> { vals.by_ref().take(n).collect() };
        let entity = take(ne * dim);
        let relation = take(nr * dim);
        let tail = take(ne * dim);
        let rest = take(2);
        Ok(EncoderParams {
            dim,
            num_entities: ne,
            num_relation_ids: nr,
            entity,
            relation,
            tail,
            beta: rest[0],
            log_inv_temperature: rest[1],
        })
    }

    /// Rounds every parameter through `f32`, matching what a checkpoint
    /// round trip produces.
    pub fn quantized(&self) -> Self {
        let q = |v: &Vec<f64>| v.iter().map(|&x| x as f32 as f64).collect();
        EncoderParams {
            entity: q(&self.entity),
            relation: q(&self.relation),
            tail: q(&self.tail),
            beta: self.beta as f32 as f64,
            log_inv_temperature: self.log_inv_temperature as f32 as f64,
            ..self.clone()
        }
    }
}
