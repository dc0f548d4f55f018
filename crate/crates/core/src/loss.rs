//! Proximity-aware, frequency-weighted contrastive loss and its gradients.
//!
//! For batch row `i` with query `(h_i, r_i)` and positive tail `t_i`:
//!
//! ```text
//! φ(i, j) = cos(x_hr_i, x_t_j) + β·ω(i, j)
//! z_ii    = (φ(i, i) − γ) / τ
//! z_ij    = φ(i, j) / τ                       j ≠ i, t_j not a known answer
//! L_i     = logsumexp_j(z_ij) − z_ii
//! L_B     = Σ_i ψ(t_i)·L_i
//! ```
//!
//! ω is the reciprocal of the approximate head–tail distance, 0 when
//! unreachable.

use std::collections::BTreeMap;

use crate::encoder::{dot, Encoded, EncoderParams};
use crate::error::{Error, Result};
use crate::paths::Hops;
use crate::scheduler::MiniBatch;

pub const DEFAULT_MARGIN: f64 = 0.02;

#[derive(Clone, Debug, PartialEq)]
pub struct LossConfig {
    pub margin: f64,
    pub use_hardness: bool,
    pub use_freq_weight: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            margin: DEFAULT_MARGIN,
            use_hardness: true,
            use_freq_weight: true,
        }
    }
}

impl LossConfig {
    /// Margin-free, unweighted, no hardness term.
    pub fn plain_infonce() -> Self {
        LossConfig {
            margin: 0.0,
            use_hardness: false,
            use_freq_weight: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.margin >= 0.0) || !self.margin.is_finite() {
            return Err(Error::Config(format!(
                "margin must be a non-negative number, got {}",
                self.margin
            )));
        }
        Ok(())
    }
}

/// ω = 1 / distance, 0 for unreachable pairs.
pub fn hardness(distance: Hops) -> Result<f64> {
    match distance {
        None => Ok(0.0),
        Some(0) => Err(Error::Contract("hardness of a zero distance".into())),
        Some(d) => Ok(1.0 / d as f64),
    }
}

/// φ = cos(x_hr, x_t) + β·ω for unit inputs.
pub fn score(x_hr: &[f64], x_t: &[f64], omega: f64, beta: f64) -> f64 {
    dot(x_hr, x_t) + beta * omega
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchLoss {
    /// Σ_i w_i·L_i with w_i = ψ(t_i) when frequency weighting is on, else 1.
    pub total: f64,
    /// Unweighted L_i.
    pub per_row: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Sparse gradient: only rows touched by the batch appear.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients {
    pub entity: BTreeMap<u32, Vec<f64>>,
    pub relation: BTreeMap<u32, Vec<f64>>,
    pub tail: BTreeMap<u32, Vec<f64>>,
    pub beta: f64,
    pub log_inv_temperature: f64,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        let tables: f64 = [&self.entity, &self.relation, &self.tail]
            .iter()
            .flat_map(|m| m.values())
            .flat_map(|v| v.iter())
            .map(|x| x * x)
            .sum();
        (tables + self.beta * self.beta + self.log_inv_temperature * self.log_inv_temperature)
            .sqrt()
    }
}

fn accumulate(map: &mut BTreeMap<u32, Vec<f64>>, key: u32, dim: usize, g: &[f64]) {
    let row = map.entry(key).or_insert_with(|| vec![0.0; dim]);
    for (a, b) in row.iter_mut().zip(g) {
        *a += b;
    }
}

/// Gradient through `u = v / ‖v‖`.
fn through_normalize(enc: &Encoded, g: &[f64]) -> Vec<f64> {
    if enc.norm == 0.0 {
        return vec![0.0; g.len()];
    }
    let proj = dot(g, &enc.unit);
    g.iter()
        .zip(&enc.unit)
        .map(|(gi, ui)| (gi - proj * ui) / enc.norm)
        .collect()
}

struct Forward {
    hr: Vec<Encoded>,
    tails: Vec<Encoded>,
    omega: Vec<f64>,
    logits: Vec<f64>,
    // softmax over the unmasked entries of each row, 0 elsewhere
    probs: Vec<f64>,
    loss: BatchLoss,
    inv_tau: f64,
}

/// Fills row `i` of ω and the logits; returns (L_i, logsumexp).
#[allow(clippy::too_many_arguments)]
fn row_logits(
    params: &EncoderParams,
    batch: &MiniBatch,
    cfg: &LossConfig,
    i: usize,
    hr: &Encoded,
    tails: &[Encoded],
    omega: &mut [f64],
    logits: &mut [f64],
) -> Result<(f64, f64)> {
    let inv_tau = params.inv_temperature();
    for j in 0..tails.len() {
        if j != i && batch.masked(i, j) {
            continue;
        }
        if cfg.use_hardness {
            omega[j] = hardness(batch.approx_distance(i, j))?;
        }
        let phi = score(&hr.unit, &tails[j].unit, omega[j], params.beta);
        let shifted = if j == i { phi - cfg.margin } else { phi };
        logits[j] = shifted * inv_tau;
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&z| (z - max).exp()).sum();
    let lse = max + sum.ln();
    let li = lse - logits[i];
    if !li.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss in batch row {i}")));
    }
    Ok((li, lse))
}

fn forward(params: &EncoderParams, batch: &MiniBatch, cfg: &LossConfig) -> Result<Forward> {
    let n = batch.len();
    if n == 0 {
        return Err(Error::Contract("empty batch".into()));
    }
    let inv_tau = params.inv_temperature();
    let hr: Vec<Encoded> = batch
        .rows
        .iter()
        .map(|r| params.encode_head_rel_full(r.triple.head, r.triple.rel))
        .collect();
    let tails: Vec<Encoded> = batch
        .rows
        .iter()
        .map(|r| params.encode_tail_full(r.triple.tail))
        .collect();

    let mut omega = vec![0.0; n * n];
    let mut logits = vec![f64::NEG_INFINITY; n * n];
    let mut probs = vec![0.0; n * n];
    let mut per_row = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut total = 0.0;
    for i in 0..n {
        let (li, lse) = row_logits(
            params,
            batch,
            cfg,
            i,
            &hr[i],
            &tails,
            &mut omega[i * n..(i + 1) * n],
            &mut logits[i * n..(i + 1) * n],
        )?;
        for j in 0..n {
            let z = logits[i * n + j];
            if z > f64::NEG_INFINITY {
                probs[i * n + j] = (z - lse).exp();
            }
        }
        let w = if cfg.use_freq_weight { batch.rows[i].psi } else { 1.0 };
        per_row.push(li);
        weights.push(w);
        total += w * li;
    }
    Ok(Forward {
        hr,
        tails,
        omega,
        logits,
        probs,
        loss: BatchLoss {
            total,
            per_row,
            weights,
        },
        inv_tau,
    })
}

/// Unweighted loss of row `i` alone, without scoring the other rows.
pub fn row_loss(params: &EncoderParams, batch: &MiniBatch, cfg: &LossConfig, i: usize) -> Result<f64> {
    let n = batch.len();
    if i >= n {
        return Err(Error::Contract(format!("row {i} outside a batch of {n}")));
    }
    let row = &batch.rows[i].triple;
    let hr = params.encode_head_rel_full(row.head, row.rel);
    let tails: Vec<Encoded> = batch
        .rows
        .iter()
        .map(|r| params.encode_tail_full(r.triple.tail))
        .collect();
    let mut omega = vec![0.0; n];
    let mut logits = vec![f64::NEG_INFINITY; n];
    Ok(row_logits(params, batch, cfg, i, &hr, &tails, &mut omega, &mut logits)?.0)
}

pub fn batch_loss(params: &EncoderParams, batch: &MiniBatch, cfg: &LossConfig) -> Result<BatchLoss> {
    Ok(forward(params, batch, cfg)?.loss)
}

/// Loss and exact gradients with respect to every touched embedding row,
/// β and s = log(1/τ).
pub fn loss_and_gradients(
    params: &EncoderParams,
    batch: &MiniBatch,
    cfg: &LossConfig,
) -> Result<(BatchLoss, Gradients)> {
    let fw = forward(params, batch, cfg)?;
    let n = batch.len();
    let dim = params.dim;
    let mut grads = Gradients::default();
    let mut d_hr = vec![vec![0.0; dim]; n];
    let mut d_t = vec![vec![0.0; dim]; n];
    let mut d_s = 0.0;
    for i in 0..n {
        let w = fw.loss.weights[i];
        for j in 0..n {
            let z = fw.logits[i * n + j];
            if z == f64::NEG_INFINITY {
                continue;
            }
            // ∂L/∂z_ij
            let g = w * (fw.probs[i * n + j] - if i == j { 1.0 } else { 0.0 });
            if g == 0.0 {
                continue;
            }
            d_s += g * z;
            let gc = g * fw.inv_tau;
            grads.beta += gc * fw.omega[i * n + j];
            for k in 0..dim {
                d_hr[i][k] += gc * fw.tails[j].unit[k];
                d_t[j][k] += gc * fw.hr[i].unit[k];
            }
        }
    }
    grads.log_inv_temperature = if params.temperature_active() { d_s } else { 0.0 };

    for (i, row) in batch.rows.iter().enumerate() {
        let gv = through_normalize(&fw.hr[i], &d_hr[i]);
        accumulate(&mut grads.entity, row.triple.head.0, dim, &gv);
        accumulate(&mut grads.relation, row.triple.rel.0, dim, &gv);
        let gt = through_normalize(&fw.tails[i], &d_t[i]);
        accumulate(&mut grads.tail, row.triple.tail.0, dim, &gt);
    }
    Ok((fw.loss, grads))
}

pub fn gradients(params: &EncoderParams, batch: &MiniBatch, cfg: &LossConfig) -> Result<Gradients> {
    Ok(loss_and_gradients(params, batch, cfg)?.1)
}
