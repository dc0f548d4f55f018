//! Optimization loop: scheduler → loss → gradients → Adam.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::analysis;
use crate::encoder::{EncoderParams, MAX_TEMPERATURE, MIN_TEMPERATURE};
use crate::error::{Error, Result};
use crate::kg::KnowledgeGraph;
use crate::loss::{loss_and_gradients, Gradients, LossConfig};
use crate::rng::{self, stream};
use crate::sampler::SubgraphStore;
use crate::scheduler::{BatchMode, Scheduler, VisitCounter};

#[derive(Clone, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam moment decays must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Dense Adam with bias correction and no weight decay.
#[derive(Clone, Debug)]
pub struct Adam {
    cfg: AdamConfig,
    t: i32,
    m: Vec<f64>,
    v: Vec<f64>,
    dense: Vec<f64>,
}

impl Adam {
    pub fn new(cfg: AdamConfig, params: &EncoderParams) -> Self {
        let n = params.entity.len() + params.relation.len() + params.tail.len() + 2;
        Adam {
            cfg,
            t: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
            dense: vec![0.0; n],
        }
    }

    pub fn step(&mut self, params: &mut EncoderParams, grads: &Gradients) {
        let d = params.dim;
        let (ne, nr) = (params.entity.len(), params.relation.len());
        self.dense.iter_mut().for_each(|x| *x = 0.0);
        let scatter = |dense: &mut [f64], offset: usize, map: &std::collections::BTreeMap<u32, Vec<f64>>| {
            for (&k, g) in map {
                let at = offset + k as usize * d;
                dense[at..at + d].copy_from_slice(g);
            }
        };
        scatter(&mut self.dense, 0, &grads.entity);
        scatter(&mut self.dense, ne, &grads.relation);
        scatter(&mut self.dense, ne + nr, &grads.tail);
        let n = self.dense.len();
        self.dense[n - 2] = grads.beta;
        self.dense[n - 1] = grads.log_inv_temperature;

        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        let mut update = |i: usize, p: &mut f64| {
            let g = self.dense[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            *p -= lr * mh / (vh.sqrt() + eps);
        };
        for (i, p) in params.entity.iter_mut().enumerate() {
            update(i, p);
        }
        for (i, p) in params.relation.iter_mut().enumerate() {
            update(ne + i, p);
        }
        for (i, p) in params.tail.iter_mut().enumerate() {
            update(ne + nr + i, p);
        }
        update(n - 2, &mut params.beta);
        update(n - 1, &mut params.log_inv_temperature);
        params.log_inv_temperature = params
            .log_inv_temperature
            .clamp((1.0 / MAX_TEMPERATURE).ln(), (1.0 / MIN_TEMPERATURE).ln());
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub batch_size: usize,
    pub mode: BatchMode,
    pub epochs: usize,
    pub seed: u64,
    pub loss: LossConfig,
    pub optimizer: AdamConfig,
    /// Bin edges for per-epoch in-batch negative cosine histograms.
    pub histogram_edges: Option<Vec<f64>>,
    /// Keep a copy of the visit counters after every epoch.
    pub snapshot_counters: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 32,
            batch_size: 64,
            mode: BatchMode::Saam,
            epochs: 10,
            seed: 0,
            loss: LossConfig::default(),
            optimizer: AdamConfig::default(),
            histogram_edges: None,
            snapshot_counters: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogEntry {
    pub iter: usize,
    pub epoch: usize,
    pub loss: f64,
    pub beta: f64,
    pub tau: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: EncoderParams,
    pub log: Vec<LogEntry>,
    /// Mean per-row weighted loss for each epoch.
    pub epoch_losses: Vec<f64>,
    pub counter: VisitCounter,
    pub snapshots: Vec<VisitCounter>,
    /// Per-epoch fraction of in-batch negative cosines per bin.
    pub histograms: Vec<Vec<f64>>,
}

/// Iterations in one epoch: ⌈|𝒯| / |B|⌉.
pub fn iterations_per_epoch(num_triples: usize, batch_size: usize) -> usize {
    num_triples.div_ceil(batch_size)
}

pub fn train(kg: &KnowledgeGraph, store: Option<&SubgraphStore>, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let params = EncoderParams::init(kg, cfg.dim, &mut rng::derive(cfg.seed, stream::INIT))?;
    train_from(kg, store, cfg, params)
}

/// Trains starting from the given parameters.
pub fn train_from(
    kg: &KnowledgeGraph,
    store: Option<&SubgraphStore>,
    cfg: &TrainConfig,
    mut params: EncoderParams,
) -> Result<TrainOutcome> {
    cfg.loss.validate()?;
    cfg.optimizer.validate()?;
    if params.num_entities != kg.num_entities() || params.num_relation_ids != kg.num_relation_ids() {
        return Err(Error::Config("parameter shapes do not match the graph".into()));
    }
    if let Some(edges) = &cfg.histogram_edges {
        analysis::check_bin_edges(edges)?;
    }
    let mut sched = Scheduler::new(kg, store, cfg.mode, cfg.batch_size)?;
    let mut rng = rng::derive(cfg.seed, stream::SCHEDULE);
    let mut adam = Adam::new(cfg.optimizer.clone(), &params);
    let per_epoch = iterations_per_epoch(kg.num_triples(), cfg.batch_size);

    let mut log = Vec::with_capacity(per_epoch * cfg.epochs);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut snapshots = Vec::new();
    let mut histograms = Vec::new();
    let mut iter = 0;
    for epoch in 0..cfg.epochs {
        let mut sum = 0.0;
        let mut rows = 0usize;
        let mut hist = cfg
            .histogram_edges
            .as_ref()
            .map(|e| vec![0u64; e.len() - 1]);
        for _ in 0..per_epoch {
            let batch = sched.next_batch(&mut rng)?;
            if let (Some(h), Some(edges)) = (hist.as_mut(), &cfg.histogram_edges) {
                analysis::bin_negative_cosines(&params, &batch, edges, h)?;
            }
            let (loss, grads) = loss_and_gradients(&params, &batch, &cfg.loss).map_err(|e| match e {
                Error::Numeric(msg) => Error::Numeric(format!("iteration {iter}: {msg}")),
                other => other,
            })?;
            if !loss.total.is_finite() || !grads.norm().is_finite() {
                return Err(Error::Numeric(format!("iteration {iter}: loss diverged")));
            }
            adam.step(&mut params, &grads);
            if !params.is_finite() {
                return Err(Error::Numeric(format!("iteration {iter}: parameters diverged")));
            }
            sum += loss.total;
            rows += batch.len();
            log.push(LogEntry {
                iter,
                epoch,
                loss: loss.total,
                beta: params.beta,
                tau: params.temperature(),
            });
            iter += 1;
        }
        epoch_losses.push(sum / rows.max(1) as f64);
        if let Some(h) = hist {
            let total: u64 = h.iter().sum();
            histograms.push(
                h.iter()
                    .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
                    .collect(),
            );
        }
        if cfg.snapshot_counters {
            snapshots.push(sched.counter.clone());
        }
        log::info!(
            "epoch {} loss {:.6} beta {:.4} tau {:.4}",
            epoch + 1,
            epoch_losses[epoch],
            params.beta,
            params.temperature()
        );
    }
    Ok(TrainOutcome {
        params,
        log,
        epoch_losses,
        counter: sched.counter,
        snapshots,
        histograms,
    })
}

/// CSV with header `iter,loss,beta,tau`.
pub fn write_log(log: &[LogEntry], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut body = String::from("iter,loss,beta,tau\n");
    for e in log {
        body.push_str(&format!("{},{:.9},{:.9},{:.9}\n", e.iter, e.loss, e.beta, e.tau));
    }
    w.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
