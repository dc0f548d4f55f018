//! Run configuration: defaults, a flat `key = value` file, then overrides.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::analysis::{DegreeAveraging, DEFAULT_BETWEENNESS_CAP};
use crate::encoder::EncoderParams;
use crate::error::{Error, Result};
use crate::loss::{LossConfig, DEFAULT_MARGIN};
use crate::mcmc::McmcConfig;
use crate::sampler::{NeighborMode, SamplerConfig, SamplerKind};
use crate::scheduler::BatchMode;
use crate::train::{AdamConfig, TrainConfig};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Ablation {
    /// Drop the proximity term β·ω.
    Pcl,
    /// Drop the ψ weighting.
    Fmt,
    /// Random batches instead of subgraph batches.
    Saam,
}

impl FromStr for Ablation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pcl" => Ok(Ablation::Pcl),
            "fmt" => Ok(Ablation::Fmt),
            "saam" => Ok(Ablation::Saam),
            _ => Err(Error::Config(format!("unknown ablation '{s}' (pcl, fmt, saam)"))),
        }
    }
}

impl Ablation {
    fn name(self) -> &'static str {
        match self {
            Ablation::Pcl => "pcl",
            Ablation::Fmt => "fmt",
            Ablation::Saam => "saam",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub meta: Option<PathBuf>,
    pub store: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub ranks: Option<PathBuf>,
    pub fps: Option<PathBuf>,
    pub counters: Option<PathBuf>,
    pub out: PathBuf,

    pub sampler: SamplerKind,
    pub restart_prob: f64,
    pub max_triples: usize,
    pub scheduler: BatchMode,
    pub batch_size: usize,
    pub margin: f64,
    pub alpha: f64,
    pub k: usize,
    /// MCMC path length; `None` means |B|/2.
    pub path_len: Option<usize>,
    pub burn_in: usize,
    pub lr: f64,
    pub dim: usize,
    pub epochs: usize,
    pub seed: u64,
    pub workers: Option<usize>,
    pub ablate: Vec<Ablation>,
    pub filtered: bool,
    pub hist_bins: Option<usize>,
    pub snapshots: bool,
    pub max_distance: u32,
    pub pair_budget: usize,
    pub degree_averaging: DegreeAveraging,
    pub betweenness_cap: usize,
    pub centrality_top: usize,
    /// Triples per set in the loss comparison, drawn uniformly.
    pub loss_sample: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SamplerConfig::default();
        let m = McmcConfig::default();
        RunConfig {
            train: None,
            valid: None,
            test: None,
            meta: None,
            store: None,
            checkpoint: None,
            ranks: None,
            fps: None,
            counters: None,
            out: PathBuf::from("out"),
            sampler: SamplerKind::Brwr,
            restart_prob: s.restart_prob,
            max_triples: s.max_triples,
            scheduler: BatchMode::Saam,
            batch_size: 1024,
            margin: DEFAULT_MARGIN,
            alpha: m.alpha,
            k: m.k,
            path_len: None,
            burn_in: m.burn_in,
            lr: AdamConfig::default().lr,
            dim: 64,
            epochs: 10,
            seed: 0,
            workers: None,
            ablate: Vec::new(),
            filtered: true,
            hist_bins: None,
            snapshots: false,
            max_distance: 8,
            pair_budget: 100_000,
            degree_averaging: DegreeAveraging::PerEntity,
            betweenness_cap: DEFAULT_BETWEENNESS_CAP,
            centrality_top: 1000,
            loss_sample: 1000,
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got '{v}'"))),
    }
}

fn opt_path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl RunConfig {
    /// Sets one field from its textual form. Keys accept `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        let k = key.as_str();
        match k {
            "train" => self.train = opt_path(v),
            "valid" => self.valid = opt_path(v),
            "test" => self.test = opt_path(v),
            "meta" => self.meta = opt_path(v),
            "store" => self.store = opt_path(v),
            "checkpoint" => self.checkpoint = opt_path(v),
            "ranks" => self.ranks = opt_path(v),
            "fps" => self.fps = opt_path(v),
            "counters" => self.counters = opt_path(v),
            "out" => self.out = PathBuf::from(v),
            "sampler" => self.sampler = v.parse()?,
            "restart_prob" => self.restart_prob = num(k, v)?,
            "max_triples" => self.max_triples = num(k, v)?,
            "scheduler" => self.scheduler = v.parse()?,
            "batch_size" => self.batch_size = num(k, v)?,
            "margin" => self.margin = num(k, v)?,
            "alpha" => self.alpha = num(k, v)?,
            "k" => self.k = num(k, v)?,
            "path_len" => self.path_len = if v == "auto" { None } else { Some(num(k, v)?) },
            "burn_in" => self.burn_in = num(k, v)?,
            "lr" => self.lr = num(k, v)?,
            "dim" => self.dim = num(k, v)?,
            "epochs" => self.epochs = num(k, v)?,
            "seed" => self.seed = num(k, v)?,
            "workers" => self.workers = if v == "auto" { None } else { Some(num(k, v)?) },
            "ablate" => {
                self.ablate = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty() && *s != "none")
                    .map(str::parse)
                    .collect::<Result<_>>()?
            }
            "filtered" => self.filtered = boolean(k, v)?,
            "hist_bins" => self.hist_bins = if v == "none" { None } else { Some(num(k, v)?) },
            "snapshots" => self.snapshots = boolean(k, v)?,
            "max_distance" => self.max_distance = num(k, v)?,
            "pair_budget" => self.pair_budget = num(k, v)?,
            "degree_averaging" => {
                self.degree_averaging = match v {
                    "entity" => DegreeAveraging::PerEntity,
                    "degree" => DegreeAveraging::PerDistinctDegree,
                    _ => return Err(Error::Config(format!("{k}: expected entity or degree, got '{v}'"))),
                }
            }
            "betweenness_cap" => self.betweenness_cap = num(k, v)?,
            "centrality_top" => self.centrality_top = num(k, v)?,
            "loss_sample" => self.loss_sample = num(k, v)?,
            _ => return Err(Error::Config(format!("unknown configuration key '{key}'"))),
        }
        Ok(())
    }

    /// Applies a `key = value` file. `#` starts a comment.
    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("{}:{}: expected 'key = value'", path.display(), i + 1))
            })?;
            self.set(key, value)
                .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), i + 1)))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler_config().validate()?;
        if self.batch_size < 2 || self.batch_size % 2 != 0 {
            return Err(Error::Config(format!(
                "batch_size must be even and ≥ 2, got {}",
                self.batch_size
            )));
        }
        if self.dim < 2 {
            return Err(Error::Config(format!("dim must be ≥ 2, got {}", self.dim)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        if self.max_distance == 0
            || self.pair_budget == 0
            || self.centrality_top == 0
            || self.loss_sample == 0
        {
            return Err(Error::Config(
                "max_distance, pair_budget, centrality_top and loss_sample must be positive".into(),
            ));
        }
        if self.hist_bins == Some(0) {
            return Err(Error::Config("hist_bins must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.k == 0 || self.path_len == Some(0) {
            return Err(Error::Config("k and path_len must be positive".into()));
        }
        self.loss_config().validate()?;
        AdamConfig {
            lr: self.lr,
            ..Default::default()
        }
        .validate()
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            restart_prob: self.restart_prob,
            max_triples: self.max_triples,
            neighbor_mode: self.sampler.neighbor_mode().unwrap_or(NeighborMode::InverseDegree),
            seed: self.seed,
        }
    }

    pub fn mcmc_config(&self) -> McmcConfig {
        McmcConfig {
            alpha: self.alpha,
            k: self.k,
            path_len: self.path_len.unwrap_or(self.batch_size / 2),
            burn_in: self.burn_in,
            seed: self.seed,
        }
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            margin: self.margin,
            use_hardness: !self.ablate.contains(&Ablation::Pcl),
            use_freq_weight: !self.ablate.contains(&Ablation::Fmt),
        }
    }

    pub fn batch_mode(&self) -> BatchMode {
        if self.ablate.contains(&Ablation::Saam) {
            BatchMode::Random
        } else {
            self.scheduler
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            dim: self.dim,
            batch_size: self.batch_size,
            mode: self.batch_mode(),
            epochs: self.epochs,
            seed: self.seed,
            loss: self.loss_config(),
            optimizer: AdamConfig {
                lr: self.lr,
                ..Default::default()
            },
            histogram_edges: self.hist_bins.map(crate::analysis::evenly_spaced_edges),
            snapshot_counters: self.snapshots,
        }
    }

    /// Parameters to start MCMC chains from: the checkpoint when given,
    /// else a seeded initialization.
    pub fn chain_params(&self, kg: &crate::kg::KnowledgeGraph) -> Result<EncoderParams> {
        match &self.checkpoint {
            Some(p) => EncoderParams::read_checkpoint(p),
            None => EncoderParams::init(
                kg,
                self.dim,
                &mut crate::rng::derive(self.seed, crate::rng::stream::INIT),
            ),
        }
    }

    /// Every key with its resolved value, in a fixed order; readable by
    /// [`RunConfig::load_file`].
    pub fn to_text(&self) -> String {
        let p = |o: &Option<PathBuf>| o.as_ref().map_or(String::new(), |p| p.display().to_string());
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("train", p(&self.train));
        kv("valid", p(&self.valid));
        kv("test", p(&self.test));
        kv("meta", p(&self.meta));
        kv("store", p(&self.store));
        kv("checkpoint", p(&self.checkpoint));
        kv("ranks", p(&self.ranks));
        kv("fps", p(&self.fps));
        kv("counters", p(&self.counters));
        kv("out", self.out.display().to_string());
        kv("sampler", self.sampler.to_string());
        kv("restart_prob", self.restart_prob.to_string());
        kv("max_triples", self.max_triples.to_string());
        kv("scheduler", self.scheduler.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("margin", self.margin.to_string());
        kv("alpha", self.alpha.to_string());
        kv("k", self.k.to_string());
        kv("path_len", self.path_len.map_or("auto".into(), |v| v.to_string()));
        kv("burn_in", self.burn_in.to_string());
        kv("lr", self.lr.to_string());
        kv("dim", self.dim.to_string());
        kv("epochs", self.epochs.to_string());
        kv("seed", self.seed.to_string());
        kv("workers", self.workers.map_or("auto".into(), |v| v.to_string()));
        let ab: Vec<&str> = self.ablate.iter().map(|a| a.name()).collect();
        kv("ablate", if ab.is_empty() { "none".into() } else { ab.join(",") });
        kv("filtered", self.filtered.to_string());
        kv("hist_bins", self.hist_bins.map_or("none".into(), |v| v.to_string()));
        kv("snapshots", self.snapshots.to_string());
        kv("max_distance", self.max_distance.to_string());
        kv("pair_budget", self.pair_budget.to_string());
        kv(
            "degree_averaging",
            match self.degree_averaging {
                DegreeAveraging::PerEntity => "entity",
                DegreeAveraging::PerDistinctDegree => "degree",
            }
            .into(),
        );
        kv("betweenness_cap", self.betweenness_cap.to_string());
        kv("centrality_top", self.centrality_top.to_string());
        kv("loss_sample", self.loss_sample.to_string());
        s
    }
}
