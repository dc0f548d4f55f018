//! Command-line front end: ingest → sample → train → eval → analyze.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{self, StructReport, Table};
use crate::config::RunConfig;
use crate::encoder::EncoderParams;
use crate::error::{Error, Result};
use crate::eval::{self, CosineScorer, EvalOptions, KnownTails};
use crate::kg::{self, KnowledgeGraph, TripleId};
use crate::mcmc::precompute_all_mcmc;
use crate::rng;
use crate::sampler::{precompute_all, SamplerKind, SubgraphStore};
use crate::scheduler::{read_counts, BatchMode};
use crate::synth;
use crate::train;

#[derive(Parser, Debug)]
#[command(name = "satkgc", version, about = "Subgraph-aware contrastive training for knowledge graph completion")]
struct Cli {
    /// Flat `key = value` configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    opts: Overrides,

    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long, global = true)]
    train: Option<String>,
    #[arg(long, global = true)]
    valid: Option<String>,
    #[arg(long, global = true)]
    test: Option<String>,
    /// Entity metadata file: name<TAB>label<TAB>description.
    #[arg(long, global = true)]
    meta: Option<String>,
    #[arg(long, global = true)]
    store: Option<String>,
    #[arg(long, global = true)]
    checkpoint: Option<String>,
    #[arg(long, global = true)]
    ranks: Option<String>,
    #[arg(long, global = true)]
    fps: Option<String>,
    #[arg(long, global = true)]
    counters: Option<String>,
    #[arg(long, global = true)]
    out: Option<String>,
    /// brwr, rwr, brwr_p or mcmc.
    #[arg(long, global = true)]
    sampler: Option<String>,
    #[arg(long, global = true)]
    restart_prob: Option<String>,
    #[arg(long, global = true)]
    max_triples: Option<String>,
    /// saam, random or mixed.
    #[arg(long, global = true)]
    scheduler: Option<String>,
    #[arg(long, global = true)]
    batch_size: Option<String>,
    #[arg(long, global = true)]
    margin: Option<String>,
    #[arg(long, global = true)]
    alpha: Option<String>,
    #[arg(long, global = true)]
    k: Option<String>,
    #[arg(long, global = true)]
    path_len: Option<String>,
    #[arg(long, global = true)]
    burn_in: Option<String>,
    #[arg(long, global = true)]
    lr: Option<String>,
    #[arg(long, global = true)]
    dim: Option<String>,
    #[arg(long, global = true)]
    epochs: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    workers: Option<String>,
    /// Comma-separated subset of pcl, fmt, saam.
    #[arg(long, global = true)]
    ablate: Option<String>,
    /// Rank against every entity instead of the filtered candidate set.
    #[arg(long, global = true)]
    unfiltered: bool,
    #[arg(long, global = true)]
    hist_bins: Option<String>,
    /// Keep visit counters after every epoch.
    #[arg(long, global = true)]
    snapshots: bool,
    #[arg(long, global = true)]
    max_distance: Option<String>,
    #[arg(long, global = true)]
    pair_budget: Option<String>,
    /// entity or degree.
    #[arg(long, global = true)]
    degree_averaging: Option<String>,
    #[arg(long, global = true)]
    betweenness_cap: Option<String>,
    #[arg(long, global = true)]
    centrality_top: Option<String>,
    #[arg(long, global = true)]
    loss_sample: Option<String>,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        let pairs: [(&str, &Option<String>); 33] = [
            ("train", &self.train),
            ("valid", &self.valid),
            ("test", &self.test),
            ("meta", &self.meta),
            ("store", &self.store),
            ("checkpoint", &self.checkpoint),
            ("ranks", &self.ranks),
            ("fps", &self.fps),
            ("counters", &self.counters),
            ("out", &self.out),
            ("sampler", &self.sampler),
            ("restart_prob", &self.restart_prob),
            ("max_triples", &self.max_triples),
            ("scheduler", &self.scheduler),
            ("batch_size", &self.batch_size),
            ("margin", &self.margin),
            ("alpha", &self.alpha),
            ("k", &self.k),
            ("path_len", &self.path_len),
            ("burn_in", &self.burn_in),
            ("lr", &self.lr),
            ("dim", &self.dim),
            ("epochs", &self.epochs),
            ("seed", &self.seed),
            ("workers", &self.workers),
            ("ablate", &self.ablate),
            ("hist_bins", &self.hist_bins),
            ("max_distance", &self.max_distance),
            ("pair_budget", &self.pair_budget),
            ("degree_averaging", &self.degree_averaging),
            ("betweenness_cap", &self.betweenness_cap),
            ("centrality_top", &self.centrality_top),
            ("loss_sample", &self.loss_sample),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        if self.unfiltered {
            cfg.filtered = false;
        }
        if self.snapshots {
            cfg.snapshots = true;
        }
        Ok(())
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a triple file and write the graph index.
    Ingest,
    /// Precompute one subgraph per training triple.
    Sample,
    /// Train the encoder and write a checkpoint and log.
    Train,
    /// Rank test triples and write metrics and a rank dump.
    Eval,
    /// Structural diagnostics from rank dumps, counters and checkpoints.
    Analyze,
    /// Write a seeded synthetic graph.
    Generate(GenerateArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum GraphKind {
    Clustered,
    Pa,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "clustered")]
    kind: GraphKind,
    #[arg(long, default_value_t = 4)]
    clusters: usize,
    #[arg(long, default_value_t = 50)]
    per_cluster: usize,
    #[arg(long, default_value_t = 5)]
    relations_per_cluster: usize,
    #[arg(long, default_value_t = 2000)]
    triples: usize,
    #[arg(long, default_value_t = 200)]
    test_triples: usize,
    #[arg(long, default_value_t = 0.1)]
    cross: f64,
    #[arg(long, default_value_t = 5)]
    bridges: usize,
    #[arg(long, default_value_t = 500)]
    nodes: usize,
    #[arg(long, default_value_t = 4)]
    m: usize,
    #[arg(long, default_value_t = 10)]
    relations: usize,
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Ingest => "ingest",
        Command::Sample => "sample",
        Command::Train => "train",
        Command::Eval => "eval",
        Command::Analyze => "analyze",
        Command::Generate(_) => "generate",
    }
}

/// Parses arguments, runs the command and returns the process exit code.
/// Failures print one `error kind=... msg=...` line on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("bad arguments");
            eprintln!("error kind=config msg={}", first.trim_start_matches("error: ").trim());
            return 2;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error kind={} msg={}", e.kind(), e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        if !path.exists() {
            return Err(Error::Config(format!("config file {} not found", path.display())));
        }
        cfg.load_file(path)?;
    }
    cli.opts.apply(&mut cfg)?;
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = resolve(cli)?;
    if let Some(n) = cfg.workers {
        // a pool may already exist when called in-process more than once
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::debug!("global thread pool already initialized");
        }
    }
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let name = command_name(&cli.cmd);
    write_file(&cfg.out.join(format!("{name}.conf")), &cfg.to_text())?;
    match &cli.cmd {
        Command::Ingest => ingest(&cfg),
        Command::Sample => sample(&cfg),
        Command::Train => train_cmd(&cfg),
        Command::Eval => eval_cmd(&cfg),
        Command::Analyze => analyze(&cfg),
        Command::Generate(g) => generate(&cfg, g),
    }
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("missing required setting '{key}'")))
}

fn load_graph(cfg: &RunConfig) -> Result<KnowledgeGraph> {
    kg::ingest_triples(required(&cfg.train, "train")?, cfg.meta.as_deref())
}

fn load_checkpoint(cfg: &RunConfig, kg: &KnowledgeGraph) -> Result<EncoderParams> {
    let p = EncoderParams::read_checkpoint(required(&cfg.checkpoint, "checkpoint")?)?;
    if p.num_entities != kg.num_entities() || p.num_relation_ids != kg.num_relation_ids() {
        return Err(Error::Config(format!(
            "checkpoint shape ({} entities, {} relation ids) does not match the graph ({}, {})",
            p.num_entities,
            p.num_relation_ids,
            kg.num_entities(),
            kg.num_relation_ids()
        )));
    }
    Ok(p)
}

fn ingest(cfg: &RunConfig) -> Result<()> {
    let kg = load_graph(cfg)?;
    for split in [&cfg.valid, &cfg.test].into_iter().flatten() {
        kg.resolve_split(split)?;
    }
    kg.write_index(&cfg.out)?;
    println!(
        "entities {} relations {} triples {} average degree {:.3}",
        kg.num_entities(),
        kg.num_relations(),
        kg.num_triples(),
        kg.average_degree()
    );
    Ok(())
}

fn build_store(cfg: &RunConfig, kg: &KnowledgeGraph) -> Result<SubgraphStore> {
    match cfg.sampler {
        SamplerKind::Mcmc => precompute_all_mcmc(kg, &cfg.chain_params(kg)?, &cfg.mcmc_config()),
        _ => precompute_all(kg, &cfg.sampler_config()),
    }
}

fn sample(cfg: &RunConfig) -> Result<()> {
    let kg = load_graph(cfg)?;
    let store = build_store(cfg, &kg)?;
    let path = cfg.out.join("subgraphs.store");
    store.write(&path)?;
    let sizes: usize = store.subgraphs.iter().map(|s| s.triples.len()).sum();
    println!(
        "{} subgraphs ({}) mean size {:.1} -> {}",
        store.len(),
        store.sampler,
        sizes as f64 / store.len().max(1) as f64,
        path.display()
    );
    Ok(())
}

fn train_cmd(cfg: &RunConfig) -> Result<()> {
    let kg = load_graph(cfg)?;
    let tc = cfg.train_config();
    let store = if tc.mode == BatchMode::Random {
        None
    } else {
        Some(match &cfg.store {
            Some(p) => SubgraphStore::read(p)?,
            None => build_store(cfg, &kg)?,
        })
    };
    let out = train::train(&kg, store.as_ref(), &tc)?;
    out.params.write_checkpoint(&cfg.out.join("model.satk"))?;
    train::write_log(&out.log, &cfg.out.join("train_log.csv"))?;
    out.counter.write_snapshot(&cfg.out.join("triple_visits.tsv"))?;
    out.counter.write_selection(&cfg.out.join("center_visits.tsv"))?;
    for (e, snap) in out.snapshots.iter().enumerate() {
        snap.write_snapshot(&cfg.out.join(format!("triple_visits_epoch{}.tsv", e + 1)))?;
    }
    if let Some(edges) = &tc.histogram_edges {
        let report = StructReport {
            tables: out
                .histograms
                .iter()
                .enumerate()
                .map(|(e, h)| analysis::histogram_table(&format!("negative_hist_epoch{}", e + 1), edges, h))
                .collect(),
        };
        report.write(&cfg.out)?;
    }
    println!(
        "{} iterations, loss {:.6} -> {:.6}, beta {:.4}, tau {:.4}",
        out.log.len(),
        out.epoch_losses.first().copied().unwrap_or(f64::NAN),
        out.epoch_losses.last().copied().unwrap_or(f64::NAN),
        out.params.beta,
        out.params.temperature()
    );
    Ok(())
}

fn eval_cmd(cfg: &RunConfig) -> Result<()> {
    let kg = load_graph(cfg)?;
    let params = load_checkpoint(cfg, &kg)?;
    let test = kg.resolve_split(required(&cfg.test, "test")?)?;
    let mut known = KnownTails::from_graph(&kg);
    if let Some(v) = &cfg.valid {
        known.extend(&kg.resolve_split(v)?);
    }
    known.extend(&test);
    let scorer = CosineScorer::new(&params)?;
    let opts = EvalOptions {
        filtered: cfg.filtered,
        collect_fps: true,
    };
    let ev = eval::evaluate(&scorer, &known, &test, &opts)?;
    eval::write_metrics(&ev.metrics, &cfg.out.join("metrics.csv"), &cfg.out.join("metrics.txt"))?;
    eval::write_rank_dump(&kg, &ev.records, &cfg.out.join("ranks.csv"))?;
    eval::write_fp_lists(&kg, &ev.records, &cfg.out.join("fps.txt"))?;
    print!("{}", ev.metrics.to_table());
    Ok(())
}

fn analyze(cfg: &RunConfig) -> Result<()> {
    let kg = load_graph(cfg)?;
    let mut report = StructReport::default();
    let records = match &cfg.ranks {
        Some(p) => Some(eval::read_rank_dump(&kg, p, cfg.fps.as_deref())?),
        None => None,
    };
    if let Some(recs) = &records {
        report.tables.push(analysis::distance_table(
            "fp_ratio_by_distance",
            &analysis::fp_ratio_by_distance(&kg, recs)?,
        ));
        match analysis::fp_ratio_by_degree_group(&kg, recs, cfg.degree_averaging) {
            Ok(rows) => report
                .tables
                .push(Table::new("fp_ratio_by_degree_group", "degree_group", "ratio", rows)),
            Err(e) => log::warn!("degree groups skipped: {e}"),
        }
        let rt = analysis::relation_type_breakdown(&kg, recs)?;
        report.tables.push(Table::new(
            "relation_type_share",
            "type",
            "share",
            rt.iter().map(|(t, s, _)| (t.to_string(), *s)).collect(),
        ));
        report.tables.push(Table::new(
            "relation_type_hits1",
            "type",
            "hits1",
            rt.iter().map(|(t, _, h)| (t.to_string(), *h)).collect(),
        ));
    }
    if let Some(p) = &cfg.counters {
        let counts = read_counts(p, kg.num_triples())?;
        report.tables.extend(analysis::distribution_reports(&kg, &counts)?.tables);
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by_key(|&i| (std::cmp::Reverse(counts[i]), i));
        let top = cfg.centrality_top.min(order.len());
        let most: Vec<TripleId> = order[..top].iter().map(|&i| TripleId(i as u32)).collect();
        let least: Vec<TripleId> = order[order.len() - top..].iter().map(|&i| TripleId(i as u32)).collect();
        match analysis::centrality_stats(&kg, &[most, least], cfg.betweenness_cap) {
            Ok(stats) => {
                report.tables.push(Table::new(
                    "centrality",
                    "set",
                    "value",
                    vec![
                        ("most_visited_degree".into(), stats[0].0),
                        ("most_visited_betweenness".into(), stats[0].1),
                        ("least_visited_degree".into(), stats[1].0),
                        ("least_visited_betweenness".into(), stats[1].1),
                    ],
                ));
            }
            Err(e) => log::warn!("centrality skipped: {e}"),
        }
    }
    if cfg.checkpoint.is_some() {
        let params = load_checkpoint(cfg, &kg)?;
        let mut r = rng::derive(cfg.seed, rng::stream::ANALYSIS);
        let ds = analysis::distance_similarity_table(&params, &kg, cfg.max_distance, cfg.pair_budget, &mut r)?;
        report.tables.push(Table::new(
            "distance_similarity",
            "distance",
            "mean_cosine",
            ds.iter()
                .filter_map(|(d, v)| v.map(|v| (d.to_string(), v)))
                .collect(),
        ));
        if let Some(recs) = &records {
            let fps = analysis::fp_triples(recs);
            if fps.is_empty() {
                log::warn!("no false positives in the dump; loss comparison skipped");
            } else {
                let subsample = |v: Vec<kg::Triple>, r: &mut rng::Rng| -> Vec<kg::Triple> {
                    if v.len() <= cfg.loss_sample {
                        return v;
                    }
                    let mut idx = rand::seq::index::sample(r, v.len(), cfg.loss_sample).into_vec();
                    idx.sort_unstable();
                    idx.into_iter().map(|i| v[i]).collect()
                };
                let all = subsample(kg.triples().to_vec(), &mut r);
                let fps = subsample(fps, &mut r);
                let half = (cfg.batch_size / 2).min(kg.num_triples());
                let cmp = analysis::fp_loss_comparison(
                    &params,
                    &kg,
                    &[all, fps],
                    half * 2,
                    &cfg.loss_config(),
                    cfg.seed,
                )?;
                report.tables.push(Table::new(
                    "fp_loss",
                    "set",
                    "mean_loss",
                    vec![
                        ("total_weighted".into(), cmp[0].0),
                        ("total_plain".into(), cmp[0].1),
                        ("fp_weighted".into(), cmp[1].0),
                        ("fp_plain".into(), cmp[1].1),
                    ],
                ));
            }
        }
    }
    if report.tables.is_empty() {
        return Err(Error::Config("nothing to analyze: pass ranks, counters or checkpoint".into()));
    }
    report.write(&cfg.out)?;
    for t in &report.tables {
        println!("{}.csv ({} rows)", t.name, t.rows.len());
    }
    Ok(())
}

fn generate(cfg: &RunConfig, g: &GenerateArgs) -> Result<()> {
    let write_split = |kg: &KnowledgeGraph, test: &[kg::LabeledTriple], path: &Path| -> Result<()> {
        let mut s = String::new();
        for t in test {
            s.push_str(&format!(
                "{}\t{}\t{}\n",
                kg.entity_name(t.head),
                kg.relation_name(t.rel),
                kg.entity_name(t.tail)
            ));
        }
        write_file(path, &s)
    };
    match g.kind {
        GraphKind::Clustered => {
            let s = synth::clustered(&synth::ClusteredSpec {
                clusters: g.clusters,
                per_cluster: g.per_cluster,
                relations_per_cluster: g.relations_per_cluster,
                train: g.triples,
                test: g.test_triples,
                cross_fraction: g.cross,
                bridges: g.bridges,
                seed: cfg.seed,
            })?;
            s.kg.write_triples(&cfg.out.join("train.tsv"))?;
            write_split(&s.kg, &s.test, &cfg.out.join("test.tsv"))?;
        }
        GraphKind::Pa => {
            let kg = synth::preferential_attachment(g.nodes, g.m, g.relations, cfg.seed)?;
            kg.write_triples(&cfg.out.join("train.tsv"))?;
        }
    }
    println!("wrote {}", cfg.out.display());
    Ok(())
}
