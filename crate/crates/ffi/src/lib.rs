//! C interface to the `satkgc` training engine.
//!
//! Graphs, subgraph stores and models are opaque handles created and
//! released through this interface. Every fallible call returns a
//! [`SatkgcStatus`]; on failure [`satkgc_last_error`] holds a message for the
//! calling thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use satkgc::encoder::EncoderParams;
use satkgc::eval::{evaluate, CosineScorer, EvalOptions, KnownTails};
use satkgc::kg::{ingest_triples, KnowledgeGraph};
use satkgc::sampler::{precompute_all, NeighborMode, SamplerConfig, SubgraphStore};
use satkgc::scheduler::BatchMode;
use satkgc::train::{train, TrainConfig};
use satkgc::Error;

/// Result of every fallible call. Codes 2 to 4 match the CLI exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SatkgcStatus {
    Ok = 0,
    /// Null pointer, non UTF-8 string or out-of-range enum value.
    InvalidArgument = 1,
    Config = 2,
    Data = 3,
    Numeric = 4,
    /// The library panicked; the handle arguments may be in any state.
    Internal = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SatkgcNeighborMode {
    /// BRWR
    InverseDegree = 0,
    /// RWR
    Uniform = 1,
    /// BRWR_P
    DegreeProportional = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SatkgcBatchMode {
    Saam = 0,
    Random = 1,
    Mixed = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SatkgcSamplerConfig {
    pub restart_prob: f64,
    pub max_triples: usize,
    /// A `SatkgcNeighborMode` value.
    pub neighbor_mode: u32,
    pub seed: u64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SatkgcTrainConfig {
    pub dim: usize,
    pub batch_size: usize,
    /// A `SatkgcBatchMode` value.
    pub mode: u32,
    pub epochs: usize,
    pub seed: u64,
    pub learning_rate: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct SatkgcMetrics {
    pub queries: usize,
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
}

pub struct SatkgcGraph(KnowledgeGraph);
pub struct SatkgcStore(SubgraphStore);
pub struct SatkgcModel(EncoderParams);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Fail {
    Arg(String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn status_of(e: &Error) -> SatkgcStatus {
    match e.exit_code() {
        2 => SatkgcStatus::Config,
        4 => SatkgcStatus::Numeric,
        _ => SatkgcStatus::Data,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SatkgcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SatkgcStatus::Ok,
        Ok(Err(Fail::Arg(msg))) => {
            set_error(msg);
            SatkgcStatus::InvalidArgument
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(format!("{}: {e}", e.kind()));
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            SatkgcStatus::Internal
        }
    }
}

unsafe fn path(p: *const c_char, what: &str) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(Fail::Arg(format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| Fail::Arg(format!("{what} is not UTF-8")))
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail::Arg(format!("{what} is null")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Arg("output pointer is null".into()));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn satkgc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn satkgc_sampler_config_default() -> SatkgcSamplerConfig {
    let d = SamplerConfig::default();
    SatkgcSamplerConfig {
        restart_prob: d.restart_prob,
        max_triples: d.max_triples,
        neighbor_mode: SatkgcNeighborMode::InverseDegree as u32,
        seed: d.seed,
    }
}

#[no_mangle]
pub extern "C" fn satkgc_train_config_default() -> SatkgcTrainConfig {
    let d = TrainConfig::default();
    SatkgcTrainConfig {
        dim: d.dim,
        batch_size: d.batch_size,
        mode: SatkgcBatchMode::Saam as u32,
        epochs: d.epochs,
        seed: d.seed,
        learning_rate: d.optimizer.lr,
    }
}

/// Loads a `head TAB relation TAB tail` file. `meta` may be null.
///
/// # Safety
/// `train` and `meta` must be null or NUL-terminated strings; `out` must be
/// null or writable.
#[no_mangle]
pub unsafe extern "C" fn satkgc_graph_load(
    train: *const c_char,
    meta: *const c_char,
    out: *mut *mut SatkgcGraph,
) -> SatkgcStatus {
    guard(|| {
        let t = path(train, "train path")?;
        let m = if meta.is_null() { None } else { Some(path(meta, "meta path")?) };
        put(out, SatkgcGraph(ingest_triples(&t, m.as_deref())?))
    })
}

/// # Safety
/// `g` must be null or a handle from `satkgc_graph_load` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn satkgc_graph_free(g: *mut SatkgcGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn satkgc_graph_num_entities(g: *const SatkgcGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.num_entities())
}

/// # Safety
/// `g` must be a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn satkgc_graph_num_triples(g: *const SatkgcGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.num_triples())
}

/// Samples one subgraph per training triple.
///
/// # Safety
/// `g` must be a live graph handle, `cfg` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn satkgc_store_build(
    g: *const SatkgcGraph,
    cfg: *const SatkgcSamplerConfig,
    out: *mut *mut SatkgcStore,
) -> SatkgcStatus {
    guard(|| {
        let g = get(g, "graph")?;
        let c = get(cfg, "sampler config")?;
        let sc = SamplerConfig {
            restart_prob: c.restart_prob,
            max_triples: c.max_triples,
            neighbor_mode: match c.neighbor_mode {
                0 => NeighborMode::InverseDegree,
                1 => NeighborMode::Uniform,
                2 => NeighborMode::DegreeProportional,
                x => return Err(Fail::Arg(format!("neighbor mode {x} out of range"))),
            },
            seed: c.seed,
        };
        put(out, SatkgcStore(precompute_all(&g.0, &sc)?))
    })
}

/// # Safety
/// `p` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn satkgc_store_read(p: *const c_char, out: *mut *mut SatkgcStore) -> SatkgcStatus {
    guard(|| {
        let p = path(p, "store path")?;
        put(out, SatkgcStore(SubgraphStore::read(&p)?))
    })
}

/// # Safety
/// `s` must be a live store handle and `p` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn satkgc_store_write(s: *const SatkgcStore, p: *const c_char) -> SatkgcStatus {
    guard(|| {
        let s = get(s, "store")?;
        Ok(s.0.write(&path(p, "store path")?)?)
    })
}

/// # Safety
/// `s` must be a live store handle.
#[no_mangle]
pub unsafe extern "C" fn satkgc_store_len(s: *const SatkgcStore) -> usize {
    s.as_ref().map_or(0, |s| s.0.len())
}

/// # Safety
/// `s` must be null or a store handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn satkgc_store_free(s: *mut SatkgcStore) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Trains a model. `store` may be null only for random batches.
///
/// # Safety
/// `g` must be a live graph handle, `store` null or a live store handle,
/// `cfg` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn satkgc_train(
    g: *const SatkgcGraph,
    store: *const SatkgcStore,
    cfg: *const SatkgcTrainConfig,
    out: *mut *mut SatkgcModel,
) -> SatkgcStatus {
    guard(|| {
        let g = get(g, "graph")?;
        let c = get(cfg, "train config")?;
        let store = store.as_ref().map(|s| &s.0);
        let mut tc = TrainConfig {
            dim: c.dim,
            batch_size: c.batch_size,
            mode: match c.mode {
                0 => BatchMode::Saam,
                1 => BatchMode::Random,
                2 => BatchMode::Mixed,
                x => return Err(Fail::Arg(format!("batch mode {x} out of range"))),
            },
            epochs: c.epochs,
            seed: c.seed,
            ..TrainConfig::default()
        };
        tc.optimizer.lr = c.learning_rate;
        put(out, SatkgcModel(train(&g.0, store, &tc)?.params))
    })
}

/// # Safety
/// `p` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn satkgc_model_read(p: *const c_char, out: *mut *mut SatkgcModel) -> SatkgcStatus {
    guard(|| {
        let p = path(p, "checkpoint path")?;
        put(out, SatkgcModel(EncoderParams::read_checkpoint(&p)?))
    })
}

/// # Safety
/// `m` must be a live model handle and `p` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn satkgc_model_write(m: *const SatkgcModel, p: *const c_char) -> SatkgcStatus {
    guard(|| {
        let m = get(m, "model")?;
        Ok(m.0.write_checkpoint(&path(p, "checkpoint path")?)?)
    })
}

/// # Safety
/// `m` must be null or a model handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn satkgc_model_free(m: *mut SatkgcModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Filtered link prediction on a test file, averaged over both directions.
///
/// # Safety
/// `g` and `m` must be live handles, `test` a NUL-terminated string and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn satkgc_evaluate(
    g: *const SatkgcGraph,
    m: *const SatkgcModel,
    test: *const c_char,
    out: *mut SatkgcMetrics,
) -> SatkgcStatus {
    guard(|| {
        let g = get(g, "graph")?;
        let m = get(m, "model")?;
        let out = out.as_mut().ok_or_else(|| Fail::Arg("output pointer is null".into()))?;
        if m.0.num_entities != g.0.num_entities() || m.0.num_relation_ids != g.0.num_relation_ids() {
            return Err(Error::Config("model shape does not match the graph".into()).into());
        }
        let split = g.0.resolve_split(&path(test, "test path")?)?;
        let mut known = KnownTails::from_graph(&g.0);
        known.extend(&split);
        let ev = evaluate(&CosineScorer::new(&m.0)?, &known, &split, &EvalOptions::default())?;
        let o = &ev.metrics.overall;
        *out = SatkgcMetrics {
            queries: o.queries,
            mrr: o.mrr,
            hits1: o.hits1,
            hits3: o.hits3,
            hits10: o.hits10,
        };
        Ok(())
    })
}
