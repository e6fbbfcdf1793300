//! C ABI over the hypergraph matching toolkit.
//!
//! Graphs are opaque handles created and destroyed here; results cross the
//! boundary as status codes plus out-parameters (flat index buffers or JSON
//! strings). Every allocation handed to the caller has a matching `_free`
//! function. Errors leave a message retrievable with
//! [`kpm_last_error_message`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Duration;

use libc::c_char;

use kpmatch::absorbing::{perfect_matching_via_absorption, AbsorbConfig};
use kpmatch::hypergraph::{Matching, PartiteHypergraph};
use kpmatch::io;
use kpmatch::matcher::{find_perfect_matching, max_matching, SearchStatus, SolverConfig};
use kpmatch::parity::{check_theorem_case, find_parity_certificate, TheoremCase};
use kpmatch::pipeline::{run_pipeline, PipelineConfig, PipelineError};

/// Opaque graph handle.
pub struct KpmGraph {
    inner: PartiteHypergraph,
}

#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum KpmStatus {
    Ok = 0,
    InvalidArgument = 1,
    ParseError = 2,
    /// The search completed and proved that no perfect matching exists.
    NoMatching = 3,
    Timeout = 4,
    /// A parity obstruction certifies non-matchability.
    Obstructed = 5,
    /// The requested procedure ran but did not produce a matching.
    Failure = 6,
}

#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum KpmTheoremCase {
    CaseI = 0,
    CaseII = 1,
    NoObstruction = 2,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(msg.replace('\0', " ")).unwrap();
    });
}

/// Message for the most recent error on this thread. Borrowed pointer: valid
/// until the next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn kpm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

fn guard(f: impl FnOnce() -> KpmStatus) -> KpmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "internal panic".into());
            set_error(msg);
            KpmStatus::Failure
        }
    }
}

unsafe fn write_handle(out: *mut *mut KpmGraph, g: PartiteHypergraph) -> KpmStatus {
    if out.is_null() {
        set_error("null output pointer");
        return KpmStatus::InvalidArgument;
    }
    *out = Box::into_raw(Box::new(KpmGraph { inner: g }));
    KpmStatus::Ok
}

/// Create an empty graph with `k` classes of `n` vertices.
///
/// # Safety
/// `out` must be a valid pointer to a `KpmGraph*` slot.
#[no_mangle]
pub unsafe extern "C" fn kpm_graph_new(k: usize, n: usize, out: *mut *mut KpmGraph) -> KpmStatus {
    guard(|| match PartiteHypergraph::new(k, n) {
        Ok(g) => write_handle(out, g),
        Err(e) => {
            set_error(e.to_string());
            KpmStatus::InvalidArgument
        }
    })
}

/// Create the complete graph (every legal tuple an edge).
///
/// # Safety
/// `out` must be a valid pointer to a `KpmGraph*` slot.
#[no_mangle]
pub unsafe extern "C" fn kpm_graph_complete(
    k: usize,
    n: usize,
    out: *mut *mut KpmGraph,
) -> KpmStatus {
    guard(|| match PartiteHypergraph::complete(k, n) {
        Ok(g) => write_handle(out, g),
        Err(e) => {
            set_error(e.to_string());
            KpmStatus::InvalidArgument
        }
    })
}

/// Create the parity template: edges are the legal tuples meeting the first
/// `d[c]` locals of each class an even number of times.
///
/// # Safety
/// `d` must point to `d_len` readable `size_t` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kpm_graph_template(
    k: usize,
    n: usize,
    d: *const usize,
    d_len: usize,
    out: *mut *mut KpmGraph,
) -> KpmStatus {
    guard(|| {
        if d.is_null() {
            set_error("null size vector");
            return KpmStatus::InvalidArgument;
        }
        let sizes = std::slice::from_raw_parts(d, d_len).to_vec();
        let params = match kpmatch::extremal::H0Params::new(k, n, sizes) {
            Ok(p) => p,
            Err(e) => {
                set_error(e.to_string());
                return KpmStatus::InvalidArgument;
            }
        };
        match kpmatch::extremal::build_h0(&params) {
            Ok(g) => write_handle(out, g),
            Err(e) => {
                set_error(e.to_string());
                KpmStatus::InvalidArgument
            }
        }
    })
}

/// Parse the text instance format (`k n` header, one edge per line).
///
/// # Safety
/// `text` must be a valid NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kpm_graph_parse(
    text: *const c_char,
    out: *mut *mut KpmGraph,
) -> KpmStatus {
    guard(|| {
        if text.is_null() {
            set_error("null text");
            return KpmStatus::InvalidArgument;
        }
        let text = match CStr::from_ptr(text).to_str() {
            Ok(t) => t,
            Err(_) => {
                set_error("text is not UTF-8");
                return KpmStatus::InvalidArgument;
            }
        };
        match io::parse_instance(text) {
            Ok(g) => write_handle(out, g),
            Err(e) => {
                set_error(e.to_string());
                KpmStatus::ParseError
            }
        }
    })
}

/// Read an instance file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kpm_graph_read_file(
    path: *const c_char,
    out: *mut *mut KpmGraph,
) -> KpmStatus {
    guard(|| {
        if path.is_null() {
            set_error("null path");
            return KpmStatus::InvalidArgument;
        }
        let path = match CStr::from_ptr(path).to_str() {
            Ok(p) => p,
            Err(_) => {
                set_error("path is not UTF-8");
                return KpmStatus::InvalidArgument;
            }
        };
        match io::read_instance(Path::new(path)) {
            Ok(g) => write_handle(out, g),
            Err(e) => {
                set_error(e.to_string());
                KpmStatus::ParseError
            }
        }
    })
}

/// Render the instance text format; free with `kpm_string_free`.
///
/// # Safety
/// `graph` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn kpm_graph_render(graph: *const KpmGraph) -> *mut c_char {
    let Some(g) = graph.as_ref() else {
        set_error("null graph");
        return std::ptr::null_mut();
    };
    CString::new(io::render_instance(&g.inner))
        .map(CString::into_raw)
        .unwrap_or(std::ptr::null_mut())
}

/// Destroy a graph handle.
///
/// # Safety
/// `graph` must be a handle from this library, not yet freed; NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn kpm_graph_free(graph: *mut KpmGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Free a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed; NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn kpm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Free an index buffer returned by this library.
///
/// # Safety
/// `ptr`/`len` must describe a buffer returned by this library, unfreed.
#[no_mangle]
pub unsafe extern "C" fn kpm_buffer_free(ptr: *mut usize, len: usize) {
    if !ptr.is_null() {
        drop(Vec::from_raw_parts(ptr, len, len));
    }
}

/// # Safety
/// `graph` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn kpm_graph_k(graph: *const KpmGraph) -> usize {
    graph.as_ref().map(|g| g.inner.k()).unwrap_or(0)
}

/// # Safety
/// `graph` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn kpm_graph_n(graph: *const KpmGraph) -> usize {
    graph.as_ref().map(|g| g.inner.n()).unwrap_or(0)
}

/// # Safety
/// `graph` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn kpm_graph_edge_count(graph: *const KpmGraph) -> usize {
    graph.as_ref().map(|g| g.inner.edge_count()).unwrap_or(0)
}

/// Insert one edge given as `k` local indices in class order.
///
/// # Safety
/// `graph` must be live and mutable (no concurrent readers); `tuple` must
/// point to `len` readable values.
#[no_mangle]
pub unsafe extern "C" fn kpm_graph_add_edge(
    graph: *mut KpmGraph,
    tuple: *const usize,
    len: usize,
) -> KpmStatus {
    guard(|| {
        let Some(g) = graph.as_mut() else {
            set_error("null graph");
            return KpmStatus::InvalidArgument;
        };
        if tuple.is_null() {
            set_error("null tuple");
            return KpmStatus::InvalidArgument;
        }
        let edge = std::slice::from_raw_parts(tuple, len);
        match g.inner.add_edge(edge) {
            Ok(_) => KpmStatus::Ok,
            Err(e) => {
                set_error(e.to_string());
                KpmStatus::InvalidArgument
            }
        }
    })
}

/// # Safety
/// `graph` must be live; `tuple` must point to `len` readable values;
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kpm_graph_has_edge(
    graph: *const KpmGraph,
    tuple: *const usize,
    len: usize,
    out: *mut bool,
) -> KpmStatus {
    guard(|| {
        let (Some(g), false, false) = (graph.as_ref(), tuple.is_null(), out.is_null()) else {
            set_error("null argument");
            return KpmStatus::InvalidArgument;
        };
        let edge = std::slice::from_raw_parts(tuple, len);
        if len != g.inner.k()
            || edge
                .iter()
                .enumerate()
                .any(|(c, &l)| !g.inner.is_alive(kpmatch::hypergraph::Vertex::new(c, l)))
        {
            set_error("tuple out of range");
            return KpmStatus::InvalidArgument;
        }
        *out = g.inner.has_edge(edge);
        KpmStatus::Ok
    })
}

/// Minimum degree over legal (k-1)-sets.
///
/// # Safety
/// `graph` must be live; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kpm_min_codegree(graph: *const KpmGraph, out: *mut usize) -> KpmStatus {
    guard(|| {
        let (Some(g), false) = (graph.as_ref(), out.is_null()) else {
            set_error("null argument");
            return KpmStatus::InvalidArgument;
        };
        *out = g.inner.min_codegree();
        KpmStatus::Ok
    })
}

unsafe fn export_matching(
    m: &Matching,
    k: usize,
    out_edges: *mut *mut usize,
    out_size: *mut usize,
) -> KpmStatus {
    if out_edges.is_null() || out_size.is_null() {
        set_error("null output pointer");
        return KpmStatus::InvalidArgument;
    }
    let mut flat: Vec<usize> = Vec::with_capacity(m.len() * k);
    for e in m.edges() {
        flat.extend_from_slice(e);
    }
    // hand exactly len == capacity to the caller so the free side can
    // reconstruct the Vec
    flat.shrink_to_fit();
    *out_size = m.len();
    let mut flat = std::mem::ManuallyDrop::new(flat);
    *out_edges = flat.as_mut_ptr();
    KpmStatus::Ok
}

/// Complete search for a perfect matching. On `Ok`, `*out_edges` holds
/// `*out_size * k` locals (row-major, class order); free with
/// `kpm_buffer_free(ptr, size * k)`. Returns `NoMatching` when the search
/// proves none exists, `Timeout` otherwise.
///
/// # Safety
/// `graph` must be live; `out_edges` and `out_size` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kpm_find_perfect_matching(
    graph: *const KpmGraph,
    timeout_secs: u64,
    use_memo: bool,
    out_edges: *mut *mut usize,
    out_size: *mut usize,
) -> KpmStatus {
    guard(|| {
        let Some(g) = graph.as_ref() else {
            set_error("null graph");
            return KpmStatus::InvalidArgument;
        };
        let cfg = SolverConfig {
            timeout: Duration::from_secs(timeout_secs),
            use_memo,
        };
        match find_perfect_matching(&g.inner, &cfg).status {
            SearchStatus::Complete(Some(m)) => {
                export_matching(&m, g.inner.k(), out_edges, out_size)
            }
            SearchStatus::Complete(None) => KpmStatus::NoMatching,
            SearchStatus::Timeout => {
                set_error("search timed out");
                KpmStatus::Timeout
            }
        }
    })
}

/// Exact maximum matching; same buffer contract as
/// `kpm_find_perfect_matching`.
///
/// # Safety
/// `graph` must be live; `out_edges` and `out_size` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kpm_max_matching(
    graph: *const KpmGraph,
    timeout_secs: u64,
    out_edges: *mut *mut usize,
    out_size: *mut usize,
) -> KpmStatus {
    guard(|| {
        let Some(g) = graph.as_ref() else {
            set_error("null graph");
            return KpmStatus::InvalidArgument;
        };
        let cfg = SolverConfig {
            timeout: Duration::from_secs(timeout_secs),
            use_memo: false,
        };
        match max_matching(&g.inner, &cfg).status {
            SearchStatus::Complete((_, m)) => export_matching(&m, g.inner.k(), out_edges, out_size),
            SearchStatus::Timeout => {
                set_error("search timed out");
                KpmStatus::Timeout
            }
        }
    })
}

/// Parity certificate as JSON (`{"sets": ..., "sizes": ...}`), or NULL when
/// no certificate exists. Free with `kpm_string_free`.
///
/// # Safety
/// `graph` must be live.
#[no_mangle]
pub unsafe extern "C" fn kpm_parity_certificate_json(graph: *const KpmGraph) -> *mut c_char {
    let Some(g) = graph.as_ref() else {
        set_error("null graph");
        return std::ptr::null_mut();
    };
    match find_parity_certificate(&g.inner) {
        Some(cert) => CString::new(serde_json::to_string(&cert).unwrap())
            .map(CString::into_raw)
            .unwrap_or(std::ptr::null_mut()),
        None => std::ptr::null_mut(),
    }
}

/// Classify against the two non-matchable template shapes.
///
/// # Safety
/// `graph` must be live; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kpm_theorem_case(
    graph: *const KpmGraph,
    out: *mut KpmTheoremCase,
) -> KpmStatus {
    guard(|| {
        let (Some(g), false) = (graph.as_ref(), out.is_null()) else {
            set_error("null argument");
            return KpmStatus::InvalidArgument;
        };
        match check_theorem_case(&g.inner, kpmatch::parity::DEFAULT_NULLSPACE_CAP) {
            Ok(r) => {
                *out = match r.case {
                    TheoremCase::CaseI => KpmTheoremCase::CaseI,
                    TheoremCase::CaseII => KpmTheoremCase::CaseII,
                    TheoremCase::NoObstruction => KpmTheoremCase::NoObstruction,
                };
                KpmStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                KpmStatus::Failure
            }
        }
    })
}

/// Run the staged template matcher; `*out_report` receives the JSON report
/// (free with `kpm_string_free`). Returns `Ok` when a verified matching was
/// found, `Obstructed` for a parity obstruction (the report is then the
/// certificate), `Failure` when a stage failed (the report names it).
///
/// # Safety
/// `graph` must be live; `out_report` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kpm_pipeline_json(
    graph: *const KpmGraph,
    alpha: f64,
    epsilon: f64,
    seed: u64,
    out_report: *mut *mut c_char,
) -> KpmStatus {
    guard(|| {
        let (Some(g), false) = (graph.as_ref(), out_report.is_null()) else {
            set_error("null argument");
            return KpmStatus::InvalidArgument;
        };
        let cfg = PipelineConfig {
            alpha,
            epsilon,
            seed,
            ..Default::default()
        };
        match run_pipeline(&g.inner, &cfg) {
            Ok(report) => {
                let ok = report.succeeded();
                let json = serde_json::to_string(&report).unwrap();
                *out_report = CString::new(json).unwrap().into_raw();
                if ok {
                    KpmStatus::Ok
                } else {
                    KpmStatus::Failure
                }
            }
            Err(PipelineError::Obstruction(cert)) => {
                let json = serde_json::to_string(&cert).unwrap();
                *out_report = CString::new(json).unwrap().into_raw();
                KpmStatus::Obstructed
            }
            Err(e) => {
                set_error(e.to_string());
                *out_report = std::ptr::null_mut();
                KpmStatus::InvalidArgument
            }
        }
    })
}

/// Run the absorbing-family matcher; `*out_report` receives the JSON report
/// (free with `kpm_string_free`).
///
/// # Safety
/// `graph` must be live; `out_report` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kpm_absorb_json(
    graph: *const KpmGraph,
    seed: u64,
    max_samples: usize,
    out_report: *mut *mut c_char,
) -> KpmStatus {
    guard(|| {
        let (Some(g), false) = (graph.as_ref(), out_report.is_null()) else {
            set_error("null argument");
            return KpmStatus::InvalidArgument;
        };
        let cfg = AbsorbConfig {
            seed,
            max_samples,
            ..Default::default()
        };
        let report = perfect_matching_via_absorption(&g.inner, &cfg);
        let ok = report.succeeded();
        *out_report = CString::new(serde_json::to_string(&report).unwrap())
            .unwrap()
            .into_raw();
        if ok {
            KpmStatus::Ok
        } else {
            KpmStatus::Failure
        }
    })
}
