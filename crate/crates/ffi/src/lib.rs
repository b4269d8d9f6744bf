//! C ABI over the stocknet core.
//!
//! Every function returns an [`SnStatus`]; on failure the message is kept per
//! thread and read with [`sn_last_error`]. Networks are opaque handles that
//! the caller releases with [`sn_network_free`]. Missing observations in
//! series passed to [`sn_granger_test`] are NaN.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use chrono::NaiveDate;
use stocknet::causality::{ty_granger, GrangerConfig, LagCriterion, OutcomeStatus, SkipReason};
use stocknet::ingest::{aggregate_by_manager, parse_holdings, HoldingsSchema};
use stocknet::network::{build_bipartite, filter_edges, load_network, project, save_network, StockNetwork};
use stocknet::timeseries::ChangeSeries;
use stocknet::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Checksum = 5,
    Degenerate = 6,
    EmptyInput = 7,
    Internal = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnSkipReason {
    None = 0,
    InsufficientData = 1,
    DegenerateSeries = 2,
    SingularFit = 3,
    MissingSeries = 4,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnLagCriterion {
    Aic = 0,
    Bic = 1,
}

/// Opaque directed stock network.
pub struct SnNetwork {
    inner: StockNetwork,
}

/// Topology summary. Undefined assortativity is NaN.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct SnNetworkStats {
    pub density: f64,
    pub node_count: usize,
    pub edge_count: usize,
    pub avg_degree: f64,
    pub in_assortativity: f64,
    pub out_assortativity: f64,
    pub weight_mean: f64,
    pub weight_std: f64,
    pub weight_sum: f64,
    pub scc_count: usize,
    pub wcc_count: usize,
    pub largest_scc: usize,
    pub largest_wcc: usize,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SnGrangerConfig {
    pub alpha: f64,
    pub max_lag: usize,
    pub lag_criterion: SnLagCriterion,
    pub d_max: usize,
    pub min_valid_points: usize,
    pub min_variance: f64,
}

/// Result of one directed test. Numeric fields are NaN or 0 when skipped.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SnGrangerResult {
    pub tested: bool,
    pub skip_reason: SnSkipReason,
    pub p_value: f64,
    pub wald_stat: f64,
    pub lag: usize,
    pub reject: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SnStatus {
    match e {
        Error::Io { .. } => SnStatus::Io,
        Error::Csv(_) | Error::Json(_) | Error::MissingColumn { .. } | Error::Format { .. } => SnStatus::Format,
        Error::Checksum { .. } => SnStatus::Checksum,
        Error::Degenerate(_) => SnStatus::Degenerate,
        Error::EmptyInput(_) => SnStatus::EmptyInput,
        Error::InvalidArgument(_) | Error::Config(_) | Error::UnknownInstitution(_) => SnStatus::InvalidArgument,
        Error::Stage { .. } => SnStatus::Internal,
    }
}

fn fail(status: SnStatus, msg: &str) -> SnStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> Result<(), SnStatus>) -> SnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SnStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => fail(SnStatus::Panic, "internal panic"),
    }
}

fn lift<T>(r: stocknet::Result<T>) -> Result<T, SnStatus> {
    r.map_err(|e| fail(status_of(&e), &e.to_string()))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, SnStatus> {
    if p.is_null() {
        return Err(fail(SnStatus::NullPointer, &format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SnStatus::InvalidArgument, &format!("{what} is not UTF-8")))
}

unsafe fn net_arg<'a>(p: *const SnNetwork) -> Result<&'a StockNetwork, SnStatus> {
    p.as_ref()
        .map(|n| &n.inner)
        .ok_or_else(|| fail(SnStatus::NullPointer, "network handle is null"))
}

unsafe fn out_arg<'a, T>(p: *mut T) -> Result<&'a mut T, SnStatus> {
    p.as_mut().ok_or_else(|| fail(SnStatus::NullPointer, "output pointer is null"))
}

fn into_handle(net: StockNetwork) -> *mut SnNetwork {
    Box::into_raw(Box::new(SnNetwork { inner: net }))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn sn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sn_network_load(path: *const c_char, out: *mut *mut SnNetwork) -> SnStatus {
    guard(|| {
        let out = out_arg(out)?;
        *out = ptr::null_mut();
        let path = PathBuf::from(str_arg(path, "path")?);
        *out = into_handle(lift(load_network(&path))?);
        Ok(())
    })
}

/// Builds the filtered network from a holdings CSV on `date` (YYYY-MM-DD).
///
/// # Safety
/// `path` and `date` must be NUL-terminated strings and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sn_network_from_holdings(
    path: *const c_char,
    date: *const c_char,
    k: f64,
    out: *mut *mut SnNetwork,
) -> SnStatus {
    guard(|| {
        let out = out_arg(out)?;
        *out = ptr::null_mut();
        let path = PathBuf::from(str_arg(path, "path")?);
        let date: NaiveDate = str_arg(date, "date")?
            .parse()
            .map_err(|_| fail(SnStatus::InvalidArgument, "date is not YYYY-MM-DD"))?;
        let parsed = lift(parse_holdings(&path, &HoldingsSchema::default()))?;
        let on_date: Vec<_> = parsed.records.into_iter().filter(|r| r.as_of_date == date).collect();
        if on_date.is_empty() {
            return Err(fail(SnStatus::EmptyInput, &format!("no holdings dated {date}")));
        }
        let b = lift(build_bipartite(&aggregate_by_manager(&on_date)))?;
        *out = into_handle(lift(filter_edges(&project(&b), k))?);
        Ok(())
    })
}

/// # Safety
/// `net` must come from this library and not be used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn sn_network_free(net: *mut SnNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// # Safety
/// `net` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sn_network_node_count(net: *const SnNetwork, out: *mut usize) -> SnStatus {
    guard(|| {
        *out_arg(out)? = net_arg(net)?.node_count();
        Ok(())
    })
}

/// # Safety
/// `net` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sn_network_edge_count(net: *const SnNetwork, out: *mut usize) -> SnStatus {
    guard(|| {
        *out_arg(out)? = net_arg(net)?.edge_count();
        Ok(())
    })
}

/// Endpoints (node indices) and weight in cents of edge `index`.
///
/// # Safety
/// `net` must be a live handle; output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sn_network_edge(
    net: *const SnNetwork,
    index: usize,
    source: *mut usize,
    target: *mut usize,
    weight_cents: *mut u64,
) -> SnStatus {
    guard(|| {
        let e = *net_arg(net)?
            .edges()
            .get(index)
            .ok_or_else(|| fail(SnStatus::InvalidArgument, "edge index out of range"))?;
        *out_arg(source)? = e.source as usize;
        *out_arg(target)? = e.target as usize;
        *out_arg(weight_cents)? = e.weight.0;
        Ok(())
    })
}

/// Copies the id of node `index` into `buf` (NUL-terminated). `needed`
/// receives the buffer size required including the terminator.
///
/// # Safety
/// `net` must be a live handle, `buf` valid for `len` bytes (may be null
/// when `len` is 0) and `needed` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sn_network_node_id(
    net: *const SnNetwork,
    index: usize,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> SnStatus {
    guard(|| {
        let id = net_arg(net)?
            .nodes()
            .get(index)
            .ok_or_else(|| fail(SnStatus::InvalidArgument, "node index out of range"))?;
        *out_arg(needed)? = id.len() + 1;
        if len < id.len() + 1 {
            return Err(fail(SnStatus::InvalidArgument, "buffer too small"));
        }
        if buf.is_null() {
            return Err(fail(SnStatus::NullPointer, "buffer is null"));
        }
        ptr::copy_nonoverlapping(id.as_ptr().cast::<c_char>(), buf, id.len());
        *buf.add(id.len()) = 0;
        Ok(())
    })
}

/// # Safety
/// `net` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sn_network_stats(net: *const SnNetwork, out: *mut SnNetworkStats) -> SnStatus {
    guard(|| {
        let out = out_arg(out)?;
        let s = lift(stocknet::metrics::compute_stats(net_arg(net)?))?;
        *out = SnNetworkStats {
            density: s.density,
            node_count: s.node_count,
            edge_count: s.edge_count,
            avg_degree: s.avg_degree,
            in_assortativity: s.in_assort.value().unwrap_or(f64::NAN),
            out_assortativity: s.out_assort.value().unwrap_or(f64::NAN),
            weight_mean: s.weight_mean,
            weight_std: s.weight_std,
            weight_sum: s.weight_sum,
            scc_count: s.n_scc,
            wcc_count: s.n_wcc,
            largest_scc: s.max_scc_size,
            largest_wcc: s.max_wcc_size,
        };
        Ok(())
    })
}

/// New handle keeping edges whose weight is at least the `k`-quantile.
///
/// # Safety
/// `net` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sn_network_filter(net: *const SnNetwork, k: f64, out: *mut *mut SnNetwork) -> SnStatus {
    guard(|| {
        let out = out_arg(out)?;
        *out = ptr::null_mut();
        *out = into_handle(lift(filter_edges(net_arg(net)?, k))?);
        Ok(())
    })
}

/// # Safety
/// `net` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sn_network_save(net: *const SnNetwork, path: *const c_char) -> SnStatus {
    guard(|| {
        let net = net_arg(net)?;
        let path = PathBuf::from(str_arg(path, "path")?);
        lift(save_network(net, &path))
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sn_granger_config_default(out: *mut SnGrangerConfig) -> SnStatus {
    guard(|| {
        let d = GrangerConfig::default();
        *out_arg(out)? = SnGrangerConfig {
            alpha: d.alpha,
            max_lag: d.max_lag,
            lag_criterion: match d.lag_criterion {
                LagCriterion::Aic => SnLagCriterion::Aic,
                LagCriterion::Bic => SnLagCriterion::Bic,
            },
            d_max: d.d_max,
            min_valid_points: d.min_valid_points,
            min_variance: d.min_variance,
        };
        Ok(())
    })
}

/// Tests whether `x` Granger-causes `y`. Both series hold `n` cumulative
/// changes on a shared minute grid; NaN marks a missing minute. A null
/// `config` uses the defaults.
///
/// # Safety
/// `x` and `y` must be valid for `n` reads; `config` null or valid; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sn_granger_test(
    x: *const f64,
    y: *const f64,
    n: usize,
    config: *const SnGrangerConfig,
    out: *mut SnGrangerResult,
) -> SnStatus {
    guard(|| {
        let out = out_arg(out)?;
        if n > 0 && (x.is_null() || y.is_null()) {
            return Err(fail(SnStatus::NullPointer, "series pointer is null"));
        }
        let cfg = match config.as_ref() {
            None => GrangerConfig::default(),
            Some(c) => GrangerConfig {
                alpha: c.alpha,
                max_lag: c.max_lag,
                lag_criterion: match c.lag_criterion {
                    SnLagCriterion::Aic => LagCriterion::Aic,
                    SnLagCriterion::Bic => LagCriterion::Bic,
                },
                d_max: c.d_max,
                min_valid_points: c.min_valid_points,
                min_variance: c.min_variance,
            },
        };
        lift(cfg.validate())?;
        let slice = |p: *const f64| if n == 0 { &[][..] } else { std::slice::from_raw_parts(p, n) };
        let date = NaiveDate::default();
        let xs = ChangeSeries::from_values("x", date, slice(x));
        let ys = ChangeSeries::from_values("y", date, slice(y));
        let o = ty_granger(&xs, &ys, &cfg);
        *out = SnGrangerResult {
            tested: o.is_tested(),
            skip_reason: match o.status {
                OutcomeStatus::Tested => SnSkipReason::None,
                OutcomeStatus::Skipped(SkipReason::InsufficientData) => SnSkipReason::InsufficientData,
                OutcomeStatus::Skipped(SkipReason::DegenerateSeries) => SnSkipReason::DegenerateSeries,
                OutcomeStatus::Skipped(SkipReason::SingularFit) => SnSkipReason::SingularFit,
                OutcomeStatus::Skipped(SkipReason::MissingSeries) => SnSkipReason::MissingSeries,
            },
            p_value: o.p_value.unwrap_or(f64::NAN),
            wald_stat: o.wald_stat.unwrap_or(f64::NAN),
            lag: o.lag_m.unwrap_or(0),
            reject: o.reject.unwrap_or(false),
        };
        Ok(())
    })
}
