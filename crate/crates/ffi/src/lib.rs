//! C interface to `ipd-reactive`.
//!
//! Every fallible function returns an [`IpdStatus`]; on failure a
//! description is available from [`ipd_last_error`] on the same thread.
//! Strategies are opaque handles created by [`ipd_strategy_parse`] and
//! released with [`ipd_strategy_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ipd_reactive::cycle::best_response_payoff;
use ipd_reactive::equilibrium::{is_partner_algorithmic, is_partner_closed_form, is_partner_counting};
use ipd_reactive::evolution::{evolve, fixation_probability, EvolutionConfig};
use ipd_reactive::payoff::{play, PayoffOptions};
use ipd_reactive::{parse_strategy, Error, GameParams, Space, Strategy};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IpdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Domain = 4,
    MemoryMismatch = 5,
    NonErgodic = 6,
    Solver = 7,
    Config = 8,
    Unsupported = 9,
    Io = 10,
    Panic = 11,
}

impl From<&Error> for IpdStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) => IpdStatus::Domain,
            Error::MemoryMismatch { .. } => IpdStatus::MemoryMismatch,
            Error::NonErgodic { .. } => IpdStatus::NonErgodic,
            Error::Solver(_) => IpdStatus::Solver,
            Error::Parse { .. } => IpdStatus::Parse,
            Error::Config(_) => IpdStatus::Config,
            Error::Unsupported(_) => IpdStatus::Unsupported,
            Error::Io(_) => IpdStatus::Io,
        }
    }
}

/// Opaque strategy handle.
pub struct IpdStrategy {
    inner: Strategy,
}

/// Stage-game payoffs.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpdGame {
    pub r: f64,
    pub s: f64,
    pub t: f64,
    pub p: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IpdPairResult {
    pub payoff1: f64,
    pub payoff2: f64,
    pub coop1: f64,
    pub coop2: f64,
    /// Set when a fallback tremble had to be applied.
    pub used_fallback: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IpdMethod {
    /// Explicit donation-game conditions (reactive n <= 3 or counting).
    Closed = 0,
    /// Exhaustive search over deterministic deviations (n <= 4).
    Algorithmic = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IpdSpace {
    Reactive = 0,
    Counting = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpdEvolveConfig {
    pub population: usize,
    pub beta: f64,
    pub steps: u64,
    pub memory: usize,
    pub space: IpdSpace,
    pub b: f64,
    pub c: f64,
    pub seed: u64,
    pub eps: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IpdRunSummary {
    pub avg_coop_rate: f64,
    pub partner_abundance: f64,
    pub most_abundant_steps: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn guard(f: impl FnOnce() -> Result<(), (IpdStatus, String)>) -> IpdStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IpdStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            IpdStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (IpdStatus, String) {
    (IpdStatus::from(&e), e.to_string())
}

fn null(what: &str) -> (IpdStatus, String) {
    (IpdStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, (IpdStatus, String)> {
    ptr.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, (IpdStatus, String)> {
    ptr.as_mut().ok_or_else(|| null(what))
}

fn game_params(g: &IpdGame) -> Result<GameParams, (IpdStatus, String)> {
    GameParams::new(g.r, g.s, g.t, g.p).map_err(lib_err)
}

/// Message describing the last failure on this thread, or NULL. Valid until the next call.
#[no_mangle]
pub extern "C" fn ipd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses `tag:n:p1,...` into a new handle stored in `*out`.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ipd_strategy_parse(text: *const c_char, out_handle: *mut *mut IpdStrategy) -> IpdStatus {
    guard(|| {
        let slot = out(out_handle, "out")?;
        if text.is_null() {
            return Err(null("text"));
        }
        let text = CStr::from_ptr(text).to_str().map_err(|e| (IpdStatus::InvalidUtf8, e.to_string()))?;
        let inner = parse_strategy(text).map_err(lib_err)?;
        *slot = Box::into_raw(Box::new(IpdStrategy { inner }));
        Ok(())
    })
}

/// Releases a handle. NULL is ignored.
///
/// # Safety
/// `handle` must come from [`ipd_strategy_parse`] or [`ipd_evolve`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ipd_strategy_free(handle: *mut IpdStrategy) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Memory length of a strategy, or 0 for NULL.
///
/// # Safety
/// `handle` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ipd_strategy_memory(handle: *const IpdStrategy) -> usize {
    handle.as_ref().map_or(0, |h| h.inner.n())
}

/// Serialized form of a strategy; release with [`ipd_string_free`]. NULL on failure.
///
/// # Safety
/// `handle` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ipd_strategy_to_string(handle: *const IpdStrategy) -> *mut c_char {
    match handle.as_ref() {
        Some(h) => CString::new(h.inner.to_string()).map_or(ptr::null_mut(), CString::into_raw),
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn ipd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Donation game with benefit `b` and cost `c`.
///
/// # Safety
/// `out_game` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ipd_donation_game(b: f64, c: f64, out_game: *mut IpdGame) -> IpdStatus {
    guard(|| {
        let slot = out(out_game, "out_game")?;
        let g = ipd_reactive::donation_game(b, c).map_err(lib_err)?;
        *slot = IpdGame { r: g.r, s: g.s, t: g.t, p: g.p };
        Ok(())
    })
}

/// Long-run payoffs and cooperation rates of `s1` against `s2`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ipd_payoffs(
    s1: *const IpdStrategy,
    s2: *const IpdStrategy,
    game: *const IpdGame,
    eps: f64,
    out_result: *mut IpdPairResult,
) -> IpdStatus {
    guard(|| {
        let (s1, s2) = (deref(s1, "s1")?, deref(s2, "s2")?);
        let g = game_params(deref(game, "game")?)?;
        let slot = out(out_result, "out_result")?;
        let opts = PayoffOptions::with_eps(eps);
        let o = play(&s1.inner, &s2.inner, &g, &opts).map_err(lib_err)?;
        *slot = IpdPairResult {
            payoff1: o.payoffs.0,
            payoff2: o.payoffs.1,
            coop1: o.cooperation.0,
            coop2: o.cooperation.1,
            used_fallback: o.used_fallback(&opts),
        };
        Ok(())
    })
}

/// Partner verdict for a reactive or counting strategy.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ipd_partner_check(
    strategy: *const IpdStrategy,
    game: *const IpdGame,
    method: IpdMethod,
    tol: f64,
    out_is_partner: *mut bool,
) -> IpdStatus {
    guard(|| {
        let s = &deref(strategy, "strategy")?.inner;
        let g = game_params(deref(game, "game")?)?;
        let slot = out(out_is_partner, "out_is_partner")?;
        let reactive = s.as_reactive().ok_or_else(|| {
            (IpdStatus::Unsupported, format!("partner checks need a reactive or counting strategy, got {}", s.tag()))
        })?;
        let verdict = match method {
            IpdMethod::Algorithmic => is_partner_algorithmic(&reactive, &g, tol),
            IpdMethod::Closed => {
                let (b, c) = g.as_donation(1e-12).ok_or_else(|| {
                    (IpdStatus::Unsupported, "closed-form conditions need a donation game".to_string())
                })?;
                match s {
                    Strategy::Counting(r) => is_partner_counting(r, b, c, tol),
                    _ => is_partner_closed_form(&reactive, b, c, tol),
                }
            }
        }
        .map_err(lib_err)?;
        *slot = verdict.is_partner;
        Ok(())
    })
}

/// Highest long-run payoff any co-player can earn against `strategy`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ipd_best_response(
    strategy: *const IpdStrategy,
    game: *const IpdGame,
    out_payoff: *mut f64,
) -> IpdStatus {
    guard(|| {
        let s = &deref(strategy, "strategy")?.inner;
        let g = game_params(deref(game, "game")?)?;
        let slot = out(out_payoff, "out_payoff")?;
        let p = s.as_reactive().ok_or_else(|| {
            (IpdStatus::Unsupported, format!("best response needs a reactive or counting strategy, got {}", s.tag()))
        })?;
        *slot = best_response_payoff(&p, &g).map_err(lib_err)?.payoff;
        Ok(())
    })
}

/// Fixation probability of a single mutant; `mutant[k-1]` and `resident[k-1]`
/// hold the payoffs with `k` mutants, for `k = 1..population-1`.
///
/// # Safety
/// `mutant` and `resident` must each point to `population - 1` doubles.
#[no_mangle]
pub unsafe extern "C" fn ipd_fixation_probability(
    mutant: *const f64,
    resident: *const f64,
    population: usize,
    beta: f64,
    out_phi: *mut f64,
) -> IpdStatus {
    guard(|| {
        let slot = out(out_phi, "out_phi")?;
        if mutant.is_null() || resident.is_null() {
            return Err(null("payoff array"));
        }
        let len = population.saturating_sub(1);
        let m = std::slice::from_raw_parts(mutant, len);
        let r = std::slice::from_raw_parts(resident, len);
        let table: Vec<(f64, f64)> = m.iter().copied().zip(r.iter().copied()).collect();
        *slot = fixation_probability(&table, beta, population).map_err(lib_err)?;
        Ok(())
    })
}

/// Runs one simulation. If `out_most_abundant` is not NULL it receives a new
/// handle to the most abundant resident.
///
/// # Safety
/// `config` and `out_summary` must be valid; `out_most_abundant` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn ipd_evolve(
    config: *const IpdEvolveConfig,
    out_summary: *mut IpdRunSummary,
    out_most_abundant: *mut *mut IpdStrategy,
) -> IpdStatus {
    guard(|| {
        let c = deref(config, "config")?;
        let slot = out(out_summary, "out_summary")?;
        let cfg = EvolutionConfig {
            population: c.population,
            beta: c.beta,
            steps: c.steps,
            memory: c.memory,
            space: match c.space {
                IpdSpace::Reactive => Space::Reactive,
                IpdSpace::Counting => Space::Counting,
            },
            b: c.b,
            c: c.c,
            seed: c.seed,
            eps: c.eps,
        };
        cfg.validate().map_err(lib_err)?;
        let (_, summary) = evolve(&cfg).map_err(lib_err)?;
        *slot = IpdRunSummary {
            avg_coop_rate: summary.avg_coop_rate,
            partner_abundance: summary.partner_abundance,
            most_abundant_steps: summary.most_abundant_steps,
        };
        if let Some(handle) = out_most_abundant.as_mut() {
            *handle = Box::into_raw(Box::new(IpdStrategy { inner: summary.most_abundant_strategy }));
        }
        Ok(())
    })
}
