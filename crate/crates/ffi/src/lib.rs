//! C ABI over `mev_core`.
//!
//! Every function returns a [`MevStatus`]; results go through out-pointers.
//! On failure, [`mev_last_error_message`] describes the error for the calling
//! thread. Games and matrices are opaque handles released with their `_free`
//! functions.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use mev_core::bundles::{self, BundleMatrix};
use mev_core::game::{self, Allocation, ExplicitGame, ValueTable};
use mev_core::{mechanisms, stochastic, Coalition, Error};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MevStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidGame = 3,
    TooLarge = 4,
    NotSubmodular = 5,
    ActiveValidator = 6,
    Parse = 7,
    Io = 8,
    Panic = 9,
}

/// Opaque game handle.
pub struct MevGame(ExplicitGame);

/// Opaque bundle-matrix handle.
pub struct MevBundleMatrix(BundleMatrix);

/// Monte Carlo configuration. `capacity < 0` means unconstrained.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct MevSimConfig {
    pub n: usize,
    pub m: usize,
    pub p: f64,
    pub capacity: i64,
    pub trials: u64,
    pub seed: u64,
}

/// Monte Carlo frequencies. Conditional fields are NaN when undefined.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct MevSimReport {
    pub freq_validator_takes_all: f64,
    pub stderr_validator_takes_all: f64,
    pub freq_all_covered_twice: f64,
    pub stderr_all_covered_twice: f64,
    pub freq_all_singletons: f64,
    pub stderr_all_singletons: f64,
    pub freq_zero_block: f64,
    pub stderr_zero_block: f64,
    pub positive_trials: u64,
    pub freq_searchers_take_all_given_positive: f64,
    pub stderr_searchers_take_all_given_positive: f64,
    pub mean_block_value: f64,
    pub mean_floor: f64,
}

/// Closed-form event probabilities; the conditional one is NaN when the
/// block is surely empty.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct MevExactProbabilities {
    pub p_y_lt2: f64,
    pub p_all_covered_twice: f64,
    pub p_all_singletons: f64,
    pub p_zero_block: f64,
    pub p_validator_takes_all: f64,
    pub p_searchers_take_all_given_positive: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(MevStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidGame(_) | Error::InvalidMatrix(_) => MevStatus::InvalidGame,
            Error::TooLarge { .. } => MevStatus::TooLarge,
            Error::NotSubmodular => MevStatus::NotSubmodular,
            Error::ActiveValidator { .. } => MevStatus::ActiveValidator,
            Error::Parse { .. } | Error::MissingHeader { .. } => MevStatus::Parse,
            Error::Io(_) => MevStatus::Io,
            _ => MevStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(MevStatus::NullPointer, format!("`{what}` is null"))
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MevStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            MevStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            MevStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(MevStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

fn check_len(len: usize, n: usize, what: &str) -> Result<(), Failure> {
    if len == n {
        Ok(())
    } else {
        Err(Failure(
            MevStatus::InvalidArgument,
            format!("`{what}` has length {len}, expected {n}"),
        ))
    }
}

fn capacity(c: i64) -> Option<usize> {
    (c >= 0).then_some(c as usize)
}

/// Message for the last failed call on this thread; empty after success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn mev_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

// ---- games ----

/// Parses a game from JSON: `{"n_searchers": n, "blocks": [...]}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mev_game_from_json(
    json: *const c_char,
    out: *mut *mut MevGame,
) -> MevStatus {
    guard(|| {
        let json = text(json, "json")?;
        let game: ExplicitGame =
            serde_json::from_str(json).map_err(|e| Failure(MevStatus::Parse, e.to_string()))?;
        write(out, Box::into_raw(Box::new(MevGame(game))), "out")
    })
}

/// Expands a bundle matrix into a game; `capacity < 0` means unconstrained.
///
/// # Safety
/// `matrix` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mev_game_from_matrix(
    matrix: *const MevBundleMatrix,
    capacity_k: i64,
    out: *mut *mut MevGame,
) -> MevStatus {
    guard(|| {
        let matrix = deref(matrix, "matrix")?;
        let game = bundles::to_general_game(&matrix.0, capacity(capacity_k))?;
        write(out, Box::into_raw(Box::new(MevGame(game))), "out")
    })
}

/// # Safety
/// `game` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mev_game_free(game: *mut MevGame) {
    if !game.is_null() {
        drop(Box::from_raw(game));
    }
}

/// # Safety
/// `game` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mev_game_n_searchers(game: *const MevGame, out: *mut usize) -> MevStatus {
    guard(|| write(out, deref(game, "game")?.0.n_searchers(), "out"))
}

/// Value of the coalition given as a bitmask over searchers.
///
/// # Safety
/// `game` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mev_game_coalition_value(
    game: *const MevGame,
    mask: u64,
    out: *mut f64,
) -> MevStatus {
    guard(|| {
        let game = deref(game, "game")?;
        write(
            out,
            game::coalition_value(&game.0, Coalition::from_mask(mask))?,
            "out",
        )
    })
}

/// # Safety
/// `game` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mev_game_marginal(
    game: *const MevGame,
    searcher: usize,
    out: *mut f64,
) -> MevStatus {
    guard(|| {
        let game = deref(game, "game")?;
        write(out, game::marginal_contribution(&game.0, searcher)?, "out")
    })
}

/// # Safety
/// `game` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mev_game_is_submodular(game: *const MevGame, out: *mut bool) -> MevStatus {
    guard(|| {
        let game = deref(game, "game")?;
        write(out, game::validate_game(&game.0)?.is_submodular, "out")
    })
}

/// Core membership by enumerating every coalition.
///
/// # Safety
/// `shares` must point to `n` doubles; `game` must be a live handle; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn mev_game_in_core(
    game: *const MevGame,
    shares: *const f64,
    n: usize,
    validator_share: f64,
    out: *mut bool,
) -> MevStatus {
    guard(|| {
        let game = deref(game, "game")?;
        let x = Allocation::new(slice(shares, n, "shares")?.to_vec(), validator_share)?;
        write(out, game::core_membership_bruteforce(&game.0, &x)?, "out")
    })
}

/// Core membership through marginal bounds; fails with
/// `NotSubmodular` when the bounds do not characterize the core.
///
/// # Safety
/// As for [`mev_game_in_core`].
#[no_mangle]
pub unsafe extern "C" fn mev_game_in_core_by_bounds(
    game: *const MevGame,
    shares: *const f64,
    n: usize,
    validator_share: f64,
    out: *mut bool,
) -> MevStatus {
    guard(|| {
        let game = deref(game, "game")?;
        let x = Allocation::new(slice(shares, n, "shares")?.to_vec(), validator_share)?;
        write(
            out,
            game::core_membership_characterization(&game.0, &x)?,
            "out",
        )
    })
}

/// Searcher-optimal core point: marginals to searchers, residual to the
/// validator.
///
/// # Safety
/// `shares_out` must have room for `n` doubles; other pointers writable.
#[no_mangle]
pub unsafe extern "C" fn mev_game_searcher_optimal(
    game: *const MevGame,
    shares_out: *mut f64,
    n: usize,
    validator_out: *mut f64,
) -> MevStatus {
    guard(|| {
        let game = deref(game, "game")?;
        check_len(n, game.0.n_searchers(), "shares_out")?;
        let x = game::searcher_optimal_allocation(&game.0)?;
        slice_mut(shares_out, n, "shares_out")?.copy_from_slice(x.searcher_shares());
        write(validator_out, x.validator_share(), "validator_out")
    })
}

/// VCG payments at the welfare-maximizing block (lowest index on ties).
///
/// # Safety
/// `payments_out` must have room for `n` doubles; `block_out` writable.
#[no_mangle]
pub unsafe extern "C" fn mev_game_vcg(
    game: *const MevGame,
    payments_out: *mut f64,
    n: usize,
    block_out: *mut usize,
) -> MevStatus {
    guard(|| {
        let game = deref(game, "game")?;
        check_len(n, game.0.n_searchers(), "payments_out")?;
        let outcome = mechanisms::vcg_payments(&game.0)?;
        slice_mut(payments_out, n, "payments_out")?.copy_from_slice(&outcome.payments);
        write(block_out, outcome.block, "block_out")
    })
}

/// Grand-coalition value, searcher marginals (room for `n`) in one pass.
///
/// # Safety
/// `marginals_out` must have room for `n` doubles; `grand_out` writable.
#[no_mangle]
pub unsafe extern "C" fn mev_game_value_summary(
    game: *const MevGame,
    marginals_out: *mut f64,
    n: usize,
    grand_out: *mut f64,
) -> MevStatus {
    guard(|| {
        let game = deref(game, "game")?;
        check_len(n, game.0.n_searchers(), "marginals_out")?;
        let table = ValueTable::new(&game.0)?;
        slice_mut(marginals_out, n, "marginals_out")?.copy_from_slice(&table.marginals());
        write(grand_out, table.grand_value(), "grand_out")
    })
}

// ---- bundle matrices ----

/// Builds an `m × n` matrix from row-major values (row = opportunity).
///
/// # Safety
/// `values` must point to `m * n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mev_matrix_new(
    values: *const f64,
    m: usize,
    n: usize,
    out: *mut *mut MevBundleMatrix,
) -> MevStatus {
    guard(|| {
        let len = m
            .checked_mul(n)
            .ok_or_else(|| Failure(MevStatus::TooLarge, "m * n overflows".into()))?;
        let values = slice(values, len, "values")?;
        let rows = (0..m)
            .map(|i| values[i * n..(i + 1) * n].to_vec())
            .collect();
        let matrix = BundleMatrix::new(n, rows)?;
        write(out, Box::into_raw(Box::new(MevBundleMatrix(matrix))), "out")
    })
}

/// Reads a matrix from CSV text with header `s0,...,s{n-1}`.
///
/// # Safety
/// `csv` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mev_matrix_from_csv(
    csv: *const c_char,
    out: *mut *mut MevBundleMatrix,
) -> MevStatus {
    guard(|| {
        let csv = text(csv, "csv")?;
        let matrix = BundleMatrix::read_csv(csv.as_bytes())?;
        write(out, Box::into_raw(Box::new(MevBundleMatrix(matrix))), "out")
    })
}

/// # Safety
/// `matrix` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mev_matrix_free(matrix: *mut MevBundleMatrix) {
    if !matrix.is_null() {
        drop(Box::from_raw(matrix));
    }
}

/// Block value of the grand coalition: the sum of per-opportunity maxima.
///
/// # Safety
/// `matrix` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mev_matrix_block_value(
    matrix: *const MevBundleMatrix,
    out: *mut f64,
) -> MevStatus {
    guard(|| {
        write(
            out,
            bundles::grand_block_value(&deref(matrix, "matrix")?.0),
            "out",
        )
    })
}

/// Validator floor: the sum of per-opportunity second-highest values.
///
/// # Safety
/// `matrix` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mev_matrix_validator_floor(
    matrix: *const MevBundleMatrix,
    out: *mut f64,
) -> MevStatus {
    guard(|| {
        write(
            out,
            bundles::validator_floor(&deref(matrix, "matrix")?.0).total,
            "out",
        )
    })
}

// ---- stochastic model ----

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mev_exact_probabilities(
    n: usize,
    m: usize,
    p: f64,
    out: *mut MevExactProbabilities,
) -> MevStatus {
    guard(|| {
        let e = stochastic::exact_event_probabilities(n, m, p)?;
        let value = MevExactProbabilities {
            p_y_lt2: e.p_y_lt2,
            p_all_covered_twice: e.p_all_covered_twice,
            p_all_singletons: e.p_all_singletons,
            p_zero_block: e.p_zero_block,
            p_validator_takes_all: e.p_validator_takes_all,
            p_searchers_take_all_given_positive: e
                .p_searchers_take_all_given_positive
                .unwrap_or(f64::NAN),
        };
        write(out, value, "out")
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mev_calibrate_p(
    n: usize,
    clash_fraction: f64,
    out: *mut f64,
) -> MevStatus {
    guard(|| write(out, stochastic::calibrate_p(n, clash_fraction)?, "out"))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mev_solve_phi(alpha: f64, out: *mut f64) -> MevStatus {
    guard(|| write(out, stochastic::solve_phi(alpha)?, "out"))
}

/// # Safety
/// `config` must be readable; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mev_simulate(
    config: *const MevSimConfig,
    out: *mut MevSimReport,
) -> MevStatus {
    guard(|| {
        let c = deref(config, "config")?;
        let r = stochastic::run_trials(&stochastic::SimConfig {
            n: c.n,
            m: c.m,
            p: c.p,
            capacity: capacity(c.capacity),
            trials: c.trials,
            seed: c.seed,
        })?;
        let value = MevSimReport {
            freq_validator_takes_all: r.freq_validator_takes_all,
            stderr_validator_takes_all: r.stderr_validator_takes_all,
            freq_all_covered_twice: r.freq_all_covered_twice,
            stderr_all_covered_twice: r.stderr_all_covered_twice,
            freq_all_singletons: r.freq_all_singletons,
            stderr_all_singletons: r.stderr_all_singletons,
            freq_zero_block: r.freq_zero_block,
            stderr_zero_block: r.stderr_zero_block,
            positive_trials: r.positive_trials,
            freq_searchers_take_all_given_positive: r
                .freq_searchers_take_all_given_positive
                .unwrap_or(f64::NAN),
            stderr_searchers_take_all_given_positive: r
                .stderr_searchers_take_all_given_positive
                .unwrap_or(f64::NAN),
            mean_block_value: r.mean_block_value,
            mean_floor: r.mean_floor,
        };
        write(out, value, "out")
    })
}
