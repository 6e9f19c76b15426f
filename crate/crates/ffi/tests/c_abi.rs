use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use mev_core_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(mev_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

fn sample_matrix() -> *mut MevBundleMatrix {
    let values = [3.0, 1.0, 0.0, 2.0];
    let mut handle = ptr::null_mut();
    assert_eq!(
        unsafe { mev_matrix_new(values.as_ptr(), 2, 2, &mut handle) },
        MevStatus::Ok
    );
    handle
}

#[test]
fn matrix_game_round_trip() {
    let matrix = sample_matrix();
    let (mut value, mut floor) = (0.0, 0.0);
    unsafe {
        assert_eq!(mev_matrix_block_value(matrix, &mut value), MevStatus::Ok);
        assert_eq!(
            mev_matrix_validator_floor(matrix, &mut floor),
            MevStatus::Ok
        );
    }
    assert_eq!((value, floor), (5.0, 1.0));

    let mut game = ptr::null_mut();
    assert_eq!(
        unsafe { mev_game_from_matrix(matrix, -1, &mut game) },
        MevStatus::Ok
    );

    let mut n = 0;
    let mut v = 0.0;
    let mut sub = false;
    unsafe {
        assert_eq!(mev_game_n_searchers(game, &mut n), MevStatus::Ok);
        assert_eq!(mev_game_coalition_value(game, 0b01, &mut v), MevStatus::Ok);
        assert_eq!(mev_game_is_submodular(game, &mut sub), MevStatus::Ok);
    }
    assert_eq!((n, v, sub), (2, 3.0, true));

    let mut shares = [0.0; 2];
    let mut x_v = 0.0;
    assert_eq!(
        unsafe { mev_game_searcher_optimal(game, shares.as_mut_ptr(), 2, &mut x_v) },
        MevStatus::Ok
    );
    assert_eq!((shares, x_v), ([2.0, 2.0], 1.0));

    let mut payments = [0.0; 2];
    let mut block = 0;
    assert_eq!(
        unsafe { mev_game_vcg(game, payments.as_mut_ptr(), 2, &mut block) },
        MevStatus::Ok
    );
    assert_eq!(payments, [1.0, 0.0]);

    let mut inside = false;
    let mut by_bounds = true;
    let outside = [2.5, 1.0];
    unsafe {
        assert_eq!(
            mev_game_in_core(game, shares.as_ptr(), 2, 1.0, &mut inside),
            MevStatus::Ok
        );
        assert!(inside);
        assert_eq!(
            mev_game_in_core_by_bounds(game, outside.as_ptr(), 2, 1.5, &mut by_bounds),
            MevStatus::Ok
        );
        assert!(!by_bounds);
    }

    unsafe {
        mev_game_free(game);
        mev_matrix_free(matrix);
    }
}

#[test]
fn capacity_game_and_length_mismatch() {
    let matrix = sample_matrix();
    let mut game = ptr::null_mut();
    assert_eq!(
        unsafe { mev_game_from_matrix(matrix, 1, &mut game) },
        MevStatus::Ok
    );
    let mut grand = 0.0;
    let mut marginals = [0.0; 2];
    assert_eq!(
        unsafe { mev_game_value_summary(game, marginals.as_mut_ptr(), 2, &mut grand) },
        MevStatus::Ok
    );
    assert_eq!((grand, marginals), (3.0, [1.0, 0.0]));

    let mut short = [0.0; 1];
    assert_eq!(
        unsafe { mev_game_vcg(game, short.as_mut_ptr(), 1, ptr::null_mut()) },
        MevStatus::InvalidArgument
    );
    assert!(last_error().contains("length"));
    unsafe {
        mev_game_free(game);
        mev_matrix_free(matrix);
    }
}

#[test]
fn json_game_errors_are_classified() {
    let bad = CString::new("{\"n_searchers\": 2, \"blocks\": []}").unwrap();
    let mut game = ptr::null_mut();
    assert_eq!(
        unsafe { mev_game_from_json(bad.as_ptr(), &mut game) },
        MevStatus::Parse
    );
    assert!(game.is_null());
    assert!(!last_error().is_empty());

    let complement = CString::new(
        r#"{"n_searchers": 2, "blocks": [
            {"contributors": [], "searcher_values": [0, 0]},
            {"contributors": [0, 1], "searcher_values": [0.5, 0.5]}
        ]}"#,
    )
    .unwrap();
    assert_eq!(
        unsafe { mev_game_from_json(complement.as_ptr(), &mut game) },
        MevStatus::Ok
    );
    let mut out = [0.0; 2];
    let mut x_v = 0.0;
    assert_eq!(
        unsafe { mev_game_searcher_optimal(game, out.as_mut_ptr(), 2, &mut x_v) },
        MevStatus::NotSubmodular
    );
    unsafe { mev_game_free(game) };
}

#[test]
fn csv_matrix_and_null_handles() {
    let csv = CString::new("s0,s1\n3,1\n0,2\n").unwrap();
    let mut matrix = ptr::null_mut();
    assert_eq!(
        unsafe { mev_matrix_from_csv(csv.as_ptr(), &mut matrix) },
        MevStatus::Ok
    );
    let mut v = 0.0;
    assert_eq!(
        unsafe { mev_matrix_block_value(matrix, &mut v) },
        MevStatus::Ok
    );
    assert_eq!(v, 5.0);
    unsafe { mev_matrix_free(matrix) };

    assert_eq!(
        unsafe { mev_matrix_block_value(ptr::null(), &mut v) },
        MevStatus::NullPointer
    );
    unsafe {
        mev_game_free(ptr::null_mut());
        mev_matrix_free(ptr::null_mut());
    }
}

#[test]
fn stochastic_entry_points() {
    let mut p = 0.0;
    assert_eq!(
        unsafe { mev_calibrate_p(125, 2.0 / 3.0, &mut p) },
        MevStatus::Ok
    );
    assert!((0.009..=0.0105).contains(&p));

    let mut phi = 0.0;
    assert_eq!(
        unsafe { mev_solve_phi(4.0 * (-2.0f64).exp(), &mut phi) },
        MevStatus::Ok
    );
    assert!((phi - 3.0).abs() < 1e-8);

    let mut exact = MevExactProbabilities::default();
    assert_eq!(
        unsafe { mev_exact_probabilities(1000, 3, 0.001, &mut exact) },
        MevStatus::Ok
    );
    assert!((exact.p_all_singletons - 0.0498).abs() < 1e-3);

    let config = MevSimConfig {
        n: 10,
        m: 3,
        p: 0.0,
        capacity: -1,
        trials: 100,
        seed: 7,
    };
    let mut report = MevSimReport::default();
    assert_eq!(unsafe { mev_simulate(&config, &mut report) }, MevStatus::Ok);
    assert_eq!(report.freq_zero_block, 1.0);
    assert!(report.freq_searchers_take_all_given_positive.is_nan());

    let bad = MevSimConfig { p: 1.5, ..config };
    assert_eq!(
        unsafe { mev_simulate(&bad, &mut report) },
        MevStatus::InvalidArgument
    );
}

#[test]
fn generated_header_declares_the_api_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/mev_core.h");
    let text = std::fs::read_to_string(&header).expect("build script writes the header");
    for symbol in [
        "mev_last_error_message",
        "mev_game_from_json",
        "mev_game_in_core",
        "mev_simulate",
        "typedef struct MevGame MevGame",
    ] {
        assert!(text.contains(symbol), "header lacks {symbol}");
    }

    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-x", "c", "-std=c99", "-Wall", "-Werror"])
        .arg(&header)
        .status()
    else {
        eprintln!("no C compiler found; skipping header compile check");
        return;
    };
    assert!(status.success(), "header does not compile as C99");
}
