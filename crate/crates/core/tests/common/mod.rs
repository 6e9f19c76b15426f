//! Reference implementations written from the definitions, without the
//! library's value tables, pruning or closed forms.

#![allow(dead_code)]

use mev_core::bundles::BundleMatrix;
use mev_core::game::{Allocation, ExplicitGame};

pub const TOL: f64 = 1e-9;

/// `v̄(S)` for every mask `S ⊆ {0..n}` by scanning all blocks.
pub fn coalition_values(game: &ExplicitGame) -> Vec<f64> {
    let n = game.n_searchers();
    (0..1u64 << n)
        .map(|s| {
            game.blocks()
                .iter()
                .filter(|b| b.contributors.mask() & !s == 0)
                .map(|b| {
                    let searchers: f64 = (0..n)
                        .filter(|i| s >> i & 1 == 1)
                        .map(|i| b.searcher_values[i])
                        .sum();
                    searchers + b.validator_value
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Core test over all `2^(n+1)` coalitions: coalitions without the
/// validator are worth zero, coalitions with it are worth `v̄(S)`.
pub fn in_core(values: &[f64], x: &Allocation) -> bool {
    let n = x.searcher_shares().len();
    let grand = values[values.len() - 1];
    let total: f64 = x.searcher_shares().iter().sum::<f64>() + x.validator_share();
    if (total - grand).abs() > TOL {
        return false;
    }
    for (s, &value) in values.iter().enumerate() {
        let members: f64 = (0..n)
            .filter(|i| s >> i & 1 == 1)
            .map(|i| x.searcher_shares()[i])
            .sum();
        if members < -TOL || members + x.validator_share() < value - TOL {
            return false;
        }
    }
    true
}

/// `v̄(N) − v̄(N∖{i})` from a full value vector.
pub fn marginals(values: &[f64], n: usize) -> Vec<f64> {
    let full = (1usize << n) - 1;
    (0..n)
        .map(|i| values[full] - values[full & !(1 << i)])
        .collect()
}

/// Block value of a coalition in the bundle model by trying every way of
/// handing opportunities to members (or leaving them out), with at most
/// `capacity` included.
pub fn matrix_value(matrix: &BundleMatrix, mask: u64, capacity: Option<usize>) -> f64 {
    fn go(matrix: &BundleMatrix, mask: u64, i: usize, left: usize) -> f64 {
        if i == matrix.n_opportunities() {
            return 0.0;
        }
        let mut best = go(matrix, mask, i + 1, left);
        if left > 0 {
            for j in 0..matrix.n_searchers() {
                if mask >> j & 1 == 1 {
                    best = best.max(matrix.value(i, j) + go(matrix, mask, i + 1, left - 1));
                }
            }
        }
        best
    }
    go(matrix, mask, 0, capacity.unwrap_or(usize::MAX))
}

pub fn matrix_values(matrix: &BundleMatrix, capacity: Option<usize>) -> Vec<f64> {
    (0..1u64 << matrix.n_searchers())
        .map(|s| matrix_value(matrix, s, capacity))
        .collect()
}

/// Plain least squares of `y` on `x` with intercept: `(intercept, slope, r²)`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let mean = sy / n;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let sst: f64 = y.iter().map(|b| (b - mean).powi(2)).sum();
    (intercept, slope, 1.0 - ssr / sst)
}
