//! Random instances for property tests and the acceptance harness.
//!
//! Bundle matrices (optionally with a capacity) always expand to submodular
//! games; adding a complementarity block produces games that are not.

use rand::Rng;

use crate::bundles::{to_general_game, BundleMatrix};
use crate::coalition::Coalition;
use crate::game::{Allocation, CandidateBlock, ExplicitGame, ValueTable};

#[derive(Clone, Debug)]
pub struct GeneratedGame {
    pub matrix: BundleMatrix,
    pub capacity: Option<usize>,
    pub game: ExplicitGame,
}

/// Matrix with `1..=max_n` searchers and `0..=max_m` opportunities. Entries
/// mix zeros, small integers (so ties are common) and continuous values.
pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, max_m: usize, max_n: usize) -> BundleMatrix {
    let n = rng.random_range(1..=max_n);
    let m = rng.random_range(0..=max_m);
    let rows = (0..m)
        .map(|_| {
            (0..n)
                .map(|_| match rng.random_range(0..10) {
                    0..=2 => 0.0,
                    3..=6 => rng.random_range(1..=4) as f64,
                    _ => rng.random_range(0.0..5.0),
                })
                .collect()
        })
        .collect();
    BundleMatrix::new(n, rows).expect("generated entries are valid")
}

/// A bundle game with `n ≤ max_n`, `m ≤ max_m` and, with probability
/// `capacity_prob`, a capacity below the number of opportunities.
pub fn random_submodular_game<R: Rng + ?Sized>(
    rng: &mut R,
    max_n: usize,
    max_m: usize,
    capacity_prob: f64,
) -> GeneratedGame {
    let matrix = random_matrix(rng, max_m, max_n);
    let m = matrix.n_opportunities();
    let capacity = (m > 0 && rng.random_bool(capacity_prob)).then(|| rng.random_range(0..m));
    let game = to_general_game(&matrix, capacity)
        .expect("generated sizes stay within the enumeration cap");
    GeneratedGame {
        matrix,
        capacity,
        game,
    }
}

/// Adds a block that two searchers can only build together and that is
/// worth more than everything else combined. Needs two searchers.
pub fn with_complementarity<R: Rng + ?Sized>(
    rng: &mut R,
    game: &ExplicitGame,
) -> Option<ExplicitGame> {
    let n = game.n_searchers();
    if n < 2 {
        return None;
    }
    let a = rng.random_range(0..n);
    let b = (a + rng.random_range(1..n)) % n;
    let top = game
        .blocks()
        .iter()
        .map(CandidateBlock::total_value)
        .fold(0.0, f64::max);
    let mut values = vec![0.0; n];
    values[a] = top + 1.0;
    values[b] = top + 1.0;
    let mut blocks = game.blocks().to_vec();
    blocks.push(CandidateBlock {
        contributors: Coalition::from_indices([a, b]),
        searcher_values: values,
        validator_value: 0.0,
    });
    Some(ExplicitGame::new(n, blocks).expect("extended game keeps its invariants"))
}

/// Candidate allocations around the core: interior points, vertices,
/// points pushing one share past its marginal bound, points with the
/// budget off by a visible amount, and unstructured splits.
pub fn candidate_allocations<R: Rng + ?Sized>(
    rng: &mut R,
    table: &ValueTable,
    count: usize,
) -> Vec<Allocation> {
    let marginals: Vec<f64> = table.marginals().iter().map(|m| m.max(0.0)).collect();
    let grand = table.grand_value();
    let n = marginals.len();
    let residual = |shares: &[f64]| (grand - shares.iter().sum::<f64>()).max(0.0);
    (0..count)
        .map(|k| {
            let interior: Vec<f64> = marginals.iter().map(|&m| m * rng.random::<f64>()).collect();
            let (shares, validator) = match k % 5 {
                0 => {
                    let v = residual(&interior);
                    (interior, v)
                }
                1 => {
                    let vertex: Vec<f64> = marginals
                        .iter()
                        .map(|&m| if rng.random_bool(0.5) { m } else { 0.0 })
                        .collect();
                    let v = residual(&vertex);
                    (vertex, v)
                }
                2 => {
                    let mut over = interior;
                    let i = rng.random_range(0..n);
                    over[i] = marginals[i] + rng.random_range(0.01..1.0);
                    let v = residual(&over);
                    (over, v)
                }
                3 => {
                    let v = residual(&interior);
                    let shift = rng.random_range(0.01..1.0);
                    let v = if v >= shift && rng.random_bool(0.5) {
                        v - shift
                    } else {
                        v + shift
                    };
                    (interior, v)
                }
                _ => {
                    let free: Vec<f64> = (0..n)
                        .map(|_| rng.random_range(0.0..=grand.max(1.0)))
                        .collect();
                    let v = residual(&free);
                    (free, v)
                }
            };
            Allocation::new(shares, validator).expect("generated shares are nonnegative")
        })
        .collect()
}
