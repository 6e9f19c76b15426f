//! The general transferable-utility game between searchers and one validator.
//!
//! A game is an explicit list of candidate blocks. A block is feasible for a
//! coalition `S` exactly when every searcher whose bundle it uses belongs to
//! `S`; the coalition's value is the best total value (members' values plus
//! the validator's) over its feasible blocks. Coalitions without the
//! validator are worth nothing, so only searcher sets are ever queried.

use serde::{Deserialize, Serialize};

use crate::coalition::{Coalition, MAX_SEARCHERS};
use crate::error::{Error, Result};
use crate::TOLERANCE;

/// Largest searcher count for which the full `2^n` value table is built.
pub const MAX_TABLE_SEARCHERS: usize = 20;
/// Largest searcher count for the pairwise submodularity check.
pub const MAX_VALIDATE_SEARCHERS: usize = 12;
/// Number of offending pairs kept by [`validate_game`].
pub const MAX_REPORTED_VIOLATIONS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateBlock {
    pub contributors: Coalition,
    pub searcher_values: Vec<f64>,
    #[serde(default)]
    pub validator_value: f64,
}

impl CandidateBlock {
    pub fn empty(n_searchers: usize) -> Self {
        CandidateBlock {
            contributors: Coalition::EMPTY,
            searcher_values: vec![0.0; n_searchers],
            validator_value: 0.0,
        }
    }

    /// Total value realized by `coalition` (plus the validator) if this block
    /// is built. Feasibility is not checked.
    pub fn value_for(&self, coalition: Coalition) -> f64 {
        coalition
            .iter()
            .map(|i| self.searcher_values[i])
            .sum::<f64>()
            + self.validator_value
    }

    pub fn total_value(&self) -> f64 {
        self.searcher_values.iter().sum::<f64>() + self.validator_value
    }

    fn is_zero_empty(&self) -> bool {
        self.contributors.is_empty()
            && self.validator_value == 0.0
            && self.searcher_values.iter().all(|&v| v == 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GameDocument")]
pub struct ExplicitGame {
    n_searchers: usize,
    blocks: Vec<CandidateBlock>,
}

#[derive(Deserialize)]
struct GameDocument {
    n_searchers: usize,
    blocks: Vec<CandidateBlock>,
}

impl TryFrom<GameDocument> for ExplicitGame {
    type Error = Error;

    fn try_from(doc: GameDocument) -> Result<Self> {
        ExplicitGame::new(doc.n_searchers, doc.blocks)
    }
}

impl ExplicitGame {
    pub fn new(n_searchers: usize, blocks: Vec<CandidateBlock>) -> Result<Self> {
        if n_searchers == 0 {
            return Err(Error::InvalidGame(
                "a game needs at least one searcher".into(),
            ));
        }
        if n_searchers > MAX_SEARCHERS {
            return Err(Error::TooLarge {
                what: "coalition representation",
                size: n_searchers as u64,
                limit: MAX_SEARCHERS as u64,
            });
        }
        for (b, block) in blocks.iter().enumerate() {
            if block.searcher_values.len() != n_searchers {
                return Err(Error::InvalidGame(format!(
                    "block {b} lists {} searcher values, expected {n_searchers}",
                    block.searcher_values.len()
                )));
            }
            if block.contributors.span() > n_searchers {
                return Err(Error::InvalidGame(format!(
                    "block {b} has contributor {} but there are only {n_searchers} searchers",
                    block.contributors.span() - 1
                )));
            }
            if !block.validator_value.is_finite()
                || block.searcher_values.iter().any(|v| !v.is_finite())
            {
                return Err(Error::InvalidGame(format!(
                    "block {b} has a non-finite value"
                )));
            }
        }
        if !blocks.iter().any(CandidateBlock::is_zero_empty) {
            return Err(Error::InvalidGame(
                "the block list must contain the empty block (no contributors, all values zero)"
                    .into(),
            ));
        }
        Ok(ExplicitGame {
            n_searchers,
            blocks,
        })
    }

    pub fn n_searchers(&self) -> usize {
        self.n_searchers
    }

    pub fn blocks(&self) -> &[CandidateBlock] {
        &self.blocks
    }

    pub fn grand_coalition(&self) -> Coalition {
        Coalition::full(self.n_searchers)
    }

    pub fn is_passive(&self) -> bool {
        self.blocks.iter().all(|b| b.validator_value == 0.0)
    }

    pub(crate) fn check_index(&self, j: usize) -> Result<()> {
        if j < self.n_searchers {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: j,
                n_searchers: self.n_searchers,
            })
        }
    }

    pub(crate) fn check_coalition(&self, c: Coalition) -> Result<()> {
        if c.span() > self.n_searchers {
            Err(Error::IndexOutOfRange {
                index: c.span() - 1,
                n_searchers: self.n_searchers,
            })
        } else {
            Ok(())
        }
    }
}

/// Value split among the searchers and the validator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AllocationDocument")]
pub struct Allocation {
    searcher_shares: Vec<f64>,
    validator_share: f64,
}

#[derive(Deserialize)]
struct AllocationDocument {
    searcher_shares: Vec<f64>,
    validator_share: f64,
}

impl TryFrom<AllocationDocument> for Allocation {
    type Error = Error;

    fn try_from(doc: AllocationDocument) -> Result<Self> {
        Allocation::new(doc.searcher_shares, doc.validator_share)
    }
}

impl Allocation {
    pub fn new(searcher_shares: Vec<f64>, validator_share: f64) -> Result<Self> {
        let all = searcher_shares
            .iter()
            .chain(std::iter::once(&validator_share));
        for v in all {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::InvalidAllocation(format!(
                    "shares must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(Allocation {
            searcher_shares,
            validator_share,
        })
    }

    /// Builds an allocation from computed shares, absorbing rounding noise
    /// below zero. Larger negatives are still rejected.
    pub(crate) fn from_computed(shares: Vec<f64>, validator_share: f64) -> Result<Self> {
        let clamp = |v: f64| if (-TOLERANCE..0.0).contains(&v) { 0.0 } else { v };
        Allocation::new(
            shares.into_iter().map(clamp).collect(),
            clamp(validator_share),
        )
    }

    pub fn searcher_shares(&self) -> &[f64] {
        &self.searcher_shares
    }

    pub fn validator_share(&self) -> f64 {
        self.validator_share
    }

    pub fn total(&self) -> f64 {
        self.searcher_shares.iter().sum::<f64>() + self.validator_share
    }

    fn check_len(&self, game: &ExplicitGame) -> Result<()> {
        if self.searcher_shares.len() == game.n_searchers() {
            Ok(())
        } else {
            Err(Error::InvalidAllocation(format!(
                "allocation has {} searcher shares, game has {} searchers",
                self.searcher_shares.len(),
                game.n_searchers()
            )))
        }
    }
}

/// `v̄(S)`: the best block value available to `coalition` together with the
/// validator.
pub fn coalition_value(game: &ExplicitGame, coalition: Coalition) -> Result<f64> {
    game.check_coalition(coalition)?;
    Ok(best_value(game, coalition))
}

fn best_value(game: &ExplicitGame, coalition: Coalition) -> f64 {
    game.blocks
        .iter()
        .filter(|b| b.contributors.is_subset_of(coalition))
        .map(|b| b.value_for(coalition))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `v̄(𝒮) − v̄(𝒮∖{j})`.
pub fn marginal_contribution(game: &ExplicitGame, j: usize) -> Result<f64> {
    game.check_index(j)?;
    let all = game.grand_coalition();
    Ok(best_value(game, all) - best_value(game, all.without(j)))
}

/// Coalitional values for every subset of searchers, indexed by mask.
#[derive(Clone, Debug)]
pub struct ValueTable {
    n: usize,
    values: Vec<f64>,
}

impl ValueTable {
    pub fn new(game: &ExplicitGame) -> Result<Self> {
        let n = game.n_searchers();
        if n > MAX_TABLE_SEARCHERS {
            return Err(Error::TooLarge {
                what: "coalition enumeration",
                size: n as u64,
                limit: MAX_TABLE_SEARCHERS as u64,
            });
        }
        let universe = Coalition::full(n);
        let mut values = vec![f64::NEG_INFINITY; 1 << n];
        for block in game.blocks() {
            for s in block.contributors.supersets_within(universe) {
                let v = block.value_for(s);
                let slot = &mut values[s.mask() as usize];
                if v > *slot {
                    *slot = v;
                }
            }
        }
        Ok(ValueTable { n, values })
    }

    pub fn n_searchers(&self) -> usize {
        self.n
    }

    pub fn value(&self, c: Coalition) -> f64 {
        self.values[c.mask() as usize]
    }

    pub fn grand_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn marginal(&self, j: usize) -> f64 {
        let all = Coalition::full(self.n);
        self.value(all) - self.value(all.without(j))
    }

    pub fn marginals(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.marginal(j)).collect()
    }

    /// Pairwise monotonicity, submodularity and decreasing-marginal-value
    /// checks over every coalition pair.
    pub fn diagnostics(&self) -> Result<GameDiagnostics> {
        let n = self.n;
        if n > MAX_VALIDATE_SEARCHERS {
            return Err(Error::TooLarge {
                what: "submodularity check",
                size: n as u64,
                limit: MAX_VALIDATE_SEARCHERS as u64,
            });
        }
        let mut violations = Vec::new();
        let mut record = |kind, first: Coalition, second: Coalition, gap: f64| {
            if violations.len() < MAX_REPORTED_VIOLATIONS {
                violations.push(Violation {
                    kind,
                    first,
                    second,
                    gap,
                });
            }
        };

        let mut is_monotone = true;
        let mut decreasing_marginal = true;
        for b in Coalition::all(n) {
            let vb = self.value(b);
            // subsets a of b
            let mut sub = b.mask();
            loop {
                let a = Coalition::from_mask(sub);
                let va = self.value(a);
                if va > vb + TOLERANCE {
                    is_monotone = false;
                    record(ViolationKind::Monotonicity, a, b, va - vb);
                }
                for i in a.iter() {
                    let drop_b = vb - self.value(b.without(i));
                    let drop_a = va - self.value(a.without(i));
                    if drop_b > drop_a + TOLERANCE {
                        decreasing_marginal = false;
                        record(
                            ViolationKind::DecreasingMarginalValue,
                            a,
                            b,
                            drop_b - drop_a,
                        );
                    }
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & b.mask();
            }
        }

        let mut is_submodular = true;
        for a in Coalition::all(n) {
            let va = self.value(a);
            for b in Coalition::all(n) {
                if b < a {
                    continue;
                }
                let lhs = va + self.value(b);
                let rhs = self.value(a.union(b)) + self.value(a.intersection(b));
                if lhs < rhs - TOLERANCE {
                    is_submodular = false;
                    record(ViolationKind::Submodularity, a, b, rhs - lhs);
                }
            }
        }

        Ok(GameDiagnostics {
            is_monotone,
            is_submodular,
            has_decreasing_marginal_value: decreasing_marginal,
            violations,
        })
    }

    /// Brute-force core test: every coalition inequality plus budget balance.
    pub fn in_core(&self, x: &Allocation) -> bool {
        let n = self.n;
        let shares = x.searcher_shares();
        if shares.len() != n {
            return false;
        }
        if (x.total() - self.grand_value()).abs() > TOLERANCE {
            return false;
        }
        // subset sums of searcher shares, built from the lowest member
        let mut sums = vec![0.0f64; 1 << n];
        for mask in 1..sums.len() {
            let low = mask.trailing_zeros() as usize;
            sums[mask] = sums[mask & (mask - 1)] + shares[low];
        }
        for (mask, &s) in sums.iter().enumerate() {
            // coalition without the validator: worth zero
            if s < -TOLERANCE {
                return false;
            }
            // coalition with the validator
            if s + x.validator_share() < self.values[mask] - TOLERANCE {
                return false;
            }
        }
        true
    }

    /// Marginal-bound test. Only meaningful for submodular games.
    pub fn in_core_by_bounds(&self, x: &Allocation) -> bool {
        let shares = x.searcher_shares();
        if shares.len() != self.n {
            return false;
        }
        let within = shares
            .iter()
            .enumerate()
            .all(|(i, &xi)| xi >= -TOLERANCE && xi <= self.marginal(i) + TOLERANCE);
        let residual = self.grand_value() - shares.iter().sum::<f64>();
        within && (x.validator_share() - residual).abs() <= TOLERANCE
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// `first ⊆ second` but `v̄(first) > v̄(second)`.
    Monotonicity,
    /// `v̄(first) + v̄(second) < v̄(first ∪ second) + v̄(first ∩ second)`.
    Submodularity,
    /// `first ⊆ second` and some member's marginal value grows from
    /// `first` to `second`.
    DecreasingMarginalValue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub first: Coalition,
    pub second: Coalition,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameDiagnostics {
    pub is_monotone: bool,
    pub is_submodular: bool,
    pub has_decreasing_marginal_value: bool,
    pub violations: Vec<Violation>,
}

impl GameDiagnostics {
    /// Submodular and decreasing-marginal-value checks agree whenever the
    /// game is monotone.
    pub fn equivalence_holds(&self) -> bool {
        !self.is_monotone || self.is_submodular == self.has_decreasing_marginal_value
    }
}

pub fn validate_game(game: &ExplicitGame) -> Result<GameDiagnostics> {
    if game.n_searchers() > MAX_VALIDATE_SEARCHERS {
        return Err(Error::TooLarge {
            what: "submodularity check",
            size: game.n_searchers() as u64,
            limit: MAX_VALIDATE_SEARCHERS as u64,
        });
    }
    ValueTable::new(game)?.diagnostics()
}

/// Evaluates `v̄(B) − v̄(A) ≥ Σ_{i∈B∖A} (v̄(B) − v̄(B∖{i}))` for `A ⊆ B`.
pub fn check_lemma1(game: &ExplicitGame, a: Coalition, b: Coalition) -> Result<bool> {
    game.check_coalition(a)?;
    game.check_coalition(b)?;
    if !a.is_subset_of(b) {
        return Err(Error::NotNested {
            inner: a.to_vec(),
            outer: b.to_vec(),
        });
    }
    let vb = best_value(game, b);
    let lhs = vb - best_value(game, a);
    let rhs: f64 = b
        .difference(a)
        .iter()
        .map(|i| vb - best_value(game, b.without(i)))
        .sum();
    Ok(lhs >= rhs - TOLERANCE)
}

pub fn core_membership_bruteforce(game: &ExplicitGame, x: &Allocation) -> Result<bool> {
    x.check_len(game)?;
    Ok(ValueTable::new(game)?.in_core(x))
}

pub fn core_membership_characterization(game: &ExplicitGame, x: &Allocation) -> Result<bool> {
    x.check_len(game)?;
    let table = ValueTable::new(game)?;
    if !table.diagnostics()?.is_submodular {
        return Err(Error::NotSubmodular);
    }
    Ok(table.in_core_by_bounds(x))
}

/// The core point giving each searcher its marginal contribution.
pub fn searcher_optimal_allocation(game: &ExplicitGame) -> Result<Allocation> {
    let table = ValueTable::new(game)?;
    if !table.diagnostics()?.is_submodular {
        return Err(Error::NotSubmodular);
    }
    searcher_optimal_from_table(&table)
}

pub(crate) fn searcher_optimal_from_table(table: &ValueTable) -> Result<Allocation> {
    let shares = table.marginals();
    let residual = table.grand_value() - shares.iter().sum::<f64>();
    Allocation::from_computed(shares, residual)
}

/// The validator takes the whole grand-coalition value.
pub fn validator_optimal_allocation(game: &ExplicitGame) -> Allocation {
    let grand = best_value(game, game.grand_coalition());
    Allocation::from_computed(vec![0.0; game.n_searchers()], grand)
        .expect("grand value is nonnegative because the empty block is always feasible")
}
