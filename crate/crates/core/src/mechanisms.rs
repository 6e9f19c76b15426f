//! Payment rules that settle the block game: VCG, payments implementing a
//! chosen core allocation, the per-opportunity second-price auction, and the
//! misreport that undercuts any core-selecting rule charging above VCG.

use serde::{Deserialize, Serialize};

use crate::bundles::{validator_floor, winning_assignment, BundleMatrix, OpportunityAssignment};
use crate::error::{Error, Result};
use crate::game::{
    coalition_value, validate_game, Allocation, CandidateBlock, ExplicitGame, GameDiagnostics,
    ValueTable, MAX_VALIDATE_SEARCHERS,
};
use crate::TOLERANCE;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaymentOutcome {
    /// Index of the realized block.
    pub block: usize,
    /// Transfer from each searcher to the validator.
    pub payments: Vec<f64>,
    /// Each searcher's value from the realized block minus its payment.
    pub utilities: Vec<f64>,
    /// Payments plus the validator's own value from the block.
    pub validator_revenue: f64,
}

impl PaymentOutcome {
    fn settle(game: &ExplicitGame, block: usize, payments: Vec<f64>) -> Self {
        let chosen = &game.blocks()[block];
        let utilities = chosen
            .searcher_values
            .iter()
            .zip(&payments)
            .map(|(v, p)| v - p)
            .collect();
        let validator_revenue = payments.iter().sum::<f64>() + chosen.validator_value;
        PaymentOutcome {
            block,
            payments,
            utilities,
            validator_revenue,
        }
    }
}

/// Welfare-maximizing block; the lowest index wins ties, where totals
/// within [`TOLERANCE`] count as tied.
pub fn optimal_block(game: &ExplicitGame) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (b, block) in game.blocks().iter().enumerate() {
        let v = block.total_value();
        if v > best_value + TOLERANCE {
            best = b;
            best_value = v;
        }
    }
    best
}

fn require_passive(game: &ExplicitGame) -> Result<()> {
    match game
        .blocks()
        .iter()
        .enumerate()
        .find(|(_, b)| b.validator_value != 0.0)
    {
        Some((block, b)) => Err(Error::ActiveValidator {
            block,
            value: b.validator_value,
        }),
        None => Ok(()),
    }
}

/// VCG payments `p_i = v̄(𝒮∖{i}) − Σ_{j≠i} v_j(B*)` for a passive proposer.
pub fn vcg_payments(game: &ExplicitGame) -> Result<PaymentOutcome> {
    require_passive(game)?;
    let block = optimal_block(game);
    let chosen = &game.blocks()[block];
    let total = chosen.total_value();
    let all = game.grand_coalition();
    let payments = (0..game.n_searchers())
        .map(|i| {
            let others = total - chosen.searcher_values[i];
            Ok(coalition_value(game, all.without(i))? - others)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(PaymentOutcome::settle(game, block, payments))
}

/// Realizes `x` at the optimal block with payments `p_i = v_i(B*) − x_i`.
pub fn payments_for_allocation(game: &ExplicitGame, x: &Allocation) -> Result<PaymentOutcome> {
    if x.searcher_shares().len() != game.n_searchers() {
        return Err(Error::InvalidAllocation(format!(
            "allocation has {} searcher shares, game has {} searchers",
            x.searcher_shares().len(),
            game.n_searchers()
        )));
    }
    if !ValueTable::new(game)?.in_core(x) {
        return Err(Error::NotInCore);
    }
    let block = optimal_block(game);
    let chosen = &game.blocks()[block];
    let payments = chosen
        .searcher_values
        .iter()
        .zip(x.searcher_shares())
        .map(|(v, share)| v - share)
        .collect();
    let mut outcome = PaymentOutcome::settle(game, block, payments);
    // v − (v − x) can be off by an ulp; the utilities are the allocation
    outcome.utilities = x.searcher_shares().to_vec();
    Ok(outcome)
}

/// Range of payments searcher `j` can be charged at the optimal block by
/// any core-selecting rule: from its VCG payment up to its full value.
pub fn core_payment_interval(game: &ExplicitGame, j: usize) -> Result<(f64, f64)> {
    game.check_index(j)?;
    let block = &game.blocks()[optimal_block(game)];
    let all = game.grand_coalition();
    let floor =
        coalition_value(game, all.without(j))? - (block.total_value() - block.searcher_values[j]);
    Ok((floor, block.searcher_values[j]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GspOutcome {
    pub assignment: OpportunityAssignment,
    pub payments: Vec<f64>,
    pub utilities: Vec<f64>,
    pub revenue: f64,
}

/// Per-opportunity second-price auction: the top bidder (lowest index on
/// ties) wins and pays the second-highest value.
pub fn gsp_bundle_auction(matrix: &BundleMatrix) -> GspOutcome {
    let assignment = winning_assignment(matrix);
    let floor = validator_floor(matrix);
    let n = matrix.n_searchers();
    let mut payments = vec![0.0; n];
    let mut utilities = vec![0.0; n];
    for (i, winner) in assignment.winners.iter().enumerate() {
        if let Some(j) = *winner {
            payments[j] += floor.per_opportunity[i];
            utilities[j] += matrix.value(i, j) - floor.per_opportunity[i];
        }
    }
    GspOutcome {
        assignment,
        payments,
        utilities,
        revenue: floor.total,
    }
}

/// A reported valuation for one searcher that keeps the observed block
/// optimal while capping what any core-selecting rule can charge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Misreport {
    pub searcher: usize,
    pub block: usize,
    /// Game with the searcher's values replaced by its report.
    pub game: ExplicitGame,
    /// Reported value at the optimal block.
    pub reported_value: f64,
    pub vcg_floor: f64,
    pub observed_payment: f64,
    /// Largest core-consistent payment in the modified game.
    pub payment_bound: f64,
    /// Diagnostics of the modified game; absent above the validation size
    /// limit.
    pub diagnostics: Option<GameDiagnostics>,
}

/// Builds the profitable misreport for searcher `j` against an outcome
/// that charges it above its VCG payment.
///
/// The report at the observed block is the midpoint between the VCG floor
/// and the observed payment. Every block containing `j`'s bundle is
/// lowered by the same amount `δ`; blocks without it are untouched. The
/// ranking among `j`'s blocks is unchanged and blocks without `j` stay
/// strictly below the observed one, so it remains optimal. The modified
/// value is `max(v̄(S∖j), v̄(S) − δ)` on coalitions containing `j`, which is
/// monotone; submodularity holds for bundle games and is reported in
/// [`Misreport::diagnostics`] otherwise.
pub fn construct_misreport(
    game: &ExplicitGame,
    j: usize,
    observed: &PaymentOutcome,
) -> Result<Misreport> {
    game.check_index(j)?;
    let n = game.n_searchers();
    if observed.payments.len() != n {
        return Err(Error::InvalidParameter(format!(
            "observed outcome has {} payments, game has {n} searchers",
            observed.payments.len()
        )));
    }
    let blocks = game.blocks();
    let star = observed.block;
    let chosen = blocks
        .get(star)
        .ok_or_else(|| Error::InvalidParameter(format!("observed block {star} does not exist")))?;
    let all = game.grand_coalition();
    let grand = coalition_value(game, all)?;
    if chosen.total_value() < grand - TOLERANCE {
        return Err(Error::InvalidParameter(format!(
            "observed block {star} is not welfare-optimal"
        )));
    }

    let star_others = chosen.total_value() - chosen.searcher_values[j];
    let floor = coalition_value(game, all.without(j))? - star_others;
    let payment = observed.payments[j];
    if payment <= floor + TOLERANCE {
        return Err(Error::AlreadyAtFloor {
            searcher: j,
            payment,
            floor,
        });
    }

    let reported = 0.5 * (floor + payment);
    let shift = chosen.searcher_values[j] - reported;
    let modified: Vec<CandidateBlock> = blocks
        .iter()
        .enumerate()
        .map(|(b, block)| {
            let mut block = block.clone();
            if b == star {
                block.searcher_values[j] = reported;
            } else if block.contributors.contains(j) {
                block.searcher_values[j] -= shift;
            }
            block
        })
        .collect();
    let game = ExplicitGame::new(n, modified)?;
    let diagnostics = if n <= MAX_VALIDATE_SEARCHERS {
        Some(validate_game(&game)?)
    } else {
        None
    };

    Ok(Misreport {
        searcher: j,
        block: star,
        game,
        reported_value: reported,
        vcg_floor: floor,
        observed_payment: payment,
        payment_bound: reported,
        diagnostics,
    })
}

/// The searcher's true utility under the misreport when the modified game
/// is settled at `payment`, compared with the utility it had at `observed`.
pub fn misreport_gain(original: &ExplicitGame, misreport: &Misreport, payment: f64) -> f64 {
    let true_value = original.blocks()[misreport.block].searcher_values[misreport.searcher];
    (true_value - payment) - (true_value - misreport.observed_payment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundles::to_general_game;
    use crate::coalition::Coalition;
    use crate::game::{validate_game, validator_optimal_allocation};

    fn sample_game() -> ExplicitGame {
        to_general_game(
            &BundleMatrix::from_rows(vec![vec![3.0, 1.0], vec![0.0, 2.0]]).unwrap(),
            None,
        )
        .unwrap()
    }

    fn single(value: f64) -> ExplicitGame {
        ExplicitGame::new(
            1,
            vec![
                CandidateBlock::empty(1),
                CandidateBlock {
                    contributors: Coalition::singleton(0),
                    searcher_values: vec![value],
                    validator_value: 0.0,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn optimal_block_selection() {
        let g = sample_game();
        let b = optimal_block(&g);
        assert_eq!(g.blocks()[b].searcher_values, vec![3.0, 2.0]);
        assert_eq!(g.blocks()[b].contributors, Coalition::full(2));

        let empty = ExplicitGame::new(2, vec![CandidateBlock::empty(2)]).unwrap();
        assert_eq!(optimal_block(&empty), 0);

        let tie = ExplicitGame::new(
            1,
            vec![
                CandidateBlock::empty(1),
                CandidateBlock {
                    contributors: Coalition::singleton(0),
                    searcher_values: vec![2.0],
                    validator_value: 0.0,
                },
                CandidateBlock {
                    contributors: Coalition::singleton(0),
                    searcher_values: vec![2.0],
                    validator_value: 0.0,
                },
            ],
        )
        .unwrap();
        assert_eq!(optimal_block(&tie), 1);
    }

    #[test]
    fn vcg() {
        let out = vcg_payments(&sample_game()).unwrap();
        assert_eq!(out.payments, vec![1.0, 0.0]);
        assert_eq!(out.utilities, vec![2.0, 2.0]);
        assert_eq!(out.validator_revenue, 1.0);

        let out = vcg_payments(&single(7.0)).unwrap();
        assert_eq!(out.payments, vec![0.0]);
        assert_eq!(out.utilities, vec![7.0]);

        let dup = to_general_game(
            &BundleMatrix::from_rows(vec![vec![2.0, 2.0]]).unwrap(),
            None,
        )
        .unwrap();
        let out = vcg_payments(&dup).unwrap();
        assert_eq!(
            dup.blocks()[out.block].contributors,
            Coalition::singleton(0)
        );
        assert_eq!(out.payments, vec![2.0, 0.0]);
        assert_eq!(out.utilities, vec![0.0, 0.0]);
    }

    #[test]
    fn vcg_refuses_active_validator() {
        let g = ExplicitGame::new(
            1,
            vec![
                CandidateBlock::empty(1),
                CandidateBlock {
                    contributors: Coalition::singleton(0),
                    searcher_values: vec![1.0],
                    validator_value: 0.5,
                },
            ],
        )
        .unwrap();
        assert!(matches!(
            vcg_payments(&g),
            Err(Error::ActiveValidator { block: 1, .. })
        ));
    }

    #[test]
    fn allocation_payments() {
        let g = sample_game();
        let pay = |shares: [f64; 2], v: f64| {
            payments_for_allocation(&g, &Allocation::new(shares.to_vec(), v).unwrap())
        };
        let out = pay([0.0, 0.0], 5.0).unwrap();
        assert_eq!(out.payments, vec![3.0, 2.0]);
        assert_eq!(out.validator_revenue, 5.0);
        assert_eq!(pay([2.0, 2.0], 1.0).unwrap().payments, vec![1.0, 0.0]);
        let out = pay([1.0, 1.0], 3.0).unwrap();
        assert_eq!(out.payments, vec![2.0, 1.0]);
        assert_eq!(out.utilities, vec![1.0, 1.0]);
        assert_eq!(pay([3.0, 2.0], 0.0), Err(Error::NotInCore));
    }

    #[test]
    fn gsp() {
        let m = BundleMatrix::from_rows(vec![vec![3.0, 1.0], vec![0.0, 2.0]]).unwrap();
        let out = gsp_bundle_auction(&m);
        assert_eq!(out.payments, vec![1.0, 0.0]);
        assert_eq!(out.utilities, vec![2.0, 2.0]);
        assert_eq!(out.revenue, 1.0);

        let out = gsp_bundle_auction(&BundleMatrix::from_rows(vec![vec![2.0, 2.0]]).unwrap());
        assert_eq!(out.assignment.winners, vec![Some(0)]);
        assert_eq!(out.payments, vec![2.0, 0.0]);
        assert_eq!(out.utilities, vec![0.0, 0.0]);
        assert_eq!(out.revenue, 2.0);

        let out = gsp_bundle_auction(&BundleMatrix::zeros(3, 2).unwrap());
        assert_eq!(out.payments, vec![0.0, 0.0]);
        assert_eq!(out.revenue, 0.0);
    }

    #[test]
    fn rounding_noise_does_not_break_ties() {
        let mut blocks = vec![CandidateBlock::empty(2)];
        for values in [[0.1 + 0.2, 0.3], [0.3, 0.1 + 0.2 + 1e-15]] {
            blocks.push(CandidateBlock {
                contributors: Coalition::from_indices([0, 1]),
                searcher_values: values.to_vec(),
                validator_value: 0.0,
            });
        }
        let g = ExplicitGame::new(2, blocks).unwrap();
        assert!(g.blocks()[2].total_value() > g.blocks()[1].total_value());
        assert_eq!(optimal_block(&g), 1);
    }

    #[test]
    fn misreport_against_first_price() {
        let g = sample_game();
        let first_price = payments_for_allocation(&g, &validator_optimal_allocation(&g)).unwrap();
        assert_eq!(first_price.payments, vec![3.0, 2.0]);
        let mis = construct_misreport(&g, 0, &first_price).unwrap();
        assert_eq!(mis.vcg_floor, 1.0);
        assert_eq!(mis.reported_value, 2.0);
        assert_eq!(mis.payment_bound, 2.0);
        assert_eq!(optimal_block(&mis.game), mis.block);
        let d = validate_game(&mis.game).unwrap();
        assert!(d.is_monotone && d.is_submodular);
        let (_, max_pay) = core_payment_interval(&mis.game, 0).unwrap();
        assert!(max_pay < first_price.payments[0]);
        assert!(misreport_gain(&g, &mis, max_pay) > 0.0);
    }

    #[test]
    fn misreport_single_searcher() {
        let g = single(7.0);
        let first_price = payments_for_allocation(&g, &validator_optimal_allocation(&g)).unwrap();
        let mis = construct_misreport(&g, 0, &first_price).unwrap();
        assert_eq!(mis.reported_value, 3.5);
    }

    #[test]
    fn misreport_at_floor_is_refused() {
        let g = sample_game();
        let vcg = vcg_payments(&g).unwrap();
        assert!(matches!(
            construct_misreport(&g, 0, &vcg),
            Err(Error::AlreadyAtFloor { searcher: 0, .. })
        ));
    }

    #[test]
    fn misreport_keeps_optimal_block_when_competitor_is_close() {
        // opp0: s0=3, s1=2.9; opp1: s0=3. Capping s0's values at the report
        // would let the block (opp0→s1, opp1→s0) overtake the observed one.
        let m = BundleMatrix::from_rows(vec![vec![3.0, 2.9], vec![3.0, 0.0]]).unwrap();
        let g = to_general_game(&m, None).unwrap();
        let first_price = payments_for_allocation(&g, &validator_optimal_allocation(&g)).unwrap();
        let mis = construct_misreport(&g, 0, &first_price).unwrap();
        assert_eq!(optimal_block(&mis.game), first_price.block);
        assert!(validate_game(&mis.game).unwrap().is_submodular);
        assert_eq!(
            mis.diagnostics.as_ref().map(|d| d.is_submodular),
            Some(true)
        );
        let (lo, hi) = core_payment_interval(&mis.game, 0).unwrap();
        assert!(lo <= hi && hi < first_price.payments[0]);
    }
}
