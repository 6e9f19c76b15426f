//! Independent bundles: block value is additive over opportunities and at
//! most one bundle per opportunity can be included.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::game::{Allocation, CandidateBlock, ExplicitGame};

/// Cap on the number of assignments [`to_general_game`] enumerates.
pub const MAX_ENUMERATED_BLOCKS: u64 = 1_000_000;

/// Opportunity-by-searcher value matrix: `value(i, j)` is what searcher `j`
/// extracts from opportunity `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixDocument")]
pub struct BundleMatrix {
    n: usize,
    rows: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct MatrixDocument {
    n: usize,
    rows: Vec<Vec<f64>>,
}

impl TryFrom<MatrixDocument> for BundleMatrix {
    type Error = Error;

    fn try_from(doc: MatrixDocument) -> Result<Self> {
        BundleMatrix::new(doc.n, doc.rows)
    }
}

impl BundleMatrix {
    pub fn new(n: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidMatrix(
                "at least one searcher is required".into(),
            ));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidMatrix(format!(
                    "opportunity {i} has {} values, expected {n}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::InvalidMatrix(format!(
                    "opportunity {i} has invalid value {v}; values must be finite and nonnegative"
                )));
            }
        }
        Ok(BundleMatrix { n, rows })
    }

    /// Builds a matrix from non-empty rows, taking `n` from the first row.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.first().map(Vec::len).ok_or_else(|| {
            Error::InvalidMatrix("cannot infer searcher count from zero rows".into())
        })?;
        BundleMatrix::new(n, rows)
    }

    pub fn zeros(m: usize, n: usize) -> Result<Self> {
        BundleMatrix::new(n, vec![vec![0.0; n]; m])
    }

    pub fn n_searchers(&self) -> usize {
        self.n
    }

    pub fn n_opportunities(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn value(&self, opportunity: usize, searcher: usize) -> f64 {
        self.rows[opportunity][searcher]
    }

    /// Searchers with a positive value for `opportunity`.
    pub fn coverage(&self, opportunity: usize) -> usize {
        self.rows[opportunity].iter().filter(|&&v| v > 0.0).count()
    }

    fn check_coalition(&self, c: Coalition) -> Result<()> {
        if c.span() > self.n {
            Err(Error::IndexOutOfRange {
                index: c.span() - 1,
                n_searchers: self.n,
            })
        } else {
            Ok(())
        }
    }

    /// Per-opportunity best value among `coalition`'s bundles.
    fn coalition_maxima(&self, coalition: Coalition) -> impl Iterator<Item = f64> + '_ {
        self.rows
            .iter()
            .map(move |row| coalition.iter().map(|j| row[j]).fold(0.0, f64::max))
    }

    fn column_maxima(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows
            .iter()
            .map(|row| row.iter().copied().fold(0.0, f64::max))
    }

    /// Reads the CSV layout: a header `s0,s1,…` and one row per opportunity.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
        let n = header.len();
        let expected: Vec<String> = (0..n).map(|j| format!("s{j}")).collect();
        if n == 0 || header.iter().zip(&expected).any(|(h, e)| h != e) {
            return Err(Error::MissingHeader {
                expected: if n == 0 {
                    "s0,s1,...".into()
                } else {
                    expected.join(",")
                },
            });
        }
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| csv_error(e, 0))?;
            let line = record.position().map_or(0, |p| p.line());
            let row = record
                .iter()
                .map(|field| {
                    field.parse::<f64>().map_err(|_| Error::Parse {
                        line,
                        message: format!("`{field}` is not a number"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::Parse {
                    line,
                    message: format!("value {v} must be finite and nonnegative"),
                });
            }
            rows.push(row);
        }
        BundleMatrix::new(n, rows)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let header: Vec<String> = (0..self.n).map(|j| format!("s{j}")).collect();
        wtr.write_record(&header).map_err(|e| csv_error(e, 0))?;
        for row in &self.rows {
            wtr.write_record(row.iter().map(|v| v.to_string()))
                .map_err(|e| csv_error(e, 0))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_error(err: csv::Error, fallback_line: u64) -> Error {
    let line = err.position().map_or(fallback_line, |p| p.line());
    match err.kind() {
        csv::ErrorKind::Io(_) => Error::Io(err.to_string()),
        _ => Error::Parse {
            line,
            message: err.to_string(),
        },
    }
}

/// Which searcher's bundle is included for each opportunity, if any.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpportunityAssignment {
    pub winners: Vec<Option<usize>>,
}

impl OpportunityAssignment {
    pub fn included(&self) -> usize {
        self.winners.iter().filter(|w| w.is_some()).count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidatorFloor {
    pub per_opportunity: Vec<f64>,
    pub total: f64,
}

/// Unconstrained block value for `coalition`: each opportunity goes to the
/// coalition member that values it most.
pub fn block_value(matrix: &BundleMatrix, coalition: Coalition) -> Result<f64> {
    matrix.check_coalition(coalition)?;
    Ok(matrix.coalition_maxima(coalition).sum())
}

/// [`block_value`] of the coalition of all searchers. Works for any number
/// of searchers.
pub fn grand_block_value(matrix: &BundleMatrix) -> f64 {
    matrix.column_maxima().sum()
}

/// Second-largest entry, counting ties: `(2, 2)` gives 2. Fewer than two
/// entries give 0.
pub fn second_highest(column: &[f64]) -> f64 {
    top_two(column).1
}

fn top_two(column: &[f64]) -> (f64, f64) {
    if column.len() < 2 {
        return (column.first().copied().unwrap_or(0.0), 0.0);
    }
    let mut first = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &v in column {
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    (first, second)
}

/// Column maximum with lowest-index tie-break; `None` when nobody has a
/// positive value.
fn argmax(row: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, &v) in row.iter().enumerate() {
        if v > 0.0 && best.is_none_or(|(_, b)| v > b) {
            best = Some((j, v));
        }
    }
    best.map(|(j, _)| j)
}

pub fn validator_floor(matrix: &BundleMatrix) -> ValidatorFloor {
    let per_opportunity: Vec<f64> = matrix.rows.iter().map(|r| second_highest(r)).collect();
    let total = per_opportunity.iter().sum();
    ValidatorFloor {
        per_opportunity,
        total,
    }
}

/// Winner per opportunity: the highest bidder, lowest index on ties.
pub fn winning_assignment(matrix: &BundleMatrix) -> OpportunityAssignment {
    OpportunityAssignment {
        winners: matrix.rows.iter().map(|r| argmax(r)).collect(),
    }
}

/// Searcher-optimal core point of the unconstrained game: each winner keeps
/// its value minus the runner-up value, the validator collects the floor.
pub fn searcher_optimal_bundle_allocation(
    matrix: &BundleMatrix,
) -> (Allocation, OpportunityAssignment) {
    let assignment = winning_assignment(matrix);
    let floor = validator_floor(matrix);
    let mut shares = vec![0.0; matrix.n];
    for (i, winner) in assignment.winners.iter().enumerate() {
        if let Some(j) = *winner {
            shares[j] += matrix.rows[i][j] - floor.per_opportunity[i];
        }
    }
    let allocation = Allocation::from_computed(shares, floor.total)
        .expect("winner values dominate the runner-up");
    (allocation, assignment)
}

/// Block value when at most `capacity` opportunities can be included.
pub fn capacity_block_value(
    matrix: &BundleMatrix,
    capacity: usize,
    coalition: Coalition,
) -> Result<f64> {
    matrix.check_coalition(coalition)?;
    Ok(sum_of_largest(
        matrix.coalition_maxima(coalition).collect(),
        capacity,
    ))
}

/// [`capacity_block_value`] of the coalition of all searchers.
pub fn grand_capacity_block_value(matrix: &BundleMatrix, capacity: usize) -> f64 {
    sum_of_largest(matrix.column_maxima().collect(), capacity)
}

fn sum_of_largest(mut values: Vec<f64>, k: usize) -> f64 {
    if k < values.len() {
        values.sort_unstable_by(|a, b| b.total_cmp(a));
        values.truncate(k);
    }
    values.iter().sum()
}

/// Marginal-contribution core point of the capacity-constrained game.
pub fn capacity_searcher_optimal(matrix: &BundleMatrix, capacity: usize) -> Allocation {
    let n = matrix.n;
    let tops: Vec<(f64, f64, Option<usize>)> = matrix
        .rows
        .iter()
        .map(|row| {
            let (first, second) = top_two(row);
            let unique_winner = if first > second { argmax(row) } else { None };
            (first.max(0.0), second.max(0.0), unique_winner)
        })
        .collect();
    let grand = sum_of_largest(tops.iter().map(|t| t.0).collect(), capacity);
    let shares: Vec<f64> = (0..n)
        .map(|j| {
            // dropping j only matters where j is the unique top bidder
            let without: Vec<f64> = tops
                .iter()
                .map(|&(first, second, w)| if w == Some(j) { second } else { first })
                .collect();
            grand - sum_of_largest(without, capacity)
        })
        .collect();
    let residual = grand - shares.iter().sum::<f64>();
    Allocation::from_computed(shares, residual)
        .expect("capacity-constrained bundle games are submodular")
}

/// The floor `max_{|A'| ≤ K} Σ_{i∈A'} M_i` next to the validator share that
/// the marginal-contribution computation actually yields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityFloorReport {
    pub capacity: usize,
    /// Sum of the `capacity` largest per-opportunity second-highest values.
    pub formula_floor: f64,
    /// Validator share of [`capacity_searcher_optimal`].
    pub marginal_floor: f64,
    pub agrees: bool,
}

pub fn paper_capacity_floor(matrix: &BundleMatrix, capacity: usize) -> CapacityFloorReport {
    let floors = validator_floor(matrix).per_opportunity;
    let formula_floor = sum_of_largest(floors, capacity);
    let marginal_floor = capacity_searcher_optimal(matrix, capacity).validator_share();
    CapacityFloorReport {
        capacity,
        formula_floor,
        marginal_floor,
        agrees: (formula_floor - marginal_floor).abs() <= crate::TOLERANCE,
    }
}

/// Expands the matrix into the explicit game with one block per feasible
/// assignment. Blocks are ordered as a mixed-radix counter over
/// opportunities (opportunity 0 fastest), digit 0 meaning "excluded" and
/// digit `j + 1` meaning "searcher `j` wins"; the empty block comes first.
pub fn to_general_game(matrix: &BundleMatrix, capacity: Option<usize>) -> Result<ExplicitGame> {
    let n = matrix.n;
    let m = matrix.n_opportunities();
    let radix = n as u64 + 1;
    let total = u32::try_from(m)
        .ok()
        .and_then(|m| radix.checked_pow(m))
        .filter(|&t| t <= MAX_ENUMERATED_BLOCKS)
        .ok_or(Error::TooLarge {
            what: "block enumeration",
            size: radix.saturating_pow(m.min(64) as u32),
            limit: MAX_ENUMERATED_BLOCKS,
        })?;

    let mut blocks = Vec::new();
    let mut digits = vec![0usize; m];
    for _ in 0..total {
        let included = digits.iter().filter(|&&d| d > 0).count();
        if capacity.is_none_or(|k| included <= k) {
            let mut values = vec![0.0; n];
            let mut contributors = Coalition::EMPTY;
            for (i, &d) in digits.iter().enumerate() {
                if d > 0 {
                    let j = d - 1;
                    values[j] += matrix.rows[i][j];
                    contributors = contributors.with(j);
                }
            }
            blocks.push(CandidateBlock {
                contributors,
                searcher_values: values,
                validator_value: 0.0,
            });
        }
        // advance the counter
        for d in digits.iter_mut() {
            *d += 1;
            if *d < n + 1 {
                break;
            }
            *d = 0;
        }
    }
    ExplicitGame::new(n, blocks)
}
