//! Backrun-bundle data: ingestion, median profit per backrun count,
//! histograms, and the log-median regression.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::bundles::{csv_error, validator_floor, BundleMatrix};
use crate::error::{Error, Result};

pub const BACKRUN_CSV_HEADER: [&str; 3] = ["target_id", "backrun_count", "profit"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackrunRecord {
    pub target_id: String,
    /// Feasible backrun bundles submitted for the target transaction.
    pub backrun_count: u64,
    /// Profit captured jointly by the proposer and the user refund.
    pub profit: f64,
}

/// Reads `target_id,backrun_count,profit` rows. A completely empty input
/// yields no records; otherwise the header must be present.
pub fn parse_backrun_csv<R: Read>(reader: R) -> Result<Vec<BackrunRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
    let expected = || Error::MissingHeader {
        expected: BACKRUN_CSV_HEADER.join(","),
    };
    if header.is_empty() {
        return match rdr.records().next() {
            None => Ok(Vec::new()),
            Some(_) => Err(expected()),
        };
    }
    if header.iter().ne(BACKRUN_CSV_HEADER) {
        return Err(expected());
    }

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(e, 0))?;
        let line = row.position().map_or(0, |p| p.line());
        let err = |message: String| Error::Parse { line, message };
        let backrun_count = row[1].parse::<u64>().map_err(|_| {
            err(format!(
                "backrun_count `{}` is not a nonnegative integer",
                &row[1]
            ))
        })?;
        let profit = row[2]
            .parse::<f64>()
            .map_err(|_| err(format!("profit `{}` is not a number", &row[2])))?;
        if !profit.is_finite() || profit < 0.0 {
            return Err(err(format!(
                "profit {profit} must be finite and nonnegative"
            )));
        }
        records.push(BackrunRecord {
            target_id: row[0].to_string(),
            backrun_count,
            profit,
        });
    }
    Ok(records)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupMedian {
    pub backrun_count: u64,
    pub median: f64,
    pub size: usize,
}

fn median_of_sorted(values: &[f64]) -> f64 {
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median profit per distinct backrun count, ascending by count.
pub fn group_median_profit(records: &[BackrunRecord]) -> Vec<GroupMedian> {
    let mut groups: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for r in records {
        groups.entry(r.backrun_count).or_default().push(r.profit);
    }
    groups
        .into_iter()
        .map(|(backrun_count, mut profits)| {
            profits.sort_by(f64::total_cmp);
            GroupMedian {
                backrun_count,
                median: median_of_sorted(&profits),
                size: profits.len(),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBin {
    /// Inclusive bounds on the backrun count.
    pub lo: u64,
    pub hi: u64,
    pub count: usize,
}

/// Record counts in consecutive bins `[0, w−1], [w, 2w−1], …` up to the
/// bin holding the largest count. Empty intermediate bins are kept.
pub fn histogram_counts(records: &[BackrunRecord], bin_width: u64) -> Result<Vec<HistogramBin>> {
    if bin_width == 0 {
        return Err(Error::InvalidParameter(
            "bin width must be at least 1".into(),
        ));
    }
    let Some(max) = records.iter().map(|r| r.backrun_count).max() else {
        return Ok(Vec::new());
    };
    let n_bins = (max / bin_width + 1) as usize;
    let mut counts = vec![0usize; n_bins];
    for r in records {
        counts[(r.backrun_count / bin_width) as usize] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(b, count)| {
            let lo = b as u64 * bin_width;
            HistogramBin {
                lo,
                hi: lo + bin_width - 1,
                count,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
    pub n_obs: usize,
    pub stderr_intercept: f64,
    pub stderr_slope: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OlsOptions {
    /// Weight each group by its size instead of counting it once.
    pub weight_by_size: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    #[serde(flatten)]
    pub result: RegressionResult,
    /// Groups left out because their median was zero.
    pub dropped_zero_groups: usize,
}

/// Least squares of `ln(median)` on the backrun count, with intercept.
/// Standard errors use the unbiased residual variance `SSR / (N − 2)`.
pub fn ols_log_median(groups: &[GroupMedian], options: OlsOptions) -> Result<OlsFit> {
    let usable: Vec<&GroupMedian> = groups.iter().filter(|g| g.median > 0.0).collect();
    let dropped_zero_groups = groups.len() - usable.len();
    if usable.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "regression needs at least 3 groups with positive median, found {}",
            usable.len()
        )));
    }
    let obs: Vec<(f64, f64, f64)> = usable
        .iter()
        .map(|g| {
            let w = if options.weight_by_size {
                g.size as f64
            } else {
                1.0
            };
            (g.backrun_count as f64, g.median.ln(), w)
        })
        .collect();

    let sw: f64 = obs.iter().map(|o| o.2).sum();
    let x_bar = obs.iter().map(|&(x, _, w)| w * x).sum::<f64>() / sw;
    let y_bar = obs.iter().map(|&(_, y, w)| w * y).sum::<f64>() / sw;
    let sxx: f64 = obs.iter().map(|&(x, _, w)| w * (x - x_bar).powi(2)).sum();
    let sxy: f64 = obs
        .iter()
        .map(|&(x, y, w)| w * (x - x_bar) * (y - y_bar))
        .sum();
    let syy: f64 = obs.iter().map(|&(_, y, w)| w * (y - y_bar).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidParameter(
            "backrun counts have zero variance; the slope is not identified".into(),
        ));
    }

    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;
    let ssr: f64 = obs
        .iter()
        .map(|&(x, y, w)| w * (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ssr / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let n_obs = obs.len();
    let sigma2 = ssr / (n_obs - 2) as f64;
    Ok(OlsFit {
        result: RegressionResult {
            intercept,
            slope,
            r_squared,
            n_obs,
            stderr_intercept: (sigma2 * (1.0 / sw + x_bar * x_bar / sxx)).sqrt(),
            stderr_slope: (sigma2 / sxx).sqrt(),
        },
        dropped_zero_groups,
    })
}

/// One record per opportunity: the number of searchers that found it and
/// the validator's share of it at the searcher-optimal core point.
pub fn records_from_matrix(matrix: &BundleMatrix, id_prefix: &str) -> Vec<BackrunRecord> {
    let floor = validator_floor(matrix);
    (0..matrix.n_opportunities())
        .map(|i| BackrunRecord {
            target_id: format!("{id_prefix}{i}"),
            backrun_count: matrix.coverage(i) as u64,
            profit: floor.per_opportunity[i],
        })
        .collect()
}
