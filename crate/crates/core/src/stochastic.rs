//! Bernoulli searcher competition: each searcher independently finds each
//! opportunity with probability `p`, and a found opportunity is worth one
//! unit to every searcher that found it.
//!
//! Monte Carlo trials use one ChaCha stream per trial index, so reports do
//! not depend on scheduling and can be reproduced trial by trial.

use rand::distr::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundles::{
    capacity_searcher_optimal, grand_block_value, grand_capacity_block_value, validator_floor,
    BundleMatrix,
};
use crate::error::{Error, Result};
use crate::roots::bisect;
use crate::TOLERANCE;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n: usize,
    pub m: usize,
    pub p: f64,
    #[serde(default)]
    pub capacity: Option<usize>,
    pub trials: u64,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        check_model(self.n, self.p)?;
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_model(n: usize, p: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "p = {p} is not a probability"
        )));
    }
    Ok(())
}

/// Independent random stream for one trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Anything that can draw a bundle matrix for a trial.
pub trait MatrixSampler: Sync {
    fn sample(&self, rng: &mut ChaCha8Rng) -> BundleMatrix;
}

/// Unit values found independently with probability `p`.
#[derive(Clone, Copy, Debug)]
pub struct BernoulliSampler {
    pub n: usize,
    pub m: usize,
    pub p: f64,
}

impl MatrixSampler for BernoulliSampler {
    fn sample(&self, rng: &mut ChaCha8Rng) -> BundleMatrix {
        sample_matrix(self.n, self.m, self.p, rng)
    }
}

/// Bernoulli discovery with heterogeneous values: every finder extracts an
/// independent value uniform on `[1, 1 + noise]`.
#[derive(Clone, Copy, Debug)]
pub struct NoisyValueSampler {
    pub n: usize,
    pub m: usize,
    pub p: f64,
    pub noise: f64,
}

impl MatrixSampler for NoisyValueSampler {
    fn sample(&self, rng: &mut ChaCha8Rng) -> BundleMatrix {
        use rand::Rng;
        let coin = Bernoulli::new(self.p).expect("p validated to lie in [0, 1]");
        let rows = (0..self.m)
            .map(|_| {
                (0..self.n)
                    .map(|_| {
                        if coin.sample(rng) {
                            1.0 + self.noise * rng.random::<f64>()
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        BundleMatrix::new(self.n, rows).expect("sampled values are finite and nonnegative")
    }
}

pub fn sample_matrix<R: rand::Rng + ?Sized>(
    n: usize,
    m: usize,
    p: f64,
    rng: &mut R,
) -> BundleMatrix {
    let coin = Bernoulli::new(p).expect("p validated to lie in [0, 1]");
    let rows = (0..m)
        .map(|_| {
            (0..n)
                .map(|_| if coin.sample(rng) { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    BundleMatrix::new(n, rows).expect("sampled entries are 0 or 1")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    /// Number of searchers with a positive value, per opportunity.
    pub coverage_counts: Vec<usize>,
    pub block_value: f64,
    /// Validator share at the searcher-optimal core point.
    pub validator_floor_value: f64,
}

pub fn trial_stats(matrix: &BundleMatrix, capacity: Option<usize>) -> TrialStats {
    let coverage_counts = (0..matrix.n_opportunities())
        .map(|i| matrix.coverage(i))
        .collect();
    let (block, floor) = match capacity {
        None => (grand_block_value(matrix), validator_floor(matrix).total),
        Some(k) => (
            grand_capacity_block_value(matrix, k),
            capacity_searcher_optimal(matrix, k).validator_share(),
        ),
    };
    TrialStats {
        coverage_counts,
        block_value: block,
        validator_floor_value: floor,
    }
}

pub fn run_trial(config: &SimConfig, sampler: &dyn MatrixSampler, trial: u64) -> TrialStats {
    let mut rng = trial_rng(config.seed, trial);
    trial_stats(&sampler.sample(&mut rng), config.capacity)
}

#[derive(Clone, Copy, Debug, Default)]
struct Tally {
    validator_takes_all: u64,
    all_covered_twice: u64,
    all_singletons: u64,
    zero_block: u64,
    positive: u64,
    searchers_take_all_positive: u64,
}

#[derive(Clone, Copy, Debug)]
struct TrialOutcome {
    validator_takes_all: bool,
    all_covered_twice: bool,
    all_singletons: bool,
    zero_block: bool,
    searchers_take_all: bool,
    block_value: f64,
    floor: f64,
}

impl From<&TrialStats> for TrialOutcome {
    fn from(s: &TrialStats) -> Self {
        TrialOutcome {
            validator_takes_all: (s.block_value - s.validator_floor_value).abs() <= TOLERANCE,
            all_covered_twice: s.coverage_counts.iter().all(|&y| y >= 2),
            all_singletons: s.coverage_counts.iter().all(|&y| y == 1),
            zero_block: s.block_value <= TOLERANCE,
            searchers_take_all: s.validator_floor_value <= TOLERANCE,
            block_value: s.block_value,
            floor: s.validator_floor_value,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config: SimConfig,
    /// Validator share equals the whole block value.
    pub freq_validator_takes_all: f64,
    pub stderr_validator_takes_all: f64,
    /// Every opportunity found by at least two searchers.
    pub freq_all_covered_twice: f64,
    pub stderr_all_covered_twice: f64,
    /// Every opportunity found by exactly one searcher.
    pub freq_all_singletons: f64,
    pub stderr_all_singletons: f64,
    pub freq_zero_block: f64,
    pub stderr_zero_block: f64,
    /// Trials with a positive block value.
    pub positive_trials: u64,
    /// Among positive-value trials, the fraction where the validator share
    /// is zero. Absent when no trial had positive value.
    pub freq_searchers_take_all_given_positive: Option<f64>,
    pub stderr_searchers_take_all_given_positive: Option<f64>,
    pub mean_block_value: f64,
    pub mean_floor: f64,
}

fn frequency(count: u64, total: u64) -> (f64, f64) {
    let f = count as f64 / total as f64;
    (f, (f * (1.0 - f) / total as f64).sqrt())
}

pub fn run_trials(config: &SimConfig) -> Result<SimReport> {
    let sampler = BernoulliSampler {
        n: config.n,
        m: config.m,
        p: config.p,
    };
    run_trials_with(config, &sampler)
}

/// Runs `config.trials` trials drawing matrices from `sampler`.
pub fn run_trials_with(config: &SimConfig, sampler: &dyn MatrixSampler) -> Result<SimReport> {
    config.validate()?;
    // collected in trial order, so the float sums below are reproducible
    let outcomes: Vec<TrialOutcome> = (0..config.trials)
        .into_par_iter()
        .map(|t| TrialOutcome::from(&run_trial(config, sampler, t)))
        .collect();

    let mut tally = Tally::default();
    let mut block_sum = 0.0;
    let mut floor_sum = 0.0;
    for o in &outcomes {
        tally.validator_takes_all += o.validator_takes_all as u64;
        tally.all_covered_twice += o.all_covered_twice as u64;
        tally.all_singletons += o.all_singletons as u64;
        tally.zero_block += o.zero_block as u64;
        if !o.zero_block {
            tally.positive += 1;
            tally.searchers_take_all_positive += o.searchers_take_all as u64;
        }
        block_sum += o.block_value;
        floor_sum += o.floor;
    }

    let trials = config.trials;
    let (freq_validator_takes_all, stderr_validator_takes_all) =
        frequency(tally.validator_takes_all, trials);
    let (freq_all_covered_twice, stderr_all_covered_twice) =
        frequency(tally.all_covered_twice, trials);
    let (freq_all_singletons, stderr_all_singletons) = frequency(tally.all_singletons, trials);
    let (freq_zero_block, stderr_zero_block) = frequency(tally.zero_block, trials);
    let conditional =
        (tally.positive > 0).then(|| frequency(tally.searchers_take_all_positive, tally.positive));

    Ok(SimReport {
        config: config.clone(),
        freq_validator_takes_all,
        stderr_validator_takes_all,
        freq_all_covered_twice,
        stderr_all_covered_twice,
        freq_all_singletons,
        stderr_all_singletons,
        freq_zero_block,
        stderr_zero_block,
        positive_trials: tally.positive,
        freq_searchers_take_all_given_positive: conditional.map(|c| c.0),
        stderr_searchers_take_all_given_positive: conditional.map(|c| c.1),
        mean_block_value: block_sum / trials as f64,
        mean_floor: floor_sum / trials as f64,
    })
}

/// Closed-form event probabilities for the unconstrained Bernoulli model,
/// where the number of searchers finding an opportunity is Binomial(n, p).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactProbabilities {
    /// `P[Y < 2] = (1−p)^n + n p (1−p)^(n−1)`.
    pub p_y_lt2: f64,
    /// `(1 − P[Y < 2])^m`.
    pub p_all_covered_twice: f64,
    /// `(n p (1−p)^(n−1))^m`.
    pub p_all_singletons: f64,
    /// `(1−p)^(n m)`.
    pub p_zero_block: f64,
    /// No opportunity found by exactly one searcher: `(1 − P[Y = 1])^m`.
    pub p_validator_takes_all: f64,
    /// `P[all Y ≤ 1 | some Y ≥ 1]`; absent when the block is surely empty.
    pub p_searchers_take_all_given_positive: Option<f64>,
}

/// `(ln P[Y = 0], ln P[Y = 1])` for `Y ~ Binomial(n, p)`.
fn ln_low_counts(n: usize, p: f64) -> (f64, f64) {
    let ln_q = (-p).ln_1p();
    let ln_p0 = n as f64 * ln_q;
    let tail = if n == 1 { 0.0 } else { (n - 1) as f64 * ln_q };
    let ln_p1 = (n as f64).ln() + p.ln() + tail;
    (ln_p0, ln_p1)
}

/// `x^m` evaluated as `exp(m ln x)`, with `x^0 = 1`.
fn pow_from_ln(ln_x: f64, m: usize) -> f64 {
    if m == 0 {
        1.0
    } else {
        (m as f64 * ln_x).exp()
    }
}

pub fn p_y_lt2(n: usize, p: f64) -> f64 {
    let (ln_p0, ln_p1) = ln_low_counts(n, p);
    (ln_p0.exp() + ln_p1.exp()).min(1.0)
}

pub fn exact_event_probabilities(n: usize, m: usize, p: f64) -> Result<ExactProbabilities> {
    check_model(n, p)?;
    let (ln_p0, ln_p1) = ln_low_counts(n, p);
    let p0 = ln_p0.exp();
    let p1 = ln_p1.exp();
    let lt2 = (p0 + p1).min(1.0);
    let all_low = pow_from_ln(lt2.ln(), m);
    let all_zero = pow_from_ln(ln_p0, m);
    let positive = 1.0 - all_zero;
    Ok(ExactProbabilities {
        p_y_lt2: lt2,
        p_all_covered_twice: pow_from_ln((-lt2).ln_1p(), m),
        p_all_singletons: pow_from_ln(ln_p1, m),
        p_zero_block: all_zero,
        p_validator_takes_all: pow_from_ln((-p1).ln_1p(), m),
        p_searchers_take_all_given_positive: (positive > 0.0)
            .then(|| ((all_low - all_zero) / positive).clamp(0.0, 1.0)),
    })
}

/// The success probability at which a fraction `clash_fraction` of
/// opportunities is found by fewer than two of `n` searchers.
pub fn calibrate_p(n: usize, clash_fraction: f64) -> Result<f64> {
    if !(clash_fraction > 0.0 && clash_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "fraction {clash_fraction} must lie strictly between 0 and 1"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidParameter(
            "with fewer than two searchers every opportunity is found by fewer than two".into(),
        ));
    }
    // P[Y < 2] falls strictly from 1 at p = 0 to 0 at p = 1
    Ok(bisect(|p| p_y_lt2(n, p) - clash_fraction, 0.0, 1.0))
}

/// The positive root of `(1 + φ) e^(−φ) = α / e`.
pub fn solve_phi(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha = {alpha} must lie strictly between 0 and 1"
        )));
    }
    let target = alpha / std::f64::consts::E;
    let g = |phi: f64| (1.0 + phi) * (-phi).exp() - target;
    // g(0) = 1 − α/e > 0 and g decreases to −α/e
    let mut hi = 1.0;
    while g(hi) > 0.0 {
        hi *= 2.0;
    }
    Ok(bisect(g, 0.0, hi))
}

/// Block size `⌈(1 − α) m⌉` for a capacity that drops a fraction `α`.
pub fn capacity_for_alpha(alpha: f64, m: usize) -> usize {
    ((1.0 - alpha) * m as f64).ceil() as usize
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: f64,
    pub report: SimReport,
    pub exact: ExactProbabilities,
    /// `m < n`, the regime where the two-finder threshold result applies.
    pub in_hypothesis: bool,
}

/// One Monte Carlo report per grid point, sorted by `p`.
pub fn threshold_sweep(
    n: usize,
    m: usize,
    grid: &[f64],
    trials: u64,
    capacity: Option<usize>,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("probability grid is empty".into()));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.into_iter()
        .map(|p| {
            let config = SimConfig {
                n,
                m,
                p,
                capacity,
                trials,
                seed,
            };
            Ok(SweepRow {
                p,
                report: run_trials(&config)?,
                exact: exact_event_probabilities(n, m, p)?,
                in_hypothesis: m < n,
            })
        })
        .collect()
}

pub const SWEEP_CSV_HEADER: &[&str] = &[
    "p",
    "freq_validator_takes_all",
    "stderr_validator_takes_all",
    "freq_all_covered_twice",
    "stderr_all_covered_twice",
    "freq_all_singletons",
    "stderr_all_singletons",
    "freq_zero_block",
    "stderr_zero_block",
    "exact_validator_takes_all",
    "exact_all_covered_twice",
    "exact_all_singletons",
    "exact_zero_block",
    "in_hypothesis",
];

impl SweepRow {
    pub fn csv_fields(&self) -> Vec<String> {
        let r = &self.report;
        let e = &self.exact;
        let mut fields: Vec<String> = [
            self.p,
            r.freq_validator_takes_all,
            r.stderr_validator_takes_all,
            r.freq_all_covered_twice,
            r.stderr_all_covered_twice,
            r.freq_all_singletons,
            r.stderr_all_singletons,
            r.freq_zero_block,
            r.stderr_zero_block,
            e.p_validator_takes_all,
            e.p_all_covered_twice,
            e.p_all_singletons,
            e.p_zero_block,
        ]
        .iter()
        .map(|&v| crate::report::sig6(v))
        .collect();
        fields.push(self.in_hypothesis.to_string());
        fields
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(n: usize, m: usize, p: f64, trials: u64) -> SimConfig {
        SimConfig {
            n,
            m,
            p,
            capacity: None,
            trials,
            seed: 7,
        }
    }

    #[test]
    fn degenerate_samples() {
        let mut rng = trial_rng(1, 0);
        let ones = sample_matrix(3, 2, 1.0, &mut rng);
        assert!(ones.rows().iter().flatten().all(|&v| v == 1.0));
        let zeros = sample_matrix(3, 2, 0.0, &mut rng);
        assert!(zeros.rows().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn binomial_mean_of_coverage() {
        let trials = 10_000u64;
        let total: usize = (0..trials)
            .map(|t| sample_matrix(1000, 1, 0.5, &mut trial_rng(3, t)).coverage(0))
            .sum();
        let mean = total as f64 / trials as f64;
        // 3 binomial standard deviations of a single draw
        assert!((mean - 500.0).abs() <= 3.0 * 250f64.sqrt(), "mean {mean}");
    }

    #[test]
    fn streams_are_per_trial() {
        let a = sample_matrix(5, 5, 0.5, &mut trial_rng(9, 4));
        let b = sample_matrix(5, 5, 0.5, &mut trial_rng(9, 4));
        let c = sample_matrix(5, 5, 0.5, &mut trial_rng(9, 5));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn certain_discovery_gives_validator_everything() {
        let r = run_trials(&config(2, 1, 1.0, 25)).unwrap();
        assert_eq!(r.freq_validator_takes_all, 1.0);
        assert_eq!(r.stderr_validator_takes_all, 0.0);
        assert_eq!(r.freq_all_covered_twice, 1.0);
        assert_eq!(r.mean_block_value, 1.0);
    }

    #[test]
    fn impossible_discovery_gives_empty_blocks() {
        let r = run_trials(&config(4, 3, 0.0, 10)).unwrap();
        assert_eq!(r.freq_zero_block, 1.0);
        assert_eq!(r.positive_trials, 0);
        assert_eq!(r.freq_searchers_take_all_given_positive, None);
        // nobody found anything, so the validator share equals the (zero) block
        assert_eq!(r.freq_validator_takes_all, 1.0);
    }

    #[test]
    fn report_is_deterministic() {
        let c = config(30, 4, 0.05, 500);
        assert_eq!(run_trials(&c).unwrap(), run_trials(&c).unwrap());
    }

    #[test]
    fn config_validation() {
        assert!(config(0, 1, 0.5, 1).validate().is_err());
        assert!(config(1, 1, 1.5, 1).validate().is_err());
        assert!(config(1, 1, 0.5, 0).validate().is_err());
        assert!(serde_json::from_str::<SimConfig>(
            r#"{"n":3,"m":2,"p":0.1,"trials":5,"seed":1,"bogus":2}"#
        )
        .is_err());
    }

    #[test]
    fn exact_values() {
        let e = exact_event_probabilities(125, 1, 0.0095).unwrap();
        assert!((e.p_y_lt2 - 0.667).abs() < 5e-4, "{}", e.p_y_lt2);

        let e = exact_event_probabilities(1000, 3, 0.001).unwrap();
        let direct = (1000.0 * 0.001 * 0.999f64.powi(999)).powi(3);
        assert!((e.p_all_singletons - direct).abs() < 1e-12);
        assert!((e.p_all_singletons - 0.0498).abs() < 1e-4);

        let e = exact_event_probabilities(10, 4, 0.0).unwrap();
        assert_eq!(e.p_y_lt2, 1.0);
        assert_eq!(e.p_zero_block, 1.0);
        assert_eq!(e.p_searchers_take_all_given_positive, None);

        let e = exact_event_probabilities(1, 2, 1.0).unwrap();
        assert_eq!(e.p_y_lt2, 1.0);
        assert_eq!(e.p_all_singletons, 1.0);
        assert_eq!(e.p_zero_block, 0.0);

        let e = exact_event_probabilities(5, 0, 0.3).unwrap();
        assert_eq!(e.p_all_covered_twice, 1.0);
        assert_eq!(e.p_zero_block, 1.0);
    }

    #[test]
    fn exact_matches_enumeration() {
        // brute force over all 2^(n m) matrices for n = 3, m = 2
        let (n, m, p) = (3usize, 2usize, 0.3f64);
        let mut acc = [0.0f64; 4];
        for bits in 0u32..(1 << (n * m)) {
            let ones = bits.count_ones() as i32;
            let prob = p.powi(ones) * (1.0 - p).powi((n * m) as i32 - ones);
            let ys: Vec<u32> = (0..m)
                .map(|i| ((bits >> (i * n)) & ((1 << n) - 1)).count_ones())
                .collect();
            if ys.iter().all(|&y| y >= 2) {
                acc[0] += prob;
            }
            if ys.iter().all(|&y| y == 1) {
                acc[1] += prob;
            }
            if ys.iter().all(|&y| y == 0) {
                acc[2] += prob;
            }
            if ys.iter().all(|&y| y != 1) {
                acc[3] += prob;
            }
        }
        let e = exact_event_probabilities(n, m, p).unwrap();
        assert!((e.p_all_covered_twice - acc[0]).abs() < 1e-12);
        assert!((e.p_all_singletons - acc[1]).abs() < 1e-12);
        assert!((e.p_zero_block - acc[2]).abs() < 1e-12);
        assert!((e.p_validator_takes_all - acc[3]).abs() < 1e-12);
    }

    #[test]
    fn calibration() {
        let p = calibrate_p(125, 2.0 / 3.0).unwrap();
        assert!((0.0090..=0.0105).contains(&p), "{p}");
        assert!((p_y_lt2(125, p) - 2.0 / 3.0).abs() < 1e-9);

        let target = p_y_lt2(125, 0.02);
        assert!((calibrate_p(125, target).unwrap() - 0.02).abs() < 1e-10);

        assert!(calibrate_p(125, 0.9999).unwrap() < 1e-3);
        assert!(calibrate_p(125, 0.0).is_err());
        assert!(calibrate_p(125, 1.0).is_err());
        assert!(calibrate_p(1, 0.5).is_err());
    }

    #[test]
    fn phi_solver() {
        let alpha = 4.0 * (-2.0f64).exp();
        assert!((solve_phi(alpha).unwrap() - 3.0).abs() < 1e-8);

        // independent oracle: root of (1+φ)e^{−φ} = 1/e by Newton iteration
        let mut phi = 2.0f64;
        for _ in 0..50 {
            let g = (1.0 + phi) * (-phi).exp() - (-1.0f64).exp();
            let dg = -phi * (-phi).exp();
            phi -= g / dg;
        }
        assert!((solve_phi(1.0 - 1e-12).unwrap() - phi).abs() < 1e-5);
        assert!((phi - 2.146).abs() < 1e-3);

        assert!(solve_phi(0.3).unwrap() > solve_phi(0.6).unwrap());
        assert!(solve_phi(0.0).is_err());
        assert!(solve_phi(1.0).is_err());
    }

    #[test]
    fn sweep_endpoints_and_order() {
        let rows = threshold_sweep(2, 1, &[1.0, 0.0], 50, None, 11).unwrap();
        assert_eq!(rows[0].p, 0.0);
        assert_eq!(rows[0].report.freq_zero_block, 1.0);
        assert_eq!(rows[1].p, 1.0);
        assert_eq!(rows[1].report.freq_validator_takes_all, 1.0);
        assert!(rows[0].in_hypothesis);
        assert!(!threshold_sweep(1, 1, &[0.5], 5, None, 1).unwrap()[0].in_hypothesis);
        assert!(threshold_sweep(2, 1, &[], 10, None, 1).is_err());
        assert_eq!(rows[0].csv_fields().len(), SWEEP_CSV_HEADER.len());
    }

    #[test]
    fn capacity_from_alpha() {
        assert_eq!(capacity_for_alpha(0.25, 10), 8);
        assert_eq!(capacity_for_alpha(0.5, 10), 5);
    }
}
