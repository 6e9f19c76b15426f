use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use mev_core::bundles::{paper_capacity_floor, to_general_game, validator_floor, BundleMatrix};
use mev_core::empirics::{
    group_median_profit, histogram_counts, ols_log_median, parse_backrun_csv, OlsOptions,
};
use mev_core::game::{
    validator_optimal_allocation, ExplicitGame, ValueTable, MAX_VALIDATE_SEARCHERS,
};
use mev_core::mechanisms::{gsp_bundle_auction, vcg_payments};
use mev_core::report::{flatten_json, round_json, sig6};
use mev_core::stochastic::{
    calibrate_p, exact_event_probabilities, run_trials, solve_phi, threshold_sweep, SimConfig,
    SWEEP_CSV_HEADER,
};

#[derive(Parser)]
#[command(
    name = "mevsim",
    version,
    about = "Core allocations and searcher-competition experiments for MEV blocks"
)]
struct Cli {
    /// Seed for all randomness; required by simulate and sweep.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (a directory for `empirics`); stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format; defaults depend on the subcommand.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Values, diagnostics, extreme core points and settlements for a game
    /// (`.json`) or a bundle matrix (CSV with header s0..s{n-1}).
    AnalyzeGame {
        file: PathBuf,
        /// Block capacity for matrix input.
        #[arg(long)]
        capacity: Option<usize>,
    },
    /// Monte Carlo run of the Bernoulli discovery model.
    Simulate {
        /// JSON file with n, m, p, trials and optional capacity.
        #[arg(long, conflicts_with_all = ["n", "m", "p", "trials", "capacity"])]
        config: Option<PathBuf>,
        #[arg(long, required_unless_present = "config")]
        n: Option<usize>,
        #[arg(long, required_unless_present = "config")]
        m: Option<usize>,
        #[arg(long, required_unless_present = "config")]
        p: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long)]
        capacity: Option<usize>,
    },
    /// Simulated and exact event frequencies over a grid of p.
    Sweep {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        /// Comma-separated probabilities.
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long)]
        capacity: Option<usize>,
    },
    /// Discovery probability at which a fraction q of opportunities is
    /// found by fewer than two of n searchers.
    Calibrate { n: usize, q: f64 },
    /// Solves (1+φ)e^{−φ} = α/e.
    Phi { alpha: f64 },
    /// Median profit by backrun count, histogram and log-median regression.
    Empirics {
        file: PathBuf,
        #[arg(long, default_value_t = 5)]
        bin_width: u64,
        /// Weight groups by size in the regression.
        #[arg(long)]
        weighted: bool,
    },
}

/// Finished output, written only after the whole command succeeded.
enum Output {
    Single(String),
    Files(Vec<(&'static str, String)>),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli).and_then(|output| emit(cli.out.as_deref(), output)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<Output> {
    match &cli.command {
        Command::AnalyzeGame { file, capacity } => {
            let report = analyze(file, *capacity)?;
            Ok(Output::Single(render_record(
                report,
                cli.format.unwrap_or(Format::Json),
            )?))
        }
        Command::Simulate {
            config,
            n,
            m,
            p,
            trials,
            capacity,
        } => {
            let seed = require_seed(cli.seed, "simulate")?;
            let config = match config {
                Some(path) => load_sim_config(path, seed)?,
                None => SimConfig {
                    n: n.expect("required by clap"),
                    m: m.expect("required by clap"),
                    p: p.expect("required by clap"),
                    capacity: *capacity,
                    trials: *trials,
                    seed,
                },
            };
            let report = run_trials(&config)?;
            let exact = if config.capacity.is_none() {
                Some(exact_event_probabilities(config.n, config.m, config.p)?)
            } else {
                None
            };
            let record = json!({ "report": report, "exact": exact });
            Ok(Output::Single(render_record(
                record,
                cli.format.unwrap_or(Format::Json),
            )?))
        }
        Command::Sweep {
            n,
            m,
            grid,
            trials,
            capacity,
        } => {
            let seed = require_seed(cli.seed, "sweep")?;
            let rows = threshold_sweep(*n, *m, grid, *trials, *capacity, seed)?;
            let text = match cli.format.unwrap_or(Format::Csv) {
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record(SWEEP_CSV_HEADER)?;
                    for row in &rows {
                        w.write_record(row.csv_fields())?;
                    }
                    csv_string(w)?
                }
                Format::Json => json_string(&rows)?,
            };
            Ok(Output::Single(text))
        }
        Command::Calibrate { n, q } => {
            let p = calibrate_p(*n, *q)?;
            Ok(Output::Single(render_scalar(
                &[("n", n.to_string()), ("q", sig6(*q)), ("p", sig6(p))],
                cli.format.unwrap_or(Format::Csv),
            )?))
        }
        Command::Phi { alpha } => {
            let phi = solve_phi(*alpha)?;
            Ok(Output::Single(render_scalar(
                &[("alpha", sig6(*alpha)), ("phi", sig6(phi))],
                cli.format.unwrap_or(Format::Csv),
            )?))
        }
        Command::Empirics {
            file,
            bin_width,
            weighted,
        } => empirics(cli, file, *bin_width, *weighted),
    }
}

fn require_seed(seed: Option<u64>, command: &str) -> Result<u64> {
    seed.with_context(|| format!("`{command}` needs --seed"))
}

fn load_sim_config(path: &Path, seed: u64) -> Result<SimConfig> {
    let text = read(path)?;
    let mut doc: Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let obj = doc
        .as_object_mut()
        .with_context(|| format!("{} must hold a JSON object", path.display()))?;
    match obj.get("seed").map(Value::as_u64) {
        None => {
            obj.insert("seed".into(), json!(seed));
        }
        Some(Some(s)) if s == seed => {}
        Some(_) => bail!("seed in {} differs from --seed {seed}", path.display()),
    }
    let config: SimConfig =
        serde_json::from_value(doc).with_context(|| format!("parsing {}", path.display()))?;
    Ok(config)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn is_json(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn analyze(file: &Path, capacity: Option<usize>) -> Result<Value> {
    let text = read(file)?;
    let (game, matrix) = if is_json(file) {
        if capacity.is_some() {
            bail!("--capacity applies to matrix input only");
        }
        let game: ExplicitGame =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", file.display()))?;
        (game, None)
    } else {
        let matrix = BundleMatrix::read_csv(text.as_bytes())
            .with_context(|| format!("parsing {}", file.display()))?;
        (to_general_game(&matrix, capacity)?, Some(matrix))
    };

    let table = ValueTable::new(&game)?;
    let diagnostics = if game.n_searchers() <= MAX_VALIDATE_SEARCHERS {
        Some(table.diagnostics()?)
    } else {
        None
    };
    let submodular = diagnostics.as_ref().is_some_and(|d| d.is_submodular);
    let searcher_optimal = if submodular {
        let marginals = table.marginals();
        let residual = table.grand_value() - marginals.iter().sum::<f64>();
        Some(json!({ "searcher_shares": marginals, "validator_share": residual }))
    } else {
        None
    };
    let vcg = if game.is_passive() {
        Some(vcg_payments(&game)?)
    } else {
        None
    };

    let mut report = json!({
        "n_searchers": game.n_searchers(),
        "n_blocks": game.blocks().len(),
        "grand_value": table.grand_value(),
        "marginals": table.marginals(),
        "diagnostics": diagnostics,
        "searcher_optimal": searcher_optimal,
        "validator_optimal": validator_optimal_allocation(&game),
        "vcg": vcg,
    });
    if let Some(matrix) = matrix {
        let obj = report.as_object_mut().expect("report is an object");
        match capacity {
            None => {
                obj.insert(
                    "validator_floor".into(),
                    serde_json::to_value(validator_floor(&matrix))?,
                );
                obj.insert(
                    "gsp".into(),
                    serde_json::to_value(gsp_bundle_auction(&matrix))?,
                );
            }
            Some(k) => {
                obj.insert(
                    "capacity_floor".into(),
                    serde_json::to_value(paper_capacity_floor(&matrix, k))?,
                );
            }
        }
    }
    Ok(report)
}

fn empirics(cli: &Cli, file: &Path, bin_width: u64, weighted: bool) -> Result<Output> {
    let text = read(file)?;
    let records = parse_backrun_csv(text.as_bytes())
        .with_context(|| format!("parsing {}", file.display()))?;
    let groups = group_median_profit(&records);
    let bins = histogram_counts(&records, bin_width)?;
    let fit = ols_log_median(
        &groups,
        OlsOptions {
            weight_by_size: weighted,
        },
    )?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["backrun_count", "median_profit", "size"])?;
    for g in &groups {
        w.write_record([
            g.backrun_count.to_string(),
            sig6(g.median),
            g.size.to_string(),
        ])?;
    }
    let medians = csv_string(w)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["lo", "hi", "count"])?;
    for b in &bins {
        w.write_record([b.lo.to_string(), b.hi.to_string(), b.count.to_string()])?;
    }
    let histogram = csv_string(w)?;

    let regression = render_record(
        serde_json::to_value(&fit)?,
        cli.format.unwrap_or(Format::Json),
    )?;
    let regression_name = match cli.format.unwrap_or(Format::Json) {
        Format::Json => "regression.json",
        Format::Csv => "regression.csv",
    };

    Ok(match cli.out {
        Some(_) => Output::Files(vec![
            ("medians.csv", medians),
            ("histogram.csv", histogram),
            (regression_name, regression),
        ]),
        None => Output::Single(format!("{medians}\n{histogram}\n{regression}")),
    })
}

fn render_record(mut value: Value, format: Format) -> Result<String> {
    round_json(&mut value);
    match format {
        Format::Json => json_string(&value),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["key", "value"])?;
            for (k, v) in flatten_json(&value) {
                w.write_record([k, v])?;
            }
            csv_string(w)
        }
    }
}

fn render_scalar(fields: &[(&str, String)], format: Format) -> Result<String> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(fields.iter().map(|f| f.0))?;
            w.write_record(fields.iter().map(|f| f.1.as_str()))?;
            csv_string(w)
        }
        Format::Json => {
            let mut map = serde_json::Map::new();
            for (k, v) in fields {
                let parsed: Value =
                    serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.clone()));
                map.insert(k.to_string(), parsed);
            }
            json_string(&Value::Object(map))
        }
    }
}

fn json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut value = serde_json::to_value(value)?;
    round_json(&mut value);
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| anyhow::anyhow!("{}", e.error()))?;
    Ok(String::from_utf8(bytes)?)
}

fn emit(out: Option<&Path>, output: Output) -> Result<()> {
    match (out, output) {
        (None, Output::Single(text)) => {
            print!("{text}");
            Ok(())
        }
        (Some(path), Output::Single(text)) => write_atomic(path, &text),
        (Some(dir), Output::Files(files)) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            files
                .iter()
                .try_for_each(|(name, text)| write_atomic(&dir.join(name), text))
        }
        (None, Output::Files(_)) => unreachable!("multi-file output requires --out"),
    }
}

/// Writes through a sibling temporary file so a failed run never leaves a
/// truncated output behind.
fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, text).with_context(|| format!("writing {}", path.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))
}
