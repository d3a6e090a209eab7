use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use burden_forecast::error::{Error, Stage, StageExt};
use burden_forecast::expr::{paper_model, Expr, PAPER_INDICES};
use burden_forecast::forecast::{forecast, trend};
use burden_forecast::ingest::{load_daly_csv, GroupConfig, TimeIndexMap};
use burden_forecast::pca::Retention;
use burden_forecast::pipeline::{
    analyse_groups, assemble_report, fit_series, read_scores_csv, run_pipeline, write_json, write_report_dir,
    write_scores_csv, write_scree_csv, FitRecord, GroupReport, PipelineConfig, PipelineReport,
};
use burden_forecast::sr::{Criterion, SrConfig};
use burden_forecast::synthetic::synthetic_burden;

#[derive(Parser)]
#[command(name = "burden-forecast", version, about = "Disease-burden indices, symbolic regression and forecasts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InputArgs {
    /// Wide DALY table: `year` then one column per cause
    #[arg(long)]
    input: PathBuf,
    /// TOML mapping of cause name to group
    #[arg(long)]
    groups: PathBuf,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    generations: usize,
    #[arg(long, default_value_t = 500)]
    population: usize,
    /// Year mapped to t = 0
    #[arg(long, default_value_t = 1989)]
    offset_year: i32,
}

impl SearchArgs {
    fn config(&self) -> SrConfig {
        SrConfig {
            seed: self.seed,
            generations: self.generations,
            population_size: self.population,
            ..SrConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a DALY table and print it normalized
    Ingest {
        #[command(flatten)]
        input: InputArgs,
        /// Write the table here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-group eigen report, scree data and component scores
    Pca {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = "kaiser")]
        retention: Retention,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Symbolic regression on one index column of a scores CSV
    Fit {
        /// Scores CSV as written by `pca`
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        index: String,
        #[command(flatten)]
        search: SearchArgs,
        /// The selected model must be defined up to this year
        #[arg(long, default_value_t = 2020)]
        horizon: i32,
        /// Fit record JSON path
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a model over a range of years
    Forecast {
        /// Expression in `t`, or the name of a built-in model
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 2017)]
        from: i32,
        #[arg(long, default_value_t = 2020)]
        horizon: i32,
        /// Last year of the fitting window
        #[arg(long, default_value_t = 2016)]
        fit_end: i32,
        #[arg(long, default_value_t = 1989)]
        offset_year: i32,
    },
    /// List the built-in models, optionally evaluated at some `t`
    PaperModels {
        #[arg(long = "t")]
        t: Vec<f64>,
    },
    /// Ingest, PCA, search, forecast and write every artifact
    Pipeline {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long, default_value_t = 2020)]
        horizon: i32,
        #[arg(long, default_value = "kaiser")]
        retention: Retention,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Combine fit records into a report directory
    Report {
        /// Fit record JSON files written by `fit`
        #[arg(long = "fit", required = true)]
        fits: Vec<PathBuf>,
        #[arg(long, default_value_t = 2020)]
        horizon: i32,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Write a synthetic DALY table and group config
    Synth {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Relative standard deviation of the multiplicative noise
        #[arg(long, default_value_t = 0.01)]
        noise: f64,
        #[arg(long, default_value = "data")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Ingest { input, out } => {
            let config = GroupConfig::load(&input.groups).stage(Stage::Ingest)?;
            let table = load_daly_csv(&input.input, &config).stage(Stage::Ingest)?;
            match out {
                Some(path) => table.write_csv(File::create(path)?)?,
                None => table.write_csv(io::stdout().lock())?,
            }
            Ok(())
        }
        Command::Pca { input, retention, out } => {
            let config = GroupConfig::load(&input.groups).stage(Stage::Ingest)?;
            let table = load_daly_csv(&input.input, &config).stage(Stage::Ingest)?;
            let analysed = analyse_groups(&table, retention)?;
            std::fs::create_dir_all(&out)?;
            let mut stdout = io::stdout().lock();
            let mut all_scores = Vec::new();
            for (model, scores) in analysed {
                write_scree_csv(File::create(out.join(format!("scree_{}.csv", model.group)))?, &model)?;
                for (k, l) in model.eigenvalues.iter().enumerate().take(model.retained) {
                    writeln!(
                        stdout,
                        "{} component {}: eigenvalue {:.3}, {:.1}% (cumulative {:.1}%)",
                        model.group,
                        k + 1,
                        l,
                        100.0 * model.explained_fraction[k],
                        100.0 * model.cumulative_fraction[k]
                    )?;
                }
                write_json(&out.join(format!("pca_{}.json", model.group)), &GroupReport::from(model))?;
                all_scores.extend(scores);
            }
            write_scores_csv(File::create(out.join("scores.csv"))?, &all_scores)?;
            Ok(())
        }
        Command::Fit { scores, index, search, horizon, out } => {
            let file = File::open(&scores).map_err(|e| io_error(&scores, e))?;
            let series = read_scores_csv(file)?;
            let series = series
                .iter()
                .find(|s| s.index_id.eq_ignore_ascii_case(&index))
                .ok_or_else(|| Error::Usage(format!("index `{index}` not found in {}", scores.display())))?;
            let record =
                fit_series(series, &search.config(), TimeIndexMap::new(search.offset_year), Criterion::default(), horizon)?;
            println!("{}: {} (r2 {:.4})", record.index, record.expression, record.metrics.r2);
            write_json(&out, &record)
        }
        Command::Forecast { model, from, horizon, fit_end, offset_year } => {
            let expr: Expr = match paper_model(&model) {
                Ok(e) => e,
                Err(_) => model.parse()?,
            };
            let table = forecast(&model, &expr, from..=horizon, TimeIndexMap::new(offset_year), fit_end)
                .stage(Stage::Forecast)?;
            let mut w = csv::Writer::from_writer(io::stdout().lock());
            w.write_record(["year", "t", "value", "kind"])?;
            for r in &table.rows {
                w.write_record([r.year.to_string(), r.t.to_string(), r.value.to_string(), r.kind.as_str().into()])?;
            }
            w.flush()?;
            if let Ok(verdict) = trend(&table) {
                eprintln!("trend {}-{}: {}", verdict.first_year, verdict.last_year, verdict.direction.as_str());
            }
            Ok(())
        }
        Command::PaperModels { t } => {
            for id in PAPER_INDICES {
                let e = paper_model(id)?;
                let values: Vec<String> = t
                    .iter()
                    .map(|t| match e.eval(*t) {
                        Ok(v) => format!("f({t}) = {v}"),
                        Err(err) => format!("f({t}): {err}"),
                    })
                    .collect();
                if values.is_empty() {
                    println!("{id}: {e}");
                } else {
                    println!("{id}: {e}  [{}]", values.join(", "));
                }
            }
            Ok(())
        }
        Command::Pipeline { input, search, horizon, retention, out } => {
            let config = GroupConfig::load(&input.groups).stage(Stage::Ingest)?;
            let table = load_daly_csv(&input.input, &config).stage(Stage::Ingest)?;
            let cfg = PipelineConfig {
                search: search.config(),
                time_map: TimeIndexMap::new(search.offset_year),
                horizon,
                retention,
                criterion: Criterion::default(),
            };
            let report = run_pipeline(&table, &cfg)?;
            write_report_dir(&out, &report).stage(Stage::Report)?;
            summarize(&report)
        }
        Command::Report { fits, horizon, out } => {
            let records = fits
                .iter()
                .map(|path| {
                    let file = File::open(path).map_err(|e| io_error(path, e))?;
                    Ok(serde_json::from_reader::<_, FitRecord>(io::BufReader::new(file))?)
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let offset = records[0].offset_year;
            if records.iter().any(|r| r.offset_year != offset) {
                return Err(Error::Usage("fit records use different offset years".into()));
            }
            let report = assemble_report(Vec::new(), records, TimeIndexMap::new(offset), horizon)?;
            write_report_dir(&out, &report).stage(Stage::Report)?;
            summarize(&report)
        }
        Command::Synth { seed, noise, out } => {
            if !(noise.is_finite() && noise >= 0.0) {
                return Err(Error::Usage(format!("noise must be a non-negative number, got {noise}")));
            }
            let (table, config) = synthetic_burden(seed, noise)?;
            std::fs::create_dir_all(&out)?;
            table.write_csv(File::create(out.join("daly.csv"))?)?;
            std::fs::write(out.join("groups.toml"), config.to_toml_string())?;
            println!("wrote {} and {}", out.join("daly.csv").display(), out.join("groups.toml").display());
            Ok(())
        }
    }
}

fn io_error(path: &Path, e: io::Error) -> Error {
    Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn summarize(report: &PipelineReport) -> Result<(), Error> {
    let mut out = io::stdout().lock();
    for i in &report.indices {
        writeln!(out, "{:<5} r2 {:.4}  cx {:>3}  {}", i.index, i.r2, i.complexity, i.expression)?;
    }
    for t in &report.trends {
        writeln!(out, "{:<5} {}-{}: {}", t.index_id, t.first_year, t.last_year, t.direction.as_str())?;
    }
    Ok(())
}
