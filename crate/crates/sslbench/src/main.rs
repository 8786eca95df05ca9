use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use sslab::bench::{
    execute_plan_with, load_jsonl, plan_runs, save_jsonl, summarize_against, Execution, ExperimentConfig,
};
use sslab::data::{load_table, save_table, write_table};
use sslab::synth::{generate_artificial, split_mar, split_mcar, split_mnar, SynthSpec};

#[derive(Parser)]
#[command(name = "sslbench", version, about = "Semi-supervised learning benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MechanismArg {
    Mcar,
    Mar,
    Mnar,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an artificial A_B_C_D dataset as train.csv and test.csv.
    Gen {
        /// Dataset name, e.g. 30_80_00_05.
        name: String,
        #[arg(long, default_value_t = 8000)]
        train_size: usize,
        #[arg(long, default_value_t = 4000)]
        test_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Hide labels of a dataset under a missing-label mechanism.
    Split {
        /// Typed-header CSV file.
        data: PathBuf,
        #[arg(long, value_enum)]
        mechanism: MechanismArg,
        /// Labeled fraction in (0, 1].
        #[arg(long)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// MAR censoring features, as `i,j`.
        #[arg(long, value_delimiter = ',', default_values_t = [0usize, 1])]
        features: Vec<usize>,
        /// MNAR correlation between the selection noise and the label.
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        /// Output CSV (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute an experiment config and write JSON Lines results.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (overrides the config).
        #[arg(long)]
        threads: Option<usize>,
        /// Run descriptors one at a time.
        #[arg(long)]
        serial: bool,
    },
    /// Mean-AUC grids and box-plot quantiles of a results file.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Win-tie-loss counts against a baseline technique.
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "supervised")]
        baseline: String,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen {
            name,
            train_size,
            test_size,
            seed,
            out,
        } => {
            let spec = SynthSpec::from_name(&name)?
                .with_sizes(train_size, test_size)
                .with_seed(seed);
            let a = generate_artificial(&spec)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            save_table(&a.train, out.join("train.csv"))?;
            save_table(&a.test, out.join("test.csv"))?;
            fs::write(out.join("truth.json"), serde_json::to_string_pretty(&a.truth)?)?;
            eprintln!(
                "{}: {} train / {} test rows, relevant features {:?}",
                spec.name(),
                a.train.n_rows(),
                a.test.n_rows(),
                a.truth.relevant
            );
        }
        Command::Split {
            data,
            mechanism,
            fraction,
            seed,
            features,
            rho,
            out,
        } => {
            if features.len() != 2 {
                bail!("--features takes exactly two indices, e.g. 0,1");
            }
            let d = load_table(&data)?;
            let split = match mechanism {
                MechanismArg::Mcar => split_mcar(&d, fraction, seed)?,
                MechanismArg::Mar => split_mar(&d, features[0], features[1], 1.0 - fraction)?,
                MechanismArg::Mnar => split_mnar(&d, rho, fraction, seed)?,
            };
            let masked = split.mask(&d)?;
            eprintln!(
                "{} labeled / {} unlabeled",
                split.labeled().len(),
                split.unlabeled().len()
            );
            emit(&write_table(&masked), out.as_deref())?;
        }
        Command::Run {
            config,
            out,
            threads,
            serial,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if threads.is_some() {
                cfg.threads = threads;
            }
            let exec = if serial {
                Execution::Serial
            } else {
                Execution::from_config(&cfg)
            };
            let plan = plan_runs(&cfg)?;
            eprintln!(
                "{} descriptors x {} techniques",
                plan.descriptors.len(),
                plan.techniques.len()
            );
            let records = execute_plan_with(&plan, &cfg, exec)?;
            let failed = records.iter().filter(|r| r.auc.is_nan()).count();
            save_jsonl(&records, &out)?;
            eprintln!("wrote {} records ({failed} failed) to {}", records.len(), out.display());
        }
        Command::Report { input, format, out } => {
            let records = load_jsonl(&input)?;
            let s = summarize_against(&records, "supervised", 0.05)?;
            let text = match format {
                Format::Csv => s.to_csv(),
                Format::Text => s.to_text(),
            };
            emit(&text, out.as_deref())?;
        }
        Command::Stats {
            input,
            baseline,
            alpha,
            format,
        } => {
            let records = load_jsonl(&input)?;
            let s = summarize_against(&records, &baseline, alpha)?;
            let Some(w) = s.wtl else {
                bail!("no `{baseline}` records in {}", input.display());
            };
            let text = match format {
                Format::Csv => w.to_csv(),
                Format::Text => w.to_text(),
            };
            emit(&text, None)?;
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
