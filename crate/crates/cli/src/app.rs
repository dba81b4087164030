//! Command-line surface: flags override the matching config keys.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::commands;
use crate::config::{Resources, RunConfig};
use crate::error::{io_error, CliResult};
use crate::model_file::Mode;

#[derive(Debug, Parser)]
#[command(name = "bspnn", version, about = "Boosted VQ-GRNN intrusion detection on KDD-99")]
pub struct Cli {
    /// JSON run configuration; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Labeled training file (10% KDD).
    #[arg(long, global = true)]
    pub train: Option<PathBuf>,
    /// Labeled test file (Corrected KDD).
    #[arg(long, global = true)]
    pub test: Option<PathBuf>,
    #[arg(long, global = true)]
    pub cluster_table: Option<PathBuf>,
    /// Boosting rounds.
    #[arg(long, global = true)]
    pub rounds: Option<usize>,
    /// Anomaly threshold quantile.
    #[arg(long, global = true)]
    pub quantile: Option<f64>,
    #[arg(long, global = true)]
    pub cap_normal: Option<usize>,
    #[arg(long, global = true)]
    pub cap_probe: Option<usize>,
    #[arg(long, global = true)]
    pub cap_dos: Option<usize>,
    #[arg(long, global = true)]
    pub cap_u2r: Option<usize>,
    #[arg(long, global = true)]
    pub cap_r2l: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Misuse,
    Anomaly,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Misuse => Mode::Misuse,
            ModeArg::Anomaly => Mode::Anomaly,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split the training file into Norm, C1..C13 and D1..D13.
    BuildDatasets,
    /// Train a misuse or anomaly model on a built dataset.
    Train {
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Norm, C1..C13 or D1..D13 (default: D13 for misuse, Norm for anomaly).
        #[arg(long)]
        dataset: Option<String>,
        /// Model file to write (default: <out>/models/<mode>-<dataset>.json).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Evaluate a model file on the test file.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
    },
    /// Per-category detection rates of misuse models trained on D1..D13.
    Curve,
    /// Classify every record of an (optionally unlabeled) KDD file.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Write predictions here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

impl Cli {
    /// Loads the config file (or defaults) and applies flag overrides.
    pub fn resolve_config(&self) -> CliResult<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.out {
            c.out_dir = v.clone();
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = &self.train {
            c.paths.train_file = Some(v.clone());
        }
        if let Some(v) = &self.test {
            c.paths.test_file = Some(v.clone());
        }
        if let Some(v) = &self.cluster_table {
            c.paths.cluster_table = Some(v.clone());
        }
        if let Some(v) = self.rounds {
            c.boost.rounds = v;
        }
        if let Some(v) = self.quantile {
            c.anomaly.quantile = v;
        }
        let caps = [
            (&mut c.caps.normal, self.cap_normal),
            (&mut c.caps.probe, self.cap_probe),
            (&mut c.caps.dos, self.cap_dos),
            (&mut c.caps.u2r, self.cap_u2r),
            (&mut c.caps.r2l, self.cap_r2l),
        ];
        for (slot, cap) in caps {
            if cap.is_some() {
                *slot = cap;
            }
        }
        c.validate()?;
        Ok(c)
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let config = cli.resolve_config()?;
    if let Command::Predict { model, input, output } = &cli.command {
        let n = match output {
            Some(path) => {
                let file = std::fs::File::create(path).map_err(|e| io_error(path, e))?;
                let mut w = std::io::BufWriter::new(file);
                let n = commands::predict(model, input, &mut w)?;
                w.flush().map_err(|e| io_error(path, e))?;
                n
            }
            None => {
                let stdout = std::io::stdout();
                let mut lock = stdout.lock();
                commands::predict(model, input, &mut lock)?
            }
        };
        log::info!("predicted {n} records");
        return Ok(());
    }
    let res = Resources::load(&config)?;
    match &cli.command {
        Command::BuildDatasets => {
            let summary = commands::build_datasets(&config, &res)?;
            log::info!("wrote {} dataset rows under {}", summary.rows.len(), config.datasets_dir().display());
        }
        Command::Train { mode, dataset, model } => {
            let mode = Mode::from(*mode);
            let dataset = dataset.clone().unwrap_or_else(|| match mode {
                Mode::Misuse => "D13".into(),
                Mode::Anomaly => "Norm".into(),
            });
            let out = commands::train(&config, &res, mode, &dataset, model.as_deref())?;
            println!("{}", out.model_path.display());
        }
        Command::Evaluate { model } => {
            let out = commands::evaluate(&config, &res, model)?;
            print!("{}", out.report.to_text());
        }
        Command::Curve => {
            let out = commands::curve(&config, &res)?;
            print!("{}", out.curve.to_csv());
        }
        Command::Predict { .. } => unreachable!("handled above"),
    }
    Ok(())
}
