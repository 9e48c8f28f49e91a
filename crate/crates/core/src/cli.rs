//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{lm_divergence, EmpiricalDomain};
use crate::config::{parse_config, AblationCell, RunConfig};
use crate::data::{load_csv, save_csv, DomainDataset};
use crate::error::{Error, Result};
use crate::model::{load_checkpoint, save_checkpoint};
use crate::trainer::{evaluate, run_variant};

#[derive(Debug, Parser)]
#[command(name = "enmdap", version, about = "Ensemble multi-source domain adaptation with pseudolabels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the configured synthetic domains as CSV files.
    Gen {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's `out_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one variant and write metrics, checkpoint and summary.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's `seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the accuracy of a checkpoint on a labeled dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Run every configured variant over several seeds.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        /// Number of seeds, starting at the config's `seed`.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the label-wise moment divergence between two labeled datasets.
    Divergence {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long = "k-max", default_value_t = 2)]
        k_max: u32,
    },
}

/// Contents of `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainSummary {
    pub variant: String,
    pub seed: u64,
    pub target_accuracy: f64,
    pub pl_rate_final: f64,
}

/// One row of the ablation table.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub cell: AblationCell,
    pub accuracies: Vec<f64>,
    pub seeds: Vec<u64>,
}

pub const ABLATION_HEADER: &str = "variant,n,mean_acc,std_acc,seeds";

impl AblationRow {
    pub fn mean(&self) -> f64 {
        self.accuracies.iter().sum::<f64>() / self.accuracies.len() as f64
    }

    /// Sample standard deviation; zero for a single seed.
    pub fn std(&self) -> f64 {
        let n = self.accuracies.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        (self.accuracies.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    }

    pub fn to_csv_line(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        format!(
            "{},{},{:.6},{:.6},{}",
            self.cell.variant,
            self.cell.n_extractors,
            self.mean(),
            self.std(),
            seeds.join(";")
        )
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes every configured domain to `<out>/<name>.csv`.
pub fn cmd_gen(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let datasets = cfg.datasets()?;
    create_dir(out)?;
    datasets
        .iter()
        .map(|ds| {
            let path = out.join(format!("{}.csv", ds.name()));
            save_csv(ds, &path)?;
            Ok(path)
        })
        .collect()
}

/// Trains `cfg.train` with `seed` and writes `metrics.csv`, `model.ckpt`,
/// `target_features.csv` and `summary.json` under `out`.
pub fn cmd_train(cfg: &RunConfig, seed: u64, out: &Path) -> Result<TrainSummary> {
    let datasets = cfg.datasets()?;
    let train = crate::trainer::TrainConfig { seed, ..cfg.train.clone() };
    let run = run_variant(&datasets, &cfg.arch, &train)?;
    let target = datasets.last().expect("run_variant checked the domain list");
    let features = DomainDataset::new(
        run.model.features(target.features())?,
        target.labels().map(<[usize]>::to_vec),
        target.n_classes(),
        "target_features",
    )?;
    let summary = TrainSummary {
        variant: train.variant.to_string(),
        seed,
        target_accuracy: run.target_accuracy,
        pl_rate_final: run.pl_rate_final,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");

    create_dir(out)?;
    write_file(&out.join("metrics.csv"), &run.report.to_csv())?;
    save_checkpoint(&run.model, out.join("model.ckpt"))?;
    save_csv(&features, out.join("target_features.csv"))?;
    write_file(&out.join("summary.json"), &format!("{json}\n"))?;
    Ok(summary)
}

pub fn cmd_eval(checkpoint: &Path, data: &Path) -> Result<f64> {
    let model = load_checkpoint(checkpoint)?;
    let ds = load_csv(data)?;
    evaluate(&model, &ds)
}

/// Runs each configured cell for seeds `seed..seed+n_seeds` and writes
/// `ablation.csv` plus the per-run `ablation_runs.csv` under `out`.
pub fn cmd_ablate(cfg: &RunConfig, n_seeds: u64, out: &Path) -> Result<Vec<AblationRow>> {
    if n_seeds == 0 {
        return Err(Error::invalid("--seeds must be at least 1"));
    }
    let datasets = cfg.datasets()?;
    let seeds: Vec<u64> = (0..n_seeds).map(|i| cfg.train.seed + i).collect();
    for cell in &cfg.ablate {
        cfg.train.for_variant(cell.variant, cell.n_extractors).validate()?;
    }
    let jobs: Vec<(usize, u64)> =
        (0..cfg.ablate.len()).flat_map(|c| seeds.iter().map(move |&s| (c, s))).collect();
    let accs = jobs
        .par_iter()
        .map(|&(c, seed)| {
            let cell = cfg.ablate[c];
            let train = crate::trainer::TrainConfig {
                seed,
                ..cfg.train.for_variant(cell.variant, cell.n_extractors)
            };
            run_variant(&datasets, &cfg.arch, &train).map(|r| r.target_accuracy)
        })
        .collect::<Result<Vec<f64>>>()?;

    let rows: Vec<AblationRow> = cfg
        .ablate
        .iter()
        .enumerate()
        .map(|(c, &cell)| AblationRow {
            cell,
            accuracies: jobs.iter().zip(&accs).filter(|((j, _), _)| *j == c).map(|(_, a)| *a).collect(),
            seeds: seeds.clone(),
        })
        .collect();

    let mut table = format!("{ABLATION_HEADER}\n");
    let mut runs = String::from("variant,n,seed,target_accuracy\n");
    for r in &rows {
        table.push_str(&r.to_csv_line());
        table.push('\n');
        for (s, a) in r.seeds.iter().zip(&r.accuracies) {
            runs.push_str(&format!("{},{},{s},{a}\n", r.cell.variant, r.cell.n_extractors));
        }
    }
    create_dir(out)?;
    write_file(&out.join("ablation.csv"), &table)?;
    write_file(&out.join("ablation_runs.csv"), &runs)?;
    Ok(rows)
}

/// `(k, d_LM,k)` for `k = 1..=k_max`.
pub fn cmd_divergence(a: &Path, b: &Path, k_max: u32) -> Result<Vec<(u32, f64)>> {
    if k_max < 1 {
        return Err(Error::invalid("--k-max must be at least 1"));
    }
    let da = EmpiricalDomain::from_dataset(&load_csv(a)?)?;
    let db = EmpiricalDomain::from_dataset(&load_csv(b)?)?;
    (1..=k_max).map(|k| Ok((k, lm_divergence(&da, &db, k)?))).collect()
}

/// Executes a parsed command line, writing human-readable results to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let io = |e| Error::io("<stdout>", e);
    match cli.command {
        Command::Gen { config, out: dir } => {
            let cfg = parse_config(&config)?;
            let dir = dir
                .or_else(|| cfg.out_dir.clone())
                .ok_or_else(|| Error::invalid("no output directory: pass --out or set out_dir"))?;
            for path in cmd_gen(&cfg, &dir)? {
                writeln!(out, "{}", path.display()).map_err(io)?;
            }
        }
        Command::Train { config, seed, out: dir } => {
            let cfg = parse_config(&config)?;
            let s = cmd_train(&cfg, seed.unwrap_or(cfg.train.seed), &dir)?;
            writeln!(
                out,
                "variant={} seed={} target_accuracy={} pl_rate_final={}",
                s.variant, s.seed, s.target_accuracy, s.pl_rate_final
            )
            .map_err(io)?;
        }
        Command::Eval { checkpoint, data } => {
            writeln!(out, "accuracy={}", cmd_eval(&checkpoint, &data)?).map_err(io)?;
        }
        Command::Ablate { config, seeds, out: dir } => {
            let cfg = parse_config(&config)?;
            let rows = cmd_ablate(&cfg, seeds, &dir)?;
            writeln!(out, "{ABLATION_HEADER}").map_err(io)?;
            for r in rows {
                writeln!(out, "{}", r.to_csv_line()).map_err(io)?;
            }
        }
        Command::Divergence { a, b, k_max } => {
            let rows = cmd_divergence(&a, &b, k_max)?;
            writeln!(out, "k,d_lm").map_err(io)?;
            for (k, d) in rows {
                writeln!(out, "{k},{d}").map_err(io)?;
            }
        }
    }
    Ok(())
}
