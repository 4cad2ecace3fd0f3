use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use polytrinity::config::PipelineConfig;
use polytrinity::error::{PipelineError, Result};
use polytrinity::fixtures::write_fixtures;
use polytrinity::stages::{self, Context};

#[derive(Parser)]
#[command(
    name = "polytrinity",
    version,
    about = "Synthetic cone-calorimeter data and two-phase training"
)]
struct Cli {
    /// TOML configuration; defaults apply to anything left out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores), overrides the config.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory, overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate group compositions and label them by group contribution.
    GenPolymers,
    /// Fit the kinetics surrogates and thermophysical predictors.
    FitSurrogates,
    /// Fill inputs, filter and run the cone simulation for every polymer.
    Simulate {
        /// Also write the HRR curve of this polymer.
        #[arg(long)]
        hrr: Option<String>,
    },
    /// Trust regions for t_ig and pHRR by collocation.
    Uq {
        /// Polymers to quantify (default: the first few synthetic records).
        smiles: Vec<String>,
    },
    /// Phase-1 training on the synthetic dataset.
    Pretrain,
    /// Phase-2 finetuning on the experimental dataset.
    Finetune,
    /// Single-phase training on the experimental dataset.
    Baseline,
    /// Improvement table and dataset manifest.
    Report,
    /// Validate the input datasets and write them in normalized form.
    Ingest,
    /// Every stage in order.
    Run,
    /// Regenerate the bundled data files into a directory.
    WriteFixtures {
        #[arg(default_value = "crates/pipeline/data")]
        dir: PathBuf,
    },
}

fn resolve_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli)?;
    if cfg.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build_global()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
    }
    if let Command::WriteFixtures { dir } = &cli.command {
        for p in write_fixtures(dir)? {
            println!("{p}");
        }
        return Ok(());
    }
    let ctx = Context::new(cfg);
    ctx.persist_config()?;
    match &cli.command {
        Command::GenPolymers => {
            let s = stages::gen_polymers(&ctx)?;
            println!(
                "{} polymers from {} compositions",
                s.n_records, s.n_compositions
            );
        }
        Command::FitSurrogates => {
            let s = stages::fit_surrogate_models(&ctx)?;
            let r = &s.surrogates;
            println!(
                "dT R2 train {:.3}, T_p R2 train {:.3}",
                r.dt_train_r2, r.tp_train_r2
            );
        }
        Command::Simulate { hrr } => {
            let s = stages::simulate(&ctx, hrr.as_deref())?;
            println!(
                "{} labeled, {} ignitable, {} failed",
                s.n_labeled, s.n_ignitable, s.n_failed
            );
        }
        Command::Uq { smiles } => {
            let (rows, _) = stages::uq(&ctx, smiles)?;
            for r in rows {
                println!(
                    "{} {}: {:.2} +/- {:.2}",
                    r.smiles,
                    r.output,
                    r.mean,
                    2.0 * r.std
                );
            }
        }
        Command::Pretrain => {
            let s = stages::pretrain(&ctx)?;
            println!(
                "pretrained on {} records ({} ignitable)",
                s.n_records, s.n_ignitable
            );
        }
        Command::Finetune => {
            stages::finetune(&ctx)?;
        }
        Command::Baseline => {
            stages::baseline(&ctx)?;
        }
        Command::Report | Command::Run => {
            let r = if matches!(cli.command, Command::Run) {
                stages::run_all(&ctx)?
            } else {
                stages::report(&ctx)?
            };
            for row in &r.improvement {
                println!(
                    "{}: baseline {:.4}, two-phase {:.4}, improvement {:.1}%",
                    row.target,
                    row.baseline_test_rel_mse,
                    row.twophase_test_rel_mse,
                    100.0 * row.improvement
                );
            }
        }
        Command::Ingest => {
            let m = stages::ingest(&ctx)?;
            for f in &m.files {
                println!("{}: {} rows", f.name, f.rows);
            }
        }
        Command::WriteFixtures { .. } => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
