use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use contact_complexity::cli::{self, exit};
use contact_complexity::synth::SynthConfig;
use contact_complexity::Result;

#[derive(Parser)]
#[command(name = "contact-complexity", version, about = "Score customer-service contacts by complexity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled corpus (corpus.jsonl + labels.csv).
    Gen {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the expert and fit the scorer; writes a model file.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the holdout-split seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score a corpus; writes `id,L,E,S,Ln,En,Sn,C,Q` CSV.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Route a corpus; writes `id,Q,decision,queue` CSV.
    Route {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate scores against labels and outcome flags.
    Eval {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write boosting traces, hypothesis histograms and a skewness sweep.
    Report {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

fn fmt_rate(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "undefined".into())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Gen { config, out, seed } => {
            let mut cfg: SynthConfig = cli::load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let g = cli::cmd_gen(&cfg, &out)?;
            println!("wrote {} contacts to {}", g.stats.size, g.corpus_path.display());
            println!("wrote labels to {}", g.labels_path.display());
        }
        Command::Train { corpus, config, out, seed } => {
            let mut settings: cli::TrainSettings = cli::load_config(config.as_deref())?;
            if let Some(s) = seed {
                settings.expert.seed = s;
            }
            let t = cli::cmd_train(&corpus, &settings, &out)?;
            let r = &t.report;
            println!(
                "trained {} classes on {} contacts, {} held out",
                r.num_classes,
                r.train_size,
                r.holdout.len()
            );
            println!(
                "held-out accuracy: top-1 {}, top-3 {}, top-15 {}",
                fmt_rate(r.top1),
                fmt_rate(r.top3),
                fmt_rate(r.top15)
            );
            println!("model written to {} (sha256 {})", out.display(), t.checksum);
        }
        Command::Score { model, corpus, out } => {
            let records = cli::cmd_score(&model, &corpus, &out)?;
            println!("scored {} contacts into {}", records.len(), out.display());
        }
        Command::Route { model, corpus, config, out } => {
            let cfg = cli::RoutingSettings::load(config.as_deref())?;
            let s = cli::cmd_route(&model, &corpus, &cfg, &out)?;
            println!(
                "routed {} contacts: junior {}, senior {}, product-based {}",
                s.total(),
                s.junior,
                s.senior,
                s.product_based
            );
        }
        Command::Eval { scores, labels, corpus, config, out } => {
            let settings: cli::EvalSettings = cli::load_config(config.as_deref())?;
            let e = cli::cmd_eval(&scores, &labels, &corpus, &settings, &out)?;
            for g in [&e.low, &e.high] {
                println!(
                    "{} group: {} contacts, resolved {}, transferred {}",
                    g.name,
                    g.count,
                    fmt_rate(g.resolution_rate),
                    fmt_rate(g.transfer_rate)
                );
            }
            println!("evaluation written to {}", out.display());
        }
        Command::Report { model, corpus, config, out } => {
            let settings: cli::ReportSettings = cli::load_config(config.as_deref())?;
            let r = cli::cmd_report(&model, &corpus, &settings, &out)?;
            for (w, g) in &r.skewness {
                println!("w = {w}: skewness of C {}", fmt_rate(*g));
            }
            println!("{} traces written under {}", r.traces_written, out.join("traces").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Cli::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE as u8 } else { exit::SUCCESS as u8 });
        }
    };
    match std::panic::catch_unwind(|| run(args.command)) {
        Ok(Ok(())) => ExitCode::from(exit::SUCCESS as u8),
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
        Err(_) => ExitCode::from(exit::INTERNAL as u8),
    }
}
