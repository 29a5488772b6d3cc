use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use flowsurrogate::dataset::build_samples;
use flowsurrogate::pipeline::{self, GeneratorKind, GeneratorSpec, PipelineConfig};
use flowsurrogate::{field, mlp, Error, Result};

#[derive(Parser)]
#[command(name = "flowsurrogate", version, about = "Two-tier velocity-field surrogate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic snapshot file.
    Gen {
        #[arg(long, value_enum)]
        kind: GeneratorKind,
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long, default_value_t = 100.0)]
        re: f64,
        #[arg(long, default_value_t = 0.7)]
        pr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Vector-potential amplitude for `rand`.
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
        /// ABC coefficients.
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the two-tier pipeline from a JSON config.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Render a CSV matrix as an ASCII PGM image.
    Render {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a saved model against every node of a snapshot.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        field: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        tau: f64,
    },
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Gen {
            kind,
            n,
            re,
            pr,
            seed,
            amplitude,
            a,
            b,
            c,
            out,
        } => {
            let spec = GeneratorSpec {
                kind,
                n,
                re,
                pr,
                seed,
                amplitude,
                a,
                b,
                c,
            };
            let snap = spec.generate().map_err(usage)?;
            field::save_snapshot(&snap, &out)?;
            eprintln!("wrote {} ({} nodes)", out.display(), snap.grid.len());
        }
        Command::Pipeline { config, out_dir } => {
            let cfg = PipelineConfig::load(&config)?;
            cfg.validate().map_err(usage)?;
            let (report, runs) = pipeline::run_two_tier_full(&cfg)?;
            pipeline::write_outputs(&report, &runs, &out_dir)?;
            for (i, s) in report.snapshots.iter().enumerate() {
                println!(
                    "snapshot {i}: {} sizes=({}, {}, {}) epochs={} stop={:?} val_acc={:.4} test_acc={:.4}",
                    s.source,
                    s.sizes.train,
                    s.sizes.validation,
                    s.sizes.test,
                    s.epochs_run,
                    s.stop_reason,
                    s.validation_accuracy,
                    s.test_accuracy
                );
            }
            for b in &report.mean_validation_brackets {
                println!("mean validation accuracy (tau={}): {:.4}", b.tau, b.accuracy);
            }
            println!("reference accuracy: {}", report.reference_accuracy);
        }
        Command::Render { input, out } => {
            let m = pipeline::read_csv(&input)?;
            pipeline::render_pgm(&m, &out)?;
        }
        Command::Eval { model, field, tau } => {
            let (m, norm) = mlp::load_model(&model)?;
            let snap = field::load_snapshot(&field)?;
            let samples = build_samples(&snap);
            let mut preds = Vec::with_capacity(samples.len());
            let mut targets = Vec::with_capacity(samples.len());
            for s in &samples {
                let x = norm.as_ref().map_or(s.input, |n| n.normalize(&s.input));
                preds.push(m.forward(&x)?);
                targets.push(s.target.to_vec());
            }
            let acc = pipeline::accuracy_within_tol(&preds, &targets, tau).map_err(usage)?;
            println!("accuracy={acc}");
        }
    }
    Ok(())
}

/// Argument validation failures map to the usage exit code.
fn usage(e: Error) -> Error {
    match e {
        Error::InvalidArgument(_) => e,
        other => Error::InvalidArgument(other.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
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
