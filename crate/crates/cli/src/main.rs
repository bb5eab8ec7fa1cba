use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context as _, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use swapcal::batch::{estimate_dsmcal, estimate_dsomni, estimate_saerr, train_mixture_with, EstimatorConfig};
use swapcal::forecaster::{run_online_observed, BmForecaster, NObjective};
use swapcal::harness::{
    evaluate, fit_rate, generate_stream, ingest_csv, parse_class, parse_losses, read_results, run_sweep,
    AdversaryKind, AdversarySpec, MetricName, NRule, SweepConfig,
};
use swapcal::io::{read_transcript, write_transcript, TranscriptHeader};
use swapcal::ons::OnsConfig;
use swapcal::verify;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "swapcal", version, about = "Online swap multicalibration forecaster and metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Adversary {
    IidLogistic,
    IidBernoulli,
    Csv,
    AntiCalibration,
}

#[derive(Clone, Copy, ValueEnum)]
enum BatchReport {
    Saerr,
    Dsmcal2,
    Dsomni,
}

#[derive(Subcommand)]
enum Command {
    /// Run the forecaster against an adversary and write a JSONL transcript.
    Simulate {
        #[arg(long, value_enum)]
        adversary: Adversary,
        #[arg(long = "T")]
        t: usize,
        #[arg(long)]
        d: usize,
        /// auto-smcal, auto-sreg, auto-somni or a grid size
        #[arg(long = "N", default_value = "auto-smcal")]
        n: NRule,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Omit the learners' unrounded predictions from the transcript.
        #[arg(long)]
        slim: bool,
        /// Data file for the csv adversary.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Label probability for the iid-bernoulli adversary.
        #[arg(long, default_value_t = 0.5)]
        bias: f64,
        /// Label noise scale for the iid-logistic adversary.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
    /// Evaluate an error functional on a transcript and print it as JSON.
    Metrics {
        #[arg(long)]
        transcript: PathBuf,
        #[arg(long)]
        class: Option<String>,
        #[arg(long)]
        report: MetricName,
        /// Comma-separated loss menu for somni.
        #[arg(long)]
        losses: Option<String>,
    },
    /// Run a parameter sweep, appending rows to a results CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the log-log slope of the median metric against T.
    FitRate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        metric: String,
    },
    /// Train the randomized mixture on one file and estimate its error on another.
    Batch {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Number of training rows to use.
        #[arg(long = "T")]
        t: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum)]
        report: BatchReport,
        #[arg(long = "N")]
        n: Option<NRule>,
        #[arg(long)]
        class: Option<String>,
        #[arg(long)]
        losses: Option<String>,
        /// Keep every k-th predictor snapshot.
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long, default_value_t = 20_000)]
        draws: usize,
        /// Write the trained mixture as JSON.
        #[arg(long)]
        save_mixture: Option<PathBuf>,
    },
    /// Run the numerical self-checks.
    Verify {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Simulate {
            adversary,
            t,
            d,
            n,
            seed,
            out,
            slim,
            input,
            bias,
            noise,
        } => {
            let mut scale = None;
            let kind = match adversary {
                Adversary::IidLogistic => AdversaryKind::IidLogistic { theta_star: None, noise },
                Adversary::IidBernoulli => AdversaryKind::IidBernoulli { bias },
                Adversary::AntiCalibration => AdversaryKind::AntiCalibration { adaptive: false },
                Adversary::Csv => {
                    let path = input.context("--adversary csv needs --input FILE")?;
                    scale = Some(ingest_csv::<f64>(&path)?.scale);
                    AdversaryKind::Csv { path }
                }
            };
            let stream = generate_stream::<f64>(&AdversarySpec::new(kind, seed), t, d)?;
            let n = n.resolve(stream.len(), d)?;
            let mut f = BmForecaster::<f64>::new(n, d, seed)?.slim(slim);
            let mut ws = Vec::new();
            let tr = run_online_observed(&mut f, stream, |ev| {
                if !slim {
                    ws.push(ev.output.per_cell_w.clone());
                }
            })?;
            let header = TranscriptHeader {
                n,
                d,
                t: tr.horizon(),
                seed,
                scale,
            };
            let mut w = BufWriter::new(File::create(&out).with_context(|| format!("creating {}", out.display()))?);
            write_transcript(&mut w, &header, &tr, (!slim).then_some(ws.as_slice()))?;
        }
        Command::Metrics {
            transcript,
            class,
            report,
            losses,
        } => {
            let file = File::open(&transcript).with_context(|| format!("opening {}", transcript.display()))?;
            let (_, tr) = read_transcript::<f64, _>(BufReader::new(file))?;
            let class = parse_class::<f64>(class.as_deref().unwrap_or(report.default_class()))?;
            let losses = parse_losses::<f64>(losses.as_deref())?;
            println!("{}", evaluate(&tr, report, &class, &losses)?.to_json());
        }
        Command::Sweep { config, out } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let cfg = SweepConfig::from_json(&text)?;
            let Some(out) = out.or_else(|| cfg.output.clone()) else {
                bail!("no output path: pass --out or set \"output\" in the config");
            };
            let rows = run_sweep(&cfg, &out)?;
            let failed = rows.iter().filter(|r| !r.error.is_empty()).count();
            eprintln!("{} rows in {}, {failed} failed", rows.len(), out.display());
        }
        Command::FitRate { input, metric } => {
            let rows = read_results(&input)?;
            println!("{}", serde_json::to_string(&fit_rate(&rows, &metric)?)?);
        }
        Command::Batch {
            train,
            test,
            t,
            seed,
            report,
            n,
            class,
            losses,
            stride,
            draws,
            save_mixture,
        } => {
            let train = ingest_csv::<f64>(&train)?;
            let test = ingest_csv::<f64>(&test)?;
            let scale = train.scale.min(test.scale);
            let mut train = train.rescaled(scale)?.samples;
            let test = test.rescaled(scale)?.samples;
            if t > train.len() {
                bail!("--T {t} exceeds the {} training rows", train.len());
            }
            train.truncate(t);
            if let (Some((a, _)), Some((b, _))) = (train.first(), test.first()) {
                if a.dim() != b.dim() {
                    bail!("train and test files have different feature counts");
                }
            }
            let d = train.first().map(|(x, _)| x.dim()).unwrap_or(1);
            let (objective, default_class) = match report {
                BatchReport::Saerr => (NObjective::Sreg, "ball4"),
                BatchReport::Dsmcal2 => (NObjective::Smcal, "ball1"),
                BatchReport::Dsomni => (NObjective::Somni, "affine-res"),
            };
            let n = n.unwrap_or(NRule::Auto(objective)).resolve(t, d)?;
            let class = parse_class::<f64>(class.as_deref().unwrap_or(default_class))?;
            let mixture = train_mixture_with(&train, n, seed, stride, OnsConfig::default())?;
            if let Some(path) = save_mixture {
                let mut w = BufWriter::new(File::create(&path)?);
                w.write_all(mixture.to_json()?.as_bytes())?;
                w.flush()?;
            }
            let cfg = EstimatorConfig {
                mc_draws: draws,
                seed,
                ..Default::default()
            };
            let est = match report {
                BatchReport::Saerr => estimate_saerr(&mixture, &test, &class, &cfg)?,
                BatchReport::Dsmcal2 => estimate_dsmcal(&mixture, &test, &class, 2, &cfg)?,
                BatchReport::Dsomni => {
                    let losses = parse_losses::<f64>(losses.as_deref())?;
                    estimate_dsomni(&mixture, &test, &losses, &class, &cfg)?
                }
            };
            let out = json!({ "N": n, "T": t, "scale": scale, "estimate": est });
            println!("{out}");
        }
        Command::Verify { seed } => {
            let checks = verify::run_all(seed);
            let mut failed = 0;
            for c in &checks {
                println!(
                    "{} {:<32} worst margin {:+.3e}  {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.worst,
                    c.detail
                );
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                bail!("{failed} of {} checks failed", checks.len());
            }
        }
    }
    Ok(())
}
