use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use tumorsynth::metrics::{
    dsc, extract_features, nsd, parse_reader_csv, reader_metrics_with, write_metric_csv, MetricRow,
    SurfaceTolerance, UnsurePolicy,
};
use tumorsynth::pipeline::{run_epoch, Backend, Config};
use tumorsynth::volume_io::{load_volume, LabelVolume};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Parser)]
#[command(name = "tumorsynth", version, about = "Synthetic tumor generation and evaluation for CT volumes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one epoch of synthetic lesions for every manifest row.
    Synth {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        epoch: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        backend: Option<BackendArg>,
        /// Overrides the config's global seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; 0 uses all cores.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Compare a predicted mask to a reference mask.
    Eval {
        #[arg(value_enum)]
        metric: EvalMetric,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// NSD tolerance in mm.
        #[arg(long, default_value_t = 2.0)]
        tau: f64,
    },
    /// Intensity and shape features of a masked region.
    Features {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        mask: PathBuf,
    },
    /// Sensitivity, specificity and accuracy from `truth,call` rows.
    ReaderMetrics {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, value_enum, default_value_t = UnsureArg::Incorrect)]
        unsure: UnsureArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Ca,
    Handcrafted,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalMetric {
    Dsc,
    Nsd,
}

#[derive(Clone, Copy, ValueEnum)]
enum UnsureArg {
    Incorrect,
    Drop,
}

fn case_label(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "case".into())
}

fn load_mask(path: &Path) -> anyhow::Result<LabelVolume> {
    let m = load_volume(path)?.into_label()?;
    m.ensure_binary().with_context(|| format!("{}", path.display()))?;
    Ok(m)
}

fn emit(rows: &[MetricRow]) -> anyhow::Result<()> {
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    write_metric_csv(&mut lock, rows)?;
    lock.flush()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Synth {
            manifest,
            config,
            epoch,
            out,
            backend,
            seed,
            jobs,
        } => {
            let mut cfg = match &config {
                Some(p) => Config::load(p)?,
                None => Config::default(),
            };
            if let Some(b) = backend {
                cfg.backend = match b {
                    BackendArg::Ca => Backend::CellularAutomata,
                    BackendArg::Handcrafted => Backend::Handcrafted,
                };
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let summary = run_epoch(&manifest, &cfg, epoch, &out, jobs)?;
            for (row, reason) in &summary.skipped {
                eprintln!("skipped {row}: {reason}");
            }
            eprintln!(
                "epoch {epoch}: wrote {} lesion(s) to {}, skipped {}",
                summary.written.len(),
                out.display(),
                summary.skipped.len()
            );
            if summary.written.is_empty() && !summary.skipped.is_empty() {
                return Ok(ExitCode::from(EXIT_DATA));
            }
        }
        Command::Eval { metric, pred, gt, tau } => {
            let (p, g) = (load_mask(&pred)?, load_mask(&gt)?);
            let row = match metric {
                EvalMetric::Dsc => MetricRow::new(case_label(&pred), "dsc", dsc(&p, &g)?),
                EvalMetric::Nsd => MetricRow::new(
                    case_label(&pred),
                    format!("nsd_tau{tau}"),
                    nsd(&p, &g, SurfaceTolerance::new(tau)?)?,
                ),
            };
            emit(&[row])?;
        }
        Command::Features { image, mask } => {
            let img = load_volume(&image)?.into_hu()?;
            let m = load_mask(&mask)?;
            let f = extract_features(&img, &m)?;
            let id = case_label(&image);
            let rows: Vec<_> = f.named().iter().map(|&(k, v)| MetricRow::new(id.clone(), k, v)).collect();
            emit(&rows)?;
        }
        Command::ReaderMetrics { csv, unsure } => {
            let text = std::fs::read_to_string(&csv)
                .map_err(|e| tumorsynth::Error::Io { path: csv.clone(), source: e })?;
            let labels = parse_reader_csv(&text)?;
            let policy = match unsure {
                UnsureArg::Incorrect => UnsurePolicy::Incorrect,
                UnsureArg::Drop => UnsurePolicy::Drop,
            };
            let m = reader_metrics_with(&labels, policy)?;
            let id = case_label(&csv);
            emit(&[
                MetricRow::new(id.clone(), "sensitivity", m.sensitivity),
                MetricRow::new(id.clone(), "specificity", m.specificity),
                MetricRow::new(id, "accuracy", m.accuracy),
            ])?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(code)) => code,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<tumorsynth::Error>()) {
                ExitCode::from(EXIT_DATA)
            } else {
                ExitCode::from(EXIT_INTERNAL)
            }
        }
        Err(_) => ExitCode::from(EXIT_INTERNAL),
    }
}
