use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use adaneg::embeddings::{
    load_embedding_file, normalize_f32, save_embedding_file, Dataset, EmbeddingFile, FLAG_UNIT_NORM,
};
use adaneg::pipeline::{
    evaluate_records, isor_experiment, mixture_experiment, ordering_experiment, read_records,
    run_dataset, sweep, synthesize_with_ood_centers, write_records, Mode, RunConfig, SweepGrid,
    SyntheticSpec,
};

#[derive(Parser)]
#[command(name = "adaneg", version, about = "Streaming OOD detection with adaptive negative proxies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a test stream; writes per-sample records and prints the metric report.
    Run {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Per-sample CSV output ("-" for stdout).
        #[arg(long)]
        records: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Recompute metrics from a saved record file.
    Eval {
        #[arg(long)]
        records: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run every cell of a hyperparameter grid (JSON file with list-valued fields).
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        grid: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Compare runs with and without AdaGap at several ID:OOD ratios.
    Mixratio {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,10,100")]
        ratios: Vec<f64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Rerun under several stream shuffles and report the metric spread.
    Order {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Write a synthetic dataset (EMB1 files + manifest) and its OOD cluster centers.
    Synth {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// JSON file with SyntheticSpec fields; missing fields take defaults.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// ISOR of text vs task-adaptive negative proxies against OOD label embeddings.
    Isor {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
        /// EMB1 file with ground-truth OOD label embeddings.
        #[arg(long)]
        ood_labels: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Dataset manifest JSON.
    #[arg(long)]
    dataset: PathBuf,
}

#[derive(Args)]
struct OutArgs {
    /// Write the JSON summary here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

/// Overrides applied on top of `--config` (or the defaults).
#[derive(Args)]
struct RunArgs {
    /// RunConfig JSON file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    gap: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    mem_len: Option<usize>,
    /// nl, ta, sa or all.
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    adagap: bool,
    #[arg(long)]
    queue_len: Option<usize>,
    /// Shuffle the stream with this seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_json(&read_text(p)?)
                .with_context(|| format!("bad config {}", p.display()))?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { c.$f = v; })* };
        }
        set!(gamma, gap, beta, lambda, tau, mem_len, mode);
        if self.adagap {
            c.adagap.enabled = true;
        }
        if let Some(q) = self.queue_len {
            c.adagap.queue_len = q;
        }
        if self.seed.is_some() {
            c.seed = self.seed;
        }
        c.validate()?;
        Ok(c)
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_dataset(args: &DataArgs) -> Result<Dataset> {
    Dataset::load(&args.dataset).with_context(|| format!("cannot load {}", args.dataset.display()))
}

fn emit<T: Serialize>(out: &OutArgs, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    match &out.report {
        Some(p) => fs::write(p, json + "\n").with_context(|| format!("cannot write {}", p.display())),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { data, run, records, out } => {
            let cfg = run.resolve()?;
            let result = run_dataset(&cfg, &load_dataset(&data)?)?;
            match records.as_deref() {
                Some(p) if p == Path::new("-") => write_records(io::stdout().lock(), &result.records)?,
                Some(p) => {
                    let f = File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
                    write_records(BufWriter::new(f), &result.records)?;
                }
                None => {}
            }
            match (&result.report, &out.report) {
                (None, _) => eprintln!("no ground truth: records only"),
                // keep stdout clean for the CSV
                (Some(r), None) if records.as_deref() == Some(Path::new("-")) => {
                    eprintln!("{}", serde_json::to_string_pretty(r)?)
                }
                (Some(r), _) => emit(&out, r)?,
            }
        }
        Command::Eval { records, out } => {
            let f = File::open(&records).with_context(|| format!("cannot open {}", records.display()))?;
            let recs = read_records(BufReader::new(f))?;
            emit(&out, &evaluate_records(&recs)?)?;
        }
        Command::Sweep { data, run, grid, out } => {
            let grid: SweepGrid = serde_json::from_str(&read_text(&grid)?).context("bad grid")?;
            emit(&out, &sweep(&run.resolve()?, &grid, &load_dataset(&data)?))?;
        }
        Command::Mixratio { data, run, ratios, out } => {
            emit(&out, &mixture_experiment(&ratios, &run.resolve()?, &load_dataset(&data)?)?)?;
        }
        Command::Order { data, run, seeds, out } => {
            emit(&out, &ordering_experiment(&run.resolve()?, &load_dataset(&data)?, &seeds)?)?;
        }
        Command::Synth { out, spec, seed } => {
            let mut spec: SyntheticSpec = match spec {
                Some(p) => serde_json::from_str(&read_text(&p)?).context("bad spec")?,
                None => SyntheticSpec::default(),
            };
            if let Some(s) = seed {
                spec.seed = s;
            }
            let (ds, centers) = synthesize_with_ood_centers(&spec)?;
            let manifest = ds.save(&out)?;
            let file = EmbeddingFile::from_f64_rows(&centers)?.with_flags(FLAG_UNIT_NORM);
            save_embedding_file(out.join("ood_centers.emb1"), &file)?;
            writeln!(io::stdout(), "{}", manifest.display())?;
        }
        Command::Isor { data, run, ood_labels, out } => {
            let file = load_embedding_file(&ood_labels)?;
            let labels = file.rows().map(normalize_f32).collect::<adaneg::Result<Vec<_>>>()?;
            emit(&out, &isor_experiment(&run.resolve()?, &load_dataset(&data)?, &labels)?)?;
        }
    }
    Ok(())
}
