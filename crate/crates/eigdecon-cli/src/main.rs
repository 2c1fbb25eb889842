//! `eigdecon`: reproduce the reference experiments, run configs, sweep N or seeds.

mod config;
mod experiment;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use clap::{Parser, Subcommand, ValueEnum};
use eigdecon::pipeline::reference_example;

use config::{ExperimentConfig, Spikes};
use experiment::{execute, Outcome};
use output::{write_outcome, SweepTable};

#[derive(Parser)]
#[command(name = "eigdecon", version, about = "Blind classical and free deconvolution with the eigenmatrix method")]
struct Cli {
    /// Random seed (overrides the config's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Parallel runs for `sweep`.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Use the full reference dimensions (N = 8192 for matrix examples).
    #[arg(long, global = true)]
    full: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run reference example 1-6 and check it against its tolerance.
    Reproduce {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=6))]
        id: u8,
        /// Override the dimension (or sample count).
        #[arg(long = "n")]
        n: Option<usize>,
        /// Histogram bins.
        #[arg(long)]
        bins: Option<usize>,
        /// Feed the noiseless forward model instead of a simulated spectrum.
        #[arg(long)]
        noiseless: bool,
    },
    /// Run an experiment described by a JSON config.
    Run {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Repeat a config over several dimensions or seeds.
    Sweep {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long)]
        vary: Vary,
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        values: Vec<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Vary {
    #[value(name = "N", alias = "n")]
    N,
    #[value(name = "seed")]
    Seed,
}

enum Failure {
    Tolerance(String),
    Error(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Error(e.into())
    }
}

fn out_dir(cli: &Cli, cfg: Option<&ExperimentConfig>, fallback: &str) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from(fallback))
}

fn summarize(out: &Outcome) {
    for r in &out.rows {
        match (r.true_x, r.abs_error) {
            (Some(t), Some(e)) => eprintln!("  x = {t:<8} recovered {:.6}  error {e:.2e}  weight {:.4}", r.recovered_x, r.weight),
            _ => eprintln!("  recovered {:.6}  weight {:.4}", r.recovered_x, r.weight),
        }
    }
    for w in &out.report.warnings {
        eprintln!("  warning: {w}");
    }
}

fn write(dir: &Path, out: &Outcome, tol: Option<f64>) -> anyhow::Result<()> {
    for p in write_outcome(dir, out, tol)? {
        eprintln!("  wrote {}", p.display());
    }
    Ok(())
}

fn reproduce(cli: &Cli, id: u8, n: Option<usize>, bins: Option<usize>, noiseless: bool) -> Result<(), Failure> {
    let ex = reference_example(id).ok_or_else(|| anyhow::anyhow!("no example {id}"))?;
    let dimension = n.unwrap_or(if cli.full { ex.dimension_full } else { ex.dimension_desk });
    let cfg = ExperimentConfig {
        mode: Some(ex.mode),
        family: ex.family,
        true_parameters: ex.xs.clone(),
        dimension: (!noiseless).then_some(dimension),
        seed: cli.seed.unwrap_or(0),
        spikes: Some(Spikes::Fixed(ex.xs.len())),
        noiseless,
        spectrum: None,
        bins,
        solver: Default::default(),
        output_dir: None,
    };
    cfg.validate().map_err(|(f, m)| anyhow::anyhow!("`{f}`: {m}"))?;
    let tol = if dimension >= ex.dimension_full { ex.tol_full } else { ex.tol_desk };
    let size = if noiseless { "noiseless".to_string() } else { format!("N = {dimension}, seed {}", cfg.seed) };
    eprintln!("example {id}: {} {} x = {:?}, {size}", ex.mode, ex.family, ex.xs);
    let out = execute(&cfg)?;
    summarize(&out);
    write(&out_dir(cli, None, &format!("out/example-{id}")), &out, Some(tol))?;
    match out.max_error() {
        Some(e) if e <= tol => Ok(()),
        Some(e) => Err(Failure::Tolerance(format!("max error {e:.4} exceeds {tol}"))),
        None => Err(Failure::Tolerance("recovered spike count differs from the truth".into())),
    }
}

fn run(cli: &Cli, path: &Path) -> Result<(), Failure> {
    let mut cfg = config::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out = execute(&cfg)?;
    summarize(&out);
    write(&out_dir(cli, Some(&cfg), "out"), &out, None)?;
    Ok(())
}

fn sweep(cli: &Cli, path: &Path, vary: Vary, values: &[u64]) -> Result<(), Failure> {
    let mut base = config::load(path)?;
    if let Some(s) = cli.seed {
        base.seed = s;
    }
    let configs: Vec<ExperimentConfig> = values
        .iter()
        .map(|&v| {
            let mut c = base.clone();
            match vary {
                Vary::N => c.dimension = Some(v as usize),
                Vary::Seed => c.seed = v,
            }
            c.validate().map_err(|(f, m)| anyhow::anyhow!("value {v}: `{f}`: {m}"))?;
            Ok(c)
        })
        .collect::<anyhow::Result<_>>()?;
    let root = out_dir(cli, Some(&base), "out");
    let label = match vary {
        Vary::N => "N",
        Vary::Seed => "seed",
    };
    let spikes = match base.spikes() {
        eigdecon::SpikeCount::Fixed(n) => n,
        eigdecon::SpikeCount::Auto => base.true_parameters.len(),
    };
    let mut table = SweepTable::new(root.join("sweep.csv"), spikes);

    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<(usize, anyhow::Result<Outcome>)>();
    let jobs = cli.jobs.clamp(1, configs.len().max(1));
    let mut failure: Option<anyhow::Error> = None;
    std::thread::scope(|s| {
        for _ in 0..jobs {
            let tx = tx.clone();
            let (next, stop, configs) = (&next, &stop, &configs);
            s.spawn(move || loop {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= configs.len() {
                    break;
                }
                if tx.send((i, execute(&configs[i]))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut pending: Vec<Option<anyhow::Result<Outcome>>> = (0..configs.len()).map(|_| None).collect();
        let mut emitted = 0;
        for (i, res) in rx {
            pending[i] = Some(res);
            while emitted < configs.len() && failure.is_none() {
                let Some(res) = pending[emitted].take() else { break };
                let value = values[emitted].to_string();
                match res.and_then(|out| {
                    write_outcome(&root.join(format!("{label}-{value}")), &out, None)?;
                    Ok(out)
                }) {
                    Ok(out) => {
                        let errs = out.errors();
                        eprintln!("{label} = {value}: max error {}", out.max_error().map(|e| format!("{e:.4e}")).unwrap_or("n/a".into()));
                        if let Err(e) = table.push(&value, errs.as_deref()) {
                            failure = Some(e);
                        }
                    }
                    Err(e) => failure = Some(e.context(format!("{label} = {value}"))),
                }
                emitted += 1;
            }
            if failure.is_some() {
                stop.store(true, Ordering::Relaxed);
            }
        }
    });
    table.flush()?;
    eprintln!("  wrote {}", root.join("sweep.csv").display());
    match failure {
        Some(e) => Err(Failure::Error(e)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Reproduce { id, n, bins, noiseless } => reproduce(&cli, *id, *n, *bins, *noiseless),
        Command::Run { config } => run(&cli, config),
        Command::Sweep { config, vary, values } => sweep(&cli, config, *vary, values),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Tolerance(m)) => {
            eprintln!("FAIL: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
