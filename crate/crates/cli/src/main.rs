use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adastep::harness::config::ExperimentConfig;
use adastep::harness::diagnostics::compute_diagnostics;
use adastep::harness::export::{export_plot_data, Aggregate};
use adastep::harness::runner::{resolve_output_path, run_to_file};
use adastep::harness::sweep::{run_sweep, GridAxis};
use adastep::harness::trace::{write_atomic, Trace};
use adastep::harness::{verify, LoadedProblem};
use adastep::problems::{to_libsvm_string, ClassificationSpec, DiagonalQuadratic, QuadraticSpec, Regime};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "adastep",
    version,
    about = "Adaptive stepsize experiments on finite-sum problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic problem to a file.
    Generate {
        #[command(subcommand)]
        what: GenerateKind,
    },
    /// Run one experiment config and write its trace.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Trace path; defaults to the config's `output` or `trace.jsonl`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a hyperparameter grid and print a summary table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Grid axis `key=lo..hi` (powers of ten) or `key=v1,v2,...`; repeatable.
        #[arg(long, required = true)]
        grid: Vec<String>,
        /// Comma-separated seeds; defaults to the config seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Directory receiving one trace per run.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Evaluate noise levels and theory constants for a trace.
    Diagnose {
        #[arg(long)]
        trace: PathBuf,
        /// Seed for Monte-Carlo batch averages when enumeration is too large.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the counterexamples and helper inequalities.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Convert traces to CSV for plotting.
    ExportPlot {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = AggregateArg::None)]
        aggregate: AggregateArg,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GenerateKind {
    /// Diagonal quadratic as JSON.
    Quadratic {
        #[arg(long, value_enum)]
        regime: RegimeArg,
        #[arg(long)]
        interpolated: bool,
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        mask_prob: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sparse binary classification data in LIBSVM format.
    Classification {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    StronglyConvex,
    GeneralConvex,
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregateArg {
    None,
    MeanStd,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            let p = resolve_output_path(p);
            write_atomic(&p, text.as_bytes()).with_context(|| format!("writing {}", p.display()))?;
            log::info!("wrote {}", p.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("loading config {}", path.display()))
}

fn generate(what: GenerateKind) -> Result<()> {
    match what {
        GenerateKind::Quadratic {
            regime,
            interpolated,
            n,
            d,
            seed,
            mask_prob,
            out,
        } => {
            let regime = match regime {
                RegimeArg::StronglyConvex => Regime::StronglyConvex,
                RegimeArg::GeneralConvex => Regime::GeneralConvex,
            };
            let mut spec = QuadraticSpec::new(regime, interpolated, n, d, seed);
            if let Some(p) = mask_prob {
                spec.mask_prob = p;
            }
            let problem = DiagonalQuadratic::generate(&spec)?;
            emit(Some(&out), &problem.to_json()?)
        }
        GenerateKind::Classification { rows, dim, seed, out } => {
            let data = ClassificationSpec::new(rows, dim, seed).generate()?;
            emit(Some(&out), &to_libsvm_string(&data))
        }
    }
}

fn run(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let out = out
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("trace.jsonl"));
    let path = resolve_output_path(&out);
    let trace =
        run_to_file(&cfg, &path).with_context(|| format!("run aborted; partial trace in {}", path.display()))?;
    let s = &trace.summary;
    println!(
        "{} seed={} iterations={} gradient_cost={} final_suboptimality={:e} trace={}",
        trace.header.algorithm,
        cfg.seed,
        s.iterations,
        s.gradient_cost,
        s.final_suboptimality,
        path.display()
    );
    Ok(())
}

fn sweep(config: &Path, grid: &[String], seeds: Vec<u64>, out_dir: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(config)?;
    let axes = grid
        .iter()
        .map(|g| GridAxis::parse(g))
        .collect::<adastep::Result<Vec<_>>>()?;
    let seeds = if seeds.is_empty() { vec![cfg.seed] } else { seeds };
    let result = run_sweep(&cfg, &axes, &seeds)?;
    print!("{}", result.table());
    match result.best {
        Some(k) => println!("best (final suboptimality): row {}", k + 1),
        None => println!("best (final suboptimality): none, every run aborted"),
    }
    if let Some(dir) = out_dir {
        let dir = resolve_output_path(&dir);
        for (k, runs) in result.traces.iter().enumerate() {
            for tr in runs {
                let path = dir.join(format!("point{:03}-seed{}.jsonl", k + 1, tr.header.config.seed));
                tr.write_atomic(&path)?;
            }
        }
    }
    Ok(())
}

fn diagnose(trace_path: &Path, seed: u64, out: Option<PathBuf>) -> Result<()> {
    let trace = Trace::load(trace_path).with_context(|| format!("reading trace {}", trace_path.display()))?;
    let problem = LoadedProblem::load(&trace.header.config.problem)?;
    let optimum = problem.reference_optimum()?;
    let report = compute_diagnostics(problem.as_dyn(), &optimum, trace.header.config.batch_size, &trace, seed)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    emit(out.as_deref(), &text)
}

fn verify_all(seed: u64) -> Result<()> {
    let outcomes = verify::run_all(seed)?;
    let mut failed = 0;
    for o in &outcomes {
        println!("{}", o.line());
        failed += usize::from(!o.passed);
    }
    if failed > 0 {
        bail!("{failed} of {} checks failed", outcomes.len());
    }
    Ok(())
}

fn export_plot(traces: &[PathBuf], aggregate: AggregateArg, out: Option<PathBuf>) -> Result<()> {
    let traces = traces
        .iter()
        .map(|p| Trace::load(p).with_context(|| format!("reading trace {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let aggregate = match aggregate {
        AggregateArg::None => Aggregate::None,
        AggregateArg::MeanStd => Aggregate::MeanStd,
    };
    emit(out.as_deref(), &export_plot_data(&traces, aggregate)?)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { what } => generate(what),
        Command::Run { config, seed, out } => run(&config, seed, out),
        Command::Sweep {
            config,
            grid,
            seeds,
            out_dir,
        } => sweep(&config, &grid, seeds, out_dir),
        Command::Diagnose { trace, seed, out } => diagnose(&trace, seed, out),
        Command::Verify { seed } => verify_all(seed),
        Command::ExportPlot { traces, aggregate, out } => export_plot(&traces, aggregate, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
