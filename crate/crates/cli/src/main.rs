//! Experiment driver: generates labeled snapshot datasets, runs the
//! detector against them, sweeps parameters, and times the solver.
//!
//! Every artifact except timing.csv is byte-deterministic in (config,
//! flags): rerunning with the same seed reproduces report.csv, sweep.csv,
//! dataset.bin, labels.txt, and lambda.txt exactly.

mod config;
mod pipeline;
mod report;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use subslope::{
    metrics, sim, solver, ArrayGeometry, PenaltyVector,
    sim::DatasetHeader,
};

use config::ExperimentSpec;
use pipeline::{compute_lambda, run_replications, timed};
use report::TimingRow;

#[derive(Parser)]
#[command(name = "subslope", version, about = "Sparse-interference subspace detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled dataset: dataset.bin and labels.txt
    Generate(CommonArgs),
    /// Score a stored dataset against its labels: report.csv and timing.csv
    Detect(DetectArgs),
    /// Generate, calibrate, solve, score: report.csv, timing.csv, lambda.txt
    Run(CommonArgs),
    /// Repeat runs across a one-parameter grid: sweep.csv and timing.csv
    Sweep(CommonArgs),
    /// Write the penalty sequence: lambda.txt
    Lambda(CommonArgs),
    /// Time repeated solves of one dataset: timing.csv
    Bench(CommonArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// TOML experiment config; flags below override individual keys
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base RNG seed; replication i uses seed + i
    #[arg(long)]
    seed: Option<u64>,
    /// Snapshot count
    #[arg(long)]
    n: Option<usize>,
    /// Channel count
    #[arg(long)]
    m: Option<usize>,
    /// Signal subspace dimension
    #[arg(long)]
    d: Option<usize>,
    /// Per-snapshot interference probability
    #[arg(long)]
    p: Option<f64>,
    /// Interference scale (random and directed-rand-amp regimes)
    #[arg(long)]
    sigma_delta: Option<f64>,
    /// Interference amplitude (directed-const regime)
    #[arg(long)]
    s_delta: Option<f64>,
    /// Target false discovery rate
    #[arg(long)]
    q: Option<f64>,
    /// Solver convergence threshold on the objective decrease
    #[arg(long)]
    eta: Option<f64>,
    /// Solver iteration cap
    #[arg(long)]
    max_iters: Option<usize>,
    /// Interference regime: random, directed-rand-amp, directed-const
    #[arg(long)]
    regime: Option<String>,
    /// Parameter grid, e.g. --sweep p=0.05,0.1,0.2
    #[arg(long)]
    sweep: Option<String>,
    /// Replications per setting
    #[arg(long)]
    reps: Option<usize>,
    /// Output directory (created if missing)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Dataset file written by `generate`
    #[arg(long)]
    data: PathBuf,
    /// Truth labels written by `generate`
    #[arg(long)]
    labels: PathBuf,
    /// Penalty file, one value per line; computed from config when absent
    #[arg(long)]
    lambda_file: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate(args) => cmd_generate(&args),
        Command::Detect(args) => cmd_detect(&args),
        Command::Run(args) => cmd_run(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Lambda(args) => cmd_lambda(&args),
        Command::Bench(args) => cmd_bench(&args),
    }
}

fn ensure_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn cmd_generate(args: &CommonArgs) -> Result<()> {
    let spec = config::resolve(args)?;
    ensure_out(&spec.out)?;

    let data = sim::generate(&spec.scenario)?;
    let header = DatasetHeader {
        channels: spec.scenario.geometry.channels(),
        snapshots: spec.scenario.n,
        seed: spec.scenario.seed,
        regime: spec.scenario.regime,
    };

    let data_path = spec.out.join("dataset.bin");
    sim::write_dataset(&data_path, &data.x, &header)
        .with_context(|| format!("writing {}", data_path.display()))?;
    let labels_path = spec.out.join("labels.txt");
    sim::write_labels(&labels_path, &data.truth_flags())
        .with_context(|| format!("writing {}", labels_path.display()))?;

    println!("wrote {}", data_path.display());
    println!("wrote {}", labels_path.display());
    Ok(())
}

fn cmd_run(args: &CommonArgs) -> Result<()> {
    let spec = config::resolve(args)?;
    ensure_out(&spec.out)?;
    let (m, n) = (spec.scenario.geometry.channels(), spec.scenario.n);

    let (lambda, lam_seconds) = timed(|| compute_lambda(&spec));
    let lambda = lambda?;
    let outcomes = run_replications(&spec, &lambda)?;

    let mut rows = Vec::new();
    let mut timing = vec![TimingRow {
        command: "run",
        phase: "lambda",
        sweep_key: None,
        sweep_value: None,
        rep: None,
        seed: spec.scenario.seed,
        snapshots: n,
        channels: m,
        iterations: None,
        converged: None,
        seconds: lam_seconds,
    }];
    for o in &outcomes {
        rows.push(report::report_row(
            &spec,
            &spec.scenario,
            o.rep,
            o.seed,
            &o.report,
        ));
        timing.push(TimingRow {
            command: "run",
            phase: "generate",
            sweep_key: None,
            sweep_value: None,
            rep: Some(o.rep),
            seed: o.seed,
            snapshots: n,
            channels: m,
            iterations: None,
            converged: None,
            seconds: o.gen_seconds,
        });
        timing.push(TimingRow {
            command: "run",
            phase: "detect",
            sweep_key: None,
            sweep_value: None,
            rep: Some(o.rep),
            seed: o.seed,
            snapshots: n,
            channels: m,
            iterations: Some(o.report.solver.iterations),
            converged: Some(o.report.solver.converged),
            seconds: o.solve_seconds,
        });
    }

    write_artifacts(
        &spec.out,
        Some(("report.csv", report::report_header(), rows)),
        Some(&lambda),
        &timing,
    )?;
    let converged = outcomes.iter().filter(|o| o.report.solver.converged).count();
    println!("{} replication(s), {} converged", outcomes.len(), converged);
    Ok(())
}

fn cmd_sweep(args: &CommonArgs) -> Result<()> {
    let spec = config::resolve(args)?;
    let sweep = spec
        .sweep
        .clone()
        .context("sweep requires --sweep KEY=v1,v2,... or a [sweep] config section")?;
    ensure_out(&spec.out)?;

    let mut rows = Vec::new();
    let mut timing = Vec::new();
    for (vi, &value) in sweep.values.iter().enumerate() {
        let mut adjusted = spec.with_sweep_value(sweep.key, value)?;
        // Distinct seed block per grid point, contiguous with rep offsets.
        adjusted.scenario.seed = spec
            .scenario
            .seed
            .wrapping_add((vi * spec.replications) as u64);
        let (m, n) = (adjusted.scenario.geometry.channels(), adjusted.scenario.n);

        let (lambda, lam_seconds) = timed(|| compute_lambda(&adjusted));
        let lambda = lambda?;
        timing.push(TimingRow {
            command: "sweep",
            phase: "lambda",
            sweep_key: Some(sweep.key.label()),
            sweep_value: Some(value),
            rep: None,
            seed: adjusted.scenario.seed,
            snapshots: n,
            channels: m,
            iterations: None,
            converged: None,
            seconds: lam_seconds,
        });

        for o in run_replications(&adjusted, &lambda)? {
            rows.push(format!(
                "{},{},{}",
                sweep.key.label(),
                value,
                report::report_row(&adjusted, &adjusted.scenario, o.rep, o.seed, &o.report)
            ));
            timing.push(TimingRow {
                command: "sweep",
                phase: "detect",
                sweep_key: Some(sweep.key.label()),
                sweep_value: Some(value),
                rep: Some(o.rep),
                seed: o.seed,
                snapshots: n,
                channels: m,
                iterations: Some(o.report.solver.iterations),
                converged: Some(o.report.solver.converged),
                seconds: o.gen_seconds + o.solve_seconds,
            });
        }
    }

    let sweep_path = spec.out.join("sweep.csv");
    report::write_csv(&sweep_path, &report::sweep_header(), &rows)?;
    println!("wrote {}", sweep_path.display());
    write_timing(&spec.out, &timing)?;
    Ok(())
}

fn cmd_lambda(args: &CommonArgs) -> Result<()> {
    let spec = config::resolve(args)?;
    ensure_out(&spec.out)?;
    let lambda = compute_lambda(&spec)?;
    let path = spec.out.join("lambda.txt");
    report::write_lambda(&path, &lambda)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_detect(args: &DetectArgs) -> Result<()> {
    let spec = config::resolve(&args.common)?;
    ensure_out(&spec.out)?;

    let (x, header) = sim::read_dataset(&args.data)
        .with_context(|| format!("reading {}", args.data.display()))?;
    let truth = sim::read_labels(&args.labels)
        .with_context(|| format!("reading {}", args.labels.display()))?;
    if truth.len() != x.snapshots() {
        bail!(
            "{} has {} labels but {} holds {} snapshots",
            args.labels.display(),
            truth.len(),
            args.data.display(),
            x.snapshots()
        );
    }

    // The stored header fixes the data shape and provenance; the config
    // still supplies everything the file cannot know (spacing, q, solver).
    let mut scenario = spec.scenario;
    scenario.geometry = ArrayGeometry::new(
        header.channels,
        spec.scenario.geometry.spacing_wavelengths(),
    )?;
    scenario.n = header.snapshots;
    scenario.regime = header.regime;
    scenario.seed = header.seed;
    let spec = ExperimentSpec { scenario, ..spec };

    let mut timing = Vec::new();
    let lambda = match &args.lambda_file {
        Some(path) => read_lambda_file(path)?,
        None => {
            let (lambda, seconds) = timed(|| compute_lambda(&spec));
            timing.push(TimingRow {
                command: "detect",
                phase: "lambda",
                sweep_key: None,
                sweep_value: None,
                rep: None,
                seed: scenario.seed,
                snapshots: scenario.n,
                channels: header.channels,
                iterations: None,
                converged: None,
                seconds,
            });
            lambda?
        }
    };
    if lambda.len() != x.snapshots() {
        bail!(
            "penalty has {} entries but {} holds {} snapshots",
            lambda.len(),
            args.data.display(),
            x.snapshots()
        );
    }

    let (scored, seconds) = timed(|| {
        metrics::detect_and_report(&x, &truth, &scenario.geometry, scenario.d, &lambda, &spec.solver)
    });
    let (rep, _) = scored?;
    timing.push(TimingRow {
        command: "detect",
        phase: "detect",
        sweep_key: None,
        sweep_value: None,
        rep: Some(0),
        seed: scenario.seed,
        snapshots: scenario.n,
        channels: header.channels,
        iterations: Some(rep.solver.iterations),
        converged: Some(rep.solver.converged),
        seconds,
    });

    let rows = vec![report::report_row(&spec, &scenario, 0, scenario.seed, &rep)];
    write_artifacts(
        &spec.out,
        Some(("report.csv", report::report_header(), rows)),
        None,
        &timing,
    )?;
    Ok(())
}

fn cmd_bench(args: &CommonArgs) -> Result<()> {
    let spec = config::resolve(args)?;
    ensure_out(&spec.out)?;
    let (m, n) = (spec.scenario.geometry.channels(), spec.scenario.n);
    let base = |phase, rep, seconds| TimingRow {
        command: "bench",
        phase,
        sweep_key: None,
        sweep_value: None,
        rep,
        seed: spec.scenario.seed,
        snapshots: n,
        channels: m,
        iterations: None,
        converged: None,
        seconds,
    };

    let (data, gen_seconds) = timed(|| sim::generate(&spec.scenario));
    let data = data?;
    let (lambda, lam_seconds) = timed(|| compute_lambda(&spec));
    let lambda = lambda?;

    let mut timing = vec![
        base("generate", None, gen_seconds),
        base("lambda", None, lam_seconds),
    ];
    for rep in 0..spec.replications {
        let (result, seconds) =
            timed(|| solver::solve(&data.x, spec.scenario.d, &lambda, &spec.solver));
        let result = result?;
        let mut row = base("solve", Some(rep), seconds);
        row.iterations = Some(result.iterations);
        row.converged = Some(result.converged);
        timing.push(row);
        println!(
            "solve {}: {:.3}s over {} iteration(s)",
            rep, seconds, result.iterations
        );
    }
    write_timing(&spec.out, &timing)?;
    Ok(())
}

/// Writes whichever of report.csv / lambda.txt apply, then timing.csv.
fn write_artifacts(
    out: &Path,
    report: Option<(&str, String, Vec<String>)>,
    lambda: Option<&PenaltyVector>,
    timing: &[TimingRow],
) -> Result<()> {
    if let Some((name, header, rows)) = report {
        let path = out.join(name);
        report::write_csv(&path, &header, &rows)?;
        println!("wrote {}", path.display());
    }
    if let Some(lambda) = lambda {
        let path = out.join("lambda.txt");
        report::write_lambda(&path, lambda)?;
        println!("wrote {}", path.display());
    }
    write_timing(out, timing)
}

fn write_timing(out: &Path, timing: &[TimingRow]) -> Result<()> {
    let rows: Vec<String> = timing.iter().map(TimingRow::csv_row).collect();
    let path = out.join("timing.csv");
    report::write_csv(&path, report::timing_header(), &rows)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn read_lambda_file(path: &Path) -> Result<PenaltyVector> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v = t.parse::<f64>().with_context(|| {
            format!("{} line {}: bad penalty value '{t}'", path.display(), lineno + 1)
        })?;
        values.push(v);
    }
    Ok(PenaltyVector::new(values)?)
}
