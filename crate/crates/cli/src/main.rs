//! `compgrad` command-line runner.
//!
//! `compgrad run` executes one experiment or a sweep (methods x compressors
//! x node counts) and writes one trace CSV per cell plus `resolved.json`;
//! `compgrad validate` resolves and prints the schedule without running.
//! Errors print a single machine-parsable line `ERROR <stage>: ...`.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use compgrad::harness::{
    resolve, run_on_objective, solve_reference, trace_to_csv, ReferenceOptions, RunResult,
};
use compgrad::{DenseVector, ReferenceSolution64, Schedule};

use config::{CliOverrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "compgrad",
    about = "Compressed gradient descent experiment runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run experiments and write trace CSVs.
    Run(RunArgs),
    /// Resolve constants and schedules without running.
    Validate(RunArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON config file; command-line flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Method: cgd | acgd-cvx | acgd-scvx | dcgd | diana | adiana.
    #[arg(long)]
    method: Option<String>,
    /// Compressor: identity | randk[:<r>] | dithering[:<s>] | natural.
    #[arg(long)]
    compressor: Option<String>,
    /// LIBSVM dataset path.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Number of simulated nodes.
    #[arg(long)]
    nodes: Option<usize>,
    /// Ridge weight folded into the smooth losses.
    #[arg(long)]
    lambda: Option<f64>,
    /// Optional l1 weight (enables the proximal path).
    #[arg(long)]
    l1: Option<f64>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_iters: Option<u64>,
    #[arg(long)]
    max_bits: Option<f64>,
    /// Partition scheme: contiguous | shuffled.
    #[arg(long)]
    partition: Option<String>,
    /// Record Lyapunov diagnostics (adiana only).
    #[arg(long)]
    diagnostics: bool,
    /// Output directory for traces and resolved.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Step size override.
    #[arg(long)]
    eta: Option<f64>,
    /// Shift rate override (diana/adiana).
    #[arg(long)]
    alpha: Option<f64>,
    /// Assumed variance parameter for natural compression.
    #[arg(long)]
    natural_omega: Option<f64>,
    /// Charge adiana's shift message to the bit meter.
    #[arg(long)]
    count_shift_message: Option<bool>,
    /// Record every k-th iteration.
    #[arg(long)]
    trace_every: Option<u64>,
    /// Multiply per-round bits by the node count.
    #[arg(long)]
    multiply_bits_by_nodes: Option<bool>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("COMPGRAD_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Validate(args) => cmd_validate(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!(
                "ERROR {}: {}",
                err.stage,
                err.source.to_string().replace('\n', " ")
            );
            ExitCode::from(1)
        }
    }
}

/// Error tagged with the pipeline stage it occurred in.
struct StagedError {
    stage: &'static str,
    source: anyhow::Error,
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, StagedError>;
}

impl<T, E: Into<anyhow::Error>> Stage<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T, StagedError> {
        self.map_err(|e| StagedError {
            stage,
            source: e.into(),
        })
    }
}

fn stage_of(err: &compgrad::HarnessError) -> &'static str {
    use compgrad::HarnessError::*;
    match err {
        Dataset(_) => "dataset",
        Objective(_) => "objective",
        Schedule(_) => "schedule",
        Io(_) => "io",
        Compressor(_) | Config(_) => "config",
    }
}

fn stage_resolved<T>(r: Result<T, compgrad::HarnessError>) -> Result<T, StagedError> {
    r.map_err(|e| StagedError {
        stage: stage_of(&e),
        source: e.into(),
    })
}

fn load_config(args: &RunArgs) -> Result<RunConfig, StagedError> {
    let mut config = match &args.config {
        Some(path) => RunConfig::from_file(path).stage("config")?,
        None => RunConfig::default(),
    };
    config.apply_flags(&CliOverrides {
        method: args.method.clone(),
        compressor: args.compressor.clone(),
        dataset: args.dataset.clone(),
        nodes: args.nodes,
        lambda: args.lambda,
        l1: args.l1,
        seed: args.seed,
        max_iters: args.max_iters,
        max_bits: args.max_bits,
        partition: args.partition.clone(),
        diagnostics: args.diagnostics,
        out: args.out.clone(),
        eta: args.eta,
        alpha: args.alpha,
        natural_omega: args.natural_omega,
        count_shift_message: args.count_shift_message,
        trace_every: args.trace_every,
        multiply_bits_by_nodes: args.multiply_bits_by_nodes,
    });
    Ok(config)
}

fn cmd_validate(args: &RunArgs) -> Result<(), StagedError> {
    let config = load_config(args)?;
    let cells = config.cells().stage("config")?;
    for cell in &cells {
        let resolved = stage_resolved(resolve::<f64>(&cell.spec))?;
        println!(
            "cell {}: d={} m={} L={:.6e} mu={:.6e} omega={:.6e} bits/msg={:.1}",
            cell.name,
            resolved.constants.dim,
            resolved.constants.samples,
            resolved.constants.l,
            resolved.constants.mu,
            resolved.constants.omega,
            resolved.constants.bits_per_message,
        );
        println!("  {}", schedule_line(&resolved.schedule));
        if resolved.constants.frobenius_fallback {
            println!("  note: power iteration fell back to the Frobenius bound");
        }
    }
    Ok(())
}

fn schedule_line(schedule: &Schedule<f64>) -> String {
    match schedule {
        Schedule::Cgd { eta } => format!("cgd: eta={eta:.6e}"),
        Schedule::Dcgd { eta } => format!("dcgd: eta={eta:.6e}"),
        Schedule::Acgd(s) => format!(
            "acgd: eta={:.6e} p={:.6e} theta0={:.6e} beta0={:.6e} gamma0={:.6e}",
            s.eta,
            s.p,
            s.theta(0),
            s.beta(0),
            s.gamma(0)
        ),
        Schedule::Diana(p) => format!("diana: eta={:.6e} alpha={:.6e}", p.eta, p.alpha),
        Schedule::Adiana(s) => format!(
            "adiana: eta={:.6e} theta1={:.6e} theta2={:.6e} alpha={:.6e} beta={:.6e} gamma={:.6e} p={:.6e}",
            s.eta, s.theta1, s.theta2, s.alpha, s.beta, s.gamma, s.p
        ),
    }
}

fn cmd_run(args: &RunArgs) -> Result<(), StagedError> {
    let config = load_config(args)?;
    let cells = config.cells().stage("config")?;
    let out_dir = config.out_dir();
    std::fs::create_dir_all(&out_dir).stage("io")?;

    let resolved_config = config.normalized().stage("config")?;
    write_atomic(
        &out_dir.join("resolved.json"),
        &serde_json::to_string_pretty(&resolved_config).stage("io")?,
    )
    .stage("io")?;

    // One reference solve per objective group (same dataset/nodes/lambda/
    // l1/partition/seed); cells inside a group run in parallel.
    let mut summaries: Vec<Option<Summary>> = vec![None; cells.len()];
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by_key(|&i| cells[i].objective_key());

    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len()
            && cells[order[end]].objective_key() == cells[order[start]].objective_key()
        {
            end += 1;
        }
        let group: Vec<usize> = order[start..end].to_vec();
        run_group(&cells, &group, &out_dir, &mut summaries)?;
        start = end;
    }

    println!(
        "{:<12} {:<14} {:>6} {:>12} {:>14} {:>14}",
        "method", "compressor", "nodes", "iterations", "total_bits", "final_f_gap"
    );
    for (cell, summary) in cells.iter().zip(summaries.iter()) {
        let s = summary.as_ref().expect("all cells ran");
        println!(
            "{:<12} {:<14} {:>6} {:>12} {:>14.6e} {:>14.6e}",
            cell.spec.method.to_string(),
            cell.spec.compressor.to_string(),
            cell.spec.nodes,
            s.iterations,
            s.total_bits,
            s.final_f_gap
        );
    }
    Ok(())
}

#[derive(Clone)]
struct Summary {
    iterations: u64,
    total_bits: f64,
    final_f_gap: f64,
}

fn run_group(
    cells: &[config::Cell],
    group: &[usize],
    out_dir: &Path,
    summaries: &mut [Option<Summary>],
) -> Result<(), StagedError> {
    // resolve the shared objective once
    let first = &cells[group[0]];
    let resolved0 = stage_resolved(resolve::<f64>(&first.spec))?;
    let reference: ReferenceSolution64 =
        solve_reference(&resolved0.objective, &ReferenceOptions::default()).stage("run")?;

    let results: Vec<(usize, Result<RunResult, compgrad::HarnessError>)> = {
        use rayon::prelude::*;
        group
            .par_iter()
            .map(|&idx| {
                let cell = &cells[idx];
                let run = resolve::<f64>(&cell.spec).and_then(|resolved| {
                    run_on_objective(
                        &resolved.objective,
                        &resolved.compressor,
                        resolved.schedule,
                        DenseVector::zeros(resolved.objective.dim()),
                        resolved.seed,
                        &reference,
                        &resolved.settings,
                    )
                });
                (idx, run)
            })
            .collect()
    };

    for (idx, run) in results {
        let cell = &cells[idx];
        let result = run.stage("run")?;
        let csv = trace_to_csv(&result.trace, cell.spec.diagnostics);
        write_atomic(&out_dir.join(format!("{}.csv", cell.name)), &csv).stage("io")?;
        summaries[idx] = Some(Summary {
            iterations: result.iterations,
            total_bits: result.total_bits,
            final_f_gap: result.final_f_gap,
        });
    }
    Ok(())
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), anyhow::Error> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}
