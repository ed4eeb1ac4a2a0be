use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use copra_core::bench::{run_benchmark, write_report, ScenarioConfig, ScenarioId};
use copra_core::error::{CopraError, Result};
use copra_core::estimators::Method;
use copra_core::io::{read_matrix_csv, read_vector_csv, ComplexFormat};
use copra_core::solver::{newton_solve, SolverConfig};
use copra_core::spectral::decompose;

#[derive(Parser)]
#[command(name = "copra", version, about = "Ridge-parameter selection and benchmarking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select the regularizer for a model given as CSV files
    Select {
        /// Model matrix CSV, one row per line
        #[arg(long)]
        matrix: PathBuf,
        /// Observation vector CSV
        #[arg(long)]
        obs: PathBuf,
        /// Complex entry encoding: paired (re,im columns) or suffix (re+imj)
        #[arg(long = "complex", value_name = "FORMAT")]
        complex_format: Option<String>,
        /// Relative stopping factor for the Newton iteration
        #[arg(long, default_value_t = 1e-9)]
        rho: f64,
        /// Write the selection result as JSON
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte-Carlo benchmark scenario
    Bench {
        /// Scenario: s1, s2, or s3
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated list from copra,ls,lmmse,gcv,quasiopt
        #[arg(long, default_value = "copra,ls,lmmse,gcv,quasiopt")]
        methods: String,
        /// Results CSV path (manifest written alongside)
        #[arg(long)]
        out: PathBuf,
        /// Override the sweep as lo:step:hi in dB
        #[arg(long)]
        sweep: Option<String>,
    },
}

fn parse_sweep(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(CopraError::InvalidInput(format!(
            "sweep must be lo:step:hi, got '{spec}'"
        )));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| CopraError::InvalidInput(format!("bad sweep component '{p}'")))
        })
        .collect::<Result<_>>()?;
    let (lo, step, hi) = (nums[0], nums[1], nums[2]);
    if step <= 0.0 || hi < lo {
        return Err(CopraError::InvalidInput(format!(
            "sweep '{spec}' must have positive step and hi >= lo"
        )));
    }
    let mut points = Vec::new();
    let mut v = lo;
    while v <= hi + 1e-9 {
        points.push(v);
        v += step;
    }
    Ok(points)
}

fn run_select(
    matrix: &PathBuf,
    obs: &PathBuf,
    complex_format: Option<&str>,
    rho: f64,
    out: Option<&PathBuf>,
) -> Result<()> {
    let format = match complex_format {
        Some(f) => ComplexFormat::parse(f)?,
        None => ComplexFormat::Real,
    };
    let h = read_matrix_csv(matrix, format)?;
    let y = read_vector_csv(obs, format)?;
    let (_, data) = decompose(&h, &y, None)?;
    let cfg = SolverConfig {
        rho_rel: rho,
        ..SolverConfig::default()
    };
    let sel = newton_solve(&data, &cfg)?;

    let doc = json!({
        "gamma_tilde": sel.gamma_tilde,
        "gamma": sel.gamma,
        "iterations": sel.iterations,
        "converged": sel.converged,
        "fallback_used": sel.fallback_used,
        "residual": sel.residual,
        "bracket": sel.bracket,
        "rows": data.rows,
        "cols": data.cols,
    });
    println!("{}", serde_json::to_string_pretty(&doc).unwrap());
    if let Some(path) = out {
        std::fs::write(path, serde_json::to_string_pretty(&doc).unwrap()).map_err(|e| {
            CopraError::Io {
                path: path.display().to_string(),
                source: e,
            }
        })?;
    }
    Ok(())
}

fn run_bench(
    scenario: &str,
    trials: usize,
    seed: u64,
    methods: &str,
    out: &PathBuf,
    sweep: Option<&str>,
) -> Result<()> {
    let id = ScenarioId::parse(scenario)?;
    let mut cfg = ScenarioConfig::standard(id, trials, seed);
    if let Some(spec) = sweep {
        cfg.sweep_db = parse_sweep(spec)?;
    }
    let methods: Vec<Method> = methods
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(Method::parse)
        .collect::<Result<_>>()?;
    let report = run_benchmark(&cfg, &methods)?;
    write_report(&report, out)?;
    eprintln!(
        "wrote {} rows to {} ({} trials x {} sweep points)",
        report.rows.len(),
        out.display(),
        cfg.trials,
        cfg.sweep_db.len()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Select {
            matrix,
            obs,
            complex_format,
            rho,
            out,
        } => run_select(matrix, obs, complex_format.as_deref(), *rho, out.as_ref()),
        Command::Bench {
            scenario,
            trials,
            seed,
            methods,
            out,
            sweep,
        } => run_bench(scenario, *trials, *seed, methods, out, sweep.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
