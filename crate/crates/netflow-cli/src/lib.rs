//! Experiment runner: file loading, subcommand dispatch, report emission.
//!
//! Outputs are deterministic: given the same config and seed, reruns produce
//! byte-identical files. Errors never panic the process; they surface with
//! the originating module's message and a nonzero exit status.

pub mod formats;
pub mod pool;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use netflow_core::flow::{evolve_exact, evolve_upwind, Evolver, FlowSystem};
use netflow_core::grid::GridFunction;
use netflow_core::matrices::NetworkMatrices;
use netflow_core::resolvent::{pseudoresolvent_defect, ResolventOperator};
use netflow_core::rng::SplitMix64;
use netflow_core::tk::{
    tk1_resolvent_context, tk1_resolvent_rows, tk1_semigroup_context, tk1_semigroup_rows,
    ConvergenceReport, ReportMeta, TkExperiment,
};
use netflow_core::Complex64;

use formats::{
    fmt_full, gnuplot_files, load_function, load_graph, parse_complex, render_matrix,
    report_to_csv, validate_report_text, write_function,
};

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    Usage(String),
}

fn domain(e: impl std::fmt::Display) -> AppError {
    AppError::Domain(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "netflow",
    version,
    about = "Transport flows on growing directed metric networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the incidence, adjacency, and line-graph matrices of a network
    Matrices {
        /// Graph file (JSON: vertices, edges, optional velocities)
        graph: PathBuf,
    },
    /// Evolve an initial edge profile under the transport flow
    Simulate {
        graph: PathBuf,
        /// Initial profile in the function file format
        #[arg(long)]
        initial: PathBuf,
        /// Evolution time
        #[arg(long)]
        t: f64,
        /// Exact shift evaluator (unit velocities, grid-aligned t); default
        #[arg(long, conflicts_with = "upwind")]
        exact: bool,
        /// First-order upwind evaluator
        #[arg(long)]
        upwind: bool,
        /// CFL number for the upwind evaluator
        #[arg(long, default_value_t = 1.0)]
        cfl: f64,
        /// Expected grid resolution of the initial profile
        #[arg(long)]
        cells: Option<usize>,
        /// Output function file
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply the generator resolvent R(lambda, A) to an initial profile
    Resolvent {
        graph: PathBuf,
        /// Spectral point, `re` or `re,im` with re > 0
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
        #[arg(long)]
        initial: PathBuf,
        #[arg(long)]
        cells: Option<usize>,
        /// Output function file (real part; `.imag` companion for complex lambda)
        #[arg(long)]
        out: PathBuf,
    },
    /// Measure the pseudoresolvent identity defect on random probes
    #[command(name = "pseudoresolvent-check")]
    PseudoresolventCheck {
        graph: PathBuf,
        /// Spectral point, `re` or `re,im` with re > 0
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
        /// Second spectral point, same format
        #[arg(long, allow_hyphen_values = true)]
        mu: String,
        /// Number of random probes
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 256)]
        cells: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Resolvent- and semigroup-error tables along a growing family
    #[command(name = "tk-convergence")]
    TkConvergence {
        /// Growing family; `ladder` is the built-in one
        #[arg(long, default_value = "ladder")]
        family: String,
        /// Largest compared sequence index
        #[arg(long = "n-max")]
        n_max: usize,
        /// Sequence index standing in for the limit
        #[arg(long)]
        reference: usize,
        #[arg(long, default_value_t = 256)]
        cells: usize,
        /// Comma-separated times (default: 0,0.5,1,2,3,5 restricted to
        /// grid-aligned values)
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
        /// Comma-separated spectral points, `2` or `1+2i`
        /// (default: 0.5,1,2,4,1+2i,1-2i)
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        lambdas: Option<Vec<String>>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
        /// Additionally emit two-column plot files per (kind, probe)
        #[arg(long)]
        gnuplot: bool,
        /// Worker count (NETFLOW_THREADS overrides; default: logical cores)
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Validate a report CSV produced by tk-convergence
    #[command(name = "validate-report")]
    ValidateReport { report: PathBuf },
}

/// Parses `re` or `re,im` into a complex scalar.
fn parse_lambda_pair(s: &str) -> Result<Complex64, AppError> {
    let parts: Vec<&str> = s.split(',').collect();
    let bad = || AppError::Usage(format!("bad spectral point '{}'; expected re or re,im", s));
    match parts.as_slice() {
        [re] => Ok(Complex64::new(re.trim().parse().map_err(|_| bad())?, 0.0)),
        [re, im] => Ok(Complex64::new(
            re.trim().parse().map_err(|_| bad())?,
            im.trim().parse().map_err(|_| bad())?,
        )),
        _ => Err(bad()),
    }
}

fn check_cells(f: &GridFunction, cells: Option<usize>) -> Result<(), AppError> {
    if let Some(n) = cells {
        if f.cells() != n {
            return Err(AppError::Usage(format!(
                "initial profile has {} cells, --cells asked for {}",
                f.cells(),
                n
            )));
        }
    }
    Ok(())
}

pub fn try_main(cli: Cli, out: &mut dyn Write) -> Result<(), AppError> {
    match cli.command {
        Command::Matrices { graph } => cmd_matrices(&graph, out),
        Command::Simulate {
            graph,
            initial,
            t,
            exact,
            upwind,
            cfl,
            cells,
            out: out_path,
        } => cmd_simulate(
            &graph, &initial, t, exact, upwind, cfl, cells, &out_path, out,
        ),
        Command::Resolvent {
            graph,
            lambda,
            initial,
            cells,
            out: out_path,
        } => cmd_resolvent(&graph, &lambda, &initial, cells, &out_path, out),
        Command::PseudoresolventCheck {
            graph,
            lambda,
            mu,
            trials,
            cells,
            seed,
        } => cmd_pseudoresolvent_check(&graph, &lambda, &mu, trials, cells, seed, out),
        Command::TkConvergence {
            family,
            n_max,
            reference,
            cells,
            times,
            lambdas,
            seed,
            out: out_path,
            gnuplot,
            threads,
        } => cmd_tk_convergence(
            &family,
            n_max,
            reference,
            cells,
            times.as_deref(),
            lambdas.as_deref(),
            seed,
            &out_path,
            gnuplot,
            threads,
            out,
        ),
        Command::ValidateReport { report } => cmd_validate_report(&report, out),
    }
}

fn cmd_matrices(path: &Path, out: &mut dyn Write) -> Result<(), AppError> {
    let (graph, _velocities) = load_graph(path)?;
    let nm = NetworkMatrices::from_graph(&graph).map_err(domain)?;
    let dense = graph.edge_count() <= 50;
    writeln!(
        out,
        "graph: {} vertices, {} edges, max out-degree {}",
        graph.vertex_count(),
        graph.edge_count(),
        graph.max_out_degree()
    )
    .ok();
    for (name, m) in [
        ("Phi_minus", &nm.phi_minus),
        ("Phi_plus", &nm.phi_plus),
        ("Phi", &nm.phi),
        ("A", &nm.adjacency),
        ("B", &nm.line_adjacency),
    ] {
        write!(out, "{}", render_matrix(name, m, dense)).ok();
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    graph_path: &Path,
    initial: &Path,
    t: f64,
    _exact: bool,
    upwind: bool,
    cfl: f64,
    cells: Option<usize>,
    out_path: &Path,
    out: &mut dyn Write,
) -> Result<(), AppError> {
    let (graph, velocities) = load_graph(graph_path)?;
    let f = load_function(initial)?;
    check_cells(&f, cells)?;
    let sys = FlowSystem::new(graph, velocities).map_err(domain)?;
    let result = if upwind {
        evolve_upwind(&sys, &f, t, cfl).map_err(domain)?
    } else {
        evolve_exact(&sys, &f, t).map_err(domain)?
    };
    write_function(out_path, &result)?;
    writeln!(
        out,
        "evolved {} edges x {} cells to t = {}; wrote {}",
        result.edge_count(),
        result.cells(),
        t,
        out_path.display()
    )
    .ok();
    Ok(())
}

fn cmd_resolvent(
    graph_path: &Path,
    lambda: &str,
    initial: &Path,
    cells: Option<usize>,
    out_path: &Path,
    out: &mut dyn Write,
) -> Result<(), AppError> {
    let lambda = parse_lambda_pair(lambda)?;
    let (graph, velocities) = load_graph(graph_path)?;
    let f = load_function(initial)?;
    check_cells(&f, cells)?;
    let sys = FlowSystem::new(graph, velocities).map_err(domain)?;
    let op = ResolventOperator::new(&sys, lambda).map_err(domain)?;
    writeln!(out, "condition estimate: {:e}", op.condition()).ok();
    if op.below_neumann_threshold() {
        writeln!(
            out,
            "warning: Re(lambda) is below the Neumann sufficiency threshold max(c) ln(sigma); \
             invertibility rests on the reported conditioning"
        )
        .ok();
    }
    let u = op.apply_real(&f).map_err(domain)?;
    write_function(out_path, &u.real_part())?;
    writeln!(out, "wrote {}", out_path.display()).ok();
    if lambda.im != 0.0 {
        let imag_path = PathBuf::from(format!("{}.imag", out_path.display()));
        let imag_values: Vec<f64> = u.values().iter().map(|v| v.im).collect();
        let imag_fn =
            GridFunction::from_values(u.edge_count(), u.cells(), imag_values).map_err(domain)?;
        write_function(&imag_path, &imag_fn)?;
        writeln!(out, "wrote {}", imag_path.display()).ok();
    }
    Ok(())
}

fn cmd_pseudoresolvent_check(
    graph_path: &Path,
    lambda: &str,
    mu: &str,
    trials: usize,
    cells: usize,
    seed: u64,
    out: &mut dyn Write,
) -> Result<(), AppError> {
    let lambda = parse_lambda_pair(lambda)?;
    let mu = parse_lambda_pair(mu)?;
    let (graph, velocities) = load_graph(graph_path)?;
    let edges = graph.edge_count();
    let sys = FlowSystem::new(graph, velocities).map_err(domain)?;
    let mut rng = SplitMix64::new(seed);
    let mut max_defect = 0.0f64;
    for trial in 0..trials.max(1) {
        let f = GridFunction::from_fn(edges, cells, |_, _| rng.next_in(-1.0, 1.0));
        let defect = pseudoresolvent_defect(&sys, lambda, mu, &f).map_err(domain)?;
        writeln!(out, "trial {}: defect = {}", trial, fmt_full(defect)).ok();
        max_defect = max_defect.max(defect);
    }
    writeln!(out, "max defect: {}", fmt_full(max_defect)).ok();
    Ok(())
}

/// Default time grid, restricted to values aligned with the cell width.
fn default_times(cells: usize) -> Vec<f64> {
    [0.0, 0.5, 1.0, 2.0, 3.0, 5.0]
        .into_iter()
        .filter(|t| {
            let q = t * cells as f64;
            (q - q.round()).abs() <= 1e-9 * q.max(1.0)
        })
        .collect()
}

const DEFAULT_LAMBDAS: &str = "0.5,1,2,4,1+2i,1-2i";

#[allow(clippy::too_many_arguments)]
fn cmd_tk_convergence(
    family: &str,
    n_max: usize,
    reference: usize,
    cells: usize,
    times: Option<&[f64]>,
    lambda_strs: Option<&[String]>,
    seed: u64,
    out_path: &Path,
    gnuplot: bool,
    threads: Option<usize>,
    out: &mut dyn Write,
) -> Result<(), AppError> {
    if family != "ladder" {
        return Err(AppError::Usage(format!(
            "unknown family '{}'; available: ladder",
            family
        )));
    }
    if n_max < 1 {
        return Err(AppError::Usage("--n-max must be at least 1".into()));
    }
    if reference < n_max {
        return Err(AppError::Usage(
            "--reference must be at least --n-max".into(),
        ));
    }
    let times: Vec<f64> = match times {
        Some(list) => list.to_vec(),
        None => default_times(cells),
    };
    let lambda_strs: Vec<String> = match lambda_strs {
        Some(list) => list.to_vec(),
        None => DEFAULT_LAMBDAS.split(',').map(str::to_string).collect(),
    };
    let mut lambdas = Vec::with_capacity(lambda_strs.len());
    for s in &lambda_strs {
        lambdas.push(
            parse_complex(s)
                .ok_or_else(|| AppError::Usage(format!("bad spectral point '{}'", s)))?,
        );
    }
    let exp = TkExperiment::ladder(n_max, reference, cells, times.clone(), lambdas, seed)
        .map_err(domain)?;
    let res_ctx = tk1_resolvent_context(&exp).map_err(domain)?;
    let sem_ctx = tk1_semigroup_context(&exp).map_err(domain)?;

    // Independent (kind, n) cells through the worker pool; merged in order.
    let indices = exp.compare_indices().to_vec();
    let k = indices.len();
    let threads = pool::resolve_threads(threads);
    let results = pool::parallel_map(2 * k, threads, |job| {
        if job < k {
            tk1_resolvent_rows(&exp, &res_ctx, indices[job]).map(|rows| (rows, Vec::new()))
        } else {
            tk1_semigroup_rows(&exp, &sem_ctx, indices[job - k])
        }
    });

    let mut rows = Vec::new();
    let mut semigroup_sup = Vec::new();
    for result in results {
        let (r, s) = result.map_err(domain)?;
        rows.extend(r);
        semigroup_sup.extend(s);
    }
    let evaluator = match exp.evolver() {
        Evolver::Exact => "exact".to_string(),
        Evolver::Upwind { cfl } => format!("upwind cfl={}", cfl),
    };
    let report = ConvergenceReport {
        rows,
        semigroup_sup,
        meta: ReportMeta {
            cells: exp.cells(),
            seed: exp.seed(),
            evaluator: evaluator.clone(),
            velocities: "unit".to_string(),
        },
    };

    let times_echo = times
        .iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let lambdas_echo = lambda_strs.join(",");
    let config_echo = format!(
        "tk-convergence family={} n-max={} reference={} cells={} times={} lambdas={} seed={} evaluator={}",
        family, n_max, reference, cells, times_echo, lambdas_echo, seed, evaluator
    );
    let csv = report_to_csv(&report, &config_echo);
    std::fs::write(out_path, &csv).map_err(|e| AppError::Io {
        path: out_path.display().to_string(),
        source: e,
    })?;
    writeln!(
        out,
        "wrote {} ({} data rows)",
        out_path.display(),
        report.rows.len()
    )
    .ok();

    if !report.semigroup_sup.is_empty() {
        writeln!(out, "sup over the time grid per (n, probe):").ok();
        for sup in &report.semigroup_sup {
            writeln!(
                out,
                "  n={} probe={} sup={}",
                sup.n,
                sup.probe,
                fmt_full(sup.sup_error)
            )
            .ok();
        }
    }

    if gnuplot {
        let stem = out_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "report".to_string());
        let dir = out_path.parent().unwrap_or_else(|| Path::new("."));
        for (suffix, body) in gnuplot_files(&report) {
            let path = dir.join(format!("{}.{}.dat", stem, suffix));
            std::fs::write(&path, body).map_err(|e| AppError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            writeln!(out, "wrote {}", path.display()).ok();
        }
    }
    Ok(())
}

fn cmd_validate_report(path: &Path, out: &mut dyn Write) -> Result<(), AppError> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let rows = validate_report_text(path, &text)?;
    writeln!(out, "ok: {} data rows", rows).ok();
    Ok(())
}

/// Parses arguments and runs; returns the process exit code.
pub fn run(args: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own usage/help text and distinguishes
            // display-only exits (help, version) itself.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match try_main(cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e);
            1
        }
    }
}

/// Helper for integration tests: runs a full command line, capturing stdout.
pub fn run_capture(args: &[&str]) -> Result<String, AppError> {
    let cli = Cli::try_parse_from(args).map_err(|e| AppError::Usage(e.to_string()))?;
    let mut buffer = Vec::new();
    try_main(cli, &mut buffer)?;
    Ok(String::from_utf8_lossy(&buffer).into_owned())
}
