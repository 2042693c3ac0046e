//! File formats: graph documents, function files, and CSV reports.
//!
//! Graph files are JSON with exactly the keys `vertices`, `edges`, and
//! optionally `velocities`; unknown keys are rejected. Edge endpoints are
//! 1-based in files and 0-based in memory. Function files are plain text:
//! a header `m N` followed by `m` lines of `N` decimals. Reports are CSV
//! with a comment header recording tool version, config echo, and seed;
//! numbers are written with 17 significant digits so reruns are
//! byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use netflow_core::graph::DirectedGraph;
use netflow_core::matrices::VelocityProfile;
use netflow_core::tk::{ConvergenceReport, ParamValue, ReportKind};
use netflow_core::{Complex64, GridFunction, SparseMatrix};
use serde::Deserialize;

use crate::AppError;

pub const TOOL_NAME: &str = "netflow";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    vertices: usize,
    edges: Vec<[usize; 2]>,
    #[serde(default)]
    velocities: Option<Vec<f64>>,
}

fn io_error(path: &Path, source: std::io::Error) -> AppError {
    AppError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Loads and validates a graph document with its velocity profile.
pub fn load_graph(path: &Path) -> Result<(DirectedGraph, VelocityProfile), AppError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let file: GraphFile = serde_json::from_str(&text).map_err(|e| AppError::Parse {
        path: path.display().to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let parse_err = |message: String| AppError::Parse {
        path: path.display().to_string(),
        line: 0,
        column: 0,
        message,
    };
    let mut edges = Vec::with_capacity(file.edges.len());
    for (j, &[tail, head]) in file.edges.iter().enumerate() {
        if tail == 0 || head == 0 || tail > file.vertices || head > file.vertices {
            return Err(parse_err(format!(
                "edge {} references vertex outside 1..={}",
                j + 1,
                file.vertices
            )));
        }
        edges.push((tail - 1, head - 1));
    }
    let graph = DirectedGraph::new(file.vertices, edges);
    graph.validate().map_err(|e| parse_err(e.to_string()))?;
    let velocities = match file.velocities {
        Some(c) => {
            if c.len() != graph.edge_count() {
                return Err(parse_err(format!(
                    "{} velocities for {} edges",
                    c.len(),
                    graph.edge_count()
                )));
            }
            VelocityProfile::new(c).map_err(|e| parse_err(e.to_string()))?
        }
        None => VelocityProfile::unit(graph.edge_count()),
    };
    Ok((graph, velocities))
}

/// Loads a function file (`m N` header, then m rows of N decimals).
pub fn load_function(path: &Path) -> Result<GridFunction, AppError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let parse_err = |line: usize, message: String| AppError::Parse {
        path: path.display().to_string(),
        line,
        column: 0,
        message,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty function file".into()))?;
    let mut parts = header.split_whitespace();
    let m: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(1, "header must be 'm N'".into()))?;
    let n: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(1, "header must be 'm N'".into()))?;
    if parts.next().is_some() {
        return Err(parse_err(1, "header must be exactly 'm N'".into()));
    }
    let mut values = Vec::with_capacity(m * n);
    let mut rows = 0usize;
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        rows += 1;
        if rows > m {
            return Err(parse_err(idx + 1, format!("more than {} data rows", m)));
        }
        let row: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
        let row = row.map_err(|e| parse_err(idx + 1, format!("bad decimal: {}", e)))?;
        if row.len() != n {
            return Err(parse_err(
                idx + 1,
                format!("expected {} values, found {}", n, row.len()),
            ));
        }
        values.extend(row);
    }
    if rows != m {
        return Err(parse_err(
            0,
            format!("expected {} data rows, found {}", m, rows),
        ));
    }
    GridFunction::from_values(m, n, values).map_err(|e| parse_err(0, e.to_string()))
}

/// 17 significant digits; reruns produce identical bytes.
pub fn fmt_full(x: f64) -> String {
    format!("{:.16e}", x)
}

pub fn write_function(path: &Path, f: &GridFunction) -> Result<(), AppError> {
    let mut text = format!("{} {}\n", f.edge_count(), f.cells());
    for j in 0..f.edge_count() {
        let row: Vec<String> = f.edge_values(j).iter().map(|&v| fmt_full(v)).collect();
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| io_error(path, e))
}

/// Renders a matrix dense for small edge counts, 1-based triplets beyond.
pub fn render_matrix(name: &str, m: &SparseMatrix<i64>, dense: bool) -> String {
    let mut out = String::new();
    if dense {
        let _ = writeln!(out, "{} ({}x{}):", name, m.rows(), m.cols());
        for row in m.to_dense() {
            let rendered: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", rendered.join(" "));
        }
    } else {
        let _ = writeln!(
            out,
            "{} ({}x{}, {} nonzeros, triplets: row col value, 1-based):",
            name,
            m.rows(),
            m.cols(),
            m.nnz()
        );
        for (r, c, v) in m.iter() {
            let _ = writeln!(out, "{} {} {}", r + 1, c + 1, v);
        }
    }
    out
}

/// Serializes a report to CSV with the standard comment header.
pub fn report_to_csv(report: &ConvergenceReport, config_echo: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {} {}", TOOL_NAME, TOOL_VERSION);
    let _ = writeln!(out, "# config: {}", config_echo);
    let _ = writeln!(out, "# seed: {}", report.meta.seed);
    let _ = writeln!(out, "kind,n,param,probe,error");
    for row in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            row.kind.as_str(),
            row.n,
            row.param,
            row.probe,
            fmt_full(row.error)
        );
    }
    out
}

/// Parses complex scalars in the forms `a`, `a+bi`, `a-bi`.
pub fn parse_complex(s: &str) -> Option<Complex64> {
    let s = s.trim();
    if let Ok(re) = s.parse::<f64>() {
        return Some(Complex64::new(re, 0.0));
    }
    let body = s.strip_suffix('i')?;
    // Split at the sign of the imaginary part (not a leading sign, not an
    // exponent sign).
    let bytes = body.as_bytes();
    for pos in (1..bytes.len()).rev() {
        let c = bytes[pos] as char;
        if (c == '+' || c == '-') && !matches!(bytes[pos - 1] as char, 'e' | 'E') {
            let re: f64 = body[..pos].parse().ok()?;
            let im_str = &body[pos..];
            let im: f64 = if im_str == "+" {
                1.0
            } else if im_str == "-" {
                -1.0
            } else {
                im_str.parse().ok()?
            };
            return Some(Complex64::new(re, im));
        }
    }
    // Pure imaginary: "2i" or "i".
    let im: f64 = if body.is_empty() {
        1.0
    } else {
        body.parse().ok()?
    };
    Some(Complex64::new(0.0, im))
}

/// Structure check of a report CSV; returns the number of data rows.
pub fn validate_report_text(path: &Path, text: &str) -> Result<usize, AppError> {
    let err = |line: usize, message: String| AppError::Parse {
        path: path.display().to_string(),
        line,
        column: 0,
        message,
    };
    let mut lines = text.lines().enumerate().peekable();
    match lines.peek() {
        Some((_, first)) if first.starts_with(&format!("# {}", TOOL_NAME)) => {}
        _ => return Err(err(1, format!("first line must begin '# {}'", TOOL_NAME))),
    }
    let mut saw_seed = false;
    let mut header_seen = false;
    let mut data_rows = 0usize;
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.starts_with('#') {
            if header_seen {
                return Err(err(line_no, "comment after header".into()));
            }
            if line.starts_with("# seed:") {
                saw_seed = true;
            }
            continue;
        }
        if !header_seen {
            if line != "kind,n,param,probe,error" {
                return Err(err(
                    line_no,
                    "expected header 'kind,n,param,probe,error'".into(),
                ));
            }
            header_seen = true;
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(err(
                line_no,
                format!("expected 5 fields, found {}", fields.len()),
            ));
        }
        if !matches!(fields[0], "resolvent" | "semigroup") {
            return Err(err(line_no, format!("unknown kind '{}'", fields[0])));
        }
        if fields[1].parse::<usize>().map(|n| n == 0).unwrap_or(true) {
            return Err(err(line_no, format!("bad index '{}'", fields[1])));
        }
        if parse_complex(fields[2]).is_none() {
            return Err(err(line_no, format!("bad parameter '{}'", fields[2])));
        }
        match fields[4].parse::<f64>() {
            Ok(e) if e.is_finite() && e >= 0.0 => {}
            _ => return Err(err(line_no, format!("bad error value '{}'", fields[4]))),
        }
        data_rows += 1;
    }
    if !saw_seed {
        return Err(err(0, "missing '# seed:' header line".into()));
    }
    if !header_seen {
        return Err(err(0, "missing column header".into()));
    }
    Ok(data_rows)
}

/// Gnuplot companion files: one two-column file per (kind, probe), with one
/// block per parameter value.
pub fn gnuplot_files(report: &ConvergenceReport) -> Vec<(String, String)> {
    let mut keys: Vec<(ReportKind, String)> = Vec::new();
    for row in &report.rows {
        let key = (row.kind, row.probe.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut files = Vec::new();
    for (kind, probe) in keys {
        let mut params: Vec<ParamValue> = Vec::new();
        for row in &report.rows {
            if row.kind == kind && row.probe == probe && !params.contains(&row.param) {
                params.push(row.param);
            }
        }
        let mut body = String::new();
        let _ = writeln!(
            body,
            "# {} errors for probe {} (columns: n error)",
            kind.as_str(),
            probe
        );
        for param in params {
            let _ = writeln!(body, "# param = {}", param);
            for row in &report.rows {
                if row.kind == kind && row.probe == probe && row.param == param {
                    let _ = writeln!(body, "{} {}", row.n, fmt_full(row.error));
                }
            }
            body.push('\n');
        }
        files.push((format!("{}.{}", kind.as_str(), probe), body));
    }
    files
}
