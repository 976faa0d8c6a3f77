//! Run configuration and report artifacts for the command-line front end.
//!
//! Every artifact is deterministic for a given [`RunConfig`]; the only
//! time-dependent field is the optional `generated_at_unix` in the JSON
//! metadata header.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::identity::{bridge_rep_series, IdentityId, IdentityReport, IdentitySuite, NamedValue};
use crate::numerics::{real, Scalar};
use crate::reps::{sieve_reps_with_limit, FormCoeffs, RepCache};
use crate::series::{
    eval_bracket21, eval_corr1d, eval_corr2d, eval_f, eval_s1d, sum_brackets21, sum_brackets23, EvalResult,
    SeriesParams, TruncationPolicy,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_NAME: &str = "lattice-series";

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_ERROR: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Eval,
    Verify,
    Reps,
    Scan,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Eval => "eval",
            Command::Verify => "verify",
            Command::Reps => "reps",
            Command::Scan => "scan",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    Json,
    Csv,
    #[default]
    Text,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "text" => Ok(OutputFormat::Text),
            _ => Err(Error::invalid(format!("format: unknown output format '{s}'"))),
        }
    }
}

/// Series available to `eval`, with the parameters each one reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesName {
    F,
    S1d,
    Corr1d,
    Corr2d,
    Bracket21,
    Brackets21,
    Brackets23,
    Bridge,
}

impl SeriesName {
    pub const ALL: [SeriesName; 8] = [
        SeriesName::F,
        SeriesName::S1d,
        SeriesName::Corr1d,
        SeriesName::Corr2d,
        SeriesName::Bracket21,
        SeriesName::Brackets21,
        SeriesName::Brackets23,
        SeriesName::Bridge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SeriesName::F => "f",
            SeriesName::S1d => "s1d",
            SeriesName::Corr1d => "corr1d",
            SeriesName::Corr2d => "corr2d",
            SeriesName::Bracket21 => "bracket21",
            SeriesName::Brackets21 => "brackets21",
            SeriesName::Brackets23 => "brackets23",
            SeriesName::Bridge => "bridge",
        }
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            SeriesName::F => &["x", "y", "w"],
            SeriesName::S1d => &["x", "beta", "w"],
            SeriesName::Corr1d | SeriesName::Corr2d | SeriesName::Brackets21 | SeriesName::Brackets23 => {
                &["x1", "x2", "w"]
            }
            SeriesName::Bracket21 => &["x1", "x2", "w", "r"],
            SeriesName::Bridge => &["a", "b", "y"],
        }
    }
}

impl FromStr for SeriesName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SeriesName::ALL
            .into_iter()
            .find(|n| n.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let known: Vec<_> = SeriesName::ALL.iter().map(|n| n.name()).collect();
                Error::invalid(format!("series: unknown series '{s}' (known: {})", known.join(", ")))
            })
    }
}

/// One scan axis, written `name=start:stop:count`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub name: String,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl GridAxis {
    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.start],
            n => {
                let step = (self.stop - self.start) / (n - 1) as f64;
                (0..n)
                    .map(|i| if i == n - 1 { self.stop } else { self.start + step * i as f64 })
                    .collect()
            }
        }
    }
}

impl FromStr for GridAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("grid: expected name=start:stop:count, got '{s}'"));
        let (name, range) = s.split_once('=').ok_or_else(bad)?;
        let parts: Vec<&str> = range.split(':').collect();
        let [start, stop, count] = parts.as_slice() else {
            return Err(bad());
        };
        let name = name.trim();
        if name.is_empty() {
            return Err(bad());
        }
        Ok(GridAxis {
            name: name.to_string(),
            start: start.trim().parse().map_err(|_| bad())?,
            stop: stop.trim().parse().map_err(|_| bad())?,
            count: count.trim().parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub identity: Option<IdentityId>,
    pub series: Option<SeriesName>,
    /// Named scalar parameters; integer parameters are stored as reals.
    pub params: BTreeMap<String, Scalar>,
    pub grid: Vec<GridAxis>,
    pub tol_abs: f64,
    pub policy: TruncationPolicy,
    pub output_path: Option<PathBuf>,
    pub format: OutputFormat,
    /// Adds a wall-clock timestamp to the JSON metadata.
    pub stamp: bool,
    pub cache_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            identity: None,
            series: None,
            params: BTreeMap::new(),
            grid: Vec::new(),
            tol_abs: crate::identity::DEFAULT_TOL,
            policy: TruncationPolicy::default(),
            output_path: None,
            format: OutputFormat::default(),
            stamp: false,
            cache_dir: None,
        }
    }

    pub fn param(mut self, name: &str, value: Scalar) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.policy.validate()?;
        if !(self.tol_abs > 0.0) || !self.tol_abs.is_finite() {
            return Err(Error::invalid(format!("tol: must be positive, got {}", self.tol_abs)));
        }
        match self.command {
            Command::Verify | Command::Scan if self.identity.is_none() => {
                return Err(Error::invalid(format!("identity: required by {}", self.command.name())));
            }
            Command::Eval if self.series.is_none() => {
                return Err(Error::invalid("series: required by eval"));
            }
            Command::Reps => {
                for name in ["a", "b", "nmax"] {
                    self.integer(name)?;
                }
            }
            _ => {}
        }
        if self.command == Command::Scan {
            if self.grid.is_empty() {
                return Err(Error::invalid("grid: scan needs at least one axis"));
            }
            for axis in &self.grid {
                if axis.count == 0 {
                    return Err(Error::invalid(format!("grid: axis '{}' is empty", axis.name)));
                }
            }
        }
        Ok(())
    }

    fn scalar(&self, name: &str) -> Result<Scalar> {
        self.params
            .get(name)
            .copied()
            .ok_or_else(|| Error::invalid(format!("{name}: missing parameter")))
    }

    fn integer(&self, name: &str) -> Result<u64> {
        let v = self.scalar(name)?;
        if v.im != 0.0 || !(v.re >= 1.0) || v.re.fract() != 0.0 || v.re > 1e15 {
            return Err(Error::invalid(format!("{name}: expected a positive integer, got {v}")));
        }
        Ok(v.re as u64)
    }

    fn values_for(&self, names: &[&str]) -> Result<Vec<Scalar>> {
        names.iter().map(|n| self.scalar(n)).collect()
    }

    fn cache(&self) -> RepCache {
        match &self.cache_dir {
            Some(d) => RepCache::with_dir(d),
            None => RepCache::from_env(),
        }
    }

    fn suite(&self) -> Result<IdentitySuite> {
        Ok(IdentitySuite::new(self.policy, self.tol_abs)?.with_cache(Arc::new(self.cache())))
    }
}

/// Exit status and rendered artifact of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub exit_code: u8,
    pub artifact: Option<String>,
    pub error: Option<String>,
}

impl RunOutcome {
    fn error(e: &Error) -> Self {
        RunOutcome {
            exit_code: EXIT_ERROR,
            artifact: None,
            error: Some(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct EvalData {
    series: &'static str,
    params: Vec<NamedValue>,
    result: EvalResult,
}

#[derive(Debug, Clone, Serialize)]
struct RepRow {
    n: u64,
    count: u32,
}

#[derive(Debug, Clone, Serialize)]
struct RepsData {
    a: u64,
    b: u64,
    n_max: u64,
    lattice_points: u64,
    counts: Vec<RepRow>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
enum ScanRow {
    Report(IdentityReport),
    Error { params: Vec<NamedValue>, error: String },
}

#[derive(Debug, Clone, Serialize)]
struct ScanSummary {
    points: usize,
    passed: usize,
    failed: usize,
    errors: usize,
    max_residual: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct ScanData {
    identity: IdentityId,
    rows: Vec<ScanRow>,
    summary: ScanSummary,
}

enum Data {
    Eval(EvalData),
    Verify(IdentityReport),
    Reps(RepsData),
    Scan(ScanData),
}

/// Validates and runs `config`, returning the exit code and the rendered
/// artifact. Nothing is written.
pub fn run(config: &RunConfig) -> RunOutcome {
    if let Err(e) = config.validate() {
        return RunOutcome::error(&e);
    }
    let data = match config.command {
        Command::Eval => run_eval(config).map(Data::Eval),
        Command::Verify => run_verify(config).map(Data::Verify),
        Command::Reps => run_reps(config).map(Data::Reps),
        Command::Scan => run_scan(config).map(Data::Scan),
    };
    let data = match data {
        Ok(d) => d,
        Err(e) => return RunOutcome::error(&e),
    };
    let exit_code = match &data {
        Data::Verify(r) if !r.pass => EXIT_FAIL,
        Data::Scan(s) if s.summary.errors > 0 => EXIT_ERROR,
        Data::Scan(s) if s.summary.failed > 0 => EXIT_FAIL,
        _ => EXIT_OK,
    };
    match render(config, &data) {
        Ok(artifact) => RunOutcome {
            exit_code,
            artifact: Some(artifact),
            error: None,
        },
        Err(e) => RunOutcome::error(&e),
    }
}

/// Runs `config` and writes the artifact to the output path or stdout;
/// errors go to stderr.
pub fn execute(config: &RunConfig) -> u8 {
    let outcome = run(config);
    if let Some(e) = &outcome.error {
        eprintln!("error: {e}");
    }
    if let Some(artifact) = &outcome.artifact {
        match &config.output_path {
            Some(path) => {
                if let Err(e) = std::fs::write(path, artifact) {
                    eprintln!("error: output: {}: {e}", path.display());
                    return EXIT_ERROR;
                }
            }
            None => print!("{artifact}"),
        }
    }
    outcome.exit_code
}

fn named(names: &[&str], values: &[Scalar]) -> Vec<NamedValue> {
    names.iter().zip(values).map(|(n, &v)| NamedValue::new(*n, v)).collect()
}

fn run_eval(config: &RunConfig) -> Result<EvalData> {
    let series = config.series.expect("validated");
    let names = series.param_names();
    let v = config.values_for(names)?;
    let pol = &config.policy;
    let result = match series {
        SeriesName::F => {
            let p = SeriesParams::new(v[0], v[1], v[2]);
            eval_f(&p, pol)?
        }
        SeriesName::S1d => eval_s1d(v[0], v[1], v[2], pol)?,
        SeriesName::Corr1d => eval_corr1d(v[0], v[1], v[2], pol)?,
        SeriesName::Corr2d => eval_corr2d(v[0], v[1], v[2], pol)?,
        SeriesName::Bracket21 => eval_bracket21(v[0], v[1], v[2], config.integer("r")?, pol)?,
        SeriesName::Brackets21 => sum_brackets21(v[0], v[1], v[2], pol)?,
        SeriesName::Brackets23 => sum_brackets23(v[0], v[1], v[2], pol)?,
        SeriesName::Bridge => {
            let c = FormCoeffs::new(config.integer("a")?, config.integer("b")?)?;
            bridge_rep_series(&config.cache(), c, v[2], pol)?
        }
    };
    Ok(EvalData {
        series: series.name(),
        params: named(names, &v),
        result,
    })
}

fn run_verify(config: &RunConfig) -> Result<IdentityReport> {
    let id = config.identity.expect("validated");
    let v = config.values_for(id.param_names())?;
    config.suite()?.run(id, &v)
}

fn run_reps(config: &RunConfig) -> Result<RepsData> {
    let c = FormCoeffs::new(config.integer("a")?, config.integer("b")?)?;
    let n_max = config.integer("nmax")?;
    let cache = config.cache();
    let table = if cache.dir().is_some() {
        cache.get(c, n_max)?
    } else {
        Arc::new(sieve_reps_with_limit(c, n_max, cache.limit())?)
    };
    let counts = (1..=n_max)
        .map(|n| RepRow {
            n,
            count: table.get(n).expect("table covers n_max"),
        })
        .collect();
    let lattice_points = table.counts[..n_max as usize].iter().map(|&c| c as u64).sum();
    Ok(RepsData {
        a: c.a,
        b: c.b,
        n_max,
        lattice_points,
        counts,
    })
}

/// Grid points in row-major order over the axes as given.
fn grid_points(axes: &[GridAxis]) -> Vec<Vec<(String, f64)>> {
    let mut points: Vec<Vec<(String, f64)>> = vec![Vec::new()];
    for axis in axes {
        let values = axis.values();
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push((axis.name.clone(), v));
                    q
                })
            })
            .collect();
    }
    points
}

fn run_scan(config: &RunConfig) -> Result<ScanData> {
    let id = config.identity.expect("validated");
    let names = id.param_names();
    for axis in &config.grid {
        if !names.contains(&axis.name.as_str()) {
            return Err(Error::invalid(format!(
                "grid: {id} has no parameter '{}' (parameters: {})",
                axis.name,
                names.join(", ")
            )));
        }
    }
    let suite = config.suite()?;
    let points = grid_points(&config.grid);
    let rows: Vec<ScanRow> = points
        .par_iter()
        .map(|point| {
            let mut params = config.params.clone();
            for (name, v) in point {
                params.insert(name.clone(), real(*v));
            }
            let values: Result<Vec<Scalar>> = names
                .iter()
                .map(|n| params.get(*n).copied().ok_or_else(|| Error::invalid(format!("{n}: missing parameter"))))
                .collect();
            let outcome = values.and_then(|v| suite.run(id, &v));
            match outcome {
                Ok(rep) => ScanRow::Report(rep),
                Err(e) => ScanRow::Error {
                    params: names
                        .iter()
                        .filter_map(|n| params.get(*n).map(|&v| NamedValue::new(*n, v)))
                        .collect(),
                    error: e.to_string(),
                },
            }
        })
        .collect();
    let mut summary = ScanSummary {
        points: rows.len(),
        passed: 0,
        failed: 0,
        errors: 0,
        max_residual: None,
    };
    for row in &rows {
        match row {
            ScanRow::Report(r) => {
                if r.pass {
                    summary.passed += 1;
                } else {
                    summary.failed += 1;
                }
                summary.max_residual = Some(summary.max_residual.map_or(r.residual, |m: f64| m.max(r.residual)));
            }
            ScanRow::Error { .. } => summary.errors += 1,
        }
    }
    Ok(ScanData { identity: id, rows, summary })
}

fn render(config: &RunConfig, data: &Data) -> Result<String> {
    match config.format {
        OutputFormat::Json => render_json(config, data),
        OutputFormat::Csv => render_csv(data),
        OutputFormat::Text => Ok(render_text(data)),
    }
}

#[derive(Serialize)]
struct Metadata {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    generated_at_unix: Option<u64>,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: u32,
    metadata: Metadata,
    data: &'a T,
}

fn envelope_json<T: Serialize>(metadata: Metadata, data: &T) -> Result<String> {
    let doc = Envelope {
        schema: SCHEMA_VERSION,
        metadata,
        data,
    };
    let mut out =
        serde_json::to_string_pretty(&doc).map_err(|e| Error::invalid(format!("serialization failed: {e}")))?;
    out.push('\n');
    Ok(out)
}

fn render_json(config: &RunConfig, data: &Data) -> Result<String> {
    let generated_at_unix = config.stamp.then(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    });
    let metadata = Metadata {
        tool: TOOL_NAME,
        version: env!("CARGO_PKG_VERSION"),
        command: config.command.name(),
        generated_at_unix,
    };
    match data {
        Data::Eval(d) => envelope_json(metadata, d),
        Data::Verify(r) => envelope_json(metadata, r),
        Data::Reps(r) => envelope_json(metadata, r),
        Data::Scan(s) => envelope_json(metadata, s),
    }
}

fn fmt_params(params: &[NamedValue]) -> String {
    params
        .iter()
        .map(|p| format!("{}={}", p.name, fmt_scalar(p.value)))
        .collect::<Vec<_>>()
        .join(";")
}

/// `re`, or `re+imJ` / `re-imJ` for a nonzero imaginary part.
pub fn fmt_scalar(z: Scalar) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.im < 0.0 || z.im.is_sign_negative() {
        format!("{}{}J", z.re, z.im)
    } else {
        format!("{}+{}J", z.re, z.im)
    }
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::invalid(format!("csv output failed: {e}"))
}

fn report_record(r: &IdentityReport) -> Vec<String> {
    vec![
        r.id.tag().to_string(),
        fmt_params(&r.params),
        r.lhs.re.to_string(),
        r.lhs.im.to_string(),
        r.rhs.re.to_string(),
        r.rhs.im.to_string(),
        r.residual.to_string(),
        r.component_budget.total.to_string(),
        r.threshold.to_string(),
        r.pass.to_string(),
        String::new(),
    ]
}

const REPORT_HEADER: [&str; 11] = [
    "id", "params", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "residual", "budget", "threshold", "pass", "error",
];

fn render_csv(data: &Data) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    match data {
        Data::Eval(d) => {
            w.write_record([
                "series", "params", "value_re", "value_im", "truncation", "rounding", "total", "n_used", "r_used",
                "converged",
            ])
            .map_err(csv_err)?;
            let r = &d.result;
            w.write_record([
                d.series.to_string(),
                fmt_params(&d.params),
                r.value.re.to_string(),
                r.value.im.to_string(),
                r.budget.truncation.to_string(),
                r.budget.rounding.to_string(),
                r.budget.total.to_string(),
                r.n_used.to_string(),
                r.r_used.to_string(),
                r.converged.to_string(),
            ])
            .map_err(csv_err)?;
        }
        Data::Verify(r) => {
            w.write_record(REPORT_HEADER).map_err(csv_err)?;
            w.write_record(report_record(r)).map_err(csv_err)?;
        }
        Data::Reps(r) => {
            w.write_record(["N", "count"]).map_err(csv_err)?;
            for row in &r.counts {
                w.write_record([row.n.to_string(), row.count.to_string()]).map_err(csv_err)?;
            }
        }
        Data::Scan(s) => {
            w.write_record(REPORT_HEADER).map_err(csv_err)?;
            for row in &s.rows {
                let rec = match row {
                    ScanRow::Report(r) => report_record(r),
                    ScanRow::Error { params, error } => {
                        let mut rec = vec![String::new(); REPORT_HEADER.len()];
                        rec[0] = s.identity.tag().to_string();
                        rec[1] = fmt_params(params);
                        rec[10] = error.clone();
                        rec
                    }
                };
                w.write_record(rec).map_err(csv_err)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(csv_err)?;
    String::from_utf8(bytes).map_err(csv_err)
}

fn text_report(out: &mut String, r: &IdentityReport) {
    let verdict = if r.pass { "PASS" } else { "FAIL" };
    let _ = writeln!(out, "{} {} [{}]", r.id, verdict, fmt_params(&r.params).replace(';', ", "));
    let _ = writeln!(out, "  lhs       {}", fmt_scalar(r.lhs));
    let _ = writeln!(out, "  rhs       {}", fmt_scalar(r.rhs));
    let _ = writeln!(out, "  residual  {:.3e}", r.residual);
    let _ = writeln!(out, "  budget    {}", r.component_budget);
    let _ = writeln!(out, "  threshold {:.3e} (tol {:.1e}, safety {})", r.threshold, r.tol_abs, r.safety);
    for c in &r.components {
        let side = match c.side {
            crate::identity::Side::Lhs => "lhs",
            crate::identity::Side::Rhs => "rhs",
        };
        let _ = writeln!(
            out,
            "    {side} {:<36} {:>26}  +/- {:.1e}",
            c.name,
            fmt_scalar(c.contribution),
            c.budget.total
        );
    }
}

fn render_text(data: &Data) -> String {
    let mut out = String::new();
    match data {
        Data::Eval(d) => {
            let r = &d.result;
            let _ = writeln!(out, "{}({})", d.series, fmt_params(&d.params).replace(';', ", "));
            let _ = writeln!(out, "  value     {}", fmt_scalar(r.value));
            let _ = writeln!(out, "  budget    {}", r.budget);
            let _ = writeln!(out, "  terms     n <= {}, r <= {}", r.n_used, r.r_used);
            let _ = writeln!(out, "  converged {}", r.converged);
        }
        Data::Verify(r) => text_report(&mut out, r),
        Data::Reps(r) => {
            let _ = writeln!(out, "r_{{{},{}}}(N), N = 1..{}", r.a, r.b, r.n_max);
            for row in r.counts.iter().filter(|row| row.count > 0) {
                let _ = writeln!(out, "  {:>10} {}", row.n, row.count);
            }
            let _ = writeln!(out, "lattice points: {}", r.lattice_points);
        }
        Data::Scan(s) => {
            for row in &s.rows {
                match row {
                    ScanRow::Report(r) => text_report(&mut out, r),
                    ScanRow::Error { params, error } => {
                        let _ = writeln!(out, "{} ERROR [{}]: {error}", s.identity, fmt_params(params));
                    }
                }
            }
            let m = &s.summary;
            let max = m.max_residual.map_or("n/a".to_string(), |v| format!("{v:.3e}"));
            let _ = writeln!(
                out,
                "summary: {} points, {} passed, {} failed, {} errors, max residual {max}",
                m.points, m.passed, m.failed, m.errors
            );
        }
    }
    out
}
