//! Command-line front end. `run` parses arguments, executes one command and
//! maps failures to exit codes: 2 for invalid input, 3 for numerical
//! failures, 4 for I/O.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::ballmodel::{configuration_energy, mc_nonlocal_oracle, Ball, BallConfiguration};
use crate::coefficients::{ModelParams, RieszCoefficients};
use crate::error::{Error, Result};
use crate::landscape::{landscape_table, sweep_thresholds};
use crate::numerics::{QuadratureSpec, SampleStream};
use crate::stability::{mode_eigenvalue, quadratic_form_oracle, stability_verdict, zonal_harmonic};
use crate::VERSION;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Exit code for an error raised by the library.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Domain(_) | Error::InvalidParams(_) | Error::Overlap { .. } | Error::Schema(_) => EXIT_INVALID,
        Error::NonConvergence { .. }
        | Error::CapExceeded { .. }
        | Error::GridResolution(_)
        | Error::BracketNotFound { .. }
        | Error::RowsFailed { .. } => EXIT_NUMERICAL,
        Error::Io(_) => EXIT_IO,
    }
}

#[derive(Parser, Debug)]
#[command(name = "rdrop", version, about = "Stability thresholds and ball-cluster landscapes for the Riesz liquid drop")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mode eigenvalues of the ball of radius R and the stability verdict.
    Spectrum(SpectrumArgs),
    /// d_A, d_I, R_bar, m_loc and the m_glob bound over a grid of alpha.
    Thresholds(ThresholdsArgs),
    /// Optimal ball-cluster partitions over a grid of masses.
    Landscape(LandscapeArgs),
    /// Energy of a ball configuration read from a JSON file.
    Energy(EnergyArgs),
    /// Direct evaluation of the second variation for a zonal perturbation (N = 3).
    Oracle(OracleArgs),
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long, default_value_t = 3)]
    dim: u32,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
}

impl ModelArgs {
    fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.dim, self.alpha, self.gamma)
    }
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    radius: f64,
    /// Largest degree written to the table.
    #[arg(long, default_value_t = 16)]
    dmax: usize,
    /// CSV output, or JSON when the name ends in `.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Writes the full stability report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ThresholdsArgs {
    #[arg(long, default_value_t = 3)]
    dim: u32,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// `start:stop:step`, both ends included.
    #[arg(long)]
    alpha_grid: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LandscapeArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// `start:stop:step`, both ends included.
    #[arg(long)]
    m_grid: String,
    /// Largest number of balls considered.
    #[arg(long, default_value_t = 8)]
    kmax: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EnergyArgs {
    #[arg(long)]
    config: PathBuf,
    /// Also estimate the Riesz energy by pair sampling.
    #[arg(long)]
    mc_check: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1_000_000)]
    pairs: usize,
    /// JSON output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long)]
    radius: f64,
    /// Degree of the zonal perturbation.
    #[arg(long, default_value_t = 2)]
    degree: usize,
    /// Latitudes of the coarsest grid.
    #[arg(long, default_value_t = 32)]
    grid: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4_000_000)]
    pairs: usize,
    /// JSON output.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `start:stop:step` (ends inclusive within `1e-12`) or a single number.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::Domain(format!("grid must be start:stop:step or a number, got '{text}'"));
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    match parts[..] {
        [x] if x.is_finite() => Ok(vec![x]),
        [start, stop, step] if start.is_finite() && stop.is_finite() && step > 0.0 && stop >= start => {
            let slack = 1e-12 * stop.abs().max(1.0);
            let count = ((stop - start + slack) / step).floor() as usize;
            let mut grid: Vec<f64> = (0..=count).map(|i| start + i as f64 * step).collect();
            if let Some(last) = grid.last_mut() {
                if (*last - stop).abs() <= slack {
                    *last = stop;
                }
            }
            Ok(grid)
        }
        _ => Err(bad()),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BallConfigFile {
    dim: u32,
    alpha: f64,
    gamma: f64,
    balls: Vec<BallEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BallEntry {
    center: Vec<f64>,
    radius: f64,
}

/// Reads and validates a ball-configuration JSON document.
pub fn load_ball_config(path: &Path) -> Result<BallConfiguration> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let file: BallConfigFile =
        serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    let params = ModelParams::new(file.dim, file.alpha, file.gamma)?;
    if file.balls.is_empty() {
        return Err(Error::Schema("configuration has no balls".into()));
    }
    let balls = file
        .balls
        .into_iter()
        .enumerate()
        .map(|(i, b)| Ball::new(b.center, b.radius).map_err(|e| Error::Schema(format!("ball {i}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    BallConfiguration::new(params, balls)
}

/// Writes `bytes` next to `path` and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", path.display()));
    let name = path.file_name().ok_or_else(|| Error::Io(format!("{}: not a file path", path.display())))?;
    let mut tmp_name = OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = fs::File::create(&tmp)
        .and_then(|mut f| f.write_all(bytes).and_then(|_| f.sync_all()))
        .and_then(|_| fs::rename(&tmp, path));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io)
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// A table destined for CSV (with `#` header lines) or JSON.
struct Table {
    header: Vec<String>,
    columns: Vec<&'static str>,
    rows: Vec<Vec<serde_json::Value>>,
    extra: serde_json::Map<String, serde_json::Value>,
}

fn cell(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Null => String::new(),
        serde_json::Value::Number(n) if n.is_f64() => n.as_f64().map(|x| x.to_string()).unwrap_or_default(),
        other => other.to_string(),
    }
}

impl Table {
    fn new(command_line: &str, params: String, columns: Vec<&'static str>) -> Self {
        Self {
            header: vec![format!("rdrop {VERSION}"), format!("command: {command_line}"), params],
            columns,
            rows: Vec::new(),
            extra: serde_json::Map::new(),
        }
    }

    fn csv(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for line in &self.header {
            out.extend_from_slice(format!("# {line}\n").as_bytes());
        }
        for (k, v) in &self.extra {
            out.extend_from_slice(format!("# {k}: {v}\n").as_bytes());
        }
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(cell)).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.to_string()))
    }

    fn json(&self) -> Result<Vec<u8>> {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|r| serde_json::Value::Object(self.columns.iter().map(|c| c.to_string()).zip(r.iter().cloned()).collect()))
            .collect();
        let mut doc = serde_json::Map::new();
        doc.insert("header".into(), json!(self.header));
        for (k, v) in &self.extra {
            doc.insert(k.clone(), v.clone());
        }
        doc.insert("rows".into(), json!(rows));
        let mut bytes = serde_json::to_vec_pretty(&doc).map_err(|e| Error::Io(e.to_string()))?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    fn save(&self, path: &Path) -> Result<()> {
        let bytes = if is_json(path) { self.json()? } else { self.csv()? };
        write_atomic(path, &bytes)
    }
}

fn params_line(p: &ModelParams) -> String {
    format!("params: N={} alpha={} gamma={}", p.dim, p.alpha, p.gamma)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn spectrum(args: &SpectrumArgs, command_line: &str) -> Result<()> {
    let params = args.model.params()?;
    if !(args.radius > 0.0) || !args.radius.is_finite() {
        return Err(Error::Domain(format!("radius must be positive, got {}", args.radius)));
    }
    if args.dmax < 2 {
        return Err(Error::Domain(format!("dmax must be >= 2, got {}", args.dmax)));
    }
    let coeffs = RieszCoefficients::compute(params)?;
    let report = stability_verdict(&coeffs, args.radius)?;
    println!(
        "N = {}, alpha = {}, gamma = {}, R = {}: {}",
        params.dim, params.alpha, params.gamma, args.radius, report.verdict
    );
    println!("d_A = {}, d_I = {}, R_bar = {}, m_loc = {}", report.d_a, report.d_i, report.r_bar, report.m_loc);
    if let Some(min) = report.min_eigenvalue() {
        println!("lowest mode: d = {}, lambda = {}", min.d, min.lambda);
    }
    if let Some(out) = &args.out {
        let mut table = Table::new(command_line, params_line(&params), vec!["d", "mu_d", "lambda_d"]);
        table.header.push(format!("radius: {}", args.radius));
        for d in 2..=args.dmax {
            table.rows.push(vec![json!(d), json!(coeffs.mu(d)), json!(mode_eigenvalue(&coeffs, args.radius, d))]);
        }
        table.save(out)?;
    }
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    Ok(())
}

fn optional(x: f64) -> serde_json::Value {
    if x.is_finite() { json!(x) } else { serde_json::Value::Null }
}

fn thresholds(args: &ThresholdsArgs, command_line: &str) -> Result<()> {
    let grid = parse_grid(&args.alpha_grid)?;
    ModelParams::new(args.dim, grid[0], args.gamma)?;
    if let Some(&last) = grid.last() {
        ModelParams::new(args.dim, last, args.gamma)?;
    }
    let rows = sweep_thresholds(args.dim, &grid, args.gamma);
    let mut failed = 0;
    for row in &rows {
        match &row.error {
            None => println!(
                "alpha = {}: d_A = {}, d_I = {}, R_bar = {}, m_loc = {}, m_glob < {}",
                row.alpha,
                row.d_a.unwrap_or(0),
                row.d_i.unwrap_or(0),
                row.r_bar,
                row.m_loc,
                row.m_glob_upper
            ),
            Some(e) => {
                failed += 1;
                println!("alpha = {}: failed: {e}", row.alpha);
            }
        }
    }
    if let Some(out) = &args.out {
        let params = format!("params: N={} gamma={}", args.dim, args.gamma);
        let mut table =
            Table::new(command_line, params, vec!["alpha", "d_A", "d_I", "R_bar", "m_loc", "m_glob_upper"]);
        for row in &rows {
            table.rows.push(vec![
                json!(row.alpha),
                json!(row.d_a),
                json!(row.d_i),
                optional(row.r_bar),
                optional(row.m_loc),
                optional(row.m_glob_upper),
            ]);
        }
        table.save(out)?;
    }
    if failed > 0 {
        return Err(Error::RowsFailed { failed, total: rows.len() });
    }
    Ok(())
}

fn landscape(args: &LandscapeArgs, command_line: &str) -> Result<()> {
    let params = args.model.params()?;
    let grid = parse_grid(&args.m_grid)?;
    if grid.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::Domain("masses must be positive".into()));
    }
    let coeffs = RieszCoefficients::compute(params)?;
    let table = landscape_table(&coeffs, &grid, args.kmax)?;
    println!("ball-cluster landscape, N = {}, alpha = {}, gamma = {}", params.dim, params.alpha, params.gamma);
    println!("breakpoints: {:?}", table.breakpoints);
    println!("m_glob upper bound: {}", table.mglob_upper);
    for row in &table.grid {
        println!("m = {}: {} ball(s), f = {}", row.m, row.best_k, row.value);
    }
    if let Some(out) = &args.out {
        let mut t = Table::new(command_line, params_line(&params), vec!["m", "best_k", "f_value", "masses"]);
        t.header.push(format!("kmax: {}", args.kmax));
        t.extra.insert("breakpoints".into(), json!(table.breakpoints));
        t.extra.insert("mglob_upper".into(), json!(table.mglob_upper));
        for row in &table.grid {
            let masses: Vec<String> = row.masses.iter().map(|x| x.to_string()).collect();
            let masses = if is_json(out) { json!(row.masses) } else { json!(masses.join(";")) };
            t.rows.push(vec![json!(row.m), json!(row.best_k), json!(row.value), masses]);
        }
        t.save(out)?;
    }
    Ok(())
}

fn energy(args: &EnergyArgs, command_line: &str) -> Result<()> {
    let config = load_ball_config(&args.config)?;
    let params = config.params;
    let coeffs = RieszCoefficients::compute(params)?;
    let e = configuration_energy(&config, &coeffs, &QuadratureSpec::tanh_sinh(1e-12))?;
    println!("{} ball(s), total volume {}", config.balls.len(), config.total_volume());
    println!("perimeter = {}, nonlocal = {}, total = {}", e.perimeter, e.nonlocal, e.total);
    let mut doc = json!({
        "header": [format!("rdrop {VERSION}"), format!("command: {command_line}")],
        "params": params,
        "quadrature": e,
    });
    if args.mc_check {
        let mc = mc_nonlocal_oracle(&config, SampleStream::new(args.seed, 0), args.pairs)?;
        let total = e.perimeter + params.gamma * mc.estimate;
        let agree = (mc.estimate - e.nonlocal).abs() <= 4.0 * mc.std_error;
        println!(
            "monte carlo: nonlocal = {} ± {}, total = {}, agreement within 4 sigma: {}",
            mc.estimate, mc.std_error, total, agree
        );
        if mc.variance_warning {
            println!("warning: 2 alpha >= N, the pair estimator has infinite variance");
        }
        doc["monte_carlo"] = json!({
            "seed": args.seed,
            "pairs": args.pairs,
            "nonlocal": mc.estimate,
            "std_error": mc.std_error,
            "total": total,
            "agreement": agree,
            "variance_warning": mc.variance_warning,
        });
    }
    if let Some(out) = &args.out {
        write_json(out, &doc)?;
    }
    Ok(())
}

fn oracle(args: &OracleArgs, command_line: &str) -> Result<()> {
    let params = ModelParams::new(3, args.alpha, args.gamma)?;
    let coeffs = RieszCoefficients::compute(params)?;
    let phi = zonal_harmonic(args.degree);
    let est = quadratic_form_oracle(&coeffs, args.radius, &phi, args.grid, SampleStream::new(args.seed, 0), args.pairs)?;
    let spectral = mode_eigenvalue(&coeffs, args.radius, args.degree);
    let gap = (est.value - spectral).abs();
    let agree = gap <= (0.02 * spectral.abs()).max(4.0 * est.std_error);
    println!("degree {} zonal perturbation at R = {}", args.degree, args.radius);
    println!("spectral = {spectral}, direct = {} ± {} (grid error {})", est.value, est.std_error, est.grid_error);
    println!("agreement within max(2%, 4 sigma): {agree}");
    if est.variance_warning {
        println!("warning: alpha > 1, the double-layer estimate has infinite variance");
    }
    if let Some(out) = &args.out {
        let doc = json!({
            "header": [format!("rdrop {VERSION}"), format!("command: {command_line}")],
            "params": params,
            "R": args.radius,
            "degree": args.degree,
            "spectral": spectral,
            "oracle": est,
            "agreement": agree,
        });
        write_json(out, &doc)?;
    }
    Ok(())
}

fn thread_count() -> Result<usize> {
    match std::env::var("RDROP_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Domain(format!("RDROP_THREADS must be a non-negative integer, got '{v}'"))),
        Err(_) => Ok(0),
    }
}

fn quote(arg: &str) -> String {
    if !arg.is_empty() && arg.chars().all(|c| c.is_ascii_alphanumeric() || "-_./:=,+".contains(c)) {
        arg.to_string()
    } else {
        format!("'{}'", arg.replace('\'', r"'\''"))
    }
}

fn execute(cli: &Cli, command_line: &str) -> Result<()> {
    match &cli.command {
        Command::Spectrum(a) => spectrum(a, command_line),
        Command::Thresholds(a) => thresholds(a, command_line),
        Command::Landscape(a) => landscape(a, command_line),
        Command::Energy(a) => energy(a, command_line),
        Command::Oracle(a) => oracle(a, command_line),
    }
}

/// Runs the tool on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let command_line = std::iter::once("rdrop".to_string())
        .chain(argv.iter().skip(1).map(|a| quote(&a.to_string_lossy())))
        .collect::<Vec<_>>()
        .join(" ");
    let result = thread_count().and_then(|threads| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
        pool.install(|| execute(&cli, &command_line))
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
