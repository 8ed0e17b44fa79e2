//! Command parsing and dispatch for the `madd` binary.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use madd_core::green::{self, CompareMethod, Horizon, McOptions, ResolventOptions, ResolventScheme};
use madd_core::nalgebra::DMatrix;
use madd_core::{boundary, catalog, io, process, sections, Error, MExponent, ProcessSpec, Result};
use serde::Serialize;
use serde_json::{json, Value};

mod checks;

pub use checks::{run_checks, CheckOutcome};

#[derive(Debug, Parser)]
#[command(name = "madd", version, about = "Markov-additive process toolkit: transforms, boundary, Green functions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct SpecSource {
    /// Process specification (JSON).
    #[arg(long, global = true)]
    pub spec: Option<PathBuf>,
    /// Built-in reference process instead of a file: w1, w2, w3, sublattice, simple-periodic.
    #[arg(long, global = true, conflicts_with = "spec")]
    pub builtin: Option<String>,
}

impl SpecSource {
    pub fn load(&self) -> Result<ProcessSpec> {
        match (&self.spec, &self.builtin) {
            (Some(path), _) => io::load_spec(path),
            (None, Some(name)) => catalog::by_name(name).ok_or_else(|| Error::Precondition(format!("unknown built-in process `{name}`"))),
            (None, None) => Err(Error::Precondition("no process given; use --spec PATH or --builtin NAME".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum MethodArg {
    Series,
    Resolvent,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum SchemeArg {
    Tilted,
    Damped,
    Undamped,
}

#[derive(Debug, Clone, Args)]
pub struct GreenParams {
    /// Truncation horizon (series, default 2000) or path length (Monte Carlo,
    /// default: six standard deviations past the farthest target).
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Relative tolerance for the series; the horizon becomes a step cap.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Resolvent grid points per axis.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, value_enum, default_value_t = SchemeArg::Tilted)]
    pub scheme: SchemeArg,
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

impl GreenParams {
    /// `radius` is the largest target distance, used for the default path length.
    fn method(&self, m: MethodArg, spec: &ProcessSpec, radius: f64) -> Result<CompareMethod> {
        let d = spec.dim();
        Ok(match m {
            MethodArg::Series => CompareMethod::Series(match self.tol {
                Some(tol) => Horizon::Tolerance {
                    tol,
                    max_steps: self.horizon.unwrap_or(100_000),
                },
                None => Horizon::Steps(self.horizon.unwrap_or(2000)),
            }),
            MethodArg::Resolvent => CompareMethod::Resolvent(ResolventOptions {
                grid: self.grid.unwrap_or(default_grid(d)),
                scheme: match self.scheme {
                    SchemeArg::Tilted => ResolventScheme::Tilted { shift: None },
                    SchemeArg::Damped => ResolventScheme::default_damping(),
                    SchemeArg::Undamped => ResolventScheme::Undamped,
                },
                tol: self.tol.unwrap_or(1e-6),
            }),
            MethodArg::Mc => CompareMethod::MonteCarlo(McOptions {
                n_paths: self.paths,
                horizon: match self.horizon {
                    Some(h) => h,
                    None => green::suggested_horizon(spec, radius)?,
                },
                seed: self.seed,
            }),
        })
    }
}

fn default_grid(d: usize) -> usize {
    match d {
        1 => 1024,
        2 => 256,
        _ => 32,
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Structural checks and assumption flags.
    Validate {
        #[command(flatten)]
        src: SpecSource,
    },
    /// Stationary law, local and global drifts, energy matrix.
    Moments {
        #[command(flatten)]
        src: SpecSource,
    },
    /// Appropriate change of section and the sectioned drifts.
    Section {
        #[command(flatten)]
        src: SpecSource,
    },
    /// Boundary points c(u) for sampled or given directions.
    Boundary {
        #[command(flatten)]
        src: SpecSource,
        #[arg(long, default_value_t = 16)]
        directions: usize,
        /// Single unit direction, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        u: Option<Vec<f64>>,
        /// Write the trace here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Green function G((0,i),(x,j)).
    Green {
        #[command(flatten)]
        src: SpecSource,
        #[arg(long, value_enum, default_value_t = MethodArg::Series)]
        method: MethodArg,
        #[arg(long, default_value_t = 1)]
        i: usize,
        #[arg(long, default_value_t = 1)]
        j: usize,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x: Vec<i64>,
        #[command(flatten)]
        params: GreenParams,
    },
    /// Asymptotic coefficient at a direction, or asymptotic Green value at a point.
    Asym {
        #[command(flatten)]
        src: SpecSource,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "x")]
        u: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Option<Vec<i64>>,
        #[arg(long, default_value_t = 1)]
        i: usize,
        #[arg(long, default_value_t = 1)]
        j: usize,
        /// `derived`, `printed` or a number.
        #[arg(long, default_value = "derived")]
        exponent: String,
    },
    /// Green function against its asymptotic equivalent along a ray.
    Compare {
        #[command(flatten)]
        src: SpecSource,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        u: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        radii: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        i: usize,
        #[arg(long, default_value_t = 1)]
        j: usize,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "series")]
        methods: Vec<MethodArg>,
        #[arg(long, default_value = "derived")]
        exponent: String,
        /// Also report the Doob conjugation residual (series on both processes).
        #[arg(long)]
        doob: bool,
        #[command(flatten)]
        params: GreenParams,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// One sample path as CSV.
    Simulate {
        #[command(flatten)]
        src: SpecSource,
        #[arg(long, default_value_t = 1)]
        i: usize,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Full invariant battery; fails if any check fails.
    Checks {
        #[command(flatten)]
        src: SpecSource,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub wall_time_s: f64,
    /// JSON results; CSV verbs put the table or its path here.
    pub outputs: Value,
    /// CSV text to print when no output file was requested.
    #[serde(skip)]
    pub csv: Option<String>,
    pub warnings: Vec<String>,
    pub success: bool,
}

fn parse_exponent(s: &str) -> Result<MExponent> {
    match s {
        "derived" => Ok(MExponent::Derived),
        "printed" => Ok(MExponent::Printed),
        other => other
            .parse::<f64>()
            .map(MExponent::Custom)
            .map_err(|_| Error::Precondition(format!("bad exponent `{other}`: expected derived, printed or a number"))),
    }
}

fn state(k: usize, spec: &ProcessSpec, name: &str) -> Result<usize> {
    if k == 0 || k > spec.states() {
        return Err(Error::Precondition(format!("--{name} {k} out of range 1..={}", spec.states())));
    }
    Ok(k - 1)
}

fn unit(u: &[f64]) -> Result<Vec<f64>> {
    let n = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::Precondition("direction must be a nonzero vector".into()));
    }
    Ok(u.iter().map(|v| v / n).collect())
}

/// Rounds every float in `v` to 12 significant digits.
pub fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap();
            io::fmt_num(x).parse::<f64>().ok().and_then(serde_json::Number::from_f64).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_floats).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_floats(v))).collect()),
        other => other,
    }
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("serializable")
}

fn estimate_json(e: &madd_core::GreenEstimate) -> Value {
    let mut v = to_value(e);
    if !e.error.is_finite() {
        v["error"] = json!("inf");
    }
    v
}

fn csv_output(table: io::Table, path: &Option<PathBuf>) -> Result<(Value, Option<String>)> {
    match path {
        Some(p) => {
            table.write(p)?;
            Ok((json!({"csv": p.display().to_string(), "rows": table.rows.len()}), None))
        }
        None => Ok((json!({"rows": table.rows.len()}), Some(table.to_csv()))),
    }
}

pub fn run(cmd: &Command, echo: &str) -> Result<RunReport> {
    let start = Instant::now();
    let mut warnings = Vec::new();
    let mut success = true;
    let mut csv = None;
    let outputs = match cmd {
        Command::Validate { src } => {
            let spec = src.load()?;
            let r = process::validate(&spec);
            warnings.extend(r.diagnostics.iter().cloned());
            let mut v = to_value(&r);
            v["all_ok"] = json!(r.all_ok());
            v
        }
        Command::Moments { src } => {
            let spec = src.load()?;
            let m = process::moments(&spec)?;
            let sigma = sections::energy_matrix(&spec);
            let p = spec.states();
            let drifts: Vec<Vec<Vec<f64>>> = (0..p)
                .map(|i| (0..p).map(|j| m.local_drift(i, j).as_slice().to_vec()).collect())
                .collect();
            let mut v = json!({
                "pi": m.pi.as_slice(),
                "local_drifts": drifts,
                "global_drift": m.global_drift.as_slice(),
            });
            match sigma {
                Ok(s) => v["energy_matrix"] = rows(s.matrix()),
                Err(e) => warnings.push(format!("energy matrix unavailable: {e}")),
            }
            v
        }
        Command::Section { src } => {
            let spec = src.load()?;
            let g = sections::appropriate_section(&spec)?;
            let sp = sections::apply_section(&spec, &g)?;
            let row_drifts: Vec<Vec<f64>> = sp.row_drifts().iter().map(|r| r.as_slice().to_vec()).collect();
            json!({"section": rows(g.matrix()), "row_drifts": row_drifts, "global_drift": sp.global_drift()?.as_slice()})
        }
        Command::Boundary { src, directions, u, csv: path } => {
            let spec = src.load()?;
            let entries = match u {
                Some(u) => {
                    let u = unit(u)?;
                    let bp = boundary::boundary_point(&spec, &u)?;
                    let gam = boundary::gamma_fd(&spec, &bp.c)?;
                    let res = gam.iter().zip(&u).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                    vec![boundary::TraceEntry { point: bp, roundtrip_residual: res, step: 0.0 }]
                }
                None => boundary::boundary_trace(&spec, *directions)?,
            };
            let (v, text) = csv_output(io::boundary_table(&entries, spec.dim()), path)?;
            csv = text;
            v
        }
        Command::Green { src, method, i, j, x, params } => {
            let spec = src.load()?;
            let (i, j) = (state(*i, &spec, "i")?, state(*j, &spec, "j")?);
            let radius = x.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
            let est = match params.method(*method, &spec, radius)? {
                CompareMethod::Series(h) => green::green_series(&spec, i, x, j, h)?,
                CompareMethod::Resolvent(o) => green::green_resolvent(&spec, i, x, j, &o)?,
                CompareMethod::MonteCarlo(o) => green::green_mc(&spec, i, x, j, &o)?,
            };
            if !est.converged {
                warnings.push("requested tolerance not reached; error field is an estimate".into());
            }
            estimate_json(&est)
        }
        Command::Asym { src, u, x, i, j, exponent } => {
            let spec = src.load()?;
            let (i, j) = (state(*i, &spec, "i")?, state(*j, &spec, "j")?);
            let exponent = parse_exponent(exponent)?;
            match (u, x) {
                (_, Some(x)) => {
                    let value = green::asymptotic_green(&spec, i, x, j, exponent)?;
                    json!({"x": x, "value": value})
                }
                (Some(u), None) => {
                    let a = green::asymptotic_coefficient(&spec, &unit(u)?, exponent)?;
                    let mut v = to_value(&a);
                    v["chi_ij"] = json!(a.chi(i, j));
                    for key in ["rotation", "sigma_u", "sigma_u_1", "proj0", "chi"] {
                        let m = match key {
                            "rotation" => &a.rotation,
                            "sigma_u" => &a.sigma_u,
                            "sigma_u_1" => &a.sigma_u_1,
                            "proj0" => &a.proj0,
                            _ => &a.chi,
                        };
                        v[key] = rows(m);
                    }
                    v
                }
                (None, None) => return Err(Error::Precondition("asym needs --u or --x".into())),
            }
        }
        Command::Compare { src, u, radii, i, j, methods, exponent, doob, params, csv: path } => {
            let spec = src.load()?;
            let (i, j) = (state(*i, &spec, "i")?, state(*j, &spec, "j")?);
            let u = unit(u)?;
            let radius = radii.iter().cloned().fold(0.0, f64::max) + 1.0;
            let methods: Vec<CompareMethod> = methods.iter().map(|m| params.method(*m, &spec, radius)).collect::<Result<_>>()?;
            let doob_h = doob.then_some(Horizon::Tolerance {
                tol: 1e-10,
                max_steps: params.horizon.unwrap_or(20_000),
            });
            let cmp = green::compare(&spec, &u, radii, i, j, &methods, parse_exponent(exponent)?, doob_h)?;
            if cmp.rows.iter().any(|r| !r.converged) {
                warnings.push("some estimates did not reach their tolerance".into());
            }
            let (mut v, text) = csv_output(io::comparison_table(&cmp), path)?;
            csv = text;
            v["c"] = json!(cmp.c);
            if *doob {
                v["doob"] = to_value(&cmp.doob);
            }
            v
        }
        Command::Simulate { src, i, steps, seed, csv: path } => {
            let spec = src.load()?;
            let i = state(*i, &spec, "i")?;
            let path_rows = madd_core::green::sample_path(&spec, i, *steps, *seed)?;
            let d = spec.dim();
            let mut header = vec!["n".to_string(), "state".to_string()];
            header.extend((1..=d).map(|k| format!("x_{k}")));
            let mut table = io::Table::new(header);
            for (n, (st, x)) in path_rows.iter().enumerate() {
                let mut row = vec![n.to_string(), (st + 1).to_string()];
                row.extend(x.iter().map(|v| v.to_string()));
                table.rows.push(row);
            }
            let (v, text) = csv_output(table, path)?;
            csv = text;
            v
        }
        Command::Checks { src } => {
            let spec = src.load()?;
            let outcomes = run_checks(&spec);
            success = outcomes.iter().all(|o| o.passed);
            to_value(&outcomes)
        }
    };
    Ok(RunReport {
        command: echo.to_string(),
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs: round_floats(outputs),
        csv,
        warnings,
        success,
    })
}

fn rows(m: &DMatrix<f64>) -> Value {
    json!((0..m.nrows()).map(|r| m.row(r).iter().cloned().collect::<Vec<f64>>()).collect::<Vec<_>>())
}

/// Applies `MADD_THREADS` to the global rayon pool.
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("MADD_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Precondition(format!("MADD_THREADS must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Resource(e.to_string()))?;
    }
    Ok(())
}
