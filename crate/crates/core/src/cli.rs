//! Command-line front end.
//!
//! Every subcommand produces one [`Record`]; `main` renders it as JSON or CSV
//! and maps errors onto exit codes (2 validation, 3 numeric failure,
//! 4 insufficient sampling).

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::bounds::{self, BoundInput, ExclusionVerdict};
use crate::error::Error;
use crate::linalg;
use crate::model::{ModelSpec, OverlapMatrix};
use crate::parisi::{self, Form};
use crate::simulator::{self, McConfig, McEstimate, Moment};

pub const SEED_ENV: &str = "GLASSKIT_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "glasskit", version, about = "Spherical p-spin free energies, overlap bounds and Monte Carlo")]
pub struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
    /// Write the record here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// RNG seed; the GLASSKIT_SEED environment variable takes precedence.
    #[arg(long, default_value_t = 0, global = true)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimize the variational free energy.
    Parisi(ParisiArgs),
    /// Overlap-constraint bounds and functionals.
    #[command(subcommand)]
    Bound(BoundCommand),
    /// Monte Carlo for the 2-spin model.
    #[command(subcommand)]
    Simulate(SimulateCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormArg {
    Parisi,
    CrisantiSommers,
}

impl From<FormArg> for Form {
    fn from(f: FormArg) -> Self {
        match f {
            FormArg::Parisi => Form::Parisi,
            FormArg::CrisantiSommers => Form::CrisantiSommers,
        }
    }
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct ParisiArgs {
    #[arg(long, default_value_t = 2)]
    pub p: u32,
    #[arg(long)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub h: f64,
    /// Number of RSB levels (defaults to 1 for p = 2, 2 otherwise).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum, default_value_t = FormArg::CrisantiSommers)]
    pub form: FormArg,
}

/// An overlap matrix given inline (row-major) or as a file with one row per line.
#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct MatrixArg {
    #[arg(long, value_delimiter = ',', conflicts_with = "q_file")]
    pub q: Option<Vec<f64>>,
    #[arg(long)]
    pub q_file: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum BoundCommand {
    /// Eigenvalue bound and exclusion verdict for a 2-spin constraint.
    Theorem1 {
        #[command(flatten)]
        matrix: MatrixArg,
        #[arg(long, value_delimiter = ',', required = true)]
        betas: Vec<f64>,
    },
    /// Verdict for the non-ultrametric triple at q = 1 - 1/beta.
    Ultrametric {
        #[arg(long)]
        beta: f64,
    },
    /// Predicted cross overlap of two 2-spin systems.
    #[command(allow_negative_numbers = true)]
    ChaosU0 {
        #[arg(long)]
        beta1: f64,
        #[arg(long, default_value_t = 0.0)]
        h1: f64,
        #[arg(long)]
        beta2: f64,
        #[arg(long, default_value_t = 0.0)]
        h2: f64,
    },
    /// Coupled p-spin functional U(m0, c) and d(c) on a grid of c.
    PspinCoupled {
        #[arg(long)]
        p: u32,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        betas: Vec<f64>,
        /// lo:hi:step
        #[arg(long, default_value = "0:1:0.05")]
        scan_c: String,
    },
    /// Single-system tail functional and d(u) on a grid of u.
    PspinTail {
        #[arg(long)]
        p: u32,
        #[arg(long)]
        beta: f64,
        /// lo:hi:step
        #[arg(long, default_value = "0:1:0.05")]
        scan_u: String,
    },
    /// Interpolation bound from a JSON parameter file or a named construction.
    Guerra {
        /// JSON with q, betas, fields, p, m, sequence and a.
        #[arg(long, conflicts_with_all = ["construction"])]
        input: Option<PathBuf>,
        #[command(flatten)]
        matrix: MatrixArg,
        #[arg(long, value_delimiter = ',')]
        betas: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value_t = Construction::Eigen)]
        construction: Construction,
    },
    /// Gaussian reference minimization over A.
    Lemma4 {
        #[command(flatten)]
        matrix: MatrixArg,
        /// Row-major Delta0; omit to use beta^2 (Q - I/beta).
        #[arg(long, value_delimiter = ',')]
        delta0: Option<Vec<f64>>,
        #[arg(long)]
        beta: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Construction {
    /// Diagonalized construction attaining the eigenvalue bound.
    Eigen,
    /// Q1 = Q - I/beta, A = 2 beta I.
    Shifted,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long = "n", visible_alias = "N", default_value_t = 400)]
    pub n: usize,
    #[arg(long, default_value_t = 20_000)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 5_000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 10)]
    pub thin: usize,
    #[arg(long, default_value_t = 8)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.02)]
    pub epsilon: f64,
    /// Write the raw overlap trace as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

impl McArgs {
    fn config(&self, seed: u64) -> McConfig {
        McConfig {
            n: self.n,
            sweeps: self.sweeps,
            burn_in: self.burn_in,
            thin: self.thin,
            disorder_samples: self.samples,
            seed,
            epsilon: self.epsilon,
            record_trace: self.trace.is_some(),
        }
    }
}

#[derive(Debug, Subcommand)]
#[command(allow_negative_numbers = true)]
pub enum SimulateCommand {
    /// E<R^2> for two replicas of one system.
    Overlap {
        #[arg(long, default_value_t = 2)]
        p: u32,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 0.0)]
        h: f64,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Cross overlap of two systems on shared disorder.
    Chaos {
        #[arg(long)]
        beta1: f64,
        #[arg(long, default_value_t = 0.0)]
        h1: f64,
        #[arg(long)]
        beta2: f64,
        #[arg(long, default_value_t = 0.0)]
        h2: f64,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Cauchy-Schwarz moment inequality check.
    Lemma2 {
        #[arg(long)]
        beta1: f64,
        #[arg(long, default_value_t = 0.0)]
        h1: f64,
        #[arg(long)]
        beta2: f64,
        #[arg(long, default_value_t = 0.0)]
        h2: f64,
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[command(flatten)]
        mc: McArgs,
    },
}

/// Plot-ready numeric table attached to scan records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Output schema shared by every subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub command: String,
    pub parameters: Map<String, Value>,
    pub values: Map<String, Value>,
    pub residuals: Map<String, Value>,
    pub verdict: Option<String>,
    pub seed: u64,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Table>,
}

impl Record {
    fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            parameters: Map::new(),
            values: Map::new(),
            residuals: Map::new(),
            verdict: None,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            table: None,
        }
    }

    fn param(mut self, key: &str, v: impl Serialize) -> Self {
        self.parameters.insert(key.into(), to_value(v));
        self
    }

    fn value(&mut self, key: &str, v: impl Serialize) {
        self.values.insert(key.into(), to_value(v));
    }

    fn residual(&mut self, key: &str, v: f64) {
        self.residuals.insert(key.into(), to_value(v));
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("records serialize")
    }

    /// A scan table as-is, otherwise `section,key,value` lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(t) = &self.table {
            out.push_str(&t.columns.join(","));
            out.push('\n');
            for row in &t.rows {
                let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
            return out;
        }
        out.push_str("section,key,value\n");
        let mut line = |section: &str, key: &str, v: &Value| {
            let text = match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            let text = if text.contains(',') || text.contains('"') {
                format!("\"{}\"", text.replace('"', "\"\""))
            } else {
                text
            };
            out.push_str(&format!("{section},{key},{text}\n"));
        };
        line("meta", "command", &Value::String(self.command.clone()));
        for (k, v) in &self.parameters {
            line("parameter", k, v);
        }
        for (k, v) in &self.values {
            line("value", k, v);
        }
        for (k, v) in &self.residuals {
            line("residual", k, v);
        }
        if let Some(v) = &self.verdict {
            line("meta", "verdict", &Value::String(v.clone()));
        }
        line("meta", "seed", &json!(self.seed));
        line("meta", "version", &Value::String(self.version.clone()));
        out
    }
}

fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] Error),
    #[error("invalid argument: {0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 2,
            CliError::Model(e) => match e {
                Error::NonSymmetric(_)
                | Error::Domain(_)
                | Error::InvalidInput(_)
                | Error::TrivialPhase
                | Error::BothFieldsZero => 2,
                Error::NoConvergence { .. } | Error::MultipleRoots(_) | Error::NoRoot(_) => 3,
                Error::ChainTooShort { .. } => 4,
            },
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Seed after applying the environment override.
pub fn effective_seed(flag: u64) -> CliResult<u64> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}={s} is not an unsigned integer"))),
        Err(_) => Ok(flag),
    }
}

/// Runs the parsed command and renders its output.
pub fn run(cli: &Cli) -> CliResult<()> {
    let seed = effective_seed(cli.seed)?;
    let record = execute(&cli.command, seed)?;
    let text = match cli.format {
        Format::Json => record.to_json() + "\n",
        Format::Csv => record.to_csv(),
    };
    match &cli.output {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

pub fn execute(command: &Command, seed: u64) -> CliResult<Record> {
    match command {
        Command::Parisi(a) => cmd_parisi(a, seed),
        Command::Bound(b) => cmd_bound(b, seed),
        Command::Simulate(s) => cmd_simulate(s, seed),
    }
}

fn cmd_parisi(a: &ParisiArgs, seed: u64) -> CliResult<Record> {
    let model = ModelSpec::new(a.p, a.beta, a.h)?;
    let k = a.k.unwrap_or(if a.p == 2 { 1 } else { 2 });
    let form: Form = a.form.into();
    let mut r = Record::new("parisi", seed)
        .param("p", a.p)
        .param("beta", a.beta)
        .param("h", a.h)
        .param("k", k)
        .param("form", form);
    let min = parisi::minimize_parisi(&model, k, form)?;
    r.value("value", min.value);
    r.value("scheme", &min.scheme);
    r.residual("grad_norm", min.grad_norm);
    if a.p == 2 {
        let q = parisi::solve_q_2spin(&model)?;
        let closed = parisi::free_energy(&model)?;
        r.value("q", q);
        r.value("closed_form", closed);
        r.residual("closed_form_gap", min.value - closed);
    } else if a.h == 0.0 {
        match parisi::pspin_critical(&model) {
            Ok(c) => {
                r.value("critical", c);
                r.value("critical_value", c.free_energy(&model));
                for (name, v) in ["q_m", "delta", "gamma"].iter().zip(c.identity_residuals(&model)) {
                    r.residual(&format!("identity_{name}"), v);
                }
                for (i, v) in c.stationarity_residuals(&model).iter().enumerate() {
                    r.residual(&format!("stationarity_{i}"), *v);
                }
                r.verdict = Some("nontrivial".into());
            }
            Err(Error::TrivialPhase) => {
                r.value("critical_value", 0.5 * model.beta().powi(2) * model.xi(1.0));
                r.verdict = Some("trivial".into());
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(r)
}

fn parse_matrix(m: &MatrixArg) -> CliResult<OverlapMatrix> {
    if let Some(values) = &m.q {
        return Ok(OverlapMatrix::from_row_major(values)?);
    }
    let path = m
        .q_file
        .as_ref()
        .ok_or_else(|| CliError::Usage("a constraint matrix is required (--q or --q-file)".into()))?;
    let text = std::fs::read_to_string(path)?;
    Ok(OverlapMatrix::new(parse_matrix_text(&text)?)?)
}

/// One row per line, entries separated by commas or whitespace; `#` starts a comment.
pub fn parse_matrix_text(text: &str) -> CliResult<nalgebra::DMatrix<f64>> {
    let rows = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().map_err(|_| CliError::Usage(format!("bad matrix entry {t:?}"))))
                .collect::<CliResult<Vec<f64>>>()
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(linalg::from_rows(&rows)?)
}

/// `lo:hi:step`, inclusive of `hi` up to rounding.
pub fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("grid {spec:?} is not lo:hi:step")))?;
    let [lo, hi, step] = parts[..] else {
        return Err(CliError::Usage(format!("grid {spec:?} is not lo:hi:step")));
    };
    if !(step > 0.0 && hi >= lo && lo.is_finite() && hi.is_finite()) {
        return Err(CliError::Usage(format!("grid {spec:?} needs hi >= lo and step > 0")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| (lo + i as f64 * step).min(hi)).collect())
}

fn verdict_record(r: &mut Record, v: &ExclusionVerdict) {
    r.value("bound", v.bound);
    r.value("trivial_sum", v.trivial_sum);
    r.value("excluded", v.excluded);
    r.value("margin_used", v.margin_used);
    r.value("eigenvalues", &v.eigenvalues);
    r.value("reason", v.reason);
    if let Some(&r_min) = v.eigenvalues.first() {
        r.value("r_min", r_min);
    }
    r.verdict = Some(if v.excluded { "excluded" } else { "not-excluded" }.into());
}

/// Parameter file accepted by `bound guerra --input`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GuerraFile {
    pub q: Vec<Vec<f64>>,
    pub betas: Vec<f64>,
    #[serde(default)]
    pub fields: Option<Vec<f64>>,
    #[serde(default = "default_p")]
    pub p: u32,
    pub m: Vec<f64>,
    pub sequence: Vec<Vec<Vec<f64>>>,
    pub a: Vec<Vec<f64>>,
}

fn default_p() -> u32 {
    2
}

impl GuerraFile {
    pub fn into_input(self) -> CliResult<BoundInput> {
        let n = self.betas.len();
        Ok(BoundInput {
            q: OverlapMatrix::new(linalg::from_rows(&self.q)?)?,
            fields: self.fields.unwrap_or_else(|| vec![0.0; n]),
            betas: self.betas,
            p: self.p,
            m: self.m,
            sequence: self
                .sequence
                .iter()
                .map(|s| linalg::from_rows(s))
                .collect::<Result<_, _>>()?,
            a: linalg::from_rows(&self.a)?,
        })
    }
}

fn trivial_sum(betas: &[f64], fields: &[f64], p: u32) -> CliResult<f64> {
    let mut total = 0.0;
    for (b, h) in betas.iter().zip(fields) {
        total += parisi::free_energy(&ModelSpec::new(p, *b, *h)?)?;
    }
    Ok(total)
}

fn cmd_bound(b: &BoundCommand, seed: u64) -> CliResult<Record> {
    match b {
        BoundCommand::Theorem1 { matrix, betas } => {
            let q = parse_matrix(matrix)?;
            let mut r = Record::new("bound theorem1", seed)
                .param("q", q.to_rows())
                .param("betas", betas);
            let v = bounds::bound_theorem1(&q, betas)?;
            verdict_record(&mut r, &v);
            Ok(r)
        }
        BoundCommand::Ultrametric { beta } => {
            let mut r = Record::new("bound ultrametric", seed).param("beta", beta);
            let v = bounds::ultrametricity_verdict(*beta)?;
            r.value("q", 1.0 - 1.0 / beta);
            verdict_record(&mut r, &v);
            Ok(r)
        }
        BoundCommand::ChaosU0 { beta1, h1, beta2, h2 } => {
            let m1 = ModelSpec::sk(*beta1, *h1)?;
            let m2 = ModelSpec::sk(*beta2, *h2)?;
            let mut r = Record::new("bound chaos-u0", seed)
                .param("beta1", beta1)
                .param("h1", h1)
                .param("beta2", beta2)
                .param("h2", h2);
            let pred = bounds::chaos_prediction(&m1, &m2)?;
            r.value("u0", pred.u0);
            r.value("q1", pred.q1);
            r.value("q2", pred.q2);
            r.value("window", pred.window);
            r.value("inside_window", pred.inside_window);
            let (a1, a2) = (bounds::natural_diagonal(&m1)?, bounds::natural_diagonal(&m2)?);
            r.residual(
                "dlambda_at_u0",
                bounds::coupled_field_dlambda_at_zero(&m1, &m2, pred.u0, a1, a2),
            );
            Ok(r)
        }
        BoundCommand::PspinCoupled { p, betas, scan_c } => {
            let [b1, b2] = betas[..] else {
                return Err(CliError::Usage("--betas needs exactly two values".into()));
            };
            let grid = parse_grid(scan_c)?;
            if grid.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(CliError::Usage("c must lie in [0, 1]".into()));
            }
            let sys = bounds::CoupledPspin::new(ModelSpec::new(*p, b1, 0.0)?, ModelSpec::new(*p, b2, 0.0)?)?;
            let mut r = Record::new("bound pspin-coupled", seed)
                .param("p", p)
                .param("betas", betas)
                .param("scan_c", scan_c);
            let m0 = sys.m0();
            r.value("m0", m0);
            r.value("trivial_value", sys.trivial_value());
            let mut rows = Vec::with_capacity(grid.len());
            let mut worst = 0.0f64;
            for &c in &grid {
                let u = sys.u(m0, c)?;
                worst = worst.max((u - sys.trivial_value()).abs());
                rows.push(vec![c, u, sys.d(c)]);
            }
            r.residual("max_trivial_gap", worst);
            r.table = Some(Table {
                columns: vec!["c".into(), "u_m0".into(), "d".into()],
                rows,
            });
            Ok(r)
        }
        BoundCommand::PspinTail { p, beta, scan_u } => {
            let grid = parse_grid(scan_u)?;
            let tail = bounds::PspinTail::new(ModelSpec::new(*p, *beta, 0.0)?)?;
            let mut r = Record::new("bound pspin-tail", seed)
                .param("p", p)
                .param("beta", beta)
                .param("scan_u", scan_u);
            let critical = parisi::pspin_critical(&ModelSpec::new(*p, *beta, 0.0)?)?;
            r.value("q", critical.q);
            r.value("m", critical.m);
            r.value("trivial_value", tail.trivial_value());
            if grid.iter().any(|u| !(0.0..=1.0).contains(u)) {
                return Err(CliError::Usage("u must lie in [0, 1]".into()));
            }
            // The functional is only defined above the critical overlap.
            let mut rows = Vec::new();
            for &u in grid.iter().filter(|&&u| u > critical.q) {
                let a0 = tail.a0(u);
                rows.push(vec![u, a0, tail.u(1.0, a0, u)?, tail.d(u)]);
            }
            r.residual("d_at_q", tail.d(critical.q));
            r.table = Some(Table {
                columns: vec!["u".into(), "a0".into(), "u_at_n1".into(), "d".into()],
                rows,
            });
            Ok(r)
        }
        BoundCommand::Guerra {
            input,
            matrix,
            betas,
            construction,
        } => {
            let mut r = Record::new("bound guerra", seed);
            let bound_input = match input {
                Some(path) => {
                    r = r.param("input", path.display().to_string());
                    let file: GuerraFile = serde_json::from_str(&std::fs::read_to_string(path)?)
                        .map_err(|e| CliError::Usage(format!("bad parameter file: {e}")))?;
                    file.into_input()?
                }
                None => {
                    let q = parse_matrix(matrix)?;
                    let betas = betas
                        .clone()
                        .ok_or_else(|| CliError::Usage("--betas is required without --input".into()))?;
                    r = r
                        .param("q", q.to_rows())
                        .param("betas", &betas)
                        .param("construction", format!("{construction:?}").to_lowercase());
                    match construction {
                        Construction::Eigen => bounds::theorem1_construction(&q, &betas)?,
                        Construction::Shifted => {
                            if betas.iter().any(|b| *b != betas[0]) || betas.len() != q.n() {
                                return Err(CliError::Usage(
                                    "the shifted construction needs n equal temperatures".into(),
                                ));
                            }
                            bounds::shifted_parameters(&q, betas[0])?
                        }
                    }
                }
            };
            let value = bounds::guerra_bound(&bound_input)?;
            let trivial = trivial_sum(&bound_input.betas, &bound_input.fields, bound_input.p)?;
            r.value("bound", value);
            r.value("trivial_sum", trivial);
            r.value("gap", value - trivial);
            Ok(r)
        }
        BoundCommand::Lemma4 { matrix, delta0, beta } => {
            let q = parse_matrix(matrix)?;
            let n = q.n();
            let mut r = Record::new("bound lemma4", seed).param("q", q.to_rows());
            let sol = match (delta0, beta) {
                (Some(d), _) => {
                    if d.len() != n * n {
                        return Err(CliError::Usage(format!("--delta0 needs {} entries", n * n)));
                    }
                    r = r.param("delta0", d);
                    let d = nalgebra::DMatrix::from_row_slice(n, n, d);
                    bounds::lemma4_value(q.as_matrix(), &d)?
                }
                (None, Some(beta)) => {
                    r = r.param("beta", beta);
                    let (phi0, sol) = bounds::theorem2_phi0(&q, *beta)?;
                    let expected = 0.5 * n as f64 * (3.0 * beta - 2.0 - beta.ln());
                    r.value("phi0", phi0);
                    r.value("phi0_expected", expected);
                    r.residual("phi0_gap", phi0 - expected);
                    sol
                }
                (None, None) => return Err(CliError::Usage("give --delta0 or --beta".into())),
            };
            r.value("value", sol.value);
            r.value("minimizer", linalg::to_rows(&sol.a));
            r.residual("stationarity", sol.stationarity);
            Ok(r)
        }
    }
}

fn require_p2(p: u32) -> CliResult<()> {
    if p != 2 {
        return Err(CliError::Usage(format!("Monte Carlo supports p = 2 only, got {p}")));
    }
    Ok(())
}

fn estimate_record(r: &mut Record, e: &McEstimate, key: &str) {
    r.value(key, e.mean);
    r.value(&format!("{key}_std_error"), e.std_error);
    r.value(&format!("{key}_n_eff"), e.n_eff);
    r.value(&format!("{key}_per_sample"), &e.per_sample);
}

fn write_trace(path: &Option<PathBuf>, rows: &[simulator::TraceRow]) -> CliResult<()> {
    if let Some(path) = path {
        let file = std::fs::File::create(path)?;
        simulator::write_trace_csv(rows, std::io::BufWriter::new(file))?;
    }
    Ok(())
}

fn mc_params(r: Record, mc: &McArgs) -> Record {
    r.param("n", mc.n)
        .param("sweeps", mc.sweeps)
        .param("burn_in", mc.burn_in)
        .param("thin", mc.thin)
        .param("samples", mc.samples)
        .param("epsilon", mc.epsilon)
}

fn cmd_simulate(s: &SimulateCommand, seed: u64) -> CliResult<Record> {
    match s {
        SimulateCommand::Overlap { p, beta, h, mc } => {
            require_p2(*p)?;
            let model = ModelSpec::sk(*beta, *h)?;
            let config = mc.config(seed);
            let mut r = mc_params(Record::new("simulate overlap", seed), mc)
                .param("beta", beta)
                .param("h", h);
            let e = simulator::estimate_overlap_moments(&model, &model, Moment::Second, &config)?;
            estimate_record(&mut r, &e, "r2");
            let q = parisi::solve_q_2spin(&model)?;
            r.value("predicted_r2", q * q);
            r.value("acceptance_rate", e.acceptance_rate);
            r.value("histogram_mass_near_q", e.histogram.mass_near(&[-q, q], 0.1));
            r.value("histogram_mode", e.histogram.mode());
            r.residual("r2_gap", e.mean - q * q);
            write_trace(&mc.trace, &e.trace)?;
            Ok(r)
        }
        SimulateCommand::Chaos { beta1, h1, beta2, h2, mc } => {
            let m1 = ModelSpec::sk(*beta1, *h1)?;
            let m2 = ModelSpec::sk(*beta2, *h2)?;
            let config = mc.config(seed);
            let mut r = mc_params(Record::new("simulate chaos", seed), mc)
                .param("beta1", beta1)
                .param("h1", h1)
                .param("beta2", beta2)
                .param("h2", h2);
            let u0 = match bounds::chaos_u0(&m1, &m2) {
                Ok(u) => Some(u),
                Err(Error::BothFieldsZero) => None,
                Err(e) => return Err(e.into()),
            };
            let e = simulator::estimate_overlap_moments(&m1, &m2, Moment::First, &config)?;
            estimate_record(&mut r, &e, "r");
            r.value("predicted_u0", u0);
            r.value("histogram_mode", e.histogram.mode());
            if let Some(u0) = u0 {
                r.residual("mode_gap", e.histogram.mode() - u0);
            }
            write_trace(&mc.trace, &e.trace)?;
            Ok(r)
        }
        SimulateCommand::Lemma2 {
            beta1,
            h1,
            beta2,
            h2,
            k,
            mc,
        } => {
            let m1 = ModelSpec::sk(*beta1, *h1)?;
            let m2 = ModelSpec::sk(*beta2, *h2)?;
            let config = mc.config(seed);
            let mut r = mc_params(Record::new("simulate lemma2", seed), mc)
                .param("beta1", beta1)
                .param("h1", h1)
                .param("beta2", beta2)
                .param("h2", h2)
                .param("k", k);
            let res = simulator::lemma2_check(&m1, &m2, &config, *k)?;
            estimate_record(&mut r, &res.lhs, "lhs");
            r.value("rhs", res.rhs);
            r.value("rhs_std_error", res.rhs_std_error);
            r.value("combined_std_error", res.combined_std_error);
            r.residual("lhs_minus_rhs", res.lhs.mean - res.rhs);
            r.verdict = Some(if res.holds { "holds" } else { "violated" }.into());
            write_trace(&mc.trace, &res.lhs.trace)?;
            Ok(r)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exec(args: &[&str]) -> CliResult<Record> {
        let cli = Cli::try_parse_from(std::iter::once("glasskit").chain(args.iter().copied())).unwrap();
        execute(&cli.command, cli.seed)
    }

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0:1:0.25").unwrap();
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(parse_grid("0:1:0.05").unwrap().len(), 21);
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("0:1").is_err());
    }

    #[test]
    fn matrix_text() {
        let m = parse_matrix_text("1, 0.5\n# comment\n0.5 1\n").unwrap();
        assert_eq!(m[(0, 1)], 0.5);
        assert!(parse_matrix_text("1 x\n").is_err());
    }

    #[test]
    fn parisi_closed_form() {
        let r = exec(&["parisi", "--p", "2", "--beta", "2"]).unwrap();
        let v = r.values["value"].as_f64().unwrap();
        assert!((v - 0.5 * (2.5 - 2f64.ln())).abs() < 1e-8);
        assert!((r.values["q"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exit_codes() {
        let e = exec(&["parisi", "--p", "3", "--beta", "2"]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = exec(&["simulate", "overlap", "--beta", "2", "--p", "4"]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = exec(&["bound", "theorem1", "--betas", "2,2", "--q", "1,0.5,0.4,1"]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert_eq!(
            CliError::Model(Error::ChainTooShort { n_eff: 1.0, required: 100.0 }).exit_code(),
            4
        );
        assert_eq!(CliError::Model(Error::NoRoot("x".into())).exit_code(), 3);
    }

    #[test]
    fn ultrametric_record() {
        let r = exec(&["bound", "ultrametric", "--beta", "1.5"]).unwrap();
        assert_eq!(r.values["excluded"], Value::Bool(true));
        assert!((r.values["r_min"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let r = exec(&["bound", "chaos-u0", "--beta1", "1.3", "--h1", "0.2", "--beta2", "0.7", "--h2", "-0.4"]).unwrap();
        let back: Record = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn csv_table_output() {
        let r = exec(&["bound", "pspin-tail", "--p", "4", "--beta", "3", "--scan-u", "0.9:1:0.05"]).unwrap();
        let csv = r.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("u,a0,u_at_n1,d"));
        assert_eq!(lines.count(), 3);
    }
}
