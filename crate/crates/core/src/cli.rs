//! Command-line front end.
//!
//! Every numeric result is one JSON line on stdout (or one CSV row with
//! `--csv`), tagged with the method that produced it. A short human summary
//! goes to stderr. Exit codes: 0 ok, 1 usage, 2 non-convergence, 3 resource
//! cap, 4 verification failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::montecarlo::{estimate_prob, sample_states, SimConfig, SimError};
use crate::oracle::{oracle_prob, OracleError};
use crate::qcore::{ModelError, RateProfile, StateVector};
use crate::transition::{
    step_init_prob, transition_probability, ContourOptions, ProbabilityResult, TransitionError,
    TransitionRequest,
};
use crate::verify::{identities_suite, oracle_match_suite, residuals_suite, Check, SuiteReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NONCONVERGENCE: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "qtazrp", version, about = "Transition probabilities of the inhomogeneous q-TAZRP")]
pub struct Cli {
    /// Emit CSV rows instead of JSON lines.
    #[arg(long, global = true)]
    pub csv: bool,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// P_Y(X; t) from the contour-integral formula.
    Prob(ProbArgs),
    /// P(X; t) from the step initial condition Y = (0, ..., 0).
    StepProb(StepArgs),
    /// Master-equation probability on a truncated window.
    Oracle(OracleArgs),
    /// Monte Carlo estimates.
    Simulate(SimArgs),
    /// Run verification suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct ContourArgs {
    /// Contour radius; defaults to twice the largest relevant b_k.
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub radius_scale: f64,
    /// Starting node count per variable (power of two).
    #[arg(long, default_value_t = crate::quadrature::DEFAULT_NODES)]
    pub nodes: usize,
    #[arg(long, default_value_t = crate::quadrature::DEFAULT_MAX_NODES)]
    pub max_nodes: usize,
    #[arg(long, default_value_t = crate::quadrature::DEFAULT_TOL)]
    pub tol: f64,
    /// Largest accepted R t.
    #[arg(long, default_value_t = crate::transition::DEFAULT_MAX_RT)]
    pub max_rt: f64,
}

impl ContourArgs {
    fn options(&self) -> ContourOptions {
        ContourOptions {
            radius: self.radius,
            radius_scale: self.radius_scale,
            nodes: self.nodes,
            max_nodes: self.max_nodes.max(self.nodes),
            tol: self.tol,
            max_rt: self.max_rt,
        }
    }
}

#[derive(Debug, Args)]
pub struct ProbArgs {
    /// Initial state, e.g. "1,0".
    #[arg(long, allow_hyphen_values = true)]
    pub from: String,
    /// Target state.
    #[arg(long, allow_hyphen_values = true)]
    pub to: String,
    #[arg(long)]
    pub t: f64,
    /// Rate profile JSON file.
    #[arg(long)]
    pub rates: PathBuf,
    #[command(flatten)]
    pub contour: ContourArgs,
}

#[derive(Debug, Args)]
pub struct StepArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub to: String,
    #[arg(long)]
    pub t: f64,
    #[arg(long)]
    pub rates: PathBuf,
    /// Also evaluate the general formula from the zero vector and report the delta.
    #[arg(long)]
    pub cross_check: bool,
    #[command(flatten)]
    pub contour: ContourArgs,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub from: String,
    #[arg(long, allow_hyphen_values = true)]
    pub to: String,
    #[arg(long)]
    pub t: f64,
    #[arg(long)]
    pub rates: PathBuf,
    /// Poisson tail allowed beyond the window ceiling.
    #[arg(long, default_value_t = 1e-12)]
    pub eps: f64,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub from: String,
    #[arg(long)]
    pub t: f64,
    #[arg(long)]
    pub rates: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Target states separated by ';' (or repeat the flag); without them every reached state is reported.
    #[arg(long, value_delimiter = ';', allow_hyphen_values = true)]
    pub targets: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Identities,
    Residuals,
    OracleMatch,
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    #[arg(long, default_value_t = 3)]
    pub n_max: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random points per n for the identity suite.
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    /// Random configurations per n for the residual suite.
    #[arg(long, default_value_t = 20)]
    pub cases: usize,
}

/// One output line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub method: &'static str,
    pub from: Vec<i64>,
    pub to: Vec<i64>,
    pub t: f64,
    pub value: f64,
    pub error: f64,
    pub converged: bool,
    pub nodes: Option<usize>,
    pub radius: Option<f64>,
    pub seed: Option<u64>,
    /// Difference to the reference named in `delta_against`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_against: Option<&'static str>,
    pub echo: Vec<String>,
}

/// A verification check as emitted by `verify`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub method: &'static str,
    pub suite: String,
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub seed: u64,
    pub echo: Vec<String>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    NonConvergence(String),
    Resource(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::NonConvergence(_) => EXIT_NONCONVERGENCE,
            Failure::Resource(_) => EXIT_RESOURCE,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::NonConvergence(m) | Failure::Resource(m) => m,
        }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<TransitionError> for Failure {
    fn from(e: TransitionError) -> Self {
        match e {
            TransitionError::Model(_)
            | TransitionError::DimensionMismatch { .. }
            | TransitionError::NegativeTime(_)
            | TransitionError::InvalidContour(_) => Failure::Usage(e.to_string()),
            TransitionError::TimeTooLarge { .. }
            | TransitionError::Pole(_)
            | TransitionError::NonConvergence(_) => Failure::NonConvergence(e.to_string()),
        }
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::StateCap { .. } => Failure::Resource(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure::Usage(e.to_string())
    }
}

struct Output<'a> {
    csv: bool,
    header_written: bool,
    out: &'a mut (dyn Write + Send),
    err: &'a mut (dyn Write + Send),
}

impl Output<'_> {
    fn emit<T: Serialize>(&mut self, row: &T) {
        if self.csv {
            let value = serde_json::to_value(row).expect("records serialize");
            let obj = value.as_object().expect("records are objects");
            let mut w = csv::Writer::from_writer(Vec::new());
            if !self.header_written {
                w.write_record(obj.keys()).expect("in-memory write");
                self.header_written = true;
            }
            w.write_record(obj.values().map(csv_cell)).expect("in-memory write");
            let bytes = w.into_inner().expect("in-memory flush");
            let _ = self.out.write_all(&bytes);
        } else {
            let _ = writeln!(self.out, "{}", serde_json::to_string(row).expect("records serialize"));
        }
    }

    fn note(&mut self, text: &str) {
        let _ = writeln!(self.err, "{text}");
    }
}

/// Flattens a JSON value into one cell; arrays become space-separated.
fn csv_cell(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::Null => String::new(),
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Array(items) => items.iter().map(csv_cell).collect::<Vec<_>>().join(" "),
        other => other.to_string(),
    }
}

fn parse_state(text: &str, flag: &str) -> Result<StateVector, Failure> {
    StateVector::parse(text).map_err(|e| Failure::Usage(format!("{flag}: {e}")))
}

fn load_rates(path: &PathBuf) -> Result<RateProfile, Failure> {
    RateProfile::from_path(path).map_err(|e| Failure::Usage(format!("--rates {}: {e}", path.display())))
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{rendered}");
            } else {
                let _ = write!(out, "{rendered}");
            }
            return code;
        }
    };
    let echo: Vec<String> = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let mut output = Output {
        csv: cli.csv,
        header_written: false,
        out,
        err,
    };
    let dispatch = |output: &mut Output<'_>| dispatch(&cli.command, &echo, output);
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(|| dispatch(&mut output)),
            Err(e) => Err(Failure::Resource(format!("thread pool: {e}"))),
        },
        None => dispatch(&mut output),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            output.note(&format!("error: {}", f.message()));
            f.code()
        }
    }
}

fn dispatch(cmd: &Command, echo: &[String], output: &mut Output<'_>) -> Result<i32, Failure> {
    let started = Instant::now();
    let code = match cmd {
        Command::Prob(a) => cmd_prob(a, echo, output)?,
        Command::StepProb(a) => cmd_step_prob(a, echo, output)?,
        Command::Oracle(a) => cmd_oracle(a, echo, output)?,
        Command::Simulate(a) => cmd_simulate(a, echo, output)?,
        Command::Verify(a) => cmd_verify(a, echo, output)?,
    };
    output.note(&format!("wall time {:.3} s", started.elapsed().as_secs_f64()));
    Ok(code)
}

fn bethe_record(
    from: &StateVector,
    to: &StateVector,
    t: f64,
    r: &ProbabilityResult,
    echo: &[String],
) -> Record {
    Record {
        method: "bethe",
        from: from.coords().to_vec(),
        to: to.coords().to_vec(),
        t,
        value: r.p,
        error: r.estimated_error,
        converged: r.converged,
        nodes: Some(r.nodes_used),
        radius: Some(r.radius),
        seed: None,
        delta: None,
        delta_against: None,
        echo: echo.to_vec(),
    }
}

/// Converged results pass through; non-converged ones are still printed and mapped to exit 2.
fn split_result(
    r: Result<ProbabilityResult, TransitionError>,
) -> Result<(ProbabilityResult, bool), Failure> {
    match r {
        Ok(r) => Ok((r, true)),
        Err(TransitionError::NonConvergence(r)) => Ok((*r, false)),
        Err(e) => Err(e.into()),
    }
}

fn summarize(output: &mut Output<'_>, label: &str, r: &ProbabilityResult) {
    output.note(&format!(
        "{label} = {:.12} (est. error {:.1e}, |Im| {:.1e}, M = {}, R = {}, {})",
        r.presented(),
        r.estimated_error,
        r.imag_leak,
        r.nodes_used,
        r.radius,
        if r.converged { "converged" } else { "NOT converged" }
    ));
}

fn cmd_prob(a: &ProbArgs, echo: &[String], output: &mut Output<'_>) -> Result<i32, Failure> {
    let from = parse_state(&a.from, "--from")?;
    let to = parse_state(&a.to, "--to")?;
    let profile = load_rates(&a.rates)?;
    let req = TransitionRequest::new(from.clone(), to.clone(), a.t, profile)
        .with_contour(a.contour.options());
    let (r, ok) = split_result(transition_probability(&req))?;
    output.emit(&bethe_record(&from, &to, a.t, &r, echo));
    summarize(output, &format!("P_{from}({to}; {})", a.t), &r);
    Ok(if ok { EXIT_OK } else { EXIT_NONCONVERGENCE })
}

fn cmd_step_prob(a: &StepArgs, echo: &[String], output: &mut Output<'_>) -> Result<i32, Failure> {
    let to = parse_state(&a.to, "--to")?;
    let profile = load_rates(&a.rates)?;
    let opts = a.contour.options();
    let from = StateVector::step(to.len());
    let (r, mut ok) = split_result(step_init_prob(&to, a.t, &profile, &opts))?;
    let mut record = bethe_record(&from, &to, a.t, &r, echo);
    summarize(output, &format!("P_step({to}; {})", a.t), &r);
    if a.cross_check {
        let req = TransitionRequest::new(from.clone(), to.clone(), a.t, profile).with_contour(opts);
        let (g, ok2) = split_result(transition_probability(&req))?;
        ok &= ok2;
        record.delta = Some((r.p - g.p).abs());
        record.delta_against = Some("bethe-permutation-sum");
        output.note(&format!("cross-check delta {:.3e}", (r.p - g.p).abs()));
    }
    output.emit(&record);
    Ok(if ok { EXIT_OK } else { EXIT_NONCONVERGENCE })
}

fn cmd_oracle(a: &OracleArgs, echo: &[String], output: &mut Output<'_>) -> Result<i32, Failure> {
    let from = parse_state(&a.from, "--from")?;
    let to = parse_state(&a.to, "--to")?;
    let profile = load_rates(&a.rates)?;
    let p = oracle_prob(&from, &to, a.t, &profile, a.eps)?;
    output.emit(&Record {
        method: "oracle",
        from: from.coords().to_vec(),
        to: to.coords().to_vec(),
        t: a.t,
        value: p,
        error: a.eps + 1e-12,
        converged: true,
        nodes: None,
        radius: None,
        seed: None,
        delta: None,
        delta_against: None,
        echo: echo.to_vec(),
    });
    output.note(&format!("oracle P_{from}({to}; {}) = {p:.12}", a.t));
    Ok(EXIT_OK)
}

fn cmd_simulate(a: &SimArgs, echo: &[String], output: &mut Output<'_>) -> Result<i32, Failure> {
    let from = parse_state(&a.from, "--from")?;
    let profile = load_rates(&a.rates)?;
    let config = SimConfig {
        initial: from.clone(),
        t: a.t,
        trials: a.trials,
        seed: a.seed,
        profile,
    };
    let targets = a
        .targets
        .iter()
        .map(|s| parse_state(s, "--targets"))
        .collect::<Result<Vec<_>, _>>()?;
    let estimates = if targets.is_empty() {
        let hist = sample_states(&config)?;
        let states: Vec<StateVector> = hist.into_iter().map(|(x, _)| x).collect();
        estimate_prob(&config, &states)?
    } else {
        estimate_prob(&config, &targets)?
    };
    for e in &estimates {
        output.emit(&Record {
            method: "mc",
            from: from.coords().to_vec(),
            to: e.target.clone(),
            t: a.t,
            value: e.p_hat,
            error: e.stderr,
            converged: true,
            nodes: None,
            radius: None,
            seed: Some(a.seed),
            delta: None,
            delta_against: None,
            echo: echo.to_vec(),
        });
    }
    output.note(&format!(
        "{} trials from {from} to t = {}, seed {}: {} records",
        a.trials,
        a.t,
        a.seed,
        estimates.len()
    ));
    Ok(EXIT_OK)
}

fn check_method(c: &Check) -> &'static str {
    if c.suite == "oracle-match" {
        "bethe-vs-oracle"
    } else {
        "bethe"
    }
}

fn cmd_verify(a: &VerifyArgs, echo: &[String], output: &mut Output<'_>) -> Result<i32, Failure> {
    let contour = ContourOptions::default();
    let mut report = SuiteReport::default();
    let wants = |s: Suite| a.suite == s || a.suite == Suite::All;
    if wants(Suite::Identities) {
        report.extend(identities_suite(a.n_max, a.points, a.seed));
    }
    if wants(Suite::Residuals) {
        report.extend(residuals_suite(a.n_max, a.cases, a.seed, &contour));
    }
    if wants(Suite::OracleMatch) {
        report.extend(oracle_match_suite(a.n_max, a.seed, &contour));
    }
    for c in &report.checks {
        output.emit(&CheckRecord {
            method: check_method(c),
            suite: c.suite.clone(),
            name: c.name.clone(),
            value: c.value,
            tolerance: c.tolerance,
            passed: c.passed,
            seed: a.seed,
            echo: echo.to_vec(),
        });
    }
    let failed = report.failures().count();
    output.note(&format!(
        "{} checks, {failed} failed, max value {:.3e}",
        report.checks.len(),
        report.max_value()
    ));
    for c in report.failures() {
        output.note(&format!("FAILED {} {}: {:e} >= {:e}", c.suite, c.name, c.value, c.tolerance));
    }
    Ok(if failed == 0 { EXIT_OK } else { EXIT_VERIFY })
}
