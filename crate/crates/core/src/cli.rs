//! Command-line front end and report documents.
//!
//! Exit codes: 0 on success or a positive verdict, 2 on a negative verdict
//! (infeasible, inconclusive, failed verification, non-member), 1 on usage
//! or input errors.

use std::io;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::alignment::{build_chain, verify_allocation, DEFAULT_TOL};
use crate::error::DofError;
use crate::model::{
    branch_dof_scaled, classify, max_user_dof, DofTuple, NetworkDims, Regime,
};
use crate::oracle::{oracle_membership, Verdict, DEFAULT_LEAKAGE_TOL, DEFAULT_MAX_ITERS};
use crate::rational::{format_rational, parse_rational, ratio, Rational};
use crate::region::{
    achievable_frontier_with, allocation_search_with, equal_antenna_member, equal_antenna_vertices,
    max_sum_dof_with, sweep_with, SearchLimits, SweepRow, TreeAllocation,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NEGATIVE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Classify,
    Region,
    Scheme,
    Verify,
    Oracle,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(
    name = "asymdof",
    version,
    about = "Asymmetric DoF regions of the 3-user MxN MIMO interference channel"
)]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// Transmit antennas per user (decimal or p/q).
    #[arg(long)]
    pub m: Option<String>,
    /// Receive antennas per user (decimal or p/q).
    #[arg(long)]
    pub n: Option<String>,
    /// DoF tuple d1,d2,d3 for scheme, verify and oracle.
    #[arg(long)]
    pub target: Option<String>,
    /// DoF tuple d1,d2,d3 to test for membership (region).
    #[arg(long)]
    pub check: Option<String>,
    /// List region vertices (M = N) or the Pareto frontier (M > N).
    #[arg(long)]
    pub enumerate: bool,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long = "leakage-tol", default_value_t = DEFAULT_LEAKAGE_TOL)]
    pub leakage_tol: f64,
    #[arg(long = "max-iters", default_value_t = DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    /// Tree lengths L_min ..= L_min + k enter the allocation search.
    #[arg(long = "extra-lengths", default_value_t = 1)]
    pub extra_lengths: u32,
    /// Ratio grid for sweep: `lo:hi:step` or a comma list (default (N+1)/N .. (2N-1)/N step 1/N).
    #[arg(long)]
    pub gammas: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

/// Validated run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub m: Option<Rational>,
    pub n: Option<Rational>,
    pub target: Option<DofTuple>,
    pub check: Option<DofTuple>,
    pub enumerate: bool,
    pub trials: usize,
    pub seed: u64,
    pub tol: f64,
    pub leakage_tol: f64,
    pub max_iters: usize,
    pub limits: SearchLimits,
    pub gammas: Option<Vec<Rational>>,
    pub output_path: Option<PathBuf>,
    pub format: Format,
}

/// A usage problem tied to the flag that caused it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError {
    pub flag: &'static str,
    pub message: String,
}

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.flag, self.message)
    }
}

fn usage(flag: &'static str, message: impl Into<String>) -> UsageError {
    UsageError {
        flag,
        message: message.into(),
    }
}

pub fn parse_tuple(text: &str) -> Result<DofTuple, DofError> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(DofError::Parse(text.to_string()));
    }
    let mut out = [Rational::from_integer(0); 3];
    for (slot, p) in out.iter_mut().zip(parts) {
        *slot = parse_rational(p)?;
    }
    Ok(DofTuple(out))
}

fn parse_gammas(text: &str) -> Result<Vec<Rational>, DofError> {
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [lo, hi, step] => {
            let (lo, hi, step) = (parse_rational(lo)?, parse_rational(hi)?, parse_rational(step)?);
            if step <= Rational::from_integer(0) {
                return Err(DofError::Parse(text.to_string()));
            }
            let mut out = Vec::new();
            let mut g = lo;
            while g <= hi {
                out.push(g);
                g += step;
            }
            Ok(out)
        }
        [list] => list.split(',').map(parse_rational).collect(),
        _ => Err(DofError::Parse(text.to_string())),
    }
}

impl RunConfig {
    pub fn from_args(args: &Args) -> Result<Self, UsageError> {
        let rational = |flag: &'static str, v: &Option<String>| {
            v.as_deref()
                .map(parse_rational)
                .transpose()
                .map_err(|e| usage(flag, e.to_string()))
        };
        let tuple = |flag: &'static str, v: &Option<String>| {
            v.as_deref()
                .map(parse_tuple)
                .transpose()
                .map_err(|e| usage(flag, e.to_string()))
        };
        if args.trials < 1 {
            return Err(usage("--trials", "must be at least 1"));
        }
        if args.tol.is_nan() || args.tol <= 0.0 {
            return Err(usage("--tol", "must be positive"));
        }
        if args.leakage_tol.is_nan() || args.leakage_tol <= 0.0 {
            return Err(usage("--leakage-tol", "must be positive"));
        }
        let format = match (args.command, args.format) {
            (Command::Sweep, f) => f.unwrap_or(Format::Csv),
            (_, Some(Format::Csv)) => return Err(usage("--format", "csv is only available for sweep")),
            _ => Format::Json,
        };
        let gammas = args
            .gammas
            .as_deref()
            .map(parse_gammas)
            .transpose()
            .map_err(|e| usage("--gammas", e.to_string()))?;
        Ok(Self {
            command: args.command,
            m: rational("--m", &args.m)?,
            n: rational("--n", &args.n)?,
            target: tuple("--target", &args.target)?,
            check: tuple("--check", &args.check)?,
            enumerate: args.enumerate,
            trials: args.trials,
            seed: args.seed,
            tol: args.tol,
            leakage_tol: args.leakage_tol,
            max_iters: args.max_iters,
            limits: SearchLimits {
                extra_lengths: args.extra_lengths,
            },
            gammas,
            output_path: args.out.clone(),
            format,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputEcho {
    pub m: String,
    pub n: String,
    pub m_scaled: u64,
    pub n_scaled: u64,
    pub scale: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeEcho {
    #[serde(rename = "L")]
    pub length: Option<u32>,
    pub loss_class: String,
    pub sub_interval: Option<String>,
    pub window: Option<[String; 2]>,
    pub d_o: Option<String>,
    pub d_o_scaled: Option<u64>,
    pub delta: Option<String>,
    pub d_max: Option<String>,
    pub i_min: Option<String>,
    pub max_user_dof: Option<String>,
    pub nominal_sum_bound: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub tol: f64,
    pub leakage_tol: f64,
    pub max_iters: usize,
    pub extra_lengths: u32,
}

/// Report document written by every command except CSV sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: Command,
    pub input: Option<InputEcho>,
    pub regime: Option<RegimeEcho>,
    pub result: Value,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub version: String,
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Document {
    Json(Box<Report>),
    Csv(String),
}

impl Document {
    pub fn render(&self) -> String {
        match self {
            Document::Json(r) => to_json(r),
            Document::Csv(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub document: Document,
}

/// serde_json formatter writing floats with 17 significant digits.
struct FixedFloats;

impl serde_json::ser::Formatter for FixedFloats {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats);
    value.serialize(&mut ser).expect("report serializes");
    let mut s = String::from_utf8(buf).expect("utf-8 JSON");
    s.push('\n');
    s
}

fn require<T: Copy>(v: Option<T>, flag: &'static str) -> Result<T, UsageError> {
    v.ok_or_else(|| usage(flag, "is required for this command"))
}

fn input_echo(dims: &NetworkDims) -> InputEcho {
    InputEcho {
        m: format_rational(&dims.m()),
        n: format_rational(&dims.n()),
        m_scaled: dims.m_int(),
        n_scaled: dims.n_int(),
        scale: dims.scale(),
    }
}

fn regime_echo(dims: &NetworkDims, regime: &Regime) -> RegimeEcho {
    let fmt = |r: Rational| format_rational(&r);
    match &regime.tree {
        None => RegimeEcho {
            length: None,
            loss_class: regime.loss_class.to_string(),
            sub_interval: None,
            window: None,
            d_o: None,
            d_o_scaled: None,
            delta: None,
            d_max: None,
            i_min: None,
            max_user_dof: None,
            nominal_sum_bound: None,
        },
        Some(t) => RegimeEcho {
            length: Some(t.length),
            loss_class: regime.loss_class.to_string(),
            sub_interval: Some(
                match t.sub_interval {
                    crate::model::SubInterval::Upper => "UPPER",
                    crate::model::SubInterval::Lower => "LOWER",
                }
                .to_string(),
            ),
            window: Some([fmt(t.window_lo), fmt(t.window_hi)]),
            d_o: Some(fmt(t.d_o)),
            d_o_scaled: Some(branch_dof_scaled(dims, t.length)),
            delta: Some(fmt(t.delta)),
            d_max: Some(fmt(t.d_max)),
            i_min: Some(fmt(t.i_min)),
            max_user_dof: max_user_dof(dims, t.length).ok().map(fmt),
            nominal_sum_bound: Some(fmt(t.nominal_sum_bound)),
        },
    }
}

fn allocation_json(dims: &NetworkDims, alloc: &TreeAllocation) -> Value {
    let fmt3 = |v: [u64; 3]| v.map(|x| format_rational(&dims.unscaled(x)));
    let trees: Vec<Value> = alloc
        .entries
        .iter()
        .map(|e| {
            let chain = build_chain(e.root, e.length);
            json!({
                "root": e.root,
                "L": e.length,
                "branches": format_rational(&dims.unscaled(e.branches)),
                "branches_scaled": e.branches,
                "segments": chain.segments,
                "alignments": chain.alignments,
                "start_null": chain.start_null,
                "end_null": chain.end_null,
            })
        })
        .collect();
    json!({
        "trees": trees,
        "dof": fmt3(alloc.induced_dof_scaled()),
        "dof_scaled": alloc.induced_dof_scaled(),
        "interference": fmt3(alloc.induced_interference_scaled()),
        "interference_scaled": alloc.induced_interference_scaled(),
        "occupancy": fmt3(alloc.occupancy_scaled()),
        "occupancy_scaled": alloc.occupancy_scaled(),
    })
}

enum Failure {
    Usage(UsageError),
    Input(DofError),
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e)
    }
}

impl From<DofError> for Failure {
    fn from(e: DofError) -> Self {
        Failure::Input(e)
    }
}

/// Error outcome of [`run`]: a one-line diagnostic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunError(pub String);

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn run(config: &RunConfig) -> Result<Outcome, RunError> {
    dispatch(config).map_err(|f| match f {
        Failure::Usage(u) => RunError(format!("usage error: {u}")),
        Failure::Input(e) => RunError(format!("error: {e}")),
    })
}

fn dispatch(cfg: &RunConfig) -> Result<Outcome, Failure> {
    if cfg.command == Command::Sweep {
        return run_sweep(cfg);
    }
    let m = require(cfg.m, "--m")?;
    let n = require(cfg.n, "--n")?;
    let dims = NetworkDims::new(m, n)?;
    let regime = classify(&dims)?;
    let (result, exit_code) = match cfg.command {
        Command::Classify => (json!({ "gamma": format_rational(&dims.gamma()) }), EXIT_OK),
        Command::Region => run_region(cfg, &dims)?,
        Command::Scheme => {
            let target = require(cfg.target, "--target")?;
            match allocation_search_with(&dims, &target, cfg.limits)? {
                Some(a) => (
                    json!({ "target": target, "feasible": true, "allocation": allocation_json(&dims, &a) }),
                    EXIT_OK,
                ),
                None => (json!({ "target": target, "feasible": false }), EXIT_NEGATIVE),
            }
        }
        Command::Verify => {
            let target = require(cfg.target, "--target")?;
            match allocation_search_with(&dims, &target, cfg.limits)? {
                Some(allocation) => {
                    let report = verify_allocation(&dims, &allocation, cfg.trials, cfg.seed, cfg.tol);
                    let code = if report.overall_pass { EXIT_OK } else { EXIT_NEGATIVE };
                    let mut value = serde_json::to_value(&report).expect("serializable");
                    value["allocation_detail"] = allocation_json(&dims, &report.allocation);
                    (value, code)
                }
                None => (
                    json!({ "target": target, "infeasible": true, "overall_pass": false }),
                    EXIT_NEGATIVE,
                ),
            }
        }
        Command::Oracle => {
            let target = require(cfg.target, "--target")?;
            let res = oracle_membership(&dims, &target, cfg.trials, cfg.seed, cfg.max_iters, cfg.leakage_tol)?;
            let code = match res.verdict {
                Verdict::FeasibleEvidence => EXIT_OK,
                Verdict::Inconclusive => EXIT_NEGATIVE,
            };
            let mut value = serde_json::to_value(&res).expect("serializable");
            value["best_leakage"] = json!(res.best_leakage());
            (value, code)
        }
        Command::Sweep => unreachable!("handled above"),
    };
    Ok(Outcome {
        exit_code,
        document: Document::Json(Box::new(Report {
            command: cfg.command,
            input: Some(input_echo(&dims)),
            regime: Some(regime_echo(&dims, &regime)),
            result,
            seed: cfg.seed,
            tolerances: tolerances(cfg),
            version: env!("CARGO_PKG_VERSION").to_string(),
        })),
    })
}

fn tolerances(cfg: &RunConfig) -> Tolerances {
    Tolerances {
        tol: cfg.tol,
        leakage_tol: cfg.leakage_tol,
        max_iters: cfg.max_iters,
        extra_lengths: cfg.limits.extra_lengths,
    }
}

fn run_region(cfg: &RunConfig, dims: &NetworkDims) -> Result<(Value, i32), Failure> {
    let mut result = serde_json::Map::new();
    let mut code = EXIT_OK;
    if let Some(d) = cfg.check {
        let member = if dims.is_square() {
            equal_antenna_member(dims.m(), &d) && d.is_nonnegative()
        } else {
            allocation_search_with(dims, &d, cfg.limits)?.is_some()
        };
        result.insert("check".into(), json!(d));
        result.insert("member".into(), json!(member));
        if !member {
            code = EXIT_NEGATIVE;
        }
    }
    if cfg.enumerate || cfg.check.is_none() {
        if dims.is_square() {
            result.insert("vertices".into(), json!(equal_antenna_vertices(dims.m())));
        } else {
            let frontier = achievable_frontier_with(dims, cfg.limits)?;
            let points: Vec<Value> = frontier
                .iter()
                .map(|p| {
                    json!({
                        "dof": p.dof,
                        "certified": p.certified,
                        "allocation": p.allocation.as_ref().map(|a| allocation_json(dims, a)),
                    })
                })
                .collect();
            result.insert("frontier".into(), Value::Array(points));
            result.insert("max_sum_dof".into(), json!(format_rational(&max_sum_dof_with(dims, cfg.limits)?)));
        }
    }
    Ok((Value::Object(result), code))
}

fn run_sweep(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let n = require(cfg.n, "--n")?;
    if !n.is_integer() || n < Rational::from_integer(1) {
        return Err(usage("--n", "sweep needs a positive integer N").into());
    }
    let n_fixed = n.to_integer() as u64;
    let gammas = cfg.gammas.clone().unwrap_or_else(|| {
        let n = n_fixed as i64;
        (n + 1..2 * n).map(|m| ratio(m, n)).collect()
    });
    let rows = sweep_with(n_fixed, &gammas, cfg.limits);
    let document = match cfg.format {
        Format::Csv => Document::Csv(sweep_csv(&rows)),
        Format::Json => Document::Json(Box::new(Report {
            command: Command::Sweep,
            input: None,
            regime: None,
            result: json!({ "n": n_fixed, "rows": rows }),
            seed: cfg.seed,
            tolerances: tolerances(cfg),
            version: env!("CARGO_PKG_VERSION").to_string(),
        })),
    };
    Ok(Outcome {
        exit_code: EXIT_OK,
        document,
    })
}

pub const SWEEP_HEADER: [&str; 5] = ["gamma", "L", "loss_class", "max_sum_dof", "max_user_dof"];

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record([
            format_rational(&r.gamma),
            r.length.map(|l| l.to_string()).unwrap_or_default(),
            r.loss_class
                .map(|c| c.to_string())
                .unwrap_or_else(|| "SKIPPED".into()),
            r.max_sum_dof.clone().unwrap_or_default(),
            r.max_user_dof.clone().unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8 CSV")
}

/// Parse process arguments, run, print and write the document; returns the
/// process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("usage error: {}", first.trim_start_matches("error: "));
            return EXIT_ERROR;
        }
    };
    let config = match RunConfig::from_args(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("usage error: {e}");
            return EXIT_ERROR;
        }
    };
    match run(&config) {
        Ok(outcome) => {
            let text = outcome.document.render();
            if let Some(path) = &config.output_path {
                if let Err(e) = std::fs::write(path, &text) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return EXIT_ERROR;
                }
            }
            print!("{text}");
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("{e}");
            EXIT_ERROR
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(argv: &[&str]) -> RunConfig {
        let mut full = vec!["asymdof"];
        full.extend_from_slice(argv);
        RunConfig::from_args(&Args::try_parse_from(full).unwrap()).unwrap()
    }

    #[test]
    fn classify_reports_both_scales() {
        let out = run(&config(&["classify", "--m", "11.25", "--n", "9"])).unwrap();
        assert_eq!(out.exit_code, EXIT_OK);
        let Document::Json(r) = out.document else { panic!("json expected") };
        let regime = r.regime.unwrap();
        assert_eq!(regime.length, Some(4));
        assert_eq!(regime.loss_class, "LOSSLESS_I");
        assert_eq!(regime.d_o.as_deref(), Some("2.25"));
        assert_eq!(regime.d_o_scaled, Some(9));
        assert_eq!(regime.max_user_dof.as_deref(), Some("6"));
        assert_eq!(r.input.unwrap().scale, 4);
    }

    #[test]
    fn region_check_violation_is_negative() {
        let out = run(&config(&["region", "--m", "2", "--n", "2", "--check", "2,1,0"])).unwrap();
        assert_eq!(out.exit_code, EXIT_NEGATIVE);
        let Document::Json(r) = out.document else { panic!() };
        assert_eq!(r.result["member"], json!(false));
    }

    #[test]
    fn usage_errors_name_the_flag() {
        let args = Args::try_parse_from(["asymdof", "verify", "--trials", "0"]).unwrap();
        assert_eq!(RunConfig::from_args(&args).unwrap_err().flag, "--trials");
        let args = Args::try_parse_from(["asymdof", "classify", "--m", "1.2345678"]).unwrap();
        assert_eq!(RunConfig::from_args(&args).unwrap_err().flag, "--m");
        let args = Args::try_parse_from(["asymdof", "classify", "--format", "csv"]).unwrap();
        assert_eq!(RunConfig::from_args(&args).unwrap_err().flag, "--format");
        let err = run(&config(&["scheme", "--m", "5", "--n", "4"])).unwrap_err();
        assert!(err.0.contains("--target"));
    }

    #[test]
    fn gamma_grid_parsing() {
        assert_eq!(
            parse_gammas("41/36:43/36:1/36").unwrap(),
            vec![ratio(41, 36), ratio(42, 36), ratio(43, 36)]
        );
        assert_eq!(parse_gammas("1.25,1.5").unwrap(), vec![ratio(5, 4), ratio(3, 2)]);
        assert!(parse_gammas("1:2:0").is_err());
    }

    #[test]
    fn floats_have_seventeen_digits() {
        let s = to_json(&json!({ "x": 1e-9 }));
        assert_eq!(s, "{\"x\":1.0000000000000001e-9}\n");
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["x"].as_f64(), Some(1e-9));
    }
}
