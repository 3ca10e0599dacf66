//! Front end shared by the `quasinormal` binary and its tests: spec loading,
//! routing to the checkers, canonical reports.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use quasinormal::cnu::{check_cnu_quasinormal, check_prop_char, split_cnu};
use quasinormal::funcspec::{complex_from_json, FunctionSpec};
use quasinormal::operators::{self, Origin, TruncOperator};
use quasinormal::opspec::{OperatorSpec, Truncation};
use quasinormal::rank_one::{self, beurling_theta, Generated};
use quasinormal::report::{canonicalize, cjson, cvec_json, CheckReport};
use quasinormal::spectral::{check_polar_commutation, extract_decomposition};
use quasinormal::{Error, Result, Tolerances, C64};
use quasinormal_oracle::{brute_kernel, brute_residual, equivalence_suite, Family};
use serde_json::{json, Map, Value};

pub const REPORT_VERSION: &str = "1.0.0";

/// Shipped schema for every report this crate writes.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

/// `N` used by `generate` when the truncation is left at "auto".
pub const GENERATE_DEFAULT_N: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Check,
    Decompose,
    CnuCheck,
    Generate,
    Theta,
    Suite,
    Oracle,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Decompose => "decompose",
            Command::CnuCheck => "cnu-check",
            Command::Generate => "generate",
            Command::Theta => "theta",
            Command::Suite => "suite",
            Command::Oracle => "oracle",
        }
    }

    fn needs_spec(&self) -> bool {
        !matches!(self, Command::Generate | Command::Suite)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Text,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Input {
    None,
    Path(PathBuf),
    Inline(String),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub input: Input,
    pub tolerances: Tolerances,
    /// overrides the spec's `N` when set
    pub truncation: Option<Truncation>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
    pub trials: usize,
    pub family: Option<String>,
    pub timing: bool,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            input: Input::None,
            tolerances: Tolerances::default(),
            truncation: None,
            out: None,
            format: Format::Json,
            seed: 0,
            trials: 100,
            family: None,
            timing: false,
        }
    }

    pub fn with_spec(mut self, spec: &Value) -> Self {
        self.input = Input::Inline(spec.to_string());
        self
    }
}

/// Parses `--truncation`: a positive integer or `auto`.
pub fn parse_truncation(s: &str) -> std::result::Result<Truncation, String> {
    if s == "auto" {
        return Ok(Truncation::Auto);
    }
    match s.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(Truncation::Fixed(n)),
        _ => Err(format!("expected a positive integer or \"auto\", got `{s}`")),
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    /// 0 verdict true / success, 1 verdict false, 2 error
    pub exit: i32,
    pub report: Option<Value>,
    pub error: Option<String>,
}

impl Outcome {
    fn error(msg: String) -> Self {
        Outcome { exit: 2, report: None, error: Some(msg) }
    }
}

/// What a command computed, before the common envelope is added.
struct Body {
    spec_echo: Value,
    classification: Option<String>,
    verdict: bool,
    residuals: Map<String, Value>,
    certificate: Map<String, Value>,
    truncation: Option<usize>,
}

impl Body {
    fn new(spec_echo: Value) -> Self {
        Body {
            spec_echo,
            classification: None,
            verdict: false,
            residuals: Map::new(),
            certificate: Map::new(),
            truncation: None,
        }
    }

    fn from_check(spec_echo: Value, rep: &CheckReport, n: usize) -> Self {
        let full = rep.to_json();
        let mut b = Body::new(spec_echo);
        b.classification = Some(rep.classification.as_str().to_string());
        b.verdict = rep.verdict;
        if let Some(r) = full["residuals"].as_object() {
            b.residuals = r.clone();
        }
        b.certificate = rep.certificate.clone();
        for key in ["conditions", "diagnostics", "oracle_verdict", "consistency_alarm"] {
            b.certificate.insert(key.into(), full[key].clone());
        }
        b.truncation = Some(n);
        b
    }
}

fn read_spec(cfg: &RunConfig) -> std::result::Result<Option<Value>, String> {
    let (text, origin) = match &cfg.input {
        Input::None => return Ok(None),
        Input::Path(p) => (
            std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?,
            p.display().to_string(),
        ),
        Input::Inline(s) => (s.clone(), "--spec".to_string()),
    };
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| format!("malformed spec in {origin} at line {}, column {}: {e}", e.line(), e.column()))
}

fn operator_spec(cfg: &RunConfig, v: &Value) -> Result<OperatorSpec> {
    let spec = OperatorSpec::from_json(v)?;
    Ok(match cfg.truncation {
        Some(t) => spec.with_truncation(t),
        None => spec,
    })
}

/// Builds the operator; `N` is resolved (including "auto") before anything else runs.
fn build(cfg: &RunConfig, v: &Value) -> Result<(OperatorSpec, TruncOperator)> {
    let spec = operator_spec(cfg, v)?;
    let n = spec.resolve_truncation(&cfg.tolerances)?;
    let spec = spec.with_truncation(Truncation::Fixed(n));
    let t = spec.build(&cfg.tolerances)?;
    Ok((spec, t))
}

pub fn run(cfg: &RunConfig) -> Outcome {
    let start = Instant::now();
    if let Err(e) = cfg.tolerances.validate() {
        return Outcome::error(e.to_string());
    }
    let spec = match read_spec(cfg) {
        Ok(s) => s,
        Err(msg) => return Outcome::error(msg),
    };
    if cfg.command.needs_spec() && spec.is_none() {
        return Outcome::error(format!("`{}` needs an operator spec (--input or --spec)", cfg.command.as_str()));
    }
    let null = Value::Null;
    let spec = spec.as_ref().unwrap_or(&null);
    let body = match cfg.command {
        Command::Check => check(cfg, spec),
        Command::Decompose => decompose(cfg, spec),
        Command::CnuCheck => cnu_check(cfg, spec),
        Command::Generate => generate(cfg, spec),
        Command::Theta => theta(cfg, spec),
        Command::Suite => suite(cfg),
        Command::Oracle => oracle(cfg, spec),
    };
    let body = match body {
        Ok(b) => b,
        Err(e) => return Outcome::error(e.to_string()),
    };
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let tol = &cfg.tolerances;
    let report = json!({
        "version": REPORT_VERSION,
        "command": cfg.command.as_str(),
        "spec_echo": body.spec_echo,
        "classification": body.classification,
        "verdict": body.verdict,
        "residuals": body.residuals,
        "certificate": body.certificate,
        "tolerances": {"residual": tol.residual, "group": tol.group, "rank": tol.rank, "tail": tol.tail},
        "truncation": body.truncation,
        "timing_ms": if cfg.timing { json!(elapsed) } else { Value::Null },
    });
    Outcome { exit: if body.verdict { 0 } else { 1 }, report: Some(canonicalize(&report)), error: None }
}

fn check(cfg: &RunConfig, v: &Value) -> Result<Body> {
    let (spec, t) = build(cfg, v)?;
    let rep = match t.origin() {
        Origin::PerturbedShift { .. } => rank_one::check(&t, &cfg.tolerances)?,
        Origin::Dim1Cnu { .. } => check_cnu_quasinormal(&split_cnu(&t, &cfg.tolerances)?, &cfg.tolerances),
        _ => check_polar_commutation(&t, &cfg.tolerances)?,
    };
    Ok(Body::from_check(spec.to_json(), &rep, t.n()))
}

fn decompose(cfg: &RunConfig, v: &Value) -> Result<Body> {
    let (spec, t) = build(cfg, v)?;
    let mut b = Body::new(spec.to_json());
    b.truncation = Some(t.n());
    match extract_decomposition(&t, &cfg.tolerances) {
        Ok(d) => {
            b.verdict = true;
            b.classification = Some("diagonal-plus-isometry".into());
            b.residuals.insert("oracle".into(), json!(d.oracle_residual));
            b.residuals.insert("conjugation".into(), json!(d.conjugation_residual));
            b.residuals.insert("eigenspace_invariance".into(), json!(d.invariance_residual));
            b.certificate.insert("diag_entries".into(), cvec_json(&d.diag_entries));
            b.certificate.insert("moduli".into(), json!(d.moduli));
            b.certificate.insert("c_flag".into(), json!(d.c_flag));
            b.certificate.insert("unital_dim".into(), json!(d.isometry_basis.ncols()));
        }
        Err(Error::Precondition(msg)) => {
            b.classification = Some("not-quasinormal".into());
            b.residuals.insert("oracle".into(), json!(operators::scaled_quasinormal_residual(&t)?));
            b.certificate.insert("reason".into(), json!(msg));
        }
        Err(e) => return Err(e),
    }
    Ok(b)
}

fn cnu_check(cfg: &RunConfig, v: &Value) -> Result<Body> {
    let (spec, t) = build(cfg, v)?;
    let c = split_cnu(&t, &cfg.tolerances)?;
    let rep = check_cnu_quasinormal(&c, &cfg.tolerances);
    let mut b = Body::from_check(spec.to_json(), &rep, t.n());
    let prop = check_prop_char(&c, &cfg.tolerances);
    b.certificate.insert(
        "prop_char".into(),
        json!({"holds": prop.holds, "residuals": prop.residuals, "lambda": prop.lambda}),
    );
    b.certificate.insert("defect_dim".into(), json!(c.n));
    b.certificate.insert("index_gap".into(), json!(c.k));
    Ok(b)
}

fn theta(cfg: &RunConfig, v: &Value) -> Result<Body> {
    let (spec, t) = build(cfg, v)?;
    let th = beurling_theta(&t, &cfg.tolerances)?;
    let mut b = Body::new(spec.to_json());
    b.truncation = Some(t.n());
    b.verdict = true;
    b.residuals.insert("oracle".into(), json!(operators::scaled_quasinormal_residual(&t)?));
    b.residuals.insert("orthogonality".into(), json!(th.orthogonality_residual));
    b.certificate.insert("degree".into(), json!(th.degree()));
    b.certificate.insert("zeros".into(), cvec_json(th.zeros()));
    b.certificate.insert("double_zero".into(), json!(th.double_zero));
    Ok(b)
}

fn oracle(cfg: &RunConfig, v: &Value) -> Result<Body> {
    let (spec, t) = build(cfg, v)?;
    let tol = &cfg.tolerances;
    let scale = t.norm_bound().max(1.0).powi(3);
    let brute = brute_residual(&t)? / scale;
    let fast = operators::scaled_quasinormal_residual(&t)?;
    let w = t.exact_window();
    let d = quasinormal::linalg::CMat::identity(w, w) - t.gram_window(w);
    let (rank, null) = brute_kernel(&d, tol.rank);
    let mut b = Body::new(spec.to_json());
    b.truncation = Some(t.n());
    b.verdict = brute <= tol.residual;
    b.classification = Some(if b.verdict { "quasinormal" } else { "not-quasinormal" }.into());
    b.residuals.insert("oracle".into(), json!(brute));
    b.residuals.insert("fast_path".into(), json!(fast));
    b.residuals.insert("dual_path_gap".into(), json!((brute - fast).abs()));
    b.certificate.insert("defect_rank".into(), json!(rank));
    b.certificate.insert("defect_kernel_dim".into(), json!(null.ncols()));
    b.certificate.insert("exact_window".into(), json!(w));
    Ok(b)
}

fn suite(cfg: &RunConfig) -> Result<Body> {
    let name = cfg.family.as_deref().ok_or_else(|| Error::InvalidInput("`suite` needs --family".into()))?;
    let family = Family::from_str(name)?;
    let s = equivalence_suite(family, cfg.trials, cfg.seed, &cfg.tolerances)?;
    let mut b = Body::new(json!({"family": name, "trials": cfg.trials, "seed": cfg.seed}));
    b.verdict = s.passed();
    b.residuals.insert("max_oracle".into(), json!(s.max_residual("oracle")));
    b.residuals.insert("max_dual_path_gap".into(), json!(s.max_residual("dual_path_gap")));
    if let Value::Object(m) = s.to_json() {
        b.certificate = m;
    }
    Ok(b)
}

fn param_c(p: &Value, key: &str, default: C64) -> Result<C64> {
    match p.get(key) {
        Some(x) => complex_from_json(x).map_err(|e| Error::InvalidInput(format!("`{key}`: {e}"))),
        None => Ok(default),
    }
}

fn param_usize(p: &Value, key: &str, default: usize) -> Result<usize> {
    match p.get(key) {
        Some(x) => x
            .as_u64()
            .map(|n| n as usize)
            .ok_or_else(|| Error::InvalidInput(format!("`{key}` must be a non-negative integer"))),
        None => Ok(default),
    }
}

/// `generate --family F [--spec params]`: builds an instance and checks it.
fn generate(cfg: &RunConfig, p: &Value) -> Result<Body> {
    let tol = &cfg.tolerances;
    let family = cfg.family.as_deref().ok_or_else(|| Error::InvalidInput("`generate` needs --family".into()))?;
    let n = match cfg.truncation {
        Some(Truncation::Fixed(n)) => n,
        _ => GENERATE_DEFAULT_N,
    };
    let zero = C64::new(0.0, 0.0);
    let g: Generated = match family {
        "dependent" => rank_one::generate_dependent(
            param_c(p, "alpha", C64::new(0.4, 0.0))?,
            param_c(p, "u0", C64::new(0.2, 0.0))?,
            param_c(p, "c_scale", C64::new(1.0, 0.0))?,
            n,
            tol,
        )?,
        "isometry" => {
            let u = match p.get("u") {
                Some(f) => FunctionSpec::from_json(f).map_err(|e| Error::InvalidInput(format!("`u`: {e}")))?,
                None => FunctionSpec::monomial(0),
            };
            let phase = p.get("phase").and_then(Value::as_f64).unwrap_or(0.0);
            rank_one::generate_isometry(param_usize(p, "k", 1)?, phase, &u, n, tol)?
        }
        "independent" => {
            let coeffs = match p.get("p") {
                Some(Value::Array(a)) => a.iter().map(complex_from_json).collect::<Result<Vec<_>>>()?,
                Some(_) => return Err(Error::InvalidInput("`p` must be a list of complex numbers".into())),
                None => vec![C64::new(1.0, 0.0)],
            };
            rank_one::generate_independent(
                param_usize(p, "k", 2)?,
                param_c(p, "alpha", zero)?,
                param_c(p, "beta", C64::new(0.5, 0.0))?,
                &coeffs,
                param_c(p, "d", C64::new(0.3, 0.0))?,
                n,
                tol,
            )?
        }
        "type1" => rank_one::generate_type1(param_c(p, "alpha", zero)?, cfg.seed, n, tol)?,
        "type2" => rank_one::generate_type2(
            param_c(p, "alpha", zero)?,
            param_c(p, "beta", C64::new(0.5, 0.0))?,
            cfg.seed,
            n,
            tol,
        )?,
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown generator family `{other}` (dependent, isometry, independent, type1, type2)"
            )))
        }
    };
    let rep = rank_one::check(&g.op, tol)?;
    let mut b = Body::from_check(g.spec().to_json(), &rep, g.op.n());
    b.certificate.insert("generator".into(), json!({"family": family, "seed": cfg.seed, "params": g.params}));
    Ok(b)
}

/// Canonical serialization: compact, sorted keys, rounded floats, trailing newline.
pub fn to_canonical_string(report: &Value) -> String {
    let mut s = serde_json::to_string(&canonicalize(report)).unwrap_or_default();
    s.push('\n');
    s
}

fn short(v: &Value) -> String {
    match v {
        Value::Number(n) => n.as_f64().map_or_else(|| n.to_string(), |x| format!("{x:.3e}")),
        other => other.to_string(),
    }
}

/// Human-readable summary of a report.
pub fn render_text(report: &Value) -> String {
    let mut out = String::new();
    let verdict = report["verdict"].as_bool().unwrap_or(false);
    let _ = writeln!(out, "command:        {}", report["command"].as_str().unwrap_or("?"));
    if let Some(c) = report["classification"].as_str() {
        let _ = writeln!(out, "classification: {c}");
    }
    let _ = writeln!(out, "verdict:        {verdict}");
    if let Some(n) = report["truncation"].as_u64() {
        let _ = writeln!(out, "truncation:     N = {n}");
    }
    if let Some(r) = report["residuals"].as_object() {
        let _ = writeln!(out, "residuals:");
        for (k, v) in r {
            let _ = writeln!(out, "  {k:<28} {}", short(v));
        }
    }
    if let Some(Value::Object(conds)) = report["certificate"].get("conditions") {
        let _ = writeln!(out, "conditions:");
        for (k, v) in conds {
            let _ = writeln!(out, "  {k:<28} {}", if v.as_bool() == Some(true) { "holds" } else { "FAILS" });
        }
    }
    if let Some(a) = report["certificate"].get("consistency_alarm").and_then(Value::as_str) {
        let _ = writeln!(out, "ALARM: {a}");
    }
    if let Some(t) = report["timing_ms"].as_f64() {
        let _ = writeln!(out, "time:           {t:.1} ms");
    }
    out
}

/// Complex number as `[re, im]` (re-exported for callers building specs).
pub fn complex(re: f64, im: f64) -> Value {
    cjson(C64::new(re, im))
}
