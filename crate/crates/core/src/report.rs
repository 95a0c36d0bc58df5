//! Run configurations and their CSV and JSON artifacts.
//!
//! Every run resolves its inputs into a [`RunConfig`], hashes it, and writes
//! `<command>.csv` and `<command>.json` into the output directory. The CSV
//! starts with a `# config_sha256=` comment line; the JSON embeds the config.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::bogoliubov::{e_b, e_b_dispersion, qp_coeffs};
use crate::error::{Error, Result};
use crate::fock::{ExcitationBasis, Sector};
use crate::lattice::{enumerate_ball, ModeSet, Momentum};
use crate::linalg::{EigenOptions, DEFAULT_DENSE_THRESHOLD};
use crate::oracle::fit_binding_series;
use crate::perturbation::RsEngine;
use crate::potential::PotentialSpec;
use crate::series::{
    closure_violation, convergence_study, e0_binding, e1_binding, e2_binding,
    e2_binding_qp_assembly, scaling_probe, E1Form, ScalingOptions,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Coeffs,
    Series,
    Scaling,
    RsCheck,
    OracleFit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Coeffs => "coeffs",
            Command::Series => "series",
            Command::Scaling => "scaling",
            Command::RsCheck => "rs-check",
            Command::OracleFit => "oracle-fit",
        }
    }
}

/// A resolved mode set: a ball of physical radius, or explicit momenta.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModeSpec {
    Ball(f64),
    List(Vec<Momentum>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub dense_threshold: usize,
    pub tol: f64,
    pub krylov_dim: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let e = EigenOptions::default();
        SolverConfig {
            dense_threshold: DEFAULT_DENSE_THRESHOLD,
            tol: e.tol,
            krylov_dim: e.krylov_dim,
            max_restarts: e.max_restarts,
            seed: e.seed,
        }
    }
}

impl SolverConfig {
    pub fn eigen_options(&self) -> EigenOptions {
        EigenOptions {
            dense_threshold: self.dense_threshold,
            tol: self.tol,
            krylov_dim: self.krylov_dim,
            max_restarts: self.max_restarts,
            seed: self.seed,
        }
    }
}

fn default_dim() -> usize {
    1
}

fn default_order() -> u32 {
    2
}

fn default_cutoff_factor() -> f64 {
    ScalingOptions::default().cutoff_factor
}

/// Everything a run depends on, fully serializable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub potential: PotentialSpec,
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// `None` uses the exact domain of a tabulated potential.
    #[serde(default)]
    pub modes: Option<ModeSpec>,
    #[serde(default)]
    pub cutoffs: Vec<f64>,
    #[serde(default)]
    pub lambda_scales: Vec<f64>,
    #[serde(default)]
    pub n_list: Vec<u32>,
    #[serde(default)]
    pub nmax_sweep: Vec<u32>,
    #[serde(default = "default_order")]
    pub order: u32,
    #[serde(default = "default_cutoff_factor")]
    pub cutoff_factor: f64,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub workers: Option<usize>,
    /// Omits wall-clock fields so repeated runs are byte-identical.
    #[serde(default)]
    pub deterministic: bool,
    /// Lifts the zero-momentum restriction of the `N`-body basis.
    #[serde(default)]
    pub full_space: bool,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config always serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_json().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::invalid("dim", "must be 1, 2 or 3"));
        }
        if let Some(d) = self.potential.table_dim() {
            if d != self.dim {
                return Err(Error::invalid(
                    "potential.entries.n",
                    format!("table has dimension {d}, run has {}", self.dim),
                ));
            }
        }
        if !(1..=2).contains(&self.order) {
            return Err(Error::invalid("order", "must be 1 or 2"));
        }
        if self.workers == Some(0) {
            return Err(Error::invalid("workers", "must be positive"));
        }
        if !(self.cutoff_factor.is_finite() && self.cutoff_factor > 0.0) {
            return Err(Error::invalid("cutoff_factor", "must be positive"));
        }
        if !(self.solver.tol > 0.0 && self.solver.tol < 1.0) || self.solver.krylov_dim < 2 {
            return Err(Error::invalid(
                "solver",
                "tol must lie in (0, 1) and krylov_dim be at least 2",
            ));
        }
        if self.cutoffs.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::invalid("cutoffs", "must be positive"));
        }
        if self
            .lambda_scales
            .iter()
            .any(|c| !(c.is_finite() && *c > 0.0))
        {
            return Err(Error::invalid("lambda_scale", "must be positive"));
        }
        if let Some(ModeSpec::Ball(r)) = &self.modes {
            if !(r.is_finite() && *r > 0.0) {
                return Err(Error::invalid("modes", "ball radius must be positive"));
            }
        }
        let need = |empty: bool, field: &str| {
            if empty {
                Err(Error::invalid(
                    field,
                    format!("required by `{}`", self.command.name()),
                ))
            } else {
                Ok(())
            }
        };
        match self.command {
            Command::Coeffs => Ok(()),
            Command::Series => need(self.cutoffs.is_empty(), "cutoffs"),
            Command::Scaling => need(self.lambda_scales.is_empty(), "lambda_scale"),
            Command::RsCheck => need(self.nmax_sweep.is_empty(), "nmax_sweep"),
            Command::OracleFit => need(self.n_list.is_empty(), "N_list"),
        }
    }

    fn scales(&self) -> Vec<f64> {
        if self.lambda_scales.is_empty() {
            vec![self.potential.lambda_scale()]
        } else {
            self.lambda_scales.clone()
        }
    }

    /// The mode set of the run for a given potential.
    pub fn mode_set(&self, spec: &PotentialSpec) -> Result<ModeSet> {
        match &self.modes {
            Some(ModeSpec::Ball(r)) => enumerate_ball(self.dim, *r),
            Some(ModeSpec::List(ms)) => ModeSet::from_list(self.dim, ms.clone()),
            None => match spec.exact_domain() {
                Ok(m) => Ok(m),
                Err(Error::UnboundedSupport) => Err(Error::invalid(
                    "modes",
                    "a gaussian potential needs an explicit mode set",
                )),
                Err(e) => Err(e),
            },
        }
    }
}

/// Parses a comma-separated list.
pub fn parse_list<T>(s: &str, field: &str) -> Result<Vec<T>>
where
    T: FromStr,
    T::Err: Display,
{
    let t = s.trim();
    if t.is_empty() {
        return Err(Error::invalid(field, "empty list"));
    }
    t.split(',')
        .map(|x| {
            x.trim()
                .parse::<T>()
                .map_err(|e| Error::invalid(field, format!("`{}`: {e}", x.trim())))
        })
        .collect()
}

/// `ball:R` or `list:PATH`, unresolved.
#[derive(Clone, Debug, PartialEq)]
pub enum ModeArg {
    Ball(f64),
    ListPath(PathBuf),
}

pub fn parse_mode_arg(s: &str) -> Result<ModeArg> {
    let (kind, rest) = s
        .split_once(':')
        .ok_or_else(|| Error::invalid("modes", "expected `ball:R` or `list:PATH`"))?;
    match kind.trim() {
        "ball" => {
            let r: f64 = rest
                .trim()
                .parse()
                .map_err(|e| Error::invalid("modes", format!("ball radius `{rest}`: {e}")))?;
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::invalid("modes", "ball radius must be positive"));
            }
            Ok(ModeArg::Ball(r))
        }
        "list" if !rest.trim().is_empty() => Ok(ModeArg::ListPath(PathBuf::from(rest.trim()))),
        _ => Err(Error::invalid("modes", "expected `ball:R` or `list:PATH`")),
    }
}

/// Reads a `list:` file (a JSON array of integer vectors).
pub fn resolve_mode_arg(arg: &ModeArg) -> Result<ModeSpec> {
    match arg {
        ModeArg::Ball(r) => Ok(ModeSpec::Ball(*r)),
        ModeArg::ListPath(p) => {
            let m = ModeSet::from_json(&fs::read_to_string(p)?)?;
            Ok(ModeSpec::List(m.modes().to_vec()))
        }
    }
}

/// Inline JSON when the argument starts with `{`, otherwise a file path.
pub fn load_potential(arg: &str) -> Result<PotentialSpec> {
    let t = arg.trim_start();
    if t.starts_with('{') {
        PotentialSpec::from_json(t)
    } else {
        PotentialSpec::from_json(&fs::read_to_string(arg)?)
    }
}

/// Process exit code for an error class.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidField { .. } | Error::Parse(_) | Error::Json(_) => 2,
        Error::Domain(_) | Error::Unsupported(_) | Error::UnboundedSupport => 3,
        Error::Solver(_) | Error::IllConditioned { .. } => 4,
        Error::SizeLimit { .. } => 5,
        Error::Io(_) | Error::Csv(_) => 6,
    }
}

/// Machine-readable error description.
pub fn error_record(e: &Error) -> Value {
    let kind = match e {
        Error::InvalidField { .. } => "invalid_field",
        Error::Parse(_) => "parse",
        Error::Json(_) => "json",
        Error::Domain(_) => "domain",
        Error::Unsupported(_) => "unsupported",
        Error::UnboundedSupport => "unbounded_support",
        Error::Solver(_) => "solver",
        Error::IllConditioned { .. } => "ill_conditioned",
        Error::SizeLimit { .. } => "size_limit",
        Error::Io(_) => "io",
        Error::Csv(_) => "csv",
    };
    let mut rec = json!({
        "error": kind,
        "message": e.to_string(),
        "exit_code": exit_code(e),
    });
    match e {
        Error::InvalidField { field, .. } => rec["field"] = json!(field),
        Error::SizeLimit { size, limit, .. } => {
            rec["size"] = json!(size);
            rec["limit"] = json!(limit);
        }
        Error::IllConditioned { condition } => rec["condition"] = json!(condition),
        Error::Json(j) => {
            // serde names the field as "unknown field `x`" or "missing field `x`".
            let msg = j.to_string();
            if let Some(name) = msg
                .split_once("field `")
                .and_then(|(_, rest)| rest.split_once('`'))
                .map(|(name, _)| name.to_string())
            {
                rec["field"] = json!(name);
            }
        }
        _ => {}
    }
    rec
}

/// Paths written by a successful run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub rows: usize,
}

/// A CSV table with a fixed header.
struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write(&self, path: &Path, hash: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        let mut out = format!("# config_sha256={hash}\n").into_bytes();
        out.extend_from_slice(&body);
        fs::write(path, out)?;
        Ok(())
    }
}

fn f(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(f).unwrap_or_default()
}

/// Executes a run and writes its artifacts.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    config.validate()?;
    match config.workers {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Domain(format!("thread pool: {e}")))?
            .install(|| run_inner(config)),
        None => run_inner(config),
    }
}

fn run_inner(config: &RunConfig) -> Result<RunSummary> {
    let start = Instant::now();
    let (table, result) = match config.command {
        Command::Coeffs => run_coeffs(config)?,
        Command::Series => run_series(config)?,
        Command::Scaling => run_scaling(config)?,
        Command::RsCheck => run_rs_check(config)?,
        Command::OracleFit => run_oracle_fit(config)?,
    };
    fs::create_dir_all(&config.out_dir)?;
    let hash = config.hash();
    let name = config.command.name();
    let csv = config.out_dir.join(format!("{name}.csv"));
    let json_path = config.out_dir.join(format!("{name}.json"));
    table.write(&csv, &hash)?;
    let mut doc = json!({
        "config": config,
        "config_sha256": hash,
        "result": result,
    });
    if !config.deterministic {
        doc["elapsed_seconds"] = json!(start.elapsed().as_secs_f64());
    }
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    fs::write(&json_path, text)?;
    Ok(RunSummary {
        csv,
        json: json_path,
        rows: table.rows.len(),
    })
}

fn run_coeffs(config: &RunConfig) -> Result<(Table, Value)> {
    let mut table = Table::new(&[
        "lambda_scale",
        "n",
        "k2",
        "vhat",
        "eps",
        "alpha",
        "sigma",
        "gamma",
    ]);
    let mut results = Vec::new();
    for l in config.scales() {
        let spec = config.potential.with_scale(l)?;
        let modes = config.mode_set(&spec)?;
        for k in modes.iter() {
            let q = qp_coeffs(&spec, k)?;
            table.push(vec![
                f(l),
                serde_json::to_string(k.n())?,
                f(k.k2()),
                f(spec.vhat(k)),
                f(q.eps),
                f(q.alpha),
                f(q.sigma),
                f(q.gamma),
            ]);
        }
        let e2 = e2_binding(&modes, &spec);
        results.push(json!({
            "lambda_scale": l,
            "mode_set": modes.summary(),
            "n_modes": modes.len(),
            "e_b": e_b(&modes, &spec),
            "e_b_dispersion": e_b_dispersion(&modes, &spec),
            "e0_binding": e0_binding(&spec),
            "e1_binding": e1_binding(&modes, &spec, E1Form::Compact),
            "e1_binding_alt": e1_binding(&modes, &spec, E1Form::E0MinusKinetic),
            "e2_binding": e2.value,
            "e2_qp": e2_binding_qp_assembly(&modes, &spec),
            "closure_violation": e2.closure_violation,
        }));
    }
    Ok((table, json!(results)))
}

fn run_series(config: &RunConfig) -> Result<(Table, Value)> {
    let mut table = Table::new(&[
        "lambda_scale",
        "cutoff",
        "n_modes",
        "e0b",
        "e1b_compact",
        "e1b_alt",
        "e2b",
        "e2b_qp_term1",
        "e2b_qp_term2",
        "e2b_qp_term3",
        "e2b_qp_term4",
        "e2b_qp_total",
        "closure_violation",
    ]);
    let mut results = Vec::new();
    for l in config.scales() {
        let spec = config.potential.with_scale(l)?;
        let res = convergence_study(&spec, config.dim, &config.cutoffs)?;
        for r in &res.convergence {
            let mut row = vec![
                f(l),
                f(r.cutoff),
                r.n_modes.to_string(),
                f(r.e0b),
                f(r.e1b_compact),
                f(r.e1b_alt),
                f(r.e2b),
            ];
            row.extend(r.e2b_qp.iter().map(|&t| f(t)));
            row.push(f(crate::summation::compensated_sum(r.e2b_qp)));
            row.push(r.closure_violation.to_string());
            table.push(row);
        }
        results.push(json!({ "lambda_scale": l, "series": res }));
    }
    Ok((table, json!(results)))
}

fn run_scaling(config: &RunConfig) -> Result<(Table, Value)> {
    let opts = ScalingOptions {
        dim: config.dim,
        cutoff_factor: config.cutoff_factor,
    };
    let rep = scaling_probe(&config.potential, &config.lambda_scales, &opts)?;
    let mut table = Table::new(&[
        "lambda_scale",
        "width",
        "n_modes",
        "e2_binding",
        "e2_over_lambda2",
        "single_sum",
        "pair_sum",
        "leading_sum",
        "leading_ratio",
    ]);
    for r in &rep.rows {
        table.push(vec![
            f(r.lambda),
            f(r.width),
            r.n_modes.to_string(),
            f(r.e2_binding),
            f(r.e2_over_lambda2),
            f(r.single_sum),
            f(r.pair_sum),
            f(r.leading_sum),
            f(r.leading_ratio),
        ]);
    }
    Ok((table, serde_json::to_value(&rep)?))
}

fn run_rs_check(config: &RunConfig) -> Result<(Table, Value)> {
    let spec = config.potential.with_scale(config.scales()[0])?;
    let modes = config.mode_set(&spec)?;
    let opts = config.solver.eigen_options();
    let targets = [
        e1_binding(&modes, &spec, E1Form::Compact),
        e2_binding(&modes, &spec).value,
    ];
    let mut table = Table::new(&[
        "nmax",
        "dim",
        "E1",
        "E1_tilde",
        "E1_binding",
        "E2",
        "E2_tilde",
        "E2_binding",
        "E1_target",
        "E2_target",
        "E1_abs_err",
        "E2_abs_err",
    ]);
    let mut rows = Vec::new();
    for &n_max in &config.nmax_sweep {
        let basis = ExcitationBasis::new(&modes, n_max, Sector::ZeroMomentum)?;
        let engine = RsEngine::new(&basis, &spec, &opts)?;
        let b1 = engine.binding(1)?;
        let b2 = if config.order >= 2 {
            Some(engine.binding(2)?)
        } else {
            None
        };
        let e2 = b2.as_ref();
        table.push(vec![
            n_max.to_string(),
            basis.len().to_string(),
            f(b1.plain.value),
            f(b1.tilde.value),
            f(b1.binding),
            opt(e2.map(|b| b.plain.value)),
            opt(e2.map(|b| b.tilde.value)),
            opt(e2.map(|b| b.binding)),
            f(targets[0]),
            opt(e2.map(|_| targets[1])),
            f((b1.binding - targets[0]).abs()),
            opt(e2.map(|b| (b.binding - targets[1]).abs())),
        ]);
        rows.push(json!({
            "nmax": n_max,
            "dim": basis.len(),
            "ground_energy": engine.ground.energy,
            "order1": b1,
            "order2": b2,
        }));
    }
    let result = json!({
        "mode_set": modes.summary(),
        "closure_violation": closure_violation(&modes, &spec),
        "targets": { "e1_binding": targets[0], "e2_binding": targets[1] },
        "sweep": rows,
    });
    Ok((table, result))
}

fn run_oracle_fit(config: &RunConfig) -> Result<(Table, Value)> {
    let spec = config.potential.with_scale(config.scales()[0])?;
    let modes = config.mode_set(&spec)?;
    let sector = if config.full_space {
        Sector::All
    } else {
        Sector::ZeroMomentum
    };
    let fit = fit_binding_series(
        &config.n_list,
        &spec,
        &modes,
        config.order as usize,
        sector,
        &config.solver.eigen_options(),
    )?;
    let mut table = Table::new(&["N", "lambda", "E_N", "E_Nm1", "deltaE"]);
    for p in &fit.points {
        table.push(vec![
            p.n.to_string(),
            f(p.lambda),
            f(p.e_n),
            f(p.e_nm1),
            f(p.delta_e),
        ]);
    }
    Ok((table, serde_json::to_value(&fit)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_parsing() {
        assert_eq!(
            parse_list::<u32>("4, 6,8", "nmax_sweep").unwrap(),
            vec![4, 6, 8]
        );
        match parse_list::<u32>("4,x", "nmax_sweep") {
            Err(Error::InvalidField { field, .. }) => assert_eq!(field, "nmax_sweep"),
            other => panic!("{other:?}"),
        }
        assert!(parse_list::<f64>("", "cutoffs").is_err());
    }

    #[test]
    fn mode_arg_parsing() {
        assert_eq!(parse_mode_arg("ball:13.5").unwrap(), ModeArg::Ball(13.5));
        assert_eq!(
            parse_mode_arg("list:m.json").unwrap(),
            ModeArg::ListPath(PathBuf::from("m.json"))
        );
        for bad in ["ball", "ball:-1", "ball:nan", "disk:3", "list:"] {
            assert!(parse_mode_arg(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn config_round_trip_and_hash() {
        let text = r#"{"command":"rs-check","potential":{"kind":"tabulated","v0":1.0,
            "entries":[{"n":[1],"v":10.0}]},"nmax_sweep":[4,6],"out_dir":"o"}"#;
        let c = RunConfig::from_json(text).unwrap();
        let back = RunConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.hash(), back.hash());
        assert_eq!(c.hash().len(), 64);
        assert!(
            RunConfig::from_json(&text.replace("\"out_dir\"", "\"bogus\":1,\"out_dir\"")).is_err()
        );
    }

    #[test]
    fn command_requirements() {
        let text =
            r#"{"command":"series","potential":{"kind":"gaussian","g":1.0,"s":1.0},"out_dir":"o"}"#;
        match RunConfig::from_json(text) {
            Err(Error::InvalidField { field, .. }) => assert_eq!(field, "cutoffs"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn error_records_carry_field_and_code() {
        let e = Error::invalid("potential.g", "must be positive");
        let r = error_record(&e);
        assert_eq!(r["field"], "potential.g");
        assert_eq!(r["exit_code"], 2);
        let codes: std::collections::BTreeSet<i32> = [
            Error::invalid("a", "b"),
            Error::Domain("d".into()),
            Error::Solver("s".into()),
            Error::SizeLimit {
                what: "w",
                size: 2,
                limit: 1,
            },
            Error::Io(std::io::Error::other("x")),
        ]
        .iter()
        .map(exit_code)
        .collect();
        assert_eq!(codes.len(), 5);
        let j = load_potential(r#"{"kind":"gaussian","g":1.0,"s":1.0,"width":2}"#).unwrap_err();
        assert_eq!(error_record(&j)["field"], "width");
    }
}
