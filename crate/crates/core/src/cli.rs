//! The `varma-patch` command-line front-end.
//!
//! Every command is deterministic given its inputs and seed, writes a
//! `manifest.json` next to its outputs, and writes nothing on failure:
//! outputs are staged in temporary files and renamed into place only after
//! all of them have been produced.
//!
//! Exit codes: 0 success, 2 configuration or parse error, 3 invalid model,
//! 4 degenerate optimisation, 5 selection collapse, 1 anything else.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::contaminate::{apply, make_indicator, ContaminationSpec, OutlierKind};
use crate::error::{Error, Result};
use crate::estimate::{
    aic_avg, aic_param_count, fit, fitted_residuals, gaussian_loglik, iterate_patch_removal, select_model,
    write_selection_csv, Centering, FitOptions, SelectionRow, DEFAULT_MAX_OUTER,
};
use crate::montecarlo::{emit_table, run_experiment, write_cells_csv, ConfigDocument, TableFormat};
use crate::process::{residuals, simulate, ModelSpec, TimeSeries, VarmaModel, DEFAULT_BURN_IN};
use crate::subsample::IndexSet;

/// Environment variable read for the default worker-thread count.
pub const THREADS_ENV: &str = "VARMA_PATCH_THREADS";

#[derive(Debug, Parser)]
#[command(name = "varma-patch", version, about = "Patch-removal estimation of VARMA models under outliers")]
pub struct Cli {
    /// Seed overriding the one in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel commands (0 = all cores).
    #[arg(long, global = true, env = THREADS_ENV, default_value_t = 0)]
    pub threads: usize,
    /// Output file (simulate, trace) or directory (montecarlo, fit, select).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a (possibly contaminated) VARMA series from a JSON config.
    Simulate {
        config: PathBuf,
    },
    /// Run a Monte Carlo grid and emit bias/RMSE tables.
    Montecarlo {
        config: PathBuf,
    },
    /// Iterative patch-removal fit on a CSV series.
    Fit(FitArgs),
    /// AIC comparison over a grid of orders.
    Select(SelectArgs),
    /// Series and residual traces around a single outlier.
    Trace(TraceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CenteringArg {
    SubsetMean,
    None,
}

impl From<CenteringArg> for Centering {
    fn from(c: CenteringArg) -> Self {
        match c {
            CenteringArg::SubsetMean => Centering::SubsetMean,
            CenteringArg::None => Centering::None,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// Series CSV with header `t,y1,...,yd`.
    pub data: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    #[arg(long, default_value_t = 0)]
    pub q: usize,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2)]
    pub kappa: usize,
    #[arg(long, value_enum, default_value_t = CenteringArg::SubsetMean)]
    pub centering: CenteringArg,
    #[arg(long, default_value_t = DEFAULT_MAX_OUTER)]
    pub max_outer: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SelectArgs {
    pub data: PathBuf,
    /// Orders as `p:q` pairs separated by commas.
    #[arg(long, default_value = "1:0,2:0,3:0,0:1,0:2,0:3,1:1,1:2,1:3,2:1,2:2,3:3")]
    pub grid: String,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 5)]
    pub kappa: usize,
    #[arg(long, value_enum, default_value_t = CenteringArg::SubsetMean)]
    pub centering: CenteringArg,
}

#[derive(Debug, Args, Serialize)]
pub struct TraceArgs {
    #[arg(long = "length", default_value_t = 40)]
    pub t: usize,
    /// Outlier time.
    #[arg(long, default_value_t = 15)]
    pub tau: usize,
    #[arg(long, default_value_t = 5.0)]
    pub zeta: f64,
    #[arg(long, default_value_t = 0.7, allow_negative_numbers = true)]
    pub phi: f64,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub version: String,
    pub timestamp: String,
    pub outputs: Vec<String>,
}

/// SHA-256 of the canonical JSON form (object keys sorted).
pub fn config_hash(value: &Value) -> String {
    let canonical = serde_json::to_string(value).expect("JSON values serialise");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Simulation config.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: ModelSpec,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub contamination: Option<ContaminationConfig>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ContaminationConfig {
    pub kind: OutlierKind,
    pub alpha: f64,
    pub zeta: f64,
    #[serde(default)]
    pub guard: usize,
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) | Error::Json(_) | Error::Csv(_) | Error::InvalidArgument(_) | Error::DimensionMismatch(_) => 2,
        Error::NonCausal { .. } | Error::NonInvertible { .. } | Error::NotPositiveSemidefinite { .. } => 3,
        Error::DegenerateCriterion
        | Error::SingularCovariance
        | Error::SampleTooSmall { .. }
        | Error::AllReplicationsFailed(_) => 4,
        Error::SelectionCollapse { .. } => 5,
        Error::Io(_) | Error::NonContractive { .. } => 1,
    }
}

struct Staged {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Staged {
    fn new() -> Self {
        Self { files: Vec::new() }
    }

    fn add(&mut self, path: PathBuf, bytes: Vec<u8>) {
        self.files.push((path, bytes));
    }

    /// Writes every file to a temporary sibling first, then renames them all.
    fn commit(self) -> Result<()> {
        let mut temps = Vec::new();
        for (path, bytes) in &self.files {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
                _ => PathBuf::from("."),
            };
            fs::create_dir_all(&dir)?;
            let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
            tmp.write_all(bytes)?;
            tmp.flush()?;
            temps.push((tmp, path.clone()));
        }
        for (tmp, path) in temps {
            tmp.persist(&path).map_err(|e| Error::Io(e.error))?;
        }
        Ok(())
    }
}

fn manifest(command: &str, hashed: &Value, seed: Option<u64>, outputs: &[PathBuf]) -> Vec<u8> {
    let m = RunManifest {
        command: command.to_string(),
        config_hash: config_hash(hashed),
        seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: chrono::Utc::now().to_rfc3339(),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    let mut v = serde_json::to_vec_pretty(&m).expect("manifest serialises");
    v.push(b'\n');
    v
}

fn sibling_manifest(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn read_series(path: &Path) -> Result<TimeSeries> {
    let file = fs::File::open(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    TimeSeries::read_csv(file)
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn out_path(cli: &Cli, default: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

pub fn cmd_simulate(cli: &Cli, config: &Path) -> Result<()> {
    let raw = read_json(config)?;
    let cfg: SimulateConfig = serde_json::from_value(raw.clone()).map_err(|e| Error::Parse(e.to_string()))?;
    let model = VarmaModel::try_from(&cfg.model)?;
    let seed = cli.seed.unwrap_or(cfg.seed);
    let (clean, _) = simulate(&model, cfg.t, cfg.burn_in, seed)?;
    let out = out_path(cli, "series.csv");
    let mut staged = Staged::new();
    let mut outputs = vec![out.clone()];
    let series = match &cfg.contamination {
        None => clean,
        Some(c) => {
            let delta = make_indicator(cfg.t, c.alpha, seed, c.guard)?;
            let spec = ContaminationSpec::constant(c.kind, model.dim(), delta, c.zeta)?;
            let y = apply(&clean, &spec, &model)?;
            let mut clean_path = out.clone().into_os_string();
            clean_path.push(".clean.csv");
            let mut spec_path = out.clone().into_os_string();
            spec_path.push(".contamination.csv");
            staged.add(clean_path.clone().into(), csv_bytes(|b| clean.write_csv(b))?);
            staged.add(spec_path.clone().into(), csv_bytes(|b| spec.write_csv(b))?);
            outputs.push(clean_path.into());
            outputs.push(spec_path.into());
            y
        }
    };
    staged.add(out.clone(), csv_bytes(|b| series.write_csv(b))?);
    let manifest_path = sibling_manifest(&out);
    staged.add(manifest_path, manifest("simulate", &raw, Some(seed), &outputs));
    staged.commit()
}

pub fn cmd_montecarlo(cli: &Cli, config: &Path) -> Result<()> {
    let mut raw = read_json(config)?;
    if let (Some(seed), Some(obj)) = (cli.seed, raw.as_object_mut()) {
        obj.insert("base_seed".into(), Value::from(seed));
    }
    let doc: ConfigDocument = serde_json::from_value(raw.clone()).map_err(|e| Error::Parse(e.to_string()))?;
    let experiments = doc.experiments().map_err(|e| match e {
        Error::InvalidArgument(m) => Error::Parse(m),
        other => other,
    })?;
    let mut results = Vec::new();
    for cfg in &experiments {
        results.extend(run_experiment(cfg)?);
    }
    let dir = out_path(cli, "montecarlo_out");
    let outputs = vec![dir.join("table.csv"), dir.join("table.md"), dir.join("cells.csv")];
    let mut staged = Staged::new();
    staged.add(outputs[0].clone(), emit_table(&results, TableFormat::Csv)?.into_bytes());
    staged.add(outputs[1].clone(), emit_table(&results, TableFormat::Markdown)?.into_bytes());
    staged.add(outputs[2].clone(), csv_bytes(|b| write_cells_csv(&results, b))?);
    let seed = raw.get("base_seed").and_then(Value::as_u64);
    staged.add(dir.join("manifest.json"), manifest("montecarlo", &raw, seed, &outputs));
    staged.commit()
}

#[derive(Debug, Serialize)]
struct FitReport<'a> {
    orders: (usize, usize),
    alpha: f64,
    kappa: usize,
    fit: &'a crate::estimate::FitResult,
    trace: &'a crate::estimate::IterationTrace,
    flagged: Vec<usize>,
    aic_avg_patch: f64,
    aic_avg_full: Option<f64>,
}

fn index_csv(ts: &[usize]) -> Result<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["t"])?;
    for t in ts {
        wtr.write_record([t.to_string()])?;
    }
    wtr.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn cmd_fit(cli: &Cli, args: &FitArgs) -> Result<()> {
    if !(0.0..0.5).contains(&args.alpha) {
        return Err(Error::Parse(format!("alpha {} outside [0, 0.5)", args.alpha)));
    }
    let series = read_series(&args.data)?;
    let d = series.dim();
    let centering: Centering = args.centering.into();
    let opts = FitOptions::white_noise_start(d, args.p, args.q).with_centering(centering);
    let orders = (args.p, args.q);
    let (fit_res, trace) = iterate_patch_removal(&series, orders, args.alpha, args.kappa, &opts, args.max_outer)?;
    let k = aic_param_count(d, args.p, args.q, centering);
    let (ll, _) = gaussian_loglik(&fitted_residuals(&series, &fit_res)?, &fit_res.h_used)?;
    let full_set = IndexSet::after(series.len(), args.p.max(args.q));
    let aic_full = fit(&series, orders, &full_set, &opts)
        .and_then(|f| gaussian_loglik(&fitted_residuals(&series, &f)?, &full_set))
        .map(|(llf, _)| aic_avg(llf, k, full_set.len()))
        .ok();

    let warmup = args.p.max(args.q);
    let screened = trace.final_selection();
    let flagged: Vec<usize> = (warmup + 1..=series.len()).filter(|t| !screened.contains(*t)).collect();
    let report = FitReport {
        orders,
        alpha: args.alpha,
        kappa: args.kappa,
        fit: &fit_res,
        trace: &trace,
        flagged: flagged.clone(),
        aic_avg_patch: aic_avg(ll, k, fit_res.h_used.len()),
        aic_avg_full: aic_full,
    };

    let dir = out_path(cli, "fit_out");
    let outputs = vec![dir.join("fit.json"), dir.join("retained.csv"), dir.join("flagged.csv")];
    let mut staged = Staged::new();
    let mut json = serde_json::to_vec_pretty(&report)?;
    json.push(b'\n');
    staged.add(outputs[0].clone(), json);
    staged.add(outputs[1].clone(), csv_bytes(|b| fit_res.h_used.write_csv(b))?);
    staged.add(outputs[2].clone(), index_csv(&flagged)?);
    let hashed = serde_json::json!({ "command": "fit", "args": args });
    staged.add(dir.join("manifest.json"), manifest("fit", &hashed, cli.seed, &outputs));
    staged.commit()
}

/// Parses `p:q` pairs separated by commas.
pub fn parse_grid(s: &str) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        let (p, q) = item
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("grid entry `{item}` is not of the form p:q")))?;
        let p = p.trim().parse().map_err(|_| Error::Parse(format!("bad p in `{item}`")))?;
        let q = q.trim().parse().map_err(|_| Error::Parse(format!("bad q in `{item}`")))?;
        out.push((p, q));
    }
    if out.is_empty() {
        return Err(Error::Parse("model grid is empty".into()));
    }
    Ok(out)
}

fn flags_csv(rows: &[SelectionRow]) -> Result<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["p", "q", "converged", "full_converged", "outer_iterations", "error"])?;
    for r in rows {
        wtr.write_record([
            r.p.to_string(),
            r.q.to_string(),
            r.converged.to_string(),
            r.full_converged.to_string(),
            r.outer_iterations.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    wtr.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn cmd_select(cli: &Cli, args: &SelectArgs) -> Result<()> {
    let grid = parse_grid(&args.grid)?;
    if !(0.0..0.5).contains(&args.alpha) {
        return Err(Error::Parse(format!("alpha {} outside [0, 0.5)", args.alpha)));
    }
    let series = read_series(&args.data)?;
    let opts = FitOptions::white_noise_start(series.dim(), 0, 0).with_centering(args.centering.into());
    let rows = select_model(&series, &grid, args.alpha, args.kappa, &opts)?;
    let dir = out_path(cli, "select_out");
    let outputs = vec![dir.join("selection.csv"), dir.join("selection_flags.csv")];
    let mut staged = Staged::new();
    staged.add(outputs[0].clone(), csv_bytes(|b| write_selection_csv(&rows, b))?);
    staged.add(outputs[1].clone(), flags_csv(&rows)?);
    let hashed = serde_json::json!({ "command": "select", "args": args });
    staged.add(dir.join("manifest.json"), manifest("select", &hashed, cli.seed, &outputs));
    staged.commit()
}

/// Rows of the trace table for one model and kind.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub model: String,
    pub kind: String,
    pub t: usize,
    pub series: f64,
    pub residual: f64,
    pub clean_series: f64,
    pub clean_residual: f64,
    pub is_outlier_time: bool,
}

/// AR(1), MA(1) and ARMA(1,1) scalar models, each under AO and IO with a
/// single outlier of size `zeta` at `tau`, residuals at the true parameters.
pub fn trace_rows(args: &TraceArgs, seed: u64) -> Result<Vec<TraceRow>> {
    if args.tau == 0 || args.tau > args.t {
        return Err(Error::Parse(format!("tau {} outside 1..={}", args.tau, args.t)));
    }
    let models = [
        ("AR(1)", VarmaModel::scalar(&[args.phi], &[], 1.0)?),
        ("MA(1)", VarmaModel::scalar(&[], &[args.theta], 1.0)?),
        ("ARMA(1,1)", VarmaModel::scalar(&[args.phi], &[args.theta], 1.0)?),
    ];
    let mut delta = vec![false; args.t];
    delta[args.tau - 1] = true;
    let mut rows = Vec::new();
    for (name, model) in &models {
        crate::lagpoly::check_causal_invertible(model, 0.0).and_then(|r| {
            if !r.causal {
                Err(Error::NonCausal { max_modulus: r.max_ar_root_modulus, limit: 1.0 })
            } else if !r.invertible {
                Err(Error::NonInvertible { max_modulus: r.max_ma_root_modulus, limit: 1.0 })
            } else {
                Ok(())
            }
        })?;
        let (clean, _) = simulate(model, args.t, DEFAULT_BURN_IN, seed)?;
        let clean_res = residuals(&clean, model)?;
        for kind in [OutlierKind::Additive, OutlierKind::Innovative] {
            let spec = ContaminationSpec::constant(kind, 1, delta.clone(), args.zeta)?;
            let y = apply(&clean, &spec, model)?;
            let res = residuals(&y, model)?;
            for t in 1..=args.t {
                rows.push(TraceRow {
                    model: name.to_string(),
                    kind: kind.to_string(),
                    t,
                    series: y.at(t)[0],
                    residual: res.at(t)[0],
                    clean_series: clean.at(t)[0],
                    clean_residual: clean_res.at(t)[0],
                    is_outlier_time: t == args.tau,
                });
            }
        }
    }
    Ok(rows)
}

pub fn cmd_trace(cli: &Cli, args: &TraceArgs) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    let rows = trace_rows(args, seed)?;
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record([
        "model",
        "kind",
        "t",
        "series",
        "residual",
        "clean_series",
        "clean_residual",
        "is_outlier_time",
    ])?;
    for r in &rows {
        wtr.write_record([
            r.model.clone(),
            r.kind.clone(),
            r.t.to_string(),
            format!("{:?}", r.series),
            format!("{:?}", r.residual),
            format!("{:?}", r.clean_series),
            format!("{:?}", r.clean_residual),
            u8::from(r.is_outlier_time).to_string(),
        ])?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let out = out_path(cli, "trace.csv");
    let mut staged = Staged::new();
    staged.add(out.clone(), bytes);
    let hashed = serde_json::json!({ "command": "trace", "args": args });
    staged.add(sibling_manifest(&out), manifest("trace", &hashed, Some(seed), &[out]));
    staged.commit()
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate { config } => cmd_simulate(cli, config),
        Command::Montecarlo { config } => cmd_montecarlo(cli, config),
        Command::Fit(a) => cmd_fit(cli, a),
        Command::Select(a) => cmd_select(cli, a),
        Command::Trace(a) => cmd_trace(cli, a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if cli.threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_key_order() {
        let a: Value = serde_json::from_str(r#"{"a": 1, "b": [1, 2], "c": {"x": 1, "y": 2}}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"c": {"y": 2, "x": 1}, "b": [1, 2], "a": 1}"#).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        let c: Value = serde_json::from_str(r#"{"a": 2, "b": [1, 2], "c": {"x": 1, "y": 2}}"#).unwrap();
        assert_ne!(config_hash(&a), config_hash(&c));
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("1:0, 2:0,3:1").unwrap(), vec![(1, 0), (2, 0), (3, 1)]);
        assert!(parse_grid("").is_err());
        assert!(parse_grid("1-0").is_err());
    }

    #[test]
    fn default_grid_has_twelve_rows() {
        let cli = Cli::try_parse_from(["varma-patch", "select", "x.csv"]).unwrap();
        let Command::Select(a) = cli.command else { panic!() };
        assert_eq!(parse_grid(&a.grid).unwrap().len(), 12);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Parse("x".into())), 2);
        assert_eq!(exit_code(&Error::NotPositiveSemidefinite { eigenvalue: -1.0 }), 3);
        assert_eq!(exit_code(&Error::DegenerateCriterion), 4);
        assert_eq!(exit_code(&Error::SelectionCollapse { retained: 1, required: 2 }), 5);
    }

    #[test]
    fn trace_zero_zeta_leaves_series() {
        let args = TraceArgs { t: 20, tau: 5, zeta: 0.0, phi: 0.7, theta: 0.5 };
        for r in trace_rows(&args, 3).unwrap() {
            assert_eq!(r.series, r.clean_series);
            assert_eq!(r.residual, r.clean_residual);
        }
    }
}
