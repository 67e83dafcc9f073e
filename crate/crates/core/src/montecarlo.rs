//! Replication engine and bias/RMSE aggregation for the bivariate design
//! `Sigma = [[1, 0.2], [0.2, 1]]`, `A = [[0.7, 0], [0.3, 0.7]]` with
//! VAR(1) `x_t = A x_{t-1} + eps_t`, VMA(1) `x_t = eps_t + A eps_{t-1}` and
//! VARMA(1,1) combining both.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contaminate::{apply, make_indicator, ContaminationSpec, OutlierKind};
use crate::error::{Error, Result};
use crate::estimate::{patch_estimator, FitOptions};
use crate::process::{residuals, simulate, TimeSeries, VarmaModel, DEFAULT_BURN_IN};
use crate::subsample::{huber_skip_select, oracle_select, IndexSet};

/// Default replication count.
pub const DEFAULT_REPLICATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "VAR1")]
    Var1,
    #[serde(rename = "VMA1")]
    Vma1,
    #[serde(rename = "VARMA11")]
    Varma11,
}

impl ModelKind {
    pub fn orders(self) -> (usize, usize) {
        match self {
            ModelKind::Var1 => (1, 0),
            ModelKind::Vma1 => (0, 1),
            ModelKind::Varma11 => (1, 1),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Var1 => "VAR1",
            ModelKind::Vma1 => "VMA1",
            ModelKind::Varma11 => "VARMA11",
        }
    }

    /// The design model with the shared `A` and `Sigma`.
    pub fn true_model(self) -> VarmaModel {
        let a = design_a();
        let (p, q) = self.orders();
        let ar = if p == 1 { vec![a.clone()] } else { vec![] };
        let ma = if q == 1 { vec![a] } else { vec![] };
        VarmaModel::new(ar, ma, design_sigma()).expect("design model is valid")
    }
}

pub fn design_a() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.7, 0.0, 0.3, 0.7])
}

pub fn design_sigma() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Contamination {
    Clean,
    Ao,
    Io,
}

impl Contamination {
    pub fn label(self) -> &'static str {
        match self {
            Contamination::Clean => "CLEAN",
            Contamination::Ao => "AO",
            Contamination::Io => "IO",
        }
    }

    fn outlier_kind(self) -> Option<OutlierKind> {
        match self {
            Contamination::Clean => None,
            Contamination::Ao => Some(OutlierKind::Additive),
            Contamination::Io => Some(OutlierKind::Innovative),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetMode {
    /// `H = {t : delta_t = 0}`.
    #[default]
    Oracle,
    /// One Huber-skip screen of the residuals at the true parameters.
    HuberSkip,
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

/// One Monte Carlo cell family: every `kappa` in `kappa_list` is evaluated on
/// the same replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model_kind: ModelKind,
    #[serde(rename = "T")]
    pub t: usize,
    pub alpha: f64,
    pub zeta: f64,
    pub kind: Contamination,
    pub kappa_list: Vec<i64>,
    pub m: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub subset_mode: SubsetMode,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.alpha) {
            return Err(Error::InvalidArgument(format!("alpha {} outside [0, 0.5)", self.alpha)));
        }
        if !self.zeta.is_finite() {
            return Err(Error::InvalidArgument("zeta must be finite".into()));
        }
        if self.m == 0 {
            return Err(Error::InvalidArgument("m must be at least 1".into()));
        }
        if self.kappa_list.is_empty() {
            return Err(Error::InvalidArgument("kappa_list is empty".into()));
        }
        if let Some(k) = self.kappa_list.iter().find(|k| **k < 0) {
            return Err(Error::InvalidArgument(format!("negative kappa {k}")));
        }
        if self.t < 10 {
            return Err(Error::InvalidArgument(format!("T = {} is too short", self.t)));
        }
        Ok(())
    }

    fn kappas(&self) -> Vec<usize> {
        self.kappa_list.iter().map(|&k| k as usize).collect()
    }
}

/// A grid of experiments as laid out in a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub model_kind: ModelKind,
    #[serde(rename = "T")]
    pub t: Vec<usize>,
    pub alpha: Vec<f64>,
    pub zeta: Vec<f64>,
    pub kinds: Vec<Contamination>,
    pub kappa_list: Vec<i64>,
    pub m: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub subset_mode: SubsetMode,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

impl GridConfig {
    /// Cells in `(T, kind, zeta, alpha)` order; clean cells ignore `zeta`
    /// and appear once per `alpha`.
    pub fn experiments(&self) -> Result<Vec<ExperimentConfig>> {
        if self.t.is_empty() || self.alpha.is_empty() || self.kinds.is_empty() {
            return Err(Error::InvalidArgument("grid has an empty axis".into()));
        }
        if self.zeta.is_empty() && self.kinds.iter().any(|k| *k != Contamination::Clean) {
            return Err(Error::InvalidArgument("contaminated cells need at least one zeta".into()));
        }
        let mut out = Vec::new();
        for &t in &self.t {
            for &kind in &self.kinds {
                let zetas = if kind == Contamination::Clean { vec![0.0] } else { self.zeta.clone() };
                for &zeta in &zetas {
                    for &alpha in &self.alpha {
                        let cfg = ExperimentConfig {
                            model_kind: self.model_kind,
                            t,
                            alpha,
                            zeta,
                            kind,
                            kappa_list: self.kappa_list.clone(),
                            m: self.m,
                            base_seed: self.base_seed,
                            subset_mode: self.subset_mode,
                            burn_in: self.burn_in,
                        };
                        cfg.validate()?;
                        out.push(cfg);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Accepts either a single experiment or a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConfigDocument {
    Grid(GridConfig),
    Single(ExperimentConfig),
}

impl ConfigDocument {
    pub fn experiments(&self) -> Result<Vec<ExperimentConfig>> {
        match self {
            ConfigDocument::Grid(g) => g.experiments(),
            ConfigDocument::Single(c) => {
                c.validate()?;
                Ok(vec![c.clone()])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateResult {
    pub model_kind: ModelKind,
    pub kind: Contamination,
    pub zeta: f64,
    pub alpha: f64,
    #[serde(rename = "T")]
    pub t: usize,
    pub kappa: usize,
    pub bias: f64,
    pub rmse: f64,
    pub m: usize,
    pub m_effective: usize,
}

/// Total bias `||mean(est) - truth||_2` and `sqrt(sum_j mean((est_j - truth_j)^2))`.
pub fn bias_rmse(estimates: &[Vec<f64>], truth: &[f64]) -> Result<(f64, f64)> {
    if estimates.is_empty() {
        return Err(Error::InvalidArgument("no estimates to aggregate".into()));
    }
    let n = truth.len();
    if let Some(e) = estimates.iter().find(|e| e.len() != n) {
        return Err(Error::DimensionMismatch(format!("estimate of length {} against truth of length {n}", e.len())));
    }
    let m = estimates.len() as f64;
    let mut bias2 = 0.0;
    let mut mse = 0.0;
    for j in 0..n {
        let mut s = 0.0;
        let mut s2 = 0.0;
        for e in estimates {
            let err = e[j] - truth[j];
            s += err;
            s2 += err * err;
        }
        bias2 += (s / m).powi(2);
        mse += s2 / m;
    }
    Ok((bias2.sqrt(), mse.sqrt()))
}

/// Data of one replication: observed series and the retained set.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub seed: u64,
    pub clean: TimeSeries,
    pub observed: TimeSeries,
    pub delta: Vec<bool>,
    pub subset: IndexSet,
}

pub fn replication_seed(base_seed: u64, i: usize) -> u64 {
    base_seed ^ i as u64
}

/// Simulates, contaminates and selects the retained set for replication `i`.
/// The indicator is drawn for clean cells too, so clean and contaminated
/// cells with the same seed share both the innovations and the oracle set.
pub fn draw_replication(config: &ExperimentConfig, i: usize) -> Result<Replication> {
    let truth = config.model_kind.true_model();
    let seed = replication_seed(config.base_seed, i);
    let (clean, _) = simulate(&truth, config.t, config.burn_in, seed)?;
    let delta = make_indicator(config.t, config.alpha, seed, 0)?;
    let observed = match config.kind.outlier_kind() {
        None => clean.clone(),
        Some(kind) => {
            let spec = ContaminationSpec::constant(kind, 2, delta.clone(), config.zeta)?;
            apply(&clean, &spec, &truth)?
        }
    };
    let subset = match config.subset_mode {
        SubsetMode::Oracle => oracle_select(&delta),
        SubsetMode::HuberSkip => {
            let (p, q) = config.model_kind.orders();
            huber_skip_select(&residuals(&observed, &truth)?, config.alpha, p.max(q))?
        }
    };
    Ok(Replication { seed, clean, observed, delta, subset })
}

/// Dynamic-parameter estimates of replication `i` for each `kappa`, `None`
/// where the fit failed or did not converge.
pub fn replicate(config: &ExperimentConfig, i: usize, opts: &FitOptions) -> Result<Vec<Option<Vec<f64>>>> {
    let rep = draw_replication(config, i)?;
    let orders = config.model_kind.orders();
    Ok(config
        .kappas()
        .into_iter()
        .map(|kappa| match patch_estimator(&rep.observed, orders, &rep.subset, kappa, opts) {
            Ok(f) if f.converged => Some(f.params.dynamic_params()),
            _ => None,
        })
        .collect())
}

/// Fit options used by the harness: initialised at the truth.
pub fn harness_options(model_kind: ModelKind) -> FitOptions {
    FitOptions::new(model_kind.true_model())
}

/// Runs all replications in parallel and aggregates per `kappa` in
/// replication-index order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<AggregateResult>> {
    run_experiment_with(config, &harness_options(config.model_kind))
}

pub fn run_experiment_with(config: &ExperimentConfig, opts: &FitOptions) -> Result<Vec<AggregateResult>> {
    config.validate()?;
    let per_rep: Vec<Vec<Option<Vec<f64>>>> =
        (0..config.m).into_par_iter().map(|i| replicate(config, i, opts)).collect::<Result<_>>()?;
    let truth = config.model_kind.true_model().dynamic_params();
    let mut out = Vec::new();
    for (k, kappa) in config.kappas().into_iter().enumerate() {
        let ests: Vec<Vec<f64>> = per_rep.iter().filter_map(|r| r[k].clone()).collect();
        if ests.is_empty() {
            return Err(Error::AllReplicationsFailed(config.m));
        }
        let (bias, rmse) = bias_rmse(&ests, &truth)?;
        out.push(AggregateResult {
            model_kind: config.model_kind,
            kind: config.kind,
            zeta: config.zeta,
            alpha: config.alpha,
            t: config.t,
            kappa,
            bias,
            rmse,
            m: config.m,
            m_effective: ests.len(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

type ColKey = (usize, Contamination, usize);

fn row_key(r: &AggregateResult) -> (u64, u64) {
    (r.zeta.to_bits(), r.alpha.to_bits())
}

/// Bias and RMSE panels with rows keyed by `(zeta, alpha)` and columns by
/// `(T, kind, kappa)`. Clean cells fill every `zeta` row of their `alpha`.
/// CSV keeps full precision; markdown rounds to 4 decimals.
pub fn emit_table(results: &[AggregateResult], format: TableFormat) -> Result<String> {
    if results.is_empty() {
        return Err(Error::InvalidArgument("no results to tabulate".into()));
    }
    let mut cols: Vec<ColKey> = results.iter().map(|r| (r.t, r.kind, r.kappa)).collect();
    cols.sort();
    cols.dedup();

    let mut rows: Vec<(f64, f64)> = Vec::new();
    for r in results.iter().filter(|r| r.kind != Contamination::Clean) {
        if !rows.iter().any(|x| (x.0.to_bits(), x.1.to_bits()) == row_key(r)) {
            rows.push((r.zeta, r.alpha));
        }
    }
    if rows.is_empty() {
        for r in results {
            if !rows.iter().any(|x| x.1.to_bits() == r.alpha.to_bits()) {
                rows.push((r.zeta, r.alpha));
            }
        }
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let mut cells: BTreeMap<((u64, u64), ColKey), &AggregateResult> = BTreeMap::new();
    for r in results {
        let targets: Vec<(u64, u64)> = if r.kind == Contamination::Clean {
            rows.iter().filter(|x| x.1.to_bits() == r.alpha.to_bits()).map(|x| (x.0.to_bits(), x.1.to_bits())).collect()
        } else {
            vec![row_key(r)]
        };
        for key in targets {
            cells.insert((key, (r.t, r.kind, r.kappa)), r);
        }
    }

    let header: Vec<String> = cols.iter().map(|(t, k, kappa)| format!("T={t} {} kappa={kappa}", k.label())).collect();
    let value = |x: f64| match format {
        TableFormat::Csv => format!("{x:?}"),
        TableFormat::Markdown => format!("{x:.4}"),
    };
    let mut s = String::new();
    match format {
        TableFormat::Csv => {
            let mut wtr = csv::Writer::from_writer(Vec::new());
            let mut head = vec!["panel".to_string(), "zeta".into(), "alpha".into()];
            head.extend(header.iter().cloned());
            wtr.write_record(&head)?;
            for (panel, pick) in [("bias", 0), ("rmse", 1)] {
                for &(zeta, alpha) in &rows {
                    let mut rec = vec![panel.to_string(), format!("{zeta:?}"), format!("{alpha:?}")];
                    for c in &cols {
                        rec.push(match cells.get(&((zeta.to_bits(), alpha.to_bits()), *c)) {
                            Some(r) => value(if pick == 0 { r.bias } else { r.rmse }),
                            None => String::new(),
                        });
                    }
                    wtr.write_record(&rec)?;
                }
            }
            s = String::from_utf8(wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?)
                .expect("csv output is utf-8");
        }
        TableFormat::Markdown => {
            for (title, pick) in [("Bias", 0), ("RMSE", 1)] {
                writeln!(s, "### {title}\n").unwrap();
                writeln!(s, "| zeta | alpha | {} |", header.join(" | ")).unwrap();
                writeln!(s, "|---:|---:|{}", "---:|".repeat(cols.len())).unwrap();
                for &(zeta, alpha) in &rows {
                    let vals: Vec<String> = cols
                        .iter()
                        .map(|c| match cells.get(&((zeta.to_bits(), alpha.to_bits()), *c)) {
                            Some(r) => value(if pick == 0 { r.bias } else { r.rmse }),
                            None => String::new(),
                        })
                        .collect();
                    writeln!(s, "| {zeta} | {:.0}% | {} |", alpha * 100.0, vals.join(" | ")).unwrap();
                }
                s.push('\n');
            }
        }
    }
    Ok(s)
}

/// One line per result with full precision, convenient for plotting.
pub fn write_cells_csv<W: std::io::Write>(results: &[AggregateResult], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["model", "kind", "zeta", "alpha", "T", "kappa", "bias", "rmse", "m", "m_effective"])?;
    for r in results {
        wtr.write_record([
            r.model_kind.label().to_string(),
            r.kind.label().to_string(),
            format!("{:?}", r.zeta),
            format!("{:?}", r.alpha),
            r.t.to_string(),
            r.kappa.to_string(),
            format!("{:?}", r.bias),
            format!("{:?}", r.rmse),
            r.m.to_string(),
            r.m_effective.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bias_rmse_examples() {
        assert_eq!(bias_rmse(&vec![vec![0.7, 0.1]; 3], &[0.7, 0.1]).unwrap(), (0.0, 0.0));
        let (b, r) = bias_rmse(&[vec![0.6], vec![0.8]], &[0.7]).unwrap();
        assert!(b.abs() < 1e-15);
        assert!((r - 0.1).abs() < 1e-15);
        assert_eq!(bias_rmse(&[vec![1.0], vec![1.0]], &[0.0]).unwrap(), (1.0, 1.0));
        assert!(bias_rmse(&[vec![1.0, 2.0]], &[0.0]).is_err());
        assert!(bias_rmse(&[], &[0.0]).is_err());
    }

    #[test]
    fn design_models() {
        assert_eq!(ModelKind::Var1.true_model().dynamic_params(), vec![0.7, 0.0, 0.3, 0.7]);
        assert_eq!(ModelKind::Varma11.true_model().n_dynamic_params(), 8);
        assert_eq!(ModelKind::Vma1.orders(), (0, 1));
    }

    fn config(kind: Contamination) -> ExperimentConfig {
        ExperimentConfig {
            model_kind: ModelKind::Var1,
            t: 200,
            alpha: 0.1,
            zeta: 10.0,
            kind,
            kappa_list: vec![0, 1],
            m: 3,
            base_seed: 9,
            subset_mode: SubsetMode::Oracle,
            burn_in: 100,
        }
    }

    #[test]
    fn config_validation() {
        let mut c = config(Contamination::Ao);
        assert!(c.validate().is_ok());
        c.kappa_list = vec![1, -1];
        assert!(c.validate().is_err());
        c.kappa_list = vec![];
        assert!(c.validate().is_err());
        let mut c = config(Contamination::Ao);
        c.alpha = 0.5;
        assert!(c.validate().is_err());
        c.alpha = 0.1;
        c.m = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn clean_and_ao_share_draws() {
        let a = draw_replication(&config(Contamination::Clean), 1).unwrap();
        let b = draw_replication(&config(Contamination::Ao), 1).unwrap();
        assert_eq!(a.clean, b.clean);
        assert_eq!(a.delta, b.delta);
        assert_eq!(a.subset, b.subset);
        assert_eq!(a.subset.len(), 180);
    }

    #[test]
    fn experiment_is_reproducible() {
        let c = config(Contamination::Ao);
        let a = run_experiment(&c).unwrap();
        let b = run_experiment(&c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert!(a[0].bias > a[1].bias);
    }

    #[test]
    fn single_cell_table_has_one_row_per_panel() {
        let r = AggregateResult {
            model_kind: ModelKind::Var1,
            kind: Contamination::Ao,
            zeta: 50.0,
            alpha: 0.1,
            t: 500,
            kappa: 1,
            bias: 0.00751234,
            rmse: 0.05,
            m: 1,
            m_effective: 1,
        };
        let csv = emit_table(&[r.clone()], TableFormat::Csv).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.contains("0.00751234"));
        let md = emit_table(&[r], TableFormat::Markdown).unwrap();
        assert!(md.contains("| 50 | 10% | 0.0075 |"));
        assert!(emit_table(&[], TableFormat::Csv).is_err());
    }

    #[test]
    fn grid_expansion() {
        let g = GridConfig {
            model_kind: ModelKind::Var1,
            t: vec![500, 1000],
            alpha: vec![0.01, 0.05, 0.1],
            zeta: vec![5.0, 10.0, 25.0, 50.0],
            kinds: vec![Contamination::Clean, Contamination::Ao],
            kappa_list: vec![0, 1],
            m: 2,
            base_seed: 1,
            subset_mode: SubsetMode::Oracle,
            burn_in: 500,
        };
        assert_eq!(g.experiments().unwrap().len(), 2 * (3 + 12));
    }
}
