//! Residual-based subsample estimation.
//!
//! The estimation criterion is `log det( |H|^-1 sum_{t in H} e_t e_t' )`,
//! minimised over the dynamic coefficients by a penalised Nelder-Mead search.
//! [`patch_estimator`] evaluates the same estimator on the patch-removed set
//! and [`iterate_patch_removal`] alternates Huber-skip screening with patch
//! removal until the screened set stops changing.

pub mod simplex;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lagpoly::{check_causal_invertible, DEFAULT_MARGIN};
use crate::linalg;
use crate::process::{filter_residuals_into, residuals, FilterCoeffs, ResidualSeries, TimeSeries, VarmaModel};
use crate::subsample::{huber_skip_select, patch_remove, patch_remove_after_warmup, IndexSet};

use simplex::{minimize, SimplexOptions};

/// Default cap on outer iterations of [`iterate_patch_removal`].
pub const DEFAULT_MAX_OUTER: usize = 50;

/// How the series is centred before filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Series is taken to have mean zero.
    #[default]
    None,
    /// Subtract the sample mean over the retained set of each fit.
    SubsetMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Starting point; its orders must match the fitted orders.
    pub init: VarmaModel,
    pub max_iter: usize,
    pub criterion_tol: f64,
    pub param_tol: f64,
    pub stability_margin: f64,
    pub penalty_scale: f64,
    pub initial_step: f64,
    pub restarts: usize,
    pub centering: Centering,
    /// Residuals `1..=warmup` are never screened; `None` means `max(p, q)`.
    pub warmup: Option<usize>,
    pub record_trace: bool,
}

impl FitOptions {
    pub fn new(init: VarmaModel) -> Self {
        let nm = SimplexOptions::default();
        Self {
            init,
            max_iter: nm.max_iter,
            criterion_tol: nm.f_tol,
            param_tol: nm.x_tol,
            stability_margin: DEFAULT_MARGIN,
            penalty_scale: 1e4,
            initial_step: nm.initial_step,
            restarts: nm.restarts,
            centering: Centering::None,
            warmup: None,
            record_trace: false,
        }
    }

    /// White-noise start for orders `(p, q)`.
    pub fn white_noise_start(d: usize, p: usize, q: usize) -> Self {
        Self::new(VarmaModel::white_noise(d, p, q))
    }

    pub fn with_centering(mut self, centering: Centering) -> Self {
        self.centering = centering;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.criterion_tol > 0.0 && self.param_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if !(self.stability_margin > 0.0 && self.stability_margin < 1.0) {
            return Err(Error::InvalidArgument("stability margin must lie in (0, 1)".into()));
        }
        if !(self.penalty_scale >= 0.0) {
            return Err(Error::InvalidArgument("penalty scale must be non-negative".into()));
        }
        Ok(())
    }

    fn warmup_for(&self, p: usize, q: usize) -> usize {
        self.warmup.unwrap_or(p.max(q))
    }

    fn simplex(&self) -> SimplexOptions {
        SimplexOptions {
            max_iter: self.max_iter,
            f_tol: self.criterion_tol,
            x_tol: self.param_tol,
            initial_step: self.initial_step,
            restarts: self.restarts,
            record_trace: self.record_trace,
        }
    }
}

fn serialize_index_set<S: Serializer>(h: &IndexSet, s: S) -> std::result::Result<S::Ok, S::Error> {
    h.members().serialize(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    /// Estimated coefficients; `sigma` holds the residual moment matrix over `h_used`.
    pub params: VarmaModel,
    #[serde(serialize_with = "serialize_index_set")]
    pub h_used: IndexSet,
    /// Criterion value (without stability penalty) at `params`.
    pub criterion_value: f64,
    pub converged: bool,
    pub n_criterion_evals: usize,
    pub iterations: usize,
    /// Centre subtracted before filtering, if any.
    pub center: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<(usize, f64)>>,
}

impl FitResult {
    /// The input series with this fit's centre removed.
    pub fn centered(&self, series: &TimeSeries) -> TimeSeries {
        center_series(series, self.center.as_deref())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    FixedPoint,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceStep {
    pub iteration: usize,
    /// Screened set `H_m` before patch removal.
    #[serde(serialize_with = "serialize_index_set")]
    pub retained: IndexSet,
    pub params: VarmaModel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationTrace {
    pub steps: Vec<TraceStep>,
    pub terminated_by: Termination,
}

impl IterationTrace {
    /// Last screened set; its complement inside the screening window are the flagged outliers.
    pub fn final_selection(&self) -> &IndexSet {
        &self.steps.last().expect("trace has at least the initial step").retained
    }

    pub fn outer_iterations(&self) -> usize {
        self.steps.len() - 1
    }
}

fn center_series(series: &TimeSeries, center: Option<&[f64]>) -> TimeSeries {
    match center {
        None => series.clone(),
        Some(c) => {
            let d = series.dim();
            let values = series
                .values()
                .iter()
                .enumerate()
                .map(|(i, v)| v - c[i % d])
                .collect();
            TimeSeries::from_parts_unchecked(d, values, series.origin())
        }
    }
}

fn subset_mean(series: &TimeSeries, h: &IndexSet) -> Vec<f64> {
    let d = series.dim();
    let mut m = vec![0.0; d];
    for t in h.iter() {
        for (acc, v) in m.iter_mut().zip(series.at(t)) {
            *acc += v;
        }
    }
    m.iter_mut().for_each(|v| *v /= h.len() as f64);
    m
}

/// `|H|^-1 sum_{t in H} e_t e_t'`, row-major.
fn moment_matrix(values: &[f64], d: usize, h: &IndexSet) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for t in h.iter() {
        let e = &values[(t - 1) * d..t * d];
        for r in 0..d {
            for c in r..d {
                m[r * d + c] += e[r] * e[c];
            }
        }
    }
    let n = h.len() as f64;
    for r in 0..d {
        for c in r..d {
            m[r * d + c] /= n;
            m[c * d + r] = m[r * d + c];
        }
    }
    m
}

fn check_set(h: &IndexSet, len: usize, d: usize) -> Result<()> {
    if h.ambient() != len {
        return Err(Error::DimensionMismatch(format!(
            "index set over 1..={} used with series of length {len}",
            h.ambient()
        )));
    }
    if h.len() <= d {
        return Err(Error::SampleTooSmall { retained: h.len(), required: d });
    }
    Ok(())
}

/// `log det` of the uncentred residual second-moment matrix over `H`.
pub fn criterion(residuals: &ResidualSeries, h: &IndexSet) -> Result<f64> {
    let d = residuals.dim();
    check_set(h, residuals.len(), 0)?;
    linalg::log_det_spd(&moment_matrix(residuals.values(), d, h), d).ok_or(Error::DegenerateCriterion)
}

/// Gaussian log-likelihood with the plug-in covariance `Sigma_hat` (the
/// moment matrix over `H`): `-(|H|/2)(d log 2 pi + log det Sigma_hat + d)`.
pub fn gaussian_loglik(residuals: &ResidualSeries, h: &IndexSet) -> Result<(f64, DMatrix<f64>)> {
    let d = residuals.dim();
    check_set(h, residuals.len(), d)?;
    let m = moment_matrix(residuals.values(), d, h);
    let ld = linalg::log_det_spd(&m, d).ok_or(Error::SingularCovariance)?;
    let n = h.len() as f64;
    let df = d as f64;
    let ll = -0.5 * n * (df * (2.0 * std::f64::consts::PI).ln() + ld + df);
    Ok((ll, DMatrix::from_row_slice(d, d, &m)))
}

/// Per-observation AIC, `(-2 loglik + 2k) / n_eff`.
pub fn aic_avg(loglik: f64, k: usize, n_eff: usize) -> f64 {
    debug_assert!(n_eff >= 1);
    (-2.0 * loglik + 2.0 * k as f64) / n_eff as f64
}

/// `d^2 (p + q)` dynamic coefficients, `d (d + 1) / 2` covariance entries and
/// `d` means when the fit is centred.
pub fn aic_param_count(d: usize, p: usize, q: usize, centering: Centering) -> usize {
    let means = if centering == Centering::SubsetMean { d } else { 0 };
    d * d * (p + q) + d * (d + 1) / 2 + means
}

/// Largest root modulus of `I - sum C_i z^i` for flat row-major blocks.
fn flat_radius(blocks: &[f64], d: usize, negate: bool) -> f64 {
    if blocks.is_empty() {
        return 0.0;
    }
    let mats: Vec<DMatrix<f64>> = blocks
        .chunks(d * d)
        .map(|c| {
            let m = DMatrix::from_row_slice(d, d, c);
            if negate {
                -m
            } else {
                m
            }
        })
        .collect();
    linalg::companion_radius(&mats, d)
}

/// Minimises the criterion over `(Phi, Theta)` on the retained set `H`.
pub fn fit(series: &TimeSeries, orders: (usize, usize), h: &IndexSet, opts: &FitOptions) -> Result<FitResult> {
    opts.validate()?;
    let (p, q) = orders;
    let d = series.dim();
    if opts.init.dim() != d || opts.init.p() != p || opts.init.q() != q {
        return Err(Error::DimensionMismatch(format!(
            "initial model is VARMA({},{}) of dimension {}, fitting VARMA({p},{q}) of dimension {d}",
            opts.init.p(),
            opts.init.q(),
            opts.init.dim()
        )));
    }
    if h.ambient() != series.len() {
        return Err(Error::DimensionMismatch(format!(
            "index set over 1..={} used with series of length {}",
            h.ambient(),
            series.len()
        )));
    }
    let required = d * d * (p + q) + d;
    if h.len() <= required {
        return Err(Error::SampleTooSmall { retained: h.len(), required });
    }

    let center = match opts.centering {
        Centering::None => None,
        Centering::SubsetMean => Some(subset_mean(series, h)),
    };
    let x = center_series(series, center.as_deref());
    let x = x.values();
    let mut buf = vec![0.0; x.len()];

    let raw_criterion = |theta: &[f64], buf: &mut [f64]| -> Option<f64> {
        let coeffs = FilterCoeffs::from_params(d, p, q, theta);
        filter_residuals_into(x, &coeffs, buf);
        linalg::log_det_spd(&moment_matrix(buf, d, h), d)
    };

    let x0 = opts.init.dynamic_params();
    if raw_criterion(&x0, &mut buf).is_none() {
        return Err(Error::DegenerateCriterion);
    }

    let limit = 1.0 - opts.stability_margin;
    let split = d * d * p;
    let objective = |theta: &[f64]| -> f64 {
        let Some(c) = raw_criterion(theta, &mut buf) else {
            return f64::INFINITY;
        };
        let ar = flat_radius(&theta[..split], d, false);
        let ma = flat_radius(&theta[split..], d, true);
        let excess = (ar - limit).max(0.0).powi(2) + (ma - limit).max(0.0).powi(2);
        c + opts.penalty_scale * excess
    };
    let out = minimize(objective, &x0, &opts.simplex());

    let mut buf = vec![0.0; x.len()];
    let value = raw_criterion(&out.x, &mut buf);
    let moment = moment_matrix(&buf, d, h);
    let params = opts
        .init
        .with_dynamic_params(&out.x)?
        .with_sigma(DMatrix::from_row_slice(d, d, &moment))?;
    let stable = check_causal_invertible(&params, opts.stability_margin)
        .map(|r| r.causal && r.invertible)
        .unwrap_or(false);
    let criterion_value = value.unwrap_or(f64::INFINITY);
    Ok(FitResult {
        params,
        h_used: h.clone(),
        criterion_value,
        converged: out.converged && stable && criterion_value.is_finite(),
        n_criterion_evals: out.evaluations + 2,
        iterations: out.iterations,
        center,
        trace: opts.record_trace.then_some(out.trace),
    })
}

/// The patch-removal estimator: `fit` evaluated on `S^kappa H`.
pub fn patch_estimator(
    series: &TimeSeries,
    orders: (usize, usize),
    h: &IndexSet,
    kappa: usize,
    opts: &FitOptions,
) -> Result<FitResult> {
    fit(series, orders, &patch_remove(h, kappa), opts)
}

/// Iterative feasible patch removal.
///
/// `H_0` is the Huber-skip screen of the residuals at `opts.init` and the
/// starting estimate is the fit on `H_0`. Each outer step screens the
/// residuals of the current estimate into `H_{m+1}` and refits on the
/// patch-removed `S^kappa H_{m+1}`; the loop stops as soon as
/// `H_{m+1} == H_m`. Every fit starts from `opts.init`, so an estimate is a
/// function of its retained set only.
pub fn iterate_patch_removal(
    series: &TimeSeries,
    orders: (usize, usize),
    alpha: f64,
    kappa: usize,
    opts: &FitOptions,
    max_outer: usize,
) -> Result<(FitResult, IterationTrace)> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside [0, 0.5)")));
    }
    if max_outer == 0 {
        return Err(Error::InvalidArgument("max_outer must be at least 1".into()));
    }
    let (p, q) = orders;
    let d = series.dim();
    let warmup = opts.warmup_for(p, q);
    let required = d * d * (p + q) + d;

    let screen = |params: &VarmaModel, center: Option<&[f64]>| -> Result<IndexSet> {
        let res = residuals(&center_series(series, center), params)?;
        huber_skip_select(&res, alpha, warmup)
    };
    let initial_center = match opts.centering {
        Centering::None => None,
        Centering::SubsetMean => Some(subset_mean(series, &IndexSet::full(series.len()))),
    };
    let mut selected = screen(&opts.init, initial_center.as_deref())?;
    if selected.len() <= required {
        return Err(Error::SelectionCollapse { retained: selected.len(), required });
    }
    let mut current = fit(series, orders, &selected, opts)?;
    let mut steps = vec![TraceStep { iteration: 0, retained: selected.clone(), params: current.params.clone() }];

    for m in 0..max_outer {
        let next = screen(&current.params, current.center.as_deref())?;
        let patched = patch_remove_after_warmup(&next, kappa, warmup);
        if patched.len() <= required {
            return Err(Error::SelectionCollapse { retained: patched.len(), required });
        }
        current = fit(series, orders, &patched, opts)?;
        steps.push(TraceStep { iteration: m + 1, retained: next.clone(), params: current.params.clone() });
        if next == selected {
            return Ok((current, IterationTrace { steps, terminated_by: Termination::FixedPoint }));
        }
        selected = next;
    }
    Ok((current, IterationTrace { steps, terminated_by: Termination::MaxIterations }))
}

/// One row of a model-comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionRow {
    pub p: usize,
    pub q: usize,
    /// `|S^kappa H|` of the final iterate.
    pub n_eff: usize,
    pub aic_avg_patch: f64,
    pub aic_avg_full: f64,
    /// Final patch fit converged and the screen reached a fixed point.
    pub converged: bool,
    pub full_converged: bool,
    pub outer_iterations: usize,
    pub error: Option<String>,
}

impl SelectionRow {
    fn failed(p: usize, q: usize, msg: String) -> Self {
        Self {
            p,
            q,
            n_eff: 0,
            aic_avg_patch: f64::NAN,
            aic_avg_full: f64::NAN,
            converged: false,
            full_converged: false,
            outer_iterations: 0,
            error: Some(msg),
        }
    }
}

fn select_row(
    series: &TimeSeries,
    (p, q): (usize, usize),
    alpha: f64,
    kappa: usize,
    template: &FitOptions,
) -> SelectionRow {
    let d = series.dim();
    let opts = FitOptions { init: VarmaModel::white_noise(d, p, q), ..template.clone() };
    let k = aic_param_count(d, p, q, opts.centering);
    let warmup = opts.warmup_for(p, q);

    let patch = iterate_patch_removal(series, (p, q), alpha, kappa, &opts, DEFAULT_MAX_OUTER).and_then(
        |(fit_res, trace)| {
            let res = residuals(&fit_res.centered(series), &fit_res.params)?;
            let (ll, _) = gaussian_loglik(&res, &fit_res.h_used)?;
            Ok((fit_res, trace, ll))
        },
    );
    let (fit_res, trace, ll) = match patch {
        Ok(v) => v,
        Err(e) => return SelectionRow::failed(p, q, e.to_string()),
    };
    let n_eff = fit_res.h_used.len();
    let mut row = SelectionRow {
        p,
        q,
        n_eff,
        aic_avg_patch: aic_avg(ll, k, n_eff),
        aic_avg_full: f64::NAN,
        converged: fit_res.converged && trace.terminated_by == Termination::FixedPoint,
        full_converged: false,
        outer_iterations: trace.outer_iterations(),
        error: None,
    };

    let full_set = IndexSet::after(series.len(), warmup);
    let full = fit(series, (p, q), &full_set, &opts).and_then(|f| {
        let res = residuals(&f.centered(series), &f.params)?;
        Ok((f.converged, gaussian_loglik(&res, &full_set)?.0))
    });
    match full {
        Ok((conv, ll_full)) => {
            row.full_converged = conv;
            row.aic_avg_full = aic_avg(ll_full, k, full_set.len());
        }
        Err(e) => row.error = Some(format!("full-sample fit: {e}")),
    }
    row
}

/// Runs the iterative procedure and a full-sample fit for every `(p, q)`
/// in `grid`, in grid order. Failing rows are reported, not dropped.
///
/// Unless `opts.warmup` is set, every row uses the same warm-up, the
/// largest `max(p, q)` in the grid, so all rows are scored on a common
/// time window.
pub fn select_model(
    series: &TimeSeries,
    grid: &[(usize, usize)],
    alpha: f64,
    kappa: usize,
    opts: &FitOptions,
) -> Result<Vec<SelectionRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("model grid is empty".into()));
    }
    opts.validate()?;
    let common = grid.iter().map(|&(p, q)| p.max(q)).max().unwrap_or(0);
    let opts = FitOptions { warmup: Some(opts.warmup.unwrap_or(common)), ..opts.clone() };
    Ok(grid.par_iter().map(|&o| select_row(series, o, alpha, kappa, &opts)).collect())
}

/// Writes the five comparison columns `p,q,n_eff,aic_avg_patch,aic_avg_full`.
pub fn write_selection_csv<W: std::io::Write>(rows: &[SelectionRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["p", "q", "n_eff", "aic_avg_patch", "aic_avg_full"])?;
    for r in rows {
        wtr.write_record([
            r.p.to_string(),
            r.q.to_string(),
            r.n_eff.to_string(),
            format!("{:?}", r.aic_avg_patch),
            format!("{:?}", r.aic_avg_full),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Row index with the smallest finite patch AIC.
pub fn best_row(rows: &[SelectionRow]) -> Option<usize> {
    rows.iter()
        .enumerate()
        .filter(|(_, r)| r.aic_avg_patch.is_finite())
        .min_by(|a, b| a.1.aic_avg_patch.total_cmp(&b.1.aic_avg_patch))
        .map(|(i, _)| i)
}

/// Residuals of `series` at a fit, centred as the fit was.
pub fn fitted_residuals(series: &TimeSeries, fit_res: &FitResult) -> Result<ResidualSeries> {
    residuals(&fit_res.centered(series), &fit_res.params)
}

/// Criterion at an arbitrary candidate without the stability penalty.
pub fn criterion_at(series: &TimeSeries, candidate: &VarmaModel, h: &IndexSet) -> Result<f64> {
    criterion(&residuals(series, candidate)?, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::simulate;

    #[test]
    fn criterion_examples() {
        let wn = VarmaModel::white_noise(1, 0, 0);
        let r = ResidualSeries::from_values(1, vec![1.0, -1.0], wn.clone()).unwrap();
        assert_eq!(criterion(&r, &IndexSet::full(2)).unwrap(), 0.0);
        let z = ResidualSeries::from_values(1, vec![0.0; 3], wn).unwrap();
        assert!(matches!(criterion(&z, &IndexSet::full(3)), Err(Error::DegenerateCriterion)));
        let wn2 = VarmaModel::white_noise(2, 0, 0);
        let r2 = ResidualSeries::from_values(2, vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0], wn2).unwrap();
        let h = IndexSet::new(3, vec![1, 2]).unwrap();
        // moment = I / 2, determinant oracle 1/4
        let oracle = (0.5_f64 * 0.5 - 0.0).ln();
        let got = criterion(&r2, &h).unwrap();
        assert!((got - oracle).abs() < 1e-15);
        assert!((got - 2.0 * 0.5_f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn loglik_examples() {
        let wn = VarmaModel::white_noise(1, 0, 0);
        let r = ResidualSeries::from_values(1, vec![1.0, -1.0], wn).unwrap();
        let (ll, s) = gaussian_loglik(&r, &IndexSet::full(2)).unwrap();
        assert_eq!(s[(0, 0)], 1.0);
        assert!((ll + ((2.0 * std::f64::consts::PI).ln() + 1.0)).abs() < 1e-12);
        assert!((ll + 2.8378770664093453).abs() < 1e-12);

        let wn2 = VarmaModel::white_noise(2, 0, 0);
        let r2 = std::f64::consts::SQRT_2;
        let r2 = ResidualSeries::from_values(2, vec![r2, 0.0, 0.0, r2, -r2, 0.0, 0.0, -r2], wn2).unwrap();
        let (ll2, _) = gaussian_loglik(&r2, &IndexSet::full(4)).unwrap();
        assert!((ll2 + 4.0 * ((2.0 * std::f64::consts::PI).ln() + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn loglik_scale_identity() {
        let wn = VarmaModel::white_noise(1, 0, 0);
        let v = vec![0.3, -1.2, 0.8, 2.0, -0.4];
        let c = 3.0;
        let a = ResidualSeries::from_values(1, v.clone(), wn.clone()).unwrap();
        let b = ResidualSeries::from_values(1, v.iter().map(|x| c * x).collect(), wn).unwrap();
        let h = IndexSet::full(5);
        let (la, _) = gaussian_loglik(&a, &h).unwrap();
        let (lb, _) = gaussian_loglik(&b, &h).unwrap();
        assert!((lb - (la - 5.0 / 2.0 * (c * c).ln())).abs() < 1e-12);
    }

    #[test]
    fn aic_examples() {
        assert!((aic_avg(-100.0, 4, 50) - 4.16).abs() < 1e-12);
        assert_eq!(aic_avg(0.0, 0, 10), 0.0);
        assert_eq!(aic_param_count(2, 2, 0, Centering::SubsetMean), 8 + 3 + 2);
    }

    #[test]
    fn zero_series_is_degenerate() {
        let x = TimeSeries::zeros(50, 1);
        let opts = FitOptions::white_noise_start(1, 1, 0);
        assert!(matches!(
            fit(&x, (1, 0), &IndexSet::full(50), &opts),
            Err(Error::DegenerateCriterion)
        ));
    }

    #[test]
    fn tiny_set_rejected() {
        let m = VarmaModel::scalar(&[0.5], &[], 1.0).unwrap();
        let (x, _) = simulate(&m, 10, 10, 1).unwrap();
        let opts = FitOptions::new(m);
        let h = IndexSet::new(10, vec![1, 2]).unwrap();
        assert!(matches!(fit(&x, (1, 0), &h, &opts), Err(Error::SampleTooSmall { .. })));
    }

    #[test]
    fn init_orders_must_match() {
        let m = VarmaModel::scalar(&[0.5], &[], 1.0).unwrap();
        let (x, _) = simulate(&m, 100, 10, 1).unwrap();
        let opts = FitOptions::white_noise_start(1, 2, 0);
        assert!(matches!(
            fit(&x, (1, 0), &IndexSet::full(100), &opts),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn kappa_zero_and_full_set_match_fit() {
        let m = VarmaModel::scalar(&[0.6], &[0.3], 1.0).unwrap();
        let (x, _) = simulate(&m, 300, 100, 11).unwrap();
        let opts = FitOptions::new(m);
        let h = IndexSet::new(300, (1..=300).filter(|t| t % 17 != 0).collect()).unwrap();
        assert_eq!(patch_estimator(&x, (1, 1), &h, 0, &opts).unwrap(), fit(&x, (1, 1), &h, &opts).unwrap());
        let full = IndexSet::full(300);
        assert_eq!(
            patch_estimator(&x, (1, 1), &full, 4, &opts).unwrap(),
            fit(&x, (1, 1), &full, &opts).unwrap()
        );
    }

    #[test]
    fn alpha_zero_is_one_outer_step() {
        let m = VarmaModel::scalar(&[0.5], &[], 1.0).unwrap();
        let (x, _) = simulate(&m, 200, 100, 5).unwrap();
        let opts = FitOptions::new(m);
        let (res, trace) = iterate_patch_removal(&x, (1, 0), 0.0, 2, &opts, 10).unwrap();
        assert_eq!(trace.terminated_by, Termination::FixedPoint);
        assert_eq!(trace.outer_iterations(), 1);
        let direct = fit(&x, (1, 0), &IndexSet::after(200, 1), &opts).unwrap();
        assert_eq!(res, direct);
    }

    #[test]
    fn selection_grid_empty_is_error() {
        let x = TimeSeries::zeros(10, 1);
        let opts = FitOptions::white_noise_start(1, 0, 0);
        assert!(select_model(&x, &[], 0.1, 1, &opts).is_err());
    }

    #[test]
    fn radius_helper_matches_lagpoly() {
        let m = VarmaModel::scalar(&[0.5, 0.3], &[0.4, -0.2], 1.0).unwrap();
        let v = m.dynamic_params();
        assert!((flat_radius(&v[..2], 1, false) - crate::lagpoly::ar_root_modulus(&m)).abs() < 1e-14);
        assert!((flat_radius(&v[2..], 1, true) - crate::lagpoly::ma_root_modulus(&m)).abs() < 1e-14);
    }
}
