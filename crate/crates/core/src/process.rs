//! VARMA models, seeded simulation and the conditional residual filter.
//!
//! Time indices are 1-based in the public vocabulary (`t = 1..=T`) to match
//! [`IndexSet`](crate::subsample::IndexSet); storage is row-major with row
//! `t - 1` holding `x_t`.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagpoly::{LagPolynomial, PolySide};

/// Default number of discarded start-up steps in [`simulate`].
pub const DEFAULT_BURN_IN: usize = 500;

/// `phi(L) x_t = theta(L) eps_t` with `phi(L) = I - sum Phi_i L^i`,
/// `theta(L) = I + sum Theta_j L^j` and `eps_t ~ N(0, Sigma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarmaModel {
    d: usize,
    ar: Vec<DMatrix<f64>>,
    ma: Vec<DMatrix<f64>>,
    sigma: DMatrix<f64>,
}

impl VarmaModel {
    pub fn new(ar: Vec<DMatrix<f64>>, ma: Vec<DMatrix<f64>>, sigma: DMatrix<f64>) -> Result<Self> {
        let d = sigma.nrows();
        if d == 0 || sigma.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "Sigma must be square and non-empty, got {}x{}",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        for (name, mats) in [("Phi", &ar), ("Theta", &ma)] {
            for (i, m) in mats.iter().enumerate() {
                if m.nrows() != d || m.ncols() != d {
                    return Err(Error::DimensionMismatch(format!(
                        "{name}_{} is {}x{}, expected {d}x{d}",
                        i + 1,
                        m.nrows(),
                        m.ncols()
                    )));
                }
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "{name}_{} has non-finite entries",
                        i + 1
                    )));
                }
            }
        }
        if sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("Sigma has non-finite entries".into()));
        }
        let scale = sigma.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
        if (&sigma - sigma.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidArgument("Sigma is not symmetric".into()));
        }
        Ok(Self { d, ar, ma, sigma })
    }

    /// Model with explicit orders; fails when the coefficient lists disagree
    /// with `(p, q)`.
    pub fn with_orders(
        p: usize,
        q: usize,
        ar: Vec<DMatrix<f64>>,
        ma: Vec<DMatrix<f64>>,
        sigma: DMatrix<f64>,
    ) -> Result<Self> {
        if ar.len() != p || ma.len() != q {
            return Err(Error::DimensionMismatch(format!(
                "orders ({p},{q}) but {} AR and {} MA matrices given",
                ar.len(),
                ma.len()
            )));
        }
        Self::new(ar, ma, sigma)
    }

    /// Scalar ARMA model.
    pub fn scalar(ar: &[f64], ma: &[f64], variance: f64) -> Result<Self> {
        let m = |v: f64| DMatrix::from_element(1, 1, v);
        Self::new(
            ar.iter().copied().map(m).collect(),
            ma.iter().copied().map(m).collect(),
            m(variance),
        )
    }

    /// All coefficient matrices zero, identity innovation covariance.
    pub fn white_noise(d: usize, p: usize, q: usize) -> Self {
        Self {
            d,
            ar: vec![DMatrix::zeros(d, d); p],
            ma: vec![DMatrix::zeros(d, d); q],
            sigma: DMatrix::identity(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> usize {
        self.ar.len()
    }

    pub fn q(&self) -> usize {
        self.ma.len()
    }

    pub fn ar(&self) -> &[DMatrix<f64>] {
        &self.ar
    }

    pub fn ma(&self) -> &[DMatrix<f64>] {
        &self.ma
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn with_sigma(mut self, sigma: DMatrix<f64>) -> Result<Self> {
        if sigma.nrows() != self.d || sigma.ncols() != self.d {
            return Err(Error::DimensionMismatch("Sigma dimension".into()));
        }
        self.sigma = sigma;
        Self::new(self.ar, self.ma, self.sigma)
    }

    pub fn ar_polynomial(&self) -> LagPolynomial {
        LagPolynomial::new(PolySide::Ar, self.d, self.ar.clone())
            .expect("validated at construction")
    }

    pub fn ma_polynomial(&self) -> LagPolynomial {
        LagPolynomial::new(PolySide::Ma, self.d, self.ma.clone())
            .expect("validated at construction")
    }

    /// Number of free dynamic coefficients, `d^2 (p + q)`.
    pub fn n_dynamic_params(&self) -> usize {
        self.d * self.d * (self.p() + self.q())
    }

    /// `Phi_1..Phi_p, Theta_1..Theta_q`, each matrix row-major.
    pub fn dynamic_params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_dynamic_params());
        for m in self.ar.iter().chain(self.ma.iter()) {
            for r in 0..self.d {
                for c in 0..self.d {
                    v.push(m[(r, c)]);
                }
            }
        }
        v
    }

    /// Same orders and covariance, coefficients replaced from a vector laid
    /// out as in [`dynamic_params`](Self::dynamic_params).
    pub fn with_dynamic_params(&self, params: &[f64]) -> Result<Self> {
        if params.len() != self.n_dynamic_params() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} dynamic parameters, got {}",
                self.n_dynamic_params(),
                params.len()
            )));
        }
        let dd = self.d * self.d;
        let mut chunks = params.chunks(dd).map(|c| DMatrix::from_row_slice(self.d, self.d, c));
        let ar = (0..self.p()).map(|_| chunks.next().unwrap()).collect();
        let ma = (0..self.q()).map(|_| chunks.next().unwrap()).collect();
        Self::new(ar, ma, self.sigma.clone())
    }

    pub(crate) fn filter_coeffs(&self) -> FilterCoeffs {
        FilterCoeffs::from_params(self.d, self.p(), self.q(), &self.dynamic_params())
    }
}

/// Row-major coefficient blocks used by the hot filtering loops.
#[derive(Debug, Clone)]
pub(crate) struct FilterCoeffs {
    pub d: usize,
    pub p: usize,
    pub q: usize,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
}

impl FilterCoeffs {
    pub fn from_params(d: usize, p: usize, q: usize, params: &[f64]) -> Self {
        let split = d * d * p;
        Self {
            d,
            p,
            q,
            ar: params[..split].to_vec(),
            ma: params[split..].to_vec(),
        }
    }
}

/// `out_t = x_t - sum Phi_i x_{t-i} - sum Theta_j out_{t-j}` with zero
/// presample values.
pub(crate) fn filter_residuals_into(x: &[f64], c: &FilterCoeffs, out: &mut [f64]) {
    let d = c.d;
    let n = x.len() / d;
    debug_assert_eq!(out.len(), x.len());
    for t in 0..n {
        let (done, rest) = out.split_at_mut(t * d);
        let row = &mut rest[..d];
        row.copy_from_slice(&x[t * d..(t + 1) * d]);
        for i in 1..=c.p.min(t) {
            let m = &c.ar[(i - 1) * d * d..i * d * d];
            let lag = &x[(t - i) * d..(t - i + 1) * d];
            for r in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += m[r * d + k] * lag[k];
                }
                row[r] -= acc;
            }
        }
        for j in 1..=c.q.min(t) {
            let m = &c.ma[(j - 1) * d * d..j * d * d];
            let lag = &done[(t - j) * d..(t - j + 1) * d];
            for r in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += m[r * d + k] * lag[k];
                }
                row[r] -= acc;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesOrigin {
    Clean,
    Contaminated,
    Empirical,
}

/// `T x d` observations, row `t - 1` holding time index `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    d: usize,
    values: Vec<f64>,
    origin: SeriesOrigin,
}

impl TimeSeries {
    pub fn new(d: usize, values: Vec<f64>, origin: SeriesOrigin) -> Result<Self> {
        if d == 0 || values.is_empty() || values.len() % d != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} values cannot form a non-empty series of dimension {d}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("series has non-finite entries".into()));
        }
        Ok(Self { d, values, origin })
    }

    pub(crate) fn from_parts_unchecked(d: usize, values: Vec<f64>, origin: SeriesOrigin) -> Self {
        Self { d, values, origin }
    }

    pub fn zeros(len: usize, d: usize) -> Self {
        Self { d, values: vec![0.0; len * d], origin: SeriesOrigin::Clean }
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn origin(&self) -> SeriesOrigin {
        self.origin
    }

    pub fn with_origin(mut self, origin: SeriesOrigin) -> Self {
        self.origin = origin;
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Observation at 1-based time `t`.
    pub fn at(&self, t: usize) -> &[f64] {
        &self.values[(t - 1) * self.d..t * self.d]
    }

    /// Coordinate `k` (0-based) as a vector over time.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.values.iter().skip(k).step_by(self.d).copied().collect()
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &TimeSeries, b: f64) -> Result<TimeSeries> {
        if self.d != other.d || self.values.len() != other.values.len() {
            return Err(Error::DimensionMismatch("series shapes differ".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        TimeSeries::new(self.d, values, self.origin)
    }

    /// Writes `t,y1,...,yd` with full-precision values.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.d).map(|k| format!("y{k}")));
        wtr.write_record(&header)?;
        for t in 1..=self.len() {
            let mut rec = vec![t.to_string()];
            rec.extend(self.at(t).iter().map(|v| format!("{v:?}")));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads the `t,y1,...,yd` format. Time indices must run `1..=T`.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let header = rdr.headers()?.clone();
        let d = header.len().saturating_sub(1);
        let expected_ok = header.get(0) == Some("t")
            && d >= 1
            && (1..=d).all(|k| header.get(k) == Some(format!("y{k}").as_str()));
        if !expected_ok {
            return Err(Error::Parse(format!(
                "expected header t,y1,...,yd; got {:?}",
                header.iter().collect::<Vec<_>>()
            )));
        }
        let mut values = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let t: usize = rec
                .get(0)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse(format!("row {}: bad time index", row + 1)))?;
            if t != row + 1 {
                return Err(Error::Parse(format!(
                    "row {}: time index {t} out of sequence",
                    row + 1
                )));
            }
            for k in 1..=d {
                let v: f64 = rec
                    .get(k)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Parse(format!("row {}: bad value in y{k}", row + 1)))?;
                values.push(v);
            }
        }
        if values.is_empty() {
            return Err(Error::Parse("no observations".into()));
        }
        TimeSeries::new(d, values, SeriesOrigin::Empirical)
    }
}

/// Residuals always use zero presample observations and residuals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Presample {
    Zero,
}

/// Output of the residual filter at a particular candidate parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSeries {
    d: usize,
    values: Vec<f64>,
    params: VarmaModel,
    presample: Presample,
}

impl ResidualSeries {
    /// Wraps raw residual rows, e.g. norms prepared by hand for selection tests.
    pub fn from_values(d: usize, values: Vec<f64>, params: VarmaModel) -> Result<Self> {
        if d == 0 || values.len() % d != 0 || params.dim() != d {
            return Err(Error::DimensionMismatch("residual shape".into()));
        }
        Ok(Self { d, values, params, presample: Presample::Zero })
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, t: usize) -> &[f64] {
        &self.values[(t - 1) * self.d..t * self.d]
    }

    pub fn params(&self) -> &VarmaModel {
        &self.params
    }

    pub fn presample(&self) -> Presample {
        self.presample
    }

    pub fn into_series(self) -> TimeSeries {
        TimeSeries::from_parts_unchecked(self.d, self.values, SeriesOrigin::Clean)
    }
}

/// Recursive residual filter `e_t = x_t - sum Phi_i x_{t-i} - sum Theta_j e_{t-j}`.
pub fn residuals(series: &TimeSeries, params: &VarmaModel) -> Result<ResidualSeries> {
    if series.dim() != params.dim() {
        return Err(Error::DimensionMismatch(format!(
            "series has dimension {}, model {}",
            series.dim(),
            params.dim()
        )));
    }
    let mut out = vec![0.0; series.values.len()];
    filter_residuals_into(&series.values, &params.filter_coeffs(), &mut out);
    Ok(ResidualSeries { d: series.d, values: out, params: params.clone(), presample: Presample::Zero })
}

/// A factor `L` with `L L' = Sigma`. Eigenvalues in `[-tol, 0)` are floored
/// at zero; anything more negative is rejected.
pub fn covariance_factor(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = sigma.nrows();
    let eig = sigma.clone().symmetric_eigen();
    let scale = sigma.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -1e-10 * scale {
        return Err(Error::NotPositiveSemidefinite { eigenvalue: min });
    }
    if let Some(ch) = sigma.clone().cholesky() {
        return Ok(ch.l());
    }
    let mut root = DMatrix::zeros(d, d);
    for k in 0..d {
        let s = eig.eigenvalues[k].max(0.0).sqrt();
        for r in 0..d {
            root[(r, k)] = eig.eigenvectors[(r, k)] * s;
        }
    }
    Ok(root)
}

/// Simulates `burn_in + len` steps from zero presample and keeps the last
/// `len`. Innovations come from ChaCha20 (stream 0) seeded with `seed`.
pub fn simulate(
    model: &VarmaModel,
    len: usize,
    burn_in: usize,
    seed: u64,
) -> Result<(TimeSeries, TimeSeries)> {
    if len == 0 {
        return Err(Error::InvalidArgument("series length must be at least 1".into()));
    }
    let radius = crate::lagpoly::ar_root_modulus(model);
    if radius >= 1.0 {
        return Err(Error::NonCausal { max_modulus: radius, limit: 1.0 });
    }
    let factor = covariance_factor(model.sigma())?;
    let d = model.dim();
    let n = burn_in + len;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(0);

    let mut eps = vec![0.0; n * d];
    let mut z = vec![0.0; d];
    for t in 0..n {
        for zk in z.iter_mut() {
            *zk = StandardNormal.sample(&mut rng);
        }
        for r in 0..d {
            let mut acc = 0.0;
            for (k, zk) in z.iter().enumerate() {
                acc += factor[(r, k)] * zk;
            }
            eps[t * d + r] = acc;
        }
    }

    let c = model.filter_coeffs();
    let mut x = vec![0.0; n * d];
    for t in 0..n {
        let (past, rest) = x.split_at_mut(t * d);
        let row = &mut rest[..d];
        row.copy_from_slice(&eps[t * d..(t + 1) * d]);
        for i in 1..=c.p.min(t) {
            let m = &c.ar[(i - 1) * d * d..i * d * d];
            let lag = &past[(t - i) * d..(t - i + 1) * d];
            for r in 0..d {
                for k in 0..d {
                    row[r] += m[r * d + k] * lag[k];
                }
            }
        }
        for j in 1..=c.q.min(t) {
            let m = &c.ma[(j - 1) * d * d..j * d * d];
            let lag = &eps[(t - j) * d..(t - j + 1) * d];
            for r in 0..d {
                for k in 0..d {
                    row[r] += m[r * d + k] * lag[k];
                }
            }
        }
    }

    let keep = burn_in * d..;
    Ok((
        TimeSeries::from_parts_unchecked(d, x[keep.clone()].to_vec(), SeriesOrigin::Clean),
        TimeSeries::from_parts_unchecked(d, eps[keep].to_vec(), SeriesOrigin::Clean),
    ))
}

/// JSON form of a model: nested row lists for every matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default)]
    pub ar: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub ma: Vec<Vec<Vec<f64>>>,
    pub sigma: Vec<Vec<f64>>,
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != nc) {
        return Err(Error::DimensionMismatch(format!("{what} has ragged rows")));
    }
    Ok(DMatrix::from_row_iterator(nr, nc, rows.iter().flatten().copied()))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

impl TryFrom<&ModelSpec> for VarmaModel {
    type Error = Error;

    fn try_from(spec: &ModelSpec) -> Result<Self> {
        let ar = spec
            .ar
            .iter()
            .enumerate()
            .map(|(i, m)| matrix_from_rows(m, &format!("Phi_{}", i + 1)))
            .collect::<Result<Vec<_>>>()?;
        let ma = spec
            .ma
            .iter()
            .enumerate()
            .map(|(i, m)| matrix_from_rows(m, &format!("Theta_{}", i + 1)))
            .collect::<Result<Vec<_>>>()?;
        VarmaModel::new(ar, ma, matrix_from_rows(&spec.sigma, "Sigma")?)
    }
}

impl From<&VarmaModel> for ModelSpec {
    fn from(m: &VarmaModel) -> Self {
        Self {
            ar: m.ar.iter().map(matrix_to_rows).collect(),
            ma: m.ma.iter().map(matrix_to_rows).collect(),
            sigma: matrix_to_rows(&m.sigma),
        }
    }
}

impl Serialize for VarmaModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ModelSpec::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for VarmaModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = ModelSpec::deserialize(d)?;
        VarmaModel::try_from(&spec).map_err(serde::de::Error::custom)
    }
}
