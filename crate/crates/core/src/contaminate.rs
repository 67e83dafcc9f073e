//! Additive and innovative outlier injection, and the exact residual
//! footprint each leaves behind at an arbitrary candidate parameter.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagpoly::{self, expand_pi};
use crate::process::{SeriesOrigin, TimeSeries, VarmaModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutlierKind {
    /// `y_t = x_t + delta_t zeta_t`
    #[serde(rename = "AO")]
    Additive,
    /// `y_t = x_t + phi_0(L)^-1 delta_t zeta_t`
    #[serde(rename = "IO")]
    Innovative,
}

impl std::fmt::Display for OutlierKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OutlierKind::Additive => "AO",
            OutlierKind::Innovative => "IO",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContaminationSpec {
    kind: OutlierKind,
    d: usize,
    delta: Vec<bool>,
    zeta: Vec<f64>,
}

impl ContaminationSpec {
    pub fn new(kind: OutlierKind, d: usize, delta: Vec<bool>, zeta: Vec<f64>) -> Result<Self> {
        if d == 0 || zeta.len() != delta.len() * d {
            return Err(Error::DimensionMismatch(format!(
                "zeta has {} entries, expected {} x {d}",
                zeta.len(),
                delta.len()
            )));
        }
        if zeta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite magnitude".into()));
        }
        for (t, &flag) in delta.iter().enumerate() {
            if !flag && zeta[t * d..(t + 1) * d].iter().any(|&v| v != 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "nonzero magnitude at unflagged index {}",
                    t + 1
                )));
            }
        }
        let count = delta.iter().filter(|&&f| f).count();
        if !delta.is_empty() && 2 * count >= delta.len() {
            return Err(Error::InvalidArgument(format!(
                "contamination fraction {count}/{} must stay below 1/2",
                delta.len()
            )));
        }
        Ok(Self { kind, d, delta, zeta })
    }

    /// Same vector `(zeta, ..., zeta)` at every flagged index.
    pub fn constant(kind: OutlierKind, d: usize, delta: Vec<bool>, zeta: f64) -> Result<Self> {
        let values = delta
            .iter()
            .flat_map(|&f| std::iter::repeat_n(if f { zeta } else { 0.0 }, d))
            .collect();
        Self::new(kind, d, delta, values)
    }

    pub fn kind(&self) -> OutlierKind {
        self.kind
    }

    pub fn with_kind(mut self, kind: OutlierKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn delta(&self) -> &[bool] {
        &self.delta
    }

    /// `delta_t zeta_t` stacked row-major.
    pub fn impulses(&self) -> &[f64] {
        &self.zeta
    }

    /// 1-based indices with `delta_t = 1`.
    pub fn outlier_times(&self) -> Vec<usize> {
        self.delta
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| f.then_some(i + 1))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string(), "delta".to_string()];
        header.extend((1..=self.d).map(|k| format!("zeta{k}")));
        wtr.write_record(&header)?;
        for (i, &f) in self.delta.iter().enumerate() {
            let mut rec = vec![(i + 1).to_string(), u8::from(f).to_string()];
            rec.extend(self.zeta[i * self.d..(i + 1) * self.d].iter().map(|v| format!("{v:?}")));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(kind: OutlierKind, r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let header = rdr.headers()?.clone();
        let d = header.len().saturating_sub(2);
        if d == 0 || header.get(0) != Some("t") || header.get(1) != Some("delta") {
            return Err(Error::Parse("expected header t,delta,zeta1,...,zetad".into()));
        }
        let mut delta = Vec::new();
        let mut zeta = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::Parse(format!("row {}: bad {what}", row + 1));
            if rec.get(0).and_then(|s| s.parse::<usize>().ok()) != Some(row + 1) {
                return Err(bad("time index"));
            }
            delta.push(match rec.get(1) {
                Some("0") => false,
                Some("1") => true,
                _ => return Err(bad("delta")),
            });
            for k in 0..d {
                zeta.push(rec.get(k + 2).and_then(|s| s.parse().ok()).ok_or_else(|| bad("zeta"))?);
            }
        }
        Self::new(kind, d, delta, zeta)
    }
}

/// Exactly `round(alpha T)` ones drawn uniformly without replacement from
/// `{guard + 1, ..., T}`. Uses ChaCha20 stream 1 of `seed`, so the indicator
/// and the innovations of [`simulate`](crate::process::simulate) can share a
/// seed without sharing draws.
pub fn make_indicator(len: usize, alpha: f64, seed: u64, guard: usize) -> Result<Vec<bool>> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside [0, 0.5)")));
    }
    let count = (alpha * len as f64).round() as usize;
    let slots = len.saturating_sub(guard);
    if count > slots {
        return Err(Error::InvalidArgument(format!(
            "{count} outliers requested but only {slots} indices after the guard band"
        )));
    }
    let mut delta = vec![false; len];
    if count == 0 {
        return Ok(delta);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(1);
    for i in rand::seq::index::sample(&mut rng, slots, count) {
        delta[guard + i] = true;
    }
    Ok(delta)
}

fn check_shapes(series: &TimeSeries, spec: &ContaminationSpec) -> Result<()> {
    if series.len() != spec.len() || series.dim() != spec.dim() {
        return Err(Error::DimensionMismatch(format!(
            "series is {}x{}, contamination {}x{}",
            series.len(),
            series.dim(),
            spec.len(),
            spec.dim()
        )));
    }
    Ok(())
}

pub fn apply_ao(series: &TimeSeries, spec: &ContaminationSpec) -> Result<TimeSeries> {
    if spec.kind != OutlierKind::Additive {
        return Err(Error::InvalidArgument("apply_ao needs an AO specification".into()));
    }
    check_shapes(series, spec)?;
    let values = series.values().iter().zip(&spec.zeta).map(|(x, z)| x + z).collect();
    TimeSeries::new(series.dim(), values, SeriesOrigin::Contaminated)
}

/// Level effect of innovative outliers: `w_t = sum Phi_i w_{t-i} + delta_t zeta_t`.
pub fn io_level_effect(spec: &ContaminationSpec, true_model: &VarmaModel) -> Vec<f64> {
    let d = spec.d;
    let c = true_model.filter_coeffs();
    let n = spec.len();
    let mut w = vec![0.0; n * d];
    for t in 0..n {
        let (past, rest) = w.split_at_mut(t * d);
        let row = &mut rest[..d];
        row.copy_from_slice(&spec.zeta[t * d..(t + 1) * d]);
        for i in 1..=c.p.min(t) {
            let m = &c.ar[(i - 1) * d * d..i * d * d];
            let lag = &past[(t - i) * d..(t - i + 1) * d];
            for r in 0..d {
                for k in 0..d {
                    row[r] += m[r * d + k] * lag[k];
                }
            }
        }
    }
    w
}

pub fn apply_io(
    series: &TimeSeries,
    spec: &ContaminationSpec,
    true_model: &VarmaModel,
) -> Result<TimeSeries> {
    if spec.kind != OutlierKind::Innovative {
        return Err(Error::InvalidArgument("apply_io needs an IO specification".into()));
    }
    check_shapes(series, spec)?;
    if true_model.dim() != spec.dim() {
        return Err(Error::DimensionMismatch("model and contamination dimensions".into()));
    }
    let radius = lagpoly::ar_root_modulus(true_model);
    if radius >= 1.0 {
        return Err(Error::NonCausal { max_modulus: radius, limit: 1.0 });
    }
    let w = io_level_effect(spec, true_model);
    let values = series.values().iter().zip(&w).map(|(x, z)| x + z).collect();
    TimeSeries::new(series.dim(), values, SeriesOrigin::Contaminated)
}

/// Dispatches on the specification's kind.
pub fn apply(series: &TimeSeries, spec: &ContaminationSpec, true_model: &VarmaModel) -> Result<TimeSeries> {
    match spec.kind {
        OutlierKind::Additive => apply_ao(series, spec),
        OutlierKind::Innovative => apply_io(series, spec, true_model),
    }
}

/// `pi(L) delta zeta` (AO) or `pi(L) phi_0(L)^-1 delta zeta` (IO) evaluated
/// at `candidate`, keeping lags `0..=K` of each event. `horizon = None`
/// keeps every lag inside the sample, which makes the result equal to the
/// difference of contaminated and clean residuals exactly.
pub fn residual_footprint(
    spec: &ContaminationSpec,
    candidate: &VarmaModel,
    true_model: &VarmaModel,
    horizon: Option<usize>,
) -> Result<TimeSeries> {
    if candidate.dim() != spec.dim() || true_model.dim() != spec.dim() {
        return Err(Error::DimensionMismatch("model and contamination dimensions".into()));
    }
    let k = horizon.unwrap_or(spec.len().saturating_sub(1));
    let pi = expand_pi(candidate, k)?;
    let series = match spec.kind {
        OutlierKind::Additive => pi,
        OutlierKind::Innovative => {
            let radius = lagpoly::ar_root_modulus(true_model);
            if radius >= 1.0 {
                return Err(Error::NonCausal { max_modulus: radius, limit: 1.0 });
            }
            pi.mul(&lagpoly::expand_ar_inverse(true_model, k))
        }
    };
    Ok(TimeSeries::from_parts_unchecked(
        spec.d,
        series.convolve(&spec.zeta),
        SeriesOrigin::Contaminated,
    ))
}
