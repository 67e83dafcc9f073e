//! Matrix lag-polynomial algebra.
//!
//! A [`LagPolynomial`] stores the coefficients `C_1..C_k` of either
//! `I - sum C_i L^i` (AR side) or `I + sum C_j L^j` (MA side). The inverse
//! filters `pi(L) = theta(L)^-1 phi(L)` and `psi(L) = phi(L)^-1 theta(L)` are
//! computed as truncated [`PowerSeries`] by the recursions implied by
//! `theta(L) pi(L) = phi(L)` and `phi(L) psi(L) = theta(L)`.

use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::process::VarmaModel;

/// Default root margin used by the optimiser and by [`check_causal_invertible`] callers.
pub const DEFAULT_MARGIN: f64 = 0.01;

/// Ratio floor applied by [`fit_decay_bound`] to finite-memory series.
pub const RATIO_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PolySide {
    /// `I - sum C_i L^i`
    Ar,
    /// `I + sum C_j L^j`
    Ma,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagPolynomial {
    side: PolySide,
    d: usize,
    coeffs: Vec<DMatrix<f64>>,
}

impl LagPolynomial {
    pub fn new(side: PolySide, d: usize, coeffs: Vec<DMatrix<f64>>) -> Result<Self> {
        for c in &coeffs {
            if c.nrows() != d || c.ncols() != d {
                return Err(Error::DimensionMismatch(format!(
                    "lag coefficient is {}x{}, expected {d}x{d}",
                    c.nrows(),
                    c.ncols()
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("non-finite lag coefficient".into()));
            }
        }
        Ok(Self { side, d, coeffs })
    }

    pub fn side(&self) -> PolySide {
        self.side
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Raw `C_i`, `i = 1..=degree`.
    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    /// Signed coefficient of `L^k` in the operator, identity at `k = 0`.
    pub fn operator_coeff(&self, k: usize) -> DMatrix<f64> {
        if k == 0 {
            return DMatrix::identity(self.d, self.d);
        }
        match self.coeffs.get(k - 1) {
            None => DMatrix::zeros(self.d, self.d),
            Some(c) => match self.side {
                PolySide::Ar => -c,
                PolySide::Ma => c.clone(),
            },
        }
    }

    /// Largest modulus among the reciprocal roots of `det` of the operator.
    pub fn max_root_modulus(&self) -> f64 {
        if self.coeffs.is_empty() {
            return 0.0;
        }
        let companion_coeffs: Vec<DMatrix<f64>> = match self.side {
            PolySide::Ar => self.coeffs.clone(),
            PolySide::Ma => self.coeffs.iter().map(|c| -c).collect(),
        };
        linalg::companion_radius(&companion_coeffs, self.d)
    }

    /// `self(L) * series(L)`, truncated at the series' own horizon.
    pub fn mul_series(&self, series: &PowerSeries) -> Vec<DMatrix<f64>> {
        (0..=series.truncation())
            .map(|k| {
                let mut acc = DMatrix::zeros(self.d, self.d);
                for i in 0..=k.min(self.degree()) {
                    acc += self.operator_coeff(i) * &series.coeffs[k - i];
                }
                acc
            })
            .collect()
    }
}

/// `Pi_0 + Pi_1 L + ... + Pi_K L^K` with `Pi_0 = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSeries {
    d: usize,
    coeffs: Vec<DMatrix<f64>>,
    warning: Option<String>,
}

impl PowerSeries {
    pub fn new(coeffs: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = coeffs
            .first()
            .ok_or_else(|| Error::InvalidArgument("power series needs Pi_0".into()))?;
        let d = first.nrows();
        if *first != DMatrix::identity(d, d) {
            return Err(Error::InvalidArgument("Pi_0 must be the identity".into()));
        }
        for c in &coeffs {
            if c.nrows() != d || c.ncols() != d {
                return Err(Error::DimensionMismatch("power series coefficient shape".into()));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("non-finite power series coefficient".into()));
            }
        }
        Ok(Self { d, coeffs, warning: None })
    }

    /// Identity series truncated at `k`.
    pub fn identity(d: usize, k: usize) -> Self {
        let mut coeffs = vec![DMatrix::zeros(d, d); k + 1];
        coeffs[0] = DMatrix::identity(d, d);
        Self { d, coeffs, warning: None }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Highest lag `K` kept.
    pub fn truncation(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    pub fn coeff(&self, j: usize) -> &DMatrix<f64> {
        &self.coeffs[j]
    }

    /// Set when the expansion horizon is shorter than the model orders.
    pub fn warning(&self) -> Option<&str> {
        self.warning.as_deref()
    }

    /// Truncated product `self(L) * other(L)` up to the shorter horizon.
    pub fn mul(&self, other: &PowerSeries) -> PowerSeries {
        let k = self.truncation().min(other.truncation());
        let coeffs = (0..=k)
            .map(|n| {
                let mut acc = DMatrix::zeros(self.d, self.d);
                for i in 0..=n {
                    acc += &self.coeffs[i] * &other.coeffs[n - i];
                }
                acc
            })
            .collect();
        PowerSeries { d: self.d, coeffs, warning: None }
    }

    /// Spectral norms `||Pi_j||`.
    pub fn norms(&self) -> Vec<f64> {
        self.coeffs.iter().map(linalg::spectral_norm).collect()
    }

    /// Applies the series as a causal filter to rows of a `len x d` array:
    /// `out_t = sum_{k <= min(K, t-1)} Pi_k x_{t-k}`.
    pub fn convolve(&self, x: &[f64]) -> Vec<f64> {
        let d = self.d;
        let n = x.len() / d;
        let mut out = vec![0.0; x.len()];
        for t in 0..n {
            for k in 0..=self.truncation().min(t) {
                let m = &self.coeffs[k];
                let lag = &x[(t - k) * d..(t - k + 1) * d];
                if lag.iter().all(|&v| v == 0.0) {
                    continue;
                }
                for r in 0..d {
                    let mut acc = 0.0;
                    for c in 0..d {
                        acc += m[(r, c)] * lag[c];
                    }
                    out[t * d + r] += acc;
                }
            }
        }
        out
    }

    /// Debug export with columns `lag,row,col,value` (rows/cols 1-based).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["lag", "row", "col", "value"])?;
        for (lag, m) in self.coeffs.iter().enumerate() {
            for r in 0..self.d {
                for c in 0..self.d {
                    wtr.write_record([
                        lag.to_string(),
                        (r + 1).to_string(),
                        (c + 1).to_string(),
                        format!("{:?}", m[(r, c)]),
                    ])?;
                }
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CausalityReport {
    pub causal: bool,
    pub invertible: bool,
    pub max_ar_root_modulus: f64,
    pub max_ma_root_modulus: f64,
}

pub fn ar_root_modulus(model: &VarmaModel) -> f64 {
    model.ar_polynomial().max_root_modulus()
}

pub fn ma_root_modulus(model: &VarmaModel) -> f64 {
    model.ma_polynomial().max_root_modulus()
}

/// Causal iff every AR companion eigenvalue has modulus `<= 1 - margin`;
/// invertible likewise for the MA side.
pub fn check_causal_invertible(model: &VarmaModel, margin: f64) -> Result<CausalityReport> {
    if !(0.0..1.0).contains(&margin) {
        return Err(Error::InvalidArgument(format!("margin {margin} outside [0, 1)")));
    }
    let ar = ar_root_modulus(model);
    let ma = ma_root_modulus(model);
    let limit = 1.0 - margin;
    Ok(CausalityReport {
        causal: ar <= limit,
        invertible: ma <= limit,
        max_ar_root_modulus: ar,
        max_ma_root_modulus: ma,
    })
}

fn short_horizon_warning(model: &VarmaModel, k: usize) -> Option<String> {
    let order = model.p().max(model.q());
    (k < order).then(|| format!("truncation {k} is below max(p, q) = {order}"))
}

/// Solves `divisor(L) * out(L) = numerator(L)` coefficient by coefficient,
/// where `divisor` has identity leading term.
fn long_division(divisor: &LagPolynomial, numerator: &LagPolynomial, k: usize) -> Vec<DMatrix<f64>> {
    let d = divisor.dim();
    let mut out: Vec<DMatrix<f64>> = Vec::with_capacity(k + 1);
    out.push(DMatrix::identity(d, d));
    for n in 1..=k {
        let mut c = numerator.operator_coeff(n);
        for j in 1..=n.min(divisor.degree()) {
            c -= divisor.operator_coeff(j) * &out[n - j];
        }
        out.push(c);
    }
    out
}

/// `pi(L) = theta(L)^-1 phi(L)` up to lag `k`.
pub fn expand_pi(model: &VarmaModel, k: usize) -> Result<PowerSeries> {
    let ma = ma_root_modulus(model);
    if ma >= 1.0 {
        return Err(Error::NonInvertible { max_modulus: ma, limit: 1.0 });
    }
    Ok(PowerSeries {
        d: model.dim(),
        coeffs: long_division(&model.ma_polynomial(), &model.ar_polynomial(), k),
        warning: short_horizon_warning(model, k),
    })
}

/// `psi(L) = phi(L)^-1 theta(L)` up to lag `k`.
pub fn expand_psi(model: &VarmaModel, k: usize) -> Result<PowerSeries> {
    let ar = ar_root_modulus(model);
    if ar >= 1.0 {
        return Err(Error::NonCausal { max_modulus: ar, limit: 1.0 });
    }
    Ok(PowerSeries {
        d: model.dim(),
        coeffs: long_division(&model.ar_polynomial(), &model.ma_polynomial(), k),
        warning: short_horizon_warning(model, k),
    })
}

/// `phi(L)^-1` up to lag `k`, without the causality check (the caller decides).
pub(crate) fn expand_ar_inverse(model: &VarmaModel, k: usize) -> PowerSeries {
    let d = model.dim();
    let one = LagPolynomial::new(PolySide::Ma, d, vec![]).expect("empty polynomial");
    PowerSeries { d, coeffs: long_division(&model.ar_polynomial(), &one, k), warning: None }
}

/// Geometric envelope `||Pi_j|| <= M R^j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayBound {
    pub m: f64,
    pub r: f64,
}

impl DecayBound {
    pub fn at(&self, j: usize) -> f64 {
        self.m * self.r.powi(j as i32)
    }

    /// Checks the envelope on every coefficient of `series`.
    pub fn holds_on(&self, series: &PowerSeries) -> bool {
        series
            .norms()
            .iter()
            .enumerate()
            .all(|(j, &n)| n == 0.0 || n <= self.at(j))
    }
}

/// Fits `R` as the largest successive norm ratio over the tail half of the
/// series (floored at [`RATIO_FLOOR`]) and `M` as the smallest constant that
/// makes the envelope hold on every computed lag.
pub fn fit_decay_bound(series: &PowerSeries) -> Result<DecayBound> {
    let k = series.truncation();
    if k < 2 {
        return Err(Error::InvalidArgument("decay fit needs truncation K >= 2".into()));
    }
    let norms = series.norms();
    let start = (k / 2).max(1);
    let mut r = RATIO_FLOOR;
    for j in (start + 1)..=k {
        let (prev, cur) = (norms[j - 1], norms[j]);
        let ratio = if cur == 0.0 {
            0.0
        } else if prev == 0.0 {
            f64::INFINITY
        } else {
            cur / prev
        };
        r = r.max(ratio);
    }
    if r >= 1.0 {
        return Err(Error::NonContractive { ratio: r });
    }
    let mut m = 0.0_f64;
    for (j, &n) in norms.iter().enumerate() {
        if n > 0.0 {
            m = m.max(n / r.powi(j as i32));
        }
    }
    if !m.is_finite() {
        return Err(Error::NonContractive { ratio: r });
    }
    // Absorb rounding in M * R^j so the envelope check is exact on the fit set.
    Ok(DecayBound { m: m * (1.0 + 1e-12), r })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaSuggestion {
    pub kappa: usize,
    /// `alpha (kappa + 1) < 1`, so the patch-removed subset is non-empty in the limit.
    pub feasible: bool,
    /// Lower bound `(1 - alpha (kappa + 1)) T` on the retained sample.
    pub min_retained: f64,
}

/// Smallest `kappa` with `alpha T zeta_max M R^kappa <= tol`.
///
/// `finite_memory = Some(p)` short-circuits to `kappa = p` for a pure VAR(p),
/// whose residual patch ends exactly after `p` steps.
pub fn suggest_kappa(
    bound: &DecayBound,
    alpha: f64,
    len: usize,
    zeta_max: f64,
    tol: f64,
    finite_memory: Option<usize>,
) -> Result<KappaSuggestion> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside [0, 0.5)")));
    }
    if !(tol > 0.0) || !(zeta_max >= 0.0) {
        return Err(Error::InvalidArgument("tol must be > 0 and zeta_max >= 0".into()));
    }
    let finish = |kappa: usize| {
        let frac = alpha * (kappa as f64 + 1.0);
        KappaSuggestion { kappa, feasible: frac < 1.0, min_retained: (1.0 - frac) * len as f64 }
    };
    if let Some(p) = finite_memory {
        return Ok(finish(p));
    }
    if !(bound.r < 1.0) {
        return Err(Error::NonContractive { ratio: bound.r });
    }
    let scale = alpha * len as f64 * zeta_max * bound.m;
    let lhs = |kappa: usize| scale * bound.r.powi(kappa as i32);
    if lhs(0) <= tol {
        return Ok(finish(0));
    }
    let guess = ((scale / tol).ln() / (1.0 / bound.r).ln()).ceil().max(0.0) as usize;
    let mut kappa = guess;
    while lhs(kappa) > tol {
        kappa += 1;
    }
    while kappa > 0 && lhs(kappa - 1) <= tol {
        kappa -= 1;
    }
    Ok(finish(kappa))
}

/// Horizon used for internal expansions: `max(50, p + q + kappa)`.
pub fn default_truncation(p: usize, q: usize, kappa: usize) -> usize {
    50.max(p + q + kappa)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_series(v: &[f64]) -> PowerSeries {
        PowerSeries::new(v.iter().map(|&x| DMatrix::from_element(1, 1, x)).collect()).unwrap()
    }

    fn design_a() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.7, 0.0, 0.3, 0.7])
    }

    #[test]
    fn var1_design_matrix_is_causal() {
        let m = VarmaModel::new(vec![design_a()], vec![], DMatrix::identity(2, 2)).unwrap();
        let rep = check_causal_invertible(&m, 0.01).unwrap();
        assert!(rep.causal && rep.invertible);
        assert!((rep.max_ar_root_modulus - 0.7).abs() < 1e-12);
    }

    #[test]
    fn zero_coefficients_are_trivially_fine() {
        let m = VarmaModel::white_noise(3, 2, 2);
        let rep = check_causal_invertible(&m, 0.5).unwrap();
        assert!(rep.causal && rep.invertible);
        assert_eq!(rep.max_ar_root_modulus, 0.0);
        assert_eq!(rep.max_ma_root_modulus, 0.0);
    }

    #[test]
    fn unit_root_is_flagged() {
        let m = VarmaModel::scalar(&[1.0], &[], 1.0).unwrap();
        let rep = check_causal_invertible(&m, 0.01).unwrap();
        assert!(!rep.causal);
        assert_eq!(rep.max_ar_root_modulus, 1.0);
    }

    #[test]
    fn ma_sign_convention_matters_for_order_two() {
        // theta(z) = 1 + 1.5 z + 0.56 z^2 = (1 + 0.7 z)(1 + 0.8 z): roots -1/0.7, -1/0.8.
        let m = VarmaModel::scalar(&[], &[1.5, 0.56], 1.0).unwrap();
        assert!((ma_root_modulus(&m) - 0.8).abs() < 1e-10);
    }

    #[test]
    fn ma1_pi_expansion() {
        let m = VarmaModel::scalar(&[], &[0.5], 1.0).unwrap();
        let s = expand_pi(&m, 3).unwrap();
        let got: Vec<f64> = s.coeffs().iter().map(|c| c[(0, 0)]).collect();
        assert_eq!(got, vec![1.0, -0.5, 0.25, -0.125]);
    }

    #[test]
    fn short_horizon_sets_warning() {
        let m = VarmaModel::scalar(&[0.1, 0.1, 0.1], &[], 1.0).unwrap();
        assert!(expand_pi(&m, 2).unwrap().warning().is_some());
        assert!(expand_pi(&m, 3).unwrap().warning().is_none());
    }

    #[test]
    fn non_invertible_pi_is_error() {
        let m = VarmaModel::scalar(&[], &[1.2], 1.0).unwrap();
        assert!(matches!(expand_pi(&m, 5), Err(Error::NonInvertible { .. })));
        let m = VarmaModel::scalar(&[1.2], &[], 1.0).unwrap();
        assert!(matches!(expand_psi(&m, 5), Err(Error::NonCausal { .. })));
    }

    #[test]
    fn decay_of_ma1() {
        let m = VarmaModel::scalar(&[], &[0.5], 1.0).unwrap();
        let b = fit_decay_bound(&expand_pi(&m, 20).unwrap()).unwrap();
        assert!((b.r - 0.5).abs() < 1e-12);
        assert!((b.m - 1.0).abs() < 1e-9);
    }

    #[test]
    fn finite_memory_tail_is_floored() {
        let m = VarmaModel::new(vec![design_a()], vec![], DMatrix::identity(2, 2)).unwrap();
        let s = expand_pi(&m, 10).unwrap();
        let b = fit_decay_bound(&s).unwrap();
        assert_eq!(b.r, RATIO_FLOOR);
        assert!(b.m.is_finite());
        assert!(b.holds_on(&s));
    }

    #[test]
    fn unit_root_series_is_non_contractive() {
        let s = scalar_series(&[1.0; 12]);
        assert!(matches!(fit_decay_bound(&s), Err(Error::NonContractive { .. })));
    }

    #[test]
    fn kappa_for_geometric_half() {
        let b = DecayBound { m: 1.0, r: 0.5 };
        let s = suggest_kappa(&b, 0.1, 500, 50.0, 1e-3, None).unwrap();
        let closed = ((2500.0_f64 / 1e-3).ln() / 2.0_f64.ln()).ceil() as usize;
        assert_eq!(s.kappa, 22);
        assert_eq!(s.kappa, closed);
        assert!(!s.feasible);
    }

    #[test]
    fn kappa_zero_without_contamination() {
        let b = DecayBound { m: 3.0, r: 0.9 };
        assert_eq!(suggest_kappa(&b, 0.1, 500, 0.0, 1e-3, None).unwrap().kappa, 0);
    }

    #[test]
    fn kappa_finite_memory_override() {
        let b = DecayBound { m: 1e6, r: RATIO_FLOOR };
        let s = suggest_kappa(&b, 0.05, 1000, 100.0, 1e-8, Some(2)).unwrap();
        assert_eq!(s.kappa, 2);
        assert!(s.feasible);
    }

    #[test]
    fn kappa_rejects_non_contractive() {
        let b = DecayBound { m: 1.0, r: 1.0 };
        assert!(matches!(
            suggest_kappa(&b, 0.1, 100, 1.0, 1e-3, None),
            Err(Error::NonContractive { .. })
        ));
    }

    #[test]
    fn csv_export_shape() {
        let m = VarmaModel::new(vec![design_a()], vec![], DMatrix::identity(2, 2)).unwrap();
        let mut buf = Vec::new();
        expand_pi(&m, 2).unwrap().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * 4);
        assert!(text.starts_with("lag,row,col,value\n0,1,1,1.0\n"));
    }
}
