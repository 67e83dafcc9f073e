//! Retained index sets and the transforms that build them.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::linalg;
use crate::process::ResidualSeries;

/// Sorted, duplicate-free subset of `{1, ..., T}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexSet {
    len: usize,
    members: Vec<usize>,
}

impl IndexSet {
    /// Sorts and deduplicates `members`; rejects anything outside `1..=len`.
    pub fn new(len: usize, mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        if let Some(&bad) = members.iter().find(|&&t| t == 0 || t > len) {
            return Err(Error::InvalidArgument(format!("index {bad} outside 1..={len}")));
        }
        Ok(Self { len, members })
    }

    pub fn full(len: usize) -> Self {
        Self { len, members: (1..=len).collect() }
    }

    /// `{t : mask[t-1]}`.
    pub fn from_mask(mask: &[bool]) -> Self {
        let members = mask
            .iter()
            .enumerate()
            .filter_map(|(i, &keep)| keep.then_some(i + 1))
            .collect();
        Self { len: mask.len(), members }
    }

    /// `{warmup + 1, ..., len}`.
    pub fn after(len: usize, warmup: usize) -> Self {
        Self { len, members: (warmup.min(len) + 1..=len).collect() }
    }

    /// Ambient length `T`.
    pub fn ambient(&self) -> usize {
        self.len
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }

    pub fn contains(&self, t: usize) -> bool {
        self.members.binary_search(&t).is_ok()
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.len];
        for &t in &self.members {
            m[t - 1] = true;
        }
        m
    }

    pub fn complement(&self) -> IndexSet {
        let mask = self.mask();
        IndexSet::from_mask(&mask.iter().map(|&b| !b).collect::<Vec<_>>())
    }

    pub fn is_subset_of(&self, other: &IndexSet) -> bool {
        self.members.iter().all(|&t| other.contains(t))
    }

    pub fn union(&self, other: &IndexSet) -> Result<IndexSet> {
        if self.len != other.len {
            return Err(Error::DimensionMismatch("index sets over different ranges".into()));
        }
        let mut m = self.members.clone();
        m.extend_from_slice(&other.members);
        IndexSet::new(self.len, m)
    }

    /// Single-column CSV with header `t`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["t"])?;
        for t in &self.members {
            wtr.write_record([t.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(len: usize, r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        if rdr.headers()?.iter().collect::<Vec<_>>() != ["t"] {
            return Err(Error::Parse("expected single column t".into()));
        }
        let mut members = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            members.push(
                rec.get(0)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Parse("bad index".into()))?,
            );
        }
        IndexSet::new(len, members)
    }
}

/// `S^kappa H = H \ U_{t in H^c} {t+1, ..., min(t+kappa, T)}`.
pub fn patch_remove(h: &IndexSet, kappa: usize) -> IndexSet {
    if kappa == 0 {
        return h.clone();
    }
    let mask = h.mask();
    let mut last_excluded: Option<usize> = None;
    let mut members = Vec::with_capacity(h.len());
    for t in 1..=h.len {
        if !mask[t - 1] {
            last_excluded = Some(t);
            continue;
        }
        match last_excluded {
            Some(c) if t - c <= kappa => {}
            _ => members.push(t),
        }
    }
    IndexSet { len: h.len, members }
}

/// Patch removal that treats `1..=warmup` as retained when deciding which
/// patches to cut, then drops the warm-up indices. Presample start-up is not
/// an outlier and does not spawn a patch.
pub fn patch_remove_after_warmup(h: &IndexSet, kappa: usize, warmup: usize) -> IndexSet {
    let warm = warmup.min(h.len);
    let padded = h
        .union(&IndexSet { len: h.len, members: (1..=warm).collect() })
        .expect("same ambient length");
    let out = patch_remove(&padded, kappa);
    IndexSet { len: h.len, members: out.members.into_iter().filter(|&t| t > warm).collect() }
}

/// `ceil(x)` that ignores representation error just above an integer.
pub(crate) fn ceil_count(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

/// Keeps the `ceil((1 - alpha)(T - warmup))` indices in `(warmup, T]` with
/// the smallest squared Mahalanobis norm `e_t' S^-1 e_t`, where `S` is the
/// sample covariance of those residuals. Ties go to the smaller index.
pub fn huber_skip_select(residuals: &ResidualSeries, alpha: f64, warmup: usize) -> Result<IndexSet> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside [0, 0.5)")));
    }
    let len = residuals.len();
    if warmup >= len {
        return Err(Error::InvalidArgument(format!("warm-up {warmup} leaves no residuals of {len}")));
    }
    if alpha == 0.0 {
        return Ok(IndexSet::after(len, warmup));
    }
    let d = residuals.dim();
    let n = len - warmup;
    let window = &residuals.values()[warmup * d..];

    let mut mean = vec![0.0; d];
    for row in window.chunks_exact(d) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = vec![0.0; d * d];
    for row in window.chunks_exact(d) {
        for r in 0..d {
            for c in 0..d {
                cov[r * d + c] += (row[r] - mean[r]) * (row[c] - mean[c]);
            }
        }
    }
    cov.iter_mut().for_each(|v| *v /= n as f64);
    let prec = linalg::inverse_spd(&cov, d).ok_or(Error::SingularCovariance)?;

    let mut scored: Vec<(f64, usize)> = window
        .chunks_exact(d)
        .enumerate()
        .map(|(i, e)| {
            let mut q = 0.0;
            for r in 0..d {
                for c in 0..d {
                    q += e[r] * prec[r * d + c] * e[c];
                }
            }
            (q, warmup + i + 1)
        })
        .collect();
    if scored.iter().any(|(q, _)| !q.is_finite()) {
        return Err(Error::SingularCovariance);
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let keep = ceil_count((1.0 - alpha) * n as f64).min(n);
    let mut members: Vec<usize> = scored[..keep].iter().map(|&(_, t)| t).collect();
    members.sort_unstable();
    Ok(IndexSet { len, members })
}

/// `{t : delta_t = 0}`.
pub fn oracle_select(delta: &[bool]) -> IndexSet {
    IndexSet::from_mask(&delta.iter().map(|&f| !f).collect::<Vec<_>>())
}
