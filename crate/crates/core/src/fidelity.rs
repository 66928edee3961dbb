//! Envelope similarity (DTW and discrete Fréchet distance) and the
//! per-sign replicability ranking built on them.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envelope::EnvelopePair;
use crate::error::{Error, Result};

/// Clamp applied to normalized distances before inversion.
pub const SCORE_EPSILON: f64 = 1e-6;

/// Ordered `(t, f)` samples of an envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    points: Vec<(f64, f64)>,
}

impl Curve {
    /// Requires at least one point and strictly increasing, finite times.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("curve must have at least one point"));
        }
        if points.iter().any(|(t, f)| !t.is_finite() || !f.is_finite()) {
            return Err(Error::invalid("curve points must be finite"));
        }
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::invalid("curve times must be strictly increasing"));
        }
        Ok(Curve { points })
    }

    /// Points `(i * step, values[i])`.
    pub fn from_values(values: &[f64], step: f64) -> Result<Self> {
        Curve::new(
            values
                .iter()
                .enumerate()
                .map(|(i, &f)| (i as f64 * step, f))
                .collect(),
        )
    }

    /// The upper and lower envelopes as two curves.
    pub fn from_envelopes(env: &EnvelopePair) -> Result<(Curve, Curve)> {
        let upper = env
            .times_s
            .iter()
            .copied()
            .zip(env.upper.iter().copied())
            .collect();
        let lower = env
            .times_s
            .iter()
            .copied()
            .zip(env.lower.iter().copied())
            .collect();
        Ok((Curve::new(upper)?, Curve::new(lower)?))
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.1)
    }
}

/// Anchored DTW over values with local cost `|f_a - f_b|` and steps
/// (1,0), (0,1), (1,1).
pub fn dtw_distance(a: &Curve, b: &Curve) -> f64 {
    dtw_values(
        &a.values().collect::<Vec<_>>(),
        &b.values().collect::<Vec<_>>(),
    )
}

/// [`dtw_distance`] on bare value sequences. Empty input gives infinity.
pub fn dtw_values(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m];
    let mut cur = vec![0.0; m];
    for (i, &x) in a.iter().enumerate() {
        for j in 0..m {
            let cost = (x - b[j]).abs();
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let up = prev[j];
                let left = if j > 0 { cur[j - 1] } else { f64::INFINITY };
                let diag = if j > 0 { prev[j - 1] } else { f64::INFINITY };
                up.min(left).min(diag)
            };
            cur[j] = cost + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m - 1]
}

fn euclid(p: (f64, f64), q: (f64, f64)) -> f64 {
    (p.0 - q.0).hypot(p.1 - q.1)
}

fn frechet(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let m = b.len();
    let mut prev = vec![0.0f64; m];
    let mut cur = vec![0.0f64; m];
    for (i, &p) in a.iter().enumerate() {
        for j in 0..m {
            let d = euclid(p, b[j]);
            cur[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => cur[j - 1].max(d),
                (_, 0) => prev[0].max(d),
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]).max(d),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m - 1]
}

/// Discrete Fréchet distance with the plain Euclidean metric in `(t, f)`.
pub fn dfd(a: &Curve, b: &Curve) -> f64 {
    frechet(&a.points, &b.points)
}

/// Discrete Fréchet distance after standardizing each axis jointly over
/// both curves (zero mean, unit variance; a constant axis is only centred).
/// This keeps seconds and hertz commensurate when scoring envelopes.
pub fn dfd_standardized(a: &Curve, b: &Curve) -> f64 {
    let all: Vec<(f64, f64)> = a.points.iter().chain(&b.points).copied().collect();
    let n = all.len() as f64;
    let stats = |k: fn(&(f64, f64)) -> f64| {
        let mean = all.iter().map(k).sum::<f64>() / n;
        let var = all.iter().map(|p| (k(p) - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        (mean, if sd > 0.0 { sd } else { 1.0 })
    };
    let (mt, st) = stats(|p| p.0);
    let (mf, sf) = stats(|p| p.1);
    let z = |c: &Curve| -> Vec<(f64, f64)> {
        c.points
            .iter()
            .map(|&(t, f)| ((t - mt) / st, (f - mf) / sf))
            .collect()
    };
    frechet(&z(a), &z(b))
}

/// Native and imitation envelope recordings of one sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignGroups {
    pub native: Vec<EnvelopePair>,
    pub imitation: Vec<EnvelopePair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityRow {
    pub sign: String,
    pub dtw: f64,
    pub dfd: f64,
    pub dtw_norm: f64,
    pub dfd_norm: f64,
    pub s_dtw: f64,
    pub s_dfd: f64,
    pub combined: f64,
}

/// One row per sign, ordered by sign label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityTable {
    pub rows: Vec<FidelityRow>,
}

/// Mean cross-group `(dtw, dfd)` of one sign; upper and lower envelopes are
/// scored separately and averaged.
pub fn mean_cross_distances(groups: &SignGroups) -> Result<(f64, f64)> {
    if groups.native.is_empty() || groups.imitation.is_empty() {
        return Err(Error::invalid(
            "each sign needs at least one native and one imitation curve",
        ));
    }
    let native: Vec<(Curve, Curve)> = groups
        .native
        .iter()
        .map(Curve::from_envelopes)
        .collect::<Result<_>>()?;
    let imit: Vec<(Curve, Curve)> = groups
        .imitation
        .iter()
        .map(Curve::from_envelopes)
        .collect::<Result<_>>()?;
    let (mut sum_dtw, mut sum_dfd) = (0.0, 0.0);
    for (nu, nl) in &native {
        for (iu, il) in &imit {
            sum_dtw += 0.5 * (dtw_distance(nu, iu) + dtw_distance(nl, il));
            sum_dfd += 0.5 * (dfd_standardized(nu, iu) + dfd_standardized(nl, il));
        }
    }
    let pairs = (native.len() * imit.len()) as f64;
    Ok((sum_dtw / pairs, sum_dfd / pairs))
}

fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        values.iter().map(|v| (v - lo) / (hi - lo)).collect()
    } else {
        vec![0.0; values.len()]
    }
}

/// Builds the table from per-sign raw `(dtw, dfd)`: each metric is min-max
/// rescaled across signs, inverted as `1 / max(norm, eps)`, and the two
/// inverse scores averaged. When all signs tie on a metric its normalized
/// value is 0 for every sign.
pub fn table_from_distances(raw: &BTreeMap<String, (f64, f64)>) -> Result<FidelityTable> {
    if raw.len() < 2 {
        return Err(Error::invalid("fidelity ranking needs at least two signs"));
    }
    if raw
        .values()
        .any(|(a, b)| !(a.is_finite() && b.is_finite() && *a >= 0.0 && *b >= 0.0))
    {
        return Err(Error::Numerical(
            "raw distances must be finite and non-negative".into(),
        ));
    }
    let dtw: Vec<f64> = raw.values().map(|v| v.0).collect();
    let dfd: Vec<f64> = raw.values().map(|v| v.1).collect();
    let (ndtw, ndfd) = (min_max(&dtw), min_max(&dfd));
    let rows = raw
        .keys()
        .enumerate()
        .map(|(i, sign)| {
            let s_dtw = 1.0 / ndtw[i].max(SCORE_EPSILON);
            let s_dfd = 1.0 / ndfd[i].max(SCORE_EPSILON);
            FidelityRow {
                sign: sign.clone(),
                dtw: dtw[i],
                dfd: dfd[i],
                dtw_norm: ndtw[i],
                dfd_norm: ndfd[i],
                s_dtw,
                s_dfd,
                combined: 0.5 * (s_dtw + s_dfd),
            }
        })
        .collect();
    Ok(FidelityTable { rows })
}

pub fn score_signs(signs: &BTreeMap<String, SignGroups>) -> Result<FidelityTable> {
    if signs.len() < 2 {
        return Err(Error::invalid("fidelity ranking needs at least two signs"));
    }
    let raw: Vec<(String, (f64, f64))> = signs
        .par_iter()
        .map(|(k, g)| mean_cross_distances(g).map(|d| (k.clone(), d)))
        .collect::<Result<_>>()?;
    table_from_distances(&raw.into_iter().collect())
}

/// Signs by combined score, highest first; ties in lexicographic order.
pub fn select_top_k(table: &FidelityTable, k: usize) -> Result<Vec<String>> {
    if k == 0 || k > table.rows.len() {
        return Err(Error::invalid(format!(
            "k must lie in 1..={}, got {k}",
            table.rows.len()
        )));
    }
    let mut rows: Vec<&FidelityRow> = table.rows.iter().collect();
    rows.sort_by(|a, b| {
        b.combined
            .total_cmp(&a.combined)
            .then_with(|| a.sign.cmp(&b.sign))
    });
    Ok(rows.into_iter().take(k).map(|r| r.sign.clone()).collect())
}

impl FidelityTable {
    pub fn row(&self, sign: &str) -> Option<&FidelityRow> {
        self.rows.iter().find(|r| r.sign == sign)
    }

    /// CSV with one row per sign, in ranking order.
    pub fn to_csv(&self) -> String {
        let order = select_top_k(self, self.rows.len()).unwrap_or_default();
        let mut out = String::from("rank,sign,dtw,dfd,dtw_norm,dfd_norm,s_dtw,s_dfd,combined\n");
        for (rank, sign) in order.iter().enumerate() {
            if let Some(r) = self.row(sign) {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    rank + 1,
                    r.sign,
                    r.dtw,
                    r.dfd,
                    r.dtw_norm,
                    r.dfd_norm,
                    r.s_dtw,
                    r.s_dfd,
                    r.combined
                );
            }
        }
        out
    }
}
