//! Upper/lower micro-Doppler envelopes from percentile points of each
//! spectrogram column's cumulative distribution, and the absolute distance
//! vector between them.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rfrep::Spectrogram;
use crate::util::{median3, write_atomic};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeParams {
    pub p_low: f64,
    pub p_high: f64,
    /// Apply a 3-tap median filter along time to both envelopes.
    pub median_smoothing: bool,
}

impl Default for EnvelopeParams {
    fn default() -> Self {
        EnvelopeParams {
            p_low: 0.025,
            p_high: 0.975,
            median_smoothing: true,
        }
    }
}

impl EnvelopeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_low > 0.0 && self.p_low < self.p_high && self.p_high < 1.0) {
            return Err(Error::invalid(format!(
                "percentiles must satisfy 0 < p_low < p_high < 1, got {} and {}",
                self.p_low, self.p_high
            )));
        }
        Ok(())
    }
}

/// Upper and lower envelope frequencies (Hz) per time bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePair {
    pub times_s: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
}

impl EnvelopePair {
    pub fn new(times_s: Vec<f64>, upper: Vec<f64>, lower: Vec<f64>) -> Result<Self> {
        if times_s.len() != upper.len() || upper.len() != lower.len() {
            return Err(Error::ShapeMismatch(format!(
                "envelope lengths differ: {} times, {} upper, {} lower",
                times_s.len(),
                upper.len(),
                lower.len()
            )));
        }
        if let Some(t) = (0..upper.len()).find(|&t| !(upper[t] >= lower[t])) {
            return Err(Error::invalid(format!(
                "upper envelope below lower at bin {t}: {} < {}",
                upper[t], lower[t]
            )));
        }
        Ok(EnvelopePair {
            times_s,
            upper,
            lower,
        })
    }

    pub fn len(&self) -> usize {
        self.upper.len()
    }

    pub fn is_empty(&self) -> bool {
        self.upper.is_empty()
    }

    /// Time spacing of consecutive bins (0 for fewer than two bins).
    pub fn step_s(&self) -> f64 {
        if self.times_s.len() < 2 {
            0.0
        } else {
            self.times_s[1] - self.times_s[0]
        }
    }

    /// 3-tap median along time with replicated ends.
    pub fn smoothed(&self) -> EnvelopePair {
        EnvelopePair {
            times_s: self.times_s.clone(),
            upper: median_filter(&self.upper),
            lower: median_filter(&self.lower),
        }
    }
}

fn median_filter(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let a = x[i.saturating_sub(1)];
            let c = x[(i + 1).min(n - 1)];
            median3(a, x[i], c)
        })
        .collect()
}

/// Per-step absolute envelope spread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceVector {
    pub values: Vec<f64>,
    pub normalized: bool,
    /// Duration of one time step, seconds.
    pub step_s: f64,
}

impl DistanceVector {
    pub fn new(values: Vec<f64>, step_s: f64) -> Result<Self> {
        if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::invalid(
                "distance values must be finite and non-negative",
            ));
        }
        if !(step_s > 0.0) {
            return Err(Error::invalid("distance step must be positive"));
        }
        Ok(DistanceVector {
            values,
            normalized: false,
            step_s,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Divides by the maximum; an all-zero vector stays all-zero.
    pub fn normalized(&self) -> DistanceVector {
        let peak = self.values.iter().copied().fold(0.0, f64::max);
        let values = if peak > 0.0 {
            self.values.iter().map(|v| v / peak).collect()
        } else {
            self.values.clone()
        };
        DistanceVector {
            values,
            normalized: true,
            step_s: self.step_s,
        }
    }
}

/// Frequency at which each column's cumulative distribution (summed from
/// the most negative Doppler bin) first reaches `p_low` and `p_high`.
/// All-zero columns give 0 Hz for both envelopes.
pub fn extract_envelopes(spec: &Spectrogram, p_low: f64, p_high: f64) -> Result<EnvelopePair> {
    EnvelopeParams {
        p_low,
        p_high,
        median_smoothing: false,
    }
    .validate()?;
    let n_dop = spec.n_doppler();
    let mut upper = Vec::with_capacity(spec.n_time());
    let mut lower = Vec::with_capacity(spec.n_time());
    let mut col = vec![0.0; n_dop];
    for j in 0..spec.n_time() {
        for (i, c) in col.iter_mut().enumerate() {
            *c = spec.power.get(i, j);
        }
        let total: f64 = col.iter().sum();
        if !total.is_finite() {
            return Err(Error::Numerical(format!(
                "spectrogram column {j} is not finite"
            )));
        }
        if total <= 0.0 {
            upper.push(0.0);
            lower.push(0.0);
            continue;
        }
        let (lo_t, hi_t) = (p_low * total, p_high * total);
        let (mut lo, mut hi) = (None, None);
        let mut acc = 0.0;
        for (i, &c) in col.iter().enumerate() {
            acc += c;
            if lo.is_none() && acc >= lo_t {
                lo = Some(i);
            }
            if acc >= hi_t {
                hi = Some(i);
                break;
            }
        }
        // Rounding can leave the running sum a hair under p_high * total.
        let last_nonzero = col.iter().rposition(|&c| c > 0.0).unwrap_or(n_dop - 1);
        let hi = hi.unwrap_or(last_nonzero);
        let lo = lo.unwrap_or(hi);
        upper.push(spec.doppler_hz(hi));
        lower.push(spec.doppler_hz(lo));
    }
    EnvelopePair::new(spec.times_s.clone(), upper, lower)
}

/// Envelopes with the configured percentiles and optional smoothing.
pub fn envelopes_with(spec: &Spectrogram, params: &EnvelopeParams) -> Result<EnvelopePair> {
    let env = extract_envelopes(spec, params.p_low, params.p_high)?;
    Ok(if params.median_smoothing {
        env.smoothed()
    } else {
        env
    })
}

/// `v[t] = |u[t] - l[t]|`, optionally divided by its maximum.
pub fn abs_distance(env: &EnvelopePair, normalize: bool) -> DistanceVector {
    let step = env.step_s();
    let raw = DistanceVector {
        values: env
            .upper
            .iter()
            .zip(&env.lower)
            .map(|(u, l)| (u - l).abs())
            .collect(),
        normalized: false,
        step_s: if step > 0.0 { step } else { 1.0 },
    };
    if normalize {
        raw.normalized()
    } else {
        raw
    }
}

const ENVELOPE_HEADER: &str = "time_s,upper_hz,lower_hz";
const DISTANCE_HEADER: &str = "time_s,value";

fn parse_rows(text: &str, header: &str, width: usize) -> Result<Vec<Vec<f64>>> {
    let mut offset = 0u64;
    let mut lines = text.split_inclusive('\n');
    let first = lines.next().unwrap_or("");
    if first.trim_end() != header {
        return Err(Error::Format {
            offset: 0,
            message: format!("expected header `{header}`"),
        });
    }
    offset += first.len() as u64;
    let mut rows = Vec::new();
    for line in lines {
        let t = line.trim_end();
        if !t.is_empty() {
            let row: Vec<f64> = t
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Format {
                    offset,
                    message: format!("bad numeric row {t:?}"),
                })?;
            if row.len() != width {
                return Err(Error::Format {
                    offset,
                    message: format!("expected {width} columns, found {}", row.len()),
                });
            }
            rows.push(row);
        }
        offset += line.len() as u64;
    }
    Ok(rows)
}

pub fn envelopes_to_csv(env: &EnvelopePair) -> String {
    let mut out = format!("{ENVELOPE_HEADER}\n");
    for t in 0..env.len() {
        let _ = writeln!(out, "{},{},{}", env.times_s[t], env.upper[t], env.lower[t]);
    }
    out
}

pub fn parse_envelopes_csv(text: &str) -> Result<EnvelopePair> {
    let rows = parse_rows(text, ENVELOPE_HEADER, 3)?;
    EnvelopePair::new(
        rows.iter().map(|r| r[0]).collect(),
        rows.iter().map(|r| r[1]).collect(),
        rows.iter().map(|r| r[2]).collect(),
    )
}

pub fn write_envelopes_csv(env: &EnvelopePair, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), envelopes_to_csv(env).as_bytes())
}

pub fn read_envelopes_csv(path: impl AsRef<Path>) -> Result<EnvelopePair> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_envelopes_csv(&text)
}

/// Writes `time_s,value` rows; `times_s` must match the vector length.
pub fn write_distance_csv(
    v: &DistanceVector,
    times_s: &[f64],
    path: impl AsRef<Path>,
) -> Result<()> {
    if times_s.len() != v.len() {
        return Err(Error::ShapeMismatch("distance vector vs time axis".into()));
    }
    let mut out = format!("{DISTANCE_HEADER}\n");
    for (t, x) in times_s.iter().zip(&v.values) {
        let _ = writeln!(out, "{t},{x}");
    }
    write_atomic(path.as_ref(), out.as_bytes())
}

/// Reads `time_s,value` rows back as `(times, values)`.
pub fn read_distance_csv(path: impl AsRef<Path>) -> Result<(Vec<f64>, Vec<f64>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let rows = parse_rows(&text, DISTANCE_HEADER, 2)?;
    Ok((
        rows.iter().map(|r| r[0]).collect(),
        rows.iter().map(|r| r[1]).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rfrep::Grid;
    use proptest::prelude::*;

    fn spec_from_columns(cols: &[Vec<f64>]) -> Spectrogram {
        let n_dop = cols[0].len();
        let mut g = Grid::zeros(n_dop, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for (i, &v) in c.iter().enumerate() {
                g.set(i, j, v);
            }
        }
        Spectrogram {
            power: g,
            window_s: 0.2,
            hop_s: 0.2,
            doppler_bin_hz: 10.0,
            times_s: (0..cols.len()).map(|j| 0.1 + 0.2 * j as f64).collect(),
        }
    }

    #[test]
    fn single_bin_column_collapses_both_envelopes() {
        let mut col = vec![0.0; 64];
        col[32 + 10] = 5.0;
        let e = extract_envelopes(&spec_from_columns(&[col]), 0.025, 0.975).unwrap();
        assert_eq!((e.upper[0], e.lower[0]), (100.0, 100.0));
    }

    #[test]
    fn uniform_column_envelopes_near_95_percent() {
        // uniform over bins -20..=20 (f = 200 Hz)
        let col: Vec<f64> = (0..64)
            .map(|i| if (12..=52).contains(&i) { 1.0 } else { 0.0 })
            .collect();
        let e = extract_envelopes(&spec_from_columns(&[col]), 0.025, 0.975).unwrap();
        assert!((e.upper[0] - 190.0).abs() <= 10.0, "{}", e.upper[0]);
        assert!((e.lower[0] + 190.0).abs() <= 10.0, "{}", e.lower[0]);
    }

    #[test]
    fn zero_spectrogram_and_bad_percentiles() {
        let s = spec_from_columns(&[vec![0.0; 8], vec![0.0; 8]]);
        let e = extract_envelopes(&s, 0.025, 0.975).unwrap();
        assert_eq!(e.upper, vec![0.0, 0.0]);
        assert_eq!(e.lower, vec![0.0, 0.0]);
        assert!(extract_envelopes(&s, 0.5, 0.5).is_err());
        assert!(extract_envelopes(&s, 0.0, 0.5).is_err());
    }

    #[test]
    fn distance_examples() {
        let e = EnvelopePair::new(vec![0.0, 0.2], vec![10.0, 20.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(abs_distance(&e, true).values, vec![0.5, 1.0]);
        let same = EnvelopePair::new(vec![0.0, 0.2], vec![3.0, -4.0], vec![3.0, -4.0]).unwrap();
        assert_eq!(abs_distance(&same, true).values, vec![0.0, 0.0]);
    }

    #[test]
    fn median_keeps_ends_and_removes_spikes() {
        assert_eq!(
            median_filter(&[1.0, 9.0, 1.0, 1.0]),
            vec![1.0, 1.0, 1.0, 1.0]
        );
        assert_eq!(median_filter(&[5.0]), vec![5.0]);
    }

    #[test]
    fn csv_round_trip() {
        let e = EnvelopePair::new(
            vec![0.1, 0.30000000000000004],
            vec![12.5, 1e-9],
            vec![-3.0, -1e-9],
        )
        .unwrap();
        assert_eq!(parse_envelopes_csv(&envelopes_to_csv(&e)).unwrap(), e);
        assert!(matches!(
            parse_envelopes_csv("t,u,l\n"),
            Err(Error::Format { .. })
        ));
        assert!(matches!(
            parse_envelopes_csv("time_s,upper_hz,lower_hz\n0,1\n"),
            Err(Error::Format { offset: 25, .. })
        ));
    }

    fn columns() -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(0.0f64..10.0, 16), 1..6)
    }

    proptest! {
        #[test]
        fn upper_never_below_lower(cols in columns(), a in 0.01f64..0.49, b in 0.51f64..0.99) {
            let e = extract_envelopes(&spec_from_columns(&cols), a, b).unwrap();
            for t in 0..e.len() {
                prop_assert!(e.upper[t] >= e.lower[t]);
            }
        }

        #[test]
        fn raising_p_high_never_lowers_upper(cols in columns(), b1 in 0.5f64..0.98, d in 0.0f64..0.01) {
            let s = spec_from_columns(&cols);
            let e1 = extract_envelopes(&s, 0.1, b1).unwrap();
            let e2 = extract_envelopes(&s, 0.1, b1 + d).unwrap();
            for t in 0..e1.len() {
                prop_assert!(e2.upper[t] >= e1.upper[t]);
            }
        }

        #[test]
        fn swapping_envelopes_keeps_distance(u in prop::collection::vec(-100.0f64..100.0, 1..20)) {
            let l: Vec<f64> = u.iter().map(|x| x * 0.5 - 3.0).collect();
            let t: Vec<f64> = (0..u.len()).map(|i| 0.2 * i as f64).collect();
            let a = EnvelopePair { times_s: t.clone(), upper: u.clone(), lower: l.clone() };
            let b = EnvelopePair { times_s: t, upper: l, lower: u };
            prop_assert_eq!(abs_distance(&a, false), abs_distance(&b, false));
        }

        #[test]
        fn normalized_distance_ignores_spectrogram_scale(cols in columns(), e in -8i32..8) {
            // power-of-two scaling keeps the cumulative sums exact
            let k = 2f64.powi(e);
            let s = spec_from_columns(&cols);
            let a = abs_distance(&extract_envelopes(&s, 0.025, 0.975).unwrap(), true);
            let b = abs_distance(&extract_envelopes(&s.scaled(k), 0.025, 0.975).unwrap(), true);
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
