//! Two-dimensional cell-averaging CFAR over range-Doppler frames.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Grid, RDFrame, Scale};
use crate::error::{Error, Result};

/// Guard and training extents per axis (cells on each side of the cell
/// under test) and the design false-alarm probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CfarParams {
    pub guard_range: usize,
    pub guard_doppler: usize,
    pub train_range: usize,
    pub train_doppler: usize,
    pub pfa: f64,
}

impl CfarParams {
    pub fn symmetric(guard: usize, train: usize, pfa: f64) -> Self {
        CfarParams {
            guard_range: guard,
            guard_doppler: guard,
            train_range: train,
            train_doppler: train,
            pfa,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.guard_range == 0 || self.guard_doppler == 0 {
            return Err(Error::invalid("CFAR guard cells must be >= 1"));
        }
        if self.train_range == 0 || self.train_doppler == 0 {
            return Err(Error::invalid("CFAR training cells must be >= 1"));
        }
        if !(self.pfa > 0.0 && self.pfa < 1.0) {
            return Err(Error::invalid(format!(
                "pfa must lie in (0, 1), got {}",
                self.pfa
            )));
        }
        Ok(())
    }

    fn half_range(&self) -> usize {
        self.guard_range + self.train_range
    }

    fn half_doppler(&self) -> usize {
        self.guard_doppler + self.train_doppler
    }

    /// Number of training cells in the window.
    pub fn n_train(&self) -> usize {
        (2 * self.half_range() + 1) * (2 * self.half_doppler() + 1)
            - (2 * self.guard_range + 1) * (2 * self.guard_doppler + 1)
    }
}

/// Square-law CA-CFAR threshold multiplier `N (pfa^(-1/N) - 1)`.
pub fn ca_cfar_alpha(n_train: usize, pfa: f64) -> f64 {
    let n = n_train as f64;
    n * (pfa.powf(-1.0 / n) - 1.0)
}

/// Detections over an RD frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CfarMask {
    /// `[range_bin][doppler_bin]`, true where a target was declared.
    pub detections: Vec<Vec<bool>>,
    /// Range rows with at least one detection.
    pub detected_range_bins: BTreeSet<usize>,
}

impl CfarMask {
    pub fn count(&self) -> usize {
        self.detections.iter().flatten().filter(|&&d| d).count()
    }
}

/// Summed-area table with a zero border row/column.
struct Integral {
    cols: usize,
    sums: Vec<f64>,
}

impl Integral {
    fn new(power: &Grid) -> Self {
        let (rows, cols) = power.shape();
        let w = cols + 1;
        let mut sums = vec![0.0; (rows + 1) * w];
        for r in 0..rows {
            let mut acc = 0.0;
            for c in 0..cols {
                acc += power.get(r, c);
                sums[(r + 1) * w + c + 1] = sums[r * w + c + 1] + acc;
            }
        }
        Integral { cols: w, sums }
    }

    /// Sum over rows `r0..=r1`, cols `c0..=c1`.
    fn rect(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> f64 {
        let w = self.cols;
        self.sums[(r1 + 1) * w + c1 + 1] - self.sums[r0 * w + c1 + 1] - self.sums[(r1 + 1) * w + c0]
            + self.sums[r0 * w + c0]
    }
}

/// Declares a cell detected when its power exceeds `alpha` times the mean
/// power of the training ring around it. Cells whose window would leave
/// the grid are never detected.
pub fn ca_cfar(frame: &RDFrame, params: &CfarParams) -> Result<CfarMask> {
    params.validate()?;
    if frame.scale != Scale::Linear {
        return Err(Error::invalid("CFAR operates on linear-magnitude frames"));
    }
    let (rows, cols) = frame.magnitude.shape();
    let (hr, hd) = (params.half_range(), params.half_doppler());
    if 2 * hr + 1 > rows || 2 * hd + 1 > cols {
        return Err(Error::invalid(format!(
            "CFAR window {}x{} exceeds the {}x{} grid",
            2 * hr + 1,
            2 * hd + 1,
            rows,
            cols
        )));
    }
    let power = frame.magnitude.map(|m| m * m);
    let table = Integral::new(&power);
    let n_train = params.n_train();
    let alpha = ca_cfar_alpha(n_train, params.pfa);
    let (gr, gd) = (params.guard_range, params.guard_doppler);

    let mut detections = vec![vec![false; cols]; rows];
    let mut detected_range_bins = BTreeSet::new();
    #[allow(clippy::needless_range_loop)]
    for r in hr..rows - hr {
        for c in hd..cols - hd {
            let outer = table.rect(r - hr, r + hr, c - hd, c + hd);
            let inner = table.rect(r - gr, r + gr, c - gd, c + gd);
            let noise = (outer - inner).max(0.0) / n_train as f64;
            if power.get(r, c) > alpha * noise {
                detections[r][c] = true;
                detected_range_bins.insert(r);
            }
        }
    }
    Ok(CfarMask {
        detections,
        detected_range_bins,
    })
}
