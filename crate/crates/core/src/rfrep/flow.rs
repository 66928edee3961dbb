//! Horn-Schunck dense optical flow between consecutive range-angle frames
//! and the motion-weighted enhancement of RA maps.

use serde::{Deserialize, Serialize};

use super::{Grid, RAFrame};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HornSchunckParams {
    /// Smoothness weight.
    pub alpha: f64,
    pub iterations: usize,
}

impl Default for HornSchunckParams {
    fn default() -> Self {
        HornSchunckParams {
            alpha: 1.0,
            iterations: 100,
        }
    }
}

/// Replicate-border read.
#[inline]
fn at(g: &Grid, r: isize, c: isize) -> f64 {
    let r = r.clamp(0, g.rows() as isize - 1) as usize;
    let c = c.clamp(0, g.cols() as isize - 1) as usize;
    g.get(r, c)
}

/// Weighted neighbourhood mean: 1/6 for edge neighbours, 1/12 for corners.
fn local_mean(g: &Grid) -> Grid {
    let mut out = Grid::zeros(g.rows(), g.cols());
    for r in 0..g.rows() as isize {
        for c in 0..g.cols() as isize {
            let edges = at(g, r - 1, c) + at(g, r + 1, c) + at(g, r, c - 1) + at(g, r, c + 1);
            let corners = at(g, r - 1, c - 1)
                + at(g, r - 1, c + 1)
                + at(g, r + 1, c - 1)
                + at(g, r + 1, c + 1);
            out.set(r as usize, c as usize, edges / 6.0 + corners / 12.0);
        }
    }
    out
}

/// Horn-Schunck flow between two equally shaped frames; returns the
/// per-pixel flow magnitude `sqrt(u^2 + v^2)`. Derivatives use the
/// 2x2x2 first-difference cube and the solver runs Jacobi iterations.
pub fn horn_schunck_flow(
    prev: &RAFrame,
    next: &RAFrame,
    params: &HornSchunckParams,
) -> Result<Grid> {
    horn_schunck_grid(&prev.magnitude, &next.magnitude, params)
}

pub(crate) fn horn_schunck_grid(a: &Grid, b: &Grid, params: &HornSchunckParams) -> Result<Grid> {
    a.check_same_shape(b, "optical flow frames")?;
    if !(params.alpha > 0.0) {
        return Err(Error::invalid("Horn-Schunck alpha must be positive"));
    }
    if params.iterations == 0 {
        return Err(Error::invalid("Horn-Schunck needs at least one iteration"));
    }
    let (rows, cols) = a.shape();
    let mut ex = Grid::zeros(rows, cols);
    let mut ey = Grid::zeros(rows, cols);
    let mut et = Grid::zeros(rows, cols);
    for r in 0..rows as isize {
        for c in 0..cols as isize {
            let gx =
                |g: &Grid| at(g, r, c + 1) - at(g, r, c) + at(g, r + 1, c + 1) - at(g, r + 1, c);
            let gy =
                |g: &Grid| at(g, r + 1, c) - at(g, r, c) + at(g, r + 1, c + 1) - at(g, r, c + 1);
            let sum =
                |g: &Grid| at(g, r, c) + at(g, r + 1, c) + at(g, r, c + 1) + at(g, r + 1, c + 1);
            let (ru, cu) = (r as usize, c as usize);
            ex.set(ru, cu, 0.25 * (gx(a) + gx(b)));
            ey.set(ru, cu, 0.25 * (gy(a) + gy(b)));
            et.set(ru, cu, 0.25 * (sum(b) - sum(a)));
        }
    }

    let alpha2 = params.alpha * params.alpha;
    let mut u = Grid::zeros(rows, cols);
    let mut v = Grid::zeros(rows, cols);
    for _ in 0..params.iterations {
        let ub = local_mean(&u);
        let vb = local_mean(&v);
        for i in 0..rows * cols {
            let (gx, gy, gt) = (ex.as_slice()[i], ey.as_slice()[i], et.as_slice()[i]);
            let (um, vm) = (ub.as_slice()[i], vb.as_slice()[i]);
            let k = (gx * um + gy * vm + gt) / (alpha2 + gx * gx + gy * gy);
            u.as_mut_slice()[i] = um - gx * k;
            v.as_mut_slice()[i] = vm - gy * k;
        }
    }
    Grid::from_vec(
        rows,
        cols,
        u.as_slice()
            .iter()
            .zip(v.as_slice())
            .map(|(x, y)| x.hypot(*y))
            .collect(),
    )
}

/// Rescales a pair of frames jointly so their common maximum is 1.
pub fn normalize_pair(prev: &RAFrame, next: &RAFrame) -> (RAFrame, RAFrame) {
    let peak = prev.magnitude.max().max(next.magnitude.max());
    let k = if peak > 0.0 { 1.0 / peak } else { 1.0 };
    let scale = |f: &RAFrame| RAFrame {
        magnitude: f.magnitude.map(|v| v * k),
        ..f.clone()
    };
    (scale(prev), scale(next))
}

/// Element-wise product of an RA frame with a flow-magnitude grid.
pub fn enhance_ra(frame: &RAFrame, flow: &Grid) -> Result<RAFrame> {
    frame.magnitude.check_same_shape(flow, "RA frame vs flow")?;
    let data = frame
        .magnitude
        .as_slice()
        .iter()
        .zip(flow.as_slice())
        .map(|(a, b)| a * b)
        .collect();
    Ok(RAFrame {
        magnitude: Grid::from_vec(flow.rows(), flow.cols(), data)?,
        ..frame.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ra(g: Grid) -> RAFrame {
        let cols = g.cols();
        RAFrame {
            magnitude: g,
            angles_rad: (0..cols).map(|i| -0.5 + i as f64 * 0.01).collect(),
            range_bin_m: 1.0,
            timestamp_s: 0.0,
        }
    }

    fn blob(rows: usize, cols: usize, r: usize, c: usize) -> Grid {
        let mut g = Grid::zeros(rows, cols);
        g.set(r, c, 1.0);
        g
    }

    #[test]
    fn identical_frames_have_zero_flow() {
        let a = ra(blob(12, 12, 5, 5));
        let f = horn_schunck_flow(&a, &a, &HornSchunckParams::default()).unwrap();
        assert!(f.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_frames_have_zero_flow() {
        let a = ra(Grid::filled(8, 8, 2.0));
        let b = ra(Grid::filled(8, 8, 5.0));
        let f = horn_schunck_flow(&a, &b, &HornSchunckParams::default()).unwrap();
        assert!(f.as_slice().iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn shifted_blob_flow_is_local() {
        let a = ra(blob(48, 48, 20, 24));
        let b = ra(blob(48, 48, 21, 24));
        let f = horn_schunck_flow(&a, &b, &HornSchunckParams::default()).unwrap();
        let (r, c) = f.argmax();
        assert!(
            (r as isize - 20).abs() <= 2 && (c as isize - 24).abs() <= 2,
            "peak at {r},{c}"
        );
        let far = f
            .get(0, 0)
            .max(f.get(47, 47))
            .max(f.get(0, 47))
            .max(f.get(47, 0));
        assert!(far < 1e-2 * f.max(), "far {far} max {}", f.max());
    }

    #[test]
    fn shape_and_parameter_errors() {
        let a = ra(Grid::zeros(4, 4));
        let b = ra(Grid::zeros(4, 5));
        assert!(horn_schunck_flow(&a, &b, &HornSchunckParams::default()).is_err());
        let bad = HornSchunckParams {
            alpha: 0.0,
            iterations: 1,
        };
        assert!(horn_schunck_flow(&a, &a, &bad).is_err());
        assert!(enhance_ra(&a, &Grid::zeros(5, 4)).is_err());
    }

    #[test]
    fn enhancement_identity_zero_and_homogeneity() {
        let mut g = Grid::zeros(3, 3);
        g.set(1, 2, 4.0);
        g.set(0, 0, 1.5);
        let f = ra(g.clone());
        assert_eq!(
            enhance_ra(&f, &Grid::filled(3, 3, 1.0)).unwrap().magnitude,
            g
        );
        assert!(enhance_ra(&f, &Grid::zeros(3, 3))
            .unwrap()
            .magnitude
            .as_slice()
            .iter()
            .all(|&v| v == 0.0));
        let flow = Grid::from_vec(3, 3, (0..9).map(|i| i as f64 * 0.1).collect()).unwrap();
        let once = enhance_ra(&f, &flow).unwrap();
        let thrice = enhance_ra(&f, &flow.map(|v| 3.0 * v)).unwrap();
        for (x, y) in once
            .magnitude
            .as_slice()
            .iter()
            .zip(thrice.magnitude.as_slice())
        {
            assert!((3.0 * x - y).abs() < 1e-12);
        }
    }
}
