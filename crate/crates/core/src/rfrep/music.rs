//! MUSIC angle-of-arrival estimation per range bin.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::{range_fft_pulse, Grid, RAFrame};
use crate::datacube::{ChannelKind, IQCube};
use crate::error::{Error, Result};

/// Uniform scan grid from `lo_deg` to `hi_deg` inclusive, in radians.
pub fn angle_grid_deg(lo_deg: f64, hi_deg: f64, step_deg: f64) -> Vec<f64> {
    let n = ((hi_deg - lo_deg) / step_deg).round() as usize + 1;
    (0..n)
        .map(|i| (lo_deg + i as f64 * step_deg).to_radians())
        .collect()
}

/// ULA steering vector `a_m = exp(j m 2 pi d sin(theta) / lambda)`.
pub fn steering_vector(
    elements: usize,
    spacing_over_lambda: f64,
    theta: f64,
) -> DVector<Complex64> {
    let omega = 2.0 * std::f64::consts::PI * spacing_over_lambda * theta.sin();
    DVector::from_iterator(
        elements,
        (0..elements).map(|m| Complex64::from_polar(1.0, m as f64 * omega)),
    )
}

/// MUSIC pseudo-spectrum `1 / (a^H E_n E_n^H a)` over `angles` for a set of
/// array snapshots (each of length M). The covariance is diagonally loaded
/// with `1e-6 * trace / M`. All-zero snapshots give an all-zero spectrum.
pub fn music_pseudo_spectrum(
    snapshots: &[Vec<Complex64>],
    n_sources: usize,
    spacing_over_lambda: f64,
    angles: &[f64],
) -> Result<Vec<f64>> {
    let m = snapshots.first().map(|s| s.len()).unwrap_or(0);
    if m == 0 {
        return Err(Error::invalid(
            "MUSIC needs at least one non-empty snapshot",
        ));
    }
    if n_sources == 0 || n_sources >= m {
        return Err(Error::invalid(format!(
            "n_sources must lie in 1..{m}, got {n_sources}"
        )));
    }
    let mut cov = DMatrix::<Complex64>::zeros(m, m);
    for x in snapshots {
        if x.len() != m {
            return Err(Error::ShapeMismatch("snapshots differ in length".into()));
        }
        for i in 0..m {
            for j in 0..m {
                cov[(i, j)] += x[i] * x[j].conj();
            }
        }
    }
    cov /= Complex64::new(snapshots.len() as f64, 0.0);
    let trace: f64 = (0..m).map(|i| cov[(i, i)].re).sum();
    if !trace.is_finite() || cov.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("spatial covariance is not finite".into()));
    }
    if trace == 0.0 {
        return Ok(vec![0.0; angles.len()]);
    }
    let loading = 1e-6 * trace / m as f64;
    for i in 0..m {
        cov[(i, i)] += Complex64::new(loading, 0.0);
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let noise: Vec<DVector<Complex64>> = order[..m - n_sources]
        .iter()
        .map(|&k| eig.eigenvectors.column(k).into_owned())
        .collect();

    Ok(angles
        .iter()
        .map(|&theta| {
            let a = steering_vector(m, spacing_over_lambda, theta);
            let denom: f64 = noise.iter().map(|e| e.dotc(&a).norm_sqr()).sum();
            1.0 / denom.max(f64::MIN_POSITIVE)
        })
        .collect())
}

/// Conventional (delay-and-sum) beamformer power `a^H R a / M^2` over
/// `angles`. Its main-lobe width follows the aperture, unlike MUSIC.
pub fn bartlett_spectrum(
    snapshots: &[Vec<Complex64>],
    spacing_over_lambda: f64,
    angles: &[f64],
) -> Result<Vec<f64>> {
    let m = snapshots.first().map(|s| s.len()).unwrap_or(0);
    if m == 0 {
        return Err(Error::invalid(
            "beamforming needs at least one non-empty snapshot",
        ));
    }
    if snapshots.iter().any(|x| x.len() != m) {
        return Err(Error::ShapeMismatch("snapshots differ in length".into()));
    }
    let steer: Vec<DVector<Complex64>> = angles
        .iter()
        .map(|&t| steering_vector(m, spacing_over_lambda, t))
        .collect();
    let norm = (snapshots.len() * m * m) as f64;
    Ok(steer
        .iter()
        .map(|a| {
            snapshots
                .iter()
                .map(|x| {
                    a.iter()
                        .zip(x)
                        .map(|(ai, xi)| ai.conj() * xi)
                        .sum::<Complex64>()
                        .norm_sqr()
                })
                .sum::<f64>()
                / norm
        })
        .collect())
}

/// Array snapshots of range bin `bin` in CPI `cpi_index`, one per chirp,
/// over the channels `channels`.
pub fn range_bin_snapshots(
    cube: &IQCube,
    cpi_index: usize,
    bin: usize,
    channels: std::ops::Range<usize>,
) -> Result<Vec<Vec<Complex64>>> {
    if cpi_index >= cube.frame_count()
        || bin >= cube.n_fast()
        || channels.is_empty()
        || channels.end > cube.n_chan()
    {
        return Err(Error::invalid(
            "CPI, range bin or channel range out of bounds",
        ));
    }
    let per = cube.pulses_per_frame();
    let mut planner = FftPlanner::new();
    Ok((cpi_index * per..(cpi_index + 1) * per)
        .map(|p| {
            channels
                .clone()
                .map(|c| range_fft_pulse(&mut planner, cube.pulse(p, c))[bin])
                .collect()
        })
        .collect())
}

/// Range-angle frame for one CPI of a virtual-array cube. For each range
/// bin the spatial covariance is estimated from the CPI's chirps after the
/// range FFT.
pub fn music_range_angle(
    cube: &IQCube,
    cpi_index: usize,
    n_sources: usize,
    angle_grid: &[f64],
) -> Result<RAFrame> {
    if cube.kind() != ChannelKind::Virtual {
        return Err(Error::invalid(
            "MUSIC range-angle maps need a virtual-array cube",
        ));
    }
    if n_sources == 0 || n_sources >= cube.n_chan() {
        return Err(Error::invalid(format!(
            "n_sources must lie in 1..{}, got {}",
            cube.n_chan(),
            n_sources
        )));
    }
    if angle_grid.is_empty()
        || angle_grid.windows(2).any(|w| !(w[1] > w[0]))
        || angle_grid
            .iter()
            .any(|a| !(a.abs() < std::f64::consts::FRAC_PI_2))
    {
        return Err(Error::invalid(
            "angle grid must be strictly increasing inside (-pi/2, pi/2)",
        ));
    }
    if cpi_index >= cube.frame_count() {
        return Err(Error::invalid(format!("CPI {cpi_index} out of range")));
    }
    let per = cube.pulses_per_frame();
    let first = cpi_index * per;
    let n_chan = cube.n_chan();
    let n_fast = cube.n_fast();

    let mut planner = FftPlanner::new();
    // profiles[chan][pulse][bin]
    let profiles: Vec<Vec<Vec<Complex64>>> = (0..n_chan)
        .map(|c| {
            (first..first + per)
                .map(|p| range_fft_pulse(&mut planner, cube.pulse(p, c)))
                .collect()
        })
        .collect();

    let d_over_lambda = cube.config().element_spacing_m / cube.config().wavelength_m();
    let rows: Vec<Vec<f64>> = (0..n_fast)
        .into_par_iter()
        .map(|b| {
            let snapshots: Vec<Vec<Complex64>> = (0..per)
                .map(|p| (0..n_chan).map(|c| profiles[c][p][b]).collect())
                .collect();
            music_pseudo_spectrum(&snapshots, n_sources, d_over_lambda, angle_grid)
        })
        .collect::<Result<_>>()?;

    let mut grid = Grid::zeros(n_fast, angle_grid.len());
    for (b, row) in rows.iter().enumerate() {
        grid.row_mut(b).copy_from_slice(row);
    }
    Ok(RAFrame {
        magnitude: grid,
        angles_rad: angle_grid.to_vec(),
        range_bin_m: cube.config().range_bin_m(),
        timestamp_s: first as f64 / cube.slow_time_rate_hz(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snapshots_for(thetas: &[f64], m: usize, k: usize) -> Vec<Vec<Complex64>> {
        (0..k)
            .map(|t| {
                let mut x = vec![Complex64::new(0.0, 0.0); m];
                for (s, &th) in thetas.iter().enumerate() {
                    let a = steering_vector(m, 0.5, th);
                    // distinct per-source phase progressions keep sources incoherent
                    let g = Complex64::from_polar(
                        1.0,
                        0.7 * t as f64 * (s as f64 + 1.0) + 0.3 * s as f64,
                    );
                    for i in 0..m {
                        x[i] += a[i] * g;
                    }
                }
                // deterministic small perturbation standing in for noise
                for (i, xi) in x.iter_mut().enumerate() {
                    *xi += Complex64::new(
                        1e-3 * ((t * 7 + i * 13) as f64).sin(),
                        1e-3 * ((t * 3 + i * 5) as f64).cos(),
                    );
                }
                x
            })
            .collect()
    }

    #[test]
    fn single_source_peak_and_positivity() {
        let grid = angle_grid_deg(-60.0, 60.0, 0.5);
        let snaps = snapshots_for(&[20f64.to_radians()], 8, 64);
        let p = music_pseudo_spectrum(&snaps, 1, 0.5, &grid).unwrap();
        assert!(p.iter().all(|&v| v > 0.0 && v.is_finite()));
        let best = (0..p.len()).fold(0, |b, i| if p[i] > p[b] { i } else { b });
        assert!((grid[best].to_degrees() - 20.0).abs() <= 0.5);
    }

    #[test]
    fn global_phase_rotation_leaves_spectrum_unchanged() {
        let grid = angle_grid_deg(-60.0, 60.0, 1.0);
        let snaps = snapshots_for(&[-10f64.to_radians(), 25f64.to_radians()], 8, 64);
        let rot = Complex64::from_polar(1.0, 1.234);
        let rotated: Vec<Vec<Complex64>> = snaps
            .iter()
            .map(|s| s.iter().map(|z| z * rot).collect())
            .collect();
        let a = music_pseudo_spectrum(&snaps, 2, 0.5, &grid).unwrap();
        let b = music_pseudo_spectrum(&rotated, 2, 0.5, &grid).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0));
        }
    }

    #[test]
    fn zero_snapshots_and_bad_source_count() {
        let grid = angle_grid_deg(-10.0, 10.0, 5.0);
        let zeros = vec![vec![Complex64::new(0.0, 0.0); 4]; 8];
        assert_eq!(
            music_pseudo_spectrum(&zeros, 1, 0.5, &grid).unwrap(),
            vec![0.0; 5]
        );
        assert!(music_pseudo_spectrum(&zeros, 4, 0.5, &grid).is_err());
        let mut nan = zeros.clone();
        nan[0][0] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(
            music_pseudo_spectrum(&nan, 1, 0.5, &grid),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn bartlett_peaks_at_source_and_nulls_one_beamwidth_away() {
        let snaps: Vec<Vec<Complex64>> = (0..16)
            .map(|t| {
                steering_vector(8, 0.5, 0.0)
                    .iter()
                    .map(|a| a * Complex64::from_polar(1.0, 0.3 * t as f64))
                    .collect()
            })
            .collect();
        let null = (2.0f64 / 8.0).asin();
        let p = bartlett_spectrum(&snaps, 0.5, &[0.0, null]).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert!(p[1] < 1e-12);
        let s = range_bin_snapshots(
            &IQCube::zeros(
                crate::datacube::RadarConfig::compact(),
                ChannelKind::Physical,
                128,
            )
            .unwrap(),
            0,
            3,
            0..1,
        )
        .unwrap();
        assert_eq!((s.len(), s[0].len()), (128, 1));
    }
}
