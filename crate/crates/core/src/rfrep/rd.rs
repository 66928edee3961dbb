use std::collections::BTreeSet;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::{Grid, RDFrame, Scale};
use crate::datacube::IQCube;
use crate::error::{Error, Result};
use crate::util::{shifted_index, unitary_fft};

/// Unitary range FFT of one chirp.
pub fn range_fft_pulse(planner: &mut FftPlanner<f64>, pulse: &[Complex64]) -> Vec<Complex64> {
    let mut buf = pulse.to_vec();
    unitary_fft(planner, &mut buf);
    buf
}

fn check_channel(cube: &IQCube, channel: usize) -> Result<()> {
    if channel >= cube.n_chan() {
        return Err(Error::invalid(format!(
            "channel {} out of range (cube has {})",
            channel,
            cube.n_chan()
        )));
    }
    Ok(())
}

/// Range-Doppler magnitude of CPI `cpi_index` on one channel: unitary FFT
/// over fast time, then over slow time, Doppler axis shifted to centre.
pub fn range_doppler_map(cube: &IQCube, cpi_index: usize, channel: usize) -> Result<RDFrame> {
    check_channel(cube, channel)?;
    if cpi_index >= cube.frame_count() {
        return Err(Error::invalid(format!(
            "CPI {} out of range (cube has {} complete CPIs)",
            cpi_index,
            cube.frame_count()
        )));
    }
    let n_fast = cube.n_fast();
    let per = cube.pulses_per_frame();
    let first = cpi_index * per;
    let mut planner = FftPlanner::new();

    // range_profiles[p][b]
    let profiles: Vec<Vec<Complex64>> = (first..first + per)
        .map(|p| range_fft_pulse(&mut planner, cube.pulse(p, channel)))
        .collect();

    let mut grid = Grid::zeros(n_fast, per);
    let mut slow = vec![Complex64::new(0.0, 0.0); per];
    for b in 0..n_fast {
        for (p, prof) in profiles.iter().enumerate() {
            slow[p] = prof[b];
        }
        unitary_fft(&mut planner, &mut slow);
        let row = grid.row_mut(b);
        for (k, z) in slow.iter().enumerate() {
            row[shifted_index(k, per)] = z.norm();
        }
    }
    let rate = cube.slow_time_rate_hz();
    Ok(RDFrame {
        magnitude: grid,
        range_bin_m: cube.config().range_bin_m(),
        doppler_bin_hz: rate / per as f64,
        timestamp_s: first as f64 / rate,
        scale: Scale::Linear,
    })
}

/// One range-Doppler frame per complete, non-overlapping CPI.
pub fn rd_video(cube: &IQCube, channel: usize) -> Result<Vec<RDFrame>> {
    check_channel(cube, channel)?;
    let frames = cube.frame_count();
    if frames == 0 {
        return Err(Error::invalid(format!(
            "cube has {} chirps, shorter than one CPI of {}",
            cube.n_slow(),
            cube.pulses_per_frame()
        )));
    }
    (0..frames)
        .into_par_iter()
        .map(|i| range_doppler_map(cube, i, channel))
        .collect()
}

/// Slow-time signal formed by summing the range-FFT outputs of the given
/// range bins for every chirp of one channel.
pub fn range_gated_signal(
    cube: &IQCube,
    range_bins: &BTreeSet<usize>,
    channel: usize,
) -> Result<Vec<Complex64>> {
    check_channel(cube, channel)?;
    if range_bins.is_empty() {
        return Err(Error::invalid("no range bins selected"));
    }
    if let Some(&b) = range_bins.iter().next_back() {
        if b >= cube.n_fast() {
            return Err(Error::invalid(format!("range bin {b} out of range")));
        }
    }
    let bins: Vec<usize> = range_bins.iter().copied().collect();
    let signal = (0..cube.n_slow())
        .into_par_iter()
        .map_init(FftPlanner::new, |planner, p| {
            let prof = range_fft_pulse(planner, cube.pulse(p, channel));
            bins.iter().map(|&b| prof[b]).sum::<Complex64>()
        })
        .collect();
    Ok(signal)
}
