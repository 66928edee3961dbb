use std::collections::BTreeSet;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{range_gated_signal, Grid, Spectrogram};
use crate::datacube::IQCube;
use crate::error::{Error, Result};
use crate::util::{hann, shifted_index, unitary_fft};

/// Squared STFT magnitude of a slow-time signal with a Hann window,
/// Doppler axis shifted to centre. Column `j` starts at sample `j * hop`.
pub fn spectrogram_of_signal(
    signal: &[Complex64],
    rate_hz: f64,
    window: usize,
    hop: usize,
) -> Result<Spectrogram> {
    if window == 0 || hop == 0 {
        return Err(Error::invalid("STFT window and hop must be positive"));
    }
    if window > signal.len() {
        return Err(Error::invalid(format!(
            "STFT window {} longer than the {}-sample signal",
            window,
            signal.len()
        )));
    }
    let n_time = (signal.len() - window) / hop + 1;
    let taper = hann(window);
    let mut planner = FftPlanner::new();
    let mut power = Grid::zeros(window, n_time);
    let mut buf = vec![Complex64::new(0.0, 0.0); window];
    let mut times = Vec::with_capacity(n_time);
    for j in 0..n_time {
        let start = j * hop;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = signal[start + i] * taper[i];
        }
        unitary_fft(&mut planner, &mut buf);
        for (k, z) in buf.iter().enumerate() {
            power.set(shifted_index(k, window), j, z.norm_sqr());
        }
        times.push((start as f64 + window as f64 / 2.0) / rate_hz);
    }
    Ok(Spectrogram {
        power,
        window_s: window as f64 / rate_hz,
        hop_s: hop as f64 / rate_hz,
        doppler_bin_hz: rate_hz / window as f64,
        times_s: times,
    })
}

/// Micro-Doppler spectrogram of one channel: range-FFT outputs of the
/// selected bins are summed per chirp, then transformed with a Hann STFT.
pub fn micro_doppler_spectrogram(
    cube: &IQCube,
    range_bins: &BTreeSet<usize>,
    window: usize,
    hop: usize,
    channel: usize,
) -> Result<Spectrogram> {
    if range_bins.is_empty() {
        return Err(Error::invalid("spectrogram needs at least one range bin"));
    }
    if window > cube.n_slow() {
        return Err(Error::invalid(format!(
            "STFT window {} exceeds the {} chirps in the cube",
            window,
            cube.n_slow()
        )));
    }
    let signal = range_gated_signal(cube, range_bins, channel)?;
    spectrogram_of_signal(&signal, cube.slow_time_rate_hz(), window, hop)
}
