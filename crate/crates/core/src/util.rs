use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Writes `bytes` to a temporary sibling file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

/// In-place forward FFT scaled by `1/sqrt(n)` so energy is preserved.
pub fn unitary_fft(planner: &mut FftPlanner<f64>, buf: &mut [Complex64]) {
    let n = buf.len();
    if n == 0 {
        return;
    }
    planner.plan_fft_forward(n).process(buf);
    let scale = 1.0 / (n as f64).sqrt();
    for z in buf.iter_mut() {
        *z *= scale;
    }
}

/// Index into an fftshifted spectrum of length `n` for FFT bin `k`.
#[inline]
pub fn shifted_index(k: usize, n: usize) -> usize {
    (k + n / 2) % n
}

/// Rotates a spectrum so the zero-frequency bin sits at index `n / 2`.
pub fn fftshift<T: Copy>(v: &[T]) -> Vec<T> {
    let n = v.len();
    (0..n).map(|i| v[(i + n - n / 2) % n]).collect()
}

/// Signed frequency of shifted index `i` for an `n`-point FFT at rate `fs`.
#[inline]
pub fn shifted_frequency(i: usize, n: usize, fs: f64) -> f64 {
    (i as f64 - (n / 2) as f64) * fs / n as f64
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Median of three values.
#[inline]
pub fn median3(a: f64, b: f64, c: f64) -> f64 {
    a.max(b).min(a.min(b).max(c))
}
