//! CSV and PGM export of representation grids.
//!
//! CSV layout: one header line `# key=value key=value ...` carrying `kind`,
//! `rows`, `cols` and the axis scalings, then `rows` lines of `cols`
//! comma-separated values. Values are printed with Rust's shortest
//! round-trip formatting, so a reload reproduces every `f64` bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{Grid, RAFrame, RDFrame, Scale, Spectrogram};
use crate::error::{Error, Result};
use crate::util::write_atomic;

/// A parsed grid CSV: header fields plus the values.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCsv {
    pub meta: BTreeMap<String, String>,
    pub grid: Grid,
}

impl GridCsv {
    pub fn kind(&self) -> Option<&str> {
        self.meta.get("kind").map(String::as_str)
    }

    fn field(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Format {
                offset: 0,
                message: format!("header is missing `{key}`"),
            })
    }

    fn f64_field(&self, key: &str) -> Result<f64> {
        let raw = self.field(key)?;
        raw.parse().map_err(|_| Error::Format {
            offset: 0,
            message: format!("header field `{key}` is not a number: {raw:?}"),
        })
    }

    fn list_field(&self, key: &str) -> Result<Vec<f64>> {
        let raw = self.field(key)?;
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(';')
            .map(|s| {
                s.parse().map_err(|_| Error::Format {
                    offset: 0,
                    message: format!("header list `{key}` has a bad entry {s:?}"),
                })
            })
            .collect()
    }

    fn expect_kind(&self, kind: &str) -> Result<()> {
        match self.kind() {
            Some(k) if k == kind => Ok(()),
            other => Err(Error::Format {
                offset: 0,
                message: format!("expected a `{kind}` CSV, found kind {other:?}"),
            }),
        }
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

fn render(meta: &[(&str, String)], grid: &Grid) -> String {
    let mut out = String::from("#");
    for (k, v) in meta {
        let _ = write!(out, " {k}={v}");
    }
    let _ = write!(out, " rows={} cols={}", grid.rows(), grid.cols());
    out.push('\n');
    for r in 0..grid.rows() {
        let row = grid.row(r);
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

/// Parses the text of a grid CSV.
pub fn parse_grid_csv(text: &str) -> Result<GridCsv> {
    let mut offset = 0u64;
    let mut lines = text.split_inclusive('\n');
    let header = lines.next().ok_or_else(|| Error::Format {
        offset: 0,
        message: "empty file".into(),
    })?;
    let body = header
        .trim_end()
        .strip_prefix('#')
        .ok_or_else(|| Error::Format {
            offset: 0,
            message: "first line must be a `# key=value` header".into(),
        })?;
    let mut meta = BTreeMap::new();
    for token in body.split_whitespace() {
        let (k, v) = token.split_once('=').ok_or_else(|| Error::Format {
            offset: 0,
            message: format!("header token {token:?} is not key=value"),
        })?;
        meta.insert(k.to_string(), v.to_string());
    }
    offset += header.len() as u64;
    let dim = |key: &str| -> Result<usize> {
        meta.get(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Format {
                offset: 0,
                message: format!("header needs an integer `{key}`"),
            })
    };
    let (rows, cols) = (dim("rows")?, dim("cols")?);
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for line in lines {
        let trimmed = line.trim_end();
        if trimmed.is_empty() {
            offset += line.len() as u64;
            continue;
        }
        let before = data.len();
        for cell in trimmed.split(',') {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Format {
                offset,
                message: format!("not a number: {cell:?}"),
            })?;
            data.push(v);
        }
        if data.len() - before != cols {
            return Err(Error::Format {
                offset,
                message: format!(
                    "row has {} values, header says {}",
                    data.len() - before,
                    cols
                ),
            });
        }
        seen += 1;
        offset += line.len() as u64;
    }
    if seen != rows {
        return Err(Error::Format {
            offset,
            message: format!("found {seen} rows, header says {rows}"),
        });
    }
    Ok(GridCsv {
        meta,
        grid: Grid::from_vec(rows, cols, data)?,
    })
}

pub fn read_grid_csv(path: impl AsRef<Path>) -> Result<GridCsv> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_grid_csv(&text)
}

pub fn write_rd_csv(frame: &RDFrame, path: impl AsRef<Path>) -> Result<()> {
    let scale = match frame.scale {
        Scale::Linear => "linear",
        Scale::Db => "db",
    };
    let meta = [
        ("kind", "rd".to_string()),
        ("scale", scale.to_string()),
        ("range_bin_m", frame.range_bin_m.to_string()),
        ("doppler_bin_hz", frame.doppler_bin_hz.to_string()),
        ("timestamp_s", frame.timestamp_s.to_string()),
    ];
    write_atomic(path.as_ref(), render(&meta, &frame.magnitude).as_bytes())
}

pub fn read_rd_csv(path: impl AsRef<Path>) -> Result<RDFrame> {
    let csv = read_grid_csv(path)?;
    csv.expect_kind("rd")?;
    let scale = match csv.field("scale")? {
        "linear" => Scale::Linear,
        "db" => Scale::Db,
        other => {
            return Err(Error::Format {
                offset: 0,
                message: format!("unknown scale {other:?}"),
            })
        }
    };
    Ok(RDFrame {
        range_bin_m: csv.f64_field("range_bin_m")?,
        doppler_bin_hz: csv.f64_field("doppler_bin_hz")?,
        timestamp_s: csv.f64_field("timestamp_s")?,
        scale,
        magnitude: csv.grid,
    })
}

pub fn write_spectrogram_csv(spec: &Spectrogram, path: impl AsRef<Path>) -> Result<()> {
    let meta = [
        ("kind", "spectrogram".to_string()),
        ("window_s", spec.window_s.to_string()),
        ("hop_s", spec.hop_s.to_string()),
        ("doppler_bin_hz", spec.doppler_bin_hz.to_string()),
        ("times_s", join(&spec.times_s)),
    ];
    write_atomic(path.as_ref(), render(&meta, &spec.power).as_bytes())
}

pub fn read_spectrogram_csv(path: impl AsRef<Path>) -> Result<Spectrogram> {
    let csv = read_grid_csv(path)?;
    csv.expect_kind("spectrogram")?;
    let times_s = csv.list_field("times_s")?;
    if times_s.len() != csv.grid.cols() {
        return Err(Error::Format {
            offset: 0,
            message: format!("{} times for {} columns", times_s.len(), csv.grid.cols()),
        });
    }
    Ok(Spectrogram {
        window_s: csv.f64_field("window_s")?,
        hop_s: csv.f64_field("hop_s")?,
        doppler_bin_hz: csv.f64_field("doppler_bin_hz")?,
        times_s,
        power: csv.grid,
    })
}

pub fn write_ra_csv(frame: &RAFrame, path: impl AsRef<Path>) -> Result<()> {
    let meta = [
        ("kind", "ra".to_string()),
        ("range_bin_m", frame.range_bin_m.to_string()),
        ("timestamp_s", frame.timestamp_s.to_string()),
        ("angles_rad", join(&frame.angles_rad)),
    ];
    write_atomic(path.as_ref(), render(&meta, &frame.magnitude).as_bytes())
}

pub fn read_ra_csv(path: impl AsRef<Path>) -> Result<RAFrame> {
    let csv = read_grid_csv(path)?;
    csv.expect_kind("ra")?;
    let angles_rad = csv.list_field("angles_rad")?;
    if angles_rad.len() != csv.grid.cols() {
        return Err(Error::Format {
            offset: 0,
            message: format!(
                "{} angles for {} columns",
                angles_rad.len(),
                csv.grid.cols()
            ),
        });
    }
    Ok(RAFrame {
        range_bin_m: csv.f64_field("range_bin_m")?,
        timestamp_s: csv.f64_field("timestamp_s")?,
        angles_rad,
        magnitude: csv.grid,
    })
}

/// Binary 8-bit PGM, values scaled so the grid maximum maps to 255.
pub fn write_pgm(grid: &Grid, path: impl AsRef<Path>) -> Result<()> {
    let peak = grid.max();
    let mut out = format!("P5\n{} {}\n255\n", grid.cols(), grid.rows()).into_bytes();
    out.extend(grid.as_slice().iter().map(|&v| {
        if peak > 0.0 && v > 0.0 {
            (v / peak * 255.0).round().clamp(0.0, 255.0) as u8
        } else {
            0
        }
    }));
    write_atomic(path.as_ref(), &out)
}
