//! On-disk artifacts the commands exchange: channel-data and envelope-image
//! containers, PGM images, and CSV tables.
//!
//! Both containers are record files in the shared tensor format. Floating
//! metadata that must survive a round trip exactly — sample rate, grid axes,
//! steering angles, focal-law delays — travels in the plain-text header,
//! rendered with Rust's shortest-exact float formatting; bulk samples are
//! stored as the container's 32-bit floats.

use std::io::Write as _;
use std::path::Path;

use usbf_core::beamform::{SectorGrid, SectorImage};
use usbf_core::tensor::{parse_header, read_records, render_header, write_records, Tensor};
use usbf_core::wavesim::{PaChannelData, SaChannelData, StaChannelData, Technique};
use usbf_core::{Error, Result};

/// Channel data of any technique, as written by `simulate` and read by
/// `reconstruct`.
#[derive(Debug, Clone)]
pub enum ChannelDataFile {
    Sa(SaChannelData),
    Sta(StaChannelData),
    Pa(PaChannelData),
}

impl ChannelDataFile {
    pub fn technique(&self) -> Technique {
        match self {
            ChannelDataFile::Sa(_) => Technique::Sa,
            ChannelDataFile::Sta(_) => Technique::Sta,
            ChannelDataFile::Pa(_) => Technique::Pa,
        }
    }

    pub fn fs(&self) -> f64 {
        match self {
            ChannelDataFile::Sa(d) => d.fs,
            ChannelDataFile::Sta(d) => d.fs,
            ChannelDataFile::Pa(d) => d.fs,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut pairs = vec![
            ("kind", "channel_data".to_string()),
            ("technique", self.technique().to_string()),
            ("fs", format!("{}", self.fs())),
        ];
        let record = match self {
            ChannelDataFile::Sa(d) => {
                Tensor::from_slice(&[d.n_channels, d.n_time], &f32_of(&d.samples))?
            }
            ChannelDataFile::Sta(d) => {
                Tensor::from_slice(&[d.n_tx, d.n_rx, d.n_time], &f32_of(&d.samples))?
            }
            ChannelDataFile::Pa(d) => {
                pairs.push(("line_angles", join_f64(&d.line_angles)));
                pairs.push(("tx_delays", join_f64(&d.tx_delays)));
                Tensor::from_slice(&[d.n_lines, d.n_rx, d.n_time], &f32_of(&d.samples))?
            }
        };
        write_records(path, &render_header(&pairs), &[record])
    }

    pub fn load(path: &Path) -> Result<ChannelDataFile> {
        let file = read_records(path)?;
        let header = HeaderMap::new(&file.header)?;
        header.expect_kind("channel_data")?;
        let technique: Technique = header.get("technique")?.parse()?;
        let fs: f64 = header.get_f64("fs")?;
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::Format {
                offset: 0,
                message: format!("channel data header has invalid fs {fs}"),
            });
        }
        if file.records.len() != 1 {
            return Err(Error::Format {
                offset: 0,
                message: format!("channel data needs 1 record, found {}", file.records.len()),
            });
        }
        match technique {
            Technique::Sa => {
                let [n_channels, n_time] = dims2(&file.records[0], "samples")?;
                Ok(ChannelDataFile::Sa(SaChannelData {
                    fs,
                    n_channels,
                    n_time,
                    samples: f64_of(&file.records[0].data),
                }))
            }
            Technique::Sta => {
                let [n_tx, n_rx, n_time] = dims3(&file.records[0], "samples")?;
                Ok(ChannelDataFile::Sta(StaChannelData {
                    fs,
                    n_tx,
                    n_rx,
                    n_time,
                    samples: f64_of(&file.records[0].data),
                }))
            }
            Technique::Pa => {
                let [n_lines, n_rx, n_time] = dims3(&file.records[0], "samples")?;
                let line_angles = split_f64(header.get("line_angles")?, "line_angles")?;
                let tx_delays = split_f64(header.get("tx_delays")?, "tx_delays")?;
                if line_angles.len() != n_lines {
                    return Err(Error::Format {
                        offset: 0,
                        message: format!(
                            "header lists {} line angles for {n_lines} lines",
                            line_angles.len()
                        ),
                    });
                }
                // The focal-law table is row-major [n_lines, n_tx].
                if n_lines == 0 || tx_delays.len() % n_lines != 0 || tx_delays.is_empty() {
                    return Err(Error::Format {
                        offset: 0,
                        message: format!(
                            "header lists {} transmit delays, not a positive multiple of \
                             {n_lines} lines",
                            tx_delays.len()
                        ),
                    });
                }
                Ok(ChannelDataFile::Pa(PaChannelData {
                    fs,
                    n_lines,
                    n_rx,
                    n_tx: tx_delays.len() / n_lines,
                    n_time,
                    samples: f64_of(&file.records[0].data),
                    line_angles,
                    tx_delays,
                }))
            }
        }
    }
}

/// Writes an envelope image. Both grid axes travel in the header as
/// comma-separated exact decimals, so the loaded grid is bit-identical.
pub fn save_envelope(path: &Path, image: &SectorImage, technique: Technique) -> Result<()> {
    let grid = &image.grid;
    let header = render_header(&[
        ("kind", "envelope_image".to_string()),
        ("technique", technique.to_string()),
        ("line_angles", join_f64(&grid.line_angles)),
        ("depths", join_f64(&grid.depths)),
    ]);
    let values = Tensor::from_slice(&[grid.n_lines(), grid.n_depths()], &f32_of(&image.values))?;
    write_records(path, &header, &[values])
}

/// Loads an envelope image written by [`save_envelope`].
pub fn load_envelope(path: &Path) -> Result<(SectorImage, Technique)> {
    let file = read_records(path)?;
    let header = HeaderMap::new(&file.header)?;
    header.expect_kind("envelope_image")?;
    let technique: Technique = header.get("technique")?.parse()?;
    let line_angles = split_f64(header.get("line_angles")?, "line_angles")?;
    let depths = split_f64(header.get("depths")?, "depths")?;
    if file.records.len() != 1 {
        return Err(Error::Format {
            offset: 0,
            message: format!("envelope image needs 1 record, found {}", file.records.len()),
        });
    }
    let [n_lines, n_depths] = dims2(&file.records[0], "envelope values")?;
    if n_lines != line_angles.len() || n_depths != depths.len() {
        return Err(Error::Format {
            offset: 0,
            message: format!(
                "envelope record is {n_lines} x {n_depths} but the header says {} x {}",
                line_angles.len(),
                depths.len()
            ),
        });
    }
    let grid = SectorGrid::new(line_angles, depths)?;
    let values = f64_of(&file.records[0].data);
    Ok((SectorImage { grid, values }, technique))
}

/// Writes an 8-bit binary PGM (P5) image.
pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != width * height || width == 0 || height == 0 {
        return Err(Error::InvalidArgument(format!(
            "PGM needs width x height = {width} x {height} pixels, got {}",
            pixels.len()
        )));
    }
    let mut out = Vec::with_capacity(pixels.len() + 32);
    write!(out, "P5\n{width} {height}\n255\n")?;
    out.extend_from_slice(pixels);
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes a CSV table: header row then data rows, '.' decimal, no quoting
/// (no cell produced here contains a comma).
pub fn write_csv(path: &Path, columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut s = String::new();
    s.push_str(&columns.join(","));
    s.push('\n');
    for row in rows {
        if row.len() != columns.len() {
            return Err(Error::InvalidArgument(format!(
                "CSV row has {} cells for {} columns",
                row.len(),
                columns.len()
            )));
        }
        s.push_str(&row.join(","));
        s.push('\n');
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Parsed key-value header with typed lookups.
struct HeaderMap {
    pairs: Vec<(String, String)>,
}

impl HeaderMap {
    fn new(header: &str) -> Result<HeaderMap> {
        Ok(HeaderMap { pairs: parse_header(header)? })
    }

    fn get(&self, key: &str) -> Result<&str> {
        self.pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Format {
                offset: 0,
                message: format!("header is missing `{key}`"),
            })
    }

    fn get_f64(&self, key: &str) -> Result<f64> {
        self.get(key)?.parse().map_err(|_| Error::Format {
            offset: 0,
            message: format!("header value for `{key}` is not a number"),
        })
    }

    fn expect_kind(&self, kind: &str) -> Result<()> {
        let found = self.get("kind")?;
        if found != kind {
            return Err(Error::Format {
                offset: 0,
                message: format!("expected a {kind} file, found kind `{found}`"),
            });
        }
        Ok(())
    }
}

fn f32_of(values: &[f64]) -> Vec<f32> {
    values.iter().map(|&v| v as f32).collect()
}

fn f64_of(values: &[f32]) -> Vec<f64> {
    values.iter().map(|&v| v as f64).collect()
}

/// Comma-joined shortest-exact decimals; parsing recovers the same bits.
fn join_f64(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",")
}

fn split_f64(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|part| {
            part.trim().parse().map_err(|_| Error::Format {
                offset: 0,
                message: format!("header value for `{what}` holds a non-number `{part}`"),
            })
        })
        .collect()
}

fn dims2(t: &Tensor, what: &str) -> Result<[usize; 2]> {
    match t.dims_usize()[..] {
        [a, b] => Ok([a, b]),
        _ => Err(bad_rank(t, what, 2)),
    }
}

fn dims3(t: &Tensor, what: &str) -> Result<[usize; 3]> {
    match t.dims_usize()[..] {
        [a, b, c] => Ok([a, b, c]),
        _ => Err(bad_rank(t, what, 3)),
    }
}

fn bad_rank(t: &Tensor, what: &str, want: usize) -> Error {
    Error::Format {
        offset: 0,
        message: format!("{what} record must have {want} dimensions, found {}", t.dims.len()),
    }
}
