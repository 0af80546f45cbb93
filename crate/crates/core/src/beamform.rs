//! Delay-and-sum reconstruction, envelope extraction, log compression, and
//! scan conversion.
//!
//! Every technique follows the same recipe: compute the analytic signal of
//! each channel once, then for every image sample coherently sum
//! linearly-interpolated channel reads at the technique's round-trip delay and
//! take the magnitude after summation. Reads land on the pulse group center
//! (geometric delay plus half the pulse duration) so image peaks coincide
//! with scatterer positions. Delays that fall outside the recorded time axis
//! contribute zero and are tallied in a coverage report.

use crate::array::{AcquisitionConfig, ArrayGeometry, PulseWaveform};
use crate::error::{Error, Result};
use crate::parallel;
use crate::wavesim::{pa_focus_transit_time, PaChannelData, SaChannelData, StaChannelData};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Polar sampling grid of a sector image: one steering angle per line and a
/// uniform depth axis shared by all lines.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorGrid {
    pub line_angles: Vec<f64>,
    pub depths: Vec<f64>,
}

impl SectorGrid {
    pub fn new(line_angles: Vec<f64>, depths: Vec<f64>) -> Result<SectorGrid> {
        if line_angles.is_empty() || depths.is_empty() {
            return Err(Error::InvalidArgument("grid must have lines and depths".into()));
        }
        if depths.len() > 1 {
            let step = depths[1] - depths[0];
            if step <= 0.0 {
                return Err(Error::InvalidArgument("depth axis must be increasing".into()));
            }
            for w in depths.windows(2) {
                if ((w[1] - w[0]) - step).abs() > 1e-9 * step {
                    return Err(Error::InvalidArgument("depth axis must be uniform".into()));
                }
            }
        }
        Ok(SectorGrid { line_angles, depths })
    }

    /// The full-sector grid of a configuration: its scan lines by a depth
    /// axis at the range-sample spacing `c / (2 fs)`.
    pub fn from_config(cfg: &AcquisitionConfig) -> SectorGrid {
        let step = cfg.c / (2.0 * cfg.fs);
        SectorGrid {
            line_angles: cfg.line_angles(),
            depths: depth_axis(cfg.depth_min, cfg.depth_max, step),
        }
    }

    pub fn n_lines(&self) -> usize {
        self.line_angles.len()
    }

    pub fn n_depths(&self) -> usize {
        self.depths.len()
    }

    pub fn depth_step(&self) -> f64 {
        if self.depths.len() > 1 {
            self.depths[1] - self.depths[0]
        } else {
            0.0
        }
    }
}

/// Uniform depth axis `d0, d0 + step, ...` up to and including (within half a
/// step of) `d1`.
pub fn depth_axis(d0: f64, d1: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0 && d1 > d0, "invalid depth axis request");
    let n = ((d1 - d0) / step).round() as usize + 1;
    (0..n).map(|i| d0 + i as f64 * step).collect()
}

/// Real non-negative envelope image on a sector grid, row-major
/// `[n_lines, n_depths]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorImage {
    pub grid: SectorGrid,
    pub values: Vec<f64>,
}

impl SectorImage {
    pub fn value(&self, line: usize, depth: usize) -> f64 {
        self.values[line * self.grid.n_depths() + depth]
    }

    pub fn line(&self, line: usize) -> &[f64] {
        let n = self.grid.n_depths();
        &self.values[line * n..(line + 1) * n]
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Index of the largest sample as `(line, depth)`.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0usize, 0.0f64);
        for (i, &v) in self.values.iter().enumerate() {
            if v > best.1 {
                best = (i, v);
            }
        }
        (best.0 / self.grid.n_depths(), best.0 % self.grid.n_depths())
    }
}

/// Complex pre-envelope image on a sector grid (the coherent sum before the
/// magnitude is taken), row-major `[n_lines, n_depths]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage {
    pub grid: SectorGrid,
    pub values: Vec<Complex64>,
}

impl ComplexImage {
    /// Magnitude image.
    pub fn envelope(self) -> SectorImage {
        let values = self.values.iter().map(|v| v.norm()).collect();
        SectorImage { grid: self.grid, values }
    }
}

/// Counts channel reads whose delay fell outside the recorded time axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CoverageReport {
    pub reads: u64,
    pub out_of_range: u64,
}

impl CoverageReport {
    pub fn is_complete(&self) -> bool {
        self.out_of_range == 0
    }

    fn merge(&mut self, other: CoverageReport) {
        self.reads += other.reads;
        self.out_of_range += other.out_of_range;
    }
}

// ---------------------------------------------------------------------------
// Analytic signal
// ---------------------------------------------------------------------------

/// Discrete analytic signal of `x` via the frequency domain: the signal is
/// zero-padded to the next power of two, negative frequencies are zeroed,
/// positive frequencies doubled, and DC/Nyquist kept; the result is truncated
/// back to the input length. The real part reproduces the input.
pub fn analytic_signal(x: &[f64]) -> Vec<Complex64> {
    if x.is_empty() {
        return Vec::new();
    }
    let mut planner = FftPlanner::new();
    analytic_signal_with(&mut planner, x)
}

fn analytic_signal_with(planner: &mut FftPlanner<f64>, x: &[f64]) -> Vec<Complex64> {
    let n = x.len().next_power_of_two();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    planner.plan_fft_forward(n).process(&mut buf);
    // One-sided spectrum: DC and Nyquist unchanged, positive doubled,
    // negative zeroed.
    for (k, v) in buf.iter_mut().enumerate() {
        if k == 0 || (n % 2 == 0 && k == n / 2) {
            continue;
        } else if k < n / 2 || (n % 2 == 1 && k <= n / 2) {
            *v *= 2.0;
        } else {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.truncate(x.len());
    for v in &mut buf {
        *v *= scale;
    }
    buf
}

/// Analytic signals of a block of equally long traces, stored row-major.
struct AnalyticBank {
    n_time: usize,
    fs: f64,
    data: Vec<Complex64>,
}

impl AnalyticBank {
    fn new(samples: &[f64], n_traces: usize, n_time: usize, fs: f64) -> AnalyticBank {
        let mut data = vec![Complex64::new(0.0, 0.0); n_traces * n_time];
        parallel::for_each_chunk_mut(&mut data, n_time, |idx, out| {
            let mut planner = FftPlanner::new();
            let trace = &samples[idx * n_time..(idx + 1) * n_time];
            out.copy_from_slice(&analytic_signal_with(&mut planner, trace));
        });
        AnalyticBank { n_time, fs, data }
    }

    /// Linear interpolation of trace `idx` at time `tau`; out-of-axis reads
    /// yield zero and are counted.
    #[inline]
    fn read(&self, idx: usize, tau: f64, cov: &mut CoverageReport) -> Complex64 {
        cov.reads += 1;
        let pos = tau * self.fs;
        let i0 = pos.floor();
        if i0 < 0.0 || i0 + 1.0 >= self.n_time as f64 {
            cov.out_of_range += 1;
            return Complex64::new(0.0, 0.0);
        }
        let i = idx * self.n_time + i0 as usize;
        let frac = pos - i0;
        self.data[i] * (1.0 - frac) + self.data[i + 1] * frac
    }
}

// ---------------------------------------------------------------------------
// Delay-and-sum
// ---------------------------------------------------------------------------

pub(crate) fn check_fs(data_fs: f64, cfg: &AcquisitionConfig) -> Result<()> {
    if data_fs != cfg.fs {
        return Err(Error::Config(format!(
            "channel data sampled at {} Hz but configuration expects {} Hz",
            data_fs, cfg.fs
        )));
    }
    Ok(())
}

fn beamform_grid<F>(grid: &SectorGrid, point_sum: F) -> (Vec<Complex64>, CoverageReport)
where
    F: Fn(usize, f64, f64, &mut CoverageReport) -> Complex64 + Sync,
{
    let n_depths = grid.n_depths();
    let mut values = vec![Complex64::new(0.0, 0.0); grid.n_lines() * n_depths];
    let reports: std::sync::Mutex<Vec<(usize, CoverageReport)>> = std::sync::Mutex::new(Vec::new());
    parallel::for_each_chunk_mut(&mut values, n_depths, |line, row| {
        let theta = grid.line_angles[line];
        let mut cov = CoverageReport::default();
        for (j, v) in row.iter_mut().enumerate() {
            *v = point_sum(line, theta, grid.depths[j], &mut cov);
        }
        reports.lock().unwrap().push((line, cov));
    });
    let mut merged = CoverageReport::default();
    let mut reports = reports.into_inner().unwrap();
    reports.sort_by_key(|&(line, _)| line);
    for (_, cov) in reports {
        merged.merge(cov);
    }
    (values, merged)
}

/// Coherent delay-and-sum of monostatic synthetic-aperture data on `grid`,
/// before the magnitude is taken.
pub fn das_sa_complex(
    data: &SaChannelData,
    array: &ArrayGeometry,
    pulse: &PulseWaveform,
    cfg: &AcquisitionConfig,
    grid: &SectorGrid,
) -> Result<(ComplexImage, CoverageReport)> {
    cfg.validate()?;
    check_fs(data.fs, cfg)?;
    if array.n_elements() != data.n_channels {
        return Err(Error::InvalidArgument(format!(
            "array has {} elements but data has {} channels",
            array.n_elements(),
            data.n_channels
        )));
    }
    let bank = AnalyticBank::new(&data.samples, data.n_channels, data.n_time, data.fs);
    let group_delay = pulse.duration() / 2.0;
    let positions = array.positions();
    let inv_c = 1.0 / cfg.c;
    let (values, cov) = beamform_grid(grid, |_, theta, depth, cov| {
        let (px, pz) = (depth * theta.sin(), depth * theta.cos());
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, &ex) in positions.iter().enumerate() {
            let d = ((px - ex).powi(2) + pz * pz).sqrt();
            let tau = 2.0 * d * inv_c + group_delay;
            acc += bank.read(i, tau, cov);
        }
        acc
    });
    Ok((ComplexImage { grid: grid.clone(), values }, cov))
}

/// Envelope image of monostatic synthetic-aperture data.
pub fn das_sa(
    data: &SaChannelData,
    array: &ArrayGeometry,
    pulse: &PulseWaveform,
    cfg: &AcquisitionConfig,
    grid: &SectorGrid,
) -> Result<(SectorImage, CoverageReport)> {
    let (complex, cov) = das_sa_complex(data, array, pulse, cfg, grid)?;
    Ok((complex.envelope(), cov))
}

/// Coherent delay-and-sum of synthetic-transmit-aperture data on `grid`
/// (all transmit events compounded), before the magnitude is taken.
pub fn das_sta_complex(
    data: &StaChannelData,
    tx_array: &ArrayGeometry,
    rx_array: &ArrayGeometry,
    pulse: &PulseWaveform,
    cfg: &AcquisitionConfig,
    grid: &SectorGrid,
) -> Result<(ComplexImage, CoverageReport)> {
    cfg.validate()?;
    check_fs(data.fs, cfg)?;
    if tx_array.n_elements() != data.n_tx || rx_array.n_elements() != data.n_rx {
        return Err(Error::InvalidArgument(format!(
            "arrays ({} tx, {} rx) do not match data ({} tx, {} rx)",
            tx_array.n_elements(),
            rx_array.n_elements(),
            data.n_tx,
            data.n_rx
        )));
    }
    let bank = AnalyticBank::new(&data.samples, data.n_tx * data.n_rx, data.n_time, data.fs);
    let group_delay = pulse.duration() / 2.0;
    let inv_c = 1.0 / cfg.c;
    let n_rx = data.n_rx;
    let (values, cov) = beamform_grid(grid, |_, theta, depth, cov| {
        let (px, pz) = (depth * theta.sin(), depth * theta.cos());
        let mut acc = Complex64::new(0.0, 0.0);
        for (t, &txx) in tx_array.positions().iter().enumerate() {
            let d_tx = ((px - txx).powi(2) + pz * pz).sqrt();
            for (r, &rxx) in rx_array.positions().iter().enumerate() {
                let d_rx = ((px - rxx).powi(2) + pz * pz).sqrt();
                let tau = (d_tx + d_rx) * inv_c + group_delay;
                acc += bank.read(t * n_rx + r, tau, cov);
            }
        }
        acc
    });
    Ok((ComplexImage { grid: grid.clone(), values }, cov))
}

/// Envelope image of synthetic-transmit-aperture data.
pub fn das_sta(
    data: &StaChannelData,
    tx_array: &ArrayGeometry,
    rx_array: &ArrayGeometry,
    pulse: &PulseWaveform,
    cfg: &AcquisitionConfig,
    grid: &SectorGrid,
) -> Result<(SectorImage, CoverageReport)> {
    let (complex, cov) = das_sta_complex(data, tx_array, rx_array, pulse, cfg, grid)?;
    Ok((complex.envelope(), cov))
}

/// Coherent delay-and-sum of phased-array data with dynamic receive focusing,
/// before the magnitude is taken. Each scan line is imaged along its own
/// steering angle, so the grid is `data.line_angles` by `depths`. The
/// transmit wavefront is modeled as passing the focus at the focal-law
/// transit time and sweeping depth at the speed of sound.
pub fn das_pa_complex(
    data: &PaChannelData,
    tx_array: &ArrayGeometry,
    rx_array: &ArrayGeometry,
    pulse: &PulseWaveform,
    cfg: &AcquisitionConfig,
    depths: &[f64],
) -> Result<(ComplexImage, CoverageReport)> {
    cfg.validate()?;
    check_fs(data.fs, cfg)?;
    if rx_array.n_elements() != data.n_rx {
        return Err(Error::InvalidArgument(format!(
            "receive array has {} elements but data has {} channels",
            rx_array.n_elements(),
            data.n_rx
        )));
    }
    if tx_array.n_elements() != data.n_tx {
        return Err(Error::InvalidArgument(format!(
            "transmit array has {} elements but data was fired with {}",
            tx_array.n_elements(),
            data.n_tx
        )));
    }
    let grid = SectorGrid::new(data.line_angles.clone(), depths.to_vec())?;
    let bank = AnalyticBank::new(&data.samples, data.n_lines * data.n_rx, data.n_time, data.fs);
    let group_delay = pulse.duration() / 2.0;
    let inv_c = 1.0 / cfg.c;
    let n_rx = data.n_rx;
    let transit: Vec<f64> = data
        .line_angles
        .iter()
        .map(|&theta| pa_focus_transit_time(tx_array.positions(), cfg, theta))
        .collect();
    let focus_depth = cfg.tx_focus_depth;
    let (values, cov) = beamform_grid(&grid, |line, theta, depth, cov| {
        let (px, pz) = (depth * theta.sin(), depth * theta.cos());
        let t_tx = transit[line] + (depth - focus_depth) * inv_c;
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &rxx) in rx_array.positions().iter().enumerate() {
            let d_rx = ((px - rxx).powi(2) + pz * pz).sqrt();
            let tau = t_tx + d_rx * inv_c + group_delay;
            acc += bank.read(line * n_rx + j, tau, cov);
        }
        acc
    });
    Ok((ComplexImage { grid, values }, cov))
}

/// Envelope image of phased-array data.
pub fn das_pa(
    data: &PaChannelData,
    tx_array: &ArrayGeometry,
    rx_array: &ArrayGeometry,
    pulse: &PulseWaveform,
    cfg: &AcquisitionConfig,
    depths: &[f64],
) -> Result<(SectorImage, CoverageReport)> {
    let (complex, cov) = das_pa_complex(data, tx_array, rx_array, pulse, cfg, depths)?;
    Ok((complex.envelope(), cov))
}

// ---------------------------------------------------------------------------
// Display mapping
// ---------------------------------------------------------------------------

/// Log-compresses an envelope image: `20 log10(v / max)` clipped to
/// `[-dynamic_range_db, 0]` and mapped affinely onto `[0, 1]`. An all-zero
/// image stays all-zero.
pub fn log_compress(image: &SectorImage, dynamic_range_db: f64) -> SectorImage {
    assert!(dynamic_range_db > 0.0, "dynamic range must be positive");
    let max = image.max_value();
    let values = image
        .values
        .iter()
        .map(|&v| {
            if max <= 0.0 || v <= 0.0 {
                return 0.0;
            }
            let db = 20.0 * (v / max).log10();
            (db.max(-dynamic_range_db) / dynamic_range_db + 1.0).min(1.0)
        })
        .collect();
    SectorImage { grid: image.grid.clone(), values }
}

/// Cartesian raster produced by scan conversion, row-major `[nz, nx]` with
/// pixel `(ix, iz)` centered at `(x0 + ix * pitch, z0 + iz * pitch)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    pub nx: usize,
    pub nz: usize,
    pub pixel_pitch: f64,
    pub x0: f64,
    pub z0: f64,
    pub pixels: Vec<f64>,
}

impl RasterImage {
    pub fn pixel(&self, ix: usize, iz: usize) -> f64 {
        self.pixels[iz * self.nx + ix]
    }

    /// 8-bit grayscale rows for image export; values are clamped to [0, 1].
    pub fn to_gray8(&self) -> Vec<u8> {
        self.pixels.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect()
    }
}

/// Resamples a sector image onto a Cartesian raster by bilinear interpolation
/// in `(angle, depth)`; pixels outside the sector are zero.
pub fn scan_convert(image: &SectorImage, pixel_pitch: f64) -> Result<RasterImage> {
    if pixel_pitch <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "pixel pitch must be positive, got {pixel_pitch}"
        )));
    }
    let grid = &image.grid;
    if grid.n_lines() < 2 || grid.n_depths() < 2 {
        return Err(Error::InvalidArgument(
            "scan conversion needs at least a 2 x 2 sector grid".into(),
        ));
    }
    let theta0 = grid.line_angles[0];
    let theta1 = *grid.line_angles.last().unwrap();
    let dtheta = (theta1 - theta0) / (grid.n_lines() - 1) as f64;
    if dtheta <= 0.0 {
        return Err(Error::InvalidArgument("line angles must be increasing".into()));
    }
    let r0 = grid.depths[0];
    let r1 = *grid.depths.last().unwrap();
    let dr = grid.depth_step();

    let x_min = r1 * theta0.sin().min(0.0);
    let x_max = r1 * theta1.sin().max(0.0);
    let z_min = (r0 * theta0.cos().min(theta1.cos())).max(0.0);
    let z_max = r1;
    let nx = ((x_max - x_min) / pixel_pitch).ceil() as usize + 1;
    let nz = ((z_max - z_min) / pixel_pitch).ceil() as usize + 1;

    let n_depths = grid.n_depths();
    let mut pixels = vec![0.0; nx * nz];
    parallel::for_each_chunk_mut(&mut pixels, nx, |iz, row| {
        let z = z_min + iz as f64 * pixel_pitch;
        for (ix, px) in row.iter_mut().enumerate() {
            let x = x_min + ix as f64 * pixel_pitch;
            let r = (x * x + z * z).sqrt();
            let theta = x.atan2(z);
            if theta < theta0 || theta > theta1 || r < r0 || r > r1 {
                continue;
            }
            let ft = ((theta - theta0) / dtheta).min((grid.n_lines() - 2) as f64);
            let fr = ((r - r0) / dr).min((n_depths - 2) as f64);
            let (it, ir) = (ft.floor() as usize, fr.floor() as usize);
            let (wt, wr) = (ft - it as f64, fr - ir as f64);
            let v00 = image.values[it * n_depths + ir];
            let v01 = image.values[it * n_depths + ir + 1];
            let v10 = image.values[(it + 1) * n_depths + ir];
            let v11 = image.values[(it + 1) * n_depths + ir + 1];
            *px = v00 * (1.0 - wt) * (1.0 - wr)
                + v01 * (1.0 - wt) * wr
                + v10 * wt * (1.0 - wr)
                + v11 * wt * wr;
        }
    });
    Ok(RasterImage { nx, nz, pixel_pitch, x0: x_min, z0: z_min, pixels })
}
