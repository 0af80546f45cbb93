//! End-to-end emulation-based reconstruction: focus the small-aperture
//! channels per focal point, emulate the large-aperture channels, and
//! delay-and-sum the emulated data.
//!
//! For every focal sample the recorded channels are focused into a patch,
//! the patch is mapped to its large-aperture counterpart by a
//! [`PatchEmulator`], and the emulated channels' center column — the column
//! the focusing delays aligned on this very focal point — is summed
//! coherently. Per scan line, the summed samples form an RF trace along
//! depth whose envelope (analytic signal along the depth axis) is the image
//! line. Synthetic-transmit-aperture data runs the emulator once per
//! transmit event and compounds the events before the envelope is taken.
//!
//! The depth grid must sample the RF trace densely enough for the envelope
//! step: at least two samples per carrier period along depth, i.e. a step no
//! larger than `c / (4 f0)`.

use crate::array::{AcquisitionConfig, ArrayGeometry, PulseWaveform};
use crate::beamform::{analytic_signal, check_fs, SectorGrid, SectorImage};
use crate::dataset::{focus_pa_into, focus_sa_into, focus_sta_into, FocalPoint};
use crate::error::{Error, Result};
use crate::neural::{Network, PatchShape, Workspace};
use crate::wavesim::{PaChannelData, SaChannelData, StaChannelData};

/// Maps a focused small-aperture patch to its large-aperture counterpart.
/// Both sides are raw (denormalized) amplitudes; implementations handle any
/// internal normalization themselves.
pub trait PatchEmulator {
    /// Patch geometry the emulator consumes and produces.
    fn shape(&self) -> PatchShape;

    /// Emulates the large-aperture patch for one focal point. `event` names
    /// the transmit event (STA) or scan line (PA) the input patch comes
    /// from; monostatic data has the single event 0. `input` holds
    /// `n_channels_in * n_time` values, `out` receives
    /// `n_channels_out * n_time`.
    fn emulate(&mut self, event: usize, focal: FocalPoint, input: &[f32], out: &mut [f32])
        -> Result<()>;
}

/// Runs a trained network as the emulator: normalizes the patch by its
/// largest absolute value, applies the network, and scales the output back.
/// The normalization sandwich makes the emulation exactly homogeneous under
/// power-of-two amplitude scalings of the input data.
pub struct NetworkEmulator<'a> {
    net: &'a Network<f32>,
    ws: Workspace<f32>,
    normalized: Vec<f32>,
}

impl<'a> NetworkEmulator<'a> {
    pub fn new(net: &'a Network<f32>) -> NetworkEmulator<'a> {
        NetworkEmulator { net, ws: Workspace::new(), normalized: Vec::new() }
    }
}

impl PatchEmulator for NetworkEmulator<'_> {
    fn shape(&self) -> PatchShape {
        self.net.shape()
    }

    fn emulate(
        &mut self,
        _event: usize,
        _focal: FocalPoint,
        input: &[f32],
        out: &mut [f32],
    ) -> Result<()> {
        let shape = self.net.shape();
        if input.len() != shape.in_len() || out.len() != shape.out_len() {
            return Err(Error::InvalidArgument(format!(
                "emulator buffers ({}, {}) do not match the network patch ({}, {})",
                input.len(),
                out.len(),
                shape.in_len(),
                shape.out_len()
            )));
        }
        let max = input.iter().fold(0.0_f32, |m, &v| m.max(v.abs()));
        let scale = if max > 0.0 { max } else { 1.0 };
        self.normalized.clear();
        self.normalized.extend(input.iter().map(|&v| v / scale));
        self.net.forward_cached(&self.normalized, &mut self.ws)?;
        for (o, &y) in out.iter_mut().zip(self.ws.output()) {
            *o = y * scale;
        }
        Ok(())
    }
}

/// Ground-truth channel data for the oracle emulator.
#[derive(Debug, Clone)]
pub enum OracleChannelData {
    Sa(SaChannelData),
    Sta(StaChannelData),
    Pa(PaChannelData),
}

/// An ideal emulator that ignores its input and focuses actual large-aperture
/// channel data instead. It bounds what any network emulator can achieve and
/// anchors the reconstruction against plain delay-and-sum over the large
/// array.
pub struct OraclePatchEmulator {
    data: OracleChannelData,
    tx_array: ArrayGeometry,
    rx_array: ArrayGeometry,
    pulse: PulseWaveform,
    cfg: AcquisitionConfig,
    shape: PatchShape,
}

impl OraclePatchEmulator {
    /// `rx_array` is the large receive aperture of `data` and must hold
    /// `2 * n_channels_in - 1` elements; `tx_array` is the transmit aperture
    /// `data` was fired with.
    pub fn new(
        data: OracleChannelData,
        tx_array: &ArrayGeometry,
        rx_array: &ArrayGeometry,
        pulse: &PulseWaveform,
        cfg: &AcquisitionConfig,
        n_channels_in: usize,
        n_time: usize,
    ) -> Result<OraclePatchEmulator> {
        let shape = PatchShape::new(n_channels_in, n_time)?;
        if rx_array.n_elements() != shape.n_channels_out {
            return Err(Error::InvalidArgument(format!(
                "oracle receive array holds {} elements but the patch shape needs {}",
                rx_array.n_elements(),
                shape.n_channels_out
            )));
        }
        Ok(OraclePatchEmulator {
            data,
            tx_array: tx_array.clone(),
            rx_array: rx_array.clone(),
            pulse: pulse.clone(),
            cfg: cfg.clone(),
            shape,
        })
    }
}

impl PatchEmulator for OraclePatchEmulator {
    fn shape(&self) -> PatchShape {
        self.shape
    }

    fn emulate(
        &mut self,
        event: usize,
        focal: FocalPoint,
        _input: &[f32],
        out: &mut [f32],
    ) -> Result<()> {
        let t = self.shape.n_time;
        match &self.data {
            OracleChannelData::Sa(data) => {
                focus_sa_into(data, &self.rx_array, &self.pulse, &self.cfg, focal, t, out)
            }
            OracleChannelData::Sta(data) => focus_sta_into(
                data,
                event,
                &self.tx_array,
                &self.rx_array,
                &self.pulse,
                &self.cfg,
                focal,
                t,
                out,
            ),
            OracleChannelData::Pa(data) => focus_pa_into(
                data,
                event,
                &self.tx_array,
                &self.rx_array,
                &self.pulse,
                &self.cfg,
                focal,
                t,
                out,
            ),
        }
    }
}

/// Reconstruction options.
#[derive(Debug, Clone, Default)]
pub struct DnnbOptions {
    /// When set, every focal sample averages all emulated patch columns that
    /// land on it (column `k` of the patch at depth `R` estimates the line
    /// signal at `R + (k - T/2) * c / (2 fs)`), instead of reading only each
    /// patch's center column. Off by default: neighboring columns belong to
    /// neighboring focal samples.
    pub overlap_average: bool,
}

/// Accumulates one image line. With overlap-averaging disabled only the
/// center column contributes; otherwise every column is distributed onto the
/// nearest depth sample, using the two-way axial slope `2 / c` shared by all
/// techniques.
struct LineAccumulator {
    sums: Vec<f64>,
    counts: Vec<u64>,
    overlap: bool,
    /// Patch columns per grid depth step.
    columns_per_step: f64,
}

impl LineAccumulator {
    fn new(grid: &SectorGrid, cfg: &AcquisitionConfig, overlap: bool) -> LineAccumulator {
        let n = grid.n_depths();
        let columns_per_step = 2.0 * grid.depth_step() / cfg.c * cfg.fs;
        LineAccumulator { sums: vec![0.0; n], counts: vec![0; n], overlap, columns_per_step }
    }

    fn reset(&mut self) {
        self.sums.iter_mut().for_each(|v| *v = 0.0);
        self.counts.iter_mut().for_each(|v| *v = 0);
    }

    /// Adds the channel-summed columns of the patch focused at depth index
    /// `j`. `column_sums[k]` is the coherent sum of emulated channels at
    /// patch column `k`.
    fn add_patch(&mut self, j: usize, column_sums: &[f64]) {
        let center = column_sums.len() / 2;
        if !self.overlap {
            self.sums[j] += column_sums[center];
            self.counts[j] += 1;
            return;
        }
        for (k, &sum) in column_sums.iter().enumerate() {
            let offset = (k as f64 - center as f64) / self.columns_per_step;
            let target = j as f64 + offset;
            let nearest = target.round();
            if (target - nearest).abs() > 0.5 / self.columns_per_step.max(1.0) + 1e-9 {
                continue;
            }
            if nearest < 0.0 || nearest >= self.sums.len() as f64 {
                continue;
            }
            let i = nearest as usize;
            self.sums[i] += sum;
            self.counts[i] += 1;
        }
    }

    /// The accumulated RF line: compounded (summed) over the `n_events`
    /// transmit events and averaged over the overlap estimates within each
    /// event. The column-to-depth mapping does not depend on the event, so
    /// the per-event multiplicity is `counts / n_events`.
    fn line(&self, n_events: usize) -> Vec<f64> {
        self.sums
            .iter()
            .zip(&self.counts)
            .map(|(&s, &c)| if c > 0 { s * n_events as f64 / c as f64 } else { 0.0 })
            .collect()
    }
}

fn check_emulator_input(shape: PatchShape, n_channels: usize) -> Result<()> {
    if shape.n_channels_in != n_channels {
        return Err(Error::InvalidArgument(format!(
            "emulator expects {} input channels but the data has {n_channels}",
            shape.n_channels_in
        )));
    }
    Ok(())
}

/// Sums each patch column over the emulated channels, in channel order.
fn column_sums(emulated: &[f32], n_channels: usize, n_time: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for ch in 0..n_channels {
        let row = &emulated[ch * n_time..(ch + 1) * n_time];
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v as f64;
        }
    }
}

fn envelope_image(grid: &SectorGrid, rf_lines: Vec<Vec<f64>>) -> SectorImage {
    let mut values = Vec::with_capacity(grid.n_lines() * grid.n_depths());
    for line in rf_lines {
        values.extend(analytic_signal(&line).iter().map(|c| c.norm()));
    }
    SectorImage { grid: grid.clone(), values }
}

/// Emulation-based reconstruction of monostatic synthetic-aperture data.
pub fn dnnb_sa(
    data: &SaChannelData,
    array: &ArrayGeometry,
    pulse: &PulseWaveform,
    cfg: &AcquisitionConfig,
    grid: &SectorGrid,
    emulator: &mut dyn PatchEmulator,
    options: &DnnbOptions,
) -> Result<SectorImage> {
    cfg.validate()?;
    check_fs(data.fs, cfg)?;
    if array.n_elements() != data.n_channels {
        return Err(Error::InvalidArgument(format!(
            "array has {} elements but data has {} channels",
            array.n_elements(),
            data.n_channels
        )));
    }
    let shape = emulator.shape();
    check_emulator_input(shape, data.n_channels)?;
    let t = shape.n_time;
    let mut patch = vec![0.0_f32; shape.in_len()];
    let mut emulated = vec![0.0_f32; shape.out_len()];
    let mut sums = vec![0.0_f64; t];
    let mut acc = LineAccumulator::new(grid, cfg, options.overlap_average);
    let mut rf_lines = Vec::with_capacity(grid.n_lines());
    for &theta in &grid.line_angles {
        acc.reset();
        for (j, &depth) in grid.depths.iter().enumerate() {
            let focal = FocalPoint::new(theta, depth);
            focus_sa_into(data, array, pulse, cfg, focal, t, &mut patch)?;
            emulator.emulate(0, focal, &patch, &mut emulated)?;
            column_sums(&emulated, shape.n_channels_out, t, &mut sums);
            acc.add_patch(j, &sums);
        }
        rf_lines.push(acc.line(1));
    }
    Ok(envelope_image(grid, rf_lines))
}

/// Emulation-based reconstruction of synthetic-transmit-aperture data: the
/// emulator runs once per transmit event and the events are compounded
/// coherently before the envelope.
#[allow(clippy::too_many_arguments)]
pub fn dnnb_sta(
    data: &StaChannelData,
    tx_array: &ArrayGeometry,
    rx_array: &ArrayGeometry,
    pulse: &PulseWaveform,
    cfg: &AcquisitionConfig,
    grid: &SectorGrid,
    emulator: &mut dyn PatchEmulator,
    options: &DnnbOptions,
) -> Result<SectorImage> {
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
    let shape = emulator.shape();
    check_emulator_input(shape, data.n_rx)?;
    let t = shape.n_time;
    let mut patch = vec![0.0_f32; shape.in_len()];
    let mut emulated = vec![0.0_f32; shape.out_len()];
    let mut sums = vec![0.0_f64; t];
    let mut acc = LineAccumulator::new(grid, cfg, options.overlap_average);
    let mut rf_lines = Vec::with_capacity(grid.n_lines());
    for &theta in &grid.line_angles {
        acc.reset();
        for tx in 0..data.n_tx {
            for (j, &depth) in grid.depths.iter().enumerate() {
                let focal = FocalPoint::new(theta, depth);
                focus_sta_into(data, tx, tx_array, rx_array, pulse, cfg, focal, t, &mut patch)?;
                emulator.emulate(tx, focal, &patch, &mut emulated)?;
                column_sums(&emulated, shape.n_channels_out, t, &mut sums);
                acc.add_patch(j, &sums);
            }
        }
        rf_lines.push(acc.line(data.n_tx));
    }
    Ok(envelope_image(grid, rf_lines))
}

/// Emulation-based reconstruction of phased-array data: each recorded scan
/// line is imaged along its own steering angle, so the grid is
/// `data.line_angles` by `depths`.
#[allow(clippy::too_many_arguments)]
pub fn dnnb_pa(
    data: &PaChannelData,
    tx_array: &ArrayGeometry,
    rx_array: &ArrayGeometry,
    pulse: &PulseWaveform,
    cfg: &AcquisitionConfig,
    depths: &[f64],
    emulator: &mut dyn PatchEmulator,
    options: &DnnbOptions,
) -> Result<SectorImage> {
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
    let shape = emulator.shape();
    check_emulator_input(shape, data.n_rx)?;
    let grid = SectorGrid::new(data.line_angles.clone(), depths.to_vec())?;
    let t = shape.n_time;
    let mut patch = vec![0.0_f32; shape.in_len()];
    let mut emulated = vec![0.0_f32; shape.out_len()];
    let mut sums = vec![0.0_f64; t];
    let mut acc = LineAccumulator::new(&grid, cfg, options.overlap_average);
    let mut rf_lines = Vec::with_capacity(grid.n_lines());
    for (line, &theta) in grid.line_angles.iter().enumerate() {
        acc.reset();
        for (j, &depth) in grid.depths.iter().enumerate() {
            let focal = FocalPoint::new(theta, depth);
            focus_pa_into(data, line, tx_array, rx_array, pulse, cfg, focal, t, &mut patch)?;
            emulator.emulate(line, focal, &patch, &mut emulated)?;
            column_sums(&emulated, shape.n_channels_out, t, &mut sums);
            acc.add_patch(j, &sums);
        }
        rf_lines.push(acc.line(1));
    }
    Ok(envelope_image(&grid, rf_lines))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{make_point_phantom, make_pulse, Window};
    use crate::beamform::{das_sa, das_sta, depth_axis};
    use crate::neural::{init_network, NetworkConfig};
    use crate::wavesim::{simulate_pa_split, simulate_sa, simulate_sta_split};

    fn test_cfg() -> AcquisitionConfig {
        AcquisitionConfig {
            depth_min: 0.012,
            depth_max: 0.028,
            tx_focus_depth: 0.020,
            n_scan_lines: 5,
            ..AcquisitionConfig::default()
        }
    }

    fn test_pulse(cfg: &AcquisitionConfig) -> PulseWaveform {
        make_pulse(4.0e6, 2.5, cfg.fs, Window::Hann).unwrap()
    }

    fn arrays(cfg: &AcquisitionConfig) -> (ArrayGeometry, ArrayGeometry) {
        let pitch = cfg.c / 4.0e6 / 2.0;
        (ArrayGeometry::centered(5, 2.0 * pitch), ArrayGeometry::centered(9, pitch))
    }

    fn fine_grid(cfg: &AcquisitionConfig) -> SectorGrid {
        let step = cfg.c / (2.0 * cfg.fs);
        SectorGrid::new(
            crate::array::line_angles(cfg.sector_angle, 7),
            depth_axis(cfg.depth_min, cfg.depth_max, step),
        )
        .unwrap()
    }

    /// Peak-normalized RMS difference between two images on the same grid.
    fn rms_difference(a: &SectorImage, b: &SectorImage) -> f64 {
        assert_eq!(a.values.len(), b.values.len());
        let peak = b.values.iter().copied().fold(0.0_f64, f64::max);
        assert!(peak > 0.0);
        let mse: f64 = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(&x, &y)| (x - y).powi(2))
            .sum::<f64>()
            / a.values.len() as f64;
        mse.sqrt() / peak
    }

    #[test]
    fn zero_channel_data_yields_a_zero_image() {
        let cfg = test_cfg();
        let pulse = test_pulse(&cfg);
        let (small, _) = arrays(&cfg);
        let data = SaChannelData {
            fs: cfg.fs,
            n_channels: small.n_elements(),
            n_time: 1200,
            samples: vec![0.0; small.n_elements() * 1200],
        };
        let shape = PatchShape::new(small.n_elements(), 32).unwrap();
        let net = init_network(shape, &NetworkConfig::default(), 5).unwrap();
        let mut emulator = NetworkEmulator::new(&net);
        let grid = SectorGrid::new(
            vec![-0.1, 0.0, 0.1],
            depth_axis(cfg.depth_min, cfg.depth_max, 4.0 * cfg.c / (2.0 * cfg.fs)),
        )
        .unwrap();
        let image =
            dnnb_sa(&data, &small, &pulse, &cfg, &grid, &mut emulator, &DnnbOptions::default())
                .unwrap();
        assert!(image.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn doubling_the_data_doubles_the_image_exactly() {
        let cfg = test_cfg();
        let pulse = test_pulse(&cfg);
        let (small, _) = arrays(&cfg);
        let phantom = make_point_phantom(&[(0.0, 0.020, 1.0)]).unwrap();
        let data = simulate_sa(&small, &pulse, &cfg, &phantom).unwrap();
        let mut doubled = data.clone();
        for v in &mut doubled.samples {
            *v *= 2.0;
        }

        let shape = PatchShape::new(small.n_elements(), 32).unwrap();
        let net = init_network(shape, &NetworkConfig::default(), 5).unwrap();
        let grid = SectorGrid::new(
            vec![-0.05, 0.0, 0.05],
            depth_axis(0.018, 0.022, cfg.c / (2.0 * cfg.fs)),
        )
        .unwrap();

        let mut emulator = NetworkEmulator::new(&net);
        let base =
            dnnb_sa(&data, &small, &pulse, &cfg, &grid, &mut emulator, &DnnbOptions::default())
                .unwrap();
        let mut emulator = NetworkEmulator::new(&net);
        let scaled =
            dnnb_sa(&doubled, &small, &pulse, &cfg, &grid, &mut emulator, &DnnbOptions::default())
                .unwrap();
        for (&a, &b) in base.values.iter().zip(&scaled.values) {
            assert_eq!(2.0 * a, b, "power-of-two scaling must commute bit for bit");
        }
    }

    #[test]
    fn reconstruction_is_deterministic() {
        let cfg = test_cfg();
        let pulse = test_pulse(&cfg);
        let (small, large) = arrays(&cfg);
        let phantom = make_point_phantom(&[(0.001, 0.021, 1.0)]).unwrap();
        let small_data = simulate_sa(&small, &pulse, &cfg, &phantom).unwrap();
        let large_data = simulate_sa(&large, &pulse, &cfg, &phantom).unwrap();
        let grid = fine_grid(&cfg);

        let run = || {
            let mut oracle = OraclePatchEmulator::new(
                OracleChannelData::Sa(large_data.clone()),
                &large,
                &large,
                &pulse,
                &cfg,
                small.n_elements(),
                32,
            )
            .unwrap();
            dnnb_sa(&small_data, &small, &pulse, &cfg, &grid, &mut oracle, &DnnbOptions::default())
                .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn oracle_emulation_matches_large_aperture_das_sa() {
        let cfg = test_cfg();
        let pulse = test_pulse(&cfg);
        let (small, large) = arrays(&cfg);
        let phantom = make_point_phantom(&[(0.0015, 0.020, 1.0)]).unwrap();
        let small_data = simulate_sa(&small, &pulse, &cfg, &phantom).unwrap();
        let large_data = simulate_sa(&large, &pulse, &cfg, &phantom).unwrap();
        let grid = fine_grid(&cfg);

        let mut oracle = OraclePatchEmulator::new(
            OracleChannelData::Sa(large_data.clone()),
            &large,
            &large,
            &pulse,
            &cfg,
            small.n_elements(),
            32,
        )
        .unwrap();
        let emulated = dnnb_sa(
            &small_data,
            &small,
            &pulse,
            &cfg,
            &grid,
            &mut oracle,
            &DnnbOptions::default(),
        )
        .unwrap();
        let (reference, _) = das_sa(&large_data, &large, &pulse, &cfg, &grid).unwrap();

        let nrms = rms_difference(&emulated, &reference);
        assert!(nrms < 0.02, "peak-normalized RMS difference {nrms} exceeds 2%");
    }

    #[test]
    fn oracle_emulation_matches_large_aperture_das_sta() {
        let cfg = test_cfg();
        let pulse = test_pulse(&cfg);
        let (small, large) = arrays(&cfg);
        let phantom = make_point_phantom(&[(-0.001, 0.019, 1.0)]).unwrap();
        // Transmit stays on the small aperture; only receive is emulated.
        let small_data = simulate_sta_split(&small, &small, &pulse, &cfg, &phantom).unwrap();
        let large_data = simulate_sta_split(&small, &large, &pulse, &cfg, &phantom).unwrap();
        let grid = fine_grid(&cfg);

        let mut oracle = OraclePatchEmulator::new(
            OracleChannelData::Sta(large_data.clone()),
            &small,
            &large,
            &pulse,
            &cfg,
            small.n_elements(),
            32,
        )
        .unwrap();
        let emulated = dnnb_sta(
            &small_data,
            &small,
            &small,
            &pulse,
            &cfg,
            &grid,
            &mut oracle,
            &DnnbOptions::default(),
        )
        .unwrap();
        let (reference, _) = das_sta(&large_data, &small, &large, &pulse, &cfg, &grid).unwrap();

        let nrms = rms_difference(&emulated, &reference);
        assert!(nrms < 0.02, "peak-normalized RMS difference {nrms} exceeds 2%");
    }

    #[test]
    fn oracle_emulation_matches_large_aperture_das_pa() {
        let cfg = test_cfg();
        let pulse = test_pulse(&cfg);
        let (small, large) = arrays(&cfg);
        let phantom = make_point_phantom(&[(0.0, 0.020, 1.0)]).unwrap();
        let lines = crate::array::line_angles(cfg.sector_angle, 7);
        let small_data = simulate_pa_split(&small, &small, &pulse, &cfg, &phantom, &lines).unwrap();
        let large_data = simulate_pa_split(&large, &large, &pulse, &cfg, &phantom, &lines).unwrap();
        let depths = depth_axis(cfg.depth_min, cfg.depth_max, cfg.c / (2.0 * cfg.fs));

        let mut oracle = OraclePatchEmulator::new(
            OracleChannelData::Pa(large_data.clone()),
            &large,
            &large,
            &pulse,
            &cfg,
            small.n_elements(),
            32,
        )
        .unwrap();
        let emulated = dnnb_pa(
            &small_data,
            &small,
            &small,
            &pulse,
            &cfg,
            &depths,
            &mut oracle,
            &DnnbOptions::default(),
        )
        .unwrap();
        let (reference, _) = crate::beamform::das_pa(
            &large_data,
            &large,
            &large,
            &pulse,
            &cfg,
            &depths,
        )
        .unwrap();

        let nrms = rms_difference(&emulated, &reference);
        assert!(nrms < 0.02, "peak-normalized RMS difference {nrms} exceeds 2%");
    }

    #[test]
    fn overlap_averaging_stays_close_to_center_only() {
        let cfg = test_cfg();
        let pulse = test_pulse(&cfg);
        let (small, large) = arrays(&cfg);
        let phantom = make_point_phantom(&[(0.0, 0.020, 1.0)]).unwrap();
        let small_data = simulate_sa(&small, &pulse, &cfg, &phantom).unwrap();
        let large_data = simulate_sa(&large, &pulse, &cfg, &phantom).unwrap();
        let grid = fine_grid(&cfg);

        let image = |overlap: bool| {
            let mut oracle = OraclePatchEmulator::new(
                OracleChannelData::Sa(large_data.clone()),
                &large,
                &large,
                &pulse,
                &cfg,
                small.n_elements(),
                32,
            )
            .unwrap();
            dnnb_sa(
                &small_data,
                &small,
                &pulse,
                &cfg,
                &grid,
                &mut oracle,
                &DnnbOptions { overlap_average: overlap },
            )
            .unwrap()
        };
        let center_only = image(false);
        let averaged = image(true);
        // On an exactly column-aligned grid the overlapping estimates read
        // the same focused data from shifted patches, so averaging must not
        // change the picture much; it must also keep the peak in place.
        let nrms = rms_difference(&averaged, &center_only);
        assert!(nrms < 0.05, "overlap averaging drifted {nrms} from center-only");
        assert_eq!(averaged.argmax(), center_only.argmax());
    }

    #[test]
    fn emulator_shape_mismatch_is_rejected() {
        let cfg = test_cfg();
        let pulse = test_pulse(&cfg);
        let (small, _) = arrays(&cfg);
        let phantom = make_point_phantom(&[(0.0, 0.020, 1.0)]).unwrap();
        let data = simulate_sa(&small, &pulse, &cfg, &phantom).unwrap();
        // Network trained for 7 input channels, data has 5.
        let shape = PatchShape::new(7, 32).unwrap();
        let net = init_network(shape, &NetworkConfig::default(), 5).unwrap();
        let mut emulator = NetworkEmulator::new(&net);
        let grid = fine_grid(&cfg);
        let err =
            dnnb_sa(&data, &small, &pulse, &cfg, &grid, &mut emulator, &DnnbOptions::default())
                .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)), "got {err:?}");
    }
}
