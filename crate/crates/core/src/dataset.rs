//! Training-pair construction: focused small-aperture patches mapped to
//! focused large-aperture patches.
//!
//! The only pre-processing applied to the recorded channels is focusing:
//! every channel is delayed (with fractional-sample linear interpolation) so
//! the echo path through a chosen focal point lands on the patch's center
//! column, and a fixed number of columns around the center is kept. A
//! training pair focuses the same scene through two apertures — the input
//! patch through the small one, the target patch through a 2n−1-element
//! counterpart — and both are stored with one shared normalization factor so
//! the inter-aperture gain relationship survives.
//!
//! Two pair kinds exist: *emulation* pairs contain a single point target in
//! both patches, while *sidelobe* pairs add an interferer to the input scene
//! only, teaching the network to suppress off-axis arrivals.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::array::{
    make_point_phantom, AcquisitionConfig, ArrayGeometry, Phantom, PulseWaveform,
};
use crate::beamform::check_fs;
use crate::error::{Error, Result};
use crate::neural::{PatchShape, TrainSet};
use crate::tensor::{self, Tensor};
use crate::wavesim::{
    pa_focus_transit_time, simulate_pa_split, simulate_sa, simulate_sta_split, PaChannelData,
    SaChannelData, StaChannelData, Technique,
};

/// Tolerance for matching a transmit element of the input array to a
/// co-located element of the output array.
const TX_MATCH_TOLERANCE: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Focused patches
// ---------------------------------------------------------------------------

/// Focal point in sector coordinates: steering angle [rad] and range [m].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalPoint {
    pub theta: f64,
    pub depth: f64,
}

impl FocalPoint {
    pub fn new(theta: f64, depth: f64) -> FocalPoint {
        FocalPoint { theta, depth }
    }

    /// Cartesian position (x, z) of the focal point.
    pub fn xz(&self) -> (f64, f64) {
        (self.depth * self.theta.sin(), self.depth * self.theta.cos())
    }
}

/// A block of channel data delayed so the echo through `focal` sits on the
/// center column. `scale` maps the stored values back to raw amplitudes:
/// `raw = stored * scale`. A freshly focused patch has `scale = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FocusedPatch {
    pub n_channels: usize,
    pub n_time: usize,
    pub focal: FocalPoint,
    pub scale: f32,
    /// Row-major `[n_channels, n_time]`.
    pub values: Vec<f32>,
}

impl FocusedPatch {
    pub fn channel(&self, i: usize) -> &[f32] {
        &self.values[i * self.n_time..(i + 1) * self.n_time]
    }

    /// Column holding the focal echo.
    pub fn center_column(&self) -> usize {
        self.n_time / 2
    }

    pub fn max_abs(&self) -> f32 {
        self.values.iter().fold(0.0_f32, |m, &v| m.max(v.abs()))
    }

    /// Divides the values by `factor` and folds it into `scale`.
    pub fn normalize_by(&mut self, factor: f32) -> Result<()> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "normalization factor must be positive and finite, got {factor}"
            )));
        }
        for v in &mut self.values {
            *v /= factor;
        }
        self.scale *= factor;
        Ok(())
    }
}

fn check_patch_cols(n_cols: usize) -> Result<()> {
    if n_cols < 2 {
        return Err(Error::InvalidArgument(format!(
            "a patch needs at least two columns, got {n_cols}"
        )));
    }
    Ok(())
}

fn check_patch_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::InvalidArgument(format!(
            "patch buffer holds {got} values but the data needs {expected}"
        )));
    }
    Ok(())
}

/// Writes one patch row. Column `t` holds the trace linearly interpolated at
/// sample position `pos_center + t - n/2`, so consecutive columns are one
/// sample apart and the focal echo sits on the center column. Columns outside
/// the recorded axis read as zero, but the center column itself must be
/// readable.
fn fill_patch_row(
    trace: &[f64],
    pos_center: f64,
    out: &mut [f32],
    context: impl Fn() -> String,
) -> Result<()> {
    let len = trace.len() as f64;
    let c0 = pos_center.floor();
    if c0 < 0.0 || c0 + 1.0 >= len {
        return Err(Error::InvalidArgument(format!(
            "{}: focal echo at sample {pos_center:.1} is outside the recorded axis of {} samples",
            context(),
            trace.len()
        )));
    }
    let center = (out.len() / 2) as f64;
    for (t, v) in out.iter_mut().enumerate() {
        let pos = pos_center + (t as f64 - center);
        let i0 = pos.floor();
        *v = if i0 < 0.0 || i0 + 1.0 >= len {
            0.0
        } else {
            let i = i0 as usize;
            let frac = pos - i0;
            (trace[i] * (1.0 - frac) + trace[i + 1] * frac) as f32
        };
    }
    Ok(())
}

fn focal_context(channel: usize, focal: FocalPoint) -> String {
    format!(
        "channel {channel} focused at (theta = {:.2} deg, depth = {:.1} mm)",
        focal.theta.to_degrees(),
        focal.depth * 1e3
    )
}

/// Focuses monostatic synthetic-aperture data at `focal`, one row per
/// element. The delay law matches the corresponding beamformer: two-way path
/// plus half the pulse duration, so the envelope peak of an on-focus echo
/// lands on the center column.
pub fn focus_sa(
    data: &SaChannelData,
    array: &ArrayGeometry,
    pulse: &PulseWaveform,
    cfg: &AcquisitionConfig,
    focal: FocalPoint,
    n_cols: usize,
) -> Result<FocusedPatch> {
    let mut values = vec![0.0_f32; data.n_channels * n_cols];
    focus_sa_into(data, array, pulse, cfg, focal, n_cols, &mut values)?;
    Ok(FocusedPatch { n_channels: data.n_channels, n_time: n_cols, focal, scale: 1.0, values })
}

/// [`focus_sa`] writing into a caller-owned buffer of
/// `data.n_channels * n_cols` values.
pub fn focus_sa_into(
    data: &SaChannelData,
    array: &ArrayGeometry,
    pulse: &PulseWaveform,
    cfg: &AcquisitionConfig,
    focal: FocalPoint,
    n_cols: usize,
    out: &mut [f32],
) -> Result<()> {
    cfg.validate()?;
    check_fs(data.fs, cfg)?;
    check_patch_cols(n_cols)?;
    if array.n_elements() != data.n_channels {
        return Err(Error::InvalidArgument(format!(
            "array has {} elements but data has {} channels",
            array.n_elements(),
            data.n_channels
        )));
    }
    check_patch_len(data.n_channels * n_cols, out.len())?;
    let group_delay = pulse.duration() / 2.0;
    let (px, pz) = focal.xz();
    for (i, row) in out.chunks_exact_mut(n_cols).enumerate() {
        let ex = array.position(i);
        let d = ((px - ex).powi(2) + pz * pz).sqrt();
        let tau = 2.0 * d / cfg.c + group_delay;
        fill_patch_row(data.channel(i), tau * data.fs, row, || focal_context(i, focal))?;
    }
    Ok(())
}

/// Focuses one transmit event of synthetic-transmit-aperture data at `focal`,
/// one row per receive element.
pub fn focus_sta(
    data: &StaChannelData,
    tx_index: usize,
    tx_array: &ArrayGeometry,
    rx_array: &ArrayGeometry,
    pulse: &PulseWaveform,
    cfg: &AcquisitionConfig,
    focal: FocalPoint,
    n_cols: usize,
) -> Result<FocusedPatch> {
    let mut values = vec![0.0_f32; data.n_rx * n_cols];
    focus_sta_into(data, tx_index, tx_array, rx_array, pulse, cfg, focal, n_cols, &mut values)?;
    Ok(FocusedPatch { n_channels: data.n_rx, n_time: n_cols, focal, scale: 1.0, values })
}

/// [`focus_sta`] writing into a caller-owned buffer of
/// `data.n_rx * n_cols` values.
#[allow(clippy::too_many_arguments)]
pub fn focus_sta_into(
    data: &StaChannelData,
    tx_index: usize,
    tx_array: &ArrayGeometry,
    rx_array: &ArrayGeometry,
    pulse: &PulseWaveform,
    cfg: &AcquisitionConfig,
    focal: FocalPoint,
    n_cols: usize,
    out: &mut [f32],
) -> Result<()> {
    cfg.validate()?;
    check_fs(data.fs, cfg)?;
    check_patch_cols(n_cols)?;
    if tx_array.n_elements() != data.n_tx || rx_array.n_elements() != data.n_rx {
        return Err(Error::InvalidArgument(format!(
            "arrays ({} tx, {} rx) do not match data ({} tx, {} rx)",
            tx_array.n_elements(),
            rx_array.n_elements(),
            data.n_tx,
            data.n_rx
        )));
    }
    if tx_index >= data.n_tx {
        return Err(Error::InvalidArgument(format!(
            "transmit event {tx_index} out of range for {} events",
            data.n_tx
        )));
    }
    check_patch_len(data.n_rx * n_cols, out.len())?;
    let group_delay = pulse.duration() / 2.0;
    let (px, pz) = focal.xz();
    let txx = tx_array.position(tx_index);
    let d_tx = ((px - txx).powi(2) + pz * pz).sqrt();
    for (r, row) in out.chunks_exact_mut(n_cols).enumerate() {
        let rxx = rx_array.position(r);
        let d_rx = ((px - rxx).powi(2) + pz * pz).sqrt();
        let tau = (d_tx + d_rx) / cfg.c + group_delay;
        fill_patch_row(data.trace(tx_index, r), tau * data.fs, row, || focal_context(r, focal))?;
    }
    Ok(())
}

/// Focuses one scan line of phased-array data at `focal`, one row per receive
/// element. The transmit wavefront is modeled as passing the focus at the
/// focal-law transit time and sweeping depth at the speed of sound, as in the
/// corresponding beamformer.
pub fn focus_pa(
    data: &PaChannelData,
    line: usize,
    tx_array: &ArrayGeometry,
    rx_array: &ArrayGeometry,
    pulse: &PulseWaveform,
    cfg: &AcquisitionConfig,
    focal: FocalPoint,
    n_cols: usize,
) -> Result<FocusedPatch> {
    let mut values = vec![0.0_f32; data.n_rx * n_cols];
    focus_pa_into(data, line, tx_array, rx_array, pulse, cfg, focal, n_cols, &mut values)?;
    Ok(FocusedPatch { n_channels: data.n_rx, n_time: n_cols, focal, scale: 1.0, values })
}

/// [`focus_pa`] writing into a caller-owned buffer of
/// `data.n_rx * n_cols` values.
#[allow(clippy::too_many_arguments)]
pub fn focus_pa_into(
    data: &PaChannelData,
    line: usize,
    tx_array: &ArrayGeometry,
    rx_array: &ArrayGeometry,
    pulse: &PulseWaveform,
    cfg: &AcquisitionConfig,
    focal: FocalPoint,
    n_cols: usize,
    out: &mut [f32],
) -> Result<()> {
    cfg.validate()?;
    check_fs(data.fs, cfg)?;
    check_patch_cols(n_cols)?;
    if tx_array.n_elements() != data.n_tx || rx_array.n_elements() != data.n_rx {
        return Err(Error::InvalidArgument(format!(
            "arrays ({} tx, {} rx) do not match data ({} tx, {} rx)",
            tx_array.n_elements(),
            rx_array.n_elements(),
            data.n_tx,
            data.n_rx
        )));
    }
    if line >= data.n_lines {
        return Err(Error::InvalidArgument(format!(
            "scan line {line} out of range for {} lines",
            data.n_lines
        )));
    }
    check_patch_len(data.n_rx * n_cols, out.len())?;
    let group_delay = pulse.duration() / 2.0;
    let (px, pz) = focal.xz();
    let transit = pa_focus_transit_time(tx_array.positions(), cfg, data.line_angles[line]);
    let t_tx = transit + (focal.depth - cfg.tx_focus_depth) / cfg.c;
    for (r, row) in out.chunks_exact_mut(n_cols).enumerate() {
        let rxx = rx_array.position(r);
        let d_rx = ((px - rxx).powi(2) + pz * pz).sqrt();
        let tau = t_tx + d_rx / cfg.c + group_delay;
        fill_patch_row(data.trace(line, r), tau * data.fs, row, || focal_context(r, focal))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Training pairs
// ---------------------------------------------------------------------------

/// What a training pair teaches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairKind {
    /// Single point target: learn the small-to-large aperture mapping.
    Emulation,
    /// Point target plus an off-axis interferer in the input only: learn to
    /// null sidelobe arrivals.
    Sidelobe,
}

impl PairKind {
    /// Numeric code stored in dataset files.
    pub fn code(&self) -> f32 {
        match self {
            PairKind::Emulation => 0.0,
            PairKind::Sidelobe => 1.0,
        }
    }

    pub fn from_code(code: f32) -> Result<PairKind> {
        if code == 0.0 {
            Ok(PairKind::Emulation)
        } else if code == 1.0 {
            Ok(PairKind::Sidelobe)
        } else {
            Err(Error::InvalidArgument(format!("unknown pair-kind code {code}")))
        }
    }
}

/// One training example: the same scene focused through two apertures, both
/// normalized by the input patch's largest absolute value.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub input: FocusedPatch,
    pub target: FocusedPatch,
    pub kind: PairKind,
}

/// Transmit and receive arrays for the input and output sides of a pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGeometry {
    pub technique: Technique,
    pub tx_in: ArrayGeometry,
    pub rx_in: ArrayGeometry,
    pub tx_out: ArrayGeometry,
    pub rx_out: ArrayGeometry,
}

impl PairGeometry {
    /// The standard configuration: the same array on transmit and receive,
    /// paired with its denser counterpart on the output side.
    pub fn aperture_pair(
        technique: Technique,
        small: &ArrayGeometry,
        large: &ArrayGeometry,
    ) -> PairGeometry {
        PairGeometry {
            technique,
            tx_in: small.clone(),
            rx_in: small.clone(),
            tx_out: large.clone(),
            rx_out: large.clone(),
        }
    }

    /// Channels per input patch.
    pub fn n_channels_in(&self) -> usize {
        self.rx_in.n_elements()
    }

    /// Channels per target patch.
    pub fn n_channels_out(&self) -> usize {
        self.rx_out.n_elements()
    }

    pub fn validate(&self) -> Result<()> {
        let (n_in, n_out) = (self.n_channels_in(), self.n_channels_out());
        if n_out != 2 * n_in - 1 {
            return Err(Error::Config(format!(
                "output aperture must hold 2n-1 = {} receive elements for {n_in} inputs, got {n_out}",
                2 * n_in - 1
            )));
        }
        match self.technique {
            Technique::Sa => {
                if self.tx_in.positions() != self.rx_in.positions()
                    || self.tx_out.positions() != self.rx_out.positions()
                {
                    return Err(Error::Config(
                        "the monostatic technique needs identical transmit and receive arrays"
                            .into(),
                    ));
                }
            }
            Technique::Sta => {
                for &x in self.tx_in.positions() {
                    matched_tx_index(&self.tx_out, x)?;
                }
            }
            Technique::Pa => {}
        }
        Ok(())
    }
}

/// Index of the element of `array` co-located with `x`.
fn matched_tx_index(array: &ArrayGeometry, x: f64) -> Result<usize> {
    array
        .positions()
        .iter()
        .position(|&p| (p - x).abs() <= TX_MATCH_TOLERANCE)
        .ok_or_else(|| {
            Error::Config(format!(
                "no output transmit element is co-located with the input element at x = {x} m"
            ))
        })
}

/// Everything pair generation needs, minus the randomness.
#[derive(Debug, Clone)]
pub struct PairGenSpec {
    pub geometry: PairGeometry,
    pub pulse: PulseWaveform,
    pub acquisition: AcquisitionConfig,
    /// Patch length in samples.
    pub n_time: usize,
}

impl PairGenSpec {
    pub fn validate(&self) -> Result<()> {
        self.acquisition.validate()?;
        self.geometry.validate()?;
        check_patch_cols(self.n_time)
    }

    /// Shape of the patches this spec produces, as the network sees them.
    pub fn patch_shape(&self) -> Result<PatchShape> {
        PatchShape::new(self.geometry.n_channels_in(), self.n_time)
    }
}

/// Off-axis interferer of a sidelobe pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interferer {
    /// Steering angle [rad]; the interferer sits at the focal depth.
    pub theta: f64,
    /// Amplitude relative to the main target.
    pub amplitude: f64,
}

/// The random draws behind one pair, separated from the simulation so the
/// sampling distributions can be tested cheaply and pairs can be built from
/// explicit geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairParams {
    pub kind: PairKind,
    pub focal: FocalPoint,
    /// Transmit element of the input array (used by the STA technique).
    pub tx_index: usize,
    /// Present exactly when `kind` is [`PairKind::Sidelobe`].
    pub interferer: Option<Interferer>,
}

/// Smallest and largest angular offset an interferer may take: from the
/// first-null heuristic `asin(lambda / aperture)` of the input receive
/// aperture out to the sector half-angle.
pub fn interferer_offset_bounds(spec: &PairGenSpec) -> Result<(f64, f64)> {
    let lambda = spec.acquisition.c / spec.pulse.center_frequency();
    let aperture = spec.geometry.rx_in.extent();
    let ratio = if aperture > 0.0 { (lambda / aperture).min(1.0) } else { 1.0 };
    let lo = ratio.asin();
    let hi = spec.acquisition.sector_angle / 2.0;
    if !(lo < hi) {
        return Err(Error::Config(format!(
            "receive aperture too small: the minimum interferer offset {:.2} deg does not lie below the sector half-angle {:.2} deg",
            lo.to_degrees(),
            hi.to_degrees()
        )));
    }
    Ok((lo, hi))
}

/// Draws the parameters of one pair. The draw order is part of the dataset
/// format — reordering the draws changes every seeded dataset:
/// steering angle, depth, transmit element (STA only), then for sidelobe
/// pairs the interferer offset, side, and gain.
pub fn draw_pair_params<R: Rng>(
    rng: &mut R,
    spec: &PairGenSpec,
    kind: PairKind,
) -> Result<PairParams> {
    let half = spec.acquisition.sector_angle / 2.0;
    let theta = rng.gen_range(-half..half);
    let depth = rng.gen_range(spec.acquisition.depth_min..spec.acquisition.depth_max);
    let tx_index = match spec.geometry.technique {
        Technique::Sta => rng.gen_range(0..spec.geometry.tx_in.n_elements()),
        Technique::Sa | Technique::Pa => 0,
    };
    let interferer = match kind {
        PairKind::Emulation => None,
        PairKind::Sidelobe => {
            let (lo, hi) = interferer_offset_bounds(spec)?;
            let offset = rng.gen_range(lo..hi);
            let side = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let gain_db = rng.gen_range(-6.0..6.0);
            Some(Interferer {
                theta: theta + side * offset,
                amplitude: 10.0_f64.powf(gain_db / 20.0),
            })
        }
    };
    Ok(PairParams { kind, focal: FocalPoint::new(theta, depth), tx_index, interferer })
}

/// Builds one training pair from explicit parameters: simulates the scene
/// through both apertures, focuses both recordings at the focal point, and
/// normalizes both patches by the input's largest absolute value. Parameter
/// positions are taken as given — only their mutual consistency is checked —
/// so oracles and stress cases can place targets freely.
pub fn make_pair(spec: &PairGenSpec, params: &PairParams) -> Result<TrainingPair> {
    spec.validate()?;
    match (params.kind, params.interferer.is_some()) {
        (PairKind::Sidelobe, false) => {
            return Err(Error::InvalidArgument(
                "a sidelobe pair needs an interferer".into(),
            ))
        }
        (PairKind::Emulation, true) => {
            return Err(Error::InvalidArgument(
                "an emulation pair cannot carry an interferer".into(),
            ))
        }
        _ => {}
    }

    let (mx, mz) = params.focal.xz();
    let mut points = vec![(mx, mz, 1.0)];
    if let Some(intf) = params.interferer {
        points.push((
            params.focal.depth * intf.theta.sin(),
            params.focal.depth * intf.theta.cos(),
            intf.amplitude,
        ));
    }
    let input_phantom = make_point_phantom(&points)?;
    let target_phantom = make_point_phantom(&points[..1])?;

    let (mut input, mut target) = simulate_and_focus(spec, params, &input_phantom, &target_phantom)?;

    let max = input.max_abs();
    let shared = if max > 0.0 { max } else { 1.0 };
    input.normalize_by(shared)?;
    target.normalize_by(shared)?;
    Ok(TrainingPair { input, target, kind: params.kind })
}

fn simulate_and_focus(
    spec: &PairGenSpec,
    params: &PairParams,
    input_phantom: &Phantom,
    target_phantom: &Phantom,
) -> Result<(FocusedPatch, FocusedPatch)> {
    let g = &spec.geometry;
    let (pulse, cfg, t) = (&spec.pulse, &spec.acquisition, spec.n_time);
    let focal = params.focal;
    match g.technique {
        Technique::Sa => {
            let din = simulate_sa(&g.rx_in, pulse, cfg, input_phantom)?;
            let dout = simulate_sa(&g.rx_out, pulse, cfg, target_phantom)?;
            Ok((
                focus_sa(&din, &g.rx_in, pulse, cfg, focal, t)?,
                focus_sa(&dout, &g.rx_out, pulse, cfg, focal, t)?,
            ))
        }
        Technique::Sta => {
            if params.tx_index >= g.tx_in.n_elements() {
                return Err(Error::InvalidArgument(format!(
                    "transmit element {} out of range for {} elements",
                    params.tx_index,
                    g.tx_in.n_elements()
                )));
            }
            let x = g.tx_in.position(params.tx_index);
            let xo = g.tx_out.position(matched_tx_index(&g.tx_out, x)?);
            let tx_one_in = ArrayGeometry::from_positions(vec![x])?;
            let tx_one_out = ArrayGeometry::from_positions(vec![xo])?;
            let din = simulate_sta_split(&tx_one_in, &g.rx_in, pulse, cfg, input_phantom)?;
            let dout = simulate_sta_split(&tx_one_out, &g.rx_out, pulse, cfg, target_phantom)?;
            Ok((
                focus_sta(&din, 0, &tx_one_in, &g.rx_in, pulse, cfg, focal, t)?,
                focus_sta(&dout, 0, &tx_one_out, &g.rx_out, pulse, cfg, focal, t)?,
            ))
        }
        Technique::Pa => {
            let line = [focal.theta];
            let din = simulate_pa_split(&g.tx_in, &g.rx_in, pulse, cfg, input_phantom, &line)?;
            let dout = simulate_pa_split(&g.tx_out, &g.rx_out, pulse, cfg, target_phantom, &line)?;
            Ok((
                focus_pa(&din, 0, &g.tx_in, &g.rx_in, pulse, cfg, focal, t)?,
                focus_pa(&dout, 0, &g.tx_out, &g.rx_out, pulse, cfg, focal, t)?,
            ))
        }
    }
}

/// Draws and builds one emulation pair.
pub fn gen_emulation_pair<R: Rng>(rng: &mut R, spec: &PairGenSpec) -> Result<TrainingPair> {
    make_pair(spec, &draw_pair_params(rng, spec, PairKind::Emulation)?)
}

/// Draws and builds one sidelobe pair.
pub fn gen_sidelobe_pair<R: Rng>(rng: &mut R, spec: &PairGenSpec) -> Result<TrainingPair> {
    make_pair(spec, &draw_pair_params(rng, spec, PairKind::Sidelobe)?)
}

// ---------------------------------------------------------------------------
// Dataset assembly and storage
// ---------------------------------------------------------------------------

/// Generator for pair `index` of the dataset seeded with `seed`: every index
/// gets its own stream, so pair `i` is the same no matter how many pairs are
/// generated or in which order.
pub fn pair_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Deterministic emulation/sidelobe interleaving: index `i` is a sidelobe
/// pair when the running total `floor((i+1) * mix)` advances, so every prefix
/// of `n` pairs holds exactly `floor(n * mix)` sidelobe pairs.
fn kind_for_index(index: usize, mix: f64) -> PairKind {
    let before = (index as f64 * mix).floor();
    let after = ((index as f64 + 1.0) * mix).floor();
    if after > before {
        PairKind::Sidelobe
    } else {
        PairKind::Emulation
    }
}

/// Per-pair metadata stored alongside the patches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairMeta {
    pub theta: f32,
    pub depth: f32,
    pub scale: f32,
    pub kind: PairKind,
}

/// An in-memory training set: flattened patches plus per-pair metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    pub n_in: usize,
    pub n_out: usize,
    pub n_time: usize,
    pub meta: Vec<PairMeta>,
    /// Row-major `[n_pairs, n_in * n_time]`.
    pub inputs: Vec<f32>,
    /// Row-major `[n_pairs, n_out * n_time]`.
    pub targets: Vec<f32>,
    /// Plain-text generation parameters carried in the file header.
    pub header: Vec<(String, String)>,
}

impl PairSet {
    pub fn empty(
        n_in: usize,
        n_out: usize,
        n_time: usize,
        header: Vec<(String, String)>,
    ) -> PairSet {
        PairSet {
            n_in,
            n_out,
            n_time,
            meta: Vec::new(),
            inputs: Vec::new(),
            targets: Vec::new(),
            header,
        }
    }

    pub fn n_pairs(&self) -> usize {
        self.meta.len()
    }

    pub fn input(&self, i: usize) -> &[f32] {
        let len = self.n_in * self.n_time;
        &self.inputs[i * len..(i + 1) * len]
    }

    pub fn target(&self, i: usize) -> &[f32] {
        let len = self.n_out * self.n_time;
        &self.targets[i * len..(i + 1) * len]
    }

    pub fn count_kind(&self, kind: PairKind) -> usize {
        self.meta.iter().filter(|m| m.kind == kind).count()
    }

    pub fn patch_shape(&self) -> Result<PatchShape> {
        let shape = PatchShape::new(self.n_in, self.n_time)?;
        if shape.n_channels_out != self.n_out {
            return Err(Error::InvalidArgument(format!(
                "set holds {} output channels but {} inputs imply {}",
                self.n_out, self.n_in, shape.n_channels_out
            )));
        }
        Ok(shape)
    }

    /// The set viewed as flat training arrays.
    pub fn train_set(&self) -> TrainSet<'_> {
        TrainSet::new(&self.inputs, &self.targets, self.n_pairs())
    }

    /// Appends one pair, checking it matches the set's shapes and the shared
    /// focal-point/scale invariant.
    pub fn push(&mut self, pair: &TrainingPair) -> Result<()> {
        let (i, t) = (&pair.input, &pair.target);
        if i.n_channels != self.n_in
            || t.n_channels != self.n_out
            || i.n_time != self.n_time
            || t.n_time != self.n_time
        {
            return Err(Error::InvalidArgument(format!(
                "pair shapes ({} x {}, {} x {}) do not match the set ({} x {}, {} x {})",
                i.n_channels, i.n_time, t.n_channels, t.n_time,
                self.n_in, self.n_time, self.n_out, self.n_time
            )));
        }
        if i.focal != t.focal || i.scale != t.scale {
            return Err(Error::InvalidArgument(
                "input and target must share focal point and scale".into(),
            ));
        }
        self.meta.push(PairMeta {
            theta: i.focal.theta as f32,
            depth: i.focal.depth as f32,
            scale: i.scale,
            kind: pair.kind,
        });
        self.inputs.extend_from_slice(&i.values);
        self.targets.extend_from_slice(&t.values);
        Ok(())
    }

    /// Writes the set as a record file: three records per pair — metadata
    /// `[theta, depth, scale, kind]`, the input patch, and the target patch.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut records = Vec::with_capacity(3 * self.n_pairs());
        for (i, m) in self.meta.iter().enumerate() {
            records.push(Tensor::from_slice(&[4], &[m.theta, m.depth, m.scale, m.kind.code()])?);
            records.push(Tensor::from_slice(&[self.n_in, self.n_time], self.input(i))?);
            records.push(Tensor::from_slice(&[self.n_out, self.n_time], self.target(i))?);
        }
        let pairs: Vec<(&str, String)> =
            self.header.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
        tensor::write_records(path, &tensor::render_header(&pairs), &records)
    }

    /// Reads a set written by [`PairSet::save`].
    pub fn load(path: &Path) -> Result<PairSet> {
        let file = tensor::read_records(path)?;
        if file.records.is_empty() || file.records.len() % 3 != 0 {
            return Err(Error::InvalidArgument(format!(
                "a dataset file holds three records per pair, found {}",
                file.records.len()
            )));
        }
        let header = tensor::parse_header(&file.header)?;
        let first_input = file.records[1].dims_usize();
        let first_target = file.records[2].dims_usize();
        if first_input.len() != 2 || first_target.len() != 2 {
            return Err(Error::InvalidArgument(
                "dataset patches must be two-dimensional".into(),
            ));
        }
        let (n_in, n_time) = (first_input[0], first_input[1]);
        let n_out = first_target[0];
        if n_out != 2 * n_in - 1 || first_target[1] != n_time {
            return Err(Error::InvalidArgument(format!(
                "dataset target shape {first_target:?} does not match inputs {first_input:?}"
            )));
        }
        let mut set = PairSet::empty(n_in, n_out, n_time, header);
        for (i, triple) in file.records.chunks_exact(3).enumerate() {
            let (meta, input, target) = (&triple[0], &triple[1], &triple[2]);
            if meta.dims != [4] {
                return Err(Error::InvalidArgument(format!(
                    "pair {i}: metadata record has dims {:?}, expected [4]",
                    meta.dims
                )));
            }
            if input.dims_usize() != first_input || target.dims_usize() != first_target {
                return Err(Error::InvalidArgument(format!(
                    "pair {i}: patch shapes differ from the first pair"
                )));
            }
            let scale = meta.data[2];
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "pair {i}: normalization factor {scale} is not positive and finite"
                )));
            }
            set.meta.push(PairMeta {
                theta: meta.data[0],
                depth: meta.data[1],
                scale,
                kind: PairKind::from_code(meta.data[3])?,
            });
            set.inputs.extend_from_slice(&input.data);
            set.targets.extend_from_slice(&target.data);
        }
        Ok(set)
    }
}

fn dataset_header(spec: &PairGenSpec, n_pairs: usize, mix: f64, seed: u64) -> Vec<(String, String)> {
    let g = &spec.geometry;
    let a = &spec.acquisition;
    let mut h: Vec<(&str, String)> = vec![
        ("kind", "training-pairs".to_string()),
        ("technique", g.technique.to_string()),
        ("n_pairs", n_pairs.to_string()),
        ("mix", mix.to_string()),
        ("seed", seed.to_string()),
        ("n_time", spec.n_time.to_string()),
        ("n_channels_in", g.n_channels_in().to_string()),
        ("n_channels_out", g.n_channels_out().to_string()),
        ("rx_pitch_in_m", g.rx_in.pitch().to_string()),
        ("rx_pitch_out_m", g.rx_out.pitch().to_string()),
        ("f0_hz", spec.pulse.center_frequency().to_string()),
        ("pulse_cycles", spec.pulse.n_cycles().to_string()),
        ("fs_hz", a.fs.to_string()),
        ("c_m_per_s", a.c.to_string()),
        ("depth_min_m", a.depth_min.to_string()),
        ("depth_max_m", a.depth_max.to_string()),
        ("sector_angle_rad", a.sector_angle.to_string()),
    ];
    if g.technique == Technique::Pa {
        h.push(("tx_focus_depth_m", a.tx_focus_depth.to_string()));
    }
    h.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Generates `n_pairs` training pairs. `mix` is the sidelobe fraction; pair
/// `i` is generated from its own stream of `seed`, so the result is
/// deterministic and prefix-stable.
pub fn build_pairs(spec: &PairGenSpec, n_pairs: usize, mix: f64, seed: u64) -> Result<PairSet> {
    if n_pairs == 0 {
        return Err(Error::InvalidArgument("a dataset needs at least one pair".into()));
    }
    if !(0.0..=1.0).contains(&mix) {
        return Err(Error::InvalidArgument(format!(
            "the sidelobe fraction must lie in [0, 1], got {mix}"
        )));
    }
    spec.validate()?;
    let mut set = PairSet::empty(
        spec.geometry.n_channels_in(),
        spec.geometry.n_channels_out(),
        spec.n_time,
        dataset_header(spec, n_pairs, mix, seed),
    );
    for index in 0..n_pairs {
        let mut rng = pair_rng(seed, index);
        let params = draw_pair_params(&mut rng, spec, kind_for_index(index, mix))?;
        set.push(&make_pair(spec, &params)?)?;
    }
    Ok(set)
}

/// [`build_pairs`] followed by [`PairSet::save`].
pub fn build_dataset(
    spec: &PairGenSpec,
    n_pairs: usize,
    mix: f64,
    seed: u64,
    path: &Path,
) -> Result<PairSet> {
    let set = build_pairs(spec, n_pairs, mix, seed)?;
    set.save(path)?;
    Ok(set)
}
