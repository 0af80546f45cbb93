//! Probe geometry, excitation pulse, acquisition settings, and phantoms.
//!
//! Units are SI throughout: meters, seconds, hertz. The array lies on the
//! x-axis, elements are ideal points, and the imaged half-plane is z > 0.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A uniform linear array centered on the origin of the x-axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    positions: Vec<f64>,
    pitch: f64,
}

/// Builds an `n_elements` linear array from an element width and kerf.
/// The pitch is `width + kerf` and the aperture is centered on x = 0.
pub fn make_linear_array(n_elements: usize, element_width: f64, kerf: f64) -> Result<ArrayGeometry> {
    if n_elements == 0 {
        return Err(Error::InvalidArgument("array needs at least one element".into()));
    }
    if element_width <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "element width must be positive, got {element_width}"
        )));
    }
    if kerf < 0.0 {
        return Err(Error::InvalidArgument(format!("kerf must be non-negative, got {kerf}")));
    }
    let pitch = element_width + kerf;
    Ok(ArrayGeometry::centered(n_elements, pitch))
}

impl ArrayGeometry {
    /// Centered array with the given element count and pitch.
    pub fn centered(n_elements: usize, pitch: f64) -> ArrayGeometry {
        let mid = (n_elements as f64 - 1.0) / 2.0;
        let positions = (0..n_elements).map(|i| (i as f64 - mid) * pitch).collect();
        ArrayGeometry { positions, pitch }
    }

    /// Wraps an explicit, strictly increasing, uniformly spaced position list.
    pub fn from_positions(positions: Vec<f64>) -> Result<ArrayGeometry> {
        if positions.is_empty() {
            return Err(Error::InvalidArgument("array needs at least one element".into()));
        }
        let pitch = if positions.len() == 1 {
            0.0
        } else {
            let pitch = positions[1] - positions[0];
            if pitch <= 0.0 {
                return Err(Error::InvalidArgument(
                    "element positions must be strictly increasing".into(),
                ));
            }
            for w in positions.windows(2) {
                let step = w[1] - w[0];
                if (step - pitch).abs() > 1e-9 * pitch.max(1e-12) {
                    return Err(Error::InvalidArgument(format!(
                        "element positions must be uniformly spaced (found steps {pitch} and {step})"
                    )));
                }
            }
            pitch
        };
        Ok(ArrayGeometry { positions, pitch })
    }

    pub fn n_elements(&self) -> usize {
        self.positions.len()
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn position(&self, index: usize) -> f64 {
        self.positions[index]
    }

    /// Aperture length from first to last element center.
    pub fn extent(&self) -> f64 {
        match self.positions.len() {
            0 | 1 => 0.0,
            n => self.positions[n - 1] - self.positions[0],
        }
    }

    /// The companion array with `2n - 1` elements at the same pitch, centered
    /// on the same origin. For odd `n` every element of `self` sits exactly on
    /// an element of the companion.
    pub fn large_pair(&self) -> ArrayGeometry {
        ArrayGeometry::centered(2 * self.n_elements() - 1, self.pitch)
    }

    /// Keeps every `factor`-th element starting from the first (stride
    /// decimation). Valid when the count splits evenly into strides, i.e.
    /// `n % factor == 0` or `(n - 1) % factor == 0`.
    pub fn receive_subset(&self, factor: usize) -> Result<ArrayGeometry> {
        let n = self.n_elements();
        if !matches!(factor, 1 | 2 | 4 | 8) {
            return Err(Error::InvalidArgument(format!(
                "subset factor must be one of 1, 2, 4, 8, got {factor}"
            )));
        }
        if n % factor != 0 && (n - 1) % factor != 0 {
            return Err(Error::InvalidArgument(format!(
                "cannot decimate {n} elements by a factor of {factor}"
            )));
        }
        let positions: Vec<f64> = self.positions.iter().copied().step_by(factor).collect();
        Ok(ArrayGeometry { positions, pitch: self.pitch * factor as f64 })
    }

    /// Indices kept by [`receive_subset`](Self::receive_subset).
    pub fn subset_indices(&self, factor: usize) -> Vec<usize> {
        (0..self.n_elements()).step_by(factor).collect()
    }
}

/// Amplitude window applied over the pulse duration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Hann,
    Rect,
}

/// A windowed sinusoidal excitation pulse supported on `[0, duration)`.
///
/// The closed-form expression is kept so the waveform can be evaluated at
/// arbitrary continuous offsets; `samples` holds the waveform on the
/// acquisition sampling grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseWaveform {
    f0: f64,
    n_cycles: f64,
    fs: f64,
    window: Window,
    duration: f64,
    samples: Vec<f64>,
}

/// Builds a pulse of `n_cycles` periods of a sinusoid at `f0`, shaped by
/// `window` and sampled at `fs`.
pub fn make_pulse(f0: f64, n_cycles: f64, fs: f64, window: Window) -> Result<PulseWaveform> {
    if f0 <= 0.0 || n_cycles <= 0.0 || fs <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "pulse parameters must be positive (f0 = {f0}, n_cycles = {n_cycles}, fs = {fs})"
        )));
    }
    let duration = n_cycles / f0;
    let n_samples = (fs * duration).round() as usize;
    let mut pulse = PulseWaveform { f0, n_cycles, fs, window, duration, samples: Vec::new() };
    pulse.samples = (0..n_samples).map(|k| pulse.eval(k as f64 / fs)).collect();
    Ok(pulse)
}

impl PulseWaveform {
    /// Evaluates the closed-form waveform at time `t` (zero outside the
    /// support `[0, duration)`).
    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 || t >= self.duration {
            return 0.0;
        }
        let carrier = (2.0 * std::f64::consts::PI * self.f0 * t).sin();
        carrier * self.window_value(t)
    }

    fn window_value(&self, t: f64) -> f64 {
        match self.window {
            Window::Rect => 1.0,
            Window::Hann => 0.5 - 0.5 * (2.0 * std::f64::consts::PI * t / self.duration).cos(),
        }
    }

    pub fn center_frequency(&self) -> f64 {
        self.f0
    }

    pub fn n_cycles(&self) -> f64 {
        self.n_cycles
    }

    pub fn sample_rate(&self) -> f64 {
        self.fs
    }

    pub fn window(&self) -> Window {
        self.window
    }

    /// Pulse length in seconds.
    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Waveform sampled at `k / fs`.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }
}

/// Scan-geometry and medium parameters shared by every technique.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionConfig {
    /// Speed of sound [m/s].
    pub c: f64,
    /// Sampling rate of the receive chain [Hz].
    pub fs: f64,
    /// Shallowest imaged depth [m].
    pub depth_min: f64,
    /// Deepest imaged depth [m].
    pub depth_max: f64,
    /// Full opening angle of the imaged sector [rad].
    pub sector_angle: f64,
    /// Number of scan lines spanning the sector.
    pub n_scan_lines: usize,
    /// Transmit focal depth for the phased-array technique [m].
    pub tx_focus_depth: f64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        AcquisitionConfig {
            c: 1540.0,
            fs: 16.0e6,
            depth_min: 0.010,
            depth_max: 0.070,
            sector_angle: 48.0_f64.to_radians(),
            n_scan_lines: 33,
            tx_focus_depth: 0.050,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.c <= 0.0 || self.fs <= 0.0 {
            return Err(Error::Config(format!(
                "speed of sound and sampling rate must be positive (c = {}, fs = {})",
                self.c, self.fs
            )));
        }
        if !(self.depth_min > 0.0 && self.depth_min < self.depth_max) {
            return Err(Error::Config(format!(
                "depth range must satisfy 0 < min < max (got {}..{})",
                self.depth_min, self.depth_max
            )));
        }
        if !(self.sector_angle > 0.0 && self.sector_angle < std::f64::consts::PI) {
            return Err(Error::Config(format!(
                "sector angle must lie in (0, pi), got {}",
                self.sector_angle
            )));
        }
        if self.n_scan_lines == 0 {
            return Err(Error::Config("at least one scan line is required".into()));
        }
        if self.tx_focus_depth <= 0.0 {
            return Err(Error::Config(format!(
                "transmit focus depth must be positive, got {}",
                self.tx_focus_depth
            )));
        }
        Ok(())
    }

    /// Scan-line steering angles, symmetric about broadside.
    pub fn line_angles(&self) -> Vec<f64> {
        line_angles(self.sector_angle, self.n_scan_lines)
    }
}

/// `n` steering angles spanning `sector_angle` symmetrically about broadside.
pub fn line_angles(sector_angle: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    let half = sector_angle / 2.0;
    let step = sector_angle / (n as f64 - 1.0);
    (0..n).map(|i| -half + i as f64 * step).collect()
}

/// An ideal point scatterer at `(x, z)` with a linear reflection amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    pub x: f64,
    pub z: f64,
    pub amplitude: f64,
}

/// A collection of point scatterers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Phantom {
    pub scatterers: Vec<Scatterer>,
}

impl Phantom {
    pub fn is_empty(&self) -> bool {
        self.scatterers.is_empty()
    }

    pub fn len(&self) -> usize {
        self.scatterers.len()
    }
}

/// Axis-aligned rectangle in the imaging plane, `x0 < x1`, `0 < z0 < z1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub z0: f64,
    pub x1: f64,
    pub z1: f64,
}

impl Rect {
    pub fn new(x0: f64, z0: f64, x1: f64, z1: f64) -> Result<Rect> {
        if !(x0 < x1 && z0 < z1) {
            return Err(Error::InvalidArgument(format!(
                "rectangle must satisfy x0 < x1 and z0 < z1 (got x {x0}..{x1}, z {z0}..{z1})"
            )));
        }
        if z0 <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "rectangle must lie in front of the array (z0 = {z0})"
            )));
        }
        Ok(Rect { x0, z0, x1, z1 })
    }

    pub fn contains(&self, x: f64, z: f64) -> bool {
        x >= self.x0 && x <= self.x1 && z >= self.z0 && z <= self.z1
    }
}

/// Builds a phantom from explicit `(x, z, amplitude)` triples. Every point
/// must lie in front of the array (z > 0).
pub fn make_point_phantom(points: &[(f64, f64, f64)]) -> Result<Phantom> {
    for &(x, z, _) in points {
        if z <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "scatterer at ({x}, {z}) lies behind the array"
            )));
        }
    }
    Ok(Phantom {
        scatterers: points.iter().map(|&(x, z, amplitude)| Scatterer { x, z, amplitude }).collect(),
    })
}

/// Fills `region` with `n_scatterers` uniformly placed scatterers whose
/// amplitudes follow a standard normal distribution, then removes every
/// scatterer inside the anechoic disc of `cyst_radius` around `cyst_center`.
/// The disc must lie inside the region. Identical seeds reproduce the phantom
/// exactly; an empty result (every draw landed in the disc) is valid.
pub fn make_cyst_phantom(
    region: Rect,
    cyst_center: (f64, f64),
    cyst_radius: f64,
    n_scatterers: usize,
    seed: u64,
) -> Result<Phantom> {
    if cyst_radius <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "cyst radius must be positive, got {cyst_radius}"
        )));
    }
    let (cx, cz) = cyst_center;
    let inside = cx - cyst_radius >= region.x0
        && cx + cyst_radius <= region.x1
        && cz - cyst_radius >= region.z0
        && cz + cyst_radius <= region.z1;
    if !inside {
        return Err(Error::InvalidArgument(format!(
            "cyst disc (center ({cx}, {cz}), radius {cyst_radius}) must lie inside the region"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scatterers = Vec::with_capacity(n_scatterers);
    for _ in 0..n_scatterers {
        let x = region.x0 + rng.gen::<f64>() * (region.x1 - region.x0);
        let z = region.z0 + rng.gen::<f64>() * (region.z1 - region.z0);
        let amplitude = standard_normal(&mut rng);
        if (x - cx).powi(2) + (z - cz).powi(2) > cyst_radius * cyst_radius {
            scatterers.push(Scatterer { x, z, amplitude });
        }
    }
    Ok(Phantom { scatterers })
}

/// One standard-normal draw via the Box-Muller transform.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // gen::<f64>() yields [0, 1); flip to (0, 1] so the log stays finite.
    let u1 = 1.0 - rng.gen::<f64>();
    let u2 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
