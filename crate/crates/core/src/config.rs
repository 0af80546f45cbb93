//! Experiment configuration: one plain-text file that pins every parameter of
//! an experiment — acquisition constants, array geometry, pulse, dataset and
//! training budgets, network widths, technique, and seed.
//!
//! The format is `key = value` lines under `[section]` headers. Blank lines
//! and lines starting with `#` are skipped. Every key has a desk-scale
//! default, so the empty file is a complete configuration; unknown sections,
//! unknown keys, and duplicate keys are errors so typos cannot silently fall
//! back to defaults. [`ExperimentConfig::render`] writes the fully resolved
//! configuration back in the same format, and `parse(render(c)) == c`, which
//! is how every command echoes its exact parameters into its output
//! directory.

use std::path::Path;

use crate::array::{
    make_linear_array, make_pulse, AcquisitionConfig, ArrayGeometry, PulseWaveform, Window,
};
use crate::dataset::{PairGenSpec, PairGeometry};
use crate::error::{Error, Result};
use crate::neural::{NetworkConfig, PatchShape, TrainConfig};
use crate::wavesim::Technique;

/// Every parameter of an experiment, flat and fully defaulted. Lengths are in
/// meters, frequencies in hertz, and the sector angle in degrees (the one
/// human-facing unit; it is converted to radians at the acquisition
/// boundary).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    // [acquisition]
    pub speed_of_sound: f64,
    pub sample_rate: f64,
    pub depth_min: f64,
    pub depth_max: f64,
    pub sector_angle_deg: f64,
    pub n_scan_lines: usize,
    pub tx_focus_depth: f64,
    // [array] — the small aperture; the large aperture is always the
    // same-pitch centered array with 2n − 1 elements.
    pub n_elements: usize,
    pub element_width: f64,
    pub kerf: f64,
    // [pulse]
    pub center_frequency: f64,
    pub n_cycles: f64,
    pub window: Window,
    // [dataset]
    pub n_pairs: usize,
    pub sidelobe_mix: f64,
    pub patch_time: usize,
    // [network]
    pub dense_width_1: usize,
    pub dense_width_2: usize,
    pub leaky_slope: f64,
    // [training]
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub patience: u32,
    pub val_fraction: f64,
    // [experiment]
    pub technique: Technique,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    /// Desk-scale defaults: a 17-element aperture emulating 33 elements, 33
    /// scan lines, 8 000 training pairs — every experiment runs in minutes on
    /// one CPU core.
    fn default() -> Self {
        ExperimentConfig {
            speed_of_sound: 1540.0,
            sample_rate: 16.0e6,
            depth_min: 0.010,
            depth_max: 0.070,
            sector_angle_deg: 48.0,
            n_scan_lines: 33,
            tx_focus_depth: 0.050,
            n_elements: 17,
            element_width: 0.220e-3,
            kerf: 0.044e-3,
            center_frequency: 3.5e6,
            n_cycles: 1.75,
            window: Window::Hann,
            n_pairs: 8000,
            sidelobe_mix: 0.5,
            patch_time: 32,
            dense_width_1: 256,
            dense_width_2: 256,
            leaky_slope: 0.3,
            epochs: 50,
            batch_size: 64,
            learning_rate: 1e-3,
            lr_decay: 1e-8,
            patience: 5,
            val_fraction: 0.1,
            technique: Technique::Sa,
            seed: 1,
        }
    }
}

impl ExperimentConfig {
    /// The desk-scale configuration (same as [`Default`]).
    pub fn desk_scale() -> ExperimentConfig {
        ExperimentConfig::default()
    }

    /// The full-scale preset: 33-element aperture emulating 65 elements, 65
    /// scan lines, 30 000 training pairs. Several orders of magnitude more
    /// compute than the desk scale; all physics parameters are shared.
    pub fn full_scale() -> ExperimentConfig {
        ExperimentConfig {
            n_elements: 33,
            n_scan_lines: 65,
            n_pairs: 30_000,
            ..ExperimentConfig::default()
        }
    }

    /// Parses a configuration, starting from the desk-scale defaults and
    /// applying the file's overrides, then validates the result.
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// [`ExperimentConfig::parse`] on a file's contents.
    pub fn from_file(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        ExperimentConfig::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Applies one `section.key = value` assignment on top of the current
    /// state and re-validates. This is the command-line override path: unlike
    /// [`ExperimentConfig::parse`] it does not start from defaults, and the
    /// key may repeat a value the configuration already holds.
    pub fn assign(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let known = [
            "acquisition",
            "array",
            "pulse",
            "dataset",
            "network",
            "training",
            "experiment",
        ];
        if !known.contains(&section) {
            return Err(Error::Config(format!("unknown section [{section}]")));
        }
        let mut next = self.clone();
        next.set(section, key, value, 0).map_err(|e| match e {
            // The line number is meaningless for a single assignment.
            Error::Config(msg) => {
                Error::Config(msg.strip_prefix("line 0: ").unwrap_or(&msg).to_string())
            }
            other => other,
        })?;
        next.validate()?;
        *self = next;
        Ok(())
    }

    fn apply(&mut self, text: &str) -> Result<()> {
        let mut section: Option<&str> = None;
        let mut seen: Vec<(String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| {
                        Error::Config(format!("line {line_no}: unterminated section header"))
                    })?
                    .trim();
                section = Some(match name {
                    "acquisition" => "acquisition",
                    "array" => "array",
                    "pulse" => "pulse",
                    "dataset" => "dataset",
                    "network" => "network",
                    "training" => "training",
                    "experiment" => "experiment",
                    other => {
                        return Err(Error::Config(format!(
                            "line {line_no}: unknown section [{other}]"
                        )))
                    }
                });
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {line_no}: expected `key = value`, got `{line}`"))
            })?;
            let key = key.trim();
            let value = value.trim();
            let section = section.ok_or_else(|| {
                Error::Config(format!(
                    "line {line_no}: key `{key}` appears before any [section] header"
                ))
            })?;
            let id = (section.to_string(), key.to_string());
            if seen.contains(&id) {
                return Err(Error::Config(format!(
                    "line {line_no}: duplicate key `{key}` in [{section}]"
                )));
            }
            seen.push(id);
            self.set(section, key, value, line_no)?;
        }
        Ok(())
    }

    fn set(&mut self, section: &str, key: &str, value: &str, line_no: usize) -> Result<()> {
        fn float(value: &str, key: &str, line_no: usize) -> Result<f64> {
            let v: f64 = value.parse().map_err(|_| {
                Error::Config(format!("line {line_no}: `{key}` needs a number, got `{value}`"))
            })?;
            if !v.is_finite() {
                return Err(Error::Config(format!("line {line_no}: `{key}` must be finite")));
            }
            Ok(v)
        }
        fn integer<T: std::str::FromStr>(value: &str, key: &str, line_no: usize) -> Result<T> {
            value.parse().map_err(|_| {
                Error::Config(format!(
                    "line {line_no}: `{key}` needs a nonnegative integer, got `{value}`"
                ))
            })
        }

        match (section, key) {
            ("acquisition", "speed_of_sound") => self.speed_of_sound = float(value, key, line_no)?,
            ("acquisition", "sample_rate") => self.sample_rate = float(value, key, line_no)?,
            ("acquisition", "depth_min") => self.depth_min = float(value, key, line_no)?,
            ("acquisition", "depth_max") => self.depth_max = float(value, key, line_no)?,
            ("acquisition", "sector_angle_deg") => {
                self.sector_angle_deg = float(value, key, line_no)?
            }
            ("acquisition", "n_scan_lines") => self.n_scan_lines = integer(value, key, line_no)?,
            ("acquisition", "tx_focus_depth") => self.tx_focus_depth = float(value, key, line_no)?,
            ("array", "n_elements") => self.n_elements = integer(value, key, line_no)?,
            ("array", "element_width") => self.element_width = float(value, key, line_no)?,
            ("array", "kerf") => self.kerf = float(value, key, line_no)?,
            ("pulse", "center_frequency") => self.center_frequency = float(value, key, line_no)?,
            ("pulse", "n_cycles") => self.n_cycles = float(value, key, line_no)?,
            ("pulse", "window") => {
                self.window = match value {
                    "hann" => Window::Hann,
                    "rect" => Window::Rect,
                    other => {
                        return Err(Error::Config(format!(
                            "line {line_no}: `window` must be `hann` or `rect`, got `{other}`"
                        )))
                    }
                }
            }
            ("dataset", "n_pairs") => self.n_pairs = integer(value, key, line_no)?,
            ("dataset", "sidelobe_mix") => self.sidelobe_mix = float(value, key, line_no)?,
            ("dataset", "patch_time") => self.patch_time = integer(value, key, line_no)?,
            ("network", "dense_width_1") => self.dense_width_1 = integer(value, key, line_no)?,
            ("network", "dense_width_2") => self.dense_width_2 = integer(value, key, line_no)?,
            ("network", "leaky_slope") => self.leaky_slope = float(value, key, line_no)?,
            ("training", "epochs") => self.epochs = integer(value, key, line_no)?,
            ("training", "batch_size") => self.batch_size = integer(value, key, line_no)?,
            ("training", "learning_rate") => self.learning_rate = float(value, key, line_no)?,
            ("training", "lr_decay") => self.lr_decay = float(value, key, line_no)?,
            ("training", "patience") => self.patience = integer(value, key, line_no)?,
            ("training", "val_fraction") => self.val_fraction = float(value, key, line_no)?,
            ("experiment", "technique") => {
                self.technique = value.parse().map_err(|_| {
                    Error::Config(format!(
                        "line {line_no}: `technique` must be `sa`, `sta`, or `pa`, got `{value}`"
                    ))
                })?
            }
            ("experiment", "seed") => self.seed = integer(value, key, line_no)?,
            _ => {
                return Err(Error::Config(format!(
                    "line {line_no}: unknown key `{key}` in [{section}]"
                )))
            }
        }
        Ok(())
    }

    /// Checks the configuration as a whole, including everything the derived
    /// objects would reject, so a freshly parsed configuration is usable.
    pub fn validate(&self) -> Result<()> {
        self.acquisition().validate()?;
        self.pulse()?;
        let small = self.small_array()?;
        PatchShape::new(self.n_elements, self.patch_time)?;
        self.pair_spec_with(&small)?.validate()?;
        if !(0.0..=1.0).contains(&self.sidelobe_mix) {
            return Err(Error::Config(format!(
                "sidelobe_mix must lie in [0, 1], got {}",
                self.sidelobe_mix
            )));
        }
        if self.n_pairs == 0 {
            return Err(Error::Config("n_pairs must be at least 1".into()));
        }
        if self.dense_width_1 == 0 || self.dense_width_2 == 0 {
            return Err(Error::Config("dense widths must be positive".into()));
        }
        if !(self.leaky_slope.is_finite() && self.leaky_slope >= 0.0) {
            return Err(Error::Config("leaky_slope must be finite and nonnegative".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.lr_decay.is_finite() && self.lr_decay >= 0.0) {
            return Err(Error::Config("lr_decay must be finite and nonnegative".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config(format!(
                "val_fraction must lie in [0, 1), got {}",
                self.val_fraction
            )));
        }
        Ok(())
    }

    /// Renders the fully resolved configuration; parseable back to an equal
    /// value, stable across render→parse→render.
    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str("# Resolved experiment configuration.\n");
        s.push_str("# Lengths in meters, frequencies in hertz, angles in degrees.\n\n");
        s.push_str("[acquisition]\n");
        s.push_str(&format!("speed_of_sound = {}\n", self.speed_of_sound));
        s.push_str(&format!("sample_rate = {}\n", self.sample_rate));
        s.push_str(&format!("depth_min = {}\n", self.depth_min));
        s.push_str(&format!("depth_max = {}\n", self.depth_max));
        s.push_str(&format!("sector_angle_deg = {}\n", self.sector_angle_deg));
        s.push_str(&format!("n_scan_lines = {}\n", self.n_scan_lines));
        s.push_str(&format!("tx_focus_depth = {}\n", self.tx_focus_depth));
        s.push_str("\n[array]\n");
        s.push_str(&format!("n_elements = {}\n", self.n_elements));
        s.push_str(&format!("element_width = {}\n", self.element_width));
        s.push_str(&format!("kerf = {}\n", self.kerf));
        s.push_str("\n[pulse]\n");
        s.push_str(&format!("center_frequency = {}\n", self.center_frequency));
        s.push_str(&format!("n_cycles = {}\n", self.n_cycles));
        s.push_str(&format!(
            "window = {}\n",
            match self.window {
                Window::Hann => "hann",
                Window::Rect => "rect",
            }
        ));
        s.push_str("\n[dataset]\n");
        s.push_str(&format!("n_pairs = {}\n", self.n_pairs));
        s.push_str(&format!("sidelobe_mix = {}\n", self.sidelobe_mix));
        s.push_str(&format!("patch_time = {}\n", self.patch_time));
        s.push_str("\n[network]\n");
        s.push_str(&format!("dense_width_1 = {}\n", self.dense_width_1));
        s.push_str(&format!("dense_width_2 = {}\n", self.dense_width_2));
        s.push_str(&format!("leaky_slope = {}\n", self.leaky_slope));
        s.push_str("\n[training]\n");
        s.push_str(&format!("epochs = {}\n", self.epochs));
        s.push_str(&format!("batch_size = {}\n", self.batch_size));
        s.push_str(&format!("learning_rate = {}\n", self.learning_rate));
        s.push_str(&format!("lr_decay = {}\n", self.lr_decay));
        s.push_str(&format!("patience = {}\n", self.patience));
        s.push_str(&format!("val_fraction = {}\n", self.val_fraction));
        s.push_str("\n[experiment]\n");
        s.push_str(&format!("technique = {}\n", self.technique));
        s.push_str(&format!("seed = {}\n", self.seed));
        s
    }

    /// Writes [`ExperimentConfig::render`] to a file.
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }

    // -- derived objects ----------------------------------------------------

    pub fn acquisition(&self) -> AcquisitionConfig {
        AcquisitionConfig {
            c: self.speed_of_sound,
            fs: self.sample_rate,
            depth_min: self.depth_min,
            depth_max: self.depth_max,
            sector_angle: self.sector_angle_deg.to_radians(),
            n_scan_lines: self.n_scan_lines,
            tx_focus_depth: self.tx_focus_depth,
        }
    }

    pub fn pulse(&self) -> Result<PulseWaveform> {
        make_pulse(self.center_frequency, self.n_cycles, self.sample_rate, self.window)
    }

    /// The small (recording) aperture.
    pub fn small_array(&self) -> Result<ArrayGeometry> {
        make_linear_array(self.n_elements, self.element_width, self.kerf)
    }

    /// The large (emulated) aperture: same pitch, `2 n_elements − 1`
    /// elements, shared center.
    pub fn large_array(&self) -> Result<ArrayGeometry> {
        Ok(self.small_array()?.large_pair())
    }

    pub fn network(&self) -> NetworkConfig {
        NetworkConfig {
            dense_widths: vec![self.dense_width_1, self.dense_width_2],
            leaky_slope: self.leaky_slope,
        }
    }

    pub fn training(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.learning_rate,
            decay: self.lr_decay,
            hyper: Default::default(),
            patience: self.patience,
            val_fraction: self.val_fraction,
            seed: self.seed,
        }
    }

    /// Pair-generation spec for the configured technique and apertures.
    pub fn pair_spec(&self) -> Result<PairGenSpec> {
        self.pair_spec_with(&self.small_array()?)
    }

    fn pair_spec_with(&self, small: &ArrayGeometry) -> Result<PairGenSpec> {
        Ok(PairGenSpec {
            geometry: PairGeometry::aperture_pair(self.technique, small, &small.large_pair()),
            pulse: self.pulse()?,
            acquisition: self.acquisition(),
            n_time: self.patch_time,
        })
    }
}
