//! Command-line front end for the beamforming laboratory.
//!
//! Every subcommand reads an experiment configuration (`--config`, or the
//! built-in defaults when omitted), applies any `--set section.key=value`
//! overrides, runs one stage of the workflow, and writes its artifacts plus a
//! resolved `config.cfg` snapshot into `--out`.

pub mod commands;
pub mod files;
pub mod phantom;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use usbf_core::config::ExperimentConfig;
use usbf_core::{Error, Result};

use commands::{Aperture, ApertureSweepOptions, Method, ReconstructOptions};

#[derive(Parser)]
#[command(
    name = "usbf",
    about = "Ultrasound beamforming laboratory: simulate, train, reconstruct, evaluate",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand.
#[derive(Args)]
pub struct Common {
    /// Experiment configuration file (defaults apply when omitted).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Override one configuration value, e.g. `--set experiment.seed=7`.
    /// Repeatable.
    #[arg(long, value_name = "SECTION.KEY=VALUE")]
    pub set: Vec<String>,

    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Subcommand)]
pub enum Command {
    /// Simulate channel data for a phantom file.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Phantom description file.
        #[arg(long, value_name = "FILE")]
        phantom: PathBuf,
        /// Which configured aperture records the data.
        #[arg(long, value_enum, default_value = "small")]
        aperture: Aperture,
    },
    /// Generate a training dataset of small/large aperture patch pairs.
    BuildDataset {
        #[command(flatten)]
        common: Common,
    },
    /// Train an emulation network on a dataset file.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset file from `build-dataset`.
        #[arg(long, value_name = "FILE")]
        dataset: PathBuf,
    },
    /// Reconstruct a sector image from a channel-data file.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Channel-data file from `simulate`.
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
        /// Reconstruction method.
        #[arg(long, value_enum, default_value = "das")]
        method: Method,
        /// Trained weights file (required for the dnnb method).
        #[arg(long, value_name = "FILE")]
        weights: Option<PathBuf>,
        /// Average overlapping patch estimates instead of keeping only each
        /// patch's center column.
        #[arg(long)]
        overlap: bool,
        /// Dynamic range of the log-compressed images [dB].
        #[arg(long, default_value_t = 60.0, value_name = "DB")]
        dynamic_range: f64,
        /// Depth sampling of the reconstruction grid [m]
        /// (default: half a wavelength of the sampling rate, c / 2 fs).
        #[arg(long, value_name = "METERS")]
        depth_step: Option<f64>,
        /// Pixel pitch of the scan-converted raster [m] (default: the depth
        /// step).
        #[arg(long, value_name = "METERS")]
        pixel_pitch: Option<f64>,
    },
    /// Measure image-quality metrics on a reconstructed envelope image.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Envelope image file from `reconstruct`.
        #[arg(long, value_name = "FILE")]
        image: PathBuf,
        /// Target list describing what to measure.
        #[arg(long, value_name = "FILE")]
        targets: PathBuf,
    },
    /// Sweep a point target over depth and tabulate resolution metrics.
    SweepDepth {
        #[command(flatten)]
        common: Common,
        /// Trained weights file; adds DNNB columns to the table.
        #[arg(long, value_name = "FILE")]
        weights: Option<PathBuf>,
        /// Number of sweep depths.
        #[arg(long, default_value_t = 6, value_name = "N")]
        depths: usize,
    },
    /// Sweep receive-aperture reduction factors on a cyst scene.
    SweepAperture {
        #[command(flatten)]
        common: Common,
        /// Directory holding `weights_f<factor>.usbf` files; adds DNNB
        /// columns to the table.
        #[arg(long, value_name = "DIR")]
        weights_dir: Option<PathBuf>,
        /// Cyst center depth [m].
        #[arg(long, default_value_t = 0.05, value_name = "METERS")]
        cyst_depth: f64,
        /// Cyst radius [m].
        #[arg(long, default_value_t = 0.004, value_name = "METERS")]
        cyst_radius: f64,
        /// Scatterers in the speckle field.
        #[arg(long, default_value_t = 20_000, value_name = "N")]
        scatterers: usize,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Simulate { common, .. }
            | Command::BuildDataset { common }
            | Command::Train { common, .. }
            | Command::Reconstruct { common, .. }
            | Command::Evaluate { common, .. }
            | Command::SweepDepth { common, .. }
            | Command::SweepAperture { common, .. } => common,
        }
    }
}

/// Loads the configuration file (or defaults) and applies `--set` overrides.
fn resolve_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    for assignment in &common.set {
        apply_override(&mut cfg, assignment)?;
    }
    Ok(cfg)
}

/// Applies one `section.key=value` assignment to the configuration.
fn apply_override(cfg: &mut ExperimentConfig, assignment: &str) -> Result<()> {
    let bad = || {
        Error::InvalidArgument(format!(
            "override must look like section.key=value, got `{assignment}`"
        ))
    };
    let (path, value) = assignment.split_once('=').ok_or_else(bad)?;
    let (section, key) = path.split_once('.').ok_or_else(bad)?;
    let (section, key, value) = (section.trim(), key.trim(), value.trim());
    if section.is_empty() || key.is_empty() || value.is_empty() {
        return Err(bad());
    }
    cfg.assign(section, key, value)
        .map_err(|e| Error::Config(format!("override `{assignment}`: {e}")))
}

/// Runs one parsed invocation.
pub fn run(cli: Cli) -> Result<()> {
    let cfg = resolve_config(cli.command.common())?;
    match &cli.command {
        Command::Simulate { common, phantom, aperture } => {
            commands::cmd_simulate(&cfg, phantom, *aperture, &common.out)
        }
        Command::BuildDataset { common } => commands::cmd_build_dataset(&cfg, &common.out),
        Command::Train { common, dataset } => commands::cmd_train(&cfg, dataset, &common.out),
        Command::Reconstruct {
            common,
            data,
            method,
            weights,
            overlap,
            dynamic_range,
            depth_step,
            pixel_pitch,
        } => {
            let options = ReconstructOptions {
                method: *method,
                weights: weights.clone(),
                overlap: *overlap,
                dynamic_range_db: *dynamic_range,
                depth_step: *depth_step,
                pixel_pitch: *pixel_pitch,
            };
            commands::cmd_reconstruct(&cfg, data, &options, &common.out)
        }
        Command::Evaluate { common, image, targets } => {
            commands::cmd_evaluate(&cfg, image, targets, &common.out)
        }
        Command::SweepDepth { common, weights, depths } => {
            commands::cmd_sweep_depth(&cfg, weights.as_deref(), *depths, &common.out)
        }
        Command::SweepAperture { common, weights_dir, cyst_depth, cyst_radius, scatterers } => {
            let options = ApertureSweepOptions {
                weights_dir: weights_dir.clone(),
                cyst_depth: *cyst_depth,
                cyst_radius: *cyst_radius,
                n_scatterers: *scatterers,
            };
            commands::cmd_sweep_aperture(&cfg, &options, &common.out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(args).expect("arguments should parse")
    }

    #[test]
    fn subcommands_parse_with_their_flags() {
        let cli = parse(&[
            "usbf",
            "simulate",
            "--phantom",
            "p.phantom",
            "--aperture",
            "large",
            "--out",
            "run",
        ]);
        match cli.command {
            Command::Simulate { aperture, .. } => assert_eq!(aperture, Aperture::Large),
            _ => panic!("parsed the wrong command"),
        }

        let cli = parse(&[
            "usbf",
            "reconstruct",
            "--data",
            "d.usbf",
            "--method",
            "dnnb",
            "--weights",
            "w.usbf",
            "--overlap",
            "--out",
            "run",
        ]);
        match cli.command {
            Command::Reconstruct { method, weights, overlap, dynamic_range, .. } => {
                assert_eq!(method, Method::Dnnb);
                assert!(weights.is_some());
                assert!(overlap);
                assert_eq!(dynamic_range, 60.0);
            }
            _ => panic!("parsed the wrong command"),
        }

        let cli = parse(&["usbf", "sweep-depth", "--depths", "3", "--out", "run"]);
        match cli.command {
            Command::SweepDepth { depths, weights, .. } => {
                assert_eq!(depths, 3);
                assert!(weights.is_none());
            }
            _ => panic!("parsed the wrong command"),
        }
    }

    #[test]
    fn unknown_flags_are_rejected() {
        assert!(Cli::try_parse_from(["usbf", "simulate", "--bogus", "x"]).is_err());
        assert!(Cli::try_parse_from(["usbf", "no-such-command"]).is_err());
    }

    #[test]
    fn set_overrides_change_the_configuration() {
        let common = Common {
            config: None,
            set: vec!["experiment.seed=7".into(), "training.epochs=3".into()],
            out: PathBuf::from("unused"),
        };
        let cfg = resolve_config(&common).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.epochs, 3);
        // Everything else keeps its default.
        let mut expected = ExperimentConfig::default();
        expected.seed = 7;
        expected.epochs = 3;
        assert_eq!(cfg, expected);
    }

    #[test]
    fn malformed_overrides_are_rejected() {
        let mut cfg = ExperimentConfig::default();
        for bad in ["seed=7", "experiment.seed", "=x", "experiment.=3", "a.b=?"] {
            let before = cfg.clone();
            assert!(apply_override(&mut cfg, bad).is_err(), "`{bad}` should be rejected");
            assert_eq!(cfg, before, "a failed override must not change the configuration");
        }
    }
}
