//! The experiment drivers behind the subcommands.
//!
//! Every command creates its output directory, writes the fully resolved
//! configuration snapshot into it as `config.cfg`, and then writes its own
//! artifacts. All commands are deterministic: the same configuration (and
//! input files) produces bit-identical outputs.

use std::path::{Path, PathBuf};

use usbf_core::array::ArrayGeometry;
use usbf_core::beamform::{
    das_pa, das_sa, das_sta, depth_axis, log_compress, scan_convert, CoverageReport, SectorGrid,
    SectorImage,
};
use usbf_core::config::ExperimentConfig;
use usbf_core::dataset::build_dataset;
use usbf_core::metrics::{
    cyst_regions, depth_sweep, fwhm, lateral_profile, nearest_depth_index, rms_sidelobe_db,
    LateralProfile, SweepRow,
};
use usbf_core::neural::{init_network, load_weights, save_weights, train, Network};
use usbf_core::pipeline::{dnnb_pa, dnnb_sa, dnnb_sta, DnnbOptions, NetworkEmulator};
use usbf_core::wavesim::{
    simulate_pa_split, simulate_sa, simulate_sta_split, PaChannelData, SaChannelData,
    StaChannelData, Technique,
};
use usbf_core::{Error, Result};

use crate::files::{save_envelope, write_csv, write_pgm, ChannelDataFile};
use crate::phantom::{parse_phantom, parse_targets, EvalTarget};

/// Which of the configured aperture pair records the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Aperture {
    Small,
    Large,
}

/// Reconstruction method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    /// Delay-and-sum over the recorded channels.
    Das,
    /// Emulate the large aperture with a trained network, then delay-and-sum.
    Dnnb,
}

pub struct ReconstructOptions {
    pub method: Method,
    pub weights: Option<PathBuf>,
    pub overlap: bool,
    pub dynamic_range_db: f64,
    pub depth_step: Option<f64>,
    pub pixel_pitch: Option<f64>,
}

pub struct ApertureSweepOptions {
    pub weights_dir: Option<PathBuf>,
    pub cyst_depth: f64,
    pub cyst_radius: f64,
    pub n_scatterers: usize,
}

/// Creates the output directory and drops the resolved configuration
/// snapshot into it.
fn prepare_out(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    cfg.save(&out.join("config.cfg"))
}

/// Adds the file path to any error from loading it.
fn at_path<T>(r: Result<T>, path: &Path) -> Result<T> {
    r.map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String> {
    at_path(std::fs::read_to_string(path).map_err(Error::Io), path)
}

/// Simulates channel data for the phantom described in `phantom_path` using
/// the configured technique, and writes `channels.usbf`.
pub fn cmd_simulate(
    cfg: &ExperimentConfig,
    phantom_path: &Path,
    aperture: Aperture,
    out: &Path,
) -> Result<()> {
    let phantom = at_path(parse_phantom(&read_text(phantom_path)?), phantom_path)?;
    let acq = cfg.acquisition();
    let pulse = cfg.pulse()?;
    let array = match aperture {
        Aperture::Small => cfg.small_array()?,
        Aperture::Large => cfg.large_array()?,
    };
    let data = match cfg.technique {
        Technique::Sa => ChannelDataFile::Sa(simulate_sa(&array, &pulse, &acq, &phantom)?),
        Technique::Sta => {
            ChannelDataFile::Sta(simulate_sta_split(&array, &array, &pulse, &acq, &phantom)?)
        }
        Technique::Pa => ChannelDataFile::Pa(simulate_pa_split(
            &array,
            &array,
            &pulse,
            &acq,
            &phantom,
            &acq.line_angles(),
        )?),
    };
    prepare_out(cfg, out)?;
    let path = out.join("channels.usbf");
    data.save(&path)?;
    println!(
        "simulated {} {} scatterers -> {}",
        cfg.technique,
        phantom.len(),
        path.display()
    );
    Ok(())
}

/// Generates the configured training set and writes `dataset.usbf`.
pub fn cmd_build_dataset(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    prepare_out(cfg, out)?;
    let path = out.join("dataset.usbf");
    let set = build_dataset(&cfg.pair_spec()?, cfg.n_pairs, cfg.sidelobe_mix, cfg.seed, &path)?;
    println!(
        "built {} {} pairs ({} emulation, {} sidelobe) -> {}",
        set.n_pairs(),
        cfg.technique,
        set.count_kind(usbf_core::dataset::PairKind::Emulation),
        set.count_kind(usbf_core::dataset::PairKind::Sidelobe),
        path.display()
    );
    Ok(())
}

/// Trains a network on a dataset file; writes `weights.usbf` and
/// `history.csv`.
pub fn cmd_train(cfg: &ExperimentConfig, dataset: &Path, out: &Path) -> Result<()> {
    let set = at_path(usbf_core::dataset::PairSet::load(dataset), dataset)?;
    let shape = set.patch_shape()?;
    let mut net = init_network::<f32>(shape, &cfg.network(), cfg.seed)?;
    let history = train(&mut net, &set.train_set(), &cfg.training())?;
    prepare_out(cfg, out)?;
    let weights_path = out.join("weights.usbf");
    save_weights(&net, &weights_path)?;
    let rows: Vec<Vec<String>> = history
        .iter()
        .map(|e| {
            vec![
                e.epoch.to_string(),
                format!("{}", e.train_mse),
                format!("{}", e.val_mse),
                format!("{}", e.lr),
            ]
        })
        .collect();
    write_csv(&out.join("history.csv"), &["epoch", "train_mse", "val_mse", "lr"], &rows)?;
    let last = history.last().expect("training always runs at least one epoch");
    println!(
        "trained {} epochs on {} pairs (final val mse {:.3e}) -> {}",
        history.len(),
        set.n_pairs(),
        last.val_mse,
        weights_path.display()
    );
    Ok(())
}

/// Picks the configured array whose element count matches the data.
fn resolve_array(cfg: &ExperimentConfig, n_channels: usize, role: &str) -> Result<ArrayGeometry> {
    let small = cfg.small_array()?;
    if small.n_elements() == n_channels {
        return Ok(small);
    }
    let large = small.large_pair();
    if large.n_elements() == n_channels {
        return Ok(large);
    }
    Err(Error::InvalidArgument(format!(
        "data has {n_channels} {role} channels; the configuration's apertures have {} and {}",
        small.n_elements(),
        large.n_elements()
    )))
}

fn report_coverage(cov: &CoverageReport) {
    if !cov.is_complete() {
        eprintln!(
            "note: {} of {} channel reads fell outside the recorded time axis",
            cov.out_of_range, cov.reads
        );
    }
}

/// Reconstructs a sector image from a channel-data file with DAS or DNNB;
/// writes the linear envelope (`envelope.usbf`), the log-compressed sector
/// and scan-converted rasters (`sector.pgm`, `raster.pgm`).
pub fn cmd_reconstruct(
    cfg: &ExperimentConfig,
    data_path: &Path,
    options: &ReconstructOptions,
    out: &Path,
) -> Result<()> {
    let data = at_path(ChannelDataFile::load(data_path), data_path)?;
    if data.technique() != cfg.technique {
        return Err(Error::InvalidArgument(format!(
            "data file holds {} data but the configuration selects {}",
            data.technique(),
            cfg.technique
        )));
    }
    let acq = cfg.acquisition();
    let pulse = cfg.pulse()?;
    let step = options.depth_step.unwrap_or(acq.c / (2.0 * acq.fs));
    let depths = depth_axis(acq.depth_min, acq.depth_max, step);

    let image = match options.method {
        Method::Das => {
            let (image, cov) = match &data {
                ChannelDataFile::Sa(d) => {
                    let array = resolve_array(cfg, d.n_channels, "receive")?;
                    let grid = SectorGrid::new(acq.line_angles(), depths)?;
                    das_sa(d, &array, &pulse, &acq, &grid)?
                }
                ChannelDataFile::Sta(d) => {
                    let tx = resolve_array(cfg, d.n_tx, "transmit")?;
                    let rx = resolve_array(cfg, d.n_rx, "receive")?;
                    let grid = SectorGrid::new(acq.line_angles(), depths)?;
                    das_sta(d, &tx, &rx, &pulse, &acq, &grid)?
                }
                ChannelDataFile::Pa(d) => {
                    let tx = resolve_array(cfg, d.n_tx, "transmit")?;
                    let rx = resolve_array(cfg, d.n_rx, "receive")?;
                    das_pa(d, &tx, &rx, &pulse, &acq, &depths)?
                }
            };
            report_coverage(&cov);
            image
        }
        Method::Dnnb => {
            // The neural path sums real waveforms and detects the envelope
            // along the depth axis, so that axis must sample the carrier
            // adequately; the analytic-channel das path has no such limit.
            let bound = acq.c / (4.0 * pulse.center_frequency());
            if step > bound {
                eprintln!(
                    "warning: depth step {step} m undersamples the carrier for the dnnb \
                     envelope; amplitudes will alias (keep it at or below {bound:.3e} m)"
                );
            }
            let weights = options.weights.as_deref().ok_or_else(|| {
                Error::InvalidArgument("the dnnb method needs --weights".into())
            })?;
            let net: Network<f32> = at_path(load_weights(weights), weights)?;
            let mut emulator = NetworkEmulator::new(&net);
            let opts = DnnbOptions { overlap_average: options.overlap };
            match &data {
                ChannelDataFile::Sa(d) => {
                    let array = resolve_array(cfg, d.n_channels, "receive")?;
                    let grid = SectorGrid::new(acq.line_angles(), depths)?;
                    dnnb_sa(d, &array, &pulse, &acq, &grid, &mut emulator, &opts)?
                }
                ChannelDataFile::Sta(d) => {
                    let tx = resolve_array(cfg, d.n_tx, "transmit")?;
                    let rx = resolve_array(cfg, d.n_rx, "receive")?;
                    let grid = SectorGrid::new(acq.line_angles(), depths)?;
                    dnnb_sta(d, &tx, &rx, &pulse, &acq, &grid, &mut emulator, &opts)?
                }
                ChannelDataFile::Pa(d) => {
                    let tx = resolve_array(cfg, d.n_tx, "transmit")?;
                    let rx = resolve_array(cfg, d.n_rx, "receive")?;
                    dnnb_pa(d, &tx, &rx, &pulse, &acq, &depths, &mut emulator, &opts)?
                }
            }
        }
    };

    prepare_out(cfg, out)?;
    let envelope_path = out.join("envelope.usbf");
    save_envelope(&envelope_path, &image, cfg.technique)?;

    let compressed = log_compress(&image, options.dynamic_range_db);
    let (w, h) = (compressed.grid.n_lines(), compressed.grid.n_depths());
    let mut sector_pixels = vec![0u8; w * h];
    for j in 0..h {
        for i in 0..w {
            sector_pixels[j * w + i] =
                (compressed.value(i, j).clamp(0.0, 1.0) * 255.0).round() as u8;
        }
    }
    write_pgm(&out.join("sector.pgm"), w, h, &sector_pixels)?;

    let pitch = options.pixel_pitch.unwrap_or(step);
    let raster = scan_convert(&compressed, pitch)?;
    write_pgm(&out.join("raster.pgm"), raster.nx, raster.nz, &raster.to_gray8())?;

    println!(
        "reconstructed {} x {} sector ({:?}) -> {}",
        image.grid.n_lines(),
        image.grid.n_depths(),
        options.method,
        envelope_path.display()
    );
    Ok(())
}

/// Measures the targets listed in `targets_path` on an envelope image and
/// writes `metrics.csv`.
/// Formats one metric for its CSV cell. A measurement failure leaves the
/// cell empty with a warning — a profile can legitimately lack the feature
/// (a coarse line grid may resolve no sidelobe region, a small image may not
/// cover a region) — while any other error is a real fault and propagates.
fn metric_cell(what: &str, target: &str, value: Result<f64>) -> Result<String> {
    match value {
        Ok(v) => Ok(format!("{v}")),
        Err(Error::Measurement(msg)) => {
            eprintln!("warning: {what} not measurable for {target}: {msg}");
            Ok(String::new())
        }
        Err(e) => Err(e),
    }
}

pub fn cmd_evaluate(
    cfg: &ExperimentConfig,
    image_path: &Path,
    targets_path: &Path,
    out: &Path,
) -> Result<()> {
    let (image, _technique) = at_path(crate::files::load_envelope(image_path), image_path)?;
    let targets = at_path(parse_targets(&read_text(targets_path)?), targets_path)?;

    let columns = [
        "kind",
        "theta_deg",
        "depth_m",
        "x_m",
        "z_m",
        "radius_m",
        "fwhm_mm",
        "rms_sidelobe_db",
        "cr_db",
        "cnr",
    ];
    let mut rows = Vec::new();
    for target in &targets {
        match *target {
            EvalTarget::Point { theta_deg, depth } => {
                let desc = format!("point target at {theta_deg} deg, {depth} m");
                let (width, level) =
                    match lateral_profile(&image, nearest_depth_index(&image, depth)) {
                        Ok(profile) => (
                            metric_cell("focal width", &desc, fwhm(&profile))?,
                            metric_cell("rms sidelobe", &desc, rms_sidelobe_db(&profile))?,
                        ),
                        Err(Error::Measurement(msg)) => {
                            eprintln!("warning: no lateral profile for {desc}: {msg}");
                            (String::new(), String::new())
                        }
                        Err(e) => return Err(e),
                    };
                rows.push(vec![
                    "point".into(),
                    format!("{theta_deg}"),
                    format!("{depth}"),
                    String::new(),
                    String::new(),
                    String::new(),
                    width,
                    level,
                    String::new(),
                    String::new(),
                ]);
            }
            EvalTarget::Cyst { x, z, radius } => {
                let desc = format!("cyst at ({x}, {z}) m, radius {radius} m");
                let (cyst_region, background) = cyst_regions(x, z, radius);
                let cr =
                    metric_cell("contrast ratio", &desc, usbf_core::metrics::cr(&image, &cyst_region, &background))?;
                let cnr =
                    metric_cell("contrast-to-noise ratio", &desc, usbf_core::metrics::cnr(&image, &cyst_region, &background))?;
                rows.push(vec![
                    "cyst".into(),
                    String::new(),
                    String::new(),
                    format!("{x}"),
                    format!("{z}"),
                    format!("{radius}"),
                    String::new(),
                    String::new(),
                    cr,
                    cnr,
                ]);
            }
        }
    }
    prepare_out(cfg, out)?;
    let path = out.join("metrics.csv");
    write_csv(&path, &columns, &rows)?;
    println!("measured {} targets -> {}", targets.len(), path.display());
    Ok(())
}

/// Channel data of either aperture for one point target, in the configured
/// technique.
enum SweepData {
    Sa(SaChannelData),
    Sta(StaChannelData),
    Pa(PaChannelData),
}

fn simulate_point(
    cfg: &ExperimentConfig,
    array: &ArrayGeometry,
    depth: f64,
) -> Result<SweepData> {
    let acq = cfg.acquisition();
    let pulse = cfg.pulse()?;
    let phantom = usbf_core::array::make_point_phantom(&[(0.0, depth, 1.0)])?;
    Ok(match cfg.technique {
        Technique::Sa => SweepData::Sa(simulate_sa(array, &pulse, &acq, &phantom)?),
        Technique::Sta => {
            SweepData::Sta(simulate_sta_split(array, array, &pulse, &acq, &phantom)?)
        }
        Technique::Pa => SweepData::Pa(simulate_pa_split(
            array,
            array,
            &pulse,
            &acq,
            &phantom,
            &acq.line_angles(),
        )?),
    })
}

/// Images a narrow depth window around `depth` and returns the lateral
/// profile at the depth sample nearest the target.
fn point_profile(
    cfg: &ExperimentConfig,
    data: &SweepData,
    array: &ArrayGeometry,
    depth: f64,
    net: Option<&Network<f32>>,
) -> Result<LateralProfile> {
    let acq = cfg.acquisition();
    let pulse = cfg.pulse()?;
    let half_window = 0.003;
    let step = acq.c / (2.0 * acq.fs);
    let depths = depth_axis(depth - half_window, depth + half_window, step);
    let image = match net {
        None => {
            let (image, _cov) = match data {
                SweepData::Sa(d) => {
                    let grid = SectorGrid::new(acq.line_angles(), depths)?;
                    das_sa(d, array, &pulse, &acq, &grid)?
                }
                SweepData::Sta(d) => {
                    let grid = SectorGrid::new(acq.line_angles(), depths)?;
                    das_sta(d, array, array, &pulse, &acq, &grid)?
                }
                SweepData::Pa(d) => das_pa(d, array, array, &pulse, &acq, &depths)?,
            };
            image
        }
        Some(net) => {
            let mut emulator = NetworkEmulator::new(net);
            let opts = DnnbOptions::default();
            match data {
                SweepData::Sa(d) => {
                    let grid = SectorGrid::new(acq.line_angles(), depths)?;
                    dnnb_sa(d, array, &pulse, &acq, &grid, &mut emulator, &opts)?
                }
                SweepData::Sta(d) => {
                    let grid = SectorGrid::new(acq.line_angles(), depths)?;
                    dnnb_sta(d, array, array, &pulse, &acq, &grid, &mut emulator, &opts)?
                }
                SweepData::Pa(d) => {
                    dnnb_pa(d, array, array, &pulse, &acq, &depths, &mut emulator, &opts)?
                }
            }
        }
    };
    lateral_profile(&image, nearest_depth_index(&image, depth))
}

/// Point-resolution sweep over depth: DAS with both apertures and, when
/// weights are given, DNNB on the small aperture. Writes `sweep_depth.csv`.
pub fn cmd_sweep_depth(
    cfg: &ExperimentConfig,
    weights: Option<&Path>,
    n_depths: usize,
    out: &Path,
) -> Result<()> {
    if n_depths == 0 {
        return Err(Error::InvalidArgument("the sweep needs at least one depth".into()));
    }
    let acq = cfg.acquisition();
    let margin = 0.005;
    let (lo, hi) = (acq.depth_min + margin, acq.depth_max - margin);
    if lo >= hi {
        return Err(Error::InvalidArgument(
            "the depth range is too shallow for a sweep (needs 10 mm of span)".into(),
        ));
    }
    let depths: Vec<f64> = if n_depths == 1 {
        vec![0.5 * (lo + hi)]
    } else {
        (0..n_depths)
            .map(|i| lo + (hi - lo) * i as f64 / (n_depths - 1) as f64)
            .collect()
    };

    let small = cfg.small_array()?;
    let large = small.large_pair();
    let net: Option<Network<f32>> = match weights {
        Some(path) => Some(at_path(load_weights(path), path)?),
        None => None,
    };

    let das_small = depth_sweep(&depths, |d| {
        point_profile(cfg, &simulate_point(cfg, &small, d)?, &small, d, None)
    })?;
    let das_large = depth_sweep(&depths, |d| {
        point_profile(cfg, &simulate_point(cfg, &large, d)?, &large, d, None)
    })?;
    let dnnb: Option<Vec<SweepRow>> = match &net {
        Some(net) => Some(depth_sweep(&depths, |d| {
            point_profile(cfg, &simulate_point(cfg, &small, d)?, &small, d, Some(net))
        })?),
        None => None,
    };

    let columns = [
        "depth_m",
        "das_small_fwhm_mm",
        "das_small_rms_sll_db",
        "das_large_fwhm_mm",
        "das_large_rms_sll_db",
        "dnnb_fwhm_mm",
        "dnnb_rms_sll_db",
    ];
    let mut rows = Vec::new();
    for (i, &depth) in depths.iter().enumerate() {
        let mut row = vec![
            format!("{depth}"),
            format!("{}", das_small[i].fwhm_mm),
            format!("{}", das_small[i].rms_sidelobe_db),
            format!("{}", das_large[i].fwhm_mm),
            format!("{}", das_large[i].rms_sidelobe_db),
        ];
        match &dnnb {
            Some(rows_dnnb) => {
                row.push(format!("{}", rows_dnnb[i].fwhm_mm));
                row.push(format!("{}", rows_dnnb[i].rms_sidelobe_db));
            }
            None => {
                row.push(String::new());
                row.push(String::new());
            }
        }
        rows.push(row);
    }
    prepare_out(cfg, out)?;
    let path = out.join("sweep_depth.csv");
    write_csv(&path, &columns, &rows)?;
    println!("swept {} depths -> {}", depths.len(), path.display());
    Ok(())
}

/// Contrast metrics of one reconstruction of the cyst scene.
fn cyst_metrics(
    cfg: &ExperimentConfig,
    data: &SweepData,
    tx_array: &ArrayGeometry,
    rx_array: &ArrayGeometry,
    depths: &[f64],
    cyst_depth: f64,
    cyst_radius: f64,
    net: Option<&Network<f32>>,
) -> Result<(f64, f64)> {
    let acq = cfg.acquisition();
    let pulse = cfg.pulse()?;
    let image: SectorImage = match net {
        None => {
            let (image, _cov) = match data {
                SweepData::Sa(d) => {
                    let grid = SectorGrid::new(acq.line_angles(), depths.to_vec())?;
                    das_sa(d, rx_array, &pulse, &acq, &grid)?
                }
                SweepData::Sta(d) => {
                    let grid = SectorGrid::new(acq.line_angles(), depths.to_vec())?;
                    das_sta(d, tx_array, rx_array, &pulse, &acq, &grid)?
                }
                SweepData::Pa(d) => das_pa(d, tx_array, rx_array, &pulse, &acq, depths)?,
            };
            image
        }
        Some(net) => {
            let mut emulator = NetworkEmulator::new(net);
            let opts = DnnbOptions::default();
            match data {
                SweepData::Sa(d) => {
                    let grid = SectorGrid::new(acq.line_angles(), depths.to_vec())?;
                    dnnb_sa(d, rx_array, &pulse, &acq, &grid, &mut emulator, &opts)?
                }
                SweepData::Sta(d) => {
                    let grid = SectorGrid::new(acq.line_angles(), depths.to_vec())?;
                    dnnb_sta(d, tx_array, rx_array, &pulse, &acq, &grid, &mut emulator, &opts)?
                }
                SweepData::Pa(d) => {
                    dnnb_pa(d, tx_array, rx_array, &pulse, &acq, depths, &mut emulator, &opts)?
                }
            }
        }
    };
    let (cyst_region, background) = cyst_regions(0.0, cyst_depth, cyst_radius);
    let cr = usbf_core::metrics::cr(&image, &cyst_region, &background)?;
    let cnr = usbf_core::metrics::cnr(&image, &cyst_region, &background)?;
    Ok((cr, cnr))
}

/// Receive-aperture reduction sweep on a seeded cyst phantom: the large
/// aperture transmits, and the receive aperture keeps every `factor`-th
/// element for factors 1, 2, 4, 8. Writes `sweep_aperture.csv` with DAS
/// contrast metrics per factor (and DNNB metrics when `--weights-dir`
/// provides `weights_f<factor>.usbf` files). With the `sa` technique the
/// whole monostatic aperture is decimated instead, since transmit and
/// receive share every element.
pub fn cmd_sweep_aperture(
    cfg: &ExperimentConfig,
    options: &ApertureSweepOptions,
    out: &Path,
) -> Result<()> {
    let acq = cfg.acquisition();
    let pulse = cfg.pulse()?;
    let large = cfg.large_array()?;
    let factors = [1usize, 2, 4, 8];
    for &f in &factors {
        large.receive_subset(f)?;
    }

    // The speckle field must cover the background annulus with margin; the
    // imaged depth window must cover the field.
    let half = (1.8 * options.cyst_radius + 0.003).max(0.015);
    let region = usbf_core::array::Rect::new(
        -half,
        options.cyst_depth - half,
        half,
        options.cyst_depth + half,
    )?;
    if options.cyst_depth - half < acq.depth_min || options.cyst_depth + half > acq.depth_max {
        return Err(Error::InvalidArgument(format!(
            "the cyst scene spans {} to {} m, outside the imaging range",
            options.cyst_depth - half,
            options.cyst_depth + half
        )));
    }
    let phantom = usbf_core::array::make_cyst_phantom(
        region,
        (0.0, options.cyst_depth),
        options.cyst_radius,
        options.n_scatterers,
        cfg.seed,
    )?;
    let step = acq.c / (2.0 * acq.fs);
    let depths = depth_axis(options.cyst_depth - half, options.cyst_depth + half, step);

    // One full-aperture acquisition serves all factors for sta/pa; the
    // monostatic technique has no separate receive dimension, so it is
    // re-simulated per decimated aperture.
    let full: Option<SweepData> = match cfg.technique {
        Technique::Sa => None,
        Technique::Sta => {
            Some(SweepData::Sta(simulate_sta_split(&large, &large, &pulse, &acq, &phantom)?))
        }
        Technique::Pa => Some(SweepData::Pa(simulate_pa_split(
            &large,
            &large,
            &pulse,
            &acq,
            &phantom,
            &acq.line_angles(),
        )?)),
    };

    let columns =
        ["factor", "n_receive_elements", "das_cr_db", "das_cnr", "dnnb_cr_db", "dnnb_cnr"];
    let mut rows = Vec::new();
    for &factor in &factors {
        let rx = large.receive_subset(factor)?;
        let data = match (&full, cfg.technique) {
            (None, _) => SweepData::Sa(simulate_sa(&rx, &pulse, &acq, &phantom)?),
            (Some(SweepData::Sta(d)), _) => SweepData::Sta(d.receive_subset(factor)?),
            (Some(SweepData::Pa(d)), _) => SweepData::Pa(d.receive_subset(factor)?),
            (Some(SweepData::Sa(_)), _) => unreachable!("sa never pre-simulates"),
        };
        let tx = if cfg.technique == Technique::Sa { rx.clone() } else { large.clone() };
        let (das_cr, das_cnr) = cyst_metrics(
            cfg,
            &data,
            &tx,
            &rx,
            &depths,
            options.cyst_depth,
            options.cyst_radius,
            None,
        )?;
        let mut row = vec![
            factor.to_string(),
            rx.n_elements().to_string(),
            format!("{das_cr}"),
            format!("{das_cnr}"),
        ];
        match &options.weights_dir {
            Some(dir) => {
                let path = dir.join(format!("weights_f{factor}.usbf"));
                let net: Network<f32> = at_path(load_weights(&path), &path)?;
                let (cr, cnr) = cyst_metrics(
                    cfg,
                    &data,
                    &tx,
                    &rx,
                    &depths,
                    options.cyst_depth,
                    options.cyst_radius,
                    Some(&net),
                )?;
                row.push(format!("{cr}"));
                row.push(format!("{cnr}"));
            }
            None => {
                row.push(String::new());
                row.push(String::new());
            }
        }
        rows.push(row);
    }
    prepare_out(cfg, out)?;
    let path = out.join("sweep_aperture.csv");
    write_csv(&path, &columns, &rows)?;
    println!("swept receive factors 1, 2, 4, 8 -> {}", path.display());
    Ok(())
}
