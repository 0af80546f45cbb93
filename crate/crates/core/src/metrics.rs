//! Image-quality metrics: lateral resolution, sidelobe level, and cyst
//! contrast statistics.
//!
//! All metrics operate on the linear envelope (before log compression).
//! Lateral profiles are cut through sector images at a fixed depth and use
//! arc-length coordinates (depth times angle), reported in millimeters.

use crate::beamform::SectorImage;
use crate::error::{Error, Result};

/// Envelope amplitudes along a constant-depth cut, with lateral arc-length
/// positions in millimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct LateralProfile {
    pub positions_mm: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

impl LateralProfile {
    pub fn new(positions_mm: Vec<f64>, amplitudes: Vec<f64>) -> Result<LateralProfile> {
        if positions_mm.len() != amplitudes.len() {
            return Err(Error::InvalidArgument(format!(
                "profile has {} positions but {} amplitudes",
                positions_mm.len(),
                amplitudes.len()
            )));
        }
        if positions_mm.len() < 3 {
            return Err(Error::InvalidArgument("profile needs at least three samples".into()));
        }
        Ok(LateralProfile { positions_mm, amplitudes })
    }

    fn peak_index(&self) -> Result<usize> {
        let mut best = 0;
        for (i, &v) in self.amplitudes.iter().enumerate() {
            if v > self.amplitudes[best] {
                best = i;
            }
        }
        if best == 0 || best + 1 == self.amplitudes.len() {
            return Err(Error::Measurement(
                "profile peak sits on the edge; widen the profile".into(),
            ));
        }
        Ok(best)
    }
}

/// Constant-depth cut through a sector image at depth row `depth_index`.
/// Lateral positions are the arc lengths `depth * angle`.
pub fn lateral_profile(image: &SectorImage, depth_index: usize) -> Result<LateralProfile> {
    if depth_index >= image.grid.n_depths() {
        return Err(Error::InvalidArgument(format!(
            "depth index {depth_index} outside grid of {} depths",
            image.grid.n_depths()
        )));
    }
    let r = image.grid.depths[depth_index];
    let positions_mm = image.grid.line_angles.iter().map(|&theta| r * theta * 1e3).collect();
    let amplitudes =
        (0..image.grid.n_lines()).map(|line| image.value(line, depth_index)).collect();
    LateralProfile::new(positions_mm, amplitudes)
}

/// Index of the grid depth nearest to `depth_m`.
pub fn nearest_depth_index(image: &SectorImage, depth_m: f64) -> usize {
    let mut best = 0;
    for (i, &d) in image.grid.depths.iter().enumerate() {
        if (d - depth_m).abs() < (image.grid.depths[best] - depth_m).abs() {
            best = i;
        }
    }
    best
}

/// Full width at half maximum of a single-peaked profile [mm]: the distance
/// between the half-maximum crossings found by walking outward from the peak,
/// each located by linear interpolation between the bracketing samples.
pub fn fwhm(profile: &LateralProfile) -> Result<f64> {
    let peak = profile.peak_index()?;
    let half = profile.amplitudes[peak] / 2.0;
    let cross = |inner: usize, outer: usize| -> Option<f64> {
        // Walk from the peak toward `outer` until the amplitude drops below half.
        let step: isize = if outer > inner { 1 } else { -1 };
        let mut i = inner as isize;
        while i != outer as isize {
            let j = i + step;
            let a = profile.amplitudes[i as usize];
            let b = profile.amplitudes[j as usize];
            if b < half {
                let pa = profile.positions_mm[i as usize];
                let pb = profile.positions_mm[j as usize];
                let frac = (a - half) / (a - b);
                return Some(pa + frac * (pb - pa));
            }
            i = j;
        }
        None
    };
    let right = cross(peak, profile.amplitudes.len() - 1).ok_or_else(|| {
        Error::Measurement("no half-maximum crossing right of the peak".into())
    })?;
    let left = cross(peak, 0)
        .ok_or_else(|| Error::Measurement("no half-maximum crossing left of the peak".into()))?;
    Ok(right - left)
}

/// Root-mean-square sidelobe level relative to the peak [dB]. The main lobe
/// spans from the first local minimum left of the peak to the first local
/// minimum right of it, found on a 3-sample moving average of the profile;
/// every sample outside the main lobe counts as sidelobe.
pub fn rms_sidelobe_db(profile: &LateralProfile) -> Result<f64> {
    let peak = profile.peak_index()?;
    let n = profile.amplitudes.len();
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            profile.amplitudes[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let is_min =
        |i: usize| i > 0 && i + 1 < n && smooth[i] <= smooth[i - 1] && smooth[i] <= smooth[i + 1];
    let mut left = None;
    for i in (1..peak).rev() {
        if is_min(i) {
            left = Some(i);
            break;
        }
    }
    let mut right = None;
    for i in peak + 1..n - 1 {
        if is_min(i) {
            right = Some(i);
            break;
        }
    }
    let (left, right) = match (left, right) {
        (Some(l), Some(r)) => (l, r),
        _ => {
            return Err(Error::Measurement(
                "main lobe reaches the profile edge; no sidelobe region".into(),
            ))
        }
    };
    let outside: Vec<f64> = profile.amplitudes[..left]
        .iter()
        .chain(profile.amplitudes[right + 1..].iter())
        .copied()
        .collect();
    if outside.is_empty() {
        return Err(Error::Measurement("no samples outside the main lobe".into()));
    }
    let rms = (outside.iter().map(|v| v * v).sum::<f64>() / outside.len() as f64).sqrt();
    Ok(20.0 * (rms / profile.amplitudes[peak]).log10())
}

/// Pixel-set selector in the imaging plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Disc { cx: f64, cz: f64, radius: f64 },
    Annulus { cx: f64, cz: f64, inner: f64, outer: f64 },
}

impl Region {
    pub fn contains(&self, x: f64, z: f64) -> bool {
        match *self {
            Region::Disc { cx, cz, radius } => {
                (x - cx).powi(2) + (z - cz).powi(2) <= radius * radius
            }
            Region::Annulus { cx, cz, inner, outer } => {
                let d2 = (x - cx).powi(2) + (z - cz).powi(2);
                d2 >= inner * inner && d2 <= outer * outer
            }
        }
    }
}

/// Interior/background region pair for a cyst of `radius` at `(cx, cz)`:
/// the interior disc is shrunk to 80% of the radius and the background is
/// the concentric annulus from 120% to 180%, so neither region touches the
/// cyst boundary.
pub fn cyst_regions(cx: f64, cz: f64, radius: f64) -> (Region, Region) {
    (
        Region::Disc { cx, cz, radius: 0.8 * radius },
        Region::Annulus { cx, cz, inner: 1.2 * radius, outer: 1.8 * radius },
    )
}

/// First and second moments of the envelope over a pixel region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionStats {
    pub mean: f64,
    pub variance: f64,
    pub n: usize,
}

/// Population statistics of the envelope over the sector pixels whose
/// physical position falls in `region`.
pub fn region_stats(image: &SectorImage, region: &Region) -> Result<RegionStats> {
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut values = Vec::new();
    for (line, &theta) in image.grid.line_angles.iter().enumerate() {
        let (sin_t, cos_t) = theta.sin_cos();
        for (j, &r) in image.grid.depths.iter().enumerate() {
            if region.contains(r * sin_t, r * cos_t) {
                let v = image.value(line, j);
                sum += v;
                count += 1;
                values.push(v);
            }
        }
    }
    if count == 0 {
        return Err(Error::Measurement("region covers no image pixels".into()));
    }
    let mean = sum / count as f64;
    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count as f64;
    Ok(RegionStats { mean, variance, n: count })
}

/// Contrast-to-noise ratio `|mean_bg - mean_cyst| / sqrt(var_bg + var_cyst)`.
/// Zero exactly when the means are equal; infinite when the means differ but
/// both regions are noiseless.
pub fn cnr_from_stats(background: &RegionStats, cyst: &RegionStats) -> f64 {
    let num = (background.mean - cyst.mean).abs();
    if num == 0.0 {
        return 0.0;
    }
    let denom = (background.variance + cyst.variance).sqrt();
    if denom == 0.0 {
        f64::INFINITY
    } else {
        num / denom
    }
}

/// Contrast ratio `20 log10(mean_cyst / mean_bg)` [dB]; an empty (all-zero)
/// cyst yields negative infinity.
pub fn cr_from_stats(background: &RegionStats, cyst: &RegionStats) -> Result<f64> {
    if background.mean <= 0.0 {
        return Err(Error::Measurement("background mean is zero; contrast undefined".into()));
    }
    if cyst.mean == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(20.0 * (cyst.mean / background.mean).log10())
}

/// Contrast-to-noise ratio between two image regions.
pub fn cnr(image: &SectorImage, cyst: &Region, background: &Region) -> Result<f64> {
    Ok(cnr_from_stats(&region_stats(image, background)?, &region_stats(image, cyst)?))
}

/// Contrast ratio between two image regions [dB].
pub fn cr(image: &SectorImage, cyst: &Region, background: &Region) -> Result<f64> {
    cr_from_stats(&region_stats(image, background)?, &region_stats(image, cyst)?)
}

/// One depth of a resolution sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub depth_m: f64,
    pub fwhm_mm: f64,
    pub rms_sidelobe_db: f64,
}

/// Measures width and sidelobe level of the profile produced by
/// `profile_at(depth)` for every requested depth.
pub fn depth_sweep<F>(depths_m: &[f64], mut profile_at: F) -> Result<Vec<SweepRow>>
where
    F: FnMut(f64) -> Result<LateralProfile>,
{
    let mut rows = Vec::with_capacity(depths_m.len());
    for &depth in depths_m {
        let annotate = |e: Error| match e {
            Error::Measurement(msg) => {
                Error::Measurement(format!("at depth {} m: {msg}", depth))
            }
            other => other,
        };
        let profile = profile_at(depth).map_err(annotate)?;
        rows.push(SweepRow {
            depth_m: depth,
            fwhm_mm: fwhm(&profile).map_err(annotate)?,
            rms_sidelobe_db: rms_sidelobe_db(&profile).map_err(annotate)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamform::SectorGrid;

    fn profile(positions: &[f64], amplitudes: &[f64]) -> LateralProfile {
        LateralProfile::new(positions.to_vec(), amplitudes.to_vec()).unwrap()
    }

    #[test]
    fn triangle_fwhm_is_exactly_two_millimeters() {
        let p = profile(&[-2.0, 0.0, 2.0], &[0.0, 1.0, 0.0]);
        assert_eq!(fwhm(&p).unwrap(), 2.0);
    }

    #[test]
    fn gaussian_fwhm_matches_closed_form() {
        // FWHM of exp(-x^2 / 2 sigma^2) is sigma * 2 sqrt(2 ln 2) = 2.3548 mm
        // for sigma = 1 mm.
        let positions: Vec<f64> = (0..401).map(|i| -10.0 + i as f64 * 0.05).collect();
        let amplitudes: Vec<f64> = positions.iter().map(|x| (-0.5 * x * x).exp()).collect();
        let p = profile(&positions, &amplitudes);
        let expected = 2.0 * (2.0 * 2.0_f64.ln()).sqrt();
        let got = fwhm(&p).unwrap();
        assert!((got - expected).abs() < 0.01 * expected, "{got} vs {expected}");
    }

    #[test]
    fn fwhm_requires_an_interior_peak_and_crossings() {
        let edge = profile(&[0.0, 1.0, 2.0], &[1.0, 0.5, 0.1]);
        assert!(matches!(fwhm(&edge), Err(Error::Measurement(_))));
        let plateau = profile(&[0.0, 1.0, 2.0, 3.0], &[0.9, 1.0, 0.9, 0.8]);
        assert!(matches!(fwhm(&plateau), Err(Error::Measurement(_))));
    }

    #[test]
    fn flat_sidelobes_give_their_level_exactly() {
        let amps = [0.1, 0.1, 0.1, 0.1, 0.5, 1.0, 0.5, 0.1, 0.1, 0.1, 0.1];
        let pos: Vec<f64> = (0..amps.len()).map(|i| i as f64).collect();
        let level = rms_sidelobe_db(&profile(&pos, &amps)).unwrap();
        assert!((level - (-20.0)).abs() < 1e-9, "{level}");
    }

    #[test]
    fn alternating_sidelobes_match_their_rms() {
        let amps = [0.1, 0.0, 0.1, 0.0, 0.5, 1.0, 0.5, 0.0, 0.1, 0.0, 0.1];
        let pos: Vec<f64> = (0..amps.len()).map(|i| i as f64).collect();
        let level = rms_sidelobe_db(&profile(&pos, &amps)).unwrap();
        let expected = 20.0 * (0.1 / 2.0_f64.sqrt()).log10();
        assert!((level - expected).abs() < 1e-9, "{level} vs {expected}");
    }

    #[test]
    fn pure_mainlobe_has_no_sidelobe_region() {
        let amps = [0.1, 0.4, 0.8, 1.0, 0.8, 0.4, 0.1];
        let pos: Vec<f64> = (0..amps.len()).map(|i| i as f64).collect();
        assert!(matches!(
            rms_sidelobe_db(&profile(&pos, &amps)),
            Err(Error::Measurement(_))
        ));
    }

    #[test]
    fn contrast_arithmetic_matches_hand_values() {
        let bg = RegionStats { mean: 1.0, variance: 1.0, n: 10 };
        let cyst = RegionStats { mean: 0.1, variance: 1.0, n: 10 };
        assert!((cr_from_stats(&bg, &cyst).unwrap() - (-20.0)).abs() < 1e-12);

        let bg = RegionStats { mean: 2.0, variance: 1.0, n: 4 };
        let cyst = RegionStats { mean: 1.0, variance: 1.0, n: 4 };
        let expected = 1.0 / 2.0_f64.sqrt();
        assert!((cnr_from_stats(&bg, &cyst) - expected).abs() < 1e-12);
    }

    #[test]
    fn contrast_edge_cases() {
        let bg = RegionStats { mean: 1.0, variance: 0.5, n: 9 };
        let empty = RegionStats { mean: 0.0, variance: 0.0, n: 9 };
        assert_eq!(cr_from_stats(&bg, &empty).unwrap(), f64::NEG_INFINITY);
        let silent_bg = RegionStats { mean: 0.0, variance: 0.0, n: 9 };
        assert!(cr_from_stats(&silent_bg, &empty).is_err());

        let equal = RegionStats { mean: 1.0, variance: 0.3, n: 9 };
        assert_eq!(cnr_from_stats(&equal, &equal), 0.0);
        let noiseless = RegionStats { mean: 2.0, variance: 0.0, n: 9 };
        let other = RegionStats { mean: 1.0, variance: 0.0, n: 9 };
        assert_eq!(cnr_from_stats(&noiseless, &other), f64::INFINITY);
    }

    fn test_image() -> SectorImage {
        // 48-degree sector, depths 30..70 mm; a dark disc at (0, 50 mm).
        let angles: Vec<f64> = (0..81)
            .map(|i| (-24.0 + 48.0 * i as f64 / 80.0).to_radians())
            .collect();
        let depths: Vec<f64> = (0..201).map(|i| 0.030 + i as f64 * 0.0002).collect();
        let grid = SectorGrid::new(angles, depths).unwrap();
        let mut values = Vec::with_capacity(grid.n_lines() * grid.n_depths());
        for &theta in &grid.line_angles {
            for &r in &grid.depths {
                let (x, z) = (r * theta.sin(), r * theta.cos());
                let inside = (x * x + (z - 0.050) * (z - 0.050)).sqrt() < 0.006;
                values.push(if inside { 0.1 } else { 1.0 });
            }
        }
        SectorImage { grid, values }
    }

    #[test]
    fn region_stats_select_the_right_pixels() {
        let image = test_image();
        let (interior, background) = cyst_regions(0.0, 0.050, 0.006);
        let inner = region_stats(&image, &interior).unwrap();
        let outer = region_stats(&image, &background).unwrap();
        assert!(inner.n > 50 && outer.n > 200);
        assert!((inner.mean - 0.1).abs() < 1e-12, "interior mean {}", inner.mean);
        assert!((outer.mean - 1.0).abs() < 1e-12, "background mean {}", outer.mean);
        assert!(inner.variance < 1e-12 && outer.variance < 1e-12);
        let cr_db = cr(&image, &interior, &background).unwrap();
        assert!((cr_db - (-20.0)).abs() < 1e-9);
    }

    #[test]
    fn empty_region_is_an_error() {
        let image = test_image();
        let far = Region::Disc { cx: 0.5, cz: 0.5, radius: 0.001 };
        assert!(matches!(region_stats(&image, &far), Err(Error::Measurement(_))));
    }

    #[test]
    fn metrics_are_invariant_under_power_of_two_scaling() {
        let amps = [0.1, 0.0, 0.1, 0.0, 0.5, 1.0, 0.5, 0.0, 0.1, 0.0, 0.1];
        let pos: Vec<f64> = (0..amps.len()).map(|i| i as f64).collect();
        let base = profile(&pos, &amps);
        let scaled_amps: Vec<f64> = amps.iter().map(|a| 4.0 * a).collect();
        let scaled = profile(&pos, &scaled_amps);
        assert_eq!(fwhm(&base).unwrap().to_bits(), fwhm(&scaled).unwrap().to_bits());
        let (a, b) = (rms_sidelobe_db(&base).unwrap(), rms_sidelobe_db(&scaled).unwrap());
        assert!((a - b).abs() < 1e-9);

        let image = test_image();
        let mut scaled_image = image.clone();
        for v in &mut scaled_image.values {
            *v *= 4.0;
        }
        let (interior, background) = cyst_regions(0.0, 0.050, 0.006);
        assert_eq!(
            cnr(&image, &interior, &background).unwrap().to_bits(),
            cnr(&scaled_image, &interior, &background).unwrap().to_bits()
        );
        assert_eq!(
            cr(&image, &interior, &background).unwrap().to_bits(),
            cr(&scaled_image, &interior, &background).unwrap().to_bits()
        );
    }

    #[test]
    fn lateral_profile_uses_arc_length_positions() {
        let image = test_image();
        let idx = nearest_depth_index(&image, 0.050);
        let p = lateral_profile(&image, idx).unwrap();
        let r = image.grid.depths[idx];
        let expected_first = r * image.grid.line_angles[0] * 1e3;
        assert!((p.positions_mm[0] - expected_first).abs() < 1e-12);
        assert_eq!(p.positions_mm.len(), image.grid.n_lines());
    }

    #[test]
    fn depth_sweep_reports_one_row_per_depth() {
        let make = |_d: f64| {
            let amps = vec![0.1, 0.1, 0.1, 0.1, 0.5, 1.0, 0.5, 0.1, 0.1, 0.1, 0.1];
            let pos: Vec<f64> = (0..amps.len()).map(|i| i as f64).collect();
            LateralProfile::new(pos, amps)
        };
        let rows = depth_sweep(&[0.040], make).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].rms_sidelobe_db - (-20.0)).abs() < 1e-9);
        let rows = depth_sweep(&[0.030, 0.050, 0.070], make).unwrap();
        assert_eq!(rows.len(), 3);
    }

    #[test]
    fn depth_sweep_names_the_failing_depth() {
        // A monotone profile has no interior peak, so every width measurement
        // fails; the error must say which depth it was measuring.
        let make = |_d: f64| {
            LateralProfile::new(vec![0.0, 1.0, 2.0], vec![1.0, 0.5, 0.1])
        };
        let err = depth_sweep(&[0.031], make).unwrap_err();
        match err {
            Error::Measurement(msg) => assert!(msg.contains("0.031"), "{msg}"),
            other => panic!("expected a measurement error, got {other:?}"),
        }
    }
}
