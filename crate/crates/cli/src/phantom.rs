//! Plain-text descriptions of scenes and evaluation targets.
//!
//! Both formats reuse the configuration syntax — `[section]` headers with
//! `key = value` lines, `#` comments — but sections may repeat: each
//! `[point]` or `[cyst]` section describes one entity. An empty file is an
//! empty phantom.
//!
//! Phantom sections:
//!
//! ```text
//! [point]            # one point scatterer
//! x = 0.0            # lateral position [m], default 0
//! z = 0.05           # depth [m], required
//! amplitude = 1.0    # reflectivity, default 1
//!
//! [cyst]             # speckle region with an anechoic disc
//! x0 = -0.015        # region bounds [m], required
//! x1 = 0.015
//! z0 = 0.035
//! z1 = 0.065
//! x = 0.0            # cyst center [m], required
//! z = 0.05
//! radius = 0.004     # cyst radius [m], required
//! n_scatterers = 20000
//! seed = 0
//! ```
//!
//! Evaluation-target sections use `[point]` (keys `depth`, required, and
//! `theta_deg`, default 0 — echoed into the report) for width/sidelobe
//! measurements and `[cyst]` (keys `x`, `z`, `radius`, required) for
//! contrast measurements.

use usbf_core::array::{make_cyst_phantom, make_point_phantom, Phantom, Rect};
use usbf_core::{Error, Result};

/// One `[section]` of a description file.
struct Entry {
    name: String,
    line_no: usize,
    keys: Vec<(String, String, usize)>,
}

impl Entry {
    fn lookup(&self, key: &str) -> Option<&str> {
        self.keys.iter().find(|(k, _, _)| k == key).map(|(_, v, _)| v.as_str())
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.lookup(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                Error::Config(format!(
                    "[{}] (line {}): `{key}` is not a number: `{v}`",
                    self.name, self.line_no
                ))
            }),
        }
    }

    fn f64_required(&self, key: &str) -> Result<f64> {
        if self.lookup(key).is_none() {
            return Err(Error::Config(format!(
                "[{}] (line {}) is missing `{key}`",
                self.name, self.line_no
            )));
        }
        self.f64_or(key, 0.0)
    }

    fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.lookup(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                Error::Config(format!(
                    "[{}] (line {}): `{key}` is not a nonnegative integer: `{v}`",
                    self.name, self.line_no
                ))
            }),
        }
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for (k, _, line_no) in &self.keys {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::Config(format!(
                    "line {line_no}: unknown key `{k}` in [{}]",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

fn parse_entries(text: &str) -> Result<Vec<Entry>> {
    let mut entries: Vec<Entry> = Vec::new();
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
            entries.push(Entry { name: name.to_string(), line_no, keys: Vec::new() });
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {line_no}: expected `key = value`, got `{line}`"))
        })?;
        let entry = entries.last_mut().ok_or_else(|| {
            Error::Config(format!(
                "line {line_no}: key `{}` appears before any [section] header",
                key.trim()
            ))
        })?;
        let key = key.trim().to_string();
        if entry.keys.iter().any(|(k, _, _)| *k == key) {
            return Err(Error::Config(format!(
                "line {line_no}: duplicate key `{key}` in [{}]",
                entry.name
            )));
        }
        entry.keys.push((key, value.trim().to_string(), line_no));
    }
    Ok(entries)
}

/// Parses a phantom description into a scatterer collection. Sections
/// contribute in file order; an empty file is an empty phantom.
pub fn parse_phantom(text: &str) -> Result<Phantom> {
    let mut phantom = Phantom::default();
    for entry in parse_entries(text)? {
        match entry.name.as_str() {
            "point" => {
                entry.check_keys(&["x", "z", "amplitude"])?;
                let x = entry.f64_or("x", 0.0)?;
                let z = entry.f64_required("z")?;
                let amplitude = entry.f64_or("amplitude", 1.0)?;
                let point = make_point_phantom(&[(x, z, amplitude)]).map_err(|e| {
                    Error::Config(format!("[point] (line {}): {e}", entry.line_no))
                })?;
                phantom.scatterers.extend(point.scatterers);
            }
            "cyst" => {
                entry.check_keys(&[
                    "x0",
                    "x1",
                    "z0",
                    "z1",
                    "x",
                    "z",
                    "radius",
                    "n_scatterers",
                    "seed",
                ])?;
                let region = Rect::new(
                    entry.f64_required("x0")?,
                    entry.f64_required("z0")?,
                    entry.f64_required("x1")?,
                    entry.f64_required("z1")?,
                )
                .map_err(|e| Error::Config(format!("[cyst] (line {}): {e}", entry.line_no)))?;
                let center = (entry.f64_required("x")?, entry.f64_required("z")?);
                let radius = entry.f64_required("radius")?;
                let n = entry.u64_or("n_scatterers", 20_000)? as usize;
                let seed = entry.u64_or("seed", 0)?;
                let cyst = make_cyst_phantom(region, center, radius, n, seed).map_err(|e| {
                    Error::Config(format!("[cyst] (line {}): {e}", entry.line_no))
                })?;
                phantom.scatterers.extend(cyst.scatterers);
            }
            other => {
                return Err(Error::Config(format!(
                    "line {}: unknown section [{other}] (expected [point] or [cyst])",
                    entry.line_no
                )))
            }
        }
    }
    Ok(phantom)
}

/// One measurement request from a targets file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalTarget {
    /// Width and sidelobe level of the lateral profile at `depth`.
    Point { theta_deg: f64, depth: f64 },
    /// Contrast metrics of the cyst at `(x, z)` with the given radius.
    Cyst { x: f64, z: f64, radius: f64 },
}

/// Parses an evaluation-targets file; at least one target is required.
pub fn parse_targets(text: &str) -> Result<Vec<EvalTarget>> {
    let mut targets = Vec::new();
    for entry in parse_entries(text)? {
        match entry.name.as_str() {
            "point" => {
                entry.check_keys(&["theta_deg", "depth"])?;
                targets.push(EvalTarget::Point {
                    theta_deg: entry.f64_or("theta_deg", 0.0)?,
                    depth: entry.f64_required("depth")?,
                });
            }
            "cyst" => {
                entry.check_keys(&["x", "z", "radius"])?;
                targets.push(EvalTarget::Cyst {
                    x: entry.f64_required("x")?,
                    z: entry.f64_required("z")?,
                    radius: entry.f64_required("radius")?,
                });
            }
            other => {
                return Err(Error::Config(format!(
                    "line {}: unknown section [{other}] (expected [point] or [cyst])",
                    entry.line_no
                )))
            }
        }
    }
    if targets.is_empty() {
        return Err(Error::Config("targets file names no measurements".into()));
    }
    Ok(targets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn an_empty_description_is_an_empty_phantom() {
        assert!(parse_phantom("").unwrap().is_empty());
        assert!(parse_phantom("# just a comment\n\n").unwrap().is_empty());
    }

    #[test]
    fn points_parse_with_defaults_and_order() {
        let text = "\
[point]
z = 0.05

[point]
x = -0.002
z = 0.03
amplitude = 0.5
";
        let phantom = parse_phantom(text).unwrap();
        assert_eq!(phantom.len(), 2);
        assert_eq!(
            (phantom.scatterers[0].x, phantom.scatterers[0].z, phantom.scatterers[0].amplitude),
            (0.0, 0.05, 1.0)
        );
        assert_eq!(
            (phantom.scatterers[1].x, phantom.scatterers[1].z, phantom.scatterers[1].amplitude),
            (-0.002, 0.03, 0.5)
        );
    }

    #[test]
    fn a_cyst_section_builds_a_seeded_speckle_field() {
        let text = "\
[cyst]
x0 = -0.01
x1 = 0.01
z0 = 0.04
z1 = 0.06
x = 0
z = 0.05
radius = 0.003
n_scatterers = 500
seed = 9
";
        let a = parse_phantom(text).unwrap();
        let b = parse_phantom(text).unwrap();
        assert_eq!(a, b, "same description must give the same field");
        assert!(!a.is_empty());
        assert!(a.len() < 500, "scatterers inside the cyst disc are removed");
        for s in &a.scatterers {
            let inside = s.x * s.x + (s.z - 0.05) * (s.z - 0.05) <= 0.003 * 0.003;
            assert!(!inside, "anechoic disc must stay empty");
        }
    }

    #[test]
    fn phantom_description_errors_name_their_line() {
        for (text, needle) in [
            ("[point]\nz = 0.05\nz = 0.06\n", "duplicate"),
            ("[blob]\nz = 1\n", "[blob]"),
            ("z = 1\n", "before any"),
            ("[point]\nx = 0\n", "missing `z`"),
            ("[point]\nz = deep\n", "not a number"),
            ("[point]\nz = 0.05\ndepth = 0.05\n", "unknown key `depth`"),
            ("[point]\nz = -0.05\n", "line 1"),
        ] {
            let err = parse_phantom(text).unwrap_err();
            assert!(err.to_string().contains(needle), "{text:?} gave {err}");
        }
    }

    #[test]
    fn targets_parse_both_kinds_and_reject_an_empty_file() {
        let text = "\
[point]
depth = 0.05

[cyst]
x = 0
z = 0.05
radius = 0.004
";
        let targets = parse_targets(text).unwrap();
        assert_eq!(targets.len(), 2);
        assert_eq!(targets[0], EvalTarget::Point { theta_deg: 0.0, depth: 0.05 });
        assert_eq!(targets[1], EvalTarget::Cyst { x: 0.0, z: 0.05, radius: 0.004 });
        parse_targets("").unwrap_err();
        parse_targets("[point]\ntheta_deg = 1\n").unwrap_err();
    }
}
