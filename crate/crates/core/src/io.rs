//! CSV/JSON serialization, atomic file writes and the flat JSON config format.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::constraints::CrossingTimeMap;
use crate::dynamics::{EventKind, Trajectory};
use crate::equilibrium::Ensemble;
use crate::model::{DomainBox, PlanePairConfig, SystemKind, TwoSlitConfig};

/// Shortest exact decimal form of an `f64` in scientific notation with 17
/// significant digits; parses back to the same bits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn header(kind: SystemKind) -> String {
    kind.coordinate_names().join(",")
}

/// `t, coords…, event` where `event` names the event recorded at that
/// sample, or is empty.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = format!("t,{},event\n", header(traj.kind()));
    for s in &traj.samples {
        let tag = traj
            .events
            .iter()
            .find(|e| e.time == s.time())
            .map(|e| e.kind.name())
            .unwrap_or("");
        let _ = write!(out, "{}", fmt_f64(s.time()));
        for &c in s.coords() {
            let _ = write!(out, ",{}", fmt_f64(c));
        }
        let _ = writeln!(out, ",{tag}");
    }
    out
}

pub fn ensemble_csv(ens: &Ensemble) -> String {
    let kind = ens.members.first().map_or(SystemKind::Pair1D, |m| m.kind());
    let mut out = format!("index,t,{}\n", header(kind));
    for (i, m) in ens.members.iter().enumerate() {
        let _ = write!(out, "{i},{}", fmt_f64(m.time()));
        for &c in m.coords() {
            let _ = write!(out, ",{}", fmt_f64(c));
        }
        out.push('\n');
    }
    out
}

pub fn crossing_map_csv(map: &CrossingTimeMap) -> String {
    let mut out = String::from("delta_init,t_star\n");
    for e in &map.entries {
        let _ = writeln!(out, "{},{}", fmt_f64(e.delta_init), fmt_f64(e.t_star));
    }
    out
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Writes through a sibling temporary file and renames it into place, so a
/// reader never sees a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let mut tmp = PathBuf::from(dir);
    tmp.push(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

/// Flat config file. Every key is optional; command-line flags override it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub p: Option<f64>,
    #[serde(rename = "boxN")]
    pub box_n: Option<i64>,
    pub hbar: Option<f64>,
    pub mass: Option<f64>,
    pub k: Option<f64>,
    pub slit_half_sep: Option<f64>,
    pub exclusion_radius: Option<f64>,
    pub domain_box: Option<DomainBox>,
    pub seed: Option<u64>,
}

impl ConfigFile {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigLoadError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigLoadError::Io(path.display().to_string(), e.to_string()))?;
        Self::from_json(&text).map_err(|e| ConfigLoadError::Parse(path.display().to_string(), e.to_string()))
    }

    /// Plane-pair config from whatever keys are present, defaults elsewhere.
    pub fn plane(&self) -> PlanePairConfig {
        let d = PlanePairConfig::default();
        PlanePairConfig {
            a: self.a.unwrap_or(d.a),
            b: self.b.unwrap_or(d.b),
            p: self.p.unwrap_or(d.p),
            box_n: self.box_n.unwrap_or(d.box_n),
            hbar: self.hbar.unwrap_or(d.hbar),
            mass: self.mass.unwrap_or(d.mass),
        }
    }

    pub fn twoslit(&self) -> TwoSlitConfig {
        let d = TwoSlitConfig::default();
        TwoSlitConfig {
            k: self.k.unwrap_or(d.k),
            slit_half_sep: self.slit_half_sep.unwrap_or(d.slit_half_sep),
            exclusion_radius: self.exclusion_radius.unwrap_or(d.exclusion_radius),
            domain_box: self.domain_box.unwrap_or(d.domain_box),
            hbar: self.hbar.unwrap_or(d.hbar),
            mass: self.mass.unwrap_or(d.mass),
            energy: d.energy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigLoadError {
    #[error("cannot read config {0}: {1}")]
    Io(String, String),
    #[error("invalid config {0}: {1}")]
    Parse(String, String),
}

/// `(t, coords, event)` as read back from a trajectory CSV.
pub type TrajectoryRow = (f64, Vec<f64>, Option<EventKind>);

/// Parses a CSV written by [`trajectory_csv`].
pub fn parse_trajectory_csv(text: &str) -> Result<Vec<TrajectoryRow>, String> {
    let mut lines = text.lines();
    let head = lines.next().ok_or("empty file")?;
    let ncols = head.split(',').count();
    if ncols < 3 {
        return Err(format!("bad header {head:?}"));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != ncols {
                return Err(format!("row {}: expected {ncols} fields", i + 1));
            }
            let nums = fields[..ncols - 1]
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| format!("row {}: {e}", i + 1)))
                .collect::<Result<Vec<_>, _>>()?;
            let event = match fields[ncols - 1] {
                "" => None,
                "delta_zero" => Some(EventKind::DeltaZeroCrossing),
                "mirror_residual" => Some(EventKind::MirrorResidualThreshold),
                "box_exit" => Some(EventKind::BoxExit),
                other => return Err(format!("row {}: unknown event {other:?}", i + 1)),
            };
            Ok((nums[0], nums[1..].to_vec(), event))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate_trajectory, EventSpec, IntegratorSettings};
    use crate::guidance::PlaneField;
    use crate::model::{validate_plane_params, Configuration};

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
            assert!(!s.contains(' '));
        }
    }

    #[test]
    fn trajectory_csv_round_trips() {
        let p = validate_plane_params(&PlanePairConfig::new(0.8, 0.6, 1.0, 10)).unwrap();
        let traj = integrate_trajectory(
            &Configuration::from_relative(-1.0, 0.25, 0.0),
            &PlaneField::new(p),
            (0.0, 10.0),
            &IntegratorSettings::default(),
            &[EventSpec::delta_zero(false)],
        )
        .unwrap();
        let csv = trajectory_csv(&traj);
        assert!(csv.starts_with("t,x1,x2,event\n"));
        let rows = parse_trajectory_csv(&csv).unwrap();
        assert_eq!(rows.len(), traj.samples.len());
        for (row, s) in rows.iter().zip(&traj.samples) {
            assert_eq!(row.0, s.time());
            assert_eq!(row.1.as_slice(), s.coords());
        }
        assert_eq!(rows.iter().filter(|r| r.2.is_some()).count(), traj.events.len());
    }

    #[test]
    fn config_file_keys() {
        let cfg = ConfigFile::from_json(r#"{"a": 0.8, "b": 0.6, "boxN": 4}"#).unwrap();
        let plane = cfg.plane();
        assert_eq!((plane.a, plane.b, plane.box_n, plane.p), (0.8, 0.6, 4, 1.0));
        assert!(ConfigFile::from_json(r#"{"alpha": 1}"#).is_err());
        let cfg = ConfigFile::from_json(
            r#"{"k": 3.0, "slit_half_sep": 0.5, "domain_box": {"x": [0, 5], "y": [-2, 2], "z": [-1, 1]}}"#,
        )
        .unwrap();
        let ts = cfg.twoslit();
        assert_eq!(ts.k, 3.0);
        assert_eq!(ts.domain_box.y, [-2.0, 2.0]);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = std::env::temp_dir().join(format!("pilotwave-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("out.json");
        write_atomic(&path, "first").unwrap();
        write_atomic(&path, "second").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "second");
        let leftovers = fs::read_dir(&dir).unwrap().count();
        assert_eq!(leftovers, 1);
        fs::remove_dir_all(&dir).unwrap();
    }
}
