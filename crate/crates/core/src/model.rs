//! Parameter and state types shared by every module.
//!
//! Raw, deserializable parameter sets (`*Config`) are turned into validated
//! value objects (`*Params`) by [`validate_plane_params`] and
//! [`validate_twoslit_params`]. Validated values are immutable, so they can be
//! shared freely between worker threads.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

/// Tolerance on `a² + b² = 1`.
pub const NORM_TOL: f64 = 1e-12;
/// Minimum `|a − b|`; below it the pair is treated as factorizable.
pub const AB_SEPARATION_TOL: f64 = 1e-9;
/// Default radius around each slit point inside which the two-slit amplitude
/// is not evaluated.
pub const DEFAULT_EXCLUSION_RADIUS: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("a² + b² = {sum} differs from 1 by more than {NORM_TOL:e}")]
    NormViolation { sum: f64 },
    #[error("a = {a} and b = {b} coincide within {AB_SEPARATION_TOL:e}; the pair factorizes")]
    DegenerateAB { a: f64, b: f64 },
    #[error("a = {a} and b = {b} cancel (a + b ≈ 0); the relative phase ratio is singular")]
    AntisymmetricAB { a: f64, b: f64 },
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("invalid domain box: {reason}")]
    BadDomain { reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            hbar: 1.0,
            mass: 1.0,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<(), ParamError> {
        positive("hbar", self.hbar)?;
        positive("mass", self.mass)
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), ParamError> {
    if !value.is_finite() {
        return Err(ParamError::NonFinite { name, value });
    }
    if value <= 0.0 {
        return Err(ParamError::NonPositive { name, value });
    }
    Ok(())
}

fn finite(name: &'static str, value: f64) -> Result<(), ParamError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ParamError::NonFinite { name, value })
    }
}

fn default_p() -> f64 {
    1.0
}
fn default_box_n() -> i64 {
    10
}
fn default_one() -> f64 {
    1.0
}
fn default_exclusion() -> f64 {
    DEFAULT_EXCLUSION_RADIUS
}

/// Unvalidated plane-pair parameters, as read from a config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanePairConfig {
    pub a: f64,
    pub b: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(rename = "boxN", default = "default_box_n")]
    pub box_n: i64,
    #[serde(default = "default_one")]
    pub hbar: f64,
    #[serde(default = "default_one")]
    pub mass: f64,
}

impl Default for PlanePairConfig {
    fn default() -> Self {
        PlanePairConfig::new(0.8, 0.6, default_p(), default_box_n())
    }
}

impl PlanePairConfig {
    pub fn new(a: f64, b: f64, p: f64, box_n: i64) -> Self {
        PlanePairConfig {
            a,
            b,
            p,
            box_n,
            hbar: 1.0,
            mass: 1.0,
        }
    }
}

/// Validated parameters of the plane-wave pair, with the box length
/// `L = (2N+1)πħ/p` and energy `E = p²/m` derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanePairParams {
    a: f64,
    b: f64,
    p: f64,
    box_n: u32,
    constants: PhysicalConstants,
    box_length: f64,
    energy: f64,
}

pub fn validate_plane_params(raw: &PlanePairConfig) -> Result<PlanePairParams, ParamError> {
    finite("a", raw.a)?;
    finite("b", raw.b)?;
    positive("p", raw.p)?;
    let constants = PhysicalConstants {
        hbar: raw.hbar,
        mass: raw.mass,
    };
    constants.validate()?;
    if raw.box_n < 1 || raw.box_n > u32::MAX as i64 {
        return Err(ParamError::NonPositive {
            name: "boxN",
            value: raw.box_n as f64,
        });
    }
    let sum = raw.a * raw.a + raw.b * raw.b;
    if (sum - 1.0).abs() > NORM_TOL {
        return Err(ParamError::NormViolation { sum });
    }
    if (raw.a - raw.b).abs() <= AB_SEPARATION_TOL {
        return Err(ParamError::DegenerateAB { a: raw.a, b: raw.b });
    }
    if (raw.a + raw.b).abs() <= AB_SEPARATION_TOL {
        return Err(ParamError::AntisymmetricAB { a: raw.a, b: raw.b });
    }
    let box_n = raw.box_n as u32;
    Ok(PlanePairParams {
        a: raw.a,
        b: raw.b,
        p: raw.p,
        box_n,
        constants,
        box_length: box_length(box_n, constants.hbar, raw.p),
        energy: raw.p * raw.p / constants.mass,
    })
}

fn box_length(box_n: u32, hbar: f64, p: f64) -> f64 {
    (2.0 * box_n as f64 + 1.0) * PI * hbar / p
}

impl PlanePairParams {
    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn box_n(&self) -> u32 {
        self.box_n
    }
    pub fn constants(&self) -> PhysicalConstants {
        self.constants
    }
    pub fn hbar(&self) -> f64 {
        self.constants.hbar
    }
    pub fn mass(&self) -> f64 {
        self.constants.mass
    }
    /// Box length `L` in the relative coordinate.
    pub fn box_length(&self) -> f64 {
        self.box_length
    }
    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// `(a − b)/(a + b)`.
    pub fn ratio(&self) -> f64 {
        (self.a - self.b) / (self.a + self.b)
    }

    /// `4ab`, the quantity compared against 1 in the uniqueness discussion.
    pub fn four_ab(&self) -> f64 {
        4.0 * self.a * self.b
    }

    /// Dimensionless angle `pΔ/ħ`.
    pub fn angle(&self, delta: f64) -> f64 {
        self.p * delta / self.constants.hbar
    }

    /// Period of the density and of the velocity field in Δ, `πħ/p`.
    pub fn density_period(&self) -> f64 {
        PI * self.constants.hbar / self.p
    }

    /// Open interval `(−L/2, L/2)` of admissible Δ.
    pub fn delta_bounds(&self) -> (f64, f64) {
        (-0.5 * self.box_length, 0.5 * self.box_length)
    }

    pub fn contains_delta(&self, delta: f64) -> bool {
        let half = 0.5 * (2.0 * self.box_n as f64 + 1.0) * PI;
        delta.is_finite() && self.angle(delta).abs() < half
    }

    /// Maps Δ into `[−L/2, L/2)` by whole box lengths.
    pub fn wrap_delta(&self, delta: f64) -> f64 {
        let l = self.box_length;
        delta - l * ((delta + 0.5 * l) / l).floor()
    }

    pub fn admits(&self, cfg: &Configuration) -> bool {
        cfg.kind() == SystemKind::Pair1D && cfg.delta().is_some_and(|d| self.contains_delta(d))
    }

    pub fn to_config(&self) -> PlanePairConfig {
        PlanePairConfig {
            a: self.a,
            b: self.b,
            p: self.p,
            box_n: self.box_n as i64,
            hbar: self.constants.hbar,
            mass: self.constants.mass,
        }
    }
}

impl Serialize for PlanePairParams {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("PlanePairParams", 8)?;
        st.serialize_field("a", &self.a)?;
        st.serialize_field("b", &self.b)?;
        st.serialize_field("p", &self.p)?;
        st.serialize_field("boxN", &self.box_n)?;
        st.serialize_field("hbar", &self.constants.hbar)?;
        st.serialize_field("mass", &self.constants.mass)?;
        st.serialize_field("box_length", &self.box_length)?;
        st.serialize_field("energy", &self.energy)?;
        st.end()
    }
}

/// Axis-aligned box `[min, max]` per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub z: [f64; 2],
}

impl DomainBox {
    pub fn axis(&self, i: usize) -> [f64; 2] {
        match i {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    pub fn contains(&self, r: [f64; 3]) -> bool {
        (0..3).all(|i| {
            let [lo, hi] = self.axis(i);
            r[i] >= lo && r[i] <= hi
        })
    }

    /// Signed distance to the nearest face; positive inside.
    pub fn margin(&self, r: [f64; 3]) -> f64 {
        (0..3)
            .map(|i| {
                let [lo, hi] = self.axis(i);
                (r[i] - lo).min(hi - r[i])
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn volume(&self) -> f64 {
        (0..3)
            .map(|i| {
                let [lo, hi] = self.axis(i);
                hi - lo
            })
            .product()
    }
}

/// Unvalidated two-slit parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSlitConfig {
    pub k: f64,
    pub slit_half_sep: f64,
    #[serde(default = "default_exclusion")]
    pub exclusion_radius: f64,
    pub domain_box: DomainBox,
    #[serde(default = "default_one")]
    pub hbar: f64,
    #[serde(default = "default_one")]
    pub mass: f64,
    /// Not needed by the (stationary) guidance field; carried for completeness.
    #[serde(default)]
    pub energy: Option<f64>,
}

impl Default for TwoSlitConfig {
    fn default() -> Self {
        TwoSlitConfig::new(
            5.0,
            1.0,
            DomainBox {
                x: [0.0, 20.0],
                y: [-10.0, 10.0],
                z: [-10.0, 10.0],
            },
        )
    }
}

impl TwoSlitConfig {
    pub fn new(k: f64, slit_half_sep: f64, domain_box: DomainBox) -> Self {
        TwoSlitConfig {
            k,
            slit_half_sep,
            exclusion_radius: DEFAULT_EXCLUSION_RADIUS,
            domain_box,
            hbar: 1.0,
            mass: 1.0,
            energy: None,
        }
    }
}

/// Validated two-slit parameters. The normalization constant is computed
/// lazily on first use and shared between clones.
#[derive(Clone)]
pub struct TwoSlitParams {
    k: f64,
    slit_half_sep: f64,
    exclusion_radius: f64,
    domain_box: DomainBox,
    constants: PhysicalConstants,
    energy: Option<f64>,
    norm: Arc<OnceLock<f64>>,
}

pub fn validate_twoslit_params(raw: &TwoSlitConfig) -> Result<TwoSlitParams, ParamError> {
    positive("k", raw.k)?;
    positive("slit_half_sep", raw.slit_half_sep)?;
    positive("exclusion_radius", raw.exclusion_radius)?;
    let constants = PhysicalConstants {
        hbar: raw.hbar,
        mass: raw.mass,
    };
    constants.validate()?;
    if let Some(e) = raw.energy {
        finite("energy", e)?;
    }
    let bx = raw.domain_box;
    for (i, name) in ["x", "y", "z"].iter().enumerate() {
        let [lo, hi] = bx.axis(i);
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(ParamError::BadDomain {
                reason: format!("{name} bounds [{lo}, {hi}] must be finite with min < max"),
            });
        }
    }
    if bx.x[0] < 0.0 {
        return Err(ParamError::BadDomain {
            reason: format!("x-min = {} lies outside the half-space x ≥ 0", bx.x[0]),
        });
    }
    Ok(TwoSlitParams {
        k: raw.k,
        slit_half_sep: raw.slit_half_sep,
        exclusion_radius: raw.exclusion_radius,
        domain_box: bx,
        constants,
        energy: raw.energy,
        norm: Arc::new(OnceLock::new()),
    })
}

impl TwoSlitParams {
    pub fn k(&self) -> f64 {
        self.k
    }
    pub fn slit_half_sep(&self) -> f64 {
        self.slit_half_sep
    }
    pub fn exclusion_radius(&self) -> f64 {
        self.exclusion_radius
    }
    pub fn domain_box(&self) -> DomainBox {
        self.domain_box
    }
    pub fn constants(&self) -> PhysicalConstants {
        self.constants
    }
    pub fn hbar(&self) -> f64 {
        self.constants.hbar
    }
    pub fn mass(&self) -> f64 {
        self.constants.mass
    }
    pub fn energy(&self) -> Option<f64> {
        self.energy
    }
    pub fn slit_a(&self) -> [f64; 3] {
        [0.0, self.slit_half_sep, 0.0]
    }
    pub fn slit_b(&self) -> [f64; 3] {
        [0.0, -self.slit_half_sep, 0.0]
    }

    pub(crate) fn norm_cell(&self) -> &OnceLock<f64> {
        &self.norm
    }

    pub fn to_config(&self) -> TwoSlitConfig {
        TwoSlitConfig {
            k: self.k,
            slit_half_sep: self.slit_half_sep,
            exclusion_radius: self.exclusion_radius,
            domain_box: self.domain_box,
            hbar: self.constants.hbar,
            mass: self.constants.mass,
            energy: self.energy,
        }
    }
}

impl PartialEq for TwoSlitParams {
    fn eq(&self, other: &Self) -> bool {
        self.to_config() == other.to_config()
    }
}

impl fmt::Debug for TwoSlitParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TwoSlitParams")
            .field("k", &self.k)
            .field("slit_half_sep", &self.slit_half_sep)
            .field("exclusion_radius", &self.exclusion_radius)
            .field("domain_box", &self.domain_box)
            .field("constants", &self.constants)
            .field("energy", &self.energy)
            .finish()
    }
}

impl Serialize for TwoSlitParams {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_config().serialize(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SystemKind {
    Pair1D,
    Pair3D,
}

impl SystemKind {
    pub fn dim(self) -> usize {
        match self {
            SystemKind::Pair1D => 2,
            SystemKind::Pair3D => 6,
        }
    }

    pub fn coordinate_names(self) -> &'static [&'static str] {
        match self {
            SystemKind::Pair1D => &["x1", "x2"],
            SystemKind::Pair3D => &["x1", "y1", "z1", "x2", "y2", "z2"],
        }
    }
}

/// A point in configuration space at a given time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Configuration {
    kind: SystemKind,
    coords: [f64; 6],
    time: f64,
}

impl Configuration {
    pub fn pair_1d(x1: f64, x2: f64, time: f64) -> Self {
        Configuration {
            kind: SystemKind::Pair1D,
            coords: [x1, x2, 0.0, 0.0, 0.0, 0.0],
            time,
        }
    }

    /// Plane pair from relative coordinate and center of mass.
    pub fn from_relative(delta: f64, center: f64, time: f64) -> Self {
        Configuration::pair_1d(center + 0.5 * delta, center - 0.5 * delta, time)
    }

    pub fn pair_3d(r1: [f64; 3], r2: [f64; 3], time: f64) -> Self {
        Configuration {
            kind: SystemKind::Pair3D,
            coords: [r1[0], r1[1], r1[2], r2[0], r2[1], r2[2]],
            time,
        }
    }

    /// Panics if `coords.len()` does not match the kind's dimension.
    pub fn from_slice(kind: SystemKind, coords: &[f64], time: f64) -> Self {
        assert_eq!(coords.len(), kind.dim(), "coordinate count mismatch");
        let mut c = [0.0; 6];
        c[..coords.len()].copy_from_slice(coords);
        Configuration {
            kind,
            coords: c,
            time,
        }
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.kind.dim()]
    }

    pub fn coords_mut(&mut self) -> &mut [f64] {
        let d = self.kind.dim();
        &mut self.coords[..d]
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    /// `x₁ − x₂` for the 1-D pair.
    pub fn delta(&self) -> Option<f64> {
        match self.kind {
            SystemKind::Pair1D => Some(self.coords[0] - self.coords[1]),
            SystemKind::Pair3D => None,
        }
    }

    /// `(x₁ + x₂)/2` for the 1-D pair.
    pub fn center_of_mass(&self) -> Option<f64> {
        match self.kind {
            SystemKind::Pair1D => Some(0.5 * (self.coords[0] + self.coords[1])),
            SystemKind::Pair3D => None,
        }
    }

    /// Position of particle `i` (0 or 1) for the 3-D pair.
    pub fn particle(&self, i: usize) -> [f64; 3] {
        debug_assert_eq!(self.kind, SystemKind::Pair3D);
        let o = 3 * i;
        [self.coords[o], self.coords[o + 1], self.coords[o + 2]]
    }

    pub fn is_finite(&self) -> bool {
        self.time.is_finite() && self.coords().iter().all(|c| c.is_finite())
    }
}

impl Serialize for Configuration {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Configuration", 3)?;
        st.serialize_field("kind", &self.kind)?;
        st.serialize_field("coords", self.coords())?;
        st.serialize_field("time", &self.time)?;
        st.end()
    }
}
