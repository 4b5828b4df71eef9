//! Guidance velocities `v = (1/m)∇S` for both systems, in closed form, plus a
//! generic finite-difference gradient of any phase field.

use std::f64::consts::PI;

use serde::Serialize;

use crate::dynamics::EventKind;
use crate::model::{Configuration, PhysicalConstants, PlanePairParams, SystemKind, TwoSlitParams};
use crate::wavefunction::{
    check_delta, check_distances, node_check, phase_components, raw_distances, slit_distances,
    EvalError, SlitDistances,
};

/// Default finite-difference step (length units).
pub const DEFAULT_FD_STEP: f64 = 1e-5;
/// Relative disagreement between steps `h` and `h/2` that triggers Richardson
/// extrapolation.
pub const RICHARDSON_TRIGGER: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityVector {
    kind: SystemKind,
    components: [f64; 6],
}

impl VelocityVector {
    pub fn from_slice(kind: SystemKind, v: &[f64]) -> Self {
        assert_eq!(v.len(), kind.dim());
        let mut components = [0.0; 6];
        components[..v.len()].copy_from_slice(v);
        VelocityVector { kind, components }
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.components[..self.kind.dim()]
    }

    pub fn max_abs(&self) -> f64 {
        self.as_slice().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max_i |self_i − other_i| / max_i |other_i|`.
    pub fn relative_error(&self, reference: &VelocityVector) -> f64 {
        let diff = self
            .as_slice()
            .iter()
            .zip(reference.as_slice())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        let scale = reference.max_abs();
        if scale == 0.0 {
            diff
        } else {
            diff / scale
        }
    }
}

impl Serialize for VelocityVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.as_slice().serialize(s)
    }
}

/// `v₁ = (p/m)·r / (cos²θ + r²·sin²θ)`, `r = (a−b)/(a+b)`, `θ = pΔ/ħ`.
/// No box check.
pub(crate) fn v1_plane(delta: f64, params: &PlanePairParams) -> f64 {
    let r = params.ratio();
    let (s, c) = params.angle(delta).sin_cos();
    params.p() / params.mass() * r / (c * c + r * r * s * s)
}

/// Velocities `(v₁, v₂)` of the plane pair; `v₂ = −v₁` exactly.
pub fn velocity_plane(delta: f64, params: &PlanePairParams) -> Result<VelocityVector, EvalError> {
    check_delta(delta, params)?;
    let v1 = v1_plane(delta, params);
    Ok(VelocityVector::from_slice(SystemKind::Pair1D, &[v1, -v1]))
}

/// `dΔ/dt = v₁ − v₂ = 2v₁`. Its sign is the sign of `a² − b²`.
pub fn relative_velocity_plane(delta: f64, params: &PlanePairParams) -> Result<f64, EvalError> {
    check_delta(delta, params)?;
    Ok(2.0 * v1_plane(delta, params))
}

/// Phase partials `∂S/∂r_{ij}` of the two-slit pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialPartials {
    pub s1a: f64,
    pub s1b: f64,
    pub s2a: f64,
    pub s2b: f64,
}

/// Chain-rule partials of `S = ħ·atan2(N, D)`:
/// `∂S/∂r = ħ(D·∂N/∂r − N·∂D/∂r)/(N² + D²)`.
pub fn radial_partials(d: &SlitDistances, k: f64, hbar: f64) -> Result<RadialPartials, EvalError> {
    let (n, dd) = phase_components(d, k);
    node_check(d, n, dd)?;
    let p = d.r1b * d.r2a;
    let q = d.r1a * d.r2b;
    let (sa, ca) = (k * (d.r1a + d.r2b)).sin_cos();
    let (sb, cb) = (k * (d.r1b + d.r2a)).sin_cos();
    let inv = hbar / (n * n + dd * dd);
    let partial = |dn: f64, ddd: f64| inv * (dd * dn - n * ddd);
    // α = k(r1A + r2B) multiplies P = r1B·r2A; β = k(r1B + r2A) multiplies Q = r1A·r2B.
    Ok(RadialPartials {
        s1a: partial(k * p * ca + d.r2b * sb, -k * p * sa + d.r2b * cb),
        s2b: partial(k * p * ca + d.r1a * sb, -k * p * sa + d.r1a * cb),
        s1b: partial(k * q * cb + d.r2a * sa, -k * q * sb + d.r2a * ca),
        s2a: partial(k * q * cb + d.r1b * sa, -k * q * sb + d.r1b * ca),
    })
}

/// The partials in the quotient-rule `[1 + N²/D²]⁻¹[(…)/D − (N/D²)(…)]` layout, with
/// the `A ↔ B` images written out. Singular where `D = 0`; kept as a
/// cross-check of [`radial_partials`].
pub fn radial_partials_quotient(d: &SlitDistances, k: f64, hbar: f64) -> RadialPartials {
    let (n, dd) = phase_components(d, k);
    let pref = hbar / (1.0 + n * n / (dd * dd));
    let (sa, ca) = (k * (d.r1a + d.r2b)).sin_cos();
    let (sb, cb) = (k * (d.r1b + d.r2a)).sin_cos();
    let p = d.r1b * d.r2a;
    let q = d.r1a * d.r2b;
    RadialPartials {
        s1a: pref * ((k * p * ca + d.r2b * sb) / dd - n / (dd * dd) * (-k * p * sa + d.r2b * cb)),
        s2b: pref * ((k * p * ca + d.r1a * sb) / dd - n / (dd * dd) * (-k * p * sa + d.r1a * cb)),
        s1b: pref * ((k * q * cb + d.r2a * sa) / dd - n / (dd * dd) * (-k * q * sb + d.r2a * ca)),
        s2a: pref * ((k * q * cb + d.r1b * sa) / dd - n / (dd * dd) * (-k * q * sb + d.r1b * ca)),
    }
}

fn twoslit_velocity_into(
    coords: &[f64],
    d: &SlitDistances,
    params: &TwoSlitParams,
    out: &mut [f64],
) -> Result<(), EvalError> {
    let part = radial_partials(d, params.k(), params.hbar())?;
    let inv_m = 1.0 / params.mass();
    let a = params.slit_half_sep();
    let (x1, y1, z1) = (coords[0], coords[1], coords[2]);
    let (x2, y2, z2) = (coords[3], coords[4], coords[5]);
    // ∂r_{iA}/∂c = (c − c_A)/r_{iA}, slit A at (0, a, 0) and B at (0, −a, 0).
    let (g1a, g1b) = (part.s1a / d.r1a, part.s1b / d.r1b);
    let (g2a, g2b) = (part.s2a / d.r2a, part.s2b / d.r2b);
    out[0] = inv_m * (g1a * x1 + g1b * x1);
    out[1] = inv_m * (g1a * (y1 - a) + g1b * (y1 + a));
    out[2] = inv_m * (g1a * z1 + g1b * z1);
    out[3] = inv_m * (g2a * x2 + g2b * x2);
    out[4] = inv_m * (g2a * (y2 - a) + g2b * (y2 + a));
    out[5] = inv_m * (g2a * z2 + g2b * z2);
    if out[..6].iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(EvalError::NonFinite { what: "two-slit velocity" })
    }
}

/// Cartesian guidance velocities of both particles of the two-slit pair.
pub fn velocity_twoslit(cfg: &Configuration, params: &TwoSlitParams) -> Result<VelocityVector, EvalError> {
    let d = slit_distances(cfg, params)?;
    let mut out = [0.0; 6];
    twoslit_velocity_into(cfg.coords(), &d, params, &mut out)?;
    Ok(VelocityVector::from_slice(SystemKind::Pair3D, &out))
}

fn unwrap_difference(raw: f64, hbar: f64) -> Result<f64, EvalError> {
    let period = 2.0 * PI * hbar;
    let mut w = raw - period * (raw / period).round();
    if w <= -PI * hbar {
        w += period;
    }
    if ((w.abs()) - PI * hbar).abs() < 1e-3 * hbar {
        return Err(EvalError::StencilFailure {
            reason: format!("phase jump {raw} is ambiguous modulo 2πħ"),
        });
    }
    Ok(w)
}

fn central_gradient<F>(phase: &F, cfg: &Configuration, h: f64, hbar: f64) -> Result<Vec<f64>, EvalError>
where
    F: Fn(&Configuration) -> Result<f64, EvalError> + ?Sized,
{
    let dim = cfg.kind().dim();
    let mut grad = Vec::with_capacity(dim);
    for i in 0..dim {
        let mut plus = *cfg;
        let mut minus = *cfg;
        plus.coords_mut()[i] += h;
        minus.coords_mut()[i] -= h;
        let sp = phase(&plus).map_err(stencil_error)?;
        let sm = phase(&minus).map_err(stencil_error)?;
        grad.push(unwrap_difference(sp - sm, hbar)? / (2.0 * h));
    }
    Ok(grad)
}

fn stencil_error(e: EvalError) -> EvalError {
    match e {
        EvalError::StencilFailure { .. } => e,
        other => EvalError::StencilFailure {
            reason: other.to_string(),
        },
    }
}

/// Central-difference guidance velocity `(1/m)∂S/∂x_i` of an arbitrary phase
/// field. Phase differences across the stencil are unwrapped into
/// `(−πħ, πħ]`. Steps `h` and `h/2` are compared; if they disagree by more
/// than [`RICHARDSON_TRIGGER`] the Richardson combination is returned.
pub fn numeric_velocity<F>(
    phase: &F,
    cfg: &Configuration,
    step: f64,
    constants: PhysicalConstants,
) -> Result<VelocityVector, EvalError>
where
    F: Fn(&Configuration) -> Result<f64, EvalError> + ?Sized,
{
    let hbar = constants.hbar;
    let coarse = central_gradient(phase, cfg, step, hbar)?;
    let fine = central_gradient(phase, cfg, 0.5 * step, hbar)?;
    let scale = fine.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let disagree = coarse
        .iter()
        .zip(&fine)
        .any(|(c, f)| (c - f).abs() > RICHARDSON_TRIGGER * scale);
    let grad: Vec<f64> = if disagree {
        coarse.iter().zip(&fine).map(|(c, f)| (4.0 * f - c) / 3.0).collect()
    } else {
        fine
    };
    let v: Vec<f64> = grad.iter().map(|g| g / constants.mass).collect();
    Ok(VelocityVector::from_slice(cfg.kind(), &v))
}

/// A stationary velocity field on configuration space, as consumed by the
/// integrator.
pub trait VelocityField: Sync {
    fn kind(&self) -> SystemKind;

    fn velocity(&self, coords: &[f64], out: &mut [f64]) -> Result<(), EvalError>;

    /// Event function for `kind`; the event fires where it changes sign.
    /// `None` if the field does not support that event.
    fn event_value(&self, _kind: EventKind, _threshold: f64, _coords: &[f64]) -> Option<f64> {
        None
    }

    /// Maps a state back onto the field's canonical domain (e.g. a periodic cell).
    fn canonicalize(&self, _coords: &mut [f64]) {}
}

/// How the plane pair treats the edge of the normalization box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoxBoundary {
    /// Leaving the box is a terminal `BoxExit` event.
    Absorbing,
    /// Δ is identified modulo the box length `L`, an integer number of
    /// density periods, so `|ψ|²` and `v` are continuous across the edge.
    Periodic,
}

#[derive(Debug, Clone, Copy)]
pub struct PlaneField {
    pub params: PlanePairParams,
    pub boundary: BoxBoundary,
}

impl PlaneField {
    pub fn new(params: PlanePairParams) -> Self {
        PlaneField {
            params,
            boundary: BoxBoundary::Absorbing,
        }
    }

    pub fn periodic(params: PlanePairParams) -> Self {
        PlaneField {
            params,
            boundary: BoxBoundary::Periodic,
        }
    }
}

impl VelocityField for PlaneField {
    fn kind(&self) -> SystemKind {
        SystemKind::Pair1D
    }

    fn velocity(&self, coords: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        // v is analytic and periodic in Δ, so stage points just past the box
        // edge are evaluated as-is; the BoxExit event handles the wall.
        let v1 = v1_plane(coords[0] - coords[1], &self.params);
        out[0] = v1;
        out[1] = -v1;
        Ok(())
    }

    fn event_value(&self, kind: EventKind, threshold: f64, coords: &[f64]) -> Option<f64> {
        let delta = coords[0] - coords[1];
        match kind {
            EventKind::DeltaZeroCrossing => Some(delta - threshold),
            EventKind::BoxExit => match self.boundary {
                BoxBoundary::Absorbing => Some(0.5 * self.params.box_length() - delta.abs() - threshold),
                BoxBoundary::Periodic => None,
            },
            EventKind::MirrorResidualThreshold => None,
        }
    }

    fn canonicalize(&self, coords: &mut [f64]) {
        if self.boundary == BoxBoundary::Periodic {
            let delta = coords[0] - coords[1];
            let shift = 0.5 * (self.params.wrap_delta(delta) - delta);
            if shift != 0.0 {
                coords[0] += shift;
                coords[1] -= shift;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TwoSlitField {
    pub params: TwoSlitParams,
}

impl TwoSlitField {
    pub fn new(params: TwoSlitParams) -> Self {
        TwoSlitField { params }
    }
}

impl VelocityField for TwoSlitField {
    fn kind(&self) -> SystemKind {
        SystemKind::Pair3D
    }

    fn velocity(&self, coords: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        let d = raw_distances(coords, &self.params);
        check_distances(&d, &self.params)?;
        twoslit_velocity_into(coords, &d, &self.params, out)
    }

    fn event_value(&self, kind: EventKind, threshold: f64, coords: &[f64]) -> Option<f64> {
        match kind {
            EventKind::MirrorResidualThreshold => {
                let d = raw_distances(coords, &self.params);
                let residual = (d.r1a - d.r2b).abs().max((d.r1b - d.r2a).abs());
                Some(threshold - residual)
            }
            EventKind::BoxExit => {
                let bx = self.params.domain_box();
                let m1 = bx.margin([coords[0], coords[1], coords[2]]);
                let m2 = bx.margin([coords[3], coords[4], coords[5]]);
                Some(m1.min(m2) - threshold)
            }
            EventKind::DeltaZeroCrossing => None,
        }
    }
}

/// Adapts a closure `(coords, out) -> Result` into a [`VelocityField`].
pub struct FnField<F> {
    kind: SystemKind,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(&[f64], &mut [f64]) -> Result<(), EvalError> + Sync,
{
    pub fn new(kind: SystemKind, f: F) -> Self {
        FnField { kind, f }
    }
}

impl<F> VelocityField for FnField<F>
where
    F: Fn(&[f64], &mut [f64]) -> Result<(), EvalError> + Sync,
{
    fn kind(&self) -> SystemKind {
        self.kind
    }

    fn velocity(&self, coords: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        (self.f)(coords, out)
    }

    fn event_value(&self, kind: EventKind, threshold: f64, coords: &[f64]) -> Option<f64> {
        match (kind, self.kind) {
            (EventKind::DeltaZeroCrossing, SystemKind::Pair1D) => Some(coords[0] - coords[1] - threshold),
            _ => None,
        }
    }
}
