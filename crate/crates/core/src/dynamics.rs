//! Adaptive trajectory integration under a stationary velocity field.
//!
//! The stepper is the Dormand–Prince 5(4) pair with FSAL and a PI step-size
//! controller. Events are bracketed on accepted steps and then bisected using
//! exact Dormand–Prince sub-steps from the step start, so the located event
//! time is as accurate as the step itself.

use serde::Serialize;
use thiserror::Error;

use crate::guidance::VelocityField;
use crate::model::{Configuration, SystemKind};
use crate::wavefunction::EvalError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("invalid integrator settings: {0}")]
    InvalidSettings(String),
    #[error("initial configuration is {got:?} but the field expects {expected:?}")]
    KindMismatch {
        expected: SystemKind,
        got: SystemKind,
    },
    #[error("step size fell below the minimum at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("velocity field failed at t = {t}: {source}")]
    FieldFailure { t: f64, source: EvalError },
    #[error("maximum number of steps exceeded at t = {t}")]
    MaxStepsExceeded { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Recording {
    /// Every accepted step (plus event points) is stored.
    Steps,
    /// Only the initial point, event points and the final point.
    Endpoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
    /// Width of the final bisection bracket when locating events.
    pub event_time_tol: f64,
    pub recording: Recording,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings {
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            max_step: 1.0,
            min_step: 1e-12,
            max_steps: 1_000_000,
            event_time_tol: 1e-10,
            recording: Recording::Steps,
        }
    }
}

impl IntegratorSettings {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |m: &str| Err(DynamicsError::InvalidSettings(m.to_string()));
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.min_step > 0.0 && self.min_step < self.max_step && self.max_step.is_finite()) {
            return bad("need 0 < min_step < max_step < ∞");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        if self.event_time_tol.is_nan() || self.event_time_tol <= 0.0 {
            return bad("event_time_tol must be positive");
        }
        Ok(())
    }

    pub fn endpoints_only(mut self) -> Self {
        self.recording = Recording::Endpoints;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
pub enum EventKind {
    /// `x₁ − x₂` crosses `threshold`.
    DeltaZeroCrossing,
    /// The mirror residual `max(|r1A − r2B|, |r1B − r2A|)` rises above `threshold`.
    MirrorResidualThreshold,
    /// The state comes within `threshold` of the domain boundary.
    BoxExit,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::DeltaZeroCrossing => "delta_zero",
            EventKind::MirrorResidualThreshold => "mirror_residual",
            EventKind::BoxExit => "box_exit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventSpec {
    pub kind: EventKind,
    pub threshold: f64,
    /// Stop integrating when the event fires. `BoxExit` is always terminal.
    pub terminal: bool,
}

impl EventSpec {
    pub fn new(kind: EventKind, threshold: f64, terminal: bool) -> Self {
        EventSpec {
            kind,
            threshold,
            terminal: terminal || kind == EventKind::BoxExit,
        }
    }

    pub fn delta_zero(terminal: bool) -> Self {
        EventSpec::new(EventKind::DeltaZeroCrossing, 0.0, terminal)
    }

    pub fn box_exit() -> Self {
        EventSpec::new(EventKind::BoxExit, 0.0, true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventRecord {
    pub kind: EventKind,
    pub time: f64,
    pub configuration: Configuration,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub max_error_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason")]
pub enum Termination {
    Completed,
    Event { kind: EventKind },
    FieldFailure { message: String },
    StepUnderflow,
    MaxStepsExceeded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub samples: Vec<Configuration>,
    /// Field velocity at each sample (used for Hermite interpolation).
    #[serde(skip)]
    pub velocities: Vec<[f64; 6]>,
    pub step_stats: StepStats,
    pub events: Vec<EventRecord>,
    pub termination: Termination,
    /// Last field error, if the run ended on one.
    #[serde(skip)]
    pub field_error: Option<EvalError>,
}

impl Trajectory {
    pub fn kind(&self) -> SystemKind {
        self.samples[0].kind()
    }

    pub fn first(&self) -> &Configuration {
        &self.samples[0]
    }

    pub fn last(&self) -> &Configuration {
        self.samples.last().expect("trajectory is never empty")
    }

    pub fn is_completed(&self) -> bool {
        self.termination == Termination::Completed
    }

    /// The first event of `kind`, if any.
    pub fn event(&self, kind: EventKind) -> Option<&EventRecord> {
        self.events.iter().find(|e| e.kind == kind)
    }

    /// Converts an abnormal termination into the matching error. Event
    /// terminations count as success.
    pub fn into_result(self) -> Result<Trajectory, DynamicsError> {
        let t = self.last().time();
        match &self.termination {
            Termination::Completed | Termination::Event { .. } => Ok(self),
            Termination::FieldFailure { .. } => Err(DynamicsError::FieldFailure {
                t,
                source: self.field_error.clone().unwrap_or(EvalError::NonFinite { what: "field" }),
            }),
            Termination::StepUnderflow => Err(DynamicsError::StepUnderflow { t }),
            Termination::MaxStepsExceeded => Err(DynamicsError::MaxStepsExceeded { t }),
        }
    }

    /// Cubic Hermite interpolation between recorded samples. `None` outside
    /// the recorded time range.
    pub fn interpolate(&self, t: f64) -> Option<Configuration> {
        let n = self.samples.len();
        let (t_first, t_last) = (self.samples[0].time(), self.samples[n - 1].time());
        let (lo_t, hi_t) = if t_first <= t_last { (t_first, t_last) } else { (t_last, t_first) };
        if !(t >= lo_t && t <= hi_t) {
            return None;
        }
        let forward = t_last >= t_first;
        let idx = self
            .samples
            .partition_point(|s| if forward { s.time() < t } else { s.time() > t });
        if idx == 0 {
            return Some(self.samples[0]);
        }
        let (a, b) = (&self.samples[idx - 1], &self.samples[idx]);
        let (fa, fb) = (&self.velocities[idx - 1], &self.velocities[idx]);
        let h = b.time() - a.time();
        let s = (t - a.time()) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let dim = a.kind().dim();
        let mut out = [0.0; 6];
        for i in 0..dim {
            out[i] = h00 * a.coords()[i] + h10 * h * fa[i] + h01 * b.coords()[i] + h11 * h * fb[i];
        }
        Some(Configuration::from_slice(a.kind(), &out[..dim], t))
    }
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Difference between the 5th- and 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct StepResult {
    y: [f64; 6],
    k7: [f64; 6],
    err: [f64; 6],
}

fn dp_step(
    field: &dyn VelocityField,
    dim: usize,
    y: &[f64; 6],
    k1: &[f64; 6],
    h: f64,
) -> Result<StepResult, EvalError> {
    let mut k = [[0.0; 6]; 7];
    k[0] = *k1;
    let mut stage = [0.0; 6];
    for s in 1..7 {
        for i in 0..dim {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate().take(s) {
                acc += A[s][j] * kj[i];
            }
            stage[i] = y[i] + h * acc;
        }
        let mut out = [0.0; 6];
        field.velocity(&stage[..dim], &mut out[..dim])?;
        if out[..dim].iter().any(|v| !v.is_finite()) {
            return Err(EvalError::NonFinite { what: "stage velocity" });
        }
        k[s] = out;
    }
    // Stage 7 is evaluated at the 5th-order solution (FSAL).
    let mut err = [0.0; 6];
    for i in 0..dim {
        let mut e = 0.0;
        for s in 0..7 {
            e += E[s] * k[s][i];
        }
        err[i] = h * e;
    }
    Ok(StepResult {
        y: stage,
        k7: k[6],
        err,
    })
}

fn error_norm(dim: usize, y0: &[f64; 6], y1: &[f64; 6], err: &[f64; 6], s: &IntegratorSettings) -> f64 {
    let mut acc = 0.0;
    for i in 0..dim {
        let sc = s.abs_tol + s.rel_tol * y0[i].abs().max(y1[i].abs());
        acc += (err[i] / sc).powi(2);
    }
    (acc / dim as f64).sqrt()
}

fn initial_step(
    field: &dyn VelocityField,
    dim: usize,
    y: &[f64; 6],
    f0: &[f64; 6],
    span: f64,
    s: &IntegratorSettings,
) -> f64 {
    let scale = |i: usize| s.abs_tol + s.rel_tol * y[i].abs();
    let d0 = ((0..dim).map(|i| (y[i] / scale(i)).powi(2)).sum::<f64>() / dim as f64).sqrt();
    let d1 = ((0..dim).map(|i| (f0[i] / scale(i)).powi(2)).sum::<f64>() / dim as f64).sqrt();
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span).min(s.max_step);
    let mut y1 = [0.0; 6];
    for i in 0..dim {
        y1[i] = y[i] + h0 * f0[i];
    }
    let mut f1 = [0.0; 6];
    if field.velocity(&y1[..dim], &mut f1[..dim]).is_err() {
        return h0.max(s.min_step);
    }
    let d2 = ((0..dim).map(|i| ((f1[i] - f0[i]) / scale(i)).powi(2)).sum::<f64>() / dim as f64).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span).min(s.max_step).max(s.min_step)
}

/// Integrates `field` from `initial` over `t_span`, which may run backward.
///
/// Abnormal ends (field failure after step halving down to `min_step`, step
/// underflow, step budget exhaustion) do not return `Err`; they are recorded
/// in [`Trajectory::termination`] together with every sample computed so far.
/// Use [`Trajectory::into_result`] to turn them into errors.
pub fn integrate_trajectory(
    initial: &Configuration,
    field: &dyn VelocityField,
    t_span: (f64, f64),
    settings: &IntegratorSettings,
    events: &[EventSpec],
) -> Result<Trajectory, DynamicsError> {
    settings.validate()?;
    if initial.kind() != field.kind() {
        return Err(DynamicsError::KindMismatch {
            expected: field.kind(),
            got: initial.kind(),
        });
    }
    let (t0, t1) = t_span;
    if !(t0.is_finite() && t1.is_finite()) {
        return Err(DynamicsError::InvalidSettings("time span must be finite".into()));
    }
    let kind = initial.kind();
    let dim = kind.dim();
    let mut y = [0.0; 6];
    y[..dim].copy_from_slice(initial.coords());
    let mut t = t0;

    let mut traj = Trajectory {
        samples: vec![Configuration::from_slice(kind, &y[..dim], t)],
        velocities: Vec::new(),
        step_stats: StepStats::default(),
        events: Vec::new(),
        termination: Termination::Completed,
        field_error: None,
    };

    let mut k1 = [0.0; 6];
    if let Err(e) = field.velocity(&y[..dim], &mut k1[..dim]) {
        traj.termination = Termination::FieldFailure { message: e.to_string() };
        traj.field_error = Some(e);
        traj.velocities.push(k1);
        return Ok(traj);
    }
    traj.velocities.push(k1);
    if t0 == t1 {
        return Ok(traj);
    }

    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut h = initial_step(field, dim, &y, &k1, span, settings);
    let mut g_prev: Vec<Option<f64>> = events
        .iter()
        .map(|e| field.event_value(e.kind, e.threshold, &y[..dim]))
        .collect();
    let mut err_prev: f64 = 1e-4;
    let mut last_rejected = false;
    let mut steps = 0usize;
    let record_steps = settings.recording == Recording::Steps;

    loop {
        if steps >= settings.max_steps {
            traj.termination = Termination::MaxStepsExceeded;
            break;
        }
        let remaining = (t1 - t).abs();
        let mut step = h.min(settings.max_step).min(remaining);
        // Avoid leaving a sliver shorter than min_step at the end.
        if remaining - step < settings.min_step {
            step = remaining;
        }
        let hs = dir * step;
        steps += 1;
        let res = match dp_step(field, dim, &y, &k1, hs) {
            Ok(r) => r,
            Err(e) => {
                traj.step_stats.rejected += 1;
                last_rejected = true;
                h = 0.5 * step;
                if h < settings.min_step {
                    traj.termination = Termination::FieldFailure { message: e.to_string() };
                    traj.field_error = Some(e);
                    break;
                }
                continue;
            }
        };
        let err = error_norm(dim, &y, &res.y, &res.err, settings);
        if !err.is_finite() || err > 1.0 {
            traj.step_stats.rejected += 1;
            let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).max(0.2) } else { 0.2 };
            h = step * fac;
            last_rejected = true;
            if h < settings.min_step {
                traj.termination = Termination::StepUnderflow;
                break;
            }
            continue;
        }

        // Accepted.
        traj.step_stats.accepted += 1;
        traj.step_stats.max_error_estimate = traj.step_stats.max_error_estimate.max(err);
        let t_new = if step == remaining { t1 } else { t + hs };

        let g_new: Vec<Option<f64>> = events
            .iter()
            .map(|e| field.event_value(e.kind, e.threshold, &res.y[..dim]))
            .collect();
        let mut fired: Vec<(f64, usize)> = Vec::new();
        for (i, (gp, gn)) in g_prev.iter().zip(&g_new).enumerate() {
            if let (Some(gp), Some(gn)) = (gp, gn) {
                if *gp != 0.0 && (*gn == 0.0 || gp.signum() != gn.signum()) {
                    let spec = events[i];
                    let g_at = |tau: f64| -> f64 {
                        match dp_step(field, dim, &y, &k1, tau) {
                            Ok(r) => field
                                .event_value(spec.kind, spec.threshold, &r.y[..dim])
                                .unwrap_or(f64::NAN),
                            Err(_) => f64::NAN,
                        }
                    };
                    let tau = locate_event(g_at, *gp, hs, settings.event_time_tol);
                    fired.push((tau, i));
                }
            }
        }
        fired.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));

        let mut stop = false;
        for (tau, i) in fired {
            let spec = events[i];
            let ye = if tau == hs {
                res.y
            } else {
                match dp_step(field, dim, &y, &k1, tau) {
                    Ok(r) => r.y,
                    Err(_) => res.y,
                }
            };
            let te = if tau == hs { t_new } else { t + tau };
            let cfg = Configuration::from_slice(kind, &ye[..dim], te);
            traj.events.push(EventRecord {
                kind: spec.kind,
                time: te,
                configuration: cfg,
            });
            let mut fe = [0.0; 6];
            let _ = field.velocity(&ye[..dim], &mut fe[..dim]);
            if te != t_new && (record_steps || spec.terminal) {
                traj.samples.push(cfg);
                traj.velocities.push(fe);
            }
            if spec.terminal {
                if te == t_new && !traj.samples.last().is_some_and(|s| s.time() == te) {
                    traj.samples.push(cfg);
                    traj.velocities.push(fe);
                }
                traj.termination = Termination::Event { kind: spec.kind };
                stop = true;
                break;
            }
        }
        if stop {
            break;
        }

        y = res.y;
        k1 = res.k7;
        t = t_new;
        g_prev = g_new;
        if record_steps || t == t1 {
            traj.samples.push(Configuration::from_slice(kind, &y[..dim], t));
            traj.velocities.push(k1);
        }
        if t == t1 {
            traj.termination = Termination::Completed;
            break;
        }

        // PI controller.
        let mut fac = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
        fac = fac.clamp(0.2, 5.0);
        if last_rejected {
            fac = fac.min(1.0);
        }
        last_rejected = false;
        err_prev = err.max(1e-4);
        h = step * fac;
    }

    if !record_steps {
        let last = traj.last().time();
        if last != t && matches!(traj.termination, Termination::FieldFailure { .. } | Termination::StepUnderflow | Termination::MaxStepsExceeded) {
            traj.samples.push(Configuration::from_slice(kind, &y[..dim], t));
            traj.velocities.push(k1);
        }
    }
    Ok(traj)
}

/// Bisects `g(τ)` on `[0, h]` (h signed) for the sign change away from `g0`.
fn locate_event<G: FnMut(f64) -> f64>(mut g: G, g0: f64, h: f64, tol: f64) -> f64 {
    let mut lo = 0.0_f64;
    let mut hi = h;
    for _ in 0..200 {
        if (hi - lo).abs() <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let gm = g(mid);
        if gm.is_nan() {
            break;
        }
        if gm == 0.0 {
            return mid;
        }
        if gm.signum() == g0.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest drift `max_j |F(cfg_j) − F(cfg_0)|` of a candidate first integral.
pub fn conserved_residual<F>(traj: &Trajectory, first_integral: F) -> f64
where
    F: Fn(&Configuration) -> f64,
{
    let f0 = first_integral(traj.first());
    traj.samples
        .iter()
        .map(|c| (first_integral(c) - f0).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guidance::{relative_velocity_plane, FnField, PlaneField};
    use crate::model::{validate_plane_params, PlanePairConfig, PlanePairParams};
    use crate::numerics::integrate;

    fn plane() -> PlanePairParams {
        validate_plane_params(&PlanePairConfig::new(0.8, 0.6, 1.0, 10)).unwrap()
    }

    #[test]
    fn constant_field_moves_linearly() {
        let c = 0.37;
        let field = FnField::new(SystemKind::Pair1D, move |_: &[f64], out: &mut [f64]| {
            out[0] = c;
            out[1] = -c;
            Ok(())
        });
        let s = IntegratorSettings::default();
        let traj = integrate_trajectory(&Configuration::pair_1d(0.0, 0.0, 0.0), &field, (0.0, 1.0), &s, &[]).unwrap();
        assert!(traj.is_completed());
        let end = traj.last();
        assert_eq!(end.time(), 1.0);
        assert!((end.coords()[0] - c).abs() < s.abs_tol);
        assert!((end.coords()[1] + c).abs() < s.abs_tol);
    }

    #[test]
    fn harmonic_oscillator_accuracy() {
        let field = FnField::new(SystemKind::Pair1D, |y: &[f64], out: &mut [f64]| {
            out[0] = y[1];
            out[1] = -y[0];
            Ok(())
        });
        let s = IntegratorSettings::default();
        let traj = integrate_trajectory(&Configuration::pair_1d(1.0, 0.0, 0.0), &field, (0.0, 10.0), &s, &[]).unwrap();
        let end = traj.last();
        assert!((end.coords()[0] - 10.0_f64.cos()).abs() < 1e-8);
        assert!((end.coords()[1] + 10.0_f64.sin()).abs() < 1e-8);
        // Hermite dense output between steps.
        let mid = traj.interpolate(4.321).unwrap();
        assert!((mid.coords()[0] - 4.321_f64.cos()).abs() < 1e-5);
    }

    #[test]
    fn forward_then_backward_returns_home() {
        let p = plane();
        let field = PlaneField::new(p);
        let s = IntegratorSettings::default();
        let start = Configuration::from_relative(-3.0, 0.4, 0.0);
        let fwd = integrate_trajectory(&start, &field, (0.0, 6.0), &s, &[]).unwrap();
        let back = integrate_trajectory(fwd.last(), &field, (6.0, 0.0), &s, &[]).unwrap();
        assert!(back.is_completed());
        assert_eq!(back.last().time(), 0.0);
        for i in 0..2 {
            let d = (back.last().coords()[i] - start.coords()[i]).abs();
            assert!(d < 10.0 * s.rel_tol * 3.0_f64.max(1.0), "{d}");
        }
    }

    #[test]
    fn crossing_time_matches_quadrature() {
        let p = plane();
        let field = PlaneField::new(p);
        let s = IntegratorSettings::default();
        let start = Configuration::from_relative(-1.0, 0.0, 0.0);
        let traj = integrate_trajectory(&start, &field, (0.0, 50.0), &s, &[EventSpec::delta_zero(true)]).unwrap();
        let ev = traj.event(EventKind::DeltaZeroCrossing).expect("crossing");
        let oracle = integrate(|d| 1.0 / relative_velocity_plane(d, &p).unwrap(), -1.0, 0.0, 1e-15, 1e-14, 200).scalar();
        assert!(((ev.time - oracle) / oracle).abs() < 1e-8, "{} vs {}", ev.time, oracle);
        assert_eq!(traj.termination, Termination::Event { kind: EventKind::DeltaZeroCrossing });
    }

    #[test]
    fn event_time_is_independent_of_max_step() {
        let p = plane();
        let field = PlaneField::new(p);
        let start = Configuration::from_relative(-4.2, 0.0, 0.0);
        let times: Vec<f64> = [0.1, 0.01]
            .iter()
            .map(|&m| {
                let s = IntegratorSettings {
                    max_step: m,
                    ..Default::default()
                };
                let tr = integrate_trajectory(&start, &field, (0.0, 100.0), &s, &[EventSpec::delta_zero(true)]).unwrap();
                tr.event(EventKind::DeltaZeroCrossing).unwrap().time
            })
            .collect();
        assert!((times[0] - times[1]).abs() < 1e-8);
    }

    #[test]
    fn tighter_tolerance_converges() {
        let p = plane();
        let field = PlaneField::new(p);
        let start = Configuration::from_relative(-7.0, 1.0, 0.0);
        let coarse = IntegratorSettings {
            rel_tol: 1e-7,
            abs_tol: 1e-9,
            ..Default::default()
        };
        let fine = IntegratorSettings {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            ..Default::default()
        };
        let a = integrate_trajectory(&start, &field, (0.0, 10.0), &coarse, &[]).unwrap();
        let b = integrate_trajectory(&start, &field, (0.0, 10.0), &fine, &[]).unwrap();
        for i in 0..2 {
            let y = a.last().coords()[i];
            let d = (y - b.last().coords()[i]).abs();
            assert!(d < coarse.rel_tol * y.abs().max(1.0) * 10.0, "{d}");
        }
    }

    #[test]
    fn center_of_mass_is_conserved() {
        let p = plane();
        let field = PlaneField::new(p);
        let traj = integrate_trajectory(
            &Configuration::from_relative(-2.5, 3.0, 0.0),
            &field,
            (0.0, 10.0),
            &IntegratorSettings::default(),
            &[],
        )
        .unwrap();
        assert!(conserved_residual(&traj, |c| c.coords()[0] + c.coords()[1]) < 1e-9);
        // Δ itself moves.
        assert!(conserved_residual(&traj, |c| c.delta().unwrap()) > 1.0);
    }

    #[test]
    fn box_exit_terminates() {
        let p = plane();
        let field = PlaneField::new(p);
        let half = 0.5 * p.box_length();
        let start = Configuration::from_relative(half - 0.5, 0.0, 0.0);
        let traj = integrate_trajectory(&start, &field, (0.0, 20.0), &IntegratorSettings::default(), &[EventSpec::box_exit()]).unwrap();
        assert_eq!(traj.termination, Termination::Event { kind: EventKind::BoxExit });
        let d = traj.last().delta().unwrap();
        assert!((d - half).abs() < 1e-8);
    }

    #[test]
    fn field_failure_is_recorded_not_crossed() {
        // Velocity blows up (error) once x1 passes 1.
        let field = FnField::new(SystemKind::Pair1D, |y: &[f64], out: &mut [f64]| {
            if y[0] > 1.0 {
                return Err(EvalError::NodeEncountered { modulus: 0.0 });
            }
            out[0] = 1.0;
            out[1] = 0.0;
            Ok(())
        });
        let s = IntegratorSettings::default();
        let traj = integrate_trajectory(&Configuration::pair_1d(0.0, 0.0, 0.0), &field, (0.0, 5.0), &s, &[]).unwrap();
        assert!(matches!(traj.termination, Termination::FieldFailure { .. }));
        assert!(traj.last().coords()[0] <= 1.0);
        assert!(traj.last().coords()[0] > 1.0 - 1e-6);
        assert!(matches!(traj.into_result(), Err(DynamicsError::FieldFailure { .. })));
    }

    #[test]
    fn settings_are_validated() {
        let field = PlaneField::new(plane());
        let bad = IntegratorSettings {
            min_step: 2.0,
            max_step: 1.0,
            ..Default::default()
        };
        let start = Configuration::pair_1d(0.0, 0.0, 0.0);
        assert!(matches!(
            integrate_trajectory(&start, &field, (0.0, 1.0), &bad, &[]),
            Err(DynamicsError::InvalidSettings(_))
        ));
        let c3 = Configuration::pair_3d([1.0; 3], [1.0; 3], 0.0);
        assert!(matches!(
            integrate_trajectory(&c3, &field, (0.0, 1.0), &IntegratorSettings::default(), &[]),
            Err(DynamicsError::KindMismatch { .. })
        ));
    }

    #[test]
    fn max_steps_exhaustion() {
        let field = PlaneField::new(plane());
        let s = IntegratorSettings {
            max_steps: 3,
            max_step: 0.01,
            ..Default::default()
        };
        let traj = integrate_trajectory(&Configuration::pair_1d(0.0, 0.0, 0.0), &field, (0.0, 10.0), &s, &[]).unwrap();
        assert_eq!(traj.termination, Termination::MaxStepsExceeded);
    }

    #[test]
    fn times_are_strictly_monotone() {
        let p = plane();
        let field = PlaneField::new(p);
        let traj = integrate_trajectory(
            &Configuration::from_relative(-3.0, 0.0, 0.0),
            &field,
            (0.0, 20.0),
            &IntegratorSettings::default(),
            &[EventSpec::delta_zero(false)],
        )
        .unwrap();
        assert_eq!(traj.events.len(), 1);
        assert!(traj.samples.windows(2).all(|w| w[1].time() > w[0].time()));
    }
}
