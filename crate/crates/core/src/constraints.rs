//! First integrals of the relative motion, constraint-root counting, crossing
//! times and the two-slit mirror residual.
//!
//! Two first-integral forms are carried side by side:
//!
//! * [`FirstIntegralForm::Literal`]: the literal combination
//!   `Δ/(2(a²−b²)) + (ħ/p)·(ab/(a²−b²))·sin(2pΔ/ħ) − (2p/m)·t`;
//! * [`FirstIntegralForm::DerivedQuadrature`]: `G(Δ) − t` with
//!   `G(Δ) = ∫₀^Δ dΔ′ / v_Δ(Δ′)`, built by adaptive quadrature of the
//!   reciprocal relative velocity. It is conserved by construction.
//!
//! Every claim about root counts is evaluated under both.

use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{integrate_trajectory, DynamicsError, EventKind, EventSpec, IntegratorSettings, Trajectory};
use crate::guidance::{v1_plane, PlaneField};
use crate::model::{Configuration, ParamError, PlanePairParams, SystemKind, TwoSlitParams};
use crate::numerics::{bisect, integrate, Chebyshev};
use crate::wavefunction::{check_delta, raw_distances, EvalError};

/// Default root-scan resolution, samples per density period `πħ/p`.
pub const DEFAULT_SAMPLES_PER_PERIOD: usize = 4096;
/// Coarsest resolution `count_roots_with` accepts.
pub const MIN_SAMPLES_PER_PERIOD: usize = 64;
/// Root bisection tolerance in Δ.
pub const ROOT_TOL: f64 = 1e-12;
/// Two crossing times closer than this count as coincident.
pub const COINCIDENCE_TOL: f64 = 1e-8;

const CHEBYSHEV_DEGREE: usize = 48;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstraintError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("quadrature of 1/v_Δ did not converge on [0, {upper}]")]
    QuadratureFailure { upper: f64 },
    #[error("root scan needs at least {MIN_SAMPLES_PER_PERIOD} samples per period, got {samples_per_period}")]
    GridTooCoarse { samples_per_period: usize },
    #[error("trajectory from Δ = {delta_init} left the box before reaching Δ = 0")]
    NoCrossingInBox { delta_init: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
pub enum FirstIntegralForm {
    Literal,
    DerivedQuadrature,
}

/// Literal first-integral combination: the left-hand side in Δ minus `(2p/m)·t`.
pub fn first_integral_literal(delta: f64, t: f64, params: &PlanePairParams) -> f64 {
    literal_lhs(delta, params) - 2.0 * params.p() / params.mass() * t
}

fn literal_lhs(delta: f64, params: &PlanePairParams) -> f64 {
    let (a, b) = (params.a(), params.b());
    let d2 = a * a - b * b;
    delta / (2.0 * d2) + params.hbar() / params.p() * (a * b / d2) * (2.0 * params.angle(delta)).sin()
}

/// `G(Δ) = ∫₀^Δ dΔ′/v_Δ(Δ′)`, tabulated once per parameter set.
///
/// `1/v_Δ` is periodic with period `P = πħ/p`, so `G(Δ) = n·G(P) + G(Δ − nP)`
/// and only `[0, P]` is tabulated, on a Chebyshev grid whose node values come
/// from adaptive Gauss–Kronrod quadrature.
#[derive(Debug, Clone)]
pub struct DerivedIntegral {
    params: PlanePairParams,
    period: f64,
    per_period: f64,
    table: Chebyshev,
}

impl DerivedIntegral {
    pub fn new(params: &PlanePairParams) -> Result<Self, ConstraintError> {
        let period = params.density_period();
        let inv = |d: f64| 1.0 / (2.0 * v1_plane(d, params));
        let quad = |upper: f64| -> Result<f64, ConstraintError> {
            let q = integrate(inv, 0.0, upper, 1e-15, 1e-14, 500);
            if q.converged && q.scalar().is_finite() {
                Ok(q.scalar())
            } else {
                Err(ConstraintError::QuadratureFailure { upper })
            }
        };
        let table = Chebyshev::fit(quad, 0.0, period, CHEBYSHEV_DEGREE)?;
        let per_period = *table.node_values().last().expect("non-empty table");
        Ok(DerivedIntegral {
            params: *params,
            period,
            per_period,
            table,
        })
    }

    pub fn params(&self) -> &PlanePairParams {
        &self.params
    }

    /// `G(Δ)`.
    pub fn g(&self, delta: f64) -> f64 {
        let n = (delta / self.period).floor();
        let rem = (delta - n * self.period).clamp(0.0, self.period);
        n * self.per_period + self.table.eval(rem)
    }

    /// `G(Δ) − t`, constant along exact trajectories.
    pub fn value(&self, delta: f64, t: f64) -> f64 {
        self.g(delta) - t
    }
}

/// One-off evaluation of `G(Δ) − t`; builds the table on every call. Prefer
/// [`DerivedIntegral`] when evaluating repeatedly.
pub fn first_integral_derived(delta: f64, t: f64, params: &PlanePairParams) -> Result<f64, ConstraintError> {
    check_delta(delta, params)?;
    Ok(DerivedIntegral::new(params)?.value(delta, t))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootReport {
    pub form: FirstIntegralForm,
    pub t: f64,
    pub t0: f64,
    /// Sorted roots in Δ.
    pub roots: Vec<f64>,
    pub bracket_count: usize,
    /// True when the sampled `F` never changes its direction of variation.
    pub monotone: bool,
    /// `4ab`.
    pub threshold_value: f64,
    pub samples_per_period: usize,
    pub grid_points: usize,
}

impl RootReport {
    pub fn root_count(&self) -> usize {
        self.roots.len()
    }
}

/// Scans `F(Δ) = form(Δ, t) − form(0, t0)` over the box at
/// [`DEFAULT_SAMPLES_PER_PERIOD`] and bisects every sign change.
pub fn count_roots(
    form: FirstIntegralForm,
    t: f64,
    t0: f64,
    params: &PlanePairParams,
) -> Result<RootReport, ConstraintError> {
    count_roots_with(form, t, t0, params, DEFAULT_SAMPLES_PER_PERIOD)
}

pub fn count_roots_with(
    form: FirstIntegralForm,
    t: f64,
    t0: f64,
    params: &PlanePairParams,
    samples_per_period: usize,
) -> Result<RootReport, ConstraintError> {
    if samples_per_period < MIN_SAMPLES_PER_PERIOD {
        return Err(ConstraintError::GridTooCoarse { samples_per_period });
    }
    let derived = match form {
        FirstIntegralForm::DerivedQuadrature => Some(DerivedIntegral::new(params)?),
        FirstIntegralForm::Literal => None,
    };
    let eval = |delta: f64, time: f64| match &derived {
        Some(g) => g.value(delta, time),
        None => first_integral_literal(delta, time, params),
    };
    let reference = eval(0.0, t0);
    let f = |delta: f64| eval(delta, t) - reference;

    let (lo, hi) = params.delta_bounds();
    let intervals = samples_per_period * (2 * params.box_n() as usize + 1);
    let step = (hi - lo) / intervals as f64;
    let grid: Vec<f64> = (0..=intervals).map(|i| lo + step * i as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&d| f(d)).collect();

    let mut roots = Vec::new();
    let mut bracket_count = 0;
    for i in 0..intervals {
        let (fa, fb) = (values[i], values[i + 1]);
        if fa == 0.0 {
            bracket_count += 1;
            roots.push(grid[i]);
        } else if fa.signum() != fb.signum() && fb != 0.0 {
            bracket_count += 1;
            roots.push(bisect(f, grid[i], grid[i + 1], ROOT_TOL));
        }
    }
    if values[intervals] == 0.0 {
        bracket_count += 1;
        roots.push(grid[intervals]);
    }
    roots.retain(|&r| params.contains_delta(r));
    roots.sort_by(f64::total_cmp);
    let separation = 1e-9 * (hi - lo);
    roots.dedup_by(|b, a| (*b - *a).abs() <= separation);

    let (mut rising, mut falling) = (false, false);
    for w in values.windows(2) {
        let d = w[1] - w[0];
        rising |= d > 0.0;
        falling |= d < 0.0;
    }

    Ok(RootReport {
        form,
        t,
        t0,
        roots,
        bracket_count,
        monotone: !(rising && falling),
        threshold_value: params.four_ab(),
        samples_per_period,
        grid_points: intervals + 1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessVerdict {
    pub a: f64,
    pub b: f64,
    pub four_ab: f64,
    /// `4ab < 1`.
    pub threshold_satisfied: bool,
    pub literal: RootReport,
    pub derived: RootReport,
    pub forms_agree: bool,
    /// Whether "unique iff 4ab < 1" matches the count under each form.
    pub literal_threshold_predicts_count: bool,
    pub derived_threshold_predicts_count: bool,
    /// Whether "4ab < 1 implies unique" holds under each form (vacuous when
    /// the threshold is violated).
    pub literal_sufficiency_holds: bool,
    pub derived_sufficiency_holds: bool,
    pub verdict: String,
}

pub fn uniqueness_report(params: &PlanePairParams, t0: f64) -> Result<UniquenessVerdict, ConstraintError> {
    let literal = count_roots(FirstIntegralForm::Literal, t0, t0, params)?;
    let derived = count_roots(FirstIntegralForm::DerivedQuadrature, t0, t0, params)?;
    let four_ab = params.four_ab();
    let satisfied = four_ab < 1.0;
    let unique = |r: &RootReport| r.root_count() == 1;
    let verdict = if satisfied && unique(&literal) && unique(&derived) {
        "threshold satisfied, unique".to_string()
    } else {
        format!(
            "threshold {}; Literal: {} root(s); DerivedQuadrature: {} root(s)",
            if satisfied { "satisfied" } else { "violated" },
            literal.root_count(),
            derived.root_count()
        )
    };
    Ok(UniquenessVerdict {
        a: params.a(),
        b: params.b(),
        four_ab,
        threshold_satisfied: satisfied,
        forms_agree: literal.root_count() == derived.root_count(),
        literal_threshold_predicts_count: satisfied == unique(&literal),
        derived_threshold_predicts_count: satisfied == unique(&derived),
        literal_sufficiency_holds: !satisfied || unique(&literal),
        derived_sufficiency_holds: !satisfied || unique(&derived),
        literal,
        derived,
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossingEntry {
    pub delta_init: f64,
    pub t_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossingTimeMap {
    /// In input order.
    pub entries: Vec<CrossingEntry>,
    /// `Δ_init ↦ t*` is strictly monotone over the distinct inputs.
    pub monotone: bool,
    /// Two distinct `Δ_init` have crossing times within [`COINCIDENCE_TOL`].
    pub coincidence: bool,
    pub min_gap: f64,
}

fn crossing_time(delta_init: f64, params: &PlanePairParams, settings: &IntegratorSettings) -> Result<f64, ConstraintError> {
    check_delta(delta_init, params)?;
    if delta_init == 0.0 {
        return Ok(0.0);
    }
    let (a, b) = (params.a(), params.b());
    let v_sign = (a * a - b * b).signum();
    // Move Δ toward zero: forward in time if v_Δ points at the origin.
    let dir = if v_sign * delta_init < 0.0 { 1.0 } else { -1.0 };
    let min_speed = 2.0 * params.p() / params.mass() * (a * a - b * b).abs() / (1.0 + 2.0 * (a * b).abs());
    let horizon = 2.0 * delta_init.abs() / min_speed + 1.0;
    let field = PlaneField::new(*params);
    let traj = integrate_trajectory(
        &Configuration::from_relative(delta_init, 0.0, 0.0),
        &field,
        (0.0, dir * horizon),
        &settings.endpoints_only(),
        &[EventSpec::delta_zero(true), EventSpec::box_exit()],
    )?;
    match traj.event(EventKind::DeltaZeroCrossing) {
        Some(ev) => Ok(ev.time),
        None => match traj.into_result() {
            Err(e) => Err(e.into()),
            Ok(_) => Err(ConstraintError::NoCrossingInBox { delta_init }),
        },
    }
}

/// Crossing time `t*` (Δ(t*) = 0) for each initial Δ at `t = 0`, integrating
/// backward where needed.
pub fn crossing_time_map(
    delta_inits: &[f64],
    params: &PlanePairParams,
    settings: &IntegratorSettings,
) -> Result<CrossingTimeMap, ConstraintError> {
    let times = par_map(delta_inits, |&d| crossing_time(d, params, settings))?;
    let entries: Vec<CrossingEntry> = delta_inits
        .iter()
        .zip(times)
        .map(|(&delta_init, t_star)| CrossingEntry { delta_init, t_star })
        .collect();

    let mut by_delta = entries.clone();
    by_delta.sort_by(|a, b| a.delta_init.total_cmp(&b.delta_init));
    by_delta.dedup_by(|b, a| a.delta_init == b.delta_init);
    let increasing = by_delta.windows(2).all(|w| w[1].t_star > w[0].t_star);
    let decreasing = by_delta.windows(2).all(|w| w[1].t_star < w[0].t_star);

    let mut by_time = by_delta.clone();
    by_time.sort_by(|a, b| a.t_star.total_cmp(&b.t_star));
    let min_gap = by_time
        .windows(2)
        .map(|w| w[1].t_star - w[0].t_star)
        .fold(f64::INFINITY, f64::min);

    Ok(CrossingTimeMap {
        entries,
        monotone: increasing || decreasing,
        coincidence: min_gap < COINCIDENCE_TOL,
        min_gap,
    })
}

#[cfg(feature = "parallel")]
pub(crate) fn par_map<T, R, E, F>(items: &[T], f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T, R, E, F>(items: &[T], f: F) -> Result<Vec<R>, E>
where
    F: Fn(&T) -> Result<R, E>,
{
    items.iter().map(f).collect()
}

/// `(|r1A − r2B|, |r1B − r2A|)`; both vanish on the mirror manifold
/// `(x₂, y₂, z₂) = (x₁, −y₁, z₁)`.
pub fn mirror_residual(cfg: &Configuration, params: &TwoSlitParams) -> Result<(f64, f64), EvalError> {
    if cfg.kind() != SystemKind::Pair3D {
        return Err(EvalError::WrongKind {
            expected: SystemKind::Pair3D,
            got: cfg.kind(),
        });
    }
    let d = raw_distances(cfg.coords(), params);
    Ok(((d.r1a - d.r2b).abs(), (d.r1b - d.r2a).abs()))
}

/// How the literal first-integral combination behaves along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "class")]
pub enum LiteralClass {
    Conserved,
    /// `LHS(Δ(t))` is affine in `t`, but with slope `factor·(2p/m)`.
    ConservedUpToRescaling { factor: f64 },
    NotConserved,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiteralAdjudication {
    pub literal_drift: f64,
    pub derived_drift: f64,
    pub fitted_slope: f64,
    pub fit_residual: f64,
    pub class: LiteralClass,
}

/// Measures the drift of both first-integral forms along `traj` and
/// classifies the literal form with tolerance `tol`.
pub fn adjudicate_first_integrals(traj: &Trajectory, derived: &DerivedIntegral, tol: f64) -> LiteralAdjudication {
    let params = derived.params();
    let pts: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .map(|c| (c.time(), c.delta().expect("plane trajectory")))
        .collect();
    let (t_first, d_first) = pts[0];
    let literal0 = first_integral_literal(d_first, t_first, params);
    let derived0 = derived.value(d_first, t_first);
    let mut literal_drift: f64 = 0.0;
    let mut derived_drift: f64 = 0.0;
    for &(t, d) in &pts {
        literal_drift = literal_drift.max((first_integral_literal(d, t, params) - literal0).abs());
        derived_drift = derived_drift.max((derived.value(d, t) - derived0).abs());
    }

    // Least-squares line LHS ≈ s·t + c.
    let n = pts.len() as f64;
    let lhs: Vec<f64> = pts.iter().map(|&(_, d)| literal_lhs(d, params)).collect();
    let mean_t = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_l = lhs.iter().sum::<f64>() / n;
    let (mut stt, mut stl) = (0.0, 0.0);
    for (&(t, _), &l) in pts.iter().zip(&lhs) {
        stt += (t - mean_t) * (t - mean_t);
        stl += (t - mean_t) * (l - mean_l);
    }
    let slope = if stt > 0.0 { stl / stt } else { 0.0 };
    let fit_residual = pts
        .iter()
        .zip(&lhs)
        .map(|(&(t, _), &l)| (l - mean_l - slope * (t - mean_t)).abs())
        .fold(0.0, f64::max);

    let nominal = 2.0 * params.p() / params.mass();
    let class = if literal_drift < tol {
        LiteralClass::Conserved
    } else if fit_residual < tol {
        LiteralClass::ConservedUpToRescaling { factor: slope / nominal }
    } else {
        LiteralClass::NotConserved
    };
    LiteralAdjudication {
        literal_drift,
        derived_drift,
        fitted_slope: slope,
        fit_residual,
        class,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_plane_params, validate_twoslit_params, DomainBox, PlanePairConfig, TwoSlitConfig};
    use std::f64::consts::{FRAC_PI_4, PI};

    fn plane(a: f64, b: f64) -> PlanePairParams {
        validate_plane_params(&PlanePairConfig::new(a, b, 1.0, 10)).unwrap()
    }

    /// Hand-integrated antiderivative of 1/v_Δ, used only as an oracle.
    fn g_closed_form(delta: f64, p: &PlanePairParams) -> f64 {
        let (a, b) = (p.a(), p.b());
        let d2 = a * a - b * b;
        let m = p.mass();
        m / (2.0 * p.p() * d2) * delta + m * a * b * p.hbar() / (2.0 * p.p() * p.p() * d2) * (2.0 * p.angle(delta)).sin()
    }

    #[test]
    fn literal_form_examples() {
        let p = plane(0.8, 0.6);
        assert_eq!(first_integral_literal(0.0, 0.0, &p), 0.0);
        let t0 = 2.75;
        assert!((first_integral_literal(0.0, t0, &p) - (-2.0 * t0)).abs() < 1e-15);
        // Δ/(2·0.28) + 0.48/0.28·sin(π/2)
        let expected = FRAC_PI_4 / 0.56 + 0.48 / 0.28;
        assert!((first_integral_literal(FRAC_PI_4, 0.0, &p) - expected).abs() < 1e-13);
    }

    #[test]
    fn derived_integral_matches_closed_form_oracle() {
        for (a, b) in [(0.8, 0.6), (0.6, 0.8), (0.99, 0.0199_f64.sqrt()), (0.8, -0.6)] {
            let p = plane(a, b);
            let g = DerivedIntegral::new(&p).unwrap();
            for i in 0..=200 {
                let d = -32.0 + 0.32 * i as f64;
                let want = g_closed_form(d, &p);
                assert!((g.g(d) - want).abs() < 1e-11 * want.abs().max(1.0), "a={a} Δ={d}");
            }
        }
    }

    #[test]
    fn derived_integral_examples() {
        let p = plane(0.8, 0.6);
        assert!((first_integral_derived(0.0, 1.5, &p).unwrap() + 1.5).abs() < 1e-15);
        let g = DerivedIntegral::new(&p).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..2000 {
            let v = g.g(-30.0 + 0.03 * i as f64);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn root_counts() {
        let a = 0.99;
        let b = (1.0_f64 - a * a).sqrt();
        let p = plane(a, b);
        let r = count_roots(FirstIntegralForm::Literal, 0.0, 0.0, &p).unwrap();
        assert_eq!(r.roots.len(), 1);
        assert!(r.roots[0].abs() < 1e-12);
        assert!(r.monotone);
        let r = count_roots(FirstIntegralForm::DerivedQuadrature, 0.0, 0.0, &p).unwrap();
        assert_eq!(r.roots.len(), 1);

        // ab < 0 with 4|ab| > 1 is where the literal form has extra roots.
        let p = plane(0.8, -0.6);
        let r = count_roots(FirstIntegralForm::Literal, 0.0, 0.0, &p).unwrap();
        assert_eq!(r.roots.len(), 3);
        assert!(!r.monotone);
        // Nonzero roots solve u = 1.92·sin u with u = 2Δ.
        for &root in &r.roots {
            let u = 2.0 * root;
            assert!((u - 1.92 * u.sin()).abs() < 1e-10);
        }
        let r = count_roots(FirstIntegralForm::DerivedQuadrature, 0.0, 0.0, &p).unwrap();
        assert_eq!(r.roots.len(), 1);
    }

    #[test]
    fn roots_at_later_time_shift() {
        let p = plane(0.8, 0.6);
        // Derived form: G(Δ) = t − t0 has exactly one root, the Δ reached at time t − t0
        // by a trajectory starting at Δ = 0.
        let r = count_roots(FirstIntegralForm::DerivedQuadrature, 3.0, 0.0, &p).unwrap();
        assert_eq!(r.roots.len(), 1);
        assert!((g_closed_form(r.roots[0], &p) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn grid_too_coarse() {
        let p = plane(0.8, 0.6);
        assert!(matches!(
            count_roots_with(FirstIntegralForm::Literal, 0.0, 0.0, &p, 16),
            Err(ConstraintError::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn uniqueness_verdicts() {
        let p = plane(0.99, 0.0199_f64.sqrt());
        let v = uniqueness_report(&p, 0.0).unwrap();
        assert_eq!(v.verdict, "threshold satisfied, unique");
        assert!(v.forms_agree && v.literal_sufficiency_holds && v.derived_sufficiency_holds);

        let p = plane(0.8, 0.6);
        let v = uniqueness_report(&p, 0.0).unwrap();
        assert!(!v.threshold_satisfied);
        assert_eq!(v.derived.root_count(), 1);
        assert!(!v.derived_threshold_predicts_count);

        let a = 0.5_f64.sqrt() + 4e-10;
        let bad = validate_plane_params(&PlanePairConfig::new(a, (1.0 - a * a).sqrt(), 1.0, 10));
        assert!(matches!(bad, Err(ParamError::DegenerateAB { .. })));
    }

    #[test]
    fn crossing_times() {
        let p = plane(0.8, 0.6);
        let s = IntegratorSettings::default();
        let deltas = [0.0, -1.0, -5.5, 2.0, 7.25];
        let map = crossing_time_map(&deltas, &p, &s).unwrap();
        assert_eq!(map.entries[0].t_star, 0.0);
        for e in &map.entries[1..] {
            let oracle = -g_closed_form(e.delta_init, &p);
            assert!(((e.t_star - oracle) / oracle).abs() < 1e-8, "{e:?} vs {oracle}");
        }
        assert!(map.monotone);
        assert!(!map.coincidence);
        // Backward integration for positive Δ when a > b.
        assert!(map.entries[3].t_star < 0.0);
    }

    #[test]
    fn crossing_rejects_out_of_box() {
        let p = plane(0.8, 0.6);
        let r = crossing_time_map(&[p.box_length()], &p, &IntegratorSettings::default());
        assert!(matches!(r, Err(ConstraintError::Eval(EvalError::OutOfBox { .. }))));
    }

    #[test]
    fn mirror_residual_examples() {
        let ps = validate_twoslit_params(&TwoSlitConfig::new(
            5.0,
            1.0,
            DomainBox {
                x: [0.0, 20.0],
                y: [-10.0, 10.0],
                z: [-10.0, 10.0],
            },
        ))
        .unwrap();
        let m = Configuration::pair_3d([1.1, 0.4, -0.3], [1.1, -0.4, -0.3], 0.0);
        assert_eq!(mirror_residual(&m, &ps).unwrap(), (0.0, 0.0));
        let g = Configuration::pair_3d([1.1, 0.4, -0.3], [2.0, 0.9, 0.5], 0.0);
        let (r1, r2) = mirror_residual(&g, &ps).unwrap();
        assert!(r1 > 0.0 && r2 > 0.0);
        let _ = PI;
    }

    #[test]
    fn adjudication_of_literal_form() {
        let p = plane(0.8, 0.6);
        let g = DerivedIntegral::new(&p).unwrap();
        let traj = integrate_trajectory(
            &Configuration::from_relative(-6.0, 0.0, 0.0),
            &PlaneField::new(p),
            (0.0, 10.0),
            &IntegratorSettings::default(),
            &[],
        )
        .unwrap();
        let adj = adjudicate_first_integrals(&traj, &g, 1e-6);
        assert!(adj.derived_drift < 1e-7, "{adj:?}");
        assert_eq!(adj.class, LiteralClass::NotConserved);

        // b = 0: the state is a single plane wave and the literal form is affine in t
        // with half its nominal slope.
        let p = plane(1.0, 0.0);
        let g = DerivedIntegral::new(&p).unwrap();
        let traj = integrate_trajectory(
            &Configuration::from_relative(-6.0, 0.0, 0.0),
            &PlaneField::new(p),
            (0.0, 5.0),
            &IntegratorSettings::default(),
            &[],
        )
        .unwrap();
        let adj = adjudicate_first_integrals(&traj, &g, 1e-6);
        match adj.class {
            LiteralClass::ConservedUpToRescaling { factor } => assert!((factor - 0.5).abs() < 1e-9),
            other => panic!("unexpected {other:?}"),
        }
    }
}
