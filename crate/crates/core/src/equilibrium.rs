//! Ensembles sampled from `|ψ|²`, their evolution under the guidance flow,
//! and histogram/KS comparisons against a target density of Δ.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::convert::Infallible;
use thiserror::Error;

use crate::constraints::{crossing_time_map, par_map, ConstraintError};
use crate::dynamics::{integrate_trajectory, DynamicsError, EventSpec, IntegratorSettings, Termination};
use crate::guidance::{PlaneField, VelocityField};
use crate::model::{Configuration, PlanePairParams, SystemKind};
use crate::numerics::integrate;
use crate::wavefunction::density_plane_unchecked;

/// Minimum cumulative-table resolution, cells per density period.
pub const MIN_CDF_CELLS_PER_PERIOD: usize = 4096;
pub const DEFAULT_BINS: usize = 128;
/// Fraction of failed members above which evolution is rejected.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquilibriumError {
    #[error("ensemble is empty")]
    Empty,
    #[error("ensemble members disagree on time: {first} vs {other}")]
    MixedTimes { first: f64, other: f64 },
    #[error("ensemble member {index} has non-finite coordinates")]
    NonFiniteMember { index: usize },
    #[error("ensemble members must all be {expected:?}")]
    WrongKind { expected: SystemKind },
    #[error("need at least 8 histogram bins, got {0}")]
    TooFewBins(usize),
    #[error("{failed} of {total} members failed to evolve")]
    TooManyFailures { failed: usize, total: usize },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Provenance {
    SampledFromDensity,
    UserSupplied,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ensemble {
    pub members: Vec<Configuration>,
    pub seed: u64,
    pub provenance: Provenance,
}

impl Ensemble {
    /// Wraps externally built members after checking the shared-time and
    /// finiteness invariants.
    pub fn user_supplied(members: Vec<Configuration>) -> Result<Self, EquilibriumError> {
        let ens = Ensemble {
            members,
            seed: 0,
            provenance: Provenance::UserSupplied,
        };
        ens.validate()?;
        Ok(ens)
    }

    pub fn validate(&self) -> Result<(), EquilibriumError> {
        let first = self.members.first().ok_or(EquilibriumError::Empty)?;
        for (index, m) in self.members.iter().enumerate() {
            if m.kind() != first.kind() {
                return Err(EquilibriumError::WrongKind { expected: first.kind() });
            }
            if m.time() != first.time() {
                return Err(EquilibriumError::MixedTimes {
                    first: first.time(),
                    other: m.time(),
                });
            }
            if !m.is_finite() {
                return Err(EquilibriumError::NonFiniteMember { index });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn time(&self) -> Option<f64> {
        self.members.first().map(Configuration::time)
    }

    pub fn deltas(&self) -> Result<Vec<f64>, EquilibriumError> {
        self.members
            .iter()
            .map(|m| m.delta().ok_or(EquilibriumError::WrongKind { expected: SystemKind::Pair1D }))
            .collect()
    }
}

/// A probability density on a bounded interval of Δ.
pub trait Density1D: Sync {
    fn support(&self) -> (f64, f64);

    fn pdf(&self, x: f64) -> f64;

    /// Cells for the cumulative table.
    fn table_cells(&self) -> usize {
        MIN_CDF_CELLS_PER_PERIOD
    }
}

/// `(1/L)[1 + 2ab·cos(2pΔ/ħ)]` on the box.
#[derive(Debug, Clone, Copy)]
pub struct PlaneDensity {
    pub params: PlanePairParams,
}

impl PlaneDensity {
    pub fn new(params: PlanePairParams) -> Self {
        PlaneDensity { params }
    }
}

impl Density1D for PlaneDensity {
    fn support(&self) -> (f64, f64) {
        self.params.delta_bounds()
    }

    fn pdf(&self, x: f64) -> f64 {
        density_plane_unchecked(x, &self.params)
    }

    fn table_cells(&self) -> usize {
        MIN_CDF_CELLS_PER_PERIOD * (2 * self.params.box_n() as usize + 1)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct UniformDensity {
    pub lo: f64,
    pub hi: f64,
}

impl Density1D for UniformDensity {
    fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn pdf(&self, _x: f64) -> f64 {
        1.0 / (self.hi - self.lo)
    }

    fn table_cells(&self) -> usize {
        64
    }
}

/// Piecewise-linear cumulative distribution on a uniform grid. Cell masses
/// come from Gauss–Kronrod quadrature, so the nodes are exact up to the
/// quadrature tolerance and only the interpolation is linear.
#[derive(Debug, Clone)]
pub struct TabulatedCdf {
    lo: f64,
    hi: f64,
    values: Vec<f64>,
    total_mass: f64,
}

impl TabulatedCdf {
    pub fn new(density: &dyn Density1D) -> Self {
        let (lo, hi) = density.support();
        let cells = density.table_cells().max(1);
        let h = (hi - lo) / cells as f64;
        let mut values = Vec::with_capacity(cells + 1);
        let mut acc = 0.0;
        values.push(0.0);
        for i in 0..cells {
            let a = lo + h * i as f64;
            acc += integrate(|x| density.pdf(x), a, a + h, 1e-16, 1e-13, 8).scalar();
            values.push(acc);
        }
        for v in &mut values {
            *v /= acc;
        }
        *values.last_mut().expect("non-empty") = 1.0;
        TabulatedCdf {
            lo,
            hi,
            values,
            total_mass: acc,
        }
    }

    /// Mass of the density before renormalization to 1.
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        if x >= self.hi {
            return 1.0;
        }
        let cells = self.values.len() - 1;
        let s = (x - self.lo) / (self.hi - self.lo) * cells as f64;
        let i = (s.floor() as usize).min(cells - 1);
        let w = s - i as f64;
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    pub fn inverse(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let cells = self.values.len() - 1;
        let i = self.values.partition_point(|&v| v <= u).clamp(1, cells) - 1;
        let (c0, c1) = (self.values[i], self.values[i + 1]);
        let w = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        let h = (self.hi - self.lo) / cells as f64;
        self.lo + h * (i as f64 + w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SamplingScheme {
    /// One uniform per member, `u = (i + U)/n`.
    Stratified,
    Iid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplerOptions {
    pub scheme: SamplingScheme,
    /// Interval for the centre of mass; `None` means one box length centred at 0.
    pub center_interval: Option<[f64; 2]>,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        SamplerOptions {
            scheme: SamplingScheme::Stratified,
            center_interval: None,
        }
    }
}

/// Member `i` draws from its own ChaCha8 stream, so the ensemble does not
/// depend on how members are scheduled.
fn member_uniforms(seed: u64, index: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    (rng.random::<f64>(), rng.random::<f64>())
}

pub fn sample_initial(params: &PlanePairParams, n: usize, seed: u64) -> Ensemble {
    sample_initial_with(params, n, seed, &SamplerOptions::default())
}

pub fn sample_initial_with(params: &PlanePairParams, n: usize, seed: u64, options: &SamplerOptions) -> Ensemble {
    let cdf = TabulatedCdf::new(&PlaneDensity::new(*params));
    let half = 0.5 * params.box_length();
    let [x_lo, x_hi] = options.center_interval.unwrap_or([-half, half]);
    let members = (0..n)
        .map(|i| {
            let (u_delta, u_center) = member_uniforms(seed, i);
            let u = match options.scheme {
                SamplingScheme::Stratified => (i as f64 + u_delta) / n as f64,
                SamplingScheme::Iid => u_delta,
            };
            let delta = cdf.inverse(u);
            let center = x_lo + (x_hi - x_lo) * u_center;
            Configuration::from_relative(delta, center, 0.0)
        })
        .collect();
    Ensemble {
        members,
        seed,
        provenance: Provenance::SampledFromDensity,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemberFailure {
    pub index: usize,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolvedEnsemble {
    /// Surviving members at `t1`, in original order.
    pub ensemble: Ensemble,
    pub failures: Vec<MemberFailure>,
}

/// Integrates every member to `t1`. Members that leave the domain or hit a
/// field failure are dropped and listed in `failures`.
pub fn evolve_ensemble(
    ens: &Ensemble,
    field: &dyn VelocityField,
    t1: f64,
    settings: &IntegratorSettings,
) -> Result<EvolvedEnsemble, EquilibriumError> {
    ens.validate()?;
    settings.validate()?;
    if ens.members[0].kind() != field.kind() {
        return Err(EquilibriumError::WrongKind { expected: field.kind() });
    }
    let t0 = ens.members[0].time();
    if t1 == t0 {
        return Ok(EvolvedEnsemble {
            ensemble: ens.clone(),
            failures: Vec::new(),
        });
    }
    let settings = settings.endpoints_only();
    let events = [EventSpec::box_exit()];
    let indexed: Vec<(usize, Configuration)> = ens.members.iter().copied().enumerate().collect();
    let outcomes = par_map(&indexed, |&(index, cfg)| -> Result<_, Infallible> {
        Ok(match integrate_trajectory(&cfg, field, (t0, t1), &settings, &events) {
            Ok(traj) if traj.is_completed() => {
                let mut end = *traj.last();
                field.canonicalize(end.coords_mut());
                Ok(end)
            }
            Ok(traj) => Err(MemberFailure {
                index,
                termination: traj.termination,
            }),
            Err(e) => Err(MemberFailure {
                index,
                termination: Termination::FieldFailure { message: e.to_string() },
            }),
        })
    })
    .unwrap_or_else(|never| match never {});

    let mut members = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(cfg) => members.push(cfg),
            Err(f) => failures.push(f),
        }
    }
    let total = ens.len();
    if failures.len() as f64 > MAX_FAILURE_FRACTION * total as f64 {
        return Err(EquilibriumError::TooManyFailures {
            failed: failures.len(),
            total,
        });
    }
    if members.is_empty() {
        return Err(EquilibriumError::Empty);
    }
    Ok(EvolvedEnsemble {
        ensemble: Ensemble {
            members,
            seed: ens.seed,
            provenance: ens.provenance,
        },
        failures,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DistributionComparison {
    pub l1_distance: f64,
    pub ks_statistic: f64,
    pub histogram_bins: usize,
    pub sample_count: usize,
}

/// Histogram of member Δ values on `bins` equal cells spanning the density's
/// support, compared with the density's mass per cell. Members outside the
/// support count toward the L1 distance as unmatched mass.
pub fn compare_distribution(
    ens: &Ensemble,
    density: &dyn Density1D,
    bins: usize,
) -> Result<DistributionComparison, EquilibriumError> {
    if bins < 8 {
        return Err(EquilibriumError::TooFewBins(bins));
    }
    let mut deltas = ens.deltas()?;
    if deltas.is_empty() {
        return Err(EquilibriumError::Empty);
    }
    let cdf = TabulatedCdf::new(density);
    Ok(compare_with_cdf(&mut deltas, density.support(), &cdf, bins))
}

fn compare_with_cdf(deltas: &mut [f64], (lo, hi): (f64, f64), cdf: &TabulatedCdf, bins: usize) -> DistributionComparison {
    let n = deltas.len();
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    let mut outside = 0usize;
    for &d in deltas.iter() {
        if (lo..=hi).contains(&d) {
            counts[(((d - lo) / width) as usize).min(bins - 1)] += 1;
        } else {
            outside += 1;
        }
    }
    let mut l1 = outside as f64 / n as f64;
    for (i, &c) in counts.iter().enumerate() {
        let expected = cdf.cdf(lo + width * (i + 1) as f64) - cdf.cdf(lo + width * i as f64);
        l1 += (c as f64 / n as f64 - expected).abs();
    }

    deltas.sort_by(f64::total_cmp);
    let mut ks: f64 = 0.0;
    for (i, &d) in deltas.iter().enumerate() {
        let f = cdf.cdf(d);
        ks = ks.max((i + 1) as f64 / n as f64 - f).max(f - i as f64 / n as f64);
    }
    DistributionComparison {
        l1_distance: l1.min(2.0),
        ks_statistic: ks.clamp(0.0, 1.0),
        histogram_bins: bins,
        sample_count: n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QehOptions {
    pub bins: usize,
    pub sampler: SamplerOptions,
    pub settings: IntegratorSettings,
}

impl Default for QehOptions {
    fn default() -> Self {
        QehOptions {
            bins: DEFAULT_BINS,
            sampler: SamplerOptions::default(),
            settings: IntegratorSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossingSummary {
    pub members: usize,
    pub monotone: bool,
    pub coincidence: bool,
    pub min_gap: f64,
    pub earliest: f64,
    pub latest: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QehReport {
    pub params: PlanePairParams,
    pub n: usize,
    pub t1: f64,
    pub seed: u64,
    pub sampling: SamplingScheme,
    pub initial: DistributionComparison,
    #[serde(rename = "final")]
    pub final_: DistributionComparison,
    pub failed_members: usize,
    pub failed_indices: Vec<usize>,
    pub crossing_times: CrossingSummary,
}

pub fn qeh_report(params: &PlanePairParams, n: usize, t1: f64, seed: u64) -> Result<QehReport, EquilibriumError> {
    qeh_report_with(params, n, t1, seed, &QehOptions::default())
}

/// Samples, evolves in the periodic box and compares at both ends; the
/// crossing-time map is computed from the initial Δ values.
pub fn qeh_report_with(
    params: &PlanePairParams,
    n: usize,
    t1: f64,
    seed: u64,
    options: &QehOptions,
) -> Result<QehReport, EquilibriumError> {
    if options.bins < 8 {
        return Err(EquilibriumError::TooFewBins(options.bins));
    }
    if n == 0 {
        return Err(EquilibriumError::Empty);
    }
    let density = PlaneDensity::new(*params);
    let cdf = TabulatedCdf::new(&density);
    let support = density.support();

    let initial_ens = sample_initial_with(params, n, seed, &options.sampler);
    let mut initial_deltas = initial_ens.deltas()?;
    let initial = compare_with_cdf(&mut initial_deltas.clone(), support, &cdf, options.bins);

    let evolved = evolve_ensemble(&initial_ens, &PlaneField::periodic(*params), t1, &options.settings)?;
    let final_ = compare_with_cdf(&mut evolved.ensemble.deltas()?, support, &cdf, options.bins);

    initial_deltas.sort_by(f64::total_cmp);
    initial_deltas.dedup();
    let map = crossing_time_map(&initial_deltas, params, &options.settings)?;
    let (earliest, latest) = map
        .entries
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| (lo.min(e.t_star), hi.max(e.t_star)));

    Ok(QehReport {
        params: *params,
        n,
        t1,
        seed,
        sampling: options.sampler.scheme,
        initial,
        final_,
        failed_members: evolved.failures.len(),
        failed_indices: evolved.failures.iter().map(|f| f.index).collect(),
        crossing_times: CrossingSummary {
            members: map.entries.len(),
            monotone: map.monotone,
            coincidence: map.coincidence,
            min_gap: map.min_gap,
            earliest,
            latest,
        },
    })
}
