use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pilotwave::io::ConfigFile;
use pilotwave::{DomainBox, IntegratorSettings, PlanePairConfig, TwoSlitConfig};

/// Deviation from `a² + b² = 1` that the CLI silently corrects, to absorb
/// amplitudes typed with a few decimals.
pub const RENORMALIZE_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "pilotwave", version, about = "Pilot-wave trajectory experiments for entangled particle pairs")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON file with parameter defaults; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Primary output file. Without it the result goes to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Manifest path [default: <out>.manifest.json when --out is given].
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "PILOTWAVE_JOBS")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one trajectory of either system.
    Trajectory(TrajectoryArgs),
    /// Sample an ensemble from |ψ|², evolve it and export it as CSV.
    Ensemble(EnsembleArgs),
    /// Count constraint roots for one or both first-integral forms.
    Roots(RootsArgs),
    /// Crossing times Δ(t*) = 0 for a list of initial separations.
    CrossingTimes(CrossingArgs),
    /// Compare analytic velocities with finite-difference phase gradients.
    GradCheck(GradCheckArgs),
    /// Integrate mirror-symmetric two-slit starts and track the residual.
    MirrorCheck(MirrorCheckArgs),
    /// Equivariance report: sample, evolve, compare with |ψ|².
    Qeh(QehArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum System {
    Plane,
    Twoslit,
}

#[derive(Debug, Clone, Args, Default)]
pub struct ConstArgs {
    #[arg(long)]
    pub hbar: Option<f64>,
    #[arg(long)]
    pub mass: Option<f64>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct PlaneArgs {
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    /// Momentum magnitude.
    #[arg(long)]
    pub p: Option<f64>,
    /// Box index N; the box is |pΔ/ħ| < (2N+1)π/2.
    #[arg(long = "box-n")]
    pub box_n: Option<i64>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct TwoSlitArgs {
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub slit_half_sep: Option<f64>,
    #[arg(long)]
    pub exclusion_radius: Option<f64>,
    /// Domain box as xmin,xmax,ymin,ymax,zmin,zmax.
    #[arg(long = "domain-box", value_parser = parse_box)]
    pub domain_box: Option<DomainBox>,
}

#[derive(Debug, Clone, Args)]
pub struct IntegratorArgs {
    #[arg(long, default_value_t = IntegratorSettings::default().rel_tol)]
    pub rtol: f64,
    #[arg(long, default_value_t = IntegratorSettings::default().abs_tol)]
    pub atol: f64,
    #[arg(long, default_value_t = IntegratorSettings::default().max_step)]
    pub max_step: f64,
}

impl IntegratorArgs {
    pub fn settings(&self) -> IntegratorSettings {
        IntegratorSettings {
            rel_tol: self.rtol,
            abs_tol: self.atol,
            max_step: self.max_step,
            ..IntegratorSettings::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct TrajectoryArgs {
    #[arg(long, value_enum, default_value_t = System::Plane)]
    pub system: System,
    #[command(flatten)]
    pub plane: PlaneArgs,
    #[command(flatten)]
    pub slits: TwoSlitArgs,
    #[command(flatten)]
    pub consts: ConstArgs,
    #[command(flatten)]
    pub integrator: IntegratorArgs,
    /// Initial separation Δ = x₁ − x₂ (plane).
    #[arg(long)]
    pub delta0: Option<f64>,
    /// Initial centre of mass (plane).
    #[arg(long, default_value_t = 0.0)]
    pub x0: f64,
    /// Particle 1 start as x,y,z (two-slit).
    #[arg(long, value_parser = parse_vec3)]
    pub r1: Option<[f64; 3]>,
    /// Particle 2 start as x,y,z (two-slit); defaults to the mirror image of r1.
    #[arg(long, value_parser = parse_vec3)]
    pub r2: Option<[f64; 3]>,
    #[arg(long, default_value_t = 0.0)]
    pub t0: f64,
    #[arg(long)]
    pub t1: f64,
    /// Treat the plane box as periodic instead of absorbing.
    #[arg(long)]
    pub periodic: bool,
    /// Stop at the first Δ = 0 crossing (plane).
    #[arg(long)]
    pub stop_at_crossing: bool,
    /// Stop once the mirror residual exceeds this value (two-slit).
    #[arg(long)]
    pub mirror_threshold: Option<f64>,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct EnsembleArgs {
    #[command(flatten)]
    pub plane: PlaneArgs,
    #[command(flatten)]
    pub consts: ConstArgs,
    #[command(flatten)]
    pub integrator: IntegratorArgs,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0.0)]
    pub t1: f64,
    /// Draw Δ independently instead of stratified.
    #[arg(long)]
    pub iid: bool,
    #[arg(long, default_value_t = 128)]
    pub bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormArg {
    Literal,
    Derived,
    Both,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct RootsArgs {
    #[command(flatten)]
    pub plane: PlaneArgs,
    #[command(flatten)]
    pub consts: ConstArgs,
    #[arg(long, default_value_t = 0.0)]
    pub t: f64,
    #[arg(long, default_value_t = 0.0)]
    pub t0: f64,
    /// `both` produces the uniqueness verdict comparing the two forms.
    #[arg(long, value_enum, default_value_t = FormArg::Literal)]
    pub form: FormArg,
    #[arg(long, default_value_t = pilotwave::constraints::DEFAULT_SAMPLES_PER_PERIOD)]
    pub samples_per_period: usize,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct CrossingArgs {
    #[command(flatten)]
    pub plane: PlaneArgs,
    #[command(flatten)]
    pub consts: ConstArgs,
    #[command(flatten)]
    pub integrator: IntegratorArgs,
    /// Comma-separated initial separations.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub deltas: Vec<f64>,
    /// Evenly spaced separations from --from to --to.
    #[arg(long)]
    pub from: Option<f64>,
    #[arg(long)]
    pub to: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct GradCheckArgs {
    #[arg(long, value_enum, default_value_t = System::Plane)]
    pub system: System,
    #[command(flatten)]
    pub plane: PlaneArgs,
    #[command(flatten)]
    pub slits: TwoSlitArgs,
    #[command(flatten)]
    pub consts: ConstArgs,
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = pilotwave::guidance::DEFAULT_FD_STEP)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct MirrorCheckArgs {
    #[command(flatten)]
    pub slits: TwoSlitArgs,
    #[command(flatten)]
    pub consts: ConstArgs,
    #[command(flatten)]
    pub integrator: IntegratorArgs,
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    #[arg(long, default_value_t = 10.0)]
    pub t1: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Starting region for particle 1 as xmin,xmax,ymin,ymax,zmin,zmax.
    #[arg(long, value_parser = parse_box)]
    pub start_box: Option<DomainBox>,
    #[arg(long, default_value_t = 1e-7)]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct QehArgs {
    #[command(flatten)]
    pub plane: PlaneArgs,
    #[command(flatten)]
    pub consts: ConstArgs,
    #[command(flatten)]
    pub integrator: IntegratorArgs,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 5.0)]
    pub t1: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 128)]
    pub bins: usize,
    #[arg(long)]
    pub iid: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub source: PathBuf,
    /// Re-run into a scratch location and compare the outputs byte for byte
    /// instead of overwriting them.
    #[arg(long)]
    pub verify: bool,
}

fn parse_floats<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    parse_floats::<3>(s)
}

fn parse_box(s: &str) -> Result<DomainBox, String> {
    let v = parse_floats::<6>(s)?;
    Ok(DomainBox {
        x: [v[0], v[1]],
        y: [v[2], v[3]],
        z: [v[4], v[5]],
    })
}

/// Plane-pair config from file values overridden by flags. Amplitudes within
/// [`RENORMALIZE_TOL`] of unit norm are rescaled, with a note on stderr.
pub fn plane_config(file: &ConfigFile, plane: &PlaneArgs, consts: &ConstArgs) -> PlanePairConfig {
    let mut cfg = file.plane();
    cfg.a = plane.a.unwrap_or(cfg.a);
    cfg.b = plane.b.unwrap_or(cfg.b);
    cfg.p = plane.p.unwrap_or(cfg.p);
    cfg.box_n = plane.box_n.unwrap_or(cfg.box_n);
    cfg.hbar = consts.hbar.unwrap_or(cfg.hbar);
    cfg.mass = consts.mass.unwrap_or(cfg.mass);
    let norm2 = cfg.a * cfg.a + cfg.b * cfg.b;
    if norm2 != 1.0 && (norm2 - 1.0).abs() < RENORMALIZE_TOL {
        let s = norm2.sqrt();
        cfg.a /= s;
        cfg.b /= s;
        eprintln!("note: rescaled (a, b) to unit norm: a = {}, b = {}", cfg.a, cfg.b);
    }
    cfg
}

pub fn twoslit_config(file: &ConfigFile, slits: &TwoSlitArgs, consts: &ConstArgs) -> TwoSlitConfig {
    let mut cfg = file.twoslit();
    cfg.k = slits.k.unwrap_or(cfg.k);
    cfg.slit_half_sep = slits.slit_half_sep.unwrap_or(cfg.slit_half_sep);
    cfg.exclusion_radius = slits.exclusion_radius.unwrap_or(cfg.exclusion_radius);
    cfg.domain_box = slits.domain_box.unwrap_or(cfg.domain_box);
    cfg.hbar = consts.hbar.unwrap_or(cfg.hbar);
    cfg.mass = consts.mass.unwrap_or(cfg.mass);
    cfg
}
