use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use pilotwave::constraints::{count_roots_with, crossing_time_map, mirror_residual, uniqueness_report, FirstIntegralForm};
use pilotwave::equilibrium::{
    compare_distribution, evolve_ensemble, qeh_report_with, sample_initial_with, PlaneDensity, QehOptions,
    SamplerOptions, SamplingScheme,
};
use pilotwave::io::{crossing_map_csv, ensemble_csv, to_json, trajectory_csv, write_atomic, ConfigFile};
use pilotwave::{
    integrate_trajectory, numeric_velocity, phase_plane, phase_twoslit, prob_density_plane, slit_distances,
    validate_plane_params, validate_twoslit_params, velocity_plane, velocity_twoslit, Configuration, DomainBox,
    EvalError, EventSpec, PlaneField, PlanePairParams, TwoSlitField, TwoSlitParams,
};

use crate::args::*;
use crate::failure::{CmdResult, Failure};
use crate::manifest::RunManifest;

/// Result of a subcommand before anything is written.
struct Output {
    body: String,
    params: serde_json::Value,
    seed: Option<u64>,
    summary: String,
    /// Set by check commands whose verdict is negative; reported after the
    /// output is written.
    verdict: Option<Failure>,
}

impl Output {
    fn new(body: String, params: serde_json::Value) -> Self {
        Output {
            body,
            params,
            seed: None,
            summary: String::new(),
            verdict: None,
        }
    }
}

pub fn run(argv: &[String]) -> CmdResult<()> {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(());
            }
            return Err(Failure::invalid(e.render().to_string().trim_end().trim_start_matches("error: ")));
        }
    };
    let common = &cli.common;
    if let Some(jobs) = common.jobs {
        if jobs == 0 {
            return Err(Failure::invalid("--jobs must be at least 1"));
        }
        // Fails only if a pool already exists (e.g. under replay); the first one wins.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }

    if let Command::Replay(r) = &cli.command {
        return replay(r);
    }

    let file = match &common.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let (name, output) = match &cli.command {
        Command::Trajectory(a) => ("trajectory", trajectory(a, &file)?),
        Command::Ensemble(a) => ("ensemble", ensemble(a, &file)?),
        Command::Roots(a) => ("roots", roots(a, &file)?),
        Command::CrossingTimes(a) => ("crossing-times", crossing_times(a, &file)?),
        Command::GradCheck(a) => ("grad-check", grad_check(a, &file)?),
        Command::MirrorCheck(a) => ("mirror-check", mirror_check(a, &file)?),
        Command::Qeh(a) => ("qeh", qeh(a, &file)?),
        Command::Replay(_) => unreachable!("handled above"),
    };

    let mut manifest = RunManifest::new(name, &argv[1..], output.params, output.seed);
    match &common.out {
        Some(out) => {
            write_atomic(out, &output.body)?;
            manifest.outputs.push(out.clone());
        }
        None => print!("{}", output.body),
    }
    let manifest_path = common
        .manifest
        .clone()
        .or_else(|| common.out.as_deref().map(RunManifest::default_path));
    if let Some(path) = manifest_path {
        write_atomic(&path, &to_json(&manifest)?)?;
    }
    if !output.summary.is_empty() {
        eprintln!("{}", output.summary);
    }
    match output.verdict {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

fn seed_of(flag: Option<u64>, file: &ConfigFile) -> u64 {
    flag.or(file.seed).unwrap_or(0)
}

fn plane_params(file: &ConfigFile, plane: &PlaneArgs, consts: &ConstArgs) -> CmdResult<PlanePairParams> {
    Ok(validate_plane_params(&plane_config(file, plane, consts))?)
}

fn twoslit_params(file: &ConfigFile, slits: &TwoSlitArgs, consts: &ConstArgs) -> CmdResult<TwoSlitParams> {
    Ok(validate_twoslit_params(&twoslit_config(file, slits, consts))?)
}

fn trajectory(a: &TrajectoryArgs, file: &ConfigFile) -> CmdResult<Output> {
    let settings = a.integrator.settings();
    settings.validate()?;
    let (traj, params) = match a.system {
        System::Plane => {
            let params = plane_params(file, &a.plane, &a.consts)?;
            let delta0 = a.delta0.ok_or_else(|| Failure::invalid("--delta0 is required for the plane system"))?;
            prob_density_plane(delta0, &params)?;
            let start = Configuration::from_relative(delta0, a.x0, a.t0);
            let field = if a.periodic {
                PlaneField::periodic(params)
            } else {
                PlaneField::new(params)
            };
            let events = [EventSpec::delta_zero(a.stop_at_crossing), EventSpec::box_exit()];
            let traj = integrate_trajectory(&start, &field, (a.t0, a.t1), &settings, &events)?;
            (
                traj,
                json!({"system": "plane", "params": params, "start": start, "t1": a.t1,
                       "periodic": a.periodic, "stop_at_crossing": a.stop_at_crossing, "settings": settings}),
            )
        }
        System::Twoslit => {
            let params = twoslit_params(file, &a.slits, &a.consts)?;
            let r1 = a.r1.ok_or_else(|| Failure::invalid("--r1 is required for the two-slit system"))?;
            let r2 = a.r2.unwrap_or([r1[0], -r1[1], r1[2]]);
            let start = Configuration::pair_3d(r1, r2, a.t0);
            if !params.domain_box().contains(r1) || !params.domain_box().contains(r2) {
                return Err(Failure::invalid("two-slit start lies outside the domain box"));
            }
            slit_distances(&start, &params)?;
            let mut events = vec![EventSpec::box_exit()];
            if let Some(th) = a.mirror_threshold {
                events.push(EventSpec::new(pilotwave::EventKind::MirrorResidualThreshold, th, true));
            }
            let traj = integrate_trajectory(&start, &TwoSlitField::new(params.clone()), (a.t0, a.t1), &settings, &events)?;
            (
                traj,
                json!({"system": "twoslit", "params": params, "start": start, "t1": a.t1,
                       "mirror_threshold": a.mirror_threshold, "settings": settings}),
            )
        }
    };
    let summary = format!(
        "{} samples, {} event(s), termination {:?}",
        traj.samples.len(),
        traj.events.len(),
        traj.termination
    );
    let body = trajectory_csv(&traj);
    traj.into_result()?;
    let mut out = Output::new(body, params);
    out.summary = summary;
    Ok(out)
}

fn sampler(iid: bool) -> SamplerOptions {
    SamplerOptions {
        scheme: if iid { SamplingScheme::Iid } else { SamplingScheme::Stratified },
        center_interval: None,
    }
}

fn ensemble(a: &EnsembleArgs, file: &ConfigFile) -> CmdResult<Output> {
    let params = plane_params(file, &a.plane, &a.consts)?;
    let settings = a.integrator.settings();
    settings.validate()?;
    if a.n == 0 {
        return Err(Failure::invalid("--n must be at least 1"));
    }
    if a.bins < 8 {
        return Err(Failure::invalid("--bins must be at least 8"));
    }
    let seed = seed_of(a.seed, file);
    let opts = sampler(a.iid);
    let ens = sample_initial_with(&params, a.n, seed, &opts);
    let evolved = evolve_ensemble(&ens, &PlaneField::periodic(params), a.t1, &settings)?;
    let cmp = compare_distribution(&evolved.ensemble, &PlaneDensity::new(params), a.bins)?;
    let mut out = Output::new(
        ensemble_csv(&evolved.ensemble),
        json!({"params": params, "n": a.n, "t1": a.t1, "sampler": opts, "settings": settings, "bins": a.bins}),
    );
    out.seed = Some(seed);
    out.summary = format!(
        "{} members at t = {}, {} failed; L1 = {:.4e}, KS = {:.4e}",
        evolved.ensemble.len(),
        a.t1,
        evolved.failures.len(),
        cmp.l1_distance,
        cmp.ks_statistic
    );
    Ok(out)
}

fn roots(a: &RootsArgs, file: &ConfigFile) -> CmdResult<Output> {
    let params = plane_params(file, &a.plane, &a.consts)?;
    let cfg = json!({"params": params, "t": a.t, "t0": a.t0, "form": format!("{:?}", a.form),
                     "samples_per_period": a.samples_per_period});
    let (body, summary) = match a.form {
        FormArg::Both => {
            let v = uniqueness_report(&params, a.t0)?;
            let s = v.verdict.clone();
            (to_json(&v)?, s)
        }
        FormArg::Literal | FormArg::Derived => {
            let form = if a.form == FormArg::Literal {
                FirstIntegralForm::Literal
            } else {
                FirstIntegralForm::DerivedQuadrature
            };
            let r = count_roots_with(form, a.t, a.t0, &params, a.samples_per_period)?;
            let s = format!("{} root(s), 4ab = {}", r.root_count(), r.threshold_value);
            (to_json(&r)?, s)
        }
    };
    let mut out = Output::new(body, cfg);
    out.summary = summary;
    Ok(out)
}

fn crossing_times(a: &CrossingArgs, file: &ConfigFile) -> CmdResult<Output> {
    let params = plane_params(file, &a.plane, &a.consts)?;
    let settings = a.integrator.settings();
    settings.validate()?;
    let deltas = match (a.deltas.is_empty(), a.from, a.to) {
        (false, None, None) => a.deltas.clone(),
        (true, Some(from), Some(to)) => {
            if a.count < 2 {
                return Err(Failure::invalid("--count must be at least 2"));
            }
            (0..a.count)
                .map(|i| from + (to - from) * i as f64 / (a.count - 1) as f64)
                .collect()
        }
        _ => return Err(Failure::invalid("give either --deltas or both --from and --to")),
    };
    for &d in &deltas {
        prob_density_plane(d, &params)?;
    }
    let map = crossing_time_map(&deltas, &params, &settings)?;
    let mut out = Output::new(
        crossing_map_csv(&map),
        json!({"params": params, "deltas": deltas, "settings": settings}),
    );
    out.summary = format!(
        "{} crossing times; monotone = {}, coincidence = {}, min gap = {:e}",
        map.entries.len(),
        map.monotone,
        map.coincidence,
        map.min_gap
    );
    Ok(out)
}

#[derive(Debug, Serialize)]
struct GradCheckReport {
    system: &'static str,
    points: usize,
    evaluated: usize,
    stencil_failures: usize,
    max_relative_error: f64,
    mean_relative_error: f64,
    tolerance: f64,
    pass: bool,
    worst: Option<Configuration>,
}

fn member_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn uniform_in(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn grad_check(a: &GradCheckArgs, file: &ConfigFile) -> CmdResult<Output> {
    if a.points == 0 || a.step.is_nan() || a.step <= 0.0 || a.tolerance.is_nan() || a.tolerance <= 0.0 {
        return Err(Failure::invalid("--points, --step and --tolerance must be positive"));
    }
    let seed = seed_of(a.seed, file);
    let (system, params, errors): (_, _, Vec<Result<(f64, Configuration), EvalError>>) = match a.system {
        System::Plane => {
            let p = plane_params(file, &a.plane, &a.consts)?;
            let (lo, hi) = p.delta_bounds();
            let errs = (0..a.points)
                .into_par_iter()
                .map(|i| {
                    let mut rng = member_rng(seed, i);
                    let delta = uniform_in(&mut rng, [0.98 * lo, 0.98 * hi]);
                    let cfg = Configuration::from_relative(delta, uniform_in(&mut rng, [-5.0, 5.0]), uniform_in(&mut rng, [0.0, 5.0]));
                    let phase = |c: &Configuration| phase_plane(c, &p);
                    let num = numeric_velocity(&phase, &cfg, a.step, p.constants())?;
                    Ok((num.relative_error(&velocity_plane(delta, &p)?), cfg))
                })
                .collect();
            ("plane", json!(p), errs)
        }
        System::Twoslit => {
            let p = twoslit_params(file, &a.slits, &a.consts)?;
            let bx = p.domain_box();
            let errs = (0..a.points)
                .into_par_iter()
                .map(|i| {
                    let mut rng = member_rng(seed, i);
                    let cfg = loop {
                        let mut r = [[0.0; 3]; 2];
                        for ri in &mut r {
                            for (axis, c) in ri.iter_mut().enumerate() {
                                *c = uniform_in(&mut rng, bx.axis(axis));
                            }
                        }
                        let cfg = Configuration::pair_3d(r[0], r[1], 0.0);
                        let d = slit_distances(&cfg, &p);
                        if matches!(d, Ok(d) if d.r1a.min(d.r1b).min(d.r2a).min(d.r2b) > 10.0 * p.exclusion_radius()) {
                            break cfg;
                        }
                    };
                    let phase = |c: &Configuration| phase_twoslit(c, &p);
                    let num = numeric_velocity(&phase, &cfg, a.step, p.constants())?;
                    Ok((num.relative_error(&velocity_twoslit(&cfg, &p)?), cfg))
                })
                .collect();
            ("twoslit", json!(p), errs)
        }
    };

    let mut max_err: f64 = 0.0;
    let mut sum = 0.0;
    let mut evaluated = 0;
    let mut failures = 0;
    let mut worst = None;
    for e in errors {
        match e {
            Ok((err, cfg)) => {
                evaluated += 1;
                sum += err;
                if err >= max_err {
                    max_err = err;
                    worst = Some(cfg);
                }
            }
            Err(EvalError::StencilFailure { .. } | EvalError::NodeEncountered { .. }) => failures += 1,
            Err(e) => return Err(Failure::numerical(e.to_string())),
        }
    }
    let report = GradCheckReport {
        system,
        points: a.points,
        evaluated,
        stencil_failures: failures,
        max_relative_error: max_err,
        mean_relative_error: if evaluated > 0 { sum / evaluated as f64 } else { f64::NAN },
        tolerance: a.tolerance,
        pass: evaluated > 0 && max_err < a.tolerance,
        worst,
    };
    let mut out = Output::new(
        to_json(&report)?,
        json!({"system": system, "params": params, "points": a.points, "step": a.step, "tolerance": a.tolerance}),
    );
    out.seed = Some(seed);
    out.summary = format!(
        "{evaluated}/{} points evaluated, max relative error {:e}",
        a.points, report.max_relative_error
    );
    if !report.pass {
        out.verdict = Some(Failure::numerical(format!(
            "velocity check failed: max relative error {:e} ≥ {:e}",
            report.max_relative_error, a.tolerance
        )));
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct MirrorRun {
    index: usize,
    start: Configuration,
    end_time: f64,
    termination: pilotwave::Termination,
    max_residual: f64,
}

#[derive(Debug, Serialize)]
struct MirrorReport {
    count: usize,
    t1: f64,
    tolerance: f64,
    reached_t1: usize,
    max_residual: f64,
    pass: bool,
    runs: Vec<MirrorRun>,
}

fn mirror_check(a: &MirrorCheckArgs, file: &ConfigFile) -> CmdResult<Output> {
    let params = twoslit_params(file, &a.slits, &a.consts)?;
    let settings = a.integrator.settings();
    settings.validate()?;
    if a.count == 0 {
        return Err(Failure::invalid("--count must be at least 1"));
    }
    let start_box = a.start_box.unwrap_or(DomainBox {
        x: [1.0, 3.0],
        y: [-2.0, 2.0],
        z: [-2.0, 2.0],
    });
    let bx = params.domain_box();
    if !bx.contains([start_box.x[0], start_box.y[0], start_box.z[0]])
        || !bx.contains([start_box.x[1], start_box.y[1], start_box.z[1]])
        || !bx.contains([start_box.x[0], -start_box.y[1], start_box.z[0]])
        || !bx.contains([start_box.x[1], -start_box.y[0], start_box.z[1]])
    {
        return Err(Failure::invalid("--start-box must lie inside the domain box, mirror image included"));
    }
    let seed = seed_of(a.seed, file);
    let field = TwoSlitField::new(params.clone());
    let runs = (0..a.count)
        .into_par_iter()
        .map(|index| -> CmdResult<MirrorRun> {
            let mut rng = member_rng(seed, index);
            let start = loop {
                let r1 = [0, 1, 2].map(|axis| uniform_in(&mut rng, start_box.axis(axis)));
                let cfg = Configuration::pair_3d(r1, [r1[0], -r1[1], r1[2]], 0.0);
                if velocity_twoslit(&cfg, &params).is_ok() {
                    break cfg;
                }
            };
            let traj = integrate_trajectory(&start, &field, (0.0, a.t1), &settings, &[EventSpec::box_exit()])?;
            let mut max_residual: f64 = 0.0;
            for s in &traj.samples {
                let (r1, r2) = mirror_residual(s, &params)?;
                max_residual = max_residual.max(r1).max(r2);
            }
            Ok(MirrorRun {
                index,
                start,
                end_time: traj.last().time(),
                termination: traj.termination,
                max_residual,
            })
        })
        .collect::<CmdResult<Vec<_>>>()?;

    let max_residual = runs.iter().map(|r| r.max_residual).fold(0.0, f64::max);
    let reached_t1 = runs.iter().filter(|r| r.termination == pilotwave::Termination::Completed).count();
    let report = MirrorReport {
        count: a.count,
        t1: a.t1,
        tolerance: a.tolerance,
        reached_t1,
        max_residual,
        pass: max_residual < a.tolerance,
        runs,
    };
    let mut out = Output::new(
        to_json(&report)?,
        json!({"params": params, "count": a.count, "t1": a.t1, "start_box": start_box, "settings": settings}),
    );
    out.seed = Some(seed);
    out.summary = format!(
        "{}/{} runs reached t1; max mirror residual {:e}",
        reached_t1, a.count, max_residual
    );
    if !report.pass {
        out.verdict = Some(Failure::numerical(format!(
            "mirror residual {max_residual:e} exceeds {:e}",
            a.tolerance
        )));
    }
    Ok(out)
}

fn qeh(a: &QehArgs, file: &ConfigFile) -> CmdResult<Output> {
    let params = plane_params(file, &a.plane, &a.consts)?;
    let settings = a.integrator.settings();
    settings.validate()?;
    if a.n == 0 {
        return Err(Failure::invalid("--n must be at least 1"));
    }
    if a.bins < 8 {
        return Err(Failure::invalid("--bins must be at least 8"));
    }
    let seed = seed_of(a.seed, file);
    let opts = QehOptions {
        bins: a.bins,
        sampler: sampler(a.iid),
        settings,
    };
    let report = qeh_report_with(&params, a.n, a.t1, seed, &opts)?;
    let mut out = Output::new(
        to_json(&report)?,
        json!({"params": params, "n": a.n, "t1": a.t1, "options": opts}),
    );
    out.seed = Some(seed);
    out.summary = format!(
        "L1 initial {:.4e}, final {:.4e}; {} failed; crossing-time coincidence = {}",
        report.initial.l1_distance, report.final_.l1_distance, report.failed_members, report.crossing_times.coincidence
    );
    Ok(out)
}

/// Replaces the value of `--flag` (either `--flag v` or `--flag=v`) or
/// appends it.
fn set_flag(argv: &mut Vec<String>, flag: &str, value: &Path) {
    let value = value.display().to_string();
    let prefix = format!("{flag}=");
    if let Some(i) = argv.iter().position(|a| a == flag) {
        if i + 1 < argv.len() {
            argv[i + 1] = value;
            return;
        }
    }
    if let Some(i) = argv.iter().position(|a| a.starts_with(&prefix)) {
        argv[i] = format!("{prefix}{value}");
        return;
    }
    argv.push(flag.to_string());
    argv.push(value);
}

fn replay(r: &ReplayArgs) -> CmdResult<()> {
    let manifest: RunManifest = serde_json::from_str(&fs::read_to_string(&r.source)?)?;
    let mut argv = vec!["pilotwave".to_string()];
    argv.extend(manifest.argv.iter().cloned());
    if !r.verify {
        return run(&argv);
    }
    let recorded = manifest
        .outputs
        .first()
        .ok_or_else(|| Failure::invalid("manifest lists no output file to verify"))?;
    let scratch: PathBuf = std::env::temp_dir().join(format!("pilotwave-replay-{}", std::process::id()));
    fs::create_dir_all(&scratch)?;
    let fresh = scratch.join("output");
    set_flag(&mut argv, "--out", &fresh);
    set_flag(&mut argv, "--manifest", &scratch.join("manifest.json"));
    let result = run(&argv).and_then(|()| {
        let same = fs::read(recorded)? == fs::read(&fresh)?;
        if same {
            eprintln!("replay matches {}", recorded.display());
            Ok(())
        } else {
            Err(Failure::numerical(format!("replay output differs from {}", recorded.display())))
        }
    });
    let _ = fs::remove_dir_all(&scratch);
    result
}
