//! Browser bindings: three small experiments returning JSON for the static
//! page in `www/`.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use pilotwave::constraints::{count_roots, first_integral_literal, DerivedIntegral, FirstIntegralForm};
use pilotwave::dynamics::Recording;
use pilotwave::{
    integrate_trajectory, prob_density_plane, relative_velocity_plane, validate_plane_params,
    validate_twoslit_params, Configuration, DomainBox, EventSpec, IntegratorSettings, PlanePairConfig,
    PlanePairParams, TwoSlitConfig, TwoSlitField,
};

fn fail(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn to_js<T: Serialize>(v: &T) -> Result<String, JsValue> {
    serde_json::to_string(v).map_err(fail)
}

fn plane(a: f64, b: f64, p: f64, box_n: i64) -> Result<PlanePairParams, JsValue> {
    // Sliders produce amplitudes with rounding error, so normalize here.
    let s = (a * a + b * b).sqrt();
    validate_plane_params(&PlanePairConfig::new(a / s, b / s, p, box_n)).map_err(fail)
}

fn grid(params: &PlanePairParams, samples: usize) -> Vec<f64> {
    let (lo, hi) = params.delta_bounds();
    let n = samples.max(2);
    // Open interval: the box edges themselves are excluded.
    (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect()
}

#[derive(Serialize)]
struct PlaneCurves {
    a: f64,
    b: f64,
    delta: Vec<f64>,
    density: Vec<f64>,
    relative_velocity: Vec<f64>,
    flux: f64,
}

/// `|ψ|²(Δ)` and `v_Δ(Δ)` across the box; their product is constant.
#[wasm_bindgen]
pub fn plane_curves(a: f64, b: f64, p: f64, box_n: i64, samples: usize) -> Result<String, JsValue> {
    let params = plane(a, b, p, box_n)?;
    let delta = grid(&params, samples);
    let density = delta
        .iter()
        .map(|&d| prob_density_plane(d, &params))
        .collect::<Result<Vec<_>, _>>()
        .map_err(fail)?;
    let relative_velocity = delta
        .iter()
        .map(|&d| relative_velocity_plane(d, &params))
        .collect::<Result<Vec<_>, _>>()
        .map_err(fail)?;
    let flux = density[0] * relative_velocity[0];
    to_js(&PlaneCurves {
        a: params.a(),
        b: params.b(),
        delta,
        density,
        relative_velocity,
        flux,
    })
}

#[derive(Serialize)]
struct RootScan {
    four_ab: f64,
    delta: Vec<f64>,
    literal: Vec<f64>,
    derived: Vec<f64>,
    literal_roots: Vec<f64>,
    derived_roots: Vec<f64>,
}

/// `F(Δ) = I(Δ, t) − I(0, t0)` for both first-integral forms, plus their roots.
#[wasm_bindgen]
pub fn root_scan(a: f64, b: f64, t: f64, t0: f64, box_n: i64, samples: usize) -> Result<String, JsValue> {
    let params = plane(a, b, 1.0, box_n)?;
    let g = DerivedIntegral::new(&params).map_err(fail)?;
    let delta = grid(&params, samples);
    let p0 = first_integral_literal(0.0, t0, &params);
    let g0 = g.value(0.0, t0);
    let literal = delta.iter().map(|&d| first_integral_literal(d, t, &params) - p0).collect();
    let derived = delta.iter().map(|&d| g.value(d, t) - g0).collect();
    let literal_roots = count_roots(FirstIntegralForm::Literal, t, t0, &params).map_err(fail)?.roots;
    let derived_roots = count_roots(FirstIntegralForm::DerivedQuadrature, t, t0, &params)
        .map_err(fail)?
        .roots;
    to_js(&RootScan {
        four_ab: params.four_ab(),
        delta,
        literal,
        derived,
        literal_roots,
        derived_roots,
    })
}

#[derive(Serialize)]
struct Path2 {
    /// `(x, y)` of particle 1 and particle 2 per sample.
    p1: Vec<[f64; 2]>,
    p2: Vec<[f64; 2]>,
    max_residual: f64,
}

/// Mirror-symmetric two-slit trajectories started on a line `x = x0`,
/// `z = 0`, with particle 2 at `y → −y`.
#[wasm_bindgen]
pub fn mirror_trajectories(k: f64, slit_half_sep: f64, count: usize, x0: f64, t1: f64) -> Result<String, JsValue> {
    let params = validate_twoslit_params(&TwoSlitConfig::new(
        k,
        slit_half_sep,
        DomainBox {
            x: [0.0, 40.0],
            y: [-20.0, 20.0],
            z: [-20.0, 20.0],
        },
    ))
    .map_err(fail)?;
    let field = TwoSlitField::new(params.clone());
    let settings = IntegratorSettings {
        rel_tol: 1e-8,
        abs_tol: 1e-10,
        max_step: 0.05,
        recording: Recording::Steps,
        ..IntegratorSettings::default()
    };
    let n = count.clamp(1, 64);
    let mut paths = Vec::with_capacity(n);
    for i in 0..n {
        let y = -2.0 * slit_half_sep + 4.0 * slit_half_sep * (i as f64 + 0.5) / n as f64;
        let start = Configuration::pair_3d([x0, y, 0.0], [x0, -y, 0.0], 0.0);
        let traj = integrate_trajectory(&start, &field, (0.0, t1), &settings, &[EventSpec::box_exit()]).map_err(fail)?;
        let mut path = Path2 {
            p1: Vec::with_capacity(traj.samples.len()),
            p2: Vec::with_capacity(traj.samples.len()),
            max_residual: 0.0,
        };
        for s in &traj.samples {
            let c = s.coords();
            path.p1.push([c[0], c[1]]);
            path.p2.push([c[3], c[4]]);
            let (r1, r2) = pilotwave::mirror_residual(s, &params).map_err(fail)?;
            path.max_residual = path.max_residual.max(r1).max(r2);
        }
        paths.push(path);
    }
    to_js(&paths)
}
