//! Wave functions, densities and phases of the two entangled pairs.
//!
//! Phases are computed with the two-argument arctangent of `(Im ψ, Re ψ)`,
//! which is continuous away from nodes up to `2π` jumps. Velocities only ever
//! use phase differences or closed-form gradients, so the branch never
//! matters there.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::model::{Configuration, PlanePairParams, SystemKind, TwoSlitParams};
use crate::numerics::integrate_vec_pieces;

/// Relative size of `|N + iD|` below which a two-slit configuration counts as
/// a node.
pub const NODE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("expected a {expected:?} configuration, got {got:?}")]
    WrongKind {
        expected: SystemKind,
        got: SystemKind,
    },
    #[error("relative coordinate Δ = {delta} lies outside the normalization box")]
    OutOfBox { delta: f64 },
    #[error("particle {particle} is {distance:e} from slit {slit}, inside the exclusion radius")]
    SlitSingularity {
        particle: usize,
        slit: char,
        distance: f64,
    },
    #[error("wave function vanishes (|ψ|·scale = {modulus:e}); the phase is undefined")]
    NodeEncountered { modulus: f64 },
    #[error("finite-difference stencil failed: {reason}")]
    StencilFailure { reason: String },
    #[error("non-finite value encountered: {what}")]
    NonFinite { what: &'static str },
}

fn expect_kind(cfg: &Configuration, kind: SystemKind) -> Result<(), EvalError> {
    if cfg.kind() == kind {
        Ok(())
    } else {
        Err(EvalError::WrongKind {
            expected: kind,
            got: cfg.kind(),
        })
    }
}

pub(crate) fn check_delta(delta: f64, params: &PlanePairParams) -> Result<(), EvalError> {
    if params.contains_delta(delta) {
        Ok(())
    } else {
        Err(EvalError::OutOfBox { delta })
    }
}

fn plane_delta(cfg: &Configuration, params: &PlanePairParams) -> Result<f64, EvalError> {
    expect_kind(cfg, SystemKind::Pair1D)?;
    let delta = cfg.delta().expect("Pair1D has a relative coordinate");
    check_delta(delta, params)?;
    Ok(delta)
}

/// `ψ(x₁, x₂, t) = L^{-1/2}[a·e^{ipΔ/ħ} + b·e^{−ipΔ/ħ}]·e^{−iEt/ħ}`.
pub fn psi_plane(cfg: &Configuration, params: &PlanePairParams) -> Result<Complex64, EvalError> {
    let delta = plane_delta(cfg, params)?;
    let theta = params.angle(delta);
    let spatial = Complex64::from_polar(params.a(), theta) + Complex64::from_polar(params.b(), -theta);
    let temporal = Complex64::from_polar(1.0, -params.energy() * cfg.time() / params.hbar());
    Ok(spatial * temporal / params.box_length().sqrt())
}

/// Stationary density `(1/L)[1 + 2ab·cos(2pΔ/ħ)]`.
pub fn prob_density_plane(delta: f64, params: &PlanePairParams) -> Result<f64, EvalError> {
    check_delta(delta, params)?;
    Ok(density_plane_unchecked(delta, params))
}

pub(crate) fn density_plane_unchecked(delta: f64, params: &PlanePairParams) -> f64 {
    let theta = params.angle(delta);
    (1.0 + 2.0 * params.a() * params.b() * (2.0 * theta).cos()) / params.box_length()
}

/// Phase `S` of the plane pair: `ħ·atan2((a−b)·sin θ, (a+b)·cos θ) − E·t`
/// with `θ = pΔ/ħ`. Agrees with `ħ·arctan[((a−b)/(a+b))·tan θ] − E·t` for
/// `|θ| ≤ π/2`, including the limit `±ħπ/2` at `|θ| = π/2`.
pub fn phase_plane(cfg: &Configuration, params: &PlanePairParams) -> Result<f64, EvalError> {
    let delta = plane_delta(cfg, params)?;
    let theta = params.angle(delta);
    let im = (params.a() - params.b()) * theta.sin();
    let re = (params.a() + params.b()) * theta.cos();
    Ok(params.hbar() * im.atan2(re) - params.energy() * cfg.time())
}

/// Distances `r_{ij}` from particle `i` to slit `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlitDistances {
    pub r1a: f64,
    pub r1b: f64,
    pub r2a: f64,
    pub r2b: f64,
}

fn dist(r: [f64; 3], s: [f64; 3]) -> f64 {
    let dx = r[0] - s[0];
    let dy = r[1] - s[1];
    let dz = r[2] - s[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

pub(crate) fn raw_distances(coords: &[f64], params: &TwoSlitParams) -> SlitDistances {
    let r1 = [coords[0], coords[1], coords[2]];
    let r2 = [coords[3], coords[4], coords[5]];
    SlitDistances {
        r1a: dist(r1, params.slit_a()),
        r1b: dist(r1, params.slit_b()),
        r2a: dist(r2, params.slit_a()),
        r2b: dist(r2, params.slit_b()),
    }
}

pub(crate) fn check_distances(d: &SlitDistances, params: &TwoSlitParams) -> Result<(), EvalError> {
    let eps = params.exclusion_radius();
    for (particle, slit, distance) in [
        (1, 'A', d.r1a),
        (1, 'B', d.r1b),
        (2, 'A', d.r2a),
        (2, 'B', d.r2b),
    ] {
        if distance.is_nan() {
            return Err(EvalError::NonFinite { what: "slit distance" });
        }
        if distance < eps {
            return Err(EvalError::SlitSingularity {
                particle,
                slit,
                distance,
            });
        }
    }
    Ok(())
}

pub fn slit_distances(cfg: &Configuration, params: &TwoSlitParams) -> Result<SlitDistances, EvalError> {
    expect_kind(cfg, SystemKind::Pair3D)?;
    let d = raw_distances(cfg.coords(), params);
    check_distances(&d, params)?;
    Ok(d)
}

/// Unnormalized phase components `(N, D)` such that the two-slit phase is
/// `ħ·atan2(N, D)`:
/// `N = r1B·r2A·sin k(r1A+r2B) + r1A·r2B·sin k(r1B+r2A)`,
/// `D = r1B·r2A·cos k(r1A+r2B) + r1A·r2B·cos k(r1B+r2A)`.
pub fn phase_components(d: &SlitDistances, k: f64) -> (f64, f64) {
    let p = d.r1b * d.r2a;
    let q = d.r1a * d.r2b;
    let alpha = k * (d.r1a + d.r2b);
    let beta = k * (d.r1b + d.r2a);
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    (p * sa + q * sb, p * ca + q * cb)
}

pub(crate) fn node_check(d: &SlitDistances, n: f64, dd: f64) -> Result<(), EvalError> {
    let scale = d.r1b * d.r2a + d.r1a * d.r2b;
    let modulus = n.hypot(dd) / scale;
    if !modulus.is_finite() {
        return Err(EvalError::NonFinite { what: "phase components" });
    }
    if modulus < NODE_TOL {
        return Err(EvalError::NodeEncountered { modulus });
    }
    Ok(())
}

/// Normalization constant `N` with `∫∫|ψ|² = 1` over `domainBox ⊗ domainBox`.
///
/// `|N·ψ|²` splits into products of single-particle integrals,
/// `N² = 2·J_A·J_B + 2·|C|²` with `J_s = ∫ d³r / r_s²` and
/// `C = ∫ d³r e^{ik(r_A − r_B)} / (r_A·r_B)`, each evaluated by nested
/// adaptive Gauss–Kronrod quadrature. Computed once per parameter set.
pub fn twoslit_normalization(params: &TwoSlitParams) -> f64 {
    *params.norm_cell().get_or_init(|| {
        let [j_a, j_b, c_re, c_im] = single_particle_integrals(params);
        (2.0 * j_a * j_b + 2.0 * (c_re * c_re + c_im * c_im)).sqrt()
    })
}

fn breakpoints(lo: f64, hi: f64, interior: &[f64]) -> Vec<f64> {
    let mut v = vec![lo];
    for &x in interior {
        if x > lo && x < hi {
            v.push(x);
        }
    }
    v.push(hi);
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

pub(crate) fn single_particle_integrals(params: &TwoSlitParams) -> [f64; 4] {
    let bx = params.domain_box();
    let a = params.slit_half_sep();
    let k = params.k();
    let xb = breakpoints(bx.x[0], bx.x[1], &[]);
    let yb = breakpoints(bx.y[0], bx.y[1], &[-a, a]);
    let zb = breakpoints(bx.z[0], bx.z[1], &[0.0]);
    let integrand = |x: f64, y: f64, z: f64| -> [f64; 4] {
        let ra2 = x * x + (y - a) * (y - a) + z * z;
        let rb2 = x * x + (y + a) * (y + a) + z * z;
        if ra2 == 0.0 || rb2 == 0.0 {
            return [0.0; 4];
        }
        let ra = ra2.sqrt();
        let rb = rb2.sqrt();
        let (s, c) = (k * (ra - rb)).sin_cos();
        let inv = 1.0 / (ra * rb);
        [1.0 / ra2, 1.0 / rb2, c * inv, s * inv]
    };
    let q = integrate_vec_pieces(
        |x| {
            integrate_vec_pieces(
                |y| integrate_vec_pieces(|z| integrand(x, y, z), &zb, 1e-13, 1e-9, 400).value,
                &yb,
                1e-12,
                1e-8,
                400,
            )
            .value
        },
        &xb,
        1e-11,
        1e-7,
        400,
    );
    q.value
}

/// `ψ = (1/N)[e^{ik(r1A+r2B)}/(r1A·r2B) + e^{ik(r1B+r2A)}/(r1B·r2A)]` at `t = 0`.
pub fn psi_twoslit(cfg: &Configuration, params: &TwoSlitParams) -> Result<Complex64, EvalError> {
    let d = slit_distances(cfg, params)?;
    Ok(unnormalized_twoslit(&d, params.k()) / twoslit_normalization(params))
}

pub(crate) fn unnormalized_twoslit(d: &SlitDistances, k: f64) -> Complex64 {
    Complex64::from_polar(1.0 / (d.r1a * d.r2b), k * (d.r1a + d.r2b))
        + Complex64::from_polar(1.0 / (d.r1b * d.r2a), k * (d.r1b + d.r2a))
}

/// Closed-form `|ψ|²` of the two-slit pair (the expanded square modulus).
pub fn density_twoslit(cfg: &Configuration, params: &TwoSlitParams) -> Result<f64, EvalError> {
    let d = slit_distances(cfg, params)?;
    let q = d.r1a * d.r2b;
    let p = d.r1b * d.r2a;
    let cross = 2.0 * (params.k() * (d.r1a + d.r2b - d.r1b - d.r2a)).cos() / (p * q);
    let n = twoslit_normalization(params);
    Ok((1.0 / (q * q) + 1.0 / (p * p) + cross) / (n * n))
}

/// Phase `ħ·atan2(N, D)` of the two-slit pair.
pub fn phase_twoslit(cfg: &Configuration, params: &TwoSlitParams) -> Result<f64, EvalError> {
    let d = slit_distances(cfg, params)?;
    let (n, dd) = phase_components(&d, params.k());
    node_check(&d, n, dd)?;
    Ok(params.hbar() * n.atan2(dd))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_plane_params, validate_twoslit_params, DomainBox, PlanePairConfig, TwoSlitConfig};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn plane() -> PlanePairParams {
        validate_plane_params(&PlanePairConfig::new(0.8, 0.6, 1.0, 10)).unwrap()
    }

    fn slits(bx: DomainBox) -> TwoSlitParams {
        validate_twoslit_params(&TwoSlitConfig::new(5.0, 1.0, bx)).unwrap()
    }

    fn small_box() -> DomainBox {
        DomainBox {
            x: [0.0, 2.0],
            y: [-2.0, 2.0],
            z: [-1.0, 1.0],
        }
    }

    #[test]
    fn psi_plane_examples() {
        let p = plane();
        let sl = p.box_length().sqrt();
        let z = psi_plane(&Configuration::pair_1d(0.0, 0.0, 0.0), &p).unwrap();
        assert!((z.re - 1.4 / sl).abs() < 1e-15 && z.im.abs() < 1e-15);
        let z = psi_plane(&Configuration::from_relative(FRAC_PI_2, 0.0, 0.0), &p).unwrap();
        assert!(z.re.abs() < 1e-15);
        assert!((z.im - 0.2 / sl).abs() < 1e-15);
        let out = Configuration::from_relative(p.box_length(), 0.0, 0.0);
        assert!(matches!(psi_plane(&out, &p), Err(EvalError::OutOfBox { .. })));
        let c3 = Configuration::pair_3d([1.0; 3], [1.0; 3], 0.0);
        assert!(matches!(psi_plane(&c3, &p), Err(EvalError::WrongKind { .. })));
    }

    #[test]
    fn density_plane_examples() {
        let p = plane();
        let l = p.box_length();
        assert!((prob_density_plane(0.0, &p).unwrap() - 1.96 / l).abs() < 1e-15);
        assert!((prob_density_plane(FRAC_PI_2, &p).unwrap() - 0.04 / l).abs() < 1e-15);
    }

    #[test]
    fn phase_plane_examples() {
        let p = plane();
        let s0 = phase_plane(&Configuration::pair_1d(0.0, 0.0, 0.0), &p).unwrap();
        assert_eq!(s0, 0.0);
        let s = phase_plane(&Configuration::from_relative(FRAC_PI_4, 0.0, 0.0), &p).unwrap();
        assert!((s - (1.0_f64 / 7.0).atan()).abs() < 1e-15);
        // Limit at the tan singularity.
        let s = phase_plane(&Configuration::from_relative(FRAC_PI_2, 0.0, 0.0), &p).unwrap();
        assert!((s - FRAC_PI_2).abs() < 1e-15);
        let s = phase_plane(&Configuration::from_relative(-FRAC_PI_2, 0.0, 0.0), &p).unwrap();
        assert!((s + FRAC_PI_2).abs() < 1e-15);
        // −E·t term.
        let c = Configuration::from_relative(0.3, 0.0, 2.0);
        let dt = 0.125;
        let s1 = phase_plane(&c, &p).unwrap();
        let s2 = phase_plane(&c.with_time(2.0 + dt), &p).unwrap();
        assert!((s1 - s2 - p.energy() * dt).abs() < 1e-14);
    }

    #[test]
    fn slit_distance_examples() {
        let ps = slits(small_box());
        let on_slit = Configuration::pair_3d([0.0, 1.0, 0.0], [1.0, 0.0, 0.0], 0.0);
        assert!(matches!(
            slit_distances(&on_slit, &ps),
            Err(EvalError::SlitSingularity { particle: 1, slit: 'A', .. })
        ));
        let c = Configuration::pair_3d([1.0, 1.0, 0.0], [1.0, 0.5, 0.3], 0.0);
        let d = slit_distances(&c, &ps).unwrap();
        assert_eq!(d.r1a, 1.0);
        assert!((d.r1b - 5.0_f64.sqrt()).abs() < 1e-15);
        let m = Configuration::pair_3d([1.3, 0.7, -0.2], [1.3, -0.7, -0.2], 0.0);
        let d = slit_distances(&m, &ps).unwrap();
        assert_eq!(d.r1a, d.r2b);
        assert_eq!(d.r1b, d.r2a);
    }

    #[test]
    fn twoslit_phase_on_mirror_and_zero_cases() {
        let ps = slits(small_box());
        let m = Configuration::pair_3d([1.3, 0.7, -0.2], [1.3, -0.7, -0.2], 0.0);
        let d = slit_distances(&m, &ps).unwrap();
        let s = phase_twoslit(&m, &ps).unwrap();
        let k = ps.k();
        let psi = Complex64::from_polar(1.0 / (d.r1a * d.r2b), k * (d.r1a + d.r2b))
            + Complex64::from_polar(1.0 / (d.r1b * d.r2a), k * (d.r1b + d.r2a));
        let expected = psi.arg();
        let diff = (s - expected).rem_euclid(2.0 * PI);
        assert!(diff < 1e-12 || (2.0 * PI - diff) < 1e-12);

        // Particle 1 on the x axis at distance ρ with k·2ρ ≡ 0 (mod 2π), particle 2 mirrored:
        // every distance equals ρ, so N = 0 and D > 0.
        let rho2: f64 = (2.0 * PI / ps.k()).powi(2);
        let x = (rho2 - 1.0).sqrt();
        let c = Configuration::pair_3d([x, 0.0, 0.0], [x, 0.0, 0.0], 0.0);
        let s = phase_twoslit(&c, &ps).unwrap();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn node_is_rejected() {
        // Particle 2 sits where r2A = μ·r1A and r2B = μ·r1B, so both terms have equal
        // modulus; μ is chosen so their phases differ by π.
        let ps = slits(small_box());
        let (x1, y1) = (1.0_f64, 0.5_f64);
        let s = (x1 * x1 + (y1 - 1.0).powi(2)).sqrt();
        let u = (x1 * x1 + (y1 + 1.0).powi(2)).sqrt();
        let mu = 1.0 - PI / (ps.k() * (s - u));
        let (ra, rb) = (mu * s, mu * u);
        let y2 = (rb * rb - ra * ra) / 4.0;
        let x2 = (ra * ra - (y2 - 1.0).powi(2)).sqrt();
        let c = Configuration::pair_3d([x1, y1, 0.0], [x2, y2, 0.0], 0.0);
        assert!(matches!(
            phase_twoslit(&c, &ps),
            Err(EvalError::NodeEncountered { .. })
        ));
    }

    #[test]
    fn factorized_normalization_matches_direct_six_dimensional_rule() {
        // Away from the slits the integrand is smooth, so a tensor Gauss–Legendre
        // rule over both particles is an independent check of the factorization.
        let bx = DomainBox {
            x: [1.0, 1.6],
            y: [-0.3, 0.4],
            z: [-0.25, 0.25],
        };
        let ps = slits(bx);
        let n = twoslit_normalization(&ps);
        let (gx, gw) = crate::numerics::gauss_legendre(7);
        let map = |i: usize, lo: f64, hi: f64| (0.5 * (lo + hi) + 0.5 * (hi - lo) * gx[i], 0.5 * (hi - lo) * gw[i]);
        let mut pts = Vec::new();
        for i in 0..7 {
            for j in 0..7 {
                for l in 0..7 {
                    let (x, wx) = map(i, bx.x[0], bx.x[1]);
                    let (y, wy) = map(j, bx.y[0], bx.y[1]);
                    let (z, wz) = map(l, bx.z[0], bx.z[1]);
                    pts.push(([x, y, z], wx * wy * wz));
                }
            }
        }
        let mut total = 0.0;
        for (r1, w1) in &pts {
            for (r2, w2) in &pts {
                let d = raw_distances(&[r1[0], r1[1], r1[2], r2[0], r2[1], r2[2]], &ps);
                total += w1 * w2 * unnormalized_twoslit(&d, ps.k()).norm_sqr();
            }
        }
        let direct = total.sqrt();
        assert!((n - direct).abs() / direct < 1e-6, "{n} vs {direct}");
    }

    #[test]
    fn singular_box_normalization_converges() {
        let ps = slits(small_box());
        let [j_a, j_b, _, _] = single_particle_integrals(&ps);
        // Symmetric box in y: J_A = J_B.
        assert!((j_a - j_b).abs() / j_a < 1e-6);
        let n = twoslit_normalization(&ps);
        assert!(n.is_finite() && n > 0.0);
    }
}
