//! Small numerical kernels used across the crate: adaptive Gauss–Kronrod
//! quadrature (scalar and vector-valued), Gauss–Legendre rules, Chebyshev
//! interpolation and bracketed bisection.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

// Kronrod 15-point abscissae on [0, 1); odd indices are the embedded 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature<const M: usize> {
    pub value: [f64; M],
    pub error: f64,
    pub converged: bool,
    pub evaluations: usize,
}

impl Quadrature<1> {
    pub fn scalar(&self) -> f64 {
        self.value[0]
    }
}

fn gk15<const M: usize, F>(f: &mut F, a: f64, b: f64) -> ([f64; M], f64)
where
    F: FnMut(f64) -> [f64; M],
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = [0.0; M];
    let mut gauss = [0.0; M];
    for m in 0..M {
        kron[m] = WGK[7] * fc[m];
        gauss[m] = WG[3] * fc[m];
    }
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        for m in 0..M {
            let s = f1[m] + f2[m];
            kron[m] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[m] += WG[j / 2] * s;
            }
        }
    }
    let mut err: f64 = 0.0;
    for m in 0..M {
        kron[m] *= h;
        gauss[m] *= h;
        err = err.max((kron[m] - gauss[m]).abs());
    }
    (kron, err)
}

struct Segment<const M: usize> {
    a: f64,
    b: f64,
    value: [f64; M],
    error: f64,
}

impl<const M: usize> PartialEq for Segment<M> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<const M: usize> Eq for Segment<M> {}
impl<const M: usize> PartialOrd for Segment<M> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const M: usize> Ord for Segment<M> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive G7/K15 integration of a vector-valued integrand over
/// `[a, b]`, bisecting the segment with the largest error until the summed
/// error is below `max(abs_tol, rel_tol·max|value|)`.
pub fn integrate_vec<const M: usize, F>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> Quadrature<M>
where
    F: FnMut(f64) -> [f64; M],
{
    if a == b {
        return Quadrature {
            value: [0.0; M],
            error: 0.0,
            converged: true,
            evaluations: 0,
        };
    }
    let mut heap = BinaryHeap::new();
    let (v, e) = gk15(&mut f, a, b);
    heap.push(Segment {
        a,
        b,
        value: v,
        error: e,
    });
    let mut evaluations = 15;
    loop {
        let mut total = [0.0; M];
        let mut err = 0.0;
        for s in heap.iter() {
            for (t, v) in total.iter_mut().zip(&s.value) {
                *t += v;
            }
            err += s.error;
        }
        let scale = total.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let converged = err <= abs_tol.max(rel_tol * scale);
        if converged || heap.len() >= max_segments || !err.is_finite() {
            return Quadrature {
                value: total,
                error: err,
                converged: converged && err.is_finite(),
                evaluations,
            };
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval can no longer be split in floating point.
            heap.push(Segment {
                error: 0.0,
                ..worst
            });
            continue;
        }
        for (lo, hi) in [(worst.a, mid), (mid, worst.b)] {
            let (v, e) = gk15(&mut f, lo, hi);
            heap.push(Segment {
                a: lo,
                b: hi,
                value: v,
                error: e,
            });
        }
        evaluations += 30;
    }
}

pub fn integrate<F>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> Quadrature<1>
where
    F: FnMut(f64) -> f64,
{
    integrate_vec(|x| [f(x)], a, b, abs_tol, rel_tol, max_segments)
}

/// Integrates over consecutive breakpoints, summing results.
pub fn integrate_vec_pieces<const M: usize, F>(
    mut f: F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> Quadrature<M>
where
    F: FnMut(f64) -> [f64; M],
{
    let mut out = Quadrature {
        value: [0.0; M],
        error: 0.0,
        converged: true,
        evaluations: 0,
    };
    let pieces = breaks.len().saturating_sub(1).max(1) as f64;
    for w in breaks.windows(2) {
        let q = integrate_vec(&mut f, w[0], w[1], abs_tol / pieces, rel_tol, max_segments);
        for m in 0..M {
            out.value[m] += q.value[m];
        }
        out.error += q.error;
        out.converged &= q.converged;
        out.evaluations += q.evaluations;
    }
    out
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Polynomial interpolant on Chebyshev points of the second kind, evaluated
/// with the barycentric formula.
#[derive(Debug, Clone)]
pub struct Chebyshev {
    lo: f64,
    hi: f64,
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl Chebyshev {
    /// Fits `f` on `[lo, hi]` using `n + 1` nodes.
    pub fn fit<E, F>(mut f: F, lo: f64, hi: f64, n: usize) -> Result<Self, E>
    where
        F: FnMut(f64) -> Result<f64, E>,
    {
        assert!(n >= 1 && hi > lo);
        let mut nodes = Vec::with_capacity(n + 1);
        let mut values = Vec::with_capacity(n + 1);
        for j in 0..=n {
            // Ascending order: x_j = -cos(jπ/n).
            let t = -(PI * j as f64 / n as f64).cos();
            let x = 0.5 * (lo + hi) + 0.5 * (hi - lo) * t;
            let x = if j == 0 {
                lo
            } else if j == n {
                hi
            } else {
                x
            };
            nodes.push(x);
            values.push(f(x)?);
        }
        Ok(Chebyshev {
            lo,
            hi,
            nodes,
            values,
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn node_values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.nodes.len() - 1;
        let mut num = 0.0;
        let mut den = 0.0;
        for (j, (&xj, &fj)) in self.nodes.iter().zip(&self.values).enumerate() {
            let d = x - xj;
            if d == 0.0 {
                return fj;
            }
            let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n {
                w *= 0.5;
            }
            let c = w / d;
            num += c * fj;
            den += c;
        }
        num / den
    }
}

/// Bisection on `[lo, hi]` where `f(lo)` and `f(hi)` have opposite signs
/// (or one of them is zero). Stops when the bracket is narrower than `tol`.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64
where
    F: FnMut(f64) -> f64,
{
    let mut flo = f(lo);
    if flo == 0.0 {
        return lo;
    }
    let fhi = f(hi);
    if fhi == 0.0 {
        return hi;
    }
    debug_assert!(flo.signum() != fhi.signum(), "root not bracketed");
    for _ in 0..200 {
        if (hi - lo).abs() <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
