//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]
// quadrature constants are kept at their published precision
#![allow(clippy::excessive_precision)]

use mwion_core::banded::BandedMatrix;
use num_complex::Complex64;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// 15-point Kronrod estimate, its difference from the embedded 7-point Gauss
/// rule, and the Kronrod estimate of the integral of `|f|`.
fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut abs = WGK[7] * fc.abs();
    for j in 0..7 {
        let dx = h * XGK[j];
        let (lo, hi) = (f(c - dx), f(c + dx));
        let s = lo + hi;
        kron += WGK[j] * s;
        abs += WGK[j] * (lo.abs() + hi.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs(), abs * h.abs())
}

/// Adaptive Gauss–Kronrod quadrature on `[a, b]` to absolute tolerance `tol`.
/// Intervals whose error estimate is already at the rounding level of
/// `∫|f|` are accepted, since bisecting them cannot improve the result.
pub fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err, abs) = gk15(f, a, b);
        if err <= tol.max(1e3 * f64::EPSILON * abs) || depth == 0 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth - 1) + rec(f, m, b, 0.5 * tol, depth - 1)
    }
    rec(f, a, b, tol, 20)
}

/// Adaptive quadrature on `[0, end]` split into `panels` equal pieces first.
pub fn adaptive_panels(f: &dyn Fn(f64) -> f64, end: f64, panels: usize, tol: f64) -> f64 {
    let h = end / panels as f64;
    (0..panels).map(|i| adaptive(f, i as f64 * h, (i + 1) as f64 * h, tol / panels as f64)).sum()
}

/// `e^{-y/2} L^{(a)}_k(y)` by the three-term recurrence, with the exponential
/// carried in a separate log scale so neither factor overflows.
pub fn damped_laguerre(a: f64, k: usize, y: f64) -> f64 {
    let mut log_scale = -0.5 * y;
    let mut prev = 1.0;
    if k == 0 {
        return prev * log_scale.exp();
    }
    let mut cur = 1.0 + a - y;
    for j in 1..k {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + a - y) * cur - (jf + a) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
        if cur.abs() > 1e150 {
            prev *= 1e-150;
            cur *= 1e-150;
            log_scale += 150.0 * std::f64::consts::LN_10;
        }
    }
    cur * log_scale.exp()
}

/// `φ_n(x) = n^{-1/2} (2x/α) e^{-x/α} L^{(1)}_{n-1}(2x/α)`.
pub fn phi(n: usize, alpha: f64, x: f64) -> f64 {
    let y = 2.0 * x / alpha;
    y * damped_laguerre(1.0, n - 1, y) / (n as f64).sqrt()
}

/// `dφ_n/dx`, using `d/dy L^{(1)}_k = −L^{(2)}_{k−1}`.
pub fn dphi(n: usize, alpha: f64, x: f64) -> f64 {
    let y = 2.0 * x / alpha;
    let l = damped_laguerre(1.0, n - 1, y);
    let dl = if n >= 2 { -damped_laguerre(2.0, n - 2, y) } else { 0.0 };
    (2.0 / alpha) * (l + y * dl - 0.5 * y * l) / (n as f64).sqrt()
}

/// Upper integration limit beyond which `φ_n` with `n ≤ nmax` is negligible.
pub fn support_end(nmax: usize, alpha: f64) -> f64 {
    0.5 * alpha * (5.0 * nmax as f64 + 100.0)
}

pub fn to_dense(m: &BandedMatrix<Complex64>) -> Vec<Vec<Complex64>> {
    (0..m.dim()).map(|i| (0..m.dim()).map(|j| m.get(i, j)).collect()).collect()
}

pub fn bilinear(u: &[Complex64], b: &BandedMatrix<Complex64>, v: &[Complex64]) -> Complex64 {
    u.iter().zip(b.matvec(v)).map(|(x, y)| x * y).sum()
}

/// Kendall rank correlation (tau-a).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += ((x[j] - x[i]) * (y[j] - y[i])).signum();
        }
    }
    s / (n * (n - 1) / 2) as f64
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}
