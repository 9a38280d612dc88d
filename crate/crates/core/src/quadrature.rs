//! Gauss–Laguerre quadrature and scaled Laguerre recurrences.
//!
//! Values are carried as `e^{-y/2} L_k^{(a)}(y)` so that nodes far out on the
//! real axis (y ~ 4m for an m-point rule) neither overflow nor underflow.

/// `e^{-y/2} L_k^{(a)}(y)` for `k = 0..=kmax`, by the three-term recurrence
/// `(k+1) L_{k+1} = (2k+1+a-y) L_k - (k+a) L_{k-1}`.
pub fn scaled_laguerre(a: f64, kmax: usize, y: f64) -> Vec<f64> {
    const BIG: f64 = 1e150;
    let ln_big = BIG.ln();
    let mut out = Vec::with_capacity(kmax + 1);
    let mut log_scale = -0.5 * y;
    let mut prev = 0.0f64;
    let mut cur = 1.0f64;
    let emit = |v: f64, s: f64| -> f64 {
        if v == 0.0 {
            0.0
        } else {
            v.signum() * (v.abs().ln() + s).exp()
        }
    };
    out.push(emit(cur, log_scale));
    for k in 0..kmax {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + a - y) * cur - (kf + a) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
        if cur.abs() > BIG {
            cur /= BIG;
            prev /= BIG;
            log_scale += ln_big;
        }
        out.push(emit(cur, log_scale));
    }
    out
}

/// Ratio `L_m(y) / L_{m-1}(y)` (ordinary Laguerre), free of scaling issues.
fn laguerre_ratio(m: usize, y: f64) -> (f64, f64) {
    let mut prev = 0.0f64;
    let mut cur = 1.0f64;
    for k in 0..m {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - y) * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
        let s = cur.abs().max(prev.abs());
        if s > 1e100 {
            cur /= s;
            prev /= s;
        }
    }
    (cur, prev)
}

/// Eigenvalues of the symmetric tridiagonal matrix (`diag`, `off`), ascending.
/// Implicit QL with Wilkinson shifts.
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[..n.saturating_sub(1)]);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 200, "tridiagonal QL failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut early = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d
}

/// `m`-point Gauss–Laguerre rule for `∫_0^∞ e^{-y} p(y) dy`.
///
/// Weights are stored multiplied by `e^{y_i}`, so the rule is applied to
/// integrands that already contain the exponential:
/// `∫ g(y) dy ≈ Σ scaled_weights[i] * g(nodes[i])`.
#[derive(Debug, Clone)]
pub struct GaussLaguerre {
    pub nodes: Vec<f64>,
    pub scaled_weights: Vec<f64>,
}

impl GaussLaguerre {
    pub fn new(m: usize) -> Self {
        assert!(m >= 1);
        let diag: Vec<f64> = (0..m).map(|k| 2.0 * k as f64 + 1.0).collect();
        let off: Vec<f64> = (1..m).map(|k| k as f64).collect();
        let mut nodes = tridiagonal_eigenvalues(&diag, &off);
        let mf = m as f64;
        for y in nodes.iter_mut() {
            // Newton on L_m, using y L_m' = m (L_m - L_{m-1}).
            for _ in 0..4 {
                let (lm, lm1) = laguerre_ratio(m, *y);
                let denom = mf * (lm - lm1);
                if denom == 0.0 {
                    break;
                }
                let step = *y * lm / denom;
                *y -= step;
                if step.abs() <= 4.0 * f64::EPSILON * y.abs() {
                    break;
                }
            }
        }
        let scaled_weights = nodes
            .iter()
            .map(|&y| {
                let psi = scaled_laguerre(0.0, m - 1, y);
                1.0 / psi.iter().map(|v| v * v).sum::<f64>()
            })
            .collect();
        Self { nodes, scaled_weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `∫_0^∞ g(y) dy` for `g = e^{-y} * polynomial`.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.scaled_weights).map(|(&y, &w)| w * g(y)).sum()
    }
}
