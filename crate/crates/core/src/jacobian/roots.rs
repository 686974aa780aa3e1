use serde::{Deserialize, Serialize};

use super::{DelayPencil, JacobianError};
use crate::numerics::{eig_dense, ComplexMatrix, C64};

pub const DEFAULT_RE_MIN: f64 = -5.0;
pub const DEFAULT_DEGREE: usize = 40;

/// Characteristic roots in a right half-plane, sorted by decreasing real part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootSet {
    pub roots: Vec<C64>,
    /// Collocation candidates whose Newton refinement failed.
    pub dropped: usize,
}

impl RootSet {
    pub fn abscissa(&self) -> Option<f64> {
        self.roots.first().map(|z| z.re)
    }
}

/// Chebyshev points `cos(j pi / n)` mapped to `[-len, 0]`, with the scaled
/// differentiation matrix.
fn chebyshev(n: usize, len: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let x: Vec<f64> = (0..=n)
        .map(|j| (std::f64::consts::PI * j as f64 / n as f64).cos())
        .collect();
    let c = |j: usize| if j == 0 || j == n { 2.0 } else { 1.0 };
    let sign = |k: usize| if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut d = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..=n {
        let mut row_sum = 0.0;
        for j in 0..=n {
            if i != j {
                d[i][j] = c(i) / c(j) * sign(i + j) / (x[i] - x[j]);
                row_sum += d[i][j];
            }
        }
        d[i][i] = -row_sum;
    }
    let scale = 2.0 / len;
    for row in d.iter_mut() {
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    let theta = x.iter().map(|&xi| 0.5 * len * (xi - 1.0)).collect();
    (theta, d)
}

/// Barycentric Lagrange basis values at `t` for second-kind Chebyshev nodes.
fn lagrange_row(nodes: &[f64], t: f64) -> Vec<f64> {
    let n = nodes.len() - 1;
    let scale = (nodes[0] - nodes[n]).abs().max(1.0);
    if let Some(k) = nodes.iter().position(|&s| (s - t).abs() <= 1e-14 * scale) {
        let mut e = vec![0.0; n + 1];
        e[k] = 1.0;
        return e;
    }
    let w: Vec<f64> = (0..=n)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n {
                0.5 * s
            } else {
                s
            }
        })
        .collect();
    let terms: Vec<f64> = (0..=n).map(|j| w[j] / (t - nodes[j])).collect();
    let total: f64 = terms.iter().sum();
    terms.into_iter().map(|v| v / total).collect()
}

/// Collocation matrix of the infinitesimal generator of the solution
/// semigroup, size `2 (degree + 1)`.
pub fn collocation_matrix(pencil: &DelayPencil, degree: usize) -> ComplexMatrix {
    let len = pencil.max_delay();
    let (theta, d) = chebyshev(degree, len);
    let l1 = lagrange_row(&theta, -pencil.t1);
    let l2 = lagrange_row(&theta, -pencil.t2);
    let n = 2 * (degree + 1);
    let mut m = ComplexMatrix::zeros(n, n);
    for k in 0..=degree {
        for r in 0..2 {
            for s in 0..2 {
                let mut v = pencil.b[r][s] * l1[k] + pencil.c[r][s] * l2[k];
                if k == 0 {
                    v += pencil.a[r][s];
                }
                m[(r, 2 * k + s)] = C64::new(v, 0.0);
            }
        }
    }
    for j in 1..=degree {
        for k in 0..=degree {
            for s in 0..2 {
                m[(2 * j + s, 2 * k + s)] = C64::new(d[j][k], 0.0);
            }
        }
    }
    m
}

fn newton(pencil: &DelayPencil, z0: C64) -> Option<C64> {
    let mut z = z0;
    for _ in 0..50 {
        let (f, df) = pencil.det_and_derivative(z);
        if df.norm() == 0.0 || !f.is_finite() {
            return None;
        }
        let step = f / df;
        z -= step;
        if !z.is_finite() {
            return None;
        }
        if step.norm() <= 1e-15 * (1.0 + z.norm()) {
            break;
        }
    }
    (pencil.det(z).norm() <= 1e-10).then_some(z)
}

/// Roots of `det Delta` with real part at least `re_min`: collocation
/// candidates refined by Newton on the determinant, then deduplicated.
pub fn characteristic_roots(pencil: &DelayPencil, re_min: f64) -> Result<RootSet, JacobianError> {
    characteristic_roots_with_degree(pencil, re_min, DEFAULT_DEGREE)
}

pub fn characteristic_roots_with_degree(
    pencil: &DelayPencil,
    re_min: f64,
    degree: usize,
) -> Result<RootSet, JacobianError> {
    if !re_min.is_finite() {
        return Err(JacobianError::InvalidInput("re_min must be finite".into()));
    }
    if degree < 4 {
        return Err(JacobianError::InvalidInput("collocation degree must be at least 4".into()));
    }
    let candidates: Vec<C64> = if pencil.max_delay() == 0.0 {
        let sum = ComplexMatrix::from_fn(2, 2, |i, j| {
            C64::new(pencil.a[i][j] + pencil.b[i][j] + pencil.c[i][j], 0.0)
        });
        eig_dense(&sum)?.into_iter().map(|e| e.value).collect()
    } else {
        eig_dense(&collocation_matrix(pencil, degree))?
            .into_iter()
            .map(|e| e.value)
            .filter(|z| z.re >= re_min - 0.5)
            .collect()
    };
    let mut roots: Vec<C64> = Vec::new();
    let mut dropped = 0;
    for z0 in candidates {
        match newton(pencil, z0) {
            Some(z) => {
                if z.re >= re_min && !roots.iter().any(|r| (r - z).norm() <= 1e-8 * z.norm().max(1.0)) {
                    roots.push(z);
                }
            }
            None => dropped += 1,
        }
    }
    if dropped > 0 {
        log::warn!("{dropped} collocation candidates failed Newton refinement");
    }
    roots.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(RootSet { roots, dropped })
}
