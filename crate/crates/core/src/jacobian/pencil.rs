use serde::{Deserialize, Serialize};

use super::JacobianError;
use crate::dde::NondimParams;
use crate::numerics::{ComplexMatrix, C64};

pub type Mat2 = [[f64; 2]; 2];

/// `Delta(lambda) = lambda I - A - B exp(-lambda t1) - C exp(-lambda t2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayPencil {
    pub a: Mat2,
    pub b: Mat2,
    pub c: Mat2,
    pub t1: f64,
    pub t2: f64,
    pub tau_base: f64,
}

fn finite(m: &Mat2) -> bool {
    m.iter().flatten().all(|v| v.is_finite())
}

impl DelayPencil {
    /// General pencil; the analysis routines do not assume the structure
    /// produced by [`linearize_at`].
    pub fn new(a: Mat2, b: Mat2, c: Mat2, t1: f64, t2: f64) -> Result<Self, JacobianError> {
        if !(finite(&a) && finite(&b) && finite(&c)) {
            return Err(JacobianError::InvalidInput("pencil coefficients must be finite".into()));
        }
        if !(t1 >= 0.0 && t2 >= 0.0 && t1.is_finite() && t2.is_finite()) {
            return Err(JacobianError::InvalidInput(format!("delays must be nonnegative, got {t1}, {t2}")));
        }
        Ok(Self {
            a,
            b,
            c,
            t1,
            t2,
            tau_base: 0.0,
        })
    }

    pub fn max_delay(&self) -> f64 {
        self.t1.max(self.t2)
    }

    /// `(Delta(lambda), Delta'(lambda))` as plain 2x2 arrays.
    #[inline]
    pub(crate) fn eval_with_derivative(&self, lambda: C64) -> ([[C64; 2]; 2], [[C64; 2]; 2]) {
        let e1 = (-lambda * self.t1).exp();
        let e2 = (-lambda * self.t2).exp();
        let mut m = [[C64::new(0.0, 0.0); 2]; 2];
        let mut dm = m;
        for i in 0..2 {
            for j in 0..2 {
                let id = if i == j { 1.0 } else { 0.0 };
                m[i][j] = lambda * id - self.a[i][j] - e1 * self.b[i][j] - e2 * self.c[i][j];
                dm[i][j] = C64::new(id, 0.0) + e1 * (self.t1 * self.b[i][j]) + e2 * (self.t2 * self.c[i][j]);
            }
        }
        (m, dm)
    }

    pub fn eval(&self, lambda: C64) -> ComplexMatrix {
        let (m, _) = self.eval_with_derivative(lambda);
        ComplexMatrix::from_rows(&[m[0].to_vec(), m[1].to_vec()])
    }

    pub fn det(&self, lambda: C64) -> C64 {
        let (m, _) = self.eval_with_derivative(lambda);
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    /// `(det Delta, d/dlambda det Delta)`.
    pub fn det_and_derivative(&self, lambda: C64) -> (C64, C64) {
        let (m, d) = self.eval_with_derivative(lambda);
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let ddet = d[0][0] * m[1][1] + m[0][0] * d[1][1] - d[0][1] * m[1][0] - m[0][1] * d[1][0];
        (det, ddet)
    }

    /// Smallest singular value of `Delta(z)` from the 2x2 closed form
    /// `sigma_min = |det| / sigma_max`.
    pub fn sigma_min(&self, z: C64) -> f64 {
        let (m, _) = self.eval_with_derivative(z);
        let fro2: f64 = m.iter().flatten().map(|v| v.norm_sqr()).sum();
        let det = (m[0][0] * m[1][1] - m[0][1] * m[1][0]).norm();
        let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
        let smax = (0.5 * (fro2 + disc)).sqrt();
        if smax == 0.0 {
            0.0
        } else {
            det / smax
        }
    }

    /// Sum of the infinity norms of `A`, `B`, `C`.
    pub fn coefficient_norm(&self) -> f64 {
        let n = |m: &Mat2| m.iter().map(|r| r[0].abs() + r[1].abs()).fold(0.0, f64::max);
        n(&self.a) + n(&self.b) + n(&self.c)
    }
}

/// Linearization of the model about a base point with lagged values
/// `x0_lag2 = x0(tau - t2)` and `y0_lag1 = y0(tau - t1)`.
pub fn linearize_at(
    p: &NondimParams,
    x0_lag2: f64,
    y0_lag1: f64,
    tau_base: f64,
) -> Result<DelayPencil, JacobianError> {
    p.validate()?;
    if !(x0_lag2 >= 0.0 && y0_lag1 >= 0.0) || !x0_lag2.is_finite() || !y0_lag1.is_finite() {
        return Err(JacobianError::InvalidInput(format!(
            "lagged base values must be finite and nonnegative, got x = {x0_lag2}, y = {y0_lag1}"
        )));
    }
    let (b12, c21) = coupling(p, x0_lag2, y0_lag1);
    Ok(DelayPencil {
        a: [[-p.c1, 0.0], [0.0, -1.0]],
        b: [[0.0, b12], [0.0, 0.0]],
        c: [[0.0, 0.0], [c21, 0.0]],
        t1: p.t1,
        t2: p.t2,
        tau_base,
    })
}

/// `(B12, C21)`, the derivatives of the two Hill terms in their lagged
/// arguments.
pub fn coupling(p: &NondimParams, x0_lag2: f64, y0_lag1: f64) -> (f64, f64) {
    let m1 = p.m1 as i32;
    let m2 = p.m2 as i32;
    let b12 = -p.h * p.c2 * p.m1 as f64 * y0_lag1.powi(m1 - 1) / (1.0 + y0_lag1.powi(m1)).powi(2);
    let c21 = p.c3 * p.m2 as f64 * x0_lag2.powi(m2 - 1) / (1.0 + x0_lag2.powi(m2)).powi(2);
    (b12, c21)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dde::State;

    #[test]
    fn zero_base_decouples() {
        let p = NondimParams::default();
        let q = linearize_at(&p, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(q.b, [[0.0; 2]; 2]);
        assert_eq!(q.c, [[0.0; 2]; 2]);
        let m = q.eval(C64::new(0.0, 0.0));
        assert_eq!(m[(0, 0)], C64::new(4.0, 0.0));
        assert_eq!(m[(1, 1)], C64::new(1.0, 0.0));
    }

    #[test]
    fn coupling_matches_finite_differences() {
        let p = NondimParams::default();
        let (x, y) = (0.8858, 1.7461);
        let q = linearize_at(&p, x, y, 0.0).unwrap();
        // hand evaluation of the closed forms at this base point
        assert!((q.b[0][1] + 7.3278).abs() < 1e-4, "{}", q.b[0][1]);
        assert!((q.c[1][0] - 17.4311).abs() < 1e-4, "{}", q.c[1][0]);
        let s = State::new(0.5, 0.5);
        let eps = 1e-6;
        let fd_b = (p.rhs(s, x, y + eps).x - p.rhs(s, x, y - eps).x) / (2.0 * eps);
        let fd_c = (p.rhs(s, x + eps, y).y - p.rhs(s, x - eps, y).y) / (2.0 * eps);
        assert!(((fd_b - q.b[0][1]) / q.b[0][1]).abs() < 1e-6);
        assert!(((fd_c - q.c[1][0]) / q.c[1][0]).abs() < 1e-6);
    }

    #[test]
    fn b_is_linear_in_h() {
        let p = NondimParams::default();
        let b1 = coupling(&p, 0.7, 1.3).0;
        let b2 = coupling(&p.with_h(2.0 * p.h), 0.7, 1.3).0;
        assert!((b2 - 2.0 * b1).abs() < 1e-12 * b1.abs());
    }

    #[test]
    fn zero_lambda_sums_coefficients() {
        let q = DelayPencil::new([[1.0, 2.0], [3.0, 4.0]], [[0.5, 0.0], [0.0, 0.5]], [[0.0, 1.0], [1.0, 0.0]], 0.3, 0.7)
            .unwrap();
        let m = q.eval(C64::new(0.0, 0.0));
        assert_eq!(m[(0, 0)].re, -1.5);
        assert_eq!(m[(0, 1)].re, -3.0);
        assert_eq!(m[(1, 0)].re, -4.0);
        assert_eq!(m[(1, 1)].re, -4.5);
    }

    #[test]
    fn closed_form_sigma_min_matches_svd() {
        let p = NondimParams::default();
        let q = linearize_at(&p, 0.9, 1.6, 0.0).unwrap();
        for z in [C64::new(0.3, 2.0), C64::new(-4.0, 0.0), C64::new(1.0, -7.5)] {
            let s = crate::numerics::svd_min(&q.eval(z)).unwrap().sigma_min;
            assert!((s - q.sigma_min(z)).abs() < 1e-12 * (1.0 + s));
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let p = NondimParams::default();
        let q = linearize_at(&p, 0.9, 1.6, 0.0).unwrap();
        let z = C64::new(-0.7, 3.1);
        let h = 1e-6;
        let fd = (q.det(z + h) - q.det(z - h)) / (2.0 * h);
        let (_, d) = q.det_and_derivative(z);
        assert!((fd - d).norm() < 1e-6 * d.norm());
    }

    #[test]
    fn negative_lags_rejected() {
        let p = NondimParams::default();
        assert!(linearize_at(&p, -0.1, 1.0, 0.0).is_err());
    }
}
