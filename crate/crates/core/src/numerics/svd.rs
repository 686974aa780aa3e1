//! One-sided (Hestenes) Jacobi SVD for complex matrices.

use super::{inner, vec_norm, ComplexMatrix, NumericsError, Result, C64, ONE, ZERO};

const MAX_SWEEPS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct SvdMin {
    pub sigma_min: f64,
    /// Right singular vector for `sigma_min`, unit 2-norm.
    pub v_min: Vec<C64>,
}

struct Jacobi {
    /// Column-major working copy of `M V`.
    cols: Vec<Vec<C64>>,
    /// Column-major accumulated right rotations.
    v: Vec<Vec<C64>>,
}

fn jacobi(m: &ComplexMatrix) -> Result<Jacobi> {
    m.check_finite()?;
    let n = m.cols();
    let mut cols: Vec<Vec<C64>> = (0..n).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<C64>> = (0..n)
        .map(|j| {
            let mut e = vec![ZERO; n];
            e[j] = ONE;
            e
        })
        .collect();

    let tol = f64::EPSILON * (m.rows() as f64).sqrt();
    let mut sweeps = 0;
    loop {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = vec_norm(&cols[p]).powi(2);
                let beta = vec_norm(&cols[q]).powi(2);
                let gamma = inner(&cols[p], &cols[q]);
                let g = gamma.norm();
                if g == 0.0 || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                off = off.max(g / (alpha * beta).sqrt());
                // Rotate (u_p, e^{-i phi} u_q) so that the pair becomes orthogonal.
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let ph_conj = phase.conj();
                rotate(&mut cols, p, q, c, s, ph_conj);
                rotate(&mut v, p, q, c, s, ph_conj);
            }
        }
        sweeps += 1;
        if off == 0.0 {
            break;
        }
        if sweeps >= MAX_SWEEPS {
            return Err(NumericsError::NoConvergence {
                what: "Jacobi SVD",
                iterations: sweeps,
                residual: off,
            });
        }
    }
    Ok(Jacobi { cols, v })
}

fn rotate(cols: &mut [Vec<C64>], p: usize, q: usize, c: f64, s: f64, ph_conj: C64) {
    let (left, right) = cols.split_at_mut(q);
    let up = &mut left[p];
    let uq = &mut right[0];
    for (a, b) in up.iter_mut().zip(uq.iter_mut()) {
        let w = *b * ph_conj;
        let na = *a * c - w * s;
        let nb = *a * s + w * c;
        *a = na;
        *b = nb;
    }
}

/// Smallest singular value and a matching right singular vector.
///
/// For a wide matrix (`rows < cols`) the smallest singular value is zero and
/// the returned vector spans part of the null space.
pub fn svd_min(m: &ComplexMatrix) -> Result<SvdMin> {
    let j = jacobi(m)?;
    let (k, sigma) = j
        .cols
        .iter()
        .map(|c| vec_norm(c))
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("matrix has at least one column");
    let mut v_min = j.v[k].clone();
    let nv = vec_norm(&v_min);
    v_min.iter_mut().for_each(|z| *z /= nv);
    let sigma_min = if m.rows() < m.cols() { 0.0 } else { sigma };
    Ok(SvdMin { sigma_min, v_min })
}

/// All singular values, in descending order.
pub fn singular_values(m: &ComplexMatrix) -> Result<Vec<f64>> {
    let j = jacobi(m)?;
    let mut s: Vec<f64> = j.cols.iter().map(|c| vec_norm(c)).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s.truncate(m.rows().min(m.cols()));
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(m: &ComplexMatrix, r: &SvdMin) -> f64 {
        vec_norm(&m.mul_vec(&r.v_min))
    }

    #[test]
    fn identity_has_unit_singular_values() {
        let r = svd_min(&ComplexMatrix::identity(2)).unwrap();
        assert!((r.sigma_min - 1.0).abs() < 1e-15);
        assert!((vec_norm(&r.v_min) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rank_deficient_diagonal() {
        let m = ComplexMatrix::from_real(2, 2, &[3.0, 0.0, 0.0, 0.0]);
        let r = svd_min(&m).unwrap();
        assert_eq!(r.sigma_min, 0.0);
        assert!(r.v_min[0].norm() < 1e-15);
        assert!((r.v_min[1].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn shear_matches_quadratic_oracle() {
        // eigenvalues of M^T M are (3 +- sqrt 5)/2
        let oracle = ((3.0 - 5.0f64.sqrt()) / 2.0).sqrt();
        let m = ComplexMatrix::from_real(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let r = svd_min(&m).unwrap();
        assert!((r.sigma_min - oracle).abs() < 1e-14);
        assert!((r.sigma_min - 0.61803).abs() < 1e-5);
        assert!((residual(&m, &r) - r.sigma_min).abs() < 1e-14);
    }

    #[test]
    fn complex_rectangular_residual() {
        let m = ComplexMatrix::from_fn(5, 3, |i, j| {
            C64::new((i as f64 + 1.0) * (j as f64 - 1.3), (i * j) as f64 * 0.7 - 0.2)
        });
        let r = svd_min(&m).unwrap();
        let smax = singular_values(&m).unwrap()[0];
        assert!((residual(&m, &r) - r.sigma_min).abs() <= 1e-10 * smax);
    }

    #[test]
    fn rejects_non_finite() {
        let mut m = ComplexMatrix::identity(2);
        m[(0, 1)] = C64::new(f64::INFINITY, 0.0);
        assert!(matches!(svd_min(&m), Err(NumericsError::NonFinite { .. })));
    }

    #[test]
    fn wide_matrix_has_zero_sigma_min() {
        let m = ComplexMatrix::from_real(1, 2, &[1.0, 2.0]);
        let r = svd_min(&m).unwrap();
        assert_eq!(r.sigma_min, 0.0);
        assert!(residual(&m, &r) < 1e-14);
    }
}
