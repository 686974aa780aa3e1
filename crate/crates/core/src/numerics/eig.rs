//! Dense eigensolvers: complex Schur form by Hessenberg reduction and
//! single-shift QR, and a Lanczos routine for the bottom of a Hermitian
//! positive definite spectrum.

use super::{inner, vec_norm, ComplexMatrix, NumericsError, Result, C64, ONE, ZERO};

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: C64,
    /// Right eigenvector, unit 2-norm.
    pub vector: Vec<C64>,
}

/// Complex Schur decomposition `M = Q T Q^*` with `T` upper triangular.
struct Schur {
    q: ComplexMatrix,
    t: ComplexMatrix,
}

fn householder_hessenberg(m: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let n = m.rows();
    let mut h = m.clone();
    let mut q = ComplexMatrix::identity(n);
    for k in 0..n.saturating_sub(2) {
        let x: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let xnorm = vec_norm(&x);
        if xnorm == 0.0 {
            continue;
        }
        let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { ONE };
        let alpha = -phase * xnorm;
        let mut v = x;
        v[0] -= alpha;
        let vn = vec_norm(&v);
        if vn == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|z| *z /= vn);

        // H <- (I - 2 v v^*) H on rows k+1..n
        for j in 0..n {
            let s: C64 = (k + 1..n).map(|i| v[i - k - 1].conj() * h[(i, j)]).sum();
            for i in k + 1..n {
                h[(i, j)] -= 2.0 * v[i - k - 1] * s;
            }
        }
        // H <- H (I - 2 v v^*) and Q <- Q (I - 2 v v^*) on columns k+1..n
        for mat in [&mut h, &mut q] {
            for i in 0..n {
                let s: C64 = (k + 1..n).map(|j| mat[(i, j)] * v[j - k - 1]).sum();
                for j in k + 1..n {
                    mat[(i, j)] -= 2.0 * s * v[j - k - 1].conj();
                }
            }
        }
        h[(k + 1, k)] = alpha;
        for i in k + 2..n {
            h[(i, k)] = ZERO;
        }
    }
    (h, q)
}

fn givens(a: C64, b: C64) -> (f64, C64) {
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, ZERO);
    }
    if an == 0.0 {
        return (0.0, b.conj() / bn);
    }
    let r = an.hypot(bn);
    (an / r, (a / an) * b.conj() / r)
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mu1 = d - b * c / (half + disc);
    let mu2 = d - b * c / (half - disc);
    let pick = |mu: C64| if mu.re.is_finite() && mu.im.is_finite() { Some(mu) } else { None };
    match (pick(mu1), pick(mu2)) {
        (Some(x), Some(y)) => {
            if (x - d).norm() <= (y - d).norm() {
                x
            } else {
                y
            }
        }
        (Some(x), None) | (None, Some(x)) => x,
        (None, None) => d,
    }
}

fn schur(m: &ComplexMatrix) -> Result<Schur> {
    let n = m.rows();
    let (mut t, mut q) = householder_hessenberg(m);
    if n == 1 {
        return Ok(Schur { q, t });
    }
    let max_iter = 60 * n;
    let mut total = 0usize;
    let mut hi = n - 1;
    let mut since_deflation = 0usize;
    let mut rots: Vec<(f64, C64)> = Vec::with_capacity(n);

    while hi > 0 {
        // locate the active unreduced block [lo, hi]
        let mut lo = hi;
        while lo > 0 {
            let sub = t[(lo, lo - 1)].norm();
            let diag = t[(lo, lo)].norm() + t[(lo - 1, lo - 1)].norm();
            let scale = if diag == 0.0 { t.norm_inf() } else { diag };
            if sub <= f64::EPSILON * scale {
                t[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            since_deflation = 0;
            continue;
        }

        total += 1;
        since_deflation += 1;
        if total > max_iter {
            return Err(NumericsError::NoConvergence {
                what: "complex Schur QR",
                iterations: total,
                residual: t[(hi, hi - 1)].norm(),
            });
        }

        let mu = if since_deflation % 11 == 10 {
            // exceptional shift
            t[(hi, hi)] + C64::new(0.75 * t[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson_shift(
                t[(hi - 1, hi - 1)],
                t[(hi - 1, hi)],
                t[(hi, hi - 1)],
                t[(hi, hi)],
            )
        };

        for k in lo..=hi {
            t[(k, k)] -= mu;
        }
        rots.clear();
        for k in lo..hi {
            let (c, s) = givens(t[(k, k)], t[(k + 1, k)]);
            rots.push((c, s));
            for j in k..n {
                let x = t[(k, j)];
                let y = t[(k + 1, j)];
                t[(k, j)] = x * c + s * y;
                t[(k + 1, j)] = -s.conj() * x + y * c;
            }
        }
        for (idx, &(c, s)) in rots.iter().enumerate() {
            let k = lo + idx;
            let rmax = (k + 2).min(hi);
            for i in 0..=rmax {
                let x = t[(i, k)];
                let y = t[(i, k + 1)];
                t[(i, k)] = x * c + y * s.conj();
                t[(i, k + 1)] = -x * s + y * c;
            }
            for i in 0..n {
                let x = q[(i, k)];
                let y = q[(i, k + 1)];
                q[(i, k)] = x * c + y * s.conj();
                q[(i, k + 1)] = -x * s + y * c;
            }
        }
        for k in lo..=hi {
            t[(k, k)] += mu;
        }
    }
    for i in 1..n {
        for j in 0..i {
            t[(i, j)] = ZERO;
        }
    }
    Ok(Schur { q, t })
}

/// Eigenvalues and unit right eigenvectors of a square matrix, with
/// multiplicity. Order is the order in which they appear on the diagonal of
/// the Schur form.
pub fn eig_dense(m: &ComplexMatrix) -> Result<Vec<EigenPair>> {
    let n = m.require_square()?;
    m.check_finite()?;
    let Schur { q, t } = schur(m)?;
    let tnorm = t.norm_inf().max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * tnorm;

    let mut pairs = Vec::with_capacity(n);
    let mut y = vec![ZERO; n];
    for k in 0..n {
        let lambda = t[(k, k)];
        y.fill(ZERO);
        y[k] = ONE;
        for i in (0..k).rev() {
            let s: C64 = (i + 1..=k).map(|j| t[(i, j)] * y[j]).sum();
            let mut d = t[(i, i)] - lambda;
            if d.norm() < small {
                d = C64::new(small, 0.0);
            }
            y[i] = -s / d;
            let big = y[i].norm();
            if big > 1e100 {
                y[..=k].iter_mut().for_each(|z| *z /= big);
            }
        }
        let mut v = q.mul_vec(&y);
        let nv = vec_norm(&v);
        v.iter_mut().for_each(|z| *z /= nv);
        pairs.push(EigenPair { value: lambda, vector: v });
    }
    Ok(pairs)
}

/// In-place lower Cholesky factor of a Hermitian matrix; `None` when the
/// matrix is not numerically positive definite.
fn cholesky(h: &ComplexMatrix) -> Option<Vec<C64>> {
    let n = h.rows();
    let mut l = vec![ZERO; n * n];
    for j in 0..n {
        let mut d = h[(j, j)].re;
        for k in 0..j {
            d -= l[j * n + k].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let dj = d.sqrt();
        l[j * n + j] = C64::new(dj, 0.0);
        let (top, bottom) = l.split_at_mut((j + 1) * n);
        let lj = &top[j * n..j * n + j];
        for i in j + 1..n {
            let li = &bottom[(i - j - 1) * n..(i - j - 1) * n + j];
            let s: C64 = li.iter().zip(lj).map(|(a, b)| a * b.conj()).sum();
            bottom[(i - j - 1) * n + j] = (h[(i, j)] - s) / dj;
        }
    }
    Some(l)
}

fn cholesky_solve(l: &[C64], n: usize, b: &mut [C64]) {
    for i in 0..n {
        let s: C64 = l[i * n..i * n + i].iter().zip(&b[..i]).map(|(a, x)| a * x).sum();
        b[i] = (b[i] - s) / l[i * n + i];
    }
    for i in (0..n).rev() {
        let s: C64 = (i + 1..n).map(|k| l[k * n + i].conj() * b[k]).sum();
        b[i] = (b[i] - s) / l[i * n + i];
    }
}

fn tridiagonal_max_eig(alpha: &[f64], beta: &[f64]) -> f64 {
    let m = alpha.len();
    let mut t = nalgebra::DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    t.symmetric_eigenvalues().iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest eigenvalue of a Hermitian positive semidefinite matrix.
///
/// Runs Lanczos with full reorthogonalization on `H^{-1}` through a Cholesky
/// factorization. Returns `0.0` when the factorization breaks down, i.e.
/// when `H` is singular to working precision.
pub fn hermitian_min_eigenvalue(h: &ComplexMatrix) -> Result<f64> {
    let n = h.require_square()?;
    let Some(l) = cholesky(h) else {
        return Ok(0.0);
    };
    let max_steps = n.min(80);
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(max_steps);
    let mut alpha = Vec::with_capacity(max_steps);
    let mut beta: Vec<f64> = Vec::with_capacity(max_steps);

    let mut q: Vec<C64> = (0..n)
        .map(|i| C64::new(1.0 + 0.37 * ((i as f64) * 1.618).sin(), 0.0))
        .collect();
    let qn = vec_norm(&q);
    q.iter_mut().for_each(|z| *z /= qn);

    let mut theta_prev = f64::NAN;
    let mut theta = 0.0;
    for step in 0..max_steps {
        let mut w = q.clone();
        cholesky_solve(&l, n, &mut w);
        let a = inner(&q, &w).re;
        alpha.push(a);
        basis.push(q.clone());
        for _ in 0..2 {
            for b in &basis {
                let c = inner(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let bnorm = vec_norm(&w);
        let check = step + 1 == max_steps || bnorm <= 1e-14 * a.abs() || step % 4 == 3;
        if check {
            theta = tridiagonal_max_eig(&alpha, &beta);
            if bnorm <= 1e-14 * a.abs()
                || (theta_prev.is_finite() && (theta - theta_prev).abs() <= 1e-12 * theta.abs())
            {
                break;
            }
            theta_prev = theta;
        }
        if step + 1 == max_steps {
            break;
        }
        beta.push(bnorm);
        q = w.into_iter().map(|z| z / bnorm).collect();
    }
    if !(theta > 0.0) || !theta.is_finite() {
        return Ok(0.0);
    }
    Ok(1.0 / theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_re(pairs: &[EigenPair]) -> Vec<f64> {
        let mut v: Vec<f64> = pairs.iter().map(|p| p.value.re).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    fn max_residual(m: &ComplexMatrix, pairs: &[EigenPair]) -> f64 {
        pairs
            .iter()
            .map(|p| {
                let mv = m.mul_vec(&p.vector);
                let r: Vec<C64> = mv.iter().zip(&p.vector).map(|(a, b)| a - p.value * b).collect();
                vec_norm(&r)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn diagonal_eigenvalues() {
        let m = ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let pairs = eig_dense(&m).unwrap();
        assert_eq!(sorted_re(&pairs), vec![1.0, 2.0]);
    }

    #[test]
    fn rotation_has_imaginary_pair() {
        let m = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let pairs = eig_dense(&m).unwrap();
        let mut im: Vec<f64> = pairs.iter().map(|p| p.value.im).collect();
        im.sort_by(f64::total_cmp);
        assert!((im[0] + 1.0).abs() < 1e-14 && (im[1] - 1.0).abs() < 1e-14);
        assert!(pairs.iter().all(|p| p.value.re.abs() < 1e-14));
        assert!(max_residual(&m, &pairs) < 1e-13);
    }

    #[test]
    fn companion_matrix_roots() {
        // p(l) = l^2 - 3 l + 2, roots by the quadratic formula
        let disc: f64 = 9.0 - 8.0;
        let oracle = [(3.0 - disc.sqrt()) / 2.0, (3.0 + disc.sqrt()) / 2.0];
        let m = ComplexMatrix::from_real(2, 2, &[3.0, -2.0, 1.0, 0.0]);
        let re = sorted_re(&eig_dense(&m).unwrap());
        assert!((re[0] - oracle[0]).abs() < 1e-13 && (re[1] - oracle[1]).abs() < 1e-13);
    }

    #[test]
    fn larger_nonnormal_residuals() {
        let n = 40;
        let m = ComplexMatrix::from_fn(n, n, |i, j| {
            let x = ((i * 7 + j * 13) % 17) as f64 / 17.0 - 0.5;
            let upper = if j > i { 3.0 / (1.0 + (j - i) as f64) } else { 0.0 };
            C64::new(x + upper, 0.0)
        });
        let pairs = eig_dense(&m).unwrap();
        assert_eq!(pairs.len(), n);
        assert!(max_residual(&m, &pairs) <= 1e-8 * m.norm_inf());
        // trace is preserved
        let tr: C64 = (0..n).map(|i| m[(i, i)]).sum();
        let sum: C64 = pairs.iter().map(|p| p.value).sum();
        assert!((tr - sum).norm() < 1e-10 * n as f64);
    }

    #[test]
    fn hermitian_min_eig_of_diagonal() {
        let d: Vec<C64> = [5.0, 0.25, 3.0, 9.0].iter().map(|&x| C64::new(x, 0.0)).collect();
        let lam = hermitian_min_eigenvalue(&ComplexMatrix::diag(&d)).unwrap();
        assert!((lam - 0.25).abs() < 1e-12);
    }

    #[test]
    fn hermitian_min_eig_matches_dense_eig() {
        let n = 30;
        let b = ComplexMatrix::from_fn(n, n, |i, j| {
            C64::new(((i * 3 + j * 5) % 11) as f64 - 5.0, ((i + 2 * j) % 7) as f64 - 3.0)
        });
        let h = b.adjoint().matmul(&b).shifted(C64::new(-0.01, 0.0));
        let lam = hermitian_min_eigenvalue(&h).unwrap();
        let oracle = eig_dense(&h)
            .unwrap()
            .iter()
            .map(|p| p.value.re)
            .fold(f64::INFINITY, f64::min);
        assert!((lam - oracle).abs() < 1e-9 * oracle.abs().max(1e-2), "{lam} vs {oracle}");
    }

    #[test]
    fn singular_hermitian_returns_zero() {
        let h = ComplexMatrix::from_real(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(hermitian_min_eigenvalue(&h).unwrap(), 0.0);
    }
}
