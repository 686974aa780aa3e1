use super::{ComplexMatrix, NumericsError, Result, C64, ONE, ZERO};

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    /// Row-major packed L (unit diagonal, below) and U (on and above).
    lu: Vec<C64>,
    perm: Vec<usize>,
}

impl LuFactors {
    /// Factorizes `m`. A pivot below `n * eps * max|m_ij|` is treated as an
    /// exact zero and reported as [`NumericsError::Singular`].
    pub fn new(m: &ComplexMatrix) -> Result<Self> {
        let n = m.require_square()?;
        let mut lu = m.as_slice().to_vec();
        let scale = lu.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let tiny = (n as f64) * f64::EPSILON * scale;
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[i * n + k].norm()))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty pivot column");
            if pmax <= tiny || pmax == 0.0 {
                return Err(NumericsError::Singular { pivot: k });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let inv = ONE / lu[k * n + k];
            for i in k + 1..n {
                let l = lu[i * n + k] * inv;
                lu[i * n + k] = l;
                if l == ZERO {
                    continue;
                }
                let (top, bottom) = lu.split_at_mut(i * n);
                let urow = &top[k * n + k + 1..k * n + n];
                let row = &mut bottom[k + 1..n];
                for (a, u) in row.iter_mut().zip(urow) {
                    *a -= l * u;
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[C64]) -> Result<Vec<C64>> {
        let n = self.n;
        if rhs.len() != n {
            return Err(NumericsError::DimensionMismatch {
                expected: n,
                actual: rhs.len(),
            });
        }
        let mut x: Vec<C64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: C64 = row.iter().zip(&x[..i]).map(|(l, v)| l * v).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            let s: C64 = row.iter().zip(&x[i + 1..]).map(|(u, v)| u * v).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        Ok(x)
    }

    pub fn inverse(&self) -> ComplexMatrix {
        let n = self.n;
        let mut inv = ComplexMatrix::zeros(n, n);
        let mut e = vec![ZERO; n];
        for j in 0..n {
            e.fill(ZERO);
            e[j] = ONE;
            let col = self.solve(&e).expect("dimension checked");
            for (i, v) in col.into_iter().enumerate() {
                inv[(i, j)] = v;
            }
        }
        inv
    }

    pub fn determinant(&self) -> C64 {
        let n = self.n;
        let mut det: C64 = (0..n).map(|i| self.lu[i * n + i]).product();
        // parity of the permutation
        let mut seen = vec![false; n];
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut k = start;
            while !seen[k] {
                seen[k] = true;
                k = self.perm[k];
                len += 1;
            }
            if len % 2 == 0 {
                det = -det;
            }
        }
        det
    }
}

/// `||(T - zI)^{-1}||_inf`, or `f64::INFINITY` when `T - zI` is singular to
/// working precision.
pub fn resolvent_inf_norm(t: &ComplexMatrix, z: C64) -> Result<f64> {
    t.require_square()?;
    t.check_finite()?;
    match LuFactors::new(&t.shifted(z)) {
        Ok(lu) => {
            let norm = lu.inverse().norm_inf();
            Ok(if norm.is_finite() { norm } else { f64::INFINITY })
        }
        Err(NumericsError::Singular { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}
