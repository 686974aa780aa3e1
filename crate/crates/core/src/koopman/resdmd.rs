use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::KoopmanError;
use crate::numerics::{
    eig_dense, hermitian_min_eigenvalue, kreiss_constant, ComplexMatrix, GridAxes, KreissOptions, KreissResult,
    PseudospectrumGrid, C64,
};

pub const DEFAULT_RANK_TOL: f64 = 1e-12;

/// Galerkin data of the Koopman operator under the empirical measure.
#[derive(Debug, Clone, PartialEq)]
pub struct ResDmdMatrices {
    pub g: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub l: DMatrix<f64>,
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// `G = Psi0^T Psi0 / M`, `A = Psi0^T Psi1 / M`, `L = Psi1^T Psi1 / M`.
pub fn assemble_matrices(psi0: &DMatrix<f64>, psi1: &DMatrix<f64>) -> Result<ResDmdMatrices, KoopmanError> {
    if psi0.shape() != psi1.shape() {
        return Err(KoopmanError::InvalidInput(format!(
            "feature matrices differ in shape: {:?} vs {:?}",
            psi0.shape(),
            psi1.shape()
        )));
    }
    let m = psi0.nrows();
    if m == 0 {
        return Err(KoopmanError::EmptyDataset);
    }
    let w = 1.0 / m as f64;
    Ok(ResDmdMatrices {
        g: symmetrize(psi0.tr_mul(psi0) * w),
        a: psi0.tr_mul(psi1) * w,
        l: symmetrize(psi1.tr_mul(psi1) * w),
    })
}

/// Koopman data in an orthonormal basis of the retained range of `G`:
/// `W = V_r S_r^{-1/2}`, `K = W^T A W`, `L_w = W^T L W`.
#[derive(Debug, Clone, PartialEq)]
pub struct WhitenedModel {
    pub w: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub lw: DMatrix<f64>,
}

impl WhitenedModel {
    pub fn new(mats: &ResDmdMatrices, rank_tol: f64) -> Result<Self, KoopmanError> {
        if !(rank_tol > 0.0 && rank_tol < 1.0) {
            return Err(KoopmanError::InvalidInput(format!("rank_tol must lie in (0, 1), got {rank_tol}")));
        }
        let eig = mats.g.clone().symmetric_eigen();
        let s_max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        if !(s_max > 0.0) || !s_max.is_finite() {
            return Err(KoopmanError::ZeroGram);
        }
        let keep: Vec<usize> = (0..eig.eigenvalues.len())
            .filter(|&i| eig.eigenvalues[i] > rank_tol * s_max)
            .collect();
        let n = mats.g.nrows();
        let w = DMatrix::from_fn(n, keep.len(), |i, j| {
            eig.eigenvectors[(i, keep[j])] / eig.eigenvalues[keep[j]].sqrt()
        });
        let k = w.tr_mul(&(&mats.a * &w));
        let lw = symmetrize(w.tr_mul(&(&mats.l * &w)));
        Ok(Self { w, k, lw })
    }

    pub fn rank(&self) -> usize {
        self.k.nrows()
    }

    /// `P(z) = L_w - conj(z) K - z K^T + |z|^2 I`.
    pub fn residual_form(&self, z: C64) -> ComplexMatrix {
        let r = self.rank();
        ComplexMatrix::from_fn(r, r, |i, j| {
            let mut v = C64::new(self.lw[(i, j)], 0.0) - z.conj() * self.k[(i, j)] - z * self.k[(j, i)];
            if i == j {
                v += z.norm_sqr();
            }
            v
        })
    }

    /// Square root of the smallest eigenvalue of [`Self::residual_form`].
    pub fn minimal_residual(&self, z: C64) -> Result<f64, KoopmanError> {
        Ok(hermitian_min_eigenvalue(&self.residual_form(z))?.max(0.0).sqrt())
    }

    pub fn eigenvalues(&self) -> Result<Vec<C64>, KoopmanError> {
        Ok(eig_dense(&real_to_complex(&self.k))?.into_iter().map(|p| p.value).collect())
    }

    pub fn spectral_radius(&self) -> Result<f64, KoopmanError> {
        Ok(self.eigenvalues()?.iter().map(|z| z.norm()).fold(0.0, f64::max))
    }
}

pub(crate) fn real_to_complex(m: &DMatrix<f64>) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.nrows(), m.ncols(), |i, j| C64::new(m[(i, j)], 0.0))
}

fn real_mul(m: &DMatrix<f64>, v: &[C64]) -> Vec<C64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| v[j] * m[(i, j)]).sum())
        .collect()
}

fn herm(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `sqrt(g* (L - conj(z) A - z A^T + |z|^2 G) g / g* G g)`.
pub fn residual(z: C64, g: &[C64], mats: &ResDmdMatrices) -> Result<f64, KoopmanError> {
    if g.len() != mats.g.nrows() {
        return Err(KoopmanError::InvalidInput(format!(
            "coefficient vector has length {}, expected {}",
            g.len(),
            mats.g.nrows()
        )));
    }
    let ggg = herm(g, &real_mul(&mats.g, g)).re;
    if !(ggg > 0.0) {
        return Err(KoopmanError::InvalidInput(format!("g* G g = {ggg} is not positive")));
    }
    let gag = herm(g, &real_mul(&mats.a, g));
    let glg = herm(g, &real_mul(&mats.l, g)).re;
    // g* A^T g = conj(g* A g) for real A
    let q = glg - 2.0 * (z.conj() * gag).re + z.norm_sqr() * ggg;
    Ok((q.max(0.0) / ggg).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmdEigenpair {
    pub value: C64,
    /// Dictionary coefficients, normalized so that `g* G g = 1`.
    pub g: Vec<C64>,
    pub residual: f64,
}

/// Eigenpairs of `A g = lambda G g` in the retained subspace of `G`, in the
/// order returned by the dense eigensolver.
pub fn dmd_eigs(mats: &ResDmdMatrices, rank_tol: f64) -> Result<Vec<DmdEigenpair>, KoopmanError> {
    let model = WhitenedModel::new(mats, rank_tol)?;
    eigenpairs_of(&model, mats)
}

pub(crate) fn eigenpairs_of(model: &WhitenedModel, mats: &ResDmdMatrices) -> Result<Vec<DmdEigenpair>, KoopmanError> {
    let pairs = eig_dense(&real_to_complex(&model.k))?;
    pairs
        .into_par_iter()
        .map(|p| {
            let mut g = real_mul(&model.w, &p.vector);
            let ggg = herm(&g, &real_mul(&mats.g, &g)).re;
            if ggg > 0.0 {
                let s = ggg.sqrt();
                g.iter_mut().for_each(|v| *v /= s);
            }
            let residual = residual(p.value, &g, mats)?;
            Ok(DmdEigenpair {
                value: p.value,
                g,
                residual,
            })
        })
        .collect()
}

/// Minimal residual over the retained subspace at every grid point. Grids
/// symmetric about the real axis are evaluated on the upper half only.
pub fn koopman_pseudospectrum(model: &WhitenedModel, axes: &GridAxes) -> Result<PseudospectrumGrid, KoopmanError> {
    axes.re.validate()?;
    axes.im.validate()?;
    let re = axes.re.samples();
    let im = axes.im.samples();
    let n_im = im.len();
    let mirror: Vec<usize> = (0..n_im)
        .map(|j| {
            let k = n_im - 1 - j;
            if im[j] < 0.0 && (im[k] + im[j]).abs() <= 1e-12 * (1.0 + im[j].abs()) {
                k
            } else {
                j
            }
        })
        .collect();
    let cells: Vec<(usize, usize)> = (0..n_im)
        .filter(|&j| mirror[j] == j)
        .flat_map(|j| (0..re.len()).map(move |i| (i, j)))
        .collect();
    let computed: Vec<f64> = cells
        .par_iter()
        .map(|&(i, j)| model.minimal_residual(C64::new(re[i], im[j])))
        .collect::<Result<_, _>>()?;
    let mut values = vec![0.0; re.len() * n_im];
    for (&(i, j), v) in cells.iter().zip(&computed) {
        values[j * re.len() + i] = *v;
    }
    for j in 0..n_im {
        if mirror[j] != j {
            for i in 0..re.len() {
                values[j * re.len() + i] = values[mirror[j] * re.len() + i];
            }
        }
    }
    Ok(PseudospectrumGrid::from_parts(re, im, values)?)
}

/// Kreiss constant with `resolvent_norm(z) = 1 / minimal_residual(z)`.
pub fn koopman_kreiss(model: &WhitenedModel, c: f64, opts: &KreissOptions) -> Result<KreissResult, KoopmanError> {
    if !(c >= 1.0) {
        return Err(KoopmanError::InvalidInput(format!("Kreiss threshold must be at least 1, got {c}")));
    }
    let radius = model.spectral_radius()?;
    if !(c > radius) {
        return Err(KoopmanError::SpectralRadius { c, radius });
    }
    Ok(kreiss_constant(
        |z| {
            model
                .minimal_residual(z)
                .map(|r| 1.0 / r)
                .unwrap_or(f64::INFINITY)
        },
        c,
        opts,
    )?)
}
