use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{KoopmanError, SnapshotDataset};
use crate::numerics::C64;

const KMEANS_TOL: f64 = 1e-6;
const KMEANS_MAX_ITER: usize = 300;
const SCALE_PAIRS: usize = 1000;

/// Gaussian radial basis functions `exp(-|s - c_n|^2 / (2 scale^2))`.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfDictionary {
    /// One center per row.
    pub centers: DMatrix<f64>,
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansReport {
    pub inertia: f64,
    pub iterations: usize,
    pub reseeded: usize,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centers: &[f64], dim: usize) -> (usize, f64) {
    centers
        .chunks_exact(dim)
        .map(|c| dist2(point, c))
        .enumerate()
        .fold((0, f64::INFINITY), |best, (k, d)| if d < best.1 { (k, d) } else { best })
}

/// k-means++ seeding followed by Lloyd iterations on row-major `points`.
/// Returns the row-major centers.
pub fn kmeans(points: &[f64], dim: usize, k: usize, seed: u64) -> Result<(Vec<f64>, KMeansReport), KoopmanError> {
    let m = points.len() / dim;
    if k == 0 || k > m {
        return Err(KoopmanError::InvalidInput(format!("cannot pick {k} centers from {m} points")));
    }
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centers = Vec::with_capacity(k * dim);
    centers.extend_from_slice(row(rng.gen_range(0..m)));
    let mut d2: Vec<f64> = (0..m).into_par_iter().map(|i| dist2(row(i), &centers[..dim])).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        if !(total > 0.0) {
            return Err(KoopmanError::KMeans(format!("fewer than {k} distinct points")));
        }
        let target = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = m - 1;
        for (i, &d) in d2.iter().enumerate() {
            acc += d;
            if acc > target && d > 0.0 {
                pick = i;
                break;
            }
        }
        let start = centers.len();
        centers.extend_from_slice(row(pick));
        let c = &centers[start..];
        d2.par_iter_mut()
            .enumerate()
            .for_each(|(i, d)| *d = d.min(dist2(row(i), c)));
    }

    let mut prev = f64::INFINITY;
    let mut report = KMeansReport {
        inertia: f64::INFINITY,
        iterations: 0,
        reseeded: 0,
    };
    for it in 0..KMEANS_MAX_ITER {
        let assign: Vec<(usize, f64)> = (0..m).into_par_iter().map(|i| nearest(row(i), &centers, dim)).collect();
        let inertia: f64 = assign.iter().map(|a| a.1).sum();
        report.inertia = inertia;
        report.iterations = it + 1;

        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (i, &(c, _)) in assign.iter().enumerate() {
            counts[c] += 1;
            sums[c * dim..(c + 1) * dim]
                .iter_mut()
                .zip(row(i))
                .for_each(|(s, x)| *s += x);
        }
        let mut dist: Vec<f64> = assign.iter().map(|a| a.1).collect();
        for c in 0..k {
            let dst = &mut centers[c * dim..(c + 1) * dim];
            if counts[c] > 0 {
                let n = counts[c] as f64;
                dst.iter_mut().zip(&sums[c * dim..(c + 1) * dim]).for_each(|(d, s)| *d = s / n);
            } else {
                let (far, &fd) = dist
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .expect("points are non-empty");
                if !(fd > 0.0) {
                    return Err(KoopmanError::KMeans("empty cluster could not be re-seeded".into()));
                }
                dst.copy_from_slice(row(far));
                dist[far] = 0.0;
                report.reseeded += 1;
            }
        }
        if inertia == 0.0 || (prev.is_finite() && (prev - inertia).abs() <= KMEANS_TOL * prev) {
            break;
        }
        prev = inertia;
    }
    Ok((centers, report))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median distance over all center pairs, or over 1000 random pairs when
/// there are more.
pub fn median_pair_distance(centers: &[f64], dim: usize, seed: u64) -> f64 {
    let n = centers.len() / dim;
    let c = |i: usize| &centers[i * dim..(i + 1) * dim];
    let pairs = n * (n - 1) / 2;
    let d: Vec<f64> = if pairs <= SCALE_PAIRS {
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| dist2(c(i), c(j)).sqrt())
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        (0..SCALE_PAIRS)
            .map(|_| {
                let i = rng.gen_range(0..n);
                let mut j = rng.gen_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                dist2(c(i), c(j)).sqrt()
            })
            .collect()
    };
    median(d)
}

/// k-means centers on the rows of `X0` and `X1` with the median-distance
/// bandwidth.
pub fn build_dictionary(ds: &SnapshotDataset, n: usize, seed: u64) -> Result<(RbfDictionary, KMeansReport), KoopmanError> {
    if n < 2 || n > ds.len() {
        return Err(KoopmanError::InvalidInput(format!(
            "dictionary size must be in [2, {}], got {n}",
            ds.len()
        )));
    }
    let dim = ds.dim();
    let mut points = Vec::with_capacity(2 * ds.len() * dim);
    for x in [&ds.x0, &ds.x1] {
        for r in x.row_iter() {
            points.extend(r.iter());
        }
    }
    let (centers, report) = kmeans(&points, dim, n, seed)?;
    let scale = median_pair_distance(&centers, dim, seed);
    for i in 0..n {
        for j in i + 1..n {
            if dist2(&centers[i * dim..(i + 1) * dim], &centers[j * dim..(j + 1) * dim]) == 0.0 {
                return Err(KoopmanError::KMeans(format!("centers {i} and {j} coincide")));
            }
        }
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(KoopmanError::KMeans(format!("degenerate bandwidth {scale}")));
    }
    let dict = RbfDictionary {
        centers: DMatrix::from_row_slice(n, dim, &centers),
        scale,
    };
    Ok((dict, report))
}

impl RbfDictionary {
    pub fn len(&self) -> usize {
        self.centers.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.centers.ncols()
    }

    fn center_rows(&self) -> Vec<f64> {
        self.centers.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()).collect()
    }

    /// Feature row of a single state.
    pub fn features(&self, state: &[f64]) -> Vec<f64> {
        let c = self.center_rows();
        self.features_with(&c, state)
    }

    fn features_with(&self, centers: &[f64], state: &[f64]) -> Vec<f64> {
        let s = -0.5 / (self.scale * self.scale);
        centers
            .chunks_exact(self.dim())
            .map(|c| (s * dist2(state, c)).exp())
            .collect()
    }
}

/// `Psi(m, n) = exp(-|state_m - center_n|^2 / (2 scale^2))`.
pub fn eval_dictionary(dict: &RbfDictionary, states: &DMatrix<f64>) -> Result<DMatrix<f64>, KoopmanError> {
    if states.ncols() != dict.dim() {
        return Err(KoopmanError::InvalidInput(format!(
            "states have dimension {}, dictionary expects {}",
            states.ncols(),
            dict.dim()
        )));
    }
    let centers = dict.center_rows();
    let rows: Vec<f64> = (0..states.nrows())
        .into_par_iter()
        .flat_map_iter(|m| {
            let s: Vec<f64> = states.row(m).iter().copied().collect();
            dict.features_with(&centers, &s)
        })
        .collect();
    Ok(DMatrix::from_row_slice(states.nrows(), dict.len(), &rows))
}

/// `Psi(query) g` for each query row.
pub fn eigenfunction_field(dict: &RbfDictionary, g: &[C64], queries: &DMatrix<f64>) -> Result<Vec<C64>, KoopmanError> {
    if g.len() != dict.len() {
        return Err(KoopmanError::InvalidInput(format!(
            "coefficient vector has length {}, dictionary has {} functions",
            g.len(),
            dict.len()
        )));
    }
    let psi = eval_dictionary(dict, queries)?;
    Ok(psi
        .row_iter()
        .map(|r| r.iter().zip(g).map(|(p, c)| c * *p).sum())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_kmeans_returns_the_points() {
        let pts = [0.0, 0.0, 1.0, 0.0, 0.0, 3.0, 5.0, 5.0];
        let (c, rep) = kmeans(&pts, 2, 4, 7).unwrap();
        assert_eq!(rep.inertia, 0.0);
        let mut rows: Vec<[f64; 2]> = c.chunks(2).map(|r| [r[0], r[1]]).collect();
        rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(rows, vec![[0.0, 0.0], [0.0, 3.0], [1.0, 0.0], [5.0, 5.0]]);
    }

    #[test]
    fn two_blobs_are_separated() {
        let mut pts = Vec::new();
        for i in 0..50 {
            let e = 0.01 * (i as f64).sin();
            pts.extend([e, 0.02 * e]);
            pts.extend([10.0 + e, 10.0 - e]);
        }
        let (c, _) = kmeans(&pts, 2, 2, 1).unwrap();
        let mut xs = [c[0], c[2]];
        xs.sort_by(f64::total_cmp);
        assert!(xs[0].abs() < 0.05 && (xs[1] - 10.0).abs() < 0.05);
    }

    #[test]
    fn too_few_distinct_points() {
        let pts = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        assert!(matches!(kmeans(&pts, 2, 2, 0), Err(KoopmanError::KMeans(_))));
    }

    #[test]
    fn rbf_peak_and_bandwidth() {
        let dict = RbfDictionary {
            centers: DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 3.0, 4.0]),
            scale: 5.0,
        };
        let f = dict.features(&[0.0, 0.0]);
        assert_eq!(f[0], 1.0);
        assert!((f[1] - (-0.5f64).exp()).abs() < 1e-15);
        assert!(eval_dictionary(&dict, &DMatrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn median_of_all_pairs() {
        // pairwise distances 1, 2, 3
        let c = [0.0, 1.0, 3.0];
        assert_eq!(median_pair_distance(&c, 1, 0), 2.0);
    }
}
