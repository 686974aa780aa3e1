//! Koopman operator of the delay-embedded model sampled at a fixed interval,
//! approximated on a Gaussian RBF dictionary with residual-checked DMD.

mod dictionary;
mod embedding;
mod resdmd;

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dictionary::{
    build_dictionary, eigenfunction_field, eval_dictionary, kmeans, median_pair_distance, KMeansReport, RbfDictionary,
};
pub use embedding::{embed, generate_snapshots, length_three_trajectory, EmbeddingConfig, SnapshotDataset};
pub use resdmd::{
    assemble_matrices, dmd_eigs, koopman_kreiss, koopman_pseudospectrum, residual, DmdEigenpair, ResDmdMatrices,
    WhitenedModel, DEFAULT_RANK_TOL,
};

use crate::dde::{find_limit_cycle, CycleOptions, DdeError, LimitCycle, NondimParams};
use crate::numerics::{Axis, GridAxes, KreissOptions, NumericsError, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KoopmanError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no snapshot trajectory could be integrated")]
    EmptyDataset,
    #[error("k-means failed: {0}")]
    KMeans(String),
    #[error("Gram matrix is numerically zero")]
    ZeroGram,
    #[error("Kreiss threshold c = {c} does not exceed the retained spectral radius {radius}; use a larger c")]
    SpectralRadius { c: f64, radius: f64 },
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Dde(#[from] DdeError),
}

impl From<std::io::Error> for KoopmanError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<serde_json::Error> for KoopmanError {
    fn from(e: serde_json::Error) -> Self {
        Self::Io(e.to_string())
    }
}

/// Default pseudospectrum window `[-1.5, 1.5]^2`, 201 points per side.
pub fn default_axes() -> GridAxes {
    GridAxes::centered(1.5, 201)
}

/// Pipeline settings; the sampling interval is `period / samples_per_period`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KoopmanOptions {
    pub d: usize,
    pub samples_per_period: f64,
    pub box_x: [f64; 2],
    pub box_y: [f64; 2],
    pub n_init: usize,
    pub n_centers: usize,
    pub rank_tol: f64,
    pub seed: u64,
    pub step: f64,
}

impl Default for KoopmanOptions {
    fn default() -> Self {
        let e = EmbeddingConfig::for_period(1.0);
        Self {
            d: e.d,
            samples_per_period: 10.0,
            box_x: e.box_x,
            box_y: e.box_y,
            n_init: e.n_init,
            n_centers: 400,
            rank_tol: DEFAULT_RANK_TOL,
            seed: e.seed,
            step: e.step,
        }
    }
}

impl KoopmanOptions {
    pub fn embedding(&self, period: f64) -> EmbeddingConfig {
        EmbeddingConfig {
            d: self.d,
            delta_tau: period / self.samples_per_period,
            box_x: self.box_x,
            box_y: self.box_y,
            n_init: self.n_init,
            seed: self.seed,
            step: self.step,
        }
    }
}

/// Everything produced by one pass of the pipeline.
#[derive(Debug, Clone)]
pub struct KoopmanModel {
    pub dictionary: RbfDictionary,
    pub kmeans: KMeansReport,
    pub matrices: ResDmdMatrices,
    pub whitened: WhitenedModel,
    pub eigenpairs: Vec<DmdEigenpair>,
}

impl KoopmanModel {
    /// Dictionary, matrices and eigenpairs from a snapshot dataset.
    pub fn fit(ds: &SnapshotDataset, n_centers: usize, seed: u64, rank_tol: f64) -> Result<Self, KoopmanError> {
        let (dictionary, kmeans) = build_dictionary(ds, n_centers, seed)?;
        let psi0 = eval_dictionary(&dictionary, &ds.x0)?;
        let psi1 = eval_dictionary(&dictionary, &ds.x1)?;
        let matrices = assemble_matrices(&psi0, &psi1)?;
        let whitened = WhitenedModel::new(&matrices, rank_tol)?;
        let eigenpairs = resdmd::eigenpairs_of(&whitened, &matrices)?;
        log::info!(
            "koopman fit: M = {}, N = {n_centers}, retained rank {}, k-means {} iterations",
            ds.len(),
            whitened.rank(),
            kmeans.iterations
        );
        Ok(Self {
            dictionary,
            kmeans,
            matrices,
            whitened,
            eigenpairs,
        })
    }

    /// Eigenpairs with `|lambda|` in `[1 - band, 1 + band]` and residual at
    /// most `max_residual`, sorted by phase.
    pub fn circle_eigenpairs(&self, band: f64, max_residual: f64) -> Vec<&DmdEigenpair> {
        let mut v: Vec<&DmdEigenpair> = self
            .eigenpairs
            .iter()
            .filter(|p| (p.value.norm() - 1.0).abs() <= band && p.residual <= max_residual)
            .collect();
        v.sort_by(|a, b| a.value.arg().total_cmp(&b.value.arg()));
        v
    }
}

/// Snapshots and fit for one parameter set with a known cycle period.
pub fn run_pipeline(
    p: &NondimParams,
    period: f64,
    opts: &KoopmanOptions,
) -> Result<(SnapshotDataset, KoopmanModel), KoopmanError> {
    let ds = generate_snapshots(p, &opts.embedding(period))?;
    let model = KoopmanModel::fit(&ds, opts.n_centers, opts.seed, opts.rank_tol)?;
    Ok((ds, model))
}

/// Embedded states along the cycle at `n` equally spaced phases.
pub fn cycle_queries(cycle: &LimitCycle, d: usize, n: usize) -> DMatrix<f64> {
    let t1 = cycle.params.t1;
    let rows: Vec<f64> = (0..n)
        .flat_map(|k| embed(|t| cycle.eval(t), cycle.period * k as f64 / n as f64, t1, d))
        .collect();
    DMatrix::from_row_slice(n, 2 * d, &rows)
}

/// Queries over a grid in block `block` of the embedding. The other blocks
/// are filled from the cycle at the phase whose block-`block` point is
/// nearest to the grid point.
pub fn block_queries(cycle: &LimitCycle, d: usize, block: usize, axes: &GridAxes) -> Result<DMatrix<f64>, KoopmanError> {
    if block >= d {
        return Err(KoopmanError::InvalidInput(format!("block {block} out of range for d = {d}")));
    }
    axes.re.validate()?;
    axes.im.validate()?;
    const PHASES: usize = 512;
    let on_cycle = cycle_queries(cycle, d, PHASES);
    let xs = axes.re.samples();
    let ys = axes.im.samples();
    let mut rows = Vec::with_capacity(xs.len() * ys.len() * 2 * d);
    for &y in &ys {
        for &x in &xs {
            let k = (0..PHASES)
                .min_by(|&a, &b| {
                    let da = (on_cycle[(a, 2 * block)] - x).powi(2) + (on_cycle[(a, 2 * block + 1)] - y).powi(2);
                    let db = (on_cycle[(b, 2 * block)] - x).powi(2) + (on_cycle[(b, 2 * block + 1)] - y).powi(2);
                    da.total_cmp(&db)
                })
                .expect("phases are non-empty");
            let mut r: Vec<f64> = on_cycle.row(k).iter().copied().collect();
            r[2 * block] = x;
            r[2 * block + 1] = y;
            rows.extend(r);
        }
    }
    Ok(DMatrix::from_row_slice(xs.len() * ys.len(), 2 * d, &rows))
}

/// `|<a, b>| / (|a| |b|)`.
pub fn normalized_correlation(a: &[C64], b: &[C64]) -> f64 {
    let ip: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let na: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    ip.norm() / (na * nb)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KoopmanSweepRow {
    pub h: f64,
    pub c: f64,
    pub kreiss: Option<f64>,
    pub rank: Option<usize>,
    pub error: Option<String>,
}

/// Kreiss constant of a freshly fitted model for each `h`; the dictionary is
/// rebuilt per value since the period and sampling interval change.
pub fn koopman_sweep_h(
    h_values: &[f64],
    template: &NondimParams,
    cycle_opts: &CycleOptions,
    opts: &KoopmanOptions,
    c: f64,
    kreiss: &KreissOptions,
) -> Vec<KoopmanSweepRow> {
    h_values
        .iter()
        .map(|&h| {
            let run = || -> Result<(f64, usize), KoopmanError> {
                let p = template.with_h(h);
                let cycle = find_limit_cycle(&p, cycle_opts)?;
                let (_, model) = run_pipeline(&p, cycle.period, opts)?;
                let k = koopman_kreiss(&model.whitened, c, kreiss)?;
                Ok((k.value, model.whitened.rank()))
            };
            match run() {
                Ok((k, r)) => KoopmanSweepRow {
                    h,
                    c,
                    kreiss: Some(k),
                    rank: Some(r),
                    error: None,
                },
                Err(e) => {
                    log::warn!("h = {h}: {e}");
                    KoopmanSweepRow {
                        h,
                        c,
                        kreiss: None,
                        rank: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect()
}

/// `h,c,kreiss`.
pub fn write_sweep_csv<W: Write>(rows: &[KoopmanSweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "h,c,kreiss")?;
    for r in rows {
        let k = r.kreiss.map(|v| v.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{k}", r.h, r.c)?;
    }
    Ok(())
}

/// `re,im,residual`.
pub fn write_eigs_csv<W: Write>(pairs: &[DmdEigenpair], mut out: W) -> std::io::Result<()> {
    writeln!(out, "re,im,residual")?;
    for p in pairs {
        writeln!(out, "{},{},{}", p.value.re, p.value.im, p.residual)?;
    }
    Ok(())
}

/// `x,y,re,im,abs` over the grid of [`block_queries`].
pub fn write_field_csv<W: Write>(axes: &GridAxes, values: &[C64], mut out: W) -> std::io::Result<()> {
    writeln!(out, "x,y,re,im,abs")?;
    let xs = axes.re.samples();
    let ys = axes.im.samples();
    for (j, y) in ys.iter().enumerate() {
        for (i, x) in xs.iter().enumerate() {
            let v = values[j * xs.len() + i];
            writeln!(out, "{x},{y},{},{},{}", v.re, v.im, v.norm())?;
        }
    }
    Ok(())
}

/// Default Kreiss search for the Koopman sweep: a coarser polar grid than
/// the Floquet one, since each evaluation is an eigenproblem of the
/// retained rank.
pub fn default_kreiss_options(c: f64) -> KreissOptions {
    KreissOptions {
        radial: 24,
        angular: 32,
        r_max: c + 10.0,
    }
}

/// Field window for block `k`: the cycle's range in that block with a
/// margin of half its extent.
pub fn block_axes(cycle: &LimitCycle, n: usize) -> GridAxes {
    let ((x0, x1), (y0, y1)) = cycle.ranges();
    let (mx, my) = (0.5 * (x1 - x0), 0.5 * (y1 - y0));
    GridAxes::new(Axis::new(x0 - mx, x1 + mx, n), Axis::new(y0 - my, y1 + my, n))
}
