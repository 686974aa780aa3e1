use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::KoopmanError;
use crate::dde::{integrate, History, NondimParams, State, Trajectory};

/// Delay embedding and sampling of the snapshot data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingConfig {
    /// Number of `(x, y)` blocks; the embedded state has `2 d` entries.
    pub d: usize,
    /// Sampling interval, normally a tenth of the cycle period.
    pub delta_tau: f64,
    /// `[x_min, x_max]` of the constant initial histories.
    pub box_x: [f64; 2],
    /// `[y_min, y_max]` of the constant initial histories.
    pub box_y: [f64; 2],
    pub n_init: usize,
    pub seed: u64,
    pub step: f64,
}

impl EmbeddingConfig {
    /// Defaults with `delta_tau = period / 10`.
    pub fn for_period(period: f64) -> Self {
        Self {
            d: 10,
            delta_tau: period / 10.0,
            box_x: [-3.0, 5.0],
            box_y: [-1.0, 8.0],
            n_init: 10_000,
            seed: 0,
            step: 1e-3,
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.d
    }

    pub fn validate(&self) -> Result<(), KoopmanError> {
        if self.d < 2 {
            return Err(KoopmanError::InvalidInput(format!("embedding needs d >= 2, got {}", self.d)));
        }
        if !(self.delta_tau > 0.0) || !self.delta_tau.is_finite() {
            return Err(KoopmanError::InvalidInput(format!("delta_tau must be positive, got {}", self.delta_tau)));
        }
        if !(self.box_x[0] < self.box_x[1] && self.box_y[0] < self.box_y[1]) {
            return Err(KoopmanError::InvalidInput("initial-condition box is empty".into()));
        }
        if self.n_init == 0 {
            return Err(KoopmanError::InvalidInput("n_init must be positive".into()));
        }
        Ok(())
    }
}

/// `(x(t), y(t), x(t - t1), y(t - t1), ..., x(t - (d-1) t1), y(t - (d-1) t1))`.
pub fn embed(eval: impl Fn(f64) -> State, t: f64, t1: f64, d: usize) -> Vec<f64> {
    (0..d)
        .flat_map(|k| {
            let s = eval(t - k as f64 * t1);
            [s.x, s.y]
        })
        .collect()
}

/// Row-aligned snapshot pairs: row `m` of `x1` is the image of row `m` of
/// `x0` after one sampling interval.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotDataset {
    pub x0: DMatrix<f64>,
    pub x1: DMatrix<f64>,
    pub config: EmbeddingConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetSidecar {
    config: EmbeddingConfig,
    m: usize,
}

impl SnapshotDataset {
    pub fn len(&self) -> usize {
        self.x0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x0.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x0.ncols()
    }

    /// Writes `<path>` as CSV (`x0_0..,x1_0..` columns) and `<path>.json`.
    pub fn save(&self, path: &Path) -> Result<(), KoopmanError> {
        let mut out = BufWriter::new(File::create(path)?);
        let n = self.dim();
        let header: Vec<String> = (0..n)
            .map(|j| format!("x0_{j}"))
            .chain((0..n).map(|j| format!("x1_{j}")))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for m in 0..self.len() {
            let row: Vec<String> = self
                .x0
                .row(m)
                .iter()
                .chain(self.x1.row(m).iter())
                .map(|v| format!("{v:e}"))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        out.flush()?;
        let side = DatasetSidecar {
            config: self.config.clone(),
            m: self.len(),
        };
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, KoopmanError> {
        let side: DatasetSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
        let n = side.config.dim();
        let reader = BufReader::new(File::open(path)?);
        let mut rows0 = Vec::with_capacity(side.m * n);
        let mut rows1 = Vec::with_capacity(side.m * n);
        for (k, line) in reader.lines().enumerate() {
            let line = line?;
            if k == 0 || line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| KoopmanError::InvalidInput(format!("line {}: {e}", k + 1)))?;
            if vals.len() != 2 * n {
                return Err(KoopmanError::InvalidInput(format!(
                    "line {}: expected {} fields, got {}",
                    k + 1,
                    2 * n,
                    vals.len()
                )));
            }
            rows0.extend_from_slice(&vals[..n]);
            rows1.extend_from_slice(&vals[n..]);
        }
        let m = rows0.len() / n;
        if m != side.m {
            return Err(KoopmanError::InvalidInput(format!("sidecar declares {} rows, file has {m}", side.m)));
        }
        Ok(Self {
            x0: DMatrix::from_row_slice(m, n, &rows0),
            x1: DMatrix::from_row_slice(m, n, &rows1),
            config: side.config,
        })
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Embedded states at times `(d - 1 + n) delta_tau`, `n = 0, 1, 2`.
pub fn length_three_trajectory(traj: &Trajectory, p: &NondimParams, cfg: &EmbeddingConfig) -> [Vec<f64>; 3] {
    let base = (cfg.d - 1) as f64 * cfg.delta_tau;
    [0, 1, 2].map(|n| embed(|t| traj.eval(t), base + n as f64 * cfg.delta_tau, p.t1, cfg.d))
}

/// Integrates from `n_init` uniformly drawn constant histories and emits the
/// two snapshot pairs of each length-three trajectory. Failed integrations
/// are skipped and logged.
pub fn generate_snapshots(p: &NondimParams, cfg: &EmbeddingConfig) -> Result<SnapshotDataset, KoopmanError> {
    p.validate()?;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let starts: Vec<State> = (0..cfg.n_init)
        .map(|_| {
            let x = rng.gen_range(cfg.box_x[0]..cfg.box_x[1]);
            let y = rng.gen_range(cfg.box_y[0]..cfg.box_y[1]);
            State::new(x, y)
        })
        .collect();
    let t_end = (cfg.d + 1) as f64 * cfg.delta_tau;
    let triples: Vec<Option<[Vec<f64>; 3]>> = starts
        .par_iter()
        .enumerate()
        .map(|(i, &s)| match integrate(p, History::Constant(s), 0.0, t_end, cfg.step) {
            Ok(traj) => Some(length_three_trajectory(&traj, p, cfg)),
            Err(e) => {
                log::warn!("snapshot trajectory {i} from ({}, {}) skipped: {e}", s.x, s.y);
                None
            }
        })
        .collect();
    let n = cfg.dim();
    let mut rows0 = Vec::with_capacity(2 * cfg.n_init * n);
    let mut rows1 = Vec::with_capacity(2 * cfg.n_init * n);
    for [a, b, c] in triples.into_iter().flatten() {
        rows0.extend_from_slice(&a);
        rows1.extend_from_slice(&b);
        rows0.extend_from_slice(&b);
        rows1.extend_from_slice(&c);
    }
    let m = rows0.len() / n;
    if m == 0 {
        return Err(KoopmanError::EmptyDataset);
    }
    Ok(SnapshotDataset {
        x0: DMatrix::from_row_slice(m, n, &rows0),
        x1: DMatrix::from_row_slice(m, n, &rows1),
        config: cfg.clone(),
    })
}
