//! Pointwise linearization along a base trajectory. At each base time the
//! model is frozen into a constant-coefficient delay system whose
//! characteristic matrix is a two-delay exponential pencil; its roots,
//! smallest-singular-value pseudospectra and stability indicators are
//! computed here.

mod pencil;
mod roots;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use pencil::{coupling, linearize_at, DelayPencil, Mat2};
pub use roots::{
    characteristic_roots, characteristic_roots_with_degree, collocation_matrix, RootSet, DEFAULT_DEGREE,
    DEFAULT_RE_MIN,
};

use crate::dde::{find_limit_cycle, CycleOptions, DdeError, LimitCycle, NondimParams};
use crate::numerics::{golden_section_min, svd_min, Axis, GridAxes, NumericsError, PseudospectrumGrid, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JacobianError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("requires a stable pencil, but the spectral abscissa is {alpha}")]
    NotStable { alpha: f64 },
    #[error("no characteristic roots found to the right of the search line")]
    NoRoots,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Dde(#[from] DdeError),
}

/// Spectral abscissa, distance to instability and non-normality index at one
/// base time. `d` and `index` are `None` where `alpha >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityIndicators {
    pub tau: f64,
    pub alpha: f64,
    pub d: Option<f64>,
    pub index: Option<f64>,
}

/// Default pseudospectrum window `[-6, 3] x [-15, 15]`, 301 points per side.
pub fn default_axes() -> GridAxes {
    GridAxes::new(Axis::new(-6.0, 3.0, 301), Axis::new(-15.0, 15.0, 301))
}

pub fn pencil_pseudospectrum(pencil: &DelayPencil, axes: &GridAxes) -> Result<PseudospectrumGrid, JacobianError> {
    Ok(PseudospectrumGrid::compute(axes, |z| {
        svd_min(&pencil.eval(z)).map(|s| s.sigma_min).unwrap_or(0.0)
    })?)
}

pub fn spectral_abscissa(pencil: &DelayPencil) -> Result<f64, JacobianError> {
    characteristic_roots(pencil, DEFAULT_RE_MIN)?
        .abscissa()
        .ok_or(JacobianError::NoRoots)
}

/// `min_s sigma_min(Delta(i s))` without the stability check. The pencil is
/// real so only `s >= 0` is scanned.
fn axis_distance(pencil: &DelayPencil) -> f64 {
    const SCAN: usize = 2000;
    let s_max = 2.0 * pencil.coefficient_norm() + 10.0;
    let f = |s: f64| pencil.sigma_min(C64::new(0.0, s));
    let ds = s_max / (SCAN - 1) as f64;
    let (k, _) = (0..SCAN)
        .map(|k| (k, f(ds * k as f64)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("scan is non-empty");
    let lo = ds * k.saturating_sub(1) as f64;
    let hi = (ds * (k + 1) as f64).min(s_max);
    golden_section_min(f, lo, hi, 1e-8).1
}

pub fn distance_to_instability(pencil: &DelayPencil) -> Result<f64, JacobianError> {
    let alpha = spectral_abscissa(pencil)?;
    if alpha >= 0.0 {
        return Err(JacobianError::NotStable { alpha });
    }
    Ok(axis_distance(pencil))
}

/// `-alpha / d`.
pub fn nonnormality_index(pencil: &DelayPencil) -> Result<f64, JacobianError> {
    let alpha = spectral_abscissa(pencil)?;
    if alpha >= 0.0 {
        return Err(JacobianError::NotStable { alpha });
    }
    Ok(-alpha / axis_distance(pencil))
}

pub fn indicators(pencil: &DelayPencil) -> Result<StabilityIndicators, JacobianError> {
    let alpha = spectral_abscissa(pencil)?;
    let (d, index) = if alpha < 0.0 {
        let d = axis_distance(pencil);
        (Some(d), Some(-alpha / d))
    } else {
        (None, None)
    };
    Ok(StabilityIndicators {
        tau: pencil.tau_base,
        alpha,
        d,
        index,
    })
}

/// Pencil at base time `tau` on the cycle, with periodic lag lookup.
pub fn pencil_on_cycle(cycle: &LimitCycle, tau: f64) -> Result<DelayPencil, JacobianError> {
    let p = &cycle.params;
    linearize_at(p, cycle.eval(tau - p.t2).x, cycle.eval(tau - p.t1).y, tau)
}

/// Base times `k omega / (n - 1)`, `k = 0..n`, so both ends of the period
/// are included.
pub fn sample_times(period: f64, n_samples: usize) -> Vec<f64> {
    (0..n_samples)
        .map(|k| period * k as f64 / (n_samples - 1) as f64)
        .collect()
}

pub fn sweep_trajectory(cycle: &LimitCycle, n_samples: usize) -> Result<Vec<StabilityIndicators>, JacobianError> {
    if n_samples < 16 {
        return Err(JacobianError::InvalidInput(format!("need at least 16 samples, got {n_samples}")));
    }
    sample_times(cycle.period, n_samples)
        .into_par_iter()
        .map(|tau| indicators(&pencil_on_cycle(cycle, tau)?))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HSweepRow {
    pub h: f64,
    pub max_alpha: Option<f64>,
    /// Maximum over the samples with `alpha < 0`.
    pub max_index: Option<f64>,
    pub error: Option<String>,
}

/// Maximum abscissa and index over the cycle for each `h`. A failure for one
/// value is recorded in its row and the sweep continues.
pub fn sweep_h(
    h_values: &[f64],
    template: &NondimParams,
    cycle_opts: &CycleOptions,
    n_samples: usize,
) -> Vec<HSweepRow> {
    h_values
        .iter()
        .map(|&h| {
            let run = || -> Result<(f64, Option<f64>), JacobianError> {
                let cycle = find_limit_cycle(&template.with_h(h), cycle_opts)?;
                let rows = sweep_trajectory(&cycle, n_samples)?;
                let max_alpha = rows.iter().map(|r| r.alpha).fold(f64::NEG_INFINITY, f64::max);
                let max_index = rows.iter().filter_map(|r| r.index).reduce(f64::max);
                Ok((max_alpha, max_index))
            };
            match run() {
                Ok((a, i)) => HSweepRow {
                    h,
                    max_alpha: Some(a),
                    max_index: i,
                    error: None,
                },
                Err(e) => {
                    log::warn!("h = {h}: {e}");
                    HSweepRow {
                        h,
                        max_alpha: None,
                        max_index: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `tau,alpha,d,index`; absent values are empty fields.
pub fn write_indicators_csv<W: Write>(rows: &[StabilityIndicators], mut out: W) -> std::io::Result<()> {
    writeln!(out, "tau,alpha,d,index")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.tau, r.alpha, opt(r.d), opt(r.index))?;
    }
    Ok(())
}

/// `h,max_alpha,max_index`.
pub fn write_h_sweep_csv<W: Write>(rows: &[HSweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "h,max_alpha,max_index")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.h, opt(r.max_alpha), opt(r.max_index))?;
    }
    Ok(())
}
