//! Period map of the linearization about the limit cycle, discretized on
//! piecewise-affine hat functions over the history interval. Column `j` of
//! `T` holds the nodal values, one period later, of the solution started
//! from the `j`-th basis history.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dde::{
    find_limit_cycle, integrate, CycleOptions, DdeError, DelaySystem, History, LimitCycle, NondimParams, State,
};
use crate::jacobian::coupling;
use crate::numerics::{
    eig_dense, kreiss_constant, resolvent_inf_norm, ComplexMatrix, GridAxes, KreissOptions, KreissResult,
    NumericsError, PseudospectrumGrid, C64,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FloquetError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("integration of basis column {index} failed: {source}")]
    Column { index: usize, source: DdeError },
    #[error("Kreiss threshold c = {c} does not exceed the spectral radius {radius}")]
    ThresholdInsideSpectrum { c: f64, radius: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Dde(#[from] DdeError),
}

/// `N` uniform nodes from `-max_delay` to `0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HatBasisGrid {
    s_points: Vec<f64>,
}

impl HatBasisGrid {
    pub fn new(max_delay: f64, n: usize) -> Result<Self, FloquetError> {
        if n < 8 {
            return Err(FloquetError::InvalidInput(format!("hat grid needs N >= 8, got {n}")));
        }
        if !(max_delay > 0.0) || !max_delay.is_finite() {
            return Err(FloquetError::InvalidInput(format!("history length must be positive, got {max_delay}")));
        }
        let h = max_delay / (n - 1) as f64;
        let s_points = (0..n)
            .map(|i| if i + 1 == n { 0.0 } else { -max_delay + h * i as f64 })
            .collect();
        Ok(Self { s_points })
    }

    pub fn points(&self) -> &[f64] {
        &self.s_points
    }

    pub fn len(&self) -> usize {
        self.s_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_points.is_empty()
    }

    /// Piecewise-affine history whose nodal values are `v = (x nodes, y nodes)`.
    pub fn history(&self, v: &[f64]) -> History {
        let n = self.len();
        History::PiecewiseLinear {
            times: self.s_points.clone(),
            states: (0..n).map(|i| State::new(v[i], v[n + i])).collect(),
        }
    }
}

/// Linear periodic delay system about a cycle, time measured from the cycle's
/// anchor (ACTH peak).
pub struct PeriodicLinearization<'a> {
    cycle: &'a LimitCycle,
}

impl<'a> PeriodicLinearization<'a> {
    pub fn new(cycle: &'a LimitCycle) -> Self {
        Self { cycle }
    }

    /// `(B12(t), C21(t))` from the cycle's lagged values.
    pub fn coefficients(&self, t: f64) -> (f64, f64) {
        let p = &self.cycle.params;
        coupling(p, self.cycle.eval(t - p.t2).x, self.cycle.eval(t - p.t1).y)
    }
}

impl DelaySystem for PeriodicLinearization<'_> {
    fn delays(&self) -> (f64, f64) {
        (self.cycle.params.t1, self.cycle.params.t2)
    }

    fn derivative(&self, t: f64, current: State, lag1: State, lag2: State) -> State {
        let (b12, c21) = self.coefficients(t);
        State::new(-self.cycle.params.c1 * current.x + b12 * lag1.y, -current.y + c21 * lag2.x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonodromyMatrix {
    pub t: ComplexMatrix,
    pub grid: HatBasisGrid,
    pub period: f64,
    pub h: f64,
    /// Initial time in the cycle's own clock.
    pub anchor: f64,
}

impl MonodromyMatrix {
    pub fn dim(&self) -> usize {
        self.t.rows()
    }

    /// Writes `T` as a dense real CSV without header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.dim();
        for i in 0..n {
            let row: Vec<String> = self.t.row(i).iter().map(|z| z.re.to_string()).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Period map of any delay system over `[0, period]` on an `n`-point hat grid.
pub fn assemble_period_map<S: DelaySystem + ?Sized>(
    system: &S,
    period: f64,
    n: usize,
    step: f64,
) -> Result<(ComplexMatrix, HatBasisGrid), FloquetError> {
    let (d1, d2) = system.delays();
    let grid = HatBasisGrid::new(d1.max(d2), n)?;
    let columns: Vec<Vec<f64>> = (0..2 * n)
        .into_par_iter()
        .map(|j| {
            let mut v = vec![0.0; 2 * n];
            v[j] = 1.0;
            let traj = integrate(system, grid.history(&v), 0.0, period, step)
                .map_err(|source| FloquetError::Column { index: j, source })?;
            let (xs, ys): (Vec<f64>, Vec<f64>) = grid
                .points()
                .iter()
                .map(|&s| {
                    let u = traj.eval(period + s);
                    (u.x, u.y)
                })
                .unzip();
            Ok([xs, ys].concat())
        })
        .collect::<Result<_, FloquetError>>()?;
    let t = ComplexMatrix::from_fn(2 * n, 2 * n, |i, j| C64::new(columns[j][i], 0.0));
    Ok((t, grid))
}

/// Hat-function discretization of the period map about `cycle`, with `n`
/// nodes per component (matrix size `2n`).
pub fn assemble_monodromy(cycle: &LimitCycle, n: usize, step: f64) -> Result<MonodromyMatrix, FloquetError> {
    if !(cycle.period > 0.0) {
        return Err(FloquetError::InvalidInput("cycle period must be positive".into()));
    }
    let system = PeriodicLinearization::new(cycle);
    let (t, grid) = assemble_period_map(&system, cycle.period, n, step)?;
    Ok(MonodromyMatrix {
        t,
        grid,
        period: cycle.period,
        h: cycle.params.h,
        anchor: cycle.anchor_phase,
    })
}

/// Multipliers sorted by decreasing modulus.
pub fn floquet_spectrum(m: &MonodromyMatrix) -> Result<Vec<C64>, FloquetError> {
    let mut values: Vec<C64> = eig_dense(&m.t)?.into_iter().map(|e| e.value).collect();
    values.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    Ok(values)
}

/// Reciprocal resolvent norm `1 / ||(T - z)^{-1}||_inf` on a grid.
pub fn floquet_pseudospectrum(m: &MonodromyMatrix, axes: &GridAxes) -> Result<PseudospectrumGrid, FloquetError> {
    Ok(PseudospectrumGrid::compute(axes, |z| {
        resolvent_inf_norm(&m.t, z).map(|r| 1.0 / r).unwrap_or(0.0)
    })?)
}

pub fn default_axes() -> GridAxes {
    GridAxes::centered(1.5, 201)
}

pub fn floquet_kreiss(m: &MonodromyMatrix, c: f64, opts: &KreissOptions) -> Result<KreissResult, FloquetError> {
    let radius = floquet_spectrum(m)?.first().map(|z| z.norm()).unwrap_or(0.0);
    if !(c > radius) {
        return Err(FloquetError::ThresholdInsideSpectrum { c, radius });
    }
    Ok(kreiss_constant(
        |z| resolvent_inf_norm(&m.t, z).unwrap_or(f64::INFINITY),
        c,
        opts,
    )?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloquetOptions {
    pub n: usize,
    pub step: f64,
    pub c: f64,
}

impl Default for FloquetOptions {
    fn default() -> Self {
        Self { n: 50, step: 1e-3, c: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloquetSweepRow {
    pub h: f64,
    pub dominant: Option<C64>,
    pub kreiss: Option<f64>,
    pub error: Option<String>,
}

/// Dominant multiplier and Kreiss constant per `h`, re-detecting the cycle
/// (and its ACTH-peak anchor) each time. Failures are recorded per row.
pub fn floquet_sweep_h(
    h_values: &[f64],
    template: &NondimParams,
    cycle_opts: &CycleOptions,
    opts: &FloquetOptions,
    kreiss: &KreissOptions,
) -> Vec<FloquetSweepRow> {
    h_values
        .iter()
        .map(|&h| {
            let run = || -> Result<(C64, f64), FloquetError> {
                let cycle = find_limit_cycle(&template.with_h(h), cycle_opts)?;
                let m = assemble_monodromy(&cycle, opts.n, opts.step)?;
                let dominant = floquet_spectrum(&m)?[0];
                let k = floquet_kreiss(&m, opts.c, kreiss)?;
                Ok((dominant, k.value))
            };
            match run() {
                Ok((d, k)) => FloquetSweepRow {
                    h,
                    dominant: Some(d),
                    kreiss: Some(k),
                    error: None,
                },
                Err(e) => {
                    log::warn!("h = {h}: {e}");
                    FloquetSweepRow {
                        h,
                        dominant: None,
                        kreiss: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect()
}

/// `h,dominant,kreiss`; the dominant multiplier is written by its real part.
pub fn write_sweep_csv<W: Write>(rows: &[FloquetSweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "h,dominant,kreiss")?;
    for r in rows {
        let d = r.dominant.map(|z| z.re.to_string()).unwrap_or_default();
        let k = r.kreiss.map(|v| v.to_string()).unwrap_or_default();
        writeln!(out, "{},{d},{k}", r.h)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decoupled {
        c1: f64,
        delay: f64,
    }

    impl DelaySystem for Decoupled {
        fn delays(&self) -> (f64, f64) {
            (self.delay, self.delay)
        }
        fn derivative(&self, _t: f64, c: State, _l1: State, _l2: State) -> State {
            State::new(-self.c1 * c.x, -c.y)
        }
    }

    #[test]
    fn decoupled_multipliers_are_exponential_decays() {
        let sys = Decoupled { c1: 4.0, delay: 0.15 };
        let w = 2.0;
        let (t, _) = assemble_period_map(&sys, w, 12, 1e-3).unwrap();
        let mut ev: Vec<C64> = eig_dense(&t).unwrap().into_iter().map(|e| e.value).collect();
        ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
        assert!((ev[0].re - (-w).exp()).abs() < 1e-9, "{:?}", ev[0]);
        assert!((ev[1].re - (-4.0 * w).exp()).abs() < 1e-9, "{:?}", ev[1]);
        assert!(ev[2].norm() < 1e-12);
    }

    #[test]
    fn hat_grid_endpoints() {
        let g = HatBasisGrid::new(0.15, 50).unwrap();
        assert_eq!(g.points()[0], -0.15);
        assert_eq!(g.points()[49], 0.0);
        assert!(HatBasisGrid::new(0.15, 7).is_err());
    }

    #[test]
    fn sweep_csv_format() {
        let rows = [
            FloquetSweepRow { h: 4.0, dominant: Some(C64::new(0.99, 0.0)), kreiss: Some(7.0), error: None },
            FloquetSweepRow { h: 30.0, dominant: None, kreiss: None, error: Some("x".into()) },
        ];
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "h,dominant,kreiss\n4,0.99,7\n30,,\n");
    }
}
