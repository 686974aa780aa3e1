use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{integrate, DdeError, History, NondimParams, State, Trajectory};

/// Default constant history used to start every cycle search.
pub const DEFAULT_INITIAL_STATE: State = State::new(0.8858, 1.7461);

const PERIOD_TOL: f64 = 1e-3;
const CLOSURE_TOL: f64 = 1e-6;
const MAX_CORRECTIONS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CycleOptions {
    /// Time discarded before peak detection.
    pub transient: f64,
    /// Length of the window in which successive ACTH maxima are located.
    pub detect_window: f64,
    pub step: f64,
}

impl Default for CycleOptions {
    fn default() -> Self {
        Self {
            transient: 200.0,
            detect_window: 20.0,
            step: 1e-3,
        }
    }
}

/// One period of the periodic orbit, anchored at an ACTH maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitCycle {
    pub params: NondimParams,
    pub period: f64,
    /// Solution on `[0, period]`; its history is the orbit on
    /// `[-max_delay, 0]`.
    pub orbit: Trajectory,
    /// Position of the ACTH maximum inside the period (always `0`).
    pub anchor_phase: f64,
}

impl LimitCycle {
    /// State at any time, extended periodically.
    pub fn eval(&self, t: f64) -> State {
        self.orbit.eval(t.rem_euclid(self.period).min(self.period))
    }

    /// Exact derivative from the right-hand side with periodic lags.
    pub fn deriv(&self, t: f64) -> State {
        let p = &self.params;
        self.params.rhs(self.eval(t), self.eval(t - p.t2).x, self.eval(t - p.t1).y)
    }

    pub fn closure_defect(&self) -> f64 {
        (self.orbit.eval(0.0) - self.orbit.final_state()).norm_inf()
    }

    /// Dense history segment on `[-max_delay, 0]` taken from the orbit.
    pub fn history(&self, step: f64) -> History {
        let d = self.params.max_delay().max(step);
        let n = ((d / step).ceil() as usize).max(1);
        let h = d / n as f64;
        let mut states = Vec::with_capacity(n + 1);
        let mut derivs = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let t = -d + h * k as f64;
            states.push(self.eval(t));
            derivs.push(self.deriv(t));
        }
        History::Hermite(super::HermiteSamples::new(-d, h, states, derivs))
    }

    /// `(min, max)` of `x` and of `y` over the orbit nodes.
    pub fn ranges(&self) -> ((f64, f64), (f64, f64)) {
        let mut rx = (f64::INFINITY, f64::NEG_INFINITY);
        let mut ry = rx;
        for (_, s, _) in self.orbit.nodes() {
            rx = (rx.0.min(s.x), rx.1.max(s.x));
            ry = (ry.0.min(s.y), ry.1.max(s.y));
        }
        (rx, ry)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        self.orbit.write_csv(out)
    }
}

/// Peak times of `x` inside `[t_lo, t_hi]`, above the midline of that window,
/// refined to roots of `x'`. Returns the peaks and the half-amplitude.
fn find_peaks(p: &NondimParams, traj: &Trajectory, t_lo: f64, t_hi: f64) -> (Vec<f64>, f64) {
    let nodes: Vec<(f64, State)> = traj
        .nodes()
        .filter(|(t, _, _)| *t >= t_lo && *t <= t_hi)
        .map(|(t, s, _)| (t, s))
        .collect();
    if nodes.len() < 3 {
        return (Vec::new(), 0.0);
    }
    let (lo, hi) = nodes
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (_, s)| (a.min(s.x), b.max(s.x)));
    let amplitude = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let h = traj.step();
    let xdot = |t: f64| p.rhs(traj.eval(t), traj.eval(t - p.t2).x, traj.eval(t - p.t1).y).x;
    let mut peaks = Vec::new();
    for w in nodes.windows(3) {
        let (x0, x1, x2) = (w[0].1.x, w[1].1.x, w[2].1.x);
        if !(x1 > x0 && x1 >= x2 && x1 > mid) {
            continue;
        }
        // parabola through the three samples
        let denom = x0 - 2.0 * x1 + x2;
        let mut t = if denom < 0.0 { w[1].0 + 0.5 * h * (x0 - x2) / denom } else { w[1].0 };
        for _ in 0..20 {
            let g = xdot(t);
            let dg = (xdot(t + 1e-6) - xdot(t - 1e-6)) / 2e-6;
            if !(dg < 0.0) {
                break;
            }
            let dt = (g / dg).clamp(-h, h);
            t -= dt;
            if dt.abs() < 1e-13 {
                break;
            }
        }
        if peaks.last().is_none_or(|&last: &f64| t - last > 2.0 * h) {
            peaks.push(t);
        }
    }
    (peaks, amplitude)
}

/// Locates the stable periodic orbit: discards a transient, estimates the
/// period from successive ACTH maxima, then repeatedly re-integrates one
/// period from the last maximum until the return map closes to `1e-6`.
pub fn find_limit_cycle(p: &NondimParams, opts: &CycleOptions) -> Result<LimitCycle, DdeError> {
    p.validate()?;
    if !(opts.transient >= 0.0) || !(opts.detect_window > 0.0) {
        return Err(DdeError::InvalidInput(
            "transient must be nonnegative and detect_window positive".into(),
        ));
    }
    let t_end = opts.transient + opts.detect_window;
    let traj = integrate(p, History::Constant(DEFAULT_INITIAL_STATE), 0.0, t_end, opts.step)?;
    let (peaks, amplitude) = find_peaks(p, &traj, opts.transient, t_end);
    if amplitude < 1e-6 || peaks.len() < 3 {
        return Err(DdeError::NoLimitCycle { amplitude });
    }
    let periods: Vec<f64> = peaks.windows(2).map(|w| w[1] - w[0]).collect();
    let spread = periods
        .windows(2)
        .map(|w| ((w[1] - w[0]) / w[1]).abs())
        .fold(0.0, f64::max);
    if spread > PERIOD_TOL {
        return Err(DdeError::PeriodNotConverged { spread });
    }
    log::debug!("cycle detection: {} peaks, spread {spread:e}", peaks.len());

    let delay = p.max_delay().max(opts.step);
    let mut anchor = *peaks.last().expect("at least three peaks");
    let mut period = *periods.last().expect("at least two periods");
    let mut source = traj;
    let mut defect = f64::INFINITY;
    for iter in 0..MAX_CORRECTIONS {
        let segment = source.resample_segment(p, anchor - delay, anchor, opts.step, 0.0);
        let start = segment.states().last().copied().expect("non-empty segment");
        let run = integrate(p, History::Hermite(segment), 0.0, 1.25 * period, opts.step)?;
        let (returns, _) = find_peaks(p, &run, 0.5 * period, 1.25 * period);
        let next = returns
            .iter()
            .copied()
            .min_by(|a, b| (a - period).abs().total_cmp(&(b - period).abs()))
            .ok_or(DdeError::NoLimitCycle { amplitude })?;
        defect = (run.eval(next) - start).norm_inf();
        log::debug!("cycle correction {iter}: period {next}, defect {defect:e}");
        period = next;
        anchor = next;
        source = run;
        if defect <= CLOSURE_TOL {
            break;
        }
    }
    if defect > CLOSURE_TOL {
        return Err(DdeError::ClosureDefect { defect });
    }
    let segment = source.resample_segment(p, anchor - delay, anchor, opts.step, 0.0);
    let orbit = integrate(p, History::Hermite(segment), 0.0, period, opts.step)?;
    Ok(LimitCycle {
        params: *p,
        period,
        orbit,
        anchor_phase: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> CycleOptions {
        CycleOptions {
            transient: 60.0,
            detect_window: 10.0,
            step: 1e-3,
        }
    }

    #[test]
    fn default_cycle_closes() {
        let c = find_limit_cycle(&NondimParams::default(), &quick()).unwrap();
        assert!(c.period > 0.0);
        assert!(c.closure_defect() <= 1e-5, "{}", c.closure_defect());
        // anchor is an ACTH maximum
        assert!(c.deriv(0.0).x.abs() < 1e-6);
        let xmax = c.orbit.nodes().map(|(_, s, _)| s.x).fold(f64::NEG_INFINITY, f64::max);
        assert!(c.eval(0.0).x >= xmax - 1e-8);
    }

    #[test]
    fn zero_drive_has_no_cycle() {
        let p = NondimParams::default().with_h(0.0);
        let err = find_limit_cycle(&p, &quick()).unwrap_err();
        assert!(matches!(err, DdeError::NoLimitCycle { .. }), "{err:?}");
    }

    #[test]
    fn invalid_options() {
        let opts = CycleOptions { detect_window: 0.0, ..quick() };
        assert!(find_limit_cycle(&NondimParams::default(), &opts).is_err());
    }
}
