//! Fixed-step RK4 for two-delay systems by the method of steps, with cubic
//! Hermite dense output used both for lag lookups and for evaluation of the
//! finished trajectory.

use std::io::Write;

use super::{DdeError, NondimParams, State};

/// A planar delay system with two discrete delays.
pub trait DelaySystem: Sync {
    /// `(lag1, lag2)`; the derivative receives the state at `t - lag1` and
    /// `t - lag2`.
    fn delays(&self) -> (f64, f64);

    fn derivative(&self, t: f64, current: State, lag1: State, lag2: State) -> State;
}

impl DelaySystem for NondimParams {
    fn delays(&self) -> (f64, f64) {
        (self.t1, self.t2)
    }

    #[inline]
    fn derivative(&self, _t: f64, current: State, lag1: State, lag2: State) -> State {
        self.rhs(current, lag2.x, lag1.y)
    }
}

/// Uniformly spaced states and derivatives with C1 cubic Hermite
/// interpolation between nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteSamples {
    t0: f64,
    step: f64,
    states: Vec<State>,
    derivs: Vec<State>,
}

impl HermiteSamples {
    pub fn new(t0: f64, step: f64, states: Vec<State>, derivs: Vec<State>) -> Self {
        assert!(step > 0.0 && states.len() >= 2 && states.len() == derivs.len());
        Self {
            t0,
            step,
            states,
            derivs,
        }
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.step * (self.states.len() - 1) as f64
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn derivs(&self) -> &[State] {
        &self.derivs
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + self.step * k as f64
    }

    #[inline]
    fn cell(&self, t: f64) -> (usize, f64) {
        let last = self.states.len() - 2;
        let u = (t - self.t0) / self.step;
        let k = (u.floor().max(0.0) as usize).min(last);
        (k, (u - k as f64).clamp(0.0, 1.0))
    }

    /// Interpolated state; times outside the sampled range are clamped.
    #[inline]
    pub fn eval(&self, t: f64) -> State {
        let (k, s) = self.cell(t);
        let h = self.step;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        self.states[k] * h00 + self.derivs[k] * (h * h10) + self.states[k + 1] * h01 + self.derivs[k + 1] * (h * h11)
    }

    /// Derivative of the Hermite interpolant.
    pub fn eval_deriv(&self, t: f64) -> State {
        let (k, s) = self.cell(t);
        let h = self.step;
        let s2 = s * s;
        let d00 = (6.0 * s2 - 6.0 * s) / h;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = (-6.0 * s2 + 6.0 * s) / h;
        let d11 = 3.0 * s2 - 2.0 * s;
        self.states[k] * d00 + self.derivs[k] * d10 + self.states[k + 1] * d01 + self.derivs[k + 1] * d11
    }
}

/// Initial function on `t <= t0`.
#[derive(Debug, Clone, PartialEq)]
pub enum History {
    Constant(State),
    /// Linear interpolation between nodes at increasing times, constant
    /// beyond the ends.
    PiecewiseLinear { times: Vec<f64>, states: Vec<State> },
    /// Dense segment, e.g. cut from an earlier trajectory.
    Hermite(HermiteSamples),
}

impl History {
    pub fn eval(&self, t: f64) -> State {
        match self {
            History::Constant(s) => *s,
            History::PiecewiseLinear { times, states } => {
                if t <= times[0] {
                    return states[0];
                }
                let n = times.len();
                if t >= times[n - 1] {
                    return states[n - 1];
                }
                let k = times.partition_point(|&a| a <= t) - 1;
                let w = (t - times[k]) / (times[k + 1] - times[k]);
                states[k] * (1.0 - w) + states[k + 1] * w
            }
            History::Hermite(samples) => samples.eval(t),
        }
    }
}

/// Dense solution on a uniform grid, with its history for earlier times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: HermiteSamples,
    history: History,
}

impl Trajectory {
    pub fn t0(&self) -> f64 {
        self.samples.t0
    }

    pub fn t_end(&self) -> f64 {
        self.samples.t_end()
    }

    pub fn step(&self) -> f64 {
        self.samples.step
    }

    pub fn len(&self) -> usize {
        self.samples.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.states.is_empty()
    }

    pub fn samples(&self) -> &HermiteSamples {
        &self.samples
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, State, State)> + '_ {
        let s = &self.samples;
        (0..s.states.len()).map(move |k| (s.time(k), s.states[k], s.derivs[k]))
    }

    pub fn final_state(&self) -> State {
        *self.samples.states.last().expect("non-empty trajectory")
    }

    /// State at `t`; uses the history for `t < t0`.
    #[inline]
    pub fn eval(&self, t: f64) -> State {
        if t < self.samples.t0 {
            self.history.eval(t)
        } else {
            self.samples.eval(t)
        }
    }

    /// Hermite derivative for `t >= t0`.
    pub fn eval_deriv(&self, t: f64) -> State {
        self.samples.eval_deriv(t)
    }

    /// Uniform dense segment on `[t_start, t_end]` resampled from this
    /// trajectory, shifted so that `t_end` maps to `new_origin`. Derivatives
    /// come from `system` so the segment stays consistent with the dynamics.
    pub fn resample_segment<S: DelaySystem + ?Sized>(
        &self,
        system: &S,
        t_start: f64,
        t_end: f64,
        step: f64,
        new_origin: f64,
    ) -> HermiteSamples {
        let n = (((t_end - t_start) / step).ceil() as usize).max(1);
        let h = (t_end - t_start) / n as f64;
        let (d1, d2) = system.delays();
        let mut states = Vec::with_capacity(n + 1);
        let mut derivs = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let t = t_start + h * k as f64;
            let s = self.eval(t);
            states.push(s);
            derivs.push(system.derivative(t, s, self.eval(t - d1), self.eval(t - d2)));
        }
        HermiteSamples::new(new_origin - (t_end - t_start), h, states, derivs)
    }

    /// Writes `tau,x,y,dx,dy` at every node.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "tau,x,y,dx,dy")?;
        for (t, s, d) in self.nodes() {
            writeln!(out, "{t},{},{},{},{}", s.x, s.y, d.x, d.y)?;
        }
        Ok(())
    }
}

/// Integrates `system` from `t0` to `t_end`. The step is shrunk so that
/// `t_end` is hit exactly; it must not exceed a tenth of the smallest
/// nonzero delay.
pub fn integrate<S: DelaySystem + ?Sized>(
    system: &S,
    history: History,
    t0: f64,
    t_end: f64,
    step: f64,
) -> Result<Trajectory, DdeError> {
    if !(t_end > t0) || !t_end.is_finite() || !t0.is_finite() {
        return Err(DdeError::InvalidInput(format!("need t_end > t0, got [{t0}, {t_end}]")));
    }
    if !(step > 0.0) {
        return Err(DdeError::InvalidInput(format!("step must be positive, got {step}")));
    }
    let (d1, d2) = system.delays();
    let min_delay = [d1, d2].into_iter().filter(|d| *d > 0.0).fold(f64::INFINITY, f64::min);
    if min_delay.is_finite() && step > min_delay / 10.0 * (1.0 + 1e-12) {
        return Err(DdeError::StepTooLarge {
            step,
            max: min_delay / 10.0,
        });
    }
    let n = (((t_end - t0) / step) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let h = (t_end - t0) / n as f64;

    let mut states: Vec<State> = Vec::with_capacity(n + 1);
    let mut derivs: Vec<State> = Vec::with_capacity(n + 1);

    // Lagged lookup into history or the completed part of the solution.
    let lag = |states: &[State], derivs: &[State], t: f64| -> State {
        if t <= t0 {
            return history.eval(t);
        }
        let u = (t - t0) / h;
        let k = (u.floor() as usize).min(states.len() - 2);
        let s = (u - k as f64).clamp(0.0, 1.0);
        let s2 = s * s;
        let s3 = s2 * s;
        states[k] * (2.0 * s3 - 3.0 * s2 + 1.0)
            + derivs[k] * (h * (s3 - 2.0 * s2 + s))
            + states[k + 1] * (-2.0 * s3 + 3.0 * s2)
            + derivs[k + 1] * (h * (s3 - s2))
    };
    let f = |states: &[State], derivs: &[State], t: f64, y: State| -> State {
        let l1 = if d1 == 0.0 { y } else { lag(states, derivs, t - d1) };
        let l2 = if d2 == 0.0 { y } else { lag(states, derivs, t - d2) };
        system.derivative(t, y, l1, l2)
    };

    let mut y = history.eval(t0);
    if !y.is_finite() {
        return Err(DdeError::Divergence { t: t0 });
    }
    for k in 0..n {
        let t = t0 + h * k as f64;
        // The node derivative only needs lags up to t - min_delay < t, which
        // are already stored (or in the history).
        let k1 = f(&states, &derivs, t, y);
        states.push(y);
        derivs.push(k1);
        let k2 = f(&states, &derivs, t + 0.5 * h, y + k1 * (0.5 * h));
        let k3 = f(&states, &derivs, t + 0.5 * h, y + k2 * (0.5 * h));
        let k4 = f(&states, &derivs, t + h, y + k3 * h);
        y = y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if !y.is_finite() {
            return Err(DdeError::Divergence { t: t + h });
        }
    }
    let dn = f(&states, &derivs, t_end, y);
    states.push(y);
    derivs.push(dn);
    Ok(Trajectory {
        samples: HermiteSamples::new(t0, h, states, derivs),
        history,
    })
}
