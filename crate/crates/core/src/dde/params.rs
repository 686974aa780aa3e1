use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::DdeError;

/// Parameters of the dimensional ACTH (`A`) / cortisol (`C`) model, rates
/// in 1/min and delays in minutes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimensionalParams {
    /// ACTH elimination rate.
    pub e_a: f64,
    /// Cortisol elimination rate.
    pub e_c: f64,
    /// Hill exponent of cortisol feedback on ACTH.
    pub m1: u32,
    /// Hill exponent of ACTH drive on cortisol.
    pub m2: u32,
    /// ACTH half-maximum constant.
    pub a: f64,
    /// Cortisol half-maximum constant.
    pub c: f64,
    /// CRH stimulation of ACTH secretion.
    pub h: f64,
    /// Cortisol production rate.
    pub beta: f64,
    /// Feedback delay from cortisol to ACTH.
    pub tau1: f64,
    /// Delay from ACTH to cortisol production.
    pub tau2: f64,
}

impl Default for DimensionalParams {
    fn default() -> Self {
        Self {
            e_a: 0.04,
            e_c: 0.01,
            m1: 4,
            m2: 4,
            a: 21.0,
            c: 6.11,
            h: 7.66,
            beta: 1.0,
            tau1: 15.0,
            tau2: 15.0,
        }
    }
}

impl DimensionalParams {
    pub fn validate(&self) -> Result<(), DdeError> {
        let positive = [
            ("e_a", self.e_a),
            ("e_c", self.e_c),
            ("a", self.a),
            ("c", self.c),
            ("beta", self.beta),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(DdeError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("h", self.h), ("tau1", self.tau1), ("tau2", self.tau2)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(DdeError::InvalidParams(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if self.m1 == 0 || self.m2 == 0 {
            return Err(DdeError::InvalidParams("Hill exponents must be at least 1".into()));
        }
        Ok(())
    }

    /// Rescales with `A = a x`, `C = c y`, `t = tau / e_c`.
    pub fn nondimensionalize(&self) -> Result<NondimParams, DdeError> {
        self.validate()?;
        Ok(NondimParams {
            c1: self.e_a / self.e_c,
            c2: 1.0 / (self.a * self.e_c),
            c3: self.beta / (self.c * self.e_c),
            h: self.h,
            m1: self.m1,
            m2: self.m2,
            t1: self.e_c * self.tau1,
            t2: self.e_c * self.tau2,
        })
    }
}

/// Parameters of the dimensionless system
///
/// ```text
/// x' = -c1 x + h c2 / (1 + y(t - t1)^m1)
/// y' = -y + c3 x(t - t2)^m2 / (1 + x(t - t2)^m2)
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NondimParams {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub h: f64,
    pub m1: u32,
    pub m2: u32,
    pub t1: f64,
    pub t2: f64,
}

impl Default for NondimParams {
    fn default() -> Self {
        DimensionalParams::default()
            .nondimensionalize()
            .expect("default parameters are valid")
    }
}

impl NondimParams {
    pub fn validate(&self) -> Result<(), DdeError> {
        for (name, v) in [("c1", self.c1), ("c2", self.c2), ("c3", self.c3)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(DdeError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("h", self.h), ("t1", self.t1), ("t2", self.t2)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(DdeError::InvalidParams(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if self.m1 == 0 || self.m2 == 0 {
            return Err(DdeError::InvalidParams("Hill exponents must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_h(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    pub fn max_delay(&self) -> f64 {
        self.t1.max(self.t2)
    }

    /// Right-hand side without input checks. `y_lag1 = y(t - t1)`,
    /// `x_lag2 = x(t - t2)`.
    #[inline]
    pub fn rhs(&self, current: State, x_lag2: f64, y_lag1: f64) -> State {
        let yp = y_lag1.powi(self.m1 as i32);
        let xp = x_lag2.powi(self.m2 as i32);
        let hill = if xp.is_infinite() { 1.0 } else { xp / (1.0 + xp) };
        State {
            x: -self.c1 * current.x + self.h * self.c2 / (1.0 + yp),
            y: -current.y + self.c3 * hill,
        }
    }
}

/// Right-hand side of the dimensionless model with finiteness checks.
pub fn rhs(current: State, x_lag2: f64, y_lag1: f64, p: &NondimParams) -> Result<State, DdeError> {
    if !current.is_finite() || !x_lag2.is_finite() || !y_lag1.is_finite() {
        return Err(DdeError::InvalidInput("state and lagged values must be finite".into()));
    }
    if !y_lag1.powi(p.m1 as i32).is_finite() || !x_lag2.powi(p.m2 as i32).is_finite() {
        return Err(DdeError::InvalidInput("Hill power overflows".into()));
    }
    let d = p.rhs(current, x_lag2, y_lag1);
    if !d.is_finite() {
        return Err(DdeError::InvalidInput("right-hand side is not finite".into()));
    }
    Ok(d)
}

/// Dimensionless ACTH (`x`) and cortisol (`y`).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub x: f64,
    pub y: f64,
}

impl State {
    pub const ZERO: State = State { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm_inf(self) -> f64 {
        self.x.abs().max(self.y.abs())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for State {
    type Output = State;
    fn add(self, o: State) -> State {
        State::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for State {
    type Output = State;
    fn sub(self, o: State) -> State {
        State::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for State {
    type Output = State;
    fn mul(self, s: f64) -> State {
        State::new(self.x * s, self.y * s)
    }
}

impl Neg for State {
    type Output = State;
    fn neg(self) -> State {
        State::new(-self.x, -self.y)
    }
}
