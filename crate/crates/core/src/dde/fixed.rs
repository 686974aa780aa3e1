use super::{DdeError, NondimParams, State};

fn residual(p: &NondimParams, s: State) -> State {
    p.rhs(s, s.x, s.y)
}

/// Jacobian of the equilibrium equations, row-major `[[dF1/dx, dF1/dy], [dF2/dx, dF2/dy]]`.
pub fn fixed_point_jacobian(p: &NondimParams, s: State) -> [[f64; 2]; 2] {
    let m1 = p.m1 as i32;
    let m2 = p.m2 as i32;
    let ym = s.y.powi(m1);
    let xm = s.x.powi(m2);
    let b12 = -p.h * p.c2 * p.m1 as f64 * s.y.powi(m1 - 1) / (1.0 + ym).powi(2);
    let c21 = p.c3 * p.m2 as f64 * s.x.powi(m2 - 1) / (1.0 + xm).powi(2);
    [[-p.c1, b12], [c21, -1.0]]
}

/// Infinity norm of the right-hand side at `s` with all lags equal to `s`.
pub fn fixed_point_residual(p: &NondimParams, s: State) -> f64 {
    residual(p, s).norm_inf()
}

/// Damped Newton iteration for the equilibrium; converges when the residual
/// drops to `1e-12` in the infinity norm.
pub fn find_fixed_point(p: &NondimParams, guess: State) -> Result<State, DdeError> {
    p.validate()?;
    if !guess.is_finite() {
        return Err(DdeError::InvalidInput("initial guess must be finite".into()));
    }
    const MAX_ITER: usize = 100;
    let mut s = guess;
    let mut r = residual(p, s);
    for _ in 0..MAX_ITER {
        if r.norm_inf() <= 1e-12 {
            return Ok(s);
        }
        let [[a, b], [c, d]] = fixed_point_jacobian(p, s);
        let det = a * d - b * c;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let step = State::new((d * r.x - b * r.y) / det, (a * r.y - c * r.x) / det);
        let mut lambda = 1.0;
        let norm0 = r.norm_inf();
        loop {
            let trial = s - step * lambda;
            let rt = residual(p, trial);
            if rt.is_finite() && (rt.norm_inf() < norm0 || lambda < 1e-6) {
                s = trial;
                r = rt;
                break;
            }
            lambda *= 0.5;
        }
    }
    if r.norm_inf() <= 1e-12 {
        return Ok(s);
    }
    Err(DdeError::NewtonFailed {
        iterations: MAX_ITER,
        residual: r.norm_inf(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_fixed_point() {
        let p = NondimParams::default();
        let s = find_fixed_point(&p, State::new(1.0, 1.5)).unwrap();
        assert!(fixed_point_residual(&p, s) <= 1e-12);
        // scalar reduction: y = c3 x^4/(1+x^4) substituted into the x equation,
        // whose left side decreases in x; bisect on [0, h c2 / c1]
        let y_of = |x: f64| p.c3 * x.powi(4) / (1.0 + x.powi(4));
        let g = |x: f64| -p.c1 * x + p.h * p.c2 / (1.0 + y_of(x).powi(4));
        let (mut lo, mut hi) = (0.0, p.h * p.c2 / p.c1);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 { lo = mid } else { hi = mid }
        }
        assert!((s.x - lo).abs() < 1e-10 && (s.y - y_of(lo)).abs() < 1e-9, "{s:?} vs {lo}");
        assert!((s.x - 0.60526).abs() < 1e-4 && (s.y - 1.93662).abs() < 1e-4);
    }

    #[test]
    fn zero_drive_goes_to_origin() {
        let p = NondimParams::default().with_h(0.0);
        let s = find_fixed_point(&p, State::new(1.0, 1.5)).unwrap();
        assert!(s.norm_inf() < 1e-6, "{s:?}");
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = NondimParams::default();
        let s = State::new(0.9, 1.7);
        let j = fixed_point_jacobian(&p, s);
        let eps = 1e-6;
        for (col, e) in [State::new(eps, 0.0), State::new(0.0, eps)].into_iter().enumerate() {
            let fd = (residual(&p, s + e) - residual(&p, s - e)) * (0.5 / eps);
            assert!((fd.x - j[0][col]).abs() < 1e-6);
            assert!((fd.y - j[1][col]).abs() < 1e-6);
        }
    }

    #[test]
    fn non_finite_guess_is_rejected() {
        let p = NondimParams::default();
        assert!(find_fixed_point(&p, State::new(f64::NAN, 0.0)).is_err());
    }
}
