use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{golden_section_max, ComplexMatrix, NumericsError, Result, C64};

/// Polar search region for the Kreiss supremum over `c < |z| <= r_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KreissOptions {
    pub radial: usize,
    pub angular: usize,
    pub r_max: f64,
}

impl KreissOptions {
    pub fn for_threshold(c: f64) -> Self {
        Self {
            radial: 200,
            angular: 256,
            r_max: c + 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KreissResult {
    pub c: f64,
    pub value: f64,
    pub argmax_z: C64,
}

/// Radii are spaced geometrically in `|z| - c`, from `1e-4 (r_max - c)` up to
/// `r_max - c`, so the neighbourhood of the circle is resolved.
fn radii(c: f64, opts: &KreissOptions) -> Vec<f64> {
    let span = opts.r_max - c;
    let n = opts.radial;
    (0..n)
        .map(|k| c + span * 10f64.powf(-4.0 * (1.0 - k as f64 / (n - 1) as f64)))
        .collect()
}

/// Lower bound for `sup_{|z|>c} (|z| - c) * resolvent_norm(z)`.
///
/// Scans a polar grid, then polishes the best grid point by alternating
/// golden-section searches in radius and angle until the point moves by less
/// than `1e-6`.
pub fn kreiss_constant<F>(resolvent_norm: F, c: f64, opts: &KreissOptions) -> Result<KreissResult>
where
    F: Fn(C64) -> f64 + Sync,
{
    if !(c > 0.0) {
        return Err(NumericsError::InvalidArgument(format!("Kreiss threshold c must be positive, got {c}")));
    }
    if !(opts.r_max > c) {
        return Err(NumericsError::InvalidArgument(format!(
            "r_max = {} must exceed c = {c}",
            opts.r_max
        )));
    }
    if opts.radial < 16 || opts.angular < 16 {
        return Err(NumericsError::InvalidArgument(
            "Kreiss search grids need at least 16 points each".into(),
        ));
    }

    let objective = |r: f64, theta: f64| -> Result<f64> {
        let z = C64::from_polar(r, theta);
        let norm = resolvent_norm(z);
        if !norm.is_finite() || norm < 0.0 {
            return Err(NumericsError::NonFiniteResolvent { re: z.re, im: z.im });
        }
        Ok((r - c) * norm)
    };

    let rs = radii(c, opts);
    let dtheta = std::f64::consts::TAU / opts.angular as f64;
    let cells: Vec<(usize, usize)> = (0..rs.len())
        .flat_map(|k| (0..opts.angular).map(move |j| (k, j)))
        .collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(k, j)| objective(rs[k], j as f64 * dtheta))
        .collect::<Result<_>>()?;
    let (best_idx, &best_val) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is non-empty");
    let (k, j) = cells[best_idx];

    let r_lo = if k == 0 { c + 0.5 * (rs[0] - c) } else { rs[k - 1] };
    let r_hi = if k + 1 == rs.len() { rs[k] } else { rs[k + 1] };
    let mut r = rs[k];
    let mut theta = j as f64 * dtheta;
    let mut best = best_val;
    let mut r_half = 0.5 * (r_hi - r_lo);
    let mut t_half = dtheta;

    // objective errors inside the refinement are mapped to -inf and reported
    // only if they occur on the grid
    let safe = |r: f64, t: f64| objective(r, t).unwrap_or(f64::NEG_INFINITY);
    for _ in 0..60 {
        let (r_new, v_r) = golden_section_max(
            |x| safe(x, theta),
            (r - r_half).max(c * (1.0 + 1e-12)),
            (r + r_half).min(opts.r_max),
            1e-9,
        );
        let r_next = if v_r > best { best = v_r; r_new } else { r };
        let (t_new, v_t) = golden_section_max(|t| safe(r_next, t), theta - t_half, theta + t_half, 1e-9);
        let t_next = if v_t > best { best = v_t; t_new } else { theta };
        let moved = (C64::from_polar(r_next, t_next) - C64::from_polar(r, theta)).norm();
        r = r_next;
        theta = t_next;
        r_half *= 0.5;
        t_half *= 0.5;
        if moved < 1e-6 && r_half < 1e-6 && t_half * r < 1e-6 {
            break;
        }
    }
    let argmax_z = C64::from_polar(r, theta);
    Ok(KreissResult {
        c,
        value: objective(r, theta)?,
        argmax_z,
    })
}

/// `max_{0<=k<=k_max} c^{-k} ||T^k||_inf`, the transient-growth quantity the
/// Kreiss constant bounds from below.
pub fn power_bound(t: &ComplexMatrix, c: f64, k_max: usize) -> Result<f64> {
    let n = t.require_square()?;
    let mut p = ComplexMatrix::identity(n);
    let mut best = 1.0f64;
    let scaled = t.scale(C64::new(1.0 / c, 0.0));
    for _ in 0..k_max {
        p = p.matmul(&scaled);
        best = best.max(p.norm_inf());
    }
    Ok(best)
}
