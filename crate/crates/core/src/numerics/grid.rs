use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{NumericsError, Result, C64};

/// Uniform sampling of `[min, max]` with `n` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, n: usize) -> Self {
        Self { min, max, n }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min < self.max) || self.n < 2 || !self.min.is_finite() || !self.max.is_finite() {
            return Err(NumericsError::InvalidArgument(format!(
                "grid axis needs min < max and n >= 2, got [{}, {}] x {}",
                self.min, self.max, self.n
            )));
        }
        Ok(())
    }

    pub fn samples(&self) -> Vec<f64> {
        let step = (self.max - self.min) / (self.n - 1) as f64;
        (0..self.n)
            .map(|i| if i + 1 == self.n { self.max } else { self.min + step * i as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxes {
    pub re: Axis,
    pub im: Axis,
}

impl GridAxes {
    pub fn new(re: Axis, im: Axis) -> Self {
        Self { re, im }
    }

    /// Square window `[-half, half]^2` with `n` points per side.
    pub fn centered(half: f64, n: usize) -> Self {
        Self::new(Axis::new(-half, half, n), Axis::new(-half, half, n))
    }
}

/// Scalar field sampled on a rectangular grid in the complex plane.
///
/// Values follow the reciprocal convention: they are `||(. - z)^{-1}||^{-1}`
/// or a smallest singular value, so points of the spectrum hold `0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudospectrumGrid {
    re_axis: Vec<f64>,
    im_axis: Vec<f64>,
    /// Row-major over the imaginary axis: `values[i_im * n_re + i_re]`.
    values: Vec<f64>,
}

impl PseudospectrumGrid {
    pub fn from_parts(re_axis: Vec<f64>, im_axis: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let increasing = |a: &[f64]| a.len() >= 2 && a.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&re_axis) || !increasing(&im_axis) {
            return Err(NumericsError::InvalidArgument(
                "grid axes must be strictly increasing with at least two points".into(),
            ));
        }
        if values.len() != re_axis.len() * im_axis.len() {
            return Err(NumericsError::DimensionMismatch {
                expected: re_axis.len() * im_axis.len(),
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(NumericsError::InvalidArgument(
                "grid values must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            re_axis,
            im_axis,
            values,
        })
    }

    /// Evaluates `f` at every grid point in parallel. Non-finite or negative
    /// outputs are stored as `0`.
    pub fn compute(axes: &GridAxes, f: impl Fn(C64) -> f64 + Sync) -> Result<Self> {
        axes.re.validate()?;
        axes.im.validate()?;
        let re_axis = axes.re.samples();
        let im_axis = axes.im.samples();
        let n_re = re_axis.len();
        let values: Vec<f64> = (0..n_re * im_axis.len())
            .into_par_iter()
            .map(|k| {
                let z = C64::new(re_axis[k % n_re], im_axis[k / n_re]);
                let v = f(z);
                if v.is_finite() && v > 0.0 {
                    v
                } else {
                    0.0
                }
            })
            .collect();
        Self::from_parts(re_axis, im_axis, values)
    }

    pub fn re_axis(&self) -> &[f64] {
        &self.re_axis
    }

    pub fn im_axis(&self) -> &[f64] {
        &self.im_axis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i_re: usize, i_im: usize) -> f64 {
        self.values[i_im * self.re_axis.len() + i_re]
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    fn locate(axis: &[f64], x: f64) -> Option<(usize, f64)> {
        if x < axis[0] || x > axis[axis.len() - 1] {
            return None;
        }
        let k = axis.partition_point(|&a| a <= x).clamp(1, axis.len() - 1) - 1;
        let w = (x - axis[k]) / (axis[k + 1] - axis[k]);
        Some((k, w))
    }

    /// Bilinear interpolation; `None` outside the grid window.
    pub fn interpolate(&self, z: C64) -> Option<f64> {
        let (i, u) = Self::locate(&self.re_axis, z.re)?;
        let (j, v) = Self::locate(&self.im_axis, z.im)?;
        let f00 = self.value(i, j);
        let f10 = self.value(i + 1, j);
        let f01 = self.value(i, j + 1);
        let f11 = self.value(i + 1, j + 1);
        Some((1.0 - u) * (1.0 - v) * f00 + u * (1.0 - v) * f10 + (1.0 - u) * v * f01 + u * v * f11)
    }

    /// Approximate area of `{z : value(z) <= eps}` counting each grid point
    /// with its share of the surrounding cells.
    pub fn sublevel_area(&self, eps: f64) -> f64 {
        let weight = |axis: &[f64], k: usize| {
            let lo = if k == 0 { axis[0] } else { 0.5 * (axis[k - 1] + axis[k]) };
            let hi = if k + 1 == axis.len() { axis[k] } else { 0.5 * (axis[k] + axis[k + 1]) };
            hi - lo
        };
        let mut area = 0.0;
        for j in 0..self.im_axis.len() {
            for i in 0..self.re_axis.len() {
                if self.value(i, j) <= eps {
                    area += weight(&self.re_axis, i) * weight(&self.im_axis, j);
                }
            }
        }
        area
    }

    /// Writes `re,im,<value_header>` rows, real axis varying fastest.
    pub fn write_csv<W: Write>(&self, mut out: W, value_header: &str) -> std::io::Result<()> {
        writeln!(out, "re,im,{value_header}")?;
        for (j, im) in self.im_axis.iter().enumerate() {
            for (i, re) in self.re_axis.iter().enumerate() {
                writeln!(out, "{re},{im},{}", self.value(i, j))?;
            }
        }
        Ok(())
    }

    /// Reads a three-column `re,im,value` CSV as produced by [`write_csv`].
    ///
    /// [`write_csv`]: Self::write_csv
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line.map_err(|e| NumericsError::InvalidArgument(e.to_string()))?;
            if lineno == 0 || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| NumericsError::InvalidArgument(format!("line {}: {e}", lineno + 1)))?;
            if fields.len() != 3 {
                return Err(NumericsError::InvalidArgument(format!(
                    "line {}: expected 3 fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            rows.push((fields[0], fields[1], fields[2]));
        }
        let mut re: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let mut im: Vec<f64> = rows.iter().map(|r| r.1).collect();
        for axis in [&mut re, &mut im] {
            axis.sort_by(f64::total_cmp);
            axis.dedup();
        }
        let n_re = re.len();
        let mut values = vec![f64::NAN; n_re * im.len()];
        for (x, y, v) in rows {
            let i = re.binary_search_by(|a| a.total_cmp(&x)).expect("value from axis");
            let j = im.binary_search_by(|a| a.total_cmp(&y)).expect("value from axis");
            values[j * n_re + i] = v;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(NumericsError::InvalidArgument("grid CSV is not a full rectangular grid".into()));
        }
        Self::from_parts(re, im, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radial() -> PseudospectrumGrid {
        PseudospectrumGrid::compute(&GridAxes::centered(2.0, 41), |z| z.norm()).unwrap()
    }

    #[test]
    fn axis_endpoints_are_exact() {
        let s = Axis::new(-6.0, 3.0, 301).samples();
        assert_eq!(s[0], -6.0);
        assert_eq!(s[300], 3.0);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn interpolation_is_exact_on_nodes_and_linear_fields() {
        let g = PseudospectrumGrid::compute(&GridAxes::centered(1.0, 11), |z| 2.0 + z.re + 3.0 * z.im).unwrap();
        let v = g.interpolate(C64::new(0.13, -0.41)).unwrap();
        assert!((v - (2.0 + 0.13 - 1.23)).abs() < 1e-12);
        assert!(g.interpolate(C64::new(1.5, 0.0)).is_none());
    }

    #[test]
    fn sublevel_area_of_disk() {
        let g = PseudospectrumGrid::compute(&GridAxes::centered(2.0, 401), |z| z.norm()).unwrap();
        let area = g.sublevel_area(1.0);
        assert!((area - std::f64::consts::PI).abs() < 0.02, "{area}");
    }

    #[test]
    fn csv_round_trip() {
        let g = radial();
        let mut buf = Vec::new();
        g.write_csv(&mut buf, "value").unwrap();
        let back = PseudospectrumGrid::read_csv(&buf[..]).unwrap();
        assert_eq!(back, g);
        assert!(String::from_utf8(buf).unwrap().starts_with("re,im,value\n"));
    }

    #[test]
    fn rejects_negative_values() {
        let r = PseudospectrumGrid::from_parts(vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, -1.0, 0.0, 0.0]);
        assert!(r.is_err());
    }
}
