//! Level curves of a sampled field by marching squares.

use std::collections::HashMap;

use hpa_core::numerics::PseudospectrumGrid;

/// Polyline in the complex plane, `(re, im)` vertices. A closed contour does
/// not repeat its first vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub points: Vec<(f64, f64)>,
    pub closed: bool,
}

/// Grid edge: `(false, i, j)` joins nodes `(i, j)` and `(i + 1, j)`,
/// `(true, i, j)` joins `(i, j)` and `(i, j + 1)`.
type Edge = (bool, usize, usize);

struct Field<'a> {
    grid: &'a PseudospectrumGrid,
    level: f64,
}

impl Field<'_> {
    fn below(&self, i: usize, j: usize) -> bool {
        self.grid.value(i, j) < self.level
    }

    fn crossing(&self, (vertical, i, j): Edge) -> (f64, f64) {
        let (re, im) = (self.grid.re_axis(), self.grid.im_axis());
        let (i1, j1) = if vertical { (i, j + 1) } else { (i + 1, j) };
        let (a, b) = (self.grid.value(i, j), self.grid.value(i1, j1));
        let t = ((self.level - a) / (b - a)).clamp(0.0, 1.0);
        (re[i] + t * (re[i1] - re[i]), im[j] + t * (im[j1] - im[j]))
    }

    /// Segments of cell `(i, j)` as pairs of crossed edges.
    fn cell(&self, i: usize, j: usize, out: &mut Vec<[Edge; 2]>) {
        let c = [
            self.below(i, j),
            self.below(i + 1, j),
            self.below(i + 1, j + 1),
            self.below(i, j + 1),
        ];
        let bottom = (false, i, j);
        let right = (true, i + 1, j);
        let top = (false, i, j + 1);
        let left = (true, i, j);
        let sides = [(bottom, c[0] != c[1]), (right, c[1] != c[2]), (top, c[2] != c[3]), (left, c[3] != c[0])];
        let crossed: Vec<Edge> = sides.iter().filter(|s| s.1).map(|s| s.0).collect();
        match crossed.len() {
            2 => out.push([crossed[0], crossed[1]]),
            4 => {
                let g = self.grid;
                let centre = 0.25 * (g.value(i, j) + g.value(i + 1, j) + g.value(i + 1, j + 1) + g.value(i, j + 1));
                if (centre < self.level) == c[0] {
                    out.push([bottom, right]);
                    out.push([top, left]);
                } else {
                    out.push([left, bottom]);
                    out.push([right, top]);
                }
            }
            _ => {}
        }
    }
}

/// Curves where the bilinear interpolant of `grid` equals `level`, with
/// vertices on cell edges. Curves leaving the grid end on the boundary.
pub fn marching_squares(grid: &PseudospectrumGrid, level: f64) -> Vec<Contour> {
    let (n_re, n_im) = (grid.re_axis().len(), grid.im_axis().len());
    if !(level > grid.min_value()) {
        return Vec::new();
    }
    let field = Field { grid, level };
    let mut segments = Vec::new();
    for j in 0..n_im - 1 {
        for i in 0..n_re - 1 {
            field.cell(i, j, &mut segments);
        }
    }

    let mut at: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (k, s) in segments.iter().enumerate() {
        at.entry(s[0]).or_default().push(k);
        at.entry(s[1]).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let next = |edge: Edge, used: &mut Vec<bool>| -> Option<Edge> {
        let k = *at.get(&edge)?.iter().find(|&&k| !used[k])?;
        used[k] = true;
        let s = segments[k];
        Some(if s[0] == edge { s[1] } else { s[0] })
    };

    let mut contours = Vec::new();
    for k in 0..segments.len() {
        if used[k] {
            continue;
        }
        used[k] = true;
        let [start, end] = segments[k];
        let mut forward = vec![start, end];
        let mut closed = false;
        while let Some(e) = next(*forward.last().expect("non-empty"), &mut used) {
            if e == start {
                closed = true;
                break;
            }
            forward.push(e);
        }
        if !closed {
            let mut backward = Vec::new();
            let mut cur = start;
            while let Some(e) = next(cur, &mut used) {
                backward.push(e);
                cur = e;
            }
            backward.reverse();
            backward.extend(forward);
            forward = backward;
        }
        contours.push(Contour {
            points: forward.into_iter().map(|e| field.crossing(e)).collect(),
            closed,
        });
    }
    contours
}
