//! Shadow casting behind blocked cells.

use super::CellLabel;
use crate::geo3d::GridGeometry;

/// Parameter at which the line `o + t·d` crosses the coordinate `edge`.
#[inline]
fn crossing(edge: f64, o: f64, d: f64) -> f64 {
    (edge - o) / d
}

/// Cells touched by the ray `origin + t·(target - origin)` for `t > 1`,
/// walked from `start` outwards. Corner crossings add both side cells so
/// the walk covers every cell the ray touches.
fn supercover_beyond(
    g: &GridGeometry,
    origin: (f64, f64),
    target: (f64, f64),
    start: (usize, usize),
    out: &mut Vec<(usize, usize)>,
) {
    let (dx, dy) = (target.0 - origin.0, target.1 - origin.1);
    if dx == 0.0 && dy == 0.0 {
        return;
    }
    let step_c: isize = if dx > 0.0 { 1 } else { -1 };
    let step_r: isize = if dy > 0.0 { 1 } else { -1 };
    let (mut r, mut c) = (start.0 as isize, start.1 as isize);
    let (rows, cols) = (g.n_rows as isize, g.n_cols as isize);
    let inside = |r: isize, c: isize| r >= 0 && c >= 0 && r < rows && c < cols;
    loop {
        let (x0, y0, x1, y1) = g.cell_bounds(r as usize, c as usize);
        let tx = if dx != 0.0 { crossing(if step_c > 0 { x1 } else { x0 }, origin.0, dx) } else { f64::INFINITY };
        let ty = if dy != 0.0 { crossing(if step_r > 0 { y1 } else { y0 }, origin.1, dy) } else { f64::INFINITY };
        if tx < ty {
            c += step_c;
        } else if ty < tx {
            r += step_r;
        } else {
            if inside(r, c + step_c) {
                out.push((r as usize, (c + step_c) as usize));
            }
            if inside(r + step_r, c) {
                out.push(((r + step_r) as usize, c as usize));
            }
            r += step_r;
            c += step_c;
        }
        if !inside(r, c) {
            return;
        }
        out.push((r as usize, c as usize));
    }
}

/// Marks every cell lying behind a `NotTraversable` cell, as seen from
/// `origin`, as `Occluded`. Blocked cells keep their label; the shadow of
/// each blocked cell is the set of cells its center ray touches beyond
/// the center.
pub fn occlusion_shadows(g: &GridGeometry, labels: &[CellLabel], origin: (f64, f64)) -> Vec<CellLabel> {
    let mut out = labels.to_vec();
    let mut touched = Vec::new();
    for (idx, label) in labels.iter().enumerate() {
        if *label != CellLabel::NotTraversable {
            continue;
        }
        let (r, c) = g.row_col(idx);
        touched.clear();
        supercover_beyond(g, origin, g.cell_center(r, c), (r, c), &mut touched);
        for &(rr, cc) in &touched {
            let j = g.index(rr, cc);
            if labels[j] != CellLabel::NotTraversable {
                out[j] = CellLabel::Occluded;
            }
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod oracle {
    use super::*;

    /// Closed-square slab test: does `origin + t·d`, `t > 1`, touch the
    /// cell?
    pub fn ray_touches(g: &GridGeometry, origin: (f64, f64), target: (f64, f64), cell: (usize, usize)) -> bool {
        let (x0, y0, x1, y1) = g.cell_bounds(cell.0, cell.1);
        let d = (target.0 - origin.0, target.1 - origin.1);
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for (o, dv, a, b) in [(origin.0, d.0, x0, x1), (origin.1, d.1, y0, y1)] {
            if dv == 0.0 {
                if o < a || o > b {
                    return false;
                }
            } else {
                let (ta, tb) = ((a - o) / dv, (b - o) / dv);
                lo = lo.max(ta.min(tb));
                hi = hi.min(ta.max(tb));
            }
        }
        hi >= lo && hi > 1.0
    }

    pub fn shadows(g: &GridGeometry, labels: &[CellLabel], origin: (f64, f64)) -> Vec<CellLabel> {
        let blocked: Vec<(f64, f64)> = (0..g.len())
            .filter(|&i| labels[i] == CellLabel::NotTraversable)
            .map(|i| {
                let (r, c) = g.row_col(i);
                g.cell_center(r, c)
            })
            .collect();
        (0..g.len())
            .map(|i| {
                if labels[i] == CellLabel::NotTraversable {
                    return labels[i];
                }
                let cell = g.row_col(i);
                if blocked.iter().any(|&b| b != origin && ray_touches(g, origin, b, cell)) {
                    CellLabel::Occluded
                } else {
                    labels[i]
                }
            })
            .collect()
    }
}
