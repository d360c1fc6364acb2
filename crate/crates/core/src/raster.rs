//! Supercover rasterization: every cell whose closed square a segment touches,
//! corner contacts included.

use crate::maps::{Cell, GridSpec};

/// Visits the supercover cells of the segment joining two cell centers, column by
/// column. Exact: works in doubled integer coordinates, where centers are odd and
/// cell boundaries even. `visit` returns `false` to stop early; the function then
/// returns `false` as well.
pub fn walk_center_ray(from: Cell, to: Cell, mut visit: impl FnMut(Cell) -> bool) -> bool {
    let (a, b) = if from.i <= to.i { (from, to) } else { (to, from) };
    let px = 2 * a.i as i64 + 1;
    let py = 2 * a.j as i64 + 1;
    let qx = 2 * b.i as i64 + 1;
    let qy = 2 * b.j as i64 + 1;
    let dx = qx - px;
    let dy = qy - py;
    if dx == 0 {
        let (lo, hi) = (a.j.min(b.j), a.j.max(b.j));
        for j in lo..=hi {
            if !visit(Cell::new(a.i, j)) {
                return false;
            }
        }
        return true;
    }
    let two_dx = 2 * dx;
    for col in a.i..=b.i {
        let x0 = (2 * col as i64).max(px);
        let x1 = (2 * col as i64 + 2).min(qx);
        // y * dx at both ends of the column span
        let n0 = py * dx + (x0 - px) * dy;
        let n1 = py * dx + (x1 - px) * dy;
        let (lo, hi) = (n0.min(n1), n0.max(n1));
        let row_lo = (lo + two_dx - 1).div_euclid(two_dx) - 1;
        let row_hi = hi.div_euclid(two_dx);
        for row in row_lo.max(0)..=row_hi {
            if !visit(Cell::new(col, row as usize)) {
                return false;
            }
        }
    }
    true
}

/// Supercover cells of a center-to-center ray, endpoints included.
pub fn center_ray_cells(from: Cell, to: Cell) -> Vec<Cell> {
    let mut cells = Vec::new();
    walk_center_ray(from, to, |c| {
        cells.push(c);
        true
    });
    cells
}

/// Supercover of an arbitrary planar segment, split into in-grid cells and a flag
/// for whether any touched cell lies outside the grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentCells {
    pub cells: Vec<Cell>,
    pub leaves_grid: bool,
}

/// Supercover of the segment `p0 -> p1` (world coordinates), cells in row-major order.
///
/// Each candidate cell in the bounding range is tested with orientation signs of its
/// four corners. For inputs on a dyadic lattice (as produced by the dataset builder)
/// every product is exact, so the cell set is exactly equivariant under quarter-turn
/// rotations and whole-cell translations.
pub fn segment_cells(spec: &GridSpec, p0: (f64, f64), p1: (f64, f64)) -> SegmentCells {
    let to_local = |p: (f64, f64)| {
        (
            (p.0 - spec.origin_x) / spec.cell_size,
            (p.1 - spec.origin_y) / spec.cell_size,
        )
    };
    let (ax, ay) = to_local(p0);
    let (bx, by) = to_local(p1);
    let (ux_lo, ux_hi) = (ax.min(bx), ax.max(bx));
    let (uy_lo, uy_hi) = (ay.min(by), ay.max(by));
    let col_lo = ux_lo.ceil() as i64 - 1;
    let col_hi = ux_hi.floor() as i64;
    let row_lo = uy_lo.ceil() as i64 - 1;
    let row_hi = uy_hi.floor() as i64;
    let ex = bx - ax;
    let ey = by - ay;
    let side = |cx: f64, cy: f64| ex * (cy - ay) - ey * (cx - ax);
    let mut cells = Vec::new();
    let mut leaves_grid = false;
    for row in row_lo..=row_hi {
        for col in col_lo..=col_hi {
            let (x0, y0) = (col as f64, row as f64);
            // closed-interval overlap on each axis
            if x0 > ux_hi || x0 + 1.0 < ux_lo || y0 > uy_hi || y0 + 1.0 < uy_lo {
                continue;
            }
            let s = [
                side(x0, y0),
                side(x0 + 1.0, y0),
                side(x0, y0 + 1.0),
                side(x0 + 1.0, y0 + 1.0),
            ];
            if s.iter().all(|&v| v > 0.0) || s.iter().all(|&v| v < 0.0) {
                continue;
            }
            match spec.checked_cell(col, row) {
                Some(c) => cells.push(c),
                None => leaves_grid = true,
            }
        }
    }
    SegmentCells { cells, leaves_grid }
}
