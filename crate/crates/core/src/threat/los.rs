use super::VisibilityParams;
use crate::maps::{Cell, HeightMap};
use crate::raster::walk_center_ray;

/// Binary line of sight between two cell centers. Cells strictly between the
/// endpoints block the view when their height reaches `eye_height`; pairs farther
/// apart than `max_range` (center to center) never see each other.
pub fn line_of_sight(height: &HeightMap, from: Cell, to: Cell, params: &VisibilityParams) -> bool {
    if height.spec().center_distance(from, to) > params.max_range {
        return false;
    }
    walk_center_ray(from, to, |c| c == from || c == to || height.get(c) < params.eye_height)
}

/// Visibility raster of every cell as seen from `source`.
pub fn visible_from(height: &HeightMap, source: Cell, params: &VisibilityParams) -> Vec<bool> {
    let spec = height.spec();
    let reach = (params.max_range / spec.cell_size).floor() as i64 + 1;
    let mut out = vec![false; spec.len()];
    for dj in -reach..=reach {
        for di in -reach..=reach {
            if let Some(c) = spec.checked_cell(source.i as i64 + di, source.j as i64 + dj) {
                out[spec.index(c)] = line_of_sight(height, source, c, params);
            }
        }
    }
    out
}

/// Visibility raster as a 0/1 grid, for export.
pub fn visibility_grid(
    height: &HeightMap,
    source: Cell,
    params: &VisibilityParams,
) -> crate::maps::ScalarGrid {
    let vis = visible_from(height, source, params);
    crate::maps::ScalarGrid::from_values(
        *height.spec(),
        vis.into_iter().map(|v| if v { 1.0 } else { 0.0 }).collect(),
    )
    .expect("raster matches spec")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{GridSpec, ScalarGrid};

    fn flat(w: usize, h: usize) -> ScalarGrid {
        ScalarGrid::filled(GridSpec::new(w, h, 1.0, 0.0, 0.0).unwrap(), 0.0)
    }

    #[test]
    fn wall_blocks_and_endpoints_do_not() {
        let mut g = flat(7, 3);
        g.set(Cell::new(3, 1), 2.0);
        g.set(Cell::new(0, 1), 5.0);
        let h = HeightMap::new(g).unwrap();
        let p = VisibilityParams { eye_height: 1.0, max_range: 100.0 };
        assert!(!line_of_sight(&h, Cell::new(0, 1), Cell::new(6, 1), &p));
        assert!(line_of_sight(&h, Cell::new(0, 1), Cell::new(2, 1), &p));
        assert!(line_of_sight(&h, Cell::new(3, 1), Cell::new(5, 1), &p));
    }

    #[test]
    fn corner_touch_blocks() {
        let mut g = flat(3, 3);
        g.set(Cell::new(1, 0), 2.0);
        let h = HeightMap::new(g).unwrap();
        let p = VisibilityParams { eye_height: 1.0, max_range: 100.0 };
        assert!(!line_of_sight(&h, Cell::new(0, 0), Cell::new(2, 2), &p));
    }

    #[test]
    fn range_limit() {
        let h = HeightMap::new(flat(20, 1)).unwrap();
        let p = VisibilityParams { eye_height: 1.0, max_range: 5.0 };
        assert!(line_of_sight(&h, Cell::new(0, 0), Cell::new(5, 0), &p));
        assert!(!line_of_sight(&h, Cell::new(0, 0), Cell::new(6, 0), &p));
        let vis = visible_from(&h, Cell::new(0, 0), &p);
        assert_eq!(vis.iter().filter(|v| **v).count(), 6);
    }
}
