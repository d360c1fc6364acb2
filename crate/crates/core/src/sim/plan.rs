use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use crate::maps::{Cell, CoverMap, GridSpec, HeightMap, ThreatMap};

#[derive(Clone, Copy)]
struct Open {
    f: f64,
    index: usize,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Open {}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Open {
    // min-heap on f, then on index
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.index.cmp(&self.index))
    }
}

/// Octile distance in meters.
pub fn octile(spec: &GridSpec, a: Cell, b: Cell) -> f64 {
    let di = (a.i as f64 - b.i as f64).abs();
    let dj = (a.j as f64 - b.j as f64).abs();
    (di.max(dj) + (std::f64::consts::SQRT_2 - 1.0) * di.min(dj)) * spec.cell_size
}

/// 8-connected A*. Diagonal moves need both adjacent orthogonal cells passable.
/// `edge_cost(from, to, length_m)` must be at least `min_cost_per_meter * length_m`
/// for the heuristic to stay admissible.
pub fn astar(
    spec: &GridSpec,
    start: Cell,
    goal: Cell,
    passable: impl Fn(Cell) -> bool,
    edge_cost: impl Fn(Cell, Cell, f64) -> f64,
    min_cost_per_meter: f64,
) -> Option<Vec<Cell>> {
    if !passable(start) || !passable(goal) {
        return None;
    }
    let n = spec.len();
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let s = spec.index(start);
    g[s] = 0.0;
    open.push(Open {
        f: octile(spec, start, goal) * min_cost_per_meter,
        index: s,
    });
    let target = spec.index(goal);
    while let Some(Open { index, .. }) = open.pop() {
        if closed[index] {
            continue;
        }
        if index == target {
            let mut path = vec![goal];
            let mut k = index;
            while k != s {
                k = parent[k];
                path.push(spec.cell_at(k));
            }
            path.reverse();
            return Some(path);
        }
        closed[index] = true;
        let cell = spec.cell_at(index);
        for next in spec.neighbors8(cell) {
            let k = spec.index(next);
            if closed[k] || !passable(next) {
                continue;
            }
            let diagonal = next.i != cell.i && next.j != cell.j;
            if diagonal && !(passable(Cell::new(next.i, cell.j)) && passable(Cell::new(cell.i, next.j))) {
                continue;
            }
            let len = if diagonal {
                std::f64::consts::SQRT_2 * spec.cell_size
            } else {
                spec.cell_size
            };
            let cand = g[index] + edge_cost(cell, next, len);
            if cand < g[k] {
                g[k] = cand;
                parent[k] = index;
                open.push(Open {
                    f: cand + octile(spec, next, goal) * min_cost_per_meter,
                    index: k,
                });
            }
        }
    }
    None
}

/// Permissive 8-connected reachability (corner cutting allowed).
pub fn reachable(spec: &GridSpec, start: Cell, goal: Cell, passable: impl Fn(Cell) -> bool) -> bool {
    if !passable(start) || !passable(goal) {
        return false;
    }
    let mut seen = vec![false; spec.len()];
    let mut queue = VecDeque::from([start]);
    seen[spec.index(start)] = true;
    while let Some(c) = queue.pop_front() {
        if c == goal {
            return true;
        }
        for n in spec.neighbors8(c) {
            let k = spec.index(n);
            if !seen[k] && passable(n) {
                seen[k] = true;
                queue.push_back(n);
            }
        }
    }
    false
}

/// Path length in meters through cell centers.
pub fn path_length(spec: &GridSpec, path: &[Cell]) -> f64 {
    path.windows(2).map(|w| spec.center_distance(w[0], w[1])).sum()
}

/// Edge weighting used by the planners.
#[derive(Debug, Clone, Copy)]
pub enum CostModel<'a> {
    /// Metric length only.
    Shortest,
    /// `length * (1 - cover + 0.1)`.
    Cover(&'a CoverMap),
    /// `length * (1 - cover + 0.1 + weight * threat)`.
    CoverThreat {
        cover: &'a CoverMap,
        threat: &'a ThreatMap,
        weight: f64,
    },
}

impl CostModel<'_> {
    fn per_meter(&self, to: Cell) -> f64 {
        match self {
            CostModel::Shortest => 1.0,
            CostModel::Cover(c) => 1.0 - c.get(to) + 0.1,
            CostModel::CoverThreat { cover, threat, weight } => 1.0 - cover.get(to) + 0.1 + weight * threat.get(to),
        }
    }

    fn floor(&self) -> f64 {
        match self {
            CostModel::Shortest => 1.0,
            _ => 0.1,
        }
    }
}

/// A* over cells no taller than `h_max`.
pub fn plan_path(height: &HeightMap, start: Cell, goal: Cell, h_max: f64, cost: CostModel<'_>) -> Option<Vec<Cell>> {
    astar(
        height.spec(),
        start,
        goal,
        |c| height.get(c) <= h_max,
        |_, to, len| len * cost.per_meter(to),
        cost.floor(),
    )
}
