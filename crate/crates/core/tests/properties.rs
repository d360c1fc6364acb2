use std::collections::HashSet;

use covert_nav::maps::{build_cover_map, build_goal_map, build_height_map};
use covert_nav::perception::{euclidean_cluster, ClusterParams};
use covert_nav::rl::{
    cql_train, greedy_from_row, log_sum_exp, reward_collision, reward_cover, reward_goal, reward_threat, ActionIndex,
    ActionMask, CqlParams, RewardTerms, TabularTransition, NUM_ACTIONS,
};
use covert_nav::sim::modulate_velocity;
use covert_nav::threat::{
    build_vantage_set, cover_aware_threat, line_of_sight, multi_perspective_threat, temporal_visibility_with,
    ThreatBelief, ThreatFieldEngine, ThreatParams, Trajectory, VisibilityParams,
};
use covert_nav::worldgen::{generate_world, sample_labeled_point_cloud, CloudParams, PointCloud, Scenario};
use covert_nav::{Cell, CoverMap, GridSpec, HeightMap, ScalarGrid, ThreatMap};
use proptest::prelude::*;

fn height_map(w: usize, h: usize, values: &[f64]) -> HeightMap {
    let spec = GridSpec::new(w, h, 0.5, 0.0, 0.0).unwrap();
    HeightMap::new(ScalarGrid::from_values(spec, values[..w * h].to_vec()).unwrap()).unwrap()
}

fn heights() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (2usize..12, 2usize..12).prop_flat_map(|(w, h)| {
        let cell = prop_oneof![3 => Just(0.0), 1 => 0.0f64..3.0];
        (Just(w), Just(h), proptest::collection::vec(cell, w * h))
    })
}

/// Points on a 1/64 m lattice so translations by whole cells stay exact.
fn lattice_points(extent: i32) -> impl Strategy<Value = Vec<[f64; 3]>> {
    proptest::collection::vec((0..extent * 64, 0..extent * 64, 0..192i32), 0..300).prop_map(|v| {
        v.into_iter()
            .map(|(x, y, z)| [x as f64 / 64.0, y as f64 / 64.0, z as f64 / 64.0])
            .collect()
    })
}

fn cell_strategy(w: usize, h: usize) -> impl Strategy<Value = Cell> {
    (0..w, 0..h).prop_map(|(i, j)| Cell::new(i, j))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn world_and_cloud_are_deterministic(seed in any::<u64>(), k in 0usize..3) {
        let scenario = Scenario::ALL[k];
        let a = generate_world(scenario, 16.0, 16.0, seed).unwrap();
        let b = generate_world(scenario, 16.0, 16.0, seed).unwrap();
        prop_assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let params = CloudParams::default();
        let ca = sample_labeled_point_cloud(&a, &params, seed ^ 1).unwrap();
        let cb = sample_labeled_point_cloud(&b, &params, seed ^ 1).unwrap();
        prop_assert_eq!(ca.0.to_xyz(), cb.0.to_xyz());
        prop_assert_eq!(ca.1, cb.1);
    }
}

proptest! {
    #[test]
    fn clustering_partitions_the_non_ground_cloud(
        pts in proptest::collection::vec((0.0f64..6.0, 0.0f64..6.0, 0.0f64..2.0), 0..120),
        link in 0.2f64..1.5,
        min_points in 1usize..6,
    ) {
        let cloud = PointCloud::new(pts.iter().map(|&(x, y, z)| [x, y, z]).collect()).unwrap();
        let params = ClusterParams { link_radius: link, min_points, ground_band: 0.15 };
        let clusters = euclidean_cluster(&cloud, &params).unwrap();
        let mut seen = HashSet::new();
        for c in &clusters {
            prop_assert!(c.point_indices.len() >= min_points);
            for &k in &c.point_indices {
                prop_assert!(cloud.points()[k][2] >= params.ground_band);
                prop_assert!(seen.insert(k), "point {} in two clusters", k);
            }
        }
        // with no size filter the clusters cover every non-ground point
        let all = euclidean_cluster(&cloud, &ClusterParams { min_points: 1, ..params }).unwrap();
        let covered: usize = all.iter().map(|c| c.point_indices.len()).sum();
        let non_ground = cloud.points().iter().filter(|p| p[2] >= params.ground_band).count();
        prop_assert_eq!(covered, non_ground);
        // the filtered clusters are exactly the large unfiltered ones
        let large: Vec<_> = all.into_iter().filter(|c| c.point_indices.len() >= min_points).map(|c| c.point_indices).collect();
        let kept: Vec<_> = clusters.into_iter().map(|c| c.point_indices).collect();
        prop_assert_eq!(kept, large);
    }

    #[test]
    fn cover_values_stay_in_unit_range(pts in lattice_points(8), pick in any::<u64>()) {
        let cloud = PointCloud::new(pts).unwrap();
        let spec = GridSpec::covering(8.0, 8.0, 0.5).unwrap();
        let cover_idx: Vec<usize> = (0..cloud.len()).filter(|k| (pick >> (k % 64)) & 1 == 1).collect();
        let cover = build_cover_map(&cloud, &cover_idx, &spec).unwrap();
        prop_assert!(cover.grid().values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn maps_are_translation_equivariant(pts in lattice_points(6), di in -4i32..5, dj in -4i32..5) {
        let (dx, dy) = (di as f64 * 0.5, dj as f64 * 0.5);
        let cloud = PointCloud::new(pts.clone()).unwrap();
        let moved = PointCloud::new(pts.iter().map(|p| [p[0] + dx, p[1] + dy, p[2]]).collect()).unwrap();
        let spec = GridSpec::new(12, 12, 0.5, 0.0, 0.0).unwrap();
        let moved_spec = GridSpec::new(12, 12, 0.5, dx, dy).unwrap();
        let cover_idx: Vec<usize> = (0..cloud.len()).step_by(2).collect();
        let a = build_cover_map(&cloud, &cover_idx, &spec).unwrap();
        let b = build_cover_map(&moved, &cover_idx, &moved_spec).unwrap();
        prop_assert_eq!(a.grid().values(), b.grid().values());
        let ha = build_height_map(&cloud, &spec, 0.0);
        let hb = build_height_map(&moved, &moved_spec, 0.0);
        prop_assert_eq!(ha.grid().values(), hb.grid().values());
    }

    #[test]
    fn goal_distance_peaks_at_one_and_grows_along_rays(
        w in 1usize..20, h in 1usize..20, gi in 0usize..20, gj in 0usize..20,
    ) {
        let spec = GridSpec::new(w, h, 0.5, 0.0, 0.0).unwrap();
        let goal = spec.cell_center(Cell::new(gi % w, gj % h));
        let map = build_goal_map(&spec, goal).unwrap();
        let d = map.distance();
        let max = d.values().iter().cloned().fold(0.0, f64::max);
        prop_assert!(max == 1.0 || w * h == 1 || max == 0.0);
        prop_assert!(d.values().iter().all(|v| (0.0..=1.0).contains(v)));
        // rows and columns through the goal cell are rays from it
        let g = Cell::new(gi % w, gj % h);
        for i in g.i..w.saturating_sub(1) {
            prop_assert!(d.get(Cell::new(i + 1, g.j)) >= d.get(Cell::new(i, g.j)));
        }
        for i in (1..=g.i).rev() {
            prop_assert!(d.get(Cell::new(i - 1, g.j)) >= d.get(Cell::new(i, g.j)));
        }
        for j in g.j..h.saturating_sub(1) {
            prop_assert!(d.get(Cell::new(g.i, j + 1)) >= d.get(Cell::new(g.i, j)));
        }
        for j in (1..=g.j).rev() {
            prop_assert!(d.get(Cell::new(g.i, j - 1)) >= d.get(Cell::new(g.i, j)));
        }
    }

    #[test]
    fn belief_stays_normalized(
        updates in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 64), 1..30),
    ) {
        let spec = GridSpec::new(8, 8, 0.5, 0.0, 0.0).unwrap();
        let mut b = ThreatBelief::uniform(spec);
        for lik in updates {
            if let Ok(post) = b.update(&lik) {
                b = post;
            }
            prop_assert!((b.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(b.probs().iter().all(|p| *p >= 0.0));
        }
    }

    #[test]
    fn line_of_sight_is_symmetric(
        (w, h, values) in heights(),
        a in (0usize..12, 0usize..12),
        b in (0usize..12, 0usize..12),
        eye in 0.3f64..2.5,
        range in 1.0f64..8.0,
    ) {
        let hm = height_map(w, h, &values);
        let (a, b) = (Cell::new(a.0 % w, a.1 % h), Cell::new(b.0 % w, b.1 % h));
        let p = VisibilityParams { eye_height: eye, max_range: range };
        prop_assert_eq!(line_of_sight(&hm, a, b, &p), line_of_sight(&hm, b, a, &p));
        prop_assert!(line_of_sight(&hm, a, a, &p));
    }

    #[test]
    fn cover_aware_threat_orders_as_claimed(
        rho in 0.0f64..=1.0, cover in 0.0f64..=1.0, goal in 0.0f64..=1.0, bump in 0.0f64..1.0,
    ) {
        let phi = cover_aware_threat(rho, cover, goal);
        prop_assert!((0.0..=1.0).contains(&phi));
        prop_assert_eq!(cover_aware_threat(rho, 1.0, goal), 0.0);
        prop_assert!(cover_aware_threat(rho, (cover + bump).min(1.0), goal) <= phi);
        prop_assert!(cover_aware_threat((rho + bump).min(1.0), cover, goal) >= phi);
        prop_assert!(cover_aware_threat(rho, cover, (goal + bump).min(1.0)) >= phi);
        if rho > 0.0 && cover < 1.0 && goal > 0.0 {
            prop_assert!(phi > 0.0);
        }
    }

    #[test]
    fn extending_a_trajectory_never_lowers_visibility(
        steps in proptest::collection::vec((-1i64..=1, -1i64..=1), 1..20),
        extra in proptest::collection::vec((-1i64..=1, -1i64..=1), 1..10),
        gamma in 0.5f64..=1.0,
        cell in cell_strategy(16, 16),
        seed in any::<u64>(),
    ) {
        let walk = |moves: &[(i64, i64)], from: Cell| {
            let mut cells = vec![from];
            for (di, dj) in moves {
                let c = *cells.last().unwrap();
                cells.push(Cell::new((c.i as i64 + di).clamp(0, 15) as usize, (c.j as i64 + dj).clamp(0, 15) as usize));
            }
            cells
        };
        let base = walk(&steps, Cell::new(8, 8));
        let mut longer = base.clone();
        longer.extend(walk(&extra, *base.last().unwrap()).into_iter().skip(1));
        let tau = |c: Cell, r: Cell| {
            let z = (c.i * 31 + c.j * 17 + r.i * 7 + r.j * 3) as u64 ^ seed;
            (z % 1000) as f64 / 1000.0
        };
        let short = temporal_visibility_with(cell, &Trajectory::new(base).unwrap(), gamma, &tau);
        let long = temporal_visibility_with(cell, &Trajectory::new(longer).unwrap(), gamma, &tau);
        prop_assert!(long >= short);
    }

    #[test]
    fn vantage_set_keeps_the_top_k_and_bounds_tau(
        (w, h, values) in heights(),
        weights in proptest::collection::vec(0.0f64..1.0, 144),
        k in 1usize..8,
        floor in 0.0f64..0.05,
    ) {
        let hm = height_map(w, h, &values);
        let spec = *hm.spec();
        let mut wts = weights[..w * h].to_vec();
        wts[0] += 1e-3;
        let belief = ThreatBelief::from_weights(spec, wts).unwrap();
        let set = build_vantage_set(&belief, k, floor).unwrap();
        prop_assert!(set.len() <= k);
        let chosen: HashSet<Cell> = set.iter().map(|v| v.cell).collect();
        let smallest = set.iter().map(|v| v.probability).fold(f64::INFINITY, f64::min);
        for c in spec.cells() {
            let p = belief.prob(c);
            if chosen.contains(&c) {
                prop_assert!(p >= floor);
                continue;
            }
            // everything left out is below the floor or no heavier than what was kept
            prop_assert!(p < floor || p == 0.0 || (set.len() == k && p <= smallest));
        }
        let params = ThreatParams { vantage_capacity: k, mass_floor: floor, ..ThreatParams::default() };
        let mut engine = ThreatFieldEngine::new(hm.clone(), params);
        let tau = engine.perspective(&set);
        let top = set.iter().map(|v| v.probability).fold(0.0, f64::max);
        for c in spec.cells() {
            let direct = multi_perspective_threat(c, &set, &hm, &params.visibility);
            prop_assert_eq!(tau[spec.index(c)], direct);
            prop_assert!(direct <= top);
        }
    }

    #[test]
    fn reward_terms_have_fixed_signs(
        (w, h, values) in heights(),
        cover in proptest::collection::vec(0.0f64..=1.0, 144),
        threat in proptest::collection::vec(0.0f64..=1.0, 144),
        cells in proptest::collection::vec((0usize..12, 0usize..12), 1..6),
        d in (0.0f64..30.0, 0.0f64..30.0),
        lambda in 0.0f64..20.0,
    ) {
        let hm = height_map(w, h, &values);
        let spec = *hm.spec();
        let cm = CoverMap::new(ScalarGrid::from_values(spec, cover[..w * h].to_vec()).unwrap()).unwrap();
        let tm = ThreatMap::new(ScalarGrid::from_values(spec, threat[..w * h].to_vec()).unwrap()).unwrap();
        let cells: Vec<Cell> = cells.iter().map(|&(i, j)| Cell::new(i % w, j % h)).collect();
        let terms = RewardTerms {
            cover: reward_cover(&cm, &cells, 1.0),
            threat: reward_threat(&tm, &cells, 2.0),
            goal: reward_goal(d.0, d.1, 5.0),
            collision: reward_collision(&hm, &cells, 1.5, lambda),
        };
        prop_assert!(terms.cover >= 0.0);
        prop_assert!(terms.threat <= 0.0);
        prop_assert!(terms.collision == 0.0 || terms.collision == -lambda);
        prop_assert_eq!(terms.total(), terms.cover + terms.threat + terms.goal + terms.collision);
    }

    #[test]
    fn greedy_choice_ignores_constant_shifts(
        row in proptest::collection::vec(-10.0f64..10.0, NUM_ACTIONS),
        allowed in proptest::collection::vec(any::<bool>(), NUM_ACTIONS),
        shift in -100.0f64..100.0,
    ) {
        let mut mask = ActionMask::none();
        for (a, ok) in ActionIndex::all().zip(&allowed) {
            mask.set(a, *ok);
        }
        let shifted: Vec<f64> = row.iter().map(|v| v + shift).collect();
        // shifting can merge two nearly equal values under rounding, so compare
        // only when the winner is clear
        let best = greedy_from_row(&row, &mask);
        if let Ok(a) = best {
            let margin = mask.allowed().filter(|b| *b != a).map(|b| row[a.index()] - row[b.index()]).fold(f64::INFINITY, f64::min);
            if margin > 1e-9 {
                prop_assert_eq!(greedy_from_row(&shifted, &mask).unwrap(), a);
            }
        } else {
            prop_assert!(greedy_from_row(&shifted, &mask).is_err());
        }
    }

    #[test]
    fn velocity_modulation_is_monotone(
        v in 0.0f64..1.0, w in -1.0f64..1.0,
        t in 0.0f64..=1.0, d in 0.0f64..=1.0, bump in 0.0f64..1.0,
    ) {
        prop_assert_eq!(modulate_velocity((v, w), 0.0, 0.0), (v, w));
        let (v0, w0) = modulate_velocity((v, w), t, d);
        let (v1, w1) = modulate_velocity((v, w), (t + bump).min(1.0), d);
        let (v2, _) = modulate_velocity((v, w), t, (d + bump).min(1.0));
        prop_assert!(v1 <= v0 && v2 <= v0);
        prop_assert!(w1.abs() <= w0.abs());
        prop_assert!(v0 >= 0.0 && v0 <= v);
    }
}

/// Mean over dataset samples of `logsumexp(Q(s, .)) - Q(s, a)`.
fn conservative_gap(q: &covert_nav::rl::QTable, data: &[TabularTransition]) -> f64 {
    data.iter()
        .map(|t| log_sum_exp(q.row(t.state)).0 - q.get(t.state, t.action))
        .sum::<f64>()
        / data.len() as f64
}

#[test]
fn stronger_regularizer_never_widens_the_gap() {
    // 5-state chain: action 1 moves right, action 0 left; entering state 4 pays 1
    let mut data = Vec::new();
    for s in 0..4usize {
        for a in 0..2 {
            let next = if a == 1 { s + 1 } else { s.saturating_sub(1) };
            data.push(TabularTransition {
                state: s,
                action: a,
                reward: if next == 4 { 1.0 } else { 0.0 },
                next_state: next,
                terminal: next == 4,
            });
        }
    }
    // skew the behavior towards moving right
    let right: Vec<TabularTransition> = (0..4).map(|s| data[2 * s + 1]).collect();
    data.extend(right);
    for seed in 0..4 {
        let gaps: Vec<f64> = [0.0, 0.2, 1.0]
            .iter()
            .map(|&alpha| {
                let params = CqlParams { alpha, learning_rate: 0.1, batch_size: data.len(), epochs: 3000, ..CqlParams::default() };
                let (q, _) = cql_train(5, 2, &data, &params, seed).unwrap();
                conservative_gap(&q, &data)
            })
            .collect();
        assert!(gaps[1] <= gaps[0] + 1e-9 && gaps[2] <= gaps[1] + 1e-9, "gaps {gaps:?}");
    }
}
