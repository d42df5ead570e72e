use std::f64::consts::PI;

use proptest::prelude::*;
use worldmem_core::geometry::*;
use worldmem_core::level::{generate_map, LevelSpec};
use worldmem_core::rng::SplitMix64;
use worldmem_core::world::{Pose, SpawnPoint, WorldMap};

/// Marches along the ray, advancing by the current clearance to the segment
/// (never less than `step`), until within `step` of it.
fn march(ray: &Ray, a: Vec2, b: Vec2, max_t: f64, step: f64) -> Option<f64> {
    let mut t = 0.0;
    while t <= max_t {
        let d = point_segment_distance(ray.at(t), a, b);
        if d < step {
            return Some(t);
        }
        t += (d - step).max(step);
    }
    None
}

fn exhaustive(map: &WorldMap, ray: &Ray, max_range: f64) -> (f64, Option<usize>) {
    let mut best = (max_range, None);
    for (i, (a, b)) in map.segments().enumerate() {
        if let Some(t) = ray_segment_intersection(ray, a, b).unwrap() {
            if t < best.0 || (t == best.0 && best.1.is_some_and(|j| i < j)) {
                best = (t, Some(i));
            }
        }
    }
    best
}

fn vec2(range: f64) -> impl Strategy<Value = Vec2> {
    (-range..range, -range..range).prop_map(|(x, y)| Vec2::new(x, y))
}

fn random_walls(rng: &mut SplitMix64, n: usize) -> WorldMap {
    let mut v = Vec::new();
    let mut e = Vec::new();
    for _ in 0..n {
        let a = Vec2::new(rng.range_f64(-15.0, 15.0), rng.range_f64(-15.0, 15.0));
        let b = a + Vec2::from_angle(rng.range_f64(-PI, PI)) * rng.range_f64(0.5, 8.0);
        v.extend([a, b]);
        e.push((v.len() - 2, v.len() - 1));
    }
    WorldMap::new("random", v, e, vec![])
}

#[test]
fn intersection_agrees_with_marcher() {
    let mut rng = SplitMix64::new(0xC0FFEE);
    let mut checked = 0;
    let mut hits = 0;
    while checked < 500 {
        let ray = Ray::from_angle(
            Vec2::new(rng.range_f64(-5.0, 5.0), rng.range_f64(-5.0, 5.0)),
            rng.range_f64(-PI, PI),
        );
        let a = Vec2::new(rng.range_f64(-10.0, 10.0), rng.range_f64(-10.0, 10.0));
        let b = Vec2::new(rng.range_f64(-10.0, 10.0), rng.range_f64(-10.0, 10.0));
        let e = b - a;
        let sin = ray.direction().cross(e).abs() / e.length();
        let near_end = [a, b].iter().any(|p| {
            let rel = *p - ray.origin();
            rel.dot(ray.direction()) > -1e-3 && ray.direction().cross(rel).abs() < 1e-3
        });
        if sin < 0.1 || near_end || point_segment_distance(ray.origin(), a, b) < 1e-3 {
            continue;
        }
        checked += 1;
        let exact = ray_segment_intersection(&ray, a, b).unwrap();
        let marched = march(&ray, a, b, 40.0, 1e-4);
        match (exact, marched) {
            (Some(t), Some(m)) => {
                hits += 1;
                assert!((t - m).abs() < 2e-3, "exact {t} marched {m}");
            }
            (None, None) => {}
            other => panic!("disagreement {other:?}"),
        }
    }
    assert!(hits > 50, "too few hits ({hits}) to be meaningful");
}

#[test]
fn cast_depth_matches_exhaustive_minimum_on_generated_maps() {
    let mut rng = SplitMix64::new(17);
    for seed in 0..3 {
        let map = generate_map(&LevelSpec::with_seed(seed)).unwrap();
        let b = map.bounds();
        for _ in 0..60 {
            let o = Vec2::new(rng.range_f64(b.min.x, b.max.x), rng.range_f64(b.min.y, b.max.y));
            let ray = Ray::from_angle(o, rng.range_f64(-PI, PI));
            let hit = cast_depth(&map, &ray, 64.0);
            let (d, edge) = exhaustive(&map, &ray, 64.0);
            assert!((hit.distance - d).abs() <= 1e-9, "{} vs {d}", hit.distance);
            assert_eq!(hit.edge_index, edge);
        }
    }
}

#[test]
fn mirrored_corridor_readout_is_symmetric() {
    let map = WorldMap::new(
        "corridor",
        vec![
            Vec2::new(-2.0, -1.5),
            Vec2::new(30.0, -1.5),
            Vec2::new(-2.0, 1.5),
            Vec2::new(30.0, 1.5),
            Vec2::new(12.0, -1.5),
            Vec2::new(12.0, 1.5),
        ],
        vec![(0, 1), (2, 3), (4, 5)],
        vec![],
    );
    for k in [1usize, 7, 64, 320] {
        let view = ViewConfig {
            columns: k,
            ..Default::default()
        };
        let r = depth_readout(&map, &Pose::new(0.0, 0.0, 0.0), &view).unwrap();
        for j in 0..k {
            assert!((r.disparity[j] - r.disparity[k - 1 - j]).abs() < 1e-9, "k={k} j={j}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn cast_depth_never_exceeds_any_intersection(seed in any::<u64>(), o in vec2(12.0), ang in -PI..PI) {
        let map = random_walls(&mut SplitMix64::new(seed), 25);
        let ray = Ray::from_angle(o, ang);
        let hit = cast_depth(&map, &ray, 64.0);
        prop_assert!(hit.distance <= 64.0);
        for (a, b) in map.segments() {
            if let Some(t) = ray_segment_intersection(&ray, a, b).unwrap() {
                prop_assert!(hit.distance <= t + 1e-12);
            }
        }
        if hit.edge_index.is_none() {
            prop_assert_eq!(hit.distance, 64.0);
        }
    }

    #[test]
    fn disparity_stays_in_bounds(seed in any::<u64>(), o in vec2(12.0), theta in -PI..PI) {
        let map = random_walls(&mut SplitMix64::new(seed), 20);
        let view = ViewConfig { columns: 64, ..Default::default() };
        let r = depth_readout(&map, &Pose::new(o.x, o.y, theta), &view).unwrap();
        for d in &r.disparity {
            prop_assert!(*d >= 1.0 / view.max_range && *d <= 1.0 / D_MIN);
        }
    }

    #[test]
    fn readout_invariant_under_rigid_motion(
        seed in any::<u64>(), o in vec2(10.0), theta in -PI..PI, shift in vec2(50.0), rot in -PI..PI,
    ) {
        let map = random_walls(&mut SplitMix64::new(seed), 15);
        let view = ViewConfig { columns: 48, ..Default::default() };
        let base = depth_readout(&map, &Pose::new(o.x, o.y, theta), &view).unwrap();

        let moved = |p: Vec2| {
            let rel = p - o;
            let (s, c) = (libm::sin(rot), libm::cos(rot));
            o + shift + Vec2::new(c * rel.x - s * rel.y, s * rel.x + c * rel.y)
        };
        let map2 = WorldMap::new(
            "moved",
            map.vertices().iter().map(|v| moved(*v)).collect(),
            map.edges().to_vec(),
            vec![],
        );
        let p2 = moved(o);
        let r2 = depth_readout(&map2, &Pose::new(p2.x, p2.y, theta + rot), &view).unwrap();
        for j in 0..48 {
            let (a, b) = (base.hits[j].distance, r2.hits[j].distance);
            // Grazing hits can legitimately flip under rounding; skip those.
            if base.hits[j].edge_index == r2.hits[j].edge_index {
                prop_assert!((a - b).abs() < 1e-9 * (1.0 + a), "col {} {} vs {}", j, a, b);
            }
        }
    }

    #[test]
    fn line_of_sight_is_symmetric(seed in any::<u64>(), p in vec2(15.0), q in vec2(15.0)) {
        let map = random_walls(&mut SplitMix64::new(seed), 30);
        prop_assert_eq!(line_of_sight(&map, p, q), line_of_sight(&map, q, p));
    }

    #[test]
    fn visible_implies_line_of_sight(seed in any::<u64>(), p in vec2(15.0), q in vec2(15.0), theta in -PI..PI) {
        let map = random_walls(&mut SplitMix64::new(seed), 30);
        let viewer = Pose::new(p.x, p.y, theta);
        if is_visible(&map, &viewer, q, PI / 2.0, 64.0) {
            prop_assert!(line_of_sight(&map, p, q));
        }
    }

    #[test]
    fn circle_clearance_matches_dense_sampling(c in vec2(5.0), a in vec2(5.0), b in vec2(5.0), r in 0.01f64..2.0) {
        prop_assume!(a.distance(b) > 1e-3);
        let exact = circle_segment_distance(c, r, a, b).unwrap();
        let n = 20_000;
        let sampled = (0..=n)
            .map(|i| c.distance(a + (b - a) * (i as f64 / n as f64)))
            .fold(f64::INFINITY, f64::min) - r;
        // The sampled minimum overestimates by at most half a sample spacing.
        let spacing = a.distance(b) / n as f64;
        prop_assert!(exact <= sampled + 1e-12);
        prop_assert!(sampled - exact <= spacing);
    }
}

#[test]
fn visibility_occlusion_matches_depth_cast() {
    let map = WorldMap::new(
        "wall",
        vec![Vec2::new(3.0, -2.0), Vec2::new(3.0, 2.0)],
        vec![(0, 1)],
        vec![SpawnPoint::new(0.0, 0.0, 0.0)],
    );
    let viewer = Pose::new(0.0, 0.0, 0.0);
    for y in [-1.5, -0.5, 0.0, 0.7, 1.9, 2.5, 3.5] {
        let target = Vec2::new(6.0, y);
        let ray = Ray::new(viewer.position(), target - viewer.position()).unwrap();
        let occluded = cast_depth(&map, &ray, 64.0).distance < viewer.position().distance(target);
        assert_eq!(is_visible(&map, &viewer, target, PI / 2.0, 64.0), !occluded, "y={y}");
    }
}
