//! Hand-built maps and sessions shared by tests, benchmarks and goldens.

use std::f64::consts::PI;

use crate::bot::chase_action;
use crate::dynamics::{ActionSet, MotionConfig};
use crate::geometry::{depth_readout, DepthReadout, Vec2, ViewConfig};
use crate::observation::{viewpoint_readout, SpriteProjection};
use crate::replay::{HeadlessRun, ReplayLog};
use crate::world::{new_world, PlayerId, Pose, SpawnPoint, WorldMap};

fn add_box(vertices: &mut Vec<Vec2>, edges: &mut Vec<(usize, usize)>, min: Vec2, max: Vec2) {
    let base = vertices.len();
    vertices.extend([min, Vec2::new(max.x, min.y), max, Vec2::new(min.x, max.y)]);
    edges.extend([(base, base + 1), (base + 1, base + 2), (base + 2, base + 3), (base + 3, base)]);
}

/// 24 x 24 room with four 3 x 3 pillars and a spawn in each corner facing
/// the center.
pub fn arena() -> WorldMap {
    let mut v = Vec::new();
    let mut e = Vec::new();
    add_box(&mut v, &mut e, Vec2::new(0.0, 0.0), Vec2::new(24.0, 24.0));
    for (x, y) in [(6.0, 6.0), (15.0, 6.0), (6.0, 15.0), (15.0, 15.0)] {
        add_box(&mut v, &mut e, Vec2::new(x, y), Vec2::new(x + 3.0, y + 3.0));
    }
    let spawns = vec![
        SpawnPoint::new(2.0, 2.0, PI / 4.0),
        SpawnPoint::new(22.0, 22.0, -3.0 * PI / 4.0),
        SpawnPoint::new(22.0, 2.0, 3.0 * PI / 4.0),
        SpawnPoint::new(2.0, 22.0, -PI / 4.0),
    ];
    WorldMap::new("arena", v, e, spawns)
}

/// 500 edges: a 120 x 120 box plus 124 unit pillars on a 4 x 4 pitch.
pub fn benchmark_map() -> WorldMap {
    let mut v = Vec::new();
    let mut e = Vec::new();
    add_box(&mut v, &mut e, Vec2::new(0.0, 0.0), Vec2::new(120.0, 120.0));
    let mut placed = 0;
    'rows: for row in 0..12 {
        for col in 0..11 {
            if placed == 124 {
                break 'rows;
            }
            let x = 10.0 + col as f64 * 9.0;
            let y = 6.0 + row as f64 * 9.0;
            add_box(&mut v, &mut e, Vec2::new(x, y), Vec2::new(x + 1.0, y + 1.0));
            placed += 1;
        }
    }
    let spawns = vec![
        SpawnPoint::new(4.0, 3.0, 0.5),
        SpawnPoint::new(115.0, 3.0, 2.5),
        SpawnPoint::new(115.0, 116.0, -2.5),
        SpawnPoint::new(4.0, 116.0, -0.5),
    ];
    WorldMap::new("benchmark-500", v, e, spawns)
}

/// Two bots chasing each other in [`arena`] for `ticks` ticks.
pub fn scripted_deathmatch(ticks: u64, seed: u64) -> ReplayLog {
    let motion = MotionConfig::default();
    let mut run = HeadlessRun::new(arena(), seed, motion, ViewConfig::default()).expect("arena is valid");
    let ids = [PlayerId::new("p1"), PlayerId::new("p2")];
    for t in 0..ticks {
        let joins: Vec<PlayerId> = if t == 0 { ids.to_vec() } else { Vec::new() };
        let actions: ActionSet = ids.iter().map(|id| (id.clone(), chase_action(run.state(), id, &motion))).collect();
        run.step(&[], &joins, &actions);
    }
    run.into_log()
}

/// A named renderer input for golden images.
pub struct RenderFixture {
    pub name: &'static str,
    pub readout: DepthReadout,
    pub sprites: Vec<SpriteProjection>,
}

/// Empty view, frontal wall, corner, visible sprite, occluded sprite.
pub fn render_fixtures() -> Vec<RenderFixture> {
    let view = ViewConfig::default();
    let readout = |map: &WorldMap, pose: Pose| depth_readout(map, &pose, &view).expect("default view is valid");
    let empty = WorldMap::new("empty", vec![], vec![], vec![]);
    let wall = WorldMap::new("wall", vec![Vec2::new(5.0, -50.0), Vec2::new(5.0, 50.0)], vec![(0, 1)], vec![]);
    let corner = WorldMap::new(
        "corner",
        vec![Vec2::new(6.0, -30.0), Vec2::new(6.0, 6.0), Vec2::new(-30.0, 6.0)],
        vec![(0, 1), (1, 2)],
        vec![],
    );

    let duel = |with_wall: bool| {
        let mut v = Vec::new();
        let mut e = Vec::new();
        add_box(&mut v, &mut e, Vec2::new(-10.0, -10.0), Vec2::new(10.0, 10.0));
        if with_wall {
            add_box(&mut v, &mut e, Vec2::new(2.0, -1.5), Vec2::new(2.5, 1.5));
        }
        let map = WorldMap::new("duel", v, e, vec![SpawnPoint::new(-3.0, 0.0, 0.0), SpawnPoint::new(6.0, 0.5, PI)]);
        let mut w = new_world(map, 0).expect("duel map is valid");
        w.add_player(PlayerId::new("p1")).expect("spawn free");
        w.add_player(PlayerId::new("p2")).expect("spawn free");
        viewpoint_readout(&w, &PlayerId::new("p1"), &view).expect("p1 active")
    };
    let visible = duel(false);
    let occluded = duel(true);

    vec![
        RenderFixture {
            name: "empty",
            readout: readout(&empty, Pose::new(0.0, 0.0, 0.0)),
            sprites: vec![],
        },
        RenderFixture {
            name: "frontal_wall",
            readout: readout(&wall, Pose::new(0.0, 0.0, 0.0)),
            sprites: vec![],
        },
        RenderFixture {
            name: "corner",
            readout: readout(&corner, Pose::new(0.0, 0.0, PI / 4.0)),
            sprites: vec![],
        },
        RenderFixture {
            name: "visible_sprite",
            readout: visible.depth,
            sprites: visible.sprites,
        },
        RenderFixture {
            name: "occluded_sprite",
            readout: occluded.depth,
            sprites: occluded.hidden,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::validate_map;

    #[test]
    fn fixture_maps_validate() {
        assert!(validate_map(&arena(), 0.4).is_valid());
        let bench = benchmark_map();
        assert_eq!(bench.edges().len(), 500);
        assert!(validate_map(&bench, 0.4).is_valid());
    }

    #[test]
    fn duel_fixtures_split_visible_and_hidden() {
        let f = render_fixtures();
        assert_eq!(f.len(), 5);
        assert_eq!(f[3].sprites.len(), 1);
        assert_eq!(f[4].sprites.len(), 1);
        assert!(f[4].sprites[0].anchor_depth < f[4].sprites[0].distance);
    }
}
