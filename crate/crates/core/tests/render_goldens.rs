use std::f64::consts::PI;
use std::path::PathBuf;

use proptest::prelude::*;
use worldmem_core::fixtures::{arena, render_fixtures};
use worldmem_core::geometry::is_visible;
use worldmem_core::observation::{
    palette_color, render_frame, viewpoint_readout, Frame, NoOcclusionBackend, ObservationBackend, ObservationContext, RaycastBackend,
    DEFAULT_HEIGHT, DEFAULT_WIDTH,
};
use worldmem_core::world::{new_world, PlayerId, Pose, WorldState};
use worldmem_core::{Action, ViewConfig};

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/goldens")
        .join(format!("{name}.ppm"))
}

/// Set `UPDATE_GOLDENS=1` to rewrite the checked-in images.
#[test]
fn fixtures_match_goldens() {
    let update = std::env::var("UPDATE_GOLDENS").is_ok_and(|v| v == "1");
    for f in render_fixtures() {
        let frame = render_frame(&f.readout, &f.sprites, DEFAULT_WIDTH, DEFAULT_HEIGHT).unwrap();
        let path = golden_path(f.name);
        if update {
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(&path, frame.to_ppm()).unwrap();
            continue;
        }
        let bytes = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let golden = Frame::from_ppm(&bytes).unwrap();
        assert!(golden == frame, "{} differs from its golden image", f.name);
    }
}

#[test]
fn golden_sprite_fixtures_differ_only_by_occlusion() {
    let f = render_fixtures();
    let visible = render_frame(&f[3].readout, &f[3].sprites, DEFAULT_WIDTH, DEFAULT_HEIGHT).unwrap();
    let occluded = render_frame(&f[4].readout, &f[4].sprites, DEFAULT_WIDTH, DEFAULT_HEIGHT).unwrap();
    let color = palette_color(&PlayerId::new("p2"));
    assert!(visible.count_color(color) > 0);
    assert_eq!(occluded.count_color(color), 0);
}

fn duel(p1: Pose, p2: Pose) -> Option<WorldState> {
    let mut w = new_world(arena(), 0).unwrap();
    let (a, b) = (PlayerId::new("p1"), PlayerId::new("p2"));
    w.add_player(a.clone()).unwrap();
    w.add_player(b.clone()).unwrap();
    w.place_player(&a, p1).ok()?;
    w.place_player(&b, p2).ok()?;
    Some(w)
}

fn pose() -> impl Strategy<Value = Pose> {
    (0.5f64..23.5, 0.5f64..23.5, -PI..PI).prop_map(|(x, y, t)| Pose::new(x, y, t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    /// With two players, the opponent's color appears in the reference frame
    /// exactly when the opponent passes the visibility test.
    #[test]
    fn presence_pixels_follow_visibility(p1 in pose(), p2 in pose()) {
        let Some(w) = duel(p1, p2) else { return Ok(()) };
        let view = ViewConfig::default();
        let id = PlayerId::new("p1");
        let readout = viewpoint_readout(&w, &id, &view).unwrap();
        let ctx = ObservationContext::new(4, DEFAULT_WIDTH, DEFAULT_HEIGHT);
        let frame = RaycastBackend.observe(&ctx, &readout, &Action::NOOP, DEFAULT_WIDTH, DEFAULT_HEIGHT).unwrap();
        let seen = is_visible(w.map(), &p1, p2.position(), view.fov, view.max_range);
        prop_assert_eq!(frame.contains_color(palette_color(&PlayerId::new("p2"))), seen);

        // Drawing hidden opponents can only add presence.
        let loose = NoOcclusionBackend.observe(&ctx, &readout, &Action::NOOP, DEFAULT_WIDTH, DEFAULT_HEIGHT).unwrap();
        if seen {
            prop_assert!(loose.contains_color(palette_color(&PlayerId::new("p2"))));
        }
    }
}
