#![allow(dead_code)]

pub mod metric_oracle;

use mirrorbench::color::{ColorLabel, WALL_GREY};
use mirrorbench::world::{
    Condition, CubeRole, CubeSpec, Heading, MirrorSpec, Pose, RoomSpec, ScenarioConfig, WallId,
    WorldState, CUBE_EDGE, MAX_STEPS, MIRROR_BOTTOM, MIRROR_TOP, ROOM_DEPTH, ROOM_WIDTH, WALL_HEIGHT,
};

pub fn north_mirror(u_min: f64, u_max: f64) -> MirrorSpec {
    MirrorSpec {
        wall: WallId::North,
        u_min,
        u_max,
        z_min: MIRROR_BOTTOM,
        z_max: MIRROR_TOP,
        frame_color: WALL_GREY,
    }
}

/// A hand-built room: optional mirror, given cubes, no distractors.
pub fn room_scenario(mirror: Option<MirrorSpec>, cubes: Vec<CubeSpec>, ego: Pose) -> ScenarioConfig {
    ScenarioConfig {
        condition: if mirror.is_some() { Condition::E1 } else { Condition::E2 },
        seed: 0,
        room: RoomSpec {
            width: ROOM_WIDTH,
            depth: ROOM_DEPTH,
            wall_height: WALL_HEIGHT,
            mirror,
            occluders: Vec::new(),
        },
        ego_color: ColorLabel::Red,
        ego_start: ego,
        cubes,
        distractors: Vec::new(),
        wrong_color: None,
        max_steps: MAX_STEPS,
    }
}

pub fn cube(color: ColorLabel, x: f64, y: f64) -> CubeSpec {
    CubeSpec { color, center: [x, y], edge: CUBE_EDGE, role: CubeRole::Candidate }
}

pub fn pose(x: f64, y: f64, deg: u16) -> Pose {
    Pose::new(x, y, Heading::try_from(deg).expect("multiple of 30"))
}

pub fn state_at(p: Pose) -> WorldState {
    WorldState { t: 1, ego: p, distractors: Vec::new(), bumped_last: false }
}

/// Independent flat-shading oracle: channel * 1/(1 + 0.15 d), rounded.
pub fn expected_shade(rgb: [u8; 3], distance: f64) -> [u8; 3] {
    let f = 1.0 / (1.0 + 0.15 * distance);
    rgb.map(|c| (f64::from(c) * f).round().clamp(0.0, 255.0) as u8)
}
