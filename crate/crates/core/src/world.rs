//! Room geometry, scenario generation and discrete kinematics.
//!
//! Coordinates are meters with the origin at the room center, `x` east,
//! `y` north and `z` up. Headings are integer degrees measured
//! counter-clockwise from `+x`; turning left adds 30 degrees.
//!
//! Positions live on a dyadic grid (multiples of 2^-20 m) and every
//! translation uses a pre-quantized displacement vector, so moves are exact
//! in floating point: `w` followed by `s` restores the pose bit-for-bit.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::color::{ColorLabel, Rgb, WALL_GREY};

pub const ROOM_WIDTH: f64 = 10.0;
pub const ROOM_DEPTH: f64 = 10.0;
pub const WALL_HEIGHT: f64 = 3.0;
pub const STEP_LEN: f64 = 0.5;
pub const BODY_RADIUS: f64 = 0.3;
/// Total capsule height (cylinder plus both hemispherical caps).
pub const BODY_HEIGHT: f64 = 1.7;
pub const CUBE_EDGE: f64 = 0.6;
pub const EYE_HEIGHT: f64 = 1.4;
pub const TURN_DEG: u16 = 30;
pub const MAX_STEPS: u32 = 100;

pub const MIRROR_BOTTOM: f64 = 0.2;
pub const MIRROR_TOP: f64 = 2.6;
pub const OCCLUDER_HEIGHT: f64 = 1.8;
pub const OCCLUDER_THICKNESS: f64 = 0.05;

const GRID: f64 = 1_048_576.0; // 2^20
const SQRT3_2: f64 = 0.866_025_403_784_438_6;

/// Snaps a coordinate onto the dyadic position grid.
pub fn quantize(v: f64) -> f64 {
    (v * GRID).round() / GRID
}

/// The five diagnostic conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    E1,
    E2,
    E3,
    E4,
    E5,
}

impl Condition {
    pub const ALL: [Condition; 5] = [
        Condition::E1,
        Condition::E2,
        Condition::E3,
        Condition::E4,
        Condition::E5,
    ];

    pub fn index(self) -> u8 {
        self as u8 + 1
    }

    /// E1-E4 select a cube; E5 ends with a self-attribution.
    pub fn is_cube_task(self) -> bool {
        self != Condition::E5
    }

    pub fn has_mirror(self) -> bool {
        self != Condition::E2
    }

    pub fn description(self) -> &'static str {
        match self {
            Condition::E1 => "Active mirror-based self-identification",
            Condition::E2 => "Self-identification without mirror evidence",
            Condition::E3 => "Self-identification under conflicting language",
            Condition::E4 => "Self-other disambiguation via action",
            Condition::E5 => "Open-ended self-attribution under clutter",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "E{}", self.index())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown condition id `{0}` (expected one of E1..E5)")]
    UnknownCondition(String),
}

impl FromStr for Condition {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "E1" => Ok(Condition::E1),
            "E2" => Ok(Condition::E2),
            "E3" => Ok(Condition::E3),
            "E4" => Ok(Condition::E4),
            "E5" => Ok(Condition::E5),
            _ => Err(ConfigError::UnknownCondition(s.to_string())),
        }
    }
}

/// Agent actions. `Done` ends the episode and is handled by the episode engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    #[serde(rename = "w")]
    Forward,
    #[serde(rename = "s")]
    Backward,
    #[serde(rename = "a")]
    TurnLeft,
    #[serde(rename = "d")]
    TurnRight,
    #[serde(rename = "done")]
    Done,
}

impl Action {
    pub const MOVES: [Action; 4] = [
        Action::Forward,
        Action::TurnLeft,
        Action::Backward,
        Action::TurnRight,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Action::Forward => "w",
            Action::Backward => "s",
            Action::TurnLeft => "a",
            Action::TurnRight => "d",
            Action::Done => "done",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Action> {
        match s {
            "w" => Some(Action::Forward),
            "s" => Some(Action::Backward),
            "a" => Some(Action::TurnLeft),
            "d" => Some(Action::TurnRight),
            "done" => Some(Action::Done),
            _ => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Heading in integer degrees, always a multiple of 30 in `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub struct Heading(u16);

impl Heading {
    pub const EAST: Heading = Heading(0);
    pub const NORTH: Heading = Heading(90);
    pub const WEST: Heading = Heading(180);
    pub const SOUTH: Heading = Heading(270);

    pub fn from_degrees(deg: i32) -> Option<Heading> {
        let d = deg.rem_euclid(360);
        (d % i32::from(TURN_DEG) == 0).then_some(Heading(d as u16))
    }

    pub fn degrees(self) -> u16 {
        self.0
    }

    pub fn radians(self) -> f64 {
        f64::from(self.0).to_radians()
    }

    fn sector(self) -> usize {
        usize::from(self.0 / TURN_DEG)
    }

    pub fn turned_left(self) -> Heading {
        Heading((self.0 + TURN_DEG) % 360)
    }

    pub fn turned_right(self) -> Heading {
        Heading((self.0 + 360 - TURN_DEG) % 360)
    }

    /// Exact unit vector for this heading.
    pub fn unit(self) -> (f64, f64) {
        UNIT[self.sector()]
    }

    /// Smallest absolute angle between two headings, in degrees.
    pub fn angle_to(self, other: Heading) -> u16 {
        let d = (i32::from(self.0) - i32::from(other.0)).rem_euclid(360) as u16;
        d.min(360 - d)
    }
}

impl TryFrom<u16> for Heading {
    type Error = String;

    fn try_from(v: u16) -> Result<Self, Self::Error> {
        if v < 360 && v.is_multiple_of(TURN_DEG) {
            Ok(Heading(v))
        } else {
            Err(format!("heading {v} is not a multiple of {TURN_DEG} in [0, 360)"))
        }
    }
}

impl From<Heading> for u16 {
    fn from(h: Heading) -> u16 {
        h.0
    }
}

const UNIT: [(f64, f64); 12] = [
    (1.0, 0.0),
    (SQRT3_2, 0.5),
    (0.5, SQRT3_2),
    (0.0, 1.0),
    (-0.5, SQRT3_2),
    (-SQRT3_2, 0.5),
    (-1.0, 0.0),
    (-SQRT3_2, -0.5),
    (-0.5, -SQRT3_2),
    (0.0, -1.0),
    (0.5, -SQRT3_2),
    (SQRT3_2, -0.5),
];

fn step_displacement(h: Heading) -> (f64, f64) {
    let (c, s) = h.unit();
    (quantize(STEP_LEN * c), quantize(STEP_LEN * s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: Heading,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: Heading) -> Self {
        Pose { x, y, heading }
    }

    pub fn distance_to(&self, p: (f64, f64)) -> f64 {
        (self.x - p.0).hypot(self.y - p.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WallId {
    North,
    South,
    East,
    West,
}

impl WallId {
    pub const ALL: [WallId; 4] = [WallId::North, WallId::South, WallId::East, WallId::West];

    /// Unit normal pointing into the room.
    pub fn inward_normal(self) -> (f64, f64) {
        match self {
            WallId::North => (0.0, -1.0),
            WallId::South => (0.0, 1.0),
            WallId::East => (-1.0, 0.0),
            WallId::West => (1.0, 0.0),
        }
    }

    /// Heading that looks straight at this wall.
    pub fn facing_heading(self) -> Heading {
        match self {
            WallId::North => Heading::NORTH,
            WallId::South => Heading::SOUTH,
            WallId::East => Heading::EAST,
            WallId::West => Heading::WEST,
        }
    }

    /// Signed coordinate of the wall plane along its normal axis.
    pub fn plane_offset(self) -> f64 {
        match self {
            WallId::North => ROOM_DEPTH / 2.0,
            WallId::South => -ROOM_DEPTH / 2.0,
            WallId::East => ROOM_WIDTH / 2.0,
            WallId::West => -ROOM_WIDTH / 2.0,
        }
    }

    /// True when the wall's tangent axis is `x` (north/south walls).
    pub fn tangent_is_x(self) -> bool {
        matches!(self, WallId::North | WallId::South)
    }

    /// Maps a tangential coordinate `u` and a distance from the wall onto room coordinates.
    pub fn point_at(self, u: f64, dist_from_wall: f64) -> (f64, f64) {
        let n = self.inward_normal();
        let off = self.plane_offset();
        if self.tangent_is_x() {
            (u, off + n.1 * dist_from_wall)
        } else {
            (off + n.0 * dist_from_wall, u)
        }
    }

    /// Distance of a room point from this wall's plane.
    pub fn distance_from(self, p: (f64, f64)) -> f64 {
        let off = self.plane_offset();
        if self.tangent_is_x() {
            (off - p.1).abs()
        } else {
            (off - p.0).abs()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MirrorSpec {
    pub wall: WallId,
    pub u_min: f64,
    pub u_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub frame_color: Rgb,
}

impl MirrorSpec {
    pub fn height(&self) -> f64 {
        self.z_max - self.z_min
    }

    pub fn u_center(&self) -> f64 {
        0.5 * (self.u_min + self.u_max)
    }

    /// Point on the floor plan `dist` meters in front of the mirror center.
    pub fn front_point(&self, dist: f64) -> (f64, f64) {
        self.wall.point_at(self.u_center(), dist)
    }
}

/// Axis-aligned opaque panel standing on the floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccluderSpec {
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub width: f64,
    pub depth: f64,
    pub wall_height: f64,
    pub mirror: Option<MirrorSpec>,
    pub occluders: Vec<OccluderSpec>,
}

impl RoomSpec {
    /// Strict interior test for a body center of radius `BODY_RADIUS`.
    pub fn contains_body(&self, x: f64, y: f64) -> bool {
        x.abs() < self.width / 2.0 - BODY_RADIUS && y.abs() < self.depth / 2.0 - BODY_RADIUS
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CubeRole {
    Candidate,
    Clutter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeSpec {
    pub color: ColorLabel,
    pub center: [f64; 2],
    pub edge: f64,
    pub role: CubeRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistractorSpec {
    pub color: ColorLabel,
    pub initial_pose: Pose,
    pub motion_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub condition: Condition,
    pub seed: u64,
    pub room: RoomSpec,
    pub ego_color: ColorLabel,
    pub ego_start: Pose,
    pub cubes: Vec<CubeSpec>,
    pub distractors: Vec<DistractorSpec>,
    pub wrong_color: Option<ColorLabel>,
    pub max_steps: u32,
}

impl ScenarioConfig {
    pub fn candidates(&self) -> impl Iterator<Item = &CubeSpec> {
        self.cubes.iter().filter(|c| c.role == CubeRole::Candidate)
    }

    pub fn candidate_colored(&self, color: ColorLabel) -> Option<&CubeSpec> {
        self.candidates().find(|c| c.color == color)
    }

    pub fn initial_state(&self) -> WorldState {
        WorldState {
            t: 1,
            ego: self.ego_start,
            distractors: self.distractors.iter().map(|d| d.initial_pose).collect(),
            bumped_last: false,
        }
    }

    /// Checks every structural invariant of a generated scenario.
    pub fn validate(&self) -> Result<(), String> {
        let cond = self.condition;
        if self.room.mirror.is_some() != cond.has_mirror() {
            return Err(format!("{cond}: mirror presence mismatch"));
        }
        if !self.room.occluders.is_empty() && cond != Condition::E5 {
            return Err(format!("{cond}: occluders outside E5"));
        }
        if self.wrong_color.is_some() != (cond == Condition::E3) {
            return Err(format!("{cond}: wrong_color presence mismatch"));
        }
        if self.wrong_color == Some(self.ego_color) {
            return Err("wrong_color equals ego color".into());
        }
        let n_d = self.distractors.len();
        match cond {
            Condition::E4 | Condition::E5 if !(1..=6).contains(&n_d) => {
                return Err(format!("{cond}: {n_d} distractors"));
            }
            Condition::E1 | Condition::E2 | Condition::E3 if n_d != 0 => {
                return Err(format!("{cond}: unexpected distractors"));
            }
            _ => {}
        }
        let cands: Vec<&CubeSpec> = self.candidates().collect();
        if cond.is_cube_task() {
            if cands.len() != 3 {
                return Err(format!("{cond}: {} candidate cubes", cands.len()));
            }
            if cands.iter().filter(|c| c.color == self.ego_color).count() != 1 {
                return Err("exactly one candidate must match the ego color".into());
            }
            for (i, a) in cands.iter().enumerate() {
                for b in &cands[i + 1..] {
                    if a.color == b.color {
                        return Err("candidate colors not distinct".into());
                    }
                    let d = (a.center[0] - b.center[0]).hypot(a.center[1] - b.center[1]);
                    if d < 2.0 * STEP_LEN {
                        return Err(format!("candidates only {d:.3} m apart"));
                    }
                }
            }
        } else if !cands.is_empty() {
            return Err("E5 has no candidate cubes".into());
        }
        if let Some(m) = &self.room.mirror {
            for c in &self.cubes {
                if m.wall.distance_from((c.center[0], c.center[1])) < MIN_CUBE_MIRROR_GAP {
                    return Err("cube flush against mirror wall".into());
                }
            }
            if m.frame_color != WALL_GREY {
                return Err("mirror frame must use the wall material".into());
            }
            if self.ego_start.heading.angle_to(m.wall.facing_heading()) < 90 {
                return Err("ego starts facing the mirror".into());
            }
        }
        if !self.room.contains_body(self.ego_start.x, self.ego_start.y) {
            return Err("ego start outside room".into());
        }
        for d in &self.distractors {
            if !self.room.contains_body(d.initial_pose.x, d.initial_pose.y) {
                return Err("distractor start outside room".into());
            }
        }
        if !(1..=MAX_STEPS).contains(&self.max_steps) {
            return Err(format!("max_steps {} outside 1..={MAX_STEPS}", self.max_steps));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub t: u32,
    pub ego: Pose,
    pub distractors: Vec<Pose>,
    pub bumped_last: bool,
}

const MIN_CUBE_MIRROR_GAP: f64 = 1.5;
const CUBE_CENTER_LIMIT: f64 = 4.2;
const SPAWN_LIMIT: f64 = 4.0;

fn uniform_point(rng: &mut ChaCha8Rng, limit: f64) -> (f64, f64) {
    (
        quantize(rng.gen_range(-limit..=limit)),
        quantize(rng.gen_range(-limit..=limit)),
    )
}

fn random_heading(rng: &mut ChaCha8Rng) -> Heading {
    Heading(rng.gen_range(0..12u16) * TURN_DEG)
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Builds the randomized world for one episode.
///
/// The shared layout (ego color, mirror wall, ego spawn, candidate cubes) is
/// drawn first from the same stream for every condition, so E1, E2 and E3
/// with equal seeds differ only in their condition-specific parts.
pub fn generate_scenario(condition: Condition, seed: u64) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let ego_color = *ColorLabel::ALL.choose(&mut rng).expect("palette is non-empty");
    let wall = *WallId::ALL.choose(&mut rng).expect("four walls");
    let width: f64 = rng.gen_range(3.0..=4.0);
    let half_span = ROOM_WIDTH / 2.0 - 1.0 - width / 2.0;
    let u_center: f64 = rng.gen_range(-half_span..=half_span);
    let mirror = MirrorSpec {
        wall,
        u_min: u_center - width / 2.0,
        u_max: u_center + width / 2.0,
        z_min: MIRROR_BOTTOM,
        z_max: MIRROR_TOP,
        frame_color: WALL_GREY,
    };

    let ego_xy = loop {
        let p = uniform_point(&mut rng, SPAWN_LIMIT);
        if wall.distance_from(p) >= 1.5 {
            break p;
        }
    };
    let allowed: Vec<Heading> = (0..12u16)
        .map(|k| Heading(k * TURN_DEG))
        .filter(|h| h.angle_to(wall.facing_heading()) >= 90)
        .collect();
    let ego_heading = *allowed.choose(&mut rng).expect("non-empty heading set");
    let ego_start = Pose::new(ego_xy.0, ego_xy.1, ego_heading);

    let mut others: Vec<ColorLabel> = ColorLabel::ALL
        .iter()
        .copied()
        .filter(|&c| c != ego_color)
        .collect();
    others.shuffle(&mut rng);
    let mut cand_colors = [ego_color, others[0], others[1]];
    cand_colors.shuffle(&mut rng);

    let mut cubes: Vec<CubeSpec> = Vec::new();
    let place_cube = |rng: &mut ChaCha8Rng, existing: &[CubeSpec]| loop {
        let p = uniform_point(rng, CUBE_CENTER_LIMIT);
        let clear_of_mirror = wall.distance_from(p) >= MIN_CUBE_MIRROR_GAP;
        let clear_of_cubes = existing
            .iter()
            .all(|c| dist(p, (c.center[0], c.center[1])) >= 2.0 * STEP_LEN);
        if clear_of_mirror && clear_of_cubes && dist(p, ego_xy) >= 1.5 {
            break p;
        }
    };
    let candidate_positions: Vec<(f64, f64)> = cand_colors
        .iter()
        .map(|_| {
            let p = place_cube(&mut rng, &cubes);
            cubes.push(CubeSpec {
                color: ego_color,
                center: [p.0, p.1],
                edge: CUBE_EDGE,
                role: CubeRole::Candidate,
            });
            p
        })
        .collect();
    cubes.clear();

    let mut scenario = ScenarioConfig {
        condition,
        seed,
        room: RoomSpec {
            width: ROOM_WIDTH,
            depth: ROOM_DEPTH,
            wall_height: WALL_HEIGHT,
            mirror: condition.has_mirror().then(|| mirror.clone()),
            occluders: Vec::new(),
        },
        ego_color,
        ego_start,
        cubes: Vec::new(),
        distractors: Vec::new(),
        wrong_color: None,
        max_steps: MAX_STEPS,
    };

    if condition.is_cube_task() {
        scenario.cubes = cand_colors
            .iter()
            .zip(&candidate_positions)
            .map(|(&color, p)| CubeSpec {
                color,
                center: [p.0, p.1],
                edge: CUBE_EDGE,
                role: CubeRole::Candidate,
            })
            .collect();
    }

    match condition {
        Condition::E1 | Condition::E2 => {}
        Condition::E3 => {
            scenario.wrong_color = Some(others[rng.gen_range(0..others.len())]);
        }
        Condition::E4 => {
            scenario.distractors = sample_distractors(&mut rng, ego_color, ego_xy);
            if rng.gen_bool(0.5) {
                let i = rng.gen_range(0..scenario.distractors.len());
                scenario.distractors[i].color = ego_color;
            }
        }
        Condition::E5 => {
            scenario.distractors = sample_distractors(&mut rng, ego_color, ego_xy);
            let n_clutter = rng.gen_range(2..=5);
            let mut clutter: Vec<CubeSpec> = Vec::new();
            for _ in 0..n_clutter {
                let p = place_cube(&mut rng, &clutter);
                clutter.push(CubeSpec {
                    color: *ColorLabel::ALL.choose(&mut rng).expect("palette"),
                    center: [p.0, p.1],
                    edge: CUBE_EDGE,
                    role: CubeRole::Clutter,
                });
            }
            scenario.cubes = clutter;
            scenario.room.occluders = sample_occluders(&mut rng, &mirror);
        }
    }
    scenario
}

fn sample_distractors(
    rng: &mut ChaCha8Rng,
    ego_color: ColorLabel,
    ego_xy: (f64, f64),
) -> Vec<DistractorSpec> {
    let n = rng.gen_range(1..=6);
    let palette: Vec<ColorLabel> = ColorLabel::ALL
        .iter()
        .copied()
        .filter(|&c| c != ego_color)
        .collect();
    (0..n)
        .map(|_| {
            let p = loop {
                let p = uniform_point(rng, SPAWN_LIMIT);
                if dist(p, ego_xy) >= 1.0 {
                    break p;
                }
            };
            DistractorSpec {
                color: *palette.choose(rng).expect("palette"),
                initial_pose: Pose::new(p.0, p.1, random_heading(rng)),
                motion_seed: rng.gen(),
            }
        })
        .collect()
}

/// Places 1-3 panels between the room center and the mirror so that, seen
/// from the room center, they cover 30-70% of the mirror's width.
fn sample_occluders(rng: &mut ChaCha8Rng, mirror: &MirrorSpec) -> Vec<OccluderSpec> {
    let k = rng.gen_range(1..=3usize);
    let coverage: f64 = rng.gen_range(0.3..=0.7);
    let width = mirror.u_max - mirror.u_min;
    let covered_each = width * coverage / k as f64;
    let weights: Vec<f64> = (0..=k).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let free = width * (1.0 - coverage);
    let center_dist = mirror.wall.distance_from((0.0, 0.0));

    let mut u = mirror.u_min;
    let mut panels = Vec::with_capacity(k);
    for w in weights.iter().take(k) {
        u += free * w / total;
        let (a, b) = (u, u + covered_each);
        u = b;
        // Panel plane distance from the mirror wall.
        let d: f64 = rng.gen_range(1.0..=3.0);
        let scale = (center_dist - d) / center_dist;
        let (ua, ub) = (a * scale, b * scale);
        let p0 = mirror.wall.point_at(ua, d - OCCLUDER_THICKNESS / 2.0);
        let p1 = mirror.wall.point_at(ub, d + OCCLUDER_THICKNESS / 2.0);
        panels.push(OccluderSpec {
            min: [p0.0.min(p1.0), p0.1.min(p1.1)],
            max: [p0.0.max(p1.0), p0.1.max(p1.1)],
            height: OCCLUDER_HEIGHT,
        });
    }
    panels
}

/// Moves one body by one discrete action; blocked translations leave the
/// pose unchanged and report a bump.
pub fn move_pose(pose: Pose, action: Action, room: &RoomSpec) -> (Pose, bool) {
    match action {
        Action::TurnLeft => (Pose { heading: pose.heading.turned_left(), ..pose }, false),
        Action::TurnRight => (Pose { heading: pose.heading.turned_right(), ..pose }, false),
        Action::Forward | Action::Backward => {
            let (dx, dy) = step_displacement(pose.heading);
            let (nx, ny) = if action == Action::Forward {
                (pose.x + dx, pose.y + dy)
            } else {
                (pose.x - dx, pose.y - dy)
            };
            if room.contains_body(nx, ny) {
                (Pose { x: nx, y: ny, ..pose }, false)
            } else {
                (pose, true)
            }
        }
        Action::Done => (pose, false),
    }
}

/// Applies one ego action. Distractors are untouched; `t` advances.
pub fn apply_action(state: &WorldState, action: Action, room: &RoomSpec) -> (WorldState, bool) {
    let (ego, bumped) = move_pose(state.ego, action, room);
    let next = WorldState {
        t: state.t + 1,
        ego,
        distractors: state.distractors.clone(),
        bumped_last: bumped,
    };
    (next, bumped)
}

/// Forward-biased categorical draw: w 0.5, a 0.2, d 0.2, s 0.1.
pub fn distractor_action(motion_seed: u64, t: u32) -> Action {
    let mut rng = ChaCha8Rng::seed_from_u64(motion_seed);
    rng.set_stream(u64::from(t));
    match rng.gen_range(0..10u8) {
        0..=4 => Action::Forward,
        5 | 6 => Action::TurnLeft,
        7 | 8 => Action::TurnRight,
        _ => Action::Backward,
    }
}

/// Advances every distractor by one sampled action. The draw depends only on
/// the distractor's motion seed and `state.t`.
pub fn step_distractors(state: &WorldState, scenario: &ScenarioConfig) -> WorldState {
    let distractors = state
        .distractors
        .iter()
        .zip(&scenario.distractors)
        .map(|(&pose, spec)| {
            move_pose(pose, distractor_action(spec.motion_seed, state.t), &scenario.room).0
        })
        .collect();
    WorldState { distractors, ..state.clone() }
}

/// Closed-inequality reach test used for cube selection.
pub fn cube_within_reach(state: &WorldState, cube: &CubeSpec) -> bool {
    reach_distance(state, cube) <= reach_threshold(cube)
}

pub fn reach_threshold(cube: &CubeSpec) -> f64 {
    STEP_LEN + cube.edge / 2.0 + BODY_RADIUS
}

pub fn reach_distance(state: &WorldState, cube: &CubeSpec) -> f64 {
    state.ego.distance_to((cube.center[0], cube.center[1]))
}
