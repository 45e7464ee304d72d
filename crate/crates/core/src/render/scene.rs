//! Ray-scene intersection for the mirror room.

use std::ops::{Add, Mul, Neg, Sub};

use crate::color::{ColorLabel, Rgb, CEILING_GREY, FLOOR_GREY, OCCLUDER_GREY, WALL_GREY};
use crate::world::{
    MirrorSpec, ScenarioConfig, WallId, WorldState, BODY_HEIGHT, BODY_RADIUS, EYE_HEIGHT,
};

const EPS: f64 = 1e-9;
/// Vertical extent of the darker head band on robot bodies.
pub const BAND_Z: (f64, f64) = (1.5, 1.6);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        self * (1.0 / self.norm())
    }

    pub fn get(self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Which body a capsule belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BodyId {
    Ego,
    Distractor(usize),
}

/// What a ray landed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    Floor,
    Ceiling,
    Wall(WallId),
    Mirror,
    /// Wall-material border around the mirror glass.
    MirrorFrame,
    Cube(usize),
    Occluder(usize),
    Body { id: BodyId, band: bool },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub surface: Surface,
    pub color: Rgb,
}

#[derive(Debug, Clone)]
struct Aabb {
    min: Vec3,
    max: Vec3,
    color: Rgb,
    surface: Surface,
}

#[derive(Debug, Clone)]
struct Capsule {
    cx: f64,
    cy: f64,
    color: ColorLabel,
    id: BodyId,
}

const FRAME_WIDTH: f64 = 0.05;

/// Static snapshot of every renderable object for one world state.
#[derive(Debug, Clone)]
pub struct Scene {
    half_w: f64,
    half_d: f64,
    height: f64,
    mirror: Option<MirrorSpec>,
    boxes: Vec<Aabb>,
    bodies: Vec<Capsule>,
}

impl Scene {
    pub fn new(scenario: &ScenarioConfig, state: &WorldState) -> Scene {
        let room = &scenario.room;
        let mut boxes = Vec::new();
        for (i, c) in scenario.cubes.iter().enumerate() {
            let h = c.edge / 2.0;
            boxes.push(Aabb {
                min: Vec3::new(c.center[0] - h, c.center[1] - h, 0.0),
                max: Vec3::new(c.center[0] + h, c.center[1] + h, c.edge),
                color: c.color.rgb(),
                surface: Surface::Cube(i),
            });
        }
        for (i, o) in room.occluders.iter().enumerate() {
            boxes.push(Aabb {
                min: Vec3::new(o.min[0], o.min[1], 0.0),
                max: Vec3::new(o.max[0], o.max[1], o.height),
                color: OCCLUDER_GREY,
                surface: Surface::Occluder(i),
            });
        }
        let mut bodies = vec![Capsule {
            cx: state.ego.x,
            cy: state.ego.y,
            color: scenario.ego_color,
            id: BodyId::Ego,
        }];
        for (i, (pose, spec)) in state.distractors.iter().zip(&scenario.distractors).enumerate() {
            bodies.push(Capsule {
                cx: pose.x,
                cy: pose.y,
                color: spec.color,
                id: BodyId::Distractor(i),
            });
        }
        Scene {
            half_w: room.width / 2.0,
            half_d: room.depth / 2.0,
            height: room.wall_height,
            mirror: room.mirror.clone(),
            boxes,
            bodies,
        }
    }

    pub fn mirror(&self) -> Option<&MirrorSpec> {
        self.mirror.as_ref()
    }

    /// Nearest hit along `origin + t * dir` (`dir` unit length). The ego body
    /// is only considered when `include_ego` is set.
    pub fn cast(&self, origin: Vec3, dir: Vec3, include_ego: bool) -> Hit {
        let mut best = self.room_hit(origin, dir);
        for b in &self.boxes {
            if let Some(t) = ray_aabb(origin, dir, b.min, b.max) {
                if t < best.t {
                    best = Hit { t, surface: b.surface, color: b.color };
                }
            }
        }
        for c in &self.bodies {
            if !include_ego && c.id == BodyId::Ego {
                continue;
            }
            if let Some(t) = ray_capsule(origin, dir, c.cx, c.cy) {
                if t < best.t {
                    let z = origin.z + dir.z * t;
                    let band = z >= BAND_Z.0 && z <= BAND_Z.1;
                    let color = if band { c.color.band_rgb() } else { c.color.rgb() };
                    best = Hit { t, surface: Surface::Body { id: c.id, band }, color };
                }
            }
        }
        best
    }

    fn room_hit(&self, o: Vec3, d: Vec3) -> Hit {
        let mut best_t = f64::INFINITY;
        let mut surface = Surface::Floor;
        let mut consider = |t: f64, s: Surface| {
            if t > EPS && t < best_t {
                best_t = t;
                surface = s;
            }
        };
        if d.x > 0.0 {
            consider((self.half_w - o.x) / d.x, Surface::Wall(WallId::East));
        } else if d.x < 0.0 {
            consider((-self.half_w - o.x) / d.x, Surface::Wall(WallId::West));
        }
        if d.y > 0.0 {
            consider((self.half_d - o.y) / d.y, Surface::Wall(WallId::North));
        } else if d.y < 0.0 {
            consider((-self.half_d - o.y) / d.y, Surface::Wall(WallId::South));
        }
        if d.z > 0.0 {
            consider((self.height - o.z) / d.z, Surface::Ceiling);
        } else if d.z < 0.0 {
            consider(-o.z / d.z, Surface::Floor);
        }
        let color = match surface {
            Surface::Floor => FLOOR_GREY,
            Surface::Ceiling => CEILING_GREY,
            _ => WALL_GREY,
        };
        let mut hit = Hit { t: best_t, surface, color };
        if let (Surface::Wall(w), Some(m)) = (surface, &self.mirror) {
            if w == m.wall {
                let p = o + d * best_t;
                let u = if w.tangent_is_x() { p.x } else { p.y };
                if u >= m.u_min && u <= m.u_max && p.z >= m.z_min && p.z <= m.z_max {
                    let inner = u >= m.u_min + FRAME_WIDTH
                        && u <= m.u_max - FRAME_WIDTH
                        && p.z >= m.z_min + FRAME_WIDTH
                        && p.z <= m.z_max - FRAME_WIDTH;
                    if inner {
                        hit.surface = Surface::Mirror;
                    } else {
                        hit.surface = Surface::MirrorFrame;
                        hit.color = m.frame_color;
                    }
                }
            }
        }
        hit
    }
}

/// Unit normal of the mirror plane pointing into the room.
pub fn mirror_normal(m: &MirrorSpec) -> Vec3 {
    let n = m.wall.inward_normal();
    Vec3::new(n.0, n.1, 0.0)
}

/// Specular reflection of `d` about the unit normal `n`.
pub fn reflect_dir(d: Vec3, n: Vec3) -> Vec3 {
    d - n * (2.0 * d.dot(n))
}

/// Eye position for a body standing at `(x, y)`.
pub fn eye_at(x: f64, y: f64) -> Vec3 {
    Vec3::new(x, y, EYE_HEIGHT)
}

/// Entering intersection with an axis-aligned box; `None` when the ray
/// starts inside or misses.
fn ray_aabb(o: Vec3, d: Vec3, min: Vec3, max: Vec3) -> Option<f64> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for axis in 0..3 {
        let (oa, da, lo, hi) = (o.get(axis), d.get(axis), min.get(axis), max.get(axis));
        if da == 0.0 {
            if oa < lo || oa > hi {
                return None;
            }
        } else {
            let inv = 1.0 / da;
            let (mut t0, mut t1) = ((lo - oa) * inv, (hi - oa) * inv);
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            t_near = t_near.max(t0);
            t_far = t_far.min(t1);
            if t_near > t_far {
                return None;
            }
        }
    }
    (t_near > EPS).then_some(t_near)
}

/// Entering intersection with an upright capsule at `(cx, cy)`.
fn ray_capsule(o: Vec3, d: Vec3, cx: f64, cy: f64) -> Option<f64> {
    let r = BODY_RADIUS;
    let (z0, z1) = (r, BODY_HEIGHT - r);
    let mut best: Option<f64> = None;
    let mut take = |t: f64| {
        if t > EPS && best.is_none_or(|b| t < b) {
            best = Some(t);
        }
    };

    // Cylinder side.
    let (ox, oy) = (o.x - cx, o.y - cy);
    let a = d.x * d.x + d.y * d.y;
    if a > 0.0 {
        let b = ox * d.x + oy * d.y;
        let c = ox * ox + oy * oy - r * r;
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let t = (-b - disc.sqrt()) / a;
            let z = o.z + d.z * t;
            if z >= z0 && z <= z1 {
                take(t);
            }
        }
    }
    // Hemispherical caps.
    for (zc, upper) in [(z0, false), (z1, true)] {
        let oc = Vec3::new(ox, oy, o.z - zc);
        let b = oc.dot(d);
        let c = oc.dot(oc) - r * r;
        let disc = b * b - c;
        if disc >= 0.0 {
            let t = -b - disc.sqrt();
            let z = o.z + d.z * t;
            if (upper && z >= z1) || (!upper && z <= z0) {
                take(t);
            }
        }
    }
    best
}
