//! Geometric oracle for "the ego can see its own reflection".

use serde::{Deserialize, Serialize};

use super::scene::{mirror_normal, reflect_dir, Scene, Surface, Vec3};
use super::{CameraFrame, CameraSpec};
use crate::world::{MirrorSpec, ScenarioConfig, WorldState, BODY_HEIGHT, BODY_RADIUS};

pub const SAMPLE_COUNT: usize = 64;
pub const VIS_THRESHOLD: f64 = 0.2;
const ROWS: usize = 8;
const COLS: usize = SAMPLE_COUNT / ROWS;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityReport {
    pub visible_fraction: f64,
    pub m: bool,
    pub rays_cast: u32,
}

impl VisibilityReport {
    fn none() -> Self {
        VisibilityReport { visible_fraction: 0.0, m: false, rays_cast: 0 }
    }
}

/// Mirror image of `p` across the mirror's plane.
pub fn reflect_point(p: Vec3, mirror: &MirrorSpec) -> Vec3 {
    let off = mirror.wall.plane_offset();
    if mirror.wall.tangent_is_x() {
        Vec3::new(p.x, 2.0 * off - p.y, p.z)
    } else {
        Vec3::new(2.0 * off - p.x, p.y, p.z)
    }
}

/// Half-width of the capsule outline at height `z`.
fn outline_half_width(z: f64) -> f64 {
    let r = BODY_RADIUS;
    let (z0, z1) = (r, BODY_HEIGHT - r);
    let dz = if z < z0 {
        z0 - z
    } else if z > z1 {
        z - z1
    } else {
        0.0
    };
    (r * r - dz * dz).max(0.0).sqrt()
}

/// Stratified points on the body's outline as seen along the mirror normal:
/// an 8x8 grid over the capsule's central cross-section parallel to the
/// mirror.
pub fn silhouette_samples(x: f64, y: f64, mirror: &MirrorSpec) -> Vec<Vec3> {
    let tangent = if mirror.wall.tangent_is_x() {
        Vec3::new(1.0, 0.0, 0.0)
    } else {
        Vec3::new(0.0, 1.0, 0.0)
    };
    let base = Vec3::new(x, y, 0.0);
    let mut pts = Vec::with_capacity(SAMPLE_COUNT);
    for i in 0..ROWS {
        let z = BODY_HEIGHT * (i as f64 + 0.5) / ROWS as f64;
        let hw = outline_half_width(z);
        for j in 0..COLS {
            let lateral = hw * (2.0 * (j as f64 + 0.5) / COLS as f64 - 1.0);
            pts.push(base + tangent * lateral + Vec3::new(0.0, 0.0, z));
        }
    }
    pts
}

/// Fraction of the ego's reflected silhouette that the camera can see.
///
/// A sample counts when the eye-to-image ray is inside the frustum, crosses
/// the mirror glass, and is unobstructed on both legs (eye to glass, glass
/// to the body point).
pub fn ego_reflection_visibility(
    state: &WorldState,
    scenario: &ScenarioConfig,
    cam: &CameraSpec,
) -> VisibilityReport {
    let Some(mirror) = scenario.room.mirror.as_ref() else {
        return VisibilityReport::none();
    };
    let scene = Scene::new(scenario, state);
    let basis = CameraFrame::new(state, cam);
    let normal = mirror_normal(mirror);
    let samples = silhouette_samples(state.ego.x, state.ego.y, mirror);

    let mut visible = 0usize;
    for q in &samples {
        let image = reflect_point(*q, mirror);
        let to_image = image - basis.eye;
        let total = to_image.norm();
        if total == 0.0 {
            continue;
        }
        let dir = to_image * (1.0 / total);
        if !basis.in_frustum(dir) {
            continue;
        }
        let first = scene.cast(basis.eye, dir, false);
        if first.surface != Surface::Mirror {
            continue;
        }
        let glass = basis.eye + dir * first.t;
        let bounced = reflect_dir(dir, normal);
        let remaining = (*q - glass).norm();
        let second = scene.cast(glass, bounced, false);
        if second.t >= remaining {
            visible += 1;
        }
    }
    let fraction = visible as f64 / SAMPLE_COUNT as f64;
    VisibilityReport {
        visible_fraction: fraction,
        m: fraction >= VIS_THRESHOLD,
        rays_cast: SAMPLE_COUNT as u32,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::WALL_GREY;
    use crate::world::WallId;

    fn north_mirror() -> MirrorSpec {
        MirrorSpec {
            wall: WallId::North,
            u_min: -2.0,
            u_max: 2.0,
            z_min: 0.2,
            z_max: 2.6,
            frame_color: WALL_GREY,
        }
    }

    #[test]
    fn point_on_plane_is_fixed() {
        let p = Vec3::new(0.7, 5.0, 1.1);
        assert_eq!(reflect_point(p, &north_mirror()), p);
    }

    #[test]
    fn point_in_front_maps_behind() {
        let p = Vec3::new(0.7, 4.0, 1.1);
        assert_eq!(reflect_point(p, &north_mirror()), Vec3::new(0.7, 6.0, 1.1));
    }

    #[test]
    fn silhouette_has_sixty_four_points_inside_outline() {
        let pts = silhouette_samples(1.0, 2.0, &north_mirror());
        assert_eq!(pts.len(), SAMPLE_COUNT);
        for p in pts {
            assert_eq!(p.y, 2.0);
            assert!((p.x - 1.0).abs() <= BODY_RADIUS);
            assert!(p.z > 0.0 && p.z < BODY_HEIGHT);
        }
    }
}
