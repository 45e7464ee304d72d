//! First-person software raycaster with a single planar mirror bounce.
//!
//! Shading is flat: a surface's color is scaled by `1 / (1 + 0.15 * d)`
//! where `d` is the total path length from the eye, including the leg after
//! a mirror bounce. The ego body is invisible to primary rays and only shows
//! up through the mirror.

mod scene;
mod visibility;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::color::Rgb;
use crate::world::{ScenarioConfig, WorldState, EYE_HEIGHT};

pub use scene::{eye_at, mirror_normal, reflect_dir, BodyId, Hit, Scene, Surface, Vec3, BAND_Z};
pub use visibility::{
    ego_reflection_visibility, reflect_point, silhouette_samples, VisibilityReport, SAMPLE_COUNT,
    VIS_THRESHOLD,
};

pub const ATTENUATION: f64 = 0.15;

/// Shading factor for a total path length.
pub fn attenuation(distance: f64) -> f64 {
    1.0 / (1.0 + ATTENUATION * distance)
}

pub fn shade(color: Rgb, distance: f64) -> Rgb {
    color.scaled(attenuation(distance))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    pub width: u32,
    pub height: u32,
    pub vertical_fov_deg: f64,
    pub eye_height: f64,
}

impl Default for CameraSpec {
    fn default() -> Self {
        CameraSpec {
            width: 640,
            height: 480,
            vertical_fov_deg: 110.0,
            eye_height: EYE_HEIGHT,
        }
    }
}

impl CameraSpec {
    pub fn tan_half_vertical(&self) -> f64 {
        (self.vertical_fov_deg.to_radians() / 2.0).tan()
    }

    pub fn tan_half_horizontal(&self) -> f64 {
        self.tan_half_vertical() * f64::from(self.width) / f64::from(self.height)
    }

    pub fn horizontal_fov_deg(&self) -> f64 {
        2.0 * self.tan_half_horizontal().atan().to_degrees()
    }
}

/// Camera basis for a pose: forward, right and up unit vectors.
#[derive(Debug, Clone, Copy)]
pub struct CameraFrame {
    pub eye: Vec3,
    pub forward: Vec3,
    pub right: Vec3,
    pub up: Vec3,
    pub tan_h: f64,
    pub tan_v: f64,
}

impl CameraFrame {
    pub fn new(state: &WorldState, cam: &CameraSpec) -> Self {
        let (c, s) = state.ego.heading.unit();
        CameraFrame {
            eye: Vec3::new(state.ego.x, state.ego.y, cam.eye_height),
            forward: Vec3::new(c, s, 0.0),
            right: Vec3::new(s, -c, 0.0),
            up: Vec3::new(0.0, 0.0, 1.0),
            tan_h: cam.tan_half_horizontal(),
            tan_v: cam.tan_half_vertical(),
        }
    }

    /// Unit direction through the center of pixel `(col, row)`.
    pub fn pixel_dir(&self, cam: &CameraSpec, col: u32, row: u32) -> Vec3 {
        let nx = 2.0 * (f64::from(col) + 0.5) / f64::from(cam.width) - 1.0;
        let ny = 1.0 - 2.0 * (f64::from(row) + 0.5) / f64::from(cam.height);
        (self.forward + self.right * (nx * self.tan_h) + self.up * (ny * self.tan_v)).normalized()
    }

    /// Normalized device coordinates of a direction, or `None` when it
    /// points behind the camera.
    pub fn project(&self, dir: Vec3) -> Option<(f64, f64)> {
        let fz = dir.dot(self.forward);
        if fz <= 0.0 {
            return None;
        }
        Some((
            dir.dot(self.right) / fz / self.tan_h,
            dir.dot(self.up) / fz / self.tan_v,
        ))
    }

    pub fn in_frustum(&self, dir: Vec3) -> bool {
        self.project(dir)
            .is_some_and(|(x, y)| x.abs() <= 1.0 && y.abs() <= 1.0)
    }
}

/// Row-major 24-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl Frame {
    pub fn pixel(&self, col: u32, row: u32) -> Rgb {
        let i = 3 * (row as usize * self.width as usize + col as usize);
        Rgb([self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]])
    }

    /// Hex SHA-256 of the raw pixel buffer.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.width.to_le_bytes());
        h.update(self.height.to_le_bytes());
        h.update(&self.pixels);
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Lossless PNG encoding.
    pub fn to_png(&self) -> Vec<u8> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width, self.height);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().expect("in-memory PNG header");
            w.write_image_data(&self.pixels).expect("in-memory PNG data");
        }
        out
    }
}

/// Per-pixel provenance, for tests and frame statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelTag {
    pub surface: Surface,
    pub via_mirror: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameStats {
    /// Pixels whose primary ray hit the mirror glass.
    pub mirror_pixels: u32,
    /// Pixels showing the ego body through the mirror.
    pub ego_reflection_pixels: u32,
}

impl FrameStats {
    pub fn mirror_surface_in_view(&self) -> bool {
        self.mirror_pixels > 0
    }
}

/// Shades one primary ray; returns the color and where it ended.
pub fn trace_pixel(scene: &Scene, eye: Vec3, dir: Vec3) -> (Rgb, PixelTag) {
    let hit = scene.cast(eye, dir, false);
    if hit.surface != Surface::Mirror {
        return (shade(hit.color, hit.t), PixelTag { surface: hit.surface, via_mirror: false });
    }
    let m = scene.mirror().expect("mirror hit implies a mirror");
    let p = eye + dir * hit.t;
    let bounced = reflect_dir(dir, mirror_normal(m));
    let second = scene.cast(p, bounced, true);
    let color = if second.surface == Surface::Mirror {
        m.frame_color
    } else {
        second.color
    };
    (
        shade(color, hit.t + second.t),
        PixelTag { surface: second.surface, via_mirror: true },
    )
}

fn render_impl(
    state: &WorldState,
    scenario: &ScenarioConfig,
    cam: &CameraSpec,
    mut tags: Option<&mut Vec<PixelTag>>,
) -> (Frame, FrameStats) {
    let scene = Scene::new(scenario, state);
    let basis = CameraFrame::new(state, cam);
    let n = cam.width as usize * cam.height as usize;
    let mut pixels = Vec::with_capacity(3 * n);
    let mut stats = FrameStats::default();
    for row in 0..cam.height {
        for col in 0..cam.width {
            let dir = basis.pixel_dir(cam, col, row);
            let (c, tag) = trace_pixel(&scene, basis.eye, dir);
            pixels.extend_from_slice(&c.0);
            if tag.via_mirror {
                stats.mirror_pixels += 1;
                if matches!(tag.surface, Surface::Body { id: BodyId::Ego, .. }) {
                    stats.ego_reflection_pixels += 1;
                }
            }
            if let Some(t) = tags.as_deref_mut() {
                t.push(tag);
            }
        }
    }
    (Frame { width: cam.width, height: cam.height, pixels }, stats)
}

/// Renders the ego's first-person view.
pub fn render_frame(state: &WorldState, scenario: &ScenarioConfig, cam: &CameraSpec) -> Frame {
    render_impl(state, scenario, cam, None).0
}

/// Renders and also returns mirror statistics for the frame.
pub fn render_with_stats(
    state: &WorldState,
    scenario: &ScenarioConfig,
    cam: &CameraSpec,
) -> (Frame, FrameStats) {
    render_impl(state, scenario, cam, None)
}

/// Renders and returns the provenance of every pixel (row-major).
pub fn render_tagged(
    state: &WorldState,
    scenario: &ScenarioConfig,
    cam: &CameraSpec,
) -> (Frame, Vec<PixelTag>, FrameStats) {
    let mut tags = Vec::with_capacity(cam.width as usize * cam.height as usize);
    let (frame, stats) = render_impl(state, scenario, cam, Some(&mut tags));
    (frame, tags, stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn camera_defaults() {
        let cam = CameraSpec::default();
        assert_eq!((cam.width, cam.height), (640, 480));
        assert_eq!(cam.vertical_fov_deg, 110.0);
        let expected = 2.0 * ((55f64).to_radians().tan() * 4.0 / 3.0).atan().to_degrees();
        assert!((cam.horizontal_fov_deg() - expected).abs() < 1e-12);
    }

    #[test]
    fn attenuation_law() {
        assert_eq!(attenuation(0.0), 1.0);
        assert!((attenuation(2.0) - 1.0 / 1.3).abs() < 1e-15);
    }
}
