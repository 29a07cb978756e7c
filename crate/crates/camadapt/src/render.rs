//! Software pinhole rasterizer for the two observation cameras.
//!
//! The external camera is parameterized by an orbit (azimuth, elevation,
//! radius) around a look-at point; the eye-in-hand camera rides the
//! end-effector looking straight down. Rendering is z-buffered flat-shaded
//! triangle rasterization with edge functions and the top-left fill rule.

use serde::{Deserialize, Serialize};

use crate::sim::WorldState;

pub const NEAR_PLANE: f64 = 0.05;
pub const BACKGROUND: [u8; 3] = [160, 170, 180];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    pub azimuth: f64,
    pub elevation: f64,
    pub radius: f64,
    #[serde(default)]
    pub look_at: [f64; 3],
    #[serde(default = "default_fov")]
    pub fov_x: f64,
    #[serde(default = "default_size")]
    pub width: u32,
    #[serde(default = "default_size")]
    pub height: u32,
}

fn default_fov() -> f64 {
    90.0
}
fn default_size() -> u32 {
    64
}

/// The baseline external camera pose used for demonstration recording.
impl Default for CameraConfig {
    fn default() -> Self {
        Self::new(45.0, 45.0, 1.0)
    }
}

impl CameraConfig {
    pub fn new(azimuth: f64, elevation: f64, radius: f64) -> Self {
        Self {
            azimuth,
            elevation,
            radius,
            look_at: [0.0; 3],
            fov_x: 90.0,
            width: 64,
            height: 64,
        }
    }

    /// Elevation clamped to [10, 80] degrees; sizes floored at 8 px.
    pub fn clamped(mut self) -> Self {
        self.elevation = self.elevation.clamp(10.0, 80.0);
        self.width = self.width.max(8);
        self.height = self.height.max(8);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB, `height * width * 3` bytes.
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn filled(width: u32, height: u32, color: [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity((width * height * 3) as usize);
        for _ in 0..width * height {
            pixels.extend_from_slice(&color);
        }
        Self { width, height, pixels }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = ((y * self.width + x) * 3) as usize;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn save_png(&self, path: &std::path::Path) -> Result<(), image::ImageError> {
        let buf = image::RgbImage::from_raw(self.width, self.height, self.pixels.clone())
            .expect("pixel buffer matches dimensions");
        buf.save(path)
    }
}

/// World-to-camera rigid transform plus intrinsics.
#[derive(Debug, Clone, Copy)]
pub struct CameraPose {
    /// Rows: (right, -up, forward); maps p_cam = rot * (p_world - pos).
    pub rot: [[f64; 3]; 3],
    pub pos: [f64; 3],
    pub fov_x: f64,
    pub width: u32,
    pub height: u32,
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Orbit camera pose: position on a sphere around `look_at`, looking inward,
/// world +z treated as up. Image y points down.
pub fn camera_pose(c: &CameraConfig) -> CameraPose {
    let az = c.azimuth.to_radians();
    let el = c.elevation.to_radians();
    let pos = [
        c.look_at[0] + c.radius * el.cos() * az.cos(),
        c.look_at[1] + c.radius * el.cos() * az.sin(),
        c.look_at[2] + c.radius * el.sin(),
    ];
    let forward = normalize(sub(c.look_at, pos));
    let right = normalize(cross(forward, [0.0, 0.0, 1.0]));
    let up = cross(right, forward);
    CameraPose {
        rot: [right, [-up[0], -up[1], -up[2]], forward],
        pos,
        fov_x: c.fov_x,
        width: c.width,
        height: c.height,
    }
}

/// Camera rigidly attached 8 cm above the end-effector, looking straight down.
pub fn eih_camera(s: &WorldState) -> CameraPose {
    CameraPose {
        rot: [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]],
        pos: [s.ee_pos[0], s.ee_pos[1], s.ee_pos[2] + 0.08],
        fov_x: 90.0,
        width: 64,
        height: 64,
    }
}

/// Pinhole projection to pixel coordinates and camera-space depth.
/// Returns `None` for points at or behind the near plane.
pub fn project(p: [f64; 3], pose: &CameraPose) -> Option<(f64, f64, f64)> {
    let d = sub(p, pose.pos);
    let x = pose.rot[0][0] * d[0] + pose.rot[0][1] * d[1] + pose.rot[0][2] * d[2];
    let y = pose.rot[1][0] * d[0] + pose.rot[1][1] * d[1] + pose.rot[1][2] * d[2];
    let z = pose.rot[2][0] * d[0] + pose.rot[2][1] * d[1] + pose.rot[2][2] * d[2];
    if z <= NEAR_PLANE {
        return None;
    }
    let f = (pose.width as f64 / 2.0) / (pose.fov_x.to_radians() / 2.0).tan();
    Some((
        pose.width as f64 / 2.0 + f * x / z,
        pose.height as f64 / 2.0 + f * y / z,
        z,
    ))
}

#[derive(Debug, Clone, Copy)]
pub struct Triangle {
    pub v: [[f64; 3]; 3],
    pub color: [u8; 3],
}

fn quad(a: [f64; 3], b: [f64; 3], c: [f64; 3], d: [f64; 3], color: [u8; 3], out: &mut Vec<Triangle>) {
    out.push(Triangle { v: [a, b, c], color });
    out.push(Triangle { v: [a, c, d], color });
}

fn cuboid(center: [f64; 3], side: f64, color: [u8; 3], out: &mut Vec<Triangle>) {
    let h = side / 2.0;
    let p = |sx: f64, sy: f64, sz: f64| [center[0] + sx * h, center[1] + sy * h, center[2] + sz * h];
    // -z, +z, -y, +y, -x, +x faces
    quad(p(-1.0, -1.0, -1.0), p(1.0, -1.0, -1.0), p(1.0, 1.0, -1.0), p(-1.0, 1.0, -1.0), color, out);
    quad(p(-1.0, -1.0, 1.0), p(1.0, -1.0, 1.0), p(1.0, 1.0, 1.0), p(-1.0, 1.0, 1.0), color, out);
    quad(p(-1.0, -1.0, -1.0), p(1.0, -1.0, -1.0), p(1.0, -1.0, 1.0), p(-1.0, -1.0, 1.0), color, out);
    quad(p(-1.0, 1.0, -1.0), p(1.0, 1.0, -1.0), p(1.0, 1.0, 1.0), p(-1.0, 1.0, 1.0), color, out);
    quad(p(-1.0, -1.0, -1.0), p(-1.0, 1.0, -1.0), p(-1.0, 1.0, 1.0), p(-1.0, -1.0, 1.0), color, out);
    quad(p(1.0, -1.0, -1.0), p(1.0, 1.0, -1.0), p(1.0, 1.0, 1.0), p(1.0, -1.0, 1.0), color, out);
}

/// Fixed scene mesh for a world state: table, goal marker, object cube,
/// end-effector cube (color encodes gripper state).
pub fn scene_triangles(s: &WorldState) -> Vec<Triangle> {
    let mut tris = Vec::with_capacity(28);
    quad(
        [-0.6, -0.6, 0.0],
        [0.6, -0.6, 0.0],
        [0.6, 0.6, 0.0],
        [-0.6, 0.6, 0.0],
        [200, 200, 200],
        &mut tris,
    );
    let g = 0.04;
    quad(
        [s.goal_xy[0] - g, s.goal_xy[1] - g, 0.001],
        [s.goal_xy[0] + g, s.goal_xy[1] - g, 0.001],
        [s.goal_xy[0] + g, s.goal_xy[1] + g, 0.001],
        [s.goal_xy[0] - g, s.goal_xy[1] + g, 0.001],
        [50, 180, 50],
        &mut tris,
    );
    cuboid(s.obj_pos, 0.05, [220, 50, 50], &mut tris);
    let ee_color = if s.gripper_closed { [20, 20, 120] } else { [50, 50, 220] };
    cuboid(s.ee_pos, 0.04, ee_color, &mut tris);
    tris
}

fn edge(ax: f64, ay: f64, bx: f64, by: f64, px: f64, py: f64) -> f64 {
    (bx - ax) * (py - ay) - (by - ay) * (px - ax)
}

/// Top-left rule in a y-down pixel space with positive-inside edges.
fn is_top_left(ax: f64, ay: f64, bx: f64, by: f64) -> bool {
    let dx = bx - ax;
    let dy = by - ay;
    (dy == 0.0 && dx < 0.0) || dy > 0.0
}

/// A projected triangle ready for coverage tests.
struct ScreenTri {
    p: [(f64, f64, f64); 3], // (u, v, depth), oriented so inside is positive
    area: f64,
    color: [u8; 3],
}

fn project_triangle(t: &Triangle, pose: &CameraPose) -> Option<ScreenTri> {
    // whole-triangle near-plane culling
    let a = project(t.v[0], pose)?;
    let b = project(t.v[1], pose)?;
    let c = project(t.v[2], pose)?;
    let mut p = [a, b, c];
    let mut area = edge(p[0].0, p[0].1, p[1].0, p[1].1, p[2].0, p[2].1);
    if area == 0.0 {
        return None;
    }
    if area < 0.0 {
        p.swap(1, 2);
        area = -area;
    }
    Some(ScreenTri { p, area, color: t.color })
}

/// Coverage + interpolated depth at a pixel center, or `None` if outside.
fn fragment(st: &ScreenTri, px: f64, py: f64) -> Option<f64> {
    let [a, b, c] = st.p;
    let e0 = edge(b.0, b.1, c.0, c.1, px, py);
    let e1 = edge(c.0, c.1, a.0, a.1, px, py);
    let e2 = edge(a.0, a.1, b.0, b.1, px, py);
    let inside = (e0 > 0.0 || (e0 == 0.0 && is_top_left(b.0, b.1, c.0, c.1)))
        && (e1 > 0.0 || (e1 == 0.0 && is_top_left(c.0, c.1, a.0, a.1)))
        && (e2 > 0.0 || (e2 == 0.0 && is_top_left(a.0, a.1, b.0, b.1)));
    if !inside {
        return None;
    }
    let w0 = e0 / st.area;
    let w1 = e1 / st.area;
    let w2 = e2 / st.area;
    Some(w0 * a.2 + w1 * b.2 + w2 * c.2)
}

pub fn render_pose(s: &WorldState, pose: &CameraPose) -> Image {
    let w = pose.width as usize;
    let h = pose.height as usize;
    let mut img = Image::filled(pose.width, pose.height, BACKGROUND);
    let mut zbuf = vec![f64::INFINITY; w * h];
    for tri in scene_triangles(s) {
        let Some(st) = project_triangle(&tri, pose) else { continue };
        let min_x = st.p.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let max_x = st.p.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let min_y = st.p.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let max_y = st.p.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let x0 = (min_x - 0.5).floor().max(0.0) as usize;
        let x1 = ((max_x - 0.5).ceil() as isize).min(w as isize - 1).max(-1);
        let y0 = (min_y - 0.5).floor().max(0.0) as usize;
        let y1 = ((max_y - 0.5).ceil() as isize).min(h as isize - 1).max(-1);
        if x1 < 0 || y1 < 0 {
            continue;
        }
        for y in y0..=y1 as usize {
            for x in x0..=x1 as usize {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                if let Some(depth) = fragment(&st, px, py) {
                    let i = y * w + x;
                    if depth < zbuf[i] {
                        zbuf[i] = depth;
                        let o = i * 3;
                        img.pixels[o..o + 3].copy_from_slice(&st.color);
                    }
                }
            }
        }
    }
    img
}

/// External-camera render for an orbit camera config.
pub fn render(s: &WorldState, c: &CameraConfig) -> Image {
    render_pose(s, &camera_pose(&c.clamped()))
}

/// Eye-in-hand render.
pub fn render_eih(s: &WorldState) -> Image {
    render_pose(s, &eih_camera(s))
}

/// Brute-force per-pixel nearest-triangle reference renderer. Shares the
/// projection and coverage math but orders fragments by a full scan per
/// pixel instead of an incremental z-buffer.
pub fn render_pose_bruteforce(s: &WorldState, pose: &CameraPose) -> Image {
    let w = pose.width as usize;
    let h = pose.height as usize;
    let tris: Vec<ScreenTri> = scene_triangles(s)
        .iter()
        .filter_map(|t| project_triangle(t, pose))
        .collect();
    let mut img = Image::filled(pose.width, pose.height, BACKGROUND);
    for y in 0..h {
        for x in 0..w {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let mut best: Option<(f64, [u8; 3])> = None;
            for st in &tris {
                if let Some(depth) = fragment(st, px, py) {
                    if best.map_or(true, |(bd, _)| depth < bd) {
                        best = Some((depth, st.color));
                    }
                }
            }
            if let Some((_, color)) = best {
                let o = (y * w + x) * 3;
                img.pixels[o..o + 3].copy_from_slice(&color);
            }
        }
    }
    img
}
