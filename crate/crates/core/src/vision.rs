//! Synthetic camera, blob centroid tracking and visual guidance.
//!
//! Camera frame: x right, y down, z along the optical axis. Pixel
//! coordinates refer to pixel centers, so pixel (i, j) spans
//! [i - 0.5, i + 0.5] × [j - 0.5, j + 0.5].

use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector2, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub const DEFAULT_WIDTH: u32 = 640;
pub const DEFAULT_HEIGHT: u32 = 480;
pub const BACKGROUND_LEVEL: u8 = 16;
pub const TARGET_LEVEL: u8 = 255;
/// Edge pixels are supersampled on this grid per axis.
const SUPERSAMPLE: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraModel {
    pub width_px: u32,
    pub height_px: u32,
    pub hfov_deg: f64,
    /// Downward tilt of the optical axis below the horizon.
    pub tilt_deg: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            width_px: DEFAULT_WIDTH,
            height_px: DEFAULT_HEIGHT,
            hfov_deg: 90.0,
            tilt_deg: 30.0,
        }
    }
}

impl CameraModel {
    pub fn focal_px(&self) -> f64 {
        (self.width_px as f64 / 2.0) / (self.hfov_deg.to_radians() / 2.0).tan()
    }

    pub fn principal_point(&self) -> Vector2<f64> {
        Vector2::new(self.width_px as f64 / 2.0, self.height_px as f64 / 2.0)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.width_px == 0 || self.height_px == 0 {
            return Err("camera resolution must be nonzero".into());
        }
        if !(self.hfov_deg > 0.0 && self.hfov_deg < 180.0) {
            return Err("camera hfov must be in (0, 180) degrees".into());
        }
        if !(0.0..90.0).contains(&self.tilt_deg) {
            return Err("camera tilt must be in [0, 90) degrees".into());
        }
        Ok(())
    }

    /// Pinhole projection of a point in the camera frame.
    pub fn project_camera(&self, p_cam: &Vector3<f64>) -> Option<Vector2<f64>> {
        if p_cam.z <= 1e-9 {
            return None;
        }
        let f = self.focal_px();
        Some(self.principal_point() + Vector2::new(f * p_cam.x / p_cam.z, f * p_cam.y / p_cam.z))
    }

    /// Unit ray in the camera frame through pixel coordinate `px`.
    pub fn ray(&self, px: &Vector2<f64>) -> Vector3<f64> {
        let c = self.principal_point();
        let f = self.focal_px();
        Vector3::new((px.x - c.x) / f, (px.y - c.y) / f, 1.0).normalize()
    }

    pub fn contains(&self, px: &Vector2<f64>) -> bool {
        px.x >= -0.5
            && px.y >= -0.5
            && px.x <= self.width_px as f64 - 0.5
            && px.y <= self.height_px as f64 - 0.5
    }
}

/// Rotation taking camera-frame vectors into a forward-right-down frame.
fn camera_to_frd() -> UnitQuaternion<f64> {
    let m = Matrix3::from_columns(&[Vector3::y(), Vector3::z(), Vector3::x()]);
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GimbalMode {
    /// Roll and pitch stabilized; camera yaw follows the vehicle.
    TwoAxis,
    /// Also stabilizes yaw, slewing toward vehicle yaw at a bounded rate.
    ThreeAxis { yaw_rate_limit_degps: f64 },
}

/// Gimbal orientation expressed as a forward-right-down frame in NED,
/// with the optical axis along its x axis.
#[derive(Debug, Clone)]
pub struct Gimbal {
    pub mode: GimbalMode,
    pub tilt_rad: f64,
    yaw: Option<f64>,
}

fn wrap(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

impl Gimbal {
    pub fn new(mode: GimbalMode, tilt_deg: f64) -> Self {
        Self {
            mode,
            tilt_rad: tilt_deg.to_radians(),
            yaw: None,
        }
    }

    pub fn yaw(&self) -> Option<f64> {
        self.yaw
    }

    /// Orientation of the gimbal head after `dt` seconds.
    pub fn update(&mut self, vehicle: &UnitQuaternion<f64>, dt: f64) -> UnitQuaternion<f64> {
        let vehicle_yaw = vehicle.euler_angles().2;
        let yaw = match (self.mode, self.yaw) {
            (GimbalMode::TwoAxis, _) | (_, None) => vehicle_yaw,
            (
                GimbalMode::ThreeAxis {
                    yaw_rate_limit_degps,
                },
                Some(prev),
            ) => {
                let max_step = yaw_rate_limit_degps.to_radians() * dt;
                let err = wrap(vehicle_yaw - prev);
                wrap(prev + err.clamp(-max_step, max_step))
            }
        };
        self.yaw = Some(yaw);
        UnitQuaternion::from_euler_angles(0.0, -self.tilt_rad, yaw)
    }
}

/// Stateless two-axis stabilization.
pub fn gimbal_orientation(vehicle: &UnitQuaternion<f64>, tilt_deg: f64) -> UnitQuaternion<f64> {
    Gimbal::new(GimbalMode::TwoAxis, tilt_deg).update(vehicle, 0.0)
}

/// Camera position and camera-to-NED rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub position_ned: Vector3<f64>,
    pub camera_to_ned: UnitQuaternion<f64>,
}

impl CameraPose {
    pub fn from_gimbal(position_ned: Vector3<f64>, gimbal: &UnitQuaternion<f64>) -> Self {
        Self {
            position_ned,
            camera_to_ned: gimbal * camera_to_frd(),
        }
    }

    pub fn to_camera(&self, p_ned: &Vector3<f64>) -> Vector3<f64> {
        self.camera_to_ned
            .inverse_transform_vector(&(p_ned - self.position_ned))
    }
}

/// Grayscale frame with an embedded content checksum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageFrame {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
    pub frame_seq: u64,
    pub timestamp_us: u64,
    pub checksum: u64,
}

/// FNV-1a over the header fields and pixels.
pub fn frame_checksum(width: u32, height: u32, frame_seq: u64, pixels: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |b: u8| {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    };
    width.to_le_bytes().into_iter().for_each(&mut eat);
    height.to_le_bytes().into_iter().for_each(&mut eat);
    frame_seq.to_le_bytes().into_iter().for_each(&mut eat);
    pixels.iter().copied().for_each(&mut eat);
    h
}

impl ImageFrame {
    pub fn new(
        width: u32,
        height: u32,
        pixels: Vec<u8>,
        frame_seq: u64,
        timestamp_us: u64,
    ) -> Self {
        assert_eq!(pixels.len(), (width * height) as usize, "pixel buffer size");
        let checksum = frame_checksum(width, height, frame_seq, &pixels);
        Self {
            width,
            height,
            pixels,
            frame_seq,
            timestamp_us,
            checksum,
        }
    }

    pub fn blank(width: u32, height: u32, level: u8) -> Self {
        Self::new(width, height, vec![level; (width * height) as usize], 0, 0)
    }

    pub fn is_consistent(&self) -> bool {
        self.pixels.len() == (self.width * self.height) as usize
            && self.checksum
                == frame_checksum(self.width, self.height, self.frame_seq, &self.pixels)
    }

    pub fn get(&self, u: u32, v: u32) -> u8 {
        self.pixels[(v * self.width + u) as usize]
    }

    /// Block-average downsampling by an integer factor.
    pub fn downsample(&self, factor: u32) -> ImageFrame {
        let f = factor.max(1);
        let (w, h) = (self.width / f, self.height / f);
        let mut out = Vec::with_capacity((w * h) as usize);
        for by in 0..h {
            for bx in 0..w {
                let mut sum = 0u32;
                for y in 0..f {
                    for x in 0..f {
                        sum += self.get(bx * f + x, by * f + y) as u32;
                    }
                }
                out.push((sum / (f * f)) as u8);
            }
        }
        ImageFrame::new(w, h, out, self.frame_seq, self.timestamp_us)
    }
}

/// Ground target rendered as a bright disk of `radius_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderParams {
    pub target_radius_m: f64,
    pub noise_sigma: f64,
}

impl Default for RenderParams {
    fn default() -> Self {
        Self {
            target_radius_m: 0.5,
            noise_sigma: 3.0,
        }
    }
}

/// Analytic disk projection: center pixel and radius in pixels.
pub fn project_target(
    camera: &CameraModel,
    pose: &CameraPose,
    target_ned: &Vector3<f64>,
    radius_m: f64,
) -> Option<(Vector2<f64>, f64)> {
    let p = pose.to_camera(target_ned);
    let c = camera.project_camera(&p)?;
    Some((c, camera.focal_px() * radius_m / p.z))
}

pub fn render_frame<R: Rng + ?Sized>(
    camera: &CameraModel,
    pose: &CameraPose,
    target_ned: &Vector3<f64>,
    params: &RenderParams,
    frame_seq: u64,
    timestamp_us: u64,
    rng: &mut R,
) -> ImageFrame {
    let (w, h) = (camera.width_px, camera.height_px);
    let mut img = vec![BACKGROUND_LEVEL as f64; (w * h) as usize];
    if let Some((c, r)) = project_target(camera, pose, target_ned, params.target_radius_m) {
        let u0 = ((c.x - r - 1.0).floor().max(0.0)) as i64;
        let u1 = ((c.x + r + 1.0).ceil().min(w as f64 - 1.0)) as i64;
        let v0 = ((c.y - r - 1.0).floor().max(0.0)) as i64;
        let v1 = ((c.y + r + 1.0).ceil().min(h as f64 - 1.0)) as i64;
        let span = (TARGET_LEVEL - BACKGROUND_LEVEL) as f64;
        let r2 = r * r;
        for v in v0..=v1 {
            for u in u0..=u1 {
                let dx = u as f64 - c.x;
                let dy = v as f64 - c.y;
                let d = (dx * dx + dy * dy).sqrt();
                let coverage = if d + 0.75 <= r {
                    1.0
                } else if d - 0.75 >= r {
                    0.0
                } else {
                    let mut hits = 0;
                    for sy in 0..SUPERSAMPLE {
                        for sx in 0..SUPERSAMPLE {
                            let ox = (sx as f64 + 0.5) / SUPERSAMPLE as f64 - 0.5;
                            let oy = (sy as f64 + 0.5) / SUPERSAMPLE as f64 - 0.5;
                            let (x, y) = (dx + ox, dy + oy);
                            if x * x + y * y <= r2 {
                                hits += 1;
                            }
                        }
                    }
                    hits as f64 / (SUPERSAMPLE * SUPERSAMPLE) as f64
                };
                if coverage > 0.0 {
                    img[(v as u32 * w + u as u32) as usize] += span * coverage;
                }
            }
        }
    }
    let pixels = img
        .into_iter()
        .map(|x| {
            let n: f64 = if params.noise_sigma > 0.0 {
                params.noise_sigma * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            (x + n).round().clamp(0.0, 255.0) as u8
        })
        .collect();
    ImageFrame::new(w, h, pixels, frame_seq, timestamp_us)
}

/// Raw center-of-mass result.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Centroid {
    pub u: f64,
    pub v: f64,
    /// Sum of intensities over thresholded pixels divided by 255.
    pub mass: f64,
    pub pixels: u32,
}

/// Intensity-weighted center of mass of the pixels strictly above
/// `threshold`. Returns `None` if no pixel qualifies.
pub fn extract_centroid(frame: &ImageFrame, threshold: u8) -> Option<Centroid> {
    let (mut su, mut sv, mut sw, mut n) = (0.0, 0.0, 0.0, 0u32);
    for v in 0..frame.height {
        let row = &frame.pixels[(v * frame.width) as usize..((v + 1) * frame.width) as usize];
        for (u, &p) in row.iter().enumerate() {
            if p > threshold {
                let w = p as f64;
                su += w * u as f64;
                sv += w * v as f64;
                sw += w;
                n += 1;
            }
        }
    }
    if sw <= 0.0 {
        return None;
    }
    Some(Centroid {
        u: su / sw,
        v: sv / sw,
        mass: sw / 255.0,
        pixels: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    pub intensity_threshold: u8,
    /// Pixel mass needed to acquire a lock.
    pub lock_mass: f64,
    /// Pixel mass below which an existing lock is dropped.
    pub unlock_mass: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            intensity_threshold: 80,
            lock_mass: 30.0,
            unlock_mass: 15.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TargetTrack {
    pub centroid_px: Vector2<f64>,
    pub pixel_mass: f64,
    pub locked: bool,
    pub estimated_range_m: Option<f64>,
    pub frame_seq: u64,
    pub timestamp_us: u64,
}

/// Thresholded centroid tracker with lock hysteresis.
#[derive(Debug, Clone, Default)]
pub struct Tracker {
    pub config: TrackerConfig,
    locked: bool,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Self {
        Self {
            config,
            locked: false,
        }
    }

    pub fn is_locked(&self) -> bool {
        self.locked
    }

    pub fn update(&mut self, frame: &ImageFrame) -> TargetTrack {
        let c = extract_centroid(frame, self.config.intensity_threshold);
        let mass = c.map(|c| c.mass).unwrap_or(0.0);
        let needed = if self.locked {
            self.config.unlock_mass
        } else {
            self.config.lock_mass
        };
        self.locked = mass >= needed;
        TargetTrack {
            centroid_px: c.map(|c| Vector2::new(c.u, c.v)).unwrap_or_default(),
            pixel_mass: mass,
            locked: self.locked,
            estimated_range_m: None,
            frame_seq: frame.frame_seq,
            timestamp_us: frame.timestamp_us,
        }
    }
}

/// Intersects the ray through `px` with the ground plane `z = ground_z`.
/// Returns the ground point and the slant range to it.
pub fn ground_intersection(
    camera: &CameraModel,
    pose: &CameraPose,
    px: &Vector2<f64>,
    ground_z: f64,
) -> Option<(Vector3<f64>, f64)> {
    let d = pose.camera_to_ned.transform_vector(&camera.ray(px));
    let height = ground_z - pose.position_ned.z;
    if d.z <= 1e-6 || height <= 0.0 {
        return None;
    }
    let t = height / d.z;
    Some((pose.position_ned + d * t, t))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trajectory {
    Static {
        position_ned: [f64; 3],
    },
    Circle {
        center_ned: [f64; 3],
        radius_m: f64,
        speed_mps: f64,
        #[serde(default)]
        phase_deg: f64,
    },
    Waypoints {
        points_ned: Vec<[f64; 3]>,
        speed_mps: f64,
        #[serde(default)]
        looped: bool,
    },
}

/// Moving ground target.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GroundTarget {
    pub trajectory: Trajectory,
    #[serde(default = "default_max_speed")]
    pub max_speed_mps: f64,
}

fn default_max_speed() -> f64 {
    8.0
}

impl GroundTarget {
    pub fn new(trajectory: Trajectory) -> Self {
        Self {
            trajectory,
            max_speed_mps: default_max_speed(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let speed = match &self.trajectory {
            Trajectory::Static { .. } => 0.0,
            Trajectory::Circle {
                radius_m,
                speed_mps,
                ..
            } => {
                if !(*radius_m > 0.0) {
                    return Err("target circle radius must be positive".into());
                }
                *speed_mps
            }
            Trajectory::Waypoints {
                points_ned,
                speed_mps,
                ..
            } => {
                if points_ned.len() < 2 {
                    return Err("target path needs at least two points".into());
                }
                *speed_mps
            }
        };
        if !(speed >= 0.0 && speed <= self.max_speed_mps) {
            return Err(format!(
                "target speed {speed} m/s outside [0, {}]",
                self.max_speed_mps
            ));
        }
        Ok(())
    }

    pub fn position(&self, t: f64) -> Vector3<f64> {
        match &self.trajectory {
            Trajectory::Static { position_ned } => Vector3::from(*position_ned),
            Trajectory::Circle {
                center_ned,
                radius_m,
                speed_mps,
                phase_deg,
            } => {
                let a = phase_deg.to_radians() + speed_mps / radius_m * t;
                Vector3::from(*center_ned)
                    + Vector3::new(radius_m * a.cos(), radius_m * a.sin(), 0.0)
            }
            Trajectory::Waypoints {
                points_ned,
                speed_mps,
                looped,
            } => {
                let pts: Vec<Vector3<f64>> = points_ned.iter().map(|p| Vector3::from(*p)).collect();
                let mut segs: Vec<(Vector3<f64>, Vector3<f64>)> =
                    pts.windows(2).map(|w| (w[0], w[1])).collect();
                if *looped {
                    segs.push((pts[pts.len() - 1], pts[0]));
                }
                let total: f64 = segs.iter().map(|(a, b)| (b - a).norm()).sum();
                if total <= 0.0 {
                    return pts[0];
                }
                let mut s = speed_mps * t;
                if *looped {
                    s = s.rem_euclid(total);
                } else if s >= total {
                    return pts[pts.len() - 1];
                }
                for (a, b) in segs {
                    let len = (b - a).norm();
                    if s <= len {
                        return a + (b - a) * (s / len.max(1e-12));
                    }
                    s -= len;
                }
                pts[pts.len() - 1]
            }
        }
    }

    /// Central-difference velocity.
    pub fn velocity(&self, t: f64) -> Vector3<f64> {
        let h = 1e-3;
        (self.position(t + h) - self.position((t - h).max(0.0))) / (t + h - (t - h).max(0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GuidanceParams {
    /// Lateral gain applied to the pixel error scaled to meters, 1/s.
    pub gain: f64,
    /// Gain on ground-plane range error, 1/s.
    pub range_gain: f64,
    pub max_speed_mps: f64,
    /// Desired slant range along the optical axis.
    pub standoff_m: f64,
    /// Hard floor on slant range.
    pub min_range_m: f64,
    /// Band above the floor where closing is cancelled and the vehicle retreats.
    pub floor_margin_m: f64,
    /// Deceleration assumed when limiting the closing speed, m/s².
    pub brake_mps2: f64,
    /// Alpha-beta filter gains for the target ground track.
    pub alpha: f64,
    pub beta: f64,
}

impl Default for GuidanceParams {
    fn default() -> Self {
        Self {
            gain: 0.5,
            range_gain: 1.0,
            max_speed_mps: 8.0,
            standoff_m: 14.0,
            min_range_m: 10.0,
            floor_margin_m: 2.0,
            brake_mps2: 1.0,
            alpha: 0.25,
            beta: 0.03,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidanceOutput {
    pub velocity_sp_ned: Vector3<f64>,
    pub yaw_sp: f64,
    pub range_m: f64,
    pub target_ned: Vector3<f64>,
    pub target_velocity_ned: Vector3<f64>,
}

/// Lateral velocity from a horizontal pixel error: pixels scaled to meters
/// at `range_m`, then multiplied by `gain`.
pub fn lateral_velocity(pixel_error: f64, range_m: f64, focal_px: f64, gain: f64) -> f64 {
    gain * pixel_error * range_m / focal_px
}

/// Centroid-driven guidance with a target-velocity feed-forward.
#[derive(Debug, Clone, Default)]
pub struct Guidance {
    pub params: GuidanceParams,
    target: Option<(Vector3<f64>, Vector3<f64>, u64)>,
}

impl Guidance {
    pub fn new(params: GuidanceParams) -> Self {
        Self {
            params,
            target: None,
        }
    }

    pub fn reset(&mut self) {
        self.target = None;
    }

    /// Filtered target ground position and velocity, if tracking.
    pub fn target_state(&self) -> Option<(Vector3<f64>, Vector3<f64>)> {
        self.target.map(|(p, v, _)| (p, v))
    }

    /// One guidance update. `pose` is the camera pose from the estimated
    /// state; `ground_z` is the NED z of the field.
    pub fn step(
        &mut self,
        track: &TargetTrack,
        camera: &CameraModel,
        pose: &CameraPose,
        ground_z: f64,
    ) -> Option<GuidanceOutput> {
        if !track.locked {
            self.target = None;
            return None;
        }
        let p = self.params;
        let (ground, range) = ground_intersection(camera, pose, &track.centroid_px, ground_z)?;

        let (tpos, tvel) = match self.target {
            Some((pos, vel, t_us)) if track.timestamp_us > t_us => {
                let dt = (track.timestamp_us - t_us) as f64 * 1e-6;
                let pred = pos + vel * dt;
                let r = ground - pred;
                (pred + r * p.alpha, vel + r * (p.beta / dt))
            }
            Some((pos, vel, _)) => (pos, vel),
            None => (ground, Vector3::zeros()),
        };
        self.target = Some((tpos, tvel, track.timestamp_us));

        let cam = pose.position_ned;
        let rel = tpos - cam;
        // point at this frame's fix; the filtered track lags in turns
        let seen = ground - cam;
        let yaw = seen.y.atan2(seen.x);
        let heading = Vector3::new(yaw.cos(), yaw.sin(), 0.0);
        let height = (ground_z - cam.z).max(0.0);
        let standoff_ground = (p.standoff_m.powi(2) - height.powi(2)).max(0.0).sqrt();

        let cam_heading = pose.camera_to_ned.transform_vector(&Vector3::z());
        let cam_right = Vector3::new(-cam_heading.y, cam_heading.x, 0.0);
        let lateral_err = track.centroid_px.x - camera.principal_point().x;
        let lateral = lateral_velocity(lateral_err, range, camera.focal_px(), p.gain);
        // closing speed relative to the target must allow stopping above the floor
        let floor_ground = ((p.min_range_m + p.floor_margin_m).powi(2) - height.powi(2))
            .max(0.0)
            .sqrt();
        let room = (rel.xy().norm() - floor_ground).max(0.0);
        let along = (p.range_gain * (rel.xy().norm() - standoff_ground))
            .clamp(-p.max_speed_mps, (2.0 * p.brake_mps2 * room).sqrt());

        let tvel_h = Vector3::new(tvel.x, tvel.y, 0.0);
        let mut v = tvel_h + cam_right.normalize() * lateral + heading * along;
        let n = v.norm();
        if n > p.max_speed_mps {
            v *= p.max_speed_mps / n;
        }
        // never close inside the hard floor
        let toward = v.dot(&heading);
        let guard = p.min_range_m + p.floor_margin_m;
        if range <= guard {
            v -= heading * (toward.max(0.0) + 2.0 * p.gain * (guard - range));
        }
        Some(GuidanceOutput {
            velocity_sp_ned: v,
            yaw_sp: yaw,
            range_m: range,
            target_ned: tpos,
            target_velocity_ned: tvel,
        })
    }
}

/// Whether a centroid lies in the central box spanning `fraction` of each
/// image dimension.
pub fn in_central_region(camera: &CameraModel, px: &Vector2<f64>, fraction: f64) -> bool {
    let c = camera.principal_point();
    (px.x - c.x).abs() <= fraction * camera.width_px as f64 / 2.0
        && (px.y - c.y).abs() <= fraction * camera.height_px as f64 / 2.0
}
