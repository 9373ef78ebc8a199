//! Synthetic pinhole camera looking at the two-ring cylindrical landmark.
//!
//! Camera frame: `x` right, `y` down, `z` along the optical axis. The optical
//! axis is horizontal and, by default, at the landmark's mid-height. A pose
//! places the landmark's vertical axis at `(d_h, *, d_v)` in centimetres.
//!
//! Rendering casts one ray per pixel centre against the finite cylinder, so a
//! frame is an exact sampling of the scene with no anti-aliasing. Ground truth
//! comes from projecting the two ring-centre points on the landmark axis.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{Datasheet, ManifestRow};
use crate::error::{Error, Result};
use crate::imaging::{save_image, ImageRgb, PixelCoord, Rgb};

/// Physical landmark description. Lengths in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSpec {
    pub height_mm: f64,
    pub diameter_mm: f64,
    pub ring_height_mm: f64,
    pub top_ring_color: Rgb,
    pub bottom_ring_color: Rgb,
    pub body_color: Rgb,
}

impl Default for LandmarkSpec {
    fn default() -> Self {
        Self {
            height_mm: 70.0,
            diameter_mm: 35.0,
            ring_height_mm: 20.0,
            top_ring_color: [255, 0, 0],
            bottom_ring_color: [0, 0, 255],
            body_color: [255, 255, 255],
        }
    }
}

impl LandmarkSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.diameter_mm > 0.0 && self.ring_height_mm > 0.0)
            || 2.0 * self.ring_height_mm > self.height_mm
        {
            return Err(Error::Parameter(format!(
                "landmark needs diameter > 0 and 0 < 2 * ring height <= height, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Distance between the two ring-band centres along the axis.
    pub fn ring_center_separation_mm(&self) -> f64 {
        self.height_mm - self.ring_height_mm
    }

    /// Colour of the side surface at `height_mm` above the base and azimuth
    /// `_azimuth` (radians, landmark frame). The rings have no axial texture.
    pub fn surface_color(&self, height_mm: f64, _azimuth: f64) -> Rgb {
        if height_mm >= self.height_mm - self.ring_height_mm {
            self.top_ring_color
        } else if height_mm <= self.ring_height_mm {
            self.bottom_ring_color
        } else {
            self.body_color
        }
    }
}

/// Default horizontal resolution. Wide enough that a landmark at 25° bearing
/// and 28 cm stays fully in frame with a 700 px focal length.
pub const DEFAULT_IMAGE_WIDTH: usize = 800;
pub const DEFAULT_IMAGE_HEIGHT: usize = 480;
pub const DEFAULT_FOCAL_PX: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    pub focal_px: f64,
    pub image_width: usize,
    pub image_height: usize,
    /// Height of the optical axis above the ground, in cm. `None` puts it at
    /// the landmark's mid-height.
    pub height_cm: Option<f64>,
}

impl Default for CameraSpec {
    fn default() -> Self {
        Self {
            focal_px: DEFAULT_FOCAL_PX,
            image_width: DEFAULT_IMAGE_WIDTH,
            image_height: DEFAULT_IMAGE_HEIGHT,
            height_cm: None,
        }
    }
}

impl CameraSpec {
    pub fn principal_point(&self) -> PixelCoord {
        PixelCoord::new(
            (self.image_width as f64 - 1.0) / 2.0,
            (self.image_height as f64 - 1.0) / 2.0,
        )
    }

    fn validate(&self) -> Result<()> {
        if !(self.focal_px > 0.0 && self.focal_px.is_finite()) {
            return Err(Error::Parameter(format!("focal length must be positive, got {}", self.focal_px)));
        }
        if self.image_width == 0
            || self.image_height == 0
            || self.image_width > crate::imaging::MAX_DIMENSION
            || self.image_height > crate::imaging::MAX_DIMENSION
        {
            return Err(Error::Parameter(format!(
                "bad camera resolution {}x{}",
                self.image_width, self.image_height
            )));
        }
        Ok(())
    }

    fn project(&self, x: f64, y: f64, z: f64) -> PixelCoord {
        let c = self.principal_point();
        PixelCoord::new(self.focal_px * x / z + c.x, self.focal_px * y / z + c.y)
    }
}

/// Landmark placement relative to the camera, in cm. `yaw_deg` spins the
/// landmark about its own axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub d_v: f64,
    pub d_h: f64,
    #[serde(default)]
    pub yaw_deg: f64,
}

impl Pose {
    pub fn new(d_v: f64, d_h: f64) -> Self {
        Self {
            d_v,
            d_h,
            yaw_deg: 0.0,
        }
    }

    /// Pose at forward distance `d_v` and bearing `theta_deg`.
    pub fn from_bearing(d_v: f64, theta_deg: f64) -> Self {
        Self::new(d_v, d_v * theta_deg.to_radians().tan())
    }

    pub fn bearing_deg(&self) -> f64 {
        (self.d_h / self.d_v).atan().to_degrees()
    }

    pub fn range_cm(&self) -> f64 {
        self.d_v.hypot(self.d_h)
    }
}

/// Landmark geometry in the camera frame, in cm.
struct Scene {
    axis_x: f64,
    axis_z: f64,
    radius: f64,
    /// y of the top face (smallest y, since y points down).
    top_y: f64,
    /// y of the base.
    base_y: f64,
}

impl Scene {
    fn new(pose: &Pose, cam: &CameraSpec, lm: &LandmarkSpec) -> Self {
        let height = lm.height_mm / 10.0;
        let base_y = cam.height_cm.unwrap_or(height / 2.0);
        Self {
            axis_x: pose.d_h,
            axis_z: pose.d_v,
            radius: lm.diameter_mm / 20.0,
            top_y: base_y - height,
            base_y,
        }
    }
}

fn check_pose(pose: &Pose, cam: &CameraSpec, lm: &LandmarkSpec) -> Result<Scene> {
    cam.validate()?;
    lm.validate()?;
    if !(pose.d_v > 0.0 && pose.d_v.is_finite() && pose.d_h.is_finite()) {
        return Err(Error::Parameter(format!("d_v must be positive, got {}", pose.d_v)));
    }
    let scene = Scene::new(pose, cam, lm);
    let near = scene.axis_z - scene.radius;
    if near <= 0.0 {
        return Err(Error::OutOfView(format!(
            "camera is inside the landmark's footprint (d_v = {})",
            pose.d_v
        )));
    }
    let (w, h) = (cam.image_width as f64, cam.image_height as f64);
    for x in [scene.axis_x - scene.radius, scene.axis_x + scene.radius] {
        for z in [near, scene.axis_z + scene.radius] {
            for y in [scene.top_y, scene.base_y] {
                let p = cam.project(x, y, z);
                if !(0.0..=w - 1.0).contains(&p.x) || !(0.0..=h - 1.0).contains(&p.y) {
                    return Err(Error::OutOfView(format!(
                        "landmark at d_v = {}, d_h = {} leaves the {}x{} frame",
                        pose.d_v, pose.d_h, cam.image_width, cam.image_height
                    )));
                }
            }
        }
    }
    Ok(scene)
}

/// Analytic image of the two ring-centre axis points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingProjection {
    pub red: PixelCoord,
    pub blue: PixelCoord,
    pub separation_px: f64,
    /// Midpoint column minus the principal point column.
    pub d_h_px: f64,
}

pub fn project_ring_centers(
    pose: &Pose,
    cam: &CameraSpec,
    lm: &LandmarkSpec,
) -> Result<RingProjection> {
    let scene = check_pose(pose, cam, lm)?;
    let half_ring = lm.ring_height_mm / 20.0;
    let red = cam.project(scene.axis_x, scene.top_y + half_ring, scene.axis_z);
    let blue = cam.project(scene.axis_x, scene.base_y - half_ring, scene.axis_z);
    Ok(RingProjection {
        red,
        blue,
        separation_px: red.distance(&blue),
        d_h_px: red.midpoint(&blue).x - cam.principal_point().x,
    })
}

/// Ground truth that accompanies a rendered frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    pub pose: Pose,
    pub separation_px: f64,
    pub d_h_px: f64,
    pub theta_deg: f64,
    pub d_cm: f64,
}

impl GroundTruth {
    pub fn manifest_row(&self, filename: impl Into<String>) -> ManifestRow {
        ManifestRow {
            filename: filename.into(),
            d_v_cm: self.pose.d_v,
            d_h_cm: self.pose.d_h,
            theta_deg: self.theta_deg,
            d_cm: self.d_cm,
            separation_px: self.separation_px,
            d_h_px: self.d_h_px,
        }
    }
}

/// Scene-independent rendering options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    pub background: Rgb,
    /// Standard deviation of additive Gaussian noise per channel, in intensity units.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            background: [128, 128, 128],
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

/// Ray-trace the landmark at `pose`. Pixels whose ray misses the cylinder get
/// the background colour.
pub fn render(
    pose: &Pose,
    cam: &CameraSpec,
    lm: &LandmarkSpec,
    opts: &RenderOptions,
) -> Result<(ImageRgb, GroundTruth)> {
    let scene = check_pose(pose, cam, lm)?;
    let projection = project_ring_centers(pose, cam, lm)?;
    if !(opts.noise_sigma >= 0.0 && opts.noise_sigma.is_finite()) {
        return Err(Error::Parameter(format!(
            "noise sigma must be non-negative, got {}",
            opts.noise_sigma
        )));
    }
    let (w, h) = (cam.image_width, cam.image_height);
    let c = cam.principal_point();
    let yaw = pose.yaw_deg.to_radians();
    let r2 = scene.radius * scene.radius;

    let shade = |u: usize, v: usize| -> Rgb {
        let dx = (u as f64 - c.x) / cam.focal_px;
        let dy = (v as f64 - c.y) / cam.focal_px;
        // side wall: |t * (dx, 1) - axis|^2 = r^2 in the xz plane
        let a = dx * dx + 1.0;
        let b = -2.0 * (dx * scene.axis_x + scene.axis_z);
        let cc = scene.axis_x * scene.axis_x + scene.axis_z * scene.axis_z - r2;
        let disc = b * b - 4.0 * a * cc;
        if disc < 0.0 {
            return opts.background;
        }
        let t = (-b - disc.sqrt()) / (2.0 * a);
        let y = t * dy;
        if (scene.top_y..=scene.base_y).contains(&y) {
            let azimuth = (t * dx - scene.axis_x).atan2(t - scene.axis_z) - yaw;
            return lm.surface_color((scene.base_y - y) * 10.0, azimuth);
        }
        // end caps, only visible when the camera is above the top or below the base
        for (cap_y, visible) in [(scene.top_y, scene.top_y > 0.0), (scene.base_y, scene.base_y < 0.0)] {
            if visible && dy != 0.0 {
                let t = cap_y / dy;
                let (x, z) = (t * dx - scene.axis_x, t - scene.axis_z);
                if t > 0.0 && x * x + z * z <= r2 {
                    return lm.body_color;
                }
            }
        }
        opts.background
    };

    let mut data = vec![0u8; w * h * 3];
    data.par_chunks_mut(w * 3).enumerate().for_each(|(v, row)| {
        for u in 0..w {
            row[u * 3..u * 3 + 3].copy_from_slice(&shade(u, v));
        }
    });

    if opts.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let normal = Normal::new(0.0, opts.noise_sigma).expect("sigma checked above");
        for byte in &mut data {
            let noisy = f64::from(*byte) + normal.sample(&mut rng);
            *byte = noisy.round().clamp(0.0, 255.0) as u8;
        }
    }

    let truth = GroundTruth {
        pose: *pose,
        separation_px: projection.separation_px,
        d_h_px: projection.d_h_px,
        theta_deg: pose.bearing_deg(),
        d_cm: pose.range_cm(),
    };
    Ok((ImageRgb::new(w, h, data)?, truth))
}

/// Forward distances 28, 32, ..., 72 cm crossed with bearings -25, -20, ..., 25 degrees.
pub fn validity_grid() -> Vec<Pose> {
    let mut grid = Vec::with_capacity(12 * 11);
    for i in 0..12 {
        let d_v = 28.0 + 4.0 * f64::from(i);
        for j in 0..11 {
            grid.push(Pose::from_bearing(d_v, -25.0 + 5.0 * f64::from(j)));
        }
    }
    grid
}

/// Per-pose noise seed derived from the dataset's base seed.
pub fn pose_seed(base_seed: u64, index: usize) -> u64 {
    base_seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub const MANIFEST_FILE: &str = "manifest.csv";

/// Render every pose into `out_dir` as `pose_NNN.ppm` and write
/// `manifest.csv` next to them. Frames are rendered in parallel; the manifest
/// keeps grid order.
pub fn generate_dataset(
    grid: &[Pose],
    cam: &CameraSpec,
    lm: &LandmarkSpec,
    out_dir: impl AsRef<Path>,
    opts: &RenderOptions,
) -> Result<Vec<ManifestRow>> {
    let out_dir = out_dir.as_ref();
    if grid.is_empty() {
        return Err(Error::Parameter("pose grid is empty".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let width = (grid.len() - 1).to_string().len().max(3);
    let rows = grid
        .par_iter()
        .enumerate()
        .map(|(i, pose)| {
            let filename = format!("pose_{i:0width$}.ppm");
            let frame_opts = RenderOptions {
                seed: pose_seed(opts.seed, i),
                ..*opts
            };
            let (img, truth) = render(pose, cam, lm, &frame_opts)?;
            save_image(&img, out_dir.join(&filename))?;
            Ok(truth.manifest_row(filename))
        })
        .collect::<Result<Vec<_>>>()?;
    crate::calibration::save_datasheet(
        &Datasheet::Manifest(rows.clone()),
        out_dir.join(MANIFEST_FILE),
    )?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults() -> (CameraSpec, LandmarkSpec) {
        (CameraSpec::default(), LandmarkSpec::default())
    }

    #[test]
    fn on_axis_projection() {
        let (cam, lm) = defaults();
        let p = project_ring_centers(&Pose::new(50.0, 0.0), &cam, &lm).unwrap();
        assert!((p.separation_px - 70.0).abs() < 1e-12);
        assert_eq!(p.d_h_px, 0.0);
        assert!(p.red.y < p.blue.y);
    }

    #[test]
    fn lateral_projection() {
        let (cam, lm) = defaults();
        let p = project_ring_centers(&Pose::new(50.0, 10.0), &cam, &lm).unwrap();
        assert!((p.d_h_px - 140.0).abs() < 1e-9);
        assert!((p.separation_px - 70.0).abs() < 1e-12);
    }

    #[test]
    fn separation_linear_in_focal_length() {
        let (cam, lm) = defaults();
        let wide = CameraSpec { focal_px: 1400.0, image_width: 1600, image_height: 960, ..cam };
        let a = project_ring_centers(&Pose::new(50.0, 0.0), &cam, &lm).unwrap();
        let b = project_ring_centers(&Pose::new(50.0, 0.0), &wide, &lm).unwrap();
        assert_eq!(b.separation_px, 2.0 * a.separation_px);
    }

    #[test]
    fn pinhole_law_holds_on_axis() {
        let (cam, lm) = defaults();
        for d_v in [20.0, 28.0, 33.3, 50.0, 72.0, 150.0] {
            let p = project_ring_centers(&Pose::new(d_v, 0.0), &cam, &lm).unwrap();
            assert!((p.separation_px * d_v - 3500.0).abs() <= 1e-9 * 3500.0);
        }
    }

    #[test]
    fn out_of_view_and_bad_pose() {
        let (cam, lm) = defaults();
        assert!(matches!(
            project_ring_centers(&Pose::new(30.0, 40.0), &cam, &lm),
            Err(Error::OutOfView(_))
        ));
        assert!(matches!(
            project_ring_centers(&Pose::new(1.0, 0.0), &cam, &lm),
            Err(Error::OutOfView(_))
        ));
        assert!(matches!(
            render(&Pose::new(0.0, 0.0), &cam, &lm, &RenderOptions::default()),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn whole_grid_is_in_view() {
        let (cam, lm) = defaults();
        let grid = validity_grid();
        assert_eq!(grid.len(), 132);
        for pose in &grid {
            project_ring_centers(pose, &cam, &lm).unwrap();
        }
    }

    #[test]
    fn render_has_expected_colours() {
        let (cam, lm) = defaults();
        let (img, truth) = render(&Pose::new(50.0, 0.0), &cam, &lm, &RenderOptions::default()).unwrap();
        assert_eq!(truth.theta_deg, 0.0);
        assert_eq!(truth.d_cm, 50.0);
        let c = cam.principal_point();
        let (cx, cy) = (c.x.round() as usize, c.y.round() as usize);
        assert_eq!(img.pixel(0, 0), [128, 128, 128]);
        assert_eq!(img.pixel(cx, cy), lm.body_color);
        assert_eq!(img.pixel(cx, cy - 35), lm.top_ring_color);
        assert_eq!(img.pixel(cx, cy + 35), lm.bottom_ring_color);
    }

    #[test]
    fn yaw_changes_nothing() {
        let (cam, lm) = defaults();
        let opts = RenderOptions::default();
        let a = render(&Pose::new(40.0, 5.0), &cam, &lm, &opts).unwrap().0;
        let b = render(&Pose { yaw_deg: 73.0, ..Pose::new(40.0, 5.0) }, &cam, &lm, &opts).unwrap().0;
        assert_eq!(a, b);
    }

    #[test]
    fn noise_is_seeded() {
        let (cam, lm) = defaults();
        let opts = RenderOptions { noise_sigma: 6.0, seed: 7, ..Default::default() };
        let a = render(&Pose::new(50.0, 0.0), &cam, &lm, &opts).unwrap().0;
        let b = render(&Pose::new(50.0, 0.0), &cam, &lm, &opts).unwrap().0;
        assert_eq!(a, b);
        let c = render(&Pose::new(50.0, 0.0), &cam, &lm, &RenderOptions { seed: 8, ..opts }).unwrap().0;
        assert_ne!(a, c);
    }

    #[test]
    fn camera_above_landmark_sees_top_cap() {
        let (_, lm) = defaults();
        let cam = CameraSpec { height_cm: Some(12.0), image_height: 800, ..Default::default() };
        let (img, _) = render(&Pose::new(40.0, 0.0), &cam, &lm, &RenderOptions::default()).unwrap();
        // the top cap projects above the red band, still on the centre column
        let c = cam.principal_point();
        let x = c.x.round() as usize;
        let column: Vec<Rgb> = (0..img.height()).map(|y| img.pixel(x, y)).collect();
        let first_red = column.iter().position(|&p| p == lm.top_ring_color).unwrap();
        assert_eq!(column[first_red - 1], lm.body_color);
    }

    #[test]
    fn dataset_files_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let (cam, lm) = defaults();
        let grid = [Pose::new(40.0, 0.0), Pose::from_bearing(60.0, -10.0)];
        let rows = generate_dataset(&grid, &cam, &lm, dir.path(), &RenderOptions::default()).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(dir.path().join("pose_000.ppm").exists());
        assert!(dir.path().join("pose_001.ppm").exists());
        let sheet = crate::calibration::load_datasheet(dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(sheet, Datasheet::Manifest(rows));
        assert!(matches!(
            generate_dataset(&[], &cam, &lm, dir.path(), &RenderOptions::default()),
            Err(Error::Parameter(_))
        ));
    }
}
