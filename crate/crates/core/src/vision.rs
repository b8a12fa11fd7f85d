//! Hole localization from masked depth points, plus the yaw detection sweep.

use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen};
use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::se3::{Pose, UnitQuaternion, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VisionError {
    #[error("hole {hole} not detectable: {reason}")]
    NotDetectable { hole: usize, reason: String },
    #[error("no hole with id {0}")]
    UnknownHole(usize),
    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("points span {degrees:.1} degrees of arc, need at least 90")]
    ArcCoverage { degrees: f64 },
    #[error("degenerate point cloud: {0}")]
    Degenerate(&'static str),
    #[error("empty sweep range")]
    EmptyRange,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Smallest arc the rim points must span.
pub const MIN_ARC: f64 = PI / 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoleSpec {
    /// Bar frame, on the top face.
    #[serde(with = "crate::se3::vec3_array")]
    pub center: Vec3,
    pub radius: f64,
    /// Bar frame, unit, pointing out of the top face.
    #[serde(with = "crate::se3::vec3_array")]
    pub axis: Vec3,
}

/// A rectangular bar with holes in its top face. The bar frame sits at the
/// geometric center with `z` up through the top face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarScene {
    pub bar_pose: Pose,
    /// Length, width, height in meters.
    pub bar_dims: [f64; 3],
    pub holes: Vec<HoleSpec>,
}

impl Default for BarScene {
    fn default() -> Self {
        let dims = [0.30, 0.05, 0.04];
        let top = dims[2] / 2.0;
        let hole = |x: f64| HoleSpec {
            center: Vec3::new(x, 0.0, top),
            radius: 0.006,
            axis: Vec3::z(),
        };
        Self {
            bar_pose: Pose::from_position(Vec3::new(0.60, 0.0, 0.02)),
            bar_dims: dims,
            holes: vec![hole(-0.05), hole(0.03), hole(0.11)],
        }
    }
}

impl BarScene {
    pub fn validate(&self) -> Result<(), VisionError> {
        if self.holes.is_empty() {
            return Err(VisionError::InvalidParameter("scene has no holes".into()));
        }
        if self.bar_dims.iter().any(|d| !(*d > 0.0)) {
            return Err(VisionError::InvalidParameter("bar dimensions must be positive".into()));
        }
        let top = self.bar_dims[2] / 2.0;
        for (i, h) in self.holes.iter().enumerate() {
            if !(h.radius > 0.0) {
                return Err(VisionError::InvalidParameter(format!("hole {i} radius must be positive")));
            }
            if (h.center.z - top).abs() > 1e-9 {
                return Err(VisionError::InvalidParameter(format!("hole {i} is not on the top face")));
            }
            if (h.axis.norm() - 1.0).abs() > 1e-9 {
                return Err(VisionError::InvalidParameter(format!("hole {i} axis is not unit length")));
            }
        }
        Ok(())
    }

    /// World-frame ground truth `(center, axis, radius)`.
    pub fn hole_world(&self, id: usize) -> Result<(Vec3, Vec3, f64), VisionError> {
        let h = self.holes.get(id).ok_or(VisionError::UnknownHole(id))?;
        Ok((
            self.bar_pose.transform_point(&h.center),
            self.bar_pose.transform_vector(&h.axis),
            h.radius,
        ))
    }

    /// The scene with the bar rotated by `yaw` about the vertical through `pivot`.
    pub fn yawed(&self, yaw: f64, pivot: &Vec3) -> BarScene {
        let r = UnitQuaternion::from_axis_angle(&Vec3::z(), yaw);
        let p = &self.bar_pose;
        BarScene {
            bar_pose: Pose::new(pivot + r.rotate(&(p.position - pivot)), r.mul(&p.orientation)),
            ..self.clone()
        }
    }
}

/// Ideal pinhole camera. The camera frame has `z` along the optical axis,
/// `x` right and `y` down in the image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraModel {
    /// Camera-to-world.
    pub pose: Pose,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for CameraModel {
    fn default() -> Self {
        // looking straight down from half a meter above the table
        Self {
            pose: Pose::new(
                Vec3::new(0.60, 0.0, 0.50),
                UnitQuaternion::from_axis_angle(&Vec3::x(), PI),
            ),
            fx: 525.0,
            fy: 525.0,
            cx: 319.5,
            cy: 239.5,
            width: 640,
            height: 480,
        }
    }
}

impl CameraModel {
    pub fn to_camera(&self, world: &Vec3) -> Vec3 {
        self.pose.inverse().transform_point(world)
    }

    /// Pixel coordinates of a camera-frame point, `None` behind the camera.
    pub fn project(&self, p: &Vec3) -> Option<(f64, f64)> {
        (p.z > 0.0).then(|| (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    pub fn in_image(&self, p: &Vec3) -> bool {
        self.project(p).is_some_and(|(u, v)| {
            (0.0..self.width as f64).contains(&u) && (0.0..self.height as f64).contains(&v)
        })
    }
}

/// Mask oracle knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaskParams {
    pub points: usize,
    /// m
    pub noise_sigma: f64,
    pub dropout: f64,
}

impl Default for MaskParams {
    fn default() -> Self {
        Self {
            points: 200,
            noise_sigma: 0.0,
            dropout: 0.0,
        }
    }
}

/// Rim points of one hole in the camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSample {
    pub points: Vec<Vec3>,
    pub hole_id: usize,
    pub noise_sigma: f64,
    pub dropout: f64,
}

/// Samples the rim of `hole_id` as a depth camera would see it through an
/// imperfect segmentation mask: evenly spaced rim points, seeded Gaussian noise,
/// seeded dropout, and clipping to the image.
pub fn synthesize_mask(
    scene: &BarScene,
    cam: &CameraModel,
    hole_id: usize,
    params: &MaskParams,
    seed: u64,
) -> Result<MaskSample, VisionError> {
    if !(0.0..1.0).contains(&params.dropout) || !(params.noise_sigma >= 0.0) || params.points == 0 {
        return Err(VisionError::InvalidParameter(
            "need points > 0, noise >= 0 and dropout in [0, 1)".into(),
        ));
    }
    let (center, axis, radius) = scene.hole_world(hole_id)?;
    let not_detectable = |reason: &str| VisionError::NotDetectable {
        hole: hole_id,
        reason: reason.into(),
    };
    if axis.dot(&(cam.pose.position - center)) <= 0.0 {
        return Err(not_detectable("hole faces away from the camera"));
    }
    if !cam.in_image(&cam.to_camera(&center)) {
        return Err(not_detectable("hole outside the camera frustum"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep = ((params.points as f64) * (1.0 - params.dropout)).round() as usize;
    let mut kept: Vec<usize> = sample_indices(&mut rng, params.points, keep).into_vec();
    kept.sort_unstable();
    // rim parameterized in the bar frame so the samples move with the bar
    let (u, v) = plane_basis(&scene.holes[hole_id].axis);
    let (u, v) = (scene.bar_pose.transform_vector(&u), scene.bar_pose.transform_vector(&v));
    let noise = Normal::new(0.0, params.noise_sigma).expect("sigma validated");
    let points: Vec<Vec3> = kept
        .into_iter()
        .map(|k| {
            let th = 2.0 * PI * k as f64 / params.points as f64;
            let rim = center + (u * th.cos() + v * th.sin()) * radius;
            let mut p = cam.to_camera(&rim);
            if params.noise_sigma > 0.0 {
                p += Vec3::from_fn(|_, _| noise.sample(&mut rng));
            }
            p
        })
        .filter(|p| cam.in_image(p))
        .collect();
    if points.is_empty() {
        return Err(not_detectable("no rim points inside the image"));
    }
    Ok(MaskSample {
        points,
        hole_id,
        noise_sigma: params.noise_sigma,
        dropout: params.dropout,
    })
}

/// Orthonormal pair spanning the plane with normal `n`.
fn plane_basis(n: &Vec3) -> (Vec3, Vec3) {
    let n = n.normalize();
    let seed = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = (seed - n * n.dot(&seed)).normalize();
    (u, n.cross(&u))
}

/// Plane `normal · p + offset = 0` with the normal facing the origin (the camera).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneFit {
    pub normal: Vec3,
    pub offset: f64,
    pub rms: f64,
    pub centroid: Vec3,
}

pub fn fit_plane(points: &[Vec3]) -> Result<PlaneFit, VisionError> {
    if points.len() < 3 {
        return Err(VisionError::InsufficientPoints {
            needed: 3,
            got: points.len(),
        });
    }
    let n = points.len() as f64;
    let centroid = points.iter().sum::<Vec3>() / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (l1, l2) = (eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
    if !(l2 > 0.0) || l1 <= 1e-12 * l2 {
        return Err(VisionError::Degenerate("points are collinear or coincident"));
    }
    let mut normal: Vec3 = eig.eigenvectors.column(order[0]).into_owned().normalize();
    if normal.dot(&(-centroid)) < 0.0 {
        normal = -normal;
    }
    let offset = -normal.dot(&centroid);
    let rms = (points.iter().map(|p| (normal.dot(p) + offset).powi(2)).sum::<f64>() / n).sqrt();
    Ok(PlaneFit {
        normal,
        offset,
        rms,
        centroid,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoleEstimate {
    #[serde(with = "crate::se3::vec3_array")]
    pub center: Vec3,
    #[serde(with = "crate::se3::vec3_array")]
    pub axis: Vec3,
    pub radius: f64,
    pub rms: f64,
}

impl HoleEstimate {
    /// The estimate expressed in the frame `pose` maps from.
    pub fn transformed(&self, pose: &Pose) -> HoleEstimate {
        HoleEstimate {
            center: pose.transform_point(&self.center),
            axis: pose.transform_vector(&self.axis),
            ..*self
        }
    }
}

/// Largest angular span not containing a gap, for points around `center`.
fn arc_coverage(xy: &[(f64, f64)], center: (f64, f64)) -> f64 {
    let mut ang: Vec<f64> = xy.iter().map(|(x, y)| (y - center.1).atan2(x - center.0)).collect();
    ang.sort_by(f64::total_cmp);
    let mut gap = ang[0] + 2.0 * PI - ang[ang.len() - 1];
    for w in ang.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    2.0 * PI - gap
}

/// Plane fit, algebraic circle fit in the plane, one Gauss-Newton pass on the
/// geometric distance, then lift back to 3-D.
pub fn fit_circle3d(sample: &MaskSample) -> Result<HoleEstimate, VisionError> {
    let pts = &sample.points;
    let plane = fit_plane(pts)?;
    let (u, v) = plane_basis(&plane.normal);
    let xy: Vec<(f64, f64)> = pts
        .iter()
        .map(|p| {
            let d = p - plane.centroid;
            (d.dot(&u), d.dot(&v))
        })
        .collect();

    // Kåsa: x² + y² = 2ax + 2by + c
    let mut ata = Matrix3::zeros();
    let mut atb = Vec3::zeros();
    for &(x, y) in &xy {
        let row = Vec3::new(2.0 * x, 2.0 * y, 1.0);
        ata += row * row.transpose();
        atb += row * (x * x + y * y);
    }
    let sol = ata
        .lu()
        .solve(&atb)
        .ok_or(VisionError::Degenerate("circle system is singular"))?;
    let (mut a, mut b) = (sol.x, sol.y);
    let r2 = sol.z + a * a + b * b;
    if !(r2 > 0.0) {
        return Err(VisionError::Degenerate("negative squared radius"));
    }
    let mut r = r2.sqrt();

    let mut jtj = Matrix3::zeros();
    let mut jtr = Vec3::zeros();
    for &(x, y) in &xy {
        let d = ((x - a).powi(2) + (y - b).powi(2)).sqrt();
        if d == 0.0 {
            continue;
        }
        let j = Vec3::new(-(x - a) / d, -(y - b) / d, -1.0);
        jtj += j * j.transpose();
        jtr += j * (d - r);
    }
    if let Some(step) = jtj.lu().solve(&(-jtr)) {
        if step.iter().all(|s| s.is_finite()) {
            a += step.x;
            b += step.y;
            r += step.z;
        }
    }
    if !(r > 0.0) {
        return Err(VisionError::Degenerate("non-positive radius"));
    }

    let coverage = arc_coverage(&xy, (a, b));
    if coverage < MIN_ARC {
        return Err(VisionError::ArcCoverage {
            degrees: coverage.to_degrees(),
        });
    }

    let n = pts.len() as f64;
    let rms = (xy
        .iter()
        .zip(pts)
        .map(|(&(x, y), p)| {
            let radial = ((x - a).powi(2) + (y - b).powi(2)).sqrt() - r;
            let normal = plane.normal.dot(p) + plane.offset;
            radial * radial + normal * normal
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(HoleEstimate {
        center: plane.centroid + u * a + v * b,
        axis: plane.normal,
        radius: r,
        rms,
    })
}

/// Localizes one hole and returns the estimate in the world frame.
pub fn localize(
    scene: &BarScene,
    cam: &CameraModel,
    hole_id: usize,
    params: &MaskParams,
    seed: u64,
) -> Result<HoleEstimate, VisionError> {
    let mask = synthesize_mask(scene, cam, hole_id, params, seed)?;
    Ok(fit_circle3d(&mask)?.transformed(&cam.pose))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub yaw_min: f64,
    pub yaw_max: f64,
    pub step: f64,
    /// m
    pub tolerance: f64,
    pub mask: MaskParams,
    /// World point the bar yaws about (the gripper).
    #[serde(with = "crate::se3::vec3_array")]
    pub pivot: Vec3,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            yaw_min: -PI / 2.0,
            yaw_max: PI / 2.0,
            step: 1f64.to_radians(),
            tolerance: 1e-3,
            mask: MaskParams {
                noise_sigma: 0.5e-3,
                ..MaskParams::default()
            },
            pivot: Vec3::new(0.45, 0.0, 0.02),
            seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn yaws(&self) -> Result<Vec<f64>, VisionError> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(VisionError::InvalidParameter("sweep step must be positive".into()));
        }
        if !(self.yaw_max >= self.yaw_min) || !self.yaw_min.is_finite() || !self.yaw_max.is_finite() {
            return Err(VisionError::EmptyRange);
        }
        let n = ((self.yaw_max - self.yaw_min) / self.step + 1e-9).floor() as usize;
        Ok((0..=n).map(|k| self.yaw_min + k as f64 * self.step).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub yaw: f64,
    pub hole_id: usize,
    pub detected: bool,
    /// NaN when no estimate was produced.
    pub center_err_m: f64,
    pub radius_err_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleIntervals {
    pub hole_id: usize,
    /// Closed yaw intervals `[start, end]` of consecutive detected grid points.
    pub intervals: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub holes: Vec<HoleIntervals>,
}

/// Independent per-(yaw, hole) seed, so results do not depend on evaluation order.
pub fn cell_seed(seed: u64, yaw_index: usize, hole: usize) -> u64 {
    let mut z = seed ^ ((yaw_index as u64) << 20 | hole as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One grid cell: detectable iff a mask exists, the fit succeeds and the
/// center error is within tolerance.
pub fn evaluate_cell(scene: &BarScene, cam: &CameraModel, cfg: &SweepConfig, k: usize, yaw: f64, hole: usize) -> SweepRow {
    let yawed = scene.yawed(yaw, &cfg.pivot);
    let (truth, _, radius) = yawed.hole_world(hole).expect("hole ids come from the scene");
    let (center_err_m, radius_err_m) = match localize(&yawed, cam, hole, &cfg.mask, cell_seed(cfg.seed, k, hole)) {
        Ok(est) => ((est.center - truth).norm(), (est.radius - radius).abs()),
        Err(_) => (f64::NAN, f64::NAN),
    };
    SweepRow {
        yaw,
        hole_id: hole,
        detected: center_err_m <= cfg.tolerance,
        center_err_m,
        radius_err_m,
    }
}

/// Maximal runs of detected grid points for one hole, in yaw order.
pub fn intervals_from_rows(rows: &[SweepRow], hole: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut open: Option<(f64, f64)> = None;
    for r in rows.iter().filter(|r| r.hole_id == hole) {
        match (&mut open, r.detected) {
            (Some(iv), true) => iv.1 = r.yaw,
            (None, true) => open = Some((r.yaw, r.yaw)),
            (Some(_), false) => out.push(open.take().unwrap()),
            (None, false) => {}
        }
    }
    out.extend(open);
    out
}

pub fn detection_range_sweep(scene: &BarScene, cam: &CameraModel, cfg: &SweepConfig) -> Result<SweepResult, VisionError> {
    scene.validate()?;
    let yaws = cfg.yaws()?;
    let holes = scene.holes.len();
    let cell = |k: usize| -> Vec<SweepRow> {
        (0..holes).map(|h| evaluate_cell(scene, cam, cfg, k, yaws[k], h)).collect()
    };
    #[cfg(feature = "parallel")]
    let per_yaw: Vec<Vec<SweepRow>> = {
        use rayon::prelude::*;
        (0..yaws.len()).into_par_iter().map(cell).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_yaw: Vec<Vec<SweepRow>> = (0..yaws.len()).map(cell).collect();
    let rows: Vec<SweepRow> = per_yaw.into_iter().flatten().collect();
    let holes = (0..holes)
        .map(|h| HoleIntervals {
            hole_id: h,
            intervals: intervals_from_rows(&rows, h),
        })
        .collect();
    Ok(SweepResult { rows, holes })
}

pub const SWEEP_HEADER: &str = "yaw,hole_id,detected,center_err_m,radius_err_m";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    use crate::trajectory::fmt_sig9;
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_sig9(r.yaw),
            r.hole_id,
            r.detected,
            fmt_sig9(r.center_err_m),
            fmt_sig9(r.radius_err_m)
        ));
    }
    s
}

/// Scene description file: the bar scene plus the camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDescription {
    pub bar_pose: Pose,
    pub bar_dims: [f64; 3],
    pub holes: Vec<HoleSpec>,
    pub camera: CameraModel,
}

impl Default for SceneDescription {
    fn default() -> Self {
        Self::new(BarScene::default(), CameraModel::default())
    }
}

impl SceneDescription {
    pub fn new(scene: BarScene, camera: CameraModel) -> Self {
        Self {
            bar_pose: scene.bar_pose,
            bar_dims: scene.bar_dims,
            holes: scene.holes,
            camera,
        }
    }

    pub fn scene(&self) -> BarScene {
        BarScene {
            bar_pose: self.bar_pose,
            bar_dims: self.bar_dims,
            holes: self.holes.clone(),
        }
    }
}
