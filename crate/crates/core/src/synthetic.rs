//! Smooth synthetic demonstrations.

use crate::se3::{Pose, UnitQuaternion, Vec3};
use crate::trajectory::{Sample, Trajectory};

/// Quintic Hermite blend with zero accelerations at both knots.
fn hermite5(p0: Vec3, v0: Vec3, p1: Vec3, v1: Vec3, h: f64, u: f64) -> Vec3 {
    let u3 = u * u * u;
    let u4 = u3 * u;
    let u5 = u4 * u;
    let h0 = 1.0 - 10.0 * u3 + 15.0 * u4 - 6.0 * u5;
    let h1 = u - 6.0 * u3 + 8.0 * u4 - 3.0 * u5;
    let h3 = 10.0 * u3 - 15.0 * u4 + 6.0 * u5;
    let h4 = -4.0 * u3 + 7.0 * u4 - 3.0 * u5;
    p0 * h0 + v0 * (h1 * h) + p1 * h3 + v1 * (h4 * h)
}

/// Spline through `points` with equal segment durations, at rest with zero
/// acceleration at both ends (Catmull-Rom knot velocities, zero knot accelerations).
fn spline(points: &[Vec3], duration: f64, t: f64) -> Vec3 {
    let m = points.len();
    if m == 1 {
        return points[0];
    }
    let h = duration / (m - 1) as f64;
    let vel = |i: usize| -> Vec3 {
        if i == 0 || i == m - 1 {
            Vec3::zeros()
        } else {
            (points[i + 1] - points[i - 1]) / (2.0 * h)
        }
    };
    let seg = ((t / h).floor() as usize).min(m - 2);
    let u = ((t - seg as f64 * h) / h).clamp(0.0, 1.0);
    hermite5(points[seg], vel(seg), points[seg + 1], vel(seg + 1), h, u)
}

/// Pose trajectory through `waypoints`, sampled every `dt` over `duration`.
///
/// Orientation is splined in rotation-vector coordinates relative to the first
/// waypoint, so total rotations must stay below half a turn.
pub fn spline_demo(waypoints: &[Pose], duration: f64, dt: f64) -> Trajectory {
    assert!(!waypoints.is_empty() && duration > 0.0 && dt > 0.0);
    let q0 = waypoints[0].orientation;
    let positions: Vec<Vec3> = waypoints.iter().map(|p| p.position).collect();
    let rotvecs: Vec<Vec3> = waypoints.iter().map(|p| p.orientation.error_to(&q0)).collect();
    let n = (duration / dt).round() as usize;
    let samples = (0..=n)
        .map(|k| {
            let t = if k == n { duration } else { k as f64 * dt };
            let p = spline(&positions, duration, t);
            let r = spline(&rotvecs, duration, t);
            let q = UnitQuaternion::from_rotation_vector(&r).mul(&q0);
            Sample::new(t, Pose::new(p, q))
        })
        .collect();
    Trajectory::new(samples).expect("uniform grid is strictly increasing")
}

/// Minimum-jerk point-to-point profile `d (10u^3 - 15u^4 + 6u^5)`.
pub fn min_jerk(start: &Pose, goal: &Pose, duration: f64, dt: f64) -> Trajectory {
    let n = (duration / dt).round() as usize;
    let samples = (0..=n)
        .map(|k| {
            let t = if k == n { duration } else { k as f64 * dt };
            let u = t / duration;
            let s = 10.0 * u.powi(3) - 15.0 * u.powi(4) + 6.0 * u.powi(5);
            Sample::new(t, start.interpolate(goal, s))
        })
        .collect();
    Trajectory::new(samples).expect("uniform grid is strictly increasing")
}

/// Five-waypoint approach-and-descend path used by examples and tests.
pub fn reference_waypoints() -> Vec<Pose> {
    let down = UnitQuaternion::from_axis_angle(&Vec3::x(), std::f64::consts::PI);
    let tilt = |rv: Vec3| UnitQuaternion::from_rotation_vector(&rv).mul(&down);
    vec![
        Pose::new(Vec3::new(0.40, -0.20, 0.35), down),
        Pose::new(Vec3::new(0.45, -0.10, 0.40), tilt(Vec3::new(0.10, 0.05, 0.20))),
        Pose::new(Vec3::new(0.55, 0.00, 0.38), tilt(Vec3::new(0.15, -0.10, 0.35))),
        Pose::new(Vec3::new(0.60, 0.08, 0.30), tilt(Vec3::new(0.05, -0.05, 0.25))),
        Pose::new(Vec3::new(0.62, 0.10, 0.22), tilt(Vec3::new(0.0, 0.0, 0.15))),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passes_through_waypoints_at_rest() {
        let wp = reference_waypoints();
        let tr = spline_demo(&wp, 10.0, 0.01);
        assert_eq!(tr.len(), 1001);
        for (i, w) in wp.iter().enumerate() {
            let p = tr.pose_at(2.5 * i as f64);
            assert!((p.position - w.position).norm() < 1e-9);
            assert!(p.orientation.angle_to(&w.orientation) < 1e-7);
        }
        let s = tr.samples();
        assert!((s[1].pose.position - s[0].pose.position).norm() < 1e-6);
    }

    #[test]
    fn min_jerk_endpoints() {
        let a = Pose::from_position(Vec3::zeros());
        let b = Pose::from_position(Vec3::new(0.3, 0.0, 0.0));
        let tr = min_jerk(&a, &b, 3.0, 0.001);
        assert_eq!(tr.last().pose.position, b.position);
        assert!((tr.pose_at(1.5).position.x - 0.15).abs() < 1e-12);
    }
}
