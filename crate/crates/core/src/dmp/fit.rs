use crate::diff::{finite_difference, moving_average};
use crate::se3::{Pose, Vec3};
use crate::trajectory::Trajectory;

use super::forcing::{fit_lwr, BasisLayout};
use super::{CanonicalSystem, DmpConfig, DmpError, GateMode, PoseDmp, TransformParams};

/// Phases below this are clamped when dividing gated targets by `s`.
const PHASE_FLOOR: f64 = 1e-8;
const STILL_TOL: f64 = 1e-12;

/// A uniformly resampled demonstration with smoothed derivatives.
#[derive(Debug, Clone)]
pub struct DemonstrationData {
    pub trajectory: Trajectory,
    pub dt: f64,
    pub velocity: Vec<Vec3>,
    pub acceleration: Vec<Vec3>,
    /// World-frame angular velocity.
    pub angular_velocity: Vec<Vec3>,
    pub angular_acceleration: Vec<Vec3>,
}

impl DemonstrationData {
    pub fn new(demo: &Trajectory, dt: f64, smoothing_window: usize) -> Result<Self, DmpError> {
        let trajectory = demo.resample(dt)?;
        let n = trajectory.len();
        if n < 4 {
            return Err(DmpError::TooFewSamples { needed: 4, got: n });
        }
        let dt = trajectory.duration() / (n - 1) as f64;
        let window = smoothing_window.max(1);

        let positions = trajectory.positions();
        let vel = finite_difference(&positions, 1)?;
        let velocity = moving_average(&vel.iter().map(|v| v.1).collect::<Vec<_>>(), window);
        let vel_series: Vec<(f64, Vec3)> = vel.iter().map(|v| v.0).zip(velocity.iter().copied()).collect();
        let acc = finite_difference(&vel_series, 1)?;
        let acceleration = moving_average(&acc.iter().map(|v| v.1).collect::<Vec<_>>(), window);

        let omega = angular_velocity(&trajectory)?;
        let angular_velocity = moving_average(&omega, window);
        let omega_series: Vec<(f64, Vec3)> = trajectory
            .samples()
            .iter()
            .map(|s| s.t)
            .zip(angular_velocity.iter().copied())
            .collect();
        let omega_dot = finite_difference(&omega_series, 1)?;
        let angular_acceleration =
            moving_average(&omega_dot.iter().map(|v| v.1).collect::<Vec<_>>(), window);

        Ok(Self {
            trajectory,
            dt,
            velocity,
            acceleration,
            angular_velocity,
            angular_acceleration,
        })
    }

    pub fn start(&self) -> Pose {
        self.trajectory.first().pose
    }

    pub fn goal(&self) -> Pose {
        self.trajectory.last().pose
    }

    pub fn duration(&self) -> f64 {
        self.trajectory.duration()
    }
}

/// Angular velocity from the same stencils as `finite_difference`, applied to
/// rotation vectors of neighbouring samples expressed relative to the sample
/// being differentiated.
fn angular_velocity(traj: &Trajectory) -> Result<Vec<Vec3>, DmpError> {
    let s = traj.samples();
    let n = s.len();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let (lo, pos) = if k == 0 {
            (0, 0)
        } else if k == n - 1 {
            (n - 3, 2)
        } else {
            (k - 1, 1)
        };
        let base = s[k].pose.orientation;
        let local: Vec<(f64, Vec3)> = (lo..lo + 3)
            .map(|j| (s[j].t, s[j].pose.orientation.error_to(&base)))
            .collect();
        out.push(finite_difference(&local, 1)?[pos].1);
    }
    Ok(out)
}

/// Forcing targets per sample: translation axes 0..3, rotation axes 3..6.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingTargets {
    pub phase: Vec<f64>,
    pub values: [Vec<f64>; 6],
    pub gate_mode: GateMode,
}

impl ForcingTargets {
    pub fn axis(&self, i: usize) -> Vec<(f64, f64)> {
        self.phase.iter().copied().zip(self.values[i].iter().copied()).collect()
    }
}

fn is_degenerate(demo: &DemonstrationData) -> bool {
    let (start, goal) = (demo.start(), demo.goal());
    let same_pose = (goal.position - start.position).norm() < STILL_TOL
        && goal.orientation.angle_to(&start.orientation) < STILL_TOL;
    let still = demo
        .trajectory
        .samples()
        .iter()
        .all(|s| (s.pose.position - start.position).norm() < STILL_TOL
            && s.pose.orientation.angle_to(&start.orientation) < STILL_TOL);
    same_pose && still
}

/// Inverts the transformation system along the demonstration:
/// `f = tau^2 a - alpha_z (beta_z e - tau v)` with `e = g - y` for position and
/// `e = 2 log(g * conj(q))` for orientation. Gated targets are divided by the
/// phase (clamped below at 1e-8).
pub fn compute_forcing_targets(
    demo: &DemonstrationData,
    tp: &TransformParams,
    cs: &CanonicalSystem,
    gate_mode: GateMode,
) -> Result<ForcingTargets, DmpError> {
    let n = demo.trajectory.len();
    if n < 4 {
        return Err(DmpError::TooFewSamples { needed: 4, got: n });
    }
    if is_degenerate(demo) {
        return Err(DmpError::NoInformation);
    }
    let tau = cs.tau;
    let goal = demo.goal();
    let t0 = demo.trajectory.first().t;
    let mut phase = Vec::with_capacity(n);
    let mut values: [Vec<f64>; 6] = Default::default();
    for (k, sample) in demo.trajectory.samples().iter().enumerate() {
        let s = cs.phase_at(sample.t - t0);
        phase.push(s);
        let e_pos = goal.position - sample.pose.position;
        let e_rot = goal.orientation.error_to(&sample.pose.orientation);
        let f_pos = tau * tau * demo.acceleration[k]
            - tp.alpha_z * (tp.beta_z * e_pos - tau * demo.velocity[k]);
        let f_rot = tau * tau * demo.angular_acceleration[k]
            - tp.alpha_z * (tp.beta_z * e_rot - tau * demo.angular_velocity[k]);
        let scale = match gate_mode {
            GateMode::PhaseGated => 1.0 / s.max(PHASE_FLOOR),
            GateMode::Literal => 1.0,
        };
        for a in 0..3 {
            values[a].push(f_pos[a] * scale);
            values[a + 3].push(f_rot[a] * scale);
        }
    }
    Ok(ForcingTargets {
        phase,
        values,
        gate_mode,
    })
}

/// Diagnostics gathered while fitting.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitDiagnostics {
    /// Bases without regression support, per axis (0..3 translation, 3..6 rotation).
    pub unsupported: [Vec<usize>; 6],
    /// The demonstration never moved; all weights were set to zero.
    pub stationary: bool,
    pub samples: usize,
}

/// Fits all six axes of a primitive to one demonstration. `tau` is the
/// demonstration duration.
pub fn fit_pose_dmp(demo: &Trajectory, config: &DmpConfig) -> Result<(PoseDmp, FitDiagnostics), DmpError> {
    config.validate()?;
    let data = DemonstrationData::new(demo, config.dt, config.smoothing_window)?;
    let tau = data.duration();
    let tp = config.transform();
    let cs = CanonicalSystem::new(config.alpha_s, tau);
    let layout = BasisLayout::new(config.n_basis, config.alpha_s)?;
    let mut diagnostics = FitDiagnostics {
        samples: data.trajectory.len(),
        ..Default::default()
    };
    let mut weights: [Vec<f64>; 6] = Default::default();
    match compute_forcing_targets(&data, &tp, &cs, config.gate_mode) {
        Ok(targets) => {
            for (axis, w) in weights.iter_mut().enumerate() {
                let fit = fit_lwr(&targets.axis(axis), &layout, config.gate_mode);
                *w = fit.weights;
                diagnostics.unsupported[axis] = fit.unsupported;
            }
        }
        Err(DmpError::NoInformation) => {
            // A still demonstration is reproduced exactly by zero forcing.
            diagnostics.stationary = true;
            for w in weights.iter_mut() {
                *w = vec![0.0; layout.len()];
            }
        }
        Err(e) => return Err(e),
    }
    let [w0, w1, w2, w3, w4, w5] = weights;
    let dmp = PoseDmp {
        alpha_s: config.alpha_s,
        alpha_z: tp.alpha_z,
        beta_z: tp.beta_z,
        tau,
        n: layout.len(),
        gate_mode: config.gate_mode,
        centers: layout.centers,
        widths: layout.widths,
        weights_pos: [w0, w1, w2],
        weights_rot: [w3, w4, w5],
        demo_start: data.start(),
        demo_goal: data.goal(),
    };
    Ok((dmp, diagnostics))
}
