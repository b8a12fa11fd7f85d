use crate::se3::{Pose, UnitQuaternion, Vec3};
use crate::trajectory::{Sample, Trajectory};

use super::forcing::mix;
use super::{DmpError, PoseDmp};

/// Integration continues to this multiple of `tau` so the attractor settles.
pub const OVERTIME: f64 = 1.5;

/// Integrates the primitive from `start` (at rest) toward `goal` over
/// `[0, 1.5 tau]` with explicit Euler on the transformation system, closed-form
/// phase and exponential-map orientation updates.
pub fn rollout(dmp: &PoseDmp, start: &Pose, goal: &Pose, tau: f64, dt: f64) -> Result<Trajectory, DmpError> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(DmpError::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    if !(dt > 0.0) || dt > tau / 100.0 {
        return Err(DmpError::InvalidParameter(format!(
            "dt must lie in (0, tau/100], got {dt} for tau = {tau}"
        )));
    }
    dmp.validate()?;
    let cs = dmp.canonical();
    let layout = dmp.layout();
    let (az, bz) = (dmp.alpha_z, dmp.beta_z);
    let steps = (OVERTIME * tau / dt).round() as usize;
    let k = dt / tau;

    let mut y = start.position;
    let mut z = Vec3::zeros();
    let mut q = start.orientation;
    let mut eta = Vec3::zeros();
    let mut psi = vec![0.0; layout.len()];
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(Sample::new(0.0, Pose::new(y, q)));

    for step in 0..steps {
        let t = step as f64 * dt;
        let s = (-cs.alpha_s * t / tau).exp();
        layout.activations_into(s, &mut psi);
        let mut f_pos = Vec3::zeros();
        let mut f_rot = Vec3::zeros();
        for a in 0..3 {
            f_pos[a] = mix(&psi, &dmp.weights_pos[a], s, dmp.gate_mode).value;
            f_rot[a] = mix(&psi, &dmp.weights_rot[a], s, dmp.gate_mode).value;
        }

        let z_dot = az * (bz * (goal.position - y) - z) + f_pos;
        let eta_dot = az * (bz * goal.orientation.error_to(&q) - eta) + f_rot;
        let y_next = y + z * k;
        let z_next = z + z_dot * k;
        // omega = eta / tau; the half-angle exponential takes omega * dt / 2
        let dq = UnitQuaternion::exp(&(eta * (k / 2.0))).map_err(|_| DmpError::NonFinite {
            step: step + 1,
            t: t + dt,
        })?;
        let q_next = dq.mul(&q);
        let eta_next = eta + eta_dot * k;

        let finite = y_next.iter().chain(z_next.iter()).chain(eta_next.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(DmpError::NonFinite {
                step: step + 1,
                t: t + dt,
            });
        }
        y = y_next;
        z = z_next;
        q = q_next;
        eta = eta_next;
        samples.push(Sample::new((step + 1) as f64 * dt, Pose::new(y, q)));
    }
    Ok(Trajectory::new(samples)?)
}
