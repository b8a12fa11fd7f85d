//! Admittance kinesthetic teaching on a position-controlled plant, driven by a
//! virtual human so demonstrations are reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::se3::{Pose, UnitQuaternion, Vec3, Wrench};
use crate::trajectory::{Sample, Trajectory};

#[derive(Debug, Error)]
pub enum KtcError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("demonstration timed out after {elapsed} s before reaching waypoint {waypoint}")]
    Timeout {
        elapsed: f64,
        waypoint: usize,
        partial: Box<Trajectory>,
    },
}

/// Diagonal admittance gains, translation axes first. `k_a` is a displacement per
/// control tick, so it is tied to the control rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdmittanceGains {
    /// m/N and rad/(N·m)
    pub k_s_inv: [f64; 6],
    /// m/(N·tick) and rad/(N·m·tick)
    pub k_a: [f64; 6],
    /// N and N·m
    pub deadband: [f64; 6],
    pub axis_mask: [bool; 6],
}

impl Default for AdmittanceGains {
    fn default() -> Self {
        Self {
            k_s_inv: [1e-4, 1e-4, 1e-4, 4e-3, 4e-3, 4e-3],
            k_a: [2e-4, 2e-4, 2e-4, 8e-3, 8e-3, 8e-3],
            deadband: [0.5, 0.5, 0.5, 0.05, 0.05, 0.05],
            axis_mask: [true; 6],
        }
    }
}

impl AdmittanceGains {
    pub fn validate(&self) -> Result<(), KtcError> {
        let all = self.k_s_inv.iter().chain(&self.k_a).chain(&self.deadband);
        if all.clone().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(KtcError::InvalidParameter(
                "gains and deadbands must be finite and non-negative".into(),
            ));
        }
        if !self.axis_mask.iter().any(|m| *m) {
            return Err(KtcError::InvalidParameter("at least one axis must be enabled".into()));
        }
        Ok(())
    }

    /// Same gains with both compliance terms multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut g = self.clone();
        for i in 0..6 {
            g.k_s_inv[i] *= factor;
            g.k_a[i] *= factor;
        }
        g
    }

    /// Per-axis displacement for one tick.
    pub fn displacement(&self, f: &Wrench) -> [f64; 6] {
        let mut d = [0.0; 6];
        for (i, out) in d.iter_mut().enumerate() {
            let fi = f.axis(i);
            if !self.axis_mask[i] || fi.abs() <= self.deadband[i] {
                continue;
            }
            *out = (self.k_s_inv[i] + self.k_a[i]) * (fi - fi.signum() * self.deadband[i]);
        }
        d
    }
}

fn displace(x: &Pose, d: &[f64; 6]) -> Pose {
    let dp = Vec3::new(d[0], d[1], d[2]);
    let dr = Vec3::new(d[3], d[4], d[5]);
    let orientation = if dr == Vec3::zeros() {
        x.orientation
    } else {
        UnitQuaternion::from_rotation_vector(&dr).mul(&x.orientation)
    };
    Pose::new(x.position + dp, orientation)
}

/// Commanded pose `x_c = x_r + (K_s⁻¹ + K_a) f`, rotations applied in the world frame.
pub fn ktc_step(x_r: &Pose, f: &Wrench, gains: &AdmittanceGains) -> Pose {
    displace(x_r, &gains.displacement(f))
}

/// Position-controlled robot tracking its command with a first-order lag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub x_r: Pose,
    pub x_c: Pose,
    /// seconds
    pub time_constant: f64,
}

impl PlantState {
    pub fn at_rest(pose: Pose, time_constant: f64) -> Self {
        Self {
            x_r: pose,
            x_c: pose,
            time_constant,
        }
    }
}

pub fn plant_step(state: &PlantState, dt: f64) -> PlantState {
    let a = 1.0 - (-dt / state.time_constant).exp();
    let (r, c) = (&state.x_r, &state.x_c);
    let position = r.position + (c.position - r.position) * a;
    let orientation = if r.orientation == c.orientation {
        r.orientation
    } else {
        r.orientation.slerp(&c.orientation, a)
    };
    PlantState {
        x_r: Pose::new(position, orientation),
        ..*state
    }
}

/// Friction-dominated back-drive of a robot without a wrist sensor: nothing
/// moves until the applied force breaks static friction, then the joint slips
/// with a low gain until the force falls below the kinetic level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NativeBackdrive {
    /// N
    pub breakaway_force: f64,
    /// N
    pub kinetic_force: f64,
    /// m/(N·tick)
    pub gain: f64,
    /// N·m
    pub breakaway_torque: f64,
    /// N·m
    pub kinetic_torque: f64,
    /// rad/(N·m·tick)
    pub rot_gain: f64,
}

impl Default for NativeBackdrive {
    fn default() -> Self {
        Self {
            breakaway_force: 40.0,
            kinetic_force: 25.0,
            gain: 2e-4,
            breakaway_torque: 4.0,
            kinetic_torque: 2.5,
            rot_gain: 8e-3,
        }
    }
}

impl NativeBackdrive {
    pub fn validate(&self) -> Result<(), KtcError> {
        let ok = self.kinetic_force >= 0.0
            && self.breakaway_force >= self.kinetic_force
            && self.kinetic_torque >= 0.0
            && self.breakaway_torque >= self.kinetic_torque
            && self.gain > 0.0
            && self.rot_gain > 0.0;
        if ok {
            Ok(())
        } else {
            Err(KtcError::InvalidParameter(
                "native back-drive needs breakaway >= kinetic >= 0 and positive gains".into(),
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct SlipState {
    force: bool,
    torque: bool,
}

fn slip(v: Vec3, slipping: &mut bool, breakaway: f64, kinetic: f64, gain: f64) -> Vec3 {
    let n = v.norm();
    if *slipping {
        *slipping = n >= kinetic;
    } else {
        *slipping = n > breakaway;
    }
    if *slipping && n > 0.0 {
        v * (gain * (n - kinetic) / n)
    } else {
        Vec3::zeros()
    }
}

impl NativeBackdrive {
    fn command(&self, x_r: &Pose, f: &Wrench, state: &mut SlipState) -> Pose {
        let dp = slip(f.force, &mut state.force, self.breakaway_force, self.kinetic_force, self.gain);
        let dr = slip(
            f.torque,
            &mut state.torque,
            self.breakaway_torque,
            self.kinetic_torque,
            self.rot_gain,
        );
        displace(x_r, &[dp.x, dp.y, dp.z, dr.x, dr.y, dr.z])
    }
}

/// Which teaching controller moves the robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TeachMode {
    Admittance(AdmittanceGains),
    Native(NativeBackdrive),
}

impl TeachMode {
    pub fn validate(&self) -> Result<(), KtcError> {
        match self {
            TeachMode::Admittance(g) => g.validate(),
            TeachMode::Native(n) => n.validate(),
        }
    }
}

/// Stand-in for the operator's hand. The hand target moves along the waypoint
/// path at a comfortable speed, waiting whenever the robot falls more than
/// `max_lead` behind. The grip is a spring-damper to the robot. While the
/// robot is stalled the operator leans in harder along the error direction, and
/// relaxes that extra effort once it moves again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VirtualHuman {
    pub path: Vec<Pose>,
    /// N/m
    pub grip_stiffness: f64,
    /// N·s/m
    pub grip_damping: f64,
    /// N·m/rad
    pub rot_stiffness: f64,
    /// N·m·s/rad
    pub rot_damping: f64,
    /// N/s
    pub effort_rate: f64,
    /// N·m/s
    pub rot_effort_rate: f64,
    /// s
    pub effort_decay: f64,
    /// m/s and rad/s below which the robot counts as stalled
    pub stall_speed: f64,
    pub stall_rot_speed: f64,
    /// N
    pub force_saturation: f64,
    /// N·m
    pub torque_saturation: f64,
    /// m/s
    pub hand_speed: f64,
    /// rad/s
    pub hand_rot_speed: f64,
    /// m
    pub max_lead: f64,
    /// m
    pub capture_radius: f64,
    /// rad
    pub capture_angle: f64,
}

impl VirtualHuman {
    pub fn new(path: Vec<Pose>) -> Self {
        Self {
            path,
            grip_stiffness: 400.0,
            grip_damping: 20.0,
            rot_stiffness: 6.0,
            rot_damping: 0.3,
            effort_rate: 40.0,
            rot_effort_rate: 4.0,
            effort_decay: 0.2,
            stall_speed: 1e-3,
            stall_rot_speed: 0.01,
            force_saturation: 12.0,
            torque_saturation: 1.5,
            hand_speed: 0.06,
            hand_rot_speed: 0.3,
            max_lead: 0.15,
            capture_radius: 0.005,
            capture_angle: 3f64.to_radians(),
        }
    }

    /// The same operator leaning on a robot that must be back-driven.
    pub fn pushing_hard(mut self) -> Self {
        self.force_saturation = 60.0;
        self.torque_saturation = 6.0;
        self
    }

    pub fn validate(&self) -> Result<(), KtcError> {
        if self.path.is_empty() {
            return Err(KtcError::InvalidParameter("waypoint path is empty".into()));
        }
        let positive = [
            self.force_saturation,
            self.torque_saturation,
            self.hand_speed,
            self.hand_rot_speed,
            self.max_lead,
            self.capture_radius,
            self.capture_angle,
            self.effort_decay,
        ];
        let non_negative = [
            self.grip_stiffness,
            self.grip_damping,
            self.rot_stiffness,
            self.rot_damping,
            self.effort_rate,
            self.rot_effort_rate,
            self.stall_speed,
            self.stall_rot_speed,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite()))
            || non_negative.iter().any(|v| !(*v >= 0.0 && v.is_finite()))
        {
            return Err(KtcError::InvalidParameter("virtual human parameters out of range".into()));
        }
        if !self.path.iter().all(Pose::is_finite) {
            return Err(KtcError::InvalidParameter("waypoint path is not finite".into()));
        }
        Ok(())
    }
}

fn saturate(v: Vec3, limit: f64) -> Vec3 {
    let n = v.norm();
    if n > limit {
        // rescaling can round a few ulps past the limit
        let mut scale = limit / n;
        while (v * scale).norm() > limit {
            scale = scale.next_down();
        }
        v * scale
    } else {
        v
    }
}

/// Unit vector, or zero for vectors at rounding-noise level.
fn unit(v: Vec3) -> Vec3 {
    let n = v.norm();
    if n > 1e-9 {
        v / n
    } else {
        Vec3::zeros()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub rate_hz: f64,
    /// s
    pub plant_time_constant: f64,
    /// s
    pub max_duration: f64,
    /// Gaussian sensor noise std on measured force (N) and torque (N·m).
    pub force_noise_std: f64,
    pub torque_noise_std: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            rate_hz: 100.0,
            plant_time_constant: 0.05,
            max_duration: 120.0,
            force_noise_std: 0.0,
            torque_noise_std: 0.0,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), KtcError> {
        let ok = self.rate_hz > 0.0
            && self.rate_hz.is_finite()
            && self.plant_time_constant > 0.0
            && self.max_duration > 0.0
            && self.force_noise_std >= 0.0
            && self.torque_noise_std >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(KtcError::InvalidParameter(
                "rate, time constant and duration must be positive; noise non-negative".into(),
            ))
        }
    }
}

struct Hand {
    segment: usize,
    u: f64,
}

impl Hand {
    fn pose(&self, path: &[Pose]) -> Pose {
        if self.segment + 1 >= path.len() {
            return *path.last().unwrap();
        }
        path[self.segment].interpolate(&path[self.segment + 1], self.u)
    }

    fn at_end(&self, path: &[Pose]) -> bool {
        self.segment + 1 >= path.len()
    }

    fn advance(&mut self, path: &[Pose], human: &VirtualHuman, dt: f64) {
        if self.at_end(path) {
            return;
        }
        let (a, b) = (&path[self.segment], &path[self.segment + 1]);
        let len = (b.position - a.position).norm();
        let ang = a.orientation.angle_to(&b.orientation);
        let t_seg = (len / human.hand_speed).max(ang / human.hand_rot_speed);
        self.u += if t_seg > 0.0 { dt / t_seg } else { 1.0 };
        if self.u >= 1.0 {
            self.segment += 1;
            self.u = 0.0;
        }
    }
}

/// Runs one teaching session at the control rate until the robot settles on
/// the final waypoint. The log holds the actual robot pose and the wrench the
/// human applied at every tick.
pub fn simulate_demonstration(
    human: &VirtualHuman,
    mode: &TeachMode,
    config: &SimConfig,
) -> Result<Trajectory, KtcError> {
    human.validate()?;
    mode.validate()?;
    config.validate()?;
    let dt = 1.0 / config.rate_hz;
    let path = &human.path;
    let goal = *path.last().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let force_noise = Normal::new(0.0, config.force_noise_std).expect("std validated");
    let torque_noise = Normal::new(0.0, config.torque_noise_std).expect("std validated");

    let mut plant = PlantState::at_rest(path[0], config.plant_time_constant);
    let mut prev = plant.x_r;
    let mut hand = Hand { segment: 0, u: 0.0 };
    let mut effort = 0.0;
    let mut rot_effort = 0.0;
    let mut slip_state = SlipState::default();
    let relax = (-dt / human.effort_decay).exp();
    let max_steps = (config.max_duration * config.rate_hz).ceil() as usize;
    let mut samples = Vec::new();

    for k in 0..=max_steps {
        let t = k as f64 * dt;
        let x_r = plant.x_r;
        let target = hand.pose(path);

        let e = target.position - x_r.position;
        let e_rot = target.orientation.error_to(&x_r.orientation);
        let v = (x_r.position - prev.position) / dt;
        let w = x_r.orientation.error_to(&prev.orientation) / dt;
        effort = if v.norm() < human.stall_speed {
            (effort + human.effort_rate * dt).min(human.force_saturation)
        } else {
            effort * relax
        };
        rot_effort = if w.norm() < human.stall_rot_speed {
            (rot_effort + human.rot_effort_rate * dt).min(human.torque_saturation)
        } else {
            rot_effort * relax
        };
        let force = saturate(
            e * human.grip_stiffness + unit(e) * effort - v * human.grip_damping,
            human.force_saturation,
        );
        let torque = saturate(
            e_rot * human.rot_stiffness + unit(e_rot) * rot_effort - w * human.rot_damping,
            human.torque_saturation,
        );
        let applied = Wrench { force, torque };
        samples.push(Sample::with_wrench(t, x_r, applied));

        let settled = hand.at_end(path)
            && (x_r.position - goal.position).norm() <= human.capture_radius
            && x_r.orientation.angle_to(&goal.orientation) <= human.capture_angle;
        if settled {
            return Ok(Trajectory::new(samples).expect("uniform ticks"));
        }
        if k == max_steps {
            break;
        }

        plant.x_c = match mode {
            TeachMode::Admittance(gains) => {
                let mut measured = applied;
                if config.force_noise_std > 0.0 {
                    measured.force += Vec3::from_fn(|_, _| force_noise.sample(&mut rng));
                }
                if config.torque_noise_std > 0.0 {
                    measured.torque += Vec3::from_fn(|_, _| torque_noise.sample(&mut rng));
                }
                ktc_step(&x_r, &measured, gains)
            }
            TeachMode::Native(native) => native.command(&x_r, &applied, &mut slip_state),
        };
        prev = x_r;
        plant = plant_step(&plant, dt);
        if (hand.pose(path).position - plant.x_r.position).norm() < human.max_lead {
            hand.advance(path, human, dt);
        }
    }
    Err(KtcError::Timeout {
        elapsed: max_steps as f64 * dt,
        waypoint: (hand.segment + 1).min(path.len() - 1),
        partial: Box::new(Trajectory::new(samples).expect("uniform ticks")),
    })
}

/// Paired proposed-vs-native teaching runs on one waypoint path. Each seed
/// perturbs the operator (speed, grip, path) and the sensor noise identically
/// for both controllers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TeachingScenario {
    pub gains: AdmittanceGains,
    pub native: NativeBackdrive,
    pub sim: SimConfig,
    /// Relative spread of operator speed and grip parameters per seed.
    pub operator_spread: f64,
    /// m, uniform jitter applied to intermediate waypoints per seed.
    pub waypoint_jitter: f64,
    pub native_force_saturation: f64,
    pub native_torque_saturation: f64,
}

impl Default for TeachingScenario {
    fn default() -> Self {
        Self {
            gains: AdmittanceGains::default(),
            native: NativeBackdrive::default(),
            sim: SimConfig {
                force_noise_std: 0.0,
                torque_noise_std: 0.0,
                ..SimConfig::default()
            },
            operator_spread: 0.1,
            waypoint_jitter: 0.01,
            native_force_saturation: 60.0,
            native_torque_saturation: 6.0,
        }
    }
}

impl TeachingScenario {
    /// The operator for `seed`, with proposed-mode saturation.
    pub fn operator(&self, path: &[Pose], seed: u64) -> VirtualHuman {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6b74_6300);
        let mut jitter = |x: f64| x * (1.0 + self.operator_spread * rng.random_range(-1.0..=1.0));
        let mut h = VirtualHuman::new(Vec::new());
        h.hand_speed = jitter(h.hand_speed);
        h.hand_rot_speed = jitter(h.hand_rot_speed);
        h.grip_stiffness = jitter(h.grip_stiffness);
        h.effort_rate = jitter(h.effort_rate);
        let n = path.len();
        h.path = path
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if i == 0 || i + 1 == n || self.waypoint_jitter == 0.0 {
                    *p
                } else {
                    let d = Vec3::from_fn(|_, _| rng.random_range(-self.waypoint_jitter..=self.waypoint_jitter));
                    Pose::new(p.position + d, p.orientation)
                }
            })
            .collect();
        h
    }

    pub fn run_proposed(&self, path: &[Pose], seed: u64) -> Result<Trajectory, KtcError> {
        let human = self.operator(path, seed);
        let sim = SimConfig { seed, ..self.sim.clone() };
        simulate_demonstration(&human, &TeachMode::Admittance(self.gains.clone()), &sim)
    }

    pub fn run_native(&self, path: &[Pose], seed: u64) -> Result<Trajectory, KtcError> {
        let mut human = self.operator(path, seed);
        human.force_saturation = self.native_force_saturation;
        human.torque_saturation = self.native_torque_saturation;
        let sim = SimConfig { seed, ..self.sim.clone() };
        simulate_demonstration(&human, &TeachMode::Native(self.native.clone()), &sim)
    }
}
