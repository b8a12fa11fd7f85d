//! wasm-bindgen bindings for the static demo page in `www/`.
//!
//! Every export returns a JSON string; the page parses it and draws on canvases.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use cobot_lfd::dmp::{fit_pose_dmp, rollout, DmpConfig, GateMode, PoseDmp};
use cobot_lfd::ktc::TeachingScenario;
use cobot_lfd::metrics::{compare_demonstrations, jerk_metrics};
use cobot_lfd::synthetic::{reference_waypoints, spline_demo};
use cobot_lfd::vision::{detection_range_sweep, BarScene, CameraModel, SweepConfig};
use cobot_lfd::{Pose, Trajectory, Vec3};

/// Plotting stride; the page does not need every millisecond.
const STRIDE: usize = 20;

#[derive(Serialize)]
struct Curve {
    t: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
}

fn curve(tr: &Trajectory, stride: usize) -> Curve {
    let s: Vec<_> = tr.samples().iter().step_by(stride.max(1)).collect();
    Curve {
        t: s.iter().map(|x| x.t).collect(),
        x: s.iter().map(|x| x.pose.position.x).collect(),
        y: s.iter().map(|x| x.pose.position.y).collect(),
        z: s.iter().map(|x| x.pose.position.z).collect(),
    }
}

fn to_js<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

fn err_json(e: impl std::fmt::Display) -> String {
    to_js(&serde_json::json!({ "error": e.to_string() }))
}

/// One demonstration and the two primitives fitted to it.
#[wasm_bindgen]
pub struct DmpDemo {
    demo: Trajectory,
    gated: PoseDmp,
    literal: PoseDmp,
}

#[wasm_bindgen]
impl DmpDemo {
    #[wasm_bindgen(constructor)]
    pub fn new() -> Result<DmpDemo, JsError> {
        let demo = spline_demo(&reference_waypoints(), 10.0, 0.01);
        let fit = |gate_mode| {
            let cfg = DmpConfig {
                gate_mode,
                ..DmpConfig::default()
            };
            fit_pose_dmp(&demo, &cfg).map(|r| r.0)
        };
        let gated = fit(GateMode::PhaseGated).map_err(|e| JsError::new(&e.to_string()))?;
        let literal = fit(GateMode::Literal).map_err(|e| JsError::new(&e.to_string()))?;
        Ok(DmpDemo { demo, gated, literal })
    }

    /// Rolls out towards the demo goal shifted by `(dx, dy, dz)` meters, with
    /// `tau` scaled by `time_scale`.
    pub fn retarget(&self, dx: f64, dy: f64, dz: f64, time_scale: f64, gated: bool) -> String {
        retarget_json(self, dx, dy, dz, time_scale, gated)
    }
}

fn retarget_json(d: &DmpDemo, dx: f64, dy: f64, dz: f64, time_scale: f64, gated: bool) -> String {
    let dmp = if gated { &d.gated } else { &d.literal };
    let goal = Pose::new(dmp.demo_goal.position + Vec3::new(dx, dy, dz), dmp.demo_goal.orientation);
    let tau = dmp.tau * time_scale;
    match rollout(dmp, &dmp.demo_start, &goal, tau, 1e-3) {
        Ok(r) => {
            let end = r.last().pose.position;
            to_js(&serde_json::json!({
                "demo": curve(&d.demo, 1),
                "rollout": curve(&r, STRIDE),
                "goal": [goal.position.x, goal.position.y, goal.position.z],
                "endpoint_error_mm": (end - goal.position).norm() * 1e3,
            }))
        }
        Err(e) => err_json(e),
    }
}

/// Yaw sweep of the default bar under the default camera.
#[wasm_bindgen]
pub fn detection_sweep(noise_mm: f64, tolerance_mm: f64, step_deg: f64, seed: u32) -> String {
    let mut cfg = SweepConfig {
        tolerance: tolerance_mm * 1e-3,
        step: step_deg.to_radians(),
        seed: seed as u64,
        ..SweepConfig::default()
    };
    cfg.mask.noise_sigma = noise_mm * 1e-3;
    match detection_range_sweep(&BarScene::default(), &CameraModel::default(), &cfg) {
        Ok(r) => to_js(&r),
        Err(e) => err_json(e),
    }
}

/// Paired teaching runs on the reference path for one seeded operator.
#[wasm_bindgen]
pub fn teach_compare(seed: u32) -> String {
    let sc = TeachingScenario::default();
    let path = reference_waypoints();
    let run = || -> Result<String, String> {
        let p = sc.run_proposed(&path, seed as u64).map_err(|e| e.to_string())?;
        let n = sc.run_native(&path, seed as u64).map_err(|e| e.to_string())?;
        let force = |t: &Trajectory| -> Vec<f64> {
            t.samples().iter().map(|s| s.wrench.map_or(0.0, |w| w.force.norm())).collect()
        };
        Ok(to_js(&serde_json::json!({
            "proposed": curve(&p, 1),
            "native": curve(&n, 1),
            "proposed_force": force(&p),
            "native_force": force(&n),
            "proposed_jerk": jerk_metrics(&p).map_err(|e| e.to_string())?,
            "native_jerk": jerk_metrics(&n).map_err(|e| e.to_string())?,
            "comparison": compare_demonstrations(&p, &n).map_err(|e| e.to_string())?,
        })))
    };
    run().unwrap_or_else(err_json)
}
