//! `cobot`: fit, roll out, simulate teaching, localize holes and run insertion trials.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use cobot_lfd::assembly::{
    execute_trial, parse_events, default_script, run_batch, teach_dmp, trials_csv, AssemblyScenario,
    HoleSelection,
};
use cobot_lfd::config::RunConfig;
use cobot_lfd::dmp::{fit_pose_dmp, rollout, PoseDmp};
use cobot_lfd::metrics::{compare_demonstrations, reference_rows, trajectory_report};
use cobot_lfd::se3::{Pose, UnitQuaternion, Vec3};
use cobot_lfd::trajectory::{fmt_sig9, Trajectory};
use cobot_lfd::vision::{cell_seed, detection_range_sweep, localize, sweep_csv, SceneDescription, VisionError};

#[derive(Parser)]
#[command(name = "cobot", version, about = "Learning-from-demonstration tools for collaborative peg-in-hole assembly")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run configuration JSON. Unknown keys are rejected.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Demonstration CSV -> DMP JSON.
    Fit {
        #[arg(long)]
        demo: PathBuf,
    },
    /// DMP JSON + start/goal -> trajectory CSV.
    Rollout {
        #[arg(long)]
        dmp: PathBuf,
        /// `x,y,z,qw,qx,qy,qz`; defaults to the demonstration start.
        #[arg(long)]
        start: Option<String>,
        /// `x,y,z,qw,qx,qy,qz`; defaults to the demonstration goal.
        #[arg(long)]
        goal: Option<String>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Simulated kinesthetic teaching, proposed and native back-drive.
    TeachSim,
    /// Scene JSON -> hole estimates CSV.
    Localize {
        #[arg(long)]
        scene: Option<PathBuf>,
    },
    /// Scene JSON + yaw range -> detection range CSV.
    Sweep {
        #[arg(long)]
        scene: Option<PathBuf>,
        /// rad
        #[arg(long, allow_hyphen_values = true)]
        yaw_min: Option<f64>,
        /// rad
        #[arg(long, allow_hyphen_values = true)]
        yaw_max: Option<f64>,
        /// rad
        #[arg(long)]
        step: Option<f64>,
    },
    /// One insertion trial.
    Trial {
        #[arg(long)]
        scene: Option<PathBuf>,
        /// DMP JSON; taught from the simulated demonstration when absent.
        #[arg(long)]
        dmp: Option<PathBuf>,
        /// Event script, one `t kind` per line.
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long)]
        hole: Option<usize>,
        /// rad
        #[arg(long, allow_hyphen_values = true)]
        yaw: Option<f64>,
    },
    /// Many seeded insertion trials.
    Batch {
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        dmp: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Trajectory CSV -> quality report JSON.
    Metrics {
        #[arg(long)]
        traj: PathBuf,
        /// Second trajectory to compare against.
        #[arg(long)]
        compare: Option<PathBuf>,
    },
}

/// A failure reported as one line: `error kind=<kind> <detail>`.
struct Failure {
    kind: &'static str,
    detail: String,
}

fn fail<E: Display>(kind: &'static str) -> impl Fn(E) -> Failure {
    move |e| Failure {
        kind,
        detail: e.to_string(),
    }
}

type Res<T> = Result<T, Failure>;

fn write(path: &Path, text: &str) -> Res<()> {
    fs::write(path, text).map_err(|e| Failure {
        kind: "io",
        detail: format!("file={}: {e}", path.display()),
    })
}

fn read(path: &Path) -> Res<String> {
    fs::read_to_string(path).map_err(|e| Failure {
        kind: "io",
        detail: format!("file={}: {e}", path.display()),
    })
}

fn parse_pose(text: &str, field: &str) -> Res<Pose> {
    let bad = |m: String| Failure {
        kind: "args",
        detail: format!("field={field}: {m}"),
    };
    let v: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}"))))
        .collect::<Res<_>>()?;
    if v.len() != 7 {
        return Err(bad(format!("expected 7 comma-separated numbers, got {}", v.len())));
    }
    let q = UnitQuaternion::new(v[3], v[4], v[5], v[6]).map_err(|e| bad(e.to_string()))?;
    Ok(Pose::new(Vec3::new(v[0], v[1], v[2]), q))
}

fn load_scene(cfg: &mut RunConfig, scene: &Option<PathBuf>) -> Res<()> {
    if let Some(path) = scene {
        let text = read(path)?;
        let d: SceneDescription = serde_json::from_str(&text).map_err(|e| Failure {
            kind: "parse",
            detail: format!("file={} line={} column={}: {e}", path.display(), e.line(), e.column()),
        })?;
        cfg.assembly.scene = d;
    }
    Ok(())
}

fn load_dmp(path: &Option<PathBuf>, cfg: &RunConfig) -> Res<PoseDmp> {
    match path {
        Some(p) => PoseDmp::load(p).map_err(fail("parse")),
        None => teach_dmp(&cfg.teach, &cfg.teach_path, &cfg.dmp, cfg.teach.sim.seed).map_err(fail("teach")),
    }
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn force_log(t: &Trajectory) -> String {
    let mut s = String::from("t,fx,fy,fz,tx,ty,tz,force_norm\n");
    for x in t.samples() {
        let w = x.wrench.unwrap_or_default();
        let mut row: Vec<String> = vec![fmt_sig9(x.t)];
        row.extend(w.to_array().iter().map(|v| fmt_sig9(*v)));
        row.push(fmt_sig9(w.force.norm()));
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn run(cli: Cli) -> Res<()> {
    let mut cfg = match &cli.common.config {
        Some(p) => RunConfig::load(p).map_err(fail("config"))?,
        None => RunConfig::default(),
    };
    let out = &cli.common.out;
    fs::create_dir_all(out).map_err(|e| Failure {
        kind: "io",
        detail: format!("file={}: {e}", out.display()),
    })?;

    // fold command-line overrides into the config before resolving
    match &cli.command {
        Command::Rollout { start, goal, tau, dt, .. } => {
            if let Some(s) = start {
                cfg.rollout.start = Some(parse_pose(s, "start")?);
            }
            if let Some(g) = goal {
                cfg.rollout.goal = Some(parse_pose(g, "goal")?);
            }
            cfg.rollout.tau = tau.or(cfg.rollout.tau);
            cfg.rollout.dt = dt.or(cfg.rollout.dt);
        }
        Command::Localize { scene } => load_scene(&mut cfg, scene)?,
        Command::Sweep {
            scene,
            yaw_min,
            yaw_max,
            step,
        } => {
            load_scene(&mut cfg, scene)?;
            cfg.sweep.yaw_min = yaw_min.unwrap_or(cfg.sweep.yaw_min);
            cfg.sweep.yaw_max = yaw_max.unwrap_or(cfg.sweep.yaw_max);
            cfg.sweep.step = step.unwrap_or(cfg.sweep.step);
        }
        Command::Trial { scene, hole, yaw, .. } => {
            load_scene(&mut cfg, scene)?;
            if let Some(h) = hole {
                cfg.assembly.hole = HoleSelection::Fixed(*h);
            }
            cfg.assembly.bar_yaw = yaw.unwrap_or(cfg.assembly.bar_yaw);
        }
        Command::Batch { scene, n, .. } => {
            load_scene(&mut cfg, scene)?;
            cfg.batch_n = n.unwrap_or(cfg.batch_n);
        }
        _ => {}
    }
    let cfg = cfg.resolve(cli.common.seed);
    write(&out.join("resolved_config.json"), &cfg.to_json())?;

    match &cli.command {
        Command::Fit { demo } => {
            let traj = Trajectory::read_csv(demo).map_err(fail("parse"))?;
            let (dmp, diag) = fit_pose_dmp(&traj, &cfg.dmp).map_err(fail("fit"))?;
            write(&out.join("dmp.json"), &dmp.to_json())?;
            let report = json!({
                "samples": diag.samples,
                "stationary": diag.stationary,
                "unsupported_bases": diag.unsupported,
                "tau": dmp.tau,
            });
            write(&out.join("fit_report.json"), &pretty(&report))?;
        }
        Command::Rollout { dmp, .. } => {
            let dmp = PoseDmp::load(dmp).map_err(fail("parse"))?;
            let r = &cfg.rollout;
            let start = r.start.unwrap_or(dmp.demo_start);
            let goal = r.goal.unwrap_or(dmp.demo_goal);
            let traj = rollout(&dmp, &start, &goal, r.tau.unwrap_or(dmp.tau), r.dt.unwrap_or(cfg.dmp.dt))
                .map_err(fail("rollout"))?;
            traj.write_csv(&out.join("rollout.csv")).map_err(fail("io"))?;
        }
        Command::TeachSim => {
            let seed = cfg.teach.sim.seed;
            let proposed = cfg.teach.run_proposed(&cfg.teach_path, seed).map_err(fail("teach"))?;
            let native = cfg.teach.run_native(&cfg.teach_path, seed).map_err(fail("teach"))?;
            proposed.write_csv(&out.join("demo_proposed.csv")).map_err(fail("io"))?;
            native.write_csv(&out.join("demo_native.csv")).map_err(fail("io"))?;
            write(&out.join("forces_proposed.csv"), &force_log(&proposed))?;
            write(&out.join("forces_native.csv"), &force_log(&native))?;
            let report = json!({
                "proposed": trajectory_report(&proposed).map_err(fail("metrics"))?,
                "native": trajectory_report(&native).map_err(fail("metrics"))?,
                "comparison": compare_demonstrations(&proposed, &native).map_err(fail("metrics"))?,
            });
            write(&out.join("teach_report.json"), &pretty(&report))?;
        }
        Command::Localize { .. } => {
            let a = &cfg.assembly;
            let scene = a.scene.scene().yawed(a.bar_yaw, &a.pivot);
            let mut csv = String::from("hole_id,detected,cx,cy,cz,ax,ay,az,radius,rms,center_err_m,reason\n");
            for h in 0..scene.holes.len() {
                let (truth, _, _) = scene.hole_world(h).map_err(fail("scene"))?;
                match localize(&scene, &a.scene.camera, h, &a.mask, cell_seed(cfg.seed, 0, h)) {
                    Ok(e) => {
                        let nums = [
                            e.center.x, e.center.y, e.center.z, e.axis.x, e.axis.y, e.axis.z, e.radius, e.rms,
                            (e.center - truth).norm(),
                        ];
                        let nums: Vec<String> = nums.iter().map(|v| fmt_sig9(*v)).collect();
                        csv.push_str(&format!("{h},true,{},\n", nums.join(",")));
                    }
                    Err(e @ (VisionError::NotDetectable { .. } | VisionError::ArcCoverage { .. } | VisionError::Degenerate(_) | VisionError::InsufficientPoints { .. })) => {
                        csv.push_str(&format!("{h},false,,,,,,,,,,{}\n", e.to_string().replace(',', ";")));
                    }
                    Err(e) => return Err(fail("localize")(e)),
                }
            }
            write(&out.join("holes.csv"), &csv)?;
        }
        Command::Sweep { .. } => {
            let a = &cfg.assembly;
            let r = detection_range_sweep(&a.scene.scene(), &a.scene.camera, &cfg.sweep).map_err(fail("sweep"))?;
            write(&out.join("sweep.csv"), &sweep_csv(&r.rows))?;
            write(&out.join("sweep_intervals.json"), &pretty(&r.holes))?;
        }
        Command::Trial { dmp, events, .. } => {
            let dmp = load_dmp(dmp, &cfg)?;
            let script = match events {
                Some(p) => parse_events(&read(p)?, &p.display().to_string()).map_err(fail("parse"))?,
                None => default_script(),
            };
            cfg.assembly.validate().map_err(fail("config"))?;
            let scenario = AssemblyScenario::from_config(&cfg.assembly, cfg.seed);
            let result = execute_trial(&cfg.assembly, &scenario, &dmp, &script);
            write(&out.join("trial.json"), &pretty(&result))?;
            write(&out.join("trial.csv"), &trials_csv(std::slice::from_ref(&result)))?;
            write(&out.join("events.log"), &cobot_lfd::assembly::events_to_string(&result.events))?;
            println!("success={}", result.success);
        }
        Command::Batch { dmp, .. } => {
            let dmp = load_dmp(dmp, &cfg)?;
            let report = run_batch(&cfg.assembly, &dmp, cfg.batch_n, cfg.seed).map_err(fail("batch"))?;
            write(&out.join("batch.json"), &pretty(&report))?;
            write(&out.join("batch.csv"), &trials_csv(&report.trials))?;
            println!("success_rate={:?}", report.success_rate);
        }
        Command::Metrics { traj, compare } => {
            let a = Trajectory::read_csv(traj).map_err(fail("parse"))?;
            let mut report = json!({ "report": trajectory_report(&a).map_err(fail("metrics"))? });
            if let Some(path) = compare {
                let b = Trajectory::read_csv(path).map_err(fail("parse"))?;
                report["compare_report"] = json!(trajectory_report(&b).map_err(fail("metrics"))?);
                report["comparison"] = json!(compare_demonstrations(&a, &b).map_err(fail("metrics"))?);
                report["reference_rows"] = json!(reference_rows());
            }
            write(&out.join("metrics.json"), &pretty(&report))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error kind={} {}", f.kind, f.detail.replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
